//! Training-free multi-hop neighborhood aggregation features (FAFs).
//!
//! A [`Graph`] and a [`FeatureMatrix`] are compiled into a tabular matrix by
//! recursively applying fixed reducers (mean, sum, max, min, std, and the
//! Cantor-set KA encoder) over neighborhoods and concatenating every hop.

pub mod error;
pub mod faf;
pub mod features;
pub mod graph;
pub mod io;
pub mod ka;
pub mod reducers;
pub mod rewire;
pub mod splits;
pub mod synth;

pub use error::{FafError, Result};
pub use faf::{
    compile, compile_with_timing, count_recovery, hop_features, ColumnDescriptor, ColumnSource,
    CompiledFeatures, FafConfig, HopSelection, Provenance, Scaling,
};
pub use features::FeatureMatrix;
pub use graph::Graph;
pub use ka::{KaCode, KaEncoder};
pub use reducers::{reduce, ReducerKind};
pub use rewire::{compile_augmented, RewireCombine, RewireMode, RewireSpec};
pub use splits::{LabeledSplits, Split};
