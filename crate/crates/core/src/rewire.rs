//! Feature-similarity edge filtering (REW) and signed edge splitting (SP).
//!
//! Similarities come from the raw features once; edges with strictly
//! negative cosine similarity are dropped (REW) or moved into a separate
//! negative graph (SP).

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{FafError, Result};
use crate::faf::{compile_blocks, CompiledFeatures, FafConfig, Provenance, Scaling};
use crate::features::FeatureMatrix;
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewireMode {
    Drop,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewireCombine {
    Replace,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewireSpec {
    pub mode: RewireMode,
    pub combine: RewireCombine,
    /// Edges with similarity strictly below this value are negative.
    pub similarity_threshold: f64,
}

impl RewireSpec {
    pub fn new(mode: RewireMode, combine: RewireCombine) -> Self {
        Self {
            mode,
            combine,
            similarity_threshold: 0.0,
        }
    }
}

impl RewireMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "drop" => Ok(RewireMode::Drop),
            "split" => Ok(RewireMode::Split),
            other => Err(FafError::InvalidConfig(format!("unknown rewire mode {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewireMode::Drop => "drop",
            RewireMode::Split => "split",
        }
    }
}

impl RewireCombine {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "replace" => Ok(RewireCombine::Replace),
            "concat" => Ok(RewireCombine::Concat),
            other => Err(FafError::InvalidConfig(format!(
                "unknown rewire combine mode {other:?}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewireCombine::Replace => "replace",
            RewireCombine::Concat => "concat",
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FafError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let norm_a = a.dot(&a).sqrt();
    let norm_b = b.dot(&b).sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    Ok((a.dot(&b) / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

fn check_paired(graph: &Graph, x: &FeatureMatrix) -> Result<()> {
    if graph.num_nodes() != x.num_nodes() {
        return Err(FafError::DimensionMismatch {
            expected: graph.num_nodes(),
            found: x.num_nodes(),
        });
    }
    Ok(())
}

fn is_positive(x: &FeatureMatrix, u: usize, v: usize, threshold: f64) -> bool {
    let sim = cosine_similarity(x.row(u), x.row(v)).expect("rows share a length");
    sim >= threshold
}

/// Keeps only edges whose endpoint features are not negatively similar.
pub fn rewire_drop(graph: &Graph, x: &FeatureMatrix) -> Result<Graph> {
    rewire_drop_with(graph, x, 0.0)
}

pub fn rewire_drop_with(graph: &Graph, x: &FeatureMatrix, threshold: f64) -> Result<Graph> {
    check_paired(graph, x)?;
    Ok(graph.filter_edges(|u, v| is_positive(x, u, v, threshold)))
}

/// Partitions edges into (non-negative similarity, negative similarity).
pub fn rewire_split(graph: &Graph, x: &FeatureMatrix) -> Result<(Graph, Graph)> {
    rewire_split_with(graph, x, 0.0)
}

pub fn rewire_split_with(
    graph: &Graph,
    x: &FeatureMatrix,
    threshold: f64,
) -> Result<(Graph, Graph)> {
    check_paired(graph, x)?;
    let (positive, negative): (Vec<_>, Vec<_>) = graph
        .edges()
        .partition(|&(u, v)| is_positive(x, u, v, threshold));
    Ok((
        Graph::from_edges(graph.num_nodes(), positive)?,
        Graph::from_edges(graph.num_nodes(), negative)?,
    ))
}

/// FAFs on rewired graphs, either replacing or appended to the plain FAFs.
/// Hop-0 columns appear once. Scaling, if configured, applies to the whole
/// concatenated matrix.
pub fn compile_augmented(
    graph: &Graph,
    x: &FeatureMatrix,
    cfg: &FafConfig,
    spec: &RewireSpec,
) -> Result<CompiledFeatures> {
    check_paired(graph, x)?;
    let include_base = cfg.hop_selection != crate::faf::HopSelection::LastHopOnly;

    let rewired: Vec<(Graph, Provenance)> = match spec.mode {
        RewireMode::Drop => vec![(
            rewire_drop_with(graph, x, spec.similarity_threshold)?,
            Provenance::Rew,
        )],
        RewireMode::Split => {
            let (pos, neg) = rewire_split_with(graph, x, spec.similarity_threshold)?;
            vec![(pos, Provenance::SpPos), (neg, Provenance::SpNeg)]
        }
    };

    let mut parts: Vec<CompiledFeatures> = Vec::new();
    if spec.combine == RewireCombine::Concat {
        parts.push(compile_blocks(graph, x, cfg, Provenance::Original, include_base)?.0);
    }
    for (i, (g, provenance)) in rewired.iter().enumerate() {
        let base_here = include_base && parts.is_empty() && i == 0;
        parts.push(compile_blocks(g, x, cfg, *provenance, base_here)?.0);
    }

    let mut parts = parts.into_iter();
    let mut out = parts.next().expect("at least one part");
    for part in parts {
        out = out.concat(part)?;
    }
    Ok(match cfg.scaling {
        Scaling::None => out,
        Scaling::PerColumnStandardize => out.standardized(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faf::compile;
    use crate::reducers::ReducerKind;
    use ndarray::array;

    fn triangle() -> (Graph, FeatureMatrix) {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let x = FeatureMatrix::new(array![[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]).unwrap();
        (g, x)
    }

    #[test]
    fn cosine_cases() {
        let sim = |a: [f64; 2], b: [f64; 2]| {
            cosine_similarity(ArrayView1::from(&a), ArrayView1::from(&b)).unwrap()
        };
        assert_eq!(sim([1.0, 0.0], [0.0, 1.0]), 0.0);
        assert_eq!(sim([1.0, 0.0], [-1.0, 0.0]), -1.0);
        assert!((sim([1.0, 1.0], [1.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sim([0.0, 0.0], [-1.0, 0.0]), 0.0);
        assert!(cosine_similarity(
            ArrayView1::from(&[1.0]),
            ArrayView1::from(&[1.0, 2.0])
        )
        .is_err());
    }

    #[test]
    fn drop_on_triangle() {
        let (g, x) = triangle();
        let kept = rewire_drop(&g, &x).unwrap();
        assert_eq!(kept.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn split_on_triangle() {
        let (g, x) = triangle();
        let (pos, neg) = rewire_split(&g, &x).unwrap();
        assert_eq!(pos.num_edges(), 1);
        assert_eq!(neg.num_edges(), 2);
    }

    #[test]
    fn orthogonal_features_keep_all_edges() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let x = FeatureMatrix::new(ndarray::Array2::eye(3)).unwrap();
        assert_eq!(rewire_drop(&g, &x).unwrap(), g);
        let (pos, neg) = rewire_split(&g, &x).unwrap();
        assert_eq!(pos, g);
        assert_eq!(neg.num_edges(), 0);
    }

    #[test]
    fn augmented_dimensions() {
        let (g, x) = triangle();
        let (f, k) = (2, 3);
        let cfg = FafConfig::new(vec![ReducerKind::Mean], k);
        let drop = compile_augmented(&g, &x, &cfg, &RewireSpec::new(RewireMode::Drop, RewireCombine::Concat)).unwrap();
        assert_eq!(drop.dim(), f * (1 + k) + f * k);
        let split = compile_augmented(&g, &x, &cfg, &RewireSpec::new(RewireMode::Split, RewireCombine::Concat)).unwrap();
        assert_eq!(split.dim(), f * (1 + k) + 2 * f * k);
        let replace = compile_augmented(&g, &x, &cfg, &RewireSpec::new(RewireMode::Split, RewireCombine::Replace)).unwrap();
        assert_eq!(replace.dim(), f * (1 + 2 * k));
        let tags: Vec<Provenance> = split.columns().iter().map(|c| c.provenance).collect();
        assert_eq!(tags[f * (1 + k)], Provenance::SpPos);
        assert_eq!(*tags.last().unwrap(), Provenance::SpNeg);
    }

    #[test]
    fn replace_without_negative_edges_matches_plain() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let x = FeatureMatrix::new(array![[1.0, 0.5], [0.2, 1.0], [0.0, 3.0]]).unwrap();
        let cfg = FafConfig::new(vec![ReducerKind::Sum, ReducerKind::Max], 2);
        let plain = compile(&g, &x, &cfg).unwrap();
        let rew = compile_augmented(&g, &x, &cfg, &RewireSpec::new(RewireMode::Drop, RewireCombine::Replace)).unwrap();
        assert_eq!(rew.matrix(), plain.matrix());
    }

    #[test]
    fn concat_prefix_is_plain_matrix() {
        let (g, x) = triangle();
        let cfg = FafConfig::new(ReducerKind::FAF4.to_vec(), 2);
        let plain = compile(&g, &x, &cfg).unwrap();
        let aug = compile_augmented(&g, &x, &cfg, &RewireSpec::new(RewireMode::Split, RewireCombine::Concat)).unwrap();
        let prefix = aug.matrix().slice(ndarray::s![.., ..plain.dim()]).to_owned();
        assert_eq!(prefix, plain.matrix());
        assert_eq!(&aug.columns()[..plain.dim()], plain.columns());
    }
}
