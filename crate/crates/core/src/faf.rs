//! Multi-hop fixed aggregation features.
//!
//! For every reducer `r` the hop recursion runs its own chain:
//!
//! ```text
//! h_v^(0, r) = x_v
//! h_v^(k, r) = r({ h_u^(k-1, r) : u in N(v) })
//! z_v = x_v ++ h_v^(1, r_1) ++ ... ++ h_v^(K, r_1) ++ h_v^(1, r_2) ++ ...
//! ```
//!
//! so `z_v` has `F * (1 + |R| * K)` columns. Memory for the compiled matrix
//! is `num_nodes * F * (1 + |R| * K)` values.

use std::fmt;
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FafError, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::ka::KaEncoder;
use crate::reducers::{reduce_into, ReducerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopSelection {
    #[default]
    AllHops,
    LastHopOnly,
    LastHopPlusBase,
}

impl HopSelection {
    pub fn name(self) -> &'static str {
        match self {
            HopSelection::AllHops => "all",
            HopSelection::LastHopOnly => "last",
            HopSelection::LastHopPlusBase => "last+base",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "all" | "all_hops" => Ok(HopSelection::AllHops),
            "last" | "last_hop_only" => Ok(HopSelection::LastHopOnly),
            "last+base" | "last_hop_plus_base" => Ok(HopSelection::LastHopPlusBase),
            other => Err(FafError::InvalidConfig(format!("unknown hop selection {other:?}"))),
        }
    }

    fn includes_base(self) -> bool {
        self != HopSelection::LastHopOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    None,
    PerColumnStandardize,
}

impl Scaling {
    pub fn name(self) -> &'static str {
        match self {
            Scaling::None => "none",
            Scaling::PerColumnStandardize => "standardize",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Scaling::None),
            "standardize" | "per_column_standardize" => Ok(Scaling::PerColumnStandardize),
            other => Err(FafError::InvalidConfig(format!("unknown scaling {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FafConfig {
    pub reducers: Vec<ReducerKind>,
    pub hops: usize,
    pub hop_selection: HopSelection,
    pub scaling: Scaling,
    pub ka: KaEncoder,
}

impl Default for FafConfig {
    fn default() -> Self {
        Self {
            reducers: vec![ReducerKind::Mean],
            hops: 2,
            hop_selection: HopSelection::AllHops,
            scaling: Scaling::None,
            ka: KaEncoder::default(),
        }
    }
}

impl FafConfig {
    pub fn new(reducers: Vec<ReducerKind>, hops: usize) -> Self {
        Self {
            reducers,
            hops,
            ..Self::default()
        }
    }

    pub fn with_hop_selection(mut self, selection: HopSelection) -> Self {
        self.hop_selection = selection;
        self
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reducers.is_empty() && self.hops > 0 {
            return Err(FafError::InvalidConfig(
                "at least one reducer is required when hops > 0".to_string(),
            ));
        }
        for (i, r) in self.reducers.iter().enumerate() {
            if self.reducers[..i].contains(r) {
                return Err(FafError::InvalidConfig(format!("duplicate reducer {r}")));
            }
        }
        if self.hops == 0 && self.hop_selection == HopSelection::LastHopOnly {
            return Err(FafError::InvalidConfig(
                "last-hop-only selection needs hops >= 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Number of output columns for `num_features` base features.
    pub fn output_dim(&self, num_features: usize) -> usize {
        let last = if self.hops > 0 { self.reducers.len() } else { 0 };
        let blocks = match self.hop_selection {
            HopSelection::AllHops => 1 + self.reducers.len() * self.hops,
            HopSelection::LastHopOnly => last,
            HopSelection::LastHopPlusBase => 1 + last,
        };
        num_features * blocks
    }

    /// Hops emitted for each reducer chain.
    fn emitted_hops(&self) -> std::ops::RangeInclusive<usize> {
        match self.hop_selection {
            HopSelection::AllHops => 1..=self.hops,
            // an empty range when hops == 0
            _ => self.hops.max(1)..=self.hops,
        }
    }
}

/// Which column block a column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ColumnSource {
    Base,
    Reducer(ReducerKind),
}

impl fmt::Display for ColumnSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSource::Base => f.write_str("base"),
            ColumnSource::Reducer(r) => f.write_str(r.name()),
        }
    }
}

impl From<ColumnSource> for String {
    fn from(source: ColumnSource) -> Self {
        source.to_string()
    }
}

impl TryFrom<String> for ColumnSource {
    type Error = FafError;

    fn try_from(s: String) -> Result<Self> {
        if s == "base" {
            Ok(ColumnSource::Base)
        } else {
            Ok(ColumnSource::Reducer(s.parse()?))
        }
    }
}

/// Graph the aggregation of a column was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Original,
    Rew,
    SpPos,
    SpNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub hop: usize,
    pub reducer: ColumnSource,
    pub base_feature: usize,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledFeatures {
    matrix: Array2<f64>,
    columns: Vec<ColumnDescriptor>,
}

impl CompiledFeatures {
    pub fn new(matrix: Array2<f64>, columns: Vec<ColumnDescriptor>) -> Result<Self> {
        if matrix.ncols() != columns.len() {
            return Err(FafError::DimensionMismatch {
                expected: columns.len(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { matrix, columns })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Number of base features (columns sharing hop 0 or, for last-hop
    /// selections, one block).
    pub fn num_base_features(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.base_feature + 1)
            .max()
            .unwrap_or(0)
    }

    /// Column positions whose descriptor satisfies `pred`, in order.
    pub fn select(&self, mut pred: impl FnMut(&ColumnDescriptor) -> bool) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| pred(&self.columns[i]))
            .collect()
    }

    /// Values of one `(hop, reducer)` block as a `num_nodes x F` matrix.
    pub fn block(&self, hop: usize, reducer: ColumnSource) -> Option<Array2<f64>> {
        self.block_with_provenance(hop, reducer, Provenance::Original)
    }

    pub fn block_with_provenance(
        &self,
        hop: usize,
        reducer: ColumnSource,
        provenance: Provenance,
    ) -> Option<Array2<f64>> {
        let cols = self.select(|c| {
            c.hop == hop
                && c.reducer == reducer
                && (hop == 0 || c.provenance == provenance)
        });
        if cols.is_empty() {
            return None;
        }
        Some(self.matrix.select(Axis(1), &cols))
    }

    pub fn column_index_json(&self) -> String {
        serde_json::to_string_pretty(&self.columns).expect("descriptors serialize")
    }

    pub fn parse_column_index(json: &str) -> Result<Vec<ColumnDescriptor>> {
        serde_json::from_str(json)
            .map_err(|e| FafError::InvalidData(format!("invalid column index: {e}")))
    }

    /// Appends the columns of `other` (same node count).
    pub fn concat(mut self, other: CompiledFeatures) -> Result<Self> {
        if other.num_nodes() != self.num_nodes() {
            return Err(FafError::DimensionMismatch {
                expected: self.num_nodes(),
                found: other.num_nodes(),
            });
        }
        self.matrix = ndarray::concatenate(Axis(1), &[self.matrix.view(), other.matrix.view()])
            .expect("row counts checked");
        self.columns.extend(other.columns);
        Ok(self)
    }

    pub fn standardized(mut self) -> Self {
        standardize_columns(&mut self.matrix);
        self
    }
}

/// Wall time of one `(reducer, hop)` aggregation pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopTiming {
    pub reducer: ReducerKind,
    pub hop: usize,
    pub seconds: f64,
}

pub fn compile(graph: &Graph, x: &FeatureMatrix, cfg: &FafConfig) -> Result<CompiledFeatures> {
    compile_with_timing(graph, x, cfg).map(|(features, _)| features)
}

pub fn compile_with_timing(
    graph: &Graph,
    x: &FeatureMatrix,
    cfg: &FafConfig,
) -> Result<(CompiledFeatures, Vec<HopTiming>)> {
    let (features, timings) = compile_blocks(
        graph,
        x,
        cfg,
        Provenance::Original,
        cfg.hop_selection.includes_base(),
    )?;
    let features = match cfg.scaling {
        Scaling::None => features,
        Scaling::PerColumnStandardize => features.standardized(),
    };
    Ok((features, timings))
}

/// Unscaled FAF blocks on `graph`, tagging reducer columns with `provenance`.
pub(crate) fn compile_blocks(
    graph: &Graph,
    x: &FeatureMatrix,
    cfg: &FafConfig,
    provenance: Provenance,
    include_base: bool,
) -> Result<(CompiledFeatures, Vec<HopTiming>)> {
    cfg.validate()?;
    if x.num_nodes() != graph.num_nodes() {
        return Err(FafError::DimensionMismatch {
            expected: graph.num_nodes(),
            found: x.num_nodes(),
        });
    }
    let num_features = x.num_features();
    let emitted = cfg.emitted_hops();

    let mut blocks: Vec<Array2<f64>> = Vec::new();
    let mut columns = Vec::new();
    if include_base {
        blocks.push(x.values().to_owned());
        columns.extend((0..num_features).map(|f| ColumnDescriptor {
            hop: 0,
            reducer: ColumnSource::Base,
            base_feature: f,
            provenance: Provenance::Original,
        }));
    }

    let mut timings = Vec::new();
    for &reducer in &cfg.reducers {
        let mut prev = x.values().to_owned();
        for hop in 1..=cfg.hops {
            let start = Instant::now();
            let next = hop_features_with(graph, prev.view(), reducer, &cfg.ka)?;
            if let Some(((node, _), _)) = next.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(FafError::NonFiniteIntermediate {
                    hop,
                    reducer: reducer.to_string(),
                    node,
                });
            }
            timings.push(HopTiming {
                reducer,
                hop,
                seconds: start.elapsed().as_secs_f64(),
            });
            if emitted.contains(&hop) {
                blocks.push(next.clone());
                columns.extend((0..num_features).map(|f| ColumnDescriptor {
                    hop,
                    reducer: ColumnSource::Reducer(reducer),
                    base_feature: f,
                    provenance,
                }));
            }
            prev = next;
        }
    }

    let matrix = if blocks.is_empty() {
        Array2::zeros((graph.num_nodes(), 0))
    } else {
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        ndarray::concatenate(Axis(1), &views).expect("blocks share the row count")
    };
    Ok((CompiledFeatures::new(matrix, columns)?, timings))
}

/// One aggregation round: row `v` of the result reduces the rows of `prev`
/// at the neighbors of `v`.
pub fn hop_features(
    graph: &Graph,
    prev: ArrayView2<'_, f64>,
    kind: ReducerKind,
) -> Result<Array2<f64>> {
    hop_features_with(graph, prev, kind, &KaEncoder::default())
}

pub fn hop_features_with(
    graph: &Graph,
    prev: ArrayView2<'_, f64>,
    kind: ReducerKind,
    encoder: &KaEncoder,
) -> Result<Array2<f64>> {
    if prev.nrows() != graph.num_nodes() {
        return Err(FafError::DimensionMismatch {
            expected: graph.num_nodes(),
            found: prev.nrows(),
        });
    }
    let input = if kind == ReducerKind::Ka {
        min_max_rescale(prev)
    } else {
        prev.as_standard_layout().into_owned()
    };
    let dim = input.ncols();
    let data = input.as_slice().expect("standard layout");
    let row = |u: usize| &data[u * dim..(u + 1) * dim];

    let mut out = Array2::zeros((graph.num_nodes(), dim));
    let mut scratch = Vec::new();
    for (v, mut out_row) in out.rows_mut().into_iter().enumerate() {
        let neighbors = graph.neighbors(v);
        let out_slice = out_row.as_slice_mut().expect("standard layout");
        reduce_into(
            kind,
            neighbors.iter().map(|&u| row(u)),
            neighbors.len(),
            out_slice,
            encoder,
            &mut scratch,
        )?;
    }
    Ok(out)
}

/// Per-column min-max rescaling into `[0, 1]`; constant columns map to 0.
pub fn min_max_rescale(values: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = values.as_standard_layout().into_owned();
    for mut col in out.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range > 0.0 && range.is_finite() {
            col.mapv_inplace(|x| ((x - lo) / range).clamp(0.0, 1.0));
        } else {
            col.fill(0.0);
        }
    }
    out
}

/// Shifts and scales every column to mean 0 and (population) std 1.
/// Zero-variance columns become all zeros.
pub fn standardize_columns(matrix: &mut Array2<f64>) {
    let n = matrix.nrows();
    if n == 0 {
        return;
    }
    for mut col in matrix.columns_mut() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 0.0 {
            col.mapv_inplace(|x| (x - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
}

/// Recovers per-basis-vector multiplicities from a 1-hop sum over orthogonal
/// features: `count_f = <x_f, h> / <x_f, x_f>`.
pub fn count_recovery(sum_hop1: &[f64], basis: &[&[f64]]) -> Result<Vec<f64>> {
    let dim = sum_hop1.len();
    for (i, x) in basis.iter().enumerate() {
        if x.len() != dim {
            return Err(FafError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if dot(x, x) == 0.0 {
            return Err(FafError::InvalidData(format!("basis vector {i} is zero")));
        }
    }
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let d = dot(basis[i], basis[j]);
            let scale = (dot(basis[i], basis[i]) * dot(basis[j], basis[j])).sqrt();
            if d.abs() > 1e-9 * scale {
                return Err(FafError::NotOrthogonal { i, j, dot: d });
            }
        }
    }
    Ok(basis
        .iter()
        .map(|x| dot(x, sum_hop1) / dot(x, x))
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `num_nodes x F` slice of `matrix` holding columns `[start, start + F)`.
pub fn column_block(matrix: ArrayView2<'_, f64>, start: usize, width: usize) -> Array2<f64> {
    matrix.slice(s![.., start..start + width]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn dimension_formula() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let x = FeatureMatrix::new(Array2::from_elem((4, 3), 1.0)).unwrap();
        let cfg = FafConfig::new(ReducerKind::FAF4.to_vec(), 2);
        let z = compile(&g, &x, &cfg).unwrap();
        assert_eq!(z.dim(), 27);
        assert_eq!(cfg.output_dim(3), 27);
    }

    #[test]
    fn zero_hops_returns_raw_features() {
        let g = path3();
        let x = FeatureMatrix::new(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let z = compile(&g, &x, &FafConfig::new(vec![ReducerKind::Sum], 0)).unwrap();
        assert_eq!(z.matrix(), x.values());
        assert!(z.columns().iter().all(|c| c.hop == 0));
    }

    #[test]
    fn descriptor_order() {
        let g = path3();
        let x = FeatureMatrix::new(Array2::zeros((3, 2))).unwrap();
        let cfg = FafConfig::new(vec![ReducerKind::Max, ReducerKind::Mean], 2);
        let z = compile(&g, &x, &cfg).unwrap();
        let order: Vec<(usize, String, usize)> = z
            .columns()
            .iter()
            .map(|c| (c.hop, c.reducer.to_string(), c.base_feature))
            .collect();
        let expected: Vec<(usize, String, usize)> = vec![
            (0, "base", 0),
            (0, "base", 1),
            (1, "max", 0),
            (1, "max", 1),
            (2, "max", 0),
            (2, "max", 1),
            (1, "mean", 0),
            (1, "mean", 1),
            (2, "mean", 0),
            (2, "mean", 1),
        ]
        .into_iter()
        .map(|(h, r, f)| (h, r.to_string(), f))
        .collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn one_hot_sum_on_path() {
        let g = path3();
        let eye = Array2::<f64>::eye(3);
        let h = hop_features(&g, eye.view(), ReducerKind::Sum).unwrap();
        assert_eq!(h.row(1), array![1.0, 0.0, 1.0]);
    }

    #[test]
    fn isolated_node_gets_zero_row() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let x = array![[1.0, -2.0], [3.0, 4.0], [5.0, 6.0]];
        for kind in ReducerKind::ALL {
            let h = hop_features(&g, x.view(), kind).unwrap();
            assert_eq!(h.row(2), array![0.0, 0.0], "{kind}");
        }
    }

    #[test]
    fn mean_preserves_constant_on_regular_graph() {
        // 6-cycle: 2-regular
        let g = Graph::from_edges(6, (0..6).map(|v| (v, (v + 1) % 6))).unwrap();
        let x = FeatureMatrix::new(Array2::from_elem((6, 1), 0.375)).unwrap();
        let z = compile(&g, &x, &FafConfig::new(vec![ReducerKind::Mean], 4)).unwrap();
        assert!(z.matrix().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn last_hop_selections() {
        let g = path3();
        let x = FeatureMatrix::new(Array2::eye(3)).unwrap();
        let base = FafConfig::new(vec![ReducerKind::Sum, ReducerKind::Mean], 3);
        let all = compile(&g, &x, &base).unwrap();

        let last = compile(&g, &x, &base.clone().with_hop_selection(HopSelection::LastHopOnly)).unwrap();
        assert_eq!(last.dim(), 6);
        assert!(last.columns().iter().all(|c| c.hop == 3));
        let sum3 = ColumnSource::Reducer(ReducerKind::Sum);
        assert_eq!(last.block(3, sum3), all.block(3, sum3));

        let plus = compile(&g, &x, &base.with_hop_selection(HopSelection::LastHopPlusBase)).unwrap();
        assert_eq!(plus.dim(), 9);
        assert_eq!(plus.columns()[0].hop, 0);
    }

    #[test]
    fn standardize_zeroes_constant_columns() {
        let mut m = array![[1.0, 5.0], [3.0, 5.0]];
        standardize_columns(&mut m);
        assert_eq!(m, array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn ka_hop_uses_rescaled_columns() {
        let g = path3();
        // column 0 spans [2, 6]; column 1 is constant
        let x = array![[2.0, 7.0], [4.0, 7.0], [6.0, 7.0]];
        let h = hop_features(&g, x.view(), ReducerKind::Ka).unwrap();
        let enc = KaEncoder::default();
        assert_eq!(h[[1, 0]], enc.aggregate(&[0.0, 1.0]).unwrap().to_f64());
        assert_eq!(h[[1, 1]], 0.0);
        assert_eq!(h[[0, 0]], enc.phi(0.5).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(FafConfig::new(vec![], 1).validate().is_err());
        assert!(FafConfig::new(vec![], 0).validate().is_ok());
        assert!(FafConfig::new(vec![ReducerKind::Sum, ReducerKind::Sum], 1)
            .validate()
            .is_err());
    }

    #[test]
    fn count_recovery_cases() {
        let e1: &[f64] = &[1.0, 0.0];
        let e2: &[f64] = &[0.0, 1.0];
        assert_eq!(count_recovery(&[0.0, 2.0], &[e1, e2]).unwrap(), vec![0.0, 2.0]);
        assert_eq!(count_recovery(&[0.0, 0.0], &[e1, e2]).unwrap(), vec![0.0, 0.0]);
        let skew: &[f64] = &[1.0, 1.0];
        assert!(matches!(
            count_recovery(&[1.0, 1.0], &[e1, skew]).unwrap_err(),
            FafError::NotOrthogonal { .. }
        ));
    }

    #[test]
    fn column_index_json_round_trip() {
        let g = path3();
        let x = FeatureMatrix::new(Array2::zeros((3, 1))).unwrap();
        let z = compile(&g, &x, &FafConfig::new(vec![ReducerKind::Ka], 1)).unwrap();
        let json = z.column_index_json();
        assert!(json.contains("\"reducer\": \"ka\""));
        assert!(json.contains("\"reducer\": \"base\""));
        assert_eq!(CompiledFeatures::parse_column_index(&json).unwrap(), z.columns());
    }
}
