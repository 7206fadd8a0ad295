//! Seeded synthetic datasets: a Minesweeper-style king grid, the two-hop
//! example tree and its collapsed twin, planted-partition graphs and an
//! XOR-feature table.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FafError, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::splits::{LabeledSplits, Split};

/// A graph with features, labels and splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabeledSplits,
}

/// Independent RNG stream for `purpose` under a user seed.
fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

const MINES_STREAM: u64 = 1;
const MASK_STREAM: u64 = 2;
const EDGE_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;

/// Features per Minesweeper node: mask flag plus six count buckets.
pub const MINESWEEPER_FEATURES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinesweeperSpec {
    pub side: usize,
    pub mine_rate: f64,
    pub mask_rate: f64,
    pub seed: u64,
}

impl Default for MinesweeperSpec {
    fn default() -> Self {
        Self {
            side: 100,
            mine_rate: 0.2,
            mask_rate: 0.5,
            seed: 0,
        }
    }
}

impl MinesweeperSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Edge count of the `side x side` king grid.
pub fn king_grid_edges(side: usize) -> usize {
    if side == 0 {
        return 0;
    }
    2 * side * (side - 1) + 2 * (side - 1) * (side - 1)
}

/// The `side x side` grid where each cell touches its up to 8 surrounding
/// cells. Node `r * side + c` is the cell in row `r`, column `c`.
pub fn king_grid(side: usize) -> Graph {
    let mut edges = Vec::with_capacity(king_grid_edges(side));
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
                if c + 1 < side {
                    edges.push((v, v + side + 1));
                }
                if c > 0 {
                    edges.push((v, v + side - 1));
                }
            }
        }
    }
    Graph::from_edges(side * side, edges).expect("grid indices are in range")
}

/// Feature column for an unmasked cell with `count` adjacent mines; counts of
/// five and above share the last bucket.
pub fn mine_count_bucket(count: usize) -> usize {
    1 + count.min(MINESWEEPER_FEATURES - 2)
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(FafError::InvalidConfig(format!("{name} {rate} outside [0, 1]")));
    }
    Ok(())
}

/// Exactly `round(rate * n)` distinct nodes, chosen uniformly.
fn choose_nodes(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let k = ((rate * n as f64).round() as usize).min(n);
    let mut chosen = vec![false; n];
    for v in sample(rng, n, k) {
        chosen[v] = true;
    }
    chosen
}

pub fn gen_minesweeper(spec: &MinesweeperSpec) -> Result<Dataset> {
    if spec.side < 2 {
        return Err(FafError::InvalidConfig(format!(
            "minesweeper side must be at least 2, got {}",
            spec.side
        )));
    }
    check_rate("mine_rate", spec.mine_rate)?;
    check_rate("mask_rate", spec.mask_rate)?;

    let n = spec.side * spec.side;
    let graph = king_grid(spec.side);
    let mines = choose_nodes(n, spec.mine_rate, &mut stream(spec.seed, MINES_STREAM));
    let masked = choose_nodes(n, spec.mask_rate, &mut stream(spec.seed, MASK_STREAM));

    let mut values = Array2::zeros((n, MINESWEEPER_FEATURES));
    for v in 0..n {
        if masked[v] {
            values[[v, 0]] = 1.0;
        } else {
            let count = graph.neighbors(v).iter().filter(|&&u| mines[u]).count();
            values[[v, mine_count_bucket(count)]] = 1.0;
        }
    }
    let labels: Vec<i64> = mines.iter().map(|&m| i64::from(m)).collect();
    let nodes: Vec<usize> = (0..n).collect();
    let split = Split::random(&nodes, 0.5, 0.25, spec.seed);

    Ok(Dataset {
        graph,
        features: FeatureMatrix::new(values)?,
        labels: LabeledSplits::new(labels, 2, vec![split])?,
    })
}

const SQUARE: [f64; 2] = [1.0, 0.0];
const CIRCLE: [f64; 2] = [0.0, 1.0];

fn tree(edges: &[(usize, usize)], shapes: [[f64; 2]; 8]) -> (Graph, FeatureMatrix) {
    // figure labels 1..=8 map to node indices 0..=7
    let graph = Graph::from_edges(8, edges.iter().map(|&(a, b)| (a - 1, b - 1)))
        .expect("tree indices are in range");
    let rows: Vec<Vec<f64>> = shapes.iter().map(|s| s.to_vec()).collect();
    (graph, FeatureMatrix::from_rows(&rows).expect("finite one-hot rows"))
}

/// Two-hop example tree. Nodes are indexed by figure label minus one:
/// root 1 (square) joins circles 2 and 3; node 2 holds square 4 and circle
/// 5; node 3 holds squares 6, 7 and circle 8. Square = (1, 0), circle = (0, 1).
pub fn gen_fig4_tree() -> (Graph, FeatureMatrix) {
    tree(
        &[(1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7), (3, 8)],
        [SQUARE, CIRCLE, CIRCLE, SQUARE, CIRCLE, SQUARE, SQUARE, CIRCLE],
    )
}

/// Same node features as [`gen_fig4_tree`] but every leaf hangs off node 2
/// and node 3 is itself a leaf. The root's sum features up to hop 2 match.
pub fn gen_fig4_collapsed_variant() -> (Graph, FeatureMatrix) {
    tree(
        &[(1, 2), (1, 3), (2, 4), (2, 5), (2, 6), (2, 7), (2, 8)],
        [SQUARE, CIRCLE, CIRCLE, SQUARE, CIRCLE, SQUARE, SQUARE, CIRCLE],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPartitionSpec {
    pub n_per_class: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_noise: f64,
    pub seed: u64,
}

/// Stochastic block model with one-hot class features plus Gaussian noise.
/// Node `v` belongs to class `v / n_per_class`.
pub fn gen_planted_partition(spec: &PlantedPartitionSpec) -> Result<Dataset> {
    if spec.n_per_class == 0 || spec.classes < 2 {
        return Err(FafError::InvalidConfig(
            "planted partition needs n_per_class >= 1 and classes >= 2".to_string(),
        ));
    }
    check_rate("p_in", spec.p_in)?;
    check_rate("p_out", spec.p_out)?;
    if spec.p_out > spec.p_in {
        return Err(FafError::InvalidConfig(format!(
            "p_out {} exceeds p_in {}",
            spec.p_out, spec.p_in
        )));
    }
    if !(spec.feature_noise >= 0.0 && spec.feature_noise.is_finite()) {
        return Err(FafError::InvalidConfig(format!(
            "feature noise {} must be finite and non-negative",
            spec.feature_noise
        )));
    }

    let n = spec.n_per_class * spec.classes;
    let class_of = |v: usize| v / spec.n_per_class;

    let mut rng = stream(spec.seed, EDGE_STREAM);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if class_of(u) == class_of(v) {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let mut rng = stream(spec.seed, NOISE_STREAM);
    let noise = Normal::new(0.0, spec.feature_noise.max(f64::MIN_POSITIVE))
        .expect("valid standard deviation");
    let mut values = Array2::zeros((n, spec.classes));
    for v in 0..n {
        for c in 0..spec.classes {
            let signal = if c == class_of(v) { 1.0 } else { 0.0 };
            let jitter = if spec.feature_noise > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            values[[v, c]] = signal + jitter;
        }
    }

    let labels: Vec<i64> = (0..n).map(|v| class_of(v) as i64).collect();
    let nodes: Vec<usize> = (0..n).collect();
    let split = Split::random(&nodes, 0.5, 0.25, spec.seed);
    Ok(Dataset {
        graph,
        features: FeatureMatrix::new(values)?,
        labels: LabeledSplits::new(labels, spec.classes, vec![split])?,
    })
}

/// Edgeless dataset whose two features sit on the corners `(+-1, +-1)` with
/// label `(x > 0) xor (y > 0)`. Copies of each corner are dealt round-robin
/// into train, train, val, test so every part sees all four corners.
pub fn gen_xor(copies_per_corner: usize) -> Result<Dataset> {
    if copies_per_corner < 4 {
        return Err(FafError::InvalidConfig(
            "xor dataset needs at least 4 copies per corner".to_string(),
        ));
    }
    let corners = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)];
    let n = 4 * copies_per_corner;
    let mut values = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for v in 0..n {
        let (x, y) = corners[v % 4];
        values[[v, 0]] = x;
        values[[v, 1]] = y;
        labels.push(i64::from((x > 0.0) != (y > 0.0)));
        match (v / 4) % 4 {
            0 | 1 => split.train.push(v),
            2 => split.val.push(v),
            _ => split.test.push(v),
        }
    }
    Ok(Dataset {
        graph: Graph::empty(n),
        features: FeatureMatrix::new(values)?,
        labels: LabeledSplits::new(labels, 2, vec![split])?,
    })
}
