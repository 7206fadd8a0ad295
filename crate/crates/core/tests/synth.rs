use faf_core::io::{format_edge_list, parse_edge_list};
use faf_core::synth::{
    gen_minesweeper, gen_planted_partition, king_grid, king_grid_edges, MinesweeperSpec,
    PlantedPartitionSpec,
};

/// Brute-force king adjacency from cell coordinates.
fn king_adjacent(side: usize, u: usize, v: usize) -> bool {
    let (ru, cu) = ((u / side) as i64, (u % side) as i64);
    let (rv, cv) = ((v / side) as i64, (v % side) as i64);
    u != v && (ru - rv).abs() <= 1 && (cu - cv).abs() <= 1
}

#[test]
fn king_grid_matches_coordinate_oracle() {
    for side in 2..=9 {
        let g = king_grid(side);
        let n = side * side;
        for u in 0..n {
            for v in 0..n {
                assert_eq!(g.has_edge(u, v), king_adjacent(side, u, v), "side {side}: {u}-{v}");
            }
        }
    }
}

#[test]
fn king_grid_edge_formula_for_all_sides() {
    for side in 2..=200 {
        assert_eq!(king_grid(side).num_edges(), king_grid_edges(side), "side {side}");
    }
}

#[test]
fn minesweeper_statistics() {
    let data = gen_minesweeper(&MinesweeperSpec::default()).unwrap();
    assert_eq!(data.graph.num_nodes(), 10_000);
    assert_eq!(data.graph.num_edges(), 39_402);
    assert_eq!(data.features.num_features(), 7);
    // interior node (50, 50)
    assert_eq!(data.graph.degree(50 * 100 + 50).unwrap(), 8);

    let masked = data.features.values().column(0).sum() / 10_000.0;
    assert!((masked - 0.5).abs() <= 0.02, "mask fraction {masked}");
    for row in data.features.values().rows() {
        assert_eq!(row.sum(), 1.0);
    }
    let split = &data.labels.splits()[0];
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (5000, 2500, 2500));
}

#[test]
fn minesweeper_graph_file_round_trip() {
    let data = gen_minesweeper(&MinesweeperSpec::default()).unwrap();
    let g = parse_edge_list(&format_edge_list(&data.graph)).unwrap();
    assert_eq!(g.num_nodes(), 10_000);
    assert_eq!(g.num_edges(), 39_402);
}

#[test]
fn minesweeper_features_follow_neighbor_mines() {
    let spec = MinesweeperSpec {
        side: 12,
        seed: 9,
        ..MinesweeperSpec::default()
    };
    let data = gen_minesweeper(&spec).unwrap();
    let labels = data.labels.labels();
    for v in 0..144 {
        let row = data.features.row(v);
        if row[0] == 1.0 {
            assert!(row.iter().skip(1).all(|&x| x == 0.0));
            continue;
        }
        let count = (0..144)
            .filter(|&u| king_adjacent(12, u, v) && labels[u] == 1)
            .count();
        assert_eq!(row[1 + count.min(5)], 1.0, "node {v} with {count} mines");
    }
}

#[test]
fn generators_are_seed_reproducible() {
    let spec = MinesweeperSpec {
        side: 20,
        seed: 4,
        ..MinesweeperSpec::default()
    };
    let a = gen_minesweeper(&spec).unwrap();
    let b = gen_minesweeper(&spec).unwrap();
    assert_eq!(a.features, b.features);
    assert_eq!(a.labels, b.labels);
    let c = gen_minesweeper(&MinesweeperSpec { seed: 5, ..spec }).unwrap();
    assert_ne!(a.labels, c.labels);

    let sbm = PlantedPartitionSpec {
        n_per_class: 30,
        classes: 3,
        p_in: 0.2,
        p_out: 0.02,
        feature_noise: 0.5,
        seed: 8,
    };
    let x = gen_planted_partition(&sbm).unwrap();
    let y = gen_planted_partition(&sbm).unwrap();
    assert_eq!(x.graph, y.graph);
    assert_eq!(x.features, y.features);
}

#[test]
fn equal_block_probabilities_give_binomial_counts() {
    let (n_per_class, classes, p) = (40usize, 3usize, 0.1);
    let n = n_per_class * classes;
    let within_pairs = (classes * n_per_class * (n_per_class - 1) / 2) as f64;
    let between_pairs = (n * (n - 1) / 2) as f64 - within_pairs;
    for seed in 0..10 {
        let data = gen_planted_partition(&PlantedPartitionSpec {
            n_per_class,
            classes,
            p_in: p,
            p_out: p,
            feature_noise: 0.0,
            seed,
        })
        .unwrap();
        let labels = data.labels.labels();
        let within = data.graph.edges().filter(|&(u, v)| labels[u] == labels[v]).count() as f64;
        let between = data.graph.num_edges() as f64 - within;
        for (count, pairs) in [(within, within_pairs), (between, between_pairs)] {
            let sigma = (pairs * p * (1.0 - p)).sqrt();
            assert!((count - pairs * p).abs() <= 3.0 * sigma, "seed {seed}: {count} vs {}", pairs * p);
        }
    }
}

#[test]
fn planted_partition_rejects_bad_probabilities() {
    let spec = PlantedPartitionSpec {
        n_per_class: 5,
        classes: 2,
        p_in: 0.1,
        p_out: 0.2,
        feature_noise: 0.0,
        seed: 0,
    };
    assert!(gen_planted_partition(&spec).is_err());
}
