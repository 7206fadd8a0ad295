use faf_core::io::{format_edge_list, parse_edge_list};
use faf_core::reducers::reduce;
use faf_core::rewire::{rewire_drop, rewire_split};
use faf_core::{
    compile, compile_augmented, FafConfig, FeatureMatrix, Graph, HopSelection, ReducerKind,
    RewireCombine, RewireMode, RewireSpec,
};
use ndarray::{s, Array2};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..12).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..30)
            .prop_map(move |edges| Graph::from_edges(n, edges).unwrap())
    })
}

fn graph_and_features() -> impl Strategy<Value = (Graph, FeatureMatrix)> {
    (graph_strategy(), 1usize..4).prop_flat_map(|(g, f)| {
        let n = g.num_nodes();
        prop::collection::vec(-3.0f64..3.0, n * f).prop_map(move |values| {
            let x = FeatureMatrix::new(Array2::from_shape_vec((n, f), values).unwrap()).unwrap();
            (g.clone(), x)
        })
    })
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-100.0f64..100.0, dim), 1..9))
}

proptest! {
    #[test]
    fn graph_invariants(g in graph_strategy()) {
        let degrees: usize = g.degrees().iter().sum();
        prop_assert_eq!(degrees, 2 * g.num_edges());
        for v in 0..g.num_nodes() {
            let list = g.neighbors(v);
            prop_assert!(list.windows(2).all(|w| w[0] < w[1]));
            for &u in list {
                prop_assert!(u != v);
                prop_assert!(g.has_edge(u, v));
            }
        }
    }

    #[test]
    fn edge_list_round_trip(g in graph_strategy()) {
        let text = format_edge_list(&g);
        let back = parse_edge_list(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(format_edge_list(&back), text);
    }

    #[test]
    fn permutation_invariance(rows in rows_strategy(), seed in any::<u64>()) {
        let dim = rows[0].len();
        let mut shuffled = rows.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize ^ (i * 2654435761)) % (i + 1));
        }
        let a: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = shuffled.iter().map(Vec::as_slice).collect();
        for kind in [ReducerKind::Max, ReducerKind::Min] {
            prop_assert_eq!(reduce(kind, &a, dim).unwrap(), reduce(kind, &b, dim).unwrap());
        }
        // mean, sum and std are fixed-order; reordering only moves rounding
        for kind in [ReducerKind::Mean, ReducerKind::Sum, ReducerKind::Std] {
            let x = reduce(kind, &a, dim).unwrap();
            let y = reduce(kind, &b, dim).unwrap();
            for (p, q) in x.iter().zip(&y) {
                prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn min_is_negated_max_of_negation(rows in rows_strategy()) {
        let dim = rows[0].len();
        let negated: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        let a: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = negated.iter().map(Vec::as_slice).collect();
        let min = reduce(ReducerKind::Min, &a, dim).unwrap();
        let max: Vec<f64> = reduce(ReducerKind::Max, &b, dim).unwrap().iter().map(|x| -x).collect();
        prop_assert_eq!(min, max);
    }

    #[test]
    fn variance_decomposition(rows in rows_strategy()) {
        let dim = rows[0].len();
        let a: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let squares: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * x).collect()).collect();
        let sq: Vec<&[f64]> = squares.iter().map(Vec::as_slice).collect();
        let std = reduce(ReducerKind::Std, &a, dim).unwrap();
        let mean = reduce(ReducerKind::Mean, &a, dim).unwrap();
        let mean_sq = reduce(ReducerKind::Mean, &sq, dim).unwrap();
        for f in 0..dim {
            let lhs = std[f] * std[f] + mean[f] * mean[f];
            prop_assert!((lhs - mean_sq[f]).abs() <= 1e-9 * mean_sq[f].abs().max(1e-12));
        }
    }

    #[test]
    fn output_dimension_formula(
        (g, x) in graph_and_features(),
        reducers in subsequence(ReducerKind::ALL.to_vec(), 1..=6),
        hops in 0usize..4,
    ) {
        let cfg = FafConfig::new(reducers.clone(), hops);
        let z = compile(&g, &x, &cfg).unwrap();
        prop_assert_eq!(z.dim(), x.num_features() * (1 + reducers.len() * hops));
        prop_assert_eq!(z.dim(), cfg.output_dim(x.num_features()));
        for hop_selection in [HopSelection::LastHopOnly, HopSelection::LastHopPlusBase] {
            if hops == 0 && hop_selection == HopSelection::LastHopOnly {
                continue;
            }
            let cfg = cfg.clone().with_hop_selection(hop_selection);
            prop_assert_eq!(compile(&g, &x, &cfg).unwrap().dim(), cfg.output_dim(x.num_features()));
        }
    }

    #[test]
    fn compile_is_deterministic((g, x) in graph_and_features()) {
        let cfg = FafConfig::new(ReducerKind::ALL.to_vec(), 2);
        let a = compile(&g, &x, &cfg).unwrap();
        let b = compile(&g, &x, &cfg).unwrap();
        let bits = |m: ndarray::ArrayView2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(a.matrix()), bits(b.matrix()));
    }

    #[test]
    fn split_partitions_and_drop_matches((g, x) in graph_and_features()) {
        let (pos, neg) = rewire_split(&g, &x).unwrap();
        prop_assert_eq!(pos.num_edges() + neg.num_edges(), g.num_edges());
        for (u, v) in g.edges() {
            prop_assert!(pos.has_edge(u, v) != neg.has_edge(u, v));
        }
        let dropped = rewire_drop(&g, &x).unwrap();
        prop_assert_eq!(&dropped, &pos);
        prop_assert_eq!(rewire_drop(&dropped, &x).unwrap(), dropped);
    }

    #[test]
    fn concat_contains_plain_prefix(
        (g, x) in graph_and_features(),
        split in any::<bool>(),
        hops in 0usize..3,
    ) {
        let cfg = FafConfig::new(vec![ReducerKind::Mean, ReducerKind::Std], hops);
        let mode = if split { RewireMode::Split } else { RewireMode::Drop };
        let plain = compile(&g, &x, &cfg).unwrap();
        let aug = compile_augmented(&g, &x, &cfg, &RewireSpec::new(mode, RewireCombine::Concat)).unwrap();
        let prefix = aug.matrix().slice(s![.., ..plain.dim()]).to_owned();
        let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&prefix), bits(&plain.matrix().to_owned()));
        let blocks = if split { 2 } else { 1 };
        prop_assert_eq!(aug.dim(), plain.dim() + blocks * x.num_features() * 2 * hops);
    }
}
