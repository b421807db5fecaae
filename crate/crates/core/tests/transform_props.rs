use blowfish::graph::{
    build_distance_threshold_graph, build_theta_spanner_1d, spanner_stretch, Domain, PolicyGraph, Vertex,
};
use blowfish::linalg::SparseMatrix;
use blowfish::transform::{brute_force_sensitivity, policy_sensitivity, TransformPair};
use blowfish::workload::{make_workload, RangeQuery, Workload, WorkloadKind};
use proptest::prelude::*;

/// Random graph over `k` cells: each pair (and each cell-⊥ pair when `bot`)
/// is an edge with the given odds.
fn graph(max_cells: usize) -> impl Strategy<Value = PolicyGraph> {
    (1..=max_cells, any::<bool>(), 0.1f64..0.9).prop_flat_map(|(k, bot, p)| {
        let pairs = k * (k - 1) / 2 + if bot { k } else { 0 };
        proptest::collection::vec(proptest::bool::weighted(p), pairs).prop_map(move |mask| {
            let mut cand = Vec::new();
            for u in 0..k {
                for v in u + 1..k {
                    cand.push((Vertex::Cell(u), Vertex::Cell(v)));
                }
                if bot {
                    cand.push((Vertex::Cell(u), Vertex::Bot));
                }
            }
            let edges = cand.into_iter().zip(mask).filter(|(_, m)| *m).map(|(e, _)| e);
            PolicyGraph::new(Domain::line(k).unwrap(), bot, edges).unwrap()
        })
    })
}

fn workload(k: usize) -> impl Strategy<Value = Workload> {
    proptest::collection::vec(proptest::collection::vec(-3i32..=3, k), 1..6).prop_map(move |rows| {
        let triplets: Vec<(usize, usize, f64)> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter().enumerate().filter(|(_, v)| **v != 0).map(move |(c, v)| (r, c, f64::from(*v)))
            })
            .collect();
        Workload::custom(Domain::line(k).unwrap(), SparseMatrix::from_triplets(rows.len(), k, triplets).unwrap())
            .unwrap()
    })
}

fn instance() -> impl Strategy<Value = (PolicyGraph, Workload, Vec<f64>)> {
    graph(12)
        .prop_flat_map(|g| {
            let k = g.domain().total();
            (Just(g), workload(k), proptest::collection::vec(0u32..100, k))
        })
        .prop_map(|(g, w, x)| (g, w, x.into_iter().map(f64::from).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn answers_survive_the_transform((g, w, x) in instance()) {
        let t = TransformPair::for_policy(&g).unwrap();
        let w_g = t.transform_matrix(&w).unwrap();
        let x_g = t.transform_vector(&x).unwrap();
        let got = t.answers(&w_g, &x_g, &t.offset(&w, &x)).unwrap();
        for (a, b) in got.iter().zip(w.answer(&x).unwrap()) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // The tree preimage is another solution of P_G y = x.
        let y = t.preimage(&t.reduce_database(&x).unwrap());
        let back = t.p_g().mul_vec(&y).unwrap();
        prop_assert_eq!(back, t.reduce_database(&x).unwrap());
    }

    #[test]
    fn sensitivity_matches_neighbour_enumeration((g, w, _x) in instance()) {
        prop_assume!(!g.edges().is_empty());
        prop_assert_eq!(policy_sensitivity(&w, &g).unwrap(), brute_force_sensitivity(&w, &g).unwrap());
    }

    #[test]
    fn incidence_columns_are_edge_differences(g in graph(12)) {
        let t = TransformPair::for_policy(&g).unwrap();
        let cols = t.p_g().transpose();
        for e in 0..cols.rows() {
            let (_, vals) = cols.row(e);
            prop_assert!(vals == [1.0] || vals == [1.0, -1.0] || vals == [-1.0, 1.0], "column {e}: {vals:?}");
        }
    }

    #[test]
    fn right_inverse_is_exact(g in graph(10)) {
        let t = TransformPair::for_policy(&g).unwrap();
        let inv = t.p_g_inv().unwrap();
        let prod = t.p_g().matmul(inv).unwrap();
        prop_assert!(prod.max_abs_diff(&SparseMatrix::identity(prod.rows())).unwrap() < 1e-9);
    }

    #[test]
    fn range_shortcut_matches_matrix_product(k in 2usize..16, theta in 1usize..5, bot in any::<bool>()) {
        let d = Domain::line(k).unwrap();
        let g = build_distance_threshold_graph(&d, theta, bot).unwrap();
        let t = TransformPair::for_policy(&g).unwrap();
        let w = make_workload(WorkloadKind::AllRanges, &d).unwrap();
        let ranges: Vec<RangeQuery> = w.ranges().unwrap().to_vec();
        let direct = t.transform_ranges(&ranges).unwrap();
        let multiplied = t.reduce_workload(&w).unwrap().matmul(t.p_g()).unwrap();
        prop_assert!(direct.max_abs_diff(&multiplied).unwrap() < 1e-12);
    }

    #[test]
    fn spanner_of_line_is_tree_with_stretch_at_most_three(k in 2usize..200, theta in 1usize..12) {
        let h = build_theta_spanner_1d(k, theta).unwrap();
        prop_assert!(h.is_tree());
        let g = build_distance_threshold_graph(&Domain::line(k).unwrap(), theta, false).unwrap();
        prop_assert!(spanner_stretch(&g, &h).unwrap() <= 3);
    }
}
