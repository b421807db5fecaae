use blowfish::evaluation::monte_carlo;
use blowfish::graph::Domain;
use blowfish::mechanism::{
    hierarchical_strategy, isotonic_postprocess, prepare, prepare_edge_space, wavelet_strategy, MatrixMechanism,
    MechanismId, MechanismSpec, NoiseSource, PreparedMechanism, Strategy,
};
use blowfish::workload::{make_workload, sample_range_workload, synth_histogram, HistogramDB, Workload, WorkloadKind};
use proptest::prelude::*;

/// Every nondecreasing vector that is constant on contiguous blocks at the
/// block means; the projection is the closest of them.
fn isotonic_oracle(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0..(1u32 << (n - 1)) {
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let mean = y[start..end].iter().sum::<f64>() / (end - start) as f64;
                out.extend(std::iter::repeat_n(mean, end - start));
                start = end;
            }
        }
        if out.windows(2).all(|p| p[0] <= p[1]) {
            let d: f64 = out.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, out);
            }
        }
    }
    best.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn isotonic_matches_exhaustive_projection(y in proptest::collection::vec(-50.0f64..50.0, 1..=9)) {
        let got = isotonic_postprocess(&y);
        for (a, b) in got.iter().zip(isotonic_oracle(&y)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn isotonic_is_monotone_idempotent_and_mean_preserving(y in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
        let out = isotonic_postprocess(&y);
        prop_assert!(out.as_slice().windows(2).all(|p| p[0] <= p[1]));
        prop_assert_eq!(isotonic_postprocess(out.as_slice()), out.clone());
        let (s, t): (f64, f64) = (y.iter().sum(), out.iter().sum());
        prop_assert!((s - t).abs() < 1e-6 * (1.0 + s.abs()));
    }

    #[test]
    fn structured_strategies_reconstruct_every_range(k in 1usize..40, b in 2usize..5) {
        let d = Domain::line(k).unwrap();
        let w = make_workload(WorkloadKind::AllRanges, &d).unwrap();
        for a in [hierarchical_strategy(k, b).unwrap(), wavelet_strategy(k).unwrap()] {
            prop_assert!(a.reconstruction_error(&w.cell_matrix()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn fast_pseudo_inverse_is_a_left_inverse(k in 1usize..30, b in 2usize..4, x in proptest::collection::vec(-10.0f64..10.0, 30)) {
        for a in [Strategy::hierarchical(&[k], b).unwrap(), Strategy::wavelet(&[k]).unwrap()] {
            let xk = a.pad(&x[..k]);
            let back = a.pinv_apply(&a.apply(&xk).unwrap()).unwrap();
            for (p, q) in back.iter().zip(&xk) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn edge_space_budgets_are_respected(k in 4usize..40, side in 2usize..9, theta in 1usize..6, eps in 0.01f64..2.0) {
        let line = Domain::line(k).unwrap();
        let square = Domain::new(vec![side, side + 1]).unwrap();
        let cases = [
            (MechanismId::BfLine, &line),
            (MechanismId::BfLineIso, &line),
            (MechanismId::BfTheta1d, &line),
            (MechanismId::BfGrid, &square),
            (MechanismId::BfThetamd, &square),
        ];
        for (id, d) in cases {
            let x = synth_histogram(d, 100.0, 0.5, k as u64).unwrap();
            let (w, _) = sample_range_workload(d, 20, theta as u64).unwrap();
            let theta = if id == MechanismId::BfThetamd { theta.max(2) } else { theta };
            let m = prepare_edge_space(&MechanismSpec::new(id).with_theta(theta), &w, &x, eps, None).unwrap();
            // Edge-space budget is ε/ℓ; every mechanism spends at least half of it on some edge.
            let budget = eps / m.stretch() as f64;
            prop_assert!(m.verify(budget).is_ok(), "{id}");
            prop_assert!(m.verify(budget * 0.499).is_err(), "{id} leaves budget unused");
        }
    }
}

/// Per-query mean and mean square of `answer - truth` over `runs` seeds.
fn moments(m: &dyn PreparedMechanism, runs: usize) -> (Vec<f64>, Vec<f64>) {
    let truth = m.truth().to_vec();
    let mut mean = vec![0.0; truth.len()];
    let mut sq = vec![0.0; truth.len()];
    for r in 0..runs {
        let a = m.answer(&NoiseSource::seeded(1000 + r as u64)).unwrap();
        for i in 0..truth.len() {
            let e = a[i] - truth[i];
            mean[i] += e / runs as f64;
            sq[i] += e * e / runs as f64;
        }
    }
    (mean, sq)
}

fn check_variance(name: &str, mse: &[f64], want: &[f64], tol: f64) {
    let (s, t): (f64, f64) = (mse.iter().sum(), want.iter().sum());
    assert!((s / t - 1.0).abs() < tol / 3.0, "{name}: total {s} vs {t}");
    for (q, (a, b)) in mse.iter().zip(want).enumerate() {
        assert!((a / b - 1.0).abs() < tol, "{name} query {q}: {a} vs {b}");
    }
}

fn check_unbiased(name: &str, mean: &[f64], var: &[f64], runs: usize) {
    for (q, (m, v)) in mean.iter().zip(var).enumerate() {
        let sd = (v / runs as f64).sqrt();
        assert!(m.abs() < 5.0 * sd + 1e-9, "{name} query {q}: bias {m} with sd {sd}");
    }
}

fn setup(k: usize) -> (Workload, HistogramDB) {
    let d = Domain::line(k).unwrap();
    let (w, _) = sample_range_workload(&d, 24, 3).unwrap();
    (w, synth_histogram(&d, 500.0, 0.7, 5).unwrap())
}

#[test]
fn line_mechanism_variance_is_two_laplace_terms() {
    let (w, x) = setup(48);
    let eps = 0.5;
    let m = prepare(&MechanismSpec::new(MechanismId::BfLine), &w, &x, eps).unwrap();
    let runs = 20_000;
    let (mean, mse) = moments(m.as_ref(), runs);
    // Queries starting at cell 0 have one boundary edge, the rest two.
    let want: Vec<f64> =
        w.ranges().unwrap().iter().map(|q| if q.lo[0] == 0 { 2.0 } else { 4.0 } / (eps * eps)).collect();
    check_variance("bf-line", &mse, &want, 0.1);
    check_unbiased("bf-line", &mean, &want, runs);
}

#[test]
fn matrix_mechanism_variance_follows_the_decoder() {
    let (w, x) = setup(40);
    let eps = 1.0;
    let runs = 20_000;
    for a in
        [hierarchical_strategy(40, 2).unwrap(), hierarchical_strategy(40, 3).unwrap(), wavelet_strategy(40).unwrap()]
    {
        let scale = a.sensitivity() / eps;
        let dec = a.decoder(&w.cell_matrix()).unwrap();
        let want: Vec<f64> =
            (0..dec.rows()).map(|r| 2.0 * scale * scale * dec.row(r).1.iter().map(|v| v * v).sum::<f64>()).collect();
        let name = format!("{:?}", a.kind());
        let m = MatrixMechanism::new(&w, a, &x, eps, scale * eps).unwrap();
        let (mean, mse) = moments(&m, runs);
        check_variance(&name, &mse, &want, 0.1);
        check_unbiased(&name, &mean, &want, runs);
    }
}

#[test]
fn every_mechanism_is_unbiased() {
    let d = Domain::new(vec![6, 6]).unwrap();
    let x = synth_histogram(&d, 300.0, 0.5, 9).unwrap();
    let (w2, _) = sample_range_workload(&d, 12, 4).unwrap();
    let (w1, x1) = setup(36);
    let runs = 4000;
    let cases = [
        (MechanismSpec::new(MechanismId::Laplace), &w1, &x1),
        (MechanismSpec::new(MechanismId::MmHier), &w1, &x1),
        (MechanismSpec::new(MechanismId::MmWavelet), &w1, &x1),
        (MechanismSpec::new(MechanismId::BfLine), &w1, &x1),
        (MechanismSpec::new(MechanismId::BfTheta1d).with_theta(3), &w1, &x1),
        (MechanismSpec::new(MechanismId::BfGrid), &w2, &x),
        (MechanismSpec::new(MechanismId::BfThetamd).with_theta(2), &w2, &x),
    ];
    for (spec, w, x) in cases {
        let m = prepare(&spec, w, x, 1.0).unwrap();
        let (mean, mse) = moments(m.as_ref(), runs);
        check_unbiased(spec.id.as_str(), &mean, &mse, runs);
    }
}

#[test]
fn isotonic_never_hurts_on_prefix_sums() {
    let (w, x) = setup(64);
    let plain = prepare(&MechanismSpec::new(MechanismId::BfLine), &w, &x, 0.1).unwrap();
    let iso = prepare(&MechanismSpec::new(MechanismId::BfLineIso), &w, &x, 0.1).unwrap();
    let a = monte_carlo(plain.as_ref(), 500, NoiseSource::seeded(1)).unwrap();
    let b = monte_carlo(iso.as_ref(), 500, NoiseSource::seeded(1)).unwrap();
    assert!(b.total_mse <= a.total_mse, "{} > {}", b.total_mse, a.total_mse);
}

#[test]
fn theta_mechanism_reports_measured_stretch() {
    let (w, x) = setup(64);
    let m = prepare(&MechanismSpec::new(MechanismId::BfTheta1d).with_theta(4), &w, &x, 1.0).unwrap();
    assert_eq!(m.stretch(), 3);
    let m = prepare(&MechanismSpec::new(MechanismId::BfTheta1d).with_theta(1), &w, &x, 1.0).unwrap();
    assert_eq!(m.stretch(), 1);
}
