use blowfish::evaluation::{matrix_lower_bound, privacy_factor, svd_lower_bound};
use blowfish::graph::Domain;
use blowfish::linalg::{right_inverse, singular_values, SparseMatrix};
use blowfish::workload::{make_workload, WorkloadKind};
use proptest::prelude::*;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for k in 0..n {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Singular values as square roots of the eigenvalues of the smaller Gram matrix.
fn oracle_singular_values(m: &[Vec<f64>]) -> Vec<f64> {
    let (r, c) = (m.len(), m[0].len());
    let gram: Vec<Vec<f64>> = if r >= c {
        (0..c).map(|i| (0..c).map(|j| (0..r).map(|k| m[k][i] * m[k][j]).sum()).collect()).collect()
    } else {
        (0..r).map(|i| (0..r).map(|j| (0..c).map(|k| m[i][k] * m[j][k]).sum()).collect()).collect()
    };
    let mut s: Vec<f64> = jacobi_eigenvalues(gram).into_iter().map(|v| v.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn sparse(m: &[Vec<f64>]) -> SparseMatrix {
    let rows = m.iter().map(|row| row.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect::<Vec<_>>());
    SparseMatrix::from_rows(m[0].len(), rows.collect::<Vec<_>>()).unwrap()
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..9, 1usize..9)
        .prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(-5i32..=5, c), r))
        .prop_map(|m| m.into_iter().map(|row| row.into_iter().map(f64::from).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn singular_values_match_jacobi(m in matrix()) {
        let got = singular_values(&sparse(&m)).unwrap();
        let want = oracle_singular_values(&m);
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-7 * (1.0 + b), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn bound_is_invariant_under_row_permutation(m in matrix(), seed in any::<u64>()) {
        let mut rows = m.clone();
        let n = rows.len();
        for i in (1..n).rev() {
            rows.swap(i, (seed as usize).wrapping_add(i * 7919) % (i + 1));
        }
        let a = matrix_lower_bound(&sparse(&m), 1.0, 0.01).unwrap();
        let b = matrix_lower_bound(&sparse(&rows), 1.0, 0.01).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}

#[test]
fn right_inverse_of_full_row_rank() {
    let m = vec![vec![1.0, -1.0, 0.0, 1.0], vec![0.0, 1.0, -1.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]];
    let inv = right_inverse(&sparse(&m)).unwrap();
    let prod = sparse(&m).matmul(&inv).unwrap();
    assert!(prod.max_abs_diff(&SparseMatrix::identity(3)).unwrap() < 1e-12);
    let singular = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
    assert!(right_inverse(&sparse(&singular)).is_err());
}

#[test]
fn cumulative_bound_by_hand() {
    // C_2 = [[1,0],[1,1]] has singular values φ and 1/φ, summing to √5.
    let w = make_workload(WorkloadKind::Cumulative, &Domain::line(2).unwrap()).unwrap();
    let b = svd_lower_bound(&w, 1.0, 0.001).unwrap();
    let want = privacy_factor(1.0, 0.001).unwrap() * 5.0 / 2.0;
    assert!((b - want).abs() < 1e-9, "{b} vs {want}");
}
