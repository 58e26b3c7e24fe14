use frailty_core::corr::{factorability, pairwise_phi_matrix, phi, smooth_psd, CorrMatrix};
use frailty_core::efa::eigenvalues;
use frailty_core::ingest::DeficitMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pearson_expanded(n11: u64, n10: u64, n01: u64, n00: u64) -> f64 {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (a, b, count) in [(1.0, 1.0, n11), (1.0, 0.0, n10), (0.0, 1.0, n01), (0.0, 0.0, n00)] {
        for _ in 0..count {
            x.push(a);
            y.push(b);
        }
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn phi_matches_pearson_on_expanded_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 300 {
        let t: [u64; 4] = std::array::from_fn(|_| rng.random_range(0..40));
        let Ok(v) = phi(t[0], t[1], t[2], t[3]) else { continue };
        assert!((v - pearson_expanded(t[0], t[1], t[2], t[3])).abs() < 1e-12, "{t:?}");
        checked += 1;
    }
}

fn random_binary(n: usize, p: usize, missing: f64, seed: u64) -> DeficitMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let rows: Vec<Vec<Option<bool>>> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    if rng.random::<f64>() < missing {
                        None
                    } else {
                        let cut = 0.3 + 0.05 * j as f64;
                        Some(0.6 * latent[i] + 0.4 * rng.random::<f64>() > cut)
                    }
                })
                .collect()
        })
        .collect();
    DeficitMatrix::from_rows(&rows)
}

#[test]
fn pairwise_deletion_matches_brute_force() {
    let m = random_binary(400, 5, 0.15, 3);
    let ids: Vec<String> = (0..5).map(|j| format!("v{j}")).collect();
    let c = pairwise_phi_matrix(&m, &ids, 30).unwrap();
    for a in 0..5 {
        for b in 0..a {
            let mut t = [0u64; 4];
            let mut n = 0;
            for i in 0..m.nrows() {
                if let (Some(x), Some(y)) = (m.get(i, a), m.get(i, b)) {
                    t[match (x, y) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    }] += 1;
                    n += 1;
                }
            }
            let expected = pearson_expanded(t[0], t[1], t[2], t[3]);
            assert!((c.r[(a, b)] - expected).abs() < 1e-12);
            assert_eq!(c.r[(a, b)], c.r[(b, a)]);
            assert_eq!(c.n_pairs[(a, b)], n);
        }
        assert_eq!(c.r[(a, a)], 1.0);
    }
}

#[test]
fn constant_column_is_rejected() {
    let rows: Vec<Vec<Option<bool>>> = (0..50).map(|i| vec![Some(i % 2 == 0), Some(true)]).collect();
    let m = DeficitMatrix::from_rows(&rows);
    let err = pairwise_phi_matrix(&m, &["a".into(), "b".into()], 30).unwrap_err();
    assert!(err.to_string().contains('b'), "{err}");
}

#[test]
fn sparse_overlap_is_rejected() {
    let rows: Vec<Vec<Option<bool>>> = (0..60)
        .map(|i| {
            if i < 40 {
                vec![Some(i % 2 == 0), None]
            } else {
                vec![Some(i % 3 == 0), Some(i % 2 == 0)]
            }
        })
        .collect();
    let m = DeficitMatrix::from_rows(&rows);
    assert!(pairwise_phi_matrix(&m, &["a".into(), "b".into()], 30).is_err());
}

// det(C − λI) by Gaussian elimination with partial pivoting.
fn char_poly(c: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = c.nrows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| c[(i, j)] - if i == j { lambda } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
        }
    }
    det
}

// Roots of the characteristic polynomial: scan for sign changes, then bisect.
fn eigen_oracle(c: &DMatrix<f64>) -> Vec<f64> {
    let n = c.nrows();
    let bound = (0..n).map(|i| c.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let steps = 20000;
    let mut roots = Vec::new();
    let h = 2.0 * bound / steps as f64;
    let mut lo = -bound - 1e-9;
    let mut f_lo = char_poly(c, lo);
    for s in 1..=steps {
        let hi = -bound + h * s as f64 + 1e-9;
        let f_hi = char_poly(c, hi);
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if char_poly(c, a).signum() == char_poly(c, mid).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

#[test]
fn eigenvalues_match_characteristic_roots() {
    let c = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.42, 0.17, 0.05, 0.42, 1.0, 0.31, -0.12, 0.17, 0.31, 1.0, 0.26, 0.05, -0.12, 0.26,
            1.0,
        ],
    );
    let got = eigenvalues(&c).unwrap();
    let want = eigen_oracle(&c);
    assert_eq!(want.len(), 4);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
    }
    assert!((got.iter().sum::<f64>() - 4.0).abs() < 1e-12);
}

#[test]
fn equicorrelation_spectrum() {
    let p = 6;
    let rho = 0.3;
    let c = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    let e = eigenvalues(&c).unwrap();
    assert!((e[0] - (1.0 + (p as f64 - 1.0) * rho)).abs() < 1e-12);
    assert!(e[1..].iter().all(|v| (v - (1.0 - rho)).abs() < 1e-12));
}

// Anti-image correlation from regressions of each variable on the rest.
fn kmo_oracle(c: &DMatrix<f64>) -> f64 {
    let p = c.nrows();
    let solve = |a: Vec<Vec<f64>>, b: Vec<f64>| -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.into_iter().zip(b).map(|(mut r, v)| {
            r.push(v);
            r
        }).collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
            m.swap(piv, col);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for k in col..=n {
                        m[r][k] -= f * m[col][k];
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n] / m[i][i]).collect()
    };
    // Regression weights b_ij of i on the others, then
    // partial(i, j) = b_ij · sqrt(resvar_j / resvar_i).
    let mut b = vec![vec![0.0; p]; p];
    let mut resvar = vec![0.0; p];
    for i in 0..p {
        let others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        let a: Vec<Vec<f64>> = others.iter().map(|&r| others.iter().map(|&s| c[(r, s)]).collect()).collect();
        let rhs: Vec<f64> = others.iter().map(|&r| c[(r, i)]).collect();
        let w = solve(a, rhs.clone());
        resvar[i] = 1.0 - w.iter().zip(&rhs).map(|(x, y)| x * y).sum::<f64>();
        for (k, &j) in others.iter().enumerate() {
            b[i][j] = w[k];
        }
    }
    let (mut r2, mut a2) = (0.0, 0.0);
    for i in 0..p {
        for j in (0..p).filter(|&j| j != i) {
            r2 += c[(i, j)].powi(2);
            a2 += (b[i][j] * (resvar[j] / resvar[i]).sqrt()).powi(2);
        }
    }
    r2 / (r2 + a2)
}

#[test]
fn kmo_matches_regression_oracle() {
    let l = [0.7, 0.7, 0.7, 0.7, 0.7, 0.7];
    let c = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { l[i] * l[j] });
    let cm = CorrMatrix::from_matrix((0..6).map(|i| i.to_string()).collect(), c.clone(), 500).unwrap();
    let f = factorability(&cm, 500).unwrap();
    let want = kmo_oracle(&c);
    assert!((f.kmo_overall.unwrap() - want).abs() < 1e-10);
    assert!(f.kmo_overall.unwrap() > 0.7);

    let c = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.42, 0.17, 0.05, 0.42, 1.0, 0.31, -0.12, 0.17, 0.31, 1.0, 0.26, 0.05, -0.12, 0.26,
            1.0,
        ],
    );
    let cm = CorrMatrix::from_matrix((0..4).map(|i| i.to_string()).collect(), c.clone(), 200).unwrap();
    let f = factorability(&cm, 200).unwrap();
    assert!((f.kmo_overall.unwrap() - kmo_oracle(&c)).abs() < 1e-10);
    assert!(f.kmo_per_variable.iter().all(|v| (0.0..=1.0).contains(&v.unwrap())));
}

#[test]
fn smoothing_repairs_indefinite_matrix() {
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
    let cm = CorrMatrix::from_matrix(vec!["a".into(), "b".into(), "c".into()], c.clone(), 100).unwrap();
    assert!(cm.min_eig_before < 0.0);
    let s = smooth_psd(&cm).unwrap();
    assert!(s.smoothed);
    let e = eigenvalues(&s.r).unwrap();
    assert!(*e.last().unwrap() > 0.0);
    // Clipping then rescaling cannot move the matrix further than the
    // negative part of the spectrum, up to the rescaling.
    let neg: f64 = eigenvalues(&c).unwrap().iter().filter(|v| **v < 0.0).map(|v| v * v).sum();
    assert!((&s.r - &c).norm() < 2.0 * neg.sqrt() + 1e-3);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(s.r[(i, j)], s.r[(j, i)]);
            assert_eq!(s.r[(i, j)].signum(), c[(i, j)].signum());
        }
    }
}

fn corr_strategy(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-0.95f64..0.95, p * (p - 1) / 2).prop_map(move |v| {
        let mut m = DMatrix::identity(p, p);
        let mut k = 0;
        for i in 0..p {
            for j in 0..i {
                m[(i, j)] = v[k];
                m[(j, i)] = v[k];
                k += 1;
            }
        }
        m
    })
}

proptest! {
    #[test]
    fn phi_is_bounded_and_symmetric(a in 0u64..60, b in 0u64..60, c in 0u64..60, d in 0u64..60) {
        if let Ok(v) = phi(a, b, c, d) {
            prop_assert!((-1.0..=1.0).contains(&v));
            prop_assert!((v - phi(a, c, b, d).unwrap()).abs() < 1e-15);
            prop_assert!((v + phi(b, a, d, c).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothing_gives_unit_diagonal_psd(m in corr_strategy(5)) {
        let cm = CorrMatrix::from_matrix((0..5).map(|i| i.to_string()).collect(), m, 100).unwrap();
        let s = smooth_psd(&cm).unwrap();
        let e = eigenvalues(&s.r).unwrap();
        prop_assert!(*e.last().unwrap() >= -1e-10);
        for i in 0..5 {
            prop_assert!((s.r[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..5 {
                prop_assert!(s.r[(i, j)].abs() <= 1.0 + 1e-12);
                prop_assert_eq!(s.r[(i, j)], s.r[(j, i)]);
            }
        }
        if !cm.smoothed && cm.min_eig_before >= 0.0 {
            prop_assert_eq!(&s.r, &cm.r);
        }
    }

    #[test]
    fn kmo_in_unit_interval(m in corr_strategy(4)) {
        let cm = CorrMatrix::from_matrix((0..4).map(|i| i.to_string()).collect(), m, 100).unwrap();
        let s = smooth_psd(&cm).unwrap();
        let f = factorability(&s, 100).unwrap();
        prop_assert_eq!(f.bartlett_df, 6);
        if let Some(k) = f.kmo_overall {
            prop_assert!((0.0..=1.0).contains(&k));
        }
    }
}
