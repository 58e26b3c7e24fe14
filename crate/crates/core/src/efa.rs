//! Eigen-analysis, parallel analysis and minres factor extraction.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corr::CorrMatrix;
use crate::linalg::{column_correlation, max_abs_diff, spd_inverse, sym_eigen};

/// Fit gate on the root mean square of off-diagonal residuals.
pub const RMSR_GATE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EfaError {
    #[error("eigensolver failed to converge")]
    ConvergenceFailure,
    #[error("minres did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("{0}")]
    InvalidInput(String),
}

/// All eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues(c: &DMatrix<f64>) -> Result<Vec<f64>, EfaError> {
    if c.nrows() != c.ncols() {
        return Err(EfaError::InvalidInput("matrix is not square".into()));
    }
    let e = sym_eigen(c).ok_or(EfaError::ConvergenceFailure)?;
    let scale = c.amax().max(1.0);
    if max_abs_diff(&e.reconstruct(), c) >= 1e-8 * scale {
        return Err(EfaError::ConvergenceFailure);
    }
    Ok(e.values)
}

/// Distribution of the simulated null data in parallel analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    /// Independent standard normal columns.
    Normal,
    /// Independent Bernoulli columns with the given marginal prevalences.
    Binary { prevalence: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelConfig {
    pub n_replicates: usize,
    pub quantile: f64,
    pub seed: u64,
    pub null: NullModel,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self {
            n_replicates: 100,
            quantile: 0.95,
            seed: 0,
            null: NullModel::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelResult {
    pub observed_eigs: Vec<f64>,
    pub random_eigs_quantile: Vec<f64>,
    pub n_replicates: usize,
    pub quantile: f64,
    pub suggested_k: usize,
}

/// Horn's parallel analysis against eigenvalues of simulated uncorrelated data.
///
/// Replicate `r` draws from its own ChaCha stream derived from `cfg.seed`,
/// so results do not depend on how rayon schedules the replicates.
pub fn parallel_analysis(
    n: usize,
    p: usize,
    observed: &[f64],
    cfg: &ParallelConfig,
) -> Result<ParallelResult, EfaError> {
    if n <= p {
        return Err(EfaError::InvalidInput(format!(
            "parallel analysis needs n > p (n = {n}, p = {p})"
        )));
    }
    if observed.len() != p {
        return Err(EfaError::InvalidInput(format!(
            "expected {p} observed eigenvalues, found {}",
            observed.len()
        )));
    }
    if cfg.n_replicates == 0 || !(0.0..=1.0).contains(&cfg.quantile) {
        return Err(EfaError::InvalidInput(
            "parallel analysis needs replicates > 0 and a quantile in [0, 1]".into(),
        ));
    }
    if let NullModel::Binary { prevalence } = &cfg.null {
        if prevalence.len() != p || prevalence.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(EfaError::InvalidInput(
                "binary null needs one prevalence in [0, 1] per variable".into(),
            ));
        }
    }

    let replicates: Vec<Vec<f64>> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let data = match &cfg.null {
                NullModel::Normal => DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal)),
                // Filled column by column so each draw uses its own column's prevalence.
                NullModel::Binary { prevalence } => {
                    let mut m = DMatrix::zeros(n, p);
                    for j in 0..p {
                        for i in 0..n {
                            m[(i, j)] = (rng.random::<f64>() < prevalence[j]) as u8 as f64;
                        }
                    }
                    m
                }
            };
            let mut vals = column_correlation(&data).symmetric_eigenvalues().as_slice().to_vec();
            vals.sort_by(|a, b| b.total_cmp(a));
            vals
        })
        .collect::<Vec<_>>();

    let thresholds: Vec<f64> = (0..p)
        .map(|rank| {
            let mut xs: Vec<f64> = replicates.iter().map(|v| v[rank]).collect();
            xs.sort_by(f64::total_cmp);
            quantile_sorted(&xs, cfg.quantile)
        })
        .collect();
    let suggested_k = observed
        .iter()
        .zip(&thresholds)
        .take_while(|(o, t)| o > t)
        .count();

    Ok(ParallelResult {
        observed_eigs: observed.to_vec(),
        random_eigs_quantile: thresholds,
        n_replicates: cfg.n_replicates,
        quantile: cfg.quantile,
        suggested_k,
    })
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty());
    let h = (xs.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinresConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for MinresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 1000,
            lower: 0.001,
            upper: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnrotatedSolution {
    /// p × k, columns by descending sum of squared loadings.
    #[serde(skip)]
    pub loadings: DMatrix<f64>,
    pub uniquenesses: Vec<f64>,
    pub communalities: Vec<f64>,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Variables whose uniqueness sits on the lower bound.
    pub heywood: Vec<usize>,
}

impl UnrotatedSolution {
    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
    loadings: DMatrix<f64>,
}

/// Minres objective (sum of squared off-diagonal residuals over i < j) and
/// its gradient with respect to the uniquenesses.
fn evaluate(c: &DMatrix<f64>, psi: &[f64], k: usize) -> Result<Evaluation, EfaError> {
    let p = c.nrows();
    let mut reduced = c.clone();
    for i in 0..p {
        reduced[(i, i)] -= psi[i];
    }
    let e = sym_eigen(&reduced).ok_or(EfaError::ConvergenceFailure)?;
    let retained: Vec<usize> = (0..k).filter(|&m| e.values[m] > 0.0).collect();

    let mut loadings = DMatrix::zeros(p, k);
    for &m in &retained {
        let s = e.values[m].sqrt();
        for i in 0..p {
            loadings[(i, m)] = e.vectors[(i, m)] * s;
        }
    }
    let mut resid = c - &loadings * loadings.transpose();
    for i in 0..p {
        resid[(i, i)] = 0.0;
    }
    let mut value = 0.0;
    for j in 0..p {
        for i in 0..j {
            value += resid[(i, j)].powi(2);
        }
    }

    // X = Vᵀ R V in the eigenbasis of the reduced matrix.
    let x = e.vectors.transpose() * &resid * &e.vectors;
    let mut grad = vec![0.0; p];
    let in_retained = |l: usize| retained.contains(&l);
    for &m in &retained {
        let dm = e.values[m];
        for l in 0..p {
            let w = if in_retained(l) {
                x[(l, m)]
            } else {
                let gap = dm - e.values[l];
                if gap.abs() < 1e-12 {
                    continue;
                }
                2.0 * dm / gap * x[(l, m)]
            };
            if w == 0.0 {
                continue;
            }
            for t in 0..p {
                grad[t] += w * e.vectors[(t, l)] * e.vectors[(t, m)];
            }
        }
    }
    Ok(Evaluation {
        value,
        grad,
        loadings,
    })
}

/// Minres (unweighted least squares) extraction of `k` factors.
///
/// Uniquenesses start at one minus the squared multiple correlations and are
/// optimized by a projected BFGS on the box `[cfg.lower, cfg.upper]`.
pub fn extract_minres(
    c: &CorrMatrix,
    k: usize,
    cfg: &MinresConfig,
) -> Result<UnrotatedSolution, EfaError> {
    extract_minres_matrix(&c.r, k, cfg)
}

pub fn extract_minres_matrix(
    c: &DMatrix<f64>,
    k: usize,
    cfg: &MinresConfig,
) -> Result<UnrotatedSolution, EfaError> {
    let p = c.nrows();
    if c.ncols() != p {
        return Err(EfaError::InvalidInput("matrix is not square".into()));
    }
    if k == 0 || k >= p {
        return Err(EfaError::InvalidInput(format!(
            "number of factors must satisfy 1 <= k < p (k = {k}, p = {p})"
        )));
    }
    let (lo, hi) = (cfg.lower, cfg.upper);
    let clamp = |v: f64| v.clamp(lo, hi);

    let mut psi: Vec<f64> = match spd_inverse(c) {
        Some(inv) => (0..p).map(|i| clamp(1.0 / inv[(i, i)])).collect(),
        None => vec![clamp(0.5); p],
    };
    let mut cur = evaluate(c, &psi, k)?;
    let mut h = DMatrix::<f64>::identity(p, p);
    let mut prev_free: Vec<bool> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let g = &cur.grad;
        let free: Vec<bool> = (0..p)
            .map(|i| !((psi[i] <= lo && g[i] > 0.0) || (psi[i] >= hi && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..p)
            .filter(|&i| free[i])
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        if pg_norm < 1e-12 {
            converged = true;
            break;
        }
        if free != prev_free {
            h = DMatrix::identity(p, p);
            prev_free = free.clone();
        }
        iterations += 1;

        let mut dir = search_direction(&h, g, &free);
        let slope: f64 = dir.iter().zip(g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            h = DMatrix::identity(p, p);
            dir = search_direction(&h, g, &free);
        }
        // Keep the first trial step inside a box-sized neighbourhood.
        let longest = dir.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let mut step = if longest > 0.5 { 0.5 / longest } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = psi
                .iter()
                .zip(&dir)
                .map(|(v, d)| clamp(v + step * d))
                .collect();
            let moved: f64 = trial
                .iter()
                .zip(&psi)
                .zip(g)
                .map(|((t, v), gi)| (t - v) * gi)
                .sum();
            let eval = evaluate(c, &trial, k)?;
            if eval.value <= cur.value + 1e-4 * moved.min(0.0) {
                accepted = Some((trial, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, eval)) = accepted else {
            // No decrease representable in floating point from here.
            converged = true;
            break;
        };

        let improvement = cur.value - eval.value;
        let s: Vec<f64> = trial.iter().zip(&psi).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = eval.grad.iter().zip(g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h, &s, &y, &free);
        psi = trial;
        cur = eval;

        if improvement < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EfaError::NonConvergence(cfg.max_iter));
    }

    let mut loadings = cur.loadings;
    for mut col in loadings.column_iter_mut() {
        if col.sum() < 0.0 {
            col.neg_mut();
        }
    }
    let heywood = (0..p).filter(|&i| psi[i] <= lo * (1.0 + 1e-9)).collect();
    Ok(UnrotatedSolution {
        loadings,
        communalities: psi.iter().map(|v| 1.0 - v).collect(),
        uniquenesses: psi,
        objective_value: cur.value,
        converged,
        iterations,
        heywood,
    })
}

fn search_direction(h: &DMatrix<f64>, g: &[f64], free: &[bool]) -> Vec<f64> {
    let p = g.len();
    (0..p)
        .map(|i| {
            if !free[i] {
                return 0.0;
            }
            -(0..p).filter(|&j| free[j]).map(|j| h[(i, j)] * g[j]).sum::<f64>()
        })
        .collect()
}

fn bfgs_update(h: &mut DMatrix<f64>, s: &[f64], y: &[f64], free: &[bool]) {
    let p = s.len();
    let mask = |v: &[f64]| DVector::from_fn(p, |i, _| if free[i] { v[i] } else { 0.0 });
    let s = mask(s);
    let y = mask(y);
    let sy = s.dot(&y);
    if sy <= 1e-16 * s.norm() * y.norm() || sy <= 0.0 {
        return;
    }
    let rho = 1.0 / sy;
    let hy = &*h * &y;
    let yhy = y.dot(&hy);
    // H' = H - ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
    let update = -(&hy * s.transpose() + &s * hy.transpose()) * rho
        + &s * s.transpose() * (rho * rho * yhy + rho);
    *h += update;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitStats {
    pub rmsr: f64,
    pub eigenvalues_of_r: Vec<f64>,
    pub ss_loadings: Vec<f64>,
    pub prop_variance_per_factor: Vec<f64>,
}

impl FitStats {
    pub fn acceptable(&self) -> bool {
        self.rmsr <= RMSR_GATE
    }
}

/// Root mean square of `c - model` over the strict upper triangle.
pub fn rmsr(c: &DMatrix<f64>, model: &DMatrix<f64>) -> f64 {
    let p = c.nrows();
    if p < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..p {
        for i in 0..j {
            acc += (c[(i, j)] - model[(i, j)]).powi(2);
        }
    }
    (acc / (p * (p - 1) / 2) as f64).sqrt()
}

pub fn fit_stats(c: &CorrMatrix, sol: &UnrotatedSolution) -> Result<FitStats, EfaError> {
    let p = c.dim();
    if sol.loadings.nrows() != p {
        return Err(EfaError::InvalidInput("loadings do not match the matrix".into()));
    }
    let model = &sol.loadings * sol.loadings.transpose();
    let ss_loadings: Vec<f64> = sol
        .loadings
        .column_iter()
        .map(|col| col.norm_squared())
        .collect();
    Ok(FitStats {
        rmsr: rmsr(&c.r, &model),
        eigenvalues_of_r: eigenvalues(&c.r)?,
        prop_variance_per_factor: ss_loadings.iter().map(|s| s / p as f64).collect(),
        ss_loadings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_factor(lambda: &[f64]) -> DMatrix<f64> {
        let p = lambda.len();
        DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { lambda[i] * lambda[j] })
    }

    #[test]
    fn identity_and_equicorrelation_eigenvalues() {
        assert_eq!(eigenvalues(&DMatrix::identity(3, 3)).unwrap(), vec![1.0; 3]);
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let e = eigenvalues(&m).unwrap();
        for (got, want) in e.iter().zip([2.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lam = DMatrix::from_row_slice(
            6,
            2,
            &[0.7, 0.1, 0.6, 0.2, 0.5, 0.0, 0.1, 0.7, 0.2, 0.6, 0.0, 0.5],
        );
        let mut c = &lam * lam.transpose();
        for i in 0..6 {
            c[(i, i)] = 1.0;
        }
        c[(0, 5)] += 0.05;
        c[(5, 0)] += 0.05;
        let psi = vec![0.5, 0.55, 0.7, 0.45, 0.6, 0.72];
        let e = evaluate(&c, &psi, 2).unwrap();
        let h = 1e-6;
        for t in 0..6 {
            let mut up = psi.clone();
            up[t] += h;
            let mut dn = psi.clone();
            dn[t] -= h;
            let fd = (evaluate(&c, &up, 2).unwrap().value - evaluate(&c, &dn, 2).unwrap().value)
                / (2.0 * h);
            assert!((fd - e.grad[t]).abs() < 1e-7, "t={t}: fd {fd} vs {}", e.grad[t]);
        }
    }

    #[test]
    fn recovers_single_factor() {
        let c = one_factor(&[0.8, 0.7, 0.6]);
        let sol = extract_minres_matrix(&c, 1, &MinresConfig::default()).unwrap();
        for (got, want) in sol.loadings.column(0).iter().zip([0.8, 0.7, 0.6]) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
        assert!(sol.converged);
        for i in 0..3 {
            let h2 = sol.loadings.row(i).norm_squared();
            assert!((h2 - sol.communalities[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_has_no_common_variance() {
        let sol = extract_minres_matrix(&DMatrix::identity(4, 4), 1, &MinresConfig::default())
            .unwrap();
        assert!(sol.loadings.iter().all(|&v| v == 0.0));
        assert!(sol.uniquenesses.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_bad_factor_counts() {
        let c = DMatrix::identity(3, 3);
        for k in [0, 3] {
            assert!(matches!(
                extract_minres_matrix(&c, k, &MinresConfig::default()),
                Err(EfaError::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn rmsr_direct_formula() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        assert!((rmsr(&c, &m) - 0.1).abs() < 1e-15);
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0]);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.3, 0.4, 1.0, 0.7, 0.3, 0.7, 1.0]);
        assert!((rmsr(&c, &m) - (0.09f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((rmsr(&c, &m) - 0.17321).abs() < 5e-6);
        assert_eq!(rmsr(&c, &c), 0.0);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
        assert!((quantile_sorted(&xs, 0.95) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn parallel_analysis_is_seed_reproducible() {
        let observed: Vec<f64> = (0..8).map(|i| 2.0 - 0.2 * i as f64).collect();
        let cfg = ParallelConfig {
            n_replicates: 20,
            seed: 11,
            ..ParallelConfig::default()
        };
        let a = parallel_analysis(200, 8, &observed, &cfg).unwrap();
        let b = parallel_analysis(200, 8, &observed, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a
            .random_eigs_quantile
            .windows(2)
            .all(|w| w[0] >= w[1]));
        let other = parallel_analysis(200, 8, &observed, &ParallelConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.random_eigs_quantile, other.random_eigs_quantile);
    }

    #[test]
    fn four_large_eigenvalues_are_retained() {
        let mut observed = vec![10.9, 3.4, 2.4, 1.9];
        let rest = (58.0 - observed.iter().sum::<f64>()) / 54.0;
        observed.extend(std::iter::repeat(rest).take(54));
        let pa = parallel_analysis(4971, 58, &observed, &ParallelConfig::default()).unwrap();
        assert!(pa.random_eigs_quantile[0] < 1.3);
        assert_eq!(pa.suggested_k, 4);
    }
}
