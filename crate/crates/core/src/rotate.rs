//! Oblique oblimin rotation by the gradient projection algorithm, plus the
//! salience and factor-adequacy rules applied to the rotated pattern.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::efa::UnrotatedSolution;

pub const DEFAULT_SALIENCE: f64 = 0.20;
/// Salient pattern coefficients a factor needs to count as adequate.
pub const MIN_SALIENT: usize = 3;

#[derive(Debug, Error)]
pub enum RotateError {
    #[error("loadings have no factors")]
    NoFactors,
    #[error("{0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObliminConfig {
    /// Oblimin weight; 0 gives direct quartimin.
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Random starts tried in addition to the identity start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ObliminConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            tol: 1e-5,
            max_iter: 1000,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotatedSolution {
    #[serde(skip)]
    pub pattern: DMatrix<f64>,
    #[serde(skip)]
    pub phi: DMatrix<f64>,
    #[serde(skip)]
    pub structure: DMatrix<f64>,
    /// Oblimin criterion of `pattern` (quartimin sum over ordered factor pairs when gamma = 0).
    pub criterion_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Which start produced the solution; 0 is the identity.
    pub start: usize,
}

impl RotatedSolution {
    /// Λ Φ Λᵀ, the fitted common-variance matrix.
    pub fn implied(&self) -> DMatrix<f64> {
        &self.pattern * &self.phi * self.pattern.transpose()
    }
}

/// Σ_i Σ_{j≠l} λ_ij² λ_il².
pub fn quartimin_value(pattern: &DMatrix<f64>) -> f64 {
    oblimin_value(pattern, 0.0)
}

/// Direct oblimin criterion ⟨L², (I − γ/p 11ᵀ) L² N⟩ with N the
/// off-diagonal ones matrix.
pub fn oblimin_value(pattern: &DMatrix<f64>, gamma: f64) -> f64 {
    let l2 = pattern.map(|v| v * v);
    let cross = centered(&(&l2 * off_diagonal_ones(pattern.ncols())), gamma);
    l2.component_mul(&cross).sum()
}

fn off_diagonal_ones(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { 1.0 })
}

fn centered(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    if gamma == 0.0 {
        return m.clone();
    }
    let p = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / p;
        col.add_scalar_mut(-gamma * mean);
    }
    out
}

/// Quarter of the criterion and its gradient with respect to the loadings.
fn criterion_and_gradient(l: &DMatrix<f64>, gamma: f64) -> (f64, DMatrix<f64>) {
    let l2 = l.map(|v| v * v);
    let cross = centered(&(&l2 * off_diagonal_ones(l.ncols())), gamma);
    let f = l2.component_mul(&cross).sum() / 4.0;
    (f, l.component_mul(&cross))
}

/// One gradient-projection run from a fixed start.
#[derive(Debug, Clone)]
pub struct GpaRun {
    /// Oblique transformation with unit-length columns.
    pub transform: DMatrix<f64>,
    pub pattern: DMatrix<f64>,
    /// Criterion after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl GpaRun {
    pub fn criterion(&self) -> f64 {
        4.0 * self.trace.last().copied().unwrap_or(f64::NAN)
    }
}

fn normalize_columns(m: &mut DMatrix<f64>) -> bool {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 || !n.is_finite() {
            return false;
        }
        col /= n;
    }
    true
}

fn pattern_for(a: &DMatrix<f64>, t: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = t.clone().try_inverse()?;
    let l = a * inv.transpose();
    l.iter().all(|v| v.is_finite()).then_some(l)
}

/// Gradient projection for oblique rotation: pattern = A T⁻ᵀ, Φ = TᵀT.
/// Each accepted step does not increase the criterion.
pub fn gpa_oblique(
    a: &DMatrix<f64>,
    start: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GpaRun, RotateError> {
    let k = a.ncols();
    if start.nrows() != k || start.ncols() != k {
        return Err(RotateError::InvalidInput("start transform has the wrong shape".into()));
    }
    let mut t = start.clone();
    if !normalize_columns(&mut t) {
        return Err(RotateError::InvalidInput("start transform has a zero column".into()));
    }
    let mut l = pattern_for(a, &t)
        .ok_or_else(|| RotateError::InvalidInput("start transform is singular".into()))?;
    let (mut f, mut gq) = criterion_and_gradient(&l, gamma);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let t_inv = t.clone().try_inverse().expect("accepted transforms are invertible");
        let g = -(l.transpose() * &gq * &t_inv).transpose();
        // Project the gradient onto the tangent space of unit-column matrices.
        let mut gp = g.clone();
        for j in 0..k {
            let d: f64 = t.column(j).dot(&g.column(j));
            gp.column_mut(j).axpy(-d, &t.column(j), 1.0);
        }
        let s = gp.norm();
        if s < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        step *= 2.0;
        let mut best: Option<(DMatrix<f64>, DMatrix<f64>, f64, DMatrix<f64>)> = None;
        for _ in 0..=10 {
            let mut x = &t - &gp * step;
            if normalize_columns(&mut x) {
                if let Some(lt) = pattern_for(a, &x) {
                    let (ft, gqt) = criterion_and_gradient(&lt, gamma);
                    let sufficient = f - ft > 0.5 * s * s * step;
                    if sufficient || (ft <= f && best.as_ref().is_none_or(|b| ft < b.2)) {
                        best = Some((x, lt, ft, gqt));
                    }
                    if sufficient {
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        match best {
            Some((tt, lt, ft, gqt)) if ft <= f => {
                t = tt;
                l = lt;
                f = ft;
                gq = gqt;
                trace.push(f);
            }
            // Line search could not decrease the criterion; stay put.
            _ => break,
        }
    }

    Ok(GpaRun {
        transform: t,
        pattern: l,
        trace,
        converged,
        iterations,
    })
}

/// Oblimin rotation of unrotated loadings with seeded random restarts.
pub fn oblimin_rotate(
    unrotated: &UnrotatedSolution,
    cfg: &ObliminConfig,
) -> Result<RotatedSolution, RotateError> {
    oblimin_rotate_loadings(&unrotated.loadings, cfg)
}

pub fn oblimin_rotate_loadings(
    a: &DMatrix<f64>,
    cfg: &ObliminConfig,
) -> Result<RotatedSolution, RotateError> {
    let k = a.ncols();
    if k == 0 {
        return Err(RotateError::NoFactors);
    }
    if k == 1 {
        let mut pattern = a.clone();
        if pattern.sum() < 0.0 {
            pattern.neg_mut();
        }
        return Ok(RotatedSolution {
            structure: pattern.clone(),
            pattern,
            phi: DMatrix::identity(1, 1),
            criterion_value: 0.0,
            converged: true,
            iterations: 0,
            start: 0,
        });
    }

    let runs: Vec<Result<GpaRun, RotateError>> = (0..=cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                DMatrix::identity(k, k)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                DMatrix::from_fn(k, k, |_, _| rng.sample(StandardNormal))
            };
            gpa_oblique(a, &start, cfg.gamma, cfg.tol, cfg.max_iter)
        })
        .collect();

    let mut best: Option<(usize, GpaRun)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        // A singular random start is simply skipped.
        let Ok(run) = run else { continue };
        let better = match &best {
            None => true,
            Some((_, b)) => run.criterion() < b.criterion(),
        };
        if better {
            best = Some((r, run));
        }
    }
    let (start, run) =
        best.ok_or_else(|| RotateError::InvalidInput("no rotation start succeeded".into()))?;

    let mut pattern = run.pattern;
    let mut phi = run.transform.transpose() * &run.transform;
    for j in 0..k {
        if pattern.column(j).sum() < 0.0 {
            pattern.column_mut(j).neg_mut();
            phi.column_mut(j).neg_mut();
            phi.row_mut(j).neg_mut();
        }
    }
    let structure = &pattern * &phi;
    let ss: Vec<f64> = structure.column_iter().map(|c| c.norm_squared()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| ss[y].total_cmp(&ss[x]).then(x.cmp(&y)));
    let pattern = DMatrix::from_fn(pattern.nrows(), k, |i, j| pattern[(i, order[j])]);
    let mut phi = DMatrix::from_fn(k, k, |i, j| phi[(order[i], order[j])]);
    for i in 0..k {
        phi[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (phi[(i, j)] + phi[(j, i)]);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    let structure = &pattern * &phi;

    Ok(RotatedSolution {
        criterion_value: oblimin_value(&pattern, cfg.gamma),
        pattern,
        phi,
        structure,
        converged: run.converged,
        iterations: run.iterations,
        start,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SalientItem {
    pub id: String,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSalience {
    /// 1-based factor number.
    pub factor: usize,
    pub items: Vec<SalientItem>,
    pub adequate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SalienceReport {
    pub threshold: f64,
    pub factors: Vec<FactorSalience>,
}

impl SalienceReport {
    pub fn all_adequate(&self) -> bool {
        self.factors.iter().all(|f| f.adequate)
    }
}

/// Loadings strictly beyond ±threshold are salient; a factor with at
/// least [`MIN_SALIENT`] of them is adequate.
pub fn salience(pattern: &DMatrix<f64>, ids: &[String], threshold: f64) -> SalienceReport {
    let factors = pattern
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let items: Vec<SalientItem> = col
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > threshold || **v < -threshold)
                .map(|(i, &v)| SalientItem {
                    id: ids.get(i).cloned().unwrap_or_else(|| format!("item{}", i + 1)),
                    loading: v,
                })
                .collect();
            FactorSalience {
                factor: j + 1,
                adequate: items.len() >= MIN_SALIENT,
                items,
            }
        })
        .collect();
    SalienceReport { threshold, factors }
}
