//! Phi correlations under pairwise deletion, PSD smoothing and
//! factorability diagnostics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::ingest::DeficitMatrix;
use crate::linalg::{spd_inverse, spd_log_det, sym_eigen};

pub const DEFAULT_MIN_PAIRS: usize = 30;

/// Eigenvalues at or above this are treated as non-negative.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Floor for clipped eigenvalues during smoothing.
pub const CLIP_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("variable {0} has a constant margin")]
    DegenerateMargin(String),
    #[error("pair ({a}, {b}) has {n} complete cases, need at least {min}")]
    InsufficientOverlap {
        a: String,
        b: String,
        n: usize,
        min: usize,
    },
    #[error("eigendecomposition did not converge")]
    Eigen,
    #[error("{0}")]
    InvalidInput(String),
}

/// 2×2 table of two binary variables: `n11` both present, `n10` only the
/// first, `n01` only the second, `n00` neither.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Table2x2 {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl Table2x2 {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn phi(&self) -> Option<f64> {
        let (a, b, c, d) = (
            self.n11 as f64,
            self.n10 as f64,
            self.n01 as f64,
            self.n00 as f64,
        );
        let denom = (a + b) * (c + d) * (a + c) * (b + d);
        (denom > 0.0).then(|| ((a * d - b * c) / denom.sqrt()).clamp(-1.0, 1.0))
    }
}

/// Phi coefficient of a 2×2 table; errors when either variable is constant.
pub fn phi(n11: u64, n10: u64, n01: u64, n00: u64) -> Result<f64, CorrError> {
    let t = Table2x2 { n11, n10, n01, n00 };
    t.phi().ok_or_else(|| {
        let first = n11 + n10 == 0 || n01 + n00 == 0;
        CorrError::DegenerateMargin(if first { "first" } else { "second" }.into())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrMatrix {
    pub ids: Vec<String>,
    #[serde(serialize_with = "ser_matrix")]
    pub r: DMatrix<f64>,
    #[serde(serialize_with = "ser_counts")]
    pub n_pairs: DMatrix<usize>,
    pub smoothed: bool,
    /// Smallest eigenvalue of the matrix as it was before any smoothing.
    pub min_eig_before: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        seq.serialize_element(&row.iter().copied().collect::<Vec<_>>())?;
    }
    seq.end()
}

fn ser_counts<S: serde::Serializer>(m: &DMatrix<usize>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        seq.serialize_element(&row.iter().copied().collect::<Vec<_>>())?;
    }
    seq.end()
}

impl CorrMatrix {
    /// Wraps a complete-data correlation matrix, recording its smallest eigenvalue.
    pub fn from_matrix(ids: Vec<String>, r: DMatrix<f64>, n: usize) -> Result<Self, CorrError> {
        let p = r.nrows();
        if r.ncols() != p || ids.len() != p {
            return Err(CorrError::InvalidInput("correlation matrix shape mismatch".into()));
        }
        let min_eig_before = min_eigenvalue(&r)?;
        Ok(Self {
            ids,
            r,
            n_pairs: DMatrix::from_element(p, p, n),
            smoothed: false,
            min_eig_before,
        })
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }
}

fn min_eigenvalue(r: &DMatrix<f64>) -> Result<f64, CorrError> {
    let e = sym_eigen(r).ok_or(CorrError::Eigen)?;
    Ok(e.values.last().copied().unwrap_or(0.0))
}

/// Phi for every pair of columns, each from that pair's complete cases.
pub fn pairwise_phi_matrix(
    m: &DeficitMatrix,
    ids: &[String],
    min_pairs: usize,
) -> Result<CorrMatrix, CorrError> {
    let p = m.ncols();
    if p < 2 {
        return Err(CorrError::InvalidInput(format!("need at least 2 variables, found {p}")));
    }
    if ids.len() != p {
        return Err(CorrError::InvalidInput("id count does not match columns".into()));
    }

    // Constant columns are catalog problems; report them by name first.
    for (j, id) in ids.iter().enumerate() {
        let mut seen = [false; 2];
        m.column(j).flatten().for_each(|b| seen[b as usize] = true);
        if !(seen[0] && seen[1]) {
            return Err(CorrError::DegenerateMargin(id.clone()));
        }
    }

    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|a| (a + 1..p).map(move |b| (a, b)))
        .collect();
    let tables: Vec<Table2x2> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut t = Table2x2::default();
            for i in 0..m.nrows() {
                match (m.get(i, a), m.get(i, b)) {
                    (Some(true), Some(true)) => t.n11 += 1,
                    (Some(true), Some(false)) => t.n10 += 1,
                    (Some(false), Some(true)) => t.n01 += 1,
                    (Some(false), Some(false)) => t.n00 += 1,
                    _ => {}
                }
            }
            t
        })
        .collect();

    let mut r = DMatrix::identity(p, p);
    let mut n_pairs = DMatrix::zeros(p, p);
    for j in 0..p {
        n_pairs[(j, j)] = m.column(j).flatten().count();
    }
    for (&(a, b), t) in pairs.iter().zip(&tables) {
        let n = t.total() as usize;
        if n < min_pairs.max(1) {
            return Err(CorrError::InsufficientOverlap {
                a: ids[a].clone(),
                b: ids[b].clone(),
                n,
                min: min_pairs.max(1),
            });
        }
        let v = t.phi().ok_or_else(|| {
            CorrError::DegenerateMargin(format!("{} within pair ({}, {})", ids[a], ids[a], ids[b]))
        })?;
        r[(a, b)] = v;
        r[(b, a)] = v;
        n_pairs[(a, b)] = n;
        n_pairs[(b, a)] = n;
    }

    let min_eig_before = min_eigenvalue(&r)?;
    Ok(CorrMatrix {
        ids: ids.to_vec(),
        r,
        n_pairs,
        smoothed: false,
        min_eig_before,
    })
}

/// Eigenvalue clipping followed by rescaling to unit diagonal. Matrices that
/// are already PSD (within [`PSD_TOLERANCE`]) come back unchanged.
pub fn smooth_psd(c: &CorrMatrix) -> Result<CorrMatrix, CorrError> {
    let e = sym_eigen(&c.r).ok_or(CorrError::Eigen)?;
    let min_eig = e.values.last().copied().unwrap_or(0.0);
    let mut out = c.clone();
    if !c.smoothed {
        out.min_eig_before = min_eig;
    }
    if min_eig >= -PSD_TOLERANCE {
        return Ok(out);
    }
    let mut clipped = e.clone();
    for v in &mut clipped.values {
        *v = v.max(CLIP_EPS);
    }
    let a = clipped.reconstruct();
    let p = a.nrows();
    let scale: Vec<f64> = (0..p).map(|i| 1.0 / a[(i, i)].sqrt()).collect();
    let mut r = DMatrix::from_fn(p, p, |i, j| a[(i, j)] * scale[i] * scale[j]);
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    out.r = r;
    out.smoothed = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorabilityReport {
    pub n: usize,
    pub p: usize,
    /// `None` when the matrix is singular.
    pub bartlett_chi2: Option<f64>,
    pub bartlett_df: usize,
    pub bartlett_p: Option<f64>,
    pub kmo_overall: Option<f64>,
    pub kmo_per_variable: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

/// Bartlett's sphericity test and the Kaiser-Meyer-Olkin sampling adequacy.
pub fn factorability(c: &CorrMatrix, n: usize) -> Result<FactorabilityReport, CorrError> {
    let p = c.dim();
    if n <= p {
        return Err(CorrError::InvalidInput(format!(
            "factorability needs more observations than variables (n = {n}, p = {p})"
        )));
    }
    let df = p * (p - 1) / 2;
    let mut warnings = Vec::new();

    let (bartlett_chi2, bartlett_p) = match spd_log_det(&c.r) {
        Some(ld) => {
            let chi2 = (-(n as f64 - 1.0 - (2.0 * p as f64 + 5.0) / 6.0) * ld).max(0.0);
            let pval = ChiSquared::new(df as f64)
                .map(|d| d.sf(chi2))
                .unwrap_or(f64::NAN);
            (Some(chi2), Some(pval))
        }
        None => {
            warnings.push("correlation matrix is singular; Bartlett test undefined".into());
            (None, None)
        }
    };

    let (kmo_overall, kmo_per_variable) = match spd_inverse(&c.r) {
        Some(inv) => {
            let partial =
                |i: usize, j: usize| -inv[(i, j)] / (inv[(i, i)] * inv[(j, j)]).sqrt();
            let mut r2_all = 0.0;
            let mut a2_all = 0.0;
            let mut per = Vec::with_capacity(p);
            for i in 0..p {
                let mut r2 = 0.0;
                let mut a2 = 0.0;
                for j in (0..p).filter(|&j| j != i) {
                    r2 += c.r[(i, j)].powi(2);
                    a2 += partial(i, j).powi(2);
                }
                r2_all += r2;
                a2_all += a2;
                per.push(Some(kmo_ratio(r2, a2)));
            }
            if r2_all == 0.0 && a2_all == 0.0 {
                warnings.push("no shared variance; KMO set to 0".into());
            }
            (Some(kmo_ratio(r2_all, a2_all)), per)
        }
        None => {
            warnings.push("correlation matrix is singular; KMO undefined".into());
            (None, vec![None; p])
        }
    };

    Ok(FactorabilityReport {
        n,
        p,
        bartlett_chi2,
        bartlett_df: df,
        bartlett_p,
        kmo_overall,
        kmo_per_variable,
        warnings,
    })
}

// 0/0 (a diagonal matrix) counts as no sampling adequacy.
fn kmo_ratio(r2: f64, a2: f64) -> f64 {
    if r2 + a2 == 0.0 {
        0.0
    } else {
        r2 / (r2 + a2)
    }
}
