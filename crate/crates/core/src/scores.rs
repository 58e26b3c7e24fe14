//! Factor scores by the regression method and Pearson correlations among
//! scores and the frailty index.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::corr::CorrMatrix;
use crate::findex::FrailtyResult;
use crate::ingest::DeficitMatrix;
use crate::linalg::spd_inverse;
use crate::rotate::RotatedSolution;

#[derive(Debug, Error)]
pub enum ScoresError {
    #[error("correlation matrix is not invertible; smooth it or drop variables")]
    SingularMatrix,
    #[error("input is constant")]
    ConstantInput,
    #[error("need at least {need} observations, found {found}")]
    InsufficientData { need: usize, found: usize },
    #[error("{0}")]
    DimensionMismatch(String),
}

pub const METHOD_REGRESSION: &str = "thurstone_regression";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMatrix {
    pub ids: Vec<String>,
    /// N × k.
    #[serde(skip)]
    pub scores: DMatrix<f64>,
    pub method: &'static str,
    /// p × k weights applied to the standardized deficits.
    #[serde(skip)]
    pub weights: DMatrix<f64>,
    /// Rows with every deficit missing; their scores are all zero.
    pub empty_rows: Vec<String>,
}

/// Column means and sample standard deviations over observed cells.
fn column_moments(m: &DeficitMatrix) -> Result<Vec<(f64, f64)>, ScoresError> {
    (0..m.ncols())
        .map(|j| {
            let obs: Vec<f64> = m.column(j).flatten().map(|b| b as u8 as f64).collect();
            if obs.len() < 2 {
                return Err(ScoresError::InsufficientData {
                    need: 2,
                    found: obs.len(),
                });
            }
            let n = obs.len() as f64;
            let mean = obs.iter().sum::<f64>() / n;
            let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var <= 0.0 {
                return Err(ScoresError::ConstantInput);
            }
            Ok((mean, var.sqrt()))
        })
        .collect()
}

/// Thurstone regression scores: Z R⁻¹ (Λ Φ), with Z the standardized
/// deficits and missing standardized cells set to zero.
pub fn regression_scores(
    m: &DeficitMatrix,
    ids: &[String],
    c: &CorrMatrix,
    rot: &RotatedSolution,
) -> Result<ScoreMatrix, ScoresError> {
    let p = m.ncols();
    if c.dim() != p || rot.pattern.nrows() != p || ids.len() != m.nrows() {
        return Err(ScoresError::DimensionMismatch(format!(
            "deficits have {p} columns and {} rows; correlation is {}x{}, pattern has {} rows, {} ids",
            m.nrows(),
            c.dim(),
            c.dim(),
            rot.pattern.nrows(),
            ids.len()
        )));
    }
    let inv = spd_inverse(&c.r).ok_or(ScoresError::SingularMatrix)?;
    let weights = inv * &rot.pattern * &rot.phi;
    let moments = column_moments(m)?;
    let z = DMatrix::from_fn(m.nrows(), p, |i, j| match m.get(i, j) {
        Some(b) => (b as u8 as f64 - moments[j].0) / moments[j].1,
        None => 0.0,
    });
    let empty_rows = (0..m.nrows())
        .filter(|&i| m.row(i).iter().all(Option::is_none))
        .map(|i| ids[i].clone())
        .collect();
    Ok(ScoreMatrix {
        ids: ids.to_vec(),
        scores: z * &weights,
        method: METHOD_REGRESSION,
        weights,
        empty_rows,
    })
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ScoresError> {
    if x.len() != y.len() {
        return Err(ScoresError::DimensionMismatch(format!(
            "lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(ScoresError::InsufficientData {
            need: 3,
            found: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ScoresError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCorrelations {
    /// F1..Fk then FI.
    pub labels: Vec<String>,
    #[serde(skip)]
    pub r: DMatrix<f64>,
}

/// Correlations among the k factor scores and the frailty index.
pub fn score_correlation_report(
    scores: &ScoreMatrix,
    fi: &[FrailtyResult],
) -> Result<ScoreCorrelations, ScoresError> {
    if fi.len() != scores.ids.len() || fi.iter().zip(&scores.ids).any(|(f, id)| &f.id != id) {
        return Err(ScoresError::DimensionMismatch(
            "factor scores and frailty indices are not aligned by participant".into(),
        ));
    }
    let k = scores.scores.ncols();
    let mut columns: Vec<Vec<f64>> = scores
        .scores
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    columns.push(fi.iter().map(|f| f.fi).collect());
    let mut labels: Vec<String> = (1..=k).map(|j| format!("F{j}")).collect();
    labels.push("FI".into());

    let mut r = DMatrix::identity(k + 1, k + 1);
    for a in 0..=k {
        for b in 0..a {
            let v = pearson(&columns[a], &columns[b])?;
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    Ok(ScoreCorrelations { labels, r })
}
