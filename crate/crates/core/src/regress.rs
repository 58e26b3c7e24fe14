//! Standardized multiple linear regression and model comparison.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::beta::beta_reg;
use thiserror::Error;

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("input is constant")]
    ConstantInput,
    #[error("need more than {need} complete rows, found {found}")]
    InsufficientData { need: usize, found: usize },
    #[error("design is rank deficient: `{column}` is collinear with {others:?}")]
    RankDeficient { column: String, others: Vec<String> },
    #[error("models differ in {0}")]
    CohortMismatch(String),
    #[error("{0}")]
    DimensionMismatch(String),
}

/// Centers to mean zero and scales to unit sample standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>, RegressError> {
    if x.len() < 2 {
        return Err(RegressError::InsufficientData {
            need: 1,
            found: x.len(),
        });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(RegressError::ConstantInput);
    }
    let sd = var.sqrt();
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Named predictor columns; `None` marks a missing value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl Design {
    pub fn push(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn push_complete(&mut self, name: impl Into<String>, values: &[f64]) {
        self.push(name, values.iter().copied().map(Some).collect());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub outcome: String,
    pub standardized: bool,
    /// Intercept first, then predictors in design order.
    pub terms: Vec<Term>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_stat: f64,
    pub f_p: f64,
    pub sigma: f64,
    pub n_used: usize,
    pub df_resid: usize,
    pub dropped_missing: usize,
}

impl RegressionFit {
    pub fn n_predictors(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

pub fn adjusted_r2(r2: f64, n: usize, q: usize) -> f64 {
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - q as f64 - 1.0)
}

// Listwise deletion: indices of rows complete in y and every column.
fn complete_rows(design: &Design, y: &[Option<f64>]) -> Result<Vec<usize>, RegressError> {
    if design.names.len() != design.columns.len() {
        return Err(RegressError::DimensionMismatch("names and columns differ".into()));
    }
    if let Some(c) = design.columns.iter().find(|c| c.len() != y.len()) {
        return Err(RegressError::DimensionMismatch(format!(
            "column of length {} vs outcome of length {}",
            c.len(),
            y.len()
        )));
    }
    Ok((0..y.len())
        .filter(|&i| {
            y[i].is_some_and(f64::is_finite)
                && design.columns.iter().all(|c| c[i].is_some_and(f64::is_finite))
        })
        .collect())
}

/// Ordinary least squares with an intercept, rows with any missing value
/// dropped. Solved through a QR decomposition of the design.
pub fn ols(design: &Design, outcome: &str, y: &[Option<f64>]) -> Result<RegressionFit, RegressError> {
    let rows = complete_rows(design, y)?;
    let yv: Vec<f64> = rows.iter().map(|&i| y[i].unwrap()).collect();
    let cols: Vec<Vec<f64>> = design
        .columns
        .iter()
        .map(|c| rows.iter().map(|&i| c[i].unwrap()).collect())
        .collect();
    let mut fit = ols_complete(&design.names, &cols, outcome, &yv)?;
    fit.dropped_missing = y.len() - rows.len();
    Ok(fit)
}

/// Listwise deletion, then every predictor and the outcome standardized over
/// the retained rows before fitting, so coefficients are in SD units.
pub fn fit_standardized(
    design: &Design,
    outcome: &str,
    y: &[Option<f64>],
) -> Result<RegressionFit, RegressError> {
    let rows = complete_rows(design, y)?;
    let q = design.names.len();
    if rows.len() <= q + 1 {
        return Err(RegressError::InsufficientData {
            need: q + 1,
            found: rows.len(),
        });
    }
    let yv = standardize(&rows.iter().map(|&i| y[i].unwrap()).collect::<Vec<_>>())?;
    let cols = design
        .columns
        .iter()
        .zip(&design.names)
        .map(|(c, name)| {
            standardize(&rows.iter().map(|&i| c[i].unwrap()).collect::<Vec<_>>()).map_err(|e| {
                match e {
                    RegressError::ConstantInput => RegressError::RankDeficient {
                        column: name.clone(),
                        others: vec![INTERCEPT.into()],
                    },
                    other => other,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut fit = ols_complete(&design.names, &cols, outcome, &yv)?;
    fit.standardized = true;
    fit.dropped_missing = y.len() - rows.len();
    Ok(fit)
}

fn ols_complete(
    names: &[String],
    cols: &[Vec<f64>],
    outcome: &str,
    y: &[f64],
) -> Result<RegressionFit, RegressError> {
    let n = y.len();
    let q = cols.len();
    let width = q + 1;
    if n <= width {
        return Err(RegressError::InsufficientData {
            need: width,
            found: n,
        });
    }
    let x = DMatrix::from_fn(n, width, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();

    let mut all_names = vec![INTERCEPT.to_string()];
    all_names.extend(names.iter().cloned());
    let scale = (0..width).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    for j in 0..width {
        if r[(j, j)].abs() <= 1e-10 * scale.max(1.0) {
            return Err(RegressError::RankDeficient {
                column: all_names[j].clone(),
                others: all_names[..j].to_vec(),
            });
        }
    }

    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("diagonal of R checked nonzero");
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(width, width))
        .expect("diagonal of R checked nonzero");
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &yv - &x * &beta;
    let sse = resid.norm_squared();
    let mean_y = yv.mean();
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let df = n - width;
    let sigma2 = sse / df as f64;
    let r2 = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 0.0 };

    let terms = (0..width)
        .map(|j| {
            let se = (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt();
            let t = beta[j] / se;
            Term {
                name: all_names[j].clone(),
                beta: beta[j],
                se,
                t,
                p: student_t_two_sided(t, df as f64),
            }
        })
        .collect();

    let f_stat = if q == 0 {
        f64::NAN
    } else {
        (r2 / q as f64) / ((1.0 - r2) / df as f64)
    };
    let f_p = if q == 0 || f_stat.is_nan() {
        f64::NAN
    } else if f_stat.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(q as f64, df as f64)
            .map(|d| d.sf(f_stat))
            .unwrap_or(f64::NAN)
    };

    Ok(RegressionFit {
        outcome: outcome.to_string(),
        standardized: false,
        terms,
        r2,
        adj_r2: adjusted_r2(r2, n, q),
        f_stat,
        f_p,
        sigma: sigma2.sqrt(),
        n_used: n,
        df_resid: df,
        dropped_missing: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preferred {
    Model1,
    Model2,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub predictors: Vec<String>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub outcome: String,
    pub n_used: usize,
    pub model1: ModelSummary,
    pub model2: ModelSummary,
    pub delta_r2: f64,
    pub delta_adj_r2: f64,
    /// Decided on adjusted R².
    pub preferred: Preferred,
}

fn summary(m: &RegressionFit) -> ModelSummary {
    ModelSummary {
        predictors: m.terms[1..].iter().map(|t| t.name.clone()).collect(),
        r2: m.r2,
        adj_r2: m.adj_r2,
        f_p: m.f_p,
    }
}

pub fn compare_models(m1: &RegressionFit, m2: &RegressionFit) -> Result<ModelComparison, RegressError> {
    if m1.outcome != m2.outcome {
        return Err(RegressError::CohortMismatch(format!(
            "outcome (`{}` vs `{}`)",
            m1.outcome, m2.outcome
        )));
    }
    if m1.n_used != m2.n_used {
        return Err(RegressError::CohortMismatch(format!(
            "rows used ({} vs {})",
            m1.n_used, m2.n_used
        )));
    }
    let delta_adj_r2 = m2.adj_r2 - m1.adj_r2;
    Ok(ModelComparison {
        outcome: m1.outcome.clone(),
        n_used: m1.n_used,
        model1: summary(m1),
        model2: summary(m2),
        delta_r2: m2.r2 - m1.r2,
        delta_adj_r2,
        preferred: if delta_adj_r2 > 0.0 {
            Preferred::Model2
        } else if delta_adj_r2 < 0.0 {
            Preferred::Model1
        } else {
            Preferred::Tie
        },
    })
}
