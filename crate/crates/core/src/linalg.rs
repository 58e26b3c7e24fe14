//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors in the matching columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Returns `None` when the QR iteration exhausts its iteration budget.
pub fn sym_eigen(m: &DMatrix<f64>) -> Option<SymEigen> {
    let p = m.nrows();
    assert_eq!(p, m.ncols(), "eigendecomposition of a non-square matrix");
    if p == 0 {
        return Some(SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    // Symmetrize so round-off asymmetry never leaks into the solver.
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000 * p.max(10))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Some(SymEigen { values, vectors })
}

impl SymEigen {
    /// Q diag(values) Qᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DVector::from_column_slice(&self.values);
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.transpose()
    }
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    let inv = chol.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Natural log of the determinant of a symmetric positive-definite matrix.
pub fn spd_log_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Pearson correlation matrix of the columns of `data` (n × p, complete).
pub fn column_correlation(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let p = data.ncols();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let mut r = centered.transpose() * &centered;
    for i in 0..p {
        r[(i, i)] = 1.0;
    }
    r
}
