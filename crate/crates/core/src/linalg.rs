//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetric_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_spectrum(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = symmetric_part(m).symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Smallest eigenvalue of `(m + mᵀ)/2`; `+∞` for an empty matrix.
pub fn sym_min_eig(m: &Mat) -> f64 {
    symmetric_spectrum(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with the usual `max(rows, cols) · eps · σ_max` cutoff.
pub fn rank(m: &Mat) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    let cutoff = top * f64::EPSILON * m.nrows().max(m.ncols()) as f64 * 10.0;
    s.iter().filter(|&&v| v > cutoff).count()
}

/// 2-norm condition number; `∞` when singular.
pub fn condition_number(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
            }
        }
    }
    out
}

pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= rel_tol * scale
}

/// Minimum-norm least-squares solution of `a · x = b`.
pub fn lstsq(a: &Mat, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::dims("lstsq right-hand side", a.nrows(), b.len()));
    }
    if a.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    if a.nrows() == 0 {
        return Ok(Vector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    let eps = top * f64::EPSILON * a.nrows().max(a.ncols()) as f64 * 10.0;
    svd.solve(b, eps).map_err(|e| Error::Singular(e.to_string()))
}

/// Solves `a · X = b` by partial-pivot LU.
pub fn lu_solve(a: &Mat, b: &Mat, what: &str) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::dims(format!("{what} (square)"), a.nrows(), a.ncols()));
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn mat_from_rows(rows: usize, cols: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, data)
}
