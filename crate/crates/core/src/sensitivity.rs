//! Derivative of the equilibrium with respect to cost parameters.
//!
//! With `L = [∇_x F]⁻¹` and `A = [B⁰; H]` (active inequalities over all
//! equalities),
//!
//! ```text
//! M = L − L Aᵀ (A L Aᵀ)⁻¹ A L,    ∇_y x*(ȳ) = −M ∇_y F(x*(ȳ), ȳ).
//! ```
//!
//! The formula needs `A` of full row rank and strictly positive multipliers
//! on every active inequality; otherwise the computation is refused.

use crate::error::{Error, Result};
use crate::game::{self, GameSpec};
use crate::linalg::{self, Mat, Vector};
use crate::solver::{self, EquilibriumResult, SolverConfig};

/// Condition number of `A L Aᵀ` above which the solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRow {
    /// Global row of the stacked inequality matrix.
    Inequality(usize),
    /// Global row of the stacked equality matrix.
    Equality(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetReport {
    pub a: Mat,
    pub rhs: Vector,
    pub rows: Vec<ConstraintRow>,
    pub rank: usize,
    pub full_row_rank: bool,
    pub strict_complementarity: bool,
    /// Active inequality rows whose multiplier is below `eps_strict`.
    pub offending_rows: Vec<usize>,
}

impl ActiveSetReport {
    pub fn holds(&self) -> bool {
        self.full_row_rank && self.strict_complementarity
    }

    pub fn active_inequalities(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().filter_map(|r| match r {
            ConstraintRow::Inequality(k) => Some(*k),
            ConstraintRow::Equality(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub dx_dy: Mat,
    pub l: Mat,
    pub m: Mat,
    pub cq: ActiveSetReport,
    /// Eigenvalues of `(M + Mᵀ)/2`, ascending.
    pub m_spectrum: Vec<f64>,
}

impl SensitivityResult {
    pub fn m_min_eig(&self) -> f64 {
        self.m_spectrum.first().copied().unwrap_or(f64::INFINITY)
    }

    /// `‖A ∇_y x*‖_∞`.
    pub fn tangency_residual(&self) -> f64 {
        if self.cq.a.nrows() == 0 {
            return 0.0;
        }
        (&self.cq.a * &self.dx_dy).amax()
    }
}

pub fn detect_active_set(spec: &GameSpec, eq: &EquilibriumResult) -> ActiveSetReport {
    let (b, b_rhs) = spec.stacked_inequalities();
    let (h, h_rhs) = spec.stacked_equalities();
    let total = spec.total_dim();
    let active = solver::active_inequalities(spec, &eq.x_star, eq.eps_active);
    let q = active.len() + h.nrows();

    let mut a = Mat::zeros(q, total);
    let mut rhs = Vector::zeros(q);
    let mut rows = Vec::with_capacity(q);
    for (r, &k) in active.iter().enumerate() {
        a.set_row(r, &b.row(k));
        rhs[r] = b_rhs[k];
        rows.push(ConstraintRow::Inequality(k));
    }
    for k in 0..h.nrows() {
        let r = active.len() + k;
        a.set_row(r, &h.row(k));
        rhs[r] = h_rhs[k];
        rows.push(ConstraintRow::Equality(k));
    }

    let rank = linalg::rank(&a);
    let offending_rows: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&k| !(eq.lambda.get(k).copied().unwrap_or(0.0) >= eq.eps_strict))
        .collect();
    ActiveSetReport {
        a,
        rhs,
        rows,
        rank,
        full_row_rank: rank == q,
        strict_complementarity: offending_rows.is_empty(),
        offending_rows,
    }
}

/// `L − L Aᵀ (A L Aᵀ)⁻¹ A L`; returns `L` itself when `A` has no rows.
pub fn projected_inverse(l: &Mat, a: &Mat) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(l.clone());
    }
    if a.ncols() != l.nrows() {
        return Err(Error::dims("constraint matrix columns", l.nrows(), a.ncols()));
    }
    let lat = l * a.transpose();
    let al = a * l;
    let schur = a * &lat;
    let condition = linalg::condition_number(&schur);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition });
    }
    let correction = linalg::lu_solve(&schur, &al, "A L Aᵀ")?;
    Ok(l - lat * correction)
}

pub fn sensitivity_matrix(spec: &GameSpec, eq: &EquilibriumResult, y_bar: &Vector) -> Result<SensitivityResult> {
    let cq = detect_active_set(spec, eq);
    if !cq.holds() {
        return Err(Error::CqViolation(Box::new(cq)));
    }
    let jac = game::operator_jacobian(spec, &eq.x_star, y_bar)?;
    let total = spec.total_dim();
    let l = linalg::lu_solve(&jac, &Mat::identity(total, total), "operator Jacobian")?;
    let m = projected_inverse(&l, &cq.a)?;
    let fy = game::parameter_jacobian(spec, &eq.x_star, y_bar)?;
    let dx_dy = -(&m * fy);
    let m_spectrum = linalg::symmetric_spectrum(&m);
    Ok(SensitivityResult {
        dx_dy,
        l,
        m,
        cq,
        m_spectrum,
    })
}

/// Central difference `(x*(ȳ + h d) − x*(ȳ − h d)) / 2h`.
pub fn finite_difference_oracle(
    spec: &GameSpec,
    y_bar: &Vector,
    direction: &Vector,
    h: f64,
    cfg: &SolverConfig,
) -> Result<Vector> {
    if direction.len() != y_bar.len() {
        return Err(Error::dims("finite-difference direction", y_bar.len(), direction.len()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    if direction.iter().all(|&d| d == 0.0) {
        return Ok(Vector::zeros(spec.total_dim()));
    }
    let plus = solver::solve_nash(spec, &(y_bar + direction * h), cfg)?;
    let minus = solver::solve_nash(spec, &(y_bar - direction * h), cfg)?;
    Ok((plus.x_star - minus.x_star) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{FriedkinJohnsenCost, Network, PolyhedralSet};
    use crate::linalg::mat_from_rows;
    use std::sync::Arc;

    fn fj(pinned_second: bool) -> GameSpec {
        let p = mat_from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let mut sets = vec![PolyhedralSet::unconstrained(1); 2];
        if pinned_second {
            sets[1] = PolyhedralSet::affine(Mat::identity(1, 1), Vector::zeros(1)).unwrap();
        }
        GameSpec::new(
            Network::new(p).unwrap(),
            sets,
            Arc::new(FriedkinJohnsenCost::new(2, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_fj_sensitivity() {
        let y = Vector::from_vec(vec![1.0, 0.0]);
        let spec = fj(false);
        let eq = solver::solve_nash(&spec, &y, &SolverConfig::default()).unwrap();
        let s = sensitivity_matrix(&spec, &eq, &y).unwrap();
        // Oracle: 0.5 · (I − P/2)⁻¹ from the explicit 2×2 inverse.
        let expected = mat_from_rows(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((&s.dx_dy - expected).amax() < 1e-12);
        assert_eq!(s.m, s.l);
        assert!(s.cq.a.nrows() == 0 && s.cq.holds());
    }

    #[test]
    fn pinned_fj_sensitivity() {
        let y = Vector::from_vec(vec![1.0, 0.0]);
        let spec = fj(true);
        let eq = solver::solve_nash(&spec, &y, &SolverConfig::default()).unwrap();
        let s = sensitivity_matrix(&spec, &eq, &y).unwrap();
        assert!((s.dx_dy[(0, 0)] - 0.5).abs() < 1e-12);
        assert!(s.dx_dy.row(1).amax() < 1e-15);
        assert!(s.tangency_residual() < 1e-15);
        assert!(s.m_min_eig() >= -1e-12);
        assert_eq!(s.cq.rows, vec![ConstraintRow::Equality(0)]);
    }

    #[test]
    fn oracle_zero_direction() {
        let spec = fj(false);
        let y = Vector::from_vec(vec![1.0, 0.0]);
        let d = finite_difference_oracle(&spec, &y, &Vector::zeros(2), 1e-4, &SolverConfig::default()).unwrap();
        assert_eq!(d, Vector::zeros(2));
    }

    #[test]
    fn degenerate_bound_is_refused() {
        // Unconstrained optimum of player 1 sits exactly on x ≤ 0, so the
        // bound is active with a zero multiplier.
        let p = mat_from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let mut sets = vec![PolyhedralSet::unconstrained(1); 2];
        sets[0] = PolyhedralSet::new(
            Mat::identity(1, 1),
            Vector::zeros(1),
            Mat::zeros(0, 1),
            Vector::zeros(0),
        )
        .unwrap();
        let spec = GameSpec::new(
            Network::new(p).unwrap(),
            sets,
            Arc::new(FriedkinJohnsenCost::new(2, 1.0)),
        )
        .unwrap();
        let y = Vector::zeros(2);
        let eq = solver::solve_nash(&spec, &y, &SolverConfig::default()).unwrap();
        let Err(Error::CqViolation(report)) = sensitivity_matrix(&spec, &eq, &y) else {
            panic!("expected refusal")
        };
        assert!(report.full_row_rank);
        assert_eq!(report.offending_rows, vec![0]);
    }

    #[test]
    fn projected_inverse_single_pin_formula() {
        let l = mat_from_rows(2, 2, &[4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0]);
        let a = mat_from_rows(1, 2, &[0.0, 1.0]);
        let m = projected_inverse(&l, &a).unwrap();
        assert!((m[(0, 0)] - (l[(0, 0)] - l[(0, 1)] * l[(1, 0)] / l[(1, 1)])).abs() < 1e-15);
        assert!(m.row(1).amax() < 1e-15);
    }
}
