//! Nash equilibria as solutions of `VI(X, F(·, y))` by forward–backward
//! (projected gradient) iteration, plus KKT multiplier recovery.

use crate::error::{Error, Result};
use crate::game::{self, GameSpec};
use crate::linalg::{self, Mat, Vector};
use crate::qp;

/// How the projected-gradient step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `τ = 1/ℓ` from the scaled Jacobian norm at the start point, halved
    /// whenever the residual blows up.
    Auto,
    /// Constant user step; divergence is an error.
    Fixed(f64),
    /// `τ = α/ℓ²` from a strong monotonicity constant `α`: the iteration is
    /// then a contraction and residuals never increase.
    Certified { alpha: f64 },
}

/// Norm in which the projection is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// Diagonal of the player Hessians at the start point.
    HessianDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step: StepRule,
    pub metric: Metric,
    pub tol_res: f64,
    pub max_iter: usize,
    pub eps_active: f64,
    pub eps_strict: f64,
    pub initial: Option<Vector>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: StepRule::Auto,
            metric: Metric::HessianDiagonal,
            tol_res: 1e-9,
            max_iter: 200_000,
            eps_active: 1e-7,
            eps_strict: 1e-7,
            initial: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        match self.step {
            StepRule::Fixed(t) if !(t > 0.0 && t.is_finite()) => errors.push(format!("step must be positive, got {t}")),
            StepRule::Certified { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                errors.push(format!("certified alpha must be positive, got {alpha}"))
            }
            _ => {}
        }
        for (name, v) in [
            ("tol_res", self.tol_res),
            ("eps_active", self.eps_active),
            ("eps_strict", self.eps_strict),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("{name} must be positive, got {v}"));
            }
        }
        if self.eps_strict < self.tol_res {
            errors.push(format!(
                "eps_strict ({}) must be at least tol_res ({})",
                self.eps_strict, self.tol_res
            ));
        }
        if self.max_iter == 0 {
            errors.push("max_iter must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_res = tol;
        self.eps_strict = self.eps_strict.max(tol);
        self
    }

    pub fn with_initial(mut self, x: Vector) -> Self {
        self.initial = Some(x);
        self
    }
}

/// Inequality multipliers `λ` (one per stacked row of `B`), equality
/// multipliers `μ` and the stationarity residual `‖F + Bᵀλ + Hᵀμ‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: Vector,
    pub mu: Vector,
    pub stationarity: f64,
    /// False when some player's active-constraint rows are rank deficient.
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub x_star: Vector,
    pub lambda: Vector,
    pub mu: Vector,
    /// Natural-map residual `‖x − Π_X(x − F(x, y))‖`.
    pub residual: f64,
    pub iterations: usize,
    /// Global rows of `B` with `B_k x* ≥ b_k − eps_active`.
    pub active_indices: Vec<usize>,
    pub stationarity: f64,
    pub multipliers_unique: bool,
    pub step: f64,
    /// Smallest player-Hessian eigenvalue seen at the start point and at `x*`.
    pub min_hessian_eig: f64,
    pub eps_active: f64,
    pub eps_strict: f64,
}

impl EquilibriumResult {
    /// Largest `|λ_k (B_k x* − b_k)|`.
    pub fn complementarity_gap(&self, spec: &GameSpec) -> f64 {
        let (b, rhs) = spec.stacked_inequalities();
        let slack = b * &self.x_star - rhs;
        slack
            .iter()
            .zip(self.lambda.iter())
            .fold(0.0, |m, (s, l)| m.max((s * l).abs()))
    }
}

/// Projects each player's block onto its strategy set.
pub fn project_profile(spec: &GameSpec, x: &Vector, weights: &Vector) -> Result<Vector> {
    let n = spec.strategy_dim();
    let mut out = Vector::zeros(x.len());
    for i in 0..spec.players() {
        let v = x.rows(i * n, n).into_owned();
        let w = weights.rows(i * n, n).into_owned();
        let p = qp::project_weighted(spec.set(i), &v, &w).map_err(|err| match err {
            Error::Infeasible { certificate, .. } => Error::Infeasible {
                context: format!("strategy set of player {i}"),
                certificate,
            },
            other => other,
        })?;
        out.rows_mut(i * n, n).copy_from(&p);
    }
    Ok(out)
}

/// `‖x − Π_X(x − F(x, y))‖₂`.
pub fn natural_residual(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<f64> {
    let f = game::game_operator(spec, x, y)?;
    let ones = Vector::from_element(x.len(), 1.0);
    let p = project_profile(spec, &(x - f), &ones)?;
    Ok((x - p).norm())
}

fn metric_weights(spec: &GameSpec, x: &Vector, y: &Vector, metric: Metric) -> Result<Vector> {
    let total = spec.total_dim();
    match metric {
        Metric::Euclidean => Ok(Vector::from_element(total, 1.0)),
        Metric::HessianDiagonal => {
            let n = spec.strategy_dim();
            let mut w = Vector::zeros(total);
            for i in 0..spec.players() {
                let h = spec.player_hessian(i, x, y)?;
                for k in 0..n {
                    w[i * n + k] = h[(k, k)];
                }
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::ModelViolation {
                    player: 0,
                    reason: "non-positive Hessian diagonal".into(),
                });
            }
            Ok(w)
        }
    }
}

/// Scaled Jacobian `W^{-1/2} J W^{-1/2}`.
fn scaled_jacobian(j: &Mat, weights: &Vector) -> Mat {
    let s = weights.map(|w| 1.0 / w.sqrt());
    Mat::from_fn(j.nrows(), j.ncols(), |r, c| s[r] * j[(r, c)] * s[c])
}

/// Computes the Nash equilibrium of `G(y)`.
pub fn solve_nash(spec: &GameSpec, y: &Vector, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    cfg.validate()?;
    let total = spec.total_dim();
    if y.len() != spec.param_dim() {
        return Err(Error::dims("parameter vector", spec.param_dim(), y.len()));
    }
    let start = match &cfg.initial {
        Some(x0) if x0.len() != total => return Err(Error::dims("initial point", total, x0.len())),
        Some(x0) => x0.clone(),
        None => Vector::zeros(total),
    };

    let unit = Vector::from_element(total, 1.0);
    let mut x = project_profile(spec, &start, &unit)?;
    let weights = metric_weights(spec, &x, y, cfg.metric)?;
    let jac = game::operator_jacobian(spec, &x, y)?;
    let mut min_hessian_eig = game::min_hessian_eigenvalue(spec, &x, y)?;
    let scaled = scaled_jacobian(&jac, &weights);
    let lipschitz = linalg::spectral_norm(&scaled).max(f64::MIN_POSITIVE);
    let mut tau = match cfg.step {
        StepRule::Auto => 1.0 / lipschitz,
        StepRule::Fixed(t) => t,
        StepRule::Certified { alpha } => {
            // α is stated in the Euclidean metric; convert to the scaled one.
            let wmax = weights.max();
            (alpha / wmax) / (lipschitz * lipschitz)
        }
    };

    let winv = weights.map(|w| 1.0 / w);
    let mut best_x = x.clone();
    let mut best_res = f64::INFINITY;
    let mut first_res: Option<f64> = None;
    let mut target = cfg.tol_res;
    let mut iterations = 0;
    let mut halvings = 0;

    loop {
        if iterations >= cfg.max_iter {
            let residual = natural_residual(spec, &best_x, y)?;
            return Err(Error::NonConvergence { iterations, residual });
        }
        iterations += 1;
        let f = game::game_operator(spec, &x, y)?;
        let trial = &x - f.component_mul(&winv) * tau;
        let next = project_profile(spec, &trial, &weights)?;
        let step = (&x - &next).component_mul(&weights);
        let res = step.norm() / tau;
        if !res.is_finite() {
            return Err(Error::StepTooLarge {
                step: tau,
                residual: res,
            });
        }
        let reference = *first_res.get_or_insert(res.max(f64::MIN_POSITIVE));

        if res < best_res {
            best_res = res;
            best_x = x.clone();
        }
        let blown_up = res > 1e6 * reference;
        let backtrack = matches!(cfg.step, StepRule::Auto) && res > 10.0 * best_res;
        if blown_up && !matches!(cfg.step, StepRule::Auto) {
            return Err(Error::StepTooLarge {
                step: tau,
                residual: res,
            });
        }
        if blown_up || backtrack {
            halvings += 1;
            if halvings > 60 {
                return Err(Error::StepTooLarge {
                    step: tau,
                    residual: res,
                });
            }
            tau *= 0.5;
            x = best_x.clone();
            best_res = f64::INFINITY;
            continue;
        }

        if res <= target {
            let natural = natural_residual(spec, &x, y)?;
            if natural <= cfg.tol_res {
                min_hessian_eig = min_hessian_eig.min(game::min_hessian_eigenvalue(spec, &x, y)?);
                return finalize(spec, x, y, cfg, natural, iterations, tau, min_hessian_eig);
            }
            target *= 0.1;
            if target < 1e-3 * f64::EPSILON {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: natural,
                });
            }
        }
        x = next;
    }
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    spec: &GameSpec,
    x: Vector,
    y: &Vector,
    cfg: &SolverConfig,
    residual: f64,
    iterations: usize,
    step: f64,
    min_hessian_eig: f64,
) -> Result<EquilibriumResult> {
    let active = active_inequalities(spec, &x, cfg.eps_active);
    let mult = recover_multipliers(spec, &x, y, &active)?;
    Ok(EquilibriumResult {
        x_star: x,
        lambda: mult.lambda,
        mu: mult.mu,
        residual,
        iterations,
        active_indices: active,
        stationarity: mult.stationarity,
        multipliers_unique: mult.unique,
        step,
        min_hessian_eig,
        eps_active: cfg.eps_active,
        eps_strict: cfg.eps_strict,
    })
}

/// Global inequality rows with `B_k x ≥ b_k − eps_active`.
pub fn active_inequalities(spec: &GameSpec, x: &Vector, eps_active: f64) -> Vec<usize> {
    let (b, rhs) = spec.stacked_inequalities();
    let slack = b * x - rhs;
    slack
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= -eps_active)
        .map(|(k, _)| k)
        .collect()
}

/// Least-squares multipliers for `F(x*, y) + Bᵀλ + Hᵀμ = 0` restricted to the
/// given active inequalities and all equalities. Solved player by player
/// since the constraint matrices are block diagonal.
pub fn recover_multipliers(
    spec: &GameSpec,
    x_star: &Vector,
    y: &Vector,
    active_indices: &[usize],
) -> Result<Multipliers> {
    let f = game::game_operator(spec, x_star, y)?;
    let n = spec.strategy_dim();
    let mut lambda = Vector::zeros(spec.num_inequalities());
    let mut mu = Vector::zeros(spec.num_equalities());
    let mut residual_sq = 0.0;
    let mut unique = true;
    let mut ineq_offset = 0;
    let mut eq_offset = 0;
    for i in 0..spec.players() {
        let set = spec.set(i);
        let local_active: Vec<usize> = active_indices
            .iter()
            .filter_map(|&k| k.checked_sub(ineq_offset).filter(|&l| l < set.num_inequalities()))
            .collect();
        let q = local_active.len() + set.num_equalities();
        let fi = f.rows(i * n, n).into_owned();
        if q == 0 {
            residual_sq += fi.norm_squared();
        } else {
            let mut at = Mat::zeros(n, q);
            for (c, &l) in local_active.iter().enumerate() {
                at.set_column(c, &set.ineq_matrix.row(l).transpose());
            }
            for l in 0..set.num_equalities() {
                at.set_column(local_active.len() + l, &set.eq_matrix.row(l).transpose());
            }
            let eta = linalg::lstsq(&at, &(-&fi))?;
            residual_sq += (&fi + &at * &eta).norm_squared();
            if linalg::rank(&at) < q {
                unique = false;
            }
            for (c, &l) in local_active.iter().enumerate() {
                lambda[ineq_offset + l] = eta[c];
            }
            for l in 0..set.num_equalities() {
                mu[eq_offset + l] = eta[local_active.len() + l];
            }
        }
        ineq_offset += set.num_inequalities();
        eq_offset += set.num_equalities();
    }
    Ok(Multipliers {
        lambda,
        mu,
        stationarity: residual_sq.sqrt(),
        unique,
    })
}
