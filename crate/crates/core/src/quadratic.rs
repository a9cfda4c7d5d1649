//! Scalar quadratic network games `J^i = ½(x^i)² − f(z^i + y^i) x^i`:
//! Leontief matrix, Bonacich and key-player centralities, pinning
//! interventions and Friedkin–Johnsen opinion dynamics.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{GameSpec, InteractionFn, Network, PolyhedralSet, QuadraticShockCost};
use crate::linalg::{self, Mat, Vector};
use crate::sensitivity;
use crate::solver::{self, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGameSpec {
    p: Mat,
    f: InteractionFn,
    alpha_out: f64,
    y_mean: f64,
}

impl QuadraticGameSpec {
    /// Validates `P ≥ 0` with zero diagonal, `0 ≤ f' ≤ γ` and `γ‖P‖ < 1`.
    pub fn new(p: Mat, f: InteractionFn, alpha_out: f64, y_mean: f64) -> Result<Self> {
        let mut errors = Vec::new();
        if !p.is_square() {
            return Err(Error::dims("interaction matrix (square)", p.nrows(), p.ncols()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            errors.push("P must be finite".to_string());
        }
        if p.iter().any(|&v| v < 0.0) {
            errors.push("P must be non-negative".to_string());
        }
        if let Some(i) = (0..p.nrows()).find(|&i| p[(i, i)] != 0.0) {
            errors.push(format!("P_ii = 0 required, found P[{i},{i}] = {}", p[(i, i)]));
        }
        let slope = f.slope_at_origin();
        if !(slope >= 0.0) {
            errors.push(format!("f'(0) must be non-negative, got {slope}"));
        }
        let gamma = f.derivative_bound();
        let norm = linalg::spectral_norm(&p);
        if !(gamma * norm < 1.0) {
            errors.push(format!("γ‖P‖ < 1 required, got γ = {gamma}, ‖P‖ = {norm}"));
        }
        if !alpha_out.is_finite() || !y_mean.is_finite() {
            errors.push("alpha_out and y_mean must be finite".to_string());
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        Ok(Self {
            p,
            f,
            alpha_out,
            y_mean,
        })
    }

    pub fn linear(p: Mat, gamma: f64) -> Result<Self> {
        Self::new(p, InteractionFn::Linear { slope: gamma }, gamma, 1.0)
    }

    pub fn players(&self) -> usize {
        self.p.nrows()
    }

    pub fn weights(&self) -> &Mat {
        &self.p
    }

    pub fn interaction(&self) -> InteractionFn {
        self.f
    }

    pub fn gamma0(&self) -> f64 {
        self.f.slope_at_origin()
    }

    pub fn alpha_out(&self) -> f64 {
        self.alpha_out
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// The game with every player unconstrained.
    pub fn game(&self) -> Result<GameSpec> {
        self.pinned_game(&[])
    }

    /// The game with `x^k = 0` imposed for each `k` in `pinned`.
    pub fn pinned_game(&self, pinned: &[usize]) -> Result<GameSpec> {
        let n = self.players();
        let mut sets = vec![PolyhedralSet::unconstrained(1); n];
        for &k in pinned {
            if k >= n {
                return Err(Error::InvalidArgument(format!(
                    "pinned player {k} out of range for {n} players"
                )));
            }
            sets[k] = PolyhedralSet::affine(Mat::identity(1, 1), Vector::zeros(1))?;
        }
        let cost = QuadraticShockCost::new(n, 1, self.f);
        GameSpec::new(Network::new(self.p.clone())?, sets, Arc::new(cost))
    }
}

/// `L = (I − γ₀ P)⁻¹`.
pub fn leontief(p: &Mat, gamma0: f64) -> Result<Mat> {
    if !p.is_square() {
        return Err(Error::dims("interaction matrix (square)", p.nrows(), p.ncols()));
    }
    let norm = linalg::spectral_norm(p);
    if !(gamma0.abs() * norm < 1.0) {
        return Err(Error::Divergence(format!(
            "Leontief inverse needs |f'(0)|·‖P‖ < 1, got {}",
            gamma0.abs() * norm
        )));
    }
    let n = p.nrows();
    let a = Mat::identity(n, n) - p * gamma0;
    linalg::lu_solve(&a, &Mat::identity(n, n), "I − f'(0) P")
}

/// Column sums of `L`.
pub fn bonacich(l: &Mat) -> Vector {
    Vector::from_iterator(l.ncols(), l.column_iter().map(|c| c.sum()))
}

/// Entry `(i, k)` is `v^i_k = v^k L_ki / L_kk`.
pub fn blocked_centrality(l: &Mat) -> Mat {
    let v = bonacich(l);
    Mat::from_fn(l.nrows(), l.ncols(), |i, k| v[k] * l[(k, i)] / l[(k, k)])
}

/// `w^k = Σ_i v^i_k = (v^k / L_kk) Σ_i L_ki`.
pub fn keyplayer(l: &Mat) -> Vector {
    let v = bonacich(l);
    Vector::from_fn(l.nrows(), |k, _| v[k] / l[(k, k)] * l.row(k).sum())
}

/// `γ₀ [L − L Aᵀ (A L Aᵀ)⁻¹ A L]`; column `i` is `∇_{y^i} x*(0)`.
pub fn constrained_shock_sensitivity(l: &Mat, gamma0: f64, a: &Mat) -> Result<Mat> {
    if a.nrows() > 0 && linalg::rank(a) < a.nrows() {
        return Err(Error::Singular(format!(
            "pinning matrix has rank {} < {} rows",
            linalg::rank(a),
            a.nrows()
        )));
    }
    Ok(sensitivity::projected_inverse(l, a)? * gamma0)
}

/// Rows `e_kᵀ` for the pinned players.
pub fn pinning_matrix(players: usize, pinned: &[usize]) -> Result<Mat> {
    let mut a = Mat::zeros(pinned.len(), players);
    for (r, &k) in pinned.iter().enumerate() {
        if k >= players {
            return Err(Error::InvalidArgument(format!(
                "pinned player {k} out of range for {players} players"
            )));
        }
        a[(r, k)] = 1.0;
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityReport {
    pub l: Mat,
    pub v: Vector,
    pub w: Vector,
    pub v_blocked: Mat,
}

pub fn centrality_report(spec: &QuadraticGameSpec) -> Result<CentralityReport> {
    let l = leontief(&spec.p, spec.gamma0())?;
    Ok(CentralityReport {
        v: bonacich(&l),
        w: keyplayer(&l),
        v_blocked: blocked_centrality(&l),
        l,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetMode {
    /// Shock realization known.
    ExPost(Vector),
    /// Only the (positive) shock mean is known.
    ExAnte,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSelection {
    pub player: usize,
    /// More than one player attains the maximum.
    pub tie: bool,
    pub scores: Vector,
}

pub fn select_target(
    spec: &QuadraticGameSpec,
    report: &CentralityReport,
    mode: &TargetMode,
) -> Result<TargetSelection> {
    if !(spec.alpha_out > 0.0) {
        return Err(Error::UnsupportedRegime(format!(
            "target selection is implemented for alpha_out > 0, got {}",
            spec.alpha_out
        )));
    }
    let n = report.v.len();
    let scores = match mode {
        TargetMode::ExAnte => {
            if !(spec.y_mean >= 0.0) {
                return Err(Error::UnsupportedRegime(format!(
                    "target selection is implemented for non-negative shocks, got mean {}",
                    spec.y_mean
                )));
            }
            report.w.clone()
        }
        TargetMode::ExPost(y) => {
            if y.len() != n {
                return Err(Error::dims("shock realization", n, y.len()));
            }
            if let Some(i) = y.iter().position(|&v| !(v >= 0.0)) {
                return Err(Error::UnsupportedRegime(format!(
                    "target selection is implemented for non-negative shocks, y[{i}] = {}",
                    y[i]
                )));
            }
            // Σ_i v^i_k y^i for each k.
            Vector::from_fn(n, |k, _| (0..n).map(|i| report.v_blocked[(i, k)] * y[i]).sum())
        }
    };
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * best.abs().max(1.0);
    let winners: Vec<usize> = (0..n).filter(|&k| scores[k] >= best - tol).collect();
    Ok(TargetSelection {
        player: winners[0],
        tie: winners.len() > 1,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FjRun {
    pub x: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// `x_0 = y, x_1, …`, recorded only when requested.
    pub trajectory: Vec<Vector>,
}

pub fn check_row_stochastic(p: &Mat) -> Result<()> {
    let mut errors = Vec::new();
    if !p.is_square() {
        errors.push(format!("P must be square, got {}×{}", p.nrows(), p.ncols()));
    } else {
        if p.iter().any(|&v| !(v >= 0.0)) {
            errors.push("P must be non-negative".into());
        }
        for (i, row) in p.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > 1e-10 {
                errors.push(format!("row {i} of P sums to {s}, expected 1"));
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors))
    }
}

/// Iterates `x ← (P x + θ y) / (1 + θ)` from `x_0 = y` until successive
/// iterates differ by at most `tol` in the max norm.
pub fn fj_simulate(p: &Mat, theta: f64, y: &Vector, iters: usize, tol: f64, record: bool) -> Result<FjRun> {
    check_row_stochastic(p)?;
    let mut errors = Vec::new();
    if !(theta > 0.0 && theta.is_finite()) {
        errors.push(format!("θ must be positive, got {theta}"));
    }
    if y.len() != p.nrows() {
        errors.push(format!("y has length {}, expected {}", y.len(), p.nrows()));
    }
    if let Some(i) = y.iter().position(|v| !(0.0..=1.0).contains(v)) {
        errors.push(format!("y must lie in [0,1], y[{i}] = {}", y[i]));
    }
    if !(tol > 0.0) {
        errors.push(format!("tolerance must be positive, got {tol}"));
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    let scale = 1.0 / (1.0 + theta);
    let anchor = y * (theta * scale);
    let mut x = y.clone();
    let mut trajectory = Vec::new();
    if record {
        trajectory.push(x.clone());
    }
    for t in 1..=iters {
        let next = (p * &x) * scale + &anchor;
        let step = (&next - &x).amax();
        x = next;
        if record {
            trajectory.push(x.clone());
        }
        if step <= tol {
            return Ok(FjRun {
                x,
                iterations: t,
                converged: true,
                trajectory,
            });
        }
    }
    Ok(FjRun {
        x,
        iterations: iters,
        converged: false,
        trajectory,
    })
}

/// Quadratic game whose equilibrium is the Friedkin–Johnsen fixed point;
/// its shock vector is `θ y`.
pub fn fj_quadratic_spec(p: &Mat, theta: f64) -> Result<QuadraticGameSpec> {
    let slope = 1.0 / (1.0 + theta);
    QuadraticGameSpec::new(p.clone(), InteractionFn::Linear { slope }, slope, 1.0)
}

/// `s = Σ_j x^j`.
pub fn rumor_output(x_star: &Vector) -> f64 {
    x_star.sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RumorReport {
    pub pinned: usize,
    pub s_free: f64,
    pub s_pinned_exact: f64,
    /// `Σ_i f'(0) (v^i − v^i_k) y^i`.
    pub s_pinned_approx: f64,
    pub approx_gap: f64,
}

/// Exact spread with and without pinning `k`, next to the first-order
/// approximation from the blocked centralities.
pub fn rumor_pipeline(spec: &QuadraticGameSpec, y: &Vector, k: usize, cfg: &SolverConfig) -> Result<RumorReport> {
    let n = spec.players();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "pinned player {k} out of range for {n} players"
        )));
    }
    if y.len() != n {
        return Err(Error::dims("shock vector", n, y.len()));
    }
    let report = centrality_report(spec)?;
    let free = solver::solve_nash(&spec.game()?, y, cfg)?;
    let pinned = solver::solve_nash(&spec.pinned_game(&[k])?, y, cfg)?;
    let s_pinned_exact = rumor_output(&pinned.x_star);
    let s_pinned_approx = spec.gamma0()
        * (0..n)
            .map(|i| (report.v[i] - report.v_blocked[(i, k)]) * y[i])
            .sum::<f64>();
    Ok(RumorReport {
        pinned: k,
        s_free: rumor_output(&free.x_star),
        s_pinned_exact,
        s_pinned_approx,
        approx_gap: (s_pinned_exact - s_pinned_approx).abs(),
    })
}
