//! Network aggregative games: players on a weighted network, polyhedral
//! strategy sets and a parametric cost model.
//!
//! Player `i` minimizes `J^i(x^i, z^i(x), y)` over `X^i = {B^i x ≤ b^i, H^i x = h^i}`
//! where `z^i(x) = Σ_j P_ij x^j`. The game operator stacks the own-strategy
//! gradients; its Jacobian decomposes as `D + K (P ⊗ I_n)`.

mod cost;

use std::sync::Arc;

pub use cost::{
    CostModel, Curvature, FriedkinJohnsenCost, InteractionFn, LinearQuadraticBlock, LinearQuadraticCost,
    QuadraticShockCost,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::qp;

/// Interaction weights between players.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: Mat,
    allow_diagonal: bool,
}

impl Network {
    /// Standard network: square, zero diagonal.
    pub fn new(weights: Mat) -> Result<Self> {
        Self::build(weights, false)
    }

    /// Network whose diagonal may be nonzero (own strategy enters the
    /// aggregate, as in routing games where `z = Σ_j x^j`).
    pub fn with_diagonal(weights: Mat) -> Result<Self> {
        Self::build(weights, true)
    }

    /// `N × N` all-ones matrix, diagonal included.
    pub fn all_to_all(players: usize) -> Self {
        Self {
            weights: Mat::from_element(players, players, 1.0),
            allow_diagonal: true,
        }
    }

    fn build(weights: Mat, allow_diagonal: bool) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::dims("network (square)", weights.nrows(), weights.ncols()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("network weights must be finite".into()));
        }
        if !allow_diagonal {
            if let Some(i) = (0..weights.nrows()).find(|&i| weights[(i, i)] != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "P_ii = 0 required, found P[{i},{i}] = {}",
                    weights[(i, i)]
                )));
            }
        }
        Ok(Self {
            weights,
            allow_diagonal,
        })
    }

    pub fn players(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn allows_diagonal(&self) -> bool {
        self.allow_diagonal
    }

    pub fn has_nonzero_diagonal(&self) -> bool {
        (0..self.players()).any(|i| self.weights[(i, i)] != 0.0)
    }

    pub fn is_non_negative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        linalg::is_symmetric(&self.weights, 1e-14)
    }
}

/// `{x ∈ ℝ^n : B x ≤ b, H x = h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSet {
    pub ineq_matrix: Mat,
    pub ineq_rhs: Vector,
    pub eq_matrix: Mat,
    pub eq_rhs: Vector,
}

impl PolyhedralSet {
    pub fn new(ineq_matrix: Mat, ineq_rhs: Vector, eq_matrix: Mat, eq_rhs: Vector) -> Result<Self> {
        let n = ineq_matrix.ncols();
        if eq_matrix.ncols() != n {
            return Err(Error::dims("equality matrix columns", n, eq_matrix.ncols()));
        }
        if ineq_rhs.len() != ineq_matrix.nrows() {
            return Err(Error::dims(
                "inequality right-hand side",
                ineq_matrix.nrows(),
                ineq_rhs.len(),
            ));
        }
        if eq_rhs.len() != eq_matrix.nrows() {
            return Err(Error::dims("equality right-hand side", eq_matrix.nrows(), eq_rhs.len()));
        }
        let finite = ineq_matrix
            .iter()
            .chain(ineq_rhs.iter())
            .chain(eq_matrix.iter())
            .chain(eq_rhs.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("constraint data must be finite".into()));
        }
        Ok(Self {
            ineq_matrix,
            ineq_rhs,
            eq_matrix,
            eq_rhs,
        })
    }

    pub fn unconstrained(dim: usize) -> Self {
        Self {
            ineq_matrix: Mat::zeros(0, dim),
            ineq_rhs: Vector::zeros(0),
            eq_matrix: Mat::zeros(0, dim),
            eq_rhs: Vector::zeros(0),
        }
    }

    /// Only equalities `H x = h`.
    pub fn affine(eq_matrix: Mat, eq_rhs: Vector) -> Result<Self> {
        let n = eq_matrix.ncols();
        Self::new(Mat::zeros(0, n), Vector::zeros(0), eq_matrix, eq_rhs)
    }

    /// Box `lower ≤ x ≤ upper` (componentwise).
    pub fn bounds(lower: &Vector, upper: &Vector) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n {
            return Err(Error::dims("box upper bound", n, upper.len()));
        }
        let mut b = Mat::zeros(2 * n, n);
        let mut rhs = Vector::zeros(2 * n);
        for k in 0..n {
            b[(k, k)] = 1.0;
            rhs[k] = upper[k];
            b[(n + k, k)] = -1.0;
            rhs[n + k] = -lower[k];
        }
        Self::new(b, rhs, Mat::zeros(0, n), Vector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.ineq_matrix.ncols()
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn with_equality(mut self, row: &[f64], rhs: f64) -> Result<Self> {
        if row.len() != self.dim() {
            return Err(Error::dims("equality row", self.dim(), row.len()));
        }
        let k = self.eq_matrix.nrows();
        self.eq_matrix = self.eq_matrix.insert_row(k, 0.0);
        self.eq_matrix.row_mut(k).copy_from_slice(row);
        self.eq_rhs = self.eq_rhs.push(rhs);
        Ok(self)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let ineq_ok = (&self.ineq_matrix * x - &self.ineq_rhs).iter().all(|&s| s <= tol);
        let eq_ok = (&self.eq_matrix * x - &self.eq_rhs).iter().all(|&s| s.abs() <= tol);
        ineq_ok && eq_ok
    }

    /// A point with `B x < b` and `H x = h`, found by one projection per
    /// inequality onto the set tightened in that row; the average of those
    /// points is strictly feasible in every row.
    pub fn strictly_feasible_point(&self) -> Result<Vector> {
        let n = self.dim();
        let m = self.num_inequalities();
        if m == 0 {
            return qp::project(self, &Vector::zeros(n));
        }
        let mut sum = Vector::zeros(n);
        for k in 0..m {
            let mut tightened = self.clone();
            let margin = 1e-6 * (1.0 + self.ineq_rhs[k].abs());
            tightened.ineq_rhs[k] -= margin;
            let point = qp::project(&tightened, &Vector::zeros(n)).map_err(|err| match err {
                Error::Infeasible { certificate, .. } => Error::Infeasible {
                    context: format!("no strictly feasible point for inequality row {k}"),
                    certificate,
                },
                other => other,
            })?;
            sum += point;
        }
        Ok(sum / m as f64)
    }
}

/// Stacked strategy profile `x = [x^1; …; x^N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    data: Vector,
    dim: usize,
}

impl StrategyProfile {
    pub fn new(data: Vector, dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::dims("strategy profile length (multiple of n)", dim, data.len()));
        }
        Ok(Self { data, dim })
    }

    pub fn zeros(players: usize, dim: usize) -> Self {
        Self {
            data: Vector::zeros(players * dim),
            dim,
        }
    }

    pub fn players(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, i: usize) -> Vector {
        self.data.rows(i * self.dim, self.dim).into_owned()
    }

    pub fn set_block(&mut self, i: usize, v: &Vector) {
        self.data.rows_mut(i * self.dim, self.dim).copy_from(v);
    }

    pub fn as_vector(&self) -> &Vector {
        &self.data
    }

    pub fn into_vector(self) -> Vector {
        self.data
    }
}

/// A game `G(y)`: network, per-player strategy sets and a cost model.
#[derive(Debug, Clone)]
pub struct GameSpec {
    network: Network,
    sets: Vec<PolyhedralSet>,
    cost: Arc<dyn CostModel>,
}

impl GameSpec {
    pub fn new(network: Network, sets: Vec<PolyhedralSet>, cost: Arc<dyn CostModel>) -> Result<Self> {
        let players = network.players();
        if sets.len() != players {
            return Err(Error::dims("strategy sets", players, sets.len()));
        }
        let n = cost.strategy_dim();
        if n == 0 {
            return Err(Error::InvalidArgument("strategy dimension must be positive".into()));
        }
        for set in &sets {
            if set.dim() != n {
                return Err(Error::dims("strategy set dimension", n, set.dim()));
            }
        }
        Ok(Self { network, sets, cost })
    }

    /// Game where every player is unconstrained.
    pub fn unconstrained(network: Network, cost: Arc<dyn CostModel>) -> Result<Self> {
        let n = cost.strategy_dim();
        let sets = vec![PolyhedralSet::unconstrained(n); network.players()];
        Self::new(network, sets, cost)
    }

    pub fn players(&self) -> usize {
        self.network.players()
    }

    pub fn strategy_dim(&self) -> usize {
        self.cost.strategy_dim()
    }

    pub fn total_dim(&self) -> usize {
        self.players() * self.strategy_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.cost.param_dim()
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn sets(&self) -> &[PolyhedralSet] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &PolyhedralSet {
        &self.sets[i]
    }

    pub fn cost_model(&self) -> &Arc<dyn CostModel> {
        &self.cost
    }

    pub fn with_sets(&self, sets: Vec<PolyhedralSet>) -> Result<Self> {
        Self::new(self.network.clone(), sets, self.cost.clone())
    }

    /// Block-diagonal `B`, `b` over all players.
    pub fn stacked_inequalities(&self) -> (Mat, Vector) {
        stack(self.sets.iter().map(|s| (&s.ineq_matrix, &s.ineq_rhs)))
    }

    /// Block-diagonal `H`, `h` over all players.
    pub fn stacked_equalities(&self) -> (Mat, Vector) {
        stack(self.sets.iter().map(|s| (&s.eq_matrix, &s.eq_rhs)))
    }

    pub fn num_inequalities(&self) -> usize {
        self.sets.iter().map(|s| s.num_inequalities()).sum()
    }

    pub fn num_equalities(&self) -> usize {
        self.sets.iter().map(|s| s.num_equalities()).sum()
    }

    /// Maps a global inequality row to `(player, local row)`.
    pub fn inequality_owner(&self, row: usize) -> Option<(usize, usize)> {
        owner(self.sets.iter().map(|s| s.num_inequalities()), row)
    }

    pub fn equality_owner(&self, row: usize) -> Option<(usize, usize)> {
        owner(self.sets.iter().map(|s| s.num_equalities()), row)
    }

    fn check_profile(&self, x: &Vector) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(Error::dims("strategy profile", self.total_dim(), x.len()));
        }
        Ok(())
    }

    fn check_params(&self, y: &Vector) -> Result<()> {
        if y.len() != self.param_dim() {
            return Err(Error::dims("parameter vector", self.param_dim(), y.len()));
        }
        Ok(())
    }

    fn own(&self, x: &Vector, i: usize) -> Vector {
        let n = self.strategy_dim();
        x.rows(i * n, n).into_owned()
    }

    /// Cost of player `i` at profile `x`.
    pub fn player_cost(&self, i: usize, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_profile(x)?;
        self.check_params(y)?;
        let agg = aggregate_unchecked(self, i, x);
        let value = self.cost.cost(i, &self.own(x, i), &agg, y);
        if !value.is_finite() {
            return Err(Error::ModelViolation {
                player: i,
                reason: "non-finite cost".into(),
            });
        }
        Ok(value)
    }

    /// Hessian of `x^i ↦ J^i(x^i, z^i(x), y)`, including the own-strategy
    /// contribution through the aggregate when `P_ii ≠ 0`.
    pub fn player_hessian(&self, i: usize, x: &Vector, y: &Vector) -> Result<Mat> {
        self.check_profile(x)?;
        self.check_params(y)?;
        let own = self.own(x, i);
        let agg = aggregate_unchecked(self, i, x);
        let mut h = self.cost.hessian(i, &own, &agg, y);
        let pii = self.network.weights()[(i, i)];
        if pii != 0.0 {
            h += self.cost.cross_jacobian(i, &own, &agg, y) * pii;
        }
        Ok(h)
    }
}

fn stack<'a>(blocks: impl Iterator<Item = (&'a Mat, &'a Vector)>) -> (Mat, Vector) {
    let blocks: Vec<_> = blocks.collect();
    let mats: Vec<Mat> = blocks.iter().map(|(m, _)| (*m).clone()).collect();
    let rhs: Vec<f64> = blocks.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    (linalg::block_diag(&mats), Vector::from_vec(rhs))
}

fn owner(counts: impl Iterator<Item = usize>, row: usize) -> Option<(usize, usize)> {
    let mut start = 0;
    for (player, count) in counts.enumerate() {
        if row < start + count {
            return Some((player, row - start));
        }
        start += count;
    }
    None
}

fn aggregate_unchecked(spec: &GameSpec, i: usize, x: &Vector) -> Vector {
    let n = spec.strategy_dim();
    let p = spec.network.weights();
    let mut z = Vector::zeros(n);
    for j in 0..spec.players() {
        let w = p[(i, j)];
        if w != 0.0 {
            z.axpy(w, &x.rows(j * n, n), 1.0);
        }
    }
    z
}

/// `z^i(x) = Σ_j P_ij x^j`.
pub fn aggregate(spec: &GameSpec, i: usize, x: &StrategyProfile) -> Result<Vector> {
    if i >= spec.players() {
        return Err(Error::InvalidArgument(format!(
            "player index {i} out of range for {} players",
            spec.players()
        )));
    }
    if x.dim() != spec.strategy_dim() {
        return Err(Error::dims("strategy block dimension", spec.strategy_dim(), x.dim()));
    }
    spec.check_profile(x.as_vector())?;
    Ok(aggregate_unchecked(spec, i, x.as_vector()))
}

/// `F(x, y) = [∇_{x^i} J^i(x^i, z^i(x), y)]_i`.
pub fn game_operator(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<Vector> {
    spec.check_profile(x)?;
    spec.check_params(y)?;
    let n = spec.strategy_dim();
    let mut out = Vector::zeros(spec.total_dim());
    for i in 0..spec.players() {
        let agg = aggregate_unchecked(spec, i, x);
        let g = spec.cost.gradient(i, &spec.own(x, i), &agg, y);
        if g.len() != n {
            return Err(Error::ModelViolation {
                player: i,
                reason: format!("gradient has length {}, expected {n}", g.len()),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelViolation {
                player: i,
                reason: "non-finite gradient".into(),
            });
        }
        out.rows_mut(i * n, n).copy_from(&g);
    }
    Ok(out)
}

/// `∇_x F = D + K (P ⊗ I_n)` with `D`, `K` block diagonal.
///
/// Fails with a model violation if a player's Hessian is not symmetric
/// positive definite.
pub fn operator_jacobian(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<Mat> {
    spec.check_profile(x)?;
    spec.check_params(y)?;
    let n = spec.strategy_dim();
    let players = spec.players();
    let p = spec.network.weights();
    let mut out = Mat::zeros(spec.total_dim(), spec.total_dim());
    for i in 0..players {
        let own = spec.own(x, i);
        let agg = aggregate_unchecked(spec, i, x);
        let d = spec.cost.hessian(i, &own, &agg, y);
        let k = spec.cost.cross_jacobian(i, &own, &agg, y);
        let full = if p[(i, i)] != 0.0 {
            &d + &k * p[(i, i)]
        } else {
            d.clone()
        };
        check_spd(i, &full)?;
        out.view_mut((i * n, i * n), (n, n)).copy_from(&d);
        for j in 0..players {
            let w = p[(i, j)];
            if w != 0.0 {
                let mut block = out.view_mut((i * n, j * n), (n, n));
                block += &k * w;
            }
        }
    }
    Ok(out)
}

fn check_spd(player: usize, h: &Mat) -> Result<()> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelViolation {
            player,
            reason: "non-finite Hessian".into(),
        });
    }
    if !linalg::is_symmetric(h, 1e-10) {
        return Err(Error::ModelViolation {
            player,
            reason: "Hessian is not symmetric".into(),
        });
    }
    let min = linalg::sym_min_eig(h);
    if min <= 0.0 {
        return Err(Error::ModelViolation {
            player,
            reason: format!("Hessian is not positive definite (λ_min = {min:e})"),
        });
    }
    Ok(())
}

/// `∇_y F(x, y)`, an `Nn × D` matrix.
pub fn parameter_jacobian(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<Mat> {
    spec.check_profile(x)?;
    spec.check_params(y)?;
    let n = spec.strategy_dim();
    let d = spec.param_dim();
    let mut out = Mat::zeros(spec.total_dim(), d);
    for i in 0..spec.players() {
        let agg = aggregate_unchecked(spec, i, x);
        let block = spec.cost.param_jacobian(i, &spec.own(x, i), &agg, y);
        if block.shape() != (n, d) {
            return Err(Error::ModelViolation {
                player: i,
                reason: format!("parameter Jacobian has shape {:?}, expected ({n}, {d})", block.shape()),
            });
        }
        out.view_mut((i * n, 0), (n, d)).copy_from(&block);
    }
    Ok(out)
}

/// Smallest eigenvalue over all players' Hessians at `x`.
pub fn min_hessian_eigenvalue(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<f64> {
    let mut min = f64::INFINITY;
    for i in 0..spec.players() {
        min = min.min(linalg::sym_min_eig(&spec.player_hessian(i, x, y)?));
    }
    Ok(min)
}
