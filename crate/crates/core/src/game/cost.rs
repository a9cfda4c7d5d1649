//! Parametric cost models with analytic derivatives.
//!
//! Every model works on the operator block `g_i(x^i, z^i, y)`: the gradient of
//! player `i`'s cost in its own strategy. `hessian` is the derivative of that
//! block in `x^i` with the aggregate held fixed and `cross_jacobian` the
//! derivative in `z^i`. For zero-diagonal networks the former is the usual
//! Hessian of `J^i`.

use std::fmt;

use crate::linalg::{Mat, Vector};

/// Whether second derivatives depend on the strategy profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    /// Hessian and cross-Jacobian do not depend on `x` (affine operator).
    Constant,
    Varying,
}

pub trait CostModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Strategy dimension `n`, shared by all players.
    fn strategy_dim(&self) -> usize;

    /// Length `D` of the stacked parameter vector `y`.
    fn param_dim(&self) -> usize;

    fn cost(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> f64;

    fn gradient(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Vector;

    fn hessian(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat;

    fn cross_jacobian(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat;

    /// `∂g_i/∂y`, an `n × D` block over the whole stacked parameter vector.
    fn param_jacobian(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat;

    fn curvature(&self) -> Curvature;
}

/// Scalar interaction function `f` applied componentwise in quadratic shock
/// games. Always satisfies `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionFn {
    /// `f(w) = slope · w`.
    Linear { slope: f64 },
    /// `f(w) = gain · w / (1 + |w|)`, with `0 < f' <= gain`.
    Softsign { gain: f64 },
}

impl InteractionFn {
    pub fn value(&self, w: f64) -> f64 {
        match *self {
            InteractionFn::Linear { slope } => slope * w,
            InteractionFn::Softsign { gain } => gain * w / (1.0 + w.abs()),
        }
    }

    pub fn derivative(&self, w: f64) -> f64 {
        match *self {
            InteractionFn::Linear { slope } => slope,
            InteractionFn::Softsign { gain } => {
                let d = 1.0 + w.abs();
                gain / (d * d)
            }
        }
    }

    /// `f'(0)`.
    pub fn slope_at_origin(&self) -> f64 {
        self.derivative(0.0)
    }

    /// `sup_w |f'(w)|`.
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            InteractionFn::Linear { slope } => slope.abs(),
            InteractionFn::Softsign { gain } => gain.abs(),
        }
    }

    fn curvature(&self) -> Curvature {
        match self {
            InteractionFn::Linear { .. } => Curvature::Constant,
            InteractionFn::Softsign { .. } => Curvature::Varying,
        }
    }
}

/// `J^i = ½‖x^i‖² − f(z^i + y^i)ᵀ x^i`, one `n`-dimensional shock per player.
#[derive(Debug, Clone)]
pub struct QuadraticShockCost {
    players: usize,
    dim: usize,
    f: InteractionFn,
}

impl QuadraticShockCost {
    pub fn new(players: usize, dim: usize, f: InteractionFn) -> Self {
        Self { players, dim, f }
    }

    pub fn interaction(&self) -> InteractionFn {
        self.f
    }

    fn shifted(&self, player: usize, agg: &Vector, y: &Vector) -> Vector {
        let shock = y.rows(player * self.dim, self.dim);
        agg + shock
    }
}

impl CostModel for QuadraticShockCost {
    fn name(&self) -> &'static str {
        "quadratic_shock"
    }

    fn strategy_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.players * self.dim
    }

    fn cost(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> f64 {
        let w = self.shifted(player, agg, y).map(|v| self.f.value(v));
        0.5 * own.norm_squared() - w.dot(own)
    }

    fn gradient(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Vector {
        own - self.shifted(player, agg, y).map(|v| self.f.value(v))
    }

    fn hessian(&self, _: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        Mat::identity(self.dim, self.dim)
    }

    fn cross_jacobian(&self, player: usize, _: &Vector, agg: &Vector, y: &Vector) -> Mat {
        let d = self.shifted(player, agg, y).map(|v| -self.f.derivative(v));
        Mat::from_diagonal(&d)
    }

    fn param_jacobian(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat {
        let mut out = Mat::zeros(self.dim, self.param_dim());
        let cross = self.cross_jacobian(player, own, agg, y);
        out.view_mut((0, player * self.dim), (self.dim, self.dim))
            .copy_from(&cross);
        out
    }

    fn curvature(&self) -> Curvature {
        self.f.curvature()
    }
}

/// Normalized Friedkin–Johnsen opinion cost
/// `J^i = ½‖x^i‖² − (z^i + ỹ^i)ᵀ x^i / (1 + θ)`, parameter `ỹ = θ·y`.
///
/// Operator: `F(x, ỹ) = (I − P/(1+θ)) x − ỹ/(1+θ)`.
#[derive(Debug, Clone)]
pub struct FriedkinJohnsenCost {
    players: usize,
    dim: usize,
    theta: f64,
}

impl FriedkinJohnsenCost {
    pub fn new(players: usize, theta: f64) -> Self {
        Self::with_dim(players, 1, theta)
    }

    pub fn with_dim(players: usize, dim: usize, theta: f64) -> Self {
        Self { players, dim, theta }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn coupling(&self) -> f64 {
        1.0 / (1.0 + self.theta)
    }
}

impl CostModel for FriedkinJohnsenCost {
    fn name(&self) -> &'static str {
        "friedkin_johnsen"
    }

    fn strategy_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.players * self.dim
    }

    fn cost(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> f64 {
        let shock = y.rows(player * self.dim, self.dim);
        0.5 * own.norm_squared() - self.coupling() * (agg + shock).dot(own)
    }

    fn gradient(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Vector {
        let shock = y.rows(player * self.dim, self.dim);
        own - (agg + shock) * self.coupling()
    }

    fn hessian(&self, _: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        Mat::identity(self.dim, self.dim)
    }

    fn cross_jacobian(&self, _: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        Mat::identity(self.dim, self.dim) * -self.coupling()
    }

    fn param_jacobian(&self, player: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        let mut out = Mat::zeros(self.dim, self.param_dim());
        for k in 0..self.dim {
            out[(k, player * self.dim + k)] = -self.coupling();
        }
        out
    }

    fn curvature(&self) -> Curvature {
        Curvature::Constant
    }
}

/// Per-player linear–quadratic block used by [`LinearQuadraticCost`].
#[derive(Debug, Clone)]
pub struct LinearQuadraticBlock {
    /// Symmetric positive definite `n × n`.
    pub hessian: Mat,
    /// `n × n` coupling to the aggregate.
    pub cross: Mat,
    /// `n × d_i` parameter loading.
    pub loading: Mat,
    pub linear: Vector,
}

/// `J^i = ½ xᵀQ_i x + xᵀK_i z + r_iᵀx − xᵀS_i y^i` with per-player parameter
/// blocks `y^i ∈ ℝ^{d_i}` stacked in player order.
#[derive(Debug, Clone)]
pub struct LinearQuadraticCost {
    dim: usize,
    blocks: Vec<LinearQuadraticBlock>,
    offsets: Vec<usize>,
    total_params: usize,
}

impl LinearQuadraticCost {
    pub fn new(blocks: Vec<LinearQuadraticBlock>) -> crate::Result<Self> {
        let dim = blocks.first().map_or(0, |b| b.hessian.nrows());
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for b in &blocks {
            if b.hessian.shape() != (dim, dim) {
                return Err(crate::Error::dims("LQ hessian rows", dim, b.hessian.nrows()));
            }
            if b.cross.shape() != (dim, dim) {
                return Err(crate::Error::dims("LQ cross rows", dim, b.cross.nrows()));
            }
            if b.loading.nrows() != dim {
                return Err(crate::Error::dims("LQ loading rows", dim, b.loading.nrows()));
            }
            if b.linear.len() != dim {
                return Err(crate::Error::dims("LQ linear term", dim, b.linear.len()));
            }
            offsets.push(total);
            total += b.loading.ncols();
        }
        Ok(Self {
            dim,
            blocks,
            offsets,
            total_params: total,
        })
    }

    pub fn blocks(&self) -> &[LinearQuadraticBlock] {
        &self.blocks
    }

    /// Offset of player `i`'s parameters inside the stacked vector.
    pub fn param_offset(&self, player: usize) -> usize {
        self.offsets[player]
    }

    fn own_params<'a>(&self, player: usize, y: &'a Vector) -> nalgebra::DVectorView<'a, f64> {
        y.rows(self.offsets[player], self.blocks[player].loading.ncols())
    }
}

impl CostModel for LinearQuadraticCost {
    fn name(&self) -> &'static str {
        "linear_quadratic"
    }

    fn strategy_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.total_params
    }

    fn cost(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> f64 {
        let b = &self.blocks[player];
        let shock = &b.loading * self.own_params(player, y);
        0.5 * own.dot(&(&b.hessian * own)) + own.dot(&(&b.cross * agg)) + b.linear.dot(own) - own.dot(&shock)
    }

    fn gradient(&self, player: usize, own: &Vector, agg: &Vector, y: &Vector) -> Vector {
        let b = &self.blocks[player];
        let shock = &b.loading * self.own_params(player, y);
        &b.hessian * own + &b.cross * agg + &b.linear - shock
    }

    fn hessian(&self, player: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        self.blocks[player].hessian.clone()
    }

    fn cross_jacobian(&self, player: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        self.blocks[player].cross.clone()
    }

    fn param_jacobian(&self, player: usize, _: &Vector, _: &Vector, _: &Vector) -> Mat {
        let b = &self.blocks[player];
        let mut out = Mat::zeros(self.dim, self.total_params);
        out.view_mut((0, self.offsets[player]), b.loading.shape())
            .copy_from(&(-&b.loading));
        out
    }

    fn curvature(&self) -> Curvature {
        Curvature::Constant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, at: f64) -> f64 {
        let h = 1e-6;
        (f(at + h) - f(at - h)) / (2.0 * h)
    }

    #[test]
    fn softsign_derivative_matches_finite_difference() {
        let f = InteractionFn::Softsign { gain: 0.7 };
        for &w in &[0.1, 0.5, 2.0, -1.5] {
            let fd = central_diff(|v| f.value(v), w);
            assert!((fd - f.derivative(w)).abs() < 1e-8, "w={w}");
        }
        assert_eq!(f.value(0.0), 0.0);
        assert_eq!(f.slope_at_origin(), 0.7);
    }

    #[test]
    fn fj_gradient_closed_form() {
        let cost = FriedkinJohnsenCost::new(2, 1.0);
        let y = Vector::from_vec(vec![1.0, 0.0]);
        let g = cost.gradient(0, &Vector::zeros(1), &Vector::zeros(1), &y);
        assert!((g[0] + 0.5).abs() < 1e-15);
    }
}
