//! Strong-monotonicity certificates for the game operator.
//!
//! For zero-diagonal networks the operator Jacobian splits as
//! `D + K (P ⊗ I)`, which gives `α = κ₁ − κ₂ w(P)` with
//! `κ₁ = min λ_min(D)`, `κ₂ = max ‖K‖` and either `w(P) = |λ_min(P)|`
//! (symmetric `P`, cross-Jacobians `κ₂ I` with `κ₂ ≥ 0`) or `w(P) = ‖P‖`.
//! Networks with a nonzero diagonal (routing) are certified directly from
//! the symmetric part of `∇_x F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{self, Curvature, GameSpec, PolyhedralSet};
use crate::linalg::{self, Mat, Vector};
use crate::qp;

const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvaluationMode {
    /// Exact for models whose second derivatives do not depend on `x`.
    Analytic,
    /// Minimum/maximum over random points of `X` (intersected with the box
    /// when given). A heuristic, not a proof.
    Sampled {
        samples: usize,
        bounds: Option<(f64, f64)>,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    SymmetricScaledIdentity,
    NormBound,
    /// `λ_min` of the symmetric Jacobian part, for networks with a diagonal.
    DirectJacobian,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::SymmetricScaledIdentity => "symmetric_scaled_identity",
            Branch::NormBound => "norm_bound",
            Branch::DirectJacobian => "direct_jacobian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCertificate {
    pub kappa1: f64,
    pub kappa2: f64,
    pub w_p: f64,
    pub branch: Branch,
    pub alpha: f64,
    pub certified: bool,
    pub evaluation_mode: EvaluationMode,
    /// Smallest eigenvalue of `(∇_x F + ∇_x Fᵀ)/2` over the evaluated points.
    pub jacobian_min_eig: f64,
    /// True when the Jacobian check does not undercut `alpha` by more than 1e-8.
    pub consistent: bool,
    pub points: usize,
}

impl MonotonicityCertificate {
    pub fn heuristic(&self) -> bool {
        matches!(self.evaluation_mode, EvaluationMode::Sampled { .. })
    }
}

/// Strategy profiles at which curvature quantities are evaluated.
pub fn evaluation_points(spec: &GameSpec, mode: EvaluationMode) -> Result<Vec<Vector>> {
    match mode {
        EvaluationMode::Analytic => {
            if spec.cost_model().curvature() != Curvature::Constant {
                return Err(Error::Configuration(format!(
                    "analytic evaluation needs constant second derivatives; cost model '{}' requires sampled mode",
                    spec.cost_model().name()
                )));
            }
            Ok(vec![Vector::zeros(spec.total_dim())])
        }
        EvaluationMode::Sampled { samples, bounds, seed } => {
            if samples == 0 {
                return Err(Error::Configuration("sampled mode needs at least one sample".into()));
            }
            let n = spec.strategy_dim();
            let mut boxes = Vec::with_capacity(spec.players());
            for (i, set) in spec.sets().iter().enumerate() {
                let b = match bounds {
                    Some((lo, hi)) if lo < hi => vec![(lo, hi); n],
                    Some((lo, hi)) => return Err(Error::Configuration(format!("empty sampling box [{lo}, {hi}]"))),
                    None => bounding_box(set).ok_or_else(|| {
                        Error::Configuration(format!(
                            "strategy set of player {i} is unbounded; sampled mode needs a sampling box"
                        ))
                    })??,
                };
                boxes.push(b);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut points = Vec::with_capacity(samples);
            for _ in 0..samples {
                let mut x = Vector::zeros(spec.total_dim());
                for (i, set) in spec.sets().iter().enumerate() {
                    let raw = Vector::from_iterator(n, boxes[i].iter().map(|&(lo, hi)| rng.random_range(lo..hi)));
                    let p = qp::project(set, &raw)?;
                    x.rows_mut(i * n, n).copy_from(&p);
                }
                points.push(x);
            }
            Ok(points)
        }
    }
}

/// Coordinate ranges of a bounded polyhedron, `None` if unbounded. A set is
/// bounded iff the projection of `t·(±e_j)` stays put as `t` grows.
fn bounding_box(set: &PolyhedralSet) -> Option<Result<Vec<(f64, f64)>>> {
    let n = set.dim();
    let far = 1e7;
    let mut out = vec![(0.0, 0.0); n];
    for j in 0..n {
        for sign in [-1.0, 1.0] {
            let mut v = Vector::zeros(n);
            v[j] = sign * far;
            let a = match qp::project(set, &v) {
                Ok(a) => a,
                Err(e) => return Some(Err(e)),
            };
            v[j] *= 2.0;
            let b = match qp::project(set, &v) {
                Ok(b) => b,
                Err(e) => return Some(Err(e)),
            };
            if (&a - &b).amax() > 1e-6 * (1.0 + a.amax()) {
                return None;
            }
            if sign < 0.0 {
                out[j].0 = a[j];
            } else {
                out[j].1 = a[j];
            }
        }
        if out[j].1 <= out[j].0 {
            out[j].1 = out[j].0 + f64::EPSILON.max(out[j].0.abs() * f64::EPSILON);
        }
    }
    Some(Ok(out))
}

fn kappa1_at(spec: &GameSpec, points: &[Vector], y: &Vector) -> Result<f64> {
    let mut k = f64::INFINITY;
    for x in points {
        for i in 0..spec.players() {
            let h = spec.player_hessian(i, x, y)?;
            let min = linalg::sym_min_eig(&h);
            if !(min > 0.0) || !linalg::is_symmetric(&h, 1e-10) {
                return Err(Error::ModelViolation {
                    player: i,
                    reason: format!("Hessian is not symmetric positive definite (λ_min = {min:e})"),
                });
            }
            k = k.min(min);
        }
    }
    Ok(k)
}

fn kappa2_at(spec: &GameSpec, points: &[Vector], y: &Vector) -> Result<f64> {
    let mut k: f64 = 0.0;
    for x in points {
        for i in 0..spec.players() {
            k = k.max(linalg::spectral_norm(&cross_jacobian(spec, i, x, y)?));
        }
    }
    Ok(k)
}

fn cross_jacobian(spec: &GameSpec, i: usize, x: &Vector, y: &Vector) -> Result<Mat> {
    let n = spec.strategy_dim();
    let own = x.rows(i * n, n).into_owned();
    let profile = game::StrategyProfile::new(x.clone(), n)?;
    let agg = game::aggregate(spec, i, &profile)?;
    Ok(spec.cost_model().cross_jacobian(i, &own, &agg, y))
}

/// `min_i λ_min(∇²_{x^i} J^i)` over the evaluation points.
pub fn kappa1(spec: &GameSpec, y: &Vector, mode: EvaluationMode) -> Result<f64> {
    kappa1_at(spec, &evaluation_points(spec, mode)?, y)
}

/// `max_i ‖∇²_{x^i z^i} J^i‖` over the evaluation points.
pub fn kappa2(spec: &GameSpec, y: &Vector, mode: EvaluationMode) -> Result<f64> {
    kappa2_at(spec, &evaluation_points(spec, mode)?, y)
}

/// Network weight for the requested branch. The scaled-identity branch uses
/// `|λ_min(P)|` and requires symmetric `P`.
pub fn network_weight(p: &Mat, branch: Branch) -> Result<f64> {
    match branch {
        Branch::SymmetricScaledIdentity => {
            if !linalg::is_symmetric(p, 1e-14) {
                return Err(Error::CertificateRefused(
                    "the scaled-identity branch needs a symmetric network".into(),
                ));
            }
            let spectrum = linalg::symmetric_spectrum(p);
            let min = spectrum.first().copied().unwrap_or(0.0);
            Ok(min.min(0.0).abs())
        }
        Branch::NormBound | Branch::DirectJacobian => Ok(linalg::spectral_norm(p)),
    }
}

/// The common `c` with every cross-Jacobian equal to `c·I` at every point,
/// if there is one.
fn common_scaled_identity(spec: &GameSpec, points: &[Vector], y: &Vector) -> Result<Option<f64>> {
    let n = spec.strategy_dim();
    let mut common: Option<f64> = None;
    for x in points {
        for i in 0..spec.players() {
            let k = cross_jacobian(spec, i, x, y)?;
            let c = k[(0, 0)];
            let scale = c.abs().max(1.0);
            if (&k - Mat::identity(n, n) * c).amax() > IDENTITY_TOL * scale {
                return Ok(None);
            }
            match common {
                None => common = Some(c),
                Some(prev) if (prev - c).abs() > IDENTITY_TOL * scale => return Ok(None),
                _ => {}
            }
        }
    }
    Ok(common)
}

fn check_branch_one_inputs(p: &Mat) -> Result<()> {
    if p.iter().all(|&v| v == 0.0) || p.iter().any(|&v| v < 0.0) {
        return Ok(());
    }
    let trace = p.trace();
    let spectrum = linalg::symmetric_spectrum(p);
    let (lo, hi) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if trace != 0.0 || !(hi > 0.0) || !(lo < 0.0) {
        return Err(Error::CertificateRefused(format!(
            "non-negative symmetric network must have zero trace and eigenvalues of both signs (trace {trace}, λ ∈ [{lo}, {hi}])"
        )));
    }
    Ok(())
}

/// Certificate with the sharpest admissible branch.
pub fn certify(spec: &GameSpec, y: &Vector, mode: EvaluationMode) -> Result<MonotonicityCertificate> {
    certify_inner(spec, y, mode, None)
}

/// Certificate with a caller-chosen branch; refuses if the branch's
/// hypotheses do not hold.
pub fn certify_with_branch(
    spec: &GameSpec,
    y: &Vector,
    mode: EvaluationMode,
    branch: Branch,
) -> Result<MonotonicityCertificate> {
    certify_inner(spec, y, mode, Some(branch))
}

fn certify_inner(
    spec: &GameSpec,
    y: &Vector,
    mode: EvaluationMode,
    forced: Option<Branch>,
) -> Result<MonotonicityCertificate> {
    if y.len() != spec.param_dim() {
        return Err(Error::dims("parameter vector", spec.param_dim(), y.len()));
    }
    let points = evaluation_points(spec, mode)?;
    let p = spec.network().weights();
    let kappa1 = kappa1_at(spec, &points, y)?;
    let kappa2 = kappa2_at(spec, &points, y)?;

    let mut jacobian_min_eig = f64::INFINITY;
    for x in &points {
        let j = game::operator_jacobian(spec, x, y)?;
        jacobian_min_eig = jacobian_min_eig.min(linalg::sym_min_eig(&j));
    }

    let diagonal = spec.network().has_nonzero_diagonal();
    let scaled_identity = common_scaled_identity(spec, &points, y)?.filter(|&c| c >= 0.0);
    let branch_one_ok = !diagonal && scaled_identity.is_some() && spec.network().is_symmetric();

    let branch = match forced {
        Some(Branch::DirectJacobian) => Branch::DirectJacobian,
        Some(_) if diagonal => {
            return Err(Error::CertificateRefused(
                "network has a nonzero diagonal; only the direct Jacobian check applies".into(),
            ))
        }
        Some(Branch::SymmetricScaledIdentity) if !branch_one_ok => {
            return Err(Error::CertificateRefused(
                "scaled-identity branch needs symmetric P and cross-Jacobians κ₂·I with κ₂ ≥ 0".into(),
            ))
        }
        Some(b) => b,
        None if diagonal => Branch::DirectJacobian,
        None if branch_one_ok => Branch::SymmetricScaledIdentity,
        None => Branch::NormBound,
    };

    let (w_p, alpha) = match branch {
        Branch::DirectJacobian => (linalg::spectral_norm(p), jacobian_min_eig),
        Branch::SymmetricScaledIdentity => {
            check_branch_one_inputs(p)?;
            let w = network_weight(p, branch)?;
            (w, kappa1 - kappa2 * w)
        }
        Branch::NormBound => {
            let w = network_weight(p, branch)?;
            (w, kappa1 - kappa2 * w)
        }
    };
    let certified = alpha > 0.0;
    Ok(MonotonicityCertificate {
        kappa1,
        kappa2,
        w_p,
        branch,
        alpha,
        certified,
        evaluation_mode: mode,
        jacobian_min_eig,
        consistent: !certified || jacobian_min_eig >= alpha - 1e-8,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{
        FriedkinJohnsenCost, InteractionFn, LinearQuadraticBlock, LinearQuadraticCost, Network, QuadraticShockCost,
    };
    use crate::linalg::mat_from_rows;
    use std::sync::Arc;

    fn k3() -> Mat {
        Mat::from_element(3, 3, 1.0) - Mat::identity(3, 3)
    }

    fn k3_game(cross: f64) -> GameSpec {
        let blocks = (0..3)
            .map(|_| LinearQuadraticBlock {
                hessian: Mat::identity(1, 1),
                cross: Mat::identity(1, 1) * cross,
                loading: Mat::identity(1, 1),
                linear: Vector::zeros(1),
            })
            .collect();
        let cost = LinearQuadraticCost::new(blocks).unwrap();
        GameSpec::unconstrained(Network::new(k3()).unwrap(), Arc::new(cost)).unwrap()
    }

    #[test]
    fn network_weights() {
        assert!((network_weight(&k3(), Branch::SymmetricScaledIdentity).unwrap() - 1.0).abs() < 1e-12);
        assert!((network_weight(&k3(), Branch::NormBound).unwrap() - 2.0).abs() < 1e-12);
        let p2 = mat_from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        for b in [Branch::SymmetricScaledIdentity, Branch::NormBound] {
            assert!((network_weight(&p2, b).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(network_weight(&Mat::zeros(3, 3), b).unwrap(), 0.0);
        }
    }

    #[test]
    fn fj_certificate() {
        let p = mat_from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let spec =
            GameSpec::unconstrained(Network::new(p).unwrap(), Arc::new(FriedkinJohnsenCost::new(2, 1.0))).unwrap();
        let c = certify(&spec, &Vector::zeros(2), EvaluationMode::Analytic).unwrap();
        assert_eq!(c.branch, Branch::NormBound);
        assert_eq!((c.kappa1, c.kappa2), (1.0, 0.5));
        assert!((c.alpha - 0.5).abs() < 1e-12 && c.certified && c.consistent);
    }

    #[test]
    fn k3_branch_comparison() {
        let spec = k3_game(0.6);
        let y = Vector::zeros(3);
        let one = certify(&spec, &y, EvaluationMode::Analytic).unwrap();
        assert_eq!(one.branch, Branch::SymmetricScaledIdentity);
        assert!((one.alpha - 0.4).abs() < 1e-12 && one.certified && one.consistent);
        let two = certify_with_branch(&spec, &y, EvaluationMode::Analytic, Branch::NormBound).unwrap();
        assert!((two.alpha + 0.2).abs() < 1e-12 && !two.certified);

        let negative = k3_game(-0.6);
        let c = certify(&negative, &y, EvaluationMode::Analytic).unwrap();
        assert_eq!(c.branch, Branch::NormBound);
        assert!(certify_with_branch(&negative, &y, EvaluationMode::Analytic, Branch::SymmetricScaledIdentity).is_err());
    }

    #[test]
    fn zero_interaction_gives_kappa1() {
        let cost = QuadraticShockCost::new(3, 1, InteractionFn::Linear { slope: 0.0 });
        let spec = GameSpec::unconstrained(Network::new(k3()).unwrap(), Arc::new(cost)).unwrap();
        let c = certify(&spec, &Vector::zeros(3), EvaluationMode::Analytic).unwrap();
        assert_eq!(c.kappa2, 0.0);
        assert_eq!(c.alpha, 1.0);
    }

    #[test]
    fn sampled_mode_needs_box_on_unbounded_sets() {
        let cost = QuadraticShockCost::new(3, 1, InteractionFn::Softsign { gain: 0.3 });
        let spec = GameSpec::unconstrained(Network::new(k3()).unwrap(), Arc::new(cost)).unwrap();
        let y = Vector::zeros(3);
        assert!(matches!(
            certify(&spec, &y, EvaluationMode::Analytic),
            Err(Error::Configuration(_))
        ));
        let unbounded = EvaluationMode::Sampled {
            samples: 10,
            bounds: None,
            seed: 0,
        };
        assert!(matches!(certify(&spec, &y, unbounded), Err(Error::Configuration(_))));
        let boxed = EvaluationMode::Sampled {
            samples: 50,
            bounds: Some((-3.0, 3.0)),
            seed: 7,
        };
        let c = certify(&spec, &y, boxed).unwrap();
        assert!(c.heuristic() && c.certified && c.consistent);
        assert!(c.kappa2 <= 0.3 + 1e-12);
    }

    #[test]
    fn bounded_sets_are_detected() {
        let simplex = PolyhedralSet::new(
            -Mat::identity(2, 2),
            Vector::zeros(2),
            mat_from_rows(1, 2, &[1.0, 1.0]),
            Vector::from_vec(vec![1.0]),
        )
        .unwrap();
        let b = bounding_box(&simplex).unwrap().unwrap();
        assert!((b[0].0).abs() < 1e-9 && (b[0].1 - 1.0).abs() < 1e-9);
        let half = PolyhedralSet::new(
            -Mat::identity(1, 1),
            Vector::zeros(1),
            Mat::zeros(0, 1),
            Vector::zeros(0),
        )
        .unwrap();
        assert!(bounding_box(&half).is_none());
    }
}
