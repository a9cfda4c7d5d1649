#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use nagsens::cli::{parse_config, ConfigDocument};
use nagsens::game::{GameSpec, LinearQuadraticBlock, LinearQuadraticCost, Network, PolyhedralSet};
use nagsens::qp;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> ConfigDocument {
    parse_config(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Non-negative zero-diagonal weights, each entry present with probability
/// `density`.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Mat {
    Mat::from_fn(n, n, |i, j| {
        if i != j && rng.random_bool(density) {
            rng.random_range(0.1..1.0)
        } else {
            0.0
        }
    })
}

/// Row-stochastic, zero diagonal; every row has at least one neighbour.
pub fn random_row_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut p = random_weights(rng, n, 0.4);
    for i in 0..n {
        if p.row(i).sum() == 0.0 {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            p[(i, j)] = 1.0;
        }
        let s = p.row(i).sum();
        p.row_mut(i).scale_mut(1.0 / s);
    }
    p
}

/// Average of random derangement permutation matrices.
pub fn random_doubly_stochastic(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> Mat {
    let mut p = Mat::zeros(n, n);
    for _ in 0..terms {
        let perm = loop {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            if perm.iter().enumerate().all(|(i, &j)| i != j) {
                break perm;
            }
        };
        for (i, &j) in perm.iter().enumerate() {
            p[(i, j)] += 1.0 / terms as f64;
        }
    }
    p
}

pub fn spectral_norm(m: &Mat) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn gaussian_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random strongly monotone linear-quadratic game with per-player random
/// orthonormal equality rows. Returns the game and a parameter vector.
pub fn random_lq_game(rng: &mut ChaCha8Rng, players: usize, dim: usize) -> (GameSpec, Vector) {
    let mut p = random_weights(rng, players, 0.5);
    let norm = spectral_norm(&p);
    if norm > 0.0 {
        p /= norm;
    }
    let mut blocks = Vec::with_capacity(players);
    let mut sets = Vec::with_capacity(players);
    let mut params = 0;
    for _ in 0..players {
        let b = gaussian_mat(rng, dim, dim);
        let hessian = Mat::identity(dim, dim) + &b * b.transpose() * 0.5;
        let mut cross = gaussian_mat(rng, dim, dim);
        let cn = spectral_norm(&cross);
        if cn > 0.0 {
            cross *= 0.4 / cn;
        }
        let d = rng.random_range(1..=2);
        params += d;
        blocks.push(LinearQuadraticBlock {
            hessian,
            cross,
            loading: gaussian_mat(rng, dim, d),
            linear: Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
        });
        let pins = if rng.random_bool(0.6) {
            rng.random_range(1..=dim)
        } else {
            0
        };
        let set = if pins == 0 {
            PolyhedralSet::unconstrained(dim)
        } else {
            let rows = gaussian_mat(rng, dim, pins).qr().q().transpose();
            let rhs = Vector::from_fn(pins, |_, _| rng.random_range(-1.0..1.0));
            PolyhedralSet::affine(rows, rhs).unwrap()
        };
        sets.push(set);
    }
    let cost = LinearQuadraticCost::new(blocks).unwrap();
    let spec = GameSpec::new(Network::new(p).unwrap(), sets, Arc::new(cost)).unwrap();
    let y = Vector::from_fn(params, |_, _| rng.random_range(-1.0..1.0));
    (spec, y)
}

/// `Σ_t (γP)^t` summed until the terms vanish.
pub fn neumann_leontief(p: &Mat, gamma: f64) -> Mat {
    let n = p.nrows();
    let step = p * gamma;
    let mut term = Mat::identity(n, n);
    let mut sum = term.clone();
    for _ in 0..100_000 {
        term = &term * &step;
        sum += &term;
        if term.amax() < 1e-17 {
            break;
        }
    }
    sum
}

/// Column sums of the brute-force Leontief matrix.
pub fn brute_bonacich(p: &Mat, gamma: f64) -> Vector {
    let l = neumann_leontief(p, gamma);
    Vector::from_fn(p.ncols(), |i, _| l.column(i).sum())
}

/// Influence of player `i` removed by freezing player `k`: `v^i` minus the
/// column sum of the series over the network with `k` deleted.
pub fn brute_blocked(p: &Mat, gamma: f64, i: usize, k: usize) -> f64 {
    let v = brute_bonacich(p, gamma);
    if i == k {
        return v[i];
    }
    let keep: Vec<usize> = (0..p.nrows()).filter(|&m| m != k).collect();
    let free = p.select_rows(&keep).select_columns(&keep);
    let l = neumann_leontief(&free, gamma);
    let col = keep.iter().position(|&m| m == i).unwrap();
    v[i] - l.column(col).sum()
}

pub fn brute_keyplayer(p: &Mat, gamma: f64) -> Vector {
    let n = p.nrows();
    Vector::from_fn(n, |k, _| (0..n).map(|i| brute_blocked(p, gamma, i, k)).sum())
}

/// Largest improvement any of `samples` random feasible unilateral
/// deviations per player achieves over the profile `x`.
pub fn best_deviation_gain(spec: &GameSpec, x: &Vector, y: &Vector, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = spec.strategy_dim();
    let scale = x.amax().max(1.0);
    let mut best = f64::NEG_INFINITY;
    for i in 0..spec.players() {
        let own = x.rows(i * n, n).into_owned();
        let base = spec.player_cost(i, x, y).unwrap();
        for _ in 0..samples {
            let target = &own + Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * scale);
            let anchor = qp::project(spec.set(i), &target).unwrap();
            let t: f64 = rng.random_range(1e-3..=1.0);
            let dev = &own + (anchor - &own) * t;
            let mut trial = x.clone();
            trial.rows_mut(i * n, n).copy_from(&dev);
            let cost = spec.player_cost(i, &trial, y).unwrap();
            best = best.max(base - cost);
        }
    }
    best
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Mat {
    let f0 = f(x);
    let mut j = Mat::zeros(f0.len(), x.len());
    for c in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        j.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    j
}

pub fn sym_min_eig(m: &Mat) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.min()
}

pub fn rel_err(analytic: &Mat, reference: &Mat) -> f64 {
    (analytic - reference).amax() / reference.amax().max(1.0)
}
