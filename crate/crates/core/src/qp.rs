//! Projection onto polyhedra.
//!
//! Solves `min ½ (x − v)ᵀ W (x − v)` over `{B x ≤ b, H x = h}` with a positive
//! diagonal `W` using the Goldfarb–Idnani dual active-set method: start at the
//! unconstrained minimizer `v` and add violated constraints one at a time,
//! dropping active inequalities whose multipliers would turn negative. No
//! feasible starting point is needed and infeasibility comes with a Farkas
//! certificate.

use crate::error::{Error, Result};
use crate::game::PolyhedralSet;
use crate::linalg::{Mat, Vector};

struct Row {
    normal: Vector,
    rhs: f64,
    equality: bool,
    /// `+1` or `−1`; equalities are flipped so the initial slack is ≤ 0.
    sign: f64,
}

impl Row {
    fn slack(&self, x: &Vector) -> f64 {
        self.sign * (self.normal.dot(x) - self.rhs)
    }

    fn tolerance(&self, x: &Vector) -> f64 {
        1e-12 * (1.0 + self.rhs.abs() + self.normal.abs().sum() * x.amax())
    }
}

/// Euclidean projection of `v` onto `set`.
pub fn project(set: &PolyhedralSet, v: &Vector) -> Result<Vector> {
    project_weighted(set, v, &Vector::from_element(v.len(), 1.0))
}

/// Projection of `v` onto `set` in the norm `‖u‖²_W = Σ_k w_k u_k²`.
pub fn project_weighted(set: &PolyhedralSet, v: &Vector, weights: &Vector) -> Result<Vector> {
    let n = set.dim();
    if v.len() != n {
        return Err(Error::dims("projection point", n, v.len()));
    }
    if weights.len() != n {
        return Err(Error::dims("projection weights", n, weights.len()));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("projection weights must be positive".into()));
    }
    if set.num_inequalities() == 0 && set.num_equalities() == 0 {
        return Ok(v.clone());
    }
    let winv = weights.map(|w| 1.0 / w);
    let mut rows: Vec<Row> = Vec::with_capacity(set.num_inequalities() + set.num_equalities());
    for k in 0..set.num_inequalities() {
        rows.push(Row {
            normal: -set.ineq_matrix.row(k).transpose(),
            rhs: -set.ineq_rhs[k],
            equality: false,
            sign: 1.0,
        });
    }
    for k in 0..set.num_equalities() {
        rows.push(Row {
            normal: set.eq_matrix.row(k).transpose(),
            rhs: set.eq_rhs[k],
            equality: true,
            sign: 1.0,
        });
    }
    let mut solver = DualActiveSet {
        rows,
        winv,
        origin: v.clone(),
        x: v.clone(),
        active: Vec::new(),
        mult: Vec::new(),
        skipped: Vec::new(),
    };
    solver.run(set.num_inequalities())?;
    solver.polish();
    Ok(solver.finish())
}

struct DualActiveSet {
    rows: Vec<Row>,
    winv: Vector,
    origin: Vector,
    x: Vector,
    active: Vec<usize>,
    mult: Vec<f64>,
    skipped: Vec<usize>,
}

impl DualActiveSet {
    fn signed_normal(&self, k: usize) -> Vector {
        &self.rows[k].normal * self.rows[k].sign
    }

    /// Primal step `z` and dual step `r` for adding row `p`.
    fn directions(&self, np: &Vector) -> Result<(Vector, Vector)> {
        let scaled = np.component_mul(&self.winv);
        let q = self.active.len();
        if q == 0 {
            return Ok((scaled, Vector::zeros(0)));
        }
        let n = np.len();
        let mut normals = Mat::zeros(n, q);
        for (c, &k) in self.active.iter().enumerate() {
            normals.set_column(c, &self.signed_normal(k));
        }
        let mut wn = normals.clone();
        for mut col in wn.column_iter_mut() {
            col.component_mul_assign(&self.winv);
        }
        let gram = normals.transpose() * &wn;
        let rhs = normals.transpose() * &scaled;
        let r = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("active constraint Gram matrix".into()))?,
        };
        let z = scaled - wn * &r;
        Ok((z, r))
    }

    fn most_violated(&self, num_ineq: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..num_ineq {
            if self.active.contains(&k) {
                continue;
            }
            let row = &self.rows[k];
            let s = row.slack(&self.x);
            if s < -row.tolerance(&self.x) {
                let score = s / row.normal.norm().max(f64::MIN_POSITIVE);
                if best.is_none_or(|(_, b)| score < b) {
                    best = Some((k, score));
                }
            }
        }
        best.map(|(k, _)| k)
    }

    fn run(&mut self, num_ineq: usize) -> Result<()> {
        let total = self.rows.len();
        let n = self.x.len();
        let max_steps = 50 * (total + n) + 100;
        let mut steps = 0;
        let mut next_eq = num_ineq;
        loop {
            let p = if next_eq < total {
                next_eq += 1;
                next_eq - 1
            } else {
                match self.most_violated(num_ineq) {
                    Some(k) => k,
                    None => return Ok(()),
                }
            };
            if self.rows[p].equality {
                let s = self.rows[p].normal.dot(&self.x) - self.rows[p].rhs;
                self.rows[p].sign = if s > 0.0 { -1.0 } else { 1.0 };
            }
            let np = self.signed_normal(p);
            let mut u_plus = 0.0;
            loop {
                steps += 1;
                if steps > max_steps {
                    return Err(Error::NonConvergence {
                        iterations: steps,
                        residual: self.rows[p].slack(&self.x).abs(),
                    });
                }
                let s = self.rows[p].slack(&self.x);
                let (z, r) = self.directions(&np)?;
                let scale = np.component_mul(&self.winv).amax().max(f64::MIN_POSITIVE);
                let zero_step = z.amax() <= 1e-10 * scale;

                let mut partial: Option<(usize, f64)> = None;
                for (c, &k) in self.active.iter().enumerate() {
                    if self.rows[k].equality || r[c] <= 1e-14 * r.amax().max(1.0) {
                        continue;
                    }
                    let t = self.mult[c] / r[c];
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((c, t));
                    }
                }

                if zero_step {
                    match partial {
                        None => {
                            if self.rows[p].equality && s.abs() <= self.rows[p].tolerance(&self.x) {
                                self.skipped.push(p);
                                break;
                            }
                            return Err(self.infeasible(p, &r));
                        }
                        Some((c, t)) => {
                            self.dual_step(t, &r);
                            u_plus += t;
                            self.drop_active(c);
                            continue;
                        }
                    }
                }

                let curvature = np.dot(&z);
                let full = if curvature > 0.0 {
                    (-s / curvature).max(0.0)
                } else {
                    0.0
                };
                match partial {
                    Some((c, t)) if t < full => {
                        self.x += &z * t;
                        self.dual_step(t, &r);
                        u_plus += t;
                        self.drop_active(c);
                    }
                    _ => {
                        self.x += &z * full;
                        self.dual_step(full, &r);
                        u_plus += full;
                        self.active.push(p);
                        self.mult.push(u_plus);
                        break;
                    }
                }
            }
        }
    }

    fn dual_step(&mut self, t: f64, r: &Vector) {
        for (m, rc) in self.mult.iter_mut().zip(r.iter()) {
            *m -= t * rc;
        }
    }

    fn drop_active(&mut self, c: usize) {
        self.active.remove(c);
        self.mult.remove(c);
    }

    fn infeasible(&self, p: usize, r: &Vector) -> Error {
        let mut certificate = vec![0.0; self.rows.len()];
        let weight = |k: usize, gamma: f64| {
            let row = &self.rows[k];
            if row.equality {
                -row.sign * gamma
            } else {
                gamma
            }
        };
        certificate[p] = weight(p, 1.0);
        for (c, &k) in self.active.iter().enumerate() {
            certificate[k] = weight(k, -r[c]);
        }
        Error::Infeasible {
            context: "projection onto polyhedral set".into(),
            certificate,
        }
    }

    /// Recomputes `x` as the projection of the original point onto the final
    /// active affine set, via QR with one refinement sweep. Kept only if the
    /// result stays feasible.
    fn polish(&mut self) {
        if self.active.is_empty() {
            return;
        }
        let n = self.x.len();
        let s = self.winv.map(f64::sqrt);
        let m = Mat::from_fn(self.active.len(), n, |r, c| self.rows[self.active[r]].normal[c] * s[c]);
        let rhs = Vector::from_iterator(self.active.len(), self.active.iter().map(|&k| self.rows[k].rhs));
        let qr = m.transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        let rmax = r.amax();
        if r.diagonal().iter().any(|d| d.abs() <= 1e-13 * rmax) {
            return;
        }
        let rt = r.transpose();
        let mut u = self.origin.component_div(&s);
        for _ in 0..2 {
            let resid = &m * &u - &rhs;
            let Some(t) = rt.solve_lower_triangular(&resid) else {
                return;
            };
            u -= &q * t;
        }
        let x = u.component_mul(&s);
        let feasible = self
            .rows
            .iter()
            .all(|row| row.equality || row.slack(&x) >= -row.tolerance(&x));
        if feasible && x.iter().all(|v| v.is_finite()) {
            self.x = x;
        }
    }

    /// Places coordinate-bound rows exactly on their bound.
    fn finish(mut self) -> Vector {
        for (k, row) in self.rows.iter().enumerate() {
            let mut nz = row.normal.iter().enumerate().filter(|(_, v)| **v != 0.0);
            let (Some((j, &coef)), None) = (nz.next(), nz.next()) else {
                continue;
            };
            if self.skipped.contains(&k) {
                continue;
            }
            let on_bound = row.equality || self.active.contains(&k) || row.slack(&self.x) < 0.0;
            if on_bound {
                self.x[j] = row.rhs / coef;
            }
        }
        self.x
    }
}
