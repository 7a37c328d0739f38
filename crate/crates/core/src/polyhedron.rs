//! Polyhedra `{x : A x <= b}`: projection, distance and variable elimination.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, Norm};
use crate::lp::{Cmp, LinearProgram, LpOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

fn row_norm(r: &[f64]) -> f64 {
    dot(r, r).sqrt()
}

/// Least-squares coefficients `r` with `N r ≈ v`, columns of `N` given as rows.
fn least_squares(cols: &[&[f64]], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let k = cols.len();
    if k == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let b = DVector::from_column_slice(v);
    let gram = m.transpose() * &m;
    let rhs = m.transpose() * b;
    if let Some(ch) = gram.clone().cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    let svd = gram.svd(true, true);
    svd.solve(&rhs, 1e-14).map(|s| s.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; k])
}

impl Polyhedron {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return invalid("row count and right-hand side length differ");
        }
        if rows.iter().any(|r| r.len() != dim) {
            return invalid(format!("every row must have length {dim}"));
        }
        if rows.iter().flatten().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return invalid("polyhedron data must be finite");
        }
        Ok(Polyhedron { dim, rows, rhs })
    }

    pub fn whole_space(dim: usize) -> Self {
        Polyhedron { dim, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// Largest violation `a_j·x - b_j`, scaled by `|a_j|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| {
                let s = row_norm(a);
                if s == 0.0 {
                    if *b < 0.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (dot(a, x) - b) / s
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    fn has_contradictory_zero_row(&self) -> bool {
        self.rows.iter().zip(&self.rhs).any(|(a, b)| row_norm(a) == 0.0 && *b < 0.0)
    }

    /// Nearest point of the polyhedron to `x`, or `None` if it is empty.
    pub fn project(&self, x: &[f64], norm: Norm) -> Result<Option<Vec<f64>>> {
        if x.len() != self.dim {
            return invalid("point dimension does not match polyhedron");
        }
        if self.has_contradictory_zero_row() {
            return Ok(None);
        }
        match norm {
            Norm::Euclidean => self.project_euclidean(x),
            Norm::Max => self.project_max(x),
        }
    }

    /// Distance from `x`; `+∞` for an empty polyhedron.
    pub fn distance(&self, x: &[f64], norm: Norm) -> Result<f64> {
        Ok(match self.project(x, norm)? {
            Some(p) => norm.dist(x, &p),
            None => f64::INFINITY,
        })
    }

    /// Dual active-set method (Goldfarb–Idnani) for `min ½|u - x|²` over the
    /// polyhedron. Keeps `u - x + Σ λ_j a_j = 0` with `λ >= 0` on the active set
    /// and adds the most violated constraint until the iterate is feasible.
    fn project_euclidean(&self, x0: &[f64]) -> Result<Option<Vec<f64>>> {
        let rows: Vec<usize> = (0..self.rows.len()).filter(|&j| row_norm(&self.rows[j]) > 0.0).collect();
        let scale = 1.0
            + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            + rows.iter().map(|&j| self.rhs[j].abs() / row_norm(&self.rows[j])).fold(0.0, f64::max);
        let feas_tol = 1e-12 * scale;
        let mut x = x0.to_vec();
        let mut active: Vec<usize> = Vec::new();
        let mut lam: Vec<f64> = Vec::new();
        let budget = 50 * (rows.len() + self.dim) + 100;
        let mut steps = 0usize;
        loop {
            let mut best: Option<(usize, f64)> = None;
            for &j in &rows {
                if active.contains(&j) {
                    continue;
                }
                let v = (dot(&self.rows[j], &x) - self.rhs[j]) / row_norm(&self.rows[j]);
                if v > feas_tol && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            let Some((p, _)) = best else {
                return Ok(Some(x));
            };
            let ap = &self.rows[p];
            let ap_sq = dot(ap, ap);
            let mut lam_p = 0.0;
            loop {
                steps += 1;
                if steps > budget {
                    return Err(Error::NumericFailure {
                        message: "projection did not converge".into(),
                        best: x,
                        residual: self.max_violation(x0),
                    });
                }
                let cols: Vec<&[f64]> = active.iter().map(|&j| self.rows[j].as_slice()).collect();
                let r = least_squares(&cols, ap);
                let mut z = ap.clone();
                for (c, rj) in cols.iter().zip(&r) {
                    for i in 0..self.dim {
                        z[i] -= rj * c[i];
                    }
                }
                let zz = dot(&z, &z);
                let viol = dot(ap, &x) - self.rhs[p];
                let t_full = if zz > 1e-20 * ap_sq { (viol / zz).max(0.0) } else { f64::INFINITY };
                let mut t_part = f64::INFINITY;
                let mut drop = None;
                for (k, rk) in r.iter().enumerate() {
                    if *rk > 1e-14 {
                        let t = lam[k] / rk;
                        if t < t_part {
                            t_part = t;
                            drop = Some(k);
                        }
                    }
                }
                if t_full.is_infinite() && t_part.is_infinite() {
                    return Ok(None);
                }
                let t = t_full.min(t_part);
                if t_full.is_finite() {
                    for i in 0..self.dim {
                        x[i] -= t * z[i];
                    }
                }
                for (k, rk) in r.iter().enumerate() {
                    lam[k] = (lam[k] - t * rk).max(0.0);
                }
                lam_p += t;
                if t_full <= t_part {
                    active.push(p);
                    lam.push(lam_p);
                    break;
                }
                let k = drop.expect("partial step has a blocking constraint");
                active.remove(k);
                lam.remove(k);
            }
        }
    }

    fn project_max(&self, x0: &[f64]) -> Result<Option<Vec<f64>>> {
        let n = self.dim;
        let mut lp = LinearProgram::default();
        let u: Vec<usize> = (0..n).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        let r = lp.add_var(1.0, (0.0, f64::INFINITY));
        for i in 0..n {
            lp.add_row(vec![(u[i], 1.0), (r, -1.0)], Cmp::Le, x0[i]);
            lp.add_row(vec![(u[i], -1.0), (r, -1.0)], Cmp::Le, -x0[i]);
        }
        for (a, b) in self.rows.iter().zip(&self.rhs) {
            lp.add_row(a.iter().enumerate().map(|(i, v)| (u[i], *v)).collect(), Cmp::Le, *b);
        }
        match lp.solve()? {
            LpOutcome::Optimal { z, .. } => Ok(Some(z[..n].to_vec())),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Internal("distance LP unbounded".into())),
        }
    }

    /// Fourier–Motzkin elimination of variable `var`.
    pub fn eliminate(&self, var: usize) -> Polyhedron {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut out = Polyhedron::whole_space(self.dim - 1);
        let strip =
            |r: &[f64]| -> Vec<f64> { r.iter().enumerate().filter(|(i, _)| *i != var).map(|(_, v)| *v).collect() };
        for (j, (a, b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let c = a[var];
            let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if c.abs() <= 1e-14 * s {
                out.push(strip(a), *b);
            } else if c > 0.0 {
                pos.push(j);
            } else {
                neg.push(j);
            }
        }
        for &p in &pos {
            for &q in &neg {
                let cp = self.rows[p][var];
                let cq = -self.rows[q][var];
                let row: Vec<f64> = self.rows[p].iter().zip(&self.rows[q]).map(|(a, b)| cq * a + cp * b).collect();
                out.push(strip(&row), cq * self.rhs[p] + cp * self.rhs[q]);
            }
        }
        out.normalized()
    }

    /// Rows scaled to unit max-coefficient, trivial rows removed and
    /// duplicates merged.
    pub fn normalized(&self) -> Polyhedron {
        let mut items: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut infeasible = false;
        for (a, b) in self.rows.iter().zip(&self.rhs) {
            let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s <= 1e-13 * (1.0 + b.abs()) {
                if *b < -1e-12 {
                    infeasible = true;
                }
                continue;
            }
            let row: Vec<f64> = a
                .iter()
                .map(|v| {
                    let w = v / s;
                    if w.abs() < 1e-15 {
                        0.0
                    } else {
                        w
                    }
                })
                .collect();
            items.push((row, b / s));
        }
        items.sort_by(|x, y| {
            x.0.iter()
                .zip(&y.0)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.1.total_cmp(&y.1))
        });
        let mut out = Polyhedron::whole_space(self.dim);
        for (row, b) in items {
            if let Some(last) = out.rows.last() {
                if last.iter().zip(&row).all(|(u, v)| (u - v).abs() <= 1e-12) {
                    continue;
                }
            }
            out.push(row, b);
        }
        if infeasible {
            out.push(vec![0.0; self.dim], -1.0);
        }
        out
    }

    /// Drops rows implied by the others (one LP per row).
    pub fn prune_redundant(&self) -> Result<Polyhedron> {
        let mut keep: Vec<bool> = vec![true; self.rows.len()];
        for i in 0..self.rows.len() {
            if row_norm(&self.rows[i]) == 0.0 {
                continue;
            }
            let mut lp = LinearProgram::default();
            let x: Vec<usize> =
                (0..self.dim).map(|k| lp.add_var(-self.rows[i][k], (f64::NEG_INFINITY, f64::INFINITY))).collect();
            for (j, row) in self.rows.iter().enumerate() {
                if j == i || !keep[j] {
                    continue;
                }
                lp.add_row(row.iter().enumerate().map(|(k, v)| (x[k], *v)).collect(), Cmp::Le, self.rhs[j]);
            }
            if let LpOutcome::Optimal { value, .. } = lp.solve()? {
                if -value <= self.rhs[i] + 1e-9 * (1.0 + self.rhs[i].abs()) {
                    keep[i] = false;
                }
            }
        }
        let mut out = Polyhedron::whole_space(self.dim);
        for (i, k) in keep.iter().enumerate() {
            if *k {
                out.push(self.rows[i].clone(), self.rhs[i]);
            }
        }
        Ok(out)
    }
}
