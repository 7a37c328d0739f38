//! Minimum-norm point of the convex hull of finitely many vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, Norm};
use crate::lp::{Cmp, LinearProgram};

pub const GAP_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    pub norm: f64,
    /// Convex weights on the generators.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Frank–Wolfe duality gap at the returned point.
    pub gap: f64,
}

fn combine(generators: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = generators[0].len();
    let mut x = vec![0.0; n];
    for (g, wi) in generators.iter().zip(w) {
        if *wi != 0.0 {
            for i in 0..n {
                x[i] += wi * g[i];
            }
        }
    }
    x
}

fn fw_gap(generators: &[Vec<f64>], x: &[f64]) -> f64 {
    let xx = dot(x, x);
    generators.iter().map(|g| xx - dot(x, g)).fold(f64::NEG_INFINITY, f64::max)
}

fn validate(generators: &[Vec<f64>]) -> Result<usize> {
    if generators.is_empty() || generators.len() > 10_000 {
        return invalid(format!("need between 1 and 10000 generators, got {}", generators.len()));
    }
    let n = generators[0].len();
    if n == 0 || generators.iter().any(|g| g.len() != n) {
        return invalid("generators must share a positive dimension");
    }
    if generators.iter().flatten().any(|v| !v.is_finite()) {
        return invalid("generators must be finite");
    }
    Ok(n)
}

/// Exact minimiser over the affine hull of the support, accepted when its
/// barycentric weights are nonnegative.
fn polish(generators: &[Vec<f64>], weights: &[f64]) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let k = support.len();
    if k < 2 {
        return None;
    }
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            kkt[(a, b)] = dot(&generators[support[a]], &generators[support[b]]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt.svd(true, true).solve(&rhs, 1e-13).ok()?;
    let mu: Vec<f64> = (0..k).map(|a| sol[a]).collect();
    if mu.iter().any(|m| !m.is_finite() || *m < -1e-12) {
        return None;
    }
    let total: f64 = mu.iter().map(|m| m.max(0.0)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut w = vec![0.0; weights.len()];
    for (a, &i) in support.iter().enumerate() {
        w[i] = mu[a].max(0.0) / total;
    }
    Some(w)
}

/// Pairwise Frank–Wolfe with away steps for `min |x|` over `conv(generators)`,
/// finished by an exact solve on the final support.
///
/// Stops when the duality gap drops below `GAP_TOL` (relative to the squared
/// generator scale) or after `MAX_ITERATIONS` steps, in which case the best
/// iterate is returned inside a numeric-failure error.
pub fn min_norm_point(generators: &[Vec<f64>]) -> Result<MinNormPoint> {
    validate(generators)?;
    let m = generators.len();
    let sq: Vec<f64> = generators.iter().map(|g| dot(g, g)).collect();
    let scale = sq.iter().fold(1.0f64, |a, b| a.max(*b));
    let tol = GAP_TOL * scale;
    let start = (0..m).fold(0, |b, i| if sq[i] < sq[b] { i } else { b });
    let mut w = vec![0.0; m];
    w[start] = 1.0;
    let mut x = generators[start].clone();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let xx = dot(&x, &x);
        let scores: Vec<f64> = generators.iter().map(|g| dot(&x, g)).collect();
        let s = (0..m).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
        gap = xx - scores[s];
        if gap <= tol {
            break;
        }
        let v = (0..m)
            .filter(|&i| w[i] > 0.0)
            .fold(None, |b: Option<usize>, i| match b {
                Some(j) if scores[j] >= scores[i] => Some(j),
                _ => Some(i),
            })
            .expect("support is never empty");
        let d: Vec<f64> = generators[s].iter().zip(&generators[v]).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        if dd == 0.0 {
            break;
        }
        let gamma = (-dot(&x, &d) / dd).clamp(0.0, w[v]);
        if gamma == w[v] {
            w[s] += w[v];
            w[v] = 0.0;
        } else {
            w[s] += gamma;
            w[v] -= gamma;
        }
        iterations += 1;
        if iterations % 64 == 0 {
            x = combine(generators, &w);
        } else {
            for i in 0..x.len() {
                x[i] += gamma * d[i];
            }
        }
    }
    x = combine(generators, &w);
    gap = gap.min(fw_gap(generators, &x));
    if let Some(pw) = polish(generators, &w) {
        let px = combine(generators, &pw);
        let pgap = fw_gap(generators, &px);
        if pgap <= gap.max(tol) && dot(&px, &px) <= dot(&x, &x) + 1e-15 * scale {
            w = pw;
            x = px;
            gap = pgap;
        }
    }
    if gap > tol {
        return Err(Error::NumericFailure {
            message: format!("min-norm point not converged after {iterations} iterations"),
            best: x,
            residual: gap,
        });
    }
    let norm = dot(&x, &x).sqrt();
    Ok(MinNormPoint { point: x, norm, weights: w, iterations, gap: gap.max(0.0) })
}

/// `min ‖x‖_*` over the convex hull, where `‖·‖_*` is the dual of `norm`.
pub fn min_dual_norm(generators: &[Vec<f64>], norm: Norm) -> Result<MinNormPoint> {
    match norm {
        Norm::Euclidean => min_norm_point(generators),
        Norm::Max => min_l1_point(generators),
    }
}

fn min_l1_point(generators: &[Vec<f64>]) -> Result<MinNormPoint> {
    let n = validate(generators)?;
    let m = generators.len();
    let mut lp = LinearProgram::default();
    let lam: Vec<usize> = (0..m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let s: Vec<usize> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    lp.add_row(lam.iter().map(|&j| (j, 1.0)).collect(), Cmp::Eq, 1.0);
    for i in 0..n {
        let mut up: Vec<(usize, f64)> = lam.iter().map(|&j| (j, generators[j][i])).collect();
        let mut down: Vec<(usize, f64)> = lam.iter().map(|&j| (j, -generators[j][i])).collect();
        up.push((s[i], -1.0));
        down.push((s[i], -1.0));
        lp.add_row(up, Cmp::Le, 0.0);
        lp.add_row(down, Cmp::Le, 0.0);
    }
    let (z, _) = lp.solve_optimal()?;
    let total: f64 = lam.iter().map(|&j| z[j].max(0.0)).sum();
    let weights: Vec<f64> = lam.iter().map(|&j| z[j].max(0.0) / total).collect();
    let point = combine(generators, &weights);
    let norm = Norm::Max.dual_norm(&point);
    Ok(MinNormPoint { point, norm, weights, iterations: 1, gap: 0.0 })
}
