//! Scalar quadrature and root finding.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Subdivides until the local error estimate is below `abs_tol` or the
/// number of intervals reaches `max_intervals`; in the latter case the
/// current estimate is returned.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // (a, b, fa, fm, fb, estimate, tolerance)
    let mut stack = vec![(a, b, fa, fm, fb, whole, abs_tol)];
    let mut total = 0.0;
    let mut intervals = 1usize;
    while let Some((a, b, fa, fm, fb, est, tol)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - est;
        let narrow = (b - a) <= f64::EPSILON * a.abs().max(b.abs()).max(1.0) * 8.0;
        if delta.abs() <= 15.0 * tol || intervals >= max_intervals || narrow {
            total += left + right + delta / 15.0;
        } else {
            intervals += 1;
            stack.push((m, b, fm, frm, fb, right, 0.5 * tol));
            stack.push((a, m, fa, flm, fm, left, 0.5 * tol));
        }
    }
    total
}

/// Solves `phi(t) = s` for a strictly increasing `phi` with `phi(0) = 0`.
///
/// Safeguarded Newton on an expanding bracket; `dphi` is optional.
pub fn invert_increasing(
    phi: &dyn Fn(f64) -> f64,
    dphi: Option<&dyn Fn(f64) -> f64>,
    s: f64,
    max_steps: usize,
    rel_tol: f64,
) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while phi(hi) < s {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(Error::NumericFailure {
                message: format!("could not bracket the preimage of {s}"),
                best: vec![lo, hi],
                residual: f64::INFINITY,
            });
        }
    }
    if lo == 0.0 {
        // shrink the lower end for tiny targets
        while hi > f64::MIN_POSITIVE && phi(0.5 * hi) >= s {
            hi *= 0.5;
        }
        lo = 0.5 * hi;
        if phi(lo) >= s {
            lo = 0.0;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..max_steps {
        let v = phi(t) - s;
        if v == 0.0 {
            return Ok(t);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= rel_tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let newton = dphi.and_then(|d| {
            let g = d(t);
            (g.is_finite() && g > 0.0).then(|| t - v / g)
        });
        t = match newton {
            Some(nt) if nt > lo && nt < hi => {
                if (nt - t).abs() <= 0.25 * rel_tol * t {
                    return Ok(nt);
                }
                nt
            }
            _ => 0.5 * (lo + hi),
        };
    }
    Err(Error::NumericFailure {
        message: format!("root finding for the preimage of {s} did not converge"),
        best: vec![lo, hi],
        residual: hi - lo,
    })
}
