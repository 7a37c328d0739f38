use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Norm;

/// Axis-aligned box `[lo, hi]` in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("region bounds must be non-empty and of equal length");
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || a > b {
                return invalid(format!("invalid region axis [{a}, {b}]"));
            }
        }
        Ok(Region { lo, hi })
    }

    pub fn cube(center: &[f64], half_width: f64) -> Result<Self> {
        Region::new(center.iter().map(|c| c - half_width).collect(), center.iter().map(|c| c + half_width).collect())
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Region::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.dim() == self.dim() && (0..self.dim()).all(|i| other.lo[i] >= self.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect()
    }

    /// Intersection with the box of half-width `radius` around `center`.
    pub fn clip_to_ball(&self, center: &[f64], radius: f64) -> Option<Region> {
        if !radius.is_finite() {
            return Some(self.clone());
        }
        let lo: Vec<f64> = (0..self.dim()).map(|i| self.lo[i].max(center[i] - radius)).collect();
        let hi: Vec<f64> = (0..self.dim()).map(|i| self.hi[i].min(center[i] + radius)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return None;
        }
        Some(Region { lo, hi })
    }

    /// Box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Region {
        let c = self.center();
        Region {
            lo: (0..self.dim()).map(|i| c[i] - factor * (c[i] - self.lo[i])).collect(),
            hi: (0..self.dim()).map(|i| c[i] + factor * (self.hi[i] - c[i])).collect(),
        }
    }

    /// Largest grid spacing for `points` samples per axis.
    pub fn spacing(&self, points: usize) -> f64 {
        let p = points.max(2) as f64 - 1.0;
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) / p).fold(0.0, f64::max)
    }

    /// Regular grid with `points` samples per axis, in lexicographic order
    /// (last axis fastest). Degenerate axes contribute a single sample.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let counts: Vec<usize> = (0..n).map(|i| if self.lo[i] == self.hi[i] { 1 } else { points.max(2) }).collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let p: Vec<f64> = (0..n)
                .map(|i| {
                    if counts[i] == 1 {
                        self.lo[i]
                    } else if idx[i] + 1 == counts[i] {
                        self.hi[i]
                    } else {
                        self.lo[i] + (self.hi[i] - self.lo[i]) * idx[i] as f64 / (counts[i] - 1) as f64
                    }
                })
                .collect();
            out.push(p);
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        out
    }
}

/// Default number of grid samples per axis for a problem in R^n.
pub fn default_resolution(n: usize) -> usize {
    match n {
        1 => 401,
        2 => 101,
        3 => 41,
        _ => 11,
    }
}

/// Unit directions (Euclidean) used by sampled slope estimates.
///
/// Deterministic stencils for n <= 3, seeded Gaussian directions otherwise.
pub fn directions(n: usize, count_low: usize, count_high: usize, seed: u64) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count_low)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count_low as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count_low)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count_low as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count_high);
            while out.len() < count_high {
                let v: Vec<f64> = (0..n)
                    .map(|_| {
                        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                        let u2: f64 = rng.gen();
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                let l = crate::geometry::euclid(&v);
                if l > 1e-12 {
                    out.push(v.into_iter().map(|a| a / l).collect());
                }
            }
            out
        }
    }
}

/// `count` points spaced logarithmically on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

/// Points of `grid` that lie in the open ball `B(center, radius)`.
pub fn ball_filter(points: Vec<Vec<f64>>, center: &[f64], radius: f64, norm: Norm) -> Vec<Vec<f64>> {
    if !radius.is_finite() {
        return points;
    }
    points.into_iter().filter(|p| norm.dist(p, center) < radius).collect()
}
