use serde::{Deserialize, Serialize};

use crate::geometry::Norm;
use crate::grid::{default_resolution, directions};

/// Numerical settings shared by the analysis routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub norm: Norm,
    pub seed: u64,
    /// Relative tolerance for inequality comparisons.
    pub tol: f64,
    /// Pieces within this gap of the maximum count as active.
    pub activity_tol: f64,
    /// Grid samples per axis for sweeps; `None` uses the dimension default.
    pub grid: Option<usize>,
    /// Grid samples per axis for nonlocal slope candidates.
    pub nonlocal_grid: Option<usize>,
    /// Radii for sampled local slopes.
    pub slope_radii: Vec<f64>,
    /// Number of smallest radii whose maximum is reported.
    pub slope_tail: usize,
    pub directions_low_dim: usize,
    pub directions_high_dim: usize,
    /// Bisection steps when refining sampled sublevel distances.
    pub bisection_depth: usize,
    /// Grid refinements applied to a sampled violation before it is reported.
    pub refinements: usize,
    /// Values of f at or below this floor are treated as zero in sweeps.
    pub value_floor: f64,
    /// Relative margin for the Fréchet-variant level μ_b = f(x)(1 + margin).
    pub frechet_margin: f64,
    /// Shells 2^-k-1 < |x - x̄| <= 2^-k for k in this range.
    pub shell_first: u32,
    pub shell_last: u32,
    /// Radii sampled inside each shell.
    pub shell_radii: usize,
    /// Shell k keeps points with 0 < f < 2^(-k * band_exponent).
    pub band_exponent: f64,
    /// Values below this count as zero in order analyses.
    pub zero_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            norm: Norm::Euclidean,
            seed: 0,
            tol: 1e-9,
            activity_tol: 1e-9,
            grid: None,
            nonlocal_grid: None,
            slope_radii: (0..=20).map(|k| 0.1 * 0.5f64.powi(k)).collect(),
            slope_tail: 3,
            directions_low_dim: 64,
            directions_high_dim: 512,
            bisection_depth: 40,
            refinements: 2,
            value_floor: 1e-12,
            frechet_margin: 1e-6,
            shell_first: 1,
            shell_last: 20,
            shell_radii: 4,
            band_exponent: 0.5,
            zero_threshold: 1e-3,
        }
    }
}

impl Config {
    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_grid(mut self, points: usize) -> Self {
        self.grid = Some(points);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn resolution(&self, n: usize) -> usize {
        self.grid.unwrap_or_else(|| default_resolution(n))
    }

    pub fn nonlocal_resolution(&self, n: usize) -> usize {
        self.nonlocal_grid.unwrap_or(match n {
            1 => 401,
            2 => 41,
            3 => 15,
            _ => 5,
        })
    }

    pub fn directions(&self, n: usize) -> Vec<Vec<f64>> {
        directions(n, self.directions_low_dim, self.directions_high_dim, self.seed)
    }

    /// `a <= b` up to the relative comparison tolerance.
    pub fn le(&self, a: f64, b: f64) -> bool {
        a <= b + self.tol * b.abs().max(1.0)
    }
}
