use serde::{Deserialize, Serialize};

/// Norm used for distances in the primal space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
}

impl Norm {
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Norm::Max => v.iter().fold(0.0, |m, a| m.max(a.abs())),
        }
    }

    /// Norm of the dual space, used for gradient magnitudes.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => Norm::Euclidean.norm(v),
            Norm::Max => v.iter().map(|a| a.abs()).sum(),
        }
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Norm::Max => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + s * y).collect()
}

pub fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

pub fn euclid(v: &[f64]) -> f64 {
    Norm::Euclidean.norm(v)
}
