//! Nonlinearity gauges: increasing functions φ on [0, ∞) with φ(0) = 0.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::log_grid;
use crate::numeric::{adaptive_simpson, invert_increasing};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_INTERVALS: usize = 10_000;
const ROOT_STEPS: usize = 200;
const ROOT_TOL: f64 = 1e-12;
const MONOTONE_PROBES: usize = 64;

/// Smoothness class of a gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeClass {
    /// Continuous, increasing, φ(0) = 0.
    Continuous,
    /// Additionally C¹ on (0, ∞) with φ' > 0 and φ(t) → ∞.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Nonincreasing,
    Nondecreasing,
    Neither,
    Unknown,
}

impl Monotonicity {
    pub fn is_nonincreasing(self) -> bool {
        matches!(self, Monotonicity::Constant | Monotonicity::Nonincreasing)
    }

    pub fn is_nondecreasing(self) -> bool {
        matches!(self, Monotonicity::Constant | Monotonicity::Nondecreasing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Linear,
    Convex,
    Concave,
    Neither,
}

impl Convexity {
    pub fn is_convex(self) -> bool {
        matches!(self, Convexity::Linear | Convexity::Convex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Convexity::Linear | Convexity::Concave)
    }
}

/// Piecewise-linear function on [0, ∞) given by knots `(t_i, v_i)`,
/// extended linearly past the last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("a piecewise-linear table needs at least two knots");
        }
        if knots[0].0 != 0.0 {
            return invalid("the first knot must be at t = 0");
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return invalid("knot abscissae must be strictly increasing");
            }
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return invalid("knots must be finite");
        }
        Ok(PiecewiseLinear { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment(&self, t: f64) -> usize {
        let k = &self.knots;
        match k.iter().position(|(x, _)| *x > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => k.len() - 2,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, v0) = self.knots[i];
        let (t1, v1) = self.knots[i + 1];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Exact integral over [0, t].
    pub fn integral(&self, t: f64) -> f64 {
        let last = self.knots.len() - 2;
        let mut acc = 0.0;
        for i in 0..=last {
            let a = self.knots[i].0;
            if a >= t {
                break;
            }
            let b = if i == last { t } else { self.knots[i + 1].0.min(t) };
            acc += 0.5 * (b - a) * (self.eval(a) + self.eval(b));
        }
        acc
    }

    fn is_nondecreasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    fn is_constant(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].1 == w[0].1)
    }
}

/// Density ν of an integral gauge φ(t) = ∫₀ᵗ ν.
#[derive(Clone)]
pub enum Nu {
    Table(PiecewiseLinear),
    Function(ScalarFn),
}

impl Nu {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Nu::Table(p) => p.eval(t),
            Nu::Function(f) => f(t),
        }
    }

    fn integral(&self, t: f64) -> f64 {
        match self {
            Nu::Table(p) => p.integral(t),
            Nu::Function(f) => adaptive_simpson(&|s| f(s), 0.0, t, QUAD_TOL, QUAD_MAX_INTERVALS),
        }
    }
}

#[derive(Clone)]
pub enum GaugeKind {
    /// φ(t) = t / τ
    Linear {
        tau: f64,
    },
    /// φ(t) = t^q / τ
    Holder {
        tau: f64,
        q: f64,
    },
    /// φ(t) = ∫₀ᵗ ν(s) ds
    NuIntegral {
        nu: Nu,
    },
    Custom {
        phi: ScalarFn,
        derivative: Option<ScalarFn>,
        inverse: Option<ScalarFn>,
    },
}

/// A gauge `t ↦ outer · base(inner · t)`.
///
/// The outer and inner factors let callers form `cφ` and `φ(t/β)` without
/// losing closed-form derivatives and inverses.
#[derive(Clone)]
pub struct Gauge {
    kind: GaugeKind,
    outer: f64,
    inner: f64,
    class: GaugeClass,
    derivative_monotonicity: Monotonicity,
    convexity: Convexity,
    flags_sampled: bool,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge")
            .field("label", &self.label())
            .field("class", &self.class)
            .field("derivative_monotonicity", &self.derivative_monotonicity)
            .field("convexity", &self.convexity)
            .finish()
    }
}

/// Serializable summary of a gauge, used in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSummary {
    pub label: String,
    pub class: GaugeClass,
    pub derivative_monotonicity: Monotonicity,
    pub convexity: Convexity,
    pub flags_sampled: bool,
}

fn classify_derivative(values: &[f64]) -> Monotonicity {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let eps = 1e-12 * scale;
    let up = values.windows(2).all(|w| w[1] >= w[0] - eps);
    let down = values.windows(2).all(|w| w[1] <= w[0] + eps);
    match (up, down) {
        (true, true) => Monotonicity::Constant,
        (true, false) => Monotonicity::Nondecreasing,
        (false, true) => Monotonicity::Nonincreasing,
        (false, false) => Monotonicity::Neither,
    }
}

fn convexity_from(m: Monotonicity) -> Convexity {
    match m {
        Monotonicity::Constant => Convexity::Linear,
        Monotonicity::Nondecreasing => Convexity::Convex,
        Monotonicity::Nonincreasing => Convexity::Concave,
        _ => Convexity::Neither,
    }
}

impl Gauge {
    pub fn linear(tau: f64) -> Result<Gauge> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid(format!("linear gauge needs τ > 0, got {tau}"));
        }
        Ok(Gauge {
            kind: GaugeKind::Linear { tau },
            outer: 1.0,
            inner: 1.0,
            class: GaugeClass::Smooth,
            derivative_monotonicity: Monotonicity::Constant,
            convexity: Convexity::Linear,
            flags_sampled: false,
        })
    }

    /// The identity gauge t ↦ t.
    pub fn identity() -> Gauge {
        Gauge::linear(1.0).expect("τ = 1 is valid")
    }

    pub fn holder(tau: f64, q: f64) -> Result<Gauge> {
        if !(tau > 0.0 && tau.is_finite()) || !(q > 0.0 && q.is_finite()) {
            return invalid(format!("Hölder gauge needs τ > 0 and q > 0, got τ={tau}, q={q}"));
        }
        let (m, c) = if q == 1.0 {
            (Monotonicity::Constant, Convexity::Linear)
        } else if q < 1.0 {
            (Monotonicity::Nonincreasing, Convexity::Concave)
        } else {
            (Monotonicity::Nondecreasing, Convexity::Convex)
        };
        Ok(Gauge {
            kind: GaugeKind::Holder { tau, q },
            outer: 1.0,
            inner: 1.0,
            class: GaugeClass::Smooth,
            derivative_monotonicity: m,
            convexity: c,
            flags_sampled: false,
        })
    }

    /// Integral gauge from a nondecreasing piecewise-linear density.
    pub fn nu_table(knots: Vec<(f64, f64)>) -> Result<Gauge> {
        let table = PiecewiseLinear::new(knots)?;
        if !table.is_nondecreasing() {
            return invalid("ν table must be nondecreasing");
        }
        if table.eval(0.0) < 0.0 || table.knots().iter().skip(1).any(|(_, v)| *v <= 0.0) {
            return invalid("ν must be nonnegative at 0 and positive on (0, ∞)");
        }
        let m = if table.is_constant() { Monotonicity::Constant } else { Monotonicity::Nondecreasing };
        Ok(Gauge {
            kind: GaugeKind::NuIntegral { nu: Nu::Table(table) },
            outer: 1.0,
            inner: 1.0,
            class: GaugeClass::Smooth,
            derivative_monotonicity: m,
            convexity: convexity_from(m),
            flags_sampled: false,
        })
    }

    /// Integral gauge from a density closure; ν must be positive and
    /// nondecreasing on (0, ∞), which is checked on a log grid.
    pub fn nu_function(nu: ScalarFn) -> Result<Gauge> {
        let probes = log_grid(1e-6, 1e6, MONOTONE_PROBES);
        let values: Vec<f64> = probes.iter().map(|t| nu(*t)).collect();
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid("ν must be finite and positive on (0, ∞)");
        }
        let m = classify_derivative(&values);
        if !m.is_nondecreasing() {
            return invalid("ν must be nondecreasing");
        }
        Ok(Gauge {
            kind: GaugeKind::NuIntegral { nu: Nu::Function(nu) },
            outer: 1.0,
            inner: 1.0,
            class: GaugeClass::Smooth,
            derivative_monotonicity: m,
            convexity: convexity_from(m),
            flags_sampled: true,
        })
    }

    /// User-supplied gauge. Without a derivative the gauge is only in the
    /// continuous class. Derivative monotonicity is probed on a 64-point log
    /// grid unless `convexity` is declared.
    pub fn custom(
        phi: ScalarFn,
        derivative: Option<ScalarFn>,
        inverse: Option<ScalarFn>,
        convexity: Option<Convexity>,
    ) -> Result<Gauge> {
        if phi(0.0) != 0.0 {
            return invalid("a gauge must vanish at 0");
        }
        let probes = log_grid(1e-6, 1e6, MONOTONE_PROBES);
        let values: Vec<f64> = probes.iter().map(|t| phi(*t)).collect();
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid("a gauge must be positive on (0, ∞)");
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("a gauge must be strictly increasing");
        }
        let (class, m) = match &derivative {
            Some(d) => {
                let dv: Vec<f64> = probes.iter().map(|t| d(*t)).collect();
                if dv.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return invalid("gauge derivative must be positive on (0, ∞)");
                }
                (GaugeClass::Smooth, classify_derivative(&dv))
            }
            None => (GaugeClass::Continuous, Monotonicity::Unknown),
        };
        let convexity = convexity.unwrap_or_else(|| convexity_from(m));
        Ok(Gauge {
            kind: GaugeKind::Custom { phi, derivative, inverse },
            outer: 1.0,
            inner: 1.0,
            class,
            derivative_monotonicity: m,
            convexity,
            flags_sampled: true,
        })
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    pub fn class(&self) -> GaugeClass {
        self.class
    }

    pub fn is_smooth(&self) -> bool {
        self.class == GaugeClass::Smooth
    }

    pub fn derivative_monotonicity(&self) -> Monotonicity {
        self.derivative_monotonicity
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    pub fn flags_sampled(&self) -> bool {
        self.flags_sampled
    }

    /// Linear gauges t ↦ t/τ, including scaled ones; returns τ.
    pub fn linear_tau(&self) -> Option<f64> {
        match self.kind {
            GaugeKind::Linear { tau } | GaugeKind::Holder { tau, q: 1.0 } => Some(tau / (self.outer * self.inner)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        let base = match &self.kind {
            GaugeKind::Linear { tau } => format!("linear(tau={tau})"),
            GaugeKind::Holder { tau, q } => format!("holder(tau={tau},q={q})"),
            GaugeKind::NuIntegral { nu: Nu::Table(_) } => "nu_integral(table)".to_string(),
            GaugeKind::NuIntegral { nu: Nu::Function(_) } => "nu_integral(fn)".to_string(),
            GaugeKind::Custom { .. } => "custom".to_string(),
        };
        match (self.outer == 1.0, self.inner == 1.0) {
            (true, true) => base,
            (false, true) => format!("{}*{base}", self.outer),
            (true, false) => format!("{base}[{}*t]", self.inner),
            (false, false) => format!("{}*{base}[{}*t]", self.outer, self.inner),
        }
    }

    pub fn summary(&self) -> GaugeSummary {
        GaugeSummary {
            label: self.label(),
            class: self.class,
            derivative_monotonicity: self.derivative_monotonicity,
            convexity: self.convexity,
            flags_sampled: self.flags_sampled,
        }
    }

    /// The gauge `k·φ`.
    pub fn scaled(&self, k: f64) -> Result<Gauge> {
        if !(k > 0.0 && k.is_finite()) {
            return invalid(format!("gauge scale must be positive, got {k}"));
        }
        let mut g = self.clone();
        g.outer *= k;
        Ok(g)
    }

    /// The gauge `t ↦ φ(a·t)`.
    pub fn argument_scaled(&self, a: f64) -> Result<Gauge> {
        if !(a > 0.0 && a.is_finite()) {
            return invalid(format!("argument scale must be positive, got {a}"));
        }
        let mut g = self.clone();
        g.inner *= a;
        Ok(g)
    }

    /// The inverse gauge φ⁻¹ as a gauge in its own right.
    pub fn inverse_gauge(&self) -> Result<Gauge> {
        self.require_smooth()?;
        let (outer, inner) = (self.outer, self.inner);
        let flipped = match self.derivative_monotonicity {
            Monotonicity::Nonincreasing => Monotonicity::Nondecreasing,
            Monotonicity::Nondecreasing => Monotonicity::Nonincreasing,
            m => m,
        };
        match self.kind {
            // (t/τ)⁻¹ = τ s ; (t^q/τ)⁻¹ = s^{1/q} / τ^{-1/q}; outer/inner swap roles
            GaugeKind::Linear { tau } => {
                Ok(Gauge::linear(1.0 / tau)?.argument_scaled(1.0 / outer)?.scaled(1.0 / inner)?)
            }
            GaugeKind::Holder { tau, q } => {
                Ok(Gauge::holder(tau.powf(-1.0 / q), 1.0 / q)?.argument_scaled(1.0 / outer)?.scaled(1.0 / inner)?)
            }
            _ => {
                let fwd = self.clone();
                let inv = self.clone();
                let der = self.clone();
                let convexity = match self.convexity {
                    Convexity::Convex => Convexity::Concave,
                    Convexity::Concave => Convexity::Convex,
                    c => c,
                };
                Ok(Gauge {
                    kind: GaugeKind::Custom {
                        phi: Arc::new(move |s| inv.inverse(s).unwrap_or(f64::NAN)),
                        derivative: Some(Arc::new(move |s| {
                            let t = der.inverse(s).unwrap_or(f64::NAN);
                            der.derivative(t).map(|d| 1.0 / d).unwrap_or(f64::INFINITY)
                        })),
                        inverse: Some(Arc::new(move |t| fwd.eval(t).unwrap_or(f64::NAN))),
                    },
                    outer: 1.0,
                    inner: 1.0,
                    class: GaugeClass::Smooth,
                    derivative_monotonicity: flipped,
                    convexity,
                    flags_sampled: self.flags_sampled,
                })
            }
        }
    }

    fn require_smooth(&self) -> Result<()> {
        if self.class != GaugeClass::Smooth {
            return Err(Error::Unsupported("operation requires a continuously differentiable gauge".into()));
        }
        Ok(())
    }

    fn base_eval(&self, t: f64) -> f64 {
        match &self.kind {
            GaugeKind::Linear { tau } => t / tau,
            GaugeKind::Holder { tau, q } => t.powf(*q) / tau,
            GaugeKind::NuIntegral { nu } => nu.integral(t),
            GaugeKind::Custom { phi, .. } => phi(t),
        }
    }

    fn base_derivative(&self, t: f64) -> Result<f64> {
        match &self.kind {
            GaugeKind::Linear { tau } => Ok(1.0 / tau),
            GaugeKind::Holder { tau, q } => Ok(q * t.powf(q - 1.0) / tau),
            GaugeKind::NuIntegral { nu } => Ok(nu.eval(t)),
            GaugeKind::Custom { derivative: Some(d), .. } => Ok(d(t)),
            GaugeKind::Custom { derivative: None, .. } => {
                Err(Error::Unsupported("custom gauge has no derivative".into()))
            }
        }
    }

    fn base_inverse(&self, s: f64) -> Result<f64> {
        match &self.kind {
            GaugeKind::Linear { tau } => Ok(tau * s),
            GaugeKind::Holder { tau, q } => Ok((tau * s).powf(1.0 / q)),
            GaugeKind::Custom { inverse: Some(inv), .. } => Ok(inv(s)),
            _ => {
                let phi = |t: f64| self.base_eval(t);
                match self.class {
                    GaugeClass::Smooth => {
                        let d = |t: f64| self.base_derivative(t).unwrap_or(f64::NAN);
                        invert_increasing(&phi, Some(&d), s, ROOT_STEPS, ROOT_TOL)
                    }
                    GaugeClass::Continuous => invert_increasing(&phi, None, s, ROOT_STEPS, ROOT_TOL),
                }
            }
        }
    }

    /// φ(t) for finite t ≥ 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("gauge argument must be finite and nonnegative, got {t}"));
        }
        Ok(self.outer * self.base_eval(self.inner * t))
    }

    /// φ extended by 0 on negative arguments and by +∞ at +∞.
    pub fn eval_extended(&self, t: f64) -> f64 {
        if t.is_nan() {
            f64::NAN
        } else if t <= 0.0 {
            0.0
        } else if t == f64::INFINITY {
            f64::INFINITY
        } else {
            self.outer * self.base_eval(self.inner * t)
        }
    }

    /// φ'(t) for t > 0.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.require_smooth()?;
        if t == 0.0 {
            return Err(Error::Pole { t });
        }
        if !(t > 0.0 && t.is_finite()) {
            return invalid(format!("derivative argument must be positive and finite, got {t}"));
        }
        Ok(self.outer * self.inner * self.base_derivative(self.inner * t)?)
    }

    /// φ⁻¹(s) for finite s ≥ 0.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return invalid(format!("inverse argument must be finite and nonnegative, got {s}"));
        }
        Ok(self.base_inverse(s / self.outer)? / self.inner)
    }

    /// φ⁻¹ extended by +∞ at +∞.
    pub fn inverse_extended(&self, s: f64) -> Result<f64> {
        if s == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        self.inverse(s.max(0.0))
    }
}

/// Outcome of the growth test sup φ(Nt) / (t φ'(t)) over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub n: f64,
    #[serde(with = "crate::ext")]
    pub gamma: f64,
    pub finite: bool,
    pub worst_t: f64,
    pub evaluated: usize,
    pub skipped: Vec<f64>,
    pub sampled: bool,
}

pub const GROWTH_CAP: f64 = 1e12;

pub fn check_growth_condition(g: &Gauge, n: f64, t_grid: &[f64]) -> Result<GrowthCheck> {
    g.require_smooth()?;
    if !(n > 0.0 && n.is_finite()) {
        return invalid(format!("growth factor N must be positive, got {n}"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return invalid("growth grid must be nonempty and positive");
    }
    let mut gamma = 0.0f64;
    let mut worst_t = t_grid[0];
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    for &t in t_grid {
        let d = match g.derivative(t) {
            Ok(d) if d.is_finite() && d > 0.0 => d,
            _ => {
                skipped.push(t);
                continue;
            }
        };
        let ratio = g.eval(n * t)? / (t * d);
        evaluated += 1;
        if ratio > gamma || ratio.is_nan() {
            gamma = ratio;
            worst_t = t;
        }
    }
    Ok(GrowthCheck {
        n,
        gamma,
        finite: evaluated > 0 && gamma.is_finite() && gamma < GROWTH_CAP,
        worst_t,
        evaluated,
        skipped,
        sampled: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_integral_matches_trapezoids() {
        let p = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert!((p.integral(1.0) - 1.0).abs() < 1e-15);
        assert!((p.integral(2.0) - 3.0).abs() < 1e-15);
        // extrapolation continues the last (flat) segment
        assert!((p.integral(3.0) - 5.0).abs() < 1e-15);
        assert!((p.integral(0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scaled_holder_keeps_closed_forms() {
        let g = Gauge::holder(1.0, 0.5).unwrap().scaled(3.0).unwrap().argument_scaled(4.0).unwrap();
        // 3·sqrt(4t)
        assert!((g.eval(1.0).unwrap() - 6.0).abs() < 1e-14);
        assert!((g.derivative(1.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((g.inverse(6.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_gauge_of_holder_is_holder() {
        let g = Gauge::holder(2.0, 0.5).unwrap();
        let h = g.inverse_gauge().unwrap();
        for t in [0.1, 1.0, 7.0] {
            assert!((h.eval(g.eval(t).unwrap()).unwrap() - t).abs() < 1e-12 * t.max(1.0));
        }
        assert_eq!(h.derivative_monotonicity(), Monotonicity::Nondecreasing);
    }

    #[test]
    fn continuous_custom_gauge_rejects_derivative() {
        let g = Gauge::custom(Arc::new(|t: f64| t.sqrt()), None, None, None).unwrap();
        assert!(matches!(g.derivative(1.0), Err(Error::Unsupported(_))));
        assert!((g.inverse(3.0).unwrap() - 9.0).abs() < 1e-9);
    }
}
