//! Local, nonlocal and subdifferential slopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{check_point, invalid, Error, Result};
use crate::function::{compose_gauge, Evidence, FunctionModel, SublevelOracle, Tier};
use crate::gauge::{Gauge, Monotonicity};
use crate::geometry::add_scaled;
use crate::grid::Region;
use crate::minnorm::min_dual_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeKind {
    Local,
    Nonlocal,
    FrechetSd,
    ClarkeSd,
    ConvexSd,
}

impl SlopeKind {
    pub fn is_subdifferential(self) -> bool {
        matches!(self, SlopeKind::FrechetSd | SlopeKind::ClarkeSd | SlopeKind::ConvexSd)
    }
}

/// Sampling metadata attached to sampled estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub radii: Vec<f64>,
    pub directions: usize,
    pub candidates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    #[serde(with = "crate::ext")]
    pub value: f64,
    pub kind: SlopeKind,
    pub evidence: Evidence,
    pub schedule: Option<Schedule>,
    /// Set when the value is a sampled supremum, hence a lower bound.
    pub lower_bound: bool,
    #[serde(with = "crate::ext::pair")]
    pub bracket: Option<(f64, f64)>,
}

impl SlopeEstimate {
    fn exact(value: f64, kind: SlopeKind) -> Self {
        SlopeEstimate { value, kind, evidence: Evidence::Exact, schedule: None, lower_bound: false, bracket: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetVariant {
    /// All four slopes.
    Full,
    /// Without the nonlocal slope.
    Circle,
    /// Without the Fréchet subdifferential slope.
    Dagger,
}

/// A collection of admissible slope operators. In R^n every operator is
/// applicable, which the constructor records in `space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeOperatorSet {
    pub variant: SetVariant,
    pub members: Vec<SlopeKind>,
    pub space: String,
}

impl SlopeOperatorSet {
    pub fn new(variant: SetVariant) -> Self {
        let members = match variant {
            SetVariant::Full => vec![SlopeKind::Nonlocal, SlopeKind::Local, SlopeKind::ClarkeSd, SlopeKind::FrechetSd],
            SetVariant::Circle => vec![SlopeKind::Local, SlopeKind::ClarkeSd, SlopeKind::FrechetSd],
            SetVariant::Dagger => vec![SlopeKind::Nonlocal, SlopeKind::Local, SlopeKind::ClarkeSd],
        };
        SlopeOperatorSet { variant, members, space: "R^n (Asplund)".into() }
    }

    /// The convex subdifferential slope coincides with the Fréchet and Clarke
    /// ones for convex functions, so it belongs wherever either does.
    pub fn contains(&self, kind: SlopeKind) -> bool {
        match kind {
            SlopeKind::ConvexSd => {
                self.members.contains(&SlopeKind::FrechetSd) || self.members.contains(&SlopeKind::ClarkeSd)
            }
            k => self.members.contains(&k),
        }
    }
}

fn finite_value(f: &FunctionModel, x: &[f64]) -> Result<f64> {
    let v = f.evaluate(x)?;
    Ok(v)
}

/// Points `x + r·d` used by the sampled local slope, radius-major.
pub fn local_samples(x: &[f64], cfg: &Config) -> Vec<Vec<f64>> {
    let dirs = cfg.directions(x.len());
    let mut out = Vec::with_capacity(dirs.len() * cfg.slope_radii.len());
    for &r in &cfg.slope_radii {
        for d in &dirs {
            out.push(add_scaled(x, r, d));
        }
    }
    out
}

fn hull_slope(f: &FunctionModel, x: &[f64], kind: SlopeKind, cfg: &Config) -> Result<SlopeEstimate> {
    let gens = f.active_gradients(x, cfg.activity_tol)?;
    if gens.is_empty() {
        return Err(Error::Internal("empty active set".into()));
    }
    let m = min_dual_norm(&gens, cfg.norm)?;
    Ok(SlopeEstimate::exact(m.norm, kind))
}

/// `limsup_{u→x} [f(x) − f(u)]₊ / d(u, x)`.
///
/// Exact for `max_affine` (min-norm of the active gradients); otherwise the
/// largest difference quotient over the smallest radii of the schedule.
pub fn local_slope(f: &FunctionModel, x: &[f64], cfg: &Config) -> Result<SlopeEstimate> {
    check_point(x, f.dim())?;
    let fx = finite_value(f, x)?;
    if fx == f64::INFINITY {
        return Ok(SlopeEstimate::exact(f64::INFINITY, SlopeKind::Local));
    }
    if f.tier() == Tier::MaxAffine {
        return hull_slope(f, x, SlopeKind::Local, cfg);
    }
    let dirs = cfg.directions(x.len());
    let per_radius: Vec<f64> = cfg
        .slope_radii
        .par_iter()
        .map(|&r| {
            dirs.iter()
                .map(|d| {
                    let u = add_scaled(x, r, d);
                    let du = cfg.norm.dist(&u, x);
                    let fu = f.value(&u);
                    if fu.is_nan() || du == 0.0 {
                        0.0
                    } else {
                        (fx - fu).max(0.0) / du
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let tail = cfg.slope_tail.clamp(1, per_radius.len().max(1));
    let last = &per_radius[per_radius.len().saturating_sub(tail)..];
    let hi = last.iter().copied().fold(0.0, f64::max);
    let lo = last.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SlopeEstimate {
        value: hi,
        kind: SlopeKind::Local,
        evidence: Evidence::Sampled,
        schedule: Some(Schedule {
            radii: cfg.slope_radii.clone(),
            directions: dirs.len(),
            candidates: 0,
            seed: cfg.seed,
        }),
        lower_bound: false,
        bracket: Some((lo, hi)),
    })
}

pub(crate) fn default_region(f: &FunctionModel, x: &[f64]) -> Result<Region> {
    match f.domain() {
        Some(r) => Ok(r.clone()),
        None => Region::cube(x, 1.0),
    }
}

/// `sup_{u≠x} [f(x) − f₊(u)]₊ / d(u, x)`.
///
/// Exact on `max_affine` (where it equals the local slope when `f(x) > 0`);
/// otherwise a supremum over a grid on `region`, the local-slope samples and,
/// for `max_smooth`, the projection of `x` onto `[f ≤ 0]`.
pub fn nonlocal_slope(f: &FunctionModel, x: &[f64], region: Option<&Region>, cfg: &Config) -> Result<SlopeEstimate> {
    check_point(x, f.dim())?;
    let fx = finite_value(f, x)?;
    if fx == f64::INFINITY {
        return Ok(SlopeEstimate::exact(f64::INFINITY, SlopeKind::Nonlocal));
    }
    if fx <= 0.0 {
        return Ok(SlopeEstimate::exact(0.0, SlopeKind::Nonlocal));
    }
    if f.tier() == Tier::MaxAffine {
        let mut s = hull_slope(f, x, SlopeKind::Nonlocal, cfg)?;
        s.kind = SlopeKind::Nonlocal;
        return Ok(s);
    }
    let region = match region {
        Some(r) => r.clone(),
        None => default_region(f, x)?,
    };
    if region.dim() != f.dim() {
        return invalid("candidate region dimension mismatch");
    }
    let mut cands = region.grid(cfg.nonlocal_resolution(f.dim()));
    cands.extend(local_samples(x, cfg));
    if f.tier() == Tier::MaxSmooth {
        let oracle = SublevelOracle::new(
            f,
            0.0,
            Some(region.clone()),
            Some(cfg.nonlocal_resolution(f.dim())),
            cfg.bisection_depth,
            cfg.norm,
        )?;
        if let Ok(d) = oracle.distance(x) {
            if let Some(w) = d.witness {
                cands.push(w);
            }
        }
    }
    cands.retain(|u| u.as_slice() != x);
    if cands.is_empty() {
        return invalid("no nonlocal slope candidates distinct from x");
    }
    let best = cands
        .par_iter()
        .map(|u| {
            let fu = f.value(u);
            if !fu.is_finite() {
                return 0.0;
            }
            (fx - fu.max(0.0)).max(0.0) / cfg.norm.dist(u, x)
        })
        .reduce(|| 0.0, f64::max);
    Ok(SlopeEstimate {
        value: best,
        kind: SlopeKind::Nonlocal,
        evidence: Evidence::Sampled,
        schedule: Some(Schedule {
            radii: cfg.slope_radii.clone(),
            directions: cfg.directions(f.dim()).len(),
            candidates: cands.len(),
            seed: cfg.seed,
        }),
        lower_bound: true,
        bracket: None,
    })
}

/// Distance from 0 to the hull of the active gradients.
///
/// On `max_smooth` the hull is the Clarke subdifferential and, for these
/// max-type functions, also the Fréchet one, so both kinds return the same
/// value. The convex kind additionally requires a convex model.
pub fn subdiff_slope(f: &FunctionModel, x: &[f64], which: SlopeKind, cfg: &Config) -> Result<SlopeEstimate> {
    check_point(x, f.dim())?;
    if !which.is_subdifferential() {
        return invalid(format!("{which:?} is not a subdifferential slope"));
    }
    if !f.is_exact_tier() {
        return Err(Error::UnsupportedTier(f.tier().to_string()));
    }
    if which == SlopeKind::ConvexSd && !f.is_convex() {
        return Err(Error::Unsupported("convex subdifferential of a nonconvex model".into()));
    }
    hull_slope(f, x, which, cfg)
}

/// Dispatches to the slope of the requested kind.
pub fn slope(
    f: &FunctionModel,
    x: &[f64],
    kind: SlopeKind,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<SlopeEstimate> {
    match kind {
        SlopeKind::Local => local_slope(f, x, cfg),
        SlopeKind::Nonlocal => nonlocal_slope(f, x, region, cfg),
        k => subdiff_slope(f, x, k, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRule {
    /// Slope of the composition.
    pub lhs: SlopeEstimate,
    /// `φ'(f(x))` times the slope of `f`.
    #[serde(with = "crate::ext")]
    pub rhs: f64,
    pub inner: SlopeEstimate,
}

fn chain_value(g: &Gauge, f: &FunctionModel, x: &[f64]) -> Result<f64> {
    if !g.is_smooth() {
        return Err(Error::Unsupported("chain rules need a continuously differentiable gauge".into()));
    }
    let fx = f.evaluate(x)?;
    if fx == 0.0 {
        return Err(Error::Pole { t: 0.0 });
    }
    if !(fx > 0.0 && fx.is_finite()) {
        return Err(Error::Precondition(format!("chain rule needs 0 < f(x) < ∞, got {fx}")));
    }
    Ok(fx)
}

/// Local slopes of `φ∘f` and `f` at a point with `0 < f(x) < ∞`.
pub fn chain_rule_local(g: &Gauge, f: &FunctionModel, x: &[f64], cfg: &Config) -> Result<ChainRule> {
    let fx = chain_value(g, f, x)?;
    let inner = local_slope(f, x, cfg)?;
    let lhs = local_slope(&compose_gauge(g, f), x, cfg)?;
    Ok(ChainRule { lhs, rhs: g.derivative(fx)? * inner.value, inner })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// φ' nonincreasing: slope of φ∘f ≥ φ'(f(x))·slope of f.
    LhsAtLeastRhs,
    /// φ' nondecreasing: the reverse inequality.
    LhsAtMostRhs,
    /// φ linear: equality.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalChain {
    pub lhs: SlopeEstimate,
    #[serde(with = "crate::ext")]
    pub rhs: f64,
    pub inner: SlopeEstimate,
    pub direction: Direction,
}

/// Nonlocal slopes of `φ∘f` and `φ'(f(x))·f`, with the inequality direction
/// fixed by the monotonicity of φ'.
pub fn chain_rule_nonlocal_bound(
    g: &Gauge,
    f: &FunctionModel,
    x: &[f64],
    region: Option<&Region>,
    cfg: &Config,
) -> Result<NonlocalChain> {
    let fx = chain_value(g, f, x)?;
    let direction = match g.derivative_monotonicity() {
        Monotonicity::Constant => Direction::Equal,
        Monotonicity::Nonincreasing => Direction::LhsAtLeastRhs,
        Monotonicity::Nondecreasing => Direction::LhsAtMostRhs,
        m => return Err(Error::Unsupported(format!("no nonlocal chain inequality when φ' is {m:?}"))),
    };
    let inner = nonlocal_slope(f, x, region, cfg)?;
    let lhs = nonlocal_slope(&compose_gauge(g, f), x, region, cfg)?;
    Ok(NonlocalChain { lhs, rhs: g.derivative(fx)? * inner.value, inner, direction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decreasing,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellValue {
    pub k: u32,
    #[serde(with = "crate::ext::opt")]
    pub min: Option<f64>,
    pub samples: usize,
}

/// Liminf estimate over shells approaching `x̄` from `[f > 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterEstimate {
    #[serde(with = "crate::ext")]
    pub value: f64,
    pub trend: Trend,
    pub per_shell: Vec<ShellValue>,
    /// No sample had `f > 0`; the value is `+∞` by the `inf ∅` convention.
    pub isolated_from_above: bool,
    pub evidence: Evidence,
}

/// Points in shell `k`: `2^-(k+1) < |x − x̄| ≤ 2^-k` with `0 < f(x) < 2^(-k·band)`.
pub(crate) fn shell_points(f: &FunctionModel, x_bar: &[f64], k: u32, cfg: &Config) -> Vec<(Vec<f64>, f64)> {
    let outer = 0.5f64.powi(k as i32);
    let band = 0.5f64.powf(k as f64 * cfg.band_exponent);
    let dirs = cfg.directions(x_bar.len());
    let m = cfg.shell_radii.max(1);
    let mut out = Vec::new();
    for j in 0..m {
        let rho = outer * (1.0 - 0.5 * j as f64 / m as f64);
        for d in &dirs {
            let len = cfg.norm.norm(d);
            let x = add_scaled(x_bar, rho / len, d);
            let v = f.value(&x);
            if v > 0.0 && v < band {
                out.push((x, v));
            }
        }
    }
    out
}

/// Shell-wise minima of `metric` over points approaching `x̄` with `f ↓ 0`;
/// reports the minimum over the last three nonempty shells.
pub(crate) fn outer_liminf<M>(f: &FunctionModel, x_bar: &[f64], cfg: &Config, metric: M) -> Result<OuterEstimate>
where
    M: Fn(&[f64], f64) -> Result<f64> + Sync,
{
    let mut per_shell = Vec::new();
    for k in cfg.shell_first..=cfg.shell_last {
        let pts = shell_points(f, x_bar, k, cfg);
        let vals: Vec<Result<f64>> = pts.par_iter().map(|(x, v)| metric(x, *v)).collect();
        let mut min: Option<f64> = None;
        for v in vals {
            let v = v?;
            if !v.is_nan() {
                min = Some(min.map_or(v, |m: f64| m.min(v)));
            }
        }
        per_shell.push(ShellValue { k, min, samples: pts.len() });
    }
    let tail: Vec<f64> = per_shell.iter().filter_map(|s| s.min).collect();
    if tail.is_empty() {
        return Ok(OuterEstimate {
            value: f64::INFINITY,
            trend: Trend::Stable,
            per_shell,
            isolated_from_above: true,
            evidence: Evidence::Sampled,
        });
    }
    let last3 = &tail[tail.len().saturating_sub(3)..];
    let value = last3.iter().copied().fold(f64::INFINITY, f64::min);
    let trend =
        if last3.len() >= 2 && last3[last3.len() - 1] < 0.95 * last3[0] { Trend::Decreasing } else { Trend::Stable };
    Ok(OuterEstimate { value, trend, per_shell, isolated_from_above: false, evidence: Evidence::Sampled })
}

/// Strict outer slope: liminf of the chosen slope as `x → x̄` with `f(x) ↓ 0`.
pub fn strict_outer_slope(f: &FunctionModel, x_bar: &[f64], kind: SlopeKind, cfg: &Config) -> Result<OuterEstimate> {
    check_point(x_bar, f.dim())?;
    let f0 = f.evaluate(x_bar)?;
    if f0 > 0.0 {
        return Err(Error::Precondition(format!("strict outer slope needs f(x̄) ≤ 0, got {f0}")));
    }
    let region = default_region(f, x_bar)?;
    outer_liminf(f, x_bar, cfg, |x, _| Ok(slope(f, x, kind, Some(&region), cfg)?.value))
}
