//! Linear and nonlinear error bounds: direct checks, moduli, sufficient and
//! necessary slope conditions, and perturbed bounds.
//!
//! A τ-error bound at `x̄` with `δ` and `μ` asks `τ d(x, [f ≤ 0]) ≤ f(x)` for
//! all `x ∈ B_δ(x̄)` with `0 < f(x) < μ`. The nonlinear forms replace the
//! inequality by `d ≤ φ(f)`, `ψ(d) ≤ f` or `∫₀^d ν ≤ f`.
//!
//! Sweeps run over a grid of the ball (plus, for `max_affine` models, points
//! on the faces where several pieces tie). Per-point quantities are exact on
//! the structured tiers and sampled on black boxes; the verdict's evidence
//! grade records which.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{check_point, invalid, Error, Result};
use crate::function::{compose_gauge, AffinePiece, Evidence, FunctionModel, SublevelDistance, SublevelOracle};
use crate::gauge::{Gauge, GaugeKind, GaugeSummary};
use crate::grid::{ball_filter, Region};
use crate::slopes::{outer_liminf, slope, OuterEstimate, SetVariant, SlopeKind, SlopeOperatorSet};

/// The inequality being certified.
#[derive(Clone)]
pub enum BoundForm {
    /// `τ d ≤ f`.
    Linear { tau: f64 },
    /// `d ≤ φ(f)`.
    Gauge(Gauge),
    /// `ψ(d) ≤ f`.
    Psi(Gauge),
    /// `∫₀^d ν ≤ f`; the gauge must be of the ν-integral kind.
    NuIntegral(Gauge),
}

impl std::fmt::Debug for BoundForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl BoundForm {
    pub fn label(&self) -> String {
        match self {
            BoundForm::Linear { tau } => format!("linear(tau={tau})"),
            BoundForm::Gauge(g) => format!("gauge({})", g.label()),
            BoundForm::Psi(g) => format!("psi({})", g.label()),
            BoundForm::NuIntegral(g) => format!("nu_integral({})", g.label()),
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            BoundForm::Linear { tau } => Some(*tau),
            _ => None,
        }
    }

    pub fn gauge(&self) -> Option<&Gauge> {
        match self {
            BoundForm::Linear { .. } => None,
            BoundForm::Gauge(g) | BoundForm::Psi(g) | BoundForm::NuIntegral(g) => Some(g),
        }
    }

    /// The equivalent `d ≤ φ(f)` gauge.
    pub fn phi(&self) -> Result<Gauge> {
        match self {
            BoundForm::Linear { tau } => Gauge::linear(*tau),
            BoundForm::Gauge(g) => Ok(g.clone()),
            BoundForm::Psi(g) | BoundForm::NuIntegral(g) => g.inverse_gauge(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BoundForm::Linear { tau } if !(*tau > 0.0 && tau.is_finite()) => {
                invalid(format!("τ must be positive and finite, got {tau}"))
            }
            BoundForm::NuIntegral(g) if !matches!(g.kind(), GaugeKind::NuIntegral { .. }) => {
                invalid("the ν-integral form needs a ν-integral gauge")
            }
            _ => Ok(()),
        }
    }

    fn direct_condition(&self) -> ConditionId {
        match self {
            BoundForm::Linear { .. } => ConditionId::DirectLinear,
            BoundForm::Gauge(_) => ConditionId::DirectGauge,
            BoundForm::Psi(_) => ConditionId::DirectPsi,
            BoundForm::NuIntegral(_) => ConditionId::DirectNuIntegral,
        }
    }

    /// Both sides of the bound `lhs ≤ rhs` at a point with value `fx` and
    /// distance `d`.
    fn sides(&self, fx: f64, d: f64) -> (f64, f64) {
        match self {
            BoundForm::Linear { tau } => (if d == 0.0 { 0.0 } else { tau * d }, fx),
            BoundForm::Gauge(g) => (d, g.eval_extended(fx)),
            BoundForm::Psi(g) | BoundForm::NuIntegral(g) => (g.eval_extended(d), fx),
        }
    }

    fn inequality(&self) -> &'static str {
        match self {
            BoundForm::Linear { .. } => "tau*d(x,[f<=0]) <= f(x)",
            BoundForm::Gauge(_) => "d(x,[f<=0]) <= phi(f(x))",
            BoundForm::Psi(_) => "psi(d(x,[f<=0])) <= f(x)",
            BoundForm::NuIntegral(_) => "int_0^d nu <= f(x)",
        }
    }
}

/// Parameters of an error bound at `anchor`.
#[derive(Debug, Clone)]
pub struct ErrorBoundSpec {
    pub form: BoundForm,
    pub anchor: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl ErrorBoundSpec {
    /// A spec with `α = 1`. Requires `f(x̄) ≤ 0` unless `δ = +∞`.
    pub fn new(f: &FunctionModel, form: BoundForm, anchor: Vec<f64>, delta: f64, mu: f64) -> Result<Self> {
        let spec = ErrorBoundSpec { form, anchor, delta, mu, alpha: 1.0 };
        spec.validate(f)?;
        Ok(spec)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("α must lie in ]0, 1], got {alpha}"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ErrorBoundSpec { delta, ..self.clone() }
    }

    pub fn with_form(&self, form: BoundForm) -> Self {
        ErrorBoundSpec { form, ..self.clone() }
    }

    /// `max{α, 1 − α}`.
    pub fn beta(&self) -> f64 {
        self.alpha.max(1.0 - self.alpha)
    }

    pub fn validate(&self, f: &FunctionModel) -> Result<()> {
        check_point(&self.anchor, f.dim())?;
        self.form.validate()?;
        if !(self.delta > 0.0) {
            return invalid(format!("δ must be positive, got {}", self.delta));
        }
        if !(self.mu > 0.0) {
            return invalid(format!("μ must be positive, got {}", self.mu));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("α must lie in ]0, 1], got {}", self.alpha));
        }
        if self.delta.is_finite() {
            let f0 = f.evaluate(&self.anchor)?;
            if f0 > 0.0 {
                return Err(Error::Precondition(format!(
                    "a local bound needs f(x̄) ≤ 0 (got {f0}); use δ = +∞ for a global one"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn parameters(&self) -> Parameters {
        Parameters {
            form: self.form.label(),
            tau: self.form.tau(),
            gauge: self.form.gauge().map(|g| g.summary()),
            anchor: self.anchor.clone(),
            delta: self.delta,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta(),
            slope: None,
            mode: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

/// Which check produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    DirectLinear,
    DirectGauge,
    DirectPsi,
    DirectNuIntegral,
    FixedPointSlope,
    FixedPointFrechet,
    SufficientLinear,
    SufficientCompositeNonlocal,
    SufficientGaugeSlope,
    SufficientGaugeAlternative,
    SufficientPsiComposite,
    SufficientPsiValue,
    SufficientPsiDistance,
    SufficientNuIntegral,
    NecessaryLinear,
    NecessaryValueBased,
    NecessaryDistanceBased,
    NecessaryNonlinear,
    PerturbedDirect,
    PerturbedSufficient,
    PerturbedNecessary,
    Subregularity,
    GraphSubregularity,
    Calmness,
    MappingSufficient,
    MappingSufficientAlternative,
    LevelMappingCalmness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Coefficients evaluated at the function value.
    Conventional,
    /// Coefficients evaluated at the distance to the sublevel set.
    Alternative,
    /// Both families (necessary conditions only).
    Both,
}

/// A point where an inequality `lhs ≤ rhs` was checked and failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    #[serde(with = "crate::ext")]
    pub f_value: f64,
    #[serde(with = "crate::ext")]
    pub distance: f64,
    #[serde(with = "crate::ext")]
    pub lhs: f64,
    #[serde(with = "crate::ext")]
    pub rhs: f64,
    /// Sublevel `c` for perturbed bounds.
    #[serde(with = "crate::ext::opt")]
    pub level: Option<f64>,
    pub inequality: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub form: String,
    #[serde(with = "crate::ext::opt")]
    pub tau: Option<f64>,
    pub gauge: Option<GaugeSummary>,
    pub anchor: Vec<f64>,
    #[serde(with = "crate::ext")]
    pub delta: f64,
    #[serde(with = "crate::ext")]
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub slope: Option<SlopeKind>,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepInfo {
    pub region: Region,
    pub resolution: usize,
    pub grid_points: usize,
    /// Extra points on faces where several affine pieces tie.
    pub face_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundVerdict {
    pub status: Status,
    pub condition: ConditionId,
    pub evidence: Evidence,
    /// Radius certified by a sufficient condition.
    #[serde(with = "crate::ext::opt")]
    pub certified_radius: Option<f64>,
    /// Violation of the bound itself; present iff the status is `fails`.
    pub witness: Option<Witness>,
    /// Point where a sufficient or necessary condition failed.
    pub counterexample: Option<Witness>,
    pub parameters: Parameters,
    pub sweep: Option<SweepInfo>,
    /// Points at which the inequality or condition was evaluated.
    pub checked: usize,
    /// Points with `0 < f ≤ value_floor`, excluded from coefficient checks.
    pub below_floor: usize,
    /// `δ = +∞` was interpreted as the search box.
    pub global_within_box: bool,
    pub cross_check: Option<Box<ErrorBoundVerdict>>,
    /// A sufficient condition and the direct check disagree, or a necessary
    /// condition failed although the bound holds.
    pub inconsistency: bool,
    /// Largest `|rhs − lhs|` over checked points, reported by checks whose
    /// inequality is expected to be tight.
    #[serde(with = "crate::ext::opt")]
    pub max_equality_gap: Option<f64>,
    pub notes: Vec<String>,
}

impl ErrorBoundVerdict {
    pub(crate) fn new(condition: ConditionId, parameters: Parameters) -> Self {
        ErrorBoundVerdict {
            status: Status::Inconclusive,
            condition,
            evidence: Evidence::Exact,
            certified_radius: None,
            witness: None,
            counterexample: None,
            parameters,
            sweep: None,
            checked: 0,
            below_floor: 0,
            global_within_box: false,
            cross_check: None,
            inconsistency: false,
            max_equality_gap: None,
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }
}

// ---------------------------------------------------------------------------
// Sweeps

pub(crate) struct Sweep {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub info: SweepInfo,
}

/// Box searched for sublevel points and sweep candidates.
pub(crate) fn search_region(f: &FunctionModel, anchor: &[f64], delta: f64, region: Option<&Region>) -> Result<Region> {
    if let Some(r) = region {
        if r.dim() != f.dim() {
            return invalid("region dimension mismatch");
        }
        return Ok(r.clone());
    }
    if let Some(d) = f.domain() {
        return Ok(d.clone());
    }
    Region::cube(anchor, if delta.is_finite() { delta } else { 1.0 })
}

fn quantize(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e11).round() as i64).collect()
}

/// Points on faces of a `max_affine` function near the given grid points:
/// each grid point is projected onto the affine sets where subsets of its
/// nearly active pieces tie, and kept if those pieces stay active.
pub(crate) fn face_points(pieces: &[AffinePiece], grid: &[Vec<f64>], spacing: f64) -> Vec<Vec<f64>> {
    if pieces.len() < 2 || grid.is_empty() {
        return Vec::new();
    }
    let n = grid[0].len();
    let mut spread = 0.0f64;
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let d: f64 = pieces[i].a.iter().zip(&pieces[j].a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    let gap = spacing * spread * (n as f64).sqrt() + 1e-12;
    let per_point: Vec<Vec<Vec<f64>>> = grid
        .par_iter()
        .map(|u| {
            let vals: Vec<f64> = pieces.iter().map(|p| p.eval(u)).collect();
            let fu = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let mut near: Vec<usize> = (0..pieces.len()).filter(|&i| vals[i] >= fu - gap).collect();
            if near.len() < 2 {
                return Vec::new();
            }
            near.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
            near.truncate(6);
            let mut out = Vec::new();
            let max_size = (n + 1).min(near.len());
            for mask in 1u32..(1 << near.len()) {
                let subset: Vec<usize> = (0..near.len()).filter(|b| mask & (1 << b) != 0).map(|b| near[b]).collect();
                if subset.len() < 2 || subset.len() > max_size {
                    continue;
                }
                if let Some(p) = project_to_tie(pieces, &subset, u) {
                    let fp = pieces.iter().map(|q| q.eval(&p)).fold(f64::NEG_INFINITY, f64::max);
                    let tol = 1e-9 * fp.abs().max(1.0);
                    if subset.iter().all(|&i| pieces[i].eval(&p) >= fp - tol) {
                        out.push(p);
                    }
                }
            }
            out
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in per_point.into_iter().flatten() {
        if seen.insert(quantize(&p)) {
            out.push(p);
        }
    }
    out
}

/// Euclidean projection of `u` onto `{x : ⟨a_i − a_s, x⟩ = b_s − b_i, i ∈ S}`.
fn project_to_tie(pieces: &[AffinePiece], subset: &[usize], u: &[f64]) -> Option<Vec<f64>> {
    let n = u.len();
    let s = subset[0];
    let m = subset.len() - 1;
    let a = DMatrix::from_fn(m, n, |r, c| pieces[subset[r + 1]].a[c] - pieces[s].a[c]);
    let rhs = DVector::from_fn(m, |r, _| pieces[s].b - pieces[subset[r + 1]].b);
    let uv = DVector::from_column_slice(u);
    let resid = &rhs - &a * &uv;
    let gram = &a * a.transpose();
    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    if smax == 0.0 || svd.singular_values.iter().any(|v| *v <= 1e-12 * smax) {
        return None;
    }
    let y = svd.solve(&resid, 1e-14).ok()?;
    let p = uv + a.transpose() * y;
    let check = &a * &p - &rhs;
    if check.iter().any(|v| v.abs() > 1e-9 * (1.0 + rhs.amax())) || p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(p.iter().copied().collect())
}

/// Grid of `search ∩ B(center, radius)` plus face points for `max_affine`.
pub(crate) fn sweep(f: &FunctionModel, center: &[f64], radius: f64, search: &Region, cfg: &Config) -> Sweep {
    let resolution = cfg.resolution(f.dim());
    let clipped = search.clip_to_ball(center, radius);
    let (mut points, spacing) = match &clipped {
        Some(b) => (ball_filter(b.grid(resolution), center, radius, cfg.norm), b.spacing(resolution)),
        None => (Vec::new(), 0.0),
    };
    let grid_points = points.len();
    let mut faces = Vec::new();
    if let Some(p) = f.face_pieces() {
        let mut seen: BTreeSet<Vec<i64>> = points.iter().map(|p| quantize(p)).collect();
        for q in face_points(p, &points, spacing) {
            let inside = search.contains(&q) && (!radius.is_finite() || cfg.norm.dist(&q, center) < radius);
            if inside && seen.insert(quantize(&q)) {
                faces.push(q);
            }
        }
    }
    let face_count = faces.len();
    points.extend(faces);
    let values = f.values(&points);
    Sweep {
        points,
        values,
        info: SweepInfo { region: search.clone(), resolution, grid_points, face_points: face_count },
    }
}

fn oracle<'a>(
    f: &'a FunctionModel,
    level: f64,
    search: &Region,
    cfg: &Config,
    resolution: usize,
) -> Result<SublevelOracle<'a>> {
    SublevelOracle::new(f, level, Some(search.clone()), Some(resolution), cfg.bisection_depth, cfg.norm)
}

fn distances(oracle: &SublevelOracle, points: &[&Vec<f64>]) -> Result<Vec<SublevelDistance>> {
    points.par_iter().map(|p| oracle.distance(p)).collect()
}

// ---------------------------------------------------------------------------
// Direct checks

struct DirectOutcome {
    checked: usize,
    evidence: Evidence,
    witness: Option<Witness>,
    unconfirmed: usize,
}

/// Checks `lhs ≤ rhs` from `sides(f(x), d(x, [f ≤ level]))` on sweep points
/// with `level < f < μ`. Sampled violations are re-checked with a finer
/// local search before being reported.
fn direct_scan(
    f: &FunctionModel,
    sweep: &Sweep,
    search: &Region,
    level: f64,
    mu: f64,
    cfg: &Config,
    sides: &(dyn Fn(f64, f64) -> (f64, f64) + Sync),
    inequality: &str,
) -> Result<DirectOutcome> {
    let idx: Vec<usize> = (0..sweep.points.len())
        .filter(|&i| {
            let v = sweep.values[i];
            v > level && v < mu && v.is_finite()
        })
        .collect();
    let resolution = sweep.info.resolution;
    let orc = oracle(f, level, search, cfg, resolution)?;
    let pts: Vec<&Vec<f64>> = idx.iter().map(|&i| &sweep.points[i]).collect();
    let dists = distances(&orc, &pts)?;
    let mut evidence = if f.is_exact_tier() { Evidence::Exact } else { Evidence::Sampled };
    let mut violations: Vec<(f64, usize)> = Vec::new();
    for (k, d) in dists.iter().enumerate() {
        evidence = evidence.and(d.evidence());
        let fx = sweep.values[idx[k]];
        let (lhs, rhs) = sides(fx, d.value);
        if !cfg.le(lhs, rhs) {
            violations.push((lhs - rhs, k));
        }
    }
    violations.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mk = |k: usize, d: &SublevelDistance, lhs: f64, rhs: f64| Witness {
        point: pts[k].clone(),
        f_value: sweep.values[idx[k]],
        distance: d.value,
        lhs,
        rhs,
        level: if level == 0.0 { None } else { Some(level) },
        inequality: inequality.to_string(),
    };
    let mut out = DirectOutcome { checked: idx.len(), evidence, witness: None, unconfirmed: 0 };
    if violations.is_empty() {
        return Ok(out);
    }
    if dists.iter().all(|d| d.evidence() == Evidence::Exact) {
        let k = violations[0].1;
        let (lhs, rhs) = sides(sweep.values[idx[k]], dists[k].value);
        out.witness = Some(mk(k, &dists[k], lhs, rhs));
        return Ok(out);
    }
    let cap = (2_000_000f64).powf(1.0 / f.dim() as f64).floor() as usize;
    for &(_, k) in violations.iter().take(8) {
        let x = pts[k];
        let mut d = dists[k].clone();
        let mut confirmed = true;
        for r in 1..=cfg.refinements {
            let res = (resolution << r).min(cap).max(resolution);
            let local = if d.value.is_finite() {
                Region::cube(x, d.value * 1.001 + search.spacing(resolution))
                    .ok()
                    .and_then(|c| intersect(&c, search))
                    .unwrap_or_else(|| search.clone())
            } else {
                search.clone()
            };
            let refined =
                SublevelOracle::new(f, level, Some(local), Some(res), cfg.bisection_depth, cfg.norm)?.distance(x)?;
            if refined.value < d.value {
                d = refined;
            }
            let (lhs, rhs) = sides(sweep.values[idx[k]], d.value);
            if cfg.le(lhs, rhs) {
                confirmed = false;
                break;
            }
        }
        if confirmed {
            let (lhs, rhs) = sides(sweep.values[idx[k]], d.value);
            out.witness = Some(mk(k, &d, lhs, rhs));
            return Ok(out);
        }
        out.unconfirmed += 1;
    }
    Ok(out)
}

pub(crate) fn intersect(a: &Region, b: &Region) -> Option<Region> {
    let lo: Vec<f64> = a.lo.iter().zip(&b.lo).map(|(x, y)| x.max(*y)).collect();
    let hi: Vec<f64> = a.hi.iter().zip(&b.hi).map(|(x, y)| x.min(*y)).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
        return None;
    }
    Region::new(lo, hi).ok()
}

fn finish_direct(mut v: ErrorBoundVerdict, out: DirectOutcome) -> ErrorBoundVerdict {
    v.checked = out.checked;
    v.evidence = v.evidence.and(out.evidence);
    if let Some(w) = out.witness {
        v.status = Status::Fails;
        v.witness = Some(w);
    } else if out.unconfirmed > 0 {
        v.status = Status::Inconclusive;
        v.notes.push(format!("{} sampled violations vanished under refinement", out.unconfirmed));
    } else {
        v.status = Status::Holds;
    }
    v
}

/// Checks the bound of `spec` directly on a grid of `B_δ(x̄) ∩ [0 < f < μ]`.
pub fn check_error_bound_direct(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    let search = search_region(f, &spec.anchor, spec.delta, region)?;
    let sw = sweep(f, &spec.anchor, spec.delta, &search, cfg);
    direct_on(f, spec, &search, &sw, cfg)
}

fn direct_on(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    search: &Region,
    sw: &Sweep,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    let form = spec.form.clone();
    let sides = move |fx: f64, d: f64| form.sides(fx, d);
    let out = direct_scan(f, sw, search, 0.0, spec.mu, cfg, &sides, spec.form.inequality())?;
    let mut v = ErrorBoundVerdict::new(spec.form.direct_condition(), spec.parameters());
    v.sweep = Some(sw.info.clone());
    v.global_within_box = !spec.delta.is_finite();
    Ok(finish_direct(v, out))
}

// ---------------------------------------------------------------------------
// Moduli

fn require_anchor_feasible(f: &FunctionModel, x_bar: &[f64]) -> Result<()> {
    check_point(x_bar, f.dim())?;
    let f0 = f.evaluate(x_bar)?;
    if f0 > 0.0 {
        return Err(Error::Precondition(format!("needs f(x̄) ≤ 0, got {f0}")));
    }
    Ok(())
}

/// `liminf φ(f(x)) / d(x, [f ≤ 0])` as `x → x̄` with `f(x) > 0`; the linear
/// modulus when `gauge` is `None`.
pub fn estimate_modulus(
    f: &FunctionModel,
    x_bar: &[f64],
    gauge: Option<&Gauge>,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<OuterEstimate> {
    require_anchor_feasible(f, x_bar)?;
    let search = search_region(f, x_bar, 1.0, region)?;
    let orc = oracle(f, 0.0, &search, cfg, cfg.resolution(f.dim()))?;
    let est = outer_liminf(f, x_bar, cfg, |x, v| {
        let d = orc.distance(x)?;
        let num = match gauge {
            Some(g) => g.eval(v)?,
            None => v,
        };
        Ok(num / d.value)
    })?;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderOrderReport {
    pub q: f64,
    /// `liminf f^q / d`.
    pub order_modulus: OuterEstimate,
    /// `liminf f^(q−1) |∂f|`.
    pub value_weighted: OuterEstimate,
    /// `liminf d^(1−1/q) |∂f|`.
    pub distance_weighted: OuterEstimate,
    pub positive: [bool; 3],
    /// All three positive or all three zero.
    pub consistent: bool,
    pub zero_threshold: f64,
}

/// The three equivalent order-q quantities of a convex function at `x̄`.
pub fn holder_order_analysis(
    f: &FunctionModel,
    x_bar: &[f64],
    q: f64,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<HolderOrderReport> {
    if !(q > 0.0 && q <= 1.0) {
        return invalid(format!("order q must lie in ]0, 1], got {q}"));
    }
    if !(f.is_exact_tier() && f.is_convex()) {
        return Err(Error::Precondition("order analysis needs a convex model with exact subdifferentials".into()));
    }
    require_anchor_feasible(f, x_bar)?;
    let search = search_region(f, x_bar, 1.0, region)?;
    let orc = oracle(f, 0.0, &search, cfg, cfg.resolution(f.dim()))?;
    let sd = |x: &[f64]| -> Result<f64> { Ok(slope(f, x, SlopeKind::ConvexSd, None, cfg)?.value) };
    let order_modulus = outer_liminf(f, x_bar, cfg, |x, v| Ok(v.powf(q) / orc.distance(x)?.value))?;
    let value_weighted = outer_liminf(f, x_bar, cfg, |x, v| Ok(v.powf(q - 1.0) * sd(x)?))?;
    let distance_weighted =
        outer_liminf(f, x_bar, cfg, |x, _| Ok(orc.distance(x)?.value.powf(1.0 - 1.0 / q) * sd(x)?))?;
    let z = cfg.zero_threshold;
    let positive = [order_modulus.value > z, value_weighted.value > z, distance_weighted.value > z];
    let consistent = positive.iter().all(|p| *p) || positive.iter().all(|p| !*p);
    Ok(HolderOrderReport {
        q,
        order_modulus,
        value_weighted,
        distance_weighted,
        positive,
        consistent,
        zero_threshold: z,
    })
}

// ---------------------------------------------------------------------------
// Slope conditions

/// A slope condition `lhs ≤ rhs` checked at qualifying points.
struct SlopeCondition<'a> {
    model: &'a FunctionModel,
    kind: SlopeKind,
    /// `(f(u), d(u)) ↦ u qualifies`.
    qualifies: Box<dyn Fn(f64, f64) -> Result<bool> + Sync + 'a>,
    /// `(f(u), d(u), slope(u)) ↦ (lhs, rhs)`.
    sides: Box<dyn Fn(f64, f64, f64) -> Result<(f64, f64)> + Sync + 'a>,
    inequality: &'static str,
    /// Sampled slopes may fall short by this relative amount without being
    /// counted as a violation (used by necessary checks only).
    sampled_slack: f64,
}

struct ConditionOutcome {
    checked: usize,
    qualifying: usize,
    below_floor: usize,
    evidence: Evidence,
    failure: Option<Witness>,
}

fn run_condition(
    f: &FunctionModel,
    points: &[Vec<f64>],
    values: &[f64],
    mu: f64,
    search: &Region,
    cfg: &Config,
    cond: &SlopeCondition,
    distances_needed: bool,
) -> Result<ConditionOutcome> {
    let mut below_floor = 0;
    let mut idx = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if *v > 0.0 && *v < mu && v.is_finite() {
            if *v <= cfg.value_floor {
                below_floor += 1;
            } else {
                idx.push(i);
            }
        }
    }
    let pts: Vec<&Vec<f64>> = idx.iter().map(|&i| &points[i]).collect();
    let mut evidence = Evidence::Exact;
    let dists: Vec<f64> = if distances_needed {
        let orc = oracle(f, 0.0, search, cfg, cfg.resolution(f.dim()))?;
        let ds = distances(&orc, &pts)?;
        for d in &ds {
            evidence = evidence.and(d.evidence());
        }
        ds.into_iter().map(|d| d.value).collect()
    } else {
        vec![f64::NAN; pts.len()]
    };
    let quals: Vec<bool> =
        idx.iter().zip(&dists).map(|(&i, &d)| (cond.qualifies)(values[i], d)).collect::<Result<_>>()?;
    let chosen: Vec<usize> = (0..idx.len()).filter(|&k| quals[k]).collect();
    let results: Vec<Result<(f64, f64, Evidence, f64)>> = chosen
        .par_iter()
        .map(|&k| {
            let s = slope(cond.model, pts[k], cond.kind, Some(search), cfg)?;
            let (lhs, rhs) = (cond.sides)(values[idx[k]], dists[k], s.value)?;
            Ok((lhs, rhs, s.evidence, s.value))
        })
        .collect();
    let mut failure: Option<(f64, Witness)> = None;
    for (j, r) in results.into_iter().enumerate() {
        let (lhs, rhs, ev, _) = r?;
        evidence = evidence.and(ev);
        let ok = if ev == Evidence::Sampled && cond.sampled_slack > 0.0 {
            lhs <= rhs * (1.0 + cond.sampled_slack) + cond.sampled_slack * 1e-3
        } else {
            cfg.le(lhs, rhs)
        };
        if !ok {
            let k = chosen[j];
            let excess = lhs - rhs;
            if failure.as_ref().is_none_or(|(e, _)| excess > *e) {
                failure = Some((
                    excess,
                    Witness {
                        point: pts[k].clone(),
                        f_value: values[idx[k]],
                        distance: dists[k],
                        lhs,
                        rhs,
                        level: None,
                        inequality: cond.inequality.to_string(),
                    },
                ));
            }
        }
    }
    Ok(ConditionOutcome {
        checked: chosen.len(),
        qualifying: chosen.len(),
        below_floor,
        evidence,
        failure: failure.map(|(_, w)| w),
    })
}

fn certified_radius(spec: &ErrorBoundSpec) -> f64 {
    spec.delta / (1.0 + spec.alpha)
}

/// Runs a sufficient condition on `B_δ(x̄)`; on success certifies
/// `δ' = δ/(1+α)` and cross-checks the bound directly on `B_δ'`.
fn sufficient(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    region: Option<&Region>,
    cfg: &Config,
    condition: ConditionId,
    cond: SlopeCondition,
    mut params: Parameters,
) -> Result<ErrorBoundVerdict> {
    let search = search_region(f, &spec.anchor, spec.delta, region)?;
    let sw = sweep(f, &spec.anchor, spec.delta, &search, cfg);
    params.slope = Some(cond.kind);
    let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, &cond, true)?;
    let mut v = ErrorBoundVerdict::new(condition, params);
    v.sweep = Some(sw.info.clone());
    v.checked = out.checked;
    v.below_floor = out.below_floor;
    v.evidence = out.evidence.and(if f.is_exact_tier() { Evidence::Exact } else { Evidence::Sampled });
    v.global_within_box = !spec.delta.is_finite();
    v.notes.push(format!("{} qualifying points", out.qualifying));
    if let Some(w) = out.failure {
        v.status = Status::Inconclusive;
        v.counterexample = Some(w);
        v.notes.push("condition fails at the counterexample; no conclusion".into());
        return Ok(v);
    }
    let radius = certified_radius(spec);
    v.certified_radius = Some(radius);
    let cross = direct_on(f, &spec.with_delta(radius), &search, &sweep(f, &spec.anchor, radius, &search, cfg), cfg)?;
    v.evidence = v.evidence.and(cross.evidence);
    match cross.status {
        Status::Holds => v.status = Status::Holds,
        Status::Fails => {
            v.status = Status::Inconclusive;
            v.inconsistency = true;
            v.notes.push("condition holds but the direct check fails on the certified ball".into());
        }
        Status::Inconclusive => {
            v.status = Status::Inconclusive;
            v.notes.push("direct cross-check inconclusive".into());
        }
    }
    v.cross_check = Some(Box::new(cross));
    Ok(v)
}

fn require_kind(f: &FunctionModel, kind: SlopeKind, set: &SlopeOperatorSet) -> Result<()> {
    if !set.contains(kind) {
        return Err(Error::Precondition(format!("{kind:?} is not in the {:?} operator set", set.variant)));
    }
    if kind == SlopeKind::ConvexSd && !f.is_convex() {
        return Err(Error::Precondition("convex subdifferential slope needs a convex model".into()));
    }
    Ok(())
}

/// Linear sufficient condition: `α|∇̆f|(u) ≥ τ` for `u ∈ B_δ(x̄) ∩ [0<f<μ]`
/// with `β f(u) < τ d(u, [f ≤ 0])`, any slope of the full set.
pub fn verify_sufficient_linear(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    kind: SlopeKind,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    let Some(tau) = spec.form.tau() else {
        return invalid("the linear sufficient condition needs a linear form");
    };
    require_kind(f, kind, &SlopeOperatorSet::new(SetVariant::Full))?;
    let (alpha, beta) = (spec.alpha, spec.beta());
    let cond = SlopeCondition {
        model: f,
        kind,
        qualifies: Box::new(move |fu, d| Ok(beta * fu < tau * d)),
        sides: Box::new(move |_, _, s| Ok((tau, alpha * s))),
        inequality: "tau <= alpha*slope(u)",
        sampled_slack: 0.0,
    };
    sufficient(f, spec, region, cfg, ConditionId::SufficientLinear, cond, spec.parameters())
}

/// Which nonlinear sufficient condition to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearCondition {
    /// `α|∇(φ∘f)|◇(u) ≥ 1`.
    CompositeNonlocal,
    /// A slope of `f` weighted by a derivative of the gauge.
    Slope(SlopeKind),
}

fn require_smooth(g: &Gauge) -> Result<()> {
    if !g.is_smooth() {
        return Err(Error::Precondition("this condition needs a continuously differentiable gauge".into()));
    }
    Ok(())
}

/// Nonlinear sufficient conditions for `d ≤ φ(f)` (gauge forms).
///
/// Conventional mode: under `β φ(f(u)) < d(u)`, either
/// `α|∇(φ∘f)|◇(u) ≥ 1` or `α φ'(f(u)) |∇̆f|(u) ≥ 1` with a slope from the
/// set without the nonlocal slope (the full set when φ' is nonincreasing).
/// Alternative mode (φ concave): `α φ'(φ⁻¹(d/β)) |∇̆f|(u) ≥ 1`.
pub fn verify_sufficient_nonlinear(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    condition: NonlinearCondition,
    mode: Mode,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    let phi = match &spec.form {
        BoundForm::Linear { .. } | BoundForm::Gauge(_) => spec.form.phi()?,
        _ => return invalid("use verify_psi_form for ψ and ν-integral forms"),
    };
    require_smooth(&phi)?;
    let (alpha, beta) = (spec.alpha, spec.beta());
    let mut params = spec.parameters();
    params.mode = Some(mode);
    let p1 = phi.clone();
    let qualifies: Box<dyn Fn(f64, f64) -> Result<bool> + Sync> =
        Box::new(move |fu, d| Ok(beta * p1.eval_extended(fu) < d));
    match (mode, condition) {
        (Mode::Both, _) => invalid("mode `both` applies to necessary conditions only"),
        (Mode::Conventional, NonlinearCondition::CompositeNonlocal) => {
            let composed = compose_gauge(&phi, f);
            let cond = SlopeCondition {
                model: &composed,
                kind: SlopeKind::Nonlocal,
                qualifies,
                sides: Box::new(move |_, _, s| Ok((1.0, alpha * s))),
                inequality: "1 <= alpha*|grad(phi o f)|<>(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientCompositeNonlocal, cond, params)
        }
        (Mode::Conventional, NonlinearCondition::Slope(kind)) => {
            let variant =
                if phi.derivative_monotonicity().is_nonincreasing() { SetVariant::Full } else { SetVariant::Circle };
            require_kind(f, kind, &SlopeOperatorSet::new(variant))?;
            let p2 = phi.clone();
            let cond = SlopeCondition {
                model: f,
                kind,
                qualifies,
                sides: Box::new(move |fu, _, s| Ok((1.0, alpha * p2.derivative(fu)? * s))),
                inequality: "1 <= alpha*phi'(f(u))*slope(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientGaugeSlope, cond, params)
        }
        (Mode::Alternative, NonlinearCondition::CompositeNonlocal) => {
            invalid("the alternative mode takes a slope of f, not of the composition")
        }
        (Mode::Alternative, NonlinearCondition::Slope(kind)) => {
            if !phi.convexity().is_concave() {
                return Err(Error::Precondition("the alternative condition needs a concave φ".into()));
            }
            require_kind(f, kind, &SlopeOperatorSet::new(SetVariant::Full))?;
            let p2 = phi.clone();
            let cond = SlopeCondition {
                model: f,
                kind,
                qualifies,
                sides: Box::new(move |_, d, s| {
                    if !d.is_finite() {
                        return Ok((1.0, 0.0));
                    }
                    let t = p2.inverse(d / beta)?;
                    Ok((1.0, alpha * p2.derivative(t)? * s))
                }),
                inequality: "1 <= alpha*phi'(phi^-1(d(u)/beta))*slope(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientGaugeAlternative, cond, params)
        }
    }
}

/// Sufficient conditions for `ψ(d) ≤ f` and `∫₀^d ν ≤ f`.
///
/// Conventional mode, under `f(u) < ψ(d(u)/β)`: `α|∇(ψ⁻¹∘f)|◇(u) ≥ 1` or
/// `α|∇̆f|(u) ≥ ψ'(ψ⁻¹(f(u)))` (full slope set when ψ is convex).
/// Alternative mode (ψ convex): `α|∇̆f|(u) ≥ ψ'(d(u)/β)`. The ν-integral
/// form always uses the threshold `ν(d(u)/β)`.
pub fn verify_psi_form(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    condition: NonlinearCondition,
    mode: Mode,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    let (psi, is_nu) = match &spec.form {
        BoundForm::Psi(g) => (g.clone(), false),
        BoundForm::NuIntegral(g) => (g.clone(), true),
        _ => return invalid("verify_psi_form needs a ψ or ν-integral form"),
    };
    require_smooth(&psi)?;
    let (alpha, beta) = (spec.alpha, spec.beta());
    let mut params = spec.parameters();
    params.mode = Some(if is_nu { Mode::Alternative } else { mode });
    let p1 = psi.clone();
    let qualifies: Box<dyn Fn(f64, f64) -> Result<bool> + Sync> =
        Box::new(move |fu, d| Ok(fu < p1.eval_extended(d / beta)));
    let distance_threshold = |psi: Gauge| -> Box<dyn Fn(f64, f64, f64) -> Result<(f64, f64)> + Sync> {
        Box::new(move |_, d, s| {
            if !d.is_finite() {
                return Ok((f64::INFINITY, alpha * s));
            }
            Ok((psi.derivative(d / beta)?, alpha * s))
        })
    };
    if is_nu {
        let NonlinearCondition::Slope(kind) = condition else {
            return invalid("the ν-integral condition takes a slope of f");
        };
        require_kind(f, kind, &SlopeOperatorSet::new(SetVariant::Full))?;
        let cond = SlopeCondition {
            model: f,
            kind,
            qualifies,
            sides: distance_threshold(psi.clone()),
            inequality: "nu(d(u)/beta) <= alpha*slope(u)",
            sampled_slack: 0.0,
        };
        let mut v = sufficient(f, spec, region, cfg, ConditionId::SufficientNuIntegral, cond, params)?;
        if mode == Mode::Conventional {
            v.notes.push("the ν-integral form always uses the distance threshold".into());
        }
        return Ok(v);
    }
    match (mode, condition) {
        (Mode::Both, _) => invalid("mode `both` applies to necessary conditions only"),
        (Mode::Conventional, NonlinearCondition::CompositeNonlocal) => {
            let composed = compose_gauge(&psi.inverse_gauge()?, f);
            let cond = SlopeCondition {
                model: &composed,
                kind: SlopeKind::Nonlocal,
                qualifies,
                sides: Box::new(move |_, _, s| Ok((1.0, alpha * s))),
                inequality: "1 <= alpha*|grad(psi^-1 o f)|<>(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientPsiComposite, cond, params)
        }
        (Mode::Conventional, NonlinearCondition::Slope(kind)) => {
            let variant = if psi.convexity().is_convex() { SetVariant::Full } else { SetVariant::Circle };
            require_kind(f, kind, &SlopeOperatorSet::new(variant))?;
            let p2 = psi.clone();
            let cond = SlopeCondition {
                model: f,
                kind,
                qualifies,
                sides: Box::new(move |fu, _, s| Ok((p2.derivative(p2.inverse(fu)?)?, alpha * s))),
                inequality: "psi'(psi^-1(f(u))) <= alpha*slope(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientPsiValue, cond, params)
        }
        (Mode::Alternative, NonlinearCondition::CompositeNonlocal) => {
            invalid("the alternative mode takes a slope of f, not of the composition")
        }
        (Mode::Alternative, NonlinearCondition::Slope(kind)) => {
            if !psi.convexity().is_convex() {
                return Err(Error::Precondition("the alternative ψ condition needs a convex ψ".into()));
            }
            require_kind(f, kind, &SlopeOperatorSet::new(SetVariant::Full))?;
            let cond = SlopeCondition {
                model: f,
                kind,
                qualifies,
                sides: distance_threshold(psi.clone()),
                inequality: "psi'(d(u)/beta) <= alpha*slope(u)",
                sampled_slack: 0.0,
            };
            sufficient(f, spec, region, cfg, ConditionId::SufficientPsiDistance, cond, params)
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed-point conditions

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointVariant {
    /// A slope without the Fréchet one, over `u` with `f(u) ≤ f(x)`.
    Slope(SlopeKind),
    /// Fréchet subdifferential slope over `u` with `f(u) < μ`, `μ > f(x)`;
    /// `None` uses `f(x)(1 + frechet_margin)`.
    Frechet {
        #[serde(with = "crate::ext::opt")]
        mu: Option<f64>,
    },
}

/// The fixed-point condition at a single `x` with `f(x) > 0`: `α|∇̆f|(u) ≥ τ`
/// for every `u` with `d(u,x) < α d(x)`, `α f(u) < τ d(u)`, `f(u) < τ d(x)`
/// and the level restriction of the variant. On success the bound
/// `τ d(x) ≤ f(x)` is cross-checked.
pub fn check_fixed_point(
    f: &FunctionModel,
    x: &[f64],
    tau: f64,
    alpha: f64,
    variant: FixedPointVariant,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    check_point(x, f.dim())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("τ must be positive, got {tau}"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("α must lie in ]0, 1], got {alpha}"));
    }
    let fx = f.evaluate(x)?;
    if !(fx > 0.0 && fx.is_finite()) {
        return Err(Error::Precondition(format!("needs 0 < f(x) < ∞, got {fx}")));
    }
    let (kind, level, condition) = match variant {
        FixedPointVariant::Slope(k) => {
            require_kind(f, k, &SlopeOperatorSet::new(SetVariant::Dagger))?;
            (k, None, ConditionId::FixedPointSlope)
        }
        FixedPointVariant::Frechet { mu } => {
            let mu = mu.unwrap_or(fx * (1.0 + cfg.frechet_margin));
            if !(mu > fx) {
                return invalid(format!("μ must exceed f(x) = {fx}, got {mu}"));
            }
            (SlopeKind::FrechetSd, Some(mu), ConditionId::FixedPointFrechet)
        }
    };
    let outer = match region.or(f.domain()) {
        Some(r) => r.clone(),
        None => Region::cube(x, 2.0)?,
    };
    let orc = oracle(f, 0.0, &outer, cfg, cfg.resolution(f.dim()))?;
    let dx = orc.distance(x)?;
    let radius = alpha * dx.value;
    let cand_region = if radius.is_finite() {
        intersect(&Region::cube(x, radius)?, &outer).unwrap_or_else(|| outer.clone())
    } else {
        outer.clone()
    };
    let sw = sweep(f, x, radius, &cand_region, cfg);
    let mut points = sw.points.clone();
    let mut values = sw.values.clone();
    points.push(x.to_vec());
    values.push(fx);
    let d_x = dx.value;
    let cond = SlopeCondition {
        model: f,
        kind,
        qualifies: Box::new(move |fu, du| {
            let level_ok = match level {
                Some(mu) => fu < mu,
                None => fu <= fx,
            };
            Ok(level_ok && alpha * fu < tau * du && fu < tau * d_x)
        }),
        sides: Box::new(move |_, _, s| Ok((tau, alpha * s))),
        inequality: "tau <= alpha*slope(u)",
        sampled_slack: 0.0,
    };
    let out = run_condition(f, &points, &values, f64::INFINITY, &outer, cfg, &cond, true)?;
    let params = Parameters {
        form: format!("linear(tau={tau})"),
        tau: Some(tau),
        gauge: None,
        anchor: x.to_vec(),
        delta: radius,
        mu: level.unwrap_or(fx),
        alpha,
        beta: alpha.max(1.0 - alpha),
        slope: Some(kind),
        mode: None,
    };
    let mut v = ErrorBoundVerdict::new(condition, params);
    v.sweep = Some(sw.info);
    v.checked = out.checked;
    v.below_floor = out.below_floor;
    v.evidence = out.evidence.and(dx.evidence());
    if !f.is_exact_tier() {
        v.evidence = Evidence::Sampled;
    }
    let (lhs, rhs) = (tau * d_x, fx);
    let bound_holds = cfg.le(lhs, rhs);
    let bound = ErrorBoundVerdict {
        status: if bound_holds { Status::Holds } else { Status::Fails },
        witness: (!bound_holds).then(|| Witness {
            point: x.to_vec(),
            f_value: fx,
            distance: d_x,
            lhs,
            rhs,
            level: None,
            inequality: "tau*d(x,[f<=0]) <= f(x)".into(),
        }),
        checked: 1,
        evidence: dx.evidence(),
        ..ErrorBoundVerdict::new(ConditionId::DirectLinear, v.parameters.clone())
    };
    if let Some(w) = out.failure {
        v.status = Status::Inconclusive;
        v.counterexample = Some(w);
        v.notes.push(if bound_holds {
            "condition fails but the bound holds at x".into()
        } else {
            "condition fails and the bound fails at x".into()
        });
    } else if bound_holds {
        v.status = Status::Holds;
    } else {
        v.status = Status::Inconclusive;
        v.inconsistency = true;
        v.notes.push("condition holds but the bound fails at x".into());
    }
    v.cross_check = Some(Box::new(bound));
    Ok(v)
}

// ---------------------------------------------------------------------------
// Necessary conditions

fn band_after_direct(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    region: Option<&Region>,
    cfg: &Config,
    condition: ConditionId,
) -> Result<(ErrorBoundVerdict, Option<(Region, Sweep)>)> {
    let search = search_region(f, &spec.anchor, spec.delta, region)?;
    let sw = sweep(f, &spec.anchor, spec.delta, &search, cfg);
    let direct = direct_on(f, spec, &search, &sw, cfg)?;
    let mut v = ErrorBoundVerdict::new(condition, spec.parameters());
    v.sweep = Some(sw.info.clone());
    v.global_within_box = !spec.delta.is_finite();
    v.evidence = direct.evidence;
    if direct.status != Status::Holds {
        v.status = Status::Inconclusive;
        v.notes.push("the bound does not hold on the sweep; necessary conditions do not apply".into());
        v.cross_check = Some(Box::new(direct));
        return Ok((v, None));
    }
    v.cross_check = Some(Box::new(direct));
    Ok((v, Some((search, sw))))
}

fn absorb(v: &mut ErrorBoundVerdict, name: &str, out: ConditionOutcome) {
    v.checked += out.checked;
    v.below_floor = v.below_floor.max(out.below_floor);
    v.evidence = v.evidence.and(out.evidence);
    v.notes.push(format!(
        "{name}: {} points, {}",
        out.checked,
        if out.failure.is_some() { "violated" } else { "no violation" }
    ));
    if let Some(w) = out.failure {
        v.inconsistency = true;
        if v.counterexample.is_none() {
            v.counterexample = Some(w);
        }
    }
}

fn conclude_necessary(v: &mut ErrorBoundVerdict) {
    v.status = if v.inconsistency { Status::Inconclusive } else { Status::Holds };
}

/// Slack allowed to sampled nonlocal slopes, which are lower bounds.
const SAMPLED_SLACK: f64 = 5e-2;

/// Given that the τ-bound holds: `|∇f|◇(u) ≥ τ`, and for convex models
/// `|∂f|(u) ≥ τ`, on `B_δ(x̄) ∩ [0 < f < μ]`.
pub fn check_necessary_linear(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    let Some(tau) = spec.form.tau() else {
        return invalid("the linear necessary condition needs a linear form");
    };
    let (mut v, band) = band_after_direct(f, spec, region, cfg, ConditionId::NecessaryLinear)?;
    let Some((search, sw)) = band else {
        return Ok(v);
    };
    let nonlocal = SlopeCondition {
        model: f,
        kind: SlopeKind::Nonlocal,
        qualifies: Box::new(|_, _| Ok(true)),
        sides: Box::new(move |_, _, s| Ok((tau, s))),
        inequality: "tau <= |grad f|<>(u)",
        sampled_slack: SAMPLED_SLACK,
    };
    let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, &nonlocal, false)?;
    absorb(&mut v, "nonlocal slope", out);
    if f.is_convex() && f.is_exact_tier() {
        let sd = SlopeCondition {
            model: f,
            kind: SlopeKind::ConvexSd,
            qualifies: Box::new(|_, _| Ok(true)),
            sides: Box::new(move |_, _, s| Ok((tau, s))),
            inequality: "tau <= |df|(u)",
            sampled_slack: 0.0,
        };
        let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, &sd, false)?;
        absorb(&mut v, "convex subdifferential slope", out);
    }
    conclude_necessary(&mut v);
    Ok(v)
}

/// Given that `d ≤ φ(f)` holds for a convex `f`: the value-based
/// `(φ(f)/f)|∂f| ≥ 1` (and `φ'(f)|∂f| ≥ 1` when φ' is nondecreasing), and
/// the distance-based `(d/φ⁻¹(d))|∂f| ≥ 1` (and `φ'(φ⁻¹(d))|∂f| ≥ 1` when φ
/// is convex). ψ and ν forms are converted with `φ = ψ⁻¹`.
pub fn check_necessary_nonlinear_convex(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    mode: Mode,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    spec.validate(f)?;
    if !(f.is_convex() && f.is_exact_tier()) {
        return Err(Error::Precondition("needs a convex model with exact subdifferentials".into()));
    }
    let phi = spec.form.phi()?;
    let condition = match mode {
        Mode::Conventional => ConditionId::NecessaryValueBased,
        Mode::Alternative => ConditionId::NecessaryDistanceBased,
        Mode::Both => ConditionId::NecessaryNonlinear,
    };
    let (mut v, band) = band_after_direct(f, spec, region, cfg, condition)?;
    v.parameters.mode = Some(mode);
    let Some((search, sw)) = band else {
        return Ok(v);
    };
    let mut conds: Vec<(&str, SlopeCondition, bool)> = Vec::new();
    let any = |_: f64, _: f64| Ok(true);
    if mode != Mode::Alternative {
        let p = phi.clone();
        conds.push((
            "value-based",
            SlopeCondition {
                model: f,
                kind: SlopeKind::ConvexSd,
                qualifies: Box::new(any),
                sides: Box::new(move |fu, _, s| Ok((1.0, p.eval(fu)? / fu * s))),
                inequality: "1 <= phi(f(u))/f(u)*|df|(u)",
                sampled_slack: 0.0,
            },
            false,
        ));
        if phi.is_smooth() && phi.derivative_monotonicity().is_nondecreasing() {
            let p = phi.clone();
            conds.push((
                "value-based derivative",
                SlopeCondition {
                    model: f,
                    kind: SlopeKind::ConvexSd,
                    qualifies: Box::new(any),
                    sides: Box::new(move |fu, _, s| Ok((1.0, p.derivative(fu)? * s))),
                    inequality: "1 <= phi'(f(u))*|df|(u)",
                    sampled_slack: 0.0,
                },
                false,
            ));
        }
    }
    if mode != Mode::Conventional {
        let p = phi.clone();
        conds.push((
            "distance-based",
            SlopeCondition {
                model: f,
                kind: SlopeKind::ConvexSd,
                qualifies: Box::new(any),
                sides: Box::new(move |_, d, s| Ok((1.0, d / p.inverse_extended(d)? * s))),
                inequality: "1 <= d(u)/phi^-1(d(u))*|df|(u)",
                sampled_slack: 0.0,
            },
            true,
        ));
        if phi.is_smooth() && phi.convexity().is_convex() {
            let p = phi.clone();
            conds.push((
                "distance-based derivative",
                SlopeCondition {
                    model: f,
                    kind: SlopeKind::ConvexSd,
                    qualifies: Box::new(any),
                    sides: Box::new(move |_, d, s| Ok((1.0, p.derivative(p.inverse(d)?)? * s))),
                    inequality: "1 <= phi'(phi^-1(d(u)))*|df|(u)",
                    sampled_slack: 0.0,
                },
                true,
            ));
        }
    }
    for (name, c, needs_d) in &conds {
        let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, c, *needs_d)?;
        absorb(&mut v, name, out);
    }
    conclude_necessary(&mut v);
    Ok(v)
}

/// Result of checking the equality case: where `τ d(u) = f(u)` on the band,
/// the convex subdifferential slope should equal τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityDiagnostic {
    pub equality_points: usize,
    pub band_points: usize,
    pub max_deviation: f64,
    pub consistent: bool,
}

/// Diagnostic for the equality case of the linear bound on a convex model.
pub fn equality_slope_diagnostic(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<EqualityDiagnostic> {
    spec.validate(f)?;
    let Some(tau) = spec.form.tau() else {
        return invalid("the equality diagnostic needs a linear form");
    };
    if !(f.is_convex() && f.is_exact_tier()) {
        return Err(Error::Precondition("needs a convex model with exact subdifferentials".into()));
    }
    let search = search_region(f, &spec.anchor, spec.delta, region)?;
    let sw = sweep(f, &spec.anchor, spec.delta, &search, cfg);
    let orc = oracle(f, 0.0, &search, cfg, sw.info.resolution)?;
    let idx: Vec<usize> =
        (0..sw.points.len()).filter(|&i| sw.values[i] > cfg.value_floor && sw.values[i] < spec.mu).collect();
    let rows: Vec<Result<Option<f64>>> = idx
        .par_iter()
        .map(|&i| {
            let d = orc.distance(&sw.points[i])?.value;
            let fu = sw.values[i];
            if (tau * d - fu).abs() > 1e-9 * fu.max(1.0) {
                return Ok(None);
            }
            let s = slope(f, &sw.points[i], SlopeKind::ConvexSd, None, cfg)?.value;
            Ok(Some((s - tau).abs()))
        })
        .collect();
    let mut equality_points = 0;
    let mut max_deviation = 0.0f64;
    for r in rows {
        if let Some(dev) = r? {
            equality_points += 1;
            max_deviation = max_deviation.max(dev);
        }
    }
    Ok(EqualityDiagnostic {
        equality_points,
        band_points: idx.len(),
        max_deviation,
        consistent: max_deviation <= 1e-8 * tau.max(1.0),
    })
}

// ---------------------------------------------------------------------------
// Perturbed bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedReport {
    /// `τ d(x, [f ≤ c]) ≤ f(x) − c` over a grid of levels `c ∈ [0, μ[`.
    pub direct: ErrorBoundVerdict,
    /// `α|∇̆f|(x) ≥ τ` on the band, certifying `δ/(1+α)`.
    pub sufficient: ErrorBoundVerdict,
    /// Local slope at least τ on the band, given the perturbed bound.
    pub necessary: ErrorBoundVerdict,
    pub levels: Vec<f64>,
}

const PERTURBED_LEVELS: usize = 8;

fn perturbed_direct(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    tau: f64,
    search: &Region,
    sw: &Sweep,
    levels: &[f64],
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    let mut v = ErrorBoundVerdict::new(ConditionId::PerturbedDirect, spec.parameters());
    v.sweep = Some(sw.info.clone());
    v.global_within_box = !spec.delta.is_finite();
    v.evidence = if f.is_exact_tier() { Evidence::Exact } else { Evidence::Sampled };
    let mut unconfirmed = 0;
    for &c in levels {
        let sides = move |fx: f64, d: f64| (if d == 0.0 { 0.0 } else { tau * d }, fx - c);
        let out = direct_scan(f, sw, search, c, spec.mu, cfg, &sides, "tau*d(x,[f<=c]) <= f(x)-c")?;
        v.checked += out.checked;
        v.evidence = v.evidence.and(out.evidence);
        unconfirmed += out.unconfirmed;
        if let Some(mut w) = out.witness {
            w.level = Some(c);
            v.status = Status::Fails;
            v.witness = Some(w);
            return Ok(v);
        }
    }
    if unconfirmed > 0 {
        v.status = Status::Inconclusive;
        v.notes.push(format!("{unconfirmed} sampled violations vanished under refinement"));
    } else {
        v.status = Status::Holds;
    }
    Ok(v)
}

/// Perturbed τ-bound `τ d(x, [f ≤ c]) ≤ f(x) − c` for `c ∈ [0, μ[` and
/// `x ∈ B_δ(x̄) ∩ [c < f < μ]`, with its slope sufficient condition (slope
/// from the set without the nonlocal slope) and local-slope necessary
/// condition.
pub fn check_perturbed(
    f: &FunctionModel,
    spec: &ErrorBoundSpec,
    kind: SlopeKind,
    region: Option<&Region>,
    cfg: &Config,
) -> Result<PerturbedReport> {
    spec.validate(f)?;
    let Some(tau) = spec.form.tau() else {
        return invalid("perturbed bounds are linear");
    };
    require_kind(f, kind, &SlopeOperatorSet::new(SetVariant::Circle))?;
    let search = search_region(f, &spec.anchor, spec.delta, region)?;
    let sw = sweep(f, &spec.anchor, spec.delta, &search, cfg);
    let top = if spec.mu.is_finite() {
        spec.mu
    } else {
        sw.values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(*v))
    };
    let levels: Vec<f64> = (0..PERTURBED_LEVELS).map(|k| top * k as f64 / PERTURBED_LEVELS as f64).collect();
    let direct = perturbed_direct(f, spec, tau, &search, &sw, &levels, cfg)?;

    let alpha = spec.alpha;
    let mut params = spec.parameters();
    params.slope = Some(kind);
    let cond = SlopeCondition {
        model: f,
        kind,
        qualifies: Box::new(|_, _| Ok(true)),
        sides: Box::new(move |_, _, s| Ok((tau, alpha * s))),
        inequality: "tau <= alpha*slope(x)",
        sampled_slack: 0.0,
    };
    let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, &cond, false)?;
    let mut sufficient = ErrorBoundVerdict::new(ConditionId::PerturbedSufficient, params.clone());
    sufficient.sweep = Some(sw.info.clone());
    sufficient.checked = out.checked;
    sufficient.below_floor = out.below_floor;
    sufficient.evidence = out.evidence.and(direct.evidence);
    sufficient.global_within_box = !spec.delta.is_finite();
    if let Some(w) = out.failure {
        sufficient.status = Status::Inconclusive;
        sufficient.counterexample = Some(w);
    } else {
        let radius = certified_radius(spec);
        sufficient.certified_radius = Some(radius);
        let small = sweep(f, &spec.anchor, radius, &search, cfg);
        let cross = perturbed_direct(f, &spec.with_delta(radius), tau, &search, &small, &levels, cfg)?;
        sufficient.status = match cross.status {
            Status::Holds => Status::Holds,
            Status::Fails => {
                sufficient.inconsistency = true;
                sufficient.notes.push("condition holds but the perturbed bound fails on the certified ball".into());
                Status::Inconclusive
            }
            Status::Inconclusive => Status::Inconclusive,
        };
        sufficient.cross_check = Some(Box::new(cross));
    }

    let mut necessary = ErrorBoundVerdict::new(ConditionId::PerturbedNecessary, params);
    necessary.sweep = Some(sw.info.clone());
    necessary.evidence = direct.evidence;
    if direct.status == Status::Holds {
        let cond = SlopeCondition {
            model: f,
            kind: SlopeKind::Local,
            qualifies: Box::new(|_, _| Ok(true)),
            sides: Box::new(move |_, _, s| Ok((tau, s))),
            inequality: "tau <= |grad f|(x)",
            sampled_slack: SAMPLED_SLACK,
        };
        let out = run_condition(f, &sw.points, &sw.values, spec.mu, &search, cfg, &cond, false)?;
        absorb(&mut necessary, "local slope", out);
        conclude_necessary(&mut necessary);
    } else {
        necessary.status = Status::Inconclusive;
        necessary
            .notes
            .push("the perturbed bound does not hold on the sweep; the necessary condition does not apply".into());
    }
    Ok(PerturbedReport { direct, sufficient, necessary, levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs() -> FunctionModel {
        FunctionModel::from_pieces(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)]).unwrap()
    }

    #[test]
    fn direct_linear_on_abs() {
        let f = abs();
        let cfg = Config::default();
        let r = Region::interval(-2.0, 2.0).unwrap();
        let spec =
            ErrorBoundSpec::new(&f, BoundForm::Linear { tau: 1.0 }, vec![0.0], f64::INFINITY, f64::INFINITY).unwrap();
        let v = check_error_bound_direct(&f, &spec, Some(&r), &cfg).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert_eq!(v.evidence, Evidence::Exact);
        assert!(v.global_within_box);
        let bad = spec.with_form(BoundForm::Linear { tau: 1.5 });
        let v = check_error_bound_direct(&f, &bad, Some(&r), &cfg).unwrap();
        assert_eq!(v.status, Status::Fails);
        let w = v.witness.unwrap();
        assert!(1.5 * w.point[0].abs() > w.point[0].abs());
        assert!(w.lhs > w.rhs);
    }

    #[test]
    fn local_spec_requires_feasible_anchor() {
        let f = abs();
        assert!(ErrorBoundSpec::new(&f, BoundForm::Linear { tau: 1.0 }, vec![1.0], 1.0, 1.0).is_err());
        assert!(ErrorBoundSpec::new(&f, BoundForm::Linear { tau: 1.0 }, vec![1.0], f64::INFINITY, 1.0).is_ok());
    }

    #[test]
    fn face_points_land_on_ties() {
        let f = FunctionModel::from_pieces(&[(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]).unwrap();
        let grid = Region::cube(&[0.3, 0.3], 0.5).unwrap().grid(10);
        let pts = face_points(f.affine_pieces().unwrap(), &grid, 1.0 / 9.0);
        assert!(!pts.is_empty());
        for p in pts {
            assert!((p[0] - p[1]).abs() < 1e-12);
        }
    }
}
