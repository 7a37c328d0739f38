//! Extended-real-valued functions on R^n and sublevel-set distances.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_point, invalid, Error, Result};
use crate::gauge::Gauge;
use crate::geometry::{dot, lerp, Norm};
use crate::grid::{default_resolution, Region};
use crate::polyhedron::Polyhedron;

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Whether a number was computed in closed form or from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Exact,
    Sampled,
}

impl Evidence {
    pub fn and(self, other: Evidence) -> Evidence {
        if self == Evidence::Exact && other == Evidence::Exact {
            Evidence::Exact
        } else {
            Evidence::Sampled
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    MaxAffine,
    MaxSmooth,
    Blackbox,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::MaxAffine => "max_affine",
            Tier::MaxSmooth => "max_smooth",
            Tier::Blackbox => "blackbox",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexitySource {
    Structural,
    Declared,
    Unknown,
}

/// Affine piece `x ↦ ⟨a, x⟩ + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffinePiece {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        AffinePiece { a, b }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.b
    }
}

/// C¹ piece with its gradient.
#[derive(Clone)]
pub struct SmoothPiece {
    pub value: PointFn,
    pub gradient: GradFn,
}

impl SmoothPiece {
    pub fn new(value: PointFn, gradient: GradFn) -> Self {
        SmoothPiece { value, gradient }
    }

    pub fn affine(p: AffinePiece) -> Self {
        let q = p.clone();
        SmoothPiece { value: Arc::new(move |x| p.eval(x)), gradient: Arc::new(move |_| q.a.clone()) }
    }
}

#[derive(Clone)]
enum Repr {
    MaxAffine(Vec<AffinePiece>),
    MaxSmooth(Vec<SmoothPiece>),
    Opaque(PointFn),
    Composed { gauge: Gauge, inner: Arc<FunctionModel> },
    PositivePart(Arc<FunctionModel>),
    Scaled { k: f64, inner: Arc<FunctionModel> },
}

/// A function `f: R^n → R ∪ {+∞}`.
///
/// `max_affine` and `max_smooth` models carry exact structure; everything
/// else is a black box evaluated pointwise. Black boxes are `+∞` outside
/// their domain box.
#[derive(Clone)]
pub struct FunctionModel {
    dim: usize,
    repr: Repr,
    domain: Option<Region>,
    convex: bool,
    convexity_source: ConvexitySource,
}

impl fmt::Debug for FunctionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionModel")
            .field("dim", &self.dim)
            .field("tier", &self.tier())
            .field("convex", &self.convex)
            .field("domain", &self.domain)
            .finish()
    }
}

fn midpoint_convexity_check(f: &FunctionModel, region: &Region) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n = region.dim();
    for _ in 0..256 {
        let a: Vec<f64> = (0..n).map(|i| rng.gen_range(region.lo[i]..=region.hi[i])).collect();
        let b: Vec<f64> = (0..n).map(|i| rng.gen_range(region.lo[i]..=region.hi[i])).collect();
        let m = lerp(&a, &b, 0.5);
        let (fa, fb, fm) = (f.value(&a), f.value(&b), f.value(&m));
        if !(fa.is_finite() && fb.is_finite()) {
            continue;
        }
        let avg = 0.5 * (fa + fb);
        if fm > avg + 1e-9 * (1.0 + avg.abs()) {
            return invalid(format!("declared convex but f({m:?}) = {fm} exceeds the chord average {avg}"));
        }
    }
    Ok(())
}

impl FunctionModel {
    /// `f(x) = max_i ⟨a_i, x⟩ + b_i`.
    pub fn max_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return invalid("max_affine needs at least one piece");
        };
        let dim = first.a.len();
        if dim == 0 || pieces.iter().any(|p| p.a.len() != dim) {
            return invalid("affine pieces must share a positive dimension");
        }
        if pieces.iter().any(|p| p.a.iter().any(|v| !v.is_finite()) || !p.b.is_finite()) {
            return invalid("affine pieces must be finite");
        }
        Ok(FunctionModel {
            dim,
            repr: Repr::MaxAffine(pieces),
            domain: None,
            convex: true,
            convexity_source: ConvexitySource::Structural,
        })
    }

    /// Convenience constructor from `(a, b)` pairs.
    pub fn from_pieces(pieces: &[(Vec<f64>, f64)]) -> Result<Self> {
        Self::max_affine(pieces.iter().map(|(a, b)| AffinePiece::new(a.clone(), *b)).collect())
    }

    /// `f(x) = max_i g_i(x)` for C¹ pieces. A convexity declaration is
    /// spot-checked by midpoint sampling on `region` when one is given.
    pub fn max_smooth(
        dim: usize,
        pieces: Vec<SmoothPiece>,
        declared_convex: bool,
        region: Option<Region>,
    ) -> Result<Self> {
        if dim == 0 || pieces.is_empty() {
            return invalid("max_smooth needs a positive dimension and at least one piece");
        }
        if let Some(r) = &region {
            if r.dim() != dim {
                return invalid("region dimension mismatch");
            }
        }
        let f = FunctionModel {
            dim,
            repr: Repr::MaxSmooth(pieces),
            domain: region.clone(),
            convex: declared_convex,
            convexity_source: if declared_convex { ConvexitySource::Declared } else { ConvexitySource::Unknown },
        };
        if declared_convex {
            if let Some(r) = &region {
                midpoint_convexity_check(&f, r)?;
            }
        }
        Ok(f)
    }

    /// Black-box function; `domain` is mandatory and `f = +∞` outside it.
    pub fn blackbox(dim: usize, eval: PointFn, domain: Region, declared_convex: bool) -> Result<Self> {
        if domain.dim() != dim {
            return invalid("domain box dimension mismatch");
        }
        let f = FunctionModel {
            dim,
            repr: Repr::Opaque(eval),
            domain: Some(domain.clone()),
            convex: declared_convex,
            convexity_source: if declared_convex { ConvexitySource::Declared } else { ConvexitySource::Unknown },
        };
        if declared_convex {
            midpoint_convexity_check(&f, &domain)?;
        }
        Ok(f)
    }

    /// Attaches a region hint used by grid-based routines.
    pub fn with_domain(mut self, region: Region) -> Result<Self> {
        if region.dim() != self.dim {
            return invalid("domain box dimension mismatch");
        }
        if matches!(self.repr, Repr::Opaque(_)) {
            if let Some(d) = &self.domain {
                if !d.contains_region(&region) {
                    return invalid("a black box cannot be widened beyond its domain");
                }
            }
        }
        self.domain = Some(region);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&Region> {
        self.domain.as_ref()
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn convexity_source(&self) -> ConvexitySource {
        self.convexity_source
    }

    pub fn tier(&self) -> Tier {
        match &self.repr {
            Repr::MaxAffine(_) => Tier::MaxAffine,
            Repr::MaxSmooth(_) => Tier::MaxSmooth,
            _ => Tier::Blackbox,
        }
    }

    pub fn is_exact_tier(&self) -> bool {
        self.tier() != Tier::Blackbox
    }

    pub fn affine_pieces(&self) -> Option<&[AffinePiece]> {
        match &self.repr {
            Repr::MaxAffine(p) => Some(p),
            _ => None,
        }
    }

    /// Pieces of the underlying `max_affine` model when `f` is a monotone
    /// transform of one, so the two share their faces.
    pub(crate) fn face_pieces(&self) -> Option<&[AffinePiece]> {
        match &self.repr {
            Repr::MaxAffine(p) => Some(p),
            Repr::Composed { inner, .. } | Repr::PositivePart(inner) => inner.face_pieces(),
            Repr::Scaled { k, inner } if *k > 0.0 => inner.face_pieces(),
            _ => None,
        }
    }

    /// `f(x)` without argument checks; NaN from a black box is passed through.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.repr {
            Repr::MaxAffine(p) => p.iter().map(|q| q.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            Repr::MaxSmooth(p) => p.iter().map(|q| (q.value)(x)).fold(f64::NEG_INFINITY, f64::max),
            Repr::Opaque(e) => {
                if let Some(d) = &self.domain {
                    if !d.contains(x) {
                        return f64::INFINITY;
                    }
                }
                e(x)
            }
            Repr::Composed { gauge, inner } => gauge.eval_extended(inner.value(x)),
            Repr::PositivePart(inner) => {
                let v = inner.value(x);
                if v.is_nan() {
                    v
                } else {
                    v.max(0.0)
                }
            }
            Repr::Scaled { k, inner } => k * inner.value(x),
        }
    }

    /// `f(x) ∈ R ∪ {+∞}`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        let v = self.value(x);
        if v.is_nan() {
            return Err(Error::NumericFailure {
                message: "function returned NaN".into(),
                best: x.to_vec(),
                residual: f64::NAN,
            });
        }
        if v == f64::NEG_INFINITY {
            return Err(Error::NumericFailure {
                message: "function returned -inf".into(),
                best: x.to_vec(),
                residual: f64::NAN,
            });
        }
        Ok(v)
    }

    /// Values on many points, in input order.
    pub fn values(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.par_iter().map(|p| self.value(p)).collect()
    }

    /// Gradients of the pieces within `tol` of the maximum at `x`.
    pub fn active_gradients(&self, x: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
        check_point(x, self.dim)?;
        match &self.repr {
            Repr::MaxAffine(p) => {
                let fx = self.value(x);
                Ok(p.iter().filter(|q| q.eval(x) >= fx - tol).map(|q| q.a.clone()).collect())
            }
            Repr::MaxSmooth(p) => {
                let vals: Vec<f64> = p.iter().map(|q| (q.value)(x)).collect();
                let fx = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
                Ok(p.iter().zip(&vals).filter(|(_, v)| **v >= fx - tol).map(|(q, _)| (q.gradient)(x)).collect())
            }
            _ => Err(Error::UnsupportedTier(self.tier().to_string())),
        }
    }

    /// Indices of the active pieces at `x`.
    pub fn active_indices(&self, x: &[f64], tol: f64) -> Vec<usize> {
        match &self.repr {
            Repr::MaxAffine(p) => {
                let fx = self.value(x);
                (0..p.len()).filter(|&i| p[i].eval(x) >= fx - tol).collect()
            }
            Repr::MaxSmooth(p) => {
                let fx = self.value(x);
                (0..p.len()).filter(|&i| (p[i].value)(x) >= fx - tol).collect()
            }
            _ => Vec::new(),
        }
    }

    /// `f₊ = max(f, 0)`; exact tiers stay exact by appending a zero piece.
    pub fn positive_part(&self) -> FunctionModel {
        let mut out = self.clone();
        match &self.repr {
            Repr::MaxAffine(p) => {
                let mut q = p.clone();
                q.push(AffinePiece::new(vec![0.0; self.dim], 0.0));
                out.repr = Repr::MaxAffine(q);
            }
            Repr::MaxSmooth(p) => {
                let mut q = p.clone();
                q.push(SmoothPiece::affine(AffinePiece::new(vec![0.0; self.dim], 0.0)));
                out.repr = Repr::MaxSmooth(q);
            }
            _ => {
                out.repr = Repr::PositivePart(Arc::new(self.clone()));
            }
        }
        out
    }

    /// `k·f` for `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<FunctionModel> {
        if !(k > 0.0 && k.is_finite()) {
            return invalid(format!("scale must be positive, got {k}"));
        }
        let mut out = self.clone();
        out.repr = match &self.repr {
            Repr::MaxAffine(p) => Repr::MaxAffine(
                p.iter().map(|q| AffinePiece::new(q.a.iter().map(|v| k * v).collect(), k * q.b)).collect(),
            ),
            Repr::MaxSmooth(p) => Repr::MaxSmooth(
                p.iter()
                    .map(|q| {
                        let (v, g) = (q.value.clone(), q.gradient.clone());
                        SmoothPiece::new(
                            Arc::new(move |x| k * v(x)),
                            Arc::new(move |x| g(x).into_iter().map(|c| k * c).collect()),
                        )
                    })
                    .collect(),
            ),
            _ => Repr::Scaled { k, inner: Arc::new(self.clone()) },
        };
        Ok(out)
    }

    /// Sublevel distance at level `c`, one-shot.
    pub fn sublevel_distance(&self, q: &SublevelQuery) -> Result<SublevelDistance> {
        check_point(&q.point, self.dim)?;
        SublevelOracle::new(self, q.level, q.region.clone(), q.resolution, q.depth, q.norm)?.distance(&q.point)
    }
}

/// `φ∘f` with φ extended by 0 on negative arguments, so `[φ∘f ≤ 0] = [f ≤ 0]`.
///
/// Linear gauges keep exact tiers exact (`f₊/τ`); other gauges give a
/// black box whose sublevel sets are delegated to `f`.
pub fn compose_gauge(g: &Gauge, f: &FunctionModel) -> FunctionModel {
    if let Some(tau) = g.linear_tau() {
        if f.is_exact_tier() {
            return f.positive_part().scaled(1.0 / tau).expect("τ is positive for a valid gauge");
        }
    }
    FunctionModel {
        dim: f.dim,
        repr: Repr::Composed { gauge: g.clone(), inner: Arc::new(f.clone()) },
        domain: f.domain.clone(),
        convex: f.convex && g.convexity().is_convex(),
        convexity_source: if f.convex && g.convexity().is_convex() {
            ConvexitySource::Structural
        } else {
            ConvexitySource::Unknown
        },
    }
}

pub fn positive_part(f: &FunctionModel) -> FunctionModel {
    f.positive_part()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFlag {
    Exact,
    Sampled,
    /// No point of the sublevel set was found in the search region.
    EmptyInBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelDistance {
    #[serde(with = "crate::ext")]
    pub value: f64,
    pub witness: Option<Vec<f64>>,
    pub flag: DistanceFlag,
    /// `(lower, upper)` for sampled values.
    #[serde(with = "crate::ext::pair")]
    pub bracket: Option<(f64, f64)>,
}

impl SublevelDistance {
    pub fn evidence(&self) -> Evidence {
        if self.flag == DistanceFlag::Exact {
            Evidence::Exact
        } else {
            Evidence::Sampled
        }
    }

    fn exact(value: f64, witness: Option<Vec<f64>>) -> Self {
        SublevelDistance { value, witness, flag: DistanceFlag::Exact, bracket: None }
    }
}

/// Request for `d(x, [f ≤ c])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SublevelQuery {
    pub level: f64,
    pub point: Vec<f64>,
    /// Search box for sampled tiers; defaults to the domain box.
    pub region: Option<Region>,
    /// Grid samples per axis; defaults by dimension.
    pub resolution: Option<usize>,
    /// Bisection steps along the segment to the nearest feasible sample.
    pub depth: usize,
    pub norm: Norm,
}

impl SublevelQuery {
    pub fn new(level: f64, point: Vec<f64>) -> Self {
        SublevelQuery { level, point, region: None, resolution: None, depth: 40, norm: Norm::Euclidean }
    }

    pub fn region(mut self, r: Region) -> Self {
        self.region = Some(r);
        self
    }

    pub fn resolution(mut self, points: usize) -> Self {
        self.resolution = Some(points);
        self
    }

    pub fn depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }
}

enum OracleKind {
    Empty,
    Polyhedral(Polyhedron),
    ConvexSmooth { pieces: Vec<SmoothPiece>, anchors: Vec<Vec<f64>> },
    Grid { feasible: Vec<Vec<f64>> },
}

/// Reusable `x ↦ d(x, [f ≤ c])` for a fixed function, level and search grid.
pub struct SublevelOracle<'a> {
    f: &'a FunctionModel,
    /// Model whose sublevel set at `level` is queried (after delegation).
    target: FunctionModel,
    level: f64,
    kind: OracleKind,
    depth: usize,
    norm: Norm,
}

fn resolve_level(f: &FunctionModel, c: f64) -> Result<Option<(FunctionModel, f64)>> {
    match &f.repr {
        Repr::Composed { gauge, inner } => {
            if c < 0.0 {
                return Ok(None);
            }
            let c2 = if c == 0.0 { 0.0 } else { gauge.inverse_extended(c)? };
            resolve_level(inner, c2)
        }
        Repr::PositivePart(inner) => {
            if c < 0.0 {
                return Ok(None);
            }
            resolve_level(inner, c)
        }
        Repr::Scaled { k, inner } => resolve_level(inner, c / k),
        _ => Ok(Some((f.clone(), c))),
    }
}

impl<'a> SublevelOracle<'a> {
    pub fn new(
        f: &'a FunctionModel,
        level: f64,
        region: Option<Region>,
        resolution: Option<usize>,
        depth: usize,
        norm: Norm,
    ) -> Result<Self> {
        if !level.is_finite() {
            return invalid("sublevel level must be finite");
        }
        if let Some(r) = &region {
            if r.dim() != f.dim {
                return invalid("search region dimension mismatch");
            }
            if r.is_degenerate() {
                return invalid("search region has zero volume");
            }
        }
        if let Some(res) = resolution {
            if res < 2 {
                return invalid("grid resolution must be at least 2");
            }
        }
        let resolved = resolve_level(f, level)?;
        let Some((target, c)) = resolved else {
            return Ok(SublevelOracle { f, target: f.clone(), level, kind: OracleKind::Empty, depth, norm });
        };
        let search = region.clone().or_else(|| target.domain.clone()).or_else(|| f.domain.clone());
        if let (Some(r), Repr::Opaque(_), Some(d)) = (&search, &target.repr, &target.domain) {
            if !d.contains_region(r) {
                return invalid("search region must lie inside the domain box");
            }
        }
        let res = resolution.unwrap_or_else(|| default_resolution(f.dim));
        let grid_feasible = |r: &Region| -> Vec<Vec<f64>> {
            let pts = r.grid(res);
            let vals = target.values(&pts);
            pts.into_iter().zip(vals).filter(|(_, v)| *v <= c).map(|(p, _)| p).collect()
        };
        let kind = match &target.repr {
            Repr::MaxAffine(p) => {
                let rows = p.iter().map(|q| q.a.clone()).collect();
                let rhs = p.iter().map(|q| c - q.b).collect();
                OracleKind::Polyhedral(Polyhedron::new(target.dim, rows, rhs)?)
            }
            Repr::MaxSmooth(p) if target.convex => OracleKind::ConvexSmooth {
                pieces: p.clone(),
                anchors: search.as_ref().map(grid_feasible).unwrap_or_default(),
            },
            _ => {
                let Some(r) = search.as_ref() else {
                    return invalid("a search region is required for sampled sublevel distances");
                };
                if r.is_degenerate() {
                    return invalid("search region has zero volume");
                }
                OracleKind::Grid { feasible: grid_feasible(r) }
            }
        };
        Ok(SublevelOracle { f, target, level: c, kind, depth, norm })
    }

    pub fn function(&self) -> &FunctionModel {
        self.f
    }

    pub fn distance(&self, x: &[f64]) -> Result<SublevelDistance> {
        check_point(x, self.f.dim)?;
        match &self.kind {
            OracleKind::Empty => Ok(SublevelDistance::exact(f64::INFINITY, None)),
            OracleKind::Polyhedral(p) => Ok(match p.project(x, self.norm)? {
                Some(u) => SublevelDistance::exact(self.norm.dist(x, &u), Some(u)),
                None => SublevelDistance::exact(f64::INFINITY, None),
            }),
            OracleKind::ConvexSmooth { pieces, anchors } => self.cutting_plane(pieces, anchors, x),
            OracleKind::Grid { feasible } => Ok(self.grid_distance(feasible, x)),
        }
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.target.value(x) <= self.level
    }

    /// Bisection on the segment `[bad, good]` with `good` feasible.
    fn bisect(&self, bad: &[f64], good: &[f64], steps: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = bad.to_vec();
        let mut hi = good.to_vec();
        for _ in 0..steps {
            let mid = lerp(&lo, &hi, 0.5);
            if mid == lo || mid == hi {
                break;
            }
            if self.feasible(&mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    fn grid_distance(&self, feasible: &[Vec<f64>], x: &[f64]) -> SublevelDistance {
        if self.feasible(x) {
            return SublevelDistance::exact(0.0, Some(x.to_vec()));
        }
        if feasible.is_empty() {
            return SublevelDistance {
                value: f64::INFINITY,
                witness: None,
                flag: DistanceFlag::EmptyInBox,
                bracket: None,
            };
        }
        let mut ranked: Vec<(f64, usize)> =
            feasible.iter().enumerate().map(|(i, p)| (self.norm.dist(x, p), i)).collect();
        let keep = (2 * self.f.dim + 1).min(ranked.len());
        ranked.select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.truncate(keep);
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for (_, i) in ranked {
            let (lo, hi) = self.bisect(x, &feasible[i], self.depth);
            let up = self.norm.dist(x, &hi);
            let low = self.norm.dist(x, &lo);
            if best.as_ref().is_none_or(|b| up < b.1) {
                best = Some((low, up, hi));
            }
        }
        let (low, up, w) = best.expect("at least one feasible sample");
        SublevelDistance { value: up, witness: Some(w), flag: DistanceFlag::Sampled, bracket: Some((low.min(up), up)) }
    }

    /// Outer approximation by linearization cuts; exact when the projection
    /// onto the cuts is feasible or the bracket closes.
    fn cutting_plane(&self, pieces: &[SmoothPiece], anchors: &[Vec<f64>], x: &[f64]) -> Result<SublevelDistance> {
        let c = self.level;
        if self.feasible(x) {
            return Ok(SublevelDistance::exact(0.0, Some(x.to_vec())));
        }
        let n = x.len();
        let mut cuts = Polyhedron::whole_space(n);
        let mut lower = 0.0f64;
        let mut upper = f64::INFINITY;
        let mut witness: Option<Vec<f64>> = None;
        let feas_tol = 1e-12 * (1.0 + c.abs());
        for _ in 0..300 {
            let Some(u) = cuts.project(x, self.norm)? else {
                return Ok(SublevelDistance::exact(f64::INFINITY, None));
            };
            let du = self.norm.dist(x, &u);
            lower = lower.max(du);
            let vals: Vec<f64> = pieces.iter().map(|p| (p.value)(&u)).collect();
            let gu = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            // with feasible anchors the bracket decides, since a value
            // tolerance costs its square root in distance at quadratic growth
            if gu <= c || (anchors.is_empty() && gu - c <= feas_tol) {
                return Ok(SublevelDistance::exact(du, Some(u)));
            }
            if let Some(a) = anchors.iter().min_by(|p, q| self.norm.dist(&u, p).total_cmp(&self.norm.dist(&u, q))) {
                let (_, w) = self.bisect(&u, a, 60);
                let dw = self.norm.dist(x, &w);
                if dw < upper {
                    upper = dw;
                    witness = Some(w);
                }
            }
            if upper - lower <= 1e-10 * upper.max(1.0) {
                return Ok(SublevelDistance {
                    value: upper,
                    witness,
                    flag: DistanceFlag::Exact,
                    bracket: Some((lower, upper)),
                });
            }
            for (p, v) in pieces.iter().zip(&vals) {
                if *v > c {
                    let g = (p.gradient)(&u);
                    if g.iter().all(|gi| *gi == 0.0) {
                        return Ok(SublevelDistance::exact(f64::INFINITY, None));
                    }
                    let rhs = c - v + dot(&g, &u);
                    cuts.push(g, rhs);
                }
            }
        }
        Ok(SublevelDistance {
            value: if upper.is_finite() { upper } else { lower },
            witness,
            flag: DistanceFlag::Sampled,
            bracket: Some((lower, upper)),
        })
    }
}

/// `d(x, [f ≤ c])` for a query.
pub fn sublevel_distance(f: &FunctionModel, q: &SublevelQuery) -> Result<SublevelDistance> {
    f.sublevel_distance(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs() -> FunctionModel {
        FunctionModel::from_pieces(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)]).unwrap()
    }

    #[test]
    fn linear_composition_stays_polyhedral() {
        let g = Gauge::linear(2.0).unwrap();
        let h = compose_gauge(&g, &abs());
        assert_eq!(h.tier(), Tier::MaxAffine);
        assert_eq!(h.value(&[1.0]), 0.5);
    }

    #[test]
    fn composed_sublevel_delegates_to_inner_level() {
        let g = Gauge::holder(1.0, 0.5).unwrap();
        let h = compose_gauge(&g, &abs());
        // [sqrt|x| <= 1] = [|x| <= 1]
        let d = h.sublevel_distance(&SublevelQuery::new(1.0, vec![3.0])).unwrap();
        assert_eq!(d.flag, DistanceFlag::Exact);
        assert!((d.value - 2.0).abs() < 1e-12);
        let e = h.sublevel_distance(&SublevelQuery::new(-1.0, vec![3.0])).unwrap();
        assert_eq!(e.value, f64::INFINITY);
    }

    #[test]
    fn convex_smooth_distance_closes_bracket() {
        let sq = SmoothPiece::new(
            Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0),
            Arc::new(|x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]]),
        );
        let r = Region::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let f = FunctionModel::max_smooth(2, vec![sq], true, Some(r)).unwrap();
        let d = f.sublevel_distance(&SublevelQuery::new(0.0, vec![3.0, 4.0])).unwrap();
        assert!((d.value - 4.0).abs() < 1e-8, "{d:?}");
        assert_eq!(d.flag, DistanceFlag::Exact);
    }

    #[test]
    fn false_convexity_declaration_is_caught() {
        let r = Region::interval(-2.0, 2.0).unwrap();
        let f = FunctionModel::blackbox(1, Arc::new(|x: &[f64]| -x[0] * x[0]), r, true);
        assert!(f.is_err());
    }
}
