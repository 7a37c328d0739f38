//! Set-valued mappings `F: R^n ⇉ R^m`: graph distances, φ-subregularity,
//! graph φ-subregularity, calmness and slope conditions on the graph
//! distance function `f_F(x) = d((x, ȳ), gph F)`.
//!
//! Every distance here uses the max norm, on `X`, on `Y` and on `X × Y`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{check_point, invalid, Error, Result};
use crate::errorbounds::{
    verify_sufficient_nonlinear, BoundForm, ConditionId, ErrorBoundSpec, ErrorBoundVerdict, Mode, NonlinearCondition,
    Parameters, Status, SweepInfo, Witness,
};
use crate::function::{AffinePiece, Evidence, FunctionModel, SublevelOracle};
use crate::gauge::Gauge;
use crate::geometry::Norm;
use crate::grid::{ball_filter, log_grid, Region};
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::polyhedron::Polyhedron;
use crate::slopes::{slope, SlopeEstimate, SlopeKind};

/// `(a, b) ↦ d(b, G(a))` for a mapping `G`.
pub type ImageDistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

const NORM: Norm = Norm::Max;

#[derive(Clone)]
pub enum GraphKind {
    /// `gph F = {(x, y) : A (x, y) ≤ b}`.
    Polyhedral(Polyhedron),
    /// Closed-form image distances `d(y, F(x))` and, optionally,
    /// `d(x, F⁻¹(y))`.
    Functional { forward: ImageDistanceFn, inverse: Option<ImageDistanceFn> },
    /// A finite sample of the graph; `tol` is the matching tolerance for
    /// slices `F(x)` and `F⁻¹(y)`.
    Cloud { points: Vec<(Vec<f64>, Vec<f64>)>, tol: f64 },
}

impl std::fmt::Debug for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphKind::Polyhedral(p) => write!(f, "Polyhedral({} rows)", p.len()),
            GraphKind::Functional { inverse, .. } => {
                write!(f, "Functional(inverse: {})", inverse.is_some())
            }
            GraphKind::Cloud { points, tol } => {
                write!(f, "Cloud({} points, tol {tol})", points.len())
            }
        }
    }
}

/// A set-valued mapping with a reference pair `(x̄, ȳ) ∈ gph F` and a
/// search box in each space.
#[derive(Debug, Clone)]
pub struct SetValuedMapping {
    kind: GraphKind,
    x_dim: usize,
    y_dim: usize,
    x_bar: Vec<f64>,
    y_bar: Vec<f64>,
    x_region: Region,
    y_region: Region,
}

/// A distance together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingDistance {
    #[serde(with = "crate::ext")]
    pub value: f64,
    pub evidence: Evidence,
    /// No graph point was found in the search box.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubregularityVariant {
    /// `d(x, F⁻¹(ȳ)) ≤ φ(d(ȳ, F(x)))`.
    Plain,
    /// `d(x, F⁻¹(ȳ)) ≤ φ(d((x, ȳ), gph F))`.
    Graph,
}

fn default_region(center: &[f64], region: Option<Region>) -> Result<Region> {
    match region {
        Some(r) => {
            if r.dim() != center.len() {
                return invalid("region dimension mismatch");
            }
            Ok(r)
        }
        None => Region::cube(center, 1.0),
    }
}

impl SetValuedMapping {
    /// Mapping whose graph is `{(x, y) : rows·(x, y) ≤ rhs}`.
    pub fn polyhedral(
        x_dim: usize,
        y_dim: usize,
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        x_region: Option<Region>,
    ) -> Result<Self> {
        let graph = Polyhedron::new(x_dim + y_dim, rows, rhs)?;
        Self::build(GraphKind::Polyhedral(graph), x_dim, y_dim, x_bar, y_bar, x_region, None)
    }

    /// Mapping given by `forward(x, y) = d(y, F(x))` and optionally
    /// `inverse(y, x) = d(x, F⁻¹(y))`.
    pub fn functional(
        x_dim: usize,
        y_dim: usize,
        forward: ImageDistanceFn,
        inverse: Option<ImageDistanceFn>,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        x_region: Option<Region>,
        y_region: Option<Region>,
    ) -> Result<Self> {
        Self::build(GraphKind::Functional { forward, inverse }, x_dim, y_dim, x_bar, y_bar, x_region, y_region)
    }

    /// Mapping known through a sample of its graph.
    pub fn cloud(
        points: Vec<(Vec<f64>, Vec<f64>)>,
        tol: f64,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        x_region: Option<Region>,
    ) -> Result<Self> {
        if points.is_empty() {
            return invalid("a graph sample needs at least one point");
        }
        let (x_dim, y_dim) = (x_bar.len(), y_bar.len());
        if points.iter().any(|(u, v)| u.len() != x_dim || v.len() != y_dim) {
            return invalid("graph sample dimension mismatch");
        }
        if !(tol >= 0.0) {
            return invalid("matching tolerance must be nonnegative");
        }
        Self::build(GraphKind::Cloud { points, tol }, x_dim, y_dim, x_bar, y_bar, x_region, None)
    }

    fn build(
        kind: GraphKind,
        x_dim: usize,
        y_dim: usize,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        x_region: Option<Region>,
        y_region: Option<Region>,
    ) -> Result<Self> {
        if x_dim == 0 || y_dim == 0 {
            return invalid("both spaces need positive dimension");
        }
        check_point(&x_bar, x_dim)?;
        check_point(&y_bar, y_dim)?;
        let m = SetValuedMapping {
            x_region: default_region(&x_bar, x_region)?,
            y_region: default_region(&y_bar, y_region)?,
            kind,
            x_dim,
            y_dim,
            x_bar,
            y_bar,
        };
        if !m.in_graph(&m.x_bar, &m.y_bar) {
            return invalid("the reference pair does not lie on the graph");
        }
        Ok(m)
    }

    pub fn kind(&self) -> &GraphKind {
        &self.kind
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn x_bar(&self) -> &[f64] {
        &self.x_bar
    }

    pub fn y_bar(&self) -> &[f64] {
        &self.y_bar
    }

    pub fn x_region(&self) -> &Region {
        &self.x_region
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, GraphKind::Polyhedral(_))
    }

    fn in_graph(&self, x: &[f64], y: &[f64]) -> bool {
        match &self.kind {
            GraphKind::Polyhedral(p) => p.contains(&[x, y].concat(), 1e-9),
            GraphKind::Functional { forward, .. } => forward(x, y) <= 1e-12,
            GraphKind::Cloud { points, tol } => {
                points.iter().any(|(u, v)| NORM.dist(u, x) <= *tol && NORM.dist(v, y) <= *tol)
            }
        }
    }

    /// The inverse mapping `F⁻¹: R^m ⇉ R^n` at `(ȳ, x̄)`.
    pub fn inverse(&self) -> Result<SetValuedMapping> {
        let kind = match &self.kind {
            GraphKind::Polyhedral(p) => {
                let rows = p.rows().iter().map(|r| [&r[self.x_dim..], &r[..self.x_dim]].concat()).collect();
                GraphKind::Polyhedral(Polyhedron::new(self.x_dim + self.y_dim, rows, p.rhs().to_vec())?)
            }
            GraphKind::Functional { forward, inverse } => match inverse {
                Some(inv) => GraphKind::Functional { forward: inv.clone(), inverse: Some(forward.clone()) },
                None => {
                    return Err(Error::Precondition(
                        "inverting a functional mapping needs its inverse image distance".into(),
                    ))
                }
            },
            GraphKind::Cloud { points, tol } => {
                GraphKind::Cloud { points: points.iter().map(|(u, v)| (v.clone(), u.clone())).collect(), tol: *tol }
            }
        };
        Ok(SetValuedMapping {
            kind,
            x_dim: self.y_dim,
            y_dim: self.x_dim,
            x_bar: self.y_bar.clone(),
            y_bar: self.x_bar.clone(),
            x_region: self.y_region.clone(),
            y_region: self.x_region.clone(),
        })
    }

    /// `d(ȳ, F(x))`; `+∞` when `F(x)` is empty.
    pub fn image_distance(&self, x: &[f64]) -> Result<MappingDistance> {
        check_point(x, self.x_dim)?;
        Ok(match &self.kind {
            GraphKind::Polyhedral(p) => {
                let slice = slice_polyhedron(p, x, self.x_dim, true)?;
                let value = slice.distance(&self.y_bar, NORM)?;
                MappingDistance { value, evidence: Evidence::Exact, empty: value.is_infinite() }
            }
            GraphKind::Functional { forward, .. } => {
                let value = forward(x, &self.y_bar);
                MappingDistance { value, evidence: Evidence::Exact, empty: value.is_infinite() }
            }
            GraphKind::Cloud { points, tol } => {
                let value = points
                    .iter()
                    .filter(|(u, _)| NORM.dist(u, x) <= *tol)
                    .map(|(_, v)| NORM.dist(v, &self.y_bar))
                    .fold(f64::INFINITY, f64::min);
                MappingDistance { value, evidence: Evidence::Sampled, empty: value.is_infinite() }
            }
        })
    }

    /// `d((x, ȳ), gph F)` under the max product norm.
    pub fn graph_distance(&self, x: &[f64], cfg: &Config) -> Result<MappingDistance> {
        check_point(x, self.x_dim)?;
        Ok(match &self.kind {
            GraphKind::Polyhedral(p) => match polyhedral_graph_distance(p, x, &self.y_bar)? {
                Some(value) => MappingDistance { value, evidence: Evidence::Exact, empty: false },
                None => MappingDistance { value: f64::INFINITY, evidence: Evidence::Exact, empty: true },
            },
            GraphKind::Functional { forward, .. } => {
                let value =
                    functional_graph_distance(forward, x, &self.y_bar, &self.x_region, cfg.resolution(self.x_dim));
                MappingDistance { value, evidence: Evidence::Sampled, empty: value.is_infinite() }
            }
            GraphKind::Cloud { points, .. } => {
                let value = points
                    .iter()
                    .map(|(u, v)| NORM.dist(u, x).max(NORM.dist(v, &self.y_bar)))
                    .fold(f64::INFINITY, f64::min);
                MappingDistance { value, evidence: Evidence::Sampled, empty: value.is_infinite() }
            }
        })
    }

    /// The graph distance function `f_F`. Polyhedral graphs give an exact
    /// `max_affine` model; other kinds give a black box on the search box.
    pub fn graph_distance_function(&self, cfg: &Config) -> Result<FunctionModel> {
        match &self.kind {
            GraphKind::Polyhedral(p) => polyhedral_graph_distance_function(p, self.x_dim, &self.y_bar),
            _ => {
                let m = self.clone();
                let c = cfg.clone();
                FunctionModel::blackbox(
                    self.x_dim,
                    Arc::new(move |x| m.graph_distance(x, &c).map(|d| d.value).unwrap_or(f64::NAN)),
                    self.x_region.clone(),
                    false,
                )
            }
        }
    }

    /// The solution set `F⁻¹(ȳ)` as a polyhedron, for polyhedral graphs.
    pub fn inverse_image(&self) -> Option<Polyhedron> {
        match &self.kind {
            GraphKind::Polyhedral(p) => slice_polyhedron(p, &self.y_bar, self.x_dim, false).ok(),
            _ => None,
        }
    }
}

/// Slice of a polyhedron over `(x, y)`: the `y`-set at fixed `x` when
/// `fix_x`, else the `x`-set at fixed `y`.
fn slice_polyhedron(p: &Polyhedron, fixed: &[f64], x_dim: usize, fix_x: bool) -> Result<Polyhedron> {
    let mut rows = Vec::with_capacity(p.len());
    let mut rhs = Vec::with_capacity(p.len());
    for (r, b) in p.rows().iter().zip(p.rhs()) {
        let (fixed_part, free_part) = if fix_x { (&r[..x_dim], &r[x_dim..]) } else { (&r[x_dim..], &r[..x_dim]) };
        let shift: f64 = fixed_part.iter().zip(fixed).map(|(a, v)| a * v).sum();
        rows.push(free_part.to_vec());
        rhs.push(b - shift);
    }
    let dim = if fix_x { p.dim() - x_dim } else { x_dim };
    Polyhedron::new(dim, rows, rhs)
}

/// `min t` over `(u, v) ∈ P`, `|x − u|∞ ≤ t`, `|ȳ − v|∞ ≤ t`; `None` if the
/// graph is empty.
fn polyhedral_graph_distance(p: &Polyhedron, x: &[f64], y_bar: &[f64]) -> Result<Option<f64>> {
    let mut lp = LinearProgram::default();
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let vars: Vec<usize> = (0..p.dim()).map(|_| lp.add_var(0.0, free)).collect();
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let target: Vec<f64> = [x, y_bar].concat();
    for (k, &c) in target.iter().enumerate() {
        lp.add_row(vec![(vars[k], 1.0), (t, -1.0)], Cmp::Le, c);
        lp.add_row(vec![(vars[k], -1.0), (t, -1.0)], Cmp::Le, -c);
    }
    for (r, b) in p.rows().iter().zip(p.rhs()) {
        lp.add_row(r.iter().enumerate().map(|(k, a)| (vars[k], *a)).collect(), Cmp::Le, *b);
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value.max(0.0))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Internal("graph distance LP unbounded".into())),
    }
}

/// `f_F` as a max of affine functions: the epigraph of `f_F` is the
/// projection onto `(x, t)` of `{(x, t, u, v) : (u, v) ∈ P, |x − u|∞ ≤ t,
/// |ȳ − v|∞ ≤ t}`, computed by eliminating `v` and `u`.
fn polyhedral_graph_distance_function(p: &Polyhedron, n: usize, y_bar: &[f64]) -> Result<FunctionModel> {
    let m = y_bar.len();
    let dim = 2 * n + m + 1;
    let (t, u0, v0) = (n, n + 1, 2 * n + 1);
    let mut lifted = Polyhedron::whole_space(dim);
    for (r, b) in p.rows().iter().zip(p.rhs()) {
        let mut row = vec![0.0; dim];
        row[u0..u0 + n].copy_from_slice(&r[..n]);
        row[v0..v0 + m].copy_from_slice(&r[n..]);
        lifted.push(row, *b);
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut row = vec![0.0; dim];
            row[u0 + i] = s;
            row[i] = -s;
            row[t] = -1.0;
            lifted.push(row, 0.0);
        }
    }
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut row = vec![0.0; dim];
            row[v0 + j] = s;
            row[t] = -1.0;
            lifted.push(row, s * y_bar[j]);
        }
    }
    let mut epi = lifted.prune_redundant()?;
    for var in (n + 1..dim).rev() {
        epi = epi.eliminate(var).prune_redundant()?;
    }
    let mut pieces = Vec::new();
    for (r, b) in epi.rows().iter().zip(epi.rhs()) {
        let g = r[t];
        if g < -1e-12 {
            pieces.push(AffinePiece::new(r[..n].iter().map(|a| a / -g).collect(), -b / -g));
        } else if r[..n].iter().any(|a| a.abs() > 1e-12) || g > 1e-12 || *b < -1e-12 {
            return Err(Error::Internal("graph distance epigraph has an unexpected facet".into()));
        }
    }
    if pieces.is_empty() {
        return Err(Error::Precondition("the graph is empty".into()));
    }
    FunctionModel::max_affine(pieces)
}

/// `min_u max(|x − u|∞, d(ȳ, F(u)))` by a grid over the search box followed
/// by successive zooms around the best point.
fn functional_graph_distance(forward: &ImageDistanceFn, x: &[f64], y_bar: &[f64], region: &Region, res: usize) -> f64 {
    let obj = |u: &[f64]| NORM.dist(x, u).max(forward(u, y_bar));
    let mut best_u = x.to_vec();
    let mut best = obj(x);
    for u in region.grid(res) {
        let v = obj(&u);
        if v < best {
            best = v;
            best_u = u;
        }
    }
    if !best.is_finite() {
        return best;
    }
    let mut h = region.spacing(res);
    if h == 0.0 {
        h = 1.0;
    }
    for _ in 0..14 {
        let Ok(local) = Region::cube(&best_u, h) else {
            break;
        };
        for u in local.grid(11) {
            let v = obj(&u);
            if v < best {
                best = v;
                best_u = u;
            }
        }
        h /= 5.0;
    }
    best
}

/// `d(x, F⁻¹(ȳ))` evaluator bound to one mapping.
enum InverseDistance<'a> {
    Polyhedron(Polyhedron),
    Closed(&'a ImageDistanceFn, &'a [f64]),
    Oracle(Box<FunctionModel>, Region, usize, usize),
    Cloud(Vec<Vec<f64>>),
}

impl<'a> InverseDistance<'a> {
    fn new(m: &'a SetValuedMapping, cfg: &Config) -> Result<Self> {
        Ok(match &m.kind {
            GraphKind::Polyhedral(p) => InverseDistance::Polyhedron(slice_polyhedron(p, &m.y_bar, m.x_dim, false)?),
            GraphKind::Functional { inverse: Some(inv), .. } => InverseDistance::Closed(inv, &m.y_bar),
            GraphKind::Functional { forward, inverse: None } => {
                let fw = forward.clone();
                let y = m.y_bar.clone();
                let h = FunctionModel::blackbox(m.x_dim, Arc::new(move |x| fw(x, &y)), m.x_region.clone(), false)?;
                InverseDistance::Oracle(Box::new(h), m.x_region.clone(), cfg.resolution(m.x_dim), cfg.bisection_depth)
            }
            GraphKind::Cloud { points, tol } => InverseDistance::Cloud(
                points.iter().filter(|(_, v)| NORM.dist(v, &m.y_bar) <= *tol).map(|(u, _)| u.clone()).collect(),
            ),
        })
    }

    fn evidence(&self) -> Evidence {
        match self {
            InverseDistance::Polyhedron(_) | InverseDistance::Closed(..) => Evidence::Exact,
            _ => Evidence::Sampled,
        }
    }

    fn distance(&self, x: &[f64]) -> Result<f64> {
        match self {
            InverseDistance::Polyhedron(p) => p.distance(x, NORM),
            InverseDistance::Closed(inv, y) => Ok(inv(y, x)),
            InverseDistance::Oracle(h, region, res, depth) => {
                let o = SublevelOracle::new(h, 0.0, Some(region.clone()), Some(*res), *depth, NORM)?;
                Ok(o.distance(x)?.value)
            }
            InverseDistance::Cloud(us) => Ok(us.iter().map(|u| NORM.dist(u, x)).fold(f64::INFINITY, f64::min)),
        }
    }
}

fn mapping_parameters(m: &SetValuedMapping, g: &Gauge, delta: f64, mu: f64) -> Parameters {
    Parameters {
        form: format!("gauge({})", g.label()),
        tau: None,
        gauge: Some(g.summary()),
        anchor: m.x_bar.clone(),
        delta,
        mu,
        alpha: 1.0,
        beta: 1.0,
        slope: None,
        mode: None,
    }
}

fn check_positive(delta: f64, mu: f64) -> Result<()> {
    if !(delta > 0.0) || !(mu > 0.0) {
        return invalid(format!("δ and μ must be positive, got {delta} and {mu}"));
    }
    Ok(())
}

/// Checks plain or graph φ-subregularity on a grid of `B_δ(x̄)` intersected
/// with the mapping's search box.
pub fn check_subregularity(
    m: &SetValuedMapping,
    g: &Gauge,
    delta: f64,
    mu: f64,
    variant: SubregularityVariant,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    check_positive(delta, mu)?;
    let res = cfg.resolution(m.x_dim);
    let points = match m.x_region.clip_to_ball(&m.x_bar, delta) {
        Some(b) => ball_filter(b.grid(res), &m.x_bar, delta, NORM),
        None => Vec::new(),
    };
    let inverse = InverseDistance::new(m, cfg)?;
    let rows: Vec<Result<Option<(f64, f64, Evidence)>>> = points
        .par_iter()
        .map(|x| {
            let r = match variant {
                SubregularityVariant::Plain => m.image_distance(x)?,
                SubregularityVariant::Graph => m.graph_distance(x, cfg)?,
            };
            if !(r.value < mu) {
                return Ok(None);
            }
            Ok(Some((r.value, inverse.distance(x)?, r.evidence)))
        })
        .collect();
    let condition = match variant {
        SubregularityVariant::Plain => ConditionId::Subregularity,
        SubregularityVariant::Graph => ConditionId::GraphSubregularity,
    };
    let mut v = ErrorBoundVerdict::new(condition, mapping_parameters(m, g, delta, mu));
    v.evidence = inverse.evidence();
    v.global_within_box = !delta.is_finite();
    v.sweep =
        Some(SweepInfo { region: m.x_region.clone(), resolution: res, grid_points: points.len(), face_points: 0 });
    let inequality = match variant {
        SubregularityVariant::Plain => "d(x,F^-1(y)) <= phi(d(y,F(x)))",
        SubregularityVariant::Graph => "d(x,F^-1(y)) <= phi(d((x,y),gph F))",
    };
    let mut worst: Option<(f64, Witness)> = None;
    let mut gap = 0.0f64;
    for (x, row) in points.iter().zip(rows) {
        let Some((r, d, ev)) = row? else { continue };
        v.checked += 1;
        v.evidence = v.evidence.and(ev);
        let rhs = g.eval_extended(r);
        if d.is_finite() && rhs.is_finite() {
            gap = gap.max((rhs - d).abs());
        }
        if !cfg.le(d, rhs) {
            let excess = d - rhs;
            if worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                worst = Some((
                    excess,
                    Witness {
                        point: x.clone(),
                        f_value: r,
                        distance: d,
                        lhs: d,
                        rhs,
                        level: None,
                        inequality: inequality.into(),
                    },
                ));
            }
        }
    }
    v.max_equality_gap = Some(gap);
    match worst {
        Some((_, w)) => {
            v.status = Status::Fails;
            v.witness = Some(w);
        }
        None => v.status = Status::Holds,
    }
    Ok(v)
}

/// Outcome of the plain-to-graph conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    /// `c + 1`; the graph gauge is `(c + 1)φ`.
    pub factor: f64,
    pub gauge: crate::gauge::GaugeSummary,
    /// `min{δ, μ}/2`.
    #[serde(with = "crate::ext")]
    pub delta_prime: f64,
    /// Number of points at which `cφ(t) ≥ t` was checked.
    pub gate_points: usize,
    /// Smallest `cφ(t) − t` on the gate grid.
    pub gate_margin: f64,
    /// The gate is a finite sample, so the conversion is sampled evidence.
    pub evidence: Evidence,
}

const GATE_POINTS: usize = 256;

fn gate_grid(delta: f64) -> Vec<f64> {
    if delta.is_finite() {
        let hi = 1.5 * delta * (1.0 - 1e-9);
        log_grid(hi * 1e-9, hi, GATE_POINTS)
    } else {
        log_grid(1e-9, 1e9, GATE_POINTS)
    }
}

/// Smallest `c` with `cφ(t) ≥ t` on the gate grid over `]0, 3δ/2[`.
pub fn minimal_gate_constant(g: &Gauge, delta: f64) -> Result<f64> {
    let mut c = 0.0f64;
    for t in gate_grid(delta) {
        c = c.max(t / g.eval(t)?);
    }
    Ok(c)
}

/// Turns a plain φ-subregularity verdict that holds with `(δ, μ)` into the
/// constants of graph `(c+1)φ`-subregularity: `δ' = min{δ, μ}/2` and any μ'.
/// The hypothesis `cφ(t) ≥ t` on `]0, 3δ/2[` is checked on 256 log-spaced
/// points.
pub fn convert_subreg_to_graph(
    g: &Gauge,
    delta: f64,
    mu: f64,
    c: f64,
    plain: &ErrorBoundVerdict,
) -> Result<(Gauge, Conversion)> {
    check_positive(delta, mu)?;
    if !(c > 0.0 && c.is_finite()) {
        return invalid(format!("c must be positive and finite, got {c}"));
    }
    if plain.condition != ConditionId::Subregularity || plain.status != Status::Holds {
        return Err(Error::Precondition("the conversion needs a plain subregularity verdict that holds".into()));
    }
    let grid = gate_grid(delta);
    let mut margin = f64::INFINITY;
    for &t in &grid {
        let m = c * g.eval(t)? - t;
        if m < -1e-12 * t {
            return Err(Error::Precondition(format!("c·φ(t) ≥ t fails at t = {t} (c·φ(t) = {})", c * g.eval(t)?)));
        }
        margin = margin.min(m);
    }
    let gauge = g.scaled(c + 1.0)?;
    let conv = Conversion {
        factor: c + 1.0,
        gauge: gauge.summary(),
        delta_prime: delta.min(mu) / 2.0,
        gate_points: grid.len(),
        gate_margin: margin,
        evidence: Evidence::Sampled,
    };
    Ok((gauge, conv))
}

fn mapping_config(cfg: &Config) -> Config {
    cfg.clone().with_norm(NORM)
}

/// A slope of the graph distance function `f_F` at `x`.
pub fn mapping_slope(m: &SetValuedMapping, x: &[f64], kind: SlopeKind, cfg: &Config) -> Result<SlopeEstimate> {
    let c = mapping_config(cfg);
    let f = m.graph_distance_function(&c)?;
    let fx = f.evaluate(x)?;
    if !fx.is_finite() {
        return Err(Error::Precondition("the graph distance is infinite at x".into()));
    }
    slope(&f, x, kind, Some(&m.x_region), &c)
}

/// Sufficient condition for graph φ-subregularity through the slopes of
/// `f_F`; on success certifies `δ' = δ/(1+α)` and cross-checks graph
/// subregularity on `B_δ'`.
pub fn verify_mapping_sufficient(
    m: &SetValuedMapping,
    g: &Gauge,
    delta: f64,
    mu: f64,
    alpha: f64,
    mode: Mode,
    condition: NonlinearCondition,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    let c = mapping_config(cfg);
    let f = m.graph_distance_function(&c)?;
    let spec = ErrorBoundSpec::new(&f, BoundForm::Gauge(g.clone()), m.x_bar.clone(), delta, mu)?.with_alpha(alpha)?;
    let mut v = verify_sufficient_nonlinear(&f, &spec, condition, mode, Some(&m.x_region), &c)?;
    v.condition = match mode {
        Mode::Alternative => ConditionId::MappingSufficientAlternative,
        _ => ConditionId::MappingSufficient,
    };
    if let Some(radius) = v.certified_radius {
        let cross = check_subregularity(m, g, radius, mu, SubregularityVariant::Graph, &c)?;
        v.evidence = v.evidence.and(cross.evidence);
        if cross.status == Status::Fails {
            v.status = Status::Inconclusive;
            v.inconsistency = true;
            v.notes.push("condition holds but graph subregularity fails on the certified ball".into());
        } else if cross.status != Status::Holds {
            v.status = Status::Inconclusive;
        }
        v.cross_check = Some(Box::new(cross));
    }
    Ok(v)
}

/// φ-calmness of `F: Y ⇉ X` at `(ȳ, x̄)`, checked as plain φ-subregularity
/// of `F⁻¹` at `(x̄, ȳ)` with the same δ and μ.
pub fn check_calmness(m: &SetValuedMapping, g: &Gauge, delta: f64, mu: f64, cfg: &Config) -> Result<ErrorBoundVerdict> {
    let inv = m.inverse()?;
    let mut v = check_subregularity(&inv, g, delta, mu, SubregularityVariant::Plain, cfg)?;
    v.condition = ConditionId::Calmness;
    v.notes.push("checked as subregularity of the inverse mapping".into());
    Ok(v)
}
