//! Canonically perturbed convex semi-infinite programs
//!
//! ```text
//! P(c, b):  minimize ψ(x) + ⟨c, x⟩  subject to  g_t(x) ≤ b_t,  t ∈ T,
//! ```
//!
//! with `T` discretized on a finite mesh. Provides the residual function
//! `f̄(x) = max{ψ(x) − ψ(x̄) + ⟨c̄, x − x̄⟩, max_t g_t(x) − b̄_t}`, Slater and
//! active-index checks, a cutting-plane solver, calmness of the level set
//! mapping and a search for sequences witnessing non-calmness.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{check_point, invalid, Error, Result};
use crate::errorbounds::{
    check_error_bound_direct, estimate_modulus, BoundForm, ConditionId, ErrorBoundSpec, ErrorBoundVerdict, Status,
    Witness,
};
use crate::function::{AffinePiece, Evidence, FunctionModel, SmoothPiece, SublevelOracle};
use crate::gauge::{check_growth_condition, Gauge, GrowthCheck};
use crate::geometry::{dot, sub};
use crate::grid::{ball_filter, log_grid, Region};
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::minnorm::min_norm_point;
use crate::slopes::{shell_points, OuterEstimate};

pub type IndexFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type IndexVecFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// `(t, x) ↦ g_t(x)`.
pub type FieldFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// `(t, x) ↦ ∇g_t(x)`.
pub type FieldGradFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// The convex objective ψ.
#[derive(Clone)]
pub enum Objective {
    /// `ψ(x) = max_k ⟨a_k, x⟩ + b_k`; a single zero piece is `ψ ≡ 0`.
    MaxAffine(Vec<AffinePiece>),
    /// A convex C¹ function.
    Smooth(SmoothPiece),
}

impl Objective {
    pub fn zero(n: usize) -> Objective {
        Objective::MaxAffine(vec![AffinePiece::new(vec![0.0; n], 0.0)])
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Objective::MaxAffine(p) => p.iter().map(|q| q.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            Objective::Smooth(s) => (s.value)(x),
        }
    }

    /// Gradients of the active pieces (one gradient for smooth ψ).
    fn subgradients(&self, x: &[f64], tol: f64) -> Vec<Vec<f64>> {
        match self {
            Objective::MaxAffine(p) => {
                let v = self.eval(x);
                p.iter().filter(|q| q.eval(x) >= v - tol * v.abs().max(1.0)).map(|q| q.a.clone()).collect()
            }
            Objective::Smooth(s) => vec![(s.gradient)(x)],
        }
    }
}

/// The constraint family `t ↦ g_t`.
#[derive(Clone)]
pub enum ConstraintFamily {
    /// `g_t(x) = ⟨coef(t), x⟩ + offset(t)`.
    Affine { coef: IndexVecFn, offset: IndexFn },
    /// Convex C¹ functions `g_t`.
    Smooth { value: FieldFn, gradient: FieldGradFn },
}

/// A finite discretization of the index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub points: Vec<f64>,
    /// Largest gap between consecutive points.
    pub mesh_size: f64,
}

impl IndexSet {
    /// `count` equally spaced points on `[a, b]`.
    pub fn interval(a: f64, b: f64, count: usize) -> Result<IndexSet> {
        if !(a.is_finite() && b.is_finite() && a <= b) || count == 0 || (count == 1 && a < b) {
            return invalid(format!("bad index interval [{a}, {b}] with {count} points"));
        }
        let points: Vec<f64> = if count == 1 {
            vec![a]
        } else {
            (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect()
        };
        IndexSet::points(points)
    }

    pub fn points(points: Vec<f64>) -> Result<IndexSet> {
        if points.is_empty() || points.iter().any(|t| !t.is_finite()) {
            return invalid("index set must be finite and nonempty");
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        let mesh_size = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(IndexSet { points, mesh_size })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-8;

/// A discretized convex SIP instance with its nominal data and reference
/// solution.
#[derive(Clone)]
pub struct SIProblem {
    n: usize,
    objective: Objective,
    constraints: ConstraintFamily,
    index: IndexSet,
    /// `(coef(t), offset(t))` for affine families.
    rows: Option<Vec<AffinePiece>>,
    c_bar: Vec<f64>,
    b_bar: Vec<f64>,
    x_bar: Vec<f64>,
    domain: Region,
    nominal_value: f64,
}

impl std::fmt::Debug for SIProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SIProblem")
            .field("n", &self.n)
            .field("indices", &self.index.len())
            .field("c_bar", &self.c_bar)
            .field("x_bar", &self.x_bar)
            .field("domain", &self.domain)
            .finish()
    }
}

impl SIProblem {
    /// Builds the instance and verifies that `x̄` is feasible for `b̄` and
    /// solves `P(c̄, b̄)` over `domain` to 1e−8.
    pub fn new(
        objective: Objective,
        constraints: ConstraintFamily,
        index: IndexSet,
        c_bar: Vec<f64>,
        b_bar: &dyn Fn(f64) -> f64,
        x_bar: Vec<f64>,
        domain: Region,
    ) -> Result<SIProblem> {
        let n = x_bar.len();
        check_point(&x_bar, n)?;
        check_point(&c_bar, n)?;
        if domain.dim() != n {
            return invalid("domain dimension mismatch");
        }
        if !domain.contains(&x_bar) {
            return invalid("x̄ must lie in the domain box");
        }
        match &objective {
            Objective::MaxAffine(p) if p.is_empty() || p.iter().any(|q| q.a.len() != n) => {
                return invalid("objective pieces must have dimension n")
            }
            _ => {}
        }
        let rows = match &constraints {
            ConstraintFamily::Affine { coef, offset } => {
                let rows: Vec<AffinePiece> =
                    index.points.iter().map(|&t| AffinePiece::new(coef(t), offset(t))).collect();
                if rows.iter().any(|r| r.a.len() != n || r.a.iter().any(|v| !v.is_finite()) || !r.b.is_finite()) {
                    return invalid("affine constraint data must be finite with dimension n");
                }
                Some(rows)
            }
            ConstraintFamily::Smooth { .. } => None,
        };
        let b_bar: Vec<f64> = index.points.iter().map(|&t| b_bar(t)).collect();
        if b_bar.iter().any(|v| !v.is_finite()) {
            return invalid("b̄ must be finite on the index set");
        }
        let mut p =
            SIProblem { n, objective, constraints, index, rows, c_bar, b_bar, x_bar, domain, nominal_value: 0.0 };
        let viol = p.max_violation(&p.b_bar, &p.x_bar);
        if viol > FEAS_TOL {
            return invalid(format!("x̄ violates the constraints by {viol}"));
        }
        p.nominal_value = p.objective.eval(&p.x_bar) + dot(&p.c_bar, &p.x_bar);
        let sol = solve_instance(&p, &p.c_bar, &p.b_bar, &Config::default())?;
        if p.nominal_value > sol.value + OPT_TOL * (1.0 + sol.value.abs()) {
            return invalid(format!(
                "x̄ is not optimal: its value {} exceeds the optimum {}",
                p.nominal_value, sol.value
            ));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> &IndexSet {
        &self.index
    }

    pub fn x_bar(&self) -> &[f64] {
        &self.x_bar
    }

    pub fn c_bar(&self) -> &[f64] {
        &self.c_bar
    }

    pub fn b_bar(&self) -> &[f64] {
        &self.b_bar
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    /// `ψ(x̄) + ⟨c̄, x̄⟩`.
    pub fn nominal_value(&self) -> f64 {
        self.nominal_value
    }

    pub fn is_affine(&self) -> bool {
        self.rows.is_some() && matches!(self.objective, Objective::MaxAffine(_))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// `g_t(x)` for `t` at position `k` of the index set.
    pub fn constraint(&self, k: usize, x: &[f64]) -> f64 {
        match (&self.rows, &self.constraints) {
            (Some(r), _) => r[k].eval(x),
            (None, ConstraintFamily::Smooth { value, .. }) => value(self.index.points[k], x),
            (None, ConstraintFamily::Affine { .. }) => unreachable!("affine rows are precomputed"),
        }
    }

    fn constraint_gradient(&self, k: usize, x: &[f64]) -> Vec<f64> {
        match (&self.rows, &self.constraints) {
            (Some(r), _) => r[k].a.clone(),
            (None, ConstraintFamily::Smooth { gradient, .. }) => gradient(self.index.points[k], x),
            (None, ConstraintFamily::Affine { .. }) => unreachable!("affine rows are precomputed"),
        }
    }

    /// `max_t g_t(x) − b_t`.
    pub fn max_violation(&self, b: &[f64], x: &[f64]) -> f64 {
        (0..self.index.len()).map(|k| self.constraint(k, x) - b[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ψ(x) − ψ(x̄) + ⟨c̄, x − x̄⟩`.
    pub fn objective_gap(&self, x: &[f64]) -> f64 {
        self.objective.eval(x) + dot(&self.c_bar, x) - self.nominal_value
    }
}

/// `f̄` as a `max_affine` model for affine data, else a convex `max_smooth`
/// model on the domain box.
pub fn residual_function(p: &SIProblem) -> Result<FunctionModel> {
    let shift = p.nominal_value;
    if let (Some(rows), Objective::MaxAffine(obj)) = (&p.rows, &p.objective) {
        let mut pieces: Vec<AffinePiece> = obj
            .iter()
            .map(|q| AffinePiece::new(q.a.iter().zip(&p.c_bar).map(|(a, c)| a + c).collect(), q.b - shift))
            .collect();
        pieces.extend(rows.iter().zip(&p.b_bar).map(|(r, b)| AffinePiece::new(r.a.clone(), r.b - b)));
        return FunctionModel::max_affine(pieces);
    }
    let mut pieces = Vec::new();
    let c = p.c_bar.clone();
    match &p.objective {
        Objective::MaxAffine(obj) => {
            for q in obj {
                pieces.push(SmoothPiece::affine(AffinePiece::new(
                    q.a.iter().zip(&c).map(|(a, c)| a + c).collect(),
                    q.b - shift,
                )));
            }
        }
        Objective::Smooth(s) => {
            let (v, g) = (s.value.clone(), s.gradient.clone());
            let (c1, c2) = (c.clone(), c.clone());
            pieces.push(SmoothPiece::new(
                Arc::new(move |x| v(x) + dot(&c1, x) - shift),
                Arc::new(move |x| g(x).iter().zip(&c2).map(|(a, b)| a + b).collect()),
            ));
        }
    }
    for (k, &t) in p.index.points.iter().enumerate() {
        let b = p.b_bar[k];
        match &p.constraints {
            ConstraintFamily::Affine { .. } => {
                let r = &p.rows.as_ref().expect("affine rows are precomputed")[k];
                pieces.push(SmoothPiece::affine(AffinePiece::new(r.a.clone(), r.b - b)));
            }
            ConstraintFamily::Smooth { value, gradient } => {
                let (v, g) = (value.clone(), gradient.clone());
                pieces.push(SmoothPiece::new(Arc::new(move |x| v(t, x) - b), Arc::new(move |x| g(t, x))));
            }
        }
    }
    FunctionModel::max_smooth(p.n, pieces, true, Some(p.domain.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SipSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// The objective keeps decreasing beyond the domain box.
    pub unbounded: bool,
    /// Grid points of the domain that are feasible and optimal to
    /// `value_tolerance`, plus `x`.
    pub solution_sample: Vec<Vec<f64>>,
    pub value_tolerance: f64,
    pub mesh_size: f64,
}

const KELLEY_MAX_ITER: usize = 2000;
/// Relative gap accepted once the LP stops moving.
const STALL_TOL: f64 = 1e-7;

fn kelley(p: &SIProblem, c: &[f64], b: &[f64], bx: &Region) -> Result<(Vec<f64>, f64, usize)> {
    let n = p.n;
    let mut lp = LinearProgram::default();
    let xs: Vec<usize> = (0..n).map(|i| lp.add_var(c[i], (bx.lo[i], bx.hi[i]))).collect();
    let z = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let objective_cut = |lp: &mut LinearProgram, x0: &[f64]| {
        if let Objective::Smooth(s) = &p.objective {
            let g = (s.gradient)(x0);
            let v = (s.value)(x0);
            let mut terms: Vec<(usize, f64)> = xs.iter().zip(&g).map(|(&i, gi)| (i, *gi)).collect();
            terms.push((z, -1.0));
            lp.add_row(terms, Cmp::Le, dot(&g, x0) - v);
        }
    };
    match &p.objective {
        Objective::MaxAffine(pieces) => {
            for q in pieces {
                let mut terms: Vec<(usize, f64)> = xs.iter().zip(&q.a).map(|(&i, a)| (i, *a)).collect();
                terms.push((z, -1.0));
                lp.add_row(terms, Cmp::Le, -q.b);
            }
        }
        Objective::Smooth(_) => {
            objective_cut(&mut lp, &bx.center());
            objective_cut(&mut lp, &bx.clamp(&p.x_bar));
            for corner in [bx.lo.clone(), bx.hi.clone()] {
                objective_cut(&mut lp, &corner);
            }
        }
    }
    let constraint_cut = |lp: &mut LinearProgram, k: usize, x0: &[f64]| {
        let g = p.constraint_gradient(k, x0);
        let v = p.constraint(k, x0);
        let terms: Vec<(usize, f64)> = xs.iter().zip(&g).map(|(&i, gi)| (i, *gi)).collect();
        lp.add_row(terms, Cmp::Le, b[k] - v + dot(&g, x0));
    };
    if p.rows.is_some() {
        for k in 0..p.index.len() {
            constraint_cut(&mut lp, k, &p.x_bar);
        }
    } else {
        let x0 = bx.center();
        let k = worst_index(p, b, &x0);
        constraint_cut(&mut lp, k, &x0);
    }
    let mut prev: Option<Vec<f64>> = None;
    for it in 1..=KELLEY_MAX_ITER {
        let (sol, model) = match lp.solve()? {
            LpOutcome::Optimal { z: sol, value } => (sol, value),
            LpOutcome::Infeasible => {
                return Err(Error::Precondition("the instance is infeasible in the domain box".into()))
            }
            LpOutcome::Unbounded => return Err(Error::Internal("cutting-plane LP unbounded".into())),
        };
        let x: Vec<f64> = sol[..n].to_vec();
        let psi = p.objective.eval(&x);
        let k = worst_index(p, b, &x);
        let viol = p.constraint(k, &x) - b[k];
        let gap = psi - sol[n];
        let value = psi + dot(c, &x);
        let tol = 1e-9 * (1.0 + value.abs());
        let feasible = viol <= FEAS_TOL;
        if feasible && gap <= tol {
            return Ok((x, value.min(model.max(value - tol)), it));
        }
        // a repeated iterate means the new cut is within the LP tolerance
        let stalled = prev
            .as_ref()
            .is_some_and(|q: &Vec<f64>| q.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs())));
        if stalled {
            if feasible && gap <= STALL_TOL * (1.0 + value.abs()) {
                return Ok((x, value, it));
            }
            return Err(Error::NumericFailure {
                message: "cutting planes stalled".into(),
                best: x,
                residual: gap.max(viol),
            });
        }
        prev = Some(x.clone());
        if !feasible {
            constraint_cut(&mut lp, k, &x);
        }
        if gap > tol {
            objective_cut(&mut lp, &x);
        }
    }
    Err(Error::NumericFailure {
        message: "cutting planes did not converge".into(),
        best: p.x_bar.clone(),
        residual: f64::NAN,
    })
}

fn worst_index(p: &SIProblem, b: &[f64], x: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, bk) in b.iter().enumerate().take(p.index.len()) {
        let v = p.constraint(k, x) - bk;
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Minimizes `ψ + ⟨c, ·⟩` over the discretized feasible set in the domain
/// box by cutting planes.
pub fn solve_instance(p: &SIProblem, c: &[f64], b: &[f64], cfg: &Config) -> Result<SipSolution> {
    check_point(c, p.n)?;
    if b.len() != p.index.len() || b.iter().any(|v| !v.is_finite()) {
        return invalid("b must give one finite value per index point");
    }
    let (x, value, iterations) = kelley(p, c, b, &p.domain)?;
    let on_boundary =
        x.iter().enumerate().any(|(i, v)| (v - p.domain.lo[i]).abs() <= 1e-9 || (v - p.domain.hi[i]).abs() <= 1e-9);
    let unbounded = on_boundary && {
        let wide = p.domain.scaled(4.0);
        let (_, v2, _) = kelley(p, c, b, &wide)?;
        v2 < value - 1e-7 * (1.0 + value.abs())
    };
    let value_tolerance = 1e-7 * (1.0 + value.abs());
    let grid = p.domain.grid(cfg.resolution(p.n));
    let mut solution_sample: Vec<Vec<f64>> = grid
        .into_par_iter()
        .filter(|u| p.max_violation(b, u) <= FEAS_TOL && p.objective.eval(u) + dot(c, u) <= value + value_tolerance)
        .collect();
    if !solution_sample.contains(&x) {
        solution_sample.push(x.clone());
    }
    Ok(SipSolution { x, value, iterations, unbounded, solution_sample, value_tolerance, mesh_size: p.index.mesh_size })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaterStatus {
    Holds,
    Fails,
    /// The minimum of `max_t g_t − b̄_t` lies in `[−tol, 0]`.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterResult {
    pub status: SlaterStatus,
    pub witness: Option<Vec<f64>>,
    /// Smallest `max_t g_t(x) − b̄_t` found.
    pub min_value: f64,
    pub tolerance: f64,
}

pub const SLATER_TOL: f64 = 1e-6;

/// Looks for `x̂` with `g_t(x̂) < b̄_t` for all `t` by minimizing
/// `max_t g_t − b̄_t` over the domain box: grid search then compass descent.
pub fn slater_check(p: &SIProblem, cfg: &Config) -> SlaterResult {
    let h = |x: &[f64]| p.max_violation(&p.b_bar, x);
    let res = cfg.resolution(p.n).min(101);
    let grid = p.domain.grid(res);
    let vals: Vec<f64> = grid.par_iter().map(|x| h(x)).collect();
    let (mut best, mut x) = (f64::INFINITY, p.x_bar.clone());
    for (u, v) in grid.into_iter().zip(vals) {
        if v < best {
            best = v;
            x = u;
        }
    }
    let mut step = p.domain.spacing(res).max(1e-3);
    while step > 1e-12 {
        let mut moved = false;
        for i in 0..p.n {
            for s in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += s * step;
                if !p.domain.contains(&y) {
                    continue;
                }
                let v = h(&y);
                if v < best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    let status = if best < -SLATER_TOL {
        SlaterStatus::Holds
    } else if best <= 0.0 {
        SlaterStatus::Inconclusive
    } else {
        SlaterStatus::Fails
    };
    SlaterResult {
        witness: (status == SlaterStatus::Holds).then_some(x),
        status,
        min_value: best,
        tolerance: SLATER_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveIndexSet {
    /// Positions in the index set.
    pub indices: Vec<usize>,
    pub t_values: Vec<f64>,
    pub tol: f64,
}

/// `{t : |g_t(x) − b_t| ≤ tol}` for `x` feasible within `tol`.
pub fn active_indices(p: &SIProblem, b: &[f64], x: &[f64], tol: f64) -> Result<ActiveIndexSet> {
    check_point(x, p.n)?;
    if b.len() != p.index.len() {
        return invalid("b must give one value per index point");
    }
    let viol = p.max_violation(b, x);
    if viol > tol {
        return invalid(format!("x is infeasible: max violation {viol}"));
    }
    let indices: Vec<usize> = (0..p.index.len()).filter(|&k| (p.constraint(k, x) - b[k]).abs() <= tol).collect();
    let t_values = indices.iter().map(|&k| p.index.points[k]).collect();
    Ok(ActiveIndexSet { indices, t_values, tol })
}

/// Comparison of the sampled solution set with the sampled `[f̄ ≤ 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetIdentity {
    pub grid_points: usize,
    pub solution_points: usize,
    pub sublevel_points: usize,
    pub symmetric_difference: usize,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCalmness {
    /// The φ-error bound of `f̄` at `x̄`.
    pub verdict: ErrorBoundVerdict,
    /// Calmness checked from its definition: each grid point `x` lies in
    /// `L(y)` for the parameter `y` obtained by clipping, and
    /// `d(x, S) ≤ φ(|y − ȳ|)` is tested against the sampled solution set.
    pub definition_check: ErrorBoundVerdict,
    pub set_identity: SetIdentity,
    /// `liminf φ(f̄(x)) / d(x, [f̄ ≤ 0])` at `x̄`.
    pub modulus: OuterEstimate,
    pub agree: bool,
}

/// φ-calmness of the level set mapping at `(ψ(x̄) + ⟨c̄, x̄⟩, b̄)`, which is
/// equivalent to the φ-error bound of `f̄` at `x̄` with the same δ and μ.
pub fn calmness_of_level_mapping(p: &SIProblem, g: &Gauge, delta: f64, mu: f64, cfg: &Config) -> Result<LevelCalmness> {
    let f = residual_function(p)?;
    let spec = ErrorBoundSpec::new(&f, BoundForm::Gauge(g.clone()), p.x_bar.clone(), delta, mu)?;
    let mut verdict = check_error_bound_direct(&f, &spec, Some(&p.domain), cfg)?;
    verdict.condition = ConditionId::LevelMappingCalmness;
    verdict.notes.push(format!("index set discretized with mesh size {}", p.index.mesh_size));

    let sol = solve_instance(p, &p.c_bar, &p.b_bar, cfg)?;
    let set_identity = set_identity(p, &f, &sol, cfg);
    let definition_check = definition_check(p, g, delta, mu, &sol, cfg)?;
    let modulus = estimate_modulus(&f, &p.x_bar, Some(g), Some(&p.domain), cfg)?;
    let agree = verdict.status == definition_check.status;
    Ok(LevelCalmness { verdict, definition_check, set_identity, modulus, agree })
}

fn set_identity(p: &SIProblem, f: &FunctionModel, sol: &SipSolution, cfg: &Config) -> SetIdentity {
    let tol = sol.value_tolerance;
    let grid = p.domain.grid(cfg.resolution(p.n));
    let flags: Vec<(bool, bool)> = grid
        .par_iter()
        .map(|u| {
            let in_s =
                p.max_violation(&p.b_bar, u) <= FEAS_TOL && p.objective.eval(u) + dot(&p.c_bar, u) <= sol.value + tol;
            (in_s, f.value(u) <= tol)
        })
        .collect();
    let solution_points = flags.iter().filter(|f| f.0).count();
    let sublevel_points = flags.iter().filter(|f| f.1).count();
    let symmetric_difference = flags.iter().filter(|f| f.0 != f.1).count();
    SetIdentity {
        grid_points: grid.len(),
        solution_points,
        sublevel_points,
        symmetric_difference,
        tolerance: tol,
        holds: symmetric_difference == 0,
    }
}

fn definition_check(
    p: &SIProblem,
    g: &Gauge,
    delta: f64,
    mu: f64,
    sol: &SipSolution,
    cfg: &Config,
) -> Result<ErrorBoundVerdict> {
    let res = cfg.resolution(p.n);
    let points = match p.domain.clip_to_ball(&p.x_bar, delta) {
        Some(b) => ball_filter(b.grid(res), &p.x_bar, delta, cfg.norm),
        None => Vec::new(),
    };
    let f = residual_function(p)?;
    let spec = ErrorBoundSpec::new(&f, BoundForm::Gauge(g.clone()), p.x_bar.clone(), delta, mu)?;
    let mut v = ErrorBoundVerdict::new(ConditionId::LevelMappingCalmness, spec.parameters());
    v.evidence = Evidence::Sampled;
    v.global_within_box = !delta.is_finite();
    let rows: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|x| {
            // smallest parameter move putting x into L(α, b)
            let alpha_move = (p.objective.eval(x) + dot(&p.c_bar, x) - p.nominal_value).max(0.0);
            let b_move = (0..p.index.len()).map(|k| (p.constraint(k, x) - p.b_bar[k]).max(0.0)).fold(0.0, f64::max);
            let r = alpha_move.max(b_move);
            if !(r > 0.0 && r < mu) {
                return None;
            }
            let d = sol.solution_sample.iter().map(|s| cfg.norm.dist(s, x)).fold(f64::INFINITY, f64::min);
            Some((r, d))
        })
        .collect();
    let mut worst: Option<(f64, Witness)> = None;
    for (x, row) in points.iter().zip(rows) {
        let Some((r, d)) = row else { continue };
        v.checked += 1;
        let rhs = g.eval_extended(r);
        if !cfg.le(d, rhs) && worst.as_ref().is_none_or(|(e, _)| d - rhs > *e) {
            worst = Some((
                d - rhs,
                Witness {
                    point: x.clone(),
                    f_value: r,
                    distance: d,
                    lhs: d,
                    rhs,
                    level: None,
                    inequality: "d(x,L(y_bar)) <= phi(|y - y_bar|)".into(),
                },
            ));
        }
    }
    match worst {
        Some((_, w)) => {
            v.status = Status::Fails;
            v.witness = Some(w);
        }
        None => v.status = Status::Holds,
    }
    Ok(v)
}

/// Search settings for [`falsify_calmness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyBudget {
    /// Ratios below this count as vanishing.
    pub threshold: f64,
    /// Number of successive shells that must fall below the threshold.
    pub successive: usize,
}

impl Default for FalsifyBudget {
    fn default() -> Self {
        FalsifyBudget { threshold: 1e-3, successive: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePoint {
    pub shell: u32,
    pub x: Vec<f64>,
    pub f_value: f64,
    /// `‖bⁿ − b̄‖∞` for the clipped `bⁿ_t = max{b̄_t, g_t(x)}`.
    pub b_norm: f64,
    /// `d(x, S(c̄, b̄))`.
    pub distance: f64,
    /// `φ(f̄(x)) / d(x, S)`, the quantity whose vanishing rules out every
    /// multiple of φ.
    pub level_ratio: f64,
    /// `φ(‖bⁿ − b̄‖∞) / d(x, S)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalsifyStatus {
    Witness,
    Exhausted,
}

/// Whether `0` lies in the convex hull of `c̄ + ∂ψ(x̄)` and the gradients at
/// `x̄` of constraints active along the whole sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierDiagnostic {
    pub common_active: Vec<f64>,
    pub min_norm: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyOutcome {
    pub status: FalsifyStatus,
    /// One point per nonempty shell, the one with the smallest level ratio.
    pub sequence: Vec<SequencePoint>,
    /// Largest sampled `‖bⁿ − b̄‖∞ / f̄(xⁿ)`.
    pub n_estimate: f64,
    /// `max{n_estimate, 1}`, used for the growth gate.
    pub n_effective: f64,
    pub growth: GrowthCheck,
    pub min_level_ratio: f64,
    pub multiplier: Option<MultiplierDiagnostic>,
    pub slater: SlaterResult,
    pub evidence: Evidence,
}

/// Searches shells `xⁿ → x̄` with `f̄(xⁿ) ↓ 0` for sequences along which
/// `φ(f̄(xⁿ)) / d(xⁿ, S)` vanishes, which rules out calmness of the level set
/// mapping for every multiple of φ. Reports `φ(‖bⁿ − b̄‖∞)/d(xⁿ, S)` along
/// the chosen points.
pub fn falsify_calmness(p: &SIProblem, g: &Gauge, budget: &FalsifyBudget, cfg: &Config) -> Result<FalsifyOutcome> {
    let slater = slater_check(p, cfg);
    if slater.status != SlaterStatus::Holds {
        return Err(Error::Precondition(format!(
            "the Slater condition is not established (min of max_t g_t − b̄_t is {})",
            slater.min_value
        )));
    }
    let f = residual_function(p)?;
    let oracle =
        SublevelOracle::new(&f, 0.0, Some(p.domain.clone()), Some(cfg.resolution(p.n)), cfg.bisection_depth, cfg.norm)?;
    let b_norm = |x: &[f64]| (0..p.index.len()).map(|k| (p.constraint(k, x) - p.b_bar[k]).max(0.0)).fold(0.0, f64::max);
    let mut shells: Vec<(u32, Vec<(Vec<f64>, f64, f64, f64)>)> = Vec::new();
    let mut n_estimate = 0.0f64;
    for k in cfg.shell_first..=cfg.shell_last {
        let pts = shell_points(&f, &p.x_bar, k, cfg);
        let rows: Vec<Result<(Vec<f64>, f64, f64, f64)>> = pts
            .into_par_iter()
            .map(|(x, v)| {
                let bn = b_norm(&x);
                let d = oracle.distance(&x)?.value;
                Ok((x, v, bn, d))
            })
            .collect();
        let rows: Vec<_> = rows.into_iter().collect::<Result<_>>()?;
        for r in &rows {
            n_estimate = n_estimate.max(r.2 / r.1);
        }
        shells.push((k, rows));
    }
    let n_effective = n_estimate.max(1.0);
    let growth = check_growth_condition(g, n_effective, &log_grid(1e-8, 1e2, 64))?;
    if !growth.finite {
        return Err(Error::Precondition(format!(
            "the gauge fails the growth condition for N = {n_effective} (sup ratio {})",
            growth.gamma
        )));
    }
    let mut sequence = Vec::new();
    for (k, rows) in shells {
        let mut best: Option<SequencePoint> = None;
        for (x, v, bn, d) in rows {
            if !(d > 0.0 && d.is_finite()) {
                continue;
            }
            let level_ratio = g.eval(v)? / d;
            if best.as_ref().is_none_or(|b| level_ratio < b.level_ratio) {
                best = Some(SequencePoint {
                    shell: k,
                    x,
                    f_value: v,
                    b_norm: bn,
                    distance: d,
                    level_ratio,
                    ratio: g.eval(bn)? / d,
                });
            }
        }
        sequence.extend(best);
    }
    let min_level_ratio = sequence.iter().map(|s| s.level_ratio).fold(f64::INFINITY, f64::min);
    let found = sequence.windows(budget.successive.max(1)).any(|w| w.iter().all(|s| s.level_ratio < budget.threshold));
    let status = if found { FalsifyStatus::Witness } else { FalsifyStatus::Exhausted };
    let multiplier = found.then(|| multiplier_diagnostic(p, &sequence)).transpose()?;
    Ok(FalsifyOutcome {
        status,
        sequence,
        n_estimate,
        n_effective,
        growth,
        min_level_ratio,
        multiplier,
        slater,
        evidence: Evidence::Sampled,
    })
}

fn multiplier_diagnostic(p: &SIProblem, sequence: &[SequencePoint]) -> Result<MultiplierDiagnostic> {
    let common: Vec<usize> =
        (0..p.index.len()).filter(|&k| sequence.iter().all(|s| p.constraint(k, &s.x) >= p.b_bar[k])).collect();
    let mut generators: Vec<Vec<f64>> = p
        .objective
        .subgradients(&p.x_bar, 1e-9)
        .into_iter()
        .map(|u| u.iter().zip(&p.c_bar).map(|(a, c)| a + c).collect())
        .collect();
    generators.extend(common.iter().map(|&k| p.constraint_gradient(k, &p.x_bar)));
    let mnp = min_norm_point(&generators)?;
    Ok(MultiplierDiagnostic {
        common_active: common.iter().map(|&k| p.index.points[k]).collect(),
        min_norm: mnp.norm,
        consistent: mnp.norm <= 1e-8,
    })
}

/// Sampled bound on `(ψ(x) − ψ(x̄) + ⟨c̄, x − x̄⟩) / ‖(c, b) − (c̄, b̄)‖` over
/// solutions `x ∈ B_δ(x̄)` of random perturbations within `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub samples: usize,
    /// Perturbations whose solution lies in `B_δ(x̄)`.
    pub used: usize,
    pub m_estimate: f64,
}

pub fn objective_gap_bound(p: &SIProblem, delta: f64, mu: f64, samples: usize, cfg: &Config) -> Result<GapBound> {
    if !(delta > 0.0 && mu > 0.0 && mu.is_finite()) {
        return invalid("δ must be positive and μ positive and finite");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = p.index.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let scale = 0.999 * mu;
            let dc: Vec<f64> = (0..p.n).map(|_| rng.gen_range(-1.0..=1.0) * scale / (p.n as f64).sqrt()).collect();
            let (s0, s1) = (rng.gen_range(-0.5..=0.5), rng.gen_range(-0.5..=0.5));
            let db: Vec<f64> = p.index.points.iter().map(|t| scale * (s0 + s1 * (t - lo) / span)).collect();
            (dc, db)
        })
        .collect();
    let ratios: Vec<Result<Option<f64>>> = draws
        .par_iter()
        .map(|(dc, db)| {
            let c: Vec<f64> = p.c_bar.iter().zip(dc).map(|(a, b)| a + b).collect();
            let b: Vec<f64> = p.b_bar.iter().zip(db).map(|(a, b)| a + b).collect();
            let sol = match solve_instance(p, &c, &b, cfg) {
                Ok(s) => s,
                Err(Error::Precondition(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            if sol.unbounded || cfg.norm.dist(&sol.x, &p.x_bar) >= delta {
                return Ok(None);
            }
            let size = cfg.norm.norm(dc).max(db.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            Ok((size > 0.0).then(|| p.objective_gap(&sol.x) / size))
        })
        .collect();
    let mut used = 0;
    let mut m = 0.0f64;
    for r in ratios {
        if let Some(v) = r? {
            used += 1;
            m = m.max(v);
        }
    }
    Ok(GapBound { samples, used, m_estimate: m })
}

/// `x − x̄`, exposed for diagnostics.
pub fn displacement(p: &SIProblem, x: &[f64]) -> Vec<f64> {
    sub(x, &p.x_bar)
}
