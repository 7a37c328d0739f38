//! Turns a parsed spec into core objects.

use std::sync::Arc;

use errbound::function::{AffinePiece, FunctionModel, SmoothPiece};
use errbound::setvalued::SetValuedMapping;
use errbound::sip::{residual_function, ConstraintFamily, IndexSet, Objective, SIProblem};
use errbound::{Config, Gauge, Region};

use crate::expr::{parse_field_expr, parse_point_expr, Expr, ExprError};
use crate::spec::{AffineSpec, FunctionSpec, GaugeSpec, MappingSpec, RegionSpec, SipSpec, Spec};

/// A spec that parsed but does not describe a valid problem.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

fn fail<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ValidationError> {
    Err(ValidationError { path: path.into(), message: message.into() })
}

fn core<T>(path: &str, r: errbound::Result<T>) -> Result<T, ValidationError> {
    r.map_err(|e| ValidationError { path: path.into(), message: e.to_string() })
}

fn expr<T>(path: &str, r: Result<T, ExprError>) -> Result<T, ValidationError> {
    r.map_err(|e| ValidationError { path: path.into(), message: format!("expression error at {e}") })
}

/// The scalar function analysed by the function-level analyses.
pub struct Scalar {
    pub f: FunctionModel,
    pub anchor: Vec<f64>,
}

pub enum Problem {
    Function(Scalar),
    Mapping(SetValuedMapping),
    /// A semi-infinite program together with its residual function at `x̄`.
    Sip(Box<SIProblem>, Scalar),
}

impl Problem {
    pub fn scalar(&self) -> Option<&Scalar> {
        match self {
            Problem::Function(s) | Problem::Sip(_, s) => Some(s),
            Problem::Mapping(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Function(_) => "function",
            Problem::Mapping(_) => "mapping",
            Problem::Sip(..) => "sip",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Function(s) => s.f.dim(),
            Problem::Mapping(m) => m.x_dim(),
            Problem::Sip(p, _) => p.dim(),
        }
    }
}

pub struct Model {
    pub problem: Problem,
    pub gauge: Option<Gauge>,
    pub region: Option<Region>,
}

/// Command-line overrides of the spec's `config` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

pub fn config(spec: &Spec, o: &Overrides) -> Result<Config, ValidationError> {
    let mut cfg = Config::default();
    if let Some(n) = spec.config.norm {
        cfg = cfg.with_norm(n);
    }
    if let Some(s) = o.seed.or(spec.config.seed) {
        cfg = cfg.with_seed(s);
    }
    if let Some(g) = o.grid.or(spec.config.grid) {
        if g < 2 {
            return fail("config.grid", format!("needs at least 2 points per axis, got {g}"));
        }
        cfg = cfg.with_grid(g);
    }
    if let Some(t) = o.tol.or(spec.config.tol) {
        if !(t >= 0.0 && t.is_finite()) {
            return fail("config.tol", format!("must be a nonnegative number, got {t}"));
        }
        cfg.tol = t;
    }
    Ok(cfg)
}

fn region(path: &str, r: &RegionSpec, dim: usize) -> Result<Region, ValidationError> {
    let out = core(path, Region::new(r.lo.clone(), r.hi.clone()))?;
    if out.dim() != dim {
        return fail(path, format!("expected a box in R^{dim}, got R^{}", out.dim()));
    }
    Ok(out)
}

fn point(path: &str, x: &[f64], dim: usize) -> Result<Vec<f64>, ValidationError> {
    if x.len() != dim {
        return fail(path, format!("expected {dim} coordinates, got {}", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return fail(path, "coordinates must be finite");
    }
    Ok(x.to_vec())
}

fn affine_rows(path: &str, rows: &[AffineSpec], dim: usize) -> Result<Vec<AffinePiece>, ValidationError> {
    if rows.is_empty() {
        return fail(path, "needs at least one row");
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| Ok(AffinePiece::new(point(&format!("{path}[{i}].a"), &r.a, dim)?, r.b)))
        .collect()
}

/// Parses one gradient expression per variable with `parse`.
fn gradient(
    path: &str,
    sources: &[String],
    n: usize,
    parse: impl Fn(&str) -> Result<Expr, ExprError>,
) -> Result<Vec<Expr>, ValidationError> {
    if sources.len() != n {
        return fail(path, format!("expected {n} partial derivatives, got {}", sources.len()));
    }
    sources.iter().enumerate().map(|(i, s)| expr(&format!("{path}[{i}]"), parse(s))).collect()
}

fn smooth_piece(value: Expr, grad: Vec<Expr>) -> SmoothPiece {
    SmoothPiece::new(Arc::new(move |x| value.eval(x)), Arc::new(move |x| grad.iter().map(|g| g.eval(x)).collect()))
}

/// Coefficients and offset of an expression affine in its last `n`
/// arguments, read off by evaluation at the origin and the unit vectors.
fn affine_parts(e: &Expr, head: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut arg: Vec<f64> = head.iter().copied().chain(std::iter::repeat_n(0.0, n)).collect();
    let b = e.eval(&arg);
    let a = (0..n)
        .map(|i| {
            arg[head.len() + i] = 1.0;
            let v = e.eval(&arg) - b;
            arg[head.len() + i] = 0.0;
            v
        })
        .collect();
    (a, b)
}

fn anchor_or_origin(path: &str, anchor: &Option<Vec<f64>>, dim: usize) -> Result<Vec<f64>, ValidationError> {
    match anchor {
        Some(a) => point(path, a, dim),
        None => Ok(vec![0.0; dim]),
    }
}

fn function(spec: &FunctionSpec) -> Result<Scalar, ValidationError> {
    match spec {
        FunctionSpec::MaxAffine { pieces, anchor } => {
            let dim = pieces.first().map_or(0, |p| p.a.len());
            if dim == 0 {
                return fail("function.pieces", "needs at least one piece of positive dimension");
            }
            let rows = affine_rows("function.pieces", pieces, dim)?;
            let f = core("function", FunctionModel::max_affine(rows))?;
            Ok(Scalar { f, anchor: anchor_or_origin("function.anchor", anchor, dim)? })
        }
        FunctionSpec::MaxSmooth { dim, pieces, convex, domain, anchor } => {
            if *dim == 0 || pieces.is_empty() {
                return fail("function", "needs a positive dimension and at least one piece");
            }
            let parsed = pieces
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let path = format!("function.pieces[{i}]");
                    let value = expr(&format!("{path}.value"), parse_point_expr(&p.value, *dim))?;
                    let grad = gradient(&format!("{path}.gradient"), &p.gradient, *dim, |s| parse_point_expr(s, *dim))?;
                    Ok(smooth_piece(value, grad))
                })
                .collect::<Result<Vec<_>, ValidationError>>()?;
            let domain = domain.as_ref().map(|r| region("function.domain", r, *dim)).transpose()?;
            let f = core("function", FunctionModel::max_smooth(*dim, parsed, *convex, domain))?;
            Ok(Scalar { f, anchor: anchor_or_origin("function.anchor", anchor, *dim)? })
        }
        FunctionSpec::Expression { dim, expr: src, convex, domain, anchor } => {
            if *dim == 0 {
                return fail("function.dim", "must be positive");
            }
            let e = Arc::new(expr("function.expr", parse_point_expr(src, *dim))?);
            let anchor = anchor_or_origin("function.anchor", anchor, *dim)?;
            let domain = match domain {
                Some(r) => region("function.domain", r, *dim)?,
                None => core("function.domain", Region::cube(&anchor, 1.0))?,
            };
            let f = core("function", FunctionModel::blackbox(*dim, Arc::new(move |x| e.eval(x)), domain, *convex))?;
            Ok(Scalar { f, anchor })
        }
    }
}

fn mapping(spec: &MappingSpec) -> Result<SetValuedMapping, ValidationError> {
    match spec {
        MappingSpec::Polyhedral { x_dim, y_dim, inequalities, x_bar, y_bar, x_region } => {
            let rows = affine_rows("mapping.inequalities", inequalities, x_dim + y_dim)?;
            let xr = x_region.as_ref().map(|r| region("mapping.x_region", r, *x_dim)).transpose()?;
            core(
                "mapping",
                SetValuedMapping::polyhedral(
                    *x_dim,
                    *y_dim,
                    rows.iter().map(|r| r.a.clone()).collect(),
                    rows.iter().map(|r| r.b).collect(),
                    point("mapping.x_bar", x_bar, *x_dim)?,
                    point("mapping.y_bar", y_bar, *y_dim)?,
                    xr,
                ),
            )
        }
        MappingSpec::Sampled { x_dim, y_dim, points, tol, x_bar, y_bar, x_region } => {
            let pairs = points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let p = point(&format!("mapping.points[{i}]"), p, x_dim + y_dim)?;
                    Ok((p[..*x_dim].to_vec(), p[*x_dim..].to_vec()))
                })
                .collect::<Result<Vec<_>, ValidationError>>()?;
            let xr = x_region.as_ref().map(|r| region("mapping.x_region", r, *x_dim)).transpose()?;
            core(
                "mapping",
                SetValuedMapping::cloud(
                    pairs,
                    *tol,
                    point("mapping.x_bar", x_bar, *x_dim)?,
                    point("mapping.y_bar", y_bar, *y_dim)?,
                    xr,
                ),
            )
        }
    }
}

fn sip(spec: &SipSpec) -> Result<(SIProblem, Scalar), ValidationError> {
    let n = spec.n;
    if n == 0 {
        return fail("sip.n", "must be positive");
    }
    let psi = expr("sip.objective", parse_point_expr(&spec.objective, n))?;
    let objective = if psi.is_affine_in(&(0..n).collect::<Vec<_>>()) {
        let (a, b) = affine_parts(&psi, &[], n);
        Objective::MaxAffine(vec![AffinePiece::new(a, b)])
    } else {
        let Some(src) = &spec.objective_gradient else {
            return fail("sip.objective_gradient", "required for a non-affine objective");
        };
        let grad = gradient("sip.objective_gradient", src, n, |s| parse_point_expr(s, n))?;
        Objective::Smooth(smooth_piece(psi, grad))
    };
    let g = Arc::new(expr("sip.constraints", parse_field_expr(&spec.constraints, n))?);
    let xs: Vec<usize> = (1..=n).collect();
    let constraints = if g.is_affine_in(&xs) {
        let (gc, go) = (g.clone(), g.clone());
        ConstraintFamily::Affine {
            coef: Arc::new(move |t| affine_parts(&gc, &[t], n).0),
            offset: Arc::new(move |t| go.eval(&[&[t][..], &vec![0.0; n]].concat())),
        }
    } else {
        let Some(src) = &spec.constraints_gradient else {
            return fail("sip.constraints_gradient", "required for constraints that are not affine in x");
        };
        let grad = gradient("sip.constraints_gradient", src, n, |s| parse_field_expr(s, n))?;
        let gv = g.clone();
        ConstraintFamily::Smooth {
            value: Arc::new(move |t, x| gv.eval(&[&[t][..], x].concat())),
            gradient: Arc::new(move |t, x| {
                let arg = [&[t][..], x].concat();
                grad.iter().map(|d| d.eval(&arg)).collect()
            }),
        }
    };
    let b = expr("sip.b_bar", crate::expr::Expr::parse(&spec.b_bar, &["t"]))?;
    if spec.index.a > spec.index.b || spec.index.a.is_nan() || spec.index.b.is_nan() {
        return fail("sip.T", "needs a <= b");
    }
    let index = core("sip.T", IndexSet::interval(spec.index.a, spec.index.b, spec.index.mesh))?;
    let x_bar = point("sip.x_bar", &spec.x_bar, n)?;
    let c_bar = point("sip.c_bar", &spec.c_bar, n)?;
    let domain = match &spec.domain {
        Some(r) => region("sip.domain", r, n)?,
        None => core("sip.domain", Region::cube(&x_bar, 2.0))?,
    };
    let p =
        core("sip", SIProblem::new(objective, constraints, index, c_bar, &|t| b.eval(&[t]), x_bar.clone(), domain))?;
    let f = core("sip", residual_function(&p))?;
    Ok((p, Scalar { f, anchor: x_bar }))
}

pub fn gauge(spec: &GaugeSpec) -> Result<Gauge, ValidationError> {
    match spec {
        GaugeSpec::Identity => Ok(Gauge::identity()),
        GaugeSpec::Linear { tau } => core("gauge", Gauge::linear(*tau)),
        GaugeSpec::Holder { tau, q } => core("gauge", Gauge::holder(*tau, *q)),
        GaugeSpec::NuTable { knots } => core("gauge", Gauge::nu_table(knots.clone())),
        GaugeSpec::Expression { phi, derivative, inverse, convexity } => {
            let scalar =
                |path: &str, src: &Option<String>| -> Result<Option<errbound::gauge::ScalarFn>, ValidationError> {
                    match src {
                        Some(s) => {
                            let e = expr(path, Expr::parse(s, &["t"]))?;
                            Ok(Some(Arc::new(move |t: f64| e.eval(&[t]))))
                        }
                        None => Ok(None),
                    }
                };
            let phi = scalar("gauge.phi", &Some(phi.clone()))?.expect("phi is present");
            core(
                "gauge",
                Gauge::custom(
                    phi,
                    scalar("gauge.derivative", derivative)?,
                    scalar("gauge.inverse", inverse)?,
                    *convexity,
                ),
            )
        }
    }
}

pub fn build(spec: &Spec) -> Result<Model, ValidationError> {
    let problem = match (&spec.function, &spec.mapping, &spec.sip) {
        (Some(f), None, None) => Problem::Function(function(f)?),
        (None, Some(m), None) => Problem::Mapping(mapping(m)?),
        (None, None, Some(s)) => {
            let (p, s) = sip(s)?;
            Problem::Sip(Box::new(p), s)
        }
        _ => return fail("spec", "exactly one of `function`, `mapping` or `sip` is required"),
    };
    let gauge = spec.gauge.as_ref().map(gauge).transpose()?;
    let region = spec.region.as_ref().map(|r| region("region", r, problem.dim())).transpose()?;
    Ok(Model { problem, gauge, region })
}
