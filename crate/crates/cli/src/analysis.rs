//! Runs one analysis of a spec against the built model.

use serde::Serialize;
use serde_json::{json, Value};

use errbound::errorbounds::{
    check_error_bound_direct, check_necessary_linear, check_necessary_nonlinear_convex, check_perturbed,
    estimate_modulus, holder_order_analysis, verify_psi_form, verify_sufficient_linear, verify_sufficient_nonlinear,
    BoundForm, ErrorBoundSpec, ErrorBoundVerdict, NonlinearCondition, Status,
};
use errbound::setvalued::{
    check_calmness, check_subregularity, convert_subreg_to_graph, minimal_gate_constant, verify_mapping_sufficient,
    SetValuedMapping, SubregularityVariant,
};
use errbound::sip::{
    active_indices, calmness_of_level_mapping, falsify_calmness, objective_gap_bound, slater_check, solve_instance,
    FalsifyBudget, FalsifyStatus, SIProblem, SlaterStatus,
};
use errbound::slopes::{slope, OuterEstimate, SlopeKind};
use errbound::{Config, Gauge};

use crate::model::{Model, Problem, Scalar};
use crate::spec::{AnalysisSpec, FormKind, VariantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails,
    Inconclusive,
    /// An estimate with no pass/fail meaning.
    Info,
    Error,
}

impl From<Status> for Outcome {
    fn from(s: Status) -> Self {
        match s {
            Status::Holds => Outcome::Holds,
            Status::Fails => Outcome::Fails,
            Status::Inconclusive => Outcome::Inconclusive,
        }
    }
}

/// A CSV table attached to a result.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

pub struct Finding {
    pub status: Outcome,
    pub output: Value,
    pub tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn verdict(v: ErrorBoundVerdict) -> Finding {
    Finding { status: v.status.into(), output: to_value(&v), tables: Vec::new() }
}

fn info<T: Serialize>(v: &T) -> Finding {
    Finding { status: Outcome::Info, output: to_value(v), tables: Vec::new() }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn shell_table(name: String, est: &OuterEstimate) -> Table {
    let mut csv = String::from("k,min,samples\n");
    for s in &est.per_shell {
        csv.push_str(&format!("{},{},{}\n", s.k, s.min.map_or(String::new(), num), s.samples));
    }
    Table { name, csv }
}

/// A problem/analysis mismatch or a missing parameter, detected before any
/// analysis runs.
pub fn validate(model: &Model, a: &AnalysisSpec) -> Result<(), String> {
    let wants = match a {
        AnalysisSpec::Modulus { .. }
        | AnalysisSpec::Slope { .. }
        | AnalysisSpec::HolderOrder { .. }
        | AnalysisSpec::Direct { .. }
        | AnalysisSpec::SufficientLinear { .. }
        | AnalysisSpec::SufficientNonlinear { .. }
        | AnalysisSpec::SufficientPsi { .. }
        | AnalysisSpec::NecessaryLinear { .. }
        | AnalysisSpec::NecessaryNonlinear { .. }
        | AnalysisSpec::Perturbed { .. } => "function",
        AnalysisSpec::Subregularity { .. }
        | AnalysisSpec::Calmness { .. }
        | AnalysisSpec::GraphConversion { .. }
        | AnalysisSpec::MappingSufficient { .. } => "mapping",
        AnalysisSpec::SipSolve
        | AnalysisSpec::SipSlater
        | AnalysisSpec::LevelCalmness { .. }
        | AnalysisSpec::Falsify { .. }
        | AnalysisSpec::ObjectiveGap { .. } => "sip",
    };
    let ok = match wants {
        "function" => model.problem.scalar().is_some(),
        other => model.problem.kind() == other,
    };
    if !ok {
        return Err(format!("`{}` needs a {wants} problem, the spec defines a {}", a.name(), model.problem.kind()));
    }
    let form_needs = |form: FormKind, tau: Option<f64>| -> Result<(), String> {
        match form {
            FormKind::Linear if tau.is_none() => Err("the linear form needs `tau`".into()),
            FormKind::Linear => Ok(()),
            _ if model.gauge.is_none() => Err(format!("the {} form needs a top-level `gauge`", to_value(&form))),
            _ => Ok(()),
        }
    };
    match a {
        AnalysisSpec::Modulus { use_gauge: true } if model.gauge.is_none() => {
            Err("`use_gauge` needs a top-level `gauge`".into())
        }
        AnalysisSpec::Slope { point, .. } if point.len() != model.problem.dim() => {
            Err(format!("`point` must have {} coordinates", model.problem.dim()))
        }
        AnalysisSpec::Direct { form, tau, .. } | AnalysisSpec::NecessaryNonlinear { form, tau, .. } => {
            form_needs(*form, *tau)
        }
        AnalysisSpec::SufficientPsi { form, .. } if !matches!(form, FormKind::Psi | FormKind::NuIntegral) => {
            Err("`sufficient_psi` takes form `psi` or `nu_integral`".into())
        }
        AnalysisSpec::SufficientNonlinear { .. } | AnalysisSpec::SufficientPsi { .. } if model.gauge.is_none() => {
            Err(format!("`{}` needs a top-level `gauge`", a.name()))
        }
        _ => Ok(()),
    }
}

/// The gauge of the spec, or the identity.
fn gauge_or_identity(model: &Model) -> Gauge {
    model.gauge.clone().unwrap_or_else(Gauge::identity)
}

fn bound_form(model: &Model, form: FormKind, tau: Option<f64>) -> errbound::Result<BoundForm> {
    let g = || model.gauge.clone().ok_or_else(|| errbound::Error::InvalidArgument("no gauge given".into()));
    Ok(match form {
        FormKind::Linear => {
            BoundForm::Linear { tau: tau.ok_or_else(|| errbound::Error::InvalidArgument("no tau given".into()))? }
        }
        FormKind::Gauge => BoundForm::Gauge(g()?),
        FormKind::Psi => BoundForm::Psi(g()?),
        FormKind::NuIntegral => BoundForm::NuIntegral(g()?),
    })
}

fn condition(composite: bool, kind: SlopeKind) -> NonlinearCondition {
    if composite {
        NonlinearCondition::CompositeNonlocal
    } else {
        NonlinearCondition::Slope(kind)
    }
}

pub fn run(model: &Model, a: &AnalysisSpec, index: usize, cfg: &Config) -> errbound::Result<Finding> {
    match &model.problem {
        Problem::Mapping(m) => run_mapping(model, m, a, cfg),
        Problem::Sip(p, s) => match a {
            AnalysisSpec::SipSolve
            | AnalysisSpec::SipSlater
            | AnalysisSpec::LevelCalmness { .. }
            | AnalysisSpec::Falsify { .. }
            | AnalysisSpec::ObjectiveGap { .. } => run_sip(model, p, a, index, cfg),
            _ => run_function(model, s, a, index, cfg),
        },
        Problem::Function(s) => run_function(model, s, a, index, cfg),
    }
}

fn run_function(model: &Model, s: &Scalar, a: &AnalysisSpec, index: usize, cfg: &Config) -> errbound::Result<Finding> {
    let (f, x_bar, region) = (&s.f, &s.anchor, model.region.as_ref());
    let spec = |form: BoundForm, delta: f64, mu: f64| ErrorBoundSpec::new(f, form, x_bar.clone(), delta, mu);
    match a {
        AnalysisSpec::Modulus { use_gauge } => {
            let g = if *use_gauge { model.gauge.as_ref() } else { None };
            let est = estimate_modulus(f, x_bar, g, region, cfg)?;
            let mut out = info(&est);
            out.tables.push(shell_table(format!("modulus_{index}"), &est));
            Ok(out)
        }
        AnalysisSpec::Slope { kind, point } => Ok(info(&slope(f, point, *kind, region, cfg)?)),
        AnalysisSpec::HolderOrder { q } => {
            let r = holder_order_analysis(f, x_bar, *q, region, cfg)?;
            let status = if r.consistent { Outcome::Info } else { Outcome::Inconclusive };
            Ok(Finding { status, output: to_value(&r), tables: Vec::new() })
        }
        AnalysisSpec::Direct { form, tau, delta, mu } => {
            let sp = spec(bound_form(model, *form, *tau)?, delta.0, mu.0)?;
            Ok(verdict(check_error_bound_direct(f, &sp, region, cfg)?))
        }
        AnalysisSpec::SufficientLinear { tau, delta, mu, alpha, slope } => {
            let sp = spec(BoundForm::Linear { tau: *tau }, delta.0, mu.0)?.with_alpha(*alpha)?;
            Ok(verdict(verify_sufficient_linear(f, &sp, *slope, region, cfg)?))
        }
        AnalysisSpec::SufficientNonlinear { delta, mu, alpha, mode, slope, composite } => {
            let sp = spec(bound_form(model, FormKind::Gauge, None)?, delta.0, mu.0)?.with_alpha(*alpha)?;
            Ok(verdict(verify_sufficient_nonlinear(f, &sp, condition(*composite, *slope), *mode, region, cfg)?))
        }
        AnalysisSpec::SufficientPsi { form, delta, mu, alpha, mode, slope, composite } => {
            let sp = spec(bound_form(model, *form, None)?, delta.0, mu.0)?.with_alpha(*alpha)?;
            Ok(verdict(verify_psi_form(f, &sp, condition(*composite, *slope), *mode, region, cfg)?))
        }
        AnalysisSpec::NecessaryLinear { tau, delta, mu } => {
            let sp = spec(BoundForm::Linear { tau: *tau }, delta.0, mu.0)?;
            Ok(verdict(check_necessary_linear(f, &sp, region, cfg)?))
        }
        AnalysisSpec::NecessaryNonlinear { form, tau, delta, mu, mode } => {
            let sp = spec(bound_form(model, *form, *tau)?, delta.0, mu.0)?;
            Ok(verdict(check_necessary_nonlinear_convex(f, &sp, *mode, region, cfg)?))
        }
        AnalysisSpec::Perturbed { tau, delta, mu, alpha, slope } => {
            let sp = spec(BoundForm::Linear { tau: *tau }, delta.0, mu.0)?.with_alpha(*alpha)?;
            let r = check_perturbed(f, &sp, *slope, region, cfg)?;
            Ok(Finding { status: r.direct.status.into(), output: to_value(&r), tables: Vec::new() })
        }
        other => Err(errbound::Error::Unsupported(format!("`{}` does not apply to a function", other.name()))),
    }
}

fn run_mapping(model: &Model, m: &SetValuedMapping, a: &AnalysisSpec, cfg: &Config) -> errbound::Result<Finding> {
    let g = gauge_or_identity(model);
    match a {
        AnalysisSpec::Subregularity { variant, delta, mu } => {
            let v = match variant {
                VariantSpec::Plain => SubregularityVariant::Plain,
                VariantSpec::Graph => SubregularityVariant::Graph,
            };
            Ok(verdict(check_subregularity(m, &g, delta.0, mu.0, v, cfg)?))
        }
        AnalysisSpec::Calmness { delta, mu } => Ok(verdict(check_calmness(m, &g, delta.0, mu.0, cfg)?)),
        AnalysisSpec::GraphConversion { delta, mu, c } => {
            let plain = check_subregularity(m, &g, delta.0, mu.0, SubregularityVariant::Plain, cfg)?;
            if plain.status != Status::Holds {
                return Ok(Finding {
                    status: Outcome::Inconclusive,
                    output: json!({
                        "plain": to_value(&plain),
                        "note": "plain subregularity does not hold, nothing to convert",
                    }),
                    tables: Vec::new(),
                });
            }
            let c = match c {
                Some(c) => *c,
                None => minimal_gate_constant(&g, delta.0)?,
            };
            let (graph_gauge, conversion) = convert_subreg_to_graph(&g, delta.0, mu.0, c, &plain)?;
            let graph = check_subregularity(
                m,
                &graph_gauge,
                conversion.delta_prime,
                f64::INFINITY,
                SubregularityVariant::Graph,
                cfg,
            )?;
            Ok(Finding {
                status: graph.status.into(),
                output: json!({
                    "plain": to_value(&plain),
                    "conversion": to_value(&conversion),
                    "graph": to_value(&graph),
                }),
                tables: Vec::new(),
            })
        }
        AnalysisSpec::MappingSufficient { delta, mu, alpha, mode, slope, composite } => Ok(verdict(
            verify_mapping_sufficient(m, &g, delta.0, mu.0, *alpha, *mode, condition(*composite, *slope), cfg)?,
        )),
        other => Err(errbound::Error::Unsupported(format!("`{}` does not apply to a mapping", other.name()))),
    }
}

fn run_sip(model: &Model, p: &SIProblem, a: &AnalysisSpec, index: usize, cfg: &Config) -> errbound::Result<Finding> {
    let g = gauge_or_identity(model);
    match a {
        AnalysisSpec::SipSolve => {
            let sol = solve_instance(p, p.c_bar(), p.b_bar(), cfg)?;
            let active = active_indices(p, p.b_bar(), &sol.x, 1e-7)?;
            Ok(Finding {
                status: Outcome::Info,
                output: json!({ "solution": to_value(&sol), "active": to_value(&active) }),
                tables: Vec::new(),
            })
        }
        AnalysisSpec::SipSlater => {
            let r = slater_check(p, cfg);
            let status = match r.status {
                SlaterStatus::Holds => Outcome::Holds,
                SlaterStatus::Fails => Outcome::Fails,
                SlaterStatus::Inconclusive => Outcome::Inconclusive,
            };
            Ok(Finding { status, output: to_value(&r), tables: Vec::new() })
        }
        AnalysisSpec::LevelCalmness { delta, mu } => {
            let r = calmness_of_level_mapping(p, &g, delta.0, mu.0, cfg)?;
            let status = if r.agree { r.verdict.status.into() } else { Outcome::Inconclusive };
            let table = shell_table(format!("level_modulus_{index}"), &r.modulus);
            Ok(Finding { status, output: to_value(&r), tables: vec![table] })
        }
        AnalysisSpec::Falsify { threshold, successive } => {
            let budget = FalsifyBudget { threshold: *threshold, successive: *successive };
            let r = falsify_calmness(p, &g, &budget, cfg)?;
            // a witness refutes calmness; an exhausted search proves nothing
            let status = match r.status {
                FalsifyStatus::Witness => Outcome::Fails,
                FalsifyStatus::Exhausted => Outcome::Inconclusive,
            };
            let mut csv = String::from("shell,f_value,b_norm,distance,level_ratio,ratio\n");
            for s in &r.sequence {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.shell,
                    num(s.f_value),
                    num(s.b_norm),
                    num(s.distance),
                    num(s.level_ratio),
                    num(s.ratio)
                ));
            }
            let table = Table { name: format!("falsify_{index}"), csv };
            Ok(Finding { status, output: to_value(&r), tables: vec![table] })
        }
        AnalysisSpec::ObjectiveGap { delta, mu, samples } => {
            Ok(info(&objective_gap_bound(p, delta.0, mu.0, *samples, cfg)?))
        }
        other => {
            Err(errbound::Error::Unsupported(format!("`{}` does not apply to a semi-infinite program", other.name())))
        }
    }
}

/// Values of the scalar function along the first axis through its anchor.
pub fn profile(model: &Model) -> Option<Table> {
    let s = model.problem.scalar()?;
    let (lo, hi) = match model.region.as_ref().or(s.f.domain()) {
        Some(r) => (r.lo[0], r.hi[0]),
        None => (s.anchor[0] - 1.0, s.anchor[0] + 1.0),
    };
    const POINTS: usize = 201;
    let mut csv = String::from("x1,f\n");
    for k in 0..POINTS {
        let t = lo + (hi - lo) * k as f64 / (POINTS - 1) as f64;
        let mut x = s.anchor.clone();
        x[0] = t;
        csv.push_str(&format!("{},{}\n", num(t), num(s.f.value(&x))));
    }
    Some(Table { name: "profile".into(), csv })
}
