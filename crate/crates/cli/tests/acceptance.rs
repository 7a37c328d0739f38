//! Acceptance suite: one pass/fail line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use errbound::errorbounds::{
    check_error_bound_direct, check_necessary_linear, check_necessary_nonlinear_convex, estimate_modulus,
    verify_sufficient_linear, verify_sufficient_nonlinear, BoundForm, ErrorBoundSpec, ErrorBoundVerdict, Mode,
    NonlinearCondition, Status,
};
use errbound::function::{compose_gauge, AffinePiece, FunctionModel, SmoothPiece};
use errbound::minnorm::min_norm_point;
use errbound::setvalued::{
    check_subregularity, convert_subreg_to_graph, minimal_gate_constant, SetValuedMapping, SubregularityVariant,
};
use errbound::sip::{
    calmness_of_level_mapping, falsify_calmness, residual_function, slater_check, ConstraintFamily, FalsifyBudget,
    FalsifyStatus, IndexSet, Objective, SIProblem, SlaterStatus,
};
use errbound::slopes::{chain_rule_local, chain_rule_nonlocal_bound, slope, Direction, SlopeKind, Trend};
use errbound::{Config, Gauge, Region};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Debug>(err: E) -> String {
    format!("{err:?}")
}

fn random_max_affine(rng: &mut ChaCha8Rng, dim: usize, max_pieces: usize) -> FunctionModel {
    let m = rng.gen_range(1..=max_pieces);
    let pieces = (0..m)
        .map(|_| AffinePiece::new((0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(), rng.gen_range(-1.0..1.0)))
        .collect();
    FunctionModel::max_affine(pieces).unwrap()
}

/// Convex max-affine function with `f(0) = 0` and at least two pieces.
fn anchored_max_affine(rng: &mut ChaCha8Rng, dim: usize) -> FunctionModel {
    let m = rng.gen_range(2..=5);
    let zero = rng.gen_range(0..m);
    let pieces = (0..m)
        .map(|k| {
            let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = if k == zero { 0.0 } else { rng.gen_range(-1.0..0.0) };
            AffinePiece::new(a, b)
        })
        .collect();
    FunctionModel::max_affine(pieces).unwrap()
}

fn abs_model() -> FunctionModel {
    FunctionModel::from_pieces(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)]).unwrap()
}

fn square_model() -> FunctionModel {
    FunctionModel::max_smooth(
        1,
        vec![SmoothPiece::new(Arc::new(|x| x[0] * x[0]), Arc::new(|x| vec![2.0 * x[0]]))],
        true,
        Some(Region::interval(-1.0, 1.0).unwrap()),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let cfg = Config::default();
    let timed = |f: &dyn Fn() -> Result<(f64, Trend), String>| -> Result<(f64, Trend, f64), String> {
        let t = Instant::now();
        let (v, trend) = f()?;
        Ok((v, trend, t.elapsed().as_secs_f64()))
    };
    let (a, _, ta) = timed(&|| {
        let est = estimate_modulus(&abs_model(), &[0.0], None, None, &cfg).map_err(e)?;
        Ok((est.value, est.trend))
    })?;
    ensure((a - 1.0).abs() <= 1e-3, || format!("Er|x|(0) = {a}"))?;
    let sqrt = Gauge::holder(1.0, 0.5).map_err(e)?;
    let (b, _, tb) = timed(&|| {
        let est = estimate_modulus(&square_model(), &[0.0], Some(&sqrt), None, &cfg).map_err(e)?;
        Ok((est.value, est.trend))
    })?;
    ensure((b - 1.0).abs() <= 1e-3, || format!("Er_sqrt x^2(0) = {b}"))?;
    let (c, trend, tc) = timed(&|| {
        let est = estimate_modulus(&square_model(), &[0.0], None, None, &cfg).map_err(e)?;
        Ok((est.value, est.trend))
    })?;
    ensure(c <= 1e-2 && trend == Trend::Decreasing, || format!("Er x^2(0) = {c}, trend {trend:?}"))?;
    ensure(ta < 1.0 && tb < 1.0 && tc < 1.0, || format!("runtimes {ta:.3}s {tb:.3}s {tc:.3}s"))?;
    Ok(format!("|x|: {a:.6}, sqrt on x^2: {b:.6}, x^2: {c:.2e} decreasing; max runtime {:.3}s", ta.max(tb).max(tc)))
}

/// Local slope of a max-affine function by brute force over 3600 directions.
fn brute_local_slope_2d(f: &FunctionModel, x: &[f64]) -> f64 {
    let grads = f.active_gradients(x, 1e-9).unwrap();
    let mut best = 0.0f64;
    for k in 0..3600 {
        let th = k as f64 * std::f64::consts::TAU / 3600.0;
        let d = [th.cos(), th.sin()];
        let dd = grads.iter().map(|g| g[0] * d[0] + g[1] * d[1]).fold(f64::NEG_INFINITY, f64::max);
        best = best.max(-dd);
    }
    best
}

fn criterion_2() -> Outcome {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut points = 0;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for inst in 0..100 {
        let f = random_max_affine(&mut rng, 2, 6);
        let mut found = 0;
        let mut tries = 0;
        while found < 10 {
            tries += 1;
            if tries > 10_000 {
                return Err(format!("instance {inst}: could not find points with f > 0"));
            }
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if f.value(&x) <= 0.0 {
                continue;
            }
            found += 1;
            let local = slope(&f, &x, SlopeKind::Local, None, &cfg).map_err(e)?;
            let nonlocal = slope(&f, &x, SlopeKind::Nonlocal, None, &cfg).map_err(e)?;
            let sd = slope(&f, &x, SlopeKind::ConvexSd, None, &cfg).map_err(e)?;
            let brute = brute_local_slope_2d(&f, &x);
            ensure(nonlocal.value >= local.value - 1e-6, || {
                format!("instance {inst} at {x:?}: nonlocal {} < local {}", nonlocal.value, local.value)
            })?;
            ensure((local.value - sd.value).abs() <= 1e-8, || {
                format!("instance {inst} at {x:?}: local {} vs convex sd {}", local.value, sd.value)
            })?;
            ensure(nonlocal.value <= sd.value + 1e-6, || {
                format!("instance {inst} at {x:?}: nonlocal {} > convex sd {}", nonlocal.value, sd.value)
            })?;
            ensure((local.value - brute).abs() <= 1e-3 * (1.0 + brute), || {
                format!("instance {inst} at {x:?}: local {} vs directional brute force {brute}", local.value)
            })?;
            worst.0 = worst.0.max(local.value - nonlocal.value);
            worst.1 = worst.1.max((local.value - sd.value).abs());
            worst.2 = worst.2.max(nonlocal.value - sd.value);
            points += 1;
        }
    }
    Ok(format!(
        "{points} points, zero violations; max(local-nonlocal) {:.1e}, max|local-sd| {:.1e}, max(nonlocal-sd) {:.1e}",
        worst.0, worst.1, worst.2
    ))
}

fn criterion_3() -> Outcome {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_sampled, mut worst_linear, mut directional) = (0.0f64, 0.0f64, 0);
    for inst in 0..100 {
        let f = random_max_affine(&mut rng, 2, 4);
        let x = loop {
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if f.value(&x) > 1e-3 {
                break x;
            }
        };
        let tau = rng.gen_range(0.5..2.0);
        let q = [0.5, 0.75, 1.5, 2.0][inst % 4];
        let g = Gauge::holder(tau, q).map_err(e)?;
        let cr = chain_rule_local(&g, &f, &x, &cfg).map_err(e)?;
        let rel = (cr.lhs.value - cr.rhs).abs() / cr.rhs.abs().max(1e-12);
        ensure(rel <= 1e-2 || (cr.rhs.abs() < 1e-12 && cr.lhs.value.abs() < 1e-9), || {
            format!("instance {inst}: lhs {} rhs {} (q = {q})", cr.lhs.value, cr.rhs)
        })?;
        worst_sampled = worst_sampled.max(if cr.rhs.abs() < 1e-12 { 0.0 } else { rel });

        let lin = Gauge::linear(tau).map_err(e)?;
        let cl = chain_rule_local(&lin, &f, &x, &cfg).map_err(e)?;
        let rel = (cl.lhs.value - cl.rhs).abs() / cl.rhs.abs().max(1.0);
        ensure(rel <= 1e-10, || format!("instance {inst}: linear path lhs {} rhs {}", cl.lhs.value, cl.rhs))?;
        worst_linear = worst_linear.max(rel);

        let nl = chain_rule_nonlocal_bound(&g, &f, &x, None, &cfg).map_err(e)?;
        let slack = 1e-2 * nl.rhs.abs().max(1e-9);
        let ok = match nl.direction {
            Direction::LhsAtLeastRhs => nl.lhs.value >= nl.rhs - slack,
            Direction::LhsAtMostRhs => nl.lhs.value <= nl.rhs + slack,
            Direction::Equal => (nl.lhs.value - nl.rhs).abs() <= slack,
        };
        ensure(ok, || {
            format!("instance {inst}: nonlocal {:?} violated, lhs {} rhs {}", nl.direction, nl.lhs.value, nl.rhs)
        })?;
        directional += 1;
    }
    Ok(format!(
        "100 triples; max sampled rel. error {worst_sampled:.2e}, linear path {worst_linear:.1e}; nonlocal direction held on {directional}"
    ))
}

/// Minimum norm over simplex grids totalling about 1e6 weight vectors: a
/// full grid followed by three zoomed grids around the best point so far.
fn brute_min_norm(gens: &[Vec<f64>]) -> f64 {
    let m = gens.len();
    let dim = gens[0].len();
    if m == 1 {
        return gens[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let norm_of = |w: &[f64]| -> f64 {
        (0..dim).map(|j| (0..m).map(|i| w[i] * gens[i][j]).sum::<f64>().powi(2)).sum::<f64>().sqrt()
    };
    // number of subdivisions giving about `budget` compositions into m parts
    let n = {
        let budget = 2.5e5f64;
        match m {
            2 => budget as usize,
            3 => (2.0 * budget).sqrt() as usize,
            _ => (6.0 * budget).cbrt() as usize,
        }
    };
    let mut best = (f64::INFINITY, vec![1.0 / m as f64; m]);
    let mut base = vec![0.0; m];
    let mut scale = 1.0;
    for _ in 0..4 {
        let mut k = vec![0usize; m];
        visit(0, n, &mut k, &mut |k: &[usize]| {
            let w: Vec<f64> = (0..m).map(|j| base[j] + scale * k[j] as f64 / n as f64).collect();
            if w.iter().all(|v| *v >= 0.0) {
                let v = norm_of(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        });
        // next window: a simplex of side 8 grid steps centred on the best point
        scale *= 8.0 / n as f64;
        base = best.1.iter().map(|v| v - scale / m as f64).collect();
    }
    best.0
}

fn visit(i: usize, left: usize, k: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if i + 1 == k.len() {
        k[i] = left;
        f(k);
        return;
    }
    for c in 0..=left {
        k[i] = c;
        visit(i + 1, left - c, k, f);
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let m = rng.gen_range(1..=4);
        let dim = rng.gen_range(1..=3);
        let gens: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let mnp = min_norm_point(&gens).map_err(e)?;
        let brute = brute_min_norm(&gens);
        ensure((mnp.norm - brute).abs() <= 1e-4, || {
            format!("instance {inst} ({m} generators in R^{dim}): min-norm {} vs brute force {brute}", mnp.norm)
        })?;
        worst = worst.max((mnp.norm - brute).abs());
    }
    let two = min_norm_point(&[vec![1.0, 0.0], vec![0.0, 1.0]]).map_err(e)?;
    ensure((two.norm - 0.5f64.sqrt()).abs() <= 1e-9, || format!("conv{{e1,e2}}: {}", two.norm))?;
    Ok(format!("50 instances, max |norm - brute| {worst:.1e}; conv{{e1,e2}} -> {:.12}", two.norm))
}

struct Instance {
    f: FunctionModel,
    tau: f64,
}

const SUITE_DELTA: f64 = 0.5;
const SUITE_MU: f64 = 10.0;

/// Instances on which the linear sufficient condition certifies a radius.
fn certified_suite(cfg: &Config) -> Result<Vec<(Instance, ErrorBoundVerdict)>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    for _ in 0..2000 {
        if out.len() == 50 {
            break;
        }
        let dim = rng.gen_range(1..=2);
        let f = anchored_max_affine(&mut rng, dim);
        let x_bar = vec![0.0; dim];
        let er = estimate_modulus(&f, &x_bar, None, None, cfg).map_err(e)?.value;
        if !(er > 0.05 && er.is_finite()) {
            continue;
        }
        let tau = 0.8 * er;
        let spec = ErrorBoundSpec::new(&f, BoundForm::Linear { tau }, x_bar, SUITE_DELTA, SUITE_MU).map_err(e)?;
        let v = verify_sufficient_linear(&f, &spec, SlopeKind::ConvexSd, None, cfg).map_err(e)?;
        if v.status == Status::Holds {
            out.push((Instance { f, tau }, v));
        }
    }
    ensure(out.len() == 50, || format!("only {} certified instances generated", out.len()))?;
    Ok(out)
}

fn holder_specs(inst: &Instance) -> Vec<(f64, BoundForm)> {
    [0.5, 1.0].iter().map(|&q| (q, BoundForm::Gauge(Gauge::holder(inst.tau, q).unwrap()))).collect()
}

fn criterion_5(suite: &[(Instance, ErrorBoundVerdict)], cfg: &Config) -> Outcome {
    let mut nonlinear_certified = 0;
    for (k, (inst, v)) in suite.iter().enumerate() {
        let dim = inst.f.dim();
        let radius = v.certified_radius.ok_or("certified verdict without a radius")?;
        let spec = ErrorBoundSpec::new(&inst.f, BoundForm::Linear { tau: inst.tau }, vec![0.0; dim], radius, SUITE_MU)
            .map_err(e)?;
        let direct = check_error_bound_direct(&inst.f, &spec, None, cfg).map_err(e)?;
        ensure(direct.status == Status::Holds, || {
            format!("instance {k}: linear certificate unsound: {:?}", direct.witness)
        })?;
        for (q, form) in holder_specs(inst) {
            let spec = ErrorBoundSpec::new(&inst.f, form, vec![0.0; dim], SUITE_DELTA, SUITE_MU).map_err(e)?;
            for mode in [Mode::Conventional, Mode::Alternative] {
                let s = verify_sufficient_nonlinear(
                    &inst.f,
                    &spec,
                    NonlinearCondition::Slope(SlopeKind::ConvexSd),
                    mode,
                    None,
                    cfg,
                )
                .map_err(e)?;
                if s.status != Status::Holds {
                    continue;
                }
                nonlinear_certified += 1;
                let r = s.certified_radius.ok_or("certified verdict without a radius")?;
                let direct = check_error_bound_direct(&inst.f, &spec.with_delta(r), None, cfg).map_err(e)?;
                ensure(direct.status == Status::Holds, || {
                    format!("instance {k}, q = {q}, {mode:?}: certificate unsound: {:?}", direct.witness)
                })?;
            }
        }
    }
    ensure(nonlinear_certified > 0, || "no nonlinear certificate was produced".into())?;
    Ok(format!("50 linear and {nonlinear_certified} Hölder certificates, zero soundness failures"))
}

fn criterion_6(suite: &[(Instance, ErrorBoundVerdict)], cfg: &Config) -> Outcome {
    let (mut lin, mut nonlin) = (0, 0);
    for (k, (inst, _)) in suite.iter().enumerate() {
        let dim = inst.f.dim();
        let spec =
            ErrorBoundSpec::new(&inst.f, BoundForm::Linear { tau: inst.tau }, vec![0.0; dim], SUITE_DELTA, SUITE_MU)
                .map_err(e)?;
        if check_error_bound_direct(&inst.f, &spec, None, cfg).map_err(e)?.status == Status::Holds {
            let n = check_necessary_linear(&inst.f, &spec, None, cfg).map_err(e)?;
            ensure(n.status == Status::Holds && n.counterexample.is_none() && !n.inconsistency, || {
                format!("instance {k}: linear necessary condition violated: {:?}", n.counterexample)
            })?;
            lin += 1;
        }
        for (q, form) in holder_specs(inst) {
            let spec = ErrorBoundSpec::new(&inst.f, form, vec![0.0; dim], SUITE_DELTA, SUITE_MU).map_err(e)?;
            if check_error_bound_direct(&inst.f, &spec, None, cfg).map_err(e)?.status != Status::Holds {
                continue;
            }
            let n = check_necessary_nonlinear_convex(&inst.f, &spec, Mode::Both, None, cfg).map_err(e)?;
            ensure(n.status == Status::Holds && n.counterexample.is_none() && !n.inconsistency, || {
                format!("instance {k}, q = {q}: necessary condition violated: {:?}", n.counterexample)
            })?;
            nonlin += 1;
        }
    }
    ensure(lin > 0, || "the direct bound held on no instance".into())?;
    Ok(format!("{lin} linear and {nonlin} Hölder instances with the bound holding, zero violations"))
}

fn criterion_7(cfg: &Config) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut holds, mut fails) = (0, 0);
    for k in 0..50 {
        let dim = rng.gen_range(1..=2);
        let f = anchored_max_affine(&mut rng, dim);
        let g = Gauge::holder(rng.gen_range(0.3..3.0), rng.gen_range(0.3..1.5)).map_err(e)?;
        let x_bar = vec![0.0; dim];
        let a = ErrorBoundSpec::new(&f, BoundForm::Gauge(g.clone()), x_bar.clone(), SUITE_DELTA, f64::INFINITY)
            .map_err(e)?;
        let va = check_error_bound_direct(&f, &a, None, cfg).map_err(e)?;
        let composed = compose_gauge(&g, &f);
        let b = ErrorBoundSpec::new(&composed, BoundForm::Linear { tau: 1.0 }, x_bar, SUITE_DELTA, f64::INFINITY)
            .map_err(e)?;
        let vb = check_error_bound_direct(&composed, &b, None, cfg).map_err(e)?;
        ensure(va.status == vb.status, || {
            format!("instance {k}: φ-bound {:?} vs composition {:?}", va.status, vb.status)
        })?;
        match va.status {
            Status::Holds => holds += 1,
            Status::Fails => fails += 1,
            Status::Inconclusive => {}
        }
    }
    Ok(format!("50 instances verdict-identical ({holds} hold, {fails} fail)"))
}

fn criterion_8(suite: &[(Instance, ErrorBoundVerdict)], cfg: &Config) -> Outcome {
    let mut applicable = 0;
    for (k, (inst, _)) in suite.iter().enumerate() {
        let dim = inst.f.dim();
        for q in [0.5, 0.75, 1.0] {
            let g = Gauge::holder(inst.tau, q).map_err(e)?;
            let spec =
                ErrorBoundSpec::new(&inst.f, BoundForm::Gauge(g), vec![0.0; dim], SUITE_DELTA, SUITE_MU).map_err(e)?;
            let cond = NonlinearCondition::Slope(SlopeKind::ConvexSd);
            let conv = verify_sufficient_nonlinear(&inst.f, &spec, cond, Mode::Conventional, None, cfg).map_err(e)?;
            if conv.counterexample.is_some() {
                continue;
            }
            applicable += 1;
            let r = conv.certified_radius.unwrap_or(SUITE_DELTA / 2.0);
            let alt = verify_sufficient_nonlinear(&inst.f, &spec.with_delta(r), cond, Mode::Alternative, None, cfg)
                .map_err(e)?;
            ensure(alt.counterexample.is_none(), || {
                format!("instance {k}, q = {q}: alternative condition fails at {:?}", alt.counterexample)
            })?;
        }
    }
    ensure(applicable > 0, || "the conventional condition never held".into())?;
    Ok(format!("{applicable} instances with the conventional condition throughout B_delta, zero counterexamples"))
}

fn random_polyhedral_mapping(rng: &mut ChaCha8Rng) -> SetValuedMapping {
    let x_dim = rng.gen_range(1..=2);
    let dim = x_dim + 1;
    let m = rng.gen_range(2..=4);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let rhs: Vec<f64> = (0..m).map(|k| if k == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    SetValuedMapping::polyhedral(x_dim, 1, rows, rhs, vec![0.0; x_dim], vec![0.0], None).unwrap()
}

fn criterion_9(cfg: &Config) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut implications, mut conversions) = (0, 0);
    let (delta, mu) = (0.5, 0.5);
    for k in 0..20 {
        let m = random_polyhedral_mapping(&mut rng);
        for tau in [0.25, 0.5, 1.0, 2.0] {
            let g = Gauge::linear(tau).map_err(e)?;
            let graph = check_subregularity(&m, &g, delta, mu, SubregularityVariant::Graph, cfg).map_err(e)?;
            let plain = check_subregularity(&m, &g, delta, mu, SubregularityVariant::Plain, cfg).map_err(e)?;
            if graph.status == Status::Holds {
                implications += 1;
                ensure(plain.status == Status::Holds, || {
                    format!("mapping {k}, tau {tau}: graph holds but plain {:?} at {:?}", plain.status, plain.witness)
                })?;
            }
            if plain.status == Status::Holds {
                let c = minimal_gate_constant(&g, delta).map_err(e)?;
                let (g2, conv) = convert_subreg_to_graph(&g, delta, mu, c, &plain).map_err(e)?;
                let v = check_subregularity(&m, &g2, conv.delta_prime, f64::INFINITY, SubregularityVariant::Graph, cfg)
                    .map_err(e)?;
                ensure(v.status == Status::Holds, || {
                    format!("mapping {k}, tau {tau}: converted graph bound {:?} at {:?}", v.status, v.witness)
                })?;
                conversions += 1;
            }
        }
    }
    ensure(implications > 0 && conversions > 0, || format!("{implications} implications, {conversions} conversions"))?;

    let cube = SetValuedMapping::functional(
        1,
        1,
        Arc::new(|x: &[f64], y: &[f64]| (y[0] - x[0].powi(3)).abs()),
        Some(Arc::new(|y: &[f64], x: &[f64]| (x[0] - y[0].cbrt()).abs())),
        vec![0.0],
        vec![0.0],
        None,
        None,
    )
    .map_err(e)?;
    let cbrt = Gauge::holder(1.0, 1.0 / 3.0).map_err(e)?;
    let v = check_subregularity(&cube, &cbrt, 1.0, 1.0, SubregularityVariant::Plain, cfg).map_err(e)?;
    let gap = v.max_equality_gap.unwrap_or(f64::INFINITY);
    ensure(v.status == Status::Holds && gap <= 1e-8, || format!("x^3 with t^(1/3): {:?}, gap {gap}", v.status))?;
    let id = Gauge::identity();
    let v = check_subregularity(&cube, &id, 1.0, 1.0, SubregularityVariant::Plain, cfg).map_err(e)?;
    let w = v.witness.as_ref().ok_or("identity gauge produced no witness")?;
    ensure(v.status == Status::Fails && w.point[0].abs() < 1.0, || format!("x^3 with id: {:?}", v.status))?;
    Ok(format!(
        "{implications} graph=>plain implications, {conversions} conversions, zero counterexamples; x^3: gap {gap:.1e}, id witness at x = {:.3}",
        w.point[0]
    ))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let toy = SIProblem::new(
        Objective::zero(1),
        ConstraintFamily::Affine { coef: Arc::new(|_| vec![1.0]), offset: Arc::new(|t| -t) },
        IndexSet::interval(0.0, 1.0, 101).map_err(e)?,
        vec![-1.0],
        &|_| 0.0,
        vec![0.0],
        Region::interval(-2.0, 2.0).map_err(e)?,
    )
    .map_err(e)?;
    let f = residual_function(&toy).map_err(e)?;
    let grid = toy.domain().grid(cfg.resolution(1));
    let err = grid.iter().map(|x| (f.value(x) - x[0].abs()).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-9, || format!("residual deviates from |x| by {err}"))?;
    let sl = slater_check(&toy, &cfg);
    ensure(sl.status == SlaterStatus::Holds && sl.witness.is_some(), || format!("Slater: {:?}", sl.status))?;
    let id = Gauge::identity();
    let lc = calmness_of_level_mapping(&toy, &id, 1.0, 1.0, &cfg).map_err(e)?;
    ensure(lc.set_identity.holds, || format!("set identity: {:?}", lc.set_identity))?;
    ensure(lc.verdict.status == Status::Holds && lc.definition_check.status == Status::Holds, || {
        format!("level mapping calmness {:?} / definition {:?}", lc.verdict.status, lc.definition_check.status)
    })?;
    ensure((lc.modulus.value - 1.0).abs() <= 1e-3, || format!("Er = {}", lc.modulus.value))?;
    let out = falsify_calmness(&toy, &id, &FalsifyBudget::default(), &cfg).map_err(e)?;
    ensure(out.status == FalsifyStatus::Exhausted, || "toy instance: spurious witness".into())?;

    let quad = SIProblem::new(
        Objective::Smooth(SmoothPiece::new(Arc::new(|x| x[0] * x[0]), Arc::new(|x| vec![2.0 * x[0]]))),
        ConstraintFamily::Affine { coef: Arc::new(|_| vec![1.0]), offset: Arc::new(|t| -t - 1.0) },
        IndexSet::interval(0.0, 1.0, 101).map_err(e)?,
        vec![0.0],
        &|_| 0.0,
        vec![0.0],
        Region::interval(-2.0, 2.0).map_err(e)?,
    )
    .map_err(e)?;
    let w = falsify_calmness(&quad, &id, &FalsifyBudget::default(), &cfg).map_err(e)?;
    ensure(w.status == FalsifyStatus::Witness, || {
        format!("quadratic, id: no witness (min ratio {})", w.min_level_ratio)
    })?;
    let tail: Vec<f64> = w.sequence.iter().rev().take(3).map(|s| s.level_ratio).collect();
    ensure(tail.len() == 3 && tail.iter().all(|r| *r < 1e-3), || format!("last ratios {tail:?}"))?;
    let sqrt = Gauge::holder(1.0, 0.5).map_err(e)?;
    let x = falsify_calmness(&quad, &sqrt, &FalsifyBudget::default(), &cfg).map_err(e)?;
    ensure(x.status == FalsifyStatus::Exhausted, || "quadratic, sqrt: spurious witness".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("runtime {secs:.1}s"))?;
    Ok(format!(
        "toy: |f - |x|| <= {err:.0e}, Er = {:.6}, falsify exhausted; quadratic: id witness (last ratio {:.1e}), sqrt exhausted; {secs:.2}s",
        lc.modulus.value, tail[0]
    ))
}

fn cli_binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_errbound"))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn strip_timing(report: &str) -> Result<serde_json::Value, String> {
    let mut v: serde_json::Value = serde_json::from_str(report).map_err(e)?;
    if let Some(env) = v.get_mut("environment").and_then(|x| x.as_object_mut()) {
        env.remove("wall_time_s");
    }
    Ok(v)
}

fn run_cli(spec: &Path, out: &Path, seed: u64) -> Result<(i32, String), String> {
    let status = Command::new(cli_binary())
        .arg("analyze")
        .arg(spec)
        .arg("--out")
        .arg(out)
        .arg("--seed")
        .arg(seed.to_string())
        .output()
        .map_err(e)?;
    let code = status.status.code().unwrap_or(-1);
    let report = std::fs::read_to_string(out.join("report.json")).unwrap_or_default();
    Ok((code, report))
}

fn criterion_11() -> Outcome {
    let dir = golden_dir();
    let expected: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("exit_codes.json")).map_err(e)?).map_err(e)?;
    let cases = expected.as_object().ok_or("exit_codes.json must be an object")?;
    let tmp = tempfile::tempdir().map_err(e)?;
    let mut checked = 0;
    for (name, code) in cases {
        let spec = dir.join(name);
        let want = code.as_i64().ok_or("exit codes must be integers")? as i32;
        let a = tmp.path().join(format!("{name}.a"));
        let b = tmp.path().join(format!("{name}.b"));
        let (ca, ra) = run_cli(&spec, &a, 11)?;
        let (cb, rb) = run_cli(&spec, &b, 11)?;
        ensure(ca == want && cb == want, || format!("{name}: exit codes {ca}/{cb}, expected {want}"))?;
        if want != 4 {
            ensure(strip_timing(&ra)? == strip_timing(&rb)?, || format!("{name}: reports differ"))?;
            let strip = |s: &str| -> String {
                s.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_s\"")).collect::<Vec<_>>().join("\n")
            };
            ensure(strip(&ra) == strip(&rb), || format!("{name}: reports are not byte-identical"))?;
        }
        checked += 1;
    }
    Ok(format!("{checked} golden specs: exit codes match, reports byte-identical across runs"))
}

fn main() {
    let cfg = Config::default();
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "modulus exactness", criterion_1()),
        (2, "slope relations on max-affine functions", criterion_2()),
        (3, "chain rules", criterion_3()),
        (4, "min-norm point vs brute force", criterion_4()),
    ];
    let suite = certified_suite(&cfg);
    match &suite {
        Ok(s) => {
            results.push((5, "sufficient-condition soundness", criterion_5(s, &cfg)));
            results.push((6, "necessary-condition completeness", criterion_6(s, &cfg)));
        }
        Err(err) => {
            results.push((5, "sufficient-condition soundness", Err(err.clone())));
            results.push((6, "necessary-condition completeness", Err(err.clone())));
        }
    }
    results.push((7, "composition reduction", criterion_7(&cfg)));
    match &suite {
        Ok(s) => results.push((8, "conventional-to-alternative hierarchy", criterion_8(s, &cfg))),
        Err(err) => results.push((8, "conventional-to-alternative hierarchy", Err(err.clone()))),
    }
    results.push((9, "set-valued suite", criterion_9(&cfg)));
    results.push((10, "semi-infinite program end to end", criterion_10()));
    results.push((11, "CLI determinism and exit codes", criterion_11()));
    let mut failed = 0;
    for (k, name, r) in &results {
        match r {
            Ok(msg) => println!("criterion {k:>2} PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
