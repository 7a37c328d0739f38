//! Worked instances with closed-form answers, one module at a time.

use std::sync::Arc;

use approx::{assert_abs_diff_eq, assert_relative_eq};

use errbound::errorbounds::*;
use errbound::function::{compose_gauge, positive_part, sublevel_distance, DistanceFlag, FunctionModel, SmoothPiece};
use errbound::gauge::Convexity;
use errbound::grid::log_grid;
use errbound::minnorm::min_norm_point;
use errbound::setvalued::*;
use errbound::sip::*;
use errbound::slopes::*;
use errbound::{check_growth_condition, Config, Gauge, Region};

fn abs() -> FunctionModel {
    FunctionModel::from_pieces(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)]).unwrap()
}

fn scaled_abs(k: f64) -> FunctionModel {
    FunctionModel::from_pieces(&[(vec![k], 0.0), (vec![-k], 0.0)]).unwrap()
}

fn square() -> FunctionModel {
    let p = SmoothPiece::new(Arc::new(|x| x[0] * x[0]), Arc::new(|x| vec![2.0 * x[0]]));
    FunctionModel::max_smooth(1, vec![p], true, Some(Region::interval(-2.0, 2.0).unwrap())).unwrap()
}

fn square_blackbox() -> FunctionModel {
    FunctionModel::blackbox(1, Arc::new(|x| x[0] * x[0]), Region::interval(-2.0, 2.0).unwrap(), true).unwrap()
}

fn sqrt() -> Gauge {
    Gauge::holder(1.0, 0.5).unwrap()
}

fn t_squared() -> Gauge {
    Gauge::custom(
        Arc::new(|t| t * t),
        Some(Arc::new(|t| 2.0 * t)),
        Some(Arc::new(|s: f64| s.sqrt())),
        Some(Convexity::Convex),
    )
    .unwrap()
}

fn two_s() -> Gauge {
    Gauge::nu_function(Arc::new(|s| 2.0 * s)).unwrap()
}

fn cfg() -> Config {
    Config::default()
}

fn spec(f: &FunctionModel, form: BoundForm, delta: f64, mu: f64) -> ErrorBoundSpec {
    ErrorBoundSpec::new(f, form, vec![0.0; f.dim()], delta, mu).unwrap()
}

mod gauges {
    use super::*;

    #[test]
    fn values_derivatives_inverses() {
        let half = Gauge::linear(2.0).unwrap();
        assert_relative_eq!(sqrt().eval(4.0).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(half.eval(1.0).unwrap(), 0.5);
        assert_relative_eq!(two_s().eval(3.0).unwrap(), 9.0, max_relative = 1e-10);

        assert_relative_eq!(sqrt().derivative(4.0).unwrap(), 0.25, max_relative = 1e-15);
        for t in [0.1, 1.0, 7.0] {
            assert_relative_eq!(half.derivative(t).unwrap(), 0.5);
        }
        assert_relative_eq!(two_s().derivative(3.0).unwrap(), 6.0, max_relative = 1e-12);

        assert_relative_eq!(sqrt().inverse(2.0).unwrap(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(half.inverse(0.5).unwrap(), 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(two_s().inverse(9.0).unwrap(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn growth_constants() {
        let grid = log_grid(1e-6, 10.0, 200);
        let g = check_growth_condition(&sqrt(), 2.0, &grid).unwrap();
        assert!(g.finite);
        assert_relative_eq!(g.gamma, 2.0 * 2f64.sqrt(), max_relative = 1e-9);
        let g = check_growth_condition(&Gauge::identity(), 3.0, &grid).unwrap();
        assert_relative_eq!(g.gamma, 3.0, max_relative = 1e-12);
        let g = check_growth_condition(&t_squared(), 1.0, &grid).unwrap();
        assert_relative_eq!(g.gamma, 0.5, max_relative = 1e-12);
    }
}

mod functions {
    use super::*;

    #[test]
    fn evaluation_and_domain_convention() {
        assert_eq!(abs().evaluate(&[0.5]).unwrap(), 0.5);
        assert_eq!(abs().evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(square_blackbox().evaluate(&[3.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn positive_part_and_composition() {
        let shifted = FunctionModel::from_pieces(&[(vec![1.0], -1.0), (vec![-1.0], -1.0)]).unwrap();
        let p = positive_part(&shifted);
        assert_eq!(p.evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(p.evaluate(&[3.0]).unwrap(), 2.0);
        assert_eq!(positive_part(&square_blackbox()).evaluate(&[1.0]).unwrap(), 1.0);

        let c = compose_gauge(&sqrt(), &square());
        assert_relative_eq!(c.evaluate(&[2.0]).unwrap(), 2.0, max_relative = 1e-15);
        let c = compose_gauge(
            &sqrt(),
            &FunctionModel::blackbox(1, Arc::new(|x| x[0] * x[0]), Region::interval(-4.0, 4.0).unwrap(), true).unwrap(),
        );
        assert_relative_eq!(c.evaluate(&[-3.0]).unwrap(), 3.0, max_relative = 1e-15);
        let minus_one = FunctionModel::from_pieces(&[(vec![0.0], -1.0)]).unwrap();
        assert_eq!(compose_gauge(&sqrt(), &minus_one).evaluate(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn sublevel_distances() {
        use errbound::function::SublevelQuery;
        let d = sublevel_distance(&abs(), &SublevelQuery::new(0.0, vec![0.5])).unwrap();
        assert_eq!(d.flag, DistanceFlag::Exact);
        assert_abs_diff_eq!(d.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.witness.unwrap()[0], 0.0, epsilon = 1e-12);

        let q = SublevelQuery::new(0.0, vec![1.0]).resolution(401).depth(40);
        let d = sublevel_distance(&square_blackbox(), &q).unwrap();
        assert_eq!(d.flag, DistanceFlag::Sampled);
        assert_abs_diff_eq!(d.value, 1.0, epsilon = 1e-9);

        let shifted =
            FunctionModel::blackbox(1, Arc::new(|x| x[0] + 5.0), Region::interval(-2.0, 2.0).unwrap(), true).unwrap();
        let d = sublevel_distance(&shifted, &SublevelQuery::new(0.0, vec![0.0])).unwrap();
        assert_eq!(d.flag, DistanceFlag::EmptyInBox);
        assert_eq!(d.value, f64::INFINITY);
    }
}

mod slopes {
    use super::*;

    #[test]
    fn local_slopes() {
        let s = local_slope(&abs(), &[0.5], &cfg()).unwrap();
        assert_eq!(s.value, 1.0);
        let constant = FunctionModel::from_pieces(&[(vec![0.0], 2.0)]).unwrap();
        assert_eq!(local_slope(&constant, &[0.3], &cfg()).unwrap().value, 0.0);
        let s = local_slope(&square_blackbox(), &[1.0], &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 2.0, epsilon = 0.02);
    }

    #[test]
    fn nonlocal_slopes() {
        let box2 = Region::interval(-2.0, 2.0).unwrap();
        let s = nonlocal_slope(&abs(), &[0.5], Some(&box2), &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-9);

        let root = FunctionModel::blackbox(1, Arc::new(|x| x[0].abs().sqrt()), box2.clone(), false).unwrap();
        let s = nonlocal_slope(&root, &[1.0], Some(&box2), &cfg()).unwrap();
        assert!(s.value >= 1.0 - 1e-9, "{}", s.value);
        let l = local_slope(&root, &[1.0], &cfg()).unwrap();
        assert_abs_diff_eq!(l.value, 0.5, epsilon = 0.01);

        let one_minus = FunctionModel::from_pieces(&[(vec![-1.0], 1.0)]).unwrap();
        let s = nonlocal_slope(&one_minus, &[0.0], Some(&box2), &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn subdifferential_slopes_and_min_norm() {
        assert_abs_diff_eq!(
            subdiff_slope(&abs(), &[0.0], SlopeKind::ConvexSd, &cfg()).unwrap().value,
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            subdiff_slope(&abs(), &[0.5], SlopeKind::ConvexSd, &cfg()).unwrap().value,
            1.0,
            epsilon = 1e-12
        );
        let max2 = FunctionModel::from_pieces(&[(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]).unwrap();
        let s = subdiff_slope(&max2, &[0.0, 0.0], SlopeKind::ConvexSd, &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 0.5f64.sqrt(), epsilon = 1e-9);

        let m = min_norm_point(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(m.point[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.point[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.norm, 0.5f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(min_norm_point(&[vec![-1.0], vec![1.0]]).unwrap().norm, 0.0, epsilon = 1e-12);
        let m = min_norm_point(&[vec![2.0, 0.0], vec![3.0, 0.0], vec![2.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(m.norm, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.point[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn local_chain_rule() {
        // the inner slope of a smooth piece is a difference quotient
        let c = chain_rule_local(&sqrt(), &square(), &[2.0], &cfg()).unwrap();
        assert_abs_diff_eq!(c.rhs, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c.lhs.value, 1.0, epsilon = 1e-2);
        let tau = 4.0;
        let c = chain_rule_local(&Gauge::linear(tau).unwrap(), &abs(), &[0.5], &cfg()).unwrap();
        assert_abs_diff_eq!(c.lhs.value, 1.0 / tau, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rhs, 1.0 / tau, epsilon = 1e-12);
        let c = chain_rule_local(&t_squared(), &abs(), &[1.0], &cfg()).unwrap();
        assert_abs_diff_eq!(c.rhs, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.lhs.value, 2.0, epsilon = 2e-2);
    }

    #[test]
    fn nonlocal_chain_directions() {
        let box2 = Region::interval(-2.0, 2.0).unwrap();
        let c = chain_rule_nonlocal_bound(&sqrt(), &square(), &[1.0], Some(&box2), &cfg()).unwrap();
        assert_eq!(c.direction, Direction::LhsAtLeastRhs);
        assert_abs_diff_eq!(c.inner.value, 2.0, epsilon = 1e-6);
        assert!(c.lhs.value >= c.rhs - 1e-9);
        let c = chain_rule_nonlocal_bound(&t_squared(), &abs(), &[1.0], Some(&box2), &cfg()).unwrap();
        assert_eq!(c.direction, Direction::LhsAtMostRhs);
        assert_abs_diff_eq!(c.rhs, 2.0, epsilon = 1e-9);
        assert!(c.lhs.value <= c.rhs + 1e-9);
    }

    #[test]
    fn strict_outer_slopes() {
        let e = strict_outer_slope(&abs(), &[0.0], SlopeKind::Local, &cfg()).unwrap();
        assert_abs_diff_eq!(e.value, 1.0, epsilon = 1e-9);
        let e = strict_outer_slope(&square(), &[0.0], SlopeKind::Local, &cfg()).unwrap();
        assert!(e.value < 1e-2);
        assert_eq!(e.trend, Trend::Decreasing);
        let neg_abs =
            FunctionModel::blackbox(1, Arc::new(|x| -x[0].abs()), Region::interval(-1.0, 1.0).unwrap(), false).unwrap();
        let e = strict_outer_slope(&neg_abs, &[0.0], SlopeKind::Local, &cfg()).unwrap();
        assert!(e.isolated_from_above);
        assert_eq!(e.value, f64::INFINITY);
    }
}

mod bounds {
    use super::*;

    #[test]
    fn direct_checks() {
        let inf = f64::INFINITY;
        let v = check_error_bound_direct(&abs(), &spec(&abs(), BoundForm::Linear { tau: 1.0 }, inf, inf), None, &cfg())
            .unwrap();
        assert_eq!(v.status, Status::Holds);
        let v = check_error_bound_direct(&abs(), &spec(&abs(), BoundForm::Linear { tau: 1.5 }, inf, inf), None, &cfg())
            .unwrap();
        assert_eq!(v.status, Status::Fails);
        let w = v.witness.unwrap();
        assert!(1.5 * w.distance > w.f_value);
        let v = check_error_bound_direct(&square(), &spec(&square(), BoundForm::Gauge(sqrt()), inf, inf), None, &cfg())
            .unwrap();
        assert_eq!(v.status, Status::Holds);
    }

    #[test]
    fn moduli() {
        let m = estimate_modulus(&abs(), &[0.0], None, None, &cfg()).unwrap();
        assert_abs_diff_eq!(m.value, 1.0, epsilon = 1e-3);
        let m = estimate_modulus(&square(), &[0.0], None, None, &cfg()).unwrap();
        assert!(m.value <= 1e-2);
        assert_eq!(m.trend, Trend::Decreasing);
        let m = estimate_modulus(&square(), &[0.0], Some(&sqrt()), None, &cfg()).unwrap();
        assert_abs_diff_eq!(m.value, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn fixed_point_condition() {
        let local = FixedPointVariant::Slope(SlopeKind::Local);
        let v = check_fixed_point(&abs(), &[0.5], 1.0, 1.0, local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert_eq!(v.cross_check.unwrap().status, Status::Holds);
        let v = check_fixed_point(&abs(), &[0.5], 1.2, 1.0, local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        let v = check_fixed_point(&square(), &[0.1], 1.0, 1.0, local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
    }

    #[test]
    fn sufficient_linear() {
        let inf = f64::INFINITY;
        let s = spec(&abs(), BoundForm::Linear { tau: 1.0 }, 2.0, inf);
        let v = verify_sufficient_linear(&abs(), &s, SlopeKind::Local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert_eq!(v.certified_radius, Some(1.0));
        // with α = 0.5 the slope condition 0.5·1 ≥ τ needs τ ≤ 0.5
        let s = s.with_alpha(0.5).unwrap();
        assert_eq!(s.beta(), 0.5);
        let v = verify_sufficient_linear(&abs(), &s, SlopeKind::Local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        let s = spec(&abs(), BoundForm::Linear { tau: 0.5 }, 2.0, inf).with_alpha(0.5).unwrap();
        let v = verify_sufficient_linear(&abs(), &s, SlopeKind::Local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert_relative_eq!(v.certified_radius.unwrap(), 4.0 / 3.0);
        let s = spec(&square(), BoundForm::Linear { tau: 0.5 }, 1.0, inf);
        let v = verify_sufficient_linear(&square(), &s, SlopeKind::Local, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
    }

    #[test]
    fn necessary_linear() {
        let inf = f64::INFINITY;
        for (f, tau) in [(abs(), 1.0), (scaled_abs(2.0), 2.0), (abs(), 0.5)] {
            let s = spec(&f, BoundForm::Linear { tau }, 1.0, inf);
            assert_eq!(check_error_bound_direct(&f, &s, None, &cfg()).unwrap().status, Status::Holds);
            let v = check_necessary_linear(&f, &s, None, &cfg()).unwrap();
            assert_eq!(v.status, Status::Holds, "tau {tau}");
            assert!(!v.inconsistency);
        }
    }

    #[test]
    fn sufficient_nonlinear_both_modes() {
        let s = spec(&square(), BoundForm::Gauge(sqrt()), f64::INFINITY, f64::INFINITY);
        for mode in [Mode::Conventional, Mode::Alternative] {
            let v = verify_sufficient_nonlinear(
                &square(),
                &s,
                NonlinearCondition::Slope(SlopeKind::Local),
                mode,
                None,
                &cfg(),
            )
            .unwrap();
            assert_eq!(v.status, Status::Holds, "{mode:?}");
        }
        for tau in [0.5, 1.0] {
            let s = spec(&abs(), BoundForm::Gauge(Gauge::linear(tau).unwrap()), 1.0, f64::INFINITY);
            for mode in [Mode::Conventional, Mode::Alternative] {
                let v = verify_sufficient_nonlinear(
                    &abs(),
                    &s,
                    NonlinearCondition::Slope(SlopeKind::Local),
                    mode,
                    None,
                    &cfg(),
                )
                .unwrap();
                assert_eq!(v.status, Status::Holds, "τ {tau} {mode:?}");
            }
        }
    }

    #[test]
    fn psi_and_nu_forms() {
        let s = spec(&square(), BoundForm::Psi(t_squared()), 1.0, f64::INFINITY);
        let v = verify_psi_form(
            &square(),
            &s,
            NonlinearCondition::Slope(SlopeKind::Local),
            Mode::Alternative,
            None,
            &cfg(),
        )
        .unwrap();
        assert_eq!(v.status, Status::Holds);
        // equality case: the sampled local slope undershoots 2|u| by ~1e-7, the
        // subdifferential slope is exact
        let s = spec(&square(), BoundForm::NuIntegral(two_s()), 1.0, f64::INFINITY);
        let v = verify_psi_form(
            &square(),
            &s,
            NonlinearCondition::Slope(SlopeKind::ConvexSd),
            Mode::Alternative,
            None,
            &cfg(),
        )
        .unwrap();
        assert_eq!(v.status, Status::Holds);
    }

    #[test]
    fn necessary_nonlinear() {
        let s = spec(&square(), BoundForm::Gauge(sqrt()), 1.0, f64::INFINITY);
        let v = check_necessary_nonlinear_convex(&square(), &s, Mode::Both, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
        let s = spec(&abs(), BoundForm::Gauge(Gauge::identity()), 1.0, f64::INFINITY);
        let v = check_necessary_nonlinear_convex(&abs(), &s, Mode::Both, None, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
    }

    #[test]
    fn perturbed_bounds() {
        let run = |f: &FunctionModel, tau: f64| {
            let s = spec(f, BoundForm::Linear { tau }, 1.0, 1.0);
            check_perturbed(f, &s, SlopeKind::Local, None, &cfg()).unwrap()
        };
        assert_eq!(run(&abs(), 1.0).direct.status, Status::Holds);
        assert_eq!(run(&scaled_abs(2.0), 2.0).direct.status, Status::Holds);
        let r = run(&square(), 1.0);
        assert_eq!(r.direct.status, Status::Fails);
        let w = r.direct.witness.unwrap();
        let c = w.level.unwrap();
        // d(x, [x² ≤ c]) = |x| − √c
        let d = w.point[0].abs() - c.sqrt();
        assert!(d > w.point[0] * w.point[0] - c);
    }

    #[test]
    fn holder_orders() {
        let r = holder_order_analysis(&square(), &[0.0], 0.5, None, &cfg()).unwrap();
        assert_abs_diff_eq!(r.order_modulus.value, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.value_weighted.value, 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.distance_weighted.value, 2.0, epsilon = 1e-3);
        assert!(r.consistent && r.positive.iter().all(|p| *p));
        let r = holder_order_analysis(&square(), &[0.0], 1.0, None, &cfg()).unwrap();
        assert!(r.consistent && r.positive.iter().all(|p| !*p));
        let r = holder_order_analysis(&abs(), &[0.0], 1.0, None, &cfg()).unwrap();
        assert_abs_diff_eq!(r.order_modulus.value, 1.0, epsilon = 1e-9);
        assert!(r.consistent && r.positive.iter().all(|p| *p));
    }
}

mod mappings {
    use super::*;

    fn diagonal() -> SetValuedMapping {
        SetValuedMapping::polyhedral(
            1,
            1,
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            vec![0.0, 0.0],
            vec![0.0],
            vec![0.0],
            None,
        )
        .unwrap()
    }

    fn cube_map() -> SetValuedMapping {
        SetValuedMapping::functional(
            1,
            1,
            Arc::new(|x, y| (y[0] - x[0].powi(3)).abs()),
            Some(Arc::new(|y, x| (x[0] - y[0].cbrt()).abs())),
            vec![0.0],
            vec![0.0],
            Some(Region::interval(-1.0, 1.0).unwrap()),
            Some(Region::interval(-1.0, 1.0).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn graph_distances() {
        let m = diagonal();
        assert_abs_diff_eq!(m.graph_distance(&[1.0], &cfg()).unwrap().value, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.graph_distance(&[0.0], &cfg()).unwrap().value, 0.0, epsilon = 1e-12);

        let epi = SetValuedMapping::functional(
            1,
            1,
            Arc::new(|x, y| (x[0] * x[0] - y[0]).max(0.0)),
            None,
            vec![0.0],
            vec![0.0],
            Some(Region::interval(-1.0, 1.0).unwrap()),
            Some(Region::interval(-1.0, 1.0).unwrap()),
        )
        .unwrap();
        // max(0.1 − u, u²) is minimal where u² + u − 0.1 = 0
        let u = (-1.0 + 1.4f64.sqrt()) / 2.0;
        let d = epi.graph_distance(&[0.1], &cfg()).unwrap().value;
        assert_abs_diff_eq!(d, u * u, epsilon = 1e-6);
    }

    #[test]
    fn subregularity_of_the_cube() {
        let cube_root = Gauge::holder(1.0, 1.0 / 3.0).unwrap();
        let v = check_subregularity(&cube_map(), &cube_root, 1.0, 1.0, SubregularityVariant::Plain, &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds);
        let v = check_subregularity(&cube_map(), &Gauge::identity(), 1.0, 1.0, SubregularityVariant::Plain, &cfg())
            .unwrap();
        assert_eq!(v.status, Status::Fails);
        assert!(v.witness.unwrap().point[0].abs() < 1.0);
        for variant in [SubregularityVariant::Plain, SubregularityVariant::Graph] {
            let id = SetValuedMapping::polyhedral(
                1,
                1,
                vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
                vec![0.0, 0.0],
                vec![0.0],
                vec![0.0],
                None,
            )
            .unwrap();
            let g =
                if variant == SubregularityVariant::Plain { Gauge::identity() } else { Gauge::linear(0.5).unwrap() };
            assert_eq!(check_subregularity(&id, &g, 1.0, 1.0, variant, &cfg()).unwrap().status, Status::Holds);
        }
    }

    #[test]
    fn conversions() {
        let plain = check_subregularity(&diagonal(), &Gauge::identity(), 2.0, 1.0, SubregularityVariant::Plain, &cfg())
            .unwrap();
        let (g, c) = convert_subreg_to_graph(&Gauge::identity(), 2.0, 1.0, 1.0, &plain).unwrap();
        assert_eq!(c.delta_prime, 0.5);
        assert_relative_eq!(g.eval(0.3).unwrap(), 0.6);

        // sup t/√t on ]0, 0.6[ is √0.6
        let c = minimal_gate_constant(&sqrt(), 0.4).unwrap();
        assert_abs_diff_eq!(c, 0.6f64.sqrt(), epsilon = 1e-6);

        let tau = 2.0;
        let lin = Gauge::linear(tau).unwrap();
        let plain = check_subregularity(
            &diagonal(),
            &Gauge::linear(1.0).unwrap(),
            1.0,
            1.0,
            SubregularityVariant::Plain,
            &cfg(),
        )
        .unwrap();
        let (g, c) = convert_subreg_to_graph(&lin, 1.0, 1.0, tau, &plain).unwrap();
        assert_eq!(c.factor, tau + 1.0);
        assert_relative_eq!(g.eval(1.0).unwrap(), (tau + 1.0) / tau);
    }

    #[test]
    fn slopes_of_the_graph_distance() {
        let s = mapping_slope(&diagonal(), &[1.0], SlopeKind::Local, &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-9);
        let s = mapping_slope(&diagonal(), &[0.0], SlopeKind::Local, &cfg()).unwrap();
        assert!(s.value <= 1.0 + 1e-9);
        let s = mapping_slope(&diagonal(), &[0.5], SlopeKind::Nonlocal, &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn mapping_sufficient_conditions() {
        let two = Gauge::linear(0.5).unwrap();
        let v = verify_mapping_sufficient(
            &diagonal(),
            &two,
            1.0,
            1.0,
            1.0,
            Mode::Conventional,
            NonlinearCondition::Slope(SlopeKind::Local),
            &cfg(),
        )
        .unwrap();
        assert_eq!(v.status, Status::Holds);
        let cube_root = Gauge::holder(1.0, 1.0 / 3.0).unwrap();
        let v = verify_mapping_sufficient(
            &cube_map(),
            &cube_root,
            0.5,
            1.0,
            1.0,
            Mode::Alternative,
            NonlinearCondition::Slope(SlopeKind::Local),
            &cfg(),
        )
        .unwrap();
        assert_ne!(v.status, Status::Fails);
    }

    #[test]
    fn calmness() {
        assert_eq!(check_calmness(&diagonal(), &Gauge::identity(), 1.0, 1.0, &cfg()).unwrap().status, Status::Holds);
        let cube_root = Gauge::holder(1.0, 1.0 / 3.0).unwrap();
        // F(y) = {x : x³ = y} is the inverse of the cube map
        let inverse_cube = cube_map().inverse().unwrap();
        assert_eq!(check_calmness(&inverse_cube, &cube_root, 1.0, 1.0, &cfg()).unwrap().status, Status::Holds);
        // F(y) = [−1, 1]
        let constant = SetValuedMapping::polyhedral(
            1,
            1,
            vec![vec![0.0, 1.0], vec![0.0, -1.0]],
            vec![1.0, 1.0],
            vec![0.0],
            vec![0.0],
            None,
        )
        .unwrap();
        assert_eq!(check_calmness(&constant, &Gauge::identity(), 1.0, 1.0, &cfg()).unwrap().status, Status::Holds);
    }
}

mod semi_infinite {
    use super::*;

    fn toy(c: f64) -> SIProblem {
        SIProblem::new(
            Objective::zero(1),
            ConstraintFamily::Affine { coef: Arc::new(|_| vec![1.0]), offset: Arc::new(|t| -t) },
            IndexSet::interval(0.0, 1.0, 101).unwrap(),
            vec![c],
            &|_| 0.0,
            vec![0.0],
            Region::interval(-2.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn residual_function_of_the_toy() {
        let f = residual_function(&toy(-1.0)).unwrap();
        assert_eq!(f.evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[1.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[-0.7]).unwrap(), 0.7);
    }

    #[test]
    fn slater_points() {
        let r = slater_check(&toy(-1.0), &cfg());
        assert_eq!(r.status, SlaterStatus::Holds);
        assert!(r.witness.unwrap()[0] <= -1.0 + 1e-9);

        let tx = SIProblem::new(
            Objective::zero(1),
            ConstraintFamily::Affine { coef: Arc::new(|t| vec![t]), offset: Arc::new(|_| 0.0) },
            IndexSet::interval(0.0, 1.0, 101).unwrap(),
            vec![0.0],
            &|_| 0.0,
            vec![0.0],
            Region::interval(-2.0, 2.0).unwrap(),
        )
        .unwrap();
        assert_ne!(slater_check(&tx, &cfg()).status, SlaterStatus::Holds);

        let ball = SIProblem::new(
            Objective::zero(1),
            ConstraintFamily::Smooth {
                value: Arc::new(|_, x| x[0] * x[0] - 1.0),
                gradient: Arc::new(|_, x| vec![2.0 * x[0]]),
            },
            IndexSet::points(vec![0.0]).unwrap(),
            vec![0.0],
            &|_| 0.0,
            vec![0.0],
            Region::interval(-2.0, 2.0).unwrap(),
        )
        .unwrap();
        let r = slater_check(&ball, &cfg());
        assert_eq!(r.status, SlaterStatus::Holds);
        assert_abs_diff_eq!(r.witness.unwrap()[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn active_sets() {
        let p = toy(-1.0);
        let zero = vec![0.0; 101];
        let a = active_indices(&p, &zero, &[0.0], 1e-12).unwrap();
        assert_eq!(a.t_values, vec![0.0]);
        assert!(active_indices(&p, &zero, &[-0.5], 1e-12).unwrap().indices.is_empty());
        assert!(active_indices(&p, &zero, &[0.5], 1e-12).is_err());
    }

    #[test]
    fn solves() {
        let p = toy(-1.0);
        let s = solve_instance(&p, &[-1.0], &vec![0.0; 101], &cfg()).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-7);
        let s = solve_instance(&p, &[-1.0], &vec![0.2; 101], &cfg()).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.2, epsilon = 1e-7);
        let s = solve_instance(&p, &[0.0], &vec![0.0; 101], &cfg()).unwrap();
        assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-12);
        // every feasible grid point x ≤ 0 of the domain is optimal
        assert!(s.solution_sample.len() > 2);
        assert!(s.solution_sample.iter().all(|x| x[0] <= 1e-9));
    }

    #[test]
    fn level_calmness_with_a_convex_gauge_fails() {
        let lc = calmness_of_level_mapping(&toy(-1.0), &t_squared(), 1.0, 1.0, &cfg()).unwrap();
        assert_eq!(lc.verdict.status, Status::Fails);
    }
}
