mod common;

use common::{constant_256, constant_costs, varying_256};
use jobswitch_core::model::{validate_assumptions, CostSchedule, DerivedSchedule, ModelParams};
use jobswitch_core::obstacle::diagnostics::{
    linf_difference, monotonicity, residual_report, sandwich_violation, time_derivative_band,
};
use jobswitch_core::obstacle::refine::{refine_study, Refinement};
use jobswitch_core::obstacle::{
    solve_lcp, solve_penalized, GridSpec, LcpConfig, NewtonConfig, ObstacleProblem, PenaltyConfig, Scheme,
    SolutionField,
};
use jobswitch_core::Error;
use proptest::prelude::*;

fn band_tol(s: &common::Solved) -> f64 {
    let p = s.derived.params();
    let scale = p.income_gap() + 2.0 * s.derived.costs().q();
    5.0 * (s.grid.dtau() + s.grid.dx() * s.grid.dx()) * scale
}

#[test]
fn both_methods_stay_between_the_obstacles() {
    for s in [constant_256(), varying_256()] {
        let tol = 10.0 * 1e-3;
        assert!(sandwich_violation(&s.penalized) <= tol);
        assert!(sandwich_violation(&s.lcp) <= 10.0 * 1e-9);
    }
}

#[test]
fn fields_increase_in_x() {
    for s in [constant_256(), varying_256()] {
        for f in [&s.penalized, &s.lcp] {
            let m = monotonicity(f);
            assert!(m.min_forward_difference >= -1e-8 * f.sup_norm(), "{m:?}");
            assert!(m.min_continuation_difference > 0.0, "{m:?}");
        }
    }
}

#[test]
fn time_derivative_stays_in_band() {
    for s in [constant_256(), varying_256()] {
        let tol = band_tol(s);
        for f in [&s.penalized, &s.lcp] {
            let b = time_derivative_band(f, &s.derived);
            assert!(b.max_excess() <= tol, "{b:?}");
        }
    }
}

#[test]
fn penalized_and_lcp_fields_agree() {
    for s in [constant_256(), varying_256()] {
        let gap = linf_difference(&s.penalized, &s.lcp).unwrap();
        assert!(gap <= 5e-3 * s.lcp.sup_norm(), "gap {gap}");
    }
}

#[test]
fn lcp_residual_has_the_contact_signs() {
    let s = constant_256();
    let r = residual_report(&s.lcp);
    let tol = 1e-6;
    assert!(r.lower_contact_min >= -tol, "{}", r.lower_contact_min);
    assert!(r.upper_contact_max <= tol, "{}", r.upper_contact_max);
    assert!(r.continuation_max <= 1e-6, "{}", r.continuation_max);
}

#[test]
fn penalty_gap_shrinks_with_epsilon() {
    let s = constant_256();
    let half = PenaltyConfig::for_domain(&s.derived, s.grid.x_min, 5e-4);
    let f = solve_penalized(&s.derived, s.grid, &half, NewtonConfig::default()).unwrap();
    let g1 = linf_difference(&s.penalized, &s.lcp).unwrap();
    let g2 = linf_difference(&f, &s.lcp).unwrap();
    let ratio = g1 / g2 / 2.0;
    assert!((0.3..=3.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn crank_nicolson_is_close_to_implicit_euler() {
    let s = constant_256();
    let grid = s.grid.with_scheme(Scheme::CrankNicolson);
    let cn = solve_lcp(&s.derived, grid, -grid.x_min, LcpConfig::default()).unwrap();
    let d = s
        .lcp
        .values()
        .iter()
        .zip(cn.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // implicit Euler carries an O(dtau) error; the two schemes differ by about that much
    let p = s.derived.params();
    let scale = p.income_gap() + 2.0 * s.derived.costs().q();
    assert!(d <= s.grid.dtau() * scale, "difference {d}");
}

#[test]
fn lcp_self_converges_under_refinement() {
    let d = constant_costs();
    let s = constant_256();
    let base = GridSpec::new(s.grid.x_min, s.grid.x_max, 64, 64, d.horizon());
    let rep = refine_study(base, 3, Refinement::Both, |g| {
        solve_lcp(&d, g, -g.x_min, LcpConfig::default())
    })
    .unwrap();
    assert!(rep.orders.iter().all(|&o| o > 0.5), "{:?}", rep.orders);
}

#[test]
fn binary_cache_round_trips() {
    let s = constant_256();
    let mut buf = Vec::new();
    s.lcp.write_binary(&mut buf).unwrap();
    let problem = ObstacleProblem::new(&s.derived, s.grid, -s.grid.x_min).unwrap();
    let back = SolutionField::read_binary(buf.as_slice(), &problem).unwrap();
    assert_eq!(back.values(), s.lcp.values());
    assert_eq!(back.method, s.lcp.method);

    let other = ObstacleProblem::new(&s.derived, s.grid.with_n_tau(128), -s.grid.x_min).unwrap();
    assert!(matches!(
        SolutionField::read_binary(buf.as_slice(), &other),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        SolutionField::read_binary(&b"XXXX\0\0\0\0"[..], &problem),
        Err(Error::Format(_))
    ));
}

#[test]
fn grid_horizon_must_match_the_model() {
    let d = constant_costs();
    let g = GridSpec::new(-1.0, 1.0, 64, 64, 5.0);
    assert!(matches!(ObstacleProblem::new(&d, g, 1.0), Err(Error::InvalidGrid(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sandwich_and_monotonicity_hold_for_admissible_costs(phi0 in 0.05f64..0.4, phi1 in 0.05f64..0.6) {
        let p = ModelParams::reference();
        let costs = CostSchedule::constant(phi0, phi1, p.horizon).unwrap();
        let rep = validate_assumptions(&p, &costs, 200).unwrap();
        prop_assume!(rep.passed());
        let d = DerivedSchedule::new(p, costs);
        prop_assume!(d.is_ok());
        let d = d.unwrap();
        let g = GridSpec::new(-2.0, 3.0, 64, 64, d.horizon());
        let f = solve_lcp(&d, g, 2.0, LcpConfig::default()).unwrap();
        prop_assert!(sandwich_violation(&f) <= 1e-8);
        let m = monotonicity(&f);
        prop_assert!(m.min_forward_difference >= -1e-8 * f.sup_norm());
    }
}
