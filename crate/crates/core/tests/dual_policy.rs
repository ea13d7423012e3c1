mod common;

use common::{constant_costs, dual_constant_256, varying_costs};
use jobswitch_core::dual::{Quality, SwitchingPolicy};
use jobswitch_core::free_boundary::{OriginalBoundary, Side};
use jobswitch_core::model::{DerivedSchedule, Job};
use proptest::prelude::*;

fn vi_tol(d: &common::Dual) -> f64 {
    let g = d.sol.grid();
    let p = d.sol.derived().params();
    let scale = p.income_gap() + 2.0 * d.sol.derived().costs().q();
    5.0 * (g.dtau() + g.dx() * g.dx()) * scale
}

#[test]
fn difference_of_recovered_values_is_the_field() {
    let d = dual_constant_256();
    let c = d.sol.consistency();
    assert!(c.max_abs <= 5e-3 * c.q_norm, "{c:?}");
    assert!(c.max_abs <= 1e-8 * c.q_norm.max(1.0), "{c:?}");
    assert!(c.terminal_rel <= 1e-14, "{c:?}");
}

#[test]
fn recovered_values_satisfy_the_variational_inequalities() {
    let d = dual_constant_256();
    let rep = d.sol.vi_check(vi_tol(d));
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn varying_costs_recover_as_well() {
    let d = common::dual_for(&varying_costs(), 128);
    let c = d.sol.consistency();
    assert!(c.max_abs <= 1e-8 * c.q_norm.max(1.0));
    assert!(d.sol.vi_check(vi_tol(&d)).passed);
}

#[test]
fn value_difference_lies_between_cost_obstacles() {
    let d = dual_constant_256();
    let costs = d.sol.derived().costs();
    let g = d.sol.grid();
    for j in 0..=g.n_x {
        let y = g.x(j).exp();
        let diff = d.sol.p(Job::High, g.n_tau, j) - d.sol.p(Job::Low, g.n_tau, j);
        let tol = 1e-9 * y;
        assert!(
            diff >= -costs.phi0(0.0) * y - tol && diff <= costs.phi1(0.0) * y + tol,
            "y {y}: {diff}"
        );
    }
    let (lo, _) = d.sol.y_range();
    assert!(d.sol.dual_value_j(Job::High, 0.5 * lo).is_err());
}

#[test]
fn wealth_inversion_is_monotone_and_matches_the_grid_minimum() {
    let d = dual_constant_256();
    for job in [Job::High, Job::Low] {
        let mut last = f64::INFINITY;
        for w in [0.0, 2.0, 5.0, 10.0, 30.0] {
            let inv = d.sol.invert_wealth(job, w).unwrap();
            assert!(inv.y_star < last);
            last = inv.y_star;
            let direct = d.sol.grid_dual_min(job, w);
            assert!(
                (inv.value - direct).abs() <= 1e-4 * direct.abs().max(1.0),
                "{inv:?} {direct}"
            );
        }
        let floor = d.sol.derived().wealth_floor(job);
        assert!(d.sol.invert_wealth(job, floor).is_err());
        let (low, _) = d.sol.wealth_range(job);
        let near = d.sol.invert_wealth(job, low + 1e-9 * low.abs().max(1.0));
        if let Ok(inv) = near {
            assert!(inv.y_star > 0.5 * d.sol.y_range().1);
        }
    }
}

#[test]
fn convexity_scan_reports_no_violations() {
    let d = dual_constant_256();
    let scan = d.sol.convexity_scan(1e-10);
    assert_eq!(scan.violations, [0, 0], "{scan:?}");
}

#[test]
fn consumption_scales_with_the_dual_price() {
    let d = dual_constant_256();
    let p = d.sol.derived().params();
    let g1 = p.gamma1();
    for job in [Job::High, Job::Low] {
        let a = d.sol.optimal_controls(1.0, 1.0, job).unwrap();
        let b = d.sol.optimal_controls(1.0, 2.0, job).unwrap();
        let ratio = b.consumption / a.consumption;
        assert!((ratio - 2f64.powf(-1.0 / g1)).abs() < 1e-12);
        assert!(a.wealth > b.wealth);
    }
}

#[test]
fn post_retirement_investment_is_a_fixed_fraction_of_wealth() {
    let d = dual_constant_256();
    let p = d.sol.derived().params();
    let c = d.sol.optimal_controls(p.horizon, 0.7, Job::High).unwrap();
    assert_eq!(c.quality, Quality::PostRetirement);
    assert_eq!(c.investment / c.wealth, p.theta() / (p.sigma * p.gamma1()));
}

#[test]
fn controls_match_the_inverted_wealth() {
    let d = dual_constant_256();
    let inv = d.sol.invert_wealth(Job::High, 5.0).unwrap();
    let c = d.sol.optimal_controls(0.0, inv.y_star, Job::High).unwrap();
    assert!((c.wealth - 5.0).abs() < 0.05, "{c:?}");
    assert!(c.quality <= Quality::OneSided);
}

fn flat(side: Side, t_end: f64, level: f64) -> OriginalBoundary {
    let ts: Vec<f64> = (0..=10).map(|i| t_end * i as f64 / 10.0).collect();
    OriginalBoundary {
        side,
        s: vec![level; ts.len()],
        ts,
    }
}

fn toy_policy() -> (DerivedSchedule, SwitchingPolicy) {
    let d = constant_costs();
    let lower = flat(Side::Lower, d.horizon(), 0.5);
    let upper = flat(Side::Upper, d.horizon(), 2.0);
    let policy = SwitchingPolicy::new(&d, Some(lower), Some(upper)).unwrap();
    (d, policy)
}

#[test]
fn boundaries_must_sit_on_their_own_side() {
    let d = constant_costs();
    let wrong = flat(Side::Upper, 1.0, 0.5);
    assert!(SwitchingPolicy::new(&d, Some(wrong), None).is_err());
}

#[test]
fn initial_state_switches_inside_the_switching_region() {
    let (d, policy) = toy_policy();
    let s = policy.start(0.4, Job::High);
    assert_eq!(s.eta, Job::Low);
    assert_eq!(s.events.len(), 1);
    assert_eq!(s.events[0].cost, d.costs().phi0(0.0));
    let s = policy.start(3.0, Job::Low);
    assert_eq!(s.eta, Job::High);
    assert_eq!(s.events[0].cost, d.costs().phi1(0.0));
    let s = policy.start(1.0, Job::High);
    assert!(s.events.is_empty());
}

#[test]
fn crossing_fires_once_at_the_right_endpoint() {
    let (_, policy) = toy_policy();
    let mut s = policy.start(1.0, Job::High);
    assert!(policy.step(&mut s, 0.1, 0.8).unwrap().is_none());
    let ev = policy.step(&mut s, 0.2, 0.45).unwrap().unwrap();
    assert_eq!((ev.t, ev.y, ev.from, ev.to), (0.2, 0.45, Job::High, Job::Low));
    assert!(policy.step(&mut s, 0.3, 0.4).unwrap().is_none());
    assert!(policy.step(&mut s, 0.3, 0.4).is_err());
}

#[test]
fn no_return_to_the_high_income_job_after_t1() {
    let (d, policy) = toy_policy();
    let t1 = d.t1();
    assert!(policy.threshold(Job::Low, t1).is_none());
    let mut s = policy.start(0.4, Job::High);
    assert_eq!(s.eta, Job::Low);
    assert!(policy.step(&mut s, t1, 100.0).unwrap().is_none());
    assert!(policy.step(&mut s, 0.5 * (t1 + d.horizon()), 100.0).unwrap().is_none());
    assert!(policy.threshold(Job::High, d.horizon()).is_none());
}

fn replay(policy: &SwitchingPolicy, ts: &[f64], ys: &[f64], j0: Job) -> Vec<(usize, Job)> {
    let mut s = policy.start(ys[0], j0);
    let mut out: Vec<(usize, Job)> = s.events.iter().map(|e| (0, e.to)).collect();
    for k in 1..ts.len() {
        if let Some(e) = policy.step(&mut s, ts[k], ys[k]).unwrap() {
            out.push((k, e.to));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_and_stepping_agree(steps in prop::collection::vec(-0.3f64..0.3, 20..80), start in -1.0f64..1.0, high in any::<bool>()) {
        let (d, policy) = toy_policy();
        let n = steps.len();
        let ts: Vec<f64> = (0..=n).map(|k| d.horizon() * k as f64 / n as f64).collect();
        let mut x = start;
        let mut ys = vec![x.exp()];
        for s in &steps {
            x += s;
            ys.push(x.exp());
        }
        let j0 = if high { Job::High } else { Job::Low };
        let stepped = replay(&policy, &ts, &ys, j0);
        prop_assert_eq!(&stepped, &replay(&policy, &ts, &ys, j0));

        let table = policy.tabulate(&ts);
        let mut eta = j0;
        let mut tabled = Vec::new();
        for k in 0..=n {
            if let Some((to, _)) = table.fire(k, eta, ys[k]) {
                tabled.push((k, to));
                eta = to;
            }
        }
        prop_assert_eq!(stepped, tabled);
    }
}
