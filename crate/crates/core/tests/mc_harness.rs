mod common;

use common::{constant_costs, dual_constant_256};
use jobswitch_core::dual::SwitchingPolicy;
use jobswitch_core::mc::{
    evaluate_budget, evaluate_dual_objective, martingale_check, merton_stream, simulate_wealth, simulate_y, McConfig,
    YEnsemble,
};
use jobswitch_core::model::{Job, ModelParams};

fn cfg(n_paths: usize, n_steps: usize, y0: f64, j0: Job) -> McConfig {
    McConfig {
        n_paths,
        n_steps,
        seed: 17,
        antithetic: true,
        y0,
        j0,
    }
}

#[test]
fn config_rules_are_enforced() {
    let p = ModelParams::reference();
    assert!(simulate_y(&cfg(999, 10, 1.0, Job::High), &p).is_err());
    assert!(simulate_y(&cfg(1001, 10, 1.0, Job::High), &p).is_err());
    assert!(simulate_y(&cfg(1000, 0, 1.0, Job::High), &p).is_err());
    assert!(simulate_y(&cfg(1000, 10, 0.0, Job::High), &p).is_err());
    let ens = simulate_y(&cfg(1000, 7, 1.0, Job::High), &p).unwrap();
    assert_eq!(ens.time(7), p.horizon);
}

#[test]
fn discounted_dual_state_is_a_martingale() {
    let p = ModelParams::reference();
    let c = McConfig {
        antithetic: false,
        ..cfg(20_000, 64, 1.3, Job::High)
    };
    let ens = simulate_y(&c, &p).unwrap();
    let m = martingale_check(&ens, &p, &[0, 16, 32, 48, 64]).unwrap();
    assert!(m.max_z < 3.0, "{m:?}");
    assert!((m.means[0] - 1.3).abs() < 1e-12);
}

#[test]
fn zero_risk_premium_gives_a_deterministic_path() {
    let p = ModelParams {
        mu: ModelParams::reference().r,
        ..ModelParams::reference()
    };
    let ens = YEnsemble::over(&cfg(1000, 20, 0.8, Job::High), &p, p.horizon).unwrap();
    let (ys, _) = ens.path(3);
    for (k, y) in ys.iter().enumerate() {
        let exact = 0.8 * ((p.beta - p.r) * ens.time(k)).exp();
        assert!((y - exact).abs() <= 1e-13 * exact);
    }
}

#[test]
fn paths_repeat_for_a_seed_and_pair_antithetically() {
    let p = ModelParams::reference();
    let a = simulate_y(&cfg(1000, 32, 1.0, Job::High), &p).unwrap();
    let b = simulate_y(&cfg(1000, 32, 1.0, Job::High), &p).unwrap();
    assert_eq!(a.path(10), b.path(10));
    let (_, z0) = a.path(10);
    let (_, z1) = a.path(11);
    assert!(z0.iter().zip(&z1).all(|(x, y)| *x == -*y));
    let other = simulate_y(
        &McConfig {
            seed: 18,
            ..cfg(1000, 32, 1.0, Job::High)
        },
        &p,
    )
    .unwrap();
    assert_ne!(a.path(10).1, other.path(10).1);
}

#[test]
fn never_switching_matches_the_closed_form() {
    let d = constant_costs();
    let p = d.params();
    let never = SwitchingPolicy::never(&d);
    for (j0, y0) in [(Job::High, 0.7), (Job::Low, 1.6)] {
        let ens = simulate_y(&cfg(20_000, 128, y0, j0), p).unwrap();
        let r = evaluate_dual_objective(&ens, &never, &d).unwrap();
        let exact = p.no_switch_value(j0, p.horizon, y0);
        assert!(r.z_score(exact) < 3.0, "{r:?} {exact}");
        assert_eq!(r.mean_switches, 0.0);
        let total: f64 = r.breakdown.values().sum();
        assert!((total - r.estimate).abs() <= 1e-12 * r.estimate.abs());

        let b = evaluate_budget(&ens, &never, &d, 1.0).unwrap();
        let h = 1e-5 * y0;
        let wealth = -(p.no_switch_value(j0, p.horizon, y0 + h) - p.no_switch_value(j0, p.horizon, y0 - h)) / (2.0 * h);
        assert!(b.z_score(wealth) < 3.0, "{b:?} {wealth}");
    }
}

#[test]
fn any_policy_is_below_the_dual_value() {
    let dual = dual_constant_256();
    let d = dual.sol.derived();
    let y0 = 1.0;
    let ens = simulate_y(&cfg(20_000, 256, y0, Job::High), d.params()).unwrap();
    let pde = dual.sol.dual_value_j(Job::High, y0).unwrap();
    for policy in [SwitchingPolicy::never(d), dual.policy.with_lower_scaled(1.2)] {
        let r = evaluate_dual_objective(&ens, &policy, d).unwrap();
        assert!(r.estimate <= pde + 3.0 * r.stderr, "{r:?} {pde}");
    }
}

#[test]
fn boundary_policy_reproduces_the_dual_value() {
    let dual = dual_constant_256();
    let d = dual.sol.derived();
    let y0 = 1.2;
    let ens = simulate_y(&cfg(20_000, 256, y0, Job::Low), d.params()).unwrap();
    let r = evaluate_dual_objective(&ens, &dual.policy, d).unwrap();
    let pde = dual.sol.dual_value_j(Job::Low, y0).unwrap();
    assert!(r.z_score(pde) < 3.0, "{r:?} {pde}");
    assert!(r.mean_switches > 0.0);
}

#[test]
fn cheaper_consumption_spends_less() {
    let dual = dual_constant_256();
    let d = dual.sol.derived();
    let inv = dual.sol.invert_wealth(Job::High, 5.0).unwrap();
    let ens = simulate_y(&cfg(10_000, 128, inv.y_star, Job::High), d.params()).unwrap();
    let full = evaluate_budget(&ens, &dual.policy, d, 1.0).unwrap();
    let cheap = evaluate_budget(&ens, &dual.policy, d, 0.9).unwrap();
    assert!(cheap.estimate < full.estimate);
    assert!(cheap.estimate < 5.0 - 3.0 * cheap.stderr);
    assert_eq!(full.breakdown["income"], cheap.breakdown["income"]);
}

#[test]
fn wealth_paths_agree_and_converge() {
    let dual = dual_constant_256();
    let d = dual.sol.derived();
    let w = 5.0;
    let inv = dual.sol.invert_wealth(Job::High, w).unwrap();
    let run = |n_steps| {
        let ens = simulate_y(&cfg(1000, n_steps, inv.y_star, Job::High), d.params()).unwrap();
        simulate_wealth(&ens, &dual.sol, &dual.policy, w).unwrap()
    };
    let coarse = run(128);
    let fine = run(256);
    assert!(fine.initial_error < 1e-6, "{fine:?}");
    assert!(fine.events > 0 && fine.max_jump_error < 0.02, "{fine:?}");
    assert!(
        fine.mean_max_discrepancy < coarse.mean_max_discrepancy,
        "{coarse:?} {fine:?}"
    );
}

#[test]
fn merton_stream_matches_the_retirement_value() {
    let p = ModelParams::reference();
    let r = merton_stream(&p, 1.0, 4000, 0.5, 3).unwrap();
    let jr = p.merton_jr(1.0).unwrap();
    assert!(r.z_score(jr) < 3.0, "{r:?} {jr}");
}

#[test]
fn reports_are_reproducible() {
    let d = constant_costs();
    let never = SwitchingPolicy::never(&d);
    let ens = simulate_y(&cfg(2000, 64, 1.0, Job::High), d.params()).unwrap();
    let a = evaluate_dual_objective(&ens, &never, &d).unwrap();
    let b = evaluate_dual_objective(&ens, &never, &d).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
