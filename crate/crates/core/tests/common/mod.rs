#![allow(dead_code)]

use std::sync::OnceLock;

use jobswitch_core::domain::{auto_domain, DomainChoice, DomainOptions};
use jobswitch_core::dual::{recover_p, DualSolution, SwitchingPolicy};
use jobswitch_core::free_boundary::{extract_chi, to_original, Side};
use jobswitch_core::model::{CostFn, CostSchedule, DerivedSchedule, ModelParams};
use jobswitch_core::obstacle::{
    solve_lcp, solve_penalized, GridSpec, LcpConfig, NewtonConfig, PenaltyConfig, SolutionField,
};

pub fn constant_costs() -> DerivedSchedule {
    let p = ModelParams::reference();
    let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
    DerivedSchedule::new(p, c).unwrap()
}

pub fn varying_costs() -> DerivedSchedule {
    let p = ModelParams::reference();
    let c = CostSchedule::new(
        CostFn::Affine {
            intercept: 0.15,
            slope: 0.01,
        },
        CostFn::ExpDecay {
            base: 0.2,
            amplitude: 0.2,
            rate: 0.15,
        },
        p.horizon,
    )
    .unwrap();
    DerivedSchedule::new(p, c).unwrap()
}

pub struct Solved {
    pub derived: DerivedSchedule,
    pub domain: DomainChoice,
    pub grid: GridSpec,
    pub penalized: SolutionField,
    pub lcp: SolutionField,
}

pub fn solve_both(derived: DerivedSchedule, n: usize) -> Solved {
    let domain = auto_domain(&derived, &DomainOptions::default()).unwrap();
    let grid = domain.grid(n, n, derived.horizon());
    let cfg = PenaltyConfig::for_domain(&derived, grid.x_min, 1e-3);
    let penalized = solve_penalized(&derived, grid, &cfg, NewtonConfig::default()).unwrap();
    let lcp = solve_lcp(&derived, grid, cfg.n_eff, LcpConfig::default()).unwrap();
    Solved {
        derived,
        domain,
        grid,
        penalized,
        lcp,
    }
}

/// Reference problem with constant costs on a 256 x 256 grid, solved once per test binary.
pub fn constant_256() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| solve_both(constant_costs(), 256))
}

pub fn varying_256() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| solve_both(varying_costs(), 256))
}

pub struct Dual {
    pub sol: DualSolution,
    pub policy: SwitchingPolicy,
}

/// Dual recovery on the automatic domain widened by `4 theta sqrt(T)`.
pub fn dual_for(derived: &DerivedSchedule, n: usize) -> Dual {
    let p = derived.params();
    let domain = auto_domain(derived, &DomainOptions::default()).unwrap();
    let (a, b) = domain.extended(4.0 * p.theta().abs() * p.horizon.sqrt());
    let grid = GridSpec::new(a, b, n, n, p.horizon);
    let field = solve_lcp(derived, grid, -a, LcpConfig::default()).unwrap();
    let sol = recover_p(&field, derived).unwrap();
    let lower = to_original(&extract_chi(&field, Side::Lower), p.horizon);
    let upper = to_original(&extract_chi(&field, Side::Upper), p.horizon);
    let policy = SwitchingPolicy::new(derived, Some(lower), Some(upper)).unwrap();
    Dual { sol, policy }
}

pub fn dual_constant_256() -> &'static Dual {
    static S: OnceLock<Dual> = OnceLock::new();
    S.get_or_init(|| dual_for(&constant_costs(), 256))
}
