//! Time marching for the penalized equation (Newton per step) and for
//! the complementarity form (projected SOR per step).

use crate::error::{Error, Result};
use crate::model::DerivedSchedule;
use crate::obstacle::field::{SolutionField, SolveMethod, SolveStats};
use crate::obstacle::grid::GridSpec;
use crate::obstacle::penalty::PenaltyConfig;
use crate::obstacle::problem::{Bounds, ObstacleProblem, StepSystem};
use crate::obstacle::tridiag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcpConfig {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LcpConfig {
    fn default() -> Self {
        Self {
            omega: 1.5,
            tol: 1e-9,
            max_sweeps: 20_000,
        }
    }
}

/// Solves the penalized problem on `grid` with Dirichlet data from `cfg.n_eff`.
pub fn solve_penalized(
    derived: &DerivedSchedule,
    grid: GridSpec,
    cfg: &PenaltyConfig,
    newton: NewtonConfig,
) -> Result<SolutionField> {
    cfg.validate()?;
    let min_gap = grid
        .taus()
        .into_iter()
        .map(|t| derived.psi(0, t) + derived.psi(1, t))
        .fold(f64::INFINITY, f64::min);
    if cfg.epsilon >= min_gap {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be below min(psi0 + psi1) = {min_gap:.6e}"),
        });
    }
    let problem = ObstacleProblem::new(derived, grid, cfg.n_eff)?;
    let (v, stats) = march(&problem, |sys, v, b, dt, step| {
        newton_step(sys, v, b, dt, cfg, newton, step)
    })?;
    let method = SolveMethod::Penalized {
        epsilon: cfg.epsilon,
        c0: cfg.c0,
        c1: cfg.c1,
        n_eff: cfg.n_eff,
    };
    SolutionField::from_values(&problem, method, stats, v)
}

/// Solves the complementarity problem on `grid` by projected SOR, with the
/// lower Dirichlet data built from `n_eff`.
pub fn solve_lcp(derived: &DerivedSchedule, grid: GridSpec, n_eff: f64, lcp: LcpConfig) -> Result<SolutionField> {
    let problem = ObstacleProblem::new(derived, grid, n_eff)?;
    solve_lcp_problem(&problem, lcp)
}

pub fn solve_lcp_problem(problem: &ObstacleProblem, lcp: LcpConfig) -> Result<SolutionField> {
    if !(lcp.omega >= 1.0 && lcp.omega < 2.0) {
        return Err(Error::InvalidParameter {
            name: "relax_omega",
            reason: format!("must lie in [1, 2), got {}", lcp.omega),
        });
    }
    if !(lcp.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lcp_tol",
            reason: "must be positive".into(),
        });
    }
    let (v, stats) = march(problem, |sys, v, b, _, step| psor_step(sys, v, b, lcp, step))?;
    let method = SolveMethod::Lcp {
        omega: lcp.omega,
        tol: lcp.tol,
    };
    SolutionField::from_values(problem, method, stats, v)
}

/// Penalized solve on an explicit problem (used for obstacle-free checks).
pub fn solve_penalized_problem(
    problem: &ObstacleProblem,
    cfg: &PenaltyConfig,
    newton: NewtonConfig,
) -> Result<SolutionField> {
    cfg.validate()?;
    let (v, stats) = march(problem, |sys, v, b, dt, step| {
        newton_step(sys, v, b, dt, cfg, newton, step)
    })?;
    let method = SolveMethod::Penalized {
        epsilon: cfg.epsilon,
        c0: cfg.c0,
        c1: cfg.c1,
        n_eff: cfg.n_eff,
    };
    SolutionField::from_values(problem, method, stats, v)
}

/// Drives `step` from `v(0) = 0` through every level; `step` receives the
/// assembled linear system and the current iterate (initially the old level)
/// and returns (iterations, final error).
fn march<F>(problem: &ObstacleProblem, mut step: F) -> Result<(Vec<f64>, SolveStats)>
where
    F: FnMut(&StepSystem, &mut [f64], &Bounds, f64, usize) -> Result<(usize, f64)>,
{
    let grid = problem.grid;
    let nx = grid.n_x + 1;
    let mut out = vec![0.0; grid.n_nodes()];
    let mut sys = StepSystem::new(nx);
    let mut cur = vec![0.0; nx];
    let mut stats = SolveStats::default();
    for k in 0..grid.n_tau {
        for (dt, theta, tau_end) in problem.substeps(k) {
            let b = problem.bounds(tau_end);
            problem.assemble(&cur, dt, theta, &b, &mut sys);
            let (iters, err) = step(&sys, &mut cur, &b, dt, k + 1)?;
            stats.total_iterations += iters;
            stats.max_iterations = stats.max_iterations.max(iters);
            stats.max_final_error = stats.max_final_error.max(err);
        }
        out[(k + 1) * nx..(k + 2) * nx].copy_from_slice(&cur);
        stats.steps += 1;
    }
    Ok((out, stats))
}

fn newton_step(
    sys: &StepSystem,
    v: &mut [f64],
    b: &Bounds,
    dt: f64,
    cfg: &PenaltyConfig,
    newton: NewtonConfig,
    step: usize,
) -> Result<(usize, f64)> {
    let n = v.len();
    v[0] = b.left;
    v[n - 1] = b.right;
    let residual = |v: &[f64], f: &mut [f64]| -> (f64, usize) {
        let mut worst = (0.0f64, 0usize);
        f[0] = 0.0;
        f[n - 1] = 0.0;
        for j in 1..n - 1 {
            let av = sys.sub[j] * v[j - 1] + sys.diag[j] * v[j] + sys.sup[j] * v[j + 1];
            let pen = cfg.beta0(v[j] - b.lower) + cfg.beta1(v[j] - b.upper);
            f[j] = av - dt * pen - sys.rhs[j];
            if f[j].abs() > worst.0 {
                worst = (f[j].abs(), j);
            }
        }
        worst
    };
    let mut f = vec![0.0; n];
    let mut jd = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut norm = residual(v, &mut f);
    let mut iters = 0;
    while norm.0 > newton.tol {
        if iters >= newton.max_iter {
            return Err(Error::NewtonNotConverged {
                step,
                node: norm.1,
                residual: norm.0,
            });
        }
        iters += 1;
        for j in 0..n {
            jd[j] = sys.diag[j];
            if j > 0 && j < n - 1 {
                jd[j] -= dt * (cfg.dbeta0(v[j] - b.lower) + cfg.dbeta1(v[j] - b.upper));
            }
            f[j] = -f[j];
        }
        tridiag::solve_into(&sys.sub, &jd, &sys.sup, &f, &mut delta, &mut scratch);
        // full steps: with one penalty active per node the map is convex or
        // concave componentwise and Newton converges without damping
        for j in 0..n {
            v[j] += delta[j];
        }
        norm = residual(v, &mut f);
    }
    Ok((iters, norm.0))
}

fn psor_step(sys: &StepSystem, v: &mut [f64], b: &Bounds, lcp: LcpConfig, step: usize) -> Result<(usize, f64)> {
    let n = v.len();
    v[0] = b.left;
    v[n - 1] = b.right;
    for x in v[1..n - 1].iter_mut() {
        *x = x.clamp(b.lower, b.upper);
    }
    let mut sweeps = 0;
    loop {
        let mut change = (0.0f64, 0usize);
        for j in 1..n - 1 {
            let gs = (sys.rhs[j] - sys.sub[j] * v[j - 1] - sys.sup[j] * v[j + 1]) / sys.diag[j];
            let new = (v[j] + lcp.omega * (gs - v[j])).clamp(b.lower, b.upper);
            let d = (new - v[j]).abs();
            if d > change.0 {
                change = (d, j);
            }
            v[j] = new;
        }
        sweeps += 1;
        if change.0 < lcp.tol {
            return Ok((sweeps, change.0));
        }
        if sweeps >= lcp.max_sweeps {
            return Err(Error::LcpNotConverged {
                step,
                sweeps,
                node: change.1,
                change: change.0,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostSchedule, ModelParams};

    fn derived() -> DerivedSchedule {
        let p = ModelParams::reference();
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        DerivedSchedule::new(p, c).unwrap()
    }

    #[test]
    fn unconstrained_psor_equals_linear_step() {
        let d = derived();
        let grid = GridSpec::new(-3.0, 3.0, 64, 64, 10.0);
        let problem = ObstacleProblem::new(&d, grid, 3.0).unwrap().unconstrained();
        let lcp = LcpConfig {
            tol: 1e-13,
            ..LcpConfig::default()
        };
        let field = solve_lcp_problem(&problem, lcp).unwrap();
        // plain implicit marching with the Thomas solver
        let nx = problem.grid.n_x + 1;
        let mut sys = StepSystem::new(nx);
        let mut cur = vec![0.0; nx];
        for k in 0..problem.grid.n_tau {
            let (dt, theta, tau) = problem.substeps(k)[0];
            let b = problem.bounds(tau);
            problem.assemble(&cur, dt, theta, &b, &mut sys);
            let mut scratch = vec![0.0; nx];
            let mut next = vec![0.0; nx];
            tridiag::solve_into(&sys.sub, &sys.diag, &sys.sup, &sys.rhs, &mut next, &mut scratch);
            cur = next;
        }
        let last = field.row(problem.grid.n_tau);
        let diff = last.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "diff {diff}");
    }

    #[test]
    fn penalized_initial_row_is_zero_and_sandwich_holds() {
        let d = derived();
        let grid = GridSpec::new(-6.0, 6.0, 128, 64, 10.0);
        let cfg = PenaltyConfig::for_domain(&d, grid.x_min, 1e-3);
        let field = solve_penalized(&d, grid, &cfg, NewtonConfig::default()).unwrap();
        assert!(field.row(0).iter().all(|&x| x == 0.0));
        assert!(field.stats.max_obstacle_violation <= 10.0 * 1e-3);
    }

    #[test]
    fn epsilon_too_large_rejected() {
        let d = derived();
        let grid = GridSpec::new(-6.0, 6.0, 64, 64, 10.0);
        let cfg = PenaltyConfig::for_domain(&d, grid.x_min, 0.6);
        assert!(matches!(
            solve_penalized(&d, grid, &cfg, NewtonConfig::default()),
            Err(Error::InvalidParameter { name: "epsilon", .. })
        ));
    }

    #[test]
    fn omega_out_of_range_rejected() {
        let d = derived();
        let grid = GridSpec::new(-6.0, 6.0, 64, 64, 10.0);
        let lcp = LcpConfig {
            omega: 2.0,
            ..LcpConfig::default()
        };
        assert!(solve_lcp(&d, grid, 6.0, lcp).is_err());
    }
}
