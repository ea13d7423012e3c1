//! Recovery of the two dual value functions from a solved difference field.
//!
//! Everything is carried in the normalised form `p_i = P_i / y` on the same
//! `(tau, x)` grid as `v = Q / y`. In these variables the operator acting on
//! `P_i` becomes exactly the operator of the difference problem, so the two
//! linear solves below use the same stencil and the same time weights as the
//! residual stored in the field. Their difference then reproduces `v` up to
//! rounding.

use serde::Serialize;

use crate::dual::interp::{isotonic_decreasing, Pchip};
use crate::error::{Error, Result};
use crate::model::{DerivedSchedule, Job};
use crate::obstacle::{tridiag, GridSpec, ObstacleProblem, Scheme, SolutionField};

#[derive(Debug, Clone)]
pub struct DualSolution {
    derived: DerivedSchedule,
    field: SolutionField,
    stencil: (f64, f64, f64),
    /// `P_i / y`, row-major in `tau`.
    p: [Vec<f64>; 2],
    /// Positive and negative parts of the field residual, `R / y`.
    r_plus: Vec<f64>,
    r_minus: Vec<f64>,
    /// `J(j, .)` at `t = 0` in `x`.
    j0: [Pchip; 2],
    /// `-d_y J(j, .)` at the `t = 0` nodes, raw and after isotonic smoothing.
    wealth_raw: [Vec<f64>; 2],
    wealth: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConsistencyReport {
    /// `max |P0 - P1 - Q|` over the grid.
    pub max_abs: f64,
    /// `max |Q|` over the grid.
    pub q_norm: f64,
    /// Largest relative deviation of the terminal slices from `J_R`.
    pub terminal_rel: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViReport {
    pub tol: f64,
    /// Largest `d_t P_i + L P_i + u_i + eps_i y` (divided by `y`) over all nodes.
    pub max_generator: [f64; 2],
    /// Largest `|generator|` where the switching obstacle is slack by more than `tol`.
    pub max_slack_equality: [f64; 2],
    /// Largest `P_other - P_i - phi_i y` (divided by `y`).
    pub max_obstacle: [f64; 2],
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvexityScan {
    pub triples: usize,
    pub violations: [usize; 2],
    /// Largest excess of the midpoint over the chord.
    pub worst_excess: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WealthInversion {
    pub job: Job,
    pub wealth: f64,
    pub y_star: f64,
    /// `J(j, y*) + y* w`.
    pub value: f64,
    /// Largest deviation of the raw derivative from its monotone envelope.
    pub envelope_adjustment: f64,
}

/// Recovers `P0` and `P1` from `field`, which must have been solved for `derived`.
pub fn recover_p(field: &SolutionField, derived: &DerivedSchedule) -> Result<DualSolution> {
    let g = field.grid;
    let p = derived.params();
    let problem = ObstacleProblem::new(derived, g, -g.x_min)?;
    let stencil = problem.stencil();
    let nx = g.n_x + 1;
    let xs = g.xs();

    let mut r_plus = vec![0.0; g.n_nodes()];
    let mut r_minus = vec![0.0; g.n_nodes()];
    for k in 1..=g.n_tau {
        for j in 1..g.n_x {
            let r = field.residual(k, j);
            r_plus[k * nx + j] = r.max(0.0);
            r_minus[k * nx + j] = (-r).max(0.0);
        }
    }
    let sources: [Vec<f64>; 2] = [Job::High, Job::Low].map(|job| running_source(derived, job, &xs));

    let mut out = [vec![0.0; g.n_nodes()], vec![0.0; g.n_nodes()]];
    for (j, &x) in xs.iter().enumerate() {
        let y = x.exp();
        let jr = p.merton_jr(y)? / y;
        out[0][j] = jr;
        out[1][j] = jr;
    }
    let mut sub = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut sup = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut scratch = vec![0.0; nx];
    let mut sol = vec![0.0; nx];
    let (lo, mid, hi) = stencil;
    let (y_lo, y_hi) = (g.x_min.exp(), g.x_max.exp());
    for k in 0..g.n_tau {
        let theta = step_theta(g, k);
        let dt = g.tau(k + 1) - g.tau(k);
        let tau = g.tau(k + 1);
        let left1 = p.no_switch_value(Job::Low, tau, y_lo) / y_lo;
        let right0 = p.no_switch_value(Job::High, tau, y_hi) / y_hi;
        let left = [left1 + field.v(k + 1, 0), left1];
        let right = [right0, right0 - field.v(k + 1, g.n_x)];
        for i in 0..2 {
            let r = if i == 0 { &r_plus } else { &r_minus };
            let (old, new) = out[i].split_at_mut((k + 1) * nx);
            let old = &old[k * nx..];
            for j in 1..g.n_x {
                let l_old = lo * old[j - 1] + mid * old[j] + hi * old[j + 1];
                sub[j] = -theta * dt * lo;
                diag[j] = 1.0 - theta * dt * mid;
                sup[j] = -theta * dt * hi;
                rhs[j] = old[j] + (1.0 - theta) * dt * l_old + dt * (sources[i][j] + r[(k + 1) * nx + j]);
            }
            sub[0] = 0.0;
            diag[0] = 1.0;
            sup[0] = 0.0;
            rhs[0] = left[i];
            sub[g.n_x] = 0.0;
            diag[g.n_x] = 1.0;
            sup[g.n_x] = 0.0;
            rhs[g.n_x] = right[i];
            tridiag::solve_into(&sub, &diag, &sup, &rhs, &mut sol, &mut scratch);
            new[..nx].copy_from_slice(&sol);
        }
    }

    let last = g.n_tau * nx;
    let j0 = [0, 1].map(|i| {
        let ys: Vec<f64> = (0..nx).map(|j| out[i][last + j] * xs[j].exp()).collect();
        Pchip::new(g.x_min, g.dx(), ys)
    });
    let wealth_raw = [0, 1].map(|i| {
        let row: Vec<f64> = (0..nx).map(|j| out[i][last + j] * xs[j].exp()).collect();
        (0..nx)
            .map(|j| -xderiv(&row, j, g.dx()) / xs[j].exp())
            .collect::<Vec<f64>>()
    });
    let wealth = [isotonic_decreasing(&wealth_raw[0]), isotonic_decreasing(&wealth_raw[1])];

    let sol = DualSolution {
        derived: derived.clone(),
        field: field.clone(),
        stencil,
        p: out,
        r_plus,
        r_minus,
        j0,
        wealth_raw,
        wealth,
    };
    let rep = sol.consistency();
    let tol = 1e-8 * rep.q_norm.max(1.0);
    if !(rep.max_abs <= tol) {
        return Err(Error::Inconsistent(format!(
            "recovered P0 - P1 misses Q by {:e} (tolerance {:e})",
            rep.max_abs, tol
        )));
    }
    Ok(sol)
}

/// `(u_i(y) + eps_i y) / y` at `y = e^x`.
fn running_source(derived: &DerivedSchedule, job: Job, xs: &[f64]) -> Vec<f64> {
    let p = derived.params();
    xs.iter()
        .map(|&x| p.dual_utility(p.leisure(job), x.exp()) / x.exp() + p.income(job))
        .collect()
}

/// Implicit weight of step `k`; the start-up of Crank-Nicolson is one implicit step,
/// matching the residual stored in the field.
fn step_theta(g: GridSpec, k: usize) -> f64 {
    match g.scheme {
        Scheme::CrankNicolson if k > 0 => 0.5,
        _ => 1.0,
    }
}

/// Centred first difference, one-sided at the two ends.
fn xderiv(row: &[f64], j: usize, dx: f64) -> f64 {
    let n = row.len() - 1;
    if j == 0 {
        (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dx)
    } else if j == n {
        (3.0 * row[n] - 4.0 * row[n - 1] + row[n - 2]) / (2.0 * dx)
    } else {
        (row[j + 1] - row[j - 1]) / (2.0 * dx)
    }
}

impl DualSolution {
    pub fn grid(&self) -> GridSpec {
        self.field.grid
    }

    pub fn field(&self) -> &SolutionField {
        &self.field
    }

    pub fn derived(&self) -> &DerivedSchedule {
        &self.derived
    }

    fn idx(&self, k: usize, j: usize) -> usize {
        k * (self.field.grid.n_x + 1) + j
    }

    /// `P_job` at time level `k` (`tau = tau_k`) and node `j`.
    pub fn p(&self, job: Job, k: usize, j: usize) -> f64 {
        self.p[job.index()][self.idx(k, j)] * self.field.grid.x(j).exp()
    }

    /// `P_job / y` at a node.
    pub fn p_scaled(&self, job: Job, k: usize, j: usize) -> f64 {
        self.p[job.index()][self.idx(k, j)]
    }

    /// `Q = y v` at a node.
    pub fn q(&self, k: usize, j: usize) -> f64 {
        self.field.v(k, j) * self.field.grid.x(j).exp()
    }

    /// `(R+, R-)` of `R = -d_t Q - L Q - U` at a node, in original units.
    pub fn source_split(&self, k: usize, j: usize) -> (f64, f64) {
        let y = self.field.grid.x(j).exp();
        let i = self.idx(k, j);
        (self.r_plus[i] * y, self.r_minus[i] * y)
    }

    pub fn consistency(&self) -> ConsistencyReport {
        let g = self.field.grid;
        let mut max_abs: f64 = 0.0;
        let mut q_norm: f64 = 0.0;
        for k in 0..=g.n_tau {
            for j in 0..=g.n_x {
                let q = self.q(k, j);
                q_norm = q_norm.max(q.abs());
                max_abs = max_abs.max((self.p(Job::High, k, j) - self.p(Job::Low, k, j) - q).abs());
            }
        }
        let p = self.derived.params();
        let mut terminal_rel: f64 = 0.0;
        for j in 0..=g.n_x {
            let jr = p.merton_jr(g.x(j).exp()).unwrap_or(f64::NAN);
            for job in [Job::High, Job::Low] {
                terminal_rel = terminal_rel.max(((self.p(job, 0, j) - jr) / jr).abs());
            }
        }
        ConsistencyReport {
            max_abs,
            q_norm,
            terminal_rel,
        }
    }

    /// Sign checks of the variational inequalities for `P0` and `P1`, in the
    /// `y`-normalised form and recomputed from the recovered values.
    pub fn vi_check(&self, tol: f64) -> ViReport {
        let g = self.field.grid;
        let nx = g.n_x + 1;
        let xs = g.xs();
        let sources = [Job::High, Job::Low].map(|job| running_source(&self.derived, job, &xs));
        let (lo, mid, hi) = self.stencil;
        let mut rep = ViReport {
            tol,
            max_generator: [f64::NEG_INFINITY; 2],
            max_slack_equality: [0.0; 2],
            max_obstacle: [f64::NEG_INFINITY; 2],
            passed: false,
        };
        for k in 0..g.n_tau {
            let theta = step_theta(g, k);
            let dt = g.tau(k + 1) - g.tau(k);
            let tau = g.tau(k + 1);
            let phi = [self.derived.psi(0, tau), self.derived.psi(1, tau)];
            for j in 1..g.n_x {
                for i in 0..2 {
                    let pi = &self.p[i];
                    let old = &pi[k * nx..(k + 1) * nx];
                    let new = &pi[(k + 1) * nx..(k + 2) * nx];
                    let l = |r: &[f64]| lo * r[j - 1] + mid * r[j] + hi * r[j + 1];
                    let generator = -((new[j] - old[j]) / dt - theta * l(new) - (1.0 - theta) * l(old) - sources[i][j]);
                    let other = self.p[1 - i][(k + 1) * nx + j];
                    let obstacle = other - new[j] - phi[i];
                    rep.max_generator[i] = rep.max_generator[i].max(generator);
                    rep.max_obstacle[i] = rep.max_obstacle[i].max(obstacle);
                    if obstacle < -tol {
                        rep.max_slack_equality[i] = rep.max_slack_equality[i].max(generator.abs());
                    }
                }
            }
        }
        rep.passed = (0..2)
            .all(|i| rep.max_generator[i] <= tol && rep.max_slack_equality[i] <= tol && rep.max_obstacle[i] <= tol);
        rep
    }

    /// Midpoint-versus-chord convexity scan of `J(j, .)` in `y` along the `t = 0` nodes.
    pub fn convexity_scan(&self, tol: f64) -> ConvexityScan {
        let g = self.field.grid;
        let k = g.n_tau;
        let mut scan = ConvexityScan {
            triples: g.n_x - 1,
            violations: [0; 2],
            worst_excess: [f64::NEG_INFINITY; 2],
        };
        for j in 1..g.n_x {
            let (ya, yb, yc) = (g.x(j - 1).exp(), g.x(j).exp(), g.x(j + 1).exp());
            let w = (yc - yb) / (yc - ya);
            for job in [Job::High, Job::Low] {
                let i = job.index();
                let chord = w * self.p(job, k, j - 1) + (1.0 - w) * self.p(job, k, j + 1);
                let excess = self.p(job, k, j) - chord;
                scan.worst_excess[i] = scan.worst_excess[i].max(excess);
                if excess > tol {
                    scan.violations[i] += 1;
                }
            }
        }
        scan
    }

    /// Range `(y_min, y_max)` of the grid in dual price.
    pub fn y_range(&self) -> (f64, f64) {
        let g = self.field.grid;
        (g.x_min.exp(), g.x_max.exp())
    }

    /// `J(j, y) = P_j(0, y)`, interpolated monotonically in `ln y`.
    pub fn dual_value_j(&self, job: Job, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::OutOfRange(format!("dual price must be positive, got {y}")));
        }
        self.j0[job.index()].eval(y.ln()).ok_or_else(|| {
            let (a, b) = self.y_range();
            Error::OutOfRange(format!("y = {y} outside the grid range [{a}, {b}]"))
        })
    }

    /// `-d_y J(j, .)` at the `t = 0` nodes before smoothing.
    pub fn wealth_nodes(&self, job: Job) -> &[f64] {
        &self.wealth_raw[job.index()]
    }

    /// `-d_y J(j, .)` at the `t = 0` nodes after isotonic smoothing; the
    /// curve inverted by [`DualSolution::invert_wealth`].
    pub fn wealth_envelope(&self, job: Job) -> &[f64] {
        &self.wealth[job.index()]
    }

    /// Range of wealth representable on the grid for `job`, `(low, high)`.
    pub fn wealth_range(&self, job: Job) -> (f64, f64) {
        let w = &self.wealth[job.index()];
        (w[w.len() - 1], w[0])
    }

    /// Solves `w = -d_y J(j, y*)` by bisection on the monotone envelope of the
    /// centred derivative.
    pub fn invert_wealth(&self, job: Job, w: f64) -> Result<WealthInversion> {
        let floor = self.derived.wealth_floor(job);
        if !(w > floor) {
            return Err(Error::OutOfRange(format!("wealth {w} is not above the floor {floor}")));
        }
        let (lo, hi) = self.wealth_range(job);
        if !(w >= lo && w <= hi) {
            return Err(Error::OutOfRange(format!(
                "wealth {w} outside the grid-implied range [{lo}, {hi}]"
            )));
        }
        let g = self.field.grid;
        let env = &self.wealth[job.index()];
        let at = |x: f64| {
            let j = g.locate(x);
            let s = (x - g.x(j)) / g.dx();
            (1.0 - s) * env[j] + s * env[j + 1]
        };
        let (mut a, mut b) = (g.x_min, g.x_max);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if at(m) > w {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-14 * (1.0 + a.abs()) {
                break;
            }
        }
        let x = 0.5 * (a + b);
        let y_star = x.exp();
        let value = self.dual_value_j(job, y_star)? + y_star * w;
        let envelope_adjustment = self.wealth_raw[job.index()]
            .iter()
            .zip(env)
            .fold(0.0, |m: f64, (r, e)| m.max((r - e).abs()));
        Ok(WealthInversion {
            job,
            wealth: w,
            y_star,
            value,
            envelope_adjustment,
        })
    }

    /// `min over grid nodes of J(j, y) + y w`, the direct primal value oracle.
    pub fn grid_dual_min(&self, job: Job, w: f64) -> f64 {
        let g = self.field.grid;
        (0..=g.n_x)
            .map(|j| self.p(job, g.n_tau, j) + g.x(j).exp() * w)
            .fold(f64::INFINITY, f64::min)
    }
}
