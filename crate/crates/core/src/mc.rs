//! Monte Carlo layer: exact simulation of the dual state, replay of switching
//! policies, and estimators for the dual objective, the budget identity, the
//! wealth reconstruction and the post-retirement Merton stream.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{DualSolution, SwitchingPolicy};
use crate::error::{Error, Result};
use crate::model::{DerivedSchedule, Job, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub y0: f64,
    pub j0: Job,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.n_paths < 1000 {
            return bad("n_paths", "at least 1000 paths are needed for a report");
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return bad("n_paths", "antithetic sampling needs an even path count");
        }
        if self.n_steps == 0 {
            return bad("n_steps", "must be positive");
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return bad("y0", "must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Independent samples behind `stderr`: pairs under antithetic sampling.
    pub n_effective: usize,
    /// Mean of each term; the terms sum to `estimate`.
    pub breakdown: BTreeMap<String, f64>,
    pub mean_switches: f64,
}

impl McReport {
    /// `|estimate - target| / stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.estimate - target).abs() / self.stderr
    }
}

/// Lazily generated paths of `Y_t = y0 e^{beta t} Upsilon_t` on `t_k = k T / n_steps`.
#[derive(Debug, Clone)]
pub struct YEnsemble {
    cfg: McConfig,
    horizon: f64,
    dt: f64,
    drift: f64,
    vol: f64,
}

/// Sets up the ensemble; paths are drawn on demand.
pub fn simulate_y(cfg: &McConfig, params: &ModelParams) -> Result<YEnsemble> {
    cfg.validate()?;
    YEnsemble::over(cfg, params, params.horizon)
}

impl YEnsemble {
    /// Ensemble on `[0, horizon]` instead of the working life.
    pub fn over(cfg: &McConfig, params: &ModelParams, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive, got {horizon}"),
            });
        }
        let dt = horizon / cfg.n_steps as f64;
        let theta = params.theta();
        Ok(Self {
            cfg: *cfg,
            horizon,
            dt,
            drift: (params.beta - params.r - theta * theta / 2.0) * dt,
            vol: theta * dt.sqrt(),
        })
    }

    pub fn config(&self) -> &McConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.cfg.n_steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.cfg.n_steps as f64
        }
    }

    /// Standard normals of stream `s`.
    fn normals(&self, s: u64, zs: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(s);
        for z in zs.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
    }

    fn build(&self, zs: &[f64], ys: &mut [f64]) {
        let mut ln_y = self.cfg.y0.ln();
        ys[0] = self.cfg.y0;
        for (k, z) in zs.iter().enumerate() {
            ln_y += self.drift - self.vol * z;
            ys[k + 1] = ln_y.exp();
        }
    }

    /// Path `i` as `(Y_0..Y_n, Z_1..Z_n)`. Under antithetic sampling paths
    /// `2m` and `2m + 1` share stream `m` with opposite normals.
    pub fn path(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.cfg.n_steps;
        let (mut ys, mut zs) = (vec![0.0; n + 1], vec![0.0; n]);
        let (stream, sign) = if self.cfg.antithetic {
            ((i / 2) as u64, if i.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (i as u64, 1.0)
        };
        self.normals(stream, &mut zs);
        if sign < 0.0 {
            zs.iter_mut().for_each(|z| *z = -*z);
        }
        self.build(&zs, &mut ys);
        (ys, zs)
    }

    /// Applies `f` to every path in parallel and returns per-unit term vectors,
    /// in path order. A unit is one path, or the mean of an antithetic pair.
    fn run<const N: usize, F>(&self, f: F) -> Result<Vec<[f64; N]>>
    where
        F: Fn(&[f64], &[f64]) -> Result<[f64; N]> + Sync,
    {
        let n = self.cfg.n_steps;
        let units = if self.cfg.antithetic {
            self.cfg.n_paths / 2
        } else {
            self.cfg.n_paths
        };
        (0..units)
            .into_par_iter()
            .map_init(
                || (vec![0.0; n + 1], vec![0.0; n], vec![0.0; n]),
                |(ys, zs, neg), u| {
                    self.normals(u as u64, zs);
                    self.build(zs, ys);
                    let a = f(ys, zs)?;
                    if !self.cfg.antithetic {
                        return Ok(a);
                    }
                    for (m, z) in neg.iter_mut().zip(zs.iter()) {
                        *m = -z;
                    }
                    self.build(neg, ys);
                    let b = f(ys, neg)?;
                    let mut out = [0.0; N];
                    for i in 0..N {
                        out[i] = 0.5 * (a[i] + b[i]);
                    }
                    Ok(out)
                },
            )
            .collect()
    }

    fn report<const N: usize>(&self, rows: &[[f64; N]], names: [&str; N], switches: Option<usize>) -> McReport {
        let m = rows.len() as f64;
        let totals: Vec<f64> = rows.iter().map(|r| r[..N].iter().sum()).collect();
        let (mean, stderr) = mean_stderr(&totals);
        let mut breakdown = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            breakdown.insert(name.to_string(), rows.iter().map(|r| r[i]).sum::<f64>() / m);
        }
        McReport {
            estimate: mean,
            stderr,
            n_paths: self.cfg.n_paths,
            n_effective: rows.len(),
            breakdown,
            mean_switches: switches.map_or(0.0, |s| s as f64 / self.cfg.n_paths as f64),
        }
    }
}

/// Sample mean and its standard error, summed in order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[Y_t e^{-(beta - r) t}]` at each checkpoint step against `y0`.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleCheck {
    pub steps: Vec<usize>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub max_z: f64,
}

pub fn martingale_check(ens: &YEnsemble, params: &ModelParams, checkpoints: &[usize]) -> Result<MartingaleCheck> {
    let n = ens.cfg.n_steps;
    if checkpoints.iter().any(|&k| k > n) {
        return Err(Error::OutOfRange(format!("checkpoint beyond step {n}")));
    }
    let rate = params.beta - params.r;
    let cps: Vec<(usize, f64)> = checkpoints.iter().map(|&k| (k, (-rate * ens.time(k)).exp())).collect();
    // at most 16 checkpoints per call
    const M: usize = 16;
    if cps.len() > M {
        return Err(Error::InvalidParameter {
            name: "checkpoints",
            reason: format!("at most {M} checkpoints"),
        });
    }
    let rows = ens.run::<M, _>(|ys, _| {
        let mut out = [0.0; M];
        for (i, &(k, disc)) in cps.iter().enumerate() {
            out[i] = ys[k] * disc;
        }
        Ok(out)
    })?;
    let y0 = ens.cfg.y0;
    let mut rep = MartingaleCheck {
        steps: checkpoints.to_vec(),
        means: Vec::new(),
        stderrs: Vec::new(),
        max_z: 0.0,
    };
    for i in 0..cps.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let (m, s) = mean_stderr(&col);
        rep.means.push(m);
        rep.stderrs.push(s);
        // the t = 0 column is constant; summation rounding is not a deviation
        let dev = (m - y0).abs();
        let z = if dev <= 1e-9 * y0 {
            0.0
        } else if s > 0.0 {
            dev / s
        } else {
            f64::INFINITY
        };
        rep.max_z = rep.max_z.max(z);
    }
    Ok(rep)
}

/// Dual objective of `policy` started from `(y0, j0)`: running dual payoff by
/// the trapezoid rule, discounted retirement value, minus switching costs.
pub fn evaluate_dual_objective(
    ens: &YEnsemble,
    policy: &SwitchingPolicy,
    derived: &DerivedSchedule,
) -> Result<McReport> {
    check_horizon(ens, derived)?;
    let p = derived.params();
    let (pw, dt) = (p.dual_power(), ens.dt);
    let coef = [p.dual_coefficient(p.l0), p.dual_coefficient(p.l1)];
    let eps = [p.eps0, p.eps1];
    let n = ens.cfg.n_steps;
    let times: Vec<f64> = (0..=n).map(|k| ens.time(k)).collect();
    let disc: Vec<f64> = times.iter().map(|t| (-p.beta * t).exp()).collect();
    let table = policy.tabulate(&times);
    let start = policy.start(ens.cfg.y0, ens.cfg.j0);
    let switches = AtomicUsize::new(0);
    let rows = ens.run::<3, _>(|ys, _| {
        let mut eta = start.eta;
        let mut count = start.events.len();
        let mut cost = start.events.iter().map(|e| -e.y * e.cost).sum::<f64>();
        let mut running = 0.0;
        let mut yp0 = ys[0].powf(pw);
        for k in 0..n {
            let (y0, y1) = (ys[k], ys[k + 1]);
            let yp1 = y1.powf(pw);
            let i = eta.index();
            let f0 = disc[k] * (coef[i] * yp0 + eps[i] * y0);
            let f1 = disc[k + 1] * (coef[i] * yp1 + eps[i] * y1);
            running += 0.5 * dt * (f0 + f1);
            if let Some((to, phi)) = table.fire(k + 1, eta, y1) {
                eta = to;
                count += 1;
                cost -= disc[k + 1] * y1 * phi;
            }
            yp0 = yp1;
        }
        let terminal = disc[n] * p.merton_jr(ys[n])?;
        switches.fetch_add(count, Ordering::Relaxed);
        Ok([running, terminal, cost])
    })?;
    Ok(ens.report(&rows, ["running", "terminal", "switching"], Some(switches.into_inner())))
}

/// Budget spent by the dual-optimal plan from `(y0, j0)`:
/// `E[int Upsilon (c - income) dt + Upsilon_T (-J_R'(Y_T)) + sum Upsilon phi]`
/// with consumption, including the post-retirement stream, scaled by `scale`.
pub fn evaluate_budget(
    ens: &YEnsemble,
    policy: &SwitchingPolicy,
    derived: &DerivedSchedule,
    scale: f64,
) -> Result<McReport> {
    check_horizon(ens, derived)?;
    let p = derived.params();
    let (dt, g1) = (ens.dt, p.gamma1());
    let lc = [p.l0, p.l1].map(|l| scale * l.powf(p.leisure_exponent()));
    let eps = [p.eps0, p.eps1];
    let n = ens.cfg.n_steps;
    let y0 = ens.cfg.y0;
    let times: Vec<f64> = (0..=n).map(|k| ens.time(k)).collect();
    let disc: Vec<f64> = times.iter().map(|t| (-p.beta * t).exp() / y0).collect();
    let table = policy.tabulate(&times);
    let start = policy.start(y0, ens.cfg.j0);
    let switches = AtomicUsize::new(0);
    let rows = ens.run::<4, _>(|ys, _| {
        let mut eta = start.eta;
        let mut count = start.events.len();
        let mut cost: f64 = start.events.iter().map(|e| e.cost).sum();
        let (mut consumption, mut income) = (0.0, 0.0);
        // Upsilon and Upsilon * y^{-1/gamma1} at the left node
        let mut u0 = disc[0] * ys[0];
        let mut uc0 = u0 * ys[0].powf(-1.0 / g1);
        for k in 0..n {
            let y1 = ys[k + 1];
            let u1 = disc[k + 1] * y1;
            let uc1 = u1 * y1.powf(-1.0 / g1);
            let i = eta.index();
            consumption += 0.5 * dt * lc[i] * (uc0 + uc1);
            income -= 0.5 * dt * eps[i] * (u0 + u1);
            if let Some((to, phi)) = table.fire(k + 1, eta, y1) {
                eta = to;
                count += 1;
                cost += u1 * phi;
            }
            (u0, uc0) = (u1, uc1);
        }
        let retirement = u0 * scale * (-p.merton_jr_prime(ys[n]));
        switches.fetch_add(count, Ordering::Relaxed);
        Ok([consumption, income, retirement, cost])
    })?;
    Ok(ens.report(
        &rows,
        ["consumption", "income", "retirement", "switching"],
        Some(switches.into_inner()),
    ))
}

fn check_horizon(ens: &YEnsemble, derived: &DerivedSchedule) -> Result<()> {
    let horizon = derived.horizon();
    if (ens.horizon - horizon).abs() > 1e-12 * horizon {
        return Err(Error::Inconsistent(format!(
            "ensemble horizon {} differs from working life {horizon}",
            ens.horizon
        )));
    }
    Ok(())
}

/// Comparison of the dual-side wealth `-d_y P_eta(t, Y_t)` with wealth
/// integrated forward from the budget dynamics under the same noise.
#[derive(Debug, Clone, Serialize)]
pub struct WealthTrace {
    pub n_steps: usize,
    pub paths_used: usize,
    /// Paths that left the grid and were dropped.
    pub paths_excluded: usize,
    /// Mean over paths of the largest `|W_dyn - W_dual|`.
    pub mean_max_discrepancy: f64,
    /// Mean over paths of `|W_dyn(T) - W_dual(T)|`.
    pub mean_terminal_discrepancy: f64,
    /// `|W_dual(0) - w|`.
    pub initial_error: f64,
    pub events: usize,
    /// Largest `|(W_dual before - W_dual after) - phi|` over events.
    pub max_jump_error: f64,
    /// Count of time steps at which `W_dyn` fell below the time-`t` floor.
    pub floor_breaches: usize,
}

/// Integrates the wealth equation along the dual paths started at `y* = y0`
/// with initial wealth `w`.
pub fn simulate_wealth(ens: &YEnsemble, sol: &DualSolution, policy: &SwitchingPolicy, w: f64) -> Result<WealthTrace> {
    let derived = sol.derived();
    check_horizon(ens, derived)?;
    let p = derived.params();
    let n = ens.cfg.n_steps;
    let dt = ens.dt;
    let sdt = dt.sqrt();
    let y0 = ens.cfg.y0;
    let start = policy.start(y0, ens.cfg.j0);
    let initial_error =
        (sol.optimal_controls(0.0, y0, start.eta)?.wealth + start.events.iter().map(|e| e.cost).sum::<f64>() - w).abs();
    // terms: used, max discrepancy, terminal discrepancy, events, max jump error, breaches
    let rows: Vec<[f64; 6]> = (0..ens.cfg.n_paths)
        .into_par_iter()
        .map(|i| -> Result<[f64; 6]> {
            let (ys, zs) = ens.path(i);
            let mut state = policy.start(y0, ens.cfg.j0);
            let mut w_dyn = w - state.events.iter().map(|e| e.cost).sum::<f64>();
            let (mut worst, mut jump_err, mut breaches) = (0.0f64, 0.0f64, 0usize);
            for k in 0..n {
                let t = ens.time(k);
                let Ok(ctrl) = sol.optimal_controls(t, ys[k], state.eta) else {
                    return Ok([0.0; 6]);
                };
                worst = worst.max((w_dyn - ctrl.wealth).abs());
                let eta = state.eta;
                let drift = p.r * w_dyn + ctrl.investment * (p.mu - p.r) - ctrl.consumption + p.income(eta);
                w_dyn += drift * dt + ctrl.investment * p.sigma * sdt * zs[k];
                let t1 = ens.time(k + 1);
                if let Some(ev) = policy.step(&mut state, t1, ys[k + 1])? {
                    let before = sol.optimal_controls(t1, ys[k + 1], ev.from);
                    let after = sol.optimal_controls(t1, ys[k + 1], ev.to);
                    if let (Ok(b), Ok(a)) = (before, after) {
                        jump_err = jump_err.max((b.wealth - a.wealth - ev.cost).abs());
                    }
                    w_dyn -= ev.cost;
                }
                if t1 < ens.horizon && w_dyn < derived.wealth_floor_at(state.eta, t1) {
                    breaches += 1;
                }
            }
            let Ok(end) = sol.optimal_controls(ens.horizon, ys[n], state.eta) else {
                return Ok([0.0; 6]);
            };
            let terminal = (w_dyn - end.wealth).abs();
            worst = worst.max(terminal);
            Ok([
                1.0,
                worst,
                terminal,
                state.events.len() as f64,
                jump_err,
                breaches as f64,
            ])
        })
        .collect::<Result<_>>()?;
    let used = rows.iter().filter(|r| r[0] > 0.0).count();
    let denom = used.max(1) as f64;
    Ok(WealthTrace {
        n_steps: n,
        paths_used: used,
        paths_excluded: rows.len() - used,
        mean_max_discrepancy: rows.iter().map(|r| r[1]).sum::<f64>() / denom,
        mean_terminal_discrepancy: rows.iter().map(|r| r[2]).sum::<f64>() / denom,
        initial_error,
        events: rows.iter().map(|r| r[3] as usize).sum(),
        max_jump_error: rows.iter().map(|r| r[4]).fold(0.0, f64::max),
        floor_breaches: rows.iter().map(|r| r[5] as usize).sum(),
    })
}

/// Post-retirement check: the discounted stream `e^{-beta s} (u(c*, lbar) - Y c*)`
/// along optimal Merton consumption, integrated up to `40 / K1`, against `J_R(y0)`.
pub fn merton_stream(params: &ModelParams, y0: f64, n_paths: usize, dt: f64, seed: u64) -> Result<McReport> {
    let k1 = params.k1();
    if !(k1 > 0.0) {
        return Err(Error::AssumptionViolated(format!("K1 = {k1} is not positive")));
    }
    let horizon = 40.0 / k1;
    let n_steps = (horizon / dt).ceil() as usize;
    let cfg = McConfig {
        n_paths,
        n_steps,
        seed,
        antithetic: true,
        y0,
        j0: Job::High,
    };
    cfg.validate()?;
    let ens = YEnsemble::over(&cfg, params, horizon)?;
    let (beta, h) = (params.beta, ens.dt);
    let f = |t: f64, y: f64| {
        let c = params.consumption(params.lbar, y);
        (-beta * t).exp() * (params.utility(c, params.lbar) - y * c)
    };
    let rows = ens.run::<1, _>(|ys, _| {
        let mut acc = 0.0;
        for k in 0..n_steps {
            acc += 0.5 * h * (f(ens.time(k), ys[k]) + f(ens.time(k + 1), ys[k + 1]));
        }
        Ok([acc])
    })?;
    Ok(ens.report(&rows, ["utility"], None))
}
