//! Optimal controls from the recovered value functions and the hitting-time
//! job-switching rule.

use serde::Serialize;

use crate::dual::recover::DualSolution;
use crate::error::{Error, Result};
use crate::free_boundary::{OriginalBoundary, Side};
use crate::model::{DerivedSchedule, Job};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quality {
    /// Closed-form Merton rule after retirement.
    PostRetirement,
    Centred,
    /// A centred stencil would straddle a free boundary; one-sided stencils were used.
    OneSided,
    /// The region around the node is too thin for a one-sided stencil.
    Rough,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Controls {
    pub consumption: f64,
    /// Amount invested in the risky asset.
    pub investment: f64,
    pub wealth: f64,
    pub quality: Quality,
}

impl DualSolution {
    /// Consumption, investment and wealth at calendar time `t`, dual price `y`,
    /// current job `job`.
    pub fn optimal_controls(&self, t: f64, y: f64, job: Job) -> Result<Controls> {
        let d = self.derived();
        let p = d.params();
        if !(y > 0.0) {
            return Err(Error::OutOfRange(format!("dual price must be positive, got {y}")));
        }
        if t >= p.horizon {
            let wealth = -p.merton_jr_prime(y);
            return Ok(Controls {
                consumption: p.consumption(p.lbar, y),
                investment: p.theta() / (p.sigma * p.gamma1()) * wealth,
                wealth,
                quality: Quality::PostRetirement,
            });
        }
        if t < 0.0 {
            return Err(Error::OutOfRange(format!("time {t} is negative")));
        }
        let g = self.grid();
        let x = y.ln();
        if !(x >= g.x_min && x <= g.x_max) {
            return Err(Error::OutOfRange(format!("y = {y} outside the grid")));
        }
        let tau = p.horizon - t;
        let k = ((tau / g.dtau()).floor() as usize).min(g.n_tau - 1);
        let wk = ((tau - g.tau(k)) / g.dtau()).clamp(0.0, 1.0);
        let j = g.locate(x);
        let wj = ((x - g.x(j)) / g.dx()).clamp(0.0, 1.0);
        let scale = p.theta() / p.sigma;
        let mut wealth = 0.0;
        let mut investment = 0.0;
        let mut quality = Quality::Centred;
        for (kk, a) in [(k, 1.0 - wk), (k + 1, wk)] {
            for (jj, b) in [(j, 1.0 - wj), (j + 1, wj)] {
                let (px, pxx, q) = self.node_derivatives(job, kk, jj);
                let e = (-g.x(jj)).exp();
                wealth += a * b * (-e * px);
                investment += a * b * scale * e * (pxx - px);
                if a * b > 0.0 {
                    quality = quality.max(q);
                }
            }
        }
        Ok(Controls {
            consumption: p.consumption(p.leisure(job), y),
            investment,
            wealth,
            quality,
        })
    }

    /// `(d_x P, d_xx P)` at a node, with stencils kept inside the node's own
    /// region (contact or continuation for the obstacle that constrains `job`).
    fn node_derivatives(&self, job: Job, k: usize, j: usize) -> (f64, f64, Quality) {
        let g = self.grid();
        let f = self.field();
        let region = |jj: usize| match job {
            Job::High => f.contact_lower(k, jj),
            Job::Low => f.contact_upper(k, jj),
        };
        let pv = |jj: usize| self.p(job, k, jj);
        let (h, n) = (g.dx(), g.n_x);
        let r = region(j);
        let same = |a: usize, b: usize| (a..=b).all(|jj| region(jj) == r);
        let centred = || {
            (
                (pv(j + 1) - pv(j - 1)) / (2.0 * h),
                (pv(j + 1) - 2.0 * pv(j) + pv(j - 1)) / (h * h),
            )
        };
        let forward = || {
            (
                (-3.0 * pv(j) + 4.0 * pv(j + 1) - pv(j + 2)) / (2.0 * h),
                (pv(j) - 2.0 * pv(j + 1) + pv(j + 2)) / (h * h),
            )
        };
        let backward = || {
            (
                (3.0 * pv(j) - 4.0 * pv(j - 1) + pv(j - 2)) / (2.0 * h),
                (pv(j) - 2.0 * pv(j - 1) + pv(j - 2)) / (h * h),
            )
        };
        if j >= 1 && j < n && same(j - 1, j + 1) {
            let (a, b) = centred();
            return (a, b, Quality::Centred);
        }
        if j + 2 <= n && same(j, j + 2) {
            let (a, b) = forward();
            return (a, b, Quality::OneSided);
        }
        if j >= 2 && same(j - 2, j) {
            let (a, b) = backward();
            return (a, b, Quality::OneSided);
        }
        let (a, b) = if j == 0 {
            forward()
        } else if j == n {
            backward()
        } else {
            centred()
        };
        (a, b, Quality::Rough)
    }
}

/// One job change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub y: f64,
    pub from: Job,
    pub to: Job,
    /// Wealth cost `phi_from(t)` charged at the event.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyState {
    pub t: f64,
    pub y: f64,
    pub eta: Job,
    pub events: Vec<SwitchEvent>,
}

/// Hitting-time rule: leave the high-income job when `y <= S0(t)`, leave the
/// low-income job when `y >= S1(t)` and `t < t1`. A boundary that is not
/// defined at `t` never triggers.
#[derive(Debug, Clone)]
pub struct SwitchingPolicy {
    derived: DerivedSchedule,
    lower: Option<OriginalBoundary>,
    upper: Option<OriginalBoundary>,
}

impl SwitchingPolicy {
    pub fn new(
        derived: &DerivedSchedule,
        lower: Option<OriginalBoundary>,
        upper: Option<OriginalBoundary>,
    ) -> Result<Self> {
        for (b, side) in [(&lower, Side::Lower), (&upper, Side::Upper)] {
            if let Some(b) = b {
                if b.side != side {
                    return Err(Error::Inconsistent(format!(
                        "boundary for {side:?} has side {:?}",
                        b.side
                    )));
                }
            }
        }
        Ok(Self {
            derived: derived.clone(),
            lower,
            upper,
        })
    }

    /// The rule that never changes job.
    pub fn never(derived: &DerivedSchedule) -> Self {
        Self {
            derived: derived.clone(),
            lower: None,
            upper: None,
        }
    }

    pub fn lower(&self) -> Option<&OriginalBoundary> {
        self.lower.as_ref()
    }

    pub fn upper(&self) -> Option<&OriginalBoundary> {
        self.upper.as_ref()
    }

    /// The same rule with `S0` multiplied by `factor`.
    pub fn with_lower_scaled(&self, factor: f64) -> Self {
        Self {
            lower: self.lower.as_ref().map(|b| b.scaled(factor)),
            ..self.clone()
        }
    }

    /// Switching threshold for leaving `job` at `t`, if the rule is live there.
    pub fn threshold(&self, job: Job, t: f64) -> Option<f64> {
        if t >= self.derived.horizon() {
            return None;
        }
        match job {
            Job::High => self.lower.as_ref()?.at(t),
            Job::Low if t < self.derived.t1() => self.upper.as_ref()?.at(t),
            Job::Low => None,
        }
    }

    /// Target job if the rule fires at `(t, y)` in `job`.
    pub fn target(&self, job: Job, t: f64, y: f64) -> Option<Job> {
        let s = self.threshold(job, t)?;
        let fire = match job {
            Job::High => y <= s,
            Job::Low => y >= s,
        };
        fire.then_some(job.other())
    }

    /// Thresholds and costs at fixed times, for replaying many paths on one grid.
    pub fn tabulate(&self, times: &[f64]) -> PolicyTable {
        let costs = self.derived.costs();
        let row = |job: Job| -> Vec<f64> {
            times
                .iter()
                .map(|&t| self.threshold(job, t).unwrap_or(f64::NAN))
                .collect()
        };
        PolicyTable {
            threshold: [row(Job::High), row(Job::Low)],
            cost: [
                times.iter().map(|&t| costs.phi0(t)).collect(),
                times.iter().map(|&t| costs.phi1(t)).collect(),
            ],
        }
    }

    /// Initial state at `t = 0`, switching immediately if `(0, y0)` lies in
    /// the switching region of `j0`.
    pub fn start(&self, y0: f64, j0: Job) -> PolicyState {
        let mut state = PolicyState {
            t: 0.0,
            y: y0,
            eta: j0,
            events: Vec::new(),
        };
        self.apply(&mut state);
        state
    }

    /// Moves the state to `(t_next, y_next)` and applies the rule there.
    /// Returns the event, if any.
    pub fn step(&self, state: &mut PolicyState, t_next: f64, y_next: f64) -> Result<Option<SwitchEvent>> {
        let horizon = self.derived.horizon();
        if !(t_next > state.t) || t_next > horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "policy step from t = {} to {t_next} outside (t, T]",
                state.t
            )));
        }
        state.t = t_next;
        state.y = y_next;
        Ok(self.apply(state))
    }

    fn apply(&self, state: &mut PolicyState) -> Option<SwitchEvent> {
        let to = self.target(state.eta, state.t, state.y)?;
        let costs = self.derived.costs();
        let cost = match state.eta {
            Job::High => costs.phi0(state.t),
            Job::Low => costs.phi1(state.t),
        };
        let ev = SwitchEvent {
            t: state.t,
            y: state.y,
            from: state.eta,
            to,
            cost,
        };
        state.eta = to;
        state.events.push(ev);
        Some(ev)
    }
}

/// [`SwitchingPolicy`] evaluated on a fixed time grid. Undefined thresholds
/// are stored as NaN and never fire.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    threshold: [Vec<f64>; 2],
    cost: [Vec<f64>; 2],
}

impl PolicyTable {
    /// `(new job, cost)` if the rule fires at time index `k` with dual price `y`.
    #[inline]
    pub fn fire(&self, k: usize, job: Job, y: f64) -> Option<(Job, f64)> {
        let i = job.index();
        let s = self.threshold[i][k];
        let hit = match job {
            Job::High => y <= s,
            Job::Low => y >= s,
        };
        hit.then(|| (job.other(), self.cost[i][k]))
    }
}
