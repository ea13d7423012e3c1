//! Choice of the truncated spatial domain from a coarse pre-pass.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_boundary::{extract_chi, Side};
use crate::model::DerivedSchedule;
use crate::obstacle::{solve_penalized, GridSpec, NewtonConfig, PenaltyConfig};

#[derive(Debug, Clone, Copy)]
pub struct DomainOptions {
    pub prepass_nx: usize,
    pub prepass_ntau: usize,
    pub epsilon: f64,
    /// Padding on each side as a fraction of the boundary span.
    pub pad: f64,
    /// Levels with `tau < edge_fraction * T` (after `tau1` for the upper
    /// boundary) are ignored when measuring the span.
    pub edge_fraction: f64,
    pub max_widenings: usize,
}

impl Default for DomainOptions {
    fn default() -> Self {
        Self {
            prepass_nx: 256,
            prepass_ntau: 128,
            epsilon: 1e-3,
            pad: 0.25,
            edge_fraction: 0.05,
            max_widenings: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainChoice {
    pub x_min: f64,
    pub x_max: f64,
    /// Leftmost lower boundary location on the measured levels.
    pub chi0_min: f64,
    /// Rightmost upper boundary location on the measured levels.
    pub chi1_max: f64,
    pub prepass: (f64, f64),
    pub widenings: usize,
}

impl DomainChoice {
    pub fn grid(&self, n_x: usize, n_tau: usize, horizon: f64) -> GridSpec {
        GridSpec::new(self.x_min, self.x_max, n_x, n_tau, horizon)
    }

    /// The domain extended by `extra` on both sides.
    pub fn extended(&self, extra: f64) -> (f64, f64) {
        (self.x_min - extra, self.x_max + extra)
    }
}

/// Localization-based start interval `[min Gamma0 - W, max Gamma1 + W]`
/// with `W = 4 gamma1 + 4 theta sqrt(T)`.
pub fn localization_interval(derived: &DerivedSchedule) -> Result<(f64, f64)> {
    let p = derived.params();
    let horizon = p.horizon;
    let n = 200;
    let mut g0_min = f64::INFINITY;
    let mut g1_max = f64::NEG_INFINITY;
    for i in 0..=n {
        let tau = horizon * i as f64 / n as f64;
        g0_min = g0_min.min(derived.gamma0(tau)?);
        g1_max = g1_max.max(derived.gamma1_raw(tau)?);
    }
    let w = 4.0 * p.gamma1() + 4.0 * p.theta().abs() * horizon.sqrt();
    Ok((g0_min - w, g1_max + w))
}

pub fn auto_domain(derived: &DerivedSchedule, opts: &DomainOptions) -> Result<DomainChoice> {
    let horizon = derived.horizon();
    let (mut lo, mut hi) = localization_interval(derived)?;
    let step = 0.5 * (hi - lo);
    for widenings in 0..=opts.max_widenings {
        let grid = GridSpec::new(lo, hi, opts.prepass_nx, opts.prepass_ntau, horizon);
        let cfg = PenaltyConfig::for_domain(derived, lo, opts.epsilon);
        let field = solve_penalized(derived, grid, &cfg, NewtonConfig::default())?;
        let lower = extract_chi(&field, Side::Lower);
        let upper = extract_chi(&field, Side::Upper);
        let t_lo = opts.edge_fraction * horizon;
        let t_up = derived.tau1() + opts.edge_fraction * horizon;
        let x0 = lower
            .taus
            .iter()
            .zip(&lower.xs)
            .filter(|(t, _)| **t >= t_lo)
            .map(|(_, x)| *x)
            .fold(f64::INFINITY, f64::min);
        let x1 = upper
            .taus
            .iter()
            .zip(&upper.xs)
            .filter(|(t, _)| **t >= t_up)
            .map(|(_, x)| *x)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(x0.is_finite() && x1.is_finite()) {
            return Err(Error::Inconsistent(
                "pre-pass found no contact on the measured levels".into(),
            ));
        }
        let edge = 2.0 * grid.dx();
        let touch_lo = x0 <= lo + edge;
        let touch_hi = x1 >= hi - edge;
        if !touch_lo && !touch_hi {
            let span = x1 - x0;
            return Ok(DomainChoice {
                x_min: x0 - opts.pad * span,
                x_max: x1 + opts.pad * span,
                chi0_min: x0,
                chi1_max: x1,
                prepass: (lo, hi),
                widenings,
            });
        }
        if touch_lo {
            lo -= step;
        }
        if touch_hi {
            hi += step;
        }
    }
    Err(Error::Inconsistent(format!(
        "free boundaries still reach the pre-pass edge after {} widenings",
        opts.max_widenings
    )))
}
