//! Checks of a solved field against the structural properties of the exact
//! solution: residual signs, obstacle sandwich, monotonicity in `x` and the
//! band on the time derivative.

use serde::Serialize;

use crate::model::DerivedSchedule;
use crate::obstacle::field::SolutionField;

/// Residual statistics for one time level.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SliceResidual {
    pub tau: f64,
    pub continuation_max: f64,
    pub continuation_mean: f64,
    /// Smallest residual on lower contact nodes (should be `>= -tol`).
    pub lower_contact_min: f64,
    /// Largest residual on upper contact nodes (should be `<= tol`).
    pub upper_contact_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualStats {
    pub slices: Vec<SliceResidual>,
    pub continuation_max: f64,
    pub lower_contact_min: f64,
    pub upper_contact_max: f64,
    pub max_obstacle_violation: f64,
}

/// Residual `D_tau v - L_h v - U` split by region. Interior nodes are
/// classified by their own contact flags; nodes whose neighbours change
/// region are counted as continuation only when neither neighbour is in contact.
pub fn residual_report(field: &SolutionField) -> ResidualStats {
    let g = field.grid;
    let mut slices = Vec::with_capacity(g.n_tau);
    let mut cont_max: f64 = 0.0;
    let mut lo_min = f64::INFINITY;
    let mut up_max = f64::NEG_INFINITY;
    for k in 1..=g.n_tau {
        let mut s = SliceResidual {
            tau: g.tau(k),
            lower_contact_min: f64::INFINITY,
            upper_contact_max: f64::NEG_INFINITY,
            ..Default::default()
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 1..g.n_x {
            let r = field.residual(k, j);
            if field.contact_lower(k, j) {
                s.lower_contact_min = s.lower_contact_min.min(r);
            } else if field.contact_upper(k, j) {
                s.upper_contact_max = s.upper_contact_max.max(r);
            } else if !field.in_contact(k, j - 1) && !field.in_contact(k, j + 1) {
                s.continuation_max = s.continuation_max.max(r.abs());
                sum += r.abs();
                count += 1;
            }
        }
        s.continuation_mean = if count > 0 { sum / count as f64 } else { 0.0 };
        cont_max = cont_max.max(s.continuation_max);
        lo_min = lo_min.min(s.lower_contact_min);
        up_max = up_max.max(s.upper_contact_max);
        slices.push(s);
    }
    ResidualStats {
        slices,
        continuation_max: cont_max,
        lower_contact_min: lo_min,
        upper_contact_max: up_max,
        max_obstacle_violation: field.stats.max_obstacle_violation,
    }
}

/// Largest excursion outside `[-psi0, psi1]`.
pub fn sandwich_violation(field: &SolutionField) -> f64 {
    let g = field.grid;
    let mut worst: f64 = 0.0;
    for k in 0..=g.n_tau {
        for &v in field.row(k) {
            worst = worst.max(field.lower(k) - v).max(v - field.upper(k));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotonicityReport {
    /// Smallest forward difference `v[k, j+1] - v[k, j]` over the grid.
    pub min_forward_difference: f64,
    pub worst_node: (usize, usize),
    /// Smallest forward difference where both nodes are off the obstacles.
    pub min_continuation_difference: f64,
    pub continuation_pairs: usize,
}

pub fn monotonicity(field: &SolutionField) -> MonotonicityReport {
    let g = field.grid;
    let mut min_all = f64::INFINITY;
    let mut worst = (0, 0);
    let mut min_cont = f64::INFINITY;
    let mut pairs = 0;
    for k in 1..=g.n_tau {
        let row = field.row(k);
        for j in 0..g.n_x {
            let d = row[j + 1] - row[j];
            if d < min_all {
                min_all = d;
                worst = (k, j);
            }
            if j > 0 && j + 1 < g.n_x && !field.in_contact(k, j) && !field.in_contact(k, j + 1) {
                min_cont = min_cont.min(d);
                pairs += 1;
            }
        }
    }
    MonotonicityReport {
        min_forward_difference: min_all,
        worst_node: worst,
        min_continuation_difference: min_cont,
        continuation_pairs: pairs,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandSide {
    /// Largest amount by which the lower bound is undercut.
    pub lower_excess: f64,
    pub lower_worst: (usize, usize),
    /// Largest amount by which the upper bound is exceeded.
    pub upper_excess: f64,
    pub upper_worst: (usize, usize),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeBandReport {
    /// Obstacle index 0 uses `D_tau v + psi0'`, index 1 uses `D_tau v - psi1'`.
    pub sides: [BandSide; 2],
}

impl TimeBandReport {
    pub fn max_excess(&self) -> f64 {
        self.sides
            .iter()
            .map(|s| s.lower_excess.max(s.upper_excess))
            .fold(0.0, f64::max)
    }
}

/// Evaluates
/// `-A e^{K1 (T - tau) - x/gamma1} - 2q <= D_tau v + (-1)^i psi_i' <= (eps0 - eps1) e^{-r tau} + 2q`
/// at interior nodes with the backward difference `D_tau v`.
pub fn time_derivative_band(field: &SolutionField, derived: &DerivedSchedule) -> TimeBandReport {
    let g = field.grid;
    let p = derived.params();
    let (a, k1, g1) = (p.leisure_gap(), p.k1(), p.gamma1());
    let q = derived.costs().q();
    let mut sides = [BandSide {
        lower_excess: 0.0,
        lower_worst: (0, 0),
        upper_excess: 0.0,
        upper_worst: (0, 0),
    }; 2];
    for k in 1..=g.n_tau {
        let tau = g.tau(k);
        let dt = tau - g.tau(k - 1);
        let upper = p.income_gap() * (-p.r * tau).exp() + 2.0 * q;
        let dpsi = [derived.dpsi(0, tau), -derived.dpsi(1, tau)];
        for j in 1..g.n_x {
            let x = g.x(j);
            let d = (field.v(k, j) - field.v(k - 1, j)) / dt;
            let lower = -a * (k1 * (p.horizon - tau) - x / g1).exp() - 2.0 * q;
            for (i, s) in sides.iter_mut().enumerate() {
                let val = d + dpsi[i];
                if lower - val > s.lower_excess {
                    s.lower_excess = lower - val;
                    s.lower_worst = (k, j);
                }
                if val - upper > s.upper_excess {
                    s.upper_excess = val - upper;
                    s.upper_worst = (k, j);
                }
            }
        }
    }
    TimeBandReport { sides }
}

/// Largest `|a - b|` over the shared grid.
pub fn linf_difference(a: &SolutionField, b: &SolutionField) -> Option<f64> {
    if a.grid != b.grid {
        return None;
    }
    Some(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
    )
}

/// First time level with upper contact, if any.
pub fn first_upper_contact(field: &SolutionField) -> Option<usize> {
    (0..=field.grid.n_tau).find(|&k| (0..=field.grid.n_x).any(|j| field.contact_upper(k, j)))
}
