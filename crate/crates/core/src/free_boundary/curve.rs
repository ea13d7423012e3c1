use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::SolutionField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Contact with `-psi0`; switching from the high-income job.
    Lower,
    /// Contact with `psi1`; switching from the low-income job.
    Upper,
}

/// Per-slice contact layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceContact {
    pub k: usize,
    pub first: usize,
    pub last: usize,
    pub count: usize,
}

impl SliceContact {
    /// Contact nodes form one run without gaps.
    pub fn connected(&self) -> bool {
        self.last + 1 - self.first == self.count
    }
}

/// `chi_i(tau)` sampled on the time levels that carry contact.
#[derive(Debug, Clone, Serialize)]
pub struct FreeBoundaryCurve {
    pub side: Side,
    pub taus: Vec<f64>,
    pub xs: Vec<f64>,
    /// Time-level index of each sample.
    pub levels: Vec<usize>,
    pub contact: Vec<SliceContact>,
    /// Width of the contact set, `count * dx`.
    pub contact_width: Vec<f64>,
    /// `|chi(tau_{m+1}) - chi(tau_m)| / (tau_{m+1} - tau_m)`; last entry repeats 0.
    pub lipschitz_local: Vec<f64>,
    /// Levels whose contact set has gaps.
    pub anomalies: Vec<usize>,
    pub valid_from: Option<f64>,
    pub dx: f64,
    pub dtau: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl FreeBoundaryCurve {
    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    /// Sample at time level `k`, if that level has contact.
    pub fn at_level(&self, k: usize) -> Option<f64> {
        self.levels.binary_search(&k).ok().map(|m| self.xs[m])
    }

    /// Whether the contact set of sample `m` reaches the domain edge on its side.
    pub fn touches_edge(&self, m: usize, n_x: usize) -> bool {
        match self.side {
            Side::Lower => self.contact[m].first == 0,
            Side::Upper => self.contact[m].last == n_x,
        }
    }
}

/// Extracts `chi_0(tau) = max{x : v = -psi0}` or `chi_1(tau) = min{x : v = psi1}`
/// with sub-grid location by linear interpolation of the obstacle gap at the
/// contact threshold.
pub fn extract_chi(field: &SolutionField, side: Side) -> FreeBoundaryCurve {
    let g = field.grid;
    let level = field.threshold;
    let mut curve = FreeBoundaryCurve {
        side,
        taus: Vec::new(),
        xs: Vec::new(),
        levels: Vec::new(),
        contact: Vec::new(),
        contact_width: Vec::new(),
        lipschitz_local: Vec::new(),
        anomalies: Vec::new(),
        valid_from: None,
        dx: g.dx(),
        dtau: g.dtau(),
        x_min: g.x_min,
        x_max: g.x_max,
    };
    for k in 0..=g.n_tau {
        let flag = |j: usize| match side {
            Side::Lower => field.contact_lower(k, j),
            Side::Upper => field.contact_upper(k, j),
        };
        let gap = |j: usize| match side {
            Side::Lower => field.v(k, j) - field.lower(k),
            Side::Upper => field.upper(k) - field.v(k, j),
        };
        let nodes: Vec<usize> = (0..=g.n_x).filter(|&j| flag(j)).collect();
        let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) else {
            continue;
        };
        let sc = SliceContact {
            k,
            first,
            last,
            count: nodes.len(),
        };
        if !sc.connected() {
            curve.anomalies.push(k);
        }
        let x = match side {
            Side::Lower if last < g.n_x => {
                let (g0, g1) = (gap(last), gap(last + 1));
                let s = ((level - g0) / (g1 - g0)).clamp(0.0, 1.0);
                g.x(last) + s * g.dx()
            }
            Side::Lower => g.x_max,
            Side::Upper if first > 0 => {
                let (g0, g1) = (gap(first), gap(first - 1));
                let s = ((level - g0) / (g1 - g0)).clamp(0.0, 1.0);
                g.x(first) - s * g.dx()
            }
            Side::Upper => g.x_min,
        };
        curve.taus.push(g.tau(k));
        curve.xs.push(x);
        curve.levels.push(k);
        curve.contact.push(sc);
        curve.contact_width.push(sc.count as f64 * g.dx());
    }
    curve.valid_from = curve.taus.first().copied();
    curve.lipschitz_local = curve
        .taus
        .windows(2)
        .zip(curve.xs.windows(2))
        .map(|(t, x)| (x[1] - x[0]).abs() / (t[1] - t[0]))
        .collect();
    if !curve.taus.is_empty() {
        curve.lipschitz_local.push(0.0);
    }
    curve
}

/// A free boundary in calendar time and dual price, `S_i(t) = exp(chi_i(T - t))`.
#[derive(Debug, Clone, Serialize)]
pub struct OriginalBoundary {
    pub side: Side,
    /// Increasing calendar times.
    pub ts: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn to_original(curve: &FreeBoundaryCurve, horizon: f64) -> OriginalBoundary {
    let mut pairs: Vec<(f64, f64)> = curve
        .taus
        .iter()
        .zip(&curve.xs)
        .map(|(&tau, &x)| (horizon - tau, x.exp()))
        .collect();
    pairs.reverse();
    let (ts, s) = pairs.into_iter().unzip();
    OriginalBoundary {
        side: curve.side,
        ts,
        s,
    }
}

impl OriginalBoundary {
    /// Linear interpolation in `t`; `None` outside the sampled window.
    pub fn at(&self, t: f64) -> Option<f64> {
        let n = self.ts.len();
        if n == 0 || t < self.ts[0] || t > self.ts[n - 1] {
            return None;
        }
        let i = self.ts.partition_point(|&x| x <= t);
        if i == 0 {
            return Some(self.s[0]);
        }
        if i >= n {
            return Some(self.s[n - 1]);
        }
        let (t0, t1) = (self.ts[i - 1], self.ts[i]);
        let w = (t - t0) / (t1 - t0);
        Some(self.s[i - 1] * (1.0 - w) + self.s[i] * w)
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        Some((*self.ts.first()?, *self.ts.last()?))
    }

    /// Scales the boundary by `factor` (a perturbed policy).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            side: self.side,
            ts: self.ts.clone(),
            s: self.s.iter().map(|s| s * factor).collect(),
        }
    }

    /// Restricts the boundary to `t < t_end`.
    pub fn truncated(&self, t_end: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.ts.len()).filter(|&i| self.ts[i] < t_end).collect();
        if keep.is_empty() {
            return Err(Error::OutOfRange(format!("no boundary samples before t = {t_end}")));
        }
        Ok(Self {
            side: self.side,
            ts: keep.iter().map(|&i| self.ts[i]).collect(),
            s: keep.iter().map(|&i| self.s[i]).collect(),
        })
    }
}
