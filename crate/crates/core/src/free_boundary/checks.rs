//! Diagnostics on extracted free boundaries: containment in the
//! localization regions, separation, half-line contact sets, behaviour under
//! domain widening, derivative ratios and Lipschitz quotients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_boundary::curve::{FreeBoundaryCurve, Side};
use crate::model::DerivedSchedule;
use crate::obstacle::SolutionField;

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentReport {
    /// `max (chi0 - Gamma0)` over the lower curve; must be `<= dx`.
    pub lower_max_excess: f64,
    /// `min (chi1 - Gamma1)` over the upper curve; must be `>= -dx`.
    pub upper_min_margin: f64,
    pub upper_valid_from: Option<f64>,
    pub tau1: f64,
    pub dx: f64,
    pub dtau: f64,
    pub passed: bool,
}

pub fn containment(
    lower: &FreeBoundaryCurve,
    upper: &FreeBoundaryCurve,
    derived: &DerivedSchedule,
) -> Result<ContainmentReport> {
    let mut lower_max = f64::NEG_INFINITY;
    for (&tau, &x) in lower.taus.iter().zip(&lower.xs) {
        lower_max = lower_max.max(x - derived.gamma0(tau)?);
    }
    let mut upper_min = f64::INFINITY;
    for (&tau, &x) in upper.taus.iter().zip(&upper.xs) {
        // below tau1 the upper curve must not exist at all; that is checked through valid_from
        if let (_, Some(g1)) = derived.curves_gamma(tau)? {
            upper_min = upper_min.min(x - g1);
        }
    }
    let tau1 = derived.tau1();
    let (dx, dtau) = (lower.dx, lower.dtau);
    let timing_ok = upper.valid_from.is_none_or(|t| t > tau1 - dtau);
    let passed = lower_max <= dx && upper_min >= -dx && timing_ok;
    Ok(ContainmentReport {
        lower_max_excess: lower_max,
        upper_min_margin: upper_min,
        upper_valid_from: upper.valid_from,
        tau1,
        dx,
        dtau,
        passed,
    })
}

/// `chi0 < chi1 - (Gamma1 - Gamma0)/2` wherever both curves exist; returns the
/// smallest slack.
pub fn separation(
    lower: &FreeBoundaryCurve,
    upper: &FreeBoundaryCurve,
    derived: &DerivedSchedule,
) -> Result<Option<f64>> {
    let mut worst: Option<f64> = None;
    for (m, &k) in upper.levels.iter().enumerate() {
        if let Some(x0) = lower.at_level(k) {
            let tau = upper.taus[m];
            let gap = derived.gamma1_raw(tau)? - derived.gamma0(tau)?;
            let slack = upper.xs[m] - gap / 2.0 - x0;
            worst = Some(worst.map_or(slack, |w: f64| w.min(slack)));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldReport {
    pub side: Side,
    pub from_tau: f64,
    pub slices_checked: usize,
    /// Levels at or after `from_tau` without contact.
    pub missing: Vec<usize>,
    /// Levels whose contact set has gaps.
    pub disconnected: Vec<usize>,
    /// Levels whose contact set does not reach the domain edge.
    pub detached: Vec<usize>,
}

impl FarFieldReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.disconnected.is_empty() && self.detached.is_empty()
    }
}

/// Contact sets are single intervals touching the domain edge on every level
/// with `tau >= from_tau`.
pub fn far_field(curve: &FreeBoundaryCurve, field: &SolutionField, from_tau: f64) -> FarFieldReport {
    let g = field.grid;
    let mut rep = FarFieldReport {
        side: curve.side,
        from_tau,
        slices_checked: 0,
        missing: Vec::new(),
        disconnected: Vec::new(),
        detached: Vec::new(),
    };
    for k in 0..=g.n_tau {
        if g.tau(k) < from_tau - 1e-12 {
            continue;
        }
        rep.slices_checked += 1;
        match curve.levels.binary_search(&k) {
            Err(_) => rep.missing.push(k),
            Ok(m) => {
                if !curve.contact[m].connected() {
                    rep.disconnected.push(k);
                }
                if !curve.touches_edge(m, g.n_x) {
                    rep.detached.push(k);
                }
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSlice {
    pub tau: f64,
    pub base: f64,
    /// `None` when widening removed the contact.
    pub wide: Option<f64>,
    /// Outward displacement as a fraction of the edge displacement.
    pub outward_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub side: Side,
    /// How far the edge on this side moved.
    pub widening: f64,
    pub slices: Vec<LimitSlice>,
}

impl LimitReport {
    /// Every tested slice moved strictly outward or lost contact.
    pub fn outward_or_removed(&self) -> bool {
        !self.slices.is_empty() && self.slices.iter().all(|s| s.outward_fraction.is_none_or(|f| f > 0.0))
    }

    /// Smallest outward fraction among slices that kept contact.
    pub fn min_fraction(&self) -> Option<f64> {
        self.slices
            .iter()
            .filter_map(|s| s.outward_fraction)
            .fold(None, |acc, f| Some(acc.map_or(f, |a: f64| a.min(f))))
    }
}

/// Compares the `count` earliest boundary samples of a base curve with the
/// same levels on a field solved over a widened domain (same `dx`, `dtau`).
pub fn limit_diagnostics(base: &FreeBoundaryCurve, wide: &FreeBoundaryCurve, count: usize) -> Result<LimitReport> {
    if base.side != wide.side {
        return Err(Error::Inconsistent("curves are on different sides".into()));
    }
    if (base.dtau - wide.dtau).abs() > 1e-12 * base.dtau {
        return Err(Error::InvalidGrid("limit comparison needs equal time steps".into()));
    }
    let widening = match base.side {
        Side::Lower => base.x_min - wide.x_min,
        Side::Upper => wide.x_max - base.x_max,
    };
    if !(widening > 0.0) {
        return Err(Error::InvalidGrid("wide domain does not extend the base domain".into()));
    }
    let slices = base
        .levels
        .iter()
        .zip(&base.xs)
        .zip(&base.taus)
        .take(count)
        .map(|((&k, &x), &tau)| {
            let wide_x = wide.at_level(k);
            let outward_fraction = wide_x.map(|w| match base.side {
                Side::Lower => (x - w) / widening,
                Side::Upper => (w - x) / widening,
            });
            LimitSlice {
                tau,
                base: x,
                wide: wide_x,
                outward_fraction,
            }
        })
        .collect();
    Ok(LimitReport {
        side: base.side,
        widening,
        slices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BandFit {
    pub side: Side,
    pub tau_from: f64,
    pub nodes: usize,
    /// Smallest `C` making both inequalities hold on the tested nodes.
    pub fitted_c: f64,
    /// Smallest `dx v` on the tested nodes.
    pub min_dxv: f64,
}

/// Fits the constant in
/// `-C dx v <= dtau v + (-1)^i psi_i' <= C e^{x/gamma1} dx v`
/// on `chi0 < x <= M0` (lower) or `M1 <= x < chi1` (upper) for `tau >= tau_from`.
pub fn derivative_band_check(
    field: &SolutionField,
    derived: &DerivedSchedule,
    curve: &FreeBoundaryCurve,
    tau_from: f64,
) -> Result<BandFit> {
    let g = field.grid;
    let g1 = derived.params().gamma1();
    let mut fit = BandFit {
        side: curve.side,
        tau_from,
        nodes: 0,
        fitted_c: 0.0,
        min_dxv: f64::INFINITY,
    };
    for (m, &k) in curve.levels.iter().enumerate() {
        let tau = g.tau(k);
        if tau < tau_from || k == 0 {
            continue;
        }
        let (m0, _, m1) = derived.midlines(tau)?;
        if m0 <= derived.gamma0(tau)? {
            return Err(Error::AssumptionViolated(format!("empty band at tau = {tau}")));
        }
        let chi = curve.xs[m];
        let dt = tau - g.tau(k - 1);
        for j in 1..g.n_x {
            let x = g.x(j);
            let inside = match curve.side {
                Side::Lower => x > chi && x <= m0,
                Side::Upper => x >= m1 && x < chi,
            };
            if !inside || field.in_contact(k, j) {
                continue;
            }
            let dxv = (field.v(k, j + 1) - field.v(k, j - 1)) / (2.0 * g.dx());
            let dpsi = match curve.side {
                Side::Lower => derived.dpsi(0, tau),
                Side::Upper => -derived.dpsi(1, tau),
            };
            let d = (field.v(k, j) - field.v(k - 1, j)) / dt + dpsi;
            fit.min_dxv = fit.min_dxv.min(dxv);
            if dxv <= 0.0 {
                fit.fitted_c = f64::INFINITY;
                continue;
            }
            let need = (-d / dxv).max(d / ((x / g1).exp() * dxv));
            fit.fitted_c = fit.fitted_c.max(need);
            fit.nodes += 1;
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub side: Side,
    /// `(tau_start, tau_end, max quotient)` per window of the interior range.
    pub windows: Vec<(f64, f64, f64)>,
    pub interior_max: f64,
    /// Largest quotient in the excluded end zones, reported only.
    pub endpoint_max: f64,
}

/// Difference quotients of consecutive samples, with the first and last 5% of
/// the valid range excluded and the rest split into windows of `window` samples.
pub fn lipschitz_estimate(curve: &FreeBoundaryCurve, window: usize) -> Result<LipschitzReport> {
    if window == 0 || curve.len() < window + 1 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("curve has {} samples, window is {}", curve.len(), window),
        });
    }
    let (t0, t1) = (curve.taus[0], curve.taus[curve.len() - 1]);
    let margin = 0.05 * (t1 - t0);
    let mut interior = Vec::new();
    let mut endpoint_max: f64 = 0.0;
    for m in 0..curve.len() - 1 {
        let (ta, tb) = (curve.taus[m], curve.taus[m + 1]);
        let q = (curve.xs[m + 1] - curve.xs[m]).abs() / (tb - ta);
        if ta >= t0 + margin && tb <= t1 - margin {
            interior.push((ta, tb, q));
        } else {
            endpoint_max = endpoint_max.max(q);
        }
    }
    let windows: Vec<(f64, f64, f64)> = interior
        .chunks(window)
        .map(|c| (c[0].0, c[c.len() - 1].1, c.iter().map(|x| x.2).fold(0.0, f64::max)))
        .collect();
    let interior_max = windows.iter().map(|w| w.2).fold(0.0, f64::max);
    Ok(LipschitzReport {
        side: curve.side,
        windows,
        interior_max,
        endpoint_max,
    })
}
