//! Sampled verification of the standing assumptions on the costs and the market.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CostSchedule, Job, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionId {
    /// Costs positive and bounded in `C^{1,1}` by `q`.
    A1,
    /// `phi0' - r phi0 < -phi1' + r phi1`.
    A2i,
    /// `phi1(0) < E(T)` and `-phi1' + r phi1 < eps0 - eps1`.
    A2ii,
    /// Initial wealth above the floor for the starting job.
    A3,
    /// Positive Merton constant.
    A4,
}

impl AssumptionId {
    pub fn label(self) -> &'static str {
        match self {
            AssumptionId::A1 => "A1",
            AssumptionId::A2i => "A2(i)",
            AssumptionId::A2ii => "A2(ii)",
            AssumptionId::A3 => "A3",
            AssumptionId::A4 => "A4",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub id: AssumptionId,
    pub passed: bool,
    /// Smallest slack over the sample; negative or zero means violated.
    pub margin: f64,
    /// Calendar time of the smallest slack, when the check is time dependent.
    pub worst_t: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub n_samples: usize,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<AssumptionId> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect()
    }

    pub fn get(&self, id: AssumptionId) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Converts a failing report into an error naming every violated assumption.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let names: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} (margin {:.3e}{})", c.id.label(), c.margin, worst(c.worst_t)))
            .collect();
        Err(Error::AssumptionViolated(names.join(", ")))
    }
}

fn worst(t: Option<f64>) -> String {
    t.map(|t| format!(" at t = {t:.6}")).unwrap_or_default()
}

/// Minimum of `f` over `ts` with its argmin.
fn min_over(ts: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    ts.iter()
        .map(|&t| (f(t), t))
        .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc })
}

fn check(id: AssumptionId, margin: f64, worst_t: Option<f64>, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        id,
        passed: margin > 0.0,
        margin,
        worst_t,
        detail,
    }
}

/// Evaluates A1, A2(i), A2(ii) and A4 on a uniform sample of `n_samples`
/// times plus all spline knots.
pub fn validate_assumptions(params: &ModelParams, costs: &CostSchedule, n_samples: usize) -> Result<AssumptionReport> {
    if n_samples < 100 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: format!("need at least 100 samples, got {n_samples}"),
        });
    }
    params.validate()?;
    if (costs.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
        return Err(Error::Inconsistent(
            "cost schedule horizon differs from model horizon".into(),
        ));
    }
    let r = params.r;
    let gap = params.income_gap();
    let ts = costs.sample_times(n_samples);
    let mut checks = Vec::with_capacity(4);

    // A1: positivity with the computed norm bound, which holds by construction
    // but is re-checked against the dense sample.
    let (m0, t0) = min_over(&ts, |t| costs.phi0(t));
    let (m1, t1) = min_over(&ts, |t| costs.phi1(t));
    let (pos_margin, pos_t) = if m0 <= m1 { (m0, t0) } else { (m1, t1) };
    let sampled_norm: f64 = (0..2)
        .map(|i| {
            let f = costs.phi(i);
            let sup = |g: &dyn Fn(f64) -> f64| ts.iter().map(|&t| g(t).abs()).fold(0.0, f64::max);
            let lip = ts
                .windows(2)
                .map(|w| ((f.derivative(w[1]) - f.derivative(w[0])) / (w[1] - w[0])).abs())
                .fold(0.0, f64::max);
            sup(&|t| f.value(t)) + sup(&|t| f.derivative(t)) + lip
        })
        .sum();
    let norm_slack = costs.q() - sampled_norm;
    let a1_margin = if norm_slack < -1e-9 * costs.q().max(1.0) {
        norm_slack
    } else {
        pos_margin
    };
    checks.push(check(
        AssumptionId::A1,
        a1_margin,
        Some(pos_t),
        format!(
            "min phi = {pos_margin:.6e}, q = {:.6e}, sampled norm = {sampled_norm:.6e}",
            costs.q()
        ),
    ));

    // A2(i)
    let (m, t) = min_over(&ts, |t| {
        (-costs.dphi1(t) + r * costs.phi1(t)) - (costs.dphi0(t) - r * costs.phi0(t))
    });
    checks.push(check(
        AssumptionId::A2i,
        m,
        Some(t),
        "min of (-phi1' + r phi1) - (phi0' - r phi0)".into(),
    ));

    // A2(ii): the endpoint inequality and the rate inequality, reporting the tighter.
    let e_total = gap * (1.0 - (-r * params.horizon).exp()) / r;
    let first = e_total - costs.phi1(0.0);
    let (second, t_second) = min_over(&ts, |t| gap - (-costs.dphi1(t) + r * costs.phi1(t)));
    let (margin, worst_t, which) = if first <= second {
        (first, Some(0.0), "phi1(0) < (eps0 - eps1)(1 - e^{-rT})/r")
    } else {
        (second, Some(t_second), "-phi1' + r phi1 < eps0 - eps1")
    };
    checks.push(check(
        AssumptionId::A2ii,
        margin,
        worst_t,
        format!("binding: {which}; endpoint slack {first:.6e}, rate slack {second:.6e}"),
    ));

    let k1 = params.k1();
    checks.push(check(AssumptionId::A4, k1, None, format!("K1 = {k1:.6e}")));

    Ok(AssumptionReport { checks, n_samples })
}

/// Initial-wealth admissibility for starting job `j`, with the floor from
/// [`crate::model::DerivedSchedule::wealth_floor`].
pub fn check_initial_wealth(params: &ModelParams, costs: &CostSchedule, j: Job, w: f64) -> AssumptionCheck {
    let annuity = (1.0 - (-params.r * params.horizon).exp()) / params.r;
    let floor = match j {
        Job::High => -params.eps0 * annuity,
        Job::Low => -params.eps1 * annuity + costs.phi1(0.0),
    };
    check(
        AssumptionId::A3,
        w - floor,
        Some(0.0),
        format!("w = {w:.6e}, floor = {floor:.6e}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostFn;

    fn scalar_checks(p: &ModelParams, c: &CostSchedule) -> [bool; 4] {
        // independent evaluation at 1000 uniform points
        let n = 1000;
        let mut ok = [true; 4];
        for k in 0..n {
            let t = p.horizon * k as f64 / (n - 1) as f64;
            let (f0, f1) = (c.phi0(t), c.phi1(t));
            let (d0, d1) = (c.dphi0(t), c.dphi1(t));
            ok[0] &= f0 > 0.0 && f1 > 0.0;
            ok[1] &= d0 - p.r * f0 < -d1 + p.r * f1;
            ok[2] &= -d1 + p.r * f1 < p.eps0 - p.eps1;
        }
        ok[2] &= c.phi1(0.0) < (p.eps0 - p.eps1) * (1.0 - (-p.r * p.horizon).exp()) / p.r;
        let g1 = 1.0 - p.alpha * (1.0 - p.gamma);
        let th = (p.mu - p.r) / p.sigma;
        ok[3] = p.r + (p.beta - p.r) / g1 + (g1 - 1.0) / (g1 * g1) * th * th / 2.0 > 0.0;
        ok
    }

    #[test]
    fn reference_passes_and_matches_scalar_oracle() {
        let p = ModelParams::reference();
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        let rep = validate_assumptions(&p, &c, 1000).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(scalar_checks(&p, &c), [true; 4]);
        let a2 = rep.get(AssumptionId::A2ii).unwrap();
        // rate slack 0.6 - 0.006 vs endpoint slack ~5.44 - 0.3
        assert!((a2.margin - 0.594).abs() < 1e-12);
    }

    #[test]
    fn endpoint_equality_fails_a2ii() {
        let p = ModelParams::reference();
        let e_total = p.income_gap() * (1.0 - (-p.r * p.horizon).exp()) / p.r;
        let c = CostSchedule::constant(0.2, e_total, p.horizon).unwrap();
        let rep = validate_assumptions(&p, &c, 1000).unwrap();
        assert_eq!(rep.failed(), vec![AssumptionId::A2ii]);
        assert!(rep.get(AssumptionId::A2ii).unwrap().margin <= 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = ModelParams::reference();
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        assert!(validate_assumptions(&p, &c, 99).is_err());
    }

    #[test]
    fn reversed_a2i_named() {
        let p = ModelParams::reference();
        // phi0' - r phi0 = 0.5 - 0.004 exceeds -phi1' + r phi1 = 0.006
        let c = CostSchedule::new(
            CostFn::Affine {
                intercept: 0.2,
                slope: 0.5,
            },
            CostFn::constant(0.3),
            p.horizon,
        )
        .unwrap();
        let rep = validate_assumptions(&p, &c, 1000).unwrap();
        assert_eq!(rep.failed(), vec![AssumptionId::A2i]);
    }

    #[test]
    fn initial_wealth_floor() {
        let p = ModelParams::reference();
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        assert!(check_initial_wealth(&p, &c, Job::High, -9.0).passed);
        assert!(!check_initial_wealth(&p, &c, Job::High, -9.1).passed);
    }
}
