//! Quantities in reversed time `tau = T - t`: obstacles, income gain,
//! crossing time, localization curves, boundary data and wealth floors.

use crate::error::{Error, Result};
use crate::model::{CostSchedule, Job, ModelParams};

/// Model plus costs, with the crossing time solved once at construction.
#[derive(Debug, Clone)]
pub struct DerivedSchedule {
    params: ModelParams,
    costs: CostSchedule,
    t1: f64,
}

impl DerivedSchedule {
    /// Builds the schedule; fails when the crossing time does not exist.
    pub fn new(params: ModelParams, costs: CostSchedule) -> Result<Self> {
        params.validate()?;
        if (costs.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
            return Err(Error::Inconsistent(format!(
                "cost schedule horizon {} differs from model horizon {}",
                costs.horizon(),
                params.horizon
            )));
        }
        let (t1, _) = solve_t1(&params, &costs, 1e-10 * params.horizon)?;
        Ok(Self { params, costs, t1 })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn costs(&self) -> &CostSchedule {
        &self.costs
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn tau1(&self) -> f64 {
        self.params.horizon - self.t1
    }

    /// `psi_i(tau) = phi_i(T - tau)`.
    pub fn psi(&self, i: usize, tau: f64) -> f64 {
        self.costs.phi(i).value(self.params.horizon - tau)
    }

    /// `d psi_i / d tau = -phi_i'(T - tau)`.
    pub fn dpsi(&self, i: usize, tau: f64) -> f64 {
        -self.costs.phi(i).derivative(self.params.horizon - tau)
    }

    /// Income gain from holding the high-income job for the remaining `tau` years.
    pub fn ecal(&self, tau: f64) -> f64 {
        let r = self.params.r;
        self.params.income_gap() * (1.0 - (-r * tau).exp()) / r
    }

    fn gamma_curve(&self, denom: f64) -> Result<f64> {
        if !(denom > 0.0) {
            return Err(Error::AssumptionViolated(format!(
                "localization curve denominator {denom:.6e} is not positive"
            )));
        }
        Ok(self.params.gamma1() * (self.params.leisure_gap() / denom).ln())
    }

    /// `Gamma0(tau)`: level set `U(x) = -psi0' - r psi0`.
    pub fn gamma0(&self, tau: f64) -> Result<f64> {
        let r = self.params.r;
        self.gamma_curve(self.params.income_gap() + self.dpsi(0, tau) + r * self.psi(0, tau))
    }

    /// `Gamma1(tau)` without the `tau >= tau1` restriction: level set
    /// `U(x) = psi1' + r psi1`. Used for the midline curves.
    pub fn gamma1_raw(&self, tau: f64) -> Result<f64> {
        let r = self.params.r;
        self.gamma_curve(self.params.income_gap() - self.dpsi(1, tau) - r * self.psi(1, tau))
    }

    /// Both localization curves; the upper one only exists from `tau1` on.
    pub fn curves_gamma(&self, tau: f64) -> Result<(f64, Option<f64>)> {
        if !(0.0..=self.params.horizon).contains(&tau) {
            return Err(Error::OutOfRange(format!(
                "tau {tau} outside [0, {}]",
                self.params.horizon
            )));
        }
        let g0 = self.gamma0(tau)?;
        let g1 = if tau >= self.tau1() {
            Some(self.gamma1_raw(tau)?)
        } else {
            None
        };
        Ok((g0, g1))
    }

    /// Midline curves `(M0, M, M1)`.
    pub fn midlines(&self, tau: f64) -> Result<(f64, f64, f64)> {
        let g0 = self.gamma0(tau)?;
        let g1 = self.gamma1_raw(tau)?;
        Ok(((3.0 * g0 + g1) / 4.0, (g0 + g1) / 2.0, (g0 + 3.0 * g1) / 4.0))
    }

    /// `G(tau) = A e^{n/gamma1} tau`.
    pub fn g_cal(&self, n: f64, tau: f64) -> f64 {
        self.params.leisure_gap() * (n / self.params.gamma1()).exp() * tau
    }

    pub fn rho0(&self, n: f64, tau: f64) -> f64 {
        (-self.g_cal(n, tau)).max(-self.psi(0, tau))
    }

    pub fn rho1(&self, tau: f64) -> f64 {
        self.ecal(tau).min(self.psi(1, tau))
    }

    pub fn boundary_data_rho(&self, n: f64, tau: f64) -> (f64, f64) {
        (self.rho0(n, tau), self.rho1(tau))
    }

    /// Admissibility floor on initial wealth for starting job `j`.
    pub fn wealth_floor(&self, j: Job) -> f64 {
        let p = &self.params;
        let annuity = (1.0 - (-p.r * p.horizon).exp()) / p.r;
        match j {
            Job::High => -p.eps0 * annuity,
            Job::Low => -p.eps1 * annuity + self.costs.phi1(0.0),
        }
    }

    /// The job-1 borrowing floor written with the high income inside the
    /// annuity, `-eps0 (1 - e^{-r(T-t)})/r + phi1(t)`. Kept alongside
    /// [`Self::wealth_floor`] because the two conventions disagree; it is
    /// reported, never used for admissibility.
    pub fn wealth_floor_alt(&self, t: f64) -> f64 {
        let p = &self.params;
        -p.eps0 * (1.0 - (-p.r * (p.horizon - t)).exp()) / p.r + self.costs.phi1(t)
    }

    /// Time-dependent floor for job 1 under the job-1 income convention.
    pub fn wealth_floor_at(&self, j: Job, t: f64) -> f64 {
        let p = &self.params;
        let annuity = (1.0 - (-p.r * (p.horizon - t)).exp()) / p.r;
        match j {
            Job::High => -p.eps0 * annuity,
            Job::Low => -p.eps1 * annuity + self.costs.phi1(t),
        }
    }
}

/// Root `t1` of `phi1(t) = E(T - t)` on `(0, T)` by bisection, with `tau1 = T - t1`.
pub fn solve_t1(params: &ModelParams, costs: &CostSchedule, tol: f64) -> Result<(f64, f64)> {
    let horizon = params.horizon;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive".into(),
        });
    }
    let r = params.r;
    let gap = params.income_gap();
    let g = |t: f64| costs.phi1(t) - gap * (1.0 - (-r * (horizon - t)).exp()) / r;
    let (mut lo, mut hi) = (0.0, horizon);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "phi1 - E has no sign change on (0, T): g(0) = {g_lo:.6e}, g(T) = {g_hi:.6e}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t1 = 0.5 * (lo + hi);
    if horizon - t1 <= tol {
        return Err(Error::AssumptionViolated(format!(
            "crossing time {t1} is not interior to (0, {horizon})"
        )));
    }
    Ok((t1, horizon - t1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostFn;
    use approx::assert_relative_eq;

    fn reference() -> DerivedSchedule {
        let p = ModelParams::reference();
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        DerivedSchedule::new(p, c).unwrap()
    }

    #[test]
    fn t1_matches_closed_form() {
        let d = reference();
        let exact = 10.0 + 0.99f64.ln() / 0.02;
        assert!((d.t1() - exact).abs() < 1e-10 * 10.0);
        assert_relative_eq!(d.tau1(), 10.0 - exact, epsilon = 1e-9);
        assert_relative_eq!(d.ecal(d.tau1()), d.psi(1, d.tau1()), epsilon = 1e-9);
    }

    #[test]
    fn t1_tolerance_halving() {
        let d = reference();
        let tol = 1e-6;
        let (a, _) = solve_t1(d.params(), d.costs(), tol).unwrap();
        let (b, _) = solve_t1(d.params(), d.costs(), tol / 2.0).unwrap();
        assert!((a - b).abs() <= tol);
    }

    #[test]
    fn t1_absent_when_cost_is_half_income_gain() {
        let p = ModelParams::reference();
        let k = 0.5 * p.income_gap() / p.r;
        // 0.5 * E(T - t) = k - k e^{-rT} e^{rt}
        let phi1 = CostFn::ExpDecay {
            base: k,
            amplitude: -k * (-p.r * p.horizon).exp(),
            rate: -p.r,
        };
        let c = CostSchedule::new(CostFn::constant(0.2), phi1, p.horizon).unwrap();
        let err = solve_t1(&p, &c, 1e-10 * p.horizon).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
    }

    #[test]
    fn wealth_floors() {
        let d = reference();
        let expected = -(1.0 - (-0.2f64).exp()) / 0.02;
        assert_relative_eq!(d.wealth_floor(Job::High), expected, epsilon = 1e-12);
        assert!((d.wealth_floor(Job::High) + 9.063).abs() < 1e-3);
        let annuity = (1.0 - (-0.2f64).exp()) / 0.02;
        assert_relative_eq!(d.wealth_floor(Job::Low), -0.4 * annuity + 0.3, epsilon = 1e-12);
        assert_relative_eq!(d.wealth_floor_alt(0.0), -annuity + 0.3, epsilon = 1e-12);

        let mut p = ModelParams::reference();
        p.eps1 = 0.0;
        let c = CostSchedule::constant(0.2, 0.3, p.horizon).unwrap();
        let d = DerivedSchedule::new(p, c).unwrap();
        assert_relative_eq!(d.wealth_floor(Job::Low), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rho_boundary_values() {
        let d = reference();
        assert_eq!(d.boundary_data_rho(3.0, 0.0), (0.0, 0.0));
        for &tau in &[0.6, 2.0, 9.9] {
            assert_eq!(d.rho1(tau), d.psi(1, tau));
        }
        // wide truncation: rho0 reaches -psi0 almost immediately
        let n = 20.0;
        let onset = d.psi(0, 0.0) / (d.params().leisure_gap() * (n / d.params().gamma1()).exp());
        assert!(onset < 1e-5);
        assert_eq!(d.rho0(n, 2.0 * onset), -d.psi(0, 2.0 * onset));
    }

    #[test]
    fn gamma_curves_ordered_and_constant() {
        let d = reference();
        let (g0, none) = d.curves_gamma(0.1).unwrap();
        assert!(none.is_none());
        let (g0b, g1) = d.curves_gamma(5.0).unwrap();
        assert_eq!(g0, g0b);
        let g1 = g1.unwrap();
        assert!(g0 < g1);
        // independent evaluation at tau = 5
        let a = -3.0 * (0.7f64.powf(-1.0 / 3.0) - 0.4f64.powf(-1.0 / 3.0));
        assert_relative_eq!(g0, 1.5 * (a / (0.6 + 0.02 * 0.2)).ln(), epsilon = 1e-13);
        assert_relative_eq!(g1, 1.5 * (a / (0.6 - 0.02 * 0.3)).ln(), epsilon = 1e-13);
        let (m0, m, m1) = d.midlines(5.0).unwrap();
        assert!(g0 < m0 && m0 < m && m < m1 && m1 < g1);
        // level-set identities
        let p = d.params();
        assert_relative_eq!(p.source_u(g0), -0.02 * 0.2, epsilon = 1e-13);
        assert_relative_eq!(p.source_u(g1), 0.02 * 0.3, epsilon = 1e-13);
    }
}
