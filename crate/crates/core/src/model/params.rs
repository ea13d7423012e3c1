//! Market, preference and job primitives together with the closed-form
//! quantities derived from them (market price of risk, effective risk
//! aversion, Merton constant, dual utilities).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model primitives. Rates are per year, incomes are wealth per year.
/// Missing fields deserialize to the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Risk-free rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Subjective discount rate.
    pub beta: f64,
    /// Relative risk aversion.
    pub gamma: f64,
    /// Cobb-Douglas weight on consumption.
    pub alpha: f64,
    /// Mandatory retirement date.
    pub horizon: f64,
    /// Income of the high-income job.
    pub eps0: f64,
    /// Income of the low-income job.
    pub eps1: f64,
    /// Leisure in the high-income job.
    pub l0: f64,
    /// Leisure in the low-income job.
    pub l1: f64,
    /// Leisure after retirement.
    pub lbar: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelParams {
    /// The reference configuration used throughout the tests and the default run config.
    pub fn reference() -> Self {
        Self {
            r: 0.02,
            mu: 0.07,
            sigma: 0.2,
            beta: 0.03,
            gamma: 2.0,
            alpha: 0.5,
            horizon: 10.0,
            eps0: 1.0,
            eps1: 0.4,
            l0: 0.4,
            l1: 0.7,
            lbar: 1.0,
        }
    }

    /// Checks every structural restriction on the primitives. The Merton
    /// constant is deliberately not checked here; it is reported by the
    /// assumption gate instead.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r", self.r),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("horizon", self.horizon),
            ("eps0", self.eps0),
            ("eps1", self.eps1),
            ("l0", self.l0),
            ("l1", self.l1),
            ("lbar", self.lbar),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(invalid(name, format!("must be finite, got {value}")));
            }
        }
        if self.horizon <= 0.0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.r <= 0.0 {
            return Err(invalid("r", "must be positive"));
        }
        if self.sigma <= 0.0 {
            return Err(invalid("sigma", "must be positive"));
        }
        if self.beta <= 0.0 {
            return Err(invalid("beta", "must be positive"));
        }
        if self.mu == self.r {
            return Err(invalid("mu", "must differ from r"));
        }
        if self.gamma <= 0.0 || self.gamma == 1.0 {
            return Err(invalid(
                "gamma",
                format!("must be positive and != 1, got {}", self.gamma),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.eps1 >= 0.0 && self.eps1 < self.eps0) {
            return Err(invalid("eps1", "requires 0 <= eps1 < eps0"));
        }
        if !(self.l0 > 0.0 && self.l0 < self.l1 && self.l1 < self.lbar) {
            return Err(invalid("l1", "requires 0 < l0 < l1 < lbar"));
        }
        let g1 = self.gamma1();
        if g1 <= 0.0 || (g1 - 1.0).abs() < 1e-12 {
            return Err(invalid(
                "alpha",
                format!("effective risk aversion {g1} must be positive and != 1"),
            ));
        }
        Ok(())
    }

    /// Market price of risk.
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// Effective risk aversion of the Cobb-Douglas aggregate.
    pub fn gamma1(&self) -> f64 {
        1.0 - self.alpha * (1.0 - self.gamma)
    }

    /// Merton constant; must be positive for the post-retirement problem to be well posed.
    pub fn k1(&self) -> f64 {
        let g1 = self.gamma1();
        let theta = self.theta();
        self.r + (self.beta - self.r) / g1 + (g1 - 1.0) / (g1 * g1) * theta * theta / 2.0
    }

    /// Exponent `(gamma1 - gamma) / gamma1` applied to leisure.
    pub fn leisure_exponent(&self) -> f64 {
        let g1 = self.gamma1();
        (g1 - self.gamma) / g1
    }

    /// Exponent of `y` in the dual utility, `-(1 - gamma1) / gamma1`.
    pub fn dual_power(&self) -> f64 {
        let g1 = self.gamma1();
        (g1 - 1.0) / g1
    }

    /// `gamma1/(1-gamma1) * l^((gamma1-gamma)/gamma1)`, the coefficient of the dual utility.
    pub fn dual_coefficient(&self, leisure: f64) -> f64 {
        let g1 = self.gamma1();
        g1 / (1.0 - g1) * leisure.powf(self.leisure_exponent())
    }

    /// Coefficient `A` multiplying `e^{-x/gamma1}` in the transformed source term.
    /// Positive whenever `l0 < l1`.
    pub fn leisure_gap(&self) -> f64 {
        self.dual_coefficient(self.l1) - self.dual_coefficient(self.l0)
    }

    /// Income gap `eps0 - eps1`.
    pub fn income_gap(&self) -> f64 {
        self.eps0 - self.eps1
    }

    pub fn income(&self, job: Job) -> f64 {
        match job {
            Job::High => self.eps0,
            Job::Low => self.eps1,
        }
    }

    pub fn leisure(&self, job: Job) -> f64 {
        match job {
            Job::High => self.l0,
            Job::Low => self.l1,
        }
    }

    /// Cobb-Douglas utility `c^{1-gamma1} l^{gamma1-gamma} / (1-gamma1)`.
    pub fn utility(&self, consumption: f64, leisure: f64) -> f64 {
        let g1 = self.gamma1();
        consumption.powf(1.0 - g1) * leisure.powf(g1 - self.gamma) / (1.0 - g1)
    }

    /// Optimal consumption at dual price `y` for the given leisure level.
    pub fn consumption(&self, leisure: f64, y: f64) -> f64 {
        leisure.powf(self.leisure_exponent()) * y.powf(-1.0 / self.gamma1())
    }

    /// Convex dual of the utility, `sup_c u(c, l) - y c`.
    pub fn dual_utility(&self, leisure: f64, y: f64) -> f64 {
        self.dual_coefficient(leisure) * y.powf(self.dual_power())
    }

    /// Source term of the transformed difference problem,
    /// `(eps0 - eps1) - A e^{-x/gamma1}`.
    pub fn source_u(&self, x: f64) -> f64 {
        self.income_gap() - self.leisure_gap() * (-x / self.gamma1()).exp()
    }

    /// Derivative of [`Self::source_u`]; strictly positive.
    pub fn source_u_prime(&self, x: f64) -> f64 {
        self.leisure_gap() / self.gamma1() * (-x / self.gamma1()).exp()
    }

    /// Source term in original coordinates, `u0~(y) - u1~(y) + (eps0 - eps1) y`.
    pub fn source_u_original(&self, y: f64) -> f64 {
        self.dual_utility(self.l0, y) - self.dual_utility(self.l1, y) + self.income_gap() * y
    }

    /// Post-retirement dual value `J_R(y)`.
    pub fn merton_jr(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::OutOfRange(format!("J_R requires y > 0, got {y}")));
        }
        Ok(self.dual_utility(self.lbar, y) / self.k1())
    }

    /// Derivative of `J_R`; `-J_R'(y)` is the wealth required at retirement.
    pub fn merton_jr_prime(&self, y: f64) -> f64 {
        self.dual_power() * self.dual_utility(self.lbar, y) / (self.k1() * y)
    }

    /// Dual value of holding `job` forever on the remaining time-to-retirement
    /// `tau`, with no switching: the expectation of the running dual payoff plus
    /// the discounted retirement value, in closed form.
    pub fn no_switch_value(&self, job: Job, tau: f64, y: f64) -> f64 {
        let k1 = self.k1();
        let running = self.dual_utility(self.leisure(job), y) * (1.0 - (-k1 * tau).exp()) / k1;
        let income = self.income(job) * y * (1.0 - (-self.r * tau).exp()) / self.r;
        let terminal = (-k1 * tau).exp() * self.dual_utility(self.lbar, y) / k1;
        running + income + terminal
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Job index. `High` is the high-income, low-leisure job (index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Job {
    High,
    Low,
}

impl Job {
    pub fn index(self) -> usize {
        match self {
            Job::High => 0,
            Job::Low => 1,
        }
    }

    pub fn other(self) -> Job {
        match self {
            Job::High => Job::Low,
            Job::Low => Job::High,
        }
    }

    pub fn from_index(j: usize) -> Result<Job> {
        match j {
            0 => Ok(Job::High),
            1 => Ok(Job::Low),
            _ => Err(Error::OutOfRange(format!("job index must be 0 or 1, got {j}"))),
        }
    }
}

impl From<Job> for u8 {
    fn from(j: Job) -> u8 {
        j.index() as u8
    }
}

impl TryFrom<u8> for Job {
    type Error = Error;
    fn try_from(v: u8) -> Result<Job> {
        Job::from_index(v as usize)
    }
}
