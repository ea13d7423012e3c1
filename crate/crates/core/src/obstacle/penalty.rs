use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DerivedSchedule;

/// Penalty shapes for the lower and upper obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub epsilon: f64,
    /// `beta0(0)`.
    pub c0: f64,
    /// `-beta1(0)`.
    pub c1: f64,
    /// Half-width entering `c0` through `e^{n_eff/gamma1}`.
    pub n_eff: f64,
}

impl PenaltyConfig {
    /// Penalty for a domain whose left edge is `x_min`. The lower penalty must
    /// dominate `A e^{-x/gamma1}` over the domain, whose largest value sits at
    /// `x_min`, so `n_eff = -x_min`.
    pub fn for_domain(derived: &DerivedSchedule, x_min: f64, epsilon: f64) -> Self {
        let p = derived.params();
        let q = derived.costs().q();
        let n_eff = -x_min;
        Self {
            epsilon,
            c0: p.leisure_gap() * (n_eff / p.gamma1()).exp() + q,
            c1: p.income_gap() + q,
            n_eff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if !(self.c0 > 0.0 && self.c1 > 0.0 && self.c0.is_finite() && self.c1.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c0",
                reason: format!(
                    "penalty magnitudes must be positive, got c0 = {}, c1 = {}",
                    self.c0, self.c1
                ),
            });
        }
        Ok(())
    }

    /// Lower penalty as a function of `lambda = v + psi0`.
    pub fn beta0(&self, lambda: f64) -> f64 {
        let e = self.epsilon;
        if lambda >= e {
            0.0
        } else if lambda >= 0.0 {
            let s = (e - lambda) / e;
            self.c0 * s * s
        } else {
            self.c0 - 2.0 * self.c0 / e * lambda
        }
    }

    pub fn dbeta0(&self, lambda: f64) -> f64 {
        let e = self.epsilon;
        if lambda >= e {
            0.0
        } else if lambda >= 0.0 {
            -2.0 * self.c0 * (e - lambda) / (e * e)
        } else {
            -2.0 * self.c0 / e
        }
    }

    /// Upper penalty as a function of `lambda = v - psi1`.
    pub fn beta1(&self, lambda: f64) -> f64 {
        let e = self.epsilon;
        if lambda <= -e {
            0.0
        } else if lambda <= 0.0 {
            let s = (lambda + e) / e;
            -self.c1 * s * s
        } else {
            -self.c1 - 2.0 * self.c1 / e * lambda
        }
    }

    pub fn dbeta1(&self, lambda: f64) -> f64 {
        let e = self.epsilon;
        if lambda <= -e {
            0.0
        } else if lambda <= 0.0 {
            -2.0 * self.c1 * (lambda + e) / (e * e)
        } else {
            -2.0 * self.c1 / e
        }
    }
}

pub fn penalty_beta0(lambda: f64, cfg: &PenaltyConfig) -> f64 {
    cfg.beta0(lambda)
}

pub fn penalty_beta1(lambda: f64, cfg: &PenaltyConfig) -> f64 {
    cfg.beta1(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> PenaltyConfig {
        PenaltyConfig {
            epsilon: 1e-3,
            c0: 12.0,
            c1: 2.5,
            n_eff: 3.0,
        }
    }

    #[test]
    fn anchor_values() {
        let c = cfg();
        let e = c.epsilon;
        assert_eq!(c.beta0(e), 0.0);
        assert_eq!(c.beta0(0.0), c.c0);
        assert_relative_eq!(c.beta0(e / 2.0), c.c0 / 4.0, epsilon = 1e-12);
        assert_eq!(c.beta1(-e), 0.0);
        assert_eq!(c.beta1(0.0), -c.c1);
        assert_relative_eq!(c.beta1(-e / 2.0), -c.c1 / 4.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn shape_conditions(a in -0.01f64..0.01, b in -0.01f64..0.01) {
            let c = cfg();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.beta0(lo) >= 0.0);
            prop_assert!(c.beta1(lo) <= 0.0);
            prop_assert!(c.beta0(lo) >= c.beta0(hi));
            prop_assert!(c.beta1(lo) >= c.beta1(hi));
            prop_assert!(c.dbeta0(a) <= 0.0 && c.dbeta1(a) <= 0.0);
        }

        #[test]
        fn derivatives_match_differences(l in -0.002f64..0.002) {
            let c = cfg();
            let h = 1e-9;
            let fd0 = (c.beta0(l + h) - c.beta0(l - h)) / (2.0 * h);
            let fd1 = (c.beta1(l + h) - c.beta1(l - h)) / (2.0 * h);
            prop_assert!((fd0 - c.dbeta0(l)).abs() <= 1e-3 * (1.0 + c.dbeta0(l).abs()));
            prop_assert!((fd1 - c.dbeta1(l)).abs() <= 1e-3 * (1.0 + c.dbeta1(l).abs()));
        }
    }
}
