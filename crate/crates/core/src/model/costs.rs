//! Switching-cost functions of calendar time and the schedule pairing them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A switching cost `phi(t)` drawn from a closed family with exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    Constant {
        value: f64,
    },
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `base + amplitude * exp(-rate * t)`; `rate` may be negative.
    ExpDecay {
        base: f64,
        amplitude: f64,
        rate: f64,
    },
    CubicSpline(CubicSpline),
}

impl CostFn {
    pub fn constant(value: f64) -> Self {
        CostFn::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            CostFn::Constant { value } => *value,
            CostFn::Affine { intercept, slope } => intercept + slope * t,
            CostFn::ExpDecay { base, amplitude, rate } => base + amplitude * (-rate * t).exp(),
            CostFn::CubicSpline(s) => s.value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            CostFn::Constant { .. } => 0.0,
            CostFn::Affine { slope, .. } => *slope,
            CostFn::ExpDecay { amplitude, rate, .. } => -rate * amplitude * (-rate * t).exp(),
            CostFn::CubicSpline(s) => s.derivative(t),
        }
    }

    /// Second derivative where it exists (spline knots take the left-continuous value).
    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            CostFn::Constant { .. } | CostFn::Affine { .. } => 0.0,
            CostFn::ExpDecay { amplitude, rate, .. } => rate * rate * amplitude * (-rate * t).exp(),
            CostFn::CubicSpline(s) => s.second_derivative(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CostFn::Constant { .. } => true,
            CostFn::Affine { slope, .. } => *slope == 0.0,
            CostFn::ExpDecay { amplitude, rate, .. } => *amplitude == 0.0 || *rate == 0.0,
            CostFn::CubicSpline(s) => s.values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Interior knots in `[0, horizon]`; empty for the analytic kinds.
    pub fn knots(&self) -> &[f64] {
        match self {
            CostFn::CubicSpline(s) => &s.knots,
            _ => &[],
        }
    }

    fn check(&self, horizon: f64) -> Result<()> {
        let finite = match self {
            CostFn::Constant { value } => value.is_finite(),
            CostFn::Affine { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            CostFn::ExpDecay { base, amplitude, rate } => base.is_finite() && amplitude.is_finite() && rate.is_finite(),
            CostFn::CubicSpline(s) => {
                let (a, b) = (s.knots[0], s.knots[s.knots.len() - 1]);
                if a > 0.0 || b < horizon {
                    return Err(Error::InvalidCost(format!(
                        "spline knots span [{a}, {b}] but must cover [0, {horizon}]"
                    )));
                }
                true
            }
        };
        if !finite {
            return Err(Error::InvalidCost(format!("non-finite coefficient in {self:?}")));
        }
        Ok(())
    }

    /// `sup|phi| + sup|phi'| + sup|phi''|` over `[0, horizon]`, the last term
    /// being the Lipschitz constant of `phi'`.
    pub fn c11_norm(&self, horizon: f64) -> f64 {
        match self {
            CostFn::CubicSpline(s) => s.c11_norm(0.0, horizon),
            _ => {
                // every analytic kind is monotone in t together with its derivatives
                let ends = [0.0, horizon];
                let sup = |f: &dyn Fn(f64) -> f64| ends.iter().map(|&t| f(t).abs()).fold(0.0, f64::max);
                sup(&|t| self.value(t)) + sup(&|t| self.derivative(t)) + sup(&|t| self.second_derivative(t))
            }
        }
    }
}

/// Serialized form of a natural cubic spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplineSpec {
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// Natural cubic spline through `(knots[i], values[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineSpec", into = "SplineSpec")]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl TryFrom<SplineSpec> for CubicSpline {
    type Error = Error;
    fn try_from(spec: SplineSpec) -> Result<Self> {
        CubicSpline::new(spec.knots, spec.values)
    }
}

impl From<CubicSpline> for SplineSpec {
    fn from(s: CubicSpline) -> Self {
        SplineSpec {
            knots: s.knots,
            values: s.values,
        }
    }
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::InvalidCost(format!(
                "spline needs at least two knots and one value per knot ({} knots, {} values)",
                n,
                values.len()
            )));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCost("spline knots and values must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCost("spline knots must be strictly increasing".into()));
        }
        let moments = natural_moments(&knots, &values);
        Ok(Self { knots, values, moments })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn coeffs(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (h, a, b)
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (h, a, b) = self.coeffs(i, t);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        a * self.values[i] + b * self.values[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (h, a, b) = self.coeffs(i, t);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        (self.values[i + 1] - self.values[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
            + (3.0 * b * b - 1.0) * h * m1 / 6.0
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (_, a, b) = self.coeffs(i, t);
        a * self.moments[i] + b * self.moments[i + 1]
    }

    /// Exact sup norms on `[lo, hi]`: `phi` peaks at segment ends or at roots
    /// of the quadratic `phi'`, `phi'` at segment ends or where the linear
    /// `phi''` vanishes, `phi''` at knots.
    fn c11_norm(&self, lo: f64, hi: f64) -> f64 {
        let mut candidates = vec![lo, hi];
        for i in 0..self.knots.len() - 1 {
            let (k0, k1) = (self.knots[i].max(lo), self.knots[i + 1].min(hi));
            if k0 >= k1 {
                continue;
            }
            candidates.push(k0);
            candidates.push(k1);
            // phi'' = 0 inside the segment
            let (m0, m1) = (self.moments[i], self.moments[i + 1]);
            if m0 != m1 {
                let s = m0 / (m0 - m1);
                candidates.push(self.knots[i] + s * (self.knots[i + 1] - self.knots[i]));
            }
            // roots of phi' on the segment, located by a fine scan and bisection
            let n = 64;
            let mut prev_t = k0;
            let mut prev_d = self.derivative(k0);
            for step in 1..=n {
                let t = k0 + (k1 - k0) * step as f64 / n as f64;
                let d = self.derivative(t);
                if prev_d * d < 0.0 {
                    let (mut a, mut b) = (prev_t, t);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if self.derivative(a) * self.derivative(m) <= 0.0 {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    candidates.push(0.5 * (a + b));
                }
                prev_t = t;
                prev_d = d;
            }
        }
        candidates.retain(|&t| t >= lo && t <= hi);
        let sup = |f: &dyn Fn(f64) -> f64| candidates.iter().map(|&t| f(t).abs()).fold(0.0, f64::max);
        let sup_dd = self
            .knots
            .iter()
            .zip(&self.moments)
            .filter(|(k, _)| **k >= lo && **k <= hi)
            .map(|(_, m)| m.abs())
            .fold(
                self.second_derivative(lo).abs().max(self.second_derivative(hi).abs()),
                f64::max,
            );
        sup(&|t| self.value(t)) + sup(&|t| self.derivative(t)) + sup_dd
    }
}

/// Second derivatives of the natural cubic spline (tridiagonal solve).
fn natural_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        sup[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    let sol = crate::obstacle::tridiag::solve(&sub, &diag, &sup, &rhs);
    m[1..n - 1].copy_from_slice(&sol);
    m
}

/// The pair of switching costs `phi0` (high to low income job) and `phi1`
/// (low to high), with the derived `C^{1,1}` bound `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    phi: [CostFn; 2],
    horizon: f64,
    q: f64,
}

impl CostSchedule {
    pub fn new(phi0: CostFn, phi1: CostFn, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive and finite, got {horizon}"),
            });
        }
        phi0.check(horizon)?;
        phi1.check(horizon)?;
        let q = phi0.c11_norm(horizon) + phi1.c11_norm(horizon);
        Ok(Self {
            phi: [phi0, phi1],
            horizon,
            q,
        })
    }

    pub fn constant(phi0: f64, phi1: f64, horizon: f64) -> Result<Self> {
        Self::new(CostFn::constant(phi0), CostFn::constant(phi1), horizon)
    }

    pub fn phi(&self, i: usize) -> &CostFn {
        &self.phi[i]
    }

    pub fn phi0(&self, t: f64) -> f64 {
        self.phi[0].value(t)
    }

    pub fn phi1(&self, t: f64) -> f64 {
        self.phi[1].value(t)
    }

    pub fn dphi0(&self, t: f64) -> f64 {
        self.phi[0].derivative(t)
    }

    pub fn dphi1(&self, t: f64) -> f64 {
        self.phi[1].derivative(t)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Bound on `||phi0||_{C^{1,1}} + ||phi1||_{C^{1,1}}`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_constant(&self) -> bool {
        self.phi.iter().all(CostFn::is_constant)
    }

    /// Uniform grid of `n` points on `[0, T]` merged with all spline knots inside it.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let mut ts: Vec<f64> = (0..n).map(|k| self.horizon * k as f64 / (n - 1) as f64).collect();
        for f in &self.phi {
            ts.extend(f.knots().iter().copied().filter(|&k| (0.0..=self.horizon).contains(&k)));
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spline_reproduces_knots_and_linear_data() {
        let s = CubicSpline::new(vec![0.0, 1.0, 2.5, 4.0], vec![1.0, 2.0, 3.5, 5.0]).unwrap();
        for (k, v) in [(0.0, 1.0), (1.0, 2.0), (2.5, 3.5), (4.0, 5.0)] {
            assert_relative_eq!(s.value(k), v, epsilon = 1e-14);
        }
        // linear data gives a linear spline
        assert_relative_eq!(s.value(1.7), 2.7, epsilon = 1e-13);
        assert_relative_eq!(s.derivative(3.1), 1.0, epsilon = 1e-13);
        assert_relative_eq!(s.second_derivative(0.3), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn spline_derivatives_match_finite_differences() {
        let s = CubicSpline::new(vec![0.0, 2.0, 5.0, 7.0, 10.0], vec![0.3, 0.25, 0.4, 0.2, 0.3]).unwrap();
        let h = 1e-6;
        for &t in &[0.5, 1.9, 3.3, 6.0, 9.2] {
            let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
            assert_relative_eq!(s.derivative(t), fd, epsilon = 1e-7);
            let fd2 = (s.derivative(t + h) - s.derivative(t - h)) / (2.0 * h);
            assert_relative_eq!(s.second_derivative(t), fd2, epsilon = 1e-6);
        }
        // natural end conditions
        assert_relative_eq!(s.second_derivative(0.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(s.second_derivative(10.0), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn spline_norm_dominates_dense_sample() {
        let s = CubicSpline::new(vec![0.0, 2.0, 5.0, 7.0, 10.0], vec![0.3, 0.25, 0.4, 0.2, 0.3]).unwrap();
        let f = CostFn::CubicSpline(s);
        let norm = f.c11_norm(10.0);
        let ts: Vec<f64> = (0..=20_000).map(|k| k as f64 * 10.0 / 20_000.0).collect();
        let m0 = ts.iter().map(|&t| f.value(t).abs()).fold(0.0, f64::max);
        let m1 = ts.iter().map(|&t| f.derivative(t).abs()).fold(0.0, f64::max);
        let m2 = ts.iter().map(|&t| f.second_derivative(t).abs()).fold(0.0, f64::max);
        assert!(norm >= m0 + m1 + m2 - 1e-12);
        assert!(norm <= m0 + m1 + m2 + 1e-6);
    }

    #[test]
    fn analytic_norms() {
        let f = CostFn::ExpDecay {
            base: 0.2,
            amplitude: 0.2,
            rate: 0.15,
        };
        let expected = 0.4 + 0.03 + 0.0045;
        assert_relative_eq!(f.c11_norm(10.0), expected, epsilon = 1e-14);
        let g = CostFn::Affine {
            intercept: 0.15,
            slope: 0.01,
        };
        assert_relative_eq!(g.c11_norm(10.0), 0.25 + 0.01, epsilon = 1e-14);
    }

    #[test]
    fn descriptor_round_trip() {
        let spline = CostFn::CubicSpline(CubicSpline::new(vec![0.0, 5.0, 10.0], vec![0.3, 0.2, 0.3]).unwrap());
        for f in [
            CostFn::constant(0.2),
            CostFn::Affine {
                intercept: 0.1,
                slope: 0.01,
            },
            CostFn::ExpDecay {
                base: 0.2,
                amplitude: 0.1,
                rate: -0.02,
            },
            spline,
        ] {
            let s = serde_json::to_string(&f).unwrap();
            let back: CostFn = serde_json::from_str(&s).unwrap();
            assert_eq!(back, f);
        }
        let bad = r#"{"kind":"cubic_spline","knots":[0.0,0.0],"values":[1.0,2.0]}"#;
        assert!(serde_json::from_str::<CostFn>(bad).is_err());
    }

    #[test]
    fn short_spline_rejected_by_schedule() {
        let s = CubicSpline::new(vec![0.0, 5.0], vec![0.3, 0.2]).unwrap();
        let err = CostSchedule::new(CostFn::constant(0.2), CostFn::CubicSpline(s), 10.0).unwrap_err();
        assert!(matches!(err, Error::InvalidCost(_)));
    }

    #[test]
    fn sample_times_include_knots() {
        let s = CubicSpline::new(vec![0.0, 3.3333, 10.0], vec![0.3, 0.2, 0.3]).unwrap();
        let c = CostSchedule::new(CostFn::constant(0.2), CostFn::CubicSpline(s), 10.0).unwrap();
        let ts = c.sample_times(1000);
        assert!(ts.contains(&3.3333));
        assert_eq!(ts.first(), Some(&0.0));
        assert_eq!(ts.last(), Some(&10.0));
    }
}
