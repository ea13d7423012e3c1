//! Shape-preserving interpolation and isotonic regression on uniform grids.

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes)
/// through `(x0 + i h, ys[i])`.
#[derive(Debug, Clone)]
pub struct Pchip {
    x0: f64,
    h: f64,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(x0: f64, h: f64, ys: Vec<f64>) -> Self {
        let n = ys.len();
        assert!(n >= 2, "need at least two points");
        let deltas: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b) = (deltas[i - 1], deltas[i]);
            slopes[i] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
        }
        slopes[0] = end_slope(deltas[0], deltas.get(1).copied().unwrap_or(deltas[0]));
        slopes[n - 1] = end_slope(deltas[n - 2], if n > 2 { deltas[n - 3] } else { deltas[n - 2] });
        Self { x0, h, ys, slopes }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.h * (self.ys.len() - 1) as f64)
    }

    /// `None` outside the data range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (a, b) = self.domain();
        if !(x >= a && x <= b) {
            return None;
        }
        let n = self.ys.len();
        let i = (((x - self.x0) / self.h).floor() as usize).min(n - 2);
        let t = (x - (self.x0 + i as f64 * self.h)) / self.h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.ys[i] + h10 * self.h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * self.h * self.slopes[i + 1],
        )
    }
}

/// Three-point end slope, limited so it keeps the sign of the first secant.
fn end_slope(d0: f64, d1: f64) -> f64 {
    let s = (3.0 * d0 - d1) / 2.0;
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Least-squares nonincreasing fit (pool adjacent violators).
pub fn isotonic_decreasing(ys: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (m1, w1) = blocks[blocks.len() - 1];
            let (m0, w0) = blocks[blocks.len() - 2];
            if m0 >= m1 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((m0 * w0 as f64 + m1 * w1 as f64) / (w0 + w1) as f64, w0 + w1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, w)| std::iter::repeat_n(m, w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pchip_interpolates_nodes_and_cubics_are_close() {
        let h = 0.1;
        let ys: Vec<f64> = (0..=20).map(|i| (i as f64 * h).exp()).collect();
        let p = Pchip::new(0.0, h, ys.clone());
        for (i, y) in ys.iter().enumerate() {
            assert!((p.eval(i as f64 * h).unwrap() - y).abs() < 1e-14);
        }
        assert!((p.eval(1.234).unwrap() - 1.234f64.exp()).abs() < 1e-3);
        assert!(p.eval(-0.01).is_none());
        assert!(p.eval(2.01).is_none());
    }

    proptest! {
        #[test]
        fn pchip_preserves_monotone_data(steps in prop::collection::vec(0.0f64..1.0, 3..30), probe in 0.0f64..1.0) {
            let mut ys = vec![0.0];
            for s in &steps {
                ys.push(ys.last().unwrap() + s);
            }
            let n = ys.len();
            let p = Pchip::new(0.0, 1.0, ys);
            let xmax = (n - 1) as f64;
            let a = p.eval(probe * xmax).unwrap();
            let b = p.eval((probe * xmax + 0.37).min(xmax)).unwrap();
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn isotonic_is_nonincreasing_and_mean_preserving(ys in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let fit = isotonic_decreasing(&ys);
            prop_assert_eq!(fit.len(), ys.len());
            for w in fit.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            let s0: f64 = ys.iter().sum();
            let s1: f64 = fit.iter().sum();
            prop_assert!((s0 - s1).abs() < 1e-9);
        }
    }

    #[test]
    fn isotonic_keeps_sorted_input() {
        let ys = [5.0, 4.0, 4.0, 1.0];
        assert_eq!(isotonic_decreasing(&ys), ys.to_vec());
        assert_eq!(isotonic_decreasing(&[1.0, 3.0]), vec![2.0, 2.0]);
    }
}
