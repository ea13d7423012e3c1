//! Thomas algorithm. Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`;
//! `sub[0]` and `sup[n-1]` are ignored.

/// Solves the system into `out`, using `scratch` (length `n`) for the modified upper diagonal.
pub fn solve_into(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n && out.len() == n && scratch.len() >= n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    scratch[0] = sup[0] / denom;
    out[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * scratch[i - 1];
        scratch[i] = sup[i] / denom;
        out[i] = (rhs[i] - sub[i] * out[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
}

pub fn solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    solve_into(sub, diag, sup, rhs, &mut out, &mut scratch);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    proptest! {
        #[test]
        fn solves_diagonally_dominant_systems(
            rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 1..40)
        ) {
            let n = rows.len();
            let sub: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let sup: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + sub[i].abs() + sup[i].abs()).collect();
            let rhs: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let x = solve(&sub, &diag, &sup, &rhs);
            let back = apply(&sub, &diag, &sup, &x);
            for i in 0..n {
                prop_assert!((back[i] - rhs[i]).abs() < 1e-12);
            }
        }
    }
}
