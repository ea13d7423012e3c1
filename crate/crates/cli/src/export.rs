//! Plot-ready tables and JSON reports. Every float is written with 17
//! significant digits so that the files round-trip exactly and compare
//! byte-for-byte across runs.

use std::fmt::Write as _;
use std::io;

use jobswitch_core::dual::DualSolution;
use jobswitch_core::free_boundary::FreeBoundaryCurve;
use jobswitch_core::model::Job;
use jobswitch_core::obstacle::{GridSpec, SolutionField};
use serde::Serialize;

/// `x` in scientific notation with 16 digits after the point; empty for NaN.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// Compact JSON whose floats use the same 17-digit notation as the CSV files.
struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17);
    value.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    out
}

/// One row per time level in increasing calendar time. The upper boundary is
/// only written where it is live (`t < t1`).
pub fn boundaries_csv(lower: &FreeBoundaryCurve, upper: &FreeBoundaryCurve, grid: GridSpec, t1: f64) -> String {
    let mut s = String::from("t,S0,S1,s0_valid,s1_valid\n");
    for k in (0..=grid.n_tau).rev() {
        let t = grid.horizon - grid.tau(k);
        let s0 = lower.at_level(k).map(f64::exp);
        let s1 = upper.at_level(k).map(f64::exp).filter(|_| t < t1);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            float(t),
            opt(s0),
            opt(s1),
            s0.is_some() as u8,
            s1.is_some() as u8
        );
    }
    s
}

/// `v` on every node, one column per solved field.
pub fn value_surface_csv(fields: &[&SolutionField]) -> String {
    let Some(first) = fields.first() else {
        return String::new();
    };
    let g = first.grid;
    let mut s = String::from("tau,x,y");
    for f in fields {
        let _ = write!(s, ",v_{}", f.method.name());
    }
    s.push('\n');
    for k in 0..=g.n_tau {
        let tau = g.tau(k);
        for j in 0..=g.n_x {
            let x = g.x(j);
            let _ = write!(s, "{},{},{}", float(tau), float(x), float(x.exp()));
            for f in fields {
                let _ = write!(s, ",{}", float(f.v(k, j)));
            }
            s.push('\n');
        }
    }
    s
}

/// `J(j, y)`, `d_y J` and the smoothed wealth `-d_y J` at `t = 0`.
pub fn dual_values_csv(sol: &DualSolution) -> String {
    let g = sol.grid();
    let k = g.n_tau;
    let mut s = String::from("y,J0,J1,dJ0,dJ1,w0,w1\n");
    let raw = [sol.wealth_nodes(Job::High), sol.wealth_nodes(Job::Low)];
    let env = [sol.wealth_envelope(Job::High), sol.wealth_envelope(Job::Low)];
    for j in 0..=g.n_x {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            float(g.x(j).exp()),
            float(sol.p(Job::High, k, j)),
            float(sol.p(Job::Low, k, j)),
            float(-raw[0][j]),
            float(-raw[1][j]),
            float(env[0][j]),
            float(env[1][j])
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        assert_eq!(float(f64::NAN), "");
        let x = 1.0 / 3.0;
        assert_eq!(float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_uses_the_same_notation() {
        #[derive(Serialize)]
        struct R {
            a: f64,
            b: Option<f64>,
            n: usize,
        }
        let text = String::from_utf8(to_json(&R { a: 0.5, b: None, n: 3 })).unwrap();
        assert_eq!(text, "{\"a\":5.0000000000000000e-1,\"b\":null,\"n\":3}\n");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
    }
}
