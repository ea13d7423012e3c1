use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    /// Crank-Nicolson with two implicit Euler half-steps at start-up.
    CrankNicolson,
}

/// Uniform grid on `[0, T] x [x_min, x_max]` in `(tau, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of spatial intervals; there are `n_x + 1` nodes.
    pub n_x: usize,
    /// Number of time steps.
    pub n_tau: usize,
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, n_tau: usize, horizon: f64) -> Self {
        Self {
            x_min,
            x_max,
            n_x,
            n_tau,
            horizon,
            scheme: Scheme::ImplicitEuler,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n_x < 64 || self.n_tau < 64 {
            return Err(Error::InvalidGrid(format!(
                "need n_x >= 64 and n_tau >= 64, got {} x {}",
                self.n_x, self.n_tau
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn dtau(&self) -> f64 {
        self.horizon / self.n_tau as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n_x {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }

    pub fn tau(&self, k: usize) -> f64 {
        if k == self.n_tau {
            self.horizon
        } else {
            k as f64 * self.dtau()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.n_x).map(|j| self.x(j)).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..=self.n_tau).map(|k| self.tau(k)).collect()
    }

    pub fn n_nodes(&self) -> usize {
        (self.n_x + 1) * (self.n_tau + 1)
    }

    /// Same domain with both counts multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            n_x: self.n_x * factor,
            n_tau: self.n_tau * factor,
            ..*self
        }
    }

    /// Same domain with the time step halved `times` times.
    pub fn with_n_tau(&self, n_tau: usize) -> Self {
        Self { n_tau, ..*self }
    }

    /// Largest index with `x(j) <= x`, clamped to the grid.
    pub fn locate(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.dx()).floor();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_x - 1)
        }
    }
}
