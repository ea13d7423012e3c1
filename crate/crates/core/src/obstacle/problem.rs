//! The discrete double-obstacle problem: operator coefficients, source,
//! obstacles and Dirichlet data, plus the linear algebra of one time step.

use crate::error::{Error, Result};
use crate::model::DerivedSchedule;
use crate::obstacle::grid::{GridSpec, Scheme};

/// Obstacle and boundary values at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone)]
enum Data {
    Model {
        derived: Box<DerivedSchedule>,
        n_eff: f64,
    },
    /// Infinite obstacles and zero Dirichlet data.
    Free,
}

/// `d_tau v - L v = U` between `lower(tau)` and `upper(tau)` with
/// `L = a d_xx + b d_x - c`.
#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    pub grid: GridSpec,
    diffusion: f64,
    drift: f64,
    reaction: f64,
    source: Vec<f64>,
    data: Data,
}

impl ObstacleProblem {
    /// The transformed problem for `derived` on `grid`, with the lower
    /// boundary data built from the half-width `n_eff`.
    pub fn new(derived: &DerivedSchedule, grid: GridSpec, n_eff: f64) -> Result<Self> {
        grid.validate()?;
        let p = derived.params();
        if (grid.horizon - p.horizon).abs() > 1e-12 * p.horizon {
            return Err(Error::InvalidGrid(format!(
                "grid horizon {} differs from model horizon {}",
                grid.horizon, p.horizon
            )));
        }
        let theta = p.theta();
        let source = grid.xs().into_iter().map(|x| p.source_u(x)).collect();
        Ok(Self {
            grid,
            diffusion: theta * theta / 2.0,
            drift: p.beta - p.r + theta * theta / 2.0,
            reaction: p.r,
            source,
            data: Data::Model {
                derived: Box::new(derived.clone()),
                n_eff,
            },
        })
    }

    /// Same operator and source with obstacles removed.
    pub fn unconstrained(&self) -> Self {
        Self {
            data: Data::Free,
            ..self.clone()
        }
    }

    pub fn bounds(&self, tau: f64) -> Bounds {
        match &self.data {
            Data::Model { derived, n_eff } => {
                let (left, right) = derived.boundary_data_rho(*n_eff, tau);
                Bounds {
                    lower: -derived.psi(0, tau),
                    upper: derived.psi(1, tau),
                    left,
                    right,
                }
            }
            Data::Free => Bounds {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                left: 0.0,
                right: 0.0,
            },
        }
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Stencil `(lo, mid, hi)` of the discrete operator at interior nodes.
    pub fn stencil(&self) -> (f64, f64, f64) {
        let dx = self.grid.dx();
        let a = self.diffusion / (dx * dx);
        let b = self.drift / (2.0 * dx);
        (a - b, -2.0 * a - self.reaction, a + b)
    }

    /// `(L v)_j` at interior nodes; zero at the two ends.
    pub fn apply_operator(&self, v: &[f64], out: &mut [f64]) {
        let (lo, mid, hi) = self.stencil();
        let n = v.len() - 1;
        out[0] = 0.0;
        out[n] = 0.0;
        for j in 1..n {
            out[j] = lo * v[j - 1] + mid * v[j] + hi * v[j + 1];
        }
    }

    /// Sub-steps `(dt, theta, tau_end)` taking level `k` to `k + 1`.
    pub fn substeps(&self, k: usize) -> Vec<(f64, f64, f64)> {
        let dt = self.grid.dtau();
        let tau_end = self.grid.tau(k + 1);
        match self.grid.scheme {
            Scheme::ImplicitEuler => vec![(dt, 1.0, tau_end)],
            Scheme::CrankNicolson if k == 0 => {
                let half = self.grid.tau(k) + 0.5 * dt;
                vec![(0.5 * dt, 1.0, half), (0.5 * dt, 1.0, tau_end)]
            }
            Scheme::CrankNicolson => vec![(dt, 0.5, tau_end)],
        }
    }

    /// Builds the linear step `A v_new = rhs`, `A = I - theta dt L`, with
    /// Dirichlet rows at both ends.
    pub fn assemble(&self, v_old: &[f64], dt: f64, theta: f64, bounds: &Bounds, sys: &mut StepSystem) {
        let n = v_old.len() - 1;
        let (lo, mid, hi) = self.stencil();
        self.apply_operator(v_old, &mut sys.scratch);
        for j in 1..n {
            sys.sub[j] = -theta * dt * lo;
            sys.diag[j] = 1.0 - theta * dt * mid;
            sys.sup[j] = -theta * dt * hi;
            sys.rhs[j] = v_old[j] + (1.0 - theta) * dt * sys.scratch[j] + dt * self.source[j];
        }
        sys.sub[0] = 0.0;
        sys.diag[0] = 1.0;
        sys.sup[0] = 0.0;
        sys.rhs[0] = bounds.left;
        sys.sub[n] = 0.0;
        sys.diag[n] = 1.0;
        sys.sup[n] = 0.0;
        sys.rhs[n] = bounds.right;
    }
}

/// Work arrays for one tridiagonal time step.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
    pub scratch: Vec<f64>,
}

impl StepSystem {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            sub: vec![0.0; n_nodes],
            diag: vec![0.0; n_nodes],
            sup: vec![0.0; n_nodes],
            rhs: vec![0.0; n_nodes],
            scratch: vec![0.0; n_nodes],
        }
    }
}
