use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::grid::{GridSpec, Scheme};
use crate::obstacle::problem::ObstacleProblem;

/// How a field was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolveMethod {
    Penalized {
        epsilon: f64,
        c0: f64,
        c1: f64,
        n_eff: f64,
    },
    Lcp {
        omega: f64,
        tol: f64,
    },
    /// Built directly from values, e.g. in tests.
    External {
        tol: f64,
    },
}

impl SolveMethod {
    /// Accuracy scale of the method: `epsilon` or the complementarity tolerance.
    pub fn tolerance(&self) -> f64 {
        match *self {
            SolveMethod::Penalized { epsilon, .. } => epsilon,
            SolveMethod::Lcp { tol, .. } => tol,
            SolveMethod::External { tol } => tol,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Penalized { .. } => "penalized",
            SolveMethod::Lcp { .. } => "lcp",
            SolveMethod::External { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    /// Newton iterations or PSOR sweeps summed over all steps.
    pub total_iterations: usize,
    pub max_iterations: usize,
    /// Largest final Newton residual or PSOR change over all steps.
    pub max_final_error: f64,
    /// Largest distance outside `[-psi0, psi1]`.
    pub max_obstacle_violation: f64,
}

/// Value surface on the `(tau, x)` grid, row-major in `tau`.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub grid: GridSpec,
    pub method: SolveMethod,
    pub stats: SolveStats,
    /// Contact threshold `10 * max(epsilon, lcp_tol)`.
    pub threshold: f64,
    v: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    contact_lower: Vec<bool>,
    contact_upper: Vec<bool>,
    residual: Vec<f64>,
}

/// Contact threshold for a method tolerance.
pub fn contact_threshold(method_tol: f64) -> f64 {
    10.0 * method_tol
}

impl SolutionField {
    /// Wraps solved values, computing obstacle traces, contact flags and the
    /// discrete residual. Fails if a node lies within threshold of both obstacles.
    pub fn from_values(problem: &ObstacleProblem, method: SolveMethod, stats: SolveStats, v: Vec<f64>) -> Result<Self> {
        let grid = problem.grid;
        if v.len() != grid.n_nodes() {
            return Err(Error::Format(format!(
                "expected {} values, got {}",
                grid.n_nodes(),
                v.len()
            )));
        }
        let nx = grid.n_x + 1;
        let (lower, upper): (Vec<f64>, Vec<f64>) = grid
            .taus()
            .into_iter()
            .map(|t| {
                let b = problem.bounds(t);
                (b.lower, b.upper)
            })
            .unzip();
        let threshold = contact_threshold(method.tolerance());
        let mut contact_lower = vec![false; v.len()];
        let mut contact_upper = vec![false; v.len()];
        let mut violation: f64 = 0.0;
        for k in 0..=grid.n_tau {
            for j in 0..nx {
                let idx = k * nx + j;
                let gl = v[idx] - lower[k];
                let gu = upper[k] - v[idx];
                violation = violation.max(-gl).max(-gu);
                let (cl, cu) = (gl <= threshold, gu <= threshold);
                if cl && cu {
                    return Err(Error::ObstacleTie { step: k, node: j });
                }
                contact_lower[idx] = cl;
                contact_upper[idx] = cu;
            }
        }
        let residual = compute_residual(problem, &v);
        let mut stats = stats;
        stats.max_obstacle_violation = violation.max(0.0);
        Ok(Self {
            grid,
            method,
            stats,
            threshold,
            v,
            lower,
            upper,
            contact_lower,
            contact_upper,
            residual,
        })
    }

    fn idx(&self, k: usize, j: usize) -> usize {
        k * (self.grid.n_x + 1) + j
    }

    pub fn v(&self, k: usize, j: usize) -> f64 {
        self.v[self.idx(k, j)]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let nx = self.grid.n_x + 1;
        &self.v[k * nx..(k + 1) * nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// `-psi0(tau_k)`.
    pub fn lower(&self, k: usize) -> f64 {
        self.lower[k]
    }

    /// `psi1(tau_k)`.
    pub fn upper(&self, k: usize) -> f64 {
        self.upper[k]
    }

    pub fn contact_lower(&self, k: usize, j: usize) -> bool {
        self.contact_lower[self.idx(k, j)]
    }

    pub fn contact_upper(&self, k: usize, j: usize) -> bool {
        self.contact_upper[self.idx(k, j)]
    }

    pub fn in_contact(&self, k: usize, j: usize) -> bool {
        self.contact_lower(k, j) || self.contact_upper(k, j)
    }

    /// Discrete residual `D_tau v - L_h v - U` (scheme-weighted), zero on the
    /// first row and at the two boundary columns.
    pub fn residual(&self, k: usize, j: usize) -> f64 {
        self.residual[self.idx(k, j)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Linear interpolation of row `k` at `x`; `None` outside the grid.
    pub fn interpolate(&self, k: usize, x: f64) -> Option<f64> {
        let g = &self.grid;
        if !(x >= g.x_min && x <= g.x_max) {
            return None;
        }
        let j = g.locate(x);
        let s = (x - g.x(j)) / g.dx();
        Some((1.0 - s) * self.v(k, j) + s * self.v(k, j + 1))
    }

    /// Writes the binary cache: header (magic, version, grid, method,
    /// stats), then row-major `v`. Flags and residuals are rebuilt on load.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(CACHE_VERSION)?;
        let g = &self.grid;
        w.write_f64::<LittleEndian>(g.x_min)?;
        w.write_f64::<LittleEndian>(g.x_max)?;
        w.write_u64::<LittleEndian>(g.n_x as u64)?;
        w.write_u64::<LittleEndian>(g.n_tau as u64)?;
        w.write_f64::<LittleEndian>(g.horizon)?;
        w.write_u8(match g.scheme {
            Scheme::ImplicitEuler => 0,
            Scheme::CrankNicolson => 1,
        })?;
        let meta = serde_json::to_vec(&(self.method, self.stats)).map_err(|e| Error::Format(e.to_string()))?;
        w.write_u32::<LittleEndian>(meta.len() as u32)?;
        w.write_all(&meta)?;
        for &x in &self.v {
            w.write_f64::<LittleEndian>(x)?;
        }
        Ok(())
    }

    /// Reads a cache written by [`Self::write_binary`]. The problem supplies
    /// obstacles and source; its grid must match the stored one exactly.
    pub fn read_binary<R: Read>(mut r: R, problem: &ObstacleProblem) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a field cache".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "cache version {version}, expected {CACHE_VERSION}"
            )));
        }
        let grid = GridSpec {
            x_min: r.read_f64::<LittleEndian>()?,
            x_max: r.read_f64::<LittleEndian>()?,
            n_x: r.read_u64::<LittleEndian>()? as usize,
            n_tau: r.read_u64::<LittleEndian>()? as usize,
            horizon: r.read_f64::<LittleEndian>()?,
            scheme: match r.read_u8()? {
                0 => Scheme::ImplicitEuler,
                1 => Scheme::CrankNicolson,
                s => return Err(Error::Format(format!("unknown scheme tag {s}"))),
            },
        };
        if grid != problem.grid {
            return Err(Error::Format("cached grid differs from requested grid".into()));
        }
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut meta = vec![0u8; len];
        r.read_exact(&mut meta)?;
        let (method, stats): (SolveMethod, SolveStats) =
            serde_json::from_slice(&meta).map_err(|e| Error::Format(e.to_string()))?;
        let mut v = vec![0.0; grid.n_nodes()];
        r.read_f64_into::<LittleEndian>(&mut v)?;
        Self::from_values(problem, method, stats, v)
    }

    /// CSV with columns `tau,x,v,contact_lower,contact_upper`.
    pub fn write_csv<W: Write>(&self, mut w: W, fmt: impl Fn(f64) -> String) -> Result<()> {
        writeln!(w, "tau,x,v,contact_lower,contact_upper")?;
        for k in 0..=self.grid.n_tau {
            let tau = fmt(self.grid.tau(k));
            for j in 0..=self.grid.n_x {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    tau,
                    fmt(self.grid.x(j)),
                    fmt(self.v(k, j)),
                    self.contact_lower(k, j) as u8,
                    self.contact_upper(k, j) as u8
                )?;
            }
        }
        Ok(())
    }
}

const MAGIC: &[u8; 4] = b"JSWF";
const CACHE_VERSION: u32 = 1;

fn compute_residual(problem: &ObstacleProblem, v: &[f64]) -> Vec<f64> {
    let grid = problem.grid;
    let nx = grid.n_x + 1;
    let mut res = vec![0.0; v.len()];
    let mut l_old = vec![0.0; nx];
    let mut l_new = vec![0.0; nx];
    let source = problem.source();
    for k in 0..grid.n_tau {
        let old = &v[k * nx..(k + 1) * nx];
        let new = &v[(k + 1) * nx..(k + 2) * nx];
        problem.apply_operator(old, &mut l_old);
        problem.apply_operator(new, &mut l_new);
        // the start-up half steps are reported as one implicit step
        let theta = match grid.scheme {
            Scheme::CrankNicolson if k > 0 => 0.5,
            _ => 1.0,
        };
        let dt = grid.tau(k + 1) - grid.tau(k);
        for j in 1..nx - 1 {
            res[(k + 1) * nx + j] = (new[j] - old[j]) / dt - theta * l_new[j] - (1.0 - theta) * l_old[j] - source[j];
        }
    }
    res
}
