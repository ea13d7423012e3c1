//! Self-convergence under grid halving.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::obstacle::field::SolutionField;
use crate::obstacle::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Refinement {
    /// Halve both `dx` and `dtau`.
    Both,
    /// Halve `dtau` only.
    TimeOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub mode: Refinement,
    pub grids: Vec<GridSpec>,
    /// `|u_l - u_{l+1}|_inf` on the nodes of level `l`.
    pub differences: Vec<f64>,
    /// `log2(d_l / d_{l+1})`.
    pub orders: Vec<f64>,
    /// False when some difference failed to shrink.
    pub monotone: bool,
}

/// Largest difference between a field and its refinement, read at the coarse nodes.
pub fn coarse_node_difference(coarse: &SolutionField, fine: &SolutionField, mode: Refinement) -> Result<f64> {
    let (c, f) = (coarse.grid, fine.grid);
    let (sx, st) = match mode {
        Refinement::Both => (2, 2),
        Refinement::TimeOnly => (1, 2),
    };
    if f.n_x != c.n_x * sx || f.n_tau != c.n_tau * st || f.x_min != c.x_min || f.x_max != c.x_max {
        return Err(Error::InvalidGrid(
            "fine grid is not a refinement of the coarse grid".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for k in 0..=c.n_tau {
        for j in 0..=c.n_x {
            worst = worst.max((coarse.v(k, j) - fine.v(st * k, sx * j)).abs());
        }
    }
    Ok(worst)
}

/// Solves on `levels` successively refined grids and reports observed orders.
pub fn refine_study<F>(base: GridSpec, levels: usize, mode: Refinement, solve: F) -> Result<ConvergenceReport>
where
    F: Fn(GridSpec) -> Result<SolutionField> + Sync,
{
    if levels < 3 {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: format!("need at least 3 levels, got {levels}"),
        });
    }
    let grids: Vec<GridSpec> = (0..levels)
        .map(|l| {
            let f = 1usize << l;
            match mode {
                Refinement::Both => base.scaled(f),
                Refinement::TimeOnly => base.with_n_tau(base.n_tau * f),
            }
        })
        .collect();
    let fields: Vec<SolutionField> = grids.par_iter().map(|g| solve(*g)).collect::<Result<_>>()?;
    let differences: Vec<f64> = fields
        .windows(2)
        .map(|w| coarse_node_difference(&w[0], &w[1], mode))
        .collect::<Result<_>>()?;
    let orders: Vec<f64> = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = differences.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport {
        mode,
        grids,
        differences,
        orders,
        monotone,
    })
}
