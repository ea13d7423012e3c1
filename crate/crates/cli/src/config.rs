//! Run configuration: one TOML file, every field optional, defaults equal to
//! the reference problem with constant costs.

use std::path::{Path, PathBuf};

use jobswitch_core::mc::McConfig;
use jobswitch_core::model::{CostFn, CostSchedule, Job, ModelParams};
use jobswitch_core::obstacle::{GridSpec, LcpConfig, NewtonConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub costs: CostsConfig,
    pub grid: GridConfig,
    pub penalty: PenaltySection,
    pub lcp: LcpSection,
    pub newton: NewtonSection,
    pub mc: McSection,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::reference(),
            costs: CostsConfig::default(),
            grid: GridConfig::default(),
            penalty: PenaltySection::default(),
            lcp: LcpSection::default(),
            newton: NewtonSection::default(),
            mc: McSection::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    pub phi0: CostFn,
    pub phi1: CostFn,
}

impl Default for CostsConfig {
    fn default() -> Self {
        Self {
            phi0: CostFn::constant(0.2),
            phi1: CostFn::constant(0.3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_tau: usize,
    pub scheme: Scheme,
    /// Fixed domain; chosen from a coarse pre-pass when absent.
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    /// Extra width on each side of the dual-recovery domain; `4 theta sqrt(T)` when absent.
    pub dual_extension: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_x: 512,
            n_tau: 512,
            scheme: Scheme::ImplicitEuler,
            x_min: None,
            x_max: None,
            dual_extension: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub epsilon: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self { epsilon: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcpSection {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LcpSection {
    fn default() -> Self {
        let d = LcpConfig::default();
        Self {
            omega: d.omega,
            tol: d.tol,
            max_sweeps: d.max_sweeps,
        }
    }
}

impl LcpSection {
    pub fn to_core(self) -> LcpConfig {
        LcpConfig {
            omega: self.omega,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let d = NewtonConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl NewtonSection {
    pub fn to_core(self) -> NewtonConfig {
        NewtonConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Initial wealth at which the budget identity is checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WealthCase {
    pub job: Job,
    pub wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Time steps for the budget estimates, which carry a discrete-monitoring
    /// bias of order `sqrt(dt)` at the switching boundaries.
    pub budget_steps: usize,
    pub wealth_cases: Vec<WealthCase>,
    pub merton_paths: usize,
    pub merton_dt: f64,
    /// Acceptance band in standard errors.
    pub z_band: f64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 512,
            seed: 20_240_611,
            antithetic: true,
            budget_steps: 2048,
            wealth_cases: vec![
                WealthCase {
                    job: Job::High,
                    wealth: 5.0,
                },
                WealthCase {
                    job: Job::Low,
                    wealth: 30.0,
                },
            ],
            merton_paths: 20_000,
            merton_dt: 0.5,
            z_band: 3.0,
        }
    }
}

impl McSection {
    pub fn ensemble(&self, y0: f64, j0: Job, n_steps: usize) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            n_steps,
            seed: self.seed,
            antithetic: self.antithetic,
            y0,
            j0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    #[default]
    ReadWrite,
    ReadOnly,
    Off,
}

impl CacheMode {
    pub fn reads(self) -> bool {
        self != CacheMode::Off
    }

    pub fn writes(self) -> bool {
        self == CacheMode::ReadWrite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cache: CacheMode,
    /// Cache location; `<dir>/cache` when absent.
    pub cache_dir: Option<PathBuf>,
    pub verbosity: Verbosity,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            cache: CacheMode::ReadWrite,
            cache_dir: None,
            verbosity: Verbosity::Normal,
        }
    }
}

impl OutputConfig {
    pub fn cache_path(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.dir.join("cache"))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Multiplies both grid counts by `k`.
    pub fn scale_grid(&mut self, k: f64) -> Result<(), RunError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(RunError::Config(format!("grid scale must be positive, got {k}")));
        }
        self.grid.n_x = ((self.grid.n_x as f64) * k).round() as usize;
        self.grid.n_tau = ((self.grid.n_tau as f64) * k).round() as usize;
        Ok(())
    }

    pub fn cost_schedule(&self) -> jobswitch_core::Result<CostSchedule> {
        CostSchedule::new(self.costs.phi0.clone(), self.costs.phi1.clone(), self.model.horizon)
    }

    /// Structural checks that do not need the model solved.
    pub fn validate_structure(&self) -> Result<(), RunError> {
        let probe = GridSpec::new(-1.0, 1.0, self.grid.n_x, self.grid.n_tau, self.model.horizon);
        probe.validate().map_err(|e| RunError::Config(e.to_string()))?;
        match (self.grid.x_min, self.grid.x_max) {
            (Some(a), Some(b)) if !(a < b) => {
                return Err(RunError::Config(format!("x_min {a} must be below x_max {b}")))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(RunError::Config("x_min and x_max must be given together".into()))
            }
            _ => {}
        }
        if let Some(e) = self.grid.dual_extension {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(RunError::Config(format!(
                    "dual_extension must be non-negative, got {e}"
                )));
            }
        }
        if !(self.penalty.epsilon > 0.0) {
            return Err(RunError::Config("penalty epsilon must be positive".into()));
        }
        let mc = &self.mc;
        mc.ensemble(1.0, Job::High, mc.n_steps)
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if mc.budget_steps == 0 || !(mc.merton_dt > 0.0) || mc.merton_paths < 1000 || !(mc.z_band > 0.0) {
            return Err(RunError::Config(
                "budget_steps, merton_dt, merton_paths and z_band must be positive (merton_paths >= 1000)".into(),
            ));
        }
        Ok(())
    }
}
