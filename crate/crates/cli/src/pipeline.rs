//! The staged run: assumption gate, obstacle solves, boundary extraction,
//! dual recovery, Monte Carlo verification, then exports and the manifest.
//!
//! A stage that errors marks every later stage `blocked`. Hard checks that
//! fail do not block anything; they only set the exit code.

use std::path::Path;
use std::time::Instant;

use jobswitch_core::domain::{auto_domain, DomainChoice, DomainOptions};
use jobswitch_core::dual::{
    recover_p, ConsistencyReport, ConvexityScan, DualSolution, SwitchingPolicy, ViReport, WealthInversion,
};
use jobswitch_core::free_boundary::{
    containment, extract_chi, far_field, lipschitz_estimate, separation, to_original, ContainmentReport,
    FarFieldReport, FreeBoundaryCurve, LipschitzReport, Side,
};
use jobswitch_core::mc::{
    evaluate_budget, evaluate_dual_objective, martingale_check, merton_stream, simulate_y, MartingaleCheck, McReport,
};
use jobswitch_core::model::{validate_assumptions, AssumptionReport, DerivedSchedule, Job};
use jobswitch_core::obstacle::diagnostics::{
    linf_difference, monotonicity, sandwich_violation, time_derivative_band, MonotonicityReport, TimeBandReport,
};
use jobswitch_core::obstacle::{
    solve_lcp_problem, solve_penalized_problem, GridSpec, ObstacleProblem, PenaltyConfig, SolutionField, SolveStats,
};
use serde::Serialize;

use crate::cache::{hash_of, sha256_hex, FieldCache};
use crate::config::{RunConfig, Verbosity};
use crate::export;
use crate::manifest::{FileRecord, RunManifest, StageRecord, StageStatus};
use crate::{exit, RunError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Validate,
    Solve,
    Boundaries,
    Duality,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Validate,
        Stage::Solve,
        Stage::Boundaries,
        Stage::Duality,
        Stage::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Solve => "solve",
            Stage::Boundaries => "boundaries",
            Stage::Duality => "duality",
            Stage::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Penalized,
    Lcp,
    Both,
}

impl Method {
    fn penalized(self) -> bool {
        self != Method::Lcp
    }

    fn lcp(self) -> bool {
        self != Method::Penalized
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Penalized => "penalized",
            Method::Lcp => "lcp",
            Method::Both => "both",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub verb: String,
    pub until: Stage,
    pub method: Method,
    /// Write the CSV tables in addition to the JSON reports.
    pub tables: bool,
}

impl RunRequest {
    pub fn full(method: Method) -> Self {
        Self {
            verb: "run".into(),
            until: Stage::Verify,
            method,
            tables: true,
        }
    }
}

/// One hard check: `lo <= value <= hi` for whichever bounds are present.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub stage: Stage,
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub method: &'static str,
    pub stats: SolveStats,
    pub sup_norm: f64,
    pub sandwich_violation: f64,
    pub monotonicity: MonotonicityReport,
    pub time_band: TimeBandReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySummary {
    pub source: &'static str,
    pub containment: ContainmentReport,
    pub separation: Option<f64>,
    pub far_field: [FarFieldReport; 2],
    pub lipschitz: Vec<LipschitzReport>,
    pub samples: [usize; 2],
    pub gamma_constant: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSummary {
    pub grid: GridSpec,
    pub consistency: ConsistencyReport,
    pub vi: ViReport,
    pub convexity: ConvexityScan,
    pub s0_at_start: Option<f64>,
    pub s1_at_start: Option<f64>,
    pub inversions: Vec<WealthInversion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Perturbed {
    pub factor: f64,
    pub estimate: f64,
    /// `(perturbed - boundary) / stderr` of the boundary-policy estimate.
    pub excess_in_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveCase {
    pub job: Job,
    pub y0: f64,
    pub pde: f64,
    pub report: McReport,
    pub z: f64,
    pub perturbed: Vec<Perturbed>,
    pub never_switch: McReport,
    pub never_switch_closed_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetCase {
    pub job: Job,
    pub wealth: f64,
    pub y_star: f64,
    pub report: McReport,
    pub z: f64,
    pub scaled_consumption: f64,
    pub scaled: McReport,
    /// `(w - scaled estimate) / stderr`.
    pub scaled_deficit_in_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MertonCase {
    pub y0: f64,
    pub closed_form: f64,
    pub report: McReport,
    pub z: f64,
    pub investment_to_wealth: f64,
    pub expected_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub martingale: MartingaleCheck,
    pub objective: Vec<ObjectiveCase>,
    pub budget: Vec<BudgetCase>,
    pub merton: MertonCase,
}

/// Everything the stages produced.
#[derive(Default)]
pub struct Artifacts {
    pub assumptions: Option<AssumptionReport>,
    pub derived: Option<DerivedSchedule>,
    pub domain: Option<DomainChoice>,
    pub grid: Option<GridSpec>,
    pub penalized: Option<SolutionField>,
    pub lcp: Option<SolutionField>,
    pub solves: Vec<SolveSummary>,
    pub lower: Option<FreeBoundaryCurve>,
    pub upper: Option<FreeBoundaryCurve>,
    pub boundaries: Option<BoundarySummary>,
    pub dual: Option<DualSolution>,
    pub policy: Option<SwitchingPolicy>,
    pub dual_summary: Option<DualSummary>,
    pub mc: Option<McSummary>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    fn check(&mut self, stage: Stage, name: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) {
        let passed = !value.is_nan() && lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        self.checks.push(Check {
            stage,
            name: name.into(),
            value,
            lo,
            hi,
            passed,
        });
    }

    fn at_most(&mut self, stage: Stage, name: impl Into<String>, value: f64, hi: f64) {
        self.check(stage, name, value, None, Some(hi));
    }

    fn flag(&mut self, stage: Stage, name: impl Into<String>, ok: bool) {
        self.check(stage, name, if ok { 1.0 } else { 0.0 }, Some(1.0), None);
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    artifact_version: &'a str,
    assumptions: Option<&'a AssumptionReport>,
    domain: Option<&'a DomainChoice>,
    grid: Option<GridSpec>,
    solves: &'a [SolveSummary],
    boundaries: Option<&'a BoundarySummary>,
    dual: Option<&'a DualSummary>,
    checks: &'a [Check],
}

pub struct Outcome {
    pub manifest: RunManifest,
    pub artifacts: Artifacts,
    pub exit_code: i32,
}

/// Why a stage stopped.
enum Halt {
    Validation(String),
    Solver(String),
}

impl From<jobswitch_core::Error> for Halt {
    fn from(e: jobswitch_core::Error) -> Self {
        Halt::Solver(e.to_string())
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    req: &'a RunRequest,
    cache: FieldCache,
    art: Artifacts,
}

impl Ctx<'_> {
    fn log(&self, level: Verbosity, msg: &str) {
        if self.cfg.output.verbosity >= level {
            eprintln!("{msg}");
        }
    }

    fn derived(&self) -> &DerivedSchedule {
        self.art.derived.as_ref().expect("validated")
    }

    /// Solves `problem` by `method`, going through the cache. Returns the
    /// field and whether it came from the cache.
    fn solve_field(
        &self,
        role: &str,
        problem: &ObstacleProblem,
        penalty: Option<&PenaltyConfig>,
    ) -> Result<(SolutionField, bool), Halt> {
        let cfg = self.cfg;
        let key = match penalty {
            Some(pc) => hash_of(&(VERSION, role, &cfg.model, &cfg.costs, problem.grid, pc, cfg.newton)),
            None => hash_of(&(VERSION, role, &cfg.model, &cfg.costs, problem.grid, cfg.lcp)),
        };
        if let Some(f) = self.cache.load(&key, problem) {
            return Ok((f, true));
        }
        let field = match penalty {
            Some(pc) => solve_penalized_problem(problem, pc, cfg.newton.to_core())?,
            None => solve_lcp_problem(problem, cfg.lcp.to_core())?,
        };
        self.cache
            .store(&key, &field)
            .map_err(|e| Halt::Solver(format!("cache write: {e}")))?;
        Ok((field, false))
    }

    fn validate(&mut self) -> Result<StageStatus, Halt> {
        let cfg = self.cfg;
        cfg.validate_structure().map_err(|e| Halt::Validation(e.to_string()))?;
        cfg.model.validate().map_err(|e| Halt::Validation(e.to_string()))?;
        let costs = cfg.cost_schedule().map_err(|e| Halt::Validation(e.to_string()))?;
        let report = validate_assumptions(&cfg.model, &costs, 1000).map_err(|e| Halt::Validation(e.to_string()))?;
        let verdict = report.clone().into_result();
        self.art.assumptions = Some(report);
        verdict.map_err(|e| Halt::Validation(e.to_string()))?;
        let derived = DerivedSchedule::new(cfg.model.clone(), costs).map_err(|e| Halt::Validation(e.to_string()))?;
        self.art.derived = Some(derived);
        Ok(StageStatus::Ok)
    }

    fn solve(&mut self) -> Result<StageStatus, Halt> {
        let cfg = self.cfg;
        let derived = self.derived().clone();
        let domain = match (cfg.grid.x_min, cfg.grid.x_max) {
            (Some(a), Some(b)) => DomainChoice {
                x_min: a,
                x_max: b,
                chi0_min: f64::NAN,
                chi1_max: f64::NAN,
                prepass: (a, b),
                widenings: 0,
            },
            _ => auto_domain(&derived, &DomainOptions::default())?,
        };
        let grid = domain
            .grid(cfg.grid.n_x, cfg.grid.n_tau, derived.horizon())
            .with_scheme(cfg.grid.scheme);
        let pc = PenaltyConfig::for_domain(&derived, grid.x_min, cfg.penalty.epsilon);
        let problem = ObstacleProblem::new(&derived, grid, pc.n_eff)?;
        let mut all_cached = true;
        if self.req.method.penalized() {
            let (f, hit) = self.solve_field("penalized", &problem, Some(&pc))?;
            all_cached &= hit;
            self.art.penalized = Some(f);
        }
        if self.req.method.lcp() {
            let (f, hit) = self.solve_field("lcp", &problem, None)?;
            all_cached &= hit;
            self.art.lcp = Some(f);
        }
        let p = derived.params();
        let scale = p.income_gap() + 2.0 * derived.costs().q();
        let band_tol = 5.0 * (grid.dtau() + grid.dx() * grid.dx()) * scale;
        let sandwich_tol = 10.0 * cfg.penalty.epsilon.max(cfg.lcp.tol);
        let fields: Vec<SolutionField> = [&self.art.penalized, &self.art.lcp]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        for f in &fields {
            let m = f.method.name();
            let summary = SolveSummary {
                method: m,
                stats: f.stats,
                sup_norm: f.sup_norm(),
                sandwich_violation: sandwich_violation(f),
                monotonicity: monotonicity(f),
                time_band: time_derivative_band(f, &derived),
            };
            let s = Stage::Solve;
            self.art
                .at_most(s, format!("{m}.sandwich"), summary.sandwich_violation, sandwich_tol);
            let mono = summary.monotonicity;
            self.art.check(
                s,
                format!("{m}.monotone"),
                mono.min_forward_difference,
                Some(-1e-8 * summary.sup_norm),
                None,
            );
            self.art.check(
                s,
                format!("{m}.continuation_increasing"),
                mono.min_continuation_difference,
                Some(f64::MIN_POSITIVE),
                None,
            );
            self.art
                .at_most(s, format!("{m}.time_band"), summary.time_band.max_excess(), band_tol);
            self.art.solves.push(summary);
        }
        if let (Some(pen), Some(lcp)) = (&self.art.penalized, &self.art.lcp) {
            let gap = linf_difference(pen, lcp).expect("same grid");
            let half = PenaltyConfig::for_domain(&derived, grid.x_min, cfg.penalty.epsilon / 2.0);
            let (f2, hit) = self.solve_field("penalized", &problem, Some(&half))?;
            all_cached &= hit;
            let gap2 = linf_difference(&f2, lcp).expect("same grid");
            let norm = lcp.sup_norm();
            self.art.at_most(Stage::Solve, "agreement", gap, 5e-3 * norm);
            self.art.check(
                Stage::Solve,
                "epsilon_halving_ratio",
                gap / gap2 / 2.0,
                Some(0.3),
                Some(3.0),
            );
        }
        self.art.domain = Some(domain);
        self.art.grid = Some(grid);
        Ok(if all_cached {
            StageStatus::CacheHit
        } else {
            StageStatus::Ok
        })
    }

    fn boundaries(&mut self) -> Result<StageStatus, Halt> {
        let derived = self.derived().clone();
        let field = self
            .art
            .lcp
            .as_ref()
            .or(self.art.penalized.as_ref())
            .expect("solved")
            .clone();
        let lower = extract_chi(&field, Side::Lower);
        let upper = extract_chi(&field, Side::Upper);
        let horizon = derived.horizon();
        let cont = containment(&lower, &upper, &derived)?;
        let sep = separation(&lower, &upper, &derived)?;
        let ff = [
            far_field(&lower, &field, 0.05 * horizon),
            far_field(&upper, &field, derived.tau1() + 0.05 * horizon),
        ];
        let lipschitz = [&lower, &upper]
            .into_iter()
            .filter_map(|c| lipschitz_estimate(c, 16).ok())
            .collect();
        let gamma_constant = derived.costs().is_constant().then(|| gamma_is_constant(&derived));
        let s = Stage::Boundaries;
        self.art.flag(s, "containment", cont.passed);
        self.art
            .check(s, "separation", sep.unwrap_or(f64::NAN), Some(0.0), None);
        self.art
            .flag(s, "far_field.lower", ff[0].passed() && ff[0].slices_checked > 0);
        self.art
            .flag(s, "far_field.upper", ff[1].passed() && ff[1].slices_checked > 0);
        self.art.flag(
            s,
            "connected_contact",
            lower.anomalies.is_empty() && upper.anomalies.is_empty(),
        );
        if let Some(ok) = gamma_constant {
            self.art.flag(s, "gamma_constant", ok);
        }
        self.art.boundaries = Some(BoundarySummary {
            source: field.method.name(),
            containment: cont,
            separation: sep,
            far_field: ff,
            lipschitz,
            samples: [lower.len(), upper.len()],
            gamma_constant,
        });
        self.art.lower = Some(lower);
        self.art.upper = Some(upper);
        Ok(StageStatus::Ok)
    }

    fn duality(&mut self) -> Result<StageStatus, Halt> {
        let cfg = self.cfg;
        let derived = self.derived().clone();
        let p = derived.params();
        let domain = self.art.domain.as_ref().expect("solved");
        let extra = cfg
            .grid
            .dual_extension
            .unwrap_or(4.0 * p.theta().abs() * p.horizon.sqrt());
        let (a, b) = domain.extended(extra);
        let grid = GridSpec::new(a, b, cfg.grid.n_x, cfg.grid.n_tau, p.horizon).with_scheme(cfg.grid.scheme);
        let pc = PenaltyConfig::for_domain(&derived, a, cfg.penalty.epsilon);
        let problem = ObstacleProblem::new(&derived, grid, pc.n_eff)?;
        let (field, hit) = if self.req.method.lcp() {
            self.solve_field("dual-lcp", &problem, None)?
        } else {
            self.solve_field("dual-penalized", &problem, Some(&pc))?
        };
        let sol = recover_p(&field, &derived)?;
        let lower = to_original(&extract_chi(&field, Side::Lower), p.horizon);
        let upper = to_original(&extract_chi(&field, Side::Upper), p.horizon);
        let (s0, s1) = (lower.at(0.0), upper.at(0.0));
        let policy = SwitchingPolicy::new(&derived, Some(lower), Some(upper))?;

        let scale = p.income_gap() + 2.0 * derived.costs().q();
        let tol = 5.0 * (grid.dtau() + grid.dx() * grid.dx()) * scale;
        let consistency = sol.consistency();
        let vi = sol.vi_check(tol);
        let convexity = sol.convexity_scan(1e-10);
        let s = Stage::Duality;
        self.art
            .at_most(s, "consistency", consistency.max_abs, 5e-3 * consistency.q_norm);
        self.art.at_most(s, "terminal", consistency.terminal_rel, 1e-12);
        self.art.flag(s, "variational_inequality", vi.passed);
        let mut inversions = Vec::new();
        for case in &cfg.mc.wealth_cases {
            let name = format!("inversion.{}.{}", case.job.index(), case.wealth);
            match sol.invert_wealth(case.job, case.wealth) {
                Ok(inv) => {
                    let direct = sol.grid_dual_min(case.job, case.wealth);
                    self.art
                        .at_most(s, name, (inv.value - direct).abs(), 1e-4 * direct.abs().max(1.0));
                    inversions.push(inv);
                }
                Err(_) => self.art.flag(s, name, false),
            }
        }
        self.art.dual_summary = Some(DualSummary {
            grid,
            consistency,
            vi,
            convexity,
            s0_at_start: s0,
            s1_at_start: s1,
            inversions,
        });
        self.art.dual = Some(sol);
        self.art.policy = Some(policy);
        Ok(if hit { StageStatus::CacheHit } else { StageStatus::Ok })
    }

    fn verify(&mut self) -> Result<StageStatus, Halt> {
        let cfg = self.cfg;
        let mc = &cfg.mc;
        let band = mc.z_band;
        let derived = self.derived().clone();
        let p = derived.params().clone();
        let sol = self.art.dual.as_ref().expect("recovered");
        let policy = self.art.policy.as_ref().expect("recovered");
        let summary = self.art.dual_summary.as_ref().expect("recovered");
        let s = Stage::Verify;

        let ens = simulate_y(&mc.ensemble(1.0, Job::High, mc.n_steps), &p)?;
        let n = mc.n_steps;
        let martingale = martingale_check(&ens, &p, &[0, n / 4, n / 2, 3 * n / 4, n])?;
        let mut checks: Vec<(String, f64, Option<f64>, Option<f64>)> =
            vec![("martingale".into(), martingale.max_z, None, Some(band))];

        let (Some(s0), Some(s1)) = (summary.s0_at_start, summary.s1_at_start) else {
            return Err(Halt::Solver("a free boundary is undefined at t = 0".into()));
        };
        let never = SwitchingPolicy::never(&derived);
        let mut objective = Vec::new();
        for y0 in [0.6 * s0, (s0 * s1).sqrt(), 1.5 * s1] {
            for job in [Job::High, Job::Low] {
                let ens = simulate_y(&mc.ensemble(y0, job, n), &p)?;
                let report = evaluate_dual_objective(&ens, policy, &derived)?;
                let pde = sol.dual_value_j(job, y0)?;
                let z = report.z_score(pde);
                let tag = format!("objective.{}.{y0:.6}", job.index());
                checks.push((tag.clone(), z, None, Some(band)));
                let mut perturbed = Vec::new();
                for factor in [0.9, 1.1] {
                    let r = evaluate_dual_objective(&ens, &policy.with_lower_scaled(factor), &derived)?;
                    let excess = (r.estimate - report.estimate) / report.stderr;
                    checks.push((format!("{tag}.perturbed.{factor}"), excess, None, Some(band)));
                    perturbed.push(Perturbed {
                        factor,
                        estimate: r.estimate,
                        excess_in_stderr: excess,
                    });
                }
                let never_switch = evaluate_dual_objective(&ens, &never, &derived)?;
                objective.push(ObjectiveCase {
                    job,
                    y0,
                    pde,
                    report,
                    z,
                    perturbed,
                    never_switch,
                    never_switch_closed_form: p.no_switch_value(job, p.horizon, y0),
                });
            }
        }

        let mut budget = Vec::new();
        for inv in &summary.inversions {
            let ens = simulate_y(&mc.ensemble(inv.y_star, inv.job, mc.budget_steps), &p)?;
            let report = evaluate_budget(&ens, policy, &derived, 1.0)?;
            let scaled = evaluate_budget(&ens, policy, &derived, 0.9)?;
            let z = report.z_score(inv.wealth);
            let deficit = (inv.wealth - scaled.estimate) / scaled.stderr;
            let tag = format!("budget.{}.{}", inv.job.index(), inv.wealth);
            checks.push((tag.clone(), z, None, Some(band)));
            checks.push((format!("{tag}.scaled"), deficit, Some(band), None));
            budget.push(BudgetCase {
                job: inv.job,
                wealth: inv.wealth,
                y_star: inv.y_star,
                report,
                z,
                scaled_consumption: 0.9,
                scaled,
                scaled_deficit_in_stderr: deficit,
            });
        }

        let y0 = 1.0;
        let report = merton_stream(&p, y0, mc.merton_paths, mc.merton_dt, mc.seed)?;
        let closed_form = p.merton_jr(y0)?;
        let z = report.z_score(closed_form);
        let post = sol.optimal_controls(p.horizon, y0, Job::High)?;
        let ratio = post.investment / post.wealth;
        let expected = p.theta() / (p.sigma * p.gamma1());
        checks.push(("merton".into(), z, None, Some(band)));
        checks.push((
            "post_retirement_ratio".into(),
            (ratio - expected).abs(),
            None,
            Some(0.0),
        ));
        let merton = MertonCase {
            y0,
            closed_form,
            report,
            z,
            investment_to_wealth: ratio,
            expected_ratio: expected,
        };
        for (name, v, lo, hi) in checks {
            self.art.check(s, name, v, lo, hi);
        }
        self.art.mc = Some(McSummary {
            martingale,
            objective,
            budget,
            merton,
        });
        Ok(StageStatus::Ok)
    }
}

fn gamma_is_constant(d: &DerivedSchedule) -> bool {
    let (Ok(g0), Ok(g1)) = (d.gamma0(0.0), d.gamma1_raw(0.0)) else {
        return false;
    };
    (1..=200).all(|i| {
        let tau = d.horizon() * i as f64 / 200.0;
        let close = |a: f64, b: f64| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0);
        matches!((d.gamma0(tau), d.gamma1_raw(tau)), (Ok(a), Ok(b)) if close(a, g0) && close(b, g1))
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<FileRecord>) -> Result<(), RunError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
    files.push(FileRecord {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    });
    Ok(())
}

/// Runs the stages up to `req.until`, writes the exports and the manifest
/// into the output directory, and reports the exit code.
pub fn run_pipeline(cfg: &RunConfig, req: &RunRequest) -> Result<Outcome, RunError> {
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| RunError::io(&out, e))?;
    let mut ctx = Ctx {
        cfg,
        req,
        cache: FieldCache::new(cfg.output.cache_path(), cfg.output.cache),
        art: Artifacts::default(),
    };
    let mut stages = Vec::new();
    let mut exit_code = exit::OK;
    for stage in Stage::ALL {
        if stage > req.until {
            stages.push(StageRecord {
                name: stage.name().into(),
                status: StageStatus::Skipped,
                seconds: 0.0,
                detail: None,
            });
            continue;
        }
        if exit_code != exit::OK {
            stages.push(StageRecord {
                name: stage.name().into(),
                status: StageStatus::Blocked,
                seconds: 0.0,
                detail: None,
            });
            continue;
        }
        let start = Instant::now();
        let result = match stage {
            Stage::Validate => ctx.validate(),
            Stage::Solve => ctx.solve(),
            Stage::Boundaries => ctx.boundaries(),
            Stage::Duality => ctx.duality(),
            Stage::Verify => ctx.verify(),
        };
        let seconds = start.elapsed().as_secs_f64();
        let (status, detail) = match result {
            Ok(status) => (status, None),
            Err(Halt::Validation(msg)) => {
                exit_code = exit::VALIDATION;
                (StageStatus::Failed, Some(msg))
            }
            Err(Halt::Solver(msg)) => {
                exit_code = exit::SOLVER;
                (StageStatus::Failed, Some(msg))
            }
        };
        ctx.log(
            Verbosity::Normal,
            &format!(
                "{:<10} {:<9} {:.2}s{}",
                stage.name(),
                status.label(),
                seconds,
                detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
            ),
        );
        stages.push(StageRecord {
            name: stage.name().into(),
            status,
            seconds,
            detail,
        });
    }
    for c in &ctx.art.checks {
        let level = if c.passed {
            Verbosity::Verbose
        } else {
            Verbosity::Normal
        };
        ctx.log(
            level,
            &format!(
                "  check {:<40} {} value {:.6e}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.value
            ),
        );
    }
    let failed_checks = ctx.art.failed_checks();
    if exit_code == exit::OK && !failed_checks.is_empty() {
        exit_code = exit::VERIFICATION;
    }

    let mut files = Vec::new();
    if ctx.art.derived.is_some() {
        let art = &ctx.art;
        let diagnostics = Diagnostics {
            artifact_version: VERSION,
            assumptions: art.assumptions.as_ref(),
            domain: art.domain.as_ref(),
            grid: art.grid,
            solves: &art.solves,
            boundaries: art.boundaries.as_ref(),
            dual: art.dual_summary.as_ref(),
            checks: &art.checks,
        };
        write_file(&out, "diagnostics.json", &export::to_json(&diagnostics), &mut files)?;
        if let Some(mc) = &art.mc {
            write_file(&out, "mc_report.json", &export::to_json(mc), &mut files)?;
        }
        if req.tables {
            if let (Some(lo), Some(up), Some(grid)) = (&art.lower, &art.upper, art.grid) {
                let t1 = ctx.derived().t1();
                write_file(
                    &out,
                    "boundaries.csv",
                    export::boundaries_csv(lo, up, grid, t1).as_bytes(),
                    &mut files,
                )?;
            }
            let fields: Vec<&SolutionField> = [&art.penalized, &art.lcp].into_iter().flatten().collect();
            if !fields.is_empty() {
                write_file(
                    &out,
                    "value_surface.csv",
                    export::value_surface_csv(&fields).as_bytes(),
                    &mut files,
                )?;
            }
            if let Some(sol) = &art.dual {
                write_file(
                    &out,
                    "dual_values.csv",
                    export::dual_values_csv(sol).as_bytes(),
                    &mut files,
                )?;
            }
        }
    }
    let manifest = RunManifest {
        artifact_version: VERSION.into(),
        config_hash: hash_of(cfg),
        verb: req.verb.clone(),
        method: req.method.name().into(),
        exit_code,
        failed_checks,
        stages,
        files,
        config: cfg.clone(),
    };
    manifest.write(&out)?;
    Ok(Outcome {
        manifest,
        artifacts: ctx.art,
        exit_code,
    })
}
