use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jobswitch_cli::config::CacheMode;
use jobswitch_cli::manifest::StageStatus;
use jobswitch_cli::{exit, run_pipeline, Method, RunConfig, RunError, RunManifest, RunRequest, Stage};

/// Job-switching consumption and investment solver.
#[derive(Parser)]
#[command(name = "jobswitch", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check the configuration and the model assumptions.
    Validate(RunArgs),
    /// Solve the obstacle problem and compare the two methods.
    Solve(RunArgs),
    /// Extract the free boundaries.
    Boundaries(RunArgs),
    /// Recover the dual value functions and invert the budget.
    Duality(RunArgs),
    /// Monte Carlo verification; writes the JSON reports only.
    Verify(RunArgs),
    /// Every stage plus all exports.
    Run(RunArgs),
    /// Summarize the manifest in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    cache: Option<CacheMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies n_x and n_tau.
    #[arg(long)]
    grid_scale: Option<f64>,
    #[arg(long, value_enum, default_value = "both")]
    method: Method,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(mode) = self.cache {
            cfg.output.cache = mode;
        }
        if let Some(seed) = self.seed {
            cfg.mc.seed = seed;
        }
        if let Some(k) = self.grid_scale {
            cfg.scale_grid(k)?;
        }
        Ok(cfg)
    }
}

fn run(verb: &str, until: Stage, args: &RunArgs) -> Result<i32, RunError> {
    let cfg = args.config()?;
    let req = RunRequest {
        verb: verb.into(),
        until,
        method: args.method,
        tables: verb != "verify",
    };
    let outcome = run_pipeline(&cfg, &req)?;
    for name in &outcome.manifest.failed_checks {
        eprintln!("failed check: {name}");
    }
    Ok(outcome.exit_code)
}

fn report(out: &std::path::Path) -> Result<i32, RunError> {
    let m = RunManifest::read(out)?;
    println!("verb {}  method {}  version {}", m.verb, m.method, m.artifact_version);
    println!("config {}", m.config_hash);
    for s in &m.stages {
        let status = s.status.label();
        match &s.detail {
            Some(d) => println!("  {:<10} {:<9} {:>8.2}s  {d}", s.name, status, s.seconds),
            None => println!("  {:<10} {:<9} {:>8.2}s", s.name, status, s.seconds),
        }
    }
    for f in &m.files {
        println!("  {:<20} {:>10} bytes  {}", f.path, f.bytes, &f.sha256[..16]);
    }
    for name in &m.failed_checks {
        println!("failed check: {name}");
    }
    let stale = m.stale_files(out);
    for name in &stale {
        println!("checksum mismatch: {name}");
    }
    let failed = m.stages.iter().any(|s| s.status == StageStatus::Failed);
    Ok(if !stale.is_empty() && m.exit_code == exit::OK {
        exit::VERIFICATION
    } else if failed || m.exit_code != exit::OK {
        m.exit_code
    } else {
        exit::OK
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Validate(a) => run("validate", Stage::Validate, a),
        Verb::Solve(a) => run("solve", Stage::Solve, a),
        Verb::Boundaries(a) => run("boundaries", Stage::Boundaries, a),
        Verb::Duality(a) => run("duality", Stage::Duality, a),
        Verb::Verify(a) => run("verify", Stage::Verify, a),
        Verb::Run(a) => run("run", Stage::Verify, a),
        Verb::Report { out } => report(out),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("jobswitch: {e}");
            match e {
                RunError::Config(_) => exit::VALIDATION,
                RunError::Io { .. } => exit::IO,
                RunError::Core(_) => exit::SOLVER,
            }
        }
    };
    ExitCode::from(code as u8)
}
