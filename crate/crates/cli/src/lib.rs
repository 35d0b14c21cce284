//! The `rentsim` command line: config loading, subcommands and report output.

pub mod config;
pub mod format;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rentsim::engine::{self, ScenarioConfig};
use rentsim::equilibrium::{self, StabilityReport, SteadyStateKind};
use rentsim::sweeps::{self, Heatmap, SweepResult, SweepSpec, DEFAULT_REDUCE_ROUND};

use config::{FloatList, Override, SeedList};
use report::RunSummary;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<rentsim::Error> for CliError {
    fn from(e: rentsim::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rentsim",
    version,
    about = "Rent-seeking simulator under generative AI"
)]
pub struct Cli {
    /// Worker threads for sweeps and multi-seed runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// JSON config document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset used as the base before the config file is applied.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override a field, e.g. `--set policy.tau=0.3`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<Override>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation (or one per seed) and write a report bundle.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `7`, `1,4,9` or `0..10`. Several seeds write one bundle each.
        #[arg(long)]
        seeds: Option<SeedList>,
    },
    /// Run a parameter sweep described by a sweep document.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seeds: Option<SeedList>,
    },
    /// Heatmaps of final injection and loss over a phi x psi grid.
    Sensitivity {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Defaults to the config's master seed.
        #[arg(long)]
        seeds: Option<SeedList>,
        #[arg(long, default_value = "0.5,1,2,4")]
        phi: FloatList,
        #[arg(long, default_value = "0.5,1,2,4")]
        psi: FloatList,
        #[arg(long, default_value_t = DEFAULT_REDUCE_ROUND)]
        reduce_round: usize,
    },
    /// Print the analytical steady state, its stability and dR/dtau as JSON.
    Equilibrium {
        #[command(flatten)]
        source: Source,
    },
    /// List the built-in presets.
    Presets,
}

pub fn base_config(preset: Option<&str>) -> Result<ScenarioConfig, CliError> {
    match preset {
        None => Ok(ScenarioConfig::default()),
        Some(name) => sweeps::find_preset(name).map(|p| p.config).ok_or_else(|| {
            let names: Vec<String> = sweeps::scenario_presets()
                .into_iter()
                .map(|p| p.name)
                .collect();
            CliError::Config(format!(
                "unknown preset `{name}` (known: {})",
                names.join(", ")
            ))
        }),
    }
}

pub fn load_scenario(source: &Source) -> Result<ScenarioConfig, CliError> {
    let base = base_config(source.preset.as_deref())?;
    let cfg: ScenarioConfig = config::resolve(base, source.config.as_deref(), &source.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep(source: &Source) -> Result<SweepSpec, CliError> {
    let base = SweepSpec {
        base: base_config(source.preset.as_deref())?,
        ..SweepSpec::default()
    };
    config::resolve(base, source.config.as_deref(), &source.overrides)
}

/// Runs `cfg` once per seed. With more than one seed each bundle goes to
/// `out/seed_<seed>`.
pub fn cmd_run(
    cfg: &ScenarioConfig,
    out: &Path,
    seeds: Option<&[u64]>,
) -> Result<Vec<RunSummary>, CliError> {
    let seeds = seeds
        .map(<[u64]>::to_vec)
        .unwrap_or_else(|| vec![cfg.master_seed]);
    let mut summaries = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let cfg = ScenarioConfig {
            master_seed: seed,
            ..cfg.clone()
        };
        let res = engine::run(&cfg)?;
        let dir = if seeds.len() == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("seed_{seed}"))
        };
        summaries.push(report::write_run_bundle(&dir, &cfg, &res)?);
    }
    Ok(summaries)
}

pub fn cmd_sweep(spec: &SweepSpec, out: &Path) -> Result<SweepResult, CliError> {
    let res = sweeps::run_sweep(spec)?;
    report::write_sweep_bundle(out, &res)?;
    Ok(res)
}

pub fn cmd_sensitivity(
    base: &ScenarioConfig,
    phi: &[f64],
    psi: &[f64],
    seeds: &[u64],
    reduce_round: usize,
    out: &Path,
) -> Result<Heatmap, CliError> {
    let map = sweeps::sensitivity_heatmap(base, phi, psi, seeds, reduce_round)?;
    report::write_heatmap_bundle(out, &map)?;
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauResponse {
    pub derivative: f64,
    pub informative: bool,
    /// Transparency at which the derivative was taken.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub r_star: f64,
    pub s_star: Option<f64>,
    pub kind: &'static str,
    pub residual: f64,
    pub rep: f64,
    pub diagnostic: Option<String>,
    pub steady_state_loss: Option<f64>,
    pub stability: Option<StabilityReport>,
    pub dr_dtau: TauResponse,
}

const TAU_STEP: f64 = 1e-6;

pub fn cmd_equilibrium(cfg: &ScenarioConfig) -> Result<EquilibriumReport, CliError> {
    let (m, p) = (&cfg.model, &cfg.policy);
    let ss = equilibrium::steady_state_s(m, p)?;
    let (kind, s_at) = match ss.s_star_kind {
        SteadyStateKind::Interior(s) => ("interior", s),
        SteadyStateKind::BoundaryLow => ("boundary_low", 0.0),
        SteadyStateKind::BoundaryHigh => ("boundary_high", 1.0),
        SteadyStateKind::NoSolution => ("no_solution", cfg.s0),
    };
    let interior = ss.interior().is_some();
    let sens = equilibrium::comparative_static_tau(m, p, s_at, ss.rep, TAU_STEP)?;
    Ok(EquilibriumReport {
        r_star: ss.r_star,
        s_star: ss.interior(),
        kind,
        residual: ss.residual,
        rep: ss.rep,
        diagnostic: ss.diagnostic.clone(),
        steady_state_loss: if interior {
            Some(equilibrium::steady_state_loss(m, p, &ss)?)
        } else {
            None
        },
        stability: if interior {
            Some(equilibrium::stability_at(m, p, &ss)?)
        } else {
            None
        },
        dr_dtau: TauResponse {
            derivative: sens.derivative,
            informative: sens.informative,
            s: s_at,
        },
    })
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map_err(|e| CliError::Runtime(format!("cannot encode output: {e}")))
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    set_threads(cli.threads)?;
    let say = |stdout: &mut dyn Write, text: String| {
        writeln!(stdout, "{text}").map_err(|e| CliError::Runtime(format!("stdout: {e}")))
    };
    match cli.command {
        Command::Run { source, out, seeds } => {
            let cfg = load_scenario(&source)?;
            let summaries = cmd_run(&cfg, &out, seeds.as_ref().map(|s| s.0.as_slice()))?;
            say(
                stdout,
                format!(
                    "wrote {} run bundle(s) to {}",
                    summaries.len(),
                    out.display()
                ),
            )
        }
        Command::Sweep { source, out, seeds } => {
            let mut spec = load_sweep(&source)?;
            if let Some(s) = seeds {
                spec.seeds = s.0;
            }
            let res = cmd_sweep(&spec, &out)?;
            say(
                stdout,
                format!("wrote {} sweep cells to {}", res.cells.len(), out.display()),
            )
        }
        Command::Sensitivity {
            source,
            out,
            seeds,
            phi,
            psi,
            reduce_round,
        } => {
            let cfg = load_scenario(&source)?;
            let seeds = seeds.map(|s| s.0).unwrap_or_else(|| vec![cfg.master_seed]);
            cmd_sensitivity(&cfg, &phi.0, &psi.0, &seeds, reduce_round, &out)?;
            say(stdout, format!("wrote heatmaps to {}", out.display()))
        }
        Command::Equilibrium { source } => {
            let cfg = load_scenario(&source)?;
            say(stdout, to_json(&cmd_equilibrium(&cfg)?)?)
        }
        Command::Presets => {
            for p in sweeps::scenario_presets() {
                say(stdout, format!("{:<24} {}", p.name, p.description))?;
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with(
    args: impl IntoIterator<Item = OsString>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "rentsim: error: {line}");
            e.exit_code()
        }
    }
}
