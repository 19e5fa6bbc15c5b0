//! `ensemble-lab`: runs the ensemble equivalence experiments from flags or a config file.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ensemble_core::experiments::{self, ExperimentId, ExperimentPlan};
use log::{info, warn};

use config::{load_section, parse_n_grid, parse_observables, parse_threads, ConfigError, GridSpec, Section};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const THREADS_VAR: &str = "ENSEMBLE_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ensemble-lab", version, about = "Ensemble equivalence experiments")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the experiment ids.
    List,
    /// Check a configuration without running it.
    Validate {
        /// Experiment id, kebab or snake case.
        experiment: String,
        #[command(flatten)]
        args: PlanArgs,
    },
    ParamagnetConverge(PlanArgs),
    BoundCompare(PlanArgs),
    SphericalMagConverge(PlanArgs),
    SphericalEnergyConverge(PlanArgs),
    GcDirectCoupling(PlanArgs),
    DominanceDecay(PlanArgs),
    LaplaceCheck(PlanArgs),
    OtOracleCheck(PlanArgs),
}

/// Plan overrides; each flag wins over the config file, which wins over the defaults.
#[derive(Debug, Clone, Default, Args)]
struct PlanArgs {
    /// TOML file with one `[experiment_id]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; the JSON summary goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// System sizes: `100,1000` or `start:stop:factor`.
    #[arg(long = "N", visible_alias = "n-grid", value_name = "GRID")]
    n_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "J", visible_alias = "j")]
    j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma list of phi1, phi1phi2, min2, clip, absclip.
    #[arg(long)]
    observables: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

impl PlanArgs {
    fn to_section(&self) -> Result<Section, ConfigError> {
        Ok(Section {
            n_grid: self
                .n_grid
                .as_deref()
                .map(parse_n_grid)
                .transpose()?
                .map(GridSpec::List),
            m: self.m,
            mu: self.mu,
            rho: self.rho,
            j: self.j,
            h: self.h,
            epsilon: self.epsilon,
            beta: self.beta,
            clip: self.clip,
            samples: self.samples,
            trials: self.trials,
            observables: self.observables.as_deref().map(parse_observables).transpose()?,
            seed: self.seed,
            out: self.out.clone(),
        })
    }

    /// Effective plan and output path.
    fn resolve(&self, id: ExperimentId) -> Result<(ExperimentPlan, Option<PathBuf>), ConfigError> {
        let file = match &self.config {
            Some(path) => load_section(path, id)?,
            None => Section::default(),
        };
        let merged = file.overlay(self.to_section()?);
        Ok((merged.to_plan(id)?, merged.out))
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads = parse_threads(&value)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    info!("using {threads} worker threads");
    Ok(())
}

fn validate(experiment: &str, args: &PlanArgs) -> Result<(), Failure> {
    let id: ExperimentId = experiment
        .parse()
        .map_err(|e: ensemble_core::Error| Failure::Config(e.to_string()))?;
    let (plan, _) = args.resolve(id)?;
    let diags = plan.validate();
    if diags.is_empty() {
        println!("{id}: ok");
        return Ok(());
    }
    for d in &diags {
        println!("{d}");
    }
    Err(Failure::Config(format!("{} diagnostic(s) for {id}", diags.len())))
}

fn run(id: ExperimentId, args: &PlanArgs) -> Result<(), Failure> {
    let (plan, out) = args.resolve(id)?;
    if args.dump_config {
        print!("{}", config::dump_section(id, &Section::from_plan(&plan, out))?);
        return Ok(());
    }
    let diags = plan.validate();
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(Failure::Config(lines.join("\n")));
    }
    init_threads()?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", id.as_str())));
    info!("running {id} over N = {:?}", plan.n_grid);
    let output = experiments::run(&plan).map_err(|e| Failure::Runtime(e.to_string()))?;
    experiments::write_outputs(&out, &output).map_err(|e| Failure::Runtime(e.to_string()))?;
    let summary = &output.summary;
    for c in &summary.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let (Some(s), Some(se)) = (summary.slope, summary.slope_stderr) {
        println!("slope {s:.4} ± {se:.4}");
    }
    println!("wrote {} and {}", out.display(), out.with_extension("json").display());
    if !summary.pass {
        warn!("{id}: at least one check failed");
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    let (id, args) = match command {
        Command::List => {
            for id in ExperimentId::ALL {
                println!("{}", id.kebab());
            }
            return Ok(());
        }
        Command::Validate { experiment, args } => return validate(experiment, args),
        Command::ParamagnetConverge(a) => (ExperimentId::ParamagnetConverge, a),
        Command::BoundCompare(a) => (ExperimentId::BoundCompare, a),
        Command::SphericalMagConverge(a) => (ExperimentId::SphericalMagConverge, a),
        Command::SphericalEnergyConverge(a) => (ExperimentId::SphericalEnergyConverge, a),
        Command::GcDirectCoupling(a) => (ExperimentId::GcDirectCoupling, a),
        Command::DominanceDecay(a) => (ExperimentId::DominanceDecay, a),
        Command::LaplaceCheck(a) => (ExperimentId::LaplaceCheck, a),
        Command::OtOracleCheck(a) => (ExperimentId::OtOracleCheck, a),
    };
    run(id, args)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
