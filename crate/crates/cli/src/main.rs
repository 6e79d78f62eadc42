//! `busse-lab`: configuration-driven driver for simulations and experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{preset_names, preset_text, ConfigErrors, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "busse-lab",
    version,
    about = "Stochastic Klausmeier model: simulations, patterns and exit-time experiments"
)]
struct Cli {
    /// TOML configuration file (applied after the preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (`pattern` also accepts a `.bin` file path).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BUSSE_LAB_THREADS")]
    threads: Option<usize>,
    /// Named parameter set; `desk` picks the desk-scale set of the subcommand.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Rainfall (also replaces the rainfall grid).
    #[arg(long)]
    a: Option<f64>,
    /// Noise intensity (also replaces the noise list).
    #[arg(long)]
    sigma: Option<f64>,
    /// Pulse number (also replaces the wave-number grid).
    #[arg(long)]
    n: Option<usize>,
    /// Time horizon: `t_max` of exit/stationary runs and `t_end` of plain runs.
    #[arg(long)]
    tmax: Option<f64>,
    /// Realisations per cell (also the run count of `from-uniform`).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one realisation and record classifier series.
    Simulate(Overrides),
    /// Compute a steady periodic pattern and write it as a snapshot.
    Pattern(Overrides),
    /// Most unstable mode, Turing point and the dispersion curve.
    Dispersion(Overrides),
    /// Mean first exit times over a rainfall by wave-number grid.
    ExitMap(Overrides),
    /// Mean first exit time against noise intensity, with a power-law fit.
    ExitSigma(Overrides),
    /// Ensemble-averaged local-wave-number distributions over time.
    Stationary(Overrides),
    /// Predominant wave numbers selected from the perturbed homogeneous state.
    FromUniform(Overrides),
    /// Delete one pulse of a steady pattern and follow the classifiers.
    GapFill(Overrides),
    /// Empirical covariance of the noise increments against the kernel.
    ValidateNoise(Overrides),
    /// List the available presets.
    Presets,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Pattern(_) => "pattern",
            Command::Dispersion(_) => "dispersion",
            Command::ExitMap(_) => "exit-map",
            Command::ExitSigma(_) => "exit-sigma",
            Command::Stationary(_) => "stationary",
            Command::FromUniform(_) => "from-uniform",
            Command::GapFill(_) => "gap-fill",
            Command::ValidateNoise(_) => "validate-noise",
            Command::Presets => "presets",
        }
    }

    fn overrides(&self) -> Overrides {
        match self {
            Command::Simulate(o)
            | Command::Pattern(o)
            | Command::Dispersion(o)
            | Command::ExitMap(o)
            | Command::ExitSigma(o)
            | Command::Stationary(o)
            | Command::FromUniform(o)
            | Command::GapFill(o)
            | Command::ValidateNoise(o) => o.clone(),
            Command::Presets => Overrides::default(),
        }
    }
}

/// Exit status for malformed configurations.
const EXIT_CONFIG: u8 = 2;
/// Exit status for a numerical blow-up.
const EXIT_BLOW_UP: u8 = 3;

fn build_config(cli: &Cli) -> Result<RunConfig, ConfigErrors> {
    let command = cli.command.name();
    let mut cfg = RunConfig::default();
    if let Some(name) = &cli.preset {
        let text = preset_text(name, command).ok_or_else(|| {
            ConfigErrors(vec![format!(
                "unknown preset `{name}` for `{command}` (available: desk, {})",
                preset_names().collect::<Vec<_>>().join(", ")
            )])
        })?;
        cfg = cfg.merge_str(text)?;
    }
    if let Some(path) = &cli.config {
        cfg = cfg.load(path)?;
    }
    let o = cli.command.overrides();
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(a) = o.a {
        cfg.model.a = a;
        cfg.experiment.a_grid = vec![a];
    }
    if let Some(sigma) = o.sigma {
        cfg.model.sigma = sigma;
        cfg.experiment.sigmas = vec![sigma];
    }
    if let Some(n) = o.n {
        cfg.experiment.n = n;
        cfg.experiment.k_grid = vec![n];
        cfg.experiment.init = format!("pattern:{n}");
    }
    if let Some(t) = o.tmax {
        cfg.experiment.t_max = t;
        cfg.schedule.t_end = t;
    }
    if let Some(i) = o.iters {
        cfg.experiment.iterations = i;
        cfg.experiment.runs = i;
    }
    if let Some(dt) = o.dt {
        cfg.schedule.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Presets = cli.command {
        for name in preset_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("global pool is configured once");
    }
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprint!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match commands::run(cli.command.name(), &cfg, &cli.out) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(commands::Failure::Core(e @ busse_core::Error::NonFinite { .. })) => {
            eprintln!("error: numerical blow-up: {e}");
            ExitCode::from(EXIT_BLOW_UP)
        }
        Err(commands::Failure::Core(e @ busse_core::Error::InvalidParameter { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
