use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fracspike_cli::scenario::{GridSpec, ParamsSpec, Tolerances};
use fracspike_cli::{exit_code, run_scenario, Cache, Failure, Mode, RunOptions, Scenario, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "fracspike", version, about = "Multi-spike standing waves of the fractional NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log progress (cache hits, solver stages) to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Args)]
struct Common {
    /// Parent directory of the per-scenario output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent ε values.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Ground-state cache directory [default: <out>/cache].
    #[arg(long, env = "FRACSPIKE_CACHE")]
    cache: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> RunOptions {
        let dir = self.cache.clone().unwrap_or_else(|| fracspike_cli::run::default_cache_dir(&self.out));
        RunOptions { out: self.out.clone(), workers: self.workers, cache: Cache::new(dir) }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve (or load) the unit-height ground state and write its profile.
    GroundState {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        dim: usize,
        /// Half-width L of the torus.
        #[arg(long = "L")]
        half_width: f64,
        /// Points per axis M.
        #[arg(long = "M")]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario over a replacement list of ε values.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn execute(cli: Cli) -> Result<()> {
    let (resolved, common) = match cli.command {
        Command::Run { scenario, common } => (Scenario::load(&scenario)?, common),
        Command::GroundState { s, p, dim, half_width, points, common } => {
            let sc = Scenario {
                schema: SCHEMA_VERSION,
                name: format!("ground_state_s{s}_p{p}_N{dim}_L{half_width}_M{points}"),
                params: ParamsSpec { s, p },
                grid: GridSpec { dim, half_width, points },
                potential: None,
                mode: Mode::GroundState,
                epsilons: Vec::new(),
                k: 1,
                region: None,
                seeds: None,
                search: None,
                tolerances: Tolerances::default(),
            };
            let text = serde_json::to_string_pretty(&sc)?;
            (Scenario::parse(&text)?, common)
        }
        Command::Sweep { scenario, epsilons, common } => {
            let mut r = Scenario::load(&scenario)?;
            let mut sc = r.scenario.clone();
            sc.epsilons = epsilons;
            let text = serde_json::to_string_pretty(&sc)?;
            r = Scenario::parse(&text).map_err(|f| match f {
                Failure::Config(m) => Failure::Config(format!("{} with --epsilons: {m}", scenario.display())),
                other => other,
            })?;
            (r, common)
        }
    };
    let summary = run_scenario(&resolved, &common.options())?;
    println!("{}", summary.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
