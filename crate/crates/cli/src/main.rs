//! bikefleet: fleet minimization and allocation planning for
//! bike-sharing trip data.
//!
//! Exit codes: 0 ok, 2 I/O, 3 schema/data, 4 precondition,
//! 5 internal consistency.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bikefleet_core::Error;
use clap::{Parser, Subcommand};

use commands::{Ctx, SynthArgs};
use config::CommonArgs;

#[derive(Parser)]
#[command(name = "bikefleet", version, about = "Minimum fleet sizing and bike allocation planning")]
struct Cli {
    /// Flat key=value config file; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output artifacts
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and clean a trip CSV
    Clean {
        #[arg(long)]
        input: PathBuf,
        /// Station registry CSV for resolving station ids
        #[arg(long)]
        stations_registry: Option<PathBuf>,
    },
    /// Identify virtual stations from dockless trip origins
    Stations {
        #[arg(long)]
        input: PathBuf,
    },
    /// Minimum fleet size and per-place bike demand, per day
    Minfleet {
        #[arg(long)]
        input: PathBuf,
        /// stations.json from the stations command (dockless mode)
        #[arg(long)]
        stations_file: Option<PathBuf>,
    },
    /// Allocation plan for a target day from the rolling demand window
    Allocate {
        #[arg(long)]
        input: PathBuf,
        /// Day to plan for, YYYY-MM-DD
        #[arg(long)]
        target_date: String,
        #[arg(long)]
        stations_file: Option<PathBuf>,
    },
    /// Overnight move-in plan after a given day
    Rebalance {
        #[arg(long)]
        input: PathBuf,
        /// The day being closed out, YYYY-MM-DD
        #[arg(long)]
        date: String,
        #[arg(long)]
        stations_file: Option<PathBuf>,
    },
    /// Plan/evaluate/rebalance loop over the whole history
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated window lengths in days
        #[arg(long, default_value = "1,7")]
        u_list: String,
        #[arg(long)]
        stations_file: Option<PathBuf>,
    },
    /// What-if scenarios
    #[command(subcommand)]
    Scenario(Scenario),
    /// Generate a seeded synthetic trip history
    Synth {
        #[arg(long, default_value_t = 50)]
        n_places: usize,
        #[arg(long, default_value_t = 14)]
        days: usize,
        #[arg(long, default_value = "2020-01-06")]
        start_date: String,
        #[arg(long, default_value_t = 5000)]
        base_daily_trips: usize,
        #[arg(long, default_value_t = 1.0)]
        weekday_factor: f64,
        #[arg(long, default_value_t = 0.6)]
        weekend_factor: f64,
        #[arg(long, default_value_t = 0.08)]
        noise_cv: f64,
        /// Mean trip duration in seconds
        #[arg(long, default_value_t = 900.0)]
        duration_mean: f64,
        #[arg(long, default_value_t = 0.5)]
        duration_spread: f64,
        /// Popularity skew across places; 0 is uniform
        #[arg(long, default_value_t = 1.0)]
        od_concentration: f64,
        /// Endpoint jitter around place anchors in meters (dockless)
        #[arg(long, default_value_t = 120.0)]
        jitter: f64,
        #[arg(long, default_value_t = 1)]
        n_companies: u16,
    },
}

#[derive(Subcommand)]
enum Scenario {
    /// Fleet growth under user distancing intervals
    Distancing {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated usage intervals in seconds
        #[arg(long, default_value = "0,3600,21600")]
        c_list: String,
    },
    /// Per-company fleets versus one merged fleet
    Platform {
        #[arg(long)]
        input: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => 2,
        Error::Schema(_) | Error::Data(_) => 3,
        Error::Precondition(_) => 4,
        Error::Consistency(_) => 5,
    }
}

fn run(cli: Cli) -> bikefleet_core::Result<()> {
    let file = match &cli.config {
        Some(path) => config::read_config_file(path)?,
        None => Default::default(),
    };
    let cfg = config::resolve(&cli.common, &file)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::precondition(format!("cannot size worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let ctx = Ctx {
        cfg,
        out_dir: cli.out_dir.clone(),
    };

    match &cli.command {
        Command::Clean { input, stations_registry } => {
            commands::cmd_clean(&ctx, input, stations_registry.as_deref())
        }
        Command::Stations { input } => commands::cmd_stations(&ctx, input),
        Command::Minfleet { input, stations_file } => {
            commands::cmd_minfleet(&ctx, input, stations_file.as_deref())
        }
        Command::Allocate { input, target_date, stations_file } => {
            commands::cmd_allocate(&ctx, input, target_date, stations_file.as_deref())
        }
        Command::Rebalance { input, date, stations_file } => {
            commands::cmd_rebalance(&ctx, input, date, stations_file.as_deref())
        }
        Command::Evaluate { input, u_list, stations_file } => {
            commands::cmd_evaluate(&ctx, input, u_list, stations_file.as_deref())
        }
        Command::Scenario(Scenario::Distancing { input, c_list }) => {
            commands::cmd_scenario_distancing(&ctx, input, c_list)
        }
        Command::Scenario(Scenario::Platform { input }) => {
            commands::cmd_scenario_platform(&ctx, input)
        }
        Command::Synth {
            n_places,
            days,
            start_date,
            base_daily_trips,
            weekday_factor,
            weekend_factor,
            noise_cv,
            duration_mean,
            duration_spread,
            od_concentration,
            jitter,
            n_companies,
        } => commands::cmd_synth(
            &ctx,
            &SynthArgs {
                n_places: *n_places,
                days: *days,
                start_date: start_date.clone(),
                base_daily_trips: *base_daily_trips,
                weekday_factor: *weekday_factor,
                weekend_factor: *weekend_factor,
                noise_cv: *noise_cv,
                duration_mean: *duration_mean,
                duration_spread: *duration_spread,
                od_concentration: *od_concentration,
                jitter: *jitter,
                n_companies: *n_companies,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
