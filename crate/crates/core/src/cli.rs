//! Command-line front end. Exit codes: 0 success, 1 configuration or I/O
//! error, 2 simulation integrity fault.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::{run, SimError};
use crate::metrics::SummaryRow;
use crate::report::{self, CaseTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INTEGRITY: i32 = 2;

const DEFAULT_OUT: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "cav-nrc", version, about = "Microscopic traffic simulation of road closures under mixed CAV/HDV traffic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trips, edge speeds, summary and safety CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Halt on the first integrity fault.
        #[arg(long)]
        strict: bool,
    },
    /// Run ORG/NRC at 0% and 100% CAV and write table.csv.
    Compare {
        #[arg(long)]
        org: PathBuf,
        #[arg(long)]
        nrc: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario per CAV penetration percentage and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,25,50,75,100")]
        penetration: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Turn edge_speeds.csv into per-edge midpoints with mean speed.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Integrity(_) => EXIT_INTEGRITY,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) => CliError::Config(e.to_string()),
            SimError::Integrity { .. } => CliError::Integrity(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command, prints errors to
/// stderr and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, seed, out, strict } => {
            let mut cfg = ScenarioConfig::load(config)?;
            if let Some(seed) = seed {
                cfg.set_seed(*seed);
            }
            if *strict {
                cfg.engine.strict = true;
            }
            let dir = out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let row = simulate(&cfg, &dir)?;
            println!("{}", describe(&row));
            Ok(())
        }
        Command::Compare { org, nrc, out } => {
            let table = compare(&ScenarioConfig::load(org)?, &ScenarioConfig::load(nrc)?, out)?;
            print!("{}", report::table_csv(&table));
            Ok(())
        }
        Command::Sweep { config, penetration, out, jobs } => {
            let rows = sweep(&ScenarioConfig::load(config)?, penetration, out, *jobs)?;
            print!("{}", report::sweep_csv(&rows));
            Ok(())
        }
        Command::Heatmap { input, out } => heatmap(input, out),
    }
}

fn describe(r: &SummaryRow) -> String {
    let tt = r.mean_travel_time.map_or_else(|| "NA".to_string(), |t| format!("{t:.2} s"));
    format!(
        "mean travel time {tt}, fuel {:.2} l, CO2 {:.2} kg, TTC {}, PET {}, finished {}, unfinished {}",
        r.fuel, r.co2, r.ttc_count, r.pet_count, r.finished, r.unfinished
    )
}

/// Runs one configured scenario and writes its CSVs into `dir`.
pub fn simulate(cfg: &ScenarioConfig, dir: &Path) -> Result<SummaryRow, CliError> {
    let scenario = cfg.build()?;
    let network = scenario.network.clone();
    let output = run(scenario)?;
    for fault in &output.faults {
        eprintln!("integrity: {fault}");
    }
    report::write_run(dir, &network, &output).map_err(|e| io_err(dir, e))
}

/// The four comparison cases. Both configs are forced to 0% and 100% CAV.
pub fn compare(org: &ScenarioConfig, nrc: &ScenarioConfig, out: &Path) -> Result<CaseTable, CliError> {
    let cases = [("org", org, 0.0), ("nrc", nrc, 0.0), ("org_cav", org, 1.0), ("nrc_cav", nrc, 1.0)];
    let rows = cases
        .par_iter()
        .map(|(name, cfg, p)| {
            let mut cfg = (*cfg).clone();
            cfg.demand.penetration = *p;
            simulate(&cfg, &out.join(name))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = CaseTable { org: rows[0], nrc: rows[1], org_cav: rows[2], nrc_cav: rows[3] };
    let path = out.join("table.csv");
    fs::write(&path, report::table_csv(&table)).map_err(|e| io_err(&path, e))?;
    Ok(table)
}

/// Runs every penetration percentage (sorted, deduplicated) with shared
/// demand, each into its own `p<pct>` subdirectory.
pub fn sweep(
    cfg: &ScenarioConfig,
    penetration: &[f64],
    out: &Path,
    jobs: Option<usize>,
) -> Result<Vec<(f64, SummaryRow)>, CliError> {
    let mut points = penetration.to_vec();
    if let Some(bad) = points.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(CliError::Config(format!("penetration {bad} outside [0, 100]")));
    }
    if points.is_empty() {
        return Err(CliError::Config("empty penetration list".into()));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let work = || {
        points
            .par_iter()
            .map(|&p| {
                let mut point = cfg.clone();
                point.demand.penetration = p / 100.0;
                simulate(&point, &out.join(format!("p{p}"))).map(|row| (p, row))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let path = out.join("sweep.csv");
    fs::write(&path, report::sweep_csv(&rows)).map_err(|e| io_err(&path, e))?;
    Ok(rows)
}

pub fn heatmap(input: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let rows = report::parse_edge_speeds(&text).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(out, report::heatmap_csv(&rows)).map_err(|e| io_err(out, e))
}
