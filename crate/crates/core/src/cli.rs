//! Command-line front end: `simulate`, `validate`, `compare`, `plot` and
//! `calibrate`.
//!
//! Exit codes: 0 on success, 1 when a run finishes with findings (berth plan
//! violations, unfinished service work), 2 on usage or input errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::berth::{plan_from_records, validate_plan, VIOLATION_CSV_HEADER};
use crate::calibrate::{calibrate, parse_grid, read_targets, CalibrationError, ParamGrid};
use crate::config::{load_config, ConfigError, Scalar, ScenarioConfig, ServiceMode};
use crate::logsheet::{parse_log_sheet, LogSheetError};
use crate::model::{QuayLayout, VesselCall};
use crate::report::{build_report, compare, KpiReport, ReportError};
use crate::sim::{simulate, SimError, SimStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    LogSheet {
        path: PathBuf,
        #[source]
        source: LogSheetError,
    },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Override(ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{0} berth plan violation(s)")]
    Violations(usize),
    #[error("run ended with unfinished work: vessels {unfinished} ({pending} events pending)")]
    Unfinished { unfinished: String, pending: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violations(_) | CliError::Unfinished { .. } => EXIT_FINDINGS,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "quaysim",
    version,
    about = "Discrete-event simulation of container terminal quayside operations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a ship file and write the per-vessel KPI CSV.
    Simulate(SimulateArgs),
    /// Check the recorded berth plan of a ship file for space-time overlaps.
    Validate(ValidateArgs),
    /// Compare two KPI CSVs and report the service-time reduction.
    Compare(CompareArgs),
    /// Draw baseline vs candidate service time per vessel.
    Plot(PlotArgs),
    /// Grid-search service parameters against per-vessel target minutes.
    Calibrate(CalibrateArgs),
}

/// Service parameter overrides; each flag also accepts its hyphenated form.
#[derive(Debug, Default, Args)]
pub struct ParamOverrides {
    #[arg(
        long = "crane_rate_moves_per_min",
        alias = "crane-rate-moves-per-min",
        value_name = "RATE"
    )]
    pub crane_rate_moves_per_min: Option<String>,
    #[arg(
        long = "interference_alpha",
        alias = "interference-alpha",
        value_name = "ALPHA"
    )]
    pub interference_alpha: Option<String>,
    #[arg(
        long = "max_cranes_per_vessel",
        alias = "max-cranes-per-vessel",
        value_name = "N"
    )]
    pub max_cranes_per_vessel: Option<String>,
    #[arg(
        long = "moves_per_crane_threshold",
        alias = "moves-per-crane-threshold",
        value_name = "MOVES"
    )]
    pub moves_per_crane_threshold: Option<String>,
    #[arg(
        long = "truck_cycle_min",
        alias = "truck-cycle-min",
        value_name = "MIN"
    )]
    pub truck_cycle_min: Option<String>,
    #[arg(
        long = "yard_crane_service_min",
        alias = "yard-crane-service-min",
        value_name = "MIN"
    )]
    pub yard_crane_service_min: Option<String>,
}

impl ParamOverrides {
    fn apply(&self, config: &mut ScenarioConfig) -> Result<(), CliError> {
        for (key, value) in [
            ("crane_rate_moves_per_min", &self.crane_rate_moves_per_min),
            ("interference_alpha", &self.interference_alpha),
            ("max_cranes_per_vessel", &self.max_cranes_per_vessel),
            ("moves_per_crane_threshold", &self.moves_per_crane_threshold),
            ("truck_cycle_min", &self.truck_cycle_min),
            ("yard_crane_service_min", &self.yard_crane_service_min),
        ] {
            if let Some(v) = value {
                config
                    .set(key, &Scalar::Text(v.clone()))
                    .map_err(CliError::Override)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ship log-sheet CSV.
    #[arg(long)]
    pub ships: PathBuf,
    /// Scenario config (TOML or JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Service mode: aggregate, detailed or recorded.
    #[arg(long)]
    pub mode: Option<ServiceMode>,
    /// Seed for the stochastic stage times.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw exponential stage times in detailed mode.
    #[arg(long)]
    pub stochastic: bool,
    /// Write the event trace (time, kind, entities; tab-separated).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// KPI CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Reject unknown config keys.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub ships: PathBuf,
    /// Quay length in metres (default: from --config, else 1040).
    #[arg(long = "quay-length", alias = "quay_length_m")]
    pub quay_length: Option<u32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    /// Also emit the per-vessel comparison CSV, to PATH or to stdout.
    #[arg(long, value_name = "PATH", num_args = 0..=1)]
    pub csv: Option<Option<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    /// SVG output; the plotted numbers go to the same path with `.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ships: PathBuf,
    /// CSV with vessel_id/ship_no and service_min/target_min columns.
    #[arg(long)]
    pub targets: PathBuf,
    /// Grid document (TOML).
    #[arg(long)]
    pub grid: PathBuf,
    /// Best parameter point (TOML) output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<ServiceMode>,
    #[arg(long)]
    pub strict: bool,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn load_ships(path: &Path, config: &ScenarioConfig) -> Result<Vec<VesselCall>, CliError> {
    let text = read_text(path)?;
    parse_log_sheet(text.as_bytes(), &config.epoch).map_err(|source| CliError::LogSheet {
        path: path.to_path_buf(),
        source,
    })
}

fn load_scenario(path: Option<&Path>, strict: bool) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => load_config(p, strict).map_err(|source| CliError::Config {
            path: p.to_path_buf(),
            source,
        }),
        None => Ok(ScenarioConfig::default()),
    }
}

fn checked(config: &ScenarioConfig, vessels: &[VesselCall], path: &Path) -> Result<(), CliError> {
    config
        .validate()
        .and_then(|_| config.check_vessels(vessels))
        .map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
}

fn read_report(path: &Path) -> Result<KpiReport, CliError> {
    let text = read_text(path)?;
    KpiReport::read_csv(text.as_bytes()).map_err(CliError::from)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = load_scenario(Some(&args.config), args.strict)?;
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.stochastic |= args.stochastic;
    args.params.apply(&mut config)?;
    let vessels = load_ships(&args.ships, &config)?;
    checked(&config, &vessels, &args.config)?;

    let outcome = simulate(&config, &vessels)?;
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        outcome
            .trace
            .write_tsv(&mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
    }
    if let SimStatus::PendingWork {
        unfinished,
        pending_events,
    } = &outcome.status
    {
        return Err(CliError::Unfinished {
            unfinished: unfinished
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
            pending: *pending_events,
        });
    }
    let report = build_report(&outcome, &vessels, &config)?;
    let mut w = create(&args.out)?;
    report.write_csv(&mut w)?;
    w.flush().map_err(io_err(&args.out))?;
    let _ = writeln!(out, "{}", report.summary());
    Ok(())
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_scenario(args.config.as_deref(), false)?;
    let vessels = load_ships(&args.ships, &config)?;
    let quay = QuayLayout {
        length_m: args.quay_length.unwrap_or(config.quay_length_m),
    };
    let plan = plan_from_records(&vessels, &quay);
    let violations = validate_plan(&plan, &quay);
    let _ = writeln!(out, "{VIOLATION_CSV_HEADER}");
    for v in &violations {
        let _ = writeln!(out, "{}", v.csv_row());
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violations(violations.len()))
    }
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let baseline = read_report(&args.baseline)?;
    let candidate = read_report(&args.candidate)?;
    let result = compare(&baseline, &candidate)?;
    let _ = writeln!(out, "{}", result.render());
    match &args.csv {
        None => {}
        Some(None) => result.write_csv(&mut *out)?,
        Some(Some(path)) => {
            let mut w = create(path)?;
            result.write_csv(&mut w)?;
            w.flush().map_err(io_err(path))?;
        }
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let baseline = read_report(&args.baseline)?;
    let candidate = read_report(&args.candidate)?;
    let artifact = crate::plot::emit_plot(&baseline, &candidate, &args.out)?;
    let _ = writeln!(
        out,
        "wrote {} ({} bars) and {} ({} rows)",
        artifact.svg_path.display(),
        artifact.bars,
        artifact.csv_path.display(),
        artifact.rows.len()
    );
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = load_scenario(args.config.as_deref(), args.strict)?;
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    let vessels = load_ships(&args.ships, &config)?;
    if let Some(path) = &args.config {
        checked(&config, &vessels, path)?;
    }
    let targets = read_targets(read_text(&args.targets)?.as_bytes())?;
    let grid: ParamGrid = parse_grid(&read_text(&args.grid)?, &config.params)?;
    let result = calibrate(&config, &vessels, &targets, &grid)?;
    fs::write(&args.out, result.to_toml()).map_err(io_err(&args.out))?;
    let _ = writeln!(
        out,
        "best of {} points: rate={} alpha={} max_cranes={} -> {}",
        result.evaluated,
        crate::time::format_decimal(&result.best.crane_rate_moves_per_min),
        crate::time::format_decimal(&result.best.interference_alpha),
        result.best.max_cranes_per_vessel,
        result.loss_text()
    );
    Ok(())
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Plot(a) => cmd_plot(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("quaysim").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2_with_synopsis() {
        let (code, _, err) = run_args(&["simulate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
        let (code, _, _) = run_args(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("simulate"));
    }

    #[test]
    fn missing_input_is_exit_2() {
        let (code, _, err) = run_args(&[
            "compare",
            "--baseline",
            "/nonexistent/a.csv",
            "--candidate",
            "/nonexistent/b.csv",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("/nonexistent/a.csv"));
    }

    #[test]
    fn overflowing_quay_is_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let ships = dir.path().join("ships.csv");
        fs::write(
            &ships,
            "ship_no,length_m,op_start,op_end,imp_20,imp_40,exp_20,exp_40\n\
             1,300,2014-03-03 01:00,2014-03-03 05:00,1,0,0,0\n\
             2,300,2014-03-03 02:00,2014-03-03 06:00,1,0,0,0\n",
        )
        .unwrap();
        let path = ships.to_str().unwrap();
        let (code, out, _) = run_args(&["validate", "--ships", path, "--quay-length", "500"]);
        assert_eq!(code, EXIT_FINDINGS);
        assert!(out.starts_with(VIOLATION_CSV_HEADER));
        assert_eq!(out.lines().count(), 2);
        let (code, _, _) = run_args(&["validate", "--ships", path]);
        assert_eq!(code, EXIT_OK);
    }

    #[test]
    fn hyphenated_param_flags_are_accepted() {
        let cli = Cli::try_parse_from([
            "quaysim",
            "simulate",
            "--ships",
            "s",
            "--config",
            "c",
            "--out",
            "o",
            "--crane-rate-moves-per-min",
            "0.7",
            "--interference_alpha",
            "0.85",
        ])
        .unwrap();
        let Command::Simulate(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.params.crane_rate_moves_per_min.as_deref(), Some("0.7"));
        assert_eq!(a.params.interference_alpha.as_deref(), Some("0.85"));
    }
}
