//! Command-line front end: `check`, `derive`, `integrate` and `verify` over a
//! model file.
//!
//! The payload of a command (CSV for `integrate`, expressions for `derive`)
//! goes to `--out` when given and to stdout otherwise. The run report goes to
//! stdout, or to stderr when stdout already carries the payload. Exit status
//! is 0 when every check passes, 1 when one fails and 2 for usage or
//! configuration errors.

mod commands;
mod report;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{FieldError, Result};
use crate::models::{load_model, ChartPoint, ChartSpec, GridSpec, ModelSpec};

pub use report::{CheckResult, RunReport, Table};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "FIELDTK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fieldtk", version, about = "First-order field theories on k-cosymplectic and Lie algebroid charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regularity, pullback identities, structure equations and derivative hygiene.
    Check {
        model: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Print derived expressions: momenta, energy, Hessian, constraints.
    Derive {
        model: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Integrate the model's k-vector field over a grid and write CSV.
    Integrate {
        model: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run a cross-formalism verification suite.
    Verify {
        suite: Suite,
        model: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonOpts {
    /// Node counts per axis, e.g. 33,33
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Grid spacing per axis
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub spacing: Option<Vec<f64>>,
    /// Lower grid corner
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub origin: Option<Vec<f64>>,
    /// Override the tolerance of the main checks
    #[arg(long)]
    pub tol: Option<f64>,
    /// Payload destination
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit the report as JSON
    #[arg(long)]
    pub json: bool,
    /// RK4 substeps per grid edge
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
}

impl CommonOpts {
    pub(crate) fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Legendre,
    SkinnerRusk,
    Tulczyjew,
    Structure,
    Reduction,
    Gradients,
    Constraints,
}

impl std::str::FromStr for Suite {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Suite> {
        <Suite as ValueEnum>::from_str(s, true).map_err(|_| FieldError::Config(format!("unknown suite `{s}`")))
    }
}

/// What a command produced.
pub struct Outcome {
    pub report: RunReport,
    pub payload: Option<String>,
}

/// Errors in the input rather than in the mathematics map to exit status 2.
pub fn is_usage_error(e: &FieldError) -> bool {
    matches!(
        e,
        FieldError::Syntax { .. }
            | FieldError::UndeclaredIdentifier(_)
            | FieldError::ModelParse { .. }
            | FieldError::DimensionMismatch(_)
            | FieldError::IllegalCoordinate { .. }
            | FieldError::Config(_)
            | FieldError::InvalidGrid(_)
            | FieldError::Io(_)
    )
}

/// Sets the global worker pool from `FIELDTK_THREADS` if present. Only the
/// first call has an effect.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    configure_threads();
    let opts = match &cli.command {
        Command::Check { opts, .. }
        | Command::Derive { opts, .. }
        | Command::Integrate { opts, .. }
        | Command::Verify { opts, .. } => opts.clone(),
    };
    match execute(&cli.command) {
        Ok(out) => emit(&out, &opts, stdout, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if is_usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn emit(out: &Outcome, opts: &CommonOpts, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut report_to_stderr = false;
    if let Some(p) = &out.payload {
        match &opts.out {
            Some(path) => {
                if let Err(e) = std::fs::write(path, p) {
                    let _ = writeln!(stderr, "error: {}: {e}", path.display());
                    return 2;
                }
            }
            None => {
                let _ = stdout.write_all(p.as_bytes());
                report_to_stderr = true;
            }
        }
    }
    let text = if opts.json { out.report.to_json() + "\n" } else { out.report.to_text() };
    let sink: &mut dyn Write = if report_to_stderr { stderr } else { stdout };
    let _ = sink.write_all(text.as_bytes());
    if out.report.passed() {
        0
    } else {
        1
    }
}

/// A command stripped of its model path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Check,
    Derive,
    Integrate,
    Verify(Suite),
}

impl Action {
    fn name(self) -> String {
        match self {
            Action::Check => "check".into(),
            Action::Derive => "derive".into(),
            Action::Integrate => "integrate".into(),
            Action::Verify(s) => {
                format!("verify {}", s.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())
            }
        }
    }
}

/// Runs a parsed command without touching stdout.
pub fn execute(cmd: &Command) -> Result<Outcome> {
    let (action, model, opts) = match cmd {
        Command::Check { model, opts } => (Action::Check, model, opts),
        Command::Derive { model, opts } => (Action::Derive, model, opts),
        Command::Integrate { model, opts } => (Action::Integrate, model, opts),
        Command::Verify { suite, model, opts } => (Action::Verify(*suite), model, opts),
    };
    execute_spec(action, &load_model(model)?, opts)
}

/// Runs `action` on an already loaded model.
pub fn execute_spec(action: Action, spec: &ModelSpec, opts: &CommonOpts) -> Result<Outcome> {
    let start = Instant::now();
    let (checks, payload) = match action {
        Action::Check => commands::check(spec, opts)?,
        Action::Derive => commands::derive(spec, opts)?,
        Action::Integrate => commands::integrate(spec, opts)?,
        Action::Verify(suite) => verify::run_suite(suite, spec, opts)?,
    };
    Ok(Outcome {
        report: RunReport {
            command: action.name(),
            model: spec.path.as_deref().map(display_path).unwrap_or_else(|| "<memory>".into()),
            checks,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        payload,
    })
}

fn display_path(p: &Path) -> String {
    p.display().to_string()
}

/// Grid from the flags, falling back to the model's `[grid]`.
pub(crate) fn resolve_grid(spec: &ModelSpec, opts: &CommonOpts) -> Result<GridSpec> {
    let k = spec.chart.k;
    let model = spec.grid.as_ref();
    let counts = match (&opts.grid, model) {
        (Some(c), _) => c.clone(),
        (None, Some(g)) => g.counts.clone(),
        (None, None) => return Err(FieldError::Config("no grid: pass --grid or add a [grid] section".into())),
    };
    let spacing = match (&opts.spacing, model) {
        (Some(s), _) => s.clone(),
        (None, Some(g)) if g.counts == counts => g.spacing.clone(),
        _ => GridSpec::unit_box(&counts).spacing,
    };
    let origin = match (&opts.origin, model) {
        (Some(o), _) => o.clone(),
        (None, Some(g)) => g.origin.clone(),
        (None, None) => vec![0.0; counts.len()],
    };
    let g = GridSpec { counts, spacing, origin };
    g.validate(k)?;
    Ok(g)
}

/// Initial point on `chart` with times at the grid origin.
pub(crate) fn initial_on(spec: &ModelSpec, chart: ChartSpec, grid: &GridSpec) -> Result<ChartPoint> {
    let mut x = spec.initial_point_on(chart)?;
    x.values[..chart.k].copy_from_slice(&grid.origin);
    Ok(x)
}

#[cfg(test)]
mod tests;
