//! Command-line front end: configuration, experiment orchestration and
//! report emission. The binary in `main.rs` is a thin clap wrapper around
//! [`run`].

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use config::{ConfigError, RunConfig};
use output::Format;
use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Engine errors raised before any time step are input problems; the rest
/// are numerical.
pub fn classify(e: spintoda::Error) -> CliError {
    use spintoda::Error as E;
    match e {
        E::UnsupportedAlgebra { .. }
        | E::Dimension { .. }
        | E::RootKey(_)
        | E::Domain { .. }
        | E::OutOfChart { .. }
        | E::Precondition(_)
        | E::UnknownTag(_) => CliError::Validation(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command<'a> {
    Simulate,
    SolveExact,
    Compare,
    Verify { suite: &'a str },
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub cases: Option<usize>,
}

/// What a command produced: the document to write and the exit status.
#[derive(Debug, Clone)]
pub struct Emission {
    pub body: Vec<u8>,
    pub exit: i32,
    /// Human-readable notes for stderr.
    pub notes: Vec<String>,
}

fn apply(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(s) = ov.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = ov.tolerance {
        cfg.tolerance = Some(t);
    }
    if let Some(c) = ov.cases {
        cfg.cases = Some(c);
    }
    if let Some(f) = &ov.format {
        cfg.output.get_or_insert_with(Default::default).format = Some(f.clone());
    }
}

/// Output format: explicit setting, else `.json` extension, else CSV.
pub fn resolve_format(cfg: &RunConfig, path: Option<&str>) -> Result<Format, CliError> {
    if let Some(f) = cfg.output.as_ref().and_then(|o| o.format.as_deref()) {
        return Format::parse(f).map_err(|m| CliError::Validation(format!("output.format: {m}")));
    }
    let json = path.is_some_and(|p| p.ends_with(".json"));
    Ok(if json { Format::Json } else { Format::Csv })
}

/// Runs a command on config text. `output_path` only steers format
/// inference; writing is left to the caller.
pub fn run(cmd: Command<'_>, config_text: &str, ov: &Overrides, output_path: Option<&str>) -> Result<Emission, CliError> {
    let mut cfg = config::parse_config(config_text)?;
    apply(&mut cfg, ov);
    let path = output_path.or(cfg.output.as_ref().and_then(|o| o.path.as_deref()));
    match cmd {
        Command::Simulate | Command::SolveExact | Command::Compare => {
            let format = resolve_format(&cfg, path)?;
            commands::trajectory_command(cmd, &cfg, format)
        }
        Command::Verify { suite } => verify::run_suite(suite, &cfg),
    }
}
