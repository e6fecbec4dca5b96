use clap::{Parser, Subcommand};
use spintoda_cli::{run, CliError, Command, Overrides};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spintoda", version, about = "Spin Calogero-Moser and spin Toda flows: RK4, exact factorization, verification")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    output: Option<String>,

    /// Trajectory format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comparison tolerance (compare) or step-halving tolerance (simulate).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate with fixed-step RK4.
    Simulate,
    /// Solve by the factorization method.
    SolveExact,
    /// Run both methods and report the deviation.
    Compare,
    /// Run a randomized verification suite.
    Verify {
        /// mdybe, algebroid, poisson-axioms, lax, scaling or reduction.
        suite: String,
        /// Number of random cases.
        #[arg(long)]
        cases: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let (cmd, cases) = match &cli.command {
        Cmd::Simulate => (Command::Simulate, None),
        Cmd::SolveExact => (Command::SolveExact, None),
        Cmd::Compare => (Command::Compare, None),
        Cmd::Verify { suite, cases } => (Command::Verify { suite }, *cases),
    };
    let ov = Overrides { format: cli.format.clone(), seed: cli.seed, tolerance: cli.tolerance, cases };
    let cfg_out = spintoda_cli::config::parse_config(&text)
        .ok()
        .and_then(|c| c.output.and_then(|o| o.path));
    let out_path = cli.output.clone().or(cfg_out);
    let em = run(cmd, &text, &ov, out_path.as_deref())?;
    for n in &em.notes {
        eprintln!("{n}");
    }
    match &out_path {
        Some(p) => std::fs::write(p, &em.body).map_err(|e| CliError::Io(format!("{p}: {e}")))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&em.body).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(em.exit)
}
