use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use egm_cli::{CliError, FileLaw, TransformArgs, EXIT_ERROR};
use egm_core::grid::Interpolation;
use egm_core::lorentz::FieldRule;

#[derive(Parser)]
#[command(
    name = "egm",
    version,
    about = "Biquaternion EGM field scenarios, transforms and audits"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Strength,
    Source,
    Printed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interp {
    Cubic,
    Linear,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write report.json plus field dumps.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Set a scenario value by dotted path, e.g. grid.h=0.05.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check one conservation law on a CSV field dump.
    Audit {
        fields: PathBuf,
        #[arg(long, value_parser = |s: &str| s.parse::<FileLaw>())]
        law: FileLaw,
        /// Charge-current dump for the maxwell and energy laws (default zero).
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Carry a CSV field dump into a moving frame.
    Transform {
        fields: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        v: f64,
        #[arg(long, value_parser = egm_cli::parse_vec3, default_value = "1,0,0")]
        e: [f64; 3],
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_enum, default_value_t = Rule::Strength)]
        rule: Rule,
        #[arg(long, value_enum, default_value_t = Interp::Cubic)]
        interpolation: Interp,
        #[arg(long, default_value = "fields_transformed.csv")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run {
            scenario,
            out,
            overrides,
        } => egm_cli::run_command(&scenario, out, &overrides),
        Command::Audit {
            fields,
            law,
            theta,
            tol,
        } => egm_cli::audit_command(&fields, law, theta.as_deref(), tol),
        Command::Transform {
            fields,
            v,
            e,
            phi,
            rule,
            interpolation,
            out,
        } => {
            let args = TransformArgs {
                v,
                e,
                phi,
                rule: match rule {
                    Rule::Strength => FieldRule::Strength,
                    Rule::Source => FieldRule::Source,
                    Rule::Printed => FieldRule::Printed,
                },
                interpolation: match interpolation {
                    Interp::Cubic => Interpolation::Cubic,
                    Interp::Linear => Interpolation::Linear,
                },
            };
            egm_cli::transform_command(&fields, &args, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EGM_LOG", "error")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
