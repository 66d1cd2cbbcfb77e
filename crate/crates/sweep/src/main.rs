use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gkp_sweep::config::{CutoffPolicy, OutputFormat, SweepConfig};
use gkp_sweep::error::{SweepError, EXIT_CONFIG, EXIT_FAILURE};
use gkp_sweep::report::{optimize_lambda_report, state_info, validate};
use gkp_sweep::sweep::unconverged;
use gkp_sweep::table::write_rows;
use gkp_sweep::{run_fig1a, run_fig1b, run_fig1c, SweepRow};

#[derive(Parser)]
#[command(name = "gkp-readout", version, about = "Readout error sweeps for GKP qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simple, improved and homodyne readout and the Helstrom bound versus squeezing.
    Fig1a(SweepArgs),
    /// Fixed interaction strengths versus squeezing, with the optimal envelope.
    Fig1b(SweepArgs),
    /// Readout of mixed code states after Gaussian displacement noise.
    Fig1c(SweepArgs),
    /// Optimal interaction strength and error probabilities from the closed forms.
    OptimizeLambda {
        #[arg(long, allow_negative_numbers = true)]
        delta_db: f64,
    },
    /// Diagnostics of the code states at one squeezing level.
    StateInfo {
        #[arg(long, allow_negative_numbers = true)]
        delta_db: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Envelope width; defaults to 1/Δ.
        #[arg(long)]
        kappa: Option<f64>,
        /// `auto` or a Fock cutoff.
        #[arg(long, default_value = "auto")]
        cutoff: String,
        /// Write logical 0 to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        dump_format: Format,
    },
    /// Run the invariant suite.
    Validate,
}

#[derive(Args)]
struct SweepArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; `-` for stdout.
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Permit squeezing outside 4 to 16 dB.
    #[arg(long)]
    allow_wide_range: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn load_config(args: &SweepArgs) -> Result<SweepConfig, SweepError> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| SweepError::io(path.display().to_string(), e))?;
        cfg.apply_text(&text)?;
    }
    for item in &args.set {
        cfg.apply_text(item)?;
    }
    if let Some(out) = &args.output {
        cfg.set("output", out)?;
    }
    if let Some(f) = args.format {
        cfg.format = f.into();
    }
    if args.allow_wide_range {
        cfg.allow_wide_range = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<(), SweepError> {
    match &cfg.output_path {
        Some(path) => {
            let name = path.display().to_string();
            let file = File::create(path).map_err(|e| SweepError::io(name.clone(), e))?;
            let mut w = BufWriter::new(file);
            write_rows(rows, cfg.format, &mut w).map_err(|e| SweepError::io(name.clone(), e))?;
            w.flush().map_err(|e| SweepError::io(name, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_rows(rows, cfg.format, &mut w).map_err(|e| SweepError::io("stdout", e))
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), SweepError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialise");
    println!("{text}");
    Ok(())
}

fn sweep(args: &SweepArgs, run: fn(&SweepConfig) -> Result<Vec<SweepRow>, SweepError>) -> Result<(), SweepError> {
    let cfg = load_config(args)?;
    let rows = run(&cfg)?;
    emit(&cfg, &rows)?;
    match unconverged(&rows) {
        0 => Ok(()),
        failed => Err(SweepError::Unconverged {
            failed,
            total: rows.len(),
        }),
    }
}

fn run(cli: Cli) -> Result<(), SweepError> {
    match cli.command {
        Command::Fig1a(args) => sweep(&args, run_fig1a),
        Command::Fig1b(args) => sweep(&args, run_fig1b),
        Command::Fig1c(args) => sweep(&args, run_fig1c),
        Command::OptimizeLambda { delta_db } => print_json(&optimize_lambda_report(delta_db)?),
        Command::StateInfo {
            delta_db,
            sigma,
            kappa,
            cutoff,
            dump,
            dump_format,
        } => {
            let mut cfg = SweepConfig::default();
            cfg.set("cutoff", &cutoff)?;
            if let CutoffPolicy::Fixed(_) = cfg.cutoff_policy {
                cfg.validate()?;
            }
            let (info, state) = state_info(&cfg, delta_db, sigma, kappa)?;
            if let Some(path) = dump {
                let text = match dump_format {
                    Format::Json => state.to_json()?,
                    Format::Csv => state.to_csv()?,
                };
                std::fs::write(&path, text).map_err(|e| SweepError::io(path.display().to_string(), e))?;
            }
            print_json(&info)
        }
        Command::Validate => {
            let checks = validate()?;
            for c in &checks {
                eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            print_json(&checks)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(SweepError::Invariant(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = serde_json::json!({
                "error": "usage",
                "message": e.to_string().trim().to_string(),
                "exit_code": EXIT_CONFIG,
            });
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_FAILURE as u8))
        }
    }
}
