//! Command line entry point: solve model files, convert MATPOWER cases.
//!
//! Exit codes: 0 on a converged solve or successful conversion, 1 on
//! non-convergence, 2 on parse/validation/usage errors (diagnostics go to
//! standard error as file:line:column).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modsolver::ast::ReportLevel;
use modsolver::engine::{run_document, RunOptions};
use modsolver::error::{Error, Severity};
use modsolver::matpower::{emit_model, load_config, ConvertOptions, Format, Symbols};
use modsolver::report::{emit_report, trace_csv};

#[derive(Parser)]
#[command(
    name = "modsolver",
    version,
    about = "Symbolic model-driven solver for steady-state power-network computation",
    long_about = "Solves declarative model files (power flow via Newton-Raphson, state \
estimation via equality-constrained weighted least squares) and converts MATPOWER case \
files into the model language.\n\nInvoking with a bare model file path is shorthand for \
`modsolver solve <file>`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and solve a model file
    Solve {
        /// Model file (conventionally .mod)
        input: PathBuf,
        /// Write the report here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for rnd(...) draws
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the header report level: Solved, All or AllDetails
        #[arg(long)]
        report: Option<String>,
    },
    /// Convert a MATPOWER case file into an equivalent model file
    Convert {
        /// Case file (.m)
        input: PathBuf,
        /// Converter configuration (XML)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the output format: polar, rectangular or complex
        #[arg(long)]
        format: Option<String>,
        /// Override the symbol style: greek or ascii
        #[arg(long)]
        symbols: Option<String>,
        /// Output path (defaults to the input with a .mod extension)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // `modsolver path/to/file.mod` is an alias for `modsolver solve ...`.
    let mut args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    if let Some(first) = args.get(1) {
        let s = first.to_string_lossy();
        let known = ["solve", "convert", "help"];
        if !known.contains(&s.as_ref()) && !s.starts_with('-') {
            args.insert(1, "solve".into());
        }
    }
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve {
            input,
            out,
            seed,
            report,
        } => solve(&input, out.as_deref(), seed, report.as_deref()),
        Command::Convert {
            input,
            config,
            format,
            symbols,
            out,
        } => convert(
            &input,
            config.as_deref(),
            format.as_deref(),
            symbols.as_deref(),
            out.as_deref(),
        ),
    }
}

fn solve(
    input: &Path,
    out: Option<&Path>,
    seed: u64,
    report_override: Option<&str>,
) -> Result<ExitCode, Error> {
    let display = input.display();
    let source =
        std::fs::read_to_string(input).map_err(|e| Error::Run(format!("{display}: {e}")))?;
    let report_override = match report_override {
        Some(word) => Some(ReportLevel::from_word(word).ok_or_else(|| {
            Error::Run(format!(
                "unknown report level `{word}` (expected Solved, All or AllDetails)"
            ))
        })?),
        None => None,
    };
    let doc = match modsolver::parse_source(&source) {
        Ok(doc) => doc,
        Err(Error::Lex(e)) => {
            eprintln!("{display}:{}: error: {}", e.pos, e.message);
            return Ok(ExitCode::from(2));
        }
        Err(Error::Parse(e)) => {
            eprintln!("{display}:{}: error: {}", e.pos, e.message);
            return Ok(ExitCode::from(2));
        }
        Err(other) => return Err(other),
    };
    let diags = modsolver::validate_document(&doc);
    for d in &diags {
        eprintln!("{display}:{}: {}: {}", d.pos, d.severity, d.message);
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Ok(ExitCode::from(2));
    }
    let run_report = run_document(
        &doc,
        &RunOptions {
            seed,
            report_override,
        },
    )?;
    let text = emit_report(&run_report, run_report.level);
    match out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(trace) = trace_csv(&run_report) {
        let trace_path = match out {
            Some(path) => path.with_extension("trace.csv"),
            None => input.with_extension("trace.csv"),
        };
        std::fs::write(&trace_path, trace)?;
        eprintln!("trace written to {}", trace_path.display());
    }
    Ok(if run_report.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn convert(
    input: &Path,
    config: Option<&Path>,
    format: Option<&str>,
    symbols: Option<&str>,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let display = input.display();
    let case_text =
        std::fs::read_to_string(input).map_err(|e| Error::Run(format!("{display}: {e}")))?;
    let mut options = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Run(format!("{}: {e}", path.display())))?;
            load_config(&text)?
        }
        None => ConvertOptions::default(),
    };
    if let Some(word) = format {
        options.format = Format::from_str(word)
            .ok_or_else(|| Error::Config(format!("unknown format `{word}`")))?;
    }
    if let Some(word) = symbols {
        options.symbols = Symbols::from_str(word)
            .ok_or_else(|| Error::Config(format!("unknown symbols `{word}`")))?;
    }
    let case = modsolver::matpower::parse_case(&case_text)?;
    let text = emit_model(&case, &options)?;
    let out_path = match out {
        Some(p) => p.to_path_buf(),
        None => input.with_extension("mod"),
    };
    std::fs::write(&out_path, text)?;
    println!("wrote {}", out_path.display());
    Ok(ExitCode::SUCCESS)
}
