use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kls_lab::kinds::Kind;
use kls_lab::record::{read_records, write_sweep, Format, RecordWriter};
use kls_lab::{run, run_with, summarize, sweep_axis, thread_pool, ExperimentConfig, LabError};

/// Reproducible experiments for the KLS exclusion process.
///
/// Exit codes: 0 every record passed, 1 some record failed its tolerance,
/// 2 configuration, capacity or parameter error, 3 i/o or record error.
#[derive(Parser)]
#[command(name = "kls-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "KLS_LAB_THREADS")]
    threads: Option<usize>,
    /// Output file (default: the config `out`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point and write one record per (point, replicate).
    Run(RunArgs),
    /// Run a grid and fit the declared slope along its sweep axis.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Also write the underlying records (JSON lines) here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Convert JSON-lines records to CSV or canonical JSON lines.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the experiment kinds and their parameters.
    ListExperiments,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, LabError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, LabError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    Ok(config)
}

fn do_sweep(
    config: &ExperimentConfig,
    args: &RunArgs,
    records: Option<&Path>,
) -> Result<bool, LabError> {
    sweep_axis(config)?;
    let pool = thread_pool(args.threads)?;
    let recs = match records {
        Some(p) => {
            let mut w = RecordWriter::new(BufWriter::new(File::create(p)?), Format::Jsonl)?;
            run_with(config, &pool, |r| w.write(r))?
        }
        None => run_with(config, &pool, |_| Ok(()))?,
    };
    let lines = summarize(config, &recs)?;
    write_sweep(sink(config.out.as_deref())?, &lines, args.format)?;
    Ok(recs.iter().all(|r| r.pass) && lines.iter().all(|l| l.pass))
}

fn list() {
    for kind in Kind::ALL {
        let spec = kind.spec();
        println!("{kind}: {}", spec.summary);
        if let Some(max) = spec.max_n {
            println!("  n <= {max}");
        }
        for (section, params) in [
            ("grid", &spec.grid),
            ("samples", &spec.samples),
            ("tolerance", &spec.tolerance),
        ] {
            for p in params {
                let d = p
                    .default
                    .map(|d| d.to_string())
                    .unwrap_or_else(|| "required".into());
                println!("  [{section}] {} = {d}  ({})", p.name, p.doc);
            }
        }
        if let Some(s) = spec.sweep {
            println!("  sweep axis `{}`: {}", s.axis, s.doc);
        }
    }
}

fn execute(cli: Cli) -> Result<bool, LabError> {
    match cli.command {
        Command::Run(args) => {
            let config = load(&args)?;
            if config.sweep {
                return do_sweep(&config, &args, None);
            }
            let pool = thread_pool(args.threads)?;
            run(&config, &pool, sink(config.out.as_deref())?, args.format)
        }
        Command::Sweep { args, records } => do_sweep(&load(&args)?, &args, records.as_deref()),
        Command::Export { input, format, out } => {
            let records = read_records(BufReader::new(File::open(&input)?))?;
            let mut w = RecordWriter::new(sink(out.as_deref())?, format)?;
            for r in &records {
                w.write(r)?;
            }
            Ok(true)
        }
        Command::ListExperiments => {
            list();
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kls-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
