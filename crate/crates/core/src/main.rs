//! Command-line front end: experiment runs, reports and single-instance tools.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rfim::disorder::{sample_disorder, write_binary, write_text};
use rfim::gibbs::{exact_summary, ModelParams};
use rfim::lattice::LatticeSpec;
use rfim::mcmc::{run_two_replicas, write_series, McmcSettings, SeriesFormat};
use rfim::runner::{self, ExperimentConfig, RunKind, RunOptions};
use rfim::Result;

#[derive(Parser)]
#[command(name = "rfim", version, about = "Random field Ising model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observable sweeps and checks.
    Run(RunArgs),
    /// Checks only.
    Verify(RunArgs),
    /// Observable sweeps only.
    Sweep(RunArgs),
    /// Collect records in a directory into CSV tables.
    Report { dir: PathBuf },
    /// Exact Gibbs summary of one realization as JSON.
    Summary(InstanceArgs),
    /// Two-replica MCMC measurement series of one realization.
    Chain {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 20_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 2_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        mcmc_seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
    },
    /// Export one disorder realization.
    Disorder {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        rid: u64,
        #[arg(long, value_enum, default_value_t = DisorderFormat::Text)]
        format: DisorderFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    rid: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisorderFormat {
    Text,
    Binary,
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args, RunKind::Run),
        Command::Verify(args) => run(args, RunKind::Verify),
        Command::Sweep(args) => run(args, RunKind::Sweep),
        Command::Report { dir } => {
            let out = runner::report(&dir)?;
            for c in &out.corrupt {
                eprintln!("corrupt record {}:{}: {}", c.file.display(), c.line, c.error);
            }
            for (hash, path) in &out.groups {
                println!("{hash}: {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Summary(a) => {
            let lattice = LatticeSpec::new(a.d, a.n)?;
            let params = ModelParams::new(a.beta, a.h)?;
            let g = sample_disorder(&lattice, a.seed, a.rid);
            let summary = exact_summary(&lattice, &g, params)?;
            let mut out = output(None)?;
            serde_json::to_writer(&mut out, &summary.to_record(&lattice, &g, params))?;
            writeln!(out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Chain {
            instance: a,
            sweeps,
            burn_in,
            mcmc_seed,
            format,
        } => {
            let lattice = LatticeSpec::new(a.d, a.n)?;
            let params = ModelParams::new(a.beta, a.h)?;
            let g = sample_disorder(&lattice, a.seed, a.rid);
            let settings = McmcSettings::new(sweeps, burn_in, mcmc_seed);
            let run = run_two_replicas(&lattice, &g, params, &settings)?;
            let format = match format {
                Format::Jsonl => SeriesFormat::Jsonl,
                Format::Text => SeriesFormat::Text,
            };
            let mut out = output(None)?;
            write_series(&run, format, &mut out)?;
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Disorder {
            d,
            n,
            seed,
            rid,
            format,
            out,
        } => {
            let lattice = LatticeSpec::new(d, n)?;
            let g = sample_disorder(&lattice, seed, rid);
            let mut w = output(out.as_ref())?;
            match format {
                DisorderFormat::Text => write_text(&g, &mut w)?,
                DisorderFormat::Binary => write_binary(&g, &mut w)?,
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(args: RunArgs, kind: RunKind) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let opts = RunOptions {
        seed: args.seed,
        workers: args.workers,
        out: args.out,
        resume: args.resume,
    };
    let outcome = runner::run(&cfg, kind, &opts)?;
    print!("{}", outcome.summary);
    println!("records: {}", outcome.records_path.display());
    Ok(ExitCode::from(outcome.exit_code() as u8))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
