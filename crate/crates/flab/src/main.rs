use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use flab::jobrunner::{catalog, execute, exit_code, task_name, write_outputs, Job};

/// Numerical laboratory for Hardy-field sequences mod 1. Runs one JSON job
/// file and writes its verdicts, manifest, and series CSVs to a directory.
/// Without --job, prints the task catalog.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Job file (one JSON object, see the catalog)
    #[arg(long)]
    job: Option<PathBuf>,

    /// Results directory, created if missing
    #[arg(long, default_value = "flab-out")]
    out: PathBuf,

    /// Worker threads; 0 means one per core
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Mantissa bits for evaluation tasks
    #[arg(long, default_value_t = 128)]
    precision_bits: u32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(job_path) = &cli.job else {
        print!("{}", catalog());
        return ExitCode::SUCCESS;
    };
    let src = match std::fs::read_to_string(job_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", job_path.display());
            return ExitCode::from(1);
        }
    };
    let job: Job = match serde_json::from_str(&src) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{}:{}:{}: {e}", job_path.display(), e.line(), e.column());
            return ExitCode::from(3);
        }
    };
    let seed_override = match std::env::var("FLAB_SEED") {
        Ok(s) => match s.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                eprintln!("FLAB_SEED must be an unsigned integer, got '{s}'");
                return ExitCode::from(1);
            }
        },
        Err(_) => None,
    };
    let threads = if cli.threads == 0 {
        std::thread::available_parallelism().map_or(1, |p| p.get())
    } else {
        cli.threads
    };
    let result = execute(&job, threads, cli.precision_bits, seed_override);
    let code = exit_code(&result);
    match &result {
        Ok(out) => {
            if let Err(e) = write_outputs(&cli.out, task_name(&job), out, cli.precision_bits) {
                eprintln!("writing {}: {e}", cli.out.display());
                return ExitCode::from(1);
            }
            for v in &out.verdicts {
                println!(
                    "{} {}: value ({}, {})",
                    if v.pass { "pass" } else { "FAIL" },
                    v.experiment,
                    v.value[0],
                    v.value[1],
                );
            }
            println!("results in {}", cli.out.display());
        }
        Err(e) => eprintln!("{e}"),
    }
    ExitCode::from(u8::try_from(code).expect("codes are 0..=3"))
}
