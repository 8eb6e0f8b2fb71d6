//! Config-driven experiment runner.
//!
//! Exit codes: 0 success, 1 malformed configuration, 2 assertion failure
//! (a module invariant was violated during the run), 3 guard rejection.

mod config;
mod pipelines;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{validate, ExperimentConfig, Pipeline, ValidationClass};
use qcompound_core::tol::Guards;
use qcompound_core::Error;

#[derive(Parser, Debug)]
#[command(name = "qcompound", about = "Compound-channel coding workbench")]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; numeric outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,

    /// Dry-run: guard checks and size estimates only.
    #[arg(long)]
    validate: bool,
}

const EXIT_MALFORMED: u8 = 1;
const EXIT_ASSERTION: u8 = 2;
const EXIT_GUARD: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return ExitCode::from(EXIT_MALFORMED);
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MALFORMED);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    let guards = Guards::default();
    let (class, diag) = validate(&cfg, &guards);
    if args.validate {
        println!("{}", serde_json::to_string_pretty(&diag).unwrap());
        return match class {
            ValidationClass::Ok => ExitCode::SUCCESS,
            ValidationClass::Malformed => ExitCode::from(EXIT_MALFORMED),
            ValidationClass::GuardRejected => ExitCode::from(EXIT_GUARD),
        };
    }
    match class {
        ValidationClass::Ok => {}
        ValidationClass::Malformed => {
            for m in &diag.messages {
                eprintln!("error: {m}");
            }
            return ExitCode::from(EXIT_MALFORMED);
        }
        ValidationClass::GuardRejected => {
            for m in &diag.messages {
                eprintln!("guard: {m}");
            }
            return ExitCode::from(EXIT_GUARD);
        }
    }

    let started = std::time::Instant::now();
    let result = match cfg.pipeline {
        Pipeline::Info => pipelines::run_info(&cfg, &guards),
        Pipeline::Typicality => pipelines::run_typicality(&cfg, &guards),
        Pipeline::OneShot => pipelines::run_one_shot(&cfg, &guards),
        Pipeline::Net => pipelines::run_net(&cfg, &guards),
        Pipeline::Discriminate => pipelines::run_discriminate(&cfg, &guards),
        Pipeline::Convert => pipelines::run_convert(&cfg, &guards),
        Pipeline::Capacity => pipelines::run_capacity(&cfg, &guards),
        Pipeline::Bsst => pipelines::run_bsst(&cfg, &guards),
    };
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let out_dir = args
        .out
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let pipeline_name = serde_json::to_value(cfg.pipeline)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    if let Err(e) = report::write_report(
        &out_dir,
        &pipeline_name,
        &cfg,
        &out.rows,
        out.extra,
        started.elapsed().as_secs_f64() * 1e3,
    ) {
        eprintln!("error: writing reports: {e}");
        return ExitCode::from(EXIT_MALFORMED);
    }
    if let Some(trials) = out.trials_csv {
        if let Err(e) = std::fs::write(out_dir.join("trials.csv"), trials) {
            eprintln!("error: writing trials.csv: {e}");
            return ExitCode::from(EXIT_MALFORMED);
        }
    }
    println!(
        "{pipeline_name}: {} rows -> {}",
        out.rows.len(),
        out_dir.display()
    );
    ExitCode::SUCCESS
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::GuardExceeded(_) | Error::CoveringNotCertified(_) => EXIT_GUARD,
        Error::InvalidState(_)
        | Error::InvalidChannel(_)
        | Error::HypothesisViolated(_)
        | Error::Indistinguishable(_) => EXIT_ASSERTION,
        Error::DimensionMismatch(_) | Error::InvalidParameter(_) | Error::EmptyFamily => {
            EXIT_MALFORMED
        }
    }
}
