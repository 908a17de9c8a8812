use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use capillary_lab::experiments::{run_experiment, write_report, ExperimentConfig, ExperimentKind, RunConfig};
use clap::Parser;
use rayon::prelude::*;

/// Run capillary-lab experiments described in a TOML file.
#[derive(Parser, Debug)]
#[command(name = "caplab", version)]
struct Args {
    /// TOML file with one `[[experiment]]` table per run.
    #[arg(long, required_unless_present = "list_experiments")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config (default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every experiment; overrides all seeds in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; experiments run in parallel, results stay in order.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the experiment kinds and exit.
    #[arg(long)]
    list_experiments: bool,
}

const EXIT_FAIL: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Unnamed experiments whose default stem collides get a positional suffix.
fn assign_names(experiments: &mut [ExperimentConfig]) {
    let stem = |e: &ExperimentConfig| e.name.clone().unwrap_or_else(|| e.kind.name().to_string());
    let mut counts: HashMap<String, usize> = HashMap::new();
    for e in experiments.iter() {
        *counts.entry(stem(e)).or_default() += 1;
    }
    for (i, e) in experiments.iter_mut().enumerate() {
        if e.name.is_none() && counts[&stem(e)] > 1 {
            e.name = Some(format!("{}-{}", e.kind, i + 1));
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_experiments {
        for kind in ExperimentKind::ALL {
            println!("{:<16} {}", kind.name(), kind.summary());
        }
        return ExitCode::SUCCESS;
    }
    let path = args.config.expect("clap enforces --config");
    let mut run = match RunConfig::load(&path) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    assign_names(&mut run.experiments);
    let out = args.out.or(run.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let seeds: Vec<u64> = run
        .experiments
        .iter()
        .map(|e| args.seed.or(e.seed).or(run.seed).unwrap_or(0))
        .collect();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("cannot start {} workers: {e}", args.jobs);
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    let results: Vec<_> = pool.install(|| {
        run.experiments
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(cfg, seed)| run_experiment(cfg, *seed))
            .collect()
    });

    let mut code = ExitCode::SUCCESS;
    let mut numeric_failure = false;
    for (cfg, result) in run.experiments.iter().zip(results) {
        let report = match result {
            Ok(report) => report,
            Err(e) => {
                eprintln!(
                    "{}: numeric failure: {e}",
                    cfg.name.as_deref().unwrap_or(cfg.kind.name())
                );
                numeric_failure = true;
                continue;
            }
        };
        println!(
            "== {} ({}, seed {}, {:.2} s)",
            report.name, report.kind, report.seed, report.elapsed_seconds
        );
        for c in &report.criteria {
            println!("{}", c.line());
        }
        if let Err(e) = write_report(&report, &out) {
            eprintln!("{}: cannot write results: {e}", report.name);
            numeric_failure = true;
            continue;
        }
        if !report.passed() {
            code = ExitCode::from(EXIT_FAIL);
        }
    }
    if numeric_failure {
        return ExitCode::from(EXIT_NUMERIC);
    }
    code
}
