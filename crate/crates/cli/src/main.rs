//! Command-line front end: generate, evaluate, experiment, bench, report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synthkit::harness::{
    apo_metric, benchmark_generation, emit_tables, read_timings, run_experiment, write_timings, Evaluator,
    ExperimentConfig, RunOptions, REPORT_FILE, TIMINGS_FILE,
};
use synthkit::metrics::UtilityReport;
use synthkit::synth::{read_synthetic_set, synthesize, write_synthetic_set};
use synthkit::Error;

#[derive(Parser)]
#[command(name = "synthkit", version, about = "Fully synthetic tabular data and utility evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic set.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Grid label, e.g. `D` or `CPT`.
        #[arg(long)]
        spec: String,
        /// Number of datasets (defaults to the first configured m).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Compute metrics for synthetic sets written by `generate`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directories holding a synthetic set manifest.
        #[arg(long, required = true, num_args = 1..)]
        synthetic: Vec<PathBuf>,
    },
    /// Run the full grid.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Reuse finished cells from a previous run.
        #[arg(long)]
        resume: bool,
    },
    /// Time generation of `count` datasets with one worker.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Rebuild summary tables from an existing report.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> synthkit::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn pool(jobs: usize) -> synthkit::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Exit status of a finished run: 0 clean, 2 when the report carries errors.
fn status(report: &UtilityReport) -> ExitCode {
    let errors = report.error_count();
    if errors == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{errors} error row(s) in the report");
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> synthkit::Result<ExitCode> {
    match cli.command {
        Command::Generate { common, spec, m } => {
            let cfg = load(&common)?;
            let original = cfg.load_original()?;
            let entry = cfg.find_entry(&spec)?;
            let m = m.unwrap_or(cfg.m[0]);
            let seed = synthkit::harness::cell_seed(cfg.seed, &spec, m, 1);
            let synth = entry.spec(original.schema(), m, seed)?;
            let mut set = pool(common.jobs)?.install(|| synthesize(&original, &synth))?;
            set.label = entry.spec_label.clone();
            let dir = cfg.out.join(&entry.spec_label);
            write_synthetic_set(&set, &dir)?;
            println!("wrote {} dataset(s) to {}", set.m(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { common, synthetic } => {
            let cfg = load(&common)?;
            let original = cfg.load_original()?;
            let evaluator = Evaluator::new(&original, &cfg);
            let mut report = UtilityReport::default();
            report.rows.extend(evaluator.original_rows());
            for dir in &synthetic {
                let set = read_synthetic_set(dir, original.schema())?;
                let label = set.label.clone();
                let rows = pool(common.jobs)?.install(|| evaluator.evaluate(&set, &label, set.m(), 1, set.seed));
                report.rows.extend(rows);
            }
            std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
            let path = cfg.out.join("evaluation.csv");
            report.write(&path)?;
            println!("wrote {}", path.display());
            Ok(status(&report))
        }
        Command::Experiment { common, resume } => {
            let cfg = load(&common)?;
            let outcome = run_experiment(&cfg, RunOptions { jobs: common.jobs, resume })?;
            println!(
                "{} cell(s) run, {} resumed, {} dataset(s) generated; report at {}",
                outcome.cells_run,
                outcome.cells_resumed,
                outcome.datasets_generated,
                cfg.out.join(REPORT_FILE).display()
            );
            let apo = apo_metric(cfg.metrics.apo.threshold);
            if let Err(e) = emit_tables(&outcome.report, &outcome.timings, &cfg.grid(), &apo, &cfg.out.join("tables")) {
                eprintln!("tables not written: {e}");
            }
            Ok(status(&outcome.report))
        }
        Command::Bench { common, spec, count } => {
            let cfg = load(&common)?;
            let original = cfg.load_original()?;
            let record = benchmark_generation(&cfg, &original, &spec, count)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
            let path = cfg.out.join(format!("bench_{spec}.csv"));
            write_timings(std::slice::from_ref(&record), &path)?;
            println!(
                "{}: {} dataset(s) in {:.3} s ({:.4} s each)",
                record.spec_label, record.datasets, record.total_seconds, record.seconds_per_dataset
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { common } => {
            let cfg = load(&common)?;
            let report = UtilityReport::read(&cfg.out.join(REPORT_FILE))?;
            let timings_path = cfg.out.join(TIMINGS_FILE);
            let timings = if timings_path.exists() { read_timings(&timings_path)? } else { Vec::new() };
            let apo = apo_metric(cfg.metrics.apo.threshold);
            for path in emit_tables(&report, &timings, &cfg.grid(), &apo, &cfg.out.join("tables"))? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
