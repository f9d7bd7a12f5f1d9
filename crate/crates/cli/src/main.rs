use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqram::binary::{MAX_LINES, MIN_LINES};
use aqram::gradcheck::{self, FD_TOLERANCE, SHIFT_TOLERANCE};
use aqram::harness::{write_atomic, BinaryJob, MlJob, RunManifest, RunStatus};
use aqram::ml::{self, Phase, Setup};
use aqram::{QramError, TrainConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "aqram",
    version,
    about = "Trainable quantum-circuit QRAM experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Store random n-bit tables and report Hamming-distance metrics.
    Binary {
        /// Address-line counts: `5`, `2..9` (inclusive) or `3,6,9`.
        #[arg(long, default_value = "2")]
        n: String,
        #[arg(long, value_enum, default_value_t = Clustered::Off)]
        clustered: Clustered,
        #[command(flatten)]
        common: Common,
    },
    /// Digit 0/1 classification pipelines.
    Ml {
        #[arg(long, default_value = "all")]
        setup: String,
        #[arg(long, default_value = "data/digits.csv")]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Adjoint vs finite-difference vs parameter-shift gradients on random circuits.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Quick end-to-end sanity checks.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Clustered {
    On,
    Off,
    Both,
}

#[derive(Args)]
struct Common {
    /// Number of seeds, counted up from the configured seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Flat key=value file with TrainConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $AQRAM_OUT_DIR, then `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve_config(&self) -> Result<TrainConfig, QramError> {
        let mut config = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| QramError::Config(format!("{}: {e}", path.display())))?;
            config.apply_kv_text(&text)?;
        }
        if let Some(e) = self.epochs {
            config.epochs = e;
        }
        if let Some(b) = self.batch {
            config.batch_size = b;
        }
        if let Some(lr) = self.lr {
            config.learning_rate = lr;
        }
        config.validate()?;
        if self.seeds < 1 {
            return Err(QramError::Config("--seeds must be >= 1".into()));
        }
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("AQRAM_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn seed_list(&self, config: &TrainConfig) -> Vec<u64> {
        (0..self.seeds).map(|i| config.seed + i).collect()
    }
}

fn exit_code(e: &QramError) -> u8 {
    match e {
        QramError::Numeric(_) | QramError::Degenerate(_) => 3,
        _ => 2,
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), QramError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(QramError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| QramError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn parse_lines(spec: &str) -> Result<Vec<usize>, QramError> {
    let bad = || QramError::Config(format!("--n: cannot parse {spec:?}"));
    let values: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    if let Some(n) = values
        .iter()
        .find(|n| !(MIN_LINES..=MAX_LINES).contains(*n))
    {
        return Err(QramError::Config(format!(
            "--n: {n} address lines is outside {MIN_LINES}..={MAX_LINES}"
        )));
    }
    Ok(values)
}

/// Writes the manifest, runs every job on the pool, then records the outcome.
fn execute<J, F>(
    out_dir: &Path,
    config: &TrainConfig,
    jobs: &[J],
    run_id: fn(&J) -> String,
    run: F,
) -> Result<(), QramError>
where
    J: Sync,
    F: Fn(&J) -> Result<(String, serde_json::Value, String), QramError> + Sync,
{
    std::fs::create_dir_all(out_dir)?;
    let ids: Vec<String> = jobs.iter().map(run_id).collect();
    let mut manifest = RunManifest::new(std::env::args().collect(), config.clone(), &ids, out_dir);
    let manifest_path = manifest.write(out_dir)?;
    eprintln!("manifest {}", manifest_path.display());

    let results: Vec<Result<(String, serde_json::Value), QramError>> = jobs
        .par_iter()
        .zip(&manifest.runs)
        .map(|(job, entry)| {
            let (csv, fin, summary) = run(job)?;
            write_atomic(&entry.output, &csv)?;
            Ok((summary, fin))
        })
        .collect();

    let mut first_err = None;
    for (entry, r) in manifest.runs.iter_mut().zip(results) {
        match r {
            Ok((summary, fin)) => {
                println!("{} {summary}", entry.run_id);
                entry.final_metrics = Some(fin);
            }
            Err(e) => {
                eprintln!("{}: {e}", entry.run_id);
                first_err.get_or_insert(e);
            }
        }
    }
    manifest.finish(if first_err.is_some() {
        RunStatus::Failed
    } else {
        RunStatus::Completed
    });
    manifest.write(out_dir)?;
    first_err.map_or(Ok(()), Err)
}

fn cmd_binary(n: &str, clustered: Clustered, common: &Common) -> Result<(), QramError> {
    let config = common.resolve_config()?;
    let lines = parse_lines(n)?;
    init_threads(common.threads)?;
    let modes: &[bool] = match clustered {
        Clustered::Off => &[false],
        Clustered::On => &[true],
        Clustered::Both => &[false, true],
    };
    let mut jobs = Vec::new();
    for &n in &lines {
        for seed in common.seed_list(&config) {
            for &clustered in modes {
                jobs.push(BinaryJob { n, seed, clustered });
            }
        }
    }
    execute(
        &common.out_dir(),
        &config,
        &jobs,
        BinaryJob::run_id,
        |job| {
            let metrics = job.run(&config)?;
            let last = metrics
                .final_epoch()
                .ok_or_else(|| QramError::Numeric("no epochs recorded".into()))?;
            let summary = format!(
                "mse={:.6} mean_hd={:.4} pct_correct={:.2}",
                last.mse, last.mean_hd, last.pct_correct
            );
            Ok((
                job.csv(&metrics),
                serde_json::to_value(last).map_err(|e| QramError::Io(e.to_string()))?,
                summary,
            ))
        },
    )
}

fn cmd_ml(setup: &str, data: &Path, common: &Common) -> Result<(), QramError> {
    let config = common.resolve_config()?;
    let setups: Vec<Setup> = if setup == "all" {
        Setup::ALL.to_vec()
    } else {
        vec![Setup::parse(setup).ok_or_else(|| {
            QramError::Config(format!(
                "--setup must be qram_qnn, qnn_embed, fcnn or all, got {setup:?}"
            ))
        })?]
    };
    init_threads(common.threads)?;
    // load before touching the output directory so bad input leaves nothing behind
    let samples = ml::load_digits(data)?;
    let mut jobs = Vec::new();
    for seed in common.seed_list(&config) {
        for &setup in &setups {
            jobs.push(MlJob { setup, seed });
        }
    }
    execute(&common.out_dir(), &config, &jobs, MlJob::run_id, |job| {
        let trace = job.run(&samples, &config)?;
        let last = trace
            .last(Phase::Classify)
            .ok_or_else(|| QramError::Numeric("no classifier epochs recorded".into()))?;
        let summary = format!(
            "train_loss={:.4} test_acc={:.4} converged_epoch={}",
            last.train_loss,
            last.test_acc.unwrap_or(f64::NAN),
            trace
                .convergence_epoch()
                .map_or_else(|| "none".to_string(), |e| e.to_string())
        );
        Ok((
            job.csv(&trace),
            serde_json::to_value(last).map_err(|e| QramError::Io(e.to_string()))?,
            summary,
        ))
    })
}

fn cmd_gradcheck(seed: u64) -> Result<bool, QramError> {
    let report = gradcheck::run_suite(seed)?;
    println!(
        "circuits={} max_rel_error_fd={:.3e} (tol {FD_TOLERANCE:e}) max_abs_error_shift={:.3e} (tol {SHIFT_TOLERANCE:e})",
        report.circuits, report.max_fd_rel_error, report.max_shift_abs_error
    );
    Ok(report.passed())
}

fn cmd_selftest() -> Result<bool, QramError> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    check("gradients", gradcheck::run_suite(0)?.passed());
    let job = BinaryJob {
        n: 2,
        seed: 0,
        clustered: false,
    };
    let config = TrainConfig::default();
    let first = job.run(&config)?;
    let perfect = first
        .final_epoch()
        .is_some_and(|e| e.mean_hd == 0.0 && e.pct_correct == 100.0);
    check("binary n=2 recall", perfect);
    check(
        "binary rerun identical",
        job.csv(&first) == job.csv(&job.run(&config)?),
    );
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Binary {
            n,
            clustered,
            common,
        } => cmd_binary(n, *clustered, common).map(|_| true),
        Command::Ml {
            setup,
            data,
            common,
        } => cmd_ml(setup, data, common).map(|_| true),
        Command::Gradcheck { seed, threads } => {
            init_threads(*threads).and_then(|_| cmd_gradcheck(*seed))
        }
        Command::Selftest { threads } => init_threads(*threads).and_then(|_| cmd_selftest()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_specs() {
        assert_eq!(parse_lines("2..9").unwrap(), (2..=9).collect::<Vec<_>>());
        assert_eq!(parse_lines("3,6,9").unwrap(), vec![3, 6, 9]);
        assert_eq!(parse_lines("4").unwrap(), vec![4]);
        assert!(parse_lines("1..3").is_err());
        assert!(parse_lines("10").is_err());
        assert!(parse_lines("x").is_err());
    }
}
