//! Run orchestration, metrics CSV and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::binary::{self, BinaryMetrics, BinaryTable};
use crate::config::TrainConfig;
use crate::error::{QramError, Result};
use crate::ml::{self, DigitSample, MetricsTrace, Setup};

pub const BINARY_HEADER: &str = "run_id,n,clustered,seed,epoch,mse,mean_hd,pct_correct";
pub const ML_HEADER: &str = "run_id,setup,phase,seed,epoch,train_loss,test_loss,train_acc,test_acc";

/// Nine significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryJob {
    pub n: usize,
    pub seed: u64,
    pub clustered: bool,
}

impl BinaryJob {
    pub fn run_id(&self) -> String {
        let mode = if self.clustered {
            "clustered"
        } else {
            "unclustered"
        };
        format!("binary-n{}-{}-s{}", self.n, mode, self.seed)
    }

    /// Trains on the seed's random table and returns the per-epoch metrics.
    pub fn run(&self, config: &TrainConfig) -> Result<BinaryMetrics> {
        let config = TrainConfig {
            seed: self.seed,
            ..config.clone()
        };
        let table = BinaryTable::generate(self.n, self.seed)?;
        if self.clustered {
            Ok(binary::train_clustered(&table, &config)?.metrics)
        } else {
            Ok(binary::train_binary_qram(&table, &config)?.1)
        }
    }

    pub fn csv(&self, metrics: &BinaryMetrics) -> String {
        let mut out = String::from(BINARY_HEADER);
        out.push('\n');
        for e in &metrics.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.run_id(),
                self.n,
                self.clustered,
                self.seed,
                e.epoch,
                fmt_float(e.mse),
                fmt_float(e.mean_hd),
                fmt_float(e.pct_correct)
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlJob {
    pub setup: Setup,
    pub seed: u64,
}

impl MlJob {
    pub fn run_id(&self) -> String {
        format!("ml-{}-s{}", self.setup.as_str(), self.seed)
    }

    /// The seed drives initialization, shuffling and the train/test split.
    pub fn run(&self, samples: &[DigitSample], config: &TrainConfig) -> Result<MetricsTrace> {
        let config = TrainConfig {
            seed: self.seed,
            ..config.clone()
        };
        Ok(match self.setup {
            Setup::QramQnn => ml::run_qram_qnn(samples, self.seed, &config)?.trace,
            Setup::QnnEmbed => ml::train_classifier_embed(samples, self.seed, &config)?.1,
            Setup::Fcnn => ml::train_fcnn(samples, self.seed, &config)?.1,
        })
    }

    pub fn csv(&self, trace: &MetricsTrace) -> String {
        let mut out = String::from(ML_HEADER);
        out.push('\n');
        for r in &trace.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.run_id(),
                self.setup.as_str(),
                r.phase.as_str(),
                self.seed,
                r.epoch,
                fmt_float(r.train_loss),
                fmt_opt(r.test_loss),
                fmt_opt(r.train_acc),
                fmt_opt(r.test_acc)
            );
        }
        out
    }
}

/// Writes through a sibling temp file so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub run_id: String,
    pub output: PathBuf,
    /// Present only once the run has finished.
    pub final_metrics: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub invocation_id: String,
    pub command_line: Vec<String>,
    pub config: TrainConfig,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub status: RunStatus,
    pub runs: Vec<ManifestRun>,
}

impl RunManifest {
    pub fn new(
        command_line: Vec<String>,
        config: TrainConfig,
        run_ids: &[String],
        out_dir: &Path,
    ) -> Self {
        let started = unix_ms();
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let invocation_id = format!(
            "{started:x}-{:x}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        );
        RunManifest {
            invocation_id,
            command_line,
            config,
            started_unix_ms: started,
            finished_unix_ms: None,
            status: RunStatus::Running,
            runs: run_ids
                .iter()
                .map(|id| ManifestRun {
                    run_id: id.clone(),
                    output: out_dir.join(format!("{id}.csv")),
                    final_metrics: None,
                })
                .collect(),
        }
    }

    pub fn path(&self, out_dir: &Path) -> PathBuf {
        out_dir.join(format!("manifest-{}.json", self.invocation_id))
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = self.path(out_dir);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| QramError::Io(format!("manifest serialization: {e}")))?;
        write_atomic(&path, &json)?;
        Ok(path)
    }

    pub fn finish(&mut self, status: RunStatus) {
        self.status = status;
        self.finished_unix_ms = Some(unix_ms());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::BinaryEpoch;
    use crate::ml::{MlEpoch, Phase};

    #[test]
    fn float_format_has_nine_digits() {
        assert_eq!(fmt_float(0.25), "2.50000000e-1");
        assert_eq!(fmt_float(100.0), "1.00000000e2");
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn binary_csv_layout() {
        let job = BinaryJob {
            n: 2,
            seed: 1,
            clustered: false,
        };
        let m = BinaryMetrics {
            epochs: vec![BinaryEpoch {
                epoch: 0,
                mse: 0.5,
                mean_hd: 1.0,
                pct_correct: 25.0,
            }],
        };
        assert_eq!(
            job.csv(&m),
            "run_id,n,clustered,seed,epoch,mse,mean_hd,pct_correct\n\
             binary-n2-unclustered-s1,2,false,1,0,5.00000000e-1,1.00000000e0,2.50000000e1\n"
        );
    }

    #[test]
    fn ml_csv_leaves_missing_fields_empty() {
        let job = MlJob {
            setup: Setup::QramQnn,
            seed: 0,
        };
        let t = MetricsTrace {
            rows: vec![MlEpoch {
                phase: Phase::QramStep1,
                epoch: 3,
                train_loss: 0.125,
                test_loss: None,
                train_acc: None,
                test_acc: None,
            }],
        };
        let csv = job.csv(&t);
        assert!(csv.ends_with("ml-qram_qnn-s0,qram_qnn,qram_step1,0,3,1.25000000e-1,,,\n"));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(
            vec!["aqram".into(), "binary".into()],
            TrainConfig::default(),
            &["binary-n2-unclustered-s0".into()],
            dir.path(),
        );
        let path = m.write(dir.path()).unwrap();
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.status, RunStatus::Running);
        assert!(back.runs[0].final_metrics.is_none());
        m.finish(RunStatus::Completed);
        m.write(dir.path()).unwrap();
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.status, RunStatus::Completed);
    }
}
