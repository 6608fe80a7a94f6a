//! Run directories: config snapshot, metric streams, parameters, manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use super::config::serialize_config;
use crate::error::{Error, Result};
use crate::trainer::{EvalRecord, StepRecord, TrainConfig, Trainer};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const PARAMS_FILE: &str = "params.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Paths of the files making up one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
}

impl RunArtifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `<out>/<algorithm>_seed<seed>`.
    pub fn for_config(out: &Path, config: &TrainConfig) -> Self {
        Self::new(out.join(format!("{}_seed{}", config.algorithm, config.seed)))
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join(CONFIG_FILE)
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join(METRICS_FILE)
    }

    pub fn eval(&self) -> PathBuf {
        self.dir.join(EVAL_FILE)
    }

    pub fn params(&self) -> PathBuf {
        self.dir.join(PARAMS_FILE)
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    /// Files covered by the manifest.
    pub fn content_files(&self) -> [PathBuf; 4] {
        [self.config(), self.metrics(), self.eval(), self.params()]
    }
}

/// 17 significant digits; non-finite values become `null`.
pub fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

pub fn metrics_line(r: &StepRecord) -> String {
    format!(
        "{{\"step\":{},\"objective\":{},\"grad_norm\":{},\"margin\":{},\"pass_rate\":{},\"valid_fraction\":{},\"skipped\":{}}}",
        r.step,
        r.objective.map_or("null".to_string(), json_f64),
        json_f64(r.grad_norm),
        json_f64(r.margin),
        json_f64(r.pass_rate),
        json_f64(r.valid_fraction),
        r.skipped
    )
}

pub fn eval_line(r: &EvalRecord) -> String {
    let per_class = r.per_class.iter().map(|&x| json_f64(x)).collect::<Vec<_>>().join(",");
    format!(
        "{{\"step\":{},\"mean_reward\":{},\"per_class\":[{}]}}",
        r.step,
        json_f64(r.mean),
        per_class
    )
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct LineSink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineSink {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
        })
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub artifacts: RunArtifacts,
    pub final_eval: EvalRecord,
}

/// Train under `config` and write every artifact into
/// `<out>/<algorithm>_seed<seed>`.
pub fn train_run(config: &TrainConfig, out: &Path) -> Result<RunSummary> {
    let started = unix_seconds();
    let mut trainer = Trainer::new(config.clone())?;
    let artifacts = RunArtifacts::for_config(out, config);
    fs::create_dir_all(&artifacts.dir).map_err(|e| Error::io(&artifacts.dir, e))?;
    write_file(&artifacts.config(), &serialize_config(config))?;

    let mut metrics = LineSink::create(artifacts.metrics())?;
    let mut eval = LineSink::create(artifacts.eval())?;
    let final_eval = trainer.run(
        |r| metrics.line(&metrics_line(r)),
        |r| eval.line(&eval_line(r)),
    )?;
    metrics.finish()?;
    eval.finish()?;

    let policy = trainer.policy();
    let mut params = format!(
        "# vocab_size={} context_order={} max_len={} num_classes={} len={}\n",
        policy.vocab_size(),
        policy.context_order(),
        policy.max_len(),
        policy.num_classes(),
        policy.logits().len()
    );
    for z in policy.logits() {
        params.push_str(&json_f64(*z));
        params.push('\n');
    }
    write_file(&artifacts.params(), &params)?;

    let mut manifest = format!(
        "tool conspo-lab {}\nseed {}\nalgorithm {}\nstarted_unix {}\nfinished_unix {}\nfinal_mean_reward {}\n",
        env!("CARGO_PKG_VERSION"),
        config.seed,
        config.algorithm,
        started,
        unix_seconds(),
        json_f64(final_eval.mean)
    );
    for path in artifacts.content_files() {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        manifest.push_str(&format!("sha256 {} {}\n", sha256_file(&path)?, name));
    }
    write_file(&artifacts.manifest(), &manifest)?;
    Ok(RunSummary {
        artifacts,
        final_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Algorithm;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(json_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(json_f64(f64::NAN), "null");
        let x = 1.0 / 3.0;
        assert_eq!(json_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn records_are_valid_json() {
        let r = StepRecord {
            step: 3,
            margin: 0.0,
            objective: None,
            grad_norm: 1.5,
            pass_rate: 0.25,
            valid_fraction: 0.5,
            skipped: 2,
        };
        let v: serde_json::Value = serde_json::from_str(&metrics_line(&r)).unwrap();
        assert!(v["objective"].is_null());
        assert_eq!(v["skipped"], 2);
        assert_eq!(v["grad_norm"].as_f64(), Some(1.5));
        let e = EvalRecord {
            step: 0,
            per_class: vec![0.4, 0.1],
            mean: 0.25,
        };
        let v: serde_json::Value = serde_json::from_str(&eval_line(&e)).unwrap();
        assert_eq!(v["mean_reward"].as_f64(), Some(0.25));
    }

    #[test]
    fn run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let config = TrainConfig {
            algorithm: Algorithm::Grpo,
            total_steps: 3,
            queries_per_step: 4,
            seed: 7,
            ..TrainConfig::default()
        };
        let summary = train_run(&config, dir.path()).unwrap();
        assert!(summary.artifacts.dir.ends_with("grpo_seed7"));
        for p in summary.artifacts.content_files() {
            assert!(p.exists(), "{}", p.display());
        }
        let manifest = fs::read_to_string(summary.artifacts.manifest()).unwrap();
        assert!(manifest.contains("seed 7\n"));
        assert_eq!(manifest.matches("sha256 ").count(), 4);
        let metrics = fs::read_to_string(summary.artifacts.metrics()).unwrap();
        assert_eq!(metrics.lines().count(), 3);
    }
}
