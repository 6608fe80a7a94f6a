//! Paired eval-curve tables across two runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::artifacts::{RunArtifacts, EVAL_FILE};
use super::config::load_config;
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

fn precondition(message: String) -> Error {
    Error::Config {
        line: None,
        key: None,
        message,
    }
}

/// `(step, mean_reward)` pairs of a run's eval stream.
pub fn read_eval(dir: &Path) -> Result<Vec<(u64, f64)>> {
    let path = RunArtifacts::new(dir).eval();
    let text = fs::read_to_string(&path)
        .map_err(|e| precondition(format!("missing eval stream {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || precondition(format!("{}:{}: malformed eval record", path.display(), n + 1));
        let v: serde_json::Value = serde_json::from_str(line).map_err(|_| bad())?;
        let step = v["step"].as_u64().ok_or_else(bad)?;
        let reward = v["mean_reward"].as_f64().ok_or_else(bad)?;
        rows.push((step, reward));
    }
    if rows.is_empty() {
        return Err(precondition(format!("empty eval stream {}", path.display())));
    }
    Ok(rows)
}

fn read_run_config(dir: &Path) -> Result<TrainConfig> {
    load_config(&RunArtifacts::new(dir).config(), &[])
}

/// Both runs must share the task and the policy shape.
fn check_same_task(a: &TrainConfig, b: &TrainConfig) -> Result<()> {
    let key = |c: &TrainConfig| {
        (
            c.task,
            c.modulus,
            c.build_task().map(|t| t.targets).unwrap_or_default(),
            c.vocab_size,
            c.max_len,
            c.context_order,
        )
    };
    if key(a) != key(b) {
        return Err(precondition(format!(
            "task mismatch: {} m={} V={} L={} vs {} m={} V={} L={}",
            a.task, a.modulus, a.vocab_size, a.max_len, b.task, b.modulus, b.vocab_size, b.max_len
        )));
    }
    Ok(())
}

/// One row per eval step present in both runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub step: u64,
    pub reward_a: f64,
    pub reward_b: f64,
}

impl CompareRow {
    pub fn diff(&self) -> f64 {
        self.reward_a - self.reward_b
    }
}

/// Final-reward medians over the seeds both run families share.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    pub finals_a: Vec<f64>,
    pub finals_b: Vec<f64>,
    pub median_a: f64,
    pub median_b: f64,
}

impl SeedSummary {
    pub fn line(&self) -> String {
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        format!(
            "summary seeds=[{seeds}] median_final_a={:.6} median_final_b={:.6} median_diff={:.6}",
            self.median_a,
            self.median_b,
            self.median_a - self.median_b
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub table: PathBuf,
    pub summary: Option<SeedSummary>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Split `name_seed<N>` into `("name", N)`.
pub fn seed_suffix(dir: &Path) -> Option<(String, u64)> {
    let name = dir.file_name()?.to_str()?;
    let (prefix, seed) = name.rsplit_once("_seed")?;
    Some((prefix.to_string(), seed.parse().ok()?))
}

/// Sibling run directories `prefix_seed<N>`, keyed by seed.
fn seed_family(dir: &Path) -> Result<BTreeMap<u64, PathBuf>> {
    let mut family = BTreeMap::new();
    let Some((prefix, _)) = seed_suffix(dir) else {
        return Ok(family);
    };
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let entries = fs::read_dir(&parent).map_err(|e| Error::io(&parent, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&parent, e))?.path();
        if let Some((p, seed)) = seed_suffix(&path) {
            if p == prefix && path.join(EVAL_FILE).exists() {
                family.insert(seed, path);
            }
        }
    }
    Ok(family)
}

fn summarize(a: &Path, b: &Path) -> Result<Option<SeedSummary>> {
    let fa = seed_family(a)?;
    let fb = seed_family(b)?;
    let seeds: Vec<u64> = fa.keys().filter(|s| fb.contains_key(s)).copied().collect();
    if seeds.is_empty() {
        return Ok(None);
    }
    let last = |dir: &Path| -> Result<f64> { Ok(read_eval(dir)?.last().map(|r| r.1).unwrap_or(f64::NAN)) };
    let mut finals_a = Vec::new();
    let mut finals_b = Vec::new();
    for s in &seeds {
        finals_a.push(last(&fa[s])?);
        finals_b.push(last(&fb[s])?);
    }
    Ok(Some(SeedSummary {
        median_a: median(&finals_a),
        median_b: median(&finals_b),
        seeds,
        finals_a,
        finals_b,
    }))
}

/// Join the eval curves of `a` and `b` on step and write
/// `compare_<a>_vs_<b>.csv` into `out`.
pub fn compare_runs(a: &Path, b: &Path, out: &Path) -> Result<Comparison> {
    let curve_a = read_eval(a)?;
    let curve_b = read_eval(b)?;
    check_same_task(&read_run_config(a)?, &read_run_config(b)?)?;
    let b_by_step: BTreeMap<u64, f64> = curve_b.into_iter().collect();
    let rows: Vec<CompareRow> = curve_a
        .into_iter()
        .filter_map(|(step, reward_a)| {
            b_by_step.get(&step).map(|&reward_b| CompareRow {
                step,
                reward_a,
                reward_b,
            })
        })
        .collect();
    let mut csv = String::from("step,reward_a,reward_b,diff\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            r.step,
            r.reward_a,
            r.reward_b,
            r.diff()
        ));
    }
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let table = out.join(format!("compare_{}_vs_{}.csv", name(a), name(b)));
    fs::write(&table, csv).map_err(|e| Error::io(&table, e))?;
    Ok(Comparison {
        rows,
        table,
        summary: summarize(a, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn seed_suffixes() {
        assert_eq!(seed_suffix(Path::new("runs/grpo_seed12")), Some(("grpo".into(), 12)));
        assert_eq!(seed_suffix(Path::new("runs/grpo")), None);
        assert_eq!(seed_suffix(Path::new("runs/grpo_seedx")), None);
    }

    #[test]
    fn missing_eval_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_eval(dir.path()).unwrap_err();
        assert!(err.to_string().contains(EVAL_FILE));
    }
}
