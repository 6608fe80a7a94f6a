//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key is optional except
//! `algorithm`; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Every recognized key, in serialization order.
pub const KEYS: &[&str] = &[
    "algorithm",
    "task",
    "modulus",
    "targets",
    "vocab_size",
    "max_len",
    "context_order",
    "group_size",
    "queries_per_step",
    "total_steps",
    "learning_rate",
    "epsilon_clip",
    "tau",
    "margin_target",
    "margin_warmup_ratio",
    "beta_kl",
    "seed",
    "eval_interval",
    "threads",
];

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| format!("cannot parse {value:?}: {e}"))
}

fn parse_targets(value: &str) -> std::result::Result<Vec<usize>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|t| parse(t.trim())).collect()
}

/// Set one key on `config`.
pub fn set_key(config: &mut TrainConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let v = value.trim();
    match key {
        "algorithm" => config.algorithm = parse(v)?,
        "task" => config.task = parse(v)?,
        "modulus" => config.modulus = parse(v)?,
        "targets" => config.targets = parse_targets(v)?,
        "vocab_size" => config.vocab_size = parse(v)?,
        "max_len" => config.max_len = parse(v)?,
        "context_order" => config.context_order = parse(v)?,
        "group_size" => config.group_size = parse(v)?,
        "queries_per_step" => config.queries_per_step = parse(v)?,
        "total_steps" => config.total_steps = parse(v)?,
        "learning_rate" => config.learning_rate = parse(v)?,
        "epsilon_clip" => config.epsilon_clip = parse(v)?,
        "tau" => config.tau = parse(v)?,
        "margin_target" => config.margin_target = parse(v)?,
        "margin_warmup_ratio" => config.margin_warmup_ratio = parse(v)?,
        "beta_kl" => config.beta_kl = parse(v)?,
        "seed" => config.seed = parse(v)?,
        "eval_interval" => config.eval_interval = parse(v)?,
        "threads" => config.threads = parse(v)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

fn split_pair(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Parse config text and apply `overrides` (each `KEY=VALUE`) on top.
/// The result is validated.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    let mut has_algorithm = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: Option<&str>, message: String| Error::Config {
            line: Some(n + 1),
            key: key.map(str::to_string),
            message,
        };
        let (key, value) =
            split_pair(line).ok_or_else(|| err(None, format!("expected key = value, got {line:?}")))?;
        set_key(&mut config, key, value).map_err(|m| err(Some(key), format!("{key}: {m}")))?;
        has_algorithm |= key == "algorithm";
    }
    for o in overrides {
        let (key, value) = split_pair(o)
            .ok_or_else(|| Error::config(o.as_str(), format!("override {o:?} is not KEY=VALUE")))?;
        set_key(&mut config, key, value).map_err(|m| Error::config(key, format!("override {key}: {m}")))?;
        has_algorithm |= key == "algorithm";
    }
    if !has_algorithm {
        return Err(Error::config("algorithm", "missing required key `algorithm`"));
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        key: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text, overrides)
}

/// Serialize every key. Floats carry 17 significant digits, so the text
/// re-parses to an identical configuration.
pub fn serialize_config(config: &TrainConfig) -> String {
    let f = |x: f64| format!("{x:.16e}");
    let targets = config
        .targets
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let pairs: [(&str, String); 19] = [
        ("algorithm", config.algorithm.to_string()),
        ("task", config.task.to_string()),
        ("modulus", config.modulus.to_string()),
        ("targets", targets),
        ("vocab_size", config.vocab_size.to_string()),
        ("max_len", config.max_len.to_string()),
        ("context_order", config.context_order.to_string()),
        ("group_size", config.group_size.to_string()),
        ("queries_per_step", config.queries_per_step.to_string()),
        ("total_steps", config.total_steps.to_string()),
        ("learning_rate", f(config.learning_rate)),
        ("epsilon_clip", f(config.epsilon_clip)),
        ("tau", f(config.tau)),
        ("margin_target", f(config.margin_target)),
        ("margin_warmup_ratio", f(config.margin_warmup_ratio)),
        ("beta_kl", f(config.beta_kl)),
        ("seed", config.seed.to_string()),
        ("eval_interval", config.eval_interval.to_string()),
        ("threads", config.threads.to_string()),
    ];
    let mut out = String::new();
    for (k, v) in pairs {
        debug_assert!(KEYS.contains(&k));
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}
