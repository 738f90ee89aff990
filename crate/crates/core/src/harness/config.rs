//! `key = value` experiment configuration files.
//!
//! Keys are the field names of [`ExperimentConfig`] and its nested configs,
//! flattened. `#` starts a comment. Keys not present keep the value of the
//! base configuration. `seed` is the master seed; the generation and
//! regression seeds are derived from it.

use std::fmt::Write as _;
use std::str::FromStr;

use super::experiment::ExperimentConfig;
use super::reference::ReferenceKind;
use crate::error::{Error, Result};

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value {value:?} for {key}: {e}")))
}

pub fn parse_config(text: &str, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = base;
    let mut seed = cfg.seed;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let r = &mut cfg.reference;
        match key {
            "kind" => r.kind = ReferenceKind::parse(value)?,
            "period" => r.period = parse(key, value)?,
            "amplitude" => r.amplitude = parse(key, value)?,
            "mean" => r.mean = parse(key, value)?,
            "lag" => r.lag = parse(key, value)?,
            "low" => r.low = parse(key, value)?,
            "high" => r.high = parse(key, value)?,
            "rise_fraction" => r.rise_fraction = parse(key, value)?,
            "high_fraction" => r.high_fraction = parse(key, value)?,
            "alpha" => cfg.alpha = parse(key, value)?,
            "dt_control" => cfg.sim.dt_control = parse(key, value)?,
            "rk4_substeps" => cfg.sim.rk4_substeps = parse(key, value)?,
            "trajectory_count" => cfg.sim.trajectory_count = parse(key, value)?,
            "max_trajectory_length" => cfg.sim.max_trajectory_length = parse(key, value)?,
            "init_low" => {
                let v: f64 = parse(key, value)?;
                cfg.sim.init_low.fill(v);
            }
            "init_high" => {
                let v: f64 = parse(key, value)?;
                cfg.sim.init_high.fill(v);
            }
            "gamma" => cfg.fqi.gamma = parse(key, value)?,
            "iteration_cap" => cfg.fqi.iteration_cap = parse(key, value)?,
            "tree_count" => cfg.fqi.regression.tree_count = parse(key, value)?,
            "split_candidates" => {
                cfg.fqi.regression.split_candidates = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "min_leaf_size" => cfg.fqi.regression.min_leaf_size = parse(key, value)?,
            "horizon" => cfg.horizon = parse(key, value)?,
            "transient_cutoff" => cfg.transient_cutoff = parse(key, value)?,
            "start_phase" => cfg.start_phase = parse(key, value)?,
            "seed" => seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
    }
    let cfg = cfg.with_seed(seed);
    cfg.validate()?;
    Ok(cfg)
}

/// Inverse of [`parse_config`] for configurations whose initial-state
/// bounds are uniform across species.
pub fn to_config_text(cfg: &ExperimentConfig) -> String {
    let r = &cfg.reference;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("kind", r.kind.as_str().into());
    kv("period", r.period.to_string());
    kv("amplitude", r.amplitude.to_string());
    kv("mean", r.mean.to_string());
    kv("lag", r.lag.to_string());
    kv("low", r.low.to_string());
    kv("high", r.high.to_string());
    kv("rise_fraction", r.rise_fraction.to_string());
    kv("high_fraction", r.high_fraction.to_string());
    kv("alpha", cfg.alpha.to_string());
    kv("dt_control", cfg.sim.dt_control.to_string());
    kv("rk4_substeps", cfg.sim.rk4_substeps.to_string());
    kv("trajectory_count", cfg.sim.trajectory_count.to_string());
    kv(
        "max_trajectory_length",
        cfg.sim.max_trajectory_length.to_string(),
    );
    kv(
        "init_low",
        cfg.sim.init_low.first().copied().unwrap_or(0.0).to_string(),
    );
    kv(
        "init_high",
        cfg.sim
            .init_high
            .first()
            .copied()
            .unwrap_or(0.0)
            .to_string(),
    );
    kv("gamma", cfg.fqi.gamma.to_string());
    kv("iteration_cap", cfg.fqi.iteration_cap.to_string());
    kv("tree_count", cfg.fqi.regression.tree_count.to_string());
    kv(
        "split_candidates",
        cfg.fqi
            .regression
            .split_candidates
            .map_or_else(|| "auto".into(), |k| k.to_string()),
    );
    kv(
        "min_leaf_size",
        cfg.fqi.regression.min_leaf_size.to_string(),
    );
    kv("horizon", cfg.horizon.to_string());
    kv("transient_cutoff", cfg.transient_cutoff.to_string());
    kv("start_phase", cfg.start_phase.to_string());
    kv("seed", cfg.seed.to_string());
    s
}
