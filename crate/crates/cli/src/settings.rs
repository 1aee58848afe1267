//! Flat TOML config file and the flag/file/default precedence rules.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;

use elo_mov::model::DiscretizationScheme;

/// Every knob the commands understand, all optional. Command-line flags
/// override these; built-in defaults fill whatever remains.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<String>,
    pub sigma: Option<f64>,
    pub k: Option<f64>,
    pub k_grid: Option<String>,
    pub mode: Option<String>,
    pub tau: Option<f64>,
    pub train_labels: Option<Vec<String>>,
    pub test_labels: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub smoothing: Option<f64>,
    pub init: Option<String>,
    pub hfa: Option<bool>,
    pub reset_per_season: Option<bool>,
    pub teams: Option<usize>,
    pub spread: Option<f64>,
    pub rounds: Option<u32>,
    pub label: Option<String>,
    pub z_range: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("cannot parse config file {}", path.display()))
            }
        }
    }
}

/// Parses a scheme spec of the form `J` or `J:t1,t2,...`, e.g. `2`, `4:2`,
/// `6:1,2`.
pub fn parse_scheme(spec: &str) -> Result<DiscretizationScheme> {
    let (j_part, thresholds_part) = match spec.split_once(':') {
        Some((j, rest)) => (j, rest),
        None => (spec, ""),
    };
    let j: usize = j_part
        .trim()
        .parse()
        .map_err(|_| anyhow!("scheme {spec:?}: J must be an integer"))?;
    let thresholds: Vec<u32> = if thresholds_part.trim().is_empty() {
        Vec::new()
    } else {
        thresholds_part
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| anyhow!("scheme {spec:?}: bad threshold {t:?}"))
            })
            .collect::<Result<_>>()?
    };
    if j != 2 * (thresholds.len() + 1) {
        return Err(anyhow!(
            "scheme {spec:?}: J must equal 2*(thresholds+1); {} thresholds imply J={}",
            thresholds.len(),
            2 * (thresholds.len() + 1)
        ));
    }
    DiscretizationScheme::new(thresholds).map_err(|e| anyhow!("{e}"))
}

/// Parses a `lo:hi:step` range spec.
pub fn parse_range(spec: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("range {spec:?} must have the form lo:hi:step"));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| anyhow!("range {spec:?}: {s:?} is not a number"))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}
