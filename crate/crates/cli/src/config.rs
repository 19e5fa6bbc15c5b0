//! Config file schema, N-grid shorthand and flag merging.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ensemble_core::experiments::{ExperimentId, ExperimentPlan, ObservableKind};
use serde::{Deserialize, Serialize};

/// A problem with user input, reported with exit code 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// `N` grid as written in a config file: an explicit list or the `start:stop:factor` shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<u64>),
    Text(String),
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Vec<u64>, ConfigError> {
        match self {
            Self::List(v) => Ok(v.clone()),
            Self::Text(s) => parse_n_grid(s),
        }
    }
}

/// Parses `"100,1000"` or `"100:100000:10"` (geometric, stop inclusive).
pub fn parse_n_grid(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |what: &str| ConfigError(format!("n_grid: cannot parse '{s}': {what}"));
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [start, stop, factor] = parts[..] else {
            return Err(bad("expected start:stop:factor"));
        };
        let start: u64 = start.parse().map_err(|_| bad("start is not a positive integer"))?;
        let stop: u64 = stop.parse().map_err(|_| bad("stop is not a positive integer"))?;
        let factor: f64 = factor.parse().map_err(|_| bad("factor is not a number"))?;
        if start == 0 || stop < start || factor.is_nan() || factor <= 1.0 {
            return Err(bad("need 0 < start <= stop and factor > 1"));
        }
        let mut out = Vec::new();
        let mut x = start as f64;
        // Relative slack so that 10^k steps land on stop despite rounding.
        while x <= stop as f64 * (1.0 + 1e-9) {
            let v = x.round() as u64;
            if out.last() != Some(&v) {
                out.push(v);
            }
            x *= factor;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| bad(&format!("'{}' is not a positive integer", t.trim())))
            })
            .collect()
    }
}

pub fn parse_observables(s: &str) -> Result<Vec<ObservableKind>, ConfigError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<ObservableKind>()
                .map_err(|e| ConfigError(format!("observables: {e}")))
        })
        .collect()
}

/// One experiment section. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<ObservableKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Section {
    /// Later values win.
    pub fn overlay(self, top: Section) -> Section {
        Section {
            n_grid: top.n_grid.or(self.n_grid),
            m: top.m.or(self.m),
            mu: top.mu.or(self.mu),
            rho: top.rho.or(self.rho),
            j: top.j.or(self.j),
            h: top.h.or(self.h),
            epsilon: top.epsilon.or(self.epsilon),
            beta: top.beta.or(self.beta),
            clip: top.clip.or(self.clip),
            samples: top.samples.or(self.samples),
            trials: top.trials.or(self.trials),
            observables: top.observables.or(self.observables),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
        }
    }

    /// Applies the section on top of the experiment defaults.
    pub fn to_plan(&self, id: ExperimentId) -> Result<ExperimentPlan, ConfigError> {
        let d = ExperimentPlan::defaults(id);
        Ok(ExperimentPlan {
            experiment_id: id,
            n_grid: match &self.n_grid {
                Some(g) => g.resolve()?,
                None => d.n_grid,
            },
            m: self.m.unwrap_or(d.m),
            mu: self.mu.or(d.mu),
            rho: self.rho.unwrap_or(d.rho),
            j: self.j.unwrap_or(d.j),
            h: self.h.unwrap_or(d.h),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            beta: self.beta.or(d.beta),
            clip: self.clip.unwrap_or(d.clip),
            samples: self.samples.unwrap_or(d.samples),
            trials: self.trials.unwrap_or(d.trials),
            observables: self.observables.clone().unwrap_or(d.observables),
            seed: self.seed.unwrap_or(d.seed),
        })
    }

    /// Fully explicit section reproducing `plan`.
    pub fn from_plan(plan: &ExperimentPlan, out: Option<PathBuf>) -> Section {
        Section {
            n_grid: Some(GridSpec::List(plan.n_grid.clone())),
            m: Some(plan.m),
            mu: plan.mu,
            rho: Some(plan.rho),
            j: Some(plan.j),
            h: Some(plan.h),
            epsilon: Some(plan.epsilon),
            beta: plan.beta,
            clip: Some(plan.clip),
            samples: Some(plan.samples),
            trials: Some(plan.trials),
            observables: Some(plan.observables.clone()),
            seed: Some(plan.seed),
            out,
        }
    }
}

/// Config file: one table per experiment id, e.g. `[paramagnet_converge]`.
pub fn load_section(path: &Path, id: ExperimentId) -> Result<Section, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
    parse_section(&text, id).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))
}

pub fn parse_section(text: &str, id: ExperimentId) -> Result<Section, ConfigError> {
    let mut tables: BTreeMap<String, Section> = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    let mut found = None;
    for (name, section) in std::mem::take(&mut tables) {
        let key: ExperimentId = name
            .parse()
            .map_err(|_| ConfigError(format!("unknown section [{name}]; sections are experiment ids")))?;
        if key == id {
            found = Some(section);
        }
    }
    Ok(found.unwrap_or_default())
}

pub fn dump_section(id: ExperimentId, section: &Section) -> Result<String, ConfigError> {
    let mut table = BTreeMap::new();
    table.insert(id.as_str().to_string(), section);
    toml::to_string(&table).map_err(|e| ConfigError(format!("cannot serialize config: {e}")))
}

/// Checks that a positive integer thread count was given.
pub fn parse_threads(value: &str) -> Result<usize, ConfigError> {
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => err(format!("ENSEMBLE_LAB_THREADS = '{value}' must be a positive integer")),
    }
}
