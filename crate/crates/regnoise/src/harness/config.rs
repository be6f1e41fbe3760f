//! Experiment configuration files: TOML (default) or JSON.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{LabError, Result};

/// Ensemble and grid sizes used when the file leaves them out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Sizes of the acceptance runs.
    #[default]
    Full,
    /// Small sizes for quick checks and determinism reruns.
    Smoke,
}

/// One experiment. Every key is optional except `experiment`; each suite
/// documents which keys it reads and rejects the others.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Suite id; may be left out of a file when the caller names the suite.
    #[serde(default)]
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast_hurst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_drift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_moll: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.to_string(), ..Self::default() }
    }

    pub fn smoke(experiment: &str) -> Self {
        Self { scale: Some(Scale::Smoke), ..Self::new(experiment) }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn scale(&self) -> Scale {
        self.scale.unwrap_or_default()
    }

    /// Names of the keys that are set.
    pub fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! check {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { keys.push(stringify!($field)); })*
            };
        }
        check!(seed, scale, paths, n_steps, hurst, contrast_hurst, bc, drift, g_drift, alpha, n_moll, lambda, t_levels, x0, modes, bins, levels, out);
        keys
    }

    /// Rejects keys the suite does not read and values outside their domains.
    pub fn validate(&self, accepted: &[&str]) -> Result<()> {
        const ALWAYS: [&str; 3] = ["seed", "scale", "out"];
        for key in self.present_keys() {
            if !ALWAYS.contains(&key) && !accepted.contains(&key) {
                return Err(LabError::Config(format!("key `{key}` is not used by suite `{}`", self.experiment)));
            }
        }
        if self.paths == Some(0) || self.n_steps == Some(0) || self.bins == Some(0) {
            return Err(LabError::Config("paths, n_steps and bins must be positive".into()));
        }
        if let Some(hs) = &self.hurst {
            if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
                return Err(LabError::Config("hurst values must lie in (0, 1)".into()));
            }
        }
        if let Some(ls) = &self.lambda {
            if ls.is_empty() || ls.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(LabError::Config("lambda grid must be nonempty and nonnegative".into()));
            }
        }
        if let Some(ns) = &self.n_moll {
            if ns.is_empty() || ns.contains(&0) {
                return Err(LabError::Config("mollification levels must be positive".into()));
            }
        }
        if let Some(ts) = &self.t_levels {
            if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0)) {
                return Err(LabError::Config("time levels must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_and_json_and_rejects_unknown_keys() {
        let c = ExperimentConfig::from_toml("experiment = \"fbm-covariance\"\nseed = 7\nhurst = [0.25, 0.5]\n").unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.hurst.as_deref(), Some(&[0.25, 0.5][..]));
        let j = ExperimentConfig::from_json(r#"{"experiment": "fbm-covariance", "seed": 7, "hurst": [0.25, 0.5]}"#).unwrap();
        assert_eq!(c, j);
        assert!(ExperimentConfig::from_toml("experiment = \"x\"\ncolour = 3\n").is_err());
        assert!(c.validate(&["hurst"]).is_ok());
        assert!(c.validate(&["paths"]).is_err());
        let bad = ExperimentConfig { hurst: Some(vec![1.2]), ..ExperimentConfig::new("x") };
        assert!(bad.validate(&["hurst"]).is_err());
    }
}
