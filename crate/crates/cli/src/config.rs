//! Declarative experiment configuration (JSON).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use etsafe::classk::{KFunction, DEFAULT_SAMPLES};
use etsafe::sim::SimConfig;
use etsafe::systems::DEFAULT_SAFETY_FACTOR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub certificate: CertificateSpec,
    pub trigger: TriggerSpec,
    pub x0: Vec<f64>,
    pub sim: SimConfig,
    #[serde(default)]
    pub assertions: Assertions,
    #[serde(default)]
    pub bound: BoundSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Recorded in the report; the simulation itself draws no random numbers.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Counterexample,
    ScalarStabilization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: SystemName,
    #[serde(default)]
    pub params: SystemParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Error-gain parameter of the counterexample, `iota(s) = 2 r^3 s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

pub const DEFAULT_R: f64 = 1.2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    /// Barrier shift; `0` keeps the original certificate.
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaTag {
    #[default]
    Alpha,
}

/// `"alpha"`, `{"scale": c}` for `c alpha`, or an explicit class-K function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Alpha(AlphaTag),
    Scaled { scale: f64 },
    Function(KFunction),
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Alpha(AlphaTag::Alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Stabilization,
    NaiveSafety,
    SignedNaiveSafety,
    StrongIssf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub variant: Variant,
    pub sigma: f64,
}

/// Expected outcomes; an absent entry is reported but never fails the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    #[serde(default)]
    pub miet: Option<bool>,
    #[serde(default)]
    pub safety: Option<bool>,
    #[serde(default)]
    pub shrinkage: Option<bool>,
    #[serde(default = "default_safety_eps")]
    pub safety_eps: f64,
}

fn default_safety_eps() -> f64 {
    etsafe::analysis::DEFAULT_SAFETY_EPS
}

impl Default for Assertions {
    fn default() -> Self {
        Assertions {
            miet: None,
            safety: None,
            shrinkage: None,
            safety_eps: default_safety_eps(),
        }
    }
}

/// Settings for the dynamics bound `F` behind the interevent-time guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    /// Radius of the state ball; defaults to the radius of the (shifted) safe set.
    #[serde(default)]
    pub working_radius: Option<f64>,
    /// Radius of the error ball; defaults to the largest error the trigger admits.
    #[serde(default)]
    pub error_radius: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_grid() -> usize {
    41
}

fn default_safety_factor() -> f64 {
    DEFAULT_SAFETY_FACTOR
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl Default for BoundSpec {
    fn default() -> Self {
        BoundSpec {
            working_radius: None,
            error_radius: None,
            grid: default_grid(),
            safety_factor: default_safety_factor(),
            samples: default_samples(),
        }
    }
}

/// A configuration problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}", p.display())?,
            None => write!(f, "<config>")?,
        }
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed configuration together with its source text, for diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    pub path: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_source(source, Some(path.to_path_buf()))
    }

    pub fn from_source(source: String, path: Option<PathBuf>) -> Result<Self, ConfigError> {
        match serde_json::from_str::<ExperimentConfig>(&source) {
            Ok(config) => Ok(LoadedConfig {
                config,
                source,
                path,
            }),
            Err(e) => Err(ConfigError {
                path,
                line: Some(e.line()),
                column: Some(e.column()),
                message: strip_position(&e.to_string()),
            }),
        }
    }

    /// Error pointing at the first occurrence of `"key"` in the source.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let (line, column) = match locate_key(&self.source, key) {
            Some((l, c)) => (Some(l), Some(c)),
            None => (None, None),
        };
        ConfigError {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Name used for default output directories.
    pub fn stem(&self) -> String {
        self.path
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_string())
    }
}

// serde_json appends " at line L column C"; the position is printed separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// 1-based line and column of the first `"key"` followed by a colon.
pub fn locate_key(source: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    for (i, line) in source.lines().enumerate() {
        let mut from = 0;
        while let Some(pos) = line[from..].find(&needle) {
            let at = from + pos;
            if line[at + needle.len()..].trim_start().starts_with(':') {
                return Some((i + 1, line[..at].chars().count() + 1));
            }
            from = at + needle.len();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "system": {"name": "counterexample", "params": {"r": 1.2}},
  "trigger": {"variant": "signed_naive_safety", "sigma": 0.5},
  "x0": [0.5, 0.5],
  "sim": {"t_final": 1.0, "max_events": 10, "max_step": 0.05,
          "rel_tol": 1e-10, "abs_tol": 1e-12, "event_tol": 1e-10, "sample_stride": 0.01}
}"#;

    #[test]
    fn defaults_fill_optional_sections() {
        let c = LoadedConfig::from_source(MINIMAL.into(), None)
            .unwrap()
            .config;
        assert_eq!(c.certificate.b, 0.0);
        assert_eq!(c.certificate.beta, BetaSpec::Alpha(AlphaTag::Alpha));
        assert_eq!(c.assertions.safety_eps, 1e-6);
        assert_eq!(c.bound.grid, 41);
        assert_eq!(c.output_dir, None);
    }

    #[test]
    fn beta_forms() {
        let parse = |s: &str| serde_json::from_str::<BetaSpec>(s).unwrap();
        assert_eq!(parse("\"alpha\""), BetaSpec::Alpha(AlphaTag::Alpha));
        assert_eq!(parse("{\"scale\": 2.0}"), BetaSpec::Scaled { scale: 2.0 });
        assert!(matches!(
            parse("{\"kind\": \"linear\", \"slope\": 3.0}"),
            BetaSpec::Function(_)
        ));
        assert!(serde_json::from_str::<BetaSpec>("\"gamma\"").is_err());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let bad = MINIMAL.replace("\"x0\": [0.5, 0.5],", "\"x0\": [0.5, 0.5]");
        let err = LoadedConfig::from_source(bad, Some("a.json".into())).unwrap_err();
        assert_eq!(err.line, Some(5));
        assert!(err.to_string().starts_with("a.json:5:"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replace("\"sigma\": 0.5", "\"sigma\": 0.5, \"sigmaa\": 1");
        let err = LoadedConfig::from_source(bad, None).unwrap_err();
        assert!(err.message.contains("sigmaa"), "{}", err.message);
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn keys_are_located() {
        assert_eq!(locate_key(MINIMAL, "sigma"), Some((3, 49)));
        assert_eq!(locate_key(MINIMAL, "missing"), None);
        // a string value equal to the key name is not a key
        assert_eq!(locate_key("{\"a\": \"b\",\n \"b\": 1}", "b"), Some((2, 2)));
    }
}
