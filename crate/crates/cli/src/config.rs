//! Run configuration: one JSON document per run.

use std::fmt;
use std::path::PathBuf;

use ginibre_tau::hub::Cutoffs;
use ginibre_tau::tauseries::Group;
use ginibre_tau::{EnsembleKind, EnsembleSpec, QuadSettings, C64};
use serde::{Deserialize, Serialize};

pub const DEFAULT_W: usize = 10;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PartitionFunction,
    CompareOracle,
    HirotaCheck,
    GroupIntegral,
    KernelCheck,
    MomentsDump,
    DiscreteCheck,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::PartitionFunction => "partition-function",
            Self::CompareOracle => "compare-oracle",
            Self::HirotaCheck => "hirota-check",
            Self::GroupIntegral => "group-integral",
            Self::KernelCheck => "kernel-check",
            Self::MomentsDump => "moments-dump",
            Self::DiscreteCheck => "discrete-check",
            Self::Suite => "suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Settings of the difference-equation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HirotaSettings {
    pub cutoffs: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub charge: usize,
    pub min_factor: f64,
}

impl Default for HirotaSettings {
    fn default() -> Self {
        Self { cutoffs: vec![8, 10, 12, 14], alpha: 8.0, beta: 10.0, charge: 1, min_factor: 2.0 }
    }
}

/// Extra complex Ginibre parameters.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaneConfig {
    pub l1: i64,
    pub l2: i64,
    pub t_bar: Vec<f64>,
    pub s_bar: Vec<f64>,
}

fn default_w() -> usize {
    DEFAULT_W
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_trials() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub kind: EnsembleKind,
    pub n: usize,
    #[serde(default)]
    pub l: i64,
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(default)]
    pub s: Vec<f64>,
    /// Complex-sector weight; the kind's default when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Real-sector weight; the kind's default when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub plane: Option<PlaneConfig>,
    #[serde(default = "default_w")]
    pub w: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub quad: QuadSettings,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Insertion points for the kernel check, as [re, im] pairs.
    #[serde(default)]
    pub p: Vec<[f64; 2]>,
    #[serde(default)]
    pub group: Option<Group>,
    #[serde(default)]
    pub hirota: HirotaSettings,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    Syntax,
    UnknownKind,
    NegativeCutoff,
    MalformedNumber,
    DuplicateField,
    UnknownField,
    MissingField,
    InvalidValue,
    Io,
}

impl ErrorCode {
    pub fn code(self) -> &'static str {
        match self {
            Self::Syntax => "E001",
            Self::UnknownKind => "E002",
            Self::NegativeCutoff => "E003",
            Self::MalformedNumber => "E004",
            Self::DuplicateField => "E005",
            Self::UnknownField => "E006",
            Self::MissingField => "E007",
            Self::InvalidValue => "E008",
            Self::Io => "E009",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub code: ErrorCode,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{} at line {} column {}: {}", self.code.code(), self.line, self.column, self.message)
        } else {
            write!(f, "{}: {}", self.code.code(), self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), line: 0, column: 0 }
    }
}

fn classify(e: &serde_json::Error) -> (ErrorCode, String) {
    use serde_json::error::Category;
    let msg = e.to_string();
    let msg = match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg,
    };
    match e.classify() {
        Category::Syntax if msg.contains("number") => (ErrorCode::MalformedNumber, format!("malformed number: {msg}")),
        Category::Syntax | Category::Eof | Category::Io => (ErrorCode::Syntax, msg),
        Category::Data => {
            if msg.starts_with("duplicate field") {
                (ErrorCode::DuplicateField, msg)
            } else if msg.starts_with("unknown field") {
                (ErrorCode::UnknownField, msg)
            } else if msg.starts_with("missing field") {
                (ErrorCode::MissingField, msg)
            } else if msg.starts_with("unknown variant") && msg.contains("`OE`") {
                (ErrorCode::UnknownKind, format!("unknown ensemble kind: {msg}"))
            } else if msg.contains("integer `-") {
                (ErrorCode::NegativeCutoff, format!("negative cutoff: {msg}"))
            } else if msg.starts_with("invalid type") && (msg.contains("expected usize") || msg.contains("expected f64") || msg.contains("expected i64") || msg.contains("expected u64")) {
                (ErrorCode::MalformedNumber, format!("malformed number: {msg}"))
            } else {
                (ErrorCode::InvalidValue, msg)
            }
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| {
        let (code, message) = classify(&e);
        ConfigError { code, message, line: e.line(), column: e.column() }
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Minimal configuration with every default filled in.
    pub fn new(command: Command, kind: EnsembleKind, n: usize) -> Self {
        Self {
            command,
            kind,
            n,
            l: 0,
            t: Vec::new(),
            s: Vec::new(),
            alpha: None,
            beta: None,
            plane: None,
            w: DEFAULT_W,
            tolerance: DEFAULT_TOLERANCE,
            quad: QuadSettings::default(),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            p: Vec::new(),
            group: None,
            hirota: HirotaSettings::default(),
            trials: default_trials(),
            format: Format::default(),
            output: None,
            cache: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::new(ErrorCode::InvalidValue, m));
        if self.w == 0 {
            return invalid("cutoff w must be positive".into());
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return invalid("tolerance must be positive".into());
        }
        if self.command == Command::GroupIntegral && self.group.is_none() {
            return invalid("group-integral needs a `group`".into());
        }
        if self.command == Command::KernelCheck && self.p.len() != 2 {
            return invalid("kernel-check needs two insertion points `p`".into());
        }
        if self.command == Command::HirotaCheck && self.hirota.cutoffs.len() < 2 {
            return invalid("hirota-check needs at least two cutoffs".into());
        }
        if self.command != Command::Suite {
            self.spec().validate().map_err(|e| ConfigError::new(ErrorCode::InvalidValue, e.to_string()))?;
        }
        Ok(())
    }

    pub fn spec(&self) -> EnsembleSpec {
        let mut spec = EnsembleSpec::new(self.kind, self.n).with_l(self.l).with_t(self.t.clone()).with_s(self.s.clone());
        let (alpha, beta) = self.kind.default_mix();
        spec = spec.with_mix(self.alpha.unwrap_or(alpha), self.beta.unwrap_or(beta));
        if let Some(p) = &self.plane {
            spec = spec.with_plane(ginibre_tau::moments::PlaneParams {
                l1: p.l1,
                l2: p.l2,
                t_bar: p.t_bar.clone().into(),
                s_bar: p.s_bar.clone().into(),
            });
        }
        spec
    }

    pub fn cutoffs(&self) -> Cutoffs {
        Cutoffs { w: self.w, quad: self.quad, samples: self.samples, seed: self.seed }
    }

    pub fn points(&self) -> Vec<C64> {
        self.p.iter().map(|[re, im]| C64::new(*re, *im)).collect()
    }

    /// Compact JSON echo embedded in every output.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(text: &str) -> ErrorCode {
        parse_config(text).unwrap_err().code
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"command": "partition-function", "kind": "SE", "n": 1}"#).unwrap();
        assert_eq!(c, RunConfig::new(Command::PartitionFunction, EnsembleKind::SE, 1));
        assert_eq!((c.w, c.tolerance, c.samples, c.seed), (10, 1e-5, 100_000, 42));
    }

    #[test]
    fn round_trip_is_lossless() {
        let text = r#"{"command": "compare-oracle", "kind": "GinOE", "n": 2, "l": 1, "t": [0.1, -0.05],
            "alpha": 0.5, "w": 12, "tolerance": 1e-4, "format": "csv", "output": "out"}"#;
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.echo()).unwrap(), c);
    }

    #[test]
    fn distinct_error_codes() {
        assert_eq!(code(r#"{"command": "suite", "kind": "XY", "n": 1}"#), ErrorCode::UnknownKind);
        assert!(parse_config(r#"{"command": "suite", "kind": "XY", "n": 1}"#).unwrap_err().message.contains("unknown ensemble kind"));
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1, "n": 2}"#), ErrorCode::DuplicateField);
        assert!(parse_config(r#"{"command": "suite", "kind": "SE", "kind": "OE", "n": 1}"#).unwrap_err().message.contains("duplicate field"));
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1, "w": -3}"#), ErrorCode::NegativeCutoff);
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1, "tolerance": "tiny"}"#), ErrorCode::MalformedNumber);
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1, "tolerance": 1e}"#), ErrorCode::MalformedNumber);
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1, "colour": 1}"#), ErrorCode::UnknownField);
        assert_eq!(code(r#"{"command": "suite", "kind": "SE"}"#), ErrorCode::MissingField);
        assert_eq!(code(r#"{"command": "suite", "kind": "SE", "n": 1"#), ErrorCode::Syntax);
        assert_eq!(code(r#"{"command": "partition-function", "kind": "OE", "n": 1, "t": [0, 0, 0.1]}"#), ErrorCode::InvalidValue);
    }

    #[test]
    fn diagnostics_carry_position() {
        let e = parse_config("{\n  \"command\": \"suite\",\n  \"kind\": \"SE\",\n  \"n\": 1,\n  \"bogus\": 2\n}").unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.to_string().starts_with("E006 at line 5"));
    }

    #[test]
    fn command_requirements() {
        assert_eq!(code(r#"{"command": "kernel-check", "kind": "OE", "n": 2}"#), ErrorCode::InvalidValue);
        assert_eq!(code(r#"{"command": "group-integral", "kind": "OE", "n": 1}"#), ErrorCode::InvalidValue);
        let c = parse_config(r#"{"command": "group-integral", "kind": "OE", "n": 1, "group": {"Orthogonal": 3}}"#).unwrap();
        assert_eq!(c.group, Some(Group::Orthogonal(3)));
    }
}
