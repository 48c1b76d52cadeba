//! Run configuration: parsing, defaults and schema validation.

use std::path::PathBuf;
use std::sync::OnceLock;

use hyperstab_core::fixedpoint::{IterationSpec, ScalarErrorFn};
use hyperstab_core::hyperstab::{ExperimentConfig, SolutionSection};
use hyperstab_core::radical::EquationParams;
use hyperstab_core::{SpaceDescriptor, Vector, VectorFunction};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// The schema shipped in `docs/`, embedded at build time.
pub const SCHEMA: &str = include_str!("../../../docs/run_config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Command {
    CheckSpace,
    Envelope,
    FixedPoint,
    Solve,
    Hyperstab,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckSpace => "CHECK_SPACE",
            Command::Envelope => "ENVELOPE",
            Command::FixedPoint => "FIXED_POINT",
            Command::Solve => "SOLVE",
            Command::Hyperstab => "HYPERSTAB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpacePayload {
    pub space: SpaceDescriptor<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopePoint {
    pub x: Vector<f64>,
    pub z: Vector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopePayload {
    pub space: SpaceDescriptor<f64>,
    /// Trials for the p-triangle check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Random pairs whose certificates are audited.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Explicit pairs, reported one by one.
    #[serde(default)]
    pub points: Vec<EnvelopePoint>,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointPayload {
    pub spec: IterationSpec<f64>,
    pub phi: VectorFunction<f64>,
    pub epsilon: ScalarErrorFn<f64>,
    #[serde(default)]
    pub samples: Vec<f64>,
    /// CSV file with one sample per line, appended to `samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_csv: Option<PathBuf>,
    pub witnesses: Vec<Vector<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_fp_n_max")]
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvePayload {
    pub equation: EquationParams<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_solution")]
    pub solution: SolutionSection<f64>,
    /// Random admissible pairs for the residual and correspondence checks.
    #[serde(default = "default_trials")]
    pub pairs: usize,
    /// Range of `|x|, |y|` for the random pairs.
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    /// Grid for the structure laws and the residual table.
    #[serde(default = "default_solve_grid")]
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    CheckSpace(CheckSpacePayload),
    Envelope(EnvelopePayload),
    FixedPoint(FixedPointPayload),
    Solve(SolvePayload),
    Hyperstab(ExperimentConfig<f64>),
}

impl Payload {
    pub fn command(&self) -> Command {
        match self {
            Payload::CheckSpace(_) => Command::CheckSpace,
            Payload::Envelope(_) => Command::Envelope,
            Payload::FixedPoint(_) => Command::FixedPoint,
            Payload::Solve(_) => Command::Solve,
            Payload::Hyperstab(_) => Command::Hyperstab,
        }
    }

    fn to_value(&self) -> serde_json::Result<Value> {
        match self {
            Payload::CheckSpace(p) => serde_json::to_value(p),
            Payload::Envelope(p) => serde_json::to_value(p),
            Payload::FixedPoint(p) => serde_json::to_value(p),
            Payload::Solve(p) => serde_json::to_value(p),
            Payload::Hyperstab(p) => serde_json::to_value(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub payload: Payload,
    /// For HYPERSTAB this replaces the payload's own seed when set.
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn command(&self) -> Command {
        self.payload.command()
    }

    /// Seed actually used by the run.
    pub fn effective_seed(&self) -> u64 {
        match (&self.payload, self.seed) {
            (_, Some(s)) => s,
            (Payload::Hyperstab(p), None) => p.seed,
            _ => 0,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let raw = RawConfig {
            command: self.command(),
            payload: self.payload.to_value()?,
            seed: self.seed,
            output: self.output.clone(),
            format: self.format,
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default = "default_output")]
    output: PathBuf,
    #[serde(default)]
    format: Format,
}

fn default_trials() -> usize {
    10_000
}

fn default_samples() -> usize {
    1000
}

fn default_budget() -> usize {
    64
}

fn default_tol() -> f64 {
    1e-12
}

fn default_fp_n_max() -> usize {
    1000
}

fn default_dim() -> usize {
    3
}

fn default_solution() -> SolutionSection<f64> {
    SolutionSection {
        theta: 1.0,
        w: None,
        direction: None,
    }
}

fn default_range() -> [f64; 2] {
    [0.1, 3.0]
}

fn default_solve_grid() -> Vec<f64> {
    (1..=12).flat_map(|i| [-0.25 * i as f64, 0.25 * i as f64]).collect()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn typed<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." {
            prefix.to_string()
        } else {
            format!("{prefix}.{path}")
        };
        CliError::Config(format!("{at}: {}", e.into_inner()))
    })
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("embedded schema is valid JSON");
        jsonschema::validator_for(&schema).expect("embedded schema compiles")
    })
}

/// Checks `doc` against the shipped schema, listing every violation.
pub fn validate_schema(doc: &Value) -> Result<(), CliError> {
    let errors: Vec<String> = validator()
        .iter_errors(doc)
        .map(|e| {
            let path = e.instance_path.to_string();
            format!("{}: {e}", if path.is_empty() { "/" } else { &path })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("schema violation at {}", errors.join("; "))))
    }
}

/// Parses and validates a run configuration.
///
/// Typed parsing runs first so that domain errors (ranges, dimensions,
/// unknown keys) are reported with their field path; the schema check then
/// catches anything the types accept but the schema does not.
pub fn parse_config(text: &[u8]) -> Result<RunConfig, CliError> {
    let text = std::str::from_utf8(text).map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let raw: RawConfig = typed(&doc, "config")?;
    let payload = match raw.command {
        Command::CheckSpace => Payload::CheckSpace(typed(&raw.payload, "payload")?),
        Command::Envelope => Payload::Envelope(typed(&raw.payload, "payload")?),
        Command::FixedPoint => Payload::FixedPoint(typed(&raw.payload, "payload")?),
        Command::Solve => Payload::Solve(typed(&raw.payload, "payload")?),
        Command::Hyperstab => Payload::Hyperstab(typed(&raw.payload, "payload")?),
    };
    validate_schema(&doc)?;
    Ok(RunConfig {
        payload,
        seed: raw.seed,
        output: raw.output,
        format: raw.format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"command": "CHECK_SPACE", "payload": {"space": {"family": "CROSS_2NORM"}}}"#;

    #[test]
    fn defaults_filled() {
        let cfg = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(cfg.seed, None);
        assert_eq!(cfg.effective_seed(), 0);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.output, PathBuf::from("out"));
        match cfg.payload {
            Payload::CheckSpace(p) => assert_eq!(p.trials, 10_000),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beta_out_of_range() {
        let text = r#"{"command": "CHECK_SPACE", "payload": {"space": {"family": "CROSS_2NORM", "beta": 1.5}}}"#;
        let err = parse_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("beta must lie in (0,1]"), "{err}");
        assert!(err.contains("payload.space"), "{err}");
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let text = r#"{"command": "CHECK_SPACE", "payload": {"space": {"family": "CROSS_2NORM"}, "trails": 5}}"#;
        let err = parse_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("payload") && err.contains("trails"), "{err}");
        let text = r#"{"command": "CHECK_SPACE", "payload": {"space": {"family": "CROSS_2NORM"}}, "extra": 1}"#;
        let err = parse_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn schema_catches_what_types_allow() {
        let text = r#"{"command": "CHECK_SPACE", "payload": {"space": {"family": "CROSS_2NORM"}, "trials": 0}}"#;
        let err = parse_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("/payload/trials"), "{err}");
    }

    #[test]
    fn rejects_non_utf8() {
        assert!(parse_config(&[0xff, 0xfe]).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(parse_config(cfg.to_json().unwrap().as_bytes()).unwrap(), cfg);
    }
}
