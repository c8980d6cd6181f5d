//! Artifact envelopes, manifests and file emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use foldfinder::problems::ProblemSpec;
use foldfinder::System;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<foldfinder::Error> for CliError {
    fn from(e: foldfinder::Error) -> Self {
        use foldfinder::Error as E;
        match e {
            E::Parse { .. }
            | E::UnknownIdentifier { .. }
            | E::InvalidConfig(_)
            | E::DimensionMismatch { .. }
            | E::NegativeEntry { .. }
            | E::NotIrreducible { .. }
            | E::NotSignConstant
            | E::BadExponent(_)
            | E::NonpositiveParameter { .. }
            | E::MissingSamplingBox
            | E::DimensionTooLarge { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Identity of the problem file every artifact refers back to.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub path: String,
    pub name: String,
    pub dim: usize,
    pub sha256: String,
}

pub struct Problem {
    pub info: ProblemInfo,
    pub table: toml::Table,
    pub system: System,
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_problem(path: &Path) -> CliResult<Problem> {
    let text = read_text(path)?;
    let spec = ProblemSpec::from_toml(&text)?;
    let system: System = spec.build()?;
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(Problem {
        info: ProblemInfo {
            path: path.display().to_string(),
            name: system.name().to_string(),
            dim: system.dim(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        },
        table,
        system,
    })
}

/// Common header of every JSON artifact.
#[derive(Serialize)]
pub struct Document<'a, C, R> {
    pub schema_version: u32,
    pub command: &'a str,
    pub problem: &'a ProblemInfo,
    pub config: C,
    pub result: R,
}

impl<'a, C: Serialize, R: Serialize> Document<'a, C, R> {
    pub fn new(command: &'a str, problem: &'a ProblemInfo, config: C, result: R) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            problem,
            config,
            result,
        }
    }
}

pub fn to_json<S: Serialize>(value: &S) -> CliResult<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn to_value<S: Serialize>(value: &S) -> CliResult<Value> {
    serde_json::to_value(value).map_err(|e| CliError::Numerical(e.to_string()))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Prefixes CSV text with the schema comment line.
pub fn csv_with_schema(body: &str) -> String {
    format!("# schema_version: {SCHEMA_VERSION}\n{body}")
}

#[derive(Serialize)]
pub struct Stage {
    pub name: String,
    pub output: Value,
}

#[derive(Serialize)]
pub struct Metadata {
    pub started_unix_ms: u128,
    pub threads: usize,
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

#[derive(Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub problem: Option<ProblemInfo>,
    pub seed: Option<u64>,
    pub config: Value,
    pub stages: Vec<Stage>,
    pub metadata: Metadata,
}

/// Collects stage outputs and timings for the run manifest.
pub struct Recorder {
    started: SystemTime,
    threads: usize,
    pub problem: Option<ProblemInfo>,
    pub seed: Option<u64>,
    pub config: Value,
    stages: Vec<Stage>,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn new(threads: usize) -> Self {
        Self {
            started: SystemTime::now(),
            threads,
            problem: None,
            seed: None,
            config: Value::Null,
            stages: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn time<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t0 = Instant::now();
        let out = f();
        *self.timings.entry(name.to_string()).or_default() += t0.elapsed().as_secs_f64();
        out
    }

    pub fn record<S: Serialize>(&mut self, name: &str, output: &S) -> CliResult<()> {
        self.stages.push(Stage {
            name: name.to_string(),
            output: to_value(output)?,
        });
        Ok(())
    }

    pub fn into_manifest(self, command: &str) -> Manifest {
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            command: command.to_string(),
            problem: self.problem,
            seed: self.seed,
            config: self.config,
            stages: self.stages,
            metadata: Metadata {
                started_unix_ms: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis()),
                threads: self.threads,
                wall_clock_seconds: self.timings,
            },
        }
    }
}

pub fn display(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}
