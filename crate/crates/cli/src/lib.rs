//! Experiment orchestration for `cavity-core`.
//!
//! An [`ExperimentConfig`] names a model, one operation with its parameters,
//! a seed and an optional output path. [`run`] dispatches it and wraps the
//! payload in a [`RunRecord`]; [`sweep`] runs many configurations of the same
//! operation and merges their payloads.

mod ops;

use cavity::random::{parse_preset, ModelSpec};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use ops::Operation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input at `{field}`: {message}")]
    InvalidInput { field: String, message: String },
    #[error(transparent)]
    Core(#[from] cavity::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::InvalidInput { field: field.into(), message: message.into() }
    }

    fn kind(&self) -> &'static str {
        use cavity::Error as E;
        match self {
            CliError::InvalidInput { .. } => "invalid_input",
            CliError::Core(E::StateSpaceTooLarge { .. } | E::SizeCap(_)) => "cap",
            CliError::Core(
                E::InvalidAlphabet(_)
                | E::InvalidWeightFunction { .. }
                | E::InvalidGraph(_)
                | E::InvalidSpec(_)
                | E::InvalidMeasure(_)
                | E::InvalidSimplexPoint(_)
                | E::DimensionMismatch { .. }
                | E::PartitionMismatch(_)
                | E::UnknownVariable(_)
                | E::InvalidParameter(_)
                | E::Json(_),
            ) => "invalid_input",
            CliError::Core(_) => "runtime",
            CliError::Io(_) => "io",
        }
    }

    /// 2 for anything the caller got wrong, 3 for caps and runtime failures.
    pub fn exit_code(&self) -> i32 {
        if self.kind() == "invalid_input" {
            2
        } else {
            3
        }
    }

    pub fn payload(&self) -> Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::InvalidInput { field, .. } = self {
            err["field"] = json!(field);
        }
        json!({ "error": err })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Where the model comes from: a preset string, a JSON file, or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Preset { preset: String },
    File { file: PathBuf },
    Inline(ModelSpec),
}

impl ModelRef {
    pub fn load(&self) -> Result<ModelSpec> {
        let spec: ModelSpec = match self {
            ModelRef::Preset { preset } => {
                return parse_preset(preset).map_err(|e| CliError::invalid("model.preset", e.to_string()))
            }
            ModelRef::File { file } => read_json(file, "model.file")?,
            ModelRef::Inline(spec) => spec.clone(),
        };
        spec.validate().map_err(|e| CliError::invalid("model", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelRef>,
    pub operation: Operation,
    /// Required by every stochastic operation; there is no entropy fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Parses a config document, naming the offending field on failure.
    pub fn from_value(v: Value) -> Result<Self> {
        from_value_at(v, "config")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::invalid("seed", format!("operation `{}` is stochastic and needs a seed", self.operation.name())))
    }

    pub fn model(&self) -> Result<ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::invalid("model", format!("operation `{}` needs a model", self.operation.name())))?
            .load()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: Value,
    pub code_version: String,
    /// Seconds.
    pub wall_time: f64,
    pub results: Value,
}

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs one configuration on a pool of `config.threads` workers (all cores if unset).
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let results = with_threads(config.threads, || ops::dispatch(config))?;
    Ok(RunRecord {
        config: serde_json::to_value(config).map_err(cavity::Error::from)?,
        code_version: CODE_VERSION.into(),
        wall_time: start.elapsed().as_secs_f64(),
        results,
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::invalid("threads", "must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Io(format!("cannot start {t} worker threads: {e}")))?
            .install(f),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merge {
    #[default]
    /// Average the primary scalar (`value` or `statistic`) with SE = sd/√N.
    Mean,
    /// Collect the payloads in entry order.
    Concat,
}

/// A list of entries, optionally generated from a base config and a seed list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub entries: Vec<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ExperimentConfig>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub merge: Merge,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        from_value_at(v, "config")
    }

    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let mut all = self.entries.clone();
        if let Some(base) = &self.base {
            all.extend(self.seeds.iter().map(|&s| ExperimentConfig { seed: Some(s), ..base.clone() }));
        }
        all
    }
}

/// Runs every entry on one bounded worker pool and
/// merges the payloads. A single-entry sweep returns that entry's payload.
pub fn sweep(configs: &[ExperimentConfig], merge: Merge, threads: Option<usize>) -> Result<RunRecord> {
    let start = Instant::now();
    let first = configs.first().ok_or_else(|| CliError::invalid("entries", "a sweep needs at least one entry"))?;
    let op = first.operation.name();
    if let Some((i, c)) = configs.iter().enumerate().find(|(_, c)| c.operation.name() != op) {
        return Err(CliError::invalid(
            format!("entries[{i}].operation.op"),
            format!("sweeps must be homogeneous: `{}` after `{op}`", c.operation.name()),
        ));
    }
    let payloads: Vec<Value> = with_threads(threads, || {
        configs.par_iter().map(ops::dispatch).collect::<Result<Vec<_>>>()
    })?;
    let results = if payloads.len() == 1 {
        payloads.into_iter().next().unwrap()
    } else {
        match merge {
            Merge::Concat => Value::Array(payloads),
            Merge::Mean => mean_merge(&payloads)?,
        }
    };
    Ok(RunRecord {
        config: json!({ "entries": configs, "merge": merge }),
        code_version: CODE_VERSION.into(),
        wall_time: start.elapsed().as_secs_f64(),
        results,
    })
}

fn mean_merge(payloads: &[Value]) -> Result<Value> {
    let key = ["value", "statistic"]
        .into_iter()
        .find(|k| payloads[0].get(k).is_some_and(Value::is_number))
        .ok_or_else(|| CliError::invalid("merge", "mean merge needs a numeric `value` or `statistic` in every payload"))?;
    let mut xs = Vec::with_capacity(payloads.len());
    let mut within = 0.0;
    for (i, p) in payloads.iter().enumerate() {
        let x = p.get(key).and_then(Value::as_f64).ok_or_else(|| {
            CliError::invalid(format!("entries[{i}]"), format!("payload has no numeric `{key}` to average"))
        })?;
        xs.push(x);
        within += p.get("se").and_then(Value::as_f64).unwrap_or(0.0).powi(2);
    }
    let e = cavity::Estimate::from_samples(&xs);
    let n = xs.len() as f64;
    let mut out = Map::new();
    out.insert(key.into(), json!(e.value));
    out.insert("se".into(), json!(e.std_error));
    out.insert("within_se".into(), json!(within.sqrt() / n));
    out.insert("entries".into(), json!(xs.len()));
    out.insert("values".into(), json!(xs));
    Ok(Value::Object(out))
}

/// Reads and parses a JSON file; parse failures name the JSON path inside it.
pub fn read_json<T: DeserializeOwned>(path: &Path, field: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(field, format!("cannot read `{}`: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| path_error(e, &format!("{field}:{}", path.display())))
}

fn from_value_at<T: DeserializeOwned>(v: Value, root: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| path_error(e, root))
}

fn path_error(e: serde_path_to_error::Error<serde_json::Error>, root: &str) -> CliError {
    let path = e.path().to_string();
    let message = e.inner().to_string();
    let mut field = if path == "." { root.to_string() } else { path };
    // serde reports a missing field at its parent; point at the field itself
    if let Some(name) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
        field = if field == root { name.to_string() } else { format!("{field}.{name}") };
    }
    CliError::invalid(field, message)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("cannot write `{}`: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// JSON with every float written to 17 significant digits.
pub fn to_json(record: &RunRecord) -> Result<String> {
    Ok(cavity::json::to_string_17(record).map_err(cavity::Error::from)?)
}

/// Flattens the results payload into `path,value` rows, e.g. `marginals[0][1]`.
pub fn to_csv(results: &Value) -> Result<String> {
    let mut rows = Vec::new();
    flatten("", results, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(["path", "value"]).map_err(io)?;
    for (k, v) in rows {
        w.write_record([k, v]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Number(n) => {
            let s = match n.as_f64() {
                Some(f) if n.is_f64() => cavity::json::format_f64(f),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

/// Overlays `over` onto `base`, recursing into objects.
pub fn overlay(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                overlay(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}
