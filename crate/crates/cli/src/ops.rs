//! The operation table: parameters for each subcommand and their dispatch.

use crate::{CliError, ExperimentConfig, Result};
use cavity::bethe::{ass_increments, bethe_free_energy, free_energy_exact, poissonized_bethe};
use cavity::bp::{bethe_log_z, bp_run, BpConfig};
use cavity::cut::{embed, strong_cut_distance, strong_cut_distance_heuristic, weak_cut_distance, DistanceMode, EmbeddedMeasure, HeuristicOptions};
use cavity::diagnostics::{
    bp_empirical_distance, cavity_consistency, census_distance, factorization_statistic, local_census,
    nonreconstruction_statistic, over_graph_seeds,
};
use cavity::exact::GibbsTable;
use cavity::model::{DiscreteMeasure, FactorGraph};
use cavity::popdyn::{population_dynamics, Population};
use cavity::random::{sample_factor_graph, ModelSpec};
use cavity::regularity::{conditional_distance, regularity_decomposition, ConfigPartition, CoordinatePartition, DEFAULT_BUDGET};
use cavity::rng::derive_seed;
use cavity::tree::CanonicalCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;

/// A JSON input given either as a file path or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    File(PathBuf),
    Inline(Value),
}

impl Source {
    /// The JSON text of the input. A file holding a run record stands for its
    /// results payload, or for `results[key]` when `key` names a sub-object,
    /// so the output of one run can feed the next.
    fn text_of(&self, field: &str, key: Option<&str>) -> Result<String> {
        let text = match self {
            Source::File(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::invalid(field, format!("cannot read `{}`: {e}", p.display())))?,
            Source::Inline(v) => v.to_string(),
        };
        let Ok(Value::Object(mut doc)) = serde_json::from_str::<Value>(&text) else {
            return Ok(text);
        };
        if !(doc.contains_key("code_version") && doc.contains_key("results")) {
            return Ok(text);
        }
        let mut results = doc.remove("results").expect("checked above");
        if let Some(inner) = key.and_then(|k| results.get_mut(k)) {
            results = inner.take();
        }
        Ok(results.to_string())
    }

    fn text(&self, field: &str) -> Result<String> {
        self.text_of(field, None)
    }

    fn parse<T>(&self, field: &str, parse: impl FnOnce(&str) -> cavity::Result<T>) -> Result<T> {
        parse(&self.text(field)?).map_err(|e| CliError::invalid(field, e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetheForm {
    #[default]
    Tree,
    Poissonized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Strong,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    Factorization,
    Nonrec,
    Census,
    Bpdist,
    Cavity,
}

fn default_damping() -> f64 {
    BpConfig::default().damping
}
fn default_tol() -> f64 {
    BpConfig::default().tol
}
fn default_max_iters() -> usize {
    BpConfig::default().max_iters
}
fn default_pop_size() -> usize {
    10_000
}
fn default_sweeps() -> usize {
    100
}
fn default_samples() -> usize {
    100_000
}
fn default_rounds() -> usize {
    HeuristicOptions::default().rounds
}
fn default_budget() -> u64 {
    DEFAULT_BUDGET
}
fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    /// Sample `G(n)` from the model.
    Gen { n: usize },
    /// Exhaustive `ln Z` (and marginals) of a graph file or of a sampled `G(n)`.
    Exact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<Source>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        marginals: bool,
    },
    Bp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<Source>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
    },
    Popdyn {
        #[serde(default = "default_pop_size")]
        pop_size: usize,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        /// Start from a jittered rather than uniform population.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        jitter: Option<f64>,
    },
    Bethe {
        #[serde(default)]
        form: BetheForm,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_pop_size")]
        pop_size: usize,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        /// A precomputed boundary population; skips population dynamics.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        population: Option<Source>,
    },
    Ass { n_max: usize, seeds_per_n: usize },
    /// `(1/n) E ln Z(G(n))` averaged over `seeds` graphs.
    Fexact {
        n: usize,
        #[serde(default = "one")]
        seeds: usize,
    },
    Cutdist {
        mu: Source,
        nu: Source,
        #[serde(default)]
        mode: Mode,
        #[serde(default)]
        metric: Metric,
        #[serde(default = "default_rounds")]
        rounds: usize,
    },
    Regularity {
        measure: Source,
        eps: f64,
        #[serde(default = "default_budget")]
        budget: u64,
    },
    Diagnose {
        which: Diagnostic,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default = "one")]
        graph_seeds: usize,
        #[serde(default = "one")]
        ell: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_samples")]
        tree_samples: usize,
        #[serde(default)]
        root: usize,
        /// Hex canonical code of the neighbourhood class (bpdist).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        code: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        population: Option<Source>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<Source>,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Gen { .. } => "gen",
            Operation::Exact { .. } => "exact",
            Operation::Bp { .. } => "bp",
            Operation::Popdyn { .. } => "popdyn",
            Operation::Bethe { .. } => "bethe",
            Operation::Ass { .. } => "ass",
            Operation::Fexact { .. } => "fexact",
            Operation::Cutdist { .. } => "cutdist",
            Operation::Regularity { .. } => "regularity",
            Operation::Diagnose { .. } => "diagnose",
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x).map_err(cavity::Error::from)?)
}

/// A graph from `graph`, or else `G(n)` sampled from the model with the run seed.
fn load_graph(cfg: &ExperimentConfig, graph: &Option<Source>, n: Option<usize>) -> Result<FactorGraph> {
    match (graph, n) {
        (Some(src), None) => src.parse("operation.graph", FactorGraph::from_json),
        (None, Some(n)) => Ok(sample_factor_graph(&cfg.model()?, n, cfg.seed()?)?),
        (Some(_), Some(_)) => Err(CliError::invalid("operation.graph", "give either `graph` or `n`, not both")),
        (None, None) => Err(CliError::invalid("operation.n", "give a `graph` file or a size `n` to sample")),
    }
}

fn load_measure(src: &Source, field: &str) -> Result<EmbeddedMeasure> {
    let text = src.text(field)?;
    match EmbeddedMeasure::from_json(&text) {
        Ok(m) => Ok(m),
        Err(embedded_err) => DiscreteMeasure::from_json(&text).map(|m| embed(&m)).map_err(|_| {
            CliError::invalid(field, format!("neither an embedded nor a discrete measure: {embedded_err}"))
        }),
    }
}

fn boundary(spec: &ModelSpec, src: &Option<Source>, pop_size: usize, sweeps: usize, seed: u64) -> Result<Population> {
    match src {
        Some(s) => Population::from_json(&s.text_of("operation.population", Some("population"))?)
            .map_err(|e| CliError::invalid("operation.population", e.to_string())),
        None => {
            let init = Population::uniform(spec.q(), pop_size);
            Ok(population_dynamics(spec, &init, sweeps, derive_seed(seed, "cli_boundary", 0))?)
        }
    }
}

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Result<Value> {
    match &cfg.operation {
        Operation::Gen { n } => {
            let g = sample_factor_graph(&cfg.model()?, *n, cfg.seed()?)?;
            to_value(&g)
        }
        Operation::Exact { graph, n, marginals } => {
            let g = load_graph(cfg, graph, *n)?;
            let table = GibbsTable::new(&g)?;
            let mut out = json!({ "n": g.n, "log_z": table.log_z, "value": table.log_z / g.n.max(1) as f64 });
            if *marginals {
                out["marginals"] = json!(table.all_marginals());
            }
            Ok(out)
        }
        Operation::Bp { graph, n, damping, tol, max_iters } => {
            let g = load_graph(cfg, graph, *n)?;
            let r = bp_run(&g, &BpConfig { damping: *damping, tol: *tol, max_iters: *max_iters })?;
            let log_z = bethe_log_z(&g, &r.messages);
            Ok(json!({
                "converged": r.converged,
                "iterations": r.iterations,
                "residual": r.residual,
                "bethe_log_z": log_z,
                "marginals": r.marginals,
            }))
        }
        Operation::Popdyn { pop_size, sweeps, jitter } => {
            let spec = cfg.model()?;
            let seed = cfg.seed()?;
            let init = match jitter {
                Some(j) => Population::jittered(spec.q(), *pop_size, *j, derive_seed(seed, "cli_jitter", 0))?,
                None => Population::uniform(spec.q(), *pop_size),
            };
            let pop = population_dynamics(&spec, &init, *sweeps, seed)?;
            Ok(json!({ "mean": pop.mean(), "population": to_value(&pop)? }))
        }
        Operation::Bethe { form, samples, pop_size, sweeps, population } => {
            let spec = cfg.model()?;
            let seed = cfg.seed()?;
            let pop = boundary(&spec, population, *pop_size, *sweeps, seed)?;
            let est = match form {
                BetheForm::Tree => bethe_free_energy(&spec, &pop, *samples, seed)?,
                BetheForm::Poissonized => poissonized_bethe(&spec, &pop, *samples, seed)?,
            };
            to_value(&est)
        }
        Operation::Ass { n_max, seeds_per_n } => {
            let incs = ass_increments(&cfg.model()?, *n_max, *seeds_per_n, cfg.seed()?)?;
            // Σ_{h<n_max} increments / n_max telescopes to (1/n_max) E ln Z_{n_max}
            let h = incs.len().max(1) as f64;
            let value = incs.iter().map(|i| i.increment.value).sum::<f64>() / h;
            let se = incs.iter().map(|i| i.increment.std_error.powi(2)).sum::<f64>().sqrt() / h;
            Ok(json!({ "value": value, "se": se, "increments": to_value(&incs)? }))
        }
        Operation::Fexact { n, seeds } => {
            let seed = cfg.seed()?;
            let seeds: Vec<u64> = (0..*seeds as u64).map(|i| derive_seed(seed, "fexact", i)).collect();
            to_value(&free_energy_exact(&cfg.model()?, *n, &seeds)?)
        }
        Operation::Cutdist { mu, nu, mode, metric, rounds } => {
            let mu = load_measure(mu, "operation.mu")?;
            let nu = load_measure(nu, "operation.nu")?;
            match (metric, mode) {
                (Metric::Strong, Mode::Exact) => to_value(&strong_cut_distance(&mu, &nu, DistanceMode::Exact)?),
                (Metric::Strong, Mode::Heuristic) => {
                    let opts = HeuristicOptions { seed: cfg.seed()?, rounds: *rounds, ..Default::default() };
                    to_value(&strong_cut_distance_heuristic(&mu, &nu, &opts)?)
                }
                (Metric::Weak, Mode::Exact) => to_value(&weak_cut_distance(&mu, &nu, DistanceMode::Exact)?),
                (Metric::Weak, Mode::Heuristic) => to_value(&weak_cut_distance(&mu, &nu, DistanceMode::Heuristic)?),
            }
        }
        Operation::Regularity { measure, eps, budget } => {
            let m = measure.parse("operation.measure", DiscreteMeasure::from_json)?;
            let seed = cfg.seed()?;
            let v0 = CoordinatePartition::trivial(m.n());
            let s0 = ConfigPartition::trivial(m.len());
            let d = regularity_decomposition(&m, *eps, &v0, &s0, *budget, seed)?;
            let dist = conditional_distance(&m, &d.v, &d.s, derive_seed(seed, "cli_conditional", 0))?;
            Ok(json!({ "decomposition": to_value(&d)?, "conditional_distance": to_value(&dist)? }))
        }
        Operation::Diagnose { which, n, graph_seeds, ell, k, samples, tree_samples, root, code, population, graph } => {
            diagnose(cfg, *which, *n, *graph_seeds, *ell, *k, *samples, *tree_samples, *root, code, population, graph)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    cfg: &ExperimentConfig,
    which: Diagnostic,
    n: Option<usize>,
    graph_seeds: usize,
    ell: usize,
    k: Option<usize>,
    samples: usize,
    tree_samples: usize,
    root: usize,
    code: &Option<String>,
    population: &Option<Source>,
    graph: &Option<Source>,
) -> Result<Value> {
    let need_n = || n.ok_or_else(|| CliError::invalid("operation.n", "this diagnostic needs a graph size `n`"));
    // A single graph file is evaluated directly; otherwise average over sampled graphs.
    let on_graphs = |f: &(dyn Fn(&FactorGraph, u64) -> cavity::Result<cavity::diagnostics::DiagnosticResult> + Sync)| -> Result<Value> {
        match graph {
            Some(src) => {
                let g = src.parse("operation.graph", FactorGraph::from_json)?;
                let seed = cfg.seed.unwrap_or(0);
                to_value(&f(&g, seed)?)
            }
            None => to_value(&over_graph_seeds(&cfg.model()?, need_n()?, graph_seeds, cfg.seed()?, f)?),
        }
    };
    match which {
        Diagnostic::Factorization => {
            let k = k.unwrap_or(2);
            on_graphs(&|g, s| factorization_statistic(g, k, samples, s))
        }
        Diagnostic::Nonrec => on_graphs(&|g, s| nonreconstruction_statistic(g, root, ell, samples, s)),
        Diagnostic::Cavity => on_graphs(&|g, _| cavity_consistency(g)),
        Diagnostic::Census => match graph {
            Some(src) => {
                let g = src.parse("operation.graph", FactorGraph::from_json)?;
                let census = local_census(&g, ell)?;
                Ok(serde_json::from_str(&census.to_json()?).map_err(cavity::Error::from)?)
            }
            None => to_value(&census_distance(&cfg.model()?, need_n()?, ell, graph_seeds, tree_samples, cfg.seed()?)?),
        },
        Diagnostic::Bpdist => {
            let hex = code.as_ref().ok_or_else(|| CliError::invalid("operation.code", "bpdist needs a hex canonical code"))?;
            let code = CanonicalCode::from_hex(hex).map_err(|e| CliError::invalid("operation.code", e.to_string()))?;
            let spec = cfg.model()?;
            let pop = boundary(&spec, population, default_pop_size(), default_sweeps(), cfg.seed()?)?;
            on_graphs(&|g, _| bp_empirical_distance(g, &code, ell, &pop))
        }
    }
}
