use cavity_cli::{overlay, read_json, run, sweep, to_csv, to_json, write_atomic, CliError, ExperimentConfig, Merge, Result, RunRecord, SweepConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;

/// Reproducible experiments on random factor graphs.
///
/// Every subcommand accepts a JSON config via --config; flags given on the
/// command line override the corresponding fields of that file.
#[derive(Parser)]
#[command(name = "cavity", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config file (an experiment, or a sweep for `sweep`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required by every stochastic operation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path, written atomically; stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit the results payload flattened to `path,value` CSV rows.
    #[arg(long, global = true)]
    csv: bool,
    /// Model spec JSON file.
    #[arg(long, global = true, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// Model preset, e.g. `ising:beta=0.2,density=1`.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random factor graph G(n).
    Gen(GenArgs),
    /// Exact partition function and marginals by enumeration.
    Exact(GraphArgs),
    /// Belief Propagation on a graph.
    Bp(BpArgs),
    /// Population dynamics for the distributional fixed point.
    Popdyn(PopdynArgs),
    /// Bethe free energy from a fixed-point population.
    Bethe(BetheArgs),
    /// Aizenman-Simms-Starr increments and their telescoped average.
    Ass(AssArgs),
    /// Exact free energy per variable averaged over random graphs.
    Fexact(FexactArgs),
    /// Strong or weak cut distance between two measures.
    Cutdist(CutdistArgs),
    /// Regularity decomposition of a discrete measure.
    Regularity(RegularityArgs),
    /// Replica-symmetry and local-structure diagnostics.
    Diagnose(DiagnoseArgs),
    /// Run many configurations of one operation and merge the payloads.
    Sweep(SweepArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Graph JSON file; otherwise G(n) is sampled from the model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Include all single-variable marginals.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    marginals: bool,
}

#[derive(Args, Serialize)]
struct BpArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
}

#[derive(Args, Serialize)]
struct PopdynArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pop_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweeps: Option<usize>,
    /// Start from a jittered population of this strength.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    jitter: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Form {
    Tree,
    Poissonized,
}

#[derive(Args, Serialize)]
struct BetheArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<Form>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pop_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweeps: Option<usize>,
    /// Precomputed population JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    population: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AssArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds_per_n: Option<usize>,
}

#[derive(Args, Serialize)]
struct FexactArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Number of graphs to average over.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Metric {
    Strong,
    Weak,
}

#[derive(Args, Serialize)]
struct CutdistArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<Metric>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<usize>,
}

#[derive(Args, Serialize)]
struct RegularityArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Which {
    Factorization,
    Nonrec,
    Census,
    Bpdist,
    Cavity,
}

#[derive(Args, Serialize)]
struct DiagnoseArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    which: Option<Which>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_seeds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ell: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tree_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    root: Option<usize>,
    /// Hex canonical code of a neighbourhood class (bpdist).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    code: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    population: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeArg {
    Mean,
    Concat,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    merge: Option<MergeArg>,
}

fn flags<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("flag structs serialize to JSON")
}

impl Command {
    /// The operation name and its flag overrides as a JSON object.
    fn operation(&self) -> Option<(&'static str, Value)> {
        Some(match self {
            Command::Gen(a) => ("gen", flags(a)),
            Command::Exact(a) => ("exact", flags(a)),
            Command::Bp(a) => ("bp", flags(a)),
            Command::Popdyn(a) => ("popdyn", flags(a)),
            Command::Bethe(a) => ("bethe", flags(a)),
            Command::Ass(a) => ("ass", flags(a)),
            Command::Fexact(a) => ("fexact", flags(a)),
            Command::Cutdist(a) => ("cutdist", flags(a)),
            Command::Regularity(a) => ("regularity", flags(a)),
            Command::Diagnose(a) => ("diagnose", flags(a)),
            Command::Sweep(_) => return None,
        })
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Value> {
    match path {
        Some(p) => read_json(p, "config"),
        None => Ok(Value::Object(Map::new())),
    }
}

fn global_overrides(g: &Global) -> Value {
    let mut o = Map::new();
    if let Some(s) = g.seed {
        o.insert("seed".into(), json!(s));
    }
    if let Some(t) = g.threads {
        o.insert("threads".into(), json!(t));
    }
    if let Some(p) = &g.out {
        o.insert("out".into(), json!(p));
    }
    if let Some(p) = &g.model {
        o.insert("model".into(), json!({ "file": p }));
    }
    if let Some(p) = &g.preset {
        o.insert("model".into(), json!({ "preset": p }));
    }
    Value::Object(o)
}

fn execute(cli: &Cli) -> Result<(RunRecord, Option<PathBuf>)> {
    let mut doc = load_config(&cli.global.config)?;
    match cli.command.operation() {
        Some((name, flags)) => {
            if let Some(op) = doc.pointer("/operation/op").and_then(Value::as_str) {
                if op != name {
                    return Err(CliError::invalid("operation.op", format!("config runs `{op}` but the subcommand is `{name}`")));
                }
            }
            // a different model source on the command line replaces the file's wholesale
            if cli.global.model.is_some() || cli.global.preset.is_some() {
                if let Some(m) = doc.as_object_mut() {
                    m.remove("model");
                }
            }
            overlay(&mut doc, global_overrides(&cli.global));
            let mut op = json!({ "op": name });
            overlay(&mut op, flags);
            overlay(&mut doc, json!({ "operation": op }));
            let config = ExperimentConfig::from_value(doc)?;
            let record = run(&config)?;
            Ok((record, config.out))
        }
        None => {
            let Command::Sweep(args) = &cli.command else { unreachable!() };
            let mut s = SweepConfig::from_value(doc)?;
            if let Some(m) = args.merge {
                s.merge = match m {
                    MergeArg::Mean => Merge::Mean,
                    MergeArg::Concat => Merge::Concat,
                };
            }
            if let Some(seed) = cli.global.seed {
                // a base config takes the master seed unless the sweep lists its own
                if let (Some(base), true) = (&mut s.base, s.seeds.is_empty()) {
                    base.seed = Some(seed);
                }
            }
            let out = cli.global.out.clone().or(s.out.clone());
            let threads = cli.global.threads.or(s.threads);
            Ok((sweep(&s.expand(), s.merge, threads)?, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|(record, out)| {
        let text = if cli.global.csv { to_csv(&record.results)? } else { to_json(&record)? + "\n" };
        match out {
            Some(p) => write_atomic(&p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.payload());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
