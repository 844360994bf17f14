//! The Poisson random factor graph model and named model presets.

use crate::error::{Error, Result};
use crate::model::{Constraint, FactorGraph, SpinAlphabet, WeightFunction};
use crate::rng::substream;
use crate::stats::poisson;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One constraint family: a weight function and its per-variable rate `ρ_ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub wf: WeightFunction,
    pub rho: f64,
}

/// A model `(Ψ, ρ)`: the spin alphabet and the constraint families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ModelSpec {
    pub alphabet: SpinAlphabet,
    pub families: Vec<Family>,
}

#[derive(Deserialize)]
struct RawSpec {
    alphabet: SpinAlphabet,
    families: Vec<Family>,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        ModelSpec::new(r.alphabet, r.families)
    }
}

impl ModelSpec {
    pub fn new(alphabet: SpinAlphabet, families: Vec<Family>) -> Result<Self> {
        let spec = ModelSpec { alphabet, families };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidSpec("families must contain at least one entry".into()));
        }
        for (i, f) in self.families.iter().enumerate() {
            f.wf.validate(self.q())?;
            if !(f.rho.is_finite() && f.rho >= 0.0) {
                return Err(Error::InvalidSpec(format!("families[{i}].rho = {} must be a finite non-negative rate", f.rho)));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.alphabet.len()
    }

    pub fn weight_functions(&self) -> Vec<WeightFunction> {
        self.families.iter().map(|f| f.wf.clone()).collect()
    }

    /// Same weight functions with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let families = self.families.iter().map(|f| Family { wf: f.wf.clone(), rho: f.rho * factor }).collect();
        ModelSpec::new(self.alphabet.clone(), families)
    }

    /// True when every weight function is identically one.
    pub fn is_trivial(&self) -> bool {
        self.families.iter().all(|f| f.wf.is_constant_one())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_17(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A neighbour tuple drawn uniformly from `V_n^k` (with replacement).
pub fn uniform_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|_| rng.gen_range(0..n)).collect()
}

/// Samples `G_n(Ψ, ρ)`: `m_ψ ~ Po(nρ_ψ)` constraints per family, each with a
/// uniform ordered neighbour tuple. Weight-function ids follow family order.
pub fn sample_factor_graph(spec: &ModelSpec, n: usize, seed: u64) -> Result<FactorGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = substream(seed, "factor_graph", n as u64);
    let mut constraints = Vec::new();
    for (wf, fam) in spec.families.iter().enumerate() {
        let m = poisson(&mut rng, n as f64 * fam.rho);
        for _ in 0..m {
            constraints.push(Constraint { wf, neighbors: uniform_tuple(&mut rng, n, fam.wf.arity) });
        }
    }
    Ok(FactorGraph { alphabet: spec.alphabet.clone(), weight_functions: spec.weight_functions(), constraints, n })
}

fn sign_label(c: &[bool]) -> String {
    c.iter().map(|&p| if p { '+' } else { '-' }).collect()
}

/// Random k-SAT at inverse temperature `beta`: one family per sign vector
/// `c ∈ {±1}^k`, penalising by `e^{-β}` the unique tuple with `x_i = -c_i` for
/// all `i`. Each family has rate `density / 2^k`.
pub fn preset_ksat(k: usize, beta: f64, density: f64) -> Result<ModelSpec> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > 16 {
        return Err(Error::InvalidParameter(format!("k = {k} is too large for dense tables")));
    }
    let patterns = 1usize << k;
    let mut families = Vec::with_capacity(patterns);
    for pat in 0..patterns {
        // bit k-1-i of pat is the sign of literal i, first literal most significant
        let c: Vec<bool> = (0..k).map(|i| (pat >> (k - 1 - i)) & 1 == 1).collect();
        let wf = WeightFunction::from_fn(format!("ksat[{}]", sign_label(&c)), k, 2, |x| {
            let violated = x.iter().zip(&c).all(|(&xi, &ci)| (xi == 1) != ci);
            if violated {
                (-beta).exp()
            } else {
                1.0
            }
        })?;
        families.push(Family { wf, rho: density / patterns as f64 });
    }
    ModelSpec::new(SpinAlphabet::ising(), families)
}

fn ising_weight(beta: f64) -> Result<WeightFunction> {
    WeightFunction::from_fn("ising", 2, 2, |s| {
        let (a, b) = (2.0 * s[0] as f64 - 1.0, 2.0 * s[1] as f64 - 1.0);
        (beta * a * b).exp()
    })
}

/// The Ising model `ψ(x, y) = exp(βxy)` with edge rate `density` per variable.
pub fn preset_ising(beta: f64, density: f64) -> Result<ModelSpec> {
    ModelSpec::new(SpinAlphabet::ising(), vec![Family { wf: ising_weight(beta)?, rho: density }])
}

/// Ising weights at unit rate.
pub fn preset_ising_pairwise(beta: f64) -> ModelSpec {
    preset_ising(beta, 1.0).expect("finite beta yields a valid Ising table")
}

/// The Ising model on the `side × side` box of `Z²`; variable `(r, c)` has id `r·side + c`.
pub fn preset_ising_grid(side: usize, beta: f64) -> Result<FactorGraph> {
    if side == 0 {
        return Err(Error::InvalidParameter("side must be at least 1".into()));
    }
    let mut constraints = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                constraints.push(Constraint { wf: 0, neighbors: vec![v, v + 1] });
            }
            if r + 1 < side {
                constraints.push(Constraint { wf: 0, neighbors: vec![v, v + side] });
            }
        }
    }
    FactorGraph::new(SpinAlphabet::ising(), vec![ising_weight(beta)?], constraints, side * side)
}

/// All-ones weights of arity `k` on `q` spins.
pub fn preset_trivial(q: usize, k: usize, density: f64) -> Result<ModelSpec> {
    let alphabet = SpinAlphabet::numbered(q)?;
    let wf = WeightFunction::new("one", k, vec![1.0; q.pow(k as u32)], q)?;
    ModelSpec::new(alphabet, vec![Family { wf, rho: density }])
}

/// Parses `name:key=value,...`, e.g. `ksat:k=3,beta=1.0,density=2.5`,
/// `ising:beta=0.2,density=1` or `trivial:q=2,k=2,density=1`.
pub fn parse_preset(s: &str) -> Result<ModelSpec> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let mut kv = std::collections::BTreeMap::new();
    for part in args.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidSpec(format!("preset argument `{part}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("preset argument `{}` is not a number", k.trim())))?;
        kv.insert(k.trim().to_string(), v);
    }
    let get = |key: &str, default: Option<f64>| -> Result<f64> {
        kv.get(key).copied().or(default).ok_or_else(|| Error::InvalidSpec(format!("preset `{name}` needs `{key}`")))
    };
    let int = |key: &str, default: Option<f64>| -> Result<usize> {
        let v = get(key, default)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidSpec(format!("preset argument `{key}` must be a non-negative integer")));
        }
        Ok(v as usize)
    };
    let allowed: &[&str] = match name {
        "ksat" => &["k", "beta", "density"],
        "ising" => &["beta", "density"],
        "trivial" => &["q", "k", "density"],
        _ => return Err(Error::InvalidSpec(format!("unknown preset `{name}`"))),
    };
    if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidSpec(format!("preset `{name}` has no argument `{k}`")));
    }
    match name {
        "ksat" => preset_ksat(int("k", None)?, get("beta", None)?, get("density", None)?),
        "ising" => preset_ising(get("beta", None)?, get("density", Some(1.0))?),
        _ => preset_trivial(int("q", Some(2.0))?, int("k", Some(2.0))?, get("density", Some(1.0))?),
    }
}
