//! Spin alphabets, weight functions, factor graphs and discrete measures.

use crate::error::{Error, Result};
use crate::json::f64_strings;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// The finite spin set `Ω`; a symbol's position is its spin index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct SpinAlphabet {
    symbols: Vec<String>,
}

impl SpinAlphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol `{s}`")));
            }
        }
        Ok(SpinAlphabet { symbols })
    }

    /// `{-1, +1}` with `-1` at index 0.
    pub fn ising() -> Self {
        SpinAlphabet { symbols: vec!["-1".into(), "+1".into()] }
    }

    /// `{0, 1, ..., q-1}`.
    pub fn numbered(q: usize) -> Result<Self> {
        Self::new((0..q).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

impl TryFrom<Vec<String>> for SpinAlphabet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        SpinAlphabet::new(v)
    }
}

impl From<SpinAlphabet> for Vec<String> {
    fn from(a: SpinAlphabet) -> Self {
        a.symbols
    }
}

/// A strictly positive weight function `ψ: Ω^k → (0, ∞)`.
///
/// `table` is indexed lexicographically by the spin tuple, first coordinate
/// most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub name: String,
    pub arity: usize,
    #[serde(with = "f64_strings")]
    pub table: Vec<f64>,
}

impl WeightFunction {
    pub fn new(name: impl Into<String>, arity: usize, table: Vec<f64>, q: usize) -> Result<Self> {
        let wf = WeightFunction { name: name.into(), arity, table };
        wf.validate(q)?;
        Ok(wf)
    }

    /// Tabulates `f` over `Ω^arity` in lexicographic order.
    pub fn from_fn(
        name: impl Into<String>,
        arity: usize,
        q: usize,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(q.pow(arity as u32));
        let mut tuple = vec![0usize; arity];
        for idx in 0..q.pow(arity as u32) {
            decode_index(idx, q, &mut tuple);
            table.push(f(&tuple));
        }
        Self::new(name, arity, table, q)
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidWeightFunction { name: self.name.clone(), reason };
        if self.arity == 0 {
            return Err(bad("arity must be at least 1".into()));
        }
        let expected = (q as u128).checked_pow(self.arity as u32).filter(|&e| e <= usize::MAX as u128);
        match expected {
            Some(e) if e as usize == self.table.len() => {}
            _ => {
                return Err(bad(format!(
                    "table has {} entries, expected |Ω|^arity = {}^{}",
                    self.table.len(),
                    q,
                    self.arity
                )))
            }
        }
        if let Some((i, v)) = self.table.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(bad(format!("table entry {i} = {v} is not strictly positive and finite")));
        }
        Ok(())
    }

    /// Number of spins, recovered from the table length.
    pub fn alphabet_size(&self) -> usize {
        let len = self.table.len() as f64;
        let q = len.powf(1.0 / self.arity as f64).round() as usize;
        debug_assert_eq!(q.pow(self.arity as u32), self.table.len());
        q
    }

    pub fn value(&self, spins: &[usize], q: usize) -> f64 {
        self.table[encode_index(spins, q)]
    }

    pub fn is_constant_one(&self) -> bool {
        self.table.iter().all(|&v| v == 1.0)
    }
}

/// Lexicographic index of `spins` in `Ω^len`, first coordinate most significant.
pub fn encode_index(spins: &[usize], q: usize) -> usize {
    spins.iter().fold(0, |acc, &s| acc * q + s)
}

/// Inverse of [`encode_index`], writing into `out`.
pub fn decode_index(mut idx: usize, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
}

/// One constraint node: a weight function id and its ordered neighbour tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub wf: usize,
    pub neighbors: Vec<usize>,
}

/// A finite factor graph with variables `0..n`.
///
/// Neighbour tuples are ordered and may repeat a variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFactorGraph")]
pub struct FactorGraph {
    pub alphabet: SpinAlphabet,
    pub weight_functions: Vec<WeightFunction>,
    pub constraints: Vec<Constraint>,
    pub n: usize,
}

#[derive(Deserialize)]
struct RawFactorGraph {
    alphabet: SpinAlphabet,
    weight_functions: Vec<WeightFunction>,
    constraints: Vec<Constraint>,
    n: usize,
}

impl TryFrom<RawFactorGraph> for FactorGraph {
    type Error = Error;
    fn try_from(r: RawFactorGraph) -> Result<Self> {
        FactorGraph::new(r.alphabet, r.weight_functions, r.constraints, r.n)
    }
}

impl FactorGraph {
    pub fn new(
        alphabet: SpinAlphabet,
        weight_functions: Vec<WeightFunction>,
        constraints: Vec<Constraint>,
        n: usize,
    ) -> Result<Self> {
        let g = FactorGraph { alphabet, weight_functions, constraints, n };
        g.validate()?;
        Ok(g)
    }

    /// `n` isolated variables.
    pub fn empty(alphabet: SpinAlphabet, n: usize) -> Self {
        FactorGraph { alphabet, weight_functions: Vec::new(), constraints: Vec::new(), n }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q();
        for wf in &self.weight_functions {
            wf.validate(q)?;
        }
        for (a, c) in self.constraints.iter().enumerate() {
            let wf = self.weight_functions.get(c.wf).ok_or_else(|| {
                Error::InvalidGraph(format!("constraints[{a}].wf = {} does not name a weight function", c.wf))
            })?;
            if c.neighbors.len() != wf.arity {
                return Err(Error::InvalidGraph(format!(
                    "constraints[{a}].neighbors has length {}, weight function `{}` has arity {}",
                    c.neighbors.len(),
                    wf.name,
                    wf.arity
                )));
            }
            if let Some(&v) = c.neighbors.iter().find(|&&v| v >= self.n) {
                return Err(Error::InvalidGraph(format!("constraints[{a}].neighbors contains {v} >= n = {}", self.n)));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.alphabet.len()
    }

    pub fn arity(&self, a: usize) -> usize {
        self.constraints[a].neighbors.len()
    }

    pub fn weight_of(&self, a: usize) -> &WeightFunction {
        &self.weight_functions[self.constraints[a].wf]
    }

    /// Adds a weight function and returns its id.
    pub fn add_weight_function(&mut self, wf: WeightFunction) -> Result<usize> {
        wf.validate(self.q())?;
        self.weight_functions.push(wf);
        Ok(self.weight_functions.len() - 1)
    }

    pub fn add_constraint(&mut self, wf: usize, neighbors: Vec<usize>) -> Result<usize> {
        self.constraints.push(Constraint { wf, neighbors });
        if let Err(e) = self.validate() {
            self.constraints.pop();
            return Err(e);
        }
        Ok(self.constraints.len() - 1)
    }

    /// For every variable, its incident `(constraint, slot)` pairs in constraint order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (a, c) in self.constraints.iter().enumerate() {
            for (j, &v) in c.neighbors.iter().enumerate() {
                adj[v].push((a, j));
            }
        }
        adj
    }

    /// `ln ∏_a ψ_a(σ(∂a))`.
    pub fn log_weight(&self, sigma: &[usize]) -> f64 {
        let q = self.q();
        self.constraints
            .iter()
            .map(|c| {
                let idx = c.neighbors.iter().fold(0, |acc, &v| acc * q + sigma[v]);
                self.weight_functions[c.wf].table[idx].ln()
            })
            .sum()
    }

    /// True when the bipartite graph has no cycles (repeated neighbours count as cycles).
    pub fn is_forest(&self) -> bool {
        // union-find over variables + constraints
        let total = self.n + self.constraints.len();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, c) in self.constraints.iter().enumerate() {
            for &v in &c.neighbors {
                let (ra, rv) = (find(&mut parent, self.n + a), find(&mut parent, v));
                if ra == rv {
                    return false;
                }
                parent[ra] = rv;
            }
        }
        true
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_17(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A full spin assignment `σ: V → Ω` as spin indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// `∏_{a ∈ F_G} ψ_a(σ(∂_G a))`.
pub fn gibbs_weight(g: &FactorGraph, sigma: &Assignment) -> Result<f64> {
    if sigma.len() != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, got: sigma.len() });
    }
    if let Some(&s) = sigma.0.iter().find(|&&s| s >= g.q()) {
        return Err(Error::InvalidParameter(format!("spin index {s} outside alphabet of size {}", g.q())));
    }
    let q = g.q();
    Ok(g.constraints
        .iter()
        .map(|c| {
            let idx = c.neighbors.iter().fold(0, |acc, &v| acc * q + sigma.0[v]);
            g.weight_functions[c.wf].table[idx]
        })
        .product())
}

/// A finitely supported probability measure on `Ω^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    n: usize,
    q: usize,
    support: Vec<(Assignment, f64)>,
}

/// Atom record in measure JSON: either a discrete configuration (`values`) or a
/// step function (`stepfn`, one probability vector per coordinate).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomRecord {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stepfn: Option<Vec<Vec<f64>>>,
}

/// Measure JSON: `{n, alphabet, atoms: [{weight, values | stepfn}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawMeasure {
    pub n: usize,
    pub alphabet: SpinAlphabet,
    pub atoms: Vec<AtomRecord>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: RawMeasure) -> Result<Self> {
        let mut support = Vec::with_capacity(r.atoms.len());
        for (i, a) in r.atoms.into_iter().enumerate() {
            let values = a.values.ok_or_else(|| {
                Error::InvalidMeasure(format!("atoms[{i}].values is required for a discrete measure"))
            })?;
            support.push((Assignment(values), a.weight));
        }
        DiscreteMeasure::new(r.n, r.alphabet.len(), support)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            n: m.n,
            alphabet: SpinAlphabet::numbered(m.q).expect("q >= 1"),
            atoms: m
                .support
                .into_iter()
                .map(|(s, w)| AtomRecord { weight: w, values: Some(s.0), stepfn: None })
                .collect(),
        }
    }
}

impl DiscreteMeasure {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(n: usize, q: usize, support: Vec<(Assignment, f64)>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidMeasure("alphabet size must be positive".into()));
        }
        if support.is_empty() {
            return Err(Error::InvalidMeasure("support must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        let mut total = 0.0;
        for (i, (s, p)) in support.iter().enumerate() {
            if s.len() != n {
                return Err(Error::InvalidMeasure(format!("atoms[{i}] has length {}, expected {n}", s.len())));
            }
            if s.0.iter().any(|&v| v >= q) {
                return Err(Error::InvalidMeasure(format!("atoms[{i}] has a spin outside 0..{q}")));
            }
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::InvalidMeasure(format!("atoms[{i}].weight = {p} is not positive")));
            }
            if !seen.insert(s.clone()) {
                return Err(Error::InvalidMeasure(format!("atoms[{i}] repeats a configuration")));
            }
            total += p;
        }
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { n, q, support })
    }

    /// Normalises non-negative weights, dropping zero entries.
    pub fn from_weights(n: usize, q: usize, atoms: Vec<(Assignment, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total weight must be positive".into()));
        }
        let support = atoms.into_iter().filter(|(_, w)| *w > 0.0).map(|(s, w)| (s, w / total)).collect();
        Self::new(n, q, support)
    }

    pub fn point_mass(q: usize, sigma: Assignment) -> Result<Self> {
        Self::new(sigma.len(), q, vec![(sigma, 1.0)])
    }

    /// The product measure `⊗_x p_x` with `p_x` given per coordinate.
    pub fn product_of(q: usize, marginals: &[Vec<f64>]) -> Result<Self> {
        let n = marginals.len();
        let states = (q as u128).checked_pow(n as u32).filter(|&s| s <= 1 << 24).ok_or_else(|| {
            Error::SizeCap(format!("product measure with {q}^{n} atoms"))
        })? as usize;
        let mut support = Vec::new();
        let mut sigma = vec![0usize; n];
        for idx in 0..states {
            decode_index(idx, q, &mut sigma);
            let p: f64 = sigma.iter().zip(marginals).map(|(&s, m)| m[s]).product();
            if p > 0.0 {
                support.push((Assignment(sigma.clone()), p));
            }
        }
        Self::from_weights(n, q, support)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn support(&self) -> &[(Assignment, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Single-coordinate marginal of coordinate `x`.
    pub fn marginal(&self, x: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.q];
        for (s, p) in &self.support {
            m[s.0[x]] += p;
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_17(&RawMeasure::from(self.clone()))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ising_edge(beta: f64) -> FactorGraph {
        let wf = WeightFunction::from_fn("ising", 2, 2, |s| {
            let (a, b) = (2.0 * s[0] as f64 - 1.0, 2.0 * s[1] as f64 - 1.0);
            (beta * a * b).exp()
        })
        .unwrap();
        FactorGraph::new(SpinAlphabet::ising(), vec![wf], vec![Constraint { wf: 0, neighbors: vec![0, 1] }], 2)
            .unwrap()
    }

    #[test]
    fn empty_product_is_one() {
        let g = FactorGraph::empty(SpinAlphabet::ising(), 3);
        assert_eq!(gibbs_weight(&g, &Assignment(vec![0, 1, 0])).unwrap(), 1.0);
    }

    #[test]
    fn ising_edge_weight() {
        let g = ising_edge(0.5);
        let w = gibbs_weight(&g, &Assignment(vec![1, 1])).unwrap();
        assert!((w - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn violated_ksat_clause_weight() {
        // c = (+,+,+): violated iff every literal is -1
        let beta: f64 = 1.0;
        let wf = WeightFunction::from_fn("c+++", 3, 2, |s| if s.iter().all(|&x| x == 0) { (-beta).exp() } else { 1.0 })
            .unwrap();
        let g = FactorGraph::new(SpinAlphabet::ising(), vec![wf], vec![Constraint { wf: 0, neighbors: vec![0, 1, 2] }], 3)
            .unwrap();
        let w = gibbs_weight(&g, &Assignment(vec![0, 0, 0])).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = ising_edge(0.5);
        assert!(matches!(gibbs_weight(&g, &Assignment(vec![0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_positive_tables_and_bad_neighbors() {
        assert!(WeightFunction::new("z", 1, vec![1.0, 0.0], 2).is_err());
        assert!(WeightFunction::new("short", 2, vec![1.0; 3], 2).is_err());
        let wf = WeightFunction::new("one", 1, vec![1.0, 1.0], 2).unwrap();
        let bad = FactorGraph::new(SpinAlphabet::ising(), vec![wf], vec![Constraint { wf: 0, neighbors: vec![5] }], 2);
        assert!(bad.is_err());
        assert!(SpinAlphabet::new(["a", "a"]).is_err());
        assert!(SpinAlphabet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let g = ising_edge(0.1234567890123);
        let s = g.to_json().unwrap();
        let back = FactorGraph::from_json(&s).unwrap();
        for (a, b) in g.weight_functions[0].table.iter().zip(&back.weight_functions[0].table) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(g, back);
    }

    #[test]
    fn malformed_json_names_the_field() {
        let s = r#"{"alphabet":["-1","+1"],"weight_functions":[{"name":"w","arity":2,"table":["1","1","1"]}],"constraints":[],"n":1}"#;
        let err = FactorGraph::from_json(s).unwrap_err().to_string();
        assert!(err.contains("table"), "{err}");
    }

    #[test]
    fn forest_detection() {
        let g = ising_edge(0.1);
        assert!(g.is_forest());
        let mut loopy = g.clone();
        loopy.add_constraint(0, vec![0, 1]).unwrap();
        assert!(!loopy.is_forest());
        let mut selfloop = g;
        selfloop.add_constraint(0, vec![1, 1]).unwrap();
        assert!(!selfloop.is_forest());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(1, 2, vec![(Assignment(vec![0]), 0.5), (Assignment(vec![0]), 0.5)]).is_err());
        assert!(DiscreteMeasure::new(1, 2, vec![(Assignment(vec![0]), 0.4)]).is_err());
        let m = DiscreteMeasure::product_of(2, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        assert_eq!(m.len(), 4);
        assert!((m.marginal(1)[1] - 0.75).abs() < 1e-15);
        let back = DiscreteMeasure::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
