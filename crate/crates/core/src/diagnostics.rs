//! Finite-size statistics for the limit theorems about random factor graphs.
//!
//! Each diagnostic is computed on a single graph from exact enumeration.
//! [`over_graph_seeds`] averages any of them over independent graph draws and
//! attaches the standard error of the mean.

use crate::bp::{tv, SimplexPoint};
use crate::error::{Error, Result};
use crate::exact::{remove_variable, GibbsTable};
use crate::model::FactorGraph;
use crate::popdyn::Population;
use crate::random::{sample_factor_graph, uniform_tuple, ModelSpec};
use crate::rng::{derive_seed, substream};
use crate::stats::Estimate;
use crate::transport::wasserstein_d1;
use crate::tree::{canonical_code, neighborhood_with_adjacency, sample_gw_tree, CanonicalCode, Neighborhood};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticResult {
    pub statistic: f64,
    #[serde(rename = "se")]
    pub std_error: f64,
    pub parameters: DiagnosticParameters,
    /// Per-graph values when the statistic is an average over graph seeds.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_seed: Vec<f64>,
}

impl DiagnosticResult {
    fn exact(statistic: f64, parameters: DiagnosticParameters) -> Self {
        DiagnosticResult { statistic, std_error: 0.0, parameters, per_seed: Vec::new() }
    }

    fn from_samples(xs: &[f64], parameters: DiagnosticParameters) -> Self {
        let e = Estimate::from_samples(xs);
        DiagnosticResult { statistic: e.value, std_error: e.std_error, parameters, per_seed: Vec::new() }
    }
}

/// Evaluates `f` on `graph_seeds` independent draws of `G(n)` in parallel and
/// reports the mean, its standard error and the per-graph values.
///
/// Graph `i` is drawn with seed `derive_seed(seed, "diag_graph", i)` and `f`
/// receives `derive_seed(seed, "diag_stat", i)` for its own randomness.
pub fn over_graph_seeds<F>(spec: &ModelSpec, n: usize, graph_seeds: usize, seed: u64, f: F) -> Result<DiagnosticResult>
where
    F: Fn(&FactorGraph, u64) -> Result<DiagnosticResult> + Sync,
{
    if graph_seeds == 0 {
        return Err(Error::InvalidParameter("graph_seeds must be positive".into()));
    }
    let runs: Vec<DiagnosticResult> = (0..graph_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let g = sample_factor_graph(spec, n, derive_seed(seed, "diag_graph", i))?;
            f(&g, derive_seed(seed, "diag_stat", i))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.statistic).collect();
    let mut out = DiagnosticResult::from_samples(&values, runs[0].parameters.clone());
    out.per_seed = values;
    Ok(out)
}

/// Mean over random `k`-sets of distinct variables of
/// `‖μ_{x1..xk} − μ_{x1} ⊗ … ⊗ μ_{xk}‖_TV`.
pub fn factorization_statistic(g: &FactorGraph, k: usize, tuples: usize, seed: u64) -> Result<DiagnosticResult> {
    let params = DiagnosticParameters { k: Some(k), samples: Some(tuples), ..Default::default() };
    if k == 0 || k > g.n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={}", g.n)));
    }
    if tuples == 0 {
        return Err(Error::InvalidParameter("tuples must be positive".into()));
    }
    if k == 1 || g.constraints.is_empty() {
        return Ok(DiagnosticResult::exact(0.0, params));
    }
    let table = GibbsTable::new(g)?;
    let singles = table.all_marginals();
    let q = g.q();
    let mut rng = substream(seed, "factorization", 0);
    let draws: Vec<Vec<usize>> = (0..tuples).map(|_| distinct_tuple(&mut rng, g.n, k)).collect();
    let values: Vec<f64> = draws
        .par_iter()
        .map(|xs| {
            let joint = table.marginal(xs)?;
            let product: Vec<f64> = (0..joint.len())
                .map(|idx| {
                    let mut r = idx;
                    let mut p = 1.0;
                    for &x in xs.iter().rev() {
                        p *= singles[x][r % q];
                        r /= q;
                    }
                    p
                })
                .collect();
            Ok(tv(&joint, &product))
        })
        .collect::<Result<_>>()?;
    Ok(DiagnosticResult::from_samples(&values, params))
}

fn distinct_tuple<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    loop {
        let t = uniform_tuple(rng, n, k);
        let mut sorted = t.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() == k {
            return t;
        }
    }
}

/// Number of variable-to-variable hops from `root`; `None` if unreachable.
fn variable_hops(g: &FactorGraph, adj: &[Vec<(usize, usize)>], root: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n];
    dist[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &(a, _) in &adj[v] {
            for &y in &g.constraints[a].neighbors {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
    }
    dist
}

/// `E_τ ‖μ(σ_root ∈ · | σ_B = τ) − μ_root‖_TV` with `τ` the restriction of an
/// exact Gibbs sample to the boundary `B`: every variable at factor-graph
/// distance greater than `2ℓ` from the root, unreachable ones included.
pub fn nonreconstruction_statistic(
    g: &FactorGraph,
    root: usize,
    ell: usize,
    samples: usize,
    seed: u64,
) -> Result<DiagnosticResult> {
    let params = DiagnosticParameters { ell: Some(ell), samples: Some(samples), ..Default::default() };
    if root >= g.n {
        return Err(Error::UnknownVariable(root));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let adj = g.adjacency();
    let hops = variable_hops(g, &adj, root);
    let boundary: Vec<usize> = (0..g.n).filter(|&v| hops[v].is_none_or(|h| h > ell)).collect();
    if boundary.is_empty() || g.constraints.is_empty() {
        return Ok(DiagnosticResult::exact(0.0, params));
    }
    let table = GibbsTable::new(g)?;
    let q = g.q();
    // one pass groups the joint law of (boundary, root) by boundary configuration
    let key = |idx: usize| boundary.iter().fold(0u64, |acc, &v| acc * q as u64 + table.spin(idx, v) as u64);
    let mut joint: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut root_marginal = vec![0.0; q];
    for (idx, &p) in table.probs.iter().enumerate() {
        let s = table.spin(idx, root);
        joint.entry(key(idx)).or_insert_with(|| vec![0.0; q])[s] += p;
        root_marginal[s] += p;
    }
    let distance: HashMap<u64, f64> = joint
        .into_iter()
        .map(|(k, mut v)| {
            let z: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= z);
            (k, tv(&v, &root_marginal))
        })
        .collect();
    let values: Vec<f64> = table.sample_indices(samples, seed).into_iter().map(|idx| distance[&key(idx)]).collect();
    Ok(DiagnosticResult::from_samples(&values, params))
}

/// A depth-`ℓ` neighbourhood class; every cyclic neighbourhood is one class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CensusClass {
    Tree(CanonicalCode),
    Cyclic,
}

impl CensusClass {
    pub fn label(&self) -> String {
        match self {
            CensusClass::Tree(c) => c.to_hex(),
            CensusClass::Cyclic => "cyclic".into(),
        }
    }
}

/// Neighbourhood counts over the variables of one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Census {
    pub n: usize,
    pub counts: BTreeMap<CensusClass, usize>,
}

impl Census {
    pub fn frequencies(&self) -> BTreeMap<CensusClass, f64> {
        self.counts.iter().map(|(c, &k)| (c.clone(), k as f64 / self.n as f64)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<String, f64> = self.frequencies().into_iter().map(|(c, f)| (c.label(), f)).collect();
        Ok(serde_json::to_string(&map)?)
    }
}

pub fn local_census(g: &FactorGraph, ell: usize) -> Result<Census> {
    let adj = g.adjacency();
    let mut counts = BTreeMap::new();
    for x in 0..g.n {
        let class = match neighborhood_with_adjacency(g, &adj, x, ell)? {
            Neighborhood::Tree(t) => CensusClass::Tree(canonical_code(&t)),
            Neighborhood::Cyclic => CensusClass::Cyclic,
        };
        *counts.entry(class).or_insert(0) += 1;
    }
    Ok(Census { n: g.n, counts })
}

/// Total variation between the census averaged over `graph_seeds` draws of
/// `G(n)` and the empirical law of `tree_samples` depth-`ℓ` Galton–Watson trees.
///
/// The reported standard error is that of the per-graph distances, a rough
/// scale for the Monte Carlo noise rather than a confidence statement.
pub fn census_distance(
    spec: &ModelSpec,
    n: usize,
    ell: usize,
    graph_seeds: usize,
    tree_samples: usize,
    seed: u64,
) -> Result<DiagnosticResult> {
    if graph_seeds == 0 || tree_samples == 0 || n == 0 {
        return Err(Error::InvalidParameter("n, graph_seeds and tree_samples must be positive".into()));
    }
    let censuses: Vec<Census> = (0..graph_seeds as u64)
        .into_par_iter()
        .map(|i| local_census(&sample_factor_graph(spec, n, derive_seed(seed, "census_graph", i))?, ell))
        .collect::<Result<_>>()?;
    let trees: Vec<CensusClass> = (0..tree_samples as u64)
        .into_par_iter()
        .map(|i| CensusClass::Tree(canonical_code(&sample_gw_tree(spec, ell, derive_seed(seed, "census_tree", i)))))
        .collect();
    let mut tree_counts = BTreeMap::new();
    for c in trees {
        *tree_counts.entry(c).or_insert(0) += 1;
    }
    let tree_law = Census { n: tree_samples, counts: tree_counts }.frequencies();
    // every graph has n variables, so the average census is the pooled one
    let mut pooled = Census { n: n * graph_seeds, counts: BTreeMap::new() };
    for c in &censuses {
        for (class, &k) in &c.counts {
            *pooled.counts.entry(class.clone()).or_insert(0) += k;
        }
    }
    let averaged = pooled.frequencies();
    let per_seed: Vec<f64> = censuses.iter().map(|c| law_distance(&c.frequencies(), &tree_law)).collect();
    let params = DiagnosticParameters { ell: Some(ell), samples: Some(tree_samples), ..Default::default() };
    let se = Estimate::from_samples(&per_seed).std_error;
    Ok(DiagnosticResult { statistic: law_distance(&averaged, &tree_law), std_error: se, parameters: params, per_seed })
}

fn law_distance(a: &BTreeMap<CensusClass, f64>, b: &BTreeMap<CensusClass, f64>) -> f64 {
    let mut total = 0.0;
    for (c, &p) in a {
        total += (p - b.get(c).copied().unwrap_or(0.0)).abs();
    }
    for (c, &p) in b {
        if !a.contains_key(c) {
            total += p;
        }
    }
    0.5 * total
}

/// Single-variable Gibbs marginals, exactly uniform when there are no constraints.
fn exact_marginals(g: &FactorGraph) -> Result<Vec<Vec<f64>>> {
    if g.constraints.is_empty() {
        return Ok(vec![vec![1.0 / g.q() as f64; g.q()]; g.n]);
    }
    Ok(GibbsTable::new(g)?.all_marginals())
}

/// `d₁` between the exact marginals of the variables whose depth-`ℓ`
/// neighbourhood has code `code` and a reference population. With no such
/// variable the empirical side is a single uniform point.
pub fn bp_empirical_distance(
    g: &FactorGraph,
    code: &CanonicalCode,
    ell: usize,
    reference: &Population,
) -> Result<DiagnosticResult> {
    let adj = g.adjacency();
    let mut matching = Vec::new();
    for x in 0..g.n {
        if let Neighborhood::Tree(t) = neighborhood_with_adjacency(g, &adj, x, ell)? {
            if &canonical_code(&t) == code {
                matching.push(x);
            }
        }
    }
    let q = g.q();
    let empirical: Vec<SimplexPoint> = if matching.is_empty() {
        vec![SimplexPoint(vec![1.0 / q as f64; q])]
    } else {
        let marginals = exact_marginals(g)?;
        matching.iter().map(|&x| SimplexPoint(marginals[x].clone())).collect()
    };
    let d = wasserstein_d1(&empirical, &reference.points)?;
    let params = DiagnosticParameters { ell: Some(ell), samples: Some(matching.len()), ..Default::default() };
    Ok(DiagnosticResult::exact(d, params))
}

/// `(1/n) Σ_x Σ_ω |μ_x(ω) − ν_x(ω)|` where `ν_x` is the cavity prediction
///
/// `ν_x(ω) ∝ Π_{a ∋ x} Σ_{s: ∂a → Ω, s_x = ω} ψ_a(s) Π_{y ∈ ∂a, y ≠ x} μ_{G−x, y}(s_y)`.
///
/// Repeated occurrences of a variable in a constraint share one spin. The
/// value is zero on forests, where the formula is exact.
pub fn cavity_consistency(g: &FactorGraph) -> Result<DiagnosticResult> {
    let params = DiagnosticParameters::default();
    if g.constraints.is_empty() {
        return Ok(DiagnosticResult::exact(0.0, params));
    }
    let marginals = exact_marginals(g)?;
    let adj = g.adjacency();
    let q = g.q();
    let residuals: Vec<f64> = (0..g.n)
        .into_par_iter()
        .map(|x| {
            let mut around: Vec<usize> = adj[x].iter().map(|&(a, _)| a).collect();
            around.sort_unstable();
            around.dedup();
            let prediction = if around.is_empty() {
                vec![1.0 / q as f64; q]
            } else {
                let (h, map) = remove_variable(g, x)?;
                let cavity = exact_marginals(&h)?;
                let mut num = vec![1.0; q];
                for &a in &around {
                    let factor = constraint_factor(g, a, x, |y| &cavity[map[y].unwrap()]);
                    num.iter_mut().zip(&factor).for_each(|(n, f)| *n *= f);
                }
                let z: f64 = num.iter().sum();
                if z <= 0.0 {
                    return Err(Error::DegenerateProduct);
                }
                num.into_iter().map(|v| v / z).collect()
            };
            Ok(marginals[x].iter().zip(&prediction).map(|(a, b)| (a - b).abs()).sum())
        })
        .collect::<Result<_>>()?;
    let mean = residuals.iter().sum::<f64>() / g.n as f64;
    Ok(DiagnosticResult::exact(mean, params))
}

/// `ω ↦ Σ_{s: s_x = ω} ψ_a(s) Π_{y ≠ x} m(y)(s_y)` over the distinct variables of `a`.
fn constraint_factor<'a>(g: &FactorGraph, a: usize, x: usize, m: impl Fn(usize) -> &'a Vec<f64>) -> Vec<f64> {
    let q = g.q();
    let neighbors = &g.constraints[a].neighbors;
    let mut distinct: Vec<usize> = neighbors.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let slot_of: Vec<usize> = neighbors.iter().map(|v| distinct.binary_search(v).unwrap()).collect();
    let xi = distinct.binary_search(&x).unwrap();
    let wf = g.weight_of(a);
    let mut out = vec![0.0; q];
    let mut spins = vec![0usize; distinct.len()];
    let mut slots = vec![0usize; neighbors.len()];
    for idx in 0..q.pow(distinct.len() as u32) {
        let mut r = idx;
        for s in spins.iter_mut().rev() {
            *s = r % q;
            r /= q;
        }
        for (slot, &d) in slots.iter_mut().zip(&slot_of) {
            *slot = spins[d];
        }
        let mut w = wf.value(&slots, q);
        for (d, &y) in distinct.iter().enumerate() {
            if d != xi {
                w *= m(y)[spins[d]];
            }
        }
        out[spins[xi]] += w;
    }
    out
}
