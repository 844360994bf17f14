//! Exhaustive enumeration of Gibbs measures.
//!
//! Configurations are enumerated in lexicographic order with variable 0 most
//! significant. Weights are accumulated in log space and reduced over
//! fixed-size chunks in index order, so results do not depend on the number of
//! worker threads.

use crate::error::{Error, Result};
use crate::model::{Assignment, Constraint, FactorGraph};
use crate::rng::substream;
use crate::stats::LogSum;
use rand::Rng;
use rayon::prelude::*;

/// Default bound on the number of enumerated configurations.
pub const DEFAULT_STATE_CAP: u64 = 1 << 24;

const CHUNK: usize = 1 << 12;

/// `ln Z` and, when it fits in an `f64`, `Z` itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionFunction {
    pub log_z: f64,
    pub z: Option<f64>,
}

/// Number of configurations of `vars` variables, or an error above `cap`.
pub fn check_state_cap(q: usize, vars: usize, cap: u64) -> Result<usize> {
    let states = (q as f64).powi(vars as i32);
    if states > cap as f64 {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    Ok(states as usize)
}

/// Log weights of all configurations of `free`, with every other variable
/// read from `base`. Entry `idx` corresponds to `free[0]` most significant.
fn log_weights(g: &FactorGraph, free: &[usize], base: &[usize], cap: u64) -> Result<Vec<f64>> {
    let q = g.q();
    let states = check_state_cap(q, free.len(), cap)?;
    let log_tables: Vec<Vec<f64>> =
        g.weight_functions.iter().map(|wf| wf.table.iter().map(|v| v.ln()).collect()).collect();
    // only constraints touching a free variable vary; the rest contribute a constant
    let mut is_free = vec![false; g.n];
    for &v in free {
        is_free[v] = true;
    }
    let (varying, fixed): (Vec<&Constraint>, Vec<&Constraint>) =
        g.constraints.iter().partition(|c| c.neighbors.iter().any(|&v| is_free[v]));
    let constant: f64 = fixed
        .iter()
        .map(|c| log_tables[c.wf][c.neighbors.iter().fold(0, |acc, &v| acc * q + base[v])])
        .sum();

    let mut out = vec![0.0; states];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let mut sigma = base.to_vec();
        for (off, slot) in chunk.iter_mut().enumerate() {
            let mut idx = ci * CHUNK + off;
            for &v in free.iter().rev() {
                sigma[v] = idx % q;
                idx /= q;
            }
            let mut lw = constant;
            for c in &varying {
                lw += log_tables[c.wf][c.neighbors.iter().fold(0, |acc, &v| acc * q + sigma[v])];
            }
            *slot = lw;
        }
    });
    Ok(out)
}

fn chunked_log_sum(lw: &[f64]) -> f64 {
    let partial: Vec<LogSum> = lw
        .par_chunks(CHUNK)
        .map(|c| {
            let mut acc = LogSum::default();
            for &x in c {
                acc.add(x);
            }
            acc
        })
        .collect();
    let mut total = LogSum::default();
    for p in partial {
        total.merge(p);
    }
    total.value()
}

/// The full Gibbs distribution of a small factor graph.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    pub n: usize,
    pub q: usize,
    pub log_z: f64,
    /// `μ(σ)` for every configuration in lexicographic order.
    pub probs: Vec<f64>,
}

impl GibbsTable {
    pub fn new(g: &FactorGraph) -> Result<Self> {
        Self::with_cap(g, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(g: &FactorGraph, cap: u64) -> Result<Self> {
        let free: Vec<usize> = (0..g.n).collect();
        let base = vec![0; g.n];
        let mut lw = log_weights(g, &free, &base, cap)?;
        let log_z = chunked_log_sum(&lw);
        lw.par_iter_mut().for_each(|x| *x = (*x - log_z).exp());
        Ok(GibbsTable { n: g.n, q: g.q(), log_z, probs: lw })
    }

    /// Spin of variable `v` in configuration `idx`.
    #[inline]
    pub fn spin(&self, idx: usize, v: usize) -> usize {
        (idx / self.q.pow((self.n - 1 - v) as u32)) % self.q
    }

    pub fn assignment(&self, idx: usize) -> Assignment {
        Assignment((0..self.n).map(|v| self.spin(idx, v)).collect())
    }

    /// Joint marginal of `vars` over `Ω^{|vars|}`, `vars[0]` most significant.
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>> {
        if let Some(&v) = vars.iter().find(|&&v| v >= self.n) {
            return Err(Error::UnknownVariable(v));
        }
        let strides: Vec<usize> = vars.iter().map(|&v| self.q.pow((self.n - 1 - v) as u32)).collect();
        let mut out = vec![0.0; self.q.pow(vars.len() as u32)];
        for (idx, &p) in self.probs.iter().enumerate() {
            let k = strides.iter().fold(0, |acc, &s| acc * self.q + (idx / s) % self.q);
            out[k] += p;
        }
        Ok(out)
    }

    /// Every single-variable marginal at once.
    pub fn all_marginals(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.q]; self.n];
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut r = idx;
            for v in (0..self.n).rev() {
                out[v][r % self.q] += p;
                r /= self.q;
            }
        }
        out
    }

    /// `count` i.i.d. configuration indices by inversion of the cumulative table.
    pub fn sample_indices(&self, count: usize, seed: u64) -> Vec<usize> {
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cum.push(acc);
        }
        let mut rng = substream(seed, "gibbs_sample", 0);
        (0..count)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                cum.partition_point(|&c| c <= u).min(self.probs.len() - 1)
            })
            .collect()
    }
}

pub fn partition_function(g: &FactorGraph) -> Result<PartitionFunction> {
    partition_function_with_cap(g, DEFAULT_STATE_CAP)
}

pub fn partition_function_with_cap(g: &FactorGraph, cap: u64) -> Result<PartitionFunction> {
    let free: Vec<usize> = (0..g.n).collect();
    let lw = log_weights(g, &free, &vec![0; g.n], cap)?;
    let log_z = chunked_log_sum(&lw);
    let z = log_z.exp();
    Ok(PartitionFunction { log_z, z: (z.is_finite() && z > 0.0).then_some(z) })
}

/// Exact marginal of `μ_G` on `vars`, as a table over `Ω^{|vars|}`.
pub fn gibbs_marginal(g: &FactorGraph, vars: &[usize]) -> Result<Vec<f64>> {
    if let Some(&v) = vars.iter().find(|&&v| v >= g.n) {
        return Err(Error::UnknownVariable(v));
    }
    GibbsTable::new(g)?.marginal(vars)
}

/// `count` i.i.d. exact samples from `μ_G`.
pub fn gibbs_sample(g: &FactorGraph, count: usize, seed: u64) -> Result<Vec<Assignment>> {
    let table = GibbsTable::new(g)?;
    Ok(table.sample_indices(count, seed).into_iter().map(|i| table.assignment(i)).collect())
}

/// Marginal of `target` under `μ_G` given `clamped` as `(variable, spin)` pairs.
pub fn conditional_marginal(g: &FactorGraph, target: usize, clamped: &[(usize, usize)]) -> Result<Vec<f64>> {
    conditional_marginal_with_cap(g, target, clamped, DEFAULT_STATE_CAP)
}

pub fn conditional_marginal_with_cap(
    g: &FactorGraph,
    target: usize,
    clamped: &[(usize, usize)],
    cap: u64,
) -> Result<Vec<f64>> {
    if target >= g.n {
        return Err(Error::UnknownVariable(target));
    }
    let q = g.q();
    let mut base = vec![0; g.n];
    let mut is_clamped = vec![false; g.n];
    for &(v, s) in clamped {
        if v >= g.n {
            return Err(Error::UnknownVariable(v));
        }
        if s >= q {
            return Err(Error::InvalidParameter(format!("clamped spin {s} outside alphabet of size {q}")));
        }
        if v == target {
            return Err(Error::TargetClamped(v));
        }
        base[v] = s;
        is_clamped[v] = true;
    }
    // target first so that the leading digit of the state index is its spin
    let mut free = vec![target];
    free.extend((0..g.n).filter(|&v| v != target && !is_clamped[v]));
    let lw = log_weights(g, &free, &base, cap)?;
    let block = lw.len() / q;
    let logs: Vec<f64> = lw.chunks(block).map(crate::stats::log_sum_exp).collect();
    let total = crate::stats::log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - total).exp()).collect())
}

/// `G − x`: drops `x` and every constraint adjacent to it.
///
/// The returned map sends each old variable id to its new id (`None` for `x`).
pub fn remove_variable(g: &FactorGraph, x: usize) -> Result<(FactorGraph, Vec<Option<usize>>)> {
    if x >= g.n {
        return Err(Error::UnknownVariable(x));
    }
    let map: Vec<Option<usize>> = (0..g.n)
        .map(|v| match v.cmp(&x) {
            std::cmp::Ordering::Less => Some(v),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(v - 1),
        })
        .collect();
    let constraints = g
        .constraints
        .iter()
        .filter(|c| !c.neighbors.contains(&x))
        .map(|c| Constraint { wf: c.wf, neighbors: c.neighbors.iter().map(|&v| map[v].unwrap()).collect() })
        .collect();
    let h = FactorGraph {
        alphabet: g.alphabet.clone(),
        weight_functions: g.weight_functions.clone(),
        constraints,
        n: g.n - 1,
    };
    Ok((h, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gibbs_weight, SpinAlphabet, WeightFunction};
    use crate::random::{preset_ising_pairwise, sample_factor_graph};

    fn ising_wf(beta: f64) -> WeightFunction {
        WeightFunction::from_fn("ising", 2, 2, |s| {
            let (a, b) = (2.0 * s[0] as f64 - 1.0, 2.0 * s[1] as f64 - 1.0);
            (beta * a * b).exp()
        })
        .unwrap()
    }

    fn edge(beta: f64) -> FactorGraph {
        FactorGraph::new(
            SpinAlphabet::ising(),
            vec![ising_wf(beta)],
            vec![Constraint { wf: 0, neighbors: vec![0, 1] }],
            2,
        )
        .unwrap()
    }

    #[test]
    fn free_variables() {
        let g = FactorGraph::empty(SpinAlphabet::ising(), 3);
        let z = partition_function(&g).unwrap();
        assert!((z.z.unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ising_edge_partition_function() {
        let z = partition_function(&edge(0.5)).unwrap().z.unwrap();
        let oracle = 2.0 * 0.5f64.exp() + 2.0 * (-0.5f64).exp();
        assert!((z - oracle).abs() < 1e-12);
    }

    #[test]
    fn constant_weights_give_q_to_the_n() {
        let one = WeightFunction::new("one", 3, vec![1.0; 27], 3).unwrap();
        let alpha = SpinAlphabet::numbered(3).unwrap();
        let g = FactorGraph::new(alpha, vec![one], vec![Constraint { wf: 0, neighbors: vec![0, 1, 1] }], 4).unwrap();
        assert!((partition_function(&g).unwrap().log_z - 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let g = FactorGraph::empty(SpinAlphabet::ising(), 30);
        assert!(matches!(partition_function(&g), Err(Error::StateSpaceTooLarge { .. })));
        assert!(partition_function_with_cap(&FactorGraph::empty(SpinAlphabet::ising(), 4), 15).is_err());
    }

    #[test]
    fn marginals_on_an_edge() {
        let g = edge(0.5);
        let m = gibbs_marginal(&g, &[0]).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-12);
        let joint = gibbs_marginal(&g, &[0, 1]).unwrap();
        let (a, b) = (0.5f64.exp(), (-0.5f64).exp());
        let z = 2.0 * (a + b);
        for (got, want) in joint.iter().zip([a / z, b / z, b / z, a / z]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(gibbs_marginal(&g, &[2]), Err(Error::UnknownVariable(2))));
    }

    #[test]
    fn full_marginal_is_normalised_weight() {
        let spec = preset_ising_pairwise(0.7);
        let g = sample_factor_graph(&spec, 6, 3).unwrap();
        let z = partition_function(&g).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let joint = gibbs_marginal(&g, &all).unwrap();
        let t = GibbsTable::new(&g).unwrap();
        for (idx, p) in joint.iter().enumerate() {
            let w = gibbs_weight(&g, &t.assignment(idx)).unwrap();
            assert!((p - w / z.z.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_matches_direct_sum() {
        let spec = preset_ising_pairwise(1.3);
        let g = sample_factor_graph(&spec, 12, 9).unwrap();
        let t = GibbsTable::new(&g).unwrap();
        let direct: f64 = (0..t.probs.len()).map(|i| gibbs_weight(&g, &t.assignment(i)).unwrap()).sum();
        let z = partition_function(&g).unwrap().z.unwrap();
        assert!(((z - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_correct() {
        let g = FactorGraph::empty(SpinAlphabet::ising(), 1);
        let s = gibbs_sample(&g, 10_000, 1).unwrap();
        assert_eq!(s, gibbs_sample(&g, 10_000, 1).unwrap());
        let ones = s.iter().filter(|a| a.0[0] == 1).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() <= 3.0 * (0.25f64 / 1e4).sqrt());

        let g = edge(2.0);
        let s = gibbs_sample(&g, 10_000, 5).unwrap();
        let p = 2f64.exp() / (2f64.exp() + (-2f64).exp());
        let same = s.iter().filter(|a| a.0[0] == a.0[1]).count() as f64 / 1e4;
        assert!((same - p).abs() <= 3.0 * (p * (1.0 - p) / 1e4).sqrt());
    }

    #[test]
    fn conditional_marginals() {
        let g = edge(0.5);
        assert_eq!(gibbs_marginal(&g, &[0]).unwrap().len(), conditional_marginal(&g, 0, &[]).unwrap().len());
        let c = conditional_marginal(&g, 0, &[(1, 1)]).unwrap();
        let z = 0.5f64.exp() + (-0.5f64).exp();
        assert!((c[0] - (-0.5f64).exp() / z).abs() < 1e-12);
        assert!((c[1] - 0.5f64.exp() / z).abs() < 1e-12);
        assert!(matches!(conditional_marginal(&g, 0, &[(0, 1)]), Err(Error::TargetClamped(0))));

        let mut two = edge(0.5);
        two.n = 4;
        two.add_constraint(0, vec![2, 3]).unwrap();
        let before = conditional_marginal(&two, 0, &[(1, 1)]).unwrap();
        let after = conditional_marginal(&two, 0, &[(1, 1), (3, 0)]).unwrap();
        assert!((before[0] - after[0]).abs() < 1e-12);
    }

    #[test]
    fn total_probability() {
        let spec = preset_ising_pairwise(0.9);
        let g = sample_factor_graph(&spec, 7, 11).unwrap();
        let pair = gibbs_marginal(&g, &[2, 5]).unwrap();
        let mut recon = [0.0; 2];
        for s in 0..2 {
            let c = conditional_marginal(&g, 2, &[(5, s)]).unwrap();
            let p5 = pair[s] + pair[2 + s];
            for w in 0..2 {
                recon[w] += p5 * c[w];
            }
        }
        let m = gibbs_marginal(&g, &[2]).unwrap();
        assert!((recon[0] - m[0]).abs() < 1e-10);
    }

    #[test]
    fn removal() {
        let g = FactorGraph::empty(SpinAlphabet::ising(), 3);
        let (h, map) = remove_variable(&g, 1).unwrap();
        assert_eq!(h.n, 2);
        assert_eq!(map, vec![Some(0), None, Some(1)]);

        let (h, _) = remove_variable(&edge(0.1), 0).unwrap();
        assert_eq!((h.n, h.constraints.len()), (1, 0));

        let mut star = FactorGraph::new(SpinAlphabet::ising(), vec![ising_wf(0.1)], vec![], 5).unwrap();
        for y in 1..4 {
            star.add_constraint(0, vec![0, y]).unwrap();
        }
        star.add_constraint(0, vec![1, 4]).unwrap();
        let (h, map) = remove_variable(&star, 0).unwrap();
        assert_eq!(h.constraints.len(), 1);
        assert_eq!(h.constraints[0].neighbors, vec![map[1].unwrap(), map[4].unwrap()]);
        assert!(remove_variable(&star, 9).is_err());
    }

    #[test]
    fn parallel_reduction_is_deterministic() {
        let spec = preset_ising_pairwise(0.4);
        let g = sample_factor_graph(&spec, 16, 2).unwrap();
        let a = partition_function(&g).unwrap().log_z;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| partition_function(&g).unwrap().log_z);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
