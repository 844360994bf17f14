//! Regularity partitions of a discrete measure: the index, REG1–REG4 checks,
//! witness-driven refinement and the conditional measure `μ[·|V,S]`.
//!
//! Block averages `σ[·|U]` are normalised, i.e. the mean of `σ_x` over
//! `x ∈ U`, so that they are points of `P(Ω)`.

use crate::bp::tv;
use crate::cut::{
    cut_sup_upper_bound_blocks, embed, strong_cut_distance_heuristic, Coupling, EmbeddedMeasure, HeuristicOptions,
};
use crate::error::{Error, Result};
use crate::model::DiscreteMeasure;
use crate::rng::{derive_seed, substream};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default limit on `2^{|S_j|}` for the exact REG4 search.
pub const DEFAULT_BUDGET: u64 = 1 << 16;
const RANDOM_RESTARTS: usize = 16;

/// A partition `V` of the coordinates `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinatePartition {
    blocks: Vec<Vec<usize>>,
}

/// A partition `S` of the support of a measure, by support index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPartition {
    blocks: Vec<Vec<usize>>,
}

fn validate_cover(blocks: &[Vec<usize>], size: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; size];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::PartitionMismatch(format!("{what} block {b} is empty")));
        }
        for &e in block {
            if e >= size {
                return Err(Error::PartitionMismatch(format!("{what} block {b} contains {e}, outside 0..{size}")));
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::PartitionMismatch(format!("{what} element {e} appears twice")));
            }
        }
    }
    if let Some(e) = seen.iter().position(|s| !s) {
        return Err(Error::PartitionMismatch(format!("{what} element {e} is not covered")));
    }
    Ok(())
}

macro_rules! partition_common {
    ($t:ident, $what:literal) => {
        impl $t {
            pub fn new(blocks: Vec<Vec<usize>>, size: usize) -> Result<Self> {
                validate_cover(&blocks, size, $what)?;
                Ok($t { blocks })
            }

            pub fn trivial(size: usize) -> Self {
                $t { blocks: vec![(0..size).collect()] }
            }

            pub fn singletons(size: usize) -> Self {
                $t { blocks: (0..size).map(|e| vec![e]).collect() }
            }

            pub fn blocks(&self) -> &[Vec<usize>] {
                &self.blocks
            }

            pub fn len(&self) -> usize {
                self.blocks.len()
            }

            pub fn is_empty(&self) -> bool {
                self.blocks.is_empty()
            }

            /// `owner[e]` = index of the block containing `e`.
            pub fn owners(&self, size: usize) -> Vec<usize> {
                let mut owner = vec![usize::MAX; size];
                for (b, block) in self.blocks.iter().enumerate() {
                    for &e in block {
                        owner[e] = b;
                    }
                }
                owner
            }

            /// True if every block of `self` lies inside a block of `coarser`.
            pub fn refines(&self, coarser: &$t, size: usize) -> bool {
                let owner = coarser.owners(size);
                self.blocks.iter().all(|b| b.iter().all(|&e| owner[e] == owner[b[0]]))
            }
        }
    };
}

partition_common!(CoordinatePartition, "coordinate");
partition_common!(ConfigPartition, "configuration");

/// Per-coordinate spin indicators of the support: `spin(a, x)`.
struct Table<'a> {
    m: &'a DiscreteMeasure,
}

impl Table<'_> {
    fn spin(&self, a: usize, x: usize) -> usize {
        self.m.support()[a].0 .0[x]
    }

    fn weight(&self, a: usize) -> f64 {
        self.m.support()[a].1
    }

    /// Normalised block average `σ[·|U]` of support atom `a`.
    fn block_average(&self, a: usize, cells: &[usize]) -> Vec<f64> {
        let mut p = vec![0.0; self.m.q()];
        for &x in cells {
            p[self.spin(a, x)] += 1.0;
        }
        p.iter_mut().for_each(|v| *v /= cells.len() as f64);
        p
    }

    /// `⟨σ[·|U]⟩_{μ[·|T]}`.
    fn square_average(&self, cells: &[usize], configs: &[usize]) -> Vec<f64> {
        let mut p = vec![0.0; self.m.q()];
        let mut mass = 0.0;
        for &a in configs {
            let w = self.weight(a);
            mass += w;
            for &x in cells {
                p[self.spin(a, x)] += w;
            }
        }
        p.iter_mut().for_each(|v| *v /= mass * cells.len() as f64);
        p
    }

    fn mass(&self, configs: &[usize]) -> f64 {
        configs.iter().map(|&a| self.weight(a)).sum()
    }
}

fn check_partitions(m: &DiscreteMeasure, v: &CoordinatePartition, s: &ConfigPartition) -> Result<()> {
    validate_cover(&v.blocks, m.n(), "coordinate")?;
    validate_cover(&s.blocks, m.len(), "configuration")
}

/// `ind_μ(V, S)`: the spin-averaged within-square variance of `σ_x(ω)`.
///
/// On square `V_i × S_j` with mean `m_ij(ω)` the indicator's variance is
/// `m_ij(ω)(1 − m_ij(ω))`, so the sum is exact.
pub fn index(m: &DiscreteMeasure, v: &CoordinatePartition, s: &ConfigPartition) -> Result<f64> {
    check_partitions(m, v, s)?;
    let t = Table { m };
    let n = m.n() as f64;
    let mut total = 0.0;
    for vi in &v.blocks {
        for sj in &s.blocks {
            let mean = t.square_average(vi, sj);
            let weight = vi.len() as f64 / n * t.mass(sj);
            total += weight * mean.iter().map(|p| p * (1.0 - p)).sum::<f64>();
        }
    }
    Ok(total / m.q() as f64)
}

/// A sub-square `U × T` of `V_i × S_j` on which REG4 fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub cells: Vec<usize>,
    pub configs: Vec<usize>,
    /// Spin with the largest absolute deviation.
    pub spin: usize,
    /// `‖⟨σ[·|U]⟩_{μ[·|T]} − ⟨σ[·|V_i]⟩_{μ[·|S_j]}‖_TV`, at least `ε`.
    pub violation: f64,
    /// The deviation in `spin`; at least `2ε/|Ω|` in absolute value.
    pub spin_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    /// `max_{σ,σ'∈S_j} ‖σ[·|V_i] − σ'[·|V_i]‖_TV`.
    pub reg3_diameter: f64,
    /// Whether the REG4 search enumerated every admissible `T`.
    pub exact_search: bool,
    /// Largest REG4 deviation found (a lower bound when the search is randomised).
    pub best_deviation: f64,
    pub in_r: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub eps: f64,
    pub r: Vec<(usize, usize)>,
    /// `Σ_{(i,j)∈R} λ(V_i) μ(S_j)`.
    pub mass: f64,
    pub regular: bool,
    pub pairs: Vec<PairReport>,
    pub witnesses: Vec<Witness>,
}

fn spin_sets(q: usize) -> Vec<u32> {
    (1..(1u32 << q) - 1).collect()
}

/// `⌈ε k⌉` with a little slack for representation error.
fn min_count(eps: f64, k: usize) -> usize {
    ((eps * k as f64) - 1e-9).ceil().max(1.0) as usize
}

struct Search<'a> {
    t: &'a Table<'a>,
    cells: &'a [usize],
    configs: &'a [usize],
    eps: f64,
    mean: Vec<f64>,
    total_mass: f64,
    m_cells: usize,
}

impl Search<'_> {
    /// `σ_x(W)` summed over `T` with weights, per cell of `V_i`.
    fn cell_scores(&self, w: u32, chosen: &[usize]) -> Vec<f64> {
        let mut f = vec![0.0; self.cells.len()];
        for &a in chosen {
            let wt = self.t.weight(a);
            for (k, &x) in self.cells.iter().enumerate() {
                if w >> self.t.spin(a, x) & 1 == 1 {
                    f[k] += wt;
                }
            }
        }
        f
    }

    fn top_cells(&self, f: &[f64]) -> (f64, Vec<usize>) {
        let mut idx: Vec<usize> = (0..f.len()).collect();
        idx.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
        idx.truncate(self.m_cells);
        let sum = idx.iter().map(|&k| f[k]).sum();
        (sum, idx)
    }

    fn threshold(&self) -> f64 {
        self.eps * self.total_mass * (1.0 - 1e-12)
    }

    fn mean_w(&self, w: u32) -> f64 {
        (0..self.mean.len()).filter(|o| w >> o & 1 == 1).map(|o| self.mean[o]).sum()
    }

    /// Best `(deviation, U, T)` for spin set `W` by enumerating all `T`.
    fn exact(&self, w: u32) -> (f64, Vec<usize>, Vec<usize>) {
        let s = self.configs.len();
        let base = self.mean_w(w);
        let rows: Vec<Vec<f64>> = self.configs.iter().map(|&a| self.cell_scores(w, &[a])).collect();
        let mut f = vec![0.0; self.cells.len()];
        let mut mass = 0.0;
        let mut in_t = vec![false; s];
        let mut best = (f64::NEG_INFINITY, 0u64);
        let mut code = 0u64;
        let thr = self.threshold();
        for step in 1..(1u64 << s) {
            let b = step.trailing_zeros() as usize;
            code ^= 1 << b;
            let sign = if in_t[b] { -1.0 } else { 1.0 };
            in_t[b] = !in_t[b];
            mass += sign * self.t.weight(self.configs[b]);
            f.iter_mut().zip(&rows[b]).for_each(|(a, r)| *a += sign * r);
            if mass >= thr {
                let (top, _) = self.top_cells(&f);
                let dev = top / (self.m_cells as f64 * mass) - base;
                if dev > best.0 {
                    best = (dev, code);
                }
            }
        }
        let t: Vec<usize> = (0..s).filter(|b| best.1 >> b & 1 == 1).map(|b| self.configs[b]).collect();
        let (_, top) = self.top_cells(&self.cell_scores(w, &t));
        let u = top.iter().map(|&k| self.cells[k]).collect();
        (best.0, u, t)
    }

    /// Alternating search: best `U` for `T` (top cells), then best prefix
    /// `T` by per-configuration score on `U`, from random starts.
    fn randomized(&self, w: u32, seed: u64) -> (f64, Vec<usize>, Vec<usize>) {
        let base = self.mean_w(w);
        let thr = self.threshold();
        let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
        for r in 0..RANDOM_RESTARTS {
            let mut rng = substream(seed, "reg4_restart", r as u64);
            let mut u: Vec<usize> = if r == 0 {
                (0..self.cells.len()).collect()
            } else {
                let mut all: Vec<usize> = (0..self.cells.len()).collect();
                all.shuffle(&mut rng);
                all.truncate(self.m_cells.max(1 + r % self.cells.len()));
                all
            };
            let mut last = f64::NEG_INFINITY;
            for _ in 0..100 {
                // T: configurations by decreasing score on U until the mass threshold
                let score = |a: usize| u.iter().filter(|&&k| w >> self.t.spin(a, self.cells[k]) & 1 == 1).count() as f64;
                let mut order: Vec<usize> = self.configs.to_vec();
                order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
                let mut t = Vec::new();
                let mut mass = 0.0;
                for a in order {
                    t.push(a);
                    mass += self.t.weight(a);
                    if mass >= thr {
                        break;
                    }
                }
                let (top, idx) = self.top_cells(&self.cell_scores(w, &t));
                let dev = top / (self.m_cells as f64 * mass) - base;
                u = idx;
                if dev > best.0 {
                    best = (dev, u.iter().map(|&k| self.cells[k]).collect(), t.clone());
                }
                if dev <= last + 1e-15 {
                    break;
                }
                last = dev;
            }
        }
        best
    }
}

/// REG3 diameter over the block averages on `cells` of the configurations.
fn diameter(t: &Table, cells: &[usize], configs: &[usize]) -> f64 {
    let avgs: Vec<Vec<f64>> = configs.iter().map(|&a| t.block_average(a, cells)).collect();
    if t.m.q() == 2 {
        let (lo, hi) = avgs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[0]), h.max(p[0])));
        return hi - lo;
    }
    let mut d: f64 = 0.0;
    for a in 0..avgs.len() {
        for b in a + 1..avgs.len() {
            d = d.max(tv(&avgs[a], &avgs[b]));
        }
    }
    d
}

/// Builds the largest `R` allowed by REG1 and REG3 and removes every pair on
/// which a REG4 witness is found.
///
/// The REG4 search on `V_i × S_j` is exact when `2^{|S_j|} ≤ budget`: for a
/// fixed `T` and spin set, the best `U` of each size is the set of top cells,
/// and the smallest admissible size is optimal because the mean of the top
/// `k` scores does not increase with `k`. Above the budget the search is
/// randomised and one-sided; pairs it cannot refute stay in `R`.
pub fn check_regularity(
    m: &DiscreteMeasure,
    v: &CoordinatePartition,
    s: &ConfigPartition,
    eps: f64,
    budget: u64,
    seed: u64,
) -> Result<RegularityReport> {
    check_partitions(m, v, s)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    let t = Table { m };
    let n = m.n() as f64;
    let q = m.q();
    let pairs: Vec<(usize, usize)> = (0..v.len()).flat_map(|i| (0..s.len()).map(move |j| (i, j))).collect();
    let results: Vec<(PairReport, Option<Witness>)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let (cells, configs) = (&v.blocks[i], &s.blocks[j]);
            let reg3 = diameter(&t, cells, configs);
            let search = Search {
                t: &t,
                cells,
                configs,
                eps,
                mean: t.square_average(cells, configs),
                total_mass: t.mass(configs),
                m_cells: min_count(eps, cells.len()),
            };
            let exact = configs.len() < 64 && (1u64 << configs.len()) <= budget;
            let pair_seed = derive_seed(seed, "reg4_pair", k as u64);
            let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
            for w in spin_sets(q) {
                let found = if exact { search.exact(w) } else { search.randomized(w, derive_seed(pair_seed, "spin_set", w as u64)) };
                if found.0 > best.0 {
                    best = found;
                }
            }
            let (_, mut u, mut tt) = best;
            u.sort_unstable();
            tt.sort_unstable();
            // re-evaluate the candidate from the definition
            let mut witness = None;
            let mut deviation = 0.0;
            if !u.is_empty() && !tt.is_empty() {
                let d: Vec<f64> = t.square_average(&u, &tt).iter().zip(&search.mean).map(|(a, b)| a - b).collect();
                deviation = 0.5 * d.iter().map(|x| x.abs()).sum::<f64>();
                if deviation >= eps {
                    let spin = (0..q).max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())).expect("q >= 1");
                    witness = Some(Witness { i, j, cells: u, configs: tt, spin, violation: deviation, spin_deviation: d[spin] });
                }
            }
            let in_r = reg3 < eps && witness.is_none();
            (PairReport { i, j, reg3_diameter: reg3, exact_search: exact, best_deviation: deviation, in_r }, witness)
        })
        .collect();
    let mut report = RegularityReport { eps, r: Vec::new(), mass: 0.0, regular: false, pairs: Vec::new(), witnesses: Vec::new() };
    for (p, w) in results {
        if p.in_r {
            report.r.push((p.i, p.j));
            report.mass += v.blocks[p.i].len() as f64 / n * t.mass(&s.blocks[p.j]);
        }
        report.pairs.push(p);
        report.witnesses.extend(w);
    }
    report.regular = report.mass > 1.0 - eps;
    Ok(report)
}

/// Splits every configuration block so that all members' block averages on
/// every coordinate block share one cell of the grid of mesh `ε/|Ω|` on
/// `P(Ω)`; each cell has TV diameter below `ε`, so REG3 holds afterwards.
pub fn q_split(m: &DiscreteMeasure, v: &CoordinatePartition, s: &ConfigPartition, eps: f64) -> Result<ConfigPartition> {
    check_partitions(m, v, s)?;
    let t = Table { m };
    let mesh = eps / m.q() as f64;
    let mut blocks = Vec::new();
    for block in &s.blocks {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        for &a in block {
            let key: Vec<i64> =
                v.blocks.iter().flat_map(|cells| t.block_average(a, cells)).map(|p| (p / mesh).floor() as i64).collect();
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(a);
        }
        blocks.extend(groups);
    }
    Ok(ConfigPartition { blocks })
}

/// Splits `blocks` by membership in each of the given subsets (keyed by block).
fn split_by(blocks: &[Vec<usize>], cuts: &[(usize, &[usize])], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        let relevant: Vec<&[usize]> = cuts.iter().filter(|(k, _)| *k == b).map(|(_, c)| *c).collect();
        if relevant.is_empty() {
            out.push(block.clone());
            continue;
        }
        let mut member = vec![Vec::new(); relevant.len()];
        for (r, c) in relevant.iter().enumerate() {
            let mut mask = vec![false; size];
            c.iter().for_each(|&e| mask[e] = true);
            member[r] = mask;
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
        for &e in block {
            let key: Vec<bool> = member.iter().map(|m| m[e]).collect();
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(e);
        }
        out.extend(groups);
    }
    out
}

/// The common refinement of all witness splits, followed by the REG3 re-split.
pub fn refine_once(
    m: &DiscreteMeasure,
    v: &CoordinatePartition,
    s: &ConfigPartition,
    report: &RegularityReport,
) -> Result<(CoordinatePartition, ConfigPartition)> {
    check_partitions(m, v, s)?;
    if report.witnesses.is_empty() {
        return Err(Error::NoWitness);
    }
    let ucuts: Vec<(usize, &[usize])> = report.witnesses.iter().map(|w| (w.i, w.cells.as_slice())).collect();
    let tcuts: Vec<(usize, &[usize])> = report.witnesses.iter().map(|w| (w.j, w.configs.as_slice())).collect();
    let v2 = CoordinatePartition { blocks: split_by(&v.blocks, &ucuts, m.n()) };
    let s2 = ConfigPartition { blocks: split_by(&s.blocks, &tcuts, m.len()) };
    let s3 = q_split(m, &v2, &s2, report.eps)?;
    Ok((v2, s3))
}

/// `⌈ε^{-5} |Ω|³⌉`, the bound on the number of witness-driven steps.
pub fn step_bound(eps: f64, q: usize) -> u64 {
    (eps.powi(-5) * (q as f64).powi(3) - 1e-9).ceil() as u64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub v: CoordinatePartition,
    pub s: ConfigPartition,
    pub report: RegularityReport,
    pub steps: u64,
    /// Index after the initial REG3 split and after every step.
    pub index_trace: Vec<f64>,
}

/// Alternates [`check_regularity`] and [`refine_once`] from `(v0, s0)` (after
/// an initial REG3 split) until the pair is regular, no witness is found, or
/// the step bound is reached.
pub fn regularity_decomposition(
    m: &DiscreteMeasure,
    eps: f64,
    v0: &CoordinatePartition,
    s0: &ConfigPartition,
    budget: u64,
    seed: u64,
) -> Result<Decomposition> {
    let mut v = v0.clone();
    let mut s = q_split(m, v0, s0, eps)?;
    let cap = step_bound(eps, m.q());
    let mut trace = vec![index(m, &v, &s)?];
    let mut steps = 0;
    loop {
        let report = check_regularity(m, &v, &s, eps, budget, derive_seed(seed, "regularity_step", steps))?;
        if report.regular || report.witnesses.is_empty() || steps >= cap {
            return Ok(Decomposition { v, s, report, steps, index_trace: trace });
        }
        (v, s) = refine_once(m, &v, &s, &report)?;
        steps += 1;
        trace.push(index(m, &v, &s)?);
    }
}

/// `μ[·|V,S]`: one atom per configuration block `S_j`, of weight `μ(S_j)`,
/// whose step function equals the square average on each coordinate block.
pub fn conditional_measure(m: &DiscreteMeasure, v: &CoordinatePartition, s: &ConfigPartition) -> Result<EmbeddedMeasure> {
    check_partitions(m, v, s)?;
    let t = Table { m };
    let owner = v.owners(m.n());
    let mut atoms = Vec::with_capacity(s.len());
    for sj in &s.blocks {
        let avgs: Vec<Vec<f64>> = v.blocks.iter().map(|vi| t.square_average(vi, sj)).collect();
        let steps = (0..m.n()).map(|x| crate::bp::SimplexPoint(avgs[owner[x]].clone())).collect();
        atoms.push((t.mass(sj), steps));
    }
    EmbeddedMeasure::new(m.n(), m.q(), renormalise(atoms))
}

fn renormalise(mut atoms: Vec<(f64, Vec<crate::bp::SimplexPoint>)>) -> Vec<(f64, Vec<crate::bp::SimplexPoint>)> {
    let total: f64 = atoms.iter().map(|a| a.0).sum();
    atoms.iter_mut().for_each(|a| a.0 /= total);
    atoms
}

/// The coupling of `embed(m)` with `μ[·|V,S]` that sends each configuration
/// to the atom of its block.
pub fn conditional_coupling(m: &DiscreteMeasure, s: &ConfigPartition) -> Coupling {
    let (r, c) = (m.len(), s.len());
    let total: f64 = s.blocks.iter().flatten().map(|&a| m.support()[a].1).sum();
    let mut w = vec![0.0; r * c];
    for (j, block) in s.blocks.iter().enumerate() {
        for &a in block {
            w[a * c + j] = m.support()[a].1 / total;
        }
    }
    Coupling::new(r, c, w).expect("non-negative weights")
}

/// `Cut□(μ, μ[·|V,S])` bracketed from above.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalDistance {
    /// Heuristic strong distance (inner supremum at the best coupling found).
    pub value: f64,
    /// Certified upper bound on the strong distance.
    pub upper_bound: f64,
}

/// Strong cut distance between `m` and its conditional measure, using the
/// block coupling as a starting point. The certified upper bound is the
/// smaller of the heuristic certificate and a square-by-square bound at the
/// block coupling (each square's supremum computed separately).
pub fn conditional_distance(
    m: &DiscreteMeasure,
    v: &CoordinatePartition,
    s: &ConfigPartition,
    seed: u64,
) -> Result<ConditionalDistance> {
    let mu = embed(m);
    let cond = conditional_measure(m, v, s)?;
    let hint = conditional_coupling(m, s);
    let opts = HeuristicOptions { seed, rounds: 0, hint: Some(hint.clone()), ..Default::default() };
    let d = strong_cut_distance_heuristic(&mu, &cond, &opts)?;
    let blocks = cut_sup_upper_bound_blocks(&hint, &mu, &cond, &v.blocks, &s.blocks, 20_000)?;
    Ok(ConditionalDistance { value: d.value, upper_bound: d.certificate.upper_bound.min(blocks) })
}
