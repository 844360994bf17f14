//! The cut metric on measures over step functions `[0,1) → P(Ω)`.
//!
//! A discrete measure on `Ω^n` embeds as a mixture of step functions that are
//! constant on the `n` equal cells of `[0,1)`. Since every integrand is
//! cell-wise constant, the sets `U` in the supremum may be taken as unions of
//! whole cells, and the sets `B` as unions of whole atom pairs.
//!
//! For a fixed coupling `γ` and a fixed spin set `W ⊆ Ω` the objective is
//! `Σ_{p∈B} γ_p Σ_{x∈U} d_{p,x}(W) / n` with `d_{p,x}(W) = σ_x(W) − τ_x(W)`. The
//! total variation of a signed vector with zero sum is `max_W v(W)`, so the
//! inner supremum is the maximum over `W` of a bilinear set-selection problem.
//! For fixed `U` the best `B` is `{p : c_p(U) > 0}` and vice versa; the
//! [`SelectionProblem`] below captures this in a single orientation-agnostic
//! form `max_S Σ_c (Σ_{i∈S} M[i][c])⁺`.

use crate::bp::{tv, SimplexPoint};
use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::model::{AtomRecord, Assignment, DiscreteMeasure, RawMeasure, SpinAlphabet};
use crate::rng::{derive_seed, substream};
use crate::stats::Estimate;
use crate::transport::hungarian;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest side that may be enumerated exactly in the inner supremum.
pub const EXACT_SIDE_CAP: usize = 20;
/// Largest `n` for which the weak distance enumerates all permutations.
pub const PERMUTATION_CAP: usize = 8;
pub const ALTERNATING_RESTARTS: usize = 32;
const POSITIVE: f64 = 1e-300;

/// One atom of an embedded measure: a weight and a step function stored as
/// `n` consecutive probability vectors of length `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub weight: f64,
    values: Vec<f64>,
}

impl Atom {
    pub fn step(&self, x: usize, q: usize) -> &[f64] {
        &self.values[x * q..(x + 1) * q]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedMeasure {
    n: usize,
    q: usize,
    atoms: Vec<Atom>,
}

impl EmbeddedMeasure {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// Builds a measure from `(weight, step function)` pairs.
    pub fn new(n: usize, q: usize, atoms: Vec<(f64, Vec<SimplexPoint>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(atoms.len());
        for (i, (w, steps)) in atoms.into_iter().enumerate() {
            if steps.len() != n {
                return Err(Error::InvalidMeasure(format!("atoms[{i}] has {} cells, expected {n}", steps.len())));
            }
            let mut values = Vec::with_capacity(n * q);
            for (x, s) in steps.iter().enumerate() {
                if s.q() != q {
                    return Err(Error::InvalidMeasure(format!("atoms[{i}].stepfn[{x}] has length {}, expected {q}", s.q())));
                }
                SimplexPoint::new(s.0.clone())
                    .map_err(|e| Error::InvalidMeasure(format!("atoms[{i}].stepfn[{x}]: {e}")))?;
                values.extend_from_slice(&s.0);
            }
            out.push(Atom { weight: w, values });
        }
        Self::from_atoms(n, q, out)
    }

    fn from_atoms(n: usize, q: usize, atoms: Vec<Atom>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidMeasure("alphabet size must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("at least one atom is required".into()));
        }
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::InvalidMeasure(format!("atoms[{i}].weight = {} is not positive", a.weight)));
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(EmbeddedMeasure { n, q, atoms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].weight
    }

    pub fn step(&self, i: usize, x: usize) -> &[f64] {
        self.atoms[i].step(x, self.q)
    }

    /// The average step value `∫ σ_x dμ(σ)` of cell `x`.
    pub fn marginal(&self, x: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.q];
        for a in &self.atoms {
            for (mi, v) in m.iter_mut().zip(a.step(x, self.q)) {
                *mi += a.weight * v;
            }
        }
        m
    }

    /// `ν∘s`: the measure whose cell `x` carries the old cell `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let q = self.q;
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let mut values = Vec::with_capacity(self.n * q);
                for &y in perm {
                    values.extend_from_slice(a.step(y, q));
                }
                Atom { weight: a.weight, values }
            })
            .collect();
        Ok(EmbeddedMeasure { n: self.n, q, atoms })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_17(&RawMeasure::from(self.clone()))?)
    }

    /// Accepts both `stepfn` atoms and discrete `values` atoms (embedded on the fly).
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawMeasure = serde_json::from_str(s)?;
        Self::try_from(raw)
    }
}

impl TryFrom<RawMeasure> for EmbeddedMeasure {
    type Error = Error;
    fn try_from(r: RawMeasure) -> Result<Self> {
        let q = r.alphabet.len();
        let mut atoms = Vec::with_capacity(r.atoms.len());
        for (i, a) in r.atoms.into_iter().enumerate() {
            let steps = match (a.values, a.stepfn) {
                (Some(v), None) => {
                    if v.len() != r.n || v.iter().any(|&s| s >= q) {
                        return Err(Error::InvalidMeasure(format!("atoms[{i}].values is not a configuration in Ω^{}", r.n)));
                    }
                    v.iter().map(|&s| SimplexPoint::point_mass(q, s)).collect()
                }
                (None, Some(f)) => f.into_iter().map(SimplexPoint).collect(),
                _ => {
                    return Err(Error::InvalidMeasure(format!("atoms[{i}] needs exactly one of values, stepfn")));
                }
            };
            atoms.push((a.weight, steps));
        }
        EmbeddedMeasure::new(r.n, q, atoms)
    }
}

impl From<EmbeddedMeasure> for RawMeasure {
    fn from(m: EmbeddedMeasure) -> Self {
        let q = m.q;
        RawMeasure {
            n: m.n,
            alphabet: SpinAlphabet::numbered(q).expect("q >= 1"),
            atoms: m
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    weight: a.weight,
                    values: None,
                    stepfn: Some(a.values.chunks(q).map(<[f64]>::to_vec).collect()),
                })
                .collect(),
        }
    }
}

/// `μ̂ = Σ_σ μ(σ) δ_σ̂`: one atom per support point, with point-mass cells.
pub fn embed(m: &DiscreteMeasure) -> EmbeddedMeasure {
    let (n, q) = (m.n(), m.q());
    let atoms = m
        .support()
        .iter()
        .map(|(s, w)| {
            let mut values = vec![0.0; n * q];
            for (x, &v) in s.0.iter().enumerate() {
                values[x * q + v] = 1.0;
            }
            Atom { weight: *w, values }
        })
        .collect();
    EmbeddedMeasure { n, q, atoms }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of 0..{n}")));
        }
    }
    Ok(())
}

fn check_compatible(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Result<()> {
    if mu.n != nu.n {
        return Err(Error::DimensionMismatch { expected: mu.n, got: nu.n });
    }
    if mu.q != nu.q {
        return Err(Error::DimensionMismatch { expected: mu.q, got: nu.q });
    }
    Ok(())
}

/// A coupling of two embedded measures: a non-negative `rows × cols` matrix
/// with the atom weights as marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Coupling {
    pub const MARGINAL_TOLERANCE: f64 = 1e-10;

    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("coupling weights must be finite and non-negative".into()));
        }
        Ok(Coupling { rows, cols, weights })
    }

    /// Checks the marginal constraints against `mu` (rows) and `nu` (columns).
    pub fn validate(&self, mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Result<()> {
        if self.rows != mu.len() || self.cols != nu.len() {
            return Err(Error::InvalidParameter(format!(
                "coupling is {}x{}, measures have {} and {} atoms",
                self.rows,
                self.cols,
                mu.len(),
                nu.len()
            )));
        }
        for i in 0..self.rows {
            let s: f64 = self.weights[i * self.cols..(i + 1) * self.cols].iter().sum();
            if (s - mu.weight(i)).abs() > Self::MARGINAL_TOLERANCE {
                return Err(Error::InvalidParameter(format!("coupling row {i} sums to {s}, expected {}", mu.weight(i))));
            }
        }
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self.weights[i * self.cols + j]).sum();
            if (s - nu.weight(j)).abs() > Self::MARGINAL_TOLERANCE {
                return Err(Error::InvalidParameter(format!("coupling column {j} sums to {s}, expected {}", nu.weight(j))));
            }
        }
        Ok(())
    }

    pub fn independent(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Self {
        let weights = mu.atoms.iter().flat_map(|a| nu.atoms.iter().map(move |b| a.weight * b.weight)).collect();
        Coupling { rows: mu.len(), cols: nu.len(), weights }
    }

    /// The diagonal coupling of a measure with itself.
    pub fn identity(mu: &EmbeddedMeasure) -> Self {
        let r = mu.len();
        let mut weights = vec![0.0; r * r];
        for i in 0..r {
            weights[i * r + i] = mu.weight(i);
        }
        Coupling { rows: r, cols: r, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn positive_pairs(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let w = self.get(i, j);
                if w > POSITIVE {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

/// `max_{S ⊆ rows} Σ_c (Σ_{i∈S} M[i][c])⁺` for a dense `rows × cols` matrix.
struct SelectionProblem {
    rows: usize,
    cols: usize,
    m: Vec<f64>,
}

fn positive_sum(sums: &[f64]) -> f64 {
    sums.iter().map(|s| s.max(0.0)).sum()
}

impl SelectionProblem {
    fn row(&self, i: usize) -> &[f64] {
        &self.m[i * self.cols..(i + 1) * self.cols]
    }

    fn column_sums(&self, sel: &[bool]) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in (0..self.rows).filter(|&i| sel[i]) {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    /// Gray-code enumeration of all row subsets.
    fn exact(&self) -> (f64, Vec<bool>) {
        assert!(self.rows <= EXACT_SIDE_CAP + 6, "exact enumeration called on {} rows", self.rows);
        let mut sums = vec![0.0; self.cols];
        let mut sel = vec![false; self.rows];
        let mut best = (0.0, 0u64);
        let mut code = 0u64;
        for step in 1..(1u64 << self.rows) {
            let i = step.trailing_zeros() as usize;
            code ^= 1 << i;
            let sign = if sel[i] { -1.0 } else { 1.0 };
            sel[i] = !sel[i];
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += sign * v;
            }
            let val = positive_sum(&sums);
            if val > best.0 {
                best = (val, code);
            }
        }
        let sel: Vec<bool> = (0..self.rows).map(|i| best.1 >> i & 1 == 1).collect();
        // recompute from scratch so the value is independent of the walk order
        let val = positive_sum(&self.column_sums(&sel));
        (val, sel)
    }

    /// Alternating ascent: columns `{c : sum_c > 0}` then rows with positive
    /// mass on those columns, until the value stops increasing.
    fn ascend(&self, mut sel: Vec<bool>) -> (f64, Vec<bool>) {
        let mut sums = self.column_sums(&sel);
        let mut val = positive_sum(&sums);
        for _ in 0..1000 {
            let next: Vec<bool> =
                (0..self.rows).map(|i| self.row(i).iter().zip(&sums).filter(|(_, s)| **s > 0.0).map(|(v, _)| v).sum::<f64>() > 0.0).collect();
            let next_sums = self.column_sums(&next);
            let next_val = positive_sum(&next_sums);
            if next_val <= val * (1.0 + 1e-14) + 1e-300 {
                break;
            }
            (sel, sums, val) = (next, next_sums, next_val);
        }
        (val, sel)
    }

    fn alternating(&self, restarts: usize, seed: u64) -> (f64, Vec<bool>) {
        (0..restarts.max(1))
            .into_par_iter()
            .map(|r| {
                let start: Vec<bool> = if r == 0 {
                    vec![true; self.rows]
                } else {
                    let mut rng = substream(seed, "cut_restart", r as u64);
                    (0..self.rows).map(|_| rng.gen_bool(0.5)).collect()
                };
                self.ascend(start)
            })
            .reduce(|| (f64::NEG_INFINITY, Vec::new()), |a, b| if b.0 > a.0 { b } else { a })
    }

    /// Depth-first branch and bound. Returns a certified upper bound on the
    /// maximum; it is exact when the search completes within `budget` nodes.
    fn upper_bound(&self, incumbent: f64, budget: usize) -> (f64, bool) {
        let mut order: Vec<usize> = (0..self.rows).collect();
        let mass = |i: usize| self.row(i).iter().map(|v| v.abs()).sum::<f64>();
        order.sort_by(|&a, &b| mass(b).total_cmp(&mass(a)));
        // suffix[d][c] = Σ_{t ≥ d} M[order[t]][c]⁺
        let mut suffix = vec![0.0; (self.rows + 1) * self.cols];
        for d in (0..self.rows).rev() {
            for c in 0..self.cols {
                suffix[d * self.cols + c] = suffix[(d + 1) * self.cols + c] + self.row(order[d])[c].max(0.0);
            }
        }
        let mut search = Search { p: self, order, suffix, incumbent, nodes: 0, budget, complete: true };
        let mut sums = vec![0.0; self.cols];
        let ub = search.dfs(0, &mut sums);
        (ub.max(search.incumbent), search.complete)
    }
}

struct Search<'a> {
    p: &'a SelectionProblem,
    order: Vec<usize>,
    suffix: Vec<f64>,
    incumbent: f64,
    nodes: usize,
    budget: usize,
    complete: bool,
}

impl Search<'_> {
    fn dfs(&mut self, d: usize, sums: &mut [f64]) -> f64 {
        let cols = self.p.cols;
        let bound: f64 = sums.iter().zip(&self.suffix[d * cols..(d + 1) * cols]).map(|(s, f)| (s + f).max(0.0)).sum();
        let here = positive_sum(sums);
        self.incumbent = self.incumbent.max(here);
        if d == self.p.rows || bound <= self.incumbent {
            return bound;
        }
        if self.nodes >= self.budget {
            self.complete = false;
            return bound;
        }
        self.nodes += 1;
        let row = self.p.row(self.order[d]);
        let gain: f64 = row.iter().zip(sums.iter()).map(|(v, s)| (s + v).max(0.0) - s.max(0.0)).sum();
        let mut results = [0.0; 2];
        for (k, include) in [gain > 0.0, gain <= 0.0].into_iter().enumerate() {
            if include {
                sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                results[k] = self.dfs(d + 1, sums);
                sums.iter_mut().zip(row).for_each(|(s, v)| *s -= v);
            } else {
                results[k] = self.dfs(d + 1, sums);
            }
        }
        results[0].max(results[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupMode {
    Exact,
    Alternating,
}

/// The inner supremum for a fixed coupling together with a maximising
/// rectangle: atom pairs `B`, cells `U` and the spin set `W` on which the
/// total variation is attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutSup {
    pub value: f64,
    pub pairs: Vec<(usize, usize)>,
    pub cells: Vec<usize>,
    pub spins: Vec<usize>,
    /// False when the value is only a lower bound (alternating mode).
    pub exact: bool,
}

fn subset_weight(p: &[f64], w: u32) -> f64 {
    p.iter().enumerate().filter(|(o, _)| w >> o & 1 == 1).map(|(_, v)| v).sum()
}

/// Spin sets worth trying: all non-empty proper subsets of `Ω`.
fn spin_sets(q: usize) -> Vec<u32> {
    assert!(q < 20, "alphabet too large for spin-set enumeration");
    (1..(1u32 << q) - 1).collect()
}

/// `d[p][x] = (σ_x(W) − τ_x(W)) γ_p / n` for the positive pairs `p`.
fn pair_matrix(pairs: &[(usize, usize, f64)], mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, w: u32) -> Vec<f64> {
    let n = mu.n;
    let mut d = Vec::with_capacity(pairs.len() * n);
    for &(i, j, g) in pairs {
        for x in 0..n {
            let diff = subset_weight(mu.step(i, x), w) - subset_weight(nu.step(j, x), w);
            d.push(g * diff / n as f64);
        }
    }
    d
}

struct Oriented {
    problem: SelectionProblem,
    rows_are_cells: bool,
}

fn orient(d: Vec<f64>, pairs: usize, n: usize, cells_as_rows: bool) -> Oriented {
    if cells_as_rows {
        let mut m = vec![0.0; n * pairs];
        for p in 0..pairs {
            for x in 0..n {
                m[x * pairs + p] = d[p * n + x];
            }
        }
        Oriented { problem: SelectionProblem { rows: n, cols: pairs, m }, rows_are_cells: true }
    } else {
        Oriented { problem: SelectionProblem { rows: pairs, cols: n, m: d }, rows_are_cells: false }
    }
}

impl Oriented {
    /// Translates a row selection into the `(B, U)` witness.
    fn witness(&self, sel: &[bool], pairs: &[(usize, usize, f64)]) -> (Vec<(usize, usize)>, Vec<usize>) {
        let sums = self.problem.column_sums(sel);
        let chosen: Vec<usize> = (0..sel.len()).filter(|&i| sel[i]).collect();
        let completed: Vec<usize> = (0..sums.len()).filter(|&c| sums[c] > 0.0).collect();
        let (b, u) = if self.rows_are_cells { (completed, chosen) } else { (chosen, completed) };
        (b.into_iter().map(|p| (pairs[p].0, pairs[p].1)).collect(), u)
    }
}

fn spins_of(w: u32, q: usize) -> Vec<usize> {
    (0..q).filter(|o| w >> o & 1 == 1).collect()
}

/// The inner supremum of the strong cut distance for a fixed coupling.
///
/// Exact mode enumerates the smaller of the two sides (cells or positive atom
/// pairs) and closes the other in form; it requires that side to have at most
/// [`EXACT_SIDE_CAP`] elements. Alternating mode is a lower bound.
pub fn cut_sup(gamma: &Coupling, mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, mode: SupMode, seed: u64) -> Result<CutSup> {
    check_compatible(mu, nu)?;
    gamma.validate(mu, nu)?;
    let pairs = gamma.positive_pairs();
    let n = mu.n;
    if mode == SupMode::Exact && n.min(pairs.len()) > EXACT_SIDE_CAP {
        return Err(Error::SizeCap(format!(
            "exact cut supremum needs min(n, positive pairs) <= {EXACT_SIDE_CAP}, got n = {n}, pairs = {}",
            pairs.len()
        )));
    }
    let mut best = CutSup { value: 0.0, pairs: Vec::new(), cells: Vec::new(), spins: Vec::new(), exact: mode == SupMode::Exact };
    for (k, w) in spin_sets(mu.q).into_iter().enumerate() {
        let d = pair_matrix(&pairs, mu, nu, w);
        let o = orient(d, pairs.len(), n, n <= pairs.len());
        let (val, sel) = match mode {
            SupMode::Exact => o.problem.exact(),
            SupMode::Alternating => o.problem.alternating(ALTERNATING_RESTARTS, derive_seed(seed, "cut_spin_set", k as u64)),
        };
        if val > best.value {
            let (b, u) = o.witness(&sel, &pairs);
            best = CutSup { value: val, pairs: b, cells: u, spins: spins_of(w, mu.q), exact: best.exact };
        }
    }
    Ok(best)
}

/// A certified upper bound on the inner supremum by branch and bound, with
/// `incumbent` as a known lower bound. Returns `(upper, complete)`.
pub fn cut_sup_upper_bound(
    gamma: &Coupling,
    mu: &EmbeddedMeasure,
    nu: &EmbeddedMeasure,
    incumbent: f64,
    node_budget: usize,
) -> Result<(f64, bool)> {
    check_compatible(mu, nu)?;
    gamma.validate(mu, nu)?;
    let pairs = gamma.positive_pairs();
    let n = mu.n;
    let mut upper = incumbent;
    let mut complete = true;
    for w in spin_sets(mu.q) {
        let o = orient(pair_matrix(&pairs, mu, nu, w), pairs.len(), n, n <= pairs.len());
        let (ub, done) = if o.problem.rows <= EXACT_SIDE_CAP {
            (o.problem.exact().0, true)
        } else {
            o.problem.upper_bound(incumbent, node_budget)
        };
        upper = upper.max(ub);
        complete &= done;
    }
    Ok((upper, complete))
}

/// A certified upper bound on the inner supremum at a block-structured
/// coupling: `col_blocks[j]` lists the rows coupled to column `j` only.
///
/// By the triangle inequality the supremum is at most the sum over squares
/// `row_cells[i] × col_blocks[j]` of each square's own supremum, and each of
/// those is a small selection problem.
pub fn cut_sup_upper_bound_blocks(
    gamma: &Coupling,
    mu: &EmbeddedMeasure,
    nu: &EmbeddedMeasure,
    cell_blocks: &[Vec<usize>],
    col_blocks: &[Vec<usize>],
    node_budget: usize,
) -> Result<f64> {
    check_compatible(mu, nu)?;
    gamma.validate(mu, nu)?;
    if col_blocks.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: nu.len(), got: col_blocks.len() });
    }
    let n = mu.n;
    let mut total = 0.0;
    for (j, rows) in col_blocks.iter().enumerate() {
        let pairs: Vec<(usize, usize, f64)> =
            rows.iter().map(|&a| (a, j, gamma.get(a, j))).filter(|p| p.2 > POSITIVE).collect();
        if pairs.is_empty() {
            continue;
        }
        for cells in cell_blocks {
            let mut best: f64 = 0.0;
            for w in spin_sets(mu.q) {
                let mut d = Vec::with_capacity(pairs.len() * cells.len());
                for &(a, b, g) in &pairs {
                    for &x in cells {
                        let diff = subset_weight(mu.step(a, x), w) - subset_weight(nu.step(b, x), w);
                        d.push(g * diff / n as f64);
                    }
                }
                let o = orient(d, pairs.len(), cells.len(), cells.len() <= pairs.len());
                let ub = if o.problem.rows <= EXACT_SIDE_CAP {
                    o.problem.exact().0
                } else {
                    let (lb, _) = o.problem.alternating(4, 0);
                    o.problem.upper_bound(lb, node_budget).0
                };
                best = best.max(ub);
            }
            total += best;
        }
    }
    Ok(total)
}

/// Value of the functional `Σ_{p∈B} γ_p c_p(U, W)` with `B` all pairs of
/// positive `c_p`, as coefficients over the full `rows × cols` pair grid.
fn cut_row(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, cells: &[usize], spins: &[usize]) -> Vec<f64> {
    let w: u32 = spins.iter().map(|&o| 1u32 << o).sum();
    let n = mu.n as f64;
    let side = |m: &EmbeddedMeasure, i: usize| cells.iter().map(|&x| subset_weight(m.step(i, x), w)).sum::<f64>() / n;
    let a: Vec<f64> = (0..mu.len()).map(|i| side(mu, i)).collect();
    let b: Vec<f64> = (0..nu.len()).map(|j| side(nu, j)).collect();
    a.iter().flat_map(|ai| b.iter().map(move |bj| (ai - bj).max(0.0))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Exact,
    Heuristic,
}

/// Tuning for the heuristic strong distance.
#[derive(Clone, Debug)]
pub struct HeuristicOptions {
    pub seed: u64,
    /// Cutting-plane rounds (coupling LP followed by a cut search).
    pub rounds: usize,
    /// Couplings larger than this skip the LP and use the starting coupling.
    pub lp_pair_cap: usize,
    pub node_budget: usize,
    /// Extra starting coupling; evaluated before any LP round.
    pub hint: Option<Coupling>,
}

impl Default for HeuristicOptions {
    fn default() -> Self {
        HeuristicOptions { seed: 0, rounds: 30, lp_pair_cap: 4096, node_budget: 20_000, hint: None }
    }
}

/// Evidence for a strong cut distance value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrongCertificate {
    pub coupling: Coupling,
    /// The rectangle attaining the reported inner supremum at `coupling`.
    pub witness: CutSup,
    /// Certified upper bound on the distance: the inner supremum at `coupling`.
    pub upper_bound: f64,
    /// Certified lower bound: the LP value over the generated cuts.
    pub lower_bound: f64,
    /// Whether the inner supremum at `coupling` was computed exactly.
    pub inner_exact: bool,
    pub lp_rounds: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrongDistance {
    pub value: f64,
    pub certificate: StrongCertificate,
}

/// Coupling LP over the given cuts: minimise `t` subject to the marginals and
/// `functional · γ ≤ t` for every cut. Returns `(γ, t)`.
fn coupling_lp(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, cuts: &[Vec<f64>]) -> Result<(Coupling, f64)> {
    let (r, c) = (mu.len(), nu.len());
    let vars = r * c + 1;
    let mut lp = LinearProgram::new(vars);
    lp.objective[r * c] = 1.0;
    let mu_total: f64 = mu.atoms.iter().map(|a| a.weight).sum();
    let nu_total: f64 = nu.atoms.iter().map(|a| a.weight).sum();
    for i in 0..r {
        let mut row = vec![0.0; vars];
        row[i * c..(i + 1) * c].iter_mut().for_each(|v| *v = 1.0);
        lp.equalities.push((row, mu.weight(i) / mu_total));
    }
    for j in 0..c {
        let mut row = vec![0.0; vars];
        (0..r).for_each(|i| row[i * c + j] = 1.0);
        lp.equalities.push((row, nu.weight(j) / nu_total));
    }
    for cut in cuts {
        let mut row = cut.clone();
        row.push(-1.0);
        lp.upper_bounds.push((row, 0.0));
    }
    let sol = lp.solve()?;
    let mut weights = sol.x[..r * c].to_vec();
    // rescale to the measures' own marginals and clear round-off
    weights.iter_mut().for_each(|w| *w = w.max(0.0));
    let gamma = repair_marginals(weights, mu, nu);
    Ok((gamma, sol.x[r * c]))
}

/// Projects a nearly feasible matrix onto the exact marginals by a few rounds
/// of iterative proportional fitting.
fn repair_marginals(mut w: Vec<f64>, mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Coupling {
    let (r, c) = (mu.len(), nu.len());
    for _ in 0..50 {
        let mut worst: f64 = 0.0;
        for i in 0..r {
            let s: f64 = w[i * c..(i + 1) * c].iter().sum();
            worst = worst.max((s - mu.weight(i)).abs());
            if s > 0.0 {
                w[i * c..(i + 1) * c].iter_mut().for_each(|v| *v *= mu.weight(i) / s);
            }
        }
        for j in 0..c {
            let s: f64 = (0..r).map(|i| w[i * c + j]).sum();
            worst = worst.max((s - nu.weight(j)).abs());
            if s > 0.0 {
                (0..r).for_each(|i| w[i * c + j] *= nu.weight(j) / s);
            }
        }
        if worst < 1e-14 {
            break;
        }
    }
    Coupling { rows: r, cols: c, weights: w }
}

fn exact_within_caps(gamma: &Coupling, n: usize) -> bool {
    n.min(gamma.positive_pairs().len()) <= EXACT_SIDE_CAP
}

/// `Cut□(μ, ν)`, the strong cut distance.
///
/// Exact mode is a cutting-plane method: the coupling LP is solved over the
/// cuts found so far and the exact inner supremum at its solution supplies
/// the next cut, until the LP value matches the supremum. It requires
/// `n ≤ 20` or at most 20 atom pairs. Heuristic mode runs the same loop with
/// the alternating search and reports the best coupling found, with a
/// certified bracket in the certificate.
pub fn strong_cut_distance(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, mode: DistanceMode) -> Result<StrongDistance> {
    match mode {
        DistanceMode::Exact => strong_exact(mu, nu),
        DistanceMode::Heuristic => strong_heuristic(mu, nu, &HeuristicOptions::default()),
    }
}

fn strong_exact(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Result<StrongDistance> {
    check_compatible(mu, nu)?;
    if mu.n > EXACT_SIDE_CAP && mu.len() * nu.len() > EXACT_SIDE_CAP {
        return Err(Error::SizeCap(format!(
            "exact strong distance needs n <= {EXACT_SIDE_CAP} or at most {EXACT_SIDE_CAP} atom pairs (n = {}, pairs = {})",
            mu.n,
            mu.len() * nu.len()
        )));
    }
    if mu.len() == 1 || nu.len() == 1 {
        let gamma = Coupling::independent(mu, nu);
        let sup = cut_sup(&gamma, mu, nu, SupMode::Exact, 0)?;
        let v = sup.value;
        let certificate =
            StrongCertificate { coupling: gamma, witness: sup, upper_bound: v, lower_bound: v, inner_exact: true, lp_rounds: 0 };
        return Ok(StrongDistance { value: v, certificate });
    }
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(Coupling, CutSup)> = None;
    let mut lower: f64 = 0.0;
    for round in 1..=2000 {
        let (gamma, t) = coupling_lp(mu, nu, &cuts)?;
        lower = lower.max(t);
        let sup = cut_sup(&gamma, mu, nu, SupMode::Exact, 0)?;
        let cut = cut_row(mu, nu, &sup.cells, &sup.spins);
        let improved = best.as_ref().is_none_or(|(_, b)| sup.value < b.value);
        let gap = sup.value - t;
        let repeated = cuts.contains(&cut);
        if improved {
            best = Some((gamma, sup));
        }
        if gap <= 1e-11 || repeated {
            let (coupling, witness) = best.expect("at least one round");
            let value = witness.value;
            let certificate =
                StrongCertificate { coupling, witness, upper_bound: value, lower_bound: lower, inner_exact: true, lp_rounds: round };
            return Ok(StrongDistance { value, certificate });
        }
        cuts.push(cut);
    }
    Err(Error::Lp("cutting-plane method did not converge".into()))
}

/// Heuristic strong distance with explicit options (seed, hint coupling, budgets).
pub fn strong_cut_distance_heuristic(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, opts: &HeuristicOptions) -> Result<StrongDistance> {
    strong_heuristic(mu, nu, opts)
}

fn strong_heuristic(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, opts: &HeuristicOptions) -> Result<StrongDistance> {
    check_compatible(mu, nu)?;
    let n = mu.n;
    let inner = |gamma: &Coupling, k: u64| -> Result<CutSup> {
        if exact_within_caps(gamma, n) {
            cut_sup(gamma, mu, nu, SupMode::Exact, 0)
        } else {
            cut_sup(gamma, mu, nu, SupMode::Alternating, derive_seed(opts.seed, "heuristic_round", k))
        }
    };
    let mut candidates: Vec<(Coupling, CutSup)> = Vec::new();
    if let Some(h) = &opts.hint {
        h.validate(mu, nu)?;
        let s = inner(h, 0)?;
        candidates.push((h.clone(), s));
    }
    let mut lower: f64 = 0.0;
    let mut rounds = 0;
    if mu.len() == 1 || nu.len() == 1 {
        let g = Coupling::independent(mu, nu);
        let s = inner(&g, 0)?;
        candidates.push((g, s));
    } else if mu.len() * nu.len() <= opts.lp_pair_cap {
        let mut cuts: Vec<Vec<f64>> = Vec::new();
        if let Some((_, s)) = candidates.first() {
            cuts.push(cut_row(mu, nu, &s.cells, &s.spins));
        }
        for round in 1..=opts.rounds.max(1) {
            rounds = round;
            let (gamma, t) = coupling_lp(mu, nu, &cuts)?;
            lower = lower.max(t);
            let s = inner(&gamma, round as u64)?;
            let cut = cut_row(mu, nu, &s.cells, &s.spins);
            let stop = s.value - t <= 1e-11 || cuts.contains(&cut);
            candidates.push((gamma, s));
            if stop {
                break;
            }
            cuts.push(cut);
        }
    } else if candidates.is_empty() {
        let g = Coupling::independent(mu, nu);
        let s = inner(&g, 0)?;
        candidates.push((g, s));
    }
    let (coupling, witness) = candidates
        .into_iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("at least one candidate coupling");
    let (upper_bound, inner_exact) = if witness.exact {
        (witness.value, true)
    } else {
        cut_sup_upper_bound(&coupling, mu, nu, witness.value, opts.node_budget)?
    };
    let value = witness.value;
    let certificate = StrongCertificate { coupling, witness, upper_bound, lower_bound: lower, inner_exact, lp_rounds: rounds };
    Ok(StrongDistance { value, certificate })
}

/// Evidence for a weak cut distance value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakCertificate {
    /// `ν` is read through this map: cell `x` of `μ` faces cell `permutation[x]` of `ν`.
    pub permutation: Vec<usize>,
    pub strong: StrongCertificate,
    /// Whether every coordinate permutation was examined.
    pub all_permutations: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakDistance {
    pub value: f64,
    pub certificate: WeakCertificate,
}

/// `cut□(μ, ν)` with the rearrangement restricted to coordinate permutations.
///
/// Exact mode enumerates all permutations (`n ≤ 8`) with the exact strong
/// distance for each. Heuristic mode matches coordinates by their marginals,
/// improves by pairwise swaps and always considers the identity too.
pub fn weak_cut_distance(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, mode: DistanceMode) -> Result<WeakDistance> {
    check_compatible(mu, nu)?;
    let n = mu.n;
    match mode {
        DistanceMode::Exact => {
            if n > PERMUTATION_CAP {
                return Err(Error::SizeCap(format!("exact weak distance enumerates permutations only for n <= {PERMUTATION_CAP}")));
            }
            let mut best: Option<WeakDistance> = None;
            let mut seen = std::collections::HashSet::new();
            for perm in permutations(n) {
                let nu_s = nu.permuted(&perm)?;
                // permutations that leave ν unchanged give the same value
                if !seen.insert(canonical_atoms(&nu_s)) {
                    continue;
                }
                let d = strong_exact(mu, &nu_s)?;
                if best.as_ref().is_none_or(|b| d.value < b.value) {
                    best = Some(WeakDistance {
                        value: d.value,
                        certificate: WeakCertificate { permutation: perm, strong: d.certificate, all_permutations: true },
                    });
                }
            }
            Ok(best.expect("at least the identity"))
        }
        DistanceMode::Heuristic => weak_heuristic(mu, nu),
    }
}

fn canonical_atoms(m: &EmbeddedMeasure) -> Vec<Vec<u64>> {
    let mut v: Vec<Vec<u64>> = m
        .atoms
        .iter()
        .map(|a| std::iter::once(a.weight.to_bits()).chain(a.values.iter().map(|x| x.to_bits())).collect())
        .collect();
    v.sort();
    v
}

fn weak_heuristic(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Result<WeakDistance> {
    let n = mu.n;
    let eval = |perm: &[usize]| -> Result<StrongDistance> { strong_heuristic(mu, &nu.permuted(perm)?, &HeuristicOptions::default()) };
    let mu_m: Vec<Vec<f64>> = (0..n).map(|x| mu.marginal(x)).collect();
    let nu_m: Vec<Vec<f64>> = (0..n).map(|y| nu.marginal(y)).collect();
    let cost: Vec<Vec<f64>> = mu_m.iter().map(|a| nu_m.iter().map(|b| tv(a, b)).collect()).collect();
    let (_, matched) = hungarian(&cost);
    let identity: Vec<usize> = (0..n).collect();
    let mut best_perm = identity.clone();
    let mut best = eval(&identity)?;
    if matched != identity {
        let d = eval(&matched)?;
        if d.value < best.value {
            best = d;
            best_perm = matched;
        }
    }
    // first-improvement pairwise swaps, bounded number of evaluations
    let mut evaluations = 0;
    let limit = 200;
    let mut improved = true;
    while improved && evaluations < limit && best.value > 0.0 {
        improved = false;
        'outer: for a in 0..n {
            for b in a + 1..n {
                if evaluations >= limit {
                    break 'outer;
                }
                let mut p = best_perm.clone();
                p.swap(a, b);
                evaluations += 1;
                let d = eval(&p)?;
                if d.value < best.value - 1e-15 {
                    best = d;
                    best_perm = p;
                    improved = true;
                    break 'outer;
                }
            }
        }
    }
    Ok(WeakDistance {
        value: best.value,
        certificate: WeakCertificate { permutation: best_perm, strong: best.certificate, all_permutations: false },
    })
}

/// All permutations of `0..n` by Heap's algorithm.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// `αμ + (1−α)ν` with the atom lists concatenated.
pub fn mixture(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, alpha: f64) -> Result<EmbeddedMeasure> {
    check_compatible(mu, nu)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let scaled = |m: &EmbeddedMeasure, f: f64| -> Vec<Atom> {
        m.atoms.iter().map(|a| Atom { weight: a.weight * f, values: a.values.clone() }).collect()
    };
    let mut atoms = scaled(mu, alpha);
    atoms.extend(scaled(nu, 1.0 - alpha));
    Ok(EmbeddedMeasure { n: mu.n, q: mu.q, atoms })
}

/// `μ ⊗ ν` on `(Ω × Ω')^n`, pairing coordinates; spin `(a, b)` has index `a·|Ω'| + b`.
pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if mu.n() != nu.n() {
        return Err(Error::DimensionMismatch { expected: mu.n(), got: nu.n() });
    }
    let q2 = nu.q();
    let mut support = Vec::with_capacity(mu.len() * nu.len());
    for (s, ws) in mu.support() {
        for (t, wt) in nu.support() {
            let paired = s.0.iter().zip(&t.0).map(|(a, b)| a * q2 + b).collect();
            support.push((Assignment(paired), ws * wt));
        }
    }
    DiscreteMeasure::from_weights(mu.n(), mu.q() * q2, support)
}

/// `μ̂ × ν̂`: atom `(σ, τ)` has weight `μ(σ)ν(τ)` and cells `σ_x ⊗ τ_x`.
pub fn product_embedded(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Result<EmbeddedMeasure> {
    if mu.n != nu.n {
        return Err(Error::DimensionMismatch { expected: mu.n, got: nu.n });
    }
    let (q1, q2) = (mu.q, nu.q);
    let mut atoms = Vec::with_capacity(mu.len() * nu.len());
    for a in &mu.atoms {
        for b in &nu.atoms {
            let mut values = Vec::with_capacity(mu.n * q1 * q2);
            for x in 0..mu.n {
                for &pa in a.step(x, q1) {
                    values.extend(b.step(x, q2).iter().map(|pb| pa * pb));
                }
            }
            atoms.push(Atom { weight: a.weight * b.weight, values });
        }
    }
    Ok(EmbeddedMeasure { n: mu.n, q: q1 * q2, atoms })
}

/// The single-atom measure whose step function is `μ`'s cell-wise mean.
pub fn marginal_product(mu: &EmbeddedMeasure) -> EmbeddedMeasure {
    let values = (0..mu.n).flat_map(|x| mu.marginal(x)).collect();
    EmbeddedMeasure { n: mu.n, q: mu.q, atoms: vec![Atom { weight: 1.0, values }] }
}

/// A `k × k` Aldous–Hoover array: rows `σ_i ~ μ`, columns uniform points
/// `x_j ∈ [0,1)`, entries `A_ij ~ σ_i(x_j)`, all independent.
pub fn sample_ah_array(mu: &EmbeddedMeasure, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut rng = substream(seed, "ah_array", 0);
    let atoms = WeightedIndex::new(mu.atoms.iter().map(|a| a.weight)).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let rows: Vec<usize> = (0..k).map(|_| atoms.sample(&mut rng)).collect();
    let cols: Vec<usize> = (0..k).map(|_| ((rng.gen::<f64>() * mu.n as f64) as usize).min(mu.n - 1)).collect();
    let mut out = vec![vec![0; k]; k];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &x) in cols.iter().enumerate() {
            out[i][j] = sample_spin(mu.step(r, x), &mut rng);
        }
    }
    Ok(out)
}

fn sample_spin<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (o, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return o;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Joint law on `Ω^k` of the cells `xs` under `μ`, lexicographic with the first cell most significant.
pub fn cell_marginal(mu: &EmbeddedMeasure, xs: &[usize]) -> Vec<f64> {
    let q = mu.q;
    let size = q.pow(xs.len() as u32);
    let mut joint = vec![0.0; size];
    let mut buf = vec![0.0; size];
    for a in &mu.atoms {
        buf[0] = a.weight;
        let mut len = 1;
        for &x in xs {
            let s = a.step(x, q);
            for idx in (0..len).rev() {
                let v = buf[idx];
                for o in 0..q {
                    buf[idx * q + o] = v * s[o];
                }
            }
            len *= q;
        }
        joint.iter_mut().zip(&buf).for_each(|(j, b)| *j += b);
    }
    joint
}

/// `E ‖μ_{x_1..x_k} − ν_{x_1..x_k}‖_TV` over uniformly random distinct cells.
pub fn sampled_marginal_distance(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, k: usize, samples: usize, seed: u64) -> Result<Estimate> {
    check_compatible(mu, nu)?;
    if k == 0 || k > mu.n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={}", mu.n)));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if (mu.q as f64).powi(k as i32) > (1u64 << 22) as f64 {
        return Err(Error::SizeCap(format!("{}^{k} joint states", mu.q)));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, "sampled_marginal", s as u64);
            let xs = rand::seq::index::sample(&mut rng, mu.n, k).into_vec();
            tv(&cell_marginal(mu, &xs), &cell_marginal(nu, &xs))
        })
        .collect();
    Ok(Estimate::from_samples(&values))
}

/// `Be(1/2)^{⊗n}` replaced by `m` i.i.d. draws (duplicates merged): the
/// empirical surrogate used when the cube is too large to enumerate.
pub fn empirical_uniform_cube(n: usize, m: usize, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = substream(seed, "empirical_cube", n as u64);
    let mut counts: std::collections::BTreeMap<Vec<usize>, f64> = std::collections::BTreeMap::new();
    for _ in 0..m {
        let s: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        *counts.entry(s).or_default() += 1.0;
    }
    DiscreteMeasure::from_weights(n, 2, counts.into_iter().map(|(s, c)| (Assignment(s), c)).collect())
}

/// The constant step function `x ↦ p` as a single-atom measure.
pub fn constant_measure(n: usize, p: &SimplexPoint) -> EmbeddedMeasure {
    let values = (0..n).flat_map(|_| p.0.iter().copied()).collect();
    EmbeddedMeasure { n, q: p.q(), atoms: vec![Atom { weight: 1.0, values }] }
}

/// `½(p^{⊗n/2} ⊗ q^{⊗n/2} + q^{⊗n/2} ⊗ p^{⊗n/2})` with `p = Be(1/3)`, `q = Be(2/3)` on `{0,1}^n`.
pub fn two_block_measure(n: usize) -> Result<DiscreteMeasure> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("n = {n} must be even and at least 2")));
    }
    let (p, q) = (vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]);
    let half = n / 2;
    let first: Vec<Vec<f64>> = (0..n).map(|x| if x < half { p.clone() } else { q.clone() }).collect();
    let second: Vec<Vec<f64>> = (0..n).map(|x| if x < half { q.clone() } else { p.clone() }).collect();
    let a = DiscreteMeasure::product_of(2, &first)?;
    let b = DiscreteMeasure::product_of(2, &second)?;
    // both products enumerate the cube in the same order
    let support = a.support().iter().zip(b.support()).map(|((s, wa), (_, wb))| (s.clone(), 0.5 * (wa + wb))).collect();
    DiscreteMeasure::from_weights(n, 2, support)
}

/// The two-atom limit `½(δ_σ + δ_τ)` with `σ = p` on the first half, `q` on the
/// second, and `τ(x) = σ(1 − x)`, on `n` cells.
pub fn two_block_limit(n: usize) -> Result<EmbeddedMeasure> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("n = {n} must be even and at least 2")));
    }
    let p = SimplexPoint(vec![2.0 / 3.0, 1.0 / 3.0]);
    let q = SimplexPoint(vec![1.0 / 3.0, 2.0 / 3.0]);
    let sigma: Vec<SimplexPoint> = (0..n).map(|x| if x < n / 2 { p.clone() } else { q.clone() }).collect();
    let tau: Vec<SimplexPoint> = sigma.iter().rev().cloned().collect();
    EmbeddedMeasure::new(n, 2, vec![(0.5, sigma), (0.5, tau)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, n: usize, q: usize, atoms: usize) -> EmbeddedMeasure {
        let mut out = Vec::new();
        for _ in 0..atoms {
            let steps = (0..n)
                .map(|_| SimplexPoint::normalized((0..q).map(|_| rng.gen::<f64>() + 1e-3).collect()).unwrap())
                .collect();
            out.push((rng.gen::<f64>() + 0.1, steps));
        }
        let total: f64 = out.iter().map(|a| a.0).sum();
        out.iter_mut().for_each(|a| a.0 /= total);
        EmbeddedMeasure::new(n, q, out).unwrap()
    }

    fn brute_sup(gamma: &Coupling, mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> f64 {
        // enumerate U and W; B closes in form
        let n = mu.n;
        let mut best: f64 = 0.0;
        for w in spin_sets(mu.q) {
            for u in 0..(1u32 << n) {
                let cells: Vec<usize> = (0..n).filter(|x| u >> x & 1 == 1).collect();
                let row = cut_row(mu, nu, &cells, &spins_of(w, mu.q));
                best = best.max(row.iter().zip(gamma.weights()).map(|(a, b)| a * b).sum());
            }
        }
        best
    }

    #[test]
    fn embed_examples() {
        let pm = DiscreteMeasure::point_mass(2, Assignment(vec![1, 0])).unwrap();
        let e = embed(&pm);
        assert_eq!(e.len(), 1);
        assert_eq!(e.weight(0), 1.0);
        assert_eq!(e.step(0, 0), &[0.0, 1.0]);
        let uni = DiscreteMeasure::new(1, 2, vec![(Assignment(vec![0]), 0.5), (Assignment(vec![1]), 0.5)]).unwrap();
        let e = embed(&uni);
        assert_eq!(e.len(), 2);
        assert!(e.atoms().iter().all(|a| a.weight == 0.5));
    }

    #[test]
    fn cut_sup_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, 4, 3, 3);
        let s = cut_sup(&Coupling::identity(&mu), &mu, &mu, SupMode::Exact, 0).unwrap();
        assert_eq!(s.value, 0.0);
        let a = embed(&DiscreteMeasure::point_mass(2, Assignment(vec![0])).unwrap());
        let b = embed(&DiscreteMeasure::point_mass(2, Assignment(vec![1])).unwrap());
        let s = cut_sup(&Coupling::independent(&a, &b), &a, &b, SupMode::Exact, 0).unwrap();
        assert!((s.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_sup_matches_brute_force_in_both_orientations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..30 {
            let n = 1 + trial % 6;
            let mu = random_measure(&mut rng, n, 2 + trial % 2, 1 + trial % 4);
            let nu = random_measure(&mut rng, n, 2 + trial % 2, 1 + (trial / 2) % 4);
            let g = Coupling::independent(&mu, &nu);
            let s = cut_sup(&g, &mu, &nu, SupMode::Exact, 0).unwrap();
            let brute = brute_sup(&g, &mu, &nu);
            assert!((s.value - brute).abs() < 1e-12, "{} vs {brute}", s.value);
            // the witness reproduces the value
            let w = cut_row(&mu, &nu, &s.cells, &s.spins);
            let v: f64 = w.iter().zip(g.weights()).map(|(a, b)| a * b).sum();
            assert!((v - s.value).abs() < 1e-12);
            let alt = cut_sup(&g, &mu, &nu, SupMode::Alternating, trial as u64).unwrap();
            assert!(alt.value <= s.value + 1e-12);
            let (ub, complete) = cut_sup_upper_bound(&g, &mu, &nu, alt.value, 1000).unwrap();
            assert!(complete && (ub - s.value).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_and_bound_is_exact_when_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let rows = 12;
            let cols = 7;
            let m: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>() - 0.5).collect();
            let p = SelectionProblem { rows, cols, m };
            let (exact, _) = p.exact();
            let (ub, complete) = p.upper_bound(0.0, 1_000_000);
            assert!(complete);
            assert!((ub - exact).abs() < 1e-12);
            let (partial, _) = p.upper_bound(0.0, 5);
            assert!(partial >= exact - 1e-12);
        }
    }

    #[test]
    fn strong_distance_basics() {
        let a = embed(&DiscreteMeasure::point_mass(2, Assignment(vec![0])).unwrap());
        let b = embed(&DiscreteMeasure::point_mass(2, Assignment(vec![1])).unwrap());
        let d = strong_cut_distance(&a, &b, DistanceMode::Exact).unwrap();
        assert!((d.value - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = random_measure(&mut rng, 3, 2, 3);
        let d = strong_cut_distance(&mu, &mu, DistanceMode::Exact).unwrap();
        assert!(d.value < 1e-9);
        let h = strong_cut_distance(&mu, &mu, DistanceMode::Heuristic).unwrap();
        assert!(h.value < 1e-9);
    }

    #[test]
    fn exact_strong_is_symmetric_and_bracketed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mu = random_measure(&mut rng, 3, 2, 3);
            let nu = random_measure(&mut rng, 3, 2, 2);
            let a = strong_cut_distance(&mu, &nu, DistanceMode::Exact).unwrap();
            let b = strong_cut_distance(&nu, &mu, DistanceMode::Exact).unwrap();
            assert!((a.value - b.value).abs() < 1e-9);
            assert!(a.certificate.lower_bound <= a.value + 1e-12);
            // any coupling's supremum is an upper bound
            let ind = cut_sup(&Coupling::independent(&mu, &nu), &mu, &nu, SupMode::Exact, 0).unwrap();
            assert!(a.value <= ind.value + 1e-12);
            let h = strong_cut_distance(&mu, &nu, DistanceMode::Heuristic).unwrap();
            assert!(h.value >= a.value - 1e-9);
        }
    }

    #[test]
    fn mixture_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mu = random_measure(&mut rng, 3, 2, 2);
        let mix = mixture(&mu, &mu, 0.3).unwrap();
        assert!(strong_cut_distance(&mix, &mu, DistanceMode::Exact).unwrap().value < 1e-9);

        let s = DiscreteMeasure::point_mass(2, Assignment(vec![0, 1])).unwrap();
        let t = DiscreteMeasure::point_mass(3, Assignment(vec![2, 1])).unwrap();
        let p = product(&s, &t).unwrap();
        assert_eq!(p.q(), 6);
        assert_eq!(p.support(), &[(Assignment(vec![2, 4]), 1.0)]);

        let a = DiscreteMeasure::product_of(2, &[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let b = DiscreteMeasure::product_of(3, &[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0]]).unwrap();
        let lhs = embed(&product(&a, &b).unwrap());
        let rhs = product_embedded(&embed(&a), &embed(&b)).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn weak_distance_of_permuted_copy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mu = random_measure(&mut rng, 4, 2, 2);
        let nu = mu.permuted(&[2, 0, 3, 1]).unwrap();
        assert!(strong_cut_distance(&mu, &nu, DistanceMode::Exact).unwrap().value > 1e-3);
        let w = weak_cut_distance(&mu, &nu, DistanceMode::Exact).unwrap();
        assert!(w.value < 1e-9);
        let h = weak_cut_distance(&mu, &nu, DistanceMode::Heuristic).unwrap();
        assert!(h.value < 1e-9);
    }

    #[test]
    fn permutations_are_complete() {
        let ps = permutations(4);
        assert_eq!(ps.len(), 24);
        let set: std::collections::HashSet<_> = ps.into_iter().collect();
        assert_eq!(set.len(), 24);
    }

    #[test]
    fn sampled_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mu = random_measure(&mut rng, 5, 2, 3);
        let e = sampled_marginal_distance(&mu, &mu, 2, 50, 1).unwrap();
        assert_eq!(e.value, 0.0);
        let prod = embed(&DiscreteMeasure::product_of(2, &[vec![0.1, 0.9], vec![0.5, 0.5], vec![0.7, 0.3]]).unwrap());
        let e = sampled_marginal_distance(&prod, &marginal_product(&prod), 3, 20, 2).unwrap();
        assert!(e.value < 1e-15);
        // every pair of the two-block measure sits at distance 1/18
        let tb = embed(&two_block_measure(6).unwrap());
        let e = sampled_marginal_distance(&tb, &marginal_product(&tb), 2, 200, 3).unwrap();
        assert!((e.value - 1.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn ah_array_shape_and_constant_case() {
        let p = SimplexPoint(vec![0.0, 1.0]);
        let m = constant_measure(5, &p);
        let a = sample_ah_array(&m, 4, 9).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.iter().flatten().all(|&v| v == 1));
    }

    #[test]
    fn json_round_trip() {
        let m = two_block_limit(4).unwrap();
        let back = EmbeddedMeasure::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let d = embed(&DiscreteMeasure::point_mass(2, Assignment(vec![1, 0])).unwrap());
        let from_values = EmbeddedMeasure::from_json(r#"{"n":2,"alphabet":["0","1"],"atoms":[{"weight":1.0,"values":[1,0]}]}"#).unwrap();
        assert_eq!(d, from_values);
    }
}
