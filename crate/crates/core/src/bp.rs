//! Belief Propagation: the message algebra and synchronous damped BP on
//! finite factor graphs.

use crate::error::{Error, Result};
use crate::model::{FactorGraph, WeightFunction};
use serde::{Deserialize, Serialize};

/// A probability vector over `Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(pub Vec<f64>);

impl SimplexPoint {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidSimplexPoint("empty vector".into()));
        }
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidSimplexPoint(format!("{p:?} has a negative or non-finite entry")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidSimplexPoint(format!("entries sum to {s}")));
        }
        Ok(SimplexPoint(p))
    }

    /// Normalises a non-negative vector with positive sum.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        let s: f64 = p.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::DegenerateProduct);
        }
        p.iter_mut().for_each(|x| *x /= s);
        Ok(SimplexPoint(p))
    }

    pub fn uniform(q: usize) -> Self {
        SimplexPoint(vec![1.0 / q as f64; q])
    }

    pub fn point_mass(q: usize, spin: usize) -> Self {
        let mut p = vec![0.0; q];
        p[spin] = 1.0;
        SimplexPoint(p)
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Total variation distance (half the ℓ1 norm).
    pub fn tv(&self, other: &SimplexPoint) -> f64 {
        tv(&self.0, &other.0)
    }
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Unnormalised `Σ_{σ: σ_slot = ω} ψ(σ) Π_{i ≠ slot} incoming_i(σ_i)` into `out`.
pub(crate) fn constraint_message_raw(wf: &WeightFunction, q: usize, slot: usize, incoming: &[&[f64]], out: &mut [f64]) {
    let k = wf.arity;
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut sigma = vec![0usize; k];
    for (idx, &w) in wf.table.iter().enumerate() {
        crate::model::decode_index(idx, q, &mut sigma);
        let mut p = w;
        let mut m = 0;
        for (i, &s) in sigma.iter().enumerate() {
            if i == slot {
                continue;
            }
            p *= incoming[m][s];
            m += 1;
        }
        out[sigma[slot]] += p;
    }
}

/// `η̂(ω) ∝ Σ_{σ: σ_slot = ω} ψ(σ) Π_y incoming_y(σ_y)`.
///
/// `incoming` lists the messages of the other `k − 1` slots in increasing slot order.
pub fn bp_constraint_message(psi: &WeightFunction, slot: usize, incoming: &[SimplexPoint]) -> Result<SimplexPoint> {
    let k = psi.arity;
    if slot >= k {
        return Err(Error::SlotOutOfRange { slot, arity: k });
    }
    if incoming.len() != k - 1 {
        return Err(Error::ArityMismatch { expected: k - 1, got: incoming.len() });
    }
    let q = psi.alphabet_size();
    if let Some(m) = incoming.iter().find(|m| m.q() != q) {
        return Err(Error::DimensionMismatch { expected: q, got: m.q() });
    }
    let refs: Vec<&[f64]> = incoming.iter().map(|m| m.as_slice()).collect();
    let mut out = vec![0.0; q];
    constraint_message_raw(psi, q, slot, &refs, &mut out);
    SimplexPoint::normalized(out)
}

/// `η(ω) ∝ Π_a η̂_a(ω)` computed in log space into `out`; uniform for no messages.
pub(crate) fn combine_raw<'a>(q: usize, messages: impl IntoIterator<Item = &'a [f64]>, out: &mut [f64]) -> Result<()> {
    out.iter_mut().for_each(|x| *x = 0.0);
    for m in messages {
        for (o, &p) in out.iter_mut().zip(m) {
            *o += p.ln();
        }
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegenerateProduct);
    }
    let mut s = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        s += *o;
    }
    out.iter_mut().for_each(|x| *x /= s);
    debug_assert!(q == out.len());
    Ok(())
}

/// `η(ω) ∝ Π_a η̂_a(ω)` over `q` spins; the empty product is uniform.
pub fn bp_combine(q: usize, messages: &[SimplexPoint]) -> Result<SimplexPoint> {
    if let Some(m) = messages.iter().find(|m| m.q() != q) {
        return Err(Error::DimensionMismatch { expected: q, got: m.q() });
    }
    let mut out = vec![0.0; q];
    combine_raw(q, messages.iter().map(|m| m.as_slice()), &mut out)?;
    Ok(SimplexPoint(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { damping: 0.5, tol: 1e-10, max_iters: 10_000 }
    }
}

/// Messages on every directed edge, indexed by `(constraint, slot)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageSet {
    /// `to_constraint[a][j]`: variable `∂(a, j)` to constraint `a`.
    pub to_constraint: Vec<Vec<SimplexPoint>>,
    /// `to_variable[a][j]`: constraint `a` to variable `∂(a, j)`.
    pub to_variable: Vec<Vec<SimplexPoint>>,
}

impl MessageSet {
    pub fn uniform(g: &FactorGraph) -> Self {
        let u = SimplexPoint::uniform(g.q());
        let per = |c: &crate::model::Constraint| vec![u.clone(); c.neighbors.len()];
        MessageSet {
            to_constraint: g.constraints.iter().map(per).collect(),
            to_variable: g.constraints.iter().map(per).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpResult {
    pub messages: MessageSet,
    pub marginals: Vec<SimplexPoint>,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Synchronous damped BP from uniform messages.
///
/// One iteration recomputes every constraint-to-variable message from the
/// current variable-to-constraint messages, then every variable-to-constraint
/// message from the new ones; the damped update is
/// `m ← (1 − damping)·new + damping·old`. Stops once the ℓ∞ change over all
/// messages is at most `tol`.
pub fn bp_run(g: &FactorGraph, config: &BpConfig) -> Result<BpResult> {
    if !(0.0..1.0).contains(&config.damping) {
        return Err(Error::InvalidParameter(format!("damping = {} must lie in [0, 1)", config.damping)));
    }
    let q = g.q();
    let adj = g.adjacency();
    let mut msgs = MessageSet::uniform(g);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut buf = vec![0.0; q];
    let d = config.damping;

    while iterations < config.max_iters {
        iterations += 1;
        residual = 0.0;
        let old_to_var = msgs.to_variable.clone();
        for (a, c) in g.constraints.iter().enumerate() {
            let wf = &g.weight_functions[c.wf];
            for j in 0..c.neighbors.len() {
                let incoming: Vec<&[f64]> =
                    (0..c.neighbors.len()).filter(|&i| i != j).map(|i| msgs.to_constraint[a][i].as_slice()).collect();
                constraint_message_raw(wf, q, j, &incoming, &mut buf);
                let s: f64 = buf.iter().sum();
                let old = &old_to_var[a][j].0;
                let new: Vec<f64> = buf.iter().zip(old).map(|(x, o)| (1.0 - d) * x / s + d * o).collect();
                residual = f64::max(residual, max_abs_diff(&new, old));
                msgs.to_variable[a][j] = SimplexPoint(new);
            }
        }
        for inc in &adj {
            for &(a, j) in inc {
                let others = inc.iter().filter(|&&e| e != (a, j)).map(|&(b, i)| msgs.to_variable[b][i].as_slice());
                combine_raw(q, others, &mut buf)?;
                let old = &msgs.to_constraint[a][j].0;
                let new: Vec<f64> = buf.iter().zip(old).map(|(x, o)| (1.0 - d) * x + d * o).collect();
                residual = f64::max(residual, max_abs_diff(&new, old));
                msgs.to_constraint[a][j] = SimplexPoint(new);
            }
        }
        if residual <= config.tol {
            break;
        }
    }
    let marginals = marginals_from(g, &adj, &msgs)?;
    Ok(BpResult { messages: msgs, marginals, converged: residual <= config.tol, residual, iterations })
}

fn marginals_from(g: &FactorGraph, adj: &[Vec<(usize, usize)>], msgs: &MessageSet) -> Result<Vec<SimplexPoint>> {
    let q = g.q();
    adj.iter()
        .map(|inc| {
            let mut out = vec![0.0; q];
            combine_raw(q, inc.iter().map(|&(a, j)| msgs.to_variable[a][j].as_slice()), &mut out)?;
            Ok(SimplexPoint(out))
        })
        .collect()
}

/// Bethe approximation to `ln Z` from a message set:
/// `Σ_x ln Σ_ω Π_a η̂_{a→x}(ω) + Σ_a ln Σ_σ ψ_a(σ) Π_j η_{j→a}(σ_j) − Σ_{(a,j)} ln Σ_ω η_{j→a}(ω) η̂_{a→j}(ω)`.
/// Exact on forests at the BP fixed point.
pub fn bethe_log_z(g: &FactorGraph, msgs: &MessageSet) -> f64 {
    let q = g.q();
    let mut total = 0.0;
    for inc in g.adjacency() {
        let mut s = 0.0;
        for w in 0..q {
            s += inc.iter().map(|&(a, j)| msgs.to_variable[a][j].0[w]).product::<f64>();
        }
        total += s.ln();
    }
    let mut sigma = Vec::new();
    for (a, c) in g.constraints.iter().enumerate() {
        let wf = &g.weight_functions[c.wf];
        sigma.resize(c.neighbors.len(), 0);
        let mut s = 0.0;
        for (idx, &w) in wf.table.iter().enumerate() {
            crate::model::decode_index(idx, q, &mut sigma);
            s += w * sigma.iter().enumerate().map(|(j, &x)| msgs.to_constraint[a][j].0[x]).product::<f64>();
        }
        total += s.ln();
        for j in 0..c.neighbors.len() {
            let e: f64 = (0..q).map(|w| msgs.to_constraint[a][j].0[w] * msgs.to_variable[a][j].0[w]).sum();
            total -= e.ln();
        }
    }
    total
}
