//! Finite rooted factor trees: Galton–Watson sampling, truncation,
//! neighbourhood extraction and canonical isomorphism codes.
//!
//! A tree is an owned recursive structure, so it is acyclic by construction.
//! Each constraint node records the slot its parent variable occupies; its
//! children fill the remaining slots in increasing slot order.

use crate::error::{Error, Result};
use crate::model::{Constraint, FactorGraph, SpinAlphabet, WeightFunction};
use crate::random::ModelSpec;
use crate::rng::substream;
use crate::stats::poisson;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarNode {
    pub children: Vec<ConstraintNode>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintNode {
    pub wf: usize,
    pub parent_slot: usize,
    pub children: Vec<VarNode>,
}

impl ConstraintNode {
    pub fn arity(&self) -> usize {
        self.children.len() + 1
    }

    /// Slot occupied by `children[i]`.
    pub fn child_slot(&self, i: usize) -> usize {
        if i < self.parent_slot {
            i
        } else {
            i + 1
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedTree {
    pub root: VarNode,
}

impl VarNode {
    fn depth(&self) -> usize {
        self.children.iter().flat_map(|a| &a.children).map(|v| 1 + v.depth()).max().unwrap_or(0)
    }

    fn count(&self) -> (usize, usize) {
        let mut vars = 1;
        let mut cons = 0;
        for a in &self.children {
            cons += 1;
            for v in &a.children {
                let (x, y) = v.count();
                vars += x;
                cons += y;
            }
        }
        (vars, cons)
    }

    fn truncated(&self, ell: usize) -> VarNode {
        if ell == 0 {
            return VarNode::default();
        }
        VarNode {
            children: self
                .children
                .iter()
                .map(|a| ConstraintNode {
                    wf: a.wf,
                    parent_slot: a.parent_slot,
                    children: a.children.iter().map(|v| v.truncated(ell - 1)).collect(),
                })
                .collect(),
        }
    }
}

impl RootedTree {
    pub fn root_only() -> Self {
        RootedTree::default()
    }

    /// Depth in variable levels.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn variable_count(&self) -> usize {
        self.root.count().0
    }

    pub fn constraint_count(&self) -> usize {
        self.root.count().1
    }

    /// Checks weight ids and arities against `wfs`.
    pub fn validate(&self, wfs: &[WeightFunction]) -> Result<()> {
        fn go(v: &VarNode, wfs: &[WeightFunction]) -> Result<()> {
            for a in &v.children {
                let wf = wfs.get(a.wf).ok_or_else(|| Error::InvalidGraph(format!("tree uses unknown weight id {}", a.wf)))?;
                if a.arity() != wf.arity {
                    return Err(Error::ArityMismatch { expected: wf.arity - 1, got: a.children.len() });
                }
                if a.parent_slot >= wf.arity {
                    return Err(Error::SlotOutOfRange { slot: a.parent_slot, arity: wf.arity });
                }
                for c in &a.children {
                    go(c, wfs)?;
                }
            }
            Ok(())
        }
        go(&self.root, wfs)
    }

    /// The tree as a factor graph; the root is variable 0 and variables are
    /// numbered in depth-first order.
    pub fn to_factor_graph(&self, alphabet: &SpinAlphabet, wfs: &[WeightFunction]) -> Result<FactorGraph> {
        self.validate(wfs)?;
        fn go(v: &VarNode, id: usize, next: &mut usize, out: &mut Vec<Constraint>) {
            for a in &v.children {
                let mut neighbors = vec![0; a.arity()];
                neighbors[a.parent_slot] = id;
                let mut kids = Vec::with_capacity(a.children.len());
                for (i, _) in a.children.iter().enumerate() {
                    let cid = *next;
                    *next += 1;
                    neighbors[a.child_slot(i)] = cid;
                    kids.push(cid);
                }
                out.push(Constraint { wf: a.wf, neighbors });
                for (c, cid) in a.children.iter().zip(kids) {
                    go(c, cid, next, out);
                }
            }
        }
        let mut constraints = Vec::new();
        let mut next = 1;
        go(&self.root, 0, &mut next, &mut constraints);
        FactorGraph::new(alphabet.clone(), wfs.to_vec(), constraints, next)
    }
}

/// `∂^ℓ t`: drops every node beyond variable depth `ell`.
pub fn truncate(t: &RootedTree, ell: usize) -> RootedTree {
    RootedTree { root: t.root.truncated(ell) }
}

/// Samples a depth-`ell` prefix of the Galton–Watson factor tree of `spec`.
///
/// Every variable above depth `ell` receives `Po(k_ψ ρ_ψ)` constraint children
/// per family `ψ`; each child gets a uniform parent slot and `k_ψ − 1` fresh
/// variable children.
pub fn sample_gw_tree(spec: &ModelSpec, ell: usize, seed: u64) -> RootedTree {
    let mut rng = substream(seed, "gw_tree", ell as u64);
    RootedTree { root: sample_var(spec, ell, &mut rng) }
}

pub(crate) fn sample_var<R: Rng + ?Sized>(spec: &ModelSpec, remaining: usize, rng: &mut R) -> VarNode {
    if remaining == 0 {
        return VarNode::default();
    }
    let mut children = Vec::new();
    for (wf, fam) in spec.families.iter().enumerate() {
        let k = fam.wf.arity;
        let d = poisson(rng, k as f64 * fam.rho);
        for _ in 0..d {
            let parent_slot = rng.gen_range(0..k);
            let kids = (0..k - 1).map(|_| sample_var(spec, remaining - 1, rng)).collect();
            children.push(ConstraintNode { wf, parent_slot, children: kids });
        }
    }
    VarNode { children }
}

/// Byte string identifying a rooted tree up to root-, weight- and
/// slot-preserving isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CanonicalCode(pub Vec<u8>);

impl CanonicalCode {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        if !s.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter("hex code has odd length".into()));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16))
            .collect::<std::result::Result<Vec<u8>, _>>()
            .map(CanonicalCode)
            .map_err(|e| Error::InvalidParameter(format!("bad hex code: {e}")))
    }
}

impl fmt::Display for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<CanonicalCode> for String {
    fn from(c: CanonicalCode) -> String {
        c.to_hex()
    }
}

impl TryFrom<String> for CanonicalCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        CanonicalCode::from_hex(&s)
    }
}

fn push_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u32).to_be_bytes());
}

fn push_block(out: &mut Vec<u8>, block: &[u8]) {
    push_u32(out, block.len());
    out.extend_from_slice(block);
}

fn var_code(v: &VarNode) -> Vec<u8> {
    let mut kids: Vec<Vec<u8>> = v.children.iter().map(constraint_code).collect();
    kids.sort_unstable();
    let mut out = vec![b'V'];
    push_u32(&mut out, kids.len());
    for k in &kids {
        push_block(&mut out, k);
    }
    out
}

fn constraint_code(a: &ConstraintNode) -> Vec<u8> {
    let mut out = vec![b'C'];
    push_u32(&mut out, a.wf);
    push_u32(&mut out, a.parent_slot);
    push_u32(&mut out, a.children.len());
    for c in &a.children {
        push_block(&mut out, &var_code(c));
    }
    out
}

/// Variables hash the sorted multiset of their children's codes; constraints
/// hash `(weight id, parent slot, child codes in slot order)`.
pub fn canonical_code(t: &RootedTree) -> CanonicalCode {
    CanonicalCode(var_code(&t.root))
}

/// The depth-`ℓ` neighbourhood of a variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Neighborhood {
    Tree(RootedTree),
    /// The distance-`2ℓ` ball contains a cycle (including a repeated neighbour).
    Cyclic,
}

impl Neighborhood {
    pub fn tree(&self) -> Option<&RootedTree> {
        match self {
            Neighborhood::Tree(t) => Some(t),
            Neighborhood::Cyclic => None,
        }
    }
}

/// Breadth-first extraction of the ball of radius `2ℓ` around `x`.
pub fn neighborhood(g: &FactorGraph, x: usize, ell: usize) -> Result<Neighborhood> {
    neighborhood_with_adjacency(g, &g.adjacency(), x, ell)
}

/// [`neighborhood`] with a precomputed [`FactorGraph::adjacency`].
pub fn neighborhood_with_adjacency(
    g: &FactorGraph,
    adj: &[Vec<(usize, usize)>],
    x: usize,
    ell: usize,
) -> Result<Neighborhood> {
    if x >= g.n {
        return Err(Error::UnknownVariable(x));
    }
    // arena: variable records (graph id, depth, parent edge) and constraint records
    struct VarRec {
        depth: usize,
        parent: Option<(usize, usize)>,
        kids: Vec<usize>,
    }
    struct ConRec {
        a: usize,
        parent_slot: usize,
        kids: Vec<usize>,
    }
    let mut var_seen = vec![false; g.n];
    let mut con_seen = vec![false; g.constraints.len()];
    let mut vars = vec![VarRec { depth: 0, parent: None, kids: Vec::new() }];
    let mut ids = vec![x];
    let mut cons: Vec<ConRec> = Vec::new();
    var_seen[x] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(vi) = queue.pop_front() {
        if vars[vi].depth >= ell {
            continue;
        }
        let v = ids[vi];
        for &(a, slot) in &adj[v] {
            if vars[vi].parent == Some((a, slot)) {
                continue;
            }
            if con_seen[a] {
                return Ok(Neighborhood::Cyclic);
            }
            con_seen[a] = true;
            let ci = cons.len();
            cons.push(ConRec { a, parent_slot: slot, kids: Vec::new() });
            vars[vi].kids.push(ci);
            for (i, &y) in g.constraints[a].neighbors.iter().enumerate() {
                if i == slot {
                    continue;
                }
                if var_seen[y] {
                    return Ok(Neighborhood::Cyclic);
                }
                var_seen[y] = true;
                let yi = vars.len();
                vars.push(VarRec { depth: vars[vi].depth + 1, parent: Some((a, i)), kids: Vec::new() });
                ids.push(y);
                cons[ci].kids.push(yi);
                queue.push_back(yi);
            }
        }
    }
    fn build(vi: usize, vars: &[VarRec], cons: &[ConRec], g: &FactorGraph) -> VarNode {
        VarNode {
            children: vars[vi]
                .kids
                .iter()
                .map(|&ci| ConstraintNode {
                    wf: g.constraints[cons[ci].a].wf,
                    parent_slot: cons[ci].parent_slot,
                    children: cons[ci].kids.iter().map(|&yi| build(yi, vars, cons, g)).collect(),
                })
                .collect(),
        }
    }
    Ok(Neighborhood::Tree(RootedTree { root: build(0, &vars, &cons, g) }))
}
