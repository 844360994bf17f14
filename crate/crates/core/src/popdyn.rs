//! The `X_ℓ` tree recursion and population dynamics for the distributional
//! BP fixed point on the Galton–Watson factor tree.

use crate::bp::{combine_raw, constraint_message_raw, SimplexPoint};
use crate::error::{Error, Result};
use crate::model::WeightFunction;
use crate::random::ModelSpec;
use crate::rng::{derive_seed, substream};
use crate::stats::{poisson, Estimate};
use crate::tree::{sample_var, truncate, RootedTree, VarNode};
use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// An empirical distribution on `P(Ω)`: `N` equally weighted simplex points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub points: Vec<SimplexPoint>,
    #[serde(default)]
    pub generation: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PopulationJson {
    Full(Population),
    Bare(Vec<Vec<f64>>),
}

impl Population {
    pub fn new(points: Vec<SimplexPoint>) -> Result<Self> {
        let pop = Population { points, generation: 0 };
        pop.validate()?;
        Ok(pop)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.points.first().ok_or_else(|| Error::InvalidParameter("population must be non-empty".into()))?;
        for (i, p) in self.points.iter().enumerate() {
            SimplexPoint::new(p.0.clone())
                .map_err(|e| Error::InvalidSimplexPoint(format!("points[{i}]: {e}")))?;
            if p.q() != first.q() {
                return Err(Error::DimensionMismatch { expected: first.q(), got: p.q() });
            }
        }
        Ok(())
    }

    /// `n` copies of the uniform point.
    pub fn uniform(q: usize, n: usize) -> Self {
        Population { points: vec![SimplexPoint::uniform(q); n.max(1)], generation: 0 }
    }

    /// `(1 − strength)·uniform + strength·Dirichlet(1, …, 1)`, i.i.d. per member.
    pub fn jittered(q: usize, n: usize, strength: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidParameter(format!("jitter strength {strength} must lie in [0, 1]")));
        }
        if q < 2 || strength == 0.0 {
            return Ok(Self::uniform(q, n));
        }
        let dir = Dirichlet::new(&vec![1.0; q]).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = substream(seed, "population_jitter", 0);
        let points = (0..n.max(1))
            .map(|_| {
                let d: Vec<f64> = dir.sample(&mut rng);
                let p = d.iter().map(|x| (1.0 - strength) / q as f64 + strength * x).collect();
                SimplexPoint::normalized(p).expect("convex combination of simplex points")
            })
            .collect();
        Ok(Population { points, generation: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn q(&self) -> usize {
        self.points[0].q()
    }

    /// Average of the members, `∫ η dν`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.q()];
        for p in &self.points {
            for (a, b) in m.iter_mut().zip(&p.0) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|x| *x /= self.len() as f64);
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_17(self)?)
    }

    /// Accepts either `{points, generation}` or a bare array of vectors.
    pub fn from_json(s: &str) -> Result<Self> {
        let pop = match serde_json::from_str(s)? {
            PopulationJson::Full(p) => p,
            PopulationJson::Bare(v) => Population { points: v.into_iter().map(SimplexPoint).collect(), generation: 0 },
        };
        pop.validate()?;
        Ok(pop)
    }
}

fn draw<'a, R: Rng + ?Sized>(boundary: &'a [SimplexPoint], rng: &mut R) -> &'a [f64] {
    boundary[rng.gen_range(0..boundary.len())].as_slice()
}

/// Message from `v` towards its parent: variables at depth `remaining == 0`
/// draw from `boundary`, all others combine their children's constraint messages.
fn upward<R: Rng + ?Sized>(
    v: &VarNode,
    remaining: usize,
    wfs: &[WeightFunction],
    boundary: &[SimplexPoint],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let q = boundary[0].q();
    if remaining == 0 {
        return Ok(draw(boundary, rng).to_vec());
    }
    let mut hats = Vec::with_capacity(v.children.len());
    for a in &v.children {
        let wf = wfs.get(a.wf).ok_or_else(|| Error::InvalidGraph(format!("tree uses unknown weight id {}", a.wf)))?;
        if wf.arity != a.arity() {
            return Err(Error::ArityMismatch { expected: wf.arity - 1, got: a.children.len() });
        }
        let incoming: Vec<Vec<f64>> =
            a.children.iter().map(|c| upward(c, remaining - 1, wfs, boundary, rng)).collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = incoming.iter().map(|m| m.as_slice()).collect();
        let mut hat = vec![0.0; q];
        constraint_message_raw(wf, q, a.parent_slot, &refs, &mut hat);
        let s: f64 = hat.iter().sum();
        hat.iter_mut().for_each(|x| *x /= s);
        hats.push(hat);
    }
    let mut out = vec![0.0; q];
    combine_raw(q, hats.iter().map(|h| h.as_slice()), &mut out)?;
    Ok(out)
}

/// One sample of `X_ℓ(T, τ)`: the variables at depth `ell` of `t` receive
/// i.i.d. draws from `boundary` and messages are propagated to the root.
/// Nodes deeper than `ell` are ignored.
pub fn tree_root_marginal(
    t: &RootedTree,
    ell: usize,
    wfs: &[WeightFunction],
    boundary: &Population,
    seed: u64,
) -> Result<SimplexPoint> {
    boundary.validate()?;
    let mut rng = substream(seed, "tree_root_marginal", ell as u64);
    upward(&t.root, ell, wfs, &boundary.points, &mut rng).map(SimplexPoint)
}

/// One member of the next generation: a fresh root with `Po(k_ψ ρ_ψ)`
/// constraints per family, uniform parent slots, and the other slots filled
/// by uniform draws from `prev`.
fn fresh_member<R: Rng + ?Sized>(spec: &ModelSpec, prev: &[SimplexPoint], rng: &mut R) -> Result<Vec<f64>> {
    let q = spec.q();
    let mut hats: Vec<Vec<f64>> = Vec::new();
    for fam in &spec.families {
        let k = fam.wf.arity;
        let d = poisson(rng, k as f64 * fam.rho);
        for _ in 0..d {
            let slot = rng.gen_range(0..k);
            let incoming: Vec<&[f64]> = (0..k - 1).map(|_| draw(prev, rng)).collect();
            let mut hat = vec![0.0; q];
            constraint_message_raw(&fam.wf, q, slot, &incoming, &mut hat);
            let s: f64 = hat.iter().sum();
            hat.iter_mut().for_each(|x| *x /= s);
            hats.push(hat);
        }
    }
    let mut out = vec![0.0; q];
    combine_raw(q, hats.iter().map(|h| h.as_slice()), &mut out)?;
    Ok(out)
}

/// Runs `sweeps` generations of the distributional BP recursion.
///
/// Member `i` of generation `g` uses its own sub-stream `(g << 32) | i`, so
/// results do not depend on the thread count.
pub fn population_dynamics(spec: &ModelSpec, init: &Population, sweeps: usize, seed: u64) -> Result<Population> {
    spec.validate()?;
    init.validate()?;
    if init.q() != spec.q() {
        return Err(Error::DimensionMismatch { expected: spec.q(), got: init.q() });
    }
    let mut pop = init.clone();
    for _ in 0..sweeps {
        let gen = pop.generation as u64 + 1;
        let prev = &pop.points;
        let next: Vec<SimplexPoint> = (0..prev.len())
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, "population_dynamics", (gen << 32) | i as u64);
                fresh_member(spec, prev, &mut rng).map(SimplexPoint)
            })
            .collect::<Result<_>>()?;
        pop = Population { points: next, generation: pop.generation + 1 };
    }
    Ok(pop)
}

/// Default population size and sweep count for fixed-point computations.
pub const DEFAULT_POPULATION: usize = 10_000;
pub const DEFAULT_SWEEPS: usize = 100;

/// Population dynamics from a mildly jittered uniform start with default sizes.
pub fn default_fixed_point(spec: &ModelSpec, seed: u64) -> Result<Population> {
    let init = Population::jittered(spec.q(), DEFAULT_POPULATION, 0.5, derive_seed(seed, "fixed_point_init", 0))?;
    population_dynamics(spec, &init, DEFAULT_SWEEPS, derive_seed(seed, "fixed_point", 0))
}

/// Bounded test functions on `P(Ω)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Probe {
    Constant { value: f64 },
    /// `η(spin)^power`.
    Moment { spin: usize, power: i32 },
}

impl Probe {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match *self {
            Probe::Constant { value } => value,
            Probe::Moment { spin, power } => p[spin].powi(power),
        }
    }
}

/// Monte Carlo estimate of `E[∫ probe dν_{T,ℓ+1}] − E[∫ probe dν_{T,ℓ}]`.
///
/// Each sample draws a depth-`ℓ+1` tree prefix `T`, one `X_{ℓ+1}(T, τ)` and one
/// `X_ℓ(∂^ℓ T, τ')` with independent boundary draws from the fixed point of
/// population dynamics; the two evaluations share the tree.
pub fn martingale_residual(
    spec: &ModelSpec,
    ell: usize,
    probe: &Probe,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let boundary = default_fixed_point(spec, derive_seed(seed, "martingale_boundary", 0))?;
    martingale_residual_with_boundary(spec, ell, probe, samples, &boundary, seed)
}

pub fn martingale_residual_with_boundary(
    spec: &ModelSpec,
    ell: usize,
    probe: &Probe,
    samples: usize,
    boundary: &Population,
    seed: u64,
) -> Result<Estimate> {
    boundary.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let wfs = spec.weight_functions();
    let diffs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, "martingale", s as u64);
            let t = RootedTree { root: sample_var(spec, ell + 1, &mut rng) };
            let deep = upward(&t.root, ell + 1, &wfs, &boundary.points, &mut rng)?;
            let shallow = upward(&truncate(&t, ell).root, ell, &wfs, &boundary.points, &mut rng)?;
            Ok(probe.eval(&deep) - probe.eval(&shallow))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::conditional_marginal;
    use crate::random::{preset_ising, preset_trivial};
    use crate::tree::{ConstraintNode, VarNode};

    #[test]
    fn root_only_tree_draws_from_boundary() {
        let b = Population::new(vec![SimplexPoint(vec![0.3, 0.7])]).unwrap();
        let spec = preset_ising(0.2, 1.0).unwrap();
        let m = tree_root_marginal(&RootedTree::root_only(), 0, &spec.weight_functions(), &b, 3).unwrap();
        assert_eq!(m.0, vec![0.3, 0.7]);
        // above the truncation depth a childless root is uniform
        let m = tree_root_marginal(&RootedTree::root_only(), 2, &spec.weight_functions(), &b, 3).unwrap();
        assert_eq!(m, SimplexPoint::uniform(2));
    }

    #[test]
    fn trivial_weights_give_uniform_root() {
        let spec = preset_trivial(2, 3, 1.0).unwrap();
        let t = crate::tree::sample_gw_tree(&spec, 3, 1);
        let b = Population::jittered(2, 50, 1.0, 4).unwrap();
        let m = tree_root_marginal(&t, 3, &spec.weight_functions(), &b, 1).unwrap();
        assert!(m.tv(&SimplexPoint::uniform(2)) < 1e-15);
    }

    #[test]
    fn star_with_clamped_leaves_matches_conditional_marginal() {
        let spec = preset_ising(0.6, 1.0).unwrap();
        let wfs = spec.weight_functions();
        let leaf = VarNode::default();
        let t = RootedTree {
            root: VarNode {
                children: vec![
                    ConstraintNode { wf: 0, parent_slot: 0, children: vec![leaf.clone()] },
                    ConstraintNode { wf: 0, parent_slot: 1, children: vec![leaf.clone()] },
                    ConstraintNode { wf: 0, parent_slot: 0, children: vec![leaf] },
                ],
            },
        };
        let plus = Population::new(vec![SimplexPoint::point_mass(2, 1)]).unwrap();
        let m = tree_root_marginal(&t, 1, &wfs, &plus, 0).unwrap();
        let g = t.to_factor_graph(&spec.alphabet, &wfs).unwrap();
        let exact = conditional_marginal(&g, 0, &[(1, 1), (2, 1), (3, 1)]).unwrap();
        assert!(crate::bp::tv(&m.0, &exact) < 1e-12);
    }

    #[test]
    fn population_dynamics_trivial_cases() {
        let zero = preset_ising(0.5, 0.0).unwrap();
        let init = Population::jittered(2, 100, 1.0, 1).unwrap();
        let out = population_dynamics(&zero, &init, 1, 2).unwrap();
        assert!(out.points.iter().all(|p| *p == SimplexPoint::uniform(2)));
        assert_eq!(out.generation, 1);

        let one = preset_trivial(2, 3, 2.0).unwrap();
        let out = population_dynamics(&one, &init, 1, 2).unwrap();
        assert!(out.points.iter().all(|p| p.tv(&SimplexPoint::uniform(2)) < 1e-15));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = preset_ising(0.4, 1.3).unwrap();
        let init = Population::jittered(2, 300, 0.8, 9).unwrap();
        let a = population_dynamics(&spec, &init, 5, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| population_dynamics(&spec, &init, 5, 11).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn martingale_trivial_cases() {
        let spec = preset_ising(0.2, 1.0).unwrap();
        let b = Population::jittered(2, 100, 1.0, 3).unwrap();
        let r = martingale_residual_with_boundary(&spec, 0, &Probe::Constant { value: 1.0 }, 500, &b, 1).unwrap();
        assert_eq!((r.value, r.std_error), (0.0, 0.0));

        let zero = preset_ising(0.2, 0.0).unwrap();
        let probe = Probe::Moment { spin: 1, power: 1 };
        let r = martingale_residual(&zero, 1, &probe, 200, 5).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn population_json() {
        let p = Population::jittered(3, 4, 0.5, 1).unwrap();
        assert_eq!(Population::from_json(&p.to_json().unwrap()).unwrap(), p);
        let bare = Population::from_json("[[0.5, 0.5], [1, 0]]").unwrap();
        assert_eq!(bare.len(), 2);
        assert!(Population::from_json("[[0.5, 0.6]]").is_err());
    }
}
