//! Bethe free energy (tree and Poissonized forms), exact free energies of
//! small random graphs, and Aizenman–Simms–Starr increments.
//!
//! All values are in nats per variable.

use crate::bp::{combine_raw, constraint_message_raw, SimplexPoint};
use crate::error::{Error, Result};
use crate::exact::partition_function;
use crate::model::{Constraint, FactorGraph, WeightFunction};
use crate::popdyn::Population;
use crate::random::{sample_factor_graph, uniform_tuple, ModelSpec};
use crate::rng::substream;
use crate::stats::{poisson, Estimate};
use crate::tree::{sample_var, RootedTree};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The local terms `φ`, `φ̂_a`, `φ̃_a` of a depth-1 star.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheTerms {
    pub phi: f64,
    pub hat_phi: Vec<f64>,
    pub tilde_phi: Vec<f64>,
    pub arities: Vec<usize>,
}

impl BetheTerms {
    /// `φ + Σ_a (φ̂_a / k_a − φ̃_a)`.
    pub fn value(&self) -> f64 {
        self.phi
            + self
                .hat_phi
                .iter()
                .zip(&self.tilde_phi)
                .zip(&self.arities)
                .map(|((h, t), &k)| h / k as f64 - t)
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    #[serde(rename = "se")]
    pub std_error: f64,
    pub samples: usize,
    pub method: String,
}

impl FreeEnergyEstimate {
    fn from_samples(xs: &[f64], method: &str) -> Self {
        let e = Estimate::from_samples(xs);
        FreeEnergyEstimate { value: e.value, std_error: e.std_error, samples: e.samples, method: method.into() }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, std_error: self.std_error, samples: self.samples }
    }
}

fn checked_ln(x: f64, what: &str) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "argument of the {what} logarithm is {x}");
    x.ln()
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// `ln Σ_σ ψ(σ) Π_j η_j(σ_j)`.
fn log_weighted_sum(wf: &WeightFunction, q: usize, etas: &[&[f64]]) -> f64 {
    let mut sigma = vec![0usize; wf.arity];
    let mut s = 0.0;
    for (idx, &w) in wf.table.iter().enumerate() {
        crate::model::decode_index(idx, q, &mut sigma);
        s += w * sigma.iter().zip(etas).map(|(&x, e)| e[x]).product::<f64>();
    }
    checked_ln(s, "constraint")
}

fn log_dot(a: &[f64], b: &[f64]) -> f64 {
    checked_ln(a.iter().zip(b).map(|(x, y)| x * y).sum(), "edge")
}

/// Local Bethe terms of a depth-1 star.
///
/// `incoming[a]` holds the messages of constraint `a`'s child slots in slot
/// order. `η̂_a` is the constraint message to the root and `η̃_a` the combine of
/// all other `η̂_b`; then `φ = ln Σ_ω Π_a η̂_a(ω)`,
/// `φ̂_a = ln Σ_σ ψ_a(σ) η̃_a(σ_root) Π_y η_y(σ_y)` and
/// `φ̃_a = ln Σ_ω η̃_a(ω) η̂_a(ω)`.
pub fn bethe_local_terms(
    star: &RootedTree,
    wfs: &[WeightFunction],
    q: usize,
    incoming: &[Vec<SimplexPoint>],
) -> Result<BetheTerms> {
    let cons = &star.root.children;
    if star.depth() > 1 {
        return Err(Error::InvalidParameter(format!("star has depth {}, expected at most 1", star.depth())));
    }
    if incoming.len() != cons.len() {
        return Err(Error::DimensionMismatch { expected: cons.len(), got: incoming.len() });
    }
    let mut hats = Vec::with_capacity(cons.len());
    for (a, inc) in cons.iter().zip(incoming) {
        let wf = wfs.get(a.wf).ok_or_else(|| Error::InvalidGraph(format!("star uses unknown weight id {}", a.wf)))?;
        if a.parent_slot >= wf.arity {
            return Err(Error::SlotOutOfRange { slot: a.parent_slot, arity: wf.arity });
        }
        if inc.len() != wf.arity - 1 || a.children.len() != wf.arity - 1 {
            return Err(Error::ArityMismatch { expected: wf.arity - 1, got: inc.len() });
        }
        if let Some(m) = inc.iter().find(|m| m.q() != q) {
            return Err(Error::DimensionMismatch { expected: q, got: m.q() });
        }
        let refs: Vec<&[f64]> = inc.iter().map(|m| m.as_slice()).collect();
        let mut hat = vec![0.0; q];
        constraint_message_raw(wf, q, a.parent_slot, &refs, &mut hat);
        normalize(&mut hat);
        hats.push(hat);
    }
    Ok(terms_from_hats(cons.iter().map(|a| (&wfs[a.wf], a.parent_slot)), q, &hats, incoming))
}

fn terms_from_hats<'a>(
    cons: impl Iterator<Item = (&'a WeightFunction, usize)>,
    q: usize,
    hats: &[Vec<f64>],
    incoming: &[Vec<SimplexPoint>],
) -> BetheTerms {
    let phi = checked_ln((0..q).map(|w| hats.iter().map(|h| h[w]).product::<f64>()).sum(), "root");
    let mut terms = BetheTerms { phi, hat_phi: Vec::new(), tilde_phi: Vec::new(), arities: Vec::new() };
    let mut tilde = vec![0.0; q];
    for (a, (wf, slot)) in cons.enumerate() {
        combine_raw(q, hats.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, h)| h.as_slice()), &mut tilde)
            .expect("messages of a positive weight are positive");
        let mut etas: Vec<&[f64]> = incoming[a].iter().map(|m| m.as_slice()).collect();
        etas.insert(slot, &tilde);
        terms.hat_phi.push(log_weighted_sum(wf, q, &etas));
        terms.tilde_phi.push(log_dot(&tilde, &hats[a]));
        terms.arities.push(wf.arity);
    }
    terms
}

fn draw<R: Rng + ?Sized>(boundary: &Population, rng: &mut R) -> SimplexPoint {
    boundary.points[rng.gen_range(0..boundary.len())].clone()
}

fn check_inputs(spec: &ModelSpec, boundary: &Population, samples: usize) -> Result<()> {
    spec.validate()?;
    boundary.validate()?;
    if boundary.q() != spec.q() {
        return Err(Error::DimensionMismatch { expected: spec.q(), got: boundary.q() });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    Ok(())
}

/// Tree-form Bethe free energy: Monte Carlo over Galton–Watson root stars with
/// leaf messages drawn from `boundary`.
pub fn bethe_free_energy(spec: &ModelSpec, boundary: &Population, samples: usize, seed: u64) -> Result<FreeEnergyEstimate> {
    check_inputs(spec, boundary, samples)?;
    let wfs = spec.weight_functions();
    let q = spec.q();
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, "bethe_free_energy", s as u64);
            let star = RootedTree { root: sample_var(spec, 1, &mut rng) };
            let incoming: Vec<Vec<SimplexPoint>> = star
                .root
                .children
                .iter()
                .map(|a| (0..a.children.len()).map(|_| draw(boundary, &mut rng)).collect())
                .collect();
            bethe_local_terms(&star, &wfs, q, &incoming).map(|t| t.value())
        })
        .collect::<Result<_>>()?;
    Ok(FreeEnergyEstimate::from_samples(&xs, "bethe_tree"))
}

/// A fresh family `η̂_{ψ,j,i}`: `Po(ρ_ψ)` hats per family and slot, each built
/// from `k_ψ − 1` boundary draws. Returns `(family, slot, hat)` triples.
fn poisson_hats<R: Rng + ?Sized>(spec: &ModelSpec, boundary: &Population, rng: &mut R) -> Vec<(usize, usize, Vec<f64>)> {
    let q = spec.q();
    let mut out = Vec::new();
    for (f, fam) in spec.families.iter().enumerate() {
        for j in 0..fam.wf.arity {
            let d = poisson(rng, fam.rho);
            for _ in 0..d {
                out.push((f, j, hat_from_boundary(&fam.wf, q, j, boundary, rng)));
            }
        }
    }
    out
}

fn hat_from_boundary<R: Rng + ?Sized>(wf: &WeightFunction, q: usize, slot: usize, boundary: &Population, rng: &mut R) -> Vec<f64> {
    let inc: Vec<SimplexPoint> = (0..wf.arity - 1).map(|_| draw(boundary, rng)).collect();
    let refs: Vec<&[f64]> = inc.iter().map(|m| m.as_slice()).collect();
    let mut hat = vec![0.0; q];
    constraint_message_raw(wf, q, slot, &refs, &mut hat);
    normalize(&mut hat);
    hat
}

/// `η = combine(fresh Poisson hat family)`.
fn fresh_eta<R: Rng + ?Sized>(spec: &ModelSpec, boundary: &Population, rng: &mut R) -> Vec<f64> {
    let q = spec.q();
    let hats = poisson_hats(spec, boundary, rng);
    let mut out = vec![0.0; q];
    combine_raw(q, hats.iter().map(|(_, _, h)| h.as_slice()), &mut out).expect("positive messages");
    out
}

/// Poissonized Bethe free energy
/// `E[φ] + Σ_ψ ρ_ψ E[φ̂_ψ] − Σ_ψ Σ_j ρ_ψ E[φ̃_{ψ,j}]` with
/// `φ = ln Σ_ω Π η̂_{ψ,j,i}(ω)`, `φ̂_ψ = ln Σ_σ ψ(σ) Π_h η_h(σ_h)` and
/// `φ̃_{ψ,j} = ln Σ_ω η(ω) η̂_{ψ,j}(ω)`, where every `η` is an independent
/// combine of a fresh hat family.
///
/// The `φ̃` term is evaluated on the hats `η̂_{ψ,j,i}` drawn for `φ` itself:
/// since there are `Po(ρ_ψ)` of them per slot, Wald's identity gives
/// `E Σ_i φ̃(η̂_{ψ,j,i}) = ρ_ψ E[φ̃_{ψ,j}]`, and the shared hats cancel most of
/// the fluctuation of `φ` (exactly so for constant weights).
pub fn poissonized_bethe(spec: &ModelSpec, boundary: &Population, samples: usize, seed: u64) -> Result<FreeEnergyEstimate> {
    check_inputs(spec, boundary, samples)?;
    let q = spec.q();
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, "poissonized_bethe", s as u64);
            let hats = poisson_hats(spec, boundary, &mut rng);
            let phi = checked_ln(
                (0..q).map(|w| hats.iter().map(|(_, _, h)| h[w]).product::<f64>()).sum(),
                "root",
            );
            let mut y = phi;
            for (_, _, hat) in &hats {
                let eta = fresh_eta(spec, boundary, &mut rng);
                y -= log_dot(&eta, hat);
            }
            for fam in spec.families.iter().filter(|f| f.rho > 0.0) {
                let etas: Vec<Vec<f64>> = (0..fam.wf.arity).map(|_| fresh_eta(spec, boundary, &mut rng)).collect();
                let refs: Vec<&[f64]> = etas.iter().map(|e| e.as_slice()).collect();
                y += fam.rho * log_weighted_sum(&fam.wf, q, &refs);
            }
            Ok(y)
        })
        .collect::<Result<_>>()?;
    Ok(FreeEnergyEstimate::from_samples(&xs, "bethe_poissonized"))
}

/// `(1/n) ln Z` of `G_n(Ψ, ρ)` averaged over `seeds`.
pub fn free_energy_exact(spec: &ModelSpec, n: usize, seeds: &[u64]) -> Result<FreeEnergyEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let xs: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let g = sample_factor_graph(spec, n, s)?;
            Ok(partition_function(&g)?.log_z / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(FreeEnergyEstimate::from_samples(&xs, "exact"))
}

/// One Aizenman–Simms–Starr step from `n` to `n + 1` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssIncrement {
    pub n: usize,
    /// `E ln(Z‴/Z′) − E ln(Z″/Z′)`, an estimate of `E ln Z_{n+1} − E ln Z_n`.
    pub increment: Estimate,
    /// `E ln(Z‴/Z′)`: adding the variable `x_n` and its incident constraints.
    pub new_variable: Estimate,
    /// `E ln(Z″/Z′)`: adding constraints among the first `n` variables.
    pub new_constraints: Estimate,
}

fn add_uniform<R: Rng + ?Sized>(g: &mut FactorGraph, wf: usize, count: usize, n: usize, rng: &mut R) {
    let k = g.weight_functions[wf].arity;
    for _ in 0..count {
        g.constraints.push(Constraint { wf, neighbors: uniform_tuple(rng, n, k) });
    }
}

/// `E ln Z_{n+1} − E ln Z_n` for `n = 0..=n_max` via a coupling of `G_n` and
/// `G_{n+1}` through a common core `G′`.
///
/// With `q_ψ = (n/(n+1))^{k_ψ}`: `G′` has `Po((n+1)ρ_ψ q_ψ)` uniform constraints
/// on `n` variables; `G″` adds `Po(nρ_ψ − (n+1)ρ_ψ q_ψ)` more, so `G″ ~ G_n`;
/// `G‴` adds `x_n` and `Po((n+1)ρ_ψ(1 − q_ψ))` constraints whose uniform tuples
/// over `n + 1` variables are conditioned to contain `x_n`, so `G‴ ~ G_{n+1}`.
pub fn ass_increments(spec: &ModelSpec, n_max: usize, seeds_per_n: usize, seed: u64) -> Result<Vec<AssIncrement>> {
    spec.validate()?;
    if seeds_per_n == 0 {
        return Err(Error::InvalidParameter("seeds_per_n must be positive".into()));
    }
    crate::exact::check_state_cap(spec.q(), n_max + 1, crate::exact::DEFAULT_STATE_CAP)?;
    (0..=n_max)
        .map(|n| {
            let samples: Vec<(f64, f64)> = (0..seeds_per_n)
                .into_par_iter()
                .map(|s| {
                    let mut rng = substream(seed, "ass_increments", ((n as u64) << 32) | s as u64);
                    let mut core = FactorGraph::empty(spec.alphabet.clone(), n);
                    core.weight_functions = spec.weight_functions();
                    let nf = n as f64;
                    let mut extra = Vec::new();
                    let mut incident = Vec::new();
                    for (wf, fam) in spec.families.iter().enumerate() {
                        let k = fam.wf.arity;
                        let keep = (nf / (nf + 1.0)).powi(k as i32);
                        let base = (nf + 1.0) * fam.rho * keep;
                        let m = poisson(&mut rng, base);
                        add_uniform(&mut core, wf, m, n, &mut rng);
                        extra.push(poisson(&mut rng, (nf * fam.rho - base).max(0.0)));
                        incident.push(poisson(&mut rng, (nf + 1.0) * fam.rho * (1.0 - keep)));
                    }
                    let mut g2 = core.clone();
                    for (wf, &m) in extra.iter().enumerate() {
                        add_uniform(&mut g2, wf, m, n, &mut rng);
                    }
                    let mut g3 = core.clone();
                    g3.n = n + 1;
                    for (wf, &m) in incident.iter().enumerate() {
                        let k = spec.families[wf].wf.arity;
                        for _ in 0..m {
                            let tuple = loop {
                                let t = uniform_tuple(&mut rng, n + 1, k);
                                if t.contains(&n) {
                                    break t;
                                }
                            };
                            g3.constraints.push(Constraint { wf, neighbors: tuple });
                        }
                    }
                    let z1 = partition_function(&core)?.log_z;
                    let z2 = partition_function(&g2)?.log_z;
                    let z3 = partition_function(&g3)?.log_z;
                    Ok((z3 - z1, z2 - z1))
                })
                .collect::<Result<_>>()?;
            let up: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let down: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let diff: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
            Ok(AssIncrement {
                n,
                increment: Estimate::from_samples(&diff),
                new_variable: Estimate::from_samples(&up),
                new_constraints: Estimate::from_samples(&down),
            })
        })
        .collect()
}

/// Monte Carlo check of `E[X f(X)] = d E[f(X + 1)]` for `X ~ Po(d)`.
/// Returns estimates of both sides from independent halves of the draws.
pub fn chen_stein(d: f64, f: impl Fn(f64) -> f64, samples: usize, seed: u64) -> (Estimate, Estimate) {
    let mut rng = substream(seed, "chen_stein", 0);
    let lhs: Vec<f64> = (0..samples)
        .map(|_| {
            let x = poisson(&mut rng, d) as f64;
            x * f(x)
        })
        .collect();
    let rhs: Vec<f64> = (0..samples).map(|_| d * f(poisson(&mut rng, d) as f64 + 1.0)).collect();
    (Estimate::from_samples(&lhs), Estimate::from_samples(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{bp_run, BpConfig};
    use crate::model::SpinAlphabet;
    use crate::random::{preset_ising, preset_ksat, preset_trivial};
    use crate::tree::{sample_gw_tree, ConstraintNode, VarNode};

    fn star(cons: Vec<(usize, usize, usize)>) -> RootedTree {
        RootedTree {
            root: VarNode {
                children: cons
                    .into_iter()
                    .map(|(wf, slot, kids)| ConstraintNode {
                        wf,
                        parent_slot: slot,
                        children: vec![VarNode::default(); kids],
                    })
                    .collect(),
            },
        }
    }

    #[test]
    fn empty_star() {
        let t = bethe_local_terms(&RootedTree::root_only(), &[], 3, &[]).unwrap();
        assert!((t.phi - 3f64.ln()).abs() < 1e-15);
        assert!(t.hat_phi.is_empty());
    }

    #[test]
    fn trivial_constraint_terms() {
        let one = WeightFunction::new("one", 2, vec![1.0; 4], 2).unwrap();
        let t = bethe_local_terms(&star(vec![(0, 0, 1)]), &[one], 2, &[vec![SimplexPoint::uniform(2)]]).unwrap();
        assert!(t.phi.abs() < 1e-15);
        assert!(t.hat_phi[0].abs() < 1e-15);
        assert!((t.tilde_phi[0] + 2f64.ln()).abs() < 1e-15);
        assert!((t.value() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ising_constraint_brute_force() {
        let beta: f64 = 0.3;
        let wf = preset_ising(beta, 1.0).unwrap().families[0].wf.clone();
        let t = bethe_local_terms(&star(vec![(0, 1, 1)]), std::slice::from_ref(&wf), 2, &[vec![SimplexPoint::uniform(2)]]).unwrap();
        let direct: f64 = wf.table.iter().map(|w| w * 0.25).sum();
        assert!((t.hat_phi[0] - direct.ln()).abs() < 1e-15);
        assert!((t.hat_phi[0] - beta.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn slot_mismatch_is_an_error() {
        let wf = preset_ising(0.3, 1.0).unwrap().families[0].wf.clone();
        assert!(bethe_local_terms(&star(vec![(0, 0, 1)]), std::slice::from_ref(&wf), 2, &[vec![]]).is_err());
        assert!(bethe_local_terms(&star(vec![(0, 0, 1)]), &[wf], 2, &[]).is_err());
    }

    #[test]
    fn trivial_specs_give_ln_q() {
        let b = Population::jittered(2, 50, 1.0, 1).unwrap();
        let zero = preset_ising(0.7, 0.0).unwrap();
        let e = bethe_free_energy(&zero, &b, 100, 1).unwrap();
        assert_eq!((e.value, e.std_error), (2f64.ln(), 0.0));
        let e = poissonized_bethe(&zero, &b, 100, 1).unwrap();
        assert_eq!((e.value, e.std_error), (2f64.ln(), 0.0));

        let one = preset_trivial(3, 3, 1.7).unwrap();
        let b3 = Population::jittered(3, 50, 1.0, 1).unwrap();
        for e in [bethe_free_energy(&one, &b3, 200, 2).unwrap(), poissonized_bethe(&one, &b3, 200, 2).unwrap()] {
            assert!((e.value - 3f64.ln()).abs() < 1e-12, "{e:?}");
            assert!(e.std_error < 1e-12);
        }
        let e = free_energy_exact(&one, 5, &[1, 2, 3]).unwrap();
        assert!((e.value - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_edge_free_energy() {
        let beta: f64 = 0.4;
        let spec = preset_ising(beta, 1.0).unwrap();
        let g = FactorGraph::new(
            SpinAlphabet::ising(),
            spec.weight_functions(),
            vec![Constraint { wf: 0, neighbors: vec![0, 1] }],
            2,
        )
        .unwrap();
        let v = partition_function(&g).unwrap().log_z / 2.0;
        assert!((v - (2.0 * beta.exp() + 2.0 * (-beta).exp()).ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tree_exactness_of_local_terms() {
        // summing the local terms of every variable's star with exact BP
        // messages reproduces ln Z on a tree
        for (seed, spec) in [(1, preset_ising(0.9, 0.8).unwrap()), (2, preset_ksat(3, 1.2, 1.2).unwrap())] {
            let t = sample_gw_tree(&spec, 3, seed);
            let wfs = spec.weight_functions();
            let g = t.to_factor_graph(&spec.alphabet, &wfs).unwrap();
            if g.n > 20 {
                continue;
            }
            let r = bp_run(&g, &BpConfig::default()).unwrap();
            let mut total = 0.0;
            for inc in g.adjacency() {
                let mut cons = Vec::new();
                let mut incoming = Vec::new();
                for &(a, j) in &inc {
                    let c = &g.constraints[a];
                    cons.push(ConstraintNode {
                        wf: c.wf,
                        parent_slot: j,
                        children: vec![VarNode::default(); c.neighbors.len() - 1],
                    });
                    incoming.push(
                        (0..c.neighbors.len()).filter(|&i| i != j).map(|i| r.messages.to_constraint[a][i].clone()).collect(),
                    );
                }
                let st = RootedTree { root: VarNode { children: cons } };
                total += bethe_local_terms(&st, &wfs, 2, &incoming).unwrap().value();
            }
            let z = partition_function(&g).unwrap().log_z;
            assert!((total - z).abs() < 1e-9, "{total} vs {z}");
        }
    }

    #[test]
    fn uniform_fixed_point_closed_form() {
        let beta: f64 = 0.2;
        let spec = preset_ising(beta, 1.0).unwrap();
        let b = Population::uniform(2, 10);
        let want = 2f64.ln() + beta.cosh().ln();
        let t = bethe_free_energy(&spec, &b, 20_000, 3).unwrap();
        let p = poissonized_bethe(&spec, &b, 20_000, 3).unwrap();
        assert!((t.value - want).abs() <= 4.0 * t.std_error + 1e-12, "{t:?}");
        assert!((p.value - want).abs() <= 4.0 * p.std_error + 1e-12, "{p:?}");
    }

    #[test]
    fn ass_trivial_cases() {
        let zero = preset_ising(0.5, 0.0).unwrap();
        for inc in ass_increments(&zero, 4, 3, 1).unwrap() {
            assert!((inc.increment.value - 2f64.ln()).abs() < 1e-12);
        }
        let one = preset_trivial(3, 2, 1.5).unwrap();
        for inc in ass_increments(&one, 4, 3, 1).unwrap() {
            assert!((inc.increment.value - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn chen_stein_identity() {
        let (l, r) = chen_stein(2.0, |x| x * x, 100_000, 7);
        assert!((l.value - 22.0).abs() <= 3.0 * l.std_error);
        assert!((r.value - 22.0).abs() <= 3.0 * r.std_error);
    }
}
