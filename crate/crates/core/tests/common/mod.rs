//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cavity::bp::SimplexPoint;
use cavity::cut::{Coupling, EmbeddedMeasure};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `c_{ij}(U, W) = (1/n) Σ_{x∈U} (μ_i(x)(W) − ν_j(x)(W))` for every `(U, W)`
/// with `∅ ≠ W ⊊ Ω`, enumerated directly.
pub fn rectangle_coefficients(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Vec<Vec<f64>> {
    let (n, q) = (mu.n(), mu.q());
    let mut out = Vec::new();
    for u in 1u32..(1 << n) {
        for w in 1u32..((1 << q) - 1) {
            let mass = |steps: &dyn Fn(usize) -> Vec<f64>| -> f64 {
                (0..n)
                    .filter(|x| u >> x & 1 == 1)
                    .map(|x| {
                        let s = steps(x);
                        (0..q).filter(|o| w >> o & 1 == 1).map(|o| s[o]).sum::<f64>()
                    })
                    .sum()
            };
            let mut row = Vec::with_capacity(mu.len() * nu.len());
            for i in 0..mu.len() {
                let a = mass(&|x| mu.step(i, x).to_vec());
                for j in 0..nu.len() {
                    let b = mass(&|x| nu.step(j, x).to_vec());
                    row.push((a - b) / n as f64);
                }
            }
            out.push(row);
        }
    }
    out
}

/// `max_{U,B,W} Σ_{p∈B} γ_p c_p(U, W)` by brute force over `U` and `W`; the
/// best `B` keeps the pairs with positive coefficient.
pub fn brute_sup(gamma: &[f64], coeffs: &[Vec<f64>]) -> f64 {
    coeffs
        .iter()
        .map(|c| c.iter().zip(gamma).map(|(c, g)| g * c.max(0.0)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `min_γ max_{U,B,W}` as one LP over all rectangles, solved by `minilp`.
pub fn lp_strong_distance(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> f64 {
    let coeffs = rectangle_coefficients(mu, nu);
    let (r, c) = (mu.len(), nu.len());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let g: Vec<_> = (0..r * c).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for i in 0..r {
        let row: Vec<_> = (0..c).map(|j| (g[i * c + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, mu.weight(i));
    }
    for j in 0..c {
        let col: Vec<_> = (0..r).map(|i| (g[i * c + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, nu.weight(j));
    }
    for cf in &coeffs {
        let mut row = vec![(t, 1.0)];
        for (p, &v) in cf.iter().enumerate() {
            if v > 0.0 {
                row.push((g[p], -v));
            }
        }
        lp.add_constraint(row.as_slice(), ComparisonOp::Ge, 0.0);
    }
    lp.solve().expect("the coupling LP is feasible and bounded").objective()
}

/// North-west corner couplings under every row and column order: each is a
/// vertex of the transport polytope.
pub fn northwest_vertices(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure) -> Vec<Vec<f64>> {
    let (r, c) = (mu.len(), nu.len());
    let mut out = Vec::new();
    for rp in cavity::cut::permutations(r) {
        for cp in cavity::cut::permutations(c) {
            let mut a: Vec<f64> = rp.iter().map(|&i| mu.weight(i)).collect();
            let mut b: Vec<f64> = cp.iter().map(|&j| nu.weight(j)).collect();
            let mut g = vec![0.0; r * c];
            let (mut i, mut j) = (0, 0);
            while i < r && j < c {
                let m = a[i].min(b[j]);
                g[rp[i] * c + cp[j]] += m;
                a[i] -= m;
                b[j] -= m;
                if a[i] <= 1e-15 && i + 1 < r {
                    i += 1;
                } else if b[j] <= 1e-15 {
                    j += 1;
                } else {
                    i += 1;
                }
            }
            out.push(g);
        }
    }
    out
}

pub fn random_simplex(rng: &mut ChaCha8Rng, q: usize) -> SimplexPoint {
    let raw: Vec<f64> = (0..q).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    SimplexPoint(raw.into_iter().map(|x| x / s).collect())
}

/// A random measure with `atoms` atoms on `n` cells. With `dirac` set every
/// step value is a vertex of the simplex, as for embedded discrete measures.
pub fn random_embedded(rng: &mut ChaCha8Rng, n: usize, q: usize, atoms: usize, dirac: bool) -> EmbeddedMeasure {
    let raw: Vec<f64> = (0..atoms).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..atoms - 1].iter().sum();
    weights[atoms - 1] = 1.0 - head;
    let parts = weights
        .into_iter()
        .map(|w| {
            let steps = (0..n)
                .map(|_| {
                    if dirac {
                        let mut p = vec![0.0; q];
                        p[rng.gen_range(0..q)] = 1.0;
                        SimplexPoint(p)
                    } else {
                        random_simplex(rng, q)
                    }
                })
                .collect();
            (w, steps)
        })
        .collect();
    EmbeddedMeasure::new(n, q, parts).unwrap()
}

pub fn coupling_of(mu: &EmbeddedMeasure, nu: &EmbeddedMeasure, g: Vec<f64>) -> Coupling {
    Coupling::new(mu.len(), nu.len(), g).unwrap()
}
