//! Exact optimal transport between uniform empirical measures.
//!
//! The ground metric on `P(Ω)` is total variation. Equal-size populations are
//! matched with the Hungarian algorithm; unequal sizes go through a min-cost
//! flow on the transportation network. For `|Ω| = 2` the TV distance is the
//! distance between first coordinates, so `d₁` reduces to `∫|F − G|`.

use crate::bp::{tv, SimplexPoint};
use crate::error::{Error, Result};
use std::collections::BinaryHeap;

/// Largest population accepted by the general (non-binary) solvers.
pub const SIZE_CAP: usize = 2000;

/// `d₁` between the uniform empirical measures on `p` and `q`.
pub fn wasserstein_d1(p: &[SimplexPoint], q: &[SimplexPoint]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidParameter("populations must be non-empty".into()));
    }
    let dim = p[0].q();
    if let Some(x) = p.iter().chain(q).find(|x| x.q() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: x.q() });
    }
    if dim == 2 {
        return Ok(one_dimensional(p.iter().map(|x| x.0[0]).collect(), q.iter().map(|x| x.0[0]).collect()));
    }
    if p.len() > SIZE_CAP || q.len() > SIZE_CAP {
        return Err(Error::SizeCap(format!("populations of size {} and {} exceed {SIZE_CAP}", p.len(), q.len())));
    }
    if p.len() == q.len() {
        let cost: Vec<Vec<f64>> = p.iter().map(|a| q.iter().map(|b| tv(&a.0, &b.0)).collect()).collect();
        let (total, _) = hungarian(&cost);
        Ok(total / p.len() as f64)
    } else {
        transport_flow(p, q)
    }
}

/// `∫|F − G|` for uniform empirical measures on the reals.
fn one_dimensional(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev = f64::min(a[0], b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (fa - fb).abs() * (x - prev);
        while i < a.len() && a[i] == x {
            fa += wa;
            i += 1;
        }
        while j < b.len() && b[j] == x {
            fb += wb;
            j += 1;
        }
        prev = x;
    }
    total
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns the optimal cost and `assignment[row] = column`. O(n³).
pub fn hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    (total, assignment)
}

#[derive(Clone, Copy)]
struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Transportation problem with supplies `|q|` per source and demands `|p|`
/// per sink (integer scaling of the uniform weights), solved by successive
/// shortest paths with Johnson potentials.
fn transport_flow(p: &[SimplexPoint], q: &[SimplexPoint]) -> Result<f64> {
    let (np, nq) = (p.len(), q.len());
    let (src, sink) = (np + nq, np + nq + 1);
    let nodes = np + nq + 2;
    let mut edges: Vec<Edge> = Vec::new();
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, graph: &mut Vec<Vec<usize>>, a: usize, b: usize, cap: u64, cost: f64| {
        graph[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost });
        graph[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0, cost: -cost });
    };
    for i in 0..np {
        add(&mut edges, &mut graph, src, i, nq as u64, 0.0);
        for j in 0..nq {
            add(&mut edges, &mut graph, i, np + j, u64::MAX / 4, tv(&p[i].0, &q[j].0));
        }
    }
    for j in 0..nq {
        add(&mut edges, &mut graph, np + j, sink, np as u64, 0.0);
    }
    let required = (np * nq) as u64;
    let mut flow = 0u64;
    let mut cost = 0.0;
    let mut pot = vec![0.0; nodes];
    while flow < required {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::from([HeapItem(0.0, src)]);
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &graph[u] {
                let ed = edges[e];
                if ed.cap == 0 {
                    continue;
                }
                let nd = d + ed.cost + pot[u] - pot[ed.to];
                if nd < dist[ed.to] - 1e-15 {
                    dist[ed.to] = nd;
                    prev[ed.to] = e;
                    heap.push(HeapItem(nd, ed.to));
                }
            }
        }
        if dist[sink].is_infinite() {
            return Err(Error::Lp("transport network has no augmenting path".into()));
        }
        for (x, d) in pot.iter_mut().zip(&dist) {
            if d.is_finite() {
                *x += d;
            }
        }
        let mut push = required - flow;
        let mut node = sink;
        while node != src {
            let e = prev[node];
            push = push.min(edges[e].cap);
            node = edges[e ^ 1].to;
        }
        node = sink;
        while node != src {
            let e = prev[node];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            cost += push as f64 * edges[e].cost;
            node = edges[e ^ 1].to;
        }
        flow += push;
    }
    Ok(cost / required as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// All permutations of `0..n` (Heap's algorithm).
    fn permutations(n: usize) -> Vec<Vec<usize>> {
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

    fn random_pop(rng: &mut impl Rng, n: usize, q: usize) -> Vec<SimplexPoint> {
        (0..n)
            .map(|_| SimplexPoint::normalized((0..q).map(|_| rng.gen::<f64>()).collect()).unwrap())
            .collect()
    }

    #[test]
    fn identical_and_point_masses() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = random_pop(&mut rng, 7, 3);
        assert!(wasserstein_d1(&p, &p).unwrap().abs() < 1e-12);
        let a = [SimplexPoint(vec![1.0, 0.0])];
        let b = [SimplexPoint(vec![0.0, 1.0])];
        assert!((wasserstein_d1(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn assignment_matches_factorial_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for q in [2, 3] {
            for _ in 0..20 {
                let p = random_pop(&mut rng, 5, q);
                let r = random_pop(&mut rng, 5, q);
                let brute = permutations(5)
                    .iter()
                    .map(|s| (0..5).map(|i| p[i].tv(&r[s[i]])).sum::<f64>() / 5.0)
                    .fold(f64::INFINITY, f64::min);
                assert!((wasserstein_d1(&p, &r).unwrap() - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unequal_sizes_agree_with_replication() {
        // d₁ of uniform measures on 2 and 3 points equals d₁ after replicating to 6 and 6
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for q in [2, 3] {
            for _ in 0..10 {
                let p = random_pop(&mut rng, 2, q);
                let r = random_pop(&mut rng, 3, q);
                let p6: Vec<_> = p.iter().flat_map(|x| std::iter::repeat_n(x.clone(), 3)).collect();
                let r6: Vec<_> = r.iter().flat_map(|x| std::iter::repeat_n(x.clone(), 2)).collect();
                let a = wasserstein_d1(&p, &r).unwrap();
                let b = wasserstein_d1(&p6, &r6).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} {b}");
                assert!((a - wasserstein_d1(&r, &p).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_formula_matches_assignment() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = random_pop(&mut rng, 6, 2);
            let r = random_pop(&mut rng, 6, 2);
            let cost: Vec<Vec<f64>> = p.iter().map(|a| r.iter().map(|b| a.tv(b)).collect()).collect();
            let h = hungarian(&cost).0 / 6.0;
            assert!((wasserstein_d1(&p, &r).unwrap() - h).abs() < 1e-12);
        }
    }

    #[test]
    fn size_cap() {
        let big = vec![SimplexPoint::uniform(3); SIZE_CAP + 1];
        assert!(matches!(wasserstein_d1(&big, &big[..3]), Err(Error::SizeCap(_))));
        let big2 = vec![SimplexPoint::uniform(2); 50_000];
        assert_eq!(wasserstein_d1(&big2, &big2[..7]).unwrap(), 0.0);
    }
}
