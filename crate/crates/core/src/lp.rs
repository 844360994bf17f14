//! A small dense two-phase simplex solver.
//!
//! Solves `min cᵀx` subject to equality and `≤` rows and `x ≥ 0`. Pivoting
//! uses the most negative reduced cost and falls back to Bland's rule after a
//! run of degenerate pivots, which rules out cycling.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub equalities: Vec<(Vec<f64>, f64)>,
    pub upper_bounds: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-11;
const PIVOT_EPS: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { objective: vec![0.0; n_vars], ..Default::default() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self)?.run(self)
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows (last is the objective) of `cols + 1` entries (last is the rhs).
    t: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
    artificial_start: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn build(lp: &LinearProgram) -> Result<Self> {
        let n = lp.n_vars();
        for (row, _) in lp.equalities.iter().chain(&lp.upper_bounds) {
            if row.len() != n {
                return Err(Error::Lp(format!("row of length {} in a program with {n} variables", row.len())));
            }
        }
        // normalise every row to a non-negative rhs; a flipped ≤ row becomes ≥
        enum Kind {
            Le,
            Ge,
            Eq,
        }
        let mut rows: Vec<(Vec<f64>, f64, Kind)> = Vec::new();
        for (a, b) in &lp.equalities {
            if *b < 0.0 {
                rows.push((a.iter().map(|x| -x).collect(), -b, Kind::Eq));
            } else {
                rows.push((a.clone(), *b, Kind::Eq));
            }
        }
        for (a, b) in &lp.upper_bounds {
            if *b < 0.0 {
                rows.push((a.iter().map(|x| -x).collect(), -b, Kind::Ge));
            } else {
                rows.push((a.clone(), *b, Kind::Le));
            }
        }
        let m = rows.len();
        let slacks = rows.iter().filter(|r| !matches!(r.2, Kind::Eq)).count();
        let artificials = rows.iter().filter(|r| !matches!(r.2, Kind::Le)).count();
        let cols = n + slacks + artificials;
        let artificial_start = n + slacks;
        let mut t = vec![0.0; (m + 1) * (cols + 1)];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, artificial_start);
        for (i, (row, b, kind)) in rows.iter().enumerate() {
            let base = i * (cols + 1);
            t[base..base + n].copy_from_slice(row);
            t[base + cols] = *b;
            match kind {
                Kind::Le => {
                    t[base + s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Kind::Ge => {
                    t[base + s] = -1.0;
                    s += 1;
                    t[base + a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Kind::Eq => {
                    t[base + a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Ok(Tableau { rows: m, cols, t, basis, n, artificial_start })
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (j, pv) in pivot_row.iter().enumerate() {
                    self.t[i * w + j] -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Installs `cost` (over all columns) as the objective row in reduced form.
    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows * w;
        for j in 0..w {
            self.t[obj + j] = if j < self.cols { cost[j] } else { 0.0 };
        }
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.t[obj + j] -= cb * self.t[i * w + j];
                }
            }
        }
    }

    /// Runs the simplex method on the current objective over columns `< allowed`.
    fn optimise(&mut self, allowed: usize) -> Result<()> {
        let w = self.cols + 1;
        let obj = self.rows * w;
        let mut degenerate = 0;
        let max_pivots = 50_000 + 100 * (self.rows + self.cols);
        for _ in 0..max_pivots {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -EPS;
            for j in 0..allowed {
                let rc = self.t[obj + j];
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, self.cols) / a;
                    let better = match leave {
                        None => true,
                        Some((l, lr)) => ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Lp("objective is unbounded below".into()));
            };
            degenerate = if ratio.abs() < 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
        Err(Error::Lp("pivot limit reached".into()))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        if self.artificial_start < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            phase1[self.artificial_start..].iter_mut().for_each(|x| *x = 1.0);
            self.set_objective(&phase1);
            self.optimise(self.cols)?;
            let infeasibility = -self.at(self.rows, self.cols);
            if infeasibility > 1e-9 {
                return Err(Error::Lp(format!("infeasible (phase-one residual {infeasibility:e})")));
            }
            // drive zero-level artificials out of the basis; drop redundant rows
            let mut i = 0;
            while i < self.rows {
                if self.basis[i] >= self.artificial_start {
                    let c = (0..self.artificial_start).find(|&j| self.at(i, j).abs() > 1e-9);
                    match c {
                        Some(c) => self.pivot(i, c),
                        None => {
                            self.remove_row(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.n].copy_from_slice(&lp.objective);
        self.set_objective(&cost);
        self.optimise(self.artificial_start)?;
        let mut x = vec![0.0; self.n];
        for i in 0..self.rows {
            if self.basis[i] < self.n {
                x[self.basis[i]] = self.at(i, self.cols).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.t.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}
