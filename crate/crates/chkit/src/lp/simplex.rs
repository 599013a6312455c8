//! Dense two-phase primal simplex over exact rationals.
//!
//! Input is equality standard form: minimize c.v subject to Av = b, v >= 0.
//! Bland's rule (lowest eligible index entering, lowest basic index among
//! ratio ties leaving) guarantees termination even on degenerate tableaus.

use crate::rat::Rat;

#[derive(Debug, Clone)]
pub struct StandardLP {
    /// Equality rows over the structural variables.
    pub rows: Vec<Vec<Rat>>,
    pub rhs: Vec<Rat>,
    /// Minimized objective, one coefficient per structural variable.
    pub objective: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LPOutcome {
    Optimal { value: Rat, point: Vec<Rat> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    a: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.a[row][col].recip();
        for v in self.a[row].iter_mut() {
            *v = &*v * &inv;
        }
        self.rhs[row] = &self.rhs[row] * &inv;
        for r in 0..self.a.len() {
            if r == row || self.a[r][col].is_zero() {
                continue;
            }
            let factor = self.a[r][col].clone();
            for c in 0..self.cols {
                let delta = &factor * &self.a[row][c];
                self.a[r][c] = &self.a[r][c] - &delta;
            }
            let delta = &factor * &self.rhs[row];
            self.rhs[r] = &self.rhs[r] - &delta;
        }
        self.basis[row] = col;
    }

    /// Reduced cost of a column under the given objective.
    fn reduced_cost(&self, col: usize, cost: &[Rat]) -> Rat {
        let mut rc = cost[col].clone();
        for (r, &b) in self.basis.iter().enumerate() {
            if !cost[b].is_zero() && !self.a[r][col].is_zero() {
                rc = &rc - &(&cost[b] * &self.a[r][col]);
            }
        }
        rc
    }

    /// Runs Bland-rule iterations to optimality. Returns false on an
    /// unbounded ray.
    fn optimize(&mut self, cost: &[Rat], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                if self.reduced_cost(j, cost).is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return true;
            };
            let mut leave: Option<(usize, Rat)> = None;
            for r in 0..self.a.len() {
                if !self.a[r][j].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / &self.a[r][j];
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => {
                        &ratio < best || (&ratio == best && self.basis[r] < self.basis[*lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, j);
        }
    }

    fn objective_value(&self, cost: &[Rat]) -> Rat {
        let mut v = Rat::zero();
        for (r, &b) in self.basis.iter().enumerate() {
            if !cost[b].is_zero() {
                v = &v + &(&cost[b] * &self.rhs[r]);
            }
        }
        v
    }
}

pub fn solve(lp: &StandardLP) -> LPOutcome {
    let m = lp.rows.len();
    let n = lp.objective.len();
    debug_assert!(lp.rows.iter().all(|r| r.len() == n));
    debug_assert_eq!(lp.rhs.len(), m);

    let cols = n + m;
    let mut a = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = lp.rhs[i].is_negative();
        let mut full: Vec<Rat> = row
            .iter()
            .map(|v| if flip { -v } else { v.clone() })
            .collect();
        full.resize(cols, Rat::zero());
        full[n + i] = Rat::one();
        a.push(full);
        rhs.push(if flip {
            -&lp.rhs[i]
        } else {
            lp.rhs[i].clone()
        });
    }
    let mut t = Tableau {
        a,
        rhs,
        basis: (n..cols).collect(),
        cols,
    };

    // Phase 1: drive the artificial variables to zero.
    let mut phase1 = vec![Rat::zero(); cols];
    for c in phase1.iter_mut().skip(n) {
        *c = Rat::one();
    }
    if !t.optimize(&phase1, cols) {
        unreachable!("phase-1 objective is bounded below by zero");
    }
    if t.objective_value(&phase1).is_positive() {
        return LPOutcome::Infeasible;
    }
    // Pivot leftover artificials out; a row with no structural entry is
    // redundant and gets dropped.
    let mut r = 0;
    while r < t.basis.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| !t.a[r][j].is_zero()) {
                Some(j) => t.pivot(r, j),
                None => {
                    t.a.remove(r);
                    t.rhs.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut phase2 = lp.objective.clone();
    phase2.resize(cols, Rat::zero());
    if !t.optimize(&phase2, n) {
        return LPOutcome::Unbounded;
    }
    let mut point = vec![Rat::zero(); n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            point[b] = t.rhs[r].clone();
        }
    }
    let value = t.objective_value(&phase2);
    LPOutcome::Optimal { value, point }
}
