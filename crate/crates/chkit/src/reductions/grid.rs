//! Exhaustive search for exact solutions of an embedded instance whose cuts
//! all lie on a fixed arithmetic grid.
//!
//! Embedded instances tile their domain into 3-unit windows, one per agent
//! block, and every agent keeps strictly more than half of its mass inside
//! its own window. An exact solution within the cut budget therefore places
//! exactly one cut in each window, so the search walks the windows left to
//! right, tries every grid point inside the current window, and prunes as
//! soon as some agent whose support is now fully covered fails to balance.
//! Solutions come in sign-flipped pairs, so the leftmost piece is fixed to
//! minus. Worst-case time is exponential in the window count; the agents'
//! balance constraints collapse the branching in practice.

use super::ReductionError;
use crate::ch::{CHSolution, Sign};
use crate::embed::EmbeddedInstance;
use crate::rat::Rat;
use num_traits::ToPrimitive;

pub fn grid_search(
    inst: &EmbeddedInstance,
    step: &Rat,
) -> Result<Option<CHSolution>, ReductionError> {
    if !step.is_positive() {
        return Err(ReductionError::BadGridStep);
    }
    let windows = 4 * inst.node_count();
    let agents = inst.densities.len();
    // First window whose right edge already covers the agent's support; its
    // balance is decided once that window's cut is placed. The support
    // bounds let the balance check skip integral evaluations at cuts that
    // carry none of the agent's mass.
    let mut checked_at: Vec<Vec<usize>> = vec![Vec::new(); windows];
    let mut support = Vec::with_capacity(agents);
    for a in 0..agents {
        let start = inst.densities[a].domain_start().clone();
        let end = inst.densities[a].domain_end().clone();
        let mut w = windows - 1;
        for cand in 0..windows {
            let edge = Rat::int(3 * (cand + 1) as i64);
            if edge >= end
                || inst.densities[a].definite_integral(&edge, &end)?.is_zero()
            {
                w = cand;
                break;
            }
        }
        checked_at[w].push(a);
        let mut lo = Rat::zero();
        loop {
            let edge = &lo + &Rat::int(3);
            if edge > end || !inst.densities[a].definite_integral(&start, &edge)?.is_zero() {
                break;
            }
            lo = edge;
        }
        support.push((lo, Rat::int(3 * (w + 1) as i64)));
    }
    let totals: Vec<Rat> = (0..agents)
        .map(|a| inst.instance.total(a))
        .collect::<Result<_, _>>()?;
    let search = Search {
        inst,
        step,
        checked_at: &checked_at,
        totals: &totals,
        support: &support,
        windows,
    };
    let mut cuts = Vec::with_capacity(windows);
    let found = search.place(&mut cuts)?;
    Ok(found.then(|| CHSolution {
        cuts,
        leftmost_sign: Sign::Minus,
    }))
}

struct Search<'a> {
    inst: &'a EmbeddedInstance,
    step: &'a Rat,
    checked_at: &'a [Vec<usize>],
    totals: &'a [Rat],
    support: &'a [(Rat, Rat)],
    windows: usize,
}

impl Search<'_> {
    fn place(&self, cuts: &mut Vec<Rat>) -> Result<bool, ReductionError> {
        let w = cuts.len();
        if w == self.windows {
            return Ok(true);
        }
        let last = w == self.windows - 1;
        let lo = (Rat::int(3 * w as i64) / self.step)
            .ceil_int()
            .to_i64()
            .expect("grid index fits i64");
        let hi_edge = Rat::int(3 * (w + 1) as i64) / self.step;
        let mut hi = hi_edge.floor_int().to_i64().expect("grid index fits i64");
        if !last && hi_edge.is_integer() {
            hi -= 1;
        }
        for k in lo..=hi {
            cuts.push(Rat::int(k) * self.step);
            let mut ok = true;
            for &a in &self.checked_at[w] {
                if !self.balances(cuts, a)? {
                    ok = false;
                    break;
                }
            }
            if ok && self.place(cuts)? {
                return Ok(true);
            }
            cuts.pop();
        }
        Ok(false)
    }

    /// Signed mass of agent `a` under the cuts placed so far, leftmost piece
    /// minus. Agents are only queried once their support lies left of every
    /// window still open, so later cuts cannot change the answer.
    fn balances(&self, cuts: &[Rat], a: usize) -> Result<bool, ReductionError> {
        let (lo, hi) = &self.support[a];
        let mut imbalance = Rat::zero();
        let mut prev = Rat::zero();
        for (piece, cut) in cuts.iter().enumerate() {
            let here = if cut <= lo {
                Rat::zero()
            } else if cut >= hi {
                self.totals[a].clone()
            } else {
                self.inst.instance.eval(a, cut)?
            };
            let mass = &here - &prev;
            imbalance = if piece % 2 == 0 {
                imbalance - mass
            } else {
                imbalance + mass
            };
            prev = here;
        }
        let tail = &self.totals[a] - &prev;
        imbalance = if cuts.len() % 2 == 0 {
            imbalance - tail
        } else {
            imbalance + tail
        };
        Ok(imbalance.is_zero())
    }
}
