//! Piecewise polynomial functions of degree at most two.
//!
//! A function is described by strictly ascending breakpoints `p_0 < ... < p_k`
//! and one coefficient triple per piece. Piece `s` covers `[p_s, p_{s+1}]` and
//! evaluates as `c0 + c1*(t - p_s) + c2*(t - p_s)^2` in the shifted basis, so
//! adding or integrating pieces never leaves the rationals.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PiecewiseError {
    #[error("evaluation point {0} outside domain")]
    OutOfDomain(Rat),
    #[error("piece {0} has degree above one, cannot integrate in closed form here")]
    DegreeTooHigh(usize),
    #[error("malformed piecewise function: {0}")]
    BadShape(String),
    #[error("integral-form function is discontinuous at breakpoint {0}")]
    Discontinuous(Rat),
    #[error("empty integration range [{0}, {1}] or endpoints out of domain")]
    BadRange(Rat, Rat),
}

/// Piecewise polynomial with exact rational coefficients, degree at most 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub breakpoints: Vec<Rat>,
    pub pieces: Vec<[Rat; 3]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub integral_form: bool,
}

/// One contribution used when assembling densities from sparse segments.
#[derive(Debug, Clone)]
pub enum Segment {
    /// Constant height over the segment.
    Const(Rat),
    /// Linear ramp `2*(t - origin)` over the segment.
    Ramp { origin: Rat },
}

impl PiecewisePoly {
    pub fn new(
        breakpoints: Vec<Rat>,
        pieces: Vec<[Rat; 3]>,
        integral_form: bool,
    ) -> Result<Self, PiecewiseError> {
        if breakpoints.len() < 2 {
            return Err(PiecewiseError::BadShape(
                "need at least two breakpoints".into(),
            ));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(PiecewiseError::BadShape(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if w[0] >= w[1] {
                return Err(PiecewiseError::BadShape(format!(
                    "breakpoints not strictly ascending at {}",
                    w[1]
                )));
            }
        }
        let f = PiecewisePoly {
            breakpoints,
            pieces,
            integral_form,
        };
        if integral_form {
            f.check_continuity()?;
        }
        Ok(f)
    }

    /// Constant-height pieces over the given breakpoints.
    pub fn step(breakpoints: Vec<Rat>, heights: Vec<Rat>) -> Result<Self, PiecewiseError> {
        let pieces = heights
            .into_iter()
            .map(|h| [h, Rat::zero(), Rat::zero()])
            .collect();
        Self::new(breakpoints, pieces, false)
    }

    /// Continuous integral-form function from explicit pieces.
    pub fn integral_form(
        breakpoints: Vec<Rat>,
        pieces: Vec<[Rat; 3]>,
    ) -> Result<Self, PiecewiseError> {
        Self::new(breakpoints, pieces, true)
    }

    fn check_continuity(&self) -> Result<(), PiecewiseError> {
        for s in 0..self.pieces.len() - 1 {
            let left_end = self.piece_value(s, &self.breakpoints[s + 1]);
            let right_start = self.pieces[s + 1][0].clone();
            if left_end != right_start {
                return Err(PiecewiseError::Discontinuous(
                    self.breakpoints[s + 1].clone(),
                ));
            }
        }
        Ok(())
    }

    pub fn domain_start(&self) -> &Rat {
        &self.breakpoints[0]
    }

    pub fn domain_end(&self) -> &Rat {
        self.breakpoints.last().unwrap()
    }

    fn piece_value(&self, s: usize, t: &Rat) -> Rat {
        let u = t - &self.breakpoints[s];
        let [c0, c1, c2] = &self.pieces[s];
        c0 + &(c1 * &u) + &(c2 * &(&u * &u))
    }

    /// Index of the piece evaluated at `t`. Shared breakpoints resolve to the
    /// right piece except at the final breakpoint, which keeps the last piece.
    fn piece_index(&self, t: &Rat) -> Result<usize, PiecewiseError> {
        if t < self.domain_start() || t > self.domain_end() {
            return Err(PiecewiseError::OutOfDomain(t.clone()));
        }
        if t == self.domain_end() {
            return Ok(self.pieces.len() - 1);
        }
        // Last index with breakpoint <= t.
        let mut lo = 0usize;
        let mut hi = self.breakpoints.len() - 1;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if &self.breakpoints[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    pub fn eval(&self, t: &Rat) -> Result<Rat, PiecewiseError> {
        let s = self.piece_index(t)?;
        Ok(self.piece_value(s, t))
    }

    /// Antiderivative with value zero at the first breakpoint. Requires every
    /// piece to have degree at most one so the result stays within degree two.
    pub fn integrate(&self) -> Result<PiecewisePoly, PiecewiseError> {
        for (s, piece) in self.pieces.iter().enumerate() {
            if !piece[2].is_zero() {
                return Err(PiecewiseError::DegreeTooHigh(s));
            }
        }
        let mut acc = Rat::zero();
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let half = Rat::new(1, 2);
        for (s, piece) in self.pieces.iter().enumerate() {
            let width = &self.breakpoints[s + 1] - &self.breakpoints[s];
            pieces.push([acc.clone(), piece[0].clone(), &half * &piece[1]]);
            acc = acc + &piece[0] * &width + &half * &piece[1] * &width * &width;
        }
        PiecewisePoly::new(self.breakpoints.clone(), pieces, true)
    }

    /// Exact integral over `[a, b]`; both endpoints must lie in the domain.
    pub fn definite_integral(&self, a: &Rat, b: &Rat) -> Result<Rat, PiecewiseError> {
        if a > b || a < self.domain_start() || b > self.domain_end() {
            return Err(PiecewiseError::BadRange(a.clone(), b.clone()));
        }
        if a == b {
            return Ok(Rat::zero());
        }
        let third = Rat::new(1, 3);
        let half = Rat::new(1, 2);
        let mut total = Rat::zero();
        for s in 0..self.pieces.len() {
            let lo = self.breakpoints[s].clone().max(a.clone());
            let hi = self.breakpoints[s + 1].clone().min(b.clone());
            if lo >= hi {
                continue;
            }
            let [c0, c1, c2] = &self.pieces[s];
            let anti = |t: &Rat| -> Rat {
                let u = t - &self.breakpoints[s];
                let u2 = &u * &u;
                let u3 = &u2 * &u;
                c0 * &u + &(&half * &(c1 * &u2)) + &(&third * &(c2 * &u3))
            };
            total += anti(&hi) - anti(&lo);
        }
        Ok(total)
    }

    pub fn total_mass(&self) -> Rat {
        self.definite_integral(&self.domain_start().clone(), &self.domain_end().clone())
            .expect("domain endpoints are always valid")
    }

    /// Builds a density over `[start, end]` as the sum of possibly overlapping
    /// segments, each constant or a ramp. Regions not covered by any segment
    /// get height zero.
    pub fn from_segments(
        start: Rat,
        end: Rat,
        segments: &[(Rat, Rat, Segment)],
    ) -> Result<Self, PiecewiseError> {
        if start >= end {
            return Err(PiecewiseError::BadShape("empty domain".into()));
        }
        let mut cuts: Vec<Rat> = vec![start.clone(), end.clone()];
        for (a, b, _) in segments {
            if a >= b || a < &start || b > &end {
                return Err(PiecewiseError::BadShape(format!(
                    "segment [{a}, {b}] outside domain or empty"
                )));
            }
            cuts.push(a.clone());
            cuts.push(b.clone());
        }
        cuts.sort();
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len() - 1);
        let two = Rat::int(2);
        for w in cuts.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            let mut c0 = Rat::zero();
            let mut c1 = Rat::zero();
            for (a, b, seg) in segments {
                if a <= lo && hi <= b {
                    match seg {
                        Segment::Const(h) => c0 += h.clone(),
                        Segment::Ramp { origin } => {
                            // 2*(t - origin) rebased at lo.
                            c0 += &two * &(lo - origin);
                            c1 += two.clone();
                        }
                    }
                }
            }
            pieces.push([c0, c1, Rat::zero()]);
        }
        PiecewisePoly::new(cuts, pieces, false)
    }

    /// True if every piece is constant or linear.
    pub fn degree_at_most_one(&self) -> bool {
        self.pieces.iter().all(|p| p[2].is_zero())
    }

    /// True when the function never decreases. Each piece has a linear
    /// derivative, so checking it at both piece endpoints suffices; across
    /// breakpoints continuity is required separately for integral forms, and
    /// step functions are compared by value.
    pub fn nondecreasing(&self) -> bool {
        let two = Rat::int(2);
        for (s, [_, c1, c2]) in self.pieces.iter().enumerate() {
            let width = &self.breakpoints[s + 1] - &self.breakpoints[s];
            let d_start = c1.clone();
            let d_end = c1 + &(&two * &(c2 * &width));
            if d_start.is_negative() || d_end.is_negative() {
                return false;
            }
        }
        if !self.integral_form {
            for s in 0..self.pieces.len() - 1 {
                let left = self.piece_value(s, &self.breakpoints[s + 1]);
                if left > self.pieces[s + 1][0] {
                    return false;
                }
            }
        }
        true
    }

    /// Returns g with g(s) = f(factor * s); the domain shrinks by the same
    /// factor. Used to renormalize instances onto [0,1].
    pub fn reparameterize(&self, factor: &Rat) -> Result<Self, PiecewiseError> {
        if !factor.is_positive() {
            return Err(PiecewiseError::BadShape(
                "scaling factor must be positive".into(),
            ));
        }
        let inv = factor.clone().recip();
        let breakpoints = self.breakpoints.iter().map(|b| b * &inv).collect();
        let f2 = factor * factor;
        let pieces = self
            .pieces
            .iter()
            .map(|[c0, c1, c2]| [c0.clone(), c1 * factor, c2 * &f2])
            .collect();
        Self::new(breakpoints, pieces, self.integral_form)
    }
}
