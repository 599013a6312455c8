//! Consensus-halving instances, solutions, the exact verifier, and the
//! canonical form of a solution.
//!
//! An instance holds one integral valuation F_i per agent on [0, L]; a
//! solution is an ascending cut list plus the sign of the leftmost piece,
//! with piece signs alternating from there. Verification compares the mass
//! each agent assigns to the positive and negative parts, exactly.

use crate::circuit::{Circuit, CircuitError};
use crate::piecewise::{PiecewiseError, PiecewisePoly};
use crate::rat::Rat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Integral valuation F_i: either piecewise polynomial data or a circuit with
/// one input and one output. Circuits are evaluated at the raw coordinate, so
/// whoever builds the instance must build them for its domain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IntegralValuation {
    Piecewise(PiecewisePoly),
    Circuit(Circuit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CHInstance {
    pub agents: Vec<IntegralValuation>,
    pub domain_length: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CHSolution {
    pub cuts: Vec<Rat>,
    pub leftmost_sign: Sign,
}

/// Cut list with an explicit sign per piece; the input form of
/// `canonicalize`, which turns it into the alternating representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSolution {
    pub cuts: Vec<Rat>,
    pub piece_signs: Vec<Sign>,
}

#[derive(Debug, thiserror::Error)]
pub enum CHError {
    #[error("bad solution shape: {0}")]
    BadSolutionShape(String),
    #[error("bad valuation for agent {agent}: {reason}")]
    BadValuation { agent: usize, reason: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub agent: usize,
    pub positive: Rat,
    pub negative: Rat,
    pub imbalance: Rat,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdicts: Vec<AgentVerdict>,
    pub ok: bool,
}

impl CHSolution {
    pub fn signs(&self, pieces: usize) -> Vec<Sign> {
        let mut s = self.leftmost_sign;
        (0..pieces)
            .map(|_| {
                let cur = s;
                s = s.flip();
                cur
            })
            .collect()
    }

    pub fn to_raw(&self) -> RawSolution {
        RawSolution {
            cuts: self.cuts.clone(),
            piece_signs: self.signs(self.cuts.len() + 1),
        }
    }

    /// The symmetric partner: same cuts, every piece sign flipped.
    pub fn mirrored(&self) -> CHSolution {
        CHSolution {
            cuts: self.cuts.clone(),
            leftmost_sign: self.leftmost_sign.flip(),
        }
    }
}

impl CHInstance {
    pub fn new(agents: Vec<IntegralValuation>, domain_length: Rat) -> Result<Self, CHError> {
        if !domain_length.is_positive() {
            return Err(CHError::BadSolutionShape(
                "domain length must be positive".into(),
            ));
        }
        let inst = CHInstance {
            agents,
            domain_length,
        };
        for agent in 0..inst.n() {
            inst.check_agent(agent)?;
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    fn check_agent(&self, agent: usize) -> Result<(), CHError> {
        let bad = |reason: String| CHError::BadValuation { agent, reason };
        match &self.agents[agent] {
            IntegralValuation::Piecewise(p) => {
                if !p.integral_form {
                    return Err(bad("piecewise valuation must be in integral form".into()));
                }
                if !p.domain_start().is_zero() || p.domain_end() != &self.domain_length {
                    return Err(bad(format!(
                        "integral domain is [{}, {}], expected [0, {}]",
                        p.domain_start(),
                        p.domain_end(),
                        self.domain_length
                    )));
                }
                if !p.eval(&Rat::zero())?.is_zero() {
                    return Err(bad("integral must vanish at 0".into()));
                }
                if !p.nondecreasing() {
                    return Err(bad("integral must be nondecreasing".into()));
                }
            }
            IntegralValuation::Circuit(c) => {
                if c.cyclic || c.inputs.len() != 1 || c.outputs.len() != 1 {
                    return Err(bad(
                        "circuit valuation must be acyclic with one input and one output".into(),
                    ));
                }
                if let Some(v) = c.validate().into_iter().next() {
                    return Err(bad(v.to_string()));
                }
                let at_zero = c.eval_outputs(&[Rat::zero()])?;
                if !at_zero[0].is_zero() {
                    return Err(bad(format!(
                        "integral must vanish at 0, circuit gives {}",
                        at_zero[0]
                    )));
                }
            }
        }
        Ok(())
    }

    /// F_agent(t), exactly.
    pub fn eval(&self, agent: usize, t: &Rat) -> Result<Rat, CHError> {
        match &self.agents[agent] {
            IntegralValuation::Piecewise(p) => Ok(p.eval(t)?),
            IntegralValuation::Circuit(c) => {
                Ok(c.eval_outputs(std::slice::from_ref(t))?.remove(0))
            }
        }
    }

    /// F_agent over the whole domain.
    pub fn total(&self, agent: usize) -> Result<Rat, CHError> {
        self.eval(agent, &self.domain_length.clone())
    }
}

fn check_cut_shape(domain_length: &Rat, cuts: &[Rat]) -> Result<(), CHError> {
    let mut prev = Rat::zero();
    for (i, c) in cuts.iter().enumerate() {
        if c < &prev {
            return Err(CHError::BadSolutionShape(format!(
                "cut {i} at {c} breaks ascending order"
            )));
        }
        if c > domain_length {
            return Err(CHError::BadSolutionShape(format!(
                "cut {i} at {c} outside [0, {domain_length}]"
            )));
        }
        prev = c.clone();
    }
    Ok(())
}

fn split_signed(
    inst: &CHInstance,
    cuts: &[Rat],
    signs: &[Sign],
    agent: usize,
) -> Result<(Rat, Rat), CHError> {
    let mut pos = Rat::zero();
    let mut neg = Rat::zero();
    let mut left = Rat::zero();
    let f_left = inst.eval(agent, &left)?;
    let mut f_at_left = f_left;
    for (i, sign) in signs.iter().enumerate() {
        let right = if i < cuts.len() {
            cuts[i].clone()
        } else {
            inst.domain_length.clone()
        };
        let f_at_right = inst.eval(agent, &right)?;
        let mass = &f_at_right - &f_at_left;
        match sign {
            Sign::Plus => pos += mass,
            Sign::Minus => neg += mass,
        }
        left = right;
        f_at_left = f_at_right;
    }
    let _ = left;
    Ok((pos, neg))
}

/// Full admissibility check for a solution against an instance: ascending
/// cuts inside the domain and at most one cut per agent.
pub fn check_solution(inst: &CHInstance, sol: &CHSolution) -> Result<(), CHError> {
    check_cut_shape(&inst.domain_length, &sol.cuts)?;
    if sol.cuts.len() > inst.n() {
        return Err(CHError::BadSolutionShape(format!(
            "{} cuts for {} agents",
            sol.cuts.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Exact (F_i(A_+), F_i(A_-)) for one agent. Accepts any ascending in-domain
/// cut list; the cut-count budget is policed by `check_solution`.
pub fn value_split(
    inst: &CHInstance,
    sol: &CHSolution,
    agent: usize,
) -> Result<(Rat, Rat), CHError> {
    check_cut_shape(&inst.domain_length, &sol.cuts)?;
    let signs = sol.signs(sol.cuts.len() + 1);
    split_signed(inst, &sol.cuts, &signs, agent)
}

/// Per-agent balance check: |F_i(A_+) - F_i(A_-)| <= tol, compared exactly.
/// tol = 0 demands exact balance.
pub fn verify(inst: &CHInstance, sol: &CHSolution, tol: &Rat) -> Result<VerifyReport, CHError> {
    let mut verdicts = Vec::with_capacity(inst.n());
    let mut all_ok = true;
    for agent in 0..inst.n() {
        let (positive, negative) = value_split(inst, sol, agent)?;
        let imbalance = (&positive - &negative).abs();
        let ok = &imbalance <= tol;
        all_ok &= ok;
        verdicts.push(AgentVerdict {
            agent,
            positive,
            negative,
            imbalance,
            ok,
        });
    }
    Ok(VerifyReport {
        verdicts,
        ok: all_ok,
    })
}

/// Rewrites an arbitrary signed cut list into alternating form: interior
/// zero-width pieces are dropped, a cut separating two pieces of equal sign
/// is transferred to the domain end (where it bounds a zero-width piece), and
/// the piece signs then alternate by construction. Mass assigned to either
/// side is unchanged for every conceivable agent.
pub fn canonicalize(raw: &RawSolution, domain_length: &Rat) -> Result<CHSolution, CHError> {
    if raw.piece_signs.len() != raw.cuts.len() + 1 {
        return Err(CHError::BadSolutionShape(format!(
            "{} cuts need {} piece signs, got {}",
            raw.cuts.len(),
            raw.cuts.len() + 1,
            raw.piece_signs.len()
        )));
    }
    check_cut_shape(domain_length, &raw.cuts)?;

    // Pieces as (start, end, sign); ends at the domain boundary.
    let mut bounds: Vec<Rat> = Vec::with_capacity(raw.cuts.len() + 2);
    bounds.push(Rat::zero());
    bounds.extend(raw.cuts.iter().cloned());
    bounds.push(domain_length.clone());
    let mut pieces: Vec<(Rat, Rat, Sign)> = raw
        .piece_signs
        .iter()
        .enumerate()
        .map(|(i, &s)| (bounds[i].clone(), bounds[i + 1].clone(), s))
        .collect();

    // Drop zero-width pieces except those pinned to the domain end, which are
    // exactly the parking spots used by transferred cuts.
    pieces.retain(|(a, b, _)| a < b || a == domain_length);

    // Merge same-sign neighbors among the remaining real pieces, counting one
    // transferred cut per merge. Zero-width end pieces merge for free.
    let mut merged: Vec<(Rat, Rat, Sign)> = Vec::with_capacity(pieces.len());
    let mut transferred = 0usize;
    for (a, b, s) in pieces {
        match merged.last_mut() {
            Some((_, last_b, last_s)) if *last_s == s => {
                if a < b {
                    if *last_b == *domain_length {
                        // A real piece cannot follow an end marker.
                        unreachable!("zero-width end piece before a real piece");
                    }
                    transferred += 1;
                }
                *last_b = b;
            }
            _ => merged.push((a, b, s)),
        }
    }

    let leftmost_sign = merged.first().map_or(Sign::Plus, |p| p.2);
    let mut cuts: Vec<Rat> = merged[..merged.len() - 1]
        .iter()
        .map(|(_, b, _)| b.clone())
        .collect();
    cuts.extend(std::iter::repeat(domain_length.clone()).take(transferred));
    Ok(CHSolution {
        cuts,
        leftmost_sign,
    })
}

/// Rescales a solution between domain lengths.
pub fn scale_solution(sol: &CHSolution, from_len: &Rat, to_len: &Rat) -> CHSolution {
    let factor = to_len / from_len;
    CHSolution {
        cuts: sol.cuts.iter().map(|c| c * &factor).collect(),
        leftmost_sign: sol.leftmost_sign,
    }
}

/// Rescales an instance to domain [0,1]. Piecewise data is reparameterized
/// exactly; circuit valuations get a scaling gate in front of the input and
/// therefore leave the restricted gate set when the domain is longer than 1.
pub fn normalize_to_unit(inst: &CHInstance) -> Result<CHInstance, CHError> {
    use crate::circuit::{CircuitBuilder, GateKind};
    let len = inst.domain_length.clone();
    if len == Rat::one() {
        return Ok(inst.clone());
    }
    let mut agents = Vec::with_capacity(inst.n());
    for v in &inst.agents {
        agents.push(match v {
            IntegralValuation::Piecewise(p) => {
                IntegralValuation::Piecewise(p.reparameterize(&len)?)
            }
            IntegralValuation::Circuit(c) => {
                let mut b = CircuitBuilder::new();
                let x = b.input();
                let scaled = b.unary(GateKind::MulConst(len.clone()), x);
                let outs = b.paste(c, &[scaled]);
                IntegralValuation::Circuit(b.finish(outs))
            }
        });
    }
    CHInstance::new(agents, Rat::one())
}
