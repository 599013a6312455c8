//! Circuits computing each agent's integral valuation F_i(t).
//!
//! Every gadget density is a sum of constant plateaus and ramps anchored at
//! their piece start. The clamp D_s(t) = min(max(t, p_{s-1}), p_s) turns each
//! piece into a closed-form term: a plateau of height c contributes
//! c * (D_s(t) - p_{s-1}), a ramp contributes (D_s(t) - p_{s-1})^2. Summing
//! the terms gives F_i exactly, using general gates only.

use super::{EmbedError, EmbeddedInstance};
use crate::circuit::{Circuit, CircuitBuilder, GateKind, NodeId};
use crate::piecewise::PiecewisePoly;
use crate::rat::Rat;

fn density_circuit(agent: usize, density: &PiecewisePoly) -> Result<Circuit, EmbedError> {
    let mut b = CircuitBuilder::new();
    let t = b.input();
    let mut terms: Vec<NodeId> = Vec::new();
    for (s, piece) in density.pieces.iter().enumerate() {
        let [c0, c1, c2] = piece;
        if !c2.is_zero() {
            return Err(EmbedError::UnsupportedPieceKind { agent, piece: s });
        }
        if c0.is_zero() && c1.is_zero() {
            continue;
        }
        let lo = density.breakpoints[s].clone();
        let hi = density.breakpoints[s + 1].clone();
        let lo_node = b.constant(lo);
        let hi_node = b.constant(hi);
        let clamped_lo = b.binary(GateKind::Max, t, lo_node);
        let d = b.binary(GateKind::Min, clamped_lo, hi_node);
        let shifted = b.binary(GateKind::Sub, d, lo_node);
        if c1.is_zero() {
            terms.push(b.unary(GateKind::MulConst(c0.clone()), shifted));
        } else if c1 == &Rat::int(2) && c0.is_zero() {
            terms.push(b.unary(GateKind::Square, shifted));
        } else {
            return Err(EmbedError::UnsupportedPieceKind { agent, piece: s });
        }
    }
    let out = match terms.len() {
        0 => b.constant(Rat::zero()),
        _ => {
            let mut acc = terms[0];
            for &term in &terms[1..] {
                acc = b.binary(GateKind::Add, acc, term);
            }
            acc
        }
    };
    Ok(b.finish(vec![out]))
}

/// One circuit per agent computing F_i(t) on the embedding domain.
pub fn integral_circuits(inst: &EmbeddedInstance) -> Result<Vec<Circuit>, EmbedError> {
    inst.densities
        .iter()
        .enumerate()
        .map(|(a, d)| density_circuit(a, d))
        .collect()
}
