//! Conversions between node-value tuples of the source circuit and cut
//! vectors of the embedded instance.
//!
//! Encoding places, for node i with value z_i, cuts at offsets 1+z_i, 4+z_i,
//! 7+z_i, 10+z_i inside block i. The one exception is a SUB_01 node whose
//! true difference is negative: its output is 0 and its ad cut retreats into
//! the height-5 guard, to 1 - (z_k - z_j)/5 left of the block base plus one.
//! Decoding reads z_i back off the ex cut and re-checks everything.

use super::{value_interval_left, EmbedError, EmbeddedInstance};
use crate::ch::{verify, CHSolution, Sign};
use crate::circuit::GateKind;
use crate::rat::{rat, Rat};

fn side_condition_violation(inst: &EmbeddedInstance, z: &[Rat]) -> Option<String> {
    let half = rat(1, 2);
    for g in &inst.source.gates {
        let needs_half = matches!(g.kind, GateKind::Add | GateKind::Double01);
        if needs_half {
            for &j in &g.ins {
                if z[j] > half {
                    return Some(format!(
                        "operand node {j} feeds {} with value {} > 1/2",
                        g.kind.name(),
                        z[j]
                    ));
                }
            }
        }
    }
    None
}

/// Cut vector exactly balancing every agent, given a value tuple that
/// satisfies the source circuit gate by gate.
pub fn encode_values_to_cuts(
    inst: &EmbeddedInstance,
    z: &[Rat],
) -> Result<CHSolution, EmbedError> {
    let r = inst.node_count();
    if z.len() != r {
        return Err(EmbedError::ValuesDoNotSatisfyCircuit(format!(
            "expected {r} node values, got {}",
            z.len()
        )));
    }
    for (i, zi) in z.iter().enumerate() {
        if zi.is_negative() || zi > &Rat::one() {
            return Err(EmbedError::ValuesDoNotSatisfyCircuit(format!(
                "node {i} value {zi} outside [0, 1]"
            )));
        }
    }
    if !inst.source.check_assignment(z) {
        return Err(EmbedError::ValuesDoNotSatisfyCircuit(
            "gate equations do not hold".into(),
        ));
    }
    if let Some(msg) = side_condition_violation(inst, z) {
        return Err(EmbedError::ValuesDoNotSatisfyCircuit(msg));
    }
    let gates = super::node_gates(&inst.source);
    let mut cuts = Vec::with_capacity(4 * r);
    for i in 0..r {
        let ad = match &gates[i] {
            Some((GateKind::Sub01, ins)) if z[ins[0]] < z[ins[1]] => {
                let d = (&z[ins[1]] - &z[ins[0]]) * rat(1, 5);
                value_interval_left(i, 0) - d
            }
            _ => value_interval_left(i, 0) + &z[i],
        };
        cuts.push(ad);
        for which in 1..4 {
            cuts.push(value_interval_left(i, which) + &z[i]);
        }
    }
    Ok(CHSolution {
        cuts,
        leftmost_sign: Sign::Minus,
    })
}

/// Reads the node values back from a solution that exactly balances every
/// agent with at most one cut per agent. Orientation does not matter: the
/// mirrored solution has identical cuts.
pub fn decode_cuts_to_values(
    inst: &EmbeddedInstance,
    sol: &CHSolution,
) -> Result<Vec<Rat>, EmbedError> {
    let r = inst.node_count();
    if sol.cuts.len() > inst.agent_count() {
        return Err(EmbedError::CutOutsideExpectedInterval(format!(
            "{} cuts exceed the {}-agent budget",
            sol.cuts.len(),
            inst.agent_count()
        )));
    }
    let report = verify(&inst.instance, sol, &Rat::zero())?;
    if let Some(v) = report.verdicts.iter().find(|v| !v.ok) {
        return Err(EmbedError::SolutionDoesNotSatisfyAgents {
            agent: v.agent,
            imbalance: v.imbalance.clone(),
        });
    }
    // Exactly one cut per 3-unit window; windows are half-open except the
    // last, which closes at the domain end.
    let windows = 4 * r;
    let mut per_window: Vec<Option<&Rat>> = vec![None; windows];
    for c in &sol.cuts {
        use num_traits::ToPrimitive;
        let w = (c.clone() * rat(1, 3))
            .floor_int()
            .to_usize()
            .ok_or_else(|| {
                EmbedError::CutOutsideExpectedInterval(format!("cut {c} outside the domain"))
            })?
            .min(windows - 1);
        if per_window[w].replace(c).is_some() {
            return Err(EmbedError::CutOutsideExpectedInterval(format!(
                "window {w} holds two cuts"
            )));
        }
    }
    if let Some(w) = per_window.iter().position(|x| x.is_none()) {
        return Err(EmbedError::CutOutsideExpectedInterval(format!(
            "window {w} holds no cut"
        )));
    }
    let mut z = Vec::with_capacity(r);
    for i in 0..r {
        let ex = per_window[4 * i + 3].unwrap();
        let zi = ex - &value_interval_left(i, 3);
        if zi.is_negative() || zi > Rat::one() {
            return Err(EmbedError::CutOutsideExpectedInterval(format!(
                "ex cut of node {i} at {ex} misses its value interval"
            )));
        }
        z.push(zi);
    }
    if !inst.source.check_assignment(&z) {
        let bad = inst
            .source
            .gates
            .iter()
            .position(|g| {
                let expect = match &g.kind {
                    GateKind::Const(c) => c.clone(),
                    GateKind::Add => &z[g.ins[0]] + &z[g.ins[1]],
                    GateKind::MulConst(c) => c * &z[g.ins[0]],
                    GateKind::Square => &z[g.ins[0]] * &z[g.ins[0]],
                    GateKind::Double01 => Rat::int(2) * z[g.ins[0]].clone(),
                    GateKind::Sub01 => (&z[g.ins[0]] - &z[g.ins[1]]).max(Rat::zero()),
                    _ => return true,
                };
                expect != z[g.out]
            })
            .map(|gi| inst.source.gates[gi].out)
            .unwrap_or(0);
        return Err(EmbedError::DecodedValuesInconsistent { node: bad });
    }
    Ok(z)
}
