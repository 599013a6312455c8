//! Embedding of a restricted-gate circuit into a consensus-halving instance.
//!
//! Each circuit node i owns the block [12i, 12(i+1)] and four agents named
//! ad, mid, cen, ex. Four sub-intervals of the block carry the node's value
//! as a cut offset: v^a = [b+1, b+2] where the gate's balance equation lives,
//! and v^m, v^-, v^+ at offsets 4, 7, 10, which relay the value so that later
//! blocks can read it with the parity they need. The mid/cen/ex agents each
//! put height 4 on two guard intervals and height 1 on two value intervals,
//! forcing their cut to copy the previous one; the ad agent adds a
//! gate-specific profile on top of its guards so that its balance holds
//! exactly when the node value equals the gate applied to its operands.
//!
//! With the leftmost piece negative and one cut per 3-unit window, the piece
//! directly left of each ex cut is positive, left of each cen cut negative;
//! gate profiles read operand values from those intervals.

mod codec;
mod integral;

pub use codec::{decode_cuts_to_values, encode_values_to_cuts};
pub use integral::integral_circuits;

use crate::ch::{CHError, CHInstance, IntegralValuation};
use crate::circuit::{Circuit, GateKind, SpecialCircuitCertificate};
use crate::piecewise::{PiecewiseError, PiecewisePoly, Segment};
use crate::rat::{rat, Rat};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("circuit certificate rejected: {0}")]
    UncertifiedCircuit(String),
    #[error("values do not satisfy the circuit: {0}")]
    ValuesDoNotSatisfyCircuit(String),
    #[error("solution leaves agent {agent} unbalanced by {imbalance}")]
    SolutionDoesNotSatisfyAgents { agent: usize, imbalance: Rat },
    #[error("cut structure unusable: {0}")]
    CutOutsideExpectedInterval(String),
    #[error("circuit outputs are not the last two nodes")]
    MissingOutputPair,
    #[error("agent {agent} density piece {piece} is neither constant nor an anchored ramp")]
    UnsupportedPieceKind { agent: usize, piece: usize },
    #[error("decoded values fail the circuit at node {node}")]
    DecodedValuesInconsistent { node: usize },
    #[error(transparent)]
    CH(#[from] CHError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

/// A circuit embedded as a consensus-halving instance. The instance stores
/// integral-form valuations for exact verification; `densities` keeps the
/// underlying density of every agent for window-mass arguments and for
/// generating integral circuits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddedInstance {
    #[serde(flatten)]
    pub instance: CHInstance,
    pub densities: Vec<PiecewisePoly>,
    #[serde(rename = "node_map")]
    pub node_agents: Vec<[usize; 4]>,
    #[serde(rename = "source_circuit")]
    pub source: Circuit,
    pub finis_present: bool,
}

impl EmbeddedInstance {
    pub fn node_count(&self) -> usize {
        self.node_agents.len()
    }

    pub fn agent_count(&self) -> usize {
        self.instance.n()
    }

    pub fn domain_length(&self) -> &Rat {
        &self.instance.domain_length
    }
}

fn base(i: usize) -> Rat {
    Rat::int(12 * i as i64)
}

fn off(i: usize, o: i64) -> Rat {
    base(i) + Rat::int(o)
}

/// Left endpoints of the four value intervals of block i.
pub(crate) fn value_interval_left(i: usize, which: usize) -> Rat {
    debug_assert!(which < 4);
    off(i, [1, 4, 7, 10][which])
}

const GUARD: i64 = 4;

fn seg(a: Rat, b: Rat, h: Rat) -> (Rat, Rat, Segment) {
    (a, b, Segment::Const(h))
}

/// Density segments of the ad agent for node i: the two border guards plus
/// the gate profile. The profile is the unique degree-at-most-one density on
/// the operand and output intervals that balances exactly at the gate
/// equation, given that operand mass left of an ex cut counts positive, left
/// of a cen cut negative, and the guards flank the output cut with fixed
/// opposite signs.
fn ad_segments(i: usize, kind: &GateKind, ins: &[usize]) -> Vec<(Rat, Rat, Segment)> {
    let g4 = Rat::int(GUARD);
    let one = Rat::one();
    let half = rat(1, 2);
    let mut segs = vec![seg(off(i, 0), off(i, 1), g4.clone())];
    // Scaling gates shift the second guard left to end the output interval at
    // width zeta; everyone else guards [b+2, b+3].
    let guard2 = match kind {
        GateKind::MulConst(z) => (off(i, 1) + z, off(i, 2) + z),
        _ => (off(i, 2), off(i, 3)),
    };
    segs.push(seg(guard2.0, guard2.1, g4));
    let va = (off(i, 1), off(i, 2));
    match kind {
        GateKind::Const(z) => {
            segs.push(seg(va.0.clone(), va.1.clone(), one));
            // Extra guard mass |2z-1| steers the balance point from 1/2 to z.
            let excess = Rat::int(2) * z.clone() - Rat::one();
            if excess.is_positive() {
                segs.push(seg(off(i, 2), off(i, 3), excess));
            } else if excess.is_negative() {
                segs.push(seg(off(i, 0), off(i, 1), -excess));
            }
        }
        GateKind::MulConst(z) => {
            let j = ins[0];
            segs.push(seg(value_interval_left(j, 3), off(j, 11), one));
            segs.push(seg(va.0.clone(), &va.0 + z, z.clone().recip()));
        }
        GateKind::Add => {
            for &j in ins {
                let l = value_interval_left(j, 3);
                segs.push(seg(l.clone(), l + &half, one.clone()));
            }
            segs.push(seg(va.0, va.1, one));
        }
        GateKind::Double01 => {
            let l = value_interval_left(ins[0], 3);
            segs.push(seg(l.clone(), l + &half, one));
            segs.push(seg(va.0, va.1, half));
        }
        GateKind::Square => {
            let l = value_interval_left(ins[0], 3);
            segs.push((
                l.clone(),
                &l + &one,
                Segment::Ramp { origin: l },
            ));
            segs.push(seg(va.0, va.1, one));
        }
        GateKind::Sub01 => {
            let j = value_interval_left(ins[0], 3);
            let k = value_interval_left(ins[1], 2);
            segs.push(seg(j.clone(), j + &one, one.clone()));
            segs.push(seg(k.clone(), k + &one, one.clone()));
            segs.push(seg(va.0, va.1, one.clone()));
            // Lifting the first guard to height 5 lets the cut retreat left
            // of the value interval when the true difference is negative.
            segs.push(seg(off(i, 0), off(i, 1), one));
        }
        _ => unreachable!("certificate admits only restricted gates"),
    }
    segs
}

/// Relay agent: guards at [b+3k, b+3k+1] and [b+3k+2, b+3k+3], unit mass on
/// the value intervals k-1 and k. Its balance forces its cut offset to equal
/// the previous interval's offset.
fn relay_segments(i: usize, which: usize) -> Vec<(Rat, Rat, Segment)> {
    let g4 = Rat::int(GUARD);
    let one = Rat::one();
    let s = 3 * which as i64;
    vec![
        seg(off(i, s), off(i, s + 1), g4.clone()),
        seg(off(i, s + 2), off(i, s + 3), g4),
        seg(
            value_interval_left(i, which - 1),
            value_interval_left(i, which - 1) + &one,
            one.clone(),
        ),
        seg(
            value_interval_left(i, which),
            value_interval_left(i, which) + &one,
            one,
        ),
    ]
}

fn density_from(
    domain_end: &Rat,
    segs: Vec<(Rat, Rat, Segment)>,
) -> Result<PiecewisePoly, PiecewiseError> {
    PiecewisePoly::from_segments(Rat::zero(), domain_end.clone(), &segs)
}

/// Gate kind and operand list per node: inputs map to None.
fn node_gates(c: &Circuit) -> Vec<Option<(GateKind, Vec<usize>)>> {
    let mut v: Vec<Option<(GateKind, Vec<usize>)>> = vec![None; c.nodes];
    for g in &c.gates {
        v[g.out] = Some((g.kind.clone(), g.ins.clone()));
    }
    v
}

/// Builds the 4-agents-per-node instance for a certified restricted circuit.
/// Cyclic circuits embed the same way; they simply have no input nodes.
pub fn build_gadgets(
    circuit: &Circuit,
    cert: &SpecialCircuitCertificate,
) -> Result<EmbeddedInstance, EmbedError> {
    cert.verify(circuit)
        .map_err(EmbedError::UncertifiedCircuit)?;
    if let Some(v) = circuit.validate_special().into_iter().next() {
        return Err(EmbedError::UncertifiedCircuit(v.to_string()));
    }
    let r = circuit.nodes;
    if r == 0 {
        return Err(EmbedError::UncertifiedCircuit("empty circuit".into()));
    }
    let domain_end = base(r);
    let gates = node_gates(circuit);
    let mut densities = Vec::with_capacity(4 * r);
    let mut node_agents = Vec::with_capacity(r);
    for i in 0..r {
        let first = densities.len();
        let ad = match &gates[i] {
            Some((kind, ins)) => ad_segments(i, kind, ins),
            None => {
                // Input node: guards only; the cut roams the value interval
                // and the relays copy wherever it lands.
                let g4 = Rat::int(GUARD);
                vec![
                    seg(off(i, 0), off(i, 1), g4.clone()),
                    seg(off(i, 2), off(i, 3), g4),
                ]
            }
        };
        densities.push(density_from(&domain_end, ad)?);
        for which in 1..4 {
            densities.push(density_from(&domain_end, relay_segments(i, which))?);
        }
        node_agents.push([first, first + 1, first + 2, first + 3]);
    }
    let agents = densities
        .iter()
        .map(|d| Ok(IntegralValuation::Piecewise(d.integrate()?)))
        .collect::<Result<Vec<_>, PiecewiseError>>()?;
    let instance = CHInstance::new(agents, domain_end)?;
    Ok(EmbeddedInstance {
        instance,
        densities,
        node_agents,
        source: circuit.clone(),
        finis_present: false,
    })
}

/// Appends the verification agent: unit mass on v^+ of the second-to-last
/// node and on v^- of the last node. Existing cuts balance it exactly when
/// those two node values agree; the circuit must expose them as its outputs.
pub fn add_finis(inst: &EmbeddedInstance) -> Result<EmbeddedInstance, EmbedError> {
    let r = inst.node_count();
    if r < 2 || inst.finis_present {
        return Err(EmbedError::MissingOutputPair);
    }
    if !inst.source.cyclic && inst.source.outputs != vec![r - 2, r - 1] {
        return Err(EmbedError::MissingOutputPair);
    }
    let one = Rat::one();
    let segs = vec![
        seg(
            value_interval_left(r - 2, 3),
            value_interval_left(r - 2, 3) + &one,
            one.clone(),
        ),
        seg(
            value_interval_left(r - 1, 2),
            value_interval_left(r - 1, 2) + &one,
            one,
        ),
    ];
    let finis = density_from(inst.domain_length(), segs)?;
    let mut densities = inst.densities.clone();
    densities.push(finis.clone());
    let mut agents = inst.instance.agents.clone();
    agents.push(IntegralValuation::Piecewise(finis.integrate()?));
    let instance = CHInstance::new(agents, inst.domain_length().clone())?;
    Ok(EmbeddedInstance {
        instance,
        densities,
        node_agents: inst.node_agents.clone(),
        source: inst.source.clone(),
        finis_present: true,
    })
}
