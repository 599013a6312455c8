//! Rewrites a general circuit over {CONST, ADD, SUB, MUL_CONST, MUL, MAX, MIN}
//! (plus the restricted gates themselves) into the restricted gate set
//! {CONST, ADD, MUL_CONST, SQUARE, DOUBLE_01, SUB_01} with scalars in (0,1].
//!
//! The rewrite is value-preserving only where the side conditions of the
//! restricted gates hold, so every source node must be certified to stay in
//! [0,1]. Certification runs on the source circuit, where MAX and MIN
//! propagate intervals exactly; the rewritten nodes then inherit ranges from
//! the identities used to express them, not from re-running interval
//! arithmetic on the expanded form (which is strictly weaker).
//!
//! Identities used, writing [x] for the node carrying x:
//!   ADD(a,b)      -> DOUBLE_01(ADD(a/2, b/2))
//!   SUB(a,b)      -> SUB_01(a, b)                 (needs a - b >= 0 pointwise)
//!   MUL(a,b)      -> DOUBLE_01((s^2 - (ha^2 + hb^2)) via SUB_01),
//!                    with ha = a/2, hb = b/2, s = ha + hb; equals ab/2 doubled
//!   MAX(a,b)      -> b + SUB_01(a, b)             (protocol addition)
//!   MIN(a,b)      -> SUB_01(a, SUB_01(a, b))
//!   MUL_CONST z>1 -> MUL_CONST(z/2^k) then k DOUBLE_01 gates
//!   CONST 0, or any provably-zero gate -> SUB_01(one, one)

use super::{propagate_intervals, Circuit, CircuitBuilder, GateKind, NodeId, Violation};
use crate::rat::{rat, Rat};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LowerError {
    #[error("source node {node} has range [{lo}, {hi}], cannot prove it stays within {need}")]
    RangeUnprovable {
        node: NodeId,
        lo: Rat,
        hi: Rat,
        need: &'static str,
    },
    #[error("gate {gate} ({kind}) cannot be lowered")]
    UnsupportedGate { gate: usize, kind: String },
    #[error("source circuit invalid: {0}")]
    InvalidSource(Violation),
    #[error("expected one range per source node ({expected}), got {got}")]
    RangeCountMismatch { expected: usize, got: usize },
    #[error("cannot lower a cyclic circuit; lower the open form first")]
    CyclicSource,
}

/// Operand ranges recorded for one ADD gate of the lowered circuit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddInputRange {
    pub gate: usize,
    pub lhs: (Rat, Rat),
    pub rhs: (Rat, Rat),
}

/// Proof data for the side conditions of a lowered circuit: a value range per
/// node, operand ranges for every ADD, and size bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialCircuitCertificate {
    pub node_ranges: Vec<(Rat, Rat)>,
    pub add_inputs: Vec<AddInputRange>,
    pub source_nodes: usize,
    pub source_gates: usize,
    pub special_nodes: usize,
    pub special_gates: usize,
}

impl SpecialCircuitCertificate {
    /// Re-checks the certificate against the circuit it describes: ranges in
    /// [0,1], ADD and DOUBLE_01 operands in [0,1/2], scalars in (0,1].
    pub fn verify(&self, circuit: &Circuit) -> Result<(), String> {
        if self.node_ranges.len() != circuit.nodes {
            return Err(format!(
                "certificate covers {} nodes, circuit has {}",
                self.node_ranges.len(),
                circuit.nodes
            ));
        }
        let one = Rat::one();
        let half = rat(1, 2);
        for (node, (lo, hi)) in self.node_ranges.iter().enumerate() {
            if lo > hi || lo.is_negative() || hi > &one {
                return Err(format!("node {node} range [{lo}, {hi}] not within [0, 1]"));
            }
        }
        let mut add_seen = 0usize;
        for (gi, gate) in circuit.gates.iter().enumerate() {
            match &gate.kind {
                GateKind::Add => {
                    let rec = self
                        .add_inputs
                        .iter()
                        .find(|a| a.gate == gi)
                        .ok_or_else(|| format!("ADD gate {gi} has no recorded operand ranges"))?;
                    add_seen += 1;
                    for (side, r) in [("lhs", &rec.lhs), ("rhs", &rec.rhs)] {
                        if r.1 > half {
                            return Err(format!(
                                "ADD gate {gi} {side} range [{}, {}] exceeds 1/2",
                                r.0, r.1
                            ));
                        }
                    }
                    if rec.lhs != self.node_ranges[gate.ins[0]]
                        || rec.rhs != self.node_ranges[gate.ins[1]]
                    {
                        return Err(format!(
                            "ADD gate {gi} operand ranges disagree with node ranges"
                        ));
                    }
                }
                GateKind::Double01 => {
                    let r = &self.node_ranges[gate.ins[0]];
                    if r.1 > half {
                        return Err(format!(
                            "DOUBLE_01 gate {gi} input range [{}, {}] exceeds 1/2",
                            r.0, r.1
                        ));
                    }
                }
                GateKind::Const(z) | GateKind::MulConst(z) => {
                    if !z.is_positive() || z > &one {
                        return Err(format!("gate {gi} scalar {z} outside (0, 1]"));
                    }
                }
                _ => {}
            }
        }
        if add_seen != self.add_inputs.len() {
            return Err("certificate records ranges for nonexistent ADD gates".into());
        }
        Ok(())
    }
}

struct Emitter {
    b: CircuitBuilder,
    ranges: Vec<(Rat, Rat)>,
    add_inputs: Vec<AddInputRange>,
    gates_emitted: usize,
    one_node: Option<NodeId>,
    zero_node: Option<NodeId>,
}

impl Emitter {
    fn input(&mut self, range: (Rat, Rat)) -> NodeId {
        let id = self.b.input();
        debug_assert_eq!(id, self.ranges.len());
        self.ranges.push(range);
        id
    }

    fn gate(&mut self, kind: GateKind, ins: Vec<NodeId>, range: (Rat, Rat)) -> NodeId {
        if let GateKind::Add = kind {
            self.add_inputs.push(AddInputRange {
                gate: self.gates_emitted,
                lhs: self.ranges[ins[0]].clone(),
                rhs: self.ranges[ins[1]].clone(),
            });
        }
        self.gates_emitted += 1;
        let id = self.b.push(kind, ins);
        debug_assert_eq!(id, self.ranges.len());
        self.ranges.push(range);
        id
    }

    fn zero(&mut self) -> NodeId {
        if let Some(z) = self.zero_node {
            return z;
        }
        let one = match self.one_node {
            Some(o) => o,
            None => {
                let o = self.gate(GateKind::Const(Rat::one()), vec![], (Rat::one(), Rat::one()));
                self.one_node = Some(o);
                o
            }
        };
        let z = self.gate(GateKind::Sub01, vec![one, one], (Rat::zero(), Rat::zero()));
        self.zero_node = Some(z);
        z
    }

    fn half_of(&mut self, a: NodeId) -> NodeId {
        let (lo, hi) = self.ranges[a].clone();
        self.gate(
            GateKind::MulConst(rat(1, 2)),
            vec![a],
            (lo * rat(1, 2), hi * rat(1, 2)),
        )
    }

    /// a + b through the halve/double protocol; `range` is the certified range
    /// of the sum and must sit inside [0,1].
    fn protocol_add(&mut self, a: NodeId, b: NodeId, range: (Rat, Rat)) -> NodeId {
        debug_assert!(range.1 <= Rat::one());
        let ha = self.half_of(a);
        let hb = self.half_of(b);
        let half_range = (range.0.clone() * rat(1, 2), range.1.clone() * rat(1, 2));
        let s = self.gate(GateKind::Add, vec![ha, hb], half_range);
        self.gate(GateKind::Double01, vec![s], range)
    }

    fn sub01(&mut self, a: NodeId, b: NodeId, range: (Rat, Rat)) -> NodeId {
        self.gate(GateKind::Sub01, vec![a, b], range)
    }
}

/// Clamp an interval difference max(a-b, 0) into [0,1] given operand ranges
/// already inside [0,1].
fn sub01_range(ra: &(Rat, Rat), rb: &(Rat, Rat)) -> (Rat, Rat) {
    let lo = (&ra.0 - &rb.1).max(Rat::zero());
    let hi = (&ra.1 - &rb.0).max(Rat::zero());
    (lo, hi)
}

pub fn lower_to_special(
    circuit: &Circuit,
) -> Result<(Circuit, SpecialCircuitCertificate), LowerError> {
    if circuit.cyclic {
        return Err(LowerError::CyclicSource);
    }
    let unit = (Rat::zero(), Rat::one());
    let boxes = vec![unit; circuit.inputs.len()];
    let ranges = propagate_intervals(circuit, &boxes).map_err(|_| LowerError::CyclicSource)?;
    lower_with_ranges(circuit, &ranges)
}

/// Lowering with caller-supplied source ranges. The ranges must be invariants
/// of the source circuit on its intended input domain; they are taken on
/// trust, which lets callers use domain knowledge (e.g. inputs confined to a
/// probability simplex) that interval propagation cannot see.
pub fn lower_with_ranges(
    circuit: &Circuit,
    source_ranges: &[(Rat, Rat)],
) -> Result<(Circuit, SpecialCircuitCertificate), LowerError> {
    if circuit.cyclic {
        return Err(LowerError::CyclicSource);
    }
    if let Some(v) = circuit.validate().into_iter().next() {
        return Err(LowerError::InvalidSource(v));
    }
    if source_ranges.len() != circuit.nodes {
        return Err(LowerError::RangeCountMismatch {
            expected: circuit.nodes,
            got: source_ranges.len(),
        });
    }
    let one = Rat::one();
    let half = rat(1, 2);
    for (node, (lo, hi)) in source_ranges.iter().enumerate() {
        if lo.is_negative() || hi > &one || lo > hi {
            return Err(LowerError::RangeUnprovable {
                node,
                lo: lo.clone(),
                hi: hi.clone(),
                need: "[0, 1]",
            });
        }
    }

    let mut em = Emitter {
        b: CircuitBuilder::new(),
        ranges: Vec::new(),
        add_inputs: Vec::new(),
        gates_emitted: 0,
        one_node: None,
        zero_node: None,
    };
    let mut map: Vec<Option<NodeId>> = vec![None; circuit.nodes];
    for &i in &circuit.inputs {
        map[i] = Some(em.input(source_ranges[i].clone()));
    }
    for (gi, gate) in circuit.gates.iter().enumerate() {
        let rng = source_ranges[gate.out].clone();
        let arg = |i: usize| map[gate.ins[i]].expect("topological order");
        // A gate whose value is pinned to zero is replaced outright; this also
        // absorbs CONST 0 and MUL_CONST 0, which the restricted scalars forbid.
        if rng == (Rat::zero(), Rat::zero()) {
            map[gate.out] = Some(em.zero());
            continue;
        }
        let new = match &gate.kind {
            GateKind::Const(z) => em.gate(GateKind::Const(z.clone()), vec![], rng),
            GateKind::Add => {
                let (a, b) = (arg(0), arg(1));
                em.protocol_add(a, b, rng)
            }
            GateKind::Sub => {
                // All surviving nodes are certified nonnegative, so the source
                // difference never dips below zero and SUB_01 agrees with it.
                let (a, b) = (arg(0), arg(1));
                em.sub01(a, b, rng)
            }
            GateKind::MulConst(z) => {
                let a = arg(0);
                if z.is_negative() {
                    // A negative scalar on a nonnegative, nonzero range cannot
                    // have passed the [0,1] check above.
                    return Err(LowerError::UnsupportedGate {
                        gate: gi,
                        kind: format!("MUL_CONST {z}"),
                    });
                } else if z <= &one {
                    em.gate(GateKind::MulConst(z.clone()), vec![a], rng)
                } else {
                    let mut k = 0u32;
                    let mut scaled = z.clone();
                    while scaled > one {
                        scaled = scaled * rat(1, 2);
                        k += 1;
                    }
                    let mut pow = Rat::one();
                    for _ in 0..k {
                        pow = pow * rat(1, 2);
                    }
                    let mut cur_range = (rng.0.clone() * pow.clone(), rng.1.clone() * pow);
                    let mut cur = em.gate(GateKind::MulConst(scaled), vec![a], cur_range.clone());
                    for _ in 0..k {
                        cur_range = (
                            cur_range.0 * Rat::int(2),
                            cur_range.1 * Rat::int(2),
                        );
                        cur = em.gate(GateKind::Double01, vec![cur], cur_range.clone());
                    }
                    cur
                }
            }
            GateKind::Mul => {
                let (a, b) = (arg(0), arg(1));
                if gate.ins[0] == gate.ins[1] {
                    em.gate(GateKind::Square, vec![a], rng)
                } else {
                    let ha = em.half_of(a);
                    let hb = em.half_of(b);
                    let ra = em.ranges[ha].clone();
                    let rb = em.ranges[hb].clone();
                    let s_range = (&ra.0 + &rb.0, &ra.1 + &rb.1);
                    let s = em.gate(GateKind::Add, vec![ha, hb], s_range.clone());
                    let s2 = em.gate(
                        GateKind::Square,
                        vec![s],
                        (&s_range.0 * &s_range.0, &s_range.1 * &s_range.1),
                    );
                    let qa = em.gate(GateKind::Square, vec![ha], (&ra.0 * &ra.0, &ra.1 * &ra.1));
                    let qb = em.gate(GateKind::Square, vec![hb], (&rb.0 * &rb.0, &rb.1 * &rb.1));
                    let t_range = (
                        &em.ranges[qa].0 + &em.ranges[qb].0,
                        &em.ranges[qa].1 + &em.ranges[qb].1,
                    );
                    let t = em.gate(GateKind::Add, vec![qa, qb], t_range);
                    // s^2 - (ha^2 + hb^2) = ab/2, which inherits half the
                    // certified product range.
                    let u_range = (rng.0.clone() * rat(1, 2), rng.1.clone() * rat(1, 2));
                    let u = em.sub01(s2, t, u_range);
                    em.gate(GateKind::Double01, vec![u], rng)
                }
            }
            GateKind::Max => {
                let (a, b) = (arg(0), arg(1));
                let d_range = sub01_range(&source_ranges[gate.ins[0]], &source_ranges[gate.ins[1]]);
                let d = em.sub01(a, b, d_range);
                em.protocol_add(b, d, rng)
            }
            GateKind::Min => {
                let (a, b) = (arg(0), arg(1));
                let ra = &source_ranges[gate.ins[0]];
                let rb = &source_ranges[gate.ins[1]];
                let d_range = sub01_range(ra, rb);
                let d = em.sub01(a, b, d_range);
                em.sub01(a, d, rng)
            }
            GateKind::Square => em.gate(GateKind::Square, vec![arg(0)], rng),
            GateKind::Double01 => {
                let rin = &source_ranges[gate.ins[0]];
                if rin.1 > half {
                    return Err(LowerError::RangeUnprovable {
                        node: gate.ins[0],
                        lo: rin.0.clone(),
                        hi: rin.1.clone(),
                        need: "[0, 1/2]",
                    });
                }
                em.gate(GateKind::Double01, vec![arg(0)], rng)
            }
            GateKind::Sub01 => em.sub01(arg(0), arg(1), rng),
            GateKind::CmpGt => {
                return Err(LowerError::UnsupportedGate {
                    gate: gi,
                    kind: gate.kind.name().into(),
                })
            }
        };
        map[gate.out] = Some(new);
    }
    let outputs: Vec<NodeId> = circuit
        .outputs
        .iter()
        .map(|&o| map[o].expect("undefined output"))
        .collect();
    let lowered = em.b.finish(outputs);
    debug_assert!(lowered.validate_special().is_empty());
    let cert = SpecialCircuitCertificate {
        node_ranges: em.ranges,
        add_inputs: em.add_inputs,
        source_nodes: circuit.nodes,
        source_gates: circuit.gates.len(),
        special_nodes: lowered.nodes,
        special_gates: lowered.gates.len(),
    };
    debug_assert!(cert.verify(&lowered).is_ok());
    Ok((lowered, cert))
}
