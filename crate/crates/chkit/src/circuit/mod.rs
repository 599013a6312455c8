//! Arithmetic circuit representation shared by the whole pipeline.
//!
//! Nodes are numbered 0..nodes and the numbering is topological: every gate
//! writes exactly one node and, in acyclic circuits, only reads nodes with
//! smaller ids. Cyclic circuits arise from closing a response map onto its own
//! inputs; they keep the gate list but drop the input/output lists and record
//! which nodes resulted from the merge.

mod interval;
mod lipschitz;
mod lower;

pub use interval::propagate_intervals;
pub use lipschitz::lipschitz_bound;
pub use lower::{
    lower_to_special, lower_with_ranges, AddInputRange, LowerError, SpecialCircuitCertificate,
};

use crate::rat::Rat;
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateKind {
    /// Fixed rational value.
    Const(Rat),
    Add,
    Sub,
    /// Multiplication by a fixed rational.
    MulConst(Rat),
    Mul,
    Max,
    Min,
    /// x^2, meaningful on [0,1].
    Square,
    /// 2x, meaningful on [0,1/2].
    Double01,
    /// max(x - y, 0), meaningful on [0,1]^2.
    Sub01,
    /// 1 if x > 0 else 0. Only decoder circuits may use it.
    CmpGt,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Const(_) => 0,
            GateKind::Square | GateKind::Double01 | GateKind::CmpGt | GateKind::MulConst(_) => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::Const(_) => "CONST",
            GateKind::Add => "ADD",
            GateKind::Sub => "SUB",
            GateKind::MulConst(_) => "MUL_CONST",
            GateKind::Mul => "MUL",
            GateKind::Max => "MAX",
            GateKind::Min => "MIN",
            GateKind::Square => "SQUARE",
            GateKind::Double01 => "DOUBLE_01",
            GateKind::Sub01 => "SUB_01",
            GateKind::CmpGt => "CMP_GT",
        }
    }

    pub fn zeta(&self) -> Option<&Rat> {
        match self {
            GateKind::Const(z) | GateKind::MulConst(z) => Some(z),
            _ => None,
        }
    }

    /// Gate set allowed in special circuits ready for embedding.
    pub fn is_special(&self) -> bool {
        matches!(
            self,
            GateKind::Const(_)
                | GateKind::Add
                | GateKind::MulConst(_)
                | GateKind::Square
                | GateKind::Double01
                | GateKind::Sub01
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub ins: Vec<NodeId>,
    pub out: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub nodes: usize,
    pub inputs: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
    pub gates: Vec<Gate>,
    pub cyclic: bool,
    /// Nodes created by merging an input with an output when closing a cycle.
    pub merged: Vec<NodeId>,
    /// Decoder circuits may contain comparison gates.
    pub decoder: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("node {node} referenced in {context} is out of range")]
    UndefinedNode { node: NodeId, context: String },
    #[error("node {node} written by more than one gate")]
    DuplicateProducer { node: NodeId },
    #[error("node {node} is neither an input nor produced by a gate")]
    MissingProducer { node: NodeId },
    #[error("gate {gate} ({kind}) expects {expected} inputs, got {got}")]
    ArityMismatch {
        gate: usize,
        kind: String,
        expected: usize,
        got: usize,
    },
    #[error("gate {gate} reads node {node} before it is defined")]
    TopologyBroken { gate: usize, node: NodeId },
    #[error("gate {gate} writes input node {node}")]
    InputOverwritten { gate: usize, node: NodeId },
    #[error("input node {node} listed twice")]
    DuplicateInput { node: NodeId },
    #[error("comparison gate at index {gate} outside a decoder circuit")]
    ComparisonGateForbidden { gate: usize },
    #[error("cyclic circuit must have empty input and output lists")]
    CyclicShape,
    #[error("gate {gate} ({kind}) is not allowed in a special circuit")]
    NotSpecialGate { gate: usize, kind: String },
    #[error("gate {gate} has scalar {zeta} outside (0,1]")]
    ZetaOutOfRange { gate: usize, zeta: Rat },
    #[error("gate list not sorted by output node at gate {gate}")]
    UnsortedGates { gate: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum CircuitError {
    #[error("cannot evaluate a cyclic circuit directly")]
    CyclicCircuit,
    #[error("expected {expected} input values, got {got}")]
    InputCountMismatch { expected: usize, got: usize },
    #[error("invalid circuit: {0}")]
    Invalid(Violation),
    #[error("circuit contains nonlinear gate {0}")]
    NonlinearCircuit(String),
}

impl Circuit {
    /// Structural checks. Returns every violation found rather than stopping
    /// at the first one.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut produced: Vec<u32> = vec![0; self.nodes];
        let mut is_input = vec![false; self.nodes];
        let mut seen_input = std::collections::HashSet::new();
        for &i in &self.inputs {
            if i >= self.nodes {
                out.push(Violation::UndefinedNode {
                    node: i,
                    context: "inputs".into(),
                });
                continue;
            }
            if !seen_input.insert(i) {
                out.push(Violation::DuplicateInput { node: i });
            }
            is_input[i] = true;
        }
        for &o in &self.outputs {
            if o >= self.nodes {
                out.push(Violation::UndefinedNode {
                    node: o,
                    context: "outputs".into(),
                });
            }
        }
        if self.cyclic && (!self.inputs.is_empty() || !self.outputs.is_empty()) {
            out.push(Violation::CyclicShape);
        }
        let mut prev_out: Option<NodeId> = None;
        for (gi, gate) in self.gates.iter().enumerate() {
            if gate.kind.arity() != gate.ins.len() {
                out.push(Violation::ArityMismatch {
                    gate: gi,
                    kind: gate.kind.name().into(),
                    expected: gate.kind.arity(),
                    got: gate.ins.len(),
                });
            }
            if matches!(gate.kind, GateKind::CmpGt) && !self.decoder {
                out.push(Violation::ComparisonGateForbidden { gate: gi });
            }
            if gate.out >= self.nodes {
                out.push(Violation::UndefinedNode {
                    node: gate.out,
                    context: format!("gate {gi} output"),
                });
                continue;
            }
            if is_input[gate.out] {
                out.push(Violation::InputOverwritten {
                    gate: gi,
                    node: gate.out,
                });
            }
            produced[gate.out] += 1;
            if let Some(p) = prev_out {
                if gate.out <= p {
                    out.push(Violation::UnsortedGates { gate: gi });
                }
            }
            prev_out = Some(gate.out);
            for &n in &gate.ins {
                if n >= self.nodes {
                    out.push(Violation::UndefinedNode {
                        node: n,
                        context: format!("gate {gi} input"),
                    });
                } else if !self.cyclic && n >= gate.out {
                    out.push(Violation::TopologyBroken { gate: gi, node: n });
                }
            }
        }
        for node in 0..self.nodes {
            if produced[node] > 1 {
                out.push(Violation::DuplicateProducer { node });
            }
            if produced[node] == 0 && !is_input[node] {
                out.push(Violation::MissingProducer { node });
            }
        }
        out
    }

    /// Checks on top of `validate` that the circuit uses only the restricted
    /// gate set with scalars in (0,1].
    pub fn validate_special(&self) -> Vec<Violation> {
        let mut out = self.validate();
        for (gi, gate) in self.gates.iter().enumerate() {
            if !gate.kind.is_special() {
                out.push(Violation::NotSpecialGate {
                    gate: gi,
                    kind: gate.kind.name().into(),
                });
            }
            if let Some(z) = gate.kind.zeta() {
                if !z.is_positive() || z > &Rat::one() {
                    out.push(Violation::ZetaOutOfRange {
                        gate: gi,
                        zeta: z.clone(),
                    });
                }
            }
        }
        out
    }

    fn apply(kind: &GateKind, args: &[&Rat]) -> Rat {
        match kind {
            GateKind::Const(z) => z.clone(),
            GateKind::Add => args[0] + args[1],
            GateKind::Sub => args[0] - args[1],
            GateKind::MulConst(z) => z * args[0],
            GateKind::Mul => args[0] * args[1],
            GateKind::Max => args[0].clone().max(args[1].clone()),
            GateKind::Min => args[0].clone().min(args[1].clone()),
            GateKind::Square => args[0] * args[0],
            GateKind::Double01 => Rat::int(2) * args[0].clone(),
            GateKind::Sub01 => (args[0] - args[1]).max(Rat::zero()),
            GateKind::CmpGt => {
                if args[0].is_positive() {
                    Rat::one()
                } else {
                    Rat::zero()
                }
            }
        }
    }

    /// Evaluates all nodes. The result vector is indexed by node id.
    pub fn evaluate(&self, inputs: &[Rat]) -> Result<Vec<Rat>, CircuitError> {
        if self.cyclic {
            return Err(CircuitError::CyclicCircuit);
        }
        if inputs.len() != self.inputs.len() {
            return Err(CircuitError::InputCountMismatch {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values: Vec<Rat> = vec![Rat::zero(); self.nodes];
        for (slot, v) in self.inputs.iter().zip(inputs) {
            values[*slot] = v.clone();
        }
        for gate in &self.gates {
            let args: Vec<&Rat> = gate.ins.iter().map(|&n| &values[n]).collect();
            let v = Self::apply(&gate.kind, &args);
            values[gate.out] = v;
        }
        Ok(values)
    }

    pub fn eval_outputs(&self, inputs: &[Rat]) -> Result<Vec<Rat>, CircuitError> {
        let values = self.evaluate(inputs)?;
        Ok(self.outputs.iter().map(|&o| values[o].clone()).collect())
    }

    /// Double-precision evaluation for solver inner loops. `scratch` must be
    /// at least `nodes` long; outputs are copied into `out`.
    pub fn evaluate_f64(&self, inputs: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        debug_assert!(!self.cyclic);
        debug_assert_eq!(inputs.len(), self.inputs.len());
        for (slot, v) in self.inputs.iter().zip(inputs) {
            scratch[*slot] = *v;
        }
        for gate in &self.gates {
            let v = match &gate.kind {
                GateKind::Const(z) => z.to_f64(),
                GateKind::Add => scratch[gate.ins[0]] + scratch[gate.ins[1]],
                GateKind::Sub => scratch[gate.ins[0]] - scratch[gate.ins[1]],
                GateKind::MulConst(z) => z.to_f64() * scratch[gate.ins[0]],
                GateKind::Mul => scratch[gate.ins[0]] * scratch[gate.ins[1]],
                GateKind::Max => scratch[gate.ins[0]].max(scratch[gate.ins[1]]),
                GateKind::Min => scratch[gate.ins[0]].min(scratch[gate.ins[1]]),
                GateKind::Square => scratch[gate.ins[0]] * scratch[gate.ins[0]],
                GateKind::Double01 => 2.0 * scratch[gate.ins[0]],
                GateKind::Sub01 => (scratch[gate.ins[0]] - scratch[gate.ins[1]]).max(0.0),
                GateKind::CmpGt => {
                    if scratch[gate.ins[0]] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            scratch[gate.out] = v;
        }
        for (slot, o) in self.outputs.iter().enumerate() {
            out[slot] = scratch[*o];
        }
    }

    /// True when `values` assigns every node consistently with its gate. Works
    /// for cyclic circuits, where it is the fixed-point condition.
    pub fn check_assignment(&self, values: &[Rat]) -> bool {
        if values.len() != self.nodes {
            return false;
        }
        self.gates.iter().all(|gate| {
            let args: Vec<&Rat> = gate.ins.iter().map(|&n| &values[n]).collect();
            Self::apply(&gate.kind, &args) == values[gate.out]
        })
    }

    /// Renumbers nodes so the gates producing the listed outputs become the
    /// highest-numbered nodes, in output order. Outputs must be distinct gate
    /// outputs that no other gate consumes.
    pub fn move_outputs_to_end(&self) -> Result<Circuit, CircuitError> {
        if self.cyclic {
            return Err(CircuitError::CyclicCircuit);
        }
        let is_output: std::collections::HashSet<NodeId> = self.outputs.iter().copied().collect();
        if is_output.len() != self.outputs.len() {
            return Err(CircuitError::Invalid(Violation::DuplicateInput {
                node: self.outputs[0],
            }));
        }
        for gate in &self.gates {
            for &n in &gate.ins {
                if is_output.contains(&n) {
                    return Err(CircuitError::Invalid(Violation::TopologyBroken {
                        gate: usize::MAX,
                        node: n,
                    }));
                }
            }
        }
        for &o in &self.outputs {
            if self.inputs.contains(&o) {
                return Err(CircuitError::Invalid(Violation::InputOverwritten {
                    gate: usize::MAX,
                    node: o,
                }));
            }
        }
        // New node order: inputs and non-output gate nodes keep their relative
        // order, then the output nodes in output-list order.
        let mut order: Vec<NodeId> = Vec::with_capacity(self.nodes);
        let mut defined_order: Vec<NodeId> = self.inputs.clone();
        defined_order.extend(self.gates.iter().map(|g| g.out));
        defined_order.sort_unstable();
        for n in defined_order {
            if !is_output.contains(&n) {
                order.push(n);
            }
        }
        order.extend(self.outputs.iter().copied());
        let mut remap = vec![usize::MAX; self.nodes];
        for (new_id, &old_id) in order.iter().enumerate() {
            remap[old_id] = new_id;
        }
        let mut gates: Vec<Gate> = self
            .gates
            .iter()
            .map(|g| Gate {
                kind: g.kind.clone(),
                ins: g.ins.iter().map(|&n| remap[n]).collect(),
                out: remap[g.out],
            })
            .collect();
        gates.sort_by_key(|g| g.out);
        Ok(Circuit {
            nodes: self.nodes,
            inputs: self.inputs.iter().map(|&n| remap[n]).collect(),
            outputs: self.outputs.iter().map(|&n| remap[n]).collect(),
            gates,
            cyclic: false,
            merged: Vec::new(),
            decoder: self.decoder,
        })
    }

    /// Closes a response map onto its own inputs: consumers of input j are
    /// rewired to output j, input nodes disappear, and the circuit becomes
    /// cyclic. Requires equally many inputs and outputs.
    pub fn close_cycle(&self) -> Result<Circuit, CircuitError> {
        if self.cyclic {
            return Err(CircuitError::CyclicCircuit);
        }
        if self.inputs.len() != self.outputs.len() {
            return Err(CircuitError::InputCountMismatch {
                expected: self.inputs.len(),
                got: self.outputs.len(),
            });
        }
        let mut redirect: Vec<Option<NodeId>> = vec![None; self.nodes];
        for (&i, &o) in self.inputs.iter().zip(&self.outputs) {
            redirect[i] = Some(o);
        }
        // Compact ids: drop former input nodes.
        let mut remap = vec![usize::MAX; self.nodes];
        let mut next = 0usize;
        for node in 0..self.nodes {
            if redirect[node].is_none() {
                remap[node] = next;
                next += 1;
            }
        }
        let resolve = |n: NodeId| -> NodeId {
            match redirect[n] {
                Some(target) => remap[target],
                None => remap[n],
            }
        };
        let gates: Vec<Gate> = self
            .gates
            .iter()
            .map(|g| Gate {
                kind: g.kind.clone(),
                ins: g.ins.iter().map(|&n| resolve(n)).collect(),
                out: remap[g.out],
            })
            .collect();
        Ok(Circuit {
            nodes: next,
            inputs: Vec::new(),
            outputs: Vec::new(),
            gates,
            cyclic: true,
            merged: self.outputs.iter().map(|&o| remap[o]).collect(),
            decoder: self.decoder,
        })
    }
}

/// Incremental construction helper keeping ids topological by design.
#[derive(Debug, Default)]
pub struct CircuitBuilder {
    nodes: usize,
    inputs: Vec<NodeId>,
    gates: Vec<Gate>,
    decoder: bool,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decoder() -> Self {
        CircuitBuilder {
            decoder: true,
            ..Self::default()
        }
    }

    pub fn input(&mut self) -> NodeId {
        let id = self.nodes;
        self.nodes += 1;
        self.inputs.push(id);
        id
    }

    pub fn push(&mut self, kind: GateKind, ins: Vec<NodeId>) -> NodeId {
        debug_assert_eq!(kind.arity(), ins.len());
        debug_assert!(ins.iter().all(|&n| n < self.nodes));
        let out = self.nodes;
        self.nodes += 1;
        self.gates.push(Gate { kind, ins, out });
        out
    }

    pub fn constant(&mut self, value: Rat) -> NodeId {
        self.push(GateKind::Const(value), vec![])
    }

    pub fn unary(&mut self, kind: GateKind, a: NodeId) -> NodeId {
        self.push(kind, vec![a])
    }

    pub fn binary(&mut self, kind: GateKind, a: NodeId, b: NodeId) -> NodeId {
        self.push(kind, vec![a, b])
    }

    /// Instantiates `sub` with its inputs wired to `bound`; returns the new
    /// ids of its outputs. `sub` must be acyclic.
    pub fn paste(&mut self, sub: &Circuit, bound: &[NodeId]) -> Vec<NodeId> {
        assert!(!sub.cyclic, "cannot paste a cyclic circuit");
        assert_eq!(bound.len(), sub.inputs.len());
        let mut map: Vec<Option<NodeId>> = vec![None; sub.nodes];
        for (&slot, &b) in sub.inputs.iter().zip(bound) {
            map[slot] = Some(b);
        }
        for gate in &sub.gates {
            let ins: Vec<NodeId> = gate
                .ins
                .iter()
                .map(|&n| map[n].expect("topological order broken in pasted circuit"))
                .collect();
            let out = self.push(gate.kind.clone(), ins);
            map[gate.out] = Some(out);
        }
        sub.outputs
            .iter()
            .map(|&o| map[o].expect("undefined output in pasted circuit"))
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn finish(self, outputs: Vec<NodeId>) -> Circuit {
        Circuit {
            nodes: self.nodes,
            inputs: self.inputs,
            outputs,
            gates: self.gates,
            cyclic: false,
            merged: Vec::new(),
            decoder: self.decoder,
        }
    }
}

// Serialized form: gates carry a kind tag plus optional scalar; node count is
// implied by the id space but stored anyway for readability.
#[derive(Serialize, Deserialize)]
struct GateRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zeta: Option<Rat>,
    #[serde(rename = "in")]
    ins: Vec<usize>,
    out: usize,
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    #[serde(default)]
    nodes: Option<usize>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    gates: Vec<GateRepr>,
    #[serde(default)]
    cyclic: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    merged: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    decoder: bool,
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = CircuitRepr {
            nodes: Some(self.nodes),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            gates: self
                .gates
                .iter()
                .map(|g| GateRepr {
                    kind: g.kind.name().to_string(),
                    zeta: g.kind.zeta().cloned(),
                    ins: g.ins.clone(),
                    out: g.out,
                })
                .collect(),
            cyclic: self.cyclic,
            merged: self.merged.clone(),
            decoder: self.decoder,
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CircuitRepr::deserialize(d)?;
        let mut gates = Vec::with_capacity(repr.gates.len());
        for g in repr.gates {
            let kind = match (g.kind.as_str(), g.zeta) {
                ("CONST", Some(z)) => GateKind::Const(z),
                ("MUL_CONST", Some(z)) => GateKind::MulConst(z),
                ("CONST" | "MUL_CONST", None) => {
                    return Err(D::Error::custom(format!("gate {} needs a zeta", g.kind)))
                }
                ("ADD", _) => GateKind::Add,
                ("SUB", _) => GateKind::Sub,
                ("MUL", _) => GateKind::Mul,
                ("MAX", _) => GateKind::Max,
                ("MIN", _) => GateKind::Min,
                ("SQUARE", _) => GateKind::Square,
                ("DOUBLE_01", _) => GateKind::Double01,
                ("SUB_01", _) => GateKind::Sub01,
                ("CMP_GT", _) => GateKind::CmpGt,
                (other, _) => return Err(D::Error::custom(format!("unknown gate kind {other}"))),
            };
            gates.push(Gate {
                kind,
                ins: g.ins,
                out: g.out,
            });
        }
        let derived = gates
            .iter()
            .map(|g| g.out + 1)
            .chain(repr.inputs.iter().map(|&i| i + 1))
            .max()
            .unwrap_or(0);
        Ok(Circuit {
            nodes: repr.nodes.unwrap_or(derived).max(derived),
            inputs: repr.inputs,
            outputs: repr.outputs,
            gates,
            cyclic: repr.cyclic,
            merged: repr.merged,
            decoder: repr.decoder,
        })
    }
}
