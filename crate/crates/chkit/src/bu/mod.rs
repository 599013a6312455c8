//! Consensus halving as a Borsuk-Ulam problem on the L1 sphere.
//!
//! A point x on S^n = { x in R^{n+1} : sum |x_j| = 1 } encodes a cut list:
//! |x_j| is the width of the j-th piece and sign(x_j) its label. `ch_to_bu`
//! emits a circuit b with b(x)_i = F_i(A_+); a point with b(x) = b(-x) is
//! then exactly a consensus halving, which `decode_bu_solution` reads back
//! out. `tucker_solve` finds approximate such points by labelling a
//! triangulation of the sphere.

mod tucker;

pub use tucker::{
    tucker_solve, ApproxSolution, LipschitzWitness, TuckerComplex, TuckerOutcome,
    DIMENSION_LIMIT,
};

use crate::ch::{self, CHError, CHInstance, CHSolution, IntegralValuation, Sign};
use crate::circuit::{Circuit, CircuitBuilder, CircuitError, GateKind, NodeId};
use crate::rat::{linf_norm, rat, Rat};
use serde::{Deserialize, Serialize};

/// A map f: R^{d+1} -> R^d restricted to the L1 sphere S^d. The sphere
/// constraint lives on solution points, not in the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BUInstance {
    pub dimension: usize,
    pub circuit: Circuit,
    /// Set when the circuit is piecewise linear (no MUL or SQUARE gates).
    #[serde(default)]
    pub linear: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BUError {
    #[error("agent {agent} has a piecewise valuation; the reduction needs circuit-backed agents")]
    NonCircuitValuation { agent: usize },
    #[error("point is not on the L1 sphere: sum of |x_j| is {mass}, want 1")]
    NotOnSphere { mass: Rat },
    #[error("point does not solve the instance: agent {agent} imbalance {imbalance} exceeds {tol}")]
    NotABUSolution {
        agent: usize,
        imbalance: Rat,
        tol: Rat,
    },
    #[error("point has {got} coordinates, instance wants {expected}")]
    WrongPointLength { expected: usize, got: usize },
    #[error("map has {inputs} inputs and {outputs} outputs, dimension {dimension} wants {} and {dimension}", dimension + 1)]
    BadMapShape {
        inputs: usize,
        outputs: usize,
        dimension: usize,
    },
    #[error("sphere dimension {dimension} exceeds the search limit {limit}")]
    DimensionTooLarge { dimension: usize, limit: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: Rat },
    #[error("mesh needs {vertices} vertices per facet; refusing to allocate")]
    MeshTooFine { vertices: u128 },
    #[error("label scan finished without a complementary edge; the complex is inconsistent")]
    SearchExhausted,
    #[error(transparent)]
    CH(#[from] CHError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl BUInstance {
    pub fn new(dimension: usize, circuit: Circuit) -> Result<Self, BUError> {
        if circuit.inputs.len() != dimension + 1 || circuit.outputs.len() != dimension {
            return Err(BUError::BadMapShape {
                inputs: circuit.inputs.len(),
                outputs: circuit.outputs.len(),
                dimension,
            });
        }
        if circuit.cyclic {
            return Err(BUError::Circuit(CircuitError::CyclicCircuit));
        }
        if let Some(v) = circuit.validate().into_iter().next() {
            return Err(BUError::Circuit(CircuitError::Invalid(v)));
        }
        let linear = circuit_is_linear(&circuit);
        Ok(BUInstance {
            dimension,
            circuit,
            linear,
        })
    }

    /// f(x) at all output coordinates.
    pub fn eval(&self, x: &[Rat]) -> Result<Vec<Rat>, BUError> {
        Ok(self.circuit.eval_outputs(x)?)
    }

    /// f(x) - f(-x).
    pub fn eval_odd_part(&self, x: &[Rat]) -> Result<Vec<Rat>, BUError> {
        let fx = self.circuit.eval_outputs(x)?;
        let neg: Vec<Rat> = x.iter().map(|v| -v).collect();
        let fnx = self.circuit.eval_outputs(&neg)?;
        Ok(fx.iter().zip(&fnx).map(|(a, b)| a - b).collect())
    }
}

fn circuit_is_linear(c: &Circuit) -> bool {
    c.gates
        .iter()
        .all(|g| !matches!(g.kind, GateKind::Mul | GateKind::Square | GateKind::CmpGt))
}

/// Circuit computing g(x) = f(x) - f(-x), the odd part whose zeros are the
/// Borsuk-Ulam solutions.
pub fn odd_part_circuit(bu: &BUInstance) -> Circuit {
    let mut b = CircuitBuilder::new();
    let xs: Vec<NodeId> = (0..=bu.dimension).map(|_| b.input()).collect();
    let fx = b.paste(&bu.circuit, &xs);
    let negs: Vec<NodeId> = xs
        .iter()
        .map(|&x| b.unary(GateKind::MulConst(rat(-1, 1)), x))
        .collect();
    let fnx = b.paste(&bu.circuit, &negs);
    let outs = fx
        .iter()
        .zip(&fnx)
        .map(|(&a, &c)| b.binary(GateKind::Sub, a, c))
        .collect();
    b.finish(outs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BUVerdict {
    pub on_sphere: bool,
    /// max_i |f(x)_i - f(-x)_i|; absent when the point has the wrong arity.
    pub residual: Option<Rat>,
    pub ok: bool,
}

pub fn sphere_mass(x: &[Rat]) -> Rat {
    x.iter().map(|v| v.abs()).fold(Rat::zero(), |a, b| a + b)
}

/// Checks the sphere constraint exactly and the antipodal residual against
/// `tol`. Never errors; a malformed point yields a failing verdict.
pub fn bu_verify(bu: &BUInstance, x: &[Rat], tol: &Rat) -> BUVerdict {
    if x.len() != bu.dimension + 1 {
        return BUVerdict {
            on_sphere: false,
            residual: None,
            ok: false,
        };
    }
    let on_sphere = sphere_mass(x) == Rat::one();
    let residual = bu.eval_odd_part(x).ok().map(|g| linf_norm(&g));
    let ok = on_sphere && residual.as_ref().is_some_and(|r| r <= tol);
    BUVerdict {
        on_sphere,
        residual,
        ok,
    }
}

/// Circuit over `coords` signed piece widths computing each agent's mass on
/// the positive pieces, b(x)_i = F_i(A_+). The domain is renormalized to
/// unit length first. Widths accumulate as t_j = t_{j-1} + |x_j| with
/// |x_j| = max(x_j, 0) + max(-x_j, 0), and each agent contributes
/// q_j = F_i(t_{j-1} + max(x_j, 0)) - F_i(t_{j-1}) per piece. The output
/// stays free of MUL and SQUARE whenever the valuations are.
pub fn positive_mass_circuit(inst: &CHInstance, coords: usize) -> Result<Circuit, BUError> {
    for (agent, v) in inst.agents.iter().enumerate() {
        if matches!(v, IntegralValuation::Piecewise(_)) {
            return Err(BUError::NonCircuitValuation { agent });
        }
    }
    let unit = ch::normalize_to_unit(inst)?;
    let m = coords;

    let mut b = CircuitBuilder::new();
    let xs: Vec<NodeId> = (0..m).map(|_| b.input()).collect();
    let zero = b.constant(Rat::zero());
    let mut pos_parts = Vec::with_capacity(m);
    let mut widths = Vec::with_capacity(m);
    for &x in &xs {
        let p = b.binary(GateKind::Max, x, zero);
        let negx = b.unary(GateKind::MulConst(rat(-1, 1)), x);
        let q = b.binary(GateKind::Max, negx, zero);
        widths.push(b.binary(GateKind::Add, p, q));
        pos_parts.push(p);
    }
    // t_j = width of pieces 1..j; ts[j] is t_j, ts[0] = 0.
    let mut ts = vec![zero];
    for j in 0..m {
        ts.push(b.binary(GateKind::Add, ts[j], widths[j]));
    }

    let mut outs = Vec::with_capacity(unit.n());
    for valuation in &unit.agents {
        let f = match valuation {
            IntegralValuation::Circuit(c) => c,
            IntegralValuation::Piecewise(_) => unreachable!(),
        };
        let mut acc: Option<NodeId> = None;
        for j in 0..m {
            let lower = b.paste(f, &[ts[j]])[0];
            let top = b.binary(GateKind::Add, ts[j], pos_parts[j]);
            let upper = b.paste(f, &[top])[0];
            let q = b.binary(GateKind::Sub, upper, lower);
            acc = Some(match acc {
                None => q,
                Some(prev) => b.binary(GateKind::Add, prev, q),
            });
        }
        outs.push(acc.expect("instance has at least one piece"));
    }
    Ok(b.finish(outs))
}

/// A Consensus Halving instance as a Borsuk-Ulam instance on S^n: points
/// are signed piece widths, outputs the positive-side masses.
pub fn ch_to_bu(inst: &CHInstance) -> Result<BUInstance, BUError> {
    let n = inst.agents.len();
    let circuit = positive_mass_circuit(inst, n + 1)?;
    let linear = circuit_is_linear(&circuit);
    Ok(BUInstance {
        dimension: n,
        circuit,
        linear,
    })
}

/// Signed piece list of a sphere point after the two normalization steps:
/// zero-width entries move to the far right, adjacent same-sign entries
/// merge. Returns the merged (width, sign) runs plus the number of cuts
/// parked at the domain end.
fn shift_and_merge(x: &[Rat]) -> (Vec<(Rat, Sign)>, usize) {
    let mut runs: Vec<(Rat, Sign)> = Vec::with_capacity(x.len());
    let mut parked = 0usize;
    for v in x {
        if v.is_zero() {
            parked += 1;
            continue;
        }
        let sign = if v.is_positive() {
            Sign::Plus
        } else {
            Sign::Minus
        };
        match runs.last_mut() {
            Some((w, s)) if *s == sign => {
                *w += v.abs();
                parked += 1;
            }
            _ => runs.push((v.abs(), sign)),
        }
    }
    (runs, parked)
}

/// The shift-and-merge decoding of a sphere point into an alternating cut
/// list on [0, domain_length], with no solution check beyond the sphere
/// constraint. Merged-away and zero-width pieces park their cuts at the
/// domain end, so a point with n+1 coordinates always yields n cuts.
pub fn decode_widths(x: &[Rat], domain_length: &Rat) -> Result<CHSolution, BUError> {
    let mass = sphere_mass(x);
    if mass != Rat::one() {
        return Err(BUError::NotOnSphere { mass });
    }
    let (runs, parked) = shift_and_merge(x);
    let mut cuts = Vec::with_capacity(x.len() - 1);
    let mut acc = Rat::zero();
    for (w, _) in &runs[..runs.len() - 1] {
        acc = &acc + w;
        cuts.push(&acc * domain_length);
    }
    cuts.extend(std::iter::repeat_with(|| domain_length.clone()).take(parked));
    Ok(CHSolution {
        cuts,
        leftmost_sign: runs[0].1,
    })
}

/// Reads a Borsuk-Ulam solution back as a consensus halving of `inst`. The
/// point must sit on S^n exactly and the decoded cuts must balance every
/// agent within `tol`; the second check is the same comparison as
/// b(x) = b(-x) at that tolerance.
pub fn decode_bu_solution(
    x: &[Rat],
    inst: &CHInstance,
    tol: &Rat,
) -> Result<CHSolution, BUError> {
    if x.len() != inst.n() + 1 {
        return Err(BUError::WrongPointLength {
            expected: inst.n() + 1,
            got: x.len(),
        });
    }
    let sol = decode_widths(x, &inst.domain_length)?;
    let report = ch::verify(inst, &sol, tol)?;
    if let Some(bad) = report.verdicts.iter().find(|v| !v.ok) {
        return Err(BUError::NotABUSolution {
            agent: bad.agent,
            imbalance: bad.imbalance.clone(),
            tol: tol.clone(),
        });
    }
    Ok(sol)
}

/// Comparison-gate circuit computing the same shift-and-merge normalization
/// on the signed width vector itself: n bubble sweeps move zeros right, one
/// right-to-left pass folds same-sign neighbours, and n more sweeps park the
/// freed zeros. Discontinuous by construction; exists to cross-check the
/// direct algorithm.
pub fn decoder_circuit(n: usize) -> Circuit {
    let mut b = CircuitBuilder::decoder();
    let mut slots: Vec<NodeId> = (0..=n).map(|_| b.input()).collect();

    let nonzero = |b: &mut CircuitBuilder, x: NodeId| {
        let pos = b.unary(GateKind::CmpGt, x);
        let negx = b.unary(GateKind::MulConst(rat(-1, 1)), x);
        let neg = b.unary(GateKind::CmpGt, negx);
        b.binary(GateKind::Add, pos, neg)
    };
    // Swap slots j, j+1 when slot j is zero.
    let sweep = |b: &mut CircuitBuilder, slots: &mut Vec<NodeId>| {
        for j in 0..n {
            let keep = nonzero(b, slots[j]);
            let diff = b.binary(GateKind::Sub, slots[j], slots[j + 1]);
            let gated = b.binary(GateKind::Mul, keep, diff);
            let new_j = b.binary(GateKind::Add, slots[j + 1], gated);
            let total = b.binary(GateKind::Add, slots[j], slots[j + 1]);
            let new_j1 = b.binary(GateKind::Sub, total, new_j);
            slots[j] = new_j;
            slots[j + 1] = new_j1;
        }
    };

    for _ in 0..n {
        sweep(&mut b, &mut slots);
    }
    // Fold right to left so a run of equal signs accumulates into its head.
    for j in (0..n).rev() {
        let prod = b.binary(GateKind::Mul, slots[j], slots[j + 1]);
        let same = b.unary(GateKind::CmpGt, prod);
        let moved = b.binary(GateKind::Mul, same, slots[j + 1]);
        slots[j] = b.binary(GateKind::Add, slots[j], moved);
        slots[j + 1] = b.binary(GateKind::Sub, slots[j + 1], moved);
    }
    for _ in 0..n {
        sweep(&mut b, &mut slots);
    }
    b.finish(slots)
}
