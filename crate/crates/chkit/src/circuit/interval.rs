//! Per-node interval bounds for acyclic circuits. Used to certify the range
//! side conditions of the restricted gate set before embedding.

use super::{Circuit, CircuitError, GateKind};
use crate::rat::Rat;

/// Propagates input boxes through the circuit and returns an inclusive
/// interval per node, indexed by node id.
pub fn propagate_intervals(
    circuit: &Circuit,
    input_boxes: &[(Rat, Rat)],
) -> Result<Vec<(Rat, Rat)>, CircuitError> {
    if circuit.cyclic {
        return Err(CircuitError::CyclicCircuit);
    }
    if input_boxes.len() != circuit.inputs.len() {
        return Err(CircuitError::InputCountMismatch {
            expected: circuit.inputs.len(),
            got: input_boxes.len(),
        });
    }
    let mut boxes: Vec<(Rat, Rat)> = vec![(Rat::zero(), Rat::zero()); circuit.nodes];
    for (slot, b) in circuit.inputs.iter().zip(input_boxes) {
        debug_assert!(b.0 <= b.1);
        boxes[*slot] = b.clone();
    }
    for gate in &circuit.gates {
        let arg = |i: usize| -> &(Rat, Rat) { &boxes[gate.ins[i]] };
        let out = match &gate.kind {
            GateKind::Const(z) => (z.clone(), z.clone()),
            GateKind::Add => (&arg(0).0 + &arg(1).0, &arg(0).1 + &arg(1).1),
            GateKind::Sub => (&arg(0).0 - &arg(1).1, &arg(0).1 - &arg(1).0),
            GateKind::MulConst(z) => {
                if z.is_negative() {
                    (z * &arg(0).1, z * &arg(0).0)
                } else {
                    (z * &arg(0).0, z * &arg(0).1)
                }
            }
            GateKind::Mul => {
                let (alo, ahi) = arg(0).clone();
                let (blo, bhi) = arg(1).clone();
                let corners = [&alo * &blo, &alo * &bhi, &ahi * &blo, &ahi * &bhi];
                let lo = corners.iter().min().unwrap().clone();
                let hi = corners.iter().max().unwrap().clone();
                (lo, hi)
            }
            GateKind::Max => (
                arg(0).0.clone().max(arg(1).0.clone()),
                arg(0).1.clone().max(arg(1).1.clone()),
            ),
            GateKind::Min => (
                arg(0).0.clone().min(arg(1).0.clone()),
                arg(0).1.clone().min(arg(1).1.clone()),
            ),
            GateKind::Square => {
                let (lo, hi) = arg(0).clone();
                if !lo.is_negative() {
                    (&lo * &lo, &hi * &hi)
                } else if !hi.is_positive() {
                    (&hi * &hi, &lo * &lo)
                } else {
                    let m = lo.clone().abs().max(hi.clone().abs());
                    (Rat::zero(), &m * &m)
                }
            }
            GateKind::Double01 => (Rat::int(2) * arg(0).0.clone(), Rat::int(2) * arg(0).1.clone()),
            GateKind::Sub01 => {
                let lo = (&arg(0).0 - &arg(1).1).max(Rat::zero());
                let hi = (&arg(0).1 - &arg(1).0).max(Rat::zero());
                (lo, hi)
            }
            GateKind::CmpGt => {
                let (lo, hi) = arg(0).clone();
                if lo.is_positive() {
                    (Rat::one(), Rat::one())
                } else if !hi.is_positive() {
                    (Rat::zero(), Rat::zero())
                } else {
                    (Rat::zero(), Rat::one())
                }
            }
        };
        debug_assert!(out.0 <= out.1);
        boxes[gate.out] = out;
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;
    use crate::rat::rat;

    #[test]
    fn intervals_track_each_gate() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let y = b.input();
        let s = b.binary(GateKind::Add, x, y);
        let d = b.binary(GateKind::Sub, x, y);
        let p = b.binary(GateKind::Mul, s, d);
        let m = b.binary(GateKind::Max, p, x);
        let q = b.unary(GateKind::Square, d);
        let c = b.finish(vec![m, q]);
        let boxes = propagate_intervals(
            &c,
            &[(rat(0, 1), rat(1, 1)), (rat(0, 1), rat(1, 2))],
        )
        .unwrap();
        assert_eq!(boxes[s], (rat(0, 1), rat(3, 2)));
        assert_eq!(boxes[d], (rat(-1, 2), rat(1, 1)));
        // Product corners: min over {0, -3/4, 3/2}.
        assert_eq!(boxes[p], (rat(-3, 4), rat(3, 2)));
        assert_eq!(boxes[m], (rat(0, 1), rat(3, 2)));
        // Square of a sign-crossing interval bottoms out at zero.
        assert_eq!(boxes[q], (rat(0, 1), rat(1, 1)));
    }

    #[test]
    fn interval_soundness_on_samples() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let y = b.input();
        let s = b.binary(GateKind::Sub01, x, y);
        let m = b.binary(GateKind::Min, s, y);
        let c = b.finish(vec![m]);
        let bx = (rat(0, 1), rat(1, 1));
        let by = (rat(1, 4), rat(3, 4));
        let boxes = propagate_intervals(&c, &[bx, by]).unwrap();
        for xi in 0..=4 {
            for yi in 1..=3 {
                let vals = c
                    .evaluate(&[rat(xi, 4), rat(yi, 4)])
                    .unwrap();
                for (node, v) in vals.iter().enumerate() {
                    assert!(&boxes[node].0 <= v && v <= &boxes[node].1);
                }
            }
        }
    }
}
