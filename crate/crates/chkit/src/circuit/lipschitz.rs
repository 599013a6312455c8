//! Syntactic Lipschitz bounds for piecewise-linear circuits, measured in the
//! max norm on inputs. The bound composes per gate and is safe but not tight:
//! sums add operand bounds even when slopes cancel.

use super::{Circuit, CircuitError, GateKind};
use crate::rat::Rat;

/// Returns a constant L such that every output of `circuit` is L-Lipschitz in
/// the max norm. Fails on gates whose output is not piecewise linear in the
/// inputs (MUL, SQUARE) and on comparison gates, which are discontinuous.
pub fn lipschitz_bound(circuit: &Circuit) -> Result<Rat, CircuitError> {
    if circuit.cyclic {
        return Err(CircuitError::CyclicCircuit);
    }
    let mut lam: Vec<Rat> = vec![Rat::zero(); circuit.nodes];
    for &i in &circuit.inputs {
        lam[i] = Rat::one();
    }
    for gate in &circuit.gates {
        let l = match &gate.kind {
            GateKind::Const(_) => Rat::zero(),
            GateKind::Add | GateKind::Sub | GateKind::Sub01 => {
                &lam[gate.ins[0]] + &lam[gate.ins[1]]
            }
            GateKind::MulConst(z) => z.clone().abs() * lam[gate.ins[0]].clone(),
            GateKind::Max | GateKind::Min => {
                lam[gate.ins[0]].clone().max(lam[gate.ins[1]].clone())
            }
            GateKind::Double01 => Rat::int(2) * lam[gate.ins[0]].clone(),
            GateKind::Mul | GateKind::Square | GateKind::CmpGt => {
                return Err(CircuitError::NonlinearCircuit(gate.kind.name().into()))
            }
        };
        lam[gate.out] = l;
    }
    Ok(circuit
        .outputs
        .iter()
        .map(|&o| lam[o].clone())
        .max()
        .unwrap_or_else(Rat::zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;
    use crate::rat::rat;

    #[test]
    fn three_x_minus_relu_gets_four() {
        // f(x) = 3x - max(x, 0); true constant is 3, the syntactic bound is 4.
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let tx = b.unary(GateKind::MulConst(rat(3, 1)), x);
        let zero = b.constant(rat(0, 1));
        let relu = b.binary(GateKind::Max, x, zero);
        let f = b.binary(GateKind::Sub, tx, relu);
        let c = b.finish(vec![f]);
        assert_eq!(lipschitz_bound(&c).unwrap(), rat(4, 1));
    }

    #[test]
    fn bound_dominates_sampled_slopes() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let y = b.input();
        let hx = b.unary(GateKind::MulConst(rat(-5, 2)), x);
        let m = b.binary(GateKind::Min, hx, y);
        let s = b.binary(GateKind::Add, m, y);
        let c = b.finish(vec![s]);
        let l = lipschitz_bound(&c).unwrap();
        assert_eq!(l, rat(7, 2));
        let pts: Vec<[Rat; 2]> = (0..6)
            .flat_map(|i| (0..6).map(move |j| [rat(i - 3, 2), rat(j - 3, 2)]))
            .collect();
        for a in &pts {
            for b2 in &pts {
                let fa = &c.eval_outputs(a).unwrap()[0];
                let fb = &c.eval_outputs(b2).unwrap()[0];
                let dist = (&a[0] - &b2[0])
                    .abs()
                    .max((&a[1] - &b2[1]).abs());
                assert!((fa - fb).abs() <= &l * &dist);
            }
        }
    }

    #[test]
    fn nonlinear_gates_are_rejected() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        b.binary(GateKind::Mul, x, x);
        let c = b.finish(vec![1]);
        assert!(matches!(
            lipschitz_bound(&c),
            Err(CircuitError::NonlinearCircuit(_))
        ));
    }
}
