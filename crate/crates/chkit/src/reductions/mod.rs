//! Reductions between problem formats: polynomial feasibility to consensus
//! halving, strategic games to cyclic response circuits, and the grid search
//! used to refute solvability of small embedded instances.
//!
//! The polynomial pipeline splits p into two positive-coefficient halves
//! q1 - q2 scaled into the unit range, compiles both halves into one special
//! circuit whose last two nodes carry them, embeds the circuit, and appends
//! the extra agent that is balanced without any cut of its own exactly when
//! the halves agree. Roots of p in the unit box then correspond to exact
//! solutions that stay one cut under the agent count.

mod game;
mod grid;
mod sort;

pub use game::{game_to_circuit, reference_circuit, scaled_circuit, GameInstance};
pub use grid::grid_search;
pub use sort::sorting_network;

use crate::ch::{CHError, CHSolution};
use crate::circuit::{
    lower_to_special, AddInputRange, Circuit, CircuitBuilder, CircuitError, Gate, GateKind,
    LowerError, NodeId, SpecialCircuitCertificate,
};
use crate::embed::{
    add_finis, build_gadgets, decode_cuts_to_values, encode_values_to_cuts, EmbedError,
    EmbeddedInstance,
};
use crate::piecewise::PiecewiseError;
use crate::rat::{rat, Rat};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error("game rejected: {0}")]
    NormalizationFailure(String),
    #[error("grid step must be positive")]
    BadGridStep,
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    CH(#[from] CHError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

/// coef * X_1^exps[0] * ... * X_vars^exps[vars-1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: i64,
    pub exps: Vec<u32>,
}

/// Integer-coefficient polynomial in canonical form: terms sorted by
/// exponent vector, duplicates merged, zero coefficients dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial {
    pub vars: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(vars: usize, terms: Vec<Monomial>) -> Polynomial {
        for t in &terms {
            assert_eq!(t.exps.len(), vars, "monomial arity");
        }
        let mut terms = terms;
        terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(m) if m.exps == t.exps => {
                    m.coef = m.coef.checked_add(t.coef).expect("coefficient overflow");
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != 0);
        Polynomial {
            vars,
            terms: merged,
        }
    }

    pub fn zero(vars: usize) -> Polynomial {
        Polynomial {
            vars,
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        assert_eq!(x.len(), self.vars, "point arity");
        self.terms.iter().fold(Rat::zero(), |acc, t| {
            let mut m = Rat::int(t.coef);
            for (xi, &d) in x.iter().zip(&t.exps) {
                if d > 0 {
                    m = m * xi.pow(d);
                }
            }
            acc + m
        })
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.vars, other.vars, "variable counts");
        Polynomial::new(
            self.vars,
            self.terms.iter().chain(&other.terms).cloned().collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.vars, other.vars, "variable counts");
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Monomial {
                    coef: a.coef.checked_mul(b.coef).expect("coefficient overflow"),
                    exps: a
                        .exps
                        .iter()
                        .zip(&b.exps)
                        .map(|(x, y)| x.checked_add(*y).expect("exponent overflow"))
                        .collect(),
                });
            }
        }
        Polynomial::new(self.vars, terms)
    }

    pub fn square(&self) -> Polynomial {
        self.mul(self)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exps.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }
}

/// Sum of squares: nonnegative everywhere, zero exactly on the common root
/// set, so one feasibility query answers the whole conjunction.
pub fn conjunction_to_feasible(ps: &[Polynomial]) -> Polynomial {
    let vars = ps.first().map_or(0, |p| p.vars);
    ps.iter().fold(Polynomial::zero(vars), |acc, p| {
        assert_eq!(p.vars, vars, "variable counts");
        acc.add(&p.square())
    })
}

/// One scaled term of a positive half, with coefficient in (0, 1/l].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveTerm {
    pub coef: Rat,
    pub exps: Vec<u32>,
}

/// p split as q1 - q2 up to the positive factor 1 / (l * C_max), where l
/// counts terms and C_max is the largest coefficient magnitude. Both halves
/// map the unit box into [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalForm {
    pub vars: usize,
    pub q1: Vec<PositiveTerm>,
    pub q2: Vec<PositiveTerm>,
}

impl NormalForm {
    pub fn values(&self, x: &[Rat]) -> (Rat, Rat) {
        assert_eq!(x.len(), self.vars, "point arity");
        let side = |terms: &[PositiveTerm]| {
            terms.iter().fold(Rat::zero(), |acc, t| {
                let mut m = t.coef.clone();
                for (xi, &d) in x.iter().zip(&t.exps) {
                    if d > 0 {
                        m = m * xi.pow(d);
                    }
                }
                acc + m
            })
        };
        (side(&self.q1), side(&self.q2))
    }
}

pub fn normal_form(p: &Polynomial) -> NormalForm {
    let p = Polynomial::new(p.vars, p.terms.clone());
    let l = p.terms.len() as i64;
    if l == 0 {
        return NormalForm {
            vars: p.vars,
            q1: Vec::new(),
            q2: Vec::new(),
        };
    }
    let cmax = p
        .terms
        .iter()
        .map(|t| t.coef.checked_abs().expect("coefficient overflow"))
        .max()
        .expect("nonempty");
    let denom = l.checked_mul(cmax).expect("coefficient overflow");
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    for t in &p.terms {
        let scaled = PositiveTerm {
            coef: rat(t.coef.abs(), denom),
            exps: t.exps.clone(),
        };
        if t.coef > 0 {
            q1.push(scaled);
        } else {
            q2.push(scaled);
        }
    }
    NormalForm {
        vars: p.vars,
        q1,
        q2,
    }
}

fn power(b: &mut CircuitBuilder, x: NodeId, d: u32) -> NodeId {
    if d == 1 {
        x
    } else if d % 2 == 0 {
        let h = power(b, x, d / 2);
        b.unary(GateKind::Square, h)
    } else {
        let p = power(b, x, d - 1);
        b.binary(GateKind::Mul, p, x)
    }
}

fn tree_add(b: &mut CircuitBuilder, mut layer: Vec<NodeId>) -> NodeId {
    assert!(!layer.is_empty());
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        for pair in layer.chunks(2) {
            next.push(match pair {
                [a, b2] => b.binary(GateKind::Add, *a, *b2),
                [a] => *a,
                _ => unreachable!(),
            });
        }
        layer = next;
    }
    layer[0]
}

fn half_circuit(b: &mut CircuitBuilder, xs: &[NodeId], terms: &[PositiveTerm]) -> NodeId {
    if terms.is_empty() {
        return b.constant(Rat::zero());
    }
    let tops: Vec<NodeId> = terms
        .iter()
        .map(|t| {
            let mut prod: Option<NodeId> = None;
            for (&x, &d) in xs.iter().zip(&t.exps) {
                if d == 0 {
                    continue;
                }
                let p = power(b, x, d);
                prod = Some(match prod {
                    None => p,
                    Some(q) => b.binary(GateKind::Mul, q, p),
                });
            }
            match prod {
                Some(p) => b.unary(GateKind::MulConst(t.coef.clone()), p),
                None => b.constant(t.coef.clone()),
            }
        })
        .collect();
    tree_add(b, tops)
}

/// Circuit with one input per variable and two outputs computing q1 and q2.
/// All gates are monotone in [0,1], so the lowering pass can certify it.
pub fn normal_form_circuit(nf: &NormalForm) -> Circuit {
    let mut b = CircuitBuilder::new();
    let xs: Vec<NodeId> = (0..nf.vars).map(|_| b.input()).collect();
    let top1 = half_circuit(&mut b, &xs, &nf.q1);
    let top2 = half_circuit(&mut b, &xs, &nf.q2);
    b.finish(vec![top1, top2])
}

/// Renumber so the two output nodes come last, carrying the range
/// certificate through the permutation.
fn push_outputs_last(
    low: &Circuit,
    cert: &SpecialCircuitCertificate,
) -> Result<(Circuit, SpecialCircuitCertificate), ReductionError> {
    let moved = low.move_outputs_to_end()?;
    let mut order: Vec<NodeId> = (0..low.nodes)
        .filter(|n| !low.outputs.contains(n))
        .collect();
    order.extend(low.outputs.iter().copied());
    let node_ranges: Vec<(Rat, Rat)> = order
        .iter()
        .map(|&old| cert.node_ranges[old].clone())
        .collect();
    let add_inputs = moved
        .gates
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GateKind::Add)
        .map(|(gi, g)| AddInputRange {
            gate: gi,
            lhs: node_ranges[g.ins[0]].clone(),
            rhs: node_ranges[g.ins[1]].clone(),
        })
        .collect();
    let cert = SpecialCircuitCertificate {
        node_ranges,
        add_inputs,
        ..cert.clone()
    };
    debug_assert!(cert.verify(&moved).is_ok());
    Ok((moved, cert))
}

/// Embedded consensus-halving instance whose exact solutions within n - 1
/// cuts correspond to roots of p in the unit box. The source circuit's last
/// two nodes compute the halves q1, q2 and the final agent ties them.
pub fn feasible_to_ch(p: &Polynomial) -> Result<EmbeddedInstance, ReductionError> {
    let nf = normal_form(p);
    let source = normal_form_circuit(&nf);
    let (mut low, mut cert) = lower_to_special(&source)?;
    if low.outputs[0] == low.outputs[1] {
        // Both halves collapsed to the one shared zero node; give the second
        // output its own zero so the output pair stays distinct.
        let one = low.nodes;
        let dup = low.nodes + 1;
        low.gates.push(Gate {
            kind: GateKind::Const(Rat::one()),
            ins: Vec::new(),
            out: one,
        });
        low.gates.push(Gate {
            kind: GateKind::Sub01,
            ins: vec![one, one],
            out: dup,
        });
        low.nodes += 2;
        low.outputs[1] = dup;
        cert.node_ranges.push((Rat::one(), Rat::one()));
        cert.node_ranges.push((Rat::zero(), Rat::zero()));
        cert.special_nodes += 2;
        cert.special_gates += 2;
    }
    let (moved, cert) = push_outputs_last(&low, &cert)?;
    let r = moved.nodes;
    assert_eq!(moved.outputs, vec![r - 2, r - 1], "outputs must come last");
    let emb = build_gadgets(&moved, &cert)?;
    Ok(add_finis(&emb)?)
}

/// Cuts encoding the circuit evaluation at x; the result verifies exactly
/// when x is a root of the source polynomial.
pub fn encode_root(inst: &EmbeddedInstance, x: &[Rat]) -> Result<CHSolution, ReductionError> {
    let z = inst.source.evaluate(x)?;
    Ok(encode_values_to_cuts(inst, &z)?)
}

/// Input coordinates recovered from a verified solution's cuts.
pub fn decode_root(inst: &EmbeddedInstance, sol: &CHSolution) -> Result<Vec<Rat>, ReductionError> {
    let z = decode_cuts_to_values(inst, sol)?;
    Ok(inst.source.inputs.iter().map(|&i| z[i].clone()).collect())
}
