//! Exact rounding of approximate Borsuk-Ulam solutions on piecewise-linear
//! circuits.
//!
//! Around any anchor point, a circuit without MUL or SQUARE acts as a single
//! affine map on the polyhedral cell carved out by the branch choices of its
//! MAX-like gates. Minimizing the residual bound z over that cell, the
//! sphere equation, and the anchor's sign orthant is a rational LP; when the
//! anchor is close enough to a solution the optimum is exactly zero and the
//! minimizer is an exact solution.

pub mod simplex;

pub use simplex::{solve, LPOutcome, StandardLP};

use crate::bu::{odd_part_circuit, sphere_mass, BUInstance};
use crate::circuit::{Circuit, CircuitError, GateKind};
use crate::rat::{rat, Rat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LPError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("bad anchor point: {0}")]
    BadAnchor(String),
    #[error("rounding LP is infeasible; the anchor violates its own cell")]
    InfeasibleLP,
    #[error("rounding LP bottomed out at z* = {z} > 0; the approximation is outside the budget")]
    PositiveOptimum { z: Rat },
    #[error("rounding LP is unbounded; the assembly is broken")]
    UnboundedLP,
}

/// One linearity region of a piecewise-linear circuit: inequalities fixing
/// every branch the anchor took, and the affine map the circuit equals
/// there. Constraints read row * x <= b, the map reads c * x + c0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCell {
    pub a: Vec<Vec<Rat>>,
    pub b: Vec<Rat>,
    pub c: Vec<Vec<Rat>>,
    pub c0: Vec<Rat>,
}

impl LinearCell {
    pub fn contains(&self, q: &[Rat]) -> bool {
        self.a
            .iter()
            .zip(&self.b)
            .all(|(row, b)| &dot(row, q) <= b)
    }

    pub fn map(&self, q: &[Rat]) -> Vec<Rat> {
        self.c
            .iter()
            .zip(&self.c0)
            .map(|(row, c0)| dot(row, q) + c0)
            .collect()
    }
}

fn dot(row: &[Rat], q: &[Rat]) -> Rat {
    row.iter()
        .zip(q)
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, v)| c * v)
        .fold(Rat::zero(), |acc, t| acc + t)
}

#[derive(Debug, Clone)]
struct Affine {
    coef: Vec<Rat>,
    cst: Rat,
}

impl Affine {
    fn zero(m: usize) -> Affine {
        Affine {
            coef: vec![Rat::zero(); m],
            cst: Rat::zero(),
        }
    }

    fn unit(i: usize, m: usize) -> Affine {
        let mut a = Affine::zero(m);
        a.coef[i] = Rat::one();
        a
    }

    fn constant(z: &Rat, m: usize) -> Affine {
        let mut a = Affine::zero(m);
        a.cst = z.clone();
        a
    }

    fn add(&self, other: &Affine) -> Affine {
        Affine {
            coef: self
                .coef
                .iter()
                .zip(&other.coef)
                .map(|(a, b)| a + b)
                .collect(),
            cst: &self.cst + &other.cst,
        }
    }

    fn sub(&self, other: &Affine) -> Affine {
        Affine {
            coef: self
                .coef
                .iter()
                .zip(&other.coef)
                .map(|(a, b)| a - b)
                .collect(),
            cst: &self.cst - &other.cst,
        }
    }

    fn scale(&self, z: &Rat) -> Affine {
        Affine {
            coef: self.coef.iter().map(|a| a * z).collect(),
            cst: &self.cst * z,
        }
    }
}

/// Fixes the branch of every MAX, MIN, and capped-subtract gate to the one
/// taken at `p` and returns the resulting cell. Ties go to the first input
/// and all inequalities are non-strict, so p always lies in its own cell.
pub fn extract_cell(g: &Circuit, p: &[Rat]) -> Result<LinearCell, LPError> {
    if g.cyclic {
        return Err(CircuitError::CyclicCircuit.into());
    }
    let vals = g.evaluate(p)?;
    let m = g.inputs.len();
    let mut afs: Vec<Option<Affine>> = vec![None; g.nodes];
    for (i, &slot) in g.inputs.iter().enumerate() {
        afs[slot] = Some(Affine::unit(i, m));
    }
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    let mut bounds: Vec<Rat> = Vec::new();
    // Pushes loser - winner <= 0 as a row over the inputs.
    let mut branch = |winner: &Affine, loser: &Affine| {
        let row = loser.sub(winner);
        rows.push(row.coef);
        bounds.push(-row.cst);
    };
    for gate in &g.gates {
        let arg = |slot: usize| afs[gate.ins[slot]].as_ref().expect("topological order");
        let af = match &gate.kind {
            GateKind::Const(z) => Affine::constant(z, m),
            GateKind::Add => arg(0).add(arg(1)),
            GateKind::Sub => arg(0).sub(arg(1)),
            GateKind::MulConst(z) => arg(0).scale(z),
            GateKind::Double01 => arg(0).scale(&rat(2, 1)),
            GateKind::Max => {
                let (a, b) = (arg(0), arg(1));
                if vals[gate.ins[0]] >= vals[gate.ins[1]] {
                    branch(a, b);
                    a.clone()
                } else {
                    branch(b, a);
                    b.clone()
                }
            }
            GateKind::Min => {
                let (a, b) = (arg(0), arg(1));
                if vals[gate.ins[0]] <= vals[gate.ins[1]] {
                    branch(b, a);
                    a.clone()
                } else {
                    branch(a, b);
                    b.clone()
                }
            }
            GateKind::Sub01 => {
                let diff = arg(0).sub(arg(1));
                let zero = Affine::zero(m);
                if vals[gate.ins[0]] >= vals[gate.ins[1]] {
                    branch(&diff, &zero);
                    diff
                } else {
                    branch(&zero, &diff);
                    zero
                }
            }
            GateKind::Mul | GateKind::Square | GateKind::CmpGt => {
                return Err(CircuitError::NonlinearCircuit(gate.kind.name().into()).into())
            }
        };
        afs[gate.out] = Some(af);
    }
    let mut c = Vec::with_capacity(g.outputs.len());
    let mut c0 = Vec::with_capacity(g.outputs.len());
    for &o in &g.outputs {
        let af = afs[o].as_ref().expect("undefined output");
        debug_assert_eq!(dot(&af.coef, p) + &af.cst, vals[o]);
        c.push(af.coef.clone());
        c0.push(af.cst.clone());
    }
    Ok(LinearCell {
        a: rows,
        b: bounds,
        c,
        c0,
    })
}

/// Size budget for the rounding argument: solutions of square rational
/// systems built from cell coefficients, the sphere row, and the residual
/// bound have bit length at most m, so any approximation finer than 1/2^m
/// rounds to an exact solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingBudget {
    pub m: u64,
    pub eps: Rat,
}

fn clog2(d: &BigInt) -> u64 {
    if d.is_one() {
        0
    } else {
        (d - BigInt::one()).bits()
    }
}

/// Hadamard-style over-approximation. Per node, bound the numerator bits
/// and a power-of-two denominator cap of every affine coefficient reachable
/// in any cell; clear each row of the (inputs+1)-square system to integers
/// and bound the Cramer determinants.
pub fn compute_budget(g: &Circuit) -> Result<RoundingBudget, LPError> {
    let mut num_bits: Vec<u64> = vec![1; g.nodes];
    let mut den_log: Vec<u64> = vec![0; g.nodes];
    for gate in &g.gates {
        let a = gate.ins.first().map(|&n| (num_bits[n], den_log[n]));
        let b = gate.ins.get(1).map(|&n| (num_bits[n], den_log[n]));
        let (n_out, d_out) = match &gate.kind {
            GateKind::Const(z) => (z.numer().bits().max(1), clog2(z.denom())),
            GateKind::Add | GateKind::Sub | GateKind::Sub01 => {
                let (an, ad) = a.unwrap();
                let (bn, bd) = b.unwrap();
                ((an + bd).max(bn + ad) + 1, ad + bd)
            }
            GateKind::MulConst(z) => {
                let (an, ad) = a.unwrap();
                (an + z.numer().bits().max(1), ad + clog2(z.denom()))
            }
            GateKind::Double01 => {
                let (an, ad) = a.unwrap();
                (an + 1, ad)
            }
            GateKind::Max | GateKind::Min => {
                let (an, ad) = a.unwrap();
                let (bn, bd) = b.unwrap();
                (an.max(bn), ad.max(bd))
            }
            GateKind::Mul | GateKind::Square | GateKind::CmpGt => {
                return Err(CircuitError::NonlinearCircuit(gate.kind.name().into()).into())
            }
        };
        num_bits[gate.out] = n_out;
        den_log[gate.out] = d_out;
    }
    let b_num = num_bits.iter().copied().max().unwrap_or(1);
    let b_den = den_log.iter().copied().max().unwrap_or(0);
    let size = g.inputs.len() as u64 + 1;
    let entry_bits = b_num + size * b_den + 1;
    let log = size.next_power_of_two().trailing_zeros() as u64;
    let m = 2 * size * (entry_bits + log + 1) + 1;
    let eps = rat(1, 2).pow(u32::try_from(m + 1).expect("budget exponent fits u32"));
    Ok(RoundingBudget { m, eps })
}

/// Signs fixing the anchor's orthant; a zero coordinate counts as
/// nonnegative.
fn orthant(p: &[Rat]) -> Vec<i8> {
    p.iter()
        .map(|v| if v.is_negative() { -1 } else { 1 })
        .collect()
}

fn signed(row: &[Rat], signs: &[i8]) -> Vec<Rat> {
    row.iter()
        .zip(signs)
        .map(|(v, &s)| if s < 0 { -v } else { v.clone() })
        .collect()
}

/// The rounding LP in equality standard form over u (signed coordinates),
/// z, and one slack per inequality.
fn assemble(cell: &LinearCell, signs: &[i8]) -> StandardLP {
    let m = signs.len();
    let d = cell.c.len();
    let ineq = cell.a.len() + 2 * d;
    let nvars = m + 1 + ineq;
    let mut rows = Vec::with_capacity(ineq + 1);
    let mut rhs = Vec::with_capacity(ineq + 1);
    let mut slack = m + 1;
    let mut push = |coeffs: Vec<Rat>, z: Rat, bound: Rat, slack: &mut usize| {
        let mut row = vec![Rat::zero(); nvars];
        row[..m].clone_from_slice(&coeffs);
        row[m] = z;
        row[*slack] = Rat::one();
        *slack += 1;
        rows.push(row);
        rhs.push(bound);
    };
    for (row, b) in cell.a.iter().zip(&cell.b) {
        push(signed(row, signs), Rat::zero(), b.clone(), &mut slack);
    }
    for (row, c0) in cell.c.iter().zip(&cell.c0) {
        let pos = signed(row, signs);
        let neg: Vec<Rat> = pos.iter().map(|v| -v).collect();
        push(pos, rat(-1, 1), -c0, &mut slack);
        push(neg, rat(-1, 1), c0.clone(), &mut slack);
    }
    let mut sphere = vec![Rat::zero(); nvars];
    for s in sphere.iter_mut().take(m) {
        *s = Rat::one();
    }
    rows.push(sphere);
    rhs.push(Rat::one());
    let mut objective = vec![Rat::zero(); nvars];
    objective[m] = Rat::one();
    StandardLP {
        rows,
        rhs,
        objective,
    }
}

/// Rounds an approximate solution of a piecewise-linear instance to an
/// exact one: minimize the residual bound z of g = f(x) - f(-x) over the
/// anchor's cell, orthant, and the sphere equation. An optimum of exactly
/// zero is required; a positive one means the anchor was not within a valid
/// rounding budget and is reported, never papered over.
pub fn round_to_exact(bu: &BUInstance, p: &[Rat]) -> Result<Vec<Rat>, LPError> {
    let m = bu.dimension + 1;
    if p.len() != m {
        return Err(LPError::BadAnchor(format!(
            "point has {} coordinates, instance wants {m}",
            p.len()
        )));
    }
    let mass = sphere_mass(p);
    if mass != Rat::one() {
        return Err(LPError::BadAnchor(format!(
            "sum of |x_i| is {mass}, want 1"
        )));
    }
    let g = odd_part_circuit(bu);
    if g.eval_outputs(p)?.iter().all(Rat::is_zero) {
        return Ok(p.to_vec());
    }
    let cell = extract_cell(&g, p)?;
    let signs = orthant(p);
    match simplex::solve(&assemble(&cell, &signs)) {
        LPOutcome::Optimal { value, point } if value.is_zero() => {
            let x: Vec<Rat> = point[..m]
                .iter()
                .zip(&signs)
                .map(|(u, &s)| if s < 0 { -u } else { u.clone() })
                .collect();
            debug_assert!(cell.contains(&x));
            debug_assert!(cell.map(&x).iter().all(Rat::is_zero));
            Ok(x)
        }
        LPOutcome::Optimal { value, .. } => Err(LPError::PositiveOptimum { z: value }),
        LPOutcome::Infeasible => Err(LPError::InfeasibleLP),
        LPOutcome::Unbounded => Err(LPError::UnboundedLP),
    }
}

fn clear_denominators(coeffs: &[(String, Rat)], rhs: &Rat) -> (Vec<(String, BigInt)>, BigInt) {
    let mut scale = BigInt::one();
    for d in coeffs
        .iter()
        .map(|(_, c)| c.denom())
        .chain(std::iter::once(rhs.denom()))
    {
        scale = scale.lcm(d);
    }
    let factor = Rat::from_big(scale.clone(), BigInt::one());
    let ints = coeffs
        .iter()
        .map(|(n, c)| {
            let v = c * &factor;
            debug_assert!(v.denom().is_one());
            (n.clone(), v.numer().clone())
        })
        .collect();
    let r = rhs * &factor;
    (ints, r.numer().clone())
}

fn fmt_terms(out: &mut String, terms: &[(String, BigInt)]) {
    let mut first = true;
    for (name, c) in terms {
        if c.is_zero() && terms.len() > 1 {
            continue;
        }
        let mag = c.magnitude();
        if first {
            if c.sign() == num_bigint::Sign::Minus {
                out.push_str("- ");
            }
            first = false;
        } else if c.sign() == num_bigint::Sign::Minus {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if mag.is_one() {
            out.push_str(name);
        } else {
            out.push_str(&format!("{mag} {name}"));
        }
    }
}

/// The rounding LP in integer-coefficient LP text format, for feeding to an
/// external solver as a cross-check.
pub fn rounding_lp_text(bu: &BUInstance, p: &[Rat]) -> Result<String, LPError> {
    let m = bu.dimension + 1;
    if p.len() != m {
        return Err(LPError::BadAnchor(format!(
            "point has {} coordinates, instance wants {m}",
            p.len()
        )));
    }
    let g = odd_part_circuit(bu);
    let cell = extract_cell(&g, p)?;
    let signs = orthant(p);
    let u = |j: usize| format!("u{j}");

    let mut text = String::new();
    text.push_str("\\ exact rounding LP: u_j is the anchor's sign times x_j\n");
    text.push_str("Minimize\n obj: z\nSubject To\n");
    let mut row = |name: String, coeffs: Vec<(String, Rat)>, rel: &str, rhs: Rat| {
        let (ints, b) = clear_denominators(&coeffs, &rhs);
        text.push_str(&format!(" {name}: "));
        fmt_terms(&mut text, &ints);
        text.push_str(&format!(" {rel} {b}\n"));
    };
    let named = |coeffs: Vec<Rat>| -> Vec<(String, Rat)> {
        coeffs
            .into_iter()
            .enumerate()
            .map(|(j, c)| (u(j), c))
            .collect()
    };
    row(
        "sphere".into(),
        named(vec![Rat::one(); m]),
        "=",
        Rat::one(),
    );
    for (i, (arow, b)) in cell.a.iter().zip(&cell.b).enumerate() {
        row(format!("cell{i}"), named(signed(arow, &signs)), "<=", b.clone());
    }
    for (i, (crow, c0)) in cell.c.iter().zip(&cell.c0).enumerate() {
        let pos = signed(crow, &signs);
        let neg: Vec<Rat> = pos.iter().map(|v| -v).collect();
        let mut hi = named(pos);
        hi.push(("z".into(), rat(-1, 1)));
        row(format!("res{i}_hi"), hi, "<=", -c0);
        let mut lo = named(neg);
        lo.push(("z".into(), rat(-1, 1)));
        row(format!("res{i}_lo"), lo, "<=", c0.clone());
    }
    text.push_str("End\n");
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bu::{bu_verify, ch_to_bu, decode_bu_solution, tucker_solve, TuckerOutcome};
    use crate::ch::{CHInstance, IntegralValuation};
    use crate::circuit::{lipschitz_bound, CircuitBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn relu() -> Circuit {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let zero = b.constant(Rat::zero());
        let out = b.binary(GateKind::Max, x, zero);
        b.finish(vec![out])
    }

    #[test]
    fn relu_cell_above_zero() {
        let cell = extract_cell(&relu(), &[rat(1, 2)]).unwrap();
        assert_eq!(cell.a, vec![vec![rat(-1, 1)]]);
        assert_eq!(cell.b, vec![rat(0, 1)]);
        assert_eq!(cell.c, vec![vec![rat(1, 1)]]);
        assert_eq!(cell.c0, vec![rat(0, 1)]);
        assert!(cell.contains(&[rat(3, 4)]));
        assert!(!cell.contains(&[rat(-1, 4)]));
    }

    #[test]
    fn relu_cell_below_zero() {
        let cell = extract_cell(&relu(), &[rat(-1, 2)]).unwrap();
        assert_eq!(cell.a, vec![vec![rat(1, 1)]]);
        assert_eq!(cell.b, vec![rat(0, 1)]);
        assert_eq!(cell.c, vec![vec![rat(0, 1)]]);
        assert_eq!(cell.c0, vec![rat(0, 1)]);
    }

    #[test]
    fn relu_tie_prefers_first_input() {
        // At the kink the max keeps its first argument, the identity branch.
        let cell = extract_cell(&relu(), &[rat(0, 1)]).unwrap();
        assert_eq!(cell.c, vec![vec![rat(1, 1)]]);
        assert!(cell.contains(&[rat(0, 1)]));
    }

    fn random_linear_circuit(rng: &mut ChaCha8Rng, inputs: usize) -> Circuit {
        let mut b = CircuitBuilder::new();
        let mut pool: Vec<usize> = (0..inputs).map(|_| b.input()).collect();
        for _ in 0..12 {
            let pick = |rng: &mut ChaCha8Rng, pool: &[usize]| {
                pool[rng.gen_range(0..pool.len())]
            };
            let node = match rng.gen_range(0..8) {
                0 => {
                    let (x, y) = (pick(rng, &pool), pick(rng, &pool));
                    b.binary(GateKind::Add, x, y)
                }
                1 => {
                    let (x, y) = (pick(rng, &pool), pick(rng, &pool));
                    b.binary(GateKind::Sub, x, y)
                }
                2 => {
                    let x = pick(rng, &pool);
                    b.unary(
                        GateKind::MulConst(rat(rng.gen_range(-3..=3), rng.gen_range(1..=4))),
                        x,
                    )
                }
                3 => {
                    let (x, y) = (pick(rng, &pool), pick(rng, &pool));
                    b.binary(GateKind::Max, x, y)
                }
                4 => {
                    let (x, y) = (pick(rng, &pool), pick(rng, &pool));
                    b.binary(GateKind::Min, x, y)
                }
                5 => {
                    let (x, y) = (pick(rng, &pool), pick(rng, &pool));
                    b.binary(GateKind::Sub01, x, y)
                }
                6 => {
                    let x = pick(rng, &pool);
                    b.unary(GateKind::Double01, x)
                }
                _ => b.constant(rat(rng.gen_range(-2..=2), rng.gen_range(1..=3))),
            };
            pool.push(node);
        }
        let out = *pool.last().unwrap();
        b.finish(vec![out])
    }

    fn random_point(rng: &mut ChaCha8Rng, len: usize, denom: i64) -> Vec<Rat> {
        (0..len)
            .map(|_| rat(rng.gen_range(-denom..=denom), denom))
            .collect()
    }

    #[test]
    fn cells_reproduce_the_circuit_on_their_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        for _ in 0..25 {
            let g = random_linear_circuit(&mut rng, 3);
            let p = random_point(&mut rng, 3, 16);
            let cell = extract_cell(&g, &p).unwrap();
            assert!(cell.contains(&p));
            assert_eq!(cell.map(&p), g.eval_outputs(&p).unwrap());
            for _ in 0..40 {
                // Perturb within a small box; points that stay in the cell
                // must see the same affine map.
                let q: Vec<Rat> = p
                    .iter()
                    .map(|v| v + &rat(rng.gen_range(-4..=4), 256))
                    .collect();
                if cell.contains(&q) {
                    assert_eq!(cell.map(&q), g.eval_outputs(&q).unwrap());
                    checked += 1;
                }
            }
        }
        assert!(checked >= 100, "only {checked} interior points hit");
    }

    #[test]
    fn composed_maxes_share_one_cell_map() {
        // max(max(x, 0), y) at a generic point.
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let y = b.input();
        let zero = b.constant(Rat::zero());
        let inner = b.binary(GateKind::Max, x, zero);
        let outer = b.binary(GateKind::Max, inner, y);
        let g = b.finish(vec![outer]);
        let p = vec![rat(2, 3), rat(1, 5)];
        let cell = extract_cell(&g, &p).unwrap();
        assert_eq!(cell.a.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = 0;
        while hits < 100 {
            let q = random_point(&mut rng, 2, 64);
            if cell.contains(&q) {
                assert_eq!(cell.map(&q), g.eval_outputs(&q).unwrap());
                hits += 1;
            }
        }
    }

    #[test]
    fn nonlinear_gates_are_refused() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let s = b.unary(GateKind::Square, x);
        let g = b.finish(vec![s]);
        assert!(matches!(
            extract_cell(&g, &[rat(1, 2)]),
            Err(LPError::Circuit(CircuitError::NonlinearCircuit(_)))
        ));
        assert!(matches!(
            compute_budget(&g),
            Err(LPError::Circuit(CircuitError::NonlinearCircuit(_)))
        ));
    }

    #[test]
    fn budget_is_positive_and_strict() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let g = b.finish(vec![x]);
        let budget = compute_budget(&g).unwrap();
        assert!(budget.eps.is_positive());
        assert!(budget.eps < rat(1, 2).pow(budget.m as u32));
    }

    #[test]
    fn budget_never_shrinks_with_more_gates() {
        let mut b = CircuitBuilder::new();
        let x = b.input();
        let _y = b.input();
        let small = b.finish(vec![x]);
        let base = compute_budget(&small).unwrap().m;

        let mut b = CircuitBuilder::new();
        let x = b.input();
        let y = b.input();
        let s = b.binary(GateKind::Add, x, y);
        let t = b.unary(GateKind::MulConst(rat(7, 3)), s);
        let grown = b.finish(vec![t]);
        assert!(compute_budget(&grown).unwrap().m >= base);
    }

    #[test]
    fn budget_growth_is_tame_in_the_input_count() {
        // Integer coefficients keep per-entry bits flat, so doubling the
        // input count should well under quadruple m.
        let family = |n: usize| {
            let mut b = CircuitBuilder::new();
            let ins: Vec<_> = (0..n).map(|_| b.input()).collect();
            let outs: Vec<_> = ins
                .iter()
                .map(|&i| b.unary(GateKind::MulConst(rat(2, 1)), i))
                .collect();
            compute_budget(&b.finish(outs)).unwrap().m
        };
        let mut prev = family(2);
        for n in [4, 8, 16] {
            let cur = family(n);
            assert!(cur > prev);
            assert!(cur < 3 * prev, "m({n}) = {cur} vs m({}) = {prev}", n / 2);
            prev = cur;
        }
    }

    fn first_coordinate_bu() -> BUInstance {
        let mut b = CircuitBuilder::new();
        let x1 = b.input();
        let _x2 = b.input();
        BUInstance::new(1, b.finish(vec![x1])).unwrap()
    }

    #[test]
    fn rounds_near_zero_anchor_to_exact_zero() {
        let bu = first_coordinate_bu();
        let p = vec![rat(1, 128), rat(127, 128)];
        let x = round_to_exact(&bu, &p).unwrap();
        assert_eq!(x, vec![rat(0, 1), rat(1, 1)]);
        assert!(bu_verify(&bu, &x, &Rat::zero()).ok);
    }

    #[test]
    fn exact_anchor_is_returned_unchanged() {
        let bu = first_coordinate_bu();
        let p = vec![rat(0, 1), rat(-1, 1)];
        assert_eq!(round_to_exact(&bu, &p).unwrap(), p);
    }

    #[test]
    fn rejects_malformed_anchors() {
        let bu = first_coordinate_bu();
        assert!(matches!(
            round_to_exact(&bu, &[rat(1, 2)]),
            Err(LPError::BadAnchor(_))
        ));
        assert!(matches!(
            round_to_exact(&bu, &[rat(1, 2), rat(1, 4)]),
            Err(LPError::BadAnchor(_))
        ));
    }

    #[test]
    fn far_anchor_reports_positive_optimum() {
        // f = max(2 x_1, x_2): the cell of p = (1/2, 1/2) keeps
        // g = 2 x_1 + x_2 >= 1 + u_1 away from zero, bottoming out at 4/3.
        let mut b = CircuitBuilder::new();
        let x1 = b.input();
        let x2 = b.input();
        let s = b.unary(GateKind::MulConst(rat(2, 1)), x1);
        let mx = b.binary(GateKind::Max, s, x2);
        let bu = BUInstance::new(1, b.finish(vec![mx])).unwrap();
        match round_to_exact(&bu, &[rat(1, 2), rat(1, 2)]) {
            Err(LPError::PositiveOptimum { z }) => {
                assert_eq!(z, rat(4, 3));
                let budget = compute_budget(&odd_part_circuit(&bu)).unwrap();
                assert!(z.bit_len() <= budget.m);
            }
            other => panic!("expected PositiveOptimum, got {other:?}"),
        }
    }

    #[test]
    fn tucker_then_round_gives_exact_consensus_halving() {
        let mut id = CircuitBuilder::new();
        let t = id.input();
        let identity = id.finish(vec![t]);
        let mut cap = CircuitBuilder::new();
        let t = cap.input();
        let half = cap.constant(rat(1, 2));
        let mn = cap.binary(GateKind::Min, t, half);
        let capped = cap.finish(vec![mn]);
        let inst = CHInstance::new(
            vec![
                IntegralValuation::Circuit(identity),
                IntegralValuation::Circuit(capped),
            ],
            Rat::one(),
        )
        .unwrap();
        let bu = ch_to_bu(&inst).unwrap();
        let lambda = lipschitz_bound(&bu.circuit).unwrap();
        let outcome = tucker_solve(&bu, &rat(1, 16), &lambda).unwrap();
        let TuckerOutcome::Solution(approx) = outcome else {
            panic!("witness on a certified bound");
        };
        let exact = round_to_exact(&bu, &approx.x).unwrap();
        assert!(bu_verify(&bu, &exact, &Rat::zero()).ok);
        let sol = decode_bu_solution(&exact, &inst, &Rat::zero()).unwrap();
        assert!(crate::ch::verify(&inst, &sol, &Rat::zero()).unwrap().ok);
    }

    #[test]
    fn lp_text_round_trips_integers() {
        let bu = first_coordinate_bu();
        let text = rounding_lp_text(&bu, &[rat(1, 128), rat(127, 128)]).unwrap();
        let expected = "\\ exact rounding LP: u_j is the anchor's sign times x_j\n\
                        Minimize\n obj: z\nSubject To\n\
                        \x20sphere: u0 + u1 = 1\n\
                        \x20res0_hi: 2 u0 - z <= 0\n\
                        \x20res0_lo: - 2 u0 - z <= 0\n\
                        End\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn lp_text_clears_fractions_rowwise() {
        // f = x_1/6 gives residual rows with coefficient 1/3; the export
        // must scale them to integers.
        let mut b = CircuitBuilder::new();
        let x1 = b.input();
        let _x2 = b.input();
        let s = b.unary(GateKind::MulConst(rat(1, 6)), x1);
        let bu = BUInstance::new(1, b.finish(vec![s])).unwrap();
        let text = rounding_lp_text(&bu, &[rat(1, 2), rat(-1, 2)]).unwrap();
        assert!(text.contains("res0_hi: u0 - 3 z <= 0"));
        assert!(text.contains("res0_lo: - u0 - 3 z <= 0"));
    }
}
