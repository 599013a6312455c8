//! Sentences in the existential theory of the reals: circuit constraint
//! conjunctions, the consensus-halving decision sentence, the always-true
//! Borsuk-Ulam sentence, and a one-sided grid checker for tiny sentences.
//!
//! A sentence is a variable list with optional box bounds and a
//! quantifier-free matrix built from polynomial comparisons under and, or,
//! not. The pieces of |x_j| are expressed with split variables
//! x_j = xp_j - xn_j, both halves nonnegative, so the sphere equation
//! becomes linear and the sign condition xp_j * xn_j = 0 stays polynomial.

mod text;

pub use text::{emit, parse};

use crate::bu::{positive_mass_circuit, BUError, BUInstance};
use crate::ch::CHInstance;
use crate::circuit::{propagate_intervals, Circuit, CircuitBuilder, CircuitError, Gate, GateKind, NodeId};
use crate::rat::{rat, Rat};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Const(Rat),
    Var(usize),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Neg(Box<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Cmp(Rel, Term, Term),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub bounds: Option<(Rat, Rat)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ETRSentence {
    pub vars: Vec<VarDecl>,
    pub matrix: Formula,
}

#[derive(Debug, thiserror::Error)]
pub enum ETRError {
    #[error("comparison gates cannot appear in a real-arithmetic sentence")]
    ComparisonGateForbidden,
    #[error("variable {0} has no box bounds; the grid checker needs a box")]
    UnboundedVariable(String),
    #[error("grid step must be positive")]
    BadGridStep,
    #[error("assignment has {got} values, sentence declares {expected} variables")]
    WrongArity { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    BU(#[from] BUError),
}

fn bx(t: Term) -> Box<Term> {
    Box::new(t)
}

fn var(i: usize) -> Term {
    Term::Var(i)
}

fn cnst(r: Rat) -> Term {
    Term::Const(r)
}

fn eq(l: Term, r: Term) -> Formula {
    Formula::Cmp(Rel::Eq, l, r)
}

fn gate_constraint(gate: &Gate, offset: usize) -> Result<Formula, ETRError> {
    let a = || var(offset + gate.ins[0]);
    let b = || var(offset + gate.ins[1]);
    let out = var(offset + gate.out);
    Ok(match &gate.kind {
        GateKind::Const(z) => eq(out, cnst(z.clone())),
        GateKind::Add => eq(out, Term::Add(bx(a()), bx(b()))),
        GateKind::Sub => eq(out, Term::Sub(bx(a()), bx(b()))),
        GateKind::MulConst(z) => eq(out, Term::Mul(bx(cnst(z.clone())), bx(a()))),
        GateKind::Mul => eq(out, Term::Mul(bx(a()), bx(b()))),
        GateKind::Square => eq(out, Term::Mul(bx(a()), bx(a()))),
        GateKind::Double01 => eq(out, Term::Mul(bx(cnst(rat(2, 1))), bx(a()))),
        GateKind::Max => Formula::Or(vec![
            Formula::And(vec![eq(out.clone(), a()), Formula::Cmp(Rel::Ge, a(), b())]),
            Formula::And(vec![eq(out, b()), Formula::Cmp(Rel::Ge, b(), a())]),
        ]),
        GateKind::Min => Formula::Or(vec![
            Formula::And(vec![eq(out.clone(), a()), Formula::Cmp(Rel::Le, a(), b())]),
            Formula::And(vec![eq(out, b()), Formula::Cmp(Rel::Le, b(), a())]),
        ]),
        GateKind::Sub01 => Formula::Or(vec![
            Formula::And(vec![
                eq(out.clone(), Term::Sub(bx(a()), bx(b()))),
                Formula::Cmp(Rel::Ge, a(), b()),
            ]),
            Formula::And(vec![
                eq(out, cnst(Rat::zero())),
                Formula::Cmp(Rel::Le, a(), b()),
            ]),
        ]),
        GateKind::CmpGt => return Err(ETRError::ComparisonGateForbidden),
    })
}

/// One variable per circuit node and one constraint per gate; satisfying
/// assignments are exactly the circuit's evaluation traces. Max and min
/// gates become the usual two-disjunct branch formulas.
pub fn circuit_to_constraints(c: &Circuit) -> Result<ETRSentence, ETRError> {
    if c.cyclic {
        return Err(CircuitError::CyclicCircuit.into());
    }
    let vars = (0..c.nodes)
        .map(|i| VarDecl {
            name: format!("v{i}"),
            bounds: None,
        })
        .collect();
    let mut conjuncts = Vec::with_capacity(c.gates.len());
    for gate in &c.gates {
        conjuncts.push(gate_constraint(gate, 0)?);
    }
    Ok(ETRSentence {
        vars,
        matrix: Formula::And(conjuncts),
    })
}

/// A copy of `f` at x next to a copy at -x; outputs are the f(x) block
/// followed by the f(-x) block.
fn paired_with_antipode(f: &Circuit) -> Circuit {
    let mut b = CircuitBuilder::new();
    let xs: Vec<NodeId> = (0..f.inputs.len()).map(|_| b.input()).collect();
    let fx = b.paste(f, &xs);
    let negs: Vec<NodeId> = xs
        .iter()
        .map(|&x| b.unary(GateKind::MulConst(rat(-1, 1)), x))
        .collect();
    let fnx = b.paste(f, &negs);
    b.finish(fx.into_iter().chain(fnx).collect())
}

fn sum_term(parts: Vec<Term>) -> Term {
    let mut it = parts.into_iter();
    let first = it.next().expect("nonempty sum");
    it.fold(first, |acc, t| Term::Add(bx(acc), bx(t)))
}

/// The sphere-and-circuit sentence shared by the CH and BU emitters:
/// coordinate split halves first, then one variable per circuit node, with
/// gate constraints, antipodal output equalities, split linking, the
/// linearized sphere equation, and the sign-consistency products. Splits
/// precede nodes so a grid search meets the sphere constraints early.
fn sphere_sentence(paired: &Circuit, pairs: usize) -> Result<ETRSentence, ETRError> {
    let m = paired.inputs.len();
    let boxes = propagate_intervals(paired, &vec![(rat(-1, 1), Rat::one()); m])
        .expect("paired circuit is acyclic with one box per input");
    let mut vars: Vec<VarDecl> = Vec::with_capacity(2 * m + paired.nodes);
    for j in 0..m {
        vars.push(VarDecl {
            name: format!("xp{j}"),
            bounds: Some((Rat::zero(), Rat::one())),
        });
    }
    let xn_base = vars.len();
    for j in 0..m {
        vars.push(VarDecl {
            name: format!("xn{j}"),
            bounds: Some((Rat::zero(), Rat::one())),
        });
    }
    let node_base = vars.len();
    vars.extend(boxes.into_iter().enumerate().map(|(i, b)| VarDecl {
        name: format!("v{i}"),
        bounds: Some(b),
    }));

    let mut conjuncts = Vec::new();
    let mut halves = Vec::with_capacity(2 * m);
    for j in 0..m {
        conjuncts.push(eq(
            var(node_base + paired.inputs[j]),
            Term::Sub(bx(var(j)), bx(var(xn_base + j))),
        ));
        conjuncts.push(eq(
            Term::Mul(bx(var(j)), bx(var(xn_base + j))),
            cnst(Rat::zero()),
        ));
        halves.push(var(j));
        halves.push(var(xn_base + j));
    }
    conjuncts.push(eq(sum_term(halves), cnst(Rat::one())));
    for gate in &paired.gates {
        conjuncts.push(gate_constraint(gate, node_base)?);
    }
    for i in 0..pairs {
        conjuncts.push(eq(
            var(node_base + paired.outputs[i]),
            var(node_base + paired.outputs[pairs + i]),
        ));
    }
    Ok(ETRSentence {
        vars,
        matrix: Formula::And(conjuncts),
    })
}

/// Sentence that is true exactly when the instance has a k-cut solution:
/// each agent's positive-side mass equals its antipodal twin, which is the
/// negative-side mass.
pub fn ch_to_etr(inst: &CHInstance, k: usize) -> Result<ETRSentence, ETRError> {
    let f = positive_mass_circuit(inst, k + 1)?;
    sphere_sentence(&paired_with_antipode(&f), inst.agents.len())
}

/// Always-satisfiable sentence for f(x) = f(-x) on the crosspolytope
/// sphere.
pub fn bu_to_etr(bu: &BUInstance) -> Result<ETRSentence, ETRError> {
    sphere_sentence(&paired_with_antipode(&bu.circuit), bu.circuit.outputs.len())
}

/// Full variable assignment of the k-cut sentence at a sphere point: the
/// positive and negative coordinate halves followed by the evaluation
/// trace of the paired circuit.
pub fn ch_sentence_witness(inst: &CHInstance, k: usize, x: &[Rat]) -> Result<Vec<Rat>, ETRError> {
    let f = positive_mass_circuit(inst, k + 1)?;
    sphere_witness(&paired_with_antipode(&f), x)
}

/// Full variable assignment of the BU sentence at a sphere point.
pub fn bu_sentence_witness(bu: &BUInstance, x: &[Rat]) -> Result<Vec<Rat>, ETRError> {
    sphere_witness(&paired_with_antipode(&bu.circuit), x)
}

fn sphere_witness(paired: &Circuit, x: &[Rat]) -> Result<Vec<Rat>, ETRError> {
    let mut assignment = Vec::with_capacity(2 * x.len() + paired.nodes);
    for v in x {
        assignment.push(v.clone().max(Rat::zero()));
    }
    for v in x {
        assignment.push((-v).max(Rat::zero()));
    }
    assignment.extend(paired.evaluate(x)?);
    Ok(assignment)
}

fn eval_term(t: &Term, assignment: &[Rat]) -> Rat {
    match t {
        Term::Const(r) => r.clone(),
        Term::Var(i) => assignment[*i].clone(),
        Term::Add(a, b) => eval_term(a, assignment) + eval_term(b, assignment),
        Term::Sub(a, b) => eval_term(a, assignment) - eval_term(b, assignment),
        Term::Mul(a, b) => eval_term(a, assignment) * eval_term(b, assignment),
        Term::Neg(a) => -eval_term(a, assignment),
    }
}

fn eval_formula(f: &Formula, assignment: &[Rat]) -> bool {
    match f {
        Formula::Cmp(rel, l, r) => {
            let l = eval_term(l, assignment);
            let r = eval_term(r, assignment);
            match rel {
                Rel::Lt => l < r,
                Rel::Le => l <= r,
                Rel::Eq => l == r,
                Rel::Ge => l >= r,
                Rel::Gt => l > r,
            }
        }
        Formula::And(fs) => fs.iter().all(|f| eval_formula(f, assignment)),
        Formula::Or(fs) => fs.iter().any(|f| eval_formula(f, assignment)),
        Formula::Not(f) => !eval_formula(f, assignment),
    }
}

/// Exact satisfaction at a full assignment, box bounds included.
pub fn eval_sentence(s: &ETRSentence, assignment: &[Rat]) -> Result<bool, ETRError> {
    if assignment.len() != s.vars.len() {
        return Err(ETRError::WrongArity {
            expected: s.vars.len(),
            got: assignment.len(),
        });
    }
    for (decl, v) in s.vars.iter().zip(assignment) {
        if let Some((lo, hi)) = &decl.bounds {
            if v < lo || v > hi {
                return Ok(false);
            }
        }
    }
    Ok(eval_formula(&s.matrix, assignment))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BruteOutcome {
    Sat { witness: Vec<Rat> },
    Unknown,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Open,
}

fn tri_term(t: &Term, partial: &[Option<Rat>]) -> Option<Rat> {
    match t {
        Term::Const(r) => Some(r.clone()),
        Term::Var(i) => partial[*i].clone(),
        Term::Add(a, b) => Some(tri_term(a, partial)? + tri_term(b, partial)?),
        Term::Sub(a, b) => Some(tri_term(a, partial)? - tri_term(b, partial)?),
        Term::Mul(a, b) => Some(tri_term(a, partial)? * tri_term(b, partial)?),
        Term::Neg(a) => Some(-tri_term(a, partial)?),
    }
}

fn tri_formula(f: &Formula, partial: &[Option<Rat>], tol: &Rat) -> Tri {
    match f {
        Formula::Cmp(rel, l, r) => {
            let (Some(l), Some(r)) = (tri_term(l, partial), tri_term(r, partial)) else {
                return Tri::Open;
            };
            let holds = match rel {
                Rel::Lt => l < r,
                Rel::Le => l <= r,
                Rel::Eq => (l - r).abs() <= *tol,
                Rel::Ge => l >= r,
                Rel::Gt => l > r,
            };
            if holds {
                Tri::True
            } else {
                Tri::False
            }
        }
        Formula::And(fs) => {
            let mut out = Tri::True;
            for f in fs {
                match tri_formula(f, partial, tol) {
                    Tri::False => return Tri::False,
                    Tri::Open => out = Tri::Open,
                    Tri::True => {}
                }
            }
            out
        }
        Formula::Or(fs) => {
            let mut out = Tri::False;
            for f in fs {
                match tri_formula(f, partial, tol) {
                    Tri::True => return Tri::True,
                    Tri::Open => out = Tri::Open,
                    Tri::False => {}
                }
            }
            out
        }
        Formula::Not(f) => match tri_formula(f, partial, tol) {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Open => Tri::Open,
        },
    }
}

fn grid_values(lo: &Rat, hi: &Rat, step: &Rat) -> Vec<Rat> {
    let k_lo = (lo / step).ceil_int();
    let k_hi = (hi / step).floor_int();
    let mut vals = Vec::new();
    let (Some(a), Some(b)) = (k_lo.to_i64(), k_hi.to_i64()) else {
        return vals;
    };
    for k in a..=b {
        vals.push(Rat::int(k) * step);
    }
    vals
}

fn flatten_conjuncts(f: &Formula) -> Vec<&Formula> {
    match f {
        Formula::And(fs) => fs.iter().flat_map(flatten_conjuncts).collect(),
        other => vec![other],
    }
}

/// When a top-level equality pins `depth` to an already-computable value,
/// restrict it to the nearest grid points (both on a tie) within one step.
/// Anything further only re-spends the relaxation on drift, and the search
/// stays one-sided, so narrowing here never breaks soundness.
fn pinned_candidates(
    conjuncts: &[&Formula],
    partial: &[Option<Rat>],
    depth: usize,
    grid: &[Rat],
    tol: &Rat,
) -> Option<Vec<Rat>> {
    for f in conjuncts {
        let Formula::Cmp(Rel::Eq, l, r) = f else {
            continue;
        };
        let other = match (l, r) {
            (Term::Var(i), t) if *i == depth => t,
            (t, Term::Var(i)) if *i == depth => t,
            _ => continue,
        };
        let Some(c) = tri_term(other, partial) else {
            continue;
        };
        let best = grid
            .iter()
            .map(|g| (g - &c).abs())
            .min_by(|x, y| x.partial_cmp(y).expect("rationals are totally ordered"));
        let vals: Vec<Rat> = match best {
            Some(d) if &d <= tol => grid
                .iter()
                .filter(|g| (*g - &c).abs() == d)
                .cloned()
                .collect(),
            _ => Vec::new(),
        };
        return Some(vals);
    }
    None
}

fn dfs(
    matrix: &Formula,
    conjuncts: &[&Formula],
    grids: &[Vec<Rat>],
    tol: &Rat,
    partial: &mut Vec<Option<Rat>>,
    depth: usize,
) -> bool {
    if depth == grids.len() {
        return tri_formula(matrix, partial, tol) == Tri::True;
    }
    let candidates = pinned_candidates(conjuncts, partial, depth, &grids[depth], tol)
        .unwrap_or_else(|| grids[depth].clone());
    for val in candidates {
        partial[depth] = Some(val);
        if tri_formula(matrix, partial, tol) != Tri::False
            && dfs(matrix, conjuncts, grids, tol, partial, depth + 1)
        {
            return true;
        }
    }
    partial[depth] = None;
    false
}

/// One-sided satisfiability search over the grid of step multiples inside
/// every variable's box. Equalities are relaxed to a tolerance of one grid
/// step; a hit is reported with its witness, exhaustion only as Unknown,
/// never as unsatisfiable. Assignments are explored depth-first in
/// declaration order, with values pinned by an equality tried nearest
/// first.
pub fn brute_check(s: &ETRSentence, step: &Rat) -> Result<BruteOutcome, ETRError> {
    if !step.is_positive() {
        return Err(ETRError::BadGridStep);
    }
    let mut grids = Vec::with_capacity(s.vars.len());
    for v in &s.vars {
        let Some((lo, hi)) = &v.bounds else {
            return Err(ETRError::UnboundedVariable(v.name.clone()));
        };
        grids.push(grid_values(lo, hi, step));
    }
    let conjuncts = flatten_conjuncts(&s.matrix);
    let mut partial: Vec<Option<Rat>> = vec![None; s.vars.len()];
    if dfs(&s.matrix, &conjuncts, &grids, step, &mut partial, 0) {
        Ok(BruteOutcome::Sat {
            witness: partial.into_iter().map(Option::unwrap).collect(),
        })
    } else {
        Ok(BruteOutcome::Unknown)
    }
}
