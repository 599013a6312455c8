//! Approximate Borsuk-Ulam solving by Tucker labelling.
//!
//! The L1 sphere is the boundary of the cross-polytope: one simplex facet
//! per sign pattern. Each facet carries a Kuhn subdivision at mesh 1/K,
//! written in staircase coordinates K >= u_1 >= ... >= u_d >= 0 whose
//! consecutive differences are the barycentric widths of the vertex. Edges
//! of that subdivision are exactly the pairs (u, u + s) with s a 0/1 vector,
//! and every edge has L-infinity length exactly 1/K. Vertices are labelled
//! by the dominant coordinate of g(x) = f(x) - f(-x); the labelling is odd,
//! so Tucker's lemma guarantees a complementary edge somewhere, and such an
//! edge either pins an approximate solution or convicts f of breaking its
//! claimed Lipschitz bound.
//!
//! The scan labels with f64 arithmetic first and re-verifies candidate
//! edges exactly; if floats mislead it everywhere, a second pass relabels
//! exactly. Negating a facet's sign pattern negates g bit-for-bit even in
//! floats, so only facets with a positive first sign are scanned.

use super::{BUError, BUInstance};
use crate::rat::{linf_dist, linf_norm, rat, Rat};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub const DIMENSION_LIMIT: usize = 3;

/// Cap on staircase points per facet, which bounds both memory for the
/// label array and scan time.
const VERTEX_BUDGET: u128 = 300_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolution {
    pub x: Vec<Rat>,
    pub residual: Rat,
}

/// Two sphere points whose f-values move too fast for the claimed constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzWitness {
    pub x: Vec<Rat>,
    pub y: Vec<Rat>,
    pub ratio: Rat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TuckerOutcome {
    Solution(ApproxSolution),
    Witness(LipschitzWitness),
}

/// Label rule: the coordinate with the largest |g_i| wins, lowest index on
/// ties, sign taken from g_i. All-zero g has no label; that point already
/// solves the instance.
pub fn label_of(g: &[Rat]) -> Option<i32> {
    if g.is_empty() {
        return None;
    }
    let mut best = 0;
    for i in 1..g.len() {
        if g[i].abs() > g[best].abs() {
            best = i;
        }
    }
    if g[best].is_zero() {
        return None;
    }
    let idx = (best + 1) as i32;
    Some(if g[best].is_positive() { idx } else { -idx })
}

fn label_of_f64(g: &[f64]) -> Option<i8> {
    if g.is_empty() {
        return None;
    }
    let mut best = 0;
    for i in 1..g.len() {
        if g[i].abs() > g[best].abs() {
            best = i;
        }
    }
    if g[best] == 0.0 {
        return None;
    }
    let idx = (best + 1) as i8;
    Some(if g[best] > 0.0 { idx } else { -idx })
}

fn binom(n: u64, r: u32) -> u128 {
    let n = n as u128;
    match r {
        0 => 1,
        1 => n,
        2 => n * (n - 1) / 2,
        3 => n * (n - 1) * (n - 2) / 6,
        _ => unreachable!("dimension limit keeps binomials tiny"),
    }
}

fn staircase_count(k: u64, d: usize) -> u128 {
    binom(k + d as u64, d as u32)
}

/// Position of `u` in the lexicographic enumeration of staircase points.
fn rank(u: &[u64]) -> usize {
    let d = u.len();
    let mut r: u128 = 0;
    for (i, &ui) in u.iter().enumerate() {
        let slack = (d - 1 - i) as u64;
        r += binom(ui + slack, slack as u32 + 1);
    }
    r as usize
}

/// Advances `u` to the next staircase point in lexicographic order.
fn next_staircase(u: &mut [u64], k: u64) -> bool {
    for i in (0..u.len()).rev() {
        let cap = if i == 0 { k } else { u[i - 1] };
        if u[i] < cap {
            u[i] += 1;
            for v in &mut u[i + 1..] {
                *v = 0;
            }
            return true;
        }
    }
    false
}

/// Barycentric widths y (summing to k) of the staircase point `u`.
fn widths(u: &[u64], k: u64) -> Vec<u64> {
    let d = u.len();
    if d == 0 {
        return vec![k];
    }
    let mut y = Vec::with_capacity(d + 1);
    y.push(k - u[0]);
    for i in 1..d {
        y.push(u[i - 1] - u[i]);
    }
    y.push(u[d - 1]);
    y
}

fn coords_exact(sigma: &[i8], y: &[u64], k: u64) -> Vec<Rat> {
    sigma
        .iter()
        .zip(y)
        .map(|(&s, &w)| rat(s as i64 * w as i64, k as i64))
        .collect()
}

/// The triangulated sphere at resolution k, held implicitly: vertices and
/// edges are generated from staircase coordinates, labels are computed from
/// the instance on demand.
pub struct TuckerComplex<'a> {
    pub instance: &'a BUInstance,
    k: u64,
}

impl<'a> TuckerComplex<'a> {
    pub fn new(instance: &'a BUInstance, k: u64) -> Result<Self, BUError> {
        if k == 0 {
            return Err(BUError::NonPositiveParameter {
                name: "mesh resolution",
                value: Rat::zero(),
            });
        }
        Ok(TuckerComplex { instance, k })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.instance.dimension
    }

    pub fn mesh(&self) -> Rat {
        rat(1, self.k as i64)
    }

    /// All 2^{d+1} facet sign patterns.
    pub fn facet_signs(&self) -> Vec<Vec<i8>> {
        let m = self.dimension() + 1;
        (0..1u32 << m)
            .map(|mask| {
                (0..m)
                    .map(|i| if mask >> i & 1 == 0 { 1 } else { -1 })
                    .collect()
            })
            .collect()
    }

    /// Every staircase point of one facet. Only sensible at test scales.
    pub fn staircase(&self) -> Result<Vec<Vec<u64>>, BUError> {
        let count = staircase_count(self.k, self.dimension());
        if count > 2_000_000 {
            return Err(BUError::MeshTooFine { vertices: count });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut u = vec![0u64; self.dimension()];
        loop {
            out.push(u.clone());
            if !next_staircase(&mut u, self.k) {
                break;
            }
        }
        Ok(out)
    }

    pub fn coords(&self, sigma: &[i8], u: &[u64]) -> Vec<Rat> {
        coords_exact(sigma, &widths(u, self.k), self.k)
    }

    /// Staircase points one subdivision edge above `u`.
    pub fn edges_from(&self, u: &[u64]) -> Vec<Vec<u64>> {
        let d = u.len();
        let mut out = Vec::new();
        's: for s in 1u32..1 << d {
            let mut v = Vec::with_capacity(d);
            let mut prev = self.k;
            for i in 0..d {
                let vi = u[i] + (s >> i & 1) as u64;
                if vi > prev {
                    continue 's;
                }
                v.push(vi);
                prev = vi;
            }
            out.push(v);
        }
        out
    }

    pub fn label(&self, x: &[Rat]) -> Result<Option<i32>, BUError> {
        Ok(label_of(&self.instance.eval_odd_part(x)?))
    }
}

struct Scanner<'a> {
    bu: &'a BUInstance,
    d: usize,
    k: u64,
    eps: Rat,
    lambda: Rat,
    scratch: Vec<f64>,
    fx: Vec<f64>,
    fnx: Vec<f64>,
    x64: Vec<f64>,
    neg64: Vec<f64>,
}

enum Edge {
    Resolved(TuckerOutcome),
    FalseAlarm,
}

impl Scanner<'_> {
    fn vertex_g64(&mut self, sigma: &[f64], y: &[u64]) -> [f64; DIMENSION_LIMIT] {
        let inv = 1.0 / self.k as f64;
        for i in 0..=self.d {
            let v = y[i] as f64 * inv * sigma[i];
            self.x64[i] = v;
            self.neg64[i] = -v;
        }
        self.bu
            .circuit
            .evaluate_f64(&self.x64, &mut self.scratch, &mut self.fx);
        self.bu
            .circuit
            .evaluate_f64(&self.neg64, &mut self.scratch, &mut self.fnx);
        let mut g = [0.0; DIMENSION_LIMIT];
        for i in 0..self.d {
            g[i] = self.fx[i] - self.fnx[i];
        }
        g
    }

    fn exact_label(&self, sigma: &[i8], y: &[u64]) -> Result<Result<i8, TuckerOutcome>, BUError> {
        let x = coords_exact(sigma, y, self.k);
        let g = self.bu.eval_odd_part(&x)?;
        Ok(match label_of(&g) {
            Some(l) => Ok(l as i8),
            None => Err(TuckerOutcome::Solution(ApproxSolution {
                x,
                residual: Rat::zero(),
            })),
        })
    }

    fn scan_facet(
        &mut self,
        sigma: &[i8],
        exact: bool,
    ) -> Result<Option<TuckerOutcome>, BUError> {
        let d = self.d;
        let count = staircase_count(self.k, d) as usize;
        let sigma64: Vec<f64> = sigma.iter().map(|&s| s as f64).collect();
        let mut labels: Vec<i8> = Vec::with_capacity(count);

        let mut u = vec![0u64; d];
        loop {
            let y = widths(&u, self.k);
            let label = if exact {
                match self.exact_label(sigma, &y)? {
                    Ok(l) => l,
                    Err(done) => return Ok(Some(done)),
                }
            } else {
                match label_of_f64(&self.vertex_g64(&sigma64, &y)[..d]) {
                    Some(l) => l,
                    // Floats see an exact zero; settle it with rationals.
                    None => match self.exact_label(sigma, &y)? {
                        Ok(l) => l,
                        Err(done) => return Ok(Some(done)),
                    },
                }
            };
            labels.push(label);
            if !next_staircase(&mut u, self.k) {
                break;
            }
        }
        debug_assert_eq!(labels.len(), count);

        let mut u = vec![0u64; d];
        let mut idx = 0;
        loop {
            let lu = labels[idx];
            's: for s in 1u32..1 << d {
                let mut v = [0u64; DIMENSION_LIMIT];
                let mut prev = self.k;
                for i in 0..d {
                    let vi = u[i] + (s >> i & 1) as u64;
                    if vi > prev {
                        continue 's;
                    }
                    v[i] = vi;
                    prev = vi;
                }
                if labels[rank(&v[..d])] == -lu {
                    match self.resolve_edge(sigma, &u, &v[..d])? {
                        Edge::Resolved(out) => return Ok(Some(out)),
                        Edge::FalseAlarm => {}
                    }
                }
            }
            idx += 1;
            if !next_staircase(&mut u, self.k) {
                break;
            }
        }
        Ok(None)
    }

    /// Exact post-mortem of an edge the labels flagged as complementary.
    fn resolve_edge(&self, sigma: &[i8], u: &[u64], v: &[u64]) -> Result<Edge, BUError> {
        let xu = coords_exact(sigma, &widths(u, self.k), self.k);
        let xv = coords_exact(sigma, &widths(v, self.k), self.k);
        let gu = self.bu.eval_odd_part(&xu)?;
        let lu = match label_of(&gu) {
            Some(l) => l,
            None => {
                return Ok(Edge::Resolved(TuckerOutcome::Solution(ApproxSolution {
                    x: xu,
                    residual: Rat::zero(),
                })))
            }
        };
        let gv = self.bu.eval_odd_part(&xv)?;
        let lv = match label_of(&gv) {
            Some(l) => l,
            None => {
                return Ok(Edge::Resolved(TuckerOutcome::Solution(ApproxSolution {
                    x: xv,
                    residual: Rat::zero(),
                })))
            }
        };
        if lu != -lv {
            return Ok(Edge::FalseAlarm);
        }
        let dist = linf_dist(&xu, &xv);
        debug_assert_eq!(dist, rat(1, self.k as i64));
        // g inherits at most twice f's constant; anything faster convicts f.
        let bound = rat(2, 1) * &self.lambda * &dist;
        if linf_dist(&gu, &gv) > bound {
            let fu = self.bu.eval(&xu)?;
            let fv = self.bu.eval(&xv)?;
            let nu: Vec<Rat> = xu.iter().map(|a| -a).collect();
            let nv: Vec<Rat> = xv.iter().map(|a| -a).collect();
            let fnu = self.bu.eval(&nu)?;
            let fnv = self.bu.eval(&nv)?;
            let r_pos = linf_dist(&fu, &fv) / &dist;
            let r_neg = linf_dist(&fnu, &fnv) / &dist;
            let (x, y, ratio) = if r_pos >= r_neg {
                (xu, xv, r_pos)
            } else {
                (nu, nv, r_neg)
            };
            debug_assert!(ratio > self.lambda);
            return Ok(Edge::Resolved(TuckerOutcome::Witness(LipschitzWitness {
                x,
                y,
                ratio,
            })));
        }
        // Complementary labels put the whole of both residuals inside the
        // g-difference at the labelled coordinate, so the smaller endpoint
        // is within lambda * mesh <= eps.
        let ru = linf_norm(&gu);
        let rv = linf_norm(&gv);
        let (x, residual) = if ru <= rv { (xu, ru) } else { (xv, rv) };
        debug_assert!(residual <= self.eps);
        Ok(Edge::Resolved(TuckerOutcome::Solution(ApproxSolution {
            x,
            residual,
        })))
    }
}

fn facet_sigma(mask: u32, d: usize) -> Vec<i8> {
    let mut s = Vec::with_capacity(d + 1);
    s.push(1);
    for i in 0..d {
        s.push(if mask >> i & 1 == 0 { 1 } else { -1 });
    }
    s
}

/// Searches the mesh-1/K triangulation, K = ceil(lambda/eps), so adjacent
/// vertices sit within eps/lambda of each other. Returns either a sphere
/// point with ||f(x) - f(-x)||_inf <= eps or a pair of points witnessing
/// that f is not lambda-Lipschitz.
pub fn tucker_solve(bu: &BUInstance, eps: &Rat, lambda: &Rat) -> Result<TuckerOutcome, BUError> {
    if !eps.is_positive() {
        return Err(BUError::NonPositiveParameter {
            name: "epsilon",
            value: eps.clone(),
        });
    }
    if !lambda.is_positive() {
        return Err(BUError::NonPositiveParameter {
            name: "lambda",
            value: lambda.clone(),
        });
    }
    let d = bu.dimension;
    if d > DIMENSION_LIMIT {
        return Err(BUError::DimensionTooLarge {
            dimension: d,
            limit: DIMENSION_LIMIT,
        });
    }
    if d == 0 {
        // No outputs to balance; either sphere point will do.
        return Ok(TuckerOutcome::Solution(ApproxSolution {
            x: vec![Rat::one()],
            residual: Rat::zero(),
        }));
    }
    let k = match (lambda / eps).ceil_int().to_u64() {
        Some(k) => k.max(1),
        None => {
            return Err(BUError::MeshTooFine {
                vertices: u128::MAX,
            })
        }
    };
    let count = staircase_count(k, d);
    if count > VERTEX_BUDGET {
        return Err(BUError::MeshTooFine { vertices: count });
    }

    let mut scanner = Scanner {
        bu,
        d,
        k,
        eps: eps.clone(),
        lambda: lambda.clone(),
        scratch: vec![0.0; bu.circuit.nodes],
        fx: vec![0.0; d],
        fnx: vec![0.0; d],
        x64: vec![0.0; d + 1],
        neg64: vec![0.0; d + 1],
    };
    // Facets come in antipodal pairs with bitwise-negated g, so fixing the
    // first sign loses no edges. The exact relabelling pass only runs if
    // float labels surfaced nothing real.
    for exact in [false, true] {
        for mask in 0..1u32 << d {
            let sigma = facet_sigma(mask, d);
            if let Some(out) = scanner.scan_facet(&sigma, exact)? {
                return Ok(out);
            }
        }
    }
    Err(BUError::SearchExhausted)
}
