//! From a finite strategic-form game to the response circuit whose node
//! assignments at the closed cycle are exactly the game's equilibria.
//!
//! Two acyclic circuits are built from the same normalized payoffs. The
//! reference form computes, per player, y = x + v(x), sorts it, takes
//! t_i = max_l (1/l)(sum of the l largest entries - 1) and outputs
//! max(y_ij - t_i, 0). The scaled form works on p = y/2 throughout so that
//! every node provably stays inside [0,1] on mixed profiles, and recovers the
//! same outputs through halved thresholds and a final doubling. Closing the
//! scaled form onto its own inputs gives the cyclic circuit that downstream
//! embedding consumes.

use super::{sorting_network, ReductionError};
use crate::circuit::{Circuit, CircuitBuilder, GateKind, NodeId};
use crate::rat::{rat, Rat};
use serde::{Deserialize, Serialize};

/// Strategic-form game. `payoffs[i]` is player i's payoff tensor, flattened
/// with the last player's strategy index varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameInstance {
    pub strategies: Vec<usize>,
    pub payoffs: Vec<Vec<Rat>>,
}

impl GameInstance {
    pub fn players(&self) -> usize {
        self.strategies.len()
    }

    /// Total pure-strategy count N = sum of the per-player counts.
    pub fn total_strategies(&self) -> usize {
        self.strategies.iter().sum()
    }

    fn profile_count(&self) -> usize {
        self.strategies.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.players();
        let mut s = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.strategies[k + 1];
        }
        s
    }

    pub fn validate(&self) -> Result<(), ReductionError> {
        let fail = |m: String| Err(ReductionError::NormalizationFailure(m));
        if self.players() < 2 {
            return fail(format!("need at least two players, got {}", self.players()));
        }
        if self.strategies.iter().any(|&n| n == 0) {
            return fail("every player needs at least one strategy".into());
        }
        if self.payoffs.len() != self.players() {
            return fail(format!(
                "{} payoff tensors for {} players",
                self.payoffs.len(),
                self.players()
            ));
        }
        let want = self.profile_count();
        for (i, t) in self.payoffs.iter().enumerate() {
            if t.len() != want {
                return fail(format!(
                    "player {i} tensor has {} entries, profiles number {want}",
                    t.len()
                ));
            }
        }
        Ok(())
    }

    /// Per-player affine rescaling of payoffs into [0, 1/N], which leaves the
    /// equilibrium set untouched. Constant payoffs map to zero.
    pub fn normalized(&self) -> Result<GameInstance, ReductionError> {
        self.validate()?;
        let n = Rat::int(self.total_strategies() as i64);
        let payoffs = self
            .payoffs
            .iter()
            .map(|t| {
                let min = t.iter().min().expect("nonempty tensor");
                let max = t.iter().max().expect("nonempty tensor");
                let span = max - min;
                if span.is_zero() {
                    return vec![Rat::zero(); t.len()];
                }
                let scale = (&n * &span).recip();
                t.iter().map(|u| (u - min) * &scale).collect()
            })
            .collect();
        Ok(GameInstance {
            strategies: self.strategies.clone(),
            payoffs,
        })
    }
}

/// Shared construction state: inputs in player-major order plus a constant
/// pool so repeated scalars become one node.
struct Builder<'a> {
    g: &'a GameInstance,
    b: CircuitBuilder,
    x: Vec<Vec<NodeId>>,
    consts: Vec<(Rat, NodeId)>,
}

impl<'a> Builder<'a> {
    fn new(g: &'a GameInstance) -> Self {
        let mut b = CircuitBuilder::new();
        let x = g
            .strategies
            .iter()
            .map(|&n| (0..n).map(|_| b.input()).collect())
            .collect();
        Builder {
            g,
            b,
            x,
            consts: Vec::new(),
        }
    }

    fn constant(&mut self, v: Rat) -> NodeId {
        if let Some((_, id)) = self.consts.iter().find(|(c, _)| *c == v) {
            return *id;
        }
        let id = self.b.constant(v.clone());
        self.consts.push((v, id));
        id
    }

    fn tree_add(&mut self, mut layer: Vec<NodeId>) -> Option<NodeId> {
        if layer.is_empty() {
            return None;
        }
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                next.push(match pair {
                    [a, b] => self.b.binary(GateKind::Add, *a, *b),
                    [a] => *a,
                    _ => unreachable!(),
                });
            }
            layer = next;
        }
        Some(layer[0])
    }

    fn fold(&mut self, kind: GateKind, nodes: &[NodeId]) -> NodeId {
        let mut acc = nodes[0];
        for &n in &nodes[1..] {
            acc = self.b.binary(kind.clone(), acc, n);
        }
        acc
    }

    /// Expected payoff of player i's pure strategy j against the profile of
    /// the others, as a sum of payoff-times-product terms. Zero payoffs are
    /// skipped; None means the whole sum vanishes.
    fn expected_payoff(&mut self, i: usize, j: usize, scale: &Rat) -> Option<NodeId> {
        let strides = self.g.strides();
        let d = self.g.players();
        let mut terms = Vec::new();
        for flat in 0..self.g.profile_count() {
            if flat / strides[i] % self.g.strategies[i] != j {
                continue;
            }
            let pay = &self.g.payoffs[i][flat] * scale;
            if pay.is_zero() {
                continue;
            }
            let mut factor: Option<NodeId> = None;
            for k in 0..d {
                if k == i {
                    continue;
                }
                let xk = self.x[k][flat / strides[k] % self.g.strategies[k]];
                factor = Some(match factor {
                    None => xk,
                    Some(f) => self.b.binary(GateKind::Mul, f, xk),
                });
            }
            let c = self.constant(pay);
            let f = factor.expect("at least two players");
            terms.push(self.b.binary(GateKind::Mul, c, f));
        }
        self.tree_add(terms)
    }

    fn sorted(&mut self, nodes: &[NodeId]) -> Vec<NodeId> {
        let net = sorting_network(nodes.len());
        self.b.paste(&net, nodes)
    }
}

/// The scaled response circuit: inputs and outputs are the mixed profile in
/// player-major order, every node stays in [0,1] on profile inputs, and the
/// gates are CONST, ADD, MUL, MAX, MIN, SUB_01, DOUBLE_01 with scalars in
/// (0,1]. Fixed points of the computed map are the equilibria.
pub fn scaled_circuit(game: &GameInstance) -> Result<Circuit, ReductionError> {
    let g = game.normalized()?;
    let mut c = Builder::new(&g);
    let half = c.constant(rat(1, 2));
    let mut outs = Vec::new();
    for i in 0..g.players() {
        let p_i: Vec<NodeId> = (0..g.strategies[i])
            .map(|j| {
                let hx = c.b.binary(GateKind::Mul, half, c.x[i][j]);
                match c.expected_payoff(i, j, &rat(1, 2)) {
                    Some(v) => c.b.binary(GateKind::Add, hx, v),
                    None => hx,
                }
            })
            .collect();
        let q = c.sorted(&p_i);
        let thresholds: Vec<NodeId> = (1..=q.len())
            .map(|l| {
                let scale = c.constant(rat(1, 2 * l as i64));
                let scaled: Vec<NodeId> = q[..l]
                    .iter()
                    .map(|&qj| c.b.binary(GateKind::Mul, scale, qj))
                    .collect();
                let s = c.tree_add(scaled).expect("nonempty prefix");
                let lifted = c.b.binary(GateKind::Add, s, half);
                let back = c.constant(rat(1, 4 * l as i64));
                c.b.binary(GateKind::Sub01, lifted, back)
            })
            .collect();
        let t2 = c.fold(GateKind::Max, &thresholds);
        let gap = c.b.binary(GateKind::Sub01, t2, half);
        let t1 = c.b.unary(GateKind::Double01, gap);
        for &p_ij in &p_i {
            let d = c.b.binary(GateKind::Sub01, p_ij, t1);
            outs.push(c.b.unary(GateKind::Double01, d));
        }
    }
    Ok(c.b.finish(outs))
}

/// The unscaled response map built directly from its definition, used as the
/// equivalence oracle for the scaled circuit. Intermediate values roam
/// outside [0,1]; gates are general.
pub fn reference_circuit(game: &GameInstance) -> Result<Circuit, ReductionError> {
    let g = game.normalized()?;
    let mut c = Builder::new(&g);
    let one = c.constant(Rat::one());
    let zero = c.constant(Rat::zero());
    let mut outs = Vec::new();
    for i in 0..g.players() {
        let y_i: Vec<NodeId> = (0..g.strategies[i])
            .map(|j| match c.expected_payoff(i, j, &Rat::one()) {
                Some(v) => c.b.binary(GateKind::Add, c.x[i][j], v),
                None => c.x[i][j],
            })
            .collect();
        let z = c.sorted(&y_i);
        let mut prefix = z[0];
        let thresholds: Vec<NodeId> = (1..=z.len())
            .map(|l| {
                if l > 1 {
                    prefix = c.b.binary(GateKind::Add, prefix, z[l - 1]);
                }
                let shifted = c.b.binary(GateKind::Sub, prefix, one);
                let scale = c.constant(rat(1, l as i64));
                c.b.binary(GateKind::Mul, scale, shifted)
            })
            .collect();
        let t = c.fold(GateKind::Max, &thresholds);
        for &y_ij in &y_i {
            let d = c.b.binary(GateKind::Sub, y_ij, t);
            outs.push(c.b.binary(GateKind::Max, d, zero));
        }
    }
    Ok(c.b.finish(outs))
}

/// Scaled response circuit closed onto its own inputs: the cyclic circuit
/// whose satisfying node assignments restrict to equilibria on the merged
/// nodes.
pub fn game_to_circuit(game: &GameInstance) -> Result<Circuit, ReductionError> {
    Ok(scaled_circuit(game)?.close_cycle()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matching_pennies() -> GameInstance {
        GameInstance {
            strategies: vec![2, 2],
            payoffs: vec![
                vec![rat(1, 1), rat(-1, 1), rat(-1, 1), rat(1, 1)],
                vec![rat(-1, 1), rat(1, 1), rat(1, 1), rat(-1, 1)],
            ],
        }
    }

    fn random_game(rng: &mut ChaCha8Rng, strategies: Vec<usize>) -> GameInstance {
        let profiles: usize = strategies.iter().product();
        let payoffs = (0..strategies.len())
            .map(|_| {
                (0..profiles)
                    .map(|_| rat(rng.gen_range(-16..=16), rng.gen_range(1..=4)))
                    .collect()
            })
            .collect();
        GameInstance {
            strategies,
            payoffs,
        }
    }

    /// Random mixed profile: each player's block is positive and sums to 1.
    fn random_profile(rng: &mut ChaCha8Rng, strategies: &[usize]) -> Vec<Rat> {
        let mut x = Vec::new();
        for &n in strategies {
            let ks: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
            let total: i64 = ks.iter().sum();
            x.extend(ks.into_iter().map(|k| rat(k, total)));
        }
        x
    }

    #[test]
    fn matching_pennies_normalizes_to_quarter_and_zero() {
        let g = matching_pennies().normalized().unwrap();
        assert_eq!(
            g.payoffs[0],
            vec![rat(1, 4), rat(0, 1), rat(0, 1), rat(1, 4)]
        );
        assert_eq!(
            g.payoffs[1],
            vec![rat(0, 1), rat(1, 4), rat(1, 4), rat(0, 1)]
        );
    }

    #[test]
    fn uniform_profile_is_an_exact_fixed_point_of_matching_pennies() {
        let uniform = vec![rat(1, 2); 4];
        for c in [
            scaled_circuit(&matching_pennies()).unwrap(),
            reference_circuit(&matching_pennies()).unwrap(),
        ] {
            assert_eq!(c.eval_outputs(&uniform).unwrap(), uniform);
        }
    }

    #[test]
    fn best_response_regret_vanishes_at_the_fixed_point() {
        let g = matching_pennies().normalized().unwrap();
        let x = vec![rat(1, 2); 4];
        let strides = g.strides();
        for i in 0..2 {
            let v: Vec<Rat> = (0..2)
                .map(|j| {
                    (0..4)
                        .filter(|f| f / strides[i] % 2 == j)
                        .map(|f| {
                            let other = if i == 0 { f % 2 } else { f / 2 };
                            &g.payoffs[i][f] * &x[2 * (1 - i) + other]
                        })
                        .fold(Rat::zero(), |a, b| a + b)
                })
                .collect();
            let best = v.iter().max().unwrap().clone();
            let got = (0..2)
                .map(|j| &v[j] * &x[2 * i + j])
                .fold(Rat::zero(), |a, b| a + b);
            assert_eq!(best, got);
        }
    }

    #[test]
    fn scaled_circuit_matches_the_reference_on_random_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for shape in [vec![2, 2], vec![2, 3], vec![3, 3], vec![3, 2]] {
            let g = random_game(&mut rng, shape.clone());
            let scaled = scaled_circuit(&g).unwrap();
            let reference = reference_circuit(&g).unwrap();
            for _ in 0..60 {
                let x = random_profile(&mut rng, &shape);
                assert_eq!(
                    scaled.eval_outputs(&x).unwrap(),
                    reference.eval_outputs(&x).unwrap(),
                    "profile {x:?}"
                );
            }
        }
    }

    #[test]
    fn three_player_games_agree_and_stay_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let shape = vec![2, 2, 2];
        let g = random_game(&mut rng, shape.clone());
        let scaled = scaled_circuit(&g).unwrap();
        let reference = reference_circuit(&g).unwrap();
        for _ in 0..40 {
            let x = random_profile(&mut rng, &shape);
            let out = scaled.eval_outputs(&x).unwrap();
            assert_eq!(out, reference.eval_outputs(&x).unwrap());
            for i in 0..3 {
                let s: Rat = out[2 * i..2 * i + 2]
                    .iter()
                    .fold(Rat::zero(), |a, b| a + b);
                assert_eq!(s, Rat::one());
            }
        }
    }

    #[test]
    fn per_player_outputs_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = vec![3, 2];
        let g = random_game(&mut rng, shape.clone());
        let c = scaled_circuit(&g).unwrap();
        for _ in 0..75 {
            let x = random_profile(&mut rng, &shape);
            let out = c.eval_outputs(&x).unwrap();
            let p1: Rat = out[..3].iter().fold(Rat::zero(), |a, b| a + b);
            let p2: Rat = out[3..].iter().fold(Rat::zero(), |a, b| a + b);
            assert_eq!(p1, Rat::one());
            assert_eq!(p2, Rat::one());
        }
    }

    #[test]
    fn scaled_nodes_stay_inside_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let shape = vec![2, 3];
        let g = random_game(&mut rng, shape.clone());
        let c = scaled_circuit(&g).unwrap();
        let allowed = |k: &GateKind| {
            matches!(
                k,
                GateKind::Const(_)
                    | GateKind::Add
                    | GateKind::Mul
                    | GateKind::Max
                    | GateKind::Min
                    | GateKind::Sub01
                    | GateKind::Double01
            )
        };
        for gate in &c.gates {
            assert!(allowed(&gate.kind), "unexpected gate {}", gate.kind.name());
            if let Some(z) = gate.kind.zeta() {
                assert!(z.is_positive() && z <= &Rat::one(), "scalar {z}");
            }
        }
        for _ in 0..200 {
            let x = random_profile(&mut rng, &shape);
            for v in c.evaluate(&x).unwrap() {
                assert!(!v.is_negative() && v <= Rat::one(), "node value {v}");
            }
        }
    }

    #[test]
    fn cyclic_closure_merges_the_profile_nodes() {
        let g = matching_pennies();
        let open = scaled_circuit(&g).unwrap();
        let closed = game_to_circuit(&g).unwrap();
        assert!(closed.cyclic);
        assert_eq!(closed.merged.len(), 4);
        assert_eq!(closed.nodes, open.nodes - 4);
        // At a fixed point the acyclic trace, restricted to non-input nodes,
        // satisfies the closed circuit.
        let uniform = vec![rat(1, 2); 4];
        let trace = open.evaluate(&uniform).unwrap();
        let values: Vec<Rat> = (0..open.nodes)
            .filter(|n| !open.inputs.contains(n))
            .map(|n| trace[n].clone())
            .collect();
        assert!(closed.check_assignment(&values));
    }

    #[test]
    fn constant_payoffs_normalize_to_zero_and_fix_every_profile() {
        let g = GameInstance {
            strategies: vec![2, 2],
            payoffs: vec![vec![rat(5, 1); 4], vec![rat(-3, 1); 4]],
        };
        let norm = g.normalized().unwrap();
        assert!(norm.payoffs.iter().flatten().all(|p| p.is_zero()));
        let c = scaled_circuit(&g).unwrap();
        let x = vec![rat(1, 4), rat(3, 4), rat(2, 3), rat(1, 3)];
        assert_eq!(c.eval_outputs(&x).unwrap(), x);
    }

    #[test]
    fn malformed_games_are_refused() {
        let lonely = GameInstance {
            strategies: vec![3],
            payoffs: vec![vec![Rat::zero(); 3]],
        };
        assert!(matches!(
            scaled_circuit(&lonely),
            Err(ReductionError::NormalizationFailure(_))
        ));
        let skewed = GameInstance {
            strategies: vec![2, 2],
            payoffs: vec![vec![Rat::zero(); 4], vec![Rat::zero(); 3]],
        };
        assert!(matches!(
            skewed.normalized(),
            Err(ReductionError::NormalizationFailure(_))
        ));
        let empty = GameInstance {
            strategies: vec![2, 0],
            payoffs: vec![vec![], vec![]],
        };
        assert!(matches!(
            empty.validate(),
            Err(ReductionError::NormalizationFailure(_))
        ));
    }
}
