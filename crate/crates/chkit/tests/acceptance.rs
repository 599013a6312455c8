//! End-to-end acceptance checks, one test per criterion. Every test prints a
//! single PASS line with its runtime; tolerances are zero unless a check is
//! explicitly approximate, and wall-clock budgets are asserted where a
//! criterion carries one.

use std::time::{Duration, Instant};

use chkit::bu::{
    bu_verify, ch_to_bu, decode_bu_solution, decode_widths, tucker_solve, BUInstance,
    TuckerOutcome,
};
use chkit::ch::{value_split, verify, CHInstance, IntegralValuation};
use chkit::circuit::{
    lipschitz_bound, lower_to_special, AddInputRange, Circuit, CircuitBuilder, GateKind, NodeId,
    SpecialCircuitCertificate,
};
use chkit::embed::{build_gadgets, decode_cuts_to_values, encode_values_to_cuts, EmbeddedInstance};
use chkit::etr::{
    brute_check, ch_sentence_witness, ch_to_etr, circuit_to_constraints, eval_sentence,
    BruteOutcome,
};
use chkit::lp::round_to_exact;
use chkit::rat::{linf_dist, rat, Rat};
use chkit::reductions::{
    encode_root, feasible_to_ch, grid_search, reference_circuit, scaled_circuit, GameInstance,
    Monomial, Polynomial,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(criterion: usize, what: &str, budget: Option<Duration>, body: impl FnOnce() -> Result<(), String>) {
    let clock = Instant::now();
    let outcome = body();
    let spent = clock.elapsed();
    match &outcome {
        Ok(()) => println!("criterion {criterion}: PASS ({spent:.2?}) {what}"),
        Err(e) => println!("criterion {criterion}: FAIL ({spent:.2?}) {what}: {e}"),
    }
    if let Err(e) = outcome {
        panic!("criterion {criterion} failed: {e}");
    }
    if let Some(b) = budget {
        assert!(
            spent <= b,
            "criterion {criterion} took {spent:?}, budget {b:?}"
        );
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Random rational in [0,1] with denominator at most 64.
fn unit(rng: &mut ChaCha8Rng) -> Rat {
    let d = rng.gen_range(1..=64i64);
    rat(rng.gen_range(0..=d), d)
}

/// Random rational in [0,1/2] with denominator at most 64.
fn half_unit(rng: &mut ChaCha8Rng) -> Rat {
    let v = unit(rng);
    if v > rat(1, 2) {
        Rat::one() - v
    } else {
        v
    }
}

/// Random rational in (0,1] with denominator at most 64.
fn pos_unit(rng: &mut ChaCha8Rng) -> Rat {
    let d = rng.gen_range(1..=64i64);
    rat(rng.gen_range(1..=d), d)
}

/// One special gate over fresh inputs, with a hand-built range certificate.
fn certified_gate(
    kind: GateKind,
    in_ranges: &[(Rat, Rat)],
) -> (Circuit, SpecialCircuitCertificate) {
    let mut b = CircuitBuilder::new();
    let ins: Vec<NodeId> = in_ranges.iter().map(|_| b.input()).collect();
    let out_range = match &kind {
        GateKind::Const(z) => (z.clone(), z.clone()),
        _ => (Rat::zero(), Rat::one()),
    };
    let out = match kind.arity() {
        0 => {
            let GateKind::Const(z) = &kind else {
                unreachable!()
            };
            b.constant(z.clone())
        }
        1 => b.unary(kind.clone(), ins[0]),
        _ => b.binary(kind.clone(), ins[0], ins[1]),
    };
    let circuit = b.finish(vec![out]);
    let mut node_ranges = in_ranges.to_vec();
    node_ranges.push(out_range);
    let add_inputs = if kind == GateKind::Add {
        vec![AddInputRange {
            gate: 0,
            lhs: in_ranges[0].clone(),
            rhs: in_ranges[1].clone(),
        }]
    } else {
        Vec::new()
    };
    let cert = SpecialCircuitCertificate {
        node_ranges,
        add_inputs,
        source_nodes: circuit.nodes,
        source_gates: 1,
        special_nodes: circuit.nodes,
        special_gates: 1,
    };
    cert.verify(&circuit).expect("hand-built certificate");
    (circuit, cert)
}

/// Gadget-agent window concentration: strictly more than half of each
/// agent's mass sits inside its own 3-unit window.
fn forcing_holds(inst: &EmbeddedInstance) -> Result<(), String> {
    for (node, agents) in inst.node_agents.iter().enumerate() {
        for (slot, &a) in agents.iter().enumerate() {
            let left = Rat::int(3 * (4 * node + slot) as i64);
            let right = &left + &Rat::int(3);
            let inside = inst.densities[a]
                .definite_integral(&left, &right)
                .map_err(err)?;
            let total = inst.densities[a].total_mass();
            ensure(
                &inside + &inside > total.clone(),
                format!("agent {a} keeps only {inside} of {total} in its window"),
            )?;
        }
    }
    Ok(())
}

/// Random incrementally-certified special circuit with at most `max_nodes`
/// nodes, plus its certificate.
fn random_special(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
) -> (Circuit, SpecialCircuitCertificate) {
    let n_in = rng.gen_range(1..=2usize);
    let mut b = CircuitBuilder::new();
    let mut ranges: Vec<(Rat, Rat)> = Vec::new();
    let mut add_inputs = Vec::new();
    let mut gates = 0usize;
    for _ in 0..n_in {
        ranges.push((Rat::zero(), Rat::one()));
        b.input();
    }
    let target = rng.gen_range(n_in + 1..=max_nodes);
    while ranges.len() < target {
        let pick = rng.gen_range(0..ranges.len());
        let other = rng.gen_range(0..ranges.len());
        let half = rat(1, 2);
        let (node, range) = match rng.gen_range(0..6) {
            0 => {
                let z = pos_unit(rng);
                (b.constant(z.clone()), (z.clone(), z))
            }
            1 => {
                let z = pos_unit(rng);
                let r = (&ranges[pick].0 * &z, &ranges[pick].1 * &z);
                (b.unary(GateKind::MulConst(z), pick), r)
            }
            2 => {
                let r = (
                    &ranges[pick].0 * &ranges[pick].0,
                    &ranges[pick].1 * &ranges[pick].1,
                );
                (b.unary(GateKind::Square, pick), r)
            }
            3 => {
                let lo = (&ranges[pick].0 - &ranges[other].1).max(Rat::zero());
                let hi = (&ranges[pick].1 - &ranges[other].0).max(Rat::zero());
                (b.binary(GateKind::Sub01, pick, other), (lo, hi))
            }
            4 if ranges[pick].1 <= half && ranges[other].1 <= half => {
                add_inputs.push(AddInputRange {
                    gate: gates,
                    lhs: ranges[pick].clone(),
                    rhs: ranges[other].clone(),
                });
                let r = (
                    &ranges[pick].0 + &ranges[other].0,
                    &ranges[pick].1 + &ranges[other].1,
                );
                (b.binary(GateKind::Add, pick, other), r)
            }
            5 if ranges[pick].1 <= half => {
                let r = (
                    &ranges[pick].0 + &ranges[pick].0,
                    &ranges[pick].1 + &ranges[pick].1,
                );
                (b.unary(GateKind::Double01, pick), r)
            }
            _ => {
                let z = pos_unit(rng);
                let r = (&ranges[pick].0 * &z, &ranges[pick].1 * &z);
                (b.unary(GateKind::MulConst(z), pick), r)
            }
        };
        gates += 1;
        debug_assert_eq!(node, ranges.len());
        ranges.push(range);
    }
    let out = ranges.len() - 1;
    let circuit = b.finish(vec![out]);
    let cert = SpecialCircuitCertificate {
        node_ranges: ranges,
        add_inputs,
        source_nodes: circuit.nodes,
        source_gates: gates,
        special_nodes: circuit.nodes,
        special_gates: gates,
    };
    cert.verify(&circuit).expect("incremental certificate");
    (circuit, cert)
}

fn sub01_figure_instance() -> Result<EmbeddedInstance, String> {
    let mut b = CircuitBuilder::new();
    let x = b.input();
    let y = b.input();
    let s = b.binary(GateKind::Sub01, x, y);
    let (low, cert) = lower_to_special(&b.finish(vec![s])).map_err(err)?;
    ensure(low.nodes == 3, "lowering must keep the single gate")?;
    build_gadgets(&low, &cert).map_err(err)
}

#[test]
fn criterion_01_sub01_figure_cut() {
    run(
        1,
        "SUB_01 on (1/4, 3/4) puts the ad cut exactly 1/10 left of its interval and decodes 0",
        Some(Duration::from_secs(1)),
        || {
            let inst = sub01_figure_instance()?;
            let values = [rat(1, 4), rat(3, 4), Rat::zero()];
            let sol = encode_values_to_cuts(&inst, &values).map_err(err)?;
            let want = Rat::int(25) - rat(1, 10);
            ensure(
                sol.cuts[8] == want,
                format!("ad cut sits at {}, want {want}", sol.cuts[8]),
            )?;
            let z = decode_cuts_to_values(&inst, &sol).map_err(err)?;
            ensure(z[2].is_zero(), format!("decoded output {}", z[2]))?;
            ensure(z == values.to_vec(), "decoded values drifted")
        },
    );
}

#[test]
fn criterion_02_gadget_balance_suite() {
    run(
        2,
        "each special gate kind balances all four agents per node on 200 random tuples",
        Some(Duration::from_secs(30)),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(2025);
            let full = (Rat::zero(), Rat::one());
            let half = (Rat::zero(), rat(1, 2));
            for round in 0..200 {
                let cases: Vec<(Circuit, SpecialCircuitCertificate, Vec<Rat>)> = {
                    let zeta = pos_unit(&mut rng);
                    let (a, b2) = (half_unit(&mut rng), half_unit(&mut rng));
                    let x = unit(&mut rng);
                    let h = half_unit(&mut rng);
                    let (s, t) = (unit(&mut rng), unit(&mut rng));
                    let m = pos_unit(&mut rng);
                    let sum = &a + &b2;
                    let sub = (&s - &t).max(Rat::zero());
                    vec![
                        {
                            let (c, cert) = certified_gate(GateKind::Const(zeta.clone()), &[]);
                            (c, cert, vec![zeta])
                        },
                        {
                            let (c, cert) =
                                certified_gate(GateKind::Add, &[half.clone(), half.clone()]);
                            (c, cert, vec![a, b2, sum])
                        },
                        {
                            let (c, cert) = certified_gate(
                                GateKind::MulConst(m.clone()),
                                &[full.clone()],
                            );
                            (c, cert, vec![x.clone(), &x * &m])
                        },
                        {
                            let sq = &x * &x;
                            let (c, cert) = certified_gate(GateKind::Square, &[full.clone()]);
                            (c, cert, vec![x.clone(), sq])
                        },
                        {
                            let (c, cert) = certified_gate(GateKind::Double01, &[half.clone()]);
                            (c, cert, vec![h.clone(), &h + &h])
                        },
                        {
                            let (c, cert) =
                                certified_gate(GateKind::Sub01, &[full.clone(), full.clone()]);
                            (c, cert, vec![s, t, sub])
                        },
                    ]
                };
                for (circuit, cert, values) in cases {
                    let kind = circuit.gates.last().expect("one gate").kind.name();
                    let inst = build_gadgets(&circuit, &cert).map_err(err)?;
                    let sol = encode_values_to_cuts(&inst, &values)
                        .map_err(|e| format!("{kind} round {round}: {e}"))?;
                    let report = verify(&inst.instance, &sol, &Rat::zero()).map_err(err)?;
                    ensure(
                        report.ok,
                        format!("{kind} round {round} at {values:?} left an agent imbalanced"),
                    )?;
                }
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_03_codec_round_trip() {
    run(
        3,
        "decode after encode and encode after decode are identities on random special circuits",
        None,
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(33);
            let mut tuples = 0;
            while tuples < 120 {
                let (circuit, cert) = random_special(&mut rng, 6);
                let inst = build_gadgets(&circuit, &cert).map_err(err)?;
                for _ in 0..4 {
                    let xs: Vec<Rat> =
                        (0..circuit.inputs.len()).map(|_| unit(&mut rng)).collect();
                    let z = circuit.evaluate(&xs).map_err(err)?;
                    let sol = encode_values_to_cuts(&inst, &z).map_err(err)?;
                    let back = decode_cuts_to_values(&inst, &sol).map_err(err)?;
                    ensure(back == z, format!("values drifted: {z:?} -> {back:?}"))?;
                    let again = encode_values_to_cuts(&inst, &back).map_err(err)?;
                    ensure(
                        again.cuts == sol.cuts && again.leftmost_sign == sol.leftmost_sign,
                        "cut lists drifted through the round trip",
                    )?;
                    tuples += 1;
                }
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_04_window_forcing_property() {
    run(
        4,
        "every gadget agent keeps strictly more than half its mass in its own window",
        None,
        || {
            forcing_holds(&sub01_figure_instance()?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(44);
            let full = (Rat::zero(), Rat::one());
            let half = (Rat::zero(), rat(1, 2));
            for kind in [
                GateKind::Const(rat(3, 7)),
                GateKind::MulConst(rat(5, 9)),
                GateKind::Square,
                GateKind::Double01,
            ] {
                let ranges: &[(Rat, Rat)] = match kind {
                    GateKind::Const(_) => &[],
                    GateKind::Double01 => std::slice::from_ref(&half),
                    _ => std::slice::from_ref(&full),
                };
                let (c, cert) = certified_gate(kind, ranges);
                forcing_holds(&build_gadgets(&c, &cert).map_err(err)?)?;
            }
            let (c, cert) = certified_gate(GateKind::Add, &[half.clone(), half.clone()]);
            forcing_holds(&build_gadgets(&c, &cert).map_err(err)?)?;
            let (c, cert) = certified_gate(GateKind::Sub01, &[full.clone(), full.clone()]);
            forcing_holds(&build_gadgets(&c, &cert).map_err(err)?)?;
            for _ in 0..10 {
                let (circuit, cert) = random_special(&mut rng, 6);
                forcing_holds(&build_gadgets(&circuit, &cert).map_err(err)?)?;
            }
            let yes = feasible_to_ch(&poly_2x_minus_1()).map_err(err)?;
            forcing_holds(&yes)?;
            let no = feasible_to_ch(&poly_x_plus_1()).map_err(err)?;
            forcing_holds(&no)
        },
    );
}

/// Integral valuation F(t) = sum of c_k * min(max(t - s_k, 0), w_k), linear
/// and vanishing at zero.
fn plateau_valuation(parts: &[(Rat, Rat, Rat)]) -> IntegralValuation {
    let mut b = CircuitBuilder::new();
    let t = b.input();
    let zero = b.constant(Rat::zero());
    let mut acc: Option<NodeId> = None;
    for (c, s, w) in parts {
        let start = b.constant(s.clone());
        let shifted = b.binary(GateKind::Sub, t, start);
        let ramp = b.binary(GateKind::Max, shifted, zero);
        let width = b.constant(w.clone());
        let capped = b.binary(GateKind::Min, ramp, width);
        let scaled = b.unary(GateKind::MulConst(c.clone()), capped);
        acc = Some(match acc {
            None => scaled,
            Some(prev) => b.binary(GateKind::Add, prev, scaled),
        });
    }
    IntegralValuation::Circuit(b.finish(vec![acc.expect("at least one part")]))
}

fn unit_domain_instances() -> Vec<CHInstance> {
    let uniform = plateau_valuation(&[(Rat::one(), Rat::zero(), Rat::one())]);
    let front = plateau_valuation(&[(rat(2, 1), Rat::zero(), rat(1, 2))]);
    let middle = plateau_valuation(&[
        (rat(3, 1), rat(1, 4), rat(1, 2)),
        (rat(1, 2), Rat::zero(), Rat::one()),
    ]);
    let back = plateau_valuation(&[(rat(4, 1), rat(3, 4), rat(1, 4))]);
    vec![
        CHInstance::new(vec![uniform.clone()], Rat::one()).expect("one agent"),
        CHInstance::new(vec![uniform.clone(), front.clone()], Rat::one()).expect("two agents"),
        CHInstance::new(vec![uniform, middle, back], Rat::one()).expect("three agents"),
    ]
}

fn random_sphere_point(rng: &mut ChaCha8Rng, coords: usize) -> Vec<Rat> {
    loop {
        let ks: Vec<i64> = (0..coords).map(|_| rng.gen_range(-8..=8)).collect();
        let mass: i64 = ks.iter().map(|k| k.abs()).sum();
        if mass > 0 {
            return ks.into_iter().map(|k| rat(k, mass)).collect();
        }
    }
}

#[test]
fn criterion_05_bu_reduction_soundness() {
    run(
        5,
        "b(x) matches the decoded value split and b(x) + b(-x) gives each agent's total",
        None,
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(55);
            let mut points = 0;
            for inst in unit_domain_instances() {
                let bu = ch_to_bu(&inst).map_err(err)?;
                ensure(bu.linear, "valuations are linear, the map must be too")?;
                while points < 40 * inst.n() {
                    let x = random_sphere_point(&mut rng, inst.n() + 1);
                    let bx = bu.eval(&x).map_err(err)?;
                    let neg: Vec<Rat> = x.iter().map(|v| -v).collect();
                    let bnx = bu.eval(&neg).map_err(err)?;
                    let sol = decode_widths(&x, &Rat::one()).map_err(err)?;
                    for i in 0..inst.n() {
                        let (pos, _) = value_split(&inst, &sol, i).map_err(err)?;
                        ensure(
                            bx[i] == pos,
                            format!("agent {i}: b(x) {} vs split {pos} at {x:?}", bx[i]),
                        )?;
                        let total = inst.total(i).map_err(err)?;
                        ensure(
                            &bx[i] + &bnx[i] == total,
                            format!("agent {i}: antipodal masses miss the total at {x:?}"),
                        )?;
                    }
                    points += 1;
                }
            }
            ensure(points >= 120, "not enough sphere samples")
        },
    );
}

#[test]
fn criterion_06_tucker_rounding_pipeline() {
    run(
        6,
        "tucker search at eps 1/64 rounds to an exact solution of the 2-agent instance",
        Some(Duration::from_secs(60)),
        || {
            let instances = unit_domain_instances();
            let inst = &instances[1];
            let bu = ch_to_bu(inst).map_err(err)?;
            let lambda = lipschitz_bound(&bu.circuit).map_err(err)?;
            let eps = rat(1, 64);
            let outcome = tucker_solve(&bu, &eps, &lambda).map_err(err)?;
            let TuckerOutcome::Solution(approx) = outcome else {
                return Err("sound bound produced a lipschitz witness".into());
            };
            ensure(
                approx.residual <= eps,
                format!("residual {} above eps", approx.residual),
            )?;
            let exact = round_to_exact(&bu, &approx.x).map_err(err)?;
            let verdict = bu_verify(&bu, &exact, &Rat::zero());
            ensure(verdict.ok, "rounded point misses exact antipodal balance")?;
            let sol = decode_bu_solution(&exact, inst, &Rat::zero()).map_err(err)?;
            let report = verify(inst, &sol, &Rat::zero()).map_err(err)?;
            ensure(report.ok, "decoded cuts leave an agent imbalanced")
        },
    );
}

fn random_linear_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let m = rng.gen_range(2..=3usize);
    let mut b = CircuitBuilder::new();
    let mut pool: Vec<NodeId> = (0..m).map(|_| b.input()).collect();
    for _ in 0..rng.gen_range(4..=8) {
        let x = pool[rng.gen_range(0..pool.len())];
        let y = pool[rng.gen_range(0..pool.len())];
        let node = match rng.gen_range(0..5) {
            0 => b.binary(GateKind::Add, x, y),
            1 => b.binary(GateKind::Sub, x, y),
            2 => b.binary(GateKind::Max, x, y),
            3 => b.binary(GateKind::Min, x, y),
            _ => b.unary(
                GateKind::MulConst(rat(rng.gen_range(-4..=4), rng.gen_range(1..=3))),
                x,
            ),
        };
        pool.push(node);
    }
    let out = *pool.last().expect("nonempty");
    b.finish(vec![out])
}

#[test]
fn criterion_07_lipschitz_domination() {
    run(
        7,
        "computed bound dominates sampled slopes; an undersized claim is convicted",
        None,
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..20 {
                let c = random_linear_circuit(&mut rng);
                let lambda = lipschitz_bound(&c).map_err(err)?;
                let m = c.inputs.len();
                let sample = |rng: &mut ChaCha8Rng| -> Vec<Rat> {
                    (0..m)
                        .map(|_| rat(rng.gen_range(-16..=16), rng.gen_range(1..=8)))
                        .collect()
                };
                for _ in 0..500 {
                    let x = sample(&mut rng);
                    let y = sample(&mut rng);
                    let dist = linf_dist(&x, &y);
                    if dist.is_zero() {
                        continue;
                    }
                    let fx = c.eval_outputs(&x).map_err(err)?;
                    let fy = c.eval_outputs(&y).map_err(err)?;
                    let ratio = linf_dist(&fx, &fy) / &dist;
                    ensure(
                        ratio <= lambda,
                        format!("slope {ratio} beats the bound {lambda}"),
                    )?;
                }
            }
            // f = 3 x1 - x2 is 4-Lipschitz; claiming 3 must produce a witness.
            let mut b = CircuitBuilder::new();
            let x1 = b.input();
            let x2 = b.input();
            let s1 = b.unary(GateKind::MulConst(rat(3, 1)), x1);
            let s2 = b.unary(GateKind::MulConst(rat(-1, 1)), x2);
            let out = b.binary(GateKind::Add, s1, s2);
            let bu = BUInstance::new(1, b.finish(vec![out])).map_err(err)?;
            let claimed = rat(3, 1);
            match tucker_solve(&bu, &rat(1, 10), &claimed).map_err(err)? {
                TuckerOutcome::Witness(w) => ensure(
                    w.ratio > claimed,
                    format!("witness ratio {} does not exceed the claim", w.ratio),
                ),
                TuckerOutcome::Solution(_) => {
                    Err("undersized bound went unchallenged".into())
                }
            }
        },
    );
}

fn poly_2x_minus_1() -> Polynomial {
    Polynomial::new(
        1,
        vec![
            Monomial {
                coef: 2,
                exps: vec![1],
            },
            Monomial {
                coef: -1,
                exps: vec![0],
            },
        ],
    )
}

fn poly_x_plus_1() -> Polynomial {
    Polynomial::new(
        1,
        vec![
            Monomial {
                coef: 1,
                exps: vec![1],
            },
            Monomial {
                coef: 1,
                exps: vec![0],
            },
        ],
    )
}

#[test]
fn criterion_08_feasible_reduction_biconditional() {
    run(
        8,
        "2x-1 gives a verified (n, n-1) witness; x+1 refutes on the whole 1/32 grid",
        Some(Duration::from_secs(300)),
        || {
            let yes = feasible_to_ch(&poly_2x_minus_1()).map_err(err)?;
            let n = yes.agent_count();
            ensure(n == 13, format!("yes-instance has {n} agents, want 13"))?;
            let witness = encode_root(&yes, &[rat(1, 2)]).map_err(err)?;
            ensure(
                witness.cuts.len() == n - 1,
                format!("witness uses {} cuts, budget {}", witness.cuts.len(), n - 1),
            )?;
            let report = verify(&yes.instance, &witness, &Rat::zero()).map_err(err)?;
            ensure(report.ok, "encoded witness fails exact verification")?;

            let no = feasible_to_ch(&poly_x_plus_1()).map_err(err)?;
            let found = grid_search(&no, &rat(1, 32)).map_err(err)?;
            ensure(
                found.is_none(),
                "no-instance produced a grid solution, reduction is unsound",
            )
        },
    );
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
fn criterion_09_game_reduction() {
    run(
        9,
        "scaled and reference response maps agree on 1000 profiles; outputs stay stochastic",
        Some(Duration::from_secs(60)),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let shapes: [&[usize]; 4] = [&[2, 2], &[2, 3], &[3, 3], &[2, 2, 2]];
            for shape in shapes {
                let g = random_game(&mut rng, shape.to_vec());
                let scaled = scaled_circuit(&g).map_err(err)?;
                let reference = reference_circuit(&g).map_err(err)?;
                for _ in 0..250 {
                    let x = random_profile(&mut rng, shape);
                    let a = scaled.eval_outputs(&x).map_err(err)?;
                    let b = reference.eval_outputs(&x).map_err(err)?;
                    ensure(a == b, format!("maps disagree at {x:?}"))?;
                    let mut at = 0;
                    for &n in shape {
                        let s = a[at..at + n].iter().fold(Rat::zero(), |p, q| p + q);
                        ensure(s == Rat::one(), format!("player block sums to {s}"))?;
                        at += n;
                    }
                }
            }
            let pennies = GameInstance {
                strategies: vec![2, 2],
                payoffs: vec![
                    vec![rat(1, 1), rat(-1, 1), rat(-1, 1), rat(1, 1)],
                    vec![rat(-1, 1), rat(1, 1), rat(1, 1), rat(-1, 1)],
                ],
            };
            let uniform = vec![rat(1, 2); 4];
            let fixed = scaled_circuit(&pennies)
                .map_err(err)?
                .eval_outputs(&uniform)
                .map_err(err)?;
            ensure(
                fixed == uniform,
                "uniform matching-pennies profile is not a fixed point",
            )
        },
    );
}

fn random_mixed_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let mut b = CircuitBuilder::new();
    let mut pool: Vec<NodeId> = (0..2).map(|_| b.input()).collect();
    for _ in 0..8 {
        let x = pool[rng.gen_range(0..pool.len())];
        let y = pool[rng.gen_range(0..pool.len())];
        let node = match rng.gen_range(0..9) {
            0 => b.binary(GateKind::Add, x, y),
            1 => b.binary(GateKind::Sub, x, y),
            2 => b.binary(GateKind::Mul, x, y),
            3 => b.binary(GateKind::Max, x, y),
            4 => b.binary(GateKind::Min, x, y),
            5 => b.binary(GateKind::Sub01, x, y),
            6 => b.unary(GateKind::Square, x),
            7 => b.unary(
                GateKind::MulConst(rat(rng.gen_range(-3..=3), rng.gen_range(1..=4))),
                x,
            ),
            _ => b.unary(GateKind::Double01, x),
        };
        pool.push(node);
    }
    let out = *pool.last().expect("nonempty");
    b.finish(vec![out])
}

#[test]
fn criterion_10_etr_emission() {
    run(
        10,
        "constraint sentences accept evaluation traces; the solved sentence is SAT on the grid",
        None,
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(1010);
            for _ in 0..20 {
                let c = random_mixed_circuit(&mut rng);
                let s = circuit_to_constraints(&c).map_err(err)?;
                for _ in 0..50 {
                    let xs: Vec<Rat> = (0..2)
                        .map(|_| rat(rng.gen_range(-16..=16), 16))
                        .collect();
                    let trace = c.evaluate(&xs).map_err(err)?;
                    ensure(
                        eval_sentence(&s, &trace).map_err(err)?,
                        format!("trace at {xs:?} violates its own constraints"),
                    )?;
                }
            }
            let instances = unit_domain_instances();
            let solved = &instances[0];
            let sentence = ch_to_etr(solved, 1).map_err(err)?;
            let known = [rat(1, 2), rat(-1, 2)];
            let assignment = ch_sentence_witness(solved, 1, &known).map_err(err)?;
            ensure(
                eval_sentence(&sentence, &assignment).map_err(err)?,
                "known witness rejected by the sentence",
            )?;
            let step = rat(1, 2);
            for (v, val) in sentence.vars.iter().zip(&assignment) {
                ensure(
                    (val.clone() / &step).is_integer(),
                    format!("witness value {val} for {} is off the grid", v.name),
                )?;
                let (lo, hi) = v.bounds.clone().ok_or("unbounded sentence variable")?;
                ensure(&lo <= val && val <= &hi, "witness value out of its box")?;
            }
            match brute_check(&sentence, &step).map_err(err)? {
                BruteOutcome::Sat { witness } => ensure(
                    witness.len() == sentence.vars.len(),
                    "brute witness has the wrong arity",
                ),
                BruteOutcome::Unknown => Err("grid check missed the known witness".into()),
            }
        },
    );
}
