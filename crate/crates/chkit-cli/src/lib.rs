//! Command implementations behind the `chkit` binary. Every command reads and
//! writes JSON artifacts, records a provenance id per file touched, and
//! returns a structured report; `main` only prints and maps the failure class
//! to an exit code (1 parse/validation, 2 solver refusal, 3 verification).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use chkit::bu::{bu_verify, ch_to_bu, tucker_solve, BUInstance, TuckerOutcome};
use chkit::ch::{verify as verify_ch, CHInstance, CHSolution, IntegralValuation};
use chkit::circuit::{
    lipschitz_bound, lower_to_special, Circuit, CircuitError, LowerError,
    SpecialCircuitCertificate,
};
use chkit::embed::{
    build_gadgets, decode_cuts_to_values, encode_values_to_cuts, integral_circuits, EmbedError,
    EmbeddedInstance,
};
use chkit::etr::{
    brute_check, bu_to_etr, ch_to_etr, circuit_to_constraints, emit as emit_sentence,
    eval_sentence, parse as parse_sentence, BruteOutcome, ETRError, ETRSentence,
};
use chkit::lp::{round_to_exact, rounding_lp_text, LPError};
use chkit::rat::{linf_norm, rat, Rat};
use chkit::reductions::{encode_root, feasible_to_ch, game_to_circuit, GameInstance, Polynomial};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn parse_rat(s: &str) -> Result<Rat, String> {
    s.parse::<Rat>().map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "chkit", version, about = "Exact consensus-halving reduction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check a circuit file against the structural rules.
    Validate {
        #[arg(long)]
        circuit: PathBuf,
        /// Also require special-gate form (gate set and zeta ranges).
        #[arg(long)]
        special: bool,
    },
    /// Rewrite a general circuit into special form with a range certificate.
    Lower {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Turn a circuit into a consensus-halving instance, four agents per node.
    Embed {
        /// Plain circuit JSON, or a lowered bundle with its certificate.
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Encode node values of the embedded circuit as a cut solution.
    Encode {
        #[arg(long)]
        instance: PathBuf,
        /// Full node-value list, comma separated rationals.
        #[arg(long, value_delimiter = ',', value_parser = parse_rat)]
        values: Option<Vec<Rat>>,
        /// Source-circuit inputs; remaining node values are evaluated.
        #[arg(long, value_delimiter = ',', value_parser = parse_rat)]
        inputs: Option<Vec<Rat>>,
        /// Draw random inputs (denominators up to 64) deterministically.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Read node values back out of a cut solution.
    Decode {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Reduce a consensus-halving instance to a Borsuk-Ulam instance.
    Ch2bu {
        /// CH instance with circuit valuations, or an embedded instance
        /// (densities are converted to integral circuits first).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Search the sphere for an approximate zero via Tucker labelling.
    SolveBu {
        #[arg(long)]
        bu: PathBuf,
        #[arg(long, value_parser = parse_rat)]
        epsilon: Rat,
        /// Lipschitz bound; computed syntactically when omitted.
        #[arg(long, value_parser = parse_rat)]
        lambda: Option<Rat>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Round an approximate sphere point to an exact zero (linear maps only).
    Round {
        #[arg(long)]
        bu: PathBuf,
        /// Point JSON: {"x":[...]} or a bare array.
        #[arg(long)]
        point: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Also export the rounding LP in text form.
        #[arg(long)]
        lp_out: Option<PathBuf>,
    },
    /// Check a solution against its instance exactly or to a tolerance.
    Verify {
        #[arg(long, requires = "solution")]
        instance: Option<PathBuf>,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, requires = "point")]
        bu: Option<PathBuf>,
        #[arg(long)]
        point: Option<PathBuf>,
        #[arg(long, value_parser = parse_rat)]
        tol: Option<Rat>,
    },
    /// Emit an existential real-arithmetic sentence in text form.
    EmitEtr {
        /// CH instance; requires --cuts.
        #[arg(long, requires = "cuts")]
        instance: Option<PathBuf>,
        /// Cut budget for the instance sentence.
        #[arg(long)]
        cuts: Option<usize>,
        #[arg(long)]
        bu: Option<PathBuf>,
        /// Acyclic circuit; emits its gate constraints.
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// Output file; the sentence goes to stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Reduce a polynomial feasibility problem to consensus halving.
    ReduceFeasible {
        #[arg(long)]
        polynomial: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Known root; its encoded witness solution is written too.
        #[arg(long, value_delimiter = ',', value_parser = parse_rat, requires = "solution_out")]
        root: Option<Vec<Rat>>,
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Reduce a normal-form game to a cyclic best-response circuit.
    ReduceGame {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Check a sentence: exactly at a witness, or over a coarse grid.
    CheckEtr {
        #[arg(long)]
        sentence: PathBuf,
        /// Assignment JSON: {"values":[...]}, {"x":[...]} or a bare array.
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Grid step for the relaxed satisfiability search.
        #[arg(long, value_parser = parse_rat)]
        grid: Option<Rat>,
        /// Where to write a found witness in grid mode.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
pub struct Prov {
    pub role: String,
    pub id: String,
}

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub ok: bool,
    pub summary: String,
    pub provenance: Vec<Prov>,
    pub details: Value,
    /// Raw text destined for stdout instead of the JSON report.
    #[serde(skip)]
    pub raw: Option<String>,
}

pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Verification failures still carry their machine-readable report.
    pub report: Option<Report>,
}

fn fail(code: i32, message: impl Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
        report: None,
    }
}

fn input_err(e: impl Display) -> Failure {
    fail(1, e)
}

fn refusal(e: impl Display) -> Failure {
    fail(2, e)
}

fn short_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Tracks every artifact a command touches, in order, for the report's
/// provenance chain.
struct Session {
    command: String,
    prov: Vec<Prov>,
}

impl Session {
    fn new(command: &str) -> Self {
        Session {
            command: command.to_string(),
            prov: Vec::new(),
        }
    }

    fn record(&mut self, role: &str, bytes: &[u8]) {
        self.prov.push(Prov {
            role: role.to_string(),
            id: short_id(bytes),
        });
    }

    fn read_bytes(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path)
            .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
        self.record(role, &bytes);
        Ok(bytes)
    }

    fn read_json<T: serde::de::DeserializeOwned>(
        &mut self,
        role: &str,
        path: &Path,
    ) -> Result<T, Failure> {
        let bytes = self.read_bytes(role, path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| input_err(format!("{}: {e}", path.display())))
    }

    fn read_value(&mut self, role: &str, path: &Path) -> Result<Value, Failure> {
        self.read_json(role, path)
    }

    fn write_json<T: Serialize>(
        &mut self,
        role: &str,
        path: &Path,
        value: &T,
    ) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| input_err(format!("serialization: {e}")))?;
        bytes.push(b'\n');
        self.record(role, &bytes);
        fs::write(path, &bytes)
            .map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))
    }

    fn write_text(&mut self, role: &str, path: &Path, text: &str) -> Result<(), Failure> {
        self.record(role, text.as_bytes());
        fs::write(path, text)
            .map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))
    }

    fn finish(self, ok: bool, summary: impl Into<String>, details: Value) -> Report {
        Report {
            command: self.command,
            ok,
            summary: summary.into(),
            provenance: self.prov,
            details,
            raw: None,
        }
    }
}

/// Point or assignment file: a bare array, or an object keyed "x" or
/// "values".
fn coords_from(value: Value, what: &str) -> Result<Vec<Rat>, Failure> {
    let inner = match value {
        Value::Array(_) => value,
        Value::Object(mut m) => m
            .remove("x")
            .or_else(|| m.remove("values"))
            .ok_or_else(|| input_err(format!("{what} needs an \"x\" or \"values\" field")))?,
        _ => return Err(input_err(format!("{what} must be an array or object"))),
    };
    serde_json::from_value(inner).map_err(|e| input_err(format!("{what}: {e}")))
}

#[derive(Serialize, Deserialize)]
pub struct LoweredBundle {
    pub circuit: Circuit,
    pub certificate: SpecialCircuitCertificate,
}

#[derive(Serialize, Deserialize)]
pub struct ValueList {
    pub values: Vec<Rat>,
}

fn lower_failure(e: LowerError) -> Failure {
    match e {
        LowerError::UnsupportedGate { .. } | LowerError::RangeUnprovable { .. } => refusal(e),
        _ => input_err(e),
    }
}

pub fn execute(cli: Cli) -> Result<Report, Failure> {
    match cli.command {
        Command::Validate { circuit, special } => cmd_validate(&circuit, special),
        Command::Lower { circuit, out } => cmd_lower(&circuit, &out),
        Command::Embed { circuit, out } => cmd_embed(&circuit, &out),
        Command::Encode {
            instance,
            values,
            inputs,
            seed,
            out,
        } => cmd_encode(&instance, values, inputs, seed, &out),
        Command::Decode {
            instance,
            solution,
            out,
        } => cmd_decode(&instance, &solution, out.as_deref()),
        Command::Ch2bu { instance, out } => cmd_ch2bu(&instance, &out),
        Command::SolveBu {
            bu,
            epsilon,
            lambda,
            out,
        } => cmd_solve_bu(&bu, &epsilon, lambda, &out),
        Command::Round {
            bu,
            point,
            out,
            lp_out,
        } => cmd_round(&bu, &point, &out, lp_out.as_deref()),
        Command::Verify {
            instance,
            solution,
            bu,
            point,
            tol,
        } => cmd_verify(instance, solution, bu, point, tol),
        Command::EmitEtr {
            instance,
            cuts,
            bu,
            circuit,
            out,
        } => cmd_emit_etr(instance, cuts, bu, circuit, out.as_deref()),
        Command::ReduceFeasible {
            polynomial,
            out,
            root,
            solution_out,
        } => cmd_reduce_feasible(&polynomial, &out, root, solution_out.as_deref()),
        Command::ReduceGame { game, out } => cmd_reduce_game(&game, &out),
        Command::CheckEtr {
            sentence,
            witness,
            grid,
            out,
        } => cmd_check_etr(&sentence, witness.as_deref(), grid, out.as_deref()),
    }
}

fn cmd_validate(path: &Path, special: bool) -> Result<Report, Failure> {
    let mut s = Session::new("validate");
    let c: Circuit = s.read_json("circuit", path)?;
    let violations = if special {
        c.validate_special()
    } else {
        c.validate()
    };
    let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    let details = json!({
        "nodes": c.nodes,
        "gates": c.gates.len(),
        "cyclic": c.cyclic,
        "violations": listed,
    });
    if violations.is_empty() {
        Ok(s.finish(true, format!("circuit valid: {} nodes, {} gates", c.nodes, c.gates.len()), details))
    } else {
        let n = violations.len();
        Err(Failure {
            code: 1,
            message: format!("{n} violation(s), first: {}", violations[0]),
            report: Some(s.finish(false, format!("{n} violation(s)"), details)),
        })
    }
}

fn cmd_lower(path: &Path, out: &Path) -> Result<Report, Failure> {
    let mut s = Session::new("lower");
    let c: Circuit = s.read_json("circuit", path)?;
    let (circuit, certificate) = lower_to_special(&c).map_err(lower_failure)?;
    let details = json!({
        "source_nodes": certificate.source_nodes,
        "source_gates": certificate.source_gates,
        "special_nodes": certificate.special_nodes,
        "special_gates": certificate.special_gates,
    });
    let summary = format!(
        "lowered {} nodes to {} special nodes",
        certificate.source_nodes, certificate.special_nodes
    );
    s.write_json("lowered", out, &LoweredBundle { circuit, certificate })?;
    Ok(s.finish(true, summary, details))
}

/// Accepts a plain circuit or a lowered bundle; plain circuits are lowered
/// on the way in.
fn load_special(s: &mut Session, path: &Path) -> Result<(Circuit, SpecialCircuitCertificate), Failure> {
    let v = s.read_value("circuit", path)?;
    if v.get("certificate").is_some() {
        let bundle: LoweredBundle =
            serde_json::from_value(v).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        Ok((bundle.circuit, bundle.certificate))
    } else {
        let c: Circuit =
            serde_json::from_value(v).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        lower_to_special(&c).map_err(lower_failure)
    }
}

fn cmd_embed(path: &Path, out: &Path) -> Result<Report, Failure> {
    let mut s = Session::new("embed");
    let (circuit, certificate) = load_special(&mut s, path)?;
    let inst = build_gadgets(&circuit, &certificate).map_err(input_err)?;
    let details = json!({
        "nodes": inst.node_count(),
        "agents": inst.agent_count(),
        "domain_length": inst.domain_length(),
    });
    let summary = format!(
        "embedded {} nodes as {} agents on [0, {}]",
        inst.node_count(),
        inst.agent_count(),
        inst.domain_length()
    );
    s.write_json("instance", out, &inst)?;
    Ok(s.finish(true, summary, details))
}

fn cmd_encode(
    path: &Path,
    values: Option<Vec<Rat>>,
    inputs: Option<Vec<Rat>>,
    seed: Option<u64>,
    out: &Path,
) -> Result<Report, Failure> {
    let mut s = Session::new("encode");
    let inst: EmbeddedInstance = s.read_json("instance", path)?;
    let given = [values.is_some(), inputs.is_some(), seed.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given != 1 {
        return Err(input_err(
            "pass exactly one of --values, --inputs, --seed",
        ));
    }
    let (z, used_inputs) = if let Some(z) = values {
        (z, None)
    } else {
        let xs = match inputs {
            Some(xs) => xs,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap());
                (0..inst.source.inputs.len())
                    .map(|_| {
                        let d = rng.gen_range(1..=64i64);
                        rat(rng.gen_range(0..=d), d)
                    })
                    .collect()
            }
        };
        let z = inst.source.evaluate(&xs).map_err(input_err)?;
        (z, Some(xs))
    };
    let sol = encode_values_to_cuts(&inst, &z).map_err(input_err)?;
    let details = json!({
        "values": z,
        "inputs": used_inputs,
        "cuts": sol.cuts.len(),
    });
    let summary = format!("encoded {} node values as {} cuts", z.len(), sol.cuts.len());
    s.write_json("solution", out, &sol)?;
    Ok(s.finish(true, summary, details))
}

fn decode_failure(e: EmbedError) -> Failure {
    match e {
        EmbedError::DecodedValuesInconsistent { .. }
        | EmbedError::SolutionDoesNotSatisfyAgents { .. } => fail(3, e),
        _ => input_err(e),
    }
}

fn cmd_decode(path: &Path, sol_path: &Path, out: Option<&Path>) -> Result<Report, Failure> {
    let mut s = Session::new("decode");
    let inst: EmbeddedInstance = s.read_json("instance", path)?;
    let sol: CHSolution = s.read_json("solution", sol_path)?;
    let values = decode_cuts_to_values(&inst, &sol).map_err(decode_failure)?;
    let details = json!({ "values": values });
    let summary = format!("decoded {} node values", values.len());
    if let Some(p) = out {
        s.write_json("values", p, &ValueList { values })?;
    }
    Ok(s.finish(true, summary, details))
}

fn cmd_ch2bu(path: &Path, out: &Path) -> Result<Report, Failure> {
    let mut s = Session::new("ch2bu");
    let v = s.read_value("instance", path)?;
    let inst = if v.get("node_map").is_some() {
        let embedded: EmbeddedInstance =
            serde_json::from_value(v).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        let circuits = integral_circuits(&embedded).map_err(input_err)?;
        let agents = circuits.into_iter().map(IntegralValuation::Circuit).collect();
        CHInstance::new(agents, embedded.instance.domain_length.clone()).map_err(input_err)?
    } else {
        serde_json::from_value(v).map_err(|e| input_err(format!("{}: {e}", path.display())))?
    };
    let bu = ch_to_bu(&inst).map_err(input_err)?;
    let details = json!({
        "dimension": bu.dimension,
        "coordinates": bu.dimension + 1,
        "linear": bu.linear,
    });
    let summary = format!(
        "built a dimension-{} Borsuk-Ulam map ({})",
        bu.dimension,
        if bu.linear { "linear" } else { "nonlinear" }
    );
    s.write_json("bu", out, &bu)?;
    Ok(s.finish(true, summary, details))
}

fn solve_failure(e: chkit::bu::BUError) -> Failure {
    use chkit::bu::BUError;
    match e {
        BUError::DimensionTooLarge { .. }
        | BUError::MeshTooFine { .. }
        | BUError::SearchExhausted => refusal(e),
        _ => input_err(e),
    }
}

fn cmd_solve_bu(
    path: &Path,
    epsilon: &Rat,
    lambda: Option<Rat>,
    out: &Path,
) -> Result<Report, Failure> {
    let mut s = Session::new("solve-bu");
    let bu: BUInstance = s.read_json("bu", path)?;
    let lambda = match lambda {
        Some(l) => l,
        None => lipschitz_bound(&bu.circuit).map_err(|e| match e {
            CircuitError::NonlinearCircuit(_) => refusal(format!(
                "{e}; pass --lambda with a bound of your own"
            )),
            other => input_err(other),
        })?,
    };
    let outcome = tucker_solve(&bu, epsilon, &lambda).map_err(solve_failure)?;
    let (summary, details) = match &outcome {
        TuckerOutcome::Solution(sol) => (
            format!("approximate zero found, residual {}", sol.residual),
            json!({
                "outcome": "solution",
                "residual": sol.residual,
                "epsilon": epsilon,
                "lambda": lambda,
            }),
        ),
        TuckerOutcome::Witness(w) => (
            format!("Lipschitz claim {} broken by ratio {}", lambda, w.ratio),
            json!({
                "outcome": "witness",
                "ratio": w.ratio,
                "lambda": lambda,
            }),
        ),
    };
    s.write_json("outcome", out, &outcome)?;
    Ok(s.finish(true, summary, details))
}

fn round_failure(e: LPError) -> Failure {
    match e {
        LPError::BadAnchor(_) => input_err(e),
        _ => refusal(e),
    }
}

fn cmd_round(
    path: &Path,
    point_path: &Path,
    out: &Path,
    lp_out: Option<&Path>,
) -> Result<Report, Failure> {
    let mut s = Session::new("round");
    let bu: BUInstance = s.read_json("bu", path)?;
    let v = s.read_value("point", point_path)?;
    let p = coords_from(v, "point")?;
    if let Some(lp) = lp_out {
        let text = rounding_lp_text(&bu, &p).map_err(round_failure)?;
        s.write_text("lp", lp, &text)?;
    }
    let x = round_to_exact(&bu, &p).map_err(round_failure)?;
    let residual = linf_norm(&bu.eval_odd_part(&x).map_err(input_err)?);
    let details = json!({ "residual": residual, "coordinates": x.len() });
    let summary = format!("rounded to an exact point, residual {residual}");
    s.write_json("point", out, &json!({ "x": x, "residual": residual }))?;
    Ok(s.finish(true, summary, details))
}

fn cmd_verify(
    instance: Option<PathBuf>,
    solution: Option<PathBuf>,
    bu: Option<PathBuf>,
    point: Option<PathBuf>,
    tol: Option<Rat>,
) -> Result<Report, Failure> {
    let mut s = Session::new("verify");
    let tol = tol.unwrap_or_else(Rat::zero);
    if tol.is_negative() {
        return Err(input_err("tolerance must be nonnegative"));
    }
    match (instance, solution, bu, point) {
        (Some(ip), Some(sp), None, None) => {
            let inst: CHInstance = s.read_json("instance", &ip)?;
            let sol: CHSolution = s.read_json("solution", &sp)?;
            let report = verify_ch(&inst, &sol, &tol).map_err(input_err)?;
            let ok = report.ok;
            let worst = report
                .verdicts
                .iter()
                .map(|v| v.imbalance.clone().abs())
                .max()
                .unwrap_or_else(Rat::zero);
            let details = json!({ "tol": tol, "report": report });
            let summary = format!(
                "{} agents checked, worst imbalance {worst}",
                inst.n()
            );
            let rep = s.finish(ok, summary, details);
            if ok {
                Ok(rep)
            } else {
                Err(Failure {
                    code: 3,
                    message: format!("solution rejected, worst imbalance {worst}"),
                    report: Some(rep),
                })
            }
        }
        (None, None, Some(bp), Some(pp)) => {
            let bu: BUInstance = s.read_json("bu", &bp)?;
            let v = s.read_value("point", &pp)?;
            let x = coords_from(v, "point")?;
            let verdict = bu_verify(&bu, &x, &tol);
            let ok = verdict.ok;
            let details = json!({ "tol": tol, "verdict": verdict });
            let summary = if ok {
                "point is on the sphere and balances the map".to_string()
            } else if !verdict.on_sphere {
                "point is off the L1 sphere".to_string()
            } else {
                format!(
                    "residual {} above tolerance",
                    verdict.residual.clone().unwrap_or_else(Rat::zero)
                )
            };
            let rep = s.finish(ok, summary.clone(), details);
            if ok {
                Ok(rep)
            } else {
                Err(Failure {
                    code: 3,
                    message: summary,
                    report: Some(rep),
                })
            }
        }
        _ => Err(input_err(
            "pass --instance with --solution, or --bu with --point",
        )),
    }
}

fn etr_failure(e: ETRError) -> Failure {
    match e {
        ETRError::UnboundedVariable(_) => refusal(e),
        _ => input_err(e),
    }
}

fn cmd_emit_etr(
    instance: Option<PathBuf>,
    cuts: Option<usize>,
    bu: Option<PathBuf>,
    circuit: Option<PathBuf>,
    out: Option<&Path>,
) -> Result<Report, Failure> {
    let mut s = Session::new("emit-etr");
    let sentence: ETRSentence = match (instance, bu, circuit) {
        (Some(p), None, None) => {
            let inst: CHInstance = s.read_json("instance", &p)?;
            ch_to_etr(&inst, cuts.unwrap()).map_err(etr_failure)?
        }
        (None, Some(p), None) => {
            let b: BUInstance = s.read_json("bu", &p)?;
            bu_to_etr(&b).map_err(etr_failure)?
        }
        (None, None, Some(p)) => {
            let c: Circuit = s.read_json("circuit", &p)?;
            circuit_to_constraints(&c).map_err(etr_failure)?
        }
        _ => {
            return Err(input_err(
                "pass exactly one of --instance, --bu, --circuit",
            ))
        }
    };
    let text = emit_sentence(&sentence);
    let details = json!({ "variables": sentence.vars.len() });
    let summary = format!("sentence over {} variables", sentence.vars.len());
    match out {
        Some(p) => {
            s.write_text("sentence", p, &text)?;
            Ok(s.finish(true, summary, details))
        }
        None => {
            s.record("sentence", text.as_bytes());
            let mut rep = s.finish(true, summary, details);
            rep.raw = Some(text);
            Ok(rep)
        }
    }
}

fn cmd_reduce_feasible(
    path: &Path,
    out: &Path,
    root: Option<Vec<Rat>>,
    solution_out: Option<&Path>,
) -> Result<Report, Failure> {
    let mut s = Session::new("reduce-feasible");
    let p: Polynomial = s.read_json("polynomial", path)?;
    for (i, t) in p.terms.iter().enumerate() {
        if t.exps.len() != p.vars {
            return Err(input_err(format!(
                "term {i} has {} exponents, polynomial declares {} variables",
                t.exps.len(),
                p.vars
            )));
        }
    }
    let inst = feasible_to_ch(&p).map_err(input_err)?;
    let mut details = json!({
        "variables": p.vars,
        "nodes": inst.node_count(),
        "agents": inst.agent_count(),
    });
    let summary = format!(
        "reduced {}-variable polynomial to {} agents",
        p.vars,
        inst.agent_count()
    );
    s.write_json("instance", out, &inst)?;
    if let Some(x) = root {
        let sol = encode_root(&inst, &x).map_err(input_err)?;
        details["cuts"] = json!(sol.cuts.len());
        s.write_json("solution", solution_out.unwrap(), &sol)?;
    }
    Ok(s.finish(true, summary, details))
}

fn cmd_reduce_game(path: &Path, out: &Path) -> Result<Report, Failure> {
    let mut s = Session::new("reduce-game");
    let g: GameInstance = s.read_json("game", path)?;
    let c = game_to_circuit(&g).map_err(input_err)?;
    let details = json!({
        "players": g.players(),
        "strategies": g.strategies,
        "nodes": c.nodes,
        "merged": c.merged.len(),
    });
    let summary = format!(
        "built the cyclic response circuit: {} nodes, {} merged",
        c.nodes,
        c.merged.len()
    );
    s.write_json("circuit", out, &c)?;
    Ok(s.finish(true, summary, details))
}

fn cmd_check_etr(
    path: &Path,
    witness: Option<&Path>,
    grid: Option<Rat>,
    out: Option<&Path>,
) -> Result<Report, Failure> {
    let mut s = Session::new("check-etr");
    let bytes = s.read_bytes("sentence", path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| input_err(format!("{} is not UTF-8", path.display())))?;
    let sentence = parse_sentence(&text).map_err(input_err)?;
    match (witness, grid) {
        (Some(wp), None) => {
            let v = s.read_value("witness", wp)?;
            let assignment = coords_from(v, "witness")?;
            let holds = eval_sentence(&sentence, &assignment).map_err(input_err)?;
            let details = json!({ "mode": "witness", "satisfied": holds });
            if holds {
                Ok(s.finish(true, "witness satisfies the sentence exactly", details))
            } else {
                let rep = s.finish(false, "witness rejected", details);
                Err(Failure {
                    code: 3,
                    message: "witness does not satisfy the sentence".into(),
                    report: Some(rep),
                })
            }
        }
        (None, Some(step)) => match brute_check(&sentence, &step).map_err(etr_failure)? {
            BruteOutcome::Sat { witness } => {
                let details = json!({ "mode": "grid", "step": step, "witness": witness });
                if let Some(p) = out {
                    s.write_json("values", p, &ValueList { values: witness })?;
                }
                Ok(s.finish(true, "grid search found a relaxed witness", details))
            }
            BruteOutcome::Unknown => {
                let details = json!({ "mode": "grid", "step": step });
                let rep = s.finish(false, "grid exhausted without a witness", details);
                Err(Failure {
                    code: 3,
                    message: "satisfiability not confirmed on this grid".into(),
                    report: Some(rep),
                })
            }
        },
        _ => Err(input_err("pass exactly one of --witness, --grid")),
    }
}
