//! Text form of sentences: s-expressions with declare-var, assert, and
//! check-sat forms, consumable by external real-arithmetic solvers and by
//! the grid checker alike. The grammar is pinned in docs/etr_format.md.

use super::{ETRError, ETRSentence, Formula, Rel, Term, VarDecl};
use crate::rat::Rat;
use std::fmt::Write;

fn rel_name(rel: Rel) -> &'static str {
    match rel {
        Rel::Lt => "<",
        Rel::Le => "<=",
        Rel::Eq => "=",
        Rel::Ge => ">=",
        Rel::Gt => ">",
    }
}

fn write_term(out: &mut String, t: &Term, names: &[String]) {
    match t {
        Term::Const(r) => {
            let _ = write!(out, "{r}");
        }
        Term::Var(i) => out.push_str(&names[*i]),
        Term::Add(a, b) => write_binary(out, "add", a, b, names),
        Term::Sub(a, b) => write_binary(out, "sub", a, b, names),
        Term::Mul(a, b) => write_binary(out, "mul", a, b, names),
        Term::Neg(a) => {
            out.push_str("(neg ");
            write_term(out, a, names);
            out.push(')');
        }
    }
}

fn write_binary(out: &mut String, op: &str, a: &Term, b: &Term, names: &[String]) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    write_term(out, a, names);
    out.push(' ');
    write_term(out, b, names);
    out.push(')');
}

fn write_formula(out: &mut String, f: &Formula, names: &[String]) {
    match f {
        Formula::Cmp(rel, l, r) => {
            out.push('(');
            out.push_str(rel_name(*rel));
            out.push(' ');
            write_term(out, l, names);
            out.push(' ');
            write_term(out, r, names);
            out.push(')');
        }
        Formula::And(fs) => write_connective(out, "and", fs, names),
        Formula::Or(fs) => write_connective(out, "or", fs, names),
        Formula::Not(f) => {
            out.push_str("(not ");
            write_formula(out, f, names);
            out.push(')');
        }
    }
}

fn write_connective(out: &mut String, name: &str, fs: &[Formula], names: &[String]) {
    out.push('(');
    out.push_str(name);
    for f in fs {
        out.push(' ');
        write_formula(out, f, names);
    }
    out.push(')');
}

/// One declare-var line per variable, a single assert holding the whole
/// matrix, then check-sat.
pub fn emit(s: &ETRSentence) -> String {
    let names: Vec<String> = s.vars.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    for v in &s.vars {
        match &v.bounds {
            Some((lo, hi)) => {
                let _ = writeln!(out, "(declare-var {} (bounds {lo} {hi}))", v.name);
            }
            None => {
                let _ = writeln!(out, "(declare-var {})", v.name);
            }
        }
    }
    out.push_str("(assert ");
    write_formula(&mut out, &s.matrix, &names);
    out.push_str(")\n(check-sat)\n");
    out
}

#[derive(Debug)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> ETRError {
    ETRError::Parse {
        line,
        message: message.into(),
    }
}

fn tokenize(input: &str) -> Vec<(String, usize)> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut line = 1;
    let mut comment = false;
    for ch in input.chars() {
        if ch == '\n' {
            comment = false;
        }
        if comment {
            continue;
        }
        match ch {
            ';' => {
                comment = true;
                if !current.is_empty() {
                    tokens.push((std::mem::take(&mut current), line));
                }
            }
            '(' | ')' => {
                if !current.is_empty() {
                    tokens.push((std::mem::take(&mut current), line));
                }
                tokens.push((ch.to_string(), line));
            }
            c if c.is_whitespace() => {
                if !current.is_empty() {
                    tokens.push((std::mem::take(&mut current), line));
                }
                if c == '\n' {
                    line += 1;
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push((current, line));
    }
    tokens
}

fn read_sexp(tokens: &[(String, usize)], pos: &mut usize) -> Result<Sexp, ETRError> {
    let Some((tok, line)) = tokens.get(*pos) else {
        let last = tokens.last().map_or(1, |(_, l)| *l);
        return Err(err(last, "unexpected end of input"));
    };
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    Some((t, _)) if t == ")" => {
                        *pos += 1;
                        return Ok(Sexp::List(items, *line));
                    }
                    Some(_) => items.push(read_sexp(tokens, pos)?),
                    None => return Err(err(*line, "unclosed parenthesis")),
                }
            }
        }
        ")" => Err(err(*line, "unmatched closing parenthesis")),
        _ => Ok(Sexp::Atom(tok.clone(), *line)),
    }
}

fn parse_rat(tok: &str, line: usize) -> Result<Rat, ETRError> {
    tok.parse()
        .map_err(|_| err(line, format!("malformed rational {tok}")))
}

fn parse_term(sexp: &Sexp, names: &[String]) -> Result<Term, ETRError> {
    match sexp {
        Sexp::Atom(tok, line) => {
            if let Some(i) = names.iter().position(|n| n == tok) {
                return Ok(Term::Var(i));
            }
            if tok
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit() || c == '-')
            {
                return Ok(Term::Const(parse_rat(tok, *line)?));
            }
            Err(err(*line, format!("undeclared variable {tok}")))
        }
        Sexp::List(items, line) => {
            let Some(Sexp::Atom(head, _)) = items.first() else {
                return Err(err(*line, "term operator expected"));
            };
            let arity = |n: usize| -> Result<(), ETRError> {
                if items.len() == n + 1 {
                    Ok(())
                } else {
                    Err(err(*line, format!("{head} takes {n} arguments")))
                }
            };
            match head.as_str() {
                "add" | "sub" | "mul" => {
                    arity(2)?;
                    let a = Box::new(parse_term(&items[1], names)?);
                    let b = Box::new(parse_term(&items[2], names)?);
                    Ok(match head.as_str() {
                        "add" => Term::Add(a, b),
                        "sub" => Term::Sub(a, b),
                        _ => Term::Mul(a, b),
                    })
                }
                "neg" => {
                    arity(1)?;
                    Ok(Term::Neg(Box::new(parse_term(&items[1], names)?)))
                }
                other => Err(err(*line, format!("unknown term operator {other}"))),
            }
        }
    }
}

fn parse_formula(sexp: &Sexp, names: &[String]) -> Result<Formula, ETRError> {
    let Sexp::List(items, line) = sexp else {
        return Err(err(sexp.line(), "formula must be a parenthesized form"));
    };
    let Some(Sexp::Atom(head, _)) = items.first() else {
        return Err(err(*line, "formula operator expected"));
    };
    let rel = match head.as_str() {
        "<" => Some(Rel::Lt),
        "<=" => Some(Rel::Le),
        "=" => Some(Rel::Eq),
        ">=" => Some(Rel::Ge),
        ">" => Some(Rel::Gt),
        _ => None,
    };
    if let Some(rel) = rel {
        if items.len() != 3 {
            return Err(err(*line, format!("{head} takes 2 arguments")));
        }
        return Ok(Formula::Cmp(
            rel,
            parse_term(&items[1], names)?,
            parse_term(&items[2], names)?,
        ));
    }
    match head.as_str() {
        "and" | "or" => {
            if items.len() < 2 {
                return Err(err(*line, format!("{head} needs at least one operand")));
            }
            let subs = items[1..]
                .iter()
                .map(|s| parse_formula(s, names))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(if head == "and" {
                Formula::And(subs)
            } else {
                Formula::Or(subs)
            })
        }
        "not" => {
            if items.len() != 2 {
                return Err(err(*line, "not takes 1 argument"));
            }
            Ok(Formula::Not(Box::new(parse_formula(&items[1], names)?)))
        }
        other => Err(err(*line, format!("unknown connective {other}"))),
    }
}

fn parse_decl(items: &[Sexp], line: usize) -> Result<VarDecl, ETRError> {
    let Some(Sexp::Atom(name, nline)) = items.first() else {
        return Err(err(line, "declare-var needs a name"));
    };
    if name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-')
    {
        return Err(err(*nline, format!("variable name {name} starts like a number")));
    }
    let bounds = match items.get(1) {
        None => None,
        Some(Sexp::List(bs, bline)) => {
            let ok = matches!(bs.first(), Some(Sexp::Atom(h, _)) if h == "bounds");
            if !ok || bs.len() != 3 {
                return Err(err(*bline, "expected (bounds lo hi)"));
            }
            let atom = |s: &Sexp| -> Result<Rat, ETRError> {
                match s {
                    Sexp::Atom(t, l) => parse_rat(t, *l),
                    Sexp::List(_, l) => Err(err(*l, "bound must be a rational")),
                }
            };
            let lo = atom(&bs[1])?;
            let hi = atom(&bs[2])?;
            if lo > hi {
                return Err(err(*bline, "bounds are inverted"));
            }
            Some((lo, hi))
        }
        Some(other) => return Err(err(other.line(), "expected (bounds lo hi)")),
    };
    if items.len() > 2 {
        return Err(err(line, "declare-var takes a name and optional bounds"));
    }
    Ok(VarDecl {
        name: name.clone(),
        bounds,
    })
}

/// Reads declarations, asserts, and the closing check-sat. Multiple asserts
/// conjoin; a single assert round-trips the matrix unchanged.
pub fn parse(input: &str) -> Result<ETRSentence, ETRError> {
    let tokens = tokenize(input);
    let mut pos = 0;
    let mut forms = Vec::new();
    while pos < tokens.len() {
        forms.push(read_sexp(&tokens, &mut pos)?);
    }

    let mut vars: Vec<VarDecl> = Vec::new();
    let mut asserts: Vec<&Sexp> = Vec::new();
    let mut checked = false;
    for form in &forms {
        let Sexp::List(items, line) = form else {
            return Err(err(form.line(), "top-level form expected"));
        };
        let Some(Sexp::Atom(head, _)) = items.first() else {
            return Err(err(*line, "top-level form expected"));
        };
        if checked {
            return Err(err(*line, "content after (check-sat)"));
        }
        match head.as_str() {
            "declare-var" => {
                let decl = parse_decl(&items[1..], *line)?;
                if vars.iter().any(|v| v.name == decl.name) {
                    return Err(err(*line, format!("duplicate variable {}", decl.name)));
                }
                vars.push(decl);
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(err(*line, "assert takes 1 formula"));
                }
                asserts.push(&items[1]);
            }
            "check-sat" => {
                if items.len() != 1 {
                    return Err(err(*line, "check-sat takes no arguments"));
                }
                checked = true;
            }
            other => return Err(err(*line, format!("unknown form {other}"))),
        }
    }
    if !checked {
        let last = forms.last().map_or(1, Sexp::line);
        return Err(err(last, "missing (check-sat)"));
    }

    let names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
    let mut formulas = asserts
        .iter()
        .map(|s| parse_formula(s, &names))
        .collect::<Result<Vec<_>, _>>()?;
    let matrix = match formulas.len() {
        0 => Formula::And(Vec::new()),
        1 => formulas.pop().expect("one assert"),
        _ => Formula::And(formulas),
    };
    Ok(ETRSentence { vars, matrix })
}
