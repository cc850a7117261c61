//! Constraint-solver backend: emits the partition and stochastic-partition
//! consistency encodings as SMT-LIB 2 scripts over linear rational
//! arithmetic with booleans, drives an external solver process, and decodes
//! models back into witnesses.
//!
//! Scripts are deterministic: the same input yields byte-identical text.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use thiserror::Error;

use crate::learning::{Partition, StochasticPartition};
use crate::model::StateId;
use crate::rational::Rational;
use crate::samples::{GlobalId, SampleSet};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("no solver configured: set LPTS_SOLVER_CMD, or install z3 on PATH, or provide tools/z3-smt2")]
    NoSolver,
    #[error("failed to launch solver: {0}")]
    Launch(#[from] std::io::Error),
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed solver output: {0}")]
    Malformed(String),
    #[error("{0}")]
    Unexpected(String),
}

/// External solver invocation: a command line reading SMT-LIB 2 on stdin and
/// answering on stdout.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub cmd: Vec<String>,
    pub timeout: Duration,
}

impl SolverConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    pub fn new(cmd: Vec<String>) -> Self {
        SolverConfig {
            cmd,
            timeout: Self::DEFAULT_TIMEOUT,
        }
    }

    /// Resolution order: `LPTS_SOLVER_CMD` (whitespace-split), then `z3` on
    /// PATH, then the bundled `tools/z3-smt2` script.
    pub fn resolve() -> Result<Self, SmtError> {
        if let Ok(cmd) = std::env::var("LPTS_SOLVER_CMD") {
            let cmd: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if !cmd.is_empty() {
                return Ok(Self::new(cmd));
            }
        }
        if Command::new("z3")
            .arg("-version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok()
        {
            return Ok(Self::new(vec!["z3".into(), "-in".into()]));
        }
        let bundled = concat!(env!("CARGO_MANIFEST_DIR"), "/../../tools/z3-smt2");
        if std::path::Path::new(bundled).exists() {
            return Ok(Self::new(vec![bundled.into()]));
        }
        Err(SmtError::NoSolver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Rat(Rational),
}

#[derive(Debug, Clone)]
pub struct SolverVerdict {
    pub status: Status,
    /// Script identifier -> model value; present iff sat.
    pub assignment: BTreeMap<String, Value>,
}

/// A self-contained solver script plus the map from descriptive variable
/// names to script identifiers.
#[derive(Debug, Clone)]
pub struct ConstraintScript {
    pub text: String,
    pub symbol_table: BTreeMap<String, String>,
}

fn smt_rat(r: &Rational) -> String {
    if r.is_negative() {
        return format!("(- {})", smt_rat(&-r));
    }
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    }
}

fn conj(terms: Vec<String>) -> String {
    match terms.len() {
        0 => "true".to_string(),
        1 => terms.into_iter().next().unwrap(),
        _ => format!("(and {})", terms.join(" ")),
    }
}

fn disj(terms: Vec<String>) -> String {
    match terms.len() {
        0 => "false".to_string(),
        1 => terms.into_iter().next().unwrap(),
        _ => format!("(or {})", terms.join(" ")),
    }
}

fn sum(terms: Vec<String>) -> String {
    match terms.len() {
        0 => "0".to_string(),
        1 => terms.into_iter().next().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

struct ScriptBuilder {
    decls: Vec<String>,
    asserts: Vec<String>,
    symbols: Vec<String>,
    symbol_table: BTreeMap<String, String>,
}

impl ScriptBuilder {
    fn new() -> Self {
        ScriptBuilder {
            decls: Vec::new(),
            asserts: Vec::new(),
            symbols: Vec::new(),
            symbol_table: BTreeMap::new(),
        }
    }

    fn declare(&mut self, id: &str, sort: &str, descriptive: String) {
        self.decls.push(format!("(declare-const {id} {sort})"));
        self.symbols.push(id.to_string());
        self.symbol_table.insert(descriptive, id.to_string());
    }

    fn assert(&mut self, term: String) {
        self.asserts.push(format!("(assert {term})"));
    }

    fn finish(self) -> ConstraintScript {
        let mut text = String::new();
        text.push_str("(set-option :produce-models true)\n");
        text.push_str("(set-logic QF_LRA)\n");
        for d in &self.decls {
            text.push_str(d);
            text.push('\n');
        }
        for a in &self.asserts {
            text.push_str(a);
            text.push('\n');
        }
        text.push_str("(check-sat)\n");
        text.push_str(&format!("(get-value ({}))\n", self.symbols.join(" ")));
        ConstraintScript {
            text,
            symbol_table: self.symbol_table,
        }
    }
}

// deterministic script identifiers, shared between encode and decode
fn v_id(s: GlobalId, i: usize) -> String {
    format!("v_p{s}_c{i}")
}
fn r_id(j: usize, s: StateId, i: usize) -> String {
    format!("R_n{j}_s{}_c{i}", s.0)
}
fn sv_id(s: GlobalId, g: usize, j: usize) -> String {
    format!("v_p{s}_g{g}_t{j}")
}

/// Negative-side transitions, flat-indexed across all negative samples.
fn neg_transitions(samples: &SampleSet) -> Vec<(usize, StateId, String, Vec<(StateId, Rational)>)> {
    let mut out = Vec::new();
    for (j, n) in samples.negatives().iter().enumerate() {
        for tr in n.transitions() {
            let target: Vec<(StateId, Rational)> =
                tr.target.iter().map(|(s, p)| (s, p.clone())).collect();
            out.push((j, tr.source, tr.action.clone(), target));
        }
    }
    out
}

/// Negative sample states grouped by isomorphic subtrees. On trees the
/// simulation fixed point is determined bottom-up, so two states with
/// isomorphic subtrees always receive identical simulation rows; they can
/// share variables and matching blocks without changing satisfiability.
/// Counterexample trees repeat a lot of structure, so this keeps scripts
/// small.
struct NegCanon {
    n_classes: usize,
    /// One representative outgoing-transition list per class: `(action,
    /// aggregated (child class, probability) pairs)`, deterministic order.
    transitions: Vec<Vec<(String, Vec<(usize, Rational)>)>>,
    /// Class of each negative root, one entry per negative sample.
    roots: Vec<usize>,
}

fn neg_canon(samples: &SampleSet) -> NegCanon {
    let mut key_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut transitions: Vec<Vec<(String, Vec<(usize, Rational)>)>> = Vec::new();
    let mut roots = Vec::new();
    for n in samples.negatives() {
        // post-order: children before parents
        let mut order: Vec<StateId> = Vec::new();
        let mut stack = vec![(n.start(), false)];
        while let Some((s, expanded)) = stack.pop() {
            if expanded {
                order.push(s);
                continue;
            }
            stack.push((s, true));
            for tr in n.transitions_from(s) {
                stack.extend(tr.target.support().map(|c| (c, false)));
            }
        }
        let mut class_of: BTreeMap<StateId, usize> = BTreeMap::new();
        for s in order {
            let mut trs: Vec<(String, Vec<(usize, Rational)>)> = n
                .transitions_from(s)
                .map(|tr| {
                    let mut agg: BTreeMap<usize, Rational> = BTreeMap::new();
                    for (child, p) in tr.target.iter() {
                        *agg.entry(class_of[&child]).or_insert_with(Rational::zero) += p;
                    }
                    (tr.action.clone(), agg.into_iter().collect())
                })
                .collect();
            trs.sort();
            let key = format!("{trs:?}");
            let next = transitions.len();
            let c = *key_index.entry(key).or_insert_with(|| {
                transitions.push(trs);
                next
            });
            class_of.insert(s, c);
        }
        roots.push(class_of[&n.start()]);
    }
    NegCanon {
        n_classes: transitions.len(),
        transitions,
        roots,
    }
}

/// Script satisfiable iff a consistent partition of size at most `k` exists.
///
/// Pieces: exactly-one class per positive state; all roots in class 1;
/// per-class lifted probabilities through conditional `l` variables; for
/// every (negative transition, same-action positive transition) pair a `d`
/// variable constrained in both polarities — a weight-function block when
/// true, a witness-subset block when false; the simulation variables `R` as
/// a bottom-up iff fixed point; and a refutation of `R` at every negative
/// root against class 1.
pub fn encode_partition(samples: &SampleSet, k: usize) -> ConstraintScript {
    assert!(k >= 1);
    let mut b = ScriptBuilder::new();
    let pos_ts = samples.pos_transitions();
    let canon = neg_canon(samples);
    // negative transitions flattened over canon classes:
    // (source class, action, aggregated (child class, probability))
    let neg_ts: Vec<(usize, String, Vec<(usize, Rational)>)> = (0..canon.n_classes)
        .flat_map(|c| {
            canon.transitions[c]
                .iter()
                .map(move |(a, tgt)| (c, a.clone(), tgt.clone()))
        })
        .collect();

    // class membership booleans, exactly one per state
    for s in 0..samples.n_pos_states() {
        for i in 1..=k {
            b.declare(
                &v_id(s, i),
                "Bool",
                format!("v[{}]={i}", samples.global_name(s)),
            );
        }
        b.assert(disj((1..=k).map(|i| v_id(s, i)).collect()));
        for i in 1..=k {
            for j in i + 1..=k {
                b.assert(format!("(not (and {} {}))", v_id(s, i), v_id(s, j)));
            }
        }
    }
    for root in samples.roots() {
        b.assert(v_id(root, 1));
    }

    // first-occurrence symmetry breaking: scanning roots first and then the
    // remaining states in order, class i may only appear after class i-1
    // has; every partition can be renamed into this form with the root
    // class staying first
    let roots: BTreeSet<GlobalId> = samples.roots().into_iter().collect();
    let order: Vec<GlobalId> = roots
        .iter()
        .copied()
        .chain((0..samples.n_pos_states()).filter(|s| !roots.contains(s)))
        .collect();
    for (pos, s) in order.iter().enumerate() {
        for i in 3..=k {
            let earlier: Vec<String> = order[..pos].iter().map(|s2| v_id(*s2, i - 1)).collect();
            if earlier.is_empty() {
                b.assert(format!("(not {})", v_id(*s, i)));
            } else {
                b.assert(format!("(=> {} {})", v_id(*s, i), disj(earlier)));
            }
        }
    }

    // l variables: contribution of each support state to the lifted
    // probability of each class
    let mut lift: Vec<Vec<Vec<String>>> = Vec::new(); // [tp][i-1] = contribution terms
    for (tp, (_, _, target)) in pos_ts.iter().enumerate() {
        let mut per_class = Vec::new();
        for i in 1..=k {
            let mut terms = Vec::new();
            for (sp, p) in target {
                let id = format!("l_t{tp}_c{i}_p{sp}");
                b.declare(
                    &id,
                    "Real",
                    format!("l[t{tp},{i},{}]", samples.global_name(*sp)),
                );
                b.assert(format!(
                    "(= {id} (ite {} {} 0))",
                    v_id(*sp, i),
                    smt_rat(p)
                ));
                terms.push(id);
            }
            per_class.push(terms);
        }
        lift.push(per_class);
    }
    let lift_term = |tp: usize, i: usize| sum(lift[tp][i - 1].clone());

    // simulation booleans, one row per canon class of negative states
    let rc_id = |c: usize, i: usize| format!("R_m{c}_c{i}");
    for c in 0..canon.n_classes {
        for i in 1..=k {
            b.declare(&rc_id(c, i), "Bool", format!("R[m{c},{i}]"));
        }
    }

    // d variables with two-sided blocks
    let mut d_ids: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for (tn, (_, action, target)) in neg_ts.iter().enumerate() {
        for (tp, (_, pa, _)) in pos_ts.iter().enumerate() {
            if pa != action {
                continue;
            }
            let d = format!("d_t{tn}_t{tp}");
            b.declare(&d, "Bool", format!("d[t{tn},t{tp}]"));
            d_ids.insert((tn, tp), d.clone());

            // weight-function block under d
            let mut w_terms: Vec<String> = Vec::new();
            for (c1, p1) in target {
                let mut row = Vec::new();
                for i in 1..=k {
                    let w = format!("w_d{tn}_{tp}_m{c1}_c{i}");
                    b.declare(&w, "Real", format!("w[t{tn},t{tp},m{c1},{i}]"));
                    w_terms.push(format!("(>= {w} 0)"));
                    w_terms.push(format!("(or {} (= {w} 0))", rc_id(*c1, i)));
                    row.push(w);
                }
                w_terms.push(format!("(= {} {})", sum(row), smt_rat(p1)));
            }
            for i in 1..=k {
                let col: Vec<String> = target
                    .iter()
                    .map(|(c1, _)| format!("w_d{tn}_{tp}_m{c1}_c{i}"))
                    .collect();
                w_terms.push(format!("(= {} {})", sum(col), lift_term(tp, i)));
            }
            b.assert(format!("(=> {d} {})", conj(w_terms)));

            // witness-subset block under (not d)
            let mut s_terms: Vec<String> = Vec::new();
            let mut lhs = Vec::new();
            for (c1, p1) in target {
                let sv = format!("S_d{tn}_{tp}_m{c1}");
                b.declare(&sv, "Bool", format!("S[t{tn},t{tp},m{c1}]"));
                lhs.push(format!("(ite {sv} {} 0)", smt_rat(p1)));
            }
            let mut rhs = Vec::new();
            for i in 1..=k {
                let iv = format!("I_d{tn}_{tp}_c{i}");
                b.declare(&iv, "Bool", format!("I[t{tn},t{tp},{i}]"));
                let hit = disj(
                    target
                        .iter()
                        .map(|(c1, _)| {
                            format!("(and S_d{tn}_{tp}_m{c1} {})", rc_id(*c1, i))
                        })
                        .collect(),
                );
                s_terms.push(format!("(= {iv} {hit})"));
                rhs.push(format!("(ite {iv} {} 0)", lift_term(tp, i)));
            }
            s_terms.push(format!("(> {} {})", sum(lhs), sum(rhs)));
            b.assert(format!("(=> (not {d}) {})", conj(s_terms)));
        }
    }

    // R fixed point: a class related to partition class i iff every outgoing
    // negative transition is matched by some positive transition lifted from
    // class i
    for c in 0..canon.n_classes {
        for i in 1..=k {
            let mut conjuncts = Vec::new();
            for (tn, (src, _, _)) in neg_ts.iter().enumerate() {
                if *src != c {
                    continue;
                }
                let mut options = Vec::new();
                for (tp, (sp, _, _)) in pos_ts.iter().enumerate() {
                    if let Some(d) = d_ids.get(&(tn, tp)) {
                        options.push(format!("(and {} {d})", v_id(*sp, i)));
                    }
                }
                conjuncts.push(disj(options));
            }
            b.assert(format!("(= {} {})", rc_id(c, i), conj(conjuncts)));
        }
    }
    for root in canon.roots.iter().collect::<BTreeSet<_>>() {
        b.assert(format!("(not {})", rc_id(*root, 1)));
    }

    b.finish()
}

/// Script satisfiable iff a consistent stochastic partition of size at most
/// `k` exists. The grouping probabilities are real unknowns; every product
/// in the script is variable x constant or an ite selection, staying inside
/// linear rational arithmetic.
pub fn encode_stochastic(samples: &SampleSet, k: usize) -> ConstraintScript {
    assert!(k >= 1);
    let mut b = ScriptBuilder::new();
    let pos_ts = samples.pos_transitions();
    let neg_ts = neg_transitions(samples);

    // grouping unknowns [s](g)(j), nonnegative, rows summing to 0 or 1
    for s in 0..samples.n_pos_states() {
        for g in 1..=k {
            for j in 1..=k {
                b.declare(
                    &sv_id(s, g, j),
                    "Real",
                    format!("v[{}]({g}),{j}", samples.global_name(s)),
                );
                b.assert(format!("(>= {} 0)", sv_id(s, g, j)));
            }
        }
    }
    let row_sum = |s: GlobalId, g: usize| sum((1..=k).map(|j| sv_id(s, g, j)).collect());
    // membership of s in group i: positive mass under some condition
    let member = |s: GlobalId, i: usize| {
        format!("(> {} 0)", sum((1..=k).map(|g| sv_id(s, g, i)).collect()))
    };

    for s in 0..samples.n_pos_states() {
        if samples.is_root(s) {
            // roots: Dirac on group 1 under every condition
            for g in 1..=k {
                for j in 1..=k {
                    let val = if j == 1 { "1" } else { "0" };
                    b.assert(format!("(= {} {val})", sv_id(s, g, j)));
                }
            }
        } else {
            let parent = samples.parent(s).expect("non-root").parent;
            for g in 1..=k {
                b.assert(format!(
                    "(or (= {} 0) (= {} 1))",
                    row_sum(s, g),
                    row_sum(s, g)
                ));
                // defined exactly where the parent has mass in g
                b.assert(format!(
                    "(= (= {} 1) {})",
                    row_sum(s, g),
                    member(parent, g)
                ));
            }
        }
    }

    // lift(mu_p, i)(j) as a linear term
    let lift_term = |tp: usize, i: usize, j: usize| -> String {
        let (_, _, target) = &pos_ts[tp];
        sum(target
            .iter()
            .map(|(sp, p)| format!("(* {} {})", smt_rat(p), sv_id(*sp, i, j)))
            .collect())
    };

    for (j, n) in samples.negatives().iter().enumerate() {
        for s in n.state_ids() {
            for i in 1..=k {
                b.declare(
                    &r_id(j, s, i),
                    "Bool",
                    format!("R[{},{i}]", n.state_name(s)),
                );
            }
        }
    }

    let mut d_ids: BTreeMap<(usize, usize, usize), String> = BTreeMap::new();
    for (tn, (j, _, action, target)) in neg_ts.iter().enumerate() {
        for (tp, (_, pa, _)) in pos_ts.iter().enumerate() {
            if pa != action {
                continue;
            }
            for i in 1..=k {
                let d = format!("d_t{tn}_t{tp}_c{i}");
                b.declare(&d, "Bool", format!("d[t{tn},t{tp},{i}]"));
                d_ids.insert((tn, tp, i), d.clone());

                let mut w_terms: Vec<String> = Vec::new();
                for (s1, p1) in target {
                    let mut row = Vec::new();
                    for g2 in 1..=k {
                        let w = format!("w_d{tn}_{tp}_c{i}_s{}_g{g2}", s1.0);
                        b.declare(
                            &w,
                            "Real",
                            format!("w[t{tn},t{tp},{i},n{j}.{},{g2}]", s1.0),
                        );
                        w_terms.push(format!("(>= {w} 0)"));
                        w_terms.push(format!("(or {} (= {w} 0))", r_id(*j, *s1, g2)));
                        row.push(w);
                    }
                    w_terms.push(format!("(= {} {})", sum(row), smt_rat(p1)));
                }
                for g2 in 1..=k {
                    let col: Vec<String> = target
                        .iter()
                        .map(|(s1, _)| format!("w_d{tn}_{tp}_c{i}_s{}_g{g2}", s1.0))
                        .collect();
                    w_terms.push(format!("(= {} {})", sum(col), lift_term(tp, i, g2)));
                }
                b.assert(format!("(=> {d} {})", conj(w_terms)));

                let mut s_terms: Vec<String> = Vec::new();
                let mut lhs = Vec::new();
                for (s1, p1) in target {
                    let sv = format!("S_d{tn}_{tp}_c{i}_s{}", s1.0);
                    b.declare(&sv, "Bool", format!("S[t{tn},t{tp},{i},n{j}.{}]", s1.0));
                    lhs.push(format!("(ite {sv} {} 0)", smt_rat(p1)));
                }
                let mut rhs = Vec::new();
                for g2 in 1..=k {
                    let iv = format!("I_d{tn}_{tp}_c{i}_g{g2}");
                    b.declare(&iv, "Bool", format!("I[t{tn},t{tp},{i},{g2}]"));
                    let hit = disj(
                        target
                            .iter()
                            .map(|(s1, _)| {
                                format!(
                                    "(and S_d{tn}_{tp}_c{i}_s{} {})",
                                    s1.0,
                                    r_id(*j, *s1, g2)
                                )
                            })
                            .collect(),
                    );
                    s_terms.push(format!("(= {iv} {hit})"));
                    rhs.push(format!("(ite {iv} {} 0)", lift_term(tp, i, g2)));
                }
                s_terms.push(format!("(> {} {})", sum(lhs), sum(rhs)));
                b.assert(format!("(=> (not {d}) {})", conj(s_terms)));
            }
        }
    }

    for (j, n) in samples.negatives().iter().enumerate() {
        for s in n.state_ids() {
            for i in 1..=k {
                let mut conjuncts = Vec::new();
                for (tn, (j2, src, _, _)) in neg_ts.iter().enumerate() {
                    if *j2 != j || *src != s {
                        continue;
                    }
                    let mut options = Vec::new();
                    for (tp, (sp, _, _)) in pos_ts.iter().enumerate() {
                        if let Some(d) = d_ids.get(&(tn, tp, i)) {
                            options.push(format!("(and {} {d})", member(*sp, i)));
                        }
                    }
                    conjuncts.push(disj(options));
                }
                b.assert(format!("(= {} {})", r_id(j, s, i), conj(conjuncts)));
            }
        }
        b.assert(format!("(not {})", r_id(j, n.start(), 1)));
    }

    b.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
            '"' => {
                // string literal (error messages); consume to closing quote
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                let mut s = String::from("\"");
                for c2 in chars.by_ref() {
                    s.push(c2);
                    if c2 == '"' {
                        break;
                    }
                }
                tokens.push(s);
            }
            c if c.is_whitespace() => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack
                    .pop()
                    .ok_or_else(|| SmtError::Malformed("unbalanced parentheses".into()))?;
                stack
                    .last_mut()
                    .ok_or_else(|| SmtError::Malformed("unbalanced parentheses".into()))?
                    .push(Sexp::List(done));
            }
            atom => stack
                .last_mut()
                .expect("non-empty stack")
                .push(Sexp::Atom(atom.to_string())),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Malformed("unterminated s-expression".into()));
    }
    Ok(stack.pop().unwrap())
}

/// Parses a numeral token, including decimal forms like `5.0` and `0.25`.
fn parse_numeral(s: &str) -> Option<Rational> {
    if let Some((int, frac)) = s.split_once('.') {
        let int: BigInt = if int.is_empty() { BigInt::zero() } else { int.parse().ok()? };
        if frac.is_empty() {
            return Some(Rational::from_integer(int));
        }
        let num: BigInt = frac.parse().ok()?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        Some(Rational::from_integer(int) + Rational::new(num, den))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Rational::from_integer(n))
    }
}

fn parse_value(e: &Sexp) -> Result<Value, SmtError> {
    match e {
        Sexp::Atom(a) => match a.as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            other => parse_numeral(other)
                .map(Value::Rat)
                .ok_or_else(|| SmtError::Malformed(format!("bad value `{other}`"))),
        },
        Sexp::List(items) => match &items[..] {
            [Sexp::Atom(op), a, b] if op == "/" => {
                let (Value::Rat(a), Value::Rat(b)) = (parse_value(a)?, parse_value(b)?) else {
                    return Err(SmtError::Malformed("non-numeric division".into()));
                };
                if b.is_zero() {
                    return Err(SmtError::Malformed("division by zero".into()));
                }
                Ok(Value::Rat(a / b))
            }
            [Sexp::Atom(op), a] if op == "-" => {
                let Value::Rat(a) = parse_value(a)? else {
                    return Err(SmtError::Malformed("non-numeric negation".into()));
                };
                Ok(Value::Rat(-a))
            }
            _ => Err(SmtError::Malformed(format!("unrecognized value {e:?}"))),
        },
    }
}

fn parse_output(out: &str) -> Result<SolverVerdict, SmtError> {
    let sexps = parse_sexps(&tokenize(out))?;
    let mut status = None;
    let mut assignment = BTreeMap::new();
    for e in &sexps {
        match e {
            Sexp::Atom(a) => match a.as_str() {
                "sat" => status = Some(Status::Sat),
                "unsat" => status = Some(Status::Unsat),
                "unknown" => status = Some(Status::Unknown),
                other => {
                    return Err(SmtError::Malformed(format!("unexpected token `{other}`")))
                }
            },
            Sexp::List(items) => {
                // skip (error "...") emitted for get-value after unsat
                if let [Sexp::Atom(kw), ..] = &items[..] {
                    if kw == "error" {
                        continue;
                    }
                }
                for pair in items {
                    let Sexp::List(kv) = pair else {
                        return Err(SmtError::Malformed(format!("bad binding {pair:?}")));
                    };
                    let [Sexp::Atom(name), val] = &kv[..] else {
                        return Err(SmtError::Malformed(format!("bad binding {kv:?}")));
                    };
                    assignment.insert(name.clone(), parse_value(val)?);
                }
            }
        }
    }
    let status = status.ok_or_else(|| SmtError::Malformed("no check-sat verdict".into()))?;
    Ok(SolverVerdict { status, assignment })
}

/// Runs the solver on the script with a wall-clock timeout, collecting the
/// verdict and (when sat) the full model assignment.
pub fn solve(script: &ConstraintScript, cfg: &SolverConfig) -> Result<SolverVerdict, SmtError> {
    let mut child = Command::new(&cfg.cmd[0])
        .args(&cfg.cmd[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = script.text.clone();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
        // dropping stdin closes the pipe
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });

    let deadline = Instant::now() + cfg.timeout;
    loop {
        match child.try_wait()? {
            Some(_) => break,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SmtError::Timeout(cfg.timeout));
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    if out.trim().is_empty() {
        let mut err = String::new();
        if let Some(mut stderr) = child.stderr.take() {
            let _ = stderr.read_to_string(&mut err);
        }
        return Err(SmtError::Malformed(format!("empty solver output; stderr: {err}")));
    }
    parse_output(&out)
}

fn get_bool(verdict: &SolverVerdict, id: &str) -> Result<bool, SmtError> {
    match verdict.assignment.get(id) {
        Some(Value::Bool(b)) => Ok(*b),
        other => Err(SmtError::Malformed(format!(
            "expected boolean for `{id}`, got {other:?}"
        ))),
    }
}

fn get_rat(verdict: &SolverVerdict, id: &str) -> Result<Rational, SmtError> {
    match verdict.assignment.get(id) {
        Some(Value::Rat(r)) => Ok(r.clone()),
        other => Err(SmtError::Malformed(format!(
            "expected rational for `{id}`, got {other:?}"
        ))),
    }
}

/// Strict decoding of a sat partition model: exactly one class boolean true
/// per state; anything else signals an encoding bug and aborts.
pub fn decode_partition(
    verdict: &SolverVerdict,
    samples: &SampleSet,
    k: usize,
) -> Result<Partition, SmtError> {
    let mut class_of = Vec::with_capacity(samples.n_pos_states());
    for s in 0..samples.n_pos_states() {
        let mut chosen = None;
        for i in 1..=k {
            if get_bool(verdict, &v_id(s, i))? {
                if chosen.replace(i - 1).is_some() {
                    return Err(SmtError::Unexpected(format!(
                        "state {s} assigned to two classes"
                    )));
                }
            }
        }
        class_of.push(chosen.ok_or_else(|| {
            SmtError::Unexpected(format!("state {s} assigned to no class"))
        })?);
    }
    Partition::new(samples, class_of).map_err(|e| SmtError::Unexpected(e.to_string()))
}

/// Strict decoding of a sat stochastic-partition model: every grouping row
/// must sum to exactly 0 or exactly 1 after exact rational parsing.
pub fn decode_stochastic(
    verdict: &SolverVerdict,
    samples: &SampleSet,
    k: usize,
) -> Result<StochasticPartition, SmtError> {
    let mut grouping: Vec<BTreeMap<usize, BTreeMap<usize, Rational>>> =
        vec![BTreeMap::new(); samples.n_pos_states()];
    for (s, rows) in grouping.iter_mut().enumerate() {
        for g in 1..=k {
            let mut row = BTreeMap::new();
            let mut total = Rational::zero();
            for j in 1..=k {
                let v = get_rat(verdict, &sv_id(s, g, j))?;
                if v.is_negative() {
                    return Err(SmtError::Unexpected(format!(
                        "negative grouping probability for state {s}"
                    )));
                }
                total += &v;
                if !v.is_zero() {
                    row.insert(j - 1, v);
                }
            }
            if total.is_one() {
                rows.insert(g - 1, row);
            } else if !total.is_zero() {
                return Err(SmtError::Unexpected(format!(
                    "grouping row for state {s} given group {g} sums to neither 0 nor 1"
                )));
            }
        }
    }
    StochasticPartition::new(samples, k, 0, grouping)
        .map_err(|e| SmtError::Unexpected(e.to_string()))
}
