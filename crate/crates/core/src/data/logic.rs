//! Logic programs: 12 classes of reasoning patterns over single-character
//! predicates and constants, a depth-limited backward-chaining oracle with
//! negation as failure that certifies every generated label, and a
//! round-trippable text format.

use super::vocab::Vocabulary;
use super::{Context, Example, SymbolId};
use crate::error::{Error, Result};
use crate::rng::Stream;
use std::collections::HashMap;
use std::fmt;

pub const DEFAULT_DEPTH_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Const(char),
    Var(char),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) | Term::Var(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: char,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|t| t.to_string()).collect();
        write!(f, "{}({})", self.pred, args.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not {}", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

/// head <- body. A fact is a clause with an empty body (possibly non-ground,
/// e.g. "p(X)." holds of everything).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.body.is_empty() {
            write!(f, "{}.", self.head)
        } else {
            let body: Vec<String> = self.body.iter().map(|l| l.to_string()).collect();
            write!(f, "{} :- {}.", self.head, body.join(", "))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicProgram {
    pub rules: Vec<Clause>,
    pub query: Atom,
    pub label: bool,
    /// Rule indices a derivation inspects, in order of use. For entailed
    /// queries this replays to the label through the oracle.
    pub proof: Vec<usize>,
}

// ── Oracle: depth-limited backward chaining with NBF ───────────────────

type Subst = HashMap<char, Term>;

fn walk(t: Term, s: &Subst) -> Term {
    match t {
        Term::Var(v) => match s.get(&v) {
            Some(&bound) => walk(bound, s),
            None => t,
        },
        _ => t,
    }
}

fn unify_atoms(a: &Atom, b: &Atom, s: &Subst) -> Option<Subst> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = s.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        let (x, y) = (walk(*x, &s), walk(*y, &s));
        match (x, y) {
            (Term::Const(c1), Term::Const(c2)) => {
                if c1 != c2 {
                    return None;
                }
            }
            (Term::Var(v), other) | (other, Term::Var(v)) => {
                s.insert(v, other);
            }
        }
    }
    Some(s)
}

fn apply(atom: &Atom, s: &Subst) -> Atom {
    Atom { pred: atom.pred, args: atom.args.iter().map(|&t| walk(t, s)).collect() }
}

/// Rename clause variables apart with a numbered namespace so recursive
/// calls never capture bindings. Uses chars above the letter range.
fn rename_clause(c: &Clause, gen: &mut u32) -> Clause {
    let mut map: HashMap<char, char> = HashMap::new();
    let mut fresh = |v: char, gen: &mut u32| -> char {
        *map.entry(v).or_insert_with(|| {
            *gen += 1;
            char::from_u32(0x1000 + *gen).expect("fresh var")
        })
    };
    let rename_term = |t: Term, map: &mut dyn FnMut(char) -> char| match t {
        Term::Var(v) => Term::Var(map(v)),
        c => c,
    };
    let rewrite = |a: &Atom, gen: &mut u32, fresh: &mut dyn FnMut(char, &mut u32) -> char| Atom {
        pred: a.pred,
        args: a.args.iter().map(|&t| rename_term(t, &mut |v| fresh(v, gen))).collect(),
    };
    Clause {
        head: rewrite(&c.head, gen, &mut fresh),
        body: c
            .body
            .iter()
            .map(|l| Literal { atom: rewrite(&l.atom, gen, &mut fresh), negated: l.negated })
            .collect(),
    }
}

pub struct EntailResult {
    pub entailed: bool,
    /// Rule indices of one successful derivation (preorder), when entailed.
    pub proof: Vec<usize>,
    /// Set when the search was cut off by the depth limit anywhere.
    pub depth_exceeded: bool,
}

struct Prover<'a> {
    rules: &'a [Clause],
    depth_exceeded: bool,
    var_gen: u32,
}

impl<'a> Prover<'a> {
    /// All solutions of `goal` under `s` within `depth`; collects at most
    /// `cap` substitutions. Proof chains record rule indices in preorder.
    fn solve(&mut self, goal: &Atom, s: &Subst, depth: usize, cap: usize) -> Vec<(Subst, Vec<usize>)> {
        if depth == 0 {
            self.depth_exceeded = true;
            return vec![];
        }
        let mut out = Vec::new();
        for (ri, rule) in self.rules.iter().enumerate() {
            let rule = rename_clause(rule, &mut self.var_gen);
            let Some(s1) = unify_atoms(goal, &rule.head, s) else { continue };
            let mut states: Vec<(Subst, Vec<usize>)> = vec![(s1, vec![ri])];
            for lit in &rule.body {
                let mut next = Vec::new();
                for (st, chain) in &states {
                    let atom = apply(&lit.atom, st);
                    if lit.negated {
                        // Negation by failure: succeeds iff no derivation.
                        let subs = self.solve(&atom, st, depth - 1, 1);
                        if subs.is_empty() {
                            next.push((st.clone(), chain.clone()));
                        }
                    } else {
                        for (s2, sub_chain) in self.solve(&atom, st, depth - 1, cap) {
                            let mut chain2 = chain.clone();
                            chain2.extend(sub_chain);
                            next.push((s2, chain2));
                        }
                    }
                }
                states = next;
                if states.is_empty() {
                    break;
                }
            }
            out.extend(states);
            if out.len() >= cap {
                out.truncate(cap);
                return out;
            }
        }
        out
    }
}

/// Does `rules ⊢ query`? The query must be ground.
pub fn logic_entails(rules: &[Clause], query: &Atom, depth_limit: usize) -> Result<EntailResult> {
    if !query.is_ground() {
        return Err(Error::argument(format!("query {query} is not ground")));
    }
    let mut prover = Prover { rules, depth_exceeded: false, var_gen: 0 };
    let solutions = prover.solve(query, &Subst::new(), depth_limit, 1);
    match solutions.into_iter().next() {
        Some((_, proof)) => {
            Ok(EntailResult { entailed: true, proof, depth_exceeded: prover.depth_exceeded })
        }
        None => Ok(EntailResult { entailed: false, proof: vec![], depth_exceeded: prover.depth_exceeded }),
    }
}

// ── Generation ─────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicClass {
    Facts,
    Unification,
    OneStep,
    TwoSteps,
    ThreeSteps,
    And,
    Or,
    Transitivity,
    OneStepNbf,
    TwoStepsNbf,
    AndNbf,
    OrNbf,
}

pub const LOGIC_CLASSES: [LogicClass; 12] = [
    LogicClass::Facts,
    LogicClass::Unification,
    LogicClass::OneStep,
    LogicClass::TwoSteps,
    LogicClass::ThreeSteps,
    LogicClass::And,
    LogicClass::Or,
    LogicClass::Transitivity,
    LogicClass::OneStepNbf,
    LogicClass::TwoStepsNbf,
    LogicClass::AndNbf,
    LogicClass::OrNbf,
];

impl LogicClass {
    pub fn name(&self) -> &'static str {
        match self {
            LogicClass::Facts => "facts",
            LogicClass::Unification => "unification",
            LogicClass::OneStep => "1step",
            LogicClass::TwoSteps => "2steps",
            LogicClass::ThreeSteps => "3steps",
            LogicClass::And => "and",
            LogicClass::Or => "or",
            LogicClass::Transitivity => "transitivity",
            LogicClass::OneStepNbf => "1step_nbf",
            LogicClass::TwoStepsNbf => "2steps_nbf",
            LogicClass::AndNbf => "and_nbf",
            LogicClass::OrNbf => "or_nbf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        LOGIC_CLASSES.iter().copied().find(|c| c.name() == s)
    }

    pub fn index(&self) -> usize {
        LOGIC_CLASSES.iter().position(|c| c == self).unwrap()
    }
}

fn rand_lower(stream: &mut Stream) -> char {
    (b'a' + stream.below(26) as u8) as char
}

fn rand_upper(stream: &mut Stream) -> char {
    (b'A' + stream.below(26) as u8) as char
}

/// k distinct lowercase characters.
fn distinct_lower(k: usize, stream: &mut Stream) -> Vec<char> {
    let mut pool: Vec<char> = (b'a'..=b'z').map(|b| b as char).collect();
    stream.shuffle(&mut pool);
    pool.truncate(k);
    pool
}

fn consts(arity: usize, stream: &mut Stream) -> Vec<Term> {
    (0..arity).map(|_| Term::Const(rand_lower(stream))).collect()
}

fn vars(arity: usize, stream: &mut Stream) -> Vec<Term> {
    let mut seen = Vec::new();
    while seen.len() < arity {
        let v = rand_upper(stream);
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen.into_iter().map(Term::Var).collect()
}

fn fact(pred: char, args: Vec<Term>) -> Clause {
    Clause { head: Atom { pred, args }, body: vec![] }
}

fn rule(pred: char, head_args: Vec<Term>, body: Vec<(char, Vec<Term>, bool)>) -> Clause {
    Clause {
        head: Atom { pred, args: head_args },
        body: body
            .into_iter()
            .map(|(p, a, neg)| Literal { atom: Atom { pred: p, args: a }, negated: neg })
            .collect(),
    }
}

/// Core of one program: shared context plus a positive and a negative query.
struct Template {
    rules: Vec<Clause>,
    pos: Atom,
    neg: Atom,
    /// Intended inspection chain for the non-entailed query (pre-shuffle
    /// context indices); entailed queries take the oracle's proof instead.
    neg_supports: Vec<usize>,
}

fn chain_template(steps: usize, arity: usize, stream: &mut Stream) -> Template {
    // predicates: p0 <- p1 <- ... <- p_steps, terminal fact p_steps(c..).
    let preds = distinct_lower(steps + 2, stream);
    let cs = consts(arity, stream);
    let mut rules = Vec::new();
    for i in 0..steps {
        let v = vars(arity, stream);
        rules.push(rule(preds[i], v.clone(), vec![(preds[i + 1], v.clone(), false)]));
    }
    rules.push(fact(preds[steps], cs.clone()));
    // Distractor fact under an unused predicate.
    rules.push(fact(preds[steps + 1], consts(arity, stream)));
    let pos = Atom { pred: preds[0], args: cs.clone() };
    // Negative: same chain head, different constants.
    let mut neg_args;
    loop {
        neg_args = consts(arity, stream);
        if neg_args != cs {
            break;
        }
    }
    let neg = Atom { pred: preds[0], args: neg_args };
    let chain: Vec<usize> = (0..=steps).collect();
    Template { rules, pos, neg, neg_supports: chain }
}

fn template(class: LogicClass, arity: usize, stream: &mut Stream) -> Result<Template> {
    if class == LogicClass::Transitivity && arity != 2 {
        return Err(Error::argument("transitivity requires arity 2".to_string()));
    }
    Ok(match class {
        LogicClass::Facts => {
            let preds = distinct_lower(3, stream);
            let f0 = fact(preds[0], consts(arity, stream));
            let f1 = fact(preds[1], consts(arity, stream));
            let f2 = fact(preds[2], consts(arity, stream));
            let pos = f0.head.clone();
            let mut neg_args;
            loop {
                neg_args = consts(arity, stream);
                if neg_args != pos.args {
                    break;
                }
            }
            let neg = Atom { pred: preds[0], args: neg_args };
            Template {
                rules: vec![f0, f1, f2],
                pos,
                neg,
                neg_supports: vec![0],
            }
        }
        LogicClass::Unification => {
            let preds = distinct_lower(3, stream);
            let f0 = fact(preds[0], vars(arity, stream));
            let f1 = fact(preds[1], consts(arity, stream));
            let f2 = fact(preds[2], consts(arity, stream));
            let pos = Atom { pred: preds[0], args: consts(arity, stream) };
            // A ground fact's predicate with fresh constants fails.
            let mut neg_args;
            loop {
                neg_args = consts(arity, stream);
                if neg_args != f1.head.args {
                    break;
                }
            }
            let neg = Atom { pred: preds[1], args: neg_args };
            Template {
                rules: vec![f0, f1, f2],
                pos,
                neg,
                neg_supports: vec![1],
            }
        }
        LogicClass::OneStep => chain_template(1, arity, stream),
        LogicClass::TwoSteps => chain_template(2, arity, stream),
        LogicClass::ThreeSteps => chain_template(3, arity, stream),
        LogicClass::And => {
            let preds = distinct_lower(4, stream);
            let v = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let r = rule(
                preds[0],
                v.clone(),
                vec![(preds[1], v.clone(), false), (preds[2], v.clone(), false)],
            );
            let rules = vec![
                r,
                fact(preds[1], ca.clone()),
                fact(preds[2], ca.clone()),
                // Only one conjunct holds of cb.
                fact(preds[1], cb.clone()),
                fact(preds[3], consts(arity, stream)),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 3],
            }
        }
        LogicClass::Or => {
            let preds = distinct_lower(4, stream);
            let v1 = vars(arity, stream);
            let v2 = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let branch = stream.below(2);
            let rules = vec![
                rule(preds[0], v1.clone(), vec![(preds[1], v1.clone(), false)]),
                rule(preds[0], v2.clone(), vec![(preds[2], v2.clone(), false)]),
                fact(preds[if branch == 0 { 1 } else { 2 }], ca.clone()),
                fact(preds[3], consts(arity, stream)),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 1],
            }
        }
        LogicClass::Transitivity => {
            let preds = distinct_lower(3, stream);
            let cs = distinct_lower(3, stream);
            let (x, y, z) = ('X', 'Y', 'Z');
            let rules = vec![
                rule(
                    preds[0],
                    vec![Term::Var(x), Term::Var(y)],
                    vec![
                        (preds[1], vec![Term::Var(x), Term::Var(z)], false),
                        (preds[1], vec![Term::Var(z), Term::Var(y)], false),
                    ],
                ),
                fact(preds[1], vec![Term::Const(cs[0]), Term::Const(cs[1])]),
                fact(preds[1], vec![Term::Const(cs[1]), Term::Const(cs[2])]),
                fact(preds[2], consts(2, stream)),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: vec![Term::Const(cs[0]), Term::Const(cs[2])] },
                neg: Atom { pred: preds[0], args: vec![Term::Const(cs[2]), Term::Const(cs[0])] },
                neg_supports: vec![0, 1, 2],
            }
        }
        LogicClass::OneStepNbf => {
            let preds = distinct_lower(3, stream);
            let v = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let rules = vec![
                rule(preds[0], v.clone(), vec![(preds[1], v.clone(), true)]),
                fact(preds[1], cb.clone()),
                fact(preds[2], consts(arity, stream)),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 1],
            }
        }
        LogicClass::TwoStepsNbf => {
            let preds = distinct_lower(4, stream);
            let v1 = vars(arity, stream);
            let v2 = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let rules = vec![
                rule(preds[0], v1.clone(), vec![(preds[1], v1.clone(), false)]),
                rule(preds[1], v2.clone(), vec![(preds[2], v2.clone(), true)]),
                fact(preds[2], cb.clone()),
                fact(preds[3], consts(arity, stream)),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 1, 2],
            }
        }
        LogicClass::AndNbf => {
            let preds = distinct_lower(3, stream);
            let v = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let rules = vec![
                rule(
                    preds[0],
                    v.clone(),
                    vec![(preds[1], v.clone(), false), (preds[2], v.clone(), true)],
                ),
                fact(preds[1], ca.clone()),
                fact(preds[1], cb.clone()),
                fact(preds[2], cb.clone()),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 2, 3],
            }
        }
        LogicClass::OrNbf => {
            let preds = distinct_lower(3, stream);
            let v1 = vars(arity, stream);
            let v2 = vars(arity, stream);
            let ca = consts(arity, stream);
            let mut cb;
            loop {
                cb = consts(arity, stream);
                if cb != ca {
                    break;
                }
            }
            let rules = vec![
                rule(preds[0], v1.clone(), vec![(preds[1], v1.clone(), false)]),
                rule(preds[0], v2.clone(), vec![(preds[2], v2.clone(), true)]),
                fact(preds[2], cb.clone()),
            ];
            Template {
                rules,
                pos: Atom { pred: preds[0], args: ca },
                neg: Atom { pred: preds[0], args: cb },
                neg_supports: vec![0, 1, 2],
            }
        }
    })
}

/// Generate `n` programs of one class; each is emitted twice, once entailed
/// and once not, with oracle-certified labels and proof-derived supports.
pub fn gen_logic(
    class: LogicClass,
    n: usize,
    arity: usize,
    stream: &mut Stream,
) -> Result<Vec<LogicProgram>> {
    if !(1..=2).contains(&arity) {
        return Err(Error::argument(format!("arity {arity} not in {{1, 2}}")));
    }
    if class == LogicClass::Transitivity && arity != 2 {
        return Err(Error::argument("transitivity cannot be generated with arity 1".to_string()));
    }
    let mut out = Vec::with_capacity(2 * n);
    let mut made = 0;
    let mut attempts = 0;
    while made < n {
        attempts += 1;
        if attempts > 50 * n + 100 {
            return Err(Error::argument(format!(
                "could not generate {n} valid {} programs",
                class.name()
            )));
        }
        let t = template(class, arity, stream)?;
        // Shuffle the context and remap the intended supports.
        let mut order: Vec<usize> = (0..t.rules.len()).collect();
        stream.shuffle(&mut order);
        let mut rules = vec![t.rules[0].clone(); t.rules.len()];
        let mut position = vec![0usize; t.rules.len()];
        for (new_i, &old_i) in order.iter().enumerate() {
            rules[new_i] = t.rules[old_i].clone();
            position[old_i] = new_i;
        }
        // Certify both labels with the oracle; reject accidental flips.
        let pos_res = logic_entails(&rules, &t.pos, DEFAULT_DEPTH_LIMIT)?;
        let neg_res = logic_entails(&rules, &t.neg, DEFAULT_DEPTH_LIMIT)?;
        if !pos_res.entailed || neg_res.entailed {
            continue;
        }
        out.push(LogicProgram {
            rules: rules.clone(),
            query: t.pos,
            label: true,
            proof: pos_res.proof,
        });
        out.push(LogicProgram {
            rules,
            query: t.neg,
            label: false,
            proof: t.neg_supports.iter().map(|&i| position[i]).collect(),
        });
        made += 1;
    }
    Ok(out)
}

// ── Text format ────────────────────────────────────────────────────────

/// One program as its rule lines plus a "? query. label" line.
pub fn format_program(p: &LogicProgram) -> String {
    let mut s = String::new();
    for r in &p.rules {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s.push_str(&format!("? {}. {}\n", p.query, if p.label { 1 } else { 0 }));
    s
}

pub fn format_programs(ps: &[LogicProgram]) -> String {
    ps.iter().map(format_program).collect::<Vec<_>>().join("\n")
}

fn parse_term(s: &str, line: usize) -> Result<Term> {
    let s = s.trim();
    let mut chars = s.chars();
    let (Some(c), None) = (chars.next(), chars.next()) else {
        return Err(Error::Parse { line, msg: format!("term {s:?} is not a single character") });
    };
    if c.is_ascii_lowercase() {
        Ok(Term::Const(c))
    } else if c.is_ascii_uppercase() {
        Ok(Term::Var(c))
    } else {
        Err(Error::Parse { line, msg: format!("term {s:?} must be a letter") })
    }
}

fn parse_atom(s: &str, line: usize) -> Result<Atom> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| Error::Parse { line, msg: format!("atom {s:?} missing '('") })?;
    if !s.ends_with(')') {
        return Err(Error::Parse { line, msg: format!("atom {s:?} missing ')'") });
    }
    let pred_str = s[..open].trim();
    let mut pred_chars = pred_str.chars();
    let (Some(pred), None) = (pred_chars.next(), pred_chars.next()) else {
        return Err(Error::Parse { line, msg: format!("predicate {pred_str:?} is not one character") });
    };
    let inner = &s[open + 1..s.len() - 1];
    let args: Vec<Term> =
        inner.split(',').map(|t| parse_term(t, line)).collect::<Result<_>>()?;
    if args.is_empty() || args.len() > 2 {
        return Err(Error::Parse { line, msg: format!("atom {s:?} must have arity 1 or 2") });
    }
    Ok(Atom { pred, args })
}

fn parse_literal(s: &str, line: usize) -> Result<Literal> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("not ") {
        Ok(Literal { atom: parse_atom(rest, line)?, negated: true })
    } else {
        Ok(Literal { atom: parse_atom(s, line)?, negated: false })
    }
}

fn parse_clause(s: &str, line: usize) -> Result<Clause> {
    let s = s.trim().strip_suffix('.').ok_or_else(|| Error::Parse {
        line,
        msg: format!("clause {s:?} missing trailing '.'"),
    })?;
    match s.split_once(":-") {
        None => Ok(Clause { head: parse_atom(s, line)?, body: vec![] }),
        Some((head, body)) => {
            let head = parse_atom(head, line)?;
            // Split on commas outside parentheses.
            let mut parts = Vec::new();
            let mut depth = 0;
            let mut start = 0;
            for (i, c) in body.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    ',' if depth == 0 => {
                        parts.push(&body[start..i]);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            parts.push(&body[start..]);
            let body: Vec<Literal> =
                parts.into_iter().map(|p| parse_literal(p, line)).collect::<Result<_>>()?;
            Ok(Clause { head, body })
        }
    }
}

/// Inverse of [`format_programs`].
pub fn parse_programs(text: &str) -> Result<Vec<LogicProgram>> {
    let mut out = Vec::new();
    let mut rules: Vec<Clause> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('?') {
            let rest = rest.trim();
            let (query_str, label_str) = rest.rsplit_once(' ').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "query line must end with a 0/1 label".to_string(),
            })?;
            let label = match label_str.trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("label {other:?} must be 0 or 1"),
                    })
                }
            };
            let query_str = query_str.trim().strip_suffix('.').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "query atom must end with '.'".to_string(),
            })?;
            let query = parse_atom(query_str, line_no)?;
            out.push(LogicProgram { rules: std::mem::take(&mut rules), query, label, proof: vec![] });
        } else {
            rules.push(parse_clause(line, line_no)?);
        }
    }
    if !rules.is_empty() {
        return Err(Error::Parse { line: text.lines().count(), msg: "trailing rules without a query line".to_string() });
    }
    Ok(out)
}

// ── Tokenization for the models ────────────────────────────────────────

fn atom_tokens(a: &Atom, out: &mut Vec<String>) {
    out.push(a.pred.to_string());
    out.push("(".to_string());
    for (i, t) in a.args.iter().enumerate() {
        if i > 0 {
            out.push(",".to_string());
        }
        out.push(t.to_string());
    }
    out.push(")".to_string());
}

pub fn clause_tokens(c: &Clause) -> Vec<String> {
    let mut out = Vec::new();
    atom_tokens(&c.head, &mut out);
    if !c.body.is_empty() {
        out.push(":-".to_string());
        for (i, l) in c.body.iter().enumerate() {
            if i > 0 {
                out.push(",".to_string());
            }
            if l.negated {
                out.push("not".to_string());
            }
            atom_tokens(&l.atom, &mut out);
        }
    }
    out
}

pub const TRUE_TOKEN: &str = "true";
pub const FALSE_TOKEN: &str = "false";

/// Tokenized (context, query, answer) triple for the memory network.
pub fn program_to_example(p: &LogicProgram, vocab: &mut Vocabulary) -> Example {
    let sentences: Vec<Vec<SymbolId>> = p
        .rules
        .iter()
        .map(|c| clause_tokens(c).iter().map(|t| vocab.intern(t)).collect())
        .collect();
    let mut qtok = Vec::new();
    atom_tokens(&p.query, &mut qtok);
    let query: Vec<SymbolId> = qtok.iter().map(|t| vocab.intern(t)).collect();
    let answer = vocab.intern(if p.label { TRUE_TOKEN } else { FALSE_TOKEN });
    Example {
        context: Context::Sentences(sentences),
        query,
        answer,
        supports: Some(p.proof.clone()),
        task: "logic".to_string(),
    }
}
