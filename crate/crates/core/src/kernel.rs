//! The trusted checker.
//!
//! A script is checked step by step against a [`RuleSet`] and a [`Registry`]
//! of previously checked theorems. Every `have` either passes or produces a
//! failure naming its step number (depth-first over nested blocks) and what
//! was tried.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::rewrite::{normalize_with_fuel, EngineError, Provenance, Rule, RuleSet, SideCondition};
use crate::script::{Branch, ExtVars, Hypothesis, Judgment, Justification, ProofScript, ProofStep};
use crate::term::{
    defined_names, free_vars, fresh_vars, match_into, navigate, Name, Position, Step, Substitution, Term,
};

pub const AXIOM_VIII: &str = "VIII";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail { step: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub id: String,
    pub verdict: Verdict,
    pub steps: usize,
    pub elapsed: Duration,
}

impl CheckReport {
    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn fail(id: &str, step: usize, reason: impl Into<String>) -> CheckReport {
        CheckReport {
            id: id.into(),
            verdict: Verdict::Fail { step, reason: reason.into() },
            steps: 0,
            elapsed: Duration::ZERO,
        }
    }

    /// `THEOREM <id> PASS` or `THEOREM <id> FAIL <step#> <reason>`.
    pub fn line(&self) -> String {
        match &self.verdict {
            Verdict::Pass => format!("THEOREM {} PASS", self.id),
            Verdict::Fail { step, reason } => format!("THEOREM {} FAIL {} {}", self.id, step, reason),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoremRecord {
    pub id: String,
    pub title: String,
    /// Universally quantified over their free variables.
    pub statements: Vec<Judgment>,
    pub hypotheses: Vec<Hypothesis>,
    pub dependencies: Vec<String>,
    pub file: Option<String>,
}

impl TheoremRecord {
    pub fn from_script(script: &ProofScript, file: Option<String>) -> TheoremRecord {
        TheoremRecord {
            id: script.id.clone(),
            title: script.title.clone(),
            statements: script.proves.clone(),
            hypotheses: script.hypotheses.clone(),
            dependencies: script.uses.clone(),
            file,
        }
    }

    fn axiom_viii() -> TheoremRecord {
        TheoremRecord {
            id: AXIOM_VIII.into(),
            title: "P1 and P2 are distinct".into(),
            statements: vec![Judgment::NotEqual(Term::p1(), Term::p2())],
            hypotheses: vec![],
            dependencies: vec![],
            file: None,
        }
    }

    pub fn is_refutation(&self) -> bool {
        self.statements.contains(&Judgment::Falsum)
    }

    /// `lhs = rhs` for hypotheses, statements otherwise.
    pub fn summary(&self) -> String {
        let stmts: Vec<String> = self.statements.iter().map(|j| j.to_string()).collect();
        if self.hypotheses.is_empty() {
            stmts.join("; ")
        } else {
            let hyps: Vec<String> = self.hypotheses.iter().map(|h| h.to_string()).collect();
            format!("{} ⇒ {}", hyps.join(", "), stmts.join("; "))
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
    #[error("`{id}` depends on `{dep}`, which is not registered")]
    DependencyMissing { id: String, dep: String },
    #[error("`{0}` is already registered with a different statement")]
    IdConflict(String),
    #[error("`{0}` has no passing check report")]
    NotPassing(String),
    #[error("`{id}`: {reason}")]
    BadInstantiation { id: String, reason: String },
    #[error("`{id}` does not state {equation}")]
    StatementMismatch { id: String, equation: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Append-only map of checked theorems. Axiom VIII is always present.
#[derive(Clone, Debug)]
pub struct Registry {
    records: BTreeMap<String, TheoremRecord>,
    order: Vec<String>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new()
    }
}

impl Registry {
    pub fn new() -> Registry {
        let viii = TheoremRecord::axiom_viii();
        Registry { order: vec![viii.id.clone()], records: BTreeMap::from([(viii.id.clone(), viii)]) }
    }

    pub fn get(&self, id: &str) -> Option<&TheoremRecord> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn register(&mut self, record: TheoremRecord, report: &CheckReport) -> Result<(), KernelError> {
        if !report.is_pass() || report.id != record.id {
            return Err(KernelError::NotPassing(record.id));
        }
        if let Some(old) = self.records.get(&record.id) {
            if old.statements == record.statements && old.hypotheses == record.hypotheses {
                return Ok(());
            }
            return Err(KernelError::IdConflict(record.id));
        }
        if let Some(dep) = record.dependencies.iter().find(|d| !self.contains(d)) {
            return Err(KernelError::DependencyMissing { id: record.id.clone(), dep: dep.clone() });
        }
        self.order.push(record.id.clone());
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    /// Statement `index` (1-based; optional when there is only one) with
    /// some of its variables replaced.
    pub fn instantiate(&self, id: &str, index: Option<usize>, inst: &[(Name, Term)]) -> Result<Judgment, KernelError> {
        let rec = self.get(id).ok_or_else(|| KernelError::UnknownTheorem(id.into()))?;
        let stmt = match index {
            Some(i) if i >= 1 && i <= rec.statements.len() => &rec.statements[i - 1],
            None if rec.statements.len() == 1 => &rec.statements[0],
            _ => {
                return Err(KernelError::BadInstantiation {
                    id: id.into(),
                    reason: format!("choose a statement 1..{}", rec.statements.len()),
                })
            }
        };
        instantiate_judgment(id, stmt, inst)
    }
}

fn instantiate_judgment(id: &str, stmt: &Judgment, inst: &[(Name, Term)]) -> Result<Judgment, KernelError> {
    let vars: BTreeSet<Name> = stmt.terms().into_iter().flat_map(free_vars).collect();
    let mut s = Substitution::new();
    for (v, t) in inst {
        if !vars.contains(v) {
            return Err(KernelError::BadInstantiation { id: id.into(), reason: format!("`{v}` is not a variable of the statement") });
        }
        if s.get(v).is_some() {
            return Err(KernelError::BadInstantiation { id: id.into(), reason: format!("`{v}` bound twice") });
        }
        if t.is_pattern_var() || free_vars(t).iter().any(|n| n.starts_with('$')) {
            return Err(KernelError::BadInstantiation { id: id.into(), reason: "pattern variables in instantiation".into() });
        }
        s.bind(v, t.clone());
    }
    Ok(stmt.map_terms(|t| crate::term::substitute(t, &s)))
}

fn to_pattern(t: &Term) -> Term {
    t.map_leaves(&|leaf| match leaf {
        Term::Var(v) if !v.starts_with('$') => Some(Term::var(&format!("${v}"))),
        _ => None,
    })
}

/// Renames variables to `$0, $1, ...` in order of first occurrence.
fn canonical(l: &Term, r: &Term) -> (Term, Term) {
    fn collect(t: &Term, out: &mut Vec<Name>) {
        match t {
            Term::Var(v) if !out.contains(v) => out.push(v.clone()),
            _ => t.children().into_iter().for_each(|(_, c)| collect(c, out)),
        }
    }
    let mut order = Vec::new();
    collect(l, &mut order);
    collect(r, &mut order);
    let s = Substitution(order.iter().enumerate().map(|(i, v)| (v.clone(), Term::var(&format!("${i}")))).collect());
    (crate::term::substitute(l, &s), crate::term::substitute(r, &s))
}

/// Extends `rs` with `lhs → rhs`, which must be (up to renaming) an equality
/// stated by the registered theorem `id`.
pub fn register_derived_rule(rs: &RuleSet, registry: &Registry, id: &str, lhs: Term, rhs: Term) -> Result<RuleSet, KernelError> {
    let rec = registry.get(id).ok_or_else(|| KernelError::UnknownTheorem(id.into()))?;
    let want = canonical(&lhs, &rhs);
    let idx = rec.statements.iter().position(|j| match j {
        Judgment::Equal(s, t) => {
            let (s, t) = (to_pattern(s), to_pattern(t));
            canonical(&s, &t) == want || canonical(&t, &s) == want
        }
        _ => false,
    });
    let Some(i) = idx else {
        return Err(KernelError::StatementMismatch { id: id.into(), equation: format!("{lhs} = {rhs}") });
    };
    let name = if rec.statements.len() == 1 { id.to_string() } else { format!("{id}#{}", i + 1) };
    let mut out = rs.clone();
    out.push_before_definitions(Rule::new(&name, lhs, rhs, Provenance::Derived(id.into()))?)?;
    Ok(out)
}

#[derive(Clone, Debug)]
struct Equation {
    name: String,
    lhs: Term,
    rhs: Term,
    side: Option<SideCondition>,
}

impl Equation {
    fn relates(&self, from: &Term, to: &Term) -> bool {
        let mut s = Substitution::new();
        match_into(&self.lhs, from, &mut s)
            && match_into(&self.rhs, to, &mut s)
            && self.side.as_ref().is_none_or(|c| c.holds(&s))
    }

    fn cited_by(&self, cite: &str) -> bool {
        self.name == cite || self.name.split('#').next() == Some(cite)
    }
}

#[derive(Clone, Debug)]
struct Fact {
    label: String,
    judgment: Judgment,
    depth: usize,
}

#[derive(Debug)]
struct Failure {
    step: usize,
    reason: String,
}

type Checked<T = ()> = Result<T, Failure>;

fn fail<T>(step: usize, reason: impl Into<String>) -> Checked<T> {
    Err(Failure { step, reason: reason.into() })
}

/// Innermost position outside of which `a` and `b` coincide.
fn difference(a: &Term, b: &Term) -> Vec<Step> {
    let mut path = Vec::new();
    let (mut a, mut b) = (a, b);
    loop {
        let (ca, cb) = (a.children(), b.children());
        if std::mem::discriminant(a) != std::mem::discriminant(b) || ca.len() != cb.len() || ca.is_empty() {
            return path;
        }
        let differing: Vec<usize> = (0..ca.len()).filter(|&i| ca[i].1 != cb[i].1).collect();
        if differing.len() != 1 {
            return path;
        }
        let i = differing[0];
        path.push(ca[i].0);
        a = ca[i].1;
        b = cb[i].1;
    }
}

struct Checker<'a> {
    script: &'a ProofScript,
    registry: &'a Registry,
    rs: &'a RuleSet,
    declared: BTreeSet<Name>,
    lets: Vec<(Name, Term)>,
    base: Vec<Equation>,
    facts: Vec<Fact>,
    counter: usize,
}

pub fn check_script(script: &ProofScript, registry: &Registry, rs: &RuleSet) -> CheckReport {
    let start = Instant::now();
    let mut ck = Checker {
        script,
        registry,
        rs,
        declared: BTreeSet::from([Name::from("I")]),
        lets: vec![],
        base: vec![],
        facts: vec![],
        counter: 0,
    };
    let verdict = match ck.run() {
        Ok(()) => Verdict::Pass,
        Err(f) => Verdict::Fail { step: f.step, reason: f.reason },
    };
    CheckReport { id: script.id.clone(), verdict, steps: ck.counter, elapsed: start.elapsed() }
}

impl<'a> Checker<'a> {
    fn run(&mut self) -> Checked {
        self.prepare()?;
        let steps = &self.script.steps;
        self.check_steps(steps, 0)?;
        for goal in &self.script.proves {
            if !self.facts.iter().any(|f| f.depth == 0 && f.judgment.same_as(goal)) {
                return fail(self.counter + 1, format!("statement `{goal}` is not established"));
            }
        }
        Ok(())
    }

    fn prepare(&mut self) -> Checked {
        let s = self.script;
        let refutation = s.is_refutation();
        if refutation && s.proves.len() != 1 {
            return fail(0, "`false` must be the only statement");
        }
        if !refutation && !s.hypotheses.is_empty() {
            return fail(0, "hypotheses are only allowed in theorems proving `false`");
        }
        for j in &s.proves {
            for t in j.terms() {
                if let Some(d) = defined_names(t).into_iter().find(|d| &**d != "I") {
                    return fail(0, format!("statement mentions local name `{d}`"));
                }
                if free_vars(t).iter().any(|v| v.starts_with('$')) {
                    return fail(0, "statement contains pattern variables");
                }
            }
        }
        for id in &s.uses {
            if !self.registry.contains(id) {
                return fail(0, format!("uses unregistered theorem `{id}`"));
            }
        }
        for h in &s.hypotheses {
            let name = Name::from(h.name.as_str());
            if !h.name.starts_with(|c: char| c.is_ascii_uppercase()) || self.declared.contains(&name) {
                return fail(0, format!("hypothesis name `{}` must be a fresh uppercase name", h.name));
            }
            if h.lhs.spine().0 != &Term::Def(name.clone()) {
                return fail(0, format!("hypothesis `{}` must be headed by `{}`", h.name, h.name));
            }
            if free_vars(&h.lhs).iter().chain(free_vars(&h.rhs).iter()).any(|v| !v.starts_with('$')) {
                return fail(0, format!("hypothesis `{}` may only use pattern variables", h.name));
            }
            self.declared.insert(name);
        }
        for h in &s.hypotheses {
            self.check_names(0, [&h.lhs, &h.rhs])?;
            let rule = Rule::new(&format!("hyp:{}", h.name), h.lhs.clone(), h.rhs.clone(), Provenance::Hypothesis(h.name.clone()));
            if let Err(e) = rule {
                return fail(0, e.to_string());
            }
        }
        for (name, body) in &s.lets {
            let n = Name::from(name.as_str());
            if !name.starts_with(|c: char| c.is_ascii_uppercase()) || self.declared.contains(&n) {
                return fail(0, format!("let name `{name}` must be a fresh uppercase name"));
            }
            if !free_vars(body).is_empty() {
                return fail(0, format!("let `{name}` must be closed"));
            }
            self.check_names(0, [body])?;
            self.declared.insert(n.clone());
            self.lets.push((n, body.clone()));
        }
        let mut base: Vec<Equation> = self
            .rs
            .rules()
            .iter()
            .map(|r| Equation { name: r.name.clone(), lhs: r.lhs.clone(), rhs: r.rhs.clone(), side: r.side.clone() })
            .collect();
        for h in &s.hypotheses {
            base.push(Equation { name: format!("hyp:{}", h.name), lhs: h.lhs.clone(), rhs: h.rhs.clone(), side: None });
            base.push(Equation { name: h.name.clone(), lhs: h.lhs.clone(), rhs: h.rhs.clone(), side: None });
        }
        for (n, body) in &self.lets {
            base.push(Equation { name: format!("def:{n}"), lhs: Term::Def(n.clone()), rhs: body.clone(), side: None });
        }
        for id in &s.uses {
            let rec = self.registry.get(id).expect("checked above");
            for (i, j) in rec.statements.iter().enumerate() {
                if let Judgment::Equal(l, r) = j {
                    let name = if rec.statements.len() == 1 { id.clone() } else { format!("{id}#{}", i + 1) };
                    base.push(Equation { name, lhs: to_pattern(l), rhs: to_pattern(r), side: None });
                }
            }
        }
        self.base = base;
        Ok(())
    }

    fn check_names<'t>(&self, step: usize, terms: impl IntoIterator<Item = &'t Term>) -> Checked {
        for t in terms {
            if let Some(d) = defined_names(t).into_iter().find(|d| !self.declared.contains(d)) {
                return fail(step, format!("undeclared name `{d}`"));
            }
        }
        Ok(())
    }

    fn fact(&self, step: usize, label: &str) -> Checked<&Fact> {
        match self.facts.iter().rev().find(|f| f.label == label) {
            Some(f) => Ok(f),
            None => fail(step, format!("no fact labelled `{label}` in scope")),
        }
    }

    fn push_fact(&mut self, step: usize, label: &str, judgment: Judgment, depth: usize) -> Checked {
        if self.facts.iter().any(|f| f.label == label) {
            return fail(step, format!("label `{label}` is already in scope"));
        }
        self.facts.push(Fact { label: label.into(), judgment, depth });
        Ok(())
    }

    fn check_steps(&mut self, steps: &[ProofStep], depth: usize) -> Checked {
        for st in steps {
            self.counter += 1;
            let n = self.counter;
            self.check_names(n, st.judgment.terms())?;
            self.check_just(n, &st.judgment, &st.just, depth)?;
            self.push_fact(n, &st.label, st.judgment.clone(), depth)?;
        }
        Ok(())
    }

    fn uses(&self, step: usize, id: &str) -> Checked<&'a TheoremRecord> {
        if id != AXIOM_VIII && !self.script.uses.iter().any(|u| u == id) {
            return fail(step, format!("`{id}` is not listed in `uses`"));
        }
        match self.registry.get(id) {
            Some(r) => Ok(r),
            None => fail(step, format!("unknown theorem `{id}`")),
        }
    }

    fn check_just(&mut self, n: usize, goal: &Judgment, just: &Justification, depth: usize) -> Checked {
        match just {
            Justification::Chain(links) => {
                let Judgment::Equal(s, t) = goal else { return fail(n, "chain proves an equality") };
                let terms: Vec<&Term> = links.iter().map(|l| &l.term).collect();
                self.check_names(n, terms.iter().copied())?;
                let (first, last) = (terms[0], terms[terms.len() - 1]);
                if !((first == s && last == t) || (first == t && last == s)) {
                    return fail(n, format!("chain runs from `{first}` to `{last}`, not between the sides of `{goal}`"));
                }
                for i in 1..links.len() {
                    self.check_link(n, i, &links[i - 1].term, &links[i].term, links[i].cite.as_deref())?;
                }
                Ok(())
            }
            Justification::Normalize { with, fuel } => {
                let Judgment::Equal(s, t) = goal else { return fail(n, "normalize proves an equality") };
                let rs = self.normalize_rules(n, with)?;
                let fuel = fuel.unwrap_or(rs.config.fuel);
                let (a, b) = (normalize_with_fuel(s, &rs, fuel), normalize_with_fuel(t, &rs, fuel));
                if a.exhausted || b.exhausted {
                    return fail(n, format!("normalisation exhausted {fuel} steps"));
                }
                if a.result != b.result {
                    return fail(n, format!("normal forms differ: `{}` vs `{}`", a.result, b.result));
                }
                Ok(())
            }
            Justification::Ext { vars, inner } => {
                let Judgment::Equal(s, t) = goal else { return fail(n, "ext proves an equality") };
                let mut avoid: BTreeSet<Name> = free_vars(s);
                avoid.extend(free_vars(t));
                for f in &self.facts {
                    f.judgment.terms().into_iter().for_each(|t| avoid.extend(free_vars(t)));
                }
                let vs = match vars {
                    ExtVars::Count(k) => fresh_vars(&avoid, *k),
                    ExtVars::Named(vs) => {
                        let distinct: BTreeSet<&Name> = vs.iter().collect();
                        if distinct.len() != vs.len() {
                            return fail(n, "ext variables must be distinct");
                        }
                        if let Some(v) = vs.iter().find(|v| avoid.contains(*v)) {
                            return fail(n, format!("ext variable `{v}` is not fresh"));
                        }
                        vs.clone()
                    }
                };
                if vs.is_empty() {
                    return fail(n, "ext needs at least one variable");
                }
                let args: Vec<Term> = vs.iter().map(|v| Term::Var(v.clone())).collect();
                let g = Judgment::Equal(Term::apply(s.clone(), args.clone()), Term::apply(t.clone(), args));
                if matches!(**inner, Justification::Contra { .. } | Justification::Cases { .. }) {
                    return fail(n, "ext takes a chain, normalize or thm justification");
                }
                self.check_just(n, &g, inner, depth)
            }
            Justification::Thm { id, index, inst } => {
                self.uses(n, id)?;
                self.check_names(n, inst.iter().map(|(_, t)| t))?;
                let rec = self.registry.get(id).expect("checked by uses");
                let candidates: Vec<usize> = match index {
                    Some(i) => vec![*i],
                    None => (1..=rec.statements.len()).collect(),
                };
                let mut last_err = None;
                for i in candidates {
                    match self.registry.instantiate(id, Some(i), inst) {
                        Ok(j) if j.same_as(goal) => return Ok(()),
                        Ok(j) => last_err = Some(format!("`{id}` gives `{j}`, not `{goal}`")),
                        Err(e) => last_err = Some(e.to_string()),
                    }
                }
                fail(n, last_err.unwrap_or_else(|| format!("`{id}` has no statements")))
            }
            Justification::NeqApp { args, facts } => {
                let Judgment::NotEqual(s, t) = goal else { return fail(n, "neqapp proves a disequality") };
                self.check_names(n, args)?;
                let sa = Term::apply(s.clone(), args.iter().cloned());
                let ta = Term::apply(t.clone(), args.iter().cloned());
                let a = self.other_side(n, &facts[0], &sa)?;
                let b = self.other_side(n, &facts[1], &ta)?;
                let h3 = self.fact(n, &facts[2])?;
                if !h3.judgment.same_as(&Judgment::NotEqual(a.clone(), b.clone())) {
                    return fail(n, format!("`{}` does not state `{a} != {b}`", facts[2]));
                }
                Ok(())
            }
            Justification::Falsum(x, y) => {
                if *goal != Judgment::Falsum {
                    return fail(n, "falsum proves `false`");
                }
                let (jx, jy) = (&self.fact(n, x)?.judgment, &self.fact(n, y)?.judgment);
                let opposed = |e: &Judgment, ne: &Judgment| match (e, ne) {
                    (Judgment::Equal(a, b), Judgment::NotEqual(_, _)) => {
                        ne.same_as(&Judgment::NotEqual(a.clone(), b.clone()))
                    }
                    _ => false,
                };
                if opposed(jx, jy) || opposed(jy, jx) {
                    Ok(())
                } else {
                    fail(n, format!("`{jx}` and `{jy}` are not contradictory"))
                }
            }
            Justification::KInject(h) => {
                let Judgment::Equal(s, t) = goal else { return fail(n, "kinject proves an equality") };
                let want = Judgment::Equal(Term::k(s.clone()), Term::k(t.clone()));
                let have = &self.fact(n, h)?.judgment;
                if have.same_as(&want) {
                    Ok(())
                } else {
                    fail(n, format!("`{h}` is not `{want}`"))
                }
            }
            Justification::Contra { hyp, steps } => {
                let Judgment::NotEqual(s, t) = goal else { return fail(n, "contra proves a disequality") };
                let mark = self.facts.len();
                self.push_fact(n, hyp, Judgment::Equal(s.clone(), t.clone()), depth + 1)?;
                let r = self.check_block(n, steps, depth + 1, &Judgment::Falsum);
                self.facts.truncate(mark);
                r
            }
            Justification::Cases { a, b, p1, p2 } => {
                self.check_names(n, [a, b])?;
                let eq = Term::app(Term::eq(), Term::pair(a.clone(), b.clone()));
                let ab = |ne: bool| {
                    if ne {
                        Judgment::NotEqual(a.clone(), b.clone())
                    } else {
                        Judgment::Equal(a.clone(), b.clone())
                    }
                };
                self.check_branch(n, p1, ab(false), Judgment::Equal(eq.clone(), Term::p1()), goal, depth)?;
                match p2 {
                    Some(br) => self.check_branch(n, br, ab(true), Judgment::Equal(eq, Term::p2()), goal, depth),
                    None if a == b => Ok(()),
                    None => fail(n, "the p2 branch may only be omitted when both sides are identical"),
                }
            }
            Justification::Refute { id, inst, facts } => self.check_refute(n, goal, id, inst, facts),
        }
    }

    fn check_block(&mut self, n: usize, steps: &[ProofStep], depth: usize, goal: &Judgment) -> Checked {
        self.check_steps(steps, depth)?;
        match steps.last() {
            Some(last) if last.judgment == Judgment::Falsum || last.judgment.same_as(goal) => Ok(()),
            Some(last) => fail(n, format!("block ends with `{}`, not `{goal}`", last.judgment)),
            None => fail(n, "empty block"),
        }
    }

    fn check_branch(&mut self, n: usize, br: &Branch, h1: Judgment, h2: Judgment, goal: &Judgment, depth: usize) -> Checked {
        let mark = self.facts.len();
        let r = self
            .push_fact(n, &br.h1, h1, depth + 1)
            .and_then(|_| self.push_fact(n, &br.h2, h2, depth + 1))
            .and_then(|_| self.check_block(n, &br.steps, depth + 1, goal));
        self.facts.truncate(mark);
        r
    }

    /// The side of the equality `label` opposite to `side`.
    fn other_side(&self, n: usize, label: &str, side: &Term) -> Checked<Term> {
        match &self.fact(n, label)?.judgment {
            Judgment::Equal(l, r) if l == side => Ok(r.clone()),
            Judgment::Equal(l, r) if r == side => Ok(l.clone()),
            j => fail(n, format!("`{label}` (`{j}`) is not an equality about `{side}`")),
        }
    }

    fn normalize_rules(&self, n: usize, with: &[String]) -> Checked<RuleSet> {
        let mut rs = self.rs.clone();
        let engine = |e: EngineError| Failure { step: n, reason: e.to_string() };
        for h in &self.script.hypotheses {
            let r = Rule::new(&format!("hyp:{}", h.name), h.lhs.clone(), h.rhs.clone(), Provenance::Hypothesis(h.name.clone()))
                .map_err(engine)?;
            rs.push_before_definitions(r).map_err(engine)?;
        }
        for w in with {
            if let Some(f) = self.facts.iter().rev().find(|f| &f.label == w) {
                let Judgment::Equal(l, r) = &f.judgment else { return fail(n, format!("`{w}` is not an equality")) };
                let rule = Rule::new(w, l.clone(), r.clone(), Provenance::Derived(w.clone())).map_err(engine)?;
                rs.push_before_definitions(rule).map_err(engine)?;
                continue;
            }
            let rec = self.uses(n, w)?;
            for (i, j) in rec.statements.iter().enumerate() {
                if let Judgment::Equal(l, r) = j {
                    let name = if rec.statements.len() == 1 { w.clone() } else { format!("{w}#{}", i + 1) };
                    let rule = Rule::new(&name, to_pattern(l), to_pattern(r), Provenance::Derived(w.clone())).map_err(engine)?;
                    rs.push_before_definitions(rule).map_err(engine)?;
                }
            }
        }
        for (name, body) in &self.lets {
            rs.push_definition(name, body.clone()).map_err(engine)?;
        }
        Ok(rs)
    }

    fn check_link(&self, n: usize, i: usize, a: &Term, b: &Term, cite: Option<&str>) -> Checked {
        if a == b {
            return fail(n, format!("link {i}: `{a}` repeated"));
        }
        let facts: Vec<Equation> = self
            .facts
            .iter()
            .filter_map(|f| match &f.judgment {
                Judgment::Equal(l, r) => Some(Equation { name: f.label.clone(), lhs: l.clone(), rhs: r.clone(), side: None }),
                _ => None,
            })
            .collect();
        let eqs: Vec<&Equation> = self
            .base
            .iter()
            .chain(facts.iter())
            .filter(|e| cite.is_none_or(|c| e.cited_by(c)))
            .collect();
        if eqs.is_empty() {
            return fail(n, format!("link {i}: nothing named `{}`", cite.unwrap_or_default()));
        }
        let diff = difference(a, b);
        let mut tried = Vec::new();
        for len in (0..=diff.len()).rev() {
            let pos = Position(diff[..len].to_vec());
            let (sa, sb) = match (navigate(a, &pos), navigate(b, &pos)) {
                (Ok(x), Ok(y)) => (x, y),
                _ => continue,
            };
            if eqs.iter().any(|e| e.relates(sa, sb) || e.relates(sb, sa)) {
                return Ok(());
            }
            tried.push(pos.to_string());
        }
        fail(
            n,
            format!(
                "link {i}: `{a}` to `{b}` is not a single rule instance (tried {} equations at {})",
                eqs.len(),
                tried.join(" ")
            ),
        )
    }

    fn check_refute(&self, n: usize, goal: &Judgment, id: &str, inst: &[(String, Term)], facts: &[String]) -> Checked {
        if *goal != Judgment::Falsum {
            return fail(n, "refute proves `false`");
        }
        let rec = self.uses(n, id)?;
        if !rec.is_refutation() || rec.hypotheses.is_empty() {
            return fail(n, format!("`{id}` is not a nonexistence theorem"));
        }
        let mut map: BTreeMap<Name, Term> = BTreeMap::new();
        for (k, t) in inst {
            if !rec.hypotheses.iter().any(|h| &h.name == k) {
                return fail(n, format!("`{id}` has no hypothesis `{k}`"));
            }
            if !free_vars(t).is_empty() {
                return fail(n, format!("instance for `{k}` must be closed"));
            }
            self.check_names(n, [t])?;
            map.insert(Name::from(k.as_str()), t.clone());
        }
        for h in &rec.hypotheses {
            let k = Name::from(h.name.as_str());
            if !map.contains_key(&k) {
                if !self.declared.contains(&k) {
                    return fail(n, format!("no instance for hypothesis `{}`", h.name));
                }
                map.insert(k.clone(), Term::Def(k));
            }
        }
        if facts.len() != rec.hypotheses.len() {
            return fail(n, format!("`{id}` needs {} fact(s)", rec.hypotheses.len()));
        }
        let bound: BTreeSet<Name> = self
            .facts
            .iter()
            .filter(|f| f.depth > 0)
            .flat_map(|f| f.judgment.terms().into_iter().flat_map(free_vars))
            .collect();
        for (h, label) in rec.hypotheses.iter().zip(facts) {
            let Judgment::Equal(l, r) = &self.fact(n, label)?.judgment else {
                return fail(n, format!("`{label}` is not an equality"));
            };
            let (hl, hr) = (h.lhs.replace_defs(&map), h.rhs.replace_defs(&map));
            let mut s = Substitution::new();
            if !(match_into(&hl, l, &mut s) && match_into(&hr, r, &mut s)) {
                return fail(n, format!("`{label}` is not an instance of `{h}`"));
            }
            let mut seen = BTreeSet::new();
            for t in s.0.values() {
                match t {
                    Term::Var(v) if !v.starts_with('$') && seen.insert(v.clone()) => {
                        if bound.contains(v) {
                            return fail(n, format!("`{v}` is constrained by an assumption"));
                        }
                    }
                    _ => return fail(n, format!("`{label}` must hold for distinct variables, found `{t}`")),
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TheoremRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.id, self.summary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::EngineConfig;
    use crate::script::parse_script;
    use crate::syntax::{parse, parse_pattern};

    fn rs() -> RuleSet {
        RuleSet::standard(EngineConfig::default())
    }

    fn check(src: &str, reg: &Registry) -> CheckReport {
        check_script(&parse_script(src).unwrap(), reg, &rs())
    }

    fn add(reg: &mut Registry, src: &str) {
        let s = parse_script(src).unwrap();
        let r = check_script(&s, reg, &rs());
        assert!(r.is_pass(), "{}", r.line());
        reg.register(TheoremRecord::from_script(&s, None), &r).unwrap();
    }

    const IDENTITY: &str = r#"theorem 1.I "I is the identity" proves I x = x {
        have a : I x = x by chain [I x, <P1,P2> x, <P1 x, P2 x>, x]
    }"#;

    #[test]
    fn chain_links_are_single_rule_instances() {
        let reg = Registry::new();
        assert!(check(IDENTITY, &reg).is_pass());
        let skip = IDENTITY.replace("<P1 x, P2 x>, ", "");
        let r = check(&skip, &reg);
        assert!(matches!(r.verdict, Verdict::Fail { step: 1, .. }), "{}", r.line());
        let swapped = IDENTITY.replace("<P1 x, P2 x>", "<P2 x, P1 x>");
        assert!(!check(&swapped, &reg).is_pass());
    }

    #[test]
    fn statement_must_be_established() {
        let src = r#"theorem 1 "t" proves x = P1 {
            have a : x = x by chain [x]
        }"#;
        let r = check(src, &Registry::new());
        assert_eq!(r.line(), "THEOREM 1 FAIL 2 statement `x = P1` is not established");
    }

    #[test]
    fn registry_guards() {
        let mut reg = Registry::new();
        let s = parse_script(IDENTITY).unwrap();
        let ok = check_script(&s, &reg, &rs());
        let mut dependent = TheoremRecord::from_script(&s, None);
        dependent.id = "later".into();
        dependent.dependencies = vec!["1.I".into()];
        let rep = CheckReport { id: "later".into(), ..ok.clone() };
        assert_eq!(
            reg.register(dependent.clone(), &rep),
            Err(KernelError::DependencyMissing { id: "later".into(), dep: "1.I".into() })
        );
        reg.register(TheoremRecord::from_script(&s, None), &ok).unwrap();
        reg.register(dependent, &rep).unwrap();
        let mut other = TheoremRecord::from_script(&s, None);
        other.statements = vec![Judgment::Equal(parse("x").unwrap(), parse("x").unwrap())];
        assert_eq!(reg.register(other, &ok), Err(KernelError::IdConflict("1.I".into())));
        let bad = CheckReport::fail("1.I", 1, "no");
        assert!(matches!(reg.register(TheoremRecord::from_script(&s, None), &bad), Err(KernelError::NotPassing(_))));
    }

    #[test]
    fn instantiation() {
        let reg = Registry::new();
        assert_eq!(reg.instantiate("VIII", None, &[]).unwrap(), Judgment::NotEqual(Term::p1(), Term::p2()));
        assert!(reg.instantiate("nope", None, &[]).is_err());
        assert!(reg.instantiate("VIII", None, &[(Name::from("x"), Term::p1())]).is_err());
    }

    #[test]
    fn derived_rules_need_matching_statement() {
        let mut reg = Registry::new();
        add(&mut reg, IDENTITY);
        let rs2 = register_derived_rule(&rs(), &reg, "1.I", parse_pattern("I $y").unwrap(), parse_pattern("$y").unwrap()).unwrap();
        assert!(rs2.get("1.I").is_some());
        let bad = register_derived_rule(&rs(), &reg, "1.I", parse_pattern("I $y").unwrap(), parse_pattern("I").unwrap());
        assert!(matches!(bad, Err(KernelError::StatementMismatch { .. })));
        assert!(register_derived_rule(&rs(), &reg, "2.1e", Term::p1(), Term::p1()).is_err());
    }

    const EQ_NOT_P2: &str = r#"theorem 2.4a "Eq <x,P2> is not x" proves Eq <x,P2> != x {
      have v : P1 != P2 by thm VIII
      have g : Eq <x,P2> != x by contra H {
        have f : false by cases Eq <x,P2> {
          p1 [e, q] => {
            have a : P1 = P2 by chain [P1, Eq <x,P2>, x, P2]
            have z : false by falsum a v
          } ;
          p2 [e, q] => {
            have a : x = P2 by chain [x, Eq <x,P2>, P2]
            have z : false by falsum a e
          }
        }
      }
    }"#;

    #[test]
    fn case_analysis_on_eq() {
        let r = check(EQ_NOT_P2, &Registry::new());
        assert!(r.is_pass(), "{}", r.line());
        assert_eq!(r.steps, 7);
        let swapped = EQ_NOT_P2.replace("falsum a e", "falsum a v");
        let r = check(&swapped, &Registry::new());
        assert!(matches!(r.verdict, Verdict::Fail { step: 7, .. }), "{}", r.line());
    }

    #[test]
    fn cases_on_identical_sides_needs_only_first_branch() {
        let src = r#"theorem 1 "t" proves Eq <x,x> = P1 {
          have a : Eq <x,x> = P1 by cases Eq <x,x> {
            p1 [e, q] => { have b : Eq <x,x> = P1 by chain [Eq <x,x>, P1] }
          }
        }"#;
        assert!(check(src, &Registry::new()).is_pass());
        let src2 = src.replace("<x,x>", "<x,y>");
        assert!(!check(&src2, &Registry::new()).is_pass());
    }

    #[test]
    fn refutation_by_hypothesis() {
        let mut reg = Registry::new();
        add(&mut reg, EQ_NOT_P2);
        let src = r#"theorem 2.6 "no M" proves false {
          uses 2.4a
          hypothesis M : M $x = $x $x
          let T := Abst k(Eq) <M, k(P2)>
          have c : T T = Eq <T T, P2> by chain [T T, Abst k(Eq) <M, k(P2)> T, k(Eq) k(T) (<M, k(P2)> T),
              Eq (<M, k(P2)> T), Eq <M T, k(P2) T>, Eq <T T, k(P2) T>, Eq <T T, P2>]
          have n : Eq <T T, P2> != T T by thm 2.4a [x := T T]
          have f : false by falsum c n
        }"#;
        let r = check(src, &reg);
        assert!(r.is_pass(), "{}", r.line());
        add(&mut reg, src);
        let via = r#"theorem 9 "no M again" proves false {
          uses 2.6
          hypothesis W : W $x $y = $x $y $y
          let M := W <P1,P2>
          have e : M x = x x by chain [M x, W <P1,P2> x, <P1,P2> x x, <P1 x, P2 x> x, x x]
          have f : false by refute 2.6 e
        }"#;
        let r = check(via, &reg);
        assert!(r.is_pass(), "{}", r.line());
        let wrong = via.replace("refute 2.6 e", "refute 2.6 [M := P1] e");
        assert!(!check(&wrong, &reg).is_pass());
    }

    #[test]
    fn hypotheses_only_in_refutations() {
        let src = r#"theorem 1 "t" proves x = x {
          hypothesis M : M $x = $x
          have a : x = x by chain [x]
        }"#;
        assert!(matches!(check(src, &Registry::new()).verdict, Verdict::Fail { step: 0, .. }));
    }
}
