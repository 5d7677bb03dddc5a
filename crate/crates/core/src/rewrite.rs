//! Oriented axioms, fuel-bounded leftmost-outermost normalisation with
//! traces, and equality up to extensionality by fresh-variable application.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::syntax::parse_pattern;
use crate::term::{
    free_vars, fresh_vars, match_pattern, navigate, replace_at, substitute, Name, Position, Step,
    Substitution, Term,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Axiom,
    /// Justified by a kernel-checked theorem.
    Derived(String),
    /// Assumed for the sake of a nonexistence proof.
    Hypothesis(String),
    /// Unfolding of a defined name.
    Definition(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SideCondition {
    /// The two pattern variables must be bound to identical terms.
    SyntacticIdentity(Name, Name),
}

impl SideCondition {
    pub fn holds(&self, s: &Substitution) -> bool {
        match self {
            SideCondition::SyntacticIdentity(a, b) => {
                matches!((s.get(a), s.get(b)), (Some(x), Some(y)) if x == y)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    pub provenance: Provenance,
    pub side: Option<SideCondition>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("duplicate rule name `{0}`")]
    DuplicateRule(String),
    #[error("rule `{name}`: pattern variable {var} of the right side does not occur on the left")]
    UnboundRhsVar { name: String, var: String },
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("cannot register `{name}`: {reason}")]
    Unjustified { name: String, reason: String },
}

impl Rule {
    pub fn new(name: &str, lhs: Term, rhs: Term, provenance: Provenance) -> Result<Rule, EngineError> {
        let lv = free_vars(&lhs);
        if let Some(v) = free_vars(&rhs).into_iter().find(|v| v.starts_with('$') && !lv.contains(v)) {
            return Err(EngineError::UnboundRhsVar { name: name.into(), var: v.to_string() });
        }
        Ok(Rule { name: name.into(), lhs, rhs, provenance, side: None })
    }

    fn axiom(name: &str, lhs: &str, rhs: &str) -> Rule {
        let lhs = parse_pattern(lhs).expect("axiom pattern");
        let rhs = parse_pattern(rhs).expect("axiom pattern");
        Rule::new(name, lhs, rhs, Provenance::Axiom).expect("axiom rule")
    }

    /// Instance of this rule at the root of `t`, if any.
    pub fn apply_root(&self, t: &Term) -> Option<Term> {
        let s = match_pattern(&self.lhs, t)?;
        if let Some(side) = &self.side {
            if !side.holds(&s) {
                return None;
            }
        }
        Some(substitute(&self.rhs, &s))
    }

    /// Leftmost-outermost redex of this rule in `t`.
    pub fn find_redex(&self, t: &Term) -> Option<(Position, Term)> {
        fn go(rule: &Rule, t: &Term, path: &mut Vec<crate::term::Step>) -> Option<(Position, Term)> {
            if let Some(r) = rule.apply_root(t) {
                return Some((Position(path.clone()), r));
            }
            for (s, c) in t.children() {
                path.push(s);
                let found = go(rule, c, path);
                path.pop();
                if found.is_some() {
                    return found;
                }
            }
            None
        }
        go(self, t, &mut Vec::new())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} → {}", self.name, self.lhs, self.rhs)?;
        if let Some(SideCondition::SyntacticIdentity(a, b)) = &self.side {
            write!(f, " if {a} ≡ {b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Use the pair-application and Abst rules that the derivations actually
    /// require instead of the misprinted ones.
    pub corrected_axioms: bool,
    pub surjective_pairing: bool,
    pub eq_reflexivity: bool,
    pub fuel: usize,
    pub ext_depth: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            corrected_axioms: true,
            surjective_pairing: true,
            eq_reflexivity: true,
            fuel: 10_000,
            ext_depth: 4,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.fuel == 0 {
            return Err(EngineError::Config("fuel must be at least 1".into()));
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` and `--` start comments.
    pub fn from_config_text(text: &str) -> Result<EngineConfig, EngineError> {
        let mut cfg = EngineConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split("--").next().unwrap_or("").split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| EngineError::Config(format!("line {}: {msg}", no + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let flag = |v: &str| match v {
                "true" | "on" | "yes" | "1" => Ok(true),
                "false" | "off" | "no" | "0" => Ok(false),
                _ => Err(bad("expected a boolean")),
            };
            match key {
                "fuel" => cfg.fuel = value.parse().map_err(|_| bad("expected a count"))?,
                "ext-depth" | "ext_depth" => {
                    cfg.ext_depth = value.parse().map_err(|_| bad("expected a count"))?
                }
                "corrected-axioms" | "corrected_axioms" => cfg.corrected_axioms = flag(value)?,
                "printed-axioms" | "printed_axioms" => cfg.corrected_axioms = !flag(value)?,
                "surjective-pairing" | "surjective_pairing" => cfg.surjective_pairing = flag(value)?,
                "eq-refl" | "eq_refl" | "eq-reflexivity" => cfg.eq_reflexivity = flag(value)?,
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ordered rules plus engine configuration. Order decides which redex fires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    pub config: EngineConfig,
}

impl RuleSet {
    /// The axioms as rewrite rules, in their fixed order.
    pub fn core(config: EngineConfig) -> RuleSet {
        let mut rules = vec![
            Rule::axiom("k-app", "k($x) $y", "$x"),
            Rule::axiom("proj1", "P1 <$a,$b>", "$a"),
            Rule::axiom("proj2", "P2 <$a,$b>", "$b"),
        ];
        if config.surjective_pairing {
            rules.push(Rule::axiom("surj-pair", "<P1 $x, P2 $x>", "$x"));
        }
        if config.corrected_axioms {
            rules.push(Rule::axiom("pair-app", "<$x,$y> $z", "<$x $z, $y $z>"));
            rules.push(Rule::axiom("abst", "Abst $x $y $z", "$x k($z) ($y $z)"));
        } else {
            rules.push(Rule::axiom("pair-app", "<$x,$y> $z", "<$x $y, $x $z>"));
            rules.push(Rule::axiom("abst", "Abst $x $y $z", "$x k($y) ($y $z)"));
        }
        if config.eq_reflexivity {
            let mut r = Rule::axiom("eq-refl", "Eq <$a,$b>", "P1");
            r.side = Some(SideCondition::SyntacticIdentity(Name::from("$a"), Name::from("$b")));
            rules.push(r);
        }
        RuleSet { rules, config }
    }

    /// Core rules plus the unfolding `I → <P1,P2>`.
    pub fn standard(config: EngineConfig) -> RuleSet {
        let mut rs = RuleSet::core(config);
        rs.push(identity_definition()).expect("fresh rule set");
        rs
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: Rule) -> Result<(), EngineError> {
        if self.get(&rule.name).is_some() {
            return Err(EngineError::DuplicateRule(rule.name));
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn with(mut self, rule: Rule) -> Result<RuleSet, EngineError> {
        self.push(rule)?;
        Ok(self)
    }

    /// Definition unfoldings are kept after every other rule so that a
    /// defined name is only expanded when nothing else applies.
    pub fn push_definition(&mut self, name: &str, body: Term) -> Result<(), EngineError> {
        let rule = Rule::new(
            &format!("def:{name}"),
            Term::def(name),
            body,
            Provenance::Definition(name.into()),
        )?;
        self.push(rule)?;
        self.rules.sort_by_key(|r| matches!(r.provenance, Provenance::Definition(_)));
        Ok(())
    }

    pub fn push_before_definitions(&mut self, rule: Rule) -> Result<(), EngineError> {
        self.push(rule)?;
        self.rules.sort_by_key(|r| matches!(r.provenance, Provenance::Definition(_)));
        Ok(())
    }
}

pub fn identity_definition() -> Rule {
    Rule::new("def:I", Term::identity(), Term::pair(Term::p1(), Term::p2()), Provenance::Definition("I".into()))
        .expect("identity definition")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub position: Position,
    pub rule: String,
    pub before: Term,
    pub after: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizeResult {
    pub result: Term,
    pub trace: Vec<TraceStep>,
    pub exhausted: bool,
}

impl NormalizeResult {
    /// Trace lines `<step#> <position> <rule> ⊢ <term>`.
    pub fn trace_lines(&self) -> Vec<String> {
        self.trace
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{} {} {} ⊢ {}", i + 1, s.position, s.rule, s.after))
            .collect()
    }

    /// Checks every step of the trace against `rs`, starting from `input`.
    pub fn replay(&self, input: &Term, rs: &RuleSet) -> bool {
        let mut cur = input.clone();
        for step in &self.trace {
            if step.before != cur {
                return false;
            }
            let Some(rule) = rs.get(&step.rule) else { return false };
            let Ok(sub) = navigate(&cur, &step.position) else { return false };
            let Some(reduct) = rule.apply_root(sub) else { return false };
            let Ok(next) = replace_at(&cur, &step.position, reduct) else { return false };
            if next != step.after {
                return false;
            }
            cur = next;
        }
        cur == self.result
    }
}

/// Fires the first rule, in rule-set order, that has a redex anywhere in `t`,
/// at that rule's leftmost-outermost redex.
pub fn rewrite_step(t: &Term, rs: &RuleSet) -> Option<TraceStep> {
    rs.rules.iter().find_map(|rule| {
        let (position, reduct) = rule.find_redex(t)?;
        let after = replace_at(t, &position, reduct).expect("redex position is valid");
        Some(TraceStep { position, rule: rule.name.clone(), before: t.clone(), after })
    })
}

pub fn normalize(t: &Term, rs: &RuleSet) -> NormalizeResult {
    normalize_with_fuel(t, rs, rs.config.fuel)
}

pub fn normalize_with_fuel(t: &Term, rs: &RuleSet, fuel: usize) -> NormalizeResult {
    let mut cur = t.clone();
    let mut trace = Vec::new();
    while trace.len() < fuel {
        match rewrite_step(&cur, rs) {
            Some(step) => {
                cur = step.after.clone();
                trace.push(step);
            }
            None => return NormalizeResult { result: cur, trace, exhausted: false },
        }
    }
    // Out of fuel unless the final term happens to be normal.
    let exhausted = rewrite_step(&cur, rs).is_some();
    NormalizeResult { result: cur, trace, exhausted }
}

/// Normal forms of `s v1..vk` and `t v1..vk` that agree except at the
/// positions in `parts`, where the differing subterms are themselves
/// extensionally equal (congruence). When `split` is non-empty, `s` and `t`
/// are first instantiated with `x := <a,b>` for each `(x, a, b)`, which is
/// sound by surjective pairing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub split: Vec<(Name, Name, Name)>,
    pub fresh: Vec<Name>,
    pub left: NormalizeResult,
    pub right: NormalizeResult,
    pub parts: Vec<(Position, Evidence)>,
}

impl Evidence {
    pub fn summary(&self) -> String {
        let vars: Vec<&str> = self.fresh.iter().map(|v| &**v).collect();
        let parts = if self.parts.is_empty() {
            String::new()
        } else {
            let ps: Vec<String> = self.parts.iter().map(|(p, _)| p.to_string()).collect();
            format!(", by congruence at {}", ps.join(" "))
        };
        let split: Vec<String> = self.split.iter().map(|(x, a, b)| format!("{x} := <{a},{b}>, ")).collect();
        format!(
            "{}fresh [{}], {}+{} steps, normal form {}{parts}",
            split.concat(),
            vars.join(" "),
            self.left.trace.len(),
            self.right.trace.len(),
            self.left.result
        )
    }

    /// Replays the split, both traces from the applied inputs, then every part.
    pub fn validate(&self, s: &Term, t: &Term, rs: &RuleSet) -> bool {
        let (s, t) = split_pairs(s, t, &self.split);
        let args = || self.fresh.iter().map(|v| Term::Var(v.clone()));
        let ls = Term::apply(s, args());
        let lt = Term::apply(t, args());
        if self.left.exhausted
            || self.right.exhausted
            || !replay_from(&self.left, &ls, rs)
            || !replay_from(&self.right, &lt, rs)
        {
            return false;
        }
        let (l, mut r) = (&self.left.result, self.right.result.clone());
        for (p, ev) in &self.parts {
            let (Ok(a), Ok(b)) = (navigate(l, p), navigate(&r, p)) else { return false };
            if !ev.validate(a, b, rs) {
                return false;
            }
            // Identify the two sides at p so the rest must agree verbatim.
            let a = a.clone();
            match replace_at(&r, p, a) {
                Ok(next) => r = next,
                Err(_) => return false,
            }
        }
        *l == r
    }
}

fn replay_from(n: &NormalizeResult, input: &Term, rs: &RuleSet) -> bool {
    n.replay(input, rs)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtResult {
    Equal(Evidence),
    Unknown { left: Term, right: Term, exhausted: bool },
}

impl ExtResult {
    pub fn is_equal(&self) -> bool {
        matches!(self, ExtResult::Equal(_))
    }
}

/// How many times congruence may nest inside one `ext_equal` call.
const CONGRUENCE_NESTING: usize = 2;

/// Sound but incomplete equality: normalise both sides; if the normal forms
/// differ, apply both to a fresh variable and retry, up to `ext_depth` times.
/// Normal forms that differ only in subterms are accepted when those
/// subterms are extensionally equal in turn.
pub fn ext_equal(s: &Term, t: &Term, rs: &RuleSet) -> ExtResult {
    ext_equal_nested(s, t, rs, CONGRUENCE_NESTING)
}

fn ext_equal_nested(s: &Term, t: &Term, rs: &RuleSet, nesting: usize) -> ExtResult {
    let mut avoid: BTreeSet<Name> = free_vars(s);
    avoid.extend(free_vars(t));
    let fresh = fresh_vars(&avoid, rs.config.ext_depth);
    let mut ls = s.clone();
    let mut lt = t.clone();
    let mut tried = Vec::new();
    let mut asked = Vec::new();
    let mut exhausted = false;
    for depth in 0..=rs.config.ext_depth {
        if depth > 0 {
            let v = Term::Var(fresh[depth - 1].clone());
            ls = Term::app(ls, v.clone());
            lt = Term::app(lt, v);
        }
        let left = normalize(&ls, rs);
        let right = normalize(&lt, rs);
        asked.push((ls.clone(), lt.clone()));
        exhausted |= left.exhausted || right.exhausted;
        if !left.exhausted && !right.exhausted && left.result == right.result {
            let fresh = fresh[..depth].to_vec();
            return ExtResult::Equal(Evidence { split: vec![], fresh, left, right, parts: vec![] });
        }
        tried.push((left, right));
    }
    if nesting > 0 {
        for (depth, (left, right)) in tried.iter().enumerate() {
            if left.exhausted || right.exhausted {
                continue;
            }
            let mut parts = Vec::new();
            let cx = Congruence { rs, nesting: nesting - 1, asked: &asked };
            if cx.congruent(&left.result, &right.result, &mut Vec::new(), &mut parts) {
                let (left, right) = (left.clone(), right.clone());
                let fresh = fresh[..depth].to_vec();
                return ExtResult::Equal(Evidence { split: vec![], fresh, left, right, parts });
            }
        }
        if rs.config.surjective_pairing {
            for x in avoid.iter().filter(|x| !x.starts_with('$')) {
                let ab = fresh_vars(&avoid, 2);
                let triple = [(x.clone(), ab[0].clone(), ab[1].clone())];
                let (s2, t2) = split_pairs(s, t, &triple);
                if let ExtResult::Equal(mut ev) = ext_equal_nested(&s2, &t2, rs, nesting - 1) {
                    ev.split.insert(0, triple[0].clone());
                    return ExtResult::Equal(ev);
                }
            }
        }
    }
    let (left, right) = tried.pop().expect("at least depth 0 was tried");
    ExtResult::Unknown { left: left.result, right: right.result, exhausted }
}

fn split_pairs(s: &Term, t: &Term, split: &[(Name, Name, Name)]) -> (Term, Term) {
    split.iter().fold((s.clone(), t.clone()), |(s, t), (x, a, b)| {
        let sub = Substitution::single(x, Term::pair(Term::Var(a.clone()), Term::Var(b.clone())));
        (substitute(&s, &sub), substitute(&t, &sub))
    })
}

struct Congruence<'a> {
    rs: &'a RuleSet,
    nesting: usize,
    /// Pairs the caller already compared; asking again would only peel off
    /// fresh arguments and go round in circles.
    asked: &'a [(Term, Term)],
}

impl Congruence<'_> {
    /// Walks two normal forms in parallel; where they differ, the subterms
    /// must be extensionally equal. The roots are never compared whole, since
    /// the caller just failed to do exactly that.
    fn congruent(&self, l: &Term, r: &Term, path: &mut Vec<Step>, parts: &mut Vec<(Position, Evidence)>) -> bool {
        if l == r {
            return true;
        }
        let same_shape = matches!(
            (l, r),
            (Term::App(..), Term::App(..)) | (Term::Pair(..), Term::Pair(..)) | (Term::K(_), Term::K(_))
        );
        if same_shape {
            let mark = parts.len();
            let ok = l.children().into_iter().zip(r.children()).all(|((step, a), (_, b))| {
                path.push(step);
                let ok = self.congruent(a, b, path, parts);
                path.pop();
                ok
            });
            if ok {
                return true;
            }
            parts.truncate(mark);
        }
        if path.is_empty() || (is_atom(l) && is_atom(r)) || self.asked.iter().any(|(a, b)| a == l && b == r) {
            return false;
        }
        match ext_equal_nested(l, r, self.rs, self.nesting) {
            ExtResult::Equal(ev) => {
                parts.push((Position(path.clone()), ev));
                true
            }
            ExtResult::Unknown { .. } => false,
        }
    }
}

/// Distinct variables and constants never become equal by rewriting.
fn is_atom(t: &Term) -> bool {
    matches!(t, Term::Var(_) | Term::Const(_))
}
