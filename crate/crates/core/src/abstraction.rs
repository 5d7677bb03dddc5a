//! Bracket abstraction for TRC.
//!
//! `λx.t` exists when every occurrence of `x` sits at level 0, where the level
//! starts at 0 at the root, goes up by one into function position, stays put
//! into arguments and pair components, and goes down by one into a `k(..)`
//! body. The compiled term `F_0(t)` is built by
//!
//! ```text
//! F_n(t)        = k(t)                    if x does not occur in t
//! F_0(x)        = I
//! F_n(<a,b>)    = <F_n(a), F_n(b)>
//! F_n(k(c))     = Abst k(F_{n-1}(c))
//! F_n(u v)      = Abst F_{n+1}(u) F_n(v)
//! ```
//!
//! and satisfies `F_n(t) k^n(s) = t[s/x]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rewrite::{ext_equal, ExtResult, RuleSet};
use crate::syntax::{Cursor, ParseError};
use crate::term::{free_vars, match_pattern, substitute, Name, Position, Step, Term};
use crate::syntax::parse_pattern;

pub type LevelMap = BTreeMap<Position, i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelReason {
    XAtNonzeroLevel,
    NegativeLevel,
}

impl fmt::Display for LevelReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelReason::XAtNonzeroLevel => "x-at-nonzero-level",
            LevelReason::NegativeLevel => "negative-level",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("NotAbstractable: {var} at {position} (level {level}): {reason}")]
    NotAbstractable { var: Name, position: Position, level: i64, reason: LevelReason },
    #[error("internal level error at {0}")]
    InternalLevel(Position),
}

/// Levels of every subterm containing `x` and of their immediate children.
pub fn abstraction_levels(x: &str, t: &Term) -> Result<LevelMap, AbstractionError> {
    fn go(x: &str, t: &Term, path: &mut Vec<Step>, n: i64, out: &mut LevelMap) -> Result<(), AbstractionError> {
        out.insert(Position(path.clone()), n);
        if !t.contains_var(x) {
            return Ok(());
        }
        let fail = |reason| AbstractionError::NotAbstractable {
            var: Name::from(x),
            position: Position(path.clone()),
            level: n,
            reason,
        };
        if matches!(t, Term::Var(v) if &**v == x) {
            return if n == 0 { Ok(()) } else { Err(fail(LevelReason::XAtNonzeroLevel)) };
        }
        if n < 0 {
            return Err(fail(LevelReason::NegativeLevel));
        }
        for (s, c) in t.children() {
            let level = match s {
                Step::Fun => n + 1,
                Step::KBody => n - 1,
                Step::Arg | Step::Left | Step::Right => n,
            };
            path.push(s);
            let r = go(x, c, path, level, out);
            path.pop();
            r?;
        }
        Ok(())
    }
    let mut out = LevelMap::new();
    go(x, t, &mut Vec::new(), 0, &mut out)?;
    Ok(out)
}

/// `λx.t` as a term without `x`.
pub fn abstract_var(x: &str, t: &Term) -> Result<Term, AbstractionError> {
    abstraction_levels(x, t)?;
    fn f(x: &str, t: &Term, n: i64, path: &mut Vec<Step>) -> Result<Term, AbstractionError> {
        if !t.contains_var(x) {
            return Ok(Term::k(t.clone()));
        }
        let mut sub = |s: Step, c: &Term, level: i64| {
            path.push(s);
            let r = f(x, c, level, path);
            path.pop();
            r
        };
        match t {
            Term::Var(_) if n == 0 => Ok(Term::identity()),
            Term::Pair(a, b) => Ok(Term::pair(sub(Step::Left, a, n)?, sub(Step::Right, b, n)?)),
            Term::K(c) => Ok(Term::app(Term::abst(), Term::k(sub(Step::KBody, c, n - 1)?))),
            Term::App(u, v) => {
                let fu = sub(Step::Fun, u, n + 1)?;
                let fv = sub(Step::Arg, v, n)?;
                Ok(Term::apply(Term::abst(), [fu, fv]))
            }
            _ => Err(AbstractionError::InternalLevel(Position(path.clone()))),
        }
    }
    f(x, t, 0, &mut Vec::new())
}

/// `NAME x1 ... xn = body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorSpec {
    pub name: String,
    pub params: Vec<Name>,
    pub body: Term,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
}

impl CombinatorSpec {
    pub fn parse(text: &str) -> Result<CombinatorSpec, SpecError> {
        Self::parse_line(text, 1)
    }

    fn parse_line(text: &str, line: usize) -> Result<CombinatorSpec, SpecError> {
        let perr = |source| SpecError::Parse { line, source };
        let mut c = Cursor::new(text).map_err(perr)?;
        let name = c.expect_ident().map_err(perr)?;
        let mut params: Vec<Name> = Vec::new();
        while !c.is_sym("=") {
            let p = c.expect_ident().map_err(perr)?;
            if p.starts_with(|ch: char| ch.is_ascii_uppercase()) {
                return Err(SpecError::Invalid { line, msg: format!("parameter `{p}` must be a variable") });
            }
            if params.iter().any(|q| **q == *p) {
                return Err(SpecError::Invalid { line, msg: format!("parameter `{p}` repeated") });
            }
            params.push(Name::from(p));
        }
        c.expect_sym("=").map_err(perr)?;
        let body = c.term(false).map_err(perr)?;
        c.expect_eof().map_err(perr)?;
        let declared: BTreeSet<Name> = params.iter().cloned().collect();
        if let Some(v) = free_vars(&body).iter().find(|v| !declared.contains(*v)) {
            return Err(SpecError::Invalid { line, msg: format!("variable `{v}` is not a parameter") });
        }
        Ok(CombinatorSpec { name, params, body })
    }

    /// One spec per non-blank line; `--` comments.
    pub fn parse_file(text: &str) -> Result<Vec<CombinatorSpec>, SpecError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.split("--").next().unwrap_or("").trim().is_empty())
            .map(|(i, l)| Self::parse_line(l, i + 1))
            .collect()
    }

    pub fn applied_to_params(&self, head: Term) -> Term {
        Term::apply(head, self.params.iter().map(|p| Term::Var(p.clone())))
    }
}

impl fmt::Display for CombinatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(f, " = {}", self.body)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("{name}: cannot abstract parameter {param}: {source}")]
    NotAbstractable { name: String, param: Name, source: AbstractionError },
    #[error("{name}: compiled term {term} failed its self-test ({left} vs {right})")]
    SelfTest { name: String, term: Term, left: Term, right: Term },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OptimizeOptions {
    pub eta: bool,
}

/// Abstracts the parameters from last to first and checks the result
/// extensionally against the body before returning it.
pub fn compile_combinator(spec: &CombinatorSpec, rs: &RuleSet, opt: Option<OptimizeOptions>) -> Result<Term, CompileError> {
    let mut cur = spec.body.clone();
    for p in spec.params.iter().rev() {
        cur = abstract_var(p, &cur).map_err(|source| CompileError::NotAbstractable {
            name: spec.name.clone(),
            param: p.clone(),
            source,
        })?;
    }
    if let Some(o) = opt {
        cur = optimize(&cur, o);
    }
    match ext_equal(&spec.applied_to_params(cur.clone()), &spec.body, rs) {
        ExtResult::Equal(_) => Ok(cur),
        ExtResult::Unknown { left, right, .. } => {
            Err(CompileError::SelfTest { name: spec.name.clone(), term: cur, left, right })
        }
    }
}

struct Simplification {
    lhs: Term,
    rhs: Term,
}

fn simplifications(eta: bool) -> Vec<Simplification> {
    let mut rules = vec![
        ("Abst (Abst (Abst $a))", "Abst $a"),
        ("Abst (Abst k($a))", "k($a)"),
        ("Abst k(k($a))", "k(k($a))"),
        ("Abst k($a) k($b)", "k($a $b)"),
        ("Abst P1", "k(P1)"),
        ("Abst P2", "k(P2)"),
        ("Abst k(P1)", "P1"),
        ("Abst k(P2)", "P2"),
        ("Abst I", "k(I)"),
        ("Abst k(I)", "I"),
    ];
    if eta {
        rules.push(("Abst k($a) I", "$a"));
    }
    rules
        .into_iter()
        .map(|(l, r)| Simplification { lhs: parse_pattern(l).unwrap(), rhs: parse_pattern(r).unwrap() })
        .collect()
}

/// Rewrites with the size-reducing Abst identities until none applies.
/// `Abst <a,b> → <Abst a, Abst b>` is used only when, after simplifying the
/// components, the result is no larger than the input.
pub fn optimize(t: &Term, opts: OptimizeOptions) -> Term {
    let rules = simplifications(opts.eta);
    let pair_dist = parse_pattern("Abst <$a,$b>").unwrap();
    fn go(t: &Term, rules: &[Simplification], pair_dist: &Term) -> Term {
        let mut cur = match t {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => t.clone(),
            Term::K(b) => Term::k(go(b, rules, pair_dist)),
            Term::App(f, a) => Term::app(go(f, rules, pair_dist), go(a, rules, pair_dist)),
            Term::Pair(l, r) => Term::pair(go(l, rules, pair_dist), go(r, rules, pair_dist)),
        };
        loop {
            if let Some(next) = rules.iter().find_map(|r| match_pattern(&r.lhs, &cur).map(|s| substitute(&r.rhs, &s))) {
                cur = go(&next, rules, pair_dist);
                continue;
            }
            if let Some(s) = match_pattern(pair_dist, &cur) {
                let a = go(&Term::app(Term::abst(), s.get("$a").unwrap().clone()), rules, pair_dist);
                let b = go(&Term::app(Term::abst(), s.get("$b").unwrap().clone()), rules, pair_dist);
                let candidate = Term::pair(a, b);
                if candidate.size() <= cur.size() && candidate != cur {
                    cur = candidate;
                    continue;
                }
            }
            return cur;
        }
    }
    go(t, &rules, &pair_dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::{normalize, EngineConfig};
    use crate::syntax::parse;

    fn t(s: &str) -> Term {
        parse(s).unwrap()
    }

    fn pos(steps: &[Step]) -> Position {
        Position(steps.to_vec())
    }

    #[test]
    fn level_of_lone_variable() {
        let m = abstraction_levels("x", &t("x")).unwrap();
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec![(Position::root(), 0)]);
    }

    #[test]
    fn levels_of_x_xy_for_y() {
        use Step::*;
        let m = abstraction_levels("y", &t("x (x y)")).unwrap();
        let expect: LevelMap = [
            (pos(&[]), 0),
            (pos(&[Fun]), 1),
            (pos(&[Arg]), 0),
            (pos(&[Arg, Fun]), 1),
            (pos(&[Arg, Arg]), 0),
        ]
        .into_iter()
        .collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn function_position_rejected() {
        let e = abstraction_levels("x", &t("x y")).unwrap_err();
        assert!(matches!(
            e,
            AbstractionError::NotAbstractable { reason: LevelReason::XAtNonzeroLevel, level: 1, .. }
        ));
    }

    #[test]
    fn k_at_root_pushes_below_zero() {
        let e = abstraction_levels("x", &t("k(x y)")).unwrap_err();
        assert!(matches!(e, AbstractionError::NotAbstractable { reason: LevelReason::NegativeLevel, level: -1, .. }));
    }

    #[test]
    fn abstraction_examples() {
        assert_eq!(abstract_var("x", &t("x")).unwrap(), Term::identity());
        assert_eq!(abstract_var("y", &t("x (x y)")).unwrap(), t("Abst k(x) (Abst k(x) I)"));
        assert_eq!(abstract_var("x", &t("k(u)")).unwrap(), t("k(k(u))"));
    }

    #[test]
    fn abstraction_beta_law_by_normalisation() {
        let rs = RuleSet::standard(EngineConfig::default());
        let c = abstract_var("y", &t("x (x y)")).unwrap();
        assert_eq!(normalize(&Term::app(c, t("s")), &rs).result, t("x (x s)"));
        let cc = abstract_var("x", &t("Abst k(x) (Abst k(x) I)")).unwrap();
        assert!(!cc.contains_var("x"));
        assert_eq!(normalize(&Term::apply(cc, [t("x"), t("y")]), &rs).result, t("x (x y)"));
    }

    #[test]
    fn spec_parsing() {
        let s = CombinatorSpec::parse("b x y z = y (x y z)").unwrap();
        assert_eq!(s.name, "b");
        assert_eq!(s.params.len(), 3);
        assert!(CombinatorSpec::parse("b x x = x").is_err());
        assert!(CombinatorSpec::parse("b x = y").is_err());
        assert!(CombinatorSpec::parse("b x = ").is_err());
        let file = "-- comment\nB x y z = x (y z)\n\nT x y = y x -- swap\n";
        assert_eq!(CombinatorSpec::parse_file(file).unwrap().len(), 2);
    }

    #[test]
    fn compile_examples() {
        let rs = RuleSet::standard(EngineConfig::default());
        let b = compile_combinator(&CombinatorSpec::parse("b x y z = y (x y z)").unwrap(), &rs, None).unwrap();
        assert!(ext_equal(&b, &t("Abst Abst"), &rs).is_equal());
        let d = compile_combinator(&CombinatorSpec::parse("d x y z = x y (y z)").unwrap(), &rs, None).unwrap();
        assert!(ext_equal(&d, &t("Abst (Abst Abst)"), &rs).is_equal());
        let c = compile_combinator(&CombinatorSpec::parse("c x y = x (x y)").unwrap(), &rs, None).unwrap();
        assert!(ext_equal(&c, &t("Abst Abst I"), &rs).is_equal());
        let m = compile_combinator(&CombinatorSpec::parse("m x = x x").unwrap(), &rs, None);
        assert!(matches!(m, Err(CompileError::NotAbstractable { .. })));
    }

    #[test]
    fn optimizer_examples() {
        let o = OptimizeOptions::default();
        assert_eq!(optimize(&t("Abst k(u) k(v)"), o), t("k(u v)"));
        assert_eq!(optimize(&t("Abst k(P1) k(P2)"), o), t("P1 k(P2)"));
        assert_eq!(optimize(&t("Abst (Abst k(x))"), o), t("k(x)"));
        assert_eq!(optimize(&t("Abst I"), o), t("k(I)"));
        assert_eq!(optimize(&t("Abst <P1, k(P2)>"), o), t("<k(P1), P2>"));
        assert_eq!(optimize(&t("Abst <x, y>"), o), t("Abst <x, y>"));
        assert_eq!(optimize(&t("Abst k(u) I"), o), t("Abst k(u) I"));
        assert_eq!(optimize(&t("Abst k(u) I"), OptimizeOptions { eta: true }), t("u"));
    }
}
