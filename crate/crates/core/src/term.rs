//! The term language: variables, the four constants, defined names,
//! application, `k(..)` wrapping and pairing.
//!
//! Terms are immutable and share subterms through `Arc`, so cloning is cheap
//! and positional replacement only copies the spine above the rewritten node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub type Name = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Abst,
    Eq,
    P1,
    P2,
}

impl Const {
    pub fn keyword(self) -> &'static str {
        match self {
            Const::Abst => "Abst",
            Const::Eq => "Eq",
            Const::P1 => "P1",
            Const::P2 => "P2",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Const> {
        Some(match s {
            "Abst" => Const::Abst,
            "Eq" => Const::Eq,
            "P1" => Const::P1,
            "P2" => Const::P2,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Free metavariable. Names starting with `$` are pattern variables.
    Var(Name),
    Const(Const),
    /// A declared constant (`I`, script `let` names, hypothesised combinators).
    Def(Name),
    App(Arc<Term>, Arc<Term>),
    K(Arc<Term>),
    Pair(Arc<Term>, Arc<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Name::from(name))
    }

    pub fn def(name: &str) -> Term {
        Term::Def(Name::from(name))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Arc::new(f), Arc::new(a))
    }

    /// Left-associated application `head a1 a2 ... an`.
    pub fn apply<I: IntoIterator<Item = Term>>(head: Term, args: I) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    pub fn k(body: Term) -> Term {
        Term::K(Arc::new(body))
    }

    pub fn pair(l: Term, r: Term) -> Term {
        Term::Pair(Arc::new(l), Arc::new(r))
    }

    pub fn abst() -> Term {
        Term::Const(Const::Abst)
    }

    pub fn eq() -> Term {
        Term::Const(Const::Eq)
    }

    pub fn p1() -> Term {
        Term::Const(Const::P1)
    }

    pub fn p2() -> Term {
        Term::Const(Const::P2)
    }

    /// The identity combinator as the defined name `I`.
    pub fn identity() -> Term {
        Term::def("I")
    }

    pub fn is_pattern_var(&self) -> bool {
        matches!(self, Term::Var(n) if n.starts_with('$'))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => 1,
            Term::K(b) => 1 + b.size(),
            Term::App(l, r) | Term::Pair(l, r) => 1 + l.size() + r.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => 1,
            Term::K(b) => 1 + b.depth(),
            Term::App(l, r) | Term::Pair(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Head symbol and argument list of an application spine.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Term::App(f, a) = cur {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn children(&self) -> Vec<(Step, &Term)> {
        match self {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => Vec::new(),
            Term::K(b) => vec![(Step::KBody, &**b)],
            Term::App(f, a) => vec![(Step::Fun, &**f), (Step::Arg, &**a)],
            Term::Pair(l, r) => vec![(Step::Left, &**l), (Step::Right, &**r)],
        }
    }

    pub fn child(&self, step: Step) -> Option<&Term> {
        match (self, step) {
            (Term::App(f, _), Step::Fun) => Some(f),
            (Term::App(_, a), Step::Arg) => Some(a),
            (Term::K(b), Step::KBody) => Some(b),
            (Term::Pair(l, _), Step::Left) => Some(l),
            (Term::Pair(_, r), Step::Right) => Some(r),
            _ => None,
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(n) => &**n == name,
            Term::Const(_) | Term::Def(_) => false,
            Term::K(b) => b.contains_var(name),
            Term::App(l, r) | Term::Pair(l, r) => l.contains_var(name) || r.contains_var(name),
        }
    }

    pub fn contains_def(&self, name: &str) -> bool {
        match self {
            Term::Def(n) => &**n == name,
            Term::Const(_) | Term::Var(_) => false,
            Term::K(b) => b.contains_def(name),
            Term::App(l, r) | Term::Pair(l, r) => l.contains_def(name) || r.contains_def(name),
        }
    }

    /// Rewrites every node bottom-up with `f`.
    pub fn map_leaves(&self, f: &impl Fn(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        match self {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => self.clone(),
            Term::K(b) => Term::k(b.map_leaves(f)),
            Term::App(l, r) => Term::app(l.map_leaves(f), r.map_leaves(f)),
            Term::Pair(l, r) => Term::pair(l.map_leaves(f), r.map_leaves(f)),
        }
    }

    /// Replace defined names by terms.
    pub fn replace_defs(&self, map: &BTreeMap<Name, Term>) -> Term {
        self.map_leaves(&|t| match t {
            Term::Def(n) => map.get(n).cloned(),
            _ => None,
        })
    }

    /// Preorder (leftmost-outermost) list of all positions.
    pub fn positions(&self) -> Vec<Position> {
        fn go(t: &Term, path: &mut Vec<Step>, out: &mut Vec<Position>) {
            out.push(Position(path.clone()));
            for (s, c) in t.children() {
                path.push(s);
                go(c, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::render(self))
    }
}

/// One selector of a [`Position`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Fun,
    Arg,
    KBody,
    Left,
    Right,
}

impl Step {
    fn letter(self) -> char {
        match self {
            Step::Fun => 'f',
            Step::Arg => 'a',
            Step::KBody => 'k',
            Step::Left => 'l',
            Step::Right => 'r',
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Step::Fun => "function",
            Step::Arg => "argument",
            Step::KBody => "k-body",
            Step::Left => "pair-left",
            Step::Right => "pair-right",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<Step>);

impl Position {
    pub fn root() -> Position {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, step: Step) -> Position {
        let mut p = self.0.clone();
        p.push(step);
        Position(p)
    }
}

/// Dotted path such as `f.a.k`; the root is `ε`.
impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", s.letter())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid position {position}: no {selector} child at step {index}")]
pub struct InvalidPosition {
    pub position: Position,
    pub index: usize,
    pub selector: &'static str,
}

pub fn navigate<'a>(t: &'a Term, p: &Position) -> Result<&'a Term, InvalidPosition> {
    let mut cur = t;
    for (i, s) in p.0.iter().enumerate() {
        cur = cur.child(*s).ok_or_else(|| InvalidPosition {
            position: p.clone(),
            index: i,
            selector: s.describe(),
        })?;
    }
    Ok(cur)
}

pub fn replace_at(t: &Term, p: &Position, new: Term) -> Result<Term, InvalidPosition> {
    fn go(t: &Term, path: &[Step], new: Term, full: &Position) -> Result<Term, InvalidPosition> {
        let Some((&s, rest)) = path.split_first() else {
            return Ok(new);
        };
        let err = || InvalidPosition {
            position: full.clone(),
            index: full.0.len() - path.len(),
            selector: s.describe(),
        };
        Ok(match (t, s) {
            (Term::App(f, a), Step::Fun) => Term::App(Arc::new(go(f, rest, new, full)?), a.clone()),
            (Term::App(f, a), Step::Arg) => Term::App(f.clone(), Arc::new(go(a, rest, new, full)?)),
            (Term::K(b), Step::KBody) => Term::K(Arc::new(go(b, rest, new, full)?)),
            (Term::Pair(l, r), Step::Left) => Term::Pair(Arc::new(go(l, rest, new, full)?), r.clone()),
            (Term::Pair(l, r), Step::Right) => Term::Pair(l.clone(), Arc::new(go(r, rest, new, full)?)),
            _ => return Err(err()),
        })
    }
    go(t, &p.0, new, p)
}

/// Simultaneous replacement of variables by terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution(pub BTreeMap<Name, Term>);

impl Substitution {
    pub fn new() -> Self {
        Substitution(BTreeMap::new())
    }

    pub fn single(name: &str, t: Term) -> Self {
        let mut s = Substitution::new();
        s.bind(name, t);
        s
    }

    pub fn bind(&mut self, name: &str, t: Term) {
        self.0.insert(Name::from(name), t);
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.0.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ; then`: apply `self`, then `then`.
    pub fn compose(&self, then: &Substitution) -> Substitution {
        let mut out: BTreeMap<Name, Term> =
            self.0.iter().map(|(k, v)| (k.clone(), substitute(v, then))).collect();
        for (k, v) in &then.0 {
            out.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Substitution(out)
    }
}

pub fn substitute(t: &Term, s: &Substitution) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var(n) => s.0.get(n).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) | Term::Def(_) => t.clone(),
        Term::K(b) => Term::k(substitute(b, s)),
        Term::App(l, r) => Term::app(substitute(l, s), substitute(r, s)),
        Term::Pair(l, r) => Term::pair(substitute(l, s), substitute(r, s)),
    }
}

/// First-order matching. Only `$`-variables of the pattern bind; every other
/// node, including plain variables, must match literally.
pub fn match_pattern(pattern: &Term, t: &Term) -> Option<Substitution> {
    let mut s = Substitution::new();
    match_into(pattern, t, &mut s).then_some(s)
}

/// Matching that extends an existing substitution; used to match both sides
/// of an equation against a pair of terms.
pub fn match_into(pattern: &Term, t: &Term, s: &mut Substitution) -> bool {
    match (pattern, t) {
        (Term::Var(n), _) if n.starts_with('$') => match s.0.get(n) {
            Some(bound) => bound == t,
            None => {
                s.0.insert(n.clone(), t.clone());
                true
            }
        },
        (Term::Var(a), Term::Var(b)) => a == b,
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Def(a), Term::Def(b)) => a == b,
        (Term::K(p), Term::K(b)) => match_into(p, b, s),
        (Term::App(pf, pa), Term::App(f, a)) | (Term::Pair(pf, pa), Term::Pair(f, a)) => {
            match_into(pf, f, s) && match_into(pa, a, s)
        }
        _ => false,
    }
}

pub fn free_vars(t: &Term) -> BTreeSet<Name> {
    fn go(t: &Term, out: &mut BTreeSet<Name>) {
        match t {
            Term::Var(n) => {
                out.insert(n.clone());
            }
            Term::Const(_) | Term::Def(_) => {}
            Term::K(b) => go(b, out),
            Term::App(l, r) | Term::Pair(l, r) => {
                go(l, out);
                go(r, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut out);
    out
}

pub fn defined_names(t: &Term) -> BTreeSet<Name> {
    fn go(t: &Term, out: &mut BTreeSet<Name>) {
        match t {
            Term::Def(n) => {
                out.insert(n.clone());
            }
            Term::Const(_) | Term::Var(_) => {}
            Term::K(b) => go(b, out),
            Term::App(l, r) | Term::Pair(l, r) => {
                go(l, out);
                go(r, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut out);
    out
}

/// First name of the scheme `v0, v1, ...` not in `avoid`.
pub fn fresh_var(avoid: &BTreeSet<Name>) -> Name {
    (0..)
        .map(|i| Name::from(format!("v{i}")))
        .find(|n| !avoid.contains(n))
        .expect("unbounded scheme")
}

/// `n` distinct fresh names, each avoiding `avoid` and the previous ones.
pub fn fresh_vars(avoid: &BTreeSet<Name>, n: usize) -> Vec<Name> {
    let mut avoid = avoid.clone();
    (0..n)
        .map(|_| {
            let v = fresh_var(&avoid);
            avoid.insert(v.clone());
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_pattern};

    fn t(s: &str) -> Term {
        parse(s).unwrap()
    }

    #[test]
    fn substitution_is_simultaneous() {
        let s = Substitution::single("x", t("k(y)"));
        assert_eq!(substitute(&t("x x"), &s), t("k(y) k(y)"));
        let mut swap = Substitution::new();
        swap.bind("x", t("y"));
        swap.bind("y", t("x"));
        assert_eq!(substitute(&t("x y"), &swap), t("y x"));
    }

    #[test]
    fn empty_substitution_is_identity() {
        let term = t("Abst k(Eq) <M, k(P2)> u");
        assert_eq!(substitute(&term, &Substitution::new()), term);
    }

    #[test]
    fn substitution_inside_eq_pair() {
        let s = Substitution::single("x", t("u u"));
        assert_eq!(substitute(&t("Eq <x, P2>"), &s), t("Eq <u u, P2>"));
    }

    #[test]
    fn matching_examples() {
        let m = match_pattern(&parse_pattern("k($a) $b").unwrap(), &t("k(P1) P2")).unwrap();
        assert_eq!(m.get("$a"), Some(&t("P1")));
        assert_eq!(m.get("$b"), Some(&t("P2")));

        assert!(match_pattern(&parse_pattern("U k($x)").unwrap(), &t("U P1")).is_none());

        let m = match_pattern(&parse_pattern("<$x,$y> $z").unwrap(), &t("<k(a), b> c")).unwrap();
        assert_eq!(m.get("$x"), Some(&t("k(a)")));
        assert_eq!(m.get("$y"), Some(&t("b")));
        assert_eq!(m.get("$z"), Some(&t("c")));
    }

    #[test]
    fn repeated_pattern_variables_need_identical_subterms() {
        let p = parse_pattern("<P1 $x, P2 $x>").unwrap();
        assert!(match_pattern(&p, &t("<P1 a, P2 a>")).is_some());
        assert!(match_pattern(&p, &t("<P1 a, P2 b>")).is_none());
    }

    #[test]
    fn plain_variables_in_patterns_are_rigid() {
        assert!(match_pattern(&t("x"), &t("y")).is_none());
        assert!(match_pattern(&t("x"), &t("x")).is_some());
    }

    #[test]
    fn navigation_and_replacement() {
        let term = t("k(x) y");
        let p = Position(vec![Step::Fun, Step::KBody]);
        assert_eq!(navigate(&term, &p).unwrap(), &t("x"));

        let term = t("Eq <u u, P2>");
        let p = Position(vec![Step::Arg, Step::Left]);
        assert_eq!(replace_at(&term, &p, t("s")).unwrap(), t("Eq <s, P2>"));

        let term = t("<P1 x, P2 x>");
        assert_eq!(navigate(&term, &Position(vec![Step::Right])).unwrap(), &t("P2 x"));
    }

    #[test]
    fn invalid_position_names_failing_selector() {
        let err = navigate(&t("x y"), &Position(vec![Step::Arg, Step::KBody])).unwrap_err();
        assert_eq!(err.index, 1);
        assert_eq!(err.selector, "k-body");
        assert!(replace_at(&t("x"), &Position(vec![Step::Left]), t("y")).is_err());
    }

    #[test]
    fn free_variables() {
        assert!(free_vars(&t("Abst k(Eq) <M, k(P2)>")).is_empty());
        let fv: Vec<String> = free_vars(&t("x (x y)")).iter().map(|n| n.to_string()).collect();
        assert_eq!(fv, vec!["x", "y"]);
    }

    #[test]
    fn fresh_variable_scheme() {
        let avoid: BTreeSet<Name> = [Name::from("z")].into_iter().collect();
        assert_eq!(&*fresh_var(&avoid), "v0");
        let avoid: BTreeSet<Name> = [Name::from("v0"), Name::from("v2")].into_iter().collect();
        let vs: Vec<String> = fresh_vars(&avoid, 2).iter().map(|n| n.to_string()).collect();
        assert_eq!(vs, vec!["v1", "v3"]);
    }

    #[test]
    fn position_rendering() {
        assert_eq!(Position::root().to_string(), "ε");
        assert_eq!(Position(vec![Step::Fun, Step::Arg, Step::KBody]).to_string(), "f.a.k");
    }
}
