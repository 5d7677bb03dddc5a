//! Proof scripts: abstract syntax and parser.
//!
//! ```text
//! theorem 2.6 "There is no M such that Mx = xx" proves false {
//!   uses 2.1d 2.2a 2.4a
//!   hypothesis M : M $x = $x $x
//!   let T := Abst k(Eq) <M, k(P2)>
//!   have c : T T = Eq <T T, P2> by chain [T T, ..., Eq <T T, P2>]
//!   have n : Eq <T T, P2> != T T by thm 2.4a [x := T T]
//!   have f : false by falsum c n
//! }
//! ```

use std::fmt;

use crate::syntax::{Cursor, ParseError, Tok};
use crate::term::{Name, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Judgment {
    Equal(Term, Term),
    NotEqual(Term, Term),
    Falsum,
}

impl Judgment {
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Judgment::Equal(s, t) | Judgment::NotEqual(s, t) => vec![s, t],
            Judgment::Falsum => vec![],
        }
    }

    pub fn map_terms(&self, f: impl Fn(&Term) -> Term) -> Judgment {
        match self {
            Judgment::Equal(s, t) => Judgment::Equal(f(s), f(t)),
            Judgment::NotEqual(s, t) => Judgment::NotEqual(f(s), f(t)),
            Judgment::Falsum => Judgment::Falsum,
        }
    }

    /// Equal up to the orientation of `=` and `!=`.
    pub fn same_as(&self, other: &Judgment) -> bool {
        match (self, other) {
            (Judgment::Equal(a, b), Judgment::Equal(c, d)) | (Judgment::NotEqual(a, b), Judgment::NotEqual(c, d)) => {
                (a == c && b == d) || (a == d && b == c)
            }
            (Judgment::Falsum, Judgment::Falsum) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgment::Equal(s, t) => write!(f, "{s} = {t}"),
            Judgment::NotEqual(s, t) => write!(f, "{s} != {t}"),
            Judgment::Falsum => f.write_str("false"),
        }
    }
}

/// A schematic equation about a hypothetical constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypothesis {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtVars {
    Count(usize),
    Named(Vec<Name>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainLink {
    pub term: Term,
    pub cite: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub h1: String,
    pub h2: String,
    pub steps: Vec<ProofStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Chain(Vec<ChainLink>),
    Normalize { with: Vec<String>, fuel: Option<usize> },
    Ext { vars: ExtVars, inner: Box<Justification> },
    Thm { id: String, index: Option<usize>, inst: Vec<(Name, Term)> },
    NeqApp { args: Vec<Term>, facts: [String; 3] },
    Falsum(String, String),
    KInject(String),
    Contra { hyp: String, steps: Vec<ProofStep> },
    Cases { a: Term, b: Term, p1: Branch, p2: Option<Branch> },
    Refute { id: String, inst: Vec<(String, Term)>, facts: Vec<String> },
}

impl Justification {
    pub fn keyword(&self) -> &'static str {
        match self {
            Justification::Chain(_) => "chain",
            Justification::Normalize { .. } => "normalize",
            Justification::Ext { .. } => "ext",
            Justification::Thm { .. } => "thm",
            Justification::NeqApp { .. } => "neqapp",
            Justification::Falsum(..) => "falsum",
            Justification::KInject(_) => "kinject",
            Justification::Contra { .. } => "contra",
            Justification::Cases { .. } => "cases",
            Justification::Refute { .. } => "refute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofStep {
    pub label: String,
    pub judgment: Judgment,
    pub just: Justification,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofScript {
    pub id: String,
    pub title: String,
    pub proves: Vec<Judgment>,
    pub uses: Vec<String>,
    pub hypotheses: Vec<Hypothesis>,
    pub lets: Vec<(String, Term)>,
    pub steps: Vec<ProofStep>,
}

impl ProofScript {
    pub fn is_refutation(&self) -> bool {
        self.proves.contains(&Judgment::Falsum)
    }
}

const JUSTIFICATIONS: &[&str] =
    &["chain", "normalize", "ext", "thm", "neqapp", "falsum", "kinject", "contra", "cases", "refute"];

pub fn parse_scripts(src: &str) -> Result<Vec<ProofScript>, ParseError> {
    let mut c = Cursor::new(src)?;
    let mut out = Vec::new();
    while !c.at_eof() {
        out.push(theorem(&mut c)?);
    }
    Ok(out)
}

/// Exactly one theorem.
pub fn parse_script(src: &str) -> Result<ProofScript, ParseError> {
    let mut c = Cursor::new(src)?;
    let s = theorem(&mut c)?;
    c.expect_eof()?;
    Ok(s)
}

fn theorem(c: &mut Cursor) -> Result<ProofScript, ParseError> {
    c.expect_keyword("theorem")?;
    let id = c.expect_id()?;
    let title = match c.peek().clone() {
        Tok::Str(s) => {
            c.bump();
            s
        }
        _ => return Err(c.error(["title string"])),
    };
    c.expect_keyword("proves")?;
    let mut proves = vec![judgment(c)?];
    while c.eat_sym(";") {
        proves.push(judgment(c)?);
    }
    c.expect_sym("{")?;
    let mut s = ProofScript { id, title, proves, uses: vec![], hypotheses: vec![], lets: vec![], steps: vec![] };
    loop {
        if c.eat_keyword("uses") {
            while !c.is_sym("}") && !matches!(c.peek(), Tok::Ident(w) if crate::syntax::RESERVED.contains(&w.as_str())) {
                s.uses.push(c.expect_id()?);
            }
        } else if c.eat_keyword("hypothesis") {
            let name = c.expect_ident()?;
            c.expect_sym(":")?;
            let lhs = c.term(true)?;
            c.expect_sym("=")?;
            let rhs = c.term(true)?;
            s.hypotheses.push(Hypothesis { name, lhs, rhs });
        } else if c.eat_keyword("let") {
            let name = c.expect_ident()?;
            c.expect_sym(":=")?;
            s.lets.push((name, c.term(false)?));
        } else if c.is_keyword("have") {
            s.steps.push(step(c)?);
        } else {
            c.expect_sym("}").map_err(|_| c.error(["`uses`", "`hypothesis`", "`let`", "`have`", "`}`"]))?;
            return Ok(s);
        }
    }
}

fn judgment(c: &mut Cursor) -> Result<Judgment, ParseError> {
    if c.eat_keyword("false") {
        return Ok(Judgment::Falsum);
    }
    let s = c.term(false)?;
    if c.eat_sym("=") {
        Ok(Judgment::Equal(s, c.term(false)?))
    } else if c.eat_sym("!=") {
        Ok(Judgment::NotEqual(s, c.term(false)?))
    } else {
        Err(c.error(["`=`", "`!=`"]))
    }
}

fn step(c: &mut Cursor) -> Result<ProofStep, ParseError> {
    let line = c.line();
    c.expect_keyword("have")?;
    let label = c.expect_id()?;
    c.expect_sym(":")?;
    let judgment = judgment(c)?;
    c.expect_keyword("by")?;
    let just = justification(c)?;
    Ok(ProofStep { label, judgment, just, line })
}

fn block(c: &mut Cursor) -> Result<Vec<ProofStep>, ParseError> {
    c.expect_sym("{")?;
    let mut steps = Vec::new();
    while !c.eat_sym("}") {
        if !c.is_keyword("have") {
            return Err(c.error(["`have`", "`}`"]));
        }
        steps.push(step(c)?);
    }
    Ok(steps)
}

fn label(c: &mut Cursor) -> Result<String, ParseError> {
    c.expect_id()
}

fn bracketed<T>(c: &mut Cursor, mut item: impl FnMut(&mut Cursor) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
    c.expect_sym("[")?;
    let mut out = Vec::new();
    if c.eat_sym("]") {
        return Ok(out);
    }
    loop {
        out.push(item(c)?);
        if c.eat_sym("]") {
            return Ok(out);
        }
        c.expect_sym(",").map_err(|_| c.error(["`,`", "`]`"]))?;
    }
}

fn binding(c: &mut Cursor) -> Result<(String, Term), ParseError> {
    let name = c.expect_ident()?;
    c.expect_sym(":=")?;
    Ok((name, c.term(false)?))
}

fn justification(c: &mut Cursor) -> Result<Justification, ParseError> {
    let kw = match c.peek().clone() {
        Tok::Ident(w) if JUSTIFICATIONS.contains(&w.as_str()) => {
            c.bump();
            w
        }
        _ => return Err(c.error(JUSTIFICATIONS.iter().map(|k| format!("`{k}`")))),
    };
    Ok(match kw.as_str() {
        "chain" => Justification::Chain(bracketed(c, |c| {
            let term = c.term(false)?;
            let cite = match c.peek().clone() {
                Tok::Cite(s) => {
                    c.bump();
                    Some(s)
                }
                _ => None,
            };
            Ok(ChainLink { term, cite })
        })?),
        "normalize" => {
            let mut with = Vec::new();
            if c.eat_keyword("with") {
                while matches!(c.peek(), Tok::Word(_) | Tok::Ident(_)) && !c.is_keyword("fuel") && !c.is_keyword("have") {
                    with.push(c.expect_id()?);
                }
            }
            let fuel = if c.eat_keyword("fuel") { Some(c.expect_number()?) } else { None };
            Justification::Normalize { with, fuel }
        }
        "ext" => {
            let vars = if c.is_sym("[") {
                ExtVars::Named(bracketed(c, |c| c.expect_ident().map(|s| Name::from(s.as_str())))?)
            } else {
                ExtVars::Count(c.expect_number()?)
            };
            let inner = if matches!(c.peek(), Tok::Ident(w) if JUSTIFICATIONS.contains(&w.as_str())) {
                justification(c)?
            } else {
                Justification::Normalize { with: vec![], fuel: None }
            };
            Justification::Ext { vars, inner: Box::new(inner) }
        }
        "thm" => {
            let raw = c.expect_id()?;
            let (id, index) = match raw.split_once('#') {
                Some((id, n)) => {
                    let n = n.parse().map_err(|_| c.error(["statement index after `#`"]))?;
                    (id.to_string(), Some(n))
                }
                None => (raw, None),
            };
            let inst = if c.is_sym("[") {
                bracketed(c, binding)?.into_iter().map(|(n, t)| (Name::from(n.as_str()), t)).collect()
            } else {
                vec![]
            };
            Justification::Thm { id, index, inst }
        }
        "neqapp" => {
            let args = bracketed(c, |c| c.term(false))?;
            let facts = [label(c)?, label(c)?, label(c)?];
            Justification::NeqApp { args, facts }
        }
        "falsum" => Justification::Falsum(label(c)?, label(c)?),
        "kinject" => Justification::KInject(label(c)?),
        "contra" => {
            let hyp = label(c)?;
            Justification::Contra { hyp, steps: block(c)? }
        }
        "cases" => {
            if !matches!(c.peek(), Tok::Ident(w) if w == "Eq") {
                return Err(c.error(["`Eq`"]));
            }
            c.bump();
            c.expect_sym("<")?;
            let a = c.term(false)?;
            c.expect_sym(",")?;
            let b = c.term(false)?;
            c.expect_sym(">")?;
            c.expect_sym("{")?;
            let p1 = branch(c, "p1")?;
            let p2 = if c.eat_sym(";") && !c.is_sym("}") { Some(branch(c, "p2")?) } else { None };
            c.expect_sym("}")?;
            Justification::Cases { a, b, p1, p2 }
        }
        "refute" => {
            let id = c.expect_id()?;
            let inst = if c.is_sym("[") { bracketed(c, binding)? } else { vec![] };
            let mut facts = Vec::new();
            while matches!(c.peek(), Tok::Ident(w) if !crate::syntax::RESERVED.contains(&w.as_str()))
                || matches!(c.peek(), Tok::Word(_))
            {
                facts.push(label(c)?);
            }
            Justification::Refute { id, inst, facts }
        }
        _ => unreachable!("keyword list"),
    })
}

fn branch(c: &mut Cursor, kw: &str) -> Result<Branch, ParseError> {
    if !c.eat_keyword(kw) {
        return Err(c.error([format!("`{kw}`")]));
    }
    let names = bracketed(c, label)?;
    let [h1, h2]: [String; 2] = names.try_into().map_err(|_| c.error(["two labels"]))?;
    c.expect_sym("=>")?;
    Ok(Branch { h1, h2, steps: block(c)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    const SAMPLE: &str = r#"
theorem 2.4a "Eq <x,P2> is not x" proves Eq <x,P2> != x {
  uses VIII
  have v : P1 != P2 by thm VIII
  have g : Eq <x,P2> != x by contra H {
    have f : false by cases Eq <x,P2> {
      p1 [e, q] => {
        have a : P1 = P2 by chain [P1, Eq <x,P2> @q, x @H, P2]
        have z : false by falsum a v
      } ;
      p2 [e, q] => {
        have a : x = P2 by chain [x, Eq <x,P2>, P2]
        have z : false by falsum a e
      }
    }
  }
}
"#;

    #[test]
    fn parses_nested_blocks() {
        let s = parse_script(SAMPLE).unwrap();
        assert_eq!(s.id, "2.4a");
        assert_eq!(s.uses, vec!["VIII"]);
        assert_eq!(s.proves, vec![Judgment::NotEqual(parse("Eq <x,P2>").unwrap(), parse("x").unwrap())]);
        assert_eq!(s.steps.len(), 2);
        let Justification::Contra { hyp, steps } = &s.steps[1].just else { panic!() };
        assert_eq!(hyp, "H");
        let Justification::Cases { p1, p2, .. } = &steps[0].just else { panic!() };
        assert_eq!(p1.h2, "q");
        assert!(p2.is_some());
        let Justification::Chain(links) = &p1.steps[0].just else { panic!() };
        assert_eq!(links[1].cite.as_deref(), Some("q"));
    }

    #[test]
    fn parses_other_justifications() {
        let src = r#"theorem 9 "t" proves false {
          uses 2.2c 2.7
          hypothesis K : K $x = k($x)
          let K1 := Abst Abst K
          have a : K1 x = k(x x) by ext [y] chain [K1 x y, k(x x) y]
          have b : x = x by ext 2
          have c : P1 x = P1 x by normalize with 2.2c fuel 50
          have d : P1 = P1 by thm 2.2c#2 [x := P1, y := P2]
          have e : false by refute 2.7 [K1 := K1] a
        }"#;
        let s = parse_script(src).unwrap();
        assert_eq!(s.hypotheses[0].lhs, crate::syntax::parse_pattern("K $x").unwrap());
        assert_eq!(s.lets[0].0, "K1");
        let kinds: Vec<&str> = s.steps.iter().map(|st| st.just.keyword()).collect();
        assert_eq!(kinds, ["ext", "ext", "normalize", "thm", "refute"]);
        assert_eq!(s.steps[2].just, Justification::Normalize { with: vec!["2.2c".into()], fuel: Some(50) });
        assert!(matches!(&s.steps[3].just, Justification::Thm { index: Some(2), inst, .. } if inst.len() == 2));
        assert!(matches!(&s.steps[4].just, Justification::Refute { facts, .. } if facts == &["a".to_string()]));
    }

    #[test]
    fn reports_position_of_errors() {
        let e = parse_script("theorem 1 \"t\" proves x = x {\n  have a : x = x by magic\n}").unwrap_err();
        assert_eq!((e.line, e.col), (2, 21));
        assert!(parse_script("theorem 1 \"t\" proves x {").is_err());
    }
}
