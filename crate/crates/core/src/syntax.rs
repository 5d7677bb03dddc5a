//! Concrete syntax: a small lexer shared with the script and spec readers,
//! the term parser, and the canonical renderer.
//!
//! ```text
//! term := app ; app := atom | app atom
//! atom := Abst | Eq | P1 | P2 | IDENT | k ( term ) | < term , term > | ( term )
//! ```
//!
//! Identifiers starting with an uppercase letter are defined names, all other
//! identifiers are variables. `$name` is a pattern variable (rule syntax only).

use std::fmt;

use thiserror::Error;

use crate::term::{Const, Term};

/// Words that can never be identifiers.
pub const RESERVED: &[&str] = &[
    "k", "by", "have", "let", "hypothesis", "theorem", "proves", "uses", "false",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    PatVar(String),
    /// Digit-initial word, e.g. a theorem id `2.1d` or a count.
    Word(String),
    Str(String),
    Cite(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Word(s) => write!(f, "`{s}`"),
            Tok::PatVar(s) => write!(f, "`${s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Cite(s) => write!(f, "`@{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: expected {}, found {found}", expected.join(" | "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

const SYMBOLS: &[&str] = &[
    "!=", ":=", "=>", "(", ")", "<", ">", ",", "[", "]", "{", "}", "=", ":", ";",
];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, expected: &str, found: String| ParseError {
        line,
        col,
        expected: vec![expected.to_string()],
        found,
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() {
                let d = chars[i];
                let dash_ok = d == '-' && chars.get(i + 1) != Some(&'-');
                if is_ident_char(d) || d == '.' || d == '#' || dash_ok {
                    i += 1;
                } else {
                    break;
                }
            }
            Tok::Word(chars[start..i].iter().collect())
        } else if c == '$' {
            i += 1;
            let s = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            if s == i {
                return Err(err(tl, tc, "pattern variable name", "`$`".into()));
            }
            Tok::PatVar(chars[s..i].iter().collect())
        } else if c == '@' {
            i += 1;
            let s = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != ',' && chars[i] != ']' {
                i += 1;
            }
            if s == i {
                return Err(err(tl, tc, "rule name", "`@`".into()));
            }
            Tok::Cite(chars[s..i].iter().collect())
        } else if c == '"' {
            i += 1;
            let s = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(tl, tc, "closing `\"`", "end of line".into()));
            }
            let text: String = chars[s..i].iter().collect();
            i += 1;
            Tok::Str(text)
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    i += s.chars().count();
                    Tok::Sym(s)
                }
                None => return Err(err(tl, tc, "token", format!("`{c}`"))),
            }
        };
        col += i - start;
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Cursor over a token vector with expected-token error reporting.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Cursor, ParseError> {
        Ok(Cursor { toks: lex(src)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn error<S: Into<String>>(&self, expected: impl IntoIterator<Item = S>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            expected: expected.into_iter().map(Into::into).collect(),
            found: t.tok.to_string(),
        }
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error([format!("`{s}`")]))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error([format!("`{kw}`")]))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(["identifier"])),
        }
    }

    /// A theorem id: digit-initial word or identifier (`2.1d`, `VIII`).
    pub fn expect_id(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(["theorem id"])),
        }
    }

    pub fn expect_number(&mut self) -> Result<usize, ParseError> {
        if let Tok::Word(s) = self.peek().clone() {
            if let Ok(n) = s.parse() {
                self.bump();
                return Ok(n);
            }
        }
        Err(self.error(["number"]))
    }

    pub fn expect_eof(&mut self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(["end of input"]))
        }
    }

    fn starts_atom(&self, patterns: bool) -> bool {
        match self.peek() {
            Tok::Ident(s) => s == "k" || !RESERVED.contains(&s.as_str()),
            Tok::PatVar(_) => patterns,
            Tok::Sym("(") | Tok::Sym("<") => true,
            _ => false,
        }
    }

    pub fn term(&mut self, patterns: bool) -> Result<Term, ParseError> {
        let mut t = self.atom(patterns)?;
        while self.starts_atom(patterns) {
            let a = self.atom(patterns)?;
            t = Term::app(t, a);
        }
        Ok(t)
    }

    fn atom(&mut self, patterns: bool) -> Result<Term, ParseError> {
        let expected = ["term", "identifier", "`k(`", "`<`", "`(`"];
        match self.peek().clone() {
            Tok::Ident(s) if s == "k" => {
                self.bump();
                self.expect_sym("(")?;
                let b = self.term(patterns)?;
                self.expect_sym(")")?;
                Ok(Term::k(b))
            }
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(ident_term(&s))
            }
            Tok::PatVar(s) if patterns => {
                self.bump();
                Ok(Term::var(&format!("${s}")))
            }
            Tok::Sym("<") => {
                self.bump();
                let l = self.term(patterns)?;
                self.expect_sym(",")?;
                let r = self.term(patterns)?;
                self.expect_sym(">")?;
                Ok(Term::pair(l, r))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term(patterns)?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => Err(self.error(expected)),
        }
    }
}

fn ident_term(s: &str) -> Term {
    if let Some(c) = Const::from_keyword(s) {
        Term::Const(c)
    } else if s.starts_with(|c: char| c.is_ascii_uppercase()) {
        Term::def(s)
    } else {
        Term::var(s)
    }
}

pub fn parse(text: &str) -> Result<Term, ParseError> {
    let mut c = Cursor::new(text)?;
    let t = c.term(false)?;
    c.expect_eof()?;
    Ok(t)
}

/// Like [`parse`] but accepts `$name` pattern variables.
pub fn parse_pattern(text: &str) -> Result<Term, ParseError> {
    let mut c = Cursor::new(text)?;
    let t = c.term(true)?;
    c.expect_eof()?;
    Ok(t)
}

/// Canonical text with minimal parentheses.
pub fn render(t: &Term) -> String {
    let mut s = String::new();
    render_into(t, &mut s);
    s
}

fn render_into(t: &Term, out: &mut String) {
    match t {
        Term::Var(n) | Term::Def(n) => out.push_str(n),
        Term::Const(c) => out.push_str(c.keyword()),
        Term::K(b) => {
            out.push_str("k(");
            render_into(b, out);
            out.push(')');
        }
        Term::Pair(l, r) => {
            out.push('<');
            render_into(l, out);
            out.push(',');
            render_into(r, out);
            out.push('>');
        }
        Term::App(f, a) => {
            render_into(f, out);
            out.push(' ');
            if matches!(**a, Term::App(..)) {
                out.push('(');
                render_into(a, out);
                out.push(')');
            } else {
                render_into(a, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_wrap_applied() {
        assert_eq!(parse("k(x) y").unwrap(), Term::app(Term::k(Term::var("x")), Term::var("y")));
    }

    #[test]
    fn identity_pair() {
        assert_eq!(parse("<P1,P2>").unwrap(), Term::pair(Term::p1(), Term::p2()));
    }

    #[test]
    fn application_associates_left() {
        let expect = Term::apply(Term::abst(), [Term::var("x"), Term::var("y"), Term::var("z")]);
        assert_eq!(parse("Abst x y z").unwrap(), expect);
        assert_eq!(parse("((Abst x) y) z").unwrap(), expect);
    }

    #[test]
    fn render_examples() {
        assert_eq!(render(&Term::app(Term::k(Term::var("x")), Term::var("y"))), "k(x) y");
        assert_eq!(render(&Term::pair(Term::p1(), Term::p2())), "<P1,P2>");
        let t = Term::app(Term::var("x"), Term::app(Term::var("y"), Term::var("z")));
        assert_eq!(render(&t), "x (y z)");
    }

    #[test]
    fn uppercase_identifiers_are_defined_names() {
        assert_eq!(parse("I x").unwrap(), Term::app(Term::def("I"), Term::var("x")));
        assert_eq!(parse("Abst").unwrap(), Term::abst());
    }

    #[test]
    fn comments_and_newlines() {
        let t = parse("-- leading comment\nk(x) -- trailing\n  y").unwrap();
        assert_eq!(t, parse("k(x) y").unwrap());
    }

    #[test]
    fn syntax_error_reports_position_and_expectations() {
        let e = parse("k(x").unwrap_err();
        assert_eq!((e.line, e.col), (1, 4));
        assert!(e.expected.iter().any(|s| s.contains(")")));

        let e = parse("x\n  <a b>").unwrap_err();
        assert_eq!((e.line, e.col), (2, 7));
        assert_eq!(e.expected, vec!["`,`".to_string()]);

        assert!(parse("").is_err());
        assert!(parse("x )").is_err());
        assert!(parse("k").is_err());
    }

    #[test]
    fn pattern_variables_only_in_patterns() {
        assert!(parse("k($x)").is_err());
        assert_eq!(parse_pattern("k($x)").unwrap(), Term::k(Term::var("$x")));
    }

    #[test]
    fn reserved_words_are_not_identifiers() {
        assert!(parse("by").is_err());
        assert!(parse("x have").is_err());
    }

    #[test]
    fn lexer_words_and_citations() {
        let toks: Vec<Tok> = lex("2.2a#2 @pair-app 1.I -- c").unwrap().into_iter().map(|t| t.tok).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Word("2.2a#2".into()),
                Tok::Cite("pair-app".into()),
                Tok::Word("1.I".into()),
                Tok::Eof,
            ]
        );
        assert!(lex("a - b").is_err());
    }
}
