//! Verification kernel for the illative combinatory system TRC.
//!
//! * [`term`] and [`syntax`]: the term language and its concrete syntax.
//! * [`rewrite`]: axioms as rewrite rules, normalisation, extensional equality.
//! * [`stratify`] and [`abstraction`]: type assignment and bracket abstraction.
//! * [`kernel`] and [`script`]: proof scripts and their checker.
//! * [`corpus`]: the machine-checked results and the harness that runs them.

pub mod abstraction;
pub mod corpus;
pub mod kernel;
pub mod mutate;
pub mod rewrite;
pub mod script;
pub mod stratify;
pub mod syntax;
pub mod term;

pub use rewrite::{ext_equal, normalize, EngineConfig, ExtResult, NormalizeResult, Rule, RuleSet};
pub use syntax::{parse, parse_pattern, render, ParseError};
pub use term::{Position, Step, Substitution, Term};
