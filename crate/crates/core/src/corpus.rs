//! The corpus: an index of proof scripts and combinator specs, checked in
//! dependency order with passing theorems registered as they go.
//!
//! Index lines are `ID KIND FILE DEPS...` with `--` comments; `FILE` may
//! point into the spec file as `specs.trc#name`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::{compile_combinator, CombinatorSpec, CompileError};
use crate::kernel::{check_script, CheckReport, Registry, TheoremRecord, Verdict, AXIOM_VIII};
use crate::rewrite::RuleSet;
use crate::script::{parse_scripts, Justification, ProofScript, ProofStep};

/// Every id the index must contain, no more and no less.
pub const COVERAGE: &[&str] = &[
    "1.I", "2.1a", "2.1b", "2.1c", "2.1d", "2.1e", "2.2a", "2.2b", "2.2c", "2.3a", "2.3b", "2.3c",
    "2.4a", "2.4b", "2.4c", "2.5", "2.6", "2.7", "2.8a", "2.8b", "2.9a", "2.9b",
    "3.B", "3.C", "3.D", "3.F", "3.G", "3.H", "3.H1", "3.J", "3.K", "3.K1", "3.L", "3.L1", "3.M",
    "3.M1", "3.M2", "3.O", "3.O1", "3.O2", "3.Q", "3.Q1", "3.Q3", "3.R", "3.S", "3.T", "3.U", "3.V",
    "3.W", "3.W1", "3.W2", "3.W3", "1.b", "1.d", "1.c",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntryKind {
    Equality,
    Refutation,
    CompileSuccess,
    CompileFailure,
}

impl EntryKind {
    fn parse(s: &str) -> Option<EntryKind> {
        Some(match s {
            "equality" => EntryKind::Equality,
            "refutation" => EntryKind::Refutation,
            "compile-success" => EntryKind::CompileSuccess,
            "compile-failure" => EntryKind::CompileFailure,
            _ => return None,
        })
    }

    pub fn is_compile(self) -> bool {
        matches!(self, EntryKind::CompileSuccess | EntryKind::CompileFailure)
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryKind::Equality => "equality",
            EntryKind::Refutation => "refutation",
            EntryKind::CompileSuccess => "compile-success",
            EntryKind::CompileFailure => "compile-failure",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub kind: EntryKind,
    pub file: String,
    pub spec: Option<String>,
    pub deps: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusIndex {
    pub entries: Vec<IndexEntry>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("index line {line}: {msg}")]
    Index { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dependency cycle through {0}")]
    Cycle(String),
}

impl CorpusIndex {
    pub fn parse(text: &str) -> Result<CorpusIndex, CorpusError> {
        let mut entries: Vec<IndexEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split("--").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CorpusError::Index { line: i + 1, msg };
            let mut words = line.split_whitespace();
            let (Some(id), Some(kind), Some(file)) = (words.next(), words.next(), words.next()) else {
                return Err(err("expected `ID KIND FILE DEPS...`".into()));
            };
            let kind = EntryKind::parse(kind).ok_or_else(|| err(format!("unknown kind `{kind}`")))?;
            if entries.iter().any(|e| e.id == id) {
                return Err(err(format!("duplicate id `{id}`")));
            }
            let (file, spec) = match file.split_once('#') {
                Some((f, s)) => (f.to_string(), Some(s.to_string())),
                None => (file.to_string(), None),
            };
            if kind.is_compile() != spec.is_some() {
                return Err(err("compile entries, and only they, name a spec as FILE#name".into()));
            }
            entries.push(IndexEntry { id: id.into(), kind, file, spec, deps: words.map(String::from).collect() });
        }
        let idx = CorpusIndex { entries };
        let ids: BTreeSet<&str> = idx.entries.iter().map(|e| e.id.as_str()).collect();
        for e in &idx.entries {
            if let Some(d) = e.deps.iter().find(|d| !ids.contains(d.as_str()) && *d != AXIOM_VIII) {
                return Err(CorpusError::Index { line: 0, msg: format!("`{}` depends on unknown `{d}`", e.id) });
            }
        }
        idx.topological_order()?;
        Ok(idx)
    }

    pub fn load(dir: &Path) -> Result<CorpusIndex, CorpusError> {
        CorpusIndex::parse(&read(&dir.join("index"))?)
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entry positions grouped into waves: each wave depends only on earlier ones.
    pub fn topological_order(&self) -> Result<Vec<Vec<usize>>, CorpusError> {
        let pos: BTreeMap<&str, usize> = self.entries.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        let mut level = vec![usize::MAX; self.entries.len()];
        let mut remaining: Vec<usize> = (0..self.entries.len()).collect();
        let mut waves = Vec::new();
        while !remaining.is_empty() {
            let ready: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    self.entries[i].deps.iter().all(|d| pos.get(d.as_str()).is_none_or(|&j| level[j] < waves.len()))
                })
                .collect();
            if ready.is_empty() {
                return Err(CorpusError::Cycle(self.entries[remaining[0]].id.clone()));
            }
            for &i in &ready {
                level[i] = waves.len();
            }
            remaining.retain(|i| !ready.contains(i));
            waves.push(ready);
        }
        Ok(waves)
    }

    /// Differences between the index and [`COVERAGE`].
    pub fn coverage_problems(&self) -> Vec<String> {
        let have: BTreeSet<&str> = self.entries.iter().map(|e| e.id.as_str()).collect();
        let want: BTreeSet<&str> = COVERAGE.iter().copied().collect();
        let mut out: Vec<String> = want.difference(&have).map(|id| format!("missing `{id}`")).collect();
        out.extend(have.difference(&want).map(|id| format!("unexpected `{id}`")));
        out
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

#[derive(Clone, Debug)]
pub struct EntryOutcome {
    pub id: String,
    pub kind: EntryKind,
    pub report: CheckReport,
    pub blocked: bool,
    /// Statement summary for listings.
    pub statement: String,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CorpusRun {
    pub outcomes: Vec<EntryOutcome>,
    pub registry: Registry,
    pub coverage_problems: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CorpusOptions {
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl CorpusRun {
    pub fn all_pass(&self) -> bool {
        self.coverage_problems.is_empty() && self.outcomes.iter().all(|o| o.report.is_pass())
    }

    pub fn outcome(&self, id: &str) -> Option<&EntryOutcome> {
        self.outcomes.iter().find(|o| o.id == id)
    }

    /// Report lines in index order, then notes and coverage problems.
    pub fn report_lines(&self, trace: bool) -> Vec<String> {
        let mut out = Vec::new();
        for o in &self.outcomes {
            out.push(o.report.line());
            if trace {
                out.extend(o.trace.iter().map(|l| format!("  {l}")));
            }
        }
        out.extend(self.notes.iter().map(|n| format!("NOTE {n}")));
        out.extend(self.coverage_problems.iter().map(|p| format!("COVERAGE {p}")));
        let passed = self.outcomes.iter().filter(|o| o.report.is_pass()).count();
        out.push(format!("SUMMARY {passed}/{} passed", self.outcomes.len()));
        out
    }

    /// `id kind status statement deps: ...`, one line per entry.
    pub fn listing(&self, index: &CorpusIndex) -> Vec<String> {
        self.outcomes
            .iter()
            .map(|o| {
                let deps = index.get(&o.id).map(|e| e.deps.join(" ")).unwrap_or_default();
                let status = match (&o.report.verdict, o.blocked) {
                    (Verdict::Pass, _) => "PASS",
                    (_, true) => "BLOCKED",
                    _ => "FAIL",
                };
                let via = if deps.is_empty() { String::new() } else { format!(" via {deps}") };
                format!("{:<6} {:<15} {:<7} {}{}", o.id, o.kind.to_string(), status, o.statement, via)
            })
            .collect()
    }
}

fn step_trace(steps: &[ProofStep], depth: usize, n: &mut usize, out: &mut Vec<String>) {
    for st in steps {
        *n += 1;
        out.push(format!("{}{} {} : {} by {}", "  ".repeat(depth), n, st.label, st.judgment, st.just.keyword()));
        match &st.just {
            Justification::Contra { steps, .. } => step_trace(steps, depth + 1, n, out),
            Justification::Cases { p1, p2, .. } => {
                step_trace(&p1.steps, depth + 1, n, out);
                if let Some(p2) = p2 {
                    step_trace(&p2.steps, depth + 1, n, out);
                }
            }
            _ => {}
        }
    }
}

enum Prepared {
    Script(Box<ProofScript>),
    Spec(CombinatorSpec),
    Broken(String),
}

fn prepare(dir: &Path, e: &IndexEntry) -> Prepared {
    let text = match read(&dir.join(&e.file)) {
        Ok(t) => t,
        Err(err) => return Prepared::Broken(err.to_string()),
    };
    if let Some(name) = &e.spec {
        return match CombinatorSpec::parse_file(&text) {
            Ok(specs) => match specs.into_iter().find(|s| &s.name == name) {
                Some(s) => Prepared::Spec(s),
                None => Prepared::Broken(format!("no spec `{name}` in {}", e.file)),
            },
            Err(err) => Prepared::Broken(format!("{}: {err}", e.file)),
        };
    }
    let mut scripts = match parse_scripts(&text) {
        Ok(s) => s,
        Err(err) => return Prepared::Broken(format!("{}: parse error {err}", e.file)),
    };
    let Some(i) = scripts.iter().position(|s| s.id == e.id) else {
        return Prepared::Broken(format!("{} does not contain theorem `{}`", e.file, e.id));
    };
    let s = scripts.swap_remove(i);
    let uses: BTreeSet<&String> = s.uses.iter().collect();
    let deps: BTreeSet<&String> = e.deps.iter().collect();
    if uses != deps {
        return Prepared::Broken("index dependencies differ from the script's `uses`".into());
    }
    let refutes = s.is_refutation();
    if refutes != (e.kind == EntryKind::Refutation) {
        return Prepared::Broken(format!("index kind `{}` does not match the statement", e.kind));
    }
    Prepared::Script(Box::new(s))
}

fn check_entry(e: &IndexEntry, prepared: &Prepared, registry: &Registry, rs: &RuleSet) -> (CheckReport, String, Vec<String>) {
    match prepared {
        Prepared::Broken(msg) => (CheckReport::fail(&e.id, 0, msg.clone()), String::new(), vec![]),
        Prepared::Script(s) => {
            let report = check_script(s, registry, rs);
            let rec = TheoremRecord::from_script(s, Some(e.file.clone()));
            let mut trace = Vec::new();
            step_trace(&s.steps, 0, &mut 0, &mut trace);
            (report, rec.summary(), trace)
        }
        Prepared::Spec(spec) => {
            let start = Instant::now();
            let result = compile_combinator(spec, rs, None);
            let mut trace = Vec::new();
            let verdict = match (&result, e.kind) {
                (Ok(t), EntryKind::CompileSuccess) => {
                    trace.push(format!("{} ⊢ {t}", spec.name));
                    Verdict::Pass
                }
                (Err(CompileError::NotAbstractable { .. }), EntryKind::CompileFailure) => Verdict::Pass,
                (Ok(t), _) => Verdict::Fail { step: 1, reason: format!("compiled unexpectedly to {t}") },
                (Err(err), _) => Verdict::Fail { step: 1, reason: err.to_string() },
            };
            let statement = match e.kind {
                EntryKind::CompileSuccess => format!("{spec} compiles"),
                _ => format!("{spec} is not abstractable"),
            };
            let report = CheckReport { id: e.id.clone(), verdict, steps: 1, elapsed: start.elapsed() };
            (report, statement, trace)
        }
    }
}

/// Checks every entry of the corpus in `dir`. Entries whose dependencies
/// failed are reported as blocked; the run always covers the whole index.
pub fn run_corpus(dir: &Path, rs: &RuleSet, registry: Registry, opts: CorpusOptions) -> Result<CorpusRun, CorpusError> {
    let index = CorpusIndex::load(dir)?;
    run_index(dir, &index, rs, registry, opts)
}

pub fn run_index(dir: &Path, index: &CorpusIndex, rs: &RuleSet, mut registry: Registry, opts: CorpusOptions) -> Result<CorpusRun, CorpusError> {
    let waves = index.topological_order()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .expect("thread pool");
    let mut outcomes: Vec<Option<EntryOutcome>> = vec![None; index.entries.len()];
    let mut failed: BTreeSet<String> = BTreeSet::new();
    for wave in waves {
        let snapshot = &registry;
        let results: Vec<(usize, EntryOutcome, Option<ProofScript>)> = pool.install(|| {
            wave.par_iter()
                .map(|&i| {
                    let e = &index.entries[i];
                    if let Some(d) = e.deps.iter().find(|d| failed.contains(*d)) {
                        let report = CheckReport::fail(&e.id, 0, format!("blocked by {d}"));
                        let o = EntryOutcome { id: e.id.clone(), kind: e.kind, report, blocked: true, statement: String::new(), trace: vec![] };
                        return (i, o, None);
                    }
                    let prepared = prepare(dir, e);
                    let (report, statement, trace) = check_entry(e, &prepared, snapshot, rs);
                    let script = match prepared {
                        Prepared::Script(s) => Some(*s),
                        _ => None,
                    };
                    (i, EntryOutcome { id: e.id.clone(), kind: e.kind, report, blocked: false, statement, trace }, script)
                })
                .collect()
        });
        for (i, mut o, script) in results {
            let e = &index.entries[i];
            if o.report.is_pass() {
                if let Some(s) = script {
                    if let Err(err) = registry.register(TheoremRecord::from_script(&s, Some(e.file.clone())), &o.report) {
                        o.report = CheckReport::fail(&e.id, 0, err.to_string());
                    }
                }
            }
            if !o.report.is_pass() {
                failed.insert(e.id.clone());
            }
            outcomes[i] = Some(o);
        }
    }
    let mut notes = Vec::new();
    if !rs.config.corrected_axioms {
        notes.push(
            "printed pair-application `<$x,$y> $z → <$x $y, $x $z>` and Abst `Abst $x $y $z → $x k($y) ($y $z)` rules \
             are active; chains written for the corrected rules are expected to fail"
                .to_string(),
        );
    }
    Ok(CorpusRun {
        outcomes: outcomes.into_iter().map(|o| o.expect("every entry checked")).collect(),
        registry,
        coverage_problems: index.coverage_problems(),
        notes,
    })
}

/// The default corpus shipped with the workspace.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_parsing_and_order() {
        let idx = CorpusIndex::parse("a equality a.trc\nb refutation b.trc a VIII\n-- note\nc compile-success s.trc#c\n").unwrap();
        assert_eq!(idx.entries.len(), 3);
        assert_eq!(idx.entries[2].spec.as_deref(), Some("c"));
        assert_eq!(idx.topological_order().unwrap(), vec![vec![0, 2], vec![1]]);
        assert!(CorpusIndex::parse("a equality a.trc b\nb equality b.trc a\n").is_err());
        assert!(CorpusIndex::parse("a equality a.trc\na equality b.trc\n").is_err());
        assert!(CorpusIndex::parse("a wrong a.trc\n").is_err());
        assert!(CorpusIndex::parse("a equality a.trc zz\n").is_err());
    }

    #[test]
    fn coverage_of_shipped_index() {
        let idx = CorpusIndex::load(&default_dir()).unwrap();
        assert_eq!(idx.coverage_problems(), Vec::<String>::new());
        assert_eq!(idx.entries.len(), COVERAGE.len());
    }
}
