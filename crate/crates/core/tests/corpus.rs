use std::fs;
use std::path::Path;

use trc_core::corpus::{default_dir, run_corpus, CorpusOptions, CorpusRun};
use trc_core::kernel::{check_script, Registry};
use trc_core::mutate::mutants;
use trc_core::script::parse_scripts;
use trc_core::{EngineConfig, RuleSet};

fn run(dir: &Path, cfg: EngineConfig, jobs: usize) -> CorpusRun {
    let rs = RuleSet::standard(cfg);
    run_corpus(dir, &rs, Registry::new(), CorpusOptions { jobs }).unwrap()
}

#[test]
fn default_corpus_passes() {
    let r = run(&default_dir(), EngineConfig::default(), 0);
    for l in r.report_lines(false) {
        println!("{l}");
    }
    assert!(r.all_pass());
    assert_eq!(r.report_lines(false).last().unwrap(), "SUMMARY 55/55 passed");
}

#[test]
fn every_single_point_mutant_is_rejected() {
    let rs = RuleSet::standard(EngineConfig::default());
    let r = run(&default_dir(), EngineConfig::default(), 0);
    let mut total = 0;
    let mut survivors = Vec::new();
    for e in fs::read_dir(default_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_none_or(|x| x != "trc") || p.ends_with("specs.trc") {
            continue;
        }
        for s in parse_scripts(&fs::read_to_string(&p).unwrap()).unwrap() {
            for m in mutants(&s) {
                total += 1;
                if check_script(&m.script, &r.registry, &rs).is_pass() {
                    survivors.push(format!("{} {}", s.id, m.description));
                }
            }
        }
    }
    assert!(total > 300, "only {total} mutants");
    assert!(survivors.is_empty(), "{survivors:#?}");
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let a = run(&default_dir(), EngineConfig::default(), 1).report_lines(true);
    let b = run(&default_dir(), EngineConfig::default(), 4).report_lines(true);
    assert_eq!(a, b);
}

fn copy_corpus(to: &Path) {
    for e in fs::read_dir(default_dir()).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
    }
}

#[test]
fn missing_dependency_blocks_dependents() {
    let dir = tempfile::tempdir().unwrap();
    copy_corpus(dir.path());
    let entry = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().ends_with("-2.4a.trc"))
        .unwrap();
    fs::remove_file(entry).unwrap();
    let r = run(dir.path(), EngineConfig::default(), 0);
    let lines = r.report_lines(false);
    assert!(!r.all_pass());
    assert!(lines.contains(&"THEOREM 2.4c FAIL 0 blocked by 2.4a".to_string()), "{lines:#?}");
    assert!(lines.contains(&"THEOREM 2.5 FAIL 0 blocked by 2.4c".to_string()));
    for id in ["2.4c", "2.6", "2.9b", "3.M"] {
        assert!(r.outcome(id).unwrap().blocked, "{id}");
    }
    assert!(r.outcome("2.4b").unwrap().report.is_pass());
    assert!(r.outcome("1.I").unwrap().report.is_pass());
}

#[test]
fn printed_axioms_are_flagged() {
    let cfg = EngineConfig { corrected_axioms: false, ..EngineConfig::default() };
    let r = run(&default_dir(), cfg, 0);
    assert!(r.notes.iter().any(|n| n.contains("printed")));
    assert!(!r.all_pass());
}
