use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trc_core::abstraction::{abstract_var, optimize, OptimizeOptions};
use trc_core::corpus::{default_dir, run_corpus, CorpusOptions};
use trc_core::kernel::{register_derived_rule, Registry};
use trc_core::stratify::{satisfies, stratify, StratifyResult};
use trc_core::term::{free_vars, match_pattern, navigate, replace_at, substitute};
use trc_core::{ext_equal, parse, parse_pattern, render, EngineConfig, RuleSet, Substitution, Term};

fn leaf(rng: &mut ChaCha8Rng, names: &[&str]) -> Term {
    match rng.gen_range(0..7) {
        0 => Term::p1(),
        1 => Term::p2(),
        2 => Term::abst(),
        3 => Term::eq(),
        4 => Term::identity(),
        _ => Term::var(names[rng.gen_range(0..names.len())]),
    }
}

fn term(rng: &mut ChaCha8Rng, depth: u32, names: &[&str]) -> Term {
    if depth == 0 || rng.gen_bool(0.3) {
        return leaf(rng, names);
    }
    match rng.gen_range(0..4) {
        0 => Term::k(term(rng, depth - 1, names)),
        1 => Term::pair(term(rng, depth - 1, names), term(rng, depth - 1, names)),
        _ => Term::app(term(rng, depth - 1, names), term(rng, depth - 1, names)),
    }
}

/// A term in which `x` occurs only at level 0, so it can be abstracted.
fn admissible(rng: &mut ChaCha8Rng, depth: u32, level: i64) -> Term {
    let closed = |rng: &mut ChaCha8Rng| match rng.gen_range(0..4) {
        0 => Term::p1(),
        1 => Term::p2(),
        2 => Term::var("y"),
        _ => Term::var("z"),
    };
    if depth == 0 {
        return if level == 0 { Term::var("x") } else { closed(rng) };
    }
    match rng.gen_range(0..5) {
        0 if level == 0 => Term::var("x"),
        0 => closed(rng),
        1 if level > 0 => Term::k(admissible(rng, depth - 1, level - 1)),
        1 => Term::k(closed(rng)),
        2 => Term::pair(admissible(rng, depth - 1, level), admissible(rng, depth - 1, level)),
        _ => Term::app(admissible(rng, depth - 1, level + 1), admissible(rng, depth - 1, level)),
    }
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rules() -> RuleSet {
    RuleSet::standard(EngineConfig::default())
}

/// The standard rules plus `P1 x y → P1 (x y)` and its `P2` twin, which the
/// optimizer's projection identities rely on.
fn derived_rules() -> RuleSet {
    static RS: OnceLock<RuleSet> = OnceLock::new();
    RS.get_or_init(|| {
        let rs = rules();
        let run = run_corpus(&default_dir(), &rs, Registry::new(), CorpusOptions::default()).unwrap();
        [("P1 $x $y", "P1 ($x $y)"), ("P2 $x $y", "P2 ($x $y)")].iter().fold(rs, |rs, (l, r)| {
            register_derived_rule(&rs, &run.registry, "2.2c", parse_pattern(l).unwrap(), parse_pattern(r).unwrap())
                .unwrap()
        })
    })
    .clone()
}

proptest! {
    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let t = term(&mut seeded(seed), 5, &["x", "y", "z"]);
        prop_assert_eq!(parse(&render(&t)).unwrap(), t);
    }

    #[test]
    fn matching_recovers_the_instance(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = term(&mut rng, 4, &["$a", "$b", "$c"]);
        let mut s = Substitution::new();
        for v in ["$a", "$b", "$c"] {
            s.bind(v, term(&mut rng, 3, &["x", "y"]));
        }
        let inst = substitute(&p, &s);
        let found = match_pattern(&p, &inst);
        prop_assert!(found.is_some());
        prop_assert_eq!(substitute(&p, &found.unwrap()), inst);
    }

    #[test]
    fn positions_navigate_and_replace_coherently(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let t = term(&mut rng, 5, &["x", "y"]);
        let u = term(&mut rng, 2, &["z"]);
        for p in t.positions() {
            let sub = navigate(&t, &p).unwrap().clone();
            prop_assert_eq!(&replace_at(&t, &p, sub).unwrap(), &t);
            let r = replace_at(&t, &p, u.clone()).unwrap();
            prop_assert_eq!(navigate(&r, &p).unwrap(), &u);
        }
    }

    #[test]
    fn substitution_composes(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let t = term(&mut rng, 4, &["x", "y", "z"]);
        let mut a = Substitution::new();
        a.bind("x", term(&mut rng, 3, &["y", "z"]));
        let mut b = Substitution::new();
        b.bind("y", term(&mut rng, 3, &["z", "w"]));
        b.bind("x", term(&mut rng, 2, &["w"]));
        prop_assert_eq!(substitute(&substitute(&t, &a), &b), substitute(&t, &a.compose(&b)));
    }

    #[test]
    fn abstraction_is_sound(seed in any::<u64>()) {
        let rs = rules();
        let t = admissible(&mut seeded(seed), 6, 0);
        let f = abstract_var("x", &t).unwrap();
        prop_assert!(!free_vars(&f).contains("x"));
        prop_assert!(ext_equal(&Term::app(f.clone(), Term::var("x")), &t, &rs).is_equal());
        let g = optimize(&f, OptimizeOptions::default());
        prop_assert!(!free_vars(&g).contains("x"));
        prop_assert!(ext_equal(&g, &f, &derived_rules()).is_equal(), "{} vs {}", g, f);
    }

    #[test]
    fn stratification_answers_check_out(seed in any::<u64>()) {
        let t = term(&mut seeded(seed), 5, &["x", "y", "z"]);
        match stratify(&t) {
            StratifyResult::Stratified(m) => prop_assert!(satisfies(&t, &m)),
            StratifyResult::Unsatisfiable(w) => prop_assert!(w.replays()),
        }
    }
}


#[test]
fn optimizer_is_sound_on_corpus_terms() {
    let rs = derived_rules();
    let run = run_corpus(&default_dir(), &rules(), Registry::new(), CorpusOptions::default()).unwrap();
    let mut seen = 0;
    for id in run.registry.ids() {
        let rec = run.registry.get(id).unwrap();
        let hyps = rec.hypotheses.iter().flat_map(|h| [&h.lhs, &h.rhs]);
        for t in rec.statements.iter().flat_map(|j| j.terms()).chain(hyps) {
            let o = optimize(t, OptimizeOptions::default());
            assert!(o.size() <= t.size(), "{t} grew to {o}");
            assert!(ext_equal(&o, t, &rs).is_equal(), "{t} vs {o}");
            seen += 1;
        }
    }
    assert!(seen > 80);
}
