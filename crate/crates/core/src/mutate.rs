//! Single-point corruptions of proof scripts. A sound checker must reject
//! every one of them.

use crate::script::{Justification, ProofScript, ProofStep};
use crate::term::{Const, Term};

#[derive(Clone, Debug)]
pub struct Mutant {
    pub description: String,
    pub script: ProofScript,
}

#[derive(Clone, Copy, Debug)]
enum Site {
    DropLink(usize),
    SwapProjections(usize),
    WrongInstance(usize),
    SwapBranches,
}

/// Exchanges `P1` and `P2` everywhere in `t`.
pub fn swap_projections(t: &Term) -> Term {
    t.map_leaves(&|leaf| match leaf {
        Term::Const(Const::P1) => Some(Term::p2()),
        Term::Const(Const::P2) => Some(Term::p1()),
        _ => None,
    })
}

fn wrong(t: &Term) -> Term {
    let s = swap_projections(t);
    if s != *t {
        s
    } else {
        Term::k(t.clone())
    }
}

fn sites(j: &Justification) -> Vec<Site> {
    match j {
        Justification::Chain(links) => {
            let mut out = Vec::new();
            if links.len() >= 2 {
                out.extend((0..links.len()).map(Site::DropLink));
            }
            out.extend(
                (0..links.len()).filter(|&i| swap_projections(&links[i].term) != links[i].term).map(Site::SwapProjections),
            );
            out
        }
        Justification::Thm { inst, .. } => (0..inst.len()).map(Site::WrongInstance).collect(),
        Justification::Refute { inst, .. } => (0..inst.len()).map(Site::WrongInstance).collect(),
        Justification::Cases { p2: Some(_), .. } => vec![Site::SwapBranches],
        _ => vec![],
    }
}

fn apply(j: &mut Justification, site: Site) -> String {
    match (j, site) {
        (Justification::Chain(links), Site::DropLink(i)) => {
            let l = links.remove(i);
            format!("drop chain element `{}`", l.term)
        }
        (Justification::Chain(links), Site::SwapProjections(i)) => {
            let t = swap_projections(&links[i].term);
            let d = format!("swap P1/P2 in chain element `{}`", links[i].term);
            links[i].term = t;
            d
        }
        (Justification::Thm { id, inst, .. }, Site::WrongInstance(i)) => {
            let d = format!("wrong instance for `{}` in thm {id}", inst[i].0);
            inst[i].1 = wrong(&inst[i].1);
            d
        }
        (Justification::Refute { id, inst, .. }, Site::WrongInstance(i)) => {
            let d = format!("wrong instance for `{}` in refute {id}", inst[i].0);
            inst[i].1 = wrong(&inst[i].1);
            d
        }
        (Justification::Cases { p1, p2: Some(p2), .. }, Site::SwapBranches) => {
            std::mem::swap(&mut p1.steps, &mut p2.steps);
            "swap case branches".to_string()
        }
        _ => unreachable!("site computed from the same justification"),
    }
}

fn visit(steps: &mut [ProofStep], f: &mut dyn FnMut(&mut Justification, usize), line: usize) {
    fn just(j: &mut Justification, f: &mut dyn FnMut(&mut Justification, usize), line: usize) {
        f(j, line);
        match j {
            Justification::Ext { inner, .. } => just(inner, f, line),
            Justification::Contra { steps, .. } => visit(steps, f, line),
            Justification::Cases { p1, p2, .. } => {
                visit(&mut p1.steps, f, line);
                if let Some(p2) = p2 {
                    visit(&mut p2.steps, f, line);
                }
            }
            _ => {}
        }
    }
    for st in steps {
        let l = if st.line > 0 { st.line } else { line };
        just(&mut st.just, f, l);
    }
}

/// Every single-point mutant of `script`, in a fixed order.
pub fn mutants(script: &ProofScript) -> Vec<Mutant> {
    let mut total = 0;
    let mut probe = script.clone();
    visit(&mut probe.steps, &mut |j, _| total += sites(j).len(), 0);
    (0..total)
        .map(|target| {
            let mut m = script.clone();
            let mut seen = 0;
            let mut description = String::new();
            visit(
                &mut m.steps,
                &mut |j, line| {
                    let here = sites(j);
                    if description.is_empty() && target < seen + here.len() {
                        description = format!("line {line}: {}", apply(j, here[target - seen]));
                    }
                    seen += here.len();
                },
                0,
            );
            Mutant { description, script: m }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_script;

    #[test]
    fn enumerates_each_site_once() {
        let s = parse_script(
            r#"theorem 1 "t" proves x = x {
              have a : I x = x by chain [I x, <P1,P2> x, <P1 x, P2 x>, x]
              have b : P1 != P2 by thm VIII
              have c : Eq <x,P2> != x by thm 2.4a [x := P1]
            }"#,
        )
        .unwrap();
        let ms = mutants(&s);
        // four drops, two swaps, one instance
        assert_eq!(ms.len(), 7);
        assert!(ms.iter().all(|m| m.script != s));
        assert!(ms[4].description.contains("swap P1/P2"));
    }
}
