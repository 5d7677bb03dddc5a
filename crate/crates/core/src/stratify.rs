//! Integer type assignment for terms ("stratification").
//!
//! Every variable gets one unknown shared by all its occurrences and every
//! other subterm occurrence gets its own. The constraints are differences
//! `τ(a) = τ(b) + c`, solved by a union-find that stores each node's offset
//! from its parent. Conflicts are explained by a cycle of input constraints.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::term::{navigate, Name, Position, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Unknown {
    Var(Name),
    Node(Position),
}

/// `τ(lhs) = τ(rhs) + offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: Unknown,
    pub rhs: Unknown,
    pub offset: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// Constraints oriented head to tail: the `rhs` of each is the `lhs` of
    /// the next and the last one's `rhs` is the first one's `lhs`.
    pub cycle: Vec<Constraint>,
}

impl Witness {
    pub fn total_offset(&self) -> i64 {
        self.cycle.iter().map(|c| c.offset).sum()
    }

    /// The cycle is closed and sums to a nonzero offset.
    pub fn replays(&self) -> bool {
        let n = self.cycle.len();
        n > 0
            && (0..n).all(|i| self.cycle[i].rhs == self.cycle[(i + 1) % n].lhs)
            && self.total_offset() != 0
    }

    pub fn render(&self, t: &Term) -> Vec<String> {
        let mut lines: Vec<String> = self
            .cycle
            .iter()
            .map(|c| format!("τ({}) = τ({}) {:+}", label(t, &c.lhs), label(t, &c.rhs), c.offset))
            .collect();
        if let Some(first) = self.cycle.first() {
            let l = label(t, &first.lhs);
            lines.push(format!("⇒ τ({l}) = τ({l}) {:+}", self.total_offset()));
        }
        lines
    }
}

fn label(t: &Term, u: &Unknown) -> String {
    match u {
        Unknown::Var(n) => n.to_string(),
        Unknown::Node(p) => match navigate(t, p) {
            Ok(sub) => format!("{sub} @{p}"),
            Err(_) => format!("@{p}"),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StratifyResult {
    /// Types of the variables, shifted so the smallest is 0.
    Stratified(BTreeMap<Name, i64>),
    Unsatisfiable(Witness),
}

impl StratifyResult {
    pub fn assignment(&self) -> Option<&BTreeMap<Name, i64>> {
        match self {
            StratifyResult::Stratified(m) => Some(m),
            StratifyResult::Unsatisfiable(_) => None,
        }
    }
}

/// `z:0 y:1 x:2`: ascending by type, then by name.
pub struct AssignmentDisplay<'a>(pub &'a BTreeMap<Name, i64>);

impl fmt::Display for AssignmentDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut v: Vec<(&Name, &i64)> = self.0.iter().collect();
        v.sort_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0)));
        let parts: Vec<String> = v.iter().map(|(n, ty)| format!("{n}:{ty}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// The constraint system of `t`, in preorder.
pub fn constraints(t: &Term) -> Vec<Constraint> {
    fn unknown(t: &Term, p: &Position) -> Unknown {
        match t {
            Term::Var(n) => Unknown::Var(n.clone()),
            _ => Unknown::Node(p.clone()),
        }
    }
    fn go(t: &Term, p: Position, out: &mut Vec<Constraint>) {
        let me = unknown(t, &p);
        match t {
            Term::Var(_) | Term::Const(_) | Term::Def(_) => {}
            Term::App(f, a) => {
                let pf = p.child(crate::term::Step::Fun);
                let pa = p.child(crate::term::Step::Arg);
                let (uf, ua) = (unknown(f, &pf), unknown(a, &pa));
                out.push(Constraint { lhs: uf, rhs: ua.clone(), offset: 1 });
                out.push(Constraint { lhs: me, rhs: ua, offset: 0 });
                go(f, pf, out);
                go(a, pa, out);
            }
            Term::K(c) => {
                let pc = p.child(crate::term::Step::KBody);
                out.push(Constraint { lhs: me, rhs: unknown(c, &pc), offset: 1 });
                go(c, pc, out);
            }
            Term::Pair(l, r) => {
                let pl = p.child(crate::term::Step::Left);
                let pr = p.child(crate::term::Step::Right);
                out.push(Constraint { lhs: me.clone(), rhs: unknown(l, &pl), offset: 0 });
                out.push(Constraint { lhs: me, rhs: unknown(r, &pr), offset: 0 });
                go(l, pl, out);
                go(r, pr, out);
            }
        }
    }
    let mut out = Vec::new();
    go(t, Position::root(), &mut out);
    out
}

/// Union-find over integer unknowns with offsets to the parent.
struct OffsetUnionFind {
    parent: Vec<usize>,
    /// `τ(i) - τ(parent[i])`.
    offset: Vec<i64>,
    /// Constraints accepted as tree edges: (neighbour, τ(self) - τ(neighbour), constraint index).
    forest: Vec<Vec<(usize, i64, usize)>>,
}

impl OffsetUnionFind {
    fn new(n: usize) -> Self {
        OffsetUnionFind { parent: (0..n).collect(), offset: vec![0; n], forest: vec![Vec::new(); n] }
    }

    /// Root of `i` and `τ(i) - τ(root)`.
    fn find(&mut self, i: usize) -> (usize, i64) {
        let p = self.parent[i];
        if p == i {
            return (i, 0);
        }
        let (root, d) = self.find(p);
        self.parent[i] = root;
        self.offset[i] += d;
        (root, self.offset[i])
    }

    /// Adds `τ(a) = τ(b) + c`; false on conflict.
    fn relate(&mut self, a: usize, b: usize, c: i64, idx: usize) -> bool {
        let (ra, da) = self.find(a);
        let (rb, db) = self.find(b);
        if ra == rb {
            return da == db + c;
        }
        self.parent[ra] = rb;
        self.offset[ra] = c + db - da;
        self.forest[a].push((b, c, idx));
        self.forest[b].push((a, -c, idx));
        true
    }

    /// Tree path from `from` to `to` as (node, next, τ(node) - τ(next), constraint).
    /// Forest entries of `u` store `τ(u) - τ(neighbour)`.
    fn path(&self, from: usize, to: usize) -> Vec<(usize, usize, i64, usize)> {
        let mut prev: Vec<Option<(usize, i64, usize)>> = vec![None; self.parent.len()];
        let mut seen = vec![false; self.parent.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &(v, d, idx) in &self.forest[u] {
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((u, d, idx));
                    queue.push_back(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = to;
        while cur != from {
            let (u, d, idx) = prev[cur].expect("endpoints are connected");
            out.push((u, cur, d, idx));
            cur = u;
        }
        out.reverse();
        out
    }
}

pub fn stratify(t: &Term) -> StratifyResult {
    let cs = constraints(t);
    let mut ids: BTreeMap<Unknown, usize> = BTreeMap::new();
    let mut names: Vec<Unknown> = Vec::new();
    let mut id = |u: &Unknown, names: &mut Vec<Unknown>| -> usize {
        *ids.entry(u.clone()).or_insert_with(|| {
            names.push(u.clone());
            names.len() - 1
        })
    };
    let idx: Vec<(usize, usize)> = cs.iter().map(|c| (id(&c.lhs, &mut names), id(&c.rhs, &mut names))).collect();
    if let Term::Var(n) = t {
        let mut m = BTreeMap::new();
        m.insert(n.clone(), 0);
        return StratifyResult::Stratified(m);
    }
    let mut uf = OffsetUnionFind::new(names.len());
    for (i, c) in cs.iter().enumerate() {
        let (a, b) = idx[i];
        if !uf.relate(a, b, c.offset, i) {
            // Cycle: a -> ... -> b along tree edges, then b -> a by the failed constraint.
            let mut cycle = Vec::new();
            let path = uf.path(a, b);
            let path_sum: i64 = path.iter().map(|e| e.2).sum();
            for (u, v, d, _) in path {
                cycle.push(Constraint { lhs: names[u].clone(), rhs: names[v].clone(), offset: d });
            }
            // τ(b) = τ(a) - c closes the loop; the sum is path_sum - c ≠ 0.
            cycle.push(Constraint { lhs: names[b].clone(), rhs: names[a].clone(), offset: -c.offset });
            debug_assert_ne!(path_sum - c.offset, 0);
            return StratifyResult::Unsatisfiable(Witness { cycle });
        }
    }
    let mut types = BTreeMap::new();
    for (u, &i) in &ids {
        if let Unknown::Var(n) = u {
            let (_, d) = uf.find(i);
            types.insert(n.clone(), d);
        }
    }
    let min = types.values().copied().min().unwrap_or(0);
    for v in types.values_mut() {
        *v -= min;
    }
    StratifyResult::Stratified(types)
}

/// Checks an assignment for the variables against the full constraint system.
/// Node types are propagated from the variables; the constraint graph of a
/// term is connected, so this determines every unknown when any variable occurs.
pub fn satisfies(t: &Term, types: &BTreeMap<Name, i64>) -> bool {
    let cs = constraints(t);
    let mut known: BTreeMap<Unknown, i64> =
        types.iter().map(|(n, v)| (Unknown::Var(n.clone()), *v)).collect();
    loop {
        let mut changed = false;
        for c in &cs {
            match (known.get(&c.lhs).copied(), known.get(&c.rhs).copied()) {
                (Some(a), Some(b)) if a != b + c.offset => return false,
                (Some(a), None) => {
                    known.insert(c.rhs.clone(), a - c.offset);
                    changed = true;
                }
                (None, Some(b)) => {
                    known.insert(c.lhs.clone(), b + c.offset);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn types(s: &str) -> Vec<(String, i64)> {
        match stratify(&parse(s).unwrap()) {
            StratifyResult::Stratified(m) => m.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            StratifyResult::Unsatisfiable(w) => panic!("unexpected conflict {w:?}"),
        }
    }

    #[test]
    fn y_xyz_types() {
        assert_eq!(types("y (x y z)"), vec![("x".into(), 2), ("y".into(), 1), ("z".into(), 0)]);
        let m = stratify(&parse("y (x y z)").unwrap());
        assert_eq!(AssignmentDisplay(m.assignment().unwrap()).to_string(), "z:0 y:1 x:2");
    }

    #[test]
    fn xy_yz_types() {
        assert_eq!(types("x y (y z)"), vec![("x".into(), 2), ("y".into(), 1), ("z".into(), 0)]);
    }

    #[test]
    fn x_yx_is_unsatisfiable_with_unit_cycle() {
        let t = parse("x (y x)").unwrap();
        match stratify(&t) {
            StratifyResult::Unsatisfiable(w) => {
                assert!(w.replays());
                assert_eq!(w.total_offset().abs(), 1);
                let lines = w.render(&t);
                assert!(lines.last().unwrap().starts_with("⇒ τ("));
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn self_application_conflict() {
        let t = parse("x x").unwrap();
        let StratifyResult::Unsatisfiable(w) = stratify(&t) else { panic!() };
        assert!(w.replays());
        assert_eq!(w.cycle[0].lhs, Unknown::Var("x".into()));
    }

    #[test]
    fn k_raises_type_and_pairs_equalise() {
        // k(x) y: τ(k(x)) = τ(y)+1 and τ(k(x)) = τ(x)+1, so x and y share a type.
        assert_eq!(types("k(x) y"), vec![("x".into(), 0), ("y".into(), 0)]);
        assert_eq!(types("<x, y z>"), vec![("x".into(), 0), ("y".into(), 1), ("z".into(), 0)]);
    }

    #[test]
    fn constants_are_occurrence_polymorphic() {
        assert_eq!(types("Abst Abst x"), vec![("x".into(), 0)]);
        assert!(types("P1 P2").is_empty());
    }

    #[test]
    fn assignments_satisfy_constraints() {
        for s in ["y (x y z)", "x y (y z)", "<k(x), y> (z z')", "Abst k(x) (Abst k(x) I)"] {
            let t = parse(s).unwrap();
            let m = stratify(&t).assignment().cloned().unwrap();
            assert!(satisfies(&t, &m), "{s}");
        }
    }
}
