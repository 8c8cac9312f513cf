//! The 2-distributivity decision and a bounded ∼k rewriting oracle.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use crate::algebra::{
    check_horizontal, eval_forest, FiniteForestAlgebra, HElem, HorizontalFailure, LetterMap, VElem,
};
use crate::forest::{paths, Context, Forest, Label, Tree};
use crate::pathlang::{intersecting_pairs, PathWitness};

/// One letter per element of V, mapped to itself. Element names are used as
/// labels when they are distinct identifiers, `v{i}` otherwise.
pub fn canonical_self_morphism(a: &FiniteForestAlgebra) -> LetterMap {
    let names: Vec<String> = (0..a.v_size()).map(|v| a.v_name(v)).collect();
    let distinct = names.iter().collect::<BTreeSet<_>>().len() == names.len();
    let usable = distinct
        && names.iter().all(|n| {
            n.chars().next().is_some_and(|c| c.is_alphabetic())
                && Label::new(n).is_ok_and(|l| l.is_identifier())
        });
    let map = (0..a.v_size())
        .map(|v| {
            let name = if usable { names[v].clone() } else { format!("v{v}") };
            (Label::new(&name).expect("identifier label"), v)
        })
        .collect();
    LetterMap::new(map)
}

/// Evidence that an algebra is not 2-distributive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Horizontal(HorizontalFailure),
    /// `v(h1+h2) ≠ vh1+vh2` where `h1` and `h2` have path-equal preimages
    /// `f1` and `f2` over the canonical alphabet.
    Law { v: VElem, h1: HElem, h2: HElem, witness: PathWitness },
}

impl Certificate {
    /// Re-checks the certificate against the tables.
    pub fn replays(&self, a: &FiniteForestAlgebra) -> bool {
        match self {
            Certificate::Horizontal(HorizontalFailure::Idempotency { h }) => a.add(*h, *h) != *h,
            Certificate::Horizontal(HorizontalFailure::Commutativity { a: x, b: y }) => {
                a.add(*x, *y) != a.add(*y, *x)
            }
            Certificate::Law { v, h1, h2, witness: (f1, f2) } => {
                let lm = canonical_self_morphism(a);
                a.act(*v, a.add(*h1, *h2)) != a.add(a.act(*v, *h1), a.act(*v, *h2))
                    && paths(f1) == paths(f2)
                    && eval_forest(a, &lm, f1) == Ok(*h1)
                    && eval_forest(a, &lm, f2) == Ok(*h2)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TwoDistVerdict {
    /// Every value pair with path-intersecting preimages, each checked.
    Yes { checked: Vec<(HElem, HElem)> },
    No(Certificate),
    Inconclusive { reason: String },
}

impl TwoDistVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, TwoDistVerdict::Yes { .. })
    }

    pub fn is_no(&self) -> bool {
        matches!(self, TwoDistVerdict::No(_))
    }
}

impl fmt::Display for TwoDistVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwoDistVerdict::Yes { checked } => {
                writeln!(f, "yes")?;
                writeln!(f, "checked {} path-intersecting pairs", checked.len())?;
                for (h1, h2) in checked {
                    writeln!(f, "  ({h1}, {h2})")?;
                }
                Ok(())
            }
            TwoDistVerdict::No(Certificate::Horizontal(fail)) => {
                writeln!(f, "no")?;
                writeln!(f, "horizontal: {fail}")
            }
            TwoDistVerdict::No(Certificate::Law { v, h1, h2, witness: (f1, f2) }) => {
                writeln!(f, "no")?;
                writeln!(f, "v={v} h1={h1} h2={h2}: v(h1+h2) != vh1+vh2")?;
                writeln!(f, "f1 = {f1}")?;
                writeln!(f, "f2 = {f2}")
            }
            TwoDistVerdict::Inconclusive { reason } => {
                writeln!(f, "inconclusive")?;
                writeln!(f, "{reason}")
            }
        }
    }
}

/// Decides whether `v(h1+h2) = vh1+vh2` holds whenever `h1` and `h2` are values
/// of forests with equal path sets. The canonical self-morphism suffices since
/// every morphism into the algebra factors through it.
pub fn is_2_distributive(a: &FiniteForestAlgebra, cap: usize) -> TwoDistVerdict {
    if let Some(fail) = check_horizontal(a).failure() {
        return TwoDistVerdict::No(Certificate::Horizontal(fail));
    }
    let lm = canonical_self_morphism(a);
    let pairs = match intersecting_pairs(a, &lm, cap) {
        Ok(p) => p,
        Err(e) => return TwoDistVerdict::Inconclusive { reason: e.to_string() },
    };
    for (&(h1, h2), witness) in &pairs {
        for v in 0..a.v_size() {
            if a.act(v, a.add(h1, h2)) != a.add(a.act(v, h1), a.act(v, h2)) {
                return TwoDistVerdict::No(Certificate::Law { v, h1, h2, witness: witness.clone() });
            }
        }
    }
    TwoDistVerdict::Yes { checked: pairs.into_keys().collect() }
}

/// A realization of a law certificate in the free algebra: path-equal forests
/// and a one-letter context separating `c[f1+f2]` from `c f1 + c f2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub f1: Forest,
    pub f2: Forest,
    pub context: Context,
}

/// Checks that the certificate's witnesses realize it under the canonical
/// self-morphism and that their height is at most `max_height`.
pub fn realize_certificate(
    a: &FiniteForestAlgebra,
    cert: &Certificate,
    max_height: usize,
) -> Option<Realization> {
    let Certificate::Law { v, h1, h2, witness: (f1, f2) } = cert else { return None };
    let lm = canonical_self_morphism(a);
    let label = lm.iter().find(|&(_, x)| x == *v).map(|(l, _)| l.clone())?;
    let c = Context::letter(label);
    let ok = paths(f1) == paths(f2)
        && f1.height().max(f2.height()) <= max_height
        && eval_forest(a, &lm, f1).ok()? == *h1
        && eval_forest(a, &lm, f2).ok()? == *h2
        && eval_forest(a, &lm, &c.apply(&f1.sum(f2))).ok()?
            != eval_forest(a, &lm, &c.apply(f1).sum(&c.apply(f2))).ok()?;
    ok.then(|| Realization { f1: f1.clone(), f2: f2.clone(), context: c })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimOutcome {
    Proven,
    NotProven,
}

/// Largest forest size at which the rewrite search splits a sibling set.
const SPLIT_LIMIT: usize = 4;

fn subsets(f: &Forest) -> Vec<Forest> {
    let trees: Vec<&Tree> = f.trees().collect();
    (0u32..1 << trees.len())
        .map(|m| Forest::from_trees((0..trees.len()).filter(|i| m >> i & 1 == 1).map(|i| trees[i].clone())))
        .collect()
}

fn difference(a: &Forest, b: &Forest) -> Forest {
    Forest::from_trees(a.trees().filter(|t| !b.contains(t)).cloned())
}

fn intersection(a: &Forest, b: &Forest) -> Forest {
    Forest::from_trees(a.trees().filter(|t| b.contains(t)).cloned())
}

/// Whether `p = s+y` and `q = s+z` for some `s, y, z` with π(y) = π(z).
fn splittable(p: &Forest, q: &Forest) -> bool {
    let common = intersection(p, q);
    if common.len() > SPLIT_LIMIT {
        return paths(p) == paths(q);
    }
    let (only_p, only_q) = (difference(p, q), difference(q, p));
    let extra = subsets(&common);
    extra.iter().any(|y| {
        let py = paths(&only_p.sum(y));
        extra.iter().any(|z| paths(&only_q.sum(z)) == py)
    })
}

/// Pairs `(w[y], w[z])` with `p = w[y+z]` and π(y) = π(z).
fn splits(p: &Forest) -> Vec<(Forest, Forest)> {
    let mut out = Vec::new();
    if p.len() <= SPLIT_LIMIT {
        let all = subsets(p);
        for (i, p1) in all.iter().enumerate() {
            for p2 in &all[i..] {
                if &p1.sum(p2) == p && !(p1 == p && p2 == p) && splittable(p1, p2) {
                    out.push((p1.clone(), p2.clone()));
                }
            }
        }
    }
    for t in p.trees() {
        let mut rest = p.clone();
        rest.remove(t);
        for (r1, r2) in splits(t.children()) {
            let side = |r: Forest| rest.sum(&Forest::single(Tree::new(t.label().clone(), r)));
            out.push((side(r1), side(r2)));
        }
    }
    out
}

/// Forests `w[y+z]` with `p = w[y]`, `q = w[z]` and π(y) = π(z).
fn merges(p: &Forest, q: &Forest) -> Vec<Forest> {
    let mut out = Vec::new();
    if splittable(p, q) {
        out.push(p.sum(q));
    }
    for tp in p.trees() {
        for tq in q.trees() {
            if tp == tq || tp.label() != tq.label() {
                continue;
            }
            let mut rp = p.clone();
            rp.remove(tp);
            let mut rq = q.clone();
            rq.remove(tq);
            if rp != rq {
                continue;
            }
            for m in merges(tp.children(), tq.children()) {
                out.push(rp.sum(&Forest::single(Tree::new(tp.label().clone(), m))));
            }
        }
    }
    out
}

/// One fold or unfold applied to the sibling set `n` itself.
fn level_rewrites(n: &Forest) -> Vec<Forest> {
    let mut out = Vec::new();
    let trees: Vec<&Tree> = n.trees().collect();
    for t in &trees {
        let mut rest = n.clone();
        rest.remove(t);
        for (p1, p2) in splits(t.children()) {
            let mut g = rest.clone();
            g.insert(Tree::new(t.label().clone(), p1));
            g.insert(Tree::new(t.label().clone(), p2));
            out.push(g);
        }
    }
    for (i, t) in trees.iter().enumerate() {
        for u in &trees[i + 1..] {
            if t.label() != u.label() {
                continue;
            }
            let mut rest = n.clone();
            rest.remove(t);
            rest.remove(u);
            for m in merges(t.children(), u.children()) {
                let mut g = rest.clone();
                g.insert(Tree::new(t.label().clone(), m));
                out.push(g);
            }
        }
    }
    out
}

/// All forests one rewrite `v[g+g'] ↔ vg+vg'` (π(g) = π(g')) away from `f`.
pub fn sim2_neighbors(f: &Forest) -> Vec<Forest> {
    let mut out = level_rewrites(f);
    for t in f.trees() {
        let mut rest = f.clone();
        rest.remove(t);
        for c in sim2_neighbors(t.children()) {
            let mut g = rest.clone();
            g.insert(Tree::new(t.label().clone(), c));
            out.push(g);
        }
    }
    out
}

/// Breadth-first ∼2 class of `f`, stopping after `budget` distinct forests.
/// Every returned forest is ∼2-equivalent to `f`.
pub fn sim2_class(f: &Forest, budget: usize) -> BTreeSet<Forest> {
    let mut seen = HashSet::from([f.clone()]);
    let mut order = BTreeSet::from([f.clone()]);
    let mut queue = VecDeque::from([f.clone()]);
    while let Some(g) = queue.pop_front() {
        for h in sim2_neighbors(&g) {
            if seen.len() >= budget {
                return order;
            }
            if seen.insert(h.clone()) {
                order.insert(h.clone());
                queue.push_back(h);
            }
        }
    }
    order
}

/// Semi-decision of `f ∼k f'` for k ∈ {1, 2}. For k = 1 the answer is exact.
pub fn simk_oracle(f: &Forest, g: &Forest, k: usize, budget: usize) -> SimOutcome {
    if f == g {
        return SimOutcome::Proven;
    }
    if paths(f) != paths(g) {
        return SimOutcome::NotProven;
    }
    match k {
        1 => SimOutcome::Proven,
        2 => {
            let mut seen = HashSet::from([f.clone()]);
            let mut queue = VecDeque::from([f.clone()]);
            while let Some(x) = queue.pop_front() {
                for y in sim2_neighbors(&x) {
                    if &y == g {
                        return SimOutcome::Proven;
                    }
                    if seen.len() >= budget {
                        return SimOutcome::NotProven;
                    }
                    if seen.insert(y.clone()) {
                        queue.push_back(y);
                    }
                }
            }
            SimOutcome::NotProven
        }
        _ => SimOutcome::NotProven,
    }
}

pub fn verdict_kind(v: &TwoDistVerdict) -> &'static str {
    match v {
        TwoDistVerdict::Yes { .. } => "yes",
        TwoDistVerdict::No(_) => "no",
        TwoDistVerdict::Inconclusive { .. } => "inconclusive",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::is_distributive;
    use crate::fixtures::{self, bool_or};
    use crate::forest::enumerate_forests;
    use crate::pathlang::DEFAULT_ENGINE_CAP;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(s: &str) -> Forest {
        Forest::parse_any(s).unwrap()
    }

    #[test]
    fn canonical_alphabet() {
        let a = bool_or();
        let lm = canonical_self_morphism(&a);
        let names: Vec<String> = lm.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(names, ["c0", "c1", "id"]);
        for (l, v) in lm.iter() {
            let single = Forest::single(Tree::leaf(l.clone()));
            assert_eq!(eval_forest(&a, &lm, &single).unwrap(), a.act(v, a.zero()));
        }
        let unnamed = fixtures::one();
        assert_eq!(canonical_self_morphism(&unnamed).labels()[0].as_str(), "v0");
    }

    #[test]
    fn fixture_verdicts() {
        for fx in fixtures::builtin_algebras() {
            let v = is_2_distributive(&fx.algebra, DEFAULT_ENGINE_CAP);
            assert!(!matches!(v, TwoDistVerdict::Inconclusive { .. }), "{}: {v}", fx.name);
            assert_eq!(v.is_yes(), fx.two_distributive, "{}: {v}", fx.name);
            if is_distributive(&fx.algebra).unwrap().is_none() {
                assert!(v.is_yes(), "{}", fx.name);
            }
            if let TwoDistVerdict::No(cert) = &v {
                assert!(cert.replays(&fx.algebra));
                let bound = fx.algebra.h_size() + 2;
                assert!(realize_certificate(&fx.algebra, cert, bound).is_some(), "{}", fx.name);
            }
        }
    }

    #[test]
    fn verdict_is_invariant_under_isomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fx in fixtures::builtin_algebras() {
            let a = &fx.algebra;
            let mut hmap: Vec<usize> = (0..a.h_size()).collect();
            let mut vmap: Vec<usize> = (0..a.v_size()).collect();
            hmap.shuffle(&mut rng);
            vmap.shuffle(&mut rng);
            let b = a.permuted(&hmap, &vmap);
            let (x, y) = (is_2_distributive(a, DEFAULT_ENGINE_CAP), is_2_distributive(&b, DEFAULT_ENGINE_CAP));
            assert_eq!(verdict_kind(&x), verdict_kind(&y), "{}", fx.name);
        }
    }

    #[test]
    fn parity_fails_horizontally() {
        let v = is_2_distributive(&fixtures::parity(), 100);
        assert_eq!(v, TwoDistVerdict::No(Certificate::Horizontal(HorizontalFailure::Idempotency { h: 1 })));
    }

    #[test]
    fn sim1_is_path_equality() {
        assert_eq!(simk_oracle(&f("a[b]"), &f("a[b]"), 2, 10), SimOutcome::Proven);
        assert_eq!(simk_oracle(&f("a[b],a[c]"), &f("a[b,c],a[c]"), 1, 10), SimOutcome::Proven);
        assert_eq!(simk_oracle(&f("a[b]"), &f("a[c]"), 1, 10), SimOutcome::NotProven);
    }

    #[test]
    fn sim2_single_steps() {
        assert_eq!(simk_oracle(&f("c[a]"), &f("c[a],c[a]"), 2, 10), SimOutcome::Proven);
        // c[a[b] + (a[b]+a)] against c[a[b]] + c[a[b], a]
        assert_eq!(simk_oracle(&f("c[a[b],a]"), &f("c[a[b]],c[a[b],a]"), 2, 100), SimOutcome::Proven);
        assert_eq!(simk_oracle(&f("c[a[b]],c[a[b],a]"), &f("c[a[b],a]"), 2, 100), SimOutcome::Proven);
        // π(b) ≠ π(c): no rewrite separates c[b,c] into c[b] + c[c]
        assert_eq!(simk_oracle(&f("x[b,c]"), &f("x[b],x[c]"), 2, 1000), SimOutcome::NotProven);
    }

    #[test]
    fn sim2_classes_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alphabet = crate::forest::Alphabet::from_strs(&["a", "b", "c"]);
        let forests = enumerate_forests(&alphabet, 3, 5, 1 << 20).unwrap();
        let twos: Vec<_> = fixtures::builtin_algebras().into_iter().filter(|x| x.two_distributive).collect();
        for start in forests.iter().step_by(97) {
            let class = sim2_class(start, 200);
            for fx in &twos {
                for _ in 0..5 {
                    let a = &fx.algebra;
                    let lm = LetterMap::from_pairs(&[
                        ("a", rng.gen_range(0..a.v_size())),
                        ("b", rng.gen_range(0..a.v_size())),
                        ("c", rng.gen_range(0..a.v_size())),
                    ]);
                    let h = eval_forest(a, &lm, start).unwrap();
                    for g in &class {
                        assert_eq!(eval_forest(a, &lm, g).unwrap(), h, "{}: {start} vs {g}", fx.name);
                    }
                }
            }
        }
    }
}
