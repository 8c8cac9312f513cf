//! Example algebras and languages used as ground truth.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::algebra::{eval_forest, FiniteForestAlgebra, HElem, LetterMap};
use crate::forest::{Alphabet, Forest, Label, Tree};
use crate::wreath::{wreath_generated, GTable};

/// A catalog entry: an algebra, a letter map into it and an accepting set.
#[derive(Clone, Debug)]
pub struct FixtureAlgebra {
    pub name: &'static str,
    pub description: &'static str,
    pub algebra: FiniteForestAlgebra,
    pub letters: LetterMap,
    pub accept: BTreeSet<HElem>,
    /// Expected verdicts, confirmed against the checkers by the test suite.
    pub distributive: bool,
    pub two_distributive: bool,
}

impl FixtureAlgebra {
    pub fn letter(&self, name: &str) -> usize {
        self.letters.get(&Label::new(name).expect("label")).expect("letter of the fixture")
    }
}

/// Join table of a semilattice given by a join function on indices.
fn join_table(m: usize, join: impl Fn(usize, usize) -> usize) -> Vec<Vec<HElem>> {
    (0..m).map(|a| (0..m).map(|b| join(a, b)).collect()).collect()
}

/// Join of bit sets.
fn union_table(bits: usize) -> Vec<Vec<HElem>> {
    join_table(1 << bits, |a, b| a | b)
}

fn build(add: Vec<Vec<HElem>>, gens: &[Vec<HElem>]) -> (FiniteForestAlgebra, Vec<usize>) {
    FiniteForestAlgebra::from_transformations(add, 0, gens).expect("fixture tables")
}

/// H = {0,1} under max; V = {id, c0, c1}.
pub fn bool_or() -> FiniteForestAlgebra {
    build(union_table(1), &[vec![0, 0], vec![1, 1]]).0.with_names(&["0", "1"], &["id", "c0", "c1"])
}

/// H = {0,1} under max; V = {id, c1}.
pub fn or_unit() -> FiniteForestAlgebra {
    build(union_table(1), &[]).0.with_names(&["0", "1"], &["id", "c1"])
}

/// The one-element algebra.
pub fn one() -> FiniteForestAlgebra {
    build(vec![vec![0]], &[]).0
}

/// H = ℤ/2 under addition; not horizontally idempotent.
pub fn parity() -> FiniteForestAlgebra {
    build(vec![vec![0, 1], vec![1, 0]], &[]).0.with_names(&["0", "1"], &["id", "flip"])
}

fn entry(
    name: &'static str,
    description: &'static str,
    algebra: FiniteForestAlgebra,
    letters: LetterMap,
    accept: &[HElem],
    flags: (bool, bool),
) -> FixtureAlgebra {
    FixtureAlgebra {
        name,
        description,
        algebra,
        letters,
        accept: accept.iter().copied().collect(),
        distributive: flags.0,
        two_distributive: flags.1,
    }
}

/// H = {0,1,2} under max with a saturating successor.
pub fn chain3() -> FixtureAlgebra {
    let (a, g) = build(join_table(3, usize::max), &[vec![1, 2, 2]]);
    let lm = LetterMap::from_pairs(&[("a", g[0]), ("b", a.ins(1))]);
    entry("chain3", "three-element chain with a saturating successor", a, lm, &[2], (true, true))
}

/// H = {0,a,b,t} with a+b = t and a detector mapping t to t and all else to 0.
pub fn sibling_pair() -> FixtureAlgebra {
    let add = join_table(4, |x, y| x | y);
    let (a, g) = build(add, &[vec![0, 0, 0, 3]]);
    let a = a.with_names(&["0", "a", "b", "t"], &["id", "det"]);
    let lm = LetterMap::from_pairs(&[("a", a.ins(1)), ("b", a.ins(2)), ("s", g[0])]);
    entry(
        "sibling-pair",
        "H = {0,a,b,t} with a+b = t and a detector keeping t and sending all else to 0",
        a,
        lm,
        &[3],
        (false, true),
    )
}

/// The sibling-pair semilattice with an extra map u sending t to q and all else to p.
pub fn switch() -> FixtureAlgebra {
    let add = join_table(4, |x, y| x | y);
    let (a, g) = build(add, &[vec![0, 0, 0, 3], vec![1, 1, 1, 2]]);
    let a = a.with_names(&["0", "p", "q", "t"], &["id", "det", "u"]);
    let lm = LetterMap::from_pairs(&[
        ("p", a.ins(1)),
        ("q", a.ins(2)),
        ("s", g[0]),
        ("u", g[1]),
    ]);
    entry("switch", "not 2-distributive: u separates t from 0+t", a, lm, &[2], (false, false))
}

/// H = subsets of {a,b,c} under union; each letter maps any forest to its own singleton.
pub fn root_labels() -> FixtureAlgebra {
    let gens: Vec<Vec<HElem>> = (0..3).map(|i| vec![1 << i; 8]).collect();
    let (a, g) = build(union_table(3), &gens);
    let lm = LetterMap::from_pairs(&[("a", g[0]), ("b", g[1]), ("c", g[2])]);
    entry("root-labels", "the set of root labels", a, lm, &[3], (true, true))
}

// L1-style recognizer states.
const N00: usize = 1;
const N10: usize = 2;
const N01: usize = 3;
const N11: usize = 4;
const DEAD: usize = 5;

fn l1_algebra() -> (FiniteForestAlgebra, LetterMap) {
    let add = join_table(6, |x, y| {
        if x == 0 {
            y
        } else if y == 0 {
            x
        } else if x == DEAD || y == DEAD {
            DEAD
        } else {
            // flags are (x-1) as bits: b = 1, c = 2
            1 + ((x - 1) | (y - 1))
        }
    });
    let a_map: Vec<HElem> = (0..6).map(|h| if h == N00 || h == N11 { N00 } else { DEAD }).collect();
    let leaf = |v: usize| (0..6).map(|h| if h == 0 { v } else { DEAD }).collect::<Vec<_>>();
    let (alg, g) = build(add, &[a_map, leaf(N10), leaf(N01)]);
    let alg = alg.with_names(&["0", "n", "nb", "nc", "nbc", "dead"], &["id", "a", "b", "c"]);
    (alg, LetterMap::from_pairs(&[("a", g[0]), ("b", g[1]), ("c", g[2])]))
}

/// Recognizer for L1.
pub fn l1() -> FixtureAlgebra {
    let (a, lm) = l1_algebra();
    entry("l1", "recognizer for L1 (b and c leaves pair up as siblings)", a, lm, &[N00, N11], (false, true))
}

/// Recognizer for the basic example: L1 together with the empty forest.
pub fn l_basic() -> FixtureAlgebra {
    let (a, lm) = l1_algebra();
    entry("l-basic", "recognizer for the basic example language", a, lm, &[0, N00, N11], (false, true))
}

/// L2 recognizer state of a nonempty valid forest with root flags.
fn l2_state(b: bool, ac: bool, c: bool) -> usize {
    2 + (b as usize) + 2 * (ac as usize) + 4 * (c as usize)
}

fn l2_flags(h: usize) -> (bool, bool, bool) {
    let x = h - 2;
    (x & 1 == 1, x & 2 == 2, x & 4 == 4)
}

/// Recognizer for L2.
pub fn l2() -> FixtureAlgebra {
    const DEAD2: usize = 1;
    let add = join_table(10, |x, y| {
        if x == 0 {
            y
        } else if y == 0 {
            x
        } else if x == DEAD2 || y == DEAD2 {
            DEAD2
        } else {
            2 + ((x - 2) | (y - 2))
        }
    });
    let a_map: Vec<HElem> = (0..10)
        .map(|h| {
            if h < 2 {
                return DEAD2;
            }
            let (b, ac, c) = l2_flags(h);
            if b == ac {
                l2_state(false, c, false)
            } else {
                DEAD2
            }
        })
        .collect();
    let leaf = |v: usize| (0..10).map(|h| if h == 0 { v } else { DEAD2 }).collect::<Vec<_>>();
    let (alg, g) =
        build(add, &[a_map, leaf(l2_state(true, false, false)), leaf(l2_state(false, false, true))]);
    let names: Vec<String> = (0..10)
        .map(|h| match h {
            0 => "0".to_string(),
            1 => "dead".to_string(),
            _ => {
                let (b, ac, c) = l2_flags(h);
                format!("n{}{}{}", if b { "b" } else { "" }, if ac { "A" } else { "" }, if c { "c" } else { "" })
            }
        })
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let alg = alg.with_names(&names, &["id", "a", "b", "c"]);
    let lm = LetterMap::from_pairs(&[("a", g[0]), ("b", g[1]), ("c", g[2])]);
    let accept = [l2_state(false, false, false), l2_state(true, true, false)];
    entry("l2", "recognizer for L2 (b leaves pair up with a-siblings that have c-children)", alg, lm, &accept, (false, true))
}

/// BOOL-OR ≀ BOOL-OR generated by letters recognizing "every b-node has a c-child".
pub fn b_has_c_child() -> FixtureAlgebra {
    let b = bool_or();
    let right = LetterMap::from_pairs(&[("a", 1), ("b", 1), ("c", 2)]);
    let mut g = GTable::new();
    let bl = Label::new("b").expect("label");
    g.set(bl.clone(), 0, 2);
    g.set(bl, 1, 0);
    let w = wreath_generated(&b, &b, &right, &g, 10_000).expect("small closure");
    let accept: Vec<HElem> =
        w.wreath.h_pairs.iter().enumerate().filter(|(_, p)| p.0 == 0).map(|(i, _)| i).collect();
    entry(
        "b-has-c-child",
        "generated BOOL-OR wreath BOOL-OR recognizing forests where every b-node has a c-child",
        w.wreath.algebra,
        w.letters,
        &accept,
        (false, true),
    )
}

/// All catalog entries, in a fixed order.
pub fn builtin_algebras() -> Vec<FixtureAlgebra> {
    vec![
        entry("one", "the one-element algebra", one(), LetterMap::from_pairs(&[("a", 0)]), &[0], (true, true)),
        entry(
            "bool-or",
            "H = {0,1} under max, V = {id, c0, c1}",
            bool_or(),
            LetterMap::from_pairs(&[("a", 2), ("b", 0)]),
            &[1],
            (true, true),
        ),
        entry(
            "or-unit",
            "H = {0,1} under max, V = {id, c1}",
            or_unit(),
            LetterMap::from_pairs(&[("a", 1), ("b", 0)]),
            &[1],
            (true, true),
        ),
        chain3(),
        root_labels(),
        sibling_pair(),
        switch(),
        l_basic(),
        l1(),
        l2(),
        b_has_c_child(),
    ]
}

pub fn fixture(name: &str) -> Option<FixtureAlgebra> {
    builtin_algebras().into_iter().find(|f| f.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown language `{0}`")]
pub struct UnknownLanguage(pub String);

/// A named language with a membership predicate and an optional recognizer.
#[derive(Clone, Copy)]
pub struct NamedLanguage {
    pub name: &'static str,
    pub alphabet: &'static [&'static str],
    pub predicate: fn(&Forest) -> bool,
    pub recognizer: Option<fn() -> FixtureAlgebra>,
}

impl NamedLanguage {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::from_strs(self.alphabet)
    }

    pub fn contains(&self, f: &Forest) -> bool {
        (self.predicate)(f)
    }
}

pub fn languages() -> Vec<NamedLanguage> {
    const ABC: &[&str] = &["a", "b", "c"];
    const ABCD: &[&str] = &["a", "b", "c", "d"];
    vec![
        NamedLanguage { name: "l-basic", alphabet: ABC, predicate: in_l_basic, recognizer: Some(l_basic) },
        NamedLanguage { name: "l1", alphabet: ABC, predicate: in_l1, recognizer: Some(l1) },
        NamedLanguage { name: "l2", alphabet: ABC, predicate: in_l2, recognizer: Some(l2) },
        NamedLanguage { name: "l3a", alphabet: ABCD, predicate: in_l3a, recognizer: None },
        NamedLanguage { name: "l3b", alphabet: ABCD, predicate: in_l3b, recognizer: None },
        NamedLanguage { name: "l", alphabet: ABCD, predicate: in_l, recognizer: None },
        NamedLanguage { name: "compatible-l1", alphabet: ABCD, predicate: compatible_l1, recognizer: None },
        NamedLanguage { name: "compatible-l2", alphabet: ABCD, predicate: compatible_l2, recognizer: None },
    ]
}

pub fn language(name: &str) -> Result<NamedLanguage, UnknownLanguage> {
    languages().into_iter().find(|l| l.name == name).ok_or_else(|| UnknownLanguage(name.to_string()))
}

pub fn membership(name: &str, f: &Forest) -> Result<bool, UnknownLanguage> {
    Ok(language(name)?.contains(f))
}

/// Recognizer for one of the languages that has one.
pub fn recognizer_for(name: &str) -> Option<FixtureAlgebra> {
    language(name).ok()?.recognizer.map(|r| r())
}

fn is(t: &Tree, l: &str) -> bool {
    t.label().as_str() == l
}

fn has_root(f: &Forest, l: &str) -> bool {
    f.trees().any(|t| is(t, l))
}

fn l1_forest(f: &Forest) -> bool {
    let trees_ok = f.trees().all(|t| match t.label().as_str() {
        "b" | "c" => t.children().is_empty(),
        "a" => !t.children().is_empty() && l1_forest(t.children()),
        _ => false,
    });
    trees_ok && has_root(f, "b") == has_root(f, "c")
}

pub fn in_l1(f: &Forest) -> bool {
    !f.is_empty() && l1_forest(f)
}

pub fn in_l_basic(f: &Forest) -> bool {
    f.is_empty() || in_l1(f)
}

fn l2_forest(f: &Forest, under_a: bool) -> bool {
    let trees_ok = f.trees().all(|t| match t.label().as_str() {
        "b" => t.children().is_empty(),
        "c" => t.children().is_empty() && under_a,
        "a" => !t.children().is_empty() && l2_forest(t.children(), true),
        _ => false,
    });
    let ac = f.trees().any(|t| is(t, "a") && has_root(t.children(), "c"));
    trees_ok && has_root(f, "b") == ac
}

pub fn in_l2(f: &Forest) -> bool {
    !f.is_empty() && l2_forest(f, false)
}

/// Splits the children of a d-node into its d-rooted part and the rest.
fn d_split(t: &Tree) -> Option<(Forest, Forest)> {
    if !is(t, "d") {
        return None;
    }
    let (d, rest): (Vec<Tree>, Vec<Tree>) = t.children().trees().cloned().partition(|c| is(c, "d"));
    Some((Forest::from_trees(d), Forest::from_trees(rest)))
}

fn l3a_tree(t: &Tree) -> bool {
    d_split(t).is_some_and(|(d, rest)| in_l3b(&d) && in_l1(&rest))
}

fn l3b_tree(t: &Tree) -> bool {
    d_split(t).is_some_and(|(d, rest)| in_l3a(&d) && in_l2(&rest))
}

pub fn in_l3a(f: &Forest) -> bool {
    f.trees().all(l3a_tree)
}

pub fn in_l3b(f: &Forest) -> bool {
    f.trees().all(l3b_tree)
}

pub fn in_l(f: &Forest) -> bool {
    f.trees().all(|t| l3a_tree(t) || l3b_tree(t))
}

/// Largest n with `a^n x` a path of `f`.
fn max_depth(f: &Forest, x: &str) -> Option<usize> {
    f.trees()
        .filter_map(|t| match t.label().as_str() {
            l if l == x => Some(0),
            "a" => max_depth(t.children(), x).map(|d| d + 1),
            _ => None,
        })
        .max()
}

pub fn compatible_l1(f: &Forest) -> bool {
    matches!((max_depth(f, "b"), max_depth(f, "c")), (Some(b), Some(c)) if b == c)
}

pub fn compatible_l2(f: &Forest) -> bool {
    matches!((max_depth(f, "b"), max_depth(f, "c")), (Some(b), Some(c)) if b + 1 == c)
}

/// The figure element of L1.
pub fn figure_l1() -> Forest {
    Forest::parse_any("a[a[b,c], a[a[b,c], a[a[b,c]]]]").expect("figure")
}

/// The figure element of L2.
pub fn figure_l2() -> Forest {
    Forest::parse_any("a[a[b,a[c]], a[a[b,a[c]], a[a[b,a[c]]]]]").expect("figure")
}

/// Checks predicate/recognizer agreement on every enumerated forest.
pub fn recognizer_disagreement(
    lang: &NamedLanguage,
    max_height: usize,
    max_nodes: usize,
) -> Option<Forest> {
    let rec = lang.recognizer?();
    let forests = crate::forest::enumerate_forests(&lang.alphabet(), max_height, max_nodes, 10_000_000)
        .expect("enumeration within cap");
    forests.into_iter().find(|f| {
        let v = eval_forest(&rec.algebra, &rec.letters, f).expect("fixture alphabet");
        rec.accept.contains(&v) != lang.contains(f)
    })
}
