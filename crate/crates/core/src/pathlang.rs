//! Path sets of recognized languages: the Π word automaton, the Ψ-image
//! engine and the path-intersection decision.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::algebra::{
    check_horizontal, eval_forest, eval_tree, forest_values, value_witnesses, AlgebraError,
    FiniteForestAlgebra, HElem, LetterMap, Rule, VElem,
};
use crate::forest::{
    enumerate_forests, paths, psi, render_word, EnumerationCap, Forest, Label, PathSet, Tree, Word,
};

/// Largest |H| the Ψ-image engines accept; subsets of H are `u32` masks.
pub const MAX_ENGINE_H: usize = 16;
/// Default bound on the number of engine states.
pub const DEFAULT_ENGINE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationCap),
    #[error("|H| = {size} exceeds the engine limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("{what} exceeded the cap of {cap}")]
    Cap { what: &'static str, cap: usize },
}

fn require_engine(a: &FiniteForestAlgebra) -> Result<(), PathError> {
    if let Some(fail) = check_horizontal(a).failure() {
        return Err(AlgebraError::NotHorizontal(fail).into());
    }
    if a.h_size() > MAX_ENGINE_H {
        return Err(PathError::TooLarge { size: a.h_size(), limit: MAX_ENGINE_H });
    }
    Ok(())
}

fn bits(mask: u32) -> impl Iterator<Item = HElem> {
    (0..32).filter(move |i| mask >> i & 1 == 1)
}

fn mask_sum(a: &FiniteForestAlgebra, mask: u32) -> HElem {
    a.sum_mask(mask as u64)
}

fn leq(a: &FiniteForestAlgebra, x: HElem, t: HElem) -> bool {
    a.add(x, t) == t
}

/// One way to place a node above a forest whose trees have values `U`: the
/// chosen child sums `T` and the resulting set of tree values `Q`.
#[derive(Clone, Debug)]
struct Cover {
    q: u32,
    sums: Vec<HElem>,
}

/// All sets `{v·ΣQ_i}` over covers `Q_1..Q_l` (l ≥ 1) of `u` by subsets.
///
/// In a semilattice the largest subset of `U` summing to `t` is `{x ∈ U : x ≤ t}`,
/// so a set of sums covers `U` exactly when every element lies below one of them.
fn covers(a: &FiniteForestAlgebra, v: VElem, u: u32) -> Vec<Cover> {
    let mut sums = vec![a.zero()];
    for x in bits(u) {
        for i in 0..sums.len() {
            let t = a.add(sums[i], x);
            if !sums.contains(&t) {
                sums.push(t);
            }
        }
    }
    let below = |t: HElem| bits(u).filter(|&x| leq(a, x, t)).fold(0u32, |m, x| m | 1 << x);
    let mut by_image: BTreeMap<HElem, Vec<HElem>> = BTreeMap::new();
    for &t in &sums {
        by_image.entry(a.act(v, t)).or_default().push(t);
    }
    let groups: Vec<(HElem, Vec<HElem>)> = by_image.into_iter().collect();
    let mut out = Vec::new();
    for sel in 1u32..(1 << groups.len()) {
        let mut q = 0u32;
        let mut chosen = Vec::new();
        let mut covered = 0u32;
        for (i, (img, ts)) in groups.iter().enumerate() {
            if sel >> i & 1 == 1 {
                q |= 1 << img;
                for &t in ts {
                    covered |= below(t);
                    chosen.push(t);
                }
            }
        }
        if covered == u {
            out.push(Cover { q, sums: chosen });
        }
    }
    out
}

/// A family of subsets of H, each subset a bit mask.
pub type Family = BTreeSet<u32>;

/// Renders a subset mask as `{0,2}`.
pub fn render_subset(mask: u32) -> String {
    let items: Vec<String> = bits(mask).map(|h| h.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn render_family(fam: &Family) -> String {
    let items: Vec<String> = fam.iter().map(|&m| render_subset(m)).collect();
    format!("{{{}}}", items.join(","))
}

/// An element of the Ψ-image algebra: ⊥, or for each root label the family of
/// possible sets of tree values of the forests below that label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PsiValue {
    Bottom,
    /// Only nonempty components are stored.
    Map(BTreeMap<Label, Family>),
}

impl PsiValue {
    pub fn identity() -> Self {
        PsiValue::Map(BTreeMap::new())
    }

    pub fn component(&self, l: &Label) -> Option<&Family> {
        match self {
            PsiValue::Bottom => None,
            PsiValue::Map(m) => m.get(l),
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, PsiValue::Bottom)
    }
}

impl fmt::Display for PsiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiValue::Bottom => write!(f, "⊥"),
            PsiValue::Map(m) => {
                let parts: Vec<String> =
                    m.iter().map(|(l, fam)| format!("{l}↦{}", render_family(fam))).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// Sum in the Ψ-image algebra: ⊥ when supports overlap.
pub fn psi_value_sum(x: &PsiValue, y: &PsiValue) -> PsiValue {
    match (x, y) {
        (PsiValue::Map(a), PsiValue::Map(b)) => {
            if a.keys().any(|k| b.contains_key(k)) {
                return PsiValue::Bottom;
            }
            let mut out = a.clone();
            out.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
            PsiValue::Map(out)
        }
        _ => PsiValue::Bottom,
    }
}

/// Every union `∪ P_γ` over choices `P_γ ∈ x(γ)`.
fn unions(m: &BTreeMap<Label, Family>) -> BTreeSet<u32> {
    let mut acc = BTreeSet::from([0u32]);
    for fam in m.values() {
        acc = acc.iter().flat_map(|&u| fam.iter().map(move |&p| u | p)).collect();
    }
    acc
}

/// The Ψ-image algebra of a letter map, restricted to values of forests.
pub struct PsiEngine<'a> {
    algebra: &'a FiniteForestAlgebra,
    letters: &'a LetterMap,
    cache: HashMap<(VElem, u32), Vec<u32>>,
}

impl<'a> PsiEngine<'a> {
    pub fn new(algebra: &'a FiniteForestAlgebra, letters: &'a LetterMap) -> Result<Self, PathError> {
        require_engine(algebra)?;
        Ok(PsiEngine { algebra, letters, cache: HashMap::new() })
    }

    pub fn algebra(&self) -> &FiniteForestAlgebra {
        self.algebra
    }

    fn qs(&mut self, v: VElem, u: u32) -> &[u32] {
        let a = self.algebra;
        self.cache.entry((v, u)).or_insert_with(|| {
            let mut qs: Vec<u32> = covers(a, v, u).into_iter().map(|c| c.q).collect();
            qs.sort_unstable();
            qs.dedup();
            qs
        })
    }

    /// The value of `α[g]` given the value `x` of `g`.
    pub fn apply_letter(&mut self, alpha: &Label, x: &PsiValue) -> Result<PsiValue, PathError> {
        let v = self.letters.get(alpha).ok_or_else(|| AlgebraError::UnknownLetter(alpha.clone()))?;
        let m = match x {
            PsiValue::Bottom => return Ok(PsiValue::Bottom),
            PsiValue::Map(m) => m,
        };
        let mut fam = Family::new();
        for u in unions(m) {
            fam.extend(self.qs(v, u).iter().copied());
        }
        Ok(PsiValue::Map(BTreeMap::from([(alpha.clone(), fam)])))
    }

    /// The engine value of `psi(f)`.
    pub fn value_of(&mut self, f: &Forest) -> Result<PsiValue, PathError> {
        let mut acc = PsiValue::identity();
        for t in psi(f).trees() {
            let inner = self.value_of(t.children())?;
            acc = psi_value_sum(&acc, &self.apply_letter(t.label(), &inner)?);
        }
        Ok(acc)
    }

    /// True when some forest with this Ψ-image is nonempty and has value `h`.
    pub fn accepts(&self, x: &PsiValue, h: HElem) -> bool {
        match x {
            PsiValue::Bottom => false,
            PsiValue::Map(m) => {
                !m.is_empty() && unions(m).into_iter().any(|u| mask_sum(self.algebra, u) == h)
            }
        }
    }

    /// The least set of values containing the identity, closed under every
    /// letter and under sums, in discovery order.
    pub fn reachable(&mut self, cap: usize) -> Result<Vec<PsiValue>, PathError> {
        let mut seen: BTreeSet<PsiValue> = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        let labels = self.letters.labels();
        let mut push = |x: PsiValue, order: &mut Vec<PsiValue>, queue: &mut VecDeque<usize>| {
            if seen.insert(x.clone()) {
                order.push(x);
                queue.push_back(order.len() - 1);
                if order.len() > cap {
                    return Err(PathError::Cap { what: "Ψ-image closure", cap });
                }
            }
            Ok(())
        };
        push(PsiValue::identity(), &mut order, &mut queue)?;
        while let Some(i) = queue.pop_front() {
            let x = order[i].clone();
            for l in &labels {
                let y = self.apply_letter(l, &x)?;
                push(y, &mut order, &mut queue)?;
            }
            for j in 0..=i {
                let y = psi_value_sum(&x, &order[j]);
                push(y, &mut order, &mut queue)?;
            }
        }
        Ok(order)
    }
}

/// Upper bound on the node count of any forest with the same Ψ-image as the
/// normal forest `g`: the union of all trees whose paths lie inside π(g).
pub fn max_psi_preimage_nodes(g: &Forest) -> u128 {
    fn trees(g: &Forest) -> (u128, u128) {
        // number of trees and their total node count
        let mut count = 0u128;
        let mut nodes = 0u128;
        for t in psi(g).trees() {
            let (c, n) = trees(t.children());
            let subsets = 1u128.checked_shl(c as u32).unwrap_or(u128::MAX);
            count = count.saturating_add(subsets);
            let half = if c == 0 { 0 } else { subsets / 2 };
            nodes = nodes.saturating_add(subsets).saturating_add(half.saturating_mul(n));
        }
        (count, nodes)
    }
    trees(g).1
}

// Family engine.

/// A set of witnessed subsets: each subset `U` of H with a forest whose tree
/// values are exactly `U`.
type Witnessed = BTreeMap<u32, Forest>;

/// A state of the family closure: one witnessed family per component. All
/// witness forests of a state share one Ψ-image, stored as `shape`.
#[derive(Clone, Debug)]
pub struct FamilyState {
    pub shape: Forest,
    pub families: Vec<Witnessed>,
}

impl FamilyState {
    fn subsumed_by(&self, other: &FamilyState) -> bool {
        self.families
            .iter()
            .zip(&other.families)
            .all(|(a, b)| a.keys().all(|k| b.contains_key(k)))
    }
}

struct Component<'a> {
    algebra: &'a FiniteForestAlgebra,
    letters: &'a LetterMap,
    cache: HashMap<(VElem, u32), Vec<Cover>>,
}

impl Component<'_> {
    fn step(&mut self, alpha: &Label, fam: &Witnessed) -> Result<Witnessed, PathError> {
        let a = self.algebra;
        let v = self.letters.get(alpha).ok_or_else(|| AlgebraError::UnknownLetter(alpha.clone()))?;
        let mut out = Witnessed::new();
        for (&u, f) in fam {
            let values: Vec<(HElem, &Tree)> =
                f.trees().map(|t| Ok((eval_tree(a, self.letters, t)?, t))).collect::<Result<_, AlgebraError>>()?;
            let cs = self.cache.entry((v, u)).or_insert_with(|| covers(a, v, u));
            for c in cs.iter() {
                if out.contains_key(&c.q) {
                    continue;
                }
                let w = Forest::from_trees(c.sums.iter().map(|&t| {
                    let kids = values.iter().filter(|(x, _)| leq(a, *x, t)).map(|(_, tr)| (*tr).clone());
                    Tree::new(alpha.clone(), Forest::from_trees(kids))
                }));
                out.insert(c.q, w);
            }
        }
        Ok(out)
    }
}

fn family_sum(x: &Witnessed, y: &Witnessed) -> Witnessed {
    let mut out = Witnessed::new();
    for (&u, f) in x {
        for (&w, g) in y {
            out.entry(u | w).or_insert_with(|| f.sum(g));
        }
    }
    out
}

/// Closure over families of value sets, run in lockstep over several
/// (algebra, letter map) components sharing one alphabet.
///
/// For a Ψ-normal forest `g` let `F(g)` be the family of sets of tree values of
/// forests with Ψ-image `g`. The closure applies letters exactly and sums
/// states without the disjoint-support restriction; every state is then a
/// subfamily of `F(g)` for its `shape`, and every `F(g)` is reached, so
/// questions of the form "some `g` has a set with property P" are decided
/// exactly. States subsumed by others are pruned.
pub fn family_closure(
    components: &[(&FiniteForestAlgebra, &LetterMap)],
    cap: usize,
) -> Result<Vec<FamilyState>, PathError> {
    let mut comps = Vec::new();
    for &(a, lm) in components {
        require_engine(a)?;
        comps.push(Component { algebra: a, letters: lm, cache: HashMap::new() });
    }
    let labels: BTreeSet<Label> = components.iter().flat_map(|(_, lm)| lm.labels()).collect();
    let start = FamilyState {
        shape: Forest::empty(),
        families: vec![Witnessed::from([(0u32, Forest::empty())]); comps.len()],
    };
    let mut states: Vec<Option<FamilyState>> = vec![Some(start)];
    let mut queue = VecDeque::from([0usize]);
    let mut live = 1usize;
    let mut created = 1usize;

    fn offer(
        s: FamilyState,
        states: &mut Vec<Option<FamilyState>>,
        queue: &mut VecDeque<usize>,
        live: &mut usize,
    ) {
        if states.iter().flatten().any(|t| s.subsumed_by(t)) {
            return;
        }
        for slot in states.iter_mut() {
            if slot.as_ref().is_some_and(|t| t.subsumed_by(&s)) {
                *slot = None;
                *live -= 1;
            }
        }
        states.push(Some(s));
        *live += 1;
        queue.push_back(states.len() - 1);
    }

    while let Some(i) = queue.pop_front() {
        let Some(x) = states[i].clone() else { continue };
        let mut fresh = Vec::new();
        for l in &labels {
            let mut families = Vec::new();
            for (c, fam) in comps.iter_mut().zip(&x.families) {
                families.push(c.step(l, fam)?);
            }
            fresh.push(FamilyState { shape: Forest::single(Tree::new(l.clone(), x.shape.clone())), families });
        }
        for y in states.iter().flatten() {
            let families = x.families.iter().zip(&y.families).map(|(a, b)| family_sum(a, b)).collect();
            fresh.push(FamilyState { shape: psi(&x.shape.sum(&y.shape)), families });
        }
        for s in fresh {
            created += 1;
            offer(s, &mut states, &mut queue, &mut live);
            if live > cap || created > cap.saturating_mul(64) {
                return Err(PathError::Cap { what: "family closure", cap });
            }
        }
    }
    Ok(states.into_iter().flatten().collect())
}

/// Witness forests `f1, f2` with π(f1) = π(f2) and values `h1, h2`.
pub type PathWitness = (Forest, Forest);

/// Every pair `(h1, h2)` whose preimages share a path set, with witnesses.
pub fn intersecting_pairs(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    cap: usize,
) -> Result<BTreeMap<(HElem, HElem), PathWitness>, PathError> {
    let states = family_closure(&[(a, lm)], cap)?;
    let mut out = BTreeMap::new();
    for s in &states {
        let fam = &s.families[0];
        for (&u1, f1) in fam {
            for (&u2, f2) in fam {
                out.entry((mask_sum(a, u1), mask_sum(a, u2))).or_insert_with(|| (f1.clone(), f2.clone()));
            }
        }
    }
    Ok(out)
}

/// Whether π(φ⁻¹(h1)) ∩ π(φ⁻¹(h2)) is nonempty, with witnesses when it is.
pub fn paths_intersect(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    h1: HElem,
    h2: HElem,
    cap: usize,
) -> Result<Option<PathWitness>, PathError> {
    Ok(intersecting_pairs(a, lm, cap)?.remove(&(h1, h2)))
}

/// Whether some forest accepted by the first recognizer and some forest
/// accepted by the second have the same path set. Both letter maps must share
/// one alphabet.
pub fn paths_intersect_languages(
    first: (&FiniteForestAlgebra, &LetterMap, &BTreeSet<HElem>),
    second: (&FiniteForestAlgebra, &LetterMap, &BTreeSet<HElem>),
    cap: usize,
) -> Result<Option<PathWitness>, PathError> {
    let states = family_closure(&[(first.0, first.1), (second.0, second.1)], cap)?;
    for s in &states {
        let hit = |k: usize, alg: &FiniteForestAlgebra, acc: &BTreeSet<HElem>| {
            s.families[k].iter().find(|(&u, _)| acc.contains(&mask_sum(alg, u))).map(|(_, f)| f.clone())
        };
        if let (Some(f1), Some(f2)) = (hit(0, first.0, first.2), hit(1, second.0, second.2)) {
            return Ok(Some((f1, f2)));
        }
    }
    Ok(None)
}

/// Brute-force counterpart of [`intersecting_pairs`]: pairs of values of
/// enumerated forests that share a path set.
pub fn bounded_intersecting_pairs(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    max_height: usize,
    max_nodes: usize,
    cap: usize,
) -> Result<BTreeSet<(HElem, HElem)>, PathError> {
    let mut buckets: HashMap<Forest, BTreeSet<HElem>> = HashMap::new();
    for f in enumerate_forests(&lm.alphabet(), max_height, max_nodes, cap)? {
        let h = eval_forest(a, lm, &f)?;
        buckets.entry(psi(&f)).or_default().insert(h);
    }
    let mut out = BTreeSet::new();
    for vals in buckets.values() {
        for &x in vals {
            for &y in vals {
                out.insert((x, y));
            }
        }
    }
    Ok(out)
}

/// d ∈ ⟨R,S⟩ within bounds: path sets shared by a nonempty forest whose trees
/// all follow rules of `r` and one whose trees all follow rules of `s`.
pub fn bounded_common_pathsets(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    r: &BTreeSet<Rule>,
    s: &BTreeSet<Rule>,
    max_height: usize,
    max_nodes: usize,
    cap: usize,
) -> Result<BTreeSet<PathSet>, PathError> {
    let follows = |f: &Forest, rules: &BTreeSet<Rule>| -> Result<bool, AlgebraError> {
        for t in f.trees() {
            let children = t
                .children()
                .trees()
                .map(|c| eval_tree(a, lm, c))
                .collect::<Result<BTreeSet<HElem>, _>>()?;
            let rule = Rule { result: eval_tree(a, lm, t)?, label: t.label().clone(), children };
            if !rules.contains(&rule) {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut buckets: HashMap<Forest, (bool, bool)> = HashMap::new();
    for f in enumerate_forests(&lm.alphabet(), max_height, max_nodes, cap)? {
        if f.is_empty() {
            continue;
        }
        let (in_r, in_s) = (follows(&f, r)?, follows(&f, s)?);
        let e = buckets.entry(psi(&f)).or_default();
        e.0 |= in_r;
        e.1 |= in_s;
    }
    Ok(buckets.into_iter().filter(|(_, (x, y))| *x && *y).map(|(g, _)| paths(&g)).collect())
}

// The Π automaton.

/// A deterministic, total automaton over words; each state remembers the set
/// of context values it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordDfa {
    pub alphabet: Vec<Label>,
    pub states: Vec<BTreeSet<VElem>>,
    pub start: usize,
    pub accept: BTreeSet<usize>,
    /// `trans[q][i]` is the successor of `q` on `alphabet[i]`.
    pub trans: Vec<Vec<usize>>,
}

impl WordDfa {
    pub fn state_count(&self) -> usize {
        self.trans.len()
    }

    pub fn run(&self, word: &[Label]) -> Option<usize> {
        let mut q = self.start;
        for l in word {
            let i = self.alphabet.iter().position(|x| x == l)?;
            q = self.trans[q][i];
        }
        Some(q)
    }

    pub fn accepts(&self, word: &[Label]) -> bool {
        self.run(word).is_some_and(|q| self.accept.contains(&q))
    }

    /// True when no word is accepted.
    pub fn is_empty(&self) -> bool {
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(q) = stack.pop() {
            if self.accept.contains(&q) {
                return false;
            }
            for &r in &self.trans[q] {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        true
    }

    /// Accepted words of length at most `n`, shortest first.
    pub fn words_up_to(&self, n: usize) -> Vec<Word> {
        let mut out = Vec::new();
        let mut layer: Vec<(Word, usize)> = vec![(Vec::new(), self.start)];
        for len in 0..=n {
            for (w, q) in &layer {
                if self.accept.contains(q) {
                    out.push(w.clone());
                }
            }
            if len == n {
                break;
            }
            layer = layer
                .iter()
                .flat_map(|(w, q)| {
                    self.alphabet.iter().enumerate().map(move |(i, l)| {
                        let mut w2 = w.clone();
                        w2.push(l.clone());
                        (w2, self.trans[*q][i])
                    })
                })
                .collect();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("DFA\n");
        s += &format!("STATES {}\n", self.state_count());
        s += &format!("START {}\n", self.start);
        let acc: Vec<String> = self.accept.iter().map(|q| q.to_string()).collect();
        s += format!("ACCEPT {}\n", acc.join(" ")).trim_end();
        s.push('\n');
        for (q, set) in self.states.iter().enumerate() {
            let vs: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            s += format!("STATE {q} {}\n", vs.join(" ")).trim_end();
            s.push('\n');
        }
        for (q, row) in self.trans.iter().enumerate() {
            for (i, &r) in row.iter().enumerate() {
                s += &format!("TRANS {q} {} {r}\n", self.alphabet[i]);
            }
        }
        s
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph dfa {\n  rankdir=LR;\n  init [shape=point];\n");
        for (q, set) in self.states.iter().enumerate() {
            let shape = if self.accept.contains(&q) { "doublecircle" } else { "circle" };
            let vs: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            s += &format!("  q{q} [shape={shape}, label=\"{q}\\n{{{}}}\"];\n", vs.join(","));
        }
        s += &format!("  init -> q{};\n", self.start);
        for (q, row) in self.trans.iter().enumerate() {
            let mut grouped: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (i, &r) in row.iter().enumerate() {
                grouped.entry(r).or_default().push(self.alphabet[i].as_str());
            }
            for (r, ls) in grouped {
                s += &format!("  q{q} -> q{r} [label=\"{}\"];\n", ls.join(","));
            }
        }
        s.push_str("}\n");
        s
    }
}

/// The word automaton for Π(L), L = φ⁻¹(accept): the union of the path sets of
/// all accepted forests.
///
/// A state is the set of values `ℓ(α1)·I_h1 ··· ℓ(αk)·I_hk` over realizable
/// `h_i`; it accepts when `h0 + v·0 ∈ accept` for some member `v` and some
/// realizable `h0`.
pub fn pi_automaton(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    accept: &BTreeSet<HElem>,
) -> WordDfa {
    let realizable: Vec<HElem> = forest_values(a, lm).into_iter().collect();
    let alphabet = lm.labels();
    let mut index: BTreeMap<BTreeSet<VElem>, usize> = BTreeMap::new();
    let mut states = vec![BTreeSet::from([a.one()])];
    index.insert(states[0].clone(), 0);
    let mut trans: Vec<Vec<usize>> = Vec::new();
    let mut q = 0;
    while q < states.len() {
        let mut row = Vec::new();
        for l in &alphabet {
            let g = lm.get(l).expect("letter of the map");
            let next: BTreeSet<VElem> = states[q]
                .iter()
                .flat_map(|&v| realizable.iter().map(move |&h| a.mul(a.mul(v, g), a.ins(h))))
                .collect();
            let id = *index.entry(next.clone()).or_insert_with(|| {
                states.push(next);
                states.len() - 1
            });
            row.push(id);
        }
        trans.push(row);
        q += 1;
    }
    let accept = (0..states.len())
        .filter(|&q| {
            states[q].iter().any(|&v| {
                let tail = a.act(v, a.zero());
                realizable.iter().any(|&h0| accept.contains(&a.add(h0, tail)))
            })
        })
        .collect();
    WordDfa { alphabet, states, start: 0, accept, trans }
}

/// Π(L) within bounds: the union of π(f) over enumerated accepted forests.
pub fn bounded_pi_oracle(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    accept: &BTreeSet<HElem>,
    max_height: usize,
    max_nodes: usize,
    cap: usize,
) -> Result<BTreeSet<Word>, PathError> {
    let mut out = BTreeSet::new();
    for f in enumerate_forests(&lm.alphabet(), max_height, max_nodes, cap)? {
        if accept.contains(&eval_forest(a, lm, &f)?) {
            out.extend(paths(&f).words().iter().cloned());
        }
    }
    Ok(out)
}

/// Searches for an accepted forest `s0 + α1[s1 + α2[… αk[sk]]]` containing the
/// path `word`, with each `s_i` drawn from smallest witnesses of realizable
/// values.
pub fn realize_word(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    accept: &BTreeSet<HElem>,
    word: &[Label],
) -> Result<Option<Forest>, AlgebraError> {
    let witnesses: Vec<Forest> = value_witnesses(a, lm).into_values().collect();
    let k = word.len();
    let mut choice = vec![0usize; k + 1];
    loop {
        let mut f = witnesses[choice[k]].clone();
        for i in (0..k).rev() {
            f = witnesses[choice[i]].sum(&Forest::single(Tree::new(word[i].clone(), f)));
        }
        if accept.contains(&eval_forest(a, lm, &f)?) {
            return Ok(Some(f));
        }
        let mut i = 0;
        loop {
            if i > k {
                return Ok(None);
            }
            choice[i] += 1;
            if choice[i] < witnesses.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Renders a set of words one per line.
pub fn render_words<'w>(words: impl IntoIterator<Item = &'w Word>) -> String {
    words.into_iter().map(|w| render_word(w) + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, bool_or};
    use crate::forest::Alphabet;

    fn lbl(s: &str) -> Label {
        Label::new(s).unwrap()
    }

    fn word(s: &str) -> Word {
        if s.is_empty() {
            return Vec::new();
        }
        s.split('.').map(lbl).collect()
    }

    fn bool_or_canonical() -> LetterMap {
        LetterMap::from_pairs(&[("id", 0), ("c0", 1), ("c1", 2)])
    }

    #[test]
    fn apply_letter_on_identity() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let mut e = PsiEngine::new(&a, &lm).unwrap();
        let x = e.apply_letter(&lbl("c1"), &PsiValue::identity()).unwrap();
        assert_eq!(x.component(&lbl("c1")), Some(&Family::from([0b10])));
        assert_eq!(x.component(&lbl("id")), None);
        assert_eq!(e.apply_letter(&lbl("c1"), &PsiValue::Bottom).unwrap(), PsiValue::Bottom);
    }

    #[test]
    fn value_sums() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let mut e = PsiEngine::new(&a, &lm).unwrap();
        let x = e.apply_letter(&lbl("c1"), &PsiValue::identity()).unwrap();
        let y = e.apply_letter(&lbl("c0"), &PsiValue::identity()).unwrap();
        assert_eq!(psi_value_sum(&PsiValue::identity(), &x), x);
        assert_eq!(psi_value_sum(&x, &x), PsiValue::Bottom);
        let z = psi_value_sum(&x, &y);
        assert_eq!(z, psi_value_sum(&y, &x));
        assert_eq!(z.component(&lbl("c0")), Some(&Family::from([0b01])));
        assert!(e.accepts(&x, 1));
        assert!(!e.accepts(&x, 0));
        assert!(!e.accepts(&PsiValue::identity(), 0));
        // {c1, c0} has value 1 although the c0 component lacks {1}
        assert!(e.accepts(&z, 1));
    }

    #[test]
    fn reachable_is_closed() {
        let a = fixtures::one();
        let lm = LetterMap::from_pairs(&[("a", 0)]);
        let mut e = PsiEngine::new(&a, &lm).unwrap();
        let r = e.reachable(1000).unwrap();
        assert!(r.contains(&PsiValue::identity()));
        assert!(r.contains(&PsiValue::Bottom));
        let set: BTreeSet<PsiValue> = r.iter().cloned().collect();
        for x in &r {
            assert!(set.contains(&e.apply_letter(&lbl("a"), x).unwrap()));
            for y in &r {
                assert!(set.contains(&psi_value_sum(x, y)));
            }
        }
        let empty = LetterMap::new(BTreeMap::new());
        let mut e = PsiEngine::new(&a, &empty).unwrap();
        assert_eq!(e.reachable(10).unwrap(), vec![PsiValue::identity()]);
    }

    #[test]
    fn engine_agrees_with_enumeration() {
        for fx in fixtures::builtin_algebras() {
            if fx.algebra.h_size() > 4 || fx.letters.len() > 3 {
                continue;
            }
            let (a, lm) = (&fx.algebra, &fx.letters);
            let mut e = PsiEngine::new(a, lm).unwrap();
            let all = enumerate_forests(&lm.alphabet(), 3, 5, 1 << 20).unwrap();
            let mut bucket: HashMap<Forest, BTreeSet<HElem>> = HashMap::new();
            for f in &all {
                bucket.entry(psi(f)).or_default().insert(eval_forest(a, lm, f).unwrap());
            }
            for (g, vals) in &bucket {
                if g.is_empty() {
                    continue;
                }
                let x = e.value_of(g).unwrap();
                let accepted: BTreeSet<HElem> = (0..a.h_size()).filter(|&h| e.accepts(&x, h)).collect();
                assert!(vals.is_subset(&accepted), "{} at {g}", fx.name);
                if max_psi_preimage_nodes(g) <= 5 {
                    assert_eq!(vals, &accepted, "{} at {g}", fx.name);
                }
            }
        }
    }

    #[test]
    fn preimage_bound() {
        let g = Forest::parse_any("a[b]").unwrap();
        assert_eq!(max_psi_preimage_nodes(&g), 3);
        assert_eq!(max_psi_preimage_nodes(&Forest::parse_any("a,b").unwrap()), 2);
        assert_eq!(max_psi_preimage_nodes(&Forest::empty()), 0);
    }

    #[test]
    fn intersections_of_bool_or() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let pairs = intersecting_pairs(&a, &lm, 1000).unwrap();
        assert!(pairs.contains_key(&(0, 0)));
        assert!(pairs.contains_key(&(1, 1)));
        assert!(!pairs.contains_key(&(0, 1)));
        assert!(!pairs.contains_key(&(1, 0)));
        for (&(h1, h2), (f1, f2)) in &pairs {
            assert_eq!(paths(f1), paths(f2));
            assert_eq!(eval_forest(&a, &lm, f1).unwrap(), h1);
            assert_eq!(eval_forest(&a, &lm, f2).unwrap(), h2);
        }
    }

    #[test]
    fn intersections_match_brute_force() {
        for fx in fixtures::builtin_algebras() {
            if fx.algebra.h_size() > 10 {
                continue;
            }
            let (a, lm) = (&fx.algebra, &fx.letters);
            let pairs = intersecting_pairs(a, lm, DEFAULT_ENGINE_CAP).unwrap();
            let brute = bounded_intersecting_pairs(a, lm, 3, 6, 1 << 20).unwrap();
            for p in &brute {
                assert!(pairs.contains_key(p), "{} misses {p:?}", fx.name);
            }
            for (&(h1, h2), (f1, f2)) in &pairs {
                assert_eq!(paths(f1), paths(f2), "{}", fx.name);
                assert_eq!(eval_forest(a, lm, f1).unwrap(), h1);
                assert_eq!(eval_forest(a, lm, f2).unwrap(), h2);
                assert!(pairs.contains_key(&(h2, h1)));
            }
        }
    }

    #[test]
    fn detector_pairs_intersect() {
        let fx = fixtures::sibling_pair();
        // {a, b} and {a, b} under a detector: t and t
        let w = paths_intersect(&fx.algebra, &fx.letters, 3, 3, 1000).unwrap();
        assert!(w.is_some());
    }

    #[test]
    fn pi_bool_or() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let dfa = pi_automaton(&a, &lm, &BTreeSet::new());
        assert!(dfa.is_empty());
        let all = pi_automaton(&a, &lm, &BTreeSet::from([1]));
        assert_eq!(all.words_up_to(4).len(), (0..=4).map(|k| 3usize.pow(k)).sum::<usize>());
        let zero = pi_automaton(&a, &lm, &BTreeSet::from([0]));
        for w in all.words_up_to(4) {
            let bad = (0..w.len()).any(|k| {
                w[..k].iter().all(|l| l.as_str() == "id") && w[k].as_str() == "c1"
            });
            assert_eq!(zero.accepts(&w), !bad, "{}", render_word(&w));
        }
    }

    #[test]
    fn pi_oracle_bool_or() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let acc = BTreeSet::from([1]);
        let seen = bounded_pi_oracle(&a, &lm, &acc, 2, 4, 1 << 16).unwrap();
        assert!(seen.contains(&word("c1")));
        assert!(seen.contains(&word("id.c1")));
        assert!(bounded_pi_oracle(&a, &lm, &BTreeSet::new(), 2, 4, 1 << 16).unwrap().is_empty());
        let dfa = pi_automaton(&a, &lm, &acc);
        assert!(seen.iter().all(|w| dfa.accepts(w)));
    }

    #[test]
    fn dfa_words_are_realized() {
        for fx in fixtures::builtin_algebras() {
            let dfa = pi_automaton(&fx.algebra, &fx.letters, &fx.accept);
            for w in dfa.words_up_to(3) {
                let f = realize_word(&fx.algebra, &fx.letters, &fx.accept, &w).unwrap();
                let f = f.unwrap_or_else(|| panic!("{}: no forest for {}", fx.name, render_word(&w)));
                assert!(paths(&f).contains(&w));
            }
        }
    }

    #[test]
    fn dfa_text_lists_transitions() {
        let a = bool_or();
        let lm = bool_or_canonical();
        let dfa = pi_automaton(&a, &lm, &BTreeSet::from([0]));
        let text = dfa.to_text();
        assert!(text.starts_with("DFA\nSTATES "));
        assert_eq!(text.lines().filter(|l| l.starts_with("TRANS")).count(), dfa.state_count() * 3);
        assert!(dfa.to_dot().contains("doublecircle"));
    }

    #[test]
    fn common_pathsets() {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2), ("b", 0)]);
        let rules = crate::algebra::enumerate_rules(&a, &lm).unwrap();
        let all = bounded_common_pathsets(&a, &lm, &rules, &rules, 2, 3, 1 << 16).unwrap();
        let expect: BTreeSet<PathSet> = enumerate_forests(&Alphabet::from_strs(&["a", "b"]), 2, 3, 1 << 16)
            .unwrap()
            .iter()
            .filter(|f| !f.is_empty())
            .map(paths)
            .collect();
        assert_eq!(all, expect);
        let only = |l: &str| rules.iter().filter(|r| r.label.as_str() == l).cloned().collect::<BTreeSet<_>>();
        assert!(bounded_common_pathsets(&a, &lm, &only("a"), &only("b"), 3, 4, 1 << 16).unwrap().is_empty());
        let r = BTreeSet::from([Rule { result: 1, label: lbl("a"), children: BTreeSet::new() }]);
        let s = BTreeSet::from([Rule { result: 1, label: lbl("b"), children: BTreeSet::from([1]) }]);
        assert!(bounded_common_pathsets(&a, &lm, &r, &s, 3, 5, 1 << 16).unwrap().is_empty());
    }

    #[test]
    fn l1_and_l2_are_path_disjoint() {
        let (x, y) = (fixtures::l1(), fixtures::l2());
        let w = paths_intersect_languages(
            (&x.algebra, &x.letters, &x.accept),
            (&y.algebra, &y.letters, &y.accept),
            DEFAULT_ENGINE_CAP,
        )
        .unwrap();
        assert_eq!(w, None);
        let same = paths_intersect_languages(
            (&x.algebra, &x.letters, &x.accept),
            (&x.algebra, &x.letters, &x.accept),
            DEFAULT_ENGINE_CAP,
        )
        .unwrap();
        assert!(same.is_some());
    }
}
