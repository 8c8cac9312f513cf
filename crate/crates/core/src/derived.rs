//! Derived forest categories of a pair of morphisms over one alphabet.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::algebra::{FiniteForestAlgebra, HElem, LetterMap, VElem};
use crate::forest::{psi, Forest, Label, Tree};
use crate::twodist::canonical_self_morphism;
use crate::wreath::WreathAlgebra;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivedError {
    #[error("the letter maps have different alphabets")]
    AlphabetMismatch,
    #[error("({0}, {1}) is not a half-arrow")]
    UnknownHalf(HElem, HElem),
    #[error("no arrow with id {0}")]
    UnknownArrow(usize),
    #[error("endpoint mismatch: expected object {expected}, found {found}")]
    EndpointMismatch { expected: HElem, found: HElem },
    #[error("inconsistent diagram at `{node}`: children end in {found}, arrow starts at {expected}")]
    Inconsistent { node: String, expected: HElem, found: HElem },
    #[error("bad diagram label `{0}`")]
    BadLabel(String),
    #[error("the empty diagram has no value")]
    EmptyDiagram,
    #[error("assignment is missing {0}")]
    Partial(String),
    #[error("assignment gives an empty set to {0}")]
    EmptySet(String),
}

/// Value pairs realized by forests (`r`) and by contexts (`w`) under two
/// morphisms over a shared alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairImage {
    pub r: BTreeSet<(HElem, HElem)>,
    pub w: BTreeSet<(VElem, VElem)>,
}

pub fn build_pair_image(
    a1: &FiniteForestAlgebra,
    l1: &LetterMap,
    a2: &FiniteForestAlgebra,
    l2: &LetterMap,
) -> Result<PairImage, DerivedError> {
    if l1.labels() != l2.labels() {
        return Err(DerivedError::AlphabetMismatch);
    }
    let letters: Vec<(VElem, VElem)> = l1.images().into_iter().zip(l2.images()).collect();
    let mut r = BTreeSet::from([(a1.zero(), a2.zero())]);
    loop {
        let mut next = r.clone();
        for &(x, y) in &r {
            for &(u, v) in &r {
                next.insert((a1.add(x, u), a2.add(y, v)));
            }
            for &(g1, g2) in &letters {
                next.insert((a1.act(g1, x), a2.act(g2, y)));
            }
        }
        if next.len() == r.len() {
            break;
        }
        r = next;
    }
    let mut gens = letters.clone();
    gens.extend(r.iter().map(|&(x, y)| (a1.ins(x), a2.ins(y))));
    let mut w = BTreeSet::from([(a1.one(), a2.one())]);
    let mut frontier: Vec<(VElem, VElem)> = w.iter().copied().collect();
    while let Some((p1, p2)) = frontier.pop() {
        for &(g1, g2) in &gens {
            let q = (a1.mul(g1, p1), a2.mul(g2, p2));
            if w.insert(q) {
                frontier.push(q);
            }
        }
    }
    Ok(PairImage { r, w })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfArrow {
    pub value: HElem,
    pub endpoint: HElem,
}

impl fmt::Display for HalfArrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H:{}@{}", self.value, self.endpoint)
    }
}

pub type ArrowId = usize;

/// An arrow given by its action on the half-arrow values at its source.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arrow {
    pub source: HElem,
    pub target: HElem,
    /// `row[i]` is the image of the `i`-th value at `source`.
    pub row: Vec<HElem>,
}

/// The derived category, with objects restricted to the image of the right
/// morphism.
#[derive(Clone, Debug)]
pub struct DerivedCategory {
    pub left: FiniteForestAlgebra,
    pub right: FiniteForestAlgebra,
    pub image: PairImage,
    objects: Vec<HElem>,
    values: BTreeMap<HElem, Vec<HElem>>,
    halves: Vec<HalfArrow>,
    arrows: Vec<Arrow>,
    index: HashMap<Arrow, ArrowId>,
    /// Context value pairs realizing each arrow.
    reps: Vec<BTreeSet<(VElem, VElem)>>,
}

pub fn build_derived_category(
    a1: &FiniteForestAlgebra,
    l1: &LetterMap,
    a2: &FiniteForestAlgebra,
    l2: &LetterMap,
) -> Result<DerivedCategory, DerivedError> {
    let image = build_pair_image(a1, l1, a2, l2)?;
    let mut values: BTreeMap<HElem, Vec<HElem>> = BTreeMap::new();
    for &(a, b) in &image.r {
        values.entry(b).or_default().push(a);
    }
    let objects: Vec<HElem> = values.keys().copied().collect();
    let halves = image.r.iter().map(|&(value, endpoint)| HalfArrow { value, endpoint }).collect();
    let mut c = DerivedCategory {
        left: a1.clone(),
        right: a2.clone(),
        image,
        objects,
        values,
        halves,
        arrows: Vec::new(),
        index: HashMap::new(),
        reps: Vec::new(),
    };
    let mut found: BTreeMap<Arrow, BTreeSet<(VElem, VElem)>> = BTreeMap::new();
    for &h in &c.objects {
        for &(w1, w2) in &c.image.w {
            let arrow = Arrow {
                source: h,
                target: a2.act(w2, h),
                row: c.values[&h].iter().map(|&x| a1.act(w1, x)).collect(),
            };
            found.entry(arrow).or_default().insert((w1, w2));
        }
    }
    for (arrow, reps) in found {
        c.index.insert(arrow.clone(), c.arrows.len());
        c.arrows.push(arrow);
        c.reps.push(reps);
    }
    Ok(c)
}

/// The category of a morphism against the one-element algebra: one object,
/// and the whole algebra fragment as half-arrows and arrows.
pub fn one_object_category(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
) -> Result<DerivedCategory, DerivedError> {
    let trivial = crate::fixtures::one();
    build_derived_category(a, lm, &trivial, &lm.map_values(|_| 0))
}

/// The category of a wreath fragment against its right factor, over the
/// canonical alphabet of the fragment.
pub fn wreath_category(w: &WreathAlgebra) -> Result<DerivedCategory, DerivedError> {
    let lm = canonical_self_morphism(&w.algebra);
    let right = lm.map_values(|v| w.v_right[v]);
    build_derived_category(&w.algebra, &lm, &w.right, &right)
}

impl DerivedCategory {
    pub fn objects(&self) -> &[HElem] {
        &self.objects
    }

    pub fn half_arrows(&self) -> &[HalfArrow] {
        &self.halves
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn arrow(&self, id: ArrowId) -> Result<&Arrow, DerivedError> {
        self.arrows.get(id).ok_or(DerivedError::UnknownArrow(id))
    }

    /// Context value pairs realizing the arrow.
    pub fn representatives(&self, id: ArrowId) -> &BTreeSet<(VElem, VElem)> {
        &self.reps[id]
    }

    /// Left values of the half-arrows ending in `h`, ascending.
    pub fn values_at(&self, h: HElem) -> &[HElem] {
        self.values.get(&h).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn halves_at(&self, h: HElem) -> impl Iterator<Item = HalfArrow> + '_ {
        self.values_at(h).iter().map(move |&value| HalfArrow { value, endpoint: h })
    }

    pub fn arrows_from(&self, h: HElem) -> impl Iterator<Item = ArrowId> + '_ {
        (0..self.arrows.len()).filter(move |&i| self.arrows[i].source == h)
    }

    pub fn hom(&self, h: HElem, h2: HElem) -> Vec<ArrowId> {
        (0..self.arrows.len()).filter(|&i| self.arrows[i].source == h && self.arrows[i].target == h2).collect()
    }

    pub fn find(&self, arrow: &Arrow) -> Option<ArrowId> {
        self.index.get(arrow).copied()
    }

    pub fn identity(&self, h: HElem) -> Option<ArrowId> {
        self.find(&Arrow { source: h, target: h, row: self.values_at(h).to_vec() })
    }

    fn check_half(&self, x: HalfArrow) -> Result<(), DerivedError> {
        if self.image.r.contains(&(x.value, x.endpoint)) {
            Ok(())
        } else {
            Err(DerivedError::UnknownHalf(x.value, x.endpoint))
        }
    }

    /// The row entry of `id` at left value `a`.
    pub fn apply_row(&self, id: ArrowId, a: HElem) -> Result<HElem, DerivedError> {
        let arrow = self.arrow(id)?;
        let i = self
            .values_at(arrow.source)
            .binary_search(&a)
            .map_err(|_| DerivedError::UnknownHalf(a, arrow.source))?;
        Ok(arrow.row[i])
    }

    /// `a2 ∘ a1`, defined when `a1` ends where `a2` starts.
    pub fn compose(&self, a2: ArrowId, a1: ArrowId) -> Result<ArrowId, DerivedError> {
        let (x, y) = (self.arrow(a2)?, self.arrow(a1)?);
        if y.target != x.source {
            return Err(DerivedError::EndpointMismatch { expected: x.source, found: y.target });
        }
        let row = y.row.iter().map(|&v| self.apply_row(a2, v)).collect::<Result<_, _>>()?;
        let arrow = Arrow { source: y.source, target: x.target, row };
        self.find(&arrow).ok_or(DerivedError::UnknownArrow(usize::MAX))
    }

    pub fn act(&self, id: ArrowId, x: HalfArrow) -> Result<HalfArrow, DerivedError> {
        self.check_half(x)?;
        let arrow = self.arrow(id)?;
        if x.endpoint != arrow.source {
            return Err(DerivedError::EndpointMismatch { expected: arrow.source, found: x.endpoint });
        }
        Ok(HalfArrow { value: self.apply_row(id, x.value)?, endpoint: arrow.target })
    }

    pub fn add_halves(&self, x: HalfArrow, y: HalfArrow) -> Result<HalfArrow, DerivedError> {
        self.check_half(x)?;
        self.check_half(y)?;
        Ok(HalfArrow {
            value: self.left.add(x.value, y.value),
            endpoint: self.right.add(x.endpoint, y.endpoint),
        })
    }

    /// `a + y`: same source, target moved by `y.endpoint`, values shifted by `y.value`.
    pub fn add_arrow_half(&self, id: ArrowId, y: HalfArrow) -> Result<ArrowId, DerivedError> {
        self.check_half(y)?;
        let a = self.arrow(id)?;
        let arrow = Arrow {
            source: a.source,
            target: self.right.add(a.target, y.endpoint),
            row: a.row.iter().map(|&v| self.left.add(v, y.value)).collect(),
        };
        self.find(&arrow).ok_or(DerivedError::UnknownArrow(usize::MAX))
    }

    /// First `(arrow, x, y)` with `a(x+y) ≠ ax + ay`, or `None`.
    pub fn local_distributivity_failure(&self) -> Option<(ArrowId, HalfArrow, HalfArrow)> {
        for (id, arrow) in self.arrows.iter().enumerate() {
            let vals = self.values_at(arrow.source);
            for (i, &x) in vals.iter().enumerate() {
                for (j, &y) in vals.iter().enumerate() {
                    let s = self.left.add(x, y);
                    let row_s = self.apply_row(id, s).expect("sums stay at the object");
                    if row_s != self.left.add(arrow.row[i], arrow.row[j]) {
                        let h = arrow.source;
                        return Some((id, HalfArrow { value: x, endpoint: h }, HalfArrow { value: y, endpoint: h }));
                    }
                }
            }
        }
        None
    }

    pub fn is_locally_distributive(&self) -> bool {
        self.local_distributivity_failure().is_none()
    }

    /// Position of the arrow within its hom-set.
    pub fn hom_index(&self, id: ArrowId) -> usize {
        let a = &self.arrows[id];
        self.hom(a.source, a.target).iter().position(|&x| x == id).expect("member of its hom-set")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s += &format!("objects {}\n", self.objects.len());
        s += &format!("half-arrows {}\n", self.halves.len());
        s += &format!("arrows {}\n", self.arrows.len());
        for &h in &self.objects {
            let vals: Vec<String> = self.values_at(h).iter().map(|v| v.to_string()).collect();
            s += &format!("object {h} values {}\n", vals.join(" "));
        }
        for (id, a) in self.arrows.iter().enumerate() {
            let row: Vec<String> = self
                .values_at(a.source)
                .iter()
                .zip(&a.row)
                .map(|(x, y)| format!("{x}>{y}"))
                .collect();
            s += &format!("arrow {} {}\n", self.arrow_label(id), row.join(" "));
        }
        s
    }

    // Diagrams.

    pub fn half_label(&self, x: HalfArrow) -> Label {
        Label::new(&x.to_string()).expect("diagram label")
    }

    pub fn arrow_label(&self, id: ArrowId) -> Label {
        let a = &self.arrows[id];
        Label::new(&format!("A:{}>{}#{}", a.source, a.target, self.hom_index(id))).expect("diagram label")
    }

    pub fn parse_label(&self, l: &Label) -> Result<DiagramNode, DerivedError> {
        let bad = || DerivedError::BadLabel(l.to_string());
        let s = l.as_str();
        if let Some(rest) = s.strip_prefix("H:") {
            let (v, h) = rest.split_once('@').ok_or_else(bad)?;
            let x = HalfArrow { value: v.parse().map_err(|_| bad())?, endpoint: h.parse().map_err(|_| bad())? };
            self.check_half(x)?;
            return Ok(DiagramNode::Half(x));
        }
        let rest = s.strip_prefix("A:").ok_or_else(bad)?;
        let (ends, k) = rest.split_once('#').ok_or_else(bad)?;
        let (h, h2) = ends.split_once('>').ok_or_else(bad)?;
        let (h, h2, k): (HElem, HElem, usize) =
            (h.parse().map_err(|_| bad())?, h2.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?);
        self.hom(h, h2).get(k).map(|&id| DiagramNode::Arrow(id)).ok_or_else(bad)
    }
}

/// A diagram node: a half-arrow leaf or an arrow above a nonempty forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagramNode {
    Half(HalfArrow),
    Arrow(ArrowId),
}

fn tree_val(c: &DerivedCategory, t: &Tree) -> Result<HalfArrow, DerivedError> {
    match c.parse_label(t.label())? {
        DiagramNode::Half(x) if t.children().is_empty() => Ok(x),
        DiagramNode::Half(_) => Err(DerivedError::BadLabel(format!("{} has children", t.label()))),
        DiagramNode::Arrow(_) if t.children().is_empty() => Err(DerivedError::EmptyDiagram),
        DiagramNode::Arrow(id) => {
            let below = diagram_val(c, t.children())?;
            let expected = c.arrows[id].source;
            if below.endpoint != expected {
                return Err(DerivedError::Inconsistent {
                    node: t.label().to_string(),
                    expected,
                    found: below.endpoint,
                });
            }
            c.act(id, below)
        }
    }
}

/// The half-arrow a consistent nonempty diagram evaluates to.
pub fn diagram_val(c: &DerivedCategory, d: &Forest) -> Result<HalfArrow, DerivedError> {
    let mut trees = d.trees();
    let first = trees.next().ok_or(DerivedError::EmptyDiagram)?;
    let mut acc = tree_val(c, first)?;
    for t in trees {
        acc = c.add_halves(acc, tree_val(c, t)?)?;
    }
    Ok(acc)
}

/// Merges one pair of equal-label siblings, outermost level first.
fn merge_once(d: &Forest) -> Option<Forest> {
    let trees: Vec<&Tree> = d.trees().collect();
    for w in trees.windows(2) {
        if w[0].label() == w[1].label() {
            let mut out = d.clone();
            out.remove(w[0]);
            out.remove(w[1]);
            out.insert(Tree::new(w[0].label().clone(), w[0].children().sum(w[1].children())));
            return Some(out);
        }
    }
    for t in trees {
        if let Some(kids) = merge_once(t.children()) {
            let mut out = d.clone();
            out.remove(t);
            out.insert(Tree::new(t.label().clone(), kids));
            return Some(out);
        }
    }
    None
}

/// Repeatedly replaces two sibling nodes carrying the same arrow by one node
/// over the sum of their children. Siblings are sorted by label, so equal
/// labels are adjacent.
pub fn diagram_merge(d: &Forest) -> Forest {
    let mut cur = d.clone();
    while let Some(next) = merge_once(&cur) {
        cur = next;
    }
    cur
}

/// A random consistent diagram built bottom-up: each arrow node is chosen
/// among the arrows starting at the endpoint sum of its children.
pub fn random_diagram(c: &DerivedCategory, rng: &mut impl Rng, depth: usize, width: usize) -> Forest {
    let n = rng.gen_range(1..=width.max(1));
    let mut trees = Vec::new();
    for _ in 0..n {
        if depth == 0 || c.arrows.is_empty() || rng.gen_bool(0.3) {
            let x = c.halves[rng.gen_range(0..c.halves.len())];
            trees.push(Tree::leaf(c.half_label(x)));
        } else {
            let kids = random_diagram(c, rng, depth - 1, width);
            let h = diagram_val(c, &kids).expect("consistent by construction").endpoint;
            let from: Vec<ArrowId> = c.arrows_from(h).collect();
            let id = from[rng.gen_range(0..from.len())];
            trees.push(Tree::new(c.arrow_label(id), kids));
        }
    }
    Forest::from_trees(trees)
}

/// True when the merged form agrees with Ψ.
pub fn merge_matches_psi(d: &Forest) -> bool {
    diagram_merge(d) == psi(d)
}

// Division.

/// Sets assigned to half-arrows (subsets of H) and arrows (subsets of V).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub halves: BTreeMap<HalfArrow, BTreeSet<HElem>>,
    pub arrows: BTreeMap<ArrowId, BTreeSet<VElem>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Clause {
    /// `K_f · K_e ⊆ K_{f∘e}`
    Compose,
    /// `K_e · K_c ⊆ K_{e·c}`
    Act,
    /// `K_c + K_d ⊆ K_{c+d}`
    AddHalves,
    /// `K_c + K_f ⊆ K_{c+f}`
    HalfPlusArrow,
    /// `K_f + K_c ⊆ K_{f+c}`
    ArrowPlusHalf,
    /// distinct parallel arrows get disjoint sets
    ArrowsDisjoint,
    /// distinct half-arrows at one object get disjoint sets
    HalvesDisjoint,
}

impl Clause {
    pub const ALL: [Clause; 7] = [
        Clause::Compose,
        Clause::Act,
        Clause::AddHalves,
        Clause::HalfPlusArrow,
        Clause::ArrowPlusHalf,
        Clause::ArrowsDisjoint,
        Clause::HalvesDisjoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Clause::Compose => "1a",
            Clause::Act => "1b",
            Clause::AddHalves => "1c",
            Clause::HalfPlusArrow => "1d",
            Clause::ArrowPlusHalf => "1e",
            Clause::ArrowsDisjoint => "2a",
            Clause::HalvesDisjoint => "2b",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub clause: Clause,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {}: {}", self.clause.name(), self.detail)
    }
}

fn check_total(c: &DerivedCategory, k: &Assignment) -> Result<(), DerivedError> {
    for &x in &c.halves {
        match k.halves.get(&x) {
            None => return Err(DerivedError::Partial(x.to_string())),
            Some(s) if s.is_empty() => return Err(DerivedError::EmptySet(x.to_string())),
            _ => {}
        }
    }
    for id in 0..c.arrows.len() {
        match k.arrows.get(&id) {
            None => return Err(DerivedError::Partial(c.arrow_label(id).to_string())),
            Some(s) if s.is_empty() => return Err(DerivedError::EmptySet(c.arrow_label(id).to_string())),
            _ => {}
        }
    }
    Ok(())
}

/// The first violation of each clause among the entries present in `k`.
fn violations(c: &DerivedCategory, a: &FiniteForestAlgebra, k: &Assignment) -> Vec<Violation> {
    let mut out: BTreeMap<Clause, String> = BTreeMap::new();
    let mut note = |clause: Clause, detail: String| {
        out.entry(clause).or_insert(detail);
    };
    let ka = |id: ArrowId| k.arrows.get(&id);
    let kh = |x: &HalfArrow| k.halves.get(x);
    for (e, ea) in c.arrows.iter().enumerate() {
        let Some(ke) = ka(e) else { continue };
        for f in c.arrows_from(ea.target) {
            let (Some(kf), Ok(fe)) = (ka(f), c.compose(f, e)) else { continue };
            let Some(kfe) = ka(fe) else { continue };
            for &v in kf {
                for &w in ke {
                    if !kfe.contains(&a.mul(v, w)) {
                        note(Clause::Compose, format!("{}·{} via {v}·{w}", c.arrow_label(f), c.arrow_label(e)));
                    }
                }
            }
        }
        for x in c.halves_at(ea.source) {
            let (Some(kx), Ok(y)) = (kh(&x), c.act(e, x)) else { continue };
            let Some(ky) = kh(&y) else { continue };
            for &v in ke {
                for &h in kx {
                    if !ky.contains(&a.act(v, h)) {
                        note(Clause::Act, format!("{} on {x} via {v}·{h}", c.arrow_label(e)));
                    }
                }
            }
        }
        for &x in &c.halves {
            let (Some(kx), Ok(g)) = (kh(&x), c.add_arrow_half(e, x)) else { continue };
            let Some(kg) = ka(g) else { continue };
            for &v in ke {
                for &h in kx {
                    let sum = a.mul(a.ins(h), v);
                    if !kg.contains(&sum) {
                        let at = format!("{x} and {} via {h}+{v}", c.arrow_label(e));
                        note(Clause::HalfPlusArrow, at.clone());
                        note(Clause::ArrowPlusHalf, at);
                    }
                }
            }
        }
    }
    for &x in &c.halves {
        let Some(kx) = kh(&x) else { continue };
        for &y in &c.halves {
            let (Some(ky), Ok(s)) = (kh(&y), c.add_halves(x, y)) else { continue };
            let Some(ks) = kh(&s) else { continue };
            for &g in kx {
                for &h in ky {
                    if !ks.contains(&a.add(g, h)) {
                        note(Clause::AddHalves, format!("{x}+{y} via {g}+{h}"));
                    }
                }
            }
        }
    }
    for (i, ai) in c.arrows.iter().enumerate() {
        for (j, aj) in c.arrows.iter().enumerate().skip(i + 1) {
            if (ai.source, ai.target) != (aj.source, aj.target) {
                continue;
            }
            if let (Some(x), Some(y)) = (ka(i), ka(j)) {
                if !x.is_disjoint(y) {
                    note(Clause::ArrowsDisjoint, format!("{} and {}", c.arrow_label(i), c.arrow_label(j)));
                }
            }
        }
    }
    for (i, x) in c.halves.iter().enumerate() {
        for y in &c.halves[i + 1..] {
            if x.endpoint != y.endpoint {
                continue;
            }
            if let (Some(p), Some(q)) = (kh(x), kh(y)) {
                if !p.is_disjoint(q) {
                    note(Clause::HalvesDisjoint, format!("{x} and {y}"));
                }
            }
        }
    }
    out.into_iter().map(|(clause, detail)| Violation { clause, detail }).collect()
}

/// Checks every clause of division exhaustively; an empty result accepts.
pub fn verify_division(
    c: &DerivedCategory,
    a: &FiniteForestAlgebra,
    k: &Assignment,
) -> Result<Vec<Violation>, DerivedError> {
    check_total(c, k)?;
    Ok(violations(c, a, k))
}

/// The division of a category into its own left algebra: each half-arrow gets
/// its value, each arrow the left components of its representatives.
pub fn canonical_assignment(c: &DerivedCategory) -> Assignment {
    Assignment {
        halves: c.halves.iter().map(|&x| (x, BTreeSet::from([x.value]))).collect(),
        arrows: (0..c.arrows.len()).map(|id| (id, c.reps[id].iter().map(|&(w1, _)| w1).collect())).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Assignment),
    /// The whole space was searched.
    NoDivision,
    BudgetExhausted,
}

fn nonempty_subsets(n: usize) -> Vec<BTreeSet<usize>> {
    let mut out: Vec<BTreeSet<usize>> =
        (1u64..1 << n).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect();
    out.sort_by_key(|s| (s.len(), s.iter().copied().collect::<Vec<_>>()));
    out
}

/// Backtracking search for a division of `c` into `a`, smallest sets first.
/// `budget` bounds the number of candidate sets tried.
pub fn search_division(c: &DerivedCategory, a: &FiniteForestAlgebra, budget: usize) -> SearchOutcome {
    let hs = nonempty_subsets(a.h_size().min(20));
    let vs = nonempty_subsets(a.v_size().min(20));
    let mut k = Assignment::default();
    let mut spent = 0usize;

    enum Var {
        Half(HalfArrow),
        Arrow(ArrowId),
    }
    let vars: Vec<Var> = c
        .halves
        .iter()
        .map(|&x| Var::Half(x))
        .chain((0..c.arrows.len()).map(Var::Arrow))
        .collect();

    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        vars: &[Var],
        c: &DerivedCategory,
        a: &FiniteForestAlgebra,
        hs: &[BTreeSet<usize>],
        vs: &[BTreeSet<usize>],
        k: &mut Assignment,
        spent: &mut usize,
        budget: usize,
    ) -> Option<bool> {
        if i == vars.len() {
            return Some(true);
        }
        let domain = match vars[i] {
            Var::Half(_) => hs,
            Var::Arrow(_) => vs,
        };
        for s in domain {
            if *spent >= budget {
                return None;
            }
            *spent += 1;
            match vars[i] {
                Var::Half(x) => {
                    k.halves.insert(x, s.clone());
                }
                Var::Arrow(id) => {
                    k.arrows.insert(id, s.clone());
                }
            }
            if violations(c, a, k).is_empty() {
                match go(i + 1, vars, c, a, hs, vs, k, spent, budget) {
                    Some(true) => return Some(true),
                    None => return None,
                    Some(false) => {}
                }
            }
        }
        match vars[i] {
            Var::Half(x) => {
                k.halves.remove(&x);
            }
            Var::Arrow(id) => {
                k.arrows.remove(&id);
            }
        }
        Some(false)
    }

    match go(0, &vars, c, a, &hs, &vs, &mut k, &mut spent, budget) {
        Some(true) => SearchOutcome::Found(k),
        Some(false) => SearchOutcome::NoDivision,
        None => SearchOutcome::BudgetExhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::is_distributive;
    use crate::fixtures::{self, bool_or};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diagonal() -> DerivedCategory {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2)]);
        build_derived_category(&a, &lm, &a, &lm).unwrap()
    }

    #[test]
    fn pair_image_of_the_diagonal() {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2)]);
        let p = build_pair_image(&a, &lm, &a, &lm).unwrap();
        assert_eq!(p.r, BTreeSet::from([(0, 0), (1, 1)]));
        assert!(p.w.contains(&(0, 0)));
        let other = LetterMap::from_pairs(&[("b", 2)]);
        assert_eq!(build_pair_image(&a, &lm, &a, &other), Err(DerivedError::AlphabetMismatch));
    }

    #[test]
    fn diagonal_category() {
        let c = diagonal();
        assert_eq!(c.objects(), &[0, 1]);
        let up = c.hom(0, 1);
        assert_eq!(up.len(), 1);
        assert_eq!(c.arrow(up[0]).unwrap().row, vec![1]);
        for &h in c.objects() {
            assert!(c.identity(h).is_some());
        }
        let id0 = c.identity(0).unwrap();
        assert_eq!(c.compose(up[0], id0).unwrap(), up[0]);
        assert_eq!(c.compose(id0, id0).unwrap(), id0);
        assert!(c.compose(id0, up[0]).is_err());
        let zero = HalfArrow { value: 0, endpoint: 0 };
        let top = HalfArrow { value: 1, endpoint: 1 };
        assert_eq!(c.act(up[0], zero).unwrap(), top);
        assert_eq!(c.act(id0, zero).unwrap(), zero);
        assert_eq!(c.add_halves(zero, zero).unwrap(), zero);
        assert_eq!(c.add_halves(top, top).unwrap(), top);
        let moved = c.add_arrow_half(up[0], top).unwrap();
        assert_eq!(c.arrow(moved).unwrap(), &Arrow { source: 0, target: 1, row: vec![1] });
        assert!(c.is_locally_distributive());
    }

    #[test]
    fn composition_is_associative() {
        for fx in fixtures::builtin_algebras() {
            let c = one_object_category(&fx.algebra, &fx.letters).unwrap();
            let n = c.arrows().len().min(12);
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let l = c.compose(x, c.compose(y, z).unwrap()).unwrap();
                        let r = c.compose(c.compose(x, y).unwrap(), z).unwrap();
                        assert_eq!(l, r, "{}", fx.name);
                    }
                }
            }
        }
    }

    #[test]
    fn operations_do_not_depend_on_representatives() {
        for fx in fixtures::builtin_algebras() {
            let c = one_object_category(&fx.algebra, &fx.letters).unwrap();
            let (a1, a2) = (&c.left, &c.right);
            for id in 0..c.arrows().len() {
                let arrow = c.arrow(id).unwrap().clone();
                for &(w1, w2) in c.representatives(id) {
                    assert_eq!(a2.act(w2, arrow.source), arrow.target);
                    for x in c.halves_at(arrow.source) {
                        let y = c.act(id, x).unwrap();
                        assert_eq!(y, HalfArrow { value: a1.act(w1, x.value), endpoint: a2.act(w2, x.endpoint) });
                    }
                }
            }
        }
    }

    #[test]
    fn detector_is_not_locally_distributive() {
        let fx = fixtures::sibling_pair();
        let c = one_object_category(&fx.algebra, &fx.letters).unwrap();
        let (id, x, y) = c.local_distributivity_failure().unwrap();
        let lhs = c.act(id, c.add_halves(x, y).unwrap()).unwrap();
        let rhs = c.add_halves(c.act(id, x).unwrap(), c.act(id, y).unwrap()).unwrap();
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn distributive_pairs_are_locally_distributive() {
        let dist: Vec<_> = fixtures::builtin_algebras()
            .into_iter()
            .filter(|f| is_distributive(&f.algebra).unwrap().is_none())
            .collect();
        for x in &dist {
            for y in &dist {
                let lm = y.letters.clone();
                let l1 = lm.map_values(|v| v % x.algebra.v_size());
                let c = build_derived_category(&x.algebra, &l1, &y.algebra, &lm).unwrap();
                assert!(c.is_locally_distributive(), "{} / {}", x.name, y.name);
            }
        }
    }

    #[test]
    fn diagrams() {
        let c = diagonal();
        let up = c.hom(0, 1)[0];
        let leaf = Forest::parse_any("H:0@0").unwrap();
        assert_eq!(diagram_val(&c, &leaf).unwrap(), HalfArrow { value: 0, endpoint: 0 });
        let node = Forest::single(Tree::new(c.arrow_label(up), leaf.clone()));
        assert_eq!(node.to_string(), "A:0>1#0[H:0@0]");
        assert_eq!(diagram_val(&c, &node).unwrap(), HalfArrow { value: 1, endpoint: 1 });
        let bad = Forest::parse_any("A:0>1#0[H:1@1]").unwrap();
        assert!(matches!(diagram_val(&c, &bad), Err(DerivedError::Inconsistent { .. })));
        assert_eq!(diagram_val(&c, &Forest::empty()), Err(DerivedError::EmptyDiagram));
    }

    #[test]
    fn merge_is_psi() {
        let d = Forest::parse_any("A:0>1#0[H:0@0], A:0>1#0[A:0>0#0[H:0@0]], H:1@1").unwrap();
        let m = diagram_merge(&d);
        assert_eq!(m, psi(&d));
        assert_eq!(diagram_merge(&m), m);
        let c = diagonal();
        assert_eq!(diagram_val(&c, &m), diagram_val(&c, &d));
    }

    #[test]
    fn random_diagrams_merge_to_the_same_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = diagonal();
        for _ in 0..200 {
            let d = random_diagram(&c, &mut rng, 3, 3);
            let m = diagram_merge(&d);
            assert!(merge_matches_psi(&d));
            assert_eq!(diagram_val(&c, &m).unwrap(), diagram_val(&c, &d).unwrap());
        }
    }

    #[test]
    fn canonical_assignments_divide() {
        for fx in fixtures::builtin_algebras() {
            let c = one_object_category(&fx.algebra, &fx.letters).unwrap();
            let k = canonical_assignment(&c);
            assert_eq!(verify_division(&c, &fx.algebra, &k).unwrap(), vec![], "{}", fx.name);
        }
        let c = diagonal();
        assert!(verify_division(&c, &c.left, &canonical_assignment(&c)).unwrap().is_empty());
    }

    #[test]
    fn corrupted_assignments_fail() {
        let c = diagonal();
        let a = bool_or();
        let mut k = canonical_assignment(&c);
        let (x, y) = (HalfArrow { value: 0, endpoint: 0 }, HalfArrow { value: 1, endpoint: 1 });
        k.halves.insert(y, BTreeSet::from([0]));
        let v = verify_division(&c, &a, &k).unwrap();
        assert!(v.iter().any(|v| v.clause == Clause::Act), "{v:?}");
        let mut k = canonical_assignment(&c);
        k.halves.remove(&x);
        assert!(matches!(verify_division(&c, &a, &k), Err(DerivedError::Partial(_))));
        let mut k = canonical_assignment(&c);
        k.halves.insert(x, BTreeSet::new());
        assert!(matches!(verify_division(&c, &a, &k), Err(DerivedError::EmptySet(_))));
    }

    #[test]
    fn wreath_over_its_right_factor_is_locally_distributive() {
        let b = bool_or();
        let right = LetterMap::from_pairs(&[("a", 1), ("b", 1), ("c", 2)]);
        let mut g = crate::wreath::GTable::new();
        g.set(Label::new("b").unwrap(), 0, 2);
        let w = crate::wreath::wreath_generated(&b, &b, &right, &g, 10_000).unwrap();
        let c = wreath_category(&w.wreath).unwrap();
        assert!(c.objects().len() > 1);
        assert!(c.is_locally_distributive());
    }

    #[test]
    fn values_depend_on_path_sets() {
        let c = diagonal();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen: BTreeMap<crate::forest::PathSet, HalfArrow> = BTreeMap::new();
        for _ in 0..300 {
            let d = random_diagram(&c, &mut rng, 3, 3);
            let v = diagram_val(&c, &d).unwrap();
            assert_eq!(*seen.entry(crate::forest::paths(&d)).or_insert(v), v);
        }
    }

    #[test]
    fn search_finds_divisions() {
        let c = diagonal();
        let a = bool_or();
        let SearchOutcome::Found(k) = search_division(&c, &a, 10_000) else { panic!("no division") };
        assert!(verify_division(&c, &a, &k).unwrap().is_empty());
        assert_eq!(search_division(&c, &a, 0), SearchOutcome::BudgetExhausted);
        let fx = fixtures::chain3();
        let c = one_object_category(&fx.algebra, &fx.letters).unwrap();
        assert!(matches!(search_division(&c, &fx.algebra, 100_000), SearchOutcome::Found(_)));
    }
}
