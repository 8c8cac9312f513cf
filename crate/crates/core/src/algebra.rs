//! Finite forest algebras as dense operation tables.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::forest::{Alphabet, Context, Forest, Label, Tree};

/// Index of an element of the horizontal monoid.
pub type HElem = usize;
/// Index of an element of the vertical monoid.
pub type VElem = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("malformed tables: {0}")]
    Malformed(String),
    #[error("horizontal precondition fails: {0}")]
    NotHorizontal(HorizontalFailure),
    #[error("label `{0}` is not in the letter map")]
    UnknownLetter(Label),
    #[error("quotient by action rows is not a congruence at ({0}, {1})")]
    Congruence(VElem, VElem),
    #[error("size cap exceeded: {what} would need {needed}, cap is {cap}")]
    Cap { what: &'static str, needed: usize, cap: usize },
}

/// A finite forest algebra `(H, V)` given by its tables.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteForestAlgebra {
    h_size: usize,
    v_size: usize,
    add: Vec<HElem>,
    mul: Vec<VElem>,
    act: Vec<HElem>,
    ins: Vec<VElem>,
    zero: HElem,
    one: VElem,
    h_names: BTreeMap<HElem, String>,
    v_names: BTreeMap<VElem, String>,
}

impl fmt::Debug for FiniteForestAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteForestAlgebra(|H|={}, |V|={})", self.h_size, self.v_size)
    }
}

/// Raw tables, row-major: `add[i][j]`, `mul[v][w]`, `act[v][h]`, `ins[h]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tables {
    pub add: Vec<Vec<HElem>>,
    pub mul: Vec<Vec<VElem>>,
    pub act: Vec<Vec<HElem>>,
    pub ins: Vec<VElem>,
    pub zero: HElem,
    pub one: VElem,
}

impl FiniteForestAlgebra {
    /// Checks shapes and index ranges; axioms are checked by [`validate_algebra`].
    pub fn from_tables(t: Tables) -> Result<Self, AlgebraError> {
        let m = t.add.len();
        let n = t.mul.len();
        let bad = |msg: String| Err(AlgebraError::Malformed(msg));
        if m == 0 || n == 0 {
            return bad("H and V must be nonempty".into());
        }
        if t.zero >= m {
            return bad(format!("ZERO {} out of range", t.zero));
        }
        if t.one >= n {
            return bad(format!("ONE {} out of range", t.one));
        }
        for (i, row) in t.add.iter().enumerate() {
            if row.len() != m {
                return bad(format!("ADDROW {i} has {} entries, expected {m}", row.len()));
            }
            if let Some(x) = row.iter().find(|&&x| x >= m) {
                return bad(format!("ADDROW {i} entry {x} out of range"));
            }
        }
        for (i, row) in t.mul.iter().enumerate() {
            if row.len() != n {
                return bad(format!("MULROW {i} has {} entries, expected {n}", row.len()));
            }
            if let Some(x) = row.iter().find(|&&x| x >= n) {
                return bad(format!("MULROW {i} entry {x} out of range"));
            }
        }
        if t.act.len() != n {
            return bad(format!("{} ACTROW lines, expected {n}", t.act.len()));
        }
        for (i, row) in t.act.iter().enumerate() {
            if row.len() != m {
                return bad(format!("ACTROW {i} has {} entries, expected {m}", row.len()));
            }
            if let Some(x) = row.iter().find(|&&x| x >= m) {
                return bad(format!("ACTROW {i} entry {x} out of range"));
            }
        }
        if t.ins.len() != m {
            return bad(format!("{} INS entries, expected {m}", t.ins.len()));
        }
        if let Some(x) = t.ins.iter().find(|&&x| x >= n) {
            return bad(format!("INS entry {x} out of range"));
        }
        Ok(FiniteForestAlgebra {
            h_size: m,
            v_size: n,
            add: t.add.concat(),
            mul: t.mul.concat(),
            act: t.act.concat(),
            ins: t.ins,
            zero: t.zero,
            one: t.one,
            h_names: BTreeMap::new(),
            v_names: BTreeMap::new(),
        })
    }

    pub fn tables(&self) -> Tables {
        Tables {
            add: self.add.chunks(self.h_size).map(<[_]>::to_vec).collect(),
            mul: self.mul.chunks(self.v_size).map(<[_]>::to_vec).collect(),
            act: self.act.chunks(self.h_size).map(<[_]>::to_vec).collect(),
            ins: self.ins.clone(),
            zero: self.zero,
            one: self.one,
        }
    }

    pub fn h_size(&self) -> usize {
        self.h_size
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    pub fn zero(&self) -> HElem {
        self.zero
    }

    pub fn one(&self) -> VElem {
        self.one
    }

    pub fn add(&self, a: HElem, b: HElem) -> HElem {
        self.add[a * self.h_size + b]
    }

    /// The product `vw`, acting as `w` first and then `v`.
    pub fn mul(&self, v: VElem, w: VElem) -> VElem {
        self.mul[v * self.v_size + w]
    }

    pub fn act(&self, v: VElem, h: HElem) -> HElem {
        self.act[v * self.h_size + h]
    }

    pub fn ins(&self, h: HElem) -> VElem {
        self.ins[h]
    }

    pub fn act_row(&self, v: VElem) -> &[HElem] {
        &self.act[v * self.h_size..(v + 1) * self.h_size]
    }

    /// Sum of a set of elements; the empty sum is `0`.
    pub fn sum<I: IntoIterator<Item = HElem>>(&self, items: I) -> HElem {
        items.into_iter().fold(self.zero, |acc, h| self.add(acc, h))
    }

    /// Sum of the elements in a bit mask over H.
    pub fn sum_mask(&self, mask: u64) -> HElem {
        let mut acc = self.zero;
        let mut m = mask;
        while m != 0 {
            let h = m.trailing_zeros() as usize;
            acc = self.add(acc, h);
            m &= m - 1;
        }
        acc
    }

    pub fn h_name(&self, h: HElem) -> String {
        self.h_names.get(&h).cloned().unwrap_or_else(|| h.to_string())
    }

    pub fn v_name(&self, v: VElem) -> String {
        self.v_names.get(&v).cloned().unwrap_or_else(|| v.to_string())
    }

    pub fn h_names(&self) -> &BTreeMap<HElem, String> {
        &self.h_names
    }

    pub fn v_names(&self) -> &BTreeMap<VElem, String> {
        &self.v_names
    }

    pub fn set_h_name(&mut self, h: HElem, name: impl Into<String>) {
        self.h_names.insert(h, name.into());
    }

    pub fn set_v_name(&mut self, v: VElem, name: impl Into<String>) {
        self.v_names.insert(v, name.into());
    }

    pub fn with_names(mut self, h: &[&str], v: &[&str]) -> Self {
        for (i, n) in h.iter().enumerate() {
            self.set_h_name(i, *n);
        }
        for (i, n) in v.iter().enumerate() {
            self.set_v_name(i, *n);
        }
        self
    }

    /// Renames elements: `hmap[old] = new`, `vmap[old] = new`.
    pub fn permuted(&self, hmap: &[HElem], vmap: &[VElem]) -> Self {
        let (m, n) = (self.h_size, self.v_size);
        let mut hinv = vec![0; m];
        for (old, &new) in hmap.iter().enumerate() {
            hinv[new] = old;
        }
        let mut vinv = vec![0; n];
        for (old, &new) in vmap.iter().enumerate() {
            vinv[new] = old;
        }
        let t = Tables {
            add: (0..m)
                .map(|a| (0..m).map(|b| hmap[self.add(hinv[a], hinv[b])]).collect())
                .collect(),
            mul: (0..n)
                .map(|v| (0..n).map(|w| vmap[self.mul(vinv[v], vinv[w])]).collect())
                .collect(),
            act: (0..n)
                .map(|v| (0..m).map(|h| hmap[self.act(vinv[v], hinv[h])]).collect())
                .collect(),
            ins: (0..m).map(|h| vmap[self.ins(hinv[h])]).collect(),
            zero: hmap[self.zero],
            one: vmap[self.one],
        };
        let mut out = FiniteForestAlgebra::from_tables(t).expect("permutation keeps shapes");
        for (&h, name) in &self.h_names {
            out.h_names.insert(hmap[h], name.clone());
        }
        for (&v, name) in &self.v_names {
            out.v_names.insert(vmap[v], name.clone());
        }
        out
    }

    /// The same algebra with `0_H` and `1_V` moved to index 0.
    pub fn normalized(&self) -> Self {
        if self.zero == 0 && self.one == 0 {
            return self.clone();
        }
        let swap = |size: usize, x: usize| -> Vec<usize> {
            (0..size).map(|i| if i == x { 0 } else if i == 0 { x } else { i }).collect()
        };
        self.permuted(&swap(self.h_size, self.zero), &swap(self.v_size, self.one))
    }

    /// Builds an algebra from a commutative monoid table on H and a set of
    /// generating transformations of H. V is the monoid of transformations
    /// generated by the generators together with all `I_h = h + _`, so the
    /// action is faithful and every `h = I_h · 0`. Index 0 of V is the identity;
    /// the returned vector gives the V-index of each generator.
    pub fn from_transformations(
        add: Vec<Vec<HElem>>,
        zero: HElem,
        generators: &[Vec<HElem>],
    ) -> Result<(Self, Vec<VElem>), AlgebraError> {
        let m = add.len();
        if generators.iter().any(|g| g.len() != m || g.iter().any(|&x| x >= m)) {
            return Err(AlgebraError::Malformed("generator of the wrong shape".into()));
        }
        let ident: Vec<HElem> = (0..m).collect();
        let mut elems: Vec<Vec<HElem>> = vec![ident];
        let mut index: HashMap<Vec<HElem>, VElem> = HashMap::new();
        index.insert(elems[0].clone(), 0);
        let mut gens: Vec<Vec<HElem>> = generators.to_vec();
        gens.extend((0..m).map(|h| add[h].clone()));
        let mut queue = VecDeque::new();
        let mut intern = |f: Vec<HElem>, elems: &mut Vec<Vec<HElem>>, queue: &mut VecDeque<VElem>| {
            if let Some(&i) = index.get(&f) {
                return i;
            }
            let i = elems.len();
            index.insert(f.clone(), i);
            elems.push(f);
            queue.push_back(i);
            i
        };
        let gen_idx: Vec<VElem> =
            generators.iter().map(|g| intern(g.clone(), &mut elems, &mut queue)).collect();
        for row in add.iter().take(m) {
            intern(row.clone(), &mut elems, &mut queue);
        }
        queue.push_back(0);
        while let Some(i) = queue.pop_front() {
            for g in &gens {
                // (i ∘ g) and (g ∘ i)
                let left: Vec<HElem> = (0..m).map(|h| elems[i][g[h]]).collect();
                let right: Vec<HElem> = (0..m).map(|h| g[elems[i][h]]).collect();
                intern(left, &mut elems, &mut queue);
                intern(right, &mut elems, &mut queue);
            }
        }
        let n = elems.len();
        let lookup: HashMap<&Vec<HElem>, VElem> = elems.iter().enumerate().map(|(i, f)| (f, i)).collect();
        let mul = (0..n)
            .map(|v| {
                (0..n)
                    .map(|w| {
                        let f: Vec<HElem> = (0..m).map(|h| elems[v][elems[w][h]]).collect();
                        lookup[&f]
                    })
                    .collect()
            })
            .collect();
        let t = Tables {
            ins: (0..m).map(|h| lookup[&add[h]]).collect(),
            act: elems.clone(),
            add,
            mul,
            zero,
            one: 0,
        };
        Ok((FiniteForestAlgebra::from_tables(t)?, gen_idx))
    }
}

/// The axioms of a forest algebra, in checking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    HorizontalMonoid,
    VerticalMonoid,
    UnitalAction,
    ActionLaw,
    Faithful,
    Insertion,
    Generation,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::HorizontalMonoid,
        Axiom::VerticalMonoid,
        Axiom::UnitalAction,
        Axiom::ActionLaw,
        Axiom::Faithful,
        Axiom::Insertion,
        Axiom::Generation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::HorizontalMonoid => "horizontal-monoid",
            Axiom::VerticalMonoid => "vertical-monoid",
            Axiom::UnitalAction => "unital-action",
            Axiom::ActionLaw => "action-law",
            Axiom::Faithful => "faithful",
            Axiom::Insertion => "insertion",
            Axiom::Generation => "generation",
        }
    }
}

/// A concrete violation, re-checkable against the tables with [`Witness::holds`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    HIdentity { h: HElem },
    HAssoc { a: HElem, b: HElem, c: HElem },
    VIdentity { v: VElem },
    VAssoc { a: VElem, b: VElem, c: VElem },
    UnitAction { h: HElem },
    ActionLaw { v: VElem, w: VElem, h: HElem },
    Faithful { v: VElem, w: VElem },
    Insertion { h: HElem, g: HElem },
    Generation { h: HElem },
}

impl Witness {
    /// True when the witness really violates its axiom in `a`.
    pub fn holds(&self, a: &FiniteForestAlgebra) -> bool {
        match *self {
            Witness::HIdentity { h } => a.add(a.zero, h) != h || a.add(h, a.zero) != h,
            Witness::HAssoc { a: x, b, c } => a.add(a.add(x, b), c) != a.add(x, a.add(b, c)),
            Witness::VIdentity { v } => a.mul(a.one, v) != v || a.mul(v, a.one) != v,
            Witness::VAssoc { a: x, b, c } => a.mul(a.mul(x, b), c) != a.mul(x, a.mul(b, c)),
            Witness::UnitAction { h } => a.act(a.one, h) != h,
            Witness::ActionLaw { v, w, h } => a.act(v, a.act(w, h)) != a.act(a.mul(v, w), h),
            Witness::Faithful { v, w } => v != w && a.act_row(v) == a.act_row(w),
            Witness::Insertion { h, g } => a.act(a.ins(h), g) != a.add(h, g),
            Witness::Generation { h } => (0..a.v_size).all(|v| a.act(v, a.zero) != h),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::HIdentity { h } => write!(f, "0+h or h+0 differs from h at h={h}"),
            Witness::HAssoc { a, b, c } => write!(f, "(a+b)+c != a+(b+c) at a={a} b={b} c={c}"),
            Witness::VIdentity { v } => write!(f, "1v or v1 differs from v at v={v}"),
            Witness::VAssoc { a, b, c } => write!(f, "(ab)c != a(bc) at a={a} b={b} c={c}"),
            Witness::UnitAction { h } => write!(f, "1h != h at h={h}"),
            Witness::ActionLaw { v, w, h } => write!(f, "v(wh) != (vw)h at v={v} w={w} h={h}"),
            Witness::Faithful { v, w } => write!(f, "v={v} and w={w} have equal action rows"),
            Witness::Insertion { h, g } => write!(f, "I_h g != h+g at h={h} g={g}"),
            Witness::Generation { h } => write!(f, "h={h} is not v0 for any v"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub results: Vec<(Axiom, Option<Witness>)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.results.iter().all(|(_, w)| w.is_none())
    }

    pub fn failure(&self, axiom: Axiom) -> Option<&Witness> {
        self.results.iter().find(|(a, _)| *a == axiom).and_then(|(_, w)| w.as_ref())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (axiom, w) in &self.results {
            match w {
                None => writeln!(f, "{:<18} pass", axiom.name())?,
                Some(w) => writeln!(f, "{:<18} FAIL  {w}", axiom.name())?,
            }
        }
        Ok(())
    }
}

/// Checks every axiom exhaustively, reporting the first violation of each.
pub fn validate_algebra(a: &FiniteForestAlgebra) -> ValidationReport {
    let hs = 0..a.h_size;
    let vs = 0..a.v_size;
    let h_mon = hs
        .clone()
        .map(|h| Witness::HIdentity { h })
        .chain(triples(a.h_size).map(|(x, b, c)| Witness::HAssoc { a: x, b, c }))
        .find(|w| w.holds(a));
    let v_mon = vs
        .clone()
        .map(|v| Witness::VIdentity { v })
        .chain(triples(a.v_size).map(|(x, b, c)| Witness::VAssoc { a: x, b, c }))
        .find(|w| w.holds(a));
    let unit = hs.clone().map(|h| Witness::UnitAction { h }).find(|w| w.holds(a));
    let (m, n) = (a.h_size, a.v_size);
    let law = (0..n)
        .flat_map(|v| (0..n).flat_map(move |w| (0..m).map(move |h| (v, w, h))))
        .map(|(v, w, h)| Witness::ActionLaw { v, w, h })
        .find(|w| w.holds(a));
    let mut seen: HashMap<&[HElem], VElem> = HashMap::new();
    let mut faithful = None;
    for v in vs.clone() {
        if let Some(&w) = seen.get(a.act_row(v)) {
            faithful = Some(Witness::Faithful { v: w, w: v });
            break;
        }
        seen.insert(a.act_row(v), v);
    }
    let insertion = (0..m)
        .flat_map(|h| (0..m).map(move |g| Witness::Insertion { h, g }))
        .find(|w| w.holds(a));
    let generation = hs.clone().map(|h| Witness::Generation { h }).find(|w| w.holds(a));
    ValidationReport {
        results: vec![
            (Axiom::HorizontalMonoid, h_mon),
            (Axiom::VerticalMonoid, v_mon),
            (Axiom::UnitalAction, unit),
            (Axiom::ActionLaw, law),
            (Axiom::Faithful, faithful),
            (Axiom::Insertion, insertion),
            (Axiom::Generation, generation),
        ],
    }
}

fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |a| (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c))))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HorizontalFailure {
    Idempotency { h: HElem },
    Commutativity { a: HElem, b: HElem },
}

impl fmt::Display for HorizontalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizontalFailure::Idempotency { h } => write!(f, "h+h != h at h={h}"),
            HorizontalFailure::Commutativity { a, b } => write!(f, "a+b != b+a at a={a} b={b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizontalVerdict {
    pub idempotent: Option<HElem>,
    pub commutative: Option<(HElem, HElem)>,
}

impl HorizontalVerdict {
    pub fn holds(&self) -> bool {
        self.idempotent.is_none() && self.commutative.is_none()
    }

    pub fn failure(&self) -> Option<HorizontalFailure> {
        if let Some(h) = self.idempotent {
            return Some(HorizontalFailure::Idempotency { h });
        }
        self.commutative.map(|(a, b)| HorizontalFailure::Commutativity { a, b })
    }
}

pub fn check_horizontal(a: &FiniteForestAlgebra) -> HorizontalVerdict {
    let n = a.h_size;
    HorizontalVerdict {
        idempotent: (0..n).find(|&h| a.add(h, h) != h),
        commutative: (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .find(|&(x, y)| a.add(x, y) != a.add(y, x)),
    }
}

/// Exhaustive check of `v(h1+h2) = vh1 + vh2`; returns the first violation.
pub fn is_distributive(
    a: &FiniteForestAlgebra,
) -> Result<Option<(VElem, HElem, HElem)>, AlgebraError> {
    if let Some(fail) = check_horizontal(a).failure() {
        return Err(AlgebraError::NotHorizontal(fail));
    }
    for v in 0..a.v_size {
        for h1 in 0..a.h_size {
            for h2 in 0..a.h_size {
                if a.act(v, a.add(h1, h2)) != a.add(a.act(v, h1), a.act(v, h2)) {
                    return Ok(Some((v, h1, h2)));
                }
            }
        }
    }
    Ok(None)
}

/// An assignment of a V element to each letter.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LetterMap {
    map: BTreeMap<Label, VElem>,
}

impl LetterMap {
    pub fn new(map: BTreeMap<Label, VElem>) -> Self {
        LetterMap { map }
    }

    pub fn from_pairs(pairs: &[(&str, VElem)]) -> Self {
        LetterMap {
            map: pairs.iter().map(|(l, v)| (Label::new(l).expect("valid label"), *v)).collect(),
        }
    }

    pub fn get(&self, l: &Label) -> Option<VElem> {
        self.map.get(l).copied()
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.map.keys().cloned())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, VElem)> {
        self.map.iter().map(|(l, &v)| (l, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.map.keys().cloned().collect()
    }

    pub fn images(&self) -> Vec<VElem> {
        self.map.values().copied().collect()
    }

    pub fn map_values(&self, f: impl Fn(VElem) -> VElem) -> LetterMap {
        LetterMap { map: self.map.iter().map(|(l, &v)| (l.clone(), f(v))).collect() }
    }
}

fn letter(a: &LetterMap, l: &Label) -> Result<VElem, AlgebraError> {
    a.get(l).ok_or_else(|| AlgebraError::UnknownLetter(l.clone()))
}

/// The value of a forest under the morphism induced by `lm`.
pub fn eval_forest(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    f: &Forest,
) -> Result<HElem, AlgebraError> {
    let mut acc = a.zero;
    for t in f.trees() {
        acc = a.add(acc, eval_tree(a, lm, t)?);
    }
    Ok(acc)
}

pub fn eval_tree(a: &FiniteForestAlgebra, lm: &LetterMap, t: &Tree) -> Result<HElem, AlgebraError> {
    Ok(a.act(letter(lm, t.label())?, eval_forest(a, lm, t.children())?))
}

/// The value of a context under the morphism induced by `lm`.
pub fn eval_context(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
    c: &Context,
) -> Result<VElem, AlgebraError> {
    match c {
        Context::Hole => Ok(a.one),
        Context::Node { siblings, label, inner } => {
            let s = eval_forest(a, lm, siblings)?;
            let v = a.mul(letter(lm, label)?, eval_context(a, lm, inner)?);
            Ok(a.mul(a.ins(s), v))
        }
    }
}

/// Componentwise product, passed through [`faithful_quotient`].
pub fn direct_product(a: &FiniteForestAlgebra, b: &FiniteForestAlgebra) -> FiniteForestAlgebra {
    let (am, bm, an, bn) = (a.h_size, b.h_size, a.v_size, b.v_size);
    let h = |x: HElem, y: HElem| x * bm + y;
    let v = |x: VElem, y: VElem| x * bn + y;
    let pairs_h: Vec<(HElem, HElem)> = (0..am).flat_map(|x| (0..bm).map(move |y| (x, y))).collect();
    let pairs_v: Vec<(VElem, VElem)> = (0..an).flat_map(|x| (0..bn).map(move |y| (x, y))).collect();
    let t = Tables {
        add: pairs_h
            .iter()
            .map(|&(x1, y1)| pairs_h.iter().map(|&(x2, y2)| h(a.add(x1, x2), b.add(y1, y2))).collect())
            .collect(),
        mul: pairs_v
            .iter()
            .map(|&(x1, y1)| pairs_v.iter().map(|&(x2, y2)| v(a.mul(x1, x2), b.mul(y1, y2))).collect())
            .collect(),
        act: pairs_v
            .iter()
            .map(|&(x1, y1)| pairs_h.iter().map(|&(x2, y2)| h(a.act(x1, x2), b.act(y1, y2))).collect())
            .collect(),
        ins: pairs_h.iter().map(|&(x, y)| v(a.ins(x), b.ins(y))).collect(),
        zero: h(a.zero, b.zero),
        one: v(a.one, b.one),
    };
    let prod = FiniteForestAlgebra::from_tables(t).expect("product tables are well formed");
    faithful_quotient(&prod).expect("action rows give a congruence").0
}

/// Merges V elements with equal action rows. Returns the quotient and the class
/// of every original V element. Classes keep the order of their first member.
pub fn faithful_quotient(
    a: &FiniteForestAlgebra,
) -> Result<(FiniteForestAlgebra, Vec<VElem>), AlgebraError> {
    let mut class_of = vec![0; a.v_size];
    let mut reps: Vec<VElem> = Vec::new();
    let mut by_row: HashMap<&[HElem], VElem> = HashMap::new();
    for (v, class) in class_of.iter_mut().enumerate() {
        *class = *by_row.entry(a.act_row(v)).or_insert_with(|| {
            reps.push(v);
            reps.len() - 1
        });
    }
    for v in 0..a.v_size {
        for w in 0..a.v_size {
            if class_of[a.mul(v, w)] != class_of[a.mul(reps[class_of[v]], reps[class_of[w]])] {
                return Err(AlgebraError::Congruence(v, w));
            }
        }
    }
    if reps.len() == a.v_size {
        return Ok((a.clone(), class_of));
    }
    let t = Tables {
        add: a.tables().add,
        mul: reps.iter().map(|&v| reps.iter().map(|&w| class_of[a.mul(v, w)]).collect()).collect(),
        act: reps.iter().map(|&v| a.act_row(v).to_vec()).collect(),
        ins: (0..a.h_size).map(|h| class_of[a.ins(h)]).collect(),
        zero: a.zero,
        one: class_of[a.one],
    };
    let mut out = FiniteForestAlgebra::from_tables(t)?;
    out.h_names = a.h_names.clone();
    for (c, &v) in reps.iter().enumerate() {
        if let Some(n) = a.v_names.get(&v) {
            out.v_names.insert(c, n.clone());
        }
    }
    Ok((out, class_of))
}

/// The subalgebra generated by a letter map, re-indexed and made faithful.
#[derive(Clone, Debug)]
pub struct Subalgebra {
    pub algebra: FiniteForestAlgebra,
    /// The letter map into the subalgebra.
    pub letters: LetterMap,
    /// Original index of each new H element.
    pub h_origin: Vec<HElem>,
    /// Original index of a representative of each new V element.
    pub v_origin: Vec<VElem>,
    /// New index of each original generated V element.
    pub v_class: BTreeMap<VElem, VElem>,
}

impl Subalgebra {
    pub fn h_index(&self, old: HElem) -> Option<HElem> {
        self.h_origin.iter().position(|&h| h == old)
    }
}

/// Least sub-tables containing `0`, `1`, every letter value, closed under all
/// operations and under `I`.
pub fn generated_subalgebra(a: &FiniteForestAlgebra, lm: &LetterMap) -> Subalgebra {
    let mut hs = vec![false; a.h_size];
    let mut vs = vec![false; a.v_size];
    hs[a.zero] = true;
    vs[a.one] = true;
    for v in lm.images() {
        vs[v] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        let hl: Vec<HElem> = (0..a.h_size).filter(|&h| hs[h]).collect();
        let vl: Vec<VElem> = (0..a.v_size).filter(|&v| vs[v]).collect();
        let mut mark_h = |h: HElem, changed: &mut bool| {
            if !hs[h] {
                hs[h] = true;
                *changed = true;
            }
        };
        for &x in &hl {
            for &y in &hl {
                mark_h(a.add(x, y), &mut changed);
            }
        }
        for &v in &vl {
            for &h in &hl {
                mark_h(a.act(v, h), &mut changed);
            }
        }
        let mut mark_v = |v: VElem, changed: &mut bool| {
            if !vs[v] {
                vs[v] = true;
                *changed = true;
            }
        };
        for &h in &hl {
            mark_v(a.ins(h), &mut changed);
        }
        for &v in &vl {
            for &w in &vl {
                mark_v(a.mul(v, w), &mut changed);
            }
        }
    }
    let mut h_origin = vec![a.zero];
    h_origin.extend((0..a.h_size).filter(|&h| hs[h] && h != a.zero));
    let mut v_list = vec![a.one];
    v_list.extend((0..a.v_size).filter(|&v| vs[v] && v != a.one));
    let h_new: HashMap<HElem, HElem> = h_origin.iter().enumerate().map(|(i, &h)| (h, i)).collect();
    let v_new: HashMap<VElem, VElem> = v_list.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let t = Tables {
        add: h_origin
            .iter()
            .map(|&x| h_origin.iter().map(|&y| h_new[&a.add(x, y)]).collect())
            .collect(),
        mul: v_list.iter().map(|&v| v_list.iter().map(|&w| v_new[&a.mul(v, w)]).collect()).collect(),
        act: v_list.iter().map(|&v| h_origin.iter().map(|&h| h_new[&a.act(v, h)]).collect()).collect(),
        ins: h_origin.iter().map(|&h| v_new[&a.ins(h)]).collect(),
        zero: 0,
        one: 0,
    };
    let mut sub = FiniteForestAlgebra::from_tables(t).expect("closed sub-tables");
    for (i, &h) in h_origin.iter().enumerate() {
        if let Some(n) = a.h_names.get(&h) {
            sub.h_names.insert(i, n.clone());
        }
    }
    for (i, &v) in v_list.iter().enumerate() {
        if let Some(n) = a.v_names.get(&v) {
            sub.v_names.insert(i, n.clone());
        }
    }
    let (q, class_of) = faithful_quotient(&sub).expect("action rows give a congruence");
    let mut v_origin = vec![usize::MAX; q.v_size];
    let mut v_class = BTreeMap::new();
    for (i, &v) in v_list.iter().enumerate() {
        let c = class_of[i];
        if v_origin[c] == usize::MAX {
            v_origin[c] = v;
        }
        v_class.insert(v, c);
    }
    let letters = lm.map_values(|v| v_class[&v]);
    Subalgebra { algebra: q, letters, h_origin, v_origin, v_class }
}

/// The set of values of forests: least set containing `0`, closed under `+` and
/// under every letter.
pub fn forest_values(a: &FiniteForestAlgebra, lm: &LetterMap) -> BTreeSet<HElem> {
    let mut vals = BTreeSet::from([a.zero]);
    loop {
        let mut next = vals.clone();
        for &x in &vals {
            for &y in &vals {
                next.insert(a.add(x, y));
            }
            for v in lm.images() {
                next.insert(a.act(v, x));
            }
        }
        if next.len() == vals.len() {
            return vals;
        }
        vals = next;
    }
}

/// A witness forest for each forest value, smallest first.
pub fn value_witnesses(a: &FiniteForestAlgebra, lm: &LetterMap) -> BTreeMap<HElem, Forest> {
    let mut out: BTreeMap<HElem, Forest> = BTreeMap::from([(a.zero, Forest::empty())]);
    loop {
        let mut grown = false;
        let snapshot: Vec<(HElem, Forest)> = out.iter().map(|(&h, f)| (h, f.clone())).collect();
        for (h, f) in &snapshot {
            for (l, v) in lm.iter() {
                let g = a.act(v, *h);
                if let std::collections::btree_map::Entry::Vacant(e) = out.entry(g) {
                    e.insert(Forest::single(Tree::new(l.clone(), f.clone())));
                    grown = true;
                }
            }
        }
        for (h1, f1) in &snapshot {
            for (h2, f2) in &snapshot {
                let g = a.add(*h1, *h2);
                if let std::collections::btree_map::Entry::Vacant(e) = out.entry(g) {
                    e.insert(f1.sum(f2));
                    grown = true;
                }
            }
        }
        if !grown {
            return out;
        }
    }
}

/// One bottom-up evaluation step `(h0, α, K)` with `h0 = ℓ(α)·ΣK`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub result: HElem,
    pub label: Label,
    pub children: BTreeSet<HElem>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kids: Vec<String> = self.children.iter().map(|k| k.to_string()).collect();
        write!(f, "({}, {}, {{{}}})", self.result, self.label, kids.join(","))
    }
}

/// Every rule, for every letter and every subset of H.
pub fn enumerate_rules(
    a: &FiniteForestAlgebra,
    lm: &LetterMap,
) -> Result<BTreeSet<Rule>, AlgebraError> {
    const CAP: usize = 20;
    if a.h_size > CAP {
        return Err(AlgebraError::Cap { what: "rule enumeration |H|", needed: a.h_size, cap: CAP });
    }
    let mut out = BTreeSet::new();
    for (l, v) in lm.iter() {
        for mask in 0u64..(1 << a.h_size) {
            let children: BTreeSet<HElem> = (0..a.h_size).filter(|&h| mask >> h & 1 == 1).collect();
            out.insert(Rule { result: a.act(v, a.sum_mask(mask)), label: l.clone(), children });
        }
    }
    Ok(out)
}

/// True when each rule's result is among the children of its predecessor.
pub fn is_trace(seq: &[Rule]) -> bool {
    seq.windows(2).all(|w| w[0].children.contains(&w[1].result))
}

/// Searches for an isomorphism `a → b`, returning the H and V maps.
pub fn find_isomorphism(
    a: &FiniteForestAlgebra,
    b: &FiniteForestAlgebra,
    budget: usize,
) -> Option<(Vec<HElem>, Vec<VElem>)> {
    if a.h_size != b.h_size || a.v_size != b.v_size {
        return None;
    }
    let m = a.h_size;
    let mut hmap = vec![usize::MAX; m];
    let mut used = vec![false; m];
    hmap[a.zero] = b.zero;
    used[b.zero] = true;
    let order: Vec<HElem> = std::iter::once(a.zero).chain((0..m).filter(|&h| h != a.zero)).collect();
    let b_rows: HashMap<&[HElem], VElem> = (0..b.v_size).map(|w| (b.act_row(w), w)).collect();
    let mut steps = 0;
    let mut result = None;
    iso_search(a, b, &order, 1, &mut hmap, &mut used, &b_rows, &mut steps, budget, &mut result);
    result
}

#[allow(clippy::too_many_arguments)]
fn iso_search(
    a: &FiniteForestAlgebra,
    b: &FiniteForestAlgebra,
    order: &[HElem],
    depth: usize,
    hmap: &mut Vec<HElem>,
    used: &mut Vec<bool>,
    b_rows: &HashMap<&[HElem], VElem>,
    steps: &mut usize,
    budget: usize,
    result: &mut Option<(Vec<HElem>, Vec<VElem>)>,
) {
    if result.is_some() || *steps >= budget {
        return;
    }
    *steps += 1;
    let consistent = order[..depth].iter().all(|&x| {
        order[..depth].iter().all(|&y| {
            let s = a.add(x, y);
            hmap[s] == usize::MAX || hmap[s] == b.add(hmap[x], hmap[y])
        })
    });
    if !consistent {
        return;
    }
    if depth == order.len() {
        if let Some(vmap) = derive_vmap(a, b, hmap, b_rows) {
            *result = Some((hmap.clone(), vmap));
        }
        return;
    }
    let x = order[depth];
    for y in 0..b.h_size {
        if !used[y] {
            hmap[x] = y;
            used[y] = true;
            iso_search(a, b, order, depth + 1, hmap, used, b_rows, steps, budget, result);
            used[y] = false;
            hmap[x] = usize::MAX;
        }
    }
}

fn derive_vmap(
    a: &FiniteForestAlgebra,
    b: &FiniteForestAlgebra,
    hmap: &[HElem],
    b_rows: &HashMap<&[HElem], VElem>,
) -> Option<Vec<VElem>> {
    let mut vmap = Vec::with_capacity(a.v_size);
    for v in 0..a.v_size {
        let mut row = vec![0; a.h_size];
        for h in 0..a.h_size {
            row[hmap[h]] = hmap[a.act(v, h)];
        }
        vmap.push(*b_rows.get(row.as_slice())?);
    }
    let ok = (0..a.v_size).all(|v| (0..a.v_size).all(|w| vmap[a.mul(v, w)] == b.mul(vmap[v], vmap[w])))
        && (0..a.h_size).all(|h| vmap[a.ins(h)] == b.ins(hmap[h]))
        && vmap[a.one] == b.one;
    ok.then_some(vmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::forest::enumerate_forests;
    use proptest::prelude::*;

    fn bool_or() -> FiniteForestAlgebra {
        fixtures::bool_or()
    }

    #[test]
    fn bool_or_validates() {
        let a = bool_or();
        let r = validate_algebra(&a);
        assert!(r.is_valid(), "{r}");
        assert_eq!((a.h_size(), a.v_size()), (2, 3));
    }

    #[test]
    fn faithfulness_violation() {
        let mut t = bool_or().tables();
        // copy c0's row onto c1
        t.act[2] = t.act[1].clone();
        let a = FiniteForestAlgebra::from_tables(t).unwrap();
        let r = validate_algebra(&a);
        assert_eq!(r.failure(Axiom::Faithful), Some(&Witness::Faithful { v: 1, w: 2 }));
        assert!(r.failure(Axiom::Faithful).unwrap().holds(&a));
    }

    #[test]
    fn action_law_violation() {
        let mut t = bool_or().tables();
        t.mul[1][2] = 2;
        let a = FiniteForestAlgebra::from_tables(t).unwrap();
        let r = validate_algebra(&a);
        let w = r.failure(Axiom::ActionLaw).expect("action law breaks");
        assert!(w.holds(&a));
        assert!(matches!(w, Witness::ActionLaw { .. }));
    }

    #[test]
    fn malformed_tables_are_errors() {
        let mut t = bool_or().tables();
        t.act[0][1] = 7;
        assert!(matches!(FiniteForestAlgebra::from_tables(t), Err(AlgebraError::Malformed(_))));
        let mut t = bool_or().tables();
        t.ins.pop();
        assert!(FiniteForestAlgebra::from_tables(t).is_err());
    }

    #[test]
    fn horizontal_checks() {
        assert!(check_horizontal(&bool_or()).holds());
        assert!(check_horizontal(&fixtures::one()).holds());
        let z2 = fixtures::parity();
        let v = check_horizontal(&z2);
        assert_eq!(v.idempotent, Some(1));
        assert_eq!(v.commutative, None);
        assert!(matches!(is_distributive(&z2), Err(AlgebraError::NotHorizontal(_))));
    }

    #[test]
    fn eval_examples() {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2), ("b", 0)]);
        let alpha = lm.alphabet();
        let f = Forest::parse("b[a]", &alpha).unwrap();
        assert_eq!(eval_forest(&a, &lm, &f).unwrap(), 1);
        assert_eq!(eval_forest(&a, &lm, &Forest::empty()).unwrap(), a.zero());
        assert_eq!(eval_context(&a, &lm, &Context::Hole).unwrap(), a.one());
        let bad = Forest::parse_any("z").unwrap();
        assert!(matches!(eval_forest(&a, &lm, &bad), Err(AlgebraError::UnknownLetter(_))));
    }

    #[test]
    fn distributivity_examples() {
        assert_eq!(is_distributive(&bool_or()).unwrap(), None);
        assert_eq!(is_distributive(&fixtures::one()).unwrap(), None);
        let det = fixtures::sibling_pair();
        let (v, h1, h2) = is_distributive(&det.algebra).unwrap().expect("not distributive");
        assert_eq!((v, h1, h2), (det.letters.get(&Label::new("s").unwrap()).unwrap(), 1, 2));
    }

    #[test]
    fn products() {
        let a = bool_or();
        let p = direct_product(&a, &fixtures::one());
        assert_eq!((p.h_size(), p.v_size()), (2, 3));
        assert!(find_isomorphism(&p, &a, 10_000).is_some());
        let q = direct_product(&a, &a);
        assert_eq!(q.h_size(), 4);
        assert!(q.v_size() <= 9);
        assert_eq!(q.v_size(), 9);
        assert!(validate_algebra(&q).is_valid());
    }

    #[test]
    fn quotient_removes_duplicates() {
        let a = bool_or();
        let (same, _) = faithful_quotient(&a).unwrap();
        assert_eq!(same, a);
        let mut t = a.tables();
        // append a copy of c0 as element 3
        for row in t.mul.iter_mut() {
            let c = row[1];
            row.push(c);
        }
        let copy = t.mul[1].clone();
        t.mul.push(copy);
        t.act.push(t.act[1].clone());
        let dup = FiniteForestAlgebra::from_tables(t).unwrap();
        assert!(!validate_algebra(&dup).is_valid());
        let (q, class_of) = faithful_quotient(&dup).unwrap();
        assert_eq!(q.tables(), a.tables());
        assert_eq!(class_of, vec![0, 1, 2, 1]);
    }

    #[test]
    fn generated_examples() {
        let a = bool_or();
        let full = generated_subalgebra(&a, &LetterMap::from_pairs(&[("a", 0), ("b", 1), ("c", 2)]));
        assert_eq!(full.algebra, a);

        let idonly = generated_subalgebra(&a, &LetterMap::from_pairs(&[("a", 0)]));
        assert_eq!((idonly.algebra.h_size(), idonly.algebra.v_size()), (1, 1));
        assert_eq!(idonly.h_origin, vec![0]);

        let c1 = generated_subalgebra(&a, &LetterMap::from_pairs(&[("a", 2)]));
        assert_eq!(c1.h_origin, vec![0, 1]);
        // id, c1 from the letter, and nothing else: c0 is not generated
        assert_eq!(c1.v_origin, vec![0, 2]);
        assert!(validate_algebra(&c1.algebra).is_valid());
    }

    #[test]
    fn generated_h_matches_enumeration() {
        for fx in fixtures::builtin_algebras() {
            let sub = generated_subalgebra(&fx.algebra, &fx.letters);
            assert!(validate_algebra(&sub.algebra).is_valid(), "{}", fx.name);
            let alpha = fx.letters.alphabet();
            let nodes = if alpha.len() > 3 { 4 } else { 6 };
            let seen: BTreeSet<HElem> = enumerate_forests(&alpha, 4, nodes, 1_000_000)
                .unwrap()
                .iter()
                .map(|f| eval_forest(&fx.algebra, &fx.letters, f).unwrap())
                .collect();
            let gen: BTreeSet<HElem> = sub.h_origin.iter().copied().collect();
            assert_eq!(seen, gen, "{}", fx.name);
            assert_eq!(forest_values(&fx.algebra, &fx.letters), gen);
            for (h, w) in value_witnesses(&fx.algebra, &fx.letters) {
                assert_eq!(eval_forest(&fx.algebra, &fx.letters, &w).unwrap(), h);
            }
        }
    }

    #[test]
    fn rule_examples() {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2), ("b", 0)]);
        let rules = enumerate_rules(&a, &lm).unwrap();
        assert_eq!(rules.len(), 8);
        let r = |h, l: &str, k: &[usize]| Rule {
            result: h,
            label: Label::new(l).unwrap(),
            children: k.iter().copied().collect(),
        };
        for x in [r(1, "a", &[]), r(0, "b", &[]), r(1, "b", &[1]), r(1, "a", &[0, 1])] {
            assert!(rules.contains(&x), "{x}");
        }
        let one = fixtures::one();
        let rules = enumerate_rules(&one, &LetterMap::from_pairs(&[("a", 0)])).unwrap();
        assert_eq!(rules.into_iter().collect::<Vec<_>>(), vec![r(0, "a", &[]), r(0, "a", &[0])]);

        assert!(is_trace(&[r(1, "a", &[1]), r(1, "b", &[1])]));
        assert!(!is_trace(&[r(0, "b", &[0]), r(1, "a", &[0])]));
        assert!(is_trace(&[r(0, "b", &[0])]));
    }

    #[test]
    fn rules_cover_enumerated_trees() {
        let a = bool_or();
        let lm = LetterMap::from_pairs(&[("a", 2), ("b", 0), ("c", 1)]);
        let rules = enumerate_rules(&a, &lm).unwrap();
        for f in enumerate_forests(&lm.alphabet(), 3, 5, 100_000).unwrap() {
            for t in f.trees() {
                let kids = t.children().trees().map(|c| eval_tree(&a, &lm, c).unwrap()).collect();
                let rule =
                    Rule { result: eval_tree(&a, &lm, t).unwrap(), label: t.label().clone(), children: kids };
                assert!(rules.contains(&rule));
            }
        }
    }

    #[test]
    fn builder_is_valid() {
        for fx in fixtures::builtin_algebras() {
            let r = validate_algebra(&fx.algebra);
            assert!(r.is_valid(), "{}: {r}", fx.name);
        }
    }

    #[test]
    fn permutation_is_isomorphism() {
        let det = fixtures::sibling_pair().algebra;
        let n = det.v_size();
        let vmap: Vec<usize> = (0..n).map(|v| (v + 3) % n).collect();
        let p = det.permuted(&[2, 0, 3, 1], &vmap);
        assert!(validate_algebra(&p).is_valid());
        let (h, v) = find_isomorphism(&det, &p, 1_000_000).unwrap();
        assert_eq!(h[det.zero()], p.zero());
        assert_eq!(v.len(), n);
        assert_eq!(p.normalized().zero(), 0);
        assert_eq!(p.normalized().one(), 0);
        assert!(find_isomorphism(&det, &bool_or(), 1000).is_none());
    }

    fn arb_case() -> impl Strategy<Value = (Forest, Context, Forest)> {
        let f = crate::forest::tests::arb_forest(&["a", "b", "c"], 3);
        let c = proptest::collection::vec((crate::forest::tests::arb_forest(&["a", "b", "c"], 1), 0..3usize), 0..3)
            .prop_map(|spine| {
                spine.into_iter().rev().fold(Context::Hole, |inner, (sib, l)| Context::Node {
                    siblings: sib,
                    label: Label::new(["a", "b", "c"][l]).unwrap(),
                    inner: Box::new(inner),
                })
            });
        (f.clone(), c, f)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn morphism_laws((f, c, g) in arb_case(), which in 0..4usize) {
            let sp = fixtures::sibling_pair();
            let ch = fixtures::chain3();
            let s = |l: &str| sp.letters.get(&Label::new(l).unwrap()).unwrap();
            let fx = [
                (bool_or(), LetterMap::from_pairs(&[("a", 2), ("b", 0), ("c", 1)])),
                (sp.algebra.clone(), LetterMap::from_pairs(&[("a", s("a")), ("b", s("b")), ("c", s("s"))])),
                (fixtures::l1().algebra, fixtures::l1().letters),
                (ch.algebra.clone(), LetterMap::from_pairs(&[("a", ch.letter("a")), ("b", ch.letter("b")), ("c", 0)])),
            ];
            let (a, lm) = &fx[which];
            let ef = eval_forest(a, lm, &f).unwrap();
            let eg = eval_forest(a, lm, &g).unwrap();
            let ec = eval_context(a, lm, &c).unwrap();
            prop_assert_eq!(eval_forest(a, lm, &c.apply(&f)).unwrap(), a.act(ec, ef));
            prop_assert_eq!(eval_forest(a, lm, &f.sum(&g)).unwrap(), a.add(ef, eg));
            if let Context::Node { siblings, label, inner } = &c {
                let shifted = Context::Node { siblings: siblings.sum(&f), label: label.clone(), inner: inner.clone() };
                prop_assert_eq!(eval_context(a, lm, &shifted).unwrap(), a.mul(a.ins(ef), ec));
            }
        }
    }
}
