//! Wreath products `(H1 × H2, V1^H2 × V2)`, full and generated.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::algebra::{
    faithful_quotient, generated_subalgebra, AlgebraError, FiniteForestAlgebra, HElem, LetterMap,
    Tables, VElem,
};
use crate::forest::Label;

/// Default bound on |V| for the full product. The tables are quadratic in |V|.
pub const DEFAULT_WREATH_CAP: usize = 2048;

/// A wreath product (or a generated fragment of one) with provenance.
#[derive(Clone, Debug)]
pub struct WreathAlgebra {
    pub algebra: FiniteForestAlgebra,
    /// `(h1, h2)` for each H element, indices into the factors.
    pub h_pairs: Vec<(HElem, HElem)>,
    /// `(f, v2)` for each V element; `f[h2]` is an element of V1.
    pub v_pairs: Vec<(Vec<VElem>, VElem)>,
    /// Target of the right projection: the right factor, or its generated part.
    pub right: FiniteForestAlgebra,
    pub h_right: Vec<HElem>,
    pub v_right: Vec<VElem>,
}

fn pair_mul(
    a1: &FiniteForestAlgebra,
    a2: &FiniteForestAlgebra,
    (f, v): (&[VElem], VElem),
    (g, w): (&[VElem], VElem),
) -> (Vec<VElem>, VElem) {
    let row = (0..a2.h_size()).map(|h| a1.mul(f[a2.act(w, h)], g[h])).collect();
    (row, a2.mul(v, w))
}

fn pair_act(
    a1: &FiniteForestAlgebra,
    a2: &FiniteForestAlgebra,
    (f, v): (&[VElem], VElem),
    (h1, h2): (HElem, HElem),
) -> (HElem, HElem) {
    (a1.act(f[h2], h1), a2.act(v, h2))
}

fn pair_ins(
    a1: &FiniteForestAlgebra,
    a2: &FiniteForestAlgebra,
    (h1, h2): (HElem, HElem),
) -> (Vec<VElem>, VElem) {
    (vec![a1.ins(h1); a2.h_size()], a2.ins(h2))
}

/// The full wreath product. Both factors are normalized so that `0` and `1`
/// sit at index 0; element `(f, v)` has index `code(f)·|V2| + v`.
pub fn wreath_product(
    a1: &FiniteForestAlgebra,
    a2: &FiniteForestAlgebra,
    cap: usize,
) -> Result<WreathAlgebra, AlgebraError> {
    let a1 = a1.normalized();
    let a2 = a2.normalized();
    let (m1, m2, n1, n2) = (a1.h_size(), a2.h_size(), a1.v_size(), a2.v_size());
    let funcs = (0..m2).try_fold(1usize, |acc, _| acc.checked_mul(n1));
    let n = funcs.and_then(|f| f.checked_mul(n2)).filter(|&n| n <= cap).ok_or(AlgebraError::Cap {
        what: "wreath product |V|",
        needed: funcs.and_then(|f| f.checked_mul(n2)).unwrap_or(usize::MAX),
        cap,
    })?;
    let funcs = n / n2;
    let decode = |code: usize| -> Vec<VElem> {
        let mut c = code;
        (0..m2)
            .map(|_| {
                let d = c % n1;
                c /= n1;
                d
            })
            .collect()
    };
    let encode = |f: &[VElem]| -> usize { f.iter().rev().fold(0, |acc, &d| acc * n1 + d) };
    let v_pairs: Vec<(Vec<VElem>, VElem)> =
        (0..funcs).flat_map(|c| (0..n2).map(move |v| (c, v))).map(|(c, v)| (decode(c), v)).collect();
    let h_pairs: Vec<(HElem, HElem)> = (0..m1).flat_map(|x| (0..m2).map(move |y| (x, y))).collect();
    let hidx = |(x, y): (HElem, HElem)| x * m2 + y;
    let vidx = |(f, v): &(Vec<VElem>, VElem)| encode(f) * n2 + v;
    let t = Tables {
        add: h_pairs
            .iter()
            .map(|&(x1, y1)| h_pairs.iter().map(|&(x2, y2)| hidx((a1.add(x1, x2), a2.add(y1, y2)))).collect())
            .collect(),
        mul: v_pairs
            .iter()
            .map(|(f, v)| {
                v_pairs
                    .iter()
                    .map(|(g, w)| vidx(&pair_mul(&a1, &a2, (f, *v), (g, *w))))
                    .collect()
            })
            .collect(),
        act: v_pairs
            .iter()
            .map(|(f, v)| h_pairs.iter().map(|&h| hidx(pair_act(&a1, &a2, (f, *v), h))).collect())
            .collect(),
        ins: h_pairs.iter().map(|&h| vidx(&pair_ins(&a1, &a2, h))).collect(),
        zero: 0,
        one: 0,
    };
    let algebra = FiniteForestAlgebra::from_tables(t)?;
    Ok(WreathAlgebra {
        algebra,
        h_right: h_pairs.iter().map(|p| p.1).collect(),
        v_right: v_pairs.iter().map(|p| p.1).collect(),
        h_pairs,
        v_pairs,
        right: a2,
    })
}

impl WreathAlgebra {
    /// Index of `(f, v)` in the V table, if present.
    pub fn v_index(&self, f: &[VElem], v: VElem) -> Option<VElem> {
        self.v_pairs.iter().position(|(g, w)| g == f && *w == v)
    }

    pub fn h_index(&self, h1: HElem, h2: HElem) -> Option<HElem> {
        self.h_pairs.iter().position(|&p| p == (h1, h2))
    }

    /// Letter map sending `α` to `(g(α, ·), ℓ2(α))`, for a full product.
    pub fn letter_map(&self, right: &LetterMap, g: &GTable, one1: VElem) -> Option<LetterMap> {
        let m2 = self.right.h_size();
        let mut map = BTreeMap::new();
        for (l, v2) in right.iter() {
            let row: Vec<VElem> = (0..m2).map(|h| g.get(l, h).unwrap_or(one1)).collect();
            map.insert(l.clone(), self.v_index(&row, v2)?);
        }
        Some(LetterMap::new(map))
    }
}

/// Per-letter function table `g(α, h2) ∈ V1`; unset entries mean `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GTable {
    entries: BTreeMap<(Label, HElem), VElem>,
}

impl GTable {
    pub fn new() -> Self {
        GTable::default()
    }

    pub fn set(&mut self, l: Label, h2: HElem, v1: VElem) {
        self.entries.insert((l, h2), v1);
    }

    pub fn get(&self, l: &Label, h2: HElem) -> Option<VElem> {
        self.entries.get(&(l.clone(), h2)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, HElem, VElem)> {
        self.entries.iter().map(|((l, h), v)| (l, *h, *v))
    }
}

/// A generated wreath fragment and the letter map into it.
#[derive(Clone, Debug)]
pub struct GeneratedWreath {
    pub wreath: WreathAlgebra,
    pub letters: LetterMap,
}

/// The subalgebra of `A1 ≀ A2` generated by letters `α ↦ (g(α,·), ℓ2(α))`,
/// computed by closure without enumerating `V1^H2`.
pub fn wreath_generated(
    a1: &FiniteForestAlgebra,
    a2: &FiniteForestAlgebra,
    right: &LetterMap,
    g: &GTable,
    cap: usize,
) -> Result<GeneratedWreath, AlgebraError> {
    let m2 = a2.h_size();
    let mut hs: Vec<(HElem, HElem)> = Vec::new();
    let mut h_idx: HashMap<(HElem, HElem), usize> = HashMap::new();
    let mut vs: Vec<(Vec<VElem>, VElem)> = Vec::new();
    let mut v_idx: HashMap<(Vec<VElem>, VElem), usize> = HashMap::new();
    let mut queue: VecDeque<Item> = VecDeque::new();

    #[derive(Clone, Copy)]
    enum Item {
        H(usize),
        V(usize),
    }

    let over = |what| AlgebraError::Cap { what, needed: cap + 1, cap };
    let mut push_h = |p: (HElem, HElem), hs: &mut Vec<_>, q: &mut VecDeque<Item>| -> Result<(), AlgebraError> {
        if let std::collections::hash_map::Entry::Vacant(e) = h_idx.entry(p) {
            if hs.len() >= cap {
                return Err(over("generated wreath |H|"));
            }
            e.insert(hs.len());
            q.push_back(Item::H(hs.len()));
            hs.push(p);
        }
        Ok(())
    };
    let mut push_v = |p: (Vec<VElem>, VElem), vs: &mut Vec<_>, q: &mut VecDeque<Item>| -> Result<(), AlgebraError> {
        if !v_idx.contains_key(&p) {
            if vs.len() >= cap {
                return Err(over("generated wreath |V|"));
            }
            v_idx.insert(p.clone(), vs.len());
            q.push_back(Item::V(vs.len()));
            vs.push(p);
        }
        Ok(())
    };

    push_h((a1.zero(), a2.zero()), &mut hs, &mut queue)?;
    push_v((vec![a1.one(); m2], a2.one()), &mut vs, &mut queue)?;
    let letter_pair = |l: &Label, v2: VElem| -> (Vec<VElem>, VElem) {
        ((0..m2).map(|h| g.get(l, h).unwrap_or(a1.one())).collect(), v2)
    };
    for (l, v2) in right.iter() {
        push_v(letter_pair(l, v2), &mut vs, &mut queue)?;
    }

    // each pair is combined once, when its later member is processed
    let mut done_h: Vec<usize> = Vec::new();
    let mut done_v: Vec<usize> = Vec::new();
    while let Some(item) = queue.pop_front() {
        match item {
            Item::H(i) => {
                done_h.push(i);
                let h = hs[i];
                for &j in &done_h {
                    let k = hs[j];
                    push_h((a1.add(h.0, k.0), a2.add(h.1, k.1)), &mut hs, &mut queue)?;
                    push_h((a1.add(k.0, h.0), a2.add(k.1, h.1)), &mut hs, &mut queue)?;
                }
                for &j in &done_v {
                    let (f, v) = vs[j].clone();
                    push_h(pair_act(a1, a2, (&f, v), h), &mut hs, &mut queue)?;
                }
                push_v(pair_ins(a1, a2, h), &mut vs, &mut queue)?;
            }
            Item::V(i) => {
                done_v.push(i);
                let (f, v) = vs[i].clone();
                for &j in &done_v {
                    let (g2, w) = vs[j].clone();
                    push_v(pair_mul(a1, a2, (&f, v), (&g2, w)), &mut vs, &mut queue)?;
                    push_v(pair_mul(a1, a2, (&g2, w), (&f, v)), &mut vs, &mut queue)?;
                }
                for &j in &done_h {
                    push_h(pair_act(a1, a2, (&f, v), hs[j]), &mut hs, &mut queue)?;
                }
            }
        }
    }

    let t = Tables {
        add: hs.iter().map(|&(x1, y1)| hs.iter().map(|&(x2, y2)| h_idx[&(a1.add(x1, x2), a2.add(y1, y2))]).collect()).collect(),
        mul: vs
            .iter()
            .map(|(f, v)| vs.iter().map(|(g2, w)| v_idx[&pair_mul(a1, a2, (f, *v), (g2, *w))]).collect())
            .collect(),
        act: vs.iter().map(|(f, v)| hs.iter().map(|&h| h_idx[&pair_act(a1, a2, (f, *v), h)]).collect()).collect(),
        ins: hs.iter().map(|&h| v_idx[&pair_ins(a1, a2, h)]).collect(),
        zero: 0,
        one: 0,
    };
    let raw = FiniteForestAlgebra::from_tables(t)?;
    let (algebra, class_of) = faithful_quotient(&raw)?;
    let mut reps = vec![usize::MAX; algebra.v_size()];
    for (i, &c) in class_of.iter().enumerate() {
        if reps[c] == usize::MAX {
            reps[c] = i;
        }
    }
    let sub = generated_subalgebra(a2, right);
    let h_right = hs.iter().map(|&(_, h2)| sub.h_index(h2).expect("projection lands in the generated part")).collect();
    let v_right = reps.iter().map(|&r| sub.v_class[&vs[r].1]).collect();
    let letters = LetterMap::new(
        right.iter().map(|(l, v2)| (l.clone(), class_of[v_idx[&letter_pair(l, v2)]])).collect(),
    );
    Ok(GeneratedWreath {
        wreath: WreathAlgebra {
            algebra,
            h_pairs: hs,
            v_pairs: reps.iter().map(|&r| vs[r].clone()).collect(),
            right: sub.algebra,
            h_right,
            v_right,
        },
        letters,
    })
}

/// Left-associated iterated wreath product `((A ≀ B) ≀ C) ≀ …`.
pub fn wreath_chain(factors: &[FiniteForestAlgebra], cap: usize) -> Result<FiniteForestAlgebra, AlgebraError> {
    let (first, rest) = factors.split_first().ok_or(AlgebraError::Malformed("no factors".into()))?;
    rest.iter().try_fold(first.clone(), |acc, b| Ok(wreath_product(&acc, b, cap)?.algebra))
}

/// A table entry where the right projection fails to be a morphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProjectionFailure {
    Zero,
    One,
    Add(HElem, HElem),
    Mul(VElem, VElem),
    Act(VElem, HElem),
    Ins(HElem),
}

/// The right projection maps, as H and V index vectors into `w.right`.
pub fn project_right(w: &WreathAlgebra) -> (&[HElem], &[VElem]) {
    (&w.h_right, &w.v_right)
}

/// Checks the morphism laws of the right projection on every table entry.
pub fn verify_projection(w: &WreathAlgebra) -> Result<(), ProjectionFailure> {
    let (a, r) = (&w.algebra, &w.right);
    let (ph, pv) = project_right(w);
    if ph[a.zero()] != r.zero() {
        return Err(ProjectionFailure::Zero);
    }
    if pv[a.one()] != r.one() {
        return Err(ProjectionFailure::One);
    }
    for x in 0..a.h_size() {
        for y in 0..a.h_size() {
            if ph[a.add(x, y)] != r.add(ph[x], ph[y]) {
                return Err(ProjectionFailure::Add(x, y));
            }
        }
        if pv[a.ins(x)] != r.ins(ph[x]) {
            return Err(ProjectionFailure::Ins(x));
        }
    }
    for v in 0..a.v_size() {
        for u in 0..a.v_size() {
            if pv[a.mul(v, u)] != r.mul(pv[v], pv[u]) {
                return Err(ProjectionFailure::Mul(v, u));
            }
        }
        for h in 0..a.h_size() {
            if ph[a.act(v, h)] != r.act(pv[v], ph[h]) {
                return Err(ProjectionFailure::Act(v, h));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{eval_forest, find_isomorphism, validate_algebra};
    use crate::fixtures;
    use crate::forest::enumerate_forests;

    #[test]
    fn sizes() {
        let b = fixtures::bool_or();
        let w = wreath_product(&b, &b, DEFAULT_WREATH_CAP).unwrap();
        assert_eq!((w.algebra.h_size(), w.algebra.v_size()), (4, 27));
        assert!(validate_algebra(&w.algebra).is_valid());
        let o = wreath_product(&fixtures::one(), &b, DEFAULT_WREATH_CAP).unwrap();
        assert_eq!((o.algebra.h_size(), o.algebra.v_size()), (2, 3));
        assert!(find_isomorphism(&o.algebra, &b, 10_000).is_some());
        assert!(matches!(wreath_product(&b, &b, 26), Err(AlgebraError::Cap { .. })));
    }

    #[test]
    fn action_sample() {
        let b = fixtures::bool_or();
        let w = wreath_product(&b, &b, DEFAULT_WREATH_CAP).unwrap();
        // f = (0 ↦ id, 1 ↦ c1), v = id
        let v = w.v_index(&[0, 2], 0).unwrap();
        let h = w.h_index(1, 1).unwrap();
        assert_eq!(w.h_pairs[w.algebra.act(v, h)], (1, 1));
        let h = w.h_index(0, 1).unwrap();
        assert_eq!(w.h_pairs[w.algebra.act(v, h)], (1, 1));
        let h = w.h_index(0, 0).unwrap();
        assert_eq!(w.h_pairs[w.algebra.act(v, h)], (0, 0));
    }

    #[test]
    fn projection_is_morphism() {
        let b = fixtures::bool_or();
        let w = wreath_product(&b, &b, DEFAULT_WREATH_CAP).unwrap();
        assert_eq!(verify_projection(&w), Ok(()));
        let (ph, pv) = project_right(&w);
        for (i, &(_, h2)) in w.h_pairs.iter().enumerate() {
            assert_eq!(ph[i], h2);
        }
        for (i, (_, v2)) in w.v_pairs.iter().enumerate() {
            assert_eq!(pv[i], *v2);
        }
    }

    #[test]
    fn constant_identity_table_reproduces_right_factor() {
        let b = fixtures::bool_or();
        let right = LetterMap::from_pairs(&[("a", 2), ("b", 1)]);
        let gw = wreath_generated(&fixtures::chain3().algebra, &b, &right, &GTable::new(), 1000).unwrap();
        let a = &gw.wreath.algebra;
        assert!(validate_algebra(a).is_valid());
        assert_eq!(a.h_size(), b.h_size());
        assert!(gw.wreath.h_pairs.iter().all(|p| p.0 == 0));
        assert!(find_isomorphism(a, &b, 10_000).is_some());
        assert_eq!(verify_projection(&gw.wreath), Ok(()));
    }

    #[test]
    fn generated_agrees_with_full() {
        let b = fixtures::bool_or();
        let right = LetterMap::from_pairs(&[("a", 1), ("b", 1), ("c", 2)]);
        let mut g = GTable::new();
        let bl = Label::new("b").unwrap();
        g.set(bl.clone(), 0, 2);
        g.set(bl, 1, 0);
        let full = wreath_product(&b, &b, DEFAULT_WREATH_CAP).unwrap();
        let lm = full.letter_map(&right, &g, 0).unwrap();
        let gw = wreath_generated(&b, &b, &right, &g, 1000).unwrap();
        assert!(gw.wreath.algebra.h_size() <= 8);
        assert!(validate_algebra(&gw.wreath.algebra).is_valid());
        assert_eq!(verify_projection(&gw.wreath), Ok(()));
        for f in enumerate_forests(&right.alphabet(), 3, 6, 1_000_000).unwrap() {
            let hf = eval_forest(&full.algebra, &lm, &f).unwrap();
            let hg = eval_forest(&gw.wreath.algebra, &gw.letters, &f).unwrap();
            assert_eq!(full.h_pairs[hf], gw.wreath.h_pairs[hg], "{f}");
            let rh = eval_forest(&b, &right, &f).unwrap();
            assert_eq!(full.h_right[hf], rh);
            let sub = generated_subalgebra(&b, &right);
            assert_eq!(sub.h_origin[gw.wreath.h_right[hg]], rh);
        }
    }

    #[test]
    fn associativity_up_to_isomorphism() {
        let u = fixtures::or_unit();
        let one = fixtures::one();
        let p = fixtures::parity();
        let triples = [(&u, &u, &u), (&u, &p, &u), (&p, &u, &one), (&one, &u, &p)];
        for (a, b, c) in triples {
            let left = wreath_chain(&[a.clone(), b.clone(), c.clone()], 10_000).unwrap();
            let bc = wreath_product(b, c, 10_000).unwrap().algebra;
            let right = wreath_product(a, &bc, 10_000).unwrap().algebra;
            assert!(validate_algebra(&left).is_valid());
            assert!(find_isomorphism(&left, &right, 10_000_000).is_some());
        }
    }
}
