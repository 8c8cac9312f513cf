//! Seeded brute-force cross-checks of the decision procedures.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{eval_forest, AlgebraError, FiniteForestAlgebra, HElem, LetterMap};
use crate::derived::{
    build_derived_category, diagram_merge, diagram_val, one_object_category, random_diagram, DerivedCategory,
    DerivedError,
};
use crate::fixtures::{self, bool_or};
use crate::forest::{
    enumerate_forests, is_psi_normal, paths, psi, random_forest, render_word, EnumerationCap, Forest, Label, Tree,
};
use crate::pathlang::{
    bounded_intersecting_pairs, bounded_pi_oracle, intersecting_pairs, max_psi_preimage_nodes, pi_automaton,
    realize_word, PathError, PsiEngine,
};
use crate::twodist::{is_2_distributive, realize_certificate, simk_oracle, SimOutcome, TwoDistVerdict};

pub const SUITES: [&str; 6] = ["psi", "engine", "intersect", "pi", "twodist", "diagrams"];

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown suite `{0}`; suites are {list}", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationCap),
    #[error(transparent)]
    Derived(#[from] DerivedError),
}

impl OracleError {
    /// True when the suite stopped at a resource cap rather than a bad input.
    pub fn is_cap(&self) -> bool {
        matches!(
            self,
            OracleError::Enumeration(_)
                | OracleError::Path(PathError::Cap { .. } | PathError::Enumeration(_) | PathError::TooLarge { .. })
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub seed: u64,
    pub max_height: usize,
    pub max_nodes: usize,
    /// Random samples per check, or search budget where a check searches.
    pub budget: usize,
    pub cap: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { seed: 0, max_height: 3, max_nodes: 6, budget: 1000, cap: 1 << 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "pass" } else { "FAIL" };
            writeln!(f, "{} {:<28} {mark}  {}", self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

pub fn run_suite(name: &str, b: &Bounds) -> Result<Report, OracleError> {
    let mut r = Report { suite: name.to_string(), checks: Vec::new() };
    match name {
        "psi" => psi_suite(b, &mut r),
        "engine" => engine_suite(b, &mut r)?,
        "intersect" => intersect_suite(b, &mut r)?,
        "pi" => pi_suite(b, &mut r)?,
        "twodist" => twodist_suite(b, &mut r)?,
        "diagrams" => diagram_suite(b, &mut r)?,
        other => return Err(OracleError::UnknownSuite(other.to_string())),
    }
    Ok(r)
}

fn labels(names: &[&str]) -> Vec<Label> {
    names.iter().map(|n| Label::new(n).expect("label")).collect()
}

/// A forest with the same path set: some trees `α[c]` are split into
/// `α[c1], α[c2]` with `c1 ∪ c2 = c`.
pub fn path_preserving_variant(rng: &mut impl Rng, f: &Forest) -> Forest {
    let mut out = Vec::new();
    for t in f.trees() {
        let kids: Vec<&Tree> = t.children().trees().collect();
        if !kids.is_empty() && rng.gen_bool(0.3) {
            let (mut c1, mut c2) = (Vec::new(), Vec::new());
            for k in kids {
                match rng.gen_range(0..3) {
                    0 => c1.push(k.clone()),
                    1 => c2.push(k.clone()),
                    _ => {
                        c1.push(k.clone());
                        c2.push(k.clone());
                    }
                }
            }
            for c in [c1, c2] {
                let c = path_preserving_variant(rng, &Forest::from_trees(c));
                out.push(Tree::new(t.label().clone(), c));
            }
        } else {
            out.push(Tree::new(t.label().clone(), path_preserving_variant(rng, t.children())));
        }
    }
    Forest::from_trees(out)
}

fn psi_suite(b: &Bounds, r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let abcd = labels(&["a", "b", "c", "d"]);
    let forests: Vec<Forest> =
        (0..b.budget).map(|_| random_forest(&mut rng, &abcd, b.max_height, 2)).collect();
    type Prop = (&'static str, fn(&Forest) -> bool);
    let props: [Prop; 3] = [
        ("no equal-label siblings", |f| is_psi_normal(&psi(f))),
        ("paths preserved", |f| paths(&psi(f)) == paths(f)),
        ("idempotent", |f| psi(&psi(f)) == psi(f)),
    ];
    for (name, p) in props {
        match forests.iter().find(|f| !p(f)) {
            Some(f) => r.check(name, false, format!("at {f}")),
            None => r.check(name, true, format!("{} forests", forests.len())),
        }
    }
    let mut pairs = 0;
    let mut equal = 0;
    let mut bad = None;
    for (i, f) in forests.iter().enumerate() {
        let g = if i % 2 == 0 { path_preserving_variant(&mut rng, f) } else { forests[(i * 7 + 3) % forests.len()].clone() };
        let same_paths = paths(f) == paths(&g);
        equal += usize::from(same_paths);
        pairs += 1;
        if same_paths != (psi(f) == psi(&g)) && bad.is_none() {
            bad = Some(format!("{f} vs {g}"));
        }
    }
    let detail = bad.clone().unwrap_or_else(|| format!("{pairs} pairs, {equal} path-equal"));
    r.check("paths equal iff psi equal", bad.is_none(), detail);
}

fn small_fixtures(max_h: usize, max_letters: usize) -> Vec<fixtures::FixtureAlgebra> {
    fixtures::builtin_algebras()
        .into_iter()
        .filter(|f| f.algebra.h_size() <= max_h && f.letters.len() <= max_letters)
        .collect()
}

fn engine_suite(b: &Bounds, r: &mut Report) -> Result<(), OracleError> {
    for fx in small_fixtures(3, 3) {
        let (a, lm) = (&fx.algebra, &fx.letters);
        let mut e = PsiEngine::new(a, lm)?;
        let all = enumerate_forests(&lm.alphabet(), b.max_height, b.max_nodes, b.cap)?;
        let mut bucket: HashMap<Forest, BTreeSet<HElem>> = HashMap::new();
        for f in &all {
            bucket.entry(psi(f)).or_default().insert(eval_forest(a, lm, f)?);
        }
        let (mut exact, mut onesided, mut bad) = (0, 0, None);
        for f in &all {
            let g = psi(f);
            let direct = &bucket[&g];
            let accepted: BTreeSet<HElem> = if f.is_empty() {
                BTreeSet::from([a.zero()])
            } else {
                let x = e.value_of(f)?;
                (0..a.h_size()).filter(|&h| e.accepts(&x, h)).collect()
            };
            let ok = if max_psi_preimage_nodes(&g) <= b.max_nodes as u128 {
                exact += 1;
                &accepted == direct
            } else {
                onesided += 1;
                direct.is_subset(&accepted)
            };
            if !ok && bad.is_none() {
                bad = Some(format!("at {f}: engine {accepted:?}, direct {direct:?}"));
            }
        }
        let detail = bad.clone().unwrap_or_else(|| format!("{exact} exact, {onesided} one-sided"));
        r.check(fx.name, bad.is_none(), detail);
    }
    Ok(())
}

fn intersect_suite(b: &Bounds, r: &mut Report) -> Result<(), OracleError> {
    for fx in small_fixtures(10, 4) {
        let (a, lm) = (&fx.algebra, &fx.letters);
        let pairs = intersecting_pairs(a, lm, b.cap.min(crate::pathlang::DEFAULT_ENGINE_CAP * 4))?;
        let brute = bounded_intersecting_pairs(a, lm, b.max_height, b.max_nodes, b.cap)?;
        let missed = brute.iter().find(|p| !pairs.contains_key(p));
        let wrong = pairs.iter().find(|(&(h1, h2), (f1, f2))| {
            paths(f1) != paths(f2)
                || eval_forest(a, lm, f1).ok() != Some(h1)
                || eval_forest(a, lm, f2).ok() != Some(h2)
        });
        let detail = match (missed, wrong) {
            (Some(p), _) => format!("misses {p:?}"),
            (_, Some((p, _))) => format!("bad witness for {p:?}"),
            _ => format!("{} pairs, {} seen by enumeration", pairs.len(), brute.len()),
        };
        r.check(fx.name, missed.is_none() && wrong.is_none(), detail);
    }
    Ok(())
}

fn pi_suite(b: &Bounds, r: &mut Report) -> Result<(), OracleError> {
    for fx in small_fixtures(3, 4) {
        let (a, lm) = (&fx.algebra, &fx.letters);
        let dfa = pi_automaton(a, lm, &fx.accept);
        let seen = bounded_pi_oracle(a, lm, &fx.accept, b.max_height.max(4), b.max_nodes, b.cap)?;
        let missing = seen.iter().find(|w| !dfa.accepts(w));
        let mut unrealized = None;
        let words = dfa.words_up_to(3);
        for w in &words {
            let f = realize_word(a, lm, &fx.accept, w)?;
            if !f.is_some_and(|f| paths(&f).contains(w)) {
                unrealized = Some(w.clone());
                break;
            }
        }
        let detail = match (missing, &unrealized) {
            (Some(w), _) => format!("oracle word {} rejected", render_word(w)),
            (_, Some(w)) => format!("no forest for {}", render_word(w)),
            _ => format!("{} oracle words, {} short words realized", seen.len(), words.len()),
        };
        r.check(fx.name, missing.is_none() && unrealized.is_none(), detail);
    }
    Ok(())
}

/// Random letter maps over `alphabet` into `a`.
fn random_maps(rng: &mut impl Rng, a: &FiniteForestAlgebra, alphabet: &[Label], n: usize) -> Vec<LetterMap> {
    (0..n)
        .map(|_| LetterMap::new(alphabet.iter().map(|l| (l.clone(), rng.gen_range(0..a.v_size()))).collect()))
        .collect()
}

fn twodist_suite(b: &Bounds, r: &mut Report) -> Result<(), OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let abc = labels(&["a", "b", "c"]);
    let mut yes = Vec::new();
    for fx in fixtures::builtin_algebras() {
        let v = is_2_distributive(&fx.algebra, crate::pathlang::DEFAULT_ENGINE_CAP);
        let ok = match &v {
            TwoDistVerdict::Yes { .. } => fx.two_distributive,
            TwoDistVerdict::No(cert) => {
                !fx.two_distributive
                    && cert.replays(&fx.algebra)
                    && (realize_certificate(&fx.algebra, cert, fx.algebra.h_size() + 2).is_some()
                        || matches!(cert, crate::twodist::Certificate::Horizontal(_)))
            }
            TwoDistVerdict::Inconclusive { .. } => false,
        };
        r.check(format!("verdict {}", fx.name), ok, crate::twodist::verdict_kind(&v));
        if v.is_yes() {
            yes.push(fx);
        }
    }
    let (mut proven, mut bad) = (0, None);
    for _ in 0..b.budget.min(200) {
        let f = random_forest(&mut rng, &abc, b.max_height, 2);
        let g = path_preserving_variant(&mut rng, &f);
        if simk_oracle(&f, &g, 2, 10_000) != SimOutcome::Proven {
            continue;
        }
        proven += 1;
        for fx in &yes {
            for lm in random_maps(&mut rng, &fx.algebra, &abc, 10) {
                if eval_forest(&fx.algebra, &lm, &f)? != eval_forest(&fx.algebra, &lm, &g)? && bad.is_none() {
                    bad = Some(format!("{}: {f} vs {g}", fx.name));
                }
            }
        }
    }
    let detail = bad.clone().unwrap_or_else(|| format!("{proven} proven pairs"));
    r.check("sim2 soundness", bad.is_none(), detail);
    Ok(())
}

/// The diagonal category of BOOL-OR along the letter `a ↦ c1`.
pub fn diagonal_category() -> DerivedCategory {
    let a = bool_or();
    let lm = LetterMap::from_pairs(&[("a", 2)]);
    build_derived_category(&a, &lm, &a, &lm).expect("shared alphabet")
}

/// Locally distributive categories used by the diagram checks.
pub fn diagram_categories() -> Result<Vec<(String, DerivedCategory)>, DerivedError> {
    let mut out = vec![("diagonal".to_string(), diagonal_category())];
    for fx in fixtures::builtin_algebras() {
        let c = one_object_category(&fx.algebra, &fx.letters)?;
        if c.is_locally_distributive() {
            out.push((fx.name.to_string(), c));
        }
    }
    Ok(out)
}

fn diagram_suite(b: &Bounds, r: &mut Report) -> Result<(), OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    for (name, c) in diagram_categories()? {
        let mut bad = None;
        let mut by_paths = BTreeMap::new();
        for _ in 0..b.budget {
            let d = random_diagram(&c, &mut rng, b.max_height, 3);
            let m = diagram_merge(&d);
            let (x, y) = (diagram_val(&c, &d)?, diagram_val(&c, &m)?);
            let fixed = *by_paths.entry(paths(&d)).or_insert(x);
            if (x != y || !is_psi_normal(&m) || fixed != x) && bad.is_none() {
                bad = Some(format!("at {d}"));
            }
        }
        let detail = bad.clone().unwrap_or_else(|| format!("{} diagrams", b.budget));
        r.check(name, bad.is_none(), detail);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_keep_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let abc = labels(&["a", "b", "c"]);
        for _ in 0..200 {
            let f = random_forest(&mut rng, &abc, 4, 3);
            assert_eq!(paths(&path_preserving_variant(&mut rng, &f)), paths(&f));
        }
    }

    #[test]
    fn suites_pass_at_small_bounds() {
        let b = Bounds { budget: 50, max_height: 2, max_nodes: 4, ..Bounds::default() };
        for s in SUITES {
            let r = run_suite(s, &b).unwrap();
            assert!(r.passed(), "{r}");
            assert!(!r.checks.is_empty());
        }
        assert!(matches!(run_suite("nope", &b), Err(OracleError::UnknownSuite(_))));
    }

    #[test]
    fn reports_are_deterministic() {
        let b = Bounds { seed: 9, budget: 30, max_height: 3, ..Bounds::default() };
        assert_eq!(run_suite("psi", &b).unwrap(), run_suite("psi", &b).unwrap());
    }
}
