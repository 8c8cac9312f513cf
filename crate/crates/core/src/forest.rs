//! The free forest algebra: canonical unordered forests, contexts, path sets,
//! the Ψ normal form and bounded enumeration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// A node label.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Arc<str>);

impl Label {
    /// Builds a label, rejecting text that would not survive a parse/render round trip.
    pub fn new(text: &str) -> Result<Self, ParseError> {
        if text.is_empty() || text == "_" || text.chars().any(is_structural) {
            return Err(ParseError::BadLabel(text.to_string()));
        }
        Ok(Label(Arc::from(text)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the label is a plain identifier (letters, digits, underscore).
    pub fn is_identifier(&self) -> bool {
        self.0.chars().all(|c| c.is_alphanumeric() || c == '_')
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

fn is_structural(c: char) -> bool {
    c.is_whitespace() || matches!(c, '[' | ']' | '{' | '}' | ',')
}

/// A finite alphabet.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet(BTreeSet<Label>);

impl Alphabet {
    pub fn new(labels: impl IntoIterator<Item = Label>) -> Self {
        Alphabet(labels.into_iter().collect())
    }

    /// Convenience constructor from string slices; panics on malformed labels.
    pub fn from_strs(labels: &[&str]) -> Self {
        Alphabet::new(labels.iter().map(|s| Label::new(s).expect("valid label")))
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.0.contains(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Label> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&Label> {
        self.0.iter().find(|l| l.as_str() == text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown label `{label}` at byte {pos}")]
    UnknownLabel { label: String, pos: usize },
    #[error("malformed label `{0}`")]
    BadLabel(String),
    #[error("expected exactly one hole, found {0}")]
    HoleCount(usize),
}

/// A tree `label[children]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    label: Label,
    children: Arc<Forest>,
}

impl Tree {
    pub fn new(label: Label, children: Forest) -> Self {
        Tree { label, children: Arc::new(children) }
    }

    /// Builds a tree sharing an existing children forest.
    pub fn shared(label: Label, children: Arc<Forest>) -> Self {
        Tree { label, children }
    }

    pub fn leaf(label: Label) -> Self {
        Tree { label, children: Arc::new(Forest::empty()) }
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn children(&self) -> &Forest {
        &self.children
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.node_count()
    }

    pub fn height(&self) -> usize {
        1 + self.children.height()
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if !self.children.is_empty() {
            f.write_str("[")?;
            self.children.write_trees(f)?;
            f.write_str("]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An unordered, duplicate-free forest. The set representation makes `+`
/// commutative and idempotent by construction.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Forest {
    trees: BTreeSet<Tree>,
}

impl Forest {
    pub fn empty() -> Self {
        Forest::default()
    }

    pub fn from_trees(trees: impl IntoIterator<Item = Tree>) -> Self {
        Forest { trees: trees.into_iter().collect() }
    }

    pub fn single(tree: Tree) -> Self {
        Forest::from_trees([tree])
    }

    /// Parses canonical or non-canonical forest text over `alphabet`.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, ParseError> {
        let raw = parse_raw(text)?;
        let mut holes = 0;
        let forest = raw_to_forest(&raw, Some(alphabet), &mut holes)?;
        if holes > 0 {
            return Err(ParseError::HoleCount(holes));
        }
        Ok(forest)
    }

    /// Parses forest text, accepting any well-formed label.
    pub fn parse_any(text: &str) -> Result<Self, ParseError> {
        let raw = parse_raw(text)?;
        let mut holes = 0;
        let forest = raw_to_forest(&raw, None, &mut holes)?;
        if holes > 0 {
            return Err(ParseError::HoleCount(holes));
        }
        Ok(forest)
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.trees.iter()
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn contains(&self, tree: &Tree) -> bool {
        self.trees.contains(tree)
    }

    pub fn insert(&mut self, tree: Tree) {
        self.trees.insert(tree);
    }

    pub fn remove(&mut self, tree: &Tree) -> bool {
        self.trees.remove(tree)
    }

    /// Set union of the member trees.
    pub fn sum(&self, other: &Forest) -> Forest {
        let mut trees = self.trees.clone();
        trees.extend(other.trees.iter().cloned());
        Forest { trees }
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(Tree::node_count).sum()
    }

    pub fn height(&self) -> usize {
        self.trees.iter().map(Tree::height).max().unwrap_or(0)
    }

    /// Labels occurring anywhere in the forest.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut BTreeSet<Label>) {
        for t in &self.trees {
            out.insert(t.label.clone());
            t.children.collect_labels(out);
        }
    }

    pub fn check_alphabet(&self, alphabet: &Alphabet) -> Result<(), Label> {
        match self.labels().into_iter().find(|l| !alphabet.contains(l)) {
            Some(l) => Err(l),
            None => Ok(()),
        }
    }

    fn write_trees(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.trees.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.trees.is_empty() {
            return f.write_str("{}");
        }
        self.write_trees(f)
    }
}

impl fmt::Debug for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Forest {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Forest::parse_any(s)
    }
}

/// A forest with exactly one hole: either the hole itself or
/// `siblings + label[inner]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    Hole,
    Node { siblings: Forest, label: Label, inner: Box<Context> },
}

impl Context {
    /// The one-node context `label[_]`.
    pub fn letter(label: Label) -> Self {
        Context::Node { siblings: Forest::empty(), label, inner: Box::new(Context::Hole) }
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, ParseError> {
        raw_to_context(&parse_raw(text)?, Some(alphabet))
    }

    pub fn parse_any(text: &str) -> Result<Self, ParseError> {
        raw_to_context(&parse_raw(text)?, None)
    }

    /// Replaces the hole by `f`.
    pub fn apply(&self, f: &Forest) -> Forest {
        match self {
            Context::Hole => f.clone(),
            Context::Node { siblings, label, inner } => {
                let mut out = siblings.clone();
                out.insert(Tree::new(label.clone(), inner.apply(f)));
                out
            }
        }
    }

    /// The context whose action is `self` after `other`: `self[other[_]]`.
    pub fn compose(&self, other: &Context) -> Context {
        match self {
            Context::Hole => other.clone(),
            Context::Node { siblings, label, inner } => Context::Node {
                siblings: siblings.clone(),
                label: label.clone(),
                inner: Box::new(inner.compose(other)),
            },
        }
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        let mut cur = self;
        while let Context::Node { siblings, label, inner } = cur {
            out.extend(siblings.labels());
            out.insert(label.clone());
            cur = inner;
        }
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Context::Hole => 0,
            Context::Node { inner, .. } => 1 + inner.depth(),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Hole => f.write_str("_"),
            Context::Node { siblings, label, inner } => {
                for t in siblings.trees() {
                    write!(f, "{t},")?;
                }
                write!(f, "{label}[{inner}]")
            }
        }
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A word over the alphabet.
pub type Word = Vec<Label>;

/// Renders a word with `.` separators; the empty word is `ε`.
pub fn render_word(w: &[Label]) -> String {
    if w.is_empty() {
        return "ε".to_string();
    }
    w.iter().map(Label::as_str).collect::<Vec<_>>().join(".")
}

/// A prefix-closed set of words, always containing ε.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PathSet(BTreeSet<Word>);

impl PathSet {
    pub fn words(&self) -> &BTreeSet<Word> {
        &self.0
    }

    pub fn contains(&self, w: &[Label]) -> bool {
        self.0.contains(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_closed(&self) -> bool {
        self.0.iter().all(|w| w.is_empty() || self.0.contains(&w[..w.len() - 1]))
    }
}

impl fmt::Display for PathSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self.0.iter().map(|w| render_word(w)).collect();
        write!(f, "{{{}}}", words.join(", "))
    }
}

/// π(f): all root-starting label words of `f`, including ε.
pub fn paths(f: &Forest) -> PathSet {
    let mut out = BTreeSet::new();
    out.insert(Vec::new());
    let mut prefix = Vec::new();
    collect_paths(f, &mut prefix, &mut out);
    PathSet(out)
}

fn collect_paths(f: &Forest, prefix: &mut Word, out: &mut BTreeSet<Word>) {
    for t in f.trees() {
        prefix.push(t.label.clone());
        out.insert(prefix.clone());
        collect_paths(&t.children, prefix, out);
        prefix.pop();
    }
}

/// Ψ(f): merges sibling trees with equal root labels, recursively.
pub fn psi(f: &Forest) -> Forest {
    let mut groups: BTreeMap<&Label, Forest> = BTreeMap::new();
    for t in f.trees() {
        let slot = groups.entry(&t.label).or_default();
        for c in t.children.trees() {
            slot.insert(c.clone());
        }
    }
    Forest::from_trees(groups.into_iter().map(|(l, kids)| Tree::new(l.clone(), psi(&kids))))
}

/// True when no two distinct siblings anywhere in `f` share a label.
pub fn is_psi_normal(f: &Forest) -> bool {
    let mut seen = BTreeSet::new();
    f.trees().all(|t| seen.insert(&t.label) && is_psi_normal(&t.children))
}

/// α⁻¹f: the union of the children of all α-rooted member trees.
pub fn label_quotient(alpha: &Label, f: &Forest) -> Forest {
    Forest::from_trees(
        f.trees()
            .filter(|t| &t.label == alpha)
            .flat_map(|t| t.children.trees().cloned()),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("enumeration exceeded the cap of {cap} forests")]
pub struct EnumerationCap {
    pub cap: usize,
}

/// Every canonical forest over `alphabet` with height ≤ `max_height` and at most
/// `max_nodes` nodes, ordered by node count and then by canonical rendering.
pub fn enumerate_forests(
    alphabet: &Alphabet,
    max_height: usize,
    max_nodes: usize,
    cap: usize,
) -> Result<Vec<Forest>, EnumerationCap> {
    let mut e = Enumerator {
        labels: alphabet.iter().cloned().collect(),
        forests: HashMap::new(),
        trees: HashMap::new(),
        cap,
    };
    let mut out = Vec::new();
    for n in 0..=max_nodes {
        let mut layer: Vec<Forest> = e.forests(max_height, n)?.iter().map(|f| (**f).clone()).collect();
        layer.sort_by_cached_key(|f| f.to_string());
        out.extend(layer);
        if out.len() > cap {
            return Err(EnumerationCap { cap });
        }
    }
    Ok(out)
}

struct Enumerator {
    labels: Vec<Label>,
    forests: HashMap<(usize, usize), Vec<Arc<Forest>>>,
    trees: HashMap<(usize, usize), Vec<Tree>>,
    cap: usize,
}

impl Enumerator {
    /// Trees with height ≤ h and exactly n nodes.
    fn trees(&mut self, h: usize, n: usize) -> Result<&Vec<Tree>, EnumerationCap> {
        if !self.trees.contains_key(&(h, n)) {
            let mut out = Vec::new();
            if h >= 1 && n >= 1 {
                let kids = self.forests(h - 1, n - 1)?.clone();
                for l in &self.labels {
                    for k in &kids {
                        out.push(Tree::shared(l.clone(), k.clone()));
                    }
                    if out.len() > self.cap {
                        return Err(EnumerationCap { cap: self.cap });
                    }
                }
            }
            out.sort();
            self.trees.insert((h, n), out);
        }
        Ok(&self.trees[&(h, n)])
    }

    /// Forests with height ≤ h and exactly n nodes.
    fn forests(&mut self, h: usize, n: usize) -> Result<&Vec<Arc<Forest>>, EnumerationCap> {
        if !self.forests.contains_key(&(h, n)) {
            // pool[k] holds the trees with k nodes
            let mut pool: Vec<Vec<Tree>> = vec![Vec::new()];
            for k in 1..=n {
                pool.push(self.trees(h, k)?.clone());
            }
            let mut out = Vec::new();
            let mut chosen = Vec::new();
            self.choose(&pool, (1, 0), n, &mut chosen, &mut out)?;
            self.forests.insert((h, n), out);
        }
        Ok(&self.forests[&(h, n)])
    }

    /// Picks trees in increasing (size, position) order so each set is built once.
    fn choose(
        &self,
        pool: &[Vec<Tree>],
        from: (usize, usize),
        remaining: usize,
        chosen: &mut Vec<Tree>,
        out: &mut Vec<Arc<Forest>>,
    ) -> Result<(), EnumerationCap> {
        if remaining == 0 {
            out.push(Arc::new(Forest::from_trees(chosen.iter().cloned())));
            if out.len() > self.cap {
                return Err(EnumerationCap { cap: self.cap });
            }
            return Ok(());
        }
        for k in from.0..=remaining {
            let start = if k == from.0 { from.1 } else { 0 };
            for i in start..pool[k].len() {
                chosen.push(pool[k][i].clone());
                self.choose(pool, (k, i + 1), remaining - k, chosen, out)?;
                chosen.pop();
            }
        }
        Ok(())
    }
}

// Parsing.

#[derive(Debug)]
struct RawNode {
    label: Option<String>,
    pos: usize,
    children: Vec<RawNode>,
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    LBrace,
    RBrace,
    Comma,
    Word(String),
}

fn lex(text: &str) -> Vec<(usize, Tok)> {
    let mut toks = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let tok = match c {
            '[' => Some(Tok::Open),
            ']' => Some(Tok::Close),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = tok {
            chars.next();
            toks.push((i, t));
            continue;
        }
        let mut word = String::new();
        while let Some(&(_, c)) = chars.peek() {
            if is_structural(c) {
                break;
            }
            word.push(c);
            chars.next();
        }
        toks.push((i, Tok::Word(word)));
    }
    toks
}

struct RawParser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl RawParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.to_string() })
    }

    fn trees(&mut self) -> Result<Vec<RawNode>, ParseError> {
        let mut out = vec![self.tree()?];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            out.push(self.tree()?);
        }
        Ok(out)
    }

    fn tree(&mut self) -> Result<RawNode, ParseError> {
        let pos = self.pos();
        let label = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            _ => return self.err("expected a label"),
        };
        self.at += 1;
        let mut children = Vec::new();
        if self.peek() == Some(&Tok::Open) {
            self.at += 1;
            if self.peek() != Some(&Tok::Close) {
                children = self.trees()?;
            }
            if self.peek() != Some(&Tok::Close) {
                return self.err("expected `]`");
            }
            self.at += 1;
        }
        let label = if label == "_" { None } else { Some(label) };
        if label.is_none() && !children.is_empty() {
            return Err(ParseError::Syntax { pos, msg: "the hole must be a leaf".into() });
        }
        Ok(RawNode { label, pos, children })
    }
}

fn parse_raw(text: &str) -> Result<Vec<RawNode>, ParseError> {
    let mut p = RawParser { toks: lex(text), at: 0, end: text.len() };
    let braced = p.peek() == Some(&Tok::LBrace);
    if braced {
        p.at += 1;
    }
    let nodes = if braced && p.peek() == Some(&Tok::RBrace) {
        Vec::new()
    } else {
        p.trees()?
    };
    if braced {
        if p.peek() != Some(&Tok::RBrace) {
            return p.err("expected `}`");
        }
        p.at += 1;
    }
    if p.at != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(nodes)
}

fn make_label(raw: &str, pos: usize, alphabet: Option<&Alphabet>) -> Result<Label, ParseError> {
    let label = Label::new(raw)?;
    if let Some(a) = alphabet {
        if !a.contains(&label) {
            return Err(ParseError::UnknownLabel { label: raw.to_string(), pos });
        }
    }
    Ok(label)
}

fn raw_to_forest(
    nodes: &[RawNode],
    alphabet: Option<&Alphabet>,
    holes: &mut usize,
) -> Result<Forest, ParseError> {
    let mut out = Forest::empty();
    for n in nodes {
        match &n.label {
            None => *holes += 1,
            Some(l) => {
                let label = make_label(l, n.pos, alphabet)?;
                out.insert(Tree::new(label, raw_to_forest(&n.children, alphabet, holes)?));
            }
        }
    }
    Ok(out)
}

fn count_holes(nodes: &[RawNode]) -> usize {
    nodes.iter().map(|n| usize::from(n.label.is_none()) + count_holes(&n.children)).sum()
}

fn raw_to_context(nodes: &[RawNode], alphabet: Option<&Alphabet>) -> Result<Context, ParseError> {
    let holes = count_holes(nodes);
    if holes != 1 {
        return Err(ParseError::HoleCount(holes));
    }
    let mut siblings = Vec::new();
    let mut spine = None;
    for n in nodes {
        if count_holes(std::slice::from_ref(n)) == 1 {
            spine = Some(n);
        } else {
            siblings.push(n);
        }
    }
    let spine = spine.expect("one hole");
    let mut none = 0;
    let siblings_f = raw_to_forest(
        &siblings.into_iter().map(clone_raw).collect::<Vec<_>>(),
        alphabet,
        &mut none,
    )?;
    match &spine.label {
        None => {
            if siblings_f.is_empty() {
                Ok(Context::Hole)
            } else {
                Err(ParseError::Syntax {
                    pos: spine.pos,
                    msg: "a hole at the top level cannot have siblings".into(),
                })
            }
        }
        Some(l) => Ok(Context::Node {
            siblings: siblings_f,
            label: make_label(l, spine.pos, alphabet)?,
            inner: Box::new(raw_to_context(&spine.children, alphabet)?),
        }),
    }
}

fn clone_raw(n: &RawNode) -> RawNode {
    RawNode { label: n.label.clone(), pos: n.pos, children: n.children.iter().map(clone_raw).collect() }
}

/// A random forest of height at most `height` with at most `width` trees
/// under each node.
pub fn random_forest(rng: &mut impl rand::Rng, labels: &[Label], height: usize, width: usize) -> Forest {
    if height == 0 || labels.is_empty() {
        return Forest::empty();
    }
    let n = rng.gen_range(0..=width);
    Forest::from_trees((0..n).map(|_| {
        let l = labels[rng.gen_range(0..labels.len())].clone();
        Tree::new(l, random_forest(rng, labels, height - 1, width))
    }))
}
