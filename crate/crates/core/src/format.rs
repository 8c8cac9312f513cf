//! Line-based text formats for algebras, letter maps, wreath letter tables,
//! accepting sets and word automata. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::{FiniteForestAlgebra, HElem, LetterMap, Tables};
use crate::forest::Label;
use crate::pathlang::WordDfa;
use crate::wreath::GTable;

pub const FORMATS: &str = "\
Algebra (.fa):
  FA 1
  H m
  V n
  ZERO i
  ONE j
  ADDROW i: k0 ... k(m-1)      m lines
  MULROW i: w0 ... w(n-1)      n lines, MULROW v: entry w is v·w
  ACTROW v: h0 ... h(m-1)      n lines
  INS h v                      m lines
  HNAME i name                 optional
  VNAME j name                 optional
Letter map (.lm):
  LETTER label v
Wreath letter table (.gt):
  G label h2 v1
Accepting set (.accept):
  ACCEPT i ...
Word automaton:
  DFA
  STATES n
  START i
  ACCEPT i ...
  STATE q v ...                the context values the state stands for
  TRANS q label q'
Forest:
  a[b, c[d]], e                {} is the empty forest; labels avoid blanks and []{},
";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError { line, message: message.into() })
}

/// Non-empty lines with comments removed, numbered from 1.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let words: Vec<&str> = l.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

fn num(line: usize, w: &str) -> Result<usize, FormatError> {
    w.parse().or_else(|_| err(line, format!("expected a number, found `{w}`")))
}

fn label(line: usize, w: &str) -> Result<Label, FormatError> {
    Label::new(w).or_else(|_| err(line, format!("bad label `{w}`")))
}

fn arity(line: usize, words: &[&str], n: usize) -> Result<(), FormatError> {
    if words.len() == n {
        Ok(())
    } else {
        err(line, format!("{} takes {} arguments", words[0], n - 1))
    }
}

/// `KEY i: x y z` with `i` the row index.
fn row(line: usize, words: &[&str]) -> Result<(usize, Vec<usize>), FormatError> {
    let Some(head) = words.get(1).and_then(|w| w.strip_suffix(':')) else {
        return err(line, format!("{} needs an index followed by `:`", words[0]));
    };
    let i = num(line, head)?;
    let entries = words[2..].iter().map(|w| num(line, w)).collect::<Result<_, _>>()?;
    Ok((i, entries))
}

fn place<T: Clone>(
    line: usize,
    what: &str,
    slots: &mut [Option<T>],
    i: usize,
    value: T,
) -> Result<(), FormatError> {
    match slots.get_mut(i) {
        None => err(line, format!("{what} {i} out of range")),
        Some(Some(_)) => err(line, format!("duplicate {what} {i}")),
        Some(slot) => {
            *slot = Some(value);
            Ok(())
        }
    }
}

fn complete<T>(slots: Vec<Option<T>>, what: &str) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::with_capacity(slots.len());
    for (i, s) in slots.into_iter().enumerate() {
        match s {
            Some(x) => out.push(x),
            None => return err(0, format!("missing {what} {i}")),
        }
    }
    Ok(out)
}

pub fn parse_algebra(text: &str) -> Result<FiniteForestAlgebra, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, w)) if w == ["FA", "1"] => {}
        Some((l, _)) => return err(l, "expected header `FA 1`"),
        None => return err(0, "empty file"),
    }
    let (mut m, mut n, mut zero, mut one) = (None, None, None, None);
    let mut add: Vec<Option<Vec<usize>>> = Vec::new();
    let mut mul: Vec<Option<Vec<usize>>> = Vec::new();
    let mut act: Vec<Option<Vec<usize>>> = Vec::new();
    let mut ins: Vec<Option<usize>> = Vec::new();
    let mut hnames = BTreeMap::new();
    let mut vnames = BTreeMap::new();
    for (l, w) in it {
        let sizes = |m: Option<usize>, n: Option<usize>| match (m, n) {
            (Some(m), Some(n)) => Ok((m, n)),
            _ => err(l, format!("{} before H and V", w[0])),
        };
        match w[0] {
            "H" | "V" => {
                arity(l, &w, 2)?;
                let k = num(l, w[1])?;
                let slot = if w[0] == "H" { &mut m } else { &mut n };
                if slot.replace(k).is_some() {
                    return err(l, format!("duplicate {}", w[0]));
                }
                if let (Some(m), Some(n)) = (m, n) {
                    add = vec![None; m];
                    mul = vec![None; n];
                    act = vec![None; n];
                    ins = vec![None; m];
                }
            }
            "ZERO" => {
                arity(l, &w, 2)?;
                zero = Some(num(l, w[1])?);
            }
            "ONE" => {
                arity(l, &w, 2)?;
                one = Some(num(l, w[1])?);
            }
            "ADDROW" | "MULROW" | "ACTROW" => {
                let (m, n) = sizes(m, n)?;
                let (i, entries) = row(l, &w)?;
                let (slots, width) = match w[0] {
                    "ADDROW" => (&mut add, m),
                    "MULROW" => (&mut mul, n),
                    _ => (&mut act, m),
                };
                if entries.len() != width {
                    return err(l, format!("{} {i} has {} entries, expected {width}", w[0], entries.len()));
                }
                place(l, w[0], slots, i, entries)?;
            }
            "INS" => {
                sizes(m, n)?;
                arity(l, &w, 3)?;
                place(l, "INS", &mut ins, num(l, w[1])?, num(l, w[2])?)?;
            }
            "HNAME" | "VNAME" => {
                arity(l, &w, 3)?;
                let names = if w[0] == "HNAME" { &mut hnames } else { &mut vnames };
                names.insert(num(l, w[1])?, w[2].to_string());
            }
            other => return err(l, format!("unknown directive `{other}`")),
        }
    }
    let (Some(_), Some(_)) = (m, n) else { return err(0, "missing H or V") };
    let tables = Tables {
        add: complete(add, "ADDROW")?,
        mul: complete(mul, "MULROW")?,
        act: complete(act, "ACTROW")?,
        ins: complete(ins, "INS")?,
        zero: zero.map_or_else(|| err(0, "missing ZERO"), Ok)?,
        one: one.map_or_else(|| err(0, "missing ONE"), Ok)?,
    };
    let mut a = FiniteForestAlgebra::from_tables(tables).or_else(|e| err(0, e.to_string()))?;
    for (i, name) in hnames {
        if i >= a.h_size() {
            return err(0, format!("HNAME {i} out of range"));
        }
        a.set_h_name(i, name);
    }
    for (i, name) in vnames {
        if i >= a.v_size() {
            return err(0, format!("VNAME {i} out of range"));
        }
        a.set_v_name(i, name);
    }
    Ok(a)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_algebra(a: &FiniteForestAlgebra) -> String {
    let t = a.tables();
    let mut s = String::from("FA 1\n");
    let _ = writeln!(s, "H {}\nV {}\nZERO {}\nONE {}", a.h_size(), a.v_size(), t.zero, t.one);
    for (i, r) in t.add.iter().enumerate() {
        let _ = writeln!(s, "ADDROW {i}: {}", join(r));
    }
    for (i, r) in t.mul.iter().enumerate() {
        let _ = writeln!(s, "MULROW {i}: {}", join(r));
    }
    for (i, r) in t.act.iter().enumerate() {
        let _ = writeln!(s, "ACTROW {i}: {}", join(r));
    }
    for (h, v) in t.ins.iter().enumerate() {
        let _ = writeln!(s, "INS {h} {v}");
    }
    for (i, name) in a.h_names() {
        let _ = writeln!(s, "HNAME {i} {name}");
    }
    for (i, name) in a.v_names() {
        let _ = writeln!(s, "VNAME {i} {name}");
    }
    s
}

pub fn parse_letter_map(text: &str) -> Result<LetterMap, FormatError> {
    let mut map = BTreeMap::new();
    for (l, w) in lines(text) {
        if w[0] != "LETTER" {
            return err(l, format!("unknown directive `{}`", w[0]));
        }
        arity(l, &w, 3)?;
        if map.insert(label(l, w[1])?, num(l, w[2])?).is_some() {
            return err(l, format!("duplicate letter `{}`", w[1]));
        }
    }
    Ok(LetterMap::new(map))
}

pub fn write_letter_map(lm: &LetterMap) -> String {
    lm.iter().map(|(l, v)| format!("LETTER {l} {v}\n")).collect()
}

/// Checks that every letter points into `a`.
pub fn check_letter_map(lm: &LetterMap, a: &FiniteForestAlgebra) -> Result<(), FormatError> {
    match lm.iter().find(|&(_, v)| v >= a.v_size()) {
        Some((l, v)) => err(0, format!("letter `{l}` maps to {v}, but |V| = {}", a.v_size())),
        None => Ok(()),
    }
}

pub fn parse_gtable(text: &str) -> Result<GTable, FormatError> {
    let mut g = GTable::new();
    for (l, w) in lines(text) {
        if w[0] != "G" {
            return err(l, format!("unknown directive `{}`", w[0]));
        }
        arity(l, &w, 4)?;
        g.set(label(l, w[1])?, num(l, w[2])?, num(l, w[3])?);
    }
    Ok(g)
}

pub fn write_gtable(g: &GTable) -> String {
    g.iter().map(|(l, h, v)| format!("G {l} {h} {v}\n")).collect()
}

pub fn parse_accept(text: &str) -> Result<BTreeSet<HElem>, FormatError> {
    let mut out = BTreeSet::new();
    for (l, w) in lines(text) {
        if w[0] != "ACCEPT" {
            return err(l, format!("unknown directive `{}`", w[0]));
        }
        for x in &w[1..] {
            out.insert(num(l, x)?);
        }
    }
    Ok(out)
}

pub fn write_accept(acc: &BTreeSet<HElem>) -> String {
    let xs: Vec<usize> = acc.iter().copied().collect();
    format!("ACCEPT {}", join(&xs)).trim_end().to_string() + "\n"
}

/// Reads `1,3` or `1 3` as a set of indices.
pub fn parse_index_list(text: &str) -> Result<BTreeSet<usize>, FormatError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| num(0, w))
        .collect()
}

/// Parses the word automaton format. The alphabet order is the order of the
/// transitions out of state 0.
pub fn parse_dfa(text: &str) -> Result<WordDfa, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, w)) if w == ["DFA"] => {}
        Some((l, _)) => return err(l, "expected header `DFA`"),
        None => return err(0, "empty file"),
    }
    let (mut n, mut start) = (None, None);
    let mut accept = BTreeSet::new();
    let mut states: Vec<BTreeSet<usize>> = Vec::new();
    let mut trans: Vec<(usize, usize, Label, usize)> = Vec::new();
    for (l, w) in it {
        match w[0] {
            "STATES" => {
                arity(l, &w, 2)?;
                let k = num(l, w[1])?;
                n = Some(k);
                states = vec![BTreeSet::new(); k];
            }
            "START" => {
                arity(l, &w, 2)?;
                start = Some(num(l, w[1])?);
            }
            "ACCEPT" => {
                for x in &w[1..] {
                    accept.insert(num(l, x)?);
                }
            }
            "STATE" => {
                let Some(k) = n else { return err(l, "STATE before STATES") };
                let q = num(l, w.get(1).copied().unwrap_or(""))?;
                if q >= k {
                    return err(l, format!("state {q} out of range"));
                }
                for x in &w[2..] {
                    states[q].insert(num(l, x)?);
                }
            }
            "TRANS" => {
                arity(l, &w, 4)?;
                trans.push((l, num(l, w[1])?, label(l, w[2])?, num(l, w[3])?));
            }
            other => return err(l, format!("unknown directive `{other}`")),
        }
    }
    let Some(n) = n else { return err(0, "missing STATES") };
    let Some(start) = start else { return err(0, "missing START") };
    if start >= n {
        return err(0, format!("start state {start} out of range"));
    }
    if let Some(q) = accept.iter().find(|&&q| q >= n) {
        return err(0, format!("accepting state {q} out of range"));
    }
    let mut alphabet: Vec<Label> = Vec::new();
    for (_, q, a, _) in &trans {
        if *q == 0 && !alphabet.contains(a) {
            alphabet.push(a.clone());
        }
    }
    let mut table = vec![vec![None; alphabet.len()]; n];
    for (l, q, a, r) in trans {
        if q >= n || r >= n {
            return err(l, "state out of range");
        }
        let Some(i) = alphabet.iter().position(|x| *x == a) else {
            return err(l, format!("letter `{a}` has no transition from state 0"));
        };
        if table[q][i].replace(r).is_some() {
            return err(l, format!("duplicate transition from {q} on `{a}`"));
        }
    }
    let mut rows = Vec::with_capacity(n);
    for (q, r) in table.into_iter().enumerate() {
        let row: Option<Vec<usize>> = r.into_iter().collect();
        match row {
            Some(row) => rows.push(row),
            None => return err(0, format!("state {q} is missing a transition")),
        }
    }
    Ok(WordDfa { alphabet, states, start, accept, trans: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pathlang::pi_automaton;

    #[test]
    fn algebras_round_trip() {
        for fx in fixtures::builtin_algebras() {
            let text = write_algebra(&fx.algebra);
            let back = parse_algebra(&text).unwrap();
            assert_eq!(back, fx.algebra, "{}", fx.name);
            assert_eq!(write_algebra(&back), text);
            let lm = parse_letter_map(&write_letter_map(&fx.letters)).unwrap();
            assert_eq!(lm, fx.letters);
            check_letter_map(&lm, &back).unwrap();
            assert_eq!(parse_accept(&write_accept(&fx.accept)).unwrap(), fx.accept);
        }
    }

    #[test]
    fn algebra_errors_carry_lines() {
        let text = "FA 1\nH 1\nV 1\nZERO 0\nONE 0\nADDROW 0: 0\nMULROW 0: 0\nACTROW 0: 0 0\nINS 0 0\n";
        let e = parse_algebra(text).unwrap_err();
        assert_eq!(e.line, 8);
        let e = parse_algebra("FA 2\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_algebra("FA 1\nH 1\nV 1\nBOGUS\n").unwrap_err();
        assert_eq!(e.line, 4);
        let e = parse_algebra("FA 1\nH 1\nV 1\nZERO 0\nONE 0\nADDROW 0: 0\nMULROW 0: 0\nACTROW 0: 0\n").unwrap_err();
        assert!(e.message.contains("INS"), "{e}");
        let ok = "# tiny\nFA 1\nH 1\nV 1\nZERO 0\nONE 0\nADDROW 0: 0\nMULROW 0: 0\nACTROW 0: 0\nINS 0 0\nHNAME 0 z\n";
        assert_eq!(parse_algebra(ok).unwrap().h_name(0), "z");
    }

    #[test]
    fn small_files() {
        assert_eq!(parse_letter_map("LETTER a 2\nLETTER b 0 # c\n").unwrap().len(), 2);
        assert_eq!(parse_letter_map("LETTER a 2\nLETTER a 1\n").unwrap_err().line, 2);
        let g = parse_gtable("G b 0 2\nG b 1 0\n").unwrap();
        assert_eq!(parse_gtable(&write_gtable(&g)).unwrap(), g);
        assert_eq!(parse_accept("ACCEPT\n").unwrap(), BTreeSet::new());
        assert_eq!(write_accept(&BTreeSet::new()), "ACCEPT\n");
        assert_eq!(parse_index_list("1,3").unwrap(), BTreeSet::from([1, 3]));
    }

    #[test]
    fn dfas_round_trip() {
        let a = fixtures::bool_or();
        let lm = crate::twodist::canonical_self_morphism(&a);
        for acc in [BTreeSet::new(), BTreeSet::from([0]), BTreeSet::from([1])] {
            let dfa = pi_automaton(&a, &lm, &acc);
            let text = dfa.to_text();
            assert_eq!(parse_dfa(&text).unwrap(), dfa);
        }
        assert_eq!(parse_dfa("DFA\nSTATES 1\nSTART 0\nTRANS 0 a 1\n").unwrap_err().line, 4);
    }
}
