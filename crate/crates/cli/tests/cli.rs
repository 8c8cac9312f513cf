use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_forestalg")).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8(out.stdout).expect("utf-8"))
}

fn run_path(args: &[&dyn AsRef<std::ffi::OsStr>]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_forestalg")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf-8"),
        String::from_utf8(out.stderr).expect("utf-8"),
    )
}

/// Compares with `tests/golden/<name>`; `UPDATE_GOLDENS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert_eq!(actual, expected, "golden {name}");
}

fn emit(dir: &Path, name: &str) -> (PathBuf, PathBuf, PathBuf) {
    let (code, _, err) = run_path(&[&"fixtures", &"emit", &name, &"-o", &dir]);
    assert_eq!(code, 0, "{err}");
    (dir.join(format!("{name}.fa")), dir.join(format!("{name}.lm")), dir.join(format!("{name}.accept")))
}

#[test]
fn fixtures_list() {
    let (code, out) = run(&["fixtures", "list"]);
    assert_eq!(code, 0);
    golden("fixtures_list.txt", &out);
}

#[test]
fn emitted_fixtures_validate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["one", "bool-or", "chain3", "sibling-pair", "switch", "b-has-c-child"] {
        let (fa, lm, acc) = emit(dir.path(), name);
        let (code, out, _) = run_path(&[&"validate", &fa]);
        assert_eq!(code, 0, "{name}\n{out}");
        let text = fs::read_to_string(&fa).unwrap();
        let a = forestalg::format::parse_algebra(&text).unwrap();
        assert_eq!(forestalg::format::write_algebra(&a), text);
        forestalg::format::parse_letter_map(&fs::read_to_string(lm).unwrap()).unwrap();
        forestalg::format::parse_accept(&fs::read_to_string(acc).unwrap()).unwrap();
    }
    let (code, _, err) = run_path(&[&"fixtures", &"emit", &"nope", &"-o", &dir.path()]);
    assert_eq!(code, 3);
    assert!(err.contains("unknown fixture"));
}

#[test]
fn validate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (fa, _, _) = emit(dir.path(), "bool-or");
    let (code, out, _) = run_path(&[&"validate", &fa]);
    assert_eq!(code, 0);
    golden("validate_bool_or.txt", &out);
    let (code, _, err) = run_path(&[&"validate", &data("bad.fa")]);
    assert_eq!(code, 3);
    assert!(err.contains("bad.fa: line 9"), "{err}");
}

#[test]
fn checks() {
    let dir = tempfile::tempdir().unwrap();
    let (bool_or, _, _) = emit(dir.path(), "bool-or");
    let (switch, _, _) = emit(dir.path(), "switch");
    let (pair, _, _) = emit(dir.path(), "sibling-pair");
    let (code, out, _) = run_path(&[&"check", &"2-distributive", &bool_or]);
    assert_eq!(code, 0);
    golden("check_2dist_bool_or.txt", &out);
    let (code, out, _) = run_path(&[&"check", &"2-distributive", &switch]);
    assert_eq!(code, 1);
    golden("check_2dist_switch.txt", &out);
    let (code, out, _) = run_path(&[&"check", &"2-distributive", &switch, &"--cap", &"2"]);
    assert_eq!(code, 2);
    assert!(out.starts_with("inconclusive"));
    let (code, out, _) = run_path(&[&"check", &"distributive", &pair]);
    assert_eq!(code, 1);
    golden("check_dist_sibling_pair.txt", &out);
    let (code, out, _) = run_path(&[&"check", &"horizontal", &pair]);
    assert_eq!((code, out.as_str()), (0, "yes\n"));
}

#[test]
fn psi_and_pi() {
    let (code, out, _) = run_path(&[&"psi", &data("figure.forest")]);
    assert_eq!(code, 0);
    assert_eq!(out, "a[b[b,c[d]],c[a[a,b,c]]]\n");
    let (_, out, _) = run_path(&[&"pi", &data("empty.forest")]);
    assert_eq!(out, "ε\n");
    let (_, out, _) = run_path(&[&"pi", &data("figure.forest")]);
    golden("pi_figure.txt", &out);
    let (code, _, err) = run_path(&[&"psi", &data("missing.forest")]);
    assert_eq!(code, 3);
    assert!(err.contains("missing.forest"));
}

#[test]
fn paths_automaton() {
    let dir = tempfile::tempdir().unwrap();
    let (fa, lm, _) = emit(dir.path(), "bool-or");
    let dot = dir.path().join("a.dot");
    let (code, out, _) = run_path(&[&"paths", &fa, &lm, &"--accept", &"1", &"--dot", &dot]);
    assert_eq!(code, 0);
    golden("paths_bool_or.txt", &out);
    let dfa = forestalg::format::parse_dfa(&out).unwrap();
    assert_eq!(dfa.to_text(), out);
    assert!(fs::read_to_string(dot).unwrap().starts_with("digraph"));
    let (code, _, _) = run_path(&[&"paths", &fa, &lm, &"--accept", &"7"]);
    assert_eq!(code, 3);
}

#[test]
fn wreaths() {
    let dir = tempfile::tempdir().unwrap();
    let (bool_or, _, _) = emit(dir.path(), "bool-or");
    let (switch, _, _) = emit(dir.path(), "switch");
    let out_fa = dir.path().join("w.fa");
    let (code, out, _) = run_path(&[&"wreath", &bool_or, &bool_or, &"-o", &out_fa]);
    assert_eq!(code, 0);
    assert_eq!(out, "|H| = 4\n|V| = 27\n");
    assert_eq!(run_path(&[&"validate", &out_fa]).0, 0);
    let gen = dir.path().join("g.fa");
    let (code, out, _) = run_path(&[
        &"wreath",
        &bool_or,
        &bool_or,
        &"-o",
        &gen,
        &"--generated",
        &data("right.lm"),
        &data("letters.gt"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "|H| = 4\n|V| = 8\n");
    assert_eq!(run_path(&[&"validate", &gen]).0, 0);
    let (code, _, _) = run_path(&[&"check", &"2-distributive", &gen]);
    assert_eq!(code, 0);
    let (code, out, _) = run_path(&[&"derived", &gen, &dir.path().join("g.lm"), &bool_or, &data("right.lm"), &"--check", &"local-dist"]);
    assert_eq!(code, 0, "{out}");
    let (code, _, err) = run_path(&[&"wreath", &switch, &switch, &"-o", &out_fa]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn derived_categories() {
    let dir = tempfile::tempdir().unwrap();
    let (fa, lm, _) = emit(dir.path(), "bool-or");
    let (pair, pair_lm, _) = emit(dir.path(), "sibling-pair");
    let (one, _, _) = emit(dir.path(), "one");
    let (code, out, _) = run_path(&[&"derived", &fa, &lm, &fa, &lm, &"--summary", &"--check", &"local-dist"]);
    assert_eq!(code, 0);
    golden("derived_bool_or.txt", &out);
    let trivial = dir.path().join("trivial.lm");
    let letters = fs::read_to_string(&pair_lm).unwrap();
    let zeroed: String = letters
        .lines()
        .map(|l| {
            let mut w: Vec<&str> = l.split_whitespace().collect();
            w[2] = "0";
            w.join(" ") + "\n"
        })
        .collect();
    fs::write(&trivial, zeroed).unwrap();
    let (code, out, _) = run_path(&[&"derived", &pair, &pair_lm, &one, &trivial, &"--check", &"local-dist"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("locally distributive: no"));
}

#[test]
fn oracle_suites() {
    let (code, out) = run(&["oracle", "psi", "--seed", "4", "--budget", "200"]);
    assert_eq!(code, 0);
    golden("oracle_psi.txt", &out);
    assert_eq!(run(&["oracle", "psi", "--seed", "4", "--budget", "200"]).1, out);
    let (code, out) = run(&["oracle", "pi", "--max-height", "3", "--max-nodes", "5"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(run(&["oracle", "nope"]).0, 3);
}

#[test]
fn usage_and_info() {
    assert_eq!(run(&[]).0, 3);
    assert_eq!(run(&["bogus"]).0, 3);
    assert_eq!(run(&["check", "nonsense", "x.fa"]).0, 3);
    let (code, out) = run(&["--formats"]);
    assert_eq!(code, 0);
    assert!(out.contains("ADDROW") && out.contains("TRANS"));
    let (code, out) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("forestalg "));
}
