//! Runs every `$ lmg` line of the README and compares the result with
//! `tests/golden/`. Set `LMG_BLESS=1` to rewrite the golden files.

use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lmg");

struct Example {
    args: Vec<String>,
    shown: Vec<String>,
}

fn readme_examples() -> Vec<Example> {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(readme).unwrap();
    let mut out: Vec<Example> = Vec::new();
    let mut inside = false;
    for line in text.lines() {
        if line.starts_with("```") {
            inside = line.trim() == "```console";
            continue;
        }
        if !inside {
            continue;
        }
        if let Some(cmd) = line.strip_prefix("$ lmg ") {
            out.push(Example { args: cmd.split_whitespace().map(String::from).collect(), shown: Vec::new() });
        } else if let Some(last) = out.last_mut() {
            last.shown.push(line.to_string());
        }
    }
    out
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn out_flag(args: &[String]) -> Option<&str> {
    args.iter().position(|a| a == "--out").map(|k| args[k + 1].as_str())
}

/// Splits on separators and compares numeric tokens with a relative tolerance.
fn same(actual: &str, expected: &str) -> Result<(), String> {
    let a: Vec<&str> = actual.lines().collect();
    let e: Vec<&str> = expected.lines().collect();
    if a.len() != e.len() {
        return Err(format!("{} lines, expected {}", a.len(), e.len()));
    }
    for (k, (la, le)) in a.iter().zip(&e).enumerate() {
        let split = |s: &'static str| move |c: char| s.contains(c);
        let ta: Vec<&str> = la.split(split(", =:\"[]{}")).filter(|t| !t.is_empty()).collect();
        let te: Vec<&str> = le.split(split(", =:\"[]{}")).filter(|t| !t.is_empty()).collect();
        if ta.len() != te.len() {
            return Err(format!("line {k}: {la:?} vs {le:?}"));
        }
        for (x, y) in ta.iter().zip(&te) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) if u.is_nan() && v.is_nan() => {}
                (Ok(u), Ok(v)) => {
                    if (u - v).abs() > 1e-9 * u.abs().max(v.abs()).max(1e-3) {
                        return Err(format!("line {k}: {u} vs {v}"));
                    }
                }
                _ if x == y => {}
                _ => return Err(format!("line {k}: {x:?} vs {y:?}")),
            }
        }
    }
    Ok(())
}

#[test]
fn readme_examples_match_golden_files() {
    let examples = readme_examples();
    assert!(examples.len() >= 10, "found {} examples", examples.len());
    let work = tempfile::tempdir().unwrap();
    let bless = std::env::var_os("LMG_BLESS").is_some();
    for (k, ex) in examples.iter().enumerate() {
        let run = Command::new(BIN).args(&ex.args).current_dir(work.path()).output().unwrap();
        let label = format!("lmg {}", ex.args.join(" "));
        assert!(run.status.success(), "{label}: {}", String::from_utf8_lossy(&run.stderr));
        let produced = match out_flag(&ex.args) {
            Some(f) => std::fs::read_to_string(work.path().join(f)).unwrap(),
            None => String::from_utf8(run.stdout).unwrap(),
        };
        let golden = golden_dir().join(format!("readme_{k:02}.txt"));
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&golden, &produced).unwrap();
        }
        let expected = std::fs::read_to_string(&golden).unwrap_or_else(|_| panic!("{label}: missing {golden:?}"));
        if let Err(e) = same(&produced, &expected) {
            panic!("{label}: {e}");
        }
        if !ex.shown.is_empty() {
            let shown = ex.shown.join("\n") + "\n";
            if let Err(e) = same(&shown, &expected) {
                panic!("{label}: README output differs from golden: {e}");
            }
        }
    }
}

#[test]
fn mesh_row_count_and_header() {
    let work = tempfile::tempdir().unwrap();
    let run = Command::new(BIN)
        .args(["mesh", "--j", "32", "--state", "highest", "--omega-x", "0:8:81", "--xi-y", "0.5:3:26", "--out", "f.csv"])
        .current_dir(work.path())
        .output()
        .unwrap();
    assert!(run.status.success());
    let text = std::fs::read_to_string(work.path().join("f.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status"));
    assert_eq!(lines.count(), 2106);
}

#[test]
fn curvature_and_mesh_are_deterministic() {
    let work = tempfile::tempdir().unwrap();
    let lmg = |args: &[&str]| {
        let r = Command::new(BIN).args(args).current_dir(work.path()).output().unwrap();
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    };
    let mesh = ["mesh", "--j", "24", "--state", "highest", "--omega-x", "0:6:25", "--xi-y", "0.5:3:11"];
    lmg(&[&["--threads", "1"][..], &mesh, &["--out", "a.csv"]].concat());
    lmg(&[&["--threads", "3"][..], &mesh, &["--out", "b.csv"]].concat());
    let read = |f: &str| std::fs::read(work.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    lmg(&["curvature", "--in", "a.csv", "--out", "r1.csv"]);
    lmg(&["curvature", "--in", "a.csv", "--out", "r2.csv"]);
    assert_eq!(read("r1.csv"), read("r2.csv"));
}

#[test]
fn exit_codes_and_messages() {
    let run = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();
    let r = run(&["mesh", "--j", "4", "--omega-x", "2:1:3", "--xi-y", "0:1:3"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--omega-x"));
    let r = run(&["hp", "broken", "--j", "8", "--omega-x", "6", "--xi-y", "2.3"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!r.stderr.is_empty());
    let r = run(&["curvature", "--in", "/nonexistent.csv"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("/nonexistent.csv"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
