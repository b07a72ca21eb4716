use std::fs;
use std::path::Path;
use std::process::Command;

const TINY: &str = "folds = 2\n[world]\ntrain_size = 60\ntest_size = 30\n[rl]\npretrain_runs = 2\n";

fn vislearn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vislearn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = vislearn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(tree(&p));
        } else {
            files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn experiment_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let stdout = ok(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", a.to_str().unwrap()]);
    assert!(stdout.starts_with("condition\t"));
    ok(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", b.to_str().unwrap()]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.iter().any(|(n, _)| n == "manifest.toml"));
    assert!(ta.iter().any(|(n, _)| n.ends_with("_dialogue.qtable")));
    assert_eq!(ta, tb);
}

#[test]
fn train_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let q = tmp.path().join("q");
    ok(&["train", "--config", cfg.to_str().unwrap(), "--out", q.to_str().unwrap()]);
    let curves = fs::read_to_string(q.join("training_curves.tsv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 2 * 6);
    let e = tmp.path().join("e");
    let stdout = ok(&[
        "eval", "--config", cfg.to_str().unwrap(), "--conditions", "rl,decay05", "--qtables", q.to_str().unwrap(),
        "--out", e.to_str().unwrap(),
    ]);
    assert!(stdout.contains("\nrl\t2\t"));
    assert!(stdout.contains("\ndecay05\t2\t"));
}

#[test]
fn gen_data_writes_objects() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data.tsv");
    ok(&["gen-data", "--seed", "4", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 600);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "folds = 0\n").unwrap();
    let out = vislearn(&["experiment", "--config", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("folds"));
    let out = vislearn(&["experiment", "--conditions", "greedy", "--out", "x"]);
    assert!(!out.status.success());
    let out = vislearn(&["eval", "--conditions", "rl", "--out", tmp.path().join("e").to_str().unwrap()]);
    assert!(!out.status.success());
}
