use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isinglace")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn corpus_writes_the_default_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["corpus", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let files = fs::read_dir(dir.path().join("corpus")).unwrap().count();
    assert_eq!(files, 22);
}

#[test]
fn identities_pass_and_csv_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["run", "identities", "--out", arg(d.path()), "--threads", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = fs::read(a.path().join("identities.csv")).unwrap();
    assert_eq!(csv, fs::read(b.path().join("identities.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",pass,")));
    assert!(fs::read_to_string(a.path().join("summary.txt")).unwrap().starts_with("identities"));
}

#[test]
fn tree_corpus_reconstructs_zero() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("graphs");
    fs::create_dir(&corpus).unwrap();
    fs::write(
        corpus.join("star_b0.7.toml"),
        "beta = 0.7\nvertices = [\"c\", \"l1\", \"l2\", \"l3\"]\nbonds = [[\"c\", \"l1\", 1.0], [\"c\", \"l2\", 1.0], [\"c\", \"l3\", 0.5]]\n",
    )
    .unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, format!("corpus = {:?}\n", arg(&corpus))).unwrap();
    let out = run(&["--config", arg(&config), "run", "lace", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("lace.csv")).unwrap();
    let recon: Vec<&str> = csv.lines().filter(|l| l.contains("reconstruction")).collect();
    assert_eq!(recon.len(), 2);
    assert!(recon.iter().all(|l| l.starts_with("lace,star@0.7,") && l.contains(",0e0,0e0,0e0,pass,")));
}

#[test]
fn negated_two_point_entry_fails_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "betas = [0.5]\nnegate_g_entry = [0, 1]\n").unwrap();
    let out = run(&["--config", arg(&config), "run", "theorems", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("theorems.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",fail,precondition: negative field entry")));
}

#[test]
fn small_cap_skips_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "identities", "--cap", "4", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("identities,grid-2x3@0.1,") && l.contains(",skip,")));
    assert!(csv.lines().any(|l| l.starts_with("identities,triangle@0.1,") && l.contains(",pass,")));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[tolerances]\nidentity_rtol = -1.0\n").unwrap();
    assert_eq!(run(&["--config", arg(&config), "run", "identities"]).status.code(), Some(2));
    assert_eq!(run(&["--config", arg(&dir.path().join("missing.toml")), "run", "lace"]).status.code(), Some(2));
}
