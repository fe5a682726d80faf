use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpar_core::fixtures::F1_TRIPLES;
use tempfile::TempDir;

fn gpar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpar")).args(args).output().expect("run gpar")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_tsv(dir: &Path, name: &str, rows: &[(&str, &str, &str)]) -> PathBuf {
    let path = dir.join(name);
    let text: String = rows.iter().map(|(h, r, t)| format!("{h}\t{r}\t{t}\n")).collect();
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct F1 {
    dir: TempDir,
    train: PathBuf,
    rules: PathBuf,
}

fn mined_f1(measure: &str) -> F1 {
    let dir = TempDir::new().unwrap();
    let train = write_tsv(dir.path(), "train.txt", &F1_TRIPLES);
    let rules = dir.path().join("rules.tsv");
    let o = gpar(&["mine", "--train", s(&train), "--measure", measure, "--L", "2", "--out", s(&rules)]);
    assert!(o.status.success(), "{}", stderr(&o));
    F1 { dir, train, rules }
}

#[test]
fn mine_writes_expected_rule() {
    let f = mined_f1("dmap");
    let text = fs::read_to_string(&f.rules).unwrap();
    assert!(text.starts_with("#gpar-rules v1 measure=dmap L=2 K=1000\n"), "{text}");
    let line = text
        .lines()
        .find(|l| l.starts_with("located_in\ttail\t") && l.ends_with("x <-[member_of]- z1 -[nationality]-> y"))
        .expect("rule present");
    let value: f64 = line.split('\t').nth(2).unwrap().parse().unwrap();
    assert!((value - 4.0 / 7.0).abs() < 1e-15);
}

#[test]
fn mining_twice_gives_identical_files() {
    let f = mined_f1("fdmap");
    let again = f.dir.path().join("again.tsv");
    let o = gpar(&["mine", "--train", s(&f.train), "--L", "2", "--threads", "3", "--out", s(&again)]);
    assert!(o.status.success());
    assert_eq!(fs::read(&f.rules).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn usage_errors_exit_one() {
    let o = gpar(&["mine", "--L", "2"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = TempDir::new().unwrap();
    let train = write_tsv(dir.path(), "train.txt", &F1_TRIPLES);
    let o = gpar(&["mine", "--train", s(&train), "--K", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("K"), "{}", stderr(&o));

    let o = gpar(&["mine", "--train", s(&train), "--measure", "auc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = gpar(&["stats", "--train", s(&dir.path().join("missing.txt"))]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "a\tr\tb\nonly two\n").unwrap();
    let o = gpar(&["stats", "--train", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2"), "{}", stderr(&o));
}

#[test]
fn unknown_relation_suggests_near_misses() {
    let f = mined_f1("fdmap");
    let o = gpar(&["predict", "--rules", s(&f.rules), "--train", s(&f.train), "A located_on ?"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("located_in"), "{}", stderr(&o));
}

#[test]
fn predict_lists_top_answers_with_explanations() {
    let f = mined_f1("fdmap");
    let o = gpar(&[
        "predict",
        "--rules",
        s(&f.rules),
        "--train",
        s(&f.train),
        "--top",
        "2",
        "A located_in ?",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert!(out.starts_with("#gpar-predict v1 "));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2], "UK");
    assert_eq!(rows[1][2], "FR");
    assert_eq!(rows[0][1], "1");
    assert!(!rows[0][3].is_empty());
}

#[test]
fn explain_reports_rules_or_their_absence() {
    let f = mined_f1("fdmap");
    let base = ["explain", "--rules", s(&f.rules), "--train", s(&f.train), "A located_in ?"];

    let o = gpar(&[&base[..], &["UK"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("x <-[member_of]- z1 -[nationality]-> y"), "{}", stdout(&o));

    let o = gpar(&[&base[..], &["p1"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no supporting rules"));
}

#[test]
fn evaluate_on_inverse_pairs_is_perfect() {
    let dir = TempDir::new().unwrap();
    let train = write_tsv(
        dir.path(),
        "train.txt",
        &[
            ("a", "parent", "b"),
            ("b", "child", "a"),
            ("c", "parent", "d"),
            ("d", "child", "c"),
            ("e", "parent", "f"),
            ("f", "child", "e"),
            ("h", "child", "g"),
        ],
    );
    let test = write_tsv(dir.path(), "test.txt", &[("g", "parent", "h")]);
    let rules = dir.path().join("rules.tsv");
    let o = gpar(&["mine", "--train", s(&train), "--L", "1", "--out", s(&rules)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = dir.path().join("report.txt");
    let args = ["evaluate", "--rules", s(&rules), "--train", s(&train), "--test", s(&test), "--out", s(&report)];
    let o = gpar(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("#gpar-eval v1"), "{out}");
    let mrr = out.lines().find(|l| l.starts_with("mrr\t")).expect("mrr line");
    assert_eq!(mrr.split('\t').nth(1).unwrap().parse::<f64>().unwrap(), 1.0);

    let first = fs::read(&report).unwrap();
    assert!(gpar(&args).status.success());
    assert_eq!(first, fs::read(&report).unwrap());
}

#[test]
fn evaluate_rejects_empty_test() {
    let f = mined_f1("fdmap");
    let test = f.dir.path().join("test.txt");
    fs::write(&test, "").unwrap();
    let o = gpar(&["evaluate", "--rules", s(&f.rules), "--train", s(&f.train), "--test", s(&test)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty split"), "{}", stderr(&o));
}

#[test]
fn stats_counts_splits() {
    let dir = TempDir::new().unwrap();
    let train = write_tsv(dir.path(), "train.txt", &F1_TRIPLES);
    let test = write_tsv(dir.path(), "test.txt", &[("C", "located_in", "DE"), ("C", "located_in", "DE")]);
    let o = gpar(&["stats", "--train", s(&train), "--test", s(&test)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("entities\t9\n"), "{out}");
    assert!(out.contains("relations\t3\n"));
    assert!(out.contains("train\t8\n"));
    assert!(out.contains("test\t1\ntest_raw\t2\n"));
}

#[test]
fn select_l_reports_each_length() {
    let dir = TempDir::new().unwrap();
    let train = write_tsv(
        dir.path(),
        "train.txt",
        &[("a", "parent", "b"), ("b", "child", "a"), ("c", "parent", "d"), ("d", "child", "c"), ("f", "child", "e")],
    );
    let valid = write_tsv(dir.path(), "valid.txt", &[("e", "parent", "f")]);
    let o = gpar(&["select-l", "--train", s(&train), "--valid", s(&valid), "--candidates", "1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("L=1\tvalid_mrr\t"));
    assert!(out.contains("L=2\tvalid_mrr\t"));
    assert!(out.ends_with("best_L\t1\n"), "{out}");
}
