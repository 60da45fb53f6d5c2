use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ezgp::harness::{replication, Example};
use ezgp::{save_dataset, Dataset};

fn ezgp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ezgp"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example4_files(dir: &Path) {
    let r = replication(Example::Ex4, 0, 0).unwrap();
    save_dataset(&r.train, dir.join("train.csv")).unwrap();
    let t = Dataset::new(r.train.schema().clone(), r.test[..10].to_vec(), r.test_y[..10].to_vec()).unwrap();
    save_dataset(&t, dir.join("test.csv")).unwrap();
}

const FIVE_RUN: &str = "x1,z1,z2,z3,z4,y\n0.1,1,3,3,1,1\n0.3,1,2,1,3,2\n0.2,2,2,3,1,3\n0.9,2,2,3,2,4\n0.5,1,2,3,1,5\n";

#[test]
fn fit_then_predict_reproduces_training_responses() {
    let dir = tempfile::tempdir().unwrap();
    example4_files(dir.path());
    let o = ezgp(&["fit", "--train", "train.csv", "--kind", "eezgp", "--out", "m.json", "--starts", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("objective") && out.contains("nugget") && out.contains("parameters"));
    let o = ezgp(&["predict", "--model", "m.json", "--targets", "train.csv", "--out", "p.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let preds = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let train = fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert!(preds.starts_with("x1,x2,x3,z1,z2,z3,mean,mse\n"));
    for (p, t) in preds.lines().skip(1).zip(train.lines().skip(1)) {
        let mean: f64 = p.split(',').nth(6).unwrap().parse().unwrap();
        let y: f64 = t.split(',').nth(6).unwrap().parse().unwrap();
        assert!((mean - y).abs() < 1e-5, "{mean} vs {y}");
    }
}

#[test]
fn fit_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    example4_files(dir.path());
    for (out, threads) in [("a.json", "1"), ("b.json", "3")] {
        let o = ezgp(&["fit", "--train", "train.csv", "--out", out, "--starts", "3", "--seed", "5", "--threads", threads], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn malformed_level_exits_2_with_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "x1,z1,y\n0.1,1,1.0\n0.2,7,2.0\n").unwrap();
    let o = ezgp(&["fit", "--train", "bad.csv", "--schema", "1,1,3", "--out", "m.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn constant_response_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("flat.csv"), "x1,z1,y\n0.1,1,1.0\n0.5,2,1.0\n0.9,1,1.0\n").unwrap();
    let o = ezgp(&["fit", "--train", "flat.csv", "--out", "m.json"], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn predict_handles_empty_and_invalid_targets() {
    let dir = tempfile::tempdir().unwrap();
    example4_files(dir.path());
    let o = ezgp(&["fit", "--train", "train.csv", "--kind", "ec", "--out", "m.json", "--starts", "1"], dir.path());
    assert_eq!(code(&o), 0);
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = ezgp(&["predict", "--model", "m.json", "--targets", "empty.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().skip(1).count(), 0);
    fs::write(dir.path().join("bad.csv"), "x1,x2,x3,z1,z2,z3\n0.1,0.2,0.3,1,4,1\n").unwrap();
    let o = ezgp(&["predict", "--model", "m.json", "--targets", "bad.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("z2"), "{}", stderr(&o));
}

#[test]
fn lezgp_logs_subset_and_checks_ns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), FIVE_RUN).unwrap();
    fs::write(dir.path().join("t.csv"), "x1,z1,z2,z3,z4\n0.3,1,2,3,1\n").unwrap();
    let schema = ["--schema", "1,4,3,3,3,3"];
    let mut args = vec!["lezgp", "--train", "d.csv", "--targets", "t.csv", "--n-s", "3"];
    args.extend(schema);
    let o = ezgp(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("n_s=3, |K_s|=3"), "{}", stderr(&o));

    let mut args = vec!["lezgp", "--train", "d.csv", "--targets", "t.csv", "--n-s", "5"];
    args.extend(schema);
    assert_eq!(code(&ezgp(&args, dir.path())), 2);

    fs::write(dir.path().join("far.csv"), "x1,z1,z2,z3,z4\n0.3,3,1,1,3\n").unwrap();
    let mut args = vec!["lezgp", "--train", "d.csv", "--targets", "far.csv", "--n-s", "4"];
    args.extend(schema);
    let o = ezgp(&args, dir.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("[3, 1, 1, 3]"), "{}", stderr(&o));
}

#[test]
fn lezgp_recommends_seven_on_the_full_factorial() {
    let dir = tempfile::tempdir().unwrap();
    let r = replication(Example::Ex6, 0, 0).unwrap();
    save_dataset(&r.train, dir.path().join("train.csv")).unwrap();
    let t = Dataset::new(r.train.schema().clone(), r.test[..3].to_vec(), r.test_y[..3].to_vec()).unwrap();
    save_dataset(&t, dir.path().join("t.csv")).unwrap();
    let o = ezgp(&["lezgp", "--train", "train.csv", "--targets", "t.csv", "--starts", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("n_s=7, |K_s|=163"), "{}", stderr(&o));
}

#[test]
fn bench_rows_and_unknown_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezgp(
        &["bench", "--example", "4", "--reps", "2", "--models", "ezgp,ec", "--out", "r.csv", "--starts", "2"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(String::from_utf8(o.stdout).unwrap().contains("rmse_med"));
    let o = ezgp(&["bench", "--example", "4", "--models", "ezgp,gp"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ad_uc"), "{}", stderr(&o));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["ezgp", "eezgp"] {
        let o = ezgp(&["gradcheck", "--kind", kind, "--p", "2", "--q", "2", "--m", "2,2", "--n", "6"], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    let o = ezgp(&["gradcheck", "--corrupt-gradient"], dir.path());
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL: coordinate"));
}

#[test]
fn demo_phistar_reports_reversal() {
    let dir = tempfile::tempdir().unwrap();
    let o = ezgp(&["demo-phistar", "--draws", "20"], dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("0.0497871"));
    assert!(out.contains("reversed: true"));
    assert!(out.contains("20/20 reversed"));
}
