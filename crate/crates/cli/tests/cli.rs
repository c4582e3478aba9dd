use std::path::Path;
use std::process::{Command, Output};

fn tsrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsrep")).args(args).output().expect("spawn tsrep")
}

fn ok(args: &[&str]) -> String {
    let out = tsrep(args);
    assert!(
        out.status.success(),
        "tsrep {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_toy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.tsd");
    let b = dir.path().join("b.tsd");
    ok(&["gen-toy", "--n", "1024", "--seed", "1", "--out", s(&a)]);
    ok(&["gen-toy", "--n", "1024", "--seed", "1", "--out", s(&b)]);
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 1024);
}

#[test]
fn identical_columns_form_one_group() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "dataset,a,b\nd1,0.5,0.5\nd2,0.9,0.9\nd3,0.7,0.7\nd4,0.6,0.6\n").unwrap();
    let out = ok(&["analyze", "--in", s(&scores), "--alpha", "0.1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["groups"], serde_json::json!([[0, 1]]));
    assert_eq!(v["average_ranks"], serde_json::json!([1.5, 1.5]));
}

#[test]
fn analyze_correlates_external_scores() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    let crps = dir.path().join("crps.csv");
    std::fs::write(&scores, "dataset,m1@noaug,m2@noaug,m3@noaug\nd1,0.6,0.7,0.8\nd2,0.5,0.7,0.9\n").unwrap();
    std::fs::write(&crps, "model_id,crps\nm1,0.6\nm2,0.5\nm3,0.4\nunknown,0.1\n").unwrap();
    let out = ok(&["analyze", "--in", s(&scores), "--crps", s(&crps)]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["correlation"]["models"], serde_json::json!(["m1", "m2", "m3"]));
    assert!((v["correlation"]["pearson"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((v["correlation"]["spearman"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(tsrep(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(tsrep(&["embed", "--dataset", "x.tsd", "--unknown-flag"]).status.code(), Some(1));
    assert_eq!(tsrep(&["embed", "--dataset", "x.tsd", "--seq", "median"]).status.code(), Some(1));
    assert_eq!(tsrep(&["analyze", "--in", "x.csv", "--alpha", "1.5"]).status.code(), Some(1));
    assert_eq!(tsrep(&["embed", "--dataset", "/definitely/missing.tsd"]).status.code(), Some(2));
    assert_eq!(tsrep(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "alpha = 3.0\n").unwrap();
    let bad = dir.path().join("bad.tsd");
    std::fs::write(&bad, "a:1,2,x\n").unwrap();
    assert_eq!(tsrep(&["embed", "--dataset", s(&bad), "--config", s(&cfg)]).status.code(), Some(1));
    assert_eq!(tsrep(&["embed", "--dataset", s(&bad)]).status.code(), Some(2));
}

#[test]
fn benchmark_resumes_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let out = dir.path().join("run");
    ok(&["gen-blobs", "--n-per-class", "10", "--dims", "12", "--out", s(&suite)]);
    ok(&["gen-blobs", "--n-per-class", "10", "--dims", "12", "--seed", "9", "--name", "Other", "--out", s(&suite)]);
    let args = ["benchmark", "--suite", s(&suite), "--out", s(&out), "--trees", "20", "--jobs", "2"];
    ok(&args);
    let first = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(first.lines().count(), 1 + 2 * 3);
    for f in ["report.json", "report.md", "report.cdplot", "scores.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    // edit one finished cell; a resumed run must pick the edit up instead of recomputing
    let cells = out.join("cells");
    let mut files: Vec<_> = std::fs::read_dir(&cells).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 6);
    let target = files.iter().find(|p| s(p).contains("Other")).unwrap();
    let mut cell: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    cell["accuracy"] = serde_json::json!(0.125);
    std::fs::write(target, cell.to_string()).unwrap();
    ok(&args);
    let resumed = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(resumed.contains(",0.125,"));

    // a fresh directory reproduces the original run byte for byte
    let again = dir.path().join("again");
    let args2 = ["benchmark", "--suite", s(&suite), "--out", s(&again), "--trees", "20", "--jobs", "1"];
    ok(&args2);
    assert_eq!(std::fs::read_to_string(again.join("results.csv")).unwrap(), first);
}

#[test]
fn train_eval_matches_dtw_flag() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    ok(&["gen-blobs", "--n-per-class", "8", "--dims", "10", "--separation", "6", "--out", s(&suite)]);
    let train = suite.join("Blobs/Blobs_TRAIN.tsd");
    let test = suite.join("Blobs/Blobs_TEST.tsd");
    let out = ok(&["train-eval", "--train", s(&train), "--test", s(&test), "--model", "dtw", "--k", "3"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["model_config"], "DTW (3-NN)");
    assert_eq!(v["status"], "ok");
    let out = ok(&["train-eval", "--train", s(&train), "--test", s(&test), "--stats", "--diff", "--classifier", "knn"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["model_config"], "mock@statdiff");
}

#[test]
fn embed_pca_and_report_chain() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.tsd");
    let emb = dir.path().join("emb.csv");
    let proj = dir.path().join("proj.csv");
    ok(&["gen-toy", "--n", "64", "--seed", "2", "--out", s(&toy)]);
    ok(&["embed", "--dataset", s(&toy), "--stats", "--out", s(&emb)]);
    ok(&["pca", "--in", s(&emb), "--out", s(&proj)]);
    let text = std::fs::read_to_string(&proj).unwrap();
    assert!(text.starts_with("label,pc1,pc2\n"));
    assert_eq!(text.lines().count(), 65);

    // without stats every toy embedding is identical: no principal direction
    ok(&["embed", "--dataset", s(&toy), "--out", s(&emb)]);
    assert_eq!(tsrep(&["pca", "--in", s(&emb)]).status.code(), Some(2));

    let table = dir.path().join("t.csv");
    std::fs::write(
        &table,
        "model,type,zs,univariate_no_aug,univariate_stat_diff,multivariate_no_aug,multivariate_stat_diff,overall_no_aug,overall_stat_diff\n\
         A,Dec,yes,0.80,0.81,0.74,0.74,0.79,0.80\nB,-,-,0.73,0.73,0.72,0.72,0.73,0.73\n",
    )
    .unwrap();
    let md = ok(&["report", "--in", s(&table), "--style", "markdown"]);
    assert!(md.contains("| A | Dec | yes | **0.80** | **0.81** | **0.74** | **0.74** | **0.79** | **0.80** |"));
    assert!(md.contains("| B | - | - | 0.73 | 0.73 | 0.72 | 0.72 | 0.73 | 0.73 |"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.tsd");
    ok(&["gen-toy", "--n", "8", "--seed", "2", "--out", s(&toy)]);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[aggregation]\nlayer = \"mean\"\n[provider]\nkind = \"mock\"\nwidth = 8\n").unwrap();
    let header_width = |text: &str| text.lines().next().unwrap().split(',').count() - 1;
    let from_file = ok(&["embed", "--dataset", s(&toy), "--config", s(&cfg)]);
    assert_eq!(header_width(&from_file), 8);
    let overridden = ok(&["embed", "--dataset", s(&toy), "--config", s(&cfg), "--layer", "concat"]);
    assert_eq!(header_width(&overridden), 4 * 8);
}
