use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use vawe::dataio::{load_embeddings, load_features, load_split, save_embeddings, ClassEmbeddingTable};
use vawe::numerics::{norm, DenseMatrix, Rng};

fn vawe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vawe")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vawe(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

/// Exit code plus the single stderr line.
fn fails(args: &[&str]) -> (i32, String) {
    let out = vawe(args);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error["), "{err}");
    (out.status.code().unwrap(), err)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_writes_four_loadable_files_deterministically() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, &["--seed", "5"]);
    synth(&b, &["--seed", "5"]);
    for f in ["features.txt", "embeddings.txt", "signatures.txt", "split.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(load_features(a.join("features.txt")).unwrap().len(), 40 * 25);
    assert_eq!(load_embeddings(a.join("embeddings.txt")).unwrap().len(), 40);
    assert_eq!(load_embeddings(a.join("signatures.txt")).unwrap().dim(), 32);
    assert_eq!(load_split(a.join("split.txt")).unwrap().unseen().len(), 10);
}

#[test]
fn synth_rejects_too_few_classes() {
    let t = tempfile::tempdir().unwrap();
    let (code, err) = fails(&["synth", "--num-classes", "3", "--out-dir", p(t.path())]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[config]"), "{err}");
}

#[test]
fn consistency_of_signatures_with_themselves_is_k() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &[]);
    let sig = t.path().join("signatures.txt");
    let v = json(&["consistency", "--embeddings", p(&sig), "--signatures", p(&sig), "--k", "10"]);
    assert_eq!(v["consistency"], 10.0);
    assert_eq!(format!("{:.2}", v["consistency"].as_f64().unwrap()), "10.00");
}

fn consistency_at(dir: &Path, k: &str) -> f64 {
    json(&[
        "consistency",
        "--embeddings",
        p(&dir.join("embeddings.txt")),
        "--features",
        p(&dir.join("features.txt")),
        "--k",
        k,
    ])["consistency"]
        .as_f64()
        .unwrap()
}

#[test]
fn consistency_tracks_discrepancy() {
    let t = tempfile::tempdir().unwrap();
    let (zero, four) = (t.path().join("zero"), t.path().join("four"));
    synth(&zero, &["--seed", "3", "--discrepancy-rho", "0", "--noise-sigma", "0"]);
    synth(&four, &["--seed", "3", "--discrepancy-rho", "4"]);
    let c0 = consistency_at(&zero, "10");
    assert_eq!(c0, 10.0);
    assert!(consistency_at(&four, "10") < c0);
}

#[test]
fn consistency_class_mismatch_is_protocol_error() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--num-classes", "12"]);
    let emb = load_embeddings(t.path().join("embeddings.txt")).unwrap();
    let fewer = emb.subset(&emb.class_names()[..11]).unwrap();
    let path = t.path().join("fewer.txt");
    save_embeddings(&fewer, &path).unwrap();
    let (code, err) = fails(&["consistency", "--embeddings", p(&path), "--features", p(&t.path().join("features.txt")), "--k", "3"]);
    assert_eq!(code, 5, "{err}");
}

#[test]
fn malformed_input_is_parse_error() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &[]);
    let bad = t.path().join("bad.txt");
    fs::write(&bad, "2 3\na 1 2 3\nb 1 x 3\n").unwrap();
    let (code, err) = fails(&["consistency", "--embeddings", p(&bad), "--signatures", p(&bad), "--k", "1"]);
    assert_eq!(code, 3);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn mine_dumps_index_triplets() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--num-classes", "16", "--discrepancy-rho", "3"]);
    let d = t.path();
    let text = ok(&[
        "mine", "--embeddings", p(&d.join("embeddings.txt")), "--features", p(&d.join("features.txt")),
        "--k1", "3", "--k2", "6",
    ]);
    assert!(!text.is_empty());
    for line in text.lines() {
        let v: Vec<usize> = line.split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|&i| i < 16));
    }
}

fn train_args<'a>(d: &'a Path, ckpt: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut a = vec!["train", "--embeddings", p_static(d, "embeddings.txt"), "--features", p_static(d, "features.txt"), "--split", p_static(d, "split.txt"), "--checkpoint", ckpt];
    a.extend_from_slice(extra);
    a
}

fn p_static(d: &Path, f: &str) -> &'static str {
    Box::leak(d.join(f).into_os_string().into_string().unwrap().into_boxed_str())
}

#[test]
fn train_on_aligned_data_converges_immediately() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--discrepancy-rho", "0", "--noise-sigma", "0"]);
    let ck = p_static(t.path(), "ck.bin");
    let report = ok(&train_args(t.path(), ck, &[]));
    let lines: Vec<Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["kind"], "config");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["triplets"], 0);
    assert_eq!(lines[2]["stop_reason"], "structure_converged");
}

#[test]
fn train_rerun_gives_identical_checkpoint_and_bad_k2_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path(), &["--num-classes", "20", "--num-unseen", "5"]);
    let flags = ["--k1", "4", "--out-dim", "16", "--max-epochs", "30", "--seed", "7"];
    let (c1, c2) = (p_static(t.path(), "c1.bin"), p_static(t.path(), "c2.bin"));
    let r1 = ok(&train_args(t.path(), c1, &flags));
    let r2 = ok(&train_args(t.path(), c2, &flags));
    assert_eq!(fs::read(c1).unwrap(), fs::read(c2).unwrap());
    assert_eq!(r1.replace(c1, ""), r2.replace(c2, ""));

    let mut best = f64::INFINITY;
    for line in r1.lines().skip(1) {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["kind"] == "epoch" && v["triplets"].as_u64().unwrap() > 0 {
            best = best.min(v["mean_loss"].as_f64().unwrap());
        }
        if v["kind"] == "summary" {
            assert_eq!(v["best_mean_loss"].as_f64().unwrap(), best);
        }
    }

    let c3 = p_static(t.path(), "c3.bin");
    let (code, _) = fails(&train_args(t.path(), c3, &["--k1", "4", "--k2", "4"]));
    assert_eq!(code, 2);
}

#[test]
fn map_writes_unit_rows_for_every_class() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d, &["--num-classes", "20", "--num-unseen", "5"]);
    let ck = p_static(d, "ck.bin");
    ok(&train_args(d, ck, &["--k1", "4", "--out-dim", "12", "--max-epochs", "5"]));
    let out = d.join("vawe.txt");
    ok(&["map", "--checkpoint", ck, "--embeddings", p(&d.join("embeddings.txt")), "--out", p(&out)]);
    let mapped = load_embeddings(&out).unwrap();
    let raw = load_embeddings(d.join("embeddings.txt")).unwrap();
    assert_eq!(mapped.class_names(), raw.class_names());
    assert_eq!(mapped.dim(), 12);
    for i in 0..mapped.len() {
        assert!((norm(mapped.row(i)) - 1.0).abs() < 1e-12);
    }
    let (code, _) = fails(&["map", "--checkpoint", ck, "--embeddings", p(&d.join("signatures.txt")), "--out", p(&out)]);
    assert_eq!(code, 5);
}

fn zsl(d: &Path, method: &str, emb: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["zsl-eval", "--method", method, "--embeddings", p(emb), "--features", p_static(d, "features.txt"), "--split", p_static(d, "split.txt")];
    args.extend_from_slice(extra);
    json(&args)
}

#[test]
fn zsl_eval_oracle_and_chance_levels() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d, &["--noise-sigma", "0.1", "--visual-rank", "0"]);
    // The ±1 targets carry a large shared component on uncentered
    // embeddings; 0/1 targets give the clean ceiling.
    let oracle = zsl(d, "eszsl", &d.join("signatures.txt"), &["--encoding", "zero-one"]);
    assert!(oracle["mean_per_class_accuracy"].as_f64().unwrap() > 0.9, "{oracle}");

    // Predictions are strongly correlated within a class, so the binomial
    // unit is one (draw, unseen class) pair rather than one image.
    let names = load_embeddings(d.join("embeddings.txt")).unwrap().class_names().to_vec();
    let mut rng = Rng::new(77);
    let draws = 5;
    for method in ["eszsl", "conse"] {
        let mut total = 0.0;
        for i in 0..draws {
            let rows: Vec<f64> = (0..names.len() * 24).map(|_| rng.gaussian()).collect();
            let random = ClassEmbeddingTable::new(names.clone(), DenseMatrix::from_vec(40, 24, rows).unwrap()).unwrap();
            let path = d.join(format!("random{i}.txt"));
            save_embeddings(&random, &path).unwrap();
            total += zsl(d, method, &path, &[])["mean_per_class_accuracy"].as_f64().unwrap();
        }
        let acc = total / draws as f64;
        let sigma = (0.1 * 0.9 / (draws * 10) as f64).sqrt();
        assert!((acc - 0.1).abs() < 3.0 * sigma, "{method}: {acc}");
    }
}

#[test]
fn zsl_eval_reports_share_a_schema() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d, &[]);
    let reports: Vec<Value> = ["eszsl", "conse"].iter().map(|m| zsl(d, m, &d.join("embeddings.txt"), &[])).collect();
    for (r, m) in reports.iter().zip(["eszsl", "conse"]) {
        assert_eq!(r["schema_version"], 1);
        assert_eq!(r["method"], m);
        assert_eq!(r["per_class_accuracy"].as_object().unwrap().len(), 10);
        for key in ["mean_per_class_accuracy", "overall_accuracy", "num_test", "config"] {
            assert!(!r[key].is_null(), "{m}: {key}");
        }
    }
    let (code, err) = fails(&["zsl-eval", "--method", "sync", "--embeddings", "x", "--features", "y", "--split", "z"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[usage]"), "{err}");
}

#[test]
fn pipeline_replay_reproduces_the_report() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let flags = ["--num-classes", "20", "--num-unseen", "5", "--k1", "4", "--out-dim", "16", "--max-epochs", "20", "--seed", "4"];
    let mut args = vec!["pipeline", "--workdir", p(&a)];
    args.extend_from_slice(&flags);
    let first = ok(&args);
    let replayed = ok(&["pipeline", "--workdir", p(&b), "--replay", p(&a.join("report.json"))]);
    assert_eq!(first, replayed);
    assert_eq!(fs::read(a.join("checkpoint.bin")).unwrap(), fs::read(b.join("checkpoint.bin")).unwrap());
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["config"]["train"]["seed"], 4);
    assert_eq!(v["config"]["data"]["synth"]["seed"], 4);
    assert!(v["config"].get("workdir").is_none());
}

#[test]
fn pipeline_on_aligned_data_changes_nothing() {
    let t = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&ok(&[
        "pipeline", "--workdir", p(t.path()), "--discrepancy-rho", "0", "--noise-sigma", "0",
    ]))
    .unwrap();
    assert_eq!(v["consistency"]["raw"], 10.0);
    assert_eq!(v["consistency"]["delta"], 0.0);
    assert_eq!(v["train"]["stop_reason"], "structure converged");
    assert_eq!(v["vawe_is_raw"], true);
    for m in ["eszsl", "conse"] {
        assert_eq!(v[m]["delta_mean_per_class"], 0.0);
    }
}

#[test]
fn help_exits_cleanly_and_missing_subcommand_is_usage() {
    assert!(vawe(&["--help"]).status.success());
    assert_eq!(vawe(&[]).status.code(), Some(2));
}
