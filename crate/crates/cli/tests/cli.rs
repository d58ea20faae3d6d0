use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn svls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svls"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = svls(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the parsed JSON error line.
fn failure(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = svls(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().expect("an error line");
    (out.status.code().unwrap(), serde_json::from_str(line).expect("error line is JSON"))
}

fn json_file(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Header and payload of a volume file, without the sidecar.
fn payload(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn kernel_json_lists_all_taps() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&ok(dir.path(), &["kernel", "--rank", "3", "--format", "json"])).unwrap();
    assert_eq!(v["taps"].as_array().unwrap().len(), 27);
    assert_eq!(v["center"], 1.0);
    assert_eq!(v["total_weight"], 2.0);
    let text = ok(dir.path(), &["kernel", "--rank", "2", "--format", "text"]);
    assert!(text.contains("0.155615 1.000000 0.155615"));
}

#[test]
fn svls_on_homogeneous_volume_is_one_hot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "homogeneous", "--dims", "6,7,8", "--out", "flat.svlv"]);
    ok(d, &["encode", "--in", "flat.svlv", "--method", "svls", "--out", "svls.svlv"]);
    ok(d, &["encode", "--in", "flat.svlv", "--method", "onehot", "--out", "onehot.svlv"]);
    assert_eq!(payload(d.join("svls.svlv")), payload(d.join("onehot.svlv")));
    assert_eq!(json_file(d.join("svls.svlv.json"))["provenance"]["method"], "svls");
}

#[test]
fn perfect_prediction_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "nested_spheres", "--dims", "14,14,14", "--out", "ref.svlv"]);
    ok(d, &["encode", "--in", "ref.svlv", "--method", "onehot", "--out", "pred.svlv"]);
    ok(d, &["evaluate", "--ref", "ref.svlv", "--pred", "pred.svlv", "--out", "eval"]);
    let cal = json_file(d.join("eval/calibration.json"));
    assert_eq!(cal["ece"], 0.0);
    assert_eq!(cal["tace"], 0.0);
    let seg = json_file(d.join("eval/segmentation.json"));
    let rows = seg["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row["dsc"], 1.0);
        assert_eq!(row["sd"], 1.0);
    }
    let reliability = std::fs::read_to_string(d.join("eval/reliability.csv")).unwrap();
    assert_eq!(reliability.lines().count(), 16);
    let segmentation = std::fs::read_to_string(d.join("eval/segmentation.csv")).unwrap();
    assert_eq!(segmentation.lines().count(), 4);
}

#[test]
fn help_shows_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let evaluate = ok(dir.path(), &["evaluate", "--help"]);
    for needle in ["--sd-tolerance", "[default: 2]", "[default: 15]", "[default: 1e-3]", "--foreground-only", "--region-merge"] {
        assert!(evaluate.contains(needle), "missing {needle}");
    }
    let encode = ok(dir.path(), &["encode", "--help"]);
    assert!(encode.contains("--alpha") && encode.contains("no default"));
    assert!(encode.contains("[default: 1]"));
    assert!(ok(dir.path(), &["kernel", "--help"]).contains("[default: 1]"));
    for sub in ["fuse", "loss", "phantom"] {
        assert!(ok(dir.path(), &[sub, "--help"]).contains("--out"));
    }
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "straight_boundary", "--dims", "8,8", "--out", "l.svlv"]);

    let (code, err) = failure(d, &["encode", "--in", "l.svlv", "--method", "ls", "--out", "o.svlv"]);
    assert_eq!((code, err["error"].as_str()), (1, Some("validation")));
    assert!(err["message"].as_str().unwrap().contains("alpha"));
    assert!(!d.join("o.svlv").exists());

    let (code, err) = failure(d, &["encode", "--in", "nope.svlv", "--method", "onehot", "--out", "o.svlv"]);
    assert_eq!((code, err["error"].as_str()), (2, Some("io")));

    std::fs::write(d.join("junk.svlv"), b"JUNKJUNKJUNKJUNK").unwrap();
    let (code, _) = failure(d, &["encode", "--in", "junk.svlv", "--method", "onehot", "--out", "o.svlv"]);
    assert_eq!(code, 1);

    let (code, _) = failure(d, &["kernel", "--rank", "4"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["phantom", "--kind", "homogeneous", "--dims", "4,4", "--raters", "2", "--out", "x"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["phantom", "--kind", "homogeneous", "--dims", "4,4", "--strength", "0.1", "--out", "x"]);
    assert_eq!(code, 1);
    let (code, _) = failure(d, &["evaluate", "--ref", "l.svlv", "--pred", "l.svlv", "--sd-tolerance", "-1", "--out", "e"]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_fills_missing_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "dims = [6, 6, 6]\nseed = 4\n[evaluate]\nece_bins = 10\ncomposite = true\n").unwrap();
    ok(d, &["--config", "run.toml", "phantom", "--kind", "nested_spheres", "--out", "ref.svlv"]);
    ok(d, &["encode", "--in", "ref.svlv", "--method", "ls", "--alpha", "0.2", "--out", "ls.svlv"]);
    ok(d, &["evaluate", "--config", "run.toml", "--ref", "ref.svlv", "--pred", "ls.svlv", "--ece-bins", "5", "--out", "e"]);
    let cal = json_file(d.join("e/calibration.json"));
    assert_eq!(cal["num_bins"], 5);
    let seg = json_file(d.join("e/segmentation.json"));
    assert_eq!(seg["rows"].as_array().unwrap().last().unwrap()["name"], "composite");

    std::fs::write(d.join("bad.toml"), "ece_binz = 3\n").unwrap();
    let (code, err) = failure(d, &["--config", "bad.toml", "kernel", "--rank", "2"]);
    assert_eq!(code, 1);
    assert!(err["message"].as_str().unwrap().contains("ece_binz"));
    let (code, _) = failure(d, &["--config", "missing.toml", "kernel", "--rank", "2"]);
    assert_eq!(code, 2);
}

#[test]
fn batch_mode_mirrors_file_names() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("labels")).unwrap();
    for (name, seed) in [("a.svlv", "1"), ("b.svlv", "2")] {
        ok(d, &["phantom", "--kind", "nested_spheres", "--dims", "9,9,9", "--seed", seed, "--out", &format!("labels/{name}")]);
    }
    ok(d, &["encode", "--in", "labels", "--method", "svls", "--sigma", "0.8", "--out", "soft"]);
    assert!(d.join("soft/a.svlv").exists() && d.join("soft/b.svlv.json").exists());
    ok(d, &["evaluate", "--ref", "labels", "--pred", "soft", "--out", "eval"]);
    assert!(d.join("eval/a/calibration.json").exists() && d.join("eval/b/reliability.csv").exists());
    ok(d, &["loss", "--target", "labels", "--pred", "soft", "--out", "loss"]);
    assert!(json_file(d.join("loss/a.json"))["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn fuse_directory_and_explicit_list_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "fig3_multirater", "--dims", "6,12", "--raters", "3", "--jitter", "1", "--out", "r"]);
    ok(d, &["fuse", "--in", "r", "--method", "msvls", "--out", "dir.svlv"]);
    ok(d, &["fuse", "--in", "r/rater_02.svlv", "r/rater_00.svlv", "r/rater_01.svlv", "--method", "msvls", "--out", "list.svlv"]);
    assert_eq!(payload(d.join("dir.svlv")), payload(d.join("list.svlv")));
    ok(d, &["fuse", "--in", "r", "--method", "moh", "--out", "moh.svlv"]);
    let (code, _) = failure(d, &["fuse", "--in", "r", "--method", "moh", "--sigma", "2", "--out", "x.svlv"]);
    assert_eq!(code, 1);
}

#[test]
fn loss_checks_prediction_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "miscalibrated_pred", "--dims", "10,10", "--strength", "0.1", "--out", "p.svlv"]);
    ok(d, &["loss", "--target", "p.ref.svlv", "--pred", "p.svlv", "--pred-kind", "probs", "--out", "l.json"]);
    let report = json_file(d.join("l.json"));
    assert_eq!(report["reduction"], "mean");
    assert_eq!(report["num_voxels"], 100);
    let (code, _) = failure(d, &["loss", "--target", "p.ref.svlv", "--pred", "p.svlv", "--pred-kind", "logits", "--out", "l2.json"]);
    assert_eq!(code, 1);
    assert!(!d.join("l2.json").exists());
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--kind", "straight_boundary", "--dims", "12,10,9", "--out", "l.svlv"]);
    ok(d, &["encode", "--in", "l.svlv", "--method", "svls", "--out", "one.svlv"]);
    let first = payload(d.join("one.svlv"));
    let first_meta = payload(d.join("one.svlv.json"));
    ok(d, &["encode", "--in", "l.svlv", "--method", "svls", "--out", "one.svlv"]);
    assert_eq!(payload(d.join("one.svlv")), first);
    assert_eq!(payload(d.join("one.svlv.json")), first_meta);
}

#[test]
fn info_logging_reports_resolved_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_svls"))
        .current_dir(dir.path())
        .env("SVLS_LOG", "info")
        .args(["kernel", "--rank", "2"])
        .output()
        .unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("sigma: 1.0"), "{stderr}");
}
