use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apfix_core::io::{load_dataset, load_detections, write_dataset, write_detections};
use apfix_core::synth::{self, CorpusParams};
use serde_json::Value;

fn apfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apfix")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn corpus(dir: &Path) -> (String, String) {
    let params = CorpusParams {
        images: 30,
        categories: 8,
        ..Default::default()
    };
    let (ds, dets) = synth::random_corpus(&mut synth::rng(12), &params);
    let gt = dir.join("gt.json");
    let det = dir.join("dets.json");
    write_dataset(&ds, &gt).unwrap();
    write_detections(&dets, &det).unwrap();
    (gt.to_str().unwrap().into(), det.to_str().unwrap().into())
}

#[test]
fn shipped_gameable_fixture_matches_generator() {
    let tmp = tempfile::tempdir().unwrap();
    let (ds, dets) = synth::gameable_corpus();
    let gt: PathBuf = tmp.path().join("gt.json");
    let det: PathBuf = tmp.path().join("dets.json");
    write_dataset(&ds, &gt).unwrap();
    write_detections(&dets, &det).unwrap();
    assert_eq!(
        std::fs::read(&gt).unwrap(),
        std::fs::read(fixture("gameable_gt.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(&det).unwrap(),
        std::fs::read(fixture("gameable_dets.json")).unwrap()
    );
    let loaded = load_dataset(fixture("gameable_gt.json")).unwrap();
    assert_eq!(
        load_detections(fixture("gameable_dets.json"), &loaded).unwrap().len(),
        dets.len()
    );
}

#[test]
fn game_on_files_equals_builtin_fixture() {
    let builtin = apfix(&["game", "--fixture", "gameable", "--format", "json", "--no-timestamp"]);
    let files = apfix(&[
        "game",
        "--gt",
        &fixture("gameable_gt.json"),
        "--dets",
        &fixture("gameable_dets.json"),
        "--dets-per-image",
        "15",
        "--dets-per-class",
        "20",
        "--format",
        "json",
        "--no-timestamp",
    ]);
    assert_eq!(stdout(&builtin), stdout(&files));
}

#[test]
fn user_files_need_a_class_cap_for_game() {
    let out = apfix(&[
        "game",
        "--gt",
        &fixture("gameable_gt.json"),
        "--dets",
        &fixture("gameable_dets.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_groundtruth_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let out = apfix(&[
        "evaluate",
        "--gt",
        "/nonexistent/gt.json",
        "--dets",
        &fixture("gameable_dets.json"),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/gt.json"));
    assert!(!report.exists());
}

#[test]
fn preset_and_explicit_limits_conflict() {
    let out = apfix(&[
        "evaluate",
        "--gt",
        "a",
        "--dets",
        "b",
        "--preset",
        "ap-old",
        "--dets-per-image",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be used with"));
}

#[test]
fn zero_threads_is_rejected() {
    let out = apfix(&["--threads", "0", "toy"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toy_reports_the_incentive() {
    let text = stdout(&apfix(&["toy"]));
    assert!(text.contains("expected AP 0.500 -> 0.650 (+0.150)"), "{text}");
    let game = stdout(&apfix(&["game", "--fixture", "toy"]));
    assert!(game.contains("0.500 -> 0.650"), "{game}");
}

#[test]
fn without_a_class_cap_game_rows_agree() {
    let text = stdout(&apfix(&[
        "game",
        "--fixture",
        "gameable",
        "--dets-per-class",
        "none",
        "--format",
        "json",
    ]));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["baseline"]["ap"], v["gamed"]["ap"]);
    assert_eq!(v["baseline"]["categories"], v["gamed"]["categories"]);
}

#[test]
fn evaluate_writes_curves_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, det) = corpus(tmp.path());
    let curves = tmp.path().join("curves.csv");
    let svg = tmp.path().join("curves.svg");
    let report = tmp.path().join("report.json");
    let out = apfix(&[
        "evaluate",
        "--gt",
        &gt,
        "--dets",
        &det,
        "--preset",
        "ap-pool",
        "--format",
        "json",
        "--out",
        report.to_str().unwrap(),
        "--curves",
        curves.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["pooled"]["ap"].is_number());
    assert!(v["runtime"].is_object());
    let csv = std::fs::read_to_string(&curves).unwrap();
    assert!(csv.starts_with("curve,rank,recall,precision,interpolated_precision\n"));
    assert!(csv.lines().skip(1).any(|l| l.starts_with("all,")));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn no_timestamp_drops_the_runtime_block() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, det) = corpus(tmp.path());
    let text = stdout(&apfix(&[
        "evaluate",
        "--gt",
        &gt,
        "--dets",
        &det,
        "--format",
        "json",
        "--no-timestamp",
    ]));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v.get("runtime").is_none_or(Value::is_null));
}

#[test]
fn calibrate_then_apply_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, det) = corpus(tmp.path());
    let model = tmp.path().join("model.json");
    let calibrated = tmp.path().join("calibrated.json");
    let summary = stdout(&apfix(&[
        "calibrate",
        "--method",
        "isotonic",
        "--gt",
        &gt,
        "--dets",
        &det,
        "--out",
        model.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let summary: Value = serde_json::from_str(&summary).unwrap();
    assert!(summary.is_object());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["method"], "isotonic");
    assert_eq!(m["categories"].as_object().unwrap().len(), 8);
    stdout(&apfix(&[
        "apply",
        "--model",
        model.to_str().unwrap(),
        "--dets",
        &det,
        "--out",
        calibrated.to_str().unwrap(),
    ]));
    let ds = load_dataset(&gt).unwrap();
    let before = load_detections(&det, &ds).unwrap();
    let after = load_detections(&calibrated, &ds).unwrap();
    assert_eq!(before.len(), after.len());
    for (x, y) in before.iter().zip(after.iter()) {
        assert_eq!(
            (x.id, x.image_id, x.category_id, x.bbox),
            (y.id, y.image_id, y.category_id, y.bbox)
        );
        assert!((0.0..=1.0).contains(&y.score));
    }
}

#[test]
fn sweep_and_subset_emit_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, det) = corpus(tmp.path());
    let sweep = stdout(&apfix(&[
        "sweep", "--gt", &gt, "--dets", &det, "--values", "1,5,none", "--format", "csv",
    ]));
    assert!(sweep.lines().filter(|l| !l.is_empty()).count() > 3, "{sweep}");
    let subset = stdout(&apfix(&[
        "subset", "--gt", &gt, "--dets", &det, "--groups", "f", "--format", "json",
    ]));
    let v: Value = serde_json::from_str(&subset).unwrap();
    for c in v["categories"].as_array().unwrap() {
        assert_eq!(c["group"], "frequent");
    }
}

#[test]
fn score_dist_writes_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, det) = corpus(tmp.path());
    let svg = tmp.path().join("dist.svg");
    stdout(&apfix(&[
        "score-dist",
        "--gt",
        &gt,
        "--dets",
        &det,
        "--svg",
        svg.to_str().unwrap(),
    ]));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}
