mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use suas_damage::footprints::parse_footprints;
use suas_damage::products::parse_csv;
use suas_damage::synthetic::write_scene;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suas-damage"))
        .args(args)
        .env_remove("SUAS_ASSESS_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    raster: PathBuf,
    footprints: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let scene = common::scene(600, 400, 40, 24, 77);
    let (raster, footprints) = write_scene(&scene, dir.path()).unwrap();
    Fixture { dir, raster, footprints }
}

fn macro_f1(args: &[&str]) -> f64 {
    let out = ok(args);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["macro_f1"].as_f64().unwrap()
}

#[test]
fn synth_assess_evaluate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let scene_dir = dir.path().join("scene");
    ok(&["--seed", "3", "synth", "--out-dir", s(&scene_dir), "--width", "300", "--height", "200", "--buildings", "15"]);
    let raster = scene_dir.join("scene.json");
    let fps = scene_dir.join("footprints.geojson");
    let out = dir.path().join("run");
    ok(&[
        "--tile-size", "128", "--run-id", "r1", "--fixed-time", "2024-10-01T12:00:00Z",
        "assess", "--raster", s(&raster), "--footprints", s(&fps), "--out-dir", s(&out),
    ]);
    let report = json(&out.join("run_report.json"));
    assert_eq!(report["run_id"], "r1");
    assert_eq!(report["started_at"], "2024-10-01T12:00:00.000Z");
    assert_eq!(report["building_count"], 15);
    assert_eq!(report["tile_count"], 6);
    assert_eq!(report["input_bytes"], 300 * 200 * 3);
    assert_eq!(report["backend_name"], "replay");
    assert_eq!(report["config"]["consolidation"], "score_sum");
    let csv = out.join("assessments.csv");
    assert_eq!(parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap().len(), 15);
    let geo = json(&out.join("assessments.geojson"));
    assert_eq!(geo["features"].as_array().unwrap().len(), 15);
    assert_eq!(geo["run_id"], "r1");
    let f1 = macro_f1(&["evaluate", "--assessments", s(&csv), "--truth", s(&fps)]);
    assert_eq!(f1, 1.0);
}

#[test]
fn perturbed_footprints_degrade_unaligned_only() {
    let fx = fixture();
    let moved = fx.dir.path().join("moved.geojson");
    ok(&["perturb", "--footprints", s(&fx.footprints), "--dx", "0.4", "--dy", "-0.3", "--out", s(&moved)]);
    let parsed = parse_footprints(&std::fs::read_to_string(&moved).unwrap()).unwrap();
    assert_eq!(parsed.footprints[0].alignment_offset, Some((0.4, -0.3)));

    let mut f1 = Vec::new();
    for mode in ["aligned", "unaligned"] {
        let out = fx.dir.path().join(mode);
        ok(&["--mode", mode, "assess", "--raster", s(&fx.raster), "--footprints", s(&moved), "--out-dir", s(&out)]);
        let csv = out.join("assessments.csv");
        f1.push(macro_f1(&["--mode", mode, "evaluate", "--assessments", s(&csv), "--truth", s(&moved)]));
    }
    assert_eq!(f1[0], 1.0);
    assert!(f1[1] < f1[0], "{f1:?}");
}

#[test]
fn align_recovers_planted_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = suas_damage::synthetic::SceneSpec::balanced(500, 400, 0.05, 12, 5);
    spec.min_size_px = 24;
    spec.max_size_px = 40;
    let scene = suas_damage::synthetic::generate_scene(&spec).unwrap();
    let (raster, fps) = write_scene(&scene, dir.path()).unwrap();
    let moved = dir.path().join("moved.geojson");
    ok(&["perturb", "--footprints", s(&fps), "--dx", "-0.3", "--dy", "0.2", "--out", s(&moved)]);
    let result = dir.path().join("align.json");
    let fixed = dir.path().join("fixed.geojson");
    ok(&[
        "align", "--raster", s(&raster), "--footprints", s(&moved), "--window", "0.5", "--step", "0.1",
        "--surface", "--corrected", s(&fixed), "--degradation", "2,0", "--degradation", "-1.5,1.5", "--out", s(&result),
    ]);
    let v = json(&result);
    assert_eq!(v["best_index"], serde_json::json!([3, -2]));
    assert_eq!(v["surface"].as_array().unwrap().len(), 121);
    let rows = v["degradation"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["relative_drop"].as_f64().unwrap() > 0.0));

    let original = parse_footprints(&std::fs::read_to_string(&fps).unwrap()).unwrap().footprints;
    let corrected = parse_footprints(&std::fs::read_to_string(&fixed).unwrap()).unwrap().footprints;
    for (a, b) in original.iter().zip(&corrected) {
        assert_eq!(a.id, b.id);
        assert!(b.alignment_offset.is_none());
        for (p, q) in a.exterior.points().iter().zip(b.exterior.points()) {
            assert!((p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6);
        }
    }
}

#[test]
fn mask_correlation_objective_needs_no_backend() {
    let fx = fixture();
    let moved = fx.dir.path().join("moved.geojson");
    ok(&["perturb", "--footprints", s(&fx.footprints), "--dx", "0.1", "--dy", "0", "--out", s(&moved)]);
    let out = ok(&[
        "--backend", "nonsense", "align", "--raster", s(&fx.raster), "--footprints", s(&moved),
        "--window", "0.3", "--objective", "mask-correlation",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["objective"], "mask_correlation");
    assert!(v["surface"].as_array().is_none_or(|a| a.is_empty()));
}

#[test]
fn infer_then_scoredir_matches_replay() {
    let fx = fixture();
    let planes = fx.dir.path().join("planes");
    ok(&["--tile-size", "256", "infer", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&planes)]);
    assert_eq!(std::fs::read_dir(&planes).unwrap().count(), 6);
    let replay = fx.dir.path().join("replay");
    let scored = fx.dir.path().join("scored");
    ok(&["--tile-size", "256", "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&replay)]);
    let backend = format!("scoredir:{}", s(&planes));
    ok(&[
        "--tile-size", "256", "--backend", &backend,
        "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&scored),
    ]);
    assert_eq!(
        std::fs::read(replay.join("assessments.csv")).unwrap(),
        std::fs::read(scored.join("assessments.csv")).unwrap()
    );
    // a different tile size finds no matching planes
    let bad = bin(&[
        "--tile-size", "128", "--backend", &backend,
        "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&scored),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn random_backend_is_seeded() {
    let fx = fixture();
    let run = |seed: &str, name: &str| {
        let out = fx.dir.path().join(name);
        ok(&[
            "--backend", "random", "--seed", seed,
            "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&out),
        ]);
        std::fs::read(out.join("assessments.csv")).unwrap()
    };
    assert_eq!(run("4", "a"), run("4", "b"));
    assert_ne!(run("4", "a"), run("5", "c"));
}

#[test]
fn export_reproduces_assess_products() {
    let fx = fixture();
    let out = fx.dir.path().join("run");
    ok(&["--run-id", "x", "--csv-comment", "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&out)]);
    let csv = out.join("assessments.csv");
    let geo = fx.dir.path().join("export.geojson");
    let plain = fx.dir.path().join("export.csv");
    ok(&["--run-id", "x", "export", "--assessments", s(&csv), "--footprints", s(&fx.footprints), "--format", "geojson", "--out", s(&geo)]);
    ok(&["--csv-comment", "export", "--assessments", s(&csv), "--footprints", s(&fx.footprints), "--format", "csv", "--out", s(&plain)]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&plain).unwrap());
    let a = json(&out.join("assessments.geojson"));
    let b = json(&geo);
    assert_eq!(a["features"].as_array().unwrap().len(), b["features"].as_array().unwrap().len());
    for (fa, fb) in a["features"].as_array().unwrap().iter().zip(b["features"].as_array().unwrap()) {
        assert_eq!(fa["id"], fb["id"]);
        assert_eq!(fa["properties"]["damage"], fb["properties"]["damage"]);
        assert_eq!(fa["geometry"], fb["geometry"]);
    }
}

#[test]
fn tile_and_sample_manifests() {
    let fx = fixture();
    let out = ok(&["--tile-size", "256", "tile", "--raster", s(&fx.raster)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["cols"].as_u64(), v["rows"].as_u64()), (Some(3), Some(2)));
    let tiles = v["tiles"].as_array().unwrap();
    assert_eq!(tiles.len(), 6);
    assert_eq!(tiles[2]["width"], 600 - 512);
    assert_eq!(tiles[5]["height"], 400 - 256);

    let draws = fx.dir.path().join("draws.json");
    ok(&["--tile-size", "256", "--seed", "2", "sample", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--count", "50", "--out", s(&draws)]);
    let v = json(&draws);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 50);
    assert!(list.iter().all(|d| d["tile_col"].as_u64().unwrap() < 3 && d["tile_row"].as_u64().unwrap() < 2));
    let again = ok(&["--tile-size", "256", "--seed", "2", "sample", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--count", "50"]);
    assert_eq!(serde_json::from_slice::<Value>(&again.stdout).unwrap(), v);
    let bad = bin(&["sample", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--target", "1,2"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn split_filter_restricts_evaluation() {
    let fx = fixture();
    let text = std::fs::read_to_string(&fx.footprints).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    for (i, f) in doc["features"].as_array_mut().unwrap().iter_mut().enumerate() {
        let ortho = if i % 4 == 0 { "ortho-b" } else { "ortho-a" };
        f["properties"]["orthomosaic_id"] = ortho.into();
    }
    let tagged = fx.dir.path().join("tagged.geojson");
    std::fs::write(&tagged, doc.to_string()).unwrap();
    let manifest = fx.dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{"entries": {"ortho-a": {"disaster_id": "d1", "split": "train"},
                        "ortho-b": {"disaster_id": "d2", "split": "test"}}}"#,
    )
    .unwrap();
    let out = fx.dir.path().join("run");
    ok(&["assess", "--raster", s(&fx.raster), "--footprints", s(&tagged), "--out-dir", s(&out)]);
    let csv = out.join("assessments.csv");
    let run = ok(&["evaluate", "--assessments", s(&csv), "--truth", s(&tagged), "--manifest", s(&manifest), "--split", "test"]);
    let v: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["split_id"], "test");
    assert_eq!(v["building_count"], 10);
    let lone = bin(&["evaluate", "--assessments", s(&csv), "--truth", s(&tagged), "--split", "test"]);
    assert_eq!(lone.status.code(), Some(1));
}

#[test]
fn exit_codes_follow_error_kind() {
    let fx = fixture();
    let out = fx.dir.path().join("o");
    let missing = fx.dir.path().join("nope.json");
    let r = bin(&["assess", "--raster", s(&missing), "--footprints", s(&fx.footprints), "--out-dir", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.json"));

    let broken = fx.dir.path().join("broken.geojson");
    std::fs::write(&broken, "{\"type\": \"FeatureCollection\", \"features\": [").unwrap();
    let r = bin(&["assess", "--raster", s(&fx.raster), "--footprints", s(&broken), "--out-dir", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let usage: [&[&str]; 4] = [
        &["--tile-size", "0", "tile", "--raster", s(&fx.raster)],
        &["assess", "--raster", s(&fx.raster)],
        &["--backend", "magic", "assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&out)],
        &["frobnicate"],
    ];
    for args in usage {
        assert_eq!(bin(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn workers_env_var_is_honored() {
    let fx = fixture();
    let out = fx.dir.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_suas-damage"))
        .args(["assess", "--raster", s(&fx.raster), "--footprints", s(&fx.footprints), "--out-dir", s(&out)])
        .env("SUAS_ASSESS_WORKERS", "3")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert_eq!(json(&out.join("run_report.json"))["config"]["workers"], 3);
}
