use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use drcpo_core::io::parse_ply;
use drcpo_core::pipeline::PipelineConfig;
use tempfile::TempDir;

fn drcpo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drcpo")).args(args).output().expect("spawn drcpo")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small synthetic dataset and a database built from it.
fn fixture(frames: usize) -> (TempDir, std::path::PathBuf, std::path::PathBuf) {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let db = tmp.path().join("gt.drpc");
    let n = frames.to_string();
    let o = drcpo(&["synth", "--out", s(&data), "--frames", &n, "--points", "4000", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = drcpo(&["build-db", "--data-dir", s(&data), "--out", s(&db)]);
    assert!(o.status.success(), "{}", stderr(&o));
    (tmp, data, db)
}

fn manifest_records(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn build_db_on_empty_dir_fails_with_a_message() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir_all(tmp.path().join("velodyne")).unwrap();
    fs::create_dir_all(tmp.path().join("label")).unwrap();
    let o = drcpo(&["build-db", "--data-dir", s(tmp.path()), "--out", s(&tmp.path().join("db.drpc"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
    assert!(!tmp.path().join("db.drpc").exists());
}

#[test]
fn build_db_is_byte_stable() {
    let (tmp, data, db) = fixture(2);
    let first = fs::read(&db).unwrap();
    assert_eq!(&first[..4], b"DRPC");
    let again = tmp.path().join("again.drpc");
    let o = drcpo(&["build-db", "--data-dir", s(&data), "--out", s(&again)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Car"));
    assert_eq!(fs::read(&again).unwrap(), first);
}

#[test]
fn augment_writes_frames_and_manifest() {
    let (tmp, data, db) = fixture(3);
    let out = tmp.path().join("out");
    let o = drcpo(&["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let records = manifest_records(&out.join("manifest.jsonl"));
    assert_eq!(records.len(), 4);
    let echoed = PipelineConfig::from_text(records[0]["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed, PipelineConfig { seed: 5, ..Default::default() });
    for r in &records[1..] {
        assert_eq!(r["status"], "ok");
        let id = r["frame_id"].as_str().unwrap();
        let bytes = fs::metadata(out.join("velodyne").join(format!("{id}.bin"))).unwrap().len();
        assert_eq!(r["stats"]["total_points"].as_u64().unwrap() * 16, bytes, "frame {id}");
        assert!(out.join("label").join(format!("{id}.txt")).is_file());
    }

    let o = drcpo(&["stats", "--manifest", s(&out.join("manifest.jsonl")), "--data-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("augmented frames        3 (0 failed)"));
}

#[test]
fn config_file_values_are_echoed() {
    let (tmp, data, db) = fixture(1);
    let cfg_path = tmp.path().join("run.cfg");
    fs::write(&cfg_path, "# fewer cars\nplacement.count.car = 4\ne_hpr.min_points = 8\n").unwrap();
    let out = tmp.path().join("out");
    let o = drcpo(&["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--config", s(&cfg_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = manifest_records(&out.join("manifest.jsonl"));
    let echoed = PipelineConfig::from_text(records[0]["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed.placement.objects_per_class[0], 4);
    assert_eq!(echoed.e_hpr.min_points_per_label, 8);
}

#[test]
fn different_seeds_give_different_frames() {
    let (tmp, data, db) = fixture(2);
    let run = |seed: &str| {
        let out = tmp.path().join(format!("out{seed}"));
        let o = drcpo(&["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--seed", seed]);
        assert!(o.status.success());
        fs::read(out.join("velodyne").join("000000.bin")).unwrap()
    };
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn no_frames_gives_an_empty_manifest() {
    let (tmp, _, db) = fixture(1);
    let empty = tmp.path().join("empty");
    fs::create_dir_all(empty.join("velodyne")).unwrap();
    let out = tmp.path().join("out");
    let o = drcpo(&["augment", "--db", s(&db), "--frames", s(&empty), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("manifest.jsonl")).unwrap(), "");
}

#[test]
fn a_corrupt_frame_fails_alone() {
    let (tmp, data, db) = fixture(3);
    fs::write(data.join("velodyne").join("000001.bin"), [0u8; 17]).unwrap();
    let out = tmp.path().join("out");
    let o = drcpo(&["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let records = manifest_records(&out.join("manifest.jsonl"));
    let status: Vec<&str> = records[1..].iter().map(|r| r["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["ok", "failed", "ok"]);
    assert!(records[2]["error"].as_str().unwrap().contains("16"));
    assert!(out.join("velodyne").join("000000.bin").is_file());
    assert!(out.join("velodyne").join("000002.bin").is_file());
    assert!(!out.join("velodyne").join("000001.bin").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let (tmp, data, db) = fixture(1);
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope");
    let bad_cfg = tmp.path().join("bad.cfg");
    fs::write(&bad_cfg, "placement.count.car = many\n").unwrap();

    let cases: [Vec<&str>; 5] = [
        vec!["augment", "--db", s(&db), "--frames", s(&missing), "--out", s(&out)],
        vec!["augment", "--db", s(&missing), "--frames", s(&data), "--out", s(&out)],
        vec!["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--config", s(&bad_cfg)],
        vec!["augment", "--db", s(&db), "--frames", s(&data), "--out", s(&out), "--workers", "0"],
        vec!["augment", "--frames", s(&data), "--out", s(&out), "--mode", "drcpo"],
    ];
    for args in &cases {
        let o = drcpo(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = drcpo(&["augment", "--frames", s(&data), "--out", s(&out), "--mode", "none"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn export_ply_writes_every_stage() {
    let (tmp, data, db) = fixture(2);
    let out = tmp.path().join("ply");
    let o = drcpo(&["export-ply", "--db", s(&db), "--frames", s(&data), "--frame-id", "000001", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let counts: Vec<usize> = ["raw", "constructed", "placed", "s-hpr", "e-hpr"]
        .iter()
        .map(|stage| {
            let path = out.join(format!("000001_{stage}.ply"));
            parse_ply(&fs::read_to_string(&path).unwrap(), &path).unwrap().len()
        })
        .collect();
    assert!(counts[1] > counts[0]);
    assert!(counts[3] <= counts[2] && counts[4] <= counts[3], "{counts:?}");

    let o = drcpo(&["export-ply", "--db", s(&db), "--frames", s(&data), "--frame-id", "999999", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_timings() {
    let o = drcpo(&["bench", "--frames", "3", "--points", "3000", "--db-frames", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("p95"));
}

#[test]
fn help_lists_config_defaults() {
    let o = drcpo(&["augment", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("construction.threshold"));
    assert!(text.contains("0.85"));
    assert!(text.contains("e_hpr.radius"));
}
