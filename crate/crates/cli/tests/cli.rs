//! End-to-end runs of the `geofuse` binary on small datasets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geofuse::evaluation::{ground_truth_boxes, iou, map_detections};
use geofuse::geometry::Pose;
use geofuse::optimizer::{KeyframeMap, MapObject};
use geofuse::sim::read_dataset;
use serde_json::Value;

fn geofuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geofuse")).args(args).output().expect("spawn geofuse")
}

fn ok(args: &[&str]) -> Output {
    let out = geofuse(args);
    assert!(
        out.status.success(),
        "geofuse {args:?} exited with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A config file for a noise-free scene with three objects and twelve frames.
fn zero_noise_config(dir: &Path) -> PathBuf {
    zero_noise_scene(dir, 3, 3, 12)
}

fn zero_noise_scene(dir: &Path, seed: u64, objects: usize, frames: usize) -> PathBuf {
    let path = dir.join("zero.json");
    let doc = serde_json::json!({
        "schema": "geofuse-config/1",
        "seed": seed,
        "generate": {
            "n_objects": objects,
            "n_frames": frames,
            "noise": {
                "odom_sigma": { "rot": 0.0, "trans": 0.0 },
                "meas_sigma": { "rot": 0.0, "trans": 0.0 },
                "false_positive_rate": 0.0,
                "miss_rate": 0.0,
                "class_confusion_rate": 0.0
            }
        }
    });
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn read_maps(run: &Path) -> Vec<KeyframeMap> {
    let dir = run.join("maps");
    let mut paths: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths.iter().map(|p| serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()).collect()
}

#[test]
fn help_exits_zero() {
    let out = ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen", "run", "eval", "bench", "all"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_and_config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    assert_eq!(geofuse(&["gen", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(geofuse(&["run", "--variant", "nope", "--out", out]).status.code(), Some(1));
    assert_eq!(geofuse(&["gen", "--objects", "0", "--out", out]).status.code(), Some(1));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"schema": "geofuse-config/1", "seeds": 2}"#).unwrap();
    assert_eq!(geofuse(&["gen", "--config", s(&bad), "--out", out]).status.code(), Some(1));
    fs::write(&bad, r#"{"schema": "other/9"}"#).unwrap();
    assert_eq!(geofuse(&["gen", "--config", s(&bad), "--out", out]).status.code(), Some(1));
    let missing = tmp.path().join("missing.json");
    assert_eq!(geofuse(&["gen", "--config", s(&missing), "--out", out]).status.code(), Some(1));

    // No dataset has been generated here yet.
    let res = geofuse(&["run", "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("geofuse gen"));
    assert_eq!(geofuse(&["eval", "--out", out]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let res = geofuse(&["gen", "--objects", "1", "--frames", "2", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["gen", "--seed", "5", "--objects", "2", "--frames", "6", "--out", s(dir)]);
    }
    let fa = files_under(&a.join("dataset"));
    assert_eq!(fa, files_under(&b.join("dataset")));
    assert!(fa.iter().any(|p| p.ends_with("scene.json")));
    assert_eq!(fa.iter().filter(|p| p.extension().is_some_and(|e| e == "depth")).count(), 6);
    for p in &fa {
        let x = fs::read(a.join("dataset").join(p)).unwrap();
        let y = fs::read(b.join("dataset").join(p)).unwrap();
        assert!(x == y, "{} differs between runs", p.display());
    }

    let ds = read_dataset(&a.join("dataset")).unwrap();
    assert_eq!((ds.scene.objects.len(), ds.frames.len()), (2, 6));
}

#[test]
fn zero_noise_run_recovers_the_scene_and_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = zero_noise_config(tmp.path());
    let out = tmp.path().join("out");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    ok(&["run", "--config", s(&cfg), "--out", s(&out), "--variant", "geofusion"]);

    let ds = read_dataset(&out.join("dataset")).unwrap();
    let run = out.join("runs").join("geofusion");
    for f in ["tracks.json", "timings.csv", "trace.jsonl"] {
        assert!(run.join(f).is_file(), "{f} not written");
    }
    let maps = read_maps(&run);
    assert_eq!(maps.len(), ds.frames.len());
    let last = maps.last().unwrap();
    assert_eq!(last.objects.len(), ds.scene.objects.len());
    for obj in &last.objects {
        let nearest = ds
            .scene
            .objects
            .iter()
            .filter(|o| o.class_id == obj.class_id)
            .map(|o| o.pose.distance_to(&obj.pose))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-6, "object {} is {nearest} from the truth", obj.id);
    }
    for (m, truth) in maps.iter().zip(ds.trajectory()) {
        assert!(m.camera.distance_to(&truth) < 1e-6, "camera {} off", m.t);
    }

    ok(&["eval", "--config", s(&cfg), "--out", s(&out)]);
    let metrics: Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let gf = &metrics["variants"][0];
    assert_eq!(gf["variant"], "geofusion");
    assert_eq!(gf["map_50_95"].as_f64().unwrap(), 1.0);
    let tables = fs::read_to_string(out.join("tables.csv")).unwrap();
    assert!(tables.starts_with("metric,geofusion"));
    assert!(out.join("curves.csv").is_file());
}

#[test]
fn runs_are_deterministic_apart_from_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let common = ["--seed", "2", "--objects", "3", "--frames", "12", "--out", s(&out)];
    ok(&[&["gen"][..], &common].concat());
    let strip = |maps: Vec<KeyframeMap>| -> Vec<Value> {
        maps.into_iter()
            .map(|m| {
                let mut v = serde_json::to_value(m).unwrap();
                v.as_object_mut().unwrap().remove("timings_ms");
                v
            })
            .collect()
    };
    let run = out.join("runs").join("geofusion");
    ok(&[&["run"][..], &common].concat());
    let first = strip(read_maps(&run));
    let tracks = fs::read(run.join("tracks.json")).unwrap();
    ok(&[&["run"][..], &common].concat());
    assert_eq!(first, strip(read_maps(&run)));
    assert_eq!(tracks, fs::read(run.join("tracks.json")).unwrap());
}

#[test]
fn variants_write_separate_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let common = ["--seed", "4", "--objects", "3", "--frames", "12", "--out", s(&out)];
    ok(&[&["gen"][..], &common].concat());
    for v in ["r-front", "b-slam"] {
        ok(&[&["run", "--variant", v][..], &common].concat());
    }

    // Without graph optimization every stage column is zero.
    let csv = fs::read_to_string(out.join("runs/r-front/timings.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("frame,assoc_ms,stage1_ms,relations_ms,stage2_ms"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert_eq!(&r[2..], &[0.0, 0.0, 0.0]);
    }
    let bslam = fs::read_to_string(out.join("runs/b-slam/timings.csv")).unwrap();
    assert!(bslam.lines().skip(1).any(|l| l.split(',').nth(2).unwrap() != "0.000"));

    // Eval picks up whichever runs exist, in canonical order.
    ok(&[&["eval"][..], &common].concat());
    let metrics: Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let names: Vec<&str> = metrics["variants"].as_array().unwrap().iter().map(|v| v["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["b-slam", "r-front"]);
}

#[test]
fn bench_reports_per_frame_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&["bench", "--seed", "1", "--objects", "2", "--frames", "6", "--out", s(&out)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(report["objects"], 2);
    assert_eq!(report["frames"], 6);
    assert_eq!(report["budget_ms"], 200.0);
    assert!(report["timings"]["mean_total_ms"].as_f64().unwrap() > 0.0);
    assert!(report["within_budget"].is_boolean());
}

fn write_maps(run: &Path, maps: &[KeyframeMap]) {
    for m in maps {
        let path = run.join("maps").join(format!("{:04}.json", m.t));
        fs::write(path, serde_json::to_string_pretty(m).unwrap()).unwrap();
    }
}

fn eval_metrics(cfg: &Path, out: &Path) -> Value {
    ok(&["eval", "--config", s(cfg), "--out", s(out)]);
    serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn empty_maps_score_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = zero_noise_config(tmp.path());
    let out = tmp.path().join("out");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    ok(&["run", "--config", s(&cfg), "--out", s(&out), "--variant", "geofusion"]);
    let run = out.join("runs").join("geofusion");
    let mut maps = read_maps(&run);
    for m in &mut maps {
        m.objects.clear();
    }
    write_maps(&run, &maps);
    let gf = &eval_metrics(&cfg, &out)["variants"][0];
    for key in ["map_50", "map_75", "map_50_95"] {
        assert_eq!(gf[key].as_f64().unwrap(), 0.0, "{key}");
    }
}

/// One object seen in two frames. Each handcrafted map holds the object at its
/// true pose and a displaced copy that overlaps nothing. Ranked by score the
/// detections are TP (0.9), FP (0.8), FP (0.7), TP (0.3) against two ground
/// truth boxes: precision 1, 1/2, 1/3, 1/2 at recall 1/2, 1/2, 1/2, 1. The
/// interpolated envelope gives AP = 0.5 * 1 + 0.5 * 0.5 = 0.75 at every IoU
/// threshold, since every overlap is either 1 or 0.
#[test]
fn handcrafted_maps_match_enumerated_ap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = zero_noise_scene(tmp.path(), 11, 1, 2);
    let out = tmp.path().join("out");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out)]);
    ok(&["run", "--config", s(&cfg), "--out", s(&out), "--variant", "geofusion"]);
    let ds = read_dataset(&out.join("dataset")).unwrap();
    let truth = &ds.scene.objects[0];
    let gts = ground_truth_boxes(&ds);
    assert_eq!(gts.len(), 2, "the object must be in view in both frames");

    let obj = |id: u32, pose: Pose, score: f64| MapObject {
        id,
        class_id: truth.class_id,
        pose,
        f_j: 1.0 - score,
        n_meas: 1,
        score,
    };
    let build = |decoy: Pose| -> Vec<KeyframeMap> {
        let mut maps = read_maps(&out.join("runs/geofusion"));
        for (m, (tp, fp)) in maps.iter_mut().zip([(0.9, 0.8), (0.3, 0.7)]) {
            m.camera = ds.frames[m.t].frame.pose;
            m.relations.clear();
            m.objects = vec![obj(1, truth.pose, tp), obj(2, decoy, fp)];
        }
        maps
    };
    // Pick a displacement whose box stays in the image and misses the truth.
    let [x, y, z] = truth.pose.translation_array();
    let q = truth.pose.quaternion_array();
    let maps = [0.3, -0.3]
        .into_iter()
        .flat_map(|d| [(d, 0.0), (0.0, d), (d, d), (d, -d)])
        .map(|(dx, dy)| build(Pose::from_arrays(q, [x + dx, y + dy, z])))
        .find(|maps| {
            let dets = map_detections(&ds, maps);
            dets.len() == 4
                && dets
                    .iter()
                    .filter(|d| d.source == 2)
                    .all(|d| gts.iter().all(|g| g.t != d.t || iou(&d.bbox, &g.bbox) == 0.0))
        })
        .expect("a displaced copy that overlaps nothing");
    write_maps(&out.join("runs/geofusion"), &maps);

    let gf = &eval_metrics(&cfg, &out)["variants"][0];
    for key in ["map_50", "map_75", "map_50_95"] {
        assert!((gf[key].as_f64().unwrap() - 0.75).abs() < 1e-12, "{key} = {}", gf[key]);
    }
}
