use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bangkit_core::mesh::shapes::unit_cube;
use bangkit_core::mesh::{write_obj, TriangleMesh};
use bangkit_core::synth::assembly::guillotine_boxes;
use serde_json::Value;

fn bangkit(args: &[&str], log: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bangkit"));
    cmd.args(args).env_remove("BANGKIT_LOG");
    if let Some(level) = log {
        cmd.env("BANGKIT_LOG", level);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Boxes shrunk slightly about their centers so they stay separate components.
fn write_boxes(path: &Path, n: usize, seed: u64) {
    let parts: Vec<TriangleMesh> = guillotine_boxes(n, seed)
        .iter()
        .map(|m| {
            let c = m.aabb().center();
            m.mapped(|p| c + (p - c) * 0.99)
        })
        .collect();
    std::fs::write(path, write_obj(&TriangleMesh::concat("asset", parts.iter()))).unwrap();
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        std::fs::create_dir_all(ws.input()).unwrap();
        std::fs::write(ws.config(), "seed = 5\nsdf_res = 64\n[filter]\nmin_vertices = 8\n").unwrap();
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn input(&self) -> PathBuf {
        self.path("in")
    }

    fn config(&self) -> PathBuf {
        self.path("c.toml")
    }

    fn synth(&self, out: &str) -> Output {
        bangkit(&["synth", s(&self.input()), "--config", s(&self.config()), "--out", s(&self.path(out))], None)
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_sequences_and_rejection_records() {
    let ws = Workspace::new();
    write_boxes(&ws.input().join("three.obj"), 3, 4);
    std::fs::write(ws.input().join("lone.obj"), write_obj(&unit_cube())).unwrap();
    std::fs::write(ws.input().join("broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    std::fs::write(ws.input().join("notes.txt"), "ignored").unwrap();

    let o = ws.synth("out");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let seq = ws.path("out/sequences/three");
    for k in 0..5 {
        assert!(seq.join(format!("frame_{k}.obj")).is_file(), "frame {k}");
    }
    assert!(!seq.join("frame_5.obj").exists());
    let manifest = read_json(&seq.join("manifest.json"));
    assert_eq!(manifest["part_count"], 3);
    assert_eq!(manifest["times"].as_array().unwrap().len(), 5);

    let lone = read_json(&ws.path("out/rejected/lone.json"));
    assert_eq!(lone["accepted"], false);
    assert_eq!(lone["stage"], "filter");
    let broken = read_json(&ws.path("out/rejected/broken.json"));
    assert_eq!(broken["stage"], "load");

    let summary = read_json(&ws.path("out/summary.json"));
    assert_eq!(summary["accepted"], 1);
    assert_eq!(summary["rejected"], 2);

    // same inputs, same seed: identical bytes
    assert_eq!(code(&ws.synth("again")), 0);
    assert_eq!(tree(&ws.path("out")), tree(&ws.path("again")));
}

#[test]
fn track_and_eval_recover_a_synthesized_sequence() {
    let ws = Workspace::new();
    write_boxes(&ws.input().join("a.obj"), 3, 9);
    assert_eq!(code(&ws.synth("out")), 0);
    let seq = ws.path("out/sequences/a");
    let cfg = ws.config();

    let o = bangkit(&["track", s(&seq), "--config", s(&cfg)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let traj = read_json(&seq.join("trajectory.json"));
    assert_eq!(traj["mask_overlaps"], true);
    assert_eq!(traj["v"].as_array().unwrap().len(), 3);

    let o = bangkit(&["eval", s(&seq), "--config", s(&cfg)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&seq.join("eval.json"));
    assert!(report["wiou"].as_f64().unwrap() >= 0.99, "{report}");

    let alt = ws.path("unmasked");
    let o = bangkit(&["track", s(&seq), "--no-mask-overlaps", "--config", s(&cfg), "--out", s(&alt)], None);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&alt.join("trajectory.json"))["mask_overlaps"], false);
}

#[test]
fn truncated_sequence_is_an_io_error() {
    let ws = Workspace::new();
    write_boxes(&ws.input().join("a.obj"), 3, 2);
    assert_eq!(code(&ws.synth("out")), 0);
    let seq = ws.path("out/sequences/a");
    std::fs::remove_file(seq.join("frame_2.obj")).unwrap();
    let o = bangkit(&["track", s(&seq), "--config", s(&ws.config())], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame_2"));
}

#[test]
fn stats_reports_histograms() {
    let ws = Workspace::new();
    write_boxes(&ws.input().join("a.obj"), 3, 1);
    write_boxes(&ws.input().join("b.obj"), 5, 2);
    assert_eq!(code(&ws.synth("out")), 0);
    let stats_out = ws.path("stats");
    let o = bangkit(&["stats", s(&ws.path("out")), "--config", s(&ws.config()), "--out", s(&stats_out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stats_out.join("stats.json").is_file());
    let csvs = std::fs::read_dir(&stats_out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
}

#[test]
fn toycheck_passes_on_small_dims() {
    let ws = Workspace::new();
    let out = ws.path("toy");
    let o = bangkit(&["toycheck", "--dims", "L=8,channels=12,heads=2,adapter_layers=2", "--steps", "5", "--out", s(&out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&out.join("toycheck.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["dims"]["latent_tokens"], 8);
}

#[test]
fn framestudy_writes_one_row_per_frame_count() {
    let ws = Workspace::new();
    let out = ws.path("fs");
    let o = bangkit(&["framestudy", "--assets", "2", "--sdf-res", "40", "--out", s(&out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(&out.join("framestudy.json"));
    let frames: Vec<u64> = rows.as_array().unwrap().iter().map(|r| r["frames"].as_u64().unwrap()).collect();
    assert_eq!(frames, [2, 3, 4, 5]);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let ws = Workspace::new();
    assert_eq!(code(&bangkit(&[], None)), 1);
    assert_eq!(code(&bangkit(&["synth"], None)), 1);
    assert_eq!(code(&bangkit(&["synth", "x", "--bogus"], None)), 1);
    assert_eq!(code(&bangkit(&["--help"], None)), 0);
    assert_eq!(code(&bangkit(&["toycheck", "--dims", "wings=3"], None)), 1);

    let missing = ws.path("nope");
    assert_eq!(code(&bangkit(&["synth", s(&missing), "--out", s(&ws.path("o"))], None)), 1);

    let bad = ws.path("bad.toml");
    std::fs::write(&bad, "seed = 1\ncolour = \"red\"\n").unwrap();
    let o = bangkit(&["synth", s(&ws.input()), "--config", s(&bad)], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn log_level_follows_environment() {
    let ws = Workspace::new();
    write_boxes(&ws.input().join("a.obj"), 3, 3);
    let run = |level: &str, out: &str| {
        let o = bangkit(&["synth", s(&ws.input()), "--config", s(&ws.config()), "--out", s(&ws.path(out))], Some(level));
        assert_eq!(code(&o), 0);
        String::from_utf8_lossy(&o.stderr).into_owned()
    };
    assert!(run("error", "e").is_empty());
    let info = run("info", "i");
    assert!(info.contains("accepted"), "{info}");
    let debug = run("debug", "d");
    assert!(debug.len() > info.len());
}
