use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bangkit_core::eval::{dataset_stats, DatasetStats, Histogram};
use bangkit_core::eval::{frame_count_study, FrameStudyRow, StudyConfig};
use bangkit_core::eval::{evaluate_tracking, EvalReport};
use bangkit_core::mesh::{build_sdf, connected_components, default_weld_eps, load_mesh, PartSet};
use bangkit_core::synth::assembly::guillotine_boxes;
use bangkit_core::synth::{synthesize_asset, NormalizeTransform, SequenceManifest};
use bangkit_core::track::{extract_exploded_parts, track_extracted};
use bangkit_toy::{run_toycheck, ToyCheckConfig, ToyCheckReport, ToyDims};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::pool::par_map;
use crate::seqdir::{read_json, read_sequence_dir, write_json, write_sequence_dir, TrajectoryFile, EVAL_REPORT, MANIFEST, TRAJECTORY};

pub const SUMMARY: &str = "summary.json";
pub const SEQUENCES_DIR: &str = "sequences";
pub const REJECTED_DIR: &str = "rejected";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: String,
    pub accepted: bool,
    /// `load`, `filter`, `sequence`, or empty when accepted.
    pub stage: String,
    pub part_count: usize,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub assets: Vec<AssetRecord>,
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading input directory {}", dir.display()))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no .obj meshes in {}", dir.display());
    }
    Ok(files)
}

fn asset_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Split, filter and explode every mesh in `input`; write accepted sequences
/// and rejection records under `cfg.out`.
pub fn cmd_synth(input: &Path, cfg: &PipelineConfig) -> Result<SynthSummary> {
    let files = mesh_files(input)?;
    let seq_root = cfg.out.join(SEQUENCES_DIR);
    let rej_root = cfg.out.join(REJECTED_DIR);
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let synth = cfg.synth_config();
    let results = par_map(&files, cfg.threads, |path| -> Result<AssetRecord> {
        let id = asset_id(path);
        let reject = |stage: &str, part_count: usize, reasons: Vec<String>| AssetRecord {
            asset_id: id.clone(),
            accepted: false,
            stage: stage.to_string(),
            part_count,
            reasons,
        };
        let record = match load_mesh(path) {
            Err(e) => reject("load", 0, vec![e.to_string()]),
            Ok(load) => {
                let out = synthesize_asset(&id, &load.mesh, &synth)?;
                let filter = out.filter.as_ref();
                let part_count = filter.map_or(0, |f| f.part_count);
                match (&out.manifest, &out.sequence) {
                    (Some(m), Some(seq)) if out.accepted() => {
                        write_sequence_dir(&seq_root.join(&id), seq, m)?;
                        log::info!("{id}: accepted, {} parts", m.part_count);
                        AssetRecord { asset_id: id.clone(), accepted: true, stage: String::new(), part_count, reasons: vec![] }
                    }
                    (Some(m), _) => reject("sequence", part_count, m.flags.reasons.clone()),
                    _ => reject("filter", part_count, filter.map(|f| f.reasons.clone()).unwrap_or_default()),
                }
            }
        };
        if !record.accepted {
            std::fs::create_dir_all(&rej_root)?;
            write_json(&rej_root.join(format!("{id}.json")), &record)?;
            log::info!("{id}: rejected at {}: {}", record.stage, record.reasons.join("; "));
        }
        Ok(record)
    });
    let assets = results.into_iter().collect::<Result<Vec<_>>>()?;
    let accepted = assets.iter().filter(|a| a.accepted).count();
    let summary = SynthSummary { accepted, rejected: assets.len() - accepted, assets };
    write_json(&cfg.out.join(SUMMARY), &summary)?;
    Ok(summary)
}

pub fn synth_table(s: &SynthSummary) -> String {
    let mut t = format!("{:<24} {:<9} {:>5}  reasons\n", "asset", "status", "parts");
    for a in &s.assets {
        let status = if a.accepted { "accepted".to_string() } else { a.stage.clone() };
        let _ = writeln!(t, "{:<24} {:<9} {:>5}  {}", a.asset_id, status, a.part_count, a.reasons.join("; "));
    }
    let _ = writeln!(t, "accepted {} / rejected {}", s.accepted, s.rejected);
    t
}

/// Fit trajectories to a sequence directory; writes `trajectory.json` into
/// `out` or, by default, the sequence directory.
pub fn cmd_track(seq_dir: &Path, cfg: &PipelineConfig, out: Option<&Path>) -> Result<TrajectoryFile> {
    let (_, seq) = read_sequence_dir(seq_dir)?;
    let extracted = extract_exploded_parts(&seq)?;
    if let Some(w) = &extracted.warning {
        log::warn!("{}: {w}", seq_dir.display());
    }
    let start = Instant::now();
    let grids = par_map(&seq.frames, cfg.threads, |f| build_sdf(f, cfg.sdf_res))
        .into_iter()
        .collect::<bangkit_core::Result<Vec<_>>>()?;
    log::info!("fields built in {:.2}s", start.elapsed().as_secs_f64());
    let sol = track_extracted(&seq, &extracted.parts, &grids, &cfg.track_config())?;
    log::info!("tracked {} parts in {:.2}s", sol.translations.len(), start.elapsed().as_secs_f64());
    let file = TrajectoryFile::from(&sol);
    let dir = out.unwrap_or(seq_dir);
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(TRAJECTORY), &file)?;
    Ok(file)
}

pub fn track_table(t: &TrajectoryFile) -> String {
    let mut s = format!("{:>4} {:>12} {:>12} {:>12} {:>12}\n", "part", "vx", "vy", "vz", "objective");
    for (i, v) in t.v.iter().enumerate() {
        let obj = t.part_objectives.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(s, "{i:>4} {:>12.6} {:>12.6} {:>12.6} {obj:>12.3e}", v[0], v[1], v[2]);
    }
    let _ = writeln!(
        s,
        "objective {:.4e}, iterations {}, converged {}, mask_overlaps {}",
        t.objective, t.iterations, t.converged, t.mask_overlaps
    );
    s
}

/// Score a trajectory against the sequence's assembled frame; writes `eval.json`.
pub fn cmd_eval(seq_dir: &Path, cfg: &PipelineConfig, trajectory: Option<&Path>, out: Option<&Path>) -> Result<EvalReport> {
    let (_, seq) = read_sequence_dir(seq_dir)?;
    let tpath = trajectory.map(Path::to_path_buf).unwrap_or_else(|| seq_dir.join(TRAJECTORY));
    let traj: TrajectoryFile = read_json(&tpath)?;
    let extracted = extract_exploded_parts(&seq)?;
    if traj.v.len() != extracted.parts.len() {
        bail!("trajectory has {} parts, the sequence has {}", traj.v.len(), extracted.parts.len());
    }
    let report = evaluate_tracking(&seq, &extracted.parts, &(&traj).into(), &cfg.eval_config())?;
    let dir = out.unwrap_or(seq_dir);
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(EVAL_REPORT), &report)?;
    Ok(report)
}

pub fn eval_table(r: &EvalReport) -> String {
    let mut s = format!("{:>9} {:>12} {:>8} {:>12}\n", "predicted", "ground_truth", "iou", "volume");
    for m in &r.parts {
        let gt = m.ground_truth.map_or("-".to_string(), |g| g.to_string());
        let _ = writeln!(s, "{:>9} {gt:>12} {:>8.4} {:>12.4e}", m.predicted, m.iou, m.volume);
    }
    let _ = writeln!(s, "wIoU {:.4}, sdf_objective {:.4e}, frames {}", r.wiou, r.sdf_objective, r.frame_count);
    s
}

fn sequence_dirs(dataset: &Path) -> Result<Vec<PathBuf>> {
    let root = if dataset.join(SEQUENCES_DIR).is_dir() { dataset.join(SEQUENCES_DIR) } else { dataset.to_path_buf() };
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no sequence directories under {}", root.display());
    }
    Ok(dirs)
}

/// Dataset histograms over every sequence under `dataset`; writes `stats.json`
/// and one CSV per histogram into `cfg.out`.
pub fn cmd_stats(dataset: &Path, cfg: &PipelineConfig) -> Result<DatasetStats> {
    let dirs = sequence_dirs(dataset)?;
    let loaded = par_map(&dirs, cfg.threads, |d| -> Result<(SequenceManifest, PartSet)> {
        let (m, seq) = read_sequence_dir(d)?;
        let tf = NormalizeTransform::from(m.transform);
        let source: Vec<_> = seq.frame_parts(0)?.iter().map(|p| p.mapped(|v| tf.invert(v))).collect();
        Ok((m.clone(), PartSet::from_part_meshes(&m.asset_id, source)))
    });
    let (manifests, parts): (Vec<_>, Vec<_>) = loaded.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let stats = dataset_stats(&manifests, &parts, &cfg.stats)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("stats.json"), &stats)?;
    for (name, h) in stats_histograms(&stats) {
        std::fs::write(cfg.out.join(format!("{name}.csv")), h.to_csv())?;
    }
    Ok(stats)
}

fn stats_histograms(s: &DatasetStats) -> [(&'static str, &Histogram); 4] {
    [
        ("part_count", &s.part_count),
        ("expansion_ratio", &s.expansion_ratio),
        ("log_volume_ratio", &s.log_volume_ratio),
        ("log_initial_overlap", &s.log_initial_overlap),
    ]
}

pub fn stats_table(s: &DatasetStats) -> String {
    let mut t = format!("{} assets\n{:<20} {:>10} {:>10} {:>6}\n", s.asset_count, "histogram", "lo", "hi", "bins");
    for (name, h) in stats_histograms(s) {
        let _ = writeln!(t, "{name:<20} {:>10.4} {:>10.4} {:>6}", h.lo, h.hi, h.counts.len());
    }
    t
}

/// Parse `key=value` pairs (comma separated) over `base`.
pub fn parse_dims(text: &str, base: &ToyDims) -> Result<ToyDims> {
    let mut d = base.clone();
    for pair in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = pair.split_once('=').with_context(|| format!("expected key=value, got `{pair}`"))?;
        let v: usize = v.trim().parse().with_context(|| format!("bad value in `{pair}`"))?;
        match k.trim() {
            "latent_tokens" | "L" => d.latent_tokens = v,
            "channels" | "C" => d.channels = v,
            "heads" => d.heads = v,
            "dit_layers" => d.dit_layers = v,
            "adapter_layers" => d.adapter_layers = v,
            "prompt_layers" => d.prompt_layers = v,
            other => bail!("unknown dimension `{other}`"),
        }
    }
    d.validate()?;
    Ok(d)
}

/// Run the toy-model suite; writes `toycheck.json` into `cfg.out`.
pub fn cmd_toycheck(tc: &ToyCheckConfig, cfg: &PipelineConfig) -> Result<ToyCheckReport> {
    let report = run_toycheck(tc)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("toycheck.json"), &report)?;
    Ok(report)
}

pub fn toycheck_table(r: &ToyCheckReport) -> String {
    let mut s = format!("{:<42} {:<5} {:>11} {:>9}\n", "check", "pass", "measured", "tol");
    for c in &r.checks {
        let _ = writeln!(s, "{:<42} {:<5} {:>11.3e} {:>9.1e}", c.name, c.passed, c.measured, c.tolerance);
    }
    let failed = r.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s, "{} checks, {failed} failed, {:.1}s", r.checks.len(), r.seconds);
    s
}

/// Synthetic guillotine assemblies with 3 to 8 parts.
pub fn synthetic_assets(count: usize, seed: u64) -> Vec<PartSet> {
    (0..count)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            PartSet::from_part_meshes(&format!("synthetic_{i}"), guillotine_boxes(3 + i % 6, s))
        })
        .collect()
}

fn load_assets(input: &Path) -> Result<Vec<PartSet>> {
    let mut out = Vec::new();
    for path in mesh_files(input)? {
        let mesh = load_mesh(&path)?.mesh;
        let parts = connected_components(&mesh, default_weld_eps(&mesh))?;
        if parts.len() < 2 {
            log::warn!("{}: single part, skipped", path.display());
            continue;
        }
        out.push(parts);
    }
    if out.is_empty() {
        bail!("no multi-part meshes in {}", input.display());
    }
    Ok(out)
}

/// Tracking accuracy and time as a function of frame count; writes `framestudy.json`.
pub fn cmd_framestudy(input: Option<&Path>, assets: usize, frames: &[usize], cfg: &PipelineConfig) -> Result<Vec<FrameStudyRow>> {
    let sets = match input {
        Some(dir) => load_assets(dir)?,
        None => synthetic_assets(assets, cfg.seed),
    };
    let synth = cfg.synth_config();
    let study = StudyConfig {
        explosion: synth.explosion,
        track: cfg.track_config(),
        eval: cfg.eval_config(),
        sdf_res: cfg.sdf_res,
    };
    let rows = frame_count_study(&sets, frames, &study)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("framestudy.json"), &rows)?;
    Ok(rows)
}

pub fn framestudy_table(rows: &[FrameStudyRow]) -> String {
    let mut s = format!("{:>6} {:>10} {:>14} {:>10}\n", "frames", "wIoU", "sdf_objective", "seconds");
    for r in rows {
        let _ = writeln!(s, "{:>6} {:>10.4} {:>14.4e} {:>10.3}", r.frames, r.mean_wiou, r.mean_sdf_objective, r.mean_seconds);
    }
    s
}
