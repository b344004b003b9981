use bangkit_core::eval::{evaluate_tracking, EvalConfig};
use bangkit_core::mesh::{build_sdf, connected_components, convex_hull_volume, default_weld_eps, load_mesh, write_obj, PartSet, TriangleMesh};
use bangkit_core::synth::assembly::{guillotine_boxes, random_boxes};
use bangkit_core::synth::{optimize_explosion, synthesize_asset, ExplosionConfig, SequenceManifest, SynthConfig};
use bangkit_core::track::{extract_exploded_parts, track_extracted, TrackConfig};
use proptest::prelude::*;

fn separated(n: usize, seed: u64) -> TriangleMesh {
    let parts: Vec<TriangleMesh> = guillotine_boxes(n, seed)
        .iter()
        .map(|m| {
            let c = m.aabb().center();
            m.mapped(|p| c + (p - c) * 0.99)
        })
        .collect();
    TriangleMesh::concat("asset", parts.iter())
}

#[test]
fn obj_file_round_trip_keeps_parts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.obj");
    let mesh = separated(4, 3);
    std::fs::write(&path, write_obj(&mesh)).unwrap();
    let loaded = load_mesh(&path).unwrap().mesh;
    assert_eq!(loaded.vertices.len(), mesh.vertices.len());
    assert_eq!(loaded.triangles, mesh.triangles);
    let parts = connected_components(&loaded, default_weld_eps(&loaded)).unwrap();
    assert_eq!(parts.len(), 4);
}

#[test]
fn hull_volume_is_stable_across_calls() {
    let mesh = separated(5, 8);
    let first = convex_hull_volume(&mesh.vertices);
    for _ in 0..10 {
        assert_eq!(convex_hull_volume(&mesh.vertices).to_bits(), first.to_bits());
    }
}

#[test]
fn synthesize_track_and_score() {
    let mut cfg = SynthConfig::default();
    cfg.filter.min_vertices = 8;
    let out = synthesize_asset("a", &separated(4, 12), &cfg).unwrap();
    assert!(out.accepted(), "{:?}", out.manifest.as_ref().map(|m| &m.flags.reasons));
    let seq = out.sequence.unwrap();

    let text = out.manifest.unwrap().to_json().unwrap();
    let back = SequenceManifest::from_json(&text).unwrap();
    assert_eq!(back.part_count, 4);
    assert_eq!(back.to_json().unwrap(), text);

    let grids: Vec<_> = seq.frames.iter().map(|f| build_sdf(f, 64).unwrap()).collect();
    let ex = extract_exploded_parts(&seq).unwrap();
    assert!(ex.warning.is_none());
    let sol = track_extracted(&seq, &ex.parts, &grids, &TrackConfig::default()).unwrap();
    let report = evaluate_tracking(&seq, &ex.parts, &sol, &EvalConfig::default()).unwrap();
    assert!(report.wiou >= 0.99, "wIoU {}", report.wiou);
    assert!(report.sdf_objective <= 2.0 * grids[0].cell_size, "{}", report.sdf_objective);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn explosion_overlap_never_increases(n in 2usize..7, seed in 0u64..10_000) {
        let parts = PartSet::from_part_meshes("r", random_boxes(n, seed));
        let r = optimize_explosion(&parts, &ExplosionConfig::default()).unwrap();
        for w in r.overlap_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert_eq!(r.translations.len(), n);
        let bound = ExplosionConfig::default().max_translation * parts.aabb().diagonal();
        for t in &r.translations {
            prop_assert!(t.norm() <= bound * (1.0 + 1e-9));
        }
    }
}
