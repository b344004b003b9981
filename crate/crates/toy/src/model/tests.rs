use super::*;
use crate::check::{random_cloud, random_matrix};
use bangkit_core::Aabb;
use proptest::prelude::*;

fn model() -> ToyModel {
    ToyModel::new(ToyDims::default(), 3).unwrap()
}

#[test]
fn dims_validation() {
    assert!(ToyDims::default().validate().is_ok());
    assert!(ToyDims { heads: 3, ..ToyDims::default() }.validate().is_err());
    assert!(ToyDims { dit_layers: 0, ..ToyDims::default() }.validate().is_err());
}

#[test]
fn encoder_shape_and_permutation() {
    let m = model();
    let cloud = random_cloud(50, 1);
    let a = m.encode_geometry(&cloud, 8, TokenKind::Latent).unwrap();
    assert_eq!(a.data.dim(), (1, 7, 16));
    let mut rev = cloud.clone();
    rev.points.reverse();
    let b = m.encode_geometry(&rev, 8, TokenKind::Latent).unwrap();
    let diff = a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-5, "{diff}");
    let mut moved = cloud.clone();
    moved.points.iter_mut().for_each(|p| *p += Vec3::new(0.1, 0.0, 0.0));
    assert_ne!(m.encode_geometry(&moved, 8, TokenKind::Latent).unwrap(), a);
    assert!(matches!(
        m.encode_geometry(&random_cloud(3, 0), 8, TokenKind::Latent),
        Err(ToyError::CloudTooSmall { .. })
    ));
}

#[test]
fn decoder_contract() {
    let m = model();
    let z = TokenBatch::from_matrix(random_matrix(32, 16, 2), TokenKind::Latent);
    let q = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.0, 0.9), Vec3::new(0.1, 0.2, 0.3)];
    let out = m.decode_queries(&z, &q).unwrap();
    assert_eq!(out.len(), 3);
    assert_eq!(out[0], out[2]);
    let g = TokenBatch { kind: TokenKind::GeometryCond, ..z };
    assert!(m.decode_queries(&g, &q).is_err());
}

#[test]
fn adapter_condition_depends_on_time() {
    let m = model();
    let g = TokenBatch::from_matrix(random_matrix(8, 16, 4), TokenKind::GeometryCond);
    let a = m.adapter_condition(&g, 0.2, 3).unwrap();
    let b = m.adapter_condition(&g, 0.8, 3).unwrap();
    assert_eq!(a.data.dim(), g.data.dim());
    assert_ne!(a, b);
    let mut frozen = m.clone();
    frozen.params.zero_prefix("adapter.");
    for l in 0..frozen.dims.adapter_layers {
        frozen.params.randomize_prefix(&format!("adapter.{l}.attn."), 1);
        frozen.params.randomize_prefix(&format!("adapter.{l}.mlp."), 1);
    }
    let a = frozen.adapter_condition(&g, 0.2, 3).unwrap();
    let b = frozen.adapter_condition(&g, 0.8, 3).unwrap();
    assert!(a.bitwise_eq(&b));
    assert!(m.adapter_condition(&g, 1.5, 3).is_err());
}

#[test]
fn injection_identities() {
    let m = model();
    let x = TokenBatch::from_matrix(random_matrix(32, 16, 5), TokenKind::Latent);
    let g = TokenBatch::from_matrix(random_matrix(6, 16, 6), TokenKind::GeometryCond);
    let base = m.base_cross(&x, 1).unwrap();
    assert!(m.adapter_inject(&x, &g, 1).unwrap().bitwise_eq(&base));
    let live = m.clone().with_live_branches();
    assert!(!live.adapter_inject(&x, &g, 1).unwrap().bitwise_eq(&base));
    let bad = TokenBatch::from_matrix(random_matrix(6, 8, 6), TokenKind::GeometryCond);
    assert!(m.adapter_inject(&x, &bad, 0).is_err());
}

#[test]
fn prompt_tokens_layout() {
    let m = model();
    let b = Aabb { min: [-0.2, -0.2, -0.2], max: [0.3, 0.4, 0.1] };
    let one = PromptSet { bboxes: vec![b], region_clouds: vec![], covers_all_parts: false };
    let t = m.prompt_tokens(&one).unwrap();
    assert_eq!(t.tokens(), 3);
    let two = PromptSet { bboxes: vec![b, b], ..one.clone() };
    let t2 = m.prompt_tokens(&two).unwrap().matrix();
    assert_ne!(t2.row(0), t2.row(2));
    let flipped = PromptSet { covers_all_parts: true, ..one.clone() };
    let f = m.prompt_tokens(&flipped).unwrap().matrix();
    let t = t.matrix();
    assert_eq!(t.row(0), f.row(0));
    assert_eq!(t.row(1), f.row(1));
    assert_ne!(t.row(2), f.row(2));
    let empty = PromptSet { bboxes: vec![], region_clouds: vec![], covers_all_parts: true };
    assert!(matches!(m.prompt_tokens(&empty), Err(ToyError::EmptyPrompts)));
}

#[test]
fn single_frame_temporal_keeps_shape() {
    let m = model();
    let f = TokenBatch::from_matrix(random_matrix(32, 16, 7), TokenKind::Latent);
    let out = m.temporal_attention(std::slice::from_ref(&f), &[0.5], 0).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].data.dim(), (1, 32, 16));
    assert!(m.temporal_attention(&[f.clone(), f], &[0.5], 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_rows_are_distributions(seed in 0u64..1000, n in 1usize..12, m in 1usize..12) {
        let model = model();
        let mut f = model.fwd();
        let q = f.g.leaf(random_matrix(n, 16, seed));
        let k = f.g.leaf(random_matrix(m, 16, seed + 1));
        let v = f.g.leaf(random_matrix(m, 16, seed + 2));
        let out = f.attend(q, k, v);
        prop_assert_eq!(f.g.value(out).dim(), (n, 16));
        let s = f.g.leaf(random_matrix(n, m, seed + 3) * 10.0);
        let w = f.g.softmax(s);
        for row in f.g.value(w).rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn decode_is_row_wise(seed in 0u64..1000) {
        let model = model();
        let z = TokenBatch::from_matrix(random_matrix(32, 16, seed), TokenKind::Latent);
        let pts = random_cloud(5, seed).points;
        let all = model.decode_queries(&z, &pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let one = model.decode_queries(&z, std::slice::from_ref(p)).unwrap();
            prop_assert!((one[0] - all[i]).abs() < 1e-12);
        }
    }
}
