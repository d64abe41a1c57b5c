mod common;

use autograd::{Tensor, Var};
use ivtm::imaging::LuminanceMap;
use ivtm::model::{
    knn_graph, split_size, tfr_apply, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, TemporalBuffer,
};
use ivtm::Error;
use proptest::prelude::*;

fn small(tfr: bool) -> GeneratorConfig {
    GeneratorConfig { base_channels: 4, num_scales: 3, tfr_enabled: tfr, tfr_beta: 0.25, sfe_knn: 3, ..Default::default() }
}

fn input(seed: u64, shape: &[usize]) -> Var {
    let mut r = common::rng(seed);
    Var::constant(Tensor::from_vec(shape, common::uniform(&mut r, shape.iter().product(), 0.0, 1.0)).unwrap())
}

fn small_disc() -> Discriminator {
    Discriminator::new(DiscriminatorConfig { widths: vec![4, 8, 8] }, 3).unwrap()
}

#[test]
fn output_keeps_shape_and_range() {
    let g = Generator::new(small(false), 1).unwrap();
    let x = input(2, &[2, 1, 16, 24]);
    let out = g.forward_frame(&g.params().bind(false), &x, None).unwrap();
    assert_eq!(out.output.shape(), &[2, 1, 16, 24]);
    assert_eq!(out.penultimate.shape(), &[2, g.config().tap_channels(), 16, 24]);
    assert!(out.output.value().data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn head_on_tap_reproduces_output() {
    let g = Generator::new(small(false), 1).unwrap();
    let p = g.params().bind(false);
    let out = g.forward_frame(&p, &input(3, &[1, 1, 16, 16]), None).unwrap();
    assert_eq!(g.head(&p, &out.penultimate).unwrap().value(), out.output.value());
}

#[test]
fn repeated_forward_is_deterministic() {
    let g = Generator::new(small(true), 4).unwrap();
    let p = g.params().bind(false);
    let x = input(5, &[1, 3, 16, 16]);
    assert_eq!(g.forward_clip(&p, &x).unwrap().0.value(), g.forward_clip(&p, &x).unwrap().0.value());
}

#[test]
fn single_frame_matches_across_modes() {
    let video = Generator::new(small(true), 6).unwrap();
    let image = video.with_tfr(false).unwrap();
    let x = input(7, &[1, 1, 16, 16]);
    let mut buffer = video.new_buffer();
    let a = video.forward_frame(&video.params().bind(false), &x, Some(&mut buffer)).unwrap();
    let b = image.forward_frame(&image.params().bind(false), &x, None).unwrap();
    assert_eq!(a.penultimate.value(), b.penultimate.value());
    assert_eq!(buffer.frames(), 1);
}

#[test]
fn tfr_changes_later_frames_only() {
    let video = Generator::new(small(true), 8).unwrap();
    let image = video.with_tfr(false).unwrap();
    let x = input(9, &[1, 3, 16, 16]);
    let (a, _) = video.forward_clip(&video.params().bind(false), &x).unwrap();
    let (b, _) = image.forward_clip(&image.params().bind(false), &x).unwrap();
    let n = 16 * 16;
    assert_eq!(&a.value().data()[..n], &b.value().data()[..n]);
    assert_ne!(&a.value().data()[n..], &b.value().data()[n..]);
}

#[test]
fn batch_permutation_permutes_outputs() {
    let g = Generator::new(small(false), 10).unwrap();
    let p = g.params().bind(false);
    let x = input(11, &[3, 1, 16, 16]);
    let swapped = x.index_select(0, &[2, 0, 1]).unwrap();
    let (a, b) = (g.forward_frame(&p, &x, None).unwrap().output, g.forward_frame(&p, &swapped, None).unwrap().output);
    assert_eq!(a.index_select(0, &[2, 0, 1]).unwrap().value(), b.value());
}

#[test]
fn indivisible_sizes_are_rejected() {
    let g = Generator::new(small(false), 0).unwrap();
    assert_eq!(g.config().size_divisor(), 8);
    assert!(matches!(g.check_input(12, 16), Err(Error::ShapeNotDivisible { .. })));
}

#[test]
fn too_small_beta_is_rejected() {
    let cfg = GeneratorConfig { tfr_beta: 1.0 / 64.0, tfr_enabled: true, ..small(true) };
    assert!(matches!(Generator::new(cfg, 0), Err(Error::BetaTooSmall { .. })));
}

#[test]
fn split_sizes() {
    assert_eq!(split_size(1.0 / 32.0, 32), 1);
    assert_eq!(split_size(1.0 / 32.0, 256), 8);
    assert_eq!(split_size(0.25, 6), 1);
}

#[test]
fn zero_beta_is_a_no_op() {
    let ft = input(12, &[1, 8, 2, 2]);
    let prev = input(13, &[1, 8, 2, 2]);
    assert_eq!(tfr_apply(&ft, &prev, 0.0).unwrap().value(), ft.value());
}

#[test]
fn image_mode_inference_creates_no_buffer() {
    let g = Generator::new(small(false), 14).unwrap();
    let before = TemporalBuffer::instances_created();
    let frames = vec![LuminanceMap::normalized(16, 16, vec![0.4; 256]).unwrap(); 3];
    g.tonemap_frames(&frames, None).unwrap();
    g.forward_clip(&g.params().bind(false), &input(15, &[1, 3, 16, 16])).unwrap();
    assert_eq!(TemporalBuffer::instances_created(), before);
}

#[test]
fn tonemap_requires_normalized_frames() {
    let g = Generator::new(small(false), 0).unwrap();
    let raw = LuminanceMap::raw(16, 16, vec![3.0; 256]).unwrap();
    assert!(g.tonemap_frames(&[raw], None).is_err());
}

#[test]
fn uniform_nodes_give_uniform_graph_rows() {
    let nodes = vec![0.5; 6 * 3];
    let g = knn_graph(&nodes, 6, 3, 2).unwrap();
    assert_eq!(g[0], vec![1, 2]);
    assert_eq!(g[5], vec![0, 1]);
}

#[test]
fn generator_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Generator::new(small(true), 16).unwrap();
    g.save(dir.path(), serde_json::json!({}), 2, 40).unwrap();
    let back = Generator::load(dir.path(), None).unwrap();
    assert_eq!(back.params().fingerprint(), g.params().fingerprint());
    let image = Generator::load(dir.path(), Some(&small(false))).unwrap();
    assert!(!image.config().tfr_enabled);
    let other = GeneratorConfig { base_channels: 8, ..small(true) };
    assert!(matches!(Generator::load(dir.path(), Some(&other)), Err(Error::CheckpointMismatch(_))));
}

#[test]
fn discriminator_scores_are_per_sample() {
    let d = small_disc();
    let p = d.params().bind(false);
    let x = input(17, &[1, 1, 32, 32]);
    let twice = Var::concat(&[x.clone(), x.clone()], 0).unwrap();
    let s2 = d.score(&p, &twice).unwrap();
    let s1 = d.score(&p, &x).unwrap();
    assert_eq!(s2.shape(), &[2]);
    assert_eq!(s2.value().data()[0], s2.value().data()[1]);
    assert!((s2.value().data()[0] - s1.value().data()[0]).abs() < 1e-12);
    let f = d.features(&p, &x).unwrap();
    assert_eq!(f.shape()[1], d.config().feature_channels());
    assert_eq!(d.features(&p, &x).unwrap().value(), f.value());
}

#[test]
fn parameter_fingerprints_track_changes() {
    let g = Generator::new(small(false), 18).unwrap();
    let mut h = g.clone();
    assert_eq!(g.params().fingerprint(), h.params().fingerprint());
    let (_, t) = h.params_mut().iter_mut().next().unwrap();
    t.data_mut()[0] += 1e-12;
    assert_ne!(g.params().fingerprint(), h.params().fingerprint());
    assert_eq!(Generator::new(small(false), 18).unwrap().params().fingerprint(), g.params().fingerprint());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identical_frames_give_identical_outputs(seed in any::<u64>(), t in 2usize..4) {
        let video = Generator::new(small(true), seed).unwrap();
        let image = video.with_tfr(false).unwrap();
        let frame = input(seed, &[1, 1, 16, 16]).value().data().to_vec();
        let clip = Var::constant(Tensor::from_vec(&[1, t, 16, 16], frame.repeat(t)).unwrap());
        let (a, _) = video.forward_clip(&video.params().bind(false), &clip).unwrap();
        let (b, _) = image.forward_clip(&image.params().bind(false), &clip).unwrap();
        prop_assert_eq!(a.value(), b.value());
        let n = 256;
        for i in 1..t {
            prop_assert_eq!(&a.value().data()[..n], &a.value().data()[i * n..(i + 1) * n]);
        }
    }

    #[test]
    fn tfr_is_parameter_free(base in 2usize..9, scales in 2usize..5) {
        let cfg = GeneratorConfig { base_channels: base * 2, num_scales: scales, tfr_beta: 0.5, sfe_knn: 2, ..Default::default() };
        let on = Generator::new(GeneratorConfig { tfr_enabled: true, ..cfg.clone() }, 0).unwrap();
        let off = Generator::new(cfg, 0).unwrap();
        prop_assert_eq!(on.parameter_count(), off.parameter_count());
        prop_assert_eq!(on.mac_count(64, 64), off.mac_count(64, 64));
    }

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), n in 2usize..16, d in 1usize..5, k in 1usize..6) {
        let k = k.min(n - 1);
        let mut r = common::rng(seed);
        let nodes = common::uniform(&mut r, n * d, -1.0, 1.0);
        prop_assert_eq!(knn_graph(&nodes, n, d, k).unwrap(), common::knn(&nodes, n, d, k));
    }

    #[test]
    fn output_resolution_matches_input(hm in 1usize..4, wm in 1usize..4) {
        let g = Generator::new(small(false), 0).unwrap();
        let (h, w) = (16 * hm, 16 * wm);
        let out = g.forward_frame(&g.params().bind(false), &input(1, &[1, 1, h, w]), None).unwrap().output;
        prop_assert_eq!(out.shape(), &[1, 1, h, w]);
    }
}
