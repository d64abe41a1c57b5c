mod common;

use ivtm::data::toy::{toy_hdr, toy_hdr_video};
use ivtm::imaging::{extract_luminance, write_radiance, LuminanceMap};
use ivtm::metrics::{
    evaluate_testset, flow_registry, mapper_registry, rwe, rwe_pair, tmqi, warp, BuiltinFlow, FlowEstimator,
    FlowField, IdentityMapper, LinearMapper, ToneMapper, ZeroFlow, RWE_EPS,
};
use ivtm::{Error, Result};
use proptest::prelude::*;

/// Reports the same displacement everywhere.
struct ConstantFlow(f64, f64);

impl FlowEstimator for ConstantFlow {
    fn name(&self) -> String {
        "constant".into()
    }

    fn estimate(&self, f1: &LuminanceMap, _: &LuminanceMap) -> Result<FlowField> {
        Ok(FlowField::constant(f1.width(), f1.height(), self.0, self.1))
    }
}

fn plane(seed: u64, w: usize, h: usize, lo: f64, hi: f64) -> LuminanceMap {
    let mut r = common::rng(seed);
    LuminanceMap::raw(w, h, common::uniform(&mut r, w * h, lo, hi)).unwrap()
}

fn rwe_oracle(a: &[f64], b: &[f64]) -> f64 {
    2.0 * a.iter().zip(b).map(|(x, y)| (x - y).abs() / (x + y + RWE_EPS)).sum::<f64>() / a.len() as f64
}

#[test]
fn doubling_fixture() {
    let base = plane(1, 6, 6, 0.5, 1.0);
    let twice = base.scaled(2.0).unwrap();
    let e = rwe(&[base, twice], &ZeroFlow).unwrap();
    assert!((e - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn static_clip_has_zero_error() {
    let f = plane(2, 8, 8, 0.1, 1.0);
    assert!(rwe(&[f.clone(), f.clone(), f], &ZeroFlow).unwrap().abs() < 1e-6);
}

#[test]
fn rwe_needs_two_frames() {
    assert!(matches!(rwe(&[plane(3, 4, 4, 0.1, 1.0)], &ZeroFlow), Err(Error::TooFewFrames(1))));
}

#[test]
fn rwe_averages_pairs() {
    let clip: Vec<LuminanceMap> = (0..4).map(|s| plane(10 + s, 5, 4, 0.1, 1.0)).collect();
    let want = clip.windows(2).map(|p| rwe_oracle(p[0].values(), p[1].values())).sum::<f64>() / 3.0;
    assert!((rwe(&clip, &ZeroFlow).unwrap() - want).abs() < 1e-12);
}

#[test]
fn constant_flow_stub_drives_the_warp() {
    let (w, h) = (9, 7);
    let clip = vec![plane(20, w, h, 0.1, 1.0), plane(21, w, h, 0.1, 1.0)];
    let got = rwe(&clip, &ConstantFlow(1.5, -0.25)).unwrap();
    let warped = common::warp(clip[1].values(), w, h, &vec![1.5; w * h], &vec![-0.25; w * h]);
    assert!((got - rwe_oracle(clip[0].values(), &warped)).abs() < 1e-12);
}

#[test]
fn integer_flow_relocates_interior_pixels() {
    let f = plane(30, 10, 8, 0.0, 1.0);
    let out = warp(&f, &FlowField::constant(10, 8, 2.0, 1.0)).unwrap();
    for y in 0..7 {
        for x in 0..8 {
            assert_eq!(out.at(x, y), f.at(x + 2, y + 1));
        }
    }
}

#[test]
fn zero_flow_warp_is_identity() {
    let f = plane(31, 6, 5, 0.0, 3.0);
    assert_eq!(warp(&f, &FlowField::zeros(6, 5)).unwrap(), f);
}

#[test]
fn shifted_texture_has_small_error_with_builtin_flow() {
    let mut r = common::rng(40);
    let frames: Vec<LuminanceMap> = toy_hdr_video(&mut r, 64, 64, 3, 2, 0).iter().map(extract_luminance).collect();
    let ident = IdentityMapper.map_clip(&frames).unwrap();
    let builtin = rwe(&ident, &BuiltinFlow::default()).unwrap();
    let zero = rwe(&ident, &ZeroFlow).unwrap();
    assert!(builtin < zero, "builtin {builtin} vs zero {zero}");
}

#[test]
fn tmqi_is_deterministic_and_bounded() {
    let hdr = extract_luminance(&toy_hdr(&mut common::rng(50), 48, 48));
    let ldr = LinearMapper::map_one(&hdr).unwrap();
    let (a, b) = (tmqi(&hdr, &ldr).unwrap(), tmqi(&hdr, &ldr).unwrap());
    assert_eq!(a.q.to_bits(), b.q.to_bits());
    for v in [a.q, a.s, a.n] {
        assert!((0.0..=1.0).contains(&v), "{a:?}");
    }
}

#[test]
fn tmqi_prefers_a_log_mapping_to_a_constant() {
    let hdr = extract_luminance(&toy_hdr(&mut common::rng(51), 64, 64));
    let m = hdr.max();
    let log = LuminanceMap::normalized(64, 64, hdr.values().iter().map(|v| (1.0 + 100.0 * v / m).ln() / 101f64.ln()).collect())
        .unwrap();
    let flat = LuminanceMap::normalized(64, 64, vec![0.5; 64 * 64]).unwrap();
    let (good, bad) = (tmqi(&hdr, &log).unwrap(), tmqi(&hdr, &flat).unwrap());
    assert!(good.s > bad.s, "{good:?} vs {bad:?}");
    assert!(good.q > bad.q);
}

#[test]
fn tmqi_rejects_size_mismatch() {
    let a = plane(52, 8, 8, 0.1, 1.0);
    let b = LuminanceMap::normalized(4, 4, vec![0.5; 16]).unwrap();
    assert!(matches!(tmqi(&a, &b), Err(Error::ShapeMismatch(_))));
}

#[test]
fn registries_resolve_names() {
    assert_eq!(flow_registry().create("zero").unwrap().name(), "zero");
    assert_eq!(mapper_registry().create("linear").unwrap().name(), "linear");
    assert!(mapper_registry().create("nonexistent").is_err());
}

#[test]
fn testset_report_has_one_row_per_video() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = common::rng(60);
    for v in 0..3 {
        let d = dir.path().join(format!("v{v}"));
        std::fs::create_dir_all(&d).unwrap();
        for (t, f) in toy_hdr_video(&mut r, 32, 32, 4, 1, 0).iter().enumerate() {
            write_radiance(f, &d.join(format!("{t:03}.exr"))).unwrap();
        }
    }
    let report = evaluate_testset(dir.path(), &LinearMapper, &ZeroFlow, 3).unwrap();
    assert_eq!(report.videos.len(), 3);
    assert!(report.videos.iter().all(|v| v.frames == 3 && v.btmqi.is_none()));
    let csv = report.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(matches!(evaluate_testset(dir.path(), &LinearMapper, &ZeroFlow, 1), Err(Error::TooFewFrames(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(evaluate_testset(empty.path(), &LinearMapper, &ZeroFlow, 3), Err(Error::EmptyDataset(_))));
}

#[test]
fn flo_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = common::rng(70);
    let f = FlowField::new(4, 3, common::uniform(&mut r, 12, -3.0, 3.0), common::uniform(&mut r, 12, -3.0, 3.0)).unwrap();
    let p = dir.path().join("x.flo");
    f.write_flo(&p).unwrap();
    let back = FlowField::read_flo(&p).unwrap();
    for (a, b) in f.u().iter().chain(f.v()).zip(back.u().iter().chain(back.v())) {
        assert!((a - b).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rwe_ignores_global_scaling(seed in any::<u64>(), a in 0.1f64..20.0) {
        let clip: Vec<LuminanceMap> = (0..3).map(|i| plane(seed.wrapping_add(i), 6, 6, 0.2, 1.0)).collect();
        let scaled: Vec<LuminanceMap> = clip.iter().map(|f| f.scaled(a).unwrap()).collect();
        let (e, es) = (rwe(&clip, &ZeroFlow).unwrap(), rwe(&scaled, &ZeroFlow).unwrap());
        prop_assert!((e - es).abs() < 1e-5);
    }

    #[test]
    fn rwe_is_zero_only_for_matching_frames(seed in any::<u64>()) {
        let a = plane(seed, 5, 5, 0.1, 1.0);
        let b = plane(seed ^ 7, 5, 5, 0.1, 1.0);
        prop_assert_eq!(rwe_pair(&a, &a).unwrap(), 0.0);
        prop_assert!(rwe_pair(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn warp_matches_bilinear_oracle(seed in any::<u64>(), w in 2usize..10, h in 2usize..10) {
        let mut r = common::rng(seed);
        let f = plane(seed, w, h, 0.0, 1.0);
        let u = common::uniform(&mut r, w * h, -3.0, 3.0);
        let v = common::uniform(&mut r, w * h, -3.0, 3.0);
        let got = warp(&f, &FlowField::new(w, h, u.clone(), v.clone()).unwrap()).unwrap();
        for (g, o) in got.values().iter().zip(common::warp(f.values(), w, h, &u, &v)) {
            prop_assert!((g - o).abs() < 1e-12);
        }
    }
}
