use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ivtm::data::toy::{toy_hdr, toy_hdr_video, write_toy_dataset, ToyDatasetSpec};
use ivtm::imaging::{extract_luminance, is_radiance_file, load_clip_dir, load_radiance, write_radiance};
use ivtm::metrics::{rwe, tmqi, IdentityMapper, ToneMapper, ZeroFlow};
use ivtm::training::LogRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SMALL: &str = r#"
epochs = 1
steps_per_epoch = 2
validation_every = 0
rank_downsample = 0

[sampler]
batch_size = 3
negatives = 3
frames = 2
crop = 32

[generator]
base_channels = 4
num_scales = 3
tfr_beta = 0.25
sfe_knn = 3

[discriminator]
widths = [4, 8, 8]
"#;

fn ivtm(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivtm"))
        .args(args)
        .env("IVTM_CACHE_DIR", cache)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct Workspace {
    root: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let root = tempfile::tempdir().unwrap();
        let spec = ToyDatasetSpec { hdr_images: 4, hdr_videos: 2, ldr_good: 4, ldr_poor: 4, size: 40, video_frames: 3, seed: 2 };
        write_toy_dataset(&root.path().join("data"), &spec).unwrap();
        fs::write(root.path().join("small.toml"), SMALL).unwrap();
        Self { root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        ivtm(args, &self.path("cache"))
    }

    /// Trains the small configuration and returns its output directory.
    fn train(&self, out: &str, mode: &str) -> PathBuf {
        let out = self.path(out);
        let o = self.run(&[
            "train",
            "--config",
            p(&self.path("small.toml")),
            "--data",
            p(&self.path("data")),
            "--out",
            p(&out),
            "--mode",
            mode,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    }
}

fn log_steps(out: &Path) -> Vec<u64> {
    fs::read_to_string(out.join("train_log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<LogRecord>(l).unwrap().step)
        .collect()
}

fn latest(out: &Path) -> PathBuf {
    ivtm::training::latest_checkpoint(out).unwrap()
}

#[test]
fn image_mode_training_runs_and_resumes() {
    let ws = Workspace::new();
    let out = ws.train("run", "image");
    assert_eq!(log_steps(&out), vec![0, 1]);
    assert!(out.join("config.json").is_file());

    let o = ws.run(&[
        "train",
        "--config",
        p(&ws.path("small.toml")),
        "--data",
        p(&ws.path("data")),
        "--out",
        p(&out),
        "--mode",
        "image",
        "--epochs",
        "2",
        "--resume",
        "latest",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("effective train config"));
    assert_eq!(log_steps(&out), vec![0, 1, 2, 3]);
}

#[test]
fn training_reports_a_missing_pool() {
    let ws = Workspace::new();
    fs::remove_dir_all(ws.path("data/ldr_poor")).unwrap();
    let o = ws.run(&["train", "--config", p(&ws.path("small.toml")), "--data", p(&ws.path("data")), "--out", p(&ws.path("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ldr_poor"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let ws = Workspace::new();
    let bad = ws.path("bad.toml");
    fs::write(&bad, format!("{SMALL}\nlearning_rate = 3\n")).unwrap();
    let o = ws.run(&["train", "--config", p(&bad), "--data", p(&ws.path("data"))]);
    assert_eq!(o.status.code(), Some(2));
    let bad = ws.path("bad.json");
    fs::write(&bad, r#"{"generator": {"channels": 4}}"#).unwrap();
    assert_eq!(ws.run(&["train", "--config", p(&bad)]).status.code(), Some(2));
}

#[test]
fn invalid_values_exit_with_validation_code() {
    let ws = Workspace::new();
    let o = ws.run(&["train", "--config", p(&ws.path("small.toml")), "--data", p(&ws.path("data")), "--schedule", "cosine"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ws.run(&["train", "--config", p(&ws.path("small.toml")), "--data", p(&ws.path("data")), "--epochs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_reproducible_clips() {
    let ws = Workspace::new();
    let src = ws.path("stills");
    fs::create_dir_all(&src).unwrap();
    let mut r = rng(5);
    for i in 0..3 {
        write_radiance(&toy_hdr(&mut r, 48, 40), &src.join(format!("s{i}.exr"))).unwrap();
    }
    let run = |out: &str| ws.run(&["synth", p(&src), "--frames", "3", "--crop", "24", "--seed", "4", "--out", p(&ws.path(out))]);
    for out in ["a", "b"] {
        let o = run(out);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("synthesized 3 clips"));
    }
    let a = ws.path("a");
    assert!(a.join("synth_manifest.json").is_file());
    assert!(a.join("effective_config.json").is_file());
    for i in 0..3 {
        let clip = a.join(format!("s{i}"));
        let mut frames: Vec<_> = fs::read_dir(&clip).unwrap().map(|e| e.unwrap().file_name()).collect();
        frames.sort();
        assert_eq!(frames.len(), 3);
        for f in frames {
            assert_eq!(fs::read(clip.join(&f)).unwrap(), fs::read(ws.path("b").join(format!("s{i}")).join(&f)).unwrap());
        }
    }

    let o = ws.run(&["synth", p(&src), "--gamma", "3.5", "--crop", "8", "--out", p(&ws.path("c"))]);
    assert_eq!(o.status.code(), Some(2));
    let empty = ws.path("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(ws.run(&["synth", p(&empty), "--out", p(&ws.path("d"))]).status.code(), Some(2));
}

#[test]
fn tonemap_handles_images_and_frame_directories() {
    let ws = Workspace::new();
    let ckpt = latest(&ws.train("run", "video"));

    let img = ws.path("scene.hdr");
    write_radiance(&toy_hdr(&mut rng(7), 44, 36), &img).unwrap();
    let png = ws.path("out/scene.png");
    let o = ws.run(&["tonemap", p(&img), "--checkpoint", p(&ckpt), "--out", p(&png)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let decoded = image::open(&png).unwrap();
    assert_eq!((decoded.width(), decoded.height()), (44, 36));

    let frames = ws.path("clip");
    fs::create_dir_all(&frames).unwrap();
    for (t, f) in toy_hdr_video(&mut rng(8), 32, 32, 4, 2, 0).iter().enumerate() {
        write_radiance(f, &frames.join(format!("frame_{t:04}.exr"))).unwrap();
    }
    for mode in ["video", "image"] {
        let o = ws.run(&["tonemap", p(&frames), "--checkpoint", p(&ckpt), "--mode", mode, "--out", p(&ws.path(mode))]);
        assert!(o.status.success(), "{}", stderr(&o));
        for t in 0..4 {
            assert!(ws.path(mode).join(format!("frame_{t:04}.png")).is_file());
        }
    }
    let first = |mode: &str| fs::read(ws.path(mode).join("frame_0000.png")).unwrap();
    assert_eq!(first("video"), first("image"));
}

#[test]
fn incompatible_checkpoints_exit_with_code_three() {
    let ws = Workspace::new();
    let ckpt = latest(&ws.train("run", "image"));
    let other = ws.path("other.toml");
    fs::write(&other, SMALL.replace("base_channels = 4", "base_channels = 8")).unwrap();
    let img = ws.path("scene.exr");
    write_radiance(&toy_hdr(&mut rng(9), 32, 32), &img).unwrap();
    let o = ws.run(&["tonemap", p(&img), "--checkpoint", p(&ckpt), "--config", p(&other), "--out", p(&ws.path("x.png"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = ws.run(&["tonemap", p(&img), "--checkpoint", p(&ckpt), "--config", p(&ws.path("small.toml")), "--out", p(&ws.path("y.png"))]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn write_testset(dir: &Path, videos: usize, frames: usize) {
    let mut r = rng(11);
    for v in 0..videos {
        let d = dir.join(format!("video_{v}"));
        fs::create_dir_all(&d).unwrap();
        for (t, f) in toy_hdr_video(&mut r, 32, 32, frames, 1, 0).iter().enumerate() {
            write_radiance(f, &d.join(format!("{t:03}.exr"))).unwrap();
        }
    }
}

#[test]
fn eval_matches_direct_metric_calls() {
    let ws = Workspace::new();
    let testset = ws.path("test");
    write_testset(&testset, 2, 8);
    let o = ws.run(&["eval", p(&testset), "--mapper", "identity", "--flow", "zero"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // Without --out the report lands under the cache directory.
    let out = ws.path("cache/eval");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["frames_per_video"], 6);
    let videos = report["videos"].as_array().unwrap();
    assert_eq!(videos.len(), 2);
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap().lines().count(), 4);

    for (i, v) in videos.iter().enumerate() {
        let clip = load_clip_dir(&testset.join(format!("video_{i}")), is_radiance_file, load_radiance, Some(6)).unwrap();
        let raw: Vec<_> = clip.frames().iter().map(extract_luminance).collect();
        let mapped = IdentityMapper.map_clip(&raw).unwrap();
        let q = raw.iter().zip(&mapped).map(|(h, o)| tmqi(h, o).unwrap().q).sum::<f64>() / 6.0;
        assert!((v["rwe"].as_f64().unwrap() - rwe(&mapped, &ZeroFlow).unwrap()).abs() < 1e-12);
        assert!((v["tmqi"].as_f64().unwrap() - q).abs() < 1e-12);
    }
}

#[test]
fn eval_with_a_checkpoint_and_bad_inputs() {
    let ws = Workspace::new();
    let ckpt = latest(&ws.train("run", "video"));
    let testset = ws.path("test");
    write_testset(&testset, 1, 4);
    let out = ws.path("report");
    let o = ws.run(&["eval", p(&testset), "--checkpoint", p(&ckpt), "--frames-per-video", "3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("report.csv").is_file());
    assert!(out.join("effective_config.json").is_file());

    let empty = ws.path("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(ws.run(&["eval", p(&empty), "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(ws.run(&["eval", p(&testset), "--mapper", "nope", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(ws.run(&["eval", p(&testset), "--frames-per-video", "1", "--out", p(&out)]).status.code(), Some(2));
    let o = ws.run(&["eval", p(&testset), "--checkpoint", p(&ws.path("missing")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
