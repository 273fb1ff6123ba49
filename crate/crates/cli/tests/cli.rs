use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use doodle_core::data::load_demo_set;
use doodle_core::nn::{save_checkpoint, NetConfig, QNetwork};
use doodle_core::{Canvas, MediaType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn doodle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doodle"))
        .args(args)
        .env("DOODLE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(out: &Output) {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HOUSE: &str = r#"{"word":"house","drawing":[[[0,100,100,0,0],[0,0,100,100,0]],[[0,50,100],[0,-60,0]]]}"#;
const CAT: &str = r#"{"word":"cat","drawing":[[[10,40,70],[80,20,80]],[[20,60],[50,50]]]}"#;

fn quickdraw(dir: &Path, lines: &[&str]) -> PathBuf {
    let p = dir.join("refs.ndjson");
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

fn desk_checkpoint(dir: &Path, media: MediaType) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = QNetwork::new(NetConfig::desk(media), &mut rng).unwrap();
    let p = dir.join(format!("{}.sdqw", media.name()));
    save_checkpoint(&p, &net).unwrap();
    p
}

#[test]
fn synth_writes_requested_episodes_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a.sdqd"), tmp.path().join("b.sdqd"));
    for p in [&a, &b] {
        let out = doodle(&["--out", s(tmp.path()), "--seed", "5", "synth", "--episodes", "10", "--output", s(p)]);
        ok(&out);
        assert!(String::from_utf8_lossy(&out.stdout).contains("10 episodes"));
    }
    assert_eq!(load_demo_set(&a).unwrap().len(), 10);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = doodle(&["--out", s(tmp.path()), "synth", "--episodes", "0"]);
    assert_eq!(code(&out), 2);
    let out = doodle(&["--out", s(tmp.path()), "synth", "--bank", "quickdraw", "--quickdraw", "/nonexistent/q.ndjson"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/q.ndjson"));
}

#[test]
fn pretrain_writes_checkpoint_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    ok(&doodle(&["--out", s(&run), "synth", "--episodes", "12"]));
    ok(&doodle(&["--out", s(&run), "pretrain", "--epochs", "2", "--batch", "16"]));
    assert!(run.join("pretrained.sdqw").is_file());
    let csv = std::fs::read_to_string(run.join("pretrain.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,train_accuracy,val_accuracy");
    assert_eq!(lines.len(), 3);
}

#[test]
fn pretrain_input_errors_have_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.sdqd");
    assert_eq!(code(&doodle(&["--out", s(tmp.path()), "pretrain", "--demos", s(&missing)])), 2);

    let corrupt = tmp.path().join("corrupt.sdqd");
    std::fs::write(&corrupt, b"XXXX\x01\x00garbage").unwrap();
    assert_eq!(code(&doodle(&["--out", s(tmp.path()), "pretrain", "--demos", s(&corrupt)])), 3);

    let demos = tmp.path().join("demos.sdqd");
    ok(&doodle(&["--out", s(tmp.path()), "synth", "--episodes", "2", "--output", s(&demos)]));
    let out = doodle(&["--out", s(tmp.path()), "--media", "color-sketch", "pretrain", "--demos", s(&demos)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn zero_frames_copies_the_init_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let q = quickdraw(tmp.path(), &[HOUSE, CAT]);
    let init = desk_checkpoint(tmp.path(), MediaType::Sketch);
    let run = tmp.path().join("run");
    ok(&doodle(&["--out", s(&run), "--quickdraw", s(&q), "train", "--init", s(&init), "--frames", "0"]));
    assert_eq!(std::fs::read(run.join("model.sdqw")).unwrap(), std::fs::read(&init).unwrap());
}

#[test]
fn ablation_flags_reach_the_config() {
    let tmp = TempDir::new().unwrap();
    let q = quickdraw(tmp.path(), &[HOUSE]);
    let run = tmp.path().join("run");
    let out = doodle(&[
        "--out",
        s(&run),
        "--quickdraw",
        s(&q),
        "train",
        "--frames",
        "0",
        "--no-pretrain",
        "--exploration",
        "naive",
    ]);
    ok(&out);
    let echo = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(echo.contains("use_pretrained_init = false"));
    assert!(echo.contains("kind = \"naive\""));

    let out = doodle(&["--out", s(&run), "--quickdraw", s(&q), "train", "--exploration", "boltzmann"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn short_training_run_writes_reward_curve() {
    let tmp = TempDir::new().unwrap();
    let q = quickdraw(tmp.path(), &[HOUSE, CAT]);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[rl]\ntotal_frames = 300\nwarmup_frames = 100\nbatch = 4\nupdate_every = 4\n\
         eval_every = 100\neval_refs = 2\n[rl.per]\ncapacity = 200\n",
    )
    .unwrap();
    let run = tmp.path().join("run");
    ok(&doodle(&["-c", s(&cfg), "--out", s(&run), "--quickdraw", s(&q), "train"]));
    let csv = std::fs::read_to_string(run.join("rewards.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("frame,mean_reward,loss,epsilon,stuck_rate"));
}

#[test]
fn config_echo_reparses_to_the_same_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("in.toml");
    std::fs::write(&cfg, "seed = 11\nside = 28\n[synth]\nepisodes = 3\nbank = \"procedural\"\n").unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&doodle(&["-c", s(&cfg), "--out", s(&a), "--media", "watercolor", "synth"]));
    let echo = a.join("config.toml");
    ok(&doodle(&["-c", s(&echo), "--out", s(&b), "synth"]));
    let (ea, eb) = (
        std::fs::read_to_string(&echo).unwrap(),
        std::fs::read_to_string(b.join("config.toml")).unwrap(),
    );
    assert_eq!(ea.replace(s(&a), "RUN"), eb.replace(s(&b), "RUN"));
    assert!(ea.contains("media = \"watercolor\""));
    assert_eq!(std::fs::read(a.join("demos.sdqd")).unwrap(), std::fs::read(b.join("demos.sdqd")).unwrap());

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"eleven\"\n").unwrap();
    assert_eq!(code(&doodle(&["-c", s(&bad), "--out", s(&a), "synth"])), 3);
}

#[test]
fn stationary_rollout_on_white_stays_white() {
    let tmp = TempDir::new().unwrap();
    let white = tmp.path().join("white.png");
    Canvas::new(28, MediaType::Sketch).unwrap().save_png(&white).unwrap();
    let ckpt = desk_checkpoint(tmp.path(), MediaType::Sketch);
    let run = tmp.path().join("run");
    let args = [
        "--out",
        s(&run),
        "rollout",
        "--checkpoint",
        s(&ckpt),
        "--reference",
        s(&white),
        "--policy",
        "stationary",
        "--steps",
        "40",
    ];
    ok(&doodle(&args));
    let dir = run.join("rollout");
    let last = Canvas::load_png(dir.join("final.png")).unwrap();
    assert!(last.pixels().iter().all(|&v| v == 255));
    let log = std::fs::read_to_string(dir.join("actions.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 40);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["step"], 1);
    assert_eq!(first["mode"], "up");
    assert_eq!(first["reward"], 0.0);
}

#[test]
fn greedy_rollouts_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let q = quickdraw(tmp.path(), &[HOUSE]);
    let ckpt = desk_checkpoint(tmp.path(), MediaType::Sketch);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        let out = doodle(&[
            "--out",
            s(&run),
            "--quickdraw",
            s(&q),
            "rollout",
            "--checkpoint",
            s(&ckpt),
            "--class",
            "house",
            "--frames",
        ]);
        ok(&out);
        let dir = run.join("rollout");
        assert_eq!(std::fs::read_dir(dir.join("frames")).unwrap().count(), 100);
        outputs.push((
            std::fs::read(dir.join("final.png")).unwrap(),
            std::fs::read(dir.join("strip.png")).unwrap(),
            std::fs::read(dir.join("actions.jsonl")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn rollout_rejects_mismatched_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let white = tmp.path().join("white.png");
    Canvas::new(28, MediaType::Sketch).unwrap().save_png(&white).unwrap();
    let color = desk_checkpoint(tmp.path(), MediaType::ColorSketch);
    let out = doodle(&["--out", s(tmp.path()), "rollout", "--checkpoint", s(&color), "--reference", s(&white)]);
    assert_eq!(code(&out), 3);
    let out = doodle(&[
        "--out",
        s(tmp.path()),
        "--media",
        "color-sketch",
        "rollout",
        "--checkpoint",
        s(&color),
        "--reference",
        s(&white),
    ]);
    assert_eq!(code(&out), 3, "a grayscale PNG cannot be a color reference");
}

#[test]
fn eval_reports_per_class_means() {
    let tmp = TempDir::new().unwrap();
    let ckpt = desk_checkpoint(tmp.path(), MediaType::Sketch);
    let once = quickdraw(tmp.path(), &[HOUSE, CAT]);
    let run_once = tmp.path().join("once");
    ok(&doodle(&["--out", s(&run_once), "--quickdraw", s(&once), "eval", "--checkpoint", s(&ckpt)]));

    let twice_dir = tmp.path().join("dup");
    std::fs::create_dir(&twice_dir).unwrap();
    let twice = quickdraw(&twice_dir, &[HOUSE, CAT, HOUSE, CAT]);
    let run_twice = tmp.path().join("twice");
    ok(&doodle(&["--out", s(&run_twice), "--quickdraw", s(&twice), "eval", "--checkpoint", s(&ckpt)]));

    let read = |run: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap()
    };
    let (a, b) = (read(&run_once), read(&run_twice));
    for class in ["house", "cat"] {
        assert_eq!(a[class]["mean_accumulated"], b[class]["mean_accumulated"]);
        assert_eq!(a[class]["mean_max"], b[class]["mean_max"]);
        assert_eq!(b[class]["references"], 2);
        assert!(a[class]["ratio"].as_f64().unwrap() <= 1.0);
    }

    let out = doodle(&["--out", s(&run_once), "--quickdraw", s(&once), "--classes", "", "eval", "--checkpoint", s(&ckpt)]);
    assert_eq!(code(&out), 2);
    let out = doodle(&["--out", s(&run_once), "--quickdraw", s(&once), "--classes", "dog", "eval", "--checkpoint", s(&ckpt)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_usage_exits_with_two() {
    assert_eq!(code(&doodle(&["paint"])), 2);
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_doodle"))
        .args(["synth", "--episodes", "1"])
        .env("DOODLE_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
