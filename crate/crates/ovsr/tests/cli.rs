use std::fs;
use std::path::Path;
use std::process::Command;

use ovsr::commands::{ablation_grid, eval_set, evaluate, train_model};
use ovsr::dump::read_tensors;
use ovsr::frames::{frame_name, read_frames, write_frame};
use ovsr::RunConfig;
use ovsr_core::{Scalar, Tensor};

const TINY: &str = "model = govsr-1+1-8
iterations = 12
eval_every = 6
eval_count = 2
eval_length = 5
eval_lr_size = 24
batch = 2
lr_patch = 8
";

fn ovsr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ovsr")).args(args).output().expect("spawn ovsr")
}

fn ok(args: &[&str]) {
    let out = ovsr(args);
    assert!(
        out.status.success(),
        "ovsr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn training_is_byte_identical_across_thread_counts_and_echo_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["--threads", "1", "train", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["--threads", "3", "train", "--config", s(&cfg), "--out", s(&b)]);
    let echo = a.join("config.txt");
    ok(&["train", "--config", s(&echo), "--out", s(&c)]);
    let loss = fs::read(a.join("loss.csv")).unwrap();
    assert_eq!(loss, fs::read(b.join("loss.csv")).unwrap());
    assert_eq!(loss, fs::read(c.join("loss.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(c.join("model.ckpt")).unwrap());
    let text = String::from_utf8(loss).unwrap();
    assert!(text.starts_with("iteration,lr,loss,eval_psnr\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn long_flags_resolve_into_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "train", "--framework", "govsr", "--blocks", "4+2", "--filters", "56", "--alpha", "0.01",
        "--iterations", "1", "--set", "batch=1", "--set", "lr_patch=4", "--set", "eval_count=1",
        "--set", "eval_length=5", "--set", "eval_lr_size=20", "--out", s(&out),
    ]);
    let echo = fs::read_to_string(out.join("config.txt")).unwrap();
    for line in ["framework = govsr", "blocks = 4+2", "filters = 56", "alpha = 0.01"] {
        assert!(echo.lines().any(|l| l == line), "missing {line:?} in\n{echo}");
    }
    let head = fs::read(out.join("model.ckpt")).unwrap();
    assert!(head.starts_with(b"ovsr-checkpoint 1\nmodel govsr-4+2-56\n"));
}

#[test]
fn bad_config_fails_with_the_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = ovsr(&["train", "--set", "lr_patch=big", "--out", s(&dir.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`lr_patch`"));
    let out = ovsr(&["eval", "--checkpoint", "/no/such/file.ckpt", "--out", s(&dir.path().join("y"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`checkpoint`"));
}

#[test]
fn eval_reproduces_the_logged_psnr_and_rejects_other_frameworks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ckpt = run.join("model.ckpt");

    let config = RunConfig::parse(TINY).unwrap();
    let (model, records) = train_model(&config).unwrap();
    let logged = records.last().unwrap().eval_psnr.unwrap();
    let loaded = ovsr::checkpoint::load(&ckpt).unwrap();
    assert_eq!(ovsr::checkpoint::encode(&loaded), ovsr::checkpoint::encode(&model));
    let report = evaluate(Some(&loaded), &eval_set(&config).unwrap(), &config.protocol(), (1280, 720)).unwrap();
    assert_eq!(report.mean_psnr(), logged);

    let eval = dir.path().join("eval");
    ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(&eval)]);
    let csv = fs::read_to_string(eval.join("report.csv")).unwrap();
    assert!(csv.lines().last().unwrap().contains(&format!(",{logged:.4},")), "{csv}");
    let table = fs::read_to_string(eval.join("report.txt")).unwrap();
    assert!(table.contains("Parameter (M)") && table.contains("FLOPs (T) 1280x720"));

    let base = dir.path().join("bicubic");
    ok(&["eval", "--config", s(&cfg), "--baseline", "bicubic", "--out", s(&base)]);
    assert!(fs::read_to_string(base.join("report.csv")).unwrap().contains("bicubic,mean,"));

    let out = ovsr(&["eval", "--config", s(&cfg), "--framework", "lovsr", "--checkpoint", s(&ckpt), "--out", s(&eval)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("govsr model"));
}

#[test]
fn ablation_marks_unread_inputs_and_removing_the_current_frame_hurts() {
    let config = RunConfig::parse(
        "model = ivsr-1-8
iterations = 300
eval_every = 0
eval_count = 2
eval_length = 5
eval_lr_size = 24
",
    )
    .unwrap();
    let (model, _) = train_model(&config).unwrap();
    let grid = ablation_grid(&model, &eval_set(&config).unwrap(), &config.protocol()).unwrap();
    assert_eq!(grid.columns, ["G"]);
    let cell = |name: &str| grid.rows.iter().find(|(n, _)| n == name).unwrap().1[0];
    for hidden in ["H[t-1]", "H[t]", "H[t+1]"] {
        assert_eq!(cell(hidden), None);
    }
    let without_current = cell("I[t]").unwrap();
    assert!(without_current < grid.full, "w/o I[t] {without_current} vs full {}", grid.full);
}

#[test]
fn degrade_is_deterministic_and_matches_the_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let hr = dir.path().join("hr");
    fs::create_dir(&hr).unwrap();
    let impulse = Tensor::from_fn([1, 3, 32, 32], |_, _, y, x| if (y, x) == (13, 18) { 1.0 } else { 0.0 });
    write_frame(&hr.join(frame_name(0)), &impulse).unwrap();
    write_frame(&hr.join(frame_name(1)), &Tensor::full([1, 3, 32, 32], 0.4)).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["degrade", "--input", s(&hr), "--out", s(&a)]);
    ok(&["degrade", "--input", s(&hr), "--out", s(&b)]);
    for name in [frame_name(0), frame_name(1), "lr.ovsrt".into()] {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
    let lr = read_tensors(&a.join("lr.ovsrt")).unwrap();
    assert_eq!(lr[0].shape(), [1, 3, 8, 8]);
    let g = |d: i64| -> f64 {
        let w = |k: i64| (-((k * k) as f64) / (2.0 * 1.6 * 1.6)).exp();
        if d.abs() > 5 {
            0.0
        } else {
            w(d) / (-5..=5).map(w).sum::<f64>()
        }
    };
    for j in 0..8i64 {
        for i in 0..8i64 {
            let expect = g(4 * j - 13) * g(4 * i - 18);
            assert!((lr[0].at(0, 0, j as usize, i as usize) as f64 - expect).abs() < 1e-12);
        }
    }
    let constant = read_frames(&a).unwrap()[1].clone();
    let level = (0.4 * 255.0 as Scalar).round() / 255.0;
    assert!(constant.data().iter().all(|&v| (v - level).abs() < 1e-12));
}
