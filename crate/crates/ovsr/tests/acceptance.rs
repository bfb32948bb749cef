//! Acceptance checks AC1-AC9, one `PASS`/`FAIL` line each.
//!
//! Built with `harness = false` so the lines are always printed. The process
//! exits non-zero when a gated check fails; AC7 is reported only. Pass check
//! ids (`AC3 AC6`) as arguments to run a subset:
//!
//! ```text
//! cargo test -p ovsr --test acceptance -- AC1 AC2
//! ```

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use ovsr::commands::{eval_set, evaluate, train_model};
use ovsr::RunConfig;
use ovsr_core::generator::{count_parameters, Framework, Model, ModelConfig};
use ovsr_core::metrics::{count_flops, param_pixel_estimate, psnr, ssim, EvalProtocol};
use ovsr_core::ops::{self, bicubic_upsample_tensor, conv2d_forward, gaussian_blur_tensor, Padding};
use ovsr_core::scheduler::{combine, run_model, run_precursor, run_successor, Direction, VideoSequence};
use ovsr_core::training::{charbonnier_loss, sequence_loss, LossConfig};
use ovsr_core::{Tensor, Var};
use ovsr_oracles as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, shape: [usize; 4], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| r.gen_range(lo..hi))
}

fn array(t: &Tensor) -> oracle::Array {
    oracle::Array::new(t.shape(), t.data().to_vec())
}

fn rel(value: f64, target: f64) -> f64 {
    value / target - 1.0
}

fn ac1() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, target) in [("govsr-4+2-56", 1.897e6), ("govsr-8+4-56", 3.480e6)] {
        let p = count_parameters(&ModelConfig::parse_name(name).unwrap()).total() as f64;
        let r = rel(p, target);
        ok &= r.abs() <= 0.05;
        parts.push(format!("{name} {:.3}M ({:+.2}% vs {:.3}M)", p / 1e6, 100.0 * r, target / 1e6));
    }
    verdict(ok, parts.join(", "))
}

fn ac2() -> Verdict {
    let cfg = ModelConfig::parse_name("govsr-4+2-56").unwrap();
    let flops = count_flops(&cfg, 720, 1280).unwrap() as f64;
    let estimate = param_pixel_estimate(&cfg, 720, 1280).unwrap() as f64;
    let r = rel(flops, 0.110e12);
    let gap = (flops - estimate).abs() / flops;
    verdict(
        r.abs() <= 0.05 && gap < 0.03,
        format!(
            "govsr-4+2-56 at 1280x720: {:.4}T MACs ({:+.2}% vs 0.110T), layer walk vs params x LR pixels {:.2}%",
            flops / 1e12,
            100.0 * r,
            100.0 * gap
        ),
    )
}

/// Relative error between backprop and central differences, worst input.
fn gradient_error(inputs: &[Tensor], f: impl Fn(&[Var]) -> ovsr_core::Result<Var>) -> f64 {
    let vars: Vec<Var> = inputs.iter().cloned().map(Var::param).collect();
    let grads = f(&vars).unwrap().backward().unwrap();
    let flat: Vec<Vec<f64>> = inputs.iter().map(|t| t.data().to_vec()).collect();
    let numeric = oracle::central_differences(&flat, 1e-6, |xs| {
        let vs: Vec<Var> = xs
            .iter()
            .zip(inputs)
            .map(|(x, t)| Var::constant(Tensor::new(t.shape(), x.clone()).unwrap()))
            .collect();
        f(&vs).unwrap().value().data()[0]
    });
    vars.iter()
        .zip(&numeric)
        .map(|(v, n)| oracle::relative_error(grads.get_or_zeros(v).data(), n))
        .fold(0.0, f64::max)
}

fn probe(v: &Var, seed: u64) -> ovsr_core::Result<Var> {
    let w = Var::constant(uniform(&mut rng(seed), v.shape(), -1.0, 1.0));
    Ok(ops::sum(&ops::mul(v, &w)?))
}

fn composite_error(cfg: &ModelConfig, seed: u64) -> f64 {
    let mut r = rng(seed);
    let lr: Vec<Tensor> = (0..3).map(|_| uniform(&mut r, [1, 3, 8, 8], 0.0, 1.0)).collect();
    let hr: Vec<Tensor> = (0..3).map(|_| uniform(&mut r, [1, 3, 32, 32], 0.0, 1.0)).collect();
    let seq = VideoSequence::new(lr, 4).unwrap().with_hr(hr.clone()).unwrap();
    let mut model = Model::init(cfg, seed).unwrap();
    // Zero biases sit every all-zero stream on the leaky ReLU kink and the
    // zero last conv blocks upstream gradients, so both are randomised.
    for p in model.params_mut() {
        if p.max_abs() == 0.0 {
            *p = uniform(&mut r, p.shape(), -0.1, 0.1);
        }
    }
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let params: Vec<Tensor> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
    let loss = LossConfig { epsilon: 1e-3, alpha: 0.1 };
    let hr: Vec<Var> = hr.into_iter().map(Var::constant).collect();
    gradient_error(&params, |vars| {
        let named = names.iter().cloned().zip(vars.iter().map(|v| v.value().clone())).collect();
        let mut m = Model::load(cfg, named)?.to_vars(false);
        for (slot, v) in m.params_mut().into_iter().zip(vars) {
            *slot = v.clone();
        }
        let run = run_model(&seq, &m)?;
        sequence_loss(&run.sr, run.sr_p.as_deref(), &hr, &loss)
    })
}

fn ac3() -> Verdict {
    let mut r = rng(3);
    let a = uniform(&mut r, [2, 3, 4, 5], -1.0, 1.0);
    let b = uniform(&mut r, [2, 3, 4, 5], -1.0, 1.0);
    let kinkless = a.map(|x| if x.abs() < 0.05 { x + 0.1 } else { x });
    let c = uniform(&mut r, [2, 1, 4, 5], -1.0, 1.0);
    let img = uniform(&mut r, [1, 2, 8, 8], 0.0, 1.0);
    let chans = uniform(&mut r, [2, 8, 3, 4], -1.0, 1.0);
    let x = uniform(&mut r, [2, 3, 6, 7], -1.0, 1.0);
    let w3 = uniform(&mut r, [4, 3, 3, 3], -0.5, 0.5);
    let w1 = uniform(&mut r, [4, 3, 1, 1], -0.5, 0.5);
    let bias = uniform(&mut r, [1, 4, 1, 1], -0.5, 0.5);
    let ab = [a.clone(), b];

    let mut errors: Vec<(String, f64)> = vec![
        ("add".into(), gradient_error(&ab, |v| probe(&ops::add(&v[0], &v[1])?, 1))),
        ("sub".into(), gradient_error(&ab, |v| probe(&ops::sub(&v[0], &v[1])?, 2))),
        ("mul".into(), gradient_error(&ab, |v| probe(&ops::mul(&v[0], &v[1])?, 3))),
        ("scale".into(), gradient_error(&ab[..1], |v| probe(&ops::scale(&v[0], -2.5), 4))),
        ("sum".into(), gradient_error(&ab[..1], |v| Ok(ops::sum(&v[0])))),
        ("mean".into(), gradient_error(&ab[..1], |v| Ok(ops::mean(&v[0])))),
        ("leaky_relu".into(), gradient_error(&[kinkless], |v| probe(&ops::leaky_relu(&v[0], 0.2), 5))),
        (
            "concat".into(),
            gradient_error(&[a, c], |v| probe(&ops::concat_channels(&[v[0].clone(), v[1].clone()])?, 6)),
        ),
        ("charbonnier".into(), gradient_error(&ab, |v| ops::charbonnier(&v[0], &v[1], 1e-3))),
        (
            "conv2d 3x3 same".into(),
            gradient_error(&[x.clone(), w3.clone(), bias.clone()], |v| {
                probe(&ops::conv2d(&v[0], &v[1], &v[2], Padding::Same)?, 7)
            }),
        ),
        (
            "conv2d 3x3 valid".into(),
            gradient_error(&[x.clone(), w3, bias.clone()], |v| {
                probe(&ops::conv2d(&v[0], &v[1], &v[2], Padding::Valid)?, 8)
            }),
        ),
        (
            "conv2d 1x1".into(),
            gradient_error(&[x, w1, bias], |v| probe(&ops::conv2d(&v[0], &v[1], &v[2], Padding::Same)?, 9)),
        ),
        (
            "gaussian_blur".into(),
            gradient_error(&[img.clone()], |v| probe(&ops::gaussian_blur(&v[0], 1.6, None)?, 10)),
        ),
        ("downsample".into(), gradient_error(&[img.clone()], |v| probe(&ops::downsample(&v[0], 4)?, 11))),
        (
            "bicubic_upsample".into(),
            gradient_error(&[img.clone()], |v| probe(&ops::bicubic_upsample(&v[0], 4)?, 12)),
        ),
        ("pixel_shuffle".into(), gradient_error(&[chans], |v| probe(&ops::pixel_shuffle(&v[0], 2)?, 13))),
        ("pixel_unshuffle".into(), gradient_error(&[img], |v| probe(&ops::pixel_unshuffle(&v[0], 2)?, 14))),
    ];
    for fw in Framework::ALL {
        let cfg = if fw.is_omniscient() {
            ModelConfig::omniscient(fw, 1, 1, 2)
        } else {
            ModelConfig::baseline(fw, 1, 2)
        };
        errors.push((format!("composite {}", cfg.name()), composite_error(&cfg, 40 + fw as u64)));
    }
    let worst = errors.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    let failing: Vec<&str> = errors.iter().filter(|e| !(e.1 < 1e-4)).map(|e| e.0.as_str()).collect();
    verdict(
        failing.is_empty(),
        format!(
            "{} checks, worst relative error {:.2e} ({}){}",
            errors.len(),
            worst.1,
            worst.0,
            if failing.is_empty() { String::new() } else { format!(", failing: {}", failing.join(" ")) }
        ),
    )
}

fn ac4() -> Verdict {
    const CASES: usize = 100;
    let mut r = rng(4);
    let mut worst = [0.0f64; 5];
    for case in 0..CASES {
        let k = [1, 3, 5][case % 3];
        let same = case % 2 == 0;
        let min = if same { 1 } else { k };
        let (cin, cout) = (r.gen_range(1..5), r.gen_range(1..5));
        let shape = [r.gen_range(1..3), cin, r.gen_range(min..min + 9), r.gen_range(min..min + 9)];
        let x = uniform(&mut r, shape, -1.0, 1.0);
        let w = uniform(&mut r, [cout, cin, k, k], -1.0, 1.0);
        let b = uniform(&mut r, [1, cout, 1, 1], -1.0, 1.0);
        let padding = if same { Padding::Same } else { Padding::Valid };
        let got = array(&conv2d_forward(&x, &w, &b, padding).unwrap());
        worst[0] = worst[0].max(got.max_diff(&oracle::conv2d(&array(&x), &array(&w), b.data(), same)));

        let f = r.gen_range(1..5);
        let shape = [1, r.gen_range(1..4), r.gen_range(1..8), r.gen_range(1..8)];
        let x = uniform(&mut r, shape, 0.0, 1.0);
        let got = array(&bicubic_upsample_tensor(&x, f).unwrap());
        worst[1] = worst[1].max(got.max_diff(&oracle::bicubic(&array(&x), f)));

        let sigma = if case % 4 == 0 { 1.6 } else { r.gen_range(0.3..2.5) };
        let shape = [r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..14), r.gen_range(1..14)];
        let x = uniform(&mut r, shape, 0.0, 1.0);
        let got = array(&gaussian_blur_tensor(&x, sigma, None).unwrap());
        worst[2] = worst[2].max(got.max_diff(&oracle::blur(&array(&x), sigma)));

        let crop = r.gen_range(0..3);
        let shape = [r.gen_range(1..3), 3, r.gen_range(2 * crop + 1..20), r.gen_range(2 * crop + 1..20)];
        let (p, q) = (uniform(&mut r, shape, 0.0, 1.0), uniform(&mut r, shape, 0.0, 1.0));
        let got = psnr(&p, &q, &EvalProtocol { skip_frames: 0, border_crop: crop }).unwrap();
        worst[3] = worst[3].max((got - oracle::psnr(&array(&p), &array(&q), crop)).abs());

        let shape = [r.gen_range(1..3), 3, r.gen_range(11..18), r.gen_range(11..18)];
        let p = uniform(&mut r, shape, 0.0, 1.0);
        let mix = r.gen_range(0.0..1.0);
        let noise = uniform(&mut r, shape, 0.0, 1.0);
        let q = p.zip_map(&noise, "mix", |u, v| mix * u + (1.0 - mix) * v).unwrap();
        let got = ssim(&p, &q, &EvalProtocol::full_frame()).unwrap();
        worst[4] = worst[4].max((got - oracle::ssim(&array(&p), &array(&q))).abs());
    }
    let names = ["conv2d", "bicubic", "blur", "psnr", "ssim"];
    let tols = [1e-10, 1e-12, 1e-12, 1e-9, 1e-6];
    let ok = worst.iter().zip(tols).all(|(w, t)| *w < t);
    let parts: Vec<String> = names
        .iter()
        .zip(worst.iter().zip(tols))
        .map(|(n, (w, t))| format!("{n} {w:.1e}<{t:.0e}"))
        .collect();
    verdict(ok, format!("{CASES} instances each, max |diff|: {}", parts.join(", ")))
}

fn ac5() -> Verdict {
    let configs = [
        ModelConfig::baseline(Framework::Ivsr, 1, 2),
        ModelConfig::baseline(Framework::Rvsr, 1, 2),
        ModelConfig::baseline(Framework::Hvsr, 1, 2),
        ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2),
        ModelConfig::omniscient(Framework::Govsr, 1, 1, 2),
    ];
    let mut problems = Vec::new();
    let mut runs = 0;
    for cfg in &configs {
        let model = Model::init(cfg, 5).unwrap().to_vars(false);
        for len in 1..=7 {
            let mut r = rng(len as u64);
            let frames = (0..len).map(|_| uniform(&mut r, [1, 3, 3, 3], 0.0, 1.0)).collect();
            let run = run_model(&VideoSequence::new(frames, 4).unwrap(), &model).unwrap();
            runs += 1;
            if let Err(e) = run.trace.audit(len) {
                problems.push(format!("{} T={len}: {e}", cfg.name()));
            }
            for t in 0..len {
                let expect: Option<BTreeSet<usize>> = match cfg.framework {
                    Framework::Govsr => Some((0..len).collect()),
                    Framework::Lovsr => Some((0..=(t + 2).min(len - 1)).collect()),
                    _ => None,
                };
                if let Some(expect) = expect {
                    let got = run.trace.receptive_field(t);
                    if got != expect {
                        problems.push(format!("{} T={len} t={t}: reaches {got:?}", cfg.name()));
                    }
                }
            }
        }
    }
    let detail = if problems.is_empty() {
        format!("{runs} traces audited (5 frameworks, T=1..7); govsr reaches every frame, lovsr reaches 0..=min(t+2,T-1)")
    } else {
        problems.join("; ")
    };
    verdict(problems.is_empty(), detail)
}

fn train_and_score(cfg: &RunConfig) -> (String, f64, f64) {
    let (model, _) = train_model(cfg).unwrap();
    let set = eval_set(cfg).unwrap();
    let proto = cfg.protocol();
    let ours = evaluate(Some(&model), &set, &proto, (1280, 720)).unwrap().mean_psnr();
    let bicubic = evaluate(None, &set, &proto, (1280, 720)).unwrap().mean_psnr();
    (model.config.name(), ours, bicubic)
}

fn ac6() -> Verdict {
    let cfg = RunConfig::default();
    let (name, ours, bicubic) = train_and_score(&cfg);
    verdict(
        ours - bicubic >= 1.0,
        format!(
            "{name}, {} iterations, {} held-out clips at {}x{} LR: {ours:.2} dB vs bicubic {bicubic:.2} dB ({:+.2} dB)",
            cfg.iterations,
            cfg.eval_count,
            cfg.eval_lr_size,
            cfg.eval_lr_size,
            ours - bicubic
        ),
    )
}

fn ac7() -> Verdict {
    let base = RunConfig { iterations: 300, eval_every: 0, ..RunConfig::default() };
    let mut scores = Vec::new();
    for model in ["ivsr-2-16", "rvsr-2-16", "hvsr-2-16", "lovsr-1+1-16", "govsr-1+1-16"] {
        let mut cfg = base.clone();
        cfg.set("model", model).unwrap();
        let (name, psnr, _) = train_and_score(&cfg);
        scores.push((name, psnr));
    }
    let get = |fw: &str| scores.iter().find(|(n, _)| n.starts_with(fw)).unwrap().1;
    let hybrid_ok = get("hvsr") >= get("ivsr").max(get("rvsr"));
    let omni_ok = get("lovsr") >= get("hvsr") && get("govsr") >= get("hvsr");
    let list: Vec<String> = scores.iter().map(|(n, p)| format!("{n} {p:.2}")).collect();
    let mut detail = format!(
        "reported only; seeds train={} eval={}, {} iterations: {}",
        base.seed,
        base.eval_seed,
        base.iterations,
        list.join(", ")
    );
    if !hybrid_ok {
        detail.push_str("; hvsr below ivsr or rvsr");
    }
    if !omni_ok {
        detail.push_str("; an omniscient model is below hvsr");
    }
    verdict(hybrid_ok && omni_ok, detail)
}

fn ac8() -> Verdict {
    let mut problems = Vec::new();
    let mut r = rng(8);

    for (fw, direction) in [(Framework::Lovsr, Direction::Forward), (Framework::Govsr, Direction::Backward)] {
        let mut model = Model::init(&ModelConfig::omniscient(fw, 1, 1, 4), 8).unwrap();
        for p in model.params_mut() {
            if p.max_abs() == 0.0 {
                *p = uniform(&mut r, p.shape(), -0.1, 0.1);
            }
        }
        let m = model.to_vars(false);
        let frames = (0..5).map(|_| uniform(&mut r, [1, 3, 6, 6], 0.0, 1.0)).collect();
        let seq = VideoSequence::new(frames, 4).unwrap();
        let run = run_model(&seq, &m).unwrap();
        let pre = run_precursor(&seq, &m, direction).unwrap();
        let succ = run_successor(&seq, pre.hidden.as_deref(), &m).unwrap();
        let sum = combine(&pre.sr, &succ.sr).unwrap();
        let exact = run.sr.iter().zip(&sum).all(|(a, b)| a.value() == b.value())
            && run.sr_p.as_ref().unwrap().iter().zip(&pre.sr).all(|(a, b)| a.value() == b.value());
        if !exact {
            problems.push(format!("{fw:?}: SR differs from SR_p + SR_s"));
        }
    }

    let hr = Var::constant(uniform(&mut r, [1, 3, 4, 4], 0.0, 1.0));
    let sr = Var::param(uniform(&mut r, [1, 3, 4, 4], 0.0, 1.0));
    let sr_p = Var::param(uniform(&mut r, [1, 3, 4, 4], 0.0, 1.0));
    for alpha in [0.0, 0.01, 0.5, 1.0] {
        let cfg = LossConfig { epsilon: 1e-3, alpha };
        let total = charbonnier_loss(&sr, Some(&sr_p), &hr, &cfg).unwrap().value().data()[0];
        let main = ops::charbonnier(&sr, &hr, 1e-3).unwrap().value().data()[0];
        let aux = ops::charbonnier(&sr_p, &hr, 1e-3).unwrap().value().data()[0];
        if total != main + alpha * aux {
            problems.push(format!("alpha {alpha}: loss {total} is not {main} + alpha * {aux}"));
        }
        let floor = 1e-3 * (1.0 + alpha);
        let at_target = charbonnier_loss(&hr, Some(&hr), &hr, &cfg).unwrap().value().data()[0];
        if (at_target - floor).abs() > 1e-15 {
            problems.push(format!("alpha {alpha}: loss at zero residuals {at_target} vs {floor}"));
        }
        if total <= floor {
            problems.push(format!("alpha {alpha}: loss {total} with nonzero residuals reaches the floor"));
        }
        let one_zero = charbonnier_loss(&sr, Some(&hr), &hr, &cfg).unwrap().value().data()[0];
        if one_zero <= floor {
            problems.push(format!("alpha {alpha}: one nonzero residual reaches the floor"));
        }
    }
    let grads = charbonnier_loss(&sr, Some(&sr_p), &hr, &LossConfig { epsilon: 1e-3, alpha: 0.0 })
        .unwrap()
        .backward()
        .unwrap();
    let through_p = grads.get_or_zeros(&sr_p).max_abs();
    if through_p != 0.0 || grads.get_or_zeros(&sr).max_abs() == 0.0 {
        problems.push(format!("alpha 0: |dL/dSR_p| = {through_p:e}"));
    }
    let detail = if problems.is_empty() {
        "SR == SR_p + SR_s bitwise (lovsr, govsr); loss == main + alpha*aux; floor eps(1+alpha) only at zero residuals; alpha=0 gives dL/dSR_p == 0".to_string()
    } else {
        problems.join("; ")
    };
    verdict(problems.is_empty(), detail)
}

fn ac9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "model = govsr-1+1-8\niterations = 40\neval_every = 10\neval_count = 2\neval_lr_size = 24\nseed = 9\n")
        .unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "2", "4", "1"] {
        let out = dir.path().join(format!("t{threads}-{}", csvs.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_ovsr"))
            .args(["--threads", threads, "train", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        csvs.push(std::fs::read(out.join("loss.csv")).unwrap());
    }
    let same = csvs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        same,
        format!("4 train runs (threads 1, 2, 4, 1), loss.csv {} bytes, byte-identical: {same}", csvs[0].len()),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, bool, fn() -> Verdict); 9] = [
        ("AC1", true, ac1),
        ("AC2", true, ac2),
        ("AC3", true, ac3),
        ("AC4", true, ac4),
        ("AC5", true, ac5),
        ("AC6", true, ac6),
        ("AC7", false, ac7),
        ("AC8", true, ac8),
        ("AC9", true, ac9),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, gated, check) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| w.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        let status = if v.pass { "PASS" } else { "FAIL" };
        let note = if gated { "" } else { " [not gated]" };
        println!("{id} {status}{note} {} ({:.1}s)", v.detail, start.elapsed().as_secs_f64());
        if gated && !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} gated check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
