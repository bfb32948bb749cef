//! The operations behind each subcommand.
//!
//! Every command writes `config.txt` (the resolved configuration) into the
//! output directory before anything else, then its own artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use ovsr_core::generator::{count_parameters, RefineMode};
use ovsr_core::metrics::{
    evaluate_bicubic, evaluate_model, param_pixel_estimate, score_sequence, ComplexityReport, EvalProtocol,
    EvalReport,
};
use ovsr_core::scheduler::{ablate_input, InputMask, InputName, MaskTarget, VideoSequence};
use ovsr_core::training::{degrade, degrade_frame, synthetic_eval_set, ClipSource, TrainRecord, Trainer};
use ovsr_core::{Error as CoreError, Model, Tensor, Var};

use crate::bench::{benchmark_time, single_threaded, Timing};
use crate::checkpoint;
use crate::config::{DataSource, RunConfig, SweepAxis};
use crate::dump::write_tensors;
use crate::error::{Error, Result};
use crate::frames::{list_sequences, read_frames, write_frames};
use crate::report::{align, eval_csv, eval_table, loss_csv, sweep_csv, sweep_table, AblationGrid, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    Ablate,
    Sweep,
    Degrade,
    Bench,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ablate => "ablate",
            Command::Sweep => "sweep",
            Command::Degrade => "degrade",
            Command::Bench => "bench",
        }
    }
}

pub const CONFIG_ECHO: &str = "config.txt";
pub const LOSS_CSV: &str = "loss.csv";
pub const CHECKPOINT: &str = "model.ckpt";

/// Files a command wrote plus a short human summary.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn echo(&mut self, command: Command, cfg: &RunConfig) -> Result<()> {
        self.text(CONFIG_ECHO, &format!("# ovsr {}\n{}", command.as_str(), cfg.to_text()))
    }

    fn done(self, summary: String) -> Outcome {
        Outcome {
            files: self.files,
            summary,
        }
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.check_paths()?;
    match command {
        Command::Train => cmd_train(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Ablate => cmd_ablate(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Degrade => cmd_degrade(cfg),
        Command::Bench => cmd_bench(cfg),
    }
}

/// Named LR/HR sequences for evaluation.
pub fn eval_set(cfg: &RunConfig) -> Result<Vec<(String, VideoSequence)>> {
    match &cfg.eval_data {
        DataSource::Synthetic => Ok(synthetic_eval_set(
            cfg.eval_seed,
            cfg.eval_count,
            cfg.eval_length,
            cfg.eval_lr_size,
            cfg.scale,
        )?),
        DataSource::Dir(root) => list_sequences(root)?
            .into_iter()
            .map(|(name, dir)| Ok((name, degrade(read_frames(&dir)?, cfg.scale)?)))
            .collect(),
    }
}

fn clip_source(cfg: &RunConfig) -> Result<ClipSource> {
    match &cfg.train_data {
        DataSource::Synthetic => Ok(ClipSource::Synthetic { canvas: cfg.canvas }),
        DataSource::Dir(root) => Ok(ClipSource::Clips(
            list_sequences(root)?
                .iter()
                .map(|(_, dir)| read_frames(dir))
                .collect::<Result<_>>()?,
        )),
    }
}

/// Trains a fresh model without touching the file system.
pub fn train_model(cfg: &RunConfig) -> Result<(Model<Tensor>, Vec<TrainRecord>)> {
    let model = Model::init(&cfg.model_config()?, cfg.seed)?;
    let mut trainer = Trainer::new(model, cfg.train_config()?, cfg.loss_config()?)?;
    let source = clip_source(cfg)?;
    let eval = eval_set(cfg)?;
    let mut records = Vec::new();
    trainer.run(&source, &eval, &cfg.protocol(), |r| records.push(r.clone()))?;
    Ok((trainer.into_model(), records))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.output)?;
    w.echo(Command::Train, cfg)?;
    let (model, records) = train_model(cfg)?;
    w.text(LOSS_CSV, &loss_csv(&records))?;
    let path = cfg.output.join(CHECKPOINT);
    checkpoint::save(&path, &model)?;
    w.files.push(path);
    let last = records.iter().rev().find_map(|r| r.eval_psnr.map(|p| (r.iteration, p)));
    let summary = match last {
        Some((it, p)) => format!("{}: eval PSNR {p:.3} dB after iteration {it}", model.config),
        None => format!("{}: trained {} iterations", model.config, records.len()),
    };
    Ok(w.done(summary))
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Model<Tensor>> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::config("checkpoint", "required by this command"))?;
    let model = checkpoint::load(path)?;
    checkpoint::expect_framework(&model, cfg.framework, path)?;
    Ok(model)
}

/// Scores `model`, or bicubic upsampling when `model` is `None`.
pub fn evaluate(
    model: Option<&Model<Tensor>>,
    set: &[(String, VideoSequence)],
    protocol: &EvalProtocol,
    flops_at: (usize, usize),
) -> Result<EvalReport> {
    Ok(match model {
        Some(m) => EvalReport {
            model: m.config.name(),
            sequences: evaluate_model(&m.to_vars(false), set, protocol)?,
            complexity: Some(ComplexityReport::new(&m.config, flops_at.0, flops_at.1)?),
        },
        None => EvalReport {
            model: "bicubic".into(),
            sequences: evaluate_bicubic(set, protocol)?,
            complexity: None,
        },
    })
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.output)?;
    w.echo(Command::Eval, cfg)?;
    let model = if cfg.baseline_bicubic { None } else { Some(load_checkpoint(cfg)?) };
    let report = evaluate(model.as_ref(), &eval_set(cfg)?, &cfg.protocol(), (cfg.bench_width, cfg.bench_height))?;
    w.text("report.csv", &eval_csv(&report))?;
    w.text("report.txt", &eval_table(&report))?;
    let summary = format!(
        "{}: PSNR {:.3} dB, SSIM {:.4} over {} sequences",
        report.model,
        report.mean_psnr(),
        report.mean_ssim(),
        report.sequences.len()
    );
    Ok(w.done(summary))
}

/// The grid of single-input removals. Baselines get one `G` column; omniscient
/// models get `Net_p`, `Net_s` and `Both`.
pub fn ablation_grid(
    model: &Model<Tensor>,
    set: &[(String, VideoSequence)],
    protocol: &EvalProtocol,
) -> Result<AblationGrid> {
    let vars = model.to_vars(false);
    let targets: Vec<(&str, MaskTarget)> = if model.config.framework.is_omniscient() {
        vec![
            ("Net_p", MaskTarget::Precursor),
            ("Net_s", MaskTarget::Successor),
            ("Both", MaskTarget::Both),
        ]
    } else {
        vec![("G", MaskTarget::Successor)]
    };
    let full = masked_psnr(&vars, set, protocol, &InputMask::none())?.expect("unmasked run");
    let mut rows = Vec::new();
    for input in InputName::ALL {
        let cells = targets
            .iter()
            .map(|&(_, target)| masked_psnr(&vars, set, protocol, &InputMask::none().with(target, input)))
            .collect::<Result<Vec<_>>>()?;
        rows.push((input.as_str().to_string(), cells));
    }
    Ok(AblationGrid {
        model: model.config.name(),
        columns: targets.iter().map(|(c, _)| c.to_string()).collect(),
        full,
        rows,
    })
}

/// Mean PSNR with `mask` applied; `None` when the mask names an input the
/// targeted networks never read.
fn masked_psnr(
    model: &Model<Var>,
    set: &[(String, VideoSequence)],
    protocol: &EvalProtocol,
    mask: &InputMask,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    for (name, seq) in set {
        let run = match ablate_input(seq, model, mask) {
            Ok(run) => run,
            Err(CoreError::NotAnInput(..)) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let sr: Vec<Tensor> = run.sr.iter().map(|v| v.value().clamp(0.0, 1.0)).collect();
        let hr = seq
            .targets()
            .ok_or_else(|| CoreError::invalid("ablate", "evaluation sequence has no HR frames"))?;
        total += score_sequence(name, &sr, hr, protocol)?.psnr;
    }
    Ok(Some(total / set.len() as f64))
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.output)?;
    w.echo(Command::Ablate, cfg)?;
    let model = load_checkpoint(cfg)?;
    let grid = ablation_grid(&model, &eval_set(cfg)?, &cfg.protocol())?;
    w.text("ablation.txt", &grid.to_table())?;
    w.text("ablation.csv", &grid.to_csv())?;
    Ok(w.done(grid.to_table()))
}

/// Labelled configurations along one sweep axis.
pub fn sweep_settings(cfg: &RunConfig) -> Result<Vec<(String, RunConfig)>> {
    if !cfg.framework.is_omniscient() {
        return Err(Error::config("framework", format!("sweeps need lovsr or govsr, not {}", cfg.framework)));
    }
    Ok(match cfg.sweep_axis {
        SweepAxis::Alpha => {
            let mut out = vec![(
                "bicubic-base".to_string(),
                RunConfig {
                    refine: RefineMode::Bicubic,
                    alpha: 0.0,
                    ..cfg.clone()
                },
            )];
            for alpha in [0.0, 0.01, 0.1, 1.0] {
                out.push((alpha.to_string(), RunConfig { alpha, ..cfg.clone() }));
            }
            out
        }
        SweepAxis::Split => {
            let total = cfg.blocks_precursor + cfg.blocks_successor;
            (0..=total)
                .map(|p| {
                    (
                        format!("{p}+{}", total - p),
                        RunConfig {
                            blocks_precursor: p,
                            blocks_successor: total - p,
                            ..cfg.clone()
                        },
                    )
                })
                .collect()
        }
    })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.output)?;
    w.echo(Command::Sweep, cfg)?;
    let axis = match cfg.sweep_axis {
        SweepAxis::Alpha => "alpha",
        SweepAxis::Split => "split",
    };
    let settings = sweep_settings(cfg)?;
    let set = eval_set(cfg)?;
    let mut rows = Vec::new();
    for (label, setting) in &settings {
        // Each row can be re-run on its own with `ovsr train`.
        w.text(&format!("{axis}-{label}.txt"), &format!("# ovsr train\n{}", setting.to_text()))?;
        let (model, _) = train_model(setting)?;
        let report = evaluate(Some(&model), &set, &setting.protocol(), (setting.bench_width, setting.bench_height))?;
        rows.push(SweepRow {
            setting: label.clone(),
            model: model.config.name(),
            parameters: count_parameters(&model.config).total(),
            psnr: report.mean_psnr(),
            ssim: report.mean_ssim(),
        });
    }
    let table = sweep_table(axis, &rows);
    w.text("sweep.txt", &table)?;
    w.text("sweep.csv", &sweep_csv(axis, &rows))?;
    Ok(w.done(table))
}

pub fn cmd_degrade(cfg: &RunConfig) -> Result<Outcome> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::config("input", "degrade needs an input frame directory"))?;
    let hr = read_frames(input)?;
    let lr = hr
        .iter()
        .map(|f| degrade_frame(f, cfg.scale))
        .collect::<ovsr_core::Result<Vec<_>>>()?;
    let mut w = Writer::new(&cfg.output)?;
    w.echo(Command::Degrade, cfg)?;
    write_frames(&cfg.output, &lr)?;
    // Unquantised values for exact comparisons.
    let dump = cfg.output.join("lr.ovsrt");
    write_tensors(&dump, &lr)?;
    w.files.push(dump);
    let [_, _, h, wd] = lr[0].shape();
    Ok(w.done(format!("{} frames degraded to {wd}x{h}", lr.len())))
}

fn bench_model(cfg: &RunConfig) -> Result<Model<Tensor>> {
    match &cfg.checkpoint {
        Some(_) => load_checkpoint(cfg),
        None => Ok(Model::init(&cfg.model_config()?, cfg.seed)?),
    }
}

/// Complexity columns plus single-threaded wall time at the configured
/// output resolution.
pub fn benchmark(cfg: &RunConfig, model: &Model<Tensor>) -> Result<(ComplexityReport, Timing)> {
    let mc = &model.config;
    let (w, h) = (cfg.bench_width, cfg.bench_height);
    let mut report = ComplexityReport::new(mc, w, h)?;
    // Autodiff handles are not `Send`, so the graph is built inside the pool.
    let timing = single_threaded(|| {
        let vars = model.to_vars(false);
        benchmark_time(&vars, h / mc.scale, w / mc.scale, cfg.bench_frames, cfg.bench_warmup, cfg.bench_reps)
    })?;
    report.ms_per_frame = Some(timing.ms_per_frame);
    Ok((report, timing))
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<Outcome> {
    let mut wr = Writer::new(&cfg.output)?;
    wr.echo(Command::Bench, cfg)?;
    let model = bench_model(cfg)?;
    let (report, timing) = benchmark(cfg, &model)?;
    let estimate = param_pixel_estimate(&model.config, cfg.bench_height, cfg.bench_width)?;
    let rows = vec![
        vec![
            "Model".to_string(),
            "Parameter (M)".into(),
            format!("FLOPs (T) {}x{}", cfg.bench_width, cfg.bench_height),
            "Params x LR px (T)".into(),
            "Time (ms) / FPS".into(),
        ],
        vec![
            model.config.name(),
            format!("{:.3}", report.parameters as f64 / 1e6),
            format!("{:.4}", report.flops as f64 / 1e12),
            format!("{:.4}", estimate as f64 / 1e12),
            format!("{:.1} / {:.2}", timing.ms_per_frame, timing.fps),
        ],
    ];
    let mut table = align(&rows);
    table.push_str("FLOPs count one multiply-accumulate as one FLOP; time is single-threaded and hardware-dependent.\n");
    wr.text("bench.txt", &table)?;
    let samples: Vec<String> = timing.samples.iter().map(|s| format!("{s:.3}")).collect();
    wr.text(
        "bench.csv",
        &format!(
            "model,parameters,flops,width,height,ms_per_frame,fps,samples_ms\n{},{},{},{},{},{:.3},{:.3},{}\n",
            model.config.name(),
            report.parameters,
            report.flops,
            cfg.bench_width,
            cfg.bench_height,
            timing.ms_per_frame,
            timing.fps,
            samples.join(" ")
        ),
    )?;
    Ok(wr.done(table))
}
