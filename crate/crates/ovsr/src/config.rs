//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is a valid desk-scale configuration. [`RunConfig::to_text`]
//! writes every key back in a fixed order; parsing that echo reproduces the
//! same configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ovsr_core::generator::{parse_split, Framework, ModelConfig, RefineMode, UpscaleWidth};
use ovsr_core::metrics::EvalProtocol;
use ovsr_core::training::{LossConfig, LrSchedule, TrainConfig};
use ovsr_core::Scalar;

use crate::error::{Error, Result};

/// Where clips come from: generated scenes or a directory of frame
/// directories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Dir(PathBuf),
}

impl DataSource {
    fn parse(s: &str) -> Self {
        if s == "synthetic" {
            DataSource::Synthetic
        } else {
            DataSource::Dir(PathBuf::from(s))
        }
    }

    fn text(&self) -> String {
        match self {
            DataSource::Synthetic => "synthetic".into(),
            DataSource::Dir(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// The full-length schedule compressed onto `iterations`.
    Fitted,
    /// The full-length schedule as is.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub framework: Framework,
    pub blocks_precursor: usize,
    pub blocks_successor: usize,
    pub filters: usize,
    pub scale: usize,
    pub leaky_slope: Scalar,
    pub window: usize,
    pub upscale: UpscaleWidth,
    pub refine: RefineMode,

    pub iterations: u64,
    pub batch: usize,
    pub lr_patch: usize,
    pub clip_length: usize,
    pub context_frames: bool,
    pub lr: Scalar,
    pub lr_floor: Scalar,
    pub schedule: ScheduleKind,
    pub eval_every: u64,
    pub seed: u64,

    pub alpha: Scalar,
    pub epsilon: Scalar,

    pub skip_frames: usize,
    pub border_crop: usize,

    pub train_data: DataSource,
    pub canvas: usize,
    pub eval_data: DataSource,
    pub eval_seed: u64,
    pub eval_count: usize,
    pub eval_length: usize,
    pub eval_lr_size: usize,

    pub checkpoint: Option<PathBuf>,
    /// Evaluate plain bicubic upsampling instead of a checkpoint.
    pub baseline_bicubic: bool,
    pub sweep_axis: SweepAxis,
    pub input: Option<PathBuf>,
    pub bench_width: usize,
    pub bench_height: usize,
    pub bench_frames: usize,
    pub bench_reps: usize,
    pub bench_warmup: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::omniscient(Framework::Govsr, 1, 1, 16);
        let train = TrainConfig::desk(500, 0);
        let loss = LossConfig::default();
        let proto = EvalProtocol::default();
        RunConfig {
            framework: model.framework,
            blocks_precursor: model.blocks_precursor,
            blocks_successor: model.blocks_successor,
            filters: model.filters,
            scale: model.scale,
            leaky_slope: model.leaky_slope,
            window: model.window,
            upscale: model.upscale,
            refine: model.refine,
            iterations: train.iterations,
            batch: train.batch,
            lr_patch: train.lr_patch,
            clip_length: train.clip_length,
            context_frames: train.context_frames,
            lr: train.schedule.initial,
            lr_floor: train.schedule.floor,
            schedule: ScheduleKind::Fitted,
            eval_every: 100,
            seed: train.seed,
            alpha: loss.alpha,
            epsilon: loss.epsilon,
            skip_frames: proto.skip_frames,
            border_crop: proto.border_crop,
            train_data: DataSource::Synthetic,
            canvas: 128,
            eval_data: DataSource::Synthetic,
            eval_seed: 999,
            eval_count: 4,
            eval_length: 7,
            eval_lr_size: 32,
            checkpoint: None,
            baseline_bicubic: false,
            sweep_axis: SweepAxis::Alpha,
            input: None,
            bench_width: 1280,
            bench_height: 720,
            bench_frames: 3,
            bench_reps: 3,
            bench_warmup: 1,
            output: PathBuf::from("out"),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| Error::config(key, format!("{v:?}: {e}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("{v:?} is not a boolean"))),
    }
}

fn core<T>(key: &str, r: ovsr_core::Result<T>) -> Result<T> {
    r.map_err(|e| Error::config(key, e.to_string()))
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), format!("expected key = value, got {line:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(pair, "expected key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => {
                let m = core(key, ModelConfig::parse_name(v))?;
                self.framework = m.framework;
                self.blocks_precursor = m.blocks_precursor;
                self.blocks_successor = m.blocks_successor;
                self.filters = m.filters;
            }
            "framework" => self.framework = core(key, Framework::parse(v))?,
            "blocks" => {
                (self.blocks_precursor, self.blocks_successor) = match parse_split(v) {
                    Some(split) => split,
                    None => (0, num(key, v)?),
                }
            }
            "filters" => self.filters = num(key, v)?,
            "scale" => self.scale = num(key, v)?,
            "leaky_slope" => self.leaky_slope = num(key, v)?,
            "window" => self.window = num(key, v)?,
            "upscale" => self.upscale = core(key, UpscaleWidth::parse(v))?,
            "refine" => self.refine = core(key, RefineMode::parse(v))?,
            "iterations" => self.iterations = num(key, v)?,
            "batch" => self.batch = num(key, v)?,
            "lr_patch" => self.lr_patch = num(key, v)?,
            "clip_length" => self.clip_length = num(key, v)?,
            "context_frames" => self.context_frames = flag(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "lr_floor" => self.lr_floor = num(key, v)?,
            "schedule" => {
                self.schedule = match v {
                    "fitted" => ScheduleKind::Fitted,
                    "fixed" => ScheduleKind::Fixed,
                    _ => return Err(Error::config(key, format!("{v:?} is not fitted|fixed"))),
                }
            }
            "eval_every" => self.eval_every = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "skip_frames" => self.skip_frames = num(key, v)?,
            "border_crop" => self.border_crop = num(key, v)?,
            "train_data" => self.train_data = DataSource::parse(v),
            "canvas" => self.canvas = num(key, v)?,
            "eval_data" => self.eval_data = DataSource::parse(v),
            "eval_seed" => self.eval_seed = num(key, v)?,
            "eval_count" => self.eval_count = num(key, v)?,
            "eval_length" => self.eval_length = num(key, v)?,
            "eval_lr_size" => self.eval_lr_size = num(key, v)?,
            "checkpoint" => self.checkpoint = opt_path(v),
            "baseline" => {
                self.baseline_bicubic = match v {
                    "bicubic" => true,
                    "none" => false,
                    _ => return Err(Error::config(key, format!("{v:?} is not bicubic|none"))),
                }
            }
            "sweep_axis" => {
                self.sweep_axis = match v {
                    "alpha" => SweepAxis::Alpha,
                    "split" => SweepAxis::Split,
                    _ => return Err(Error::config(key, format!("{v:?} is not alpha|split"))),
                }
            }
            "input" => self.input = opt_path(v),
            "bench_width" => self.bench_width = num(key, v)?,
            "bench_height" => self.bench_height = num(key, v)?,
            "bench_frames" => self.bench_frames = num(key, v)?,
            "bench_reps" => self.bench_reps = num(key, v)?,
            "bench_warmup" => self.bench_warmup = num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its resolved value.
    pub fn to_text(&self) -> String {
        let blocks = if self.framework.is_omniscient() {
            format!("{}+{}", self.blocks_precursor, self.blocks_successor)
        } else {
            self.blocks_successor.to_string()
        };
        let pairs: Vec<(&str, String)> = vec![
            ("framework", self.framework.to_string()),
            ("blocks", blocks),
            ("filters", self.filters.to_string()),
            ("scale", self.scale.to_string()),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("window", self.window.to_string()),
            ("upscale", self.upscale.as_str().into()),
            ("refine", self.refine.as_str().into()),
            ("iterations", self.iterations.to_string()),
            ("batch", self.batch.to_string()),
            ("lr_patch", self.lr_patch.to_string()),
            ("clip_length", self.clip_length.to_string()),
            ("context_frames", self.context_frames.to_string()),
            ("lr", self.lr.to_string()),
            ("lr_floor", self.lr_floor.to_string()),
            (
                "schedule",
                match self.schedule {
                    ScheduleKind::Fitted => "fitted",
                    ScheduleKind::Fixed => "fixed",
                }
                .into(),
            ),
            ("eval_every", self.eval_every.to_string()),
            ("seed", self.seed.to_string()),
            ("alpha", self.alpha.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("skip_frames", self.skip_frames.to_string()),
            ("border_crop", self.border_crop.to_string()),
            ("train_data", self.train_data.text()),
            ("canvas", self.canvas.to_string()),
            ("eval_data", self.eval_data.text()),
            ("eval_seed", self.eval_seed.to_string()),
            ("eval_count", self.eval_count.to_string()),
            ("eval_length", self.eval_length.to_string()),
            ("eval_lr_size", self.eval_lr_size.to_string()),
            ("checkpoint", path_text(&self.checkpoint)),
            ("baseline", if self.baseline_bicubic { "bicubic" } else { "none" }.into()),
            (
                "sweep_axis",
                match self.sweep_axis {
                    SweepAxis::Alpha => "alpha",
                    SweepAxis::Split => "split",
                }
                .into(),
            ),
            ("input", path_text(&self.input)),
            ("bench_width", self.bench_width.to_string()),
            ("bench_height", self.bench_height.to_string()),
            ("bench_frames", self.bench_frames.to_string()),
            ("bench_reps", self.bench_reps.to_string()),
            ("bench_warmup", self.bench_warmup.to_string()),
            ("output", self.output.display().to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            framework: self.framework,
            blocks_precursor: self.blocks_precursor,
            blocks_successor: self.blocks_successor,
            filters: self.filters,
            scale: self.scale,
            leaky_slope: self.leaky_slope,
            window: self.window,
            upscale: self.upscale,
            refine: self.refine,
        };
        core("model", cfg.validate())?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        for (key, v) in [("batch", self.batch), ("lr_patch", self.lr_patch), ("clip_length", self.clip_length)] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.lr > 0.0) || !(self.lr_floor > 0.0) || self.lr_floor > self.lr {
            return Err(Error::config("lr", format!("need 0 < lr_floor ({}) <= lr ({})", self.lr_floor, self.lr)));
        }
        let base = match self.schedule {
            ScheduleKind::Fitted => LrSchedule::fitted(self.iterations),
            ScheduleKind::Fixed => LrSchedule::default(),
        };
        Ok(TrainConfig {
            iterations: self.iterations,
            batch: self.batch,
            lr_patch: self.lr_patch,
            clip_length: self.clip_length,
            context_frames: self.context_frames,
            schedule: LrSchedule {
                initial: self.lr,
                floor: self.lr_floor,
                ..base
            },
            seed: self.seed,
            eval_every: self.eval_every,
            ..TrainConfig::default()
        })
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let cfg = LossConfig {
            epsilon: self.epsilon,
            alpha: self.alpha,
        };
        core("alpha", cfg.validate())?;
        Ok(cfg)
    }

    pub fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            skip_frames: self.skip_frames,
            border_crop: self.border_crop,
        }
    }

    /// Checks that referenced paths exist.
    pub fn check_paths(&self) -> Result<()> {
        for (key, src) in [("train_data", &self.train_data), ("eval_data", &self.eval_data)] {
            if let DataSource::Dir(p) = src {
                if !p.is_dir() {
                    return Err(Error::config(key, format!("{} is not a directory", p.display())));
                }
            }
        }
        for (key, p) in [("checkpoint", &self.checkpoint), ("input", &self.input)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::config(key, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}
