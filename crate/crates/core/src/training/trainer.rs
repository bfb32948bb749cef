use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::{sample_batch, BatchSpec, ClipSource};
use super::loss::{sequence_loss, LossConfig};
use super::optim::{adam_step, AdamConfig, OptimizerState};
use super::schedule::LrSchedule;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::generator::Model;
use crate::metrics::{evaluate_model, EvalProtocol};
use crate::scalar::Scalar;
use crate::scheduler::{run_model, VideoSequence};
use crate::tensor::Tensor;

/// Mixed into the seed so batch sampling and initialisation draw from
/// different streams.
const SAMPLER_STREAM: u64 = 0x5eed_da7a;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch: usize,
    pub lr_patch: usize,
    /// Frames per clip that receive a loss.
    pub clip_length: usize,
    /// Feed one extra real frame at each end of every clip.
    pub context_frames: bool,
    pub adam: AdamConfig,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Evaluate every this many iterations; 0 evaluates only at the end.
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300_000,
            batch: 16,
            lr_patch: 64,
            clip_length: 7,
            context_frames: true,
            adam: AdamConfig::default(),
            schedule: LrSchedule::default(),
            seed: 0,
            eval_every: 5_000,
        }
    }
}

impl TrainConfig {
    /// A configuration that trains a small model in minutes on one core.
    pub fn desk(iterations: u64, seed: u64) -> Self {
        TrainConfig {
            iterations,
            batch: 4,
            lr_patch: 16,
            clip_length: 3,
            context_frames: true,
            schedule: LrSchedule::fitted(iterations),
            seed,
            eval_every: 0,
            ..Self::default()
        }
    }
}

/// One line of the loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: u64,
    pub lr: Scalar,
    pub loss: f64,
    pub eval_psnr: Option<f64>,
}

#[derive(Debug)]
pub struct Trainer {
    model: Model<Tensor>,
    state: OptimizerState,
    cfg: TrainConfig,
    loss: LossConfig,
    rng: ChaCha8Rng,
    iteration: u64,
}

impl Trainer {
    pub fn new(model: Model<Tensor>, cfg: TrainConfig, loss: LossConfig) -> Result<Self> {
        loss.validate()?;
        let state = OptimizerState::new(model.params().into_iter().map(|(_, t)| t));
        Ok(Trainer {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLER_STREAM),
            model,
            state,
            cfg,
            loss,
            iteration: 0,
        })
    }

    pub fn model(&self) -> &Model<Tensor> {
        &self.model
    }

    pub fn into_model(self) -> Model<Tensor> {
        self.model
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    fn batch_spec(&self) -> BatchSpec {
        BatchSpec {
            batch: self.cfg.batch,
            lr_patch: self.cfg.lr_patch,
            frames: self.cfg.clip_length,
            context: self.cfg.context_frames,
            scale: self.model.config.scale,
        }
    }

    /// Loss of `model` on a batch, as a graph rooted at the parameters.
    pub fn batch_loss(model: &Model<Var>, batch: &VideoSequence, loss: &LossConfig) -> Result<Var> {
        let run = run_model(batch, model)?;
        let hr: Vec<Var> = batch
            .targets()
            .ok_or_else(|| Error::invalid("train", "batch has no HR frames"))?
            .iter()
            .cloned()
            .map(Var::constant)
            .collect();
        sequence_loss(&run.sr, run.sr_p.as_deref(), &hr, loss)
    }

    /// Samples a batch, backpropagates, and takes one Adam step.
    pub fn step(&mut self, source: &ClipSource) -> Result<TrainRecord> {
        let batch = sample_batch(source, &self.batch_spec(), &mut self.rng)?;
        let vars = self.model.to_vars(true);
        let loss = Self::batch_loss(&vars, &batch, &self.loss)?;
        let value = loss.value().data()[0] as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration as usize,
                value,
            });
        }
        let grads = loss.backward()?;
        let g: Vec<Tensor> = vars.params().into_iter().map(|(_, v)| grads.get_or_zeros(v)).collect();
        drop(vars);
        let lr = self.cfg.schedule.lr_at(self.iteration);
        adam_step(&mut self.model.params_mut(), &g, &mut self.state, lr, &self.cfg.adam)?;
        let record = TrainRecord {
            iteration: self.iteration,
            lr,
            loss: value,
            eval_psnr: None,
        };
        self.iteration += 1;
        Ok(record)
    }

    /// Mean PSNR over the evaluation set.
    pub fn evaluate(&self, set: &[(String, VideoSequence)], protocol: &EvalProtocol) -> Result<f64> {
        let scores = evaluate_model(&self.model.to_vars(false), set, protocol)?;
        Ok(scores.iter().map(|s| s.psnr).sum::<f64>() / scores.len() as f64)
    }

    /// Runs the remaining iterations, evaluating on `eval_set` every
    /// `eval_every` iterations and after the last one.
    pub fn run(
        &mut self,
        source: &ClipSource,
        eval_set: &[(String, VideoSequence)],
        protocol: &EvalProtocol,
        mut on_record: impl FnMut(&TrainRecord),
    ) -> Result<Vec<TrainRecord>> {
        let mut log = Vec::new();
        while self.iteration < self.cfg.iterations {
            let mut record = self.step(source)?;
            let done = self.iteration;
            let due = self.cfg.eval_every > 0 && done % self.cfg.eval_every == 0;
            if !eval_set.is_empty() && (due || done == self.cfg.iterations) {
                record.eval_psnr = Some(self.evaluate(eval_set, protocol)?);
            }
            on_record(&record);
            log.push(record);
        }
        Ok(log)
    }
}
