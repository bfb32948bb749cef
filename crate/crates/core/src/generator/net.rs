use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ModelConfig, IMAGE_CHANNELS};
use super::layers::{model_layers, LayerSpec, Role};
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::ops::{self, Padding};
use crate::scalar::{sqrt, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv<P> {
    /// `(F_out, F_in, k, k)`
    pub weight: P,
    /// `(1, F_out, 1, 1)`
    pub bias: P,
}

impl<P> Conv<P> {
    pub fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> Conv<Q> {
        Conv {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }
}

/// Progressive fusion residual block over `n` streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfrb<P> {
    pub stage1: Vec<Conv<P>>,
    pub merge: Conv<P>,
    pub stage2: Vec<Conv<P>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net<P> {
    pub fusion: Vec<Conv<P>>,
    pub blocks: Vec<Pfrb<P>>,
    pub tail: Conv<P>,
    pub upscale: Vec<Conv<P>>,
}

impl<P> Net<P> {
    /// Convs in [`net_layers`](super::net_layers) order.
    pub fn convs(&self) -> Vec<&Conv<P>> {
        let mut out: Vec<&Conv<P>> = self.fusion.iter().collect();
        for b in &self.blocks {
            out.extend(b.stage1.iter());
            out.push(&b.merge);
            out.extend(b.stage2.iter());
        }
        out.push(&self.tail);
        out.extend(self.upscale.iter());
        out
    }

    pub fn convs_mut(&mut self) -> Vec<&mut Conv<P>> {
        let mut out: Vec<&mut Conv<P>> = self.fusion.iter_mut().collect();
        for b in &mut self.blocks {
            out.extend(b.stage1.iter_mut());
            out.push(&mut b.merge);
            out.extend(b.stage2.iter_mut());
        }
        out.push(&mut self.tail);
        out.extend(self.upscale.iter_mut());
        out
    }

    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> Net<Q> {
        Net {
            fusion: self.fusion.iter().map(|c| c.map(&mut f)).collect(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Pfrb {
                    stage1: b.stage1.iter().map(|c| c.map(&mut f)).collect(),
                    merge: b.merge.map(&mut f),
                    stage2: b.stage2.iter().map(|c| c.map(&mut f)).collect(),
                })
                .collect(),
            tail: self.tail.map(&mut f),
            upscale: self.upscale.iter().map(|c| c.map(&mut f)).collect(),
        }
    }

    /// Builds a net from convs listed in layer order.
    fn assemble(streams: usize, blocks: usize, convs: Vec<Conv<P>>) -> Self {
        let mut it = convs.into_iter();
        let mut take = |n: usize| -> Vec<Conv<P>> { it.by_ref().take(n).collect() };
        let fusion = take(streams);
        let blocks = (0..blocks)
            .map(|_| {
                let stage1 = take(streams);
                let merge = take(1).pop().expect("layer list too short");
                let stage2 = take(streams);
                Pfrb { stage1, merge, stage2 }
            })
            .collect();
        let tail = take(1).pop().expect("layer list too short");
        let upscale = take(usize::MAX);
        Net {
            fusion,
            blocks,
            tail,
            upscale,
        }
    }
}

fn init_conv(spec: &LayerSpec, slope: Scalar, rng: &mut ChaCha8Rng) -> Conv<Tensor> {
    let fan_in = (spec.in_channels * spec.kernel * spec.kernel) as Scalar;
    let std = sqrt(2.0 / (fan_in * (1.0 + slope * slope)));
    let normal = Normal::new(0.0, std as f64).expect("finite std");
    let shape = [spec.out_channels, spec.in_channels, spec.kernel, spec.kernel];
    Conv {
        weight: Tensor::from_fn(shape, |_, _, _, _| normal.sample(rng) as Scalar),
        bias: Tensor::zeros([1, spec.out_channels, 1, 1]),
    }
}

fn zero_conv(spec: &LayerSpec) -> Conv<Tensor> {
    Conv {
        weight: Tensor::zeros([spec.out_channels, spec.in_channels, spec.kernel, spec.kernel]),
        bias: Tensor::zeros([1, spec.out_channels, 1, 1]),
    }
}

/// Precursor (when present) and successor/generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<P> {
    pub config: ModelConfig,
    pub precursor: Option<Net<P>>,
    pub successor: Net<P>,
}

impl Model<Tensor> {
    /// Fan-in scaled normal weights and zero biases, except the last conv of
    /// each network which starts at zero so the initial output is the
    /// residual base alone.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slope = config.leaky_slope;
        let mut model = Self::build(config, |spec| init_conv(spec, slope, &mut rng))?;
        for net in model.precursor.iter_mut().chain(core::iter::once(&mut model.successor)) {
            if let Some(last) = net.upscale.last_mut() {
                last.weight = Tensor::zeros(last.weight.shape());
            }
        }
        Ok(model)
    }

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        Self::build(config, zero_conv)
    }

    fn build(config: &ModelConfig, mut make: impl FnMut(&LayerSpec) -> Conv<Tensor>) -> Result<Self> {
        config.validate()?;
        let mut precursor = None;
        let mut successor = None;
        for (role, layers) in model_layers(config) {
            let blocks = match role {
                Role::Precursor => config.blocks_precursor,
                _ => config.blocks_successor,
            };
            let convs = layers.iter().map(&mut make).collect();
            let net = Net::assemble(config.streams(), blocks, convs);
            match role {
                Role::Precursor => precursor = Some(net),
                _ => successor = Some(net),
            }
        }
        Ok(Model {
            config: config.clone(),
            precursor,
            successor: successor.expect("every model has a main network"),
        })
    }

    /// Parameters as graph leaves; `trainable = false` gives constants for
    /// inference.
    pub fn to_vars(&self, trainable: bool) -> Model<Var> {
        self.map(|t| {
            if trainable {
                Var::param(t.clone())
            } else {
                Var::constant(t.clone())
            }
        })
    }

    /// Replaces parameters from a name-ordered list, checking names and
    /// shapes.
    pub fn load(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
        if names.len() != named.len() {
            return Err(Error::Format(format!(
                "expected {} tensors for {}, got {}",
                names.len(),
                config,
                named.len()
            )));
        }
        for ((slot, expected), (name, t)) in model.params_mut().into_iter().zip(&names).zip(named) {
            if &name != expected {
                return Err(Error::Format(format!("expected tensor {expected}, got {name}")));
            }
            if t.shape() != slot.shape() {
                return Err(Error::Format(format!(
                    "{name}: expected shape {:?}, got {:?}",
                    slot.shape(),
                    t.shape()
                )));
            }
            *slot = t;
        }
        Ok(model)
    }
}

impl<P> Model<P> {
    fn main_role(&self) -> Role {
        if self.config.framework.is_omniscient() {
            Role::Successor
        } else {
            Role::Generator
        }
    }

    /// Named parameters in a fixed order: precursor first, then the main
    /// network, weight before bias.
    pub fn params(&self) -> Vec<(String, &P)> {
        let mut out = Vec::new();
        let cfg = &self.config;
        for (role, layers) in model_layers(cfg) {
            let net = match role {
                Role::Precursor => self.precursor.as_ref().expect("precursor present"),
                _ => &self.successor,
            };
            for (spec, conv) in layers.iter().zip(net.convs()) {
                out.push((format!("{}.{}.weight", role.as_str(), spec.name), &conv.weight));
                out.push((format!("{}.{}.bias", role.as_str(), spec.name), &conv.bias));
            }
        }
        out
    }

    /// Parameters in [`Model::params`] order.
    pub fn params_mut(&mut self) -> Vec<&mut P> {
        let mut out = Vec::new();
        if let Some(p) = self.precursor.as_mut() {
            for c in p.convs_mut() {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
        }
        for c in self.successor.convs_mut() {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out
    }

    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> Model<Q> {
        Model {
            config: self.config.clone(),
            precursor: self.precursor.as_ref().map(|n| n.map(&mut f)),
            successor: self.successor.map(&mut f),
        }
    }

    pub fn role_of_main(&self) -> Role {
        self.main_role()
    }
}

/// One conv application observed during a logged forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCall {
    pub layer: String,
    pub activated: bool,
}

struct Ctx<'a> {
    slope: Scalar,
    log: Option<&'a mut Vec<ConvCall>>,
}

impl Ctx<'_> {
    fn conv(&mut self, name: impl FnOnce() -> String, conv: &Conv<Var>, x: &Var, activate: bool) -> Result<Var> {
        let y = ops::conv2d(x, &conv.weight, &conv.bias, Padding::Same)?;
        if let Some(log) = self.log.as_deref_mut() {
            log.push(ConvCall {
                layer: name(),
                activated: activate,
            });
        }
        Ok(if activate { ops::leaky_relu(&y, self.slope) } else { y })
    }
}

/// Output of one generator invocation.
#[derive(Debug, Clone)]
pub struct NetOutput {
    /// Upscaled residual image `(B, C_img, s*h, s*w)`.
    pub residual: Var,
    /// Updated hidden state `(B, F, h, w)`.
    pub hidden: Var,
}

fn check_streams(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(op, format!("expected {expected} streams, got {got}")));
    }
    Ok(())
}

fn fusion_impl(net: &Net<Var>, frames: &[Var], hiddens: &[Var], ctx: &mut Ctx) -> Result<Vec<Var>> {
    check_streams("fusion_head", net.fusion.len(), frames.len())?;
    check_streams("fusion_head", net.fusion.len(), hiddens.len())?;
    frames
        .iter()
        .zip(hiddens)
        .zip(&net.fusion)
        .enumerate()
        .map(|(k, ((frame, hidden), conv))| {
            let x = ops::concat_channels(&[frame.clone(), hidden.clone()])?;
            ctx.conv(|| format!("fusion.{k}"), conv, &x, true)
        })
        .collect()
}

fn pfrb_impl(block: &Pfrb<Var>, idx: usize, streams: &[Var], ctx: &mut Ctx) -> Result<Vec<Var>> {
    check_streams("pfrb", block.stage1.len(), streams.len())?;
    let first: Vec<Var> = streams
        .iter()
        .zip(&block.stage1)
        .enumerate()
        .map(|(k, (s, conv))| ctx.conv(|| format!("blocks.{idx}.stage1.{k}"), conv, s, true))
        .collect::<Result<_>>()?;
    let merged = ops::concat_channels(&first)?;
    let shared = ctx.conv(|| format!("blocks.{idx}.merge"), &block.merge, &merged, true)?;
    first
        .iter()
        .zip(&block.stage2)
        .zip(streams)
        .enumerate()
        .map(|(k, ((f, conv), input))| {
            let x = ops::concat_channels(&[f.clone(), shared.clone()])?;
            let y = ctx.conv(|| format!("blocks.{idx}.stage2.{k}"), conv, &x, true)?;
            ops::add(input, &y)
        })
        .collect()
}

fn hidden_impl(tail: &Conv<Var>, streams: &[Var], ctx: &mut Ctx) -> Result<Var> {
    let x = ops::concat_channels(streams)?;
    ctx.conv(|| "tail".into(), tail, &x, true)
}

fn upscale_impl(convs: &[Conv<Var>], hidden: &Var, ctx: &mut Ctx) -> Result<Var> {
    let last = convs.len().saturating_sub(1);
    let mut x = hidden.clone();
    for (i, conv) in convs.iter().enumerate() {
        let y = ctx.conv(|| format!("upscale.{i}"), conv, &x, i != last)?;
        x = ops::pixel_shuffle(&y, 2)?;
    }
    Ok(x)
}

/// Fuses each LR frame with its hidden state into one feature stream per
/// window position (past, present, future).
pub fn fusion_head(net: &Net<Var>, frames: &[Var], hiddens: &[Var], slope: Scalar) -> Result<Vec<Var>> {
    fusion_impl(net, frames, hiddens, &mut Ctx { slope, log: None })
}

/// Per-stream 3x3 conv, shared 1x1 merge, per-stream 3x3 conv on the
/// stream's features concatenated with the merge, then a residual add.
pub fn pfrb_forward(block: &Pfrb<Var>, streams: &[Var], slope: Scalar) -> Result<Vec<Var>> {
    pfrb_impl(block, 0, streams, &mut Ctx { slope, log: None })
}

/// Concatenates the streams and emits the updated hidden state.
pub fn emit_hidden(tail: &Conv<Var>, streams: &[Var], slope: Scalar) -> Result<Var> {
    hidden_impl(tail, streams, &mut Ctx { slope, log: None })
}

/// Conv + pixel shuffle(2) per stage; the last conv has no activation.
pub fn upscale(convs: &[Conv<Var>], hidden: &Var, slope: Scalar) -> Result<Var> {
    if convs.is_empty() {
        return Err(Error::invalid("upscale", "scale must be a power of 2 >= 2"));
    }
    upscale_impl(convs, hidden, &mut Ctx { slope, log: None })
}

impl Net<Var> {
    pub fn forward(&self, frames: &[Var], hiddens: &[Var], slope: Scalar) -> Result<NetOutput> {
        self.run(frames, hiddens, &mut Ctx { slope, log: None })
    }

    /// Like [`Net::forward`], also recording every conv applied.
    pub fn forward_logged(
        &self,
        frames: &[Var],
        hiddens: &[Var],
        slope: Scalar,
        log: &mut Vec<ConvCall>,
    ) -> Result<NetOutput> {
        self.run(frames, hiddens, &mut Ctx { slope, log: Some(log) })
    }

    fn run(&self, frames: &[Var], hiddens: &[Var], ctx: &mut Ctx) -> Result<NetOutput> {
        for f in frames {
            if f.shape()[1] != IMAGE_CHANNELS {
                return Err(Error::dim("generator", crate::error::Axis::Channel, IMAGE_CHANNELS, f.shape()[1]));
            }
        }
        let mut streams = fusion_impl(self, frames, hiddens, ctx)?;
        for (i, block) in self.blocks.iter().enumerate() {
            streams = pfrb_impl(block, i, &streams, ctx)?;
        }
        let hidden = hidden_impl(&self.tail, &streams, ctx)?;
        let residual = upscale_impl(&self.upscale, &hidden, ctx)?;
        Ok(NetOutput { residual, hidden })
    }
}
