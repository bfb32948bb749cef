//! Static description of every conv layer in a network, shared by
//! initialisation, parameter counting and FLOP counting.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::config::{ModelConfig, UpscaleWidth, IMAGE_CHANNELS};

/// Which network of a model a layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Precursor,
    Successor,
    /// The single generator of IVSR, RVSR and HVSR.
    Generator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Precursor => "precursor",
            Role::Successor => "successor",
            Role::Generator => "generator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Spatial size relative to the LR frame.
    pub resolution: usize,
    /// Leaky ReLU after this conv.
    pub activated: bool,
}

impl LayerSpec {
    fn new(name: String, cin: usize, cout: usize, kernel: usize, resolution: usize, activated: bool) -> Self {
        LayerSpec {
            name,
            in_channels: cin,
            out_channels: cout,
            kernel,
            resolution,
            activated,
        }
    }

    pub fn weights(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }

    pub fn parameters(&self) -> usize {
        self.weights() + self.out_channels
    }

    /// Multiply-accumulates for one application on an `h x w` LR grid.
    pub fn macs(&self, lr_h: usize, lr_w: usize) -> u64 {
        self.weights() as u64 * (lr_h * self.resolution) as u64 * (lr_w * self.resolution) as u64
    }
}

/// `(in, out)` channels of each upscale stage.
pub fn upscale_widths(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let stages = cfg.upscale_stages();
    let f = cfg.filters;
    let c = IMAGE_CHANNELS;
    (0..stages)
        .map(|i| match cfg.upscale {
            UpscaleWidth::Compact => {
                let out = c * 4usize.pow((stages - i) as u32);
                (if i == 0 { f } else { out }, out)
            }
            UpscaleWidth::Wide => (f, if i + 1 == stages { 4 * c } else { 4 * f }),
        })
        .collect()
}

/// Layers of one network with `blocks` residual blocks, in parameter order.
pub fn net_layers(cfg: &ModelConfig, blocks: usize) -> Vec<LayerSpec> {
    let f = cfg.filters;
    let n = cfg.streams();
    let mut out = Vec::new();
    for k in 0..n {
        out.push(LayerSpec::new(format!("fusion.{k}"), IMAGE_CHANNELS + f, f, 3, 1, true));
    }
    for b in 0..blocks {
        for k in 0..n {
            out.push(LayerSpec::new(format!("blocks.{b}.stage1.{k}"), f, f, 3, 1, true));
        }
        out.push(LayerSpec::new(format!("blocks.{b}.merge"), n * f, f, 1, 1, true));
        for k in 0..n {
            out.push(LayerSpec::new(format!("blocks.{b}.stage2.{k}"), 2 * f, f, 3, 1, true));
        }
    }
    out.push(LayerSpec::new("tail".into(), n * f, f, 3, 1, true));
    let widths = upscale_widths(cfg);
    let last = widths.len() - 1;
    for (i, (cin, cout)) in widths.into_iter().enumerate() {
        out.push(LayerSpec::new(format!("upscale.{i}"), cin, cout, 3, 1 << i, i != last));
    }
    out
}

/// The networks of a model with their layers.
pub fn model_layers(cfg: &ModelConfig) -> Vec<(Role, Vec<LayerSpec>)> {
    let mut nets = Vec::new();
    if cfg.has_precursor() {
        nets.push((Role::Precursor, net_layers(cfg, cfg.blocks_precursor)));
    }
    let main = if cfg.framework.is_omniscient() {
        Role::Successor
    } else {
        Role::Generator
    };
    nets.push((main, net_layers(cfg, cfg.blocks_successor)));
    nets
}

/// Parameter totals per network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParameterCount {
    pub precursor: usize,
    /// Successor, or the single generator of a baseline.
    pub successor: usize,
}

impl ParameterCount {
    pub fn total(&self) -> usize {
        self.precursor + self.successor
    }
}

/// Exact count of weights and biases.
pub fn count_parameters(cfg: &ModelConfig) -> ParameterCount {
    let mut count = ParameterCount::default();
    for (role, layers) in model_layers(cfg) {
        let n: usize = layers.iter().map(LayerSpec::parameters).sum();
        match role {
            Role::Precursor => count.precursor = n,
            _ => count.successor = n,
        }
    }
    count
}
