//! The three-stream progressive fusion generator.
//!
//! A network fuses each LR frame in its window with a hidden state, runs a
//! stack of progressive fusion residual blocks over the streams, merges the
//! streams into the next hidden state and upscales that hidden state to a
//! residual image with sub-pixel convolutions. The precursor and successor
//! of the omniscient models, and the single generator of the baselines, all
//! share this structure.

mod config;
mod layers;
mod net;

pub use config::{parse_split, Framework, ModelConfig, RefineMode, UpscaleWidth, IMAGE_CHANNELS};
pub use layers::{count_parameters, model_layers, net_layers, upscale_widths, LayerSpec, ParameterCount, Role};
pub use net::{emit_hidden, fusion_head, pfrb_forward, upscale, Conv, ConvCall, Model, Net, NetOutput, Pfrb};
