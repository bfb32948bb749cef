use alloc::format;

use crate::error::{Error, Result};
use crate::generator::{count_parameters, model_layers, ModelConfig};

fn lr_size(cfg: &ModelConfig, out_h: usize, out_w: usize) -> Result<(usize, usize)> {
    let s = cfg.scale;
    if out_h % s != 0 || out_w % s != 0 {
        return Err(Error::invalid(
            "count_flops",
            format!("{out_w}x{out_h} output is not divisible by scale {s}"),
        ));
    }
    Ok((out_h / s, out_w / s))
}

/// Multiply-accumulates for one output frame of `out_h x out_w` (one pass
/// of every network). One MAC is counted as one FLOP.
pub fn count_flops(cfg: &ModelConfig, out_h: usize, out_w: usize) -> Result<u64> {
    let (h, w) = lr_size(cfg, out_h, out_w)?;
    Ok(model_layers(cfg)
        .iter()
        .flat_map(|(_, layers)| layers.iter())
        .map(|l| l.macs(h, w))
        .sum())
}

/// Parameter count times LR pixel count: the estimate the layer walk should
/// agree with when most layers run at LR resolution.
pub fn param_pixel_estimate(cfg: &ModelConfig, out_h: usize, out_w: usize) -> Result<u64> {
    let (h, w) = lr_size(cfg, out_h, out_w)?;
    Ok(count_parameters(cfg).total() as u64 * (h * w) as u64)
}

/// Median of `values`; sorts in place. `None` when empty.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Frames per second from milliseconds per frame.
pub fn fps(ms_per_frame: f64) -> f64 {
    1000.0 / ms_per_frame
}

/// Size and cost columns of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub parameters: usize,
    pub precursor_parameters: usize,
    pub successor_parameters: usize,
    pub flops: u64,
    /// `(width, height)` of the output frame the FLOPs refer to.
    pub flops_resolution: (usize, usize),
    pub ms_per_frame: Option<f64>,
}

impl ComplexityReport {
    pub fn new(cfg: &ModelConfig, out_w: usize, out_h: usize) -> Result<Self> {
        let p = count_parameters(cfg);
        Ok(ComplexityReport {
            parameters: p.total(),
            precursor_parameters: p.precursor,
            successor_parameters: p.successor,
            flops: count_flops(cfg, out_h, out_w)?,
            flops_resolution: (out_w, out_h),
            ms_per_frame: None,
        })
    }

    pub fn fps(&self) -> Option<f64> {
        self.ms_per_frame.map(fps)
    }
}
