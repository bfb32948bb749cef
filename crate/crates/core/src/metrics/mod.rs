//! Evaluation metrics and complexity accounting.
//!
//! PSNR and SSIM are computed on the BT.601 studio-swing luminance of
//! `[0, 1]` RGB frames, on the 255 scale, after removing a border and
//! skipping frames at both ends of a sequence. All arithmetic here is `f64`
//! regardless of the tensor scalar type.

mod complexity;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use complexity::{count_flops, fps, median, param_pixel_estimate, ComplexityReport};

use crate::autograd::Var;
use crate::error::{Axis, Error, Result};
use crate::generator::Model;
use crate::ops;
use crate::scheduler::{run_model, VideoSequence};
use crate::tensor::Tensor;

/// Peak value of the 8-bit luminance range.
pub const PEAK: f64 = 255.0;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_RADIUS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalProtocol {
    /// Frames dropped at each end of a sequence.
    pub skip_frames: usize,
    /// Pixels removed from every border of a frame.
    pub border_crop: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            skip_frames: 2,
            border_crop: 8,
        }
    }
}

impl EvalProtocol {
    /// No cropping and no skipped frames.
    pub fn full_frame() -> Self {
        EvalProtocol {
            skip_frames: 0,
            border_crop: 0,
        }
    }
}

/// `Y = 65.481 R + 128.553 G + 24.966 B + 16` per pixel, `(B, 1, H, W)`.
pub fn to_luminance(rgb: &Tensor) -> Result<Tensor> {
    if rgb.channels() != 3 {
        return Err(Error::dim("to_luminance", Axis::Channel, 3, rgb.channels()));
    }
    let [b, _, h, w] = rgb.shape();
    Ok(Tensor::from_fn([b, 1, h, w], |n, _, y, x| {
        let r = rgb.at(n, 0, y, x) as f64;
        let g = rgb.at(n, 1, y, x) as f64;
        let bl = rgb.at(n, 2, y, x) as f64;
        (65.481 * r + 128.553 * g + 24.966 * bl + 16.0) as _
    }))
}

/// Cropped luminance planes as `f64`, one `Vec` per batch lane.
fn prepared(a: &Tensor, crop: usize) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let y = to_luminance(a)?;
    let [b, _, h, w] = y.shape();
    if h <= 2 * crop || w <= 2 * crop {
        return Err(Error::invalid(
            "metric",
            format!("{h}x{w} frame is empty after a {crop} px border crop"),
        ));
    }
    let (ch, cw) = (h - 2 * crop, w - 2 * crop);
    let planes = (0..b)
        .map(|n| {
            let p = y.plane(n, 0);
            (crop..h - crop)
                .flat_map(|r| p[r * w + crop..r * w + w - crop].iter().map(|&v| v as f64))
                .collect()
        })
        .collect();
    Ok((planes, ch, cw))
}

fn check_pair(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(
            op,
            format!("shape {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// PSNR in dB over all lanes of a frame; `f64::INFINITY` when identical.
pub fn psnr(a: &Tensor, b: &Tensor, protocol: &EvalProtocol) -> Result<f64> {
    check_pair("psnr", a, b)?;
    let (pa, _, _) = prepared(a, protocol.border_crop)?;
    let (pb, _, _) = prepared(b, protocol.border_crop)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in pa.iter().zip(&pb) {
        for (u, v) in x.iter().zip(y) {
            sum += (u - v) * (u - v);
        }
        count += x.len();
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(PEAK * PEAK / mse))
}

fn ssim_window() -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|d| libm::exp(-((d * d) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)))
        .collect();
    let z: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= z);
    k
}

/// Separable valid-mode filtering of an `h x w` plane.
fn filter_valid(p: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = Vec::with_capacity(h * ow);
    for y in 0..h {
        let line = &p[y * w..(y + 1) * w];
        for x in 0..ow {
            rows.push(k.iter().zip(&line[x..x + n]).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            out.push((0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum::<f64>());
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over the positions
/// where the window fits, averaged over lanes.
pub fn ssim(a: &Tensor, b: &Tensor, protocol: &EvalProtocol) -> Result<f64> {
    check_pair("ssim", a, b)?;
    let (pa, h, w) = prepared(a, protocol.border_crop)?;
    let (pb, _, _) = prepared(b, protocol.border_crop)?;
    let win = ssim_window();
    if h < win.len() || w < win.len() {
        return Err(Error::invalid(
            "ssim",
            format!("{h}x{w} region is smaller than the {0}x{0} window", win.len()),
        ));
    }
    let c1 = (K1 * PEAK) * (K1 * PEAK);
    let c2 = (K2 * PEAK) * (K2 * PEAK);
    let mut total = 0.0;
    for (x, y) in pa.iter().zip(&pb) {
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(u, v)| u * v).collect();
        let mx = filter_valid(x, h, w, &win);
        let my = filter_valid(y, h, w, &win);
        let sxx = filter_valid(&xx, h, w, &win);
        let syy = filter_valid(&yy, h, w, &win);
        let sxy = filter_valid(&xy, h, w, &win);
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / pa.len() as f64)
}

/// Scores of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub name: String,
    /// Mean of per-frame PSNR.
    pub psnr: f64,
    pub ssim: f64,
    pub frames: usize,
}

/// Per-frame PSNR and SSIM averaged over the frames the protocol keeps.
pub fn score_sequence(name: &str, sr: &[Tensor], hr: &[Tensor], protocol: &EvalProtocol) -> Result<SequenceScore> {
    if sr.len() != hr.len() {
        return Err(Error::invalid(
            "score_sequence",
            format!("{} SR frames vs {} HR frames", sr.len(), hr.len()),
        ));
    }
    let skip = protocol.skip_frames;
    if sr.len() <= 2 * skip {
        return Err(Error::invalid(
            "score_sequence",
            format!("{} frames leave nothing after skipping {skip} at each end", sr.len()),
        ));
    }
    let kept = skip..sr.len() - skip;
    let n = kept.len();
    let mut p = 0.0;
    let mut s = 0.0;
    for t in kept {
        p += psnr(&sr[t], &hr[t], protocol)?;
        s += ssim(&sr[t], &hr[t], protocol)?;
    }
    Ok(SequenceScore {
        name: name.into(),
        psnr: p / n as f64,
        ssim: s / n as f64,
        frames: n,
    })
}

/// Runs `model` over `seq` and clamps the output to `[0, 1]`.
pub fn super_resolve(model: &Model<Var>, seq: &VideoSequence) -> Result<Vec<Tensor>> {
    let run = run_model(seq, model)?;
    Ok(run.sr.iter().map(|v| v.value().clamp(0.0, 1.0)).collect())
}

fn targets(seq: &VideoSequence) -> Result<&[Tensor]> {
    seq.targets()
        .ok_or_else(|| Error::invalid("evaluate", "sequence has no HR frames"))
}

/// Scores a model on named sequences that carry HR frames.
pub fn evaluate_model(
    model: &Model<Var>,
    sequences: &[(String, VideoSequence)],
    protocol: &EvalProtocol,
) -> Result<Vec<SequenceScore>> {
    sequences
        .iter()
        .map(|(name, seq)| score_sequence(name, &super_resolve(model, seq)?, targets(seq)?, protocol))
        .collect()
}

/// Scores plain bicubic upsampling on the same sequences.
pub fn evaluate_bicubic(sequences: &[(String, VideoSequence)], protocol: &EvalProtocol) -> Result<Vec<SequenceScore>> {
    sequences
        .iter()
        .map(|(name, seq)| {
            let sr = seq.frames()[seq.outputs()]
                .iter()
                .map(|f| Ok(ops::bicubic_upsample_tensor(f, seq.scale())?.clamp(0.0, 1.0)))
                .collect::<Result<Vec<_>>>()?;
            score_sequence(name, &sr, targets(seq)?, protocol)
        })
        .collect()
}

/// Per-sequence scores with aggregates and complexity columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub sequences: Vec<SequenceScore>,
    pub complexity: Option<ComplexityReport>,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        mean(self.sequences.iter().map(|s| s.psnr))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.sequences.iter().map(|s| s.ssim))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// `"inf"` for infinite values, fixed decimals otherwise.
pub fn format_db(v: f64, decimals: usize) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v:.decimals$}")
    }
}
