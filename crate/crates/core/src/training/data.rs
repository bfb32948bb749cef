//! Degradation and desk-scale training data.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ops::{downsample_tensor, gaussian_blur_tensor};
use crate::scalar::Scalar;
use crate::scheduler::{PaddingMode, VideoSequence};
use crate::tensor::Tensor;

/// Blur applied to HR frames before decimation.
pub const DEGRADE_SIGMA: Scalar = 1.6;

/// Gaussian blur (sigma 1.6) followed by keeping every `scale`-th pixel.
pub fn degrade_frame(hr: &Tensor, scale: usize) -> Result<Tensor> {
    if scale == 0 || hr.height() % scale != 0 || hr.width() % scale != 0 {
        return Err(Error::invalid(
            "degrade",
            format!("{}x{} frame is not divisible by {scale}", hr.height(), hr.width()),
        ));
    }
    downsample_tensor(&gaussian_blur_tensor(hr, DEGRADE_SIGMA, None)?, scale)
}

/// Degrades every frame and pairs the result with the HR clip.
pub fn degrade(hr: Vec<Tensor>, scale: usize) -> Result<VideoSequence> {
    let lr = hr.iter().map(|f| degrade_frame(f, scale)).collect::<Result<Vec<_>>>()?;
    VideoSequence::new(lr, scale)?.with_hr(hr)
}

#[derive(Debug, Clone, PartialEq)]
struct Grating {
    /// Cycles per pixel.
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
struct Disc {
    cx: f64,
    cy: f64,
    radius: f64,
    /// Width of the soft edge in pixels.
    edge: f64,
    amp: [f64; 3],
}

/// An analytic texture moving with one global velocity, so frame `t` is
/// frame 0 translated by `t * velocity`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    base: [f64; 3],
    gratings: Vec<Grating>,
    discs: Vec<Disc>,
    velocity: (f64, f64),
}

impl SynthScene {
    /// Random scene covering roughly `extent x extent` pixels.
    pub fn random(seed: u64, extent: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let colour = |rng: &mut ChaCha8Rng, s: f64| -> [f64; 3] {
            let g: f64 = rng.gen_range(-s..s);
            [
                g + rng.gen_range(-0.3 * s..0.3 * s),
                g + rng.gen_range(-0.3 * s..0.3 * s),
                g + rng.gen_range(-0.3 * s..0.3 * s),
            ]
        };
        let base = [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)];
        // Two gratings below the LR Nyquist rate and a weaker one above it,
        // which single frames alias.
        let gratings = [(0.01, 0.08, 0.15), (0.01, 0.08, 0.15), (0.1, 0.2, 0.06)]
            .into_iter()
            .map(|(lo, hi, amp)| {
                let f: f64 = rng.gen_range(lo..hi);
                let theta: f64 = rng.gen_range(0.0..PI);
                Grating {
                    fx: f * libm::cos(theta),
                    fy: f * libm::sin(theta),
                    phase: rng.gen_range(0.0..2.0 * PI),
                    amp: colour(&mut rng, amp),
                }
            })
            .collect();
        let span = extent as f64;
        let discs = (0..rng.gen_range(4..9))
            .map(|_| Disc {
                cx: rng.gen_range(-0.2 * span..1.2 * span),
                cy: rng.gen_range(-0.2 * span..1.2 * span),
                radius: rng.gen_range(0.04 * span..0.2 * span),
                edge: rng.gen_range(0.3..1.0),
                amp: colour(&mut rng, 0.4),
            })
            .collect();
        let speed: f64 = rng.gen_range(0.25..2.0);
        let dir: f64 = rng.gen_range(0.0..2.0 * PI);
        SynthScene {
            base,
            gratings,
            discs,
            velocity: (speed * libm::cos(dir), speed * libm::sin(dir)),
        }
    }

    pub fn with_velocity(mut self, vx: f64, vy: f64) -> Self {
        self.velocity = (vx, vy);
        self
    }

    /// Pixels per frame, `(x, y)`.
    pub fn velocity(&self) -> (f64, f64) {
        self.velocity
    }

    /// Unclamped value of channel `c` at scene position `(x, y)`.
    pub fn sample(&self, c: usize, x: f64, y: f64) -> f64 {
        let mut v = self.base[c];
        for g in &self.gratings {
            v += g.amp[c] * libm::sin(2.0 * PI * (g.fx * x + g.fy * y) + g.phase);
        }
        for d in &self.discs {
            let r = libm::sqrt((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy));
            v += d.amp[c] * 0.5 * (1.0 - libm::tanh((r - d.radius) / d.edge));
        }
        v
    }

    /// Frame `t` cropped to `h x w` at `(y0, x0)`, clamped to `[0, 1]`.
    pub fn render(&self, t: usize, y0: usize, x0: usize, h: usize, w: usize) -> Tensor {
        let (vx, vy) = self.velocity;
        let (dx, dy) = (vx * t as f64, vy * t as f64);
        Tensor::from_fn([1, 3, h, w], |_, c, y, x| {
            let v = self.sample(c, (x0 + x) as f64 - dx, (y0 + y) as f64 - dy);
            v.clamp(0.0, 1.0) as Scalar
        })
    }
}

/// A reproducible `len`-frame HR clip of `h x w` frames in `[0, 1]`.
pub fn synth_clip(seed: u64, len: usize, h: usize, w: usize) -> Result<Vec<Tensor>> {
    if len == 0 || h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(Error::invalid(
            "synth_clip",
            format!("need len >= 1 and sides divisible by 4, got {len} x {h}x{w}"),
        ));
    }
    let scene = SynthScene::random(seed, h.max(w));
    Ok((0..len).map(|t| scene.render(t, 0, 0, h, w)).collect())
}

/// Where training clips come from.
#[derive(Debug, Clone)]
pub enum ClipSource {
    /// Fresh random scenes, cropped from a `canvas x canvas` HR area.
    Synthetic { canvas: usize },
    /// HR clips of `(1, 3, H, W)` frames.
    Clips(Vec<Vec<Tensor>>),
}

/// Shape of a training batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub batch: usize,
    /// LR crop side.
    pub lr_patch: usize,
    /// Frames that receive a loss.
    pub frames: usize,
    /// Add one real frame at each end that only feeds its neighbours.
    pub context: bool,
    pub scale: usize,
}

impl BatchSpec {
    fn total_frames(&self) -> usize {
        self.frames + if self.context { 2 } else { 0 }
    }
}

/// Samples `batch` clips, each with one uniform random crop shared by all of
/// its frames, and degrades them.
pub fn sample_batch(source: &ClipSource, spec: &BatchSpec, rng: &mut ChaCha8Rng) -> Result<VideoSequence> {
    let len = spec.total_frames();
    let side = spec.lr_patch * spec.scale;
    if spec.batch == 0 || spec.frames == 0 || side == 0 {
        return Err(Error::invalid("sample_batch", "batch, frames and patch must be positive"));
    }
    let mut lanes: Vec<Vec<Tensor>> = Vec::with_capacity(spec.batch);
    for _ in 0..spec.batch {
        let clip = match source {
            ClipSource::Synthetic { canvas } => {
                let canvas = (*canvas).max(side);
                let scene = SynthScene::random(rng.next_u64(), canvas);
                let y0 = rng.gen_range(0..=canvas - side);
                let x0 = rng.gen_range(0..=canvas - side);
                (0..len).map(|t| scene.render(t, y0, x0, side, side)).collect()
            }
            ClipSource::Clips(clips) => {
                let usable: Vec<&Vec<Tensor>> = clips
                    .iter()
                    .filter(|c| c.len() >= len && c[0].height() >= side && c[0].width() >= side)
                    .collect();
                if usable.is_empty() {
                    return Err(Error::invalid(
                        "sample_batch",
                        format!("no clip has {len} frames of at least {side}x{side}"),
                    ));
                }
                let clip = usable[rng.gen_range(0..usable.len())];
                let start = rng.gen_range(0..=clip.len() - len);
                let y0 = rng.gen_range(0..=clip[0].height() - side);
                let x0 = rng.gen_range(0..=clip[0].width() - side);
                clip[start..start + len]
                    .iter()
                    .map(|f| f.crop(y0, x0, side, side))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        lanes.push(clip);
    }
    let hr = (0..len)
        .map(|t| {
            let frames: Vec<Tensor> = lanes.iter().map(|l| l[t].clone()).collect();
            Tensor::stack_batch(&frames)
        })
        .collect::<Result<Vec<_>>>()?;
    let seq = degrade(hr, spec.scale)?;
    if spec.context {
        seq.with_padding(PaddingMode::Context)
    } else {
        Ok(seq)
    }
}

/// Held-out synthetic clips, named `synth-00`, `synth-01`, ...
pub fn synthetic_eval_set(
    seed: u64,
    count: usize,
    len: usize,
    lr_size: usize,
    scale: usize,
) -> Result<Vec<(alloc::string::String, VideoSequence)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let hr = synth_clip(rng.next_u64(), len, lr_size * scale, lr_size * scale)?;
            Ok((format!("synth-{i:02}"), degrade(hr, scale)?))
        })
        .collect()
}
