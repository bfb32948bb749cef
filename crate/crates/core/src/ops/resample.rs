//! Separable linear resampling: Gaussian blur, decimation and bicubic
//! upsampling. All three are linear maps applied along rows and columns, so
//! one representation with an exact adjoint covers forward and backward.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::{ceil, exp, floor, Scalar};
use crate::tensor::Tensor;

/// Keys cubic convolution parameter.
pub const BICUBIC_A: Scalar = -0.5;

/// Keys cubic convolution kernel.
pub fn keys_cubic(x: Scalar, a: Scalar) -> Scalar {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Truncated, renormalised Gaussian of `2 * radius + 1` taps.
pub fn gaussian_kernel(sigma: Scalar, radius: usize) -> Vec<Scalar> {
    let r = radius as isize;
    let mut k: Vec<Scalar> = (-r..=r)
        .map(|d| exp(-((d * d) as Scalar) / (2.0 * sigma * sigma)))
        .collect();
    let z: Scalar = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= z);
    k
}

/// Default truncation radius, `ceil(3 sigma)`.
pub fn default_radius(sigma: Scalar) -> usize {
    ceil(3.0 * sigma) as usize
}

/// Half-sample symmetric reflection (`-1 -> 0`, `n -> n - 1`), folded as many
/// times as needed.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// A sparse linear map from `in_len` samples to `taps.len()` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Resample1d {
    in_len: usize,
    taps: Vec<Vec<(usize, Scalar)>>,
}

impl Resample1d {
    pub fn identity(len: usize) -> Self {
        Resample1d {
            in_len: len,
            taps: (0..len).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn gaussian(len: usize, sigma: Scalar, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("gaussian_blur", "sigma must be positive"));
        }
        if len == 0 {
            return Err(Error::invalid("gaussian_blur", "empty axis"));
        }
        let k = gaussian_kernel(sigma, radius);
        let r = radius as isize;
        let taps = (0..len as isize)
            .map(|i| {
                (-r..=r)
                    .zip(&k)
                    .map(|(d, &w)| (reflect(i + d, len), w))
                    .collect()
            })
            .collect();
        Ok(Resample1d { in_len: len, taps })
    }

    pub fn decimate(len: usize, factor: usize) -> Result<Self> {
        if factor == 0 || len % factor != 0 {
            return Err(Error::invalid(
                "downsample",
                alloc::format!("length {len} not divisible by factor {factor}"),
            ));
        }
        Ok(Resample1d {
            in_len: len,
            taps: (0..len / factor).map(|i| vec![(i * factor, 1.0)]).collect(),
        })
    }

    /// Keys bicubic upsampling by an integer factor with edge replication.
    /// Output sample `i` reads source position `i / factor`, so input sample
    /// `k` lands on output `k * factor`, the pixel [`Resample1d::decimate`]
    /// keeps.
    pub fn bicubic(len: usize, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("bicubic_upsample", "factor must be >= 1"));
        }
        if len == 0 {
            return Err(Error::invalid("bicubic_upsample", "empty axis"));
        }
        let f = factor as Scalar;
        let taps = (0..len * factor)
            .map(|i| {
                let src = i as Scalar / f;
                let base = floor(src);
                let t = src - base;
                (-1..=2)
                    .map(|m| {
                        let j = (base as isize + m).clamp(0, len as isize - 1) as usize;
                        (j, keys_cubic(t - m as Scalar, BICUBIC_A))
                    })
                    .filter(|&(_, w)| w != 0.0)
                    .collect()
            })
            .collect();
        Ok(Resample1d { in_len: len, taps })
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self, i: usize) -> &[(usize, Scalar)] {
        &self.taps[i]
    }
}

/// `Y = R X C^T` on every `H x W` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableMap {
    pub rows: Resample1d,
    pub cols: Resample1d,
}

impl SeparableMap {
    fn check(&self, x: &Tensor, op: &'static str) -> Result<()> {
        let [_, _, h, w] = x.shape();
        if h != self.rows.in_len || w != self.cols.in_len {
            return Err(Error::invalid(
                op,
                alloc::format!("map expects {}x{}, got {h}x{w}", self.rows.in_len, self.cols.in_len),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x, "resample")?;
        let [nb, nc, h, _] = x.shape();
        let (oh, ow) = (self.rows.out_len(), self.cols.out_len());
        let mut out = Vec::with_capacity(nb * nc * oh * ow);
        let mut tmp = vec![0.0; h * ow];
        for b in 0..nb {
            for c in 0..nc {
                let plane = x.plane(b, c);
                let w = self.cols.in_len;
                for y in 0..h {
                    let row = &plane[y * w..(y + 1) * w];
                    for (ox, taps) in self.cols.taps.iter().enumerate() {
                        tmp[y * ow + ox] = taps.iter().map(|&(i, k)| k * row[i]).sum();
                    }
                }
                for taps in &self.rows.taps {
                    for ox in 0..ow {
                        out.push(taps.iter().map(|&(i, k)| k * tmp[i * ow + ox]).sum());
                    }
                }
            }
        }
        Tensor::new([nb, nc, oh, ow], out)
    }

    /// `X = R^T Y C`.
    pub fn adjoint(&self, g: &Tensor) -> Result<Tensor> {
        let [nb, nc, oh, ow] = g.shape();
        if oh != self.rows.out_len() || ow != self.cols.out_len() {
            return Err(Error::invalid("resample adjoint", "gradient shape mismatch"));
        }
        let (h, w) = (self.rows.in_len, self.cols.in_len);
        let mut out = Tensor::zeros([nb, nc, h, w]);
        let mut tmp = vec![0.0; h * ow];
        for b in 0..nb {
            for c in 0..nc {
                tmp.fill(0.0);
                let gp = g.plane(b, c);
                for (oy, taps) in self.rows.taps.iter().enumerate() {
                    for &(iy, k) in taps {
                        for ox in 0..ow {
                            tmp[iy * ow + ox] += k * gp[oy * ow + ox];
                        }
                    }
                }
                let base = out.offset(b, c, 0, 0);
                let dst = &mut out.data_mut()[base..base + h * w];
                for y in 0..h {
                    for (ox, taps) in self.cols.taps.iter().enumerate() {
                        let v = tmp[y * ow + ox];
                        for &(ix, k) in taps {
                            dst[y * w + ix] += k * v;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn record(self, x: &Var, op: &'static str) -> Result<Var> {
        let value = self.apply(x.value())?;
        Ok(Var::from_op(
            op,
            value,
            vec![x.clone()],
            Box::new(move |g, _| Ok(vec![Some(self.adjoint(g)?)])),
        ))
    }
}

fn blur_map(x: &Tensor, sigma: Scalar, radius: Option<usize>) -> Result<SeparableMap> {
    let radius = radius.unwrap_or_else(|| default_radius(sigma));
    Ok(SeparableMap {
        rows: Resample1d::gaussian(x.height(), sigma, radius)?,
        cols: Resample1d::gaussian(x.width(), sigma, radius)?,
    })
}

fn decimate_map(x: &Tensor, factor: usize) -> Result<SeparableMap> {
    Ok(SeparableMap {
        rows: Resample1d::decimate(x.height(), factor)?,
        cols: Resample1d::decimate(x.width(), factor)?,
    })
}

fn bicubic_map(x: &Tensor, factor: usize) -> Result<SeparableMap> {
    Ok(SeparableMap {
        rows: Resample1d::bicubic(x.height(), factor)?,
        cols: Resample1d::bicubic(x.width(), factor)?,
    })
}

/// Separable Gaussian blur with symmetric borders. `radius` defaults to
/// `ceil(3 sigma)`.
pub fn gaussian_blur_tensor(x: &Tensor, sigma: Scalar, radius: Option<usize>) -> Result<Tensor> {
    blur_map(x, sigma, radius)?.apply(x)
}

pub fn gaussian_blur(x: &Var, sigma: Scalar, radius: Option<usize>) -> Result<Var> {
    blur_map(x.value(), sigma, radius)?.record(x, "gaussian_blur")
}

/// Keeps every `factor`-th pixel starting at offset 0.
pub fn downsample_tensor(x: &Tensor, factor: usize) -> Result<Tensor> {
    decimate_map(x, factor)?.apply(x)
}

pub fn downsample(x: &Var, factor: usize) -> Result<Var> {
    decimate_map(x.value(), factor)?.record(x, "downsample")
}

pub fn bicubic_upsample_tensor(x: &Tensor, factor: usize) -> Result<Tensor> {
    bicubic_map(x, factor)?.apply(x)
}

pub fn bicubic_upsample(x: &Var, factor: usize) -> Result<Var> {
    bicubic_map(x.value(), factor)?.record(x, "bicubic_upsample")
}
