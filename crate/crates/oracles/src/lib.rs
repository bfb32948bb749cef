//! Slow reference implementations written directly from their definitions.
//!
//! Everything here works on plain `f64` arrays in NCHW order and shares no
//! code with `ovsr-core`, so agreement between the two is evidence rather
//! than tautology.

/// Dense NCHW array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?}");
        Array { shape, data }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Array { shape, data }
    }

    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        let [_, ch, h, w] = self.shape;
        self.data[((b * ch + c) * h + y) * w + x]
    }

    /// Largest absolute elementwise difference; panics on a shape mismatch.
    pub fn max_diff(&self, other: &Array) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Cross-correlation with zero padding `k / 2` (`same`) or none.
pub fn conv2d(x: &Array, w: &Array, bias: &[f64], same: bool) -> Array {
    let [n, cin, h, wd] = x.shape;
    let [cout, _, k, _] = w.shape;
    let pad = if same { k / 2 } else { 0 };
    let (oh, ow) = (h + 2 * pad - k + 1, wd + 2 * pad - k + 1);
    Array::from_fn([n, cout, oh, ow], |b, o, y, xo| {
        let mut acc = bias[o];
        for c in 0..cin {
            for dy in 0..k {
                for dx in 0..k {
                    let sy = (y + dy) as isize - pad as isize;
                    let sx = (xo + dx) as isize - pad as isize;
                    if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < wd {
                        acc += w.at(o, c, dy, dx) * x.at(b, c, sy as usize, sx as usize);
                    }
                }
            }
        }
        acc
    })
}

/// Keys cubic convolution kernel with a = -0.5.
pub fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Upsampling by `f` with output pixel `i` sampled at source `i / f` and
/// replicated borders, summed over the full 4x4 neighbourhood.
pub fn bicubic(x: &Array, f: usize) -> Array {
    let [n, c, h, w] = x.shape;
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;
    Array::from_fn([n, c, h * f, w * f], |b, ch, y, xo| {
        let sy = y as f64 / f as f64;
        let sx = xo as f64 / f as f64;
        let (by, bx) = (sy.floor() as isize, sx.floor() as isize);
        let mut acc = 0.0;
        for m in -1..=2 {
            for l in -1..=2 {
                let wgt = keys(sy - (by + m) as f64) * keys(sx - (bx + l) as f64);
                acc += wgt * x.at(b, ch, clamp(by + m, h), clamp(bx + l, w));
            }
        }
        acc
    })
}

/// Normalised sampled Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / z).collect()
}

/// Mirror index by repeated folding: `-1 -> 0`, `n -> n - 1`.
pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Full 2D Gaussian sum with radius `ceil(3 sigma)` and mirrored borders.
pub fn blur(x: &Array, sigma: f64) -> Array {
    let radius = (3.0 * sigma).ceil() as usize;
    let taps = gaussian_taps(sigma, radius);
    let r = radius as isize;
    let [n, c, h, w] = x.shape;
    Array::from_fn([n, c, h, w], |b, ch, y, xo| {
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let wgt = taps[(dy + r) as usize] * taps[(dx + r) as usize];
                acc += wgt * x.at(b, ch, mirror(y as isize + dy, h), mirror(xo as isize + dx, w));
            }
        }
        acc
    })
}

/// ITU-R BT.601 luma on the [16, 235] scale from RGB in [0, 1].
pub fn luma(t: &Array, b: usize, y: usize, x: usize) -> f64 {
    65.481 * t.at(b, 0, y, x) + 128.553 * t.at(b, 1, y, x) + 24.966 * t.at(b, 2, y, x) + 16.0
}

/// Luma PSNR over all lanes after cropping `crop` pixels from every border.
pub fn psnr(a: &Array, b: &Array, crop: usize) -> f64 {
    let [n, _, h, w] = a.shape;
    let mut se = 0.0;
    let mut count = 0.0;
    for lane in 0..n {
        for y in crop..h - crop {
            for x in crop..w - crop {
                se += (luma(a, lane, y, x) - luma(b, lane, y, x)).powi(2);
                count += 1.0;
            }
        }
    }
    10.0 * (255.0f64 * 255.0 / (se / count)).log10()
}

/// Luma SSIM with an 11x11 Gaussian window (sigma 1.5) over every valid
/// window position, averaged per lane and then over lanes.
pub fn ssim(a: &Array, b: &Array) -> f64 {
    let [n, _, h, w] = a.shape;
    let win: Vec<f64> = (-5..=5).map(|d: i32| (-((d * d) as f64) / 4.5).exp()).collect();
    let z: f64 = win.iter().sum::<f64>().powi(2);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut lanes = 0.0;
    for lane in 0..n {
        let mut total = 0.0;
        let mut count = 0.0;
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let wgt = win[dy] * win[dx] / z;
                        let u = luma(a, lane, y0 + dy, x0 + dx);
                        let v = luma(b, lane, y0 + dy, x0 + dx);
                        mx += wgt * u;
                        my += wgt * v;
                        sxx += wgt * u * u;
                        syy += wgt * v * v;
                        sxy += wgt * u * v;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                total += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1.0;
            }
        }
        lanes += total / count;
    }
    lanes / n as f64
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every
/// element of every input.
pub fn central_differences(inputs: &[Vec<f64>], h: f64, mut f: impl FnMut(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut grad = vec![0.0; inputs[i].len()];
        for k in 0..inputs[i].len() {
            let x = inputs[i][k];
            work[i][k] = x + h;
            let plus = f(&work);
            work[i][k] = x - h;
            let minus = f(&work);
            work[i][k] = x;
            grad[k] = (plus - minus) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// `||a - b|| / max(||a||, ||b||, 1e-12)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(1e-12);
    diff / scale
}
