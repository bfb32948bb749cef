//! Stride-1 2-D cross-correlation over NCHW tensors.
//!
//! Lanes are lowered with im2col in row tiles and multiplied with GEMM.
//! Weight and bias gradients are first formed per lane and then summed in
//! lane order, so the result is identical whether lanes run serially or on a
//! thread pool.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::for_lanes;
use crate::autograd::Var;
use crate::error::{Axis, Error, Result};
use crate::scalar::{gemm, Scalar};
use crate::tensor::{check_axis, Tensor};

/// Upper bound on im2col tile elements.
const TILE_ELEMS: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding of `k / 2`; output keeps the input size.
    Same,
    /// No padding; output shrinks by `k - 1`.
    Valid,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cin: usize,
    cout: usize,
    k: usize,
    pad: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new(x: &Tensor, weight: &Tensor, bias: &Tensor, padding: Padding) -> Result<Self> {
        let [_, cin, h, w] = x.shape();
        let [cout, fin, kh, kw] = weight.shape();
        check_axis("conv2d", Axis::Kernel, kh, kw)?;
        if kh % 2 == 0 {
            return Err(Error::invalid("conv2d", "kernel size must be odd"));
        }
        check_axis("conv2d", Axis::Channel, fin, cin)?;
        if bias.shape() != [1, cout, 1, 1] {
            return Err(Error::dim("conv2d bias", Axis::Channel, cout, bias.len()));
        }
        let k = kh;
        let (pad, oh, ow) = match padding {
            Padding::Same => (k / 2, h, w),
            Padding::Valid => {
                if h < k {
                    return Err(Error::dim("conv2d", Axis::Height, k, h));
                }
                if w < k {
                    return Err(Error::dim("conv2d", Axis::Width, k, w));
                }
                (0, h - k + 1, w - k + 1)
            }
        };
        Ok(Geometry {
            cin,
            cout,
            k,
            pad,
            h,
            w,
            oh,
            ow,
        })
    }

    fn ckk(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn rows_per_tile(&self) -> usize {
        (TILE_ELEMS / (self.ckk() * self.ow).max(1)).clamp(1, self.oh.max(1))
    }

    /// Output row tiles `[r0, r1)`.
    fn tiles(&self) -> impl Iterator<Item = (usize, usize)> {
        let step = self.rows_per_tile();
        let oh = self.oh;
        (0..oh).step_by(step).map(move |r0| (r0, (r0 + step).min(oh)))
    }

    fn im2col(&self, x: &[Scalar], r0: usize, r1: usize, col: &mut [Scalar]) {
        let n = (r1 - r0) * self.ow;
        let k = self.k;
        for ci in 0..self.cin {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((ci * k + ky) * k + kx) * n..][..n];
                    for (ti, oy) in (r0..r1).enumerate() {
                        let dst = &mut row[ti * self.ow..(ti + 1) * self.ow];
                        let iy = oy as isize + ky as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = ox as isize + kx as isize - self.pad as isize;
                            *d = if ix < 0 || ix >= self.w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, col: &[Scalar], r0: usize, r1: usize, dx: &mut [Scalar]) {
        let n = (r1 - r0) * self.ow;
        let k = self.k;
        for ci in 0..self.cin {
            let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((ci * k + ky) * k + kx) * n..][..n];
                    for (ti, oy) in (r0..r1).enumerate() {
                        let iy = oy as isize + ky as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, &g) in row[ti * self.ow..(ti + 1) * self.ow].iter().enumerate() {
                            let ix = ox as isize + kx as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward(x: &Tensor, weight: &Tensor, bias: &Tensor, padding: Padding) -> Result<Tensor> {
    let g = Geometry::new(x, weight, bias, padding)?;
    let nb = x.batch();
    let in_lane = g.cin * g.h * g.w;
    let out_hw = g.oh * g.ow;
    let lanes = for_lanes(nb, |b| {
        let xl = &x.data()[b * in_lane..(b + 1) * in_lane];
        let mut out = vec![0.0; g.cout * out_hw];
        let mut col = Vec::new();
        for (r0, r1) in g.tiles() {
            let n = (r1 - r0) * g.ow;
            col.resize(g.ckk() * n, 0.0);
            g.im2col(xl, r0, r1, &mut col);
            gemm(
                g.cout,
                g.ckk(),
                n,
                weight.data(),
                g.ckk(),
                1,
                &col,
                n,
                1,
                0.0,
                &mut out[r0 * g.ow..],
                out_hw,
                1,
            );
        }
        for (co, plane) in out.chunks_exact_mut(out_hw).enumerate() {
            let bv = bias.data()[co];
            plane.iter_mut().for_each(|v| *v += bv);
        }
        out
    });
    let data: Vec<Scalar> = lanes.into_iter().flatten().collect();
    Tensor::new([nb, g.cout, g.oh, g.ow], data)
}

/// Gradients with respect to input, weight and bias; each is computed only
/// if requested.
pub fn conv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
    padding: Padding,
    want: [bool; 3],
) -> Result<[Option<Tensor>; 3]> {
    let g = Geometry::new(x, weight, bias, padding)?;
    let nb = x.batch();
    if grad_out.shape() != [nb, g.cout, g.oh, g.ow] {
        return Err(Error::dim("conv2d backward", Axis::Length, nb * g.cout * g.oh * g.ow, grad_out.len()));
    }
    let [want_x, want_w, want_b] = want;
    let in_lane = g.cin * g.h * g.w;
    let out_hw = g.oh * g.ow;
    let ckk = g.ckk();
    let lanes = for_lanes(nb, |b| {
        let xl = &x.data()[b * in_lane..(b + 1) * in_lane];
        let gl = &grad_out.data()[b * g.cout * out_hw..(b + 1) * g.cout * out_hw];
        let mut dx = if want_x { vec![0.0; in_lane] } else { Vec::new() };
        let mut dw = if want_w { vec![0.0; g.cout * ckk] } else { Vec::new() };
        let mut col = Vec::new();
        let mut dcol = Vec::new();
        if want_x || want_w {
            for (r0, r1) in g.tiles() {
                let n = (r1 - r0) * g.ow;
                let gt = &gl[r0 * g.ow..];
                if want_w {
                    col.resize(ckk * n, 0.0);
                    g.im2col(xl, r0, r1, &mut col);
                    gemm(g.cout, n, ckk, gt, out_hw, 1, &col, 1, n, 1.0, &mut dw, ckk, 1);
                }
                if want_x {
                    dcol.resize(ckk * n, 0.0);
                    gemm(ckk, g.cout, n, weight.data(), 1, ckk, gt, out_hw, 1, 0.0, &mut dcol, n, 1);
                    g.col2im_add(&dcol, r0, r1, &mut dx);
                }
            }
        }
        let db: Vec<Scalar> = if want_b {
            gl.chunks_exact(out_hw).map(|p| p.iter().sum()).collect()
        } else {
            Vec::new()
        };
        (dx, dw, db)
    });

    let mut dx_all = Vec::with_capacity(if want_x { nb * in_lane } else { 0 });
    let mut dw_all = if want_w { vec![0.0; g.cout * ckk] } else { Vec::new() };
    let mut db_all = if want_b { vec![0.0; g.cout] } else { Vec::new() };
    for (dx, dw, db) in lanes {
        dx_all.extend_from_slice(&dx);
        dw_all.iter_mut().zip(&dw).for_each(|(a, v)| *a += v);
        db_all.iter_mut().zip(&db).for_each(|(a, v)| *a += v);
    }
    Ok([
        if want_x { Some(Tensor::new(x.shape(), dx_all)?) } else { None },
        if want_w { Some(Tensor::new(weight.shape(), dw_all)?) } else { None },
        if want_b { Some(Tensor::new(bias.shape(), db_all)?) } else { None },
    ])
}

/// `weight` is `(F_out, F_in, k, k)`, `bias` is `(1, F_out, 1, 1)`.
pub fn conv2d(x: &Var, weight: &Var, bias: &Var, padding: Padding) -> Result<Var> {
    let value = conv2d_forward(x.value(), weight.value(), bias.value(), padding)?;
    Ok(Var::from_op(
        "conv2d",
        value,
        vec![x.clone(), weight.clone(), bias.clone()],
        Box::new(move |g, p| {
            let want = [p[0].requires_grad(), p[1].requires_grad(), p[2].requires_grad()];
            let grads = conv2d_backward(p[0].value(), p[1].value(), p[2].value(), g, padding, want)?;
            Ok(grads.into_iter().collect())
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_counts_overlap() {
        let x = Tensor::full([1, 1, 3, 3], 1.0);
        let w = Tensor::full([1, 1, 3, 3], 1.0);
        let b = Tensor::zeros([1, 1, 1, 1]);
        let y = conv2d_forward(&x, &w, &b, Padding::Same).unwrap();
        assert_eq!(y.at(0, 0, 1, 1), 9.0);
        for (cy, cx) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_eq!(y.at(0, 0, cy, cx), 4.0);
        }
        assert_eq!(y.at(0, 0, 0, 1), 6.0);
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::from_fn([2, 1, 4, 5], |b, _, y, x| (b * 20 + y * 5 + x) as Scalar * 0.37 - 3.0);
        let w = Tensor::full([1, 1, 1, 1], 1.0);
        let b = Tensor::zeros([1, 1, 1, 1]);
        assert_eq!(conv2d_forward(&x, &w, &b, Padding::Same).unwrap(), x);
    }

    #[test]
    fn valid_padding_shrinks() {
        let x = Tensor::zeros([1, 2, 6, 7]);
        let w = Tensor::zeros([3, 2, 3, 3]);
        let b = Tensor::zeros([1, 3, 1, 1]);
        assert_eq!(conv2d_forward(&x, &w, &b, Padding::Valid).unwrap().shape(), [1, 3, 4, 5]);
    }

    #[test]
    fn channel_mismatch_names_axis() {
        let x = Tensor::zeros([1, 2, 4, 4]);
        let w = Tensor::zeros([1, 3, 3, 3]);
        let b = Tensor::zeros([1, 1, 1, 1]);
        let err = conv2d_forward(&x, &w, &b, Padding::Same).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension { op: "conv2d", axis: Axis::Channel, expected: 3, actual: 2 }
        );
        let w = Tensor::zeros([1, 2, 3, 1]);
        let err = conv2d_forward(&x, &w, &b, Padding::Same).unwrap_err();
        assert!(matches!(err, Error::Dimension { axis: Axis::Kernel, .. }));
    }

    #[test]
    fn tiling_matches_single_tile() {
        // Wide input forces several row tiles.
        let x = Tensor::from_fn([1, 8, 40, 400], |_, c, y, x| ((c * 7 + y * 13 + x * 3) % 17) as Scalar - 8.0);
        let w = Tensor::from_fn([2, 8, 3, 3], |o, i, y, x| ((o + i * 3 + y * 5 + x) % 7) as Scalar - 3.0);
        let b = Tensor::zeros([1, 2, 1, 1]);
        let g = Geometry::new(&x, &w, &b, Padding::Same).unwrap();
        assert!(g.rows_per_tile() < 40);
        let y = conv2d_forward(&x, &w, &b, Padding::Same).unwrap();
        // Spot-check against a direct sum at a tile boundary row.
        let r = g.rows_per_tile();
        for &(oy, ox) in &[(r - 1, 0), (r, 17), (r + 1, 399), (39, 200)] {
            let mut acc = 0.0;
            for i in 0..8 {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let iy = oy as isize + ky as isize - 1;
                        let ix = ox as isize + kx as isize - 1;
                        if iy >= 0 && iy < 40 && ix >= 0 && ix < 400 {
                            acc += w.at(1, i, ky, kx) * x.at(0, i, iy as usize, ix as usize);
                        }
                    }
                }
            }
            assert_eq!(y.at(0, 1, oy, ox), acc);
        }
    }
}
