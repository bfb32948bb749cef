//! Dense rank-4 NCHW tensors.

mod dump;

pub use dump::{decode_tensor, decode_tensors, encode_tensor, DUMP_MAGIC};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Axis, Error, Result};
use crate::scalar::Scalar;

/// `(batch, channels, height, width)`.
pub type Shape = [usize; 4];

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<Scalar>,
}

impl core::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        const SHOWN: usize = 8;
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("head", &&self.data[..self.data.len().min(SHOWN)])
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<Scalar>) -> Result<Self> {
        let n = numel(shape);
        if data.len() != n {
            return Err(Error::dim("Tensor::new", Axis::Length, n, data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Shape, value: Scalar) -> Self {
        Tensor {
            shape,
            data: vec![value; numel(shape)],
        }
    }

    pub fn scalar(value: Scalar) -> Self {
        Tensor {
            shape: [1, 1, 1, 1],
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f(b, c, y, x)` in memory order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> Scalar) -> Self {
        let [nb, nc, nh, nw] = shape;
        let mut data = Vec::with_capacity(numel(shape));
        for b in 0..nb {
            for c in 0..nc {
                for y in 0..nh {
                    for x in 0..nw {
                        data.push(f(b, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape[2]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Scalar] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Scalar> {
        self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, nc, nh, nw] = self.shape;
        ((b * nc + c) * nh + y) * nw + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> Scalar {
        self.data[self.offset(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: Scalar) {
        let i = self.offset(b, c, y, x);
        self.data[i] = v;
    }

    /// The `h*w` plane of lane `b`, channel `c`.
    pub fn plane(&self, b: usize, c: usize) -> &[Scalar] {
        let hw = self.shape[2] * self.shape[3];
        let start = (b * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    /// Reinterprets the data under a new shape of the same size.
    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        let n = numel(shape);
        if n != self.data.len() {
            return Err(Error::dim("reshape", Axis::Length, self.data.len(), n));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(Scalar) -> Scalar) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(Scalar, Scalar) -> Scalar,
    ) -> Result<Tensor> {
        same_shape(op, self, other)?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, k: Scalar) -> Tensor {
        self.map(|v| v * k)
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Tensor) -> Result<()> {
        same_shape("accumulate", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Sequential left-to-right sum.
    pub fn sum(&self) -> Scalar {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> Scalar {
        self.sum() / self.data.len() as Scalar
    }

    pub fn max_abs(&self) -> Scalar {
        self.data.iter().fold(0.0, |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> Scalar {
        crate::scalar::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_channels", "no inputs"))?;
        let [nb, _, nh, nw] = first.shape;
        for p in parts {
            check_axis("concat_channels", Axis::Batch, nb, p.shape[0])?;
            check_axis("concat_channels", Axis::Height, nh, p.shape[2])?;
            check_axis("concat_channels", Axis::Width, nw, p.shape[3])?;
        }
        let nc: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(nb * nc * nh * nw);
        for b in 0..nb {
            for p in parts {
                let lane = p.shape[1] * nh * nw;
                data.extend_from_slice(&p.data[b * lane..(b + 1) * lane]);
            }
        }
        Ok(Tensor {
            shape: [nb, nc, nh, nw],
            data,
        })
    }

    /// Channels `[start, start + count)`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        let [nb, nc, nh, nw] = self.shape;
        if start + count > nc {
            return Err(Error::dim("slice_channels", Axis::Channel, nc, start + count));
        }
        let hw = nh * nw;
        let mut data = Vec::with_capacity(nb * count * hw);
        for b in 0..nb {
            let base = (b * nc + start) * hw;
            data.extend_from_slice(&self.data[base..base + count * hw]);
        }
        Ok(Tensor {
            shape: [nb, count, nh, nw],
            data,
        })
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack_batch(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("stack_batch", "no inputs"))?;
        let [_, nc, nh, nw] = first.shape;
        let mut nb = 0;
        let mut data = Vec::new();
        for p in parts {
            check_axis("stack_batch", Axis::Channel, nc, p.shape[1])?;
            check_axis("stack_batch", Axis::Height, nh, p.shape[2])?;
            check_axis("stack_batch", Axis::Width, nw, p.shape[3])?;
            nb += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: [nb, nc, nh, nw],
            data,
        })
    }

    /// Lane `b` as a batch-1 tensor.
    pub fn lane(&self, b: usize) -> Tensor {
        let [_, nc, nh, nw] = self.shape;
        let n = nc * nh * nw;
        Tensor {
            shape: [1, nc, nh, nw],
            data: self.data[b * n..(b + 1) * n].to_vec(),
        }
    }

    /// Spatial window `[y0, y0+h) x [x0, x0+w)` of every plane.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Tensor> {
        let [nb, nc, nh, nw] = self.shape;
        if y0 + h > nh {
            return Err(Error::dim("crop", Axis::Height, nh, y0 + h));
        }
        if x0 + w > nw {
            return Err(Error::dim("crop", Axis::Width, nw, x0 + w));
        }
        Ok(Tensor::from_fn([nb, nc, h, w], |b, c, y, x| {
            self.at(b, c, y0 + y, x0 + x)
        }))
    }

    pub fn flip_horizontal(&self) -> Tensor {
        let w = self.shape[3];
        Tensor::from_fn(self.shape, |b, c, y, x| self.at(b, c, y, w - 1 - x))
    }

    pub fn clamp(&self, lo: Scalar, hi: Scalar) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }
}

#[inline]
pub(crate) fn numel(shape: Shape) -> usize {
    shape.iter().product()
}

pub(crate) fn check_axis(op: &'static str, axis: Axis, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dim(op, axis, expected, actual))
    }
}

pub(crate) fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    const AXES: [Axis; 4] = [Axis::Batch, Axis::Channel, Axis::Height, Axis::Width];
    for (i, axis) in AXES.iter().enumerate() {
        check_axis(op, *axis, a.shape[i], b.shape[i])?;
    }
    Ok(())
}
