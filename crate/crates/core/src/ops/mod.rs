//! Differentiable operations on [`Var`].
//!
//! Each op computes its forward value from the input tensors and, when any
//! input requires a gradient, records a closure mapping the upstream gradient
//! to input gradients. The raw tensor kernels are public too so data
//! pipelines can run them without building a graph.

mod conv;
mod resample;
mod shuffle;

pub use conv::{conv2d, conv2d_backward, conv2d_forward, Padding};
pub use resample::{
    bicubic_upsample, bicubic_upsample_tensor, downsample, downsample_tensor, gaussian_blur,
    gaussian_blur_tensor, gaussian_kernel, keys_cubic, Resample1d, SeparableMap, BICUBIC_A,
};
pub use shuffle::{pixel_shuffle, pixel_shuffle_tensor, pixel_unshuffle, pixel_unshuffle_tensor};

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::{sqrt, Scalar};
use crate::tensor::{same_shape, Tensor};

/// Runs `f` for every batch lane, in parallel when the `parallel` feature is
/// on. Results come back in lane order.
pub(crate) fn for_lanes<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn add(a: &Var, b: &Var) -> Result<Var> {
    let value = a.value().add(b.value())?;
    Ok(Var::from_op(
        "add",
        value,
        vec![a.clone(), b.clone()],
        Box::new(|g, _| Ok(vec![Some(g.clone()), Some(g.clone())])),
    ))
}

pub fn sub(a: &Var, b: &Var) -> Result<Var> {
    let value = a.value().sub(b.value())?;
    Ok(Var::from_op(
        "sub",
        value,
        vec![a.clone(), b.clone()],
        Box::new(|g, _| Ok(vec![Some(g.clone()), Some(g.scale(-1.0))])),
    ))
}

/// Elementwise product.
pub fn mul(a: &Var, b: &Var) -> Result<Var> {
    let value = a.value().zip_map(b.value(), "mul", |x, y| x * y)?;
    Ok(Var::from_op(
        "mul",
        value,
        vec![a.clone(), b.clone()],
        Box::new(|g, p| {
            let ga = if p[0].requires_grad() {
                Some(g.zip_map(p[1].value(), "mul", |u, y| u * y)?)
            } else {
                None
            };
            let gb = if p[1].requires_grad() {
                Some(g.zip_map(p[0].value(), "mul", |u, x| u * x)?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }),
    ))
}

pub fn scale(a: &Var, k: Scalar) -> Var {
    Var::from_op(
        "scale",
        a.value().scale(k),
        vec![a.clone()],
        Box::new(move |g, _| Ok(vec![Some(g.scale(k))])),
    )
}

/// Sum of all elements as a `1x1x1x1` tensor.
pub fn sum(a: &Var) -> Var {
    let shape = a.shape();
    Var::from_op(
        "sum",
        Tensor::scalar(a.value().sum()),
        vec![a.clone()],
        Box::new(move |g, _| Ok(vec![Some(Tensor::full(shape, g.data()[0]))])),
    )
}

pub fn mean(a: &Var) -> Var {
    let n = a.value().len() as Scalar;
    scale(&sum(a), 1.0 / n)
}

/// `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu(a: &Var, slope: Scalar) -> Var {
    Var::from_op(
        "leaky_relu",
        leaky_relu_tensor(a.value(), slope),
        vec![a.clone()],
        Box::new(move |g, p| {
            Ok(vec![Some(g.zip_map(p[0].value(), "leaky_relu", |u, x| {
                if x >= 0.0 {
                    u
                } else {
                    u * slope
                }
            })?)])
        }),
    )
}

pub fn leaky_relu_tensor(t: &Tensor, slope: Scalar) -> Tensor {
    t.map(|x| if x >= 0.0 { x } else { slope * x })
}

pub fn concat_channels(parts: &[Var]) -> Result<Var> {
    let values: Vec<&Tensor> = parts.iter().map(Var::value).collect();
    let value = Tensor::concat_channels(&values)?;
    let widths: Vec<usize> = parts.iter().map(|p| p.shape()[1]).collect();
    Ok(Var::from_op(
        "concat_channels",
        value,
        parts.to_vec(),
        Box::new(move |g, p| {
            let mut out = Vec::with_capacity(widths.len());
            let mut start = 0;
            for (w, parent) in widths.iter().zip(p) {
                out.push(if parent.requires_grad() {
                    Some(g.slice_channels(start, *w)?)
                } else {
                    None
                });
                start += w;
            }
            Ok(out)
        }),
    ))
}

/// Mean over all elements of `sqrt((pred - target)^2 + eps^2)`.
pub fn charbonnier(pred: &Var, target: &Var, eps: Scalar) -> Result<Var> {
    if eps <= 0.0 {
        return Err(Error::invalid("charbonnier", "epsilon must be positive"));
    }
    same_shape("charbonnier", pred.value(), target.value())?;
    let e2 = eps * eps;
    let n = pred.value().len() as Scalar;
    let total: Scalar = pred
        .value()
        .data()
        .iter()
        .zip(target.value().data())
        .map(|(&p, &t)| sqrt((p - t) * (p - t) + e2))
        .sum();
    Ok(Var::from_op(
        "charbonnier",
        Tensor::scalar(total / n),
        vec![pred.clone(), target.clone()],
        Box::new(move |g, p| {
            let u = g.data()[0] / n;
            let d = p[0]
                .value()
                .zip_map(p[1].value(), "charbonnier", |a, b| {
                    let r = a - b;
                    u * r / sqrt(r * r + e2)
                })?;
            let dt = if p[1].requires_grad() {
                Some(d.scale(-1.0))
            } else {
                None
            };
            Ok(vec![Some(d), dt])
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[Scalar]) -> Var {
        Var::param(Tensor::new([1, 1, 1, data.len()], data.to_vec()).unwrap())
    }

    #[test]
    fn leaky_relu_values() {
        let x = Var::constant(Tensor::new([1, 1, 1, 3], vec![-1.0, 2.0, 0.0]).unwrap());
        let y = leaky_relu(&x, 0.2);
        assert_eq!(y.value().data(), &[-0.2, 2.0, 0.0]);
    }

    #[test]
    fn concat_shape() {
        let a = Var::constant(Tensor::zeros([1, 2, 4, 4]));
        let b = Var::constant(Tensor::zeros([1, 3, 4, 4]));
        assert_eq!(concat_channels(&[a, b]).unwrap().shape(), [1, 5, 4, 4]);
    }

    #[test]
    fn add_zeros_is_identity() {
        let x = Tensor::from_fn([1, 2, 3, 3], |_, c, y, x| (c * 9 + y * 3 + x) as Scalar * 0.1);
        let s = add(&Var::constant(x.clone()), &Var::constant(Tensor::zeros(x.shape()))).unwrap();
        assert_eq!(s.value(), &x);
    }

    #[test]
    fn add_rejects_mismatch() {
        let a = Var::constant(Tensor::zeros([1, 1, 2, 2]));
        let b = Var::constant(Tensor::zeros([1, 1, 2, 3]));
        assert!(add(&a, &b).is_err());
    }

    #[test]
    fn charbonnier_floor_and_direct_values() {
        let a = v(&[0.25]);
        let l = charbonnier(&a, &a, 1e-3).unwrap();
        assert!((l.value().data()[0] - 1e-3).abs() < 1e-15);
        let l = charbonnier(&v(&[1.0]), &v(&[0.0]), 1e-3).unwrap();
        assert!((l.value().data()[0] - sqrt(1.0 + 1e-6)).abs() < 1e-12);
        assert!(charbonnier(&a, &a, 0.0).is_err());
    }
}
