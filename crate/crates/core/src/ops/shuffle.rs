//! Sub-pixel rearrangement between channels and space.

use alloc::boxed::Box;
use alloc::vec;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `(B, C*r*r, H, W) -> (B, C, H*r, W*r)`; channel block `c*r*r + i*r + j`
/// lands at offset `(i, j)` of each `r x r` output tile.
pub fn pixel_shuffle_tensor(x: &Tensor, r: usize) -> Result<Tensor> {
    if r == 0 {
        return Err(Error::invalid("pixel_shuffle", "factor must be positive"));
    }
    let [nb, nc, nh, nw] = x.shape();
    if nc % (r * r) != 0 {
        return Err(Error::invalid(
            "pixel_shuffle",
            alloc::format!("{nc} channels not divisible by {}", r * r),
        ));
    }
    let oc = nc / (r * r);
    Ok(Tensor::from_fn([nb, oc, nh * r, nw * r], |b, c, y, xx| {
        x.at(b, c * r * r + (y % r) * r + xx % r, y / r, xx / r)
    }))
}

/// Inverse of [`pixel_shuffle_tensor`].
pub fn pixel_unshuffle_tensor(x: &Tensor, r: usize) -> Result<Tensor> {
    if r == 0 {
        return Err(Error::invalid("pixel_unshuffle", "factor must be positive"));
    }
    let [nb, nc, nh, nw] = x.shape();
    if nh % r != 0 || nw % r != 0 {
        return Err(Error::invalid(
            "pixel_unshuffle",
            alloc::format!("{nh}x{nw} not divisible by {r}"),
        ));
    }
    Ok(Tensor::from_fn([nb, nc * r * r, nh / r, nw / r], |b, c, y, xx| {
        let (oc, rem) = (c / (r * r), c % (r * r));
        x.at(b, oc, y * r + rem / r, xx * r + rem % r)
    }))
}

pub fn pixel_shuffle(x: &Var, r: usize) -> Result<Var> {
    let value = pixel_shuffle_tensor(x.value(), r)?;
    Ok(Var::from_op(
        "pixel_shuffle",
        value,
        vec![x.clone()],
        Box::new(move |g, _| Ok(vec![Some(pixel_unshuffle_tensor(g, r)?)])),
    ))
}

pub fn pixel_unshuffle(x: &Var, r: usize) -> Result<Var> {
    let value = pixel_unshuffle_tensor(x.value(), r)?;
    Ok(Var::from_op(
        "pixel_unshuffle",
        value,
        vec![x.clone()],
        Box::new(move |g, _| Ok(vec![Some(pixel_shuffle_tensor(g, r)?)])),
    ))
}
