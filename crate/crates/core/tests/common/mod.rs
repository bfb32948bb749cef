#![allow(dead_code)]

use ovsr_core::{Result, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: [usize; 4], lo: Scalar, hi: Scalar) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(lo..hi))
}

/// Largest per-tensor error `||a - n|| / max(||a||, ||n||, 1e-12)` between
/// backprop and central differences of `f` over every input element.
pub fn gradient_error(inputs: &[Tensor], h: Scalar, f: impl Fn(&[Var]) -> Result<Var>) -> Scalar {
    let vars: Vec<Var> = inputs.iter().cloned().map(Var::param).collect();
    let grads = f(&vars).unwrap().backward().unwrap();
    let flat: Vec<Vec<f64>> = inputs.iter().map(|t| t.data().iter().map(|&v| v as f64).collect()).collect();
    let numeric = ovsr_oracles::central_differences(&flat, h as f64, |xs| {
        let vs: Vec<Var> = xs
            .iter()
            .zip(inputs)
            .map(|(x, t)| Var::constant(Tensor::new(t.shape(), x.iter().map(|&v| v as Scalar).collect()).unwrap()))
            .collect();
        f(&vs).unwrap().value().data()[0] as f64
    });
    let mut worst: f64 = 0.0;
    for (v, n) in vars.iter().zip(&numeric) {
        let analytic: Vec<f64> = grads.get_or_zeros(v).data().iter().map(|&g| g as f64).collect();
        worst = worst.max(ovsr_oracles::relative_error(&analytic, n));
    }
    worst as Scalar
}

/// Copy into the reference crate's array type.
pub fn array(t: &Tensor) -> ovsr_oracles::Array {
    ovsr_oracles::Array::new(t.shape(), t.data().iter().map(|&v| v as f64).collect())
}

/// Contracts `v` with a fixed random tensor so every output element gets a
/// distinct upstream gradient.
pub fn probe(v: &Var, seed: u64) -> Result<Var> {
    let mut r = rng(seed);
    let w = Var::constant(uniform(&mut r, v.shape(), -1.0, 1.0));
    Ok(ovsr_core::ops::sum(&ovsr_core::ops::mul(v, &w)?))
}
