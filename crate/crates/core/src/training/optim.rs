use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{sqrt, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: Scalar,
    pub beta2: Scalar,
    pub epsilon: Scalar,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments per parameter, plus the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        OptimizerState {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut OptimizerState,
    lr: Scalar,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::invalid(
                "adam_step",
                format!(
                    "parameter {i}: shape {:?}, gradient {:?}, moments {:?}",
                    p.shape(),
                    g.shape(),
                    state.m[i].shape()
                ),
            ));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - powi(cfg.beta1, t);
    let c2 = 1.0 - powi(cfg.beta2, t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((w, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

fn powi(x: Scalar, n: i32) -> Scalar {
    (0..n).fold(1.0, |acc, _| acc * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::scalar(0.0);
        let mut st = OptimizerState::new([&p]);
        adam_step(&mut [&mut p], &[Tensor::scalar(1.0)], &mut st, 1e-3, &AdamConfig::default()).unwrap();
        assert!((p.data()[0] + 1e-3).abs() < 1e-10);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_and_zero_lr() {
        let mut p = Tensor::new([1, 1, 1, 2], vec![0.5, -2.0]).unwrap();
        let mut st = OptimizerState::new([&p]);
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &[Tensor::full([1, 1, 1, 2], 1.0)], &mut st, 0.0, &cfg).unwrap();
        assert_eq!(p.data(), &[0.5, -2.0]);
        let m_before = st.m[0].data()[0];
        adam_step(&mut [&mut p], &[Tensor::zeros([1, 1, 1, 2])], &mut st, 1e-2, &cfg).unwrap();
        assert!(st.m[0].data()[0] < m_before);
        assert!(st.m[0].data()[0] > 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::scalar(0.0);
        let mut st = OptimizerState::new([&p]);
        let cfg = AdamConfig::default();
        assert!(adam_step(&mut [&mut p], &[Tensor::zeros([1, 1, 1, 2])], &mut st, 1e-3, &cfg).is_err());
        assert!(adam_step(&mut [&mut p], &[], &mut st, 1e-3, &cfg).is_err());
    }
}
