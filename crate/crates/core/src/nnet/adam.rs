use serde::{Deserialize, Serialize};

use super::params::Parameters;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; moments are shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState<F = f32> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new<P: Parameters<F>>(config: AdamConfig, params: &P) -> Self {
        let m: Vec<Tensor<F>> = params.params().iter().map(|t| Tensor::zeros(t.shape())).collect();
        AdamState {
            config,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    /// Applies one update. Rows listed by `frozen_rows` are left untouched.
    /// Fails with [`Error::Divergence`] before touching anything if any
    /// gradient is non-finite.
    pub fn step<P: Parameters<F>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.params();
        if gs.len() != self.m.len() {
            return Err(Error::config("optimizer state does not match parameter set"));
        }
        if !gs.iter().all(|g| g.is_finite()) {
            return Err(Error::Divergence);
        }
        let frozen = params.frozen_rows();
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = F::from_f64c(c.beta1);
        let b2 = F::from_f64c(c.beta2);
        let one = F::one();
        let bc1 = F::from_f64c(1.0 - c.beta1.powi(t));
        let bc2 = F::from_f64c(1.0 - c.beta2.powi(t));
        let lr = F::from_f64c(c.lr);
        let eps = F::from_f64c(c.eps);

        for (idx, (p, g)) in params.params_mut().into_iter().zip(gs).enumerate() {
            let width = p.row_len();
            let skip: Vec<usize> = frozen.iter().filter(|(i, _)| *i == idx).map(|&(_, r)| r).collect();
            let m = self.m[idx].data_mut();
            let v = self.v[idx].data_mut();
            for (j, ((pv, &gv), (mv, vv))) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
                .enumerate()
            {
                if !skip.is_empty() && skip.contains(&(j / width)) {
                    continue;
                }
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
