use super::{Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = |t: &Tensor| Tensor::zeros(t.shape());
        Self {
            config,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    left: p.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = beta1 * md[i] + (1.0 - beta1) * gi;
                vd[i] = beta2 * vd[i] + (1.0 - beta2) * gi * gi;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::full(&[2, 2], 0.7)];
        let before = params.clone();
        let mut adam = Adam::new(AdamConfig::default(), &params);
        adam.step(&mut params, &[Tensor::zeros(&[2, 2])]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // at t=1: m̂ = g, v̂ = g², so Δ = -lr·g/(|g|+eps)
        for g in [0.3, -4.0, 1e-2] {
            let mut params = vec![Tensor::scalar(1.0)];
            let cfg = AdamConfig::default();
            let mut adam = Adam::new(cfg, &params);
            adam.step(&mut params, &[Tensor::scalar(g)]).unwrap();
            let delta = params[0].item() - 1.0;
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((delta - expected).abs() < 1e-15);
            assert!((delta.abs() - cfg.lr).abs() < 1e-8);
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn identical_gradients_identical_updates() {
        let mut params = vec![Tensor::scalar(0.5), Tensor::scalar(-2.0)];
        let mut adam = Adam::new(AdamConfig::default(), &params);
        for _ in 0..5 {
            adam.step(&mut params, &[Tensor::scalar(0.8), Tensor::scalar(0.8)])
                .unwrap();
        }
        let d0 = params[0].item() - 0.5;
        let d1 = params[1].item() + 2.0;
        assert!((d0 - d1).abs() < 1e-14);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![Tensor::zeros(&[2, 2])];
        let mut adam = Adam::new(AdamConfig::default(), &params);
        assert!(adam.step(&mut params, &[Tensor::zeros(&[1, 4])]).is_err());
    }
}
