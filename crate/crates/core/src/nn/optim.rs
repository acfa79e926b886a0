use super::mlp::{Grads, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
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

/// Adam state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step_count: u64,
}

fn check_shapes(net: &Mlp, grads: &Grads) -> Result<()> {
    let ok = grads.weights.len() == net.n_layers()
        && (0..net.n_layers())
            .all(|l| grads.weights[l].len() == net.weights(l).len() && grads.biases[l].len() == net.biases(l).len());
    if ok {
        Ok(())
    } else {
        Err(Error::Shape("gradient bundle does not mirror the network".into()))
    }
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", config.lr)));
        }
        Ok(Self {
            config,
            m: vec![0.0; net.n_params()],
            v: vec![0.0; net.n_params()],
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected Adam step. Fails if any parameter becomes non-finite.
    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) -> Result<()> {
        check_shapes(net, grads)?;
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let g_iter = grads.weights.iter().chain(grads.biases.iter()).flatten();
        let mut finite = true;
        for (((p, g), m), v) in net.params_mut().zip(g_iter).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            finite &= p.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged {
                step: self.step_count as usize,
                msg: "non-finite parameter after optimizer step".into(),
            })
        }
    }
}

/// Plain gradient descent `p <- p - lr * g`.
pub fn sgd_step(net: &mut Mlp, grads: &Grads, lr: f64) -> Result<()> {
    check_shapes(net, grads)?;
    let g_iter = grads.weights.iter().chain(grads.biases.iter()).flatten();
    for (p, g) in net.params_mut().zip(g_iter) {
        *p -= lr * g;
    }
    Ok(())
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must lie in (0,1], got {tau}")));
    }
    if !target.same_shape(online) {
        return Err(Error::Shape("target and online networks differ in shape".into()));
    }
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
