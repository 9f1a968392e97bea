use serde::{Deserialize, Serialize};

use super::{Parameters, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Global gradient-norm threshold; 0 disables clipping.
    pub clip_norm: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.001,
            clip_norm: 1.0,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_grad_norm<F: Real>(grads: &mut Parameters<F>, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    grads.for_each(|_, _, t| sq += t.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>());
    let norm = sq.sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let scale = F::of(max_norm / norm);
        grads.for_each_mut(|_, _, t| t.iter_mut().for_each(|v| *v *= scale));
    }
    norm
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    config: OptimizerConfig,
    m: Parameters<F>,
    v: Parameters<F>,
    t: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(params: &Parameters<F>, config: OptimizerConfig) -> Self {
        Adam {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Parameters<F>, grads: &Parameters<F>) {
        self.t += 1;
        let c = &self.config;
        let b1 = F::of(c.beta1);
        let b2 = F::of(c.beta2);
        let one = F::one();
        let lr = F::of(
            c.learning_rate * (1.0 - c.beta2.powi(self.t as i32)).sqrt()
                / (1.0 - c.beta1.powi(self.t as i32)),
        );
        let eps = F::of(c.epsilon);

        let mut g_flat = Vec::new();
        grads.for_each(|_, _, g| g_flat.push(g.to_vec()));
        let mut i = 0;
        let mut m_flat = Vec::new();
        self.m.for_each_mut(|_, _, m| {
            for (mv, &gv) in m.iter_mut().zip(&g_flat[i]) {
                *mv = b1 * *mv + (one - b1) * gv;
            }
            m_flat.push(m.to_vec());
            i += 1;
        });
        i = 0;
        let mut v_flat = Vec::new();
        self.v.for_each_mut(|_, _, v| {
            for (vv, &gv) in v.iter_mut().zip(&g_flat[i]) {
                *vv = b2 * *vv + (one - b2) * gv * gv;
            }
            v_flat.push(v.to_vec());
            i += 1;
        });
        i = 0;
        params.for_each_mut(|_, _, p| {
            for ((pv, &mv), &vv) in p.iter_mut().zip(&m_flat[i]).zip(&v_flat[i]) {
                *pv -= lr * mv / (vv.sqrt() + eps);
            }
            i += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> Parameters<f64> {
        let cfg = ModelConfig {
            embed_dim: 3,
            hidden_dim: 2,
            ..ModelConfig::default()
        };
        Parameters::init(&cfg, 5)
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = tiny();
        let before = clip_grad_norm(&mut g, 0.5);
        assert!(before > 0.5);
        let after = clip_grad_norm(&mut g, f64::INFINITY);
        assert!((after - 0.5).abs() < 1e-12);
    }

    #[test]
    fn first_step_moves_each_weight_by_the_rate() {
        let mut p = tiny();
        let start = p.clone();
        let mut g = p.zeros_like();
        g.embedding[[1, 1]] = 3.0;
        g.dec2.b[0] = -0.2;
        let mut opt = Adam::new(&p, OptimizerConfig::default());
        opt.step(&mut p, &g);
        assert!((start.embedding[[1, 1]] - p.embedding[[1, 1]] - 0.001).abs() < 1e-8);
        assert!((p.dec2.b[0] - start.dec2.b[0] - 0.001).abs() < 1e-8);
        assert_eq!(p.embedding[[0, 0]], start.embedding[[0, 0]]);
        assert_eq!(opt.steps(), 1);
    }
}
