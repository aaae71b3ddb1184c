//! Adam with bias correction, plus global gradient-norm clipping helpers.

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
/// Matches the training recipe this stack implements.
pub const EPS: f64 = 1e-5;

/// Adam moments for a list of f32 parameter blocks.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(block_sizes: &[usize]) -> Self {
        Self {
            m: block_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: block_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    pub fn for_blocks(blocks: &[&[f32]]) -> Self {
        Self::new(&blocks.iter().map(|b| b.len()).collect::<Vec<_>>())
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update. `params` and `grads` must match the construction shapes.
    pub fn step(&mut self, params: &mut [&mut [f32]], grads: &[&[f32]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid("adam: block count mismatch"));
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::invalid("adam: block size mismatch"));
            }
            for i in 0..m.len() {
                let gi = g[i] as f64;
                if !gi.is_finite() {
                    return Err(Error::TrainingFault {
                        representative: None,
                        msg: "non-finite gradient".into(),
                    });
                }
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= (lr * m_hat / (v_hat.sqrt() + EPS)) as f32;
            }
        }
        Ok(())
    }
}

/// Adam over a single f64 buffer (used for the assignment logits).
#[derive(Debug, Clone)]
pub struct Adam64 {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam64 {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid("adam: size mismatch"));
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let gi = grads[i];
            if !gi.is_finite() {
                return Err(Error::TrainingFault {
                    representative: None,
                    msg: "non-finite gradient".into(),
                });
            }
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * gi;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * gi * gi;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
        Ok(())
    }
}

/// L2 norm over a set of gradient blocks.
pub fn global_grad_norm(blocks: &[&[f32]]) -> f64 {
    blocks
        .iter()
        .flat_map(|b| b.iter())
        .map(|&g| (g as f64) * (g as f64))
        .sum::<f64>()
        .sqrt()
}

/// Scales every block in place so the global norm does not exceed `max_norm`.
pub fn scale_grads(blocks: &mut [&mut [f32]], max_norm: f64) {
    let norm = global_grad_norm(&blocks.iter().map(|b| &**b).collect::<Vec<_>>());
    if norm > max_norm && norm > 0.0 {
        let scale = (max_norm / norm) as f32;
        for b in blocks.iter_mut() {
            for g in b.iter_mut() {
                *g *= scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![1.0f32];
        let mut adam = AdamState::new(&[1]);
        let g = vec![0.3f32];
        adam.step(&mut [&mut p], &[&g], 0.01).unwrap();
        // Bias-corrected m_hat / sqrt(v_hat) = g / |g|.
        assert_abs_diff_eq!(p[0], 1.0 - 0.01, epsilon = 1e-4);

        let mut p = vec![1.0f32];
        let mut adam = AdamState::new(&[1]);
        let g = vec![-2.7f32];
        adam.step(&mut [&mut p], &[&g], 0.01).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 + 0.01, epsilon = 1e-4);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = vec![0.5f32, -1.5];
        let mut adam = AdamState::new(&[2]);
        let g = vec![0.0f32, 0.0];
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&g], 0.1).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.5]);
    }

    /// Three steps on f(w) = w^2 against a literal transcription of the Adam
    /// recurrences.
    #[test]
    fn matches_hand_simulated_recurrence() {
        let lr = 0.1f64;
        let mut w_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=3u32 {
            let g = 2.0 * w_ref;
            m = BETA1 * m + (1.0 - BETA1) * g;
            v = BETA2 * v + (1.0 - BETA2) * g * g;
            let m_hat = m / (1.0 - BETA1.powi(t as i32));
            let v_hat = v / (1.0 - BETA2.powi(t as i32));
            w_ref -= lr * m_hat / (v_hat.sqrt() + EPS);
        }

        let mut p = vec![1.0f32];
        let mut adam = AdamState::new(&[1]);
        for _ in 0..3 {
            let g = vec![2.0 * p[0]];
            adam.step(&mut [&mut p], &[&g], lr).unwrap();
        }
        assert_abs_diff_eq!(p[0] as f64, w_ref, epsilon = 1e-6);
    }

    #[test]
    fn non_finite_gradient_is_a_training_fault() {
        let mut p = vec![1.0f32];
        let mut adam = AdamState::new(&[1]);
        let g = vec![f32::NAN];
        assert!(adam.step(&mut [&mut p], &[&g], 0.1).is_err());
    }

    #[test]
    fn clipping_preserves_direction() {
        let mut a = vec![3.0f32, 0.0];
        let mut b = vec![0.0f32, 4.0];
        scale_grads(&mut [&mut a, &mut b], 1.0);
        let norm = global_grad_norm(&[&a, &b]);
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(a[0] / b[1], 3.0 / 4.0, epsilon = 1e-6);
    }
}
