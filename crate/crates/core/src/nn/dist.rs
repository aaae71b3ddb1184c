//! Policy distributions: categorical over logits and diagonal Gaussians with
//! state-independent log standard deviations.
//!
//! Continuous samples are clipped to the action bounds only *after* the log
//! probability is recorded on the unclipped sample, so importance ratios stay
//! consistent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f32 = -20.0;
pub const LOG_STD_MAX: f32 = 2.0;

const LN_2PI: f64 = 1.8378770664093453;

pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| ((l as f64) - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn categorical_sample(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn categorical_log_prob(logits: &[f32], action: usize) -> f64 {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let log_sum: f64 = logits
        .iter()
        .map(|&l| ((l as f64) - max).exp())
        .sum::<f64>()
        .ln();
    (logits[action] as f64 - max) - log_sum
}

pub fn categorical_entropy(logits: &[f32]) -> f64 {
    let probs = softmax(logits);
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// d(log pi(a)) / d(logits): one-hot minus probabilities.
pub fn categorical_log_prob_grad(probs: &[f64], action: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (i == action) as usize as f64 - p)
        .collect()
}

/// dH / d(logits) = -p * (ln p + H).
pub fn categorical_entropy_grad(probs: &[f64]) -> Vec<f64> {
    let h: f64 = -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>();
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
        .collect()
}

pub fn gaussian_sample(mean: &[f32], log_std: &[f32], rng: &mut ChaCha8Rng) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m as f64 + (ls as f64).exp() * z
        })
        .collect()
}

/// Log density of the (unclipped) action, summed over independent dimensions.
pub fn gaussian_log_prob(mean: &[f32], log_std: &[f32], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let sigma = (ls as f64).exp();
            let z = (a - m as f64) / sigma;
            -0.5 * z * z - ls as f64 - 0.5 * LN_2PI
        })
        .sum()
}

/// Entropy depends only on the log standard deviations.
pub fn gaussian_entropy(log_std: &[f32]) -> f64 {
    log_std
        .iter()
        .map(|&ls| 0.5 * (LN_2PI + 1.0) + ls as f64)
        .sum()
}

/// Gradients of the log density w.r.t. the mean and the log-std vector.
pub fn gaussian_log_prob_grads(
    mean: &[f32],
    log_std: &[f32],
    action: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_ls = Vec::with_capacity(mean.len());
    for ((&m, &ls), &a) in mean.iter().zip(log_std).zip(action) {
        let sigma = (ls as f64).exp();
        let z = (a - m as f64) / sigma;
        d_mean.push(z / sigma);
        d_ls.push(z * z - 1.0);
    }
    (d_mean, d_ls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn uniform_logits_entropy_is_ln_4() {
        let h = categorical_entropy(&[0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(h, 4.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn softmax_matches_hand_computation() {
        let probs = softmax(&[1.0, 0.0, 0.0, 0.0]);
        let e = std::f64::consts::E;
        let denom = e + 3.0;
        assert_abs_diff_eq!(probs[0], e / denom, epsilon = 1e-9);
        for &p in &probs[1..] {
            assert_abs_diff_eq!(p, 1.0 / denom, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_log_prob_at_mean_unit_sigma() {
        let lp = gaussian_log_prob(&[0.7], &[0.0], &[0.7]);
        assert_abs_diff_eq!(lp, -0.5 * LN_2PI, epsilon = 1e-9);
        // Two independent dimensions add.
        let lp2 = gaussian_log_prob(&[0.7, -0.1], &[0.0, 0.0], &[0.7, -0.1]);
        assert_abs_diff_eq!(lp2, -LN_2PI, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_entropy_ignores_the_mean() {
        assert_eq!(gaussian_entropy(&[0.3]), gaussian_entropy(&[0.3]));
        let h = gaussian_entropy(&[0.0]);
        assert_abs_diff_eq!(h, 0.5 * (LN_2PI + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn categorical_sampling_is_seed_deterministic_and_calibrated() {
        let logits = [0.0f32, 1.0, -1.0];
        let probs = softmax(&logits);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 3];
        let n = 40_000;
        for _ in 0..n {
            counts[categorical_sample(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() < 0.01, "freq {freq} vs p {p}");
        }
    }

    #[test]
    fn log_prob_grad_is_one_hot_minus_probs() {
        let probs = softmax(&[0.2, -0.4, 1.1]);
        let g = categorical_log_prob_grad(&probs, 2);
        assert_abs_diff_eq!(g[2], 1.0 - probs[2], epsilon = 1e-12);
        assert_abs_diff_eq!(g[0], -probs[0], epsilon = 1e-12);
        // Finite-difference check on the logit parameterization.
        let logits = [0.2f32, -0.4, 1.1];
        let h = 1e-4;
        for k in 0..3 {
            let mut up = logits;
            up[k] += h;
            let mut dn = logits;
            dn[k] -= h;
            let fd = (categorical_log_prob(&up, 2) - categorical_log_prob(&dn, 2))
                / (2.0 * h as f64);
            assert!((fd - g[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn entropy_grad_matches_finite_differences() {
        let logits = [0.5f32, -0.2, 0.0, 1.4];
        let probs = softmax(&logits);
        let g = categorical_entropy_grad(&probs);
        let h = 1e-4;
        for k in 0..4 {
            let mut up = logits;
            up[k] += h;
            let mut dn = logits;
            dn[k] -= h;
            let fd = (categorical_entropy(&up) - categorical_entropy(&dn)) / (2.0 * h as f64);
            assert!((fd - g[k]).abs() < 1e-3, "dim {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gaussian_grads_match_finite_differences() {
        let mean = [0.3f32];
        let ls = [-0.5f32];
        let action = [0.9f64];
        let (dm, dls) = gaussian_log_prob_grads(&mean, &ls, &action);
        let h = 1e-4f32;
        let fd_m = (gaussian_log_prob(&[mean[0] + h], &ls, &action)
            - gaussian_log_prob(&[mean[0] - h], &ls, &action))
            / (2.0 * h as f64);
        let fd_ls = (gaussian_log_prob(&mean, &[ls[0] + h], &action)
            - gaussian_log_prob(&mean, &[ls[0] - h], &action))
            / (2.0 * h as f64);
        assert!((fd_m - dm[0]).abs() < 1e-3);
        assert!((fd_ls - dls[0]).abs() < 1e-3);
    }
}
