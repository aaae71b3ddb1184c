//! Running observation normalization (Welford) with output clipping.

/// Tracks a running mean and population variance per observation dimension;
/// normalized outputs are clipped to `[-10, 10]`.
#[derive(Debug, Clone)]
pub struct ObsNormalizer {
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: f64,
    clip: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], m2: vec![0.0; dim], count: 0.0, clip: 10.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn update(&mut self, obs: &[f32]) {
        debug_assert_eq!(obs.len(), self.mean.len());
        self.count += 1.0;
        for i in 0..self.mean.len() {
            let x = obs[i] as f64;
            let delta = x - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance; zero before any observations.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![0.0; self.m2.len()];
        }
        self.m2.iter().map(|&m2| (m2 / self.count).max(0.0)).collect()
    }

    pub fn normalize(&self, obs: &[f32]) -> Vec<f32> {
        let var = self.variance();
        obs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let z = (x as f64 - self.mean[i]) / (var[i] + 1e-8).sqrt();
                z.clamp(-self.clip, self.clip) as f32
            })
            .collect()
    }

    /// Raw state for checkpointing.
    pub fn state(&self) -> (Vec<f64>, Vec<f64>, f64) {
        (self.mean.clone(), self.m2.clone(), self.count)
    }

    pub fn from_state(mean: Vec<f64>, m2: Vec<f64>, count: f64) -> Self {
        Self { mean, m2, count, clip: 10.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn running_stats_match_batch_stats() {
        let data: Vec<Vec<f32>> = (0..100)
            .map(|i| vec![(i as f32) * 0.13 - 3.0, ((i * i) % 17) as f32])
            .collect();
        let mut norm = ObsNormalizer::new(2);
        for row in &data {
            norm.update(row);
        }
        for d in 0..2 {
            let xs: Vec<f64> = data.iter().map(|r| r[d] as f64).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            assert_abs_diff_eq!(norm.mean()[d], mean, epsilon = 1e-6);
            assert_abs_diff_eq!(norm.variance()[d], var, epsilon = 1e-6);
        }
    }

    #[test]
    fn outputs_are_clipped() {
        let mut norm = ObsNormalizer::new(1);
        for x in [0.0f32, 0.001, -0.001] {
            norm.update(&[x]);
        }
        let out = norm.normalize(&[1e9]);
        assert_eq!(out[0], 10.0);
        let out = norm.normalize(&[-1e9]);
        assert_eq!(out[0], -10.0);
    }

    #[test]
    fn variance_is_never_negative() {
        let mut norm = ObsNormalizer::new(1);
        for _ in 0..50 {
            norm.update(&[1.0]);
        }
        assert!(norm.variance()[0] >= 0.0);
        assert_eq!(norm.normalize(&[1.0])[0], 0.0);
    }
}
