//! Both assignment learners.
//!
//! The hard learner keeps an n-by-k table of moving-average episode returns
//! and greedily reassigns every agent to its best representative. The soft
//! learner keeps an n-by-k table of logits whose row-softmax is the
//! assignment, trained by gradient descent through the same surrogate loss
//! as the actors.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Adam64;
use crate::rmdp::AssignmentMatrix;

/// Moving-average estimates of per-(agent, representative) episode returns.
#[derive(Debug, Clone)]
pub struct QTable {
    q: Array2<f64>,
    lambda: f64,
}

impl QTable {
    /// Zero-initialized table with the default mixing coefficient 0.05.
    pub fn new(n: usize, k: usize) -> Self {
        Self::with_lambda(n, k, 0.05)
    }

    pub fn with_lambda(n: usize, k: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
        Self { q: Array2::zeros((n, k)), lambda }
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    /// `q[i][j] <- (1 - lambda) q[i][j] + lambda R`.
    pub fn update(&mut self, agent: usize, representative: usize, episode_return: f64) {
        debug_assert!(episode_return.is_finite());
        let q = &mut self.q[(agent, representative)];
        *q = (1.0 - self.lambda) * *q + self.lambda * episode_return;
    }

    /// Greedy hard reassignment: each agent to its argmax representative,
    /// ties broken by the lowest index.
    pub fn e_step(&self) -> AssignmentMatrix {
        let labels: Vec<usize> = self
            .q
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_v = row[0];
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best = j;
                        best_v = v;
                    }
                }
                best
            })
            .collect();
        AssignmentMatrix::from_labels(&labels, self.q.ncols()).expect("labels in range")
    }
}

/// Learnable assignment logits with their own Adam state.
#[derive(Debug, Clone)]
pub struct AssignmentLogits {
    psi: Array2<f64>,
    adam: Adam64,
    lr: f64,
}

impl AssignmentLogits {
    /// Zero logits: every agent starts uniform over representatives.
    pub fn new(n: usize, k: usize) -> Self {
        Self { psi: Array2::zeros((n, k)), adam: Adam64::new(n * k), lr: 0.002 }
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn k(&self) -> usize {
        self.psi.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.psi.view()
    }

    /// Overwrites the logits (verification tooling); optimizer state is kept.
    pub fn set_psi(&mut self, psi: Array2<f64>) {
        assert_eq!(psi.dim(), self.psi.dim(), "logits shape mismatch");
        self.psi = psi;
    }

    /// Row-wise softmax: the axis normalized is the one that makes each
    /// agent's probabilities over representatives sum to 1.
    pub fn soft_alpha(&self) -> AssignmentMatrix {
        let mut alpha = Array2::zeros(self.psi.dim());
        for (mut arow, prow) in alpha.rows_mut().into_iter().zip(self.psi.rows()) {
            let max = prow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (a, &p) in arow.iter_mut().zip(prow.iter()) {
                *a = (p - max).exp();
                sum += *a;
            }
            for a in arow.iter_mut() {
                *a /= sum;
            }
        }
        AssignmentMatrix::new(alpha).expect("softmax rows are stochastic")
    }

    /// One Adam step on the supplied loss gradient.
    pub fn apply_grad(&mut self, grad: ArrayView2<'_, f64>) -> Result<()> {
        if grad.dim() != self.psi.dim() {
            return Err(Error::invalid("logits gradient shape mismatch"));
        }
        let g: Vec<f64> = grad.iter().cloned().collect();
        self.adam
            .step(self.psi.as_slice_mut().unwrap(), &g, self.lr)
    }
}

/// Gradient of the soft-assignment loss
/// `L(psi) = - sum_{j} sum_i alpha^i(j) * scores[i][j]`
/// with respect to the logits, where `scores[i][j]` accumulates the
/// clipped-ratio-weighted advantages `sum_t clip(rho^j_t) A^{ij}_t` of the
/// current minibatch and the clipped ratios are treated as constants.
///
/// Through the row softmax:
/// `dL/dpsi[i][j] = -alpha[i][j] * (scores[i][j] - sum_j' alpha[i][j'] scores[i][j'])`.
pub fn soft_logits_grad(
    alpha: &AssignmentMatrix,
    scores: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let (n, k) = (alpha.n(), alpha.k());
    if scores.dim() != (n, k) {
        return Err(Error::invalid("scores shape mismatch"));
    }
    let mut grad = Array2::zeros((n, k));
    for i in 0..n {
        let mut mean = 0.0;
        for j in 0..k {
            mean += alpha.get(i, j) * scores[(i, j)];
        }
        for j in 0..k {
            grad[(i, j)] = -alpha.get(i, j) * (scores[(i, j)] - mean);
        }
    }
    Ok(grad)
}

/// Hard assignment used to start the alternating learner: round-robin so
/// every representative gets at least one agent (when `n >= k`), then a
/// shuffle of the agent order so the round-robin pattern is not positional.
pub fn initial_hard_assignment(n: usize, k: usize, rng: &mut ChaCha8Rng) -> AssignmentMatrix {
    let mut agents: Vec<usize> = (0..n).collect();
    agents.shuffle(rng);
    let mut labels = vec![0usize; n];
    for (slot, &agent) in agents.iter().enumerate() {
        labels[agent] = slot % k;
    }
    AssignmentMatrix::from_labels(&labels, k).expect("round robin labels valid")
}
