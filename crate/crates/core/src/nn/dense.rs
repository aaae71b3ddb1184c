//! Dense networks with a shared tanh trunk and multiple linear heads.
//!
//! Weight matrices are stored `(in, out)` so the three hot kernels — batched
//! forward, weight gradients and input gradients — all reduce to contiguous
//! row operations that the compiler vectorizes.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::init::orthogonal_init;

/// `acc += s * x` over equal-length slices.
#[inline]
fn axpy(acc: &mut [f32], x: &[f32], s: f32) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Rational tanh approximation (clamped Padé in x^2), accurate to a couple
/// of f32 ULPs. Branch-free, so the batched activation loop vectorizes;
/// `f32::tanh` is a scalar libm call and dominated the training profile.
#[inline]
pub(crate) fn fast_tanh(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311_5;
    const A1: f32 = 4.893_525e-3;
    const A3: f32 = 6.372_619_3e-4;
    const A5: f32 = 1.485_722_4e-5;
    const A7: f32 = 5.122_297e-8;
    const A9: f32 = -8.604_672e-11;
    const A11: f32 = 2.000_188e-13;
    const A13: f32 = -2.760_768_5e-16;
    const B0: f32 = 4.893_525_2e-3;
    const B2: f32 = 2.268_434_6e-3;
    const B4: f32 = 1.185_347e-4;
    const B6: f32 = 1.198_258_4e-6;
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = A13;
    p = p * x2 + A11;
    p = p * x2 + A9;
    p = p * x2 + A7;
    p = p * x2 + A5;
    p = p * x2 + A3;
    p = p * x2 + A1;
    let p = p * x;
    let mut q = B6;
    q = q * x2 + B4;
    q = q * x2 + B2;
    q = q * x2 + B0;
    p / q
}

#[derive(Debug, Clone)]
pub struct Linear {
    /// Shape `(in, out)`.
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl Linear {
    pub fn orthogonal(input: usize, output: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        // Initialization conventions are (out, in); transpose into our layout.
        let w = orthogonal_init(output, input, gain, rng).reversed_axes().as_standard_layout().to_owned();
        Self { w, b: Array1::zeros(output) }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((input, output)), b: Array1::zeros(output) }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `y = x W + b` for a batch of rows; output written into `out`.
    fn forward_into(&self, x: ArrayView2<f32>, out: &mut Array2<f32>) {
        general_mat_mul(1.0, &x, &self.w, 0.0, out);
        let bias = self.b.as_slice().unwrap();
        for mut row in out.rows_mut() {
            let row = row.as_slice_mut().unwrap();
            for (o, &b) in row.iter_mut().zip(bias) {
                *o += b;
            }
        }
    }

    fn forward1(&self, x: &[f32], out: &mut [f32]) {
        out.copy_from_slice(self.b.as_slice().unwrap());
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(out, self.w.row(i).as_slice().unwrap(), xi);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl LayerGrad {
    fn zeros_like(layer: &Linear) -> Self {
        Self {
            w: Array2::zeros(layer.w.dim()),
            b: Array1::zeros(layer.b.len()),
        }
    }

    pub fn fill_zero(&mut self) {
        self.w.fill(0.0);
        self.b.fill(0.0);
    }
}

/// Gradient buffers mirroring a `DenseNet`'s parameters.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub trunk: Vec<LayerGrad>,
    pub heads: Vec<LayerGrad>,
}

impl NetGrads {
    pub fn zero(&mut self) {
        for g in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            g.fill_zero();
        }
    }

    pub fn blocks(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for g in self.trunk.iter().chain(self.heads.iter()) {
            out.push(g.w.as_slice().unwrap());
            out.push(g.b.as_slice().unwrap());
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = Vec::new();
        for g in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            out.push(g.w.as_slice_mut().unwrap());
            out.push(g.b.as_slice_mut().unwrap());
        }
        out
    }
}

/// Cached activations of one batched trunk pass.
#[derive(Debug, Clone)]
pub struct TrunkCache {
    input: Array2<f32>,
    /// Post-tanh output of every trunk layer.
    activations: Vec<Array2<f32>>,
}

impl TrunkCache {
    pub fn batch(&self) -> usize {
        self.input.nrows()
    }

    /// Features fed to the heads.
    pub fn features(&self) -> ArrayView2<'_, f32> {
        self.activations
            .last()
            .map(|a| a.view())
            .unwrap_or_else(|| self.input.view())
    }
}

/// A tanh MLP trunk shared by several linear heads.
#[derive(Debug, Clone)]
pub struct DenseNet {
    pub trunk: Vec<Linear>,
    pub heads: Vec<Linear>,
}

impl DenseNet {
    /// Orthogonally initialized net: trunk gain sqrt(2), heads at `head_gain`
    /// (0.01 for policy heads, 1.0 for value heads).
    pub fn new(
        input: usize,
        hidden: &[usize],
        head_outputs: &[usize],
        head_gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut dim = input;
        for &h in hidden {
            trunk.push(Linear::orthogonal(dim, h, std::f64::consts::SQRT_2, rng));
            dim = h;
        }
        let heads = head_outputs
            .iter()
            .map(|&o| Linear::orthogonal(dim, o, head_gain, rng))
            .collect();
        Self { trunk, heads }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk
            .first()
            .map(|l| l.in_dim())
            .unwrap_or_else(|| self.heads[0].in_dim())
    }

    pub fn feature_dim(&self) -> usize {
        self.trunk
            .last()
            .map(|l| l.out_dim())
            .unwrap_or_else(|| self.heads[0].in_dim())
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn grads(&self) -> NetGrads {
        NetGrads {
            trunk: self.trunk.iter().map(LayerGrad::zeros_like).collect(),
            heads: self.heads.iter().map(LayerGrad::zeros_like).collect(),
        }
    }

    fn check_head(&self, head: usize) -> Result<()> {
        if head >= self.heads.len() {
            return Err(Error::invalid(format!(
                "head index {head} out of range for {} heads",
                self.heads.len()
            )));
        }
        Ok(())
    }

    /// Batched trunk pass with cached activations for `backward`.
    pub fn trunk_forward(&self, input: ArrayView2<f32>) -> TrunkCache {
        let batch = input.nrows();
        let mut activations: Vec<Array2<f32>> = Vec::with_capacity(self.trunk.len());
        for (l, layer) in self.trunk.iter().enumerate() {
            let mut out = Array2::zeros((batch, layer.out_dim()));
            if l == 0 {
                layer.forward_into(input, &mut out);
            } else {
                layer.forward_into(activations[l - 1].view(), &mut out);
            }
            for x in out.as_slice_mut().unwrap() {
                *x = fast_tanh(*x);
            }
            activations.push(out);
        }
        TrunkCache { input: input.to_owned(), activations }
    }

    /// Output of one head on cached trunk features.
    pub fn head_forward(&self, cache: &TrunkCache, head: usize) -> Result<Array2<f32>> {
        self.check_head(head)?;
        let layer = &self.heads[head];
        let mut out = Array2::zeros((cache.batch(), layer.out_dim()));
        layer.forward_into(cache.features(), &mut out);
        Ok(out)
    }

    /// Deterministic single-observation pass through the trunk and one head.
    pub fn forward1(&self, obs: &[f32], head: usize) -> Result<Vec<f32>> {
        self.check_head(head)?;
        if obs.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "observation has {} entries, expected {}",
                obs.len(),
                self.input_dim()
            )));
        }
        let mut current = obs.to_vec();
        let mut next = Vec::new();
        for layer in &self.trunk {
            next.resize(layer.out_dim(), 0.0);
            layer.forward1(&current, &mut next);
            for x in next.iter_mut() {
                *x = fast_tanh(*x);
            }
            std::mem::swap(&mut current, &mut next);
        }
        let layer = &self.heads[head];
        let mut out = vec![0.0; layer.out_dim()];
        layer.forward1(&current, &mut out);
        Ok(out)
    }

    /// Accumulates parameter gradients for upstream gradients on one or more
    /// heads, sharing a single trunk backward pass. Trunk gradients sum
    /// across heads.
    pub fn backward(
        &self,
        cache: &TrunkCache,
        upstream: &[(usize, ArrayView2<f32>)],
        grads: &mut NetGrads,
    ) -> Result<()> {
        if cache.activations.len() != self.trunk.len()
            || cache.input.ncols() != self.input_dim()
        {
            return Err(Error::ContractViolation(
                "forward cache does not match this network".into(),
            ));
        }
        let batch = cache.batch();
        let features = cache.features();
        let mut d_features = Array2::<f32>::zeros((batch, self.feature_dim()));

        for &(head, ref dy) in upstream {
            self.check_head(head)?;
            let layer = &self.heads[head];
            if dy.nrows() != batch || dy.ncols() != layer.out_dim() {
                return Err(Error::ContractViolation(format!(
                    "upstream gradient for head {head} has shape {:?}, expected ({batch}, {})",
                    dy.dim(),
                    layer.out_dim()
                )));
            }
            let g = &mut grads.heads[head];
            g.b += &dy.sum_axis(Axis(0));
            general_mat_mul(1.0, &features.t(), dy, 1.0, &mut g.w);
            general_mat_mul(1.0, dy, &layer.w.t(), 1.0, &mut d_features);
        }

        // Trunk backward: d_features currently holds dL/d(post-tanh of the
        // last trunk layer).
        let mut d_out = d_features;
        for l in (0..self.trunk.len()).rev() {
            let act = &cache.activations[l];
            // dPre = dOut * (1 - tanh^2)
            for (mut drow, arow) in d_out.rows_mut().into_iter().zip(act.rows()) {
                for (d, &a) in drow.iter_mut().zip(arow.iter()) {
                    *d *= 1.0 - a * a;
                }
            }
            let layer_input = if l == 0 {
                cache.input.view()
            } else {
                cache.activations[l - 1].view()
            };
            let g = &mut grads.trunk[l];
            g.b += &d_out.sum_axis(Axis(0));
            general_mat_mul(1.0, &layer_input.t(), &d_out, 1.0, &mut g.w);
            if l > 0 {
                let layer = &self.trunk[l];
                let mut d_in = Array2::<f32>::zeros((batch, layer.in_dim()));
                general_mat_mul(1.0, &d_out, &layer.w.t(), 0.0, &mut d_in);
                d_out = d_in;
            }
        }
        Ok(())
    }

    /// Mutable views of every parameter block, trunk first then heads, each
    /// layer contributing its weight block then its bias block.
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = Vec::new();
        for l in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        out
    }

    pub fn param_blocks(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for l in self.trunk.iter().chain(self.heads.iter()) {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }
}


/// Test-only re-exports for the performance probe.
pub mod dense_test_hooks {
    pub fn fast_tanh_pub(x: f32) -> f32 {
        super::fast_tanh(x)
    }
}
