//! Orthogonal weight initialization via Householder QR in f64.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A `rows x cols` matrix with orthonormal rows (orthonormal columns when
/// `rows > cols`), scaled by `gain`.
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Array2<f32> {
    assert!(rows >= 1 && cols >= 1);
    let (p, q, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..q).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let (mut qm, r_diag) = thin_qr(&mut a, p, q);
    // Sign correction keeps the distribution symmetric.
    for (c, &d) in r_diag.iter().enumerate() {
        if d < 0.0 {
            for row in qm.iter_mut() {
                row[c] = -row[c];
            }
        }
    }
    let mut out = Array2::zeros((rows, cols));
    for r in 0..p {
        for c in 0..q {
            let value = (gain * qm[r][c]) as f32;
            if transpose {
                out[(c, r)] = value;
            } else {
                out[(r, c)] = value;
            }
        }
    }
    out
}

/// Householder QR of a tall matrix (p >= q). Returns the thin Q (p x q with
/// orthonormal columns) and the diagonal of R.
fn thin_qr(a: &mut [Vec<f64>], p: usize, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(q);
    for c in 0..q {
        let mut v: Vec<f64> = (c..p).map(|r| a[r][c]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(vec![0.0; p - c]);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in c..q {
                let dot: f64 = (0..p - c).map(|r| v[r] * a[c + r][col]).sum();
                let coef = 2.0 * dot / vnorm2;
                for r in 0..p - c {
                    a[c + r][col] -= coef * v[r];
                }
            }
        }
        reflectors.push(v);
    }
    let r_diag: Vec<f64> = (0..q).map(|c| a[c][c]).collect();

    let mut qm = vec![vec![0.0f64; q]; p];
    for (c, row) in qm.iter_mut().enumerate().take(q) {
        row[c] = 1.0;
    }
    for c in (0..q).rev() {
        let v = &reflectors[c];
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in 0..q {
            let dot: f64 = (0..p - c).map(|r| v[r] * qm[c + r][col]).sum();
            let coef = 2.0 * dot / vnorm2;
            for r in 0..p - c {
                qm[c + r][col] -= coef * v[r];
            }
        }
    }
    (qm, r_diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gram_deviation(w: &Array2<f32>, gain: f64) -> f64 {
        // For rows <= cols check W W^T, otherwise W^T W.
        let wf = w.mapv(|x| x as f64);
        let gram = if w.nrows() <= w.ncols() {
            wf.dot(&wf.t())
        } else {
            wf.t().dot(&wf)
        };
        let m = gram.nrows();
        let mut max = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { gain * gain } else { 0.0 };
                max = max.max((gram[(i, j)] - expect).abs());
            }
        }
        max
    }

    #[test]
    fn square_matrix_is_orthogonal_up_to_gain() {
        let w = orthogonal_init(8, 8, 1.3, &mut rng(1));
        assert!(gram_deviation(&w, 1.3) < 1e-4);
    }

    #[test]
    fn one_by_one_is_plus_minus_gain() {
        let mut hits = (false, false);
        for seed in 0..32 {
            let w = orthogonal_init(1, 1, 2.0, &mut rng(seed));
            let x = w[(0, 0)];
            assert!((x.abs() - 2.0).abs() < 1e-6);
            if x > 0.0 {
                hits.0 = true;
            } else {
                hits.1 = true;
            }
        }
        assert!(hits.0 && hits.1, "sign correction should produce both signs");
    }

    /// All singular values equal the gain; checked through the Gram matrix,
    /// whose eigenvalues are the squared singular values.
    #[test]
    fn tall_and_wide_matrices_have_uniform_singular_values() {
        let w = orthogonal_init(64, 25, 1.0, &mut rng(2));
        assert!(gram_deviation(&w, 1.0) < 1e-4);
        let w = orthogonal_init(25, 64, 0.01, &mut rng(3));
        assert!(gram_deviation(&w, 0.01) < 1e-4);
    }
}
