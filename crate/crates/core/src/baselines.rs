//! Comparison baselines: random assignment and the trajectory-clustering
//! pipeline, with a self-contained K-means.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rmdp::{AssignmentMatrix, Policy, RMdpSpec};
use crate::train::{
    stream_rng, train_with_fixed_assignment, PolicySet, RunOutcome, TrainConfig,
    STREAM_FEATURES,
};

/// Evaluation episodes collected for the clustering features.
pub const FEATURE_EPISODES: usize = 20;
/// Lloyd restarts for the baseline's K-means.
pub const KMEANS_RESTARTS: usize = 10;

/// Each agent independently uniform over the k representatives.
pub fn random_assignment(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<AssignmentMatrix> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    AssignmentMatrix::from_labels(&labels, k)
}

/// Per-agent returns across evaluation episodes, standardized per column
/// (population std with a 1e-8 floor). Rows index agents, columns episodes.
pub fn standardize_features(mut features: Array2<f64>) -> Array2<f64> {
    let n = features.nrows() as f64;
    for mut col in features.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        col.mapv_inplace(|x| (x - mean) / std);
    }
    features
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations with k-means++ seeding and best-of-`restarts` selection.
///
/// Empty clusters claim the point farthest from its current center, but only
/// when that distance is strictly positive: coincident points are never split
/// apart just to fill a cluster.
pub fn kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("kmeans needs n >= k >= 1, got n={n} k={k}")));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let (result, _) = kmeans_once(points, k, rng)?;
        if best.as_ref().map_or(true, |b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.unwrap())
}

/// Single Lloyd run exposing the per-iteration inertia trace (used by the
/// verification suite to check monotonicity independently).
pub fn kmeans_with_trace(
    points: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(KMeansResult, Vec<f64>)> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("kmeans needs n >= k >= 1, got n={n} k={k}")));
    }
    kmeans_once(points, k, rng)
}

fn kmeans_once(
    points: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(KMeansResult, Vec<f64>)> {
    let n = points.nrows();
    let d = points.ncols();
    let row = |i: usize| points.row(i);

    // k-means++ seeding; falls back to uniform choice when all candidate
    // distances vanish (duplicate points).
    let mut centers = Array2::zeros((k, d));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(row(i).as_slice().unwrap(), centers.row(0).as_slice().unwrap()))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut u = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).assign(&row(chosen));
        for (i, dist) in d2.iter_mut().enumerate() {
            *dist = dist.min(sq_dist(
                row(i).as_slice().unwrap(),
                centers.row(c).as_slice().unwrap(),
            ));
        }
    }

    let assign = |centers: &Array2<f64>| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let p = row(i);
                let p = p.as_slice().unwrap();
                let mut best_j = 0;
                let mut best_d = sq_dist(p, centers.row(0).as_slice().unwrap());
                for j in 1..k {
                    let dist = sq_dist(p, centers.row(j).as_slice().unwrap());
                    if dist < best_d {
                        best_d = dist;
                        best_j = j;
                    }
                }
                best_j
            })
            .collect()
    };
    let inertia_of = |labels: &[usize], centers: &Array2<f64>| -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                sq_dist(row(i).as_slice().unwrap(), centers.row(j).as_slice().unwrap())
            })
            .sum()
    };

    let mut labels = assign(&centers);
    let mut prev_inertia = f64::INFINITY;
    let mut trace = Vec::new();
    for _iter in 0..300 {
        // Repair empty clusters before recomputing centers.
        loop {
            let mut counts = vec![0usize; k];
            for &l in &labels {
                counts[l] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let (far_i, far_d) = labels
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    (
                        i,
                        sq_dist(
                            row(i).as_slice().unwrap(),
                            centers.row(j).as_slice().unwrap(),
                        ),
                    )
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            if far_d <= 0.0 {
                // Everything sits on its center; splitting identical points
                // would not reduce inertia. Leave the cluster empty.
                break;
            }
            labels[far_i] = empty;
            centers.row_mut(empty).assign(&row(far_i));
        }

        // Center update.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &j) in labels.iter().enumerate() {
            counts[j] += 1;
            let mut target = sums.row_mut(j);
            for (t, &x) in target.iter_mut().zip(row(i).iter()) {
                *t += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for x in sums.row_mut(j).iter_mut() {
                    *x *= inv;
                }
                centers.row_mut(j).assign(&sums.row(j));
            }
        }

        let new_labels = assign(&centers);
        let inertia = inertia_of(&new_labels, &centers);
        assert!(
            inertia <= prev_inertia + 1e-9,
            "lloyd iteration increased inertia: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;
        trace.push(inertia);
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }
    let inertia = inertia_of(&labels, &centers);
    Ok((KMeansResult { labels, centers, inertia }, trace))
}

/// Trains one universal policy on the uniform-average reward — the k = 1
/// code path of the main algorithms.
pub fn pretrain_universal(cfg: &TrainConfig) -> Result<RunOutcome> {
    let universal_cfg = universal_config(cfg)?;
    let alpha = AssignmentMatrix::from_labels(&vec![0; cfg.spec.n], 1)?;
    train_with_fixed_assignment(&universal_cfg, alpha, None)
}

fn universal_config(cfg: &TrainConfig) -> Result<TrainConfig> {
    let mut out = cfg.clone();
    out.spec = RMdpSpec::new(cfg.spec.env_id, cfg.spec.n, 1, cfg.spec.gamma, cfg.spec.horizon)?;
    Ok(out)
}

/// Per-agent undiscounted returns of `episodes` episodes under one policy:
/// the n-by-E feature matrix, unstandardized.
pub fn collect_features(
    cfg: &TrainConfig,
    policy: &dyn Policy,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    let n = cfg.spec.n;
    let mut env = cfg.env.make();
    let mut features = Array2::zeros((n, episodes));
    for e in 0..episodes {
        let mut obs = env.reset();
        loop {
            let action = policy.act(&obs, rng);
            let outcome = env.step(&action)?;
            for i in 0..n {
                features[(i, e)] += outcome.rewards[i];
            }
            if outcome.done {
                break;
            }
            obs = outcome.obs;
        }
    }
    Ok(features)
}

/// Clusters agents by their standardized feature rows; the resulting labels
/// are the baseline's fixed hard assignment.
pub fn features_to_assignment(
    features: Array2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<AssignmentMatrix> {
    let standardized = standardize_features(features);
    let result = kmeans(standardized.view(), k, KMEANS_RESTARTS, rng)?;
    AssignmentMatrix::from_labels(&result.labels, k)
}

/// The trajectory-clustering baseline: pretrain a universal policy, cluster
/// agents by their per-episode returns under it, then train one policy per
/// cluster (warm-started from the universal policy) under the fixed
/// assignment. At k = 1 the pipeline is exactly the pretraining run.
pub fn clustering_pipeline(cfg: &TrainConfig) -> Result<RunOutcome> {
    let universal = pretrain_universal(cfg)?;
    if cfg.spec.k == 1 {
        return Ok(universal);
    }
    let mut feature_rng = stream_rng(cfg.seed, STREAM_FEATURES);
    let features = collect_features(
        cfg,
        &universal.policies.eval_policy(0),
        FEATURE_EPISODES,
        &mut feature_rng,
    )?;
    let alpha = features_to_assignment(features, cfg.spec.k, &mut feature_rng)?;
    let warm = PolicySet::warm_start_from(&universal.policies, cfg, 0);
    train_with_fixed_assignment(cfg, alpha, Some(warm))
}
