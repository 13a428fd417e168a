//! Embedding-and-clustering explainability: exact t-SNE projection of
//! latent matrices to 2-D, k-means++ partitioning, and per-cluster spread
//! statistics swept across latent spaces.
//!
//! The t-SNE here is the exact O(T^2) formulation, not a tree
//! approximation; at desk scale (T up to a few thousand) determinism and
//! testability matter more than speed.

use crate::rng::SplitMix64;
use crate::tensor::{Matrix, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("t-SNE needs at least 4 rows, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} infeasible for {rows} rows (needs perplexity < (rows-1)/3)")]
    PerplexityInfeasible { perplexity: f64, rows: usize },
    #[error("k-means k = {k} invalid for {points} points")]
    BadClusterCount { k: usize, points: usize },
    #[error("spread sweep needs at least 2 latent spaces, got {0}")]
    TooFewSpaces(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// 2-D t-SNE embedding of T points.
#[derive(Clone, Debug)]
pub struct Embedding2D {
    /// T x 2 embedded coordinates.
    pub points: Matrix,
    /// Dimension of the space the points came from.
    pub source_dim: usize,
    pub perplexity: f64,
    pub seed: u64,
    /// KL(P || Q) at the final iteration.
    pub kl_divergence: f64,
}

const EXAGGERATION: f64 = 4.0;
const EXAGGERATION_ITERS: usize = 100;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MOMENTUM_SWITCH_ITER: usize = 250;
const TSNE_LEARNING_RATE: f64 = 100.0;

/// Symmetrized, normalized joint affinities. Per-point precisions are
/// bisected until the conditional distribution's perplexity matches the
/// target (best effort after 200 halvings; degenerate geometries such as
/// equidistant points stop early). Returns the T x T joint matrix, which
/// sums to 1, and the achieved per-point perplexities.
pub fn joint_affinities(m: &Matrix, perplexity: f64) -> Result<(Matrix, Vec<f64>), EmbedError> {
    let n = m.rows();
    let d2 = pairwise_squared_distances(m);
    let mut conditional = Matrix::zeros(n, n);
    let mut achieved = Vec::with_capacity(n);
    let target_entropy = perplexity.ln();
    for i in 0..n {
        let mut beta = 1.0;
        let mut beta_lo = f64::NEG_INFINITY;
        let mut beta_hi = f64::INFINITY;
        let row = &d2.values()[i * n..(i + 1) * n];
        let dmin = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        let mut probs = vec![0.0; n];
        let mut entropy = 0.0;
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                if j == i {
                    probs[j] = 0.0;
                    continue;
                }
                let p = (-beta * (row[j] - dmin)).exp();
                probs[j] = p;
                sum += p;
            }
            entropy = 0.0;
            for p in probs.iter_mut() {
                if *p > 0.0 {
                    *p /= sum;
                    if *p > 1e-300 {
                        entropy -= *p * p.ln();
                    }
                }
            }
            let diff = entropy - target_entropy;
            if diff.abs() < 1e-7 {
                break;
            }
            if diff > 0.0 {
                beta_lo = beta;
                beta = if beta_hi.is_finite() {
                    0.5 * (beta + beta_hi)
                } else {
                    beta * 2.0
                };
            } else {
                beta_hi = beta;
                beta = if beta_lo.is_finite() {
                    0.5 * (beta + beta_lo)
                } else {
                    beta * 0.5
                };
            }
        }
        achieved.push(entropy.exp());
        for j in 0..n {
            conditional.set(i, j, probs[j]);
        }
    }
    let mut joint = Matrix::zeros(n, n);
    let norm = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            joint.set(i, j, (conditional.get(i, j) + conditional.get(j, i)) * norm);
        }
    }
    Ok((joint, achieved))
}

fn pairwise_squared_distances(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut d2 = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut acc = 0.0;
            for (a, b) in m.row(i).iter().zip(m.row(j)) {
                let d = a - b;
                acc += d * d;
            }
            d2.set(i, j, acc);
            d2.set(j, i, acc);
        }
    }
    d2
}

/// Exact joint-probability t-SNE with early exaggeration and momentum,
/// deterministic given the seed.
pub fn tsne(m: &Matrix, perplexity: f64, seed: u64, iters: usize) -> Result<Embedding2D, EmbedError> {
    let n = m.rows();
    if n < 4 {
        return Err(EmbedError::TooFewPoints(n));
    }
    if !(perplexity > 0.0) || perplexity >= (n as f64 - 1.0) / 3.0 {
        return Err(EmbedError::PerplexityInfeasible {
            perplexity,
            rows: n,
        });
    }
    let (p, _) = joint_affinities(m, perplexity)?;

    let mut rng = SplitMix64::new(seed);
    let mut y: Vec<f64> = (0..2 * n).map(|_| rng.normal() * 1e-4).collect();
    let mut velocity = vec![0.0f64; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut q = vec![0.0f64; n * n];
    let mut grad = vec![0.0f64; 2 * n];

    for iter in 0..iters {
        // Student-t affinities in the embedding
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                q_sum += 2.0 * w;
            }
        }
        let exaggeration = if iter < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i * n + j];
                let q_ij = (w / q_sum).max(1e-300);
                let coeff = 4.0 * (exaggeration * p.get(i, j) - q_ij) * w;
                grad[2 * i] += coeff * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += coeff * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        let momentum = if iter < MOMENTUM_SWITCH_ITER {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };
        for d in 0..2 * n {
            let same_sign = grad[d].signum() == velocity[d].signum();
            gains[d] = if same_sign {
                (gains[d] * 0.8).max(0.01)
            } else {
                gains[d] + 0.2
            };
            velocity[d] = momentum * velocity[d] - TSNE_LEARNING_RATE * gains[d] * grad[d];
            y[d] += velocity[d];
        }
        // keep the embedding centered so runs are comparable
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            cx += y[2 * i];
            cy += y[2 * i + 1];
        }
        cx /= n as f64;
        cy /= n as f64;
        for i in 0..n {
            y[2 * i] -= cx;
            y[2 * i + 1] -= cy;
        }
    }

    // final KL(P || Q)
    let mut q_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            q[i * n + j] = w;
            q[j * n + i] = w;
            q_sum += 2.0 * w;
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p.get(i, j);
            if pij > 0.0 {
                let qij = (q[i * n + j] / q_sum).max(1e-300);
                kl += pij * (pij / qij).ln();
            }
        }
    }

    Ok(Embedding2D {
        points: Matrix::new(n, 2, y)?,
        source_dim: m.cols(),
        perplexity,
        seed,
        kl_divergence: kl,
    })
}

/// K-means clustering outcome plus per-cluster spread statistics.
#[derive(Clone, Debug)]
pub struct ClusterStats {
    pub sizes: Vec<usize>,
    /// k x d centroid matrix.
    pub centroids: Matrix,
    /// RMS distance of members to their centroid, one entry per cluster
    /// (0 for empty clusters).
    pub sigmas: Vec<f64>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

/// K-means++ seeded Lloyd iterations, best of `restarts` by inertia.
/// Deterministic given the seed.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<ClusterStats, EmbedError> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(EmbedError::BadClusterCount { k, points: n });
    }
    let d = points.cols();
    let root = SplitMix64::new(seed);
    let mut best: Option<ClusterStats> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = root.fork(restart as u64);
        let mut centroids = plus_plus_init(points, k, &mut rng);
        let mut labels = vec![0usize; n];
        let mut prev_inertia = f64::INFINITY;
        for _ in 0..300 {
            let mut changed = false;
            let mut assign_inertia = 0.0;
            for i in 0..n {
                let mut best_c = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let dist = sqdist(points.row(i), centroids.row(c));
                    if dist < best_d {
                        best_d = dist;
                        best_c = c;
                    }
                }
                assign_inertia += best_d;
                if labels[i] != best_c {
                    labels[i] = best_c;
                    changed = true;
                }
            }
            // Lloyd steps never increase the objective
            debug_assert!(assign_inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12);
            prev_inertia = assign_inertia;
            let mut sums = vec![0.0; k * d];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                counts[labels[i]] += 1;
                for (x, s) in points.row(i).iter().zip(&mut sums[labels[i] * d..(labels[i] + 1) * d]) {
                    *s += x;
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    continue; // empty cluster keeps its old centroid
                }
                for t in 0..d {
                    centroids.set(c, t, sums[c * d + t] / counts[c] as f64);
                }
            }
            if !changed {
                break;
            }
        }
        let stats = finalize(points, &centroids, &labels, k);
        if best.as_ref().map(|b| stats.inertia < b.inertia).unwrap_or(true) {
            best = Some(stats);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = Matrix::zeros(k, d);
    let first = rng.below(n);
    for t in 0..d {
        centroids.set(0, t, points.get(first, t));
    }
    let mut dist = vec![0.0; n];
    for c in 1..k {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for prev in 0..c {
                best = best.min(sqdist(points.row(i), centroids.row(prev)));
            }
            dist[i] = best;
            total += best;
        }
        let chosen = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut pick = n - 1;
            for (i, w) in dist.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.below(n)
        };
        for t in 0..d {
            centroids.set(c, t, points.get(chosen, t));
        }
    }
    centroids
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn finalize(points: &Matrix, centroids: &Matrix, labels: &[usize], k: usize) -> ClusterStats {
    let mut sizes = vec![0usize; k];
    let mut sq_sums = vec![0.0; k];
    for (i, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        sq_sums[c] += sqdist(points.row(i), centroids.row(c));
    }
    let inertia = sq_sums.iter().sum();
    let sigmas = sizes
        .iter()
        .zip(&sq_sums)
        .map(|(&s, &sq)| if s == 0 { 0.0 } else { (sq / s as f64).sqrt() })
        .collect();
    ClusterStats {
        sizes,
        centroids: centroids.clone(),
        sigmas,
        labels: labels.to_vec(),
        inertia,
    }
}

/// Identifies one analyzed space in sweep outputs: a latent space by its
/// dimension, or the original data.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpaceLabel {
    Latent(usize),
    Original,
}

impl Serialize for SpaceLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SpaceLabel::Latent(k) => serializer.serialize_u64(*k as u64),
            SpaceLabel::Original => serializer.serialize_str("original"),
        }
    }
}

impl<'de> Deserialize<'de> for SpaceLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(deserializer)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|k| SpaceLabel::Latent(k as usize))
                .ok_or_else(|| serde::de::Error::custom("latent_dim must be a nonnegative integer")),
            serde_json::Value::String(s) if s == "original" => Ok(SpaceLabel::Original),
            other => Err(serde::de::Error::custom(format!(
                "expected latent dim or \"original\", got {other}"
            ))),
        }
    }
}

/// One row of the spread sweep: cluster spreads for one analyzed space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub latent_dim: SpaceLabel,
    pub sigmas: Vec<f64>,
    pub inertia: f64,
}

/// Settings shared by every space in a spread sweep.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub perplexity: f64,
    pub tsne_iters: usize,
    pub clusters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Cluster on raw coordinates instead of the 2-D embedding
    /// (sensitivity check; the default clusters what is visualized).
    pub cluster_raw: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            tsne_iters: 1000,
            clusters: 6,
            restarts: 8,
            seed: 0,
            cluster_raw: false,
        }
    }
}

/// Embed + cluster each latent space (ascending size) and the original
/// data (last), reporting per-cluster spreads in that order.
pub fn spread_sweep(
    spaces: &[(usize, Matrix)],
    original: &Matrix,
    settings: &SweepSettings,
) -> Result<Vec<SpreadSummary>, EmbedError> {
    if spaces.len() < 2 {
        return Err(EmbedError::TooFewSpaces(spaces.len()));
    }
    let mut order: Vec<usize> = (0..spaces.len()).collect();
    order.sort_by_key(|&i| spaces[i].0);
    let mut out = Vec::with_capacity(spaces.len() + 1);
    for idx in order {
        let (dim, m) = &spaces[idx];
        out.push(analyze_space(SpaceLabel::Latent(*dim), m, settings)?);
    }
    out.push(analyze_space(SpaceLabel::Original, original, settings)?);
    Ok(out)
}

/// Embedding + clustering for one space.
pub fn analyze_space(
    label: SpaceLabel,
    m: &Matrix,
    settings: &SweepSettings,
) -> Result<SpreadSummary, EmbedError> {
    let embedding = tsne(m, settings.perplexity, settings.seed, settings.tsne_iters)?;
    let stats = if settings.cluster_raw {
        kmeans(m, settings.clusters, settings.seed, settings.restarts)?
    } else {
        kmeans(&embedding.points, settings.clusters, settings.seed, settings.restarts)?
    };
    Ok(SpreadSummary {
        latent_dim: label,
        sigmas: stats.sigmas,
        inertia: stats.inertia,
    })
}

/// Full embed+cluster result for one space, used by the CLI to write
/// per-point embedding CSVs.
pub fn embed_and_cluster(
    m: &Matrix,
    settings: &SweepSettings,
) -> Result<(Embedding2D, ClusterStats), EmbedError> {
    let embedding = tsne(m, settings.perplexity, settings.seed, settings.tsne_iters)?;
    let stats = if settings.cluster_raw {
        kmeans(m, settings.clusters, settings.seed, settings.restarts)?
    } else {
        kmeans(&embedding.points, settings.clusters, settings.seed, settings.restarts)?
    };
    Ok((embedding, stats))
}
