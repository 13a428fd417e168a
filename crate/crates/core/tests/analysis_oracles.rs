//! Independent oracles for the analysis algorithms. Every oracle here is
//! written from scratch on raw vectors (no calls into the implementation
//! path it checks): brute-force ALS for HOOI, exhaustive partition
//! enumeration for k-means, Jacobi eigendecomposition for PCA.

use latentscope_core::corr::{cca, pca_evr};
use latentscope_core::embed::{kmeans, tsne};
use latentscope_core::rng::SplitMix64;
use latentscope_core::tensor::pearson;
use latentscope_core::tucker::tucker_hooi;
use latentscope_core::{Matrix, Tensor3};

// ---------------------------------------------------------------------------
// brute-force Tucker ALS (restarted, triple-loop contractions only)
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct RawTensor {
    d: [usize; 3],
    v: Vec<f64>,
}

impl RawTensor {
    fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.v[(i * self.d[1] + j) * self.d[2] + k]
    }
}

/// Leading-r orthonormal basis of the symmetric PSD matrix `g` (n x n,
/// row-major) by orthogonal iteration with Gram-Schmidt.
fn leading_subspace(g: &[f64], n: usize, r: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let mut b: Vec<f64> = (0..n * r).map(|_| rng.normal()).collect();
    for _ in 0..300 {
        // b <- g * b
        let mut nb = vec![0.0; n * r];
        for i in 0..n {
            for c in 0..r {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += g[i * n + j] * b[j * r + c];
                }
                nb[i * r + c] = acc;
            }
        }
        // Gram-Schmidt columns
        for c in 0..r {
            for prev in 0..c {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += nb[i * r + c] * nb[i * r + prev];
                }
                for i in 0..n {
                    nb[i * r + c] -= dot * nb[i * r + prev];
                }
            }
            let mut norm = 0.0;
            for i in 0..n {
                norm += nb[i * r + c] * nb[i * r + c];
            }
            let norm = norm.sqrt();
            if norm > 0.0 {
                for i in 0..n {
                    nb[i * r + c] /= norm;
                }
            }
        }
        b = nb;
    }
    b
}

/// One ALS pass over all three modes; factors are n_m x r_m column blocks.
fn als_fit(t: &RawTensor, ranks: [usize; 3], sweeps: usize, rng: &mut SplitMix64) -> f64 {
    let d = t.d;
    let mut factors: Vec<Vec<f64>> = (0..3)
        .map(|m| {
            let mut g = vec![0.0; d[m] * d[m]];
            for i in 0..d[m] {
                g[i * d[m] + i] = 1.0;
            }
            leading_subspace(&g, d[m], ranks[m], rng) // random orthonormal start
        })
        .collect();
    for _ in 0..sweeps {
        for mode in 0..3 {
            // project onto the other two factors, then take the leading
            // subspace of the mode's Gram matrix
            let (a, b) = match mode {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (ra, rb) = (ranks[a], ranks[b]);
            // y[i][p][q] = sum_{j,k} t * fa[j,p] * fb[k,q], with (i, j, k)
            // reordered so that i runs over `mode`
            let mut y = vec![0.0; d[mode] * ra * rb];
            for i0 in 0..d[0] {
                for i1 in 0..d[1] {
                    for i2 in 0..d[2] {
                        let tv = t.get(i0, i1, i2);
                        if tv == 0.0 {
                            continue;
                        }
                        let (im, ia, ib) = match mode {
                            0 => (i0, i1, i2),
                            1 => (i1, i0, i2),
                            _ => (i2, i0, i1),
                        };
                        for p in 0..ra {
                            let fa = factors[a][ia * ra + p];
                            if fa == 0.0 {
                                continue;
                            }
                            for q in 0..rb {
                                let fb = factors[b][ib * rb + q];
                                y[(im * ra + p) * rb + q] += tv * fa * fb;
                            }
                        }
                    }
                }
            }
            // gram of the mode-unfolding of y
            let n = d[mode];
            let cols = ra * rb;
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += y[i * cols + c] * y[j * cols + c];
                    }
                    g[i * n + j] = acc;
                }
            }
            factors[mode] = leading_subspace(&g, n, ranks[mode], rng);
        }
    }
    // captured energy: |T x_0 F0^T x_1 F1^T x_2 F2^T|^2
    let mut captured = 0.0;
    for p in 0..ranks[0] {
        for q in 0..ranks[1] {
            for s in 0..ranks[2] {
                let mut core = 0.0;
                for i0 in 0..d[0] {
                    for i1 in 0..d[1] {
                        for i2 in 0..d[2] {
                            core += t.get(i0, i1, i2)
                                * factors[0][i0 * ranks[0] + p]
                                * factors[1][i1 * ranks[1] + q]
                                * factors[2][i2 * ranks[2] + s];
                        }
                    }
                }
                captured += core * core;
            }
        }
    }
    let total: f64 = t.v.iter().map(|x| x * x).sum();
    (1.0 - (captured / total).min(1.0)).max(0.0).sqrt()
}

#[test]
fn hooi_matches_brute_force_als_on_seeded_3x3x3() {
    let mut rng = SplitMix64::new(42);
    let v: Vec<f64> = (0..27).map(|_| rng.normal()).collect();
    let raw = RawTensor { d: [3, 3, 3], v: v.clone() };
    let t = Tensor3::new([3, 3, 3], v).unwrap();

    let hooi = tucker_hooi(&t, [2, 2, 2], 200, 1e-12).unwrap();

    // restarted ALS reference: 8 random restarts, 1250 sweeps each
    let mut best = f64::INFINITY;
    for restart in 0..8u64 {
        let mut r = SplitMix64::new(1000 + restart);
        let rel = als_fit(&raw, [2, 2, 2], 1250, &mut r);
        best = best.min(rel);
    }
    assert!(
        (hooi.rel_error - best).abs() < 1e-6,
        "hooi {} vs brute-force {}",
        hooi.rel_error,
        best
    );
}

// ---------------------------------------------------------------------------
// exhaustive k-means partitions
// ---------------------------------------------------------------------------

fn exhaustive_best_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut labels = vec![0usize; n];
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for t in 0..d {
                sums[labels[i] * d + t] += p[t];
            }
        }
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let c = labels[i];
            if counts[c] == 0 {
                continue;
            }
            for t in 0..d {
                let diff = p[t] - sums[c * d + t] / counts[c] as f64;
                inertia += diff * diff;
            }
        }
        best = best.min(inertia);
    }
    best
}

#[test]
fn kmeans_matches_exhaustive_enumeration() {
    let sets: Vec<(Vec<Vec<f64>>, usize)> = vec![
        (
            vec![
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![9.0],
                vec![10.0],
                vec![11.0],
            ],
            2,
        ),
        (
            vec![
                vec![0.0, 0.0],
                vec![0.2, 0.1],
                vec![5.0, 5.0],
                vec![5.2, 4.9],
                vec![-4.0, 6.0],
                vec![-4.1, 5.8],
                vec![-3.8, 6.2],
                vec![0.1, -0.1],
            ],
            3,
        ),
    ];
    for (points, k) in sets {
        let m = Matrix::from_rows(&points).unwrap();
        let stats = kmeans(&m, k, 3, 32).unwrap();
        let oracle = exhaustive_best_inertia(&points, k);
        assert!(
            (stats.inertia - oracle).abs() < 1e-9,
            "kmeans {} vs exhaustive {}",
            stats.inertia,
            oracle
        );
    }
}

// ---------------------------------------------------------------------------
// PCA vs covariance eigendecomposition (two-sided Jacobi)
// ---------------------------------------------------------------------------

fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p * n + i];
                    let aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

#[test]
fn pca_ratios_match_covariance_eigendecomposition() {
    let mut rng = SplitMix64::new(7);
    let (rows, cols) = (9, 5);
    let m = Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap();
    let result = pca_evr(&m).unwrap();

    // covariance of the centered data, straight from the definition
    let mut means = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            means[c] += m.get(r, c);
        }
    }
    for mu in &mut means {
        *mu /= rows as f64;
    }
    let mut cov = vec![0.0; cols * cols];
    for a in 0..cols {
        for b in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += (m.get(r, a) - means[a]) * (m.get(r, b) - means[b]);
            }
            cov[a * cols + b] = acc / (rows as f64 - 1.0);
        }
    }
    let eig = jacobi_eigenvalues(cov, cols);
    let total: f64 = eig.iter().sum();
    for (i, lambda) in eig.iter().enumerate() {
        let expect = (lambda / total).max(0.0);
        assert!(
            (result.ratios[i] - expect).abs() < 1e-10,
            "ratio {i}: {} vs eig {expect}",
            result.ratios[i]
        );
    }
}

// ---------------------------------------------------------------------------
// univariate CCA vs |pearson|
// ---------------------------------------------------------------------------

#[test]
fn univariate_cca_equals_absolute_pearson_on_random_columns() {
    let mut rng = SplitMix64::new(15);
    for case in 0..5 {
        let n = 6 + case;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.6 * x + 0.4 * rng.normal())
            .collect();
        let r_pearson = pearson(&xs, &ys).unwrap().abs();
        let x = Matrix::new(n, 1, xs).unwrap();
        let y = Matrix::new(n, 1, ys).unwrap();
        let r_cca = cca(&x, &y, 0.0).unwrap().correlations[0];
        assert!(
            (r_cca - r_pearson).abs() < 1e-10,
            "case {case}: cca {r_cca} vs |pearson| {r_pearson}"
        );
    }
}

// ---------------------------------------------------------------------------
// t-SNE separates far blobs
// ---------------------------------------------------------------------------

#[test]
fn tsne_separates_two_far_gaussian_blobs() {
    let mut rng = SplitMix64::new(33);
    let dims = 16;
    let mut rows = Vec::new();
    // blob A at the origin, blob B 50 sigma away (sigma = 1)
    for _ in 0..10 {
        rows.push((0..dims).map(|_| rng.normal()).collect::<Vec<f64>>());
    }
    let offset = 50.0 / (dims as f64).sqrt();
    for _ in 0..10 {
        rows.push((0..dims).map(|_| offset + rng.normal()).collect::<Vec<f64>>());
    }
    let m = Matrix::from_rows(&rows).unwrap();
    let emb = tsne(&m, 5.0, 11, 600).unwrap();
    let centroid = |range: std::ops::Range<usize>| -> [f64; 2] {
        let mut c = [0.0, 0.0];
        for i in range.clone() {
            c[0] += emb.points.get(i, 0);
            c[1] += emb.points.get(i, 1);
        }
        [c[0] / range.len() as f64, c[1] / range.len() as f64]
    };
    let rms = |range: std::ops::Range<usize>, c: [f64; 2]| -> f64 {
        let mut acc = 0.0;
        for i in range.clone() {
            let dx = emb.points.get(i, 0) - c[0];
            let dy = emb.points.get(i, 1) - c[1];
            acc += dx * dx + dy * dy;
        }
        (acc / range.len() as f64).sqrt()
    };
    let ca = centroid(0..10);
    let cb = centroid(10..20);
    let inter = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
    let intra = rms(0..10, ca).max(rms(10..20, cb));
    assert!(
        inter > 5.0 * intra,
        "inter-centroid {inter} vs max intra RMS {intra}"
    );
}
