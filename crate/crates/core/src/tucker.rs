//! Tucker decomposition by higher-order orthogonal iteration (HOOI),
//! core-entropy complexity measurement, and factor-mode comparison between
//! two tensors decomposed at matching multiranks.

use crate::tensor::{mode_product, pearson, svd, unfold, Matrix, Tensor3, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuckerError {
    #[error("rank {rank} exceeds mode-{mode} size {dim}")]
    RankOutOfRange { mode: usize, rank: usize, dim: usize },
    #[error("tensors have different dims: {0:?} vs {1:?}")]
    DimsDiffer([usize; 3], [usize; 3]),
    #[error("r_max {r_max} exceeds the smallest mode size {min_dim}; refusing to clamp")]
    RMaxTooLarge { r_max: usize, min_dim: usize },
    #[error("core tensor is identically zero, entropy is undefined")]
    AllZeroCore,
    #[error("factor matrices have different shapes: {0}x{1} vs {2}x{3}")]
    FactorShapeMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Tucker decomposition: core tensor with dims = ranks, one
/// orthonormal-column factor matrix per mode, and the relative Frobenius
/// reconstruction error.
#[derive(Clone, Debug)]
pub struct TuckerResult {
    pub core: Tensor3,
    pub factors: [Matrix; 3],
    pub rel_error: f64,
    /// Captured-norm fraction after HOSVD init and after each HOOI sweep;
    /// nondecreasing by construction of the alternating updates.
    pub fit_history: Vec<f64>,
}

impl TuckerResult {
    /// Expand back to the full tensor: core contracted with each factor.
    pub fn reconstruct(&self) -> Result<Tensor3, TuckerError> {
        let mut t = self.core.clone();
        for mode in 0..3 {
            t = mode_product(&t, &self.factors[mode], mode)?;
        }
        Ok(t)
    }
}

fn leading_left_vectors(m: &Matrix, r: usize) -> Result<Matrix, TuckerError> {
    let d = svd(m)?;
    Ok(d.u.take_cols(r))
}

/// HOOI with HOSVD initialization: truncated SVD of each unfolding, then
/// alternating updates until the captured-norm improvement drops below
/// `tol` or `max_iters` sweeps.
pub fn tucker_hooi(
    t: &Tensor3,
    ranks: [usize; 3],
    max_iters: usize,
    tol: f64,
) -> Result<TuckerResult, TuckerError> {
    let dims = t.dims();
    for mode in 0..3 {
        if ranks[mode] == 0 || ranks[mode] > dims[mode] {
            return Err(TuckerError::RankOutOfRange {
                mode,
                rank: ranks[mode],
                dim: dims[mode],
            });
        }
    }
    let norm = t.frobenius_norm();
    // HOSVD init
    let mut factors: Vec<Matrix> = Vec::with_capacity(3);
    for mode in 0..3 {
        factors.push(leading_left_vectors(&unfold(t, mode)?, ranks[mode])?);
    }
    let core_from = |factors: &[Matrix]| -> Result<Tensor3, TuckerError> {
        let mut y = t.clone();
        for mode in 0..3 {
            y = mode_product(&y, &factors[mode].transpose(), mode)?;
        }
        Ok(y)
    };
    let mut core = core_from(&factors)?;
    let fit_of = |core: &Tensor3| {
        if norm == 0.0 {
            0.0
        } else {
            core.frobenius_norm() / norm
        }
    };
    let mut fit = fit_of(&core);
    let mut fit_history = vec![fit];
    for _ in 0..max_iters {
        for mode in 0..3 {
            let mut y = t.clone();
            for other in 0..3 {
                if other != mode {
                    y = mode_product(&y, &factors[other].transpose(), other)?;
                }
            }
            factors[mode] = leading_left_vectors(&unfold(&y, mode)?, ranks[mode])?;
        }
        core = core_from(&factors)?;
        let new_fit = fit_of(&core);
        fit_history.push(new_fit);
        let improved = new_fit - fit;
        fit = new_fit;
        if improved.abs() < tol {
            break;
        }
    }
    let rel_error = (1.0 - (fit * fit).min(1.0)).max(0.0).sqrt();
    let f = &mut factors;
    let factors = [
        std::mem::replace(&mut f[0], Matrix::zeros(1, 1)),
        std::mem::replace(&mut f[1], Matrix::zeros(1, 1)),
        std::mem::replace(&mut f[2], Matrix::zeros(1, 1)),
    ];
    Ok(TuckerResult {
        core,
        factors,
        rel_error,
        fit_history,
    })
}

/// How core magnitudes are turned into a probability distribution before
/// taking the entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyNormalization {
    /// p_i = |g_i| / sum |g_j| (default; measures mixing spread).
    MagnitudeL1,
    /// p_i = g_i^2 / sum g_j^2 (energy-based alternative).
    MagnitudeSquared,
}

/// Shannon entropy (natural log) of the normalized core magnitudes.
pub fn core_entropy(core: &Tensor3) -> Result<f64, TuckerError> {
    core_entropy_with(core, EntropyNormalization::MagnitudeL1)
}

pub fn core_entropy_with(core: &Tensor3, norm: EntropyNormalization) -> Result<f64, TuckerError> {
    let weights: Vec<f64> = match norm {
        EntropyNormalization::MagnitudeL1 => core.values().iter().map(|v| v.abs()).collect(),
        EntropyNormalization::MagnitudeSquared => core.values().iter().map(|v| v * v).collect(),
    };
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(TuckerError::AllZeroCore);
    }
    let mut h = 0.0;
    for w in weights {
        if w > 0.0 {
            let p = w / total;
            h -= p * p.ln();
        }
    }
    Ok(h)
}

/// One multirank of the entropy sweep.
#[derive(Clone, Debug)]
pub struct EntropySweepRow {
    pub r: usize,
    pub entropy_truth: f64,
    pub entropy_model: f64,
    pub rel_error_truth: f64,
    pub rel_error_model: f64,
}

/// Decompose both tensors at cubic multiranks [r,r,r] for r = 1..=r_max and
/// report core entropies and reconstruction errors. r_max beyond the
/// smallest mode is a hard error: silently clamping would corrupt
/// cross-run comparisons.
pub fn entropy_sweep(
    truth: &Tensor3,
    model_out: &Tensor3,
    r_max: usize,
    norm: EntropyNormalization,
) -> Result<Vec<EntropySweepRow>, TuckerError> {
    if truth.dims() != model_out.dims() {
        return Err(TuckerError::DimsDiffer(truth.dims(), model_out.dims()));
    }
    let min_dim = truth.dims().into_iter().min().unwrap();
    if r_max == 0 || r_max > min_dim {
        return Err(TuckerError::RMaxTooLarge { r_max, min_dim });
    }
    let mut rows = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let dt = tucker_hooi(truth, [r, r, r], DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        let dm = tucker_hooi(model_out, [r, r, r], DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        rows.push(EntropySweepRow {
            r,
            entropy_truth: core_entropy_with(&dt.core, norm)?,
            entropy_model: core_entropy_with(&dm.core, norm)?,
            rel_error_truth: dt.rel_error,
            rel_error_model: dm.rel_error,
        });
    }
    Ok(rows)
}

/// Column-by-column |Pearson| between two factor matrices, in rank order.
/// The absolute value absorbs the sign indeterminacy of singular vectors.
pub fn compare_factors(f_truth: &Matrix, f_model: &Matrix) -> Result<Vec<f64>, TuckerError> {
    if f_truth.rows() != f_model.rows() || f_truth.cols() != f_model.cols() {
        return Err(TuckerError::FactorShapeMismatch(
            f_truth.rows(),
            f_truth.cols(),
            f_model.rows(),
            f_model.cols(),
        ));
    }
    let mut out = Vec::with_capacity(f_truth.cols());
    for c in 0..f_truth.cols() {
        out.push(pearson(&f_truth.col(c), &f_model.col(c))?.abs());
    }
    Ok(out)
}

/// Sign changes along a factor column; higher-order modes of smooth fields
/// oscillate faster.
pub fn zero_crossings(column: &[f64]) -> usize {
    let mut count = 0;
    let mut prev = 0.0f64;
    for &v in column {
        if v == 0.0 {
            continue;
        }
        if prev != 0.0 && v.signum() != prev.signum() {
            count += 1;
        }
        prev = v;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn rank_one(dims: [usize; 3]) -> Tensor3 {
        let a: Vec<f64> = (0..dims[0]).map(|i| 1.0 + i as f64).collect();
        let b: Vec<f64> = (0..dims[1]).map(|i| 0.5 - 0.3 * i as f64).collect();
        let c: Vec<f64> = (0..dims[2]).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut vals = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for &x in &a {
            for &y in &b {
                for &z in &c {
                    vals.push(x * y * z);
                }
            }
        }
        Tensor3::new(dims, vals).unwrap()
    }

    fn random_tensor(dims: [usize; 3], seed: u64) -> Tensor3 {
        let mut rng = SplitMix64::new(seed);
        Tensor3::new(
            dims,
            (0..dims[0] * dims[1] * dims[2]).map(|_| rng.normal()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rank_one_tensor_is_exact_at_unit_ranks() {
        let t = rank_one([3, 4, 5]);
        let d = tucker_hooi(&t, [1, 1, 1], 50, 1e-10).unwrap();
        assert!(d.rel_error < 1e-12, "rel {}", d.rel_error);
    }

    #[test]
    fn full_ranks_reconstruct_exactly() {
        let t = random_tensor([4, 5, 3], 2);
        let d = tucker_hooi(&t, [4, 5, 3], 50, 1e-10).unwrap();
        assert!(d.rel_error < 1e-10);
        let recon = d.reconstruct().unwrap();
        let scale = t.max_abs();
        for (a, b) in recon.values().iter().zip(t.values()) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn factors_have_orthonormal_columns() {
        let t = random_tensor([6, 5, 4], 7);
        let d = tucker_hooi(&t, [3, 2, 2], 50, 1e-9).unwrap();
        for f in &d.factors {
            let gram = f.transpose().matmul(f).unwrap();
            for i in 0..gram.rows() {
                for j in 0..gram.cols() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((gram.get(i, j) - expect).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn fit_history_is_nondecreasing() {
        let t = random_tensor([6, 6, 6], 9);
        let d = tucker_hooi(&t, [3, 3, 3], 50, 1e-12).unwrap();
        for w in d.fit_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "fit fell {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rank_beyond_mode_size_is_an_error() {
        let t = random_tensor([3, 3, 3], 1);
        assert!(matches!(
            tucker_hooi(&t, [4, 1, 1], 10, 1e-8),
            Err(TuckerError::RankOutOfRange { mode: 0, .. })
        ));
    }

    #[test]
    fn single_entry_core_has_zero_entropy() {
        let core = Tensor3::new([1, 1, 1], vec![2.5]).unwrap();
        assert_eq!(core_entropy(&core).unwrap(), 0.0);
    }

    #[test]
    fn uniform_core_entropy_is_log_of_count() {
        let core = Tensor3::new([2, 2, 2], vec![0.3; 8]).unwrap();
        let h = core_entropy(&core).unwrap();
        assert!((h - 8.0f64.ln()).abs() < 1e-12);
        // also 3 ln r with r = 2
        assert!((h - 3.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_entry_core_matches_hand_value() {
        let core = Tensor3::new([1, 1, 2], vec![3.0, 1.0]).unwrap();
        let h = core_entropy(&core).unwrap();
        let expect = -(0.75f64.ln() * 0.75 + 0.25f64.ln() * 0.25);
        assert!((h - expect).abs() < 1e-12);
        assert!((h - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn zero_core_is_an_error() {
        let core = Tensor3::new([1, 1, 2], vec![0.0, 0.0]).unwrap();
        assert!(matches!(core_entropy(&core), Err(TuckerError::AllZeroCore)));
    }

    #[test]
    fn entropy_bounded_by_log_core_size() {
        let t = random_tensor([5, 4, 6], 3);
        let d = tucker_hooi(&t, [3, 2, 4], 50, 1e-9).unwrap();
        let h = core_entropy(&d.core).unwrap();
        assert!(h >= 0.0);
        assert!(h <= (3.0f64 * 2.0 * 4.0).ln() + 1e-12);
    }

    #[test]
    fn sweep_on_identical_tensors_has_equal_columns() {
        let t = random_tensor([5, 5, 5], 4);
        let rows = entropy_sweep(&t, &t, 3, EntropyNormalization::MagnitudeL1).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].r, 1);
        assert_eq!(rows[0].entropy_truth, 0.0); // single-entry core
        for row in &rows {
            assert_eq!(row.entropy_truth, row.entropy_model);
            assert_eq!(row.rel_error_truth, row.rel_error_model);
        }
    }

    #[test]
    fn sweep_rejects_oversized_r_max() {
        let t = random_tensor([4, 5, 6], 5);
        assert!(matches!(
            entropy_sweep(&t, &t, 5, EntropyNormalization::MagnitudeL1),
            Err(TuckerError::RMaxTooLarge { r_max: 5, min_dim: 4 })
        ));
    }

    #[test]
    fn sweep_rejects_mismatched_dims() {
        let a = random_tensor([4, 4, 4], 6);
        let b = random_tensor([4, 4, 5], 6);
        assert!(matches!(
            entropy_sweep(&a, &b, 2, EntropyNormalization::MagnitudeL1),
            Err(TuckerError::DimsDiffer(_, _))
        ));
    }

    #[test]
    fn factor_comparison_is_sign_blind_and_symmetric() {
        let t = random_tensor([6, 5, 4], 8);
        let d = tucker_hooi(&t, [3, 3, 3], 50, 1e-9).unwrap();
        let f = &d.factors[1];
        let same = compare_factors(f, f).unwrap();
        for v in &same {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let mut flipped = f.clone();
        for r in 0..f.rows() {
            for c in 0..f.cols() {
                flipped.set(r, c, -f.get(r, c));
            }
        }
        let against_flip = compare_factors(f, &flipped).unwrap();
        for v in &against_flip {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let other = tucker_hooi(&random_tensor([6, 5, 4], 9), [3, 3, 3], 50, 1e-9).unwrap();
        let ab = compare_factors(f, &other.factors[1]).unwrap();
        let ba = compare_factors(&other.factors[1], f).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_shape_mismatch_is_an_error() {
        let a = Matrix::zeros(4, 2);
        let b = Matrix::zeros(4, 3);
        assert!(compare_factors(&a, &b).is_err());
    }

    #[test]
    fn zero_crossing_counter() {
        assert_eq!(zero_crossings(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(zero_crossings(&[1.0, -1.0, 1.0, -1.0]), 3);
        assert_eq!(zero_crossings(&[1.0, 0.0, -1.0]), 1);
    }
}
