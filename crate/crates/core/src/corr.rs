//! Correlation analyses over latent matrices and the original data:
//! PCA explained-variance-ratio curves and canonical correlation analysis
//! between feature sets.
//!
//! PCA always goes through the SVD of the centered matrix, never an
//! explicit covariance; CCA whitens through the data SVDs for the same
//! reason, with an optional ridge because the frame-flattened original
//! data (T rows, thousands of columns) is always rank deficient.

use crate::tensor::{svd, Matrix, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("matrix has zero total variance, explained-variance ratios are undefined")]
    ZeroVariance,
    #[error("row counts differ: {0} vs {1}")]
    RowMismatch(usize, usize),
    #[error("whitening is singular: {side} has rank {rank} < {cols} columns and ridge = 0")]
    SingularWhitening {
        side: &'static str,
        rank: usize,
        cols: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Explained-variance ratios of the principal components, padded with
/// zeros to the column count; `components` holds the corresponding
/// principal directions as columns.
#[derive(Clone, Debug)]
pub struct PcaResult {
    pub ratios: Vec<f64>,
    pub components: Matrix,
}

pub fn pca_evr(m: &Matrix) -> Result<PcaResult, CorrError> {
    if m.rows() < 2 {
        return Err(CorrError::TooFewRows {
            need: 2,
            got: m.rows(),
        });
    }
    let mut centered = m.clone();
    centered.center_columns();
    let total: f64 = centered.values().iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(CorrError::ZeroVariance);
    }
    let d = svd(&centered)?;
    let n_comp = (m.rows() - 1).min(m.cols());
    let mut ratios = vec![0.0; m.cols()];
    for (i, s) in d.s.iter().take(n_comp).enumerate() {
        ratios[i] = s * s / total;
    }
    // principal directions: first n_comp right singular vectors as columns
    let mut components = Matrix::zeros(m.cols(), n_comp);
    for c in 0..n_comp {
        for r in 0..m.cols() {
            components.set(r, c, d.vt.get(c, r));
        }
    }
    Ok(PcaResult { ratios, components })
}

/// L1 distance between two ratio curves after zero-padding the shorter.
pub fn evr_curve_distance(a: &[f64], b: &[f64]) -> Result<f64, CorrError> {
    if a.is_empty() || b.is_empty() {
        return Err(CorrError::Empty("ratio curve"));
    }
    let n = a.len().max(b.len());
    let mut acc = 0.0;
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        acc += (x - y).abs();
    }
    Ok(acc)
}

/// Canonical correlation analysis result. Correlations are descending in
/// [0, 1]; weight columns map centered inputs to canonical variates.
#[derive(Clone, Debug)]
pub struct CcaResult {
    pub correlations: Vec<f64>,
    pub x_weights: Matrix,
    pub y_weights: Matrix,
    /// Numerical ranks of the two centered matrices; correlations are only
    /// reported up to min(rank). When a side has more columns than
    /// rows - 1, full correlation of the leading pairs is forced by rank
    /// alone, so this is part of every report.
    pub effective_rank: (usize, usize),
}

const RANK_TOL: f64 = 1e-10;

/// Canonical correlations via SVD of the whitened cross-covariance, with
/// ridge regularization of each side's covariance.
pub fn cca(x: &Matrix, y: &Matrix, ridge: f64) -> Result<CcaResult, CorrError> {
    if x.rows() != y.rows() {
        return Err(CorrError::RowMismatch(x.rows(), y.rows()));
    }
    if x.rows() < 3 {
        return Err(CorrError::TooFewRows {
            need: 3,
            got: x.rows(),
        });
    }
    let n = x.rows();
    let mut xc = x.clone();
    xc.center_columns();
    let mut yc = y.clone();
    yc.center_columns();
    let dx = svd(&xc)?;
    let dy = svd(&yc)?;
    let rank = |s: &[f64]| {
        let smax = s.first().copied().unwrap_or(0.0);
        s.iter().filter(|v| **v > RANK_TOL * smax && **v > 0.0).count()
    };
    let rx = rank(&dx.s);
    let ry = rank(&dy.s);
    if ridge == 0.0 {
        if rx < x.cols() {
            return Err(CorrError::SingularWhitening {
                side: "X",
                rank: rx,
                cols: x.cols(),
            });
        }
        if ry < y.cols() {
            return Err(CorrError::SingularWhitening {
                side: "Y",
                rank: ry,
                cols: y.cols(),
            });
        }
    }
    if rx == 0 || ry == 0 {
        return Err(CorrError::ZeroVariance);
    }
    // Whitened cross-covariance in the data bases:
    //   M = Dx Ux^T Uy Dy,  D_i = s_i / sqrt(s_i^2 + ridge (n-1))
    let shrink = |s: f64| s / (s * s + ridge * (n as f64 - 1.0)).sqrt();
    let mut m = Matrix::zeros(rx, ry);
    for a in 0..rx {
        let fa = shrink(dx.s[a]);
        for b in 0..ry {
            let mut dot = 0.0;
            for r in 0..n {
                dot += dx.u.get(r, a) * dy.u.get(r, b);
            }
            m.set(a, b, fa * dot * shrink(dy.s[b]));
        }
    }
    let dm = svd(&m)?;
    let n_pairs = rx.min(ry);
    let correlations: Vec<f64> = dm.s.iter().take(n_pairs).map(|v| v.min(1.0)).collect();
    // weights: W = V diag(sqrt(n-1)/sqrt(s^2 + ridge(n-1))) U_m
    let weight = |d: &crate::tensor::Svd, r_side: usize, side_cols: usize, um: &Matrix, transpose: bool| {
        let mut w = Matrix::zeros(side_cols, n_pairs);
        for c in 0..n_pairs {
            for row in 0..side_cols {
                let mut acc = 0.0;
                for i in 0..r_side {
                    let g = (n as f64 - 1.0).sqrt()
                        / (d.s[i] * d.s[i] + ridge * (n as f64 - 1.0)).sqrt();
                    let um_ic = if transpose { um.get(c, i) } else { um.get(i, c) };
                    acc += d.vt.get(i, row) * g * um_ic;
                }
                w.set(row, c, acc);
            }
        }
        w
    };
    let x_weights = weight(&dx, rx, x.cols(), &dm.u, false);
    let y_weights = weight(&dy, ry, y.cols(), &dm.vt, true);
    Ok(CcaResult {
        correlations,
        x_weights,
        y_weights,
        effective_rank: (rx, ry),
    })
}

/// JSON record for PCA reports: one entry per analyzed space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaReportEntry {
    pub latent_dim: crate::embed::SpaceLabel,
    pub ratios: Vec<f64>,
}

/// JSON record for CCA reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CcaReport {
    pub pair: [String; 2],
    pub correlations: Vec<f64>,
    pub effective_rank: (usize, usize),
}
