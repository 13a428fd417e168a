//! Dense rank-3 tensor and matrix primitives shared by every analysis:
//! mode-n unfolding, mode products, SVD, Pearson correlation.
//!
//! Layout is row-major everywhere with the time axis slowest, so unfoldings
//! are reproducible across implementations. All storage is f64; the entropy
//! and correlation comparisons downstream are too ill-conditioned for f32.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("mode {0} out of range, tensor modes are 0..=2")]
    ModeOutOfRange(usize),
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("zero-variance input: correlation is undefined")]
    DegenerateCorrelation,
    #[error("empty input: {0}")]
    Empty(&'static str),
}

fn check_finite(values: &[f64]) -> Result<(), TensorError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(TensorError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Dense rank-3 array, dims = (nt, nlat, nlon), row-major with time slowest:
/// flat index of (t, i, j) is `t*nlat*nlon + i*nlon + j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], values: Vec<f64>) -> Result<Self, TensorError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(TensorError::DimMismatch(format!(
                "all dims must be positive, got {dims:?}"
            )));
        }
        let expect = dims[0] * dims[1] * dims[2];
        if values.len() != expect {
            return Err(TensorError::DimMismatch(format!(
                "dims {dims:?} need {expect} values, got {}",
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            values: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[(t * self.dims[1] + i) * self.dims[2] + j]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, j: usize, v: f64) {
        self.values[(t * self.dims[1] + i) * self.dims[2] + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// T x (nlat*nlon) matrix with one flattened frame per row; the layout
    /// the correlation and embedding analyses expect for "original data".
    pub fn frames_as_rows(&self) -> Matrix {
        Matrix {
            rows: self.dims[0],
            cols: self.dims[1] * self.dims[2],
            values: self.values.clone(),
        }
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, TensorError> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::DimMismatch(format!(
                "matrix dims must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(TensorError::DimMismatch(format!(
                "{rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(TensorError::Empty("matrix rows"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::DimMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::DimMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.values[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.values[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Keep the first `k` columns.
    pub fn take_cols(&self, k: usize) -> Matrix {
        assert!(k <= self.cols && k > 0, "take_cols out of range");
        let mut out = Matrix::zeros(self.rows, k);
        for r in 0..self.rows {
            out.values[r * k..(r + 1) * k]
                .copy_from_slice(&self.values[r * self.cols..r * self.cols + k]);
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Subtract each column's mean. Returns the means.
    pub fn center_columns(&mut self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                means[c] += self.values[r * self.cols + c];
            }
        }
        for m in &mut means {
            *m /= self.rows as f64;
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                self.values[r * self.cols + c] -= means[c];
            }
        }
        means
    }
}

/// Mode-n matricization. Rows index the chosen mode; columns run over the
/// remaining axes in their original (row-major) order, so
/// `fold(unfold(t, m), m, t.dims()) == t` bitwise.
pub fn unfold(t: &Tensor3, mode: usize) -> Result<Matrix, TensorError> {
    let [d0, d1, d2] = t.dims();
    match mode {
        0 => Ok(Matrix {
            rows: d0,
            cols: d1 * d2,
            values: t.values().to_vec(),
        }),
        1 => {
            let mut m = Matrix::zeros(d1, d0 * d2);
            for t0 in 0..d0 {
                for i in 0..d1 {
                    for j in 0..d2 {
                        m.values[i * (d0 * d2) + t0 * d2 + j] = t.get(t0, i, j);
                    }
                }
            }
            Ok(m)
        }
        2 => {
            let mut m = Matrix::zeros(d2, d0 * d1);
            for t0 in 0..d0 {
                for i in 0..d1 {
                    for j in 0..d2 {
                        m.values[j * (d0 * d1) + t0 * d1 + i] = t.get(t0, i, j);
                    }
                }
            }
            Ok(m)
        }
        _ => Err(TensorError::ModeOutOfRange(mode)),
    }
}

/// Inverse of [`unfold`]: refold a mode-n matricization into a tensor with
/// the given dims.
pub fn fold(m: &Matrix, mode: usize, dims: [usize; 3]) -> Result<Tensor3, TensorError> {
    if mode > 2 {
        return Err(TensorError::ModeOutOfRange(mode));
    }
    let [d0, d1, d2] = dims;
    let other: usize = dims
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != mode)
        .map(|(_, d)| d)
        .product();
    if m.rows() != dims[mode] || m.cols() != other {
        return Err(TensorError::DimMismatch(format!(
            "cannot fold {}x{} into {dims:?} along mode {mode}",
            m.rows(),
            m.cols()
        )));
    }
    let mut t = Tensor3::zeros(dims);
    match mode {
        0 => t.values_mut().copy_from_slice(m.values()),
        1 => {
            for t0 in 0..d0 {
                for i in 0..d1 {
                    for j in 0..d2 {
                        t.set(t0, i, j, m.values()[i * (d0 * d2) + t0 * d2 + j]);
                    }
                }
            }
        }
        2 => {
            for t0 in 0..d0 {
                for i in 0..d1 {
                    for j in 0..d2 {
                        t.set(t0, i, j, m.values()[j * (d0 * d1) + t0 * d1 + i]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(t)
}

/// Mode-n product: contract `m` (rows x t.dims[mode]) against the chosen
/// mode. Result dims equal t.dims with dims[mode] replaced by m.rows.
pub fn mode_product(t: &Tensor3, m: &Matrix, mode: usize) -> Result<Tensor3, TensorError> {
    if mode > 2 {
        return Err(TensorError::ModeOutOfRange(mode));
    }
    if m.cols() != t.dims()[mode] {
        return Err(TensorError::DimMismatch(format!(
            "mode-{mode} product needs {} columns, matrix has {}",
            t.dims()[mode],
            m.cols()
        )));
    }
    let unfolded = unfold(t, mode)?;
    let product = m.matmul(&unfolded)?;
    let mut dims = t.dims();
    dims[mode] = m.rows();
    fold(&product, mode, dims)
}

/// Thin SVD, `a = u * diag(s) * vt`, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows x k, orthonormal columns.
    pub u: Matrix,
    /// k singular values, nonnegative, descending.
    pub s: Vec<f64>,
    /// k x cols; rows are right singular vectors.
    pub vt: Matrix,
}

/// Thin SVD via one-sided Jacobi rotations. Deterministic, accurate to close
/// to machine precision on the desk-scale matrices this workspace handles
/// (longest side a few thousand). Columns of `u` and `vt.transpose()` are
/// orthonormal even when the input is rank deficient.
pub fn svd(a: &Matrix) -> Result<Svd, TensorError> {
    check_finite(a.values())?;
    if a.rows() >= a.cols() {
        let (u, s, v) = jacobi_svd_tall(a);
        Ok(Svd {
            u,
            s,
            vt: v.transpose(),
        })
    } else {
        let (u, s, v) = jacobi_svd_tall(&a.transpose());
        Ok(Svd {
            u: v,
            s,
            vt: u.transpose(),
        })
    }
}

/// One-sided Jacobi on a tall matrix (rows >= cols). Returns (U, s, V) with
/// U rows x k and V cols x k, k = cols.
fn jacobi_svd_tall(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    // column-major working copies
    let mut b: Vec<Vec<f64>> = (0..n).map(|c| a.col(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();

    let tol = 1e-14;
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (bp, bq) = (&b[p], &b[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for i in 0..m {
                        al += bp[i] * bp[i];
                        be += bq[i] * bq[i];
                        ga += bp[i] * bq[i];
                    }
                    (al, be, ga)
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (bp, bq) = pair_mut(&mut b, p, q);
                rotate(bp, bq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut norms: Vec<f64> = b
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let s_max = order.first().map(|&i| norms[i]).unwrap_or(0.0);
    let cutoff = s_max * (m.max(n) as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s_out = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &idx) in order.iter().enumerate() {
        let sv = norms[idx];
        s_out.push(sv);
        v_cols.push(std::mem::take(&mut v[idx]));
        if sv > cutoff && sv > 0.0 {
            let mut col = std::mem::take(&mut b[idx]);
            for x in &mut col {
                *x /= sv;
            }
            u_cols.push(col);
        } else {
            u_cols.push(vec![0.0; m]);
            deficient.push(slot);
        }
    }
    // silence the "unused after take" lint path; norms is done
    norms.clear();

    // Complete an orthonormal basis for rank-deficient inputs so the
    // orthogonality contract holds regardless of rank.
    for slot in deficient {
        u_cols[slot] = complete_column(&u_cols, slot, m);
    }

    let mut u = Matrix::zeros(m, n);
    for (c, col) in u_cols.iter().enumerate() {
        for r in 0..m {
            u.set(r, c, col[r]);
        }
    }
    let mut vm = Matrix::zeros(n, n);
    for (c, col) in v_cols.iter().enumerate() {
        for r in 0..n {
            vm.set(r, c, col[r]);
        }
    }
    (u, s_out, vm)
}

fn pair_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (lo, hi) = v.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for i in 0..x.len() {
        let xi = x[i];
        let yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

/// Deterministically pick a unit vector orthogonal to every filled column.
fn complete_column(u_cols: &[Vec<f64>], skip: usize, m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cand in 0..m {
        let mut v = vec![0.0; m];
        v[cand] = 1.0;
        orthogonalize(&mut v, u_cols, skip);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= 0.5 {
            return normalize_steps(v, u_cols, skip);
        }
        if best.as_ref().map(|(b, _)| norm > *b).unwrap_or(true) {
            best = Some((norm, v));
        }
    }
    let (_, v) = best.expect("at least one candidate");
    normalize_steps(v, u_cols, skip)
}

fn orthogonalize(v: &mut [f64], u_cols: &[Vec<f64>], skip: usize) {
    for (c, col) in u_cols.iter().enumerate() {
        if c == skip {
            continue;
        }
        let dot: f64 = v.iter().zip(col).map(|(a, b)| a * b).sum();
        if dot != 0.0 {
            for (vi, ci) in v.iter_mut().zip(col) {
                *vi -= dot * ci;
            }
        }
    }
}

fn normalize_steps(mut v: Vec<f64>, u_cols: &[Vec<f64>], skip: usize) -> Vec<f64> {
    // second Gram-Schmidt pass for numerical hygiene
    orthogonalize(&mut v, u_cols, skip);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Pearson correlation coefficient. Errors on zero variance rather than
/// silently returning 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, TensorError> {
    if x.len() != y.len() {
        return Err(TensorError::DimMismatch(format!(
            "pearson lengths {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(TensorError::Empty("pearson needs at least 2 samples"));
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TensorError::DegenerateCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
