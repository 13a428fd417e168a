//! The MMGN reconstruction model: a latent table indexed by time step (the
//! auto-decoded encoder) driving a Gabor multiplicative filter network
//! decoder over spatial coordinates.
//!
//! The decoder evaluates, for coordinates x in [-1,1]^2 and latent z:
//!
//! ```text
//! h_1     = g_1(x) o (1 + A_1 z)
//! h_(i+1) = (W_i h_i + b_i) o g_(i+1)(x) o (1 + A_(i+1) z)
//! u       = w_out . h_L + b_out
//! ```
//!
//! where `o` is elementwise product and each g_i is a bank of Gabor units
//! `exp(-gamma/2 |x-mu|^2) * sin(omega.x + phase)`. At z = 0 every
//! modulation factor is exactly one, so the unmodulated filter network is
//! recovered by construction.

mod train;

pub use train::{infer_latent, loss_gradients, train, training_loss, TrainOutput};

use crate::fio::{self, FioError, MODEL_MAGIC};
use crate::tensor::{Matrix, Tensor3, TensorError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmgnError {
    #[error("empty observation set")]
    EmptyObservations,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {epoch} (loss {loss}); try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    File(#[from] FioError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed latent file: {0}")]
    BadLatentsFile(String),
}

/// Decoder shape and initialization scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Number of Gabor layers L (>= 1). There are L-1 inter-layer linears.
    pub layers: usize,
    /// Hidden width h.
    pub hidden: usize,
    /// Latent dimension k.
    pub latent_dim: usize,
    /// Frequency init: omega ~ Normal(0, (omega_scale * layer_index/L)^2).
    pub omega_scale: f64,
    /// Envelope init: gamma ~ |Normal(0, gamma_scale^2)|.
    pub gamma_scale: f64,
}

impl Architecture {
    /// Desk-scale default. The frequency scale is deliberately modest: at a
    /// 5% observation rate the per-frame point spacing supports only low
    /// spatial frequencies, and larger scales alias between observations
    /// instead of interpolating.
    pub fn desk_default(latent_dim: usize) -> Self {
        Self {
            layers: 3,
            hidden: 64,
            latent_dim,
            omega_scale: 4.0,
            gamma_scale: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), MmgnError> {
        if self.layers == 0 || self.hidden == 0 || self.latent_dim == 0 {
            return Err(MmgnError::InvalidConfig(format!(
                "layers/hidden/latent_dim must be positive, got {}/{}/{}",
                self.layers, self.hidden, self.latent_dim
            )));
        }
        if !(self.omega_scale.is_finite() && self.gamma_scale.is_finite()) {
            return Err(MmgnError::InvalidConfig("non-finite init scales".into()));
        }
        Ok(())
    }
}

/// Optimizer settings for training and test-time latent inference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Latent L2 weight (lambda). Keeps latent norms from blowing up and
    /// distorting the downstream correlation analyses.
    pub latent_l2: f64,
    pub latent_init_stddev: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            learning_rate: 8e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            latent_l2: 1e-4,
            latent_init_stddev: 1e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MmgnError> {
        if !(self.learning_rate > 0.0) {
            return Err(MmgnError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.latent_l2 >= 0.0) {
            return Err(MmgnError::InvalidConfig(format!(
                "latent_l2 must be nonnegative, got {}",
                self.latent_l2
            )));
        }
        if !(self.latent_init_stddev >= 0.0) {
            return Err(MmgnError::InvalidConfig("latent_init_stddev must be nonnegative".into()));
        }
        if !(0.0 <= self.beta1 && self.beta1 < 1.0 && 0.0 <= self.beta2 && self.beta2 < 1.0) {
            return Err(MmgnError::InvalidConfig("Adam betas must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// One Gabor filter bank: per hidden unit a center, an envelope scale, a
/// frequency vector, and a phase.
#[derive(Clone, Debug, PartialEq)]
pub struct GaborLayerParams {
    pub mu: Vec<[f64; 2]>,
    pub gamma: Vec<f64>,
    pub omega: Vec<[f64; 2]>,
    pub phase: Vec<f64>,
}

impl GaborLayerParams {
    pub fn units(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<(), MmgnError> {
        let h = self.units();
        if self.mu.len() != h || self.omega.len() != h || self.phase.len() != h {
            return Err(MmgnError::DimMismatch("ragged Gabor parameter arrays".into()));
        }
        for (j, g) in self.gamma.iter().enumerate() {
            if !(*g >= 0.0) || !g.is_finite() {
                return Err(MmgnError::InvalidConfig(format!(
                    "gamma[{j}] = {g} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate a Gabor bank at one point: unit j yields
/// `exp(-gamma_j/2 |x-mu_j|^2) * sin(omega_j.x + phase_j)`.
pub fn gabor_filter(x: [f64; 2], p: &GaborLayerParams) -> Vec<f64> {
    let h = p.units();
    let mut out = Vec::with_capacity(h);
    for j in 0..h {
        let dx = x[0] - p.mu[j][0];
        let dy = x[1] - p.mu[j][1];
        let env = (-0.5 * p.gamma[j] * (dx * dx + dy * dy)).exp();
        let arg = p.omega[j][0] * x[0] + p.omega[j][1] * x[1] + p.phase[j];
        out.push(env * arg.sin());
    }
    out
}

/// Analytic derivatives of each unit's output with respect to its own
/// parameters, for checking against finite differences.
#[derive(Clone, Debug)]
pub struct GaborUnitGrad {
    pub d_mu: [f64; 2],
    pub d_gamma: f64,
    pub d_omega: [f64; 2],
    pub d_phase: f64,
}

pub fn gabor_filter_jacobian(x: [f64; 2], p: &GaborLayerParams) -> Vec<GaborUnitGrad> {
    let h = p.units();
    let mut out = Vec::with_capacity(h);
    for j in 0..h {
        let dx = x[0] - p.mu[j][0];
        let dy = x[1] - p.mu[j][1];
        let dsq = dx * dx + dy * dy;
        let env = (-0.5 * p.gamma[j] * dsq).exp();
        let arg = p.omega[j][0] * x[0] + p.omega[j][1] * x[1] + p.phase[j];
        let (s, c) = arg.sin_cos();
        out.push(GaborUnitGrad {
            // d env/d mu = env * gamma * (x - mu)
            d_mu: [env * s * p.gamma[j] * dx, env * s * p.gamma[j] * dy],
            d_gamma: -0.5 * dsq * env * s,
            d_omega: [env * c * x[0], env * c * x[1]],
            d_phase: env * c,
        });
    }
    out
}

/// Where each parameter group lives inside the flat parameter vector.
/// Order matches the model file payload: per-layer Gabor blocks
/// (mu, gamma, omega, phase), then the inter-layer linears (W_i, b_i),
/// then the modulation projections A_i, then the output head.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub layers: usize,
    pub hidden: usize,
    pub latent_dim: usize,
    pub gabor_mu: Vec<usize>,
    pub gabor_gamma: Vec<usize>,
    pub gabor_omega: Vec<usize>,
    pub gabor_phase: Vec<usize>,
    pub linear_w: Vec<usize>,
    pub linear_b: Vec<usize>,
    pub modulation: Vec<usize>,
    pub out_w: usize,
    pub out_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(arch: &Architecture) -> Self {
        let (l, h, k) = (arch.layers, arch.hidden, arch.latent_dim);
        let mut off = 0usize;
        let mut alloc = |n: usize| {
            let at = off;
            off += n;
            at
        };
        let mut gabor_mu = Vec::with_capacity(l);
        let mut gabor_gamma = Vec::with_capacity(l);
        let mut gabor_omega = Vec::with_capacity(l);
        let mut gabor_phase = Vec::with_capacity(l);
        for _ in 0..l {
            gabor_mu.push(alloc(h * 2));
            gabor_gamma.push(alloc(h));
            gabor_omega.push(alloc(h * 2));
            gabor_phase.push(alloc(h));
        }
        let mut linear_w = Vec::with_capacity(l.saturating_sub(1));
        let mut linear_b = Vec::with_capacity(l.saturating_sub(1));
        for _ in 0..l.saturating_sub(1) {
            linear_w.push(alloc(h * h));
            linear_b.push(alloc(h));
        }
        let mut modulation = Vec::with_capacity(l);
        for _ in 0..l {
            modulation.push(alloc(h * k));
        }
        let out_w = alloc(h);
        let out_b = alloc(1);
        Self {
            layers: l,
            hidden: h,
            latent_dim: k,
            gabor_mu,
            gabor_gamma,
            gabor_omega,
            gabor_phase,
            linear_w,
            linear_b,
            modulation,
            out_w,
            out_b,
            total: off,
        }
    }
}

/// Trained decoder. Parameters live in one flat vector addressed through
/// [`Layout`]; the model file payload is that vector verbatim.
#[derive(Clone, Debug, PartialEq)]
pub struct MmgnModel {
    arch: Architecture,
    pub(crate) layout: Layout,
    pub(crate) theta: Vec<f64>,
    seed: u64,
}

impl MmgnModel {
    pub(crate) fn from_parts(arch: Architecture, theta: Vec<f64>, seed: u64) -> Self {
        let layout = Layout::new(&arch);
        debug_assert_eq!(theta.len(), layout.total);
        Self {
            arch,
            layout,
            theta,
            seed,
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> usize {
        self.arch.layers
    }

    pub fn hidden(&self) -> usize {
        self.arch.hidden
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    /// Named parameter groups with their index ranges in `params()`, in
    /// storage order. This is what the gradient-check suites iterate over.
    pub fn param_groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let lo = &self.layout;
        let (l, h, k) = (lo.layers, lo.hidden, lo.latent_dim);
        let mut groups = Vec::new();
        for li in 0..l {
            groups.push((format!("gabor{li}.mu"), lo.gabor_mu[li]..lo.gabor_mu[li] + 2 * h));
            groups.push((format!("gabor{li}.gamma"), lo.gabor_gamma[li]..lo.gabor_gamma[li] + h));
            groups.push((format!("gabor{li}.omega"), lo.gabor_omega[li]..lo.gabor_omega[li] + 2 * h));
            groups.push((format!("gabor{li}.phase"), lo.gabor_phase[li]..lo.gabor_phase[li] + h));
        }
        for li in 0..l.saturating_sub(1) {
            groups.push((format!("linear{li}.w"), lo.linear_w[li]..lo.linear_w[li] + h * h));
            groups.push((format!("linear{li}.b"), lo.linear_b[li]..lo.linear_b[li] + h));
        }
        for li in 0..l {
            groups.push((format!("modulation{li}"), lo.modulation[li]..lo.modulation[li] + h * k));
        }
        groups.push(("out.w".into(), lo.out_w..lo.out_w + h));
        groups.push(("out.b".into(), lo.out_b..lo.out_b + 1));
        groups
    }

    /// Copy of the model with one raw parameter replaced; finite-difference
    /// probes are built from this.
    pub fn with_param(&self, index: usize, value: f64) -> Self {
        let mut copy = self.clone();
        copy.theta[index] = value;
        copy
    }

    /// Owned copy of one Gabor bank, mostly for inspection and tests.
    pub fn gabor_layer(&self, l: usize) -> GaborLayerParams {
        let (h, lo) = (self.layout.hidden, &self.layout);
        let mu = &self.theta[lo.gabor_mu[l]..lo.gabor_mu[l] + 2 * h];
        GaborLayerParams {
            mu: (0..h).map(|j| [mu[2 * j], mu[2 * j + 1]]).collect(),
            gamma: self.theta[lo.gabor_gamma[l]..lo.gabor_gamma[l] + h].to_vec(),
            omega: {
                let om = &self.theta[lo.gabor_omega[l]..lo.gabor_omega[l] + 2 * h];
                (0..h).map(|j| [om[2 * j], om[2 * j + 1]]).collect()
            },
            phase: self.theta[lo.gabor_phase[l]..lo.gabor_phase[l] + h].to_vec(),
        }
    }

    /// Per-layer modulation vector 1 + A_l z.
    pub(crate) fn modulation_for(&self, l: usize, z: &[f64], out: &mut [f64]) {
        let h = self.layout.hidden;
        let k = self.layout.latent_dim;
        let a = &self.theta[self.layout.modulation[l]..self.layout.modulation[l] + h * k];
        for j in 0..h {
            let row = &a[j * k..(j + 1) * k];
            let mut acc = 1.0;
            for (w, zi) in row.iter().zip(z) {
                acc += w * zi;
            }
            out[j] = acc;
        }
    }

    /// Gabor features of layer l at a point, written into `out` (length h).
    pub(crate) fn gabor_at(&self, l: usize, x: [f64; 2], out: &mut [f64]) {
        let h = self.layout.hidden;
        let lo = &self.layout;
        let mu = &self.theta[lo.gabor_mu[l]..lo.gabor_mu[l] + 2 * h];
        let ga = &self.theta[lo.gabor_gamma[l]..lo.gabor_gamma[l] + h];
        let om = &self.theta[lo.gabor_omega[l]..lo.gabor_omega[l] + 2 * h];
        let ph = &self.theta[lo.gabor_phase[l]..lo.gabor_phase[l] + h];
        for j in 0..h {
            let dx = x[0] - mu[2 * j];
            let dy = x[1] - mu[2 * j + 1];
            let env = (-0.5 * ga[j] * (dx * dx + dy * dy)).exp();
            let arg = om[2 * j] * x[0] + om[2 * j + 1] * x[1] + ph[j];
            out[j] = env * arg.sin();
        }
    }
}

/// T x k matrix of latent codes, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMatrix {
    codes: Matrix,
}

impl LatentMatrix {
    pub fn new(codes: Matrix) -> Self {
        Self { codes }
    }

    pub fn steps(&self) -> usize {
        self.codes.rows()
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn code(&self, t: usize) -> &[f64] {
        self.codes.row(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.codes
    }

    pub fn into_matrix(self) -> Matrix {
        self.codes
    }

    /// Copy with one latent dimension set to a fixed value (0 for the
    /// standard neutral ablation).
    pub fn with_column_set(&self, dim: usize, value: f64) -> Result<Self, MmgnError> {
        if dim >= self.dim() {
            return Err(MmgnError::DimMismatch(format!(
                "dimension {dim} out of range for k = {}",
                self.dim()
            )));
        }
        let mut m = self.codes.clone();
        for t in 0..m.rows() {
            m.set(t, dim, value);
        }
        Ok(Self { codes: m })
    }
}

/// Decoder evaluation u = D(x, z).
pub fn decoder_forward(model: &MmgnModel, x: [f64; 2], z: &[f64]) -> Result<f64, MmgnError> {
    if z.len() != model.latent_dim() {
        return Err(MmgnError::DimMismatch(format!(
            "latent length {} vs model k = {}",
            z.len(),
            model.latent_dim()
        )));
    }
    let h = model.hidden();
    let l = model.layers();
    let lo = &model.layout;
    let mut g = vec![0.0; h];
    let mut m = vec![0.0; h];
    let mut hid = vec![0.0; h];
    let mut pre = vec![0.0; h];
    model.gabor_at(0, x, &mut g);
    model.modulation_for(0, z, &mut m);
    for j in 0..h {
        hid[j] = g[j] * m[j];
    }
    for li in 1..l {
        let w = &model.theta[lo.linear_w[li - 1]..lo.linear_w[li - 1] + h * h];
        let b = &model.theta[lo.linear_b[li - 1]..lo.linear_b[li - 1] + h];
        for j in 0..h {
            let row = &w[j * h..(j + 1) * h];
            let mut acc = b[j];
            for (wi, hi) in row.iter().zip(&hid) {
                acc += wi * hi;
            }
            pre[j] = acc;
        }
        model.gabor_at(li, x, &mut g);
        model.modulation_for(li, z, &mut m);
        for j in 0..h {
            hid[j] = pre[j] * g[j] * m[j];
        }
    }
    let w_out = &model.theta[lo.out_w..lo.out_w + h];
    let mut u = model.theta[lo.out_b];
    for (w, hi) in w_out.iter().zip(&hid) {
        u += w * hi;
    }
    Ok(u)
}

/// Evaluate the decoder on a full grid: latents row t drives frame t.
/// The representation is continuous, so the requested grid may be denser
/// than the training grid.
pub fn reconstruct_grid(
    model: &MmgnModel,
    latents: &LatentMatrix,
    dims: [usize; 3],
) -> Result<Tensor3, MmgnError> {
    if latents.steps() != dims[0] {
        return Err(MmgnError::DimMismatch(format!(
            "latents have {} rows, grid wants nt = {}",
            latents.steps(),
            dims[0]
        )));
    }
    if latents.dim() != model.latent_dim() {
        return Err(MmgnError::DimMismatch(format!(
            "latent dim {} vs model k = {}",
            latents.dim(),
            model.latent_dim()
        )));
    }
    let [nt, nlat, nlon] = dims;
    let h = model.hidden();
    let l = model.layers();
    let lo = &model.layout;
    let cells = nlat * nlon;

    // Gabor features depend only on x: precompute per grid point, reuse
    // across all frames.
    let mut features = vec![0.0; cells * l * h];
    {
        let mut buf = vec![0.0; h];
        for i in 0..nlat {
            let phi = crate::fieldgen::grid_coord(i, nlat);
            for j in 0..nlon {
                let lambda = crate::fieldgen::grid_coord(j, nlon);
                let cell = i * nlon + j;
                for li in 0..l {
                    model.gabor_at(li, [phi, lambda], &mut buf);
                    features[(cell * l + li) * h..(cell * l + li + 1) * h].copy_from_slice(&buf);
                }
            }
        }
    }

    let mut values = Vec::with_capacity(nt * cells);
    let mut mods = vec![0.0; l * h];
    let mut hid = vec![0.0; h];
    let mut pre = vec![0.0; h];
    let w_out = &model.theta[lo.out_w..lo.out_w + h];
    let out_b = model.theta[lo.out_b];
    for t in 0..nt {
        let z = latents.code(t);
        for li in 0..l {
            model.modulation_for(li, z, &mut mods[li * h..(li + 1) * h]);
        }
        for cell in 0..cells {
            let feat = |li: usize| &features[(cell * l + li) * h..(cell * l + li + 1) * h];
            let g0 = feat(0);
            let m0 = &mods[0..h];
            for j in 0..h {
                hid[j] = g0[j] * m0[j];
            }
            for li in 1..l {
                let w = &model.theta[lo.linear_w[li - 1]..lo.linear_w[li - 1] + h * h];
                let b = &model.theta[lo.linear_b[li - 1]..lo.linear_b[li - 1] + h];
                for j in 0..h {
                    let row = &w[j * h..(j + 1) * h];
                    let mut acc = b[j];
                    for (wi, hi) in row.iter().zip(&hid) {
                        acc += wi * hi;
                    }
                    pre[j] = acc;
                }
                let gl = feat(li);
                let ml = &mods[li * h..(li + 1) * h];
                for j in 0..h {
                    hid[j] = pre[j] * gl[j] * ml[j];
                }
            }
            let mut u = out_b;
            for (w, hi) in w_out.iter().zip(&hid) {
                u += w * hi;
            }
            values.push(u);
        }
    }
    Ok(Tensor3::new(dims, values)?)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layers: usize,
    hidden: usize,
    latent_dim: usize,
    omega_scale: f64,
    gamma_scale: f64,
    seed: u64,
    param_count: usize,
}

pub fn write_model(model: &MmgnModel, path: &Path) -> Result<(), MmgnError> {
    let header = serde_json::to_string(&ModelHeader {
        layers: model.arch.layers,
        hidden: model.arch.hidden,
        latent_dim: model.arch.latent_dim,
        omega_scale: model.arch.omega_scale,
        gamma_scale: model.arch.gamma_scale,
        seed: model.seed,
        param_count: model.theta.len(),
    })
    .expect("header serializes");
    fio::write_framed(path, MODEL_MAGIC, &header, &fio::f64s_to_le_bytes(&model.theta))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<MmgnModel, MmgnError> {
    let (header, payload) = fio::read_framed(path, MODEL_MAGIC)?;
    let header: ModelHeader = serde_json::from_str(&header)
        .map_err(|e| FioError::BadHeader(format!("model header: {e}")))?;
    let arch = Architecture {
        layers: header.layers,
        hidden: header.hidden,
        latent_dim: header.latent_dim,
        omega_scale: header.omega_scale,
        gamma_scale: header.gamma_scale,
    };
    arch.validate()?;
    let layout = Layout::new(&arch);
    if header.param_count != layout.total {
        return Err(FioError::BadHeader(format!(
            "param_count {} does not match architecture ({} expected)",
            header.param_count, layout.total
        ))
        .into());
    }
    let theta = fio::f64s_from_le_bytes(&payload, layout.total)?;
    if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
        return Err(MmgnError::Tensor(TensorError::NonFinite(i)));
    }
    Ok(MmgnModel::from_parts(arch, theta, header.seed))
}

/// CSV with header row `t,z0,...,z{k-1}`. Floats are written in shortest
/// round-trip form, so read-back is bitwise.
pub fn write_latents(latents: &LatentMatrix, path: &Path) -> Result<(), MmgnError> {
    let mut out = String::new();
    out.push('t');
    for d in 0..latents.dim() {
        out.push_str(&format!(",z{d}"));
    }
    out.push('\n');
    for t in 0..latents.steps() {
        out.push_str(&t.to_string());
        for v in latents.code(t) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_latents(path: &Path) -> Result<LatentMatrix, MmgnError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| MmgnError::BadLatentsFile("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(MmgnError::BadLatentsFile(format!("bad header `{header}`")));
    }
    let k = cols.len() - 1;
    for (d, name) in cols[1..].iter().enumerate() {
        if *name != format!("z{d}") {
            return Err(MmgnError::BadLatentsFile(format!(
                "expected column z{d}, found `{name}`"
            )));
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != k + 1 {
            return Err(MmgnError::BadLatentsFile(format!(
                "row {idx} has {} fields, expected {}",
                parts.len(),
                k + 1
            )));
        }
        let t: usize = parts[0]
            .parse()
            .map_err(|_| MmgnError::BadLatentsFile(format!("bad t `{}`", parts[0])))?;
        if t != idx {
            return Err(MmgnError::BadLatentsFile(format!(
                "row {idx} is labeled t = {t}; rows must be consecutive from 0"
            )));
        }
        let mut row = Vec::with_capacity(k);
        for p in &parts[1..] {
            row.push(
                p.parse::<f64>()
                    .map_err(|_| MmgnError::BadLatentsFile(format!("bad float `{p}`")))?,
            );
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MmgnError::BadLatentsFile("no latent rows".into()));
    }
    Ok(LatentMatrix::new(Matrix::from_rows(&rows)?))
}
