//! Joint decoder/latent optimization (full-batch Adam with manual
//! backpropagation) and test-time latent inference against a frozen decoder.

use super::{Architecture, LatentMatrix, Layout, MmgnError, MmgnModel, TrainConfig};
use crate::fieldgen::{grid_coord, Observation, ObservationSet};
use crate::rng::SplitMix64;
use crate::tensor::Matrix;

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: MmgnModel,
    pub latents: LatentMatrix,
    /// Total loss (data term + latent regularizer), sampled every epoch
    /// before that epoch's update.
    pub loss_history: Vec<f64>,
    /// Data-term MSE of the returned parameters.
    pub final_data_mse: f64,
    /// Total loss of the returned parameters.
    pub final_loss: f64,
}

/// Flattened training set: per frame, normalized coordinates and targets.
struct FrameBatch {
    coords: Vec<[f64; 2]>,
    targets: Vec<f64>,
}

fn flatten_frames(obs: &ObservationSet) -> Vec<FrameBatch> {
    let [_, nlat, nlon] = obs.dims();
    obs.frames()
        .iter()
        .map(|frame| FrameBatch {
            coords: frame
                .iter()
                .map(|o| [grid_coord(o.lat as usize, nlat), grid_coord(o.lon as usize, nlon)])
                .collect(),
            targets: frame.iter().map(|o| o.value).collect(),
        })
        .collect()
}

/// Per-point intermediate state, allocated once and reused.
struct Scratch {
    env: Vec<f64>,
    sinv: Vec<f64>,
    cosv: Vec<f64>,
    dsq: Vec<f64>,
    gab: Vec<f64>,
    hid: Vec<f64>,
    pre: Vec<f64>,
    mods: Vec<f64>,
    dldm: Vec<f64>,
    v: Vec<f64>,
    v_next: Vec<f64>,
    dp: Vec<f64>,
    dg: Vec<f64>,
}

impl Scratch {
    fn new(layers: usize, hidden: usize) -> Self {
        let lh = layers * hidden;
        Self {
            env: vec![0.0; lh],
            sinv: vec![0.0; lh],
            cosv: vec![0.0; lh],
            dsq: vec![0.0; lh],
            gab: vec![0.0; lh],
            hid: vec![0.0; lh],
            pre: vec![0.0; lh],
            mods: vec![0.0; lh],
            dldm: vec![0.0; lh],
            v: vec![0.0; hidden],
            v_next: vec![0.0; hidden],
            dp: vec![0.0; hidden],
            dg: vec![0.0; hidden],
        }
    }
}

/// Forward pass at one point, filling the scratch intermediates
/// (Gabor envelope/sin/cos, pre-activations, hidden states). `s.mods`
/// must already hold the modulation vectors for the point's frame.
fn point_forward(theta: &[f64], lo: &Layout, x: [f64; 2], s: &mut Scratch) -> f64 {
    let h = lo.hidden;
    let l = lo.layers;
    for li in 0..l {
        let mu = &theta[lo.gabor_mu[li]..lo.gabor_mu[li] + 2 * h];
        let ga = &theta[lo.gabor_gamma[li]..lo.gabor_gamma[li] + h];
        let om = &theta[lo.gabor_omega[li]..lo.gabor_omega[li] + 2 * h];
        let ph = &theta[lo.gabor_phase[li]..lo.gabor_phase[li] + h];
        let base = li * h;
        for j in 0..h {
            let dx = x[0] - mu[2 * j];
            let dy = x[1] - mu[2 * j + 1];
            let dsq = dx * dx + dy * dy;
            let env = (-0.5 * ga[j] * dsq).exp();
            let arg = om[2 * j] * x[0] + om[2 * j + 1] * x[1] + ph[j];
            let (sv, cv) = arg.sin_cos();
            s.dsq[base + j] = dsq;
            s.env[base + j] = env;
            s.sinv[base + j] = sv;
            s.cosv[base + j] = cv;
            s.gab[base + j] = env * sv;
        }
    }
    for j in 0..h {
        s.hid[j] = s.gab[j] * s.mods[j];
    }
    for li in 1..l {
        let w = &theta[lo.linear_w[li - 1]..lo.linear_w[li - 1] + h * h];
        let b = &theta[lo.linear_b[li - 1]..lo.linear_b[li - 1] + h];
        let base = li * h;
        let prev = (li - 1) * h;
        for j in 0..h {
            let row = &w[j * h..(j + 1) * h];
            let mut acc = b[j];
            for i in 0..h {
                acc += row[i] * s.hid[prev + i];
            }
            s.pre[base + j] = acc;
        }
        for j in 0..h {
            s.hid[base + j] = s.pre[base + j] * s.gab[base + j] * s.mods[base + j];
        }
    }
    let w_out = &theta[lo.out_w..lo.out_w + h];
    let last = (l - 1) * h;
    let mut u = theta[lo.out_b];
    for j in 0..h {
        u += w_out[j] * s.hid[last + j];
    }
    u
}

/// Backward pass at one point. Accumulates decoder gradients into `grad`
/// and per-layer modulation gradients into `s.dldm` (frame-level state);
/// `delta` is dLoss/du.
fn point_backward_full(theta: &[f64], lo: &Layout, x: [f64; 2], delta: f64, grad: &mut [f64], s: &mut Scratch) {
    let h = lo.hidden;
    let l = lo.layers;
    let last = (l - 1) * h;
    {
        let w_out = &theta[lo.out_w..lo.out_w + h];
        for j in 0..h {
            grad[lo.out_w + j] += delta * s.hid[last + j];
            s.v[j] = delta * w_out[j];
        }
        grad[lo.out_b] += delta;
    }
    for li in (0..l).rev() {
        let base = li * h;
        if li > 0 {
            for j in 0..h {
                let gm = s.gab[base + j] * s.mods[base + j];
                s.dp[j] = s.v[j] * gm;
                s.dg[j] = s.v[j] * s.pre[base + j] * s.mods[base + j];
                s.dldm[base + j] += s.v[j] * s.pre[base + j] * s.gab[base + j];
            }
        } else {
            for j in 0..h {
                s.dg[j] = s.v[j] * s.mods[j];
                s.dldm[j] += s.v[j] * s.gab[j];
            }
        }
        gabor_backward(theta, lo, li, x, &s.dg, &s.env, &s.sinv, &s.cosv, &s.dsq, grad);
        if li > 0 {
            let w = &theta[lo.linear_w[li - 1]..lo.linear_w[li - 1] + h * h];
            let prev = (li - 1) * h;
            s.v_next.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h {
                let d = s.dp[j];
                grad[lo.linear_b[li - 1] + j] += d;
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[lo.linear_w[li - 1] + j * h..lo.linear_w[li - 1] + (j + 1) * h];
                let row = &w[j * h..(j + 1) * h];
                for i in 0..h {
                    gw[i] += d * s.hid[prev + i];
                    s.v_next[i] += row[i] * d;
                }
            }
            std::mem::swap(&mut s.v, &mut s.v_next);
        }
    }
}

/// Backward pass that only tracks modulation sensitivities (for latent-only
/// optimization against a frozen decoder).
fn point_backward_latent(theta: &[f64], lo: &Layout, delta: f64, s: &mut Scratch) {
    let h = lo.hidden;
    let l = lo.layers;
    {
        let w_out = &theta[lo.out_w..lo.out_w + h];
        for j in 0..h {
            s.v[j] = delta * w_out[j];
        }
    }
    for li in (0..l).rev() {
        let base = li * h;
        if li > 0 {
            for j in 0..h {
                s.dp[j] = s.v[j] * s.gab[base + j] * s.mods[base + j];
                s.dldm[base + j] += s.v[j] * s.pre[base + j] * s.gab[base + j];
            }
            let w = &theta[lo.linear_w[li - 1]..lo.linear_w[li - 1] + h * h];
            s.v_next.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h {
                let d = s.dp[j];
                if d == 0.0 {
                    continue;
                }
                let row = &w[j * h..(j + 1) * h];
                for i in 0..h {
                    s.v_next[i] += row[i] * d;
                }
            }
            std::mem::swap(&mut s.v, &mut s.v_next);
        } else {
            for j in 0..h {
                s.dldm[j] += s.v[j] * s.gab[j];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gabor_backward(
    theta: &[f64],
    lo: &Layout,
    li: usize,
    x: [f64; 2],
    dg: &[f64],
    env: &[f64],
    sinv: &[f64],
    cosv: &[f64],
    dsq: &[f64],
    grad: &mut [f64],
) {
    let h = lo.hidden;
    let base = li * h;
    let mu = &theta[lo.gabor_mu[li]..lo.gabor_mu[li] + 2 * h];
    let ga = &theta[lo.gabor_gamma[li]..lo.gabor_gamma[li] + h];
    for j in 0..h {
        let d = dg[j];
        if d == 0.0 {
            continue;
        }
        let e = env[base + j];
        let d_arg = d * e * cosv[base + j];
        grad[lo.gabor_phase[li] + j] += d_arg;
        grad[lo.gabor_omega[li] + 2 * j] += d_arg * x[0];
        grad[lo.gabor_omega[li] + 2 * j + 1] += d_arg * x[1];
        // env = exp(q), q = -gamma/2 * |x-mu|^2
        let d_q = d * e * sinv[base + j];
        grad[lo.gabor_gamma[li] + j] += d_q * (-0.5) * dsq[base + j];
        let coef = d_q * ga[j];
        grad[lo.gabor_mu[li] + 2 * j] += coef * (x[0] - mu[2 * j]);
        grad[lo.gabor_mu[li] + 2 * j + 1] += coef * (x[1] - mu[2 * j + 1]);
    }
}

fn fill_mods(theta: &[f64], lo: &Layout, z: &[f64], mods: &mut [f64]) {
    let h = lo.hidden;
    let k = lo.latent_dim;
    for li in 0..lo.layers {
        let a = &theta[lo.modulation[li]..lo.modulation[li] + h * k];
        for j in 0..h {
            let row = &a[j * k..(j + 1) * k];
            let mut acc = 1.0;
            for d in 0..k {
                acc += row[d] * z[d];
            }
            mods[li * h + j] = acc;
        }
    }
}

/// One full-batch pass: total loss plus gradients for decoder parameters
/// and every latent row. The data term is (1/N) sum of squared residuals,
/// the regularizer lambda/T * sum |z_t|^2.
fn epoch_pass(
    theta: &[f64],
    lo: &Layout,
    latents: &[f64],
    frames: &[FrameBatch],
    lambda: f64,
    grad_theta: &mut [f64],
    grad_lat: &mut [f64],
    s: &mut Scratch,
) -> f64 {
    let h = lo.hidden;
    let k = lo.latent_dim;
    let l = lo.layers;
    let nt = frames.len();
    let n_total: usize = frames.iter().map(|f| f.targets.len()).sum();
    grad_theta.iter_mut().for_each(|g| *g = 0.0);
    grad_lat.iter_mut().for_each(|g| *g = 0.0);
    let mut sq_sum = 0.0;
    for (t, frame) in frames.iter().enumerate() {
        let z = &latents[t * k..(t + 1) * k];
        fill_mods(theta, lo, z, &mut s.mods);
        s.dldm.iter_mut().for_each(|v| *v = 0.0);
        for (x, y) in frame.coords.iter().zip(&frame.targets) {
            let u = point_forward(theta, lo, *x, s);
            let resid = u - y;
            sq_sum += resid * resid;
            let delta = 2.0 * resid / n_total as f64;
            point_backward_full(theta, lo, *x, delta, grad_theta, s);
        }
        // frame-level rank-1 updates for the modulation projections and z
        let gz = &mut grad_lat[t * k..(t + 1) * k];
        for li in 0..l {
            let a = &theta[lo.modulation[li]..lo.modulation[li] + h * k];
            let ga = &mut grad_theta[lo.modulation[li]..lo.modulation[li] + h * k];
            for j in 0..h {
                let dm = s.dldm[li * h + j];
                if dm == 0.0 {
                    continue;
                }
                let arow = &a[j * k..(j + 1) * k];
                let garow = &mut ga[j * k..(j + 1) * k];
                for d in 0..k {
                    garow[d] += dm * z[d];
                    gz[d] += arow[d] * dm;
                }
            }
        }
        let reg_coef = 2.0 * lambda / nt as f64;
        for d in 0..k {
            gz[d] += reg_coef * z[d];
        }
    }
    let reg: f64 = latents.iter().map(|z| z * z).sum::<f64>() * lambda / nt as f64;
    sq_sum / n_total as f64 + reg
}

/// Loss only (no gradients), same arithmetic as the training pass.
fn loss_pass(
    theta: &[f64],
    lo: &Layout,
    latents: &[f64],
    frames: &[FrameBatch],
    lambda: f64,
    s: &mut Scratch,
) -> (f64, f64) {
    let k = lo.latent_dim;
    let nt = frames.len();
    let n_total: usize = frames.iter().map(|f| f.targets.len()).sum();
    let mut sq_sum = 0.0;
    for (t, frame) in frames.iter().enumerate() {
        let z = &latents[t * k..(t + 1) * k];
        fill_mods(theta, lo, z, &mut s.mods);
        for (x, y) in frame.coords.iter().zip(&frame.targets) {
            let u = point_forward(theta, lo, *x, s);
            let resid = u - y;
            sq_sum += resid * resid;
        }
    }
    let data_mse = sq_sum / n_total as f64;
    let reg: f64 = latents.iter().map(|z| z * z).sum::<f64>() * lambda / nt as f64;
    (data_mse + reg, data_mse)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    lr0: f64,
    total_steps: usize,
}

impl Adam {
    fn new(n: usize, cfg: &TrainConfig, total_steps: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            lr0: cfg.learning_rate,
            total_steps,
        }
    }

    /// Cosine-annealed learning rate: starts at the configured value and
    /// decays to 2% of it by the final step. The annealing tail is what
    /// keeps the late-phase epoch losses from bouncing around the valley
    /// floor.
    fn lr_at(&self, t: usize) -> f64 {
        if self.total_steps <= 1 {
            return self.lr0;
        }
        let floor = 0.02 * self.lr0;
        let progress = (t - 1) as f64 / (self.total_steps - 1) as f64;
        floor + (self.lr0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }

    fn step(&mut self, t: usize, params: &mut [f64], grads: &[f64]) {
        let lr = self.lr_at(t);
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Initialize decoder parameters. The backbone (Gabor banks, linears,
/// output head) draws from `rng` in a k-independent order, so latent-size
/// sweeps with a shared seed start from the same backbone and differ only
/// in the modulation projections; that keeps the size-vs-error curve from
/// being dominated by init jitter.
fn init_theta(arch: &Architecture, lo: &Layout, rng: &mut SplitMix64) -> Vec<f64> {
    let (l, h, k) = (arch.layers, arch.hidden, arch.latent_dim);
    let mut theta = vec![0.0; lo.total];
    for li in 0..l {
        for v in &mut theta[lo.gabor_mu[li]..lo.gabor_mu[li] + 2 * h] {
            *v = rng.uniform(-1.0, 1.0);
        }
        for v in &mut theta[lo.gabor_gamma[li]..lo.gabor_gamma[li] + h] {
            *v = rng.normal().abs() * arch.gamma_scale;
        }
        let freq = arch.omega_scale * (li + 1) as f64 / l as f64;
        for v in &mut theta[lo.gabor_omega[li]..lo.gabor_omega[li] + 2 * h] {
            *v = rng.normal() * freq;
        }
        for v in &mut theta[lo.gabor_phase[li]..lo.gabor_phase[li] + h] {
            *v = rng.uniform(0.0, std::f64::consts::TAU);
        }
    }
    let w_bound = (1.0 / h as f64).sqrt();
    for li in 0..l.saturating_sub(1) {
        for v in &mut theta[lo.linear_w[li]..lo.linear_w[li] + h * h] {
            *v = rng.uniform(-w_bound, w_bound);
        }
        // biases start at zero
    }
    for v in &mut theta[lo.out_w..lo.out_w + h] {
        *v = rng.uniform(-w_bound, w_bound);
    }
    theta[lo.out_b] = 0.0;
    let mut mod_rng = rng.fork(0x6d6f64);
    let a_bound = (1.0 / k as f64).sqrt();
    for li in 0..l {
        for v in &mut theta[lo.modulation[li]..lo.modulation[li] + h * k] {
            *v = mod_rng.uniform(-a_bound, a_bound);
        }
    }
    theta
}

fn clamp_gammas(theta: &mut [f64], lo: &Layout) {
    for li in 0..lo.layers {
        for v in &mut theta[lo.gabor_gamma[li]..lo.gabor_gamma[li] + lo.hidden] {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

/// Jointly optimize decoder parameters and one latent code per frame with
/// full-batch Adam. Deterministic given (obs, cfg, arch).
pub fn train(
    obs: &ObservationSet,
    cfg: &TrainConfig,
    arch: &Architecture,
) -> Result<TrainOutput, MmgnError> {
    arch.validate()?;
    cfg.validate()?;
    if obs.total_count() == 0 {
        return Err(MmgnError::EmptyObservations);
    }
    let lo = Layout::new(arch);
    let nt = obs.dims()[0];
    let k = arch.latent_dim;
    let root = SplitMix64::new(cfg.seed);
    let mut theta = init_theta(arch, &lo, &mut root.fork(0));
    let mut latents = {
        let mut rng = root.fork(1);
        (0..nt * k)
            .map(|_| rng.normal() * cfg.latent_init_stddev)
            .collect::<Vec<f64>>()
    };
    let frames = flatten_frames(obs);
    let mut grad_theta = vec![0.0; lo.total];
    let mut grad_lat = vec![0.0; nt * k];
    let mut scratch = Scratch::new(arch.layers, arch.hidden);
    let mut adam_theta = Adam::new(lo.total, cfg, cfg.epochs);
    let mut adam_lat = Adam::new(nt * k, cfg, cfg.epochs);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss = epoch_pass(
            &theta,
            &lo,
            &latents,
            &frames,
            cfg.latent_l2,
            &mut grad_theta,
            &mut grad_lat,
            &mut scratch,
        );
        if !loss.is_finite() {
            return Err(MmgnError::NonFiniteLoss { epoch, loss });
        }
        history.push(loss);
        adam_theta.step(epoch + 1, &mut theta, &grad_theta);
        adam_lat.step(epoch + 1, &mut latents, &grad_lat);
        clamp_gammas(&mut theta, &lo);
    }
    let (final_loss, final_data_mse) =
        loss_pass(&theta, &lo, &latents, &frames, cfg.latent_l2, &mut scratch);
    if !final_loss.is_finite() {
        return Err(MmgnError::NonFiniteLoss {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    let codes = Matrix::new(nt, k, latents)?;
    Ok(TrainOutput {
        model: MmgnModel::from_parts(arch.clone(), theta, cfg.seed),
        latents: LatentMatrix::new(codes),
        loss_history: history,
        final_data_mse,
        final_loss,
    })
}

/// Training loss of an existing model/latents pair on an observation set;
/// same arithmetic as the training loop's epoch loss.
pub fn training_loss(
    model: &MmgnModel,
    latents: &LatentMatrix,
    obs: &ObservationSet,
    lambda: f64,
) -> Result<(f64, f64), MmgnError> {
    check_pair(model, latents, obs)?;
    let frames = flatten_frames(obs);
    let mut scratch = Scratch::new(model.layers(), model.hidden());
    Ok(loss_pass(
        &model.theta,
        &model.layout,
        latents.matrix().values(),
        &frames,
        lambda,
        &mut scratch,
    ))
}

/// Full-batch loss and analytic gradients for every decoder parameter and
/// every latent entry. The gradient check suites compare this against
/// central finite differences of [`training_loss`].
pub fn loss_gradients(
    model: &MmgnModel,
    latents: &LatentMatrix,
    obs: &ObservationSet,
    lambda: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), MmgnError> {
    check_pair(model, latents, obs)?;
    let frames = flatten_frames(obs);
    let mut scratch = Scratch::new(model.layers(), model.hidden());
    let mut grad_theta = vec![0.0; model.layout.total];
    let mut grad_lat = vec![0.0; latents.steps() * latents.dim()];
    let loss = epoch_pass(
        &model.theta,
        &model.layout,
        latents.matrix().values(),
        &frames,
        lambda,
        &mut grad_theta,
        &mut grad_lat,
        &mut scratch,
    );
    Ok((loss, grad_theta, grad_lat))
}

fn check_pair(model: &MmgnModel, latents: &LatentMatrix, obs: &ObservationSet) -> Result<(), MmgnError> {
    if obs.total_count() == 0 {
        return Err(MmgnError::EmptyObservations);
    }
    if latents.dim() != model.latent_dim() {
        return Err(MmgnError::DimMismatch(format!(
            "latent dim {} vs model k = {}",
            latents.dim(),
            model.latent_dim()
        )));
    }
    if latents.steps() != obs.dims()[0] {
        return Err(MmgnError::DimMismatch(format!(
            "latents rows {} vs observation frames {}",
            latents.steps(),
            obs.dims()[0]
        )));
    }
    Ok(())
}

/// Optimize a latent code for a single frame of observations against a
/// frozen decoder: argmin over z of mean squared residual + lambda |z|^2.
/// Starts from z = 0 (the modulation-neutral code) and runs `cfg.epochs`
/// Adam iterations; zero iterations returns the initialization.
pub fn infer_latent(
    model: &MmgnModel,
    frame: &[Observation],
    grid: (usize, usize),
    cfg: &TrainConfig,
) -> Result<Vec<f64>, MmgnError> {
    cfg.validate()?;
    if frame.is_empty() {
        return Err(MmgnError::EmptyObservations);
    }
    let lo = &model.layout;
    let k = model.latent_dim();
    let (nlat, nlon) = grid;
    let coords: Vec<[f64; 2]> = frame
        .iter()
        .map(|o| [grid_coord(o.lat as usize, nlat), grid_coord(o.lon as usize, nlon)])
        .collect();
    let targets: Vec<f64> = frame.iter().map(|o| o.value).collect();
    let n = targets.len() as f64;
    let mut z = vec![0.0; k];
    let mut grad_z = vec![0.0; k];
    let mut scratch = Scratch::new(model.layers(), model.hidden());
    let mut adam = Adam::new(k, cfg, cfg.epochs);
    let h = model.hidden();
    for iter in 0..cfg.epochs {
        fill_mods(&model.theta, lo, &z, &mut scratch.mods);
        scratch.dldm.iter_mut().for_each(|v| *v = 0.0);
        grad_z.iter_mut().for_each(|v| *v = 0.0);
        let mut sq_sum = 0.0;
        for (x, y) in coords.iter().zip(&targets) {
            let u = point_forward(&model.theta, lo, *x, &mut scratch);
            let resid = u - y;
            sq_sum += resid * resid;
            point_backward_latent(&model.theta, lo, 2.0 * resid / n, &mut scratch);
        }
        let loss = sq_sum / n + cfg.latent_l2 * z.iter().map(|v| v * v).sum::<f64>();
        if !loss.is_finite() {
            return Err(MmgnError::NonFiniteLoss { epoch: iter, loss });
        }
        for li in 0..model.layers() {
            let a = &model.theta[lo.modulation[li]..lo.modulation[li] + h * k];
            for j in 0..h {
                let dm = scratch.dldm[li * h + j];
                if dm == 0.0 {
                    continue;
                }
                let arow = &a[j * k..(j + 1) * k];
                for d in 0..k {
                    grad_z[d] += arow[d] * dm;
                }
            }
        }
        for d in 0..k {
            grad_z[d] += 2.0 * cfg.latent_l2 * z[d];
        }
        adam.step(iter + 1, &mut z, &grad_z);
    }
    Ok(z)
}
