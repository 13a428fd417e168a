//! Per-dimension latent ablation: error increase per zeroed dimension,
//! temporal/spatial error decomposition, and the spatial attribution map
//! of the most damaging dimension per grid point.

use crate::fio::{self, FioError, FIELD_MAGIC};
use crate::mmgn::{reconstruct_grid, LatentMatrix, MmgnError, MmgnModel};
use crate::rng::SplitMix64;
use crate::tensor::{Matrix, Tensor3, TensorError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("latent dimension {dim} out of range for k = {k}")]
    DimOutOfRange { dim: usize, k: usize },
    #[error("dims mismatch: truth {truth:?} vs requested {requested:?}")]
    DimsMismatch {
        truth: [usize; 3],
        requested: [usize; 3],
    },
    #[error(transparent)]
    Model(#[from] MmgnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    File(#[from] FioError),
}

/// Squared error per grid point between a reconstruction and the truth.
fn squared_error(recon: &Tensor3, truth: &Tensor3) -> Result<Tensor3, AblationError> {
    if recon.dims() != truth.dims() {
        return Err(AblationError::DimsMismatch {
            truth: truth.dims(),
            requested: recon.dims(),
        });
    }
    let values = recon
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .collect();
    Ok(Tensor3::new(recon.dims(), values)?)
}

/// Reconstruct with latent column `dim` zeroed and return the pointwise
/// squared error against the truth.
pub fn ablate_dimension(
    model: &MmgnModel,
    latents: &LatentMatrix,
    dim: usize,
    truth: &Tensor3,
) -> Result<Tensor3, AblationError> {
    if dim >= latents.dim() {
        return Err(AblationError::DimOutOfRange {
            dim,
            k: latents.dim(),
        });
    }
    let ablated = latents.with_column_set(dim, 0.0)?;
    let recon = reconstruct_grid(model, &ablated, truth.dims())?;
    squared_error(&recon, truth)
}

/// Pointwise squared error of the unablated reconstruction.
pub fn baseline_error(
    model: &MmgnModel,
    latents: &LatentMatrix,
    truth: &Tensor3,
) -> Result<Tensor3, AblationError> {
    let recon = reconstruct_grid(model, latents, truth.dims())?;
    squared_error(&recon, truth)
}

/// Split an error tensor into its temporal profile (mean over space per
/// step) and spatial map (mean over time per grid point).
pub fn error_decompose(err: &Tensor3) -> (Vec<f64>, Matrix) {
    let [nt, nlat, nlon] = err.dims();
    let cells = nlat * nlon;
    let mut temporal = vec![0.0; nt];
    let mut spatial = Matrix::zeros(nlat, nlon);
    for t in 0..nt {
        let mut acc = 0.0;
        for i in 0..nlat {
            for j in 0..nlon {
                let v = err.get(t, i, j);
                acc += v;
                spatial.set(i, j, spatial.get(i, j) + v);
            }
        }
        temporal[t] = acc / cells as f64;
    }
    for i in 0..nlat {
        for j in 0..nlon {
            spatial.set(i, j, spatial.get(i, j) / nt as f64);
        }
    }
    (temporal, spatial)
}

/// Ablation outcome for one latent dimension.
#[derive(Clone, Debug)]
pub struct DimAblation {
    pub dim: usize,
    pub total_mse: f64,
    /// e_t: mean squared error over space, per time step.
    pub temporal: Vec<f64>,
    /// e_x: mean squared error over time, per grid point.
    pub spatial: Matrix,
}

/// Baseline error plus one [`DimAblation`] per latent dimension.
#[derive(Clone, Debug)]
pub struct AblationResult {
    pub baseline: Tensor3,
    pub baseline_mse: f64,
    pub per_dim: Vec<DimAblation>,
}

pub fn ablation_report(
    model: &MmgnModel,
    latents: &LatentMatrix,
    truth: &Tensor3,
) -> Result<AblationResult, AblationError> {
    let baseline = baseline_error(model, latents, truth)?;
    let baseline_mse =
        baseline.values().iter().sum::<f64>() / baseline.len() as f64;
    let mut per_dim = Vec::with_capacity(latents.dim());
    for dim in 0..latents.dim() {
        let err = ablate_dimension(model, latents, dim, truth)?;
        let total_mse = err.values().iter().sum::<f64>() / err.len() as f64;
        let (temporal, spatial) = error_decompose(&err);
        per_dim.push(DimAblation {
            dim,
            total_mse,
            temporal,
            spatial,
        });
    }
    Ok(AblationResult {
        baseline,
        baseline_mse,
        per_dim,
    })
}

/// Per-grid-point index of the latent dimension whose ablation does the
/// most spatial damage. Ties break toward the lowest index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributionMap {
    nlat: usize,
    nlon: usize,
    grid: Vec<u32>,
}

impl AttributionMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.nlat, self.nlon)
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.grid[i * self.nlon + j]
    }

    pub fn values(&self) -> &[u32] {
        &self.grid
    }

    pub fn from_grid(nlat: usize, nlon: usize, grid: Vec<u32>) -> Result<Self, AblationError> {
        if grid.len() != nlat * nlon {
            return Err(AblationError::DimsMismatch {
                truth: [0, nlat, nlon],
                requested: [0, grid.len(), 0],
            });
        }
        Ok(Self { nlat, nlon, grid })
    }
}

/// Argmax over dimensions of the per-dim spatial error maps.
pub fn attribution_map(
    model: &MmgnModel,
    latents: &LatentMatrix,
    truth: &Tensor3,
) -> Result<AttributionMap, AblationError> {
    let report = ablation_report(model, latents, truth)?;
    Ok(attribution_from_spatial_maps(&report))
}

/// The definitional argmax, exposed separately so reports computed once
/// can be reduced without re-running reconstructions.
pub fn attribution_from_spatial_maps(report: &AblationResult) -> AttributionMap {
    let [_, nlat, nlon] = report.baseline.dims();
    let mut grid = vec![0u32; nlat * nlon];
    for i in 0..nlat {
        for j in 0..nlon {
            let mut best_dim = 0u32;
            let mut best = f64::NEG_INFINITY;
            for d in &report.per_dim {
                let v = d.spatial.get(i, j);
                if v > best {
                    best = v;
                    best_dim = d.dim as u32;
                }
            }
            grid[i * nlon + j] = best_dim;
        }
    }
    AttributionMap { nlat, nlon, grid }
}

/// Mean fraction of 4-neighbors sharing a cell's label. Spatial coherence
/// of the attribution map is reported against a label-permutation
/// baseline, never asserted.
pub fn spatial_coherence(map: &AttributionMap) -> f64 {
    let (nlat, nlon) = map.dims();
    let mut total = 0.0;
    let mut cells = 0.0;
    for i in 0..nlat {
        for j in 0..nlon {
            let label = map.get(i, j);
            let mut same = 0.0;
            let mut neighbors = 0.0;
            if i > 0 {
                neighbors += 1.0;
                same += (map.get(i - 1, j) == label) as u32 as f64;
            }
            if i + 1 < nlat {
                neighbors += 1.0;
                same += (map.get(i + 1, j) == label) as u32 as f64;
            }
            if j > 0 {
                neighbors += 1.0;
                same += (map.get(i, j - 1) == label) as u32 as f64;
            }
            if j + 1 < nlon {
                neighbors += 1.0;
                same += (map.get(i, j + 1) == label) as u32 as f64;
            }
            total += same / neighbors;
            cells += 1.0;
        }
    }
    total / cells
}

/// Coherence of `n_perms` seeded label permutations of the map; the mean
/// is the chance baseline for [`spatial_coherence`].
pub fn permutation_coherence_baseline(
    map: &AttributionMap,
    n_perms: usize,
    seed: u64,
) -> Vec<f64> {
    let (nlat, nlon) = map.dims();
    let root = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n_perms);
    for p in 0..n_perms {
        let mut rng = root.fork(p as u64);
        let mut grid = map.grid.clone();
        // Fisher-Yates
        for i in (1..grid.len()).rev() {
            let j = rng.below(i + 1);
            grid.swap(i, j);
        }
        let shuffled = AttributionMap { nlat, nlon, grid };
        out.push(spatial_coherence(&shuffled));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct AttrHeader {
    #[serde(rename = "type")]
    kind: String,
    dtype: String,
    dims: [usize; 2],
}

pub fn write_attribution(map: &AttributionMap, path: &Path) -> Result<(), AblationError> {
    let header = serde_json::to_string(&AttrHeader {
        kind: "attr".into(),
        dtype: "u32".into(),
        dims: [map.nlat, map.nlon],
    })
    .expect("header serializes");
    fio::write_framed(path, FIELD_MAGIC, &header, &fio::u32s_to_le_bytes(&map.grid))?;
    Ok(())
}

pub fn read_attribution(path: &Path) -> Result<AttributionMap, AblationError> {
    let (header, payload) = fio::read_framed(path, FIELD_MAGIC)?;
    let header: AttrHeader = serde_json::from_str(&header)
        .map_err(|e| FioError::BadHeader(format!("attribution header: {e}")))?;
    if header.kind != "attr" || header.dtype != "u32" {
        return Err(FioError::BadHeader(format!(
            "expected attr/u32 header, got {}/{}",
            header.kind, header.dtype
        ))
        .into());
    }
    let [nlat, nlon] = header.dims;
    let grid = fio::u32s_from_le_bytes(&payload, nlat * nlon)?;
    Ok(AttributionMap { nlat, nlon, grid })
}

/// JSON shape of the ablation report: baseline MSE plus, per dimension,
/// the total MSE and temporal error profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline_mse: f64,
    pub per_dim: Vec<AblationDimReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationDimReport {
    pub dim: usize,
    pub total_mse: f64,
    pub e_t: Vec<f64>,
}

impl AblationReport {
    pub fn from_result(result: &AblationResult) -> Self {
        Self {
            baseline_mse: result.baseline_mse,
            per_dim: result
                .per_dim
                .iter()
                .map(|d| AblationDimReport {
                    dim: d.dim,
                    total_mse: d.total_mse,
                    e_t: d.temporal.clone(),
                })
                .collect(),
        }
    }
}
