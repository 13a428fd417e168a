//! One function per CLI sub-command. Every command that writes reports
//! also writes a `<output>.manifest.json` reproducibility record; outputs
//! registered with [`Outputs`] are removed by the dispatcher if the
//! command fails partway.

use crate::args::{parse, parse_grid, parse_path_list, parse_usize_list, Flags};
use crate::manifest::ManifestBuilder;
use crate::plot;
use crate::{CliError, Outputs};
use anyhow::{anyhow, Context, Result};
use latentscope_core::ablation::{
    ablation_report, attribution_from_spatial_maps, permutation_coherence_baseline,
    spatial_coherence, write_attribution, AblationReport,
};
use latentscope_core::corr::{cca, pca_evr, CcaReport, PcaReportEntry};
use latentscope_core::embed::{embed_and_cluster, spread_sweep, SpaceLabel, SweepSettings};
use latentscope_core::fieldgen::{
    generate_field, read_field, read_observations, sample_observations, write_field,
    write_observations, FieldConfig,
};
use latentscope_core::mmgn::{
    read_latents, read_model, reconstruct_grid, train, write_latents, write_model, Architecture,
    TrainConfig,
};
use latentscope_core::tensor::Matrix;
use latentscope_core::tucker::{
    compare_factors, entropy_sweep, tucker_hooi, EntropyNormalization, DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn usage_err(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn field_config_from(flags: &Flags) -> Result<FieldConfig, String> {
    let seed = flags.parse_or("seed", 0u64)?;
    let mut cfg = FieldConfig::desk_default(seed);
    if let Some(grid) = flags.get("grid") {
        let (nlat, nlon) = parse_grid(grid)?;
        cfg.nlat = nlat;
        cfg.nlon = nlon;
    }
    cfg.nt = flags.parse_or("steps", cfg.nt)?;
    cfg.noise_stddev = flags.parse_or("noise", cfg.noise_stddev)?;
    cfg.meridional_gradient = flags.parse_or("gradient", cfg.meridional_gradient)?;
    cfg.seasonal_amplitude = flags.parse_or("seasonal", cfg.seasonal_amplitude)?;
    cfg.seasonal_period = flags.parse_or("period", cfg.seasonal_period)?;
    Ok(cfg)
}

pub fn gen(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(
        args,
        &["out", "grid", "steps", "seed", "noise", "gradient", "seasonal", "period"],
        &[],
    )
    .map_err(usage_err)?;
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let cfg = field_config_from(&flags).map_err(usage_err)?;
    let manifest = ManifestBuilder::new(argv);
    let field = generate_field(&cfg).context("generating field")?;
    outputs.track(&out);
    write_field(&field, &out).context("writing field file")?;
    let manifest_path = manifest
        .write(&out, serde_json::to_value(&cfg).expect("config serializes"))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

pub fn sample(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, &["field", "rate", "seed", "out"], &[]).map_err(usage_err)?;
    let field_path: PathBuf = flags.require("field").map_err(usage_err)?.into();
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let rate: f64 = flags.parse_require("rate").map_err(usage_err)?;
    let seed: u64 = flags.parse_or("seed", 0u64).map_err(usage_err)?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&field_path);
    let field = read_field(&field_path).context("reading field")?;
    let obs = sample_observations(&field, rate, seed).context("sampling observations")?;
    outputs.track(&out);
    write_observations(&obs, &out).context("writing observations")?;
    let manifest_path = manifest
        .write(&out, json!({"rate": rate, "seed": seed}))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

fn train_config_from(flags: &Flags) -> Result<TrainConfig, String> {
    let mut cfg = TrainConfig {
        seed: flags.parse_or("seed", 0u64)?,
        ..TrainConfig::default()
    };
    cfg.epochs = flags.parse_or("epochs", cfg.epochs)?;
    cfg.learning_rate = flags.parse_or("lr", cfg.learning_rate)?;
    cfg.latent_l2 = flags.parse_or("lambda", cfg.latent_l2)?;
    Ok(cfg)
}

fn architecture_from(flags: &Flags, k: usize) -> Result<Architecture, String> {
    let mut arch = Architecture::desk_default(k);
    arch.layers = flags.parse_or("layers", arch.layers)?;
    arch.hidden = flags.parse_or("hidden", arch.hidden)?;
    arch.omega_scale = flags.parse_or("omega-scale", arch.omega_scale)?;
    arch.gamma_scale = flags.parse_or("gamma-scale", arch.gamma_scale)?;
    Ok(arch)
}

#[derive(Serialize)]
struct TrainReport {
    k: usize,
    epochs: usize,
    final_loss: f64,
    final_data_mse: f64,
    loss_history: Vec<f64>,
}

const TRAIN_FLAGS: &[&str] = &[
    "obs",
    "k",
    "epochs",
    "lr",
    "lambda",
    "layers",
    "hidden",
    "omega-scale",
    "gamma-scale",
    "seed",
    "out-model",
    "out-latents",
    "out-report",
];

pub fn train_cmd(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, TRAIN_FLAGS, &[]).map_err(usage_err)?;
    let obs_path: PathBuf = flags.require("obs").map_err(usage_err)?.into();
    let k: usize = flags.parse_require("k").map_err(usage_err)?;
    let out_model: PathBuf = flags.require("out-model").map_err(usage_err)?.into();
    let out_latents: PathBuf = flags.require("out-latents").map_err(usage_err)?.into();
    let cfg = train_config_from(&flags).map_err(usage_err)?;
    let arch = architecture_from(&flags, k).map_err(usage_err)?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&obs_path);
    let obs = read_observations(&obs_path).context("reading observations")?;
    let out = train(&obs, &cfg, &arch).context("training")?;
    outputs.track(&out_model);
    write_model(&out.model, &out_model).context("writing model")?;
    outputs.track(&out_latents);
    write_latents(&out.latents, &out_latents).context("writing latents")?;
    if let Some(report_path) = flags.get("out-report") {
        let report_path = PathBuf::from(report_path);
        let report = TrainReport {
            k,
            epochs: cfg.epochs,
            final_loss: out.final_loss,
            final_data_mse: out.final_data_mse,
            loss_history: out.loss_history.clone(),
        };
        outputs.track(&report_path);
        std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
            .context("writing train report")?;
    }
    let manifest_path = manifest
        .write(
            &out_model,
            json!({
                "k": k,
                "train": serde_json::to_value(&cfg).expect("config serializes"),
                "architecture": serde_json::to_value(&arch).expect("arch serializes"),
            }),
        )
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

pub fn reconstruct(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, &["model", "latents", "grid", "out"], &[]).map_err(usage_err)?;
    let model_path: PathBuf = flags.require("model").map_err(usage_err)?.into();
    let latents_path: PathBuf = flags.require("latents").map_err(usage_err)?.into();
    let (nlat, nlon) = parse_grid(flags.require("grid").map_err(usage_err)?).map_err(usage_err)?;
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&model_path);
    manifest.input(&latents_path);
    let model = read_model(&model_path).context("reading model")?;
    let latents = read_latents(&latents_path).context("reading latents")?;
    let recon = reconstruct_grid(&model, &latents, [latents.steps(), nlat, nlon])
        .context("reconstructing grid")?;
    outputs.track(&out);
    write_field(&recon, &out).context("writing reconstruction")?;
    let manifest_path = manifest
        .write(&out, json!({"grid": [nlat, nlon]}))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn write_embedding_csv(
    path: &Path,
    emb: &latentscope_core::embed::Embedding2D,
    labels: &[usize],
) -> Result<()> {
    let mut text = String::from("t,x,y,cluster\n");
    for t in 0..emb.points.rows() {
        let _ = writeln!(
            text,
            "{t},{},{},{}",
            emb.points.get(t, 0),
            emb.points.get(t, 1),
            labels[t]
        );
    }
    std::fs::write(path, text)?;
    Ok(())
}

const EMBED_FLAGS: &[&str] = &[
    "latents",
    "field",
    "out-dir",
    "perplexity",
    "clusters",
    "tsne-iters",
    "restarts",
    "seed",
];

pub fn analyze_embed(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, EMBED_FLAGS, &["cluster-raw"]).map_err(usage_err)?;
    let latent_paths = parse_path_list(flags.require("latents").map_err(usage_err)?);
    if latent_paths.is_empty() {
        return Err(usage_err("--latents needs at least one file".into()));
    }
    let field_path: PathBuf = flags.require("field").map_err(usage_err)?.into();
    let out_dir: PathBuf = flags.require("out-dir").map_err(usage_err)?.into();
    std::fs::create_dir_all(&out_dir).context("creating output dir")?;
    let settings = SweepSettings {
        perplexity: flags.parse_or("perplexity", 10.0).map_err(usage_err)?,
        tsne_iters: flags.parse_or("tsne-iters", 1000).map_err(usage_err)?,
        clusters: flags.parse_or("clusters", 6).map_err(usage_err)?,
        restarts: flags.parse_or("restarts", 8).map_err(usage_err)?,
        seed: flags.parse_or("seed", 0u64).map_err(usage_err)?,
        cluster_raw: flags.bool("cluster-raw"),
    };
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&field_path);
    let field = read_field(&field_path).context("reading field")?;
    let original = field.frames_as_rows();
    let mut spaces: Vec<(usize, Matrix, String)> = Vec::new();
    for path in &latent_paths {
        manifest.input(path);
        let latents = read_latents(path).with_context(|| format!("reading {}", path.display()))?;
        spaces.push((latents.dim(), latents.into_matrix(), stem_of(path)));
    }
    spaces.sort_by_key(|(dim, _, _)| *dim);
    for (dim, matrix, stem) in &spaces {
        let (emb, stats) =
            embed_and_cluster(matrix, &settings).with_context(|| format!("embedding k={dim}"))?;
        let path = out_dir.join(format!("embed_{stem}.csv"));
        outputs.track(&path);
        write_embedding_csv(&path, &emb, &stats.labels)?;
    }
    let (emb, stats) = embed_and_cluster(&original, &settings).context("embedding original data")?;
    let original_csv = out_dir.join("embed_original.csv");
    outputs.track(&original_csv);
    write_embedding_csv(&original_csv, &emb, &stats.labels)?;
    if spaces.len() >= 2 {
        let pairs: Vec<(usize, Matrix)> =
            spaces.iter().map(|(d, m, _)| (*d, m.clone())).collect();
        let summary = spread_sweep(&pairs, &original, &settings).context("spread sweep")?;
        let path = out_dir.join("spread_summary.json");
        outputs.track(&path);
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
            .context("writing spread summary")?;
    }
    let manifest_path = manifest
        .write(
            &out_dir.join("analyze-embed"),
            json!({
                "perplexity": settings.perplexity,
                "tsne_iters": settings.tsne_iters,
                "clusters": settings.clusters,
                "restarts": settings.restarts,
                "seed": settings.seed,
                "cluster_raw": settings.cluster_raw,
            }),
        )
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

pub fn analyze_pca(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, &["latents", "field", "out"], &[]).map_err(usage_err)?;
    let latent_paths = parse_path_list(flags.require("latents").map_err(usage_err)?);
    if latent_paths.is_empty() {
        return Err(usage_err("--latents needs at least one file".into()));
    }
    let field_path: PathBuf = flags.require("field").map_err(usage_err)?.into();
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&field_path);
    let mut entries: Vec<(usize, PcaReportEntry)> = Vec::new();
    for path in &latent_paths {
        manifest.input(path);
        let latents = read_latents(path).with_context(|| format!("reading {}", path.display()))?;
        let result = pca_evr(latents.matrix()).with_context(|| format!("PCA on {}", path.display()))?;
        entries.push((
            latents.dim(),
            PcaReportEntry {
                latent_dim: SpaceLabel::Latent(latents.dim()),
                ratios: result.ratios,
            },
        ));
    }
    entries.sort_by_key(|(dim, _)| *dim);
    let field = read_field(&field_path).context("reading field")?;
    let original = pca_evr(&field.frames_as_rows()).context("PCA on original data")?;
    let mut report: Vec<PcaReportEntry> = entries.into_iter().map(|(_, e)| e).collect();
    report.push(PcaReportEntry {
        latent_dim: SpaceLabel::Original,
        ratios: original.ratios,
    });
    outputs.track(&out);
    std::fs::write(&out, serde_json::to_string_pretty(&report)?).context("writing PCA report")?;
    let manifest_path = manifest
        .write(&out, json!({"spaces": report.len()}))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

pub fn analyze_cca(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, &["latents-a", "latents-b", "field", "ridge", "out"], &[])
        .map_err(usage_err)?;
    let a_path: PathBuf = flags.require("latents-a").map_err(usage_err)?.into();
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let ridge: f64 = flags.parse_or("ridge", 1e-8).map_err(usage_err)?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&a_path);
    let a = read_latents(&a_path).context("reading latents-a")?;
    let (b_matrix, b_name) = match (flags.get("latents-b"), flags.get("field")) {
        (Some(b_path), None) => {
            let b_path = PathBuf::from(b_path);
            manifest.input(&b_path);
            let b = read_latents(&b_path).context("reading latents-b")?;
            (b.into_matrix(), stem_of(&b_path))
        }
        (None, Some(field_path)) => {
            let field_path = PathBuf::from(field_path);
            manifest.input(&field_path);
            let field = read_field(&field_path).context("reading field")?;
            (field.frames_as_rows(), "original".to_string())
        }
        _ => {
            return Err(usage_err(
                "provide exactly one of --latents-b or --field as the second set".into(),
            ))
        }
    };
    let result = cca(a.matrix(), &b_matrix, ridge).context("CCA")?;
    let report = CcaReport {
        pair: [stem_of(&a_path), b_name],
        correlations: result.correlations,
        effective_rank: result.effective_rank,
    };
    outputs.track(&out);
    std::fs::write(&out, serde_json::to_string_pretty(&report)?).context("writing CCA report")?;
    let manifest_path = manifest
        .write(&out, json!({"ridge": ridge}))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

const TUCKER_FLAGS: &[&str] = &["truth", "model-output", "r-max", "ranks", "entropy-norm", "out-dir"];

pub fn analyze_tucker(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, TUCKER_FLAGS, &[]).map_err(usage_err)?;
    let truth_path: PathBuf = flags.require("truth").map_err(usage_err)?.into();
    let model_path: PathBuf = flags.require("model-output").map_err(usage_err)?.into();
    let out_dir: PathBuf = flags.require("out-dir").map_err(usage_err)?.into();
    let r_max: usize = flags.parse_or("r-max", 16).map_err(usage_err)?;
    let ranks: usize = flags.parse_or("ranks", 8).map_err(usage_err)?;
    let norm = match flags.get("entropy-norm").unwrap_or("l1") {
        "l1" => EntropyNormalization::MagnitudeL1,
        "sq" => EntropyNormalization::MagnitudeSquared,
        other => return Err(usage_err(format!("--entropy-norm must be l1 or sq, got {other}"))),
    };
    std::fs::create_dir_all(&out_dir).context("creating output dir")?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&truth_path);
    manifest.input(&model_path);
    let truth = read_field(&truth_path).context("reading truth field")?;
    let model_out = read_field(&model_path).context("reading model output field")?;
    let rows = entropy_sweep(&truth, &model_out, r_max, norm).context("entropy sweep")?;
    let mut csv = String::from("r,entropy_truth,entropy_model,relerr_truth,relerr_model\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.r, row.entropy_truth, row.entropy_model, row.rel_error_truth, row.rel_error_model
        );
    }
    let sweep_path = out_dir.join("entropy_sweep.csv");
    outputs.track(&sweep_path);
    std::fs::write(&sweep_path, csv).context("writing entropy sweep")?;

    let dt = tucker_hooi(&truth, [ranks, ranks, ranks], DEFAULT_MAX_ITERS, DEFAULT_TOL)
        .context("decomposing truth")?;
    let dm = tucker_hooi(&model_out, [ranks, ranks, ranks], DEFAULT_MAX_ITERS, DEFAULT_TOL)
        .context("decomposing model output")?;
    for mode in 0..3 {
        let corr = compare_factors(&dt.factors[mode], &dm.factors[mode])
            .with_context(|| format!("comparing mode-{mode} factors"))?;
        let mut csv = String::from("component,abs_pearson\n");
        for (c, v) in corr.iter().enumerate() {
            let _ = writeln!(csv, "{c},{v}");
        }
        let path = out_dir.join(format!("factors_mode{mode}.csv"));
        outputs.track(&path);
        std::fs::write(&path, csv).context("writing factor comparison")?;
    }
    let manifest_path = manifest
        .write(
            &out_dir.join("analyze-tucker"),
            json!({
                "r_max": r_max,
                "ranks": ranks,
                "entropy_norm": match norm {
                    EntropyNormalization::MagnitudeL1 => "l1",
                    EntropyNormalization::MagnitudeSquared => "sq",
                },
                "relerr_truth_at_ranks": dt.rel_error,
                "relerr_model_at_ranks": dm.rel_error,
            }),
        )
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

#[derive(Serialize)]
struct CoherenceReport {
    same_label_fraction: f64,
    permutation_mean: f64,
    permutation_count: usize,
    seed: u64,
}

pub fn ablate(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(
        args,
        &["model", "latents", "truth", "out-dir", "permutations", "seed"],
        &[],
    )
    .map_err(usage_err)?;
    let model_path: PathBuf = flags.require("model").map_err(usage_err)?.into();
    let latents_path: PathBuf = flags.require("latents").map_err(usage_err)?.into();
    let truth_path: PathBuf = flags.require("truth").map_err(usage_err)?.into();
    let out_dir: PathBuf = flags.require("out-dir").map_err(usage_err)?.into();
    let permutations: usize = flags.parse_or("permutations", 100).map_err(usage_err)?;
    let seed: u64 = flags.parse_or("seed", 0u64).map_err(usage_err)?;
    std::fs::create_dir_all(&out_dir).context("creating output dir")?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&model_path);
    manifest.input(&latents_path);
    manifest.input(&truth_path);
    let model = read_model(&model_path).context("reading model")?;
    let latents = read_latents(&latents_path).context("reading latents")?;
    let truth = read_field(&truth_path).context("reading truth")?;
    let result = ablation_report(&model, &latents, &truth).context("ablation study")?;
    let report_path = out_dir.join("ablation.json");
    outputs.track(&report_path);
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&AblationReport::from_result(&result))?,
    )
    .context("writing ablation report")?;
    let map = attribution_from_spatial_maps(&result);
    let attr_path = out_dir.join("attribution.fld");
    outputs.track(&attr_path);
    write_attribution(&map, &attr_path).context("writing attribution map")?;
    let coherence = spatial_coherence(&map);
    let baseline = permutation_coherence_baseline(&map, permutations, seed);
    let perm_mean = baseline.iter().sum::<f64>() / baseline.len().max(1) as f64;
    let coherence_path = out_dir.join("coherence.json");
    outputs.track(&coherence_path);
    std::fs::write(
        &coherence_path,
        serde_json::to_string_pretty(&CoherenceReport {
            same_label_fraction: coherence,
            permutation_mean: perm_mean,
            permutation_count: permutations,
            seed,
        })?,
    )
    .context("writing coherence report")?;
    let manifest_path = manifest
        .write(
            &out_dir.join("ablate"),
            json!({"permutations": permutations, "seed": seed}),
        )
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry {
    k: usize,
    rel_error: f64,
    final_loss: f64,
    final_data_mse: f64,
}

const SWEEP_FLAGS: &[&str] = &[
    "field",
    "rate",
    "latent-dims",
    "epochs",
    "lr",
    "lambda",
    "layers",
    "hidden",
    "omega-scale",
    "gamma-scale",
    "seed",
    "obs-seed",
    "out-dir",
];

pub fn sweep(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, SWEEP_FLAGS, &[]).map_err(usage_err)?;
    let field_path: PathBuf = flags.require("field").map_err(usage_err)?.into();
    let out_dir: PathBuf = flags.require("out-dir").map_err(usage_err)?.into();
    let rate: f64 = flags.parse_or("rate", 0.05).map_err(usage_err)?;
    let dims = parse_usize_list(flags.require("latent-dims").map_err(usage_err)?).map_err(usage_err)?;
    if dims.is_empty() {
        return Err(usage_err("--latent-dims needs at least one size".into()));
    }
    let obs_seed: u64 = flags.parse_or("obs-seed", 1u64).map_err(usage_err)?;
    let train_cfg = train_config_from(&flags).map_err(usage_err)?;
    std::fs::create_dir_all(&out_dir).context("creating output dir")?;
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&field_path);
    let field = read_field(&field_path).context("reading field")?;
    let obs = sample_observations(&field, rate, obs_seed).context("sampling observations")?;
    let obs_path = out_dir.join("observations.fobs");
    outputs.track(&obs_path);
    write_observations(&obs, &obs_path).context("writing observations")?;

    let mut archs = Vec::new();
    for &k in &dims {
        archs.push(architecture_from(&flags, k).map_err(usage_err)?);
    }
    let truth_norm: f64 = field.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let jobs: Vec<_> = archs
        .iter()
        .map(|arch| {
            let obs = &obs;
            let cfg = &train_cfg;
            let field = &field;
            let arch = arch.clone();
            move || -> Result<_> {
                let out = train(obs, cfg, &arch)?;
                let recon = reconstruct_grid(&out.model, &out.latents, field.dims())?;
                let err: f64 = recon
                    .values()
                    .iter()
                    .zip(field.values())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let rel_error = if truth_norm > 0.0 { err / truth_norm } else { 0.0 };
                Ok((out, recon, rel_error))
            }
        })
        .collect();
    let results = crate::run_indexed(jobs);

    let mut summary = Vec::with_capacity(dims.len());
    for (k, result) in dims.iter().zip(results) {
        let (out, recon, rel_error) = result.with_context(|| format!("training k={k}"))?;
        let model_path = out_dir.join(format!("model_k{k}.mmgn"));
        outputs.track(&model_path);
        write_model(&out.model, &model_path).context("writing model")?;
        let latents_path = out_dir.join(format!("latents_k{k}.csv"));
        outputs.track(&latents_path);
        write_latents(&out.latents, &latents_path).context("writing latents")?;
        let recon_path = out_dir.join(format!("recon_k{k}.fld"));
        outputs.track(&recon_path);
        write_field(&recon, &recon_path).context("writing reconstruction")?;
        let report_path = out_dir.join(format!("report_k{k}.json"));
        outputs.track(&report_path);
        std::fs::write(
            &report_path,
            serde_json::to_string_pretty(&TrainReport {
                k: *k,
                epochs: train_cfg.epochs,
                final_loss: out.final_loss,
                final_data_mse: out.final_data_mse,
                loss_history: out.loss_history,
            })?,
        )
        .context("writing per-k report")?;
        summary.push(SweepEntry {
            k: *k,
            rel_error,
            final_loss: out.final_loss,
            final_data_mse: out.final_data_mse,
        });
    }
    let summary_path = out_dir.join("summary.json");
    outputs.track(&summary_path);
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .context("writing sweep summary")?;
    let manifest_path = manifest
        .write(
            &out_dir.join("sweep"),
            json!({
                "rate": rate,
                "latent_dims": dims,
                "obs_seed": obs_seed,
                "train": serde_json::to_value(&train_cfg).expect("config serializes"),
            }),
        )
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

pub fn plot_cmd(args: &[String], argv: &[String], outputs: &mut Outputs) -> Result<(), CliError> {
    let flags = parse(args, &["kind", "input", "out"], &[]).map_err(usage_err)?;
    let kind = flags.require("kind").map_err(usage_err)?;
    let input: PathBuf = flags.require("input").map_err(usage_err)?.into();
    let out: PathBuf = flags.require("out").map_err(usage_err)?.into();
    let mut manifest = ManifestBuilder::new(argv);
    manifest.input(&input);
    let svg = match kind {
        "embed" => {
            let text = std::fs::read_to_string(&input).context("reading embedding csv")?;
            plot::embed_scatter(&text)?
        }
        "evr" => {
            let text = std::fs::read_to_string(&input).context("reading PCA report")?;
            plot::evr_curves(&text)?
        }
        "entropy" => {
            let text = std::fs::read_to_string(&input).context("reading entropy csv")?;
            plot::entropy_lines(&text)?
        }
        "attr" => plot::attribution_heatmap(&input)?,
        other => {
            return Err(usage_err(format!(
                "--kind must be one of embed|evr|entropy|attr, got {other}"
            )))
        }
    };
    outputs.track(&out);
    std::fs::write(&out, svg).context("writing SVG")?;
    let manifest_path = manifest
        .write(&out, json!({"kind": kind}))
        .context("writing manifest")?;
    outputs.track(&manifest_path);
    Ok(())
}

/// Reconstruction error helper shared with tests: relative Frobenius
/// distance between two fields read from disk.
pub fn relative_error(a: &Path, b: &Path) -> Result<f64> {
    let x = read_field(a)?;
    let y = read_field(b)?;
    if x.dims() != y.dims() {
        return Err(anyhow!("dims differ: {:?} vs {:?}", x.dims(), y.dims()));
    }
    let num: f64 = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let den: f64 = y.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if den > 0.0 { num / den } else { 0.0 })
}
