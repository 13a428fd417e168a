//! SVG renderers for the analysis reports. Plots are pure renderings of
//! report files: every number shown is read from the report, never
//! recomputed, so the analyses stay testable without any drawing code.

use anyhow::{bail, Context, Result};
use latentscope_core::corr::PcaReportEntry;
use latentscope_core::embed::SpaceLabel;
use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn svg_open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    );
}

fn svg_close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Hue in degrees to #rrggbb at fixed saturation/lightness.
fn hue_color(hue_degrees: f64) -> String {
    let (s, l) = (0.65, 0.5);
    let h = ((hue_degrees % 360.0) + 360.0) % 360.0 / 60.0;
    let c = (1.0 - (2.0 * l - 1.0f64).abs()) * s;
    let x = c * (1.0 - (h % 2.0 - 1.0f64).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    format!(
        "#{:02x}{:02x}{:02x}",
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8
    )
}

/// Blue-to-red ramp over [0, 1] for temporal coloring.
fn temporal_color(fraction: f64) -> String {
    hue_color(240.0 - 240.0 * fraction.clamp(0.0, 1.0))
}

/// Well-separated categorical color per dimension index.
fn dim_color(dim: u32) -> String {
    hue_color(dim as f64 * 137.50776405003785)
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let span = |it: std::vec::IntoIter<f64>| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in it {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo == hi {
                lo -= 0.5;
                hi += 0.5;
            }
            (lo, hi)
        };
        let (x_min, x_max) = span(xs.collect::<Vec<_>>().into_iter());
        let (y_min, y_max) = span(ys.collect::<Vec<_>>().into_iter());
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (H - 2.0 * MARGIN)
    }
}

fn axes(out: &mut String) {
    let _ = write!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let mut coords = String::new();
    for (x, y) in pts {
        let _ = write!(coords, "{x:.2},{y:.2} ");
    }
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
        coords.trim_end()
    );
}

fn legend(out: &mut String, entries: &[(String, String)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 * (i as f64 + 1.0);
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            W - MARGIN - 130.0,
            y - 9.0,
            W - MARGIN - 115.0,
            y,
            xml_escape(label)
        );
    }
}

/// Scatter of an embedding CSV (t,x,y,cluster), colored by time step.
pub fn embed_scatter(csv_text: &str) -> Result<String> {
    let mut rows: Vec<(usize, f64, f64, usize)> = Vec::new();
    let mut lines = csv_text.lines();
    let header = lines.next().context("embedding csv is empty")?;
    if header != "t,x,y,cluster" {
        bail!("embedding csv has unexpected header `{header}`");
    }
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            bail!("embedding csv row {i} has {} fields", parts.len());
        }
        rows.push((
            parts[0].parse().with_context(|| format!("row {i}: bad t"))?,
            parts[1].parse().with_context(|| format!("row {i}: bad x"))?,
            parts[2].parse().with_context(|| format!("row {i}: bad y"))?,
            parts[3].parse().with_context(|| format!("row {i}: bad cluster"))?,
        ));
    }
    if rows.is_empty() {
        bail!("embedding csv has no points");
    }
    let frame = Frame::of(rows.iter().map(|r| r.1), rows.iter().map(|r| r.2));
    let t_max = rows.iter().map(|r| r.0).max().unwrap().max(1) as f64;
    let mut out = String::new();
    svg_open(&mut out, "t-SNE embedding (color = time step)");
    axes(&mut out);
    for (t, x, y, _cluster) in &rows {
        let _ = write!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"><title>t={t}</title></circle>\n",
            frame.px(*x),
            frame.py(*y),
            temporal_color(*t as f64 / t_max)
        );
    }
    svg_close(&mut out);
    Ok(out)
}

/// Explained-variance-ratio curves from a PCA report (one line per space).
pub fn evr_curves(report_json: &str) -> Result<String> {
    let entries: Vec<PcaReportEntry> =
        serde_json::from_str(report_json).context("malformed PCA report")?;
    if entries.is_empty() {
        bail!("PCA report has no entries");
    }
    for e in &entries {
        if e.ratios.is_empty() {
            bail!("PCA report entry has an empty ratio list");
        }
    }
    let longest = entries.iter().map(|e| e.ratios.len()).max().unwrap();
    let frame = Frame::of(
        [0.0, (longest - 1).max(1) as f64].into_iter(),
        entries
            .iter()
            .flat_map(|e| e.ratios.iter().copied())
            .chain([0.0]),
    );
    let mut out = String::new();
    svg_open(&mut out, "Explained variance ratios per component");
    axes(&mut out);
    let mut legend_entries = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let color = match entry.latent_dim {
            SpaceLabel::Original => "#222222".to_string(),
            SpaceLabel::Latent(_) => hue_color(i as f64 * 67.0),
        };
        let pts: Vec<(f64, f64)> = entry
            .ratios
            .iter()
            .enumerate()
            .map(|(c, r)| (frame.px(c as f64), frame.py(*r)))
            .collect();
        polyline(&mut out, &pts, &color);
        let label = match entry.latent_dim {
            SpaceLabel::Latent(k) => format!("latent k={k}"),
            SpaceLabel::Original => "original data".to_string(),
        };
        legend_entries.push((label, color));
    }
    legend(&mut out, &legend_entries);
    svg_close(&mut out);
    Ok(out)
}

/// Core entropy vs multirank lines from an entropy sweep CSV.
pub fn entropy_lines(csv_text: &str) -> Result<String> {
    let mut lines = csv_text.lines();
    let header = lines.next().context("entropy csv is empty")?;
    if header != "r,entropy_truth,entropy_model,relerr_truth,relerr_model" {
        bail!("entropy csv has unexpected header `{header}`");
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            bail!("entropy csv row {i} has {} fields", parts.len());
        }
        rows.push((
            parts[0].parse().with_context(|| format!("row {i}: bad r"))?,
            parts[1].parse().with_context(|| format!("row {i}: bad truth entropy"))?,
            parts[2].parse().with_context(|| format!("row {i}: bad model entropy"))?,
        ));
    }
    if rows.is_empty() {
        bail!("entropy csv has no rows");
    }
    let frame = Frame::of(
        rows.iter().map(|r| r.0),
        rows.iter().flat_map(|r| [r.1, r.2]),
    );
    let mut out = String::new();
    svg_open(&mut out, "Tucker core entropy vs multirank");
    axes(&mut out);
    let truth_pts: Vec<(f64, f64)> = rows.iter().map(|r| (frame.px(r.0), frame.py(r.1))).collect();
    let model_pts: Vec<(f64, f64)> = rows.iter().map(|r| (frame.px(r.0), frame.py(r.2))).collect();
    polyline(&mut out, &truth_pts, "#1f4e9c");
    polyline(&mut out, &model_pts, "#c23b22");
    legend(
        &mut out,
        &[
            ("ground truth".to_string(), "#1f4e9c".to_string()),
            ("model output".to_string(), "#c23b22".to_string()),
        ],
    );
    svg_close(&mut out);
    Ok(out)
}

/// Attribution heatmap: each cell colored by its most-damaging latent
/// dimension.
pub fn attribution_heatmap(map_path: &Path) -> Result<String> {
    let map = latentscope_core::ablation::read_attribution(map_path)
        .with_context(|| format!("reading attribution map {}", map_path.display()))?;
    let (nlat, nlon) = map.dims();
    let cell_w = (W - 2.0 * MARGIN) / nlon as f64;
    let cell_h = (H - 2.0 * MARGIN) / nlat as f64;
    let mut out = String::new();
    svg_open(&mut out, "Most damaging latent dimension per grid point");
    for i in 0..nlat {
        for j in 0..nlon {
            let _ = write!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                MARGIN + j as f64 * cell_w,
                MARGIN + i as f64 * cell_h,
                cell_w,
                cell_h,
                dim_color(map.get(i, j))
            );
        }
    }
    axes(&mut out);
    svg_close(&mut out);
    Ok(out)
}
