//! Experiment harness: configuration, SNR sweeps, constellation export.
//!
//! Reported errors are end-to-end symbol MSE, a stand-in for downstream task
//! metrics; every CSV written here says so in its first line.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::constellation::ComplexPoint;
use crate::error::{Error, Result};
use crate::mapping::{MappingKind, MappingParams};
use crate::snr_serde;
use crate::source::{Sampler, SourceSpec};
use crate::trainer::{evaluate_mse, train, AffineDecoder, HistoryEntry, TrainConfig};

/// First line of every metrics CSV.
pub const METRIC_NOTE: &str = "# metric: end-to-end symbol MSE (surrogate for task metrics)";

/// Source counter reserved for held-out evaluation samples.
pub const HELDOUT_COUNTER: u64 = u64::MAX - 1;
/// Added to the experiment seed for evaluation noise so it never replays the
/// training noise streams.
pub const EVAL_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn format_snr(snr_db: f64) -> String {
    if snr_db == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{snr_db}")
    }
}

/// One mapping to train and evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingChoice {
    pub kind: MappingKind,
    /// Number of finite constellation points (a perfect square).
    pub order: usize,
}

fn default_power() -> f64 {
    1.0
}

fn default_eval_samples() -> usize {
    200_000
}

fn default_plot_samples() -> usize {
    10_000
}

fn default_mappings() -> Vec<MappingChoice> {
    [MappingKind::Qam, MappingKind::Mrc, MappingKind::Mic]
        .into_iter()
        .map(|kind| MappingChoice { kind, order: 16 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mappings")]
    pub mappings: Vec<MappingChoice>,
    #[serde(default = "SourceSpec::encoder_like")]
    pub source: SourceSpec,
    #[serde(with = "snr_serde::list")]
    pub snr_train_db: Vec<f64>,
    #[serde(with = "snr_serde::list")]
    pub snr_test_db: Vec<f64>,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub train: TrainConfig,
    /// Held-out reals per evaluation cell.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Samples used for constellation plots.
    #[serde(default = "default_plot_samples")]
    pub plot_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mappings.is_empty() {
            return Err(Error::schema(
                "$.mappings",
                "at least one mapping is required",
            ));
        }
        if self.snr_train_db.is_empty() {
            return Err(Error::schema(
                "$.snr_train_db",
                "SNR grid must not be empty",
            ));
        }
        if self.snr_test_db.is_empty() {
            return Err(Error::schema("$.snr_test_db", "SNR grid must not be empty"));
        }
        for &snr in self.snr_train_db.iter().chain(&self.snr_test_db) {
            ChannelConfig::new(snr, self.power, self.seed)?;
        }
        let block = 2 * self.train.batch_size;
        if self.eval_samples < block {
            return Err(Error::schema(
                "$.eval_samples",
                format!("must be at least one evaluation block ({block})"),
            ));
        }
        self.source.validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn init_mapping(&self, choice: MappingChoice) -> Result<MappingParams> {
        let [lo, hi] = self.source.clip;
        MappingParams::init(choice.kind, choice.order, lo, hi, self.train.delta)
    }
}

/// One cell of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mapping: String,
    pub snr_train_db: f64,
    pub snr_test_db: f64,
    pub mse: f64,
    pub n: usize,
}

/// A mapping trained for one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub mapping: MappingParams,
    pub decoder: AffineDecoder,
    pub snr_train_db: f64,
    pub fixed_scale: Option<f64>,
    pub history: Vec<HistoryEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub models: Vec<TrainedModel>,
}

/// Trains every configured mapping at every training SNR and evaluates each
/// on a shared held-out block at every test SNR.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let sampler = config.source.sampler()?;
    let heldout = sampler.draw(config.eval_samples, config.seed, HELDOUT_COUNTER);
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for &snr_train in &config.snr_train_db {
        for &choice in &config.mappings {
            let model = train_one(config, choice, snr_train, &sampler)?;
            for &snr_test in &config.snr_test_db {
                let channel = ChannelConfig {
                    snr_db: snr_test,
                    power: config.power,
                    seed: config.seed.wrapping_add(EVAL_SEED_OFFSET),
                };
                let (mse, n) = evaluate_mse(
                    &heldout,
                    &model.mapping,
                    &model.decoder,
                    &channel,
                    config.train.batch_size,
                    model.fixed_scale,
                )?;
                rows.push(SweepRow {
                    mapping: model.mapping.name().to_string(),
                    snr_train_db: snr_train,
                    snr_test_db: snr_test,
                    mse,
                    n,
                });
            }
            models.push(model);
        }
    }
    Ok(SweepResult { rows, models })
}

fn train_one(
    config: &ExperimentConfig,
    choice: MappingChoice,
    snr_train: f64,
    sampler: &Sampler,
) -> Result<TrainedModel> {
    let init = config.init_mapping(choice)?;
    let tc = TrainConfig {
        snr_train_db: snr_train,
        power: config.power,
        seed: config.seed,
        ..config.train.clone()
    };
    let out = train(&tc, &init, sampler)?;
    Ok(TrainedModel {
        mapping: out.mapping,
        decoder: out.decoder,
        snr_train_db: snr_train,
        fixed_scale: out.fixed_scale,
        history: out.history,
        warnings: out.warnings,
    })
}

/// Trains a single mapping as configured (first training SNR unless
/// overridden by the caller through `config.snr_train_db`).
pub fn run_train(config: &ExperimentConfig, choice: MappingChoice) -> Result<TrainedModel> {
    config.validate()?;
    let sampler = config.source.sampler()?;
    train_one(config, choice, config.snr_train_db[0], &sampler)
}

/// The sweep table as CSV: a metric note, then
/// `mapping,snr_train_db,snr_test_db,mse,n`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{METRIC_NOTE}").unwrap();
    writeln!(out, "mapping,snr_train_db,snr_test_db,mse,n").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.mapping,
            format_snr(r.snr_train_db),
            format_snr(r.snr_test_db),
            r.mse,
            r.n
        )
        .unwrap();
    }
    out
}

/// Files written by [`export_constellation`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub clusters: usize,
}

/// One exported sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterRow {
    pub input: ComplexPoint,
    pub cluster: usize,
    pub mapped: ComplexPoint,
}

/// Clips and assigns each sample pair to its cluster.
pub fn cluster_rows(mapping: &MappingParams, samples: &[f64]) -> Result<Vec<ClusterRow>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to export".into()));
    }
    if samples.len() % 2 != 0 {
        return Err(Error::invalid("sample block length must be even"));
    }
    let (lo, hi) = mapping.clip_range();
    samples
        .chunks_exact(2)
        .map(|c| {
            let p = ComplexPoint::new(c[0], c[1]).clipped(lo, hi);
            match mapping.forward(p) {
                (mapped, Some(cluster)) => Ok(ClusterRow {
                    input: p,
                    cluster,
                    mapped,
                }),
                (_, None) => Err(Error::invalid(format!(
                    "mapping `{}` has no finite constellation to export",
                    mapping.name()
                ))),
            }
        })
        .collect()
}

pub fn clusters_csv(rows: &[ClusterRow]) -> String {
    let mut out = String::from("re,im,cluster_index,mapped_re,mapped_im\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.input.re, r.input.im, r.cluster, r.mapped.re, r.mapped.im
        )
        .unwrap();
    }
    out
}

/// Writes `<base>.csv` (one row per sample) and `<base>.svg` (scatter coloured
/// by cluster, finite points as red triangles).
pub fn export_constellation(
    mapping: &MappingParams,
    samples: &[f64],
    base: &Path,
) -> Result<ExportSummary> {
    let rows = cluster_rows(mapping, samples)?;
    let finite = mapping.constellation().expect("checked by cluster_rows");
    let csv_path = base.with_extension("csv");
    let svg_path = base.with_extension("svg");
    fs::write(&csv_path, clusters_csv(&rows)).map_err(|e| Error::io(&csv_path, e))?;
    let svg = render_svg(&rows, finite.points(), mapping.clip_range(), mapping.name());
    fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
    let clusters = rows
        .iter()
        .map(|r| r.cluster)
        .collect::<BTreeSet<_>>()
        .len();
    Ok(ExportSummary {
        csv_path,
        svg_path,
        clusters,
    })
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 40.0;

fn cluster_color(i: usize) -> String {
    // golden-angle hue walk keeps neighbouring indices apart
    let hue = (i as f64 * 137.507_764) % 360.0;
    let light = if i % 2 == 0 { 45 } else { 62 };
    format!("hsl({hue:.1},70%,{light}%)")
}

fn render_svg(
    rows: &[ClusterRow],
    finite: &[ComplexPoint],
    (lo, hi): (f64, f64),
    title: &str,
) -> String {
    let (mut vmin, mut vmax) = (lo, hi);
    for p in finite {
        vmin = vmin.min(p.re).min(p.im);
        vmax = vmax.max(p.re).max(p.im);
    }
    let pad = 0.05 * (vmax - vmin);
    let (vmin, vmax) = (vmin - pad, vmax + pad);
    let inner = SVG_SIZE - 2.0 * SVG_MARGIN;
    let sx = |v: f64| SVG_MARGIN + (v - vmin) / (vmax - vmin) * inner;
    let sy = |v: f64| SVG_SIZE - SVG_MARGIN - (v - vmin) / (vmax - vmin) * inner;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} constellation mapping ({} samples)</text>"#,
        SVG_SIZE / 2.0,
        title,
        rows.len()
    )
    .unwrap();
    let (x0, y0) = (sx(0.0), sy(0.0));
    writeln!(
        out,
        r##"<g stroke="#999" stroke-width="1"><line x1="{}" y1="{y0:.2}" x2="{}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{}" x2="{x0:.2}" y2="{}"/></g>"##,
        SVG_MARGIN,
        SVG_SIZE - SVG_MARGIN,
        SVG_MARGIN,
        SVG_SIZE - SVG_MARGIN
    )
    .unwrap();
    writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#ccc" stroke-dasharray="4 3"/>"##,
        sx(lo),
        sy(hi),
        sx(hi) - sx(lo),
        sy(lo) - sy(hi)
    )
    .unwrap();

    writeln!(out, "<g>").unwrap();
    for r in rows {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.4" fill="{}"/>"#,
            sx(r.input.re),
            sy(r.input.im),
            cluster_color(r.cluster)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r#"<g fill="red" stroke="black" stroke-width="0.8">"#).unwrap();
    for p in finite {
        let (cx, cy) = (sx(p.re), sy(p.im));
        writeln!(
            out,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}"/>"#,
            cx,
            cy - 6.0,
            cx - 5.2,
            cy + 3.0,
            cx + 5.2,
            cy + 3.0
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    out
}
