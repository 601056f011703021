use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use constellation_map::experiment::{
    export_constellation, format_snr, run_sweep, run_train, sweep_csv, ExperimentConfig,
    MappingChoice,
};
use constellation_map::mapping::{load_params, save_params, MappingKind, MappingParams};
use constellation_map::source::{gen_source, SourceSpec};
use constellation_map::trainer::{write_history, AffineDecoder};
use constellation_map::{Error, Result};

#[derive(Parser)]
#[command(
    name = "constellation-map",
    version,
    about = "Learnable constellation mapping experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a synthetic source and write them as CSV.
    GenSource {
        /// Preset (`encoder-like`, `gaussian`, `uniform`) or a source JSON file.
        #[arg(long, default_value = "encoder-like", conflicts_with = "config")]
        source: String,
        /// Take the source from an experiment config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one mapping (stage 1 then stage 2) and save its parameters.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mapping: MappingKind,
        /// Number of constellation points.
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[arg(long)]
        seed: u64,
        /// Training SNR in dB or `inf`; defaults to the first configured one.
        #[arg(long)]
        snr_train: Option<String>,
        #[arg(long)]
        stage1_iters: Option<usize>,
        #[arg(long)]
        stage2_iters: Option<usize>,
        /// Mapping parameters JSON.
        #[arg(long)]
        out: PathBuf,
        /// Loss history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Trained decoder JSON.
        #[arg(long)]
        decoder: Option<PathBuf>,
    },
    /// Train every configured mapping and evaluate it over the SNR grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Metrics CSV (defaults to `<output_dir>/sweep.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for trained parameters and histories.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write per-sample cluster assignments (CSV) and a scatter plot (SVG).
    ExportConstellation {
        #[arg(long)]
        params: PathBuf,
        /// Preset (`encoder-like`, `gaussian`, `uniform`) or a source JSON file.
        #[arg(long, default_value = "encoder-like")]
        source: String,
        /// Number of complex samples.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output base path; `.csv` and `.svg` are appended.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of saved mapping parameters.
    ShowParams {
        #[arg(long)]
        params: PathBuf,
    },
}

fn source_from_arg(arg: &str) -> Result<SourceSpec> {
    match arg {
        "encoder-like" => Ok(SourceSpec::encoder_like()),
        "gaussian" => Ok(SourceSpec::gaussian(0.0, 1.0)),
        "uniform" => Ok(SourceSpec::uniform(-2.0, 2.0)),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Schema {
                field: "$".into(),
                message: e.to_string(),
            })
        }
    }
}

fn parse_snr(text: &str) -> Result<f64> {
    match text {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("`{t}` is not an SNR in dB or `inf`"))),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn decoder_json(d: &AffineDecoder) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "type": "decoder",
        "gain": d.gain,
        "bias": d.bias,
    }))
    .expect("finite decoder")
        + "\n"
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSource {
            source,
            config,
            n,
            seed,
            out,
        } => {
            let spec = match config {
                Some(path) => ExperimentConfig::load(&path)?.source,
                None => source_from_arg(&source)?,
            };
            let values = gen_source(&spec, n, seed)?;
            let mut csv = String::from("value\n");
            for v in values {
                csv.push_str(&format!("{v}\n"));
            }
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => std::io::stdout()
                    .write_all(csv.as_bytes())
                    .map_err(|e| Error::Io {
                        path: "<stdout>".into(),
                        source: e,
                    })?,
            }
        }
        Command::Train {
            config,
            mapping,
            order,
            seed,
            snr_train,
            stage1_iters,
            stage2_iters,
            out,
            history,
            decoder,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.seed = seed;
            if let Some(snr) = snr_train {
                cfg.snr_train_db = vec![parse_snr(&snr)?];
            }
            if let Some(it) = stage1_iters {
                cfg.train.stage1_iters = it;
            }
            if let Some(it) = stage2_iters {
                cfg.train.stage2_iters = it;
            }
            let model = run_train(
                &cfg,
                MappingChoice {
                    kind: mapping,
                    order,
                },
            )?;
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
            save_params(&model.mapping, &out)?;
            if let Some(path) = history {
                write_history(&model.history, &path)?;
            }
            if let Some(path) = decoder {
                write_file(&path, &decoder_json(&model.decoder))?;
            }
            let last = model.history.last().map(|h| h.loss).unwrap_or(f64::NAN);
            println!(
                "trained {} at {} dB: final batch loss {last}, decoder gain {} bias {}",
                model.mapping.name(),
                format_snr(model.snr_train_db),
                model.decoder.gain,
                model.decoder.bias
            );
        }
        Command::Sweep {
            config,
            seed,
            out,
            output_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.seed = seed;
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            let result = run_sweep(&cfg)?;
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let csv_path = out.unwrap_or_else(|| dir.join("sweep.csv"));
            write_file(&csv_path, &sweep_csv(&result.rows))?;
            if cfg.output_dir.is_some() {
                for m in &result.models {
                    let stem = format!("{}_snr{}", m.mapping.name(), format_snr(m.snr_train_db));
                    write_file(
                        &dir.join(format!("{stem}.json")),
                        &(m.mapping.to_json_string() + "\n"),
                    )?;
                    write_file(
                        &dir.join(format!("{stem}_decoder.json")),
                        &decoder_json(&m.decoder),
                    )?;
                    write_history(&m.history, &dir.join(format!("{stem}_history.csv")))?;
                    for w in &m.warnings {
                        eprintln!("warning: {stem}: {w}");
                    }
                }
            }
            println!("wrote {} rows to {}", result.rows.len(), csv_path.display());
        }
        Command::ExportConstellation {
            params,
            source,
            n,
            seed,
            out,
        } => {
            let mapping = load_params(&params)?;
            let samples = gen_source(&source_from_arg(&source)?, 2 * n, seed)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.into(),
                    source: e,
                })?;
            }
            let summary = export_constellation(&mapping, &samples, &out)?;
            println!(
                "{} clusters; wrote {} and {}",
                summary.clusters,
                summary.csv_path.display(),
                summary.svg_path.display()
            );
        }
        Command::ShowParams { params } => {
            let mapping = load_params(&params)?;
            print!("{}", describe(&mapping));
        }
    }
    Ok(())
}

fn describe(mapping: &MappingParams) -> String {
    let mut out = format!("type: {}\n", mapping.name());
    let (lo, hi) = mapping.clip_range();
    out += &format!("clip range: [{lo}, {hi}]\n");
    match mapping {
        MappingParams::Qam { levels } => {
            out += &format!("levels per axis: {:?}\n", levels.values());
        }
        MappingParams::Mrc(m) => {
            let mid = m.levels.midpoints();
            out += &format!(
                "levels per axis: {:?}\ndelta: {}\n",
                m.levels.values(),
                m.delta()
            );
            for (name, d) in [("d_re", &m.boundaries_re), ("d_im", &m.boundaries_im)] {
                let shift = d
                    .boundaries
                    .iter()
                    .zip(&mid)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                out += &format!(
                    "{name}: {:?} (max shift from midpoints {shift:.6})\n",
                    d.boundaries
                );
            }
        }
        MappingParams::Mic(m) => {
            out += &format!("points: {}\ndelta: {}\n", m.len(), m.delta);
            if let Ok(init) = MappingParams::init(MappingKind::Mic, m.len(), lo, hi, m.delta) {
                let grid = init.constellation().expect("mic has points");
                let shift = m
                    .points()
                    .iter()
                    .zip(grid.points())
                    .map(|(a, b)| a.dist(*b))
                    .fold(0.0, f64::max);
                out += &format!("max displacement from QAM grid: {shift:.6}\n");
            }
            for (j, p) in m.points().iter().enumerate() {
                out += &format!("  c{j}: {p}\n");
            }
        }
        MappingParams::Identity { .. } => {}
    }
    for w in mapping.warnings() {
        out += &format!("warning: {w}\n");
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let reason: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .collect();
            eprintln!(
                "error: usage: {}",
                reason.join(" ").trim_start_matches("error: ")
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
