//! Synthetic stand-ins for encoder outputs.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::constellation::{clip, DEFAULT_V_MAX, DEFAULT_V_MIN};
use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceKind {
    Uniform {
        low: f64,
        high: f64,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    GaussianMixture {
        means: Vec<f64>,
        stds: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Bootstrap resampling of the reals stored in a file (one per line or
    /// comma separated; a non-numeric first line is skipped as a header).
    File {
        path: PathBuf,
    },
}

fn default_clip() -> [f64; 2] {
    [DEFAULT_V_MIN, DEFAULT_V_MAX]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_clip")]
    pub clip: [f64; 2],
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Self {
        Self {
            kind,
            clip: default_clip(),
        }
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        Self::new(SourceKind::Uniform { low, high })
    }

    pub fn gaussian(mean: f64, std: f64) -> Self {
        Self::new(SourceKind::Gaussian { mean, std })
    }

    /// Bimodal preset shaped like typical encoder output histograms: two
    /// Gaussians at +-0.35 with std 0.45 and equal weights.
    pub fn encoder_like() -> Self {
        Self::new(SourceKind::GaussianMixture {
            means: vec![-0.35, 0.35],
            stds: vec![0.45, 0.45],
            weights: vec![0.5, 0.5],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.clip;
        if !(lo < hi) {
            return Err(Error::invalid(format!(
                "source clip range [{lo}, {hi}] is empty"
            )));
        }
        match &self.kind {
            SourceKind::Uniform { low, high } => {
                if !(low < high) {
                    return Err(Error::invalid(format!(
                        "uniform source needs low < high, got [{low}, {high}]"
                    )));
                }
            }
            SourceKind::Gaussian { mean, std } => {
                if !mean.is_finite() || !(*std > 0.0) {
                    return Err(Error::invalid(format!(
                        "gaussian source needs finite mean and std > 0, got std {std}"
                    )));
                }
            }
            SourceKind::GaussianMixture {
                means,
                stds,
                weights,
            } => {
                if means.is_empty() || means.len() != stds.len() || means.len() != weights.len() {
                    return Err(Error::invalid(
                        "mixture needs equal, non-zero numbers of means, stds and weights",
                    ));
                }
                if stds.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::invalid("mixture stds must be positive"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::invalid("mixture weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
            }
            SourceKind::File { .. } => {}
        }
        Ok(())
    }

    /// Validates the spec and loads any backing data.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let data = match &self.kind {
            SourceKind::File { path } => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let values = parse_values(&text)
                    .map_err(|msg| Error::invalid(format!("{}: {msg}", path.display())))?;
                if values.is_empty() {
                    return Err(Error::EmptyInput(format!(
                        "{} holds no values",
                        path.display()
                    )));
                }
                values
            }
            _ => Vec::new(),
        };
        Ok(Sampler {
            spec: self.clone(),
            data,
        })
    }
}

fn parse_values(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        for tok in line
            .split([',', ' ', '\t'])
            .filter(|t| !t.trim().is_empty())
        {
            match tok.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ if n == 0 => break,
                _ => return Err(format!("line {}: `{tok}` is not a finite number", n + 1)),
            }
        }
    }
    Ok(out)
}

/// A ready-to-draw source.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: SourceSpec,
    data: Vec<f64>,
}

impl Sampler {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    /// `n` clipped samples from the source stream `(seed, counter)`.
    pub fn draw(&self, n: usize, seed: u64, counter: u64) -> Vec<f64> {
        let mut s = Stream::new(seed, Domain::Source, counter);
        let [lo, hi] = self.spec.clip;
        (0..n)
            .map(|_| {
                let x = match &self.spec.kind {
                    SourceKind::Uniform { low, high } => low + (high - low) * s.uniform(),
                    SourceKind::Gaussian { mean, std } => mean + std * s.gaussian(),
                    SourceKind::GaussianMixture {
                        means,
                        stds,
                        weights,
                    } => {
                        let u = s.uniform();
                        let mut acc = 0.0;
                        let mut k = weights.len() - 1;
                        for (i, w) in weights.iter().enumerate() {
                            acc += w;
                            if u < acc {
                                k = i;
                                break;
                            }
                        }
                        means[k] + stds[k] * s.gaussian()
                    }
                    SourceKind::File { .. } => self.data[s.below(self.data.len() as u64) as usize],
                };
                clip(x, lo, hi)
            })
            .collect()
    }
}

/// `n` deterministic samples of `spec`.
pub fn gen_source(spec: &SourceSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    Ok(spec.sampler()?.draw(n, seed, 0))
}
