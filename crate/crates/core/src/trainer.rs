//! Adam and the two-stage fine-tuning loop.
//!
//! Stage 1 trains only the mapping parameters (boundaries or points) with the
//! decoder held at the identity; stage 2 freezes the mapping and trains an
//! affine decoder. The objective is the end-to-end mean squared error of
//! source -> clip -> map -> normalize -> AWGN -> de-normalize -> decode.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{add_noise_in_place, ChannelConfig};
use crate::constellation::{power_scale, ComplexPoint};
use crate::error::{Error, Result};
use crate::mapping::{accumulate, MappingParams};
use crate::mrc::DEFAULT_DELTA;
use crate::source::Sampler;

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: params.len(),
            actual: state.m.len(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Piecewise-constant learning rate: `initial * factor^k` after the k-th
/// milestone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    #[serde(default)]
    pub milestones: Vec<usize>,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn rate(&self, iter: usize) -> f64 {
        let k = self.milestones.iter().filter(|&&m| iter >= m).count();
        self.initial * self.factor.powi(k as i32)
    }
}

/// How the transmitter scales mapped symbols to the power budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Every block is normalized on its own; the receiver is told the scale.
    #[default]
    PerBlock,
    /// One scale, fixed after stage 1 from a calibration sample, so the
    /// transmitted alphabet is finite.
    FixedScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub stage1_lr: LrSchedule,
    pub stage2_lr: LrSchedule,
    /// Complex symbols per mini-batch.
    pub batch_size: usize,
    #[serde(with = "crate::snr_serde")]
    pub snr_train_db: f64,
    pub power: f64,
    pub seed: u64,
    pub delta: f64,
    pub scale_mode: ScaleMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage1_iters: 2000,
            stage2_iters: 1000,
            stage1_lr: LrSchedule {
                initial: 1e-2,
                milestones: vec![500, 1500],
                factor: 0.1,
            },
            stage2_lr: LrSchedule {
                initial: 1e-2,
                milestones: vec![700],
                factor: 0.1,
            },
            batch_size: 32,
            snr_train_db: 10.0,
            power: 1.0,
            seed: 0,
            delta: DEFAULT_DELTA,
            scale_mode: ScaleMode::PerBlock,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta must be positive"));
        }
        for (name, lr) in [
            ("stage1_lr", &self.stage1_lr),
            ("stage2_lr", &self.stage2_lr),
        ] {
            if !(lr.initial >= 0.0) || !(lr.factor >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        ChannelConfig::new(self.snr_train_db, self.power, self.seed)?;
        Ok(())
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            snr_db: self.snr_train_db,
            power: self.power,
            seed: self.seed,
        }
    }
}

/// Per-dimension affine receiver `gain * y + bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDecoder {
    pub gain: f64,
    pub bias: f64,
}

impl AffineDecoder {
    pub const IDENTITY: AffineDecoder = AffineDecoder {
        gain: 1.0,
        bias: 0.0,
    };

    pub fn apply(&self, y: f64) -> f64 {
        self.gain * y + self.bias
    }
}

impl Default for AffineDecoder {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Loss value and gradients of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    /// d loss / d mapping parameter, in [`MappingParams::param_ids`] order.
    pub mapping_grads: Vec<f64>,
    /// d loss / d (gain, bias).
    pub decoder_grads: [f64; 2],
    /// The power scale used for the batch.
    pub scale: f64,
}

/// End-to-end squared error of one batch with per-block normalization and
/// noise stream 0.
pub fn end_to_end_loss(
    batch: &[f64],
    mapping: &MappingParams,
    channel: &ChannelConfig,
    decoder: &AffineDecoder,
) -> Result<LossEval> {
    end_to_end_loss_with(batch, mapping, channel, decoder, None, 0)
}

/// Like [`end_to_end_loss`], with an optional fixed power scale and an
/// explicit noise stream counter.
///
/// The power scale is held constant when differentiating, so the mapped
/// symbols see `d loss / d y_i = 2 gain (x_hat_i - x_i) / B`; that upstream
/// derivative is chained through each point's straight-through Jacobian.
pub fn end_to_end_loss_with(
    batch: &[f64],
    mapping: &MappingParams,
    channel: &ChannelConfig,
    decoder: &AffineDecoder,
    fixed_scale: Option<f64>,
    noise_counter: u64,
) -> Result<LossEval> {
    if batch.is_empty() || batch.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "batch must hold a positive even number of reals, got {}",
            batch.len()
        )));
    }
    let ids = mapping.param_ids();
    let duals: Vec<_> = batch
        .chunks_exact(2)
        .map(|c| mapping.map_point(ComplexPoint::new(c[0], c[1])))
        .collect();
    let mapped: Vec<f64> = duals
        .iter()
        .flat_map(|d| [d.value.re, d.value.im])
        .collect();
    let scale = match fixed_scale {
        Some(s) => s,
        None => power_scale(&mapped, channel.power)?,
    };
    let mut received: Vec<f64> = mapped.iter().map(|y| y * scale).collect();
    add_noise_in_place(&mut received, channel, noise_counter)?;

    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut mapping_grads = vec![0.0; ids.len()];
    let mut d_gain = 0.0;
    let mut d_bias = 0.0;
    for (i, (&x, &z)) in batch.iter().zip(&received).enumerate() {
        let y_hat = z / scale;
        let err = decoder.apply(y_hat) - x;
        loss += err * err;
        let up = 2.0 * err / b;
        d_gain += up * y_hat;
        d_bias += up;
        accumulate(
            &duals[i / 2].grads[i % 2],
            up * decoder.gain,
            &ids,
            &mut mapping_grads,
        );
    }
    Ok(LossEval {
        loss: loss / b,
        mapping_grads,
        decoder_grads: [d_gain, d_bias],
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub stage: u8,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub mapping: MappingParams,
    pub decoder: AffineDecoder,
    pub history: Vec<HistoryEntry>,
    /// Set when training ran with [`ScaleMode::FixedScale`].
    pub fixed_scale: Option<f64>,
    pub warnings: Vec<String>,
}

/// Source counter used for the fixed-scale calibration sample; training
/// batches use their iteration number.
const CALIBRATION_COUNTER: u64 = u64::MAX;
const CALIBRATION_SYMBOLS: usize = 1 << 14;

/// Power scale of the mapped calibration sample.
pub fn calibrate_scale(
    mapping: &MappingParams,
    source: &Sampler,
    seed: u64,
    power: f64,
) -> Result<f64> {
    let x = source.draw(2 * CALIBRATION_SYMBOLS, seed, CALIBRATION_COUNTER);
    power_scale(&mapping.forward_block(&x)?, power)
}

/// Runs both stages. Fully deterministic for a given config and source.
pub fn train(
    config: &TrainConfig,
    mapping: &MappingParams,
    source: &Sampler,
) -> Result<TrainOutcome> {
    config.validate()?;
    let channel = config.channel();
    let block = 2 * config.batch_size;
    let mut mapping = mapping.clone();
    let mut decoder = AffineDecoder::IDENTITY;
    let mut history = Vec::with_capacity(config.stage1_iters + config.stage2_iters);

    let mut theta = mapping.param_values();
    let mut adam = AdamState::new(theta.len(), config.stage1_lr.initial);
    for it in 0..config.stage1_iters {
        let x = source.draw(block, config.seed, it as u64);
        let eval = end_to_end_loss_with(&x, &mapping, &channel, &decoder, None, it as u64)?;
        history.push(HistoryEntry {
            iteration: it,
            stage: 1,
            loss: eval.loss,
        });
        if !theta.is_empty() {
            adam.lr = config.stage1_lr.rate(it);
            adam_step(&mut theta, &eval.mapping_grads, &mut adam)?;
            mapping.set_param_values(&theta)?;
        }
    }

    let fixed_scale = match config.scale_mode {
        ScaleMode::PerBlock => None,
        ScaleMode::FixedScale => Some(calibrate_scale(
            &mapping,
            source,
            config.seed,
            config.power,
        )?),
    };

    let mut dec = [decoder.gain, decoder.bias];
    let mut adam = AdamState::new(2, config.stage2_lr.initial);
    for i in 0..config.stage2_iters {
        let it = config.stage1_iters + i;
        let x = source.draw(block, config.seed, it as u64);
        let eval = end_to_end_loss_with(&x, &mapping, &channel, &decoder, fixed_scale, it as u64)?;
        history.push(HistoryEntry {
            iteration: it,
            stage: 2,
            loss: eval.loss,
        });
        adam.lr = config.stage2_lr.rate(i);
        adam_step(&mut dec, &eval.decoder_grads, &mut adam)?;
        decoder = AffineDecoder {
            gain: dec[0],
            bias: dec[1],
        };
    }

    let warnings = mapping.warnings();
    Ok(TrainOutcome {
        mapping,
        decoder,
        history,
        fixed_scale,
        warnings,
    })
}

/// Mean end-to-end squared error over `samples`, processed in blocks of
/// `2 * block_symbols` reals (a trailing partial block is dropped). Block `k`
/// uses noise stream `k`.
pub fn evaluate_mse(
    samples: &[f64],
    mapping: &MappingParams,
    decoder: &AffineDecoder,
    channel: &ChannelConfig,
    block_symbols: usize,
    fixed_scale: Option<f64>,
) -> Result<(f64, usize)> {
    if block_symbols == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    let block = 2 * block_symbols;
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, chunk) in samples.chunks_exact(block).enumerate() {
        let mapped = mapping.forward_block(chunk)?;
        let scale = match fixed_scale {
            Some(s) => s,
            None => power_scale(&mapped, channel.power)?,
        };
        let mut z: Vec<f64> = mapped.iter().map(|y| y * scale).collect();
        add_noise_in_place(&mut z, channel, k as u64)?;
        for (&x, &zi) in chunk.iter().zip(&z) {
            let e = decoder.apply(zi / scale) - x;
            total += e * e;
        }
        count += chunk.len();
    }
    if count == 0 {
        return Err(Error::EmptyInput(
            "fewer samples than one evaluation block".into(),
        ));
    }
    Ok((total / count as f64, count))
}

/// History as CSV with header `iteration,stage,loss`.
pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut out = String::from("iteration,stage,loss\n");
    for h in history {
        writeln!(out, "{},{},{}", h.iteration, h.stage, h.loss).expect("string write");
    }
    out
}

pub fn write_history(history: &[HistoryEntry], path: &Path) -> Result<()> {
    fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}
