//! Additive white Gaussian noise channel.

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};

/// Channel operating point. `snr_db = +inf` is the noiseless channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub power: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, power: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            snr_db,
            power,
            seed,
        };
        cfg.noise_variance()?;
        Ok(cfg)
    }

    pub fn noiseless(power: f64, seed: u64) -> Self {
        Self {
            snr_db: f64::INFINITY,
            power,
            seed,
        }
    }

    pub fn noise_variance(&self) -> Result<f64> {
        snr_to_noise_variance(self.snr_db, self.power)
    }
}

/// Per-real-dimension noise variance `P * 10^(-snr_db / 10)`.
pub fn snr_to_noise_variance(snr_db: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!(
            "power must be positive, got {power}"
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!(
            "snr_db must be a number or +inf, got {snr_db}"
        )));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let var = power * 10f64.powf(-snr_db / 10.0);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::invalid(format!(
            "snr_db = {snr_db} gives a degenerate noise variance {var}"
        )));
    }
    Ok(var)
}

/// `z + n` with independent `N(0, sigma^2)` noise per real symbol, drawn from
/// the channel stream keyed by `config.seed` and stream counter 0.
pub fn awgn_transmit(block: &[f64], config: &ChannelConfig) -> Result<Vec<f64>> {
    awgn_transmit_keyed(block, config, 0)
}

/// Like [`awgn_transmit`] but with an explicit stream counter so successive
/// batches get fresh, reproducible noise.
pub fn awgn_transmit_keyed(
    block: &[f64],
    config: &ChannelConfig,
    counter: u64,
) -> Result<Vec<f64>> {
    let mut out = block.to_vec();
    add_noise_in_place(&mut out, config, counter)?;
    Ok(out)
}

pub(crate) fn add_noise_in_place(
    block: &mut [f64],
    config: &ChannelConfig,
    counter: u64,
) -> Result<()> {
    if block.is_empty() {
        return Err(Error::EmptyInput("cannot transmit an empty block".into()));
    }
    let var = config.noise_variance()?;
    if var == 0.0 {
        return Ok(());
    }
    let sigma = var.sqrt();
    let mut stream = Stream::new(config.seed, Domain::Channel, counter);
    for z in block.iter_mut() {
        *z += sigma * stream.gaussian();
    }
    Ok(())
}
