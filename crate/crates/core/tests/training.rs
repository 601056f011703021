mod common;

use common::*;
use constellation_map::channel::awgn_transmit_keyed;
use constellation_map::constellation::power_scale;
use constellation_map::rng::Stream;
use constellation_map::trainer::{end_to_end_loss_with, evaluate_mse};
use constellation_map::*;
use num_bigfloat::BigFloat;

/// Exact per-axis distortion of a uniform source on `[lo, hi]` quantized to
/// the nearest of `levels`, by integrating `(x - c)^2` over each interval of
/// the scan.
fn uniform_quantizer_mse(levels: &[f64], lo: f64, hi: f64) -> f64 {
    let mut edges = vec![lo];
    edges.extend(levels.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(hi);
    let mut total = 0.0;
    for (i, c) in levels.iter().enumerate() {
        let (a, b) = (edges[i], edges[i + 1]);
        total += ((b - c).powi(3) - (a - c).powi(3)) / 3.0;
    }
    total / (hi - lo)
}

/// Midpoint-rule samples covering `[-2, 2]^2` on an `n x n` grid.
fn uniform_grid(n: usize) -> Vec<f64> {
    let step = 4.0 / n as f64;
    let coord = |i: usize| -2.0 + (i as f64 + 0.5) * step;
    (0..n)
        .flat_map(|i| (0..n).flat_map(move |j| [coord(j), coord(i)]))
        .collect()
}

#[test]
fn qam_loss_matches_quantizer_integral() {
    let levels = LevelSet::uniform(4, -2.0, 2.0).unwrap();
    let want = uniform_quantizer_mse(levels.values(), -2.0, 2.0);
    assert!((want - 4.0 / 27.0).abs() < 1e-15);
    let qam = MappingParams::init(MappingKind::Qam, 16, -2.0, 2.0, 20.0).unwrap();
    let batch = uniform_grid(600);
    let ch = ChannelConfig::noiseless(1.0, 0);
    let got = end_to_end_loss(&batch, &qam, &ch, &AffineDecoder::IDENTITY).unwrap();
    // midpoint rule on a piecewise quadratic: error is step^2 / 12
    let tol = (4.0f64 / 600.0).powi(2) / 12.0 + 1e-9;
    assert!((got.loss - want).abs() < tol, "{} vs {want}", got.loss);
    let (mse, n) = evaluate_mse(&batch, &qam, &AffineDecoder::IDENTITY, &ch, 30, None).unwrap();
    assert_eq!(n, batch.len());
    assert!((mse - want).abs() < tol);
}

#[test]
fn loss_is_non_negative() {
    let mut s = stream(1);
    for kind in [MappingKind::Qam, MappingKind::Mrc, MappingKind::Mic] {
        let m = MappingParams::init(kind, 16, -2.0, 2.0, 20.0).unwrap();
        for counter in 0..20 {
            let batch: Vec<f64> = (0..64).map(|_| 1.5 * s.gaussian()).collect();
            let ch = ChannelConfig::new(0.0, 1.0, 9).unwrap();
            let dec = AffineDecoder {
                gain: uniform(&mut s, -2.0, 2.0),
                bias: uniform(&mut s, -1.0, 1.0),
            };
            let l = end_to_end_loss_with(&batch, &m, &ch, &dec, None, counter).unwrap();
            assert!(l.loss >= 0.0);
        }
    }
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x)
}

/// Straight-through surrogate of the batch loss in extended precision: the
/// hard mapped value plus the change of the soft surrogate from `theta0`,
/// pushed through the frozen scale, the same noise and the decoder.
struct StLoss {
    batch: Vec<f64>,
    hard: Vec<f64>,
    noise_over_scale: Vec<f64>,
    decoder: AffineDecoder,
}

impl StLoss {
    fn new(
        batch: &[f64],
        mapping: &MappingParams,
        ch: &ChannelConfig,
        dec: AffineDecoder,
        counter: u64,
    ) -> Self {
        let hard = mapping.forward_block(batch).unwrap();
        let s = power_scale(&hard, ch.power).unwrap();
        let sent: Vec<f64> = hard.iter().map(|h| h * s).collect();
        let received = awgn_transmit_keyed(&sent, ch, counter).unwrap();
        let noise_over_scale = received
            .iter()
            .zip(&sent)
            .map(|(r, t)| (r - t) / s)
            .collect();
        Self {
            batch: batch.to_vec(),
            hard,
            noise_over_scale,
            decoder: dec,
        }
    }

    fn eval(&self, soft: &[BigFloat], soft0: &[BigFloat]) -> BigFloat {
        let (g, b) = (bf(self.decoder.gain), bf(self.decoder.bias));
        let mut total = bf(0.0);
        for i in 0..self.batch.len() {
            let y = bf(self.hard[i]) + (soft[i] - soft0[i]) + bf(self.noise_over_scale[i]);
            let e = g * y + b - bf(self.batch[i]);
            total = total + e * e;
        }
        total / bf(self.batch.len() as f64)
    }
}

fn soft_block(batch: &[f64], mapping: &MappingParams, params: &[BigFloat]) -> Vec<BigFloat> {
    match mapping {
        MappingParams::Mrc(m) => {
            let levels = m.levels.values();
            let k = m.boundaries_re.len();
            batch
                .chunks(2)
                .flat_map(|c| {
                    let clipped = [c[0].clamp(-2.0, 2.0), c[1].clamp(-2.0, 2.0)];
                    (0..2).map(move |axis| {
                        let mut theta = vec![bf(clipped[axis])];
                        theta.extend_from_slice(&params[axis * k..(axis + 1) * k]);
                        mrc_surrogate_precise(&theta, levels, m.delta())
                    })
                })
                .collect()
        }
        MappingParams::Mic(m) => batch
            .chunks(2)
            .flat_map(|c| {
                let mut theta = vec![bf(c[0].clamp(-2.0, 2.0)), bf(c[1].clamp(-2.0, 2.0))];
                theta.extend_from_slice(params);
                [0, 1].map(|k| mic_surrogate_precise(&theta, m.delta, k))
            })
            .collect(),
        _ => unreachable!(),
    }
}

fn off_boundary_batch(mapping: &MappingParams, symbols: usize, s: &mut Stream) -> Vec<f64> {
    let margin = 0.05;
    let mut out = Vec::new();
    while out.len() < 2 * symbols {
        let p = ComplexPoint::new(uniform(s, -1.9, 1.9), uniform(s, -1.9, 1.9));
        let ok = match mapping {
            MappingParams::Mrc(m) => [p.re, p.im]
                .iter()
                .zip([&m.boundaries_re, &m.boundaries_im])
                .all(|(&x, d)| {
                    let b = &d.boundaries;
                    b.iter().all(|&dj| (x - dj).abs() > margin)
                        && b.windows(2)
                            .all(|w| (x - 0.5 * (w[0] + w[1])).abs() > margin)
                }),
            MappingParams::Mic(m) => {
                let mut r: Vec<f64> = m.points().iter().map(|c| c.dist(p)).collect();
                r.sort_by(f64::total_cmp);
                r[0] > margin && r[1] - r[0] > margin
            }
            _ => true,
        };
        if ok {
            out.extend([p.re, p.im]);
        }
    }
    out
}

fn check_loss_gradient(kind: MappingKind, symbols: usize, seed: u64) {
    let mut s = stream(seed);
    let mut mapping = MappingParams::init(kind, 16, -2.0, 2.0, 20.0).unwrap();
    let jittered: Vec<f64> = mapping
        .param_values()
        .iter()
        .map(|v| v + uniform(&mut s, -0.15, 0.15))
        .collect();
    mapping.set_param_values(&jittered).unwrap();
    let batch = off_boundary_batch(&mapping, symbols, &mut s);
    let ch = ChannelConfig::new(10.0, 1.0, 21).unwrap();
    let dec = AffineDecoder {
        gain: 0.9,
        bias: 0.05,
    };
    let counter = 4;
    let got = end_to_end_loss_with(&batch, &mapping, &ch, &dec, None, counter).unwrap();

    let st = StLoss::new(&batch, &mapping, &ch, dec, counter);
    let theta0: Vec<BigFloat> = jittered.iter().map(|&v| bf(v)).collect();
    let soft0 = soft_block(&batch, &mapping, &theta0);
    let at0 = st.eval(&soft0, &soft0).to_f64();
    assert!(
        (at0 - got.loss).abs() <= 1e-14 * got.loss.max(1.0),
        "{at0} vs {}",
        got.loss
    );

    let h = bf(1e-6);
    let numeric: Vec<f64> = (0..theta0.len())
        .map(|k| {
            let mut up = theta0.clone();
            up[k] = up[k] + h;
            let mut down = theta0.clone();
            down[k] = down[k] - h;
            let diff = st.eval(&soft_block(&batch, &mapping, &up), &soft0)
                - st.eval(&soft_block(&batch, &mapping, &down), &soft0);
            (diff / (bf(2.0) * h)).to_f64()
        })
        .collect();
    let err = max_rel_error(&got.mapping_grads, &numeric);
    assert!(
        err < 1e-4,
        "{kind:?}: rel err {err:e}\n{:?}\n{numeric:?}",
        got.mapping_grads
    );
    assert!(got.mapping_grads.iter().any(|g| g.abs() > 1e-4));
}

#[test]
fn mrc_loss_gradient_matches_surrogate_differences() {
    check_loss_gradient(MappingKind::Mrc, 32, 10);
}

#[test]
fn mic_loss_gradient_matches_surrogate_differences() {
    check_loss_gradient(MappingKind::Mic, 8, 11);
}

#[test]
fn decoder_gradient_matches_differences() {
    let sampler = SourceSpec::encoder_like().sampler().unwrap();
    let batch = sampler.draw(64, 3, 0);
    let m = MappingParams::init(MappingKind::Mic, 16, -2.0, 2.0, 20.0).unwrap();
    let ch = ChannelConfig::new(5.0, 1.0, 2).unwrap();
    let dec = AffineDecoder {
        gain: 0.8,
        bias: -0.1,
    };
    let l = end_to_end_loss_with(&batch, &m, &ch, &dec, None, 6).unwrap();
    let h = 1e-6;
    let f = |g: f64, b: f64| {
        end_to_end_loss_with(
            &batch,
            &m,
            &ch,
            &AffineDecoder { gain: g, bias: b },
            None,
            6,
        )
        .unwrap()
        .loss
    };
    let ng = (f(dec.gain + h, dec.bias) - f(dec.gain - h, dec.bias)) / (2.0 * h);
    let nb = (f(dec.gain, dec.bias + h) - f(dec.gain, dec.bias - h)) / (2.0 * h);
    assert!(max_rel_error(&l.decoder_grads, &[ng, nb]) < 1e-6);
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        stage1_iters: 150,
        stage2_iters: 80,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let sampler = SourceSpec::encoder_like().sampler().unwrap();
    for kind in [MappingKind::Mrc, MappingKind::Mic] {
        let m = MappingParams::init(kind, 16, -2.0, 2.0, 20.0).unwrap();
        let a = train(&small_config(4), &m, &sampler).unwrap();
        let b = train(&small_config(4), &m, &sampler).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.mapping.to_json_string(), b.mapping.to_json_string());
        assert_eq!(a.decoder, b.decoder);
        assert_eq!(a.history.len(), 230);
        let c = train(&small_config(5), &m, &sampler).unwrap();
        assert_ne!(a.history, c.history);
    }
}

#[test]
fn stages_touch_only_their_parameters() {
    let sampler = SourceSpec::encoder_like().sampler().unwrap();
    let m = MappingParams::init(MappingKind::Mic, 16, -2.0, 2.0, 20.0).unwrap();
    let only1 = TrainConfig {
        stage2_iters: 0,
        ..small_config(8)
    };
    let a = train(&only1, &m, &sampler).unwrap();
    assert_eq!(a.decoder, AffineDecoder::IDENTITY);
    assert_ne!(a.mapping, m);

    let both = train(&small_config(8), &m, &sampler).unwrap();
    assert_eq!(both.mapping, a.mapping);
    assert_ne!(both.decoder, AffineDecoder::IDENTITY);
    assert!(both.history[..150].iter().all(|e| e.stage == 1));
    assert!(both.history[150..].iter().all(|e| e.stage == 2));
    assert_eq!(&both.history[..150], &a.history[..]);
}

#[test]
fn mic_training_lowers_loss_on_gaussian_source() {
    let sampler = SourceSpec::gaussian(0.0, 1.0).sampler().unwrap();
    let m = MappingParams::init(MappingKind::Mic, 16, -2.0, 2.0, 20.0).unwrap();
    let config = TrainConfig {
        stage2_iters: 0,
        snr_train_db: f64::INFINITY,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&config, &m, &sampler).unwrap();
    let h = &out.history;
    let first = h[..100].iter().map(|e| e.loss).sum::<f64>() / 100.0;
    let last = h[h.len() - 100..].iter().map(|e| e.loss).sum::<f64>() / 100.0;
    assert!(last <= first, "{last} > {first}");
}

#[test]
fn fixed_scale_mode_trains() {
    let sampler = SourceSpec::encoder_like().sampler().unwrap();
    let m = MappingParams::init(MappingKind::Mrc, 16, -2.0, 2.0, 20.0).unwrap();
    let config = TrainConfig {
        scale_mode: constellation_map::trainer::ScaleMode::FixedScale,
        ..small_config(6)
    };
    let out = train(&config, &m, &sampler).unwrap();
    let s = out.fixed_scale.expect("scale calibrated");
    assert!(s.is_finite() && s > 0.0);
    assert!(out.history.iter().all(|e| e.loss.is_finite()));
}
