//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use constellation_map::grad::Axis;
use constellation_map::rng::{Domain, Stream};
use constellation_map::{ComplexPoint, LevelSet, ParamId};
use num_bigfloat::BigFloat;

/// Interval scan: the output level index is the number of boundaries strictly
/// below `x` (an input sitting on a boundary stays in the lower interval).
pub fn interval_scan(x: f64, boundaries: &[f64]) -> usize {
    boundaries.iter().filter(|&&d| d < x).count()
}

/// Exhaustive nearest point with the lowest index winning ties.
pub fn brute_nearest(p: ComplexPoint, points: &[ComplexPoint]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for (j, c) in points.iter().enumerate() {
        let d = (p.re - c.re).powi(2) + (p.im - c.im).powi(2);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Per-axis nearest level by scanning, lowest index on ties.
pub fn nearest_level(x: f64, levels: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in levels.iter().enumerate() {
        if (x - l).abs() < (x - levels[best]).abs() {
            best = i;
        }
    }
    best
}

pub fn uniform(s: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.uniform()
}

pub fn stream(tag: u64) -> Stream {
    Stream::new(0x5EED ^ tag, Domain::Sweep, tag)
}

/// Random boundaries, one drawn uniformly inside each level interval.
pub fn interleaved_boundaries(s: &mut Stream, levels: &LevelSet) -> Vec<f64> {
    levels
        .values()
        .windows(2)
        .map(|w| loop {
            let d = uniform(s, w[0], w[1]);
            if d > w[0] && d < w[1] {
                break d;
            }
        })
        .collect()
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x)
}

fn softmax_weights(dist: &[BigFloat], delta: BigFloat) -> Vec<BigFloat> {
    let min = dist.iter().fold(dist[0], |a, &b| if b < a { b } else { a });
    let e: Vec<BigFloat> = dist.iter().map(|&r| (-(delta * (r - min))).exp()).collect();
    let total = e.iter().fold(BigFloat::from_f64(0.0), |a, &b| a + b);
    e.into_iter().map(|v| v / total).collect()
}

/// MRC soft surrogate in ~40-digit arithmetic. `theta = [x, d_0, .., d_{M-2}]`.
pub fn mrc_surrogate_precise(theta: &[BigFloat], levels: &[f64], delta: f64) -> BigFloat {
    let x = theta[0];
    let d = &theta[1..];
    let delta = bf(delta);
    let dist: Vec<BigFloat> = d.iter().map(|&dj| (x - dj).abs()).collect();
    let w = softmax_weights(&dist, delta);
    let zero = bf(0.0);
    let d_hat = w.iter().zip(d).fold(zero, |a, (&wj, &dj)| a + wj * dj);
    let c_hat = w
        .iter()
        .zip(levels)
        .fold(zero, |a, (&wj, &cj)| a + wj * bf(cj));
    let gap = (bf(levels[levels.len() - 1]) - bf(levels[0])) / bf((levels.len() - 1) as f64);
    let one = bf(1.0);
    let sig = one / (one + (-(delta * (x - d_hat))).exp());
    c_hat + sig * gap
}

/// MIC soft surrogate component `k` (0 = re, 1 = im) in ~40-digit
/// arithmetic. `theta = [p_re, p_im, c0_re, c0_im, ...]`.
pub fn mic_surrogate_precise(theta: &[BigFloat], delta: f64, k: usize) -> BigFloat {
    let (pr, pi) = (theta[0], theta[1]);
    let pts: Vec<(BigFloat, BigFloat)> = theta[2..].chunks(2).map(|c| (c[0], c[1])).collect();
    let dist: Vec<BigFloat> = pts
        .iter()
        .map(|&(cr, ci)| {
            let dr = pr - cr;
            let di = pi - ci;
            (dr * dr + di * di).sqrt()
        })
        .collect();
    let w = softmax_weights(&dist, bf(delta));
    w.iter().zip(&pts).fold(bf(0.0), |a, (&wj, &(cr, ci))| {
        a + wj * if k == 0 { cr } else { ci }
    })
}

/// Central differences of `f` in extended precision, returned as f64.
pub fn precise_central_diff<F>(f: F, at: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[BigFloat]) -> BigFloat,
{
    let base: Vec<BigFloat> = at.iter().map(|&v| bf(v)).collect();
    let hb = bf(h);
    (0..at.len())
        .map(|i| {
            let mut up = base.clone();
            up[i] = up[i] + hb;
            let mut down = base.clone();
            down[i] = down[i] - hb;
            ((f(&up) - f(&down)) / (bf(2.0) * hb)).to_f64()
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-8)`, maximised over parameters.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

pub fn mic_param_ids(n: usize) -> Vec<ParamId> {
    let mut ids = vec![ParamId::Point(Axis::Re), ParamId::Point(Axis::Im)];
    for j in 0..n {
        ids.push(ParamId::Center(j, Axis::Re));
        ids.push(ParamId::Center(j, Axis::Im));
    }
    ids
}

pub fn mrc_param_ids(m_minus_1: usize) -> Vec<ParamId> {
    std::iter::once(ParamId::Input)
        .chain((0..m_minus_1).map(ParamId::Boundary))
        .collect()
}

/// Central differences of both MIC surrogate components in extended
/// precision, with respect to `[p_re, p_im, c0_re, c0_im, ...]`. Moving one
/// point only changes its own softmax term, so only that term is recomputed;
/// the untouched terms are the same values a full evaluation would produce.
pub fn mic_central_diff_precise(at: &[f64], delta: f64, h: f64) -> [Vec<f64>; 2] {
    let p = (bf(at[0]), bf(at[1]));
    let pts: Vec<(BigFloat, BigFloat)> = at[2..].chunks(2).map(|c| (bf(c[0]), bf(c[1]))).collect();
    let delta = bf(delta);
    let term = |p: (BigFloat, BigFloat), c: (BigFloat, BigFloat)| {
        let dr = p.0 - c.0;
        let di = p.1 - c.1;
        (-(delta * (dr * dr + di * di).sqrt())).exp()
    };
    let eval = |e: &[BigFloat], pts: &[(BigFloat, BigFloat)]| {
        let zero = bf(0.0);
        let total = e.iter().fold(zero, |a, &b| a + b);
        let re = e.iter().zip(pts).fold(zero, |a, (&w, c)| a + w * c.0);
        let im = e.iter().zip(pts).fold(zero, |a, (&w, c)| a + w * c.1);
        [re / total, im / total]
    };
    let hb = bf(h);
    let two_h = bf(2.0) * hb;
    let base_e: Vec<BigFloat> = pts.iter().map(|&c| term(p, c)).collect();
    let mut out = [Vec::new(), Vec::new()];
    let mut push = |up: [BigFloat; 2], down: [BigFloat; 2]| {
        for k in 0..2 {
            out[k].push(((up[k] - down[k]) / two_h).to_f64());
        }
    };
    for axis in 0..2 {
        let shifted = |s: BigFloat| {
            let q = if axis == 0 {
                (p.0 + s, p.1)
            } else {
                (p.0, p.1 + s)
            };
            let e: Vec<BigFloat> = pts.iter().map(|&c| term(q, c)).collect();
            eval(&e, &pts)
        };
        push(shifted(hb), shifted(-hb));
    }
    for j in 0..pts.len() {
        for axis in 0..2 {
            let shifted = |s: BigFloat| {
                let mut moved = pts.clone();
                if axis == 0 {
                    moved[j].0 = moved[j].0 + s;
                } else {
                    moved[j].1 = moved[j].1 + s;
                }
                let mut e = base_e.clone();
                e[j] = term(p, moved[j]);
                eval(&e, &moved)
            };
            push(shifted(hb), shifted(-hb));
        }
    }
    out
}
