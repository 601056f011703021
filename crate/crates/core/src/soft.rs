//! Softmax over negatively scaled distances, shared by both mappings.

/// `w_j = exp(-delta * r_j) / sum_l exp(-delta * r_l)`, evaluated with the
/// smallest distance subtracted first so nothing overflows.
pub fn soft_weights(distances: &[f64], delta: f64) -> Vec<f64> {
    let r_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = distances
        .iter()
        .map(|&r| (-delta * (r - r_min)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Sign with `sign(0) = 0`.
#[inline]
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
