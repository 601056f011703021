//! Mapping to an irregular constellation of learnable points.
//!
//! Forward: nearest constellation point in Euclidean distance. Backward: the
//! softmax-weighted mean of all points with weights
//! `exp(-delta |p - c_j|) / sum_l exp(-delta |p - c_l|)`.

use serde_json::{json, Value};

use crate::constellation::{
    make_qam_grid, make_uniform_levels, points_to_json, ComplexPoint, Constellation, DEFAULT_V_MAX,
    DEFAULT_V_MIN,
};
use crate::error::{Error, Result};
use crate::grad::{straight_through, Axis, DualResult, GradTable, ParamId};
use crate::json;
use crate::soft::soft_weights;

pub use crate::mrc::DEFAULT_DELTA;

#[derive(Debug, Clone, PartialEq)]
pub struct MicParams {
    pub constellation: Constellation,
    pub delta: f64,
    /// Clipping range applied to inputs.
    pub v_min: f64,
    pub v_max: f64,
}

impl MicParams {
    pub fn new(constellation: Constellation, delta: f64) -> Result<Self> {
        Self::with_range(constellation, delta, DEFAULT_V_MIN, DEFAULT_V_MAX)
    }

    pub fn with_range(
        constellation: Constellation,
        delta: f64,
        v_min: f64,
        v_max: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(v_min < v_max) {
            return Err(Error::invalid(format!(
                "invalid clip range [{v_min}, {v_max}]"
            )));
        }
        Ok(Self {
            constellation,
            delta,
            v_min,
            v_max,
        })
    }

    /// Square QAM initialization with `per_axis` levels per axis over
    /// `[v_min, v_max]`.
    pub fn qam_init(per_axis: usize, v_min: f64, v_max: f64, delta: f64) -> Result<Self> {
        let levels = make_uniform_levels(per_axis, v_min, v_max)?;
        Self::with_range(make_qam_grid(&levels, &levels), delta, v_min, v_max)
    }

    pub fn len(&self) -> usize {
        self.constellation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constellation.is_empty()
    }

    pub fn points(&self) -> &[ComplexPoint] {
        self.constellation.points()
    }

    /// Hard mapping of a point, clipping first.
    pub fn forward(&self, p: ComplexPoint) -> (ComplexPoint, usize) {
        mic_forward(p.clipped(self.v_min, self.v_max), self)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "mic",
            "points": points_to_json(self.points()),
            "delta": self.delta,
            "v_min": self.v_min,
            "v_max": self.v_max,
        })
    }

    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        let obj = json::object(value, path)?;
        json::expect_type(obj, path, "mic")?;
        let points = json::point_array(obj, path, "points")?;
        let constellation = Constellation::new(points)
            .map_err(|e| Error::schema(json::join(path, "points"), e.to_string()))?;
        let delta = json::f64_field(obj, path, "delta")?;
        if !(delta > 0.0) {
            return Err(Error::schema(json::join(path, "delta"), "must be positive"));
        }
        let v_min = match obj.get("v_min") {
            Some(_) => json::f64_field(obj, path, "v_min")?,
            None => DEFAULT_V_MIN,
        };
        let v_max = match obj.get("v_max") {
            Some(_) => json::f64_field(obj, path, "v_max")?,
            None => DEFAULT_V_MAX,
        };
        Self::with_range(constellation, delta, v_min, v_max)
            .map_err(|e| Error::schema(json::join(path, "v_min"), e.to_string()))
    }
}

/// Nearest point of the constellation to `p` (assumed clipped); ties go to
/// the lowest index.
pub fn mic_forward(p: ComplexPoint, params: &MicParams) -> (ComplexPoint, usize) {
    let j = params.constellation.nearest_index(p);
    (params.points()[j], j)
}

fn weights(p: ComplexPoint, params: &MicParams) -> (Vec<f64>, Vec<f64>) {
    let dist: Vec<f64> = params.points().iter().map(|&c| p.dist(c)).collect();
    let w = soft_weights(&dist, params.delta);
    (w, dist)
}

fn weighted_mean(w: &[f64], points: &[ComplexPoint]) -> ComplexPoint {
    let mut out = ComplexPoint::default();
    for (&wj, c) in w.iter().zip(points) {
        out.re += wj * c.re;
        out.im += wj * c.im;
    }
    out
}

/// Soft assignment surrogate: softmax-weighted mean of the constellation.
pub fn mic_backward_value(p: ComplexPoint, params: &MicParams) -> ComplexPoint {
    let (w, _) = weights(p, params);
    weighted_mean(&w, params.points())
}

/// Jacobian of [`mic_backward_value`]: row 0 is the real output, row 1 the
/// imaginary output; columns are `Point(axis)` and `Center(j, axis)`.
///
/// A coincident point (`p == c_j`) contributes no distance derivative.
pub fn mic_backward_grad(p: ComplexPoint, params: &MicParams) -> [GradTable; 2] {
    let delta = params.delta;
    let pts = params.points();
    let (w, dist) = weights(p, params);
    let out = weighted_mean(&w, pts);
    let outs = [out.re, out.im];

    // unit vectors (p - c_j) / |p - c_j|
    let units: Vec<[f64; 2]> = pts
        .iter()
        .zip(&dist)
        .map(|(c, &r)| {
            if r > 0.0 {
                [(p.re - c.re) / r, (p.im - c.im) / r]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();

    let mut rows = [GradTable::new(), GradTable::new()];
    for (k, row) in rows.iter_mut().enumerate() {
        let mut dp = [0.0; 2];
        for (j, c) in pts.iter().enumerate() {
            let ck = if k == 0 { c.re } else { c.im };
            // d out_k / d a_j, with a_j = -delta |p - c_j|
            let da = w[j] * (ck - outs[k]);
            for m in 0..2 {
                dp[m] -= da * delta * units[j][m];
                let direct = if m == k { w[j] } else { 0.0 };
                let axis = if m == 0 { Axis::Re } else { Axis::Im };
                row.insert(ParamId::Center(j, axis), direct + da * delta * units[j][m]);
            }
        }
        row.insert(ParamId::Point(Axis::Re), dp[0]);
        row.insert(ParamId::Point(Axis::Im), dp[1]);
    }
    rows
}

/// Clip, map to the nearest point and attach the soft-assignment Jacobian.
pub fn mic_map_point(p: ComplexPoint, params: &MicParams) -> DualResult<ComplexPoint> {
    let p = p.clipped(params.v_min, params.v_max);
    let (value, _) = mic_forward(p, params);
    let backward = mic_backward_value(p, params);
    let [re, im] = mic_backward_grad(p, params);
    straight_through(value, backward, vec![re, im]).expect("two components on both sides")
}
