//! Constellation primitives: points, uniform level sets, QAM grids, clipping,
//! real/complex pairing and transmit power normalization.

use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json;

/// Default lower clipping bound for encoder outputs.
pub const DEFAULT_V_MIN: f64 = -2.0;
/// Default upper clipping bound for encoder outputs.
pub const DEFAULT_V_MAX: f64 = 2.0;

/// One constellation point, real and imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn clipped(self, v_min: f64, v_max: f64) -> Self {
        Self::new(clip(self.re, v_min, v_max), clip(self.im, v_min, v_max))
    }

    pub fn dist_sq(self, other: ComplexPoint) -> f64 {
        let dr = self.re - other.re;
        let di = self.im - other.im;
        dr * dr + di * di
    }

    pub fn dist(self, other: ComplexPoint) -> f64 {
        (self.re - other.re).hypot(self.im - other.im)
    }
}

impl fmt::Display for ComplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.re, self.im)
    }
}

/// Saturates `x` to `[v_min, v_max]`.
#[inline]
pub fn clip(x: f64, v_min: f64, v_max: f64) -> f64 {
    x.max(v_min).min(v_max)
}

/// `M` uniformly spaced quantization levels covering `[v_min, v_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    values: Vec<f64>,
    v_min: f64,
    v_max: f64,
}

impl LevelSet {
    /// Builds `count` levels `v_min + i * (v_max - v_min) / (count - 1)`.
    pub fn uniform(count: usize, v_min: f64, v_max: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!(
                "level count must be at least 2, got {count}"
            )));
        }
        if !(v_min < v_max) || !v_min.is_finite() || !v_max.is_finite() {
            return Err(Error::invalid(format!(
                "level range must satisfy v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        let span = v_max - v_min;
        let denom = (count - 1) as f64;
        let mut values: Vec<f64> = (0..count)
            .map(|i| v_min + i as f64 * span / denom)
            .collect();
        // pin the last level so rounding never leaves it off the range end
        values[count - 1] = v_max;
        Ok(Self {
            values,
            v_min,
            v_max,
        })
    }

    /// Rebuilds a level set from stored values, checking they are the uniform
    /// grid over `[v_min, v_max]`.
    pub fn from_parts(values: Vec<f64>, v_min: f64, v_max: f64) -> Result<Self> {
        let expected = Self::uniform(values.len(), v_min, v_max)?;
        let span = v_max - v_min;
        for (i, (a, b)) in values.iter().zip(&expected.values).enumerate() {
            if (a - b).abs() > 1e-12 * span {
                return Err(Error::invalid(format!(
                    "level {i} = {a} is not on the uniform grid (expected {b})"
                )));
            }
        }
        Ok(Self {
            values,
            v_min,
            v_max,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Constant spacing between adjacent levels.
    pub fn gap(&self) -> f64 {
        (self.v_max - self.v_min) / (self.values.len() - 1) as f64
    }

    /// Midpoints between adjacent levels.
    pub fn midpoints(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Index of the nearest level to `x` (after clipping); ties go to the
    /// lower index.
    pub fn nearest_index(&self, x: f64) -> usize {
        let x = clip(x, self.v_min, self.v_max);
        let mut best = 0;
        let mut best_d = (x - self.values[0]).abs();
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            let d = (x - v).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "levels",
            "values": self.values,
            "v_min": self.v_min,
            "v_max": self.v_max,
        })
    }

    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        let obj = json::object(value, path)?;
        json::expect_type(obj, path, "levels")?;
        let values = json::f64_array(obj, path, "values")?;
        let v_min = json::f64_field(obj, path, "v_min")?;
        let v_max = json::f64_field(obj, path, "v_max")?;
        Self::from_parts(values, v_min, v_max)
            .map_err(|e| Error::schema(json::join(path, "values"), e.to_string()))
    }
}

/// Builds `count` uniform levels over `[v_min, v_max]`.
pub fn make_uniform_levels(count: usize, v_min: f64, v_max: f64) -> Result<LevelSet> {
    LevelSet::uniform(count, v_min, v_max)
}

/// Ordered finite set of constellation points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<ComplexPoint>,
}

impl Constellation {
    pub fn new(points: Vec<ComplexPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("constellation has no points".into()));
        }
        if points
            .iter()
            .any(|p| !p.re.is_finite() || !p.im.is_finite())
        {
            return Err(Error::invalid("constellation points must be finite"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [ComplexPoint] {
        &mut self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the point closest to `p` in Euclidean distance; ties go to
    /// the lowest index.
    pub fn nearest_index(&self, p: ComplexPoint) -> usize {
        let mut best = 0;
        let mut best_d = p.dist_sq(self.points[0]);
        for (j, &c) in self.points.iter().enumerate().skip(1) {
            let d = p.dist_sq(c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "constellation",
            "points": points_to_json(&self.points),
        })
    }

    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        let obj = json::object(value, path)?;
        json::expect_type(obj, path, "constellation")?;
        let points = json::point_array(obj, path, "points")?;
        Self::new(points).map_err(|e| Error::schema(json::join(path, "points"), e.to_string()))
    }
}

pub(crate) fn points_to_json(points: &[ComplexPoint]) -> Value {
    Value::Array(points.iter().map(|p| json!([p.re, p.im])).collect())
}

/// Cartesian product of two level sets. Points are ordered with the
/// imaginary index outer and the real index inner, so point `i * M_re + r`
/// has real level `r` and imaginary level `i`.
pub fn make_qam_grid(levels_re: &LevelSet, levels_im: &LevelSet) -> Constellation {
    let points = levels_im
        .values()
        .iter()
        .flat_map(|&im| {
            levels_re
                .values()
                .iter()
                .map(move |&re| ComplexPoint::new(re, im))
        })
        .collect();
    Constellation { points }
}

/// Pairs consecutive reals `(x[2k], x[2k+1])` into complex points.
pub fn pair_to_complex(block: &[f64]) -> Result<Vec<ComplexPoint>> {
    if block.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "block length must be even, got {}",
            block.len()
        )));
    }
    Ok(block
        .chunks_exact(2)
        .map(|c| ComplexPoint::new(c[0], c[1]))
        .collect())
}

/// Inverse of [`pair_to_complex`].
pub fn complex_to_pair(points: &[ComplexPoint]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.re, p.im]).collect()
}

/// Scales `block` so that its mean square equals `power`.
///
/// Returns the normalized block and the multiplier that was applied; the
/// receiver divides by it to undo the normalization.
pub fn power_normalize(block: &[f64], power: f64) -> Result<(Vec<f64>, f64)> {
    let scale = power_scale(block, power)?;
    Ok((block.iter().map(|&x| x * scale).collect(), scale))
}

/// The multiplier `sqrt(P * B / sum x^2)` used by [`power_normalize`].
pub fn power_scale(block: &[f64], power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!(
            "power must be positive, got {power}"
        )));
    }
    if block.is_empty() {
        return Err(Error::EmptyInput("cannot normalize an empty block".into()));
    }
    let energy: f64 = block.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::DegenerateInput("block has zero power".into()));
    }
    if !energy.is_finite() {
        return Err(Error::DegenerateInput("block power is not finite".into()));
    }
    Ok((power * block.len() as f64 / energy).sqrt())
}

/// Uniform QAM mapping: per-axis nearest level, after clipping.
pub fn qam_map(p: ComplexPoint, levels_re: &LevelSet, levels_im: &LevelSet) -> ComplexPoint {
    ComplexPoint::new(
        levels_re.values()[levels_re.nearest_index(p.re)],
        levels_im.values()[levels_im.nearest_index(p.im)],
    )
}

/// Canonical grid index of the QAM cell containing `p`.
pub fn qam_index(p: ComplexPoint, levels_re: &LevelSet, levels_im: &LevelSet) -> usize {
    levels_im.nearest_index(p.im) * levels_re.len() + levels_re.nearest_index(p.re)
}
