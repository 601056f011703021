//! Mapping to a regular constellation with learnable decision boundaries.
//!
//! Each axis is quantized independently to a fixed uniform [`LevelSet`] of
//! `M` levels. The `M - 1` boundaries are the trainable parameters: the
//! forward pass finds the nearest boundary `d_k` and returns `c_k` or
//! `c_{k+1}` depending on which side of it the input lies (a Heaviside step
//! that is 0 at the boundary itself). The backward surrogate replaces the
//! hard boundary and level by softmax-weighted averages with sharpness
//! `delta` and the step by a sigmoid.

use serde_json::{json, Value};

use crate::constellation::{clip, make_qam_grid, ComplexPoint, Constellation, LevelSet};
use crate::error::{Error, Result};
use crate::grad::{straight_through, Axis, DualResult, GradTable, ParamId};
use crate::json;
use crate::soft::{sigmoid, sign0, soft_weights};

/// Default softmax sharpness.
pub const DEFAULT_DELTA: f64 = 20.0;

/// Decision boundaries for one axis plus the surrogate sharpness.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    pub boundaries: Vec<f64>,
    pub delta: f64,
}

impl BoundarySet {
    pub fn new(boundaries: Vec<f64>, delta: f64) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::invalid(
                "boundary set must hold at least one boundary",
            ));
        }
        if boundaries.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("boundaries must be finite"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(Self { boundaries, delta })
    }

    /// Boundaries at the midpoints of adjacent levels.
    pub fn midpoints(levels: &LevelSet, delta: f64) -> Result<Self> {
        Self::new(levels.midpoints(), delta)
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// `levels[k] < d_k < levels[k+1]` for every k (which implies sorted).
    pub fn is_interleaved(&self, levels: &LevelSet) -> bool {
        let v = levels.values();
        self.boundaries
            .iter()
            .enumerate()
            .all(|(k, &d)| v[k] < d && d < v[k + 1])
    }

    /// Index of the nearest boundary, lowest index on ties.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = (x - self.boundaries[0]).abs();
        for (j, &d) in self.boundaries.iter().enumerate().skip(1) {
            let dist = (x - d).abs();
            if dist < best_d {
                best = j;
                best_d = dist;
            }
        }
        best
    }

    fn check_against(&self, levels: &LevelSet) -> Result<()> {
        if self.len() + 1 != levels.len() {
            return Err(Error::ShapeMismatch {
                expected: levels.len() - 1,
                actual: self.len(),
            });
        }
        Ok(())
    }
}

/// Hard mapping of one (already clipped) coordinate. Returns the level value
/// and its index.
pub fn mrc_forward(x: f64, d: &BoundarySet, levels: &LevelSet) -> (f64, usize) {
    let k = d.nearest(x);
    let idx = if x - d.boundaries[k] > 0.0 { k + 1 } else { k };
    (levels.values()[idx], idx)
}

struct Soft {
    w: Vec<f64>,
    d_hat: f64,
    c_hat: f64,
    s: f64,
}

fn soft_parts(x: f64, d: &BoundarySet, levels: &LevelSet) -> Soft {
    let dist: Vec<f64> = d.boundaries.iter().map(|&b| (x - b).abs()).collect();
    let w = soft_weights(&dist, d.delta);
    let d_hat = w.iter().zip(&d.boundaries).map(|(w, b)| w * b).sum();
    let c_hat = w.iter().zip(levels.values()).map(|(w, c)| w * c).sum();
    let s = sigmoid(d.delta * (x - d_hat));
    Soft { w, d_hat, c_hat, s }
}

/// Smooth surrogate `c_hat + sigmoid(delta (x - d_hat)) * gap`.
pub fn mrc_backward_value(x: f64, d: &BoundarySet, levels: &LevelSet) -> f64 {
    let sp = soft_parts(x, d, levels);
    sp.c_hat + sp.s * levels.gap()
}

/// Partial derivatives of [`mrc_backward_value`] with respect to `x`
/// ([`ParamId::Input`]) and every boundary ([`ParamId::Boundary`]).
pub fn mrc_backward_grad(x: f64, d: &BoundarySet, levels: &LevelSet) -> GradTable {
    let (dx, dd) = backward_partials(x, d, levels);
    std::iter::once((ParamId::Input, dx))
        .chain(
            dd.into_iter()
                .enumerate()
                .map(|(j, g)| (ParamId::Boundary(j), g)),
        )
        .collect()
}

// With a_j = -delta |x - d_j| and w = softmax(a):
//   d c_hat / d a_j = w_j (c_j - c_hat),  d d_hat / d a_j = w_j (d_j - d_hat)
//   d a_j / d x = -delta s_j,             d a_j / d d_j = delta s_j
// and d_hat also depends on d_j directly with weight w_j.
fn backward_partials(x: f64, d: &BoundarySet, levels: &LevelSet) -> (f64, Vec<f64>) {
    let delta = d.delta;
    let gap = levels.gap();
    let sp = soft_parts(x, d, levels);
    let sig_slope = gap * delta * sp.s * (1.0 - sp.s);

    let mut dx_c = 0.0;
    let mut dx_d = 0.0;
    let mut dd = Vec::with_capacity(d.len());
    for (j, (&dj, &cj)) in d.boundaries.iter().zip(levels.values()).enumerate() {
        let wj = sp.w[j];
        let sj = sign0(x - dj);
        let c_term = wj * (cj - sp.c_hat) * delta * sj;
        let d_term = wj * (dj - sp.d_hat) * delta * sj;
        dx_c -= c_term;
        dx_d -= d_term;
        // d d_hat / d d_j = w_j + d_term
        dd.push(c_term - sig_slope * (wj + d_term));
    }
    let dx = dx_c + sig_slope * (1.0 - dx_d);
    (dx, dd)
}

/// Trainable state of the regular mapping: one boundary set per axis over a
/// shared level set.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcParams {
    pub boundaries_re: BoundarySet,
    pub boundaries_im: BoundarySet,
    pub levels: LevelSet,
}

impl MrcParams {
    pub fn new(
        boundaries_re: BoundarySet,
        boundaries_im: BoundarySet,
        levels: LevelSet,
    ) -> Result<Self> {
        boundaries_re.check_against(&levels)?;
        boundaries_im.check_against(&levels)?;
        if boundaries_re.delta != boundaries_im.delta {
            return Err(Error::invalid("both axes must share one delta"));
        }
        Ok(Self {
            boundaries_re,
            boundaries_im,
            levels,
        })
    }

    /// Midpoint boundaries on both axes, which reproduce uniform QAM exactly.
    pub fn midpoint_init(levels: LevelSet, delta: f64) -> Result<Self> {
        let d = BoundarySet::midpoints(&levels, delta)?;
        Self::new(d.clone(), d, levels)
    }

    pub fn delta(&self) -> f64 {
        self.boundaries_re.delta
    }

    pub fn axis(&self, axis: Axis) -> &BoundarySet {
        match axis {
            Axis::Re => &self.boundaries_re,
            Axis::Im => &self.boundaries_im,
        }
    }

    /// The finite output set, i.e. the regular grid.
    pub fn constellation(&self) -> Constellation {
        make_qam_grid(&self.levels, &self.levels)
    }

    /// Hard mapping of a point; returns the output and its canonical grid
    /// index.
    pub fn forward(&self, p: ComplexPoint) -> (ComplexPoint, usize) {
        let (lo, hi) = (self.levels.v_min(), self.levels.v_max());
        let (re, ri) = mrc_forward(clip(p.re, lo, hi), &self.boundaries_re, &self.levels);
        let (im, ii) = mrc_forward(clip(p.im, lo, hi), &self.boundaries_im, &self.levels);
        (ComplexPoint::new(re, im), ii * self.levels.len() + ri)
    }

    /// Human-readable notes about boundaries that left their interleaved
    /// position (the map may then no longer be monotone).
    pub fn warnings(&self) -> Vec<String> {
        [Axis::Re, Axis::Im]
            .into_iter()
            .filter(|&a| !self.axis(a).is_interleaved(&self.levels))
            .map(|a| {
                format!("mrc boundaries on axis {a:?} are no longer interleaved with the levels")
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "mrc",
            "levels": self.levels.to_json(),
            "d_re": self.boundaries_re.boundaries,
            "d_im": self.boundaries_im.boundaries,
            "delta": self.delta(),
        })
    }

    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        let obj = json::object(value, path)?;
        json::expect_type(obj, path, "mrc")?;
        let levels = LevelSet::from_json(
            json::field(obj, path, "levels")?,
            &json::join(path, "levels"),
        )?;
        let delta = json::f64_field(obj, path, "delta")?;
        if !(delta > 0.0) {
            return Err(Error::schema(json::join(path, "delta"), "must be positive"));
        }
        let mut sets = Vec::with_capacity(2);
        for name in ["d_re", "d_im"] {
            let d = json::f64_array(obj, path, name)?;
            if d.len() + 1 != levels.len() {
                return Err(Error::schema(
                    json::join(path, name),
                    format!("expected {} boundaries, got {}", levels.len() - 1, d.len()),
                ));
            }
            sets.push(
                BoundarySet::new(d, delta)
                    .map_err(|e| Error::schema(json::join(path, name), e.to_string()))?,
            );
        }
        let d_im = sets.pop().expect("two sets");
        let d_re = sets.pop().expect("two sets");
        Self::new(d_re, d_im, levels)
    }
}

/// Clip, map both axes and attach the surrogate derivatives.
///
/// The real output row holds `Point(Re)` and `AxisBoundary(Re, j)`; the
/// imaginary row the same for `Im`.
pub fn mrc_map_point(p: ComplexPoint, params: &MrcParams) -> DualResult<ComplexPoint> {
    let (lo, hi) = (params.levels.v_min(), params.levels.v_max());
    let p = p.clipped(lo, hi);
    let mut fwd = [0.0; 2];
    let mut bwd = [0.0; 2];
    let mut rows = Vec::with_capacity(2);
    for (slot, (axis, x)) in [(Axis::Re, p.re), (Axis::Im, p.im)].into_iter().enumerate() {
        let d = params.axis(axis);
        fwd[slot] = mrc_forward(x, d, &params.levels).0;
        bwd[slot] = mrc_backward_value(x, d, &params.levels);
        let (dx, dd) = backward_partials(x, d, &params.levels);
        let row: GradTable = std::iter::once((ParamId::Point(axis), dx))
            .chain(
                dd.into_iter()
                    .enumerate()
                    .map(|(j, g)| (ParamId::AxisBoundary(axis, j), g)),
            )
            .collect();
        rows.push(row);
    }
    straight_through(
        ComplexPoint::new(fwd[0], fwd[1]),
        ComplexPoint::new(bwd[0], bwd[1]),
        rows,
    )
    .expect("two components on both sides")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_uniform_levels, qam_map};

    fn qam16_levels() -> LevelSet {
        make_uniform_levels(4, -2.0, 2.0).unwrap()
    }

    fn midpoints(delta: f64) -> BoundarySet {
        BoundarySet::new(vec![-4.0 / 3.0, 0.0, 4.0 / 3.0], delta).unwrap()
    }

    #[test]
    fn forward_examples() {
        let l = qam16_levels();
        let d = midpoints(DEFAULT_DELTA);
        assert_eq!(mrc_forward(0.5, &d, &l), (l.values()[2], 2));
        // exactly on a boundary: the step is 0 there
        assert_eq!(mrc_forward(0.0, &d, &l), (l.values()[1], 1));
        assert_eq!(mrc_forward(-2.0, &d, &l), (-2.0, 0));
        assert_eq!(mrc_forward(2.0, &d, &l), (2.0, 3));
    }

    #[test]
    fn backward_value_examples() {
        let l = qam16_levels();
        let sharp = midpoints(200.0);
        let (f, _) = mrc_forward(0.5, &sharp, &l);
        assert!((mrc_backward_value(0.5, &sharp, &l) - f).abs() < 1e-3);

        let l2 = make_uniform_levels(2, -2.0, 2.0).unwrap();
        let d = BoundarySet::new(vec![0.0], 20.0).unwrap();
        assert_eq!(mrc_backward_value(0.0, &d, &l2), 0.0);
        for x in [-1.9, -0.3, 0.01, 1.2] {
            let want = -2.0 + sigmoid(20.0 * x) * 4.0;
            assert!((mrc_backward_value(x, &d, &l2) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_boundary_gradient_closed_form() {
        let l2 = make_uniform_levels(2, -2.0, 2.0).unwrap();
        let d = BoundarySet::new(vec![0.3], 20.0).unwrap();
        for x in [-1.0, 0.1, 0.29, 0.7] {
            let g = mrc_backward_grad(x, &d, &l2);
            let s = sigmoid(20.0 * (x - 0.3));
            let want = s * (1.0 - s) * 20.0 * 4.0;
            assert!((g.d(ParamId::Input) - want).abs() < 1e-12);
            assert!((g.d(ParamId::Boundary(0)) + want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_saturates_far_from_boundaries() {
        let l = make_uniform_levels(2, -10.0, 10.0).unwrap();
        let d = BoundarySet::new(vec![0.0], 20.0).unwrap();
        assert!(mrc_backward_grad(9.0, &d, &l).d(ParamId::Input).abs() < 1e-60);
        assert!(mrc_backward_grad(-9.0, &d, &l).d(ParamId::Input).abs() < 1e-60);
    }

    #[test]
    fn grad_table_has_declared_params_only() {
        let l = qam16_levels();
        let g = mrc_backward_grad(0.4, &midpoints(20.0), &l);
        let keys: Vec<_> = g.keys().collect();
        assert_eq!(
            keys,
            vec![
                ParamId::Input,
                ParamId::Boundary(0),
                ParamId::Boundary(1),
                ParamId::Boundary(2)
            ]
        );
    }

    #[test]
    fn map_point_examples() {
        let l = qam16_levels();
        let params = MrcParams::midpoint_init(l.clone(), DEFAULT_DELTA).unwrap();
        let r = mrc_map_point(ComplexPoint::new(0.5, -1.8), &params);
        assert_eq!(r.value, ComplexPoint::new(l.values()[2], -2.0));
        for p in params.constellation().points() {
            assert_eq!(mrc_map_point(*p, &params).value, *p);
        }
        let outside = mrc_map_point(ComplexPoint::new(7.0, -3.0), &params);
        let clipped = mrc_map_point(ComplexPoint::new(2.0, -2.0), &params);
        assert_eq!(outside, clipped);
        assert_eq!(
            mrc_map_point(ComplexPoint::new(0.9, 1.1), &params).value,
            qam_map(ComplexPoint::new(0.9, 1.1), &l, &l)
        );
    }

    #[test]
    fn warnings_fire_when_deinterleaved() {
        let l = qam16_levels();
        let mut params = MrcParams::midpoint_init(l, DEFAULT_DELTA).unwrap();
        assert!(params.warnings().is_empty());
        params.boundaries_im.boundaries[0] = 1.0;
        assert_eq!(params.warnings().len(), 1);
    }

    #[test]
    fn construction_checks_sizes() {
        let l = qam16_levels();
        let short = BoundarySet::new(vec![0.0], 20.0).unwrap();
        assert!(MrcParams::new(short.clone(), short, l).is_err());
        assert!(BoundarySet::new(vec![0.0], 0.0).is_err());
        assert!(BoundarySet::new(vec![], 1.0).is_err());
    }
}
