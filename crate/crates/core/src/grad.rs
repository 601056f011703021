//! Straight-through gradient plumbing and a central-difference checker.
//!
//! A mapping's forward pass is piecewise constant, so its derivatives are
//! taken from a smooth surrogate ("backward value"). [`DualResult`] carries
//! both values plus the surrogate's partial derivatives; downstream code only
//! ever chains through `grads`.

use std::collections::BTreeMap;

use crate::constellation::ComplexPoint;
use crate::error::{Error, Result};

/// Real or imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Re,
    Im,
}

/// Identifies one differentiable input of a mapping operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    /// Scalar input `x` of a per-axis operation.
    Input,
    /// Boundary `d_j` of a per-axis operation.
    Boundary(usize),
    /// One component of the complex input point.
    Point(Axis),
    /// Boundary `d_j` on the given axis.
    AxisBoundary(Axis, usize),
    /// One component of constellation point `c_j`.
    Center(usize, Axis),
}

/// Partial derivatives of one scalar output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradTable {
    entries: BTreeMap<ParamId, f64>,
}

impl GradTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: ParamId, d: f64) {
        self.entries.insert(id, d);
    }

    pub fn get(&self, id: ParamId) -> Option<f64> {
        self.entries.get(&id).copied()
    }

    /// Derivative with respect to `id`, zero when the output does not depend
    /// on it.
    pub fn d(&self, id: ParamId) -> f64 {
        self.get(id).unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.entries.keys().copied()
    }
}

impl FromIterator<(ParamId, f64)> for GradTable {
    fn from_iter<I: IntoIterator<Item = (ParamId, f64)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Values that expose a fixed number of real components.
pub trait Components: Copy {
    fn components(&self) -> usize;
}

impl Components for f64 {
    fn components(&self) -> usize {
        1
    }
}

impl Components for ComplexPoint {
    fn components(&self) -> usize {
        2
    }
}

/// Hard forward value glued to the derivatives of a soft surrogate.
///
/// `grads[k]` holds the partials of output component `k` (for complex values,
/// 0 is the real part and 1 the imaginary part).
#[derive(Debug, Clone, PartialEq)]
pub struct DualResult<V> {
    pub value: V,
    pub backward_value: V,
    pub grads: Vec<GradTable>,
}

/// Pairs the forward value with the backward surrogate and its derivatives.
pub fn straight_through<V: Components>(
    forward: V,
    backward: V,
    grads: Vec<GradTable>,
) -> Result<DualResult<V>> {
    let n = forward.components();
    if backward.components() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: backward.components(),
        });
    }
    if grads.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: grads.len(),
        });
    }
    Ok(DualResult {
        value: forward,
        backward_value: backward,
        grads,
    })
}

/// Outcome of [`finite_difference_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub numeric: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
}

/// Compares `analytic` against central differences of `f` at `at`.
///
/// The relative error for parameter `i` is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check<F>(f: F, at: &[f64], analytic: &[f64], h: f64) -> Result<FdReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    if analytic.len() != at.len() {
        return Err(Error::ShapeMismatch {
            expected: at.len(),
            actual: analytic.len(),
        });
    }
    let mut theta = at.to_vec();
    let mut numeric = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        theta[i] = at[i] + h;
        let up = f(&theta)?;
        theta[i] = at[i] - h;
        let down = f(&theta)?;
        theta[i] = at[i];
        numeric.push((up - down) / (2.0 * h));
    }
    let rel_errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .collect();
    let max_rel_error = rel_errors.iter().copied().fold(0.0, f64::max);
    Ok(FdReport {
        numeric,
        rel_errors,
        max_rel_error,
    })
}
