//! The mapping variants behind one type, plus their parameter vectors and
//! JSON persistence.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::constellation::{
    clip, make_qam_grid, make_uniform_levels, qam_index, qam_map, ComplexPoint, Constellation,
    LevelSet,
};
use crate::error::{Error, Result};
use crate::grad::{straight_through, Axis, DualResult, GradTable, ParamId};
use crate::json;
use crate::mic::{mic_map_point, MicParams};
use crate::mrc::{mrc_map_point, MrcParams};

/// Which mapping family a configuration asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    Qam,
    Mrc,
    Mic,
}

impl MappingKind {
    pub fn name(self) -> &'static str {
        match self {
            MappingKind::Qam => "qam",
            MappingKind::Mrc => "mrc",
            MappingKind::Mic => "mic",
        }
    }
}

impl std::str::FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qam" => Ok(MappingKind::Qam),
            "mrc" => Ok(MappingKind::Mrc),
            "mic" => Ok(MappingKind::Mic),
            other => Err(Error::invalid(format!(
                "unknown mapping kind `{other}` (expected qam, mrc or mic)"
            ))),
        }
    }
}

/// A constellation mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingParams {
    /// Uniform per-axis quantization (no learnable parameters).
    Qam {
        levels: LevelSet,
    },
    Mrc(MrcParams),
    Mic(MicParams),
    /// Clipping only; stands in for the full-resolution constellation.
    Identity {
        v_min: f64,
        v_max: f64,
    },
}

/// Per-axis level count for a square constellation of `order` points.
pub fn square_side(order: usize) -> Result<usize> {
    let side = (order as f64).sqrt().round() as usize;
    if side < 2 || side * side != order {
        return Err(Error::invalid(format!(
            "constellation order must be a perfect square of at least 4, got {order}"
        )));
    }
    Ok(side)
}

impl MappingParams {
    /// Default initialization: uniform QAM levels, midpoint MRC boundaries
    /// or a QAM-grid MIC constellation, all with `order` points.
    pub fn init(
        kind: MappingKind,
        order: usize,
        v_min: f64,
        v_max: f64,
        delta: f64,
    ) -> Result<Self> {
        let side = square_side(order)?;
        let levels = make_uniform_levels(side, v_min, v_max)?;
        Ok(match kind {
            MappingKind::Qam => MappingParams::Qam { levels },
            MappingKind::Mrc => MappingParams::Mrc(MrcParams::midpoint_init(levels, delta)?),
            MappingKind::Mic => MappingParams::Mic(MicParams::qam_init(side, v_min, v_max, delta)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MappingParams::Qam { .. } => "qam",
            MappingParams::Mrc(_) => "mrc",
            MappingParams::Mic(_) => "mic",
            MappingParams::Identity { .. } => "identity",
        }
    }

    pub fn clip_range(&self) -> (f64, f64) {
        match self {
            MappingParams::Qam { levels } => (levels.v_min(), levels.v_max()),
            MappingParams::Mrc(m) => (m.levels.v_min(), m.levels.v_max()),
            MappingParams::Mic(m) => (m.v_min, m.v_max),
            MappingParams::Identity { v_min, v_max } => (*v_min, *v_max),
        }
    }

    /// The finite output set, `None` for the identity mapping.
    pub fn constellation(&self) -> Option<Constellation> {
        match self {
            MappingParams::Qam { levels } => Some(make_qam_grid(levels, levels)),
            MappingParams::Mrc(m) => Some(m.constellation()),
            MappingParams::Mic(m) => Some(m.constellation.clone()),
            MappingParams::Identity { .. } => None,
        }
    }

    /// Hard mapping with the cluster index of the output (canonical grid
    /// index for QAM/MRC, point index for MIC, `None` for identity).
    pub fn forward(&self, p: ComplexPoint) -> (ComplexPoint, Option<usize>) {
        match self {
            MappingParams::Qam { levels } => (
                qam_map(p, levels, levels),
                Some(qam_index(p, levels, levels)),
            ),
            MappingParams::Mrc(m) => {
                let (q, i) = m.forward(p);
                (q, Some(i))
            }
            MappingParams::Mic(m) => {
                let (q, i) = m.forward(p);
                (q, Some(i))
            }
            MappingParams::Identity { v_min, v_max } => (p.clipped(*v_min, *v_max), None),
        }
    }

    /// Maps a block of reals pairwise. The block length must be even.
    pub fn forward_block(&self, block: &[f64]) -> Result<Vec<f64>> {
        if block.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "block length must be even, got {}",
                block.len()
            )));
        }
        Ok(block
            .chunks_exact(2)
            .flat_map(|c| {
                let (q, _) = self.forward(ComplexPoint::new(c[0], c[1]));
                [q.re, q.im]
            })
            .collect())
    }

    /// Hard value plus surrogate derivatives with respect to the point and
    /// the learnable parameters. QAM and identity use a pass-through
    /// derivative for the point (1 inside the clip range, 0 outside).
    pub fn map_point(&self, p: ComplexPoint) -> DualResult<ComplexPoint> {
        match self {
            MappingParams::Mrc(m) => mrc_map_point(p, m),
            MappingParams::Mic(m) => mic_map_point(p, m),
            MappingParams::Qam { .. } | MappingParams::Identity { .. } => {
                let (lo, hi) = self.clip_range();
                let (value, _) = self.forward(p);
                let pass = |x: f64| if x > lo && x < hi { 1.0 } else { 0.0 };
                let rows = vec![
                    [(ParamId::Point(Axis::Re), pass(p.re))]
                        .into_iter()
                        .collect(),
                    [(ParamId::Point(Axis::Im), pass(p.im))]
                        .into_iter()
                        .collect(),
                ];
                let soft = ComplexPoint::new(clip(p.re, lo, hi), clip(p.im, lo, hi));
                let backward = if matches!(self, MappingParams::Identity { .. }) {
                    soft
                } else {
                    value
                };
                straight_through(value, backward, rows).expect("two components")
            }
        }
    }

    /// Identifiers of the learnable parameters, in the order used by
    /// [`Self::param_values`] and [`Self::set_param_values`].
    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            MappingParams::Mrc(m) => [Axis::Re, Axis::Im]
                .into_iter()
                .flat_map(|a| (0..m.axis(a).len()).map(move |j| ParamId::AxisBoundary(a, j)))
                .collect(),
            MappingParams::Mic(m) => (0..m.len())
                .flat_map(|j| [ParamId::Center(j, Axis::Re), ParamId::Center(j, Axis::Im)])
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn param_values(&self) -> Vec<f64> {
        match self {
            MappingParams::Mrc(m) => m
                .boundaries_re
                .boundaries
                .iter()
                .chain(&m.boundaries_im.boundaries)
                .copied()
                .collect(),
            MappingParams::Mic(m) => m.points().iter().flat_map(|c| [c.re, c.im]).collect(),
            _ => Vec::new(),
        }
    }

    pub fn set_param_values(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.param_ids().len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: values.len(),
            });
        }
        match self {
            MappingParams::Mrc(m) => {
                let n = m.boundaries_re.len();
                m.boundaries_re.boundaries.copy_from_slice(&values[..n]);
                m.boundaries_im.boundaries.copy_from_slice(&values[n..]);
            }
            MappingParams::Mic(m) => {
                for (c, v) in m
                    .constellation
                    .points_mut()
                    .iter_mut()
                    .zip(values.chunks_exact(2))
                {
                    *c = ComplexPoint::new(v[0], v[1]);
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Notes about parameter states worth surfacing to a user.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            MappingParams::Mrc(m) => m.warnings(),
            _ => Vec::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            MappingParams::Qam { levels } => json!({ "type": "qam", "levels": levels.to_json() }),
            MappingParams::Mrc(m) => m.to_json(),
            MappingParams::Mic(m) => m.to_json(),
            MappingParams::Identity { v_min, v_max } => {
                json!({ "type": "identity", "v_min": v_min, "v_max": v_max })
            }
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let path = "$";
        let obj = json::object(value, path)?;
        match json::str_field(obj, path, "type")? {
            "qam" => {
                let levels = LevelSet::from_json(
                    json::field(obj, path, "levels")?,
                    &json::join(path, "levels"),
                )?;
                Ok(MappingParams::Qam { levels })
            }
            "mrc" => Ok(MappingParams::Mrc(MrcParams::from_json(value, path)?)),
            "mic" => Ok(MappingParams::Mic(MicParams::from_json(value, path)?)),
            "identity" => {
                let v_min = json::f64_field(obj, path, "v_min")?;
                let v_max = json::f64_field(obj, path, "v_max")?;
                if !(v_min < v_max) {
                    return Err(Error::schema("$.v_max", "must exceed v_min"));
                }
                Ok(MappingParams::Identity { v_min, v_max })
            }
            other => Err(Error::schema(
                "$.type",
                format!("unknown mapping type \"{other}\" (expected qam, mrc, mic or identity)"),
            )),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("finite values serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
        Self::from_json(&value)
    }
}

/// Writes mapping parameters as pretty JSON.
pub fn save_params(params: &MappingParams, path: &Path) -> Result<()> {
    fs::write(path, params.to_json_string() + "\n").map_err(|e| Error::io(path, e))
}

/// Reads mapping parameters written by [`save_params`].
pub fn load_params(path: &Path) -> Result<MappingParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MappingParams::from_json_str(&text)
}

/// Sum of the gradient row entries weighted by an upstream derivative,
/// accumulated into `out` in [`MappingParams::param_ids`] order.
pub(crate) fn accumulate(row: &GradTable, upstream: f64, ids: &[ParamId], out: &mut [f64]) {
    if upstream == 0.0 {
        return;
    }
    for (slot, id) in out.iter_mut().zip(ids) {
        if let Some(g) = row.get(*id) {
            *slot += upstream * g;
        }
    }
}
