//! Learnable constellation mapping for deep joint source-channel coding.
//!
//! Continuous encoder outputs are paired into complex symbols, clipped and
//! mapped onto a finite constellation before power normalization and an AWGN
//! channel. Two learnable mappings are provided next to the uniform QAM
//! baseline:
//!
//! * [`mrc`]: fixed regular grid, learnable per-axis decision boundaries;
//! * [`mic`]: learnable irregular points with nearest-point assignment.
//!
//! Both are trained with straight-through estimators whose soft surrogates
//! have hand-derived gradients ([`grad`]), driven by Adam in a two-stage loop
//! ([`trainer`]). [`experiment`] holds the sweep, export and persistence
//! pieces used by the `constellation-map` binary.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod experiment;
pub mod grad;
mod json;
pub mod mapping;
pub mod mic;
pub mod mrc;
pub mod rng;
pub mod snr_serde;
pub mod soft;
pub mod source;
pub mod trainer;

pub use channel::{awgn_transmit, awgn_transmit_keyed, snr_to_noise_variance, ChannelConfig};
pub use constellation::{
    clip, complex_to_pair, make_qam_grid, make_uniform_levels, pair_to_complex, power_normalize,
    qam_index, qam_map, ComplexPoint, Constellation, LevelSet,
};
pub use error::{Error, Result};
pub use grad::{finite_difference_check, straight_through, DualResult, GradTable, ParamId};
pub use mapping::{load_params, save_params, MappingKind, MappingParams};
pub use mic::{mic_backward_grad, mic_backward_value, mic_forward, mic_map_point, MicParams};
pub use mrc::{
    mrc_backward_grad, mrc_backward_value, mrc_forward, mrc_map_point, BoundarySet, MrcParams,
    DEFAULT_DELTA,
};
pub use source::{gen_source, SourceSpec};
pub use trainer::{adam_step, end_to_end_loss, train, AdamState, AffineDecoder, TrainConfig};
