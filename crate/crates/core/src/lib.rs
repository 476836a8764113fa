//! Broadband acoustic direction-of-arrival estimation for static microphone
//! arrays.
//!
//! Two grid-search localizers share one STFT front end:
//!
//! * **MCC-PHAT** ([`mccphat`]): the product, over every microphone pair short
//!   enough to be free of spatial aliasing, of the pair's GCC-PHAT
//!   correlation evaluated at the delay a candidate direction implies.
//! * **Wideband MUSIC** ([`subspace`]): the narrowband MUSIC pseudo-spectrum
//!   summed over the analysis band.
//!
//! [`synth`] builds anechoic far-field test scenes with ground truth,
//! [`metrics`] scores trajectories with single-target OSPA, and [`pipeline`]
//! ties everything into the batch run behind the `doa` binary.
//!
//! Microphone indices are 0-based and follow the geometry's order.

pub mod error;
pub mod gate;
pub mod geometry;
pub mod mccphat;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod spatial;
pub mod spectral;
pub mod subspace;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use geometry::{
    select_pairs, steering_delays, steering_vector, ArrayGeometry, Direction, DoaGrid,
    ElevationMode, PairSet,
};
pub use mccphat::{
    mcc_phat_score, mcc_phat_spectrum, tdoa_estimate, GccCorrelation, MccPhatConfig,
    MccPhatEstimator, TdoaEstimate,
};
pub use metrics::{align, angular_error, ospa_rmse, OspaConfig, OspaResult, Trajectory};
pub use pipeline::{run, MethodSelection, RunConfig, RunReport};
pub use spatial::{Method, SpatialSpectrum};
pub use spectral::{csd, phat_weight, stft, SpectralFrame, StftConfig, Window};
pub use subspace::{hermitian_eig, music_wideband, MusicConfig, MusicEstimator};
pub use synth::{synthesize, Scene, SceneSpec};
