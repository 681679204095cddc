//! Error types shared across the crate.

use thiserror::Error;

/// Typed failure modes of the geometric, kernel and spectral layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    /// Inverse stereographic projection evaluated at (or too close to) the
    /// projection point (0,0,1).
    #[error("point is singular for the stereographic chart: 1 - x3 = {gap:e}")]
    PoleSingular { gap: f64 },

    /// Chart index outside the atlas.
    #[error("chart index {index} out of range (atlas has {len} charts)")]
    IndexOutOfRange { index: usize, len: usize },

    /// All partition bumps vanish at the queried point.
    #[error("point not covered by any chart bump")]
    UncoveredPoint,

    /// Requested spherical-harmonic degree exceeds the grid band limit.
    #[error("degree {requested} exceeds grid band limit {max}")]
    DegreeOverflow { requested: usize, max: usize },

    /// Stretch left the admissible range of the tension law.
    #[error("stretch {lambda} outside admissible range [{lo}, {hi}]")]
    StretchOutOfRange { lambda: f64, lo: f64, hi: f64 },

    /// Kernel evaluated at the origin.
    #[error("kernel argument too close to the origin: |x| = {norm:e}")]
    OriginSingular { norm: f64 },

    /// Frozen kernel direction A(theta-eta) degenerate.
    #[error("degenerate kernel direction: |A(theta-eta)| = {norm:e}")]
    DegenerateDirection { norm: f64 },

    /// Finite-difference remainder requested at coincident points.
    #[error("coincident chart points")]
    CoincidentPoints,

    /// Arc-chord constant of the state below the evaluation threshold.
    #[error("degenerate state: arc-chord minimum {arc_chord:e} below {threshold:e}")]
    DegenerateState { arc_chord: f64, threshold: f64 },

    /// Matrix rank-deficient where a full-rank 3x2 matrix is required.
    #[error("rank-deficient matrix: sigma_2 = {sigma2:e}")]
    RankDeficient { sigma2: f64 },

    /// Fourier multiplier requested at xi = 0.
    #[error("zero frequency")]
    ZeroFrequency,

    /// Resolvent inversion failed (should not happen inside the sector).
    #[error("singular resolvent at z = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    /// FFT grid cannot resolve the requested kernel.
    #[error("FFT grid too coarse: {detail}")]
    GridTooCoarse { detail: String },

    /// Tension law rejected at construction.
    #[error("inadmissible tension law: {detail}")]
    InadmissibleLaw { detail: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },
}
