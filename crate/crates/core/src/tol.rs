//! Central table of numerical tolerances and size guards.
//!
//! Every comparison threshold used by the crate lives here so that a single
//! build carries one consistent set of knobs.

/// Hermiticity check before eigendecomposition: max |M - M†|.
pub const HERMITICITY: f64 = 1e-10;

/// Eigenvalues of a density operator in [-EIG_CLAMP, 0) are clamped to zero;
/// anything more negative is rejected.
pub const EIG_CLAMP: f64 = 1e-10;

/// Trace of a density operator must be within this of one.
pub const DENSITY_TRACE: f64 = 1e-10;

/// Euclidean norm of a pure state must be within this of one.
pub const PURE_NORM: f64 = 1e-12;

/// Unitarity check U†U = I.
pub const UNITARY: f64 = 1e-10;

/// Trace preservation check for Kraus families: |Σ aᵢ†aᵢ - I|.
pub const KRAUS_TP: f64 = 1e-9;

/// Trace-decreasing check: λ_max(Σ aᵢ†aᵢ) ≤ 1 + KRAUS_TD.
pub const KRAUS_TD: f64 = 1e-9;

/// Mixture weights must sum to one within this.
pub const WEIGHT_SUM: f64 = 1e-12;

/// Partial trace preserves the full trace within this.
pub const PARTIAL_TRACE: f64 = 1e-12;

/// Purification must reproduce the state within this.
pub const PURIFY: f64 = 1e-10;

/// The two coherent-information routes must agree within this.
pub const IC_ROUTES: f64 = 1e-8;

/// The two entanglement-fidelity routes must agree within this.
pub const FE_ROUTES: f64 = 1e-10;

/// Choi matrices of constructed channels: minimum eigenvalue ≥ -CHOI_PSD.
pub const CHOI_PSD: f64 = 1e-9;

/// Dual-route Hilbert-Schmidt computations must agree within this.
pub const HS_ROUTES: f64 = 1e-9;

/// Singular values below this are treated as zero in pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Isometry columns orthonormal within this: |V†V - I|.
pub const FRAME_ORTHO: f64 = 1e-10;

/// POVM completeness: |Σ pᵢ - I|.
pub const POVM_COMPLETE: f64 = 1e-9;

/// Projector idempotence and hermiticity.
pub const PROJECTOR: f64 = 1e-10;

/// Eigenvalues within this relative distance are treated as one spectral
/// value when forming frequency-typical projections.
pub const SPECTRAL_GROUPING: f64 = 1e-9;

/// Default constant c = c' = 1/(2 ln 2) in the typicality mass bounds
/// (Pinsker-consistent choice; certificates also report the measured best).
pub fn typicality_c() -> f64 {
    1.0 / (2.0 * std::f64::consts::LN_2)
}

/// Guards: combinatorial and memory caps, overridable per call site.
#[derive(Debug, Clone, Copy)]
pub struct Guards {
    /// Maximum block length for type enumeration.
    pub max_block_length: usize,
    /// Maximum alphabet size for type enumeration.
    pub max_alphabet: usize,
    /// Maximum number of Kraus words materialized for a tensor-power channel.
    pub max_kraus_words: usize,
    /// Maximum Hilbert-space dimension for dense operator materialization.
    pub max_dense_dim: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            max_block_length: 20,
            max_alphabet: 4,
            max_kraus_words: 4096,
            max_dense_dim: 4096,
        }
    }
}
