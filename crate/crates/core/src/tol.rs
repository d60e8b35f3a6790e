//! Centralized numeric tolerances.
//!
//! Every tolerance that appears in a public contract lives here so tests and
//! implementations cannot drift apart.

/// Hermiticity and trace checks on density matrices (absolute, entrywise /
/// on the trace).
pub const STATE_CHECK: f64 = 1e-9;

/// Eigenvalues of a state may undershoot zero by at most this much.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// Kraus completeness required at construction of a channel term.
pub const KRAUS_BUILD: f64 = 1e-9;

/// Kraus completeness asserted for the purpose-built LOCC channels.
pub const KRAUS_STRICT: f64 = 1e-12;

/// Agreement between the matrix-free generator application and the dense
/// superoperator matrix.
pub const GENERATOR_CONSISTENCY: f64 = 1e-12;

/// Trace-norm residual accepted for a steady state.
pub const STEADY_RESIDUAL: f64 = 1e-8;

/// Default relative tolerance of the adaptive integrator.
pub const RK_REL: f64 = 1e-9;

/// Default absolute tolerance of the adaptive integrator.
pub const RK_ABS: f64 = 1e-12;

/// Trace / Hermiticity drift allowed along integrated trajectories.
pub const TRAJECTORY_DRIFT: f64 = 1e-8;

/// Absolute tolerance of the adaptive Gauss-Kronrod quadrature.
pub const QUAD_ABS: f64 = 1e-10;

/// Disagreement between the swap quadrature and its closed form that flags a
/// transcription error.
pub const SWAP_FORM_AGREEMENT: f64 = 1e-9;
