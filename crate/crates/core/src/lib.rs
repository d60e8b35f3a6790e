//! Dissipative entanglement distillation and continuous quantum repeaters.
//!
//! The crate is organized bottom-up:
//!
//! - [`qops`]: dense complex operator algebra on labeled tensor products
//!   (embedding, partial trace/transpose, Werner states, entanglement measures).
//! - [`liouville`]: Lindblad master equations (jump / Hamiltonian / Kraus-channel
//!   terms), adaptive integration, dense-superoperator steady states.
//! - [`scheme1`]: the two-source-pair entangler with a flip coupling to a target
//!   pair, in both the unitary (no-communication) and LOCC-channel variants.
//! - [`werner`]: the scalar Werner-fidelity algebra: exact propagator, steady
//!   states, continuous distillation quadrature, the 4-to-1 protocol, boosting.
//! - [`swap`]: continuous entanglement swapping (polynomial, quadrature, closed
//!   form, and a 6-qubit master-equation cross-check).
//! - [`commchan`]: dissipative classical channels and the one-round LOCC
//!   construction on communication registers, with occupation statistics and
//!   the effective-generator error scaling.
//! - [`repeater`]: the nested level recursion, resource counting, and parameter
//!   search.

pub mod commchan;
pub mod error;
pub mod liouville;
pub mod qops;
pub mod quad;
pub mod random;
pub mod repeater;
pub mod rk45;
pub mod scheme1;
pub mod swap;
pub mod tol;
pub mod werner;

pub use error::{QdError, Result};
pub use liouville::{LindbladTerm, MasterEquation, StepControl, TermKind};
pub use qops::{DensityMatrix, Operator, SystemLayout, C64};
