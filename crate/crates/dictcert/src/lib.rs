//! Local-optimality certificates for ℓ¹ dictionary learning.
//!
//! Given a factorization Y = AX with a unit-column dictionary A and sparse
//! coefficients X, decide whether (A, X) is a local minimum of ‖X‖₁ over
//! the constraint manifold, by a golfing-scheme dual certificate combined
//! with a balancedness bound, or by solving the linearized problem directly.

pub mod balancedness;
pub mod certificate;
pub mod error;
pub mod io;
pub mod krylov;
pub mod learner;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod rng;
pub mod tangent;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Dictionary;
pub use model::{Instance, SparseCoeffs, SupportPattern};
