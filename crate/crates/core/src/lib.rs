//! Real-time-iteration NMPC with input move blocking embedded in multiple
//! shooting, tailored O(NM) condensing and a warm-started active-set QP solver.

pub mod blocking;
pub mod condensing;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod qp;
pub mod rti;
pub mod shooting;

pub use blocking::BlockStructure;
pub use error::{Error, Result};
