//! Event-triggered control for safety-critical systems.
//!
//! Trigger laws built from input-to-state safe barrier functions, a
//! sample-and-hold simulator with event localization, and the tools to check
//! minimum interevent times and safety along simulated runs.
//!
//! * [`classk`]: class-K comparison functions and the superset shift.
//! * [`systems`]: control systems, barrier and ISS Lyapunov certificates.
//! * [`triggers`]: trigger residuals, MIET bound, certificate shift.
//! * [`sim`]: sample-and-hold simulation and CSV output.
//! * [`oracle`]: closed-form held solution of the planar counterexample.
//! * [`analysis`]: post-run reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classk;
pub mod error;
pub mod ode;
pub mod oracle;
pub mod sim;
pub mod systems;
pub mod triggers;

pub use error::{Error, Result};
