//! Small-signal analysis workbench for a two-stage amplifier compensated by
//! positive capacitive feedback.
//!
//! The crate is layered: a generic MNA engine at the bottom ([`mna`]), MOS
//! small-signal records and mismatch statistics ([`device`]), the amplifier
//! closed-form model and half-circuit builders ([`amp`]), frequency-domain
//! post-processing ([`response`]), the Monte Carlo campaign ([`montecarlo`]),
//! and the text front ends ([`netlist`], [`deck`], [`report`]).

pub mod amp;
pub mod deck;
pub mod device;
pub mod error;
pub mod mna;
pub mod montecarlo;
pub mod netlist;
mod par;
pub mod report;
pub mod response;
pub mod si;

pub use error::{Error, Result};
/// Complex scalar used throughout the public API (re-exported so callers
/// need not depend on `num-complex` themselves).
pub use num_complex::Complex64;
