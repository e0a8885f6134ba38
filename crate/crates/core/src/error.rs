//! Error taxonomy for the workbench.
//!
//! Variants split into two broad families that the CLI maps onto exit codes:
//! problems with what the user handed us (netlists, decks, malformed
//! elements) and problems the numerics ran into (singular systems,
//! non-convergent eigensolves, missing unity crossings, latch-up).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A circuit element failed validation (bad value, unknown node, duplicate name).
    #[error("element `{element}`: {message}")]
    BadElement { element: String, message: String },

    /// The assembled MNA system could not be factorized. `unknown` names the
    /// node voltage or source branch current whose pivot collapsed — usually a
    /// floating subgraph with no DC path to ground.
    #[error(
        "singular system: pivot {pivot:.3e} while eliminating `{unknown}` \
         (floating node or subgraph with no DC path to ground?)"
    )]
    SingularSystem { unknown: String, pivot: f64 },

    /// A frequency-sweep solve failed at one particular point.
    #[error("at omega = {omega:.6e} rad/s: {source}")]
    AtOmega {
        omega: f64,
        #[source]
        source: Box<Error>,
    },

    /// Pole extraction needs at least one reactive element.
    #[error("capacitance matrix is identically zero; the network has no poles")]
    NoDynamics,

    /// The QR eigenvalue iteration did not settle within its budget.
    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    /// Every deflation shift left the pencil singular — the transfer function
    /// is identically zero or the pencil is structurally degenerate.
    #[error("degenerate pencil: all shifts singular ({context})")]
    DegeneratePencil { context: String },

    /// A device record is internally inconsistent or unusable for the
    /// requested operation.
    #[error("device `{device}`: {message}")]
    BadDevice { device: String, message: String },

    /// A mismatch delta pushed a transistor out of saturation (or drove its
    /// current factor non-positive); the sample must be rejected.
    #[error("device `{device}` left saturation under mismatch: {message}")]
    OutOfSaturation { device: String, message: String },

    /// Effective stage output resistance came out non-positive: the
    /// active-load positive feedback exceeded the total node conductance and
    /// the stage latches instead of amplifying.
    #[error(
        "stage {stage} latch-up: effective output resistance {r_ohms:.4e} ohm is not positive \
         (cross-coupled load transconductance exceeds the node conductance)"
    )]
    LatchUp { stage: u8, r_ohms: f64 },

    /// A design-level quantity failed validation (non-positive node
    /// capacitance, missing device role, bad sweep value, ...).
    #[error("design: {0}")]
    BadDesign(String),

    /// The magnitude response never crossed 0 dB inside the evaluated span.
    #[error("no unity-gain crossing between {f_start:.6e} Hz and {f_stop:.6e} Hz")]
    NoUnityCrossing { f_start: f64, f_stop: f64 },

    /// A requested level crossing (e.g. the -3 dB point) was not bracketed.
    #[error("no {what} crossing between {f_start:.6e} Hz and {f_stop:.6e} Hz")]
    NoCrossing {
        what: String,
        f_start: f64,
        f_stop: f64,
    },

    /// Caller-side argument error on a library entry point.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Netlist text failed to lex/parse; positions are 1-based.
    #[error("netlist line {line}, col {col}: {message} (near `{token}`)")]
    Netlist {
        line: u32,
        col: u32,
        token: String,
        message: String,
    },

    /// Design-deck text failed to parse or validate; line is 1-based.
    #[error("deck line {line}: {message}")]
    Deck { line: u32, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors produced by numerics on well-formed input (as opposed
    /// to rejected input). The CLI maps these to a distinct exit code.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::SingularSystem { .. }
            | Error::NoDynamics
            | Error::EigenNonConvergence { .. }
            | Error::DegeneratePencil { .. }
            | Error::OutOfSaturation { .. }
            | Error::LatchUp { .. }
            | Error::NoUnityCrossing { .. }
            | Error::NoCrossing { .. } => true,
            Error::AtOmega { source, .. } => source.is_numeric(),
            Error::BadElement { .. }
            | Error::BadDevice { .. }
            | Error::BadDesign(_)
            | Error::InvalidArgument(_)
            | Error::Netlist { .. }
            | Error::Deck { .. } => false,
        }
    }
}
