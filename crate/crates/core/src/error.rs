use thiserror::Error;

/// Errors raised by the library. Verification failures are not errors; they
/// are recorded in a [`crate::compiler::Report`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("breakpoints must be strictly increasing and finite")]
    InvalidBreakpoints,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),

    #[error("function does not vanish outside [0, {0}]")]
    Unsupported(usize),

    #[error("breakpoint {point} is not on the grid of step {step}")]
    OffGrid { point: f64, step: f64 },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("unknown builtin mask `{0}` (expected haar, hat, bspline3 or d4)")]
    UnknownMask(String),

    #[error("x = {0} lies outside [0, 1]")]
    OutsideUnitInterval(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot pad {what} from {current} down to {target}")]
    PadBelowCurrent {
        what: &'static str,
        current: usize,
        target: usize,
    },

    #[error("identity channel {neuron} of layer {layer} is unbounded on the declared domain")]
    UnboundedChannel { layer: usize, neuron: usize },

    #[error("layer {0} mixes relu and identity activations; lower the network first")]
    MixedActivations(usize),

    #[error("invalid gadget parameters: {0}")]
    InvalidParams(String),

    #[error("function is not special: {0}")]
    NotSpecial(String),

    #[error("coordinate index {k} outside 1..={n}")]
    CoordinateOutOfRange { k: usize, n: usize },

    #[error("wavelet combination is empty")]
    EmptyCombination,

    #[error("invalid dyadic interval: {0}")]
    InvalidInterval(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
