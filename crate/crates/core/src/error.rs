use thiserror::Error;

/// Errors produced while building scenarios, stepping platoons, or analysing runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// A bumper-to-bumper gap became non-positive; the run is physically invalid
    /// from this point on and is reported as crashed.
    #[error("vehicle {vehicle} crashed at t = {time:.4} s (gap = {gap:.6} m)")]
    Crash { vehicle: usize, time: f64, gap: f64 },

    /// The recording interval must contain a whole number of steps.
    #[error("step h = {h} s does not divide the recording interval {record_interval} s")]
    StepMismatch { record_interval: f64, h: f64 },

    /// Two trajectory records were compared on different sampling grids.
    #[error("sample grids differ: {0}")]
    GridMismatch(String),

    /// An order fit was requested with too few usable points.
    #[error("order fit needs at least {needed} usable points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    /// A scenario was configured with inconsistent or out-of-range values.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
