//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_um} um outside the valid range [{min_um}, {max_um}] um of material '{material}'")]
    OutOfTransparencyWindow {
        material: String,
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("unknown material '{0}'")]
    UnknownMaterial(String),

    #[error("invalid material definition '{name}': {reason}")]
    InvalidMaterial { name: String, reason: String },

    #[error("invalid waveguide geometry: {0}")]
    InvalidGeometry(String),

    #[error("no guided mode found in the bracket n_eff in ({lower:.6}, {upper:.6})")]
    NoGuidedMode { lower: f64, upper: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (worst relative residual {residual:.3e}, requested {requested:.3e})")]
    ConvergenceFailure {
        sweeps: usize,
        residual: f64,
        requested: f64,
    },

    #[error("no higher-order mode: {0}")]
    NoHigherOrderMode(String),

    #[error("energy conservation violated: 1/lambda_p - 1/lambda_s - 1/lambda_i = {imbalance:.3e} (relative {relative:.3e})")]
    EnergyConservationViolated { imbalance: f64, relative: f64 },

    #[error("no sign change in bracket [{0}, {1}]")]
    BracketError(f64, f64),

    #[error("no solution in range [{0}, {1}]")]
    NoSolutionInRange(f64, f64),

    #[error("modes live on different grids ({0} vs {1} cells)")]
    GridMismatch(usize, usize),

    #[error("overlap denominator integral {0:.3e} below 1e-12; refusing to divide")]
    DegenerateDenominator(f64),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("invalid detection spec: {0}")]
    InvalidSpec(String),

    #[error("zero coincidence count; PGR estimator undefined")]
    ZeroCoincidence,

    #[error("zero heralded coincidence count; g2_H estimator undefined")]
    ZeroHeraldedCoincidence,

    #[error("small-occupancy approximation violated: pair_rate * window = {0:.3} > 0.1")]
    RegimeViolation(f64),

    #[error("time-tag format error: {0}")]
    TimeTagFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
