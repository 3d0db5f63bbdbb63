//! Design and verification toolkit for modal-phase-matched (MPM) nonlinear
//! waveguides on dual-layer thin-film lithium niobate.
//!
//! The crate covers the full chain from material dispersion to photon
//! statistics:
//!
//! - [`materials`]: Sellmeier dispersion models and the nonlinear coefficients.
//! - [`geometry`]: the dual-layer rib cross-section and its rasterization into
//!   permittivity / nonlinearity-sign grids.
//! - [`modes`]: full-vector finite-difference eigenmode solver (effective
//!   indices, transverse fields, mode labels, effective areas, fiber coupling).
//! - [`phase_matching`]: phase-mismatch evaluation, modal-phase-matching
//!   searches and sinc² tuning curves.
//! - [`nonlinear`]: the modal overlap factor, second-harmonic conversion
//!   efficiencies and wavelength-scaled propagation loss.
//! - [`photon_stats`]: Monte Carlo simulation of a photon-pair source with its
//!   detection chain, plus the coincidence estimators (PGR, CAR, heralded
//!   g²(0)).

pub mod error;
pub mod geometry;
pub mod materials;
pub mod modes;
pub mod nonlinear;
pub mod phase_matching;
pub mod photon_stats;

pub use error::Error;
pub use geometry::{CrossSectionGrid, WaveguideGeometry};
pub use materials::{MaterialLibrary, MaterialModel, NonlinearCoefficients, OpticAxis};
pub use modes::{Mode, ModeLabel};
pub use nonlinear::{EfficiencyPrediction, OverlapResult};
pub use phase_matching::PhaseMatchResult;
pub use photon_stats::{CoincidenceReport, SourceDetectionSpec, TimeTag, TimeTagStream};
