//! Numerical machinery for locating solitons inside KdV N-soliton fields.
//!
//! The KdV equation `∂ₜu + 6u∂ₓu + ∂ₓ³u = 0` admits N-soliton solutions
//! parametrised by ordered spectral parameters `0 < χ₁ < … < χ_N` and impact
//! parameters `y ∈ ℝᴺ`. This crate evaluates the field `u = 2∂ₓ²log τ`
//! through several tau-function representations, solves the nonlinear
//! magnifying-glass position equations, extracts per-soliton effective
//! positions, performs local and fluid-cell projections, and evolves the
//! soliton-gas density of states with the GHD kinetic equation.
//!
//! Module map:
//! - [`model`] — configurations, two-body scattering shifts, asymptotic data
//! - [`tau`] — tau-function representations and field jets
//! - [`observables`] — conserved densities and their integrals
//! - [`positions`] — contraction/expansion maps, extremal positions, core
//! - [`effective`] — effective positions, imprecision, Bethe residuals
//! - [`projections`] — soliton removal, extraction, fluid-cell projections
//! - [`gas`] — gas generators and assumption checkers
//! - [`hydro`] — effective velocity, kinetic equation, empirical densities
//! - [`verify`] — quantitative theorem reports

pub mod effective;
pub mod gas;
pub mod hydro;
mod linalg;
pub mod model;
pub mod observables;
pub mod positions;
pub mod projections;
mod quad;
pub mod tau;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spectral parameters coincide: chi_i = chi_j = {0}")]
    CoincidentSpectralParameters(f64),
    #[error("spectral parameters must be strictly ordered and positive: {0}")]
    OrderingViolation(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("configuration is empty")]
    EmptyConfig,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("soliton count {n} exceeds exact-expansion cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("jet order {got} insufficient, need at least {need}")]
    InsufficientJetOrder { need: usize, got: usize },
    #[error("conserved density index {0} unsupported (only k = 0, 1, 2)")]
    UnsupportedChargeIndex(usize),
    #[error("tau representation failed ({0}); try the centred form")]
    RepresentationFailure(String),
    #[error("displacements inconsistent with impact parameters: residual {residual:e}")]
    InconsistentDisplacements { residual: f64 },
    #[error("position solver failed at x* = {x_star}: best residual {residual:e} after {iterations} iterations")]
    SolverFailure {
        x_star: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("quadrature did not converge: error estimate {error:e} after {intervals} subdivisions")]
    QuadratureNonConvergence { error: f64, intervals: usize },
    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("subsets overlap at index {0}")]
    OverlappingSubsets(usize),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
