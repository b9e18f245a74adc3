//! Gradient descent with large constant step sizes on non-separable linear
//! classification.
//!
//! The crate is organised around the GD map `T(w) = w - eta * grad L(w)` for
//! finite-sum objectives `L(w) = (1/N) sum_i count_i * l(-y_i w.x_i)`:
//!
//! - [`loss`]: per-example losses (logistic, squareplus) and a numerical audit
//!   of the structural conditions the cycle constructions rely on.
//! - [`data`]: multiplicity-grouped datasets, LIBSVM and compact parsers, and a
//!   separability checker.
//! - [`objective`]: value, gradient, Hessian, minimizer and critical step sizes.
//! - [`dynamics`]: GD trajectories, the probability-space recurrence, orbit
//!   multipliers and Lyapunov estimates.
//! - [`analysis`]: cycle detection, periodograms, bifurcation sweeps, basin
//!   rasters and sharpness series.
//! - [`construct`]: the counterexample families (toy rank-1 data, 1D kick
//!   recipes, the 2D two-kick construction, Kronecker stacking).
//! - [`export`]: the CSV / PGM / record formats consumed by the CLI.
//!
//! Sweeps, rasters and recipe searches evaluate independent cells through
//! [`Exec`]; with the `parallel` feature (on by default) that fans out over
//! rayon, otherwise everything runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod construct;
pub mod data;
pub mod dynamics;
pub mod export;
pub mod linalg;
pub mod loss;
pub mod objective;
mod par;

pub use analysis::{
    basin_raster, bifurcation_sweep, detect_cycle, eta_grid, psd, sharpness_series, BasinLabel, BasinRaster,
    BifurcationSweep, CycleKind, CycleOptions, CycleReport, PsdResult, RasterSpec, SweepCell, SweepSpec,
};
pub use construct::{
    build_1d, build_2d, eos_demo, hunt_1d, kronecker_stack, make_toy, period2_points, Built, EosDemo, Recipe1D,
    Recipe2D, RecipeConfig, SearchSpace, ToySpec,
};
pub use data::{check_separable, parse_compact, parse_libsvm, Dataset, Group, Separability};
pub use dynamics::{
    gd_step, lyapunov, orbit_multiplier, prob_step, run, EtaRef, EtaSpec, GdConfig, ProbSpace, ProbState, Trajectory,
};
pub use linalg::SymMatrix;
pub use loss::{relu_limit_gap, verify_assumption1, AssumptionReport, GridSpec, ScalarLoss};
pub use objective::{minimize, Objective, Solution, Solver};
pub use par::Exec;

use thiserror::Error;

/// Divergence threshold on `||w||` shared by the solver and the GD runner.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("divergence - data likely separable or degenerate (||w|| = {norm:e})")]
    Divergence { norm: f64 },

    #[error("data is linearly separable: no finite minimizer")]
    Separable,

    #[error("degenerate objective: {0}")]
    Degenerate(String),

    #[error("power iteration did not converge after {iters} iterations (last Rayleigh quotient {rayleigh})")]
    NoConvergence { iters: usize, rayleigh: f64 },

    #[error("solver stalled after {iters} iterations (gradient norm {grad_norm:e})")]
    SolverStalled { iters: usize, grad_norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("period-2 point undefined for eta = {0} (requires eta >= 8)")]
    Period2Undefined(f64),

    #[error("no cycle found in search space after {0} candidates")]
    SearchExhausted(usize),

    #[error("recipe did not produce the expected cycle: {0}")]
    NoCycle(String),

    #[error("unknown loss '{0}' (expected 'logistic' or 'squareplus')")]
    UnknownLoss(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that come from the data or the dynamics rather than
    /// from malformed input (separable data, degenerate features, divergence).
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Separable
                | Error::Degenerate(_)
                | Error::Divergence { .. }
                | Error::NoCycle(_)
                | Error::SearchExhausted(_)
                | Error::Period2Undefined(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
