//! Limit-behavior classification and the sweep/raster drivers.

mod basin;
mod cycle;
mod spectrum;
mod sweep;

pub use basin::{basin_raster, BasinLabel, BasinRaster, RasterSpec};
pub use cycle::{detect_cycle, CycleKind, CycleOptions, CycleReport};
pub use spectrum::{psd, PsdResult};
pub use sweep::{bifurcation_sweep, eta_grid, BifurcationSweep, SweepCell, SweepSpec};

use crate::dynamics::Trajectory;
use crate::objective::Objective;
use crate::Result;

/// `lambda_max(hessian(w_t))` for every recorded iterate.
pub fn sharpness_series(obj: &Objective, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.iterates.iter().map(|w| obj.sharpness(w)).collect()
}
