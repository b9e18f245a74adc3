use crate::dynamics::{lyapunov_points, orbit_multiplier, Trajectory};
use crate::linalg::{dist_inf, norm_inf};
use crate::objective::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    /// Relative tolerance: steps `k` apart must agree to `tol * (1 + ||w||_inf)`.
    pub tol: f64,
    pub k_max: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions { tol: 1e-8, k_max: 2048 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    FixedPoint,
    Cycle,
    Undetermined,
}

impl CycleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CycleKind::FixedPoint => "fixed_point",
            CycleKind::Cycle => "cycle",
            CycleKind::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub kind: CycleKind,
    /// 1 for a fixed point, 0 when undetermined.
    pub period: usize,
    /// The last `period` iterates in chronological order; empty when
    /// undetermined.
    pub orbit: Vec<Vec<f64>>,
    /// Max-norm mismatch between iterates one period apart over the last
    /// period; for undetermined runs, the smallest such mismatch over all
    /// candidate periods.
    pub residual: f64,
    /// Spectral radius of the Jacobian product over the orbit; NaN when
    /// undetermined.
    pub multiplier: f64,
    /// Mean log stretching rate over the dense tail.
    pub lyapunov: f64,
}

/// Smallest `k <= k_max` with `w_{T-j} ~ w_{T-j-k}` for all `j < k`.
pub fn detect_cycle(obj: &Objective, traj: &Trajectory, opts: CycleOptions) -> Result<CycleReport> {
    if traj.diverged {
        return Err(Error::Divergence { norm: crate::linalg::norm2(traj.last()) });
    }
    if opts.k_max == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("k_max and tol must be positive".into()));
    }
    let tail = traj.tail();
    if tail.len() < 2 * opts.k_max {
        return Err(Error::InvalidArgument(format!(
            "dense tail has {} iterates, need at least 2 * k_max = {}",
            tail.len(),
            2 * opts.k_max
        )));
    }
    let last = tail.len() - 1;
    let lyapunov = lyapunov_points(obj, tail, traj.eta)?;
    let mut best = f64::INFINITY;
    for k in 1..=opts.k_max {
        let mut residual = 0.0f64;
        let mut ok = true;
        for j in 0..k {
            let a = &tail[last - j];
            let b = &tail[last - j - k];
            let r = dist_inf(a, b);
            residual = residual.max(r);
            if !(r < opts.tol * (1.0 + norm_inf(a))) {
                ok = false;
                break;
            }
        }
        if !ok {
            best = best.min(residual);
            continue;
        }
        let orbit: Vec<Vec<f64>> = tail[last + 1 - k..].to_vec();
        let multiplier = orbit_multiplier(obj, &orbit, traj.eta)?;
        let kind = if k == 1 { CycleKind::FixedPoint } else { CycleKind::Cycle };
        return Ok(CycleReport { kind, period: k, orbit, residual, multiplier, lyapunov });
    }
    Ok(CycleReport {
        kind: CycleKind::Undetermined,
        period: 0,
        orbit: Vec::new(),
        residual: best,
        multiplier: f64::NAN,
        lyapunov,
    })
}
