use crate::dynamics::run_resolved;
use crate::linalg::{dist_inf, norm_inf};
use crate::objective::Objective;
use crate::par::Exec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
    pub iters: usize,
}

impl RasterSpec {
    /// Center of cell `(i, j)`; row `j = 0` is the top (largest `y`).
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let x = self.xmin + (i as f64 + 0.5) * (self.xmax - self.xmin) / self.nx as f64;
        let y = self.ymax - (j as f64 + 0.5) * (self.ymax - self.ymin) / self.ny as f64;
        [x, y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasinLabel {
    Other,
    ToCycle,
    ToFixedPoint,
}

impl BasinLabel {
    /// Gray level used in the PGM output.
    pub fn gray(self) -> u8 {
        match self {
            BasinLabel::Other => 0,
            BasinLabel::ToCycle => 128,
            BasinLabel::ToFixedPoint => 255,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinRaster {
    pub spec: RasterSpec,
    pub eta: f64,
    /// Row-major, `ny` rows of `nx`, top row first.
    pub labels: Vec<BasinLabel>,
}

impl BasinRaster {
    pub fn count(&self, label: BasinLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn get(&self, i: usize, j: usize) -> BasinLabel {
        self.labels[j * self.spec.nx + i]
    }
}

/// Runs GD from every cell center and labels the end point by proximity to
/// `w_star` or to any point of `orbit`, within `1e-6 (1 + ||w*||)`.
pub fn basin_raster(
    obj: &Objective,
    eta: f64,
    spec: RasterSpec,
    w_star: &[f64],
    orbit: &[Vec<f64>],
    exec: Exec,
) -> Result<BasinRaster> {
    if obj.dim() != 2 || w_star.len() != 2 || orbit.iter().any(|p| p.len() != 2) {
        return Err(Error::Dimension { expected: 2, got: obj.dim() });
    }
    if spec.nx == 0 || spec.ny == 0 || !(spec.xmax > spec.xmin) || !(spec.ymax > spec.ymin) {
        return Err(Error::InvalidArgument("raster needs positive resolution and nonempty bounds".into()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let tol = 1e-6 * (1.0 + norm_inf(w_star));
    let labels = exec.map(spec.nx * spec.ny, |k| {
        let c = spec.center(k % spec.nx, k / spec.nx);
        let Ok(tr) = run_resolved(obj, &c, eta, spec.iters, spec.iters + 1, 1) else {
            return BasinLabel::Other;
        };
        if tr.diverged {
            return BasinLabel::Other;
        }
        let end = tr.last();
        if dist_inf(end, w_star) <= tol {
            BasinLabel::ToFixedPoint
        } else if orbit.iter().any(|p| dist_inf(end, p) <= tol) {
            BasinLabel::ToCycle
        } else {
            BasinLabel::Other
        }
    });
    Ok(BasinRaster { spec, eta, labels })
}
