//! Small dense linear algebra: the problems here have `d` in the single or
//! low double digits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 100_000;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Symmetric matrix stored densely in row-major order; symmetric by
/// construction since every mutator writes both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds from the upper triangle of `f(i, j)`.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self += alpha * v v^T`.
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let ai = alpha * v[i];
            for j in i..d {
                let val = ai * v[j];
                self.data[i * d + j] += val;
                if j != i {
                    self.data[j * d + i] += val;
                }
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = dot(&self.data[i * d..(i + 1) * d], v);
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest eigenvalue.
    ///
    /// Closed form for `d <= 2`; shifted power iteration from a seeded random
    /// start otherwise, stopping when the Rayleigh quotient changes by less
    /// than `1e-12` relative and the residual is below `1e-6 ||A||`.
    pub fn lambda_max(&self) -> Result<f64> {
        match self.dim {
            0 => Err(Error::InvalidArgument("empty matrix".into())),
            1 => Ok(self.data[0]),
            2 => {
                let (a, b, c) = (self.data[0], self.data[1], self.data[3]);
                let half_gap = (0.5 * (a - c)).hypot(b);
                Ok(0.5 * (a + c) + half_gap)
            }
            _ => self.power_iteration(),
        }
    }

    fn power_iteration(&self) -> Result<f64> {
        let d = self.dim;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        // Gershgorin lower bound; shifting by it makes the spectrum nonnegative
        // so the dominant eigenvalue of A + sI is lambda_max(A) + s.
        let lower = (0..d)
            .map(|i| {
                let off: f64 = (0..d).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min);
        let shift = (-lower).max(0.0);
        let frob = self.data.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_1a3b);
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm2(&v);
        v.iter_mut().for_each(|x| *x /= n);
        let mut av = vec![0.0; d];
        let mut rho_prev = f64::NAN;
        let mut rho = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            self.mul_vec(&v, &mut av);
            rho = dot(&v, &av);
            let resid = av.iter().zip(&v).map(|(a, x)| (a - rho * x).powi(2)).sum::<f64>().sqrt();
            if (rho - rho_prev).abs() <= POWER_TOL * rho.abs().max(scale * 1e-300) && resid <= 1e-6 * frob {
                return Ok(rho);
            }
            rho_prev = rho;
            for (x, a) in v.iter_mut().zip(&av) {
                *x = a + shift * *x;
            }
            let n = norm2(&v);
            if n == 0.0 {
                return Ok(rho);
            }
            v.iter_mut().for_each(|x| *x /= n);
        }
        Err(Error::NoConvergence { iters: POWER_MAX_ITERS, rayleigh: rho })
    }

    /// Solves `(A + shift I) x = b` by Cholesky; `None` if not positive
    /// definite at relative pivot level `1e-14`.
    pub fn cholesky_solve(&self, shift: f64, b: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        let diag_scale = (0..d).map(|i| self.get(i, i).abs()).fold(0.0, f64::max) + shift.abs();
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.get(i, j) + if i == j { shift } else { 0.0 };
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if !(s > 1e-14 * diag_scale) {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
            y[i] = (b[i] - s) / l[i * d + i];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
            x[i] = (y[i] - s) / l[i * d + i];
        }
        Some(x)
    }
}

/// Spectral radius of a general real square matrix (row-major).
pub fn spectral_radius(m: &[f64], dim: usize) -> f64 {
    match dim {
        1 => m[0].abs(),
        2 => {
            let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
            let tr = a + d;
            let det = a * d - b * c;
            let disc = 0.25 * tr * tr - det;
            if disc >= 0.0 {
                let r = disc.sqrt();
                (0.5 * tr + r).abs().max((0.5 * tr - r).abs())
            } else {
                // complex pair, |z|^2 = det
                det.max(0.0).sqrt()
            }
        }
        _ => {
            let mat = nalgebra::DMatrix::from_row_slice(dim, dim, m);
            mat.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
        }
    }
}

/// Row-major `a * b` for square matrices.
pub(crate) fn mat_mul(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}
