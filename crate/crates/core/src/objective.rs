//! The finite-sum objective `L(w) = (1/N) sum_i count_i l(-y_i w.x_i)`.

use crate::data::{check_separable, Dataset, Verdict};
use crate::linalg::{dot, norm2, SymMatrix};
use crate::loss::ScalarLoss;
use crate::{Error, Result, DIVERGENCE_NORM};

pub const DEFAULT_TOL: f64 = 1e-12;

/// Dataset plus loss, with `a_i = y_i x_i` and weights `count_i / N`
/// precomputed in a flat layout for the inner loops.
#[derive(Debug, Clone)]
pub struct Objective {
    ds: Dataset,
    loss: ScalarLoss,
    dim: usize,
    signed: Vec<f64>,
    weights: Vec<f64>,
}

impl Objective {
    pub fn new(ds: Dataset, loss: ScalarLoss) -> Self {
        let dim = ds.dim();
        let n = ds.total_count() as f64;
        let mut signed = Vec::with_capacity(ds.groups().len() * dim);
        let mut weights = Vec::with_capacity(ds.groups().len());
        for g in ds.groups() {
            signed.extend(g.x.iter().map(|v| g.y * v));
            weights.push(g.count as f64 / n);
        }
        Objective { ds, loss, dim, signed, weights }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.ds
    }

    pub fn loss(&self) -> &ScalarLoss {
        &self.loss
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Iterator over `(weight, y_i x_i)` per group.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights.iter().copied().zip(self.signed.chunks_exact(self.dim))
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: w.len() });
        }
        Ok(())
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        let v: f64 = self.terms().map(|(c, a)| c * self.loss.eval(-dot(a, w))).sum();
        if !v.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        Ok(v)
    }

    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(w, &mut g)?;
        Ok(g)
    }

    /// Allocation-free gradient for the GD inner loop.
    pub fn gradient_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(w)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, a) in self.terms() {
            let s = -c * self.loss.d1(-dot(a, w));
            for (o, ai) in out.iter_mut().zip(a) {
                *o += s * ai;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(())
    }

    pub fn hessian(&self, w: &[f64]) -> Result<SymMatrix> {
        self.check_dim(w)?;
        let mut h = SymMatrix::zeros(self.dim);
        for (c, a) in self.terms() {
            h.add_outer(c * self.loss.d2(-dot(a, w)), a);
        }
        if h.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hessian"));
        }
        Ok(h)
    }

    /// `lambda_max` of the Hessian at `w`.
    pub fn sharpness(&self, w: &[f64]) -> Result<f64> {
        self.hessian(w)?.lambda_max()
    }

    /// `sum_i (count_i / N) x_i x_i^T`.
    pub fn second_moment(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for (c, a) in self.terms() {
            m.add_outer(c, a);
        }
        m
    }

    /// Global smoothness constant `l''(0) * lambda_max(second moment)`.
    pub fn l_global(&self) -> Result<f64> {
        Ok(self.loss.d2(0.0) * self.second_moment().lambda_max()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Damped Newton up to `d = 64`, gradient descent beyond.
    #[default]
    Auto,
    Newton,
    Gradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w_star: Vec<f64>,
    pub grad_norm: f64,
    /// `lambda_max` of the Hessian at `w_star`.
    pub lambda_star: f64,
    pub l_global: f64,
    pub eta_two_over_l: f64,
    pub eta_one_over_lambda: f64,
    pub eta_two_over_lambda: f64,
    pub iterations: usize,
}

impl Solution {
    fn new(obj: &Objective, w_star: Vec<f64>, grad_norm: f64, iterations: usize) -> Result<Self> {
        let lambda_star = obj.sharpness(&w_star)?;
        let l_global = obj.l_global()?;
        let two_over_lambda = 2.0 / lambda_star;
        Ok(Solution {
            w_star,
            grad_norm,
            lambda_star,
            l_global,
            eta_two_over_l: 2.0 / l_global,
            eta_one_over_lambda: two_over_lambda / 2.0,
            eta_two_over_lambda: two_over_lambda,
            iterations,
        })
    }
}

pub fn minimize(obj: &Objective, tol: f64) -> Result<Solution> {
    minimize_with(obj, tol, Solver::Auto)
}

pub fn minimize_with(obj: &Objective, tol: f64, solver: Solver) -> Result<Solution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if check_separable(obj.dataset()).verdict == Verdict::Separable {
        return Err(Error::Separable);
    }
    let m = obj.second_moment();
    if m.cholesky_solve(0.0, &vec![0.0; obj.dim()]).is_none() {
        return Err(Error::Degenerate("rank-deficient features: the minimizer is not unique".into()));
    }
    let use_newton = match solver {
        Solver::Auto => obj.dim() <= 64,
        Solver::Newton => true,
        Solver::Gradient => false,
    };
    if use_newton {
        newton(obj, tol)
    } else {
        gradient_descent(obj, tol)
    }
}

const NEWTON_MAX_ITERS: usize = 1_000;
const MU_FLOOR: f64 = 1e-12;
const MU_CEILING: f64 = 1e20;

fn check_norm(w: &[f64]) -> Result<()> {
    let n = norm2(w);
    if !(n <= DIVERGENCE_NORM) {
        return Err(Error::Divergence { norm: n });
    }
    Ok(())
}

fn newton(obj: &Objective, tol: f64) -> Result<Solution> {
    let d = obj.dim();
    let mut w = vec![0.0; d];
    let mut f = obj.value(&w)?;
    let mut g = obj.gradient(&w)?;
    let mut gn = norm2(&g);
    for iter in 0..NEWTON_MAX_ITERS {
        if gn < tol {
            return Solution::new(obj, w, gn, iter);
        }
        let h = obj.hessian(&w)?;
        let mut mu = 0.0;
        loop {
            if let Some(step) = h.cholesky_solve(mu, &g) {
                let cand: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a - b).collect();
                check_norm(&cand)?;
                let fc = obj.value(&cand)?;
                let gc = obj.gradient(&cand)?;
                let gcn = norm2(&gc);
                // Near the optimum f stalls at rounding level; gradient decrease
                // then decides.
                let accept = fc < f || (fc <= f + 1e-14 * f.abs() && gcn < gn);
                if accept {
                    w = cand;
                    f = fc;
                    g = gc;
                    gn = gcn;
                    break;
                }
            }
            mu = (2.0 * mu).max(MU_FLOOR);
            if mu > MU_CEILING {
                if gn < tol.sqrt() {
                    // Rounding floor reached; report where we are.
                    return Solution::new(obj, w, gn, iter);
                }
                return Err(Error::Degenerate("Hessian singular beyond damping floor".into()));
            }
        }
    }
    Err(Error::SolverStalled { iters: NEWTON_MAX_ITERS, grad_norm: gn })
}

const GD_MAX_ITERS: usize = 20_000_000;

fn gradient_descent(obj: &Objective, tol: f64) -> Result<Solution> {
    let d = obj.dim();
    let eta = 1.0 / obj.l_global()?;
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    for iter in 0..GD_MAX_ITERS {
        obj.gradient_into(&w, &mut g)?;
        let gn = norm2(&g);
        if gn < tol {
            return Solution::new(obj, w, gn, iter);
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= eta * gi;
        }
        if iter % 1024 == 0 {
            check_norm(&w)?;
        }
    }
    obj.gradient_into(&w, &mut g)?;
    Err(Error::SolverStalled { iters: GD_MAX_ITERS, grad_norm: norm2(&g) })
}
