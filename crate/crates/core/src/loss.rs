//! Per-example losses and a numerical audit of their structural properties.
//!
//! A loss `l` enters the objective as `l(-y w.x)`. The constructions in
//! [`crate::construct`] need `l` to behave like a smoothed ReLU: positive,
//! strictly convex, slope in `(0, 1)`, curvature peaked at the origin and
//! decaying fast enough that `eps^2 * l(z / eps^2) -> max(z, 0)`.

use std::fmt;

use crate::{Error, Result};

/// Logistic evaluation switches to the asymptotic branch above this argument.
const LOGISTIC_BRANCH: f64 = 30.0;

/// A scalar loss with hand-coded first and second derivatives.
#[derive(Clone, Copy)]
pub struct ScalarLoss {
    name: &'static str,
    eval: fn(f64) -> f64,
    d1: fn(f64) -> f64,
    d2: fn(f64) -> f64,
    // l(z) - max(z, 0), evaluated without cancellation when available.
    excess: Option<fn(f64) -> f64>,
}

impl fmt::Debug for ScalarLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarLoss").field("name", &self.name).finish()
    }
}

impl PartialEq for ScalarLoss {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl ScalarLoss {
    /// Wraps arbitrary closed forms; used for negative tests of the audit.
    pub fn custom(name: &'static str, eval: fn(f64) -> f64, d1: fn(f64) -> f64, d2: fn(f64) -> f64) -> Self {
        ScalarLoss { name, eval, d1, d2, excess: None }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "logistic" => Ok(logistic()),
            "squareplus" => Ok(squareplus()),
            other => Err(Error::UnknownLoss(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        (self.eval)(z)
    }

    #[inline]
    pub fn d1(&self, z: f64) -> f64 {
        (self.d1)(z)
    }

    #[inline]
    pub fn d2(&self, z: f64) -> f64 {
        (self.d2)(z)
    }

    /// `l(z) - max(z, 0)`.
    pub fn relu_excess(&self, z: f64) -> f64 {
        match self.excess {
            Some(f) => f(z),
            None => self.eval(z) - z.max(0.0),
        }
    }
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(p / (1 - p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

fn logistic_eval(z: f64) -> f64 {
    if z > LOGISTIC_BRANCH {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic_d2(z: f64) -> f64 {
    // sigma(z) * (1 - sigma(z)) with both factors computed stably.
    sigmoid(z) * sigmoid(-z)
}

fn logistic_excess(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p()
}

/// `l(z) = log(1 + exp(z))`.
pub fn logistic() -> ScalarLoss {
    ScalarLoss { name: "logistic", eval: logistic_eval, d1: sigmoid, d2: logistic_d2, excess: Some(logistic_excess) }
}

fn squareplus_eval(z: f64) -> f64 {
    let r = (4.0 + z * z).sqrt();
    if z >= 0.0 {
        0.5 * (r + z)
    } else {
        // 0.5 (r + z) = 2 / (r - z), free of cancellation for z << 0.
        2.0 / (r - z)
    }
}

fn squareplus_d1(z: f64) -> f64 {
    let r = (4.0 + z * z).sqrt();
    if z >= 0.0 {
        0.5 * (z / r + 1.0)
    } else {
        2.0 / ((r - z) * r)
    }
}

fn squareplus_d2(z: f64) -> f64 {
    2.0 / (z * z + 4.0).powf(1.5)
}

fn squareplus_excess(z: f64) -> f64 {
    if z >= 0.0 {
        2.0 / ((4.0 + z * z).sqrt() + z)
    } else {
        squareplus_eval(z)
    }
}

/// `l(z) = 0.5 (sqrt(4 + z^2) + z)`.
pub fn squareplus() -> ScalarLoss {
    ScalarLoss {
        name: "squareplus",
        eval: squareplus_eval,
        d1: squareplus_d1,
        d2: squareplus_d2,
        excess: Some(squareplus_excess),
    }
}

/// `|eps^2 l(z / eps^2) - max(z, 0)|`, which vanishes as `eps -> 0` for
/// losses that look like a ReLU at large scale.
pub fn relu_limit_gap(loss: &ScalarLoss, z: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let e2 = eps * eps;
    Ok((e2 * loss.relu_excess(z / e2)).abs())
}

/// Uniform evaluation grid `[min, max]` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { min: -50.0, max: 50.0, points: 10_001 }
    }
}

impl GridSpec {
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(move |k| self.min + h * k as f64)
    }
}

pub const DEFAULT_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst_violation: f64,
    /// Offending argument for a failed check, when there is one.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub loss_name: &'static str,
    pub checks: Vec<Check>,
    pub grid: GridSpec,
    pub eps: Vec<f64>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NAMES: [&str; 5] =
    ["positivity", "derivative_bounds", "tail_limits", "curvature_unimodality", "curvature_decay"];

/// Tracks the worst violation seen for one check.
struct Audit {
    name: &'static str,
    worst: f64,
    at: Option<f64>,
    non_finite: bool,
}

impl Audit {
    fn new(name: &'static str) -> Self {
        Audit { name, worst: 0.0, at: None, non_finite: false }
    }

    fn value(&mut self, z: f64, v: f64) -> bool {
        if !v.is_finite() {
            if !self.non_finite {
                self.non_finite = true;
                self.worst = f64::INFINITY;
                self.at = Some(z);
            }
            return false;
        }
        true
    }

    fn violate(&mut self, z: f64, amount: f64) {
        if amount > 0.0 && amount > self.worst && !self.non_finite {
            self.worst = amount;
            self.at = Some(z);
        }
    }

    fn finish(self) -> Check {
        let passed = !self.non_finite && self.worst == 0.0;
        Check { name: self.name, passed, worst_violation: self.worst, at: if passed { None } else { self.at } }
    }
}

/// Grid audit of the loss conditions used by the constructions.
///
/// Checks, each reported once:
/// - `positivity`: `l > 0` and `l'' > 0` on the grid.
/// - `derivative_bounds`: `0 < l' <= 1` on the grid (the strict upper bound is
///   not decidable where `l'` rounds to 1).
/// - `tail_limits`: along `z_j = grid.min * 10^j`, `l(z_j)` and `l'(z_j)`
///   decrease to below 1e-9, and `1 - l'(-z_j)` does too.
/// - `curvature_unimodality`: `l''` nondecreasing on `z <= 0` and nonincreasing
///   on `z >= 0`.
/// - `curvature_decay`: `l''(1/eps) / eps^2` strictly decreasing along `eps`,
///   ending at most half its first value.
pub fn verify_assumption1(loss: &ScalarLoss, grid: GridSpec, eps: &[f64]) -> Result<AssumptionReport> {
    if grid.points < 3 || grid.min > -50.0 || grid.max < 50.0 {
        return Err(Error::InvalidArgument("grid must cover [-50, 50] with at least 3 points".into()));
    }
    if eps.len() < 2 || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("eps list must be positive and strictly decreasing".into()));
    }

    let mut positivity = Audit::new("positivity");
    let mut bounds = Audit::new("derivative_bounds");
    let mut unimodal = Audit::new("curvature_unimodality");

    let mut prev: Option<(f64, f64)> = None;
    for z in grid.nodes() {
        let v = loss.eval(z);
        let g = loss.d1(z);
        let h = loss.d2(z);
        if positivity.value(z, v) && positivity.value(z, h) {
            positivity.violate(z, -v);
            positivity.violate(z, -h);
            if v == 0.0 || h == 0.0 {
                positivity.violate(z, f64::MIN_POSITIVE);
            }
        }
        if bounds.value(z, g) {
            bounds.violate(z, -g);
            if g == 0.0 {
                bounds.violate(z, f64::MIN_POSITIVE);
            }
            bounds.violate(z, g - 1.0);
        }
        if unimodal.value(z, h) {
            if let Some((pz, ph)) = prev {
                let slack = 1e-12 * h.abs().max(ph.abs());
                if pz >= 0.0 {
                    // nonincreasing on [0, inf)
                    unimodal.violate(z, h - ph - slack);
                } else if z <= 0.0 {
                    unimodal.violate(z, ph - h - slack);
                }
            }
            prev = Some((z, h));
        }
    }

    let mut tails = Audit::new("tail_limits");
    let zs: Vec<f64> = (0..=10).map(|j| grid.min * 10f64.powi(j)).collect();
    let seqs: [Box<dyn Fn(f64) -> f64>; 3] =
        [Box::new(|z| loss.eval(z)), Box::new(|z| loss.d1(z)), Box::new(|z| 1.0 - loss.d1(-z))];
    for f in seqs.iter() {
        let mut last = f64::INFINITY;
        for &z in &zs {
            let v = f(z);
            if !tails.value(z, v) {
                break;
            }
            tails.violate(z, v - last);
            last = v;
        }
        tails.violate(*zs.last().unwrap(), last - 1e-9);
    }

    let mut decay = Audit::new("curvature_decay");
    let seq: Vec<(f64, f64)> = eps.iter().map(|&e| (1.0 / e, loss.d2(1.0 / e) / (e * e))).collect();
    let mut ok = true;
    for &(z, v) in &seq {
        ok &= decay.value(z, v);
    }
    if ok {
        for w in seq.windows(2) {
            if w[1].1 >= w[0].1 {
                decay.violate(w[1].0, (w[1].1 - w[0].1).max(f64::MIN_POSITIVE));
            }
        }
        let (z_last, last) = *seq.last().unwrap();
        decay.violate(z_last, last - 0.5 * seq[0].1);
    }

    Ok(AssumptionReport {
        loss_name: loss.name(),
        checks: vec![positivity.finish(), bounds.finish(), tails.finish(), unimodal.finish(), decay.finish()],
        grid,
        eps: eps.to_vec(),
    })
}
