//! The GD map, trajectories, the probability-space recurrence and
//! linearized stability along orbits.

use std::collections::VecDeque;

use crate::linalg::{mat_mul, norm2, spectral_radius};
use crate::loss::{logit, sigmoid};
use crate::objective::{minimize, Objective, Solution, DEFAULT_TOL};
use crate::{Error, Result, DIVERGENCE_NORM};

/// Dense tail kept by every trajectory: `max(2 * k_max, 4096)` with the
/// default `k_max = 2048`.
pub const DEFAULT_TAIL: usize = 4096;

/// Which critical step size a `gamma` multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRef {
    /// `eta = gamma / lambda_max(hessian(w*))`.
    Lambda,
    /// `eta = gamma * 2 / L_global`.
    TwoOverL,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Absolute(f64),
    Gamma { gamma: f64, reference: EtaRef },
}

impl EtaSpec {
    pub fn resolve(&self, obj: &Objective) -> Result<f64> {
        let eta = match *self {
            EtaSpec::Absolute(eta) => eta,
            EtaSpec::Gamma { gamma, reference: EtaRef::TwoOverL } => gamma * 2.0 / obj.l_global()?,
            EtaSpec::Gamma { gamma, reference: EtaRef::Lambda } => gamma / minimize(obj, DEFAULT_TOL)?.lambda_star,
        };
        check_eta(eta)?;
        Ok(eta)
    }

    /// Resolves against an already computed solution.
    pub fn resolve_with(&self, sol: &Solution) -> Result<f64> {
        let eta = match *self {
            EtaSpec::Absolute(eta) => eta,
            EtaSpec::Gamma { gamma, reference: EtaRef::TwoOverL } => gamma * sol.eta_two_over_l,
            EtaSpec::Gamma { gamma, reference: EtaRef::Lambda } => gamma / sol.lambda_star,
        };
        check_eta(eta)?;
        Ok(eta)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive and finite, got {eta}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub eta: EtaSpec,
    pub max_iters: usize,
    pub record_every: usize,
    pub tail_len: usize,
    pub w0: Vec<f64>,
}

impl GdConfig {
    pub fn new(eta: EtaSpec, w0: Vec<f64>, max_iters: usize) -> Self {
        GdConfig { eta, max_iters, record_every: 1, tail_len: DEFAULT_TAIL, w0 }
    }

    pub fn with_eta(eta: f64, w0: Vec<f64>, max_iters: usize) -> Self {
        Self::new(EtaSpec::Absolute(eta), w0, max_iters)
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn tail_len(mut self, len: usize) -> Self {
        self.tail_len = len;
        self
    }
}

/// Recorded GD iterates `w_0 .. w_T`: every `record_every`-th step, plus
/// the final `tail_len` steps densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Step index of each recorded iterate, strictly increasing.
    pub steps: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub eta: f64,
    /// Set when `||w||` exceeded the divergence threshold; the run stopped
    /// at the last finite iterate.
    pub diverged: bool,
    /// Index into `iterates` where the dense tail starts.
    pub tail_start: usize,
    pub record_every: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn final_step(&self) -> usize {
        *self.steps.last().expect("trajectory always holds w_0")
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trajectory always holds w_0")
    }

    pub fn tail(&self) -> &[Vec<f64>] {
        &self.iterates[self.tail_start..]
    }

    pub fn tail_losses(&self) -> &[f64] {
        &self.losses[self.tail_start..]
    }

    /// Start of the longest suffix made of consecutive steps.
    pub fn consecutive_start(&self) -> usize {
        let mut i = self.len() - 1;
        while i > 0 && self.steps[i - 1] + 1 == self.steps[i] {
            i -= 1;
        }
        i
    }
}

/// `w - eta * grad L(w)`.
pub fn gd_step(obj: &Objective, w: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    let g = obj.gradient(w)?;
    let out: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gd step"));
    }
    Ok(out)
}

pub fn run(obj: &Objective, cfg: &GdConfig) -> Result<Trajectory> {
    let eta = cfg.eta.resolve(obj)?;
    run_resolved(obj, &cfg.w0, eta, cfg.max_iters, cfg.record_every, cfg.tail_len)
}

pub(crate) fn run_resolved(
    obj: &Objective,
    w0: &[f64],
    eta: f64,
    max_iters: usize,
    record_every: usize,
    tail_len: usize,
) -> Result<Trajectory> {
    check_eta(eta)?;
    if w0.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: w0.len() });
    }
    if record_every == 0 || tail_len == 0 {
        return Err(Error::InvalidArgument("record_every and tail_len must be positive".into()));
    }
    if w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }

    let mut head: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut ring: VecDeque<(usize, Vec<f64>)> = VecDeque::with_capacity(tail_len.min(max_iters + 1));
    let mut w = w0.to_vec();
    let mut g = vec![0.0; w.len()];
    let mut diverged = norm2(&w) > DIVERGENCE_NORM;
    let mut t = 0;
    loop {
        if t % record_every == 0 {
            head.push((t, w.clone()));
        }
        if ring.len() == tail_len {
            ring.pop_front();
        }
        ring.push_back((t, w.clone()));
        if t == max_iters || diverged {
            break;
        }
        if obj.gradient_into(&w, &mut g).is_err() {
            diverged = true;
            break;
        }
        let next: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
        let n = norm2(&next);
        if !(n <= DIVERGENCE_NORM) {
            diverged = true;
            break;
        }
        w = next;
        t += 1;
    }

    let tail_first = ring.front().map(|(s, _)| *s).unwrap_or(0);
    head.retain(|(s, _)| *s < tail_first);
    let tail_start = head.len();
    let mut steps = Vec::with_capacity(head.len() + ring.len());
    let mut iterates = Vec::with_capacity(head.len() + ring.len());
    for (s, v) in head.into_iter().chain(ring) {
        steps.push(s);
        iterates.push(v);
    }
    let losses = iterates.iter().map(|v| obj.value(v).unwrap_or(f64::INFINITY)).collect();
    Ok(Trajectory { steps, iterates, losses, eta, diverged, tail_start, record_every })
}

/// Gram data for the probability-space form of GD on the logistic loss.
#[derive(Debug, Clone)]
pub struct ProbSpace {
    n: usize,
    weights: Vec<f64>,
    /// `gram[i * n + j] = y_i y_j x_i . x_j`.
    gram: Vec<f64>,
}

impl ProbSpace {
    pub fn new(obj: &Objective) -> Result<Self> {
        if obj.loss().name() != "logistic" {
            return Err(Error::InvalidArgument(format!(
                "probability-space map needs the logistic loss, got '{}'",
                obj.loss().name()
            )));
        }
        let terms: Vec<(f64, &[f64])> = obj.terms().collect();
        let n = terms.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = crate::linalg::dot(terms[i].1, terms[j].1);
            }
        }
        Ok(ProbSpace { n, weights: terms.iter().map(|t| t.0).collect(), gram })
    }

    pub fn groups(&self) -> usize {
        self.n
    }
}

/// `p_i = sigma(-y_i w.x_i)` per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbState {
    pub p: Vec<f64>,
}

const P_MIN: f64 = 1e-300;
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

impl ProbState {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument("probabilities must lie strictly in (0, 1)".into()));
        }
        Ok(ProbState { p })
    }

    pub fn from_weights(obj: &Objective, w: &[f64]) -> Result<Self> {
        if w.len() != obj.dim() {
            return Err(Error::Dimension { expected: obj.dim(), got: w.len() });
        }
        let p = obj.terms().map(|(_, a)| clamp_p(sigmoid(-crate::linalg::dot(a, w)))).collect();
        Ok(ProbState { p })
    }
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(P_MIN, P_MAX)
}

/// `p'_i = sigma(logit(p_i) - eta * sum_j (count_j / N) p_j y_i y_j x_j . x_i)`.
///
/// Outputs are clamped into `[1e-300, 1 - eps/2]` so the next logit stays
/// finite.
pub fn prob_step(space: &ProbSpace, state: &ProbState, eta: f64) -> Result<ProbState> {
    check_eta(eta)?;
    let n = space.n;
    if state.p.len() != n {
        return Err(Error::Dimension { expected: n, got: state.p.len() });
    }
    if state.p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::NonFinite("logit of a saturated probability"));
    }
    let wp: Vec<f64> = state.p.iter().zip(&space.weights).map(|(p, c)| p * c).collect();
    let p = (0..n)
        .map(|i| {
            let drive: f64 = (0..n).map(|j| wp[j] * space.gram[i * n + j]).sum();
            clamp_p(sigmoid(logit(state.p[i]) - eta * drive))
        })
        .collect();
    Ok(ProbState { p })
}

/// Scalar form of the recurrence for the toy dataset, in `p = p_n`.
pub fn toy_step(p: f64, eta: f64, n: usize) -> f64 {
    clamp_p(sigmoid(toy_logit_step(logit(p), eta, n)))
}

/// The toy recurrence in logit coordinates `z = logit(p_n)`; stays accurate
/// where `p_n` rounds to 1.
pub fn toy_logit_step(z: f64, eta: f64, n: usize) -> f64 {
    let nf = n as f64;
    z - eta / nf * (sigmoid(z) - (nf - 1.0) * sigmoid(-z))
}

/// Spectral radius of `prod_t (I - eta * hessian(w_t))` over `orbit`, in
/// orbit order.
pub fn orbit_multiplier(obj: &Objective, orbit: &[Vec<f64>], eta: f64) -> Result<f64> {
    if orbit.is_empty() {
        return Err(Error::InvalidArgument("empty orbit".into()));
    }
    let d = obj.dim();
    if d == 1 {
        let mut log_abs = 0.0;
        for w in orbit {
            let h = obj.hessian(w)?.get(0, 0);
            log_abs += (1.0 - eta * h).abs().ln();
        }
        return Ok(log_abs.exp());
    }
    let mut prod = crate::linalg::SymMatrix::identity(d).as_slice().to_vec();
    let mut log_scale = 0.0;
    for w in orbit {
        let h = obj.hessian(w)?;
        let jac: Vec<f64> =
            (0..d * d).map(|k| (if k / d == k % d { 1.0 } else { 0.0 }) - eta * h.as_slice()[k]).collect();
        prod = mat_mul(&jac, &prod, d);
        let s = prod.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s == 0.0 {
            return Ok(0.0);
        }
        prod.iter_mut().for_each(|v| *v /= s);
        log_scale += s.ln();
    }
    Ok(spectral_radius(&prod, d) * log_scale.exp())
}

/// Mean log stretching rate along the consecutive part of `traj`, skipping
/// its first `burn_in` steps.
pub fn lyapunov(obj: &Objective, traj: &Trajectory, eta: f64, burn_in: usize) -> Result<f64> {
    let start = traj.consecutive_start() + burn_in;
    if traj.len() < start + 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} consecutive iterates after burn-in, have {}",
            1000,
            traj.len().saturating_sub(start)
        )));
    }
    lyapunov_points(obj, &traj.iterates[start..], eta)
}

pub(crate) fn lyapunov_points(obj: &Objective, pts: &[Vec<f64>], eta: f64) -> Result<f64> {
    let d = obj.dim();
    let mut acc = 0.0;
    if d == 1 {
        for w in pts {
            acc += (1.0 - eta * obj.hessian(w)?.get(0, 0)).abs().ln();
        }
        return Ok(acc / pts.len() as f64);
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut hv = vec![0.0; d];
    for w in pts {
        obj.hessian(w)?.mul_vec(&v, &mut hv);
        for (vi, hi) in v.iter_mut().zip(&hv) {
            *vi -= eta * hi;
        }
        let n = norm2(&v);
        if n == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += n.ln();
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(acc / pts.len() as f64)
}

fn require_1d(obj: &Objective) -> Result<()> {
    if obj.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: obj.dim() });
    }
    Ok(())
}

/// `1 + max(0, -ceil(w0 sign(w*) L''(w*) / L''(0)))`, the crossing-time bound
/// as commonly stated for 1D GD at `eta = 1 / L''(w*)`.
pub fn tau_bar(obj: &Objective, w0: f64, w_star: f64) -> Result<usize> {
    require_1d(obj)?;
    let s = if w_star < 0.0 { -1.0 } else { 1.0 };
    let ratio = obj.hessian(&[w_star])?.get(0, 0) / obj.hessian(&[0.0])?.get(0, 0);
    let k = -(w0 * s * ratio).ceil();
    Ok(1 + k.max(0.0) as usize)
}

/// Bound on the number of steps at `eta = 1 / L''(w*)` before `w_t` enters
/// `[w*, inf) * sign(w*)`.
///
/// Left of the origin each step advances by at least `|L'(0)| / L''(w*)`; one
/// step from `[0, w*)` overshoots `w*` because `L''` only shrinks away from
/// the origin. `None` when `w* = 0`.
pub fn crossing_iteration_bound(obj: &Objective, w0: f64, w_star: f64) -> Result<Option<usize>> {
    require_1d(obj)?;
    if w_star == 0.0 {
        return Ok(None);
    }
    let s = w_star.signum();
    let u0 = s * w0;
    if u0 >= s * w_star {
        return Ok(Some(0));
    }
    if u0 >= 0.0 {
        return Ok(Some(1));
    }
    let slope = obj.gradient(&[0.0])?[0].abs();
    let curv = obj.hessian(&[w_star])?.get(0, 0);
    Ok(Some(1 + (-u0 * curv / slope).ceil() as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Group};
    use crate::loss::logistic;

    fn one_d(m: u64, n: u64) -> Objective {
        let ds = Dataset::new(vec![Group::new(vec![1.0], 1.0, m), Group::new(vec![-1.0], 1.0, n)]).unwrap();
        Objective::new(ds, logistic())
    }

    #[test]
    fn fixed_point_is_preserved() {
        let obj = one_d(250, 200);
        let sol = minimize(&obj, DEFAULT_TOL).unwrap();
        for eta in [sol.eta_two_over_l, sol.eta_one_over_lambda, sol.eta_two_over_lambda] {
            let w = gd_step(&obj, &sol.w_star, eta).unwrap();
            assert!((w[0] - sol.w_star[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn trajectory_layout() {
        let obj = one_d(3, 1);
        let cfg = GdConfig::with_eta(1.0, vec![5.0], 100).record_every(7).tail_len(10);
        let tr = run(&obj, &cfg).unwrap();
        assert_eq!(tr.final_step(), 100);
        assert_eq!(tr.tail().len(), 10);
        assert_eq!(tr.steps[tr.tail_start], 91);
        assert!(tr.steps.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(tr.steps[..tr.tail_start], [0, 7, 14, 21, 28, 35, 42, 49, 56, 63, 70, 77, 84]);
        assert_eq!(tr.consecutive_start(), tr.tail_start);
        for (w, l) in tr.iterates.iter().zip(&tr.losses) {
            assert!((obj.value(w).unwrap() - l).abs() < 1e-12);
        }
        // w_{t+1} = T(w_t) inside the tail
        let next = gd_step(&obj, &tr.tail()[3], 1.0).unwrap();
        assert_eq!(next, tr.tail()[4]);
    }

    #[test]
    fn divergence_is_flagged() {
        let obj = one_d(3, 1);
        let tr = run(&obj, &GdConfig::with_eta(1.0, vec![2e12], 100)).unwrap();
        assert!(tr.diverged);
        assert_eq!(tr.final_step(), 0);
    }

    #[test]
    fn toy_fixed_point() {
        for n in [2usize, 5, 10] {
            let p = (n as f64 - 1.0) / n as f64;
            assert!((toy_step(p, 3.0, n) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn toy_logit_matches_tanh_form_for_two() {
        for z in [-3.0, -0.2, 0.7, 12.0] {
            let want = z - 5.0 * (z / 2.0f64).tanh();
            assert!((toy_logit_step(z, 10.0, 2) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn one_point_multiplier() {
        let obj = one_d(250, 200);
        let sol = minimize(&obj, DEFAULT_TOL).unwrap();
        let m = orbit_multiplier(&obj, std::slice::from_ref(&sol.w_star), sol.eta_two_over_lambda).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let m = orbit_multiplier(&obj, std::slice::from_ref(&sol.w_star), sol.eta_one_over_lambda).unwrap();
        assert!(m < 1e-12);
    }

    #[test]
    fn lyapunov_negative_when_converging() {
        let obj = one_d(250, 200);
        let sol = minimize(&obj, DEFAULT_TOL).unwrap();
        let tr = run(&obj, &GdConfig::with_eta(sol.eta_two_over_l, vec![3.0], 3000)).unwrap();
        assert!(lyapunov(&obj, &tr, tr.eta, 100).unwrap() < 0.0);
        assert!(lyapunov(&obj, &tr, tr.eta, 2500).is_err());
    }

    #[test]
    fn tau_bar_formula() {
        let obj = one_d(250, 200);
        let ws = 1.25f64.ln();
        assert_eq!(tau_bar(&obj, 10.0, ws).unwrap(), 1);
        let ratio = obj.hessian(&[ws]).unwrap().get(0, 0) / 0.25;
        assert_eq!(tau_bar(&obj, -1000.0, ws).unwrap(), 1 + (-(-1000.0 * ratio).ceil()) as usize);
        assert_eq!(crossing_iteration_bound(&obj, 10.0, ws).unwrap(), Some(0));
        assert_eq!(crossing_iteration_bound(&obj, 0.1, ws).unwrap(), Some(1));
    }
}
