use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::run_resolved;
use crate::linalg::{dist_inf, norm_inf};
use crate::objective::Objective;
use crate::par::Exec;
use crate::{Error, Result};

const DEDUP_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub eta_grid: Vec<f64>,
    pub n_inits: usize,
    /// Initialization `i` is `scales[i % len] * N(0, I)`.
    pub scales: Vec<f64>,
    pub iters: usize,
    pub seed: u64,
    /// Number of final iterates whose losses and states are deduplicated.
    pub tail_window: usize,
}

impl SweepSpec {
    pub fn new(eta_grid: Vec<f64>, n_inits: usize, iters: usize, seed: u64) -> Self {
        SweepSpec {
            eta_grid,
            n_inits,
            scales: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            iters,
            seed,
            tail_window: 256,
        }
    }

    /// The initial point of run `index`, identical across step sizes.
    pub fn init(&self, index: usize, dim: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let scale = self.scales[index % self.scales.len()];
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect()
    }
}

/// `steps` points `min + i * (max - min) / (steps - 1)`; a single point when
/// `steps == 1`.
pub fn eta_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(min > 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::InvalidArgument(format!("bad step-size grid [{min}, {max}] x {steps}")));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let h = (max - min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| min + i as f64 * h).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub eta: f64,
    pub init_index: usize,
    /// Distinct losses over the tail window, ascending.
    pub final_losses: Vec<f64>,
    /// Distinct iterates over the tail window.
    pub distinct_states: usize,
    /// `eta * lambda_max(hessian(w_T)) / 2`.
    pub scaled_sharpness: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationSweep {
    pub eta_grid: Vec<f64>,
    pub n_inits: usize,
    /// Step-size-major: cell `(e, i)` is at `e * n_inits + i`.
    pub cells: Vec<SweepCell>,
}

impl BifurcationSweep {
    pub fn at(&self, eta_index: usize) -> &[SweepCell] {
        &self.cells[eta_index * self.n_inits..(eta_index + 1) * self.n_inits]
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&y) if (x - y).abs() <= DEDUP_REL * x.abs().max(y.abs()) => {}
            _ => out.push(x),
        }
    }
    out
}

fn count_distinct(states: &[Vec<f64>]) -> usize {
    let mut reps: Vec<&Vec<f64>> = Vec::new();
    for s in states {
        let tol = DEDUP_REL * (1.0 + norm_inf(s));
        if !reps.iter().any(|r| dist_inf(r, s) <= tol) {
            reps.push(s);
        }
    }
    reps.len()
}

fn run_cell(obj: &Objective, spec: &SweepSpec, eta: f64, init_index: usize) -> SweepCell {
    let w0 = spec.init(init_index, obj.dim());
    let tr = run_resolved(obj, &w0, eta, spec.iters, spec.iters + 1, spec.tail_window);
    let mut cell = SweepCell {
        eta,
        init_index,
        final_losses: Vec::new(),
        distinct_states: 0,
        scaled_sharpness: f64::NAN,
        diverged: true,
    };
    let Ok(tr) = tr else { return cell };
    if tr.diverged {
        return cell;
    }
    let Ok(sharp) = obj.sharpness(tr.last()) else { return cell };
    cell.diverged = false;
    cell.final_losses = dedup_sorted(tr.tail_losses().to_vec());
    cell.distinct_states = count_distinct(tr.tail());
    cell.scaled_sharpness = eta * sharp / 2.0;
    cell
}

/// Runs every `(eta, init)` pair for `spec.iters` steps. Output order, and
/// hence the result, does not depend on `exec`.
pub fn bifurcation_sweep(obj: &Objective, spec: &SweepSpec, exec: Exec) -> Result<BifurcationSweep> {
    if spec.eta_grid.is_empty() || spec.n_inits == 0 || spec.scales.is_empty() || spec.tail_window == 0 {
        return Err(Error::InvalidArgument("empty step-size grid, initializations or scales".into()));
    }
    if spec.eta_grid.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidArgument("step-size grid must be strictly ascending".into()));
    }
    if spec.eta_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("step sizes must be positive and finite".into()));
    }
    let n = spec.n_inits;
    let cells = exec.map(spec.eta_grid.len() * n, |k| run_cell(obj, spec, spec.eta_grid[k / n], k % n));
    Ok(BifurcationSweep { eta_grid: spec.eta_grid.clone(), n_inits: n, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Group};
    use crate::loss::logistic;

    fn toy2() -> Objective {
        let ds = Dataset::new(vec![Group::new(vec![1.0], 1.0, 1), Group::new(vec![-1.0], 1.0, 1)]).unwrap();
        Objective::new(ds, logistic())
    }

    #[test]
    fn grid_hits_endpoints() {
        let g = eta_grid(6.0, 10.0, 81).unwrap();
        assert_eq!(g[40], 8.0);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert_eq!(eta_grid(3.0, 3.0, 1).unwrap(), vec![3.0]);
        assert!(eta_grid(-1.0, 2.0, 3).is_err());
    }

    #[test]
    fn inits_are_deterministic_and_scaled() {
        let spec = SweepSpec::new(vec![1.0], 14, 10, 42);
        assert_eq!(spec.init(3, 4), spec.init(3, 4));
        assert_ne!(spec.init(3, 4), spec.init(10, 4));
        assert!(norm_inf(&spec.init(0, 3)) < 1e-2);
    }

    #[test]
    fn branch_splits_above_critical_step() {
        let spec = SweepSpec { n_inits: 4, ..SweepSpec::new(vec![7.0, 9.0], 4, 10_000, 1) };
        let sw = bifurcation_sweep(&toy2(), &spec, Exec::Sequential).unwrap();
        for c in sw.at(0) {
            assert_eq!(c.distinct_states, 1);
            assert_eq!(c.final_losses.len(), 1);
            assert!(c.scaled_sharpness <= 1.0);
        }
        for c in sw.at(1) {
            assert_eq!(c.distinct_states, 2);
        }
    }

    #[test]
    fn modes_agree() {
        let spec = SweepSpec::new(vec![2.0, 5.0, 9.5], 7, 2_000, 3);
        let a = bifurcation_sweep(&toy2(), &spec, Exec::Sequential).unwrap();
        let b = bifurcation_sweep(&toy2(), &spec, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let spec = SweepSpec::new(vec![2.0, 1.0], 1, 10, 0);
        assert!(bifurcation_sweep(&toy2(), &spec, Exec::Sequential).is_err());
    }
}
