//! Counterexample families: the rank-1 toy dataset, 1D kick recipes and
//! their search, the 2D two-kick construction, and Kronecker stacking.

use serde::{Deserialize, Serialize};

use crate::analysis::{detect_cycle, CycleKind, CycleOptions, CycleReport};
use crate::data::{check_separable, Dataset, Group, Verdict};
use crate::dynamics::{run_resolved, EtaRef, EtaSpec, DEFAULT_TAIL};
use crate::loss::ScalarLoss;
use crate::objective::{minimize, Objective, Solution, DEFAULT_TOL};
use crate::par::Exec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub n: usize,
    pub v: Vec<f64>,
}

/// `n - 1` copies of `v` and one of `-v`, all labelled `+1`.
pub fn make_toy(spec: &ToySpec) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(Error::InvalidArgument(format!("toy dataset needs n >= 2, got {}", spec.n)));
    }
    let norm = crate::linalg::norm2(&spec.v);
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidArgument(format!("toy direction must be a unit vector, |v| = {norm}")));
    }
    let neg: Vec<f64> = spec.v.iter().map(|x| -x).collect();
    Dataset::new(vec![Group::new(spec.v.clone(), 1.0, spec.n as u64 - 1), Group::new(neg, 1.0, 1)])
}

/// The two points `(p, 1 - p)` of the period-2 orbit of the `n = 2` toy
/// recurrence, with `p = (u + 1) / 2` and `atanh(u) = (eta / 8) u`.
pub fn period2_points(eta: f64) -> Result<(f64, f64)> {
    if !(eta >= 8.0) || !eta.is_finite() {
        return Err(Error::Period2Undefined(eta));
    }
    if eta == 8.0 {
        return Ok((0.5, 0.5));
    }
    let c = eta / 8.0;
    let f = |u: f64| u.atanh() - c * u;
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-15);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "period-2 point for eta = {eta} is closer to 1 than double precision resolves"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < 1e-13 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let p = 0.5 * (u + 1.0);
    Ok((p, 1.0 - p))
}

/// A dataset together with its minimizer and the step size a recipe asks
/// for.
#[derive(Debug, Clone)]
pub struct Built {
    pub objective: Objective,
    pub solution: Solution,
    pub eta: f64,
}

fn finish(ds: Dataset, loss: ScalarLoss, eta_spec: EtaSpec) -> Result<Built> {
    if check_separable(&ds).verdict == Verdict::Separable {
        return Err(Error::Separable);
    }
    let objective = Objective::new(ds, loss);
    let solution = minimize(&objective, DEFAULT_TOL)?;
    let eta = eta_spec.resolve_with(&solution)?;
    Ok(Built { objective, solution, eta })
}

/// `m` copies of `x = 1`, `n` of `x = -1`, `b` kicks at `x = x_big`, all with
/// label `+1`; `eta = gamma / L''(w*)` of the full dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe1D {
    pub m: u64,
    pub n: u64,
    pub x_big: f64,
    pub b: u64,
    pub gamma: f64,
    pub w0: f64,
}

impl Recipe1D {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > self.n && self.n >= 1) {
            return Err(Error::InvalidArgument(format!("need m > n >= 1, got m={} n={}", self.m, self.n)));
        }
        if !(self.x_big > 0.0 && self.x_big.is_finite()) {
            return Err(Error::InvalidArgument(format!("kick feature must be positive, got {}", self.x_big)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 2], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn dataset(&self) -> Result<Dataset> {
        self.validate()?;
        let mut groups = vec![Group::new(vec![1.0], 1.0, self.m), Group::new(vec![-1.0], 1.0, self.n)];
        if self.b > 0 {
            groups.push(Group::new(vec![self.x_big], 1.0, self.b));
        }
        Dataset::new(groups)
    }
}

pub fn build_1d(recipe: &Recipe1D, loss: ScalarLoss) -> Result<Built> {
    let ds = recipe.dataset()?;
    finish(ds, loss, EtaSpec::Gamma { gamma: recipe.gamma, reference: EtaRef::Lambda })
}

/// Candidate grids for [`hunt_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub b: Vec<u64>,
    pub x_big: Vec<f64>,
    pub m: Vec<u64>,
    pub n: Vec<u64>,
    pub w0: Vec<f64>,
    pub iters: usize,
    pub cycle: CycleOptions,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            b: vec![1, 2, 4, 6, 10, 15, 25],
            x_big: vec![10.0, 20.0, 40.0, 70.0, 100.0],
            m: vec![200, 250],
            n: vec![150, 190, 200],
            w0: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            iters: 30_000,
            cycle: CycleOptions::default(),
        }
    }
}

impl SearchSpace {
    /// Candidates in lexicographic `(b, x_big, m, n)` order, skipping `m <= n`.
    fn candidates(&self, gamma: f64) -> Vec<Recipe1D> {
        let mut out = Vec::new();
        for &b in &self.b {
            for &x_big in &self.x_big {
                for &m in &self.m {
                    for &n in &self.n {
                        if m > n && n >= 1 {
                            out.push(Recipe1D { m, n, x_big, b, gamma, w0: 0.0 });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Runs `recipe` from `w0` and returns the report if GD settles on a stable
/// cycle of period > 1.
pub fn verify_1d(recipe: &Recipe1D, loss: ScalarLoss, iters: usize, opts: CycleOptions) -> Result<CycleReport> {
    let built = build_1d(recipe, loss)?;
    let tail = DEFAULT_TAIL.max(2 * opts.k_max);
    let tr = run_resolved(&built.objective, &[recipe.w0], built.eta, iters, iters + 1, tail)?;
    detect_cycle(&built.objective, &tr, opts)
}

fn accept(rep: &CycleReport) -> bool {
    rep.kind == CycleKind::Cycle && rep.multiplier < 1.0
}

/// First recipe in search order that yields a stable cycle from some `w0`
/// in the grid, with the witnessing `w0` filled in.
pub fn hunt_1d(
    gamma: f64,
    space: &SearchSpace,
    loss: ScalarLoss,
    budget: usize,
    exec: Exec,
) -> Result<(Recipe1D, CycleReport)> {
    if !(gamma > 1.0 && gamma <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (1, 2]; at gamma <= 1 GD provably converges in 1D (got {gamma})"
        )));
    }
    let cands = space.candidates(gamma);
    let cands = &cands[..cands.len().min(budget)];
    let chunk = 16;
    for block in cands.chunks(chunk) {
        let results = exec.map(block.len(), |i| {
            let base = block[i];
            space.w0.iter().find_map(|&w0| {
                let r = Recipe1D { w0, ..base };
                verify_1d(&r, loss, space.iters, space.cycle).ok().filter(accept).map(|rep| (r, rep))
            })
        });
        if let Some(hit) = results.into_iter().flatten().next() {
            return Ok(hit);
        }
    }
    Err(Error::SearchExhausted(cands.len()))
}

/// Axis groups `+-e1` (`m1`, `n1` copies) and `+-e2` (`m2`, `n2`) plus two
/// kick groups, all with label `+1`; `eta = gamma / lambda_max(hessian(w*))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe2D {
    pub m1: u64,
    pub n1: u64,
    pub m2: u64,
    pub n2: u64,
    pub kick1: ([f64; 2], u64),
    pub kick2: ([f64; 2], u64),
    pub gamma: f64,
    pub w0: [f64; 2],
}

impl Recipe2D {
    pub fn validate(&self) -> Result<()> {
        if !(self.m1 > self.n1 && self.m2 > self.n2) {
            return Err(Error::InvalidArgument("need m1 > n1 and m2 > n2".into()));
        }
        // The first axis must have the steeper asymptotic slope.
        if !(self.m1 - self.n1 > self.m2 - self.n2) {
            return Err(Error::InvalidArgument("need m1 - n1 > m2 - n2".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 2], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn dataset(&self) -> Result<Dataset> {
        self.validate()?;
        let mut groups = vec![Group::new(vec![1.0, 0.0], 1.0, self.m1), Group::new(vec![0.0, 1.0], 1.0, self.m2)];
        if self.n1 > 0 {
            groups.push(Group::new(vec![-1.0, 0.0], 1.0, self.n1));
        }
        if self.n2 > 0 {
            groups.push(Group::new(vec![0.0, -1.0], 1.0, self.n2));
        }
        for (x, c) in [self.kick1, self.kick2] {
            if c > 0 {
                groups.push(Group::new(x.to_vec(), 1.0, c));
            }
        }
        Dataset::new(groups)
    }

    pub fn without_kicks(&self) -> Self {
        Recipe2D { kick1: (self.kick1.0, 0), kick2: (self.kick2.0, 0), ..*self }
    }
}

pub fn build_2d(recipe: &Recipe2D, loss: ScalarLoss) -> Result<Built> {
    let ds = recipe.dataset()?;
    finish(ds, loss, EtaSpec::Gamma { gamma: recipe.gamma, reference: EtaRef::Lambda })
}

/// `I_k (x) X`: block `j` of each copy carries the original features,
/// everything else is zero.
pub fn kronecker_stack(ds: &Dataset, k: usize) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("stacking needs k >= 2, got {k}")));
    }
    let d = ds.dim();
    let mut groups = Vec::with_capacity(k * ds.groups().len());
    for j in 0..k {
        for g in ds.groups() {
            let mut x = vec![0.0; k * d];
            x[j * d..(j + 1) * d].copy_from_slice(&g.x);
            groups.push(Group::new(x, g.y, g.count));
        }
    }
    Dataset::new(groups)
}

#[derive(Debug, Clone)]
pub struct EosDemo {
    pub objective: Objective,
    /// `k` times the base step size.
    pub eta: f64,
    /// The base orbit laid out one block per phase.
    pub w0: Vec<f64>,
    pub base_eta: f64,
    pub orbit: Vec<f64>,
}

/// Stacks `k` copies of a 1D recipe whose GD orbit is a `k`-cycle and starts
/// block `j` at the `j`-th orbit point, so every iterate is a cyclic
/// permutation of the previous one.
pub fn eos_demo(recipe: &Recipe1D, loss: ScalarLoss, k: usize, iters: usize) -> Result<EosDemo> {
    let opts = CycleOptions { k_max: CycleOptions::default().k_max.max(k), ..Default::default() };
    let rep = verify_1d(recipe, loss, iters, opts)?;
    if rep.kind != CycleKind::Cycle || rep.period != k {
        return Err(Error::NoCycle(format!(
            "expected a {k}-cycle, detector reported {} with period {}",
            rep.kind.as_str(),
            rep.period
        )));
    }
    let built = build_1d(recipe, loss)?;
    let stacked = kronecker_stack(built.objective.dataset(), k)?;
    let orbit: Vec<f64> = rep.orbit.iter().map(|w| w[0]).collect();
    Ok(EosDemo {
        objective: Objective::new(stacked, loss),
        eta: k as f64 * built.eta,
        w0: orbit.clone(),
        base_eta: built.eta,
        orbit,
    })
}

/// Basin raster bounds and resolution in a recipe sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSection {
    pub bounds: [f64; 4],
    pub resolution: [usize; 2],
    pub iters: usize,
}

/// Step-size sweep settings in a recipe sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub eta_min: f64,
    pub eta_max: f64,
    pub steps: usize,
    pub inits: usize,
    pub iters: usize,
}

fn default_loss() -> String {
    "logistic".into()
}

fn default_reference() -> String {
    "lambda".into()
}

fn default_iters() -> usize {
    50_000
}

/// TOML sidecar next to a `.cds` dataset describing one reproducible run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeConfig {
    pub name: String,
    /// Dataset path, relative to the sidecar.
    pub dataset: String,
    #[serde(default = "default_loss")]
    pub loss: String,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    /// `lambda` or `two-L`.
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default)]
    pub w0: Vec<f64>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    pub expect_period: Option<usize>,
    /// Stack this many copies and start on the orbit (sharpness demo).
    pub stack: Option<usize>,
    pub basin: Option<BasinSection>,
    pub sweep: Option<SweepSection>,
}

impl RecipeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RecipeConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.eta_spec()?;
        ScalarLoss::by_name(&cfg.loss)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn eta_spec(&self) -> Result<EtaSpec> {
        let reference = match self.reference.as_str() {
            "lambda" => EtaRef::Lambda,
            "two-L" => EtaRef::TwoOverL,
            other => return Err(Error::Config(format!("unknown reference '{other}' (expected lambda or two-L)"))),
        };
        match (self.eta, self.gamma) {
            (Some(eta), None) => Ok(EtaSpec::Absolute(eta)),
            (None, Some(gamma)) => Ok(EtaSpec::Gamma { gamma, reference }),
            _ => Err(Error::Config("exactly one of 'eta' and 'gamma' must be set".into())),
        }
    }
}
