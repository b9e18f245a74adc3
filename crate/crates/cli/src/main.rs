mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gdlab::construct::{BasinSection, SearchSpace, SweepSection};
use gdlab::data::{parse_compact, parse_libsvm, to_compact, Dataset, LibsvmOptions};
use gdlab::dynamics::{EtaRef, EtaSpec};
use gdlab::export;
use gdlab::loss::DEFAULT_EPS;
use gdlab::objective::DEFAULT_TOL;
use gdlab::{
    basin_raster, bifurcation_sweep, detect_cycle, eta_grid, hunt_1d, kronecker_stack, minimize, psd, run,
    sharpness_series, verify_assumption1, CycleKind, CycleOptions, CycleReport, Exec, GdConfig, GridSpec, Objective,
    RasterSpec, RecipeConfig, ScalarLoss, Solution, SweepSpec, Trajectory,
};
use svg::{Mark, Plot};

#[derive(Parser)]
#[command(name = "gdlab", version, about = "Large-step gradient descent on non-separable linear classifiers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimizer, sharpness at the optimum and the critical step sizes.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Print a JSON record instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Run GD and write the loss (and optionally weight/sharpness) trace.
    Trajectory {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Include w_1..w_d columns.
        #[arg(long)]
        weights: bool,
        /// Include the Hessian's top eigenvalue per recorded step.
        #[arg(long)]
        sharpness: bool,
    },
    /// Periodogram of the final losses of a run.
    Psd {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1024)]
        window: usize,
    },
    /// Step-size sweep over many seeded initializations.
    Bifurcate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        eta_min: Option<f64>,
        #[arg(long)]
        eta_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        inits: Option<usize>,
    },
    /// Basin of attraction raster for a 2D objective.
    Basin {
        #[command(flatten)]
        run: RunArgs,
        /// xmin,xmax,ymin,ymax
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bounds: Option<Vec<f64>>,
        /// nx,ny
        #[arg(long, value_delimiter = ',')]
        res: Option<Vec<usize>>,
        /// GD steps per raster cell.
        #[arg(long)]
        cell_iters: Option<usize>,
    },
    /// Stack copies of a 1D cycle so the sharpness stays above 2/eta.
    Eos {
        #[command(flatten)]
        run: RunArgs,
        /// Expected cycle length (defaults to the detected period).
        #[arg(long)]
        stack: Option<usize>,
        /// GD steps on the stacked objective.
        #[arg(long, default_value_t = 20_000)]
        stacked_iters: usize,
    },
    /// Search 1D kick recipes for a stable cycle at a given gamma.
    Hunt {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value = "logistic")]
        loss: String,
        /// Maximum number of candidate recipes.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Numerical audit of a loss against the structural conditions.
    CheckLoss {
        #[arg(long, default_value = "logistic")]
        loss: String,
    },
    /// Run every checked-in recipe config end to end.
    Repro {
        /// Directory of `.toml` recipe sidecars.
        #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))]
        configs: PathBuf,
        #[arg(long, default_value = "gdlab-out")]
        out: PathBuf,
        /// Only run configs whose name contains this string.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RefArg {
    Lambda,
    #[value(name = "two-L")]
    TwoL,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Dataset: `.cds` compact format, anything else is read as LIBSVM.
    #[arg(long, conflicts_with = "config")]
    data: Option<PathBuf>,
    /// TOML recipe sidecar; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long, conflicts_with = "gamma")]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "ref", value_enum)]
    reference: Option<RefArg>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Initial weights, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w0: Option<Vec<f64>>,
    /// Map LIBSVM label 0 to -1.
    #[arg(long)]
    zero_negative: bool,
    /// Evaluate sweep and raster cells on one thread.
    #[arg(long)]
    sequential: bool,
}

/// Bad flags or inputs, reported with exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn load_dataset(path: &Path, zero_negative: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ds = if path.extension().is_some_and(|e| e == "cds") {
        parse_compact(&text)
    } else {
        parse_libsvm(&text, LibsvmOptions { zero_as_negative: zero_negative })
    };
    ds.with_context(|| format!("parsing {}", path.display()))
}

/// Everything a subcommand needs after merging flags over a config.
struct Setup {
    name: String,
    objective: Objective,
    eta: Option<EtaSpec>,
    w0: Vec<f64>,
    iters: usize,
    seed: u64,
    out: PathBuf,
    exec: Exec,
    config: Option<RecipeConfig>,
}

impl Setup {
    fn from_args(a: &RunArgs) -> Result<Setup> {
        let config = match &a.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Some((RecipeConfig::from_toml(&text)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()))
            }
            None => None,
        };
        let (ds, name) = match (&a.data, &config) {
            (Some(p), _) => (
                load_dataset(p, a.zero_negative)?,
                p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned()),
            ),
            (None, Some((cfg, dir))) => (load_dataset(&dir.join(&cfg.dataset), a.zero_negative)?, cfg.name.clone()),
            (None, None) => return Err(usage("one of --data or --config is required")),
        };
        let cfg = config.as_ref().map(|c| &c.0);
        let loss_name = a.loss.clone().or_else(|| cfg.map(|c| c.loss.clone())).unwrap_or_else(|| "logistic".into());
        let loss = ScalarLoss::by_name(&loss_name)?;
        let reference = match a.reference {
            Some(RefArg::Lambda) => EtaRef::Lambda,
            Some(RefArg::TwoL) => EtaRef::TwoOverL,
            None => match cfg.map(|c| c.reference.as_str()) {
                Some("two-L") => EtaRef::TwoOverL,
                _ => EtaRef::Lambda,
            },
        };
        let eta = match (a.eta, a.gamma) {
            (Some(e), _) => Some(EtaSpec::Absolute(e)),
            (None, Some(gamma)) => Some(EtaSpec::Gamma { gamma, reference }),
            (None, None) => match cfg {
                Some(c) if a.reference.is_some() && c.gamma.is_some() => {
                    Some(EtaSpec::Gamma { gamma: c.gamma.unwrap(), reference })
                }
                Some(c) => Some(c.eta_spec()?),
                None => None,
            },
        };
        let dim = ds.dim();
        let w0 = a.w0.clone().or_else(|| cfg.map(|c| c.w0.clone()).filter(|w| !w.is_empty())).unwrap_or(vec![1.0; dim]);
        if w0.len() != dim {
            return Err(usage(format!("--w0 has {} entries, dataset dimension is {dim}", w0.len())));
        }
        Ok(Setup {
            name,
            objective: Objective::new(ds, loss),
            eta,
            w0,
            iters: a.iters.or(cfg.map(|c| c.iters)).unwrap_or(50_000),
            seed: a.seed,
            out: a.out.clone().unwrap_or_else(|| PathBuf::from("gdlab-out")),
            exec: exec(a.sequential),
            config: config.map(|c| c.0),
        })
    }

    fn eta(&self, sol: Option<&Solution>) -> Result<f64> {
        let spec = self.eta.ok_or_else(|| usage("a step size is required: pass --eta or --gamma"))?;
        Ok(match sol {
            Some(s) => spec.resolve_with(s)?,
            None => spec.resolve(&self.objective)?,
        })
    }

    fn write(&self, file: &str, body: &str) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(file);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }

    fn run(&self, eta: f64, record_every: usize) -> Result<Trajectory> {
        Ok(run(&self.objective, &GdConfig::with_eta(eta, self.w0.clone(), self.iters).record_every(record_every))?)
    }
}

fn solution_json(sol: &Solution) -> Value {
    json!({
        "w_star": sol.w_star,
        "lambda_star": sol.lambda_star,
        "L_global": sol.l_global,
        "eta_2L": sol.eta_two_over_l,
        "eta_1lam": sol.eta_one_over_lambda,
        "eta_2lam": sol.eta_two_over_lambda,
        "grad_norm": sol.grad_norm,
    })
}

fn cycle_json(rep: &CycleReport) -> Value {
    json!({
        "kind": rep.kind.as_str(),
        "period": rep.period,
        "residual": rep.residual,
        "multiplier": rep.multiplier,
        "lyapunov": rep.lyapunov,
    })
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values always serialize"));
}

/// Cycle report for a run, or `None` when the dense tail is too short.
fn classify(obj: &Objective, tr: &Trajectory) -> Result<Option<CycleReport>> {
    let opts = CycleOptions::default();
    if tr.diverged || tr.tail().len() < 2 * opts.k_max {
        return Ok(None);
    }
    Ok(Some(detect_cycle(obj, tr, opts)?))
}

fn line_svg(title: &str, ylabel: &str, x: &[usize], y: &[f64], log_y: bool) -> String {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(&t, &v)| (t as f64, v)).collect();
    Plot { title, xlabel: "iteration", ylabel, log_y }.render(&pts, Mark::Line)
}

fn cmd_solve(s: &Setup, as_json: bool) -> Result<Solution> {
    let sol = minimize(&s.objective, DEFAULT_TOL)?;
    if as_json {
        print_json(&solution_json(&sol));
    } else {
        print!("{}", export::solution_csv(&sol));
    }
    Ok(sol)
}

fn cmd_trajectory(s: &Setup, record_every: usize, weights: bool, sharp: bool) -> Result<Option<CycleReport>> {
    let sol = minimize(&s.objective, DEFAULT_TOL).ok();
    let eta = s.eta(sol.as_ref())?;
    let tr = s.run(eta, record_every)?;
    let series = if sharp { Some(sharpness_series(&s.objective, &tr)?) } else { None };
    s.write("trajectory.csv", &export::trajectory_csv(&tr, weights, series.as_deref()))?;
    s.write("loss.svg", &line_svg(&format!("{}: loss, eta = {eta}", s.name), "loss", &tr.steps, &tr.losses, true))?;
    if let Some(sh) = &series {
        s.write("sharpness.svg", &line_svg(&format!("{}: sharpness", s.name), "sharpness", &tr.steps, sh, false))?;
    }
    let rep = classify(&s.objective, &tr)?;
    print_json(&json!({
        "name": s.name,
        "eta": eta,
        "iters": tr.final_step(),
        "diverged": tr.diverged,
        "final_loss": tr.losses.last(),
        "cycle": rep.as_ref().map(cycle_json),
    }));
    Ok(rep)
}

fn cmd_psd(s: &Setup, window: usize) -> Result<()> {
    let eta = s.eta(None)?;
    let tr = s.run(eta, s.iters.max(1))?;
    if tr.diverged {
        return Err(gdlab::Error::Divergence { norm: gdlab::linalg::norm2(tr.last()) }.into());
    }
    let res = psd(tr.tail_losses(), window)?;
    s.write("psd.csv", &export::psd_csv(&res))?;
    let pts: Vec<(f64, f64)> = res.freqs.iter().zip(&res.power).skip(1).map(|(&f, &p)| (f, p)).collect();
    let plot =
        Plot { title: &format!("{}: loss periodogram", s.name), xlabel: "frequency", ylabel: "power", log_y: true };
    s.write("psd.svg", &plot.render(&pts, Mark::Line))?;
    let f = res.dominant_frequency();
    print_json(&json!({ "eta": eta, "window": window, "dominant_frequency": f, "period": f.map(|f| 1.0 / f) }));
    Ok(())
}

fn sweep_settings(
    s: &Setup,
    eta_min: Option<f64>,
    eta_max: Option<f64>,
    steps: Option<usize>,
    inits: Option<usize>,
) -> Result<SweepSection> {
    let base = s.config.as_ref().and_then(|c| c.sweep.clone());
    let pick = |flag: Option<f64>, f: fn(&SweepSection) -> f64, what: &str| {
        flag.or(base.as_ref().map(f)).ok_or_else(|| usage(format!("--{what} is required")))
    };
    Ok(SweepSection {
        eta_min: pick(eta_min, |b| b.eta_min, "eta-min")?,
        eta_max: pick(eta_max, |b| b.eta_max, "eta-max")?,
        steps: steps.or(base.as_ref().map(|b| b.steps)).unwrap_or(50),
        inits: inits.or(base.as_ref().map(|b| b.inits)).unwrap_or(32),
        iters: base.as_ref().map_or(s.iters, |b| b.iters),
    })
}

fn cmd_bifurcate(s: &Setup, sec: &SweepSection) -> Result<()> {
    let grid = eta_grid(sec.eta_min, sec.eta_max, sec.steps)?;
    let spec = SweepSpec::new(grid, sec.inits, sec.iters, s.seed);
    let sweep = bifurcation_sweep(&s.objective, &spec, s.exec)?;
    s.write("sweep.csv", &export::sweep_csv(&sweep))?;
    let live = || sweep.cells.iter().filter(|c| !c.diverged);
    let losses: Vec<(f64, f64)> = live().flat_map(|c| c.final_losses.iter().map(move |&l| (c.eta, l))).collect();
    let sharp: Vec<(f64, f64)> = live().map(|c| (c.eta, c.scaled_sharpness)).collect();
    let title = format!("{}: final losses", s.name);
    s.write(
        "bifurcation.svg",
        &Plot { title: &title, xlabel: "eta", ylabel: "loss", log_y: true }.render(&losses, Mark::Dots),
    )?;
    let title = format!("{}: eta * sharpness / 2", s.name);
    s.write(
        "sharpness.svg",
        &Plot { title: &title, xlabel: "eta", ylabel: "scaled sharpness", log_y: false }.render(&sharp, Mark::Dots),
    )?;
    let branches: Vec<usize> =
        (0..sweep.eta_grid.len()).map(|e| sweep.at(e).iter().map(|c| c.distinct_states).max().unwrap_or(0)).collect();
    print_json(&json!({ "name": s.name, "eta": sweep.eta_grid, "max_distinct_states": branches }));
    Ok(())
}

fn cmd_basin(s: &Setup, sec: &BasinSection) -> Result<()> {
    if s.objective.dim() != 2 {
        return Err(usage(format!("basin needs a 2D dataset, got dimension {}", s.objective.dim())));
    }
    let sol = minimize(&s.objective, DEFAULT_TOL)?;
    let eta = s.eta(Some(&sol))?;
    let tr = s.run(eta, s.iters.max(1))?;
    let rep = classify(&s.objective, &tr)?;
    let orbit = rep.as_ref().filter(|r| r.kind == CycleKind::Cycle).map(|r| r.orbit.clone()).unwrap_or_default();
    let [xmin, xmax, ymin, ymax] = sec.bounds;
    let spec = RasterSpec { xmin, xmax, ymin, ymax, nx: sec.resolution[0], ny: sec.resolution[1], iters: sec.iters };
    let raster = basin_raster(&s.objective, eta, spec, &sol.w_star, &orbit, s.exec)?;
    let gamma = match s.eta {
        Some(EtaSpec::Gamma { gamma, .. }) => Some(gamma),
        _ => None,
    };
    s.write("basin.pgm", &export::basin_pgm(&raster))?;
    s.write("basin.txt", &export::basin_header(&raster, gamma))?;
    print!("{}", export::basin_header(&raster, gamma));
    Ok(())
}

fn basin_settings(
    s: &Setup,
    bounds: Option<Vec<f64>>,
    res: Option<Vec<usize>>,
    cell_iters: Option<usize>,
) -> BasinSection {
    let base = s.config.as_ref().and_then(|c| c.basin.clone()).unwrap_or(BasinSection {
        bounds: [-10.0, 30.0, -10.0, 30.0],
        resolution: [64, 64],
        iters: 5_000,
    });
    BasinSection {
        bounds: bounds.map_or(base.bounds, |b| [b[0], b[1], b[2], b[3]]),
        resolution: res.map_or(base.resolution, |r| [r[0], r[1]]),
        iters: cell_iters.unwrap_or(base.iters),
    }
}

fn cmd_eos(s: &Setup, stack: Option<usize>, stacked_iters: usize) -> Result<()> {
    if s.objective.dim() != 1 {
        return Err(usage(format!("eos stacks a 1D cycle, got dimension {}", s.objective.dim())));
    }
    let sol = minimize(&s.objective, DEFAULT_TOL)?;
    let eta = s.eta(Some(&sol))?;
    let tr = s.run(eta, s.iters.max(1))?;
    let rep = classify(&s.objective, &tr)?
        .filter(|r| r.kind == CycleKind::Cycle && r.period >= 2)
        .ok_or_else(|| gdlab::Error::NoCycle("base run did not settle on a cycle".into()))?;
    let k = rep.period;
    if stack.is_some_and(|want| want != k) {
        return Err(gdlab::Error::NoCycle(format!("expected a {}-cycle, found period {k}", stack.unwrap())).into());
    }
    let stacked = Objective::new(kronecker_stack(s.objective.dataset(), k)?, *s.objective.loss());
    let eta_k = k as f64 * eta;
    let w0: Vec<f64> = rep.orbit.iter().map(|w| w[0]).collect();
    let st = run(&stacked, &GdConfig::with_eta(eta_k, w0, stacked_iters))?;
    let sharp = sharpness_series(&stacked, &st)?;
    s.write("eos.csv", &export::trajectory_csv(&st, false, Some(&sharp)))?;
    s.write(
        "eos.svg",
        &line_svg(
            &format!("{}: stacked sharpness, 2/eta = {}", s.name, 2.0 / eta_k),
            "sharpness",
            &st.steps,
            &sharp,
            false,
        ),
    )?;
    let tail = &sharp[sharp.len().saturating_sub(1024)..];
    let min_tail = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let stacked_sol = minimize(&stacked, DEFAULT_TOL)?;
    print_json(&json!({
        "name": s.name,
        "period": k,
        "eta": eta_k,
        "two_over_eta": 2.0 / eta_k,
        "tail_min_sharpness": min_tail,
        "eta_2lam_stacked": stacked_sol.eta_two_over_lambda,
        "sharpness_above_two_over_eta": min_tail > 2.0 / eta_k,
    }));
    Ok(())
}

fn cmd_hunt(gamma: f64, loss: &str, budget: usize, out: Option<&Path>, sequential: bool) -> Result<()> {
    let loss = ScalarLoss::by_name(loss)?;
    let (recipe, rep) = hunt_1d(gamma, &SearchSpace::default(), loss, budget, exec(sequential))?;
    print_json(&json!({
        "m": recipe.m, "n": recipe.n, "x_big": recipe.x_big, "b": recipe.b,
        "gamma": recipe.gamma, "w0": recipe.w0, "cycle": cycle_json(&rep),
    }));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("hunt.cds"), to_compact(&recipe.dataset()?))?;
        let cfg = RecipeConfig {
            name: "hunt".into(),
            dataset: "hunt.cds".into(),
            loss: loss.name().into(),
            gamma: Some(recipe.gamma),
            eta: None,
            reference: "lambda".into(),
            w0: vec![recipe.w0],
            iters: 300_000,
            expect_period: Some(rep.period),
            stack: None,
            basin: None,
            sweep: None,
        };
        fs::write(dir.join("hunt.toml"), cfg.to_toml()?)?;
    }
    Ok(())
}

fn cmd_check_loss(name: &str) -> Result<bool> {
    let loss = ScalarLoss::by_name(name)?;
    let rep = verify_assumption1(&loss, GridSpec::default(), &DEFAULT_EPS)?;
    for c in &rep.checks {
        let at = c.at.map_or(String::new(), |z| format!(" at z = {z}"));
        println!("{:<6} {:<22} worst {:e}{at}", if c.passed { "ok" } else { "FAIL" }, c.name, c.worst_violation);
    }
    Ok(rep.all_passed())
}

fn cmd_repro(dir: &Path, out: &Path, only: Option<&str>, sequential: bool) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .toml configs in {}", dir.display());
    }
    for path in paths {
        let args = RunArgs {
            data: None,
            config: Some(path.clone()),
            loss: None,
            eta: None,
            gamma: None,
            reference: None,
            iters: None,
            seed: 0,
            out: None,
            w0: None,
            zero_negative: false,
            sequential,
        };
        let mut s = Setup::from_args(&args)?;
        if only.is_some_and(|o| !s.name.contains(o)) {
            continue;
        }
        s.out = out.join(&s.name);
        println!("== {} ({})", s.name, path.display());
        let cfg = s.config.clone().expect("repro always loads a config");
        if let Ok(sol) = minimize(&s.objective, DEFAULT_TOL) {
            s.write("solution.csv", &export::solution_csv(&sol))?;
            print!("{}", export::solution_csv(&sol));
        }
        if !cfg.w0.is_empty() {
            let every = (s.iters / 5000).max(1);
            let rep = cmd_trajectory(&s, every, true, false)?;
            if let Some(want) = cfg.expect_period {
                let got = rep.as_ref().map_or(0, |r| r.period);
                if got != want {
                    return Err(
                        gdlab::Error::NoCycle(format!("{}: expected period {want}, found {got}", s.name)).into()
                    );
                }
            }
            cmd_psd(&s, 1024)?;
        }
        if let Some(sec) = &cfg.sweep {
            cmd_bifurcate(&s, sec)?;
        }
        if let Some(sec) = &cfg.basin {
            cmd_basin(&s, sec)?;
        }
        if let Some(k) = cfg.stack {
            cmd_eos(&s, Some(k), 20_000)?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Solve { run, json } => {
            let s = Setup::from_args(&run)?;
            let sol = cmd_solve(&s, json)?;
            if run.out.is_some() {
                s.write("solution.csv", &export::solution_csv(&sol))?;
            }
        }
        Cmd::Trajectory { run, record_every, weights, sharpness } => {
            if record_every == 0 {
                return Err(usage("--record-every must be positive"));
            }
            cmd_trajectory(&Setup::from_args(&run)?, record_every, weights, sharpness)?;
        }
        Cmd::Psd { run, window } => cmd_psd(&Setup::from_args(&run)?, window)?,
        Cmd::Bifurcate { run, eta_min, eta_max, steps, inits } => {
            let s = Setup::from_args(&run)?;
            let sec = sweep_settings(&s, eta_min, eta_max, steps, inits)?;
            cmd_bifurcate(&s, &sec)?;
        }
        Cmd::Basin { run, bounds, res, cell_iters } => {
            if bounds.as_ref().is_some_and(|b| b.len() != 4) {
                return Err(usage("--bounds takes xmin,xmax,ymin,ymax"));
            }
            if res.as_ref().is_some_and(|r| r.len() != 2) {
                return Err(usage("--res takes nx,ny"));
            }
            let s = Setup::from_args(&run)?;
            let sec = basin_settings(&s, bounds, res, cell_iters);
            cmd_basin(&s, &sec)?;
        }
        Cmd::Eos { run, stack, stacked_iters } => {
            let s = Setup::from_args(&run)?;
            cmd_eos(&s, stack.or(s.config.as_ref().and_then(|c| c.stack)), stacked_iters)?;
        }
        Cmd::Hunt { gamma, loss, budget, out, sequential } => {
            cmd_hunt(gamma, &loss, budget, out.as_deref(), sequential)?
        }
        Cmd::CheckLoss { loss } => return cmd_check_loss(&loss),
        Cmd::Repro { configs, out, only, sequential } => cmd_repro(&configs, &out, only.as_deref(), sequential)?,
    }
    Ok(true)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<gdlab::Error>() {
        Some(e) if e.is_domain() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
