//! Property tests for the algebraic invariants of the objective, the GD map
//! and the constructions.

use gdlab::analysis::{detect_cycle, CycleKind, CycleOptions};
use gdlab::construct::{build_1d, kronecker_stack, make_toy, period2_points, Recipe1D, ToySpec};
use gdlab::data::{check_separable, parse_compact, to_compact, Dataset, Group, Verdict};
use gdlab::dynamics::{gd_step, run, toy_logit_step, toy_step, GdConfig};
use gdlab::linalg::{dist_inf, norm_inf};
use gdlab::loss::{logistic, squareplus, ScalarLoss};
use gdlab::objective::{minimize, Objective, DEFAULT_TOL};
use gdlab::{bifurcation_sweep, relu_limit_gap, Exec, SweepSpec};
use proptest::prelude::*;

fn group(dim: usize) -> impl Strategy<Value = Group> {
    (prop::collection::vec(-3.0f64..3.0, dim), prop::bool::ANY, 1u64..20)
        .prop_map(|(x, pos, c)| Group::new(x, if pos { 1.0 } else { -1.0 }, c))
}

fn dataset(dim: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(group(dim), 2..8).prop_filter_map("invalid dataset", |g| Dataset::new(g).ok())
}

fn any_loss() -> impl Strategy<Value = ScalarLoss> {
    prop::bool::ANY.prop_map(|b| if b { logistic() } else { squareplus() })
}

fn weights(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, dim)
}

fn solvable(ds: &Dataset, loss: ScalarLoss) -> Option<(Objective, gdlab::Solution)> {
    let obj = Objective::new(ds.clone(), loss);
    let sol = minimize(&obj, DEFAULT_TOL).ok()?;
    Some((obj, sol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compact_round_trip(ds in (1usize..4).prop_flat_map(dataset)) {
        prop_assert_eq!(parse_compact(&to_compact(&ds)).unwrap(), ds);
    }

    #[test]
    fn flipping_sign_and_label_changes_nothing(
        (ds, w) in (1usize..4).prop_flat_map(|d| (dataset(d), weights(d))),
        loss in any_loss(),
    ) {
        let flipped = Dataset::new(
            ds.groups().iter().map(|g| Group::new(g.x.iter().map(|v| -v).collect(), -g.y, g.count)).collect(),
        ).unwrap();
        let (a, b) = (Objective::new(ds, loss), Objective::new(flipped, loss));
        prop_assert_eq!(a.value(&w).unwrap(), b.value(&w).unwrap());
        prop_assert_eq!(a.gradient(&w).unwrap(), b.gradient(&w).unwrap());
    }

    #[test]
    fn scaling_counts_leaves_objective_unchanged(
        (ds, w) in (1usize..4).prop_flat_map(|d| (dataset(d), weights(d))),
        k in 2u64..7,
        loss in any_loss(),
    ) {
        let (a, b) = (Objective::new(ds.clone(), loss), Objective::new(ds.scale_counts(k).unwrap(), loss));
        let (va, vb) = (a.value(&w).unwrap(), b.value(&w).unwrap());
        prop_assert!((va - vb).abs() <= 1e-12 * va.abs());
        prop_assert!(dist_inf(&a.gradient(&w).unwrap(), &b.gradient(&w).unwrap()) <= 1e-12 * (1.0 + va));
    }

    #[test]
    fn l_global_matches_expanded_sum(ds in (1usize..4).prop_flat_map(dataset), loss in any_loss()) {
        // Expand every group into `count` unit copies.
        let expanded = Dataset::new(
            ds.groups().iter().flat_map(|g| std::iter::repeat_n(Group::new(g.x.clone(), g.y, 1), g.count as usize)).collect(),
        ).unwrap();
        let a = Objective::new(ds, loss).l_global().unwrap();
        let b = Objective::new(expanded, loss).l_global().unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12));
    }

    #[test]
    fn sharpness_at_optimum_is_below_global_smoothness(ds in (1usize..4).prop_flat_map(dataset), loss in any_loss()) {
        if let Some((_, sol)) = solvable(&ds, loss) {
            prop_assert!(sol.lambda_star <= sol.l_global * (1.0 + 1e-12));
            prop_assert!(sol.eta_two_over_l <= sol.eta_two_over_lambda);
        }
    }

    #[test]
    fn minimizer_is_a_fixed_point(ds in (1usize..4).prop_flat_map(dataset), loss in any_loss(), gamma in 0.1f64..5.0) {
        if let Some((obj, sol)) = solvable(&ds, loss) {
            let eta = gamma / sol.lambda_star;
            let next = gd_step(&obj, &sol.w_star, eta).unwrap();
            prop_assert!(dist_inf(&next, &sol.w_star) <= eta * 1e-9 * (1.0 + norm_inf(&sol.w_star)));
        }
    }

    #[test]
    fn one_d_gd_below_one_over_lambda_converges(ds in dataset(1), loss in any_loss(), gamma in 0.2f64..1.0, w0 in -20.0f64..20.0) {
        // Below 1/L''(w*) the 1D map is monotone toward w*.
        if let Some((obj, sol)) = solvable(&ds, loss) {
            let eta = gamma / sol.lambda_star;
            let tr = run(&obj, &GdConfig::with_eta(eta, vec![w0], 200_000).record_every(200_000)).unwrap();
            prop_assert!(!tr.diverged);
            prop_assert!((tr.last()[0] - sol.w_star[0]).abs() <= 1e-6 * (1.0 + sol.w_star[0].abs()));
        }
    }

    #[test]
    fn loss_derivatives_match_finite_differences(z in -30.0f64..30.0, loss in any_loss()) {
        let h = 1e-5;
        let d1 = (loss.eval(z + h) - loss.eval(z - h)) / (2.0 * h);
        let d2 = (loss.d1(z + h) - loss.d1(z - h)) / (2.0 * h);
        prop_assert!((d1 - loss.d1(z)).abs() <= 1e-6 * (1.0 + z.abs()));
        prop_assert!((d2 - loss.d2(z)).abs() <= 1e-6);
    }

    #[test]
    fn relu_gap_shrinks_with_eps(z in -5.0f64..5.0, loss in any_loss()) {
        let coarse = relu_limit_gap(&loss, z, 1e-1).unwrap();
        let fine = relu_limit_gap(&loss, z, 1e-3).unwrap();
        prop_assert!(fine <= coarse + 1e-15);
        prop_assert!(fine <= 1e-5);
    }

    #[test]
    fn separability_agrees_with_angular_scan(ds in (1usize..3).prop_flat_map(dataset)) {
        let rep = check_separable(&ds);
        let d = ds.dim();
        let margin = |w: &[f64]| ds.groups().iter()
            .map(|g| g.y * g.x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let scan_hit = if d == 1 {
            margin(&[1.0]) > 0.0 || margin(&[-1.0]) > 0.0
        } else {
            (0..3600).any(|k| {
                let t = k as f64 * std::f64::consts::TAU / 3600.0;
                margin(&[t.cos(), t.sin()]) > 1e-9
            })
        };
        prop_assert_ne!(rep.verdict, Verdict::Unknown);
        if scan_hit {
            prop_assert_eq!(rep.verdict, Verdict::Separable);
        }
        if let Some(w) = rep.witness {
            prop_assert!(margin(&w) > 0.0);
        }
    }

    #[test]
    fn kronecker_stack_of_repeated_weights(
        (ds, w) in (1usize..3).prop_flat_map(|d| (dataset(d), weights(d))),
        k in 2usize..5,
        loss in any_loss(),
    ) {
        let base = Objective::new(ds.clone(), loss);
        let stacked = Objective::new(kronecker_stack(&ds, k).unwrap(), loss);
        let rep: Vec<f64> = w.iter().cycle().take(k * ds.dim()).copied().collect();
        let (vb, vs) = (base.value(&w).unwrap(), stacked.value(&rep).unwrap());
        prop_assert!((vb - vs).abs() <= 1e-12 * (1.0 + vb));
        let gb = base.gradient(&w).unwrap();
        let gs = stacked.gradient(&rep).unwrap();
        for (j, g) in gs.iter().enumerate() {
            prop_assert!((g * k as f64 - gb[j % ds.dim()]).abs() <= 1e-12 * (1.0 + norm_inf(&gb)));
        }
        let (sb, ss) = (base.sharpness(&w).unwrap(), stacked.sharpness(&rep).unwrap());
        prop_assert!((sb / k as f64 - ss).abs() <= 1e-12 * (1.0 + sb));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn toy_logit_map_is_consistent(p in 0.01f64..0.99, eta in 0.5f64..20.0, n in 2usize..8) {
        let z = (p / (1.0 - p)).ln();
        let q = toy_step(p, eta, n);
        let zq = toy_logit_step(z, eta, n);
        prop_assert!((q - 1.0 / (1.0 + (-zq).exp())).abs() <= 1e-12);
    }

    #[test]
    fn toy_gradient_is_fixed_point_residual(n in 2usize..20, w in -5.0f64..5.0) {
        // The toy gradient is sigma(w) - (n-1)/n.
        let obj = Objective::new(make_toy(&ToySpec { n, v: vec![1.0] }).unwrap(), logistic());
        let p = 1.0 / (1.0 + (-w).exp());
        let g = obj.gradient(&[w]).unwrap()[0];
        let nf = n as f64;
        prop_assert!((g - (p - (nf - 1.0) / nf)).abs() <= 1e-12);
    }

    #[test]
    fn period_two_points_close_in_two_steps(eta in 8.05f64..100.0) {
        let (p, q) = period2_points(eta).unwrap();
        prop_assert!(p > 0.5 && q < 0.5);
        let zp = (p / (1.0 - p)).ln();
        let z1 = toy_logit_step(zp, eta, 2);
        let z2 = toy_logit_step(z1, eta, 2);
        prop_assert!((z2 - zp).abs() <= 1e-8 * (1.0 + zp.abs()));
        prop_assert!((1.0 / (1.0 + (-z1).exp()) - q).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn built_recipes_reverify(m in 180u64..260, n_off in 5u64..60, x_big in 10.0f64..80.0, b in 1u64..20, gamma in 1.2f64..1.95) {
        let recipe = Recipe1D { m, n: m - n_off, x_big, b, gamma, w0: 10.0 };
        if let Ok(built) = build_1d(&recipe, logistic()) {
            let again = build_1d(&recipe, logistic()).unwrap();
            prop_assert_eq!(built.eta, again.eta);
            prop_assert!((built.eta * built.solution.lambda_star - gamma).abs() <= 1e-12 * gamma);
            prop_assert!(built.solution.grad_norm <= 1e-10);
        }
    }

    #[test]
    fn detected_period_is_minimal(m in 180u64..260, n_off in 5u64..60, x_big in 10.0f64..80.0, b in 1u64..20, gamma in 1.2f64..1.95) {
        let recipe = Recipe1D { m, n: m - n_off, x_big, b, gamma, w0: 10.0 };
        let Ok(built) = build_1d(&recipe, logistic()) else { return Ok(()) };
        let tr = run(&built.objective, &GdConfig::with_eta(built.eta, vec![10.0], 50_000).record_every(50_000)).unwrap();
        if tr.diverged {
            return Ok(());
        }
        let opts = CycleOptions::default();
        let rep = detect_cycle(&built.objective, &tr, opts).unwrap();
        if rep.kind == CycleKind::Undetermined {
            return Ok(());
        }
        let scale = opts.tol * (1.0 + norm_inf(&rep.orbit[0]));
        let mut w = rep.orbit[0].clone();
        for j in 1..=rep.period {
            w = gd_step(&built.objective, &w, built.eta).unwrap();
            if j < rep.period {
                prop_assert!(dist_inf(&w, &rep.orbit[0]) > scale, "closes early at {}", j);
            }
        }
        prop_assert!(dist_inf(&w, &rep.orbit[0]) <= 10.0 * scale);
    }

    #[test]
    fn sweeps_are_deterministic_across_exec_modes(seed in 0u64..1000) {
        let obj = Objective::new(make_toy(&ToySpec { n: 2, v: vec![1.0] }).unwrap(), logistic());
        let spec = SweepSpec::new(vec![4.0, 9.0, 12.0], 3, 2_000, seed);
        let a = bifurcation_sweep(&obj, &spec, Exec::Sequential).unwrap();
        let b = bifurcation_sweep(&obj, &spec, Exec::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a, bifurcation_sweep(&obj, &spec, Exec::Parallel).unwrap());
    }
}
