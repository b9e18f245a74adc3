//! Independent numerical oracles checked against the library.

#![allow(clippy::needless_range_loop)]

use gdlab::data::{Dataset, Group};
use gdlab::linalg::{spectral_radius, SymMatrix};
use gdlab::loss::{logistic, squareplus};
use gdlab::objective::{minimize, minimize_with, Objective, Solver, DEFAULT_TOL};
use gdlab::psd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Cyclic Jacobi eigenvalue sweep on a dense symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn lambda_max_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let raw: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let dense: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| raw[i][j] + raw[j][i]).collect()).collect();
        let m = SymMatrix::from_fn(5, |i, j| dense[i][j]);
        let oracle = jacobi_eigenvalues(dense).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let got = m.lambda_max().unwrap();
        assert!((got - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{got} vs {oracle}");
    }
}

#[test]
fn spectral_radius_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for dim in [1usize, 2, 3, 4] {
        for _ in 0..20 {
            // Positive entries give a simple dominant (Perron) eigenvalue.
            let m: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(0.1..2.0)).collect();
            let mut v = vec![1.0; dim];
            let mut rho = 0.0;
            for _ in 0..2000 {
                let next: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| m[i * dim + j] * v[j]).sum()).collect();
                rho = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
                v = next.iter().map(|x| x / rho).collect();
            }
            let got = spectral_radius(&m, dim);
            assert!((got - rho).abs() <= 1e-9 * rho, "dim {dim}: {got} vs {rho}");
        }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-10 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn one_dimensional_minimizer_matches_golden_section() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    while tested < 30 {
        let groups: Vec<Group> = (0..4)
            .map(|_| {
                Group::new(
                    vec![rng.gen_range(-2.0..2.0)],
                    if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    rng.gen_range(1..=9),
                )
            })
            .collect();
        let Ok(ds) = Dataset::new(groups) else { continue };
        for loss in [logistic(), squareplus()] {
            let obj = Objective::new(ds.clone(), loss);
            let Ok(sol) = minimize(&obj, DEFAULT_TOL) else { continue };
            // Golden section on the derivative's sign change would be sharper;
            // on the value it is good to about sqrt(machine eps) relative.
            let w = golden_section(|w| obj.value(&[w]).unwrap(), sol.w_star[0] - 50.0, sol.w_star[0] + 50.0);
            assert!((w - sol.w_star[0]).abs() <= 1e-6 * (1.0 + w.abs()), "{w} vs {:?}", sol.w_star);
            tested += 1;
        }
    }
}

#[test]
fn newton_and_gradient_solvers_agree() {
    let ds = Dataset::new(vec![
        Group::new(vec![1.0, 0.5], 1.0, 4),
        Group::new(vec![-1.0, 0.2], 1.0, 2),
        Group::new(vec![0.3, 1.0], -1.0, 3),
        Group::new(vec![-0.4, -0.8], -1.0, 1),
    ])
    .unwrap();
    for loss in [logistic(), squareplus()] {
        let obj = Objective::new(ds.clone(), loss);
        let a = minimize_with(&obj, 1e-10, Solver::Newton).unwrap();
        let b = minimize_with(&obj, 1e-10, Solver::Gradient).unwrap();
        for (x, y) in a.w_star.iter().zip(&b.w_star) {
            assert!((x - y).abs() <= 1e-7, "{:?} vs {:?}", a.w_star, b.w_star);
        }
    }
}

#[test]
fn psd_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = 64;
    let x: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let res = psd(&x, w).unwrap();
    let seg = &x[x.len() - w..];
    let mean = seg.iter().sum::<f64>() / w as f64;
    for k in 0..=w / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in seg.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / w as f64;
            re += (v - mean) * ang.cos();
            im += (v - mean) * ang.sin();
        }
        let c = if k == 0 || k == w / 2 { 1.0 } else { 2.0 };
        let want = c * (re * re + im * im) / w as f64;
        assert!((res.power[k] - want).abs() <= 1e-9 * (1.0 + want), "bin {k}");
        assert_eq!(res.freqs[k], k as f64 / w as f64);
    }
}
