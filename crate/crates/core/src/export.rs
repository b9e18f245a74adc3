//! Text formats for CLI output. Floats use Rust's shortest round-trip
//! representation so repeated runs are byte-identical.

use std::fmt::Write;

use crate::analysis::{BasinLabel, BasinRaster, BifurcationSweep, PsdResult};
use crate::dynamics::Trajectory;
use crate::objective::Solution;

pub fn solution_csv(sol: &Solution) -> String {
    let mut head: Vec<String> = (1..=sol.w_star.len()).map(|i| format!("w_star_{i}")).collect();
    head.extend(["lambda_star", "L_global", "eta_2L", "eta_1lam", "eta_2lam", "grad_norm"].map(String::from));
    let mut row: Vec<String> = sol.w_star.iter().map(|v| v.to_string()).collect();
    for v in [
        sol.lambda_star,
        sol.l_global,
        sol.eta_two_over_l,
        sol.eta_one_over_lambda,
        sol.eta_two_over_lambda,
        sol.grad_norm,
    ] {
        row.push(v.to_string());
    }
    format!("{}\n{}\n", head.join(","), row.join(","))
}

/// Columns `t, loss`, then `w_1..w_d` when `with_weights`, then
/// `sharpness` when a series is given.
pub fn trajectory_csv(traj: &Trajectory, with_weights: bool, sharpness: Option<&[f64]>) -> String {
    let d = traj.iterates.first().map_or(0, Vec::len);
    let mut out = String::from("t,loss");
    if with_weights {
        for i in 1..=d {
            let _ = write!(out, ",w_{i}");
        }
    }
    if sharpness.is_some() {
        out.push_str(",sharpness");
    }
    out.push('\n');
    for (k, (t, loss)) in traj.steps.iter().zip(&traj.losses).enumerate() {
        let _ = write!(out, "{t},{loss}");
        if with_weights {
            for v in &traj.iterates[k] {
                let _ = write!(out, ",{v}");
            }
        }
        if let Some(s) = sharpness {
            let _ = write!(out, ",{}", s[k]);
        }
        out.push('\n');
    }
    out
}

/// One row per distinct tail loss; diverged cells get a single row with an
/// empty loss.
pub fn sweep_csv(sweep: &BifurcationSweep) -> String {
    let mut out = String::from("eta,init_index,loss_value,scaled_sharpness,diverged\n");
    for c in &sweep.cells {
        if c.diverged {
            let _ = writeln!(out, "{},{},,,1", c.eta, c.init_index);
            continue;
        }
        for l in &c.final_losses {
            let _ = writeln!(out, "{},{},{},{},0", c.eta, c.init_index, l, c.scaled_sharpness);
        }
    }
    out
}

pub fn psd_csv(psd: &PsdResult) -> String {
    let mut out = String::from("freq,power\n");
    for (f, p) in psd.freqs.iter().zip(&psd.power) {
        let _ = writeln!(out, "{f},{p}");
    }
    out
}

/// ASCII PGM: 0 = other, 128 = cycle, 255 = fixed point; top row is the
/// largest `w_2`.
pub fn basin_pgm(raster: &BasinRaster) -> String {
    let s = &raster.spec;
    let mut out = format!("P2\n{} {}\n255\n", s.nx, s.ny);
    for row in raster.labels.chunks(s.nx) {
        let line: Vec<String> = row.iter().map(|l| l.gray().to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn basin_header(raster: &BasinRaster, gamma: Option<f64>) -> String {
    let s = &raster.spec;
    let mut out = String::new();
    let _ = writeln!(out, "xmin = {}\nxmax = {}\nymin = {}\nymax = {}", s.xmin, s.xmax, s.ymin, s.ymax);
    let _ = writeln!(out, "nx = {}\nny = {}\niters = {}", s.nx, s.ny, s.iters);
    if let Some(g) = gamma {
        let _ = writeln!(out, "gamma = {g}");
    }
    let _ = writeln!(out, "eta = {}", raster.eta);
    let _ = writeln!(out, "to_fixed_point = {}", raster.count(BasinLabel::ToFixedPoint));
    let _ = writeln!(out, "to_cycle = {}", raster.count(BasinLabel::ToCycle));
    let _ = writeln!(out, "other = {}", raster.count(BasinLabel::Other));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{psd, RasterSpec};

    #[test]
    fn pgm_layout() {
        let spec = RasterSpec { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0, nx: 3, ny: 2, iters: 1 };
        let labels = vec![
            BasinLabel::Other,
            BasinLabel::ToCycle,
            BasinLabel::ToFixedPoint,
            BasinLabel::ToFixedPoint,
            BasinLabel::ToFixedPoint,
            BasinLabel::Other,
        ];
        let r = BasinRaster { spec, eta: 1.0, labels };
        assert_eq!(basin_pgm(&r), "P2\n3 2\n255\n0 128 255\n255 255 0\n");
        assert!(basin_header(&r, Some(0.95)).contains("to_cycle = 1\n"));
    }

    #[test]
    fn psd_rows() {
        let r = psd(&[1.0, 0.0, 1.0, 0.0], 4).unwrap();
        assert_eq!(psd_csv(&r), "freq,power\n0,0\n0.25,0\n0.5,1\n");
    }
}
