//! A strongly curved 2D density smoothed with automatic adaptation, with the
//! contour ellipses of the stretched kernels.

use adaptconv::{
    adaptive_conv, integrate, mu_adaptive_fixed_point, mu_wigner, FixedPointOptions, GaussianKernel, Grid, MuField,
    ScalarField,
};

use super::Outcome;
use crate::config::ScenarioSpec;
use crate::error::Result;
use crate::output::Table;
use crate::report::{Check, RunReport};

pub const BEND: f64 = 4.0;
pub const WIDTH: f64 = 5.0;

pub fn density(x: &[f64]) -> f64 {
    let u = x[0] / WIDTH;
    let v = x[1] - BEND * u * u;
    (-(u * u + v * v) / 2.0).exp() / (2.0 * std::f64::consts::PI * WIDTH)
}

/// Semi-axes and major-axis angle of the `level` probability contour of
/// `|det mu| g(mu (x - y))` for a Gaussian `g` of standard deviation `sigma`.
///
/// `x - y` is then Gaussian with covariance `sigma^2 mu^-2`, whose contour of
/// probability `level` has squared Mahalanobis radius `-2 ln(1 - level)`.
pub fn kernel_ellipse(mu: &[f64], sigma: f64, level: f64) -> (f64, f64, f64) {
    let (a, b, c) = (mu[0], 0.5 * (mu[1] + mu[2]), mu[3]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
    let (big, small) = (mean + rad, mean - rad);
    let r = (-2.0 * (1.0 - level).ln()).sqrt() * sigma;
    // the major axis of mu^-1 is the eigenvector of the smaller eigenvalue
    let angle = 0.5 * (2.0 * b).atan2(a - c) + std::f64::consts::FRAC_PI_2;
    let angle = (angle + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI) - std::f64::consts::FRAC_PI_2;
    (r / small, r / big, angle)
}

fn nearest(grid: &Grid, y: &[f64; 2]) -> usize {
    let m: Vec<usize> = (0..2)
        .map(|k| {
            let j = ((y[k] - grid.lo()[k]) / grid.spacing()[k]).round();
            j.clamp(0.0, (grid.shape()[k] - 1) as f64) as usize
        })
        .collect();
    grid.ravel(&m)
}

/// Ratio of the largest to the smallest eigenvalue of a 2x2 symmetric matrix.
fn axis_ratio(mu: &[f64]) -> f64 {
    let (a, b, c) = (mu[0], 0.5 * (mu[1] + mu[2]), mu[3]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
    (mean + rad) / (mean - rad)
}

pub fn run(spec: &ScenarioSpec) -> Result<Outcome> {
    let grid = spec.grid()?;
    let f = ScalarField::from_fn(&grid, density)?;
    let g = GaussianKernel::new(2, spec.sigma)?;
    let unit = MuField::from_scalar_fn(&grid, |_| 1.0)?;
    let (mu_d, fp) = mu_adaptive_fixed_point(&f, &FixedPointOptions::with_lambda(spec.lambda))?;
    let mu_e = mu_wigner(&f, 1e-12)?;
    let plain = adaptive_conv(&f, &g, &unit, 1.0)?;
    let by_d = adaptive_conv(&f, &g, &mu_d, 1.0)?;
    let by_e = adaptive_conv(&f, &g, &mu_e, 1.0)?;

    let mut fields = Table::new(&["x1", "x2", "f", "f_conv_g", "f_conv_mu_d", "f_conv_mu_e"]);
    let mut x = [0.0; 2];
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        fields.push(vec![x[0], x[1], f.values()[i], plain.values()[i], by_d.values()[i], by_e.values()[i]]);
    }

    let mut ellipses = Table::new(&["variant", "y1", "y2", "semi_major", "semi_minor", "angle"]);
    for c in &spec.centers {
        let i = nearest(&grid, c);
        grid.point(i, &mut x);
        // variant code: 0 plain kernel, 1 mu_d, 2 mu_e
        let rows: [(f64, &[f64]); 3] = [(0.0, unit.get(i)), (1.0, mu_d.get(i)), (2.0, mu_e.get(i))];
        for (tag, mu) in rows {
            let (a, b, t) = kernel_ellipse(mu, spec.sigma, 0.8);
            ellipses.push(vec![tag, x[0], x[1], a, b, t]);
        }
    }

    let mut report = RunReport::new("banana2d", spec.params());
    report.note("mu_d.converged", fp.converged);
    report.note("mu_d.iterations", fp.iterations);
    report.note("mu_d.final_residual", fp.final_residual);
    let mass = integrate(&f);
    for (name, out) in [("plain", &plain), ("mu_d", &by_d), ("mu_e", &by_e)] {
        report.push(Check::residual(format!("banana2d.mass.{name}"), (integrate(out) - mass) / mass, 1e-4));
    }

    // anisotropy: arms against apex
    let apex = nearest(&grid, &[0.0, 0.0]);
    let arm_x = 2.0 * WIDTH;
    let arms = [nearest(&grid, &[-arm_x, BEND * 4.0]), nearest(&grid, &[arm_x, BEND * 4.0])];
    let apex_ratio = axis_ratio(mu_e.get(apex));
    let arm_ratio = arms.iter().map(|&i| axis_ratio(mu_e.get(i))).fold(f64::INFINITY, f64::min);
    report.push(Check::at_least("banana2d.mu_e.arm_over_apex_anisotropy", arm_ratio / apex_ratio, 1.0));

    // local Gaussian at the apex: -D^2 ln f = diag(1 / WIDTH^2, 1), so mu = diag(WIDTH^-1, 1) / 2
    let predicted = [0.5 / WIDTH, 0.0, 0.0, 0.5];
    let got = mu_e.get(apex);
    let num: f64 = got.iter().zip(&predicted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = predicted.iter().map(|b| b * b).sum::<f64>().sqrt();
    report.push(Check::residual("banana2d.mu_e.apex_local_gaussian", num / den, 0.25));

    Ok(Outcome { report, tables: vec![("banana2d.csv".into(), fields), ("banana2d_ellipses.csv".into(), ellipses)] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_of_diagonal_mu() {
        let r = (-2.0 * 0.2f64.ln()).sqrt();
        let (a, b, t) = kernel_ellipse(&[0.5, 0.0, 0.0, 2.0], 1.0, 0.8);
        assert!((a - r / 0.5).abs() < 1e-12 && (b - r / 2.0).abs() < 1e-12);
        assert!(t.abs() < 1e-12);
        let (a, b, t) = kernel_ellipse(&[2.0, 0.0, 0.0, 0.5], 1.0, 0.8);
        assert!((a - r / 0.5).abs() < 1e-12 && (b - r / 2.0).abs() < 1e-12);
        assert!((t.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn density_is_normalized() {
        let grid = adaptconv::make_grid(2, &[-30.0, -10.0], &[30.0, 120.0], &[241, 521]).unwrap();
        let f = ScalarField::from_fn(&grid, density).unwrap();
        assert!((integrate(&f) - 1.0).abs() < 1e-6);
    }
}
