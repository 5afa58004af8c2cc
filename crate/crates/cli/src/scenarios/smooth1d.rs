//! Two copies of one bump at different scales, smoothed with fixed, manual and
//! automatic adaptation.

use adaptconv::{
    adaptive_conv, mu_adaptive_fixed_point, mu_wigner, mu_windowed, FixedPointOptions, GaussianKernel, MuField,
    ScalarField, SpdMatrix,
};

use super::Outcome;
use crate::config::ScenarioSpec;
use crate::error::Result;
use crate::output::Table;
use crate::report::{Check, RunReport};

/// Shift of the compressed copy.
pub const SHIFT: f64 = 8.0;

/// The uncompressed bump `f_1`.
pub fn bump(x: f64) -> f64 {
    (-x * x / 2.0).exp() * (1.0 + 0.05 * (3.0 * x).cos())
}

/// `(f_1 * g)(u)` for a centered Gaussian `g` of standard deviation `sigma`,
/// by a fine Riemann sum.
pub fn smoothed_bump(u: f64, sigma: f64) -> f64 {
    let h = 1e-3;
    let s2 = sigma * sigma;
    let norm = (2.0 * std::f64::consts::PI * s2).sqrt();
    (-12_000..=12_000)
        .map(|k| {
            let y = k as f64 * h;
            bump(y) * (-(u - y).powi(2) / (2.0 * s2)).exp() / norm * h
        })
        .sum()
}

fn mean_over(values: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = values.iter().zip(mask).filter(|(_, &m)| m).fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    s / n as f64
}

pub fn run(spec: &ScenarioSpec) -> Result<Outcome> {
    let grid = spec.grid()?;
    let alpha = spec.alpha;
    let f = ScalarField::from_fn(&grid, |x| bump(x[0]) + bump(alpha * (x[0] - SHIFT)))?;
    let g = GaussianKernel::new(1, spec.sigma)?;
    let threshold = SHIFT - 1.0;

    let unit = MuField::from_scalar_fn(&grid, |_| 1.0)?;
    let tilde = MuField::from_scalar_fn(&grid, |_| alpha)?;
    let manual = MuField::from_scalar_fn(&grid, |x| if x[0] < threshold { 1.0 } else { alpha })?;
    let mu_c = mu_windowed(&f, &SpdMatrix::scalar(1, spec.q)?)?;
    let (mu_d, fp) = mu_adaptive_fixed_point(&f, &FixedPointOptions::with_lambda(spec.lambda))?;
    let mu_e = mu_wigner(&f, 1e-12)?;

    let plain = adaptive_conv(&f, &g, &unit, 1.0)?;
    let narrow = adaptive_conv(&f, &g, &tilde, 1.0)?;
    let by_manual = adaptive_conv(&f, &g, &manual, 1.0)?;
    let by_d = adaptive_conv(&f, &g, &mu_d, 1.0)?;
    let by_e = adaptive_conv(&f, &g, &mu_e, 1.0)?;

    let mut table = Table::new(&[
        "x",
        "f",
        "f_conv_g",
        "f_conv_g_tilde",
        "f_conv_mu_manual",
        "mu_c",
        "mu_d",
        "mu_e",
        "f_conv_mu_d",
        "f_conv_mu_e",
    ]);
    let mut x = [0.0];
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        table.push(vec![
            x[0],
            f.values()[i],
            plain.values()[i],
            narrow.values()[i],
            by_manual.values()[i],
            mu_c.get(i)[0],
            mu_d.get(i)[0],
            mu_e.get(i)[0],
            by_d.values()[i],
            by_e.values()[i],
        ]);
    }

    let mut report = RunReport::new("smooth1d", spec.params());
    report.note("mu_d.converged", fp.converged);
    report.note("mu_d.iterations", fp.iterations);
    report.note("mu_d.final_residual", fp.final_residual);

    // manual adaptation against the rescaled single-bump reference
    let peak = smoothed_bump(0.0, spec.sigma);
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        let reference = if x[0] >= threshold {
            smoothed_bump(alpha * (x[0] - SHIFT), spec.sigma)
        } else if x[0] < threshold - 2.0 {
            smoothed_bump(x[0], spec.sigma)
        } else {
            continue;
        };
        worst = worst.max((by_manual.values()[i] - reference).abs() / peak);
    }
    report.push(Check::residual("smooth1d.manual_mu.plateau_match", worst, 0.05));

    // plateaus: where each bump exceeds half its peak
    let xs = grid.axis_coords(0);
    let left: Vec<bool> = xs.iter().map(|&x| bump(x) > 0.5 && x < threshold).collect();
    let right: Vec<bool> = xs.iter().map(|&x| bump(alpha * (x - SHIFT)) > 0.5 && x >= threshold).collect();
    let mu_e_vals: Vec<f64> = (0..grid.len()).map(|i| mu_e.get(i)[0]).collect();
    let ratio = mean_over(&mu_e_vals, &right) / mean_over(&mu_e_vals, &left);
    report.push(Check::residual("smooth1d.mu_e.plateau_ratio_rel", ratio / alpha - 1.0, 0.1));

    if (alpha - 1.0).abs() < 1e-12 {
        let support: Vec<bool> = f.values().iter().map(|&v| v > 0.1 * f.max_abs()).collect();
        let vals: Vec<f64> = mu_e_vals.iter().zip(&support).filter(|(_, &s)| s).map(|(v, _)| *v).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        report.push(Check::residual("smooth1d.mu_e.single_scale_cv", var.sqrt() / mean, 0.1));
    }

    Ok(Outcome { report, tables: vec![("smooth1d.csv".into(), table)] })
}
