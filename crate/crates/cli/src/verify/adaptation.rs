use adaptconv::mu::max_relative_change;
use adaptconv::{
    adaptive_conv, fixed_point_map, gaussian_field, make_grid, mu_adaptive_fixed_point, mu_global_fourier,
    mu_gradient_baseline, mu_wigner, mu_windowed, FixedPointOptions, GaussianKernel, Grid, MuField, Result,
    ScalarField, SpdMatrix, Variant,
};

use super::Context;
use crate::config::{Scenario, ScenarioSpec};
use crate::report::Check;
use crate::scenarios::smooth1d;

fn frob_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Worst relative deviation of `mu` from the constant `expected` at interior
/// points where `f > 1e-6 max f`.
fn calibration_error(mu: &MuField, f: &ScalarField, expected: &[f64]) -> f64 {
    let grid = f.grid();
    let peak = f.max_abs();
    (0..grid.len())
        .filter(|&i| grid.is_interior(i) && f.values()[i] > 1e-6 * peak)
        .map(|i| frob_rel(mu.get(i), expected))
        .fold(0.0, f64::max)
}

const LAMBDAS: [f64; 3] = [0.6, 0.9, 1.2];

pub fn calibration(_: &Context) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cases: Vec<(&str, Grid, Vec<f64>)> = vec![
        ("1d.var1", make_grid(1, &[-9.0], &[9.0], &[361])?, vec![1.0]),
        ("1d.var4", make_grid(1, &[-20.0], &[20.0], &[401])?, vec![4.0]),
        ("2d.id", make_grid(2, &[-8.0, -8.0], &[8.0, 8.0], &[41, 41])?, vec![1.0, 1.0]),
        ("2d.diag14", make_grid(2, &[-8.0, -15.0], &[8.0, 15.0], &[41, 61])?, vec![1.0, 4.0]),
    ];
    for (name, grid, var) in cases {
        let d = var.len();
        let f = gaussian_field(&grid, &vec![0.0; d], &SpdMatrix::from_diagonal(&var)?)?;
        // Sigma^{-1/2} for diagonal Sigma
        let diag = |s: f64| -> Vec<f64> {
            let mut m = vec![0.0; d * d];
            for k in 0..d {
                m[k * d + k] = s / var[k].sqrt();
            }
            m
        };
        let e = mu_wigner(&f, 1e-12)?;
        out.push(Check::residual(format!("calibration.{name}.mu_e"), calibration_error(&e, &f, &diag(0.5)), 0.02));
        for lambda in LAMBDAS {
            let (m, _) = mu_adaptive_fixed_point(&f, &FixedPointOptions::with_lambda(lambda))?;
            let expected = diag((2.0 - lambda * lambda).powf(-0.5));
            out.push(Check::residual(
                format!("calibration.{name}.mu_d.lambda{lambda}"),
                calibration_error(&m, &f, &expected),
                0.02,
            ));
        }
    }
    Ok(out)
}

/// A fixed number of sweeps, so that compared runs do identical work.
fn fixed_sweeps() -> FixedPointOptions {
    FixedPointOptions { tol: 1e-300, max_iter: 40, ..FixedPointOptions::default() }
}

fn all_variants(f: &ScalarField) -> Result<Vec<(&'static str, MuField)>> {
    let d = f.grid().dim();
    Ok(vec![
        ("a", mu_gradient_baseline(f, 1e-6, 1e-6)?),
        ("b", MuField::constant(f.grid(), &mu_global_fourier(f)?, Variant::GlobalFourier)?),
        ("c", mu_windowed(f, &SpdMatrix::identity(d))?),
        ("d", mu_adaptive_fixed_point(f, &fixed_sweeps())?.0),
        ("e", mu_wigner(f, 1e-12)?),
    ])
}

fn profile(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().enumerate().map(|(k, v)| v * v / (1.0 + k as f64)).sum();
    (-r2 / 2.0).exp() * (1.0 + 0.3 * (2.0 * x[0]).cos())
}

fn significant(f: &ScalarField, i: usize) -> bool {
    f.values()[i].abs() > 1e-6 * f.max_abs()
}

/// Worst relative mismatch per variant between `mu_{f(. - a)}(x + a)` and `mu_f(x)`.
fn shift_errors(grid: &Grid, shift: &[usize]) -> Result<Vec<(&'static str, f64)>> {
    let d = grid.dim();
    let a: Vec<f64> = (0..d).map(|k| shift[k] as f64 * grid.spacing()[k]).collect();
    let f = ScalarField::from_fn(grid, profile)?;
    let fs = ScalarField::from_fn(grid, |x| {
        let y: Vec<f64> = x.iter().zip(&a).map(|(u, v)| u - v).collect();
        profile(&y)
    })?;
    let base = all_variants(&f)?;
    let moved = all_variants(&fs)?;
    let mut multi = vec![0usize; d];
    let mut out = Vec::new();
    for ((name, mu), (_, mus)) in base.iter().zip(&moved) {
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            grid.unravel(i, &mut multi);
            if !significant(&f, i) || (0..d).any(|k| multi[k] + shift[k] >= grid.shape()[k]) {
                continue;
            }
            let target: Vec<usize> = (0..d).map(|k| multi[k] + shift[k]).collect();
            worst = worst.max(frob_rel(mus.get(grid.ravel(&target)), mu.get(i)));
        }
        out.push((*name, worst));
    }
    Ok(out)
}

/// Worst relative deviation of `mu~^T mu~ (x)` from `A mu^T mu (A x) A` over significant points.
fn scale_defect(mu: &MuField, mus: &MuField, a: &[f64], f: &ScalarField) -> f64 {
    let d = a.len();
    let (g, gs) = (mu.gram(), mus.gram());
    let mut worst = 0.0f64;
    for i in 0..f.grid().len() {
        if !significant(f, i) {
            continue;
        }
        let m = g.get(i);
        let expected: Vec<f64> = (0..d * d).map(|k| a[k / d] * m[k] * a[k % d]).collect();
        worst = worst.max(frob_rel(gs.get(i), &expected));
    }
    worst
}

/// `f` on `grid` and `f(A .)` on the grid scaled by `A^-1`, at matching nodes.
fn scaled_pair(grid: &Grid, a: &[f64], shape: impl Fn(&[f64]) -> f64) -> Result<(ScalarField, ScalarField)> {
    let f = ScalarField::from_fn(grid, &shape)?;
    let sgrid = grid.scaled_by_inverse(a)?;
    let fs = ScalarField::from_fn(&sgrid, |x| {
        let y: Vec<f64> = x.iter().zip(a).map(|(u, v)| u * v).collect();
        shape(&y)
    })?;
    Ok((f, fs))
}

fn gauss(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `|mu(center) - mu_single(center)|` for variants d and e.
fn locality_residuals(t: f64) -> Result<(f64, f64)> {
    let grid = make_grid(1, &[-16.0], &[16.0], &[641])?;
    let center = grid.len() / 2;
    let single = ScalarField::from_fn(&grid, |x| gauss(x[0], 1.0))?;
    let f = ScalarField::from_fn(&grid, |x| gauss(x[0], 1.0) + gauss(x[0] - t, 0.25) + gauss(x[0] + t, 0.25))?;
    let opts = FixedPointOptions::default();
    let d1 = mu_adaptive_fixed_point(&single, &opts)?.0.get(center)[0];
    let d = mu_adaptive_fixed_point(&f, &opts)?.0.get(center)[0];
    let e1 = mu_wigner(&single, 1e-12)?.get(center)[0];
    let e = mu_wigner(&f, 1e-12)?.get(center)[0];
    Ok(((d - d1).abs(), (e - e1).abs()))
}

pub fn axioms(_: &Context) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let cases = [
        ("1d", make_grid(1, &[-14.0], &[14.0], &[281])?, vec![17usize]),
        ("2d", make_grid(2, &[-12.0, -16.0], &[12.0, 16.0], &[49, 65])?, vec![3, 4]),
    ];
    for (tag, grid, shift) in &cases {
        for (name, err) in shift_errors(grid, shift)? {
            out.push(Check::residual(format!("axioms.a1.{tag}.{name}"), err, 1e-8));
        }
    }

    let grid = make_grid(2, &[-9.0, -11.0], &[9.0, 11.0], &[37, 45])?;
    let f = ScalarField::from_fn(&grid, profile)?;
    let base = all_variants(&f)?;
    let mut worst = [0.0f64; 5];
    for alpha in [-2.0, 0.5, 10.0] {
        let scaled = all_variants(&f.scaled(alpha))?;
        for (k, ((_, mu), (_, mus))) in base.iter().zip(&scaled).enumerate() {
            for i in 0..grid.len() {
                worst[k] = worst[k].max(frob_rel(mus.get(i), mu.get(i)));
            }
        }
    }
    for (k, (name, _)) in base.iter().enumerate() {
        out.push(Check::residual(format!("axioms.a2.{name}"), worst[k], 1e-8));
    }

    let cases: Vec<(&str, Grid, Vec<f64>)> = vec![
        ("1d", make_grid(1, &[-12.0], &[12.0], &[241])?, vec![2.0]),
        ("2d", make_grid(2, &[-9.0, -11.0], &[9.0, 11.0], &[37, 45])?, vec![2.0, 0.5]),
    ];
    for (tag, grid, a) in cases {
        let (f, fs) = scaled_pair(&grid, &a, profile)?;
        let d = mu_adaptive_fixed_point(&f, &fixed_sweeps())?.0;
        let ds = mu_adaptive_fixed_point(&fs, &fixed_sweeps())?.0;
        out.push(Check::residual(format!("axioms.a3.{tag}.d"), scale_defect(&d, &ds, &a, &f), 1e-5));
        let e = mu_wigner(&f, 1e-12)?;
        let es = mu_wigner(&fs, 1e-12)?;
        out.push(Check::residual(format!("axioms.a3.{tag}.e"), scale_defect(&e, &es, &a, &f), 1e-5));
    }

    let grid = make_grid(1, &[-12.0], &[12.0], &[241])?;
    let a = [6.0];
    let (f, fs) = scaled_pair(&grid, &a, |x| (-x[0] * x[0] / 2.0).exp())?;
    let q = SpdMatrix::identity(1);
    let defect = scale_defect(&mu_windowed(&f, &q)?, &mu_windowed(&fs, &q)?, &a, &f);
    out.push(Check::at_least("axioms.a3.c_violated_at_6", defect, 0.1));

    let r: Vec<(f64, f64)> = [2.0, 4.0, 8.0].iter().map(|&t| locality_residuals(t)).collect::<Result<_>>()?;
    let gap = (r[0].0 - r[1].0).min(r[1].0 - r[2].0);
    out.push(Check::at_least("axioms.a4.d_residual_decrease", gap, f64::MIN_POSITIVE));
    out.push(Check::at_least("axioms.a4.e_over_d_at_t8", r[2].1 / r[2].0, 5.0));
    Ok(out)
}

pub fn theorem(_: &Context) -> Result<Vec<Check>> {
    let g = GaussianKernel::new(1, 0.4)?;
    let grid = make_grid(1, &[-12.0], &[12.0], &[241])?;
    let shape = |x: &[f64]| (-x[0] * x[0] / 2.0).exp() * (1.0 + 0.3 * (2.0 * x[0]).cos());
    let opts = fixed_sweeps();
    let conv_auto = |f: &ScalarField| -> Result<ScalarField> {
        let mu = mu_adaptive_fixed_point(f, &opts)?.0;
        adaptive_conv(f, &g, &mu, 1.0)
    };
    let f = ScalarField::from_fn(&grid, shape)?;
    let base = conv_auto(&f)?;
    let peak = base.max_abs();

    let s = 13usize;
    let a = s as f64 * grid.spacing()[0];
    let fs = ScalarField::from_fn(&grid, |x| shape(&[x[0] - a]))?;
    let out = conv_auto(&fs)?;
    let shift = (0..grid.len() - s).map(|i| (out.values()[i + s] - base.values()[i]).abs()).fold(0.0, f64::max);

    let out = conv_auto(&f.scaled(-3.0))?;
    let mult = out.values().iter().zip(base.values()).map(|(u, v)| (u + 3.0 * v).abs()).fold(0.0, f64::max);

    let (_, fa) = scaled_pair(&grid, &[2.0], shape)?;
    let out = conv_auto(&fa)?;
    let scale = out.values().iter().zip(base.values()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);

    Ok(vec![
        Check::residual("theorem.shift", shift / peak, 1e-4),
        Check::residual("theorem.multiply", mult / peak, 1e-4),
        Check::residual("theorem.scale", scale / peak, 1e-4),
    ])
}

pub fn fixed_point(_: &Context) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cases = [
        ("1d", make_grid(1, &[-9.0], &[9.0], &[361])?, vec![1.0]),
        ("2d", make_grid(2, &[-8.0, -15.0], &[8.0, 15.0], &[41, 61])?, vec![1.0, 4.0]),
    ];
    for (tag, grid, var) in cases {
        let f = gaussian_field(&grid, &vec![0.0; var.len()], &SpdMatrix::from_diagonal(&var)?)?;
        let opts = FixedPointOptions::default();
        let (mu, rep) = mu_adaptive_fixed_point(&f, &opts)?;
        out.push(Check::residual(format!("fixedpoint.{tag}.iterations"), rep.iterations as f64, 30.0));
        out.push(Check::residual(format!("fixedpoint.{tag}.final_residual"), rep.final_residual, opts.tol));
        let again = fixed_point_map(&f, &mu, opts.lambda)?;
        out.push(Check::residual(format!("fixedpoint.{tag}.map_residual"), max_relative_change(&again, &mu), opts.tol));
    }
    Ok(out)
}

pub fn differing(_: &Context) -> Result<Vec<Check>> {
    let spec = ScenarioSpec::defaults(Scenario::Smooth1d);
    let outcome = smooth1d::run(&spec).map_err(|e| adaptconv::Error::InvalidParameter(e.to_string()))?;
    Ok(outcome
        .report
        .checks
        .into_iter()
        .filter(|c| c.name.contains("manual_mu") || c.name.contains("plateau_ratio"))
        .map(|mut c| {
            c.name = c.name.replacen("smooth1d", "differing", 1);
            c
        })
        .collect())
}
