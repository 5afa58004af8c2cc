use adaptconv::{
    adaptive_conv, adaptive_conv_derivative, continuity_current, continuity_residual, lp_norm, make_grid,
    type_three_conv, type_three_kernel, type_two_conv, ContinuityInput, GaussianKernel, Grid, Kernel, MatrixField,
    MuField, Result, ScalarField, SpdMatrix, Variant, VectorField,
};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{uniform, Context};
use crate::report::Check;

fn riemann_l1(f: &ScalarField) -> f64 {
    f.values().iter().map(|v| v.abs()).sum::<f64>() * f.grid().cell_volume()
}

fn rotated(grid: &Grid, c: &[f64], singular: impl Fn(&[f64]) -> (f64, f64)) -> Result<MuField> {
    let field = MatrixField::from_fn(grid, |x| {
        let th = c[0] * x[0] + c[1] * x[1];
        let (s1, s2) = singular(x);
        let (cs, sn) = (th.cos(), th.sin());
        let r = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        &r * DMatrix::from_diagonal(&DVector::from_vec(vec![s1, s2])) * r.transpose()
    })?;
    MuField::from_matrix_field(&field, Variant::Custom)
}

/// Singular values in `[smax / 50, smax]`.
fn conditioned_mu_2d(grid: &Grid, c: &[f64], smax: f64) -> Result<MuField> {
    rotated(grid, c, |x| {
        let s2 = smax * (0.55 + 0.45 * (c[3] * x[1]).sin());
        (s2 / (1.0 + 24.5 * (1.0 + (c[2] * x[0]).cos())), s2)
    })
}

fn smooth_mu_2d(grid: &Grid, c: &[f64]) -> Result<MuField> {
    rotated(grid, c, |x| {
        let s1 = 0.6 * (1.0 + 0.5 * (c[2] * x[0]).sin());
        (s1, s1 * (1.0 + 4.0 * (1.0 + (c[3] * x[1]).cos())))
    })
}

fn random_f_2d(grid: &Grid, c: &[f64]) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        (-r2 / 2.0).exp() * (c[2] + (c[3] * x[0]).sin())
    })
}

pub fn young(ctx: &Context) -> Result<Vec<Check>> {
    let mut rng = ctx.rng("young");
    let grid = make_grid(2, &[-6.0, -6.0], &[6.0, 6.0], &[33, 33])?;
    let g = GaussianKernel::new(2, 1.0)?;
    let smax = g.sigma() / (1.6 * grid.spacing()[0]);
    let mut worst = [0.0f64; 3];
    for _ in 0..50 {
        let c = uniform(&mut rng, 8, -1.0, 1.0);
        let mu = conditioned_mu_2d(&grid, &c[4..8], smax)?;
        let f = random_f_2d(&grid, &c[0..4])?;
        for (k, p) in [1.0, 2.0, f64::INFINITY].into_iter().enumerate() {
            let out = adaptive_conv(&f, &g, &mu, p)?;
            worst[k] = worst[k].max(lp_norm(&out, p)? / (riemann_l1(&f) * g.lp_norm(p)?));
        }
    }
    let mut out: Vec<Check> = ["p1", "p2", "pinf"]
        .iter()
        .zip(worst)
        .map(|(tag, r)| Check::residual(format!("young.adaptive.{tag}.max_ratio"), r, 1.01))
        .collect();

    let grid = make_grid(1, &[-5.0], &[5.0], &[101])?;
    let (mut two, mut three, mut sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = uniform(&mut rng, 5, -1.0, 1.0);
        let p = uniform(&mut rng, 1, 1.0, 3.0)[0];
        let f = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 4.0).exp() * (c[0] + (c[1] * 3.0 * x[0]).sin()))?;
        let h = ScalarField::from_fn(&grid, |x| x[0] + 0.3 * c[2] * x[0].powi(3) + c[3])?;
        let g = GaussianKernel::new(1, 0.4 + 0.2 * c[4].abs())?;
        let l1 = riemann_l1(&f);
        two = two.max(lp_norm(&type_two_conv(&f, &g, &h, p)?, p)? / (l1 * g.lp_norm(p)?));
        let t3 = type_three_conv(&f, &g, &g, &h, p)?;
        three = three.max(lp_norm(&t3, p)? / (l1 * g.lp_norm(1.0)? * g.lp_norm(p)?));
        let k = type_three_kernel(&f, &g, &g, &h, p, 400)?;
        for a in 0..grid.len() {
            for b in 0..a {
                let scale = k.get(a, a).abs().max(k.get(b, b).abs());
                if scale > 0.0 {
                    sym = sym.max((k.get(a, b) - k.get(b, a)).abs() / scale);
                }
            }
        }
    }
    out.push(Check::residual("young.type_two.max_ratio", two, 1.0 + 1e-9));
    out.push(Check::residual("young.type_three.max_ratio", three, 1.0 + 1e-9));
    out.push(Check::residual("young.type_three.kernel_symmetry", sym, 1e-10));
    Ok(out)
}

pub fn mass(ctx: &Context) -> Result<Vec<Check>> {
    let mut rng = ctx.rng("mass");
    let grid = make_grid(1, &[-25.0], &[25.0], &[1001])?;
    let g = GaussianKernel::new(1, 0.5)?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let c = uniform(&mut rng, 3, -1.0, 1.0);
        let mu = MuField::from_scalar_fn(&grid, |x| 1.0 + 0.5 * (c[0] * x[0]).sin())?;
        let f =
            ScalarField::from_fn(&grid, |x| (-(x[0] - c[1]).powi(2) / 2.0).exp() * (1.5 + (c[2] * 3.0 * x[0]).cos()))?;
        let out = adaptive_conv(&f, &g, &mu, 1.0)?;
        let (a, b) = (riemann_l1(&out), riemann_l1(&f));
        worst = worst.max((a - b).abs() / b);
    }
    let grid = make_grid(2, &[-14.0, -14.0], &[14.0, 14.0], &[113, 113])?;
    let g2 = GaussianKernel::new(2, 0.6)?;
    let mut worst2 = 0.0f64;
    for _ in 0..5 {
        let c = uniform(&mut rng, 8, -1.0, 1.0);
        let f = random_f_2d(&grid, &c[0..4])?.map(f64::abs)?;
        // kernel widths stay between 1.7 and 4 grid steps
        let mu = rotated(&grid, &c[4..8], |x| (1.0 + 0.4 * (c[6] * x[0]).sin(), 1.0 + 0.4 * (c[7] * x[1]).cos()))?;
        let out = adaptive_conv(&f, &g2, &mu, 1.0)?;
        let (a, b) = (riemann_l1(&out), riemann_l1(&f));
        worst2 = worst2.max((a - b).abs() / b);
    }
    Ok(vec![Check::residual("mass.1d.relative", worst, 1e-8), Check::residual("mass.2d.relative", worst2, 1e-8)])
}

fn derivative_error(n: usize, alpha: &[usize]) -> Result<f64> {
    let d = alpha.len();
    let grid = make_grid(d, &vec![-6.0; d], &vec![6.0; d], &vec![n; d])?;
    let f = ScalarField::from_fn(&grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp() * (1.0 + 0.3 * x[0]))?;
    let mu = if d == 1 {
        MuField::from_scalar_fn(&grid, |x| 1.0 + 0.4 * x[0].sin())?
    } else {
        smooth_mu_2d(&grid, &[0.3, -0.2, 0.7, 0.4])?
    };
    let g = GaussianKernel::new(d, 0.7)?;
    let exact = adaptive_conv_derivative(&f, &g, &mu, 2.0, alpha)?;
    let out = adaptive_conv(&f, &g, &mu, 2.0)?;
    let h = grid.spacing();
    let mut worst = 0.0f64;
    let mut multi = vec![0usize; d];
    for i in 0..grid.len() {
        if !grid.is_inside_margin(i, 2) {
            continue;
        }
        grid.unravel(i, &mut multi);
        let m: Vec<isize> = multi.iter().map(|&v| v as isize).collect();
        let at = |steps: &[(usize, isize)]| {
            let mut q = m.clone();
            for &(axis, s) in steps {
                q[axis] += s;
            }
            out.at(&q)
        };
        let fd = if alpha.iter().sum::<usize>() == 1 {
            let a = alpha.iter().position(|&v| v == 1).unwrap_or(0);
            (at(&[(a, 1)]) - at(&[(a, -1)])) / (2.0 * h[a])
        } else if let Some(a) = alpha.iter().position(|&v| v == 2) {
            (at(&[(a, 1)]) - 2.0 * at(&[]) + at(&[(a, -1)])) / (h[a] * h[a])
        } else {
            (at(&[(0, 1), (1, 1)]) - at(&[(0, 1), (1, -1)]) - at(&[(0, -1), (1, 1)]) + at(&[(0, -1), (1, -1)]))
                / (4.0 * h[0] * h[1])
        };
        worst = worst.max((fd - exact.values()[i]).abs());
    }
    Ok(worst)
}

pub fn derivative(_: &Context) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for alpha in [vec![1], vec![2], vec![1, 1], vec![0, 2]] {
        let n = if alpha.len() == 1 { 121 } else { 31 };
        let coarse = derivative_error(n, &alpha)?;
        let fine = derivative_error(2 * n - 1, &alpha)?;
        let tag: Vec<String> = alpha.iter().map(usize::to_string).collect();
        out.push(Check::at_least(format!("derivative.alpha{}.order", tag.join("")), (coarse / fine).log2(), 1.8));
    }
    Ok(out)
}

fn gauss1(x: f64, m: f64, s2: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
}

/// Residual of the smoothed continuity equation for a translating Gaussian with
/// an adaptation that varies in space and time.
fn translating_residual(n: usize, dt: f64) -> Result<f64> {
    let grid = make_grid(1, &[-8.0], &[8.0], &[n])?;
    let g = GaussianKernel::new(1, 0.5)?;
    let v = 0.7;
    let state = |t: f64| -> Result<(ScalarField, VectorField, MuField, MatrixField)> {
        let rho = ScalarField::from_fn(&grid, |x| gauss1(x[0], v * t, 1.0))?;
        let j = VectorField::from_fn(&grid, |x, o| o[0] = v * gauss1(x[0], v * t, 1.0))?;
        let mu = MuField::from_scalar_fn(&grid, |x| 1.0 + 0.3 * x[0].tanh() * (1.0 + 0.1 * t.sin()))?;
        let dmu = MatrixField::from_fn(&grid, |x| DMatrix::from_element(1, 1, 0.03 * x[0].tanh() * t.cos()))?;
        Ok((rho, j, mu, dmu))
    };
    let t = 0.4;
    let s = [state(t - dt)?, state(t)?, state(t + dt)?];
    let inps: Vec<ContinuityInput<'_>> =
        s.iter().map(|(rho, j, mu, dmu)| ContinuityInput { rho, drho_dt: None, j, mu, dmu_dt: dmu, g: &g }).collect();
    continuity_residual(&inps[0], &inps[1], &inps[2], dt)
}

/// Largest deviation of the smoothed current from a plain double loop for a
/// space-constant adaptation.
fn corollary_defect() -> Result<f64> {
    let grid = make_grid(2, &[-5.0, -5.0], &[5.0, 5.0], &[31, 31])?;
    let g = GaussianKernel::new(2, 0.6)?;
    let a = SpdMatrix::from_row_slice(2, &[1.3, 0.2, 0.2, 0.9])?;
    let da = [0.1, -0.05, -0.05, 0.2];
    let density = |x: &[f64]| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp();
    let rho = ScalarField::from_fn(&grid, density)?;
    let j = VectorField::from_fn(&grid, |x, o| {
        let r = density(x);
        o[0] = 0.3 * r;
        o[1] = -0.2 * r * x[0];
    })?;
    let mu = MuField::constant(&grid, &a, Variant::Custom)?;
    let dmu = MatrixField::new(grid.clone(), da.repeat(grid.len()))?;
    let inp = ContinuityInput { rho: &rho, drho_dt: None, j: &j, mu: &mu, dmu_dt: &dmu, g: &g };
    let jg = continuity_current(&inp)?;

    let am = a.matrix();
    let am2 = Matrix2::new(am[(0, 0)], am[(0, 1)], am[(1, 0)], am[(1, 1)]);
    let ainv = am2.try_inverse().ok_or(adaptconv::Error::SingularMu { index: 0 })?;
    let w = ainv * Matrix2::new(da[0], da[1], da[2], da[3]) * ainv;
    let det = am2.determinant();
    let vol = grid.cell_volume();
    let (mut x, mut y) = ([0.0; 2], [0.0; 2]);
    let mut worst = 0.0f64;
    for ix in 0..grid.len() {
        grid.point(ix, &mut x);
        let mut acc = [0.0; 2];
        for iy in 0..grid.len() {
            grid.point(iy, &mut y);
            let az = am2 * Vector2::new(x[0] - y[0], x[1] - y[1]);
            let ga = det * g.eval(&[az[0], az[1]]);
            let gamma = w * az * ga;
            let (jy, r) = (j.get(iy), rho.values()[iy]);
            for k in 0..2 {
                acc[k] += (jy[k] * ga - r * gamma[k]) * vol;
            }
        }
        for k in 0..2 {
            worst = worst.max((acc[k] - jg.get(ix)[k]).abs());
        }
    }
    Ok(worst)
}

pub fn continuity(_: &Context) -> Result<Vec<Check>> {
    let coarse = translating_residual(81, 0.1)?;
    let fine = translating_residual(161, 0.05)?;
    Ok(vec![
        Check::at_least("continuity.translating.order", (coarse / fine).log2(), 1.8),
        Check::residual("continuity.constant_mu.current_defect", corollary_defect()?, 1e-8),
    ])
}
