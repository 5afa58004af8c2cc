use adaptconv::{
    fourier, husimi_check, inverse_fourier, make_grid, mu_wigner, mu_windowed, wigner, windowed_fourier, Grid, MuField,
    PhaseSpaceField, Result, ScalarField, SpdMatrix,
};

use super::{uniform, Context};
use crate::report::Check;
use crate::scenarios::phasespace::marginal_errors;

fn bumps(grid: &Grid) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| (-x[0] * x[0] / 2.0).exp() * (1.0 + 0.3 * (2.0 * x[0]).cos()))
}

pub fn transforms(ctx: &Context) -> Result<Vec<Check>> {
    let mut rng = ctx.rng("transforms");
    let mut out = Vec::new();

    let grid = make_grid(1, &[-15.0], &[15.0], &[256])?;
    let (mut planch, mut inv) = (0.0f64, 0.0f64);
    for _ in 0..24 {
        let c = uniform(&mut rng, 4, -1.0, 1.0);
        let w = uniform(&mut rng, 1, 0.5, 1.5)[0];
        let f = ScalarField::from_fn(&grid, |x| {
            let e = (-x[0] * x[0] / (2.0 * w * w)).exp();
            e * (c[0] + c[1] * x[0] + c[2] * (1.3 * x[0]).cos() + c[3] * (0.7 * x[0]).sin())
        })?;
        let s = fourier(&f);
        let n2: f64 = f.values().iter().map(|v| v * v).sum::<f64>() * grid.spacing()[0];
        let m2: f64 = s.values().iter().map(|c| c.norm_sqr()).sum::<f64>() * s.freq_grid().spacing()[0];
        planch = planch.max((n2 - m2).abs() / n2);
        let back = inverse_fourier(&s, &grid)?;
        inv = inv.max(back.values().iter().zip(f.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    }
    out.push(Check::residual("transforms.plancherel", planch, 1e-8));
    out.push(Check::residual("transforms.fourier_inversion", inv, 1e-8));

    let f = bumps(&make_grid(1, &[-12.0], &[12.0], &[256])?)?;
    let (ex, exi) = marginal_errors(&f).map_err(|e| adaptconv::Error::InvalidParameter(e.to_string()))?;
    out.push(Check::residual("transforms.wigner.x_marginal", ex, 1e-6));
    out.push(Check::residual("transforms.wigner.xi_marginal", exi, 1e-6));

    let grid = make_grid(1, &[-12.0], &[12.0], &[256])?;
    let gauss = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp())?;
    out.push(Check::residual("transforms.husimi.gaussian", husimi_check(&gauss)?, 1e-4));
    let two =
        ScalarField::from_fn(&grid, |x| (-(x[0] - 3.0).powi(2) / 2.0).exp() + (-(x[0] + 3.0).powi(2) / 2.0).exp())?;
    out.push(Check::residual("transforms.husimi.two_bumps", husimi_check(&two)?, 1e-3));

    let grid = make_grid(1, &[-10.0], &[10.0], &[200])?;
    let shape = |x: f64| (-x * x / 2.0).exp() * (1.0 + 0.5 * x);
    let alpha = 2.0;
    let f = ScalarField::from_fn(&grid, |x| shape(x[0]))?;
    let fs = ScalarField::from_fn(&grid.scaled_by_inverse(&[alpha])?, |x| shape(alpha * x[0]))?;
    let (w, ws) = (wigner(&f)?, wigner(&fs)?);
    let err = w.values().iter().zip(ws.values()).fold(0.0f64, |m, (u, v)| m.max((u / alpha - v).abs()));
    out.push(Check::residual("transforms.wigner_scaling", err, 1e-6));

    let grid = make_grid(2, &[-8.0, -8.0], &[8.0, 8.0], &[64, 64])?;
    let shape = |x: &[f64]| (-(x[0] * x[0] + 0.5 * x[1] * x[1]) / 2.0 + 0.3 * x[0] * x[1] / 2.0).exp();
    let f = ScalarField::from_fn(&grid, shape)?;
    let mut err = 0.0f64;
    for alpha in [2.0, 0.5] {
        let fs =
            ScalarField::from_fn(&grid.scaled_by_inverse(&[alpha, alpha])?, |x| shape(&[alpha * x[0], alpha * x[1]]))?;
        let (a, b) = (fourier(&f), fourier(&fs));
        let s = alpha.powi(-2);
        err = a.values().iter().zip(b.values()).fold(err, |m, (u, v)| m.max((u * s - v).norm()));
    }
    out.push(Check::residual("transforms.fourier_scaling", err, 1e-8));
    Ok(out)
}

/// Worst relative mismatch between `mu^2` and the xi-covariance of `ps` where `|f| >= 1e-3 max |f|`.
fn relative_cov_error(f: &ScalarField, mu: &MuField, ps: &PhaseSpaceField<f64>) -> f64 {
    let peak = f.max_abs();
    (0..f.grid().len())
        .filter(|&i| f.values()[i].abs() >= 1e-3 * peak)
        .map(|i| {
            let (_, c) = ps.xi_moments(i);
            let m = mu.get(i)[0];
            (m * m - c[(0, 0)]).abs() / c[(0, 0)]
        })
        .fold(0.0, f64::max)
}

pub fn covariance(_: &Context) -> Result<Vec<Check>> {
    let grid = make_grid(1, &[-10.0], &[10.0], &[801])?;
    let f = bumps(&grid)?;
    let q = SpdMatrix::scalar(1, 1.0)?;
    let windowed = relative_cov_error(&f, &mu_windowed(&f, &q)?, &windowed_fourier(&f, &q)?.norm_sqr());

    let grid = make_grid(1, &[-10.0], &[10.0], &[401])?;
    let f = bumps(&grid)?;
    let wig = relative_cov_error(&f, &mu_wigner(&f, 1e-12)?, &wigner(&f)?.squared());
    Ok(vec![Check::residual("covariance.windowed", windowed, 1e-4), Check::residual("covariance.wigner", wig, 1e-3)])
}
