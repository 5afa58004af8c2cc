//! Fourier, windowed Fourier and Wigner transforms of a two-frequency signal.

use adaptconv::{fourier, fourier_on, wigner, windowed_fourier, Grid, PhaseSpaceField, ScalarField, SpdMatrix};

use super::Outcome;
use crate::config::ScenarioSpec;
use crate::error::Result;
use crate::output::Table;
use crate::report::{Check, RunReport};

pub fn signal(x: f64) -> f64 {
    (-x * x / 8.0).exp() * ((2.0 * x).cos() + 0.5 * (5.0 * x).cos())
}

fn rel_max_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs())) / scale
}

fn phase_table(ps: &PhaseSpaceField<f64>, value: &str) -> Table {
    let mut t = Table::new(&["x", "xi", value]);
    let (xg, kg) = (ps.x_grid(), ps.xi_grid());
    let (mut x, mut xi) = ([0.0], [0.0]);
    for ix in 0..xg.len() {
        xg.point(ix, &mut x);
        for j in 0..kg.len() {
            kg.point(j, &mut xi);
            t.push(vec![x[0], xi[0], *ps.get(ix, j)]);
        }
    }
    t
}

/// Relative errors of both Wigner marginals against `|f|^2` and `|Ff|^2`.
pub fn marginal_errors(f: &ScalarField) -> Result<(f64, f64)> {
    let w = wigner(f)?;
    let f2: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let ex = rel_max_diff(w.xi_marginal().values(), &f2);
    let spec = fourier_on(f, w.xi_grid())?;
    let power: Vec<f64> = spec.values().iter().map(|c| c.norm_sqr()).collect();
    let exi = rel_max_diff(w.x_marginal().values(), &power);
    Ok((ex, exi))
}

/// Smallest Wigner value of a Gaussian relative to the largest.
pub fn gaussian_wigner_min(grid: &Grid) -> Result<f64> {
    let g = ScalarField::from_fn(grid, |x| (-x[0] * x[0] / 2.0).exp())?;
    let w = wigner(&g)?;
    let max = w.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(w.values().iter().fold(f64::INFINITY, |m, &v| m.min(v)) / max)
}

pub fn run(spec: &ScenarioSpec) -> Result<Outcome> {
    let grid = spec.grid()?;
    let f = ScalarField::from_fn(&grid, |x| signal(x[0]))?;

    let s = fourier(&f);
    let mut spectrum = Table::new(&["xi", "power"]);
    let mut xi = [0.0];
    for (j, c) in s.values().iter().enumerate() {
        s.freq_grid().point(j, &mut xi);
        spectrum.push(vec![xi[0], c.norm_sqr()]);
    }
    let windowed = windowed_fourier(&f, &SpdMatrix::scalar(1, spec.q)?)?.norm_sqr();
    let w = wigner(&f)?;

    let mut report = RunReport::new("phasespace", spec.params());
    let (ex, exi) = marginal_errors(&f)?;
    report.push(Check::residual("phasespace.wigner.x_marginal", ex, 1e-4));
    report.push(Check::residual("phasespace.wigner.xi_marginal", exi, 1e-4));
    report.push(Check::at_least("phasespace.gaussian_wigner.min", gaussian_wigner_min(&grid)?, -1e-9));

    Ok(Outcome {
        report,
        tables: vec![
            ("phasespace_fourier.csv".into(), spectrum),
            ("phasespace_windowed.csv".into(), phase_table(&windowed, "power")),
            ("phasespace_wigner.csv".into(), phase_table(&w, "wigner")),
        ],
    })
}
