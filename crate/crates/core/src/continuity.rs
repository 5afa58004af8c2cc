//! The continuity equation for adaptively smoothed densities.
//!
//! If `d_t rho + div j = 0`, then `rho_g = rho *_mu g` (p = 1) satisfies
//! `d_t rho_g + div j_g = 0` with
//!
//! ```text
//! j_g = j *_mu g - [mu^-1 (N + rho d_t mu) mu^-1] *_mu gamma,   gamma(z) = z g(z),
//! N_{k,i} = sum_l j_l d_l mu_{k,i}.
//! ```

use crate::conv::{adaptive_conv_with, matrix_conv_gamma, vector_conv, ConvPath};
use crate::error::{Error, Result};
use crate::grid::{divergence, first_difference, MatrixField, ScalarField, VectorField};
use crate::kernel::Kernel;
use crate::mu::MuField;
use crate::spd::{inverse_slice, matmul_slice};

/// The state at one time: density, current, adaptation and its time derivative.
#[derive(Clone, Copy)]
pub struct ContinuityInput<'a> {
    pub rho: &'a ScalarField,
    /// Only used for reporting the input residual.
    pub drho_dt: Option<&'a ScalarField>,
    pub j: &'a VectorField,
    pub mu: &'a MuField,
    pub dmu_dt: &'a MatrixField,
    pub g: &'a dyn Kernel,
}

impl ContinuityInput<'_> {
    fn check(&self) -> Result<()> {
        let grid = self.rho.grid();
        grid.check_same(self.j.grid(), "current grid differs from the density grid")?;
        grid.check_same(self.mu.grid(), "adaptation grid differs from the density grid")?;
        grid.check_same(self.dmu_dt.grid(), "adaptation rate grid differs from the density grid")?;
        if let Some(dr) = self.drho_dt {
            grid.check_same(dr.grid(), "density rate grid differs from the density grid")?;
        }
        if self.g.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: self.g.dim() });
        }
        Ok(())
    }

    /// `max |d_t rho + div j|` over interior points, if `drho_dt` is given.
    pub fn input_residual(&self) -> Option<f64> {
        let dr = self.drho_dt?;
        let div = divergence(self.j);
        let grid = self.rho.grid();
        Some(
            (0..grid.len())
                .filter(|&i| grid.is_interior(i))
                .map(|i| (dr.values()[i] + div.values()[i]).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// `N(x)` with `N_{k,i} = sum_l j_l(x) d_l mu_{k,i}(x)`, derivatives by central differences.
pub fn current_gradient_matrix(j: &VectorField, mu: &MuField) -> Result<MatrixField> {
    let grid = mu.grid();
    grid.check_same(j.grid(), "current grid differs from the adaptation grid")?;
    let d = grid.dim();
    let dd = d * d;
    let mut out = vec![0.0; grid.len() * dd];
    for k in 0..d {
        for i in 0..d {
            let entry: Vec<f64> = mu.values().iter().skip(k * d + i).step_by(dd).copied().collect();
            for l in 0..d {
                let der = first_difference(&entry, grid, l);
                for (p, dv) in der.iter().enumerate() {
                    out[p * dd + k * d + i] += j.get(p)[l] * dv;
                }
            }
        }
    }
    MatrixField::new(grid.clone(), out)
}

/// `rho_g = rho *_mu g` with `p = 1`.
pub fn smoothed_density(inp: &ContinuityInput<'_>) -> Result<ScalarField> {
    inp.check()?;
    adaptive_conv_with(inp.rho, inp.g, inp.mu, 1.0, ConvPath::Direct)
}

/// The current `j_g` of the smoothed density.
pub fn continuity_current(inp: &ContinuityInput<'_>) -> Result<VectorField> {
    inp.check()?;
    let grid = inp.rho.grid();
    let d = grid.dim();
    let dd = d * d;
    let n = current_gradient_matrix(inp.j, inp.mu)?;
    let mut weights = vec![0.0; grid.len() * dd];
    let mut inv = vec![0.0; dd];
    let mut a = vec![0.0; dd];
    let mut tmp = vec![0.0; dd];
    for p in 0..grid.len() {
        if !inverse_slice(inp.mu.get(p), d, &mut inv) {
            return Err(Error::SingularMu { index: p });
        }
        let r = inp.rho.values()[p];
        for (q, (nv, dm)) in a.iter_mut().zip(n.get(p).iter().zip(inp.dmu_dt.get(p))) {
            *q = nv + r * dm;
        }
        matmul_slice(&inv, &a, d, &mut tmp);
        matmul_slice(&tmp, &inv, d, &mut weights[p * dd..(p + 1) * dd]);
    }
    let weights = MatrixField::new(grid.clone(), weights)?;
    let first = vector_conv(inp.j, inp.g, inp.mu)?;
    let second = matrix_conv_gamma(&weights, inp.g, inp.mu)?;
    let values = first.values().iter().zip(second.values()).map(|(a, b)| a - b).collect();
    VectorField::new(grid.clone(), values)
}

/// `max |(rho_g(t+dt) - rho_g(t-dt)) / (2 dt) + div j_g(t)|` over interior points.
pub fn continuity_residual(
    prev: &ContinuityInput<'_>,
    cur: &ContinuityInput<'_>,
    next: &ContinuityInput<'_>,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let grid = cur.rho.grid();
    grid.check_same(prev.rho.grid(), "previous state uses a different grid")?;
    grid.check_same(next.rho.grid(), "next state uses a different grid")?;
    let before = smoothed_density(prev)?;
    let after = smoothed_density(next)?;
    let div = divergence(&continuity_current(cur)?);
    Ok((0..grid.len())
        .filter(|&i| grid.is_interior(i))
        .map(|i| ((after.values()[i] - before.values()[i]) / (2.0 * dt) + div.values()[i]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::kernel::GaussianKernel;
    use crate::mu::Variant;
    use crate::spd::SpdMatrix;

    fn gauss1(x: f64, m: f64, s2: f64) -> f64 {
        (-(x - m).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
    }

    #[test]
    fn static_state_has_no_current() {
        let grid = make_grid(2, &[-4.0, -4.0], &[4.0, 4.0], &[21, 21]).unwrap();
        let rho = ScalarField::from_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let j = VectorField::zeros(&grid);
        let mu = MuField::from_scalar_fn(&grid, |x| 1.0 + 0.2 * x[0].sin()).unwrap();
        let dmu = MatrixField::new(grid.clone(), vec![0.0; grid.len() * 4]).unwrap();
        let g = GaussianKernel::new(2, 0.5).unwrap();
        let inp = ContinuityInput { rho: &rho, drho_dt: None, j: &j, mu: &mu, dmu_dt: &dmu, g: &g };
        let jg = continuity_current(&inp).unwrap();
        assert!(jg.values().iter().all(|&v| v == 0.0));
        assert!(continuity_residual(&inp, &inp, &inp, 0.1).unwrap() <= 1e-10);
    }

    fn translating(n: usize, dt: f64, wobble: bool) -> f64 {
        let grid = make_grid(1, &[-8.0], &[8.0], &[n]).unwrap();
        let g = GaussianKernel::new(1, 0.5).unwrap();
        let v = 0.7;
        let scale = |t: f64| if wobble { 1.0 + 0.1 * t.sin() } else { 1.0 };
        let rate = |t: f64| if wobble { 0.1 * t.cos() } else { 0.0 };
        let state = |t: f64| {
            let rho = ScalarField::from_fn(&grid, |x| gauss1(x[0], v * t, 1.0)).unwrap();
            let j = VectorField::from_fn(&grid, |x, o| o[0] = v * gauss1(x[0], v * t, 1.0)).unwrap();
            let mu = MuField::constant(&grid, &SpdMatrix::scalar(1, scale(t)).unwrap(), Variant::Custom).unwrap();
            let dmu = MatrixField::new(grid.clone(), vec![rate(t); grid.len()]).unwrap();
            (rho, j, mu, dmu)
        };
        let t = 0.4;
        let s = [state(t - dt), state(t), state(t + dt)];
        let inps: Vec<ContinuityInput<'_>> = s
            .iter()
            .map(|(rho, j, mu, dmu)| ContinuityInput { rho, drho_dt: None, j, mu, dmu_dt: dmu, g: &g })
            .collect();
        continuity_residual(&inps[0], &inps[1], &inps[2], dt).unwrap()
    }

    #[test]
    fn translating_gaussian_second_order() {
        for wobble in [false, true] {
            let coarse = translating(81, 0.1, wobble);
            let fine = translating(161, 0.05, wobble);
            let ratio = coarse / fine;
            assert!(ratio > 3.5 && ratio < 4.5, "wobble={wobble} ratio={ratio} ({coarse}, {fine})");
        }
    }

    #[test]
    fn space_constant_scaling_matches_common_convolution_form() {
        let grid = make_grid(2, &[-5.0, -5.0], &[5.0, 5.0], &[31, 31]).unwrap();
        let g = GaussianKernel::new(2, 0.6).unwrap();
        let a = SpdMatrix::from_row_slice(2, &[1.3, 0.2, 0.2, 0.9]).unwrap();
        let da = [0.1, -0.05, -0.05, 0.2];
        let rho = ScalarField::from_fn(&grid, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp()).unwrap();
        let j = VectorField::from_fn(&grid, |x, o| {
            let r = (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp();
            o[0] = 0.3 * r;
            o[1] = -0.2 * r * x[0];
        })
        .unwrap();
        let mu = MuField::constant(&grid, &a, Variant::Custom).unwrap();
        let dmu = MatrixField::new(grid.clone(), da.repeat(grid.len())).unwrap();
        let inp = ContinuityInput { rho: &rho, drho_dt: None, j: &j, mu: &mu, dmu_dt: &dmu, g: &g };
        let jg = continuity_current(&inp).unwrap();

        // j * g_A - [rho A^-1 A' A^-1] * gamma_A by a plain double loop
        let am = a.matrix();
        let ainv = am.clone().try_inverse().unwrap();
        let w = &ainv * nalgebra::DMatrix::from_row_slice(2, 2, &da) * &ainv;
        let det = am.determinant();
        let vol = grid.cell_volume();
        let (mut x, mut y) = ([0.0; 2], [0.0; 2]);
        for ix in 0..grid.len() {
            grid.point(ix, &mut x);
            let mut acc = [0.0; 2];
            for iy in 0..grid.len() {
                grid.point(iy, &mut y);
                let z = nalgebra::Vector2::new(x[0] - y[0], x[1] - y[1]);
                let az = nalgebra::Matrix2::new(am[(0, 0)], am[(0, 1)], am[(1, 0)], am[(1, 1)]) * z;
                let ga = det * g.eval(&[az[0], az[1]]);
                let gamma = nalgebra::Matrix2::new(w[(0, 0)], w[(0, 1)], w[(1, 0)], w[(1, 1)]) * az * ga;
                let jy = j.get(iy);
                let r = rho.values()[iy];
                for k in 0..2 {
                    acc[k] += (jy[k] * ga - r * gamma[k]) * vol;
                }
            }
            for k in 0..2 {
                assert!((acc[k] - jg.get(ix)[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identity_adaptation_gives_plain_smoothed_current() {
        let grid = make_grid(1, &[-5.0], &[5.0], &[51]).unwrap();
        let g = GaussianKernel::new(1, 0.5).unwrap();
        let rho = ScalarField::from_fn(&grid, |x| gauss1(x[0], 0.0, 1.0)).unwrap();
        let j = VectorField::from_fn(&grid, |x, o| o[0] = x[0] * gauss1(x[0], 0.0, 1.0)).unwrap();
        let mu = MuField::from_scalar_fn(&grid, |_| 1.0).unwrap();
        let dmu = MatrixField::new(grid.clone(), vec![0.0; grid.len()]).unwrap();
        let inp = ContinuityInput { rho: &rho, drho_dt: None, j: &j, mu: &mu, dmu_dt: &dmu, g: &g };
        let jg = continuity_current(&inp).unwrap();
        let plain = adaptive_conv_with(&j.component(0), &g, &mu, 1.0, ConvPath::Direct).unwrap();
        assert_eq!(jg.values(), plain.values());
    }
}
