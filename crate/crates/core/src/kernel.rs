//! Smoothing kernels `g: R^d -> R`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{first_difference, lp_norm, make_grid, second_difference, Grid, ScalarField};

/// A kernel that can be evaluated anywhere in `R^d`.
pub trait Kernel: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: &[f64]) -> f64;

    /// `eval` is zero, or negligible, for `|z| > support_radius()`.
    fn support_radius(&self) -> f64;

    fn lp_norm(&self, p: f64) -> Result<f64>;
}

/// A kernel with first and second derivatives.
pub trait DifferentiableKernel: Kernel {
    fn gradient(&self, z: &[f64], out: &mut [f64]);

    /// Row-major `d x d` Hessian.
    fn hessian(&self, z: &[f64], out: &mut [f64]);
}

/// Squared Mahalanobis radius beyond which Gaussian weights are dropped.
pub(crate) const GAUSS_R2: f64 = 80.0;

/// The isotropic Gaussian density `G[0, sigma^2 Id]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    dim: usize,
    sigma: f64,
    norm: f64,
}

impl GaussianKernel {
    pub fn new(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel dimension must be positive".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel width {sigma} must be positive")));
        }
        let norm = (2.0 * PI * sigma * sigma).powf(-(dim as f64) / 2.0);
        Ok(GaussianKernel { dim, sigma, norm })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Kernel for GaussianKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        self.norm * (-0.5 * r2 / (self.sigma * self.sigma)).exp()
    }

    fn support_radius(&self) -> f64 {
        GAUSS_R2.sqrt() * self.sigma
    }

    /// `(2 pi sigma^2)^{-d/2} (2 pi sigma^2 / p)^{d / (2p)}`, and the peak value at `p = inf`.
    fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidP(p));
        }
        if p.is_infinite() {
            return Ok(self.norm);
        }
        let s2 = 2.0 * PI * self.sigma * self.sigma;
        let d = self.dim as f64;
        Ok(s2.powf(-d / 2.0) * (s2 / p).powf(d / (2.0 * p)))
    }
}

impl DifferentiableKernel for GaussianKernel {
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let g = self.eval(z);
        let s2 = self.sigma * self.sigma;
        for (o, v) in out.iter_mut().zip(z) {
            *o = -v / s2 * g;
        }
    }

    fn hessian(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let g = self.eval(z);
        let s2 = self.sigma * self.sigma;
        for a in 0..d {
            for b in 0..d {
                let delta = if a == b { 1.0 } else { 0.0 };
                out[a * d + b] = (z[a] * z[b] / (s2 * s2) - delta / s2) * g;
            }
        }
    }
}

/// A kernel sampled on its own grid and read back by multilinear interpolation.
/// Derivatives come from finite differences of the samples.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    values: ScalarField,
    grad: Vec<ScalarField>,
    hess: Vec<ScalarField>,
    radius: f64,
}

impl SampledKernel {
    pub fn new(values: ScalarField) -> Self {
        let grid = values.grid().clone();
        let d = grid.dim();
        let grad: Vec<ScalarField> = (0..d)
            .map(|k| ScalarField::new(grid.clone(), first_difference(values.values(), &grid, k)).expect("finite"))
            .collect();
        let mut hess = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let v = if a == b {
                    second_difference(values.values(), &grid, a)
                } else {
                    let ab = first_difference(grad[b].values(), &grid, a);
                    let ba = first_difference(grad[a].values(), &grid, b);
                    ab.iter().zip(&ba).map(|(x, y)| 0.5 * (x + y)).collect()
                };
                hess.push(ScalarField::new(grid.clone(), v).expect("finite"));
            }
        }
        let radius = (0..d).map(|k| grid.lo()[k].abs().max(grid.hi()[k].abs()).powi(2)).sum::<f64>().sqrt();
        SampledKernel { values, grad, hess, radius }
    }

    /// Samples any kernel on `grid`.
    pub fn from_kernel(kernel: &dyn Kernel, grid: &Grid) -> Result<Self> {
        Ok(Self::new(ScalarField::from_fn(grid, |z| kernel.eval(z))?))
    }

    pub fn field(&self) -> &ScalarField {
        &self.values
    }
}

impl Kernel for SampledKernel {
    fn dim(&self) -> usize {
        self.values.grid().dim()
    }

    fn eval(&self, z: &[f64]) -> f64 {
        self.values.interpolate(z)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.values, p)
    }
}

impl DifferentiableKernel for SampledKernel {
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.grad) {
            *o = g.interpolate(z);
        }
    }

    fn hessian(&self, z: &[f64], out: &mut [f64]) {
        for (o, h) in out.iter_mut().zip(&self.hess) {
            *o = h.interpolate(z);
        }
    }
}

/// A kernel given by a closure with a declared support radius.
pub struct FnKernel<F> {
    dim: usize,
    radius: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnKernel<F> {
    pub fn new(dim: usize, radius: f64, f: F) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter("kernel needs positive dimension and radius".into()));
        }
        Ok(FnKernel { dim, radius, f })
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Kernel for FnKernel<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    /// Trapezoid quadrature over the support cube.
    fn lp_norm(&self, p: f64) -> Result<f64> {
        let n = match self.dim {
            1 => 4001,
            2 => 401,
            _ => 41,
        };
        let r = self.radius;
        let g = make_grid(self.dim, &vec![-r; self.dim], &vec![r; self.dim], &vec![n; self.dim])?;
        lp_norm(&ScalarField::from_fn(&g, |z| (self.f)(z))?, p)
    }
}
