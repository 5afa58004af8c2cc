//! Generalized, adaptive and appendix-type convolutions.
//!
//! The adaptive convolution of `f` with `g` under the adaptation field `mu` is
//!
//! ```text
//! (f *_mu^p g)(x) = sum_y f(y) |det mu(y)|^{1/p} g(mu(y)(x - y)) prod(spacing)
//! ```
//!
//! with `1/p = 0` at `p = inf`. It is evaluated as a direct gather over the
//! box of `y` that can reach `x`; a constant `mu` may instead use an FFT.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::NdFft;
use crate::grid::{lp_norm_values, make_grid, Grid, MatrixField, ScalarField, VectorField};
use crate::kernel::{DifferentiableKernel, Kernel};
use crate::mu::MuField;
use crate::spd::{det_slice, inverse_slice};

/// Evaluation strategy for [`adaptive_conv_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvPath {
    /// FFT when `mu` is constant, direct otherwise.
    Auto,
    Direct,
    /// Requires a constant `mu`.
    Fft,
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidP(p))
    } else {
        Ok(())
    }
}

/// `|det m|^{1/p}`; exactly one at `p = inf`.
fn det_factor(m: &[f64], d: usize, p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        let det = det_slice(m, d).abs();
        if p == 1.0 {
            det
        } else {
            det.powf(1.0 / p)
        }
    }
}

/// Per-axis half-widths (in grid steps) of the box of `x - y` for which
/// `|mu(y)(x - y)| <= radius` can hold, over the active `y`.
fn reach(mu: &MuField, active: &[bool], radius: f64) -> Result<Vec<isize>> {
    let grid = mu.grid();
    let d = grid.dim();
    let mut inv = vec![0.0; d * d];
    let mut ext = vec![0.0f64; d];
    for i in 0..grid.len() {
        if !active[i] {
            continue;
        }
        if !inverse_slice(mu.get(i), d, &mut inv) || inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMu { index: i });
        }
        for a in 0..d {
            let row: f64 = (0..d).map(|b| inv[a * d + b] * inv[a * d + b]).sum::<f64>().sqrt();
            ext[a] = ext[a].max(radius * row);
        }
    }
    Ok((0..d)
        .map(|a| {
            let e = (ext[a] / grid.spacing()[a]).ceil();
            if e.is_finite() {
                (e as isize).min(grid.shape()[a] as isize)
            } else {
                grid.shape()[a] as isize
            }
        })
        .collect())
}

/// Parallel gather: for every output point `x`, calls `body(y, u, acc)` for
/// every active `y` in the reach box, with `u = mu(y)(x - y)`.
fn gather<B>(mu: &MuField, active: &[bool], ext: &[isize], nout: usize, body: B) -> Vec<f64>
where
    B: Fn(usize, &[f64], &mut [f64]) + Sync,
{
    let grid = mu.grid();
    let d = grid.dim();
    let n = grid.shape();
    let h = grid.spacing();
    let strides = grid.strides();
    let mv = mu.values();
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|ix| {
            let mut acc = vec![0.0; nout];
            let mut xm = vec![0usize; d];
            grid.unravel(ix, &mut xm);
            let lo: Vec<isize> = (0..d).map(|a| (-ext[a]).max(-(xm[a] as isize))).collect();
            let hi: Vec<isize> = (0..d).map(|a| ext[a].min((n[a] - 1 - xm[a]) as isize)).collect();
            if (0..d).any(|a| lo[a] > hi[a]) {
                return acc;
            }
            let mut off = lo.clone();
            let mut z = vec![0.0; d];
            let mut u = vec![0.0; d];
            loop {
                let mut iy = 0usize;
                for a in 0..d {
                    iy += (xm[a] as isize + off[a]) as usize * strides[a];
                }
                if active[iy] {
                    // z = x - y = -off * h
                    for a in 0..d {
                        z[a] = -(off[a] as f64) * h[a];
                    }
                    let m = &mv[iy * d * d..(iy + 1) * d * d];
                    for a in 0..d {
                        u[a] = (0..d).map(|b| m[a * d + b] * z[b]).sum();
                    }
                    body(iy, &u, &mut acc);
                }
                let mut k = d;
                let mut done = true;
                while k > 0 {
                    k -= 1;
                    if off[k] < hi[k] {
                        off[k] += 1;
                        done = false;
                        break;
                    }
                    off[k] = lo[k];
                }
                if done {
                    break;
                }
            }
            acc
        })
        .collect();
    rows.concat()
}

fn check_inputs(f: &ScalarField, kdim: usize, mu: &MuField, p: f64) -> Result<()> {
    check_p(p)?;
    f.grid().check_same(mu.grid(), "adaptation field grid differs from the function grid")?;
    if kdim != f.grid().dim() {
        return Err(Error::DimensionMismatch { expected: f.grid().dim(), got: kdim });
    }
    Ok(())
}

fn is_constant(mu: &MuField) -> bool {
    let first = mu.get(0);
    (1..mu.grid().len()).all(|i| mu.get(i) == first)
}

/// The `mu`-adaptive convolution `f *_mu^p g` with automatic path selection.
pub fn adaptive_conv(f: &ScalarField, g: &dyn Kernel, mu: &MuField, p: f64) -> Result<ScalarField> {
    adaptive_conv_with(f, g, mu, p, ConvPath::Auto)
}

pub fn adaptive_conv_with(
    f: &ScalarField,
    g: &dyn Kernel,
    mu: &MuField,
    p: f64,
    path: ConvPath,
) -> Result<ScalarField> {
    check_inputs(f, g.dim(), mu, p)?;
    let constant = is_constant(mu);
    match path {
        ConvPath::Fft if !constant => Err(Error::InvalidParameter("the FFT path needs a spatially constant mu".into())),
        ConvPath::Fft => conv_fft(f, g, mu.get(0), p),
        ConvPath::Auto if constant => conv_fft(f, g, mu.get(0), p),
        _ => conv_direct(f, g, mu, p),
    }
}

fn conv_direct(f: &ScalarField, g: &dyn Kernel, mu: &MuField, p: f64) -> Result<ScalarField> {
    let grid = f.grid();
    let d = grid.dim();
    let vol = grid.cell_volume();
    let fv = f.values();
    let active: Vec<bool> = fv.iter().map(|&v| v != 0.0).collect();
    let radius = g.support_radius();
    let ext = reach(mu, &active, radius)?;
    let coef: Vec<f64> =
        (0..grid.len()).map(|i| if active[i] { fv[i] * det_factor(mu.get(i), d, p) * vol } else { 0.0 }).collect();
    let r2 = radius * radius;
    let out = gather(mu, &active, &ext, 1, |iy, u, acc| {
        if u.iter().map(|v| v * v).sum::<f64>() <= r2 {
            acc[0] += coef[iy] * g.eval(u);
        }
    });
    ScalarField::new(grid.clone(), out)
}

/// Linear convolution of `f` with kernel samples on the difference lattice, via FFT.
fn conv_fft(f: &ScalarField, g: &dyn Kernel, m: &[f64], p: f64) -> Result<ScalarField> {
    let grid = f.grid();
    let d = grid.dim();
    let n = grid.shape();
    let h = grid.spacing();
    let shape: Vec<usize> = n.iter().map(|&k| 2 * k - 1).collect();
    let total: usize = shape.iter().product();
    let pad = make_grid(d, &vec![0.0; d], &vec![1.0; d], &shape)?;
    let fac = det_factor(m, d, p);
    let r2 = g.support_radius().powi(2);
    let mut kdata = vec![Complex64::new(0.0, 0.0); total];
    let mut fdata = vec![Complex64::new(0.0, 0.0); total];
    let mut multi = vec![0usize; d];
    let mut z = vec![0.0; d];
    let mut u = vec![0.0; d];
    for (idx, slot) in kdata.iter_mut().enumerate() {
        pad.unravel(idx, &mut multi);
        for a in 0..d {
            // circular index -> offset in -(n-1) ..= n-1
            let k = multi[a] as isize;
            let off = if k < n[a] as isize { k } else { k - shape[a] as isize };
            z[a] = off as f64 * h[a];
        }
        for a in 0..d {
            u[a] = (0..d).map(|b| m[a * d + b] * z[b]).sum();
        }
        if u.iter().map(|v| v * v).sum::<f64>() <= r2 {
            *slot = Complex64::new(fac * g.eval(&u), 0.0);
        }
    }
    let vol = grid.cell_volume();
    for (i, &v) in f.values().iter().enumerate() {
        grid.unravel(i, &mut multi);
        fdata[pad.ravel(&multi)] = Complex64::new(v * vol, 0.0);
    }
    let fwd = NdFft::new(&shape, false);
    fwd.process(&mut kdata);
    fwd.process(&mut fdata);
    for (a, b) in fdata.iter_mut().zip(&kdata) {
        *a *= b;
    }
    NdFft::new(&shape, true).process(&mut fdata);
    let scale = 1.0 / total as f64;
    let out = (0..grid.len())
        .map(|i| {
            grid.unravel(i, &mut multi);
            fdata[pad.ravel(&multi)].re * scale
        })
        .collect();
    ScalarField::new(grid.clone(), out)
}

/// `d^alpha (f *_mu^p g)` for `|alpha|` in `{1, 2}`, from the kernel derivatives:
/// each summand contracts `D^{|alpha|} g(mu(y)(x - y))` with the columns of
/// `mu(y)` selected by the multi-index `alpha` (given as per-axis counts).
pub fn adaptive_conv_derivative(
    f: &ScalarField,
    g: &dyn DifferentiableKernel,
    mu: &MuField,
    p: f64,
    alpha: &[usize],
) -> Result<ScalarField> {
    check_inputs(f, g.dim(), mu, p)?;
    let grid = f.grid();
    let d = grid.dim();
    if alpha.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: alpha.len() });
    }
    let order: usize = alpha.iter().sum();
    if order == 0 || order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let axes: Vec<usize> = (0..d).flat_map(|a| std::iter::repeat(a).take(alpha[a])).collect();
    let vol = grid.cell_volume();
    let fv = f.values();
    let active: Vec<bool> = fv.iter().map(|&v| v != 0.0).collect();
    let radius = g.support_radius();
    let ext = reach(mu, &active, radius)?;
    let coef: Vec<f64> =
        (0..grid.len()).map(|i| if active[i] { fv[i] * det_factor(mu.get(i), d, p) * vol } else { 0.0 }).collect();
    let r2 = radius * radius;
    let mv = mu.values();
    let out = gather(mu, &active, &ext, 1, |iy, u, acc| {
        if u.iter().map(|v| v * v).sum::<f64>() > r2 {
            return;
        }
        let m = &mv[iy * d * d..(iy + 1) * d * d];
        let val = if order == 1 {
            let mut gr = [0.0f64; 8];
            g.gradient(u, &mut gr[..d]);
            let a = axes[0];
            (0..d).map(|k| gr[k] * m[k * d + a]).sum::<f64>()
        } else {
            let mut hs = [0.0f64; 64];
            g.hessian(u, &mut hs[..d * d]);
            let (a, b) = (axes[0], axes[1]);
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += hs[k * d + l] * m[k * d + a] * m[l * d + b];
                }
            }
            s
        };
        acc[0] += coef[iy] * val;
    });
    ScalarField::new(grid.clone(), out)
}

/// `[F *_mu gamma](x) = sum_y F(y) |det mu(y)| gamma(mu(y)(x - y)) prod(spacing)` with
/// `F` matrix-valued and `gamma(z) = z g(z)`.
pub(crate) fn matrix_conv_gamma(weights: &MatrixField, g: &dyn Kernel, mu: &MuField) -> Result<VectorField> {
    let grid = mu.grid();
    grid.check_same(weights.grid(), "matrix weight grid differs from the adaptation grid")?;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let wv = weights.values();
    let active: Vec<bool> = (0..grid.len()).map(|i| weights.get(i).iter().any(|&v| v != 0.0)).collect();
    let radius = g.support_radius();
    let ext = reach(mu, &active, radius)?;
    let fac: Vec<f64> = (0..grid.len()).map(|i| det_factor(mu.get(i), d, 1.0) * vol).collect();
    let r2 = radius * radius;
    let out = gather(mu, &active, &ext, d, |iy, u, acc| {
        if u.iter().map(|v| v * v).sum::<f64>() > r2 {
            return;
        }
        let w = fac[iy] * g.eval(u);
        let fm = &wv[iy * d * d..(iy + 1) * d * d];
        for a in 0..d {
            let s: f64 = (0..d).map(|b| fm[a * d + b] * u[b]).sum();
            acc[a] += w * s;
        }
    });
    VectorField::new(grid.clone(), out)
}

/// Componentwise `j *_mu g` (p = 1) of a vector field.
pub(crate) fn vector_conv(j: &VectorField, g: &dyn Kernel, mu: &MuField) -> Result<VectorField> {
    let grid = mu.grid();
    grid.check_same(j.grid(), "current grid differs from the adaptation grid")?;
    let d = grid.dim();
    let mut out = vec![0.0; grid.len() * d];
    for k in 0..d {
        let comp = adaptive_conv_with(&j.component(k), g, mu, 1.0, ConvPath::Direct)?;
        for (i, v) in comp.values().iter().enumerate() {
            out[i * d + k] = *v;
        }
    }
    VectorField::new(grid.clone(), out)
}

enum KernelStorage {
    Dense(Vec<f64>),
    OnDemand(Box<dyn Fn(usize, usize) -> f64 + Send + Sync>),
}

/// A kernel `G(x, y)` on pairs of grid points, indexed by flat indices.
pub struct KernelField {
    grid: Grid,
    storage: KernelStorage,
    gamma: Option<f64>,
}

impl std::fmt::Debug for KernelField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelField")
            .field("points", &self.grid.len())
            .field("dense", &matches!(self.storage, KernelStorage::Dense(_)))
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl KernelField {
    /// Dense storage, `values[ix * N + iy] = G(x, y)`.
    pub fn dense(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel field"));
        }
        Ok(KernelField { grid: grid.clone(), storage: KernelStorage::Dense(values), gamma: None })
    }

    /// Materializes `G(x, y)` from coordinates.
    pub fn from_fn(grid: &Grid, g: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Result<Self> {
        let n = grid.len();
        let pts = grid.points();
        let d = grid.dim();
        let values: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (ix, iy) = (k / n, k % n);
                g(&pts[ix * d..(ix + 1) * d], &pts[iy * d..(iy + 1) * d])
            })
            .collect();
        Self::dense(grid, values)
    }

    /// Evaluates `G` by flat index on every use.
    pub fn on_demand(grid: &Grid, g: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        KernelField { grid: grid.clone(), storage: KernelStorage::OnDemand(Box::new(g)), gamma: None }
    }

    /// Records a known bound `sup_y ||G(., y)||_p <= gamma`.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        match &self.storage {
            KernelStorage::Dense(v) => v[ix * self.grid.len() + iy],
            KernelStorage::OnDemand(g) => g(ix, iy),
        }
    }

    /// `||G(., y)||_p` for every `y` (trapezoid rule over `x`).
    pub fn column_norms(&self, p: f64) -> Result<Vec<f64>> {
        check_p(p)?;
        let n = self.grid.len();
        (0..n)
            .into_par_iter()
            .map(|iy| {
                let col: Vec<f64> = (0..n).map(|ix| self.get(ix, iy)).collect();
                lp_norm_values(&col, &self.grid, p)
            })
            .collect()
    }

    /// `max_y ||G(., y)||_p`.
    pub fn column_norm_bound(&self, p: f64) -> Result<f64> {
        Ok(self.column_norms(p)?.into_iter().fold(0.0, f64::max))
    }
}

/// `(f *bar G)(x) = sum_y f(y) G(x, y) prod(spacing)`.
pub fn generalized_conv(f: &ScalarField, g: &KernelField) -> Result<ScalarField> {
    let grid = f.grid();
    grid.check_same(&g.grid, "kernel field grid differs from the function grid")?;
    let n = grid.len();
    let vol = grid.cell_volume();
    let fv = f.values();
    let nz: Vec<usize> = (0..n).filter(|&i| fv[i] != 0.0).collect();
    let out = (0..n).into_par_iter().map(|ix| nz.iter().map(|&iy| fv[iy] * g.get(ix, iy)).sum::<f64>() * vol).collect();
    ScalarField::new(grid.clone(), out)
}

const MAX_APPENDIX_POINTS: usize = 512;

fn check_appendix(f: &ScalarField, h: &ScalarField, kdims: &[usize]) -> Result<()> {
    let grid = f.grid();
    if grid.dim() != 1 || kdims.iter().any(|&k| k != 1) {
        return Err(Error::InvalidParameter("types two and three are one-dimensional".into()));
    }
    if grid.len() > MAX_APPENDIX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "types two and three support at most {MAX_APPENDIX_POINTS} points, got {}",
            grid.len()
        )));
    }
    grid.check_same(h.grid(), "map h is sampled on a different grid")
}

/// The type-two kernel `G_p(x, y) = ||g||_p g(h(x) - h(y)) / ||g(h(.) - h(y))||_p`.
pub fn type_two_kernel(f: &ScalarField, g: &dyn Kernel, h: &ScalarField, p: f64) -> Result<KernelField> {
    check_p(p)?;
    check_appendix(f, h, &[g.dim()])?;
    let grid = f.grid();
    let n = grid.len();
    let hv = h.values();
    let gnorm = g.lp_norm(p)?;
    let mut values = vec![0.0; n * n];
    for iy in 0..n {
        let col: Vec<f64> = (0..n).map(|ix| g.eval(&[hv[ix] - hv[iy]])).collect();
        let nu = lp_norm_values(&col, grid, p)?;
        if !(nu > f64::MIN_POSITIVE) || !nu.is_finite() {
            return Err(Error::DegenerateNormalizer(format!("column {iy} has norm {nu:e}")));
        }
        for ix in 0..n {
            values[ix * n + iy] = gnorm * col[ix] / nu;
        }
    }
    Ok(KernelField::dense(grid, values)?.with_gamma(gnorm))
}

/// `f *^p [g | h]`.
pub fn type_two_conv(f: &ScalarField, g: &dyn Kernel, h: &ScalarField, p: f64) -> Result<ScalarField> {
    generalized_conv(f, &type_two_kernel(f, g, h, p)?)
}

/// The type-three kernel
/// `G(x, y) = ||g2||_p int g1(z - h(y)) g2(z - h(x)) / ||g2(z - h(.))||_p dz`,
/// with `z` on `n_z` points covering the range of `h` padded by the kernel supports.
pub fn type_three_kernel(
    f: &ScalarField,
    g1: &dyn Kernel,
    g2: &dyn Kernel,
    h: &ScalarField,
    p: f64,
    n_z: usize,
) -> Result<KernelField> {
    check_p(p)?;
    check_appendix(f, h, &[g1.dim(), g2.dim()])?;
    let grid = f.grid();
    let n = grid.len();
    let hv = h.values();
    let (hmin, hmax) = hv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = g1.support_radius().max(g2.support_radius());
    let zgrid = make_grid(1, &[hmin - pad], &[hmax + pad], &[n_z.max(4)])?;
    let zs = zgrid.axis_coords(0);
    let wz = zgrid.trapezoid_weights();
    let nz = zs.len();
    let gnorm = g2.lp_norm(p)?;
    // A[x, z] = g2(z - h(x)) / nu(z) * w(z), B[y, z] = g1(z - h(y))
    let mut a = DMatrix::zeros(n, nz);
    let mut b = DMatrix::zeros(n, nz);
    for (k, &z) in zs.iter().enumerate() {
        let col: Vec<f64> = (0..n).map(|ix| g2.eval(&[z - hv[ix]])).collect();
        let nu = lp_norm_values(&col, grid, p)?;
        if !(nu > f64::MIN_POSITIVE) || !nu.is_finite() {
            return Err(Error::DegenerateNormalizer(format!("z = {z} has norm {nu:e}")));
        }
        for ix in 0..n {
            a[(ix, k)] = col[ix] / nu * wz[k];
            b[(ix, k)] = g1.eval(&[z - hv[ix]]);
        }
    }
    let kmat = (a * b.transpose()) * gnorm;
    let values: Vec<f64> = (0..n * n).map(|k| kmat[(k / n, k % n)]).collect();
    KernelField::dense(grid, values)
}

/// `f *^p [g1, g2 | h]` with a `z` grid of `4 N` points (at most 2048).
pub fn type_three_conv(
    f: &ScalarField,
    g1: &dyn Kernel,
    g2: &dyn Kernel,
    h: &ScalarField,
    p: f64,
) -> Result<ScalarField> {
    let n_z = (4 * f.grid().len()).min(2048);
    generalized_conv(f, &type_three_kernel(f, g1, g2, h, p, n_z)?)
}
