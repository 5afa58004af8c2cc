//! Fourier, windowed Fourier and Wigner transforms of sampled functions.
//!
//! All transforms are Riemann sums of their defining integrals. On the
//! conjugate frequency grid these sums are discrete Fourier transforms and
//! are evaluated with an FFT; arbitrary frequency grids use a direct sum.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{centered_permutation, NdFft};
use crate::grid::{make_grid, Grid, MatrixField, ScalarField};
use crate::spd::{det_slice, inverse_slice, SpdMatrix};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Frequency grid on which the Fourier sum over `grid` is a DFT:
/// `xi_j = 2 pi j / (n spacing)` for `j = -n/2 .. n - 1 - n/2`.
pub fn conjugate_grid(grid: &Grid) -> Grid {
    frequency_grid(grid, 2.0 * PI)
}

/// Frequency grid of the Wigner transform, half the conjugate spacing:
/// lags step by `2 spacing` so that `x +- y/2` stay on the grid.
pub fn wigner_xi_grid(grid: &Grid) -> Grid {
    frequency_grid(grid, PI)
}

fn frequency_grid(grid: &Grid, base: f64) -> Grid {
    let d = grid.dim();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for k in 0..d {
        let n = grid.shape()[k];
        let step = base / (n as f64 * grid.spacing()[k]);
        lo[k] = -((n / 2) as f64) * step;
        hi[k] = lo[k] + (n - 1) as f64 * step;
    }
    make_grid(d, &lo, &hi, grid.shape()).expect("frequency grid inherits a valid shape")
}

/// A Fourier transform sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    x_grid: Grid,
    freq_grid: Grid,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn x_grid(&self) -> &Grid {
        &self.x_grid
    }

    pub fn freq_grid(&self) -> &Grid {
        &self.freq_grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `|Ff|^2` as a field over the frequency grid.
    pub fn power(&self) -> ScalarField {
        ScalarField::new(self.freq_grid.clone(), self.values.iter().map(|c| c.norm_sqr()).collect())
            .expect("power of finite spectrum is finite")
    }

    /// `L^2` norm over the frequency grid (trapezoid rule).
    pub fn l2_norm(&self) -> f64 {
        let w = self.freq_grid.trapezoid_weights();
        w.iter().zip(&self.values).map(|(w, c)| w * c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// A field on the product grid `(x, xi)`; `values[ix * n_xi + jxi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField<T> {
    x_grid: Grid,
    xi_grid: Grid,
    values: Vec<T>,
}

impl<T> PhaseSpaceField<T> {
    pub fn x_grid(&self) -> &Grid {
        &self.x_grid
    }

    pub fn xi_grid(&self) -> &Grid {
        &self.xi_grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, ix: usize) -> &[T] {
        let m = self.xi_grid.len();
        &self.values[ix * m..(ix + 1) * m]
    }

    pub fn get(&self, ix: usize, jxi: usize) -> &T {
        &self.values[ix * self.xi_grid.len() + jxi]
    }
}

impl PhaseSpaceField<Complex64> {
    pub fn norm_sqr(&self) -> PhaseSpaceField<f64> {
        PhaseSpaceField {
            x_grid: self.x_grid.clone(),
            xi_grid: self.xi_grid.clone(),
            values: self.values.iter().map(|c| c.norm_sqr()).collect(),
        }
    }
}

impl PhaseSpaceField<f64> {
    pub fn squared(&self) -> PhaseSpaceField<f64> {
        PhaseSpaceField {
            x_grid: self.x_grid.clone(),
            xi_grid: self.xi_grid.clone(),
            values: self.values.iter().map(|v| v * v).collect(),
        }
    }

    /// `int . dxi` for every x (trapezoid rule over the frequency grid).
    pub fn xi_marginal(&self) -> ScalarField {
        let w = self.xi_grid.trapezoid_weights();
        let vals = (0..self.x_grid.len()).map(|ix| self.row(ix).iter().zip(&w).map(|(v, w)| v * w).sum()).collect();
        ScalarField::new(self.x_grid.clone(), vals).expect("finite marginal")
    }

    /// `int . dx` for every xi (trapezoid rule over the spatial grid).
    pub fn x_marginal(&self) -> ScalarField {
        let w = self.x_grid.trapezoid_weights();
        let m = self.xi_grid.len();
        let mut out = vec![0.0; m];
        for (ix, wx) in w.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(ix)) {
                *o += wx * v;
            }
        }
        ScalarField::new(self.xi_grid.clone(), out).expect("finite marginal")
    }

    /// Mean and covariance in xi of the row at `ix`, read as an unnormalized density.
    pub fn xi_moments(&self, ix: usize) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.xi_grid.dim();
        let w = self.xi_grid.trapezoid_weights();
        let row = self.row(ix);
        let mut xi = vec![0.0; d];
        let mut mass = 0.0;
        let mut first = vec![0.0; d];
        let mut second = DMatrix::zeros(d, d);
        for j in 0..row.len() {
            self.xi_grid.point(j, &mut xi);
            let p = w[j] * row[j];
            mass += p;
            for a in 0..d {
                first[a] += p * xi[a];
                for b in 0..d {
                    second[(a, b)] += p * xi[a] * xi[b];
                }
            }
        }
        let mean: Vec<f64> = first.iter().map(|v| v / mass).collect();
        let mut cov = second / mass;
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] -= mean[a] * mean[b];
            }
        }
        (mean, cov)
    }
}

/// Forward transform `scale * sum_y v(y) e^{-i y.xi}` from a spatial grid to a frequency grid.
pub(crate) struct Forward {
    xi_grid: Grid,
    scale: f64,
    kind: ForwardKind,
}

enum ForwardKind {
    Fft { fft: NdFft, perm: Vec<usize>, phase: Vec<Complex64> },
    Direct { x_shape: Vec<usize>, twiddles: Vec<Vec<Complex64>> },
}

impl Forward {
    /// `prefactor` multiplies the sum in addition to the volume element.
    pub(crate) fn new(x_grid: &Grid, xi_grid: &Grid, prefactor: f64) -> Result<Self> {
        Self::build(x_grid, xi_grid, prefactor, true)
    }

    fn build(x_grid: &Grid, xi_grid: &Grid, prefactor: f64, allow_fft: bool) -> Result<Self> {
        let d = x_grid.dim();
        if xi_grid.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: xi_grid.dim() });
        }
        let scale = prefactor * x_grid.cell_volume();
        let kind = if allow_fft && xi_grid.same_as(&conjugate_grid(x_grid)) {
            let mut xi = vec![0.0; d];
            let phase = (0..xi_grid.len())
                .map(|j| {
                    xi_grid.point(j, &mut xi);
                    let arg: f64 = (0..d).map(|k| x_grid.lo()[k] * xi[k]).sum();
                    Complex64::from_polar(1.0, -arg)
                })
                .collect();
            ForwardKind::Fft {
                fft: NdFft::new(x_grid.shape(), false),
                perm: centered_permutation(x_grid.shape()),
                phase,
            }
        } else {
            let twiddles = (0..d)
                .map(|k| {
                    let xs = x_grid.axis_coords(k);
                    let xis = xi_grid.axis_coords(k);
                    let mut t = Vec::with_capacity(xs.len() * xis.len());
                    for &w in &xis {
                        for &x in &xs {
                            t.push(Complex64::from_polar(1.0, -x * w));
                        }
                    }
                    t
                })
                .collect();
            ForwardKind::Direct { x_shape: x_grid.shape().to_vec(), twiddles }
        };
        Ok(Forward { xi_grid: xi_grid.clone(), scale, kind })
    }

    pub(crate) fn apply(&self, values: &[f64]) -> Vec<Complex64> {
        match &self.kind {
            ForwardKind::Fft { fft, perm, phase } => {
                let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.process(&mut data);
                perm.iter().zip(phase).map(|(&m, &ph)| data[m] * ph * self.scale).collect()
            }
            ForwardKind::Direct { x_shape, twiddles } => {
                let mut shape = x_shape.clone();
                let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                for (axis, tw) in twiddles.iter().enumerate() {
                    let nx = shape[axis];
                    let nxi = self.xi_grid.shape()[axis];
                    let inner: usize = shape[axis + 1..].iter().product();
                    let outer: usize = shape[..axis].iter().product();
                    let mut next = vec![C0; outer * nxi * inner];
                    for o in 0..outer {
                        for j in 0..nxi {
                            let trow = &tw[j * nx..(j + 1) * nx];
                            for i in 0..inner {
                                let mut acc = C0;
                                for (k, t) in trow.iter().enumerate() {
                                    acc += data[(o * nx + k) * inner + i] * t;
                                }
                                next[(o * nxi + j) * inner + i] = acc;
                            }
                        }
                    }
                    shape[axis] = nxi;
                    data = next;
                }
                data.iter().map(|c| c * self.scale).collect()
            }
        }
    }
}

/// `Ff(xi) = (2 pi)^{-d/2} sum_y f(y) e^{-i y.xi} prod(spacing)` on the conjugate grid.
pub fn fourier(f: &ScalarField) -> Spectrum {
    let grid = f.grid();
    let xi = conjugate_grid(grid);
    let fwd = Forward::new(grid, &xi, (2.0 * PI).powf(-(grid.dim() as f64) / 2.0))
        .expect("conjugate grid has matching dimension");
    Spectrum { x_grid: grid.clone(), freq_grid: xi, values: fwd.apply(f.values()) }
}

/// The same Riemann sum evaluated on an arbitrary frequency grid.
pub fn fourier_on(f: &ScalarField, xi_grid: &Grid) -> Result<Spectrum> {
    let grid = f.grid();
    let fwd = Forward::new(grid, xi_grid, (2.0 * PI).powf(-(grid.dim() as f64) / 2.0))?;
    Ok(Spectrum { x_grid: grid.clone(), freq_grid: xi_grid.clone(), values: fwd.apply(f.values()) })
}

/// Inverse transform onto `target`; the spectrum must live on its conjugate grid.
/// Imaginary parts are dropped.
pub fn inverse_fourier(s: &Spectrum, target: &Grid) -> Result<ScalarField> {
    let xi = conjugate_grid(target);
    if !s.freq_grid.same_as(&xi) {
        return Err(Error::GridMismatch("spectrum is not on the conjugate grid of the target".into()));
    }
    let d = target.dim();
    let perm = centered_permutation(target.shape());
    let mut data = vec![C0; target.len()];
    let mut w = vec![0.0; d];
    for (c, &m) in perm.iter().enumerate() {
        xi.point(c, &mut w);
        let arg: f64 = (0..d).map(|k| target.lo()[k] * w[k]).sum();
        data[m] = s.values[c] * Complex64::from_polar(1.0, arg);
    }
    NdFft::new(target.shape(), true).process(&mut data);
    let scale = (2.0 * PI).powf(-(d as f64) / 2.0) * xi.cell_volume();
    ScalarField::new(target.clone(), data.iter().map(|c| c.re * scale).collect())
}

struct Window {
    precision: Vec<f64>,
    norm: f64,
}

/// Window `G_{Q^2}` from a symmetric positive definite `Q`.
fn window_from_q(q: &[f64], d: usize) -> Option<Window> {
    let qm = DMatrix::from_row_slice(d, d, q);
    let spd = SpdMatrix::new(qm.clone()).ok()?;
    let cov = spd.matrix() * spd.matrix();
    let flat: Vec<f64> = (0..d * d).map(|k| cov[(k / d, k % d)]).collect();
    let det = det_slice(&flat, d);
    let mut precision = vec![0.0; d * d];
    if !(det > 0.0) || !inverse_slice(&flat, d, &mut precision) {
        return None;
    }
    Some(Window { precision, norm: (2.0 * PI).powf(-(d as f64) / 2.0) / det.sqrt() })
}

fn windowed_rows(f: &ScalarField, qfield: &MatrixField, xi_grid: &Grid) -> Result<PhaseSpaceField<Complex64>> {
    let grid = f.grid();
    grid.check_same(qfield.grid(), "window field grid differs from the signal grid")?;
    let d = grid.dim();
    let windows = (0..grid.len())
        .map(|i| window_from_q(qfield.get(i), d).ok_or(Error::NonSpdAt { index: i }))
        .collect::<Result<Vec<_>>>()?;
    let fwd = Forward::new(grid, xi_grid, PI.powf(-(d as f64) / 4.0))?;
    let points = grid.points();
    let fv = f.values();
    let rows: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|ix| {
            let x = &points[ix * d..(ix + 1) * d];
            let w = &windows[ix];
            let mut z = vec![0.0; d];
            let row: Vec<f64> = (0..grid.len())
                .map(|iy| {
                    if fv[iy] == 0.0 {
                        return 0.0;
                    }
                    let y = &points[iy * d..(iy + 1) * d];
                    for k in 0..d {
                        z[k] = x[k] - y[k];
                    }
                    let mut q = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            q += z[a] * w.precision[a * d + b] * z[b];
                        }
                    }
                    fv[iy] * w.norm * (-0.5 * q).exp()
                })
                .collect();
            fwd.apply(&row)
        })
        .collect();
    Ok(PhaseSpaceField { x_grid: grid.clone(), xi_grid: xi_grid.clone(), values: rows.concat() })
}

/// `F_Q f(x, xi) = pi^{-d/4} sum_y f(y) G_{Q^2}(x - y) e^{-i y.xi} prod(spacing)` on the conjugate grid.
pub fn windowed_fourier(f: &ScalarField, q: &SpdMatrix) -> Result<PhaseSpaceField<Complex64>> {
    let grid = f.grid();
    if q.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: q.dim() });
    }
    let qf = MatrixField::constant(grid, q.matrix())?;
    adaptive_windowed_fourier(f, &qf).map_err(|e| match e {
        Error::NonSpdAt { .. } => Error::NonSpdWindow,
        e => e,
    })
}

/// Windowed Fourier transform with a window `G_{Q(x)^2}` that varies with `x`.
pub fn adaptive_windowed_fourier(f: &ScalarField, qfield: &MatrixField) -> Result<PhaseSpaceField<Complex64>> {
    windowed_rows(f, qfield, &conjugate_grid(f.grid()))
}

/// [`adaptive_windowed_fourier`] evaluated on an arbitrary frequency grid.
pub fn adaptive_windowed_fourier_on(
    f: &ScalarField,
    qfield: &MatrixField,
    xi_grid: &Grid,
) -> Result<PhaseSpaceField<Complex64>> {
    windowed_rows(f, qfield, xi_grid)
}

/// Wigner transform `Wf(x, xi) = (2 pi)^{-d} int f(x + y/2) f(x - y/2) e^{i y.xi} dy`
/// on [`wigner_xi_grid`], lags `y = 2 k spacing`.
pub fn wigner(f: &ScalarField) -> Result<PhaseSpaceField<f64>> {
    let grid = f.grid();
    let d = grid.dim();
    let shape = grid.shape().to_vec();
    let n_total = grid.len();
    let xi = wigner_xi_grid(grid);
    let fft = NdFft::new(&shape, true);
    let perm = centered_permutation(&shape);
    let scale = (2.0 * PI).powf(-(d as f64)) * grid.spacing().iter().map(|h| 2.0 * h).product::<f64>();
    let fv = f.values();

    // lag of every DFT bin along each axis
    let lags: Vec<Vec<isize>> = shape
        .iter()
        .map(|&n| (0..n).map(|m| if m < n - n / 2 { m as isize } else { m as isize - n as isize }).collect())
        .collect();

    let rows: Vec<(Vec<f64>, f64, f64)> = (0..n_total)
        .into_par_iter()
        .map(|ix| {
            let mut xi_idx = vec![0usize; d];
            grid.unravel(ix, &mut xi_idx);
            let mut data = vec![C0; n_total];
            let mut mbin = vec![0usize; d];
            let mut plus = vec![0isize; d];
            let mut minus = vec![0isize; d];
            for (flat, slot) in data.iter_mut().enumerate() {
                grid.unravel(flat, &mut mbin);
                for k in 0..d {
                    let lag = lags[k][mbin[k]];
                    plus[k] = xi_idx[k] as isize + lag;
                    minus[k] = xi_idx[k] as isize - lag;
                }
                if let (Some(p), Some(m)) = (grid.ravel_signed(&plus), grid.ravel_signed(&minus)) {
                    *slot = Complex64::new(fv[p] * fv[m], 0.0);
                }
            }
            fft.process(&mut data);
            let mut max_im = 0.0f64;
            let mut max_re = 0.0f64;
            let row: Vec<f64> = perm
                .iter()
                .map(|&m| {
                    let c = data[m] * scale;
                    max_im = max_im.max(c.im.abs());
                    max_re = max_re.max(c.re.abs());
                    c.re
                })
                .collect();
            (row, max_im, max_re)
        })
        .collect();

    let max_im = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    let max_re = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    if max_im > 1e-10 * max_re {
        return Err(Error::NonRealWigner(max_im));
    }
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(PhaseSpaceField { x_grid: grid.clone(), xi_grid: xi, values })
}

/// Smooths a phase-space field along every axis with the normalized Gaussian
/// of variance `var`, by a truncated Riemann sum with zero extension.
pub fn phase_space_smooth(field: &PhaseSpaceField<f64>, var: f64) -> PhaseSpaceField<f64> {
    let mut shape: Vec<usize> = field.x_grid.shape().to_vec();
    shape.extend_from_slice(field.xi_grid.shape());
    let mut spacing: Vec<f64> = field.x_grid.spacing().to_vec();
    spacing.extend_from_slice(field.xi_grid.spacing());
    let dims = shape.len();
    let mut strides = vec![1usize; dims];
    for k in (0..dims - 1).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let total = field.values.len();
    let mut data = field.values.clone();
    let norm = (2.0 * PI * var).powf(-0.5);
    for axis in 0..dims {
        let n = shape[axis];
        let s = strides[axis];
        let h = spacing[axis];
        let reach = (((40.0 * var).sqrt() / h).ceil() as usize).min(n);
        let kern: Vec<f64> = (0..=reach)
            .map(|k| {
                let t = k as f64 * h;
                norm * h * (-0.5 * t * t / var).exp()
            })
            .collect();
        let mut out = vec![0.0; total];
        let block = n * s;
        for outer in (0..total).step_by(block) {
            for inner in 0..s {
                let base = outer + inner;
                for i in 0..n {
                    let lo = i.saturating_sub(reach);
                    let hi = (i + reach).min(n - 1);
                    let mut acc = 0.0;
                    for j in lo..=hi {
                        acc += kern[i.abs_diff(j)] * data[base + j * s];
                    }
                    out[base + i * s] = acc;
                }
            }
        }
        data = out;
    }
    PhaseSpaceField { x_grid: field.x_grid.clone(), xi_grid: field.xi_grid.clone(), values: data }
}

/// Max-norm of `Wf * G - |F_1 f|^2` over the Wigner phase-space grid, where
/// `G = pi^{-d} e^{-(|x|^2 + |xi|^2)}` is the phase-space Gaussian of variance 1/2.
pub fn husimi_check(f: &ScalarField) -> Result<f64> {
    let grid = f.grid();
    if f.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let w = wigner(f)?;
    let smoothed = phase_space_smooth(&w, 0.5);
    let id = MatrixField::constant(grid, &DMatrix::identity(grid.dim(), grid.dim()))?;
    let h = adaptive_windowed_fourier_on(f, &id, w.xi_grid())?.norm_sqr();
    Ok(smoothed.values.iter().zip(&h.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_field, integrate, lp_norm};

    fn gauss1d(lo: f64, hi: f64, n: usize, var: f64) -> ScalarField {
        let g = make_grid(1, &[lo], &[hi], &[n]).unwrap();
        gaussian_field(&g, &[0.0], &SpdMatrix::from_diagonal(&[var]).unwrap()).unwrap()
    }

    #[test]
    fn conjugate_grid_frequencies() {
        let g = make_grid(1, &[0.0], &[3.0], &[4]).unwrap();
        let xi = conjugate_grid(&g);
        let step = 2.0 * PI / 4.0;
        assert!((xi.lo()[0] + 2.0 * step).abs() < 1e-14);
        assert!((xi.spacing()[0] - step).abs() < 1e-14);
    }

    #[test]
    fn gaussian_fourier_pair() {
        let f = gauss1d(-10.0, 10.0, 256, 1.5);
        let s = fourier(&f);
        let mut xi = [0.0];
        for j in 0..s.freq_grid().len() {
            s.freq_grid().point(j, &mut xi);
            let exact = (2.0 * PI).powf(-0.5) * (-1.5 * xi[0] * xi[0] / 2.0).exp();
            assert!((s.values()[j] - Complex64::new(exact, 0.0)).norm() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn fft_and_direct_agree() {
        let g = make_grid(2, &[-3.0, -2.0], &[3.5, 2.5], &[12, 10]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (-(x[0] * x[0]) - 0.5 * x[1] * x[1] + 0.3 * x[0] * x[1]).exp()).unwrap();
        let fast = fourier(&f);
        let fwd = Forward::build(&g, &conjugate_grid(&g), 1.0 / (2.0 * PI), false).unwrap();
        assert!(matches!(fwd.kind, ForwardKind::Direct { .. }));
        let direct = fwd.apply(f.values());
        for (a, b) in fast.values().iter().zip(&direct) {
            assert!((a - b).norm() < 1e-14);
        }
        let shifted = make_grid(2, &[-1.0, -1.0], &[1.0, 1.2], &[12, 10]).unwrap();
        let d = fourier_on(&f, &shifted).unwrap();
        let mut xi = [0.0; 2];
        let mut x = [0.0; 2];
        for j in [0usize, 17, 55, 119] {
            shifted.point(j, &mut xi);
            let mut acc = C0;
            for i in 0..g.len() {
                g.point(i, &mut x);
                acc += f.values()[i] * Complex64::from_polar(1.0, -(x[0] * xi[0] + x[1] * xi[1]));
            }
            acc *= g.cell_volume() / (2.0 * PI);
            assert!((acc - d.values()[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn inversion_and_plancherel() {
        let f = gauss1d(-10.0, 10.0, 256, 1.0);
        let s = fourier(&f);
        let back = inverse_fourier(&s, f.grid()).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((s.l2_norm() - l2).abs() < 1e-8 * l2);

        let other = make_grid(1, &[-9.0], &[10.0], &[256]).unwrap();
        assert!(matches!(inverse_fourier(&s, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn windowed_zero_and_constant_reduction() {
        let g = make_grid(1, &[-5.0], &[5.0], &[32]).unwrap();
        let zero = ScalarField::zeros(&g);
        let w = windowed_fourier(&zero, &SpdMatrix::identity(1)).unwrap();
        assert!(w.values().iter().all(|c| c.norm() == 0.0));

        let f = gauss1d(-5.0, 5.0, 32, 1.0);
        let q = SpdMatrix::from_diagonal(&[0.7]).unwrap();
        let a = windowed_fourier(&f, &q).unwrap();
        let b = adaptive_windowed_fourier(&f, &MatrixField::constant(&g, q.matrix()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adaptive_window_rejects_non_spd() {
        let f = gauss1d(-5.0, 5.0, 16, 1.0);
        let mut vals = vec![1.0; 16];
        vals[5] = -1.0;
        let qf = MatrixField::new(f.grid().clone(), vals).unwrap();
        assert!(matches!(adaptive_windowed_fourier(&f, &qf), Err(Error::NonSpdAt { index: 5 })));
    }

    #[test]
    fn gaussian_wigner_closed_form() {
        let g = make_grid(1, &[-8.0], &[8.0], &[257]).unwrap();
        let f = ScalarField::from_fn(&g, |x| PI.powf(-0.25) * (-0.5 * x[0] * x[0]).exp()).unwrap();
        let w = wigner(&f).unwrap();
        let mut x = [0.0];
        let mut xi = [0.0];
        let mut worst = 0.0f64;
        for ix in 0..g.len() {
            g.point(ix, &mut x);
            if x[0].abs() > 6.0 {
                continue;
            }
            for j in 0..w.xi_grid().len() {
                w.xi_grid().point(j, &mut xi);
                if xi[0].abs() > 6.0 {
                    continue;
                }
                let exact = (-x[0] * x[0] - xi[0] * xi[0]).exp() / PI;
                worst = worst.max((w.get(ix, j) - exact).abs());
            }
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn wigner_marginals_and_evenness() {
        let g = make_grid(1, &[-9.0], &[9.0], &[200]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (-(x[0] - 1.5).powi(2)).exp() + 0.6 * (-(x[0] + 2.0).powi(2) / 1.5).exp())
            .unwrap();
        let w = wigner(&f).unwrap();
        let mx = w.xi_marginal();
        for (a, b) in mx.values().iter().zip(f.values()) {
            assert!((a - b * b).abs() < 1e-6);
        }
        let spec = fourier_on(&f, w.xi_grid()).unwrap();
        let mxi = w.x_marginal();
        for (a, c) in mxi.values().iter().zip(spec.values()) {
            assert!((a - c.norm_sqr()).abs() < 1e-6);
        }
        // evenness in xi: centered index j mirrors to n - j for even n
        let n = w.xi_grid().len();
        for ix in (0..g.len()).step_by(7) {
            for j in 1..n {
                assert!((w.get(ix, j) - w.get(ix, n - j)).abs() < 1e-10);
            }
        }
        assert!((integrate(&mx) - integrate(&f.map(|v| v * v).unwrap())).abs() < 1e-10);
    }

    #[test]
    fn husimi_gaussian() {
        let f = ScalarField::from_fn(&make_grid(1, &[-8.0], &[8.0], &[128]).unwrap(), |x| {
            PI.powf(-0.25) * (-0.5 * x[0] * x[0]).exp()
        })
        .unwrap();
        let r = husimi_check(&f).unwrap();
        assert!(r < 1e-4, "residual {r}");
        assert_eq!(husimi_check(&ScalarField::zeros(f.grid())).unwrap(), 0.0);
    }
}
