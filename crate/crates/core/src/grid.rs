//! Regular box grids, fields sampled on them, and the basic finite-difference
//! and quadrature operators.
//!
//! Points are `lo[k] + j * spacing[k]` for `j = 0..n[k]` on every axis. Fields
//! are stored row-major with the last axis varying fastest. Any lookup outside
//! the box returns zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A tensor-product grid on the box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

/// Builds a grid with `n[k]` points on `[lo[k], hi[k]]` along each of the `dim` axes.
pub fn make_grid(dim: usize, lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Grid> {
    if dim == 0 {
        return Err(Error::InvalidParameter("grid dimension must be positive".into()));
    }
    for len in [lo.len(), hi.len(), n.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: len });
        }
    }
    for axis in 0..dim {
        if !(lo[axis].is_finite() && hi[axis].is_finite()) || lo[axis] >= hi[axis] {
            return Err(Error::InvalidBounds { axis, lo: lo[axis], hi: hi[axis] });
        }
        if n[axis] < 4 {
            return Err(Error::TooFewPoints { axis, n: n[axis] });
        }
    }
    let spacing: Vec<f64> = (0..dim).map(|k| (hi[k] - lo[k]) / (n[k] - 1) as f64).collect();
    let mut strides = vec![1usize; dim];
    for k in (0..dim.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * n[k + 1];
    }
    Ok(Grid { lo: lo.to_vec(), hi: hi.to_vec(), n: n.to_vec(), spacing, strides })
}

impl Grid {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        make_grid(lo.len(), lo, hi, n)
    }

    /// Same bounds and point count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        make_grid(dim, &vec![lo; dim], &vec![hi; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product of the spacings, the volume element of Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        self.lo[axis] + j as f64 * self.spacing[axis]
    }

    #[inline]
    pub fn unravel(&self, idx: usize, out: &mut [usize]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (idx / self.strides[k]) % self.n[k];
        }
    }

    #[inline]
    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Flat index of a possibly out-of-range multi-index, `None` outside the box.
    #[inline]
    pub fn ravel_signed(&self, multi: &[isize]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..multi.len() {
            let i = multi[k];
            if i < 0 || i as usize >= self.n[k] {
                return None;
            }
            idx += i as usize * self.strides[k];
        }
        Some(idx)
    }

    /// Coordinates of the point with flat index `idx`.
    #[inline]
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let j = (idx / self.strides[k]) % self.n[k];
            *o = self.coord(k, j);
        }
    }

    /// All point coordinates, `len() * dim()` values.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        for (idx, chunk) in out.chunks_mut(d).enumerate() {
            self.point(idx, chunk);
        }
        out
    }

    /// Coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|j| self.coord(axis, j)).collect()
    }

    /// Grids agree in shape, origin and spacing up to rounding.
    pub fn same_as(&self, other: &Grid) -> bool {
        if self.n != other.n {
            return false;
        }
        (0..self.dim()).all(|k| {
            let scale = self.spacing[k].abs().max(self.lo[k].abs()).max(1e-300);
            (self.lo[k] - other.lo[k]).abs() <= 1e-10 * scale
                && (self.spacing[k] - other.spacing[k]).abs() <= 1e-10 * self.spacing[k]
        })
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }

    /// The grid whose points are the points of `self` divided axis-wise by
    /// `factors`, i.e. the natural grid for `x -> f(A x)` with `A = diag(factors)`.
    pub fn scaled_by_inverse(&self, factors: &[f64]) -> Result<Grid> {
        let d = self.dim();
        if factors.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: factors.len() });
        }
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        for k in 0..d {
            let a = factors[k];
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::InvalidParameter(format!("scale factor {a} must be positive")));
            }
            lo[k] = self.lo[k] / a;
            hi[k] = self.hi[k] / a;
        }
        make_grid(d, &lo, &hi, &self.n)
    }

    /// Tensor-product trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let d = self.dim();
        let axis_w: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let mut w = vec![self.spacing[k]; self.n[k]];
                w[0] *= 0.5;
                w[self.n[k] - 1] *= 0.5;
                w
            })
            .collect();
        let mut multi = vec![0usize; d];
        (0..self.len())
            .map(|idx| {
                self.unravel(idx, &mut multi);
                (0..d).map(|k| axis_w[k][multi[k]]).product()
            })
            .collect()
    }

    /// Whether the point is strictly inside the box on every axis (not on a face).
    pub fn is_interior(&self, idx: usize) -> bool {
        (0..self.dim()).all(|k| {
            let j = (idx / self.strides[k]) % self.n[k];
            j > 0 && j + 1 < self.n[k]
        })
    }

    /// Whether the point is at least `margin` points away from every face.
    pub fn is_inside_margin(&self, idx: usize, margin: usize) -> bool {
        (0..self.dim()).all(|k| {
            let j = (idx / self.strides[k]) % self.n[k];
            j >= margin && j + margin < self.n[k]
        })
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// A real function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(&values, "scalar field")?;
        Ok(ScalarField { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let mut x = vec![0.0; d];
        let values = (0..grid.len())
            .map(|idx| {
                grid.point(idx, &mut x);
                f(&x)
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a signed multi-index; zero outside the grid.
    #[inline]
    pub fn at(&self, multi: &[isize]) -> f64 {
        self.grid.ravel_signed(multi).map_or(0.0, |i| self.values[i])
    }

    /// Multilinear interpolation at an arbitrary point; zero outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        debug_assert_eq!(x.len(), d);
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        assert!(d <= 8, "interpolation supports at most 8 dimensions");
        for k in 0..d {
            let t = (x[k] - self.grid.lo[k]) / self.grid.spacing[k];
            let last = (self.grid.n[k] - 1) as f64;
            if !(t >= 0.0 && t <= last) {
                return 0.0;
            }
            let j = (t.floor() as usize).min(self.grid.n[k] - 2);
            base[k] = j;
            frac[k] = t - j as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..d {
                let up = (corner >> k) & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                idx += (base[k] + up) * self.grid.strides[k];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|v| alpha * v).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.grid.check_same(&other.grid, "field addition")?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// An `R^d`-valued field; `d` components per point.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * grid.dim();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        check_finite(&values, "vector field")?;
        Ok(VectorField { grid, values })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let d = grid.dim();
        let mut x = vec![0.0; d];
        let mut values = vec![0.0; grid.len() * d];
        for (idx, out) in values.chunks_mut(d).enumerate() {
            grid.point(idx, &mut x);
            f(&x, out);
        }
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField { grid: grid.clone(), values: vec![0.0; grid.len() * grid.dim()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[idx * d..(idx + 1) * d]
    }

    /// One component as a scalar field.
    pub fn component(&self, k: usize) -> ScalarField {
        let d = self.grid.dim();
        ScalarField { grid: self.grid.clone(), values: self.values.iter().skip(k).step_by(d).copied().collect() }
    }
}

/// A `d x d`-matrix-valued field, stored row-major per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    values: Vec<f64>,
}

impl MatrixField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let d = grid.dim();
        let expected = grid.len() * d * d;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        check_finite(&values, "matrix field")?;
        Ok(MatrixField { grid, values })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let d = grid.dim();
        let mut x = vec![0.0; d];
        let mut values = Vec::with_capacity(grid.len() * d * d);
        for idx in 0..grid.len() {
            grid.point(idx, &mut x);
            let m = f(&x);
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
            }
            for r in 0..d {
                for c in 0..d {
                    values.push(m[(r, c)]);
                }
            }
        }
        Self::new(grid.clone(), values)
    }

    /// The same matrix at every point.
    pub fn constant(grid: &Grid, m: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(grid, |_| m.clone())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &[f64] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.values[idx * dd..(idx + 1) * dd]
    }

    pub fn matrix(&self, idx: usize) -> DMatrix<f64> {
        let d = self.grid.dim();
        DMatrix::from_row_slice(d, d, self.get(idx))
    }

    /// Entry `(r, c)` of every point as a scalar field.
    pub fn entry(&self, r: usize, c: usize) -> ScalarField {
        let d = self.grid.dim();
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().skip(r * d + c).step_by(d * d).copied().collect(),
        }
    }
}

/// Second-order first derivative along `axis`: central inside, one-sided at the faces.
pub(crate) fn first_difference(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.n[axis];
    let s = grid.strides[axis];
    let inv = 1.0 / (2.0 * grid.spacing[axis]);
    (0..values.len())
        .map(|idx| {
            let i = (idx / s) % n;
            let base = idx - i * s;
            let v = |k: usize| values[base + k * s];
            if i == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) * inv
            } else if i == n - 1 {
                (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) * inv
            } else {
                (v(i + 1) - v(i - 1)) * inv
            }
        })
        .collect()
}

/// Second-order second derivative along `axis`.
pub(crate) fn second_difference(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.n[axis];
    let s = grid.strides[axis];
    let inv = 1.0 / (grid.spacing[axis] * grid.spacing[axis]);
    (0..values.len())
        .map(|idx| {
            let i = (idx / s) % n;
            let base = idx - i * s;
            let v = |k: usize| values[base + k * s];
            if i == 0 {
                (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) * inv
            } else if i == n - 1 {
                (2.0 * v(n - 1) - 5.0 * v(n - 2) + 4.0 * v(n - 3) - v(n - 4)) * inv
            } else {
                (v(i + 1) - 2.0 * v(i) + v(i - 1)) * inv
            }
        })
        .collect()
}

/// Finite-difference gradient.
pub fn gradient(field: &ScalarField) -> VectorField {
    let grid = &field.grid;
    let d = grid.dim();
    let parts: Vec<Vec<f64>> = (0..d).map(|k| first_difference(&field.values, grid, k)).collect();
    let mut values = vec![0.0; grid.len() * d];
    for (idx, out) in values.chunks_mut(d).enumerate() {
        for k in 0..d {
            out[k] = parts[k][idx];
        }
    }
    VectorField { grid: grid.clone(), values }
}

/// Finite-difference Hessian, symmetrized as `(H + H^T) / 2`.
pub fn hessian(field: &ScalarField) -> MatrixField {
    let grid = &field.grid;
    let d = grid.dim();
    let first: Vec<Vec<f64>> = (0..d).map(|k| first_difference(&field.values, grid, k)).collect();
    let mut values = vec![0.0; grid.len() * d * d];
    for a in 0..d {
        let diag = second_difference(&field.values, grid, a);
        for idx in 0..grid.len() {
            values[idx * d * d + a * d + a] = diag[idx];
        }
        for b in (a + 1)..d {
            let ab = first_difference(&first[b], grid, a);
            let ba = first_difference(&first[a], grid, b);
            for idx in 0..grid.len() {
                let m = 0.5 * (ab[idx] + ba[idx]);
                values[idx * d * d + a * d + b] = m;
                values[idx * d * d + b * d + a] = m;
            }
        }
    }
    MatrixField { grid: grid.clone(), values }
}

/// Finite-difference divergence of a vector field.
pub fn divergence(field: &VectorField) -> ScalarField {
    let grid = &field.grid;
    let d = grid.dim();
    let mut out = vec![0.0; grid.len()];
    for k in 0..d {
        let comp = field.component(k);
        for (o, v) in out.iter_mut().zip(first_difference(&comp.values, grid, k)) {
            *o += v;
        }
    }
    ScalarField { grid: grid.clone(), values: out }
}

/// Tensor-product trapezoid rule.
pub fn integrate(field: &ScalarField) -> f64 {
    field.grid.trapezoid_weights().iter().zip(&field.values).map(|(w, v)| w * v).sum()
}

/// `L^p` norm by the trapezoid rule; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    lp_norm_values(&field.values, &field.grid, p)
}

pub(crate) fn lp_norm_values(values: &[f64], grid: &Grid, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidP(p));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let w = grid.trapezoid_weights();
    let sum: f64 = if p == 1.0 {
        w.iter().zip(values).map(|(w, v)| w * v.abs()).sum()
    } else if p == 2.0 {
        w.iter().zip(values).map(|(w, v)| w * v * v).sum()
    } else {
        w.iter().zip(values).map(|(w, v)| w * v.abs().powf(p)).sum()
    };
    Ok(if p == 2.0 { sum.sqrt() } else { sum.powf(1.0 / p) })
}

/// Samples the Gaussian density `G[a, Sigma]`.
pub fn gaussian_field(grid: &Grid, mean: &[f64], cov: &crate::spd::SpdMatrix) -> Result<ScalarField> {
    let d = grid.dim();
    if mean.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
    }
    if cov.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: cov.dim() });
    }
    let gauss = crate::spd::Gaussian::new(mean, cov)?;
    ScalarField::from_fn(grid, |x| gauss.density(x))
}
