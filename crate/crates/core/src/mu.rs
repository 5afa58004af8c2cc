//! Adaptation functions `mu_f` computed from a sampled `f`.
//!
//! Five constructions are provided:
//!
//! * [`mu_gradient_baseline`]: regularized `sqrt(grad f grad f^T / f^2)`;
//! * [`mu_global_fourier`]: a constant matrix from the spectral covariance;
//! * [`mu_windowed`]: the covariance of the windowed Fourier transform;
//! * [`mu_adaptive_fixed_point`]: the implicit adaptive-window formula, solved by iteration;
//! * [`mu_wigner`]: the covariance of `|Wf|^2`.
//!
//! All but the first two are built from the matrix `M = grad f grad f^T - f D^2 f`
//! ([`variation_matrix`]) and Gaussian-weighted sums evaluated directly on the grid.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{gradient, hessian, integrate, Grid, MatrixField, ScalarField};
use crate::spd::{clamp_spectrum_slice, inverse_slice, spd_sqrt, sqrt_sym_slice, SpdMatrix};

/// Gaussian weights below `exp(-TRUNCATION / 2)` are dropped.
const TRUNCATION: f64 = 80.0;

/// Which construction produced a [`MuField`], with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Baseline { eps1: f64, eps2: f64 },
    GlobalFourier,
    Windowed { q: SpdMatrix },
    AdaptiveFixedPoint { lambda: f64 },
    Wigner { floor: f64 },
    Custom,
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Baseline { .. } => "a",
            Variant::GlobalFourier => "b",
            Variant::Windowed { .. } => "c",
            Variant::AdaptiveFixedPoint { .. } => "d",
            Variant::Wigner { .. } => "e",
            Variant::Custom => "custom",
        }
    }
}

/// A field of SPD adaptation matrices with per-point repair flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MuField {
    grid: Grid,
    values: Vec<f64>,
    repaired: Vec<bool>,
    variant: Variant,
}

fn check_spd_slice(m: &[f64], d: usize) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match d {
        1 => m[0] > 0.0,
        2 => {
            let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            (m[1] - m[2]).abs() <= 1e-12 * scale && m[0] > 0.0 && m[0] * m[3] - m[1] * m[2] > 0.0
        }
        _ => SpdMatrix::from_row_slice(d, m).is_ok(),
    }
}

impl MuField {
    /// Validates that every value is symmetric positive definite.
    pub fn from_matrix_field(field: &MatrixField, variant: Variant) -> Result<Self> {
        let grid = field.grid().clone();
        let d = grid.dim();
        for i in 0..grid.len() {
            if !check_spd_slice(field.get(i), d) {
                return Err(Error::NonSpdAt { index: i });
            }
        }
        Ok(MuField { repaired: vec![false; grid.len()], values: field.values().to_vec(), grid, variant })
    }

    /// The same matrix at every grid point.
    pub fn constant(grid: &Grid, m: &SpdMatrix, variant: Variant) -> Result<Self> {
        let d = grid.dim();
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
        }
        let row = m.to_row_vec();
        let values = (0..grid.len()).flat_map(|_| row.iter().copied()).collect();
        Ok(MuField { grid: grid.clone(), values, repaired: vec![m.repaired(); grid.len()], variant })
    }

    /// Scalar multiples of the identity, `mu(x) = s(x) Id`.
    pub fn from_scalar_fn(grid: &Grid, mut s: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let mut x = vec![0.0; d];
        let mut values = vec![0.0; grid.len() * d * d];
        for i in 0..grid.len() {
            grid.point(i, &mut x);
            let v = s(&x);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonSpdAt { index: i });
            }
            for k in 0..d {
                values[i * d * d + k * d + k] = v;
            }
        }
        Ok(MuField { grid: grid.clone(), values, repaired: vec![false; grid.len()], variant: Variant::Custom })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
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

    pub fn repaired_mask(&self) -> &[bool] {
        &self.repaired
    }

    pub fn repaired_count(&self) -> usize {
        self.repaired.iter().filter(|&&r| r).count()
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn to_matrix_field(&self) -> MatrixField {
        MatrixField::new(self.grid.clone(), self.values.clone()).expect("mu values are finite")
    }

    /// `mu(x)^T mu(x)` at every point.
    pub fn gram(&self) -> MatrixField {
        let d = self.grid.dim();
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.grid.len() {
            let m = self.get(i);
            for r in 0..d {
                for c in 0..d {
                    out[i * d * d + r * d + c] = (0..d).map(|k| m[k * d + r] * m[k * d + c]).sum();
                }
            }
        }
        MatrixField::new(self.grid.clone(), out).expect("finite gram")
    }
}

/// The matrix `grad f grad f^T - f D^2 f` at every grid point.
///
/// At interior points whose stencil values are nonzero and share the sign of
/// `f(x)` it is evaluated as `-f^2 D^2 ln|f|` with central differences of
/// `ln` of value ratios; this is exact for Gaussians and leaves the result
/// unchanged when `f` is multiplied by a power of two. Elsewhere the gradient
/// and Hessian stencils of [`gradient`] and [`hessian`] are used.
pub fn variation_matrix(f: &ScalarField) -> MatrixField {
    let grid = f.grid();
    let d = grid.dim();
    let n = grid.shape();
    let strides = grid.strides();
    let h = grid.spacing();
    let v = f.values();
    let grad = gradient(f);
    let hess = hessian(f);
    let mut out = vec![0.0; grid.len() * d * d];
    let mut multi = vec![0usize; d];
    for idx in 0..grid.len() {
        grid.unravel(idx, &mut multi);
        let fx = v[idx];
        let o = &mut out[idx * d * d..(idx + 1) * d * d];
        let interior = (0..d).all(|k| multi[k] > 0 && multi[k] + 1 < n[k]);
        let mut done = false;
        if interior && fx != 0.0 {
            let same = |j: usize| v[j] != 0.0 && (v[j] > 0.0) == (fx > 0.0);
            let mut ok = true;
            'outer: for a in 0..d {
                if !same(idx + strides[a]) || !same(idx - strides[a]) {
                    ok = false;
                    break;
                }
                for b in (a + 1)..d {
                    let (sa, sb) = (strides[a], strides[b]);
                    for j in [idx + sa + sb, idx + sa - sb, idx - sa + sb, idx - sa - sb] {
                        if !same(j) {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
            if ok {
                let f2 = fx * fx;
                for a in 0..d {
                    let sa = strides[a];
                    let l = (v[idx + sa] / fx).ln() + (v[idx - sa] / fx).ln();
                    o[a * d + a] = -f2 * l / (h[a] * h[a]);
                    for b in (a + 1)..d {
                        let sb = strides[b];
                        let l = (v[idx + sa + sb] / v[idx + sa - sb]).ln() + (v[idx - sa - sb] / v[idx - sa + sb]).ln();
                        let m = -f2 * l / (4.0 * h[a] * h[b]);
                        o[a * d + b] = m;
                        o[b * d + a] = m;
                    }
                }
                done = true;
            }
        }
        if !done {
            let g = grad.get(idx);
            let hm = hess.get(idx);
            for a in 0..d {
                for b in 0..d {
                    o[a * d + b] = g[a] * g[b] - fx * hm[a * d + b];
                }
            }
            for a in 0..d {
                for b in (a + 1)..d {
                    let s = 0.5 * (o[a * d + b] + o[b * d + a]);
                    o[a * d + b] = s;
                    o[b * d + a] = s;
                }
            }
        }
    }
    MatrixField::new(grid.clone(), out).unwrap_or_else(|_| {
        // non-finite entries can only come from overflow in extreme inputs
        MatrixField::new(grid.clone(), vec![0.0; grid.len() * d * d]).expect("zero field")
    })
}

/// How the regularization constants of [`mu_gradient_baseline_with`] are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsMode {
    /// `eps * max|f|^2`, which keeps the result invariant under `f -> alpha f`.
    RelativeToPeak,
    /// The constants are used as given.
    Absolute,
}

/// `mu(x) = sqrt((grad f grad f^T + eps1 Id) / (f^2 + eps2))` with both
/// constants scaled by `max|f|^2`.
pub fn mu_gradient_baseline(f: &ScalarField, eps1: f64, eps2: f64) -> Result<MuField> {
    mu_gradient_baseline_with(f, eps1, eps2, EpsMode::RelativeToPeak)
}

pub fn mu_gradient_baseline_with(f: &ScalarField, eps1: f64, eps2: f64, mode: EpsMode) -> Result<MuField> {
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::InvalidParameter(format!("eps1 = {eps1}, eps2 = {eps2} must be positive")));
    }
    let grid = f.grid();
    let d = grid.dim();
    let peak2 = match mode {
        EpsMode::RelativeToPeak => {
            let p = f.max_abs();
            if p == 0.0 {
                1.0
            } else {
                p * p
            }
        }
        EpsMode::Absolute => 1.0,
    };
    let (e1, e2) = (eps1 * peak2, eps2 * peak2);
    let grad = gradient(f);
    let v = f.values();
    let results: Vec<(Vec<f64>, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let g = grad.get(i);
            let den = v[i] * v[i] + e2;
            let mut m = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    m[a * d + b] = (g[a] * g[b] + if a == b { e1 } else { 0.0 }) / den;
                }
            }
            let mut out = vec![0.0; d * d];
            let (rep, _) = sqrt_sym_slice(&m, d, &mut out);
            (out, rep)
        })
        .collect();
    Ok(assemble(grid, results, Variant::Baseline { eps1, eps2 }))
}

fn assemble(grid: &Grid, results: Vec<(Vec<f64>, bool)>, variant: Variant) -> MuField {
    let mut values = Vec::with_capacity(grid.len() * grid.dim() * grid.dim());
    let mut repaired = Vec::with_capacity(grid.len());
    for (v, r) in results {
        values.extend(v);
        repaired.push(r);
    }
    MuField { grid: grid.clone(), values, repaired, variant }
}

/// `sqrt(int grad f grad f^T / ||f||_2^2)`, a constant adaptation matrix.
pub fn mu_global_fourier(f: &ScalarField) -> Result<SpdMatrix> {
    let grid = f.grid();
    let d = grid.dim();
    let norm2 = integrate(&f.map(|v| v * v)?);
    if !(norm2 > 0.0) {
        return Err(Error::ZeroFunction);
    }
    let grad = gradient(f);
    let w = grid.trapezoid_weights();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..grid.len() {
        let g = grad.get(i);
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += w[i] * g[a] * g[b];
            }
        }
    }
    m /= norm2;
    let m = (&m + m.transpose()) * 0.5;
    spd_sqrt(&m)
}

/// Weighted sums `(sum_y M(y) w(x - y), sum_y f(y)^2 w(x - y))` with
/// `w(z) = exp(-z^T P z / 2)`, truncated where `z^T P z > TRUNCATION`.
struct RatioSums<'a> {
    grid: &'a Grid,
    f2: Vec<f64>,
    m: &'a [f64],
}

impl<'a> RatioSums<'a> {
    fn new(f: &ScalarField, m: &'a MatrixField) -> Self {
        RatioSums { grid: m.grid(), f2: f.values().iter().map(|v| v * v).collect(), m: m.values() }
    }

    /// Returns `(numerator (d x d, row-major), denominator)` at flat index `idx`.
    fn at(&self, idx: usize, precision: &[f64], num: &mut [f64]) -> f64 {
        let grid = self.grid;
        let d = grid.dim();
        let dd = d * d;
        let n = grid.shape();
        let h = grid.spacing();
        let strides = grid.strides();
        let mut cov = vec![0.0; dd];
        num.iter_mut().for_each(|v| *v = 0.0);
        if !inverse_slice(precision, d, &mut cov) {
            return 0.0;
        }
        let mut center = [0usize; 8];
        let mut lo = [0isize; 8];
        let mut hi = [0isize; 8];
        let mut multi = vec![0usize; d];
        grid.unravel(idx, &mut multi);
        for k in 0..d {
            center[k] = multi[k];
            let ext = (TRUNCATION * cov[k * d + k].max(0.0)).sqrt() / h[k];
            let e = if ext.is_finite() { ext.floor().min(n[k] as f64) as isize } else { n[k] as isize };
            lo[k] = (-(e)).max(-(multi[k] as isize));
            hi[k] = e.min((n[k] - 1 - multi[k]) as isize);
        }
        let mut den = 0.0;
        let mut off = [0isize; 8];
        off[..d].copy_from_slice(&lo[..d]);
        let mut z = [0.0f64; 8];
        loop {
            let mut q = 0.0;
            for a in 0..d {
                z[a] = off[a] as f64 * h[a];
            }
            for a in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    s += precision[a * d + b] * z[b];
                }
                q += z[a] * s;
            }
            if q <= TRUNCATION {
                let mut j = 0usize;
                for a in 0..d {
                    j += (center[a] as isize + off[a]) as usize * strides[a];
                }
                let w = (-0.5 * q).exp();
                den += w * self.f2[j];
                let mj = &self.m[j * dd..(j + 1) * dd];
                for k in 0..dd {
                    num[k] += w * mj[k];
                }
            }
            // odometer over the box, last axis fastest
            let mut k = d;
            loop {
                if k == 0 {
                    return den;
                }
                k -= 1;
                if off[k] < hi[k] {
                    off[k] += 1;
                    break;
                }
                off[k] = lo[k];
            }
        }
    }
}

/// `mu(x) = sqrt(Q^{-2}/2 + [M * K](x) / (2 [f^2 * K](x)))` with `K` the
/// Gaussian of covariance `Q^2 / 2`.
pub fn mu_windowed(f: &ScalarField, q: &SpdMatrix) -> Result<MuField> {
    let grid = f.grid();
    let d = grid.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: q.dim() });
    }
    if f.max_abs() == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let qinv2 = q.inverse().matrix().clone();
    let qinv2 = &qinv2 * &qinv2;
    let base: Vec<f64> = (0..d * d).map(|k| 0.5 * qinv2[(k / d, k % d)]).collect();
    let precision: Vec<f64> = (0..d * d).map(|k| 2.0 * qinv2[(k / d, k % d)]).collect();
    let mut fallback = vec![0.0; d * d];
    sqrt_sym_slice(&base, d, &mut fallback);
    let mm = variation_matrix(f);
    let sums = RatioSums::new(f, &mm);
    let results: Vec<(Vec<f64>, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut num = vec![0.0; d * d];
            let den = sums.at(i, &precision, &mut num);
            if !(den > f64::MIN_POSITIVE) {
                return (fallback.clone(), true);
            }
            let cov: Vec<f64> = (0..d * d).map(|k| base[k] + num[k] / (2.0 * den)).collect();
            let mut out = vec![0.0; d * d];
            let (rep, _) = sqrt_sym_slice(&cov, d, &mut out);
            (out, rep)
        })
        .collect();
    Ok(assemble(grid, results, Variant::Windowed { q: q.clone() }))
}

/// Options for [`mu_adaptive_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `0` is the plain iteration; `delta` mixes in `delta` of the previous iterate.
    pub damping: f64,
    /// Starting field; the constant [`mu_global_fourier`] matrix when `None`.
    pub mu0: Option<MuField>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { lambda: 0.9, tol: 1e-6, max_iter: 100, damping: 0.0, mu0: None }
    }
}

impl FixedPointOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        FixedPointOptions { lambda, ..Default::default() }
    }
}

/// Outcome of a fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// Max over x of the relative Frobenius change in the last step.
    pub final_residual: f64,
    pub converged: bool,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < std::f64::consts::SQRT_2 {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

/// One application of the map
/// `mu -> sqrt(lambda^2 mu^2 / 2 + [M * K_x](x) / (2 [f^2 * K_x](x)))`
/// with `K_x` the Gaussian of covariance `(lambda mu(x))^{-2} / 2`.
/// Points with a vanishing denominator keep their value and are flagged.
pub fn fixed_point_map(f: &ScalarField, mu: &MuField, lambda: f64) -> Result<MuField> {
    check_lambda(lambda)?;
    let mm = variation_matrix(f);
    fixed_point_step(f, &mm, mu, lambda)
}

fn fixed_point_step(f: &ScalarField, mm: &MatrixField, mu: &MuField, lambda: f64) -> Result<MuField> {
    let grid = f.grid();
    grid.check_same(mu.grid(), "mu field grid differs from the function grid")?;
    let d = grid.dim();
    let l2 = lambda * lambda;
    let sums = RatioSums::new(f, mm);
    let results: Vec<(Vec<f64>, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let m = mu.get(i);
            let mut mu2 = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    mu2[a * d + b] = (0..d).map(|k| m[a * d + k] * m[k * d + b]).sum();
                }
            }
            for a in 0..d {
                for b in (a + 1)..d {
                    let s = 0.5 * (mu2[a * d + b] + mu2[b * d + a]);
                    mu2[a * d + b] = s;
                    mu2[b * d + a] = s;
                }
            }
            let precision: Vec<f64> = mu2.iter().map(|v| 2.0 * l2 * v).collect();
            let mut num = vec![0.0; d * d];
            let den = sums.at(i, &precision, &mut num);
            if !(den > f64::MIN_POSITIVE) {
                return (m.to_vec(), true);
            }
            let cov: Vec<f64> = (0..d * d).map(|k| 0.5 * l2 * mu2[k] + num[k] / (2.0 * den)).collect();
            let mut out = vec![0.0; d * d];
            let (rep, _) = sqrt_sym_slice(&cov, d, &mut out);
            (out, rep)
        })
        .collect();
    Ok(assemble(grid, results, Variant::AdaptiveFixedPoint { lambda }))
}

fn frob(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Max over grid points of `|a(x) - b(x)|_F / |b(x)|_F`.
pub fn max_relative_change(a: &MuField, b: &MuField) -> f64 {
    (0..a.grid.len())
        .map(|i| {
            let (x, y) = (a.get(i), b.get(i));
            let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            frob(&diff) / frob(y)
        })
        .fold(0.0, f64::max)
}

/// Solves the implicit adaptive-window equation for `mu` by fixed-point iteration.
/// Non-convergence is reported, not raised.
pub fn mu_adaptive_fixed_point(f: &ScalarField, opts: &FixedPointOptions) -> Result<(MuField, FixedPointReport)> {
    check_lambda(opts.lambda)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {} must be positive", opts.tol)));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidParameter(format!("damping = {} must lie in [0, 1)", opts.damping)));
    }
    let grid = f.grid();
    let mut mu = match &opts.mu0 {
        Some(m0) => {
            grid.check_same(m0.grid(), "initial mu grid differs from the function grid")?;
            m0.clone()
        }
        None => MuField::constant(grid, &mu_global_fourier(f)?, Variant::GlobalFourier)?,
    };
    let mm = variation_matrix(f);
    let mut report =
        FixedPointReport { iterations: 0, final_residual: f64::INFINITY, converged: false, lambda: opts.lambda };
    for it in 1..=opts.max_iter {
        let mut next = fixed_point_step(f, &mm, &mu, opts.lambda)?;
        if opts.damping > 0.0 {
            let dmp = opts.damping;
            for (v, old) in next.values.iter_mut().zip(&mu.values) {
                *v = (1.0 - dmp) * *v + dmp * old;
            }
        }
        let res = max_relative_change(&next, &mu);
        mu = next;
        report.iterations = it;
        report.final_residual = res;
        if res <= opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok((mu, report))
}

/// `mu(x) = sqrt([f^2 * M](2x) / (4 [f^2 * f^2](2x)))`.
///
/// The sums index `2x - y` on the extended grid lattice. Where the denominator
/// is below `floor * max denominator` the point is flagged and the eigenvalues
/// of its covariance are clamped into the eigenvalue range spanned by the
/// unflagged points.
pub fn mu_wigner(f: &ScalarField, floor: f64) -> Result<MuField> {
    if !(floor >= 0.0) {
        return Err(Error::InvalidParameter(format!("floor = {floor} must be nonnegative")));
    }
    let grid = f.grid();
    let d = grid.dim();
    let dd = d * d;
    if f.max_abs() == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let mm = variation_matrix(f);
    let mv = mm.values();
    let f2: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let n = grid.shape().to_vec();
    let strides = grid.strides().to_vec();

    let sums: Vec<(Vec<f64>, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut multi = vec![0usize; d];
            grid.unravel(i, &mut multi);
            // y index k ranges over max(0, 2i - (n-1)) ..= min(n-1, 2i) per axis
            let mut lo = vec![0usize; d];
            let mut hi = vec![0usize; d];
            for a in 0..d {
                let two = 2 * multi[a];
                lo[a] = two.saturating_sub(n[a] - 1);
                hi[a] = two.min(n[a] - 1);
            }
            let mut num = vec![0.0; dd];
            let mut den = 0.0;
            let mut k = lo.clone();
            loop {
                let mut y = 0usize;
                let mut r = 0usize;
                for a in 0..d {
                    y += k[a] * strides[a];
                    r += (2 * multi[a] - k[a]) * strides[a];
                }
                let w = f2[y];
                if w != 0.0 {
                    den += w * f2[r];
                    let mr = &mv[r * dd..(r + 1) * dd];
                    for c in 0..dd {
                        num[c] += w * mr[c];
                    }
                }
                let mut a = d;
                let mut done = true;
                while a > 0 {
                    a -= 1;
                    if k[a] < hi[a] {
                        k[a] += 1;
                        done = false;
                        break;
                    }
                    k[a] = lo[a];
                }
                if done {
                    break;
                }
            }
            (num, den)
        })
        .collect();

    let max_den = sums.iter().fold(0.0f64, |m, s| m.max(s.1));
    let threshold = floor * max_den;
    // clamp levels for flagged points: the spectral range of the healthy covariances
    let (lo_eig, hi_eig) = sums
        .par_iter()
        .filter(|s| s.1 > threshold && s.1 > 0.0)
        .filter_map(|s| {
            let cov = DMatrix::from_fn(d, d, |i, j| 0.5 * (s.0[i * d + j] + s.0[j * d + i]) / (4.0 * s.1));
            let eig = cov.symmetric_eigen().eigenvalues;
            let (lo, hi) = (eig.min(), eig.max());
            (lo.is_finite() && hi.is_finite() && hi > 0.0).then_some((lo, hi))
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let cap = if hi_eig > 0.0 { hi_eig } else { f64::INFINITY };
    let eps = if hi_eig > 0.0 { lo_eig.max(1e-10 * hi_eig) } else { 1e-10 };

    let results: Vec<(Vec<f64>, bool)> = sums
        .par_iter()
        .map(|(num, den)| {
            let mut cov = vec![0.0; dd];
            if *den > 0.0 {
                for c in 0..dd {
                    cov[c] = num[c] / (4.0 * den);
                }
            }
            let flagged = !(*den > threshold) || *den <= 0.0;
            let mut fixed = vec![0.0; dd];
            let changed = if flagged || cov.iter().any(|v| !v.is_finite()) {
                if cov.iter().any(|v| !v.is_finite()) {
                    cov.iter_mut().for_each(|v| *v = 0.0);
                }
                clamp_spectrum_slice(&cov, d, eps, cap, &mut fixed);
                true
            } else {
                fixed.copy_from_slice(&cov);
                false
            };
            let mut out = vec![0.0; dd];
            let (rep, _) = sqrt_sym_slice(&fixed, d, &mut out);
            (out, rep || changed)
        })
        .collect();
    Ok(assemble(grid, results, Variant::Wigner { floor }))
}
