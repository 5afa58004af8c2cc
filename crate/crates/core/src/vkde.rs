//! Variable kernel density estimation with sample-point bandwidths.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::kernel::Kernel;

/// `N` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sample dimension must be positive".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not form a nonempty set of {dim}-dimensional points",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("samples"));
        }
        Ok(SampleSet { dim, points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("sample rows have different lengths".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        SampleSet { dim: self.dim, points: self.points.iter().map(|v| v * s).collect() }
    }
}

/// Inverse bandwidths `m_n` with the clip interval they respect.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthVector {
    m: Vec<f64>,
    clip: (f64, f64),
}

impl BandwidthVector {
    pub fn new(m: Vec<f64>, clip: (f64, f64)) -> Result<Self> {
        let (lo, hi) = clip;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!("clip bounds ({lo}, {hi}) are not an interval in (0, inf]")));
        }
        if let Some(&bad) = m.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveBandwidth(bad));
        }
        if let Some(&out) = m.iter().find(|&&v| v < lo || v > hi) {
            return Err(Error::InvalidParameter(format!("m = {out} lies outside the clip bounds ({lo}, {hi})")));
        }
        Ok(BandwidthVector { m, clip })
    }

    /// No clipping: bounds `(MIN_POSITIVE, inf)`.
    pub fn unclipped(m: Vec<f64>) -> Result<Self> {
        Self::new(m, (f64::MIN_POSITIVE, f64::INFINITY))
    }

    pub fn uniform(n: usize, m: f64) -> Result<Self> {
        Self::unclipped(vec![m; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn clip(&self) -> (f64, f64) {
        self.clip
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn median(&self) -> f64 {
        median(&self.m)
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Silverman's rule of thumb `(4 / ((2d + 1) N))^{1/(d + 4)}`.
pub fn silverman_bandwidth(d: usize, n: usize) -> f64 {
    let (d, n) = (d as f64, n as f64);
    (4.0 / ((2.0 * d + 1.0) * n)).powf(1.0 / (d + 4.0))
}

/// `rho_m(x) = (1/N) sum_n m_n^d K(m_n (x - y_n))`.
pub struct SamplePointEstimator<'a> {
    samples: &'a SampleSet,
    m: Vec<f64>,
    scale: Vec<f64>,
    kernel: &'a dyn Kernel,
}

impl std::fmt::Debug for SamplePointEstimator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplePointEstimator").field("samples", &self.samples.len()).field("m", &self.m).finish()
    }
}

impl SamplePointEstimator<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.samples.dim();
        let radius = self.kernel.support_radius();
        let mut z = [0.0f64; 16];
        let mut acc = 0.0;
        for n in 0..self.samples.len() {
            let y = self.samples.point(n);
            let m = self.m[n];
            let mut r2 = 0.0;
            for a in 0..d {
                z[a] = m * (x[a] - y[a]);
                r2 += z[a] * z[a];
            }
            if r2 <= radius * radius {
                acc += self.scale[n] * self.kernel.eval(&z[..d]);
            }
        }
        acc / self.samples.len() as f64
    }

    /// Values at every sample point.
    pub fn at_samples(&self) -> Vec<f64> {
        (0..self.samples.len()).into_par_iter().map(|n| self.eval(self.samples.point(n))).collect()
    }

    pub fn on_grid(&self, grid: &Grid) -> Result<ScalarField> {
        let d = self.samples.dim();
        if grid.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: grid.dim() });
        }
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = vec![0.0; d];
                grid.point(i, &mut x);
                self.eval(&x)
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn inverse_bandwidths(&self) -> &[f64] {
        &self.m
    }
}

fn check_kernel(samples: &SampleSet, kernel: &dyn Kernel) -> Result<()> {
    if kernel.dim() != samples.dim() || samples.dim() > 16 {
        return Err(Error::DimensionMismatch { expected: samples.dim(), got: kernel.dim() });
    }
    Ok(())
}

/// The sample-point estimator for the inverse bandwidths `m`.
pub fn vkde_sample_point<'a>(
    samples: &'a SampleSet,
    m: &BandwidthVector,
    kernel: &'a dyn Kernel,
) -> Result<SamplePointEstimator<'a>> {
    check_kernel(samples, kernel)?;
    if m.len() != samples.len() {
        return Err(Error::SizeMismatch { samples: samples.len(), bandwidths: m.len() });
    }
    let d = samples.dim() as i32;
    let scale = m.values().iter().map(|v| v.powi(d)).collect();
    Ok(SamplePointEstimator { samples, m: m.values().to_vec(), scale, kernel })
}

/// The fixed-bandwidth estimator `(1 / (N h^d)) sum_n K((x - y_n) / h)`.
pub fn kde_fixed<'a>(samples: &'a SampleSet, kernel: &'a dyn Kernel, h: f64) -> Result<SamplePointEstimator<'a>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::NonPositiveBandwidth(h));
    }
    vkde_sample_point(samples, &BandwidthVector::uniform(samples.len(), 1.0 / h)?, kernel)
}

/// Options of [`vkde_fixed_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct VkdeOptions {
    pub kappa: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Defaults to `(1e-3, 1e3) / silverman_bandwidth(d, N)`.
    pub clip: Option<(f64, f64)>,
    /// Keep every iterate in the report.
    pub record_history: bool,
}

impl VkdeOptions {
    pub fn new(kappa: f64, beta: f64) -> Self {
        VkdeOptions { kappa, beta, tol: 1e-6, max_iter: 200, clip: None, record_history: false }
    }
}

/// Outcome of [`vkde_fixed_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Some `m_n` stayed at a clip bound for 5 consecutive iterations.
    pub clip_warning: bool,
    pub kappa: f64,
    pub beta: f64,
    /// Iterates `m^(0), m^(1), ...` when requested.
    pub history: Vec<Vec<f64>>,
}

const PIN_LIMIT: usize = 5;

fn check_fixed_point_params(kappa: f64, beta: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::NonPositiveKappa(kappa));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    Ok(())
}

/// `clip(kappa rho_m(y_n)^beta)` for every sample.
pub fn vkde_update(
    samples: &SampleSet,
    m: &BandwidthVector,
    kernel: &dyn Kernel,
    kappa: f64,
    beta: f64,
) -> Result<BandwidthVector> {
    check_fixed_point_params(kappa, beta)?;
    let est = vkde_sample_point(samples, m, kernel)?;
    let (lo, hi) = m.clip();
    let next = est.at_samples().into_iter().map(|r| (kappa * r.powf(beta)).clamp(lo, hi)).collect();
    BandwidthVector::new(next, m.clip())
}

/// Iterates `m_n <- clip(kappa rho_m(y_n)^beta)` from `m_n = 1 / silverman_bandwidth(d, N)`
/// until `max_n |m_n' / m_n - 1| <= tol` or `max_iter` steps.
pub fn vkde_fixed_point(
    samples: &SampleSet,
    kernel: &dyn Kernel,
    opts: &VkdeOptions,
) -> Result<(BandwidthVector, BandwidthReport)> {
    check_fixed_point_params(opts.kappa, opts.beta)?;
    check_kernel(samples, kernel)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {} must be positive", opts.tol)));
    }
    let n = samples.len();
    let m0 = 1.0 / silverman_bandwidth(samples.dim(), n);
    let clip = opts.clip.unwrap_or((1e-3 * m0, 1e3 * m0));
    let mut m = BandwidthVector::new(vec![m0.clamp(clip.0, clip.1); n], clip)?;
    let mut report = BandwidthReport {
        iterations: 0,
        final_residual: f64::INFINITY,
        converged: false,
        clip_warning: false,
        kappa: opts.kappa,
        beta: opts.beta,
        history: Vec::new(),
    };
    if opts.record_history {
        report.history.push(m.values().to_vec());
    }
    let mut pinned = vec![0usize; n];
    for it in 1..=opts.max_iter {
        let next = vkde_update(samples, &m, kernel, opts.kappa, opts.beta)?;
        let res = next.values().iter().zip(m.values()).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
        for (c, &v) in pinned.iter_mut().zip(next.values()) {
            if v <= clip.0 || v >= clip.1 {
                *c += 1;
                if *c >= PIN_LIMIT {
                    report.clip_warning = true;
                }
            } else {
                *c = 0;
            }
        }
        m = next;
        if opts.record_history {
            report.history.push(m.values().to_vec());
        }
        report.iterations = it;
        report.final_residual = res;
        if res <= opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok((m, report))
}

/// The `kappa` for which a standard Gaussian pilot density gives the median
/// inverse bandwidth `1 / silverman_bandwidth(d, N)`.
///
/// For `y ~ N(0, Id)` the pilot value `phi(y)` is decreasing in `|y|^2 ~ chi^2_d`,
/// so its median is `phi` at the `chi^2_d` median.
pub fn calibrate_kappa(d: usize, n: usize, beta: f64) -> Result<f64> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter("calibration needs d >= 1 and N >= 1".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let chi = ChiSquared::new(d as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let q = chi.inverse_cdf(0.5);
    let df = d as f64;
    let phi = (2.0 * std::f64::consts::PI).powf(-df / 2.0) * (-q / 2.0).exp();
    Ok(1.0 / (silverman_bandwidth(d, n) * phi.powf(beta)))
}
