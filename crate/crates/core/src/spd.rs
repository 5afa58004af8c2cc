//! Symmetric positive definite matrices, their principal square roots and
//! Gaussian densities.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A symmetric positive definite matrix.
///
/// `repaired` is set when the matrix came out of an eigenvalue clamp
/// (see [`spd_sqrt`] and [`pd_repair`]); `floor` records the clamp value used.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
    repaired: bool,
    floor: Option<f64>,
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum asymmetry `|M_ij - M_ji|`, or an error when it exceeds `1e-12 max(1, |M|)`.
fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let d = m.nrows();
    let mut asym = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * frobenius(m).max(1.0) {
        return Err(Error::NonSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl SpdMatrix {
    /// Validates symmetry and strict positivity of the spectrum.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let m = symmetrized(&m);
        let eig = m.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NonSpdCovariance);
        }
        Ok(SpdMatrix { m, repaired: false, floor: None })
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix { m: DMatrix::identity(d, d), repaired: false, floor: None }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        Self::new(DMatrix::from_fn(d, d, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    /// A scalar multiple of the identity.
    pub fn scalar(d: usize, s: f64) -> Result<Self> {
        Self::from_diagonal(&vec![s; d])
    }

    pub fn from_row_slice(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: values.len() });
        }
        Self::new(DMatrix::from_row_slice(d, d, values))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn repaired(&self) -> bool {
        self.repaired
    }

    /// The eigenvalue floor applied by a repair, if any.
    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    /// Row-major entries.
    pub fn to_row_vec(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.m[(k / d, k % d)]).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn determinant(&self) -> f64 {
        let d = self.dim();
        det_slice(&self.to_row_vec(), d)
    }

    pub fn inverse(&self) -> SpdMatrix {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        inverse_slice(&self.to_row_vec(), d, &mut out);
        SpdMatrix { m: symmetrized(&DMatrix::from_row_slice(d, d, &out)), repaired: false, floor: None }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> SpdMatrix {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        sqrt_sym_slice(&self.to_row_vec(), d, &mut out);
        SpdMatrix { m: DMatrix::from_row_slice(d, d, &out), repaired: false, floor: None }
    }

    pub fn scale(&self, s: f64) -> Result<SpdMatrix> {
        SpdMatrix::new(&self.m * s)
    }
}

/// Default eigenvalue floor for the square-root repair.
fn eigen_floor(trace: f64, max_abs_eig: f64, d: usize) -> f64 {
    (1e-10 * trace.abs() / d as f64).max(1e-10 * max_abs_eig).max(f64::MIN_POSITIVE)
}

/// Principal square root of a symmetric matrix.
///
/// Eigenvalues below the floor `1e-10 * trace / d` are replaced by
/// `max(|lambda|, floor)` and the result is flagged as repaired.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    check_symmetric(m)?;
    let d = m.nrows();
    let sym = symmetrized(m);
    let flat: Vec<f64> = (0..d * d).map(|k| sym[(k / d, k % d)]).collect();
    let mut out = vec![0.0; d * d];
    let (repaired, floor) = sqrt_sym_slice(&flat, d, &mut out);
    Ok(SpdMatrix { m: DMatrix::from_row_slice(d, d, &out), repaired, floor: repaired.then_some(floor) })
}

/// Eigenvalue clamp `lambda -> max(|lambda|, eps)`; SPD inputs with spectrum
/// above `eps` are returned unchanged.
pub fn pd_repair(m: &DMatrix<f64>, eps: f64) -> Result<SpdMatrix> {
    check_symmetric(m)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("repair floor {eps} must be positive")));
    }
    let sym = symmetrized(m);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= eps) {
        return Ok(SpdMatrix { m: sym, repaired: false, floor: None });
    }
    let clamped = eig.eigenvalues.map(|l| l.abs().max(eps));
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    Ok(SpdMatrix { m: symmetrized(&r), repaired: true, floor: Some(eps) })
}

/// Eigenvalue clamp `lambda -> min(max(|lambda|, lo), hi)` on a row-major slice.
pub(crate) fn clamp_spectrum_slice(m: &[f64], d: usize, lo: f64, hi: f64, out: &mut [f64]) {
    let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i * d + j] + m[j * d + i]));
    let eig = sym.symmetric_eigen();
    let clamped = eig.eigenvalues.map(|l| l.abs().max(lo).min(hi));
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (r[(i, j)] + r[(j, i)]);
        }
    }
}

/// Square root of a symmetric row-major matrix with the default floor repair.
/// Returns `(repaired, floor)`.
pub(crate) fn sqrt_sym_slice(m: &[f64], d: usize, out: &mut [f64]) -> (bool, f64) {
    match d {
        1 => {
            let a = m[0];
            let floor = eigen_floor(a, a.abs(), 1);
            if a >= floor {
                out[0] = a.sqrt();
                (false, floor)
            } else {
                out[0] = a.abs().max(floor).sqrt();
                (true, floor)
            }
        }
        2 => {
            let a = m[0];
            let c = m[3];
            let b = 0.5 * (m[1] + m[2]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let big = mean + rad;
            let small = mean - rad;
            let max_abs = big.abs().max(small.abs());
            let floor = eigen_floor(a + c, max_abs, 2);
            if big > 0.0 && small >= floor {
                // sqrt(M) = (M + s I) / t with s = sqrt(det), t = sqrt(tr + 2 s)
                let det = (a * c - b * b).max(big * small);
                let s = det.sqrt();
                let t = (a + c + 2.0 * s).sqrt();
                out[0] = (a + s) / t;
                out[1] = b / t;
                out[2] = b / t;
                out[3] = (c + s) / t;
                (false, floor)
            } else {
                sqrt_general(m, d, out)
            }
        }
        _ => sqrt_general(m, d, out),
    }
}

fn sqrt_general(m: &[f64], d: usize, out: &mut [f64]) -> (bool, f64) {
    let tr: f64 = (0..d).map(|i| m[i * d + i]).sum();
    let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i * d + j] + m[j * d + i]));
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
    let floor = eigen_floor(tr, max_abs, d);
    let mut repaired = false;
    let roots = eig.eigenvalues.map(|l| {
        if l < floor {
            repaired = true;
            l.abs().max(floor).sqrt()
        } else {
            l.sqrt()
        }
    });
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (r[(i, j)] + r[(j, i)]);
        }
    }
    (repaired, floor)
}

pub(crate) fn det_slice(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => DMatrix::from_row_slice(d, d, m).determinant(),
    }
}

/// Inverse of a row-major matrix; returns false when singular.
pub(crate) fn inverse_slice(m: &[f64], d: usize, out: &mut [f64]) -> bool {
    match d {
        1 => {
            if m[0] == 0.0 {
                return false;
            }
            out[0] = 1.0 / m[0];
            true
        }
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if det == 0.0 || !det.is_finite() {
                return false;
            }
            out[0] = m[3] / det;
            out[1] = -m[1] / det;
            out[2] = -m[2] / det;
            out[3] = m[0] / det;
            true
        }
        _ => match DMatrix::from_row_slice(d, d, m).try_inverse() {
            Some(inv) => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = inv[(i, j)];
                    }
                }
                true
            }
            None => false,
        },
    }
}

/// Row-major product `a * b` of square matrices.
pub(crate) fn matmul_slice(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

/// A Gaussian density `G[a, Sigma]`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    precision: Vec<f64>,
    norm: f64,
}

impl Gaussian {
    pub fn new(mean: &[f64], cov: &SpdMatrix) -> Result<Self> {
        let d = cov.dim();
        if mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
        }
        let flat = cov.to_row_vec();
        let det = det_slice(&flat, d);
        if !(det > 0.0) {
            return Err(Error::NonSpdCovariance);
        }
        let mut precision = vec![0.0; d * d];
        if !inverse_slice(&flat, d, &mut precision) {
            return Err(Error::NonSpdCovariance);
        }
        let norm = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) / det.sqrt();
        Ok(Gaussian { mean: mean.to_vec(), precision, norm })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut q = 0.0;
        for i in 0..d {
            let zi = x[i] - self.mean[i];
            for j in 0..d {
                q += zi * self.precision[i * d + j] * (x[j] - self.mean[j]);
            }
        }
        self.norm * (-0.5 * q).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        frobenius(&(a - b))
    }

    #[test]
    fn sqrt_identity_and_diagonal() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(frob_diff(spd_sqrt(&id).unwrap().matrix(), &id) < 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = spd_sqrt(&m).unwrap();
        assert!(frob_diff(r.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])) < 1e-15);
        assert!(!r.repaired());
    }

    #[test]
    fn sqrt_of_two_one_matrix() {
        // eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2 with eigenvalues 3 and 1
        let s3 = 3f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[s3 + 1.0, s3 - 1.0, s3 - 1.0, s3 + 1.0]) * 0.5;
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = spd_sqrt(&m).unwrap();
        assert!(frob_diff(r.matrix(), &expected) < 1e-14);
        assert!((r.matrix()[(0, 0)] - 1.3660254037844386).abs() < 1e-14);
        assert!(frob_diff(&(r.matrix() * r.matrix()), &m) < 1e-10);
    }

    #[test]
    fn sqrt_rejects_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_sqrt(&m), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn sqrt_repair_is_flagged() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        let r = spd_sqrt(&m).unwrap();
        assert!(r.repaired());
        assert!((r.matrix()[(1, 1)] - 1e-3f64.sqrt()).abs() < 1e-14);
        let r3 = spd_sqrt(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.0]))).unwrap();
        assert!(r3.repaired());
        assert!(r3.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn pd_repair_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let r = pd_repair(&m, 1e-6).unwrap();
        assert!(frob_diff(r.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5])) < 1e-15);
        assert!(r.repaired());

        let spd = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = pd_repair(&spd, 1e-6).unwrap();
        assert_eq!(r.matrix(), &spd);
        assert!(!r.repaired());

        let r = pd_repair(&DMatrix::zeros(2, 2), 1e-6).unwrap();
        assert!(frob_diff(r.matrix(), &(DMatrix::identity(2, 2) * 1e-6)) < 1e-20);
    }

    #[test]
    fn gaussian_density_values() {
        let g = Gaussian::new(&[0.0], &SpdMatrix::identity(1)).unwrap();
        assert!((g.density(&[0.0]) - 0.3989422804014327).abs() < 1e-16);
        let cov = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let g = Gaussian::new(&[1.0, -1.0], &cov).unwrap();
        // independent evaluation via nalgebra inverse
        let inv = cov.matrix().clone().try_inverse().unwrap();
        let z = nalgebra::DVector::from_vec(vec![0.3 - 1.0, 0.2 + 1.0]);
        let q = (z.transpose() * &inv * &z)[(0, 0)];
        let expect = (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * cov.matrix().determinant().sqrt());
        assert!((g.density(&[0.3, 0.2]) - expect).abs() < 1e-15);
    }

    #[test]
    fn non_spd_covariance_rejected() {
        assert!(matches!(SpdMatrix::from_diagonal(&[1.0, -1.0]), Err(Error::NonSpdCovariance)));
    }

    fn random_spd(d: usize, log_cond: f64, angles: &[f64]) -> DMatrix<f64> {
        // Q diag Q^T with Q a product of Givens rotations and spectrum spread over 10^log_cond
        let mut q = DMatrix::<f64>::identity(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                let (s, c) = angles[k % angles.len()].sin_cos();
                let mut g = DMatrix::<f64>::identity(d, d);
                g[(i, i)] = c;
                g[(j, j)] = c;
                g[(i, j)] = -s;
                g[(j, i)] = s;
                q = q * g;
                k += 1;
            }
        }
        let spec: Vec<f64> = (0..d).map(|i| 10f64.powf(log_cond * i as f64 / (d.max(2) - 1) as f64)).collect();
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spec)) * q.transpose();
        (&m + m.transpose()) * 0.5
    }

    proptest! {
        #[test]
        fn sqrt_squares_back(d in 1usize..5, log_cond in 0.0f64..6.0,
                             angles in proptest::collection::vec(-3.2f64..3.2, 6),
                             scale in -3.0f64..3.0) {
            let m = random_spd(d, log_cond, &angles) * 10f64.powf(scale);
            let r = spd_sqrt(&m).unwrap();
            prop_assert!(!r.repaired());
            let err = frobenius(&(r.matrix() * r.matrix() - &m));
            prop_assert!(err <= 1e-10 * frobenius(&m).max(1.0), "err {}", err);
            prop_assert!(r.eigenvalues()[0] > 0.0);
        }

        #[test]
        fn pd_repair_is_spd(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            let r = pd_repair(&m, 1e-6).unwrap();
            prop_assert!(r.eigenvalues()[0] >= 1e-6 * (1.0 - 1e-9));
        }
    }
}
