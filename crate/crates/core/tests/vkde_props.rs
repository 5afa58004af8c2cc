use adaptconv::{
    adaptive_conv, calibrate_kappa, integrate, make_grid, vkde_fixed_point, vkde_sample_point, vkde_update,
    BandwidthVector, GaussianKernel, MatrixField, MuField, SampleSet, ScalarField, Variant, VkdeOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_samples(rng: &mut ChaCha8Rng, n: usize, d: usize, center: f64, std: f64) -> Vec<f64> {
    (0..n * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            center + std * z
        })
        .collect()
}

#[test]
fn fixed_point_on_gaussian_cluster() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = SampleSet::new(1, normal_samples(&mut rng, 50, 1, 0.0, 1.0)).unwrap();
    let g = GaussianKernel::new(1, 1.0).unwrap();
    let opts = VkdeOptions::new(calibrate_kappa(1, 50, 0.5).unwrap(), 0.5);
    let (m, report) = vkde_fixed_point(&samples, &g, &opts).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(report.iterations <= 60, "{}", report.iterations);
    assert!(report.final_residual <= opts.tol);
    assert!(!report.clip_warning);

    let grid = make_grid(1, &[-20.0], &[20.0], &[4001]).unwrap();
    let rho = vkde_sample_point(&samples, &m, &g).unwrap().on_grid(&grid).unwrap();
    assert!((integrate(&rho) - 1.0).abs() <= 1e-6);

    // one more application of the update moves nothing by more than the tolerance
    let next = vkde_update(&samples, &m, &g, opts.kappa, opts.beta).unwrap();
    for (a, b) in next.values().iter().zip(m.values()) {
        assert!((a / b - 1.0).abs() <= opts.tol * (1.0 + 1e-9));
    }
}

#[test]
fn fixed_point_separates_two_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pts = normal_samples(&mut rng, 50, 1, 0.0, 1.0);
    pts.extend(normal_samples(&mut rng, 50, 1, 6.0, 1.0 / 6.0));
    let samples = SampleSet::new(1, pts).unwrap();
    let g = GaussianKernel::new(1, 1.0).unwrap();
    // beta = 1/d
    let opts = VkdeOptions::new(calibrate_kappa(1, 100, 1.0).unwrap(), 1.0);
    let (m, report) = vkde_fixed_point(&samples, &g, &opts).unwrap();
    assert!(report.converged, "{report:?}");
    let wide = BandwidthVector::unclipped(m.values()[..50].to_vec()).unwrap().median();
    let narrow = BandwidthVector::unclipped(m.values()[50..].to_vec()).unwrap().median();
    assert!(narrow / wide > 2.0, "{narrow} / {wide} after {} iterations", report.iterations);
}

#[test]
fn nonpositive_kappa_rejected() {
    let samples = SampleSet::new(1, vec![0.0, 1.0]).unwrap();
    let g = GaussianKernel::new(1, 1.0).unwrap();
    assert!(vkde_fixed_point(&samples, &g, &VkdeOptions::new(0.0, 0.5)).is_err());
}

#[test]
fn scaling_identity_for_inverse_dimension_exponent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [1usize, 2] {
        let samples = SampleSet::new(d, normal_samples(&mut rng, 40, d, 0.0, 1.0)).unwrap();
        let g = GaussianKernel::new(d, 1.0).unwrap();
        let m = BandwidthVector::unclipped((0..40).map(|n| 0.8 + 0.05 * n as f64).collect()).unwrap();
        let rho = vkde_sample_point(&samples, &m, &g).unwrap();
        for alpha in [2.0, 0.3] {
            let ss = samples.scaled(1.0 / alpha);
            let ms = BandwidthVector::unclipped(m.values().iter().map(|v| alpha * v).collect()).unwrap();
            let rho_s = vkde_sample_point(&ss, &ms, &g).unwrap();
            for k in 0..25 {
                let x: Vec<f64> = (0..d).map(|a| -1.5 + 0.13 * k as f64 + 0.07 * a as f64).collect();
                let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
                let expected = alpha.powi(d as i32) * rho.eval(&ax);
                let got = rho_s.eval(&x);
                assert!((got - expected).abs() <= 1e-8 * expected.abs().max(1e-300), "d={d} alpha={alpha}");
            }
        }

        // the update map commutes with the scaling, so fixed points scale too
        let beta = 1.0 / d as f64;
        let kappa = calibrate_kappa(d, 40, beta).unwrap();
        let next = vkde_update(&samples, &m, &g, kappa, beta).unwrap();
        let alpha = 2.0;
        let ss = samples.scaled(1.0 / alpha);
        let ms = BandwidthVector::unclipped(m.values().iter().map(|v| alpha * v).collect()).unwrap();
        let next_s = vkde_update(&ss, &ms, &g, kappa, beta).unwrap();
        for (a, b) in next_s.values().iter().zip(next.values()) {
            assert!((a - alpha * b).abs() <= 1e-8 * a.abs());
        }
    }
}

/// The sample-point estimator with a smooth inverse-bandwidth law `m(y)` tends
/// to the adaptive convolution of the true density with `mu = m`.
#[test]
fn large_sample_limit_is_adaptive_convolution() {
    let law = |y: f64| 2.5 * (1.0 + 0.4 * (y / 1.5).tanh());
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples = SampleSet::new(1, normal_samples(&mut rng, n, 1, 0.0, 1.0)).unwrap();
    let g = GaussianKernel::new(1, 1.0).unwrap();
    let m = BandwidthVector::unclipped(samples.points().iter().map(|&y| law(y)).collect()).unwrap();

    let grid = make_grid(1, &[-8.0], &[8.0], &[641]).unwrap();
    let est = vkde_sample_point(&samples, &m, &g).unwrap().on_grid(&grid).unwrap();
    let rho =
        ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()).unwrap();
    let mu = MuField::from_matrix_field(
        &MatrixField::from_fn(&grid, |x| DMatrix::from_element(1, 1, law(x[0]))).unwrap(),
        Variant::Custom,
    )
    .unwrap();
    let limit = adaptive_conv(&rho, &g, &mu, 1.0).unwrap();
    let diff =
        ScalarField::new(grid.clone(), est.values().iter().zip(limit.values()).map(|(a, b)| (a - b).abs()).collect())
            .unwrap();
    let l1 = integrate(&diff);
    assert!(l1 <= 0.05, "{l1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimator_is_a_density_1d(
        pts in prop::collection::vec(-3.0f64..3.0, 2..30),
        ms in prop::collection::vec(0.3f64..4.0, 30),
    ) {
        let n = pts.len();
        let samples = SampleSet::new(1, pts).unwrap();
        let m = BandwidthVector::unclipped(ms[..n].to_vec()).unwrap();
        let g = GaussianKernel::new(1, 1.0).unwrap();
        let grid = make_grid(1, &[-40.0], &[40.0], &[3201]).unwrap();
        let rho = vkde_sample_point(&samples, &m, &g).unwrap().on_grid(&grid).unwrap();
        prop_assert!(rho.values().iter().all(|&v| v >= 0.0));
        prop_assert!((integrate(&rho) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn estimator_is_a_density_2d(
        pts in prop::collection::vec(-2.0f64..2.0, 4..20),
        ms in prop::collection::vec(0.5f64..3.0, 10),
    ) {
        let n = pts.len() / 2;
        let samples = SampleSet::new(2, pts[..2 * n].to_vec()).unwrap();
        let m = BandwidthVector::unclipped(ms[..n].to_vec()).unwrap();
        let g = GaussianKernel::new(2, 1.0).unwrap();
        let grid = make_grid(2, &[-14.0, -14.0], &[14.0, 14.0], &[281, 281]).unwrap();
        let rho = vkde_sample_point(&samples, &m, &g).unwrap().on_grid(&grid).unwrap();
        prop_assert!((integrate(&rho) - 1.0).abs() <= 1e-6);
    }
}
