use adaptconv::{
    adaptive_conv, calibrate_kappa, integrate, make_grid, silverman_bandwidth, vkde_fixed_point, vkde_sample_point,
    vkde_update, BandwidthVector, GaussianKernel, MuField, Result, SampleSet, ScalarField, VkdeOptions,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{uniform, Context};
use crate::report::Check;
use crate::scenarios::vkde_demo::draw_mixture;

fn normal_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn median(v: &[f64]) -> Result<f64> {
    Ok(BandwidthVector::unclipped(v.to_vec())?.median())
}

pub fn vkde(ctx: &Context) -> Result<Vec<Check>> {
    let mut rng = ctx.rng("vkde");
    let mut out = Vec::new();
    let kernel = GaussianKernel::new(1, 1.0)?;

    let h = silverman_bandwidth(1, 100);
    out.push(Check::residual("vkde.silverman.reference_value", h - 0.42158, 1e-4));
    let oracle = ((4.0f64 / 300.0).ln() / 5.0).exp();
    out.push(Check::residual("vkde.silverman.formula", (h - oracle) / oracle, 1e-12));

    let grid = make_grid(1, &[-40.0], &[40.0], &[3201])?;
    let mut mass = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(2..30);
        let samples = SampleSet::new(1, uniform(&mut rng, n, -3.0, 3.0))?;
        let m = BandwidthVector::unclipped(uniform(&mut rng, n, 0.3, 4.0))?;
        let rho = vkde_sample_point(&samples, &m, &kernel)?.on_grid(&grid)?;
        mass = mass.max((integrate(&rho) - 1.0).abs());
    }
    out.push(Check::residual("vkde.estimator.mass", mass, 1e-6));

    let samples = SampleSet::new(1, normal_samples(&mut rng, 40))?;
    let m = BandwidthVector::unclipped(uniform(&mut rng, 40, 0.5, 3.0))?;
    let rho = vkde_sample_point(&samples, &m, &kernel)?;
    let mut scaling = 0.0f64;
    for alpha in [2.0, 0.3] {
        let ms = BandwidthVector::unclipped(m.values().iter().map(|v| alpha * v).collect())?;
        let ss = samples.scaled(1.0 / alpha);
        let rho_s = vkde_sample_point(&ss, &ms, &kernel)?;
        for x in uniform(&mut rng, 25, -1.5, 1.5) {
            let expected = alpha * rho.eval(&[alpha * x]);
            scaling = scaling.max((rho_s.eval(&[x]) - expected).abs() / expected);
        }
    }
    out.push(Check::residual("vkde.scaling_identity", scaling, 1e-8));

    let samples = SampleSet::new(1, normal_samples(&mut rng, 50))?;
    let opts = VkdeOptions::new(calibrate_kappa(1, 50, 0.5)?, 0.5);
    let (m, rep) = vkde_fixed_point(&samples, &kernel, &opts)?;
    out.push(Check::residual("vkde.gaussian.final_residual", rep.final_residual, opts.tol));
    out.push(Check::residual("vkde.gaussian.iterations", rep.iterations as f64, 60.0));
    let mass =
        integrate(&vkde_sample_point(&samples, &m, &kernel)?.on_grid(&make_grid(1, &[-40.0], &[40.0], &[3201])?)?);
    out.push(Check::residual("vkde.gaussian.mass", mass - 1.0, 1e-6));
    let next = vkde_update(&samples, &m, &kernel, opts.kappa, opts.beta)?;
    let moved = next.values().iter().zip(m.values()).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    out.push(Check::residual("vkde.gaussian.update_residual", moved, opts.tol * (1.0 + 1e-9)));

    // beta = 1/d
    let n = 100;
    let samples = SampleSet::new(1, draw_mixture(n, rng.random()))?;
    let opts = VkdeOptions::new(calibrate_kappa(1, n, 1.0)?, 1.0);
    let (m, rep) = vkde_fixed_point(&samples, &kernel, &opts)?;
    out.push(Check::residual("vkde.mixture.final_residual", rep.final_residual, opts.tol));
    let ratio = median(&m.values()[n / 2..])? / median(&m.values()[..n / 2])?;
    out.push(Check::at_least("vkde.mixture.median_m_ratio", ratio, 2.0));

    let law = |y: f64| 2.5 * (1.0 + 0.4 * (y / 1.5).tanh());
    let samples = SampleSet::new(1, normal_samples(&mut rng, 10_000))?;
    let m = BandwidthVector::unclipped(samples.points().iter().map(|&y| law(y)).collect())?;
    let grid = make_grid(1, &[-8.0], &[8.0], &[641])?;
    let est = vkde_sample_point(&samples, &m, &kernel)?.on_grid(&grid)?;
    let rho = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())?;
    let limit = adaptive_conv(&rho, &kernel, &MuField::from_scalar_fn(&grid, |x| law(x[0]))?, 1.0)?;
    let diff =
        ScalarField::new(grid.clone(), est.values().iter().zip(limit.values()).map(|(a, b)| (a - b).abs()).collect())?;
    out.push(Check::residual("vkde.large_sample.l1", integrate(&diff), 0.05));

    let small = SampleSet::new(1, vec![0.0, 1.0])?;
    let rejected = vkde_fixed_point(&small, &kernel, &VkdeOptions::new(0.0, 0.5)).is_err();
    out.push(Check::residual("vkde.zero_kappa_rejected", if rejected { 0.0 } else { 1.0 }, 0.0));
    Ok(out)
}
