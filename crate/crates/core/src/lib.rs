//! Adaptive convolutions of sampled functions on regular grids.

pub mod continuity;
pub mod conv;
pub mod error;
mod fft;
pub mod grid;
pub mod kernel;
pub mod mu;
pub mod spd;
pub mod transforms;
pub mod vkde;

pub use continuity::{
    continuity_current, continuity_residual, current_gradient_matrix, smoothed_density, ContinuityInput,
};
pub use conv::{
    adaptive_conv, adaptive_conv_derivative, adaptive_conv_with, generalized_conv, type_three_conv, type_three_kernel,
    type_two_conv, type_two_kernel, ConvPath, KernelField,
};
pub use error::{Error, Result};
pub use grid::{
    divergence, gaussian_field, gradient, hessian, integrate, lp_norm, make_grid, Grid, MatrixField, ScalarField,
    VectorField,
};
pub use kernel::{DifferentiableKernel, FnKernel, GaussianKernel, Kernel, SampledKernel};
pub use mu::{
    fixed_point_map, mu_adaptive_fixed_point, mu_global_fourier, mu_gradient_baseline, mu_wigner, mu_windowed,
    variation_matrix, EpsMode, FixedPointOptions, FixedPointReport, MuField, Variant,
};
pub use spd::{pd_repair, spd_sqrt, Gaussian, SpdMatrix};
pub use transforms::{
    adaptive_windowed_fourier, conjugate_grid, fourier, fourier_on, husimi_check, inverse_fourier, wigner,
    windowed_fourier, PhaseSpaceField, Spectrum,
};
pub use vkde::{
    calibrate_kappa, kde_fixed, silverman_bandwidth, vkde_fixed_point, vkde_sample_point, vkde_update, BandwidthReport,
    BandwidthVector, SamplePointEstimator, SampleSet, VkdeOptions,
};

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
