use adaptconv::{
    adaptive_conv, adaptive_conv_derivative, adaptive_conv_with, generalized_conv, lp_norm, make_grid, type_three_conv,
    type_three_kernel, type_two_conv, ConvPath, DifferentiableKernel, FnKernel, GaussianKernel, Grid, Kernel,
    KernelField, MatrixField, MuField, SampledKernel, ScalarField, Variant,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn riemann_l1(f: &ScalarField) -> f64 {
    f.values().iter().map(|v| v.abs()).sum::<f64>() * f.grid().cell_volume()
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
}

/// SPD field `R(theta) diag(s1, s2) R(theta)^T` with smooth random parameters.
fn random_mu_2d(grid: &Grid, c: &[f64]) -> MuField {
    let field = MatrixField::from_fn(grid, |x| {
        let th = c[0] * x[0] + c[1] * x[1];
        let s1 = 0.6 * (1.0 + 0.5 * (c[2] * x[0]).sin());
        let s2 = s1 * (1.0 + 4.0 * (1.0 + (c[3] * x[1]).cos()));
        let (cs, sn) = (th.cos(), th.sin());
        let r = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        &r * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s1, s2])) * r.transpose()
    })
    .unwrap();
    MuField::from_matrix_field(&field, Variant::Custom).unwrap()
}

/// Like [`random_mu_2d`] with singular values in `[smax / 50, smax]`.
fn conditioned_mu_2d(grid: &Grid, c: &[f64], smax: f64) -> MuField {
    let field = MatrixField::from_fn(grid, |x| {
        let th = c[0] * x[0] + c[1] * x[1];
        let s2 = smax * (0.55 + 0.45 * (c[3] * x[1]).sin());
        let s1 = s2 / (1.0 + 24.5 * (1.0 + (c[2] * x[0]).cos()));
        let (cs, sn) = (th.cos(), th.sin());
        let r = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        &r * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s1, s2])) * r.transpose()
    })
    .unwrap();
    MuField::from_matrix_field(&field, Variant::Custom).unwrap()
}

fn random_f_2d(grid: &Grid, c: &[f64]) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        (-r2 / 2.0).exp() * (c[2] + (c[3] * x[0]).sin())
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_in_f_and_g(c in prop::collection::vec(-1.0f64..1.0, 8), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = make_grid(2, &[-5.0, -5.0], &[5.0, 5.0], &[25, 25]).unwrap();
        let mu = random_mu_2d(&grid, &c[4..8]);
        let f1 = random_f_2d(&grid, &c[0..4]);
        let f2 = random_f_2d(&grid, &c[4..8]);
        let g1 = GaussianKernel::new(2, 0.7).unwrap();
        let g2 = GaussianKernel::new(2, 1.3).unwrap();
        let p = 2.0;
        let lhs = adaptive_conv(&f1.scaled(a).add(&f2.scaled(b)).unwrap(), &g1, &mu, p).unwrap();
        let rhs = adaptive_conv(&f1, &g1, &mu, p).unwrap().scaled(a)
            .add(&adaptive_conv(&f2, &g1, &mu, p).unwrap().scaled(b)).unwrap();
        let scale = rhs.max_abs().max(1.0);
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);

        let radius = g1.support_radius().max(g2.support_radius());
        let mix = FnKernel::new(2, radius, |z: &[f64]| a * g1.eval(z) + b * g2.eval(z)).unwrap();
        let lhs = adaptive_conv(&f1, &mix, &mu, p).unwrap();
        let rhs = adaptive_conv(&f1, &g1, &mu, p).unwrap().scaled(a)
            .add(&adaptive_conv(&f1, &g2, &mu, p).unwrap().scaled(b)).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);
    }

    #[test]
    fn young_bound(c in prop::collection::vec(-1.0f64..1.0, 8), pi in 0usize..3) {
        let p = [1.0, 2.0, f64::INFINITY][pi];
        let grid = make_grid(2, &[-6.0, -6.0], &[6.0, 6.0], &[49, 49]).unwrap();
        // the narrowest stretched kernel still spans 1.6 grid steps
        let mu = conditioned_mu_2d(&grid, &c[4..8], 2.5);
        let f = random_f_2d(&grid, &c[0..4]);
        let g = GaussianKernel::new(2, 1.0).unwrap();
        let out = adaptive_conv(&f, &g, &mu, p).unwrap();
        let bound = riemann_l1(&f) * g.lp_norm(p).unwrap();
        prop_assert!(lp_norm(&out, p).unwrap() <= 1.01 * bound);
    }

    #[test]
    fn mass_preserved(c in prop::collection::vec(-1.0f64..1.0, 4)) {
        let grid = make_grid(1, &[-25.0], &[25.0], &[1001]).unwrap();
        let mu = MuField::from_scalar_fn(&grid, |x| 1.0 + 0.5 * (c[0] * x[0]).sin()).unwrap();
        let f = ScalarField::from_fn(&grid, |x| {
            (-(x[0] - c[1]).powi(2) / 2.0).exp() * (1.5 + (c[2] * 3.0 * x[0]).cos())
        }).unwrap();
        let g = GaussianKernel::new(1, 0.5).unwrap();
        let out = adaptive_conv(&f, &g, &mu, 1.0).unwrap();
        let (a, b) = (riemann_l1(&out), riemann_l1(&f));
        prop_assert!((a - b).abs() <= 1e-8 * b);
    }

    #[test]
    fn generalized_young(c in prop::collection::vec(-1.0f64..1.0, 6), pi in 0usize..3) {
        let p = [1.0, 2.0, f64::INFINITY][pi];
        let grid = make_grid(1, &[-4.0], &[4.0], &[81]).unwrap();
        let f = ScalarField::from_fn(&grid, |x| c[0] + c[1] * (2.0 * x[0]).sin()).unwrap();
        let kf = KernelField::from_fn(&grid, |x, y| {
            (-(x[0] - y[0] - c[2]).powi(2) * (2.0 + c[3])).exp() * (1.0 + 0.5 * (c[4] * x[0] * y[0]).cos())
        }).unwrap();
        let gamma = kf.column_norm_bound(p).unwrap();
        let out = generalized_conv(&f, &kf).unwrap();
        prop_assert!(lp_norm(&out, p).unwrap() <= riemann_l1(&f) * gamma * (1.0 + 1e-12));
    }
}

#[test]
fn identity_kernel_field_and_plain_convolution() {
    let grid = make_grid(1, &[-6.0], &[6.0], &[121]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| (-x[0] * x[0]).exp() * (1.0 + x[0])).unwrap();
    let g = GaussianKernel::new(1, 0.6).unwrap();
    let kf = KernelField::from_fn(&grid, |x, y| g.eval(&[x[0] - y[0]])).unwrap();
    let id = MuField::from_scalar_fn(&grid, |_| 1.0).unwrap();
    let a = generalized_conv(&f, &kf).unwrap();
    let b = adaptive_conv_with(&f, &g, &id, 1.0, ConvPath::Direct).unwrap();
    assert!(max_diff(&a, &b) < 1e-10);
}

#[test]
fn convolution_is_not_symmetric() {
    let grid = make_grid(1, &[-8.0], &[8.0], &[161]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| (-(x[0] - 1.0).powi(2) / 0.5).exp()).unwrap();
    let g = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
    let mu = MuField::from_scalar_fn(&grid, |x| 1.0 + 0.5 * x[0].tanh()).unwrap();
    let fg = adaptive_conv(&f, &SampledKernel::new(g.clone()), &mu, 1.0).unwrap();
    let gf = adaptive_conv(&g, &SampledKernel::new(f.clone()), &mu, 1.0).unwrap();
    assert!(max_diff(&fg, &gf) > 1e-2 * fg.max_abs());
}

fn f1(x: f64) -> f64 {
    (-x * x / 2.0).exp() * (1.0 + 0.05 * (3.0 * x).cos())
}

#[test]
fn differing_variation_plateaus() {
    let grid = make_grid(1, &[-7.0], &[11.0], &[1024]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| f1(x[0]) + f1(6.0 * (x[0] - 8.0))).unwrap();
    let g = GaussianKernel::new(1, 0.4).unwrap();
    let mu = MuField::from_scalar_fn(&grid, |x| if x[0] < 7.0 { 1.0 } else { 6.0 }).unwrap();
    let out = adaptive_conv(&f, &g, &mu, 1.0).unwrap();
    // (f1 * g)(u) by a fine independent Riemann sum
    let reference = |u: f64| {
        let h = 1e-3;
        (-12000..=12000)
            .map(|k| {
                let y = k as f64 * h;
                f1(y) * (-(u - y).powi(2) / (2.0 * 0.16)).exp() / (2.0 * std::f64::consts::PI * 0.16).sqrt() * h
            })
            .sum::<f64>()
    };
    let peak = reference(0.0);
    let mut x = [0.0];
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        if x[0] >= 7.0 {
            let r = reference(6.0 * (x[0] - 8.0));
            assert!((out.values()[i] - r).abs() <= 0.05 * peak, "x={} {} vs {}", x[0], out.values()[i], r);
        } else if x[0] < 5.0 {
            let r = reference(x[0]);
            assert!((out.values()[i] - r).abs() <= 0.05 * peak);
        }
    }
}

fn derivative_error(n: usize, alpha: &[usize]) -> f64 {
    let d = alpha.len();
    let grid = make_grid(d, &vec![-6.0; d], &vec![6.0; d], &vec![n; d]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp() * (1.0 + 0.3 * x[0]))
        .unwrap();
    let mu = if d == 1 {
        MuField::from_scalar_fn(&grid, |x| 1.0 + 0.4 * x[0].sin()).unwrap()
    } else {
        random_mu_2d(&grid, &[0.3, -0.2, 0.7, 0.4])
    };
    let g = GaussianKernel::new(d, 0.7).unwrap();
    let exact = adaptive_conv_derivative(&f, &g, &mu, 2.0, alpha).unwrap();
    let out = adaptive_conv(&f, &g, &mu, 2.0).unwrap();
    let h = grid.spacing();
    let at = |m: &[isize]| out.at(m);
    let mut worst = 0.0f64;
    let mut multi = vec![0usize; d];
    for i in 0..grid.len() {
        grid.unravel(i, &mut multi);
        if !grid.is_inside_margin(i, 2) {
            continue;
        }
        let m: Vec<isize> = multi.iter().map(|&v| v as isize).collect();
        let step = |axis: usize, s: isize| {
            let mut q = m.clone();
            q[axis] += s;
            q
        };
        let fd = match alpha.iter().sum::<usize>() {
            1 => {
                let a = alpha.iter().position(|&v| v == 1).unwrap();
                (at(&step(a, 1)) - at(&step(a, -1))) / (2.0 * h[a])
            }
            _ => {
                if let Some(a) = alpha.iter().position(|&v| v == 2) {
                    (at(&step(a, 1)) - 2.0 * at(&m) + at(&step(a, -1))) / (h[a] * h[a])
                } else {
                    let (a, b) = (0, 1);
                    let pp = {
                        let mut q = step(a, 1);
                        q[b] += 1;
                        q
                    };
                    let pm = {
                        let mut q = step(a, 1);
                        q[b] -= 1;
                        q
                    };
                    let mp = {
                        let mut q = step(a, -1);
                        q[b] += 1;
                        q
                    };
                    let mm = {
                        let mut q = step(a, -1);
                        q[b] -= 1;
                        q
                    };
                    (at(&pp) - at(&pm) - at(&mp) + at(&mm)) / (4.0 * h[a] * h[b])
                }
            }
        };
        worst = worst.max((fd - exact.values()[i]).abs());
    }
    worst
}

#[test]
fn derivative_rule_second_order() {
    for alpha in [vec![1], vec![2], vec![1, 1], vec![0, 2]] {
        let n = if alpha.len() == 1 { 121 } else { 31 };
        let coarse = derivative_error(n, &alpha);
        let fine = derivative_error(2 * n - 1, &alpha);
        let order = (coarse / fine).log2();
        assert!(order >= 1.8, "alpha={alpha:?} order={order} ({coarse:e}, {fine:e})");
    }
}

#[test]
fn derivative_of_scaled_identity() {
    let grid = make_grid(2, &[-5.0, -5.0], &[5.0, 5.0], &[41, 41]).unwrap();
    let f = random_f_2d(&grid, &[0.2, -0.5, 1.5, 0.8]);
    let c = 1.7;
    let mu = MuField::from_scalar_fn(&grid, |_| c).unwrap();
    let g = GaussianKernel::new(2, 0.6).unwrap();
    let dg = FnKernel::new(2, g.support_radius(), |z: &[f64]| {
        let mut out = [0.0; 2];
        g.gradient(z, &mut out);
        out[0]
    })
    .unwrap();
    for p in [1.0, 2.0, f64::INFINITY] {
        let lhs = adaptive_conv_derivative(&f, &g, &mu, p, &[1, 0]).unwrap();
        let rhs = adaptive_conv_with(&f, &dg, &mu, p, ConvPath::Direct).unwrap().scaled(c);
        assert!(max_diff(&lhs, &rhs) <= 1e-8);
    }
}

#[test]
fn type_two_identity_map() {
    let grid = make_grid(1, &[-10.0], &[10.0], &[201]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp() * (1.0 + 0.2 * x[0])).unwrap();
    let h = ScalarField::from_fn(&grid, |x| x[0]).unwrap();
    let g = GaussianKernel::new(1, 0.5).unwrap();
    let id = MuField::from_scalar_fn(&grid, |_| 1.0).unwrap();
    for p in [1.0, 2.0] {
        let a = type_two_conv(&f, &g, &h, p).unwrap();
        let b = adaptive_conv_with(&f, &g, &id, p, ConvPath::Direct).unwrap();
        assert!(max_diff(&a, &b) <= 1e-8, "p={p}");
    }
}

#[test]
fn type_two_linearizes_to_adaptive() {
    let grid = make_grid(1, &[-2.0], &[3.0], &[401]).unwrap();
    let f = ScalarField::from_fn(&grid, |x| (-(x[0] - 1.0).powi(2) / (2.0 * 0.09)).exp()).unwrap();
    let hmap = ScalarField::from_fn(&grid, |x| x[0].powi(3) + x[0] / 3.0).unwrap();
    let mu = MuField::from_scalar_fn(&grid, |x| 3.0 * x[0] * x[0] + 1.0 / 3.0).unwrap();
    let g = GaussianKernel::new(1, 0.1).unwrap();
    let a = type_two_conv(&f, &g, &hmap, 1.0).unwrap();
    let b = adaptive_conv(&f, &g, &mu, 1.0).unwrap();
    let peak = b.max_abs();
    let mut x = [0.0];
    for (i, (u, v)) in a.values().iter().zip(b.values()).enumerate() {
        grid.point(i, &mut x);
        // where h' varies slowly relative to the kernel width in x
        if x[0] >= 0.5 && v.abs() > 0.01 * peak {
            assert!((u - v).abs() <= 0.1 * v.abs(), "x={}: {u} vs {v}", x[0]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn appendix_young_bounds(c in prop::collection::vec(-1.0f64..1.0, 5), p in 1.0f64..3.0) {
        let grid = make_grid(1, &[-5.0], &[5.0], &[101]).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 4.0).exp() * (c[0] + (c[1] * 3.0 * x[0]).sin())).unwrap();
        let h = ScalarField::from_fn(&grid, |x| x[0] + 0.3 * c[2] * x[0].powi(3) + c[3]).unwrap();
        let g = GaussianKernel::new(1, 0.4 + 0.2 * c[4].abs()).unwrap();
        let l1 = riemann_l1(&f);
        let two = type_two_conv(&f, &g, &h, p).unwrap();
        prop_assert!(lp_norm(&two, p).unwrap() <= l1 * g.lp_norm(p).unwrap() * (1.0 + 1e-9));
        let three = type_three_conv(&f, &g, &g, &h, p).unwrap();
        prop_assert!(lp_norm(&three, p).unwrap() <= l1 * g.lp_norm(1.0).unwrap() * g.lp_norm(p).unwrap() * (1.0 + 1e-9));
        let k = type_three_kernel(&f, &g, &g, &h, p, 400).unwrap();
        for a in 0..101 {
            for b in 0..a {
                prop_assert!((k.get(a, b) - k.get(b, a)).abs() <= 1e-10 * k.get(a, a).abs().max(k.get(b, b).abs()));
            }
        }
    }
}

#[test]
fn type_three_general_young() {
    let (p, q, r) = (1.5, 1.5, 3.0);
    let grid = make_grid(1, &[-5.0], &[5.0], &[101]).unwrap();
    let g = GaussianKernel::new(1, 0.5).unwrap();
    for s in 0..5 {
        let s = s as f64;
        let f = ScalarField::from_fn(&grid, |x| (-x[0] * x[0] / 3.0).exp() * (1.0 + (s * x[0]).sin())).unwrap();
        let h = ScalarField::from_fn(&grid, |x| x[0] + 0.1 * s * x[0].powi(3)).unwrap();
        let out = type_three_conv(&f, &g, &g, &h, p).unwrap();
        let bound = lp_norm(&f, q).unwrap() * g.lp_norm(1.0).unwrap() * g.lp_norm(p).unwrap();
        assert!(lp_norm(&out, r).unwrap() <= 1.01 * bound);
    }
}
