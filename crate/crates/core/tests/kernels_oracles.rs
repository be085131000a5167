//! Kernel convolution and complete-positivity solves against closed forms.

use fracvolt_core::kernels::{
    check_completely_positive, convolve, g_samples, solve_cp_equations, CpVerdict, KernelSpec,
    DEFAULT_CP_TOL, DEFAULT_MU_GRID,
};
use fracvolt_core::specfun::{gamma, mittag_leffler, FracOrder};
use fracvolt_core::TimeGrid;
use nalgebra::DVector;
use proptest::prelude::*;

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn constant_kernel_integrates() {
    let g = TimeGrid::new(2.0, 40).unwrap();
    let c = convolve(&KernelSpec::ConstantOne, &g, &vec![1.0; g.len()]).unwrap();
    for (k, v) in c.iter().enumerate() {
        assert!((v - g.t(k)).abs() < 1e-13);
    }
}

#[test]
fn fractional_kernel_against_constant_is_exact() {
    // a piecewise-linear f = 1 is integrated exactly: g_a * 1 = g_{a+1}
    let g = TimeGrid::new(1.0, 64).unwrap();
    let c = convolve(&KernelSpec::fractional(0.5), &g, &vec![1.0; g.len()]).unwrap();
    assert!((c[64] - 1.0 / gamma(1.5)).abs() < 1e-13);
    assert!((c[64] - 1.1283791670955126).abs() < 1e-13);
    let want = g_samples(1.5, &g);
    assert!(max_err(&c, &want) < 1e-13);
}

#[test]
fn fractional_semigroup_is_second_order() {
    // g_a * g_b = g_{a+b}, with f = g_b smooth enough (b >= 2)
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let g = TimeGrid::new(1.0, n).unwrap();
            let f = g_samples(2.5, &g);
            let c = convolve(&KernelSpec::fractional(0.5), &g, &f).unwrap();
            max_err(&c, &g_samples(3.0, &g))
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errs:?}");
    }
}

#[test]
fn exponential_kernel_against_closed_form() {
    // s + mu (c e^{-rt} * s) = 1 has s = (r + mu c e^{-(r+mu c)t}) / (r + mu c)
    let (rate, scale, mu) = (1.5, 2.0, 3.0);
    let spec = KernelSpec::Exponential { rate, scale };
    let g = TimeGrid::new(2.0, 2000).unwrap();
    let (s, _) = solve_cp_equations(&spec, mu, &g).unwrap();
    let q = rate + mu * scale;
    let want: Vec<f64> = g
        .nodes()
        .iter()
        .map(|t| (rate + mu * scale * (-q * t).exp()) / q)
        .collect();
    assert!(max_err(&s, &want) < 1e-5);
}

#[test]
fn constant_kernel_resolvents_are_exponential_and_second_order() {
    let mut prev: Option<f64> = None;
    for n in [100, 200, 400, 800] {
        let g = TimeGrid::new(1.0, n).unwrap();
        let (s, r) = solve_cp_equations(&KernelSpec::ConstantOne, 2.0, &g).unwrap();
        let exact: Vec<f64> = g.nodes().iter().map(|t| (-2.0 * t).exp()).collect();
        let e = max_err(&s, &exact).max(max_err(&r, &exact));
        if let Some(p) = prev {
            assert!(p / e >= 3.5, "n={n}: factor {}", p / e);
        }
        prev = Some(e);
    }
}

#[test]
fn half_order_relaxation_is_mittag_leffler() {
    let g = TimeGrid::new(1.0, 1000).unwrap();
    let (s, _) = solve_cp_equations(&KernelSpec::fractional(0.5), 1.0, &g).unwrap();
    let a = FracOrder::new(0.5).unwrap();
    for (k, t) in g.nodes().iter().enumerate() {
        let e = mittag_leffler(a, -t.sqrt()).unwrap().value;
        assert!((s[k] - e).abs() <= 1e-3, "t={t}: {} vs {e}", s[k]);
    }
}

#[test]
fn singular_resolvent_kernel_matches_series() {
    // r = -s'/mu, so with mu = 1: int_{1/2}^{1} r = s(1/2) - s(1)
    let g = TimeGrid::new(1.0, 4000).unwrap();
    let (s, r) = solve_cp_equations(&KernelSpec::fractional(0.5), 1.0, &g).unwrap();
    assert!(r[0].is_infinite());
    let h = g.dt();
    let k0 = 2000;
    let mut int = 0.0;
    for k in k0..g.len() - 1 {
        int += 0.5 * h * (r[k] + r[k + 1]);
    }
    let want = s[k0] - s[g.len() - 1];
    assert!((int - want).abs() < 1e-6, "{int} vs {want}");
}

#[test]
fn complete_positivity_dichotomy() {
    let g = TimeGrid::new(2.0, 2000).unwrap();
    let mus = [0.5, 1.0, 5.0, 20.0];
    for a in [0.25, 0.5, 0.75, 1.0] {
        let rep = check_completely_positive(&KernelSpec::fractional(a), &mus, &g, DEFAULT_CP_TOL)
            .unwrap();
        assert!(rep.is_positive(), "alpha={a}: {rep:?}");
    }
    for a in [1.25, 1.5, 1.75] {
        let rep = check_completely_positive(&KernelSpec::fractional(a), &mus, &g, DEFAULT_CP_TOL)
            .unwrap();
        assert!(
            matches!(rep.verdict, CpVerdict::Violated { .. }),
            "alpha={a}: {rep:?}"
        );
    }
    let rep = check_completely_positive(
        &KernelSpec::ConstantOne,
        &DEFAULT_MU_GRID,
        &g,
        DEFAULT_CP_TOL,
    )
    .unwrap();
    assert!(rep.is_positive());
}

#[test]
fn vector_convolution_is_componentwise() {
    let g = TimeGrid::new(1.0, 50).unwrap();
    let spec = KernelSpec::fractional(0.7);
    let f: Vec<DVector<f64>> = g
        .nodes()
        .iter()
        .map(|t| DVector::from_vec(vec![t.sin(), t * t]))
        .collect();
    let c = convolve(&spec, &g, &f).unwrap();
    let c0 = convolve(&spec, &g, &f.iter().map(|v| v[0]).collect::<Vec<_>>()).unwrap();
    let c1 = convolve(&spec, &g, &f.iter().map(|v| v[1]).collect::<Vec<_>>()).unwrap();
    for k in 0..g.len() {
        assert_eq!(c[k][0], c0[k]);
        assert_eq!(c[k][1], c1[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convolution_is_linear(
        a in 0.1f64..2.0,
        f in prop::collection::vec(-10.0f64..10.0, 33),
        h in prop::collection::vec(-10.0f64..10.0, 33),
    ) {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let spec = KernelSpec::fractional(a);
        let sum: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x + y).collect();
        let cs = convolve(&spec, &g, &sum).unwrap();
        let cf = convolve(&spec, &g, &f).unwrap();
        let ch = convolve(&spec, &g, &h).unwrap();
        for k in 0..g.len() {
            let scale = 1.0 + cf[k].abs() + ch[k].abs();
            prop_assert!((cs[k] - cf[k] - ch[k]).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn mu_zero_is_bit_exact(a in 0.1f64..2.0, n in 2usize..200) {
        let g = TimeGrid::new(1.5, n).unwrap();
        let spec = KernelSpec::fractional(a);
        let (s, r) = solve_cp_equations(&spec, 0.0, &g).unwrap();
        prop_assert!(s.iter().all(|&v| v == 1.0));
        let samples = fracvolt_core::kernels::kernel_samples(&spec, &g).unwrap();
        prop_assert!(r.iter().zip(&samples).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn corrected_rule_is_exact_on_fractional_powers() {
    use fracvolt_core::kernels::{convolve_with, ProductWeights};
    // g_a * t^b = Gamma(b+1)/Gamma(a+b+1) t^{a+b}
    let alpha = 0.3;
    let g = TimeGrid::new(2.0, 400).unwrap();
    let w = ProductWeights::corrected(&KernelSpec::fractional(alpha), &g).unwrap();
    assert_eq!(w.start_len(), 4);
    for b in [0.3, 0.6] {
        let f: Vec<f64> = g.nodes().iter().map(|t| t.powf(b)).collect();
        let c = convolve_with(&w, &f).unwrap();
        let plain = convolve(&KernelSpec::fractional(alpha), &g, &f).unwrap();
        let want: Vec<f64> = g
            .nodes()
            .iter()
            .map(|t| gamma(b + 1.0) / gamma(alpha + b + 1.0) * t.powf(alpha + b))
            .collect();
        assert!(max_err(&c, &want) < 1e-11, "b={b}: {}", max_err(&c, &want));
        assert!(max_err(&plain, &want) > 1e-4);
    }
}
