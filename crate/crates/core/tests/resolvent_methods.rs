//! Resolvent families: three methods against each other and closed forms.

use fracvolt_core::kernels::KernelSpec;
use fracvolt_core::operators::{build_operator, semigroup, Operator, OperatorSpec};
use fracvolt_core::resolvent::{
    convergence_study, default_probes, growth_bound_fit, method_by_name, registry,
    resolvent_equation_residual, resolvent_ml, resolvent_subordination, resolvent_volterra_step,
    ResolventFamily, SubordinationQuad,
};
use fracvolt_core::TimeGrid;
use std::f64::consts::{E, PI};
use std::time::Instant;

fn lap(n: usize) -> Operator {
    build_operator(&OperatorSpec::Laplacian1d { n, length: PI }).unwrap()
}

fn max_gap(a: &ResolventFamily, b: &ResolventFamily) -> f64 {
    a.mats
        .iter()
        .zip(&b.mats)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

#[test]
fn ml_examples() {
    let m1 = Operator::scalar(-1.0).unwrap();
    let g = TimeGrid::new(1.0, 4).unwrap();
    let f = resolvent_ml(&m1, 1.0, &g).unwrap();
    assert!((f.mats[4][(0, 0)] - 1.0 / E).abs() < 1e-15);
    let g = TimeGrid::new(PI, 8).unwrap();
    let f = resolvent_ml(&m1, 2.0, &g).unwrap();
    assert!((f.mats[8][(0, 0)] + 1.0).abs() < 1e-8);
    for alpha in [0.3, 1.0, 1.7] {
        let f = resolvent_ml(&lap(5), alpha, &g).unwrap();
        assert_eq!(f.mats[0], nalgebra::DMatrix::identity(5, 5));
    }
}

#[test]
fn ml_dense_series_path() {
    let a = build_operator(&OperatorSpec::Dense {
        matrix: vec![vec![-0.3, 0.2], vec![0.0, -0.1]],
    })
    .unwrap();
    let g = TimeGrid::new(1.0, 10).unwrap();
    let f = resolvent_ml(&a, 1.0, &g).unwrap();
    for k in 0..=10 {
        let e = semigroup(&a, g.t(k)).unwrap();
        assert!((&f.mats[k] - e).amax() < 1e-14);
    }
    let big = build_operator(&OperatorSpec::Dense {
        matrix: vec![vec![-30.0, 20.0], vec![0.0, -10.0]],
    })
    .unwrap();
    assert!(resolvent_ml(&big, 0.5, &g).is_err());
}

#[test]
fn interpolation_endpoints() {
    let a = lap(20);
    let g = TimeGrid::new(1.0, 50).unwrap();
    let f = resolvent_ml(&a, 1.0, &g).unwrap();
    for k in 0..=50 {
        let e = semigroup(&a, g.t(k)).unwrap();
        assert!((&f.mats[k] - e).amax() < 1e-10);
    }
    // diag(-w^2) with alpha = 2 is the cosine family
    let w = [0.5f64, 1.0, 3.0];
    let c = build_operator(&OperatorSpec::Spectral {
        eigenvalues: w.iter().map(|x| -x * x).collect(),
        eigenvectors: None,
    })
    .unwrap();
    let g = TimeGrid::new(2.0, 40).unwrap();
    let f = resolvent_ml(&c, 2.0, &g).unwrap();
    for k in 0..=40 {
        for (i, wi) in w.iter().enumerate() {
            assert!((f.mats[k][(i, i)] - (wi * g.t(k)).cos()).abs() < 1e-10);
        }
    }
}

#[test]
fn subordination_examples() {
    let q = SubordinationQuad::default();
    let g = TimeGrid::new(1.0, 10).unwrap();
    let f = resolvent_subordination(&Operator::scalar(-1.0).unwrap(), 0.5, &g, &q).unwrap();
    assert!((f.mats[10][(0, 0)] - 0.42758357615580700441).abs() < 1e-9);
    let z = resolvent_subordination(&Operator::scalar(0.0).unwrap(), 0.7, &g, &q).unwrap();
    for m in &z.mats {
        assert!((m[(0, 0)] - 1.0).abs() < 1e-9);
    }
    assert!(resolvent_subordination(&Operator::scalar(-1.0).unwrap(), 1.0, &g, &q).is_err());
}

#[test]
fn subordination_matches_ml_on_laplacian() {
    let a = lap(20);
    let g = TimeGrid::new(1.0, 20).unwrap();
    let ml = resolvent_ml(&a, 0.3, &g).unwrap();
    let sub = resolvent_subordination(&a, 0.3, &g, &SubordinationQuad::default()).unwrap();
    assert!(max_gap(&ml, &sub) <= 1e-6, "{}", max_gap(&ml, &sub));
}

#[test]
fn subordination_dense_path_matches_spectral() {
    // a non-symmetric operator similar to diag(-1, -2)
    let a = build_operator(&OperatorSpec::Dense {
        matrix: vec![vec![-1.0, 3.0], vec![0.0, -2.0]],
    })
    .unwrap();
    assert!(a.spectral().is_none());
    let g = TimeGrid::new(1.0, 4).unwrap();
    let q = SubordinationQuad {
        max_order: 64,
        ..SubordinationQuad::default()
    };
    let f = resolvent_subordination(&a, 0.5, &g, &q).unwrap();
    // S = P diag(E(-t^a), E(-2 t^a)) P^{-1}, P = [[1, -3], [0, 1]]
    let ea = |l: f64, t: f64| {
        fracvolt_core::specfun::mittag_leffler(
            fracvolt_core::specfun::FracOrder::new(0.5).unwrap(),
            l * t.sqrt(),
        )
        .unwrap()
        .value
    };
    let t = 1.0;
    let (e1, e2) = (ea(-1.0, t), ea(-2.0, t));
    let want = nalgebra::DMatrix::from_row_slice(2, 2, &[e1, -3.0 * e2 + 3.0 * e1, 0.0, e2]);
    assert!((&f.mats[4] - want).amax() < 1e-8);
}

#[test]
fn volterra_examples() {
    let m1 = Operator::scalar(-1.0).unwrap();
    let g = TimeGrid::new(1.0, 1000).unwrap();
    let f = resolvent_volterra_step(&m1, &KernelSpec::ConstantOne, &g).unwrap();
    assert!((f.mats[1000][(0, 0)] - 1.0 / E).abs() < 1e-5);
    let f = resolvent_volterra_step(&m1, &KernelSpec::fractional(0.5), &g).unwrap();
    assert!((f.mats[1000][(0, 0)] - 0.42758357615580700441).abs() < 1e-3);
    assert_eq!(f.mats[0][(0, 0)], 1.0);
}

#[test]
fn volterra_dense_path_matches_spectral() {
    let a = lap(6);
    let dense = build_operator(&OperatorSpec::Dense {
        matrix: vec![
            vec![-2.0, 1.0, 0.0],
            vec![0.5, -2.0, 1.0],
            vec![0.0, 0.5, -2.0],
        ],
    })
    .unwrap();
    assert!(dense.spectral().is_none());
    let g = TimeGrid::new(1.0, 200).unwrap();
    let k = KernelSpec::fractional(0.6);
    for op in [&a, &dense] {
        let f = resolvent_volterra_step(op, &k, &g).unwrap();
        let r = resolvent_equation_residual(&f, op, &k).unwrap();
        assert!(r < 1e-12, "{r}");
        assert!(f.commutation_defect(op) < 1e-8);
    }
}

#[test]
fn cross_method_agreement_scalar() {
    let a = Operator::scalar(-1.0).unwrap();
    let q = SubordinationQuad::default();
    for alpha in [0.3, 0.5, 0.9] {
        let g = TimeGrid::new(2.0, 2000).unwrap();
        let ml = resolvent_ml(&a, alpha, &g).unwrap();
        let sub = resolvent_subordination(&a, alpha, &g, &q).unwrap();
        assert!(max_gap(&ml, &sub) <= 1e-6, "alpha={alpha}");
        let k = KernelSpec::fractional(alpha);
        let v1 = max_gap(&ml, &resolvent_volterra_step(&a, &k, &g).unwrap());
        let g2 = g.refined();
        let v2 = max_gap(
            &resolvent_ml(&a, alpha, &g2).unwrap(),
            &resolvent_volterra_step(&a, &k, &g2).unwrap(),
        );
        assert!(v1 <= 1e-3, "alpha={alpha}: {v1}");
        assert!(v1 / v2 >= 1.5, "alpha={alpha}: {v1} -> {v2}");
    }
}

#[test]
fn residual_of_ml_family_shrinks_with_step() {
    let a = Operator::scalar(-1.0).unwrap();
    let k = KernelSpec::fractional(0.5);
    let mut prev = f64::INFINITY;
    for n in [1000, 2000, 4000] {
        let g = TimeGrid::new(1.0, n).unwrap();
        let r = resolvent_equation_residual(&resolvent_ml(&a, 0.5, &g).unwrap(), &a, &k).unwrap();
        assert!(r <= 5e-3 && r < prev, "n={n}: {r}");
        prev = r;
    }
}

#[test]
fn every_family_commutes_with_its_generator() {
    let a = lap(8);
    let g = TimeGrid::new(1.0, 20).unwrap();
    let k = KernelSpec::fractional(0.5);
    for m in registry() {
        let f = m.compute(&a, &k, &g).unwrap();
        assert!(f.commutation_defect(&a) <= 1e-8, "{}", m.name());
        assert_eq!(f.mats[0], nalgebra::DMatrix::identity(8, 8));
    }
}

#[test]
fn yosida_convergence_scalar_and_zero() {
    let ml = method_by_name("ml_spectral").unwrap();
    let g = TimeGrid::new(1.0, 100).unwrap();
    let a = Operator::scalar(-1.0).unwrap();
    let rep = convergence_study(
        &a,
        &KernelSpec::ConstantOne,
        &g,
        &[2.0, 8.0, 32.0, 128.0],
        &default_probes(1),
        ml.as_ref(),
    )
    .unwrap();
    assert!(rep.strictly_decreasing());
    assert!(rep.reduction() < 0.05, "{:?}", rep.errors());
    let z = Operator::scalar(0.0).unwrap();
    let rep = convergence_study(
        &z,
        &KernelSpec::fractional(0.5),
        &g,
        &[2.0, 8.0],
        &default_probes(1),
        ml.as_ref(),
    )
    .unwrap();
    assert!(rep.errors().iter().all(|&e| e == 0.0));
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf)
        .unwrap()
        .starts_with("n,err,sup_norm\n2,"));
}

#[test]
fn yosida_convergence_laplacian_half_order() {
    let ml = method_by_name("ml_spectral").unwrap();
    let g = TimeGrid::new(1.0, 100).unwrap();
    let a = lap(20);
    let rep = convergence_study(
        &a,
        &KernelSpec::fractional(0.5),
        &g,
        &[2.0, 8.0, 32.0, 128.0, 512.0],
        &default_probes(20),
        ml.as_ref(),
    )
    .unwrap();
    assert!(rep.strictly_decreasing(), "{:?}", rep.errors());
    for r in &rep.rows {
        assert!(r.sup_norm <= 1.0 + 1e-9);
    }
}

#[test]
fn growth_fit_of_fractional_exponential() {
    // E_{1/2}(t^{1/2}) grows like 2 e^t
    let a = Operator::scalar(1.0).unwrap();
    let g = TimeGrid::new(30.0, 300).unwrap();
    let f = resolvent_ml(&a, 0.5, &g).unwrap();
    let (m, w) = growth_bound_fit(&f);
    assert!((w - 1.0).abs() < 0.05, "omega={w}");
    assert!(m >= 1.0);
}

#[test]
fn subordination_runtime_is_modest() {
    let t0 = Instant::now();
    let a = lap(20);
    let g = TimeGrid::new(2.0, 200).unwrap();
    resolvent_subordination(&a, 0.5, &g, &SubordinationQuad::default()).unwrap();
    assert!(t0.elapsed().as_secs_f64() < 20.0);
}
