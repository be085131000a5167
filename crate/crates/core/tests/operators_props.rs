use fracvolt_core::operators::{
    adjoint, build_operator, resolvent_op, semigroup, yosida, Operator, OperatorSpec,
};
use nalgebra::DVector;
use std::f64::consts::PI;

fn lap(n: usize) -> Operator {
    build_operator(&OperatorSpec::Laplacian1d { n, length: PI }).unwrap()
}

fn non_normal() -> Operator {
    build_operator(&OperatorSpec::Dense {
        matrix: vec![
            vec![-1.0, 2.0, 0.0],
            vec![0.0, -0.5, 1.0],
            vec![0.3, 0.0, -2.0],
        ],
    })
    .unwrap()
}

#[test]
fn laplacian_matrix_matches_its_eigenpairs() {
    let a = lap(10);
    let s = a.spectral().unwrap();
    let rebuilt = s.apply(|l| l);
    assert!((rebuilt - a.matrix()).amax() < 1e-10 * a.norm());
    assert!(s.eigenvalues.iter().all(|&l| l < 0.0));
    // (n+1)^2 / length^2 scaling on the diagonal
    assert!((a.matrix()[(0, 0)] + 2.0 * 121.0 / (PI * PI)).abs() < 1e-12);
}

#[test]
fn resolvent_identity() {
    for a in [lap(10), non_normal()] {
        for (l, m) in [(1.0, 2.5), (0.3, 7.0), (5.0, 40.0)] {
            let rl = resolvent_op(&a, l).unwrap();
            let rm = resolvent_op(&a, m).unwrap();
            let lhs = &rl - &rm;
            let rhs = (&rl * &rm) * (m - l);
            assert!((lhs - rhs).amax() < 1e-9, "lambda={l} mu={m}");
        }
    }
}

#[test]
fn semigroup_law() {
    for a in [lap(10), non_normal()] {
        for (s, t) in [(0.1, 0.2), (0.5, 1.5), (0.01, 0.7)] {
            let lhs = semigroup(&a, s).unwrap() * semigroup(&a, t).unwrap();
            let rhs = semigroup(&a, s + t).unwrap();
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }
}

#[test]
fn pade_and_spectral_exponentials_agree() {
    let a = lap(20);
    for t in [0.01, 0.3, 1.0] {
        let spec = semigroup(&a, t).unwrap();
        let pade = (a.matrix() * t).exp();
        assert!((spec - pade).amax() < 1e-12, "t={t}");
    }
}

#[test]
fn yosida_converges_on_basis_vectors() {
    let a = lap(10);
    for j in 0..10 {
        let x = DVector::from_fn(10, |i, _| if i == j { 1.0 } else { 0.0 });
        let ax = a.matrix() * &x;
        let mut prev = f64::INFINITY;
        for n in [2.0, 8.0, 32.0, 128.0, 512.0, 1e5] {
            let an = yosida(&a, n).unwrap();
            let e = (an.matrix() * &x - &ax).norm();
            assert!(e < prev, "j={j} n={n}");
            prev = e;
        }
        assert!(prev < 1e-2 * ax.norm());
    }
    let one = Operator::scalar(-1.0).unwrap();
    for n in [2.0, 10.0, 100.0] {
        let e = (yosida(&one, n).unwrap().matrix()[(0, 0)] + 1.0).abs();
        assert!((e - 1.0 / (n + 1.0)).abs() < 1e-15);
    }
}

#[test]
fn yosida_inherits_contraction_bound() {
    let a = lap(20);
    for n in [2.0, 32.0, 512.0] {
        let an = yosida(&a, n).unwrap();
        let s = an.spectral().unwrap();
        for (k, &l) in s.eigenvalues.iter().enumerate() {
            let lk = a.spectral().unwrap().eigenvalues[k];
            assert!(l < 0.0 && l > lk);
        }
        let comm = an.matrix() * a.matrix() - a.matrix() * an.matrix();
        assert!(comm.amax() < 1e-9 * a.norm() * an.norm());
        for t in [0.1, 1.0, 5.0] {
            let norm = semigroup(&an, t).unwrap().singular_values().max();
            assert!(norm <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn dense_yosida_matches_definition() {
    let a = non_normal();
    let n = 16.0;
    let an = yosida(&a, n).unwrap();
    // A_n = n A R(n, A)
    let want = a.matrix() * resolvent_op(&a, n).unwrap() * n;
    assert!((an.matrix() - want).amax() < 1e-10);
}

#[test]
fn adjoint_is_involutive() {
    let a = non_normal();
    assert_eq!(adjoint(&adjoint(&a)), a);
    let l = lap(5);
    assert_eq!(adjoint(&l).matrix(), l.matrix());
}
