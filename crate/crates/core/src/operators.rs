//! Finite-dimensional generators `A`: resolvents, Yosida approximations,
//! semigroups and adjoints.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DIM: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Row-major entries.
    Dense { matrix: Vec<Vec<f64>> },
    /// `V diag(eigenvalues) V^T`; `V = I` when omitted. Eigenvectors are
    /// given as columns.
    Spectral {
        eigenvalues: Vec<f64>,
        #[serde(default)]
        eigenvectors: Option<Vec<Vec<f64>>>,
    },
    /// Dirichlet second difference on `n` interior points of `(0, length)`.
    #[serde(rename = "laplacian_1d")]
    Laplacian1d { n: usize, length: f64 },
}

/// Orthonormal eigen-decomposition `A = V diag(lambda) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectral {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectral {
    /// `V diag(f(lambda_i)) V^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * self.eigenvectors.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<f64>,
    spectral: Option<Spectral>,
    spectral_bound: f64,
}

impl Operator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectral(&self) -> Option<&Spectral> {
        self.spectral.as_ref()
    }

    /// Largest real part of the spectrum (`omega`).
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    /// Induced 2-norm.
    pub fn norm(&self) -> f64 {
        match &self.spectral {
            Some(s) => s.eigenvalues.amax(),
            None => self.matrix.clone().singular_values().max(),
        }
    }

    /// Scalar operator `A = lambda` on a one-dimensional space.
    pub fn scalar(lambda: f64) -> Result<Self> {
        build_operator(&OperatorSpec::Spectral {
            eigenvalues: vec![lambda],
            eigenvectors: None,
        })
    }

    fn from_spectral(spectral: Spectral) -> Result<Self> {
        let matrix = spectral.apply(|l| l);
        let bound = spectral.eigenvalues.max();
        let op = Operator {
            matrix,
            spectral: Some(spectral),
            spectral_bound: bound,
        };
        op.check_spectral()?;
        Ok(op)
    }

    fn from_dense(matrix: DMatrix<f64>) -> Result<Self> {
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym <= 1e-14 * scale {
            let sym = 0.5 * (&matrix + matrix.transpose());
            let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)
                .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
            let op = Operator {
                spectral_bound: eig.eigenvalues.max(),
                spectral: Some(Spectral {
                    eigenvalues: eig.eigenvalues,
                    eigenvectors: eig.eigenvectors,
                }),
                matrix,
            };
            op.check_spectral()?;
            return Ok(op);
        }
        let spectral_bound = spectral_abscissa(&matrix);
        Ok(Operator {
            matrix,
            spectral: None,
            spectral_bound,
        })
    }

    fn check_spectral(&self) -> Result<()> {
        let Some(s) = &self.spectral else {
            return Ok(());
        };
        let n = self.dim();
        let v = &s.eigenvectors;
        let orth = (v.transpose() * v - DMatrix::identity(n, n)).amax();
        if orth > 1e-12 {
            return Err(Error::Eigen(format!(
                "eigenvectors not orthonormal: |V^T V - I| = {orth:e}"
            )));
        }
        let mut vd = v.clone();
        for (j, mut col) in vd.column_iter_mut().enumerate() {
            col *= s.eigenvalues[j];
        }
        let res = (&self.matrix * v - vd).amax();
        let scale = self.matrix.amax().max(1.0);
        if res > 1e-10 * scale {
            return Err(Error::Eigen(format!("|A V - V D| = {res:e}")));
        }
        Ok(())
    }
}

/// Max real part of the eigenvalues via a real Schur form; falls back to the
/// logarithmic 2-norm, an upper bound, if the iteration fails.
fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    match Schur::try_new(m.clone(), 1e-15, 10_000) {
        Some(s) => s
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max),
        None => SymmetricEigen::new(0.5 * (m + m.transpose()))
            .eigenvalues
            .max(),
    }
}

pub fn build_operator(spec: &OperatorSpec) -> Result<Operator> {
    build_operator_with_limit(spec, DEFAULT_MAX_DIM)
}

pub fn build_operator_with_limit(spec: &OperatorSpec, max_dim: usize) -> Result<Operator> {
    let dim = match spec {
        OperatorSpec::Dense { matrix } => matrix.len(),
        OperatorSpec::Spectral { eigenvalues, .. } => eigenvalues.len(),
        OperatorSpec::Laplacian1d { n, .. } => *n,
    };
    if dim == 0 || dim > max_dim {
        return Err(Error::param(
            "dim",
            format!("must be in 1..={max_dim}, got {dim}"),
        ));
    }
    match spec {
        OperatorSpec::Dense { matrix } => {
            if let Some(row) = matrix.iter().find(|r| r.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("matrix", "entries must be finite"));
            }
            Operator::from_dense(m)
        }
        OperatorSpec::Spectral {
            eigenvalues,
            eigenvectors,
        } => {
            if eigenvalues.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("eigenvalues", "must be finite"));
            }
            let v = match eigenvectors {
                None => DMatrix::identity(dim, dim),
                Some(cols) => {
                    if cols.len() != dim || cols.iter().any(|c| c.len() != dim) {
                        return Err(Error::param(
                            "eigenvectors",
                            format!("must be {dim} columns of length {dim}"),
                        ));
                    }
                    DMatrix::from_fn(dim, dim, |i, j| cols[j][i])
                }
            };
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("eigenvectors", "must be finite"));
            }
            Operator::from_spectral(Spectral {
                eigenvalues: DVector::from_column_slice(eigenvalues),
                eigenvectors: v,
            })
        }
        OperatorSpec::Laplacian1d { n, length } => {
            if !(length.is_finite() && *length > 0.0) {
                return Err(Error::param(
                    "length",
                    format!("must be finite and > 0, got {length}"),
                ));
            }
            laplacian_1d(*n, *length)
        }
    }
}

fn laplacian_1d(n: usize, length: f64) -> Result<Operator> {
    let np1 = (n + 1) as f64;
    let h = length / np1;
    let c = 1.0 / (h * h);
    let matrix = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * c,
        1 => c,
        _ => 0.0,
    });
    // closed-form eigenpairs of the Dirichlet second difference
    let eigenvalues = DVector::from_fn(n, |k, _| {
        let s = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * np1)).sin();
        -4.0 * c * s * s
    });
    let norm = (2.0 / np1).sqrt();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| {
        norm * (std::f64::consts::PI * ((i + 1) * (k + 1)) as f64 / np1).sin()
    });
    let op = Operator {
        spectral_bound: eigenvalues.max(),
        spectral: Some(Spectral {
            eigenvalues,
            eigenvectors,
        }),
        matrix,
    };
    op.check_spectral()?;
    Ok(op)
}

/// `(lambda I - A)^{-1}`, verified by its residual.
pub fn resolvent_op(a: &Operator, lambda: f64) -> Result<DMatrix<f64>> {
    let n = a.dim();
    let shifted = DMatrix::identity(n, n) * lambda - &a.matrix;
    let r = match &a.spectral {
        Some(s) => {
            let gap = s
                .eigenvalues
                .iter()
                .map(|l| (lambda - l).abs())
                .fold(f64::INFINITY, f64::min);
            if gap <= 1e-14 * lambda.abs().max(1.0) {
                return Err(Error::Singular(format!(
                    "lambda = {lambda} is an eigenvalue"
                )));
            }
            s.apply(|l| 1.0 / (lambda - l))
        }
        None => shifted.clone().lu().try_inverse().ok_or_else(|| {
            Error::Singular(format!("lambda I - A is singular at lambda = {lambda}"))
        })?,
    };
    let cond = shifted.lp_norm(1) * r.lp_norm(1);
    let res = (&shifted * &r - DMatrix::identity(n, n)).amax();
    if !cond.is_finite() || res > 1e-10 * cond.max(1.0) {
        return Err(Error::Singular(format!(
            "resolvent residual {res:e} at condition {cond:e} (lambda = {lambda})"
        )));
    }
    Ok(r)
}

/// Yosida approximation `A_n = n^2 R(n, A) - n I`.
pub fn yosida(a: &Operator, n: f64) -> Result<Operator> {
    if !(n.is_finite() && n > a.spectral_bound) {
        return Err(Error::param(
            "n",
            format!(
                "must exceed the spectral bound {}, got {n}",
                a.spectral_bound
            ),
        ));
    }
    match &a.spectral {
        Some(s) => Operator::from_spectral(Spectral {
            eigenvalues: s.eigenvalues.map(|l| n * l / (n - l)),
            eigenvectors: s.eigenvectors.clone(),
        }),
        None => {
            let r = resolvent_op(a, n)?;
            let d = a.dim();
            let m = r * (n * n) - DMatrix::identity(d, d) * n;
            let spectral_bound = spectral_abscissa(&m);
            Ok(Operator {
                matrix: m,
                spectral: None,
                spectral_bound,
            })
        }
    }
}

/// `e^{tA}`; the identity at `t = 0`.
pub fn semigroup(a: &Operator, t: f64) -> Result<DMatrix<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("must be finite and >= 0, got {t}"),
        ));
    }
    let n = a.dim();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    if t * a.spectral_bound > 700.0 {
        return Err(Error::Overflow(format!(
            "e^(tA) with t * omega = {} exceeds the f64 range",
            t * a.spectral_bound
        )));
    }
    let m = match &a.spectral {
        Some(s) => s.apply(|l| (t * l).exp()),
        // scaling and squaring with a Pade approximant
        None => (&a.matrix * t).exp(),
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("e^(tA) is not finite at t = {t}")));
    }
    Ok(m)
}

pub fn adjoint(a: &Operator) -> Operator {
    Operator {
        matrix: a.matrix.transpose(),
        // only symmetric operators carry spectral data
        spectral: a.spectral.clone(),
        spectral_bound: a.spectral_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> Operator {
        build_operator(&OperatorSpec::Dense {
            matrix: rows.iter().map(|r| r.to_vec()).collect(),
        })
        .unwrap()
    }

    #[test]
    fn laplacian_closed_form_eigenvalues() {
        let a = build_operator(&OperatorSpec::Laplacian1d {
            n: 3,
            length: std::f64::consts::PI,
        })
        .unwrap();
        let c = 16.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let r2 = 2f64.sqrt();
        let mut want = [-c * (2.0 - r2), -c * 2.0, -c * (2.0 + r2)];
        let mut got: Vec<f64> = a.spectral().unwrap().eigenvalues.iter().copied().collect();
        got.sort_by(|x, y| y.total_cmp(x));
        want.sort_by(|x, y| y.total_cmp(x));
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-13, "{g} vs {w}");
        }
        assert!(a.spectral_bound() < 0.0);
    }

    #[test]
    fn dense_examples() {
        assert_eq!(dense(&[&[0.0, 0.0], &[0.0, 0.0]]).spectral_bound(), 0.0);
        let d = dense(&[&[-1.0, 0.0], &[0.0, -2.0]]);
        let mut ev: Vec<f64> = d.spectral().unwrap().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev, vec![-2.0, -1.0]);
        let nil = dense(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(nil.spectral().is_none());
        assert!(nil.spectral_bound().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_operator(&OperatorSpec::Dense {
            matrix: vec![vec![1.0, f64::NAN], vec![0.0, 1.0]]
        })
        .is_err());
        assert!(build_operator(&OperatorSpec::Laplacian1d { n: 0, length: 1.0 }).is_err());
        assert!(
            build_operator_with_limit(&OperatorSpec::Laplacian1d { n: 30, length: 1.0 }, 20)
                .is_err()
        );
        assert!(build_operator(&OperatorSpec::Spectral {
            eigenvalues: vec![1.0, 2.0],
            eigenvectors: Some(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
        })
        .is_err());
    }

    #[test]
    fn resolvent_examples() {
        let z = Operator::scalar(0.0).unwrap();
        assert_eq!(resolvent_op(&z, 2.0).unwrap()[(0, 0)], 0.5);
        let m = Operator::scalar(-1.0).unwrap();
        assert_eq!(resolvent_op(&m, 1.0).unwrap()[(0, 0)], 0.5);
        assert!(resolvent_op(&m, -1.0).is_err());
        let nil = dense(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(resolvent_op(&nil, 1.0).is_err());
    }

    #[test]
    fn yosida_examples() {
        let a = Operator::scalar(-2.0).unwrap();
        let an = yosida(&a, 10.0).unwrap();
        assert!((an.matrix()[(0, 0)] + 5.0 / 3.0).abs() < 1e-15);
        let z = Operator::scalar(0.0).unwrap();
        assert_eq!(yosida(&z, 3.0).unwrap().matrix()[(0, 0)], 0.0);
        assert!(yosida(&z, 0.0).is_err());
        let one = Operator::scalar(-1.0).unwrap();
        let mut prev = 0.0;
        for n in [10.0, 100.0, 1000.0] {
            let v = yosida(&one, n).unwrap().matrix()[(0, 0)];
            assert!((v + n / (n + 1.0)).abs() < 1e-15);
            assert!((v + 1.0).abs() < (prev + 1.0f64).abs() || prev == 0.0);
            prev = v;
        }
    }

    #[test]
    fn semigroup_examples() {
        let a = Operator::scalar(-1.0).unwrap();
        assert_eq!(semigroup(&a, 0.0).unwrap()[(0, 0)], 1.0);
        assert!((semigroup(&a, 1.0).unwrap()[(0, 0)] - 0.36787944117144233).abs() < 1e-16);
        assert!(matches!(
            semigroup(&Operator::scalar(1.0).unwrap(), 800.0),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn adjoint_transposes() {
        let a = dense(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let at = adjoint(&a);
        assert_eq!(at.matrix()[(1, 0)], 1.0);
        assert_eq!(at.matrix()[(0, 1)], 0.0);
        assert_eq!(adjoint(&at), a);
    }
}
