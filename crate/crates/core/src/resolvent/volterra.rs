use nalgebra::{DMatrix, DVector};

use super::{fractional_order, MethodTag, ResolventFamily};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{KernelSpec, ProductWeights};
use crate::operators::Operator;

/// Marching `(I - w0 A) S_k = I + A sum_{j<k} W_{k,j} S_j`, `S_0 = I`.
///
/// The weights carry starting corrections for fractional kernels, so the
/// first `start_len - 1` unknowns are solved together as one block system
/// before the plain march. With spectral data every eigenvalue marches as
/// a scalar; otherwise the matrix recursion runs with one LU factorization.
pub fn resolvent_volterra_step(
    a: &Operator,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<ResolventFamily> {
    let w = ProductWeights::corrected(kernel, grid)?;
    let d = a.dim();
    let n = grid.len();
    let mats = match a.spectral() {
        Some(s) => {
            let paths = s
                .eigenvalues
                .iter()
                .map(|&l| march_scalar(&w, l, n))
                .collect::<Result<Vec<_>>>()?;
            (0..n)
                .map(|k| {
                    if k == 0 {
                        return DMatrix::identity(d, d);
                    }
                    let mut v = s.eigenvectors.clone();
                    for (j, mut col) in v.column_iter_mut().enumerate() {
                        col *= paths[j][k];
                    }
                    v * s.eigenvectors.transpose()
                })
                .collect()
        }
        None => march_dense(&w, a.matrix(), n)?,
    };
    Ok(ResolventFamily {
        grid: *grid,
        mats,
        alpha: fractional_order(kernel),
        method: MethodTag::VolterraStep,
        fitted_type: None,
    })
}

fn march_scalar(w: &ProductWeights, l: f64, n: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let m = w.start_len();
    if m > 1 {
        // rows k = 1..m-1: x_k - l sum_{j>=1} W_{k,j} x_j = 1 + l W_{k,0}
        let b = m - 1;
        let sys = DMatrix::from_fn(b, b, |r, c| {
            let (k, j) = (r + 1, c + 1);
            f64::from(u8::from(k == j)) - l * w.weight(k, j)
        });
        let rhs = DVector::from_fn(b, |r, _| 1.0 + l * w.weight(r + 1, 0));
        let sol = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("starting block for lambda = {l}")))?;
        x[1..m].copy_from_slice(sol.as_slice());
    }
    let denom = 1.0 - w.diagonal() * l;
    if !(denom.abs() > 1e-14) {
        return Err(Error::Singular(format!(
            "1 - w0 lambda = {denom} for lambda = {l}"
        )));
    }
    for k in m.max(1)..n {
        let h = w.history(k, &x);
        x[k] = (1.0 + l * h) / denom;
    }
    Ok(x)
}

fn march_dense(w: &ProductWeights, a: &DMatrix<f64>, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut mats = vec![DMatrix::<f64>::zeros(d, d); n];
    mats[0] = id.clone();
    let m = w.start_len();
    if m > 1 {
        let b = m - 1;
        let mut sys = DMatrix::<f64>::zeros(b * d, b * d);
        let mut rhs = DMatrix::<f64>::zeros(b * d, d);
        for r in 0..b {
            let k = r + 1;
            for c in 0..b {
                let j = c + 1;
                let mut blk = -a * w.weight(k, j);
                if k == j {
                    blk += &id;
                }
                sys.view_mut((r * d, c * d), (d, d)).copy_from(&blk);
            }
            rhs.view_mut((r * d, 0), (d, d))
                .copy_from(&(&id + a * w.weight(k, 0)));
        }
        let sol = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("starting block system".into()))?;
        for r in 0..b {
            mats[r + 1] = sol.view((r * d, 0), (d, d)).into_owned();
        }
    }
    let lu = (&id - a * w.diagonal()).lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("I - w0 A is singular".into()));
    }
    for k in m.max(1)..n {
        let h = w.history(k, &mats);
        let rhs = &id + a * h;
        mats[k] = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("I - w0 A is singular".into()))?;
    }
    Ok(mats)
}
