use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{MethodTag, ResolventFamily};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operators::Operator;
use crate::specfun::{mittag_leffler, recip_gamma, FracOrder};

/// Without spectral data the matrix series `sum (t^alpha A)^k / Gamma(alpha k + 1)`
/// is summed directly; it is only trusted while `||A|| t_end^alpha` stays below this.
pub const SERIES_NORM_LIMIT: f64 = 1.0;

/// `S(t_k) = E_alpha(t_k^alpha A)`.
pub fn resolvent_ml(a: &Operator, alpha: f64, grid: &TimeGrid) -> Result<ResolventFamily> {
    let order = FracOrder::new(alpha)?;
    let d = a.dim();
    let nodes = grid.nodes();
    let mats: Vec<DMatrix<f64>> = match a.spectral() {
        Some(s) => nodes
            .par_iter()
            .map(|&t| {
                if t == 0.0 {
                    return Ok(DMatrix::identity(d, d));
                }
                let ta = t.powf(alpha);
                let vals = s
                    .eigenvalues
                    .iter()
                    .map(|&l| mittag_leffler(order, ta * l).map(|e| e.value))
                    .collect::<Result<Vec<f64>>>()?;
                let mut v = s.eigenvectors.clone();
                for (j, mut col) in v.column_iter_mut().enumerate() {
                    col *= vals[j];
                }
                Ok(v * s.eigenvectors.transpose())
            })
            .collect::<Result<_>>()?,
        None => {
            let scale = a.norm() * grid.t_end().powf(alpha);
            if scale > SERIES_NORM_LIMIT {
                return Err(Error::param(
                    "operator",
                    format!(
                        "no spectral data and ||A|| t_end^alpha = {scale:.3} exceeds the series limit {SERIES_NORM_LIMIT}"
                    ),
                ));
            }
            nodes
                .par_iter()
                .map(|&t| Ok(ml_series(a.matrix(), t.powf(alpha), alpha)))
                .collect::<Result<_>>()?
        }
    };
    Ok(ResolventFamily {
        grid: *grid,
        mats,
        alpha: Some(alpha),
        method: MethodTag::MlSpectral,
        fitted_type: None,
    })
}

fn ml_series(a: &DMatrix<f64>, ta: f64, alpha: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let mut sum = DMatrix::identity(d, d);
    if ta == 0.0 {
        return sum;
    }
    let x = a * ta;
    let mut power = DMatrix::identity(d, d);
    for k in 1..400 {
        power = &power * &x;
        let term = &power * recip_gamma(alpha * k as f64 + 1.0);
        let tn = term.amax();
        sum += term;
        if tn <= 1e-17 * sum.amax() {
            break;
        }
    }
    sum
}
