use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{op_norm, MethodTag, ResolventMethod};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::operators::{yosida, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: f64,
    /// `max_k max_x ||S_n(t_k) x - S(t_k) x||`
    pub err: f64,
    /// `max_k ||S_n(t_k)||`
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub method: MethodTag,
    pub grid: TimeGrid,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.err).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].err < w[0].err)
    }

    /// `err(last) / err(first)`.
    pub fn reduction(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.err / a.err,
            _ => f64::NAN,
        }
    }

    /// Columns `n,err,sup_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["n", "err", "sup_norm"]).map_err(io)?;
        for r in &self.rows {
            w.write_record(&[
                format!("{}", r.n),
                format!("{:.17e}", r.err),
                format!("{:.17e}", r.sup_norm),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Standard basis up to dimension 50, else 10 fixed-seed random unit vectors.
pub fn default_probes(dim: usize) -> Vec<DVector<f64>> {
    if dim <= 50 {
        return (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f90be5);
    (0..10)
        .map(|_| {
            let v: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let n = v.norm();
            v / n
        })
        .collect()
}

/// Yosida parameters used when none are given; log-spaced over three decades.
pub const DEFAULT_N_LIST: [f64; 5] = [2.0, 8.0, 32.0, 128.0, 512.0];

/// Distance between the families of `A_n = yosida(A, n)` and of `A`, as a
/// sup over the whole grid, for each `n` in `n_list`.
pub fn convergence_study(
    a: &Operator,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    n_list: &[f64],
    probes: &[DVector<f64>],
    method: &dyn ResolventMethod,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() {
        return Err(Error::param("n_list", "must not be empty"));
    }
    for x in probes {
        if x.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: x.len(),
            });
        }
        if (x.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::param("probe_vectors", "probes must have unit norm"));
        }
    }
    let p = DMatrix::from_columns(probes);
    let reference = method.compute(a, kernel, grid)?;
    let reference: Vec<DMatrix<f64>> = reference.mats.iter().map(|s| s * &p).collect();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let an = yosida(a, n)?;
        let fam = method.compute(&an, kernel, grid)?;
        let mut err: f64 = 0.0;
        let mut sup_norm: f64 = 0.0;
        for (s, r) in fam.mats.iter().zip(&reference) {
            let diff = s * &p - r;
            for col in diff.column_iter() {
                err = err.max(col.norm());
            }
            sup_norm = sup_norm.max(op_norm(s));
        }
        rows.push(ConvergenceRow { n, err, sup_norm });
    }
    Ok(ConvergenceReport {
        method: method.tag(),
        grid: *grid,
        rows,
    })
}
