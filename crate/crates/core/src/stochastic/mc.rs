use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conv::{covariance_value, ito_isometry_value, ConvolutionPlan};
use super::{NoiseSpec, WienerIncrements};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::operators::{yosida, Operator};
use crate::resolvent::{ResolventFamily, ResolventMethod};

const CHUNK: usize = 256;

/// Runs `f` for paths `0..n_paths` in parallel and feeds the results to
/// `sink` in path order.
pub(crate) fn for_each_path<T, F, S>(n_paths: usize, f: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
    S: FnMut(T),
{
    let mut start = 0;
    while start < n_paths {
        let end = (start + CHUNK).min(n_paths);
        let chunk: Vec<T> = (start as u64..end as u64)
            .into_par_iter()
            .map(&f)
            .collect::<Result<_>>()?;
        chunk.into_iter().for_each(&mut sink);
        start = end;
    }
    Ok(())
}

/// Sample mean and its standard error.
pub(crate) fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub t: f64,
    pub mean: f64,
    pub var: f64,
    pub analytic_value: f64,
    pub stderr: f64,
}

impl EnsembleRow {
    /// `|mean - analytic| / stderr`; zero when both vanish.
    pub fn z_score(&self) -> f64 {
        let d = (self.mean - self.analytic_value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Monte Carlo statistics of `|W^Psi(t_k)|^2` at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleStats {
    pub fn row_at(&self, t: f64) -> &EnsembleRow {
        &self.rows[self.grid.index_of(t)]
    }

    /// Columns `t,mean,var,analytic_value,stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "mean", "var", "analytic_value", "stderr"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record(&[
                format!("{:.17e}", r.t),
                format!("{:.17e}", r.mean),
                format!("{:.17e}", r.var),
                format!("{:.17e}", r.analytic_value),
                format!("{:.17e}", r.stderr),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Second moment of the convolution against the Ito isometry.
pub fn second_moment_study(
    fam: &ResolventFamily,
    noise: &NoiseSpec,
    seed: u64,
    n_paths: usize,
) -> Result<EnsembleStats> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    let plan = ConvolutionPlan::new(fam, noise)?;
    let grid = fam.grid;
    let mut acc = vec![Welford::default(); grid.len()];
    for_each_path(
        n_paths,
        |p| {
            let incs = WienerIncrements::sample(noise, &grid, seed, p);
            Ok(plan
                .apply(&incs)?
                .values
                .iter()
                .map(|v| v.norm_squared())
                .collect::<Vec<f64>>())
        },
        |sq: Vec<f64>| {
            for (a, x) in acc.iter_mut().zip(sq) {
                a.push(x);
            }
        },
    )?;
    let rows = acc
        .iter()
        .enumerate()
        .map(|(k, w)| {
            Ok(EnsembleRow {
                t: grid.t(k),
                mean: w.mean,
                var: w.var(),
                analytic_value: ito_isometry_value(fam, noise, k)?,
                stderr: (w.var() / n_paths as f64).sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleStats {
        grid,
        n_paths,
        seed,
        rows,
    })
}

/// Sample second-moment matrix of `W^Psi(t_k)` against its closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheck {
    pub sample: DMatrix<f64>,
    pub analytic: DMatrix<f64>,
    /// largest entrywise `|sample - analytic| / se`, with the Gaussian
    /// standard error `sqrt((S_ii S_jj + S_ij^2) / n)`
    pub max_z: f64,
}

pub fn covariance_study(
    fam: &ResolventFamily,
    noise: &NoiseSpec,
    t_index: usize,
    seed: u64,
    n_paths: usize,
) -> Result<CovarianceCheck> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    let analytic = covariance_value(fam, noise, t_index)?;
    let plan = ConvolutionPlan::new(fam, noise)?;
    let d = fam.dim();
    let mut sample = DMatrix::zeros(d, d);
    for_each_path(
        n_paths,
        |p| {
            let incs = WienerIncrements::sample(noise, &fam.grid, seed, p);
            Ok(plan.apply(&incs)?.values.swap_remove(t_index))
        },
        |x: DVector<f64>| sample += &x * x.transpose(),
    )?;
    sample /= n_paths as f64;
    let mut max_z: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let diff = (sample[(i, j)] - analytic[(i, j)]).abs();
            if diff == 0.0 {
                continue;
            }
            let se = ((analytic[(i, i)] * analytic[(j, j)] + analytic[(i, j)].powi(2))
                / n_paths as f64)
                .sqrt();
            max_z = max_z.max(diff / se);
        }
    }
    Ok(CovarianceCheck {
        sample,
        analytic,
        max_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConvergenceRow {
    pub n: f64,
    /// `E sup_t |W_S - W_{S_n}|^p`
    pub mean: f64,
    pub stderr: f64,
    /// `sup_t E |W_S - W_{S_n}|^2`
    pub sup_mean_sq: f64,
    /// Paired mean of `sup^p(n) - sup^p(next n)` and its standard error;
    /// absent on the last row.
    pub paired_diff: Option<f64>,
    pub paired_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConvergenceReport {
    pub p: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    pub rows: Vec<McConvergenceRow>,
}

impl McConvergenceReport {
    /// Every step down the list lowers the estimate by more than
    /// `k` paired standard errors. Identically zero estimates do not.
    pub fn decreasing_beyond(&self, k: f64) -> bool {
        self.rows
            .iter()
            .filter_map(|r| Some((r.paired_diff?, r.paired_stderr?)))
            .all(|(d, se)| d > k * se)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    /// Columns `n,mean,stderr,sup_mean_sq,paired_diff,paired_stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([
            "n",
            "mean",
            "stderr",
            "sup_mean_sq",
            "paired_diff",
            "paired_stderr",
        ])
        .map_err(io)?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.17e}"));
        for r in &self.rows {
            w.write_record(&[
                format!("{}", r.n),
                format!("{:.17e}", r.mean),
                format!("{:.17e}", r.stderr),
                format!("{:.17e}", r.sup_mean_sq),
                opt(r.paired_diff),
                opt(r.paired_stderr),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Coupled Monte Carlo estimate of `E sup_t |W_S(t) - W_{S_n}(t)|^p` with
/// `S_n` the family of the Yosida approximation `A_n`. Every `n` sees the
/// same increments.
#[allow(clippy::too_many_arguments)]
pub fn convolution_convergence(
    a: &Operator,
    kernel: &KernelSpec,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    n_list: &[f64],
    p: f64,
    n_paths: usize,
    seed: u64,
    method: &dyn ResolventMethod,
) -> Result<McConvergenceReport> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must be >= 2, got {p}")));
    }
    if n_list.is_empty() || n_paths < 2 {
        return Err(Error::param(
            "n_list/n_paths",
            "need a nonempty n_list and at least 2 paths",
        ));
    }
    noise.validate(a.dim())?;
    let reference = method.compute(a, kernel, grid)?;
    let plans = n_list
        .iter()
        .map(|&n| {
            let fam = method.compute(&yosida(a, n)?, kernel, grid)?;
            ConvolutionPlan::difference(&reference, &fam, noise)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = plans.len();
    let mut sups: Vec<Vec<f64>> = vec![Vec::with_capacity(n_paths); m];
    let mut sq = vec![vec![0.0; grid.len()]; m];
    for_each_path(
        n_paths,
        |path| {
            let incs = WienerIncrements::sample(noise, grid, seed, path);
            plans
                .iter()
                .map(|plan| {
                    let d = plan.apply(&incs)?;
                    let sq: Vec<f64> = d.values.iter().map(|v| v.norm_squared()).collect();
                    let sup = sq.iter().fold(0.0f64, |s, &x| s.max(x)).powf(p / 2.0);
                    Ok((sup, sq))
                })
                .collect::<Result<Vec<_>>>()
        },
        |per_n: Vec<(f64, Vec<f64>)>| {
            for (i, (s, q)) in per_n.into_iter().enumerate() {
                sups[i].push(s);
                for (a, b) in sq[i].iter_mut().zip(q) {
                    *a += b;
                }
            }
        },
    )?;
    let rows = (0..m)
        .map(|i| {
            let (mean, stderr) = mean_and_stderr(&sups[i]);
            let (paired_diff, paired_stderr) = if i + 1 < m {
                let d: Vec<f64> = sups[i]
                    .iter()
                    .zip(&sups[i + 1])
                    .map(|(a, b)| a - b)
                    .collect();
                let (md, se) = mean_and_stderr(&d);
                (Some(md), Some(se))
            } else {
                (None, None)
            };
            McConvergenceRow {
                n: n_list[i],
                mean,
                stderr,
                sup_mean_sq: sq[i].iter().fold(0.0f64, |s, &x| s.max(x)) / n_paths as f64,
                paired_diff,
                paired_stderr,
            }
        })
        .collect();
    Ok(McConvergenceReport {
        p,
        n_paths,
        seed,
        grid: *grid,
        rows,
    })
}
