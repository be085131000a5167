use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::conv::{CausalConv, ConvolutionPlan};
use super::mc::{for_each_path, mean_and_stderr};
use super::{NoiseSpec, SamplePath, WienerIncrements};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{KernelSpec, ProductWeights};
use crate::operators::Operator;
use crate::resolvent::ResolventMethod;

/// Per-path `sup_k` residuals of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub per_path_sup: Vec<f64>,
    pub mean_sup: f64,
    pub grid: TimeGrid,
    /// `log2(mean_sup(coarse) / mean_sup(this))` against the previous level.
    pub refinement_order: Option<f64>,
}

impl ResidualReport {
    pub fn new(per_path_sup: Vec<f64>, grid: TimeGrid) -> Self {
        let mean_sup = per_path_sup.iter().sum::<f64>() / per_path_sup.len().max(1) as f64;
        Self {
            per_path_sup,
            mean_sup,
            grid,
            refinement_order: None,
        }
    }

    pub fn stderr(&self) -> f64 {
        mean_and_stderr(&self.per_path_sup).1
    }

    /// Columns `path,sup_residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["path", "sup_residual"]).map_err(io)?;
        for (p, r) in self.per_path_sup.iter().enumerate() {
            w.write_record(&[p.to_string(), format!("{r:.17e}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// `X(t_k) - int_0^{t_k} a(t_k - s) A X(s) ds - Z(t_k)` with the integral by
/// product integration of the realized path.
#[derive(Clone)]
pub struct ResidualEvaluator {
    grid: TimeGrid,
    a: DMatrix<f64>,
    /// `W_{k,j}` for `j >= 1` depends on `k - j` only
    toeplitz: CausalConv,
    /// `W_{k,0}`
    boundary: Vec<f64>,
}

impl ResidualEvaluator {
    pub fn new(a: &Operator, kernel: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        let w = ProductWeights::new(kernel, grid)?;
        let n = grid.steps();
        let mut c: Vec<f64> = (0..n).map(|i| w.weight(n, n - i)).collect();
        c.push(0.0);
        let mut boundary = vec![0.0];
        boundary.extend((1..=n).map(|k| w.weight(k, 0)));
        Ok(Self {
            grid: *grid,
            a: a.matrix().clone(),
            toeplitz: CausalConv::scalar(&c),
            boundary,
        })
    }

    /// `int_0^{t_k} a(t_k - s) X(s) ds` at every node.
    pub fn integral(&self, path: &SamplePath) -> Result<Vec<DVector<f64>>> {
        self.grid.ensure_same(&path.grid, "residual path")?;
        if path.values.first().map(|v| v.len()) != Some(self.a.nrows()) {
            return Err(Error::DimensionMismatch {
                expected: self.a.nrows(),
                got: path.values.first().map_or(0, |v| v.len()),
            });
        }
        let x0 = path.values[0].clone();
        let mut v = path.values.clone();
        v[0].fill(0.0);
        let mut out = self.toeplitz.apply(&v);
        out[0].fill(0.0);
        if x0.iter().any(|&x| x != 0.0) {
            for (o, b) in out.iter_mut().zip(&self.boundary).skip(1) {
                o.axpy(*b, &x0, 1.0);
            }
        }
        Ok(out)
    }

    fn check_noise(&self, path: &SamplePath, z: &SamplePath) -> Result<()> {
        path.grid.ensure_same(&z.grid, "noise path")?;
        if z.values.len() != path.values.len() {
            return Err(Error::GridMismatch("noise path length".into()));
        }
        Ok(())
    }

    /// `sup_k |X - a*(AX) - Z|`.
    pub fn strong(&self, path: &SamplePath, z: &SamplePath) -> Result<f64> {
        self.check_noise(path, z)?;
        let i = self.integral(path)?;
        Ok(path
            .values
            .iter()
            .zip(&i)
            .zip(&z.values)
            .map(|((x, ik), zk)| (x - &self.a * ik - zk).norm())
            .fold(0.0, f64::max))
    }

    /// `sup_k (sum_xi <X - Z, xi> - <a*X, A^T xi>)^2)^{1/2}`.
    ///
    /// For an orthonormal basis this is the strong residual, for a single
    /// unit vector its projection.
    pub fn weak(
        &self,
        path: &SamplePath,
        z: &SamplePath,
        test_vectors: &[DVector<f64>],
    ) -> Result<f64> {
        self.check_noise(path, z)?;
        let i = self.integral(path)?;
        let at: Vec<DVector<f64>> = test_vectors.iter().map(|xi| self.a.tr_mul(xi)).collect();
        Ok(path
            .values
            .iter()
            .zip(&i)
            .zip(&z.values)
            .map(|((x, ik), zk)| {
                test_vectors
                    .iter()
                    .zip(&at)
                    .map(|(xi, axi)| (x.dot(xi) - ik.dot(axi) - zk.dot(xi)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }
}

fn pair_check(paths: &[SamplePath], z: &[SamplePath]) -> Result<TimeGrid> {
    if paths.is_empty() || paths.len() != z.len() {
        return Err(Error::param("paths", "need one noise path per sample path"));
    }
    Ok(paths[0].grid)
}

pub fn strong_residual(
    paths: &[SamplePath],
    a: &Operator,
    kernel: &KernelSpec,
    z: &[SamplePath],
) -> Result<ResidualReport> {
    let grid = pair_check(paths, z)?;
    let ev = ResidualEvaluator::new(a, kernel, &grid)?;
    let sups = paths
        .iter()
        .zip(z)
        .map(|(p, zp)| ev.strong(p, zp))
        .collect::<Result<_>>()?;
    Ok(ResidualReport::new(sups, grid))
}

pub fn weak_residual(
    paths: &[SamplePath],
    a: &Operator,
    kernel: &KernelSpec,
    z: &[SamplePath],
    test_vectors: &[DVector<f64>],
) -> Result<ResidualReport> {
    let grid = pair_check(paths, z)?;
    for xi in test_vectors {
        if xi.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: xi.len(),
            });
        }
        if (xi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::param("test_vectors", "must have unit norm"));
        }
    }
    let ev = ResidualEvaluator::new(a, kernel, &grid)?;
    let sups = paths
        .iter()
        .zip(z)
        .map(|(p, zp)| ev.weak(p, zp, test_vectors))
        .collect::<Result<_>>()?;
    Ok(ResidualReport::new(sups, grid))
}

/// Strong residuals of the mild convolution on `coarse` and `levels - 1`
/// successive halvings, every path sharing one noise realization across
/// levels through Brownian-bridge refinement.
#[allow(clippy::too_many_arguments)]
pub fn refinement_study(
    a: &Operator,
    kernel: &KernelSpec,
    noise: &NoiseSpec,
    coarse: &TimeGrid,
    levels: usize,
    n_paths: usize,
    seed: u64,
    method: &dyn ResolventMethod,
) -> Result<Vec<ResidualReport>> {
    if levels == 0 || n_paths == 0 {
        return Err(Error::param("levels/n_paths", "must be >= 1"));
    }
    noise.validate(a.dim())?;
    let mut grids = vec![*coarse];
    for _ in 1..levels {
        grids.push(grids.last().unwrap().refined());
    }
    let stages = grids
        .iter()
        .map(|g| {
            let fam = method.compute(a, kernel, g)?;
            Ok((
                ConvolutionPlan::new(&fam, noise)?,
                ResidualEvaluator::new(a, kernel, g)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_level = vec![Vec::with_capacity(n_paths); levels];
    for_each_path(
        n_paths,
        |p| {
            let mut incs = WienerIncrements::sample(noise, coarse, seed, p);
            let mut out = Vec::with_capacity(levels);
            for (l, (plan, ev)) in stages.iter().enumerate() {
                if l > 0 {
                    incs = incs.refine(noise);
                }
                let x = plan.apply(&incs)?;
                let z = plan.noise_integral(&incs)?;
                out.push(ev.strong(&x, &z)?);
            }
            Ok(out)
        },
        |sups: Vec<f64>| {
            for (l, s) in sups.into_iter().enumerate() {
                per_level[l].push(s);
            }
        },
    )?;
    let mut reports: Vec<ResidualReport> = per_level
        .into_iter()
        .zip(&grids)
        .map(|(s, g)| ResidualReport::new(s, *g))
        .collect();
    for l in 1..reports.len() {
        let ratio = reports[l - 1].mean_sup / reports[l].mean_sup;
        reports[l].refinement_order = Some(ratio.log2());
    }
    Ok(reports)
}
