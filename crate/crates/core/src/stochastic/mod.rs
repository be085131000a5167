//! Q-Wiener noise, stochastic convolutions and Monte Carlo checks of the
//! solution concepts.
//!
//! All stochastic integrals are left-point (Ito) sums. Every path draws from
//! its own ChaCha substream keyed by `(seed, path, level)`, and ensemble
//! reductions run in path order, so results do not depend on the thread
//! count.

mod conv;
mod mc;
mod residual;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operators::Operator;

pub use conv::{
    covariance_value, ito_isometry_value, mild_solution, noise_integral, stochastic_convolution,
    ConvolutionPlan,
};
pub use mc::{
    convolution_convergence, covariance_study, second_moment_study, CovarianceCheck, EnsembleRow,
    EnsembleStats, McConvergenceReport, McConvergenceRow,
};
pub use residual::{
    refinement_study, strong_residual, weak_residual, ResidualEvaluator, ResidualReport,
};

/// The diffusion coefficient `Psi: U -> H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    /// `U = H`; needs `dim_u == dim`.
    Identity,
    /// `dim x dim_u`, rows.
    Constant { matrix: Vec<Vec<f64>> },
    /// One `dim x dim_u` matrix per node of `grid`, used at left endpoints.
    TimeVarying {
        grid: TimeGrid,
        matrices: Vec<Vec<Vec<f64>>>,
    },
}

/// Noise `Psi dW` with `W` a Q-Wiener process on `R^{dim_u}`, `Q = diag(q_eigs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dim_u: usize,
    pub q_eigs: Vec<f64>,
    pub psi: Psi,
}

/// `Psi` resolved to matrices on a grid.
#[derive(Debug, Clone)]
pub enum PsiSeq {
    Constant(DMatrix<f64>),
    Nodes(Vec<DMatrix<f64>>),
}

impl PsiSeq {
    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        match self {
            PsiSeq::Constant(m) => m,
            PsiSeq::Nodes(v) => &v[k],
        }
    }
}

fn rows_to_matrix(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::param(what, format!("must be {nrows} x {ncols}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::param(what, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl NoiseSpec {
    /// Standard noise on `R^dim`: `Psi = I`, `Q = diag(q_eigs)`.
    pub fn wiener(q_eigs: Vec<f64>) -> Self {
        Self {
            dim_u: q_eigs.len(),
            q_eigs,
            psi: Psi::Identity,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.dim_u == 0 {
            return Err(Error::param("dim_u", "must be >= 1"));
        }
        if self.q_eigs.len() != self.dim_u {
            return Err(Error::param(
                "q_eigs",
                format!("has {} entries, dim_u = {}", self.q_eigs.len(), self.dim_u),
            ));
        }
        if self.q_eigs.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(Error::param("q_eigs", "must be finite and nonnegative"));
        }
        match &self.psi {
            Psi::Identity if self.dim_u != dim => Err(Error::param(
                "psi",
                format!("identity needs dim_u = dim, got {} and {dim}", self.dim_u),
            )),
            Psi::Identity => Ok(()),
            Psi::Constant { matrix } => {
                rows_to_matrix(matrix, dim, self.dim_u, "psi.matrix").map(|_| ())
            }
            Psi::TimeVarying { grid, matrices } => {
                if matrices.len() != grid.len() {
                    return Err(Error::param(
                        "psi.matrices",
                        format!("need one per node ({})", grid.len()),
                    ));
                }
                for m in matrices {
                    rows_to_matrix(m, dim, self.dim_u, "psi.matrices")?;
                }
                Ok(())
            }
        }
    }

    /// `Psi(t_k)` for every node of `grid`.
    pub fn psi_on(&self, dim: usize, grid: &TimeGrid) -> Result<PsiSeq> {
        self.validate(dim)?;
        Ok(match &self.psi {
            Psi::Identity => PsiSeq::Constant(DMatrix::identity(dim, dim)),
            Psi::Constant { matrix } => {
                PsiSeq::Constant(rows_to_matrix(matrix, dim, self.dim_u, "psi.matrix")?)
            }
            Psi::TimeVarying { grid: g, matrices } => {
                g.ensure_same(grid, "psi samples")?;
                PsiSeq::Nodes(
                    matrices
                        .iter()
                        .map(|m| rows_to_matrix(m, dim, self.dim_u, "psi.matrices"))
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    pub fn trace_q(&self) -> f64 {
        self.q_eigs.iter().sum()
    }

    /// `||B Q^{1/2}||_HS^2 = sum_j lambda_j ||B e_j||^2`.
    pub fn hs_norm_sq(&self, b: &DMatrix<f64>) -> f64 {
        b.column_iter()
            .zip(&self.q_eigs)
            .map(|(c, l)| l * c.norm_squared())
            .sum()
    }
}

/// `max_k ||Psi(t_k) Q^{1/2}||_HS^2` and `max_k ||A Psi(t_k) Q^{1/2}||_HS^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseHypotheses {
    pub psi_hs: f64,
    pub a_psi_hs: f64,
}

impl NoiseHypotheses {
    pub fn finite(&self) -> bool {
        self.psi_hs.is_finite() && self.a_psi_hs.is_finite()
    }
}

pub fn noise_hypotheses(
    noise: &NoiseSpec,
    a: &Operator,
    grid: &TimeGrid,
) -> Result<NoiseHypotheses> {
    let psi = noise.psi_on(a.dim(), grid)?;
    let nodes = match &psi {
        PsiSeq::Constant(_) => 1,
        PsiSeq::Nodes(v) => v.len(),
    };
    let mut h = NoiseHypotheses {
        psi_hs: 0.0,
        a_psi_hs: 0.0,
    };
    for k in 0..nodes {
        let p = psi.at(k);
        h.psi_hs = h.psi_hs.max(noise.hs_norm_sq(p));
        h.a_psi_hs = h.a_psi_hs.max(noise.hs_norm_sq(&(a.matrix() * p)));
    }
    Ok(h)
}

/// Generator for `(seed, path, level)`; distinct keys give independent streams.
fn substream(seed: u64, path: u64, level: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&level.to_le_bytes());
    key[16..24].copy_from_slice(b"fracvolt");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}

/// One realization of `dW_k = W(t_{k+1}) - W(t_k)`, `k = 0..steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    pub grid: TimeGrid,
    pub dw: Vec<DVector<f64>>,
    pub seed: u64,
    pub path: u64,
    /// Number of bridge refinements applied to the base draw.
    pub level: u32,
}

impl WienerIncrements {
    /// Karhunen-Loeve draw `dW_k = sum_j sqrt(lambda_j dt) xi_jk e_j`.
    pub fn sample(noise: &NoiseSpec, grid: &TimeGrid, seed: u64, path: u64) -> Self {
        let mut rng = substream(seed, path, 0);
        let sd: Vec<f64> = noise
            .q_eigs
            .iter()
            .map(|l| (l * grid.dt()).sqrt())
            .collect();
        let dw = (0..grid.steps())
            .map(|_| {
                DVector::from_iterator(
                    sd.len(),
                    sd.iter().map(|s| {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        s * xi
                    }),
                )
            })
            .collect();
        Self {
            grid: *grid,
            dw,
            seed,
            path,
            level: 0,
        }
    }

    /// Brownian-bridge midpoint insertion: the same realization on the grid
    /// with every step halved. Summing fine pairs restores `self` exactly
    /// up to one rounding.
    pub fn refine(&self, noise: &NoiseSpec) -> Self {
        let level = self.level + 1;
        let mut rng = substream(self.seed, self.path, level);
        let sd: Vec<f64> = noise
            .q_eigs
            .iter()
            .map(|l| (l * self.grid.dt() / 4.0).sqrt())
            .collect();
        let mut dw = Vec::with_capacity(2 * self.dw.len());
        for d in &self.dw {
            let z = DVector::from_iterator(
                sd.len(),
                sd.iter().map(|s| {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    s * xi
                }),
            );
            let half = d * 0.5;
            dw.push(&half + &z);
            dw.push(half - z);
        }
        Self {
            grid: self.grid.refined(),
            dw,
            seed: self.seed,
            path: self.path,
            level,
        }
    }

    /// Partial sums `W(t_k)`, `W(0) = 0`.
    pub fn cumulative(&self) -> Vec<DVector<f64>> {
        let dim_u = self.dw.first().map_or(0, |d| d.len());
        let mut out = Vec::with_capacity(self.dw.len() + 1);
        let mut acc = DVector::zeros(dim_u);
        out.push(acc.clone());
        for d in &self.dw {
            acc += d;
            out.push(acc.clone());
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dw: self.dw.iter().map(|d| d * c).collect(),
            ..self.clone()
        }
    }
}

/// `n_paths` independent realizations, path `p` from substream `(seed, p)`.
pub fn sample_wiener(
    noise: &NoiseSpec,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<WienerIncrements>> {
    use rayon::prelude::*;
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    if noise.q_eigs.len() != noise.dim_u {
        return Err(Error::param("q_eigs", "length must equal dim_u"));
    }
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|p| WienerIncrements::sample(noise, grid, seed, p))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    MildConvolution,
    Other,
}

/// `X(t_k)` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<DVector<f64>>,
    pub kind: PathKind,
}

impl SamplePath {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_differ() {
        let noise = NoiseSpec::wiener(vec![1.0]);
        let g = TimeGrid::new(1.0, 4).unwrap();
        let a = WienerIncrements::sample(&noise, &g, 7, 0);
        let b = WienerIncrements::sample(&noise, &g, 7, 1);
        let c = WienerIncrements::sample(&noise, &g, 8, 0);
        assert_ne!(a.dw, b.dw);
        assert_ne!(a.dw, c.dw);
        assert_eq!(a, WienerIncrements::sample(&noise, &g, 7, 0));
        assert_ne!(a.refine(&noise).dw[..2], b.refine(&noise).dw[..2]);
    }

    #[test]
    fn bridge_preserves_coarse_sums() {
        let noise = NoiseSpec::wiener(vec![1.0, 0.25]);
        let g = TimeGrid::new(1.0, 8).unwrap();
        let a = WienerIncrements::sample(&noise, &g, 3, 5);
        let f = a.refine(&noise);
        assert_eq!(f.grid.steps(), 16);
        for (k, d) in a.dw.iter().enumerate() {
            assert!((&f.dw[2 * k] + &f.dw[2 * k + 1] - d).amax() < 1e-15);
        }
    }

    #[test]
    fn validation() {
        let mut n = NoiseSpec::wiener(vec![1.0, 1.0]);
        assert!(n.validate(2).is_ok());
        assert!(n.validate(3).is_err());
        n.q_eigs[0] = -1.0;
        assert!(n.validate(2).is_err());
        let c = NoiseSpec {
            dim_u: 1,
            q_eigs: vec![1.0],
            psi: Psi::Constant {
                matrix: vec![vec![1.0], vec![2.0]],
            },
        };
        assert!(c.validate(2).is_ok());
        assert!(c.validate(3).is_err());
    }
}
