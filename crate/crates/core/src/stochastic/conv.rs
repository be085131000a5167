use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{NoiseSpec, PathKind, PsiSeq, SamplePath, WienerIncrements};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::resolvent::ResolventFamily;

/// Causal Toeplitz convolution `y_k = sum_{j<=k} c_{k-j} v_j` by FFT.
///
/// `c` is matrix valued (`rows x cols`); a `1 x 1` kernel acts on every
/// component of the input.
#[derive(Clone)]
pub(crate) struct CausalConv {
    n: usize,
    rows: usize,
    cols: usize,
    /// spectrum of entry `(i, l)` at `i * cols + l`
    spectra: Vec<Vec<Complex64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CausalConv {
    pub(crate) fn new(kernel: &[DMatrix<f64>]) -> Self {
        let n = kernel.len();
        let (rows, cols) = kernel.first().map_or((1, 1), |m| m.shape());
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let spectra = (0..rows * cols)
            .map(|e| {
                let (i, l) = (e / cols, e % cols);
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for (b, m) in buf.iter_mut().zip(kernel) {
                    b.re = m[(i, l)];
                }
                fwd.process(&mut buf);
                buf
            })
            .collect();
        Self {
            n,
            rows,
            cols,
            spectra,
            fwd,
            inv,
        }
    }

    pub(crate) fn scalar(kernel: &[f64]) -> Self {
        let m: Vec<DMatrix<f64>> = kernel
            .iter()
            .map(|&c| DMatrix::from_element(1, 1, c))
            .collect();
        Self::new(&m)
    }

    fn transform(&self, v: &[DVector<f64>], comp: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.spectra[0].len()];
        for (b, x) in buf.iter_mut().zip(v) {
            b.re = x[comp];
        }
        self.fwd.process(&mut buf);
        buf
    }

    fn back(&self, mut buf: Vec<Complex64>, out: &mut [DVector<f64>], comp: usize) {
        self.inv.process(&mut buf);
        let s = 1.0 / buf.len() as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            o[comp] = b.re * s;
        }
    }

    /// `v` has one vector per node (`n` of them).
    pub(crate) fn apply(&self, v: &[DVector<f64>]) -> Vec<DVector<f64>> {
        debug_assert_eq!(v.len(), self.n);
        let dim_in = v.first().map_or(0, |x| x.len());
        if self.rows == 1 && self.cols == 1 {
            let mut out = vec![DVector::zeros(dim_in); self.n];
            for c in 0..dim_in {
                let mut x = self.transform(v, c);
                for (a, b) in x.iter_mut().zip(&self.spectra[0]) {
                    *a *= b;
                }
                self.back(x, &mut out, c);
            }
            return out;
        }
        let inputs: Vec<Vec<Complex64>> = (0..self.cols).map(|l| self.transform(v, l)).collect();
        let mut out = vec![DVector::zeros(self.rows); self.n];
        for i in 0..self.rows {
            let mut acc = vec![Complex64::new(0.0, 0.0); inputs[0].len()];
            for (l, x) in inputs.iter().enumerate() {
                let s = &self.spectra[i * self.cols + l];
                for ((a, xv), sv) in acc.iter_mut().zip(x).zip(s) {
                    *a += xv * sv;
                }
            }
            self.back(acc, &mut out, i);
        }
        out
    }
}

/// A resolvent family prepared for repeated convolution against noise.
#[derive(Clone)]
pub struct ConvolutionPlan {
    grid: TimeGrid,
    dim: usize,
    psi: PsiSeq,
    conv: CausalConv,
}

impl ConvolutionPlan {
    pub fn new(fam: &ResolventFamily, noise: &NoiseSpec) -> Result<Self> {
        let dim = fam.dim();
        let psi = noise.psi_on(dim, &fam.grid)?;
        // lag 0 carries no weight: the increment on [t_j, t_{j+1}) first acts at t_{j+1}
        let mut kernel = fam.mats.clone();
        kernel[0] = DMatrix::zeros(dim, dim);
        Ok(Self {
            grid: fam.grid,
            dim,
            psi,
            conv: CausalConv::new(&kernel),
        })
    }

    /// Difference family `S - S'` on a common grid, for coupled comparisons.
    pub fn difference(
        fam: &ResolventFamily,
        other: &ResolventFamily,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        fam.grid
            .ensure_same(&other.grid, "difference of families")?;
        let diff = ResolventFamily {
            mats: fam
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a - b)
                .collect(),
            ..fam.clone()
        };
        Self::new(&diff, noise)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `Psi(t_j) dW_j` for `j < steps`, zero at the last node.
    fn forcing(&self, incs: &WienerIncrements) -> Result<Vec<DVector<f64>>> {
        self.grid.ensure_same(&incs.grid, "increments")?;
        let dim_u = self.psi.at(0).ncols();
        let mut v = Vec::with_capacity(self.grid.len());
        for (j, d) in incs.dw.iter().enumerate() {
            if d.len() != dim_u {
                return Err(Error::DimensionMismatch {
                    expected: dim_u,
                    got: d.len(),
                });
            }
            v.push(self.psi.at(j) * d);
        }
        v.push(DVector::zeros(self.dim));
        Ok(v)
    }

    /// `W^Psi(t_k) = sum_{j<k} S(t_k - t_j) Psi(t_j) dW_j`.
    pub fn apply(&self, incs: &WienerIncrements) -> Result<SamplePath> {
        let v = self.forcing(incs)?;
        let mut values = self.conv.apply(&v);
        values[0].fill(0.0);
        Ok(SamplePath {
            grid: self.grid,
            values,
            kind: PathKind::MildConvolution,
        })
    }

    /// `Z(t_k) = sum_{j<k} Psi(t_j) dW_j`.
    pub fn noise_integral(&self, incs: &WienerIncrements) -> Result<SamplePath> {
        let v = self.forcing(incs)?;
        let mut values = Vec::with_capacity(v.len());
        let mut acc = DVector::zeros(self.dim);
        for x in &v {
            values.push(acc.clone());
            acc += x;
        }
        Ok(SamplePath {
            grid: self.grid,
            values,
            kind: PathKind::Other,
        })
    }
}

pub fn stochastic_convolution(
    fam: &ResolventFamily,
    noise: &NoiseSpec,
    incs: &WienerIncrements,
) -> Result<SamplePath> {
    ConvolutionPlan::new(fam, noise)?.apply(incs)
}

/// `S(t_k) X0 + W^Psi(t_k)`.
pub fn mild_solution(
    fam: &ResolventFamily,
    noise: &NoiseSpec,
    incs: &WienerIncrements,
    x0: &DVector<f64>,
) -> Result<SamplePath> {
    if x0.len() != fam.dim() {
        return Err(Error::DimensionMismatch {
            expected: fam.dim(),
            got: x0.len(),
        });
    }
    let mut p = stochastic_convolution(fam, noise, incs)?;
    if x0.iter().any(|&x| x != 0.0) {
        for (v, s) in p.values.iter_mut().zip(&fam.mats) {
            *v += s * x0;
        }
    }
    Ok(p)
}

/// `Z(t_k) = int_0^{t_k} Psi dW`, left point.
pub fn noise_integral(
    noise: &NoiseSpec,
    incs: &WienerIncrements,
    dim: usize,
) -> Result<SamplePath> {
    let psi = noise.psi_on(dim, &incs.grid)?;
    let mut values = Vec::with_capacity(incs.grid.len());
    let mut acc = DVector::zeros(dim);
    values.push(acc.clone());
    for (j, d) in incs.dw.iter().enumerate() {
        acc += psi.at(j) * d;
        values.push(acc.clone());
    }
    Ok(SamplePath {
        grid: incs.grid,
        values,
        kind: PathKind::Other,
    })
}

fn check_index(grid: &TimeGrid, k: usize) -> Result<()> {
    if k >= grid.len() {
        return Err(Error::param(
            "t_index",
            format!("{k} outside grid of {} nodes", grid.len()),
        ));
    }
    Ok(())
}

/// `E |W^Psi(t_k)|^2 = sum_{j<k} dt ||S(t_k - t_j) Psi(t_j) Q^{1/2}||_HS^2`,
/// the left-point rule that the discrete convolution satisfies exactly.
pub fn ito_isometry_value(fam: &ResolventFamily, noise: &NoiseSpec, t_index: usize) -> Result<f64> {
    check_index(&fam.grid, t_index)?;
    let psi = noise.psi_on(fam.dim(), &fam.grid)?;
    let dt = fam.grid.dt();
    Ok((0..t_index)
        .map(|j| dt * noise.hs_norm_sq(&(&fam.mats[t_index - j] * psi.at(j))))
        .sum())
}

/// `Cov W^Psi(t_k) = sum_{j<k} dt S Psi Q Psi^T S^T` at lag `t_k - t_j`.
pub fn covariance_value(
    fam: &ResolventFamily,
    noise: &NoiseSpec,
    t_index: usize,
) -> Result<DMatrix<f64>> {
    check_index(&fam.grid, t_index)?;
    let psi = noise.psi_on(fam.dim(), &fam.grid)?;
    let dt = fam.grid.dt();
    let q = DVector::from_column_slice(&noise.q_eigs);
    let mut acc = DMatrix::zeros(fam.dim(), fam.dim());
    for j in 0..t_index {
        let b = &fam.mats[t_index - j] * psi.at(j);
        let bq = DMatrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] * q[c]);
        acc += (bq * b.transpose()) * dt;
    }
    Ok(acc)
}
