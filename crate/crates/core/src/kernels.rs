//! Scalar kernels `a(t)`, product-integration convolution and the
//! complete-positivity screen.
//!
//! Convolutions integrate a piecewise-linear interpolant of `f` exactly
//! against the kernel. Only the kernel moments
//! `M0_i = int_{ih}^{(i+1)h} a` and `M1_i = int_{ih}^{(i+1)h} a(s)(s - ih) ds`
//! enter, so the weak singularity of `g_alpha` at 0 costs no order.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quad::{CompensatedSum, GaussLegendre};
use crate::specfun::{gamma, recip_gamma};

/// A kernel `a(t)` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `g_alpha(t) = t^(alpha-1) / Gamma(alpha)`.
    Fractional {
        alpha: f64,
    },
    /// `scale * exp(-rate t)`.
    Exponential {
        rate: f64,
        scale: f64,
    },
    ConstantOne,
    /// Samples on a uniform grid, linearly interpolated.
    Table {
        grid: TimeGrid,
        values: Vec<f64>,
    },
}

impl KernelSpec {
    pub fn fractional(alpha: f64) -> Self {
        KernelSpec::Fractional { alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Fractional { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::param(
                        "alpha",
                        format!("must be finite and > 0, got {alpha}"),
                    ));
                }
            }
            KernelSpec::Exponential { rate, scale } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::param(
                        "rate",
                        format!("must be finite and > 0, got {rate}"),
                    ));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::param(
                        "scale",
                        format!("must be finite and > 0, got {scale}"),
                    ));
                }
            }
            KernelSpec::ConstantOne => {}
            KernelSpec::Table { grid, values } => {
                if values.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        got: values.len(),
                    });
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::param(
                        "values",
                        format!("table value {v} is not finite"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Weakly singular at the origin (`g_alpha` with `alpha < 1`).
    pub fn is_singular(&self) -> bool {
        matches!(self, KernelSpec::Fractional { alpha } if *alpha < 1.0)
    }

    /// Value at `t >= 0`; the origin yields `+inf` for singular kernels.
    fn sample(&self, t: f64) -> Result<f64> {
        Ok(match self {
            KernelSpec::Fractional { alpha } => {
                if t == 0.0 {
                    if *alpha < 1.0 {
                        f64::INFINITY
                    } else if *alpha == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (t.powf(alpha - 1.0)) * recip_gamma(*alpha)
                }
            }
            KernelSpec::Exponential { rate, scale } => scale * (-rate * t).exp(),
            KernelSpec::ConstantOne => 1.0,
            KernelSpec::Table { grid, values } => {
                if t > grid.t_end() * (1.0 + 1e-12) {
                    return Err(Error::param(
                        "t",
                        format!("{t} lies outside the table range [0, {}]", grid.t_end()),
                    ));
                }
                let x = t / grid.dt();
                let i = (x.floor() as usize).min(grid.steps() - 1);
                let w = (x - i as f64).clamp(0.0, 1.0);
                (1.0 - w) * values[i] + w * values[i + 1]
            }
        })
    }

    /// Exact moments `(M0_i, M1_i)` over `[ih, (i+1)h]`.
    fn moments(&self, h: f64, i: usize, gl: &GaussLegendre) -> Result<(f64, f64)> {
        let fi = i as f64;
        Ok(match self {
            KernelSpec::Fractional { alpha } => fractional_moments(*alpha, h, fi, gl),
            KernelSpec::ConstantOne => (h, 0.5 * h * h),
            KernelSpec::Exponential { rate, scale } => {
                let x = rate * h;
                let front = scale * (-rate * fi * h).exp();
                let m0 = front * -(-x).exp_m1() / rate;
                // 1 - e^{-x}(1 + x), by series where it cancels
                let q = if x < 1e-2 {
                    x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0)
                } else {
                    1.0 - (-x).exp() * (1.0 + x)
                };
                (m0, front * q / (rate * rate))
            }
            KernelSpec::Table { .. } => {
                // trapezoid on the interpolated table: exact only when the
                // table nodes coincide with the solve grid
                let a0 = self.sample(fi * h)?;
                let a1 = self.sample((fi + 1.0) * h)?;
                (0.5 * h * (a0 + a1), h * h * (a0 / 6.0 + a1 / 3.0))
            }
        })
    }
}

fn fractional_moments(alpha: f64, h: f64, i: f64, gl: &GaussLegendre) -> (f64, f64) {
    let g1 = recip_gamma(alpha + 1.0);
    if i < 8.0 {
        let d = |p: f64| (i + 1.0).powf(p) - i.powf(p);
        let m0 = h.powf(alpha) * d(alpha) * g1;
        let m1 = h.powf(alpha + 1.0) * g1 * (alpha / (alpha + 1.0) * d(alpha + 1.0) - i * d(alpha));
        (m0, m1)
    } else {
        // the closed form cancels for large i; the integrand is smooth here
        let ga = recip_gamma(alpha);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (x, w) in gl.mapped(0.0, 1.0) {
            let v = w * (i + x).powf(alpha - 1.0);
            s0 += v;
            s1 += v * x;
        }
        (h.powf(alpha) * ga * s0, h.powf(alpha + 1.0) * ga * s1)
    }
}

/// `g_alpha(t)` for `t > 0`.
pub fn kernel_eval(spec: &KernelSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param(
            "t",
            format!("kernel evaluation needs t > 0, got {t}"),
        ));
    }
    spec.sample(t)
}

/// Kernel samples on every node of `grid`, `+inf` at the origin when singular.
pub fn kernel_samples(spec: &KernelSpec, grid: &TimeGrid) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..grid.len()).map(|k| spec.sample(grid.t(k))).collect()
}

/// Values that can be convolved: scalars, vectors and matrices.
pub trait Accumulate: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += w * x`
    fn axpy(&mut self, w: f64, x: &Self);
    fn scale(&mut self, w: f64);
}

impl Accumulate for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }
    fn scale(&mut self, w: f64) {
        *self *= w;
    }
}

impl Accumulate for DVector<f64> {
    fn zeros_like(&self) -> Self {
        DVector::zeros(self.len())
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        nalgebra::Matrix::axpy(self, w, x, 1.0);
    }
    fn scale(&mut self, w: f64) {
        *self *= w;
    }
}

impl Accumulate for DMatrix<f64> {
    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        self.zip_apply(x, |a, b| *a += w * b);
    }
    fn scale(&mut self, w: f64) {
        *self *= w;
    }
}

/// Product-integration weights `W_{k,j}` for a kernel on a uniform grid:
/// `int_0^{t_k} a(t_k - s) f(s) ds ~ sum_j W_{k,j} f_j`.
///
/// The plain rule is second order for smooth `f`. Solutions of equations
/// with `g_alpha` behave like `t^alpha` at the origin, which limits the
/// plain rule to order `2 alpha` there; [`ProductWeights::corrected`] adds
/// starting weights on the first few nodes so the rule is exact for
/// `t^beta`, `beta` in `{0, 1, alpha, 2 alpha, ...}` (at most four exponents).
#[derive(Debug, Clone)]
pub struct ProductWeights {
    grid: TimeGrid,
    /// weight of the left endpoint of lag interval i: `M0_i - M1_i / h`
    left: Vec<f64>,
    /// weight of the right endpoint of lag interval i: `M1_i / h`
    right: Vec<f64>,
    /// plain moments `M0_i`, the piecewise-constant rule
    m0: Vec<f64>,
    /// starting weights on nodes `0..start_len` for every k (row 0 unused)
    start: Vec<Vec<f64>>,
}

const MAX_START_EXPONENTS: usize = 4;

impl ProductWeights {
    pub fn new(spec: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        spec.validate()?;
        let h = grid.dt();
        let gl = GaussLegendre::new(8);
        let k = grid.steps();
        let mut left = Vec::with_capacity(k);
        let mut right = Vec::with_capacity(k);
        let mut m0s = Vec::with_capacity(k);
        for i in 0..k {
            let (m0, m1) = spec.moments(h, i, &gl)?;
            left.push(m0 - m1 / h);
            right.push(m1 / h);
            m0s.push(m0);
        }
        Ok(Self {
            grid: *grid,
            left,
            right,
            m0: m0s,
            start: Vec::new(),
        })
    }

    /// Weights with starting corrections for fractional kernels of
    /// non-integer order below 2; identical to [`ProductWeights::new`]
    /// for every other kernel.
    pub fn corrected(spec: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        let mut w = Self::new(spec, grid)?;
        if let KernelSpec::Fractional { alpha } = spec {
            w.add_starting_weights(*alpha)?;
        }
        Ok(w)
    }

    fn add_starting_weights(&mut self, alpha: f64) -> Result<()> {
        let mut exps = vec![0.0, 1.0];
        let mut m = 1;
        while m as f64 * alpha < 2.0 && exps.len() < MAX_START_EXPONENTS {
            let b = m as f64 * alpha;
            if (b - b.round()).abs() > 1e-9 {
                exps.push(b);
            }
            m += 1;
        }
        let kmax = self.grid.steps();
        exps.truncate(kmax + 1);
        if exps.len() <= 2 {
            return Ok(());
        }
        exps.sort_by(f64::total_cmp);
        let ms = exps.len();
        let pow = |j: usize, b: f64| {
            if j == 0 {
                if b == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (j as f64).powf(b)
            }
        };
        // work in units h = 1; every weight scales with h^alpha
        let scale = self.grid.dt().powf(alpha);
        let v = DMatrix::from_fn(ms, ms, |b, j| pow(j, exps[b]));
        let lu = v.lu();
        let powers: Vec<Vec<f64>> = exps
            .iter()
            .map(|&b| (0..=kmax).map(|j| pow(j, b)).collect())
            .collect();
        let coef: Vec<f64> = exps
            .iter()
            .map(|&b| gamma(b + 1.0) * recip_gamma(alpha + b + 1.0))
            .collect();
        let mut start = vec![Vec::new(); kmax + 1];
        for (k, row) in start.iter_mut().enumerate().skip(1) {
            let rhs = DVector::from_fn(ms, |b, _| {
                let mut acc = CompensatedSum::default();
                acc.add(coef[b] * (k as f64).powf(alpha + exps[b]));
                for j in 0..=k {
                    acc.add(-self.base_weight(k, j) / scale * powers[b][j]);
                }
                acc.value()
            });
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("starting-weight system".into()))?;
            *row = sol.iter().map(|x| x * scale).collect();
        }
        self.start = start;
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Number of leading nodes carrying starting weights (0 without
    /// correction). Rows `k < start_len` couple to nodes `j > k`.
    pub fn start_len(&self) -> usize {
        self.start.get(1).map_or(0, Vec::len)
    }

    /// Implicit weight `W_{k,k}` for `k >= start_len`.
    pub fn diagonal(&self) -> f64 {
        self.left[0]
    }

    fn base_weight(&self, k: usize, j: usize) -> f64 {
        // f_j is the right end of lag interval k-1-j and the left end of k-j
        let mut w = 0.0;
        if j < k {
            w += self.right[k - 1 - j];
        }
        if j >= 1 && j <= k {
            w += self.left[k - j];
        }
        w
    }

    /// `W_{k,j}`, `k >= 1`; nonzero for `j > k` only through starting weights.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        debug_assert!(k >= 1);
        let mut w = self.base_weight(k, j);
        if let Some(&c) = self.start.get(k).and_then(|r| r.get(j)) {
            w += c;
        }
        w
    }

    /// Explicit part `sum_{j<k} W_{k,j} f_j`.
    pub fn history<T: Accumulate>(&self, k: usize, f: &[T]) -> T {
        let mut acc = f[0].zeros_like();
        for (j, fj) in f.iter().enumerate().take(k) {
            acc.axpy(self.weight(k, j), fj);
        }
        acc
    }

    /// Piecewise-constant (right endpoint) rule: weight `M0_{k-j}` on `f_j`
    /// for `1 <= j <= k`. First order, but monotone for completely
    /// monotone kernels.
    fn rect_history(&self, k: usize, f: &[f64]) -> f64 {
        (1..k).map(|j| self.m0[k - j] * f[j]).sum()
    }
}

/// Product-integration convolution `(a * f)(t_k)` at every node.
pub fn convolve<T: Accumulate>(spec: &KernelSpec, grid: &TimeGrid, f: &[T]) -> Result<Vec<T>> {
    let w = ProductWeights::new(spec, grid)?;
    convolve_with(&w, f)
}

/// Convolution with precomputed weights.
pub fn convolve_with<T: Accumulate>(w: &ProductWeights, f: &[T]) -> Result<Vec<T>> {
    let n = w.grid().len();
    if f.len() != n {
        return Err(Error::GridMismatch(format!(
            "sequence has {} samples, grid has {n} nodes",
            f.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    out.push(f[0].zeros_like());
    for k in 1..n {
        let mut acc = w.history(k, f);
        for (j, fj) in f.iter().enumerate().take(w.start_len().max(k + 1)).skip(k) {
            acc.axpy(w.weight(k, j), fj);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Forward substitution for `x + mu (a * x) = rhs` with the product weights.
fn solve_second_kind(w: &ProductWeights, mu: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = 1.0 + mu * w.diagonal();
    if !(d > 0.0) {
        return Err(Error::Singular(format!("diagonal weight 1 + mu w0 = {d}")));
    }
    let mut x = Vec::with_capacity(rhs.len());
    x.push(rhs[0]);
    for k in 1..rhs.len() {
        let hist = w.history(k, &x);
        x.push((rhs[k] - mu * hist) / d);
    }
    Ok(x)
}

/// Solutions `(s, r)` of `s + mu (a * s) = 1` and `r + mu (a * r) = a`.
///
/// For singular kernels `r(0) = +inf`. There the singular part of `r` is
/// peeled off as `sum_{m=1}^{M} (-mu)^{m-1} g_{m alpha}` with `(M+1) alpha >= 1`
/// and only the bounded remainder is marched; this is accurate once the
/// grid resolves the initial layer (`mu h^alpha` small).
pub fn solve_cp_equations(
    spec: &KernelSpec,
    mu: f64,
    grid: &TimeGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::param(
            "mu",
            format!("must be finite and >= 0, got {mu}"),
        ));
    }
    let samples = kernel_samples(spec, grid)?;
    if mu == 0.0 {
        return Ok((vec![1.0; grid.len()], samples));
    }
    let w = ProductWeights::new(spec, grid)?;
    let s = solve_second_kind(&w, mu, &vec![1.0; grid.len()])?;
    let r = match spec {
        KernelSpec::Fractional { alpha } if *alpha < 1.0 => {
            let alpha = *alpha;
            let m = ((1.0 / alpha) - 1e-12).ceil() as i32 - 1;
            let g = |beta: f64, t: f64| -> f64 {
                if t > 0.0 {
                    t.powf(beta - 1.0) * recip_gamma(beta)
                } else if (beta - 1.0).abs() < 1e-12 {
                    1.0
                } else {
                    0.0
                }
            };
            let top = (m + 1) as f64 * alpha;
            let lead = (-mu).powi(m);
            let rhs: Vec<f64> = grid.nodes().into_iter().map(|t| lead * g(top, t)).collect();
            let rho = solve_second_kind(&w, mu, &rhs)?;
            grid.nodes()
                .into_iter()
                .zip(rho)
                .map(|(t, rho)| {
                    if t == 0.0 {
                        return f64::INFINITY;
                    }
                    let head: f64 = (1..=m)
                        .map(|j| (-mu).powi(j - 1) * g(j as f64 * alpha, t))
                        .sum();
                    head + rho
                })
                .collect()
        }
        _ => solve_second_kind(&w, mu, &samples)?,
    };
    Ok((s, r))
}

/// Monotone first-order solutions used by the complete-positivity screen.
///
/// `s_k` solves the right-endpoint rectangle discretization and `r_k` is the
/// average of `r` over `(t_{k-1}, t_k]`. When the moments `M0_i` form a
/// log-convex sequence (true for every completely monotone kernel) the
/// discrete `s` is nonnegative and nonincreasing, so a negative value can
/// only come from the kernel, never from an unresolved initial layer.
pub fn solve_cp_equations_monotone(
    spec: &KernelSpec,
    mu: f64,
    grid: &TimeGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::param(
            "mu",
            format!("must be finite and >= 0, got {mu}"),
        ));
    }
    let w = ProductWeights::new(spec, grid)?;
    let h = grid.dt();
    let d = 1.0 + mu * w.m0[0];
    if !(d > 0.0) {
        return Err(Error::Singular(format!("diagonal weight 1 + mu w0 = {d}")));
    }
    let n = grid.len();
    let mut s = vec![1.0; n];
    let mut r = vec![0.0; n];
    r[0] = spec.sample(0.0)?;
    for k in 1..n {
        s[k] = (1.0 - mu * w.rect_history(k, &s)) / d;
        r[k] = (w.m0[k - 1] / h - mu * w.rect_history(k, &r)) / d;
    }
    Ok((s, r))
}

pub const DEFAULT_CP_TOL: f64 = 1e-8;
pub const DEFAULT_MU_GRID: [f64; 7] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CpVerdict {
    CompletelyPositiveOnGrid,
    Violated { mu: f64, t: f64, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPReport {
    pub mu_grid: Vec<f64>,
    /// `min_t s_mu(t)` and `min_t r_mu(t)` for each `mu`
    pub per_mu: Vec<(f64, f64)>,
    pub min_s: f64,
    pub min_r: f64,
    pub verdict: CpVerdict,
}

impl CPReport {
    pub fn is_positive(&self) -> bool {
        self.verdict == CpVerdict::CompletelyPositiveOnGrid
    }
}

/// Falsification screen for complete positivity: `s >= -tol` and
/// `r >= -tol` for every sampled `mu`. Passing is evidence, not proof.
pub fn check_completely_positive(
    spec: &KernelSpec,
    mu_grid: &[f64],
    grid: &TimeGrid,
    tol: f64,
) -> Result<CPReport> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be > 0, got {tol}")));
    }
    if mu_grid.is_empty() {
        return Err(Error::param("mu_grid", "must not be empty"));
    }
    // (min value, node index) for s and r per mu, in mu order
    let per_mu: Vec<((f64, usize), (f64, usize))> = mu_grid
        .par_iter()
        .map(|&mu| {
            let (s, r) = solve_cp_equations_monotone(spec, mu, grid)?;
            Ok((argmin(&s), argmin(&r)))
        })
        .collect::<Result<_>>()?;
    let mut min_s = f64::INFINITY;
    let mut min_r = f64::INFINITY;
    let mut worst: Option<(f64, f64, f64)> = None;
    for (&mu, &((vs, ks), (vr, kr))) in mu_grid.iter().zip(&per_mu) {
        min_s = min_s.min(vs);
        min_r = min_r.min(vr);
        for (v, k) in [(vs, ks), (vr, kr)] {
            if worst.is_none_or(|(_, _, w)| v < w) {
                worst = Some((mu, grid.t(k), v));
            }
        }
    }
    let verdict = match worst {
        Some((mu, t, value)) if value < -tol => CpVerdict::Violated { mu, t, value },
        _ => CpVerdict::CompletelyPositiveOnGrid,
    };
    Ok(CPReport {
        mu_grid: mu_grid.to_vec(),
        per_mu: per_mu.iter().map(|&((vs, _), (vr, _))| (vs, vr)).collect(),
        min_s,
        min_r,
        verdict,
    })
}

fn argmin(v: &[f64]) -> (f64, usize) {
    v.iter().enumerate().fold(
        (f64::INFINITY, 0),
        |(m, km), (k, &x)| if x < m { (x, k) } else { (m, km) },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MonotoneVerdict {
    Pass,
    Fail { order: usize, t: f64, value: f64 },
}

/// Finite-difference screen `(-1)^k Delta^k a >= -tol * scale` for
/// `k = 0..=max_order`, on the nodes `t_1, ..., t_K` (the origin is never
/// sampled). `scale` is the largest kernel value in the stencil, so the
/// test is relative near a singularity.
pub fn check_completely_monotone(
    spec: &KernelSpec,
    grid: &TimeGrid,
    max_order: usize,
    tol: f64,
) -> Result<MonotoneVerdict> {
    if max_order > 6 {
        return Err(Error::param(
            "max_order",
            format!("at most 6, got {max_order}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be > 0, got {tol}")));
    }
    let a = kernel_samples(spec, grid)?;
    let a = &a[1..];
    if a.len() <= max_order {
        return Err(Error::param(
            "grid",
            format!("needs more than {max_order} interior nodes"),
        ));
    }
    let mut diff = a.to_vec();
    for order in 0..=max_order {
        if order > 0 {
            diff = diff.windows(2).map(|p| p[1] - p[0]).collect();
        }
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        for (i, d) in diff.iter().enumerate() {
            let scale = a[i..=i + order].iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let v = sign * d;
            if v < -tol * scale {
                return Ok(MonotoneVerdict::Fail {
                    order,
                    t: grid.t(i + 1),
                    value: v,
                });
            }
        }
    }
    Ok(MonotoneVerdict::Pass)
}

/// `t^(beta-1) / Gamma(beta)` on the grid nodes, 0 at the origin for
/// `beta > 1` (used by oracles and the resolvent module).
pub fn g_samples(beta: f64, grid: &TimeGrid) -> Vec<f64> {
    grid.nodes()
        .into_iter()
        .map(|t| {
            if t > 0.0 {
                t.powf(beta - 1.0) / gamma(beta)
            } else if beta == 1.0 {
                1.0
            } else if beta > 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect()
}
