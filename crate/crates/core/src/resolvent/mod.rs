//! Resolvent families `S(t)` of `u(t) = x + int_0^t a(t - s) A u(s) ds`.
//!
//! Three interchangeable constructions sit behind [`ResolventMethod`]:
//!
//! * `ml_spectral`: `S(t) = E_alpha(t^alpha A)` through the eigenbasis,
//!   the reference for `a = g_alpha`;
//! * `subordination`: `S(t) = int_0^inf Phi_alpha(u) e^{t^alpha u A} du`,
//!   valid for `0 < alpha < 1`;
//! * `volterra_step`: product-integration marching, any kernel.

mod convergence;
mod ml;
mod subordination;
mod volterra;

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{convolve_with, KernelSpec, ProductWeights};
use crate::operators::Operator;

pub use convergence::{
    convergence_study, default_probes, ConvergenceReport, ConvergenceRow, DEFAULT_N_LIST,
};
pub use ml::{resolvent_ml, SERIES_NORM_LIMIT};
pub use subordination::{resolvent_subordination, SubordinationQuad};
pub use volterra::resolvent_volterra_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    MlSpectral,
    Subordination,
    VolterraStep,
}

impl MethodTag {
    pub fn name(self) -> &'static str {
        match self {
            MethodTag::MlSpectral => "ml_spectral",
            MethodTag::Subordination => "subordination",
            MethodTag::VolterraStep => "volterra_step",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponential type `||S(t)|| <= M e^{omega t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthType {
    pub m: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventFamily {
    pub grid: TimeGrid,
    pub mats: Vec<DMatrix<f64>>,
    /// Fractional order of the kernel, `None` for other kernels.
    pub alpha: Option<f64>,
    pub method: MethodTag,
    pub fitted_type: Option<GrowthType>,
}

impl ResolventFamily {
    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    /// `max_k ||S_k A - A S_k||_F / (||A||_F ||S_k||_F)`.
    pub fn commutation_defect(&self, a: &Operator) -> f64 {
        let am = a.matrix();
        let an = am.norm();
        if an == 0.0 {
            return 0.0;
        }
        self.mats
            .iter()
            .map(|s| {
                let sn = s.norm();
                if sn == 0.0 {
                    0.0
                } else {
                    (s * am - am * s).norm() / (an * sn)
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn fit_growth(&mut self) {
        let (m, omega) = growth_bound_fit(self);
        self.fitted_type = Some(GrowthType { m, omega });
    }

    /// One row per `(k, i, j)`: `k,i,j,t,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["k", "i", "j", "t", "value"]).map_err(io)?;
        for (k, s) in self.mats.iter().enumerate() {
            let t = self.grid.t(k);
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    w.write_record(&[
                        k.to_string(),
                        i.to_string(),
                        j.to_string(),
                        format!("{t:.17e}"),
                        format!("{:.17e}", s[(i, j)]),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// A way of computing the resolvent family of `(A, a)` on a grid.
pub trait ResolventMethod: Send + Sync {
    fn tag(&self) -> MethodTag;

    fn name(&self) -> &'static str {
        self.tag().name()
    }

    /// Whether the method can handle this kernel at all.
    fn supports(&self, kernel: &KernelSpec) -> bool;

    fn compute(
        &self,
        a: &Operator,
        kernel: &KernelSpec,
        grid: &TimeGrid,
    ) -> Result<ResolventFamily>;
}

/// Order of the fractional kernel, `constant_one` counting as `alpha = 1`.
pub(crate) fn fractional_order(kernel: &KernelSpec) -> Option<f64> {
    match kernel {
        KernelSpec::Fractional { alpha } => Some(*alpha),
        KernelSpec::ConstantOne => Some(1.0),
        _ => None,
    }
}

struct MlSpectral;
struct Subordination(SubordinationQuad);
struct VolterraStep;

impl ResolventMethod for MlSpectral {
    fn tag(&self) -> MethodTag {
        MethodTag::MlSpectral
    }
    fn supports(&self, kernel: &KernelSpec) -> bool {
        fractional_order(kernel).is_some_and(|a| a > 0.0 && a <= 2.0)
    }
    fn compute(
        &self,
        a: &Operator,
        kernel: &KernelSpec,
        grid: &TimeGrid,
    ) -> Result<ResolventFamily> {
        let alpha = require_order(self, kernel)?;
        resolvent_ml(a, alpha, grid)
    }
}

impl ResolventMethod for Subordination {
    fn tag(&self) -> MethodTag {
        MethodTag::Subordination
    }
    fn supports(&self, kernel: &KernelSpec) -> bool {
        fractional_order(kernel).is_some_and(|a| a > 0.0 && a < 1.0)
    }
    fn compute(
        &self,
        a: &Operator,
        kernel: &KernelSpec,
        grid: &TimeGrid,
    ) -> Result<ResolventFamily> {
        let alpha = require_order(self, kernel)?;
        resolvent_subordination(a, alpha, grid, &self.0)
    }
}

impl ResolventMethod for VolterraStep {
    fn tag(&self) -> MethodTag {
        MethodTag::VolterraStep
    }
    fn supports(&self, _kernel: &KernelSpec) -> bool {
        true
    }
    fn compute(
        &self,
        a: &Operator,
        kernel: &KernelSpec,
        grid: &TimeGrid,
    ) -> Result<ResolventFamily> {
        resolvent_volterra_step(a, kernel, grid)
    }
}

fn require_order(m: &dyn ResolventMethod, kernel: &KernelSpec) -> Result<f64> {
    if !m.supports(kernel) {
        return Err(Error::param(
            "kernel",
            format!("method {} does not support {kernel:?}", m.name()),
        ));
    }
    Ok(fractional_order(kernel).expect("supported kernels are fractional"))
}

/// All registered methods, in a fixed order.
pub fn registry() -> Vec<Box<dyn ResolventMethod>> {
    vec![
        Box::new(MlSpectral),
        Box::new(Subordination(SubordinationQuad::default())),
        Box::new(VolterraStep),
    ]
}

pub fn method_names() -> Vec<&'static str> {
    registry().iter().map(|m| m.name()).collect()
}

pub fn method_by_name(name: &str) -> Result<Box<dyn ResolventMethod>> {
    registry()
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| {
            Error::param(
                "method",
                format!(
                    "unknown resolvent method {name:?}; known: {}",
                    method_names().join(", ")
                ),
            )
        })
}

/// `max_k max_i || S_k e_i - e_i - int_0^{t_k} a(t_k - s) A S(s) e_i ds ||`
/// with the (start-corrected) product-integration rule on the family's grid.
pub fn resolvent_equation_residual(
    fam: &ResolventFamily,
    a: &Operator,
    kernel: &KernelSpec,
) -> Result<f64> {
    let d = a.dim();
    if fam.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: fam.dim(),
        });
    }
    let w = ProductWeights::corrected(kernel, &fam.grid)?;
    let conv = convolve_with(&w, &fam.mats)?;
    let id = DMatrix::<f64>::identity(d, d);
    let mut worst: f64 = 0.0;
    for k in 1..fam.mats.len() {
        let r = &fam.mats[k] - &id - a.matrix() * &conv[k];
        for col in r.column_iter() {
            worst = worst.max(col.norm());
        }
    }
    Ok(worst)
}

/// Tight exponential envelope `log ||S(t_k)|| <= log M + omega t_k`:
/// least-squares line through the upper convex hull, lifted to touch the
/// data from above, with `M >= 1`.
pub fn growth_bound_fit(fam: &ResolventFamily) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = fam
        .mats
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let n = op_norm(s);
            (n > 0.0).then(|| (fam.grid.t(k), n.ln()))
        })
        .collect();
    if pts.is_empty() {
        return (1.0, 0.0);
    }
    let hull = upper_hull(&pts);
    let omega = if hull.len() < 2 {
        0.0
    } else {
        let n = hull.len() as f64;
        let mt = hull.iter().map(|p| p.0).sum::<f64>() / n;
        let my = hull.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = hull.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = hull.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    };
    let lift = pts
        .iter()
        .map(|p| p.1 - omega * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    (lift.max(0.0).exp(), omega)
}

fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly above the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Induced 2-norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().singular_values().max()
}
