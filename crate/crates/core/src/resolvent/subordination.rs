use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MethodTag, ResolventFamily};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operators::{semigroup, Operator};
use crate::quad::GaussLegendre;
use crate::specfun::{wright_phi, FracOrder};

/// Quadrature controls for `S(t) = int_0^inf Phi_alpha(u) e^{t^alpha u A} du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationQuad {
    /// Density mass allowed beyond the truncation point.
    pub tail_mass: f64,
    /// Order doubling stops once the result changes by less than this.
    pub tol: f64,
    pub min_order: usize,
    pub max_order: usize,
    /// Width of the uniform panels away from the origin.
    pub panel_width: f64,
    /// Give up if the truncation point would exceed this.
    pub u_budget: f64,
}

impl Default for SubordinationQuad {
    fn default() -> Self {
        Self {
            tail_mass: 1e-10,
            tol: 1e-9,
            min_order: 16,
            max_order: 128,
            panel_width: 0.25,
            u_budget: 1e3,
        }
    }
}

/// Subordination of the semigroup by the Wright density (`0 < alpha < 1`).
///
/// After `s = t^alpha u` the density is `Phi_alpha(u)` for every `t`, so one
/// set of nodes and density values serves the whole grid. Panels are graded
/// dyadically toward 0 down to `0.1 / (|lambda|_max t_end^alpha)` to resolve
/// the fastest exponential, then uniform up to the truncation point.
pub fn resolvent_subordination(
    a: &Operator,
    alpha: f64,
    grid: &TimeGrid,
    q: &SubordinationQuad,
) -> Result<ResolventFamily> {
    let order = FracOrder::subordinating(alpha)?;
    let d = a.dim();
    let t_end_a = grid.t_end().powf(alpha);
    let growth = a.spectral_bound().max(0.0) * t_end_a;
    let u_max = truncation_point(order, growth, q)?;
    let c_max = a.norm() * t_end_a;

    let w = q.panel_width;
    let mut breaks = vec![0.0];
    if c_max > 0.0 {
        let mut x = (0.1 / c_max).min(w);
        while x < w {
            breaks.push(x);
            x *= 2.0;
        }
    }
    let panels = (u_max / w).ceil() as usize;
    breaks.extend((1..=panels).map(|i| i as f64 * w));

    let nodes_ta: Vec<f64> = grid.nodes().iter().map(|t| t.powf(alpha)).collect();
    let mut prev: Option<Vec<DMatrix<f64>>> = None;
    let mut p = q.min_order;
    let mut last_change = f64::INFINITY;
    while p <= q.max_order {
        let rule = quadrature(order, &breaks, p)?;
        let mass: f64 = rule.iter().map(|r| r.1).sum();
        let mats = assemble(a, &nodes_ta, &rule)?;
        if let Some(old) = &prev {
            last_change = old
                .iter()
                .zip(&mats)
                .map(|(x, y)| (x - y).amax())
                .fold(0.0, f64::max);
            if last_change < q.tol {
                if (mass - 1.0).abs() > q.tail_mass + q.tol {
                    return Err(Error::Accuracy {
                        what: "subordination density mass",
                        achieved: (mass - 1.0).abs(),
                        required: q.tail_mass + q.tol,
                    });
                }
                let mut mats = mats;
                mats[0] = DMatrix::identity(d, d);
                return Ok(ResolventFamily {
                    grid: *grid,
                    mats,
                    alpha: Some(alpha),
                    method: MethodTag::Subordination,
                    fitted_type: None,
                });
            }
        }
        prev = Some(mats);
        p *= 2;
    }
    Err(Error::Accuracy {
        what: "subordination quadrature",
        achieved: last_change,
        required: q.tol,
    })
}

/// Smallest `u` past the mode with `Phi(u) e^{growth u}` negligible.
fn truncation_point(order: FracOrder, growth: f64, q: &SubordinationQuad) -> Result<f64> {
    let mut u = 0.0;
    let mut prev = wright_phi(order, 0.0)?.value;
    loop {
        u += q.panel_width;
        let v = wright_phi(order, u)?.value * (growth * u).exp();
        if v < prev && v < 1e-2 * q.tail_mass {
            return Ok(u);
        }
        if u > q.u_budget {
            return Err(Error::Accuracy {
                what: "subordination tail",
                achieved: v,
                required: q.tail_mass,
            });
        }
        prev = v;
    }
}

/// `(u_i, w_i Phi(u_i))` on every panel.
fn quadrature(order: FracOrder, breaks: &[f64], p: usize) -> Result<Vec<(f64, f64)>> {
    let gl = GaussLegendre::new(p);
    let mut out = Vec::with_capacity(p * breaks.len());
    for pair in breaks.windows(2) {
        for (u, w) in gl.mapped(pair[0], pair[1]) {
            out.push((u, w * wright_phi(order, u)?.value));
        }
    }
    Ok(out)
}

fn assemble(a: &Operator, nodes_ta: &[f64], rule: &[(f64, f64)]) -> Result<Vec<DMatrix<f64>>> {
    match a.spectral() {
        Some(s) => Ok(nodes_ta
            .par_iter()
            .map(|&ta| {
                let mut v = s.eigenvectors.clone();
                for (j, mut col) in v.column_iter_mut().enumerate() {
                    let l = s.eigenvalues[j];
                    let val: f64 = rule.iter().map(|&(u, w)| w * (ta * u * l).exp()).sum();
                    col *= val;
                }
                v * s.eigenvectors.transpose()
            })
            .collect()),
        None => nodes_ta
            .par_iter()
            .map(|&ta| {
                let d = a.dim();
                let mut acc = DMatrix::zeros(d, d);
                for &(u, w) in rule {
                    acc += semigroup(a, ta * u)? * w;
                }
                Ok(acc)
            })
            .collect(),
    }
}
