use fracvolt_core::kernels::{
    check_completely_monotone, check_completely_positive, CpVerdict, KernelSpec, MonotoneVerdict,
    DEFAULT_CP_TOL, DEFAULT_MU_GRID,
};
use fracvolt_core::operators::Operator;
use fracvolt_core::resolvent::{
    convergence_study, default_probes, method_by_name, op_norm, resolvent_equation_residual,
    ResolventMethod, DEFAULT_N_LIST,
};
use fracvolt_core::stochastic::{
    convolution_convergence, covariance_study, noise_hypotheses, refinement_study,
    second_moment_study, NoiseSpec,
};

use crate::config::ExperimentConfig;
use crate::report::{csv_text, num, Check, Manifest, ReportBundle, Table};
use crate::RunError;

/// Config fields an experiment cannot run without.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Operator,
    Kernel,
    Noise,
    Paths,
}

impl Field {
    pub fn key(self) -> &'static str {
        match self {
            Field::Operator => "operator",
            Field::Kernel => "kernel` or `alpha",
            Field::Noise => "noise",
            Field::Paths => "paths",
        }
    }
}

pub trait Experiment: Send + Sync {
    /// The config's `experiment` value.
    fn name(&self) -> &'static str;
    fn requires(&self) -> &'static [Field];
    /// Runs a validated config. Invariant failures are reported as failed
    /// checks in the bundle, not as errors.
    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError>;
}

pub fn experiments() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(Resolvent),
        Box::new(CpCheck),
        Box::new(Converge),
        Box::new(Simulate),
        Box::new(VerifyStrong),
    ]
}

pub fn experiment_names() -> Vec<&'static str> {
    experiments().iter().map(|e| e.name()).collect()
}

pub fn experiment_by_name(name: &str) -> Result<Box<dyn Experiment>, RunError> {
    experiments()
        .into_iter()
        .find(|e| e.name() == name)
        .ok_or_else(|| {
            RunError::Config(format!(
                "unknown experiment `{name}`; known: {}",
                experiment_names().join(", ")
            ))
        })
}

pub(crate) fn sci(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn bundle(cfg: &ExperimentConfig) -> ReportBundle {
    ReportBundle::new(
        &cfg.experiment,
        Manifest::new(&cfg.experiment, cfg.seed, Some(cfg.clone())),
    )
}

fn kernel(cfg: &ExperimentConfig) -> Result<KernelSpec, RunError> {
    cfg.kernel_spec()
        .ok_or_else(|| RunError::Config("missing `kernel` or `alpha`".into()))
}

/// Configured method, else `ml_spectral` for fractional kernels and
/// `volterra_step` for the rest.
fn method(cfg: &ExperimentConfig, k: &KernelSpec) -> Result<Box<dyn ResolventMethod>, RunError> {
    let name = match (&cfg.method, k) {
        (Some(m), _) => m.as_str(),
        (None, KernelSpec::Fractional { .. } | KernelSpec::ConstantOne) => "ml_spectral",
        (None, _) => "volterra_step",
    };
    let m = method_by_name(name).map_err(|e| RunError::Config(e.to_string()))?;
    if !m.supports(k) {
        return Err(RunError::Config(format!(
            "method `{name}` does not support kernel {k:?}"
        )));
    }
    Ok(m)
}

fn noise(cfg: &ExperimentConfig) -> Result<&NoiseSpec, RunError> {
    cfg.noise
        .as_ref()
        .ok_or_else(|| RunError::Config("missing `noise`".into()))
}

fn paths(cfg: &ExperimentConfig) -> Result<usize, RunError> {
    cfg.paths
        .ok_or_else(|| RunError::Config("missing `paths`".into()))
}

fn report_hypotheses(
    b: &mut ReportBundle,
    noise: &NoiseSpec,
    a: &Operator,
    cfg: &ExperimentConfig,
) -> Result<(), RunError> {
    let h = noise_hypotheses(noise, a, &cfg.time_grid()?)?;
    b.note(format!(
        "noise: Tr Q = {:.6e}, max ||Psi Q^1/2||_HS^2 = {:.6e}, max ||A Psi Q^1/2||_HS^2 = {:.6e}",
        noise.trace_q(),
        h.psi_hs,
        h.a_psi_hs
    ));
    b.check(Check::new(
        "noise_hilbert_schmidt",
        h.finite(),
        "Psi and A Psi are Hilbert-Schmidt against Q",
    ));
    Ok(())
}

struct Resolvent;

impl Experiment for Resolvent {
    fn name(&self) -> &'static str {
        "resolvent"
    }

    fn requires(&self) -> &'static [Field] {
        &[Field::Operator, Field::Kernel]
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
        let a = cfg.build_operator()?;
        let k = kernel(cfg)?;
        let m = method(cfg, &k)?;
        let grid = cfg.time_grid()?;
        let mut fam = m.compute(&a, &k, &grid)?;
        fam.fit_growth();
        let mut b = bundle(cfg);
        b.table("family.csv", csv_text(|w| fam.write_csv(w))?);
        let mut norms = Table::new(&["t", "op_norm"]);
        for (i, s) in fam.mats.iter().enumerate() {
            norms.row(&[num(grid.t(i)), num(op_norm(s))]);
        }
        b.table("norms.csv", norms.finish());
        b.note(format!("method: {}", m.name()));
        if let Some(g) = fam.fitted_type {
            b.note(format!(
                "growth fit: ||S(t)|| <= {:.6} exp({:.6} t)",
                g.m, g.omega
            ));
        }
        let residual = resolvent_equation_residual(&fam, &a, &k)?;
        b.note(format!(
            "resolvent equation residual (product integration): {residual:.3e}"
        ));
        let id = fam.mats[0].clone() - nalgebra::DMatrix::identity(fam.dim(), fam.dim());
        b.check(Check::new("identity_at_zero", id.amax() == 0.0, "S(0) = I"));
        let defect = fam.commutation_defect(&a);
        b.check(Check::new(
            "commutes_with_generator",
            defect <= 1e-8,
            format!("relative defect {defect:.3e} <= 1e-8"),
        ));
        Ok(b)
    }
}

struct CpCheck;

impl Experiment for CpCheck {
    fn name(&self) -> &'static str {
        "cp-check"
    }

    fn requires(&self) -> &'static [Field] {
        &[Field::Kernel]
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
        let k = kernel(cfg)?;
        let grid = cfg.time_grid()?;
        let mu = cfg
            .mu_grid
            .clone()
            .unwrap_or_else(|| DEFAULT_MU_GRID.to_vec());
        let tol = cfg.tol.unwrap_or(DEFAULT_CP_TOL);
        let rep = check_completely_positive(&k, &mu, &grid, tol)?;
        let mut t = Table::new(&["mu", "min_s", "min_r"]);
        for (&m, &(s, r)) in mu.iter().zip(&rep.per_mu) {
            t.row(&[num(m), num(s), num(r)]);
        }
        let mut b = bundle(cfg);
        b.table("cp.csv", t.finish());
        match rep.verdict {
            CpVerdict::CompletelyPositiveOnGrid => b.note("verdict: completely_positive_on_grid"),
            CpVerdict::Violated { mu, t, value } => b.note(format!(
                "verdict: violated (mu = {mu}, t = {t:.6}, value = {value:.6e})"
            )),
        }
        b.note(format!(
            "min s = {:.6e}, min r = {:.6e}",
            rep.min_s, rep.min_r
        ));
        match check_completely_monotone(&k, &grid, 4, tol)? {
            MonotoneVerdict::Pass => b.note("finite differences up to order 4 alternate in sign"),
            MonotoneVerdict::Fail { order, t, value } => b.note(format!(
                "not completely monotone: order {order} difference {value:.3e} at t = {t:.6}"
            )),
        }
        b.check(Check::new(
            "classification_completed",
            true,
            "verdict is a measurement",
        ));
        Ok(b)
    }
}

struct Converge;

impl Experiment for Converge {
    fn name(&self) -> &'static str {
        "converge"
    }

    fn requires(&self) -> &'static [Field] {
        &[Field::Operator, Field::Kernel]
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
        let a = cfg.build_operator()?;
        let k = kernel(cfg)?;
        let m = method(cfg, &k)?;
        let grid = cfg.time_grid()?;
        let n_list = cfg
            .n_list
            .clone()
            .unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
        let rep = convergence_study(&a, &k, &grid, &n_list, &default_probes(a.dim()), m.as_ref())?;
        let mut b = bundle(cfg);
        b.table("converge.csv", csv_text(|w| rep.write_csv(w))?);
        b.note(format!("method: {}", m.name()));
        b.note(format!(
            "strictly decreasing: {}, err(last)/err(first) = {:.4e}",
            rep.strictly_decreasing(),
            rep.reduction()
        ));
        let errs = rep.errors();
        let nonincreasing = errs.windows(2).all(|w| w[1] <= w[0]);
        b.check(Check::new(
            "error_nonincreasing_in_n",
            nonincreasing,
            format!("errors [{}]", sci(&errs)),
        ));
        Ok(b)
    }
}

struct Simulate;

impl Experiment for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn requires(&self) -> &'static [Field] {
        &[Field::Operator, Field::Kernel, Field::Noise, Field::Paths]
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
        let a = cfg.build_operator()?;
        let k = kernel(cfg)?;
        let m = method(cfg, &k)?;
        let grid = cfg.time_grid()?;
        let noise = noise(cfg)?;
        let n = paths(cfg)?;
        let mut b = bundle(cfg);
        report_hypotheses(&mut b, noise, &a, cfg)?;
        let fam = m.compute(&a, &k, &grid)?;
        let st = second_moment_study(&fam, noise, cfg.seed, n)?;
        b.table("moments.csv", csv_text(|w| st.write_csv(w))?);
        for t in [grid.t_end() / 2.0, grid.t_end()] {
            let r = st.row_at(t);
            b.check(Check::new(
                format!("ito_isometry_t={t}"),
                r.z_score() <= 3.0,
                format!(
                    "E|W|^2 = {:.6e} +- {:.2e}, isometry {:.6e}, z = {:.2}",
                    r.mean,
                    r.stderr,
                    r.analytic_value,
                    r.z_score()
                ),
            ));
        }
        if a.dim() <= 50 {
            let cov = covariance_study(&fam, noise, grid.steps(), cfg.seed, n)?;
            let mut t = Table::new(&["i", "j", "sample", "analytic"]);
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    t.row(&[
                        i.to_string(),
                        j.to_string(),
                        num(cov.sample[(i, j)]),
                        num(cov.analytic[(i, j)]),
                    ]);
                }
            }
            b.table("covariance.csv", t.finish());
            b.check(Check::new(
                "covariance_at_t_end",
                cov.max_z <= 5.0,
                format!("max entrywise z = {:.2} <= 5", cov.max_z),
            ));
        }
        Ok(b)
    }
}

struct VerifyStrong;

impl Experiment for VerifyStrong {
    fn name(&self) -> &'static str {
        "verify-strong"
    }

    fn requires(&self) -> &'static [Field] {
        &[Field::Operator, Field::Kernel, Field::Noise, Field::Paths]
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
        let a = cfg.build_operator()?;
        let k = kernel(cfg)?;
        let m = method(cfg, &k)?;
        let grid = cfg.time_grid()?;
        let noise = noise(cfg)?;
        let n = paths(cfg)?;
        let levels = cfg.levels.unwrap_or(3);
        let mut b = bundle(cfg);
        report_hypotheses(&mut b, noise, &a, cfg)?;
        let reps = refinement_study(&a, &k, noise, &grid, levels, n, cfg.seed, m.as_ref())?;
        let mut t = Table::new(&["level", "dt", "mean_sup", "stderr", "refinement_order"]);
        for (l, r) in reps.iter().enumerate() {
            t.row(&[
                l.to_string(),
                num(r.grid.dt()),
                num(r.mean_sup),
                num(r.stderr()),
                r.refinement_order.map(num).unwrap_or_default(),
            ]);
            b.table(
                &format!("residual_level{l}.csv"),
                csv_text(|w| r.write_csv(w))?,
            );
        }
        b.table("residuals.csv", t.finish());
        let means: Vec<f64> = reps.iter().map(|r| r.mean_sup).collect();
        b.check(Check::new(
            "strong_residual_decreasing",
            means.windows(2).all(|w| w[1] < w[0]),
            format!("mean sup residual per level [{}]", sci(&means)),
        ));
        if let Some(n_list) = &cfg.n_list {
            let p = cfg.p.unwrap_or(2.0);
            let rep =
                convolution_convergence(&a, &k, noise, &grid, n_list, p, n, cfg.seed, m.as_ref())?;
            b.table("yosida_mc.csv", csv_text(|w| rep.write_csv(w))?);
            if p > 2.0 {
                b.note("p > 2: sup statistics are heavy tailed; trust needs about 1e5 paths");
            }
            b.check(Check::new(
                "yosida_convolution_decreasing",
                rep.decreasing_beyond(2.0),
                format!(
                    "E sup|W_S - W_Sn|^{p} = [{}], each drop beyond 2 paired standard errors",
                    sci(&rep.estimates())
                ),
            ));
        }
        Ok(b)
    }
}
