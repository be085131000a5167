//! Desk-scale acceptance suite, criteria 1 to 10.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use fracvolt_core::kernels::{
    check_completely_positive, KernelSpec, DEFAULT_CP_TOL, DEFAULT_MU_GRID,
};
use fracvolt_core::operators::{build_operator, Operator, OperatorSpec};
use fracvolt_core::quad::adaptive;
use fracvolt_core::resolvent::{
    convergence_study, default_probes, method_by_name, resolvent_ml, resolvent_subordination,
    resolvent_volterra_step, ResolventFamily, SubordinationQuad,
};
use fracvolt_core::specfun::{mittag_leffler, wright_phi, FracOrder};
use fracvolt_core::stochastic::{
    convolution_convergence, covariance_study, refinement_study, second_moment_study, NoiseSpec,
};
use fracvolt_core::TimeGrid;

use crate::experiments::sci;
use crate::report::{csv_text, num, Check, Manifest, ReportBundle, Table};
use crate::RunError;

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "special-function identities"),
    (2, "closed-form anchors"),
    (3, "cross-method resolvent agreement"),
    (4, "semigroup and cosine endpoints"),
    (5, "complete-positivity dichotomy"),
    (6, "Yosida resolvent convergence"),
    (7, "Ito isometry and covariance"),
    (8, "strong-solution residual"),
    (9, "Yosida stochastic convolution trend"),
    (10, "determinism across thread counts"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Paths for the isometry criterion; the residual and Yosida criteria
    /// use a tenth and a fifth of this.
    pub paths: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 20_240_901,
        }
    }
}

impl SelftestOptions {
    fn seed_for(&self, id: u8) -> u64 {
        self.seed.wrapping_add(u64::from(id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
    pub tables: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub outcome: Outcome,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} | {} | {}",
            self.id,
            if self.outcome.passed { "PASS" } else { "FAIL" },
            self.title,
            self.outcome.detail
        )
    }
}

fn within(limit_s: f64, t0: Instant) -> bool {
    t0.elapsed().as_secs_f64() < limit_s
}

fn lap(n: usize) -> Operator {
    build_operator(&OperatorSpec::Laplacian1d { n, length: PI }).expect("laplacian")
}

fn max_gap(a: &ResolventFamily, b: &ResolventFamily) -> f64 {
    a.mats
        .iter()
        .zip(&b.mats)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

fn trace_class(d: usize) -> NoiseSpec {
    NoiseSpec::wiener((1..=d).map(|j| 1.0 / (j * j) as f64).collect())
}

fn phi(g: f64, s: f64) -> f64 {
    FracOrder::subordinating(g)
        .and_then(|o| wright_phi(o, s))
        .map_or(f64::NAN, |e| e.value)
}

fn ml(a: f64, z: f64) -> f64 {
    FracOrder::new(a)
        .and_then(|o| mittag_leffler(o, z))
        .map_or(f64::NAN, |e| e.value)
}

fn c1() -> Result<Outcome, RunError> {
    let t0 = Instant::now();
    let breaks: Vec<f64> = (0..=80).map(|i| 0.5 * f64::from(i)).collect();
    let half_line = |f: &dyn Fn(f64) -> f64| adaptive(f, &breaks, 1e-14, 1e-13, 20_000).value;
    let mut t = Table::new(&["gamma", "quantity", "integral", "reference", "abs_err"]);
    let mut worst: f64 = 0.0;
    for g in [0.3, 0.5, 0.8] {
        let mass = half_line(&|s| phi(g, s));
        worst = worst.max((mass - 1.0).abs());
        t.row(&[
            num(g),
            "mass".into(),
            num(mass),
            num(1.0),
            num((mass - 1.0).abs()),
        ]);
        for z in [0.5, 1.0, 5.0] {
            let lt = half_line(&|s| phi(g, s) * (-z * s).exp());
            let want = ml(g, -z);
            let err = (lt - want).abs();
            worst = worst.max(err);
            t.row(&[
                num(g),
                format!("laplace_z={z}"),
                num(lt),
                num(want),
                num(err),
            ]);
        }
    }
    let fast = within(10.0, t0);
    Ok(Outcome {
        passed: worst <= 1e-6 && fast,
        detail: format!("max error {worst:.2e} <= 1e-6, runtime under 10 s: {fast}"),
        tables: vec![("c01_wright.csv".into(), t.finish())],
    })
}

fn c2() -> Result<Outcome, RunError> {
    let g = |x: f64| statrs::function::erf::erfc(x);
    let cases = [
        ("E_0.5(-1)", ml(0.5, -1.0), E * g(1.0)),
        ("E_2(-1)", ml(2.0, -1.0), 1.0f64.cos()),
        ("Phi_0.5(1)", phi(0.5, 1.0), (-0.25f64).exp() / PI.sqrt()),
    ];
    let mut t = Table::new(&["case", "value", "reference", "rel_err"]);
    let mut worst: f64 = 0.0;
    for (name, v, want) in cases {
        let rel = ((v - want) / want).abs();
        worst = worst.max(rel);
        t.row(&[name.into(), num(v), num(want), num(rel)]);
    }
    Ok(Outcome {
        passed: worst <= 1e-9,
        detail: format!("max relative error {worst:.2e} <= 1e-9"),
        tables: vec![("c02_anchors.csv".into(), t.finish())],
    })
}

fn c3() -> Result<Outcome, RunError> {
    let t0 = Instant::now();
    let a = Operator::scalar(-1.0)?;
    let q = SubordinationQuad::default();
    let g = TimeGrid::with_step(2.0, 1e-3)?;
    let g2 = g.refined();
    let mut t = Table::new(&[
        "alpha",
        "ml_vs_subordination",
        "volterra_gap",
        "volterra_gap_half_step",
        "shrink",
    ]);
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64, f64::INFINITY);
    for alpha in [0.3, 0.5, 0.9] {
        let k = KernelSpec::fractional(alpha);
        let m = resolvent_ml(&a, alpha, &g)?;
        let sub = max_gap(&m, &resolvent_subordination(&a, alpha, &g, &q)?);
        let v1 = max_gap(&m, &resolvent_volterra_step(&a, &k, &g)?);
        let v2 = max_gap(
            &resolvent_ml(&a, alpha, &g2)?,
            &resolvent_volterra_step(&a, &k, &g2)?,
        );
        ok &= sub <= 1e-6 && v1 <= 1e-3 && v1 / v2 >= 1.5;
        worst = (worst.0.max(sub), worst.1.max(v1), worst.2.min(v1 / v2));
        t.row(&[num(alpha), num(sub), num(v1), num(v2), num(v1 / v2)]);
    }
    let fast = within(60.0, t0);
    Ok(Outcome {
        passed: ok && fast,
        detail: format!(
            "ml vs subordination {:.2e} <= 1e-6, volterra gap {:.2e} <= 1e-3, min shrink {:.2} >= 1.5, runtime under 60 s: {fast}",
            worst.0, worst.1, worst.2
        ),
        tables: vec![("c03_cross_method.csv".into(), t.finish())],
    })
}

fn c4() -> Result<Outcome, RunError> {
    let a = lap(20);
    let g = TimeGrid::new(1.0, 50)?;
    let fam = resolvent_ml(&a, 1.0, &g)?;
    let dense = a.matrix().clone();
    let semigroup_err = (0..g.len())
        .map(|k| (&fam.mats[k] - (&dense * g.t(k)).exp()).amax())
        .fold(0.0, f64::max);
    let c = resolvent_ml(&Operator::scalar(-1.0)?, 2.0, &TimeGrid::new(PI, 8)?)?;
    let cos_err = (c.mats[8][(0, 0)] + 1.0).abs();
    let mut t = Table::new(&["case", "max_abs_err"]);
    t.row(&["laplacian_20_alpha_1_vs_expm".into(), num(semigroup_err)]);
    t.row(&["scalar_alpha_2_at_pi".into(), num(cos_err)]);
    Ok(Outcome {
        passed: semigroup_err <= 1e-8 && cos_err <= 1e-8,
        detail: format!(
            "vs matrix exponential {semigroup_err:.2e} <= 1e-8, S(pi) + 1 = {cos_err:.2e}"
        ),
        tables: vec![("c04_endpoints.csv".into(), t.finish())],
    })
}

fn c5() -> Result<Outcome, RunError> {
    let t0 = Instant::now();
    let g = TimeGrid::with_step(2.0, 1e-3)?;
    let mut t = Table::new(&["alpha", "expected", "verdict", "min_s", "min_r"]);
    let mut ok = true;
    let mut wrong = Vec::new();
    for alpha in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75] {
        let rep = check_completely_positive(
            &KernelSpec::fractional(alpha),
            &DEFAULT_MU_GRID,
            &g,
            DEFAULT_CP_TOL,
        )?;
        let expect = alpha <= 1.0;
        if rep.is_positive() != expect {
            ok = false;
            wrong.push(alpha);
        }
        let name = |p: bool| {
            if p {
                "completely_positive_on_grid"
            } else {
                "violated"
            }
        };
        t.row(&[
            num(alpha),
            name(expect).into(),
            name(rep.is_positive()).into(),
            num(rep.min_s),
            num(rep.min_r),
        ]);
    }
    let fast = within(30.0, t0);
    Ok(Outcome {
        passed: ok && fast,
        detail: format!("misclassified alphas: {wrong:?}, runtime under 30 s: {fast}"),
        tables: vec![("c05_cp.csv".into(), t.finish())],
    })
}

fn c6() -> Result<Outcome, RunError> {
    let t0 = Instant::now();
    let a = lap(20);
    let g = TimeGrid::with_step(1.0, 1e-3)?;
    let ml = method_by_name("ml_spectral")?;
    let n_list = [2.0, 8.0, 32.0, 128.0];
    let mut t = Table::new(&["alpha", "n", "err", "sup_norm"]);
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0] {
        let rep = convergence_study(
            &a,
            &KernelSpec::fractional(alpha),
            &g,
            &n_list,
            &default_probes(20),
            ml.as_ref(),
        )?;
        for r in &rep.rows {
            t.row(&[num(alpha), num(r.n), num(r.err), num(r.sup_norm)]);
        }
        ok &= rep.strictly_decreasing() && rep.reduction() <= 0.05;
        parts.push(format!(
            "alpha {alpha}: decreasing {}, err(128)/err(2) = {:.3}",
            rep.strictly_decreasing(),
            rep.reduction()
        ));
    }
    let fast = within(120.0, t0);
    Ok(Outcome {
        passed: ok && fast,
        detail: format!(
            "{} (need <= 0.05), runtime under 120 s: {fast}",
            parts.join("; ")
        ),
        tables: vec![("c06_yosida.csv".into(), t.finish())],
    })
}

fn c7(opts: &SelftestOptions) -> Result<Outcome, RunError> {
    let seed = opts.seed_for(7);
    let n = opts.paths.max(2);
    let g = TimeGrid::new(1.0, 100)?;
    let noise = trace_class(10);
    let fam = resolvent_ml(&lap(10), 0.5, &g)?;
    let st = second_moment_study(&fam, &noise, seed, n)?;
    let z: Vec<f64> = [0.5, 1.0].iter().map(|&t| st.row_at(t).z_score()).collect();
    let cov = covariance_study(&fam, &noise, g.steps(), seed, n)?;
    let gs = TimeGrid::with_step(1.0, 1e-3)?;
    let sfam = resolvent_ml(&Operator::scalar(-1.0)?, 1.0, &gs)?;
    let ss = second_moment_study(&sfam, &NoiseSpec::wiener(vec![1.0]), seed, n)?;
    let r = ss.row_at(1.0);
    let exact = (1.0 - (-2.0f64).exp()) / 2.0;
    let zs = (r.mean - exact).abs() / r.stderr;
    let mut t = Table::new(&["t", "mean", "stderr", "closed_form", "z"]);
    t.row(&[num(1.0), num(r.mean), num(r.stderr), num(exact), num(zs)]);
    Ok(Outcome {
        passed: z.iter().all(|&v| v <= 3.0) && cov.max_z <= 5.0 && zs <= 3.0,
        detail: format!(
            "laplacian z at t=0.5, 1: [{}] <= 3, covariance max z {:.2} <= 5, scalar closed form z {zs:.2} <= 3",
            z.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
            cov.max_z
        ),
        tables: vec![
            ("c07_laplacian_moments.csv".into(), csv_text(|w| st.write_csv(w))?),
            ("c07_scalar.csv".into(), t.finish()),
        ],
    })
}

fn c8(opts: &SelftestOptions) -> Result<Outcome, RunError> {
    let seed = opts.seed_for(8);
    let n = (opts.paths / 10).max(2);
    let ml = method_by_name("ml_spectral")?;
    let coarse = TimeGrid::with_step(1.0, 4e-3)?;
    let mut t = Table::new(&["case", "alpha", "level", "dt", "mean_sup", "stderr"]);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a, noise) in [
        (
            "scalar",
            Operator::scalar(-1.0)?,
            NoiseSpec::wiener(vec![1.0]),
        ),
        ("laplacian_10", lap(10), trace_class(10)),
    ] {
        for alpha in [0.5, 1.0] {
            let reps = refinement_study(
                &a,
                &KernelSpec::fractional(alpha),
                &noise,
                &coarse,
                3,
                n,
                seed,
                ml.as_ref(),
            )?;
            let m: Vec<f64> = reps.iter().map(|r| r.mean_sup).collect();
            for (l, r) in reps.iter().enumerate() {
                t.row(&[
                    name.into(),
                    num(alpha),
                    l.to_string(),
                    num(r.grid.dt()),
                    num(r.mean_sup),
                    num(r.stderr()),
                ]);
            }
            let pass = m.windows(2).all(|w| w[1] < w[0]) && m[2] <= 0.5 * m[0];
            ok &= pass;
            parts.push(format!(
                "{name} alpha {alpha}: final/first {:.3}",
                m[2] / m[0]
            ));
        }
    }
    Ok(Outcome {
        passed: ok,
        detail: format!("{} (strictly decreasing, need <= 0.5)", parts.join("; ")),
        tables: vec![("c08_residuals.csv".into(), t.finish())],
    })
}

fn c9(opts: &SelftestOptions) -> Result<Outcome, RunError> {
    let seed = opts.seed_for(9);
    let n = (opts.paths / 5).max(2);
    let ml = method_by_name("ml_spectral")?;
    let g = TimeGrid::new(1.0, 100)?;
    let n_list = [2.0, 8.0, 32.0, 128.0];
    let mut t = Table::new(&[
        "case",
        "n",
        "mean",
        "stderr",
        "paired_diff",
        "paired_stderr",
    ]);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a, alpha, noise) in [
        (
            "scalar",
            Operator::scalar(-1.0)?,
            1.0,
            NoiseSpec::wiener(vec![1.0]),
        ),
        ("laplacian_10", lap(10), 0.5, trace_class(10)),
    ] {
        let rep = convolution_convergence(
            &a,
            &KernelSpec::fractional(alpha),
            &noise,
            &g,
            &n_list,
            2.0,
            n,
            seed,
            ml.as_ref(),
        )?;
        for r in &rep.rows {
            let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
            t.row(&[
                name.into(),
                num(r.n),
                num(r.mean),
                num(r.stderr),
                opt(r.paired_diff),
                opt(r.paired_stderr),
            ]);
        }
        ok &= rep.decreasing_beyond(2.0);
        parts.push(format!("{name}: [{}]", sci(&rep.estimates())));
    }
    Ok(Outcome {
        passed: ok,
        detail: format!(
            "{}, each drop beyond 2 paired standard errors",
            parts.join("; ")
        ),
        tables: vec![("c09_yosida_mc.csv".into(), t.finish())],
    })
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Criteria 1 to 9 under `threads` worker threads, as a bundle.
fn data_bundle(opts: &SelftestOptions, threads: usize) -> Result<ReportBundle, RunError> {
    let res = in_pool(threads, || run_criteria(1..=9, opts))??;
    Ok(bundle_of(&res, opts))
}

/// Criterion 10 against an existing run of criteria 1 to 9, or two fresh
/// runs when there is none.
fn c10(opts: &SelftestOptions, reference: Option<&ReportBundle>) -> Result<Outcome, RunError> {
    let current = rayon::current_num_threads();
    let (a, b, threads) = match reference {
        Some(r) => {
            let other = if current > 1 { 1 } else { 2 };
            (r.clone(), data_bundle(opts, other)?, (current, other))
        }
        None => (data_bundle(opts, 1)?, data_bundle(opts, 2)?, (1, 2)),
    };
    let pair = format!("{} and {} threads", threads.0, threads.1);
    let same = a.hash() == b.hash();
    let differing: Vec<String> = a
        .files()
        .iter()
        .filter(|(k, v)| b.files().get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    Ok(Outcome {
        passed: same,
        detail: if same {
            format!("bundle hash identical for {pair}")
        } else {
            format!("{pair}: bundles differ in {}", differing.join(", "))
        },
        tables: Vec::new(),
    })
}

/// A single criterion; criterion 10 runs 1 to 9 twice.
pub fn criterion(id: u8, opts: &SelftestOptions) -> Result<Outcome, RunError> {
    match id {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(opts),
        8 => c8(opts),
        9 => c9(opts),
        10 => c10(opts, None),
        _ => Err(RunError::Config(format!("no criterion {id}"))),
    }
}

fn title(id: u8) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("?", |c| c.1)
}

pub fn run_criteria(
    ids: impl IntoIterator<Item = u8>,
    opts: &SelftestOptions,
) -> Result<Vec<CriterionResult>, RunError> {
    ids.into_iter()
        .map(|id| {
            let t0 = Instant::now();
            let outcome = criterion(id, opts)?;
            Ok(CriterionResult {
                id,
                title: title(id),
                outcome,
                elapsed: t0.elapsed(),
            })
        })
        .collect()
}

/// Deterministic bundle of criterion results; timings stay out.
pub fn bundle_of(results: &[CriterionResult], opts: &SelftestOptions) -> ReportBundle {
    let mut m = Manifest::new("selftest", opts.seed, None);
    m.settings.insert("paths".into(), opts.paths.to_string());
    let mut b = ReportBundle::new("selftest", m);
    let mut t = Table::new(&["criterion", "title", "verdict", "detail"]);
    for r in results {
        let verdict = if r.outcome.passed { "PASS" } else { "FAIL" };
        t.row(&[
            r.id.to_string(),
            r.title.into(),
            verdict.into(),
            r.outcome.detail.clone(),
        ]);
        for (name, csv) in &r.outcome.tables {
            b.table(name, csv.clone());
        }
        b.check(Check::new(
            format!("criterion {} ({})", r.id, r.title),
            r.outcome.passed,
            r.outcome.detail.clone(),
        ));
    }
    b.table("criteria.csv", t.finish());
    b
}

/// Full suite. Criterion 10 reruns 1 to 9 with a different thread count
/// and compares bundles.
pub fn selftest(
    opts: &SelftestOptions,
    mut progress: impl FnMut(&CriterionResult),
) -> Result<(ReportBundle, Vec<CriterionResult>), RunError> {
    let mut results = Vec::new();
    for id in 1..=9 {
        let r = run_criteria([id], opts)?.remove(0);
        progress(&r);
        results.push(r);
    }
    let reference = bundle_of(&results, opts);
    let t0 = Instant::now();
    let r10 = CriterionResult {
        id: 10,
        title: title(10),
        outcome: c10(opts, Some(&reference))?,
        elapsed: t0.elapsed(),
    };
    progress(&r10);
    results.push(r10);
    Ok((bundle_of(&results, opts), results))
}
