//! Experiment orchestration: dispatch of [`RunConfig`] commands, the
//! walk-versus-Brox distributional comparison, the Sinai scaling report and
//! persistence of CSV / JSON artifacts.
//!
//! Every random draw is keyed by `(seed_root, label, index)`, and parallel
//! loops collect in index order, so identical configurations produce
//! bitwise-identical CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::diffusion::{is_horizon_error, sample_annealed_terminal, AnnealedParams, QuenchedOptions, QuenchedSampler};
use crate::environment::{potential_from_environment, sample_environment, sample_two_sided_bm, ScalingConfig};
use crate::error::{Error, Result};
use crate::forms::{
    convergence_experiment, discrete_form, limit_form_dirichlet, limit_form_generator, truncation_radius,
    vanishing_noise_experiment, ConvergenceOptions, FormResult, SIGN_CONVENTION,
};
use crate::grid::PathGrid;
use crate::seed::Seed;
use crate::semigroup::{
    generator_convergence_experiment, semigroup_convergence_experiment, semigroup_options, RefinementOptions,
};
use crate::stats::{ks_two_sample, quantiles, KSResult};
use crate::test_function::TestFunction;
use crate::walk::{rescale_to_diffusion, scaled_walk_endpoint, simulate_scaled_walk, sinai_statistic, steps_until};

/// Quantile levels reported by the Sinai scaling report.
pub const QUANTILE_LEVELS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Largest allowed ratio between (log n)^2-scaled spreads at different n.
pub const SINAI_STABILITY_FACTOR: f64 = 2.0;

/// Required shrink factor of the √n-scaled IQR from the first to the last n.
pub const SQRT_SHRINK_FACTOR: f64 = 2.0;

/// Number of times the environment window is doubled before giving up.
pub const MAX_WINDOW_DOUBLINGS: u32 = 6;

/// Number of probe functions in the generator-convergence output.
pub const GENERATOR_PROBES: usize = 8;

/// The test-function pair used by the form commands.
pub fn standard_pair() -> (TestFunction<f64>, TestFunction<f64>) {
    (
        TestFunction::gaussian_bump(0.0, 1.0, 1.0),
        TestFunction::gaussian_bump(0.5, 0.8, 1.0),
    )
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// One KS comparison together with the scale it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsRow {
    pub comparison: &'static str,
    /// Scaling index of the walk sample, `None` for Brox versus Gaussian.
    pub n: Option<u64>,
    pub result: KSResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub n_list: Vec<u64>,
    pub t: f64,
    pub num_samples: usize,
    /// `walk[j]` holds the samples of `S^{(n)}_t / √n` for `n = n_list[j]`.
    pub walk: Vec<Vec<f64>>,
    pub brox: Vec<f64>,
    /// Indices of the censored Brox draws.
    pub brox_censored: Vec<usize>,
    pub gaussian: Vec<f64>,
    pub ks: Vec<KsRow>,
}

impl DistributionReport {
    fn find(&self, comparison: &str, n: Option<u64>) -> Option<&KSResult> {
        self.ks
            .iter()
            .find(|r| r.comparison == comparison && r.n == n)
            .map(|r| &r.result)
    }

    /// `KS(walk_n, brox)` per entry of `n_list`.
    pub fn walk_vs_brox(&self) -> Vec<KSResult> {
        self.n_list
            .iter()
            .map(|&n| *self.find("walk-brox", Some(n)).expect("present"))
            .collect()
    }

    pub fn walk_vs_gaussian(&self, n: u64) -> Option<KSResult> {
        self.find("walk-gaussian", Some(n)).copied()
    }

    pub fn brox_vs_gaussian(&self) -> KSResult {
        *self.find("brox-gaussian", None).expect("present")
    }

    pub fn walk_vs_brox_decreasing(&self) -> bool {
        self.walk_vs_brox().windows(2).all(|w| w[1].statistic < w[0].statistic)
    }

    /// CSV `comparison,n,statistic,size_a,size_b,threshold,reject_at_5pct,brox_censored`.
    pub fn ks_csv(&self) -> String {
        let mut s =
            String::from("comparison,n,statistic,size_a,size_b,threshold,reject_at_5pct,brox_censored\n");
        for r in &self.ks {
            let k = &r.result;
            let _ = writeln!(
                s,
                "{},{},{:.16e},{},{},{:.16e},{},{}",
                r.comparison,
                fmt_opt(r.n),
                k.statistic,
                k.sample_sizes.0,
                k.sample_sizes.1,
                k.threshold,
                k.reject_at_5pct,
                self.brox_censored.len()
            );
        }
        s
    }

    /// CSV `source,n,value` with every sample.
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("source,n,value\n");
        for (n, v) in self.n_list.iter().zip(&self.walk) {
            for x in v {
                let _ = writeln!(s, "walk,{n},{x:.16e}");
            }
        }
        for x in &self.brox {
            let _ = writeln!(s, "brox,,{x:.16e}");
        }
        for x in &self.gaussian {
            let _ = writeln!(s, "gaussian,,{x:.16e}");
        }
        s
    }
}

/// Annealed samples of the scaled walk at time `t` for one `n`.
pub fn walk_samples(n: u64, t: f64, num_samples: usize, root: Seed) -> Result<Vec<f64>> {
    let cfg = ScalingConfig::<f64>::new(n)?;
    let steps = steps_until(&cfg, t);
    let reach = steps as i64;
    let env_label = format!("walk-env-{n}");
    let walk_label = format!("walk-{n}");
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let env = sample_environment(-reach - 1, reach + 1, root.derive(&env_label, i as u64))?;
            let s = scaled_walk_endpoint(&env, n, steps, root.derive(&walk_label, i as u64))?;
            Ok(s as f64 * cfg.delta)
        })
        .collect()
}

fn annealed_params(cfg: &RunConfig) -> AnnealedParams<f64> {
    let mut p = AnnealedParams::at_time(cfg.t_max);
    p.window = cfg.spatial_window;
    p.dx = cfg.dx;
    p.quenched = QuenchedOptions {
        du: cfg.du,
        ..QuenchedOptions::default()
    };
    p.max_window_doublings = MAX_WINDOW_DOUBLINGS;
    p
}

/// Largest fraction of Brox draws that may be censored before
/// [`brox_samples`] fails.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

/// Annealed Brox draws, with the draws that hit the horizon or window caps
/// (or whose scale function underflows on the enlarged window) removed.
#[derive(Debug, Clone, PartialEq)]
pub struct BroxSamples {
    pub values: Vec<f64>,
    /// Indices of the censored draws.
    pub censored: Vec<usize>,
}

/// Annealed samples of the Brox diffusion at time `cfg.t_max`.
///
/// A draw that fails is censored; the whole call fails when more than
/// [`MAX_CENSORED_FRACTION`] of the draws are censored.
pub fn brox_samples(cfg: &RunConfig, label: &str) -> Result<BroxSamples> {
    let params = annealed_params(cfg);
    let root = Seed(cfg.seed_root);
    let draws: Vec<Result<f64>> = (0..cfg.num_samples)
        .into_par_iter()
        .map(|i| sample_annealed_terminal(&params, cfg.t_max, root.derive(label, i as u64)))
        .collect();
    let mut values = Vec::with_capacity(draws.len());
    let mut censored = Vec::new();
    let mut first_err = None;
    for (i, d) in draws.into_iter().enumerate() {
        match d {
            Ok(v) => values.push(v),
            Err(e) => {
                censored.push(i);
                first_err.get_or_insert(e);
            }
        }
    }
    if censored.len() as f64 > MAX_CENSORED_FRACTION * cfg.num_samples as f64 || values.is_empty() {
        return Err(first_err.expect("censored draws carry an error"));
    }
    Ok(BroxSamples { values, censored })
}

/// Samples of `N(0, t)`.
pub fn gaussian_samples(num_samples: usize, t: f64, seed: Seed) -> Vec<f64> {
    let mut rng = seed.derive("gaussian", 0).rng();
    let sd = t.sqrt();
    (0..num_samples)
        .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// Walk at each `n` against the Brox diffusion and against the Gaussian.
pub fn compare_distributions(cfg: &RunConfig) -> Result<DistributionReport> {
    let root = Seed(cfg.seed_root);
    let walk = cfg
        .n_list
        .iter()
        .map(|&n| walk_samples(n, cfg.t_max, cfg.num_samples, root))
        .collect::<Result<Vec<_>>>()?;
    let BroxSamples {
        values: brox,
        censored: brox_censored,
    } = brox_samples(cfg, "brox")?;
    let gaussian = gaussian_samples(cfg.num_samples, cfg.t_max, root);
    let mut ks = Vec::new();
    for (&n, w) in cfg.n_list.iter().zip(&walk) {
        ks.push(KsRow {
            comparison: "walk-brox",
            n: Some(n),
            result: ks_two_sample(w, &brox)?,
        });
        ks.push(KsRow {
            comparison: "walk-gaussian",
            n: Some(n),
            result: ks_two_sample(w, &gaussian)?,
        });
    }
    ks.push(KsRow {
        comparison: "brox-gaussian",
        n: None,
        result: ks_two_sample(&brox, &gaussian)?,
    });
    Ok(DistributionReport {
        n_list: cfg.n_list.clone(),
        t: cfg.t_max,
        num_samples: cfg.num_samples,
        walk,
        brox,
        brox_censored,
        gaussian,
        ks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    /// `"log2"` for `R_n / (log n)^2`, `"sqrt"` for `R_n / √n`.
    pub scaling: &'static str,
    pub n: u64,
    pub quantiles: [f64; 5],
    pub median_abs: f64,
}

impl QuantileRow {
    pub fn iqr(&self) -> f64 {
        self.quantiles[3] - self.quantiles[1]
    }

    pub fn spread_90_10(&self) -> f64 {
        self.quantiles[4] - self.quantiles[0]
    }
}

/// One verdict check: the observed value, the threshold it is compared
/// against and the outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinaiReport {
    pub n_list: Vec<u64>,
    pub num_samples: usize,
    pub rows: Vec<QuantileRow>,
    pub checks: Vec<Check>,
}

impl SinaiReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn row(&self, scaling: &str, n: u64) -> Option<&QuantileRow> {
        self.rows.iter().find(|r| r.scaling == scaling && r.n == n)
    }

    /// CSV `scaling,n,q10,q25,q50,q75,q90,median_abs,num_samples`.
    pub fn quantiles_csv(&self) -> String {
        let mut s = String::from("scaling,n,q10,q25,q50,q75,q90,median_abs,num_samples\n");
        for r in &self.rows {
            let q = &r.quantiles;
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.scaling, r.n, q[0], q[1], q[2], q[3], q[4], r.median_abs, self.num_samples
            );
        }
        s
    }

    /// CSV `check,value,threshold,pass`.
    pub fn verdict_csv(&self) -> String {
        checks_csv(&self.checks)
    }
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,value,threshold,pass\n");
    for c in checks {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{}", c.name, c.value, c.threshold, c.pass);
    }
    s
}

fn max_ratio(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Samples of `R_n / (log n)^2` for Sinai's walk at one `n`.
pub fn sinai_samples(n: u64, num_samples: usize, root: Seed) -> Result<Vec<f64>> {
    let reach = n as i64;
    let env_label = format!("sinai-env-{n}");
    let walk_label = format!("sinai-walk-{n}");
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let env = sample_environment(-reach - 1, reach + 1, root.derive(&env_label, i as u64))?;
            sinai_statistic(&env, n, root.derive(&walk_label, i as u64))
        })
        .collect()
}

/// Quantiles of `R_n` under the `(log n)^2` and `√n` scalings, with the
/// stability / shrinkage verdict.
///
/// The statistic is symmetric, so its median sits near 0 and a ratio test on
/// signed quantiles is meaningless. Stability is therefore checked on the
/// spreads (IQR and 90-10 range), and non-degeneracy on the median of `|R_n|`.
pub fn sinai_scaling_report(cfg: &RunConfig) -> Result<SinaiReport> {
    let root = Seed(cfg.seed_root);
    let mut log_rows = Vec::new();
    let mut sqrt_rows = Vec::new();
    for &n in &cfg.n_list {
        let stat = sinai_samples(n, cfg.num_samples, root)?;
        let l2 = (n as f64).ln().powi(2);
        let to_sqrt = l2 / (n as f64).sqrt();
        let sqrt_stat: Vec<f64> = stat.iter().map(|s| s * to_sqrt).collect();
        for (scaling, v, rows) in [("log2", &stat, &mut log_rows), ("sqrt", &sqrt_stat, &mut sqrt_rows)] {
            let q = quantiles(v, &QUANTILE_LEVELS)?;
            let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            let median_abs = quantiles(&abs, &[0.5])?[0];
            rows.push(QuantileRow {
                scaling,
                n,
                quantiles: [q[0], q[1], q[2], q[3], q[4]],
                median_abs,
            });
        }
    }
    let mut checks = Vec::new();
    let iqrs: Vec<f64> = log_rows.iter().map(QuantileRow::iqr).collect();
    let spreads: Vec<f64> = log_rows.iter().map(QuantileRow::spread_90_10).collect();
    let r = max_ratio(&iqrs);
    checks.push(Check {
        name: "log2_iqr_max_ratio".into(),
        value: r,
        threshold: SINAI_STABILITY_FACTOR,
        pass: r <= SINAI_STABILITY_FACTOR,
    });
    let r = max_ratio(&spreads);
    checks.push(Check {
        name: "log2_q90_q10_max_ratio".into(),
        value: r,
        threshold: SINAI_STABILITY_FACTOR,
        pass: r <= SINAI_STABILITY_FACTOR,
    });
    for row in &log_rows {
        checks.push(Check {
            name: format!("log2_median_abs_n{}", row.n),
            value: row.median_abs,
            threshold: 0.0,
            pass: row.median_abs > 0.0,
        });
    }
    let first = sqrt_rows.first().expect("non-empty n_list").iqr();
    let last = sqrt_rows.last().expect("non-empty n_list").iqr();
    let shrink = if last > 0.0 { first / last } else { f64::INFINITY };
    checks.push(Check {
        name: "sqrt_iqr_shrink_factor".into(),
        value: shrink,
        threshold: SQRT_SHRINK_FACTOR,
        pass: shrink >= SQRT_SHRINK_FACTOR,
    });
    let mut rows = log_rows;
    rows.extend(sqrt_rows);
    Ok(SinaiReport {
        n_list: cfg.n_list.clone(),
        num_samples: cfg.num_samples,
        rows,
        checks,
    })
}

/// Runs `body` on a two-sided Brownian potential over `[-window, window]`,
/// doubling the window while `body` reports that the diffusion left it.
/// Widening keeps the inner path, so the result does not depend on how many
/// retries were needed except through the final window.
pub fn with_growing_window<R>(
    window: f64,
    dx: f64,
    seed: Seed,
    mut body: impl FnMut(&PathGrid<f64>) -> Result<R>,
) -> Result<(R, f64)> {
    let mut window = window;
    let mut last = None;
    for _ in 0..=MAX_WINDOW_DOUBLINGS {
        let w = sample_two_sided_bm(-window, window, dx, seed)?;
        match body(&w) {
            Ok(r) => return Ok((r, window)),
            Err(e) if e.is_range() && !is_horizon_error(&e) => {
                last = Some(e);
                window *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Files written by one run, plus the values the manifest reports.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
    window: Option<f64>,
    notes: Vec<Check>,
}

impl Outputs {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a RunConfig,
    seed_root: u64,
    version: &'static str,
    wall_clock_seconds: f64,
    started_unix_seconds: u64,
    convention: &'static str,
    n: u64,
    dx: f64,
    window: f64,
    horizon: f64,
    outputs: Vec<&'a str>,
    checks: &'a [Check],
}

fn form_csv(rows: &[(&str, FormResult<f64>)]) -> String {
    let mut s = String::from("form,value,truncation_radius,grid_step,quadrature_error_estimate\n");
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            name, r.value, r.truncation_radius, r.grid_step, r.quadrature_error_estimate
        );
    }
    s
}

fn env_sites(cfg: &ScalingConfig<f64>, window: f64) -> i64 {
    (window / cfg.delta).ceil() as i64 + 1
}

fn run_env(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sc = ScalingConfig::<f64>::new(cfg.n)?;
    let k = env_sites(&sc, cfg.spatial_window);
    let env = sample_environment(-k, k, Seed(cfg.seed_root))?;
    let mut buf = Vec::new();
    env.write_csv(&mut buf)?;
    out.add("environment.csv", String::from_utf8(buf).expect("ascii"));
    let w = potential_from_environment(&env, &sc, -cfg.truncation_radius, cfg.truncation_radius)?;
    let mut buf = Vec::new();
    w.write_csv(&mut buf)?;
    out.add("potential.csv", String::from_utf8(buf).expect("ascii"));
    out.window = Some(cfg.spatial_window);
    Ok(())
}

fn run_walk(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sc = ScalingConfig::<f64>::new(cfg.n)?;
    let steps = steps_until(&sc, cfg.t_max) as i64;
    let root = Seed(cfg.seed_root);
    let env = sample_environment(-steps - 1, steps + 1, root.derive("environment", 0))?;
    let path = simulate_scaled_walk(&env, &sc, cfg.t_max, root.derive("walk", 0))?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    out.add("walk.csv", String::from_utf8(buf).expect("ascii"));
    let mut buf = Vec::new();
    rescale_to_diffusion::<f64>(&path)?.write_csv(&mut buf)?;
    out.add("walk_path.csv", String::from_utf8(buf).expect("ascii"));
    out.add(
        "walk_summary.json",
        serde_json::to_string_pretty(&path.summary()).map_err(|e| Error::Internal(e.to_string()))?,
    );
    Ok(())
}

/// Number of time steps in the `brox` path output.
pub const BROX_TIME_STEPS: usize = 1000;

fn run_brox(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let root = Seed(cfg.seed_root);
    let times: Vec<f64> = (0..=BROX_TIME_STEPS)
        .map(|i| cfg.t_max * i as f64 / BROX_TIME_STEPS as f64)
        .collect();
    let opts = QuenchedOptions {
        du: cfg.du,
        ..QuenchedOptions::default()
    };
    let ((path, w_csv), window) = with_growing_window(cfg.spatial_window, cfg.dx, root.derive("environment", 0), |w| {
        let p = QuenchedSampler::new(w, opts)?.sample_path(&times, 0.0, root.derive("quenched", 0))?;
        let mut buf = Vec::new();
        w.write_csv(&mut buf)?;
        Ok((p, buf))
    })?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    out.add("brox_path.csv", String::from_utf8(buf).expect("ascii"));
    out.add("brox_environment.csv", String::from_utf8(w_csv).expect("ascii"));
    out.window = Some(window);
    Ok(())
}

fn run_forms(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let (f, g) = standard_pair();
    let r = truncation_radius(&f, &g)?;
    if r > cfg.truncation_radius {
        return Err(Error::Config(format!(
            "the test functions need truncation radius {r}, above --radius {}",
            cfg.truncation_radius
        )));
    }
    let root = Seed(cfg.seed_root);
    let sc = ScalingConfig::<f64>::new(cfg.n)?;
    let k = env_sites(&sc, cfg.spatial_window);
    let env = sample_environment(-k, k, root.derive("environment", 0))?;
    let discrete = discrete_form(&f, &g, &env, &sc)?;
    let ((dir, gen), window) = with_growing_window(cfg.spatial_window, cfg.dx, root.derive("potential", 0), |w| {
        Ok((limit_form_dirichlet(&f, &g, w)?, limit_form_generator(&f, &g, w)?))
    })?;
    out.add(
        "forms.csv",
        form_csv(&[("discrete", discrete), ("limit_dirichlet", dir), ("limit_generator", gen)]),
    );
    out.window = Some(window);
    Ok(())
}

fn run_converge(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let (f, g) = standard_pair();
    let opts = ConvergenceOptions {
        fine_dx: cfg.dx,
        ..ConvergenceOptions::default()
    };
    let root = Seed(cfg.seed_root);
    let rep = convergence_experiment(&f, &g, &cfg.n_list, cfg.num_envs, root, &opts)?;
    out.add("convergence.csv", rep.rows_csv());
    out.add("convergence_summary.csv", rep.summary_csv());
    out.add("variants.csv", rep.variants_csv(&cfg.n_list));
    let decreasing = rep.summary.windows(2).all(|w| w[1].rms_error < w[0].rms_error);
    out.notes.push(Check {
        name: "rms_strictly_decreasing".into(),
        value: if decreasing { 1.0 } else { 0.0 },
        threshold: 1.0,
        pass: decreasing,
    });
    let converging = rep.variants.iter().filter(|v| v.converges).count();
    out.notes.push(Check {
        name: "converging_variants".into(),
        value: converging as f64,
        threshold: 1.0,
        pass: converging == 1,
    });
    if let Some(gamma) = cfg.gamma {
        let v = vanishing_noise_experiment(&f, &g, gamma, cfg.c, &cfg.n_list, cfg.num_envs, root)?;
        out.add("vanishing.csv", v.rows_csv());
        out.add("vanishing_summary.csv", v.summary_csv());
        let (a, b) = (v.summary.last().expect("non-empty"), rep.summary.last().expect("non-empty"));
        out.notes.push(Check {
            name: format!("vanishing_rms_below_brox_at_n{}", a.n),
            value: a.rms_error,
            threshold: b.rms_error,
            pass: a.rms_error < b.rms_error,
        });
    }
    Ok(())
}

fn run_semigroup(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let f = TestFunction::gaussian_bump(0.0, 1.0, 1.0);
    let root = Seed(cfg.seed_root);
    let opts = RefinementOptions {
        quenched: QuenchedOptions {
            du: cfg.du,
            ..semigroup_options()
        },
        ..RefinementOptions::default()
    };
    let ((sg, gen), window) = with_growing_window(cfg.spatial_window, cfg.dx, root.derive("environment", 0), |w| {
        let sg = semigroup_convergence_experiment(&f, cfg.t_max, w, cfg.levels, cfg.num_samples, root, &opts)?;
        let gen = generator_convergence_experiment(&f, w, cfg.levels, GENERATOR_PROBES, root)?;
        Ok((sg, gen))
    })?;
    out.add("semigroup.csv", sg.to_csv());
    let mut s = String::from("level,factor,discrepancy,noise_floor,tail_allowance,num_samples\n");
    for (l, (fac, d)) in sg.factors.iter().zip(&sg.discrepancy).enumerate() {
        let _ = writeln!(
            s,
            "{l},{fac},{d:.16e},{:.16e},{:.16e},{}",
            sg.noise_floor, sg.tail_allowance, sg.num_samples
        );
    }
    out.add("semigroup_summary.csv", s);
    out.add("generator.csv", gen.to_csv());
    out.notes.push(Check {
        name: "semigroup_strictly_decreasing".into(),
        value: if sg.strictly_decreasing() { 1.0 } else { 0.0 },
        threshold: 1.0,
        pass: sg.strictly_decreasing(),
    });
    let finest = *sg.discrepancy.last().expect("levels > 0");
    out.notes.push(Check {
        name: "semigroup_finest_within_noise_floor".into(),
        value: finest,
        threshold: sg.noise_floor,
        pass: finest <= sg.noise_floor,
    });
    out.window = Some(window);
    Ok(())
}

fn run_compare(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let rep = compare_distributions(cfg)?;
    out.add("ks.csv", rep.ks_csv());
    out.add("samples.csv", rep.samples_csv());
    let n_max = *cfg.n_list.last().expect("non-empty");
    if cfg.n_list.len() > 1 {
        let d = rep.walk_vs_brox_decreasing();
        out.notes.push(Check {
            name: "walk_brox_ks_strictly_decreasing".into(),
            value: if d { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass: d,
        });
    }
    let wg = rep.walk_vs_gaussian(n_max).expect("present");
    out.notes.push(Check {
        name: format!("walk_gaussian_ks_n{n_max}"),
        value: wg.statistic,
        threshold: wg.threshold,
        pass: wg.reject_at_5pct,
    });
    let bg = rep.brox_vs_gaussian();
    out.notes.push(Check {
        name: "brox_gaussian_ks".into(),
        value: bg.statistic,
        threshold: bg.threshold,
        pass: bg.reject_at_5pct,
    });
    let limit = MAX_CENSORED_FRACTION * cfg.num_samples as f64;
    out.notes.push(Check {
        name: "brox_censored_draws".into(),
        value: rep.brox_censored.len() as f64,
        threshold: limit,
        pass: rep.brox_censored.len() as f64 <= limit,
    });
    Ok(())
}

fn run_sinai(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let rep = sinai_scaling_report(cfg)?;
    out.add("sinai_quantiles.csv", rep.quantiles_csv());
    out.add("sinai_verdict.csv", rep.verdict_csv());
    out.notes.extend(rep.checks);
    Ok(())
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Statistical checks with thresholds, as recorded in the manifest.
    pub checks: Vec<Check>,
}

/// Runs the configured experiment and writes its CSV / JSON artifacts plus
/// `manifest.json` into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = Outputs::default();
    match cfg.command {
        Command::Env => run_env(cfg, &mut out)?,
        Command::Walk => run_walk(cfg, &mut out)?,
        Command::Brox => run_brox(cfg, &mut out)?,
        Command::Forms => run_forms(cfg, &mut out)?,
        Command::Converge => run_converge(cfg, &mut out)?,
        Command::Semigroup => run_semigroup(cfg, &mut out)?,
        Command::CompareDist => run_compare(cfg, &mut out)?,
        Command::SinaiScaling => run_sinai(cfg, &mut out)?,
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let mut files = Vec::new();
    for (name, contents) in &out.files {
        let p = cfg.output_dir.join(name);
        fs::write(&p, contents)?;
        files.push(p);
    }
    let manifest = Manifest {
        command: cfg.command.name(),
        config: cfg,
        seed_root: cfg.seed_root,
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        started_unix_seconds: started,
        convention: SIGN_CONVENTION,
        n: cfg.n,
        dx: cfg.dx,
        window: out.window.unwrap_or(cfg.spatial_window),
        horizon: cfg.t_max,
        outputs: out.files.iter().map(|(n, _)| n.as_str()).collect(),
        checks: &out.notes,
    };
    let p = cfg.output_dir.join("manifest.json");
    fs::write(
        &p,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?,
    )?;
    files.push(p);
    Ok(RunOutcome {
        output_dir: cfg.output_dir.clone(),
        files,
        checks: out.notes,
    })
}

/// Reads a CSV written by [`run`] back as text (used by determinism checks).
pub fn read_output(dir: &Path, name: &str) -> Result<String> {
    Ok(fs::read_to_string(dir.join(name))?)
}
