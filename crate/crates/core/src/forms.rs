//! Bilinear forms of the discrete, smoothed and limiting generators.
//!
//! ```text
//! discrete   Σ_x (1/h) (f(x+Δ) p + f(x-Δ)(1-p) - f(x)) ∫_x^{x+Δ} g
//! smoothed   -½ ∫ f'g' - ½ Σ f'(x_i) g(x_i) (W_n(x_{i+1}) - W_n(x_i))
//! dirichlet  -½ ∫ f'g' - ½ ∫ f'g dW
//! generator   ½ ∫ f''g - ½ ∫ f'g dW
//! ```
//!
//! Stochastic integrals are left-endpoint (Itô) sums on the grid of the path.
//! Deterministic integrals use composite Simpson with step at most
//! [`QUADRATURE_STEP`]. Every form is truncated to `[-R, R]` with
//! `R = max(decay radii) + TRUNCATION_MARGIN`.

use rayon::prelude::*;

use crate::coupling::{embed_environment, sites_for_radius};
use crate::environment::{sample_environment, sample_two_sided_bm, EnvironmentSample, ScalingConfig};
use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::quadrature::simpson_with_error;
use crate::scalar::{CompensatedSum, Real};
use crate::seed::Seed;
use crate::test_function::{Smoothness, TestFunction};

/// Largest Simpson step for deterministic integrals.
pub const QUADRATURE_STEP: f64 = 1.0 / 512.0;

/// Distance added to the larger decay radius to obtain the truncation radius.
pub const TRUNCATION_MARGIN: f64 = 2.0;

/// Which form a [`FormResult`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Discrete(u64),
    Smoothed,
    LimitDirichlet,
    LimitGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormResult<T> {
    pub value: T,
    pub kind: FormKind,
    pub truncation_radius: T,
    /// Lattice step `Δ` for discrete forms, path grid step otherwise.
    pub grid_step: T,
    pub quadrature_error_estimate: T,
}

/// `max(decay radii) + TRUNCATION_MARGIN`; non-decaying functions are rejected.
pub fn truncation_radius<T: Real>(f: &TestFunction<T>, g: &TestFunction<T>) -> Result<T> {
    let r = f.decay_radius().max(g.decay_radius());
    if !r.is_finite() {
        return Err(Error::Config(
            "forms need test functions with a finite decay radius".into(),
        ));
    }
    Ok(r + T::lit(TRUNCATION_MARGIN))
}

/// Left-endpoint sum `Σ φ(x_i) (W(x_{i+1}) - W(x_i))` over the grid cells of
/// `W` intersected with `[a, b]`; the end cells are cut at `a` and `b`.
pub fn ito_integral<T: Real>(phi: impl Fn(T) -> T, w: &PathGrid<T>, a: T, b: T) -> Result<T> {
    if a > b {
        return Err(Error::range("integration start", a.as_f64(), f64::NEG_INFINITY, b.as_f64()));
    }
    let (ia, wa) = w.locate(a)?;
    let (ib, wb) = w.locate(b)?;
    if a == b {
        return Ok(T::zero());
    }
    let v = w.values();
    let mut acc = CompensatedSum::new();
    let mut x = a;
    let mut wx = w.interp(ia, wa);
    // Interior nodes strictly between a and b.
    for i in ia + 1..=ib {
        let xi = w.node(i);
        if xi <= a || xi >= b {
            continue;
        }
        acc.add(phi(x) * (v[i] - wx));
        x = xi;
        wx = v[i];
    }
    acc.add(phi(x) * (w.interp(ib, wb) - wx));
    Ok(acc.value())
}

fn simpson_window<T: Real>(h: impl Fn(T) -> T, radius: T) -> (T, T) {
    simpson_with_error(h, -radius, radius, T::lit(QUADRATURE_STEP))
}

/// `½ ∫ f'' g` over the truncation window.
pub fn symmetric_generator_term<T: Real>(f: &TestFunction<T>, g: &TestFunction<T>) -> Result<(T, T)> {
    f.require(Smoothness::C2, "f")?;
    let r = truncation_radius(f, g)?;
    let d2 = f.d2()?;
    let (v, e) = simpson_window(|x| d2(x) * g.f(x), r);
    let half = T::lit(0.5);
    Ok((half * v, half * e))
}

/// `-½ ∫ f' g'` over the truncation window.
pub fn symmetric_dirichlet_term<T: Real>(f: &TestFunction<T>, g: &TestFunction<T>) -> Result<(T, T)> {
    f.require(Smoothness::C1, "f")?;
    g.require(Smoothness::C1, "g")?;
    let r = truncation_radius(f, g)?;
    let (d1f, d1g) = (f.d1()?, g.d1()?);
    let (v, e) = simpson_window(|x| d1f(x) * d1g(x), r);
    let half = T::lit(0.5);
    Ok((-half * v, half * e))
}

/// `∫ f' g dW` (Itô) over the truncation window.
pub fn stochastic_term<T: Real>(f: &TestFunction<T>, g: &TestFunction<T>, w: &PathGrid<T>) -> Result<T> {
    f.require(Smoothness::C1, "f")?;
    let r = truncation_radius(f, g)?;
    let d1 = f.d1()?;
    ito_integral(|x| d1(x) * g.f(x), w, -r, r)
}

/// Discrete form for the walk in `env` at scale `cfg`.
pub fn discrete_form<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    env: &EnvironmentSample,
    cfg: &ScalingConfig<T>,
) -> Result<FormResult<T>> {
    let amp = cfg.sqrt_delta();
    discrete_form_with_charges(f, g, cfg, |z| Ok(amp * env.charge::<T>(z)?), |lo, hi| {
        env.require(lo, hi)
    })
}

/// Discrete form with `p(z) = 1/2 + charge(z)` for an arbitrary charge law.
///
/// `require(lo, hi)` is called once with the site range the sum touches.
pub fn discrete_form_with_charges<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    cfg: &ScalingConfig<T>,
    charge: impl Fn(i64) -> Result<T>,
    require: impl FnOnce(i64, i64) -> Result<()>,
) -> Result<FormResult<T>> {
    let r = truncation_radius(f, g)?;
    let delta = cfg.delta;
    let k_lo = (-r / delta).ceil().to_i64().unwrap_or(i64::MIN / 2);
    let k_hi = (r / delta).floor().to_i64().unwrap_or(i64::MAX / 2);
    require(k_lo, k_hi)?;
    let half = T::lit(0.5);
    let quarter = delta * T::lit(0.25);
    let inv_h = cfg.h.recip();
    let mut acc = CompensatedSum::new();
    let mut err = CompensatedSum::new();
    for k in k_lo..=k_hi {
        let x = T::from_i64_lossy(k) * delta;
        let (fm, f0, fp) = (f.f(x - delta), f.f(x), f.f(x + delta));
        let q = charge(k)?;
        // (f(x+Δ) p + f(x-Δ)(1-p) - f(x)) rearranged around p = 1/2 + q.
        let lf = inv_h * (half * (fp - f0 - f0 + fm) + q * (fp - fm));
        let gs = [
            g.f(x),
            g.f(x + quarter),
            g.f(x + half * delta),
            g.f(x + T::lit(3.0) * quarter),
            g.f(x + delta),
        ];
        let four = T::lit(4.0);
        let s4 = quarter / T::lit(3.0) * (gs[0] + four * gs[1] + gs[2] + gs[2] + four * gs[3] + gs[4]);
        let s2 = delta / T::lit(6.0) * (gs[0] + four * gs[2] + gs[4]);
        acc.add(lf * s4);
        err.add((lf * (s4 - s2)).abs() / T::lit(15.0));
    }
    Ok(FormResult {
        value: acc.value(),
        kind: FormKind::Discrete(cfg.n),
        truncation_radius: r,
        grid_step: delta,
        quadrature_error_estimate: err.value(),
    })
}

fn dirichlet_like<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    w: &PathGrid<T>,
    kind: FormKind,
) -> Result<FormResult<T>> {
    let (sym, err) = symmetric_dirichlet_term(f, g)?;
    let sto = stochastic_term(f, g, w)?;
    Ok(FormResult {
        value: sym - T::lit(0.5) * sto,
        kind,
        truncation_radius: truncation_radius(f, g)?,
        grid_step: w.dx(),
        quadrature_error_estimate: err,
    })
}

/// `-½ ∫ f'g' - ½ ∫ f'g dW_n` for a piecewise-linear `W_n`.
pub fn smoothed_form<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    w_n: &PathGrid<T>,
) -> Result<FormResult<T>> {
    dirichlet_like(f, g, w_n, FormKind::Smoothed)
}

/// `-½ ∫ f'g' - ½ ∫ f'g dW`.
pub fn limit_form_dirichlet<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    w: &PathGrid<T>,
) -> Result<FormResult<T>> {
    dirichlet_like(f, g, w, FormKind::LimitDirichlet)
}

/// `½ ∫ f''g - ½ ∫ f'g dW`.
pub fn limit_form_generator<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    w: &PathGrid<T>,
) -> Result<FormResult<T>> {
    let (sym, err) = symmetric_generator_term(f, g)?;
    let sto = stochastic_term(f, g, w)?;
    Ok(FormResult {
        value: sym - T::lit(0.5) * sto,
        kind: FormKind::LimitGenerator,
        truncation_radius: truncation_radius(f, g)?,
        grid_step: w.dx(),
        quadrature_error_estimate: err,
    })
}

/// Candidate limit `½ ∫ f''g + sign · ½ · ∫ f'g d(scale · P)`, where `P` is
/// the potential built from the charges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub sign: f64,
    pub scale: f64,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant { sign: 1.0, scale: 1.0 },
        Variant { sign: -1.0, scale: 1.0 },
        Variant { sign: 1.0, scale: 0.25 },
        Variant { sign: -1.0, scale: 0.25 },
    ];

    pub fn label(&self) -> String {
        let s = if self.sign > 0.0 { '+' } else { '-' };
        if self.scale == 1.0 {
            format!("{s}1/2 dP")
        } else {
            format!("{s}1/2 d(P/4)")
        }
    }

    fn limit(&self, symmetric: f64, ito_p: f64) -> f64 {
        symmetric + self.sign * 0.5 * self.scale * ito_p
    }
}

/// Sign convention reported by the experiments: the Brox environment is
/// `W = -P`, so the limit `½∫f''g - ½∫f'g dW` equals `½∫f''g + ½∫f'g dP`.
pub const SIGN_CONVENTION: &str = "W = -P (P = 4 sqrt(delta) * cumulative charge); limit = 1/2 int f''g - 1/2 int f'g dW";

/// Parameters of the coupled form-convergence experiment.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceOptions {
    /// Step of the fine Brownian potential the charges are embedded in.
    pub fine_dx: f64,
    /// Extra room beyond the truncation radius for the embedding.
    pub margin: f64,
    /// A variant converges when `rms(n_max) / rms(n_min)` is below this.
    pub variant_ratio: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            fine_dx: 1e-5,
            margin: 3.0,
            variant_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: u64,
    pub env_id: usize,
    pub discrete_value: f64,
    pub limit_value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub n: u64,
    pub rms_error: f64,
    pub mean_error: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantScore {
    pub variant: Variant,
    /// RMS error per entry of `n_list`.
    pub rms: Vec<f64>,
    pub ratio: f64,
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummary>,
    pub variants: Vec<VariantScore>,
    /// The single converging variant, if exactly one converges.
    pub selected: Option<Variant>,
    pub variant_ratio: f64,
}

impl ConvergenceReport {
    /// CSV `n,env_id,discrete_value,limit_value,abs_error`.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("n,env_id,discrete_value,limit_value,abs_error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e}\n",
                r.n, r.env_id, r.discrete_value, r.limit_value, r.abs_error
            ));
        }
        s
    }

    /// CSV `n,rms_error,mean_error,max_error`.
    pub fn summary_csv(&self) -> String {
        summary_csv(&self.summary)
    }

    /// CSV `variant,n,rms_error` plus a `converges` verdict per variant.
    pub fn variants_csv(&self, n_list: &[u64]) -> String {
        let mut s = String::from("variant,n,rms_error,ratio,threshold,converges\n");
        for v in &self.variants {
            for (n, r) in n_list.iter().zip(&v.rms) {
                s.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{},{}\n",
                    v.variant.label(),
                    n,
                    r,
                    v.ratio,
                    self.variant_ratio,
                    v.converges
                ));
            }
        }
        s
    }
}

pub(crate) fn summary_csv(summary: &[ConvergenceSummary]) -> String {
    let mut s = String::from("n,rms_error,mean_error,max_error\n");
    for r in summary {
        s.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            r.n, r.rms_error, r.mean_error, r.max_error
        ));
    }
    s
}

fn check_n_list(n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "n_list must be positive and strictly increasing, got {n_list:?}"
        )));
    }
    Ok(())
}

fn summarize(n_list: &[u64], errors: &[Vec<f64>]) -> Vec<ConvergenceSummary> {
    n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col = errors.iter().map(|e| e[j]);
            let m = errors.len() as f64;
            let sq: f64 = crate::scalar::compensated_sum(col.clone().map(|e| e * e));
            let sum: f64 = crate::scalar::compensated_sum(col.clone());
            ConvergenceSummary {
                n,
                rms_error: (sq / m).sqrt(),
                mean_error: sum / m,
                max_error: col.fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Fine potential for environment `env_id`, wide enough to embed every scale.
fn coupled_potential(
    radius: f64,
    n_list: &[u64],
    opts: &ConvergenceOptions,
    seed: Seed,
) -> Result<(PathGrid<f64>, Vec<EnvironmentSample>)> {
    let mut margin = opts.margin;
    for _ in 0..4 {
        let half = radius + margin;
        let p = sample_two_sided_bm(-half, half, opts.fine_dx, seed)?;
        let envs: Result<Vec<_>> = n_list
            .iter()
            .map(|&n| {
                let k = sites_for_radius(n, radius);
                embed_environment(&p, n, -k, k, seed)
            })
            .collect();
        match envs {
            Ok(envs) => return Ok((p, envs)),
            Err(e) if e.is_range() => margin *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::range("embedding window", radius + margin, 0.0, radius + margin))
}

/// Coupled comparison of discrete forms against the limit form.
///
/// Environment `e` draws one fine Brownian potential `P_e`; the charges at
/// every scale `n` are embedded in it (see [`crate::coupling`]), and the limit
/// is `limit_form_generator(f, g, W_e)` with `W_e = -P_e` on the fine grid.
pub fn convergence_experiment(
    f: &TestFunction<f64>,
    g: &TestFunction<f64>,
    n_list: &[u64],
    num_envs: usize,
    seed: Seed,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    check_n_list(n_list)?;
    if num_envs == 0 {
        return Err(Error::Config("num_envs must be positive".into()));
    }
    f.require(Smoothness::C2, "f")?;
    let radius = truncation_radius(f, g)?;
    let (symmetric, _) = symmetric_generator_term(f, g)?;
    let cfgs: Vec<ScalingConfig<f64>> =
        n_list.iter().map(|&n| ScalingConfig::new(n)).collect::<Result<_>>()?;

    struct EnvOutcome {
        discrete: Vec<f64>,
        limit: f64,
        ito_p: f64,
    }

    let outcomes: Vec<EnvOutcome> = (0..num_envs)
        .into_par_iter()
        .map(|e| -> Result<EnvOutcome> {
            let (p, envs) = coupled_potential(radius, n_list, opts, seed.derive("coupling", e as u64))?;
            let discrete = envs
                .iter()
                .zip(&cfgs)
                .map(|(env, cfg)| discrete_form(f, g, env, cfg).map(|r| r.value))
                .collect::<Result<Vec<_>>>()?;
            let w = p.map(|v| -v);
            let limit = limit_form_generator(f, g, &w)?.value;
            let ito_p = stochastic_term(f, g, &p)?;
            Ok(EnvOutcome {
                discrete,
                limit,
                ito_p,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(num_envs * n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        for (e, o) in outcomes.iter().enumerate() {
            rows.push(ConvergenceRow {
                n,
                env_id: e,
                discrete_value: o.discrete[j],
                limit_value: o.limit,
                abs_error: (o.discrete[j] - o.limit).abs(),
            });
        }
    }
    let headline: Vec<Vec<f64>> = outcomes
        .iter()
        .map(|o| o.discrete.iter().map(|d| (d - o.limit).abs()).collect())
        .collect();
    let summary = summarize(n_list, &headline);

    let variants: Vec<VariantScore> = Variant::ALL
        .iter()
        .map(|v| {
            let errs: Vec<Vec<f64>> = outcomes
                .iter()
                .map(|o| {
                    let lim = v.limit(symmetric, o.ito_p);
                    o.discrete.iter().map(|d| (d - lim).abs()).collect()
                })
                .collect();
            let rms: Vec<f64> = summarize(n_list, &errs).iter().map(|s| s.rms_error).collect();
            let ratio = rms[rms.len() - 1] / rms[0];
            VariantScore {
                variant: *v,
                rms,
                ratio,
                converges: ratio < opts.variant_ratio,
            }
        })
        .collect();
    let converging: Vec<Variant> = variants.iter().filter(|v| v.converges).map(|v| v.variant).collect();
    let selected = if converging.len() == 1 { Some(converging[0]) } else { None };

    Ok(ConvergenceReport {
        rows,
        summary,
        variants,
        selected,
        variant_ratio: opts.variant_ratio,
    })
}

/// Charge amplitude `(√c / 4) Δ^{1 - γ/2}`, whose variance `c Δ^{2-γ} / 16`
/// is at most `c Δ^γ`.
pub fn vanishing_charge_amplitude(cfg: &ScalingConfig<f64>, gamma: f64, c: f64) -> f64 {
    c.sqrt() / 4.0 * cfg.delta.powf(1.0 - gamma / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanishingNoiseReport {
    pub gamma: f64,
    pub c: f64,
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummary>,
}

impl VanishingNoiseReport {
    pub fn rows_csv(&self) -> String {
        ConvergenceReport {
            rows: self.rows.clone(),
            summary: Vec::new(),
            variants: Vec::new(),
            selected: None,
            variant_ratio: 0.0,
        }
        .rows_csv()
    }

    pub fn summary_csv(&self) -> String {
        summary_csv(&self.summary)
    }
}

/// Discrete forms with charges of variance `c Δ^{2-γ}/16` compared against
/// the Brownian limit `½ ∫ f''g`. The same sign array is reused for every `n`.
pub fn vanishing_noise_experiment(
    f: &TestFunction<f64>,
    g: &TestFunction<f64>,
    gamma: f64,
    c: f64,
    n_list: &[u64],
    num_envs: usize,
    seed: Seed,
) -> Result<VanishingNoiseReport> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "gamma = {gamma} outside [0, 1); gamma = 1 is the Brox scaling"
        )));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("variance constant c = {c} must be >= 0")));
    }
    check_n_list(n_list)?;
    if num_envs == 0 {
        return Err(Error::Config("num_envs must be positive".into()));
    }
    let radius = truncation_radius(f, g)?;
    let (target, _) = symmetric_generator_term(f, g)?;
    let n_max = *n_list.last().expect("non-empty");
    let k = sites_for_radius(n_max, radius);

    let errors: Vec<Vec<(f64, f64)>> = (0..num_envs)
        .into_par_iter()
        .map(|e| -> Result<Vec<(f64, f64)>> {
            let env = sample_environment(-k, k, seed.derive("vanishing", e as u64))?;
            n_list
                .iter()
                .map(|&n| {
                    let cfg = ScalingConfig::<f64>::new(n)?;
                    let amp = vanishing_charge_amplitude(&cfg, gamma, c);
                    let v = discrete_form_with_charges(
                        f,
                        g,
                        &cfg,
                        |z| Ok(amp * f64::from(env.sign(z)?)),
                        |lo, hi| env.require(lo, hi),
                    )?
                    .value;
                    Ok((v, (v - target).abs()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (j, &n) in n_list.iter().enumerate() {
        for (e, row) in errors.iter().enumerate() {
            rows.push(ConvergenceRow {
                n,
                env_id: e,
                discrete_value: row[j].0,
                limit_value: target,
                abs_error: row[j].1,
            });
        }
    }
    let errs: Vec<Vec<f64>> = errors.iter().map(|r| r.iter().map(|p| p.1).collect()).collect();
    Ok(VanishingNoiseReport {
        gamma,
        c,
        rows,
        summary: summarize(n_list, &errs),
    })
}
