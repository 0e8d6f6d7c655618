//! Monte Carlo semigroup `H_t f(x) = E[f(X_t) | X_0 = x]`, convergence of the
//! smoothed semigroups and generators, and inversion of the smoothed generator.

use rayon::prelude::*;

use crate::diffusion::{QuenchedOptions, QuenchedSampler};
use crate::environment::smooth_at_scale;
use crate::error::{Error, Result};
use crate::forms::{limit_form_dirichlet, smoothed_form};
use crate::grid::{Orientation, PathGrid};
use crate::quadrature::{cumulative_trapezoid, gauss2};
use crate::scalar::{CompensatedSum, Real};
use crate::seed::Seed;
use crate::test_function::{Smoothness, TestFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupEstimate {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    pub num_samples: usize,
    /// Hash of the environment the estimate was computed on.
    pub w_id: u64,
}

/// FNV-1a hash of the grid geometry and node values.
pub fn path_id(w: &PathGrid<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bits: u64| {
        for b in bits.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    mix(w.x0().to_bits());
    mix(w.dx().to_bits());
    for v in w.values() {
        mix(v.to_bits());
    }
    h
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = crate::scalar::compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = crate::scalar::compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

/// Per-sample seeds shared across starting points and environments, so that
/// estimates on different environments use common random numbers.
fn sample_seed(seed: Seed, j: usize) -> Seed {
    seed.derive("sample", j as u64)
}

/// Samples `f(X_t)` for every starting point (rows) and sample (columns).
fn sample_values(
    f: &TestFunction<f64>,
    t: f64,
    x_grid: &[f64],
    sampler: &QuenchedSampler<f64>,
    num_samples: usize,
    seed: Seed,
) -> Result<Vec<Vec<f64>>> {
    x_grid
        .iter()
        .map(|&x| {
            (0..num_samples)
                .into_par_iter()
                .map(|j| sampler.terminal_value(x, t, sample_seed(seed, j)).map(|v| f.f(v)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Estimates `H_t f` on `x_grid` from `num_samples` quenched paths per point.
/// At `t = 0` returns `f(x_grid)` without simulating.
pub fn estimate_semigroup(
    f: &TestFunction<f64>,
    t: f64,
    x_grid: &[f64],
    w: &PathGrid<f64>,
    num_samples: usize,
    seed: Seed,
) -> Result<SemigroupEstimate> {
    estimate_semigroup_with(f, t, x_grid, w, num_samples, seed, semigroup_options())
}

/// Intrinsic step `du = 1e-3` used by the semigroup estimators.
pub fn semigroup_options() -> QuenchedOptions<f64> {
    QuenchedOptions {
        du: 1e-3,
        ..QuenchedOptions::default()
    }
}

pub fn estimate_semigroup_with(
    f: &TestFunction<f64>,
    t: f64,
    x_grid: &[f64],
    w: &PathGrid<f64>,
    num_samples: usize,
    seed: Seed,
    options: QuenchedOptions<f64>,
) -> Result<SemigroupEstimate> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("t = {t} must be finite and >= 0")));
    }
    if num_samples == 0 {
        return Err(Error::Config("num_samples must be positive".into()));
    }
    let w_id = path_id(w);
    if t == 0.0 {
        return Ok(SemigroupEstimate {
            t,
            x_grid: x_grid.to_vec(),
            estimates: x_grid.iter().map(|&x| f.f(x)).collect(),
            mc_stderr: vec![0.0; x_grid.len()],
            num_samples,
            w_id,
        });
    }
    let sampler = QuenchedSampler::new(w, options)?;
    let values = sample_values(f, t, x_grid, &sampler, num_samples, seed)?;
    let (estimates, mc_stderr) = values.iter().map(|v| mean_and_stderr(v)).unzip();
    Ok(SemigroupEstimate {
        t,
        x_grid: x_grid.to_vec(),
        estimates,
        mc_stderr,
        num_samples,
        w_id,
    })
}

/// Settings of the refinement experiments.
#[derive(Debug, Clone)]
pub struct RefinementOptions {
    /// Starting points / probe window for the sup-norm.
    pub x_grid: Vec<f64>,
    pub quenched: QuenchedOptions<f64>,
}

impl Default for RefinementOptions {
    fn default() -> Self {
        Self {
            x_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            quenched: semigroup_options(),
        }
    }
}

/// Coarsening factors `4^{L-ℓ}` for levels `ℓ = 0..L`.
pub fn level_factors(levels: usize) -> Vec<usize> {
    (0..levels).map(|l| 4usize.pow((levels - l) as u32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupRow {
    pub level: usize,
    pub x: f64,
    pub estimate_n: f64,
    pub estimate_limit: f64,
    pub abs_diff: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupConvergence {
    pub rows: Vec<SemigroupRow>,
    /// Coarsening factor per level.
    pub factors: Vec<usize>,
    /// `max_x |H^{(n)}_t f(x) - H_t f(x)|` per level.
    pub discrepancy: Vec<f64>,
    /// `4 max(mc_stderr)` over all levels and points.
    pub noise_floor: f64,
    /// `2 sup |f|` outside the probe window: the part of the sup-norm the
    /// probe window does not control.
    pub tail_allowance: f64,
    pub num_samples: usize,
    pub w_id: u64,
}

impl SemigroupConvergence {
    /// CSV `level,x,estimate_n,estimate_limit,abs_diff,mc_stderr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,x,estimate_n,estimate_limit,abs_diff,mc_stderr\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.level, r.x, r.estimate_n, r.estimate_limit, r.abs_diff, r.mc_stderr
            ));
        }
        s
    }

    /// True when the discrepancy strictly decreases from level to level.
    pub fn strictly_decreasing(&self) -> bool {
        self.discrepancy.windows(2).all(|w| w[1] < w[0])
    }
}

/// `2 sup |f|` over `[-R, R] \ [a, b]` on a 1/64 grid (R = decay radius).
pub fn tail_allowance(f: &TestFunction<f64>, a: f64, b: f64) -> f64 {
    let r = if f.decay_radius().is_finite() { f.decay_radius() } else { 64.0 };
    let mut m = 0.0f64;
    let steps = (2.0 * r * 64.0).ceil() as usize;
    for k in 0..=steps {
        let x = -r + k as f64 / 64.0;
        if x < a || x > b {
            m = m.max(f.f(x).abs());
        }
    }
    2.0 * m
}

/// Compares `H_t^{(n)} f` on the smoothed environments `W_n` (coarsening
/// factors `4^{L-ℓ}`) against `H_t f` on `W`, with common random numbers.
pub fn semigroup_convergence_experiment(
    f: &TestFunction<f64>,
    t: f64,
    w: &PathGrid<f64>,
    refinement_levels: usize,
    num_samples: usize,
    seed: Seed,
    options: &RefinementOptions,
) -> Result<SemigroupConvergence> {
    if refinement_levels == 0 {
        return Err(Error::Config("refinement_levels must be positive".into()));
    }
    let x_grid = &options.x_grid;
    let limit = estimate_semigroup_with(f, t, x_grid, w, num_samples, seed, options.quenched)?;
    let factors = level_factors(refinement_levels);
    let mut rows = Vec::new();
    let mut discrepancy = Vec::new();
    let mut max_se = limit.mc_stderr.iter().copied().fold(0.0, f64::max);
    for (level, &factor) in factors.iter().enumerate() {
        let w_n = smooth_at_scale(w, factor)?;
        let est = estimate_semigroup_with(f, t, x_grid, &w_n, num_samples, seed, options.quenched)?;
        let mut d = 0.0f64;
        for i in 0..x_grid.len() {
            let diff = (est.estimates[i] - limit.estimates[i]).abs();
            let se = est.mc_stderr[i].max(limit.mc_stderr[i]);
            max_se = max_se.max(se);
            d = d.max(diff);
            rows.push(SemigroupRow {
                level,
                x: x_grid[i],
                estimate_n: est.estimates[i],
                estimate_limit: limit.estimates[i],
                abs_diff: diff,
                mc_stderr: se,
            });
        }
        discrepancy.push(d);
    }
    let (a, b) = x_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(SemigroupConvergence {
        rows,
        factors,
        discrepancy,
        noise_floor: 4.0 * max_se,
        tail_allowance: tail_allowance(f, a, b),
        num_samples,
        w_id: limit.w_id,
    })
}

/// Solves `½ e^{W_n} (e^{-W_n} f')' = g` with `f(0) = f0`, `f'(0) = fprime0`:
///
/// ```text
/// f(x) = ∫_0^x e^{W_n(y)} [∫_0^y 2 g(s) e^{-W_n(s)} ds] dy + f0 + A_n(x) f'(0) e^{-W_n(0)}
/// ```
///
/// The inner integral uses two-point Gauss per cell (so `g` is never sampled
/// at a node, where the slope of `W_n` jumps); the outer integrals use the
/// trapezoid rule on the nodes of `W_n`. Values at `x_grid` are interpolated.
pub fn reconstruct_from_generator<T: Real>(
    g_fn: impl Fn(T) -> T,
    w_n: &PathGrid<T>,
    f0: T,
    fprime0: T,
    x_grid: &[T],
) -> Result<Vec<T>> {
    let o = w_n.origin_index()?;
    let v = w_n.values();
    let len = v.len();
    let two = T::lit(2.0);
    let cell = |i: usize| {
        let (x0, w0, w1) = (w_n.node(i), v[i], v[i + 1]);
        let dx = w_n.dx();
        gauss2(
            |s: T| {
                let w = w0 + (s - x0) / dx * (w1 - w0);
                two * g_fn(s) * (-w).exp()
            },
            x0,
            x0 + dx,
        )
    };
    // Inner integral at every node, zero at the origin.
    let mut inner = vec![T::zero(); len];
    let mut acc = CompensatedSum::new();
    for i in o..len - 1 {
        acc.add(cell(i));
        inner[i + 1] = acc.value();
    }
    let mut acc = CompensatedSum::new();
    for i in (0..o).rev() {
        acc.add(cell(i));
        inner[i] = -acc.value();
    }
    let slope0 = fprime0 * (-v[o]).exp();
    let integrand: Vec<T> = v
        .iter()
        .zip(&inner)
        .map(|(w, i)| w.exp() * (*i + slope0))
        .collect();
    let nodes = cumulative_trapezoid(&integrand, w_n.dx(), o);
    let f = PathGrid::new(
        w_n.x0(),
        w_n.dx(),
        nodes.into_iter().map(|y| y + f0).collect(),
        Orientation::Space,
    )?;
    x_grid.iter().map(|&x| f.eval(x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRow {
    pub level: usize,
    pub factor: usize,
    pub probe: usize,
    pub smoothed_value: f64,
    pub limit_value: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConvergence {
    pub rows: Vec<GeneratorRow>,
    pub factors: Vec<usize>,
    /// `max_g |⟨L^{(n)} f, g⟩ - ⟨L f, g⟩|` per level.
    pub discrepancy: Vec<f64>,
}

impl GeneratorConvergence {
    /// CSV `level,factor,probe,smoothed_value,limit_value,abs_diff`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,factor,probe,smoothed_value,limit_value,abs_diff\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e}\n",
                r.level, r.factor, r.probe, r.smoothed_value, r.limit_value, r.abs_diff
            ));
        }
        s
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.discrepancy.windows(2).all(|w| w[1] < w[0])
    }
}

/// Gaussian probe `g_j` with centre in `[-2, 2]` and width in `[0.5, 1]`.
pub fn probe_function(seed: Seed, j: usize) -> TestFunction<f64> {
    use rand::Rng;
    let mut rng = seed.derive("probe", j as u64).rng();
    let c: f64 = rng.random_range(-2.0..2.0);
    let w: f64 = rng.random_range(0.5..1.0);
    TestFunction::gaussian_bump(c, w, 1.0)
}

/// Generator convergence seen through forms: for `num_probes` probe functions
/// `g`, compares `smoothed_form(f, g, W_n)` with `limit_form_dirichlet(f, g, W)`
/// at each refinement level.
pub fn generator_convergence_experiment(
    f: &TestFunction<f64>,
    w: &PathGrid<f64>,
    refinement_levels: usize,
    num_probes: usize,
    seed: Seed,
) -> Result<GeneratorConvergence> {
    f.require(Smoothness::C2, "f")?;
    if refinement_levels == 0 || num_probes == 0 {
        return Err(Error::Config(
            "refinement_levels and num_probes must be positive".into(),
        ));
    }
    let probes: Vec<TestFunction<f64>> = (0..num_probes).map(|j| probe_function(seed, j)).collect();
    let limits = probes
        .iter()
        .map(|g| limit_form_dirichlet(f, g, w).map(|r| r.value))
        .collect::<Result<Vec<f64>>>()?;
    let factors = level_factors(refinement_levels);
    let mut rows = Vec::new();
    let mut discrepancy = Vec::new();
    for (level, &factor) in factors.iter().enumerate() {
        let w_n = smooth_at_scale(w, factor)?;
        let mut d = 0.0f64;
        for (j, g) in probes.iter().enumerate() {
            let s = smoothed_form(f, g, &w_n)?.value;
            let diff = (s - limits[j]).abs();
            d = d.max(diff);
            rows.push(GeneratorRow {
                level,
                factor,
                probe: j,
                smoothed_value: s,
                limit_value: limits[j],
                abs_diff: diff,
            });
        }
        discrepancy.push(d);
    }
    Ok(GeneratorConvergence {
        rows,
        factors,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::sample_two_sided_bm;

    fn flat(half: f64, dx: f64) -> PathGrid<f64> {
        let k = (half / dx).round() as i64;
        PathGrid::from_lattice(-k, dx, vec![0.0; (2 * k + 1) as usize], Orientation::Space).unwrap()
    }

    fn bump() -> TestFunction<f64> {
        TestFunction::gaussian_bump(0.0, 1.0, 1.0)
    }

    #[test]
    fn time_zero_is_identity() {
        let w = sample_two_sided_bm(-5.0, 5.0, 1e-3, Seed(1)).unwrap();
        let xs = [-1.0, 0.0, 0.7];
        let e = estimate_semigroup(&bump(), 0.0, &xs, &w, 10, Seed(2)).unwrap();
        for (x, v) in xs.iter().zip(&e.estimates) {
            assert_eq!(*v, bump().f(*x));
        }
        assert_eq!(e.mc_stderr, vec![0.0; 3]);
    }

    #[test]
    fn flat_environment_matches_heat_kernel() {
        let w = flat(12.0, 1e-3);
        let t = 0.5;
        let xs = [-1.0, 0.0, 1.0];
        let e = estimate_semigroup(&bump(), t, &xs, &w, 20_000, Seed(3)).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let exact = (1.0 / (1.0 + 2.0 * t)).sqrt() * (-x * x / (1.0 + 2.0 * t)).exp();
            assert!(
                (e.estimates[i] - exact).abs() < 4.0 * e.mc_stderr[i],
                "x={x}: {} vs {exact} (se {})",
                e.estimates[i],
                e.mc_stderr[i]
            );
        }
    }

    #[test]
    fn estimates_are_positive_contractive_and_reproducible() {
        let w = sample_two_sided_bm(-10.0, 10.0, 1e-3, Seed(4)).unwrap();
        let xs = [-0.5, 0.0, 0.5];
        let a = estimate_semigroup(&bump(), 0.3, &xs, &w, 500, Seed(5)).unwrap();
        let b = estimate_semigroup(&bump(), 0.3, &xs, &w, 500, Seed(5)).unwrap();
        assert_eq!(a, b);
        let se = a.mc_stderr.iter().copied().fold(0.0, f64::max);
        for v in &a.estimates {
            assert!(*v >= 0.0);
            assert!(*v <= 1.0 + 4.0 * se);
        }
    }

    #[test]
    fn unrefined_level_has_zero_discrepancy() {
        let w = sample_two_sided_bm(-10.0, 10.0, 1e-3, Seed(6)).unwrap();
        let opts = RefinementOptions::default();
        let limit = estimate_semigroup_with(&bump(), 0.2, &opts.x_grid, &w, 200, Seed(1), opts.quenched).unwrap();
        let same = smooth_at_scale(&w, 1).unwrap();
        let again = estimate_semigroup_with(&bump(), 0.2, &opts.x_grid, &same, 200, Seed(1), opts.quenched).unwrap();
        assert_eq!(limit.estimates, again.estimates);
    }

    #[test]
    fn reconstruction_harmonic_and_flat_cases() {
        let w = sample_two_sided_bm(-3.0, 3.0, 1e-3, Seed(7)).unwrap();
        let xs: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.1).collect();
        let r = reconstruct_from_generator(|_| 0.0, &w, 0.5, 2.0, &xs).unwrap();
        let a = crate::diffusion::scale_function(&w).unwrap();
        for (x, v) in xs.iter().zip(&r) {
            assert!((v - (0.5 + 2.0 * a.eval(*x).unwrap())).abs() < 1e-10);
        }
        let w0 = flat(3.0, 1e-3);
        let r = reconstruct_from_generator(|_| 1.0, &w0, 0.0, 0.0, &xs).unwrap();
        for (x, v) in xs.iter().zip(&r) {
            assert!((v - x * x).abs() < 1e-6, "{x}: {v}");
        }
    }

    #[test]
    fn generator_experiment_basics() {
        let w = sample_two_sided_bm(-10.0, 10.0, 1.0 / 1024.0, Seed(8)).unwrap();
        let f = bump();
        let r = generator_convergence_experiment(&f, &w, 3, 4, Seed(9)).unwrap();
        assert_eq!(r.discrepancy.len(), 3);
        assert!(r.strictly_decreasing(), "{:?}", r.discrepancy);
        let r2 = generator_convergence_experiment(&f.scaled(2.0), &w, 3, 4, Seed(9)).unwrap();
        for (a, b) in r.rows.iter().zip(&r2.rows) {
            assert_eq!(2.0 * a.abs_diff, b.abs_diff);
        }
        let probe = probe_function(Seed(9), 0);
        let exact = limit_form_dirichlet(&f, &probe, &w).unwrap().value;
        let same = smoothed_form(&f, &probe, &smooth_at_scale(&w, 1).unwrap()).unwrap().value;
        assert_eq!(exact, same);
    }

    #[test]
    fn tail_allowance_of_a_bump() {
        let e = tail_allowance(&bump(), -1.0, 1.0);
        assert!((e - 2.0 * (-1.0f64).exp()).abs() < 0.05);
        assert!(tail_allowance(&bump(), -10.0, 10.0) == 0.0);
    }
}
