//! Nearest-neighbour walks in a Bernoulli environment and their generator.

use std::io::Write;

use rand::RngCore;
use serde::Serialize;

use crate::diffusion::{DiffusionPath, Provenance};
use crate::environment::{transition_probability, EnvironmentSample, ScalingConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::Seed;
use crate::test_function::TestFunction;

/// Lattice sites visited by a walk; `positions[k]` is the site after `k` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    pub n: u64,
    pub positions: Vec<i64>,
    pub seed: Seed,
}

/// JSON summary written next to a trajectory CSV.
#[derive(Debug, Clone, Serialize)]
pub struct WalkSummary {
    pub n: u64,
    pub steps: usize,
    pub final_site: i64,
    pub seed: u64,
}

impl WalkPath {
    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn final_site(&self) -> i64 {
        *self.positions.last().expect("walk path is never empty")
    }

    pub fn summary(&self) -> WalkSummary {
        WalkSummary {
            n: self.n,
            steps: self.steps(),
            final_site: self.final_site(),
            seed: self.seed.0,
        }
    }

    /// CSV `step,site`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(self.positions.len() * 12 + 10);
        buf.push_str("step,site\n");
        for (k, z) in self.positions.iter().enumerate() {
            buf.push_str(&format!("{k},{z}\n"));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// Right-jump thresholds on a 64-bit uniform, one per charge sign.
#[derive(Debug, Clone, Copy)]
struct JumpLaw {
    up_if_plus: u64,
    up_if_minus: u64,
}

fn threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else if p <= 0.0 {
        0
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

impl JumpLaw {
    fn new(p_plus: f64, p_minus: f64) -> Self {
        Self {
            up_if_plus: threshold(p_plus),
            up_if_minus: threshold(p_minus),
        }
    }

    fn scaled(n: u64) -> Self {
        let a = 0.25 * (n as f64).powf(-0.25);
        Self::new(0.5 + a, 0.5 - a)
    }
}

fn check_reach(env: &EnvironmentSample, steps: usize) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    let s = steps as i64;
    env.require(-s, s)
}

/// Runs `steps` steps from 0, optionally recording every site.
fn run(
    env: &EnvironmentSample,
    law: JumpLaw,
    steps: usize,
    seed: Seed,
    mut record: Option<&mut Vec<i64>>,
) -> i64 {
    let mut rng = seed.derive("walk", 0).rng();
    let signs = env.signs();
    let offset = env.z_min();
    let mut z = 0i64;
    if let Some(r) = record.as_deref_mut() {
        r.reserve(steps + 1);
        r.push(0);
    }
    for _ in 0..steps {
        let t = if signs[(z - offset) as usize] > 0 {
            law.up_if_plus
        } else {
            law.up_if_minus
        };
        z += if rng.next_u64() < t { 1 } else { -1 };
        if let Some(r) = record.as_deref_mut() {
            r.push(z);
        }
    }
    z
}

/// Sinai's walk: jump right with probability `1/2 + q(z)` (3/4 or 1/4).
pub fn simulate_unscaled_walk(env: &EnvironmentSample, steps: usize, seed: Seed) -> Result<WalkPath> {
    check_reach(env, steps)?;
    let mut positions = Vec::new();
    run(env, JumpLaw::new(0.75, 0.25), steps, seed, Some(&mut positions));
    Ok(WalkPath {
        n: 1,
        positions,
        seed,
    })
}

/// Number of jumps taken by the n-th walk up to time `t`, `⌊t / h_n⌋`.
pub fn steps_until<T: Real>(cfg: &ScalingConfig<T>, t: T) -> usize {
    let raw = t.as_f64() * cfg.n as f64;
    (raw + 1e-9 * raw.abs().max(1.0)).floor().max(0.0) as usize
}

/// The n-th scaled walk on `[0, t_max]`, jumping right with probability
/// `p_n(z) = 1/2 + n^{-1/4} q(z)`.
pub fn simulate_scaled_walk<T: Real>(
    env: &EnvironmentSample,
    cfg: &ScalingConfig<T>,
    t_max: T,
    seed: Seed,
) -> Result<WalkPath> {
    let steps = steps_until(cfg, t_max);
    check_reach(env, steps)?;
    let mut positions = Vec::new();
    run(env, JumpLaw::scaled(cfg.n), steps, seed, Some(&mut positions));
    Ok(WalkPath {
        n: cfg.n,
        positions,
        seed,
    })
}

/// Final site of the n-th scaled walk after `steps` jumps, without storing the
/// path. Consumes the same random stream as [`simulate_scaled_walk`].
pub fn scaled_walk_endpoint(env: &EnvironmentSample, n: u64, steps: usize, seed: Seed) -> Result<i64> {
    check_reach(env, steps)?;
    Ok(run(env, JumpLaw::scaled(n), steps, seed, None))
}

/// Final site of Sinai's walk after `steps` jumps.
pub fn unscaled_walk_endpoint(env: &EnvironmentSample, steps: usize, seed: Seed) -> Result<i64> {
    check_reach(env, steps)?;
    Ok(run(env, JumpLaw::new(0.75, 0.25), steps, seed, None))
}

/// Same dynamics with every charge zero (simple symmetric walk).
pub fn simple_walk_endpoint(steps: usize, seed: Seed) -> i64 {
    let half = threshold(0.5);
    let mut rng = seed.derive("walk", 0).rng();
    let mut z = 0i64;
    for _ in 0..steps {
        z += if rng.next_u64() < half { 1 } else { -1 };
    }
    z
}

/// `X^{(n)}_t = S^{(n)}_t / √n` on the jump times `k h_n`.
pub fn rescale_to_diffusion<T: Real>(path: &WalkPath) -> Result<DiffusionPath<T>> {
    let cfg = ScalingConfig::<T>::new(path.n)?;
    let times = (0..path.positions.len())
        .map(|k| T::from_usize_lossy(k) * cfg.h)
        .collect();
    let values = path
        .positions
        .iter()
        .map(|z| T::from_i64_lossy(*z) * cfg.delta)
        .collect();
    DiffusionPath::new(times, values, Provenance::RescaledWalk, Some(path.seed))
}

/// `(1/h)(f(x+Δ) p + f(x-Δ)(1-p) - f(x))` with `p = p_n(x/Δ)`.
pub fn apply_discrete_generator<T: Real>(
    f: &TestFunction<T>,
    env: &EnvironmentSample,
    cfg: &ScalingConfig<T>,
    x: T,
) -> Result<T> {
    let r = x / cfg.delta;
    let k = r.round();
    if ((r - k) * cfg.delta).abs() > T::lit(1e-9) * cfg.delta {
        return Err(Error::Domain(format!(
            "{x} is not on the lattice with step {}",
            cfg.delta
        )));
    }
    let z = k.to_i64().ok_or_else(|| Error::Domain(format!("site of {x} overflows")))?;
    let p = transition_probability(env, cfg, z)?;
    let x = T::from_i64_lossy(z) * cfg.delta;
    let up = f.f(x + cfg.delta);
    let down = f.f(x - cfg.delta);
    Ok((up * p + down * (T::one() - p) - f.f(x)) / cfg.h)
}

/// `R_n / (log n)^2` from a fresh walk of `n` steps.
pub fn sinai_statistic(env: &EnvironmentSample, n: u64, seed: Seed) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("sinai statistic needs n >= 2, got {n}")));
    }
    let r = unscaled_walk_endpoint(env, n as usize, seed)?;
    let l = (n as f64).ln();
    Ok(r as f64 / (l * l))
}

/// `S^{(n)}_n / √n`, the position of the n-th scaled walk at time 1.
pub fn clt_statistic<T: Real>(env: &EnvironmentSample, cfg: &ScalingConfig<T>, seed: Seed) -> Result<T> {
    let s = scaled_walk_endpoint(env, cfg.n, cfg.n as usize, seed)?;
    Ok(T::from_i64_lossy(s) * cfg.delta)
}
