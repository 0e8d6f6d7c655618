//! Bernoulli environments, their rescaled transition probabilities and the
//! Brownian potentials they approximate.

use std::io::{BufRead, Write};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Orientation, PathGrid};
use crate::scalar::Real;
use crate::seed::Seed;

/// Realized charges `q(z) ∈ {+1/4, -1/4}` on the sites `z_min..=z_max`.
///
/// Charges are stored as signs. Sites `z >= 0` are drawn from one stream in
/// increasing order and sites `z < 0` from another in decreasing order, so a
/// wider window with the same seed extends a narrower one without changing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentSample {
    z_min: i64,
    z_max: i64,
    signs: Vec<i8>,
    seed: Seed,
}

fn check_window(z_min: i64, z_max: i64) -> Result<()> {
    if z_min > z_max {
        return Err(Error::Config(format!("inverted window [{z_min}, {z_max}]")));
    }
    if z_min > 0 || z_max < 0 {
        return Err(Error::Config(format!(
            "window [{z_min}, {z_max}] must contain the origin"
        )));
    }
    Ok(())
}

fn fair_signs(seed: Seed, count: usize) -> Vec<i8> {
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let bits = rng.next_u64();
        let take = (count - out.len()).min(64);
        out.extend((0..take).map(|b| if (bits >> b) & 1 == 1 { 1i8 } else { -1i8 }));
    }
    out
}

impl EnvironmentSample {
    /// Builds an environment from explicit signs (`+1` for `q = +1/4`).
    pub fn from_signs(z_min: i64, signs: Vec<i8>, seed: Seed) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Config("empty environment".into()));
        }
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Config(format!("charge sign {bad} not in {{-1, +1}}")));
        }
        let z_max = z_min + signs.len() as i64 - 1;
        check_window(z_min, z_max)?;
        Ok(Self {
            z_min,
            z_max,
            signs,
            seed,
        })
    }

    /// Environment with every charge equal to `sign / 4`.
    pub fn constant(z_min: i64, z_max: i64, sign: i8) -> Result<Self> {
        check_window(z_min, z_max)?;
        Self::from_signs(z_min, vec![sign; (z_max - z_min + 1) as usize], Seed(0))
    }

    pub fn z_min(&self) -> i64 {
        self.z_min
    }

    pub fn z_max(&self) -> i64 {
        self.z_max
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn contains(&self, z: i64) -> bool {
        z >= self.z_min && z <= self.z_max
    }

    fn range_error(&self, z: i64) -> Error {
        Error::range("site", z as f64, self.z_min as f64, self.z_max as f64)
    }

    /// Sign of the charge at site `z`.
    #[inline]
    pub fn sign(&self, z: i64) -> Result<i8> {
        if !self.contains(z) {
            return Err(self.range_error(z));
        }
        Ok(self.signs[(z - self.z_min) as usize])
    }

    /// Charge `q(z) = ±1/4`.
    pub fn charge<T: Real>(&self, z: i64) -> Result<T> {
        Ok(T::lit(0.25 * f64::from(self.sign(z)?)))
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Fails unless every site in `lo..=hi` is covered.
    pub fn require(&self, lo: i64, hi: i64) -> Result<()> {
        if !self.contains(lo) {
            return Err(self.range_error(lo));
        }
        if !self.contains(hi) {
            return Err(self.range_error(hi));
        }
        Ok(())
    }

    /// The mirrored environment `q'(z) = -q(-z)`.
    pub fn reflected(&self) -> Self {
        let signs = self.signs.iter().rev().map(|s| -s).collect();
        Self {
            z_min: -self.z_max,
            z_max: -self.z_min,
            signs,
            seed: self.seed,
        }
    }

    /// CSV `z,q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(self.signs.len() * 12 + 4);
        buf.push_str("z,q\n");
        for (i, s) in self.signs.iter().enumerate() {
            let q = if *s > 0 { "0.25" } else { "-0.25" };
            buf.push_str(&format!("{},{q}\n", self.z_min + i as i64));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, seed: Seed) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty environment csv".into()))??;
        if header.trim() != "z,q" {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let mut z_min = None;
        let mut signs = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (z, q) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row `{line}`")))?;
            let z: i64 = z.trim().parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let q: f64 = q.trim().parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let expected = z_min.unwrap_or(z) + signs.len() as i64;
            if z != expected {
                return Err(Error::Parse(format!("non-contiguous site {z}")));
            }
            z_min.get_or_insert(z);
            signs.push(if q == 0.25 {
                1
            } else if q == -0.25 {
                -1
            } else {
                return Err(Error::Parse(format!("charge {q} not ±1/4")));
            });
        }
        Self::from_signs(
            z_min.ok_or_else(|| Error::Parse("no rows".into()))?,
            signs,
            seed,
        )
    }
}

/// Draws i.i.d. fair charges on `z_min..=z_max`.
pub fn sample_environment(z_min: i64, z_max: i64, seed: Seed) -> Result<EnvironmentSample> {
    check_window(z_min, z_max)?;
    let right = fair_signs(seed.derive("environment+", 0), (z_max + 1) as usize);
    let mut left = fair_signs(seed.derive("environment-", 0), (-z_min) as usize);
    left.reverse();
    left.extend(right);
    Ok(EnvironmentSample {
        z_min,
        z_max,
        signs: left,
        seed,
    })
}

/// Lattice step `Δ = n^{-1/2}` and time step `h = 1/n` of the n-th walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig<T> {
    pub n: u64,
    pub delta: T,
    pub h: T,
}

impl<T: Real> ScalingConfig<T> {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("scaling index n must be positive".into()));
        }
        let nf = T::from_u64(n).expect("u64 representable");
        Ok(Self {
            n,
            delta: nf.sqrt().recip(),
            h: nf.recip(),
        })
    }

    /// `√Δ = n^{-1/4}`, the amplitude of the rescaled charges.
    pub fn sqrt_delta(&self) -> T {
        self.delta.sqrt()
    }
}

/// `p_n(z) = 1/2 + n^{-1/4} q(z)`.
pub fn transition_probability<T: Real>(
    env: &EnvironmentSample,
    cfg: &ScalingConfig<T>,
    z: i64,
) -> Result<T> {
    let q: T = env.charge(z)?;
    Ok(T::lit(0.5) + cfg.sqrt_delta() * q)
}

/// Drifted charge `(sign √Δ + κ Δ) / 4`.
pub fn drifted_charge<T: Real>(cfg: &ScalingConfig<T>, kappa: T, sign: i8) -> T {
    let s = if sign >= 0 { T::one() } else { -T::one() };
    (s * cfg.sqrt_delta() + kappa * cfg.delta) / T::lit(4.0)
}

/// Rescaled cumulative charge `4 √Δ Σ q` on the lattice `Δ ℤ ∩ [x_min, x_max]`
/// (rounded outwards to lattice nodes).
///
/// The charge at site `j` is the increment across the cell `[jΔ, (j+1)Δ]`:
/// the node `k > 0` carries `4 √Δ Σ_{j=0}^{k-1} q(j)`, the node `k < 0`
/// carries `-4 √Δ Σ_{j=k}^{-1} q(j)`, and the origin carries 0.
pub fn potential_from_environment<T: Real>(
    env: &EnvironmentSample,
    cfg: &ScalingConfig<T>,
    x_min: T,
    x_max: T,
) -> Result<PathGrid<T>> {
    if x_min > T::zero() || x_max < T::zero() || !(x_max > x_min) {
        return Err(Error::Config(format!(
            "potential window [{x_min}, {x_max}] must strictly contain 0"
        )));
    }
    let k_min = (x_min / cfg.delta - T::lit(1e-9)).floor().to_i64().unwrap_or(i64::MIN);
    let k_max = (x_max / cfg.delta + T::lit(1e-9)).ceil().to_i64().unwrap_or(i64::MAX);
    let k_min = k_min.min(-1).max(i64::MIN / 2);
    let k_max = k_max.max(1);
    env.require(k_min, k_max - 1)?;
    let scale = T::lit(4.0) * cfg.sqrt_delta();
    let quarter = T::lit(0.25);
    let mut values = vec![T::zero(); (k_max - k_min + 1) as usize];
    let origin = (-k_min) as usize;
    let mut acc = 0i64;
    for k in 1..=k_max {
        acc += i64::from(env.sign(k - 1)?);
        values[origin + k as usize] = scale * quarter * T::from_i64_lossy(acc);
    }
    acc = 0;
    for k in (k_min..0).rev() {
        acc += i64::from(env.sign(k)?);
        values[(k - k_min) as usize] = -(scale * quarter * T::from_i64_lossy(acc));
    }
    PathGrid::from_lattice(k_min, cfg.delta, values, Orientation::Space)
}

/// Two-sided standard Brownian motion on nodes `k dx` covering
/// `[x_min, x_max]`, pinned at `W(0) = 0`.
///
/// The right half is generated outwards from 0 from one stream and the left
/// half from an independent stream; widening the window keeps the inner path.
pub fn sample_two_sided_bm<T: Real>(x_min: T, x_max: T, dx: T, seed: Seed) -> Result<PathGrid<T>> {
    if !(dx > T::zero()) || x_min > T::zero() || x_max < T::zero() || !(x_max > x_min) {
        return Err(Error::Config(format!(
            "two-sided path needs x_min <= 0 <= x_max, x_min < x_max and dx > 0 (got [{x_min}, {x_max}], dx={dx})"
        )));
    }
    let k_left = (-x_min / dx - T::lit(1e-9)).ceil().max(T::zero()).to_usize().unwrap_or(0);
    let k_right = (x_max / dx - T::lit(1e-9)).ceil().max(T::zero()).to_usize().unwrap_or(0);
    let sd = dx.as_f64().sqrt();
    let mut values = vec![T::zero(); k_left + k_right + 1];
    brownian_half(&mut values[k_left + 1..], sd, seed.derive("bm+", 0));
    let mut left = vec![T::zero(); k_left];
    brownian_half(&mut left, sd, seed.derive("bm-", 0));
    for (i, v) in left.into_iter().enumerate() {
        values[k_left - 1 - i] = v;
    }
    PathGrid::from_lattice(-(k_left as i64), dx, values, Orientation::Space)
}

/// One-sided Brownian motion on `[0, t_max]` (time-indexed), using the right
/// half of the two-sided construction.
pub fn sample_brownian<T: Real>(t_max: T, dt: T, seed: Seed) -> Result<PathGrid<T>> {
    let g = sample_two_sided_bm(T::zero(), t_max, dt, seed)?;
    PathGrid::new(T::zero(), dt, g.values().to_vec(), Orientation::Time)
}

/// Fills `out` with partial sums of `N(0, sd²)` increments, starting after 0.
pub(crate) fn brownian_half<T: Real>(out: &mut [T], sd: f64, seed: Seed) {
    let mut rng = seed.rng();
    let mut acc = 0.0f64;
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += sd * z;
        *v = T::lit(acc);
    }
}

/// A path together with its piecewise-constant derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPath<T> {
    path: PathGrid<T>,
    slopes: Vec<T>,
}

impl<T: Real> SmoothedPath<T> {
    pub fn path(&self) -> &PathGrid<T> {
        &self.path
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn eval(&self, x: T) -> Result<T> {
        self.path.eval(x)
    }

    /// Derivative at `x`; at a node the slope of the cell to the right is used
    /// (the right cell of the last node is its left cell).
    pub fn derivative(&self, x: T) -> Result<T> {
        let (i, _) = self.path.locate(x)?;
        Ok(self.slopes[i])
    }

    pub fn into_path(self) -> PathGrid<T> {
        self.path
    }
}

/// Reads `W` as the piecewise-linear function through its nodes.
pub fn piecewise_linear_smooth<T: Real>(w: &PathGrid<T>) -> SmoothedPath<T> {
    let slopes = (0..w.len() - 1).map(|i| w.slope(i)).collect();
    SmoothedPath {
        path: w.clone(),
        slopes,
    }
}

/// Keeps every `factor`-th node counted from the origin. Linear interpolation
/// of the result is the piecewise-linear approximation of `w` at step
/// `factor * dx`.
pub fn coarsen<T: Real>(w: &PathGrid<T>, factor: usize) -> Result<PathGrid<T>> {
    if factor == 0 {
        return Err(Error::Config("coarsening factor must be positive".into()));
    }
    let o = w.origin_index()?;
    let left = o / factor;
    let right = (w.len() - 1 - o) / factor;
    if left + right < 1 {
        return Err(Error::Config(format!(
            "coarsening factor {factor} leaves fewer than 2 nodes"
        )));
    }
    let values = (0..=left + right)
        .map(|j| w.values()[o - left * factor + j * factor])
        .collect();
    PathGrid::from_lattice(
        -(left as i64),
        w.dx() * T::from_usize_lossy(factor),
        values,
        w.orientation(),
    )
}

/// Piecewise-linear interpolant of `w` through every `factor`-th node,
/// resampled on the nodes of `w` that lie in the coarse domain. With
/// `factor == 1` the result equals `w`.
pub fn smooth_at_scale<T: Real>(w: &PathGrid<T>, factor: usize) -> Result<PathGrid<T>> {
    let coarse = coarsen(w, factor)?;
    let o = w.origin_index()?;
    let (left, right) = (
        (o / factor) * factor,
        ((w.len() - 1 - o) / factor) * factor,
    );
    let values = (o - left..=o + right)
        .map(|i| {
            let j = i + left - o;
            let (c, r) = (j / factor, j % factor);
            if r == 0 {
                coarse.values()[c]
            } else {
                let t = T::from_usize_lossy(r) / T::from_usize_lossy(factor);
                let (a, b) = (coarse.values()[c], coarse.values()[c + 1]);
                a + t * (b - a)
            }
        })
        .collect();
    PathGrid::from_lattice(-(left as i64), w.dx(), values, w.orientation())
}

/// Evaluates `coarse` at the nodes of `fine` lying in `coarse`'s domain and
/// returns the largest deviation between the two.
pub fn sup_distance_on<T: Real>(coarse: &PathGrid<T>, fine: &PathGrid<T>, a: T, b: T) -> Result<T> {
    let mut m = T::zero();
    for (x, v) in fine.nodes().zip(fine.values()) {
        if x < a || x > b {
            continue;
        }
        m = m.max((coarse.eval(x)? - *v).abs());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_window_has_a_valid_charge() {
        let env = sample_environment(0, 0, Seed(3)).unwrap();
        let q: f64 = env.charge(0).unwrap();
        assert!(q == 0.25 || q == -0.25);
    }

    #[test]
    fn inverted_or_offset_windows_are_configuration_errors() {
        assert!(matches!(sample_environment(3, -3, Seed(1)), Err(Error::Config(_))));
        assert!(matches!(sample_environment(1, 3, Seed(1)), Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_window_is_bitwise_identical() {
        let a = sample_environment(-500, 700, Seed(11)).unwrap();
        let b = sample_environment(-500, 700, Seed(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wider_window_extends_narrower_one() {
        let a = sample_environment(-50, 70, Seed(11)).unwrap();
        let b = sample_environment(-500, 700, Seed(11)).unwrap();
        for z in -50..=70 {
            assert_eq!(a.sign(z).unwrap(), b.sign(z).unwrap());
        }
    }

    #[test]
    fn empirical_mean_within_clt_bound() {
        let env = sample_environment(-1_000_000, 1_000_000, Seed(2024)).unwrap();
        let total: i64 = env.signs().iter().map(|s| i64::from(*s)).sum();
        let mean = 0.25 * total as f64 / env.len() as f64;
        assert!(mean.abs() < 3.0 * 0.25 / (env.len() as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn transition_probability_values() {
        let env = EnvironmentSample::constant(-2, 2, 1).unwrap();
        let p1 = transition_probability(&env, &ScalingConfig::<f64>::new(1).unwrap(), 0).unwrap();
        assert_eq!(p1, 0.75);
        let p16 = transition_probability(&env, &ScalingConfig::<f64>::new(16).unwrap(), 1).unwrap();
        assert_eq!(p16, 0.625);
        let big = transition_probability(&env, &ScalingConfig::<f64>::new(1 << 40).unwrap(), 0)
            .unwrap();
        assert!((big - 0.5).abs() < 1e-3);
        assert!(transition_probability(&env, &ScalingConfig::<f64>::new(4).unwrap(), 3)
            .unwrap_err()
            .is_range());
    }

    #[test]
    fn scaling_config_relation() {
        for n in [1u64, 2, 3, 10, 4096, 1_000_003] {
            let c = ScalingConfig::<f64>::new(n).unwrap();
            assert!((c.delta * c.delta - c.h).abs() / c.h < 1e-12);
        }
        assert!(ScalingConfig::<f64>::new(0).is_err());
    }

    #[test]
    fn drifted_charge_examples() {
        let c = ScalingConfig::<f64>::new(16).unwrap();
        assert_eq!(drifted_charge(&c, 0.0, 1), 0.125);
        assert_eq!(drifted_charge(&c, 2.0, -1), 0.0);
        for sign in [-1i8, 1] {
            let q = drifted_charge(&c, 0.0, sign) / c.sqrt_delta();
            assert_eq!(q, 0.25 * f64::from(sign));
        }
    }

    #[test]
    fn potential_of_constant_environment() {
        let c = ScalingConfig::<f64>::new(16).unwrap();
        let env = EnvironmentSample::constant(-40, 40, 1).unwrap();
        let w = potential_from_environment(&env, &c, -2.0, 2.0).unwrap();
        let o = w.origin_index().unwrap();
        assert_eq!(w.values()[o], 0.0);
        for k in 1..8usize {
            assert!((w.values()[o + k] - c.sqrt_delta() * k as f64).abs() < 1e-14);
            assert!((w.values()[o - k] + c.sqrt_delta() * k as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn potential_range_error_when_window_too_small() {
        let c = ScalingConfig::<f64>::new(100).unwrap();
        let env = sample_environment(-5, 5, Seed(1)).unwrap();
        assert!(potential_from_environment(&env, &c, -1.0, 1.0).unwrap_err().is_range());
    }

    #[test]
    fn two_sided_bm_is_pinned_and_nested() {
        let a = sample_two_sided_bm(-1.0f64, 2.0, 0.01, Seed(5)).unwrap();
        assert_eq!(a.eval(0.0).unwrap(), 0.0);
        let b = sample_two_sided_bm(-3.0f64, 4.0, 0.01, Seed(5)).unwrap();
        for x in [-1.0, -0.5, 0.37, 1.99] {
            assert!((a.eval(x).unwrap() - b.eval(x).unwrap()).abs() < 1e-12);
        }
        assert!(sample_two_sided_bm(0.5f64, 2.0, 0.01, Seed(5)).is_err());
        assert!(sample_two_sided_bm(-0.5f64, 2.0, 0.0, Seed(5)).is_err());
    }

    #[test]
    fn smoothing_keeps_nodes_and_uses_cell_slopes() {
        let w = sample_two_sided_bm(-1.0f64, 1.0, 0.1, Seed(9)).unwrap();
        let s = piecewise_linear_smooth(&w);
        for (i, x) in w.nodes().enumerate() {
            assert!((s.eval(x).unwrap() - w.values()[i]).abs() < 1e-14);
        }
        for i in 0..w.len() - 1 {
            assert_eq!(s.slopes()[i], (w.values()[i + 1] - w.values()[i]) / w.dx());
        }
    }

    #[test]
    fn smoothing_at_scale_keeps_coarse_nodes() {
        let w = sample_two_sided_bm(-1.0f64, 1.3, 0.01, Seed(4)).unwrap();
        assert_eq!(smooth_at_scale(&w, 1).unwrap(), w);
        let s = smooth_at_scale(&w, 8).unwrap();
        assert_eq!(s.dx(), w.dx());
        let o = s.origin_index().unwrap();
        let ow = w.origin_index().unwrap();
        for k in [-12i64, -3, 0, 5, 15] {
            let i = (o as i64 + 8 * k) as usize;
            let j = (ow as i64 + 8 * k) as usize;
            assert_eq!(s.values()[i], w.values()[j]);
        }
        let c = coarsen(&w, 8).unwrap();
        for x in [-0.9, -0.123, 0.0, 0.5, 1.2] {
            assert!((s.eval(x).unwrap() - c.eval(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_converges_under_refinement() {
        let w = sample_two_sided_bm(-2.0f64, 2.0, 1.0 / 1024.0, Seed(17)).unwrap();
        let d64 = sup_distance_on(&coarsen(&w, 64).unwrap(), &w, -1.5, 1.5).unwrap();
        let d16 = sup_distance_on(&coarsen(&w, 16).unwrap(), &w, -1.5, 1.5).unwrap();
        assert!(d16 < d64, "{d16} !< {d64}");
        assert_eq!(sup_distance_on(&coarsen(&w, 1).unwrap(), &w, -1.5, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn environment_csv_round_trip() {
        let env = sample_environment(-3, 4, Seed(8)).unwrap();
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"z,q\n"));
        let back = EnvironmentSample::read_csv(&buf[..], Seed(8)).unwrap();
        assert_eq!(back, env);
    }
}
