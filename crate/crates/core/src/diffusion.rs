//! The Brox diffusion on a fixed environment, built from a Brownian motion by
//! a change of scale and a change of time:
//!
//! ```text
//! A(x)   = ∫_0^x e^{W(y)} dy
//! T(u)   = ∫_0^u e^{-2 W(A^{-1}(B(s)))} ds
//! X_t    = A^{-1}(B(T^{-1}(t)))
//! ```
//!
//! `A` is a trapezoid rule on the grid of `W`; inverses are node bracketing
//! plus linear interpolation within the cell. `T` integrates the occupation of
//! `B`, taken linear between its nodes, exactly against the cell masses of
//! `e^W` and `e^{-W}`, so narrow valleys crossed within one step of `B` still
//! contribute their time.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

use crate::environment::sample_two_sided_bm;
use crate::error::{Error, Result};
use crate::grid::{Orientation, PathGrid};
use crate::quadrature::cumulative_trapezoid;
use crate::scalar::{CompensatedSum, Real};
use crate::seed::Seed;

/// Where a [`DiffusionPath`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Brox,
    RescaledWalk,
    /// Brox construction driven by a smoothed environment.
    Approximation,
}

/// Values of a diffusion (or rescaled walk) at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath<T> {
    times: Vec<T>,
    values: Vec<T>,
    provenance: Provenance,
    seed: Option<Seed>,
}

impl<T: Real> DiffusionPath<T> {
    pub fn new(
        times: Vec<T>,
        values: Vec<T>,
        provenance: Provenance,
        seed: Option<Seed>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config(format!(
                "diffusion path needs equal non-empty time/value arrays ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("diffusion path times must increase".into()));
        }
        Ok(Self {
            times,
            values,
            provenance,
            seed,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }

    /// Largest pointwise distance to another path on the same times.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if self.times != other.times {
            return Err(Error::Config("paths are sampled at different times".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    /// CSV `t,x`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(self.times.len() * 48 + 4);
        buf.push_str("t,x\n");
        for (t, x) in self.times.iter().zip(&self.values) {
            buf.push_str(&format!("{:.16e},{:.16e}\n", t.as_f64(), x.as_f64()));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// Inverse of a strictly increasing grid function at `y`.
pub fn inverse_monotone<T: Real>(f: &PathGrid<T>, y: T) -> Result<T> {
    let v = f.values();
    let (lo, hi) = (v[0], v[v.len() - 1]);
    if !(y >= lo && y <= hi) {
        return Err(Error::range("inverse argument", y.as_f64(), lo.as_f64(), hi.as_f64()));
    }
    // First index whose value exceeds y, clamped so that [i, i+1] is a cell.
    let upper = v.partition_point(|&fi| fi <= y);
    let i = upper.saturating_sub(1).min(v.len() - 2);
    Ok(invert_in_cell(f, i, y))
}

#[inline]
fn invert_in_cell<T: Real>(f: &PathGrid<T>, i: usize, y: T) -> T {
    let v = f.values();
    let span = v[i + 1] - v[i];
    let w = if span > T::zero() {
        ((y - v[i]) / span).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    f.node(i) + w * f.dx()
}

/// Sequential inverse of a strictly increasing grid function. Consecutive
/// queries that move little cost O(1); large jumps gallop then bisect.
#[derive(Debug, Clone)]
pub struct MonotoneCursor<'a, T> {
    grid: &'a PathGrid<T>,
    cell: usize,
}

impl<'a, T: Real> MonotoneCursor<'a, T> {
    /// Cursor starting in the cell containing `start`.
    pub fn new(grid: &'a PathGrid<T>, start: usize) -> Self {
        Self {
            grid,
            cell: start.min(grid.len() - 2),
        }
    }

    #[inline]
    pub fn invert(&mut self, y: T) -> Result<T> {
        let v = self.grid.values();
        let last = v.len() - 1;
        if !(y >= v[0] && y <= v[last]) {
            return Err(Error::range(
                "inverse argument",
                y.as_f64(),
                v[0].as_f64(),
                v[last].as_f64(),
            ));
        }
        let mut i = self.cell;
        if y < v[i] {
            let mut step = 1usize;
            let mut hi = i;
            loop {
                let lo = i.saturating_sub(step);
                if v[lo] <= y || lo == 0 {
                    i = lo + v[lo..=hi].partition_point(|&f| f <= y).saturating_sub(1);
                    break;
                }
                hi = lo;
                step *= 2;
            }
        } else if y > v[i + 1] {
            let mut step = 1usize;
            let mut lo = i + 1;
            loop {
                let hi = (lo + step).min(last);
                if v[hi] >= y || hi == last {
                    i = lo + v[lo..=hi].partition_point(|&f| f <= y).saturating_sub(1);
                    break;
                }
                lo = hi;
                step *= 2;
            }
        }
        let i = i.min(last - 1);
        self.cell = i;
        Ok(invert_in_cell(self.grid, i, y))
    }

    /// Like [`MonotoneCursor::invert`] but returns the cell and the weight
    /// `w ∈ [0, 1]` of the preimage, so other grids on the same nodes can be
    /// interpolated without locating the point again.
    #[inline]
    pub fn invert_cell(&mut self, y: T) -> Result<(usize, T)> {
        self.invert(y)?;
        let v = self.grid.values();
        let i = self.cell;
        let span = v[i + 1] - v[i];
        let w = if span > T::zero() {
            ((y - v[i]) / span).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        Ok((i, w))
    }
}

/// Scale function of the diffusion in the environment `W`.
#[derive(Debug, Clone)]
pub struct ScaleFunction<T> {
    env: PathGrid<T>,
    scale: PathGrid<T>,
    origin: usize,
    // trapezoid masses of e^W and e^{-W} on each cell
    cell_a: Vec<T>,
    cell_m: Vec<T>,
}

/// Trapezoid cumulative integral of `e^W`, pinned at `A(0) = 0`.
///
/// `W` must be space-indexed and have a node at the origin.
pub fn scale_function<T: Real>(w: &PathGrid<T>) -> Result<ScaleFunction<T>> {
    if w.orientation() != Orientation::Space {
        return Err(Error::Contract("the environment must be space-indexed".into()));
    }
    let origin = w.origin_index()?;
    let dens: Vec<T> = w.values().iter().map(|v| v.exp()).collect();
    let a = cumulative_trapezoid(&dens, w.dx(), origin);
    let scale = PathGrid::new(w.x0(), w.dx(), a, Orientation::Space)?;
    if !scale.is_strictly_increasing() {
        return Err(Error::Internal(
            "scale function is not strictly increasing (e^W underflow)".into(),
        ));
    }
    let half = T::lit(0.5) * w.dx();
    let inv: Vec<T> = w.values().iter().map(|v| (-*v).exp()).collect();
    let cell_a = dens.windows(2).map(|p| half * (p[0] + p[1])).collect();
    let cell_m = inv.windows(2).map(|p| half * (p[0] + p[1])).collect();
    Ok(ScaleFunction {
        env: w.clone(),
        scale,
        origin,
        cell_a,
        cell_m,
    })
}

impl<T: Real> ScaleFunction<T> {
    pub fn env(&self) -> &PathGrid<T> {
        &self.env
    }

    pub fn grid(&self) -> &PathGrid<T> {
        &self.scale
    }

    pub fn eval(&self, x: T) -> Result<T> {
        self.scale.eval(x)
    }

    pub fn inverse(&self, y: T) -> Result<T> {
        inverse_monotone(&self.scale, y)
    }

    pub fn cursor(&self) -> MonotoneCursor<'_, T> {
        MonotoneCursor::new(&self.scale, self.origin)
    }

    /// `[A(x_min), A(x_max)]`, the natural-scale range the Brownian motion may
    /// explore before the environment window is exhausted.
    pub fn range(&self) -> (T, T) {
        let v = self.scale.values();
        (v[0], v[v.len() - 1])
    }

    /// Mean of `e^{-2W}` in natural-scale measure between two points given as
    /// `(cell, weight)`: `(M(x1) - M(x0)) / (A(x1) - A(x0))` with `M = ∫e^{-W}`.
    /// Within a single cell this is the cell ratio.
    pub fn occupation_rate(&self, p: (usize, T), q: (usize, T)) -> T {
        let ((ca, wa), (cb, wb)) = if p <= q { (p, q) } else { (q, p) };
        let ratio = |c: usize| self.cell_m[c] / self.cell_a[c];
        if ca == cb {
            return ratio(ca);
        }
        let one = T::one();
        let mut num = CompensatedSum::new();
        let mut den = CompensatedSum::new();
        num.add((one - wa) * self.cell_m[ca]);
        den.add((one - wa) * self.cell_a[ca]);
        for c in ca + 1..cb {
            num.add(self.cell_m[c]);
            den.add(self.cell_a[c]);
        }
        num.add(wb * self.cell_m[cb]);
        den.add(wb * self.cell_a[cb]);
        if den.value() > T::zero() {
            num.value() / den.value()
        } else {
            ratio(ca)
        }
    }
}

/// Trapezoid integral of `g(W(x))` over `[a, b]` using the grid nodes strictly
/// inside plus the two (interpolated) endpoints.
fn integrate_over_env<T: Real>(w: &PathGrid<T>, a: T, b: T, g: impl Fn(T) -> T) -> Result<T> {
    let (ia, wa) = w.locate(a)?;
    let (ib, _) = w.locate(b)?;
    let mut pts: Vec<(T, T)> = Vec::with_capacity(ib.saturating_sub(ia) + 3);
    pts.push((a, w.interp(ia, wa)));
    for i in ia + 1..=ib {
        let x = w.node(i);
        if x > a && x < b {
            pts.push((x, w.values()[i]));
        }
    }
    pts.push((b, w.eval(b)?));
    let half = T::lit(0.5);
    let mut acc = CompensatedSum::new();
    for p in pts.windows(2) {
        acc.add(half * (p[1].0 - p[0].0) * (g(p[0].1) + g(p[1].1)));
    }
    Ok(acc.value())
}

/// Speed measure `m([a, b]) = ∫_a^b 2 e^{-W}`.
pub fn speed_measure<T: Real>(w: &PathGrid<T>, a: T, b: T) -> Result<T> {
    if a > b {
        return Err(Error::range("interval start", a.as_f64(), f64::NEG_INFINITY, b.as_f64()));
    }
    if a == b {
        w.locate(a)?;
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    integrate_over_env(w, a, b, |v| two * (-v).exp())
}

/// Time change sampled on the nodes of the driving Brownian motion.
#[derive(Debug, Clone)]
pub struct TimeChange<T> {
    grid: PathGrid<T>,
}

impl<T: Real> TimeChange<T> {
    pub fn grid(&self) -> &PathGrid<T> {
        &self.grid
    }

    /// Largest intrinsic time covered.
    pub fn u_max(&self) -> T {
        self.grid.x_max()
    }

    /// `T(u_max)`, the largest diffusion time the path can reach.
    pub fn horizon(&self) -> T {
        *self.grid.values().last().expect("non-empty")
    }

    pub fn eval(&self, u: T) -> Result<T> {
        self.grid.eval(u)
    }

    /// `T^{-1}(t)`.
    pub fn inverse(&self, t: T) -> Result<T> {
        inverse_monotone(&self.grid, t)
    }
}

/// `T` at the nodes of `B` (started at `shift` in natural scale), stopped as
/// soon as the accumulated time reaches `until`.
fn time_change_nodes<T: Real>(
    scale: &ScaleFunction<T>,
    b: &PathGrid<T>,
    shift: T,
    until: Option<T>,
) -> Result<Vec<T>> {
    if b.orientation() != Orientation::Time || b.x0() != T::zero() {
        return Err(Error::Contract(
            "the driving Brownian motion must be time-indexed from 0".into(),
        ));
    }
    let mut cursor = scale.cursor();
    let mut out = Vec::with_capacity(b.len());
    let mut acc = CompensatedSum::new();
    let mut prev = (0usize, T::zero());
    for (i, bv) in b.values().iter().enumerate() {
        let here = cursor.invert_cell(shift + *bv).map_err(|_| {
            let (lo, hi) = scale.range();
            Error::range(
                format!("A(x0) + B(s) at s = {}", b.node(i)),
                (shift + *bv).as_f64(),
                lo.as_f64(),
                hi.as_f64(),
            )
        })?;
        if i > 0 {
            acc.add(scale.occupation_rate(prev, here));
        }
        prev = here;
        let t = acc.value() * b.dx();
        out.push(t);
        if let Some(target) = until {
            if t >= target && out.len() >= 2 {
                break;
            }
        }
    }
    Ok(out)
}

fn build_time_change<T: Real>(
    scale: &ScaleFunction<T>,
    b: &PathGrid<T>,
    shift: T,
    until: Option<T>,
) -> Result<TimeChange<T>> {
    let nodes = time_change_nodes(scale, b, shift, until)?;
    let grid = PathGrid::new(T::zero(), b.dx(), nodes, Orientation::Time)?;
    if !grid.is_strictly_increasing() {
        return Err(Error::Internal(
            "time change is not strictly increasing (integrand underflow)".into(),
        ));
    }
    Ok(TimeChange { grid })
}

/// `T(u) = ∫_0^u exp(-2 W(A^{-1}(B(s)))) ds` with `B` linear between nodes.
pub fn time_change<T: Real>(w: &PathGrid<T>, b: &PathGrid<T>, u: T) -> Result<T> {
    let scale = scale_function(w)?;
    time_change_with(&scale, b, u)
}

pub fn time_change_with<T: Real>(scale: &ScaleFunction<T>, b: &PathGrid<T>, u: T) -> Result<T> {
    let (i, frac) = b.locate(u)?;
    let head = PathGrid::new(T::zero(), b.dx(), b.values()[..=i + 1].to_vec(), Orientation::Time)?;
    let nodes = time_change_nodes(scale, &head, T::zero(), None)?;
    if frac == T::zero() {
        return Ok(nodes[i]);
    }
    let mut cursor = scale.cursor();
    let pi = cursor.invert_cell(b.values()[i])?;
    let pu = cursor.invert_cell(b.eval(u)?)?;
    Ok(nodes[i] + (u - b.node(i)) * scale.occupation_rate(pi, pu))
}

fn horizon_error<T: Real>(needed: T, tc: &TimeChange<T>) -> Error {
    Error::range(
        "time-change horizon",
        needed.as_f64(),
        0.0,
        tc.horizon().as_f64(),
    )
}

fn assemble<T: Real>(
    scale: &ScaleFunction<T>,
    b: &PathGrid<T>,
    times: &[T],
    x0: T,
    provenance: Provenance,
    seed: Option<Seed>,
) -> Result<DiffusionPath<T>> {
    let t_max = *times
        .last()
        .ok_or_else(|| Error::Config("no output times".into()))?;
    if times[0] < T::zero() {
        return Err(Error::Config("output times must be non-negative".into()));
    }
    let shift = if x0 == T::zero() { T::zero() } else { scale.eval(x0)? };
    let tc = build_time_change(scale, b, shift, Some(t_max))?;
    if tc.horizon() < t_max {
        return Err(horizon_error(t_max, &tc));
    }
    let mut t_cursor = MonotoneCursor::new(tc.grid(), 0);
    let mut a_cursor = scale.cursor();
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let u = t_cursor.invert(t)?;
        let x = a_cursor.invert(shift + b.eval(u)?)?;
        values.push(x);
    }
    DiffusionPath::new(times.to_vec(), values, provenance, seed)
}

/// `X_t = A^{-1}(B(T^{-1}(t)))` at the requested times.
///
/// Fails with a range error when `T(u_max) < max(times)` (the Brownian motion
/// is too short) or when `B` leaves the natural-scale range of `W`.
pub fn brox_path<T: Real>(w: &PathGrid<T>, b: &PathGrid<T>, times: &[T]) -> Result<DiffusionPath<T>> {
    let scale = scale_function(w)?;
    assemble(&scale, b, times, T::zero(), Provenance::Brox, None)
}

/// Same construction driven by a smoothed environment `W_n`.
pub fn approximate_diffusion<T: Real>(
    w_n: &PathGrid<T>,
    b: &PathGrid<T>,
    times: &[T],
) -> Result<DiffusionPath<T>> {
    let scale = scale_function(w_n)?;
    assemble(&scale, b, times, T::zero(), Provenance::Approximation, None)
}

/// Construction from an arbitrary start: `X_t = A^{-1}(A(x0) + B(T_{x0}^{-1}(t)))`.
pub fn brox_path_from<T: Real>(
    scale: &ScaleFunction<T>,
    b: &PathGrid<T>,
    times: &[T],
    x0: T,
) -> Result<DiffusionPath<T>> {
    assemble(scale, b, times, x0, Provenance::Brox, None)
}

/// Discretization of the intrinsic Brownian motion used by quenched sampling.
#[derive(Debug, Clone, Copy)]
pub struct QuenchedOptions<T> {
    /// Time step of the driving Brownian motion.
    pub du: T,
    /// First intrinsic horizon tried.
    pub initial_horizon: T,
    /// The horizon is doubled at most this many times.
    pub max_doublings: u32,
}

impl<T: Real> Default for QuenchedOptions<T> {
    fn default() -> Self {
        Self {
            du: T::lit(1e-4),
            initial_horizon: T::one(),
            max_doublings: 10,
        }
    }
}

/// Quenched sampler: the environment is fixed, only `B` is random.
#[derive(Debug, Clone)]
pub struct QuenchedSampler<T> {
    scale: ScaleFunction<T>,
    options: QuenchedOptions<T>,
}

impl<T: Real> QuenchedSampler<T> {
    pub fn new(w: &PathGrid<T>, options: QuenchedOptions<T>) -> Result<Self> {
        if !(options.du > T::zero()) || !(options.initial_horizon > T::zero()) {
            return Err(Error::Config("quenched sampler needs du > 0 and horizon > 0".into()));
        }
        Ok(Self {
            scale: scale_function(w)?,
            options,
        })
    }

    pub fn scale(&self) -> &ScaleFunction<T> {
        &self.scale
    }

    pub fn options(&self) -> &QuenchedOptions<T> {
        &self.options
    }

    /// Full path at `times` from `x0`; the Brownian horizon is doubled until
    /// the time change reaches `max(times)`.
    pub fn sample_path(&self, times: &[T], x0: T, seed: Seed) -> Result<DiffusionPath<T>> {
        let t_max = *times
            .last()
            .ok_or_else(|| Error::Config("no output times".into()))?;
        let intrinsic = seed.derive("intrinsic", 0);
        let mut horizon = self.options.initial_horizon.max(t_max);
        let mut last_err = None;
        for _ in 0..=self.options.max_doublings {
            let b = sample_brownian_path(horizon, self.options.du, intrinsic)?;
            match assemble(&self.scale, &b, times, x0, Provenance::Brox, Some(seed)) {
                Ok(p) => return Ok(p),
                Err(e @ Error::Range { .. }) if is_horizon_error(&e) => {
                    last_err = Some(e);
                    horizon = horizon + horizon;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    /// `X_t` from `x0` without materializing the Brownian path. Uses the same
    /// random stream and the same arithmetic as [`QuenchedSampler::sample_path`].
    pub fn terminal_value(&self, x0: T, t: T, seed: Seed) -> Result<T> {
        if t == T::zero() {
            return Ok(x0);
        }
        let du = self.options.du;
        let max_nodes = {
            let mut h = self.options.initial_horizon.max(t);
            for _ in 0..self.options.max_doublings {
                h = h + h;
            }
            (h / du).ceil().to_usize().unwrap_or(usize::MAX)
        };
        let shift = if x0 == T::zero() { T::zero() } else { self.scale.eval(x0)? };
        let intrinsic = seed.derive("intrinsic", 0);
        let mut rng = intrinsic.derive("bm+", 0).rng();
        let sd = du.as_f64().sqrt();
        let mut cursor = self.scale.cursor();
        let escape = |s: T, y: T| {
            let (lo, hi) = self.scale.range();
            Error::range(format!("A(x0) + B(s) at s = {s}"), y.as_f64(), lo.as_f64(), hi.as_f64())
        };
        let mut b_prev = T::zero();
        let mut p_prev = cursor.invert_cell(shift).map_err(|_| escape(T::zero(), shift))?;
        let mut acc = CompensatedSum::new();
        let mut t_prev = T::zero();
        let mut b_acc = 0.0f64;
        for i in 1..=max_nodes {
            let z: f64 = StandardNormal.sample(&mut rng);
            b_acc += sd * z;
            let b_cur = T::lit(b_acc);
            let y = shift + b_cur;
            let p = cursor
                .invert_cell(y)
                .map_err(|_| escape(T::from_usize_lossy(i) * du, y))?;
            acc.add(self.scale.occupation_rate(p_prev, p));
            let t_cur = acc.value() * du;
            if !(t_cur > t_prev) {
                return Err(Error::Internal("time change is not strictly increasing".into()));
            }
            if t_cur >= t {
                let w = ((t - t_prev) / (t_cur - t_prev)).max(T::zero()).min(T::one());
                let bu = if w == T::zero() {
                    b_prev
                } else if w == T::one() {
                    b_cur
                } else {
                    b_prev + w * (b_cur - b_prev)
                };
                return cursor.invert(shift + bu);
            }
            t_prev = t_cur;
            b_prev = b_cur;
            p_prev = p;
        }
        Err(Error::range(
            "time-change horizon",
            t.as_f64(),
            0.0,
            t_prev.as_f64(),
        ))
    }
}

/// True when `e` reports an exhausted time-change horizon (as opposed to the
/// diffusion leaving the environment window).
pub fn is_horizon_error(e: &Error) -> bool {
    matches!(e, Error::Range { what, .. } if what == "time-change horizon")
}

fn sample_brownian_path<T: Real>(horizon: T, du: T, seed: Seed) -> Result<PathGrid<T>> {
    crate::environment::sample_brownian(horizon, du, seed)
}

/// Quenched sample: `W` fixed, intrinsic Brownian motion drawn from `seed`.
pub fn sample_quenched<T: Real>(
    w: &PathGrid<T>,
    times: &[T],
    x0: T,
    seed: Seed,
) -> Result<DiffusionPath<T>> {
    QuenchedSampler::new(w, QuenchedOptions::default())?.sample_path(times, x0, seed)
}

/// Parameters of an annealed draw.
#[derive(Debug, Clone)]
pub struct AnnealedParams<T> {
    /// Initial half-width of the environment window.
    pub window: T,
    /// Grid step of the environment.
    pub dx: T,
    pub quenched: QuenchedOptions<T>,
    pub times: Vec<T>,
    pub x0: T,
    /// Number of times the environment window may be doubled.
    pub max_window_doublings: u32,
}

impl<T: Real> AnnealedParams<T> {
    pub fn at_time(t: T) -> Self {
        Self {
            window: T::lit(8.0),
            dx: T::lit(1e-3),
            quenched: QuenchedOptions::default(),
            times: vec![T::zero(), t],
            x0: T::zero(),
            max_window_doublings: 6,
        }
    }
}

fn environment_seed(seed: Seed) -> Seed {
    seed.derive("environment", 0)
}

fn quenched_seed(seed: Seed) -> Seed {
    seed.derive("quenched", 0)
}

/// Annealed draw: a fresh environment and a fresh Brownian motion, from
/// independent derived streams. The environment window is doubled (keeping the
/// inner path) whenever the diffusion would leave it.
pub fn sample_annealed<T: Real>(params: &AnnealedParams<T>, seed: Seed) -> Result<DiffusionPath<T>> {
    annealed_with(params, environment_seed(seed), quenched_seed(seed), |s, q| {
        s.sample_path(&params.times, params.x0, q)
    })
}

/// Annealed draw of the single value `X_t`.
pub fn sample_annealed_terminal<T: Real>(params: &AnnealedParams<T>, t: T, seed: Seed) -> Result<T> {
    annealed_with(params, environment_seed(seed), quenched_seed(seed), |s, q| {
        s.terminal_value(params.x0, t, q)
    })
}

fn annealed_with<T: Real, R>(
    params: &AnnealedParams<T>,
    env_seed: Seed,
    q_seed: Seed,
    run: impl Fn(&QuenchedSampler<T>, Seed) -> Result<R>,
) -> Result<R> {
    let mut window = params.window;
    let mut last_err = None;
    for _ in 0..=params.max_window_doublings {
        let w = sample_two_sided_bm(-window, window, params.dx, env_seed)?;
        let sampler = QuenchedSampler::new(&w, params.quenched)?;
        match run(&sampler, q_seed) {
            Ok(r) => return Ok(r),
            Err(e) if e.is_range() && !is_horizon_error(&e) => {
                last_err = Some(e);
                window = window + window;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}
