//! Uniformly sampled real functions.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Whether a grid's abscissa is space (`x`) or time (`t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Space,
    Time,
}

impl Orientation {
    fn header(self) -> &'static str {
        match self {
            Orientation::Space => "x,value",
            Orientation::Time => "t,value",
        }
    }
}

/// A real function sampled on nodes `x0 + i * dx`, `i = 0..len`.
///
/// Evaluation between nodes is linear interpolation. Evaluation outside the
/// sampled interval is a [`Error::Range`]; nothing is ever extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid<T> {
    x0: T,
    dx: T,
    values: Vec<T>,
    orientation: Orientation,
}

impl<T: Real> PathGrid<T> {
    pub fn new(x0: T, dx: T, values: Vec<T>, orientation: Orientation) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "a path grid needs at least 2 nodes, got {}",
                values.len()
            )));
        }
        if !(dx > T::zero()) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::Config(format!("invalid grid x0={x0}, dx={dx}")));
        }
        Ok(Self {
            x0,
            dx,
            values,
            orientation,
        })
    }

    /// Samples `func` on the nodes of `[x0, x0 + (len-1) dx]`.
    pub fn from_fn(
        x0: T,
        dx: T,
        len: usize,
        orientation: Orientation,
        func: impl Fn(T) -> T,
    ) -> Result<Self> {
        let values = (0..len)
            .map(|i| func(x0 + T::from_usize_lossy(i) * dx))
            .collect();
        Self::new(x0, dx, values, orientation)
    }

    /// Grid with nodes at `k * dx` for `k` in `k_min..=k_max`.
    pub fn from_lattice(
        k_min: i64,
        dx: T,
        values: Vec<T>,
        orientation: Orientation,
    ) -> Result<Self> {
        Self::new(-(T::from_i64_lossy(-k_min) * dx), dx, values, orientation)
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn x_max(&self) -> T {
        self.node(self.values.len() - 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> T {
        self.x0 + T::from_usize_lossy(i) * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.values.len()).map(move |i| self.node(i))
    }

    /// Index of the node sitting at `x`, if `x` is a node up to `1e-9 dx`.
    pub fn node_index(&self, x: T) -> Option<usize> {
        let r = (x - self.x0) / self.dx;
        let k = r.round();
        if k < T::zero() || (r - k).abs() > T::lit(1e-9) {
            return None;
        }
        let k = k.to_usize()?;
        (k < self.values.len()).then_some(k)
    }

    /// Index of the node at the origin. Grids built by this crate always
    /// contain 0 as a node when they cover it.
    pub fn origin_index(&self) -> Result<usize> {
        self.node_index(T::zero()).ok_or_else(|| {
            Error::Contract(format!(
                "origin is not a node of the grid [{}, {}] with step {}",
                self.x0,
                self.x_max(),
                self.dx
            ))
        })
    }

    pub fn contains(&self, x: T) -> bool {
        let tol = self.dx * T::lit(1e-9);
        x >= self.x0 - tol && x <= self.x_max() + tol
    }

    fn range_error(&self, x: T) -> Error {
        let what = match self.orientation {
            Orientation::Space => "x",
            Orientation::Time => "t",
        };
        Error::range(what, x.as_f64(), self.x0.as_f64(), self.x_max().as_f64())
    }

    /// Cell index `i` and fractional offset `w ∈ [0,1]` with `x = x_i + w dx`.
    #[inline]
    pub fn locate(&self, x: T) -> Result<(usize, T)> {
        if !self.contains(x) || x.is_nan() {
            return Err(self.range_error(x));
        }
        let last = self.values.len() - 2;
        let r = ((x - self.x0) / self.dx).max(T::zero());
        let i = r.floor().to_usize().unwrap_or(0).min(last);
        let w = (r - T::from_usize_lossy(i)).max(T::zero()).min(T::one());
        Ok((i, w))
    }

    /// Linear interpolation at `x`.
    #[inline]
    pub fn eval(&self, x: T) -> Result<T> {
        let (i, w) = self.locate(x)?;
        Ok(self.interp(i, w))
    }

    #[inline]
    pub(crate) fn interp(&self, i: usize, w: T) -> T {
        if w == T::zero() {
            self.values[i]
        } else if w == T::one() {
            self.values[i + 1]
        } else {
            self.values[i] + w * (self.values[i + 1] - self.values[i])
        }
    }

    /// Slope of the linear piece on cell `i`.
    #[inline]
    pub fn slope(&self, i: usize) -> T {
        (self.values[i + 1] - self.values[i]) / self.dx
    }

    /// Applies `func` to every node value.
    pub fn map(&self, func: impl Fn(T) -> T) -> Self {
        Self {
            x0: self.x0,
            dx: self.dx,
            values: self.values.iter().map(|&v| func(v)).collect(),
            orientation: self.orientation,
        }
    }

    /// Largest absolute node value over nodes inside `[a, b]`.
    pub fn sup_abs_on(&self, a: T, b: T) -> T {
        self.nodes()
            .zip(self.values.iter())
            .filter(|(x, _)| *x >= a && *x <= b)
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    /// Strictly increasing node values.
    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// Writes `x,value` (or `t,value`) CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(self.values.len() * 48);
        writeln!(buf, "{}", self.orientation.header()).ok();
        for (x, v) in self.nodes().zip(self.values.iter()) {
            writeln!(buf, "{:.16e},{:.16e}", x.as_f64(), v.as_f64()).ok();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Reads a CSV produced by [`PathGrid::write_csv`]. The abscissa must be
    /// uniform up to `1e-9` relative to the step.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid csv".into()))??;
        let orientation = match header.trim() {
            "x,value" => Orientation::Space,
            "t,value" => Orientation::Time,
            other => return Err(Error::Parse(format!("unexpected grid header `{other}`"))),
        };
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 2 fields", lineno + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            xs.push(parse(a)?);
            vs.push(parse(b)?);
        }
        if xs.len() < 2 {
            return Err(Error::Parse("grid csv needs at least 2 rows".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * dx)).abs() > 1e-9 * dx.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Parse(format!("non-uniform abscissa at row {}", i + 2)));
            }
        }
        Self::new(
            T::lit(xs[0]),
            T::lit(dx),
            vs.into_iter().map(T::lit).collect(),
            orientation,
        )
    }
}
