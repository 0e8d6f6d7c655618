//! Deterministic quadrature rules used by the forms and the diffusion.

use crate::scalar::{CompensatedSum, Real};

/// Composite Simpson rule on `[a, b]` with `intervals` subintervals
/// (rounded up to an even number).
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, intervals: usize) -> T {
    let m = (intervals.max(2) + 1) & !1;
    let h = (b - a) / T::from_usize_lossy(m);
    let mut acc = CompensatedSum::new();
    acc.add(f(a));
    acc.add(f(b));
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    for i in 1..m {
        let w = if i % 2 == 1 { four } else { two };
        acc.add(w * f(a + T::from_usize_lossy(i) * h));
    }
    acc.value() * h / T::lit(3.0)
}

/// Simpson quadrature with step at most `max_step`, plus the Richardson
/// estimate `|S(h) - S(2h)| / 15` of its error.
pub fn simpson_with_error<T: Real>(f: impl Fn(T) -> T, a: T, b: T, max_step: T) -> (T, T) {
    let span = (b - a).abs();
    let mut m = (span / max_step).ceil().to_usize().unwrap_or(2).max(4);
    m = (m + 3) & !3;
    let fine = simpson(&f, a, b, m);
    let coarse = simpson(&f, a, b, m / 2);
    (fine, (fine - coarse).abs() / T::lit(15.0))
}

/// Cumulative trapezoid integral of node values with spacing `dx`, anchored so
/// that the result is zero at `origin`.
///
/// Half-sums are accumulated in node units and multiplied by `dx` at the end,
/// so a constant integrand gives an exactly linear result.
pub fn cumulative_trapezoid<T: Real>(values: &[T], dx: T, origin: usize) -> Vec<T> {
    let n = values.len();
    let half = T::lit(0.5);
    let mut out = vec![T::zero(); n];
    let mut acc = CompensatedSum::new();
    for i in origin..n.saturating_sub(1) {
        acc.add(half * (values[i] + values[i + 1]));
        out[i + 1] = acc.value() * dx;
    }
    let mut acc = CompensatedSum::new();
    for i in (1..=origin).rev() {
        acc.add(half * (values[i] + values[i - 1]));
        out[i - 1] = -(acc.value() * dx);
    }
    out
}

/// Two-point Gauss–Legendre rule on `[a, b]`.
#[inline]
pub fn gauss2<T: Real>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    let half = T::lit(0.5);
    let mid = half * (a + b);
    let rad = half * (b - a);
    let off = rad * T::lit(0.577_350_269_189_625_8);
    rad * (f(mid - off) + f(mid + off))
}
