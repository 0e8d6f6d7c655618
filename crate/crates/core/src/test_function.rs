//! Smooth, rapidly decaying functions with closed-form derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Regularity class of a [`TestFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    C0,
    C1,
    C2,
}

/// Threshold below which a test function and its derivatives count as zero.
pub const DECAY_TOLERANCE: f64 = 1e-12;

/// A function `f` bundled with `f'` and (for class C²) `f''`.
///
/// `decay_radius` is a radius outside of which `|f|`, `|f'|` and `|f''|` are
/// below [`DECAY_TOLERANCE`]; it is infinite for functions that do not decay.
#[derive(Clone)]
pub struct TestFunction<T> {
    f: RealFn<T>,
    f1: Option<RealFn<T>>,
    f2: Option<RealFn<T>>,
    decay_radius: T,
    smoothness: Smoothness,
}

impl<T: Real> fmt::Debug for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("decay_radius", &self.decay_radius)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

impl<T: Real> TestFunction<T> {
    pub fn c2(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        f1: impl Fn(T) -> T + Send + Sync + 'static,
        f2: impl Fn(T) -> T + Send + Sync + 'static,
        decay_radius: T,
    ) -> Self {
        Self {
            f: Arc::new(f),
            f1: Some(Arc::new(f1)),
            f2: Some(Arc::new(f2)),
            decay_radius,
            smoothness: Smoothness::C2,
        }
    }

    pub fn c1(
        f: impl Fn(T) -> T + Send + Sync + 'static,
        f1: impl Fn(T) -> T + Send + Sync + 'static,
        decay_radius: T,
    ) -> Self {
        Self {
            f: Arc::new(f),
            f1: Some(Arc::new(f1)),
            f2: None,
            decay_radius,
            smoothness: Smoothness::C1,
        }
    }

    pub fn c0(f: impl Fn(T) -> T + Send + Sync + 'static, decay_radius: T) -> Self {
        Self {
            f: Arc::new(f),
            f1: None,
            f2: None,
            decay_radius,
            smoothness: Smoothness::C0,
        }
    }

    /// `amplitude * exp(-((x - center) / width)^2)`.
    pub fn gaussian_bump(center: T, width: T, amplitude: T) -> Self {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let w2 = width * width;
        let g = move |x: T| {
            let u = (x - center) / width;
            amplitude * (-u * u).exp()
        };
        let g1 = move |x: T| -two * (x - center) / w2 * g(x);
        let g2 = move |x: T| {
            let d = x - center;
            (four * d * d / (w2 * w2) - two / w2) * g(x)
        };
        let radius = decay_radius_by_scan(&g, &g1, Some(&g2), center, width);
        Self::c2(g, g1, g2, radius)
    }

    /// `amplitude * (x - center) / width * exp(-((x - center) / width)^2)`.
    pub fn odd_bump(center: T, width: T, amplitude: T) -> Self {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let e = move |x: T| {
            let u = (x - center) / width;
            (-u * u).exp()
        };
        let g = move |x: T| amplitude * (x - center) / width * e(x);
        let g1 = move |x: T| {
            let u = (x - center) / width;
            amplitude / width * (T::one() - two * u * u) * e(x)
        };
        let g2 = move |x: T| {
            let u = (x - center) / width;
            amplitude / (width * width) * (two * two * u * u * u - two * three * u) * e(x)
        };
        let radius = decay_radius_by_scan(&g, &g1, Some(&g2), center, width);
        Self::c2(g, g1, g2, radius)
    }

    /// `amplitude * cos(freq x) * exp(-x^2)`.
    pub fn cosine_bump(freq: T, amplitude: T) -> Self {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let g = move |x: T| amplitude * (freq * x).cos() * (-x * x).exp();
        let g1 = move |x: T| {
            let (s, c) = (freq * x).sin_cos();
            amplitude * (-freq * s - two * x * c) * (-x * x).exp()
        };
        let g2 = move |x: T| {
            let (s, c) = (freq * x).sin_cos();
            amplitude
                * (-freq * freq * c + four * freq * x * s + (four * x * x - two) * c)
                * (-x * x).exp()
        };
        let radius = decay_radius_by_scan(&g, &g1, Some(&g2), T::zero(), T::one());
        Self::c2(g, g1, g2, radius)
    }

    /// Polynomial `c0 + c1 x + c2 x^2` (no decay; used for generator checks).
    pub fn quadratic(c0: T, c1: T, c2: T) -> Self {
        let two = T::lit(2.0);
        Self::c2(
            move |x| c0 + c1 * x + c2 * x * x,
            move |x| c1 + two * c2 * x,
            move |_| two * c2,
            T::infinity(),
        )
    }

    #[inline]
    pub fn f(&self, x: T) -> T {
        (self.f)(x)
    }

    pub fn f1(&self, x: T) -> Result<T> {
        self.f1
            .as_ref()
            .map(|d| d(x))
            .ok_or_else(|| Error::Contract("first derivative required (C1 or better)".into()))
    }

    pub fn f2(&self, x: T) -> Result<T> {
        self.f2
            .as_ref()
            .map(|d| d(x))
            .ok_or_else(|| Error::Contract("second derivative required (C2)".into()))
    }

    pub(crate) fn d1(&self) -> Result<&RealFn<T>> {
        self.f1
            .as_ref()
            .ok_or_else(|| Error::Contract("first derivative required (C1 or better)".into()))
    }

    pub(crate) fn d2(&self) -> Result<&RealFn<T>> {
        self.f2
            .as_ref()
            .ok_or_else(|| Error::Contract("second derivative required (C2)".into()))
    }

    pub fn decay_radius(&self) -> T {
        self.decay_radius
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn require(&self, class: Smoothness, role: &str) -> Result<()> {
        if self.smoothness < class {
            return Err(Error::Contract(format!(
                "{role} must be of class {class:?}, got {:?}",
                self.smoothness
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Self {
        fn comb<T: Real>(x: &RealFn<T>, a: T, y: &RealFn<T>, b: T) -> RealFn<T> {
            let (x, y) = (x.clone(), y.clone());
            Arc::new(move |t| a * x(t) + b * y(t))
        }
        let both = |p: &Option<RealFn<T>>, q: &Option<RealFn<T>>| match (p, q) {
            (Some(p), Some(q)) => Some(comb(p, a, q, b)),
            _ => None,
        };
        Self {
            f: comb(&self.f, a, &other.f, b),
            f1: both(&self.f1, &other.f1),
            f2: both(&self.f2, &other.f2),
            decay_radius: self.decay_radius.max(other.decay_radius),
            smoothness: self.smoothness.min(other.smoothness),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.linear_combination(a, self, T::zero())
    }

    /// Checks the stored derivatives against centered finite differences with
    /// step `1e-5` at `probes`, and the decay contract just outside the radius.
    pub fn validate(&self, probes: &[T]) -> Result<()> {
        let e = T::lit(1e-5);
        let tol = T::lit(1e-6);
        for &x in probes {
            if let Some(d1) = &self.f1 {
                let fd = (self.f(x + e) - self.f(x - e)) / (e + e);
                let exact = d1(x);
                if (exact - fd).abs() >= tol * (T::one() + exact.abs()) {
                    return Err(Error::Contract(format!(
                        "f' mismatch at {x}: {exact} vs finite difference {fd}"
                    )));
                }
                if let Some(d2) = &self.f2 {
                    let fd2 = (d1(x + e) - d1(x - e)) / (e + e);
                    let exact2 = d2(x);
                    if (exact2 - fd2).abs() >= tol * (T::one() + exact2.abs()) {
                        return Err(Error::Contract(format!(
                            "f'' mismatch at {x}: {exact2} vs finite difference {fd2}"
                        )));
                    }
                }
            }
        }
        if self.decay_radius.is_finite() {
            let r = self.decay_radius;
            let zero_tol = T::lit(DECAY_TOLERANCE);
            for k in 0..200 {
                let off = r + T::lit(0.01) + T::from_usize_lossy(k) * T::lit(0.1);
                for x in [off, -off] {
                    if self.f(x).abs() >= zero_tol {
                        return Err(Error::Contract(format!(
                            "|f({x})| = {} exceeds decay tolerance",
                            self.f(x)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Smallest radius on a 1/64 grid beyond which `|g|`, `|g'|`, `|g''|` all stay
/// below [`DECAY_TOLERANCE`] over a long scan window.
fn decay_radius_by_scan<T: Real>(
    g: &dyn Fn(T) -> T,
    g1: &dyn Fn(T) -> T,
    g2: Option<&dyn Fn(T) -> T>,
    center: T,
    width: T,
) -> T {
    let step = 1.0 / 64.0;
    let c = center.as_f64();
    let reach = c.abs() + 12.0 * width.as_f64().abs() + 12.0;
    let steps = (reach / step).ceil() as i64;
    let tol = DECAY_TOLERANCE;
    let big = |x: f64| {
        let x = T::lit(x);
        g(x).as_f64().abs() >= tol
            || g1(x).as_f64().abs() >= tol
            || g2.map(|d| d(x).as_f64().abs() >= tol).unwrap_or(false)
    };
    let mut last = 0.0f64;
    for k in -steps..=steps {
        let x = k as f64 * step;
        if big(x) {
            last = last.max(x.abs());
        }
    }
    T::lit(last + step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<f64> {
        (-30..=30).map(|k| k as f64 * 0.137).collect()
    }

    #[test]
    fn families_pass_finite_difference_and_decay_checks() {
        let fs = [
            TestFunction::gaussian_bump(0.0, 1.0, 1.0),
            TestFunction::gaussian_bump(0.4, 0.7, -2.0),
            TestFunction::odd_bump(-0.3, 0.8, 1.5),
            TestFunction::cosine_bump(2.0, 1.0),
        ];
        for f in &fs {
            f.validate(&probes()).unwrap();
            assert!(f.decay_radius() < 10.0);
        }
    }

    #[test]
    fn gaussian_decay_radius_is_tight() {
        let f = TestFunction::<f64>::gaussian_bump(0.0, 1.0, 1.0);
        let r = f.decay_radius();
        assert!(r > 5.0 && r < 7.0, "{r}");
        let inside = r - 0.2;
        assert!(f.f(inside).abs() >= 1e-12 || f.f2(inside).unwrap().abs() >= 1e-12);
    }

    #[test]
    fn wrong_derivative_is_detected() {
        let bad = TestFunction::<f64>::c2(|x| x.sin(), |x| x.cos(), |x| x.sin(), f64::INFINITY);
        assert!(bad.validate(&[0.3]).is_err());
    }

    #[test]
    fn smoothness_contract() {
        let f = TestFunction::<f64>::c1(|x| (-x * x).exp(), |x| -2.0 * x * (-x * x).exp(), 7.0);
        assert!(f.require(Smoothness::C1, "f").is_ok());
        assert!(matches!(f.require(Smoothness::C2, "f"), Err(Error::Contract(_))));
        assert!(f.f2(0.0).is_err());
    }

    #[test]
    fn linear_combination_is_pointwise() {
        let a = TestFunction::<f64>::gaussian_bump(0.0, 1.0, 1.0);
        let b = TestFunction::<f64>::odd_bump(0.5, 1.0, 1.0);
        let c = a.linear_combination(2.0, &b, -3.0);
        for x in probes() {
            assert!((c.f(x) - (2.0 * a.f(x) - 3.0 * b.f(x))).abs() < 1e-15);
            assert!((c.f2(x).unwrap() - (2.0 * a.f2(x).unwrap() - 3.0 * b.f2(x).unwrap())).abs() < 1e-13);
        }
        assert_eq!(c.decay_radius(), a.decay_radius().max(b.decay_radius()));
    }
}
