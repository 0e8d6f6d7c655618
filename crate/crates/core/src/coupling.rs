//! Charges at every scale `n` read off a single fine Brownian potential.
//!
//! For scale `n` the rescaled potential moves by `±a` per site with
//! `a = n^{-1/4}`. Starting from the origin, the fine path `P` is scanned
//! outwards until it leaves the band `(ref - a, ref + a)`; the exit side is the
//! sign of the site and the reference moves to the adjacent band edge. The exit
//! positions play the role of Skorokhod stopping times, whose spacing has mean
//! `a² = Δ`, so the lattice potential built from the charges tracks `P`
//! uniformly on compacts for every `n` simultaneously (pathwise error of order
//! `n^{-1/8}`; integrals against the increments converge at order `n^{-1/4}`).
//!
//! Sites `z >= 0` are read to the right of the origin. Sites `z < 0` are read
//! to the left; since the potential at node `k < 0` is minus the sum of the
//! charges `k..-1`, an upward exit to the left gives a negative charge.

use crate::environment::EnvironmentSample;
use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::scalar::Real;
use crate::seed::Seed;

/// Band half-width `n^{-1/4}` at scale `n`.
pub fn band_width(n: u64) -> f64 {
    (n as f64).powf(-0.25)
}

/// Embeds the charges on `z_min..=z_max` at scale `n` into the fine path `p`.
///
/// `p` must be space-indexed with a node at the origin; a range error is
/// returned if the path ends before the last requested site is resolved.
pub fn embed_environment<T: Real>(
    p: &PathGrid<T>,
    n: u64,
    z_min: i64,
    z_max: i64,
    seed: Seed,
) -> Result<EnvironmentSample> {
    if n == 0 {
        return Err(Error::Config("scaling index n must be positive".into()));
    }
    if z_min > 0 || z_max < 0 {
        return Err(Error::Config(format!(
            "window [{z_min}, {z_max}] must contain the origin"
        )));
    }
    let o = p.origin_index()?;
    let v = p.values();
    let a = T::lit(band_width(n));
    let escape = |site: i64| {
        Error::range(
            format!("fine path end while resolving site {site}"),
            p.node(if site >= 0 { v.len() - 1 } else { 0 }).as_f64(),
            p.x0().as_f64(),
            p.x_max().as_f64(),
        )
    };

    let mut right = Vec::with_capacity((z_max + 1) as usize);
    let mut reference = v[o];
    let mut i = o;
    for site in 0..=z_max {
        loop {
            i += 1;
            if i >= v.len() {
                return Err(escape(site));
            }
            let d = v[i] - reference;
            if d >= a {
                right.push(1i8);
                reference = reference + a;
                break;
            }
            if d <= -a {
                right.push(-1i8);
                reference = reference - a;
                break;
            }
        }
    }

    let mut left = Vec::with_capacity((-z_min) as usize);
    let mut reference = v[o];
    let mut i = o;
    for site in (z_min..0).rev() {
        loop {
            if i == 0 {
                return Err(escape(site));
            }
            i -= 1;
            let d = v[i] - reference;
            if d >= a {
                left.push(-1i8);
                reference = reference + a;
                break;
            }
            if d <= -a {
                left.push(1i8);
                reference = reference - a;
                break;
            }
        }
    }
    left.reverse();
    left.extend(right);
    EnvironmentSample::from_signs(z_min, left, seed)
}

/// Number of lattice sites at scale `n` needed to cover `[-radius, radius]`
/// plus one cell on each side.
pub fn sites_for_radius(n: u64, radius: f64) -> i64 {
    ((radius * (n as f64).sqrt()).ceil() as i64) + 2
}
