//! Deterministic low-discrepancy sampling.
//!
//! Everything downstream (direction sweeps, neighbourhood grids, pair
//! sampling) draws from these fixed sequences, so repeated runs with the
//! same inputs are bit-identical.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::sphere::{Chart, SpherePoint};
use crate::C64;

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// The `i`-th element of the van der Corput sequence in the given base.
pub fn van_der_corput(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton point in `dim` dimensions (unit cube), index starting at 1.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| van_der_corput(index, PRIMES[k % PRIMES.len()]))
        .collect()
}

/// Deterministic unit directions on the sphere of `C^m`, via Halton points
/// pushed through the Box-Muller map and normalised.
pub fn unit_directions(m: usize, count: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    for idx in 1..=count {
        let u = halton(idx, 2 * m);
        let mut v = Vec::with_capacity(m);
        let mut norm_sq = 0.0;
        for k in 0..m {
            let r = (-2.0 * (1.0 - u[2 * k]).max(1e-12).ln()).sqrt();
            let th = core::f64::consts::TAU * u[2 * k + 1];
            let g = C64::new(r * th.cos(), r * th.sin());
            norm_sq += g.norm_sqr();
            v.push(g);
        }
        let n = norm_sq.sqrt().max(1e-300);
        for g in v.iter_mut() {
            *g /= n;
        }
        out.push(v);
    }
    out
}

/// Deterministic points of the closed unit disk (area-uniform Halton).
pub fn unit_disk(count: usize) -> Vec<C64> {
    (1..=count)
        .map(|i| {
            let u = halton(i, 2);
            let r = u[0].sqrt();
            let th = core::f64::consts::TAU * u[1];
            C64::new(r * th.cos(), r * th.sin())
        })
        .collect()
}

/// `count` points evenly spaced on the unit circle with a fixed offset.
pub fn unit_circle(count: usize) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let th = core::f64::consts::TAU * (k as f64 + 0.354) / count as f64;
            C64::new(th.cos(), th.sin())
        })
        .collect()
}

/// Sample points of the chordal cap of radius `radius` around `center`.
///
/// Points are generated in the natural chart of the center, where a chordal
/// ball is a disk up to second order; the cap is slightly oversampled rather
/// than exact, which is the safe direction for neighbourhood checks.
pub fn chordal_cap(center: &SpherePoint, radius: f64, count: usize) -> Vec<SpherePoint> {
    let chart = center.natural_chart();
    let u0 = center.chart_value(chart);
    // chordal(u0, u0 + du) ~ 2 |du| / (1 + |u0|^2)
    let affine_radius = radius * (1.0 + u0.norm_sqr()) / 2.0;
    unit_disk(count)
        .into_iter()
        .map(|d| SpherePoint::from_chart(chart, u0 + d * affine_radius))
        .collect()
}

/// Square grid over a complex disk: `side x side` points covering the
/// bounding square, restricted to the disk, plus `side` boundary points.
pub fn disk_grid(center: C64, radius: f64, side: usize) -> Vec<C64> {
    let mut pts = Vec::with_capacity(side * side + 4 * side);
    for iy in 0..side {
        for ix in 0..side {
            let x = -1.0 + 2.0 * (ix as f64 + 0.5) / side as f64;
            let y = -1.0 + 2.0 * (iy as f64 + 0.5) / side as f64;
            if x * x + y * y <= 1.0 {
                pts.push(center + C64::new(x * radius, y * radius));
            }
        }
    }
    for k in 0..(4 * side) {
        let th = core::f64::consts::TAU * k as f64 / (4 * side) as f64;
        pts.push(center + C64::new(radius * th.cos(), radius * th.sin()));
    }
    pts
}

/// The chart used by [`chordal_cap`] for a given center.
pub fn cap_chart(center: &SpherePoint) -> Chart {
    center.natural_chart()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::chordal;

    #[test]
    fn van_der_corput_base2_prefix() {
        let seq: Vec<f64> = (1..=4).map(|i| van_der_corput(i, 2)).collect();
        assert_eq!(seq, [0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn directions_are_unit() {
        for v in unit_directions(3, 64) {
            let n: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn caps_stay_near_center() {
        let center = SpherePoint::from_affine(C64::new(2.0, 0.0));
        for p in chordal_cap(&center, 0.1, 200) {
            assert!(chordal(&center, &p).value() < 0.2);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        assert_eq!(unit_directions(2, 16), unit_directions(2, 16));
        assert_eq!(unit_disk(16), unit_disk(16));
    }
}
