//! Double-double arithmetic (~106-bit significand) for certificate
//! verification, with just enough complex and rational-map machinery to
//! re-run critical orbits and polish closing solutions far below the
//! binary64 noise floor.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::poly::{self, Ring};
use crate::sphere::{Chart, SpherePoint};
use crate::C64;

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = Float::mul_add(a, b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One dd Newton step from the f64 root: x + (a - x^2) / (2x).
        let x = Dd::from_f64(self.hi.sqrt());
        let diff = self - x * x;
        x + diff / (Dd::from_f64(2.0) * x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let e = e + self.lo + rhs.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ddc {
    pub re: Dd,
    pub im: Dd,
}

impl Ddc {
    pub const ZERO: Ddc = Ddc {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: Ddc = Ddc {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    pub fn from_c64(x: C64) -> Ddc {
        Ddc {
            re: Dd::from_f64(x.re),
            im: Dd::from_f64(x.im),
        }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Ddc {
        Ddc {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> Dd {
        self.norm_sqr().sqrt()
    }
}

impl Add for Ddc {
    type Output = Ddc;
    fn add(self, rhs: Ddc) -> Ddc {
        Ddc {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for Ddc {
    type Output = Ddc;
    fn sub(self, rhs: Ddc) -> Ddc {
        Ddc {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Neg for Ddc {
    type Output = Ddc;
    fn neg(self) -> Ddc {
        Ddc {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for Ddc {
    type Output = Ddc;
    fn mul(self, rhs: Ddc) -> Ddc {
        Ddc {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl Div for Ddc {
    type Output = Ddc;
    fn div(self, rhs: Ddc) -> Ddc {
        let d = rhs.norm_sqr();
        let n = self * rhs.conj();
        Ddc {
            re: n.re / d,
            im: n.im / d,
        }
    }
}

impl Ring for Ddc {
    fn zero() -> Self {
        Ddc::ZERO
    }
    fn from_usize(n: usize) -> Self {
        Ddc {
            re: Dd::from_f64(n as f64),
            im: Dd::ZERO,
        }
    }
}

/// A sphere point in double-double homogeneous coordinates, normalised so
/// the larger coordinate has modulus 1.
#[derive(Debug, Clone, Copy)]
pub struct DdPoint {
    pub z: Ddc,
    pub w: Ddc,
}

impl DdPoint {
    pub fn from_sphere(p: &SpherePoint) -> DdPoint {
        DdPoint {
            z: Ddc::from_c64(p.z),
            w: Ddc::from_c64(p.w),
        }
    }

    pub fn normalize(z: Ddc, w: Ddc) -> DdPoint {
        let nz = z.norm_sqr();
        let nw = w.norm_sqr();
        let s = if nz.to_f64() >= nw.to_f64() { z } else { w };
        DdPoint { z: z / s, w: w / s }
    }

    pub fn natural_chart(&self) -> Chart {
        if self.z.norm_sqr().to_f64() <= self.w.norm_sqr().to_f64() {
            Chart::Affine
        } else {
            Chart::Inverted
        }
    }

    pub fn chart_value(&self, chart: Chart) -> Ddc {
        match chart {
            Chart::Affine => self.z / self.w,
            Chart::Inverted => self.w / self.z,
        }
    }

    pub fn from_chart(chart: Chart, u: Ddc) -> DdPoint {
        match chart {
            Chart::Affine => DdPoint::normalize(u, Ddc::ONE),
            Chart::Inverted => DdPoint::normalize(Ddc::ONE, u),
        }
    }

    pub fn to_sphere(&self) -> SpherePoint {
        SpherePoint::from_homogeneous(self.z.to_c64(), self.w.to_c64())
            .expect("normalised dd point")
    }
}

/// Chordal distance between dd points (diameter 2).
pub fn chordal_dd(p: &DdPoint, q: &DdPoint) -> Dd {
    let cross = p.z * q.w - q.z * p.w;
    let np = (p.z.norm_sqr() + p.w.norm_sqr()).sqrt();
    let nq = (q.z.norm_sqr() + q.w.norm_sqr()).sqrt();
    Dd::from_f64(2.0) * cross.norm() / (np * nq)
}

/// A rational map with double-double coefficients.
#[derive(Debug, Clone)]
pub struct DdMap {
    pub num: Vec<Ddc>,
    pub den: Vec<Ddc>,
    pub degree: usize,
}

impl DdMap {
    /// Exact conversion of f64 coefficient lists.
    pub fn from_c64(num: &[C64], den: &[C64], degree: usize) -> DdMap {
        DdMap {
            num: num.iter().map(|&c| Ddc::from_c64(c)).collect(),
            den: den.iter().map(|&c| Ddc::from_c64(c)).collect(),
            degree,
        }
    }

    /// Family coefficients at a dd parameter point.
    pub fn from_family(family: &crate::family::ParameterFamily, a: &[Ddc]) -> DdMap {
        let d = family.degree();
        let mut num: Vec<Ddc> = family
            .base()
            .numerator()
            .iter()
            .map(|&c| Ddc::from_c64(c))
            .collect();
        let mut den: Vec<Ddc> = family
            .base()
            .denominator()
            .iter()
            .map(|&c| Ddc::from_c64(c))
            .collect();
        for (ai, (dn, dq)) in a.iter().zip(family.directions().iter()) {
            for (c, delta) in num.iter_mut().zip(dn.iter()) {
                *c = *c + *ai * Ddc::from_c64(*delta);
            }
            for (c, delta) in den.iter_mut().zip(dq.iter()) {
                *c = *c + *ai * Ddc::from_c64(*delta);
            }
        }
        DdMap {
            num,
            den,
            degree: d,
        }
    }

    pub fn eval(&self, p: &DdPoint) -> DdPoint {
        let pv = poly::eval_homogeneous(&self.num, self.degree, p.z, p.w);
        let qv = poly::eval_homogeneous(&self.den, self.degree, p.z, p.w);
        DdPoint::normalize(pv, qv)
    }

    pub fn iterate(&self, p: &DdPoint, n: usize) -> Vec<DdPoint> {
        let mut orbit = Vec::with_capacity(n + 1);
        orbit.push(*p);
        let mut cur = *p;
        for _ in 0..n {
            cur = self.eval(&cur);
            orbit.push(cur);
        }
        orbit
    }

    /// The map read from chart `src` into chart `dst`, as dd lists.
    pub fn charted(&self, src: Chart, dst: Chart) -> (Vec<Ddc>, Vec<Ddc>) {
        charted_pair_dd(&self.num, &self.den, self.degree, src, dst)
    }

    /// Chart-to-chart derivative at a point, mirroring the f64 formulas.
    pub fn chart_derivative(&self, p: &DdPoint, src: Chart, dst: Chart) -> Ddc {
        let (n, q) = self.charted(src, dst);
        let u = p.chart_value(src);
        let nd = poly::derivative(&n);
        let qd = poly::derivative(&q);
        let nv = poly::eval(&n, u);
        let qv = poly::eval(&q, u);
        let npv = poly::eval(&nd, u);
        let qpv = poly::eval(&qd, u);
        (npv * qv - nv * qpv) / (qv * qv)
    }

    /// Multiplier of the period-`p` cycle through `points[0]`, as the closed
    /// chart-chain product.
    pub fn cycle_multiplier(&self, points: &[DdPoint]) -> Ddc {
        let p = points.len();
        let start = points[0].natural_chart();
        let mut mult = Ddc::ONE;
        for i in 0..p {
            let src = if i == 0 {
                start
            } else {
                points[i].natural_chart()
            };
            let dst = if i + 1 == p {
                start
            } else {
                points[i + 1].natural_chart()
            };
            mult = mult * self.chart_derivative(&points[i], src, dst);
        }
        mult
    }

    /// Newton-polish a simple critical point from an f64 seed, in the
    /// seed's natural chart, down to dd precision.
    pub fn polish_critical(&self, seed: &SpherePoint) -> DdPoint {
        let chart = seed.natural_chart();
        let (n, q) = self.charted(chart, chart);
        let nd = poly::derivative(&n);
        let qd = poly::derivative(&q);
        // Chart-local critical polynomial N'D - ND'.
        let w = poly::sub(&poly::mul(&nd, &q), &poly::mul(&n, &qd));
        let wd = poly::derivative(&w);
        let mut u = Ddc::from_c64(seed.chart_value(chart));
        for _ in 0..8 {
            let f = poly::eval(&w, u);
            let fp = poly::eval(&wd, u);
            if fp.norm_sqr().to_f64() == 0.0 {
                break;
            }
            let step = f / fp;
            u = u - step;
            if step.norm_sqr().to_f64() < 1e-70 {
                break;
            }
        }
        DdPoint::from_chart(chart, u)
    }
}

fn charted_pair_dd(
    num: &[Ddc],
    den: &[Ddc],
    d: usize,
    src: Chart,
    dst: Chart,
) -> (Vec<Ddc>, Vec<Ddc>) {
    let (n, q): (Vec<Ddc>, Vec<Ddc>) = match src {
        Chart::Affine => (num.to_vec(), den.to_vec()),
        Chart::Inverted => (poly::reverse(num, d), poly::reverse(den, d)),
    };
    match dst {
        Chart::Affine => (n, q),
        Chart::Inverted => (q, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_addition_keeps_small_terms() {
        let big = Dd::from_f64(1.0);
        let tiny = Dd::from_f64(1e-25);
        let sum = big + tiny;
        let back = sum - big;
        assert_eq!(back.to_f64(), 1e-25);
    }

    #[test]
    fn dd_sqrt_squares_back() {
        let two = Dd::from_f64(2.0);
        let r = two.sqrt();
        let err = (r * r - two).abs();
        assert!(err.to_f64() < 1e-30, "{}", err.to_f64());
    }

    #[test]
    fn dd_division_identity() {
        let a = Dd::from_f64(3.0) / Dd::from_f64(7.0);
        let back = a * Dd::from_f64(7.0) - Dd::from_f64(3.0);
        assert!(back.abs().to_f64() < 1e-31);
    }

    #[test]
    fn ddc_multiplication_matches_c64_at_f64_scale() {
        let a = Ddc::from_c64(C64::new(1.25, -0.5));
        let b = Ddc::from_c64(C64::new(-0.75, 2.0));
        let p = (a * b).to_c64();
        let q = C64::new(1.25, -0.5) * C64::new(-0.75, 2.0);
        assert!((p - q).norm() < 1e-15);
    }

    #[test]
    fn dd_orbit_tracks_exact_integers() {
        // z^2 - 2 from 0: orbit 0, -2, 2, 2, ... exactly.
        let map = DdMap::from_c64(
            &[C64::new(-2.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            2,
        );
        let orbit = map.iterate(&DdPoint::from_sphere(&SpherePoint::zero()), 5);
        let two = DdPoint::from_chart(Chart::Affine, Ddc::from_c64(C64::new(2.0, 0.0)));
        for p in orbit.iter().skip(2) {
            assert!(chordal_dd(p, &two).to_f64() < 1e-30);
        }
    }

    #[test]
    fn dd_multiplier_of_fixed_point() {
        let map = DdMap::from_c64(
            &[C64::new(-2.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            2,
        );
        let p = DdPoint::from_chart(Chart::Affine, Ddc::from_c64(C64::new(2.0, 0.0)));
        let m = map.cycle_multiplier(&[p]).to_c64();
        assert!((m - C64::new(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn polish_critical_point_of_perturbed_quadratic() {
        // Critical point of z^2 + a z - 2 over z^2: the large root of
        // -a z^2 + 4 z + ... stays polishable from the f64 estimate.
        let a = C64::new(0.01, 0.005);
        let num = [C64::new(-2.0, 0.0), a, C64::new(1.0, 0.0)];
        let den = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let map_f64 = crate::sphere::RationalMap::new(&num, &den).unwrap();
        let lab = crate::critical::critical_points(&map_f64).unwrap();
        let map_dd = DdMap::from_c64(&num, &den, 2);
        for cp in &lab.points {
            let polished = map_dd.polish_critical(&cp.location);
            // Residual of the chart-local critical polynomial at dd scale.
            let chart = cp.location.natural_chart();
            let (n, q) = map_dd.charted(chart, chart);
            let w = poly::sub(
                &poly::mul(&poly::derivative(&n), &q),
                &poly::mul(&n, &poly::derivative(&q)),
            );
            let res = poly::eval(&w, polished.chart_value(chart)).norm();
            assert!(res.to_f64() < 1e-28, "{}", res.to_f64());
        }
    }
}
