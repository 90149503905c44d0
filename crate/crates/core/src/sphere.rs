//! Points of the Riemann sphere in homogeneous coordinates, the chordal
//! metric, and degree-exact rational maps with numerically stable
//! evaluation and derivatives.
//!
//! The chordal metric is fixed with diameter 2:
//! `sigma(p, q) = 2 |z1 w2 - z2 w1| / (|p| |q|)` for the homogeneous
//! representatives, `|p| = sqrt(|z|^2 + |w|^2)`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{DynamicsError, Result};
use crate::poly;
use crate::C64;

/// Magnitude floor below which a homogeneous image counts as degenerate.
const IMAGE_FLOOR: f64 = 1e-280;

/// A point of the Riemann sphere as a homogeneous pair `[z : w]`.
///
/// Stored canonically: `max(|z|, |w|) = 1` and the larger-modulus coordinate
/// is real non-negative, so equal projective points have equal fields up to
/// floating-point noise and admit a deterministic lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub z: C64,
    pub w: C64,
}

/// Chordal distance value in `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ChordalDistance(pub f64);

impl ChordalDistance {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which affine chart a computation runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Coordinate `u = z / w`; good where `|z| <= |w|`.
    Affine,
    /// Coordinate `u = w / z`; good near infinity.
    Inverted,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Affine => Chart::Inverted,
            Chart::Inverted => Chart::Affine,
        }
    }
}

impl SpherePoint {
    /// Build from an arbitrary homogeneous representative.
    pub fn from_homogeneous(z: C64, w: C64) -> Result<SpherePoint> {
        let nz = z.norm();
        let nw = w.norm();
        if !(nz.is_finite() && nw.is_finite()) || nz.max(nw) < IMAGE_FLOOR {
            return Err(DynamicsError::DegenerateImage);
        }
        // Scale the larger coordinate to exactly 1 on the positive real axis.
        let (mag, phase) = if nz >= nw { (nz, z / nz) } else { (nw, w / nw) };
        let s = phase * mag;
        Ok(SpherePoint { z: z / s, w: w / s })
    }

    pub fn from_affine(u: C64) -> SpherePoint {
        SpherePoint::from_homogeneous(u, C64::new(1.0, 0.0)).expect("finite affine value")
    }

    pub fn infinity() -> SpherePoint {
        SpherePoint {
            z: C64::new(1.0, 0.0),
            w: C64::new(0.0, 0.0),
        }
    }

    pub fn zero() -> SpherePoint {
        SpherePoint {
            z: C64::new(0.0, 0.0),
            w: C64::new(1.0, 0.0),
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.w.norm() == 0.0
    }

    /// Affine coordinate `z / w`, or `None` at infinity.
    pub fn to_affine(&self) -> Option<C64> {
        if self.w.norm() < IMAGE_FLOOR {
            None
        } else {
            Some(self.z / self.w)
        }
    }

    /// Natural chart at this point (the one with coordinate modulus <= 1).
    pub fn natural_chart(&self) -> Chart {
        if self.z.norm() <= self.w.norm() {
            Chart::Affine
        } else {
            Chart::Inverted
        }
    }

    /// Chart for reported quantities: affine unless the point is genuinely
    /// far out (|z/w| > 10), matching the affine convention of the orbit
    /// derivative estimates.
    pub fn reporting_chart(&self) -> Chart {
        if self.z.norm() <= 10.0 * self.w.norm() {
            Chart::Affine
        } else {
            Chart::Inverted
        }
    }

    /// Coordinate of the point in a chart. Finite in the natural chart.
    pub fn chart_value(&self, chart: Chart) -> C64 {
        match chart {
            Chart::Affine => self.z / self.w,
            Chart::Inverted => self.w / self.z,
        }
    }

    /// Rebuild a point from a chart coordinate.
    pub fn from_chart(chart: Chart, u: C64) -> SpherePoint {
        match chart {
            Chart::Affine => SpherePoint::from_homogeneous(u, C64::new(1.0, 0.0))
                .expect("finite chart coordinate"),
            Chart::Inverted => SpherePoint::from_homogeneous(C64::new(1.0, 0.0), u)
                .expect("finite chart coordinate"),
        }
    }

    /// Deterministic ordering key: (re z, im z, re w, im w) of the canonical
    /// representative.
    pub fn lex_key(&self) -> [f64; 4] {
        [self.z.re, self.z.im, self.w.re, self.w.im]
    }
}

/// Chordal distance between two points, in `[0, 2]`.
pub fn chordal(p: &SpherePoint, q: &SpherePoint) -> ChordalDistance {
    let cross = p.z * q.w - q.z * p.w;
    let np = (p.z.norm_sqr() + p.w.norm_sqr()).sqrt();
    let nq = (q.z.norm_sqr() + q.w.norm_sqr()).sqrt();
    ChordalDistance(2.0 * cross.norm() / (np * nq))
}

/// A rational map `P/Q` of exact degree `d >= 2` on the Riemann sphere.
///
/// Coefficient lists are lowest degree first and padded to length `d + 1`.
/// Exactness of the degree is certified at construction by a scale-invariant
/// resultant floor.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMap {
    num: Vec<C64>,
    den: Vec<C64>,
    degree: usize,
    /// Cached z-partial coefficient lists of the homogenised pair.
    num_dz: Vec<C64>,
    den_dz: Vec<C64>,
}

/// Relative resultant floor: `|res| >= floor_factor * (max coeff)^(2d)`.
pub const RESULTANT_FLOOR_FACTOR: f64 = 1e-10;

impl RationalMap {
    /// Construct from numerator and denominator coefficients (lowest degree
    /// first). The degree is `max(deg P, deg Q)`; both lists are padded.
    pub fn new(num: &[C64], den: &[C64]) -> Result<RationalMap> {
        let trim = |c: &[C64]| {
            let mut n = c.len();
            while n > 1 && c[n - 1].norm() == 0.0 {
                n -= 1;
            }
            n - 1
        };
        let d = trim(num).max(trim(den));
        if d < 2 {
            return Err(DynamicsError::Precondition {
                detail: format!("degree {d} < 2"),
            });
        }
        let pad = |c: &[C64]| {
            let mut v = c.to_vec();
            v.resize(d + 1, C64::new(0.0, 0.0));
            v
        };
        let num = pad(num);
        let den = pad(den);

        let scale = num
            .iter()
            .chain(den.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let res = poly::resultant(&num, &den, d).norm();
        let floor = RESULTANT_FLOOR_FACTOR * scale.powi(2 * d as i32);
        if res < floor {
            return Err(DynamicsError::DegenerateMap {
                resultant: res,
                floor,
            });
        }

        let num_dz = poly::derivative(&num);
        let den_dz = poly::derivative(&den);
        Ok(RationalMap {
            num,
            den,
            degree: d,
            num_dz,
            den_dz,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[C64] {
        &self.num
    }

    pub fn denominator(&self) -> &[C64] {
        &self.den
    }

    /// Homogeneous image pair `(P(z, w), Q(z, w))`, unnormalised.
    pub fn eval_homogeneous(&self, p: &SpherePoint) -> (C64, C64) {
        let pz = poly::eval_homogeneous(&self.num, self.degree, p.z, p.w);
        let qz = poly::eval_homogeneous(&self.den, self.degree, p.z, p.w);
        (pz, qz)
    }

    /// Apply the map: `[P(z,w) : Q(z,w)]`, renormalised.
    pub fn eval(&self, p: &SpherePoint) -> Result<SpherePoint> {
        let (pv, qv) = self.eval_homogeneous(p);
        SpherePoint::from_homogeneous(pv, qv)
    }

    /// Orbit `[p, f(p), ..., f^n(p)]` of length `n + 1`.
    pub fn iterate(&self, p: &SpherePoint, n: usize) -> Result<Vec<SpherePoint>> {
        let mut orbit = Vec::with_capacity(n + 1);
        orbit.push(*p);
        let mut cur = *p;
        for _ in 0..n {
            cur = self.eval(&cur)?;
            orbit.push(cur);
        }
        Ok(orbit)
    }

    /// All homogeneous partials at a point:
    /// `(P, Q, P_z, P_w, Q_z, Q_w)`.
    pub fn homogeneous_partials(&self, p: &SpherePoint) -> HomPartials {
        let d = self.degree;
        let (z, w) = (p.z, p.w);
        let pv = poly::eval_homogeneous(&self.num, d, z, w);
        let qv = poly::eval_homogeneous(&self.den, d, z, w);
        // d/dz of sum c_i z^i w^(d-i) = sum i c_i z^(i-1) w^(d-i):
        // the affine-derivative list homogenised at degree d-1.
        let p_z = poly::eval_homogeneous(&self.num_dz, d - 1, z, w);
        let q_z = poly::eval_homogeneous(&self.den_dz, d - 1, z, w);
        // Euler relations give the w-partials without extra lists:
        // z P_z + w P_w = d P.
        let dd = C64::new(d as f64, 0.0);
        let (p_w, q_w) = if w.norm() >= z.norm() {
            ((dd * pv - z * p_z) / w, (dd * qv - z * q_z) / w)
        } else {
            // Near infinity derive P_w from the reversed lists instead.
            let rev_n = poly::reverse(&self.num, d);
            let rev_d = poly::reverse(&self.den, d);
            let rn_dz = poly::derivative(&rev_n);
            let rd_dz = poly::derivative(&rev_d);
            // P(z,w) = P_rev(w,z) with P_rev the reversed list, so
            // P_w(z,w) = (P_rev)_z evaluated with swapped coordinates.
            let p_w = poly::eval_homogeneous(&rn_dz, d - 1, w, z);
            let q_w = poly::eval_homogeneous(&rd_dz, d - 1, w, z);
            (p_w, q_w)
        };
        HomPartials {
            p: pv,
            q: qv,
            p_z,
            p_w,
            q_z,
            q_w,
            degree: d,
            at: *p,
        }
    }

    /// Spherical derivative magnitude at `p` (with respect to the chordal
    /// metric; independent of its diameter normalisation). Zero exactly at
    /// critical points.
    pub fn spherical_derivative(&self, p: &SpherePoint) -> f64 {
        let h = self.homogeneous_partials(p);
        let wr = h.p_z * h.q_w - h.p_w * h.q_z;
        let num = (p.z.norm_sqr() + p.w.norm_sqr()) * wr.norm();
        let den = self.degree as f64 * (h.p.norm_sqr() + h.q.norm_sqr());
        num / den
    }

    /// Affine derivative `f'(z)` when both `p` and `f(p)` are finite.
    pub fn affine_derivative(&self, p: &SpherePoint) -> Option<C64> {
        let h = self.homogeneous_partials(p);
        if p.w.norm() < 1e-150 || h.q.norm() < 1e-150 {
            return None;
        }
        Some(h.chart_derivative(Chart::Affine, Chart::Affine))
    }

    /// Derivative of the map read in local charts:
    /// `d(chart_dst . f . chart_src^-1)` at the chart coordinate of `p`.
    pub fn chart_derivative(&self, p: &SpherePoint, src: Chart, dst: Chart) -> C64 {
        self.homogeneous_partials(p).chart_derivative(src, dst)
    }

    /// The conjugated coefficient pair for reading the map from chart `src`
    /// to chart `dst`. Reversal happens against the map degree.
    pub fn charted_coefficients(&self, src: Chart, dst: Chart) -> (Vec<C64>, Vec<C64>) {
        charted_pair(&self.num, &self.den, self.degree, src, dst)
    }
}

/// All first-order homogeneous data of a map at a point.
#[derive(Debug, Clone, Copy)]
pub struct HomPartials {
    pub p: C64,
    pub q: C64,
    pub p_z: C64,
    pub p_w: C64,
    pub q_z: C64,
    pub q_w: C64,
    pub degree: usize,
    pub at: SpherePoint,
}

impl HomPartials {
    /// Homogeneous Wronskian `P_z Q_w - P_w Q_z` at the point.
    pub fn wronskian(&self) -> C64 {
        self.p_z * self.q_w - self.p_w * self.q_z
    }

    /// Chart-to-chart derivative. With `W` the homogeneous Wronskian and the
    /// point `(z, w)`:
    ///
    /// affine -> affine:    w^2 W / (d Q^2)
    /// affine -> inverted: -w^2 W / (d P^2)
    /// inverted -> affine: -z^2 W / (d Q^2)
    /// inverted -> inverted: z^2 W / (d P^2)
    pub fn chart_derivative(&self, src: Chart, dst: Chart) -> C64 {
        let wr = self.wronskian();
        let d = C64::new(self.degree as f64, 0.0);
        let top = match src {
            Chart::Affine => self.at.w * self.at.w,
            Chart::Inverted => -(self.at.z * self.at.z),
        };
        let bottom = match dst {
            Chart::Affine => d * self.q * self.q,
            Chart::Inverted => -(d * self.p * self.p),
        };
        top * wr / bottom
    }
}

/// Conjugate a coefficient pair by the chart inversions: the map read from
/// chart `src` into chart `dst` is again a ratio of degree-`d` polynomials.
pub fn charted_pair(
    num: &[C64],
    den: &[C64],
    d: usize,
    src: Chart,
    dst: Chart,
) -> (Vec<C64>, Vec<C64>) {
    let (n, q): (Vec<C64>, Vec<C64>) = match src {
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


    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// f(z) = z^2 - 2
    fn basilica_tip() -> RationalMap {
        RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap()
    }

    /// f(z) = (z^2 - 2) / z^2
    fn sphere_flagship() -> RationalMap {
        RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn eval_polynomial_at_zero() {
        let f = basilica_tip();
        let img = f.eval(&SpherePoint::zero()).unwrap();
        assert!(chordal(&img, &SpherePoint::from_affine(c(-2.0, 0.0))).value() < 1e-15);
    }

    #[test]
    fn eval_at_infinity_is_leading_ratio() {
        let f = sphere_flagship();
        let img = f.eval(&SpherePoint::infinity()).unwrap();
        assert!(chordal(&img, &SpherePoint::from_affine(c(1.0, 0.0))).value() < 1e-15);
    }

    #[test]
    fn eval_pole_goes_to_infinity() {
        let f = sphere_flagship();
        let img = f.eval(&SpherePoint::zero()).unwrap();
        assert!(img.is_infinity());
    }

    #[test]
    fn iterate_exact_orbits() {
        let f = sphere_flagship();
        let orbit = f.iterate(&SpherePoint::zero(), 4).unwrap();
        let expect = [
            SpherePoint::zero(),
            SpherePoint::infinity(),
            SpherePoint::from_affine(c(1.0, 0.0)),
            SpherePoint::from_affine(c(-1.0, 0.0)),
            SpherePoint::from_affine(c(-1.0, 0.0)),
        ];
        for (a, b) in orbit.iter().zip(expect.iter()) {
            assert!(chordal(a, b).value() < 1e-14);
        }

        let g = basilica_tip();
        let orbit = g.iterate(&SpherePoint::zero(), 3).unwrap();
        let expect = [0.0, -2.0, 2.0, 2.0];
        for (a, b) in orbit.iter().zip(expect.iter()) {
            assert!(chordal(a, &SpherePoint::from_affine(c(*b, 0.0))).value() < 1e-14);
        }

        let single = g.iterate(&SpherePoint::from_affine(c(0.5, 0.5)), 0).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn chordal_reference_values() {
        let zero = SpherePoint::zero();
        let inf = SpherePoint::infinity();
        assert!((chordal(&zero, &inf).value() - 2.0).abs() < 1e-15);
        assert_eq!(chordal(&zero, &zero).value(), 0.0);
        let one = SpherePoint::from_affine(c(1.0, 0.0));
        let minus = SpherePoint::from_affine(c(-1.0, 0.0));
        assert!((chordal(&one, &minus).value() - 2.0).abs() < 1e-15);
        // chordal(0, 2) = 4 / sqrt(5)
        let two = SpherePoint::from_affine(c(2.0, 0.0));
        assert!((chordal(&zero, &two).value() - 4.0 / 5.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn affine_derivatives() {
        let f = basilica_tip();
        let d = f
            .affine_derivative(&SpherePoint::from_affine(c(2.0, 0.0)))
            .unwrap();
        assert!((d - c(4.0, 0.0)).norm() < 1e-13);

        let g = sphere_flagship();
        let d = g
            .affine_derivative(&SpherePoint::from_affine(c(-1.0, 0.0)))
            .unwrap();
        assert!((d - c(-4.0, 0.0)).norm() < 1e-13);

        let sq = RationalMap::new(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let d = sq.affine_derivative(&SpherePoint::zero()).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn spherical_derivative_matches_affine_formula() {
        let f = basilica_tip();
        for &x in &[0.3, -1.7, 2.0, 0.9] {
            let p = SpherePoint::from_affine(c(x, 0.1));
            let fp = f.eval(&p).unwrap().to_affine().unwrap();
            let z = p.to_affine().unwrap();
            let expect = (2.0 * z).norm() * (1.0 + z.norm_sqr()) / (1.0 + fp.norm_sqr());
            let got = f.spherical_derivative(&p);
            assert!((got - expect).abs() < 1e-12 * expect.max(1.0), "{got} {expect}");
        }
    }

    #[test]
    fn chart_derivative_matches_finite_differences() {
        let f = sphere_flagship();
        // A point near infinity: source chart inverted, image near 1: affine.
        let p = SpherePoint::from_homogeneous(c(1.0, 0.0), c(1e-3, 2e-4)).unwrap();
        let h = 1e-7;
        let u0 = p.chart_value(Chart::Inverted);
        let val = |u: C64| {
            f.eval(&SpherePoint::from_chart(Chart::Inverted, u))
                .unwrap()
                .chart_value(Chart::Affine)
        };
        let fd = (val(u0 + c(h, 0.0)) - val(u0 - c(h, 0.0))) / c(2.0 * h, 0.0);
        let an = f.chart_derivative(&p, Chart::Inverted, Chart::Affine);
        assert!((fd - an).norm() < 1e-6 * an.norm().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn eval_is_projective() {
        let f = sphere_flagship();
        let p = SpherePoint::from_affine(c(0.7, -0.2));
        let scaled = SpherePoint::from_homogeneous(p.z * c(3.0, 4.0), p.w * c(3.0, 4.0)).unwrap();
        let a = f.eval(&p).unwrap();
        let b = f.eval(&scaled).unwrap();
        assert!(chordal(&a, &b).value() < 1e-14);
    }

    #[test]
    fn degenerate_pair_rejected() {
        // (z^2 - 1) / (z - 1)(z + 2) shares the root 1.
        let num = [c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let den = [c(-2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            RationalMap::new(&num, &den),
            Err(DynamicsError::DegenerateMap { .. })
        ));
    }

    #[test]
    fn degree_one_rejected() {
        let num = [c(0.0, 0.0), c(1.0, 0.0)];
        let den = [c(1.0, 0.0)];
        assert!(RationalMap::new(&num, &den).is_err());
    }
}
