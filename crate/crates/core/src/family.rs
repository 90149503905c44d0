//! Coefficient-perturbation families of rational maps.
//!
//! A family is a base map plus `m` coefficient-delta directions; the
//! parameter `a` lives in a ball of `C^m`. [`FamilyAt`] freezes the family
//! at one parameter and exposes the map together with chart-to-chart
//! evaluation, the space derivative, and the per-direction parameter
//! derivatives used by the orbit recursions.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::critical::{self, CriticalLabeling};
use crate::error::{DynamicsError, Result};
use crate::poly;
use crate::sampling;
use crate::sphere::{charted_pair, Chart, RationalMap, SpherePoint};
use crate::C64;

/// A parameterised family `f_a`, `a` in the ball of radius `r` in `C^m`.
#[derive(Debug, Clone)]
pub struct ParameterFamily {
    base: RationalMap,
    /// Per-direction numerator/denominator coefficient deltas, padded to d+1.
    directions: Vec<(Vec<C64>, Vec<C64>)>,
    radius: f64,
}

impl ParameterFamily {
    /// Build and validate a family. Every direction is padded to the base
    /// degree; validity of the maps on the sphere `|a| = r` is checked on a
    /// deterministic direction sample.
    pub fn new(
        base: RationalMap,
        directions: &[(Vec<C64>, Vec<C64>)],
        radius: f64,
    ) -> Result<ParameterFamily> {
        let d = base.degree();
        let m = directions.len();
        if m == 0 || m > 2 * d - 2 {
            return Err(DynamicsError::Precondition {
                detail: format!("family dimension {m} outside 1..={}", 2 * d - 2),
            });
        }
        if !(radius > 0.0) {
            return Err(DynamicsError::Precondition {
                detail: "family radius must be positive".into(),
            });
        }
        let pad = |c: &[C64]| {
            let mut v = c.to_vec();
            v.resize(d + 1, C64::new(0.0, 0.0));
            v
        };
        let directions: Vec<(Vec<C64>, Vec<C64>)> = directions
            .iter()
            .map(|(n, q)| (pad(n), pad(q)))
            .collect();
        let fam = ParameterFamily {
            base,
            directions,
            radius,
        };
        // Degree must not drop anywhere on the closed ball boundary sample.
        for v in sampling::unit_directions(m, 8 + 4 * m) {
            let a: Vec<C64> = v.iter().map(|x| x * radius).collect();
            fam.map_at(&a)?;
        }
        Ok(fam)
    }

    pub fn base(&self) -> &RationalMap {
        &self.base
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    pub fn directions(&self) -> &[(Vec<C64>, Vec<C64>)] {
        &self.directions
    }

    /// Coefficient lists at a parameter.
    pub fn coefficients_at(&self, a: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let mut num = self.base.numerator().to_vec();
        let mut den = self.base.denominator().to_vec();
        for (ai, (dn, dd)) in a.iter().zip(self.directions.iter()) {
            for (c, d) in num.iter_mut().zip(dn.iter()) {
                *c += ai * d;
            }
            for (c, d) in den.iter_mut().zip(dd.iter()) {
                *c += ai * d;
            }
        }
        (num, den)
    }

    /// The validated map at a parameter inside the ball.
    pub fn map_at(&self, a: &[C64]) -> Result<RationalMap> {
        if a.len() != self.dimension() {
            return Err(DynamicsError::Precondition {
                detail: format!("parameter has {} coordinates, family has {}", a.len(), self.dimension()),
            });
        }
        let norm = param_norm(a);
        if norm > self.radius * (1.0 + 1e-12) {
            return Err(DynamicsError::Precondition {
                detail: format!("|a| = {norm:.3e} outside family radius {:.3e}", self.radius),
            });
        }
        let (num, den) = self.coefficients_at(a);
        RationalMap::new(&num, &den)
    }

    /// Freeze the family at `a`, with all four chart combinations prepared.
    pub fn at(&self, a: &[C64]) -> Result<FamilyAt> {
        let map = self.map_at(a)?;
        let d = map.degree();
        let (num, den) = (map.numerator().to_vec(), map.denominator().to_vec());
        let combos = [
            (Chart::Affine, Chart::Affine),
            (Chart::Affine, Chart::Inverted),
            (Chart::Inverted, Chart::Affine),
            (Chart::Inverted, Chart::Inverted),
        ];
        let charted = combos.map(|(src, dst)| {
            let (n, q) = charted_pair(&num, &den, d, src, dst);
            let deltas: Vec<(Vec<C64>, Vec<C64>)> = self
                .directions
                .iter()
                .map(|(dn, dd)| charted_pair(dn, dd, d, src, dst))
                .collect();
            ChartedMapAt::new(n, q, deltas)
        });
        Ok(FamilyAt {
            a: a.to_vec(),
            map,
            charted,
        })
    }
}

/// Euclidean norm of a parameter point.
pub fn param_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// One chart-to-chart reading of the frozen map: a rational function
/// `N(u)/D(u)` with per-direction coefficient deltas.
#[derive(Debug, Clone)]
pub struct ChartedMapAt {
    num: Vec<C64>,
    den: Vec<C64>,
    num_dz: Vec<C64>,
    den_dz: Vec<C64>,
    deltas: Vec<(Vec<C64>, Vec<C64>)>,
}

impl ChartedMapAt {
    fn new(num: Vec<C64>, den: Vec<C64>, deltas: Vec<(Vec<C64>, Vec<C64>)>) -> ChartedMapAt {
        let num_dz = poly::derivative(&num);
        let den_dz = poly::derivative(&den);
        ChartedMapAt {
            num,
            den,
            num_dz,
            den_dz,
            deltas,
        }
    }

    /// `(N(u), D(u))`.
    pub fn eval_pair(&self, u: C64) -> (C64, C64) {
        (poly::eval(&self.num, u), poly::eval(&self.den, u))
    }

    /// Map value in the destination chart.
    pub fn value(&self, u: C64) -> C64 {
        let (n, d) = self.eval_pair(u);
        n / d
    }

    /// Space derivative `d(value)/du`.
    pub fn dz(&self, u: C64) -> C64 {
        let (n, d) = self.eval_pair(u);
        let np = poly::eval(&self.num_dz, u);
        let dp = poly::eval(&self.den_dz, u);
        (np * d - n * dp) / (d * d)
    }

    /// Parameter derivatives `d(value)/da_i` for all directions.
    pub fn da(&self, u: C64) -> Vec<C64> {
        let (n, d) = self.eval_pair(u);
        let dd = d * d;
        self.deltas
            .iter()
            .map(|(dn, dq)| {
                let a = poly::eval(dn, u);
                let b = poly::eval(dq, u);
                (a * d - n * b) / dd
            })
            .collect()
    }

    /// Coefficients of the chart-local critical polynomial `N'D - ND'` and
    /// its per-direction parameter derivatives.
    pub fn critical_polynomial(&self) -> (Vec<C64>, Vec<Vec<C64>>) {
        let w = poly::sub(
            &poly::mul(&self.num_dz, &self.den),
            &poly::mul(&self.num, &self.den_dz),
        );
        let dw = self
            .deltas
            .iter()
            .map(|(dn, dq)| {
                // Product rule on N'D - ND' with N -> N + a dN.
                let t1 = poly::mul(&poly::derivative(dn), &self.den);
                let t2 = poly::mul(&self.num_dz, dq);
                let t3 = poly::mul(dn, &self.den_dz);
                let t4 = poly::mul(&self.num, &poly::derivative(dq));
                poly::sub(&poly::sub(&t1, &t3), &poly::sub(&t4, &t2))
            })
            .collect();
        (w, dw)
    }
}

/// The family frozen at one parameter.
#[derive(Debug, Clone)]
pub struct FamilyAt {
    pub a: Vec<C64>,
    pub map: RationalMap,
    charted: [ChartedMapAt; 4],
}

impl FamilyAt {
    pub fn charted(&self, src: Chart, dst: Chart) -> &ChartedMapAt {
        let idx = match (src, dst) {
            (Chart::Affine, Chart::Affine) => 0,
            (Chart::Affine, Chart::Inverted) => 1,
            (Chart::Inverted, Chart::Affine) => 2,
            (Chart::Inverted, Chart::Inverted) => 3,
        };
        &self.charted[idx]
    }

    /// Gradient `dc/da` of a simple critical point, in the given chart, via
    /// implicit differentiation of the chart-local critical polynomial.
    pub fn critical_gradient(&self, location: &SpherePoint, chart: Chart) -> Result<Vec<C64>> {
        let cm = self.charted(chart, chart);
        let (w, dw) = cm.critical_polynomial();
        let u = location.chart_value(chart);
        let wp = poly::eval(&poly::derivative(&w), u);
        if wp.norm() < 1e-300 {
            return Err(DynamicsError::Precondition {
                detail: "critical point not simple: W'(c) = 0".into(),
            });
        }
        Ok(dw.iter().map(|dwi| -poly::eval(dwi, u) / wp).collect())
    }
}

/// Critical labels at `a`, matched against a base labeling; bisects the
/// segment `0 -> a` when a single jump is ambiguous.
pub fn labeled_map_at(
    family: &ParameterFamily,
    base: &CriticalLabeling,
    a: &[C64],
) -> Result<CriticalLabeling> {
    fn step(
        family: &ParameterFamily,
        from_lab: &CriticalLabeling,
        from: &[C64],
        to: &[C64],
        depth: usize,
    ) -> Result<CriticalLabeling> {
        let map = family.map_at(to)?;
        let lab = critical::critical_points(&map)?;
        match critical::match_labels(from_lab, &lab) {
            Ok(matched) => Ok(matched),
            Err(DynamicsError::AmbiguousMatching { .. }) if depth < 24 => {
                let mid: Vec<C64> = from
                    .iter()
                    .zip(to.iter())
                    .map(|(x, y)| (x + y) / 2.0)
                    .collect();
                let half = step(family, from_lab, from, &mid, depth + 1)?;
                step(family, &half, &mid, to, depth + 1)
            }
            Err(e) => Err(e),
        }
    }
    let zero = vec![C64::new(0.0, 0.0); family.dimension()];
    step(family, base, &zero, a, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::chordal;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// z^2 + c around c = -2: base z^2 - 2, one constant-term direction.
    pub fn quadratic_slice() -> ParameterFamily {
        let base =
            RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        ParameterFamily::new(base, &[(vec![c(1.0, 0.0)], vec![])], 0.5).unwrap()
    }

    #[test]
    fn map_at_zero_is_base() {
        let fam = quadratic_slice();
        let m = fam.map_at(&[c(0.0, 0.0)]).unwrap();
        assert_eq!(m.numerator(), fam.base().numerator());
        assert_eq!(m.denominator(), fam.base().denominator());
    }

    #[test]
    fn map_at_shifts_constant_term() {
        let base =
            RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let fam = ParameterFamily::new(base, &[(vec![c(1.0, 0.0)], vec![])], 1.5).unwrap();
        // a = -1: z^2 - 3.
        let m = fam.map_at(&[c(-1.0, 0.0)]).unwrap();
        assert_eq!(m.numerator()[0], c(-3.0, 0.0));
    }

    #[test]
    fn map_outside_radius_rejected() {
        let fam = quadratic_slice();
        assert!(matches!(
            fam.map_at(&[c(1.0, 0.0)]),
            Err(DynamicsError::Precondition { .. })
        ));
    }

    #[test]
    fn charted_values_match_direct_eval() {
        let base = RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let fam = ParameterFamily::new(
            base,
            &[(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]), (vec![], vec![c(1.0, 0.0)])],
            0.1,
        )
        .unwrap();
        let a = [c(0.02, 0.01), c(-0.015, 0.005)];
        let at = fam.at(&a).unwrap();
        let p = SpherePoint::from_affine(c(0.4, -0.3));
        let image = at.map.eval(&p).unwrap();
        for (src, u) in [(Chart::Affine, p.chart_value(Chart::Affine))] {
            for dst in [Chart::Affine, Chart::Inverted] {
                let got = at.charted(src, dst).value(u);
                let expect = image.chart_value(dst);
                assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
            }
        }
    }

    #[test]
    fn charted_da_matches_finite_differences() {
        let base = RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let fam = ParameterFamily::new(
            base,
            &[(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]), (vec![], vec![c(1.0, 0.0)])],
            0.1,
        )
        .unwrap();
        let a = [c(0.02, 0.01), c(-0.015, 0.005)];
        let u = c(0.4, -0.3);
        let h = 1e-6;
        let at = fam.at(&a).unwrap();
        let grads = at.charted(Chart::Affine, Chart::Affine).da(u);
        for i in 0..2 {
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            ap[i] += c(h, 0.0);
            am[i] -= c(h, 0.0);
            let vp = fam.at(&ap).unwrap().charted(Chart::Affine, Chart::Affine).value(u);
            let vm = fam.at(&am).unwrap().charted(Chart::Affine, Chart::Affine).value(u);
            let fd = (vp - vm) / c(2.0 * h, 0.0);
            assert!((fd - grads[i]).norm() < 1e-8, "dir {i}: {fd} vs {}", grads[i]);
        }
    }

    #[test]
    fn critical_gradient_matches_finite_differences() {
        // Perturbed sphere map: label near 0 moves with a.
        let base = RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let fam = ParameterFamily::new(
            base,
            &[(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]), (vec![], vec![c(1.0, 0.0)])],
            0.1,
        )
        .unwrap();
        let base_lab = critical::critical_points(fam.base()).unwrap();
        let a = [c(0.03, 0.01), c(0.02, -0.01)];
        let lab = labeled_map_at(&fam, &base_lab, &a).unwrap();
        let at = fam.at(&a).unwrap();

        // Pick the label that stays near 0 (affine chart).
        let (jdx, pt) = lab
            .points
            .iter()
            .map(|p| (p.label, p.location))
            .find(|(_, loc)| loc.natural_chart() == Chart::Affine)
            .unwrap();
        let grad = at.critical_gradient(&pt, Chart::Affine).unwrap();

        let h = 1e-6;
        for i in 0..2 {
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            ap[i] += c(h, 0.0);
            am[i] -= c(h, 0.0);
            let lp = labeled_map_at(&fam, &base_lab, &ap).unwrap().points[jdx]
                .location
                .chart_value(Chart::Affine);
            let lm = labeled_map_at(&fam, &base_lab, &am).unwrap().points[jdx]
                .location
                .chart_value(Chart::Affine);
            let fd = (lp - lm) / c(2.0 * h, 0.0);
            assert!((fd - grad[i]).norm() < 1e-6, "dir {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn label_path_independence_at_small_steps() {
        let fam = quadratic_slice();
        let base_lab = critical::critical_points(fam.base()).unwrap();
        let a = [c(0.01, 0.005)];
        let one = labeled_map_at(&fam, &base_lab, &a).unwrap();
        // Two-step path through the midpoint.
        let mid = [c(0.005, 0.0025)];
        let half = labeled_map_at(&fam, &base_lab, &mid).unwrap();
        let map_a = fam.map_at(&a).unwrap();
        let lab_a = critical::critical_points(&map_a).unwrap();
        let two = critical::match_labels(&half, &lab_a).unwrap();
        for (p, q) in one.points.iter().zip(two.points.iter()) {
            assert_eq!(p.label, q.label);
            assert!(chordal(&p.location, &q.location).value() < 1e-12);
        }
    }
}
