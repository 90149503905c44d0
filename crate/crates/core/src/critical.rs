//! Critical points and values, stable labels across parameter
//! perturbations, and repair into the simple-critical-point regime.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DynamicsError, Result};
use crate::family::ParameterFamily;
use crate::poly;
use crate::sampling;
use crate::sphere::{chordal, RationalMap, SpherePoint};
use crate::C64;

/// Chordal radius inside which Wronskian roots are clustered into one
/// critical point of higher multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-7;

/// A critical point with its multiplicity and stable label.
#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    pub location: SpherePoint,
    pub multiplicity: usize,
    pub label: usize,
}

/// All critical points of a map in label order.
#[derive(Debug, Clone)]
pub struct CriticalLabeling {
    pub points: Vec<CriticalPoint>,
    /// Minimum pairwise chordal distance between distinct critical points.
    pub separation: f64,
}

impl CriticalLabeling {
    pub fn all_simple(&self) -> bool {
        self.points.iter().all(|p| p.multiplicity == 1)
    }

    pub fn locations(&self) -> Vec<SpherePoint> {
        self.points.iter().map(|p| p.location).collect()
    }
}

/// Affine coefficient list of the Wronskian `P'Q - PQ'`, length `2d - 1`.
///
/// The top (degree `2d - 1`) coefficient cancels exactly; critical points at
/// infinity show up as a further drop of the effective degree.
pub fn wronskian_coefficients(num: &[C64], den: &[C64]) -> Vec<C64> {
    let dn = poly::derivative(num);
    let dd = poly::derivative(den);
    let mut w = poly::sub(&poly::mul(&dn, den), &poly::mul(num, &dd));
    let target = num.len().max(den.len()) * 2 - 3; // 2d - 1 entries
    w.resize(target.max(1), C64::new(0.0, 0.0));
    w
}

/// Locate all critical points of a map with multiplicities.
///
/// Deterministic ordering: multiplicity descending, then lexicographic on
/// the canonical homogeneous coordinates.
pub fn critical_points(map: &RationalMap) -> Result<CriticalLabeling> {
    let d = map.degree();
    let w = wronskian_coefficients(map.numerator(), map.denominator());
    let (eff_deg, at_infinity) = poly::effective_degree(&w, 1e-13);

    let mut roots: Vec<SpherePoint> = Vec::new();
    if eff_deg > 0 {
        let trimmed = &w[..=eff_deg];
        let finite = poly::aberth_roots(trimmed, poly::AberthOptions::default())?;
        roots.extend(finite.into_iter().map(SpherePoint::from_affine));
    } else if w[0].norm() > 0.0 && at_infinity == 0 {
        // Constant nonzero Wronskian cannot happen for a valid map.
        return Err(DynamicsError::RootFindingFailure { residual: w[0].norm() });
    }
    for _ in 0..(2 * d - 2 - eff_deg) {
        roots.push(SpherePoint::infinity());
    }

    // Greedy chordal clustering; cluster size is the multiplicity.
    let mut used = vec![false; roots.len()];
    let mut points: Vec<CriticalPoint> = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        used[i] = true;
        for j in (i + 1)..roots.len() {
            if !used[j] && chordal(&roots[i], &roots[j]).value() <= CLUSTER_RADIUS {
                members.push(j);
                used[j] = true;
            }
        }
        let location = if members.len() == 1 {
            roots[i]
        } else {
            // Mean in the natural chart of the first member.
            let chart = roots[i].natural_chart();
            let mut acc = C64::new(0.0, 0.0);
            for &j in &members {
                acc += roots[j].chart_value(chart);
            }
            SpherePoint::from_chart(chart, acc / C64::new(members.len() as f64, 0.0))
        };
        points.push(CriticalPoint {
            location,
            multiplicity: members.len(),
            label: 0,
        });
    }

    debug_assert_eq!(points.iter().map(|p| p.multiplicity).sum::<usize>(), 2 * d - 2);

    points.sort_by(|a, b| {
        b.multiplicity
            .cmp(&a.multiplicity)
            .then_with(|| lex_cmp(&a.location, &b.location))
    });
    for (i, p) in points.iter_mut().enumerate() {
        p.label = i;
    }

    let separation = min_separation(&points);
    Ok(CriticalLabeling { points, separation })
}

fn lex_cmp(a: &SpherePoint, b: &SpherePoint) -> core::cmp::Ordering {
    let ka = a.lex_key();
    let kb = b.lex_key();
    for (x, y) in ka.iter().zip(kb.iter()) {
        match x.partial_cmp(y) {
            Some(core::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    core::cmp::Ordering::Equal
}

fn min_separation(points: &[CriticalPoint]) -> f64 {
    let mut sep = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            sep = sep.min(chordal(&points[i].location, &points[j].location).value());
        }
    }
    if sep.is_finite() {
        sep
    } else {
        // Single critical cluster.
        0.0
    }
}

/// Critical values `v_j = f(c_j)` in label order.
pub fn critical_values(map: &RationalMap, lab: &CriticalLabeling) -> Result<Vec<SpherePoint>> {
    lab.points.iter().map(|p| map.eval(&p.location)).collect()
}

/// Relabel `next` by nearest-chordal-neighbour matching against `prev`.
///
/// Requires simple critical points on both sides. Fails when the assignment
/// is not clearly decidable: a point whose two nearest candidates are within
/// 10% of each other, or a displacement larger than half the separation.
pub fn match_labels(prev: &CriticalLabeling, next: &CriticalLabeling) -> Result<CriticalLabeling> {
    if !prev.all_simple() || !next.all_simple() {
        return Err(DynamicsError::Precondition {
            detail: "label matching requires simple critical points".into(),
        });
    }
    let n = prev.points.len();
    if next.points.len() != n {
        return Err(DynamicsError::AmbiguousMatching {
            detail: format!("{} vs {} critical points", n, next.points.len()),
        });
    }

    for p in &prev.points {
        let mut dists: Vec<f64> = next
            .points
            .iter()
            .map(|q| chordal(&p.location, &q.location).value())
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if n > 1 && dists[1] <= 1.1 * dists[0] {
            return Err(DynamicsError::AmbiguousMatching {
                detail: format!(
                    "label {}: nearest candidates at {:.3e} and {:.3e}",
                    p.label, dists[0], dists[1]
                ),
            });
        }
        if dists[0] > prev.separation / 2.0 {
            return Err(DynamicsError::AmbiguousMatching {
                detail: format!(
                    "label {}: displacement {:.3e} exceeds separation/2 = {:.3e}",
                    p.label,
                    dists[0],
                    prev.separation / 2.0
                ),
            });
        }
    }

    // Greedy global assignment on sorted pair distances; the guards above
    // make it unambiguous.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.points.iter().enumerate() {
        for (j, q) in next.points.iter().enumerate() {
            pairs.push((chordal(&p.location, &q.location).value(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut taken_prev = vec![false; n];
    let mut taken_next = vec![false; n];
    let mut assignment = vec![usize::MAX; n];
    for (_, i, j) in pairs {
        if !taken_prev[i] && !taken_next[j] {
            taken_prev[i] = true;
            taken_next[j] = true;
            assignment[i] = j;
        }
    }

    let mut points: Vec<CriticalPoint> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| CriticalPoint {
            location: next.points[j].location,
            multiplicity: 1,
            label: i,
        })
        .collect();
    points.sort_by_key(|p| p.label);
    let separation = min_separation(&points);
    Ok(CriticalLabeling { points, separation })
}

/// Options for [`ensure_simple`].
#[derive(Debug, Clone, Copy)]
pub struct EnsureSimpleOptions {
    /// Maximum perturbation norm.
    pub step: f64,
    /// Required minimum pairwise separation.
    pub min_separation: f64,
    /// Total number of candidate parameters tried.
    pub budget: usize,
}

impl Default for EnsureSimpleOptions {
    fn default() -> Self {
        EnsureSimpleOptions {
            step: 1e-3,
            min_separation: 1e-4,
            budget: 256,
        }
    }
}

/// Return `a` unchanged when all critical points at `a` are simple and well
/// separated; otherwise search radially outward for a nearby parameter where
/// they are. Deterministic: fixed direction set, radii increasing from
/// `step / 16` to `step`.
pub fn ensure_simple(
    family: &ParameterFamily,
    a: &[C64],
    opts: EnsureSimpleOptions,
) -> Result<Vec<C64>> {
    let ok = |param: &[C64]| -> Option<Vec<C64>> {
        let map = family.map_at(param).ok()?;
        let lab = critical_points(&map).ok()?;
        (lab.all_simple() && lab.separation >= opts.min_separation).then(|| param.to_vec())
    };
    if let Some(found) = ok(a) {
        return Ok(found);
    }
    if opts.budget == 0 {
        return Err(DynamicsError::SplitFailure);
    }

    let m = family.dimension();
    let radii = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0];
    let per_radius = (opts.budget / radii.len()).max(1);
    let directions = sampling::unit_directions(m, per_radius);
    let mut tried = 0;
    for rf in radii {
        let rho = opts.step * rf;
        for v in &directions {
            if tried >= opts.budget {
                return Err(DynamicsError::SplitFailure);
            }
            tried += 1;
            let cand: Vec<C64> = a.iter().zip(v.iter()).map(|(x, d)| x + d * rho).collect();
            if let Some(found) = ok(&cand) {
                return Ok(found);
            }
        }
    }
    Err(DynamicsError::SplitFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ParameterFamily;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn map_z2() -> RationalMap {
        RationalMap::new(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap()
    }

    fn map_sphere() -> RationalMap {
        RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn z2_criticals_are_zero_and_infinity() {
        let lab = critical_points(&map_z2()).unwrap();
        assert_eq!(lab.points.len(), 2);
        assert!(lab.all_simple());
        let locs = lab.locations();
        assert!(locs.iter().any(|p| p.is_infinity()));
        assert!(locs
            .iter()
            .any(|p| chordal(p, &SpherePoint::zero()).value() < 1e-12));
    }

    #[test]
    fn sphere_flagship_criticals_simple() {
        // W = P'Q - PQ' = 4z: critical points 0 and (after degree drop) infinity.
        let lab = critical_points(&map_sphere()).unwrap();
        assert_eq!(lab.points.len(), 2);
        assert!(lab.all_simple());
    }

    #[test]
    fn z3_criticals_are_double() {
        let f = RationalMap::new(
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(1.0, 0.0)],
        )
        .unwrap();
        let lab = critical_points(&f).unwrap();
        assert_eq!(lab.points.len(), 2);
        assert!(lab.points.iter().all(|p| p.multiplicity == 2));
    }

    #[test]
    fn critical_values_of_flagships() {
        let f = RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let lab = critical_points(&f).unwrap();
        let vals = critical_values(&f, &lab).unwrap();
        for (p, v) in lab.points.iter().zip(vals.iter()) {
            if p.location.is_infinity() {
                assert!(v.is_infinity());
            } else {
                assert!(chordal(v, &SpherePoint::from_affine(c(-2.0, 0.0))).value() < 1e-13);
            }
        }

        let g = map_sphere();
        let lab = critical_points(&g).unwrap();
        let vals = critical_values(&g, &lab).unwrap();
        for (p, v) in lab.points.iter().zip(vals.iter()) {
            if p.location.is_infinity() {
                assert!(chordal(v, &SpherePoint::from_affine(c(1.0, 0.0))).value() < 1e-13);
            } else {
                assert!(v.is_infinity());
            }
        }
    }

    #[test]
    fn matching_identity_and_small_move() {
        let lab = critical_points(&map_z2()).unwrap();
        let matched = match_labels(&lab, &lab).unwrap();
        for (a, b) in lab.points.iter().zip(matched.points.iter()) {
            assert_eq!(a.label, b.label);
            assert!(chordal(&a.location, &b.location).value() == 0.0);
        }

        // Perturbed copy: 0 -> 0.001.
        let mut moved = lab.clone();
        moved.points[0].location = SpherePoint::from_affine(c(0.001, 0.0));
        let matched = match_labels(&lab, &moved).unwrap();
        assert!(chordal(
            &matched.points[lab.points[0].label].location,
            &SpherePoint::from_affine(c(0.001, 0.0))
        )
        .value()
            < 1e-12);
    }

    #[test]
    fn matching_rejects_large_displacement() {
        let lab = critical_points(&map_z2()).unwrap();
        let mut moved = lab.clone();
        // Displace one point by more than separation / 2.
        moved.points[0].location = SpherePoint::from_affine(c(0.0, 1.5));
        assert!(matches!(
            match_labels(&lab, &moved),
            Err(DynamicsError::AmbiguousMatching { .. })
        ));
    }

    #[test]
    fn wronskian_residual_small_on_random_maps() {
        // Residual |W(c_j)| <= 1e-10 * ||W|| on the unit-scale chart.
        let coeff = |base: usize, i: usize| {
            let u = sampling::halton(base + i, 4);
            c(2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0)
        };
        let mut idx = 1;
        for _ in 0..50 {
            let num: Vec<C64> = (0..4).map(|i| coeff(idx, i)).collect();
            idx += 7;
            let den: Vec<C64> = (0..4).map(|i| coeff(idx, i)).collect();
            idx += 7;
            let Ok(map) = RationalMap::new(&num, &den) else {
                continue;
            };
            let Ok(lab) = critical_points(&map) else {
                continue;
            };
            assert_eq!(
                lab.points.iter().map(|p| p.multiplicity).sum::<usize>(),
                2 * map.degree() - 2
            );
            let w = wronskian_coefficients(map.numerator(), map.denominator());
            let wd = w.len() - 1;
            let scale: f64 = w.iter().map(|x| x.norm()).sum();
            for p in &lab.points {
                let res = poly::eval_homogeneous(&w, wd, p.location.z, p.location.w).norm();
                assert!(res <= 1e-10 * scale, "residual {res:.3e} vs scale {scale:.3e}");
            }
        }
    }

    #[test]
    fn ensure_simple_keeps_good_parameters() {
        let fam = ParameterFamily::new(
            map_sphere(),
            &[(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]), (vec![], vec![c(1.0, 0.0)])],
            0.1,
        )
        .unwrap();
        let a = [c(0.0, 0.0), c(0.0, 0.0)];
        let out = ensure_simple(&fam, &a, EnsureSimpleOptions::default()).unwrap();
        assert_eq!(out, a.to_vec());
    }

    #[test]
    fn ensure_simple_splits_cubic() {
        // z^3 inside a full cubic family: all lower coefficients perturbable.
        let base = RationalMap::new(
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(1.0, 0.0)],
        )
        .unwrap();
        let dirs: Vec<(Vec<C64>, Vec<C64>)> = vec![
            (vec![c(1.0, 0.0)], vec![]),
            (vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]),
            (vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![]),
            (vec![], vec![c(0.0, 0.0), c(1.0, 0.0)]),
        ];
        let fam = ParameterFamily::new(base, &dirs, 0.05).unwrap();
        let a = vec![c(0.0, 0.0); 4];
        let out = ensure_simple(&fam, &a, EnsureSimpleOptions::default()).unwrap();
        assert!(out.iter().any(|x| x.norm() > 0.0));
        let map = fam.map_at(&out).unwrap();
        let lab = critical_points(&map).unwrap();
        assert!(lab.all_simple());
        // Discriminant oracle: resultant(W, W') != 0 at the split parameter.
        let w = wronskian_coefficients(map.numerator(), map.denominator());
        let (deg, _) = poly::effective_degree(&w, 1e-13);
        let trimmed = &w[..=deg];
        let disc = poly::resultant(trimmed, &poly::derivative(trimmed), deg).norm();
        assert!(disc > 1e-12);
    }

    #[test]
    fn ensure_simple_zero_budget_fails() {
        let base = RationalMap::new(
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(1.0, 0.0)],
        )
        .unwrap();
        let fam = ParameterFamily::new(base, &[(vec![c(1.0, 0.0)], vec![])], 0.05).unwrap();
        let opts = EnsureSimpleOptions {
            budget: 0,
            ..Default::default()
        };
        assert!(matches!(
            ensure_simple(&fam, &[c(0.0, 0.0)], opts),
            Err(DynamicsError::SplitFailure)
        ));
    }
}
