//! Property sweeps over random maps and parameters: the cheap global
//! invariants that should never break regardless of the specific family.

use misclose_core::critical::critical_points;
use misclose_core::poly;
use misclose_core::sampling;
use misclose_core::sphere::{chordal, RationalMap, SpherePoint};
use misclose_core::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Deterministic "random" map of a given degree from the Halton stream.
fn sample_map(degree: usize, seed: usize) -> Option<RationalMap> {
    let coeff = |k: usize| {
        let u = sampling::halton(seed * 97 + k + 1, 4);
        c(2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0)
    };
    let num: Vec<C64> = (0..=degree).map(coeff).collect();
    let den: Vec<C64> = (0..=degree).map(|k| coeff(k + degree + 1)).collect();
    RationalMap::new(&num, &den).ok()
}

#[test]
fn iteration_never_degenerates_on_valid_maps() {
    let mut orbits = 0usize;
    let mut seed = 1usize;
    while orbits < 10_000 {
        seed += 1;
        let degree = 2 + seed % 3;
        let Some(map) = sample_map(degree, seed) else {
            continue;
        };
        for i in 0..100 {
            let u = sampling::halton(seed * 31 + i + 1, 2);
            let start = SpherePoint::from_affine(c(
                6.0 * u[0] - 3.0,
                6.0 * u[1] - 3.0,
            ));
            let orbit = map.iterate(&start, 100);
            assert!(
                orbit.is_ok(),
                "map seed {seed} degenerated from start {i}: {orbit:?}"
            );
            orbits += 1;
            if orbits >= 10_000 {
                break;
            }
        }
    }
}

#[test]
fn affine_and_homogeneous_evaluation_agree() {
    let mut checked = 0usize;
    let mut seed = 1usize;
    while checked < 2_000 {
        seed += 1;
        let Some(map) = sample_map(2 + seed % 3, seed) else {
            continue;
        };
        let d = map.degree();
        for i in 0..40 {
            let u = sampling::halton(seed * 13 + i + 1, 2);
            let z = c(20.0 * u[0] - 10.0, 20.0 * u[1] - 10.0);
            // Direct affine evaluation with Horner.
            let p = poly::eval(map.numerator(), z);
            let q = poly::eval(map.denominator(), z);
            if q.norm() < 1e-6 * p.norm().max(1.0) {
                continue; // too close to a pole for an affine reference
            }
            let affine = p / q;
            let through_sphere = map
                .eval(&SpherePoint::from_affine(z))
                .unwrap()
                .to_affine();
            let Some(hom) = through_sphere else { continue };
            let rel = (hom - affine).norm() / affine.norm().max(1.0);
            assert!(
                rel <= 1e-12,
                "degree {d} map seed {seed}: relative gap {rel:.3e} at z = {z}"
            );
            checked += 1;
        }
    }
}

#[test]
fn chordal_metric_properties() {
    let pts: Vec<SpherePoint> = (1..60)
        .map(|i| {
            let u = sampling::halton(i, 2);
            if i % 7 == 0 {
                SpherePoint::infinity()
            } else {
                SpherePoint::from_affine(c(8.0 * u[0] - 4.0, 8.0 * u[1] - 4.0))
            }
        })
        .collect();
    for (i, p) in pts.iter().enumerate() {
        assert_eq!(chordal(p, p).value(), 0.0);
        for q in pts.iter().skip(i + 1) {
            let d = chordal(p, q).value();
            assert!((0.0..=2.0 + 1e-15).contains(&d));
            assert_eq!(d, chordal(q, p).value());
            // Scaling invariance of the homogeneous representative.
            let scaled = SpherePoint::from_homogeneous(
                p.z * c(0.3, -1.7),
                p.w * c(0.3, -1.7),
            )
            .unwrap();
            assert!((chordal(&scaled, q).value() - d).abs() <= 1e-13);
            // Triangle inequality through a third point.
            for r in pts.iter().take(6) {
                assert!(
                    d <= chordal(p, r).value() + chordal(r, q).value() + 1e-12,
                    "triangle inequality failed"
                );
            }
        }
    }
}

#[test]
fn multiplicities_always_sum_to_the_riemann_hurwitz_count() {
    let mut checked = 0usize;
    let mut seed = 100usize;
    while checked < 1_000 {
        seed += 1;
        let degree = 2 + seed % 4;
        let Some(map) = sample_map(degree, seed) else {
            continue;
        };
        let Ok(lab) = critical_points(&map) else {
            continue;
        };
        let total: usize = lab.points.iter().map(|p| p.multiplicity).sum();
        assert_eq!(total, 2 * map.degree() - 2, "map seed {seed}");
        checked += 1;
    }
}
