//! Transversality measurements: the Jacobian of the stacked parameter
//! functions, its smallest singular value (local-immersion check),
//! finite-order-contact fits along directions, good-cone direction
//! selection, and bounded-distortion sampling on Whitney disks.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DynamicsError, Result};
use crate::family::param_norm;
use crate::linalg::{singular_values, vec_norm, CMatrix};
use crate::motion::MotionContext;
use crate::orbit::least_squares_slope;
use crate::sampling;
use crate::C64;

/// How parameter gradients are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMethod {
    /// Implicit differentiation through the orbit and motion recursions.
    Exact,
    /// Central differences with the given step.
    CentralDiff(f64),
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::Exact
    }
}

/// A disk in parameter space whose diameter is at least `k` times its
/// distance to the origin.
#[derive(Debug, Clone)]
pub struct WhitneyDisk {
    pub center: Vec<C64>,
    pub radius: f64,
    /// The Whitney constant `k`.
    pub whitney_constant: f64,
    /// Complex directions spanning the disk; its complex dimension is
    /// `basis.len()`.
    pub basis: Vec<Vec<C64>>,
}

impl WhitneyDisk {
    /// Check `2 radius >= k |center|` and containment in the family ball.
    pub fn validate(&self, family_radius: f64) -> Result<()> {
        if self.basis.is_empty() {
            return Err(DynamicsError::Precondition {
                detail: "Whitney disk needs at least one direction".into(),
            });
        }
        let dist = param_norm(&self.center);
        if 2.0 * self.radius < self.whitney_constant * dist {
            return Err(DynamicsError::Precondition {
                detail: format!(
                    "not a {:.3}-Whitney disk: diameter {:.3e} < k * dist {:.3e}",
                    self.whitney_constant,
                    2.0 * self.radius,
                    self.whitney_constant * dist
                ),
            });
        }
        if dist + self.radius > family_radius * (1.0 + 1e-12) {
            return Err(DynamicsError::Precondition {
                detail: "Whitney disk leaves the family ball".into(),
            });
        }
        Ok(())
    }

    /// Parameter point for disk coordinates `t` (one complex coordinate per
    /// basis direction, `|t| <= 1` covering the disk).
    pub fn point(&self, t: &[C64]) -> Vec<C64> {
        let mut a = self.center.clone();
        for (ti, b) in t.iter().zip(self.basis.iter()) {
            for (x, bi) in a.iter_mut().zip(b.iter()) {
                *x += ti * self.radius * bi;
            }
        }
        a
    }
}

/// Leading-order behaviour of `x_j` along one direction.
#[derive(Debug, Clone)]
pub struct ContactOrder {
    pub label: usize,
    pub direction: Vec<C64>,
    /// Leading exponent `K` (rounded to the nearest integer).
    pub exponent: usize,
    /// Leading coefficient `K_1`.
    pub leading_coefficient: C64,
    /// Max deviation of the log-log fit.
    pub fit_residual: f64,
    /// Set when `x` vanishes over the whole sampled range.
    pub infinite_order: bool,
}

/// Jacobian of `G: a -> (x_j(a))_j` at `a`: one row per active label.
pub fn jacobian_g(
    ctx: &MotionContext<'_>,
    a: &[C64],
    labels: &[usize],
    method: GradientMethod,
) -> Result<CMatrix> {
    let at = ctx.prepare(a, None)?;
    let mut rows: Vec<Vec<C64>> = Vec::with_capacity(labels.len());
    match method {
        GradientMethod::Exact => {
            for &j in labels {
                rows.push(ctx.x_value(&at, j)?.grad);
            }
        }
        GradientMethod::CentralDiff(h) => {
            for &j in labels {
                let center = ctx.x_value(&at, j)?;
                let mut row = Vec::with_capacity(a.len());
                for i in 0..a.len() {
                    let mut ap = a.to_vec();
                    let mut am = a.to_vec();
                    ap[i] += C64::new(h, 0.0);
                    am[i] -= C64::new(h, 0.0);
                    let xp = ctx
                        .x_value(&ctx.prepare(&ap, Some(&at.cont))?, j)?
                        .value_in_chart(center.chart)?;
                    let xm = ctx
                        .x_value(&ctx.prepare(&am, Some(&at.cont))?, j)?
                        .value_in_chart(center.chart)?;
                    row.push((xp - xm) / C64::new(2.0 * h, 0.0));
                }
                rows.push(row);
            }
        }
    }
    Ok(CMatrix::from_rows(&rows))
}

/// Result of the local-immersion check.
#[derive(Debug, Clone)]
pub struct ImmersionCheck {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rank: usize,
    pub pass: bool,
}

/// Relative floor for the immersion test.
pub const IMMERSION_FLOOR: f64 = 1e-6;

/// Smallest singular value and rank of the Jacobian; PASS when
/// `sigma_min > 1e-6 * sigma_max`.
pub fn immersion_check(
    ctx: &MotionContext<'_>,
    a: &[C64],
    labels: &[usize],
    method: GradientMethod,
) -> Result<ImmersionCheck> {
    let j = jacobian_g(ctx, a, labels, method)?;
    Ok(immersion_from_jacobian(&j))
}

pub fn immersion_from_jacobian(j: &CMatrix) -> ImmersionCheck {
    let sv = singular_values(j);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * sigma_max.max(1e-300)).count();
    ImmersionCheck {
        sigma_min,
        sigma_max,
        rank,
        pass: sigma_min > IMMERSION_FLOOR * sigma_max,
    }
}

/// Fit the contact order of `x_j` along the unit direction `v` from samples
/// `t = r 2^-i`, `i = 4..=14`.
pub fn contact_order(
    ctx: &MotionContext<'_>,
    label: usize,
    v: &[C64],
) -> Result<ContactOrder> {
    let r = ctx.family.radius();
    let samples: Vec<(f64, C64)> = {
        let mut out = Vec::new();
        let mut prev = None;
        for i in 4..=14 {
            let t = r * 0.5f64.powi(i);
            let a: Vec<C64> = v.iter().map(|d| d * t).collect();
            let at = ctx.prepare(&a, prev.as_ref())?;
            let x = ctx.x_value(&at, label)?;
            out.push((t, x.value));
            prev = Some(at.cont);
        }
        out
    };

    if samples.iter().all(|(_, x)| x.norm() < 1e-13) {
        return Ok(ContactOrder {
            label,
            direction: v.to_vec(),
            exponent: 0,
            leading_coefficient: C64::new(0.0, 0.0),
            fit_residual: 0.0,
            infinite_order: true,
        });
    }

    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, x)| x.norm() > 0.0)
        .map(|(t, x)| (t.ln(), x.norm().ln()))
        .collect();
    let slope = least_squares_slope(&pts);
    let exponent = slope.round().max(1.0) as usize;

    // Leading coefficient from the finest samples, phase included.
    let fine: Vec<C64> = samples
        .iter()
        .rev()
        .take(3)
        .map(|(t, x)| x / C64::new(t.powi(exponent as i32), 0.0))
        .collect();
    let leading = fine.iter().sum::<C64>() / C64::new(fine.len() as f64, 0.0);

    let mut fit_residual = 0.0f64;
    if leading.norm() > 0.0 {
        for (lt, lx) in &pts {
            let model = exponent as f64 * lt + leading.norm().ln();
            fit_residual = fit_residual.max((lx - model).abs());
        }
    }

    Ok(ContactOrder {
        label,
        direction: v.to_vec(),
        exponent,
        leading_coefficient: leading,
        fit_residual,
        infinite_order: false,
    })
}

/// Max-min direction selection on precomputed leading rows: maximises
/// `min_j |row_j . v|` (bilinear pairing) over a deterministic
/// low-discrepancy direction sample. Ties break lexicographically via the
/// deterministic sample order.
pub fn best_direction(rows: &[Vec<C64>], count: usize) -> (Vec<C64>, f64) {
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut best_v: Vec<C64> = vec![C64::new(0.0, 0.0); m];
    let mut best_score = -1.0f64;
    for v in sampling::unit_directions(m, count) {
        let mut score = f64::INFINITY;
        for row in rows {
            let pairing: C64 = row.iter().zip(v.iter()).map(|(r, d)| r * d).sum();
            score = score.min(pairing.norm());
        }
        if score > best_score {
            best_score = score;
            best_v = v;
        }
    }
    (best_v, best_score)
}

/// Number of sampled directions in the good-cone search.
pub const CONE_SAMPLE: usize = 1 << 12;

/// Pick a direction in which every active `x_j` has a usable leading
/// coefficient: maximise the minimum leading coefficient over a fixed
/// direction sample. Labels with vanishing first-order rows fall back to a
/// contact-order fit along the candidate direction.
pub fn good_cone_direction(
    ctx: &MotionContext<'_>,
    labels: &[usize],
    method: GradientMethod,
) -> Result<(Vec<C64>, f64)> {
    let m = ctx.family.dimension();
    let zero = vec![C64::new(0.0, 0.0); m];
    let j = jacobian_g(ctx, &zero, labels, method)?;
    let scale = j.frobenius();
    let rows: Vec<Vec<C64>> = (0..j.rows)
        .map(|r| (0..j.cols).map(|c| j.get(r, c)).collect())
        .collect();

    let degenerate: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, row)| vec_norm(row) <= 1e-10 * scale.max(1e-300))
        .map(|(i, _)| i)
        .collect();

    if degenerate.is_empty() {
        let (v, score) = best_direction(&rows, CONE_SAMPLE);
        if score < 1e-10 {
            return Err(DynamicsError::NoGoodDirection { best_score: score });
        }
        return Ok((v, score));
    }

    // Slow path: score degenerate labels by a contact fit per direction.
    // The direction sample shrinks to keep this tractable.
    let nondegenerate: Vec<Vec<C64>> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| !degenerate.contains(i))
        .map(|(_, r)| r.clone())
        .collect();
    let mut best_v: Option<Vec<C64>> = None;
    let mut best_score = -1.0f64;
    for v in sampling::unit_directions(m, 64) {
        let mut score = f64::INFINITY;
        for row in &nondegenerate {
            let pairing: C64 = row.iter().zip(v.iter()).map(|(r, d)| r * d).sum();
            score = score.min(pairing.norm());
        }
        for &di in &degenerate {
            let co = contact_order(ctx, labels[di], &v)?;
            let lead = if co.infinite_order {
                0.0
            } else {
                co.leading_coefficient.norm()
            };
            score = score.min(lead);
        }
        if score > best_score {
            best_score = score;
            best_v = Some(v);
        }
    }
    let v = best_v.expect("nonempty direction sample");
    if best_score < 1e-10 {
        return Err(DynamicsError::NoGoodDirection {
            best_score: best_score.max(0.0),
        });
    }
    Ok((v, best_score))
}

/// Sampled distortion of `x'` on a Whitney disk:
/// `sup ||x'(a) - x'(b)|| / ||x'(a)||` over at least 100 pairs.
pub fn whitney_distortion(
    ctx: &MotionContext<'_>,
    label: usize,
    disk: &WhitneyDisk,
) -> Result<f64> {
    disk.validate(ctx.family.radius())?;
    let dims = disk.basis.len();
    // 15 points give 105 ordered pairs.
    let pts_per_dim = 15usize;
    let coords = sampling::unit_disk(pts_per_dim);
    let mut grads: Vec<Vec<C64>> = Vec::new();
    let mut prev = None;
    for t0 in &coords {
        let t = vec![*t0; dims];
        let a = disk.point(&t);
        let at = ctx.prepare(&a, prev.as_ref())?;
        grads.push(ctx.x_value(&at, label)?.grad);
        prev = Some(at.cont);
    }
    let mut worst = 0.0f64;
    for i in 0..grads.len() {
        let ni = vec_norm(&grads[i]);
        if ni == 0.0 {
            continue;
        }
        for j in (i + 1)..grads.len() {
            let diff: Vec<C64> = grads[i]
                .iter()
                .zip(grads[j].iter())
                .map(|(x, y)| x - y)
                .collect();
            worst = worst.max(vec_norm(&diff) / ni);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{critical_points, CriticalLabeling};
    use crate::family::ParameterFamily;
    use crate::orbit::{
        build_skeleton, classify_critical_orbits, ClassifyOptions, PostcriticalSkeleton,
        SkeletonOptions,
    };
    use crate::sphere::RationalMap;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct Fixture {
        family: ParameterFamily,
        labeling: CriticalLabeling,
        skeleton: PostcriticalSkeleton,
    }

    fn fixture(family: ParameterFamily) -> Fixture {
        let labeling = critical_points(family.base()).unwrap();
        let cls = classify_critical_orbits(family.base(), &labeling, ClassifyOptions::default());
        let skeleton =
            build_skeleton(family.base(), &labeling, &cls, SkeletonOptions::default()).unwrap();
        Fixture {
            family,
            labeling,
            skeleton,
        }
    }

    fn quadratic() -> Fixture {
        let base =
            RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        fixture(ParameterFamily::new(base, &[(vec![c(1.0, 0.0)], vec![])], 0.5).unwrap())
    }

    fn quadratic_duplicated() -> Fixture {
        let base =
            RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let dir = (vec![c(1.0, 0.0)], vec![]);
        fixture(ParameterFamily::new(base, &[dir.clone(), dir], 0.5).unwrap())
    }

    #[test]
    fn quadratic_jacobian_is_two_thirds() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let labels = fx.skeleton.julia_labels.clone();
        let j = jacobian_g(&ctx, &[c(0.0, 0.0)], &labels, GradientMethod::Exact).unwrap();
        assert_eq!((j.rows, j.cols), (1, 1));
        assert!((j.get(0, 0) - c(2.0 / 3.0, 0.0)).norm() < 1e-6);

        let chk = immersion_check(&ctx, &[c(0.0, 0.0)], &labels, GradientMethod::Exact).unwrap();
        assert!((chk.sigma_min - 2.0 / 3.0).abs() < 1e-6);
        assert!(chk.pass);
        assert_eq!(chk.rank, 1);
    }

    #[test]
    fn finite_difference_jacobian_converges() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let labels = fx.skeleton.julia_labels.clone();
        let h = 1e-5;
        let s1 = immersion_check(&ctx, &[c(0.0, 0.0)], &labels, GradientMethod::CentralDiff(h))
            .unwrap()
            .sigma_min;
        let s2 = immersion_check(
            &ctx,
            &[c(0.0, 0.0)],
            &labels,
            GradientMethod::CentralDiff(h / 2.0),
        )
        .unwrap()
        .sigma_min;
        assert!((s1 - s2).abs() <= 0.01 * s1.max(s2), "{s1} vs {s2}");
        assert!((s1 - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn duplicated_direction_fails_immersion() {
        let fx = quadratic_duplicated();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let labels = fx.skeleton.julia_labels.clone();
        let j = jacobian_g(
            &ctx,
            &[c(0.0, 0.0), c(0.0, 0.0)],
            &labels,
            GradientMethod::Exact,
        )
        .unwrap();
        // Identical columns by linearity in the directions.
        assert!((j.get(0, 0) - j.get(0, 1)).norm() < 1e-10);
        let chk = immersion_from_jacobian(&j);
        assert!(chk.rank < 2 || !chk.pass);
    }

    #[test]
    fn contact_order_quadratic_linear() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];
        let co = contact_order(&ctx, label, &[c(1.0, 0.0)]).unwrap();
        assert!(!co.infinite_order);
        assert_eq!(co.exponent, 1);
        assert!((co.leading_coefficient - c(2.0 / 3.0, 0.0)).norm() < 1e-3);

        // Phase rotation of the direction rotates K1 by the same phase.
        for k in 1..8 {
            let th = core::f64::consts::TAU * k as f64 / 8.0;
            let phase = c(th.cos(), th.sin());
            let co_r = contact_order(&ctx, label, &[phase]).unwrap();
            assert_eq!(co_r.exponent, 1);
            let expect = co.leading_coefficient * phase;
            assert!(
                (co_r.leading_coefficient - expect).norm() < 1e-3,
                "phase {k}: {} vs {expect}",
                co_r.leading_coefficient
            );
        }
    }

    #[test]
    fn scaling_direction_has_infinite_order() {
        // Direction = (P, Q) rescales both coefficient lists: the map is
        // unchanged, so x vanishes identically along it.
        let base = RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let scaling = (base.numerator().to_vec(), base.denominator().to_vec());
        let family = ParameterFamily::new(base, &[scaling], 0.1).unwrap();
        let fx = fixture(family);
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];
        let co = contact_order(&ctx, label, &[c(1.0, 0.0)]).unwrap();
        assert!(co.infinite_order);

        // With only that direction available there is no good cone.
        let labels = fx.skeleton.julia_labels.clone();
        assert!(matches!(
            good_cone_direction(&ctx, &labels, GradientMethod::Exact),
            Err(DynamicsError::NoGoodDirection { .. })
        ));
    }

    #[test]
    fn best_direction_bisects_orthogonal_rows() {
        // Two orthogonal unit rows: the max-min direction balances both
        // pairings at 1/sqrt(2); verify against a dense sweep.
        let rows = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let (v, score) = best_direction(&rows, 1 << 12);
        // Dense oracle.
        let mut oracle: f64 = 0.0;
        for w in sampling::unit_directions(2, 10_000) {
            let s = w[0].norm().min(w[1].norm());
            oracle = oracle.max(s);
        }
        assert!((score - oracle).abs() < 0.02, "{score} vs oracle {oracle}");
        assert!((score - 1.0 / 2.0f64.sqrt()).abs() < 0.05);
        assert!((v[0].norm() - v[1].norm()).abs() < 0.2);
    }

    #[test]
    fn good_cone_on_quadratic_is_unit() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let labels = fx.skeleton.julia_labels.clone();
        let (v, score) = good_cone_direction(&ctx, &labels, GradientMethod::Exact).unwrap();
        assert!((v[0].norm() - 1.0).abs() < 1e-12);
        assert!((score - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn whitney_distortion_small_and_shrinking() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];
        let mut last = f64::INFINITY;
        for (i, scale) in [1e-2, 1e-3, 1e-4].iter().enumerate() {
            let disk = WhitneyDisk {
                center: vec![c(*scale, 0.0)],
                radius: scale / 4.0,
                whitney_constant: 0.5,
                basis: vec![vec![c(1.0, 0.0)]],
            };
            let ratio = whitney_distortion(&ctx, label, &disk).unwrap();
            if i == 0 {
                assert!(ratio <= 0.05, "ratio {ratio}");
            }
            assert!(ratio <= last);
            last = ratio;
        }
    }

    #[test]
    fn whitney_condition_enforced() {
        let fx = quadratic();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];
        // Tiny disk far from the origin violates diam >= k dist.
        let disk = WhitneyDisk {
            center: vec![c(0.1, 0.0)],
            radius: 1e-6,
            whitney_constant: 0.5,
            basis: vec![vec![c(1.0, 0.0)]],
        };
        assert!(matches!(
            whitney_distortion(&ctx, label, &disk),
            Err(DynamicsError::Precondition { .. })
        ));
    }
}
