//! Newton continuation of the postcritical skeleton over the parameter
//! ball, and the parameter functions built on it.
//!
//! The skeleton at the base parameter is finite; cycles continue by Newton
//! on `f_a^p(z) = z` and preperiodic tail points by pullback against their
//! already-continued successor. The central objects downstream are
//!
//! * `xi(n, j)(a)` — the `n`-th iterate of the `j`-th critical point, with
//!   its exact parameter gradient from the chain-rule recursion,
//! * `x_j(a)` — how the tracked critical value detaches from its moved
//!   skeleton target, and
//! * `mu(n, j)(a)` — the moved skeleton point the orbit shadows.
//!
//! Gradients of the motion itself come from implicit differentiation of the
//! defining Newton equations, not finite differences; the tests check both
//! against closed forms and central differences.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::critical::CriticalLabeling;
use crate::error::{DynamicsError, Result};
use crate::family::{labeled_map_at, param_norm, FamilyAt, ParameterFamily};
use crate::orbit::{refine_periodic, NewtonOptions, PostcriticalSkeleton};
use crate::sphere::{chordal, Chart, SpherePoint};
use crate::C64;

/// Multiplier margin below which a continued cycle counts as having lost
/// repelling-ness.
pub const REPELLING_MARGIN: f64 = 1e-6;

/// A value in a chart together with its parameter gradient.
#[derive(Debug, Clone)]
pub struct ChartedJet {
    pub point: SpherePoint,
    pub chart: Chart,
    pub value: C64,
    pub grad: Vec<C64>,
}

impl ChartedJet {
    /// Re-express the jet in the other chart (`v -> 1/v`).
    pub fn convert(&self, chart: Chart) -> Result<ChartedJet> {
        if chart == self.chart {
            return Ok(self.clone());
        }
        if self.value.norm() < 1e-150 {
            return Err(DynamicsError::ChartOverflow);
        }
        let inv = C64::new(1.0, 0.0) / self.value;
        let factor = -inv * inv;
        Ok(ChartedJet {
            point: self.point,
            chart,
            value: inv,
            grad: self.grad.iter().map(|g| factor * g).collect(),
        })
    }
}

/// One continued skeleton point.
#[derive(Debug, Clone)]
pub struct MotionTrack {
    pub base: SpherePoint,
    pub continued: SpherePoint,
    /// `chordal(f_a(h(x)), h(f_0(x)))` at the final parameter.
    pub conjugacy_residual: f64,
}

/// The whole skeleton continued to one parameter.
#[derive(Debug, Clone)]
pub struct ContinuedSkeleton {
    pub a: Vec<C64>,
    pub tracks: Vec<MotionTrack>,
    /// Parameter points visited along the segment (step log).
    pub path: Vec<Vec<C64>>,
}

impl ContinuedSkeleton {
    pub fn position(&self, index: usize) -> &SpherePoint {
        &self.tracks[index].continued
    }

    pub fn max_conjugacy_residual(&self) -> f64 {
        self.tracks
            .iter()
            .map(|t| t.conjugacy_residual)
            .fold(0.0, f64::max)
    }
}

/// Processing plan for a skeleton: cycle periods and pullback order.
#[derive(Debug, Clone)]
struct SkeletonPlan {
    /// Period of the cycle through each on-cycle index.
    period: Vec<Option<usize>>,
    /// Indices in continuation order: on-cycle first, then tails sorted by
    /// distance to their cycle.
    order: Vec<usize>,
}

fn plan(skeleton: &PostcriticalSkeleton) -> SkeletonPlan {
    let n = skeleton.points.len();
    let mut period = vec![None; n];
    let mut dist = vec![usize::MAX; n];
    for i in 0..n {
        if skeleton.points[i].on_cycle {
            let mut p = 0;
            let mut idx = i;
            loop {
                idx = skeleton.points[idx].next;
                p += 1;
                if idx == i {
                    break;
                }
            }
            period[i] = Some(p);
            dist[i] = 0;
        }
    }
    // Tails: distance = steps to reach an on-cycle point.
    for i in 0..n {
        if dist[i] == usize::MAX {
            let mut idx = i;
            let mut d = 0;
            while !skeleton.points[idx].on_cycle && d <= n {
                idx = skeleton.points[idx].next;
                d += 1;
            }
            dist[i] = d;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (dist[i], i));
    SkeletonPlan { period, order }
}

/// The dynamical context: family, base critical labels, and skeleton.
pub struct MotionContext<'a> {
    pub family: &'a ParameterFamily,
    pub base_labeling: &'a CriticalLabeling,
    pub skeleton: &'a PostcriticalSkeleton,
}

/// Everything evaluated and cached at one parameter point.
pub struct EvalAt {
    pub fam: FamilyAt,
    pub labeling: CriticalLabeling,
    pub cont: ContinuedSkeleton,
}

impl<'a> MotionContext<'a> {
    pub fn new(
        family: &'a ParameterFamily,
        base_labeling: &'a CriticalLabeling,
        skeleton: &'a PostcriticalSkeleton,
    ) -> MotionContext<'a> {
        MotionContext {
            family,
            base_labeling,
            skeleton,
        }
    }

    fn base_continuation(&self) -> ContinuedSkeleton {
        let zero = vec![C64::new(0.0, 0.0); self.family.dimension()];
        ContinuedSkeleton {
            a: zero.clone(),
            tracks: self
                .skeleton
                .points
                .iter()
                .map(|sp| MotionTrack {
                    base: sp.point,
                    continued: sp.point,
                    conjugacy_residual: 0.0,
                })
                .collect(),
            path: vec![zero],
        }
    }

    /// Continue the skeleton from the base parameter to `a`.
    pub fn continue_to(&self, a: &[C64], max_increments: usize) -> Result<ContinuedSkeleton> {
        let base = self.base_continuation();
        self.continue_from(&base, a, max_increments)
    }

    /// Continue the skeleton from a previous continuation to `a`, bisecting
    /// the segment on breakdown (down to `2^-20` of the segment).
    pub fn continue_from(
        &self,
        prev: &ContinuedSkeleton,
        a: &[C64],
        max_increments: usize,
    ) -> Result<ContinuedSkeleton> {
        let sk_plan = plan(self.skeleton);
        let mut cur = prev.clone();
        let mut increments = 0usize;
        self.advance_segment(&sk_plan, &mut cur, a, 0, &mut increments, max_increments)?;
        // Conjugacy residuals at the final parameter.
        let fam = self.family.at(a)?;
        let positions: Vec<SpherePoint> = cur.tracks.iter().map(|t| t.continued).collect();
        for (i, t) in cur.tracks.iter_mut().enumerate() {
            let img = fam.map.eval(&t.continued)?;
            let next = &positions[self.skeleton.points[i].next];
            t.conjugacy_residual = chordal(&img, next).value();
        }
        Ok(cur)
    }

    fn advance_segment(
        &self,
        sk_plan: &SkeletonPlan,
        cur: &mut ContinuedSkeleton,
        target: &[C64],
        depth: usize,
        increments: &mut usize,
        max_increments: usize,
    ) -> Result<()> {
        if cur.a == target {
            return Ok(());
        }
        if *increments >= max_increments {
            return Err(DynamicsError::MotionBreakdown {
                detail: format!("step budget {max_increments} exhausted"),
            });
        }
        match self.advance_step(sk_plan, cur, target) {
            Ok(()) => {
                *increments += 1;
                Ok(())
            }
            Err(DynamicsError::MotionBreakdown { detail }) if depth < 20 => {
                let mid: Vec<C64> = cur
                    .a
                    .iter()
                    .zip(target.iter())
                    .map(|(x, y)| (x + y) / 2.0)
                    .collect();
                if mid == cur.a || mid.as_slice() == target {
                    return Err(DynamicsError::MotionBreakdown { detail });
                }
                self.advance_segment(sk_plan, cur, &mid, depth + 1, increments, max_increments)?;
                self.advance_segment(sk_plan, cur, target, depth + 1, increments, max_increments)
            }
            Err(e) => Err(e),
        }
    }

    /// One whole-segment attempt: cycles by Newton on `f_a^p(z) = z`, tails
    /// by pullback, each seeded at its previous location.
    fn advance_step(
        &self,
        sk_plan: &SkeletonPlan,
        cur: &mut ContinuedSkeleton,
        target: &[C64],
    ) -> Result<()> {
        let fam = self.family.at(target)?;
        let inj_radius = self.skeleton.min_separation() / 2.0;
        let mut new_pos: Vec<Option<SpherePoint>> = vec![None; cur.tracks.len()];

        for &i in &sk_plan.order {
            let seed = cur.tracks[i].continued;
            let continued = match sk_plan.period[i] {
                Some(p) => {
                    let z = refine_periodic(&fam.map, &seed, p, NewtonOptions::default())
                        .map_err(|e| DynamicsError::MotionBreakdown {
                            detail: format!("cycle refinement: {e}"),
                        })?;
                    let cycle_orbit = fam.map.iterate(&z, p - 1)?;
                    let mult = crate::orbit::cycle_multiplier(&fam.map, &cycle_orbit);
                    if mult.norm() <= 1.0 + REPELLING_MARGIN {
                        return Err(DynamicsError::MotionBreakdown {
                            detail: format!(
                                "cycle multiplier |{:.6}| lost repelling-ness",
                                mult.norm()
                            ),
                        });
                    }
                    z
                }
                None => {
                    let succ = self.skeleton.points[i].next;
                    let y = new_pos[succ].ok_or_else(|| DynamicsError::MotionBreakdown {
                        detail: "pullback target not yet continued".into(),
                    })?;
                    one_step_pullback(&fam, &seed, &y).map_err(|e| {
                        DynamicsError::MotionBreakdown {
                            detail: format!("tail pullback: {e}"),
                        }
                    })?
                }
            };
            if chordal(&continued, &seed).value() > inj_radius {
                return Err(DynamicsError::MotionBreakdown {
                    detail: format!(
                        "point {i} moved {:.3e}, beyond the injectivity radius {:.3e}",
                        chordal(&continued, &seed).value(),
                        inj_radius
                    ),
                });
            }
            new_pos[i] = Some(continued);
        }

        for (t, p) in cur.tracks.iter_mut().zip(new_pos.into_iter()) {
            t.continued = p.expect("all indices continued");
        }
        cur.a = target.to_vec();
        cur.path.push(target.to_vec());
        Ok(())
    }

    /// Prepare the full evaluation cache at `a`, warm-starting the motion
    /// from `prev` when given.
    pub fn prepare(&self, a: &[C64], prev: Option<&ContinuedSkeleton>) -> Result<EvalAt> {
        let cont = match prev {
            Some(p) => self.continue_from(p, a, 1 << 20)?,
            None => self.continue_to(a, 1 << 20)?,
        };
        let fam = self.family.at(a)?;
        let labeling = labeled_map_at(self.family, self.base_labeling, a)?;
        Ok(EvalAt {
            fam,
            labeling,
            cont,
        })
    }

    /// Jets (value + parameter gradient) of every continued skeleton point,
    /// by implicit differentiation of the continuation equations.
    pub fn motion_jets(&self, at: &EvalAt) -> Result<Vec<ChartedJet>> {
        let sk_plan = plan(self.skeleton);
        let m = self.family.dimension();
        let mut jets: Vec<Option<ChartedJet>> = vec![None; self.skeleton.points.len()];
        for &i in &sk_plan.order {
            let z = at.cont.tracks[i].continued;
            let chart = z.reporting_chart();
            let jet = match sk_plan.period[i] {
                Some(p) => {
                    // F(z, a) = chart(f^p(z)) - chart(z) = 0.
                    let start = ChartedJet {
                        point: z,
                        chart,
                        value: z.chart_value(chart),
                        grad: vec![C64::new(0.0, 0.0); m],
                    };
                    let (_, end) = orbit_jet(&at.fam, start, p, Some(chart))?;
                    let mut dz_mult = C64::new(1.0, 0.0);
                    {
                        // Space derivative of f^p along the same chart chain.
                        let mut cur = z;
                        let mut c = chart;
                        for s in 0..p {
                            let next = at.fam.map.eval(&cur)?;
                            let nc = if s + 1 == p { chart } else { next.natural_chart() };
                            dz_mult *= at.fam.map.chart_derivative(&cur, c, nc);
                            cur = next;
                            c = nc;
                        }
                    }
                    let denom = dz_mult - C64::new(1.0, 0.0);
                    if denom.norm() < 1e-12 {
                        return Err(DynamicsError::MotionBreakdown {
                            detail: "cycle multiplier too close to 1 for implicit derivative"
                                .into(),
                        });
                    }
                    let grad = end.grad.iter().map(|g| -g / denom).collect();
                    ChartedJet {
                        point: z,
                        chart,
                        value: z.chart_value(chart),
                        grad,
                    }
                }
                None => {
                    // f_a(z) = y(a) with y already differentiated.
                    let succ = self.skeleton.points[i].next;
                    let y_jet = jets[succ].as_ref().expect("successor processed first");
                    let cm = at.fam.charted(chart, y_jet.chart);
                    let u = z.chart_value(chart);
                    let e = cm.dz(u);
                    if e.norm() < 1e-150 {
                        return Err(DynamicsError::MotionBreakdown {
                            detail: "pullback through a critical point".into(),
                        });
                    }
                    let da = cm.da(u);
                    let grad = y_jet
                        .grad
                        .iter()
                        .zip(da.iter())
                        .map(|(dy, df)| (dy - df) / e)
                        .collect();
                    ChartedJet {
                        point: z,
                        chart,
                        value: u,
                        grad,
                    }
                }
            };
            jets[i] = Some(jet);
        }
        Ok(jets.into_iter().map(|j| j.expect("all computed")).collect())
    }

    /// Orbit of the labelled critical point with its jet. The returned jet
    /// is expressed in `final_chart` when given, else in the natural chart
    /// of the end point.
    pub fn xi_jet(
        &self,
        at: &EvalAt,
        label: usize,
        n: usize,
        final_chart: Option<Chart>,
    ) -> Result<(Vec<SpherePoint>, ChartedJet)> {
        let cp = at
            .labeling
            .points
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| DynamicsError::Precondition {
                detail: format!("no critical label {label}"),
            })?;
        let chart = cp.location.natural_chart();
        let grad = at.fam.critical_gradient(&cp.location, chart)?;
        let start = ChartedJet {
            point: cp.location,
            chart,
            value: cp.location.chart_value(chart),
            grad,
        };
        if n == 0 {
            let jet = match final_chart {
                Some(c) => start.convert(c)?,
                None => start,
            };
            return Ok((vec![cp.location], jet));
        }
        orbit_jet(&at.fam, start, n, final_chart)
    }

    /// Plain orbit of a labelled critical point (no gradient).
    pub fn xi_orbit(&self, at: &EvalAt, label: usize, n: usize) -> Result<Vec<SpherePoint>> {
        let cp = at
            .labeling
            .points
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| DynamicsError::Precondition {
                detail: format!("no critical label {label}"),
            })?;
        at.fam.map.iterate(&cp.location, n)
    }

    /// The moved skeleton point `h_a(f_0^n(v_j(0)))`, indexed from the
    /// critical value: requires orbit index `1 + n` to be at or beyond the
    /// skeleton entry of the label.
    pub fn mu_point(&self, at: &EvalAt, label: usize, n: usize) -> Result<SpherePoint> {
        self.moved_orbit_point(at, label, 1 + n)
    }

    /// Moved skeleton point at a raw orbit index (>= the entry offset).
    pub fn moved_orbit_point(
        &self,
        at: &EvalAt,
        label: usize,
        orbit_index: usize,
    ) -> Result<SpherePoint> {
        let entry = self.skeleton.entry_for(label).ok_or_else(|| {
            DynamicsError::Precondition {
                detail: format!("label {label} has no skeleton entry"),
            }
        })?;
        if orbit_index < entry.offset {
            return Err(DynamicsError::Precondition {
                detail: format!(
                    "orbit index {orbit_index} precedes skeleton entry {}",
                    entry.offset
                ),
            });
        }
        let idx = self
            .skeleton
            .step_from(entry.skeleton_index, orbit_index - entry.offset);
        Ok(*at.cont.position(idx))
    }

    /// The parameter function `x_j(a)`: tracked critical value minus its
    /// moved skeleton target, as a chart difference with exact gradient.
    pub fn x_value(&self, at: &EvalAt, label: usize) -> Result<XValue> {
        let entry = self.skeleton.entry_for(label).ok_or_else(|| {
            DynamicsError::Precondition {
                detail: format!("label {label} has no skeleton entry"),
            }
        })?;
        let jets = self.motion_jets(at)?;
        let target = &jets[entry.skeleton_index];
        let (_, xi) = self.xi_jet(at, label, entry.offset, Some(target.chart))?;
        // Exactly zero at the base parameter by construction.
        let value = if param_norm(&at.cont.a) == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            xi.value - target.value
        };
        let grad = xi
            .grad
            .iter()
            .zip(target.grad.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(XValue {
            label,
            offset: entry.offset,
            chart: target.chart,
            value,
            xi_value: xi.value,
            target_value: target.value,
            grad,
        })
    }
}

/// `x_j(a)` with its gradient, in a fixed chart.
#[derive(Debug, Clone)]
pub struct XValue {
    pub label: usize,
    /// Orbit index of the tracked entry (1 when the critical value itself
    /// lies in the skeleton).
    pub offset: usize,
    pub chart: Chart,
    pub value: C64,
    /// Chart value of the tracked critical-value iterate.
    pub xi_value: C64,
    /// Chart value of the moved skeleton target.
    pub target_value: C64,
    pub grad: Vec<C64>,
}

impl XValue {
    /// Re-express the difference in the other chart by converting both
    /// endpoint values (`v -> 1/v`); the gradient is not converted.
    pub fn value_in_chart(&self, chart: Chart) -> Result<C64> {
        if chart == self.chart {
            return Ok(self.value);
        }
        if self.xi_value.norm() < 1e-150 || self.target_value.norm() < 1e-150 {
            return Err(DynamicsError::ChartOverflow);
        }
        Ok(C64::new(1.0, 0.0) / self.xi_value - C64::new(1.0, 0.0) / self.target_value)
    }
}

/// Push a jet forward `steps` times through the frozen family, choosing
/// natural charts en route; the final chart is forced when given. Returns
/// the orbit (including the start) and the end jet.
pub fn orbit_jet(
    fam: &FamilyAt,
    start: ChartedJet,
    steps: usize,
    final_chart: Option<Chart>,
) -> Result<(Vec<SpherePoint>, ChartedJet)> {
    let mut orbit = Vec::with_capacity(steps + 1);
    orbit.push(start.point);
    let mut jet = start;
    for s in 0..steps {
        let image = fam.map.eval(&jet.point)?;
        let dst = if s + 1 == steps {
            final_chart.unwrap_or_else(|| image.natural_chart())
        } else {
            image.natural_chart()
        };
        let cm = fam.charted(jet.chart, dst);
        let e = cm.dz(jet.value);
        let da = cm.da(jet.value);
        let grad: Vec<C64> = jet
            .grad
            .iter()
            .zip(da.iter())
            .map(|(g, d)| e * g + d)
            .collect();
        if !grad.iter().all(|g| g.re.is_finite() && g.im.is_finite()) {
            return Err(DynamicsError::ChartOverflow);
        }
        jet = ChartedJet {
            point: image,
            chart: dst,
            value: image.chart_value(dst),
            grad,
        };
        orbit.push(image);
    }
    Ok((orbit, jet))
}

/// One backward Newton step: solve `f_a(z) = y` near the seed.
fn one_step_pullback(fam: &FamilyAt, seed: &SpherePoint, y: &SpherePoint) -> Result<SpherePoint> {
    crate::orbit::pullback(&fam.map, seed, 1, y, NewtonOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::critical_points;
    use crate::orbit::{
        build_skeleton, classify_critical_orbits, ClassifyOptions, SkeletonOptions,
    };
    use crate::sphere::RationalMap;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// beta(c) = (1 + sqrt(1 - 4c)) / 2, the continued fixed point of z^2 + c.
    fn beta(cv: C64) -> C64 {
        (C64::new(1.0, 0.0) + (C64::new(1.0, 0.0) - 4.0 * cv).sqrt()) / 2.0
    }

    struct Fixture {
        family: ParameterFamily,
        labeling: CriticalLabeling,
        skeleton: PostcriticalSkeleton,
    }

    fn quadratic_fixture() -> Fixture {
        let base =
            RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let family = ParameterFamily::new(base, &[(vec![c(1.0, 0.0)], vec![])], 0.5).unwrap();
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

    fn sphere_fixture() -> Fixture {
        let base = RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let family = ParameterFamily::new(
            base,
            &[
                (vec![c(0.0, 0.0), c(1.0, 0.0)], vec![]),
                (vec![], vec![c(1.0, 0.0)]),
            ],
            0.1,
        )
        .unwrap();
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

    #[test]
    fn continuation_at_zero_returns_base_points() {
        let fx = quadratic_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let cont = ctx.continue_to(&[c(0.0, 0.0)], 1 << 20).unwrap();
        for t in &cont.tracks {
            assert_eq!(
                chordal(&t.base, &t.continued).value(),
                0.0,
                "base parameter must reproduce base points exactly"
            );
        }
    }

    #[test]
    fn continuation_matches_beta_closed_form() {
        let fx = quadratic_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let a = c(0.01, 0.02);
        let cont = ctx.continue_to(&[a], 1 << 20).unwrap();
        let cv = c(-2.0, 0.0) + a;
        let b = beta(cv);
        // Skeleton {-2, 2}: the fixed point continues to beta(c), the
        // preimage to -beta(c).
        for t in &cont.tracks {
            let expect =
                if chordal(&t.base, &SpherePoint::from_affine(c(2.0, 0.0))).value() < 1e-9 {
                    b
                } else {
                    -b
                };
            let got = t.continued.to_affine().unwrap();
            assert!((got - expect).norm() < 1e-10, "{got} vs {expect}");
            assert!(t.conjugacy_residual <= 1e-10);
        }
    }

    #[test]
    fn continuation_is_path_reversible() {
        let fx = sphere_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let a = [c(0.02, 0.01), c(-0.01, 0.015)];
        let out = ctx.continue_to(&a, 1 << 20).unwrap();
        let back = ctx
            .continue_from(&out, &[c(0.0, 0.0), c(0.0, 0.0)], 1 << 20)
            .unwrap();
        for t in &back.tracks {
            assert!(chordal(&t.base, &t.continued).value() <= 1e-10);
        }
    }

    #[test]
    fn conjugacy_residual_small_on_parameter_grid() {
        let fx = sphere_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        for dir in crate::sampling::unit_directions(2, 25) {
            let a: Vec<C64> = dir.iter().map(|v| v * 0.04).collect();
            let cont = ctx.continue_to(&a, 1 << 20).unwrap();
            assert!(
                cont.max_conjugacy_residual() <= 1e-10,
                "residual {:.3e} at |a| = 0.04",
                cont.max_conjugacy_residual()
            );
        }
    }

    #[test]
    fn xi_jet_matches_polynomial_derivatives() {
        let fx = quadratic_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let at = ctx.prepare(&[c(0.0, 0.0)], None).unwrap();
        // Label of the finite critical point.
        let label = fx
            .labeling
            .points
            .iter()
            .find(|p| !p.location.is_infinity())
            .unwrap()
            .label;
        // xi_2(c) = c^2 + c, gradient 2c + 1 -> -3 at c = -2.
        let (_, jet2) = ctx.xi_jet(&at, label, 2, Some(Chart::Affine)).unwrap();
        assert!((jet2.value - c(2.0, 0.0)).norm() < 1e-12);
        assert!((jet2.grad[0] - c(-3.0, 0.0)).norm() < 1e-10);
        // xi_3 = (c^2+c)^2 + c, gradient 2(c^2+c)(2c+1) + 1 = -11 at c = -2.
        let (_, jet3) = ctx.xi_jet(&at, label, 3, Some(Chart::Affine)).unwrap();
        assert!((jet3.value - c(2.0, 0.0)).norm() < 1e-12);
        assert!((jet3.grad[0] - c(-11.0, 0.0)).norm() < 1e-10);
        // n = 0: the critical point itself, gradient dc/da = 0.
        let (orbit0, jet0) = ctx.xi_jet(&at, label, 0, None).unwrap();
        assert_eq!(orbit0.len(), 1);
        assert!(jet0.grad[0].norm() < 1e-14);
    }

    #[test]
    fn xi_jet_matches_central_differences() {
        let fx = sphere_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let a = [c(0.013, 0.004), c(-0.008, 0.006)];
        let at = ctx.prepare(&a, None).unwrap();
        let h = 1e-6;
        for label in fx.skeleton.julia_labels.clone() {
            let n = 6;
            let (_, jet) = ctx.xi_jet(&at, label, n, Some(Chart::Affine)).unwrap();
            for i in 0..2 {
                let mut ap = a.to_vec();
                let mut am = a.to_vec();
                ap[i] += c(h, 0.0);
                am[i] -= c(h, 0.0);
                let atp = ctx.prepare(&ap, None).unwrap();
                let atm = ctx.prepare(&am, None).unwrap();
                let vp = ctx
                    .xi_jet(&atp, label, n, Some(Chart::Affine))
                    .unwrap()
                    .1
                    .value;
                let vm = ctx
                    .xi_jet(&atm, label, n, Some(Chart::Affine))
                    .unwrap()
                    .1
                    .value;
                let fd = (vp - vm) / c(2.0 * h, 0.0);
                let rel = (fd - jet.grad[i]).norm() / jet.grad[i].norm().max(1e-9);
                assert!(rel < 1e-5, "label {label} dir {i}: {fd} vs {}", jet.grad[i]);
            }
        }
    }

    #[test]
    fn x_value_zero_at_base_and_beta_slope() {
        let fx = quadratic_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];

        let at0 = ctx.prepare(&[c(0.0, 0.0)], None).unwrap();
        let x0 = ctx.x_value(&at0, label).unwrap();
        assert_eq!(x0.value, c(0.0, 0.0));
        assert_eq!(x0.offset, 1);
        // x'(0) = 1 + beta'(-2) = 1 - 1/3 = 2/3.
        assert!(
            (x0.grad[0] - c(2.0 / 3.0, 0.0)).norm() < 1e-10,
            "{}",
            x0.grad[0]
        );

        // Off-center value against the closed form x(a) = a + beta(-2 + a).
        let a = c(-0.01, 0.0);
        let at = ctx.prepare(&[a], None).unwrap();
        let x = ctx.x_value(&at, label).unwrap();
        let expect = c(-2.0, 0.0) + a + beta(c(-2.0, 0.0) + a);
        assert!((x.value - expect).norm() < 1e-11, "{} vs {expect}", x.value);
    }

    #[test]
    fn mu_points_continue_the_fixed_point() {
        let fx = quadratic_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let label = fx.skeleton.julia_labels[0];
        let a = c(0.015, -0.01);
        let at = ctx.prepare(&[a], None).unwrap();
        // mu_0 = h_a(v(0)) = h_a(-2) = -beta; mu_n = beta for n >= 1.
        let b = beta(c(-2.0, 0.0) + a);
        let mu0 = ctx.mu_point(&at, label, 0).unwrap().to_affine().unwrap();
        assert!((mu0 + b).norm() < 1e-10);
        for n in 1..=3 {
            let mun = ctx.mu_point(&at, label, n).unwrap().to_affine().unwrap();
            assert!((mun - b).norm() < 1e-10);
        }
        // At a = 0 the point is the base orbit point itself.
        let at0 = ctx.prepare(&[c(0.0, 0.0)], None).unwrap();
        let mu0 = ctx.mu_point(&at0, label, 0).unwrap();
        assert!(chordal(&mu0, &SpherePoint::from_affine(c(-2.0, 0.0))).value() == 0.0);
    }

    #[test]
    fn motion_jets_match_finite_differences() {
        let fx = sphere_fixture();
        let ctx = MotionContext::new(&fx.family, &fx.labeling, &fx.skeleton);
        let a = [c(0.01, 0.005), c(-0.012, 0.003)];
        let at = ctx.prepare(&a, None).unwrap();
        let jets = ctx.motion_jets(&at).unwrap();
        let h = 1e-6;
        for (idx, jet) in jets.iter().enumerate() {
            for i in 0..2 {
                let mut ap = a.to_vec();
                let mut am = a.to_vec();
                ap[i] += c(h, 0.0);
                am[i] -= c(h, 0.0);
                let cp = ctx.prepare(&ap, None).unwrap();
                let cm = ctx.prepare(&am, None).unwrap();
                let vp = cp.cont.position(idx).chart_value(jet.chart);
                let vm = cm.cont.position(idx).chart_value(jet.chart);
                let fd = (vp - vm) / c(2.0 * h, 0.0);
                assert!(
                    (fd - jet.grad[i]).norm() < 1e-6,
                    "point {idx} dir {i}: {fd} vs {}",
                    jet.grad[i]
                );
            }
        }
    }
}
