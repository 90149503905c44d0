//! Cycle detection and classification, Misiurewicz certification, the
//! postcritical skeleton with its expansion constants, and the
//! Collet-Eckmann growth check.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec::Vec;

use crate::critical::CriticalLabeling;
use crate::error::{DynamicsError, Result};
use crate::sampling;
use crate::sphere::{chordal, Chart, RationalMap, SpherePoint};
use crate::C64;

/// `|multiplier|` at or below this is superattracting.
pub const SUPERATTRACTING_TOL: f64 = 1e-8;
/// Band around `|multiplier| = 1` classified as indifferent.
pub const INDIFFERENT_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    Superattracting,
    Attracting,
    Repelling,
    Indifferent,
}

/// A refined periodic cycle.
#[derive(Debug, Clone)]
pub struct CycleInfo {
    pub points: Vec<SpherePoint>,
    pub period: usize,
    pub multiplier: C64,
    pub kind: CycleKind,
}

impl CycleInfo {
    pub fn classify(multiplier: C64) -> CycleKind {
        let m = multiplier.norm();
        if m <= SUPERATTRACTING_TOL {
            CycleKind::Superattracting
        } else if m < 1.0 - INDIFFERENT_BAND {
            CycleKind::Attracting
        } else if m > 1.0 + INDIFFERENT_BAND {
            CycleKind::Repelling
        } else {
            CycleKind::Indifferent
        }
    }

    /// Chordal distance from `p` to the nearest cycle point, with its index.
    pub fn nearest(&self, p: &SpherePoint) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = chordal(p, q).value();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Multiplier of a period-`p` orbit through `points[0]`: the product of
/// chart-to-chart derivatives along the cycle, closing in the start chart.
pub fn cycle_multiplier(map: &RationalMap, points: &[SpherePoint]) -> C64 {
    let p = points.len();
    let start = points[0].natural_chart();
    let mut mult = C64::new(1.0, 0.0);
    for i in 0..p {
        let src = if i == 0 { start } else { points[i].natural_chart() };
        let dst = if i + 1 == p {
            start
        } else {
            points[i + 1].natural_chart()
        };
        mult *= map.chart_derivative(&points[i], src, dst);
    }
    mult
}

/// Forward-orbit evaluation with the chart-chain derivative: returns the
/// end point and `d(chart_dst . f^steps . chart_src^-1)` at the seed.
fn orbit_with_derivative(
    map: &RationalMap,
    from: SpherePoint,
    steps: usize,
    src: Chart,
    dst: Chart,
) -> Result<(SpherePoint, C64)> {
    let mut cur = from;
    let mut deriv = C64::new(1.0, 0.0);
    let mut chart = src;
    for i in 0..steps {
        let next = map.eval(&cur)?;
        let next_chart = if i + 1 == steps {
            dst
        } else {
            next.natural_chart()
        };
        deriv *= map.chart_derivative(&cur, chart, next_chart);
        cur = next;
        chart = next_chart;
    }
    Ok((cur, deriv))
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when a step moves the chart coordinate further than this.
    pub max_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 80,
            max_step: 0.5,
        }
    }
}

/// Newton refinement of a periodic point: solve `f^period(x) = x` from the
/// seed, in the seed's natural chart.
pub fn refine_periodic(
    map: &RationalMap,
    seed: &SpherePoint,
    period: usize,
    opts: NewtonOptions,
) -> Result<SpherePoint> {
    let chart = seed.natural_chart();
    let mut u = seed.chart_value(chart);
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let p = SpherePoint::from_chart(chart, u);
        let (end, deriv) = orbit_with_derivative(map, p, period, chart, chart)?;
        let f = end.chart_value(chart) - u;
        last_residual = chordal(&end, &p).value();
        if last_residual <= opts.tol {
            return Ok(p);
        }
        let fp = deriv - C64::new(1.0, 0.0);
        if fp.norm() < 1e-300 || !(f.re.is_finite() && f.im.is_finite()) {
            return Err(DynamicsError::NewtonDivergence {
                residual: last_residual,
            });
        }
        let step = f / fp;
        if step.norm() > opts.max_step {
            return Err(DynamicsError::NewtonDivergence {
                residual: last_residual,
            });
        }
        u -= step;
    }
    Err(DynamicsError::NewtonDivergence {
        residual: last_residual,
    })
}

/// Newton pullback: solve `f^steps(x) = target` from the seed, choosing the
/// branch the seed lies on. `steps = 0` returns the target itself.
pub fn pullback(
    map: &RationalMap,
    seed: &SpherePoint,
    steps: usize,
    target: &SpherePoint,
    opts: NewtonOptions,
) -> Result<SpherePoint> {
    if steps == 0 {
        return Ok(*target);
    }
    let chart = seed.natural_chart();
    let tchart = target.natural_chart();
    let t = target.chart_value(tchart);
    let mut u = seed.chart_value(chart);
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let p = SpherePoint::from_chart(chart, u);
        let (end, deriv) = orbit_with_derivative(map, p, steps, chart, tchart)?;
        let f = end.chart_value(tchart) - t;
        last_residual = chordal(&end, target).value();
        if last_residual <= opts.tol {
            return Ok(p);
        }
        if deriv.norm() < 1e-300 || !(f.re.is_finite() && f.im.is_finite()) {
            return Err(DynamicsError::NewtonDivergence {
                residual: last_residual,
            });
        }
        let step = f / deriv;
        if step.norm() > opts.max_step {
            return Err(DynamicsError::NewtonDivergence {
                residual: last_residual,
            });
        }
        u -= step;
    }
    Err(DynamicsError::NewtonDivergence {
        residual: last_residual,
    })
}

/// Build the refined cycle through a refined periodic point, reducing to the
/// minimal period.
fn cycle_through(
    map: &RationalMap,
    point: &SpherePoint,
    period: usize,
    tol: f64,
) -> Result<CycleInfo> {
    let orbit = map.iterate(point, period)?;
    let mut true_period = period;
    for q in 1..=period / 2 {
        if period % q == 0 && chordal(&orbit[q], point).value() <= tol.max(1e-11) {
            true_period = q;
            break;
        }
    }
    let points: Vec<SpherePoint> = orbit.into_iter().take(true_period).collect();
    let multiplier = cycle_multiplier(map, &points);
    Ok(CycleInfo {
        kind: CycleInfo::classify(multiplier),
        points,
        period: true_period,
        multiplier,
    })
}

/// Detect whether the orbit of `p0` enters a cycle within `max_iter` steps.
///
/// A chordal window match proposes the period; Newton refinement against
/// `f^p(x) = x` then pins the cycle to residual `<= 1e-12` or fails with
/// [`DynamicsError::NewtonDivergence`].
pub fn detect_cycle(
    map: &RationalMap,
    p0: &SpherePoint,
    max_iter: usize,
    tol: f64,
) -> Result<Option<CycleInfo>> {
    let orbit = match map.iterate(p0, max_iter) {
        Ok(o) => o,
        Err(DynamicsError::DegenerateImage) => return Ok(None),
        Err(e) => return Err(e),
    };
    let last = orbit.len() - 1;
    let max_period = (orbit.len() / 2).max(1);
    for p in 1..=max_period {
        if last < 2 * p {
            break;
        }
        let mut windows_match = true;
        for i in 0..p {
            if chordal(&orbit[last - i], &orbit[last - p - i]).value() > tol {
                windows_match = false;
                break;
            }
        }
        if !windows_match {
            continue;
        }
        let seed = orbit[last - p];
        let refined = refine_periodic(map, &seed, p, NewtonOptions::default())?;
        let info = cycle_through(map, &refined, p, 1e-11)?;
        return Ok(Some(info));
    }
    Ok(None)
}

/// How one critical orbit relates to a cycle.
#[derive(Debug, Clone)]
pub struct PreperiodicityReport {
    pub label: usize,
    /// First orbit index on (or within the landing tolerance of) the cycle.
    pub preperiod: usize,
    pub cycle: CycleInfo,
    pub landing_residual: f64,
    /// Whether a Newton pullback confirmed the landing as exactly
    /// preperiodic (only meaningful for repelling cycles).
    pub confirmed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Misiurewicz,
    HyperbolicLike,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub reports: Vec<Option<PreperiodicityReport>>,
    pub verdict: Verdict,
}

impl Classification {
    /// Labels whose orbit lands on a repelling cycle (the Julia-side,
    /// "free" critical points).
    pub fn free_labels(&self) -> Vec<usize> {
        self.reports
            .iter()
            .flatten()
            .filter(|r| r.cycle.kind == CycleKind::Repelling)
            .map(|r| r.label)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub preperiod_budget: usize,
    pub period_budget: usize,
    pub landing_tol: f64,
    pub window_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            preperiod_budget: 200,
            period_budget: 64,
            landing_tol: 1e-9,
            window_tol: 1e-6,
        }
    }
}

/// Classify every critical orbit.
///
/// Verdict rules: `HyperbolicLike` when every critical orbit converges to an
/// attracting or superattracting cycle; `Misiurewicz` when at least one
/// critical orbit lands (confirmed) on a repelling cycle and every other
/// orbit is either such a landing or sits in an attracting basin, with no
/// indifferent cycle found; `Undecided` otherwise. Failures inside a single
/// orbit degrade the verdict rather than erroring.
pub fn classify_critical_orbits(
    map: &RationalMap,
    lab: &CriticalLabeling,
    opts: ClassifyOptions,
) -> Classification {
    let mut reports: Vec<Option<PreperiodicityReport>> = Vec::new();
    for cp in &lab.points {
        reports.push(classify_single_orbit(map, cp.label, &cp.location, opts));
    }

    let mut any_repelling = false;
    let mut verdict = Verdict::HyperbolicLike;
    for r in &reports {
        match r {
            None => {
                verdict = Verdict::Undecided;
                break;
            }
            Some(rep) => match rep.cycle.kind {
                CycleKind::Indifferent => {
                    verdict = Verdict::Undecided;
                    break;
                }
                CycleKind::Repelling => {
                    if !rep.confirmed {
                        verdict = Verdict::Undecided;
                        break;
                    }
                    any_repelling = true;
                }
                CycleKind::Attracting | CycleKind::Superattracting => {}
            },
        }
    }
    if verdict != Verdict::Undecided && any_repelling {
        verdict = Verdict::Misiurewicz;
    }
    Classification { reports, verdict }
}

fn classify_single_orbit(
    map: &RationalMap,
    label: usize,
    c: &SpherePoint,
    opts: ClassifyOptions,
) -> Option<PreperiodicityReport> {
    let budget = opts.preperiod_budget + 2 * opts.period_budget;
    let orbit = map.iterate(c, budget).ok()?;
    let cycle = detect_cycle(map, c, budget, opts.window_tol).ok()??;

    // First orbit index within landing tolerance of the refined cycle.
    let mut preperiod = None;
    let mut residual = f64::INFINITY;
    for (k, p) in orbit.iter().enumerate().take(opts.preperiod_budget + 1) {
        let (_, d) = cycle.nearest(p);
        if d <= opts.landing_tol {
            preperiod = Some(k);
            residual = d;
            break;
        }
    }
    let preperiod = preperiod?;

    let confirmed = match cycle.kind {
        CycleKind::Repelling => confirm_landing(map, &orbit, preperiod, &cycle, opts.landing_tol),
        _ => true,
    };

    Some(PreperiodicityReport {
        label,
        preperiod,
        cycle,
        landing_residual: residual,
        confirmed,
    })
}

/// Distinguish an exact preperiodic landing from a slow passage: pull the
/// landed cycle point back `preperiod - 1` steps and compare with the
/// critical value. The pullback starts at the critical value rather than the
/// critical point so the Newton derivative is nonzero.
fn confirm_landing(
    map: &RationalMap,
    orbit: &[SpherePoint],
    preperiod: usize,
    cycle: &CycleInfo,
    landing_tol: f64,
) -> bool {
    if preperiod == 0 {
        // A critical point exactly on a repelling cycle is numerically
        // inconsistent (the multiplier would vanish there).
        return false;
    }
    let (ci, _) = cycle.nearest(&orbit[preperiod]);
    let target = cycle.points[ci];
    let steps = preperiod - 1;
    match pullback(map, &orbit[1], steps, &target, NewtonOptions::default()) {
        Ok(z) => chordal(&z, &orbit[1]).value() <= landing_tol,
        Err(_) => false,
    }
}

/// One point of the postcritical skeleton with its forward successor.
#[derive(Debug, Clone, Copy)]
pub struct SkeletonPoint {
    pub point: SpherePoint,
    pub next: usize,
    pub on_cycle: bool,
}

/// Where the orbit of a critical label enters the skeleton.
#[derive(Debug, Clone, Copy)]
pub struct SkeletonEntry {
    pub label: usize,
    /// Orbit index of the entry point (the truncation offset `k_j`).
    pub offset: usize,
    pub skeleton_index: usize,
}

/// The finite postcritical set beyond the truncation `k`, with the
/// hyperbolicity constants read off from it.
#[derive(Debug, Clone)]
pub struct PostcriticalSkeleton {
    pub points: Vec<SkeletonPoint>,
    pub cycles: Vec<CycleInfo>,
    pub k: usize,
    /// Expansion constant: `min |(f^N)'|^(1/N) > 1` over the skeleton.
    pub lambda: f64,
    /// The `N` realising `lambda`.
    pub expansion_power: usize,
    /// Radius of the critical neighbourhood `U`.
    pub delta: f64,
    /// Radius of the skeleton neighbourhood.
    pub delta_prime: f64,
    pub entries: Vec<SkeletonEntry>,
    /// Labels whose orbits land on repelling cycles.
    pub julia_labels: Vec<usize>,
    /// Max spherical derivative over a global sphere sample.
    pub max_spherical_derivative: f64,
    /// Min chordal distance from the skeleton to the Julia-side critical points.
    pub crit_distance: f64,
}

impl PostcriticalSkeleton {
    /// Skeleton index reached from `start` after `n` forward steps.
    pub fn step_from(&self, start: usize, n: usize) -> usize {
        let mut idx = start;
        for _ in 0..n {
            idx = self.points[idx].next;
        }
        idx
    }

    pub fn entry_for(&self, label: usize) -> Option<&SkeletonEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Minimum pairwise chordal separation of skeleton points.
    pub fn min_separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                sep = sep.min(chordal(&self.points[i].point, &self.points[j].point).value());
            }
        }
        sep
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SkeletonOptions {
    pub k_budget: usize,
    /// Required clearance between the skeleton and every critical point.
    pub crit_clearance: f64,
    pub expansion_power_max: usize,
    /// Samples per skeleton point and radius when certifying expansion.
    pub cap_samples: usize,
    pub dedup_tol: f64,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        SkeletonOptions {
            k_budget: 16,
            crit_clearance: 1e-3,
            expansion_power_max: 32,
            cap_samples: 80,
            dedup_tol: 1e-9,
        }
    }
}

/// Build the postcritical skeleton for a certified Misiurewicz map: the
/// smallest truncation `k` for which the tail orbits stay clear of the
/// critical set and carry uniform expansion.
pub fn build_skeleton(
    map: &RationalMap,
    lab: &CriticalLabeling,
    classification: &Classification,
    opts: SkeletonOptions,
) -> Result<PostcriticalSkeleton> {
    if classification.verdict != Verdict::Misiurewicz {
        return Err(DynamicsError::Precondition {
            detail: "skeleton requires a Misiurewicz verdict".into(),
        });
    }
    let julia: Vec<&PreperiodicityReport> = classification
        .reports
        .iter()
        .flatten()
        .filter(|r| r.cycle.kind == CycleKind::Repelling)
        .collect();
    let julia_labels: Vec<usize> = julia.iter().map(|r| r.label).collect();
    let julia_crit: Vec<SpherePoint> = lab
        .points
        .iter()
        .filter(|p| julia_labels.contains(&p.label))
        .map(|p| p.location)
        .collect();
    let all_crit: Vec<SpherePoint> = lab.locations();

    // Tail orbits: exact orbit points up to the landing, then the refined cycle.
    let mut tails: Vec<(usize, Vec<SpherePoint>, &CycleInfo)> = Vec::new();
    for rep in &julia {
        let start = lab
            .points
            .iter()
            .find(|p| p.label == rep.label)
            .expect("label present")
            .location;
        let orbit = map.iterate(&start, rep.preperiod)?;
        tails.push((rep.label, orbit, &rep.cycle));
    }

    for k in 0..=opts.k_budget {
        if let Some(mut skel) = try_skeleton_at(map, k, &tails, &julia_crit, &all_crit, &opts) {
            skel.julia_labels = julia_labels.clone();
            skel.max_spherical_derivative = max_spherical_derivative(map);
            attach_entries(&mut skel, &tails, opts.dedup_tol)?;
            return Ok(skel);
        }
    }
    Err(DynamicsError::NotHyperbolicSet)
}

fn try_skeleton_at(
    map: &RationalMap,
    k: usize,
    tails: &[(usize, Vec<SpherePoint>, &CycleInfo)],
    julia_crit: &[SpherePoint],
    all_crit: &[SpherePoint],
    opts: &SkeletonOptions,
) -> Option<PostcriticalSkeleton> {
    // Candidate points: orbit indices n > k before the landing, plus the
    // full refined cycles.
    let mut raw: Vec<SpherePoint> = Vec::new();
    for (_, orbit, cycle) in tails {
        for (n, p) in orbit.iter().enumerate() {
            if n > k {
                raw.push(*p);
            }
        }
        raw.extend(cycle.points.iter().copied());
    }
    if raw.is_empty() {
        return None;
    }
    let mut points: Vec<SpherePoint> = Vec::new();
    for p in raw {
        if !points.iter().any(|q| chordal(q, &p).value() <= opts.dedup_tol) {
            points.push(p);
        }
    }

    // Clearance from the critical set.
    let mut crit_distance = f64::INFINITY;
    for p in &points {
        for c in all_crit {
            if chordal(p, c).value() < opts.crit_clearance {
                return None;
            }
        }
        for c in julia_crit {
            crit_distance = crit_distance.min(chordal(p, c).value());
        }
    }

    // Successor structure (forward invariance).
    let mut nexts: Vec<usize> = Vec::with_capacity(points.len());
    for p in &points {
        let image = map.eval(p).ok()?;
        let (idx, d) = nearest_point(&points, &image);
        if d > 1e-8 {
            return None;
        }
        nexts.push(idx);
    }
    let on_cycle = cycle_membership(&nexts);

    // Expansion constant: least N with min |(f^N)'|^(1/N) > 1.
    let mut lambda = 0.0;
    let mut expansion_power = 0;
    for n_pow in 1..=opts.expansion_power_max {
        let mut min_rate = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let mut prod = 1.0;
            let mut idx = i;
            let mut cur = *p;
            for _ in 0..n_pow {
                prod *= map.spherical_derivative(&cur);
                idx = nexts[idx];
                cur = points[idx];
            }
            min_rate = min_rate.min(prod.powf(1.0 / n_pow as f64));
        }
        if min_rate > 1.0 {
            lambda = min_rate;
            expansion_power = n_pow;
            break;
        }
    }
    if expansion_power == 0 {
        return None;
    }

    // delta' by bisection: uniform expansion of |(f^N)'| >= lambda^N / 2 on
    // sampled chordal caps (the pointwise form |f'| >= lambda/2 when N = 1).
    let dp_cap = (crit_distance / 2.0).min(0.5);
    let target = lambda.powi(expansion_power as i32) / 2.0;
    let expansion_holds = |radius: f64| -> bool {
        for p in &points {
            for s in sampling::chordal_cap(p, radius, opts.cap_samples) {
                let mut prod = 1.0;
                let mut cur = s;
                for _ in 0..expansion_power {
                    prod *= map.spherical_derivative(&cur);
                    match map.eval(&cur) {
                        Ok(next) => cur = next,
                        Err(_) => return false,
                    }
                }
                if prod < target {
                    return false;
                }
            }
        }
        true
    };
    let mut lo = 0.0;
    let mut hi = dp_cap;
    if expansion_holds(hi) {
        lo = hi;
    } else {
        for _ in 0..24 {
            let mid = (lo + hi) / 2.0;
            if mid <= 0.0 {
                break;
            }
            if expansion_holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let delta_prime = lo;
    if !(delta_prime > 0.0) {
        return None;
    }
    let delta = (crit_distance - delta_prime).min(0.4999);
    if !(delta > 0.0) {
        return None;
    }

    let cycles: Vec<CycleInfo> = tails.iter().map(|(_, _, c)| (*c).clone()).collect();
    let skeleton_points: Vec<SkeletonPoint> = points
        .iter()
        .zip(nexts.iter())
        .zip(on_cycle.iter())
        .map(|((p, n), oc)| SkeletonPoint {
            point: *p,
            next: *n,
            on_cycle: *oc,
        })
        .collect();

    Some(PostcriticalSkeleton {
        points: skeleton_points,
        cycles: dedup_cycles(cycles),
        k,
        lambda,
        expansion_power,
        delta,
        delta_prime,
        entries: Vec::new(),
        julia_labels: Vec::new(),
        max_spherical_derivative: 0.0,
        crit_distance,
    })
}

fn dedup_cycles(cycles: Vec<CycleInfo>) -> Vec<CycleInfo> {
    let mut out: Vec<CycleInfo> = Vec::new();
    for c in cycles {
        let dup = out
            .iter()
            .any(|o| o.period == c.period && o.nearest(&c.points[0]).1 <= 1e-9);
        if !dup {
            out.push(c);
        }
    }
    out
}

fn attach_entries(
    skel: &mut PostcriticalSkeleton,
    tails: &[(usize, Vec<SpherePoint>, &CycleInfo)],
    tol: f64,
) -> Result<()> {
    let pts: Vec<SpherePoint> = skel.points.iter().map(|sp| sp.point).collect();
    for (label, orbit, cycle) in tails {
        let mut found = None;
        for (n, p) in orbit.iter().enumerate().skip(1) {
            let (idx, d) = nearest_point(&pts, p);
            if d <= tol.max(1e-8) {
                found = Some((n, idx));
                break;
            }
        }
        // The landing cycle itself is always in the skeleton.
        if found.is_none() {
            let (idx, d) = nearest_point(&pts, &cycle.points[0]);
            if d <= 1e-8 {
                found = Some((orbit.len().max(1), idx));
            }
        }
        let (offset, skeleton_index) = found.ok_or_else(|| DynamicsError::Precondition {
            detail: format!("orbit of label {label} never enters the skeleton"),
        })?;
        skel.entries.push(SkeletonEntry {
            label: *label,
            offset,
            skeleton_index,
        });
    }
    Ok(())
}

fn nearest_point(points: &[SpherePoint], p: &SpherePoint) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, q) in points.iter().enumerate() {
        let d = chordal(q, p).value();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn cycle_membership(nexts: &[usize]) -> Vec<bool> {
    let n = nexts.len();
    (0..n)
        .map(|start| {
            let mut idx = start;
            for _ in 0..=n {
                idx = nexts[idx];
                if idx == start {
                    return true;
                }
            }
            false
        })
        .collect()
}

/// Max spherical derivative over a deterministic global sphere sample.
pub fn max_spherical_derivative(map: &RationalMap) -> f64 {
    let mut m0: f64 = 0.0;
    for u in sampling::unit_disk(400) {
        m0 = m0.max(map.spherical_derivative(&SpherePoint::from_affine(u)));
        let inv = SpherePoint::from_chart(Chart::Inverted, u);
        m0 = m0.max(map.spherical_derivative(&inv));
    }
    m0
}

/// Derivative growth along the critical value orbit:
/// `(n, |(f^n)'(f(c))|)` for `n = 1..=n_max` (spherical cocycle), with the
/// least-squares exponential rate of the log-magnitudes.
pub fn ce_growth(
    map: &RationalMap,
    critical_point: &SpherePoint,
    n_max: usize,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let v = map.eval(critical_point)?;
    let orbit = map.iterate(&v, n_max)?;
    let mut values = Vec::with_capacity(n_max);
    let mut prod = 1.0;
    for n in 1..=n_max {
        prod *= map.spherical_derivative(&orbit[n - 1]);
        values.push((n, prod));
    }
    let rate = if values.len() >= 2 {
        let pts: Vec<(f64, f64)> = values
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(n, v)| (*n as f64, v.ln()))
            .collect();
        least_squares_slope(&pts)
    } else {
        0.0
    };
    Ok((values, rate))
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::critical_points;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn map_z2() -> RationalMap {
        RationalMap::new(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap()
    }

    fn map_tip() -> RationalMap {
        RationalMap::new(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap()
    }

    fn map_sphere() -> RationalMap {
        RationalMap::new(
            &[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn detect_fixed_points() {
        let f = map_tip();
        let info = detect_cycle(&f, &SpherePoint::from_affine(c(2.0, 0.0)), 50, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(info.period, 1);
        assert!((info.multiplier - c(4.0, 0.0)).norm() < 1e-12);
        assert_eq!(info.kind, CycleKind::Repelling);

        let g = map_sphere();
        let info = detect_cycle(&g, &SpherePoint::from_affine(c(-1.0, 0.0)), 50, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(info.period, 1);
        assert!((info.multiplier - c(-4.0, 0.0)).norm() < 1e-12);

        let s = map_z2();
        let info = detect_cycle(&s, &SpherePoint::zero(), 50, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(info.period, 1);
        assert!(info.multiplier.norm() < 1e-14);
        assert_eq!(info.kind, CycleKind::Superattracting);
    }

    #[test]
    fn refined_cycles_close_to_tolerance() {
        // z^2 - 1: the superattracting 2-cycle {0, -1}, seeded off-cycle.
        let f =
            RationalMap::new(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        let info = detect_cycle(&f, &SpherePoint::from_affine(c(0.3, 0.2)), 100, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(info.period, 2);
        for (i, p) in info.points.iter().enumerate() {
            let img = f.eval(p).unwrap();
            let next = &info.points[(i + 1) % info.period];
            assert!(chordal(&img, next).value() <= 1e-12);
        }
    }

    #[test]
    fn classify_flagships() {
        let f = map_tip();
        let lab = critical_points(&f).unwrap();
        let cls = classify_critical_orbits(&f, &lab, ClassifyOptions::default());
        assert_eq!(cls.verdict, Verdict::Misiurewicz);
        let rep = cls
            .reports
            .iter()
            .flatten()
            .find(|r| r.cycle.kind == CycleKind::Repelling)
            .unwrap();
        assert_eq!((rep.preperiod, rep.cycle.period), (2, 1));
        assert!((rep.cycle.multiplier - c(4.0, 0.0)).norm() < 1e-12);
        assert!(rep.confirmed);

        let g = map_sphere();
        let lab = critical_points(&g).unwrap();
        let cls = classify_critical_orbits(&g, &lab, ClassifyOptions::default());
        assert_eq!(cls.verdict, Verdict::Misiurewicz);
        let mut preperiods: Vec<usize> =
            cls.reports.iter().flatten().map(|r| r.preperiod).collect();
        preperiods.sort_unstable();
        assert_eq!(preperiods, vec![2, 3]);
        for r in cls.reports.iter().flatten() {
            assert!((r.cycle.multiplier - c(-4.0, 0.0)).norm() < 1e-12);
            assert_eq!(r.cycle.period, 1);
        }

        let s = map_z2();
        let lab = critical_points(&s).unwrap();
        let cls = classify_critical_orbits(&s, &lab, ClassifyOptions::default());
        assert_eq!(cls.verdict, Verdict::HyperbolicLike);
    }

    #[test]
    fn classify_stable_under_tolerance_halving() {
        for map in [map_tip(), map_sphere()] {
            let lab = critical_points(&map).unwrap();
            let base = classify_critical_orbits(&map, &lab, ClassifyOptions::default());
            let halved = ClassifyOptions {
                landing_tol: 0.5e-9,
                window_tol: 0.5e-6,
                ..Default::default()
            };
            let tighter = classify_critical_orbits(&map, &lab, halved);
            assert_eq!(base.verdict, tighter.verdict);
        }
    }

    #[test]
    fn skeleton_of_tip() {
        let f = map_tip();
        let lab = critical_points(&f).unwrap();
        let cls = classify_critical_orbits(&f, &lab, ClassifyOptions::default());
        let skel = build_skeleton(&f, &lab, &cls, SkeletonOptions::default()).unwrap();
        // {-2, 2}: the critical value is in the skeleton; entry offset 1.
        assert_eq!(skel.points.len(), 2);
        assert!((skel.lambda - 4.0).abs() < 1e-9);
        assert_eq!(skel.expansion_power, 1);
        // delta + delta' below the distance to the Julia critical point 0:
        // chordal(0, 2) = 4 / sqrt(5).
        let bound = 4.0 / 5.0f64.sqrt();
        assert!(skel.delta + skel.delta_prime < bound);
        assert!(skel.delta > 0.0 && skel.delta < 0.5);
        let entry = skel.entries.first().unwrap();
        assert_eq!(entry.offset, 1);

        // Forward invariance at tight tolerance.
        for sp in &skel.points {
            let img = f.eval(&sp.point).unwrap();
            assert!(chordal(&img, &skel.points[sp.next].point).value() <= 1e-10);
        }
    }

    #[test]
    fn skeleton_of_sphere_flagship() {
        let g = map_sphere();
        let lab = critical_points(&g).unwrap();
        let cls = classify_critical_orbits(&g, &lab, ClassifyOptions::default());
        let skel = build_skeleton(&g, &lab, &cls, SkeletonOptions::default()).unwrap();
        // {1, -1}; infinity (a critical point) forces k >= 1.
        assert_eq!(skel.points.len(), 2);
        assert!(skel.k >= 1);
        assert!((skel.lambda - 4.0).abs() < 1e-9);
        for sp in &skel.points {
            assert!((g.spherical_derivative(&sp.point) - 4.0).abs() < 1e-9);
        }
        let mut offsets: Vec<usize> = skel.entries.iter().map(|e| e.offset).collect();
        offsets.sort_unstable();
        assert_eq!(offsets, vec![1, 2]);
        assert!(skel.cycles.iter().all(|cy| cy.kind == CycleKind::Repelling));
    }

    #[test]
    fn skeleton_blocked_by_zero_budget() {
        // With k_budget = 0 the sphere flagship skeleton would contain the
        // critical point at infinity.
        let g = map_sphere();
        let lab = critical_points(&g).unwrap();
        let cls = classify_critical_orbits(&g, &lab, ClassifyOptions::default());
        let opts = SkeletonOptions {
            k_budget: 0,
            ..Default::default()
        };
        assert!(matches!(
            build_skeleton(&g, &lab, &cls, opts),
            Err(DynamicsError::NotHyperbolicSet)
        ));
    }

    #[test]
    fn ce_growth_rates() {
        let f = map_tip();
        let (values, rate) = ce_growth(&f, &SpherePoint::zero(), 12).unwrap();
        // Orbit pinned at the fixed point 2 with |f'| = 4: values 4, 16, 64, ...
        assert!((values[0].1 - 4.0).abs() < 1e-12);
        assert!((values[1].1 - 16.0).abs() < 1e-12);
        assert!((values[2].1 - 64.0).abs() < 1e-9);
        assert!((rate - 4.0f64.ln()).abs() < 1e-9);

        let g = map_sphere();
        let (_, rate) = ce_growth(&g, &SpherePoint::infinity(), 12).unwrap();
        assert!((rate - 4.0f64.ln()).abs() < 1e-6);

        let (empty, _) = ce_growth(&f, &SpherePoint::zero(), 0).unwrap();
        assert!(empty.is_empty());
    }
}
