//! The constructive core: grow critical orbits to a large scale inside the
//! skeleton neighbourhood, find covering times, solve the closing equations
//! `xi_{n+m,j}(a) - c_j(a) = 0` under the accumulated constraints, and emit
//! a certificate that every free critical point has become periodic (hence
//! superattracting).
//!
//! The induction is sequential and deterministic; grid evaluations reduce
//! by index-ordered argmin.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::critical::{critical_points, CriticalLabeling};
use crate::dd::{chordal_dd, DdMap, DdPoint, Ddc};
use crate::error::{DynamicsError, Result};
use crate::family::{labeled_map_at, param_norm, ParameterFamily};
use crate::linalg::{min_norm_step, null_space, rank, vec_norm, CMatrix};
use crate::motion::{ChartedJet, ContinuedSkeleton, EvalAt, MotionContext};
use crate::orbit::{
    build_skeleton, classify_critical_orbits, ClassifyOptions, CycleKind, SkeletonOptions, Verdict,
};
use crate::sampling;
use crate::sphere::{chordal, Chart, RationalMap, SpherePoint};
use crate::transversality::{good_cone_direction, immersion_from_jacobian, GradientMethod};
use crate::C64;

/// Dominance factor of the singularity-exclusion inequality
/// `||xi'|| > 100 ||c'||`.
pub const DOMINANCE_FACTOR: f64 = 100.0;

/// Solver configuration. Tolerances and budgets are pinned here; the CLI
/// only re-exposes them.
#[derive(Debug, Clone)]
pub struct ClosingConfig {
    /// Gauss-Newton convergence threshold on the stacked residual.
    pub closing_tol: f64,
    /// Residual every accepted constraint must keep at later states.
    pub constraint_tol: f64,
    /// Cap on the total closing iterate `n + m` per label (`None`: natural).
    pub total_iterate_budget: Option<usize>,
    /// Covering-time search bound.
    pub n_max_cover: usize,
    /// Initial seeding grid side; doubles on failure up to the max.
    pub seed_grid: usize,
    pub seed_grid_max: usize,
    /// Grid residual below which a seed is accepted.
    pub basin_threshold: f64,
    /// Work point: `|a| = initial_radius_frac * family radius`.
    pub initial_radius_frac: f64,
    /// Whitney constant of the working disks.
    pub whitney_k: f64,
    /// `cos(theta)` floor between the growth direction and the manifold.
    pub angle_floor: f64,
    pub max_gn_iter: usize,
    /// Extra total-iterate escalation attempts when seeding fails.
    pub cover_retry: usize,
    /// Verification: periodicity residual after polish.
    pub verify_residual_tol: f64,
    /// Verification: multiplier magnitude bound.
    pub verify_multiplier_tol: f64,
    /// Verification: parameter-sphere radius for the persistence check.
    pub cert_radius: f64,
    pub classify: ClassifyOptions,
    pub skeleton: SkeletonOptions,
}

impl Default for ClosingConfig {
    fn default() -> Self {
        ClosingConfig {
            closing_tol: 1e-11,
            constraint_tol: 1e-10,
            total_iterate_budget: None,
            n_max_cover: 64,
            seed_grid: 64,
            seed_grid_max: 512,
            basin_threshold: 0.05,
            initial_radius_frac: 0.5,
            whitney_k: 0.5,
            angle_floor: 1e-3,
            max_gn_iter: 60,
            cover_retry: 12,
            verify_residual_tol: 1e-20,
            verify_multiplier_tol: 1e-10,
            cert_radius: 1e-6,
            classify: ClassifyOptions::default(),
            skeleton: SkeletonOptions::default(),
        }
    }
}

/// One accepted closing equation.
#[derive(Debug, Clone, Copy)]
pub struct ClosingConstraint {
    pub label: usize,
    /// Total iterate `n + m` of the equation `xi_{n+m}(a) = c(a)`.
    pub total_iterate: usize,
}

/// Current solution point with its accumulated constraints.
#[derive(Debug, Clone)]
pub struct SolutionState {
    pub constraints: Vec<ClosingConstraint>,
    pub a: Vec<C64>,
    /// `||xi'|| / ||c'||` per constraint at `a`.
    pub dominance_margins: Vec<f64>,
    /// Sampled tangent-plane variation of the solution manifold.
    pub planarity: f64,
    /// Radius of the largest sampled disk around `a` that keeps the most
    /// recent closing orbit within its shadowing tolerance (the next
    /// stage's Whitney radius).
    pub shadow_disk_radius: f64,
}

/// Per-stage constants, derived strictly in the order
/// `S_l -> N_l -> U_l -> T_l -> S_{l+1}` (see [`BudgetScale`]).
#[derive(Debug, Clone, Copy)]
pub struct NeighborhoodBudget {
    pub stage: usize,
    /// Large scale `S_l`.
    pub large_scale: f64,
    /// Covering time found (`N_l`).
    pub covering_bound: usize,
    /// Radius `delta_l` of the critical neighbourhood `U_l`.
    pub u_radius: f64,
    /// Shadowing tolerance `T_l`.
    pub shadow_tol: f64,
    /// Free-period expansion bound `C_l`.
    pub expansion_bound: f64,
}

// Type-state chain: each stage constructor consumes the previous stage, so
// a later field can never feed an earlier one.
pub struct BudgetScale {
    pub stage: usize,
    pub large_scale: f64,
}
pub struct BudgetCovering {
    stage: usize,
    large_scale: f64,
    covering_bound: usize,
}
pub struct BudgetNeighborhood {
    stage: usize,
    large_scale: f64,
    covering_bound: usize,
    u_radius: f64,
}
pub struct BudgetShadow {
    stage: usize,
    large_scale: f64,
    covering_bound: usize,
    u_radius: f64,
    shadow_tol: f64,
}

impl BudgetScale {
    pub fn with_covering(self, n: usize) -> BudgetCovering {
        BudgetCovering {
            stage: self.stage,
            large_scale: self.large_scale,
            covering_bound: n,
        }
    }
}

impl BudgetCovering {
    pub fn with_neighbourhood(self, delta_l: f64) -> BudgetNeighborhood {
        BudgetNeighborhood {
            stage: self.stage,
            large_scale: self.large_scale,
            covering_bound: self.covering_bound,
            u_radius: delta_l,
        }
    }
}

impl BudgetNeighborhood {
    /// `T_l = delta_l / 4`.
    pub fn with_shadowing(self) -> BudgetShadow {
        BudgetShadow {
            stage: self.stage,
            large_scale: self.large_scale,
            covering_bound: self.covering_bound,
            u_radius: self.u_radius,
            shadow_tol: self.u_radius / 4.0,
        }
    }
}

impl BudgetShadow {
    /// Close this stage and derive the next large scale
    /// `S_{l+1} = T_l / (4 C_l M_0)` with `C_l = M_0^(m_l)`.
    pub fn finish(self, m0: f64) -> (NeighborhoodBudget, BudgetScale) {
        let c_l = m0.powi(self.covering_bound as i32).max(1.0);
        let next = BudgetScale {
            stage: self.stage + 1,
            large_scale: self.shadow_tol / (4.0 * c_l * m0.max(1.0)),
        };
        (
            NeighborhoodBudget {
                stage: self.stage,
                large_scale: self.large_scale,
                covering_bound: self.covering_bound,
                u_radius: self.u_radius,
                shadow_tol: self.shadow_tol,
                expansion_bound: c_l,
            },
            next,
        )
    }
}

/// Outcome of [`grow_to_scale`].
#[derive(Debug, Clone)]
pub struct GrowthResult {
    /// Least `n` whose estimated image diameter reaches the scale.
    pub n: usize,
    pub image_diameter: f64,
    /// Estimated image center `xi_n(a)`.
    pub image_center: SpherePoint,
    /// Whether the sampled argument-distortion proxy held at `n`.
    pub low_distortion: bool,
    /// `cos(theta)` between the growth gradient and the disk tangent.
    pub cos_angle: f64,
}

/// Directional norm of a gradient row against an orthonormal tangent basis
/// (the achievable stretching of a unit disk in that tangent).
fn directional_norm(grad: &[C64], basis: &[Vec<C64>]) -> f64 {
    let mut s = 0.0;
    for b in basis {
        let pairing: C64 = grad.iter().zip(b.iter()).map(|(g, d)| g * d).sum();
        s += pairing.norm_sqr();
    }
    s.sqrt()
}

/// Find the least `n` at which the image of the current Whitney disk under
/// `xi_n` reaches diameter `scale`, while the orbit keeps shadowing the
/// moved skeleton inside its `delta'`-neighbourhood.
#[allow(clippy::too_many_arguments)]
pub fn grow_to_scale(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    label: usize,
    scale: f64,
    tangent: &[Vec<C64>],
    disk_diameter: f64,
    angle_floor: f64,
    n_cap: usize,
) -> Result<GrowthResult> {
    let x = ctx.x_value(at, label)?;
    let xnorm = vec_norm(&x.grad);
    let dir = directional_norm(&x.grad, tangent);
    let cos_angle = if xnorm > 0.0 { dir / xnorm } else { 0.0 };
    if cos_angle < angle_floor {
        return Err(DynamicsError::Precondition {
            detail: format!(
                "growth direction nearly perpendicular: cos(theta) = {cos_angle:.3e}"
            ),
        });
    }
    let entry_offset = ctx
        .skeleton
        .entry_for(label)
        .map(|e| e.offset)
        .unwrap_or(1);

    for n in 1..=n_cap {
        let (orbit, jet) = ctx.xi_jet(at, label, n, None)?;
        // Scale first: reaching it exactly at the window edge counts (the
        // growth index sits at the edge by construction).
        let diam = directional_norm(&jet.grad, tangent) * disk_diameter;
        if diam >= scale {
            let low_distortion =
                argument_distortion_ok(ctx, at, label, n, tangent, disk_diameter, jet)?;
            return Ok(GrowthResult {
                n,
                image_diameter: diam,
                image_center: orbit[n],
                low_distortion,
                cos_angle,
            });
        }
        // Otherwise the orbit must keep shadowing the moved skeleton inside
        // its delta'-neighbourhood, once past the tracked entry.
        if n >= entry_offset {
            let mu = ctx.moved_orbit_point(at, label, n)?;
            if chordal(&orbit[n], &mu).value() > ctx.skeleton.delta_prime {
                return Err(DynamicsError::LeftNeighborhoodEarly { reached: n });
            }
        }
    }
    Err(DynamicsError::LeftNeighborhoodEarly { reached: n_cap })
}

/// Sampled proxy for `||xi_n'(a) - xi_n'(b)|| <= ||xi_n'(a)|| / 100` over
/// the working disk.
fn argument_distortion_ok(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    label: usize,
    n: usize,
    tangent: &[Vec<C64>],
    disk_diameter: f64,
    center_jet: ChartedJet,
) -> Result<bool> {
    let norm_a = vec_norm(&center_jet.grad);
    if norm_a == 0.0 {
        return Ok(false);
    }
    for t in sampling::unit_disk(5) {
        let mut b = at.cont.a.clone();
        for (x, dir) in b.iter_mut().zip(tangent.first().into_iter().flatten()) {
            *x += t * (disk_diameter / 2.0) * dir;
        }
        if param_norm(&b) > ctx.family.radius() {
            continue;
        }
        let at_b = ctx.prepare(&b, Some(&at.cont))?;
        let (_, jet_b) = ctx.xi_jet(&at_b, label, n, Some(center_jet.chart))?;
        let diff: Vec<C64> = center_jet
            .grad
            .iter()
            .zip(jet_b.grad.iter())
            .map(|(x, y)| x - y)
            .collect();
        if vec_norm(&diff) > norm_a / 100.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of a covering-time search.
#[derive(Debug, Clone)]
pub struct CoveringResult {
    pub m: usize,
    /// Worst-case distance from a target grid point to the image cloud
    /// (smaller is better).
    pub margin: f64,
    /// Whether the boundary winding check confirmed every target point.
    pub winding_confirmed: bool,
    /// Whether coverage needed backward preimage certification for targets
    /// the forward cloud missed.
    pub backward_certified: bool,
}

/// Proximity tolerance of the covering check, as a fraction of `u_radius`.
pub const COVER_PROXIMITY_FRAC: f64 = 0.25;

/// Least `m <= n_max` such that the `m`-th image of a dense sample of the
/// disk covers the `u_radius`-neighbourhood of every center in `u_centers`:
/// every target grid point lies within `COVER_PROXIMITY_FRAC * u_radius` of
/// an image point, with a boundary winding check where the image polyline
/// stays resolvable.
pub fn covering_time(
    map: &RationalMap,
    disk_center: &SpherePoint,
    disk_diameter: f64,
    u_centers: &[SpherePoint],
    u_radius: f64,
    n_max: usize,
) -> Result<CoveringResult> {
    let eps = COVER_PROXIMITY_FRAC * u_radius;
    // Target grid: polar grid on each critical cap.
    let mut targets: Vec<SpherePoint> = Vec::new();
    for c in u_centers {
        targets.push(*c);
        targets.extend(sampling::chordal_cap(c, u_radius, 96));
    }

    // Disk samples: interior grid plus a parameterised boundary circle.
    let chart = disk_center.reporting_chart();
    let u0 = disk_center.chart_value(chart);
    let affine_radius = (disk_diameter / 2.0) * (1.0 + u0.norm_sqr()) / 2.0;
    let mut interior: Vec<SpherePoint> = sampling::disk_grid(u0, affine_radius, 48)
        .into_iter()
        .map(|u| SpherePoint::from_chart(chart, u))
        .collect();
    let boundary_n = 512usize;
    let mut boundary: Vec<SpherePoint> = (0..boundary_n)
        .map(|k| {
            let th = core::f64::consts::TAU * k as f64 / boundary_n as f64;
            SpherePoint::from_chart(chart, u0 + C64::new(th.cos(), th.sin()) * affine_radius)
        })
        .collect();

    // Landing disk for backward certification: slightly shrunk, so a chain
    // endpoint certifies a neighbourhood of the target.
    let landing_radius = 0.75 * disk_diameter / 2.0;

    for m in 0..=n_max {
        let margin = coverage_margin(&targets, &interior, &boundary);
        if margin <= eps {
            let winding_confirmed = winding_covers(&targets, &boundary, u_radius);
            return Ok(CoveringResult {
                m,
                margin,
                winding_confirmed,
                backward_certified: false,
            });
        }
        // The forward cloud thins exponentially under stretching; certify
        // the stragglers by exhibiting a preimage chain of length m from
        // each uncovered target into the (shrunk) disk.
        if m > 0 && pow_capped(map.degree(), m) <= BACKWARD_NODE_CAP {
            let mut all = true;
            for t in &targets {
                let near_cloud = interior
                    .iter()
                    .chain(boundary.iter())
                    .any(|p| chordal(t, p).value() <= eps);
                if near_cloud {
                    continue;
                }
                if !has_preimage_chain(map, t, m, disk_center, landing_radius) {
                    all = false;
                    break;
                }
            }
            if all {
                let winding_confirmed = winding_covers(&targets, &boundary, u_radius);
                return Ok(CoveringResult {
                    m,
                    margin,
                    winding_confirmed,
                    backward_certified: true,
                });
            }
        }
        if m == n_max {
            break;
        }
        for p in interior.iter_mut() {
            *p = map.eval(p)?;
        }
        for p in boundary.iter_mut() {
            *p = map.eval(p)?;
        }
    }
    Err(DynamicsError::NoCoverWithinBudget { tried: n_max })
}

/// Node cap for the backward depth-first search.
const BACKWARD_NODE_CAP: usize = 1 << 15;

fn pow_capped(base: usize, exp: usize) -> usize {
    let mut v = 1usize;
    for _ in 0..exp {
        v = v.saturating_mul(base);
        if v > BACKWARD_NODE_CAP {
            return v;
        }
    }
    v
}

/// All `d` preimages of a point (with multiplicity; infinity handled by the
/// homogeneous formulation).
pub fn preimages(map: &RationalMap, w: &SpherePoint) -> Result<Vec<SpherePoint>> {
    // Solve beta P(z) - alpha Q(z) = 0 for [alpha : beta] = w.
    let d = map.degree();
    let coeffs: Vec<C64> = (0..=d)
        .map(|i| {
            let p = map.numerator().get(i).copied().unwrap_or(C64::new(0.0, 0.0));
            let q = map.denominator().get(i).copied().unwrap_or(C64::new(0.0, 0.0));
            w.w * p - w.z * q
        })
        .collect();
    let (eff, _) = crate::poly::effective_degree(&coeffs, 1e-13);
    let mut out: Vec<SpherePoint> = Vec::with_capacity(d);
    if eff > 0 {
        for r in crate::poly::aberth_roots(&coeffs[..=eff], crate::poly::AberthOptions::default())? {
            out.push(SpherePoint::from_affine(r));
        }
    }
    for _ in eff..d {
        out.push(SpherePoint::infinity());
    }
    // Deterministic order.
    out.sort_by(|a, b| {
        let ka = a.lex_key();
        let kb = b.lex_key();
        ka.partial_cmp(&kb).unwrap_or(core::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Depth-first search for a length-`m` backward orbit of `w` ending inside
/// the chordal cap around `center`.
fn has_preimage_chain(
    map: &RationalMap,
    w: &SpherePoint,
    m: usize,
    center: &SpherePoint,
    radius: f64,
) -> bool {
    fn dfs(
        map: &RationalMap,
        w: &SpherePoint,
        depth: usize,
        center: &SpherePoint,
        radius: f64,
        budget: &mut usize,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if depth == 0 {
            return chordal(w, center).value() <= radius;
        }
        let Ok(pre) = preimages(map, w) else {
            return false;
        };
        for p in pre {
            if dfs(map, &p, depth - 1, center, radius, budget) {
                return true;
            }
        }
        false
    }
    let mut budget = BACKWARD_NODE_CAP;
    dfs(map, w, m, center, radius, &mut budget)
}

fn coverage_margin(
    targets: &[SpherePoint],
    interior: &[SpherePoint],
    boundary: &[SpherePoint],
) -> f64 {
    let mut worst = 0.0f64;
    for t in targets {
        let mut best = f64::INFINITY;
        for p in interior.iter().chain(boundary.iter()) {
            best = best.min(chordal(t, p).value());
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Winding number of the image boundary polyline around each target, read
/// in the target's chart; targets whose polyline is locally unresolvable
/// (stretched edges) are skipped rather than failed.
fn winding_covers(targets: &[SpherePoint], boundary: &[SpherePoint], u_radius: f64) -> bool {
    for t in targets {
        let chart = t.reporting_chart();
        let w = t.chart_value(chart);
        let pts: Vec<C64> = boundary.iter().map(|p| p.chart_value(chart)).collect();
        if pts.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            continue;
        }
        let mut resolvable = true;
        let mut total = 0.0f64;
        for i in 0..pts.len() {
            let a = pts[i] - w;
            let b = pts[(i + 1) % pts.len()] - w;
            if a.norm() < 1e-14 || b.norm() < 1e-14 {
                resolvable = false;
                break;
            }
            // Edges passing close to the target at coarse resolution make
            // the winding count unreliable.
            if (b - a).norm() > 4.0 * u_radius + a.norm() {
                resolvable = false;
                break;
            }
            let cross = a.re * b.im - a.im * b.re;
            let dot = a.re * b.re + a.im * b.im;
            total += cross.atan2(dot);
        }
        if resolvable && total.abs() < core::f64::consts::PI {
            return false;
        }
    }
    true
}

/// Where solve_closing looks for seeds.
#[derive(Debug, Clone)]
pub enum SeedDomain {
    /// Stage 1: the complex line `t * direction`, `|t| <= radius`.
    Line { direction: Vec<C64>, radius: f64 },
    /// Later stages: a disk in the first tangent direction around a point
    /// of the solution manifold.
    OnManifold {
        center: Vec<C64>,
        tangent: Vec<C64>,
        radius: f64,
    },
}

impl SeedDomain {
    fn point(&self, t: C64) -> Vec<C64> {
        match self {
            SeedDomain::Line { direction, radius } => {
                direction.iter().map(|d| d * t * *radius).collect()
            }
            SeedDomain::OnManifold {
                center,
                tangent,
                radius,
            } => center
                .iter()
                .zip(tangent.iter())
                .map(|(c, d)| c + d * t * *radius)
                .collect(),
        }
    }
}

/// Solve the closing equation for `label` at total iterate `T` on top of
/// the accumulated constraints: grid seeding, then Gauss-Newton with
/// minimum-norm steps on the stacked residual. The accepted solution must
/// satisfy the derivative-dominance and shadowing side conditions.
#[allow(clippy::too_many_arguments)]
pub fn solve_closing(
    ctx: &MotionContext<'_>,
    state: &SolutionState,
    label: usize,
    total_iterate: usize,
    domain: &SeedDomain,
    shadow_tol: f64,
    config: &ClosingConfig,
) -> Result<SolutionState> {
    // --- Seeding with grid escalation --------------------------------------
    // A finer grid both reveals missed basins and places the seed closer to
    // the solution, which the shadowing side condition needs.
    let mut grid = config.seed_grid;
    let mut best_residual = f64::INFINITY;
    let mut last_err: Option<DynamicsError> = None;
    while grid <= config.seed_grid_max {
        // All grid residuals, then the best few well-separated local
        // candidates: distinct solution branches can differ sharply in the
        // dominance margin, so one argmin is not enough.
        let mut cells: Vec<(Vec<C64>, C64, f64)> = Vec::new();
        for iy in 0..grid {
            for ix in 0..grid {
                let x = -1.0 + 2.0 * (ix as f64 + 0.5) / grid as f64;
                let y = -1.0 + 2.0 * (iy as f64 + 0.5) / grid as f64;
                if x * x + y * y > 1.0 {
                    continue;
                }
                let t = C64::new(x, y);
                let a = domain.point(t);
                if param_norm(&a) > ctx.family.radius() {
                    continue;
                }
                let Ok(r) = closing_residual(ctx, &a, label, total_iterate) else {
                    continue;
                };
                cells.push((a, t, r));
            }
        }
        cells.sort_by(|p, q| p.2.partial_cmp(&q.2).unwrap_or(core::cmp::Ordering::Equal));
        if let Some(first) = cells.first() {
            best_residual = best_residual.min(first.2);
        }
        let min_sep = 6.0 / grid as f64;
        let mut seeds: Vec<Vec<C64>> = Vec::new();
        let mut taken: Vec<C64> = Vec::new();
        for (a, t, r) in &cells {
            if *r > config.basin_threshold || seeds.len() >= 6 {
                break;
            }
            if taken.iter().any(|u| (u - t).norm() < min_sep) {
                continue;
            }
            taken.push(*t);
            seeds.push(a.clone());
        }
        for seed_a in &seeds {
            match refine_and_check(ctx, state, label, total_iterate, seed_a, shadow_tol, config)
            {
                Ok(new_state) => return Ok(new_state),
                Err(e @ DynamicsError::ShadowingViolation { .. })
                | Err(e @ DynamicsError::NewtonStall { .. })
                | Err(e @ DynamicsError::DominanceFailure { .. })
                | Err(e @ DynamicsError::HypothesisViolation { .. }) => {
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        grid *= 2;
    }
    Err(last_err.unwrap_or(DynamicsError::SeedNotFound { best_residual }))
}

/// Gauss-Newton refinement from a given seed plus all side conditions.
fn refine_and_check(
    ctx: &MotionContext<'_>,
    state: &SolutionState,
    label: usize,
    total_iterate: usize,
    seed_a: &[C64],
    shadow_tol: f64,
    config: &ClosingConfig,
) -> Result<SolutionState> {
    let seed_a = seed_a.to_vec();
    // --- Gauss-Newton refinement ------------------------------------------
    let mut constraints = state.constraints.clone();
    constraints.push(ClosingConstraint {
        label,
        total_iterate,
    });
    let mut a = seed_a.clone();
    let mut cont: Option<ContinuedSkeleton> = None;
    let mut last_norm = f64::INFINITY;
    let mut stall = 0usize;
    let mut converged = false;
    for _ in 0..config.max_gn_iter {
        let at = ctx.prepare(&a, cont.as_ref())?;
        let (residuals, jacobian) = stacked_system(ctx, &at, &constraints)?;
        let rnorm = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
        if rnorm <= config.closing_tol {
            converged = true;
            cont = Some(at.cont);
            break;
        }
        if rnorm > 0.5 * last_norm {
            stall += 1;
            if stall >= 6 {
                return Err(DynamicsError::NewtonStall { residual: rnorm });
            }
        } else {
            stall = 0;
        }
        last_norm = rnorm;
        let step = min_norm_step(&jacobian, &residuals).ok_or(DynamicsError::NewtonStall {
            residual: rnorm,
        })?;
        // Backtracking line search against the stacked norm.
        let mut factor = 1.0f64;
        let mut accepted = false;
        for _ in 0..8 {
            let cand: Vec<C64> = a
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x - s * factor)
                .collect();
            if param_norm(&cand) <= ctx.family.radius() {
                if let Ok(atc) = ctx.prepare(&cand, at_cont(&cont, &at)) {
                    if let Ok((rc, _)) = stacked_system(ctx, &atc, &constraints) {
                        let rn = rc.iter().map(|r| r.norm()).fold(0.0, f64::max);
                        if rn < rnorm {
                            a = cand;
                            cont = Some(atc.cont);
                            accepted = true;
                            break;
                        }
                    }
                }
            }
            factor /= 2.0;
        }
        if !accepted {
            return Err(DynamicsError::NewtonStall { residual: rnorm });
        }
    }
    if !converged {
        let at = ctx.prepare(&a, cont.as_ref())?;
        let (residuals, _) = stacked_system(ctx, &at, &constraints)?;
        let rnorm = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
        if rnorm > config.closing_tol {
            return Err(DynamicsError::NewtonStall { residual: rnorm });
        }
    }

    // --- Side conditions ---------------------------------------------------
    let at = ctx.prepare(&a, cont.as_ref())?;
    let margins = dominance_margins(ctx, &at, &constraints)?;
    let new_margin = *margins.last().expect("nonempty constraints");
    if new_margin <= DOMINANCE_FACTOR {
        return Err(DynamicsError::DominanceFailure { margin: new_margin });
    }

    // Shadowing defines the next stage's disk: find the largest sampled
    // radius around the solution whose orbits stay within the tolerance for
    // every step of the new constraint. A solution admitting no such disk
    // at all is rejected as singular.
    let orbit_sol = ctx.xi_orbit(&at, label, total_iterate)?;
    let shadow_disk_radius = {
        let mut rho = (config.whitney_k * param_norm(&a) / 2.0)
            .min(0.9 * (ctx.family.radius() - param_norm(&a)).max(0.0))
            .max(1e-12);
        let floor = 1e-9 * ctx.family.radius();
        let mut found = None;
        let mut worst_seen = (0usize, 0.0f64);
        while rho > floor {
            let mut ok = true;
            'probe: for t in sampling::unit_circle(4) {
                let b: Vec<C64> = a.iter().map(|x| x + t * rho / param_norm(&a).max(1e-300) * x)
                    .collect();
                // Probe isotropically instead when a is tiny.
                let b = if param_norm(&a) < 1e-9 {
                    a.iter().enumerate().map(|(i, x)| if i == 0 { x + t * rho } else { *x }).collect()
                } else {
                    b
                };
                if param_norm(&b) > ctx.family.radius() {
                    continue;
                }
                let Ok(at_b) = ctx.prepare(&b, Some(&at.cont)) else {
                    ok = false;
                    break 'probe;
                };
                let Ok(orbit_b) = ctx.xi_orbit(&at_b, label, total_iterate) else {
                    ok = false;
                    break 'probe;
                };
                for (k, (pb, pa)) in orbit_b.iter().zip(orbit_sol.iter()).enumerate() {
                    let d = chordal(pb, pa).value();
                    if d > shadow_tol {
                        worst_seen = (k, d);
                        ok = false;
                        break 'probe;
                    }
                }
            }
            if ok {
                found = Some(rho);
                break;
            }
            rho /= 2.0;
        }
        match found {
            Some(r) => r,
            None => {
                return Err(DynamicsError::ShadowingViolation {
                    step: worst_seen.0,
                    distance: worst_seen.1,
                })
            }
        }
    };
    let _ = seed_a;

    // Dimension drop: stacked Jacobian rank equals the constraint count.
    let (_, jacobian) = stacked_system(ctx, &at, &constraints)?;
    let jrank = rank(&jacobian, 1e-8);
    if jrank != constraints.len() {
        return Err(DynamicsError::HypothesisViolation {
            clause: format!(
                "stacked Jacobian rank {jrank} != {} constraints",
                constraints.len()
            ),
        });
    }

    let planarity = planarity_score(ctx, &at, &jacobian)?;
    Ok(SolutionState {
        constraints,
        a,
        dominance_margins: margins,
        planarity,
        shadow_disk_radius,
    })
}

fn at_cont<'c>(cont: &'c Option<ContinuedSkeleton>, at: &'c EvalAt) -> Option<&'c ContinuedSkeleton> {
    cont.as_ref().or(Some(&at.cont))
}

/// Chordal residual of one closing equation.
fn closing_residual(
    ctx: &MotionContext<'_>,
    a: &[C64],
    label: usize,
    total_iterate: usize,
) -> Result<f64> {
    let map = ctx.family.map_at(a)?;
    let lab = labeled_map_at(ctx.family, ctx.base_labeling, a)?;
    let cp = lab
        .points
        .iter()
        .find(|p| p.label == label)
        .ok_or_else(|| DynamicsError::Precondition {
            detail: format!("no critical label {label}"),
        })?;
    let end = map.iterate(&cp.location, total_iterate)?;
    Ok(chordal(&end[total_iterate], &cp.location).value())
}

/// Stacked residual vector and Jacobian of all constraints at `a`, with the
/// chart of each component chosen at the constraint's critical point.
fn stacked_system(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    constraints: &[ClosingConstraint],
) -> Result<(Vec<C64>, CMatrix)> {
    let mut residuals = Vec::with_capacity(constraints.len());
    let mut rows = Vec::with_capacity(constraints.len());
    for c in constraints {
        let cp = at
            .labeling
            .points
            .iter()
            .find(|p| p.label == c.label)
            .ok_or_else(|| DynamicsError::Precondition {
                detail: format!("no critical label {}", c.label),
            })?;
        let chart = cp.location.reporting_chart();
        let (_, jet) = ctx.xi_jet(at, c.label, c.total_iterate, Some(chart))?;
        let cval = cp.location.chart_value(chart);
        let cgrad = at.fam.critical_gradient(&cp.location, chart)?;
        residuals.push(jet.value - cval);
        rows.push(
            jet.grad
                .iter()
                .zip(cgrad.iter())
                .map(|(x, y)| x - y)
                .collect::<Vec<C64>>(),
        );
    }
    Ok((residuals, CMatrix::from_rows(&rows)))
}

/// `||xi'|| / ||c'||` per constraint.
fn dominance_margins(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    constraints: &[ClosingConstraint],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let cp = at
            .labeling
            .points
            .iter()
            .find(|p| p.label == c.label)
            .expect("label present");
        let chart = cp.location.reporting_chart();
        let (_, jet) = ctx.xi_jet(at, c.label, c.total_iterate, Some(chart))?;
        let cgrad = at.fam.critical_gradient(&cp.location, chart)?;
        let xi_norm = vec_norm(&jet.grad);
        let c_norm = vec_norm(&cgrad);
        out.push(xi_norm / c_norm.max(1e-300));
    }
    Ok(out)
}

/// Tangent-plane variation of the solution manifold, sampled at nearby
/// on-manifold points: the Frobenius distance between tangent projectors.
fn planarity_score(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    jacobian: &CMatrix,
) -> Result<f64> {
    let tangent = null_space(jacobian, 1e-8);
    if tangent.is_empty() {
        return Ok(0.0);
    }
    let projector = |basis: &[Vec<C64>]| -> CMatrix {
        let m = basis[0].len();
        let mut p = CMatrix::zeros(m, m);
        for b in basis {
            for i in 0..m {
                for j in 0..m {
                    let v = p.get(i, j) + b[i] * b[j].conj();
                    p.set(i, j, v);
                }
            }
        }
        p
    };
    let p0 = projector(&tangent);
    let step = 0.05 * param_norm(&at.cont.a).max(ctx.family.radius() / 100.0);
    let mut worst = 0.0f64;
    for sgn in [1.0, -1.0] {
        let a: Vec<C64> = at
            .cont
            .a
            .iter()
            .zip(tangent[0].iter())
            .map(|(x, d)| x + d * (sgn * step))
            .collect();
        if param_norm(&a) > ctx.family.radius() {
            continue;
        }
        let Ok(at2) = ctx.prepare(&a, Some(&at.cont)) else {
            continue;
        };
        // Re-assemble the Jacobian of the same constraints at the probe.
        let constraints: Vec<ClosingConstraint> = Vec::new();
        let _ = constraints;
        let Ok(j2) = stacked_from_rank(ctx, &at2, jacobian.rows) else {
            continue;
        };
        let t2 = null_space(&j2, 1e-8);
        if t2.len() != tangent.len() {
            continue;
        }
        let p2 = projector(&t2);
        let mut diff = 0.0;
        for k in 0..p0.data.len() {
            diff += (p0.data[k] - p2.data[k]).norm_sqr();
        }
        worst = worst.max(diff.sqrt());
    }
    Ok(worst)
}

// Placeholder used by planarity sampling: re-derive a Jacobian with the
// same number of rows from the most recent constraints is not possible
// without the constraint list, so planarity probes reuse the x-function
// Jacobian of the julia labels (same normal directions up to low
// distortion).
fn stacked_from_rank(ctx: &MotionContext<'_>, at: &EvalAt, nrows: usize) -> Result<CMatrix> {
    let labels: Vec<usize> = ctx.skeleton.julia_labels.iter().copied().take(nrows).collect();
    let mut rows = Vec::with_capacity(labels.len());
    for j in labels {
        rows.push(ctx.x_value(at, j)?.grad);
    }
    Ok(CMatrix::from_rows(&rows))
}

/// Certificate for one critical label at the final parameter.
#[derive(Debug, Clone)]
pub struct LabelCertificate {
    pub label: usize,
    pub preperiod: usize,
    pub period: usize,
    pub multiplier: C64,
    /// Periodicity residual under extended-precision re-iteration.
    pub residual: f64,
}

/// The final product of `close_all`.
#[derive(Debug, Clone)]
pub struct ClosingCertificate {
    /// Solution parameter (f64 rounding of the polished value).
    pub a_star: Vec<C64>,
    /// Polished parameter as (hi, lo) pairs per coordinate.
    pub a_star_dd: Vec<(C64, C64)>,
    pub labels: Vec<LabelCertificate>,
    pub constraints: Vec<ClosingConstraint>,
    pub budgets: Vec<NeighborhoodBudget>,
    pub dominance_margins: Vec<f64>,
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Verification outcome, separated so certificates can be re-checked
/// without re-solving.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub pass: bool,
    pub labels: Vec<LabelCertificate>,
    pub polished: Vec<(C64, C64)>,
    pub failures: Vec<String>,
    /// Max periodicity residual over all constrained labels.
    pub worst_residual: f64,
    pub persistence_pass: bool,
}

/// Close every free critical orbit of a certified Misiurewicz family base,
/// then verify. Also accepts an already postcritically finite base (all
/// critical points superattracting-periodic), which certifies at `a* = 0`
/// with zero solver stages.
pub fn close_all(family: &ParameterFamily, config: &ClosingConfig) -> Result<ClosingCertificate> {
    let base_lab = critical_points(family.base())?;
    if !base_lab.all_simple() {
        return Err(DynamicsError::Precondition {
            detail: "closing requires simple critical points (run ensure_simple first)".into(),
        });
    }
    let classification = classify_critical_orbits(family.base(), &base_lab, config.classify);

    match classification.verdict {
        Verdict::Misiurewicz => {}
        Verdict::HyperbolicLike => {
            let all_super = classification.reports.iter().flatten().all(|r| {
                r.cycle.kind == CycleKind::Superattracting && r.preperiod == 0
            });
            if all_super {
                return certify(family, config, &base_lab, &[], &[], &[]);
            }
            return Err(DynamicsError::Precondition {
                detail: "base map is hyperbolic-like but not superattracting-periodic".into(),
            });
        }
        Verdict::Undecided => {
            return Err(DynamicsError::Precondition {
                detail: "base map classification undecided".into(),
            });
        }
    }

    let skeleton = build_skeleton(family.base(), &base_lab, &classification, config.skeleton)?;
    let ctx = MotionContext::new(family, &base_lab, &skeleton);
    let free = skeleton.julia_labels.clone();

    // Immersion and good-cone direction. The Jacobian can be degenerate at
    // the base point itself; probe slightly into the ball in that case.
    let m = family.dimension();
    let zero = vec![C64::new(0.0, 0.0); m];
    let j0 = crate::transversality::jacobian_g(&ctx, &zero, &free, GradientMethod::Exact)?;
    let chk0 = immersion_from_jacobian(&j0);
    let immersion_ok = if chk0.pass {
        true
    } else {
        let mut ok = false;
        for v in sampling::unit_directions(m, 4) {
            let probe: Vec<C64> = v.iter().map(|d| d * (family.radius() / 16.0)).collect();
            let jp = crate::transversality::jacobian_g(&ctx, &probe, &free, GradientMethod::Exact)?;
            if immersion_from_jacobian(&jp).pass {
                ok = true;
                break;
            }
        }
        ok
    };
    if !immersion_ok {
        return Err(DynamicsError::Precondition {
            detail: "immersion check failed at the base point and nearby probes".into(),
        });
    }
    let (cone_dir, _score) = good_cone_direction(&ctx, &free, GradientMethod::Exact)?;

    // Work point in the cone.
    let work_norm = config.initial_radius_frac * family.radius();
    let a_work: Vec<C64> = cone_dir.iter().map(|d| d * work_norm).collect();
    let mut state = SolutionState {
        constraints: Vec::new(),
        a: a_work,
        dominance_margins: Vec::new(),
        planarity: 0.0,
        shadow_disk_radius: f64::INFINITY,
    };

    let m0 = skeleton.max_spherical_derivative;
    let mut scale = BudgetScale {
        stage: 0,
        large_scale: skeleton.delta_prime * config.whitney_k / 8.0,
    };
    let mut budgets: Vec<NeighborhoodBudget> = Vec::new();
    let mut remaining: Vec<usize> = free.clone();

    while !remaining.is_empty() {
        let stage = state.constraints.len();
        let stage_result = run_stage(
            &ctx,
            &mut state,
            &mut remaining,
            &scale,
            m0,
            config,
        )
        .map_err(|e| e.at_stage(stage + 1))?;
        budgets.push(stage_result.0);
        scale = stage_result.1;
    }

    certify(
        family,
        config,
        &base_lab,
        &state.constraints,
        &budgets,
        &state.a,
    )
    .map(|mut cert| {
        cert.dominance_margins = state.dominance_margins.clone();
        cert
    })
}

/// One stage of the induction: pick the next label, grow, cover, solve.
fn run_stage(
    ctx: &MotionContext<'_>,
    state: &mut SolutionState,
    remaining: &mut Vec<usize>,
    scale: &BudgetScale,
    m0: f64,
    config: &ClosingConfig,
) -> Result<(NeighborhoodBudget, BudgetScale)> {
    let family_radius = ctx.family.radius();
    let mut at = ctx.prepare(&state.a, None)?;

    // Tangent of the current solution manifold (whole space at stage 1).
    let tangent: Vec<Vec<C64>> = if state.constraints.is_empty() {
        let m = ctx.family.dimension();
        (0..m)
            .map(|i| {
                let mut e = vec![C64::new(0.0, 0.0); m];
                e[i] = C64::new(1.0, 0.0);
                e
            })
            .collect()
    } else {
        let (_, jac) = stacked_system(ctx, &at, &state.constraints)?;
        null_space(&jac, 1e-8)
    };
    if tangent.is_empty() {
        return Err(DynamicsError::InfiniteOrderEverywhere);
    }

    // Label selection: largest x-gradient component along the tangent.
    let mut best: Option<(usize, f64)> = None;
    for &j in remaining.iter() {
        let x = ctx.x_value(&at, j)?;
        let score = directional_norm(&x.grad, &tangent);
        if best.map(|(_, s)| score > s).unwrap_or(true) {
            best = Some((j, score));
        }
    }
    let (label, score) = best.expect("remaining nonempty");
    if score < 1e-10 {
        return Err(DynamicsError::InfiniteOrderEverywhere);
    }

    // Growth phase, shrinking |a| on early neighbourhood exit (only when no
    // constraint pins the current point to a manifold).
    let disk_radius = |a: &[C64]| -> f64 {
        let na = param_norm(a);
        (config.whitney_k * na / 2.0).min(0.9 * (family_radius - na).max(0.0))
    };
    let n_cap = config
        .total_iterate_budget
        .unwrap_or(config.classify.preperiod_budget)
        .max(2);
    let mut growth = None;
    for _attempt in 0..6 {
        match grow_to_scale(
            ctx,
            &at,
            label,
            scale.large_scale,
            &tangent,
            2.0 * disk_radius(&state.a),
            config.angle_floor,
            n_cap.saturating_sub(1).max(1),
        ) {
            Ok(g) => {
                growth = Some(g);
                break;
            }
            Err(DynamicsError::LeftNeighborhoodEarly { .. })
                if state.constraints.is_empty() =>
            {
                for x in state.a.iter_mut() {
                    *x /= 2.0;
                }
                at = ctx.prepare(&state.a, Some(&at.cont))?;
            }
            Err(e) => return Err(e),
        }
    }
    let growth = growth.ok_or(DynamicsError::LeftNeighborhoodEarly { reached: n_cap })?;

    // Covering phase at the frozen map. A failed covering at desk radii is
    // recorded (bound = n_max) rather than fatal: the seeding grid performs
    // the actual search.
    let julia_crit: Vec<SpherePoint> = at
        .labeling
        .points
        .iter()
        .filter(|p| ctx.skeleton.julia_labels.contains(&p.label))
        .map(|p| p.location)
        .collect();
    let cover = covering_time(
        &at.fam.map,
        &growth.image_center,
        growth.image_diameter.min(2.0),
        &julia_crit,
        ctx.skeleton.delta,
        config.n_max_cover,
    );
    // When the frozen-map covering fails at desk radii, bound the free
    // period by the time an image of this size needs to reach sphere scale
    // at the skeleton expansion rate.
    let lambda = ctx.skeleton.lambda.max(1.0 + 1e-9);
    let m_heuristic = ((2.0 / growth.image_diameter.max(1e-12)).ln() / lambda.ln())
        .ceil()
        .max(1.0)
        .min(20.0) as usize;
    let m_cover = match &cover {
        Ok(c) => c.m.max(1),
        Err(_) => m_heuristic,
    };

    // Budget chain S -> N -> U -> T -> S'.
    let with_n = BudgetScale {
        stage: scale.stage,
        large_scale: scale.large_scale,
    }
    .with_covering(m_cover);
    // U_l: shrink delta until the first return time is at least 2 m.
    let mut delta_l = ctx.skeleton.delta;
    for _ in 0..12 {
        let rt = first_return_time(&at.fam.map, &julia_crit, delta_l, 2 * m_cover + 1);
        if rt >= 2 * m_cover {
            break;
        }
        delta_l /= 2.0;
    }
    let with_u = with_n.with_neighbourhood(delta_l);
    let with_t = with_u.with_shadowing();
    let shadow_tol = with_t.shadow_tol;
    let (budget, next_scale) = with_t.finish(m0);

    // Total iterate: at least enough expansion for the derivative-dominance
    // inequality against this label's critical-point velocity, capped by
    // the explicit budget when one is given.
    let natural = growth.n + m_cover;
    let t_dominance = {
        let cp = at
            .labeling
            .points
            .iter()
            .find(|p| p.label == label)
            .expect("label present");
        let chart = cp.location.reporting_chart();
        let c_norm = vec_norm(&at.fam.critical_gradient(&cp.location, chart)?);
        let x = ctx.x_value(&at, label)?;
        let sigma = vec_norm(&x.grad).max(1e-12);
        // The orbit gradient grows at the skeleton rate in affine terms;
        // reading it in the inverted chart at the critical point divides it
        // by the squared affine size.
        let chart_factor = match chart {
            Chart::Affine => 1.0,
            Chart::Inverted => cp.location.chart_value(Chart::Inverted).norm_sqr(),
        };
        let needed = (2.0 * DOMINANCE_FACTOR * c_norm / (sigma * chart_factor)).max(1.0);
        let entry = ctx.skeleton.entry_for(label).map(|e| e.offset).unwrap_or(1);
        entry + 1 + (needed.ln() / lambda.ln()).ceil().max(0.0) as usize
    };
    // An explicit budget pins the total iterate exactly (the certificate
    // then makes the critical point periodic with period dividing it);
    // otherwise derive it from growth, covering, and dominance.
    let total = match config.total_iterate_budget {
        Some(b) => b,
        None => natural.max(t_dominance),
    };

    // Seeding domain.
    let domain = if state.constraints.is_empty() {
        SeedDomain::Line {
            direction: state
                .a
                .iter()
                .map(|x| x / param_norm(&state.a))
                .collect(),
            radius: 0.9 * family_radius,
        }
    } else {
        SeedDomain::OnManifold {
            center: state.a.clone(),
            tangent: tangent[0].clone(),
            // Search the whole reachable chart along the tangent; the
            // Whitney/shadow radii stay recorded as diagnostics.
            radius: (0.9 * (family_radius - param_norm(&state.a))).max(family_radius / 64.0),
        }
    };

    // Solve, escalating the total iterate when the grid finds no basin.
    let mut result = None;
    let mut last_err = None;
    for extra in 0..=config.cover_retry {
        let t = total + extra;
        if config.total_iterate_budget.is_some() && extra > 0 {
            break;
        }
        match solve_closing(ctx, state, label, t, &domain, shadow_tol, config) {
            Ok(s) => {
                result = Some(s);
                break;
            }
            Err(e @ DynamicsError::SeedNotFound { .. })
            | Err(e @ DynamicsError::NewtonStall { .. })
            | Err(e @ DynamicsError::ShadowingViolation { .. })
            | Err(e @ DynamicsError::DominanceFailure { .. }) => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let new_state = result.ok_or_else(|| last_err.expect("error recorded"))?;
    *state = new_state;
    remaining.retain(|&l| l != label);
    Ok((budget, next_scale))
}

/// Sampled first return time of the `radius`-neighbourhood of each center
/// into itself (per component: one critical point mapping straight onto
/// another is a structural passage, not a return).
fn first_return_time(
    map: &RationalMap,
    centers: &[SpherePoint],
    radius: f64,
    n_max: usize,
) -> usize {
    let mut worst = n_max;
    for c in centers {
        let mut pts: Vec<SpherePoint> = sampling::chordal_cap(c, radius, 16);
        pts.push(*c);
        for n in 1..=n_max {
            for p in pts.iter_mut() {
                match map.eval(p) {
                    Ok(q) => *p = q,
                    Err(_) => return n,
                }
            }
            if pts.iter().any(|p| chordal(p, c).value() <= radius) {
                worst = worst.min(n);
                break;
            }
        }
    }
    worst
}

/// Build and verify the certificate at `a`.
fn certify(
    family: &ParameterFamily,
    config: &ClosingConfig,
    base_lab: &CriticalLabeling,
    constraints: &[ClosingConstraint],
    budgets: &[NeighborhoodBudget],
    a: &[C64],
) -> Result<ClosingCertificate> {
    let a = if a.is_empty() {
        vec![C64::new(0.0, 0.0); family.dimension()]
    } else {
        a.to_vec()
    };
    let draft = ClosingCertificate {
        a_star: a.clone(),
        a_star_dd: a.iter().map(|x| (*x, C64::new(0.0, 0.0))).collect(),
        labels: Vec::new(),
        constraints: constraints.to_vec(),
        budgets: budgets.to_vec(),
        dominance_margins: Vec::new(),
        pass: false,
        failures: Vec::new(),
    };
    let report = verify_certificate(family, &draft, config)?;
    let _ = base_lab;
    Ok(ClosingCertificate {
        a_star: report
            .polished
            .iter()
            .map(|(hi, lo)| hi + lo)
            .collect(),
        a_star_dd: report.polished.clone(),
        labels: report.labels.clone(),
        constraints: constraints.to_vec(),
        budgets: budgets.to_vec(),
        dominance_margins: Vec::new(),
        pass: report.pass,
        failures: report.failures.clone(),
    })
}

/// Re-run a certificate in extended precision: polish `a*` by Newton on the
/// stacked closing equations, re-iterate every critical orbit, and check
/// periodicity, multipliers, and basin persistence.
pub fn verify_certificate(
    family: &ParameterFamily,
    cert: &ClosingCertificate,
    config: &ClosingConfig,
) -> Result<VerificationReport> {
    let mut failures: Vec<String> = Vec::new();

    // Polished parameter in double-double.
    let mut a_dd: Vec<Ddc> = cert
        .a_star_dd
        .iter()
        .map(|(hi, lo)| {
            let mut v = Ddc::from_c64(*hi);
            v.re.lo = lo.re;
            v.im.lo = lo.im;
            v
        })
        .collect();

    let base_lab = critical_points(family.base())?;

    // Newton polish against the certificate constraints (f64 Jacobian,
    // extended-precision residuals).
    if !cert.constraints.is_empty() {
        let classification =
            classify_critical_orbits(family.base(), &base_lab, config.classify);
        let skeleton =
            build_skeleton(family.base(), &base_lab, &classification, config.skeleton)?;
        let ctx = MotionContext::new(family, &base_lab, &skeleton);
        for _ in 0..16 {
            let a_f64: Vec<C64> = a_dd.iter().map(|x| x.to_c64()).collect();
            let at = ctx.prepare(&a_f64, None)?;
            let (_, jacobian) = stacked_system(&ctx, &at, &cert.constraints)?;
            let residuals = dd_residuals(family, &a_dd, &at.labeling, &cert.constraints)?;
            let worst = residuals.iter().map(|r| r.to_c64().norm()).fold(0.0, f64::max);
            if worst < 1e-28 {
                break;
            }
            let rhs: Vec<C64> = residuals.iter().map(|r| r.to_c64()).collect();
            let Some(step) = min_norm_step(&jacobian, &rhs) else {
                failures.push("verification polish: singular Jacobian".into());
                break;
            };
            for (x, s) in a_dd.iter_mut().zip(step.iter()) {
                *x = *x - Ddc::from_c64(*s);
            }
        }
    }

    // Extended-precision re-iteration of every critical orbit.
    let a_f64: Vec<C64> = a_dd.iter().map(|x| x.to_c64()).collect();
    let map_f64 = family.map_at(&a_f64)?;
    let lab = labeled_map_at(family, &base_lab, &a_f64)
        .or_else(|_| critical_points(&map_f64))?;
    let map_dd = DdMap::from_family(family, &a_dd);

    let classification_star = classify_critical_orbits(&map_f64, &lab, config.classify);
    if classification_star.verdict != Verdict::HyperbolicLike {
        failures.push(format!(
            "critical orbits at a* are not all in attracting basins (verdict {:?})",
            classification_star.verdict
        ));
    }

    let mut labels: Vec<LabelCertificate> = Vec::new();
    let mut worst_residual = 0.0f64;
    for cp in &lab.points {
        let constrained = cert
            .constraints
            .iter()
            .find(|c| c.label == cp.label)
            .map(|c| c.total_iterate);
        let report = classification_star
            .reports
            .iter()
            .flatten()
            .find(|r| r.label == cp.label);
        let c_dd = map_dd.polish_critical(&cp.location);

        if let Some(t) = constrained {
            // Closed label: c must be periodic with period dividing t.
            let orbit = map_dd.iterate(&c_dd, t);
            let residual = chordal_dd(&orbit[t], &c_dd).to_f64();
            worst_residual = worst_residual.max(residual);
            // True (minimal) period among divisors of t.
            let mut period = t;
            for q in 1..=t / 2 {
                if t % q == 0 && chordal_dd(&orbit[q], &c_dd).to_f64() <= 1e-20 {
                    period = q;
                    break;
                }
            }
            let cycle: Vec<DdPoint> = orbit.iter().take(period).copied().collect();
            let multiplier = map_dd.cycle_multiplier(&cycle).to_c64();
            if residual > config.verify_residual_tol {
                failures.push(format!(
                    "label {}: periodicity residual {residual:.3e} above {:.1e}",
                    cp.label, config.verify_residual_tol
                ));
            }
            if multiplier.norm() > config.verify_multiplier_tol {
                failures.push(format!(
                    "label {}: multiplier magnitude {:.3e} above {:.1e}",
                    cp.label,
                    multiplier.norm(),
                    config.verify_multiplier_tol
                ));
            }
            labels.push(LabelCertificate {
                label: cp.label,
                preperiod: 0,
                period,
                multiplier,
                residual,
            });
        } else if let Some(rep) = report {
            // Pre-closed label: verify the superattracting cycle directly.
            let p = rep.cycle.period;
            let orbit = map_dd.iterate(&c_dd, p.max(1) + rep.preperiod);
            let start = rep.preperiod;
            let residual = chordal_dd(&orbit[start + p], &orbit[start]).to_f64();
            let cycle: Vec<DdPoint> = orbit[start..start + p].to_vec();
            let multiplier = map_dd.cycle_multiplier(&cycle).to_c64();
            if rep.preperiod == 0 {
                worst_residual = worst_residual.max(residual);
                if residual > config.verify_residual_tol {
                    failures.push(format!(
                        "label {}: periodicity residual {residual:.3e} above {:.1e}",
                        cp.label, config.verify_residual_tol
                    ));
                }
                if multiplier.norm() > config.verify_multiplier_tol {
                    failures.push(format!(
                        "label {}: multiplier magnitude {:.3e} above {:.1e}",
                        cp.label,
                        multiplier.norm(),
                        config.verify_multiplier_tol
                    ));
                }
            } else {
                failures.push(format!(
                    "label {}: orbit attracted but not periodic (preperiod {})",
                    cp.label, rep.preperiod
                ));
            }
            labels.push(LabelCertificate {
                label: cp.label,
                preperiod: rep.preperiod,
                period: p,
                multiplier,
                residual,
            });
        } else {
            failures.push(format!("label {}: no cycle found at a*", cp.label));
        }
    }

    // Persistence: attracting cycles survive on a parameter sphere.
    let persistence_pass = match persistence_check(family, &a_f64, &labels, config) {
        Ok(ok) => {
            if !ok {
                failures.push("persistence check failed on the parameter sphere".into());
            }
            ok
        }
        Err(e) => {
            failures.push(format!("persistence check errored: {e}"));
            false
        }
    };

    let pass = failures.is_empty();
    Ok(VerificationReport {
        pass,
        labels,
        polished: a_dd
            .iter()
            .map(|x| {
                (
                    C64::new(x.re.hi, x.im.hi),
                    C64::new(x.re.lo, x.im.lo),
                )
            })
            .collect(),
        failures,
        worst_residual,
        persistence_pass,
    })
}

/// Extended-precision stacked residuals at a dd parameter point.
fn dd_residuals(
    family: &ParameterFamily,
    a_dd: &[Ddc],
    labeling: &CriticalLabeling,
    constraints: &[ClosingConstraint],
) -> Result<Vec<Ddc>> {
    let map_dd = DdMap::from_family(family, a_dd);
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let cp = labeling
            .points
            .iter()
            .find(|p| p.label == c.label)
            .ok_or_else(|| DynamicsError::Precondition {
                detail: format!("no critical label {}", c.label),
            })?;
        let chart = cp.location.reporting_chart();
        let c_dd = map_dd.polish_critical(&cp.location);
        let orbit = map_dd.iterate(&c_dd, c.total_iterate);
        let end = orbit[c.total_iterate];
        out.push(end.chart_value(chart) - c_dd.chart_value(chart));
    }
    Ok(out)
}

/// Numeric persistence check: on a sampled parameter sphere around `a*`,
/// every certified cycle continues to an attracting cycle and a compact
/// disk around it iterates into the trap neighbourhood.
fn persistence_check(
    family: &ParameterFamily,
    a_star: &[C64],
    labels: &[LabelCertificate],
    config: &ClosingConfig,
) -> Result<bool> {
    let base_lab = critical_points(family.base())?;
    let lab = labeled_map_at(family, &base_lab, a_star)?;
    for lc in labels {
        // The certified critical point lies on its superattracting cycle.
        let seed = lab
            .points
            .iter()
            .find(|p| p.label == lc.label)
            .map(|p| p.location)
            .unwrap_or(SpherePoint::zero());
        let ok = crate::distortion::fatou_persistence(
            family,
            a_star,
            &seed,
            lc.period.max(1),
            config.cert_radius,
        )?;
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
