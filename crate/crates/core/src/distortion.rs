//! Standalone numeric checks of the distortion estimates the solver relies
//! on: the product inequality, the main distortion ratio along shadowing
//! orbits, the comparison of parameter and space derivatives, the
//! stability of their quotient, distortion over the free period, and
//! persistence of attracting basins under perturbation.
//!
//! Each check returns the measured worst value; PASS thresholds live with
//! the caller (they are artifact conventions, except the two verbatim
//! constants 1/100 and 1/1000 checked by the solver and `q_stability`).

#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{DynamicsError, Result};
use crate::linalg::vec_norm;
use crate::motion::{ChartedJet, EvalAt, MotionContext};
use crate::orbit::least_squares_slope;
use crate::sampling;
use crate::sphere::{chordal, Chart, RationalMap, SpherePoint};
use crate::C64;

/// One diagnostic outcome.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub lemma: String,
    pub radius: f64,
    pub samples: usize,
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `|prod(1 + u_n) - 1| <= exp(sum |u_n|) - 1` for every sample list;
/// returns the worst slack violation (0 when none).
pub fn prod_dist_check(samples: &[Vec<C64>]) -> DistortionReport {
    let mut worst_violation = 0.0f64;
    for list in samples {
        let mut prod = C64::new(1.0, 0.0);
        let mut sum = 0.0f64;
        for u in list {
            prod *= C64::new(1.0, 0.0) + u;
            sum += u.norm();
        }
        let lhs = (prod - C64::new(1.0, 0.0)).norm();
        let rhs = sum.exp() - 1.0;
        if lhs > rhs {
            worst_violation = worst_violation.max(lhs - rhs);
        }
    }
    DistortionReport {
        lemma: "prod-dist".into(),
        radius: 0.0,
        samples: samples.len(),
        worst: worst_violation,
        threshold: 0.0,
        pass: worst_violation <= 0.0,
    }
}

/// Derivative of `f^n` along a concrete orbit in the given chart chain.
pub fn derivative_along_orbit(
    map: &RationalMap,
    points: &[SpherePoint],
    charts: &[Chart],
) -> C64 {
    let mut d = C64::new(1.0, 0.0);
    for i in 0..points.len().saturating_sub(1) {
        d *= map.chart_derivative(&points[i], charts[i], charts[i + 1]);
    }
    d
}

/// Which point the main-distortion orbit starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionStart {
    /// The tracked critical value `v(a)`.
    CriticalValue,
    /// Its moved skeleton target `mu_0(a)`.
    MovedTarget,
}

/// `|(f_a^n)'(start_a) / (f_b^n)'(start_b) - 1|` with both orbits required
/// to shadow the moved skeleton inside its `delta'`-neighbourhood for all
/// steps up to `n`.
pub fn main_distortion(
    ctx: &MotionContext<'_>,
    label: usize,
    a: &[C64],
    b: &[C64],
    n: usize,
    start: DistortionStart,
) -> Result<f64> {
    let at_a = ctx.prepare(a, None)?;
    let at_b = ctx.prepare(b, Some(&at_a.cont))?;
    let (points_a, charts) = value_orbit(ctx, &at_a, label, n, start)?;
    let (points_b, _) = value_orbit(ctx, &at_b, label, n, start)?;
    let da = derivative_along_orbit(&at_a.fam.map, &points_a, &charts);
    let db = derivative_along_orbit(&at_b.fam.map, &points_b, &charts);
    if db.norm() == 0.0 {
        return Err(DynamicsError::HypothesisViolation {
            clause: "comparison orbit passes through a critical point".into(),
        });
    }
    Ok((da / db - C64::new(1.0, 0.0)).norm())
}

/// Orbit of the tracked critical value (or its moved target) with its
/// reporting-chart chain, shadow-checked against the moved skeleton.
fn value_orbit(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    label: usize,
    n: usize,
    start: DistortionStart,
) -> Result<(Vec<SpherePoint>, Vec<Chart>)> {
    let entry = ctx
        .skeleton
        .entry_for(label)
        .ok_or_else(|| DynamicsError::Precondition {
            detail: format!("label {label} has no skeleton entry"),
        })?;
    let offset = entry.offset;
    let points: Vec<SpherePoint> = match start {
        DistortionStart::CriticalValue => {
            let orbit = ctx.xi_orbit(at, label, offset + n)?;
            orbit[offset..].to_vec()
        }
        DistortionStart::MovedTarget => {
            let mu0 = ctx.moved_orbit_point(at, label, offset)?;
            at.fam.map.iterate(&mu0, n)?
        }
    };
    // Shadowing requirement.
    for (k, p) in points.iter().enumerate() {
        let mu = ctx.moved_orbit_point(at, label, offset + k)?;
        if chordal(p, &mu).value() > ctx.skeleton.delta_prime {
            return Err(DynamicsError::LeftNeighborhood { step: k });
        }
    }
    let charts: Vec<Chart> = points.iter().map(|p| p.reporting_chart()).collect();
    Ok((points, charts))
}

/// Relative deviation `||xi_n'(a) - (f_a^s)'(v(a)) x'(a)|| / ||xi_n'(a)||`
/// at orbit index `n` (so `s = n - offset` steps beyond the tracked value),
/// inside the proposition window
/// `window_lo <= |xi_n(a) - mu_n(a)| <= delta'`.
pub fn comp_prop_check(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    label: usize,
    n: usize,
    window_lo: f64,
) -> Result<f64> {
    let entry = ctx
        .skeleton
        .entry_for(label)
        .ok_or_else(|| DynamicsError::Precondition {
            detail: format!("label {label} has no skeleton entry"),
        })?;
    let offset = entry.offset;
    if n < offset {
        return Err(DynamicsError::Precondition {
            detail: format!("orbit index {n} precedes the tracked entry {offset}"),
        });
    }
    let orbit = ctx.xi_orbit(at, label, n)?;
    let mu_n = ctx.moved_orbit_point(at, label, n)?;
    let dist = chordal(&orbit[n], &mu_n).value();
    if dist < window_lo || dist > ctx.skeleton.delta_prime {
        return Err(DynamicsError::WindowViolation {
            value: dist,
            lo: window_lo,
            hi: ctx.skeleton.delta_prime,
        });
    }

    let x = ctx.x_value(at, label)?;
    let chain = orbit[offset..=n].to_vec();
    let mut charts: Vec<Chart> = chain.iter().map(|p| p.reporting_chart()).collect();
    charts[0] = x.chart;
    let end_chart = *charts.last().expect("nonempty chain");
    let deriv = derivative_along_orbit(&at.fam.map, &chain, &charts);

    let (_, xi_jet) = ctx.xi_jet(at, label, n, Some(end_chart))?;
    let predicted: Vec<C64> = x.grad.iter().map(|g| deriv * g).collect();
    let diff: Vec<C64> = xi_jet
        .grad
        .iter()
        .zip(predicted.iter())
        .map(|(u, v)| u - v)
        .collect();
    let denom = vec_norm(&xi_jet.grad);
    if denom == 0.0 {
        return Err(DynamicsError::HypothesisViolation {
            clause: "vanishing xi gradient".into(),
        });
    }
    Ok(vec_norm(&diff) / denom)
}

/// Outcome of the quotient-stability check.
#[derive(Debug, Clone)]
pub struct QStability {
    /// `max_{N <= k <= m} ||Q_k - Q_N||`.
    pub max_deviation: f64,
    pub q_n_norm: f64,
    /// `max_deviation / (||Q_N|| / 1000)`: at most 1 when the verbatim
    /// bound holds.
    pub ratio_to_target: f64,
    /// Fitted expansion rate of `|(f^k)'(y_N)|`.
    pub fitted_rate: f64,
}

/// Bound constant of the quotient-stability statement.
pub const Q_STABILITY_DENOMINATOR: f64 = 1000.0;

/// Stability of `Q_k = xi_k'(a) / (f_a^k)'(v(a))` over the window
/// `k in [n_window, m_end]` (indices counted beyond the tracked entry).
///
/// Hypotheses are sampled before measuring: the orbit keeps chordal
/// distance `>= delta` from the Julia-side critical points up to `m_end`,
/// the derivative along the orbit from index `n_window` grows at fitted
/// rate `>= (3/4) log lambda`, and the parameter derivative stays below
/// `param_bound` along the orbit.
pub fn q_stability(
    ctx: &MotionContext<'_>,
    at: &EvalAt,
    label: usize,
    n_window: usize,
    m_end: usize,
    param_bound: f64,
) -> Result<QStability> {
    if m_end < n_window {
        return Err(DynamicsError::Precondition {
            detail: "window end precedes window start".into(),
        });
    }
    let entry = ctx
        .skeleton
        .entry_for(label)
        .ok_or_else(|| DynamicsError::Precondition {
            detail: format!("label {label} has no skeleton entry"),
        })?;
    let offset = entry.offset;
    let orbit = ctx.xi_orbit(at, label, offset + m_end)?;
    let y = &orbit[offset..];

    // Hypothesis: distance to the Julia-side critical points.
    let julia_crit: Vec<SpherePoint> = at
        .labeling
        .points
        .iter()
        .filter(|p| ctx.skeleton.julia_labels.contains(&p.label))
        .map(|p| p.location)
        .collect();
    for (k, p) in y.iter().enumerate() {
        for c in &julia_crit {
            let d = chordal(p, c).value();
            if d < ctx.skeleton.delta {
                return Err(DynamicsError::HypothesisViolation {
                    clause: format!(
                        "orbit step {k} within {d:.3e} of a Julia critical point (delta = {:.3e})",
                        ctx.skeleton.delta
                    ),
                });
            }
        }
    }

    // Walk the jet along the orbit, recording the cumulative chart-chain
    // derivative from y_0 and the xi gradient at every index.
    let charts: Vec<Chart> = y.iter().map(|p| p.reporting_chart()).collect();
    let (_, mut jet) = ctx.xi_jet(at, label, offset, Some(charts[0]))?;
    let mut chain_derivs: Vec<C64> = Vec::with_capacity(m_end + 1);
    let mut jets: Vec<ChartedJet> = Vec::with_capacity(m_end + 1);
    let mut d = C64::new(1.0, 0.0);
    chain_derivs.push(d);
    jets.push(jet.clone());
    let mut max_da = 0.0f64;
    for k in 0..m_end {
        let cm = at.fam.charted(charts[k], charts[k + 1]);
        let e = cm.dz(jet.value);
        let da = cm.da(jet.value);
        max_da = max_da.max(vec_norm(&da));
        let grad: Vec<C64> = jet
            .grad
            .iter()
            .zip(da.iter())
            .map(|(g, dv)| e * g + dv)
            .collect();
        jet = ChartedJet {
            point: y[k + 1],
            chart: charts[k + 1],
            value: y[k + 1].chart_value(charts[k + 1]),
            grad,
        };
        d *= e;
        chain_derivs.push(d);
        jets.push(jet.clone());
    }

    if max_da > param_bound {
        return Err(DynamicsError::HypothesisViolation {
            clause: format!(
                "parameter derivative {max_da:.3e} above the bound {param_bound:.3e}"
            ),
        });
    }

    // Hypothesis: the window anchor still shadows the moved skeleton.
    {
        let mu_n = ctx.moved_orbit_point(at, label, offset + n_window)?;
        let d = chordal(&y[n_window], &mu_n).value();
        if d > ctx.skeleton.delta_prime {
            return Err(DynamicsError::HypothesisViolation {
                clause: format!(
                    "window anchor {d:.3e} outside the delta'-neighbourhood {:.3e}",
                    ctx.skeleton.delta_prime
                ),
            });
        }
    }

    // Hypothesis: expansion from the window start, measured on the affine
    // derivative cocycle. An orbit that saturates toward a pole or infinity
    // has unbounded affine derivative and passes outright.
    let mut log_products: Vec<f64> = Vec::with_capacity(m_end - n_window + 1);
    let mut acc = 0.0f64;
    let mut saturated = false;
    log_products.push(acc);
    for k in n_window..m_end {
        match at.fam.map.affine_derivative(&y[k]) {
            Some(d) if d.norm() > 0.0 && d.norm().is_finite() => {
                acc += d.norm().ln();
                log_products.push(acc);
            }
            _ => {
                saturated = true;
                break;
            }
        }
    }
    let rate_floor = 0.75 * ctx.skeleton.lambda.ln();
    let fitted_rate = if saturated {
        f64::INFINITY
    } else {
        let pts: Vec<(f64, f64)> = log_products
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64, *v))
            .collect();
        least_squares_slope(&pts)
    };
    if !saturated && log_products.len() >= 3 && fitted_rate < rate_floor {
        return Err(DynamicsError::HypothesisViolation {
            clause: format!(
                "fitted expansion rate {fitted_rate:.3} below (3/4) log lambda = {rate_floor:.3}"
            ),
        });
    }

    // Q_k = xi'_k / (f^k)'(y_0), all expressed against the chart chain.
    let q = |k: usize| -> Vec<C64> {
        jets[k].grad.iter().map(|g| g / chain_derivs[k]).collect()
    };
    let qn = q(n_window);
    let qn_norm = vec_norm(&qn);
    let mut max_deviation = 0.0f64;
    for k in n_window..=m_end {
        let qk = q(k);
        let diff: Vec<C64> = qk.iter().zip(qn.iter()).map(|(u, v)| u - v).collect();
        max_deviation = max_deviation.max(vec_norm(&diff));
    }
    Ok(QStability {
        max_deviation,
        q_n_norm: qn_norm,
        ratio_to_target: max_deviation / (qn_norm / Q_STABILITY_DENOMINATOR).max(1e-300),
        fitted_rate,
    })
}

/// Free-period distortion: `|(f^n)'(z, a) / (f^n)'(w, b) - 1|` for orbits
/// required to avoid the `u_radius`-neighbourhood of the given centers and
/// to stay pairwise within `s_prime` for all steps.
#[allow(clippy::too_many_arguments)]
pub fn extended_distortion(
    map_a: &RationalMap,
    map_b: &RationalMap,
    z: &SpherePoint,
    w: &SpherePoint,
    n: usize,
    u_centers: &[SpherePoint],
    u_radius: f64,
    s_prime: f64,
) -> Result<f64> {
    let orbit_a = map_a.iterate(z, n)?;
    let orbit_b = map_b.iterate(w, n)?;
    for k in 0..=n {
        for c in u_centers {
            if chordal(&orbit_a[k], c).value() <= u_radius
                || chordal(&orbit_b[k], c).value() <= u_radius
            {
                return Err(DynamicsError::HypothesisViolation {
                    clause: format!("orbit enters the critical neighbourhood at step {k}"),
                });
            }
        }
        if chordal(&orbit_a[k], &orbit_b[k]).value() > s_prime {
            return Err(DynamicsError::HypothesisViolation {
                clause: format!("orbits separate beyond S' at step {k}"),
            });
        }
    }
    let charts: Vec<Chart> = orbit_a.iter().map(|p| p.reporting_chart()).collect();
    let da = derivative_along_orbit(map_a, &orbit_a, &charts);
    let db = derivative_along_orbit(map_b, &orbit_b, &charts);
    if db.norm() == 0.0 {
        return Err(DynamicsError::HypothesisViolation {
            clause: "comparison orbit passes through a critical point".into(),
        });
    }
    Ok((da / db - C64::new(1.0, 0.0)).norm())
}

/// Estimate a trap radius around an attracting cycle point: the largest
/// dyadic radius whose sampled cap halves its distance to the cycle after
/// one period.
pub fn trap_radius(map: &RationalMap, cycle_point: &SpherePoint, period: usize) -> f64 {
    let mut rho = 0.2f64;
    while rho > 1e-9 {
        let mut ok = true;
        for s in sampling::chordal_cap(cycle_point, rho, 24) {
            let mut cur = s;
            for _ in 0..period {
                match map.eval(&cur) {
                    Ok(q) => cur = q,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if chordal(&cur, cycle_point).value() > rho / 2.0 {
                ok = false;
            }
            if !ok {
                break;
            }
        }
        if ok {
            return rho;
        }
        rho /= 2.0;
    }
    0.0
}

/// A compact disk at half the estimated basin radius iterates into the
/// trap neighbourhood of the cycle.
pub fn disk_iterates_into_trap(
    map: &RationalMap,
    cycle_point: &SpherePoint,
    period: usize,
) -> bool {
    let rho = trap_radius(map, cycle_point, period);
    if rho == 0.0 {
        return false;
    }
    // K: disk at half the basin-radius estimate (here: twice the certified
    // trap radius, probed outward), sampled and iterated into the trap.
    let k_radius = rho;
    for s in sampling::chordal_cap(cycle_point, k_radius / 2.0, 32) {
        let mut cur = s;
        let mut entered = false;
        for _ in 0..(60 * period.max(1)) {
            if chordal(&cur, cycle_point).value() <= rho / 2.0 {
                entered = true;
                break;
            }
            match map.eval(&cur) {
                Ok(q) => cur = q,
                Err(_) => return false,
            }
        }
        if !entered {
            return false;
        }
    }
    true
}

/// Persistence of an attracting cycle over a sampled parameter sphere: the
/// continued cycle stays attracting and its basin keeps swallowing a
/// compact disk.
pub fn fatou_persistence(
    family: &crate::family::ParameterFamily,
    a_center: &[C64],
    cycle_point: &SpherePoint,
    period: usize,
    radius: f64,
) -> Result<bool> {
    let map0 = family.map_at(a_center)?;
    let orbit0 = map0.iterate(cycle_point, period.max(1) - 1)?;
    let mult0 = crate::orbit::cycle_multiplier(&map0, &orbit0);
    if mult0.norm() >= 1.0 {
        return Err(DynamicsError::Precondition {
            detail: format!(
                "persistence requires an attracting cycle (|multiplier| = {:.3})",
                mult0.norm()
            ),
        });
    }
    let m = family.dimension();
    for v in sampling::unit_directions(m, 8 + 2 * m) {
        let a: Vec<C64> = a_center
            .iter()
            .zip(v.iter())
            .map(|(x, d)| x + d * radius)
            .collect();
        if crate::family::param_norm(&a) > family.radius() {
            continue;
        }
        let map = family.map_at(&a)?;
        let z = match crate::orbit::refine_periodic(
            &map,
            cycle_point,
            period.max(1),
            crate::orbit::NewtonOptions::default(),
        ) {
            Ok(z) => z,
            Err(_) => return Ok(false),
        };
        let orbit = map.iterate(&z, period.max(1) - 1)?;
        let mult = crate::orbit::cycle_multiplier(&map, &orbit);
        if mult.norm() >= 1.0 {
            return Ok(false);
        }
        if !disk_iterates_into_trap(&map, &z, period.max(1)) {
            return Ok(false);
        }
    }
    Ok(true)
}
