//! Dense univariate polynomial helpers and the Aberth-Ehrlich
//! simultaneous root finder.
//!
//! Coefficient lists are stored lowest degree first throughout the crate.
//! The helpers are generic over a minimal ring so they can be reused with
//! double-double scalars during certificate verification.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::error::{DynamicsError, Result};
use crate::C64;

/// Minimal scalar interface for the generic helpers.
pub trait Ring: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn from_usize(n: usize) -> Self;
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_usize(n: usize) -> Self {
        n as f64
    }
}

impl Ring for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_usize(n: usize) -> Self {
        C64::new(n as f64, 0.0)
    }
}

/// Horner evaluation of `c[0] + c[1] x + ...`.
pub fn eval<T: Ring>(coeffs: &[T], x: T) -> T {
    let mut acc = T::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Coefficients of the derivative.
pub fn derivative<T: Ring>(coeffs: &[T]) -> Vec<T> {
    if coeffs.len() <= 1 {
        return vec![T::zero()];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| T::from_usize(k) * c)
        .collect()
}

/// Product of two coefficient lists.
pub fn mul<T: Ring>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = out[i + j] + ai * bj;
        }
    }
    out
}

/// Difference `a - b`, padding the shorter list.
pub fn sub<T: Ring>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or_else(T::zero);
            let y = b.get(i).copied().unwrap_or_else(T::zero);
            x - y
        })
        .collect()
}

/// Coefficient list reversed against a fixed degree `d`: the coefficients of
/// `z^d p(1/z)`. Lists shorter than `d + 1` are zero-padded first.
pub fn reverse<T: Ring>(coeffs: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); d + 1];
    for (i, &c) in coeffs.iter().enumerate().take(d + 1) {
        out[d - i] = c;
    }
    out
}

/// Evaluate the homogenisation `sum c_i z^i w^(d-i)` of a degree-`d` list.
pub fn eval_homogeneous<T: Ring>(coeffs: &[T], d: usize, z: T, w: T) -> T {
    // Powers are accumulated incrementally; d stays small (<= ~20).
    let mut zp = vec![T::zero(); d + 1];
    let mut wp = vec![T::zero(); d + 1];
    let one = T::from_usize(1);
    zp[0] = one;
    wp[0] = one;
    for k in 1..=d {
        zp[k] = zp[k - 1] * z;
        wp[k] = wp[k - 1] * w;
    }
    let mut acc = T::zero();
    for i in 0..=d {
        let c = coeffs.get(i).copied().unwrap_or_else(T::zero);
        acc = acc + c * zp[i] * wp[d - i];
    }
    acc
}

fn max_coeff_norm(coeffs: &[C64]) -> f64 {
    coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Degree after trimming top coefficients that are negligible against the
/// largest one. Returns the number of retained coefficients minus one and the
/// count of trimmed (infinite) roots.
pub fn effective_degree(coeffs: &[C64], rel_tol: f64) -> (usize, usize) {
    let scale = max_coeff_norm(coeffs);
    let mut top = coeffs.len();
    while top > 1 && coeffs[top - 1].norm() <= rel_tol * scale {
        top -= 1;
    }
    (top - 1, coeffs.len() - top)
}

/// Options for [`aberth_roots`].
#[derive(Debug, Clone, Copy)]
pub struct AberthOptions {
    pub max_iterations: usize,
    /// Relative backward-error tolerance for acceptance.
    pub rel_residual: f64,
}

impl Default for AberthOptions {
    fn default() -> Self {
        AberthOptions {
            max_iterations: 300,
            rel_residual: 1e-13,
        }
    }
}

/// All finite roots of a complex polynomial by Aberth-Ehrlich simultaneous
/// iteration, started from a circle of initial guesses. No deflation is
/// performed; every root is refined against the full polynomial.
///
/// The input must have a nonzero leading coefficient (trim with
/// [`effective_degree`] first). Roots are returned unordered.
pub fn aberth_roots(coeffs: &[C64], opts: AberthOptions) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    debug_assert!(lead.norm() > 0.0);
    if n == 1 {
        return Ok(vec![-coeffs[0] / coeffs[1]]);
    }

    let deriv = derivative(coeffs);

    // Fujiwara bound for the root radius.
    let mut radius: f64 = 0.0;
    for (i, c) in coeffs.iter().enumerate().take(n) {
        let r = (c.norm() / lead.norm()).powf(1.0 / (n - i) as f64);
        radius = radius.max(r);
    }
    radius = 2.0 * radius.max(1e-3);

    // Offset angle avoids symmetry locking on real-coefficient inputs.
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let theta = core::f64::consts::TAU * (k as f64 + 0.354) / n as f64;
            C64::new(radius * theta.cos(), radius * theta.sin())
        })
        .collect();

    let coeff_scale = max_coeff_norm(coeffs);
    let residual_ok = |x: C64, px: C64| -> bool {
        // Backward-error scale that allows absolute perturbation of zero
        // coefficients (multiple roots at the origin would otherwise never
        // pass a purely relative test).
        let scale = coeff_scale * (1.0 + x.norm()).powi(n as i32);
        px.norm() <= opts.rel_residual * scale.max(f64::MIN_POSITIVE)
    };

    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let pz = eval(coeffs, z[i]);
            let dpz = eval(&deriv, z[i]);
            if pz.norm() == 0.0 {
                continue;
            }
            let w = if dpz.norm() > 0.0 {
                pz / dpz
            } else {
                // Flat spot: nudge off it.
                C64::new(1e-8, 1e-8)
            };
            let mut s = C64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    let d = z[i] - zj;
                    if d.norm() > 0.0 {
                        s += C64::new(1.0, 0.0) / d;
                    }
                }
            }
            let denom = C64::new(1.0, 0.0) - w * s;
            let step = if denom.norm() > 1e-300 { w / denom } else { w };
            z[i] -= step;
            moved = moved.max(step.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-16 {
            break;
        }
        worst = moved;
    }

    let mut bad = 0.0f64;
    for &zi in &z {
        let pz = eval(coeffs, zi);
        if !residual_ok(zi, pz) {
            bad = bad.max(pz.norm());
        }
    }
    if bad > 0.0 {
        return Err(DynamicsError::RootFindingFailure {
            residual: bad.max(worst),
        });
    }
    Ok(z)
}

/// Resultant of two polynomials regarded as a degree-`d` homogeneous pair,
/// via the determinant of the (2d x 2d) Sylvester matrix.
pub fn resultant(p: &[C64], q: &[C64], d: usize) -> C64 {
    if d == 0 {
        return C64::new(1.0, 0.0);
    }
    let n = 2 * d;
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    let get = |c: &[C64], i: usize| c.get(i).copied().unwrap_or(C64::new(0.0, 0.0));
    // Row r of the first block holds p shifted by r (highest degree first).
    for r in 0..d {
        for k in 0..=d {
            m[r * n + (r + k)] = get(p, d - k);
        }
    }
    for r in 0..d {
        for k in 0..=d {
            m[(d + r) * n + (r + k)] = get(q, d - k);
        }
    }
    determinant(&mut m, n)
}

/// In-place LU determinant with partial pivoting; consumes the buffer.
fn determinant(m: &mut [C64], n: usize) -> C64 {
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].norm();
        for r in (col + 1)..n {
            let v = m[r * n + col].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let diag = m[col * n + col];
        det *= diag;
        for r in (col + 1)..n {
            let factor = m[r * n + col] / diag;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = factor * m[col * n + k];
                m[r * n + k] -= sub;
            }
        }
    }
    det
}
