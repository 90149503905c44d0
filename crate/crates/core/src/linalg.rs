//! Small dense complex linear algebra.
//!
//! Everything here runs on matrices no larger than the number of critical
//! points (a handful of rows), so simple direct methods with partial
//! pivoting and cyclic Jacobi sweeps are both adequate and dependency-free.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use crate::C64;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> CMatrix {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        let mut m = CMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `A A^H` (Hermitian, rows x rows).
    pub fn gram(&self) -> CMatrix {
        let n = self.rows;
        let mut g = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..self.cols {
                    s += self.get(i, k) * self.get(j, k).conj();
                }
                g.set(i, j, s);
            }
        }
        g
    }

    /// `A^H v` for a length-`rows` vector.
    pub fn adjoint_apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                out[k] += self.get(i, k).conj() * v[i];
            }
        }
        out
    }

    /// `A v` for a length-`cols` vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            for k in 0..self.cols {
                out[i] += self.get(i, k) * v[k];
            }
        }
        out
    }
}

/// Singular values of a (rows x cols) complex matrix, descending, computed
/// as the square roots of the eigenvalues of the Hermitian Gram matrix by
/// cyclic Jacobi sweeps.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    // Work with the smaller Gram matrix.
    let use_rows = a.rows <= a.cols;
    let g = if use_rows {
        a.gram()
    } else {
        // A^H A
        let mut t = CMatrix::zeros(a.cols, a.rows);
        for i in 0..a.rows {
            for j in 0..a.cols {
                t.set(j, i, a.get(i, j).conj());
            }
        }
        t.gram()
    };
    let eig = hermitian_eigenvalues(&g);
    let mut sv: Vec<f64> = eig.into_iter().map(|l| l.max(0.0).sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.rows;
    let mut a = h.clone();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a.get(0, 0).re];
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * (a.frobenius() + 1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.norm() == 0.0 {
                    continue;
                }
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                // Unitary 2x2 diagonalisation of [[app, apq], [conj, aqq]].
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum_or_one() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns/rows update with complex rotation G: p' = c p - s phase^* q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * phase.conj() * s);
                    a.set(k, q, akp * phase * s + akq * c);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * phase * s);
                    a.set(q, k, apk * phase.conj() * s + aqk * c);
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i).re).collect()
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Solve the Hermitian positive-definite system `H x = b` by Gaussian
/// elimination with partial pivoting. Returns `None` on (numerical)
/// singularity.
pub fn solve(h: &CMatrix, b: &[C64]) -> Option<Vec<C64>> {
    let n = h.rows;
    let mut m = h.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m.get(col, col).norm();
        for r in (col + 1)..n {
            if m.get(r, col).norm() > best {
                best = m.get(r, col).norm();
                piv = r;
            }
        }
        if best < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                let tmp = m.get(col, k);
                m.set(col, k, m.get(piv, k));
                m.set(piv, k, tmp);
            }
            rhs.swap(col, piv);
        }
        let diag = m.get(col, col);
        for r in (col + 1)..n {
            let f = m.get(r, col) / diag;
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = m.get(r, k) - f * m.get(col, k);
                m.set(r, k, v);
            }
            let pivot_rhs = rhs[col];
            rhs[r] -= f * pivot_rhs;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for k in (col + 1)..n {
            s -= m.get(col, k) * x[k];
        }
        x[col] = s / m.get(col, col);
    }
    Some(x)
}

/// Minimum-norm solution step of the underdetermined system `J delta = r`:
/// `delta = J^H (J J^H)^-1 r`, with a tiny Tikhonov shift when the Gram
/// matrix is numerically singular.
pub fn min_norm_step(j: &CMatrix, r: &[C64]) -> Option<Vec<C64>> {
    let mut g = j.gram();
    let scale = g.frobenius().max(1e-300);
    let mut y = solve(&g, r);
    if y.is_none() {
        for i in 0..g.rows {
            let d = g.get(i, i) + C64::new(1e-14 * scale, 0.0);
            g.set(i, i, d);
        }
        y = solve(&g, r);
    }
    y.map(|y| j.adjoint_apply(&y))
}

/// Numerical rank against a relative singular-value threshold.
pub fn rank(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rel_tol * top.max(1e-300)).count()
}

/// Orthonormal basis of the null space of `A` (cols x k), by projecting the
/// standard basis against the conjugated rows (Gram-Schmidt): `A v = 0` iff
/// `v` is Hermitian-orthogonal to every conjugated row. Adequate for the
/// well-separated ranks that arise here.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> Vec<Vec<C64>> {
    let n = a.cols;
    // Orthonormalise the conjugated rows first.
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0).max(1e-300);
    for i in 0..a.rows {
        let mut v: Vec<C64> = (0..n).map(|k| a.get(i, k).conj()).collect();
        project_out(&mut v, &basis);
        let nv = vec_norm(&v);
        if nv > rel_tol * top {
            for x in v.iter_mut() {
                *x /= nv;
            }
            basis.push(v);
        }
    }
    let row_rank = basis.len();
    let mut null = Vec::new();
    for k in 0..n {
        if null.len() == n - row_rank {
            break;
        }
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[k] = C64::new(1.0, 0.0);
        project_out(&mut e, &basis);
        project_out(&mut e, &null);
        let ne = vec_norm(&e);
        if ne > 1e-8 {
            for x in e.iter_mut() {
                *x /= ne;
            }
            null.push(e);
        }
    }
    null
}

fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for b in basis {
        let mut dot = C64::new(0.0, 0.0);
        for (x, y) in v.iter().zip(b.iter()) {
            dot += y.conj() * x;
        }
        for (x, y) in v.iter_mut().zip(b.iter()) {
            *x -= dot * y;
        }
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = CMatrix::from_rows(&[
            vec![c(3.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 4.0)],
        ]);
        let sv = singular_values(&m);
        assert!((sv[0] - 4.0).abs() < 1e-12 && (sv[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_rank_deficient() {
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        let sv = singular_values(&m);
        assert!(sv[1] < 1e-12 * sv[0]);
        assert_eq!(rank(&m, 1e-10), 1);
    }

    #[test]
    fn min_norm_step_solves_underdetermined() {
        // Single equation in two unknowns: x + i y = 2.
        let j = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]);
        let d = min_norm_step(&j, &[c(2.0, 0.0)]).unwrap();
        let r = j.apply(&d);
        assert!((r[0] - c(2.0, 0.0)).norm() < 1e-12);
        // Minimum norm: delta is J^H times a scalar.
        assert!((d[0].norm() - d[1].norm()).abs() < 1e-12);
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 1.0), c(0.0, -2.0)]]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let r = m.apply(v);
            assert!(vec_norm(&r) < 1e-12);
            assert!((vec_norm(v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigenvalues_complex_offdiag() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ]);
        let mut e = hermitian_eigenvalues(&m);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-10 && (e[1] - 3.0).abs() < 1e-10);
    }
}
