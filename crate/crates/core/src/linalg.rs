//! Sparse storage and the linear solvers behind the Newton and eigen iterations.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("zero pivot at row {0} in tridiagonal sweep")]
    ZeroPivot(usize),
    #[error("iterative solver breakdown after {0} iterations")]
    Breakdown(usize),
}

/// Square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut fill = counts.clone();
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in &row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Row-wise Σ_j |a_ij x_j|, the magnitude scale of each row of `A x`.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| (v * x[j]).abs()).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Returns `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.n);
        for (i, &di) in d.iter().enumerate().take(self.n) {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            triplets.push((i, i, di));
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| {
            self.row(i)
                .all(|(j, v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }

    /// Coordinate-list text, one `i j value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let _ = writeln!(out, "{i} {j} {v:e}");
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solves a tridiagonal system by the Thomas sweep (no pivoting).
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (`sub[0]` is ignored) and `sup[i]`
/// multiplies `x[i+1]` (`sup[n-1]` is ignored).
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    for len in [sub.len(), sup.len(), rhs.len()] {
        if len != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: len,
            });
        }
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(LinalgError::ZeroPivot(0));
    }
    c[0] = sup[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LinalgError::ZeroPivot(i));
        }
        c[i] = sup[i] / pivot;
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeOutcome {
    pub iterations: usize,
    /// True relative residual ‖b − A x‖₂ / ‖b‖₂ at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
        .collect()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Conjugate gradients with a diagonal (Jacobi) preconditioner.
///
/// `x` holds the initial guess and receives the iterate. Stops when the
/// recursive residual drops below `tol * ‖b‖`. Returns `Breakdown` when a
/// search direction has non-positive curvature, which signals an indefinite
/// matrix.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<IterativeOutcome, LinalgError> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: b.len().min(x.len()),
        });
    }
    let inv_diag = jacobi(a);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(IterativeOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let ax = a.mul_vec(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = tol * bnorm;
    let mut iterations = 0;
    while iterations < max_iter && norm2(&r) > target {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(LinalgError::Breakdown(iterations));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    let converged = norm2(&r) <= target;
    Ok(IterativeOutcome {
        iterations,
        relative_residual: true_residual(a, b, x),
        converged,
    })
}

/// Preconditioned MINRES for symmetric, possibly indefinite systems.
///
/// The preconditioner is diag(|a_ii|)⁻¹. Follows the Paige–Saunders
/// recurrences; stops when the preconditioned residual estimate falls
/// below `tol` relative to its initial value.
pub fn minres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<IterativeOutcome, LinalgError> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: b.len().min(x.len()),
        });
    }
    let inv_diag = jacobi(a);
    let ax = a.mul_vec(x);
    let mut r1: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut y: Vec<f64> = r1.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return Ok(IterativeOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        a.mul_vec_into(&v, &mut y);
        if iterations >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        for i in 0..n {
            y[i] = r2[i] * inv_diag[i];
        }
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(LinalgError::Breakdown(iterations));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(IterativeOutcome {
        iterations,
        relative_residual: true_residual(a, b, x),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_merge_duplicates() {
        let a =
            CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
        assert!(a.is_symmetric(1e-15));
        assert_eq!(a.to_coordinate_text().lines().count(), 3);
    }

    #[test]
    fn thomas_matches_direct_product() {
        let n = 50;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -1.0 + 0.005 * i as f64).collect();
        let diag = vec![4.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * x_true[i];
                if i > 0 {
                    s += sub[i] * x_true[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn pcg_solves_spd_system() {
        let a = laplacian_1d(200, 0.01);
        let x_true: Vec<f64> = (0..200).map(|i| 1.0 + (i as f64 * 0.05).cos()).collect();
        let b = a.mul_vec(&x_true);
        let mut x = vec![0.0; 200];
        let out = pcg(&a, &b, &mut x, 1e-12, 5000).unwrap();
        assert!(out.converged);
        assert!(out.relative_residual < 1e-11);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn pcg_flags_indefinite_matrix() {
        let a = laplacian_1d(20, -1.5);
        let b = vec![1.0; 20];
        let mut x = vec![0.0; 20];
        assert!(matches!(
            pcg(&a, &b, &mut x, 1e-12, 100),
            Err(LinalgError::Breakdown(_))
        ));
    }

    #[test]
    fn minres_solves_indefinite_system() {
        // shift past the smallest eigenvalue of the 1D Laplacian
        let a = laplacian_1d(100, -0.01);
        let x_true: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&x_true);
        let mut x = vec![0.0; 100];
        let out = minres(&a, &b, &mut x, 1e-13, 2000).unwrap();
        assert!(out.converged, "{out:?}");
        assert!(out.relative_residual < 1e-10, "{out:?}");
    }
}
