//! Small dense linear-algebra helpers on top of faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, MatRef};

/// Operator 1-norm (largest column sum of moduli).
pub fn norm_one(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn norm_fro(a: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn lu_solve(lu: &PartialPivLu<c64>, mut rhs: Mat<c64>) -> Mat<c64> {
    lu.solve_in_place(&mut rhs);
    rhs
}

/// Hager–Higham estimate of the 1-norm condition number ‖A‖₁‖A⁻¹‖₁ from an
/// existing LU factorization.
pub fn condition_estimate(a: &Mat<c64>, lu: &PartialPivLu<c64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = Mat::<c64>::from_fn(n, 1, |_, _| c64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    let mut last_index = usize::MAX;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        let y_norm: f64 = (0..n).map(|i| y[(i, 0)].norm()).sum();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        estimate = f64::max(estimate, y_norm);
        let mut z = Mat::<c64>::from_fn(n, 1, |i, _| {
            let v = y[(i, 0)];
            if v.norm() > 0.0 {
                v / v.norm()
            } else {
                c64::new(1.0, 0.0)
            }
        });
        lu.solve_adjoint_in_place(&mut z);
        let (j, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].norm()))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
        if zmax <= ztx || j == last_index {
            break;
        }
        last_index = j;
        x = Mat::<c64>::zeros(n, 1);
        x[(j, 0)] = c64::new(1.0, 0.0);
    }
    norm_one(a.as_ref()) * estimate
}

/// Weighted inner product Σ w_i conj(a_i) b_i.
pub fn weighted_dot(w: &[f64], a: &[c64], b: &[c64]) -> c64 {
    w.iter().zip(a.iter().zip(b)).map(|(&w, (a, b))| a.conj() * b * w).sum()
}

pub fn weighted_norm(w: &[f64], a: &[c64]) -> f64 {
    w.iter().zip(a).map(|(&w, a)| w * a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column(a: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![c64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn column_matrix(x: &[c64]) -> Mat<c64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}
