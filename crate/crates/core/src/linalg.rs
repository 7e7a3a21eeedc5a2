//! Small dense linear algebra helpers.
//!
//! The systems solved in this crate are tiny (2×2 for inversion, E·F ≤ a few
//! dozen for control-net fitting), so a plain Gaussian elimination with
//! partial pivoting is all we need.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solve `A x = b` in place for several right-hand sides.
///
/// `a` is row-major `n×n`, `rhs` holds `m` right-hand sides of length `n`
/// each. Returns the solutions in the same layout. Fails with
/// [`Error::SingularSystem`] when a pivot falls below `rel_tol` times the
/// largest absolute entry of `a`.
pub fn solve<R: Real>(a: &[R], n: usize, rhs: &[Vec<R>], rel_tol: R) -> Result<Vec<Vec<R>>> {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x: Vec<Vec<R>> = rhs.to_vec();

    let scale = m
        .iter()
        .fold(R::zero(), |acc, &v| acc.max(v.abs()))
        .max(R::min_positive_value());
    let tol = rel_tol * scale;

    for col in 0..n {
        // partial pivoting
        let mut pivot_row = col;
        let mut pivot_val = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val <= tol {
            return Err(Error::SingularSystem(format!(
                "pivot {pivot_val} at column {col} below tolerance"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            for sol in x.iter_mut() {
                sol.swap(col, pivot_row);
            }
        }
        let inv_pivot = R::one() / m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] * inv_pivot;
            if factor == R::zero() {
                continue;
            }
            for k in col..n {
                let upd = m[col * n + k] * factor;
                m[row * n + k] = m[row * n + k] - upd;
            }
            for sol in x.iter_mut() {
                let upd = sol[col] * factor;
                sol[row] = sol[row] - upd;
            }
        }
    }

    // back substitution
    for sol in x.iter_mut() {
        for row in (0..n).rev() {
            let mut acc = sol[row];
            for k in row + 1..n {
                acc = acc - m[row * n + k] * sol[k];
            }
            sol[row] = acc / m[row * n + row];
        }
    }
    Ok(x)
}

/// Solve the symmetric 2×2 system `H x = b`, returning the solution and the
/// 2-norm condition number of `H`.
pub fn solve_sym2<R: Real>(h: [[R; 2]; 2], b: [R; 2]) -> Option<([R; 2], R)> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    // eigenvalues of a symmetric 2x2
    let half_tr = (h[0][0] + h[1][1]) / R::from_f64_lossy(2.0);
    let disc = (half_tr * half_tr - det).max(R::zero()).sqrt();
    let l1 = (half_tr + disc).abs();
    let l2 = (half_tr - disc).abs();
    let (lmax, lmin) = if l1 > l2 { (l1, l2) } else { (l2, l1) };
    if lmin <= R::min_positive_value() * R::from_f64_lossy(4.0) {
        return None;
    }
    let cond = lmax / lmin;
    let x0 = (b[0] * h[1][1] - b[1] * h[0][1]) / det;
    let x1 = (b[1] * h[0][0] - b[0] * h[1][0]) / det;
    Some(([x0, x1], cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a: Vec<f64> = vec![4.0, 1.0, 1.0, 3.0];
        let sol = solve(&a, 2, &[vec![1.0, 2.0]], 1e-12).unwrap();
        let x = &sol[0];
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        let a: Vec<f64> = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            solve(&a, 2, &[vec![1.0, 1.0]], 1e-9),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn sym2_condition_number() {
        let (x, cond) = solve_sym2::<f64>([[2.0, 0.0], [0.0, 1.0]], [2.0, 3.0]).unwrap();
        assert_eq!(x, [1.0, 3.0]);
        assert!((cond - 2.0).abs() < 1e-14);
    }
}
