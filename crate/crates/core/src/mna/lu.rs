//! Dense complex LU solve with partial pivoting.
//!
//! Hand-rolled instead of delegating to a library factorization for two
//! reasons: the pivot rule must be fully specified so AC sweeps are
//! bit-reproducible across runs and thread counts, and a failed pivot must
//! surface *which* unknown went singular (a floating node or a broken branch
//! row), which generic solvers do not report.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot floor: a pivot this small compared to the largest entry of
/// the original matrix means the corresponding unknown is undetermined.
const PIVOT_REL_TOL: f64 = 1e-13;

/// Solve `a·x = b` in place. Pivot selection takes the largest `|a[r][k]|`
/// for `r ≥ k` under strict comparison, so ties keep the lowest row index —
/// one fixed elimination order regardless of platform.
pub(crate) fn solve(
    mut a: DMatrix<Complex64>,
    mut b: DVector<Complex64>,
    labels: &[String],
) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(labels.len(), n);

    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let tol = PIVOT_REL_TOL * scale;

    for k in 0..n {
        let mut pivot_row = k;
        let mut best = a[(k, k)].norm_sqr();
        for r in (k + 1)..n {
            let mag = a[(r, k)].norm_sqr();
            if mag > best {
                best = mag;
                pivot_row = r;
            }
        }
        let pivot_mag = best.sqrt();
        if !(pivot_mag > tol) || !pivot_mag.is_finite() {
            return Err(Error::SingularSystem {
                unknown: labels[k].clone(),
                pivot: pivot_mag,
            });
        }
        if pivot_row != k {
            a.swap_rows(k, pivot_row);
            b.swap_rows(k, pivot_row);
        }
        let pivot = a[(k, k)];
        for r in (k + 1)..n {
            let factor = a[(r, k)] / pivot;
            if factor == Complex64::ZERO {
                continue;
            }
            a[(r, k)] = Complex64::ZERO;
            for c in (k + 1)..n {
                let delta = factor * a[(k, c)];
                a[(r, c)] -= delta;
            }
            let delta = factor * b[k];
            b[r] -= delta;
        }
    }

    // Back substitution into b.
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in (k + 1)..n {
            acc -= a[(k, c)] * b[c];
        }
        b[k] = acc / a[(k, k)];
    }
    Ok(b)
}
