//! Generalized eigenvalues of the real matrix pencil `(A, B)`: the finite
//! `s` with `det(A + s·B) = 0`.
//!
//! MNA pencils are routinely singular in `B` (resistive rows, source branch
//! rows carry no capacitance), so a direct QZ-style stock routine is not
//! available and the textbook trick applies: pick a shift `σ` where
//! `A + σB` is invertible and form `M = (A + σB)⁻¹·B`. Each eigenvalue
//! `μ ≠ 0` of `M` maps to a pencil eigenvalue `s = σ − 1/μ`; structurally
//! infinite modes land at `μ = 0` and are dropped. One successful shift
//! observes every finite eigenvalue, so shifts are alternatives rather than
//! accumulators.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Candidate shifts, tried in order. Zero first (cheapest to reason about),
/// then two deliberately "uninteresting" magnitudes — off any round-number
/// circuit constant — bracketing audio and RF scales, and one negative value
/// for pencils whose A-matrix is singular at every positive shift.
const SHIFTS: [f64; 4] = [0.0, 997.0, 1.003e6, -1.7e4];

/// Eigenvalues with magnitude at or beyond this are treated as the
/// numerical shadow of structurally infinite modes and discarded.
const FINITE_CUTOFF: f64 = 1e15;

/// `μ` below this is an exactly-infinite pencil mode (B null direction).
const MU_FLOOR: f64 = 1e-30;

/// Structurally infinite modes come back from the Schur step not as exact
/// zeros but as `|μ| ≲ ε·‖M‖` (the backward error of the factorization), so
/// the floor must scale with the matrix. Genuine eigenvalues sit many orders
/// above this: `|μ| = 1/|σ − s|`, and `‖M‖ ≥ max|μ|`.
const MU_REL_FLOOR: f64 = 1e-11;

const MAX_SCHUR_ITERATIONS: usize = 20_000;

pub(crate) fn generalized_eigs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    context: &str,
) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    debug_assert_eq!((a.ncols(), b.nrows(), b.ncols()), (n, n, n));
    if n == 0 {
        return Ok(Vec::new());
    }

    for &sigma in &SHIFTS {
        let shifted = a + sigma * b;
        let lu = shifted.clone().lu();
        let det = lu.determinant();
        // A vanishing determinant means the shift itself sits on an
        // eigenvalue; step to the next candidate.
        if !det.is_finite() || det.abs() < 1e-280 {
            continue;
        }
        let m = match lu.solve(b) {
            Some(m) => m,
            None => continue,
        };
        if m.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mu_floor = MU_FLOOR.max(MU_REL_FLOOR * m.norm());
        let schur = Schur::try_new(m, f64::EPSILON, MAX_SCHUR_ITERATIONS).ok_or(
            Error::EigenNonConvergence {
                iterations: MAX_SCHUR_ITERATIONS,
            },
        )?;
        let mus = schur.complex_eigenvalues();
        let mut out: Vec<Complex64> = Vec::new();
        for mu in mus.iter() {
            if mu.norm() < mu_floor {
                continue;
            }
            let s = Complex64::new(sigma, 0.0) - 1.0 / mu;
            if !s.re.is_finite() || !s.im.is_finite() || s.norm() >= FINITE_CUTOFF {
                continue;
            }
            out.push(s);
        }
        out.sort_by(|x, y| {
            x.norm()
                .partial_cmp(&y.norm())
                .unwrap()
                .then(x.re.partial_cmp(&y.re).unwrap())
                .then(x.im.partial_cmp(&y.im).unwrap())
        });
        return Ok(out);
    }

    Err(Error::DegeneratePencil {
        context: context.to_string(),
    })
}
