//! Quantum non-demolition check `U† x U − x = 0` for small joint evolutions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};

pub const MAX_QND_DIMENSION: usize = 16;
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry magnitude of `U† x U − x`.
///
/// Zero (to rounding) certifies that the evolution leaves the observable undisturbed.
pub fn qnd_defect(joint_evolution: &DMatrix<Complex64>, observable: &DMatrix<Complex64>) -> Result<f64> {
    let d = joint_evolution.nrows();
    if !joint_evolution.is_square() || !observable.is_square() {
        return Err(ZenoError::DimensionMismatch("matrices must be square".into()));
    }
    if observable.nrows() != d {
        return Err(ZenoError::DimensionMismatch(format!(
            "evolution is {d}×{d}, observable is {n}×{n}",
            n = observable.nrows()
        )));
    }
    if d == 0 || d > MAX_QND_DIMENSION {
        return Err(ZenoError::DimensionMismatch(format!(
            "dimension {d} outside 1..={MAX_QND_DIMENSION}"
        )));
    }
    let adjoint = joint_evolution.adjoint();
    let deviation = max_abs(&(&adjoint * joint_evolution - DMatrix::<Complex64>::identity(d, d)));
    if deviation > UNITARITY_TOLERANCE {
        return Err(ZenoError::NotUnitary { deviation });
    }
    Ok(max_abs(&(adjoint * observable * joint_evolution - observable)))
}
