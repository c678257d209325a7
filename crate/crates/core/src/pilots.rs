//! Predistorted Hadamard pilots.
//!
//! The transmit converter runs with `b = 1`. Feeding it
//! `T = (G − U⁻¹·1·1ᵀ)(1 + j)` makes every column of its output equal the
//! matching column of `S = G + jG`, which satisfies `S·Sᴴ = 2N_t·I`.
//! `U⁻¹·1·1ᵀ` is all ones in its first row and zero elsewhere, so `T` is
//! `(1 + j)·G` with the first row cleared.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::quantizer::{sigma_delta_columns_with, SigmaDeltaConfig, ZeroSign};
use crate::{CMatrix, Error, Result};

/// Sylvester-construction Hadamard matrix of order `n`.
pub fn hadamard_matrix(n: usize) -> Result<DMatrix<i32>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::UnsupportedOrder(n));
    }
    let mut h = DMatrix::from_element(1, 1, 1i32);
    while h.nrows() < n {
        let k = h.nrows();
        let mut next = DMatrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    /// `G`, entries ±1.
    pub hadamard: DMatrix<i32>,
    /// `T`, the transmit converter input.
    pub predistorted: CMatrix,
    /// `S = G + jG`, the intended converter output.
    pub transmit: CMatrix,
}

impl PilotSet {
    pub fn n_transmit(&self) -> usize {
        self.hadamard.nrows()
    }

    /// `K` copies of `S` side by side.
    pub fn repeated_transmit(&self, repetitions: usize) -> CMatrix {
        tile_columns(&self.transmit, repetitions)
    }

    /// `K` copies of `T` side by side.
    pub fn repeated_predistorted(&self, repetitions: usize) -> CMatrix {
        tile_columns(&self.predistorted, repetitions)
    }
}

fn tile_columns(m: &CMatrix, repetitions: usize) -> CMatrix {
    let cols = m.ncols();
    CMatrix::from_fn(m.nrows(), cols * repetitions, |i, j| m[(i, j % cols)])
}

fn to_complex_diag(g: &DMatrix<i32>) -> CMatrix {
    g.map(|v| Complex64::new(v as f64, v as f64))
}

pub fn predistort_pilots(n_transmit: usize) -> Result<PilotSet> {
    let hadamard = hadamard_matrix(n_transmit)?;
    // U⁻¹·1 = e₁, so only the first row of G − U⁻¹·1·1ᵀ changes.
    let mut offset = hadamard.clone();
    offset.row_mut(0).add_scalar_mut(-1);
    Ok(PilotSet {
        predistorted: to_complex_diag(&offset),
        transmit: to_complex_diag(&hadamard),
        hadamard,
    })
}

/// True when the `b = 1` converter maps every column of `T` onto `S` and
/// `S·Sᴴ = 2N_t·I`.
pub fn verify_pilots(pilots: &PilotSet) -> bool {
    verify_pilots_with(pilots, ZeroSign::Positive)
}

pub fn verify_pilots_with(pilots: &PilotSet, zero: ZeroSign) -> bool {
    let n = pilots.n_transmit();
    let Ok(config) = SigmaDeltaConfig::new(n, 1.0) else {
        return false;
    };
    let Ok(out) = sigma_delta_columns_with(&pilots.predistorted, &config, zero) else {
        return false;
    };
    let s = &pilots.transmit;
    let target = CMatrix::identity(n, n) * Complex64::new(2.0 * n as f64, 0.0);
    out == *s && s * s.adjoint() == target && s.adjoint() * s == target
}
