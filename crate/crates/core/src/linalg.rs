// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Small dense complex matrix helpers.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Matrix2c = Matrix2<C64>;
pub type Matrix4c = Matrix4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity2() -> Matrix2c {
    Matrix2c::identity()
}

pub fn pauli_x() -> Matrix2c {
    Matrix2c::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2c {
    Matrix2c::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2c {
    Matrix2c::new(ONE, ZERO, ZERO, -ONE)
}

/// `cos(phi) X + sin(phi) Y`
pub fn sigma_phi(phi: f64) -> Matrix2c {
    Matrix2c::new(ZERO, C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi), ZERO)
}

/// Kronecker product `a ⊗ b`; `a` acts on the more significant qubit.
pub fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn kron_dyn(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Largest elementwise modulus of `U†U - I`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((g[(r, c)] - target).norm());
        }
    }
    worst
}

/// `max |a - e^{iθ} b|` with the global phase chosen from `tr(b† a)`.
pub fn phase_insensitive_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    (a - b * phase).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
