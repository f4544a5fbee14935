//! Single-site spin matrices in the `S_z = S, S - 1, ..., -S` ordering used by
//! [`SpinBasis`](crate::hilbert::SpinBasis).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type LocalMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spin quantum number `S` of a `d`-level site.
pub fn spin_of(local_dim: usize) -> f64 {
    (local_dim as f64 - 1.0) / 2.0
}

pub fn identity(d: usize) -> LocalMatrix {
    LocalMatrix::identity(d, d)
}

pub fn sz(d: usize) -> LocalMatrix {
    let s = spin_of(d);
    LocalMatrix::from_fn(d, d, |i, j| if i == j { c(s - i as f64) } else { c(0.0) })
}

/// Raising operator `S+`; digit `a` has `m = S - a`, so `S+` maps digit `a` to `a - 1`.
pub fn splus(d: usize) -> LocalMatrix {
    let s = spin_of(d);
    let mut m = LocalMatrix::zeros(d, d);
    for a in 1..d {
        let mz = s - a as f64;
        m[(a - 1, a)] = c((s * (s + 1.0) - mz * (mz + 1.0)).sqrt());
    }
    m
}

pub fn sminus(d: usize) -> LocalMatrix {
    splus(d).adjoint()
}

pub fn sx(d: usize) -> LocalMatrix {
    (splus(d) + sminus(d)) * c(0.5)
}

pub fn sy(d: usize) -> LocalMatrix {
    (splus(d) - sminus(d)) * Complex64::new(0.0, -0.5)
}

pub fn pauli_x() -> LocalMatrix {
    sx(2) * c(2.0)
}

pub fn pauli_y() -> LocalMatrix {
    sy(2) * c(2.0)
}

pub fn pauli_z() -> LocalMatrix {
    sz(2) * c(2.0)
}

/// Pauli matrix by letter (`I`, `X`, `Y`, `Z`).
pub fn pauli(letter: char) -> Option<LocalMatrix> {
    match letter {
        'I' => Some(identity(2)),
        'X' => Some(pauli_x()),
        'Y' => Some(pauli_y()),
        'Z' => Some(pauli_z()),
        _ => None,
    }
}
