//! In-place amplitude kernels shared by the pure and mixed simulators.
//!
//! A density matrix stored row-major is a 2n-qubit vector (row bits then
//! column bits), so `ρ → GρG†` is `G` on row qubit `q` followed by `conj(G)`
//! on column qubit `n + q`.

use num_complex::Complex64;

use super::Mat2;

#[inline]
fn bit(n_total: usize, q: usize) -> usize {
    1usize << (n_total - 1 - q)
}

pub(crate) fn apply_1q(amps: &mut [Complex64], n_total: usize, q: usize, m: &Mat2) {
    let b = bit(n_total, q);
    // iterate over blocks of size 2b; the lower half has the bit cleared
    let mut base = 0;
    while base < amps.len() {
        for i in base..base + b {
            let j = i + b;
            let a0 = amps[i];
            let a1 = amps[j];
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += 2 * b;
    }
}

pub(crate) fn apply_cnot(amps: &mut [Complex64], n_total: usize, control: usize, target: usize) {
    let cb = bit(n_total, control);
    let tb = bit(n_total, target);
    for i in 0..amps.len() {
        if i & cb != 0 && i & tb == 0 {
            amps.swap(i, i | tb);
        }
    }
}

pub(crate) fn conj2(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[0][1].conj()],
        [m[1][0].conj(), m[1][1].conj()],
    ]
}

pub(crate) fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}
