//! Signed n-qubit Pauli strings with bit-packed X/Z parts.
//!
//! A `PauliString` stores the Hermitian operator
//! `(-1)^neg * W(x_0,z_0) ⊗ … ⊗ W(x_{n-1},z_{n-1})` where
//! `W(0,0) = I`, `W(1,0) = X`, `W(0,1) = Z`, and `W(1,1) = Y = iXZ`.
//! Products are tracked with phases mod 4 internally; every operator exposed
//! by this module is Hermitian, so the visible sign is always ±1.

use crate::gf2::words_for;

/// Phase exponent of `i` picked up when multiplying two single-qubit Paulis
/// in the Hermitian convention: `W(x1,z1) * W(x2,z2) = i^g * W(x1^x2, z1^z2)`.
/// Returns a value in {-1, 0, 1}.
pub(crate) fn phase_g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (x2 as i32, z2 as i32);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

/// A signed Pauli string on `n` qubits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    neg: bool,
}

impl PauliString {
    /// The identity string (+I…I).
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: vec![0; w], z: vec![0; w], neg: false }
    }

    /// `±Z_q` on `n` qubits.
    pub fn single_z(n: usize, q: usize, neg: bool) -> Self {
        let mut p = Self::identity(n);
        p.set_z(q, true);
        p.neg = neg;
        p
    }

    /// `±X_q` on `n` qubits.
    pub fn single_x(n: usize, q: usize, neg: bool) -> Self {
        let mut p = Self::identity(n);
        p.set_x(q, true);
        p.neg = neg;
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn set_x(&mut self, q: usize, v: bool) {
        set_bit(&mut self.x, q, v);
    }

    pub fn set_z(&mut self, q: usize, v: bool) {
        set_bit(&mut self.z, q, v);
    }

    /// Sign of the operator: `false` for +, `true` for −.
    pub fn neg(&self) -> bool {
        self.neg
    }

    pub fn set_neg(&mut self, neg: bool) {
        self.neg = neg;
    }

    pub fn flip_neg(&mut self) {
        self.neg = !self.neg;
    }

    /// Raw X words (little-endian bit packing).
    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    /// Raw Z words (little-endian bit packing).
    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// True if the string is the identity on every qubit (sign ignored).
    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// True if `self` and `other` commute (symplectic inner product is even).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut parity = 0u32;
        for w in 0..self.x.len() {
            parity ^= (self.x[w] & other.z[w]).count_ones() & 1;
            parity ^= (self.z[w] & other.x[w]).count_ones() & 1;
        }
        parity == 0
    }

    /// XORs the X/Z bits of `other` into `self`, leaving the sign untouched.
    ///
    /// This is the right product for tableau rows whose sign carries no
    /// meaning (destabilizers): the bit pattern is the product's, and no
    /// imaginary phase needs representing.
    pub fn xor_bits(&mut self, other: &PauliString) {
        debug_assert_eq!(self.n, other.n);
        for w in 0..self.x.len() {
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
    }

    /// Replaces `self` with `other * self`, accumulating signs.
    ///
    /// The two strings must commute up to a real phase (the product of two
    /// Hermitian Paulis is Hermitian exactly when they commute); this holds
    /// everywhere the simulator multiplies sign-bearing rows and is checked
    /// in debug builds.
    pub fn mul_left(&mut self, other: &PauliString) {
        debug_assert_eq!(self.n, other.n);
        let mut phase: i32 = 2 * (self.neg as i32) + 2 * (other.neg as i32);
        for q in 0..self.n {
            phase += phase_g(other.x_bit(q), other.z_bit(q), self.x_bit(q), self.z_bit(q));
        }
        for w in 0..self.x.len() {
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
        let phase = phase.rem_euclid(4);
        debug_assert!(phase % 2 == 0, "product of anticommuting rows is not Hermitian");
        self.neg = phase == 2;
    }
}

fn set_bit(words: &mut [u64], idx: usize, v: bool) {
    let (w, b) = (idx / 64, idx % 64);
    if v {
        words[w] |= 1 << b;
    } else {
        words[w] &= !(1 << b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_g_matches_single_qubit_algebra() {
        // X*Z = -iY, Z*X = iY, Y*X = -iZ, Y*Z = iX, Y*Y = I.
        assert_eq!(phase_g(true, false, false, true), -1);
        assert_eq!(phase_g(false, true, true, false), 1);
        assert_eq!(phase_g(true, true, true, false), -1);
        assert_eq!(phase_g(true, true, false, true), 1);
        assert_eq!(phase_g(true, true, true, true), 0);
        assert_eq!(phase_g(false, false, true, true), 0);
    }

    #[test]
    fn commutation_is_symplectic() {
        let x0 = PauliString::single_x(2, 0, false);
        let z0 = PauliString::single_z(2, 0, false);
        let z1 = PauliString::single_z(2, 1, false);
        assert!(!x0.commutes_with(&z0));
        assert!(x0.commutes_with(&z1));
        assert!(x0.commutes_with(&x0));
    }

    #[test]
    fn mul_left_xors_bits_and_tracks_sign() {
        // (X⊗X) * (Z⊗Z) = (XZ)⊗(XZ) = (-iY)(-iY) = -Y⊗Y.
        let mut p = PauliString::identity(2);
        p.set_z(0, true);
        p.set_z(1, true);
        let mut xx = PauliString::identity(2);
        xx.set_x(0, true);
        xx.set_x(1, true);
        p.mul_left(&xx);
        assert!(p.x_bit(0) && p.z_bit(0) && p.x_bit(1) && p.z_bit(1));
        assert!(p.neg());
    }

    #[test]
    fn squaring_gives_identity() {
        let mut p = PauliString::single_x(3, 1, true);
        p.set_z(2, true);
        let q = p.clone();
        p.mul_left(&q);
        assert!(p.is_identity());
        assert!(!p.neg());
    }
}
