//! Dense statevector implementation used as an independent oracle.
//!
//! Everything here is deliberately naive: gates are replayed from generator
//! words, probabilities come from the Born rule, and entropies from an exact
//! eigendecomposition of the reduced density matrix. Qubit `q` occupies bit
//! `q` of the amplitude index (qubit 0 is the least significant bit).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::clifford::Gen;
use crate::{Error, Result};

/// Largest qubit count the oracle accepts; 2^12 amplitudes keep every
/// operation comfortably exact and fast.
pub const MAX_ORACLE_QUBITS: usize = 12;

/// Eigenvalues at or below this threshold are treated as exact zeros when
/// evaluating the entropy.
const EIGENVALUE_FLOOR: f64 = 1e-12;

/// A normalized pure state on `n` qubits.
#[derive(Clone, Debug)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    /// |0…0⟩ on `n` qubits, `1 <= n <= 12`.
    pub fn zero_state(n: usize) -> Result<DenseState> {
        if n == 0 {
            return Err(Error::TooFewQubits { needed: 1, got: 0 });
        }
        if n > MAX_ORACLE_QUBITS {
            return Err(Error::InvalidConfig(format!(
                "dense oracle supports at most {MAX_ORACLE_QUBITS} qubits, got {n}"
            )));
        }
        let mut amps = vec![Complex64::ZERO; 1 << n];
        amps[0] = Complex64::ONE;
        Ok(DenseState { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies a two-qubit Clifford as its generator word on the ordered pair
    /// `(a, b)`.
    pub fn apply_word(&mut self, word: &[Gen], a: usize, b: usize) -> Result<()> {
        if a >= self.n {
            return Err(Error::QubitOutOfRange { index: a, n: self.n });
        }
        if b >= self.n {
            return Err(Error::QubitOutOfRange { index: b, n: self.n });
        }
        if a == b {
            return Err(Error::DuplicateQubit(a));
        }
        for &g in word {
            match g {
                Gen::Ha => self.hadamard(a),
                Gen::Hb => self.hadamard(b),
                Gen::Sa => self.phase(a),
                Gen::Sb => self.phase(b),
                Gen::Cx => self.cnot(a, b),
            }
        }
        Ok(())
    }

    fn hadamard(&mut self, q: usize) {
        let bit = 1usize << q;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = (a0 + a1) * s;
                self.amps[i | bit] = (a0 - a1) * s;
            }
        }
    }

    fn phase(&mut self, q: usize) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit != 0 {
                self.amps[i] *= Complex64::I;
            }
        }
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let (c, t) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    /// Born probability of measuring 1 on qubit `q`.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        let bit = 1usize << q;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Measures qubit `q`, drawing the outcome from the Born rule.
    pub fn measure_z(&mut self, q: usize, rng: &mut impl Rng) -> Result<u8> {
        let p1 = self.prob_one(q)?;
        let outcome = if rng.gen::<f64>() < p1 { 1 } else { 0 };
        self.project(q, outcome)?;
        Ok(outcome)
    }

    /// Projects qubit `q` onto `outcome` and renormalizes. Used to replay a
    /// measurement record from another simulator; projecting onto a branch of
    /// probability ~0 is a caller bug.
    pub fn project(&mut self, q: usize, outcome: u8) -> Result<()> {
        let p1 = self.prob_one(q)?;
        let p = if outcome == 1 { p1 } else { 1.0 - p1 };
        assert!(p > 1e-9, "projection onto a zero-probability branch");
        let bit = 1usize << q;
        let keep_set = outcome == 1;
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) == keep_set {
                *a *= scale;
            } else {
                *a = Complex64::ZERO;
            }
        }
        Ok(())
    }

    /// Entanglement entropy (base 2) of the prefix `{0, …, len-1}`.
    ///
    /// The reduced density matrix eigenvalues are the squared singular values
    /// of the amplitude matrix reshaped to prefix × suffix; the Gram matrix of
    /// the smaller side is diagonalized exactly.
    pub fn prefix_entropy(&self, len: usize) -> Result<f64> {
        if len == 0 || len >= self.n {
            return Err(Error::InvalidRegion);
        }
        let rows = 1usize << len;
        let cols = 1usize << (self.n - len);
        // amp[a + (b << len)] = M[a][b]; rho_prefix = M M†.
        let gram = if rows <= cols {
            DMatrix::from_fn(rows, rows, |r, s| {
                let mut acc = Complex64::ZERO;
                for b in 0..cols {
                    acc += self.amps[r + (b << len)] * self.amps[s + (b << len)].conj();
                }
                acc
            })
        } else {
            DMatrix::from_fn(cols, cols, |r, s| {
                let mut acc = Complex64::ZERO;
                for a in 0..rows {
                    acc += self.amps[a + (r << len)] * self.amps[a + (s << len)].conj();
                }
                acc
            })
        };
        let eigenvalues = SymmetricEigen::new(gram).eigenvalues;
        let mut entropy = 0.0;
        for &lambda in eigenvalues.iter() {
            if lambda > EIGENVALUE_FLOOR {
                entropy -= lambda * lambda.log2();
            }
        }
        Ok(entropy)
    }

    /// Mean prefix entropy over the `n-1` cuts.
    pub fn avg_prefix_entropy(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::TooFewQubits { needed: 2, got: self.n });
        }
        let mut total = 0.0;
        for len in 1..self.n {
            total += self.prefix_entropy(len)?;
        }
        Ok(total / (self.n - 1) as f64)
    }
}

/// Replays a recorded stabilizer run: applies every gate by its word and
/// forces each measurement to the recorded outcome, checking the Born
/// probabilities along the way. A deterministic record must have probability
/// 1 (within `tol`), a random one probability 1/2.
pub fn replay_record(
    circuit: &crate::circuit::CircuitSpec,
    p: &crate::env::MeasurementMatrix,
    record: &[crate::env::MeasureRecord],
    tol: f64,
) -> Result<DenseState> {
    let mut state = DenseState::zero_state(circuit.n())?;
    let mut next = record.iter();
    for (column, pair_of_layers) in circuit.layers().chunks(2).enumerate() {
        for layer in pair_of_layers {
            for placement in layer {
                state.apply_word(&placement.gate.word, placement.a, placement.b)?;
            }
        }
        for qubit in 0..circuit.n() {
            if p.get(qubit, column) {
                let rec = next.next().ok_or_else(|| {
                    Error::Malformed("measurement record shorter than the matrix".into())
                })?;
                if rec.qubit != qubit || rec.column != column {
                    return Err(Error::Malformed(format!(
                        "record out of order at qubit {qubit}, column {column}"
                    )));
                }
                let p1 = state.prob_one(qubit)?;
                let p_outcome = if rec.outcome.value == 1 { p1 } else { 1.0 - p1 };
                let expected = if rec.outcome.deterministic { 1.0 } else { 0.5 };
                if (p_outcome - expected).abs() > tol {
                    return Err(Error::Malformed(format!(
                        "outcome probability {p_outcome} differs from {expected} at qubit \
                         {qubit}, column {column}"
                    )));
                }
                state.project(qubit, rec.outcome.value)?;
            }
        }
    }
    if next.next().is_some() {
        return Err(Error::Malformed("measurement record longer than the matrix".into()));
    }
    Ok(state)
}
