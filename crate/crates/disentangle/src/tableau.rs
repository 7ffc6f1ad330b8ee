//! Aaronson–Gottesman stabilizer tableau with measurement and entropy.
//!
//! Rows `0..n` are destabilizers, rows `n..2n` stabilizers. Row `i` pairs
//! with row `n+i`: they anticommute, while all other pairs commute. The
//! 2n×2n (X|Z) bit matrix stays full rank under every operation here.

use rand::Rng;

use crate::clifford::CliffordGate2Q;
use crate::gf2;
use crate::pauli::PauliString;
use crate::{Error, Result};

/// A subset of the qubits, used to select entropy regions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Region {
    n: usize,
    qubits: Vec<usize>,
}

impl Region {
    /// Region from explicit qubit indices (deduplicated, sorted).
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Region> {
        let mut qubits: Vec<usize> = indices.to_vec();
        qubits.sort_unstable();
        qubits.dedup();
        if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
            return Err(Error::QubitOutOfRange { index: q, n });
        }
        Ok(Region { n, qubits })
    }

    /// The contiguous prefix `{0, …, len-1}`.
    pub fn prefix(n: usize, len: usize) -> Result<Region> {
        if len > n {
            return Err(Error::QubitOutOfRange { index: len.saturating_sub(1), n });
        }
        Ok(Region { n, qubits: (0..len).collect() })
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }
}

/// Outcome of a single-qubit computational-basis measurement.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MeasureOutcome {
    /// Measured value, 0 or 1.
    pub value: u8,
    /// True when the pre-measurement state was an eigenstate, so `value` was
    /// forced rather than drawn from the rng.
    pub deterministic: bool,
}

/// Stabilizer state on `n` qubits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StabilizerTableau {
    n: usize,
    /// Destabilizers then stabilizers, `2n` rows.
    rows: Vec<PauliString>,
}

impl StabilizerTableau {
    /// |0…0⟩: destabilizers X_i, stabilizers Z_i.
    pub fn new_computational_basis_state(n: usize) -> Result<StabilizerTableau> {
        if n == 0 {
            return Err(Error::TooFewQubits { needed: 1, got: 0 });
        }
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            rows.push(PauliString::single_x(n, i, false));
        }
        for i in 0..n {
            rows.push(PauliString::single_z(n, i, false));
        }
        Ok(StabilizerTableau { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All `2n` rows, destabilizers first.
    pub fn rows(&self) -> &[PauliString] {
        &self.rows
    }

    /// The `n` stabilizer rows.
    pub fn stabilizers(&self) -> &[PauliString] {
        &self.rows[self.n..]
    }

    /// Conjugates every row by `gate` acting on the ordered qubit pair
    /// `(a, b)`.
    pub fn apply_gate(&mut self, gate: &CliffordGate2Q, a: usize, b: usize) -> Result<()> {
        if a >= self.n {
            return Err(Error::QubitOutOfRange { index: a, n: self.n });
        }
        if b >= self.n {
            return Err(Error::QubitOutOfRange { index: b, n: self.n });
        }
        if a == b {
            return Err(Error::DuplicateQubit(a));
        }
        for row in &mut self.rows {
            let src = row.x_bit(a) as u8
                | (row.z_bit(a) as u8) << 1
                | (row.x_bit(b) as u8) << 2
                | (row.z_bit(b) as u8) << 3;
            let (dst, flip) = gate.conjugate(src);
            row.set_x(a, dst & 1 != 0);
            row.set_z(a, dst & 2 != 0);
            row.set_x(b, dst & 4 != 0);
            row.set_z(b, dst & 8 != 0);
            if flip {
                row.flip_neg();
            }
        }
        Ok(())
    }

    /// Measures qubit `q` in the computational basis, collapsing the state.
    /// A random outcome is a fair coin from `rng`; a deterministic outcome
    /// leaves the state untouched.
    pub fn measure_z(&mut self, q: usize, rng: &mut impl Rng) -> Result<MeasureOutcome> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        let n = self.n;
        match (n..2 * n).find(|&p| self.rows[p].x_bit(q)) {
            Some(p) => {
                // Outcome is random: make every other row commute with Z_q by
                // multiplying in row p, then replace the (destab, stab) pair.
                // Destabilizer signs carry no meaning (and destabilizers may
                // anticommute with row p), so they take a bits-only product.
                for i in 0..2 * n {
                    if i != p && self.rows[i].x_bit(q) {
                        let (head, tail) = self.rows.split_at_mut(p.max(i));
                        let (src, dst) =
                            if i < p { (&tail[0], &mut head[i]) } else { (&head[p], &mut tail[0]) };
                        if i < n {
                            dst.xor_bits(src);
                        } else {
                            dst.mul_left(src);
                        }
                    }
                }
                let value = rng.gen_range(0..2u8);
                self.rows[p - n] = self.rows[p].clone();
                self.rows[p] = PauliString::single_z(n, q, value == 1);
                Ok(MeasureOutcome { value, deterministic: false })
            }
            None => {
                // Outcome is determined: accumulate the stabilizer product
                // that equals ±Z_q, guided by the destabilizer X bits.
                let mut scratch = PauliString::identity(n);
                for i in 0..n {
                    if self.rows[i].x_bit(q) {
                        scratch.mul_left(&self.rows[i + n]);
                    }
                }
                debug_assert!(scratch.z_bit(q));
                Ok(MeasureOutcome { value: scratch.neg() as u8, deterministic: true })
            }
        }
    }

    /// Entanglement entropy of `region` in bits: GF(2) rank of the stabilizer
    /// rows restricted to the region, minus the region size.
    pub fn region_entropy(&self, region: &Region) -> Result<u32> {
        if region.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: region.n });
        }
        if region.is_empty() || region.len() == self.n {
            return Err(Error::InvalidRegion);
        }
        let k = region.len();
        let words = gf2::words_for(2 * k);
        let mut rows = Vec::with_capacity(self.n);
        for row in self.stabilizers() {
            let mut packed = vec![0u64; words];
            for (col, &q) in region.qubits.iter().enumerate() {
                if row.x_bit(q) {
                    packed[col / 64] |= 1 << (col % 64);
                }
                if row.z_bit(q) {
                    let col = k + col;
                    packed[col / 64] |= 1 << (col % 64);
                }
            }
            rows.push(packed);
        }
        let rank = gf2::rank(&rows);
        debug_assert!(rank >= k);
        Ok((rank - k) as u32)
    }

    /// Sum of the entropies of the `n-1` contiguous prefixes, in bits.
    ///
    /// Zero exactly when the state is a product state across every prefix
    /// cut, which makes it the integer-exact termination signal.
    pub fn sum_prefix_entropy(&self) -> Result<u32> {
        if self.n < 2 {
            return Err(Error::TooFewQubits { needed: 2, got: self.n });
        }
        let words = gf2::words_for(self.n);
        let mut total = 0u32;
        // Prefix restriction is a word mask: low `len` X bits and Z bits.
        for len in 1..self.n {
            let mut rows = Vec::with_capacity(self.n);
            for row in self.stabilizers() {
                let mut packed = Vec::with_capacity(2 * words);
                packed.extend_from_slice(row.x_words());
                packed.extend_from_slice(row.z_words());
                mask_prefix(&mut packed[..words], len);
                mask_prefix(&mut packed[words..], len);
                rows.push(packed);
            }
            total += gf2::rank(&rows) as u32 - len as u32;
        }
        Ok(total)
    }

    /// Mean entanglement entropy over the `n-1` prefix cuts.
    pub fn avg_prefix_entropy(&self) -> Result<f64> {
        Ok(self.sum_prefix_entropy()? as f64 / (self.n - 1) as f64)
    }

    /// Verifies the tableau invariants; used by tests after random workloads.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        for i in 0..2 * n {
            for j in i..2 * n {
                let should_anticommute = j == i + n;
                let commute = self.rows[i].commutes_with(&self.rows[j]);
                if commute == should_anticommute {
                    return Err(Error::Malformed(format!(
                        "rows {i} and {j} have the wrong commutation relation"
                    )));
                }
            }
        }
        let full: Vec<Vec<u64>> = self
            .rows
            .iter()
            .map(|r| {
                let mut packed = r.x_words().to_vec();
                packed.extend_from_slice(r.z_words());
                packed
            })
            .collect();
        if gf2::rank(&full) != 2 * n {
            return Err(Error::Malformed("tableau rows are not full rank".into()));
        }
        Ok(())
    }
}

fn mask_prefix(words: &mut [u64], len: usize) {
    for (w, word) in words.iter_mut().enumerate() {
        let lo = w * 64;
        if len <= lo {
            *word = 0;
        } else if len < lo + 64 {
            *word &= (1u64 << (len - lo)) - 1;
        }
    }
}
