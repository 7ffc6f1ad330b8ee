//! The two-qubit Clifford group as an explicit lookup table.
//!
//! Elements are canonicalized by their conjugation action on the four Pauli
//! generators `X⊗I, Z⊗I, I⊗X, I⊗Z` (signs included), which identifies a
//! Clifford up to global phase. The table is built once by breadth-first
//! closure over a small generator alphabet and is immutable afterwards, so it
//! can be shared freely across threads.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;

use crate::pauli::phase_g;
use crate::{Error, Result};

/// Number of two-qubit Clifford elements modulo global phase.
pub const CLIFFORD_2Q_COUNT: usize = 11_520;
/// Number of distinct symplectic images (sign-stripped actions).
pub const CLIFFORD_2Q_SYMPLECTIC_COUNT: usize = 720;

/// Generator alphabet: Hadamard and phase gates on either qubit plus a CNOT
/// from the first qubit to the second.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Gen {
    Ha,
    Hb,
    Sa,
    Sb,
    Cx,
}

impl Gen {
    pub const ALL: [Gen; 5] = [Gen::Ha, Gen::Hb, Gen::Sa, Gen::Sb, Gen::Cx];

    pub fn token(self) -> &'static str {
        match self {
            Gen::Ha => "ha",
            Gen::Hb => "hb",
            Gen::Sa => "sa",
            Gen::Sb => "sb",
            Gen::Cx => "cx",
        }
    }

    pub fn from_token(tok: &str) -> Result<Gen> {
        match tok {
            "ha" => Ok(Gen::Ha),
            "hb" => Ok(Gen::Hb),
            "sa" => Ok(Gen::Sa),
            "sb" => Ok(Gen::Sb),
            "cx" => Ok(Gen::Cx),
            other => Err(Error::Malformed(format!("unknown gate token {other:?}"))),
        }
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A signed two-qubit Pauli. Bit layout: `xa | za<<1 | xb<<2 | zb<<3`, with
/// the Hermitian convention `W(1,1) = Y` per qubit.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Pauli2 {
    pub bits: u8,
    pub neg: bool,
}

impl Pauli2 {
    pub fn xa(self) -> bool {
        self.bits & 1 != 0
    }
    pub fn za(self) -> bool {
        self.bits & 2 != 0
    }
    pub fn xb(self) -> bool {
        self.bits & 4 != 0
    }
    pub fn zb(self) -> bool {
        self.bits & 8 != 0
    }

    /// Conjugates by one generator: `P -> g P g†`. Bit rules are the standard
    /// tableau updates for H, S, and CNOT.
    fn conjugate_by(self, g: Gen) -> Pauli2 {
        let (mut xa, mut za, mut xb, mut zb) = (self.xa(), self.za(), self.xb(), self.zb());
        let mut neg = self.neg;
        match g {
            Gen::Ha => {
                neg ^= xa & za;
                std::mem::swap(&mut xa, &mut za);
            }
            Gen::Hb => {
                neg ^= xb & zb;
                std::mem::swap(&mut xb, &mut zb);
            }
            Gen::Sa => {
                neg ^= xa & za;
                za ^= xa;
            }
            Gen::Sb => {
                neg ^= xb & zb;
                zb ^= xb;
            }
            Gen::Cx => {
                neg ^= xa & zb & !(xb ^ za);
                xb ^= xa;
                za ^= zb;
            }
        }
        Pauli2 {
            bits: xa as u8 | (za as u8) << 1 | (xb as u8) << 2 | (zb as u8) << 3,
            neg,
        }
    }
}

/// A two-qubit Clifford element.
///
/// `images` are the conjugated generators `U X₁ U†, U Z₁ U†, U X₂ U†, U Z₂ U†`
/// and drive the stabilizer simulator; `word` is a realization over [`Gen`]
/// and drives the dense statevector oracle. `lookup` maps any source Pauli
/// (4 bits) to its conjugated bits plus a sign flip in bit 4.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CliffordGate2Q {
    pub images: [Pauli2; 4],
    pub word: Vec<Gen>,
    lookup: [u8; 16],
}

const IDENTITY_IMAGES: [Pauli2; 4] = [
    Pauli2 { bits: 0b0001, neg: false },
    Pauli2 { bits: 0b0010, neg: false },
    Pauli2 { bits: 0b0100, neg: false },
    Pauli2 { bits: 0b1000, neg: false },
];

impl CliffordGate2Q {
    /// Builds the element realized by applying `word` left to right.
    pub fn from_word(word: &[Gen]) -> CliffordGate2Q {
        let mut images = IDENTITY_IMAGES;
        for &g in word {
            for img in &mut images {
                *img = img.conjugate_by(g);
            }
        }
        Self::from_parts(images, word.to_vec())
    }

    fn from_parts(images: [Pauli2; 4], word: Vec<Gen>) -> CliffordGate2Q {
        let mut lookup = [0u8; 16];
        for src in 0..16u8 {
            let (bits, neg) = conjugate_source(&images, src);
            lookup[src as usize] = bits | (neg as u8) << 4;
        }
        CliffordGate2Q { images, word, lookup }
    }

    /// Conjugated bits and sign flip for a source Pauli given as 4 bits.
    #[inline]
    pub fn conjugate(&self, src_bits: u8) -> (u8, bool) {
        let e = self.lookup[src_bits as usize];
        (e & 0x0f, e & 0x10 != 0)
    }

    /// 20-bit identity key: images with signs.
    fn key(&self) -> u32 {
        let mut k = 0u32;
        for (i, img) in self.images.iter().enumerate() {
            k |= ((img.bits as u32) | (img.neg as u32) << 4) << (5 * i);
        }
        k
    }

    /// 16-bit symplectic key: images without signs.
    fn symplectic_key(&self) -> u16 {
        let mut k = 0u16;
        for (i, img) in self.images.iter().enumerate() {
            k |= (img.bits as u16) << (4 * i);
        }
        k
    }

    /// Word realizing the inverse element (H and CNOT are involutions,
    /// S⁻¹ = S³).
    pub fn inverse_word(&self) -> Vec<Gen> {
        let mut out = Vec::with_capacity(self.word.len() + 2);
        for &g in self.word.iter().rev() {
            match g {
                Gen::Sa | Gen::Sb => out.extend([g; 3]),
                _ => out.push(g),
            }
        }
        out
    }
}

/// Multiplies out `img_X1^xa · img_Z1^za · img_X2^xb · img_Z2^zb` with the
/// i-phase prefactor that converts the Hermitian source convention to literal
/// X/Z products. The result of conjugating a Hermitian Pauli is Hermitian, so
/// the accumulated phase is always ±1.
fn conjugate_source(images: &[Pauli2; 4], src: u8) -> (u8, bool) {
    let take = [src & 1 != 0, src & 2 != 0, src & 4 != 0, src & 8 != 0];
    // i^{xa·za + xb·zb} from expanding W(x,z) = i^{xz} X^x Z^z on each qubit.
    let mut e: i32 = ((src & 0b0011) == 0b0011) as i32 + ((src & 0b1100) == 0b1100) as i32;
    let mut acc = Pauli2 { bits: 0, neg: false };
    for (img, taken) in images.iter().zip(take) {
        if !taken {
            continue;
        }
        e += 2 * (img.neg as i32);
        e += phase_g(acc.xa(), acc.za(), img.xa(), img.za());
        e += phase_g(acc.xb(), acc.zb(), img.xb(), img.zb());
        acc.bits ^= img.bits;
    }
    let e = e.rem_euclid(4);
    assert!(e % 2 == 0, "conjugated Pauli picked up an imaginary phase");
    (acc.bits, e == 2)
}

/// The full two-qubit Clifford table with an index by identity key.
pub struct CliffordTable {
    gates: Vec<CliffordGate2Q>,
    by_key: HashMap<u32, usize>,
}

impl CliffordTable {
    /// Enumerates the group by breadth-first closure from the identity over
    /// [`Gen::ALL`]. Words are therefore shortest realizations, and the table
    /// order is deterministic.
    pub fn build() -> CliffordTable {
        let identity = CliffordGate2Q::from_word(&[]);
        let mut by_key = HashMap::with_capacity(CLIFFORD_2Q_COUNT * 2);
        by_key.insert(identity.key(), 0);
        let mut gates = vec![identity];
        let mut frontier = 0;
        while frontier < gates.len() {
            for g in Gen::ALL {
                let mut images = gates[frontier].images;
                for img in &mut images {
                    *img = img.conjugate_by(g);
                }
                let mut word = gates[frontier].word.clone();
                word.push(g);
                let cand = CliffordGate2Q::from_parts(images, word);
                if let std::collections::hash_map::Entry::Vacant(e) = by_key.entry(cand.key()) {
                    e.insert(gates.len());
                    gates.push(cand);
                }
            }
            frontier += 1;
        }
        assert_eq!(gates.len(), CLIFFORD_2Q_COUNT, "Clifford closure has unexpected size");
        CliffordTable { gates, by_key }
    }

    /// Shared process-wide table, built on first use.
    pub fn global() -> &'static CliffordTable {
        static TABLE: OnceLock<CliffordTable> = OnceLock::new();
        TABLE.get_or_init(CliffordTable::build)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&self, idx: usize) -> &CliffordGate2Q {
        &self.gates[idx]
    }

    pub fn gates(&self) -> &[CliffordGate2Q] {
        &self.gates
    }

    /// Number of distinct sign-stripped actions in the table.
    pub fn symplectic_count(&self) -> usize {
        let mut keys: Vec<u16> = self.gates.iter().map(|g| g.symplectic_key()).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    /// Index of the element equal to `gate`, if present.
    pub fn index_of(&self, gate: &CliffordGate2Q) -> Option<usize> {
        self.by_key.get(&gate.key()).copied()
    }

    /// Index of the inverse of `gate`. The group is closed under inversion,
    /// so this always succeeds for table members.
    pub fn inverse_index(&self, gate: &CliffordGate2Q) -> usize {
        let inv = CliffordGate2Q::from_word(&gate.inverse_word());
        *self
            .by_key
            .get(&inv.key())
            .expect("inverse of a table element must be in the table")
    }
}

/// Draws a uniformly random element from the table.
pub fn sample_clifford_2q<'t>(rng: &mut impl Rng, table: &'t CliffordTable) -> &'t CliffordGate2Q {
    table.gate(rng.gen_range(0..table.len()))
}
