//! Brick-wall random Clifford circuits.
//!
//! A circuit of depth `d` (even) on `n` qubits alternates two layer shapes:
//! odd layers (1st, 3rd, …) pair `(0,1), (2,3), …`; even layers pair
//! `(1,2), (3,4), …` and wrap around with `(n-1, 0)` when `n` is even. Odd
//! `n` leaves one qubit idle per layer. Every slot is filled with an
//! independent uniform two-qubit Clifford.

use serde::{Deserialize, Serialize};

use crate::clifford::{sample_clifford_2q, CliffordGate2Q, CliffordTable, Gen};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FORMAT: &str = "brickwall-circuit";
const VERSION: u32 = 1;

/// One gate placement: `gate` acts on the ordered pair `(a, b)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Placement {
    pub a: usize,
    pub b: usize,
    pub gate: CliffordGate2Q,
}

/// A sampled brick-wall circuit. Reproducible from `(n, d, seed)` alone.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CircuitSpec {
    n: usize,
    d: usize,
    seed: u64,
    layers: Vec<Vec<Placement>>,
}

/// Qubit pairs of one unitary layer; `layer` is 1-based.
pub fn layer_pairs(n: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = if layer % 2 == 1 { 0 } else { 1 };
    let mut pairs = Vec::with_capacity(n / 2);
    let mut k = start;
    while k + 1 < n {
        pairs.push((k, k + 1));
        k += 2;
    }
    if start == 1 && n % 2 == 0 {
        pairs.push((n - 1, 0));
    }
    pairs
}

fn validate_shape(n: usize, d: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewQubits { needed: 2, got: n });
    }
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidConfig(format!("depth must be even and >= 2, got {d}")));
    }
    Ok(())
}

/// Samples the circuit determined by `(n, d, seed)`.
pub fn sample_brickwall(
    n: usize,
    d: usize,
    seed: u64,
    table: &CliffordTable,
) -> Result<CircuitSpec> {
    validate_shape(n, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (1..=d)
        .map(|layer| {
            layer_pairs(n, layer)
                .into_iter()
                .map(|(a, b)| Placement { a, b, gate: sample_clifford_2q(&mut rng, table).clone() })
                .collect()
        })
        .collect();
    Ok(CircuitSpec { n, d, seed, layers })
}

impl CircuitSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Unitary depth `d` (number of brick layers).
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of measurement columns, `d/2`.
    pub fn half_depth(&self) -> usize {
        self.d / 2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Gate placements per layer, shallowest first.
    pub fn layers(&self) -> &[Vec<Placement>] {
        &self.layers
    }

    /// Serializes to a versioned text document. With `inline_gates` the gate
    /// words are embedded for archival; otherwise `(n, d, seed)` carries the
    /// full information.
    pub fn to_document(&self, inline_gates: bool) -> String {
        let doc = CircuitDoc {
            format: FORMAT.into(),
            version: VERSION,
            n: self.n,
            d: self.d,
            seed: self.seed,
            gates: inline_gates.then(|| {
                self.layers
                    .iter()
                    .map(|layer| {
                        layer
                            .iter()
                            .map(|p| PlacementDoc {
                                a: p.a,
                                b: p.b,
                                word: p
                                    .gate
                                    .word
                                    .iter()
                                    .map(|g| g.token())
                                    .collect::<Vec<_>>()
                                    .join(" "),
                            })
                            .collect()
                    })
                    .collect()
            }),
        };
        serde_json::to_string_pretty(&doc).expect("circuit document serializes")
    }

    /// Parses a document produced by [`CircuitSpec::to_document`]. Inlined
    /// gates are replayed from their words; otherwise the circuit is resampled
    /// from the recorded seed.
    pub fn from_document(text: &str, table: &CliffordTable) -> Result<CircuitSpec> {
        let doc: CircuitDoc =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        if doc.format != FORMAT {
            return Err(Error::Malformed(format!("unexpected document format {:?}", doc.format)));
        }
        if doc.version != VERSION {
            return Err(Error::FormatVersion { expected: VERSION, got: doc.version });
        }
        validate_shape(doc.n, doc.d)?;
        match doc.gates {
            None => sample_brickwall(doc.n, doc.d, doc.seed, table),
            Some(layers) => {
                if layers.len() != doc.d {
                    return Err(Error::Malformed(format!(
                        "expected {} layers, found {}",
                        doc.d,
                        layers.len()
                    )));
                }
                let layers = layers
                    .into_iter()
                    .enumerate()
                    .map(|(idx, layer)| {
                        let expected = layer_pairs(doc.n, idx + 1);
                        if layer.len() != expected.len() {
                            return Err(Error::Malformed(format!(
                                "layer {} has {} placements, expected {}",
                                idx + 1,
                                layer.len(),
                                expected.len()
                            )));
                        }
                        layer
                            .into_iter()
                            .zip(expected)
                            .map(|(p, (a, b))| {
                                if (p.a, p.b) != (a, b) {
                                    return Err(Error::Malformed(format!(
                                        "placement on ({}, {}) does not match the brick-wall \
                                         layout",
                                        p.a, p.b
                                    )));
                                }
                                let word = p
                                    .word
                                    .split_whitespace()
                                    .map(Gen::from_token)
                                    .collect::<Result<Vec<_>>>()?;
                                Ok(Placement { a, b, gate: CliffordGate2Q::from_word(&word) })
                            })
                            .collect()
                    })
                    .collect::<Result<Vec<Vec<Placement>>>>()?;
                Ok(CircuitSpec { n: doc.n, d: doc.d, seed: doc.seed, layers })
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    format: String,
    version: u32,
    n: usize,
    d: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gates: Option<Vec<Vec<PlacementDoc>>>,
}

#[derive(Serialize, Deserialize)]
struct PlacementDoc {
    a: usize,
    b: usize,
    word: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_layers_pair_from_zero_even_layers_from_one() {
        assert_eq!(layer_pairs(4, 1), vec![(0, 1), (2, 3)]);
        assert_eq!(layer_pairs(4, 2), vec![(1, 2), (3, 0)]);
        assert_eq!(layer_pairs(2, 1), vec![(0, 1)]);
        assert_eq!(layer_pairs(2, 2), vec![(1, 0)]);
    }

    #[test]
    fn odd_qubit_count_leaves_one_idle() {
        assert_eq!(layer_pairs(5, 1), vec![(0, 1), (2, 3)]);
        assert_eq!(layer_pairs(5, 2), vec![(1, 2), (3, 4)]);
        // Idle qubits: 4 on odd layers, 0 on even layers.
        let busy: Vec<usize> = layer_pairs(5, 1).iter().flat_map(|&(a, b)| [a, b]).collect();
        assert!(!busy.contains(&4));
        let busy: Vec<usize> = layer_pairs(5, 2).iter().flat_map(|&(a, b)| [a, b]).collect();
        assert!(!busy.contains(&0));
    }

    #[test]
    fn every_qubit_touched_at_most_once_per_layer() {
        for n in 2..10 {
            for layer in 1..=4 {
                let mut seen = vec![false; n];
                for (a, b) in layer_pairs(n, layer) {
                    assert!(!seen[a] && !seen[b]);
                    seen[a] = true;
                    seen[b] = true;
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_from_seed() {
        let table = CliffordTable::global();
        let a = sample_brickwall(5, 6, 42, table).unwrap();
        let b = sample_brickwall(5, 6, 42, table).unwrap();
        assert_eq!(a, b);
        let c = sample_brickwall(5, 6, 43, table).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_validation() {
        let table = CliffordTable::global();
        assert!(sample_brickwall(1, 4, 0, table).is_err());
        assert!(sample_brickwall(4, 3, 0, table).is_err());
        assert!(sample_brickwall(4, 0, 0, table).is_err());
    }

    #[test]
    fn document_round_trips_without_gates() {
        let table = CliffordTable::global();
        let circuit = sample_brickwall(4, 6, 7, table).unwrap();
        let doc = circuit.to_document(false);
        assert!(!doc.contains("gates"));
        let parsed = CircuitSpec::from_document(&doc, table).unwrap();
        assert_eq!(parsed, circuit);
    }

    #[test]
    fn document_round_trips_with_inlined_gates() {
        let table = CliffordTable::global();
        let circuit = sample_brickwall(5, 4, 9, table).unwrap();
        let doc = circuit.to_document(true);
        let parsed = CircuitSpec::from_document(&doc, table).unwrap();
        assert_eq!(parsed.n(), circuit.n());
        assert_eq!(parsed.layers().len(), circuit.layers().len());
        for (lp, lc) in parsed.layers().iter().zip(circuit.layers()) {
            for (p, c) in lp.iter().zip(lc) {
                assert_eq!((p.a, p.b), (c.a, c.b));
                assert_eq!(p.gate.images, c.gate.images);
            }
        }
    }

    #[test]
    fn version_and_format_are_checked() {
        let table = CliffordTable::global();
        let circuit = sample_brickwall(4, 4, 1, table).unwrap();
        let doc = circuit.to_document(false);
        let bumped = doc.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            CircuitSpec::from_document(&bumped, table),
            Err(Error::FormatVersion { expected: 1, got: 9 })
        ));
        assert!(CircuitSpec::from_document("not json", table).is_err());
        let wrong = doc.replace(FORMAT, "something-else");
        assert!(matches!(CircuitSpec::from_document(&wrong, table), Err(Error::Malformed(_))));
    }
}
