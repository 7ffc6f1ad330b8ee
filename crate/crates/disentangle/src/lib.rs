//! Finding minimal projective-measurement patterns ("disentanglers") that
//! drive brick-wall random Clifford circuits into product states.
//!
//! The crate has three layers:
//!
//! * an exact stabilizer simulator ([`tableau`], [`clifford`], [`gf2`]) with
//!   a dense statevector cross-check ([`dense`]),
//! * a measurement-placement environment and a from-scratch PPO trainer
//!   ([`circuit`], [`env`], [`nn`], [`ppo`]),
//! * experiment drivers, curve fits, and plotting ([`experiments`], [`fit`],
//!   [`plot`]) behind a CLI ([`cli`]).

pub mod circuit;
pub mod cli;
pub mod clifford;
pub mod dense;
pub mod env;
pub mod experiments;
pub mod fit;
pub mod gf2;
pub mod nn;
pub mod pauli;
pub mod plot;
pub mod ppo;
pub mod seeds;
pub mod tableau;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    DuplicateQubit(usize),
    #[error("region must be a non-empty proper subset of the qubits")]
    InvalidRegion,
    #[error("need at least {needed} qubits, got {got}")]
    TooFewQubits { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no non-degenerate circuit after {0} draws")]
    DegenerateCircuit(usize),
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("measurement matrix is empty")]
    EmptyMeasurements,
    #[error("unsupported format version {got}, expected {expected}")]
    FormatVersion { expected: u32, got: u32 },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
