//! Homomorphic bit abstraction and the integer circuits built on it.
//!
//! [`BitBackend`] is the capability every secure pipeline is written
//! against. [`InsecureSimBackend`] is the in-tree implementation: it carries
//! plaintexts and counts gates. An adapter to a real gate-bootstrapping
//! scheme would implement the same two traits.

mod backend;
mod int;
mod sim;
mod steps;

pub use backend::{BitBackend, BitDecrypt, CostModel, GateStats};
pub use int::{
    add, decrypt_bits, equals, less_than, negate, oblivious_swap, oblivious_swap_int,
    saturating_popcount, sub, EncInt,
};
pub use sim::{InsecureSimBackend, SimBit};
pub use steps::{StepLog, StepStats};

pub(crate) use sim::next_instance_id;
