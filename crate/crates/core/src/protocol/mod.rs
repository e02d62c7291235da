//! Two-party secure CWC with a mix network.

pub mod ahe;
pub mod audit;
pub mod channel;
pub mod mix;
pub mod parties;

use thiserror::Error;

pub use ahe::{AheCipher, AhePublic, AheSecret, SimAhe, SimAhePublic};
pub use audit::{
    audit_masks, audit_run, audit_shape, audit_transcript, reference_transcript, AuditReport,
    AuditRule, Violation,
};
pub use channel::{
    Body, Channel, Duplex, Message, PublicParams, Role, Transcript, TranscriptRecord, Transport,
};
pub use mix::{mix_mask, mix_network, mix_permute, mix_unmask, MixBatch};
pub use parties::{
    execute, joint_preprocess, party_seeds, public_params, run_improved, run_session, Fault,
    ImprovedConfig, ImprovedReport, MaskRecord, Observation, PartyA, PartyB, PublicView,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u8, got: u8 },

    #[error("public parameters disagree: {0}")]
    ParamMismatch(String),

    #[error("unexpected message: expected `{expected}`, got `{got}`")]
    UnexpectedStep { expected: String, got: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("comparison reveal {position} is {value}, not a bit")]
    NonBit { position: usize, value: u8 },

    #[error("ciphertext under key {got}, expected key {expected}")]
    WrongKey { expected: u32, got: u32 },

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("channel closed before the protocol finished")]
    Closed,

    #[error("peer aborted: {0}")]
    PeerAbort(String),

    #[error("the joint dataset is inconsistent")]
    InconsistentUnion,

    #[error("local failure: {0}")]
    Local(String),
}

impl From<crate::error::Error> for ProtocolError {
    fn from(e: crate::error::Error) -> Self {
        match e {
            crate::error::Error::Protocol(p) => p,
            other => ProtocolError::Local(other.to_string()),
        }
    }
}
