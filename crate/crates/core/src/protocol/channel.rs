//! Messages, framing and the in-process transport, with transcript capture.

use std::collections::VecDeque;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ahe::AheCipher;
use super::ProtocolError;
use crate::baseline::EncDataset;
use crate::circuit::EncInt;

pub const PROTOCOL_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::A => "A",
            Role::B => "B",
        })
    }
}

/// Shape both parties must agree on before anything is exchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicParams {
    pub k: usize,
    pub n_a: usize,
    pub m_a: usize,
    pub n_b: usize,
    pub m_b: usize,
    pub b_max: usize,
}

impl PublicParams {
    pub fn pairs(&self) -> usize {
        (self.n_a + self.n_b) * (self.m_a + self.m_b)
    }
}

/// One feature payload in flight through the mix. Integer fields are
/// zero-extended by 32 bits and carry an additive mask; bitstrings carry a
/// one-time XOR pad. The mask tracks are under `A`'s AHE key.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixItem<T> {
    pub index: EncInt<T>,
    pub count: EncInt<T>,
    pub bits: Vec<T>,
    pub index_mask: AheCipher,
    pub count_mask: AheCipher,
    pub bit_masks: Vec<AheCipher>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Body<T> {
    Hello {
        version: u8,
        params: PublicParams,
    },
    Rows(EncDataset<T>),
    Masked(Vec<MixItem<T>>),
    Permuted(Vec<MixItem<T>>),
    Compare(Vec<T>),
    Reveal(Vec<u8>),
    Output {
        pairs: Vec<(EncInt<T>, T)>,
        consistent: T,
    },
    /// Membership flags for features `1..=k`; fixed size regardless of result.
    Selected(Vec<bool>),
    Abort(String),
}

impl<T> Body<T> {
    pub fn step(&self) -> &'static str {
        match self {
            Body::Hello { .. } => "hello",
            Body::Rows(_) => "pre.rows",
            Body::Masked(_) => "mix.masked",
            Body::Permuted(_) => "mix.permuted",
            Body::Compare(_) => "sort.compare",
            Body::Reveal(_) => "sort.reveal",
            Body::Output { .. } => "output.pairs",
            Body::Selected(_) => "result.selected",
            Body::Abort(_) => "abort",
        }
    }
}

/// `masked` is the sender's declaration that every value the receiver can
/// decrypt from this message is hidden under fresh randomness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Message<T> {
    pub masked: bool,
    pub body: Body<T>,
}

impl<T> Message<T> {
    pub fn plain(body: Body<T>) -> Self {
        Self {
            masked: false,
            body,
        }
    }

    pub fn masked(body: Body<T>) -> Self {
        Self { masked: true, body }
    }

    pub fn step(&self) -> &'static str {
        self.body.step()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub sender: Role,
    pub step: String,
    pub bytes: usize,
    pub masked: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> serde_json::Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<serde_json::Result<_>>()?;
        Ok(Self { records })
    }

    /// `(sender, step, bytes)` per message.
    pub fn shape(&self) -> Vec<(Role, String, usize)> {
        self.records
            .iter()
            .map(|r| (r.sender, r.step.clone(), r.bytes))
            .collect()
    }

    pub fn total_bytes(&self) -> usize {
        self.records.iter().map(|r| r.bytes).sum()
    }
}

/// Byte-frame transport between the two parties.
pub trait Transport {
    fn send(&mut self, from: Role, frame: Vec<u8>);
    fn recv(&mut self, to: Role) -> Option<Vec<u8>>;
}

/// In-process duplex queue.
#[derive(Debug, Default)]
pub struct Duplex {
    a_to_b: VecDeque<Vec<u8>>,
    b_to_a: VecDeque<Vec<u8>>,
}

impl Transport for Duplex {
    fn send(&mut self, from: Role, frame: Vec<u8>) {
        match from {
            Role::A => self.a_to_b.push_back(frame),
            Role::B => self.b_to_a.push_back(frame),
        }
    }

    fn recv(&mut self, to: Role) -> Option<Vec<u8>> {
        match to {
            Role::A => self.b_to_a.pop_front(),
            Role::B => self.a_to_b.pop_front(),
        }
    }
}

/// Length-prefixed frame: 4-byte little-endian length, then the bincode body.
pub fn encode_frame<T: Serialize>(msg: &Message<T>) -> Vec<u8> {
    let body = bincode::serialize(msg).expect("message serializes");
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
    frame.extend_from_slice(&body);
    frame
}

pub fn decode_frame<T: DeserializeOwned>(frame: &[u8]) -> Result<Message<T>, ProtocolError> {
    let (len, body) = frame
        .split_first_chunk::<4>()
        .ok_or_else(|| ProtocolError::Malformed("frame shorter than its length prefix".into()))?;
    if u32::from_le_bytes(*len) as usize != body.len() {
        return Err(ProtocolError::Malformed(
            "length prefix disagrees with frame".into(),
        ));
    }
    bincode::deserialize(body).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// A transport plus the transcript of everything sent over it.
pub struct Channel<X: Transport = Duplex> {
    transport: X,
    transcript: Transcript,
}

impl Default for Channel<Duplex> {
    fn default() -> Self {
        Self::new(Duplex::default())
    }
}

impl<X: Transport> Channel<X> {
    pub fn new(transport: X) -> Self {
        Self {
            transport,
            transcript: Transcript::default(),
        }
    }

    pub fn send<T: Serialize>(&mut self, from: Role, msg: &Message<T>) {
        let frame = encode_frame(msg);
        self.transcript.records.push(TranscriptRecord {
            seq: self.transcript.records.len(),
            sender: from,
            step: msg.step().to_string(),
            bytes: frame.len(),
            masked: msg.masked,
        });
        self.transport.send(from, frame);
    }

    pub fn recv<T: DeserializeOwned>(&mut self, to: Role) -> Result<Message<T>, ProtocolError> {
        let frame = self.transport.recv(to).ok_or(ProtocolError::Closed)?;
        decode_frame(&frame)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
