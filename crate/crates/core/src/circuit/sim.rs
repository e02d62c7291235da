//! Cleartext simulator backend. **Not secure**: every ciphertext carries its
//! plaintext. It exists so that circuits and protocols can be checked
//! end to end and their gate cost counted exactly.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::backend::{BitBackend, BitDecrypt, GateStats};

static NEXT_INSTANCE: AtomicU32 = AtomicU32::new(1);

pub(crate) fn next_instance_id() -> u32 {
    NEXT_INSTANCE.fetch_add(1, Ordering::Relaxed)
}

/// Simulated ciphertext. `nonce` is unique per fresh encryption or gate
/// output, so re-encryption is observable; trivial constants use nonce 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimBit {
    value: bool,
    owner: u32,
    nonce: u64,
}

impl SimBit {
    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    pub fn owner(&self) -> u32 {
        self.owner
    }
}

#[derive(Debug)]
pub struct InsecureSimBackend {
    id: u32,
    nonce: AtomicU64,
    xor: AtomicU64,
    and: AtomicU64,
    not: AtomicU64,
    mux: AtomicU64,
}

impl Default for InsecureSimBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl InsecureSimBackend {
    pub fn new() -> Self {
        Self {
            id: next_instance_id(),
            nonce: AtomicU64::new(1),
            xor: AtomicU64::new(0),
            and: AtomicU64::new(0),
            not: AtomicU64::new(0),
            mux: AtomicU64::new(0),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    fn fresh(&self, value: bool) -> SimBit {
        SimBit {
            value,
            owner: self.id,
            nonce: self.nonce.fetch_add(1, Ordering::Relaxed),
        }
    }

    fn check(&self, c: &SimBit) -> bool {
        assert_eq!(
            c.owner, self.id,
            "ciphertext belongs to backend {}",
            c.owner
        );
        c.value
    }

    fn gate(&self, counter: &AtomicU64, value: bool) -> SimBit {
        counter.fetch_add(1, Ordering::Relaxed);
        self.fresh(value)
    }
}

impl BitBackend for InsecureSimBackend {
    type Bit = SimBit;

    fn encrypt_bit(&self, value: bool) -> SimBit {
        self.fresh(value)
    }

    fn constant(&self, value: bool) -> SimBit {
        SimBit {
            value,
            owner: self.id,
            nonce: 0,
        }
    }

    fn xor(&self, a: &SimBit, b: &SimBit) -> SimBit {
        let v = self.check(a) ^ self.check(b);
        self.gate(&self.xor, v)
    }

    fn and(&self, a: &SimBit, b: &SimBit) -> SimBit {
        let v = self.check(a) & self.check(b);
        self.gate(&self.and, v)
    }

    fn not(&self, a: &SimBit) -> SimBit {
        let v = !self.check(a);
        self.gate(&self.not, v)
    }

    fn mux(&self, select: &SimBit, a: &SimBit, b: &SimBit) -> SimBit {
        let (s, a, b) = (self.check(select), self.check(a), self.check(b));
        self.gate(&self.mux, if s { a } else { b })
    }

    fn stats(&self) -> GateStats {
        GateStats {
            xor: self.xor.load(Ordering::Relaxed),
            and: self.and.load(Ordering::Relaxed),
            not: self.not.load(Ordering::Relaxed),
            mux: self.mux.load(Ordering::Relaxed),
        }
    }
}

impl BitDecrypt for InsecureSimBackend {
    fn decrypt_bit(&self, c: &SimBit) -> bool {
        self.check(c)
    }
}
