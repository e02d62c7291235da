//! Additively homomorphic encryption capability and an insecure simulator.
//!
//! Plaintexts live in `Z_{2^w}`; the width travels with each ciphertext and
//! additions wrap at that width.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::circuit::next_instance_id;

/// Simulated ciphertext: the plaintext plus a fresh nonce. **Not secure.**
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AheCipher {
    key: u32,
    width: u32,
    value: u128,
    nonce: u64,
}

impl AheCipher {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn key(&self) -> u32 {
        self.key
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }
}

pub fn reduce(value: u128, width: u32) -> u128 {
    if width >= 128 {
        value
    } else {
        value & ((1u128 << width) - 1)
    }
}

/// Operations available to anyone holding the public key.
pub trait AhePublic {
    fn key_id(&self) -> u32;
    fn encrypt(&self, value: u128, width: u32) -> AheCipher;
    fn add_cipher(&self, a: &AheCipher, b: &AheCipher) -> Result<AheCipher, ProtocolError>;
    fn add_plain(&self, a: &AheCipher, value: u128) -> Result<AheCipher, ProtocolError>;
    fn rerandomize(&self, a: &AheCipher) -> Result<AheCipher, ProtocolError>;
}

pub trait AheSecret: AhePublic {
    fn decrypt(&self, c: &AheCipher) -> Result<u128, ProtocolError>;
}

#[derive(Debug)]
pub struct SimAhePublic {
    key: u32,
    nonce: AtomicU64,
}

impl SimAhePublic {
    fn fresh(&self, value: u128, width: u32) -> AheCipher {
        AheCipher {
            key: self.key,
            width,
            value: reduce(value, width),
            nonce: self.nonce.fetch_add(1, Ordering::Relaxed),
        }
    }

    fn check(&self, c: &AheCipher) -> Result<(), ProtocolError> {
        if c.key != self.key {
            return Err(ProtocolError::WrongKey {
                expected: self.key,
                got: c.key,
            });
        }
        Ok(())
    }
}

impl AhePublic for SimAhePublic {
    fn key_id(&self) -> u32 {
        self.key
    }

    fn encrypt(&self, value: u128, width: u32) -> AheCipher {
        assert!((1..=128).contains(&width), "AHE width must be in 1..=128");
        self.fresh(value, width)
    }

    fn add_cipher(&self, a: &AheCipher, b: &AheCipher) -> Result<AheCipher, ProtocolError> {
        self.check(a)?;
        self.check(b)?;
        if a.width != b.width {
            return Err(ProtocolError::LengthMismatch(format!(
                "adding {}-bit and {}-bit ciphertexts",
                a.width, b.width
            )));
        }
        Ok(self.fresh(a.value.wrapping_add(b.value), a.width))
    }

    fn add_plain(&self, a: &AheCipher, value: u128) -> Result<AheCipher, ProtocolError> {
        self.check(a)?;
        Ok(self.fresh(a.value.wrapping_add(value), a.width))
    }

    fn rerandomize(&self, a: &AheCipher) -> Result<AheCipher, ProtocolError> {
        self.check(a)?;
        Ok(self.fresh(a.value, a.width))
    }
}

/// Key pair. Hand out [`SimAhe::public`] to the other party.
#[derive(Debug)]
pub struct SimAhe {
    public: SimAhePublic,
}

impl Default for SimAhe {
    fn default() -> Self {
        Self::new()
    }
}

impl SimAhe {
    pub fn new() -> Self {
        Self {
            public: SimAhePublic {
                key: next_instance_id(),
                nonce: AtomicU64::new(1),
            },
        }
    }

    /// A public-key handle with its own nonce space.
    pub fn public(&self) -> SimAhePublic {
        SimAhePublic {
            key: self.public.key,
            nonce: AtomicU64::new(1 << 63),
        }
    }
}

impl AhePublic for SimAhe {
    fn key_id(&self) -> u32 {
        self.public.key
    }

    fn encrypt(&self, value: u128, width: u32) -> AheCipher {
        self.public.encrypt(value, width)
    }

    fn add_cipher(&self, a: &AheCipher, b: &AheCipher) -> Result<AheCipher, ProtocolError> {
        self.public.add_cipher(a, b)
    }

    fn add_plain(&self, a: &AheCipher, value: u128) -> Result<AheCipher, ProtocolError> {
        self.public.add_plain(a, value)
    }

    fn rerandomize(&self, a: &AheCipher) -> Result<AheCipher, ProtocolError> {
        self.public.rerandomize(a)
    }
}

impl AheSecret for SimAhe {
    fn decrypt(&self, c: &AheCipher) -> Result<u128, ProtocolError> {
        self.public.check(c)?;
        Ok(c.value)
    }
}
