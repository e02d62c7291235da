//! Two-party mix network on AHE-encrypted integers.
//!
//! `A` holds items encrypted under `B`'s key. `A` adds a fresh mask `r` to
//! each item and sends the masked items together with `E_A[r]`. `B` adds its
//! own masks `r'` to both tracks, permutes them in lockstep with a fresh `pi`
//! and returns them. `A` decrypts `r + r'` and subtracts it, ending with
//! `pi(E_B[items])`. Nothing is decrypted along the way: `B` never sees a
//! value and `A` never sees `pi`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ahe::{reduce, AheCipher, AhePublic, AheSecret};
use super::ProtocolError;

/// Masked items and the mask track, as exchanged in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct MixBatch {
    pub items: Vec<AheCipher>,
    pub masks: Vec<AheCipher>,
}

/// `A`'s first move. `b_key` is `B`'s public key, `a_key` is `A`'s own.
pub fn mix_mask<R: Rng>(
    b_key: &impl AhePublic,
    a_key: &impl AhePublic,
    items: &[AheCipher],
    rng: &mut R,
) -> Result<MixBatch, ProtocolError> {
    let mut batch = MixBatch {
        items: Vec::with_capacity(items.len()),
        masks: Vec::with_capacity(items.len()),
    };
    for c in items {
        let r = reduce(rng.gen(), c.width());
        batch.items.push(b_key.add_plain(c, r)?);
        batch.masks.push(a_key.encrypt(r, c.width()));
    }
    Ok(batch)
}

/// `B`'s move: add own masks to both tracks and apply `pi`, where output
/// position `t` takes input `pi[t]`.
pub fn mix_permute<R: Rng>(
    b_key: &impl AhePublic,
    a_key: &impl AhePublic,
    batch: MixBatch,
    pi: &[usize],
    rng: &mut R,
) -> Result<MixBatch, ProtocolError> {
    let k = batch.items.len();
    if batch.masks.len() != k || pi.len() != k {
        return Err(ProtocolError::LengthMismatch(format!(
            "{k} items, {} masks, permutation of {}",
            batch.masks.len(),
            pi.len()
        )));
    }
    let mut items = Vec::with_capacity(k);
    let mut masks = Vec::with_capacity(k);
    for (c, m) in batch.items.iter().zip(&batch.masks) {
        let r = reduce(rng.gen(), c.width());
        items.push(b_key.rerandomize(&b_key.add_plain(c, r)?)?);
        masks.push(a_key.rerandomize(&a_key.add_plain(m, r)?)?);
    }
    Ok(MixBatch {
        items: pi.iter().map(|&t| items[t]).collect(),
        masks: pi.iter().map(|&t| masks[t]).collect(),
    })
}

/// `A`'s last move: strip the combined masks.
pub fn mix_unmask(
    b_key: &impl AhePublic,
    a_secret: &impl AheSecret,
    batch: MixBatch,
) -> Result<Vec<AheCipher>, ProtocolError> {
    if batch.items.len() != batch.masks.len() {
        return Err(ProtocolError::LengthMismatch(format!(
            "{} items but {} masks",
            batch.items.len(),
            batch.masks.len()
        )));
    }
    batch
        .items
        .iter()
        .zip(&batch.masks)
        .map(|(c, m)| {
            let r = a_secret.decrypt(m)?;
            b_key.add_plain(c, reduce(r.wrapping_neg(), c.width()))
        })
        .collect()
}

/// Uniform permutation of `0..k`.
pub fn random_permutation<R: Rng>(k: usize, rng: &mut R) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..k).collect();
    pi.shuffle(rng);
    pi
}

/// Runs the whole exchange with a fresh permutation drawn from `rng_b`.
/// Returns `A`'s output and `B`'s secret permutation.
pub fn mix_network<R: Rng>(
    items: &[AheCipher],
    a_secret: &impl AheSecret,
    a_public: &impl AhePublic,
    b_secret: &impl AheSecret,
    b_public: &impl AhePublic,
    rng_a: &mut R,
    rng_b: &mut R,
) -> Result<(Vec<AheCipher>, Vec<usize>), ProtocolError> {
    let pi = random_permutation(items.len(), rng_b);
    let sent = mix_mask(b_public, a_secret, items, rng_a)?;
    let back = mix_permute(b_secret, a_public, sent, &pi, rng_b)?;
    Ok((mix_unmask(b_public, a_secret, back)?, pi))
}
