//! Single-outsourcer secure CWC over a [`BitBackend`].
//!
//! The data owner encrypts its rows under its own key; the evaluator then
//! runs three steps entirely on ciphertexts:
//!
//! 1. inconsistency bitstrings for every feature,
//! 2. saturating popcounts and an oblivious Batcher sort of whole payloads
//!    (index, count, bitstring),
//! 3. greedy selection via suffix ORs, and a shuffled index array `P`
//!    returned to the owner.
//!
//! Sorting uses the composite key `count * 2^w + index` (`w` index bits) so
//! ties break by original index, exactly like the plaintext reference.

pub mod batcher;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use batcher::{batcher_schedule, closed_form_count, ComparatorSchedule};

use crate::circuit::{
    less_than, oblivious_swap, saturating_popcount, BitBackend, BitDecrypt, EncInt, StepLog,
};
use crate::cwc::inconsistency_witness;
use crate::dataset::{Dataset, Row};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncRow<T> {
    pub features: Vec<T>,
    pub dummy: T,
}

/// Encrypted rows grouped by class. The grouping itself is public.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncDataset<T> {
    pub feature_count: usize,
    pub positives: Vec<EncRow<T>>,
    pub negatives: Vec<EncRow<T>>,
}

impl<T: Clone> EncDataset<T> {
    /// Concatenates class groups: `self` first, then `other`.
    pub fn union(mut self, other: EncDataset<T>) -> Result<Self> {
        if self.feature_count != other.feature_count {
            return Err(Error::WidthMismatch {
                left: self.feature_count,
                right: other.feature_count,
            });
        }
        self.positives.extend(other.positives);
        self.negatives.extend(other.negatives);
        Ok(self)
    }

    pub fn pair_count(&self) -> usize {
        self.positives.len() * self.negatives.len()
    }

    /// Positives then negatives.
    pub fn decrypt<B: BitDecrypt<Bit = T>>(&self, be: &B) -> Vec<Row> {
        let decode = |r: &EncRow<T>, class| Row {
            features: r.features.iter().map(|b| be.decrypt_bit(b)).collect(),
            class,
            dummy: be.decrypt_bit(&r.dummy),
        };
        self.positives
            .iter()
            .map(|r| decode(r, true))
            .chain(self.negatives.iter().map(|r| decode(r, false)))
            .collect()
    }
}

/// Bitwise encryption of every feature bit and dummy bit, grouped by class.
pub fn encrypt_dataset<B: BitBackend>(be: &B, d: &Dataset) -> EncDataset<B::Bit> {
    let enc = |r: &Row| EncRow {
        features: r.features.iter().map(|&b| be.encrypt_bit(b)).collect(),
        dummy: be.encrypt_bit(r.dummy),
    };
    EncDataset {
        feature_count: d.feature_count(),
        positives: d.positives().map(enc).collect(),
        negatives: d.negatives().map(enc).collect(),
    }
}

/// Bits needed for 1-based feature indices up to `k`, i.e. `ceil(log2(k + 1))`.
pub fn index_width(k: usize) -> usize {
    ((usize::BITS - k.leading_zeros()) as usize).max(1)
}

/// `ceil(log2(nm + 1))`, enough that popcounts never saturate.
pub fn default_b_max(pairs: usize) -> usize {
    ((usize::BITS - pairs.leading_zeros()) as usize).max(1)
}

/// One feature's encrypted state: original index, count and bitstring.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncFeaturePayload<T> {
    pub index: EncInt<T>,
    pub count: EncInt<T>,
    pub bitstring: Vec<T>,
}

impl<T: Clone> EncFeaturePayload<T> {
    /// `(index, count, bitstring)` in the clear.
    pub fn decrypt<B: BitDecrypt<Bit = T>>(&self, be: &B) -> (usize, usize, Vec<bool>) {
        (
            self.index.decrypt(be) as usize,
            self.count.decrypt(be) as usize,
            self.bitstring.iter().map(|b| be.decrypt_bit(b)).collect(),
        )
    }

    fn flatten(&self, sentinel: &T) -> Vec<T> {
        let mut bits =
            Vec::with_capacity(self.index.width() + self.count.width() + 1 + self.bitstring.len());
        bits.extend_from_slice(self.index.bits());
        bits.extend_from_slice(self.count.bits());
        bits.push(sentinel.clone());
        bits.extend_from_slice(&self.bitstring);
        bits
    }

    fn unflatten(mut bits: Vec<T>, index_w: usize, count_w: usize) -> (Self, T) {
        let bitstring = bits.split_off(index_w + count_w + 1);
        let sentinel = bits.pop().expect("sentinel bit");
        let count = bits.split_off(index_w);
        (
            EncFeaturePayload {
                index: EncInt::from_bits(bits),
                count: EncInt::from_bits(count),
                bitstring,
            },
            sentinel,
        )
    }
}

/// Bitstrings `(x_p ^ y_q) | d_p | d_q` for every feature, with encrypted
/// 1-based indices. Counts are left empty for [`enc_counts`].
///
/// The dummy term `d_p | d_q` is shared across features, so the cost is
/// `nm` ORs plus `k*nm` (XOR + OR).
pub fn enc_bitstrings<B: BitBackend>(
    be: &B,
    data: &EncDataset<B::Bit>,
) -> Vec<EncFeaturePayload<B::Bit>> {
    let k = data.feature_count;
    let pairs: Vec<(&EncRow<B::Bit>, &EncRow<B::Bit>)> = data
        .positives
        .iter()
        .flat_map(|p| data.negatives.iter().map(move |q| (p, q)))
        .collect();
    let dummy_or: Vec<B::Bit> = pairs
        .par_iter()
        .map(|(p, q)| be.or(&p.dummy, &q.dummy))
        .collect();
    let w = index_width(k);
    (0..k)
        .into_par_iter()
        .map(|i| EncFeaturePayload {
            index: EncInt::encrypt(be, (i + 1) as u128, w),
            count: EncInt::from_bits(Vec::new()),
            bitstring: pairs
                .iter()
                .zip(&dummy_or)
                .map(|((p, q), d)| be.or(&be.xor(&p.features[i], &q.features[i]), d))
                .collect(),
        })
        .collect()
}

/// Fills every payload's count with a `b_max`-bit saturating popcount.
pub fn enc_counts<B: BitBackend>(
    be: &B,
    payloads: Vec<EncFeaturePayload<B::Bit>>,
    b_max: usize,
) -> Result<Vec<EncFeaturePayload<B::Bit>>> {
    payloads
        .into_par_iter()
        .map(|mut p| {
            p.count = saturating_popcount(be, &p.bitstring, b_max)?;
            Ok(p)
        })
        .collect()
}

/// `index | count << w | sentinel << (w + b) ` plus one zero spare bit on top
/// for the comparator's sign.
pub fn sort_key<B: BitBackend>(
    be: &B,
    p: &EncFeaturePayload<B::Bit>,
    sentinel: Option<&B::Bit>,
) -> EncInt<B::Bit> {
    let mut bits = p.index.bits().to_vec();
    bits.extend_from_slice(p.count.bits());
    if let Some(s) = sentinel {
        bits.push(s.clone());
    }
    bits.push(be.constant(false));
    EncInt::from_bits(bits)
}

fn sentinel_payload<B: BitBackend>(
    be: &B,
    index_w: usize,
    count_w: usize,
    len: usize,
) -> EncFeaturePayload<B::Bit> {
    EncFeaturePayload {
        index: EncInt::constant(be, 0, index_w),
        count: EncInt::constant(be, 0, count_w),
        bitstring: (0..len).map(|_| be.constant(false)).collect(),
    }
}

fn check_uniform<T: Clone>(payloads: &[EncFeaturePayload<T>]) -> Result<(usize, usize, usize)> {
    let first = payloads
        .first()
        .map(|p| (p.index.width(), p.count.width(), p.bitstring.len()))
        .unwrap_or_default();
    if payloads
        .iter()
        .any(|p| (p.index.width(), p.count.width(), p.bitstring.len()) != first)
    {
        return Err(Error::ShapeMismatch("payloads differ in shape".into()));
    }
    Ok(first)
}

/// Sorts payloads ascending by composite key with a padded comparator network.
///
/// Padding positions hold sentinel payloads whose key has the sentinel bit
/// set, so they end up in the tail and are dropped afterwards. Every
/// comparator computes `c = key_j < key_i` and obliviously swaps the full
/// payloads (index, count, sentinel bit and bitstring).
pub fn oblivious_sort<B: BitBackend>(
    be: &B,
    payloads: Vec<EncFeaturePayload<B::Bit>>,
    schedule: &ComparatorSchedule,
) -> Result<Vec<EncFeaturePayload<B::Bit>>> {
    let k = payloads.len();
    if k != schedule.inputs() {
        return Err(Error::ShapeMismatch(format!(
            "{k} payloads for a {}-input schedule",
            schedule.inputs()
        )));
    }
    let (index_w, count_w, len) = check_uniform(&payloads)?;

    let mut slots: Vec<Option<(EncFeaturePayload<B::Bit>, B::Bit)>> = payloads
        .into_iter()
        .map(|p| Some((p, be.constant(false))))
        .collect();
    while slots.len() < schedule.width() {
        slots.push(Some((
            sentinel_payload(be, index_w, count_w, len),
            be.constant(true),
        )));
    }

    for layer in schedule.layers() {
        let work: Vec<_> = layer
            .iter()
            .map(|&(i, j)| {
                (
                    i,
                    j,
                    slots[i].take().expect("slot"),
                    slots[j].take().expect("slot"),
                )
            })
            .collect();
        let done: Vec<_> = work
            .into_par_iter()
            .map(|(i, j, (a, sa), (b, sb))| -> Result<_> {
                let c = less_than(
                    be,
                    &sort_key(be, &b, Some(&sb)),
                    &sort_key(be, &a, Some(&sa)),
                )?;
                let (lo, hi) = oblivious_swap(be, &c, &a.flatten(&sa), &b.flatten(&sb))?;
                Ok((
                    i,
                    j,
                    EncFeaturePayload::unflatten(lo, index_w, count_w),
                    EncFeaturePayload::unflatten(hi, index_w, count_w),
                ))
            })
            .collect::<Result<_>>()?;
        for (i, j, lo, hi) in done {
            slots[i] = Some(lo);
            slots[j] = Some(hi);
        }
    }

    slots.truncate(k);
    Ok(slots.into_iter().map(|s| s.expect("slot").0).collect())
}

/// Encrypted selection state after the greedy pass.
#[derive(Clone, Debug)]
pub struct SelectionState<T> {
    /// `z[i][h]` is the OR of bitstrings at sorted positions `i..k`
    /// (0-based); `z[k]` is all zeros.
    pub z: Vec<Vec<T>>,
    /// Kept flag per sorted position.
    pub kept: Vec<T>,
    /// OR of the kept bitstrings.
    pub s: Vec<T>,
}

/// Greedy CWC pass on sorted payloads.
///
/// Position `i` is kept iff the other features still in play (kept ones
/// before `i`, all ones after) fail to cover some pair:
/// `R[i] = !AND_h (Z[i+1][h] | S[h])`, then `S[h] |= R[i] & B_i[h]`.
pub fn select_features<B: BitBackend>(
    be: &B,
    sorted: &[EncFeaturePayload<B::Bit>],
) -> SelectionState<B::Bit> {
    let k = sorted.len();
    let len = sorted.first().map_or(0, |p| p.bitstring.len());
    let zeros = || -> Vec<B::Bit> { (0..len).map(|_| be.constant(false)).collect() };

    let mut z = vec![zeros()];
    for p in sorted.iter().rev() {
        let next = z.last().expect("non-empty");
        let cur = p
            .bitstring
            .par_iter()
            .zip(next)
            .map(|(b, n)| be.or(b, n))
            .collect();
        z.push(cur);
    }
    z.reverse();

    let mut s = zeros();
    let mut kept = Vec::with_capacity(k);
    for (i, p) in sorted.iter().enumerate() {
        let covered: Vec<B::Bit> = z[i + 1]
            .par_iter()
            .zip(&s)
            .map(|(a, b)| be.or(a, b))
            .collect();
        let all = covered
            .into_iter()
            .reduce(|acc, c| be.and(&acc, &c))
            .unwrap_or_else(|| be.constant(true));
        let r = be.not(&all);
        s = s
            .par_iter()
            .zip(&p.bitstring)
            .map(|(sh, bh)| be.or(sh, &be.and(&r, bh)))
            .collect();
        kept.push(r);
    }
    SelectionState { z, kept, s }
}

/// `P[h] = R[h] ? index_h : 0`, shuffled with a seeded permutation.
pub fn output_indices<B: BitBackend>(
    be: &B,
    state: &SelectionState<B::Bit>,
    sorted: &[EncFeaturePayload<B::Bit>],
    shuffle_seed: u64,
) -> Vec<EncInt<B::Bit>> {
    let mut out: Vec<EncInt<B::Bit>> = state
        .kept
        .iter()
        .zip(sorted)
        .map(|(r, p)| {
            let zero = be.constant(false);
            EncInt::from_bits(p.index.bits().iter().map(|b| be.mux(r, b, &zero)).collect())
        })
        .collect();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub selected: Vec<usize>,
    pub k: usize,
    pub pairs: usize,
    pub b_max: usize,
    /// Comparators executed (padded network).
    pub comparators: usize,
    /// Comparators of the same network with sentinel positions pruned.
    pub comparators_minimal: usize,
    pub steps: StepLog,
}

/// Full baseline pipeline. The owner-side consistency check runs on the
/// plaintext before anything is encrypted.
pub fn run_baseline<B: BitDecrypt>(
    d: &Dataset,
    b_max: Option<usize>,
    shuffle_seed: u64,
    be: &B,
) -> Result<BaselineReport> {
    if let Some((p, q)) = inconsistency_witness(d) {
        return Err(Error::Inconsistent { p, q });
    }
    let k = d.feature_count();
    let pairs = d.positive_count() * d.negative_count();
    let b_max = b_max.unwrap_or_else(|| default_b_max(pairs));
    let schedule = batcher_schedule(k);
    let mut steps = StepLog::default();

    let data = encrypt_dataset(be, d);
    let payloads = steps.measure(be, "step1.bitstrings", || enc_bitstrings(be, &data));
    let payloads = steps.measure(be, "step2.counts", || enc_counts(be, payloads, b_max))?;
    let sorted = steps.measure(be, "step2.sort", || oblivious_sort(be, payloads, &schedule))?;
    let state = steps.measure(be, "step3.select", || select_features(be, &sorted));
    let p = steps.measure(be, "step3.output", || {
        output_indices(be, &state, &sorted, shuffle_seed)
    });

    let mut selected: Vec<usize> = p
        .iter()
        .map(|e| e.decrypt(be) as usize)
        .filter(|&i| i != 0)
        .collect();
    selected.sort_unstable();
    Ok(BaselineReport {
        selected,
        k,
        pairs,
        b_max,
        comparators: schedule.len(),
        comparators_minimal: schedule.restricted().len(),
        steps,
    })
}
