//! The two-party secure CWC as a pair of state machines.
//!
//! Message flow (`->` is A to B):
//!
//! ```text
//! -> hello            version byte and public parameters
//! <- pre.rows         B's rows, bitwise encrypted under B's key
//! -> mix.masked       every payload masked, plus masks under A's AHE key
//! <- mix.permuted     re-masked, re-encrypted, permuted by B's secret pi
//! -> sort.compare     one round per comparator layer: c ^ mu
//! <- sort.reveal      decrypted masked bits
//! -> output.pairs     (index, kept) pairs under A's own fresh shuffle
//! <- result.selected  membership flags for features 1..=k
//! ```
//!
//! A evaluates every gate. B only encrypts and decrypts, and everything it
//! decrypts before the final output is masked. Indices travel inside the
//! payloads, so the output already names original features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ahe::{reduce, AheCipher, AhePublic, AheSecret, SimAhe, SimAhePublic};
use super::channel::{
    Body, Channel, Message, MixItem, PublicParams, Role, Transcript, PROTOCOL_VERSION,
};
use super::mix::random_permutation;
use super::ProtocolError;
use crate::baseline::{
    batcher_schedule, default_b_max, enc_bitstrings, enc_counts, encrypt_dataset, index_width,
    select_features, sort_key, ComparatorSchedule, EncDataset, EncFeaturePayload,
};
use crate::circuit::{add, less_than, BitBackend, BitDecrypt, EncInt, GateStats, StepLog};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Extra mask bits on top of each integer field's width.
pub const MASK_SLACK: usize = 32;

/// Deliberate protocol deviations, for exercising the auditor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    #[default]
    None,
    /// A sends payloads to the mix with all-zero masks.
    UnmaskedMix,
    /// A sends comparison bits without the one-time pad.
    UnmaskedCompare,
}

/// Gate evaluation and encryption under someone else's key, no decryption.
#[derive(Debug)]
pub struct PublicView<'a, B>(pub &'a B);

impl<B: BitBackend> BitBackend for PublicView<'_, B> {
    type Bit = B::Bit;

    fn encrypt_bit(&self, value: bool) -> B::Bit {
        self.0.encrypt_bit(value)
    }

    fn constant(&self, value: bool) -> B::Bit {
        self.0.constant(value)
    }

    fn xor(&self, a: &B::Bit, b: &B::Bit) -> B::Bit {
        self.0.xor(a, b)
    }

    fn and(&self, a: &B::Bit, b: &B::Bit) -> B::Bit {
        self.0.and(a, b)
    }

    fn not(&self, a: &B::Bit) -> B::Bit {
        self.0.not(a)
    }

    fn mux(&self, select: &B::Bit, a: &B::Bit, b: &B::Bit) -> B::Bit {
        self.0.mux(select, a, b)
    }

    fn stats(&self) -> GateStats {
        self.0.stats()
    }
}

/// One integer mask drawn by a party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub party: Role,
    pub step: String,
    pub item: usize,
    pub field: String,
    pub width: u32,
    pub value: u128,
}

/// A plaintext B obtained by decryption, kept for the auditor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step: String,
    pub value: u128,
}

fn check_params(
    data: &Dataset,
    k: usize,
    n: usize,
    m: usize,
    who: Role,
) -> Result<(), ProtocolError> {
    let got = (
        data.feature_count(),
        data.positive_count(),
        data.negative_count(),
    );
    if got != (k, n, m) {
        return Err(ProtocolError::ParamMismatch(format!(
            "party {who} holds (k, n, m) = {got:?}, parameters say {:?}",
            (k, n, m)
        )));
    }
    Ok(())
}

fn unexpected<T>(expected: &str, got: &Body<T>) -> ProtocolError {
    match got {
        Body::Abort(reason) => ProtocolError::PeerAbort(reason.clone()),
        other => ProtocolError::UnexpectedStep {
            expected: expected.to_string(),
            got: other.step().to_string(),
        },
    }
}

/// A's preprocessing: encrypt its own rows under B's key, join them with
/// B's encrypted `rows` (A's rows first within each class) and compute every
/// feature payload over the union, including cross-party pairs.
pub fn joint_preprocess<B: BitBackend>(
    be: &B,
    own: &Dataset,
    rows: EncDataset<B::Bit>,
    b_max: usize,
    steps: &mut StepLog,
) -> Result<Vec<EncFeaturePayload<B::Bit>>> {
    let union = encrypt_dataset(be, own).union(rows)?;
    let payloads = steps.measure(be, "pre.bitstrings", || enc_bitstrings(be, &union));
    steps.measure(be, "pre.counts", || enc_counts(be, payloads, b_max))
}

enum AState<T> {
    Start,
    AwaitRows,
    AwaitPermuted,
    Sorting {
        slots: Vec<EncFeaturePayload<T>>,
        layer: usize,
        pads: Vec<bool>,
    },
    AwaitResult,
    Done,
}

impl<T> AState<T> {
    fn expects(&self) -> &'static str {
        match self {
            AState::Start => "start",
            AState::AwaitRows => "pre.rows",
            AState::AwaitPermuted => "mix.permuted",
            AState::Sorting { .. } => "sort.reveal",
            AState::AwaitResult => "result.selected",
            AState::Done => "nothing",
        }
    }
}

/// The evaluating party: holds its rows in the clear, B's public bit key
/// and its own AHE key pair.
pub struct PartyA<'a, B: BitBackend> {
    be: PublicView<'a, B>,
    ahe: SimAhe,
    data: Dataset,
    params: PublicParams,
    schedule: ComparatorSchedule,
    rng: ChaCha8Rng,
    fault: Fault,
    state: AState<B::Bit>,
    steps: StepLog,
    masks: Vec<MaskRecord>,
    result: Option<Vec<usize>>,
}

impl<'a, B: BitBackend> PartyA<'a, B> {
    pub fn new(
        data: Dataset,
        params: PublicParams,
        be: &'a B,
        seed: u64,
        fault: Fault,
    ) -> Result<Self, ProtocolError> {
        check_params(&data, params.k, params.n_a, params.m_a, Role::A)?;
        Ok(Self {
            be: PublicView(be),
            ahe: SimAhe::new(),
            data,
            params,
            schedule: batcher_schedule(params.k).restricted(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            fault,
            state: AState::Start,
            steps: StepLog::default(),
            masks: Vec::new(),
            result: None,
        })
    }

    /// Public half of A's AHE key, for B.
    pub fn ahe_public(&self) -> SimAhePublic {
        self.ahe.public()
    }

    pub fn steps(&self) -> &StepLog {
        &self.steps
    }

    pub fn masks(&self) -> &[MaskRecord] {
        &self.masks
    }

    pub fn result(&self) -> Option<&[usize]> {
        self.result.as_deref()
    }

    pub fn start(&mut self) -> Result<Message<B::Bit>, ProtocolError> {
        if !matches!(self.state, AState::Start) {
            return Err(ProtocolError::UnexpectedStep {
                expected: self.state.expects().into(),
                got: "start".into(),
            });
        }
        self.state = AState::AwaitRows;
        Ok(Message::plain(Body::Hello {
            version: PROTOCOL_VERSION,
            params: self.params,
        }))
    }

    pub fn receive(
        &mut self,
        msg: Message<B::Bit>,
    ) -> Result<Option<Message<B::Bit>>, ProtocolError> {
        let state = std::mem::replace(&mut self.state, AState::Done);
        match (state, msg.body) {
            (AState::AwaitRows, Body::Rows(rows)) => {
                let p = self.params;
                if rows.feature_count != p.k
                    || rows.positives.len() != p.n_b
                    || rows.negatives.len() != p.m_b
                    || rows
                        .positives
                        .iter()
                        .chain(&rows.negatives)
                        .any(|r| r.features.len() != p.k)
                {
                    return Err(ProtocolError::LengthMismatch(
                        "B's rows disagree with the parameters".into(),
                    ));
                }
                let payloads =
                    joint_preprocess(&self.be, &self.data, rows, p.b_max, &mut self.steps)?;
                let items = self.mask_payloads(payloads)?;
                self.state = AState::AwaitPermuted;
                Ok(Some(Message {
                    masked: self.fault != Fault::UnmaskedMix,
                    body: Body::Masked(items),
                }))
            }
            (AState::AwaitPermuted, Body::Permuted(items)) => {
                let slots = self.unmask_payloads(items)?;
                self.next_round(slots, 0).map(Some)
            }
            (
                AState::Sorting {
                    mut slots,
                    layer,
                    pads,
                },
                Body::Reveal(bits),
            ) => {
                let comparators = &self.schedule.layers()[layer];
                if bits.len() != comparators.len() {
                    return Err(ProtocolError::LengthMismatch(format!(
                        "{} revealed bits for {} comparators",
                        bits.len(),
                        comparators.len()
                    )));
                }
                for (position, ((&(i, j), &bit), &pad)) in
                    comparators.iter().zip(&bits).zip(&pads).enumerate()
                {
                    let swap = match bit {
                        0 => pad,
                        1 => !pad,
                        value => return Err(ProtocolError::NonBit { position, value }),
                    };
                    if swap {
                        slots.swap(i, j);
                    }
                }
                self.next_round(slots, layer + 1).map(Some)
            }
            (AState::AwaitResult, Body::Selected(flags)) => {
                if flags.len() != self.params.k {
                    return Err(ProtocolError::LengthMismatch(format!(
                        "{} flags for {} features",
                        flags.len(),
                        self.params.k
                    )));
                }
                self.result = Some(
                    flags
                        .iter()
                        .enumerate()
                        .filter(|(_, &f)| f)
                        .map(|(i, _)| i + 1)
                        .collect(),
                );
                Ok(None)
            }
            (state, body) => Err(unexpected(state.expects(), &body)),
        }
    }

    fn draw_mask(&mut self, item: usize, field: &str, width: usize) -> u128 {
        let value = match self.fault {
            Fault::UnmaskedMix => 0,
            _ => reduce(self.rng.gen(), width as u32),
        };
        self.masks.push(MaskRecord {
            party: Role::A,
            step: "mix.masked".into(),
            item,
            field: field.into(),
            width: width as u32,
            value,
        });
        value
    }

    fn mask_payloads(
        &mut self,
        payloads: Vec<EncFeaturePayload<B::Bit>>,
    ) -> Result<Vec<MixItem<B::Bit>>, ProtocolError> {
        // randomness is drawn sequentially so runs are reproducible
        let mut draws = Vec::with_capacity(payloads.len());
        for (item, p) in payloads.iter().enumerate() {
            let wi = p.index.width() + MASK_SLACK;
            let wc = p.count.width() + MASK_SLACK;
            let ri = self.draw_mask(item, "index", wi);
            let rc = self.draw_mask(item, "count", wc);
            let pads: Vec<bool> = match self.fault {
                Fault::UnmaskedMix => vec![false; p.bitstring.len()],
                _ => (0..p.bitstring.len()).map(|_| self.rng.gen()).collect(),
            };
            draws.push(((ri, wi), (rc, wc), pads));
        }
        let (be, ahe) = (&self.be, &self.ahe);
        self.steps.measure(be, "mix.mask", || {
            payloads
                .into_par_iter()
                .zip(draws)
                .map(|(p, ((ri, wi), (rc, wc), pads))| {
                    let mask_int =
                        |x: &EncInt<B::Bit>, r: u128, w: usize| -> Result<EncInt<B::Bit>> {
                            add(be, &x.extended(be, w), &EncInt::constant(be, r, w))
                        };
                    Ok(MixItem {
                        index: mask_int(&p.index, ri, wi)?,
                        count: mask_int(&p.count, rc, wc)?,
                        bits: p
                            .bitstring
                            .iter()
                            .zip(&pads)
                            .map(|(b, &r)| be.xor(b, &be.constant(r)))
                            .collect(),
                        index_mask: ahe.encrypt(ri, wi as u32),
                        count_mask: ahe.encrypt(rc, wc as u32),
                        bit_masks: pads.iter().map(|&r| ahe.encrypt(r as u128, 1)).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(ProtocolError::from)
        })
    }

    fn unmask_payloads(
        &mut self,
        items: Vec<MixItem<B::Bit>>,
    ) -> Result<Vec<EncFeaturePayload<B::Bit>>, ProtocolError> {
        let p = self.params;
        let (li, lc, len) = (index_width(p.k), p.b_max, p.pairs());
        if items.len() != p.k {
            return Err(ProtocolError::LengthMismatch(format!(
                "{} payloads for {} features",
                items.len(),
                p.k
            )));
        }
        for it in &items {
            let shape = (
                it.index.width(),
                it.count.width(),
                it.bits.len(),
                it.bit_masks.len(),
            );
            let masks = (
                it.index_mask.width() as usize,
                it.count_mask.width() as usize,
            );
            if shape != (li + MASK_SLACK, lc + MASK_SLACK, len, len)
                || masks != (li + MASK_SLACK, lc + MASK_SLACK)
            {
                return Err(ProtocolError::LengthMismatch(format!(
                    "mixed payload has shape {shape:?}"
                )));
            }
        }
        let (be, ahe) = (&self.be, &self.ahe);
        self.steps.measure(be, "mix.unmask", || {
            items
                .into_par_iter()
                .map(|it| {
                    let unmask_int = |x: &EncInt<B::Bit>,
                                      mask: &AheCipher,
                                      l: usize|
                     -> Result<EncInt<B::Bit>, ProtocolError> {
                        let r = ahe.decrypt(mask)?;
                        let w = x.width();
                        let neg = EncInt::constant(be, reduce(r.wrapping_neg(), w as u32), w);
                        Ok(add(be, x, &neg)?.truncated(l))
                    };
                    let bitstring = it
                        .bits
                        .iter()
                        .zip(&it.bit_masks)
                        .map(|(b, m)| Ok(be.xor(b, &be.constant(ahe.decrypt(m)? == 1))))
                        .collect::<Result<Vec<_>, ProtocolError>>()?;
                    Ok(EncFeaturePayload {
                        index: unmask_int(&it.index, &it.index_mask, li)?,
                        count: unmask_int(&it.count, &it.count_mask, lc)?,
                        bitstring,
                    })
                })
                .collect()
        })
    }

    /// Sends the compare round for `layer`, or the output once all layers ran.
    fn next_round(
        &mut self,
        slots: Vec<EncFeaturePayload<B::Bit>>,
        layer: usize,
    ) -> Result<Message<B::Bit>, ProtocolError> {
        let be = &self.be;
        if let Some(comparators) = self.schedule.layers().get(layer) {
            let pads: Vec<bool> = match self.fault {
                Fault::UnmaskedCompare => vec![false; comparators.len()],
                _ => (0..comparators.len()).map(|_| self.rng.gen()).collect(),
            };
            let bits = self.steps.measure(be, "sort.compare", || {
                comparators
                    .par_iter()
                    .zip(&pads)
                    .map(|(&(i, j), &pad)| {
                        let c = less_than(
                            be,
                            &sort_key(be, &slots[j], None),
                            &sort_key(be, &slots[i], None),
                        )?;
                        Ok(be.xor(&c, &be.encrypt_bit(pad)))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            self.state = AState::Sorting { slots, layer, pads };
            return Ok(Message {
                masked: self.fault != Fault::UnmaskedCompare,
                body: Body::Compare(bits),
            });
        }

        let state = self
            .steps
            .measure(be, "select", || select_features(be, &slots));
        let order = random_permutation(slots.len(), &mut self.rng);
        let (pairs, consistent) = self.steps.measure(be, "output", || {
            let consistent = state
                .z
                .first()
                .and_then(|z| z.iter().cloned().reduce(|acc, b| be.and(&acc, &b)))
                .unwrap_or_else(|| be.constant(true));
            let pairs: Vec<_> = order
                .iter()
                .map(|&t| (slots[t].index.clone(), state.kept[t].clone()))
                .collect();
            (pairs, consistent)
        });
        self.state = AState::AwaitResult;
        Ok(Message::plain(Body::Output { pairs, consistent }))
    }
}

enum BState {
    AwaitHello,
    AwaitMasked,
    Sorting { round: usize },
    AwaitOutput,
    Done,
}

impl BState {
    fn expects(&self) -> &'static str {
        match self {
            BState::AwaitHello => "hello",
            BState::AwaitMasked => "mix.masked",
            BState::Sorting { .. } => "sort.compare",
            BState::AwaitOutput => "output.pairs",
            BState::Done => "nothing",
        }
    }
}

/// The key holder: decrypts only masked values and the final output.
pub struct PartyB<'a, B: BitDecrypt> {
    be: &'a B,
    a_key: SimAhePublic,
    data: Dataset,
    params: PublicParams,
    schedule: ComparatorSchedule,
    rng: ChaCha8Rng,
    state: BState,
    view: Vec<Observation>,
    masks: Vec<MaskRecord>,
    result: Option<Vec<usize>>,
}

impl<'a, B: BitDecrypt> PartyB<'a, B> {
    pub fn new(
        data: Dataset,
        params: PublicParams,
        be: &'a B,
        a_key: SimAhePublic,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        check_params(&data, params.k, params.n_b, params.m_b, Role::B)?;
        Ok(Self {
            be,
            a_key,
            data,
            params,
            schedule: batcher_schedule(params.k).restricted(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: BState::AwaitHello,
            view: Vec::new(),
            masks: Vec::new(),
            result: None,
        })
    }

    /// Every plaintext B decrypted, in order.
    pub fn view(&self) -> &[Observation] {
        &self.view
    }

    pub fn masks(&self) -> &[MaskRecord] {
        &self.masks
    }

    pub fn result(&self) -> Option<&[usize]> {
        self.result.as_deref()
    }

    fn observe(&mut self, step: &str, value: u128) {
        self.view.push(Observation {
            step: step.into(),
            value,
        });
    }

    fn after_mix(&self) -> BState {
        if self.schedule.layers().is_empty() {
            BState::AwaitOutput
        } else {
            BState::Sorting { round: 0 }
        }
    }

    pub fn receive(
        &mut self,
        msg: Message<B::Bit>,
    ) -> Result<Option<Message<B::Bit>>, ProtocolError> {
        let state = std::mem::replace(&mut self.state, BState::Done);
        match (state, msg.body) {
            (BState::AwaitHello, Body::Hello { version, params }) => {
                if version != PROTOCOL_VERSION {
                    return Err(ProtocolError::VersionMismatch {
                        expected: PROTOCOL_VERSION,
                        got: version,
                    });
                }
                if params != self.params {
                    return Err(ProtocolError::ParamMismatch(format!(
                        "A proposed {params:?}, B expects {:?}",
                        self.params
                    )));
                }
                let rows = encrypt_dataset(self.be, &self.data);
                self.state = BState::AwaitMasked;
                Ok(Some(Message::plain(Body::Rows(rows))))
            }
            (BState::AwaitMasked, Body::Masked(items)) => {
                if items.len() != self.params.k {
                    return Err(ProtocolError::LengthMismatch(format!(
                        "{} payloads for {} features",
                        items.len(),
                        self.params.k
                    )));
                }
                let mut out = Vec::with_capacity(items.len());
                for (item, it) in items.into_iter().enumerate() {
                    if it.bits.len() != it.bit_masks.len() {
                        return Err(ProtocolError::LengthMismatch(
                            "bitstring and pad track differ".into(),
                        ));
                    }
                    let index = self.remask_int(item, "index", &it.index, &it.index_mask)?;
                    let count = self.remask_int(item, "count", &it.count, &it.count_mask)?;
                    let mut bits = Vec::with_capacity(it.bits.len());
                    let mut bit_masks = Vec::with_capacity(it.bits.len());
                    for (b, m) in it.bits.iter().zip(&it.bit_masks) {
                        let pad: bool = self.rng.gen();
                        bits.push(self.be.encrypt_bit(self.be.decrypt_bit(b) ^ pad));
                        bit_masks.push(
                            self.a_key
                                .rerandomize(&self.a_key.add_plain(m, pad as u128)?)?,
                        );
                    }
                    out.push(MixItem {
                        index: index.0,
                        count: count.0,
                        bits,
                        index_mask: index.1,
                        count_mask: count.1,
                        bit_masks,
                    });
                }
                let pi = random_permutation(out.len(), &mut self.rng);
                let mut slots: Vec<Option<MixItem<B::Bit>>> = out.into_iter().map(Some).collect();
                let permuted = pi
                    .iter()
                    .map(|&t| slots[t].take().expect("permutation"))
                    .collect();
                self.state = self.after_mix();
                Ok(Some(Message::masked(Body::Permuted(permuted))))
            }
            (BState::Sorting { round }, Body::Compare(bits)) => {
                let expected = self.schedule.layers()[round].len();
                if bits.len() != expected {
                    return Err(ProtocolError::LengthMismatch(format!(
                        "{} comparison bits, expected {expected}",
                        bits.len()
                    )));
                }
                let revealed: Vec<u8> = bits.iter().map(|b| self.be.decrypt_bit(b) as u8).collect();
                for &v in &revealed {
                    self.observe("sort.compare", v as u128);
                }
                self.state = if round + 1 == self.schedule.layers().len() {
                    BState::AwaitOutput
                } else {
                    BState::Sorting { round: round + 1 }
                };
                Ok(Some(Message::plain(Body::Reveal(revealed))))
            }
            (BState::AwaitOutput, Body::Output { pairs, consistent }) => {
                let k = self.params.k;
                if pairs.len() != k {
                    return Err(ProtocolError::LengthMismatch(format!(
                        "{} output pairs for {k} features",
                        pairs.len()
                    )));
                }
                if !self.be.decrypt_bit(&consistent) {
                    return Err(ProtocolError::InconsistentUnion);
                }
                let mut flags = vec![false; k];
                for (index, kept) in &pairs {
                    let i = index.decrypt(self.be);
                    self.observe("output.pairs", i);
                    if i == 0 || i > k as u128 {
                        return Err(ProtocolError::Malformed(format!(
                            "feature index {i} out of range"
                        )));
                    }
                    flags[i as usize - 1] = self.be.decrypt_bit(kept);
                }
                self.result = Some(
                    flags
                        .iter()
                        .enumerate()
                        .filter(|(_, &f)| f)
                        .map(|(i, _)| i + 1)
                        .collect(),
                );
                Ok(Some(Message::plain(Body::Selected(flags))))
            }
            (state, body) => Err(unexpected(state.expects(), &body)),
        }
    }

    /// Decrypts a masked integer, adds a fresh mask of the same width and
    /// re-encrypts; the AHE mask track gets the same addition.
    fn remask_int(
        &mut self,
        item: usize,
        field: &str,
        x: &EncInt<B::Bit>,
        mask: &AheCipher,
    ) -> Result<(EncInt<B::Bit>, AheCipher), ProtocolError> {
        let w = x.width();
        if w == 0 || w > 128 || mask.width() as usize != w {
            return Err(ProtocolError::LengthMismatch(format!(
                "{field} has {w} bits, mask track {}",
                mask.width()
            )));
        }
        let seen = x.decrypt(self.be);
        self.observe("mix.masked", seen);
        let r = reduce(self.rng.gen(), w as u32);
        self.masks.push(MaskRecord {
            party: Role::B,
            step: "mix.permuted".into(),
            item,
            field: field.into(),
            width: w as u32,
            value: r,
        });
        let fresh = EncInt::encrypt(self.be, reduce(seen.wrapping_add(r), w as u32), w);
        let track = self.a_key.rerandomize(&self.a_key.add_plain(mask, r)?)?;
        Ok((fresh, track))
    }
}

/// Drives both parties over `channel` until B delivers the result or a
/// party aborts. An aborting party sends an `abort` message first, so the
/// failure shows up in the transcript.
pub fn run_session<B: BitDecrypt>(
    a: &mut PartyA<'_, B>,
    b: &mut PartyB<'_, B>,
    channel: &mut Channel,
) -> Result<(), ProtocolError> {
    let hello = a.start()?;
    channel.send(Role::A, &hello);
    let mut to = Role::B;
    loop {
        let msg: Message<B::Bit> = channel.recv(to)?;
        let reply = match to {
            Role::A => a.receive(msg),
            Role::B => b.receive(msg),
        };
        match reply {
            Ok(Some(m)) => {
                channel.send(to, &m);
                to = to.peer();
            }
            Ok(None) => return Ok(()),
            Err(e) => {
                if !matches!(e, ProtocolError::PeerAbort(_)) {
                    channel.send(to, &Message::<B::Bit>::plain(Body::Abort(e.to_string())));
                }
                return Err(e);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovedConfig {
    /// `None` picks `ceil(log2(nm + 1))` for the joint pair count.
    pub b_max: Option<usize>,
    pub seed: u64,
    pub fault: Fault,
}

/// Per-party seeds derived from the master seed.
pub fn party_seeds(seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.gen(), rng.gen())
}

pub fn public_params(da: &Dataset, db: &Dataset, b_max: Option<usize>) -> Result<PublicParams> {
    if da.feature_count() != db.feature_count() {
        return Err(Error::WidthMismatch {
            left: da.feature_count(),
            right: db.feature_count(),
        });
    }
    let (n_a, m_a, n_b, m_b) = (
        da.positive_count(),
        da.negative_count(),
        db.positive_count(),
        db.negative_count(),
    );
    let b_max = b_max.unwrap_or_else(|| default_b_max((n_a + n_b) * (m_a + m_b)));
    if b_max == 0 {
        return Err(Error::Argument("b_max must be at least 1".into()));
    }
    Ok(PublicParams {
        k: da.feature_count(),
        n_a,
        m_a,
        n_b,
        m_b,
        b_max,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImprovedReport {
    pub selected: Vec<usize>,
    pub params: PublicParams,
    pub comparators: usize,
    pub steps: StepLog,
    pub transcript: Transcript,
    /// Integer masks drawn by both parties.
    pub masks: Vec<MaskRecord>,
    /// Plaintexts B decrypted.
    pub b_view: Vec<Observation>,
}

/// Runs the protocol and returns the transcript whatever the outcome.
pub fn execute<B: BitDecrypt>(
    da: &Dataset,
    db: &Dataset,
    cfg: &ImprovedConfig,
    be: &B,
) -> Result<(
    std::result::Result<ImprovedReport, ProtocolError>,
    Transcript,
)> {
    let params = public_params(da, db, cfg.b_max)?;
    let (seed_a, seed_b) = party_seeds(cfg.seed);
    let mut a = PartyA::new(da.clone(), params, be, seed_a, cfg.fault)?;
    let mut b = PartyB::new(db.clone(), params, be, a.ahe_public(), seed_b)?;
    let mut channel = Channel::default();
    let outcome = run_session(&mut a, &mut b, &mut channel);
    let transcript = channel.into_transcript();
    let report = outcome.and_then(|()| {
        let selected = b.result().expect("B finished").to_vec();
        if a.result() != Some(&selected[..]) {
            return Err(ProtocolError::Malformed(
                "parties disagree on the result".into(),
            ));
        }
        Ok(ImprovedReport {
            selected,
            params,
            comparators: a.schedule.len(),
            steps: a.steps.clone(),
            transcript: transcript.clone(),
            masks: a.masks().iter().chain(b.masks()).cloned().collect(),
            b_view: b.view().to_vec(),
        })
    });
    Ok((report, transcript))
}

/// Two-party secure CWC on `da ∪ db` (A's rows first within each class).
pub fn run_improved<B: BitDecrypt>(
    da: &Dataset,
    db: &Dataset,
    cfg: &ImprovedConfig,
    be: &B,
) -> Result<ImprovedReport> {
    let (report, _) = execute(da, db, cfg, be)?;
    Ok(report?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::InsecureSimBackend;
    use crate::cwc::cwc_select;
    use crate::dataset::{synth, Row};
    use crate::fixtures::table2;

    fn split(d: &Dataset, at: usize) -> (Dataset, Dataset) {
        let k = d.feature_count();
        let (a, b) = d.rows().split_at(at);
        (
            Dataset::with_rows(k, a.to_vec()).unwrap(),
            Dataset::with_rows(k, b.to_vec()).unwrap(),
        )
    }

    #[test]
    fn table2_split() {
        let (da, db) = split(&table2(), 4);
        let be = InsecureSimBackend::new();
        let r = run_improved(&da, &db, &ImprovedConfig::default(), &be).unwrap();
        assert_eq!(r.selected, vec![1, 3]);
        let steps: Vec<&str> = r
            .transcript
            .records
            .iter()
            .map(|x| x.step.as_str())
            .collect();
        assert_eq!(
            &steps[..4],
            ["hello", "pre.rows", "mix.masked", "mix.permuted"]
        );
        assert_eq!(
            &steps[steps.len() - 2..],
            ["output.pairs", "result.selected"]
        );
    }

    #[test]
    fn single_feature() {
        let be = InsecureSimBackend::new();
        let da = Dataset::with_rows(1, vec![Row::from_bits(&[1], 1)]).unwrap();
        let db = Dataset::with_rows(1, vec![Row::from_bits(&[0], 0)]).unwrap();
        let r = run_improved(&da, &db, &ImprovedConfig::default(), &be).unwrap();
        assert_eq!(r.selected, vec![1]);
        assert_eq!(r.comparators, 0);
        assert!(r
            .transcript
            .records
            .iter()
            .all(|x| !x.step.starts_with("sort")));
    }

    #[test]
    fn empty_b_matches_single_party() {
        let be = InsecureSimBackend::new();
        let d = synth::random_consistent(6, 3, 4, 8);
        let empty = Dataset::with_rows(6, vec![]).unwrap();
        let r = run_improved(&d, &empty, &ImprovedConfig::default(), &be).unwrap();
        assert_eq!(r.selected, cwc_select(&d).unwrap().selected);
    }

    #[test]
    fn sort_phase_touches_no_bitstring() {
        // same k, very different nm: sort cost must not move
        let be = InsecureSimBackend::new();
        let cost = |n, m, seed| {
            let d = synth::random_consistent(8, n, m, seed);
            let (da, db) = synth::random_split(&d, seed);
            let cfg = ImprovedConfig {
                b_max: Some(6),
                seed,
                fault: Fault::None,
            };
            run_improved(&da, &db, &cfg, &be)
                .unwrap()
                .steps
                .get("sort.compare")
        };
        let small = cost(2, 3, 1);
        assert_eq!(small.mux, 0);
        assert_eq!(small, cost(6, 7, 2));
    }

    #[test]
    fn inconsistent_union_aborts() {
        let be = InsecureSimBackend::new();
        let da = Dataset::with_rows(2, vec![Row::from_bits(&[1, 0], 1)]).unwrap();
        let db = Dataset::with_rows(2, vec![Row::from_bits(&[1, 0], 0)]).unwrap();
        let (outcome, transcript) = execute(&da, &db, &ImprovedConfig::default(), &be).unwrap();
        assert!(matches!(outcome, Err(ProtocolError::InconsistentUnion)));
        let last = transcript.records.last().unwrap();
        assert_eq!((last.sender, last.step.as_str()), (Role::B, "abort"));
    }

    #[test]
    fn parameter_disagreement_aborts() {
        let be = InsecureSimBackend::new();
        let (da, db) = split(&table2(), 4);
        let params = public_params(&da, &db, None).unwrap();
        let mut a = PartyA::new(da, params, &be, 1, Fault::None).unwrap();
        let wrong_shape = PublicParams {
            n_b: params.n_b + 1,
            ..params
        };
        assert!(PartyB::new(db.clone(), wrong_shape, &be, a.ahe_public(), 2).is_err());
        let mut b = PartyB::new(db, params, &be, a.ahe_public(), 2).unwrap();
        let mut hello = a.start().unwrap();
        if let Body::Hello { params, .. } = &mut hello.body {
            params.b_max += 1;
        }
        assert!(matches!(
            b.receive(hello),
            Err(ProtocolError::ParamMismatch(_))
        ));
    }

    #[test]
    fn out_of_order_message_aborts() {
        let be = InsecureSimBackend::new();
        let (da, db) = split(&table2(), 4);
        let params = public_params(&da, &db, None).unwrap();
        let a = PartyA::new(da, params, &be, 1, Fault::None).unwrap();
        let mut b = PartyB::new(db, params, &be, a.ahe_public(), 2).unwrap();
        let err = b
            .receive(Message::plain(Body::Compare(vec![])))
            .unwrap_err();
        assert!(
            matches!(err, ProtocolError::UnexpectedStep { ref expected, ref got } if expected == "hello" && got == "sort.compare")
        );
        let mut b2 = PartyB::new(
            Dataset::with_rows(4, vec![]).unwrap(),
            PublicParams {
                n_b: 0,
                m_b: 0,
                ..params
            },
            &be,
            a.ahe_public(),
            2,
        )
        .unwrap();
        let v = Message::plain(Body::Hello {
            version: 9,
            params: PublicParams {
                n_b: 0,
                m_b: 0,
                ..params
            },
        });
        assert!(matches!(
            b2.receive(v),
            Err(ProtocolError::VersionMismatch { got: 9, .. })
        ));
    }

    #[test]
    fn non_bit_reveal_aborts() {
        let be = InsecureSimBackend::new();
        let d = synth::random_consistent(4, 2, 2, 3);
        let (da, db) = split(&d, 2);
        let params = public_params(&da, &db, None).unwrap();
        let mut a = PartyA::new(da, params, &be, 1, Fault::None).unwrap();
        let mut b = PartyB::new(db, params, &be, a.ahe_public(), 2).unwrap();
        let rows = b.receive(a.start().unwrap()).unwrap().unwrap();
        let masked = a.receive(rows).unwrap().unwrap();
        let permuted = b.receive(masked).unwrap().unwrap();
        let compare = a.receive(permuted).unwrap().unwrap();
        let Body::Compare(bits) = compare.body else {
            panic!("expected a compare round")
        };
        let mut reveal = vec![0u8; bits.len()];
        reveal[0] = 2;
        let err = a.receive(Message::plain(Body::Reveal(reveal))).unwrap_err();
        assert!(matches!(
            err,
            ProtocolError::NonBit {
                position: 0,
                value: 2
            }
        ));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let d = synth::random_consistent(6, 4, 4, 21);
        let (da, db) = synth::random_split(&d, 21);
        let cfg = ImprovedConfig {
            seed: 7,
            ..Default::default()
        };
        let r1 = run_improved(&da, &db, &cfg, &InsecureSimBackend::new()).unwrap();
        let r2 = run_improved(&da, &db, &cfg, &InsecureSimBackend::new()).unwrap();
        assert_eq!(r1.transcript.to_jsonl(), r2.transcript.to_jsonl());
        assert_eq!(r1.selected, r2.selected);
        assert_eq!(r1.masks, r2.masks);
        assert_eq!(r1.b_view, r2.b_view);
    }
}
