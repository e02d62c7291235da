//! Transcript checks for the two-party run.
//!
//! * every A-to-B message whose content B decrypts is flagged masked
//!   (the final output pairs are exempt);
//! * B only ever sends the expected message kinds, so nothing about its
//!   permutation reaches A;
//! * message count and sizes equal those of a run on canonical data of the
//!   same shape;
//! * no integer mask is reused.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::channel::{PublicParams, Role, Transcript};
use super::parties::{execute, ImprovedConfig, ImprovedReport, MaskRecord};
use crate::circuit::BitDecrypt;
use crate::dataset::{Dataset, Row};
use crate::error::{Error, Result};

const DECRYPTED_BY_B: [&str; 2] = ["mix.masked", "sort.compare"];
const FROM_A: [&str; 5] = [
    "hello",
    "mix.masked",
    "sort.compare",
    "output.pairs",
    "abort",
];
const FROM_B: [&str; 5] = [
    "pre.rows",
    "mix.permuted",
    "sort.reveal",
    "result.selected",
    "abort",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditRule {
    Unmasked,
    UnexpectedMessage,
    ShapeDependent,
    MaskReuse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: AuditRule,
    pub seq: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub messages: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn flagged(&self, rule: AuditRule) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }
}

/// Masking and message-kind rules.
pub fn audit_transcript(t: &Transcript) -> AuditReport {
    let mut violations = Vec::new();
    for r in &t.records {
        let allowed: &[&str] = match r.sender {
            Role::A => &FROM_A,
            Role::B => &FROM_B,
        };
        if !allowed.contains(&r.step.as_str()) {
            violations.push(Violation {
                rule: AuditRule::UnexpectedMessage,
                seq: Some(r.seq),
                detail: format!("party {} sent `{}`", r.sender, r.step),
            });
        }
        if r.sender == Role::A && DECRYPTED_BY_B.contains(&r.step.as_str()) && !r.masked {
            violations.push(Violation {
                rule: AuditRule::Unmasked,
                seq: Some(r.seq),
                detail: format!("`{}` reaches the key holder unmasked", r.step),
            });
        }
    }
    AuditReport {
        messages: t.records.len(),
        violations,
    }
}

/// Differences in `(sender, step, bytes)` against a reference transcript.
pub fn audit_shape(t: &Transcript, reference: &Transcript) -> Vec<Violation> {
    let (got, want) = (t.shape(), reference.shape());
    let mut out: Vec<Violation> = got
        .iter()
        .zip(&want)
        .enumerate()
        .filter(|(_, (g, w))| g != w)
        .map(|(seq, (g, w))| Violation {
            rule: AuditRule::ShapeDependent,
            seq: Some(seq),
            detail: format!("{g:?} where the reference has {w:?}"),
        })
        .collect();
    if got.len() != want.len() {
        out.push(Violation {
            rule: AuditRule::ShapeDependent,
            seq: None,
            detail: format!(
                "{} messages where the reference has {}",
                got.len(),
                want.len()
            ),
        });
    }
    out
}

/// Mask keys must be unique and wide masks (> 32 bits) pairwise distinct.
pub fn audit_masks(masks: &[MaskRecord]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut keys = HashSet::new();
    let mut values = HashSet::new();
    for m in masks {
        if !keys.insert((m.party, m.step.as_str(), m.item, m.field.as_str())) {
            out.push(Violation {
                rule: AuditRule::MaskReuse,
                seq: None,
                detail: format!(
                    "party {} drew two masks for {} item {} {}",
                    m.party, m.step, m.item, m.field
                ),
            });
        }
        if m.width > 32 && !values.insert(m.value) {
            out.push(Violation {
                rule: AuditRule::MaskReuse,
                seq: None,
                detail: format!(
                    "party {} reused mask value {} ({} item {} {})",
                    m.party, m.value, m.step, m.item, m.field
                ),
            });
        }
    }
    out
}

/// All-dummy data of the given shape: always consistent, carries no information.
pub fn canonical_inputs(p: &PublicParams) -> (Dataset, Dataset) {
    let make = |n, m| {
        let rows = (0..n)
            .map(|_| true)
            .chain((0..m).map(|_| false))
            .map(|class| Row {
                features: vec![false; p.k],
                class,
                dummy: true,
            })
            .collect();
        Dataset::with_rows(p.k, rows).expect("uniform rows")
    };
    (make(p.n_a, p.m_a), make(p.n_b, p.m_b))
}

/// Transcript of an honest run on canonical data with parameters `p`.
pub fn reference_transcript<B: BitDecrypt>(p: &PublicParams, be: &B) -> Result<Transcript> {
    let (da, db) = canonical_inputs(p);
    let cfg = ImprovedConfig {
        b_max: Some(p.b_max),
        ..Default::default()
    };
    let (outcome, transcript) = execute(&da, &db, &cfg, be)?;
    outcome.map_err(Error::from)?;
    Ok(transcript)
}

/// Every check, with the shape reference computed on `be`.
pub fn audit_run<B: BitDecrypt>(report: &ImprovedReport, be: &B) -> Result<AuditReport> {
    let mut audit = audit_transcript(&report.transcript);
    let reference = reference_transcript(&report.params, be)?;
    audit
        .violations
        .extend(audit_shape(&report.transcript, &reference));
    audit.violations.extend(audit_masks(&report.masks));
    Ok(audit)
}
