//! Plaintext CWC ("combination of weakest components").
//!
//! For every feature `F_i` we build a bitstring over all (positive, negative)
//! pairs: bit `m*(p-1) + q` (1-based) is set when `F_i` separates positive `p`
//! from negative `q`, or when either row is a dummy. A feature set is
//! consistent iff the OR of its bitstrings is all ones. CWC sorts features by
//! their popcount and greedily drops every feature whose removal keeps the
//! current set consistent.
//!
//! Feature indices are 1-based throughout the public API.

pub mod oracle;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Row};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitString {
    bits: Vec<bool>,
    count: usize,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        let count = bits.iter().filter(|&&b| b).count();
        Self { bits, count }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self::new(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// `pi[j]` is the original (1-based) index of the feature at sorted position `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortPermutation {
    pub pi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected original indices, ascending.
    pub selected: Vec<usize>,
    pub pi: Vec<usize>,
    pub counts: Vec<usize>,
    /// Kept flag per sorted position (`R` in the secure pipelines).
    #[serde(skip)]
    pub kept: Vec<bool>,
}

fn pair_bit(pos: &Row, neg: &Row, i: usize) -> bool {
    (pos.features[i] != neg.features[i]) || pos.dummy || neg.dummy
}

fn check_index(d: &Dataset, i: usize) -> Result<()> {
    if i == 0 || i > d.feature_count() {
        return Err(Error::Argument(format!(
            "feature index {i} outside 1..={}",
            d.feature_count()
        )));
    }
    Ok(())
}

/// Inconsistency indicator of feature `i` (1-based) over all positive/negative pairs.
pub fn compute_bitstring(d: &Dataset, i: usize) -> Result<BitString> {
    check_index(d, i)?;
    let negatives: Vec<&Row> = d.negatives().collect();
    let bits = d
        .positives()
        .flat_map(|p| negatives.iter().map(move |q| pair_bit(p, q, i - 1)))
        .collect();
    Ok(BitString::new(bits))
}

/// Bitstrings for all features, computed in parallel.
pub fn compute_bitstrings(d: &Dataset) -> Vec<BitString> {
    (1..=d.feature_count())
        .into_par_iter()
        .map(|i| compute_bitstring(d, i).expect("index in range"))
        .collect()
}

pub fn consistency_count(b: &BitString) -> usize {
    b.count()
}

/// Stable ascending sort of features by count; ties keep index order.
pub fn sort_features(counts: &[usize]) -> SortPermutation {
    let mut pi: Vec<usize> = (1..=counts.len()).collect();
    pi.sort_by_key(|&i| counts[i - 1]);
    SortPermutation { pi }
}

fn union_of<'a>(
    bitstrings: &'a [BitString],
    subset: impl IntoIterator<Item = &'a usize>,
) -> Vec<bool> {
    let len = bitstrings.first().map_or(0, BitString::len);
    let mut acc = vec![false; len];
    for &i in subset {
        for (a, &b) in acc.iter_mut().zip(bitstrings[i - 1].bits()) {
            *a |= b;
        }
    }
    acc
}

/// True iff the OR of the subset's bitstrings (1-based indices) is all ones.
pub fn is_consistent(bitstrings: &[BitString], subset: &[usize]) -> bool {
    if bitstrings.is_empty() {
        return true;
    }
    union_of(bitstrings, subset).into_iter().all(|b| b)
}

fn witness(bitstrings: &[BitString], all: &[usize], m: usize) -> Option<(usize, usize)> {
    union_of(bitstrings, all)
        .iter()
        .position(|&b| !b)
        .map(|pos| (pos / m + 1, pos % m + 1))
}

/// CWC over precomputed bitstrings. `m` is the negative count and only used
/// to name a witness pair when the full set is inconsistent.
pub fn cwc_select_bitstrings(bitstrings: &[BitString], m: usize) -> Result<SelectionResult> {
    let k = bitstrings.len();
    let all: Vec<usize> = (1..=k).collect();
    if let Some((p, q)) = witness(bitstrings, &all, m) {
        return Err(Error::Inconsistent { p, q });
    }
    let counts: Vec<usize> = bitstrings.iter().map(BitString::count).collect();
    let SortPermutation { pi } = sort_features(&counts);

    let mut current = vec![true; k];
    let mut kept = Vec::with_capacity(k);
    for &f in &pi {
        current[f - 1] = false;
        let rest: Vec<usize> = (1..=k).filter(|&i| current[i - 1]).collect();
        let removable = is_consistent(bitstrings, &rest);
        if !removable {
            current[f - 1] = true;
        }
        kept.push(!removable);
    }
    Ok(SelectionResult {
        selected: (1..=k).filter(|&i| current[i - 1]).collect(),
        pi,
        counts,
        kept,
    })
}

/// A (positive, negative) pair, 1-based within each class, that no feature
/// separates. `None` when the full feature set is consistent.
pub fn inconsistency_witness(d: &Dataset) -> Option<(usize, usize)> {
    let all: Vec<usize> = (1..=d.feature_count()).collect();
    witness(&compute_bitstrings(d), &all, d.negative_count())
}

/// Runs CWC on a contradiction-free dataset.
pub fn cwc_select(d: &Dataset) -> Result<SelectionResult> {
    cwc_select_bitstrings(&compute_bitstrings(d), d.negative_count())
}

/// Consistent, and every drop-one subset is inconsistent.
pub fn verify_minimal(d: &Dataset, s: &[usize]) -> bool {
    let bitstrings = compute_bitstrings(d);
    if !is_consistent(&bitstrings, s) {
        return false;
    }
    s.iter().all(|f| {
        let rest: Vec<usize> = s.iter().copied().filter(|g| g != f).collect();
        !is_consistent(&bitstrings, &rest)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::pad_with_dummies;
    use crate::fixtures::table2;

    #[test]
    fn table2_bitstrings() {
        let d = table2();
        let expected: [[u8; 10]; 4] = [
            [1, 1, 0, 1, 1, 1, 1, 0, 1, 1],
            [1, 0, 0, 1, 0, 0, 1, 1, 0, 1],
            [0, 1, 1, 0, 1, 0, 1, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1, 0, 1, 1],
        ];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(
                compute_bitstring(&d, i + 1).unwrap(),
                BitString::from_bits(e)
            );
        }
        assert_eq!(consistency_count(&compute_bitstring(&d, 1).unwrap()), 8);
        assert_eq!(consistency_count(&compute_bitstring(&d, 2).unwrap()), 5);
        assert!(matches!(compute_bitstring(&d, 5), Err(Error::Argument(_))));
        assert!(matches!(compute_bitstring(&d, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn dummy_pairs_are_ones() {
        let d = pad_with_dummies(&table2(), 3, 5, 11).unwrap();
        for i in 1..=4 {
            let b = compute_bitstring(&d, i).unwrap();
            assert_eq!(b.len(), 15);
            // positive 3 is the dummy: positions 10..15
            assert!(b.bits()[10..].iter().all(|&x| x));
        }
    }

    #[test]
    fn sorting() {
        assert_eq!(sort_features(&[8, 5, 6, 5]).pi, vec![2, 4, 3, 1]);
        assert_eq!(sort_features(&[3, 3, 3]).pi, vec![1, 2, 3]);
        assert_eq!(sort_features(&[9, 4, 1]).pi, vec![3, 2, 1]);
        assert_eq!(consistency_count(&BitString::from_bits(&[0; 6])), 0);
    }

    #[test]
    fn consistency_checks() {
        let d = table2();
        let b = compute_bitstrings(&d);
        assert!(is_consistent(&b, &[1, 3]));
        assert!(!is_consistent(&b, &[]));
        assert!(is_consistent(&b, &[1, 2, 3, 4]));
    }

    #[test]
    fn table2_selection() {
        let r = cwc_select(&table2()).unwrap();
        assert_eq!(r.selected, vec![1, 3]);
        assert_eq!(r.pi, vec![2, 4, 3, 1]);
        assert_eq!(r.counts, vec![8, 5, 6, 5]);
        assert_eq!(r.kept, vec![false, false, true, true]);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"selected": [1, 3], "pi": [2, 4, 3, 1], "counts": [8, 5, 6, 5]})
        );
    }

    #[test]
    fn minimality() {
        let d = table2();
        assert!(verify_minimal(&d, &[1, 3]));
        assert!(!verify_minimal(&d, &[1, 2, 3]));
        assert!(!verify_minimal(&d, &[]));
    }

    #[test]
    fn inconsistent_input_names_witness() {
        let d = Dataset::with_rows(
            2,
            vec![
                Row::from_bits(&[0, 0], 0),
                Row::from_bits(&[1, 1], 1),
                Row::from_bits(&[1, 1], 0),
            ],
        )
        .unwrap();
        match cwc_select(&d) {
            Err(Error::Inconsistent { p, q }) => assert_eq!((p, q), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_class_selects_nothing() {
        let d = Dataset::with_rows(2, vec![Row::from_bits(&[0, 1], 1)]).unwrap();
        let r = cwc_select(&d).unwrap();
        assert!(r.selected.is_empty());
        assert!(verify_minimal(&d, &r.selected));
    }
}
