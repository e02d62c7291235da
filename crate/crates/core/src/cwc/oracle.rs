//! Brute-force oracle: consistency straight from the row definition and
//! exhaustive subset enumeration. Exponential in `k`; test use only.

use crate::dataset::Dataset;

/// Consistency by scanning every (positive, negative) pair of non-dummy rows:
/// some pair agreeing on every feature of `subset` makes it inconsistent.
pub fn consistent_by_rows(d: &Dataset, subset: &[usize]) -> bool {
    let live = |r: &&crate::dataset::Row| !r.dummy;
    d.positives().filter(live).all(|x| {
        d.negatives().filter(live).all(|y| {
            subset
                .iter()
                .any(|&f| x.features[f - 1] != y.features[f - 1])
        })
    })
}

fn subset_of(mask: u64, k: usize) -> Vec<usize> {
    (0..k)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i + 1)
        .collect()
}

/// Every consistent subset none of whose proper subsets is consistent.
pub fn minimal_consistent_subsets(d: &Dataset) -> Vec<Vec<usize>> {
    let k = d.feature_count();
    assert!(k <= 20, "subset enumeration is exponential in k");
    let consistent: Vec<bool> = (0..1u64 << k)
        .map(|mask| consistent_by_rows(d, &subset_of(mask, k)))
        .collect();
    (0..1u64 << k)
        .filter(|&mask| consistent[mask as usize])
        .filter(|&mask| {
            if mask == 0 {
                return true;
            }
            // walk the proper submasks
            let mut sub = (mask - 1) & mask;
            loop {
                if consistent[sub as usize] {
                    return false;
                }
                if sub == 0 {
                    return true;
                }
                sub = (sub - 1) & mask;
            }
        })
        .map(|mask| subset_of(mask, k))
        .collect()
}

/// True iff `s` is one of the minimal consistent subsets found by enumeration.
pub fn is_minimal_by_enumeration(d: &Dataset, s: &[usize]) -> bool {
    let mut s = s.to_vec();
    s.sort_unstable();
    minimal_consistent_subsets(d).contains(&s)
}
