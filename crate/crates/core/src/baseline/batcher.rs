//! Batcher's odd-even mergesort network.
//!
//! The network is built for `k` rounded up to a power of two. Positions at or
//! beyond `k` hold `+inf` sentinels; since a comparator `(i, j)` with `i < j`
//! only ever moves the smaller key down, sentinels never leave the tail, and
//! [`ComparatorSchedule::restricted`] drops every comparator touching them.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorSchedule {
    inputs: usize,
    width: usize,
    /// Comparators in one layer touch disjoint positions.
    layers: Vec<Vec<(usize, usize)>>,
}

impl ComparatorSchedule {
    /// Number of real inputs.
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// Network width (power of two for a padded schedule).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> &[Vec<(usize, usize)>] {
        &self.layers
    }

    pub fn comparators(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layers.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same network without sentinel positions.
    pub fn restricted(&self) -> ComparatorSchedule {
        let k = self.inputs;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                l.iter()
                    .copied()
                    .filter(|&(_, j)| j < k)
                    .collect::<Vec<_>>()
            })
            .filter(|l| !l.is_empty())
            .collect();
        ComparatorSchedule {
            inputs: k,
            width: k,
            layers,
        }
    }

    /// Applies the network to plaintext keys.
    pub fn apply<T: PartialOrd>(&self, keys: &mut [T]) {
        assert!(keys.len() >= self.width.min(self.inputs));
        for (i, j) in self.comparators() {
            if keys[j] < keys[i] {
                keys.swap(i, j);
            }
        }
    }
}

/// Odd-even mergesort network for `k` inputs, padded to the next power of two.
pub fn batcher_schedule(k: usize) -> ComparatorSchedule {
    let n = k.max(1).next_power_of_two();
    let mut layers = Vec::new();
    let mut p = 1;
    while p < n {
        let mut step = p;
        while step >= 1 {
            let mut layer = Vec::new();
            let mut j = step % p;
            while j + step < n {
                for i in 0..step.min(n - j - step) {
                    if (i + j) / (2 * p) == (i + j + step) / (2 * p) {
                        layer.push((i + j, i + j + step));
                    }
                }
                j += 2 * step;
            }
            layers.push(layer);
            step /= 2;
        }
        p *= 2;
    }
    ComparatorSchedule {
        inputs: k,
        width: n,
        layers,
    }
}

/// Comparator count of the odd-even mergesort network on `2^t` inputs:
/// `(t^2 - t + 4) * 2^(t-2) - 1`.
pub fn closed_form_count(t: u32) -> usize {
    match t {
        0 => 0,
        1 => 1,
        _ => ((t * t - t + 4) as usize) * (1usize << (t - 2)) - 1,
    }
}
