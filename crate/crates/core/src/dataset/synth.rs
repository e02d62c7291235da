//! Seeded synthetic datasets for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Row};

/// Rows with uniformly random features and classes. May contain contradictions.
pub fn random_rows(k: usize, rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..rows)
        .map(|_| Row::new((0..k).map(|_| rng.gen()).collect(), rng.gen()))
        .collect();
    Dataset::with_rows(k, rows).expect("k > 0")
}

/// A contradiction-free dataset with exactly `n` positives and `m` negatives.
///
/// The class is a random non-constant boolean function of at most four
/// randomly chosen features, so equal feature vectors always share a class.
pub fn random_consistent(k: usize, n: usize, m: usize, seed: u64) -> Dataset {
    assert!(k > 0, "k must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut support: Vec<usize> = (0..k).collect();
    support.shuffle(&mut rng);
    support.truncate(rng.gen_range(1..=k.min(4)));
    let mut table: Vec<bool> = (0..1usize << support.len()).map(|_| rng.gen()).collect();
    if table.iter().all(|&b| b == table[0]) {
        let i = rng.gen_range(0..table.len());
        table[i] = !table[i];
    }

    let (mut pos, mut neg) = (Vec::with_capacity(n), Vec::with_capacity(m));
    while pos.len() < n || neg.len() < m {
        let features: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
        let key = support.iter().enumerate().fold(0usize, |acc, (bit, &f)| {
            acc | ((features[f] as usize) << bit)
        });
        let class = table[key];
        let bucket = if class { &mut pos } else { &mut neg };
        if bucket.len() < if class { n } else { m } {
            bucket.push(Row::new(features, class));
        }
    }

    // interleave so class groups are not contiguous in row order
    let mut rows: Vec<Row> = pos.into_iter().chain(neg).collect();
    rows.shuffle(&mut rng);
    Dataset::with_rows(k, rows).expect("k > 0")
}

/// Randomly assigns each row to one of two parties, preserving row order.
pub fn random_split(d: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for row in d.rows() {
        if rng.gen() {
            a.push(row.clone());
        } else {
            b.push(row.clone());
        }
    }
    let names = d.feature_names().to_vec();
    (
        Dataset::new(names.clone(), a).expect("same width"),
        Dataset::new(names, b).expect("same width"),
    )
}
