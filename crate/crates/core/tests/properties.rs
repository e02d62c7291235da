use proptest::prelude::*;

use secure_cwc::baseline::{
    batcher_schedule, default_b_max, enc_bitstrings, enc_counts, encrypt_dataset, run_baseline,
};
use secure_cwc::circuit::{
    add, equals, less_than, oblivious_swap, saturating_popcount, sub, BitBackend, BitDecrypt,
    EncInt, InsecureSimBackend,
};
use secure_cwc::cwc::oracle::consistent_by_rows;
use secure_cwc::cwc::{compute_bitstrings, consistency_count, cwc_select, verify_minimal};
use secure_cwc::dataset::{mutual_information, normalize, pad_with_dummies, Dataset, Row};
use secure_cwc::protocol::{mix_network, AhePublic, AheSecret, SimAhe};

fn rows(max_k: usize, max_rows: usize) -> impl Strategy<Value = Dataset> {
    (1..=max_k).prop_flat_map(move |k| {
        prop::collection::vec(
            (prop::collection::vec(any::<bool>(), k), any::<bool>()),
            0..=max_rows,
        )
        .prop_map(move |rs| {
            Dataset::with_rows(k, rs.into_iter().map(|(f, c)| Row::new(f, c)).collect()).unwrap()
        })
    })
}

fn mask(width: usize) -> u128 {
    (1u128 << width) - 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent(d in rows(6, 20)) {
        let (once, _) = normalize(&d);
        let (twice, changes) = normalize(&once);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(changes.removed_contradictions + changes.removed_duplicates, 0);
        let live: Vec<&Row> = once.rows().iter().filter(|r| !r.dummy).collect();
        for (i, a) in live.iter().enumerate() {
            for b in &live[i + 1..] {
                prop_assert!(a.features != b.features);
            }
        }
    }

    #[test]
    fn mutual_information_ignores_class_labelling(d in rows(6, 20)) {
        prop_assume!(!d.is_empty());
        let a = mutual_information(&d).unwrap().values();
        let b = mutual_information(&d.with_flipped_classes()).unwrap().values();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(x));
        }
    }

    #[test]
    fn padding_leaves_real_rows_alone(d in rows(5, 10), extra_n in 0usize..4, extra_m in 0usize..4, seed: u64) {
        let (d, _) = normalize(&d);
        let (n, m) = (d.positive_count(), d.negative_count());
        let p = pad_with_dummies(&d, n + extra_n, m + extra_m, seed).unwrap();
        prop_assert_eq!(&p.rows()[..d.len()], d.rows());
        prop_assert_eq!((p.positive_count(), p.negative_count()), (n + extra_n, m + extra_m));
        prop_assert_eq!(p.dummy_count(), extra_n + extra_m);
        let (padded, real) = (cwc_select(&p).unwrap().selected, cwc_select(&d).unwrap().selected);
        if n * m > 0 || p.positive_count() * p.negative_count() == 0 {
            prop_assert_eq!(padded, real);
        } else {
            // no real pairs: dummy pairs are covered by any single feature, never by none
            prop_assert!(real.is_empty());
            prop_assert_eq!(padded.len(), 1);
        }
    }

    #[test]
    fn cwc_output_is_minimal_and_consistent(d in rows(8, 16)) {
        let (d, _) = normalize(&d);
        let s = cwc_select(&d).unwrap().selected;
        prop_assert!(consistent_by_rows(&d, &s));
        prop_assert!(verify_minimal(&d, &s));
    }

    #[test]
    fn counts_survive_row_permutation(d in rows(6, 14), seed: u64) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = d.rows().to_vec();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let e = Dataset::with_rows(d.feature_count(), shuffled).unwrap();
        let a: Vec<usize> = compute_bitstrings(&d).iter().map(consistency_count).collect();
        let b: Vec<usize> = compute_bitstrings(&e).iter().map(consistency_count).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn batcher_sorts_anything(keys in prop::collection::vec(0u32..50, 1..40)) {
        let k = keys.len();
        let mut expected = keys.clone();
        expected.sort_unstable();
        let sched = batcher_schedule(k);
        let mut padded: Vec<u32> = keys.iter().copied().chain(std::iter::repeat(u32::MAX)).take(sched.width()).collect();
        sched.apply(&mut padded);
        prop_assert_eq!(&padded[..k], &expected[..]);
        let mut plain = keys.clone();
        sched.restricted().apply(&mut plain);
        prop_assert_eq!(plain, expected);
    }

    #[test]
    fn integer_circuits_match_plaintext(width in 1usize..16, x: u128, y: u128) {
        let (x, y) = (x & mask(width), y & mask(width));
        let be = InsecureSimBackend::new();
        let (ex, ey) = (EncInt::encrypt(&be, x, width), EncInt::encrypt(&be, y, width));
        prop_assert_eq!(add(&be, &ex, &ey).unwrap().decrypt(&be), (x + y) & mask(width));
        prop_assert_eq!(sub(&be, &ex, &ey).unwrap().decrypt(&be), x.wrapping_sub(y) & mask(width));
        prop_assert_eq!(be.decrypt_bit(&equals(&be, &ex, &ey).unwrap()), x == y);
        // comparison needs a clear top bit
        let (wx, wy) = (ex.extended(&be, width + 1), ey.extended(&be, width + 1));
        prop_assert_eq!(be.decrypt_bit(&less_than(&be, &wx, &wy).unwrap()), x < y);
    }

    #[test]
    fn circuit_cost_is_data_independent(width in 1usize..12, a: (u128, u128), b: (u128, u128)) {
        let cost = |(x, y): (u128, u128)| {
            let be = InsecureSimBackend::new();
            let (ex, ey) = (EncInt::encrypt(&be, x & mask(width), width), EncInt::encrypt(&be, y & mask(width), width));
            add(&be, &ex, &ey).unwrap();
            less_than(&be, &ex, &ey).unwrap();
            equals(&be, &ex, &ey).unwrap();
            let c = less_than(&be, &ey, &ex).unwrap();
            oblivious_swap(&be, &c, ex.bits(), ey.bits()).unwrap();
            be.stats()
        };
        prop_assert_eq!(cost(a), cost(b));
    }

    #[test]
    fn popcount_saturates(bits in prop::collection::vec(any::<bool>(), 0..40), b_max in 1usize..8) {
        let be = InsecureSimBackend::new();
        let enc: Vec<_> = bits.iter().map(|&b| be.encrypt_bit(b)).collect();
        let ones = bits.iter().filter(|&&b| b).count() as u128;
        let got = saturating_popcount(&be, &enc, b_max).unwrap().decrypt(&be);
        prop_assert_eq!(got, ones.min(mask(b_max)));
    }

    #[test]
    fn swap_is_conditional(c: bool, a in prop::collection::vec(any::<bool>(), 0..8), seed: u64) {
        let b: Vec<bool> = a.iter().enumerate().map(|(i, &x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
        let be = InsecureSimBackend::new();
        let enc = |v: &[bool]| v.iter().map(|&x| be.encrypt_bit(x)).collect::<Vec<_>>();
        let (lo, hi) = oblivious_swap(&be, &be.encrypt_bit(c), &enc(&a), &enc(&b)).unwrap();
        let dec = |v: &[_]| v.iter().map(|x| be.decrypt_bit(x)).collect::<Vec<bool>>();
        let (want_lo, want_hi) = if c { (&b, &a) } else { (&a, &b) };
        prop_assert_eq!(&dec(&lo), want_lo);
        prop_assert_eq!(&dec(&hi), want_hi);
    }

    #[test]
    fn ahe_adds_modulo_width(width in 1u32..=128, a: u128, b: u128) {
        let sk = SimAhe::new();
        let pk = sk.public();
        let m = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
        let s = pk.add_cipher(&pk.encrypt(a, width), &pk.encrypt(b, width)).unwrap();
        prop_assert_eq!(sk.decrypt(&s).unwrap(), (a & m).wrapping_add(b & m) & m);
        prop_assert_eq!(sk.decrypt(&pk.rerandomize(&s).unwrap()).unwrap(), sk.decrypt(&s).unwrap());
    }

    #[test]
    fn mix_preserves_the_multiset(values in prop::collection::vec(0u128..1 << 20, 1..16), seed: u64) {
        use rand::SeedableRng;
        let (a, b) = (SimAhe::new(), SimAhe::new());
        let (apk, bpk) = (a.public(), b.public());
        let items: Vec<_> = values.iter().map(|&v| bpk.encrypt(v, 52)).collect();
        let mut ra = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rb = rand_chacha::ChaCha8Rng::seed_from_u64(!seed);
        let (out, pi) = mix_network(&items, &a, &apk, &b, &bpk, &mut ra, &mut rb).unwrap();
        let got: Vec<u128> = out.iter().map(|c| b.decrypt(c).unwrap()).collect();
        prop_assert_eq!(got, pi.iter().map(|&t| values[t]).collect::<Vec<_>>());
        prop_assert!(out.iter().zip(&items).all(|(o, i)| o != i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn baseline_matches_plaintext(d in rows(6, 10), seed: u64) {
        let (d, _) = normalize(&d);
        let be = InsecureSimBackend::new();
        let r = run_baseline(&d, None, seed, &be).unwrap();
        prop_assert_eq!(r.selected, cwc_select(&d).unwrap().selected);
    }

    #[test]
    fn default_width_never_saturates(d in rows(5, 12)) {
        let be = InsecureSimBackend::new();
        let b_max = default_b_max(d.positive_count() * d.negative_count());
        let payloads = enc_counts(&be, enc_bitstrings(&be, &encrypt_dataset(&be, &d)), b_max).unwrap();
        let plain = compute_bitstrings(&d);
        for (p, b) in payloads.iter().zip(&plain) {
            prop_assert_eq!(p.count.decrypt(&be) as usize, b.count());
        }
    }
}
