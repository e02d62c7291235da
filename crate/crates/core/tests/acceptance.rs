//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines always appear in `cargo test` output.

#![allow(clippy::type_complexity)]
use std::time::{Duration, Instant};

use secure_cwc::baseline::{batcher_schedule, run_baseline};
use secure_cwc::bench::{run_bench, shape_for, BenchConfig};
use secure_cwc::circuit::{add, equals, less_than, negate, EncInt, InsecureSimBackend};
use secure_cwc::cwc::oracle::{consistent_by_rows, is_minimal_by_enumeration};
use secure_cwc::cwc::{compute_bitstrings, cwc_select};
use secure_cwc::dataset::synth::{random_consistent, random_rows, random_split};
use secure_cwc::dataset::{mutual_information, normalize, pad_with_dummies, Dataset};
use secure_cwc::fixtures::{table1, table2};
use secure_cwc::protocol::{
    audit_masks, audit_shape, audit_transcript, reference_transcript, run_improved, AuditRule,
    Fault, ImprovedConfig,
};

const MI_TOLERANCE: f64 = 0.001;
const STEP1_LINEARITY: f64 = 0.05;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table2_golden() -> Outcome {
    let d = table2();
    let expected: [[u8; 10]; 4] = [
        [1, 1, 0, 1, 1, 1, 1, 0, 1, 1],
        [1, 0, 0, 1, 0, 0, 1, 1, 0, 1],
        [0, 1, 1, 0, 1, 0, 1, 1, 0, 1],
        [0, 0, 1, 0, 0, 1, 1, 0, 1, 1],
    ];
    for (i, (b, want)) in compute_bitstrings(&d).iter().zip(&expected).enumerate() {
        let got: Vec<u8> = b.bits().iter().map(|&x| x as u8).collect();
        ensure(got == want, || format!("B_{} = {got:?}", i + 1))?;
    }
    let r = cwc_select(&d).map_err(|e| e.to_string())?;
    ensure(r.counts == [8, 5, 6, 5], || {
        format!("counts {:?}", r.counts)
    })?;
    ensure(r.pi == [2, 4, 3, 1], || format!("pi {:?}", r.pi))?;
    ensure(r.selected == [1, 3], || {
        format!("selected {:?}", r.selected)
    })?;
    Ok("B_1..B_4, counts (8,5,6,5), pi (2,4,3,1), selected {1,3}".into())
}

fn table1_mi() -> Outcome {
    let got = mutual_information(&table1())
        .map_err(|e| e.to_string())?
        .values();
    let want = [0.189, 0.189, 0.049, 0.0, 0.0];
    ensure(
        got.len() == 5
            && got
                .iter()
                .zip(want)
                .all(|(g, w)| (g - w).abs() <= MI_TOLERANCE),
        || format!("mi {got:?}"),
    )?;
    Ok(format!(
        "mi = {:?} within ±{MI_TOLERANCE}",
        got.iter()
            .map(|v| (v * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    ))
}

fn predictor_identity() -> Outcome {
    for (i, r) in table2().rows().iter().enumerate() {
        let predicted = !r.features[0] && r.features[2];
        ensure(predicted == r.class, || {
            format!("row {} breaks C = !F1 & F3", i + 1)
        })?;
    }
    Ok("C = !F1 & F3 on all 7 rows".into())
}

fn circuit_soundness() -> Outcome {
    let be = InsecureSimBackend::new();
    let mut checked = 0;
    for a in 0u128..16 {
        let ea = EncInt::encrypt(&be, a, 4);
        let neg = negate(&be, &ea).decrypt(&be);
        ensure(neg == (16 - a) % 16, || format!("-{a} = {neg}"))?;
        for b in 0u128..16 {
            let eb = EncInt::encrypt(&be, b, 4);
            let sum = add(&be, &ea, &eb).map_err(|e| e.to_string())?.decrypt(&be);
            ensure(sum == (a + b) % 16, || format!("{a} + {b} = {sum}"))?;
            let eq = be_bit(&be, &equals(&be, &ea, &eb).map_err(|e| e.to_string())?);
            ensure(eq == (a == b), || format!("{a} == {b} gave {eq}"))?;
            if a <= 7 && b <= 7 {
                let lt = be_bit(&be, &less_than(&be, &ea, &eb).map_err(|e| e.to_string())?);
                ensure(lt == (a < b), || format!("{a} < {b} gave {lt}"))?;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} operand pairs: add, negate, equals exhaustive; less_than on values <= 7"
    ))
}

fn be_bit(be: &InsecureSimBackend, b: &secure_cwc::circuit::SimBit) -> bool {
    use secure_cwc::circuit::BitDecrypt;
    be.decrypt_bit(b)
}

fn batcher_counts() -> Outcome {
    let got: Vec<usize> = [10, 50, 100]
        .iter()
        .map(|&k| batcher_schedule(k).len())
        .collect();
    ensure(got == [63, 543, 1471], || format!("counts {got:?}"))?;
    Ok("k=10 -> 63, k=50 -> 543, k=100 -> 1471 (network padded to 16, 64, 128 inputs)".into())
}

fn baseline_oracle() -> Outcome {
    let mut tested = 0;
    let mut seed = 0u64;
    while tested < 200 {
        seed += 1;
        let k = 1 + (seed % 8) as usize;
        let rows = 2 + (seed % 12) as usize;
        let (d, _) = normalize(&random_rows(k, rows, seed));
        let pairs = d.positive_count() * d.negative_count();
        if pairs > 48 {
            continue;
        }
        tested += 1;
        let plain = cwc_select(&d)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .selected;
        let be = InsecureSimBackend::new();
        let secure = run_baseline(&d, None, seed, &be)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .selected;
        ensure(secure == plain, || {
            format!("seed {seed}: baseline {secure:?} vs plaintext {plain:?}")
        })?;
        ensure(consistent_by_rows(&d, &plain), || {
            format!("seed {seed}: {plain:?} not consistent")
        })?;
        ensure(is_minimal_by_enumeration(&d, &plain), || {
            format!("seed {seed}: {plain:?} not minimal")
        })?;
    }
    Ok(format!(
        "{tested} normalized datasets (k <= 8, nm <= 48) agree with plaintext and brute force"
    ))
}

fn improved_oracle() -> Outcome {
    for seed in 0..50u64 {
        let k = 1 + (seed % 8) as usize;
        let (n, m) = (1 + (seed % 5) as usize, 1 + (seed / 5 % 6) as usize);
        let d = random_consistent(k, n, m, seed);
        let (da, db) = random_split(&d, seed);
        let union = da.union(&db).map_err(|e| e.to_string())?;
        let plain = cwc_select(&union).map_err(|e| e.to_string())?.selected;
        let be = InsecureSimBackend::new();
        let cfg = ImprovedConfig {
            seed,
            ..Default::default()
        };
        let got = run_improved(&da, &db, &cfg, &be)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .selected;
        ensure(got == plain, || {
            format!("seed {seed}: improved {got:?} vs plaintext {plain:?}")
        })?;
    }
    Ok("50 random two-party splits match plaintext CWC on the union".into())
}

fn obliviousness() -> Outcome {
    for (k, n, m) in [(4, 3, 4), (7, 5, 6), (12, 6, 8)] {
        let stats = |seed| {
            let d = random_consistent(k, n, m, seed);
            let be = InsecureSimBackend::new();
            run_baseline(&d, Some(5), seed, &be)
                .map(|r| (r.steps.get("step2.sort"), r.steps.total()))
        };
        let (a, b) = (
            stats(1).map_err(|e| e.to_string())?,
            stats(2).map_err(|e| e.to_string())?,
        );
        ensure(a == b, || format!("shape ({k},{n},{m}): {a:?} vs {b:?}"))?;
    }
    Ok("sort-step and total gate counts identical across same-shaped datasets".into())
}

fn scaling() -> Outcome {
    let report = run_bench(&BenchConfig::default()).map_err(|e| e.to_string())?;
    ensure(report.skipped.is_empty(), || "cells skipped".into())?;
    let cell = |k, nm| {
        report
            .cells
            .iter()
            .find(|c| c.k == k && c.nm == nm)
            .expect("cell")
    };

    for k in [10, 50, 100] {
        let (s, b) = (
            cell(k, 500).baseline.step1.total() as f64,
            cell(k, 1000).baseline.step1.total() as f64,
        );
        ensure((b / s - 2.0).abs() <= 2.0 * STEP1_LINEARITY, || {
            format!("k={k}: step1 {s} -> {b} under nm doubling")
        })?;
    }
    // nm = 100 -> 200 is not part of the default grid; run it directly
    for k in [10, 50, 100] {
        let r = |nm| {
            let (n, m) = shape_for(nm);
            let be = InsecureSimBackend::new();
            run_baseline(&random_consistent(k, n, m, 3), None, 3, &be)
                .map(|r| r.steps.prefixed("step1").total())
        };
        let (s, b) = (
            r(100).map_err(|e| e.to_string())? as f64,
            r(200).map_err(|e| e.to_string())? as f64,
        );
        ensure((b / s - 2.0).abs() <= 2.0 * STEP1_LINEARITY, || {
            format!("k={k}: step1 {s} -> {b}")
        })?;
    }

    for c in &report.cells {
        let (s1, s2, s3) = (
            c.baseline.step1.total(),
            c.baseline.step2.total(),
            c.baseline.step3.total(),
        );
        ensure(s2 > s1 && s2 > s3, || {
            format!("cell ({}, {}): steps {s1}/{s2}/{s3}", c.k, c.nm)
        })?;
        ensure(c.selected == c.improved_selected, || {
            format!("cell ({}, {}) pipelines disagree", c.k, c.nm)
        })?;

        // the improved sort is comparisons only: (6l + 1) gates per comparator,
        // l = index bits + count bits + 1; anything more would touch bitstrings
        let l = (usize::BITS - c.k.leading_zeros()) as u64 + c.b_max as u64 + 1;
        let sort = c.improved.sort;
        let expected = c.comparators_minimal as u64 * (6 * l + 1);
        ensure(sort.mux == 0 && sort.total() == expected, || {
            format!(
                "cell ({}, {}): improved sort {sort:?}, comparator-only cost {expected}",
                c.k, c.nm
            )
        })?;
    }

    let ratio = |k| {
        let d = random_consistent(k, 10, 10, 5);
        let (da, db) = random_split(&d, 5);
        let be = InsecureSimBackend::new();
        let base = run_baseline(&d, None, 5, &be).map(|r| r.steps.total().total())?;
        let be = InsecureSimBackend::new();
        let imp = run_improved(&da, &db, &ImprovedConfig::default(), &be)
            .map(|r| r.steps.total().total())?;
        Ok::<f64, secure_cwc::Error>(imp as f64 / base as f64)
    };
    let ratios: Vec<f64> = [8, 16, 32]
        .into_iter()
        .map(ratio)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(ratios.windows(2).all(|w| w[1] < w[0]), || {
        format!("improved/baseline ratios {ratios:?}")
    })?;

    Ok(format!(
        "step1 doubles within {:.0}%, step2 dominates in all {} cells, improved sort touches no bitstring, ratio over k=8,16,32: {:.3?}",
        STEP1_LINEARITY * 100.0,
        report.cells.len(),
        ratios
    ))
}

/// First `na` positives and `ma` negatives to A, the rest to B.
fn split_by_class(d: &Dataset, na: usize, ma: usize) -> (Dataset, Dataset) {
    let k = d.feature_count();
    let take = |skip_p: usize, np: usize, skip_n: usize, nn: usize| {
        let rows = d
            .positives()
            .skip(skip_p)
            .take(np)
            .chain(d.negatives().skip(skip_n).take(nn));
        Dataset::with_rows(k, rows.cloned().collect()).expect("rows")
    };
    (take(0, na, 0, ma), take(na, usize::MAX, ma, usize::MAX))
}

fn transcript_audit() -> Outcome {
    let (da, db) = split_by_class(&random_consistent(6, 4, 5, 11), 2, 3);
    let run = |da: &Dataset, db: &Dataset, fault, seed| {
        let be = InsecureSimBackend::new();
        let cfg = ImprovedConfig {
            seed,
            fault,
            ..Default::default()
        };
        run_improved(da, db, &cfg, &be).map_err(|e| e.to_string())
    };

    let honest = run(&da, &db, Fault::None, 1)?;
    let reference = reference_transcript(&honest.params, &InsecureSimBackend::new())
        .map_err(|e| e.to_string())?;
    let mut report = audit_transcript(&honest.transcript);
    report
        .violations
        .extend(audit_shape(&honest.transcript, &reference));
    report.violations.extend(audit_masks(&honest.masks));
    ensure(report.is_clean(), || {
        format!("honest run flagged: {:?}", report.violations)
    })?;

    let mix = run(&da, &db, Fault::UnmaskedMix, 1)?;
    let flagged: Vec<_> = audit_transcript(&mix.transcript)
        .flagged(AuditRule::Unmasked)
        .map(|v| v.seq)
        .collect();
    let mix_seq = mix
        .transcript
        .records
        .iter()
        .find(|r| r.step == "mix.masked")
        .map(|r| r.seq);
    ensure(flagged == [mix_seq], || {
        format!("unmasked mix flagged at {flagged:?}")
    })?;
    ensure(!audit_masks(&mix.masks).is_empty(), || {
        "zero masks not reported as reused".into()
    })?;

    let cmp = run(&da, &db, Fault::UnmaskedCompare, 1)?;
    let flagged = audit_transcript(&cmp.transcript)
        .flagged(AuditRule::Unmasked)
        .count();
    let rounds = cmp
        .transcript
        .records
        .iter()
        .filter(|r| r.step == "sort.compare")
        .count();
    ensure(rounds > 0 && flagged == rounds, || {
        format!("{flagged} of {rounds} compare rounds flagged")
    })?;

    let (oa, ob) = split_by_class(&random_consistent(6, 4, 5, 12), 2, 3);
    ensure(oa.rows() != da.rows(), || "datasets not distinct".into())?;
    let second = run(&oa, &ob, Fault::None, 2)?;
    ensure(
        second.transcript.shape() == honest.transcript.shape(),
        || "size sequences differ".into(),
    )?;

    Ok(format!(
        "honest run clean ({} messages); unmasked mix flagged at seq {:?}; {rounds} unmasked compare rounds flagged; sizes depend on shape only",
        honest.transcript.records.len(),
        mix_seq.unwrap_or_default()
    ))
}

fn padding_invariance() -> Outcome {
    for seed in 0..50u64 {
        let k = 1 + (seed % 7) as usize;
        let (n, m) = (1 + (seed % 4) as usize, 1 + (seed / 4 % 5) as usize);
        let d = random_consistent(k, n, m, seed);
        let padded = pad_with_dummies(
            &d,
            n + (seed % 3) as usize,
            m + 1 + (seed % 2) as usize,
            seed,
        )
        .map_err(|e| e.to_string())?;
        let plain = cwc_select(&d).map_err(|e| e.to_string())?.selected;
        let plain_padded = cwc_select(&padded).map_err(|e| e.to_string())?.selected;
        ensure(plain == plain_padded, || {
            format!("seed {seed}: {plain:?} vs padded {plain_padded:?}")
        })?;
        let be = InsecureSimBackend::new();
        let secure = run_baseline(&padded, None, seed, &be)
            .map_err(|e| e.to_string())?
            .selected;
        ensure(plain == secure, || {
            format!("seed {seed}: baseline on padded data gave {secure:?}")
        })?;
    }
    Ok("50 padded datasets: same selection in plaintext and baseline".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("table2-golden", Duration::from_secs(1), table2_golden),
        (
            "table1-mutual-information",
            Duration::from_secs(1),
            table1_mi,
        ),
        (
            "table2-predictor-identity",
            Duration::from_secs(1),
            predictor_identity,
        ),
        (
            "circuit-soundness",
            Duration::from_secs(10),
            circuit_soundness,
        ),
        (
            "batcher-comparator-counts",
            Duration::from_secs(1),
            batcher_counts,
        ),
        (
            "oracle-equivalence-baseline",
            Duration::from_secs(120),
            baseline_oracle,
        ),
        (
            "oracle-equivalence-improved",
            Duration::from_secs(120),
            improved_oracle,
        ),
        (
            "baseline-sort-obliviousness",
            Duration::from_secs(60),
            obliviousness,
        ),
        ("scaling-gate-proxies", Duration::from_secs(300), scaling),
        (
            "transcript-audit",
            Duration::from_secs(60),
            transcript_audit,
        ),
        (
            "padding-invariance",
            Duration::from_secs(60),
            padding_invariance,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= limit {
                Ok(msg)
            } else {
                Err(format!("took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS {name} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
