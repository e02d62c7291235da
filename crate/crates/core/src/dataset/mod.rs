//! Binary-labelled datasets: CSV ingestion, normalization, dummy padding and
//! per-feature relevance statistics.
//!
//! Rows with class 1 are *positives* and rows with class 0 are *negatives*.
//! Both groups keep file order, which fixes the pair indexing used by the
//! inconsistency bitstrings. Dummy rows belong to a class group like any other
//! row but never constrain consistency.

pub mod synth;

use std::collections::HashMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Row {
    pub features: Vec<bool>,
    pub class: bool,
    /// Padding row. Ignored by every consistency check.
    pub dummy: bool,
}

impl Row {
    pub fn new(features: Vec<bool>, class: bool) -> Self {
        Self {
            features,
            class,
            dummy: false,
        }
    }

    /// Builds a row from 0/1 integers; any non-zero value counts as 1.
    pub fn from_bits(features: &[u8], class: u8) -> Self {
        Self::new(features.iter().map(|&b| b != 0).collect(), class != 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::Schema("dataset needs at least one feature".into()));
        }
        let k = feature_names.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.features.len() != k) {
            return Err(Error::ShapeMismatch(format!(
                "row {} has {} features, expected {k}",
                i + 1,
                row.features.len()
            )));
        }
        Ok(Self {
            feature_names,
            rows,
        })
    }

    /// Dataset with generated feature names `F1..Fk`.
    pub fn with_rows(k: usize, rows: Vec<Row>) -> Result<Self> {
        Self::new(default_feature_names(k), rows)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of class-1 rows, dummies included.
    pub fn positive_count(&self) -> usize {
        self.rows.iter().filter(|r| r.class).count()
    }

    /// Number of class-0 rows, dummies included.
    pub fn negative_count(&self) -> usize {
        self.rows.iter().filter(|r| !r.class).count()
    }

    pub fn positives(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.class)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.class)
    }

    pub fn dummy_count(&self) -> usize {
        self.rows.iter().filter(|r| r.dummy).count()
    }

    /// Rows of `self` followed by the rows of `other`.
    pub fn union(&self, other: &Dataset) -> Result<Dataset> {
        if self.feature_count() != other.feature_count() {
            return Err(Error::WidthMismatch {
                left: self.feature_count(),
                right: other.feature_count(),
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            rows,
        })
    }

    /// Same rows with every class bit flipped.
    pub fn with_flipped_classes(&self) -> Dataset {
        let rows = self
            .rows
            .iter()
            .map(|r| Row {
                class: !r.class,
                ..r.clone()
            })
            .collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            rows,
        }
    }
}

pub fn default_feature_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("F{i}")).collect()
}

/// Column mapping for CSV input. Every column not named here is a feature.
#[derive(Clone, Debug)]
pub struct Schema {
    pub class_col: String,
    pub dummy_col: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            class_col: "C".into(),
            dummy_col: None,
        }
    }
}

fn parse_bit(value: &str, row: usize, column: &str) -> Result<bool> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Reads a comma-separated table with a header row.
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let class_idx = headers
        .iter()
        .position(|h| *h == schema.class_col)
        .ok_or_else(|| Error::Schema(format!("missing class column `{}`", schema.class_col)))?;
    let dummy_idx = match &schema.dummy_col {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing dummy column `{name}`")))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != class_idx && Some(i) != dummy_idx)
        .collect();
    let feature_names = feature_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let cell = |i: usize| parse_bit(&record[i], row_no, &headers[i]);
        let features = feature_cols
            .iter()
            .map(|&i| cell(i))
            .collect::<Result<_>>()?;
        let class = cell(class_idx)?;
        let dummy = match dummy_idx {
            Some(i) => cell(i)?,
            None => false,
        };
        rows.push(Row {
            features,
            class,
            dummy,
        });
    }
    Dataset::new(feature_names, rows)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSummary {
    /// Rows dropped because their feature vector also occurs with the other class.
    pub removed_contradictions: usize,
    /// Rows dropped as repeats of an earlier row with the same class.
    pub removed_duplicates: usize,
}

/// Drops every contradicting group and all but the first of each duplicate
/// group. Dummy rows pass through untouched.
pub fn normalize(d: &Dataset) -> (Dataset, ChangeSummary) {
    #[derive(Default)]
    struct Group {
        first: usize,
        size: usize,
        has_pos: bool,
        has_neg: bool,
    }

    let mut groups: HashMap<&[bool], Group> = HashMap::new();
    for (i, row) in d.rows.iter().enumerate().filter(|(_, r)| !r.dummy) {
        let g = groups.entry(&row.features).or_insert_with(|| Group {
            first: i,
            ..Group::default()
        });
        g.size += 1;
        g.has_pos |= row.class;
        g.has_neg |= !row.class;
    }

    let mut summary = ChangeSummary::default();
    for g in groups.values() {
        if g.has_pos && g.has_neg {
            summary.removed_contradictions += g.size;
        } else {
            summary.removed_duplicates += g.size - 1;
        }
    }

    let rows = d
        .rows
        .iter()
        .enumerate()
        .filter(|(i, r)| {
            if r.dummy {
                return true;
            }
            let g = &groups[r.features.as_slice()];
            !(g.has_pos && g.has_neg) && g.first == *i
        })
        .map(|(_, r)| r.clone())
        .collect();
    (
        Dataset {
            feature_names: d.feature_names.clone(),
            rows,
        },
        summary,
    )
}

/// Appends dummy rows with seeded random features until the dataset has
/// `target_n` positives and `target_m` negatives.
pub fn pad_with_dummies(
    d: &Dataset,
    target_n: usize,
    target_m: usize,
    rng_seed: u64,
) -> Result<Dataset> {
    let (n, m) = (d.positive_count(), d.negative_count());
    if target_n < n || target_m < m {
        return Err(Error::Argument(format!(
            "padding targets ({target_n}, {target_m}) below current counts ({n}, {m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let k = d.feature_count();
    let mut rows = d.rows.clone();
    let extra =
        std::iter::repeat_n(true, target_n - n).chain(std::iter::repeat_n(false, target_m - m));
    for class in extra {
        rows.push(Row {
            features: (0..k).map(|_| rng.gen()).collect(),
            class,
            dummy: true,
        });
    }
    Ok(Dataset {
        feature_names: d.feature_names.clone(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub value: f64,
}

/// Mutual information `I(F_i, C)` in bits for each feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub mi: Vec<FeatureScore>,
}

impl RelevanceReport {
    pub fn values(&self) -> Vec<f64> {
        self.mi.iter().map(|s| s.value).collect()
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Plug-in estimate of `I(F_i, C) = H(C) - H(C | F_i)` over non-dummy rows.
pub fn mutual_information(d: &Dataset) -> Result<RelevanceReport> {
    let rows: Vec<&Row> = d.rows.iter().filter(|r| !r.dummy).collect();
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let total = rows.len() as f64;
    let positives = rows.iter().filter(|r| r.class).count() as f64;
    let h_class = -(plogp(positives / total) + plogp(1.0 - positives / total));

    let mi = d
        .feature_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            // joint[f][c]
            let mut joint = [[0usize; 2]; 2];
            for r in &rows {
                joint[r.features[i] as usize][r.class as usize] += 1;
            }
            let h_cond: f64 = joint
                .iter()
                .map(|counts| {
                    let nf = (counts[0] + counts[1]) as f64;
                    if nf == 0.0 {
                        return 0.0;
                    }
                    let h = -(plogp(counts[0] as f64 / nf) + plogp(counts[1] as f64 / nf));
                    nf / total * h
                })
                .sum();
            FeatureScore {
                feature: name.clone(),
                value: (h_class - h_cond).max(0.0),
            }
        })
        .collect();
    Ok(RelevanceReport { mi })
}
