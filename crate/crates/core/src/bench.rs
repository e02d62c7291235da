//! Gate-count benchmark over a grid of `(k, nm)` cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{default_b_max, run_baseline};
use crate::circuit::{CostModel, GateStats, InsecureSimBackend, StepLog};
use crate::dataset::synth::{random_consistent, random_split};
use crate::error::{Error, Result};
use crate::protocol::{run_improved, ImprovedConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub grid: Vec<(usize, usize)>,
    /// `None` means `ceil(log2(nm + 1))` per cell.
    pub b_max: Option<usize>,
    pub cost_model: CostModel,
    pub seed: u64,
    /// Cells with `k * nm` above this are skipped.
    pub budget: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let grid = [10, 50, 100]
            .into_iter()
            .flat_map(|k| [100, 500, 1000].into_iter().map(move |nm| (k, nm)))
            .collect();
        Self {
            grid,
            b_max: None,
            cost_model: CostModel::default(),
            seed: 0,
            budget: 100_000,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(&(k, nm)) = self.grid.iter().find(|(k, nm)| *k == 0 || *nm == 0) {
            return Err(Error::Argument(format!(
                "grid cell ({k}, {nm}) must be positive"
            )));
        }
        if self.b_max == Some(0) {
            return Err(Error::Argument("b_max must be at least 1".into()));
        }
        self.cost_model.validate()?;
        Ok(())
    }
}

/// Splits `nm` into `n * m` with `n` the largest divisor not above `sqrt(nm)`.
pub fn shape_for(nm: usize) -> (usize, usize) {
    let n = (1..=nm)
        .take_while(|d| d * d <= nm)
        .filter(|d| nm.is_multiple_of(*d))
        .last()
        .unwrap_or(1);
    (n, nm / n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSteps {
    pub step1: GateStats,
    pub step2: GateStats,
    pub step3: GateStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovedSteps {
    pub preprocess: GateStats,
    pub mix: GateStats,
    pub sort: GateStats,
    pub select: GateStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub k: usize,
    pub nm: usize,
    pub n: usize,
    pub m: usize,
    pub b_max: usize,
    pub comparators: usize,
    pub comparators_minimal: usize,
    pub baseline: BaselineSteps,
    pub improved: ImprovedSteps,
    pub baseline_total: GateStats,
    pub improved_total: GateStats,
    /// Cost-model estimate of steps 1, 2, 3.
    pub baseline_seconds: [f64; 3],
    pub improved_seconds: f64,
    pub selected: Vec<usize>,
    pub improved_selected: Vec<usize>,
    pub transcript_bytes: usize,
    pub baseline_steps: StepLog,
    pub improved_steps: StepLog,
}

impl CellReport {
    pub fn improved_ratio(&self) -> f64 {
        self.improved_total.total() as f64 / self.baseline_total.total().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub k: usize,
    pub nm: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub cost_model: CostModel,
    pub cells: Vec<CellReport>,
    pub skipped: Vec<SkippedCell>,
}

fn cell_seed(seed: u64, k: usize, nm: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((k as u64) << 32 | nm as u64)
}

pub fn run_cell(
    k: usize,
    nm: usize,
    b_max: Option<usize>,
    model: &CostModel,
    seed: u64,
) -> Result<CellReport> {
    let (n, m) = shape_for(nm);
    let seed = cell_seed(seed, k, nm);
    let d = random_consistent(k, n, m, seed);
    let b_max = b_max.unwrap_or_else(|| default_b_max(nm));

    let be = InsecureSimBackend::new();
    let base = run_baseline(&d, Some(b_max), seed, &be)?;
    let s = &base.steps;
    let baseline = BaselineSteps {
        step1: s.prefixed("step1"),
        step2: s.prefixed("step2"),
        step3: s.prefixed("step3"),
    };

    let (da, db) = random_split(&d, seed);
    let be = InsecureSimBackend::new();
    let cfg = ImprovedConfig {
        b_max: Some(b_max),
        seed,
        ..Default::default()
    };
    let imp = run_improved(&da, &db, &cfg, &be)?;
    let t = &imp.steps;
    let improved = ImprovedSteps {
        preprocess: t.prefixed("pre"),
        mix: t.prefixed("mix"),
        sort: t.prefixed("sort"),
        select: t.prefixed("select") + t.prefixed("output"),
    };

    Ok(CellReport {
        k,
        nm,
        n,
        m,
        b_max,
        comparators: base.comparators,
        comparators_minimal: base.comparators_minimal,
        baseline,
        improved,
        baseline_total: s.total(),
        improved_total: t.total(),
        baseline_seconds: [baseline.step1, baseline.step2, baseline.step3]
            .map(|g| model.estimate(&g)),
        improved_seconds: model.estimate(&t.total()),
        selected: base.selected,
        improved_selected: imp.selected,
        transcript_bytes: imp.transcript.total_bytes(),
        baseline_steps: base.steps,
        improved_steps: imp.steps,
    })
}

/// Runs every in-budget cell (concurrently); report order follows the grid.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let (run, skip): (Vec<_>, Vec<_>) = cfg
        .grid
        .iter()
        .partition(|(k, nm)| (k * nm) as u64 <= cfg.budget);
    let cells = run
        .par_iter()
        .map(|&&(k, nm)| run_cell(k, nm, cfg.b_max, &cfg.cost_model, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let skipped = skip
        .into_iter()
        .map(|&(k, nm)| SkippedCell {
            k,
            nm,
            reason: format!("k*nm = {} exceeds budget {}", k * nm, cfg.budget),
        })
        .collect();
    Ok(BenchReport {
        seed: cfg.seed,
        cost_model: cfg.cost_model,
        cells,
        skipped,
    })
}

/// Aligned plain-text table: baseline steps, then the improved pipeline.
pub fn render_table(report: &BenchReport) -> String {
    let header = [
        "k",
        "nm",
        "b_max",
        "swaps",
        "step1",
        "step2",
        "step3",
        "baseline",
        "est.base",
        "impr.mix",
        "impr.sort",
        "improved",
        "est.impr",
        "ratio",
        "|S|",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for c in &report.cells {
        let est: f64 = c.baseline_seconds.iter().sum();
        rows.push(vec![
            c.k.to_string(),
            c.nm.to_string(),
            c.b_max.to_string(),
            c.comparators.to_string(),
            c.baseline.step1.total().to_string(),
            c.baseline.step2.total().to_string(),
            c.baseline.step3.total().to_string(),
            c.baseline_total.total().to_string(),
            format!("{est:.3e}"),
            c.improved.mix.total().to_string(),
            c.improved.sort.total().to_string(),
            c.improved_total.total().to_string(),
            format!("{:.3e}", c.improved_seconds),
            format!("{:.3}", c.improved_ratio()),
            c.selected.len().to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for s in &report.skipped {
        out.push_str(&format!("skipped (k={}, nm={}): {}\n", s.k, s.nm, s.reason));
    }
    out
}
