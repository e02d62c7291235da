use serde::{Deserialize, Serialize};

use super::backend::{BitBackend, CostModel, GateStats};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: String,
    pub gates: GateStats,
}

/// Gate counts per named pipeline step, in execution order.
///
/// Step names are dotted (`step2.sort`); [`StepLog::prefixed`] sums a group.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLog {
    steps: Vec<StepStats>,
}

impl StepLog {
    pub fn record(&mut self, step: impl Into<String>, gates: GateStats) {
        self.steps.push(StepStats {
            step: step.into(),
            gates,
        });
    }

    /// Runs `f` and records the gates the backend applied meanwhile.
    pub fn measure<B: BitBackend, R>(&mut self, be: &B, step: &str, f: impl FnOnce() -> R) -> R {
        let before = be.stats();
        let out = f();
        self.record(step, be.stats().since(&before));
        out
    }

    pub fn steps(&self) -> &[StepStats] {
        &self.steps
    }

    pub fn get(&self, step: &str) -> GateStats {
        self.steps
            .iter()
            .filter(|s| s.step == step)
            .map(|s| s.gates)
            .sum()
    }

    pub fn prefixed(&self, prefix: &str) -> GateStats {
        self.steps
            .iter()
            .filter(|s| s.step == prefix || s.step.starts_with(&format!("{prefix}.")))
            .map(|s| s.gates)
            .sum()
    }

    pub fn total(&self) -> GateStats {
        self.steps.iter().map(|s| s.gates).sum()
    }

    pub fn estimate(&self, model: &CostModel) -> Vec<(String, f64)> {
        self.steps
            .iter()
            .map(|s| (s.step.clone(), model.estimate(&s.gates)))
            .collect()
    }
}
