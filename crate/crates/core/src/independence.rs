//! Independence testing by thresholding a dependence statistic.
//!
//! For each grid cell `(scenario, d, n)` the runner draws `trials` dependent
//! datasets and `trials` datasets whose pairing has been shuffled, scores every
//! dataset with SMI and with classic kNN MI, and reports the AUC-ROC of each
//! statistic at separating the two groups.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::knn::{kl_mi, KnnConfig};
use crate::sampling::{SampleMatrix, SeededRng};
use crate::smi::{estimate_smi, SmiConfig};
use crate::synthetic::{generate, shuffle_pairing, Scenario, ScenarioKind};

/// Statistic values on dependent (positive) and independent (negative) datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocInput {
    pub positive_scores: Vec<f64>,
    pub negative_scores: Vec<f64>,
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties counting ½.
pub fn auc_roc(input: &RocInput) -> Result<f64> {
    let (pos, neg) = (&input.positive_scores, &input.negative_scores);
    if pos.is_empty() || neg.is_empty() {
        return Err(SmiError::EmptyInput("AUC needs at least one positive and one negative score".into()));
    }
    if pos.iter().chain(neg).any(|v| !v.is_finite()) {
        return Err(SmiError::Numerical("AUC scores must be finite".into()));
    }
    let mut sorted_neg = neg.clone();
    sorted_neg.sort_by(f64::total_cmp);
    // twice the Mann–Whitney count, kept integral
    let twice: u64 = pos
        .iter()
        .map(|&p| {
            let below = sorted_neg.partition_point(|&v| v < p) as u64;
            let not_above = sorted_neg.partition_point(|&v| v <= p) as u64;
            below + not_above
        })
        .sum();
    let pairs = (pos.len() * neg.len()) as f64;
    Ok(twice as f64 / 2.0 / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Smi,
    Mi,
}

impl Statistic {
    pub fn label(&self) -> &'static str {
        match self {
            Statistic::Smi => "SMI",
            Statistic::Mi => "MI",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Scenario label, `a`–`e` or its snake-case name.
    pub scenario: String,
    pub dims: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials_per_cell: usize,
    #[serde(default = "default_slices")]
    pub m: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    20
}
fn default_slices() -> usize {
    1000
}
fn default_k() -> usize {
    crate::knn::DEFAULT_K
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sample_sizes.is_empty() {
            return Err(SmiError::InvalidConfig("dims and sample_sizes must be non-empty".into()));
        }
        if self.dims.contains(&0) || self.sample_sizes.contains(&0) || self.trials_per_cell == 0 || self.m == 0 || self.k == 0 {
            return Err(SmiError::InvalidConfig("all plan values must be positive".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n <= self.k) {
            return Err(SmiError::InvalidConfig(format!("sample size {n} must exceed k = {}", self.k)));
        }
        for &d in &self.dims {
            ScenarioKind::from_label(&self.scenario, d)?;
        }
        Ok(())
    }
}

/// One output row: the AUC of one statistic in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub scenario: String,
    pub d: usize,
    pub n: usize,
    pub estimator: Statistic,
    /// NaN when the cell failed; see `error`.
    pub auc: f64,
    pub trials: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Classic MI baseline: kNN entropy decomposition in the full dimension.
pub fn classic_mi(x: &SampleMatrix, y: &SampleMatrix, knn: &KnnConfig) -> Result<f64> {
    kl_mi(x, y, knn)
}

struct TrialScores {
    smi: f64,
    mi: f64,
}

fn score(x: &SampleMatrix, y: &SampleMatrix, plan: &ExperimentPlan, seed: u64) -> Result<TrialScores> {
    let knn = KnnConfig { k: plan.k, jitter_seed: seed, ..KnnConfig::default() };
    let smi = estimate_smi(x, y, &SmiConfig { m: plan.m, knn, seed, ..SmiConfig::default() })?.value;
    let mi = classic_mi(x, y, &knn)?;
    Ok(TrialScores { smi, mi })
}

fn run_cell(plan: &ExperimentPlan, kind: ScenarioKind, n: usize, cell_rng: &SeededRng) -> Result<[f64; 2]> {
    use rand::RngCore;
    let trials: Vec<(TrialScores, TrialScores)> = (0..plan.trials_per_cell)
        .into_par_iter()
        .map(|t| {
            let mut rng = cell_rng.substream(t as u64);
            let pos_seed = rng.next_u64();
            let neg_seed = rng.next_u64();
            let (px, py) = generate(&Scenario { kind, n, seed: pos_seed })?;
            let (nx, ny) = generate(&Scenario { kind, n, seed: neg_seed })?;
            let (nx, ny) = shuffle_pairing(&nx, &ny, &mut rng)?;
            let pos = score(&px, &py, plan, rng.next_u64())?;
            let neg = score(&nx, &ny, plan, rng.next_u64())?;
            Ok((pos, neg))
        })
        .collect::<Result<_>>()?;
    let auc = |f: fn(&TrialScores) -> f64| {
        auc_roc(&RocInput {
            positive_scores: trials.iter().map(|(p, _)| f(p)).collect(),
            negative_scores: trials.iter().map(|(_, q)| f(q)).collect(),
        })
    };
    Ok([auc(|s| s.smi)?, auc(|s| s.mi)?])
}

/// Runs every `(d, n)` cell of the plan. Rows are ordered by grid index, SMI
/// before MI; a failing cell yields NaN rows carrying the error message.
pub fn run_independence_experiment(plan: &ExperimentPlan) -> Result<Vec<IndependenceRow>> {
    plan.validate()?;
    let root = SeededRng::new(plan.seed);
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &d in &plan.dims {
        let kind = ScenarioKind::from_label(&plan.scenario, d)?;
        for &n in &plan.sample_sizes {
            let outcome = run_cell(plan, kind, n, &root.substream(cell));
            cell += 1;
            let (aucs, error) = match outcome {
                Ok(a) => (a, None),
                Err(e) => ([f64::NAN; 2], Some(e.to_string())),
            };
            for (estimator, auc) in [Statistic::Smi, Statistic::Mi].into_iter().zip(aucs) {
                rows.push(IndependenceRow {
                    scenario: kind.name().to_string(),
                    d,
                    n,
                    estimator,
                    auc,
                    trials: plan.trials_per_cell,
                    m: plan.m,
                    k: plan.k,
                    seed: plan.seed,
                    error: error.clone(),
                });
            }
        }
    }
    Ok(rows)
}
