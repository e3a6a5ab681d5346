//! Per-environment tables recomputed from trial rows.

use serde::{Deserialize, Serialize};

use super::{HarnessError, Placement, TrialResult, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSummary {
    pub placement: Placement,
    pub trials: usize,
    pub baseline_detection: f64,
    pub proposed_detection: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub environment: String,
    /// Completed anomaly-free trials behind the score means.
    pub clean_trials: usize,
    pub baseline_score: f64,
    pub proposed_score: f64,
    /// Completed anomaly trials behind the detection rates.
    pub anomaly_trials: usize,
    pub baseline_detection: f64,
    pub proposed_detection: f64,
    pub placements: Vec<PlacementSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub environments: Vec<EnvironmentSummary>,
    pub failed_trials: usize,
    pub trials: Vec<TrialResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn rate(flags: impl Iterator<Item = bool>) -> f64 {
    mean(flags.map(|b| if b { 1.0 } else { 0.0 }))
}

/// Score means come from anomaly-free rows; detection rates from rows with
/// an anomaly placement. Failed trials are excluded from every mean.
pub fn aggregate(trials: &[TrialResult]) -> Result<ExperimentReport, HarnessError> {
    if trials.is_empty() {
        return Err(HarnessError::Empty);
    }
    let mut envs: Vec<&str> = Vec::new();
    for t in trials {
        if !envs.contains(&t.environment.as_str()) {
            envs.push(&t.environment);
        }
    }
    let ok = |t: &&TrialResult| !t.failed();
    let environments = envs
        .into_iter()
        .map(|env| {
            let rows: Vec<&TrialResult> = trials.iter().filter(|t| t.environment == env).filter(ok).collect();
            let clean: Vec<&TrialResult> = rows.iter().copied().filter(|t| t.variant == Variant::Clean).collect();
            let anomaly: Vec<&TrialResult> = rows.iter().copied().filter(|t| t.variant != Variant::Clean).collect();
            let mut placements = Vec::new();
            for p in Placement::ALL {
                let sub: Vec<&TrialResult> = anomaly
                    .iter()
                    .copied()
                    .filter(|t| t.variant.placement() == Some(p))
                    .collect();
                if sub.is_empty() {
                    continue;
                }
                placements.push(PlacementSummary {
                    placement: p,
                    trials: sub.len(),
                    baseline_detection: rate(sub.iter().map(|t| t.baseline_detected)),
                    proposed_detection: rate(sub.iter().map(|t| t.proposed_detected)),
                });
            }
            EnvironmentSummary {
                environment: env.to_string(),
                clean_trials: clean.len(),
                baseline_score: mean(clean.iter().map(|t| t.baseline_score)),
                proposed_score: mean(clean.iter().map(|t| t.proposed_score)),
                anomaly_trials: anomaly.len(),
                baseline_detection: rate(anomaly.iter().map(|t| t.baseline_detected)),
                proposed_detection: rate(anomaly.iter().map(|t| t.proposed_detected)),
                placements,
            }
        })
        .collect();
    Ok(ExperimentReport {
        environments,
        failed_trials: trials.iter().filter(|t| t.failed()).count(),
        trials: trials.to_vec(),
    })
}

pub(crate) fn trials_csv(trials: &[TrialResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in trials {
        w.serialize(t).expect("trial rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}
