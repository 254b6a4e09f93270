//! TPR/FDR scoring and seeded multi-replication benchmark campaigns.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{run_selection, StopReason, TuningParams};
use crate::error::{Error, Result};
use crate::priors::PriorConfig;
use crate::simgen::{simulate, SimConfig};

/// True positive rate and false discovery rate of `selected` against `truth`.
/// FDR is 0 for an empty selection.
pub fn compute_tpr_fdr(selected: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    if truth.is_empty() {
        return Err(Error::invalid("truth set is empty"));
    }
    let selected: BTreeSet<usize> = selected.iter().copied().collect();
    let hits = selected.intersection(&truth).count();
    let false_pos = selected.len() - hits;
    let tpr = hits as f64 / truth.len() as f64;
    let fdr = false_pos as f64 / selected.len().max(1) as f64;
    Ok((tpr, fdr))
}

/// SplitMix64 finalizer applied to `(seed, replication)`.
pub fn child_seed(seed: u64, replication: usize) -> u64 {
    let mut z = seed.wrapping_add((replication as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_selected: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReplicationRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub prior: PriorConfig,
    pub replications: usize,
    pub failures: usize,
    /// Means over successful replications; `None` if every replication failed.
    pub tpr_mean: Option<f64>,
    pub fdr_mean: Option<f64>,
    pub n_selected_mean: Option<f64>,
    pub rows: Vec<ReplicationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub generator: SimConfig,
    pub tuning: TuningParams,
    pub truth: Vec<usize>,
    pub replications: usize,
    /// Dataset seed of each replication, derived from `generator.seed`.
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkReport {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// Label used for a prior's row in a report, e.g. `pemom(tau=0.01)`.
pub fn method_label(prior: &PriorConfig) -> String {
    format!("{}(tau={})", prior.family, prior.tau)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn summarize(prior: &PriorConfig, rows: Vec<ReplicationRow>) -> MethodSummary {
    let ok: Vec<&ReplicationRow> = rows.iter().filter(|r| r.succeeded()).collect();
    MethodSummary {
        label: method_label(prior),
        prior: *prior,
        replications: rows.len(),
        failures: rows.len() - ok.len(),
        tpr_mean: mean(ok.iter().filter_map(|r| r.tpr)),
        fdr_mean: mean(ok.iter().filter_map(|r| r.fdr)),
        n_selected_mean: mean(ok.iter().filter_map(|r| r.n_selected.map(|k| k as f64))),
        rows,
    }
}

fn failed_row(replication: usize, seed: u64, err: &Error) -> ReplicationRow {
    ReplicationRow {
        replication,
        seed,
        tpr: None,
        fdr: None,
        n_selected: None,
        selected: Vec::new(),
        stop_reason: None,
        iterations: None,
        error: Some(err.to_string()),
    }
}

/// One replication: simulate, standardize, run every prior on the same data.
fn replicate(
    sim: &SimConfig,
    tuning: &TuningParams,
    priors: &[PriorConfig],
    truth: &[usize],
    replication: usize,
    seed: u64,
) -> Vec<ReplicationRow> {
    let config = SimConfig {
        seed,
        ..sim.clone()
    };
    let data = match simulate(&config) {
        Ok(s) => s.dataset.standardized().0,
        Err(e) => return priors.iter().map(|_| failed_row(replication, seed, &e)).collect(),
    };
    priors
        .par_iter()
        .map(|prior| {
            let outcome = run_selection(&data, tuning, prior).and_then(|res| {
                let selected = res.selected_indices();
                let (tpr, fdr) = compute_tpr_fdr(&selected, truth)?;
                Ok(ReplicationRow {
                    replication,
                    seed,
                    tpr: Some(tpr),
                    fdr: Some(fdr),
                    n_selected: Some(selected.len()),
                    selected,
                    stop_reason: Some(res.stop_reason),
                    iterations: Some(res.iterations.len()),
                    error: None,
                })
            });
            outcome.unwrap_or_else(|e| failed_row(replication, seed, &e))
        })
        .collect()
}

/// Runs `replications` seeded datasets through every prior and aggregates
/// TPR, FDR and selection counts per prior.
pub fn run_benchmark(
    sim: &SimConfig,
    tuning: &TuningParams,
    priors: &[PriorConfig],
    replications: usize,
) -> Result<BenchmarkReport> {
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    if priors.is_empty() {
        return Err(Error::invalid("no priors given"));
    }
    sim.validate()?;
    tuning.validate()?;
    for p in priors {
        p.validate()?;
    }
    let truth = sim.support();
    if truth.is_empty() {
        return Err(Error::invalid("simulation has no non-zero true coefficients"));
    }
    let seeds: Vec<u64> = (0..replications).map(|r| child_seed(sim.seed, r)).collect();
    let per_rep: Vec<Vec<ReplicationRow>> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| replicate(sim, tuning, priors, &truth, r, seed))
        .collect();

    let methods = priors
        .iter()
        .enumerate()
        .map(|(k, prior)| {
            let rows = per_rep.iter().map(|rows| rows[k].clone()).collect();
            summarize(prior, rows)
        })
        .collect();
    Ok(BenchmarkReport {
        generator: sim.clone(),
        tuning: *tuning,
        truth,
        replications,
        seeds,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tpr_fdr_by_definition() {
        let truth: Vec<usize> = (1..=6).collect();
        assert_eq!(compute_tpr_fdr(&[1, 2, 3, 7], &truth).unwrap(), (0.5, 0.25));
        assert_eq!(compute_tpr_fdr(&[], &truth).unwrap(), (0.0, 0.0));
        assert_eq!(compute_tpr_fdr(&truth, &truth).unwrap(), (1.0, 0.0));
        assert!(compute_tpr_fdr(&[1], &[]).is_err());
    }

    #[test]
    fn child_seeds_differ() {
        let s: BTreeSet<u64> = (0..1000).map(|r| child_seed(42, r)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(child_seed(42, 3), child_seed(42, 3));
    }

    #[test]
    fn means_skip_failures() {
        let prior = PriorConfig::default();
        let ok = ReplicationRow {
            replication: 0,
            seed: 1,
            tpr: Some(0.5),
            fdr: Some(0.25),
            n_selected: Some(4),
            selected: vec![1, 2, 3, 7],
            stop_reason: Some(StopReason::ReachedM),
            iterations: Some(3),
            error: None,
        };
        let bad = failed_row(1, 2, &Error::invalid("boom"));
        let s = summarize(&prior, vec![ok, bad]);
        assert_eq!(s.failures, 1);
        assert_eq!(s.tpr_mean, Some(0.5));
        assert_eq!(s.n_selected_mean, Some(4.0));
        let all_bad = summarize(&prior, vec![failed_row(0, 1, &Error::invalid("x"))]);
        assert_eq!(all_bad.tpr_mean, None);
    }
}
