//! The iterative screen-and-select loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::aft::fit_aft_mle;
use crate::bayes::select_best_model;
use crate::data::{AftParams, ModelSpec, SurvivalDataset};
use crate::error::{Error, Result};
use crate::priors::PriorConfig;
use crate::screening::{
    build_leading_sets, conditional_utilities, marginal_utilities, pick_leading_variables,
    UtilityKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    /// Leading variables per iteration.
    pub k0: usize,
    pub corr_threshold: f64,
    /// Target number of selected variables.
    pub m: usize,
    /// Consecutive iterations without a selection before stopping.
    pub maxno: usize,
    /// Largest leading set searched exhaustively.
    pub search_cap: usize,
}

impl Default for TuningParams {
    fn default() -> Self {
        TuningParams {
            k0: 1,
            corr_threshold: 0.2,
            m: 50,
            maxno: 3,
            search_cap: 10,
        }
    }
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        if self.k0 == 0 {
            return Err(Error::invalid("k0 must be positive"));
        }
        if !(self.corr_threshold > 0.0 && self.corr_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "corr_threshold = {} not in (0, 1]",
                self.corr_threshold
            )));
        }
        if self.maxno == 0 {
            return Err(Error::invalid("maxno must be positive"));
        }
        if self.search_cap == 0 {
            return Err(Error::invalid("search_cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    ReachedM,
    MaxnoEmpty,
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedVariable {
    pub index: usize,
    /// Coefficient from the joint refit of the final selection.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredIndex {
    pub index: usize,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingSetRecord {
    pub leader: usize,
    pub members: Vec<usize>,
    pub winner: Vec<usize>,
    pub log_marginal: f64,
    pub log_prior: f64,
    pub log_posterior_unnorm: f64,
    /// Unnormalized log posterior of the empty model in the same set.
    pub empty_log_posterior_unnorm: f64,
    pub models_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub utility_kind: UtilityKind,
    pub pool_size: usize,
    pub leaders: Vec<ScoredIndex>,
    pub leading_sets: Vec<LeadingSetRecord>,
    pub selected: Vec<usize>,
    /// Every leading-set member removed from the pool this iteration.
    pub consumed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<SelectedVariable>,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Joint fit of the final selection, absent when nothing was selected.
    pub final_fit: Option<AftParams>,
}

impl SelectionResult {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.index).collect()
    }
}

fn has_variance(col: &[f64]) -> bool {
    col.iter().any(|&v| v != col[0])
}

/// Runs screen-and-select iterations until `m` variables are selected, `maxno`
/// consecutive iterations select nothing, or the candidate pool is empty.
///
/// Constant covariates never enter the pool.
pub fn run_selection(
    data: &SurvivalDataset,
    tuning: &TuningParams,
    prior: &PriorConfig,
) -> Result<SelectionResult> {
    tuning.validate()?;
    prior.validate()?;

    let mut pool: BTreeSet<usize> = (0..data.p()).filter(|&j| has_variance(data.column(j))).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut iterations = Vec::new();
    let mut empty_run = 0usize;

    let stop_reason = loop {
        if selected.len() >= tuning.m {
            break StopReason::ReachedM;
        }
        if empty_run >= tuning.maxno {
            break StopReason::MaxnoEmpty;
        }
        if pool.is_empty() {
            break StopReason::PoolExhausted;
        }
        let iteration = iterations.len() + 1;
        let record = run_iteration(data, tuning, prior, iteration, &pool, &selected).map_err(|e| {
            Error::Iteration {
                iteration,
                source: Box::new(e),
            }
        })?;
        for j in &record.consumed {
            pool.remove(j);
        }
        if record.selected.is_empty() {
            empty_run += 1;
        } else {
            empty_run = 0;
            selected.extend(&record.selected);
        }
        let shrank = !record.consumed.is_empty();
        iterations.push(record);
        if !shrank {
            // no leading set could be formed; nothing left to screen
            break StopReason::PoolExhausted;
        }
    };

    let (selected, final_fit) = if selected.is_empty() {
        (Vec::new(), None)
    } else {
        let model = ModelSpec::from_unsorted(selected.clone());
        let (fit, _) = fit_aft_mle(data, &model, None)?;
        let vars = selected
            .iter()
            .map(|&j| {
                let pos = model.indices().binary_search(&j).expect("selected index in model");
                SelectedVariable {
                    index: j,
                    coefficient: fit.beta[pos],
                }
            })
            .collect();
        (vars, Some(fit))
    };
    Ok(SelectionResult {
        selected,
        iterations,
        stop_reason,
        final_fit,
    })
}

fn run_iteration(
    data: &SurvivalDataset,
    tuning: &TuningParams,
    prior: &PriorConfig,
    iteration: usize,
    pool: &BTreeSet<usize>,
    selected: &[usize],
) -> Result<IterationRecord> {
    let table = if iteration == 1 {
        marginal_utilities(data, pool)?
    } else {
        let model = ModelSpec::from_unsorted(selected.to_vec());
        let fit = if model.is_empty() {
            AftParams::new(0.0, Vec::new(), 1.0)?
        } else {
            fit_aft_mle(data, &model, None)?.0
        };
        conditional_utilities(data, pool, &model, &fit)?
    };
    let leaders = pick_leading_variables(&table, tuning.k0);
    let sets = build_leading_sets(data, &leaders, pool, tuning.corr_threshold)?;

    let mut records = Vec::with_capacity(sets.len());
    let mut chosen = Vec::new();
    let mut consumed = Vec::new();
    for set in &sets {
        let (best, scored) = select_best_model(data, &set.members, prior, tuning.search_cap)?;
        let empty = scored
            .iter()
            .find(|s| s.model.is_empty())
            .map(|s| s.log_posterior_unnorm)
            .expect("the empty model is always scored");
        chosen.extend_from_slice(best.model.indices());
        consumed.extend_from_slice(set.members.indices());
        records.push(LeadingSetRecord {
            leader: set.leader,
            members: set.members.indices().to_vec(),
            winner: best.model.indices().to_vec(),
            log_marginal: best.log_marginal,
            log_prior: best.log_prior,
            log_posterior_unnorm: best.log_posterior_unnorm,
            empty_log_posterior_unnorm: empty,
            models_scored: scored.len(),
        });
    }
    consumed.sort_unstable();
    Ok(IterationRecord {
        iteration,
        utility_kind: table.kind,
        pool_size: pool.len(),
        leaders: leaders
            .iter()
            .map(|&j| ScoredIndex {
                index: j,
                utility: table.scores[&j],
            })
            .collect(),
        leading_sets: records,
        selected: chosen,
        consumed,
    })
}
