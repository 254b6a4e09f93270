//! Marginal and conditional utilities, leading variables and leading sets.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aft::fit_aft;
use crate::data::{AftParams, ModelSpec, SurvivalDataset};
use crate::error::{Error, Result};
use crate::newton::NewtonOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Marginal,
    Conditional,
}

/// Screening scores for the current candidate pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub kind: UtilityKind,
    pub scores: BTreeMap<usize, f64>,
}

/// A leader together with every pool member correlated with it above threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadingSet {
    pub leader: usize,
    pub members: ModelSpec,
}

fn tag(j: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Covariate {
        index: j,
        source: Box::new(e),
    }
}

fn single(data: &SurvivalDataset, j: usize) -> Result<ModelSpec> {
    if j >= data.p() {
        return Err(Error::invalid(format!("covariate index {j} out of range")));
    }
    ModelSpec::new(vec![j])
}

/// Maximized log-likelihood of the one-covariate model `{j}`.
pub fn marginal_utility(data: &SurvivalDataset, j: usize) -> Result<f64> {
    let model = single(data, j)?;
    fit_aft(data, &model, None, None, &NewtonOptions::default())
        .map(|f| f.loglik)
        .map_err(tag(j))
}

/// Linear predictor `X_sel β_sel` of an already-fitted selection (no intercept).
pub fn selection_offset(
    data: &SurvivalDataset,
    selected: &ModelSpec,
    fit: &AftParams,
) -> Result<Vec<f64>> {
    selected.validate(data)?;
    if fit.beta.len() != selected.len() {
        return Err(Error::invalid(format!(
            "selected set has {} covariates but the fit has {} coefficients",
            selected.len(),
            fit.beta.len()
        )));
    }
    let mut offset = vec![0.0; data.n()];
    for (&j, &b) in selected.indices().iter().zip(&fit.beta) {
        for (o, x) in offset.iter_mut().zip(data.column(j)) {
            *o += b * x;
        }
    }
    Ok(offset)
}

fn conditional_with_offset(data: &SurvivalDataset, j: usize, offset: Option<&[f64]>) -> Result<f64> {
    let model = single(data, j)?;
    fit_aft(data, &model, offset, None, &NewtonOptions::default())
        .map(|f| f.loglik)
        .map_err(tag(j))
}

/// Maximized log-likelihood of `{j}` over `(μ, β_j, σ)` with the selected
/// covariates' fitted linear predictor held fixed as an offset.
pub fn conditional_utility(
    data: &SurvivalDataset,
    j: usize,
    selected: &ModelSpec,
    selected_fit: &AftParams,
) -> Result<f64> {
    if selected.contains(j) {
        return Err(Error::invalid(format!("covariate {j} is already selected")));
    }
    if selected.is_empty() {
        return conditional_with_offset(data, j, None);
    }
    let offset = selection_offset(data, selected, selected_fit)?;
    conditional_with_offset(data, j, Some(&offset))
}

fn utilities<F>(pool: &BTreeSet<usize>, kind: UtilityKind, score: F) -> Result<UtilityTable>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let indices: Vec<usize> = pool.iter().copied().collect();
    let results: Vec<Result<f64>> = indices.par_iter().map(|&j| score(j)).collect();
    let mut scores = BTreeMap::new();
    for (j, r) in indices.into_iter().zip(results) {
        scores.insert(j, r?);
    }
    Ok(UtilityTable { kind, scores })
}

/// Marginal utilities for every covariate in `pool`, computed in parallel.
pub fn marginal_utilities(data: &SurvivalDataset, pool: &BTreeSet<usize>) -> Result<UtilityTable> {
    utilities(pool, UtilityKind::Marginal, |j| marginal_utility(data, j))
}

/// Conditional utilities for every covariate in `pool`; the offset is formed once.
pub fn conditional_utilities(
    data: &SurvivalDataset,
    pool: &BTreeSet<usize>,
    selected: &ModelSpec,
    selected_fit: &AftParams,
) -> Result<UtilityTable> {
    if let Some(j) = pool.iter().find(|&&j| selected.contains(j)) {
        return Err(Error::invalid(format!("covariate {j} is already selected")));
    }
    let offset = if selected.is_empty() {
        None
    } else {
        Some(selection_offset(data, selected, selected_fit)?)
    };
    utilities(pool, UtilityKind::Conditional, |j| {
        conditional_with_offset(data, j, offset.as_deref())
    })
}

/// The `k0` highest-scoring indices, best first; ties go to the smaller index.
pub fn pick_leading_variables(table: &UtilityTable, k0: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = table.scores.iter().map(|(&j, &s)| (j, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k0).map(|(j, _)| j).collect()
}

/// Pearson correlation; zero when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Groups pool members around each leader by `|corr| >= corr_threshold`.
///
/// Leaders are processed in the given order; a member already placed in an
/// earlier set is not reused, and a leader already absorbed by an earlier set
/// does not open a set of its own.
pub fn build_leading_sets(
    data: &SurvivalDataset,
    leaders: &[usize],
    candidate_pool: &BTreeSet<usize>,
    corr_threshold: f64,
) -> Result<Vec<LeadingSet>> {
    if !(corr_threshold > 0.0 && corr_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "corr_threshold = {corr_threshold} not in (0, 1]"
        )));
    }
    if candidate_pool.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(l) = leaders.iter().find(|l| !candidate_pool.contains(l)) {
        return Err(Error::invalid(format!("leader {l} is not in the candidate pool")));
    }
    let mut remaining: Vec<usize> = candidate_pool.iter().copied().collect();
    let mut sets = Vec::new();
    for &leader in leaders {
        if remaining.binary_search(&leader).is_err() {
            continue;
        }
        let lead_col = data.column(leader);
        let members: Vec<usize> = remaining
            .par_iter()
            .copied()
            .filter(|&j| j == leader || pearson(lead_col, data.column(j)).abs() >= corr_threshold)
            .collect();
        remaining.retain(|j| members.binary_search(j).is_err());
        sets.push(LeadingSet {
            leader,
            members: ModelSpec::new(members)?,
        });
    }
    Ok(sets)
}
