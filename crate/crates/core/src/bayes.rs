//! Laplace-approximated marginal likelihoods, the beta-binomial model prior,
//! and highest-posterior model search within a candidate set.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::aft::{fit_problem, AftProblem};
use crate::data::{AftParams, ModelSpec, SurvivalDataset};
use crate::error::{Error, Result};
use crate::newton::{self, NewtonError, NewtonOptions, Objective};
use crate::normal::HALF_LN_2PI;
use crate::priors::PriorConfig;

/// `log B(n_k + 1, p_s − n_k + 1)`: the model prior with the inclusion
/// probability integrated out under a uniform prior.
pub fn log_model_prior(n_k: usize, p_s: usize) -> Result<f64> {
    if p_s == 0 {
        return Err(Error::invalid("p_s must be positive"));
    }
    if n_k > p_s {
        return Err(Error::invalid(format!("n_k = {n_k} exceeds p_s = {p_s}")));
    }
    let a = n_k as f64 + 1.0;
    let b = (p_s - n_k) as f64 + 1.0;
    Ok(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

/// Laplace approximation to the marginal likelihood of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceApprox {
    pub log_marginal: f64,
    /// Posterior mode.
    pub mode: AftParams,
    /// Log-likelihood plus log-prior at the mode.
    pub log_joint_at_mode: f64,
    /// `log det(−H)` at the mode.
    pub log_det: f64,
}

/// Posterior score of one model within a candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: ModelSpec,
    pub log_marginal: f64,
    pub log_prior: f64,
    pub log_posterior_unnorm: f64,
    pub map_params: AftParams,
}

/// Orders scores best first: higher posterior, then fewer variables, then
/// lexicographically smaller index sequence.
pub fn rank_scores(a: &ModelScore, b: &ModelScore) -> Ordering {
    b.log_posterior_unnorm
        .total_cmp(&a.log_posterior_unnorm)
        .then_with(|| a.model.len().cmp(&b.model.len()))
        .then_with(|| a.model.indices().cmp(b.model.indices()))
}

struct Posterior<'a> {
    lik: AftProblem<'a>,
    prior: &'a PriorConfig,
}

impl Objective for Posterior<'_> {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let k = self.lik.k();
        let beta = theta.as_slice();
        let lp = if k == 0 {
            0.0
        } else {
            self.prior.log_density_unchecked(&beta[1..=k])
        };
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        self.lik.loglik(theta) + lp
    }

    fn derivs(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.lik.k();
        let (mut f, mut g, mut h) = self.lik.derivs(theta);
        if k > 0 {
            let beta = &theta.as_slice()[1..=k];
            f += self.prior.log_density_unchecked(beta);
            for (j, dj) in self.prior.grad_unchecked(beta).enumerate() {
                g[j + 1] += dj;
                h[(j + 1, j + 1)] += self.prior.hess_1d(beta[j]);
            }
        }
        (f, g, h)
    }
}

/// Laplace approximation to `∫ L(μ, β, σ) π(β) dμ dβ d log σ` with flat priors
/// on `μ` and `log σ`, using [`NewtonOptions::default`].
pub fn log_marginal_laplace(
    data: &SurvivalDataset,
    model: &ModelSpec,
    config: &PriorConfig,
) -> Result<LaplaceApprox> {
    laplace_with(data, model, config, &NewtonOptions::default())
}

pub fn laplace_with(
    data: &SurvivalDataset,
    model: &ModelSpec,
    config: &PriorConfig,
    opts: &NewtonOptions,
) -> Result<LaplaceApprox> {
    model.validate(data)?;
    config.validate()?;
    let lik = AftProblem::new(data, model, None);
    let k = model.len();

    let mut start = match fit_problem(&lik, None, opts) {
        Ok(fit) => fit.params.to_theta(),
        Err(Error::Convergence { .. }) | Err(Error::Numerical(_)) => lik.least_squares_start()?,
        Err(e) => return Err(e),
    };
    if start.iter().take(k + 1).skip(1).any(|&b| b == 0.0) {
        let (_, g, _) = lik.derivs(&start);
        let nudge = 0.01 * (config.phi * config.tau).sqrt();
        for j in 1..=k {
            if start[j] == 0.0 {
                start[j] = if g[j] < 0.0 { -nudge } else { nudge };
            }
        }
    }

    let posterior = Posterior { lik, prior: config };
    let opt = newton::maximize(&posterior, start, opts).map_err(|e| match e {
        NewtonError::BadStart => {
            Error::Numerical("posterior not finite at the starting point".into())
        }
        NewtonError::Stalled {
            theta,
            grad_norm,
            iterations,
        } => Error::Convergence {
            iterations,
            grad_norm,
            last: Box::new(AftParams::from_theta(&theta)),
        },
    })?;

    let dim = k + 2;
    let neg = -&opt.hessian;
    let chol = neg.cholesky().ok_or_else(|| {
        Error::Numerical("negative Hessian is not positive definite at the mode".into())
    })?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_marginal = opt.value + dim as f64 * HALF_LN_2PI - 0.5 * log_det;
    if !log_marginal.is_finite() {
        return Err(Error::Numerical("log marginal is not finite".into()));
    }
    Ok(LaplaceApprox {
        log_marginal,
        mode: AftParams::from_theta(&opt.theta),
        log_joint_at_mode: opt.value,
        log_det,
    })
}

/// Laplace marginal plus model prior for a model drawn from `p_s` candidates.
pub fn score_model(
    data: &SurvivalDataset,
    model: &ModelSpec,
    config: &PriorConfig,
    p_s: usize,
) -> Result<ModelScore> {
    let run = || -> Result<ModelScore> {
        let lap = log_marginal_laplace(data, model, config)?;
        let log_prior = log_model_prior(model.len(), p_s)?;
        Ok(ModelScore {
            model: model.clone(),
            log_marginal: lap.log_marginal,
            log_prior,
            log_posterior_unnorm: lap.log_marginal + log_prior,
            map_params: lap.mode,
        })
    };
    run().map_err(|e| e.in_model(model.indices()))
}

/// Scores models in parallel; the first failure in input order wins.
fn score_all(
    data: &SurvivalDataset,
    models: Vec<ModelSpec>,
    config: &PriorConfig,
    p_s: usize,
) -> Result<Vec<ModelScore>> {
    models
        .par_iter()
        .map(|m| score_model(data, m, config, p_s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn subset(candidates: &[usize], mask: u64) -> ModelSpec {
    let idx = candidates
        .iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &j)| j)
        .collect();
    ModelSpec::from_unsorted(idx)
}

/// Highest-posterior model among the subsets of `candidates`.
///
/// Enumerates all `2^{p_s}` subsets when `p_s <= search_cap`; otherwise runs a
/// greedy add/drop search from the empty model. Returns the winner and every
/// model scored on the way (the empty model is always among them).
pub fn select_best_model(
    data: &SurvivalDataset,
    candidates: &ModelSpec,
    config: &PriorConfig,
    search_cap: usize,
) -> Result<(ModelScore, Vec<ModelScore>)> {
    let p_s = candidates.len();
    if p_s == 0 {
        return Err(Error::invalid("candidate set is empty"));
    }
    if search_cap == 0 {
        return Err(Error::invalid("search_cap must be positive"));
    }
    candidates.validate_indices(data)?;
    config.validate()?;

    let scored = if p_s <= search_cap && p_s < 63 {
        let models = (0..1u64 << p_s)
            .map(|mask| subset(candidates.indices(), mask))
            .collect();
        score_all(data, models, config, p_s)?
    } else {
        greedy_search(data, candidates, config)?
    };
    let best = scored
        .iter()
        .min_by(|a, b| rank_scores(a, b))
        .cloned()
        .expect("at least the empty model is scored");
    Ok((best, scored))
}

fn greedy_search(
    data: &SurvivalDataset,
    candidates: &ModelSpec,
    config: &PriorConfig,
) -> Result<Vec<ModelScore>> {
    let p_s = candidates.len();
    let mut cache: BTreeMap<ModelSpec, ModelScore> = BTreeMap::new();
    let empty = score_model(data, &ModelSpec::empty(), config, p_s)?;
    let mut current = empty.clone();
    cache.insert(ModelSpec::empty(), empty);

    loop {
        let neighbours: Vec<ModelSpec> = candidates
            .indices()
            .iter()
            .map(|&j| {
                let mut idx = current.model.indices().to_vec();
                match idx.binary_search(&j) {
                    Ok(pos) => {
                        idx.remove(pos);
                    }
                    Err(pos) => idx.insert(pos, j),
                }
                ModelSpec::from_unsorted(idx)
            })
            .filter(|m| m.len() + 2 <= data.n())
            .collect();
        let fresh: Vec<ModelSpec> = neighbours
            .iter()
            .filter(|m| !cache.contains_key(*m))
            .cloned()
            .collect();
        for s in score_all(data, fresh, config, p_s)? {
            cache.insert(s.model.clone(), s);
        }
        let best_move = neighbours
            .iter()
            .map(|m| &cache[m])
            .min_by(|a, b| rank_scores(a, b))
            .cloned();
        match best_move {
            Some(next) if next.log_posterior_unnorm > current.log_posterior_unnorm => {
                current = next;
            }
            _ => break,
        }
    }
    Ok(cache.into_values().collect())
}

impl ModelSpec {
    fn validate_indices(&self, data: &SurvivalDataset) -> Result<()> {
        match self.indices().iter().find(|&&j| j >= data.p()) {
            Some(j) => Err(Error::invalid(format!(
                "covariate index {j} out of range (p = {})",
                data.p()
            ))),
            None => Ok(()),
        }
    }
}
