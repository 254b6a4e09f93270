//! Censored log-normal AFT likelihood: value, analytic derivatives and MLE.
//!
//! Parameters are handled in the unconstrained coordinates
//! `θ = (μ, β_1, …, β_k, log σ)`. For residual `r_i = log y_i − μ − x_iᵀβ − o_i`
//! (with optional fixed offset `o_i`) and `z_i = r_i / σ`, subject `i` contributes
//! `−log σ − ½ log 2π − z_i²/2` when the event is observed and `log(1 − Φ(z_i))`
//! when censored.

use nalgebra::{DMatrix, DVector};

use crate::data::{AftParams, ModelSpec, SurvivalDataset};
use crate::error::{Error, Result};
use crate::newton::{self, NewtonError, NewtonOptions, Objective};
use crate::normal::{inv_mills, log_sf, HALF_LN_2PI};

/// Likelihood of one model: a set of design columns plus an optional offset.
pub(crate) struct AftProblem<'a> {
    log_y: &'a [f64],
    events: &'a [bool],
    cols: Vec<&'a [f64]>,
    offset: Option<&'a [f64]>,
}

impl<'a> AftProblem<'a> {
    pub fn new(data: &'a SurvivalDataset, model: &ModelSpec, offset: Option<&'a [f64]>) -> Self {
        AftProblem {
            log_y: data.log_times(),
            events: data.events(),
            cols: model.indices().iter().map(|&j| data.column(j)).collect(),
            offset,
        }
    }

    pub fn k(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    fn residual(&self, i: usize, theta: &DVector<f64>) -> f64 {
        let mut eta = theta[0];
        for (j, col) in self.cols.iter().enumerate() {
            eta += theta[j + 1] * col[i];
        }
        if let Some(off) = self.offset {
            eta += off[i];
        }
        self.log_y[i] - eta
    }

    pub fn loglik(&self, theta: &DVector<f64>) -> f64 {
        let k = self.k();
        let log_sigma = theta[k + 1];
        let inv_sigma = (-log_sigma).exp();
        let mut total = 0.0;
        for i in 0..self.log_y.len() {
            let z = self.residual(i, theta) * inv_sigma;
            total += if self.events[i] {
                -log_sigma - HALF_LN_2PI - 0.5 * z * z
            } else {
                log_sf(z)
            };
        }
        total
    }

    /// Value, gradient and Hessian with respect to `θ`.
    pub fn derivs(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.k();
        let dim = k + 2;
        let s = k + 1;
        let log_sigma = theta[s];
        let inv_sigma = (-log_sigma).exp();
        let inv_sigma2 = inv_sigma * inv_sigma;

        let mut value = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let mut row = vec![0.0; k + 1];
        row[0] = 1.0;

        for i in 0..self.log_y.len() {
            let z = self.residual(i, theta) * inv_sigma;
            // d/dη, d/ds, d²/dη², d²/dη ds, d²/ds² of the i-th term (s = log σ)
            let (l, a, b, c, d, e) = if self.events[i] {
                (
                    -log_sigma - HALF_LN_2PI - 0.5 * z * z,
                    z * inv_sigma,
                    z * z - 1.0,
                    -inv_sigma2,
                    -2.0 * z * inv_sigma,
                    -2.0 * z * z,
                )
            } else {
                let lam = inv_mills(z);
                let dlam = lam * (lam - z);
                let q = dlam * z + lam;
                (
                    log_sf(z),
                    lam * inv_sigma,
                    lam * z,
                    -dlam * inv_sigma2,
                    -q * inv_sigma,
                    -q * z,
                )
            };
            value += l;
            for (j, col) in self.cols.iter().enumerate() {
                row[j + 1] = col[i];
            }
            for u in 0..=k {
                let ru = row[u];
                grad[u] += a * ru;
                hess[(u, s)] += d * ru;
                for v in 0..=u {
                    hess[(u, v)] += c * ru * row[v];
                }
            }
            grad[s] += b;
            hess[(s, s)] += e;
        }
        for u in 0..dim {
            for v in (u + 1)..dim {
                if v == s {
                    hess[(s, u)] = hess[(u, s)];
                } else {
                    hess[(u, v)] = hess[(v, u)];
                }
            }
        }
        (value, grad, hess)
    }

    /// Least-squares start: log y on `[1, X]` treating every row as an event.
    pub fn least_squares_start(&self) -> Result<DVector<f64>> {
        let k = self.k();
        let n = self.log_y.len();
        let mut xtx = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut xty = DVector::<f64>::zeros(k + 1);
        let mut row = vec![0.0; k + 1];
        row[0] = 1.0;
        for i in 0..n {
            for (j, col) in self.cols.iter().enumerate() {
                row[j + 1] = col[i];
            }
            let target = self.log_y[i] - self.offset.map_or(0.0, |o| o[i]);
            for u in 0..=k {
                xty[u] += row[u] * target;
                for v in 0..=u {
                    xtx[(u, v)] += row[u] * row[v];
                }
            }
        }
        for u in 0..=k {
            for v in (u + 1)..=k {
                xtx[(u, v)] = xtx[(v, u)];
            }
        }
        let coef = xtx
            .cholesky()
            .ok_or_else(|| Error::Numerical("model columns are collinear".into()))?
            .solve(&xty);
        let mut theta = DVector::zeros(k + 2);
        theta.rows_mut(0, k + 1).copy_from(&coef);
        let rss: f64 = (0..n)
            .map(|i| {
                theta[k + 1] = 0.0;
                self.residual(i, &theta).powi(2)
            })
            .sum();
        let sd = (rss / n as f64).sqrt().max(1e-8);
        theta[k + 1] = sd.ln();
        Ok(theta)
    }
}

impl Objective for AftProblem<'_> {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loglik(theta)
    }

    fn derivs(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        AftProblem::derivs(self, theta)
    }
}

fn check_params(model: &ModelSpec, params: &AftParams) -> Result<()> {
    if params.beta.len() != model.len() {
        return Err(Error::invalid(format!(
            "model has {} covariates but {} coefficients were given",
            model.len(),
            params.beta.len()
        )));
    }
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma = {} must be positive", params.sigma)));
    }
    Ok(())
}

/// Censored log-normal AFT log-likelihood of `params` under `model`.
pub fn aft_loglik(data: &SurvivalDataset, model: &ModelSpec, params: &AftParams) -> Result<f64> {
    model.validate(data)?;
    check_params(model, params)?;
    Ok(AftProblem::new(data, model, None).loglik(&params.to_theta()))
}

/// Gradient and Hessian of [`aft_loglik`] in `(μ, β, log σ)` order.
pub fn aft_loglik_derivs(
    data: &SurvivalDataset,
    model: &ModelSpec,
    params: &AftParams,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model.validate(data)?;
    check_params(model, params)?;
    let (_, g, h) = AftProblem::new(data, model, None).derivs(&params.to_theta());
    Ok((g, h))
}

/// A maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct AftFit {
    pub params: AftParams,
    pub loglik: f64,
    /// Hessian of the log-likelihood at the optimum, `(μ, β, log σ)` order.
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

impl AftFit {
    /// Standard errors from the inverse observed information.
    pub fn standard_errors(&self) -> Option<DVector<f64>> {
        let info = -&self.hessian;
        let inv = info.cholesky()?.inverse();
        Some(inv.diagonal().map(f64::sqrt))
    }
}

pub(crate) fn fit_problem(
    problem: &AftProblem<'_>,
    init: Option<&AftParams>,
    opts: &NewtonOptions,
) -> Result<AftFit> {
    let start = match init {
        Some(p) => {
            if p.beta.len() != problem.k() {
                return Err(Error::invalid("initial parameters do not match the model"));
            }
            p.to_theta()
        }
        None => problem.least_squares_start()?,
    };
    match newton::maximize(problem, start, opts) {
        Ok(opt) => Ok(AftFit {
            params: AftParams::from_theta(&opt.theta),
            loglik: opt.value,
            hessian: opt.hessian,
            iterations: opt.iterations,
        }),
        Err(NewtonError::BadStart) => Err(Error::Numerical(
            "log-likelihood is not finite at the starting point".into(),
        )),
        Err(NewtonError::Stalled {
            theta,
            grad_norm,
            iterations,
        }) => Err(Error::Convergence {
            iterations,
            grad_norm,
            last: Box::new(AftParams::from_theta(&theta)),
        }),
    }
}

/// Maximum-likelihood fit with explicit optimizer settings and optional offset.
pub fn fit_aft(
    data: &SurvivalDataset,
    model: &ModelSpec,
    offset: Option<&[f64]>,
    init: Option<&AftParams>,
    opts: &NewtonOptions,
) -> Result<AftFit> {
    model.validate(data)?;
    if data.n_events() == 0 {
        return Err(Error::invalid("all observations are censored"));
    }
    if let Some(o) = offset {
        if o.len() != data.n() {
            return Err(Error::invalid("offset length does not match n"));
        }
    }
    fit_problem(&AftProblem::new(data, model, offset), init, opts)
}

/// Maximizes the AFT log-likelihood over `(μ, β, σ)`; returns the estimate and
/// the maximized log-likelihood.
pub fn fit_aft_mle(
    data: &SurvivalDataset,
    model: &ModelSpec,
    init: Option<&AftParams>,
) -> Result<(AftParams, f64)> {
    let fit = fit_aft(data, model, None, init, &NewtonOptions::default())?;
    Ok((fit.params, fit.loglik))
}
