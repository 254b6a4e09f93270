//! Product non-local priors on regression coefficients.
//!
//! Each family is a product of identical one-dimensional densities, all of which
//! vanish at `β = 0`. With `w = φτ`:
//!
//! * pMOM (order `r`): `β^{2r} N(β; 0, w) / ∏_{l=1}^{r} (2l − 1) / w^r`
//! * piMOM (shape `v`): `w^{v/2} / Γ(v/2) · |β|^{−(v+1)} exp(−w / β²)`
//! * peMOM: `e^{√2} exp(−w / β²) N(β; 0, w)`
//!
//! Normalizing constants are only ever formed as logs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::normal::HALF_LN_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    Pmom,
    Pimom,
    Pemom,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 3] = [PriorFamily::Pmom, PriorFamily::Pimom, PriorFamily::Pemom];

    pub fn label(self) -> &'static str {
        match self {
            PriorFamily::Pmom => "pmom",
            PriorFamily::Pimom => "pimom",
            PriorFamily::Pemom => "pemom",
        }
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pmom" => Ok(PriorFamily::Pmom),
            "pimom" => Ok(PriorFamily::Pimom),
            "pemom" => Ok(PriorFamily::Pemom),
            other => Err(Error::invalid(format!(
                "unknown prior family {other:?} (expected pmom, pimom or pemom)"
            ))),
        }
    }
}

/// Non-local prior family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub family: PriorFamily,
    pub tau: f64,
    /// MOM order, used by pMOM only.
    pub order_r: u32,
    /// iMOM shape, used by piMOM only.
    pub shape_v: f64,
    pub phi: f64,
}

impl PriorConfig {
    pub fn new(family: PriorFamily, tau: f64) -> Self {
        PriorConfig {
            family,
            tau,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return Err(Error::invalid(format!("phi = {} must be positive", self.phi)));
        }
        if self.family == PriorFamily::Pmom && self.order_r < 1 {
            return Err(Error::invalid("order_r must be at least 1"));
        }
        if self.family == PriorFamily::Pimom && !(self.shape_v.is_finite() && self.shape_v >= 1.0)
        {
            return Err(Error::invalid(format!("shape_v = {} must be >= 1", self.shape_v)));
        }
        Ok(())
    }

    /// `φτ`
    fn scale(&self) -> f64 {
        self.phi * self.tau
    }

    /// Per-coordinate log normalizing constant.
    fn log_const(&self) -> f64 {
        let w = self.scale();
        match self.family {
            PriorFamily::Pmom => {
                let r = f64::from(self.order_r);
                let log_odd_prod: f64 = (1..=self.order_r)
                    .map(|l| f64::from(2 * l - 1).ln())
                    .sum();
                -(0.5 + r) * w.ln() - HALF_LN_2PI - log_odd_prod
            }
            PriorFamily::Pimom => 0.5 * self.shape_v * w.ln() - ln_gamma(0.5 * self.shape_v),
            PriorFamily::Pemom => std::f64::consts::SQRT_2 - HALF_LN_2PI - 0.5 * w.ln(),
        }
    }

    /// Unnormalized per-coordinate log kernel.
    fn log_kernel(&self, b: f64) -> f64 {
        let w = self.scale();
        let b2 = b * b;
        match self.family {
            PriorFamily::Pmom => f64::from(self.order_r) * b2.ln() - b2 / (2.0 * w),
            PriorFamily::Pimom => -0.5 * (self.shape_v + 1.0) * b2.ln() - w / b2,
            PriorFamily::Pemom => -w / b2 - b2 / (2.0 * w),
        }
    }

    fn grad_1d(&self, b: f64) -> f64 {
        let w = self.scale();
        match self.family {
            PriorFamily::Pmom => 2.0 * f64::from(self.order_r) / b - b / w,
            PriorFamily::Pimom => -(self.shape_v + 1.0) / b + 2.0 * w / (b * b * b),
            PriorFamily::Pemom => 2.0 * w / (b * b * b) - b / w,
        }
    }

    /// Second derivative of the per-coordinate log-density.
    pub(crate) fn hess_1d(&self, b: f64) -> f64 {
        let w = self.scale();
        let b2 = b * b;
        match self.family {
            PriorFamily::Pmom => -2.0 * f64::from(self.order_r) / b2 - 1.0 / w,
            PriorFamily::Pimom => (self.shape_v + 1.0) / b2 - 6.0 * w / (b2 * b2),
            PriorFamily::Pemom => -6.0 * w / (b2 * b2) - 1.0 / w,
        }
    }

    /// Log-density without argument checks; `−∞` if any coordinate is zero.
    pub(crate) fn log_density_unchecked(&self, beta: &[f64]) -> f64 {
        if beta.iter().any(|&b| b == 0.0) {
            return f64::NEG_INFINITY;
        }
        let kernel: f64 = beta.iter().map(|&b| self.log_kernel(b)).sum();
        kernel + beta.len() as f64 * self.log_const()
    }

    pub(crate) fn grad_unchecked<'a>(&'a self, beta: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        beta.iter().map(move |&b| self.grad_1d(b))
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            family: PriorFamily::Pemom,
            tau: 0.01,
            order_r: 1,
            shape_v: 1.0,
            phi: 1.0,
        }
    }
}

/// Normalized log-density of the product prior at `beta`.
pub fn log_nlp_density(beta: &[f64], config: &PriorConfig) -> Result<f64> {
    config.validate()?;
    if beta.is_empty() {
        return Err(Error::invalid("log_nlp_density needs at least one coefficient"));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    Ok(config.log_density_unchecked(beta))
}

/// Gradient of [`log_nlp_density`]; undefined where any coefficient is zero.
pub fn log_nlp_grad(beta: &[f64], config: &PriorConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    if let Some(j) = beta.iter().position(|&b| b == 0.0) {
        return Err(Error::Domain(format!(
            "prior gradient undefined at beta[{j}] = 0"
        )));
    }
    Ok(config.grad_unchecked(beta).collect())
}
