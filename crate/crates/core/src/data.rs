//! Survival datasets, model index sets and AFT parameter vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed right-censored survival data `(y_i, δ_i, x_i)`.
///
/// The design is stored column-major so each covariate is a contiguous slice.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    pub(crate) design: DMatrix<f64>,
    pub(crate) times: Vec<f64>,
    pub(crate) log_times: Vec<f64>,
    pub(crate) events: Vec<bool>,
}

impl SurvivalDataset {
    /// `status[i]` is 1 for an observed event and 0 for a censored record.
    pub fn new(design: DMatrix<f64>, times: Vec<f64>, status: Vec<u8>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no subjects"));
        }
        if design.nrows() != n {
            return Err(Error::invalid(format!(
                "design has {} rows but {} times were given",
                design.nrows(),
                n
            )));
        }
        if status.len() != n {
            return Err(Error::invalid(format!(
                "{} status values for {} subjects",
                status.len(),
                n
            )));
        }
        if design.ncols() == 0 {
            return Err(Error::invalid("design has no covariates"));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid(format!(
                "time[{i}] = {} is not a positive finite number",
                times[i]
            )));
        }
        if let Some(i) = status.iter().position(|s| *s > 1) {
            return Err(Error::invalid(format!("status[{i}] = {} not in {{0,1}}", status[i])));
        }
        if let Some(k) = design.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "design entry ({}, {}) is not finite",
                k % n,
                k / n
            )));
        }
        if !status.contains(&1) {
            return Err(Error::invalid("all observations are censored"));
        }
        let log_times = times.iter().map(|t| t.ln()).collect();
        let events = status.iter().map(|s| *s == 1).collect();
        Ok(SurvivalDataset {
            design,
            times,
            log_times,
            events,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.design.as_slice()[j * n..(j + 1) * n]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_times(&self) -> &[f64] {
        &self.log_times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn status(&self) -> Vec<u8> {
        self.events.iter().map(|&e| u8::from(e)).collect()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.n() as f64
    }

    /// Copy of the dataset with every covariate centred to mean 0 and scaled to
    /// unit (population) standard deviation. Constant columns become all-zero.
    pub fn standardized(&self) -> (SurvivalDataset, Standardization) {
        let n = self.n() as f64;
        let mut design = self.design.clone();
        let mut means = Vec::with_capacity(self.p());
        let mut sds = Vec::with_capacity(self.p());
        for mut col in design.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for v in col.iter_mut() {
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
            means.push(mean);
            sds.push(sd);
        }
        let data = SurvivalDataset {
            design,
            times: self.times.clone(),
            log_times: self.log_times.clone(),
            events: self.events.clone(),
        };
        (data, Standardization { means, sds })
    }

    /// Same covariates and status with every time multiplied by `factor`.
    pub fn with_scaled_times(&self, factor: f64) -> Result<SurvivalDataset> {
        let times = self.times.iter().map(|t| t * factor).collect();
        SurvivalDataset::new(self.design.clone(), times, self.status())
    }

    /// Dataset whose design has covariate `j` replaced by `values`.
    pub fn with_column(&self, j: usize, values: &[f64]) -> Result<SurvivalDataset> {
        if j >= self.p() || values.len() != self.n() {
            return Err(Error::invalid("replacement column does not fit the design"));
        }
        let mut design = self.design.clone();
        design.column_mut(j).copy_from_slice(values);
        SurvivalDataset::new(design, self.times.clone(), self.status())
    }
}

/// Per-column location and scale removed by [`SurvivalDataset::standardized`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Strictly increasing covariate indices defining one regression model.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec(Vec<usize>);

impl ModelSpec {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "model indices {indices:?} are not strictly increasing"
            )));
        }
        Ok(ModelSpec(indices))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        ModelSpec(indices)
    }

    pub fn empty() -> Self {
        ModelSpec(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Checks indices against the dataset and the `n_k <= n - 2` bound.
    pub fn validate(&self, data: &SurvivalDataset) -> Result<()> {
        if let Some(&j) = self.0.iter().find(|&&j| j >= data.p()) {
            return Err(Error::invalid(format!(
                "covariate index {j} out of range (p = {})",
                data.p()
            )));
        }
        if self.len() + 2 > data.n() {
            return Err(Error::invalid(format!(
                "model with {} covariates needs at least {} subjects, have {}",
                self.len(),
                self.len() + 2,
                data.n()
            )));
        }
        Ok(())
    }
}

/// Intercept, coefficients and scale of one fitted log-normal AFT model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftParams {
    pub mu: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl AftParams {
    pub fn new(mu: f64, beta: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
        }
        if !mu.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("AFT parameters must be finite"));
        }
        Ok(AftParams { mu, beta, sigma })
    }

    /// Unconstrained coordinates `(μ, β_1..β_k, log σ)`.
    pub fn to_theta(&self) -> DVector<f64> {
        let k = self.beta.len();
        let mut theta = DVector::zeros(k + 2);
        theta[0] = self.mu;
        for (t, b) in theta.iter_mut().skip(1).zip(&self.beta) {
            *t = *b;
        }
        theta[k + 1] = self.sigma.ln();
        theta
    }

    pub fn from_theta(theta: &DVector<f64>) -> Self {
        let k = theta.len() - 2;
        AftParams {
            mu: theta[0],
            beta: theta.rows(1, k).iter().copied().collect(),
            sigma: theta[k + 1].exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SurvivalDataset {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 9.0]);
        SurvivalDataset::new(design, vec![1.0, 2.0, 3.0], vec![1, 0, 1]).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let design = DMatrix::zeros(2, 1);
        assert!(SurvivalDataset::new(design.clone(), vec![1.0, 0.0], vec![1, 1]).is_err());
        assert!(SurvivalDataset::new(design.clone(), vec![1.0, 2.0], vec![1, 2]).is_err());
        assert!(SurvivalDataset::new(design.clone(), vec![1.0, 2.0], vec![0, 0]).is_err());
        assert!(SurvivalDataset::new(design, vec![1.0], vec![1]).is_err());
        let nan = DMatrix::from_element(2, 1, f64::NAN);
        assert!(SurvivalDataset::new(nan, vec![1.0, 2.0], vec![1, 1]).is_err());
    }

    #[test]
    fn columns_are_contiguous() {
        let d = tiny();
        assert_eq!(d.column(0), &[1.0, 2.0, 3.0]);
        assert_eq!(d.column(1), &[2.0, 4.0, 9.0]);
        assert_eq!(d.status(), vec![1, 0, 1]);
    }

    #[test]
    fn standardization_gives_unit_columns() {
        let (s, st) = tiny().standardized();
        for j in 0..2 {
            let c = s.column(j);
            let mean: f64 = c.iter().sum::<f64>() / 3.0;
            let var: f64 = c.iter().map(|v| v * v).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
        assert!((st.means[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let design = DMatrix::from_element(3, 1, 4.0);
        let d = SurvivalDataset::new(design, vec![1.0, 2.0, 3.0], vec![1, 1, 1]).unwrap();
        let (s, st) = d.standardized();
        assert_eq!(s.column(0), &[0.0, 0.0, 0.0]);
        assert_eq!(st.sds[0], 0.0);
    }

    #[test]
    fn model_spec_invariants() {
        assert!(ModelSpec::new(vec![0, 2, 5]).is_ok());
        assert!(ModelSpec::new(vec![2, 2]).is_err());
        assert!(ModelSpec::new(vec![3, 1]).is_err());
        assert_eq!(ModelSpec::from_unsorted(vec![3, 1, 3]).indices(), &[1, 3]);
        let d = tiny();
        assert!(ModelSpec::new(vec![0]).unwrap().validate(&d).is_ok());
        assert!(ModelSpec::new(vec![0, 1]).unwrap().validate(&d).is_err());
        assert!(ModelSpec::new(vec![7]).unwrap().validate(&d).is_err());
    }

    #[test]
    fn theta_round_trip() {
        let p = AftParams::new(0.3, vec![1.0, -2.0], 1.7).unwrap();
        let back = AftParams::from_theta(&p.to_theta());
        assert!((back.sigma - 1.7).abs() < 1e-14);
        assert_eq!(back.beta, p.beta);
        assert!(AftParams::new(0.0, vec![], 0.0).is_err());
    }
}
