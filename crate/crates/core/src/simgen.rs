//! Synthetic censored survival data from a log-normal AFT model or an
//! exponential-baseline proportional hazards model.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// Non-zero coefficients of the benchmark design; covariates 0..6 carry signal.
pub const PAPER_COEFFICIENTS: [f64; 6] = [0.8, -0.9, 1.3, -1.4, 0.5, -0.53];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Generator {
    AftLognormal,
    CoxPh,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::AftLognormal => "aft",
            Generator::CoxPh => "cox",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aft" | "aft_lognormal" | "lognormal" => Ok(Generator::AftLognormal),
            "cox" | "cox_ph" | "coxph" => Ok(Generator::CoxPh),
            other => Err(Error::invalid(format!(
                "unknown generator {other:?} (expected aft or cox)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Sparse true coefficients, covariate index to value.
    pub beta_true: BTreeMap<usize, f64>,
    pub mu_true: f64,
    pub sigma_true: f64,
    pub target_censoring: f64,
    pub generator: Generator,
    pub time_cap: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Design of the benchmark experiment: the six reference coefficients on the
    /// first six covariates, 50% censoring for AFT data and 30% for Cox data.
    pub fn benchmark(n: usize, p: usize, generator: Generator, seed: u64) -> Self {
        let target_censoring = match generator {
            Generator::AftLognormal => 0.5,
            Generator::CoxPh => 0.3,
        };
        SimConfig {
            n,
            p,
            beta_true: PAPER_COEFFICIENTS.iter().copied().enumerate().collect(),
            mu_true: 0.0,
            sigma_true: 1.0,
            target_censoring,
            generator,
            time_cap: 20.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::invalid("simulation needs n >= 2 and p >= 1"));
        }
        if let Some(j) = self.beta_true.keys().find(|&&j| j >= self.p) {
            return Err(Error::invalid(format!("true coefficient index {j} >= p")));
        }
        if self.beta_true.values().any(|b| !b.is_finite()) || !self.mu_true.is_finite() {
            return Err(Error::invalid("true coefficients must be finite"));
        }
        if !(self.sigma_true.is_finite() && self.sigma_true > 0.0) {
            return Err(Error::invalid("sigma_true must be positive"));
        }
        if !(0.0..1.0).contains(&self.target_censoring) {
            return Err(Error::invalid(format!(
                "target_censoring = {} not in [0, 1)",
                self.target_censoring
            )));
        }
        if !(self.time_cap.is_finite() && self.time_cap > 0.0) {
            return Err(Error::invalid("time_cap must be positive"));
        }
        Ok(())
    }

    /// Indices of the non-zero true coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.beta_true
            .iter()
            .filter(|(_, b)| **b != 0.0)
            .map(|(&j, _)| j)
            .collect()
    }
}

/// A simulated dataset plus the latent quantities used to build it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: SurvivalDataset,
    /// Event times before censoring (after rescaling for AFT data).
    pub latent_times: Vec<f64>,
    /// Upper bound of the uniform censoring distribution; `None` when uncensored.
    pub censor_bound: Option<f64>,
    /// Baseline hazard of the Cox generator.
    pub baseline_hazard: Option<f64>,
}

/// Censored fraction implied by `Uniform(0, bound)` censoring given event times.
pub fn expected_censored_fraction(times: &[f64], bound: f64) -> f64 {
    times.iter().map(|t| (t / bound).min(1.0)).sum::<f64>() / times.len() as f64
}

/// Bisection for the uniform censoring bound matching `target` on `times`.
pub fn calibrate_censor_bound(times: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("censoring target {target} not in (0, 1)")));
    }
    let tmax = times.iter().copied().fold(0.0, f64::max);
    let tmin = times.iter().copied().fold(f64::INFINITY, f64::min);
    // fraction → 1 as the bound → 0 and → 0 as it grows
    let mut lo = tmin * 1e-3;
    let mut hi = tmax;
    while expected_censored_fraction(times, hi) > target {
        hi *= 2.0;
    }
    while expected_censored_fraction(times, lo) < target {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_censored_fraction(times, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    let bound = 0.5 * (lo + hi);
    debug_assert!((expected_censored_fraction(times, bound) - target).abs() < 0.01);
    Ok(bound)
}

fn draw_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    // column-major fill: covariate by covariate
    let values: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(n, p, values)
}

fn linear_predictor(design: &DMatrix<f64>, beta: &BTreeMap<usize, f64>) -> Vec<f64> {
    let n = design.nrows();
    let mut eta = vec![0.0; n];
    for (&j, &b) in beta {
        for (e, x) in eta.iter_mut().zip(design.column(j).iter()) {
            *e += b * x;
        }
    }
    eta
}

fn censor(
    rng: &mut ChaCha8Rng,
    design: DMatrix<f64>,
    latent: Vec<f64>,
    target: f64,
    baseline_hazard: Option<f64>,
) -> Result<Simulation> {
    let n = latent.len();
    if target == 0.0 {
        let dataset = SurvivalDataset::new(design, latent.clone(), vec![1; n])?;
        return Ok(Simulation {
            dataset,
            latent_times: latent,
            censor_bound: None,
            baseline_hazard,
        });
    }
    let bound = calibrate_censor_bound(&latent, target)?;
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for &t in &latent {
        // (0, 1): avoids a zero censoring time
        let u: f64 = 1.0 - rng.random::<f64>();
        let c = u * bound;
        if t <= c {
            times.push(t);
            status.push(1);
        } else {
            times.push(c);
            status.push(0);
        }
    }
    if !status.contains(&1) {
        // keep the dataset fittable: the earliest latent time is observed
        let i = (0..n)
            .min_by(|&a, &b| latent[a].total_cmp(&latent[b]))
            .expect("n >= 1");
        times[i] = latent[i];
        status[i] = 1;
    }
    let dataset = SurvivalDataset::new(design, times, status)?;
    Ok(Simulation {
        dataset,
        latent_times: latent,
        censor_bound: Some(bound),
        baseline_hazard,
    })
}

/// Simulates according to `config.generator`.
pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let design = draw_design(&mut rng, config.n, config.p);
    let eta = linear_predictor(&design, &config.beta_true);
    match config.generator {
        Generator::AftLognormal => {
            let mut latent: Vec<f64> = eta
                .iter()
                .map(|e| {
                    let z: f64 = rng.sample(StandardNormal);
                    (config.mu_true + e + config.sigma_true * z).exp()
                })
                .collect();
            let tmax = latent.iter().copied().fold(0.0, f64::max);
            let scale = config.time_cap / tmax;
            for t in &mut latent {
                *t = (*t * scale).min(config.time_cap);
            }
            if latent.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Numerical(
                    "latent times underflowed; reduce sigma_true or the coefficients".into(),
                ));
            }
            censor(&mut rng, design, latent, config.target_censoring, None)
        }
        Generator::CoxPh => {
            let unit: Vec<f64> = eta
                .iter()
                .map(|e| {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    -u.ln() / e.exp()
                })
                .collect();
            // λ₀ puts the median event time at time_cap / 4
            let mut sorted = unit.clone();
            sorted.sort_by(f64::total_cmp);
            let median = median_sorted(&sorted);
            let lambda0 = median / (config.time_cap / 4.0);
            let latent: Vec<f64> = unit.iter().map(|t| t / lambda0).collect();
            if latent.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(Error::Numerical("event times out of range".into()));
            }
            censor(
                &mut rng,
                design,
                latent,
                config.target_censoring,
                Some(lambda0),
            )
        }
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Log-normal AFT data with uniform censoring calibrated to the target rate.
pub fn simulate_aft(config: &SimConfig) -> Result<SurvivalDataset> {
    if config.generator != Generator::AftLognormal {
        return Err(Error::invalid("simulate_aft needs generator AFT_LOGNORMAL"));
    }
    Ok(simulate(config)?.dataset)
}

/// Proportional hazards data with an exponential baseline hazard.
pub fn simulate_coxph(config: &SimConfig) -> Result<SurvivalDataset> {
    if config.generator != Generator::CoxPh {
        return Err(Error::invalid("simulate_coxph needs generator COX_PH"));
    }
    Ok(simulate(config)?.dataset)
}
