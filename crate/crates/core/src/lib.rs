//! Iterative screen-and-select variable selection for high-dimensional censored
//! survival data under a log-normal accelerated failure time model.
//!
//! Each iteration ranks the remaining covariates by a marginal (first
//! iteration) or conditional utility, groups correlated covariates around the
//! top-ranked leaders, and keeps the highest-posterior model of every group
//! under a non-local coefficient prior and a beta-binomial model prior.
//!
//! ```no_run
//! use nlps_aft::{run_selection, simulate, PriorConfig, SimConfig, Generator, TuningParams};
//!
//! let sim = simulate(&SimConfig::benchmark(400, 2000, Generator::AftLognormal, 7))?;
//! let data = sim.dataset.standardized().0;
//! let result = run_selection(&data, &TuningParams { m: 20, ..Default::default() }, &PriorConfig::default())?;
//! println!("{:?}", result.selected_indices());
//! # Ok::<(), nlps_aft::Error>(())
//! ```

pub mod aft;
pub mod bayes;
pub mod bench;
pub mod cli;
pub mod data;
pub mod driver;
pub mod error;
pub mod io;
pub mod newton;
pub mod normal;
pub mod priors;
pub mod screening;
pub mod simgen;

pub use aft::{aft_loglik, aft_loglik_derivs, fit_aft, fit_aft_mle, AftFit};
pub use bayes::{log_marginal_laplace, log_model_prior, score_model, select_best_model, LaplaceApprox, ModelScore};
pub use bench::{compute_tpr_fdr, run_benchmark, BenchmarkReport};
pub use data::{AftParams, ModelSpec, Standardization, SurvivalDataset};
pub use driver::{run_selection, SelectionResult, StopReason, TuningParams};
pub use error::{Error, Result};
pub use io::{emit_report_json, load_dataset_csv, read_dataset_csv, write_dataset_csv};
pub use newton::NewtonOptions;
pub use normal::log_survival_std;
pub use priors::{log_nlp_density, log_nlp_grad, PriorConfig, PriorFamily};
pub use screening::{
    build_leading_sets, conditional_utility, marginal_utility, pick_leading_variables, LeadingSet,
    UtilityKind, UtilityTable,
};
pub use simgen::{simulate, simulate_aft, simulate_coxph, Generator, SimConfig, Simulation};
