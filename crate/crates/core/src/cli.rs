//! Command-line front end: `simulate`, `select` and `bench`.
//!
//! Every option may also come from a `key = value` file given with `--config`;
//! flags win over the file, the file wins over built-in defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::run_benchmark;
use crate::data::AftParams;
use crate::driver::{
    run_selection, IterationRecord, SelectedVariable, SelectionResult, StopReason, TuningParams,
};
use crate::error::{Error, Result};
use crate::io::{emit_report_json, load_dataset_csv, read_config_file, report_json, write_dataset_csv};
use crate::priors::{PriorConfig, PriorFamily};
use crate::simgen::{simulate, Generator, SimConfig, PAPER_COEFFICIENTS};

#[derive(Debug, Parser)]
#[command(name = "nlps-aft", version, about = "Non-local-prior variable selection for AFT survival models")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a censored survival dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Run iterative variable selection on a CSV dataset.
    Select(SelectArgs),
    /// Run a seeded TPR/FDR benchmark over simulated datasets.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// `aft` (log-normal AFT) or `cox` (proportional hazards).
    #[arg(long)]
    pub generator: Option<String>,
    /// Target censored fraction in [0, 1).
    #[arg(long)]
    pub censoring: Option<f64>,
    #[arg(long)]
    pub time_cap: Option<f64>,
    #[arg(long)]
    pub mu_true: Option<f64>,
    #[arg(long)]
    pub sigma_true: Option<f64>,
    /// True coefficients as `index:value,...` (0-based covariate indices).
    #[arg(long)]
    pub beta: Option<String>,
}

#[derive(Debug, Args)]
pub struct TuningFlags {
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub corr_threshold: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub maxno: Option<usize>,
    #[arg(long)]
    pub search_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PriorFlags {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub order_r: Option<u32>,
    #[arg(long)]
    pub shape_v: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input CSV with header `time,status,x1,...,xp`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `pmom`, `pimom` or `pemom`.
    #[arg(long)]
    pub prior: Option<String>,
    #[command(flatten)]
    pub prior_params: PriorFlags,
    #[command(flatten)]
    pub tuning: TuningFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub tuning: TuningFlags,
    /// Comma-separated prior families.
    #[arg(long)]
    pub priors: Option<String>,
    /// Comma-separated τ per prior, aligned with `--priors`.
    #[arg(long)]
    pub taus: Option<String>,
    #[command(flatten)]
    pub prior_params: PriorFlags,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved settings of a `select` run, embedded in its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub input: PathBuf,
    pub n: usize,
    pub p: usize,
    pub prior: PriorConfig,
    pub tuning: TuningParams,
    pub seed: u64,
}

/// JSON document written by `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selected: Vec<SelectedVariable>,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub final_fit: Option<AftParams>,
    pub config: SelectConfig,
}

impl SelectionReport {
    pub fn new(result: SelectionResult, config: SelectConfig) -> Self {
        SelectionReport {
            selected: result.selected,
            iterations: result.iterations,
            stop_reason: result.stop_reason,
            final_fit: result.final_fit,
            config,
        }
    }
}

/// Flag > config file > default lookup.
struct Resolver {
    file: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Resolver {
    fn new(file: BTreeMap<String, String>) -> Self {
        Resolver {
            file,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.file.get(key);
        if from_file.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    fn warn_unused(&self) {
        let used = self.used.borrow();
        for key in self.file.keys().filter(|k| !used.contains(*k)) {
            log::warn!("config key {key:?} is not used by this command");
        }
    }
}

fn parse_beta(text: &str) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (j, v) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("beta entry {item:?} is not index:value")))?;
        let j: usize = j
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad beta index in {item:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad beta value in {item:?}")))?;
        out.insert(j, v);
    }
    Ok(out)
}

fn resolve_sim(r: &Resolver, f: &SimFlags, seed: Option<u64>) -> Result<SimConfig> {
    let generator: Generator = r.get("generator", f.generator.clone(), "aft".into())?.parse::<Generator>()?;
    let n = r.get("n", f.n, 1000)?;
    let p = r.get("p", f.p, 10_000)?;
    let base = SimConfig::benchmark(n, p, generator, 0);
    let beta_true = match r.opt::<String>("beta", f.beta.clone())? {
        Some(text) => parse_beta(&text)?,
        None => PAPER_COEFFICIENTS.iter().copied().enumerate().collect(),
    };
    let config = SimConfig {
        beta_true,
        target_censoring: r.get("censoring", f.censoring, base.target_censoring)?,
        time_cap: r.get("time_cap", f.time_cap, base.time_cap)?,
        mu_true: r.get("mu_true", f.mu_true, base.mu_true)?,
        sigma_true: r.get("sigma_true", f.sigma_true, base.sigma_true)?,
        seed: r.get("seed", seed, 1)?,
        ..base
    };
    config.validate()?;
    Ok(config)
}

fn resolve_tuning(r: &Resolver, f: &TuningFlags) -> Result<TuningParams> {
    let d = TuningParams::default();
    let t = TuningParams {
        k0: r.get("k0", f.k0, d.k0)?,
        corr_threshold: r.get("corr_threshold", f.corr_threshold, d.corr_threshold)?,
        m: r.get("m", f.m, d.m)?,
        maxno: r.get("maxno", f.maxno, d.maxno)?,
        search_cap: r.get("search_cap", f.search_cap, d.search_cap)?,
    };
    t.validate()?;
    Ok(t)
}

fn resolve_prior(r: &Resolver, family: PriorFamily, tau: f64, f: &PriorFlags) -> Result<PriorConfig> {
    let d = PriorConfig::default();
    let p = PriorConfig {
        family,
        tau,
        phi: r.get("phi", f.phi, d.phi)?,
        order_r: r.get("order_r", f.order_r, d.order_r)?,
        shape_v: r.get("shape_v", f.shape_v, d.shape_v)?,
    };
    p.validate()?;
    Ok(p)
}

/// τ used when none is given: 0.01 for every family on AFT data; on Cox data
/// 0.192 (pMOM), 0.25 (piMOM) and 0.091 (peMOM).
pub fn default_tau(family: PriorFamily, generator: Generator) -> f64 {
    match (generator, family) {
        (Generator::AftLognormal, _) => 0.01,
        (Generator::CoxPh, PriorFamily::Pmom) => 0.192,
        (Generator::CoxPh, PriorFamily::Pimom) => 0.25,
        (Generator::CoxPh, PriorFamily::Pemom) => 0.091,
    }
}

fn log_config<T: Serialize>(what: &str, cfg: &T) {
    match serde_json::to_string(cfg) {
        Ok(s) => log::info!("{what} configuration: {s}"),
        Err(e) => log::warn!("could not serialize {what} configuration: {e}"),
    }
}

fn write_output(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn cmd_simulate(r: &Resolver, args: &SimulateArgs) -> Result<()> {
    let config = resolve_sim(r, &args.sim, args.seed)?;
    let out: PathBuf = r
        .opt("out", args.out.clone())?
        .ok_or_else(|| Error::Config("simulate needs --out".into()))?;
    log_config("simulate", &config);
    let sim = simulate(&config)?;
    write_dataset_csv(&sim.dataset, &out)?;
    log::info!(
        "wrote {}: n = {}, p = {}, censored fraction = {:.4}",
        out.display(),
        sim.dataset.n(),
        sim.dataset.p(),
        sim.dataset.censored_fraction()
    );
    Ok(())
}

fn cmd_select(r: &Resolver, args: &SelectArgs) -> Result<()> {
    let input: PathBuf = r
        .opt("input", args.input.clone())?
        .ok_or_else(|| Error::Config("select needs --input".into()))?;
    let family: PriorFamily = r.get("prior", args.prior.clone(), "pemom".into())?.parse()?;
    let tau = r.get("tau", args.prior_params.tau, 0.01)?;
    let prior = resolve_prior(r, family, tau, &args.prior_params)?;
    let tuning = resolve_tuning(r, &args.tuning)?;
    let seed = r.get("seed", args.seed, 1)?;
    let out: Option<PathBuf> = r.opt("out", args.out.clone())?;

    let data = load_dataset_csv(&input)?;
    let config = SelectConfig {
        input,
        n: data.n(),
        p: data.p(),
        prior,
        tuning,
        seed,
    };
    log_config("select", &config);
    let result = run_selection(&data, &tuning, &prior)?;
    log::info!(
        "selected {} variables in {} iterations ({:?})",
        result.selected.len(),
        result.iterations.len(),
        result.stop_reason
    );
    let report = SelectionReport::new(result, config);
    match out {
        Some(path) => emit_report_json(&report, path),
        None => write_output(&report_json(&report)?, None),
    }
}

fn cmd_bench(r: &Resolver, args: &BenchArgs) -> Result<()> {
    let sim = resolve_sim(r, &args.sim, args.seed)?;
    let tuning = resolve_tuning(r, &args.tuning)?;
    let families: Vec<PriorFamily> = r
        .get("priors", args.priors.clone(), "pmom,pimom,pemom".into())?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let common_tau: Option<f64> = r.opt("tau", args.prior_params.tau)?;
    let taus: Vec<f64> = match r.opt::<String>("taus", args.taus.clone())? {
        Some(text) => text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad tau {s:?}")))
            })
            .collect::<Result<_>>()?,
        None => families
            .iter()
            .map(|&f| common_tau.unwrap_or_else(|| default_tau(f, sim.generator)))
            .collect(),
    };
    if taus.len() != families.len() {
        return Err(Error::Config(format!(
            "{} taus given for {} priors",
            taus.len(),
            families.len()
        )));
    }
    let priors = families
        .iter()
        .zip(&taus)
        .map(|(&f, &t)| resolve_prior(r, f, t, &args.prior_params))
        .collect::<Result<Vec<_>>>()?;
    let replications = r.get("replications", args.replications, 20)?;
    let out: Option<PathBuf> = r.opt("out", args.out.clone())?;

    #[derive(Serialize)]
    struct BenchConfig<'a> {
        sim: &'a SimConfig,
        tuning: &'a TuningParams,
        priors: &'a [PriorConfig],
        replications: usize,
    }
    log_config(
        "bench",
        &BenchConfig {
            sim: &sim,
            tuning: &tuning,
            priors: &priors,
            replications,
        },
    );
    let report = run_benchmark(&sim, &tuning, &priors, replications)?;
    for m in &report.methods {
        log::info!(
            "{}: TPR {:?}, FDR {:?}, selected {:?}, failures {}",
            m.label,
            m.tpr_mean,
            m.fdr_mean,
            m.n_selected_mean,
            m.failures
        );
    }
    write_output(&report_json(&report)?, out.as_ref())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let r = Resolver::new(file);
    if let Some(threads) = r.opt::<usize>("threads", cli.threads)? {
        if threads == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let res = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&r, a),
        Command::Select(a) => cmd_select(&r, a),
        Command::Bench(a) => cmd_bench(&r, a),
    };
    r.warn_unused();
    res
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Entry point; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error");
            eprintln!("{}", error_line("usage", first.trim_start_matches("error: ")));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}
