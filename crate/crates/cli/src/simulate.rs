//! `simulate` and `fig1`: Monte Carlo reconstruction runs with JSON and CSV output.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;
use tomography::estimator::{
    hermitian_parts, simulate_continuous, simulate_discrete, simulate_weigert, Contributions, DensityMatrix,
    RunStats, SettingSelection,
};
use tomography::liouville::{Op, C64, HERMITIAN_ABS_TOL};
use tomography::spin::{pauli_quorum, weigert_quorum, SpinSystem};

use crate::config::{ExperimentConfig, QuorumSpec, DEFAULT_BLOCKS, DEFAULT_SEED};
use crate::{default_checkpoints, fmt_f64, usage, with_threads, CliResult};

/// One row of a convergence series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n_samples: usize,
    pub mean: f64,
    pub error_bar: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub results: serde_json::Value,
    /// Present when checkpoints were requested or a CSV path was given.
    pub series: Option<Vec<Checkpoint>>,
    pub exact: f64,
}

impl SimulationOutput {
    pub fn results_json(&self) -> String {
        serde_json::to_string_pretty(&self.results).expect("results serialize") + "\n"
    }

    pub fn csv(&self) -> Option<String> {
        self.series.as_ref().map(|rows| convergence_csv(rows, self.exact))
    }
}

/// `n_samples,mean,error_bar,exact` with one row per checkpoint.
pub fn convergence_csv(rows: &[Checkpoint], exact: f64) -> String {
    let mut out = String::from("n_samples,mean,error_bar,exact\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n_samples, fmt_f64(r.mean), fmt_f64(r.error_bar), fmt_f64(exact));
    }
    out
}

fn contributions(cfg: &ExperimentConfig, a: &Op, rho: &DensityMatrix) -> CliResult<Contributions> {
    let system = cfg.system();
    Ok(match &cfg.quorum {
        QuorumSpec::Pauli => {
            let (q, dual) = pauli_quorum();
            simulate_discrete(a, &q, &dual, rho, cfg.n_samples, cfg.seed, cfg.selection)?
        }
        QuorumSpec::Continuous => simulate_continuous(a, &system, rho, cfg.n_samples, cfg.seed)?,
        QuorumSpec::Weigert { .. } => {
            let wq = weigert_quorum(&system, &cfg.directions()?)?;
            simulate_weigert(a, &wq, rho, cfg.n_samples, cfg.seed, cfg.weigert_convention)?
        }
    })
}

fn convention_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg.quorum {
        QuorumSpec::Pauli => cfg.selection.name(),
        QuorumSpec::Continuous => "uniform_direction",
        QuorumSpec::Weigert { .. } => cfg.weigert_convention.name(),
    }
}

/// Runs the configured estimator. Inputs are loaded and checked before any sampling.
pub fn run_simulation(cfg: &ExperimentConfig) -> CliResult<SimulationOutput> {
    let rho = cfg.density()?;
    let a = cfg.target_op()?;
    if let QuorumSpec::Weigert { .. } = cfg.quorum {
        cfg.directions()?;
    }
    let hermitian = a.hermiticity_deviation() <= HERMITIAN_ABS_TOL;
    if !hermitian && cfg.checkpoints.is_some() {
        return Err(usage("convergence series need a Hermitian target"));
    }
    let exact_c: C64 = rho.expectation(&a);

    let (result, threads) = with_threads(cfg.threads, || -> CliResult<_> {
        if hermitian {
            let c = contributions(cfg, &a, &rho)?;
            Ok((c, None))
        } else {
            let (h, k) = hermitian_parts(&a);
            let re = contributions(cfg, &h, &rho)?;
            let im = contributions(cfg, &k, &rho)?;
            Ok((re, Some(im)))
        }
    })?;
    let (main, imag) = result?;

    let mut results = json!({
        "estimator": cfg.quorum.name(),
        "spin_two_s": cfg.spin_two_s,
        "state": cfg.state,
        "target": cfg.target.label(),
        "seed": cfg.seed,
        "convention": convention_name(cfg),
        "threads": threads,
        "samples_per_unit": main.samples_per_unit,
    });
    let series = if let Some(im) = imag {
        let re_stats = main.stats(cfg.n_blocks)?;
        let im_stats = im.stats(cfg.n_blocks)?;
        results["n_samples"] = json!(re_stats.n_samples);
        results["n_blocks"] = json!(cfg.n_blocks);
        results["mean"] = json!([re_stats.mean, im_stats.mean]);
        results["error_bar"] = json!([re_stats.error_bar, im_stats.error_bar]);
        results["exact"] = json!([exact_c.re, exact_c.im]);
        results["components"] = json!({ "re": re_stats, "im": im_stats });
        None
    } else {
        let stats = main.stats(cfg.n_blocks)?;
        results["n_samples"] = json!(stats.n_samples);
        results["n_blocks"] = json!(stats.n_blocks);
        results["mean"] = json!(stats.mean);
        results["error_bar"] = json!(stats.error_bar);
        results["block_means"] = json!(stats.block_means);
        results["exact"] = json!(exact_c.re);
        match &cfg.checkpoints {
            Some(points) => Some(series_at(&main, points, cfg.n_blocks)?),
            None => None,
        }
    };
    Ok(SimulationOutput { results, series, exact: exact_c.re })
}

/// `simulate` with a CSV requested but no explicit checkpoints.
pub fn with_default_checkpoints(mut cfg: ExperimentConfig) -> ExperimentConfig {
    if cfg.checkpoints.is_none() {
        cfg.checkpoints = Some(default_checkpoints(cfg.n_samples, cfg.n_blocks * cfg.samples_per_unit()));
    }
    cfg
}

fn series_at(c: &Contributions, points: &[usize], n_blocks: usize) -> CliResult<Vec<Checkpoint>> {
    points
        .iter()
        .map(|&n| {
            let s = c.prefix_stats(n, n_blocks)?;
            Ok(Checkpoint { n_samples: s.n_samples, mean: s.mean, error_bar: s.error_bar })
        })
        .collect()
}

/// Parameters of the continuous-versus-discrete comparison on the spin-1/2 coherent state.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Params {
    pub alpha: [f64; 2],
    pub n_max: usize,
    pub seed: u64,
    pub n_blocks: usize,
    pub checkpoints: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub selection: SettingSelection,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Self {
            alpha: [2.0, 0.0],
            n_max: 100_000,
            seed: DEFAULT_SEED,
            n_blocks: DEFAULT_BLOCKS,
            checkpoints: None,
            threads: None,
            selection: SettingSelection::FixedQuota,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Row {
    pub n_samples: usize,
    pub mean_cont: f64,
    pub err_cont: f64,
    pub mean_disc: f64,
    pub err_disc: f64,
    pub exact: f64,
}

#[derive(Debug, Clone)]
pub struct Fig1Output {
    pub params: Fig1Params,
    pub rows: Vec<Fig1Row>,
    pub continuous: RunStats,
    pub discrete: RunStats,
    pub exact: f64,
    pub threads: usize,
}

impl Fig1Output {
    /// `n_samples,mean_cont,err_cont,mean_disc,err_disc,exact`.
    pub fn csv(&self) -> String {
        let mut out = String::from("n_samples,mean_cont,err_cont,mean_disc,err_disc,exact\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n_samples,
                fmt_f64(r.mean_cont),
                fmt_f64(r.err_cont),
                fmt_f64(r.mean_disc),
                fmt_f64(r.err_disc),
                fmt_f64(r.exact)
            );
        }
        out
    }

    pub fn means_csv(&self) -> String {
        let mut out = String::from("n_samples,mean_cont,mean_disc,exact\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.n_samples, fmt_f64(r.mean_cont), fmt_f64(r.mean_disc), fmt_f64(r.exact));
        }
        out
    }

    pub fn errors_csv(&self) -> String {
        let mut out = String::from("n_samples,err_cont,err_disc\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.n_samples, fmt_f64(r.err_cont), fmt_f64(r.err_disc));
        }
        out
    }

    pub fn error_bar_ratio(&self) -> f64 {
        self.continuous.error_bar / self.discrete.error_bar
    }

    pub fn summary_json(&self) -> String {
        let p = &self.params;
        let v = json!({
            "alpha": p.alpha,
            "spin_two_s": 1,
            "target": "sz",
            "n_max": p.n_max,
            "n_blocks": p.n_blocks,
            "seed": p.seed,
            "selection": p.selection.name(),
            "threads": self.threads,
            "exact": self.exact,
            "continuous": self.continuous,
            "discrete": self.discrete,
            "error_bar_ratio": self.error_bar_ratio(),
        });
        serde_json::to_string_pretty(&v).expect("summary serializes") + "\n"
    }
}

/// Both estimators of `⟨Sz⟩` on the spin-1/2 coherent state with equal sample budgets.
///
/// Each method is simulated once at `n_max` with the run seed; checkpoint rows
/// are prefix statistics of that single record. With fixed quotas the discrete
/// row at budget `n` uses `⌊n/3⌋` complete rounds.
pub fn run_fig1(params: &Fig1Params) -> CliResult<Fig1Output> {
    if params.n_blocks < 2 {
        return Err(usage(format!("n_blocks must be ≥ 2, got {}", params.n_blocks)));
    }
    let unit = if params.selection == SettingSelection::FixedQuota { 3 } else { 1 };
    let min = params.n_blocks * unit;
    if params.n_max < min {
        return Err(usage(format!("n_samples must be ≥ n_blocks ({} < {min})", params.n_max)));
    }
    let points = match &params.checkpoints {
        Some(p) => {
            if let Some(&bad) = p.iter().find(|&&n| n < min || n > params.n_max) {
                return Err(usage(format!("checkpoint {bad} outside [{min}, {}]", params.n_max)));
            }
            p.clone()
        }
        None => default_checkpoints(params.n_max, min),
    };
    let system = SpinSystem::new(1);
    let state = tomography::spin::coherent_state(&system, C64::new(params.alpha[0], params.alpha[1])).map_err(usage)?;
    let rho = DensityMatrix::from(&state);
    let a = system.sz().clone();
    let exact = rho.expectation(&a).re;
    let (q, dual) = pauli_quorum();

    let (runs, threads) = with_threads(params.threads, || -> CliResult<_> {
        let cont = simulate_continuous(&a, &system, &rho, params.n_max, params.seed)?;
        let disc = simulate_discrete(&a, &q, &dual, &rho, params.n_max, params.seed, params.selection)?;
        Ok((cont, disc))
    })?;
    let (cont, disc) = runs?;

    let mut rows = Vec::with_capacity(points.len());
    for &n in &points {
        let c = cont.prefix_stats(n, params.n_blocks)?;
        let d = disc.prefix_stats(n, params.n_blocks)?;
        rows.push(Fig1Row { n_samples: n, mean_cont: c.mean, err_cont: c.error_bar, mean_disc: d.mean, err_disc: d.error_bar, exact });
    }
    Ok(Fig1Output {
        params: params.clone(),
        rows,
        continuous: cont.stats(params.n_blocks)?,
        discrete: disc.stats(params.n_blocks)?,
        exact,
        threads,
    })
}
