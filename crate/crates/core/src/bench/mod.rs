//! Experiment harness: phase transitions, denoising MSE against the
//! theoretical bound, frequency MSE against the CRB, cross-method comparison,
//! and runtime scaling, with CSV/JSON records and SVG plots.

pub mod svg;

use crate::extract::{
    extract_from_toeplitz, frequency_mse, matrix_pencil_2d, pair_frequencies, FrequencyEstimate,
    PairingStrategy,
};
use crate::gridded::{bp_solve, bp_top_k, crb, default_mu, omp_solve, GridDictionary};
use crate::linalg::frob;
use crate::manm::{
    self, atomic_norm, default_lambda, dual_atomic_norm, practical_lambda,
};
use crate::model::{
    add_noise, sample_mask_order, sample_model, snr_db_to_sigma,
    synthesize, AmplitudeScheme, ArrayGeometry, CMat, FrequencyPair, ObservationMask,
    SpectralModel,
};
use crate::rng::{cell_stream, stream_rng};
use crate::sdp::SolverConfig;
use crate::vanm::vanm_denoise;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("no aggregates present for plotting: {0}")]
    MissingAggregates(String),
}

/// Estimation method identifiers; gridded methods carry their grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Manm,
    Vanm,
    Bp(usize),
    Omp(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Manm => write!(f, "manm"),
            Method::Vanm => write!(f, "vanm"),
            Method::Bp(g) => write!(f, "bp:{g}"),
            Method::Omp(g) => write!(f, "omp:{g}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "manm" {
            return Ok(Method::Manm);
        }
        if s == "vanm" {
            return Ok(Method::Vanm);
        }
        if let Some(rest) = s.strip_prefix("bp:") {
            return rest
                .parse()
                .map(Method::Bp)
                .map_err(|e| format!("bad bp grid: {e}"));
        }
        if let Some(rest) = s.strip_prefix("omp:") {
            return rest
                .parse()
                .map(Method::Omp)
                .map_err(|e| format!("bad omp grid: {e}"));
        }
        Err(format!("unknown method '{s}' (manm|vanm|bp:<grid>|omp:<grid>)"))
    }
}

/// Regularization rule for denoising sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaRule {
    /// The closed-form theoretical value.
    Theory,
    /// sigma sqrt(MN ln MN).
    Practical,
    /// Explicit value.
    Fixed(f64),
}

impl LambdaRule {
    pub fn resolve(&self, m: usize, n: usize, sigma: f64) -> f64 {
        match self {
            LambdaRule::Theory => default_lambda(m, n, sigma).expect("m, n >= 2"),
            LambdaRule::Practical => practical_lambda(m, n, sigma),
            LambdaRule::Fixed(v) => *v,
        }
    }
}

impl std::str::FromStr for LambdaRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "theory" => Ok(LambdaRule::Theory),
            "practical" => Ok(LambdaRule::Practical),
            other => other
                .parse::<f64>()
                .map(LambdaRule::Fixed)
                .map_err(|_| format!("lambda must be theory|practical|<value>, got '{other}'")),
        }
    }
}

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    PhaseTransition,
    DenoiseMse,
    FreqMse,
    Compare,
    Runtime,
}

/// Full experiment configuration; constructors give the per-study defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub k_grid: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip, default = "SolverConfig::default")]
    pub solver: SolverConfig,
    #[serde(skip, default = "default_vanm_solver")]
    pub vanm_solver: SolverConfig,
    pub methods: Vec<Method>,
    pub lambda_rule: LambdaRule,
    pub min_sep_factor: f64,
    pub unit_amplitudes: bool,
    /// Fixed frequency set (e.g. the three-source comparison set); random
    /// phases are still drawn per trial.
    pub freqs: Option<Vec<(f64, f64)>>,
    pub threads: usize,
    /// Per-cell wall-clock budget for the runtime study, seconds.
    pub cell_timeout: f64,
}

fn default_vanm_solver() -> SolverConfig {
    SolverConfig {
        tolerance: 1e-6,
        max_iterations: 1000,
        ..SolverConfig::default()
    }
}

/// The three-source frequency set used in the comparison experiments.
pub const COMPARISON_FREQS: [(f64, f64); 3] = [
    (0.49546, 0.50402),
    (0.37560, 0.00369),
    (0.12951, 0.85163),
];

impl ExperimentConfig {
    fn base(kind: ExperimentKind) -> Self {
        Self {
            kind,
            m: 10,
            n: 10,
            k: 3,
            k_grid: vec![],
            p_grid: vec![],
            snr_grid: vec![],
            m_grid: vec![],
            trials: 50,
            seed: 1,
            solver: SolverConfig::default().with_max_iterations(20_000),
            vanm_solver: default_vanm_solver(),
            methods: vec![Method::Manm],
            lambda_rule: LambdaRule::Practical,
            min_sep_factor: 1.19,
            unit_amplitudes: false,
            freqs: None,
            threads: 0,
            cell_timeout: 600.0,
        }
    }

    pub fn phase_transition() -> Self {
        Self {
            k_grid: vec![2, 4, 6, 8],
            p_grid: (3..=10).map(|i| i as f64 / 10.0).collect(),
            ..Self::base(ExperimentKind::PhaseTransition)
        }
    }

    pub fn denoise_mse() -> Self {
        Self {
            m: 12,
            n: 12,
            k: 6,
            snr_grid: vec![0.0, 6.0, 12.0, 18.0, 24.0],
            unit_amplitudes: true,
            lambda_rule: LambdaRule::Theory,
            ..Self::base(ExperimentKind::DenoiseMse)
        }
    }

    pub fn freq_mse() -> Self {
        Self {
            m: 12,
            n: 12,
            k: 6,
            snr_grid: vec![0.0, 6.0, 12.0, 18.0, 24.0],
            unit_amplitudes: true,
            lambda_rule: LambdaRule::Practical,
            ..Self::base(ExperimentKind::FreqMse)
        }
    }

    pub fn compare() -> Self {
        Self {
            m: 10,
            n: 10,
            k: 3,
            snr_grid: vec![6.0],
            trials: 100,
            unit_amplitudes: true,
            freqs: Some(COMPARISON_FREQS.to_vec()),
            methods: vec![
                Method::Manm,
                Method::Vanm,
                Method::Bp(10),
                Method::Bp(30),
                Method::Omp(30),
            ],
            lambda_rule: LambdaRule::Practical,
            ..Self::base(ExperimentKind::Compare)
        }
    }

    pub fn runtime() -> Self {
        Self {
            k: 5,
            snr_grid: vec![6.0],
            m_grid: vec![8, 12, 16, 20],
            trials: 1,
            unit_amplitudes: true,
            methods: vec![Method::Manm, Method::Vanm],
            lambda_rule: LambdaRule::Practical,
            solver: SolverConfig {
                tolerance: 1e-7,
                max_iterations: 100,
                ..SolverConfig::default()
            },
            ..Self::base(ExperimentKind::Runtime)
        }
    }

    pub fn geom(&self) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(self.m, self.n)
    }

    pub fn min_sep(&self) -> f64 {
        self.min_sep_factor / self.m.max(self.n) as f64
    }

    fn amp_scheme(&self) -> AmplitudeScheme {
        if self.unit_amplitudes {
            AmplitudeScheme::UnitModulusRandomPhase
        } else {
            AmplitudeScheme::ComplexGaussian
        }
    }
}

/// One CSV row; the column schema is part of the external interface.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial_id: usize,
    pub seed: u64,
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub p_or_snr: f64,
    pub rel_frob_err: f64,
    pub freq_mse: f64,
    pub pairing_ok: bool,
    pub wall_ms: f64,
    pub iters: usize,
    pub converged: bool,
}

pub const CSV_HEADER: &str =
    "trial_id,seed,method,m,n,k,p_or_snr,rel_frob_err,freq_mse,pairing_ok,wall_ms,iters,converged";

impl TrialRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial_id,
            self.seed,
            self.method,
            self.m,
            self.n,
            self.k,
            self.p_or_snr,
            self.rel_frob_err,
            self.freq_mse,
            self.pairing_ok,
            self.wall_ms,
            self.iters,
            self.converged
        )
    }
}

/// Per-cell aggregate; fields not meaningful for a study stay None.
#[derive(Debug, Clone, Serialize, Default)]
pub struct CellAggregate {
    pub method: String,
    pub x: f64,
    pub k: usize,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_data_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_trial_bound_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_hypothesis_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_freq_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing_failures: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_solve_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_pipeline_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flop_ratio_vs_manm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censored: Option<bool>,
}

/// Scatter point of an estimated pair, for the comparison figure.
#[derive(Debug, Clone, Serialize)]
pub struct ScatterPoint {
    pub method: String,
    pub fx: f64,
    pub fy: f64,
}

/// Full experiment record: config echo, per-trial rows, aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    pub success_threshold: f64,
    pub rows: Vec<TrialRow>,
    pub cells: Vec<CellAggregate>,
    /// FNV-1a hashes of the per-trial shared data, comparison study only.
    pub data_hashes: Vec<u64>,
    pub scatter: Vec<ScatterPoint>,
    pub truth_scatter: Vec<(f64, f64)>,
}

/// Success threshold on the relative Frobenius reconstruction error.
pub const SUCCESS_REL_ERR: f64 = 1e-4;

fn fnv1a_matrix(x: &CMat) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for v in x.iter() {
        eat(v.re.to_bits());
        eat(v.im.to_bits());
    }
    h
}

fn run_parallel<T: Send>(threads: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let work = || {
        use rayon::prelude::*;
        (0..jobs).into_par_iter().map(|i| f(i)).collect()
    };
    if threads == 0 {
        work()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(work)
    }
}

// ---------------------------------------------------------------------------
// Phase transition (completion success over K x p)
// ---------------------------------------------------------------------------

/// Success-rate surface of noiseless completion over sparsity and observation
/// fraction. Matched seeds: each trial draws one separated model at max(K)
/// whose K-prefixes serve every K cell, and one index permutation whose
/// prefixes serve every p cell (nested masks keep success monotone in p).
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    if cfg.k_grid.is_empty() || cfg.p_grid.is_empty() {
        return Err(BenchError::Config("phase transition needs k and p grids".into()));
    }
    let geom = cfg.geom();
    let k_max = *cfg.k_grid.iter().max().unwrap();
    let min_sep = cfg.min_sep();
    let mn = geom.size();
    let solver = cfg.solver.clone();
    let k_grid = cfg.k_grid.clone();
    let p_grid = cfg.p_grid.clone();

    let trial_rows = run_parallel(cfg.threads, cfg.trials, |trial| {
        let mut rng = stream_rng(cfg.seed, cell_stream(0, trial as u32));
        let model = sample_model(k_max, min_sep, AmplitudeScheme::ComplexGaussian, &mut rng)
            .expect("separation feasible for k_max");
        let order = sample_mask_order(&geom, &mut rng);
        let mut rows = Vec::with_capacity(k_grid.len() * p_grid.len());
        for &k in &k_grid {
            let sub = SpectralModel::new(model.components[..k].to_vec()).unwrap();
            let x = synthesize(&sub, &geom);
            let xnorm = frob(&x);
            for &p in &p_grid {
                let count = ((p * mn as f64).round() as usize).clamp(1, mn);
                let mask =
                    ObservationMask::new(geom.m_elements, geom.n_elements, order[..count].to_vec())
                        .unwrap();
                let mut x_obs = x.clone();
                for i in 0..geom.m_elements {
                    for j in 0..geom.n_elements {
                        if !mask.contains(i, j) {
                            x_obs[(i, j)] = num_complex::Complex64::new(0.0, 0.0);
                        }
                    }
                }
                let t0 = Instant::now();
                let res = manm::complete(&x_obs, &mask, &solver).expect("well-formed completion");
                let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
                let rel = frob(&(&res.x_hat - &x)) / xnorm;
                rows.push(TrialRow {
                    trial_id: trial,
                    seed: cfg.seed,
                    method: "manm".into(),
                    m: cfg.m,
                    n: cfg.n,
                    k,
                    p_or_snr: p,
                    rel_frob_err: rel,
                    freq_mse: f64::NAN,
                    pairing_ok: true,
                    wall_ms,
                    iters: res.diagnostics.iterations,
                    converged: res.diagnostics.converged,
                });
            }
        }
        rows
    });

    let rows: Vec<TrialRow> = trial_rows.into_iter().flatten().collect();
    let mut cells = Vec::new();
    for &k in &cfg.k_grid {
        for &p in &cfg.p_grid {
            let sel: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.k == k && (r.p_or_snr - p).abs() < 1e-12)
                .collect();
            let successes = sel
                .iter()
                .filter(|r| r.converged && r.rel_frob_err < SUCCESS_REL_ERR)
                .count();
            cells.push(CellAggregate {
                method: "manm".into(),
                x: p,
                k,
                trials: sel.len(),
                success_rate: Some(successes as f64 / sel.len().max(1) as f64),
                mean_solve_ms: Some(mean(sel.iter().map(|r| r.wall_ms))),
                ..Default::default()
            });
        }
    }
    Ok(ExperimentRecord {
        config: cfg.clone(),
        solver_tolerance: cfg.solver.tolerance,
        solver_max_iterations: cfg.solver.max_iterations,
        success_threshold: SUCCESS_REL_ERR,
        rows,
        cells,
        data_hashes: Vec::new(),
        scatter: Vec::new(),
        truth_scatter: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Denoising MSE vs the theoretical bound
// ---------------------------------------------------------------------------

pub fn run_denoise_mse(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    if cfg.snr_grid.is_empty() {
        return Err(BenchError::Config("denoise-mse needs an SNR grid".into()));
    }
    let geom = cfg.geom();
    let min_sep = cfg.min_sep();
    let solver = cfg.solver.clone();
    let snr_grid = cfg.snr_grid.clone();
    let scheme = cfg.amp_scheme();

    struct DenoiseTrial {
        rows: Vec<TrialRow>,
        err_sqs: Vec<f64>,
        bounds: Vec<f64>,
        hyp_ok: Vec<bool>,
        per_trial_bound_ok: Vec<bool>,
    }

    let results = run_parallel(cfg.threads, cfg.trials, |trial| {
        let mut rows = Vec::new();
        let mut err_sqs = Vec::new();
        let mut bounds = Vec::new();
        let mut hyp_ok = Vec::new();
        let mut per_trial_bound_ok = Vec::new();
        for (cell, &snr) in snr_grid.iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, cell_stream(cell as u32 + 1, trial as u32));
            let model = sample_model(cfg.k, min_sep, scheme, &mut rng).expect("separation");
            let x_sharp = synthesize(&model, &geom);
            let sigma = snr_db_to_sigma(snr);
            let y = add_noise(&x_sharp, sigma, &mut rng).unwrap();
            let w = &y - &x_sharp;
            let lambda = cfg.lambda_rule.resolve(cfg.m, cfg.n, sigma);
            let t0 = Instant::now();
            let res = manm::denoise(&y, lambda, &solver).expect("denoise");
            let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
            let err_sq = frob(&(&res.x_hat - &x_sharp)).powi(2);
            let x_norm_a = atomic_norm(&x_sharp, &solver).expect("norm").value;
            let bound = manm::error_bound(x_norm_a, lambda);
            let (w_dual, _) = dual_atomic_norm(&w);
            let hypothesis = w_dual <= lambda;
            err_sqs.push(err_sq);
            bounds.push(bound);
            hyp_ok.push(hypothesis);
            per_trial_bound_ok.push(!hypothesis || err_sq <= bound * (1.0 + 1e-9));
            rows.push(TrialRow {
                trial_id: trial,
                seed: cfg.seed,
                method: "manm".into(),
                m: cfg.m,
                n: cfg.n,
                k: cfg.k,
                p_or_snr: snr,
                rel_frob_err: err_sq.sqrt() / frob(&x_sharp),
                freq_mse: f64::NAN,
                pairing_ok: true,
                wall_ms,
                iters: res.diagnostics.iterations,
                converged: res.diagnostics.converged,
            });
        }
        DenoiseTrial {
            rows,
            err_sqs,
            bounds,
            hyp_ok,
            per_trial_bound_ok,
        }
    });

    let mut rows = Vec::new();
    let mut cell_mse = vec![Vec::new(); snr_grid.len()];
    let mut cell_bound = vec![Vec::new(); snr_grid.len()];
    let mut cell_hyp = vec![0usize; snr_grid.len()];
    let mut cell_viol = vec![0usize; snr_grid.len()];
    for tr in results {
        for (cell, row) in tr.rows.into_iter().enumerate() {
            rows.push(row);
            cell_mse[cell].push(tr.err_sqs[cell]);
            cell_bound[cell].push(tr.bounds[cell]);
            if tr.hyp_ok[cell] {
                cell_hyp[cell] += 1;
                if !tr.per_trial_bound_ok[cell] {
                    cell_viol[cell] += 1;
                }
            }
        }
    }
    let mut cells = Vec::new();
    for (cell, &snr) in snr_grid.iter().enumerate() {
        let sel: Vec<&TrialRow> = rows
            .iter()
            .filter(|r| (r.p_or_snr - snr).abs() < 1e-12)
            .collect();
        cells.push(CellAggregate {
            method: "manm".into(),
            x: snr,
            k: cfg.k,
            trials: sel.len(),
            mean_data_mse: Some(mean(cell_mse[cell].iter().copied())),
            mse_bound: Some(mean(cell_bound[cell].iter().copied())),
            bound_hypothesis_trials: Some(cell_hyp[cell]),
            per_trial_bound_violations: Some(cell_viol[cell]),
            mean_solve_ms: Some(mean(sel.iter().map(|r| r.wall_ms))),
            ..Default::default()
        });
    }
    Ok(ExperimentRecord {
        config: cfg.clone(),
        solver_tolerance: cfg.solver.tolerance,
        solver_max_iterations: cfg.solver.max_iterations,
        success_threshold: SUCCESS_REL_ERR,
        rows,
        cells,
        data_hashes: Vec::new(),
        scatter: Vec::new(),
        truth_scatter: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Frequency MSE vs CRB
// ---------------------------------------------------------------------------

pub fn run_freq_mse(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    if cfg.snr_grid.is_empty() {
        return Err(BenchError::Config("freq-mse needs an SNR grid".into()));
    }
    let geom = cfg.geom();
    let min_sep = cfg.min_sep();
    let solver = cfg.solver.clone();
    let snr_grid = cfg.snr_grid.clone();
    let scheme = cfg.amp_scheme();

    let results = run_parallel(cfg.threads, cfg.trials, |trial| {
        let mut rows = Vec::new();
        let mut crbs = Vec::new();
        // Common random numbers across the SNR grid: one model and one
        // unit-variance noise draw per trial, scaled per cell, so the
        // per-trial error trend in SNR is paired rather than resampled.
        let mut rng = stream_rng(cfg.seed, cell_stream(0, trial as u32));
        let model = sample_model(cfg.k, min_sep, scheme, &mut rng).expect("separation");
        let x_sharp = synthesize(&model, &geom);
        let w_unit = add_noise(&CMat::zeros((cfg.m, cfg.n)), 1.0, &mut rng).unwrap();
        for &snr in snr_grid.iter() {
            let sigma = snr_db_to_sigma(snr);
            let y = &x_sharp + &w_unit.map(|v| v * sigma);
            let lambda = cfg.lambda_rule.resolve(cfg.m, cfg.n, sigma);
            let t0 = Instant::now();
            let res = manm::denoise(&y, lambda, &solver).expect("denoise");
            let est = manm_extract(&res.u, &res.v, &res.x_hat, cfg.k);
            let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
            let (mse, ok) = match est {
                Some(e) => match frequency_mse(&e, &model) {
                    Ok(v) => (v, true),
                    Err(_) => (f64::NAN, false),
                },
                None => (f64::NAN, false),
            };
            crbs.push(crb(&model, sigma, &geom).unwrap_or(f64::NAN));
            rows.push(TrialRow {
                trial_id: trial,
                seed: cfg.seed,
                method: "manm".into(),
                m: cfg.m,
                n: cfg.n,
                k: cfg.k,
                p_or_snr: snr,
                rel_frob_err: frob(&(&res.x_hat - &x_sharp)) / frob(&x_sharp),
                freq_mse: mse,
                pairing_ok: ok,
                wall_ms,
                iters: res.diagnostics.iterations,
                converged: res.diagnostics.converged,
            });
        }
        (rows, crbs)
    });

    let mut rows = Vec::new();
    let mut cell_crb = vec![Vec::new(); snr_grid.len()];
    for (trial_rows, crbs) in results {
        for (cell, row) in trial_rows.into_iter().enumerate() {
            rows.push(row);
            cell_crb[cell].push(crbs[cell]);
        }
    }
    let mut cells = Vec::new();
    for (cell, &snr) in snr_grid.iter().enumerate() {
        let sel: Vec<&TrialRow> = rows
            .iter()
            .filter(|r| (r.p_or_snr - snr).abs() < 1e-12)
            .collect();
        let ok_rows: Vec<&&TrialRow> = sel.iter().filter(|r| r.pairing_ok).collect();
        cells.push(CellAggregate {
            method: "manm".into(),
            x: snr,
            k: cfg.k,
            trials: sel.len(),
            mean_freq_mse: Some(mean(ok_rows.iter().map(|r| r.freq_mse))),
            crb: Some(mean(cell_crb[cell].iter().copied().filter(|v| v.is_finite()))),
            pairing_failures: Some(sel.len() - ok_rows.len()),
            mean_solve_ms: Some(mean(sel.iter().map(|r| r.wall_ms))),
            ..Default::default()
        });
    }
    Ok(ExperimentRecord {
        config: cfg.clone(),
        solver_tolerance: cfg.solver.tolerance,
        solver_max_iterations: cfg.solver.max_iterations,
        success_threshold: SUCCESS_REL_ERR,
        rows,
        cells,
        data_hashes: Vec::new(),
        scatter: Vec::new(),
        truth_scatter: Vec::new(),
    })
}

/// MANM extraction pipeline: Toeplitz Vandermonde + correlation pairing.
fn manm_extract(
    u: &[num_complex::Complex64],
    v: &[num_complex::Complex64],
    x_hat: &CMat,
    k: usize,
) -> Option<FrequencyEstimate> {
    let axes = extract_from_toeplitz(u, v, Some(k), 1e-6).ok()?;
    pair_frequencies(
        x_hat,
        &axes.fx,
        &axes.fy,
        &axes.powers_x,
        &axes.powers_y,
        PairingStrategy::Greedy,
    )
    .ok()
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    if cfg.snr_grid.is_empty() || cfg.methods.is_empty() {
        return Err(BenchError::Config("compare needs SNR grid and methods".into()));
    }
    let geom = cfg.geom();
    let min_sep = cfg.min_sep();
    let solver = cfg.solver.clone();
    let vanm_solver = cfg.vanm_solver.clone();
    let snr_grid = cfg.snr_grid.clone();
    let methods = cfg.methods.clone();
    let fixed_freqs = cfg.freqs.clone();
    let scheme = cfg.amp_scheme();
    let mn_sqrt = (geom.size() as f64).sqrt();

    struct CompareTrial {
        rows: Vec<TrialRow>,
        hash: u64,
        scatter: Vec<ScatterPoint>,
    }

    let results = run_parallel(cfg.threads, cfg.trials, |trial| {
        let mut rows = Vec::new();
        let mut hash = 0u64;
        let mut scatter = Vec::new();
        for (cell, &snr) in snr_grid.iter().enumerate() {
            let mut rng = stream_rng(cfg.seed, cell_stream(cell as u32 + 1, trial as u32));
            // Shared per-trial data across all methods.
            let model = match &fixed_freqs {
                Some(pts) => {
                    let comps = pts
                        .iter()
                        .map(|&(fx, fy)| {
                            (
                                crate::model::sample_amplitude(scheme, &mut rng),
                                FrequencyPair::wrapped(fx, fy),
                            )
                        })
                        .collect();
                    SpectralModel::new(comps).unwrap()
                }
                None => sample_model(cfg.k, min_sep, scheme, &mut rng).expect("separation"),
            };
            let k = model.k();
            let x_sharp = synthesize(&model, &geom);
            let sigma = snr_db_to_sigma(snr);
            let y = add_noise(&x_sharp, sigma, &mut rng).unwrap();
            hash = fnv1a_matrix(&y);
            let lambda = cfg.lambda_rule.resolve(cfg.m, cfg.n, sigma);
            for method in &methods {
                let t0 = Instant::now();
                let (est, rel_err, iters, converged): (
                    Option<FrequencyEstimate>,
                    f64,
                    usize,
                    bool,
                ) = match method {
                    Method::Manm => {
                        let res = manm::denoise(&y, lambda, &solver).expect("denoise");
                        let rel = frob(&(&res.x_hat - &x_sharp)) / frob(&x_sharp);
                        (
                            manm_extract(&res.u, &res.v, &res.x_hat, k),
                            rel,
                            res.diagnostics.iterations,
                            res.diagnostics.converged,
                        )
                    }
                    Method::Vanm => {
                        // Normalization-matched regularization for the
                        // vectorized atom set.
                        let res = vanm_denoise(&y, lambda / mn_sqrt, &vanm_solver)
                            .expect("vanm denoise");
                        let xm = res.x_hat_matrix();
                        let rel = frob(&(&xm - &x_sharp)) / frob(&x_sharp);
                        let est = matrix_pencil_2d(
                            &xm,
                            k,
                            cfg.m.div_ceil(2),
                            cfg.n.div_ceil(2),
                        )
                        .ok();
                        (est, rel, res.diagnostics.iterations, res.diagnostics.converged)
                    }
                    Method::Bp(g) => {
                        let dict = GridDictionary::new(*g, *g, &geom);
                        let mu = default_mu(&dict, sigma);
                        let res = bp_solve(&y, &dict, mu, 2000, 1e-8).expect("bp");
                        let freqs = bp_top_k(&res, &dict, k);
                        let est = FrequencyEstimate {
                            pairs: freqs,
                            powers_x: vec![1.0; k],
                            powers_y: vec![1.0; k],
                            pairing_scores: vec![1.0; k],
                        };
                        let xm = dict.apply(&res.coefficients);
                        let rel = frob(&(&xm - &x_sharp)) / frob(&x_sharp);
                        (Some(est), rel, res.iterations, res.converged)
                    }
                    Method::Omp(g) => {
                        let dict = GridDictionary::new(*g, *g, &geom);
                        match omp_solve(&y, &dict, k) {
                            Ok(res) => {
                                let est = FrequencyEstimate {
                                    pairs: res.freqs.clone(),
                                    powers_x: res.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
                                    powers_y: res.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
                                    pairing_scores: res
                                        .amplitudes
                                        .iter()
                                        .map(|a| a.norm())
                                        .collect(),
                                };
                                // residual-based reconstruction error
                                let rel = res.residual_norms.last().copied().unwrap_or(f64::NAN)
                                    / frob(&x_sharp);
                                (Some(est), rel, k, true)
                            }
                            Err(_) => (None, f64::NAN, 0, false),
                        }
                    }
                };
                let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
                let (mse, ok) = match &est {
                    Some(e) => match frequency_mse(e, &model) {
                        Ok(v) => (v, true),
                        Err(_) => (f64::NAN, false),
                    },
                    None => (f64::NAN, false),
                };
                if let Some(e) = &est {
                    if trial < 50 {
                        for p in &e.pairs {
                            scatter.push(ScatterPoint {
                                method: method.to_string(),
                                fx: p.fx,
                                fy: p.fy,
                            });
                        }
                    }
                }
                rows.push(TrialRow {
                    trial_id: trial,
                    seed: cfg.seed,
                    method: method.to_string(),
                    m: cfg.m,
                    n: cfg.n,
                    k,
                    p_or_snr: snr,
                    rel_frob_err: rel_err,
                    freq_mse: mse,
                    pairing_ok: ok,
                    wall_ms,
                    iters,
                    converged,
                });
            }
        }
        CompareTrial {
            rows,
            hash,
            scatter,
        }
    });

    let mut rows = Vec::new();
    let mut data_hashes = Vec::new();
    let mut scatter = Vec::new();
    for tr in results {
        rows.extend(tr.rows);
        data_hashes.push(tr.hash);
        scatter.extend(tr.scatter);
    }
    let mut cells = Vec::new();
    for &snr in &snr_grid {
        for method in &methods {
            let name = method.to_string();
            let sel: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.method == name && (r.p_or_snr - snr).abs() < 1e-12)
                .collect();
            let ok_rows: Vec<&&TrialRow> = sel.iter().filter(|r| r.pairing_ok).collect();
            cells.push(CellAggregate {
                method: name.clone(),
                x: snr,
                k: cfg.k,
                trials: sel.len(),
                mean_freq_mse: Some(mean(ok_rows.iter().map(|r| r.freq_mse))),
                pairing_failures: Some(sel.len() - ok_rows.len()),
                mean_solve_ms: Some(mean(sel.iter().map(|r| r.wall_ms))),
                ..Default::default()
            });
        }
    }
    let truth_scatter = cfg
        .freqs
        .clone()
        .unwrap_or_default();
    Ok(ExperimentRecord {
        config: cfg.clone(),
        solver_tolerance: cfg.solver.tolerance,
        solver_max_iterations: cfg.solver.max_iterations,
        success_threshold: SUCCESS_REL_ERR,
        rows,
        cells,
        data_hashes,
        scatter,
        truth_scatter,
    })
}

// ---------------------------------------------------------------------------
// Runtime scaling
// ---------------------------------------------------------------------------

pub fn run_runtime_scaling(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    if cfg.m_grid.is_empty() {
        return Err(BenchError::Config("runtime needs an m grid".into()));
    }
    let snr = *cfg.snr_grid.first().unwrap_or(&6.0);
    let sigma = snr_db_to_sigma(snr);
    // Equal tolerance and iteration caps across methods; single-threaded
    // solves so timings are comparable.
    let solver = cfg.solver.clone();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (cell, &mm) in cfg.m_grid.iter().enumerate() {
        let geom = ArrayGeometry::half_wavelength(mm, mm);
        let min_sep = cfg.min_sep_factor / mm as f64;
        for trial in 0..cfg.trials {
            let mut rng = stream_rng(cfg.seed, cell_stream(cell as u32 + 1, trial as u32));
            let model = sample_model(cfg.k, min_sep, cfg.amp_scheme(), &mut rng)
                .expect("separation feasible");
            let x_sharp = synthesize(&model, &geom);
            let y = add_noise(&x_sharp, sigma, &mut rng).unwrap();
            let lambda = cfg.lambda_rule.resolve(mm, mm, sigma);
            for method in &cfg.methods {
                let censored;
                let (solve_ms, pipeline_ms, iters, converged) = match method {
                    Method::Manm => {
                        let t0 = Instant::now();
                        let res = manm::denoise(&y, lambda, &solver).expect("denoise");
                        let solve_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        let _ = manm_extract(&res.u, &res.v, &res.x_hat, cfg.k);
                        let pipe_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        (solve_ms, pipe_ms, res.diagnostics.iterations, res.diagnostics.converged)
                    }
                    Method::Vanm => {
                        let t0 = Instant::now();
                        let res = vanm_denoise(&y, lambda / (geom.size() as f64).sqrt(), &solver)
                            .expect("vanm");
                        let solve_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        let _ = matrix_pencil_2d(
                            &res.x_hat_matrix(),
                            cfg.k,
                            mm.div_ceil(2),
                            mm.div_ceil(2),
                        );
                        let pipe_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        (solve_ms, pipe_ms, res.diagnostics.iterations, res.diagnostics.converged)
                    }
                    Method::Bp(g) => {
                        let dict = GridDictionary::new(*g, *g, &geom);
                        let mu = default_mu(&dict, sigma);
                        let t0 = Instant::now();
                        let res = bp_solve(&y, &dict, mu, solver.max_iterations, 1e-8)
                            .expect("bp");
                        let solve_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        (solve_ms, solve_ms, res.iterations, res.converged)
                    }
                    Method::Omp(g) => {
                        let dict = GridDictionary::new(*g, *g, &geom);
                        let t0 = Instant::now();
                        let res = omp_solve(&y, &dict, cfg.k);
                        let solve_ms = t0.elapsed().as_secs_f64() * 1000.0;
                        (solve_ms, solve_ms, cfg.k, res.is_ok())
                    }
                };
                censored = solve_ms > cfg.cell_timeout * 1000.0;
                rows.push(TrialRow {
                    trial_id: trial,
                    seed: cfg.seed,
                    method: method.to_string(),
                    m: mm,
                    n: mm,
                    k: cfg.k,
                    p_or_snr: snr,
                    rel_frob_err: f64::NAN,
                    freq_mse: f64::NAN,
                    pairing_ok: true,
                    wall_ms: solve_ms,
                    iters,
                    converged,
                });
                let block_manm = 2 * mm;
                let block_vanm = mm * mm + 1;
                let flop_ratio = (block_vanm as f64 / block_manm as f64).powi(3);
                cells.push(CellAggregate {
                    method: method.to_string(),
                    x: mm as f64,
                    k: cfg.k,
                    trials: 1,
                    mean_solve_ms: Some(solve_ms),
                    mean_pipeline_ms: Some(pipeline_ms),
                    flop_ratio_vs_manm: match method {
                        Method::Vanm => Some(flop_ratio),
                        _ => None,
                    },
                    censored: Some(censored),
                    ..Default::default()
                });
            }
        }
    }
    Ok(ExperimentRecord {
        config: cfg.clone(),
        solver_tolerance: cfg.solver.tolerance,
        solver_max_iterations: cfg.solver.max_iterations,
        success_threshold: SUCCESS_REL_ERR,
        rows,
        cells,
        data_hashes: Vec::new(),
        scatter: Vec::new(),
        truth_scatter: Vec::new(),
    })
}

/// Dispatches on the configured kind.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentRecord, BenchError> {
    match cfg.kind {
        ExperimentKind::PhaseTransition => run_phase_transition(cfg),
        ExperimentKind::DenoiseMse => run_denoise_mse(cfg),
        ExperimentKind::FreqMse => run_freq_mse(cfg),
        ExperimentKind::Compare => run_comparison(cfg),
        ExperimentKind::Runtime => run_runtime_scaling(cfg),
    }
}

fn mean(vals: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in vals {
        if v.is_finite() {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

impl ExperimentRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        let mut csv = std::fs::File::create(dir.join("record.csv"))?;
        csv.write_all(self.to_csv().as_bytes())?;
        let summary = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("summary.json"), summary)?;
        for (name, svg) in emit_plots(self)? {
            std::fs::write(dir.join(name), svg)?;
        }
        Ok(())
    }
}

/// Renders one SVG per figure class for the record's kind.
pub fn emit_plots(record: &ExperimentRecord) -> Result<Vec<(String, String)>, BenchError> {
    use svg::{Plot, Series, PALETTE};
    if record.cells.is_empty() {
        return Err(BenchError::MissingAggregates("no cells".into()));
    }
    let mut out = Vec::new();
    match record.config.kind {
        ExperimentKind::PhaseTransition => {
            let mut series = Vec::new();
            for (i, &k) in record.config.k_grid.iter().enumerate() {
                let pts: Vec<(f64, f64)> = record
                    .cells
                    .iter()
                    .filter(|c| c.k == k)
                    .map(|c| (c.x, c.success_rate.unwrap_or(f64::NAN)))
                    .collect();
                series.push(Series {
                    label: format!("K={k}"),
                    points: pts,
                    color: PALETTE[i % PALETTE.len()].into(),
                    line: true,
                    markers: true,
                });
            }
            let plot = Plot {
                title: format!(
                    "Completion success rate vs observation fraction (M=N={})",
                    record.config.m
                ),
                x_label: "observation fraction p".into(),
                y_label: "success rate".into(),
                log_y: false,
                series,
            };
            out.push(("phase_transition.svg".to_string(), plot.render()));
        }
        ExperimentKind::DenoiseMse => {
            let mse: Vec<(f64, f64)> = record
                .cells
                .iter()
                .map(|c| (c.x, c.mean_data_mse.unwrap_or(f64::NAN)))
                .collect();
            let bound: Vec<(f64, f64)> = record
                .cells
                .iter()
                .map(|c| (c.x, c.mse_bound.unwrap_or(f64::NAN)))
                .collect();
            let plot = Plot {
                title: format!(
                    "Denoising MSE and bound (M=N={}, K={})",
                    record.config.m, record.config.k
                ),
                x_label: "SNR (dB)".into(),
                y_label: "relative MSE / bound".into(),
                log_y: true,
                series: vec![
                    Series {
                        label: "mean MSE".into(),
                        points: mse,
                        color: PALETTE[0].into(),
                        line: true,
                        markers: true,
                    },
                    Series {
                        label: "bound".into(),
                        points: bound,
                        color: PALETTE[1].into(),
                        line: true,
                        markers: true,
                    },
                ],
            };
            out.push(("denoise_mse.svg".to_string(), plot.render()));
        }
        ExperimentKind::FreqMse => {
            let mse: Vec<(f64, f64)> = record
                .cells
                .iter()
                .map(|c| (c.x, c.mean_freq_mse.unwrap_or(f64::NAN)))
                .collect();
            let crb_pts: Vec<(f64, f64)> = record
                .cells
                .iter()
                .map(|c| (c.x, c.crb.unwrap_or(f64::NAN)))
                .collect();
            let plot = Plot {
                title: format!(
                    "2D-frequency MSE and CRB (M=N={}, K={})",
                    record.config.m, record.config.k
                ),
                x_label: "SNR (dB)".into(),
                y_label: "frequency MSE".into(),
                log_y: true,
                series: vec![
                    Series {
                        label: "frequency MSE".into(),
                        points: mse,
                        color: PALETTE[0].into(),
                        line: true,
                        markers: true,
                    },
                    Series {
                        label: "CRB".into(),
                        points: crb_pts,
                        color: PALETTE[1].into(),
                        line: true,
                        markers: true,
                    },
                ],
            };
            out.push(("freq_mse.svg".to_string(), plot.render()));
        }
        ExperimentKind::Compare => {
            let mut series = Vec::new();
            for (i, method) in record.config.methods.iter().enumerate() {
                let name = method.to_string();
                let pts: Vec<(f64, f64)> = record
                    .cells
                    .iter()
                    .filter(|c| c.method == name)
                    .map(|c| (c.x, c.mean_freq_mse.unwrap_or(f64::NAN)))
                    .collect();
                series.push(Series {
                    label: name,
                    points: pts,
                    color: PALETTE[i % PALETTE.len()].into(),
                    line: true,
                    markers: true,
                });
            }
            let plot = Plot {
                title: format!(
                    "Frequency MSE by method (M=N={}, K={})",
                    record.config.m, record.config.k
                ),
                x_label: "SNR (dB)".into(),
                y_label: "frequency MSE".into(),
                log_y: true,
                series,
            };
            out.push(("compare_mse.svg".to_string(), plot.render()));
            // Scatter of estimated pairs with the true pairs overlaid.
            let mut series = Vec::new();
            for (i, method) in record.config.methods.iter().enumerate() {
                let name = method.to_string();
                let pts: Vec<(f64, f64)> = record
                    .scatter
                    .iter()
                    .filter(|p| p.method == name)
                    .map(|p| (p.fx, p.fy))
                    .collect();
                series.push(Series {
                    label: name,
                    points: pts,
                    color: PALETTE[i % PALETTE.len()].into(),
                    line: false,
                    markers: true,
                });
            }
            series.push(Series {
                label: "truth".into(),
                points: record.truth_scatter.clone(),
                color: "#000000".into(),
                line: false,
                markers: true,
            });
            let plot = Plot {
                title: "Estimated 2D frequencies".into(),
                x_label: "fx".into(),
                y_label: "fy".into(),
                log_y: false,
                series,
            };
            out.push(("compare_scatter.svg".to_string(), plot.render()));
        }
        ExperimentKind::Runtime => {
            let mut series = Vec::new();
            for (i, method) in record.config.methods.iter().enumerate() {
                let name = method.to_string();
                let pts: Vec<(f64, f64)> = record
                    .cells
                    .iter()
                    .filter(|c| c.method == name)
                    .map(|c| (c.x, c.mean_solve_ms.unwrap_or(f64::NAN)))
                    .collect();
                series.push(Series {
                    label: name,
                    points: pts,
                    color: PALETTE[i % PALETTE.len()].into(),
                    line: true,
                    markers: true,
                });
            }
            let plot = Plot {
                title: "Solve time vs array dimension".into(),
                x_label: "M (= N)".into(),
                y_label: "wall time (ms)".into(),
                log_y: true,
                series,
            };
            out.push(("runtime.svg".to_string(), plot.render()));
        }
    }
    Ok(out)
}
