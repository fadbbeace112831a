//! Command-line interface: data synthesis, completion, denoising, frequency
//! extraction, and the benchmark studies.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use manm2d::bench::{
    self, ExperimentConfig, ExperimentKind, LambdaRule, Method,
};
use manm2d::extract::{extract_from_toeplitz, pair_frequencies, PairingStrategy};
use manm2d::manm;
use manm2d::model::{
    add_noise, sample_mask, sample_model, snr_db_to_sigma, synthesize, AmplitudeScheme,
    ArrayGeometry, CMat, MaskJson, MatrixJson, ModelJson, ObservationMask,
};
use manm2d::rng::stream_rng;
use manm2d::sdp::SolverConfig;
use manm2d::vanm;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "manm2d", version, about = "Gridless 2D line-spectral estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth model, noiseless/noisy data, and a mask.
    Synth(SynthArgs),
    /// Recover the full data matrix from masked observations.
    Complete(CompleteArgs),
    /// Denoise a fully observed matrix.
    Denoise(DenoiseArgs),
    /// Extract and pair 2D frequencies from a solver result.
    Extract(ExtractArgs),
    /// Benchmark studies with CSV/JSON records and SVG plots.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Minimum wrap separation; defaults to 1.19 / max(m, n).
    #[arg(long)]
    min_sep: Option<f64>,
    /// SNR in dB (= 1/sigma^2); when set, writes noisy.json as well.
    #[arg(long)]
    snr: Option<f64>,
    /// Observation fraction; when set, writes mask.json and masked.json.
    #[arg(long)]
    p: Option<f64>,
    /// Unit-modulus random-phase amplitudes instead of complex Gaussian.
    #[arg(long, default_value_t = false)]
    unit_amps: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompleteArgs {
    /// Data matrix JSON (entries outside the mask are ignored).
    #[arg(long)]
    data: PathBuf,
    /// Observation mask JSON.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value = "manm")]
    method: String,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Stream solver diagnostics as JSON lines every k iterations.
    #[arg(long)]
    verbose_every: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    data: PathBuf,
    /// Regularization: "theory", "practical", or an explicit value.
    #[arg(long, default_value = "practical")]
    lambda: String,
    /// Noise standard deviation, needed by the theory/practical rules.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "manm")]
    method: String,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long)]
    verbose_every: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// result.json produced by `complete` or `denoise`.
    #[arg(long)]
    result: PathBuf,
    /// Number of components; inferred by the spectrum gap heuristic if absent.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Completion success rate over sparsity and observation fraction.
    PhaseTransition(BenchArgs),
    /// Denoising MSE against the theoretical bound over SNR.
    DenoiseMse(BenchArgs),
    /// 2D-frequency MSE against the CRB over SNR.
    FreqMse(BenchArgs),
    /// Cross-method frequency MSE comparison.
    Compare(BenchArgs),
    /// Solve-time scaling with array dimension.
    Runtime(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long)]
    snr: Option<String>,
    /// Comma-separated observation fractions.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated K grid (phase transition).
    #[arg(long)]
    k_grid: Option<String>,
    /// Comma-separated array dimensions (runtime).
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// theory | practical | explicit value.
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated methods: manm, vanm, bp:<grid>, omp:<grid>.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Solver result interchange format consumed by `extract`.
#[derive(Serialize, Deserialize)]
struct ResultJson {
    method: String,
    objective: f64,
    converged: bool,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    wall_time: f64,
    x_hat: MatrixJson,
    u: Vec<[f64; 2]>,
    v: Vec<[f64; 2]>,
}

fn read_json<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Complete(args) => complete(args),
        Command::Denoise(args) => denoise(args),
        Command::Extract(args) => extract(args),
        Command::Bench(cmd) => bench_cmd(cmd),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let geom = ArrayGeometry::half_wavelength(args.m, args.n);
    let min_sep = args
        .min_sep
        .unwrap_or(1.19 / args.m.max(args.n) as f64);
    let scheme = if args.unit_amps {
        AmplitudeScheme::UnitModulusRandomPhase
    } else {
        AmplitudeScheme::ComplexGaussian
    };
    let mut rng = stream_rng(args.seed, 0);
    let model = sample_model(args.k, min_sep, scheme, &mut rng)?;
    let x = synthesize(&model, &geom);
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("model.json"), &ModelJson::from(&model))?;
    write_json(&args.out.join("data.json"), &MatrixJson::from(&x))?;
    if let Some(snr) = args.snr {
        let sigma = snr_db_to_sigma(snr);
        let y = add_noise(&x, sigma, &mut rng)?;
        write_json(&args.out.join("noisy.json"), &MatrixJson::from(&y))?;
        println!("sigma = {sigma}");
    }
    if let Some(p) = args.p {
        let count = ((p * geom.size() as f64).round() as usize).clamp(1, geom.size());
        let mask = sample_mask(&geom, count, &mut rng)?;
        let mut masked = x.clone();
        for i in 0..args.m {
            for j in 0..args.n {
                if !mask.contains(i, j) {
                    masked[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        write_json(&args.out.join("mask.json"), &MaskJson::from(&mask))?;
        write_json(&args.out.join("masked.json"), &MatrixJson::from(&masked))?;
    }
    println!("wrote model/data files to {}", args.out.display());
    Ok(())
}

fn solver_config(tol: f64, max_iters: usize, verbose: Option<usize>) -> SolverConfig {
    SolverConfig {
        tolerance: tol,
        max_iterations: max_iters,
        diagnostics_every: verbose,
        ..SolverConfig::default()
    }
}

fn print_trace(sol: &manm2d::sdp::SdpSolution) {
    for d in &sol.trace {
        println!("{}", serde_json::to_string(d).expect("diag serializes"));
    }
}

fn complete(args: CompleteArgs) -> Result<()> {
    let data: MatrixJson = read_json(&args.data)?;
    let mask_json: MaskJson = read_json(&args.mask)?;
    let x_obs = CMat::from(&data);
    let mask = ObservationMask::try_from(&mask_json)?;
    let cfg = solver_config(args.tol, args.max_iters, args.verbose_every);
    let result = match args.method.as_str() {
        "manm" => {
            let res = manm::complete(&x_obs, &mask, &cfg)?;
            print_trace(&res.diagnostics);
            ResultJson {
                method: "manm".into(),
                objective: res.objective,
                converged: res.diagnostics.converged,
                iterations: res.diagnostics.iterations,
                primal_residual: res.diagnostics.primal_residual,
                dual_residual: res.diagnostics.dual_residual,
                wall_time: res.diagnostics.wall_time,
                x_hat: MatrixJson::from(&res.x_hat),
                u: res.u.iter().map(|c| [c.re, c.im]).collect(),
                v: res.v.iter().map(|c| [c.re, c.im]).collect(),
            }
        }
        "vanm" => {
            let res = vanm::vanm_complete(&x_obs, &mask, &cfg)?;
            print_trace(&res.diagnostics);
            let xm = res.x_hat_matrix();
            ResultJson {
                method: "vanm".into(),
                objective: res.objective,
                converged: res.diagnostics.converged,
                iterations: res.diagnostics.iterations,
                primal_residual: res.diagnostics.primal_residual,
                dual_residual: res.diagnostics.dual_residual,
                wall_time: res.diagnostics.wall_time,
                x_hat: MatrixJson::from(&xm),
                u: res.generator.marginal_x().iter().map(|c| [c.re, c.im]).collect(),
                v: res.generator.marginal_y().iter().map(|c| [c.re, c.im]).collect(),
            }
        }
        other => bail!("unknown method '{other}'"),
    };
    write_json(&args.out.join("result.json"), &result)?;
    println!(
        "objective {:.6e}, converged {}, {} iterations",
        result.objective, result.converged, result.iterations
    );
    Ok(())
}

fn denoise(args: DenoiseArgs) -> Result<()> {
    let data: MatrixJson = read_json(&args.data)?;
    let y = CMat::from(&data);
    let (m, n) = y.dim();
    let rule: LambdaRule = args
        .lambda
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    let lambda = match rule {
        LambdaRule::Fixed(v) => v,
        rule => {
            let sigma = args
                .sigma
                .ok_or_else(|| anyhow!("--sigma is required for the theory/practical rules"))?;
            rule.resolve(m, n, sigma)
        }
    };
    let cfg = solver_config(args.tol, args.max_iters, args.verbose_every);
    let result = match args.method.as_str() {
        "manm" => {
            let res = manm::denoise(&y, lambda, &cfg)?;
            print_trace(&res.diagnostics);
            ResultJson {
                method: "manm".into(),
                objective: res.objective,
                converged: res.diagnostics.converged,
                iterations: res.diagnostics.iterations,
                primal_residual: res.diagnostics.primal_residual,
                dual_residual: res.diagnostics.dual_residual,
                wall_time: res.diagnostics.wall_time,
                x_hat: MatrixJson::from(&res.x_hat),
                u: res.u.iter().map(|c| [c.re, c.im]).collect(),
                v: res.v.iter().map(|c| [c.re, c.im]).collect(),
            }
        }
        "vanm" => {
            let scaled = lambda / ((m * n) as f64).sqrt();
            let res = vanm::vanm_denoise(&y, scaled, &cfg)?;
            print_trace(&res.diagnostics);
            let xm = res.x_hat_matrix();
            ResultJson {
                method: "vanm".into(),
                objective: res.objective,
                converged: res.diagnostics.converged,
                iterations: res.diagnostics.iterations,
                primal_residual: res.diagnostics.primal_residual,
                dual_residual: res.diagnostics.dual_residual,
                wall_time: res.diagnostics.wall_time,
                x_hat: MatrixJson::from(&xm),
                u: res.generator.marginal_x().iter().map(|c| [c.re, c.im]).collect(),
                v: res.generator.marginal_y().iter().map(|c| [c.re, c.im]).collect(),
            }
        }
        other => bail!("unknown method '{other}'"),
    };
    write_json(&args.out.join("result.json"), &result)?;
    println!(
        "lambda {lambda:.6e}, objective {:.6e}, converged {}",
        result.objective, result.converged
    );
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let result: ResultJson = read_json(&args.result)?;
    let u: Vec<Complex64> = result.u.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    let v: Vec<Complex64> = result.v.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    let x_hat = CMat::from(&result.x_hat);
    let k = match args.k {
        Some(k) => Some(k),
        None => Some(manm2d::extract::estimate_order(&u)?),
    };
    let axes = extract_from_toeplitz(&u, &v, k, args.rank_tol)?;
    let est = pair_frequencies(
        &x_hat,
        &axes.fx,
        &axes.fy,
        &axes.powers_x,
        &axes.powers_y,
        PairingStrategy::Greedy,
    )?;
    write_json(&args.out.join("freqs.json"), &est)?;
    for (pair, score) in est.pairs.iter().zip(&est.pairing_scores) {
        println!("fx {:.6} fy {:.6}  correlation {:.4}", pair.fx, pair.fy, score);
    }
    Ok(())
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{t}': {e}")))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| anyhow!("bad integer '{t}': {e}")))
        .collect()
}

fn bench_cmd(cmd: BenchCommand) -> Result<()> {
    let (mut cfg, args) = match cmd {
        BenchCommand::PhaseTransition(a) => (ExperimentConfig::phase_transition(), a),
        BenchCommand::DenoiseMse(a) => (ExperimentConfig::denoise_mse(), a),
        BenchCommand::FreqMse(a) => (ExperimentConfig::freq_mse(), a),
        BenchCommand::Compare(a) => (ExperimentConfig::compare(), a),
        BenchCommand::Runtime(a) => (ExperimentConfig::runtime(), a),
    };
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(s) = &args.snr {
        cfg.snr_grid = parse_f64_list(s)?;
    }
    if let Some(s) = &args.p {
        cfg.p_grid = parse_f64_list(s)?;
    }
    if let Some(s) = &args.k_grid {
        cfg.k_grid = parse_usize_list(s)?;
    }
    if let Some(s) = &args.m_grid {
        cfg.m_grid = parse_usize_list(s)?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(l) = &args.lambda {
        cfg.lambda_rule = l.parse().map_err(|e: String| anyhow!(e))?;
    }
    if let Some(ms) = &args.methods {
        cfg.methods = ms
            .split(',')
            .map(|t| t.trim().parse::<Method>().map_err(|e| anyhow!(e)))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(tol) = args.tol {
        cfg.solver.tolerance = tol;
        cfg.vanm_solver.tolerance = tol;
    }
    if let Some(mi) = args.max_iters {
        cfg.solver.max_iterations = mi;
        cfg.vanm_solver.max_iterations = mi;
    }
    cfg.threads = args.threads;
    if cfg.kind == ExperimentKind::Runtime {
        // timings are only comparable single-threaded
        cfg.threads = 1;
    }
    let record = bench::run(&cfg)?;
    record.write_outputs(&args.out)?;
    println!(
        "wrote record.csv, summary.json, and plots to {} ({} rows)",
        args.out.display(),
        record.rows.len()
    );
    Ok(())
}
