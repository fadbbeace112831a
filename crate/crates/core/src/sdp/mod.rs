//! Structure-exploiting first-order conic solver for the three SDP families:
//! matrix-atomic-norm completion/denoising over the (M+N) block, vectorized
//! atomic norm over the (MN+1) two-level Toeplitz block, and the bounded
//! trigonometric-polynomial LMI feasibility system.

mod admm;

use crate::linalg::TwoLevelToeplitz;
use crate::model::{CMat, CVec, ObservationMask};
use serde::Serialize;
use thiserror::Error;

pub use admm::solve;

/// Hard cap on the vectorized block size MN + 1.
pub const VANM_BLOCK_LIMIT: usize = 1025;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SolverError {
    #[error("mask does not match data dimensions")]
    MaskMismatch,
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("vectorized block size {0} exceeds the cap {VANM_BLOCK_LIMIT}")]
    BlockTooLarge(usize),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// ADMM configuration; residuals are relative.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rho: f64,
    pub over_relaxation: f64,
    pub adaptive_rho: bool,
    /// Record per-iteration diagnostics every k iterations when set.
    pub diagnostics_every: Option<usize>,
    /// Exit early (flagged non-converged) when the best residual score has
    /// improved by less than `stall_improvement` over this many iterations.
    /// 0 disables stall detection.
    pub stall_iters: usize,
    pub stall_improvement: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 100_000,
            rho: 1.0,
            over_relaxation: 1.6,
            adaptive_rho: true,
            diagnostics_every: None,
            stall_iters: 1500,
            stall_improvement: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0) {
            return Err(SolverError::BadConfig("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::BadConfig("max_iterations must be >= 1".into()));
        }
        if !(1.0..=1.8).contains(&self.over_relaxation) {
            return Err(SolverError::BadConfig(
                "over_relaxation must lie in [1.0, 1.8]".into(),
            ));
        }
        if !(self.rho > 0.0) {
            return Err(SolverError::BadConfig("rho must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }
}

/// One of the supported conic programs.
#[derive(Debug, Clone)]
pub enum SdpProblem {
    /// min Tr(T(u))/2M + Tr(T(v))/2N s.t. block PSD, X pinned on the mask.
    ManmCompletion { x_obs: CMat, mask: ObservationMask },
    /// min 0.5||Y-X||^2 + lambda (Tr(T(u))/2M + Tr(T(v))/2N) s.t. block PSD.
    ManmDenoise { y: CMat, lambda: f64 },
    /// min (t + Tr(T2(G)))/2 s.t. vectorized block PSD, x pinned on the mask.
    VanmCompletion { x_obs: CMat, mask: ObservationMask },
    /// min 0.5||y-x||^2 + lambda (t + Tr(T2(G)))/2 s.t. vectorized block PSD.
    VanmDenoise { y: CMat, lambda: f64 },
    /// Existence of Hermitian P, Q with unit-delta diagonal sums such that
    /// [[Q, Z/gamma],[Z^H/gamma, P]] is PSD.
    DualNormFeasibility { z: CMat, gamma: f64 },
}

impl SdpProblem {
    pub fn psd_block_size(&self) -> usize {
        match self {
            SdpProblem::ManmCompletion { x_obs, .. } => x_obs.nrows() + x_obs.ncols(),
            SdpProblem::ManmDenoise { y, .. } => y.nrows() + y.ncols(),
            SdpProblem::VanmCompletion { x_obs, .. } => x_obs.len() + 1,
            SdpProblem::VanmDenoise { y, .. } => y.len() + 1,
            SdpProblem::DualNormFeasibility { z, .. } => z.nrows() + z.ncols(),
        }
    }
}

/// Per-iteration diagnostics, streamable as JSON lines.
#[derive(Debug, Clone, Serialize)]
pub struct IterDiag {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
    pub best_objective: f64,
    pub rho: f64,
}

/// Solver unknowns at the returned iterate.
#[derive(Debug, Clone)]
pub enum SdpUnknowns {
    Manm { u: CVec, v: CVec, x_hat: CMat },
    Vanm {
        generator: TwoLevelToeplitz,
        t: f64,
        x_hat: CVec,
    },
    Feasibility { q: CMat, p: CMat },
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub unknowns: SdpUnknowns,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub psd_block_size: usize,
    pub trace: Vec<IterDiag>,
}

impl SdpSolution {
    pub fn manm_unknowns(&self) -> (&CVec, &CVec, &CMat) {
        match &self.unknowns {
            SdpUnknowns::Manm { u, v, x_hat } => (u, v, x_hat),
            _ => panic!("expected MANM unknowns"),
        }
    }

    pub fn vanm_unknowns(&self) -> (&TwoLevelToeplitz, f64, &CVec) {
        match &self.unknowns {
            SdpUnknowns::Vanm { generator, t, x_hat } => (generator, *t, x_hat),
            _ => panic!("expected VANM unknowns"),
        }
    }
}

/// Completion SDP over the (M+N) block with observed entries pinned.
pub fn build_manm_completion(
    x_obs: &CMat,
    mask: &ObservationMask,
) -> Result<SdpProblem, SolverError> {
    if mask.m != x_obs.nrows() || mask.n != x_obs.ncols() {
        return Err(SolverError::MaskMismatch);
    }
    Ok(SdpProblem::ManmCompletion {
        x_obs: x_obs.clone(),
        mask: mask.clone(),
    })
}

/// Denoising SDP over the (M+N) block.
pub fn build_manm_denoise(y: &CMat, lambda: f64) -> Result<SdpProblem, SolverError> {
    if lambda < 0.0 {
        return Err(SolverError::NegativeLambda(lambda));
    }
    Ok(SdpProblem::ManmDenoise {
        y: y.clone(),
        lambda,
    })
}

/// Vectorized completion SDP over the (MN+1) block.
pub fn build_vanm_completion(
    x_obs: &CMat,
    mask: &ObservationMask,
) -> Result<SdpProblem, SolverError> {
    if mask.m != x_obs.nrows() || mask.n != x_obs.ncols() {
        return Err(SolverError::MaskMismatch);
    }
    let block = x_obs.len() + 1;
    if block > VANM_BLOCK_LIMIT {
        return Err(SolverError::BlockTooLarge(block));
    }
    Ok(SdpProblem::VanmCompletion {
        x_obs: x_obs.clone(),
        mask: mask.clone(),
    })
}

/// Vectorized denoising SDP over the (MN+1) block.
pub fn build_vanm_denoise(y: &CMat, lambda: f64) -> Result<SdpProblem, SolverError> {
    if lambda < 0.0 {
        return Err(SolverError::NegativeLambda(lambda));
    }
    let block = y.len() + 1;
    if block > VANM_BLOCK_LIMIT {
        return Err(SolverError::BlockTooLarge(block));
    }
    Ok(SdpProblem::VanmDenoise {
        y: y.clone(),
        lambda,
    })
}
