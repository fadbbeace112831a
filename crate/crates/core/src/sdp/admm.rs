//! ADMM iteration: alternate the PSD-cone projection of the assembled block
//! with closed-form projections of the unknowns onto their structural sets
//! (Toeplitz diagonal averaging, equality pinning, quadratic prox), with
//! over-relaxation and residual-balanced adaptive rho.

use super::{IterDiag, SdpProblem, SdpSolution, SdpUnknowns, SolverConfig, SolverError};
use crate::linalg::{psd_project, TwoLevelToeplitz};
use crate::model::{CMat, CVec, ObservationMask};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::time::Instant;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

trait Structure {
    fn block_size(&self) -> usize;
    /// Closed-form argmin of f(theta) + (rho/2) ||B(theta) - w||_F^2.
    fn update(&mut self, w: &CMat, rho: f64);
    /// Write B(theta) into `block` (exactly Hermitian).
    fn assemble(&self, block: &mut CMat);
    fn objective(&self) -> f64;
    fn unknowns(&self) -> SdpUnknowns;
    /// Scale for relative residuals (data magnitude).
    fn scale(&self) -> f64;
}

// ---------------------------------------------------------------------------
// MANM: block [[T(u), X],[X^H, T(v)]]
// ---------------------------------------------------------------------------

enum ManmMode {
    Completion { x_obs: CMat, mask: ObservationMask },
    Denoise { y: CMat, lambda: f64 },
}

struct ManmState {
    m: usize,
    n: usize,
    mode: ManmMode,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    x: CMat,
    data_scale: f64,
}

impl ManmState {
    fn new(problem: &SdpProblem) -> Self {
        match problem {
            SdpProblem::ManmCompletion { x_obs, mask } => {
                let (m, n) = x_obs.dim();
                let mut x = Array2::zeros((m, n));
                for &(r, c) in mask.indices() {
                    x[(r, c)] = x_obs[(r, c)];
                }
                let data_scale = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                ManmState {
                    m,
                    n,
                    mode: ManmMode::Completion {
                        x_obs: x_obs.clone(),
                        mask: mask.clone(),
                    },
                    u: vec![ZERO; m],
                    v: vec![ZERO; n],
                    x,
                    data_scale: data_scale.max(1e-12),
                }
            }
            SdpProblem::ManmDenoise { y, lambda } => {
                let (m, n) = y.dim();
                let data_scale = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                ManmState {
                    m,
                    n,
                    mode: ManmMode::Denoise {
                        y: y.clone(),
                        lambda: *lambda,
                    },
                    u: vec![ZERO; m],
                    v: vec![ZERO; n],
                    x: y.clone(),
                    data_scale: data_scale.max(1e-12),
                }
            }
            _ => unreachable!(),
        }
    }

    fn trace_weight(&self) -> f64 {
        match &self.mode {
            ManmMode::Completion { .. } => 1.0,
            ManmMode::Denoise { lambda, .. } => *lambda,
        }
    }
}

/// Diagonal averaging of the leading principal block of `w` at `offset`,
/// returning the Toeplitz first column; the zero lag gets the linear-term
/// shift `shift` and a forced-real diagonal.
fn toeplitz_average(
    w: &CMat,
    offset: usize,
    len: usize,
    shift: f64,
    out: &mut [Complex64],
) {
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for i in 0..len - k {
            acc += w[(offset + i + k, offset + i)];
        }
        let mean = acc / (len - k) as f64;
        *slot = if k == 0 {
            Complex64::new(mean.re - shift, 0.0)
        } else {
            mean
        };
    }
}

impl Structure for ManmState {
    fn block_size(&self) -> usize {
        self.m + self.n
    }

    fn update(&mut self, w: &CMat, rho: f64) {
        let (m, n) = (self.m, self.n);
        let lam = self.trace_weight();
        toeplitz_average(w, 0, m, lam / (2.0 * rho * m as f64), &mut self.u);
        toeplitz_average(w, m, n, lam / (2.0 * rho * n as f64), &mut self.v);
        match &self.mode {
            ManmMode::Completion { x_obs, mask } => {
                for i in 0..m {
                    for j in 0..n {
                        self.x[(i, j)] = w[(i, m + j)];
                    }
                }
                for &(r, c) in mask.indices() {
                    self.x[(r, c)] = x_obs[(r, c)];
                }
            }
            ManmMode::Denoise { y, .. } => {
                let denom = 1.0 + 2.0 * rho;
                for i in 0..m {
                    for j in 0..n {
                        self.x[(i, j)] = (y[(i, j)] + 2.0 * rho * w[(i, m + j)]) / denom;
                    }
                }
            }
        }
    }

    fn assemble(&self, block: &mut CMat) {
        let (m, n) = (self.m, self.n);
        for i in 0..m {
            for j in 0..=i {
                let v = self.u[i - j];
                block[(i, j)] = v;
                block[(j, i)] = v.conj();
            }
        }
        for i in 0..n {
            for j in 0..=i {
                let v = self.v[i - j];
                block[(m + i, m + j)] = v;
                block[(m + j, m + i)] = v.conj();
            }
        }
        for i in 0..m {
            for j in 0..n {
                block[(i, m + j)] = self.x[(i, j)];
                block[(m + j, i)] = self.x[(i, j)].conj();
            }
        }
    }

    fn objective(&self) -> f64 {
        let trace_term = 0.5 * (self.u[0].re + self.v[0].re);
        match &self.mode {
            ManmMode::Completion { .. } => trace_term,
            ManmMode::Denoise { y, lambda } => {
                let fit: f64 = y
                    .iter()
                    .zip(self.x.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                0.5 * fit + lambda * trace_term
            }
        }
    }

    fn unknowns(&self) -> SdpUnknowns {
        SdpUnknowns::Manm {
            u: Array1::from_vec(self.u.clone()),
            v: Array1::from_vec(self.v.clone()),
            x_hat: self.x.clone(),
        }
    }

    fn scale(&self) -> f64 {
        self.data_scale
    }
}

// ---------------------------------------------------------------------------
// VANM: block [[T2(G), x],[x^H, t]] under column-major vectorization
// ---------------------------------------------------------------------------

enum VanmMode {
    Completion { x_obs: CVec, pinned: Vec<usize> },
    Denoise { y: CVec, lambda: f64 },
}

struct VanmState {
    m: usize,
    n: usize,
    size: usize,
    mode: VanmMode,
    gen: Array2<Complex64>, // (n, 2m-1)
    t: f64,
    x: CVec,
    data_scale: f64,
    class_count: Array2<f64>,
}

impl VanmState {
    fn new(problem: &SdpProblem) -> Self {
        let (mode, m, n, x, scale) = match problem {
            SdpProblem::VanmCompletion { x_obs, mask } => {
                let (m, n) = x_obs.dim();
                let vec_obs = crate::model::vectorize(x_obs);
                let pinned: Vec<usize> = mask
                    .indices()
                    .iter()
                    .map(|&(r, c)| c * m + r)
                    .collect();
                let mut x = Array1::zeros(m * n);
                for &idx in &pinned {
                    x[idx] = vec_obs[idx];
                }
                let scale = x.iter().map(|v: &Complex64| v.norm_sqr()).sum::<f64>().sqrt();
                (
                    VanmMode::Completion {
                        x_obs: vec_obs,
                        pinned,
                    },
                    m,
                    n,
                    x,
                    scale,
                )
            }
            SdpProblem::VanmDenoise { y, lambda } => {
                let (m, n) = y.dim();
                let vec_y = crate::model::vectorize(y);
                let scale = vec_y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                (
                    VanmMode::Denoise {
                        y: vec_y.clone(),
                        lambda: *lambda,
                    },
                    m,
                    n,
                    vec_y,
                    scale,
                )
            }
            _ => unreachable!(),
        };
        // Entries per (p, q) class on the lower block triangle.
        let mut class_count = Array2::zeros((n, 2 * m - 1));
        for p in 0..n {
            for q in -(m as isize - 1)..=(m as isize - 1) {
                if p == 0 && q < 0 {
                    continue;
                }
                let blocks = (n - p) as f64;
                let inner = (m as isize - q.abs()) as f64;
                class_count[(p, (q + m as isize - 1) as usize)] = blocks * inner;
            }
        }
        VanmState {
            m,
            n,
            size: m * n,
            mode,
            gen: Array2::zeros((n, 2 * m - 1)),
            t: 0.0,
            x,
            data_scale: scale.max(1e-12),
            class_count,
        }
    }

    fn trace_weight(&self) -> f64 {
        match &self.mode {
            VanmMode::Completion { .. } => 1.0,
            VanmMode::Denoise { lambda, .. } => *lambda,
        }
    }
}

impl Structure for VanmState {
    fn block_size(&self) -> usize {
        self.size + 1
    }

    fn update(&mut self, w: &CMat, rho: f64) {
        let (m, n, size) = (self.m, self.n, self.size);
        let lam = self.trace_weight();
        // Class sums over the lower block triangle (block row j >= block col j').
        self.gen.fill(ZERO);
        for j in 0..n {
            for j2 in 0..=j {
                let p = j - j2;
                for i in 0..m {
                    let row = j * m + i;
                    let base = j2 * m;
                    if p == 0 {
                        // within-diagonal-block: only q >= 0 (i >= i2)
                        for i2 in 0..=i {
                            let q = (i - i2) as isize;
                            self.gen[(0, (q + m as isize - 1) as usize)] += w[(row, base + i2)];
                        }
                    } else {
                        for i2 in 0..m {
                            let q = i as isize - i2 as isize;
                            self.gen[(p, (q + m as isize - 1) as usize)] += w[(row, base + i2)];
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for qi in 0..2 * m - 1 {
                let count = self.class_count[(p, qi)];
                if count > 0.0 {
                    self.gen[(p, qi)] /= count;
                }
            }
        }
        // Zero-lag: real diagonal with the linear trace shift.
        let g00 = self.gen[(0, m - 1)];
        self.gen[(0, m - 1)] = Complex64::new(g00.re - lam / (2.0 * rho), 0.0);
        // Mirror the tied p = 0 row so value() sees a consistent generator.
        for q in 1..m {
            self.gen[(0, m - 1 - q)] = self.gen[(0, m - 1 + q)].conj();
        }
        self.t = w[(size, size)].re - lam / (2.0 * rho);
        match &self.mode {
            VanmMode::Completion { x_obs, pinned } => {
                for i in 0..size {
                    self.x[i] = w[(i, size)];
                }
                for &idx in pinned {
                    self.x[idx] = x_obs[idx];
                }
            }
            VanmMode::Denoise { y, .. } => {
                let denom = 1.0 + 2.0 * rho;
                for i in 0..size {
                    self.x[i] = (y[i] + 2.0 * rho * w[(i, size)]) / denom;
                }
            }
        }
    }

    fn assemble(&self, block: &mut CMat) {
        let (m, n, size) = (self.m, self.n, self.size);
        for j in 0..n {
            for j2 in 0..=j {
                let p = j - j2;
                for i in 0..m {
                    let row = j * m + i;
                    for i2 in 0..m {
                        let col = j2 * m + i2;
                        if col > row {
                            continue;
                        }
                        let q = i as isize - i2 as isize;
                        let v = if p == 0 && q < 0 {
                            self.gen[(0, (-q + m as isize - 1) as usize)].conj()
                        } else {
                            self.gen[(p, (q + m as isize - 1) as usize)]
                        };
                        block[(row, col)] = v;
                        block[(col, row)] = v.conj();
                    }
                }
            }
        }
        for i in 0..size {
            block[(i, size)] = self.x[i];
            block[(size, i)] = self.x[i].conj();
        }
        block[(size, size)] = Complex64::new(self.t, 0.0);
    }

    fn objective(&self) -> f64 {
        let trace_term = 0.5 * (self.t + self.size as f64 * self.gen[(0, self.m - 1)].re);
        match &self.mode {
            VanmMode::Completion { .. } => trace_term,
            VanmMode::Denoise { y, lambda } => {
                let fit: f64 = y
                    .iter()
                    .zip(self.x.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                0.5 * fit + lambda * trace_term
            }
        }
    }

    fn unknowns(&self) -> SdpUnknowns {
        SdpUnknowns::Vanm {
            generator: TwoLevelToeplitz::new(self.m, self.n, self.gen.clone())
                .expect("solver generator is structurally valid"),
            t: self.t,
            x_hat: self.x.clone(),
        }
    }

    fn scale(&self) -> f64 {
        self.data_scale
    }
}

// ---------------------------------------------------------------------------
// Prop.-4 LMI feasibility: block [[Q, Z/gamma],[Z^H/gamma, P]]
// ---------------------------------------------------------------------------

struct FeasState {
    m: usize,
    n: usize,
    b: CMat, // Z / gamma, pinned
    q: CMat,
    p: CMat,
    data_scale: f64,
}

impl FeasState {
    fn new(problem: &SdpProblem) -> Self {
        match problem {
            SdpProblem::DualNormFeasibility { z, gamma } => {
                let (m, n) = z.dim();
                let b = z.map(|v| v / *gamma);
                let scale = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let mut q = Array2::zeros((m, m));
                let mut p = Array2::zeros((n, n));
                for i in 0..m {
                    q[(i, i)] = Complex64::new(1.0 / m as f64, 0.0);
                }
                for i in 0..n {
                    p[(i, i)] = Complex64::new(1.0 / n as f64, 0.0);
                }
                FeasState {
                    m,
                    n,
                    b,
                    q,
                    p,
                    data_scale: scale.max(1.0),
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Projects the leading principal block of `w` onto Hermitian matrices whose
/// k-th subdiagonal sums equal delta_k (1 at k = 0, else 0).
fn delta_trace_project(w: &CMat, offset: usize, len: usize, out: &mut CMat) {
    for i in 0..len {
        for j in 0..=i {
            let s = 0.5 * (w[(offset + i, offset + j)] + w[(offset + j, offset + i)].conj());
            out[(i, j)] = s;
            out[(j, i)] = s.conj();
        }
    }
    for k in 0..len {
        let mut sum = ZERO;
        for i in 0..len - k {
            sum += out[(i + k, i)];
        }
        let target = if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            ZERO
        };
        let shift = (sum - target) / (len - k) as f64;
        for i in 0..len - k {
            let v = out[(i + k, i)] - shift;
            out[(i + k, i)] = v;
            out[(i, i + k)] = v.conj();
        }
    }
    for i in 0..len {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
    }
}

impl Structure for FeasState {
    fn block_size(&self) -> usize {
        self.m + self.n
    }

    fn update(&mut self, w: &CMat, _rho: f64) {
        let (m, n) = (self.m, self.n);
        let mut q = std::mem::replace(&mut self.q, Array2::zeros((0, 0)));
        delta_trace_project(w, 0, m, &mut q);
        self.q = q;
        let mut p = std::mem::replace(&mut self.p, Array2::zeros((0, 0)));
        delta_trace_project(w, m, n, &mut p);
        self.p = p;
    }

    fn assemble(&self, block: &mut CMat) {
        let (m, n) = (self.m, self.n);
        for i in 0..m {
            for j in 0..m {
                block[(i, j)] = self.q[(i, j)];
            }
        }
        for i in 0..n {
            for j in 0..n {
                block[(m + i, m + j)] = self.p[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..n {
                block[(i, m + j)] = self.b[(i, j)];
                block[(m + j, i)] = self.b[(i, j)].conj();
            }
        }
    }

    fn objective(&self) -> f64 {
        0.0
    }

    fn unknowns(&self) -> SdpUnknowns {
        SdpUnknowns::Feasibility {
            q: self.q.clone(),
            p: self.p.clone(),
        }
    }

    fn scale(&self) -> f64 {
        self.data_scale
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Runs the ADMM iteration and returns the best iterate with diagnostics.
pub fn solve(problem: &SdpProblem, cfg: &SolverConfig) -> Result<SdpSolution, SolverError> {
    cfg.validate()?;
    match problem {
        SdpProblem::ManmCompletion { .. } | SdpProblem::ManmDenoise { .. } => {
            run(ManmState::new(problem), problem, cfg)
        }
        SdpProblem::VanmCompletion { .. } | SdpProblem::VanmDenoise { .. } => {
            let block = problem.psd_block_size();
            if block > super::VANM_BLOCK_LIMIT {
                return Err(SolverError::BlockTooLarge(block));
            }
            run(VanmState::new(problem), problem, cfg)
        }
        SdpProblem::DualNormFeasibility { .. } => run(FeasState::new(problem), problem, cfg),
    }
}

fn run<S: Structure>(
    mut state: S,
    problem: &SdpProblem,
    cfg: &SolverConfig,
) -> Result<SdpSolution, SolverError> {
    let start = Instant::now();
    let nb = state.block_size();
    let mut b = Array2::<Complex64>::zeros((nb, nb));
    let mut s = Array2::<Complex64>::zeros((nb, nb));
    let mut lambda = Array2::<Complex64>::zeros((nb, nb));
    let mut w = Array2::<Complex64>::zeros((nb, nb));
    let mut rho = cfg.rho;
    let alpha = cfg.over_relaxation;

    state.assemble(&mut b);
    s.assign(&b);
    s = psd_project(&s)?;

    let mut trace = Vec::new();
    let mut best_obj = f64::INFINITY;
    let mut best_score = f64::INFINITY;
    let mut best = (state.unknowns(), state.objective(), f64::INFINITY, f64::INFINITY, 0usize);
    let mut converged = false;
    let mut iterations = 0;
    let mut stall_anchor = (0usize, f64::INFINITY); // (iteration, best score then)

    for iter in 1..=cfg.max_iterations {
        iterations = iter;
        // theta step: target W = S - Lambda / rho
        for ((wv, sv), lv) in w.iter_mut().zip(s.iter()).zip(lambda.iter()) {
            *wv = sv - lv / rho;
        }
        state.update(&w, rho);
        state.assemble(&mut b);

        // over-relaxed PSD step on C = alpha B + (1 - alpha) S
        for ((wv, bv), sv) in w.iter_mut().zip(b.iter()).zip(s.iter()) {
            *wv = alpha * bv + (1.0 - alpha) * sv;
        }
        // w now holds C; form C + Lambda/rho in-place
        for (wv, lv) in w.iter_mut().zip(lambda.iter()) {
            *wv += lv / rho;
        }
        let s_new = psd_project(&w)?;

        // dual update: Lambda += rho (C - S_new); reconstruct C = w - Lambda/rho
        let mut dual_sq = 0.0;
        for ((lv, wv), (sv_new, sv_old)) in lambda
            .iter_mut()
            .zip(w.iter())
            .zip(s_new.iter().zip(s.iter()))
        {
            let c = wv - *lv / rho;
            *lv += rho * (c - sv_new);
            let d = sv_new - sv_old;
            dual_sq += d.norm_sqr();
        }
        let dual_norm = rho * dual_sq.sqrt();

        let mut primal_sq = 0.0;
        for (bv, sv) in b.iter().zip(s_new.iter()) {
            primal_sq += (bv - sv).norm_sqr();
        }
        let primal_norm = primal_sq.sqrt();
        s = s_new;

        let b_norm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let s_norm = s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let lam_norm = lambda.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let pri_scale = b_norm.max(s_norm).max(state.scale());
        let dual_scale = lam_norm.max(state.scale());
        let r_rel = primal_norm / pri_scale;
        let s_rel = dual_norm / dual_scale;

        let obj = state.objective();
        best_obj = best_obj.min(obj);
        let score = r_rel.max(s_rel);
        if score < best_score {
            best_score = score;
            best = (state.unknowns(), obj, r_rel, s_rel, iter);
        }

        if let Some(every) = cfg.diagnostics_every {
            if iter % every == 0 || iter == 1 {
                trace.push(IterDiag {
                    iteration: iter,
                    primal: r_rel,
                    dual: s_rel,
                    objective: obj,
                    best_objective: best_obj,
                    rho,
                });
            }
        }

        if r_rel <= cfg.tolerance && s_rel <= cfg.tolerance {
            converged = true;
            best = (state.unknowns(), obj, r_rel, s_rel, iter);
            break;
        }

        if cfg.stall_iters > 0 && iter >= stall_anchor.0 + cfg.stall_iters {
            if best_score > stall_anchor.1 * (1.0 - cfg.stall_improvement) {
                break; // plateaued well above tolerance; flagged non-converged
            }
            stall_anchor = (iter, best_score);
        }

        if cfg.adaptive_rho && iter % 50 == 0 {
            if r_rel > 10.0 * s_rel {
                rho *= 2.0;
            } else if s_rel > 10.0 * r_rel {
                rho /= 2.0;
            }
        }
    }

    let (unknowns, objective_value, primal_residual, dual_residual, _best_iter) = best;
    Ok(SdpSolution {
        unknowns,
        objective_value,
        primal_residual,
        dual_residual,
        iterations,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        psd_block_size: problem.psd_block_size(),
        trace,
    })
}
