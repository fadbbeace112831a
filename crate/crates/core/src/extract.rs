//! Frequency extraction and pairing: Vandermonde decomposition of the solver's
//! Toeplitz blocks, maximum-correlation pairing of the per-axis frequency
//! lists, matrix-pencil extraction for the vectorized baseline, and the
//! assignment-based frequency MSE metric.

use crate::linalg::{
    eig_general_small, hermitian_eig, least_squares, lu_solve, vandermonde_decompose_impl,
    HermitianToeplitz, LinalgError, RankSpec,
};
use crate::model::{steering_vector, CMat, FrequencyPair, SpectralModel};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ExtractError {
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("per-axis decompositions disagree on model order ({0} vs {1}); pass k_hint")]
    RankAmbiguity(usize, usize),
    #[error("decomposition produced {got} components, needed {need}")]
    TooFewComponents { need: usize, got: usize },
    #[error("frequency lists of lengths {0} and {1} admit no bijection")]
    PairingMismatch(usize, usize),
    #[error("pencil sizes ({0}, {1}) cannot support order {2}")]
    PencilTooSmall(usize, usize, usize),
    #[error("enhanced matrix has numerical rank below {0}")]
    RankDeficient(usize),
    #[error("estimate and truth have different orders ({0} vs {1})")]
    OrderMismatch(usize, usize),
}

/// Paired 2D frequency estimate with per-axis powers and pairing scores.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyEstimate {
    pub pairs: Vec<FrequencyPair>,
    pub powers_x: Vec<f64>,
    pub powers_y: Vec<f64>,
    pub pairing_scores: Vec<f64>,
}

impl FrequencyEstimate {
    pub fn k(&self) -> usize {
        self.pairs.len()
    }
}

/// Per-axis frequencies recovered from the Toeplitz blocks T(u), T(v).
#[derive(Debug, Clone)]
pub struct AxisFrequencies {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub powers_x: Vec<f64>,
    pub powers_y: Vec<f64>,
}

/// Vandermonde-decomposes both Toeplitz blocks; with `k_hint` the lists are
/// truncated to the k strongest powers, without it the ranks must agree.
///
/// The v block of the solved (M+N) program is sum_k d_k conj(a_Y(fy_k))
/// a_Y(fy_k)^T (the data matrix carries a_Y transposed, not conjugated), so
/// its decomposition frequencies are negated before being reported as fy.
pub fn extract_from_toeplitz(
    u: &[Complex64],
    v: &[Complex64],
    k_hint: Option<usize>,
    rank_tol: f64,
) -> Result<AxisFrequencies, ExtractError> {
    let tu = HermitianToeplitz::new(u.to_vec())?;
    let tv = HermitianToeplitz::new(v.to_vec())?;
    let spec = match k_hint {
        Some(k) => RankSpec::Fixed(k),
        None => RankSpec::Tolerance(rank_tol),
    };
    let dx = vandermonde_decompose_impl(&tu, spec, rank_tol)?;
    let mut dy = vandermonde_decompose_impl(&tv, spec, rank_tol)?;
    for f in dy.frequencies.iter_mut() {
        *f = (-*f).rem_euclid(1.0);
    }
    match k_hint {
        Some(k) => {
            if dx.rank() < k {
                return Err(ExtractError::TooFewComponents {
                    need: k,
                    got: dx.rank(),
                });
            }
            if dy.rank() < k {
                return Err(ExtractError::TooFewComponents {
                    need: k,
                    got: dy.rank(),
                });
            }
            Ok(AxisFrequencies {
                fx: dx.frequencies[..k].to_vec(),
                fy: dy.frequencies[..k].to_vec(),
                powers_x: dx.powers[..k].to_vec(),
                powers_y: dy.powers[..k].to_vec(),
            })
        }
        None => {
            if dx.rank() != dy.rank() {
                return Err(ExtractError::RankAmbiguity(dx.rank(), dy.rank()));
            }
            Ok(AxisFrequencies {
                fx: dx.frequencies,
                fy: dy.frequencies,
                powers_x: dx.powers,
                powers_y: dy.powers,
            })
        }
    }
}

/// Model-order heuristic: largest relative gap in the descending spectrum of
/// the materialized Toeplitz block. Overridable by passing k_hint downstream.
pub fn estimate_order(u: &[Complex64]) -> Result<usize, ExtractError> {
    let t = HermitianToeplitz::new(u.to_vec())?;
    let (w, _) = hermitian_eig(&t.materialize())?;
    let floor = w[0].max(0.0) * 1e-14 + 1e-300;
    let mut best_k = 1;
    let mut best_gap = 0.0;
    for i in 0..w.len() - 1 {
        let a = w[i].max(floor);
        let b = w[i + 1].max(floor);
        let gap = a / b;
        if gap > best_gap {
            best_gap = gap;
            best_k = i + 1;
        }
    }
    Ok(best_k)
}

/// Bijection strategy for Remark-3 pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingStrategy {
    /// Assign in descending correlation order (default).
    Greedy,
    /// Maximize the total correlation over all bijections.
    Optimal,
}

/// Pairs each fx with an fy by the maximum-correlation rule
/// j_i = argmax_j |a_X(fx_i)^H Xhat conj(a_Y(fy_j))|, enforcing a bijection.
pub fn pair_frequencies(
    x_hat: &CMat,
    fx: &[f64],
    fy: &[f64],
    powers_x: &[f64],
    powers_y: &[f64],
    strategy: PairingStrategy,
) -> Result<FrequencyEstimate, ExtractError> {
    let k = fx.len();
    if k == 0 || fy.len() != k {
        return Err(ExtractError::PairingMismatch(fx.len(), fy.len()));
    }
    let (m, n) = x_hat.dim();
    let mut score = Array2::<f64>::zeros((k, k));
    for (i, &fxi) in fx.iter().enumerate() {
        let ax = steering_vector(fxi, m);
        // row vector a_X^H Xhat
        let mut left = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..m {
                acc += ax[r].conj() * x_hat[(r, c)];
            }
            left[c] = acc;
        }
        for (j, &fyj) in fy.iter().enumerate() {
            let ay = steering_vector(fyj, n);
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n {
                acc += left[c] * ay[c].conj();
            }
            score[(i, j)] = acc.norm();
        }
    }
    let assignment = match strategy {
        PairingStrategy::Greedy => greedy_assignment(&score),
        PairingStrategy::Optimal => {
            maximize_assignment(&score).unwrap_or_else(|| greedy_assignment(&score))
        }
    };
    let mut pairs = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    let mut py = Vec::with_capacity(k);
    for (i, &j) in assignment.iter().enumerate() {
        pairs.push(FrequencyPair::wrapped(fx[i], fy[j]));
        scores.push(score[(i, j)]);
        py.push(powers_y.get(j).copied().unwrap_or(0.0));
    }
    Ok(FrequencyEstimate {
        pairs,
        powers_x: powers_x.to_vec(),
        powers_y: py,
        pairing_scores: scores,
    })
}

/// Descending-score greedy bijection.
fn greedy_assignment(score: &Array2<f64>) -> Vec<usize> {
    let k = score.nrows();
    let mut order: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .collect();
    order.sort_by(|a, b| score[(b.0, b.1)].partial_cmp(&score[(a.0, a.1)]).unwrap());
    let mut row_used = vec![false; k];
    let mut col_used = vec![false; k];
    let mut assign = vec![usize::MAX; k];
    for (i, j) in order {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            assign[i] = j;
        }
    }
    assign
}

/// Exact assignment by permutation enumeration (k <= 9), maximizing total score.
fn maximize_assignment(score: &Array2<f64>) -> Option<Vec<usize>> {
    let k = score.nrows();
    if k > 9 {
        return None;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        if best.as_ref().map_or(true, |(b, _)| total > *b) {
            best = Some((total, p.to_vec()));
        }
    });
    best.map(|(_, p)| p)
}

fn permute(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        f(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, f);
        perm.swap(at, i);
    }
}

/// Matrix-enhancement matrix-pencil extraction of k 2D frequencies from a
/// (possibly noisy) data matrix: block-Hankel enhancement, rank-k signal
/// subspace, shift-invariance solves in both directions, eigenvector pairing.
pub fn matrix_pencil_2d(
    x_hat: &CMat,
    k: usize,
    pencil_l: usize,
    pencil_m: usize,
) -> Result<FrequencyEstimate, ExtractError> {
    let (m, n) = x_hat.dim();
    let l1 = pencil_l;
    let l2 = pencil_m;
    if k == 0
        || l1 < 2
        || l2 < 2
        || l1 > m
        || l2 > n
        || k > (l1 - 1) * l2
        || k > l1 * (l2 - 1)
        || k > (m - l1 + 1) * (n - l2 + 1)
    {
        return Err(ExtractError::PencilTooSmall(l1, l2, k));
    }
    let rows = l1 * l2;
    let cols = (m - l1 + 1) * (n - l2 + 1);
    // Enhanced block-Hankel matrix E[(p*l2+q), (a*(n-l2+1)+b)] = X[p+a, q+b].
    let mut e = Array2::<Complex64>::zeros((rows, cols));
    for p in 0..l1 {
        for q in 0..l2 {
            for a in 0..m - l1 + 1 {
                for b in 0..n - l2 + 1 {
                    e[(p * l2 + q, a * (n - l2 + 1) + b)] = x_hat[(p + a, q + b)];
                }
            }
        }
    }
    // Left singular subspace from the Gram matrix E E^H.
    let mut gram = Array2::<Complex64>::zeros((rows, rows));
    for i in 0..rows {
        for j in 0..=i {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..cols {
                acc += e[(i, c)] * e[(j, c)].conj();
            }
            gram[(i, j)] = acc;
            gram[(j, i)] = acc.conj();
        }
    }
    let (w, vecs) = hermitian_eig(&gram)?;
    let lam_max = w[0].max(0.0);
    if lam_max <= 0.0 || w[k - 1] <= 1e-12 * lam_max {
        return Err(ExtractError::RankDeficient(k));
    }
    let us = vecs;

    // x-direction shift invariance: drop last / first block row (p index).
    let sel_rows = (l1 - 1) * l2;
    let mut low = Array2::<Complex64>::zeros((sel_rows, k));
    let mut up = Array2::<Complex64>::zeros((sel_rows, k));
    for p in 0..l1 - 1 {
        for q in 0..l2 {
            for c in 0..k {
                low[(p * l2 + q, c)] = us[(p * l2 + q, c)];
                up[(p * l2 + q, c)] = us[((p + 1) * l2 + q, c)];
            }
        }
    }
    let psi_x = ls_matrix(&low, &up)?;

    // y-direction shift invariance: drop last / first row inside each block.
    let sel_rows = l1 * (l2 - 1);
    let mut low = Array2::<Complex64>::zeros((sel_rows, k));
    let mut up = Array2::<Complex64>::zeros((sel_rows, k));
    for p in 0..l1 {
        for q in 0..l2 - 1 {
            for c in 0..k {
                low[(p * (l2 - 1) + q, c)] = us[(p * l2 + q, c)];
                up[(p * (l2 - 1) + q, c)] = us[(p * l2 + q + 1, c)];
            }
        }
    }
    let psi_y = ls_matrix(&low, &up)?;

    // Diagonalize psi_x; psi_y shares eigenvectors, so T^{-1} psi_y T pairs fy
    // with fx by position.
    let (vals_x, t) = eig_general_small(&psi_x)?;
    // columns of t solve t d = psi_y t  =>  d = t^{-1} psi_y t
    let mut psi_y_t = Array2::<Complex64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..k {
                acc += psi_y[(i, l)] * t[(l, j)];
            }
            psi_y_t[(i, j)] = acc;
        }
    }
    let mut fy_vals = vec![Complex64::new(0.0, 0.0); k];
    for j in 0..k {
        let rhs: Array1<Complex64> = Array1::from_iter((0..k).map(|i| psi_y_t[(i, j)]));
        let sol = lu_solve(&t, &rhs)?;
        fy_vals[j] = sol[j];
    }

    let pairs: Vec<FrequencyPair> = vals_x
        .iter()
        .zip(&fy_vals)
        .map(|(zx, zy)| {
            FrequencyPair::wrapped((-zx.arg() / TAU).rem_euclid(1.0), (-zy.arg() / TAU).rem_euclid(1.0))
        })
        .collect();

    // Amplitude refit on the full data for powers and scores.
    let mn = m * n;
    let mut design = Array2::<Complex64>::zeros((mn, k));
    let mut rhs = Array1::<Complex64>::zeros(mn);
    for (col, f) in pairs.iter().enumerate() {
        let ax = steering_vector(f.fx, m);
        let ay = steering_vector(f.fy, n);
        for i in 0..m {
            for j in 0..n {
                design[(j * m + i, col)] = ax[i] * ay[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..n {
            rhs[j * m + i] = x_hat[(i, j)];
        }
    }
    let amps = least_squares(&design, &rhs)?;
    let powers: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let scores: Vec<f64> = amps.iter().map(|a| a.norm()).collect();
    Ok(FrequencyEstimate {
        pairs,
        powers_x: powers.clone(),
        powers_y: powers,
        pairing_scores: scores,
    })
}

fn ls_matrix(
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
) -> Result<Array2<Complex64>, ExtractError> {
    let (rows, cols) = a.dim();
    let mut gram = Array2::<Complex64>::zeros((cols, cols));
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                acc += a[(r, i)].conj() * a[(r, j)];
            }
            gram[(i, j)] = acc;
        }
    }
    let mut out = Array2::<Complex64>::zeros((cols, cols));
    for c in 0..cols {
        let mut rhs = Array1::<Complex64>::zeros(cols);
        for i in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                acc += a[(r, i)].conj() * b[(r, c)];
            }
            rhs[i] = acc;
        }
        let sol = lu_solve(&gram, &rhs)?;
        for i in 0..cols {
            out[(i, c)] = sol[i];
        }
    }
    Ok(out)
}

/// Sum of squared wrap-aware frequency errors under the optimal assignment
/// between estimated and true pairs.
pub fn frequency_mse(
    est: &FrequencyEstimate,
    truth: &SpectralModel,
) -> Result<f64, ExtractError> {
    let k = truth.k();
    if est.k() != k {
        return Err(ExtractError::OrderMismatch(est.k(), k));
    }
    let truth_pairs = truth.frequencies();
    let mut cost = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            cost[(i, j)] = est.pairs[i].wrap_sq_err(&truth_pairs[j]);
        }
    }
    if k <= 9 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            if total < best {
                best = total;
            }
        });
        Ok(best)
    } else {
        // Greedy fallback for large orders.
        let neg = cost.map(|&c| -c);
        let assign = greedy_assignment(&neg);
        Ok(assign
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[(i, j)])
            .sum())
    }
}
