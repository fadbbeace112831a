//! Dense eigensolvers and small linear-system kernels.
//!
//! The Hermitian path is Householder tridiagonalization followed by implicit-shift
//! QL with accumulated transformations; it is the workhorse behind the PSD cone
//! projection, so it trades generality for predictable accuracy at moderate sizes.

use super::LinalgError;
use crate::model::{CMat, CVec};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative deviation from Hermitian symmetry, ||A - A^H||_F / ||A||_F.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0;
    for i in 0..n {
        for j in 0..n {
            dev += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    let scale = frob_norm(a);
    if scale == 0.0 {
        0.0
    } else {
        dev.sqrt() / scale
    }
}

/// Eigendecomposition of a Hermitian matrix: A = V diag(w) V^H with real
/// eigenvalues sorted in descending order and unitary V.
pub fn hermitian_eig(a: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::Dimension(format!(
            "expected square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let dev = hermitian_deviation(a);
    if dev > 1e-10 {
        return Err(LinalgError::NotHermitian(dev));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    // Work on the exactly symmetrized copy.
    let mut w = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
        }
    }
    let (mut d, mut e, v) = tridiagonalize(&mut w);
    let mut v = v;
    ql_implicit(&mut d, &mut e, &mut v)?;

    // Sort descending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::<Complex64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, dst)] = v[(r, src)];
        }
    }
    Ok((vals, vecs))
}

/// Householder reduction of a Hermitian matrix to real symmetric tridiagonal
/// form; returns (diagonal, subdiagonal, accumulated unitary V).
fn tridiagonalize(a: &mut CMat) -> (Vec<f64>, Vec<f64>, CMat) {
    let n = a.nrows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n]; // e[i] couples i and i+1; e[n-1] unused
    let mut v = Array2::<Complex64>::eye(n);
    if n == 1 {
        d[0] = a[(0, 0)].re;
        return (d, e, v);
    }

    // Store reflectors to accumulate V afterwards (reverse application).
    let mut reflectors: Vec<(usize, Vec<Complex64>, f64)> = Vec::new();
    let mut sub = vec![ZERO; n]; // complex subdiagonal before phase removal

    for k in 0..n - 1 {
        let m = n - k - 1;
        if m == 1 {
            sub[k] = a[(k + 1, k)];
            continue;
        }
        // Column below the diagonal.
        let mut x = vec![ZERO; m];
        for i in 0..m {
            x[i] = a[(k + 1 + i, k)];
        }
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            sub[k] = ZERO;
            continue;
        }
        let tail = x.iter().skip(1).map(|v| v.norm_sqr()).sum::<f64>();
        if tail == 0.0 {
            // Already in tridiagonal position.
            sub[k] = x[0];
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            ONE
        };
        let beta = -phase * xnorm;
        let mut vref = x;
        vref[0] -= beta;
        let vnorm2: f64 = vref.iter().map(|v| v.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        // Two-sided update of the trailing block: A <- H A H.
        // p = tau * A_sub v; w = p - (tau/2)(v^H p) v; A_sub -= v w^H + w v^H.
        let mut p = vec![ZERO; m];
        for i in 0..m {
            let mut acc = ZERO;
            for j in 0..m {
                acc += a[(k + 1 + i, k + 1 + j)] * vref[j];
            }
            p[i] = acc * tau;
        }
        let vhp: Complex64 = vref.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let kk = vhp * (tau / 2.0);
        let w: Vec<Complex64> = p.iter().zip(&vref).map(|(pi, vi)| pi - kk * vi).collect();
        for i in 0..m {
            for j in 0..m {
                let upd = vref[i] * w[j].conj() + w[i] * vref[j].conj();
                a[(k + 1 + i, k + 1 + j)] -= upd;
            }
        }
        // The reflected column is beta e0 by construction.
        a[(k + 1, k)] = beta;
        for i in 1..m {
            a[(k + 1 + i, k)] = ZERO;
        }
        sub[k] = beta;
        reflectors.push((k, vref, tau));
    }

    // Accumulate V = H_0 H_1 ... H_{n-3} (apply in reverse onto identity).
    for (k, vref, tau) in reflectors.iter().rev() {
        let m = vref.len();
        // V[k+1.., :] <- (I - tau v v^H) V[k+1.., :]
        for col in 0..n {
            let mut acc = ZERO;
            for i in 0..m {
                acc += vref[i].conj() * v[(k + 1 + i, col)];
            }
            let acc = acc * *tau;
            for i in 0..m {
                let delta = vref[i] * acc;
                v[(k + 1 + i, col)] -= delta;
            }
        }
    }

    // Remove subdiagonal phases: T_real = D^H T D with diagonal unitary D.
    let mut dphase = vec![ONE; n];
    for i in 0..n - 1 {
        let s = sub[i];
        let mag = s.norm();
        e[i] = mag;
        if mag > 0.0 {
            // want conj(D[i+1]) * s * D[i] real positive
            dphase[i + 1] = dphase[i] * (s / mag);
        } else {
            dphase[i + 1] = dphase[i];
        }
    }
    for i in 0..n {
        d[i] = a[(i, i)].re;
    }
    // Fold D into V (scale columns of V... V maps tridiag coords to original:
    // A = V T V^H = (V D) T_real (V D)^H, so scale column i by D[i].
    for i in 0..n {
        if dphase[i] != ONE {
            for r in 0..n {
                v[(r, i)] *= dphase[i];
            }
        }
    }
    (d, e, v)
}

/// Implicit-shift QL on a real symmetric tridiagonal, rotations accumulated
/// into the complex columns of `v`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], v: &mut CMat) -> Result<(), LinalgError> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let rows = v.nrows();
    let scale = d
        .iter()
        .chain(e.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let floor = f64::EPSILON * scale;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Look for a negligible subdiagonal element.
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd + floor * 1e-3 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::IterationLimit("tridiagonal QL".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..rows {
                    f = v[(k, i + 1)].re;
                    let fi = v[(k, i + 1)].im;
                    let vr = v[(k, i)].re;
                    let vi = v[(k, i)].im;
                    v[(k, i + 1)] = Complex64::new(s * vr + c * f, s * vi + c * fi);
                    v[(k, i)] = Complex64::new(c * vr - s * f, c * vi - s * fi);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// LU factorization with partial pivoting; solves A x = b for small complex systems.
pub fn lu_solve(a: &CMat, b: &CVec) -> Result<CVec, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::Dimension("lu_solve shape mismatch".into()));
    }
    let mut lu = a.clone();
    let mut x: Vec<Complex64> = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best = k;
        let mut best_mag = lu[(k, k)].norm();
        for i in k + 1..n {
            let mag = lu[(i, k)].norm();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Err(LinalgError::Singular);
        }
        if best != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(best, j)];
                lu[(best, j)] = tmp;
            }
            piv.swap(k, best);
            x.swap(k, best);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in k + 1..n {
                let delta = factor * lu[(k, j)];
                lu[(i, j)] -= delta;
            }
            let delta = factor * x[k];
            x[i] -= delta;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= lu[(i, j)] * x[j];
        }
        x[i] = acc / lu[(i, i)];
    }
    Ok(Array1::from_vec(x))
}

/// Least squares via normal equations: argmin ||A x - b||_2 for tall thin A.
pub fn least_squares(a: &CMat, b: &CVec) -> Result<CVec, LinalgError> {
    let (rows, cols) = a.dim();
    if b.len() != rows {
        return Err(LinalgError::Dimension("least_squares shape mismatch".into()));
    }
    let mut gram = Array2::<Complex64>::zeros((cols, cols));
    let mut rhs = Array1::<Complex64>::zeros(cols);
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = ZERO;
            for r in 0..rows {
                acc += a[(r, i)].conj() * a[(r, j)];
            }
            gram[(i, j)] = acc;
        }
        let mut acc = ZERO;
        for r in 0..rows {
            acc += a[(r, i)].conj() * b[r];
        }
        rhs[i] = acc;
    }
    lu_solve(&gram, &rhs)
}

/// Eigenvalues (and eigenvectors via inverse iteration) of a small general
/// complex matrix: Hessenberg reduction plus single-shift QR.
pub fn eig_general_small(a: &CMat) -> Result<(Vec<Complex64>, CMat), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::Dimension("eig_general_small needs square".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    if n == 1 {
        return Ok((vec![a[(0, 0)]], Array2::eye(1)));
    }
    let scale = frob_norm(a).max(f64::MIN_POSITIVE);
    let mut h = hessenberg(a);
    let vals = qr_eigenvalues(&mut h, scale)?;

    // Eigenvectors by inverse iteration on the original matrix.
    let mut vecs = Array2::<Complex64>::zeros((n, n));
    for (idx, &lam) in vals.iter().enumerate() {
        let shift = lam + Complex64::new(scale * 1e-10, scale * 1e-10);
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let mut x = Array1::from_elem(n, Complex64::new(1.0, 0.0));
        // A couple of inverse-iteration sweeps; re-seed if the solve blows up.
        for sweep in 0..3 {
            let nrm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for v in x.iter_mut() {
                *v /= nrm;
            }
            match lu_solve(&shifted, &x) {
                Ok(y) => x = y,
                Err(_) if sweep == 0 => {
                    // Singular to working precision: nudge the shift.
                    for i in 0..n {
                        shifted[(i, i)] -= Complex64::new(scale * 1e-8, 0.0);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let nrm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            vecs[(r, idx)] = x[r] / nrm;
        }
    }
    Ok((vals, vecs))
}

fn hessenberg(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut x = vec![ZERO; m];
        for i in 0..m {
            x[i] = h[(k + 1 + i, k)];
        }
        let tail: f64 = x.iter().skip(1).map(|v| v.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            ONE
        };
        let beta = -phase * xnorm;
        let mut vref = x;
        vref[0] -= beta;
        let vnorm2: f64 = vref.iter().map(|v| v.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;
        // Rows: H[k+1.., :] <- (I - tau v v^H) H[k+1.., :]
        for col in 0..n {
            let mut acc = ZERO;
            for i in 0..m {
                acc += vref[i].conj() * h[(k + 1 + i, col)];
            }
            let acc = acc * tau;
            for i in 0..m {
                let delta = vref[i] * acc;
                h[(k + 1 + i, col)] -= delta;
            }
        }
        h[(k + 1, k)] = beta;
        for i in 2..=m {
            h[(k + i, k)] = ZERO;
        }
        // Columns: H[:, k+1..] <- H[:, k+1..] (I - tau v v^H)
        for row in 0..n {
            let mut acc = ZERO;
            for i in 0..m {
                acc += h[(row, k + 1 + i)] * vref[i];
            }
            let acc = acc * tau;
            for i in 0..m {
                let delta = acc * vref[i].conj();
                h[(row, k + 1 + i)] -= delta;
            }
        }
    }
    h
}

fn qr_eigenvalues(h: &mut CMat, scale: f64) -> Result<Vec<Complex64>, LinalgError> {
    let n = h.nrows();
    let mut vals = vec![ZERO; n];
    let mut hi = n; // active block is 0..hi
    let mut iters_since_deflation = 0;
    let max_total = 80 * n;
    let mut total = 0;
    while hi > 0 {
        if hi == 1 {
            vals[0] = h[(0, 0)];
            break;
        }
        // Deflate tiny subdiagonals.
        let mut deflated = false;
        for i in (1..hi).rev() {
            let tol = f64::EPSILON * (h[(i - 1, i - 1)].norm() + h[(i, i)].norm() + scale * 1e-30);
            if h[(i, i - 1)].norm() <= tol {
                h[(i, i - 1)] = ZERO;
                if i == hi - 1 {
                    vals[hi - 1] = h[(hi - 1, hi - 1)];
                    hi -= 1;
                    deflated = true;
                    iters_since_deflation = 0;
                    break;
                }
            }
        }
        if deflated {
            continue;
        }
        total += 1;
        iters_since_deflation += 1;
        if total > max_total {
            return Err(LinalgError::IterationLimit("QR eigenvalue iteration".into()));
        }
        // Find the start of the trailing unreduced block.
        let mut lo = hi - 1;
        while lo > 0 && h[(lo, lo - 1)].norm() > 0.0 {
            lo -= 1;
        }
        // Wilkinson-like shift from the trailing 2x2 (occasionally exceptional).
        let shift = if iters_since_deflation % 12 == 0 {
            h[(hi - 1, hi - 2)] * Complex64::new(1.5, 0.0) + h[(hi - 1, hi - 1)]
        } else {
            trailing_shift(h, hi)
        };
        // Single-shift QR step on the active block via Givens rotations.
        let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            h[(i, i)] -= shift;
        }
        for i in lo..hi - 1 {
            let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
            apply_givens_left(h, i, i + 1, c, s, lo, n);
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let i = lo + idx;
            apply_givens_right(h, i, i + 1, c, s, hi);
        }
        for i in lo..hi {
            h[(i, i)] += shift;
        }
    }
    Ok(vals)
}

fn trailing_shift(h: &CMat, hi: usize) -> Complex64 {
    let a = h[(hi - 2, hi - 2)];
    let b = h[(hi - 2, hi - 1)];
    let c = h[(hi - 1, hi - 2)];
    let d = h[(hi - 1, hi - 1)];
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - 4.0 * det).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Givens rotation zeroing b: G^H [a; b] = [r; 0] with real c.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let bmag = b.norm();
    if bmag == 0.0 {
        return (1.0, ZERO);
    }
    let amag = a.norm();
    if amag == 0.0 {
        return (0.0, ONE);
    }
    let denom = (amag * amag + bmag * bmag).sqrt();
    let c = amag / denom;
    let s = (a / amag) * b.conj() / denom;
    (c, s)
}

fn apply_givens_left(h: &mut CMat, i: usize, j: usize, c: f64, s: Complex64, lo: usize, n: usize) {
    for col in lo..n {
        let hi_ = h[(i, col)];
        let hj = h[(j, col)];
        h[(i, col)] = c * hi_ + s * hj;
        h[(j, col)] = -s.conj() * hi_ + c * hj;
    }
}

fn apply_givens_right(h: &mut CMat, i: usize, j: usize, c: f64, s: Complex64, hi: usize) {
    let top = (j + 2).min(hi);
    for row in 0..top {
        let hi_ = h[(row, i)];
        let hj = h[(row, j)];
        h[(row, i)] = c * hi_ + s.conj() * hj;
        h[(row, j)] = -s * hi_ + c * hj;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = stream_rng(seed, 0);
        let mut a = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            a[(i, i)] = Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, 0.0);
            for j in 0..i {
                let v = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        a
    }

    #[test]
    fn identity_eigenvalues() {
        let a: CMat = Array2::eye(4);
        let (w, _) = hermitian_eig(&a).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let mut a = Array2::<Complex64>::zeros((3, 3));
        a[(0, 0)] = Complex64::new(3.0, 0.0);
        a[(1, 1)] = Complex64::new(1.0, 0.0);
        a[(2, 2)] = Complex64::new(-2.0, 0.0);
        let (w, _) = hermitian_eig(&a).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14);
        assert!((w[1] - 1.0).abs() < 1e-14);
        assert!((w[2] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        for &n in &[2usize, 5, 8, 13] {
            let a = random_hermitian(n, 100 + n as u64);
            let (w, v) = hermitian_eig(&a).unwrap();
            // || A V - V diag(w) ||_F <= 1e-9 ||A||_F
            let mut resid = 0.0;
            for col in 0..n {
                for row in 0..n {
                    let mut av = ZERO;
                    for k in 0..n {
                        av += a[(row, k)] * v[(k, col)];
                    }
                    resid += (av - v[(row, col)] * w[col]).norm_sqr();
                }
            }
            let resid = resid.sqrt();
            assert!(
                resid <= 1e-9 * frob_norm(&a).max(1e-30),
                "n={n} residual {resid}"
            );
            // Unitary check.
            for c1 in 0..n {
                for c2 in 0..n {
                    let mut acc = ZERO;
                    for r in 0..n {
                        acc += v[(r, c1)].conj() * v[(r, c2)];
                    }
                    let want = if c1 == c2 { 1.0 } else { 0.0 };
                    assert!((acc - Complex64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            hermitian_eig(&a),
            Err(LinalgError::NotHermitian(_))
        ));
    }

    #[test]
    fn lu_solves_small_system() {
        let mut rng = stream_rng(7, 1);
        let n = 6;
        let mut a = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let x_true: CVec =
            Array1::from_iter((0..n).map(|i| Complex64::new(i as f64 + 0.5, -(i as f64))));
        let mut b = Array1::<Complex64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b[i] += a[(i, j)] * x_true[j];
            }
        }
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn general_eig_recovers_unit_circle_values() {
        // Diagonalizable matrix with known eigenvalues on the unit circle.
        let lams = [
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(1.0, -1.2),
            Complex64::from_polar(1.0, 2.4),
        ];
        let mut rng = stream_rng(9, 2);
        let n = 3;
        let mut t = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        // A = T diag(lams) T^{-1} computed by solving T X = T diag.
        let mut td = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                td[(i, j)] = t[(i, j)] * lams[j];
            }
        }
        let mut a = Array2::<Complex64>::zeros((n, n));
        for col in 0..n {
            // Solve T^T y = td_row? simpler: A = td * inv(t) => A^T = inv(t)^T td^T
            let rhs: CVec = Array1::from_iter((0..n).map(|r| td[(col, r)]));
            let y = lu_solve(&t.t().to_owned(), &rhs).unwrap();
            for r in 0..n {
                a[(col, r)] = y[r];
            }
        }
        let (vals, _) = eig_general_small(&a).unwrap();
        for lam in lams {
            let best = vals.iter().map(|v| (v - lam).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-8, "missing eigenvalue {lam}, got {vals:?}");
        }
    }
}
