//! Vectorized-ANM baseline over the (MN+1) two-level Toeplitz block, used for
//! accuracy and runtime comparison against the matrix formulation.

use crate::linalg::TwoLevelToeplitz;
use crate::model::{devectorize, CMat, CVec, ObservationMask};
use crate::sdp::{
    build_vanm_completion, build_vanm_denoise, solve, SdpSolution, SolverConfig, SolverError,
};

/// Solution of a vectorized atomic-norm program.
#[derive(Debug, Clone)]
pub struct VanmResult {
    pub x_hat: CVec,
    pub generator: TwoLevelToeplitz,
    pub t: f64,
    pub objective: f64,
    pub diagnostics: SdpSolution,
}

impl VanmResult {
    /// The recovered vector reshaped back to the M x N data matrix.
    pub fn x_hat_matrix(&self) -> CMat {
        devectorize(
            &self.x_hat,
            self.generator.m(),
            self.generator.n(),
        )
    }
}

/// Minimizes the vectorized atomic norm subject to pinned observed entries.
pub fn vanm_complete(
    x_obs: &CMat,
    mask: &ObservationMask,
    cfg: &SolverConfig,
) -> Result<VanmResult, SolverError> {
    let problem = build_vanm_completion(x_obs, mask)?;
    let sol = solve(&problem, cfg)?;
    let (generator, t, x_hat) = sol.vanm_unknowns();
    Ok(VanmResult {
        x_hat: x_hat.clone(),
        generator: generator.clone(),
        t,
        objective: sol.objective_value,
        diagnostics: sol,
    })
}

/// Solves 0.5||y - x||^2 + lambda ||x||_{A_v} over the vectorized block.
pub fn vanm_denoise(
    y: &CMat,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<VanmResult, SolverError> {
    let problem = build_vanm_denoise(y, lambda)?;
    let sol = solve(&problem, cfg)?;
    let (generator, t, x_hat) = sol.vanm_unknowns();
    Ok(VanmResult {
        x_hat: x_hat.clone(),
        generator: generator.clone(),
        t,
        objective: sol.objective_value,
        diagnostics: sol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob;
    use crate::model::{
        sample_mask, sample_model, synthesize, vectorize, AmplitudeScheme, ArrayGeometry,
        FrequencyPair, SpectralModel,
    };
    use crate::rng::stream_rng;
    use crate::sdp::SolverError;
    use num_complex::Complex64;

    #[test]
    fn full_mask_reproduces_data() {
        let geom = ArrayGeometry::half_wavelength(3, 3);
        let model = SpectralModel::new(vec![(
            Complex64::new(1.2, -0.3),
            FrequencyPair::new(0.41, 0.77).unwrap(),
        )])
        .unwrap();
        let x = synthesize(&model, &geom);
        let mask = ObservationMask::full(3, 3);
        let res = vanm_complete(&x, &mask, &SolverConfig::default()).unwrap();
        let want = vectorize(&x);
        for (a, b) in res.x_hat.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let back = res.x_hat_matrix();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn denoise_lambda_zero_returns_data() {
        let geom = ArrayGeometry::half_wavelength(3, 4);
        let mut rng = stream_rng(8, 0);
        let model = sample_model(2, 0.2, AmplitudeScheme::ComplexGaussian, &mut rng).unwrap();
        let y = synthesize(&model, &geom);
        let res = vanm_denoise(&y, 0.0, &SolverConfig::default()).unwrap();
        let want = vectorize(&y);
        let err: f64 = res
            .x_hat
            .iter()
            .zip(want.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6 * frob(&y));
    }

    #[test]
    fn k1_partial_observation_recovers() {
        // p = 0.75 at M = N = 4: exact recovery of a single atom.
        let geom = ArrayGeometry::half_wavelength(4, 4);
        let cfg = SolverConfig::default()
            .with_tolerance(1e-8)
            .with_max_iterations(50_000);
        let mut successes = 0;
        let trials = 20;
        for t in 0..trials {
            let mut rng = stream_rng(700, t);
            let model =
                sample_model(1, 0.3, AmplitudeScheme::ComplexGaussian, &mut rng).unwrap();
            let x = synthesize(&model, &geom);
            let mask = sample_mask(&geom, 12, &mut rng).unwrap();
            let mut x_obs = x.clone();
            for i in 0..4 {
                for j in 0..4 {
                    if !mask.contains(i, j) {
                        x_obs[(i, j)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            let res = vanm_complete(&x_obs, &mask, &cfg).unwrap();
            let rel = frob(&(&res.x_hat_matrix() - &x)) / frob(&x);
            if res.diagnostics.converged && rel < 1e-4 {
                successes += 1;
            }
        }
        assert!(successes >= 18, "successes {successes}/{trials}");
    }

    #[test]
    fn agrees_with_manm_on_noiseless_completion() {
        let geom = ArrayGeometry::half_wavelength(6, 6);
        let mut rng = stream_rng(31, 4);
        let model = sample_model(2, 0.25, AmplitudeScheme::ComplexGaussian, &mut rng).unwrap();
        let x = synthesize(&model, &geom);
        let mask = sample_mask(&geom, 30, &mut rng).unwrap();
        let mut x_obs = x.clone();
        for i in 0..6 {
            for j in 0..6 {
                if !mask.contains(i, j) {
                    x_obs[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let cfg = SolverConfig::default().with_max_iterations(50_000);
        let v = vanm_complete(&x_obs, &mask, &cfg).unwrap();
        let m = crate::manm::complete(&x_obs, &mask, &cfg).unwrap();
        let rel = frob(&(&v.x_hat_matrix() - &m.x_hat)) / frob(&m.x_hat);
        assert!(rel < 1e-3, "cross-method disagreement {rel}");
    }

    #[test]
    fn block_size_cap_enforced() {
        let _geom = ArrayGeometry::half_wavelength(33, 33);
        let x: CMat = ndarray::Array2::zeros((33, 33));
        let mask = ObservationMask::full(33, 33);
        assert!(matches!(
            vanm_complete(&x, &mask, &SolverConfig::default()),
            Err(SolverError::BlockTooLarge(_))
        ));
    }
}
