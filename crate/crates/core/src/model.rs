//! Uniform-rectangular-array signal model: geometry, normalized 2D frequencies,
//! steering vectors and atoms, data synthesis, observation masks, and noise.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("angle out of range: {0}")]
    AngleRange(String),
    #[error("invalid frequency component {0}: must lie in [0,1)")]
    Frequency(f64),
    #[error("model must contain at least {need} components, got {got}")]
    TooFewComponents { need: usize, got: usize },
    #[error("amplitude {0} is zero")]
    ZeroAmplitude(usize),
    #[error("mask index ({0},{1}) out of range or duplicated")]
    MaskIndex(usize, usize),
    #[error("mask count {count} out of range 1..={max}")]
    MaskCount { count: usize, max: usize },
    #[error("rejection sampling budget of {0} attempts exhausted (k={1}, min_sep={2})")]
    SamplingBudget(usize, usize, f64),
    #[error("noise level must be nonnegative, got {0}")]
    NegativeSigma(f64),
}

/// Uniform rectangular array: M elements along x, N along y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub m_elements: usize,
    pub n_elements: usize,
    pub wavelength: f64,
    pub spacing_x: f64,
    pub spacing_y: f64,
}

impl ArrayGeometry {
    pub fn new(
        m_elements: usize,
        n_elements: usize,
        wavelength: f64,
        spacing_x: f64,
        spacing_y: f64,
    ) -> Result<Self, ModelError> {
        if m_elements < 2 || n_elements < 2 {
            return Err(ModelError::Geometry(format!(
                "need at least 2 elements per axis, got {m_elements}x{n_elements}"
            )));
        }
        if wavelength <= 0.0 || spacing_x <= 0.0 || spacing_y <= 0.0 {
            return Err(ModelError::Geometry(
                "wavelength and spacings must be positive".into(),
            ));
        }
        Ok(Self {
            m_elements,
            n_elements,
            wavelength,
            spacing_x,
            spacing_y,
        })
    }

    /// Half-wavelength-spaced URA, the configuration used throughout the experiments.
    pub fn half_wavelength(m_elements: usize, n_elements: usize) -> Self {
        Self::new(m_elements, n_elements, 1.0, 0.5, 0.5).expect("valid geometry")
    }

    pub fn size(&self) -> usize {
        self.m_elements * self.n_elements
    }
}

/// A normalized 2D frequency in the unit torus [0,1)^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub fx: f64,
    pub fy: f64,
}

impl FrequencyPair {
    pub fn new(fx: f64, fy: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&fx) || !fx.is_finite() {
            return Err(ModelError::Frequency(fx));
        }
        if !(0.0..1.0).contains(&fy) || !fy.is_finite() {
            return Err(ModelError::Frequency(fy));
        }
        Ok(Self { fx, fy })
    }

    /// Wraps arbitrary reals into [0,1)^2.
    pub fn wrapped(fx: f64, fy: f64) -> Self {
        Self {
            fx: fx.rem_euclid(1.0),
            fy: fy.rem_euclid(1.0),
        }
    }

    /// Toroidal distance: max of the per-axis wrap distances.
    pub fn wrap_dist(&self, other: &Self) -> f64 {
        wrap_dist(self.fx, other.fx).max(wrap_dist(self.fy, other.fy))
    }

    /// Euclidean-style squared error with wrap-aware per-axis differences.
    pub fn wrap_sq_err(&self, other: &Self) -> f64 {
        let dx = wrap_dist(self.fx, other.fx);
        let dy = wrap_dist(self.fy, other.fy);
        dx * dx + dy * dy
    }
}

/// Wrap-around (toroidal) distance on the unit circle, in [0, 0.5].
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Ground-truth K-sparse spectral model: (amplitude, frequency) components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub components: Vec<(Complex64, FrequencyPair)>,
}

impl SpectralModel {
    pub fn new(components: Vec<(Complex64, FrequencyPair)>) -> Result<Self, ModelError> {
        if components.is_empty() {
            return Err(ModelError::TooFewComponents { need: 1, got: 0 });
        }
        for (i, (s, _)) in components.iter().enumerate() {
            if s.norm() == 0.0 {
                return Err(ModelError::ZeroAmplitude(i));
            }
        }
        Ok(Self { components })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn frequencies(&self) -> Vec<FrequencyPair> {
        self.components.iter().map(|(_, f)| *f).collect()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.components.iter().map(|(s, _)| *s).collect()
    }

    /// Sum of amplitude moduli; the atomic-norm value of the synthesized data
    /// whenever the decomposition is the minimal one.
    pub fn amplitude_l1(&self) -> f64 {
        self.components.iter().map(|(s, _)| s.norm()).sum()
    }
}

/// Set of observed entries of an M x N data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    pub m: usize,
    pub n: usize,
    indices: Vec<(usize, usize)>,
}

impl ObservationMask {
    pub fn new(m: usize, n: usize, mut indices: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        if indices.is_empty() {
            return Err(ModelError::MaskCount {
                count: 0,
                max: m * n,
            });
        }
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::MaskIndex(w[0].0, w[0].1));
            }
        }
        for &(r, c) in &indices {
            if r >= m || c >= n {
                return Err(ModelError::MaskIndex(r, c));
            }
        }
        Ok(Self { m, n, indices })
    }

    pub fn full(m: usize, n: usize) -> Self {
        let indices = (0..m)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .collect();
        Self { m, n, indices }
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.m * self.n
    }

    /// Observation fraction p = |Omega| / (MN).
    pub fn fraction(&self) -> f64 {
        self.indices.len() as f64 / (self.m * self.n) as f64
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.indices.binary_search(&(r, c)).is_ok()
    }
}

/// Maps (azimuth, elevation) to the normalized spatial frequency pair:
/// fx = (dx/lambda) cos(az) cos(el), fy = (dy/lambda) sin(az) cos(el), each mod 1.
pub fn angles_to_frequencies(
    azimuth: f64,
    elevation: f64,
    geom: &ArrayGeometry,
) -> Result<FrequencyPair, ModelError> {
    if !(0.0..TAU).contains(&azimuth) {
        return Err(ModelError::AngleRange(format!("azimuth {azimuth}")));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&elevation) {
        return Err(ModelError::AngleRange(format!("elevation {elevation}")));
    }
    let ce = elevation.cos();
    let fx = geom.spacing_x / geom.wavelength * azimuth.cos() * ce;
    let fy = geom.spacing_y / geom.wavelength * azimuth.sin() * ce;
    Ok(FrequencyPair::wrapped(fx, fy))
}

/// Steering vector with entries e^{-j 2 pi i f}, i = 0..len-1.
pub fn steering_vector(f: f64, len: usize) -> CVec {
    Array1::from_iter((0..len).map(|i| Complex64::from_polar(1.0, -TAU * i as f64 * f)))
}

/// Rank-1 matrix atom a_X(fx) a_Y(fy)^T; every entry has unit modulus.
pub fn matrix_atom(f: FrequencyPair, geom: &ArrayGeometry) -> CMat {
    let ax = steering_vector(f.fx, geom.m_elements);
    let ay = steering_vector(f.fy, geom.n_elements);
    let mut out = Array2::zeros((geom.m_elements, geom.n_elements));
    for i in 0..geom.m_elements {
        for j in 0..geom.n_elements {
            out[(i, j)] = ax[i] * ay[j];
        }
    }
    out
}

/// Unit-norm vectorized atom: (1/sqrt(MN)) a_Y(fy) (x) a_X(fx), matching the
/// column-major vectorization `vectorize`.
pub fn vector_atom(f: FrequencyPair, geom: &ArrayGeometry) -> CVec {
    let scale = 1.0 / (geom.size() as f64).sqrt();
    let ax = steering_vector(f.fx, geom.m_elements);
    let ay = steering_vector(f.fy, geom.n_elements);
    let mut out = Array1::zeros(geom.size());
    for j in 0..geom.n_elements {
        for i in 0..geom.m_elements {
            out[j * geom.m_elements + i] = scale * ay[j] * ax[i];
        }
    }
    out
}

/// Column-major vectorization: x[i + j*M] = X[i, j].
pub fn vectorize(x: &CMat) -> CVec {
    let (m, n) = x.dim();
    let mut out = Array1::zeros(m * n);
    for j in 0..n {
        for i in 0..m {
            out[j * m + i] = x[(i, j)];
        }
    }
    out
}

/// Inverse of `vectorize`.
pub fn devectorize(x: &CVec, m: usize, n: usize) -> CMat {
    assert_eq!(x.len(), m * n, "vector length must equal m*n");
    let mut out = Array2::zeros((m, n));
    for j in 0..n {
        for i in 0..m {
            out[(i, j)] = x[j * m + i];
        }
    }
    out
}

/// Noiseless data matrix X = sum_k s_k a_X(fx_k) a_Y(fy_k)^T.
pub fn synthesize(model: &SpectralModel, geom: &ArrayGeometry) -> CMat {
    let mut x = Array2::zeros((geom.m_elements, geom.n_elements));
    for (s, f) in &model.components {
        let ax = steering_vector(f.fx, geom.m_elements);
        let ay = steering_vector(f.fy, geom.n_elements);
        for i in 0..geom.m_elements {
            for j in 0..geom.n_elements {
                x[(i, j)] += s * ax[i] * ay[j];
            }
        }
    }
    x
}

/// Minimum pairwise separation: min over pairs of max(wrap_dx, wrap_dy).
pub fn min_separation(model: &SpectralModel) -> Result<f64, ModelError> {
    if model.k() < 2 {
        return Err(ModelError::TooFewComponents {
            need: 2,
            got: model.k(),
        });
    }
    let freqs = model.frequencies();
    let mut best = f64::INFINITY;
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            best = best.min(freqs[i].wrap_dist(&freqs[j]));
        }
    }
    Ok(best)
}

/// Amplitude law used when sampling random models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeScheme {
    /// Independent standard circular complex Gaussian amplitudes.
    ComplexGaussian,
    /// Unit magnitude with uniform random phase.
    UnitModulusRandomPhase,
}

const SAMPLING_BUDGET: usize = 100_000;

/// Draws k frequencies uniformly on the torus, rejecting whole sets until the
/// separation condition holds; errors once the attempt budget is spent.
pub fn sample_model<R: Rng>(
    k: usize,
    min_sep: f64,
    scheme: AmplitudeScheme,
    rng: &mut R,
) -> Result<SpectralModel, ModelError> {
    if k == 0 {
        return Err(ModelError::TooFewComponents { need: 1, got: 0 });
    }
    let freqs = sample_separated_frequencies(k, min_sep, rng)?;
    let components = freqs
        .into_iter()
        .map(|f| (sample_amplitude(scheme, rng), f))
        .collect();
    SpectralModel::new(components)
}

/// One joint draw of k separated frequencies (rejection over whole sets).
pub fn sample_separated_frequencies<R: Rng>(
    k: usize,
    min_sep: f64,
    rng: &mut R,
) -> Result<Vec<FrequencyPair>, ModelError> {
    for _ in 0..SAMPLING_BUDGET {
        let cand: Vec<FrequencyPair> = (0..k)
            .map(|_| FrequencyPair::wrapped(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let ok = k < 2
            || (0..k).all(|i| (i + 1..k).all(|j| cand[i].wrap_dist(&cand[j]) >= min_sep));
        if ok {
            return Ok(cand);
        }
    }
    Err(ModelError::SamplingBudget(SAMPLING_BUDGET, k, min_sep))
}

pub fn sample_amplitude<R: Rng>(scheme: AmplitudeScheme, rng: &mut R) -> Complex64 {
    match scheme {
        AmplitudeScheme::ComplexGaussian => {
            let normal = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
            loop {
                let s = Complex64::new(normal.sample(rng), normal.sample(rng));
                if s.norm() > 1e-12 {
                    return s;
                }
            }
        }
        AmplitudeScheme::UnitModulusRandomPhase => {
            Complex64::from_polar(1.0, rng.gen::<f64>() * TAU)
        }
    }
}

/// Adds i.i.d. circularly-symmetric complex Gaussian noise CN(0, sigma^2):
/// real and imaginary parts are each N(0, sigma^2 / 2).
pub fn add_noise<R: Rng>(x: &CMat, sigma: f64, rng: &mut R) -> Result<CMat, ModelError> {
    if sigma < 0.0 {
        return Err(ModelError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma / (2.0f64).sqrt()).unwrap();
    Ok(x.map(|v| v + Complex64::new(normal.sample(rng), normal.sample(rng))))
}

/// Noise standard deviation for a given SNR in dB under SNR = 1/sigma^2.
pub fn snr_db_to_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Uniformly random subset of exactly `count` distinct entries.
pub fn sample_mask<R: Rng>(
    geom: &ArrayGeometry,
    count: usize,
    rng: &mut R,
) -> Result<ObservationMask, ModelError> {
    let total = geom.size();
    if count == 0 || count > total {
        return Err(ModelError::MaskCount { count, max: total });
    }
    let chosen = rand::seq::index::sample(rng, total, count);
    let indices = chosen
        .into_iter()
        .map(|t| (t % geom.m_elements, t / geom.m_elements))
        .collect();
    ObservationMask::new(geom.m_elements, geom.n_elements, indices)
}

/// Random permutation of all MN indices; prefixes are exact-cardinality uniform
/// masks and nested in p, which the phase-transition sweep relies on.
pub fn sample_mask_order<R: Rng>(geom: &ArrayGeometry, rng: &mut R) -> Vec<(usize, usize)> {
    let total = geom.size();
    let perm = rand::seq::index::sample(rng, total, total);
    perm.into_iter()
        .map(|t| (t % geom.m_elements, t / geom.m_elements))
        .collect()
}

// ---- JSON interchange -------------------------------------------------------

/// Serialized form of a model: freqs as [fx, fy], amps as [re, im].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub k: usize,
    pub freqs: Vec<[f64; 2]>,
    pub amps: Vec<[f64; 2]>,
}

impl From<&SpectralModel> for ModelJson {
    fn from(m: &SpectralModel) -> Self {
        Self {
            k: m.k(),
            freqs: m.components.iter().map(|(_, f)| [f.fx, f.fy]).collect(),
            amps: m.components.iter().map(|(s, _)| [s.re, s.im]).collect(),
        }
    }
}

impl TryFrom<&ModelJson> for SpectralModel {
    type Error = ModelError;
    fn try_from(j: &ModelJson) -> Result<Self, ModelError> {
        if j.freqs.len() != j.amps.len() {
            return Err(ModelError::TooFewComponents {
                need: j.freqs.len(),
                got: j.amps.len(),
            });
        }
        let comps = j
            .freqs
            .iter()
            .zip(&j.amps)
            .map(|(f, a)| Ok((Complex64::new(a[0], a[1]), FrequencyPair::new(f[0], f[1])?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        SpectralModel::new(comps)
    }
}

/// Serialized form of a mask: index list plus dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskJson {
    pub m: usize,
    pub n: usize,
    pub indices: Vec<[usize; 2]>,
}

impl From<&ObservationMask> for MaskJson {
    fn from(mask: &ObservationMask) -> Self {
        Self {
            m: mask.m,
            n: mask.n,
            indices: mask.indices().iter().map(|&(r, c)| [r, c]).collect(),
        }
    }
}

impl TryFrom<&MaskJson> for ObservationMask {
    type Error = ModelError;
    fn try_from(j: &MaskJson) -> Result<Self, ModelError> {
        ObservationMask::new(j.m, j.n, j.indices.iter().map(|&[r, c]| (r, c)).collect())
    }
}

/// Serialized complex matrix: entries [re, im] in row-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixJson {
    fn from(x: &CMat) -> Self {
        let (m, n) = x.dim();
        Self {
            m,
            n,
            entries: x.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

impl From<&MatrixJson> for CMat {
    fn from(j: &MatrixJson) -> Self {
        Array2::from_shape_vec(
            (j.m, j.n),
            j.entries
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect(),
        )
        .expect("entry count matches dimensions")
    }
}
