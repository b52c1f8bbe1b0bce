//! Forward models for spectral homodyne detection and resonator detection.
//!
//! Both techniques are linear readouts of the sideband quadratures. For
//! photocurrent coefficients `R_±Ω = x_±Ω + i y_±Ω` the cosine and sine
//! components are
//!
//! ```text
//! J_cos =  x_Ω p_Ω + y_Ω q_Ω + x_−Ω p_−Ω + y_−Ω q_−Ω + J_u
//! J_sin = −y_Ω p_Ω + x_Ω q_Ω + y_−Ω p_−Ω − x_−Ω q_−Ω + J_v
//! ```
//!
//! where `J_u`, `J_v` are independent loss-port vacuum terms of variance
//! `2 − g+`. The noise power in shot-noise units is `(Var J_cos + Var J_sin)/4`.
//! Expanding the quadratic forms gives the four-coefficient model
//!
//! ```text
//! S_RD = 1 + g+/4 (E_Ω + E_−Ω) + g−/4 (E_Ω − E_−Ω) + g_r/2 (A − B) + g_i C
//! ```
//!
//! with `g+ = |R_Ω|² + |R_−Ω|²`, `g− = |R_Ω|² − |R_−Ω|²`,
//! `g_r + i g_i = R_Ω R_−Ω / 2` and `A, B, C` the homodyne coefficients.
//! A homodyne detector is the lossless special case `R_±Ω = e^{iφ}`, for
//! which the same expression reduces to the homodyne noise power.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityParams, SidebandResponse};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::{HDCoefficients, TwoModeState};

/// Minimum number of points in a [`ScanCurve`].
pub const MIN_SCAN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotocurrentMoments<T> {
    pub mean_cos: T,
    pub mean_sin: T,
    pub var_cos: T,
    pub var_sin: T,
    pub cov_cossin: T,
}

impl<T: Real> PhotocurrentMoments<T> {
    /// Noise power relative to the shot-noise level.
    pub fn noise_power(&self) -> T {
        (self.var_cos + self.var_sin) * T::lit(0.25)
    }
}

/// Standard errors attached to estimated [`PhotocurrentMoments`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentSigmas<T> {
    pub mean_cos: T,
    pub mean_sin: T,
    pub var_cos: T,
    pub var_sin: T,
    pub cov_cossin: T,
}

/// Linear readout `(J_cos, J_sin)` of the sideband quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReadout<T: Real> {
    pub cos_row: Vector4<T>,
    pub sin_row: Vector4<T>,
    /// Variance of each loss-port vacuum term.
    pub closure: T,
}

impl<T: Real> QuadratureReadout<T> {
    pub fn from_response(resp: &SidebandResponse<T>) -> Self {
        let (u, l) = (resp.r_upper, resp.r_lower);
        QuadratureReadout {
            cos_row: Vector4::new(u.re, u.im, l.re, l.im),
            sin_row: Vector4::new(-u.im, u.re, l.im, -l.re),
            closure: (T::lit(2.0) - resp.g_plus).max(T::zero()),
        }
    }

    pub fn homodyne(phi: T) -> Self {
        Self::from_response(&SidebandResponse::homodyne(phi))
    }

    /// Moments of the readout for a sideband-basis mean and covariance.
    pub fn moments_of(&self, mean: &Vector4<T>, cov: &Matrix4<T>) -> PhotocurrentMoments<T> {
        let (a, b) = (&self.cos_row, &self.sin_row);
        PhotocurrentMoments {
            mean_cos: a.dot(mean),
            mean_sin: b.dot(mean),
            var_cos: a.dot(&(cov * a)) + self.closure,
            var_sin: b.dot(&(cov * b)) + self.closure,
            cov_cossin: a.dot(&(cov * b)),
        }
    }

    pub fn moments(&self, state: &TwoModeState<T>) -> PhotocurrentMoments<T> {
        self.moments_of(&state.sideband_mean(), &state.sideband_cov())
    }
}

/// The four state coefficients that a phase-averaged resonator scan resolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdCoefficients<T> {
    pub energy_sum: T,
    pub energy_imbalance: T,
    pub a_minus_b: T,
    pub c: T,
}

impl<T: Real> RdCoefficients<T> {
    pub const NAMES: [&'static str; 4] = ["energy_sum", "energy_imbalance", "a_minus_b", "c"];

    pub fn from_state(state: &TwoModeState<T>) -> Self {
        let e = state.energy_summary();
        let hd = state.hd_coefficients();
        RdCoefficients {
            energy_sum: e.sum,
            energy_imbalance: e.imbalance,
            a_minus_b: hd.a - hd.b,
            c: hd.c,
        }
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.energy_sum, self.energy_imbalance, self.a_minus_b, self.c]
    }
}

/// Weights multiplying [`RdCoefficients`] in `S_RD − 1`.
pub fn rd_design_row<T: Real>(resp: &SidebandResponse<T>) -> [T; 4] {
    [
        resp.g_plus * T::lit(0.25),
        resp.g_minus * T::lit(0.25),
        resp.g_r * T::lit(0.5),
        resp.g_i,
    ]
}

/// Resonator noise power from the four-coefficient expansion.
pub fn rd_power_from_coefficients<T: Real>(resp: &SidebandResponse<T>, coeffs: &RdCoefficients<T>) -> T {
    let row = rd_design_row(resp);
    T::one()
        + row
            .iter()
            .zip(coeffs.as_array())
            .fold(T::zero(), |acc, (w, c)| acc + *w * c)
}

/// Homodyne noise power from its three coefficients, ideal visibility.
pub fn hd_power_from_coefficients<T: Real>(coeffs: &HDCoefficients<T>, phi: T) -> T {
    let half = T::lit(0.5);
    let (s, c) = phi.sin_cos();
    half * c * c * coeffs.a + half * s * s * coeffs.b + half * (phi + phi).sin() * coeffs.c
}

fn check_visibility<T: Real>(visibility: T) -> Result<()> {
    if visibility > T::zero() && visibility <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "visibility {visibility} outside (0, 1]"
        )))
    }
}

/// Homodyne noise power at LO phase `phi`, shot-noise normalized. A
/// visibility `v < 1` mixes the ideal curve toward the shot-noise level as
/// `1 + v² (S − 1)`.
pub fn s_hd<T: Real>(state: &TwoModeState<T>, phi: T, visibility: T) -> Result<T> {
    check_visibility(visibility)?;
    state.ensure_physical()?;
    let ideal = hd_power_from_coefficients(&state.hd_coefficients(), phi);
    Ok(T::one() + visibility * visibility * (ideal - T::one()))
}

/// Locked homodyne moments; the lossless counterpart of [`rd_moments`].
pub fn hd_moments<T: Real>(state: &TwoModeState<T>, phi: T) -> Result<PhotocurrentMoments<T>> {
    state.ensure_physical()?;
    Ok(QuadratureReadout::homodyne(phi).moments(state))
}

pub fn rd_moments<T: Real>(
    state: &TwoModeState<T>,
    cavity: &CavityParams<T>,
    delta: T,
    omega_over_gamma: T,
) -> Result<PhotocurrentMoments<T>> {
    state.ensure_physical()?;
    let resp = cavity.sideband_response(delta, omega_over_gamma)?;
    Ok(QuadratureReadout::from_response(&resp).moments(state))
}

pub fn s_rd<T: Real>(state: &TwoModeState<T>, cavity: &CavityParams<T>, delta: T, omega_over_gamma: T) -> Result<T> {
    rd_moments(state, cavity, delta, omega_over_gamma).map(|m| m.noise_power())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Abscissa is the LO phase in radians.
    HomodynePhase,
    /// Abscissa is the cavity detuning in linewidths.
    ResonatorDetuning,
}

impl ScanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanKind::HomodynePhase => "homodyne_phase",
            ScanKind::ResonatorDetuning => "resonator_detuning",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "homodyne_phase" => Some(ScanKind::HomodynePhase),
            "resonator_detuning" => Some(ScanKind::ResonatorDetuning),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCurve<T> {
    pub kind: ScanKind,
    pub abscissa: Vec<T>,
    pub values: Vec<T>,
    /// Standard error per point; zero for noiseless curves.
    pub sigma: Vec<T>,
}

impl<T: Real> ScanCurve<T> {
    pub fn new(kind: ScanKind, abscissa: Vec<T>, values: Vec<T>, sigma: Vec<T>) -> Result<Self> {
        if abscissa.len() != values.len() || values.len() != sigma.len() {
            return Err(Error::InvalidParameter(format!(
                "scan arrays differ in length ({}, {}, {})",
                abscissa.len(),
                values.len(),
                sigma.len()
            )));
        }
        if values.len() < MIN_SCAN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "scan needs at least {MIN_SCAN_POINTS} points, got {}",
                values.len()
            )));
        }
        if abscissa.iter().chain(&values).chain(&sigma).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "scan curve" });
        }
        if sigma.iter().any(|s| *s < T::zero()) {
            return Err(Error::InvalidParameter("negative sigma in scan".into()));
        }
        Ok(ScanCurve {
            kind,
            abscissa,
            values,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma.iter().all(|s| *s == T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Samples averaged per spectral estimate.
    pub samples_per_point: usize,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(samples_per_point: usize, seed: u64) -> Result<Self> {
        if samples_per_point < 2 {
            return Err(Error::InvalidParameter(format!(
                "samples_per_point must be >= 2, got {samples_per_point}"
            )));
        }
        Ok(NoiseModel {
            samples_per_point,
            seed,
        })
    }

    /// Independent random stream for grid point `index`. Streams depend only
    /// on `(seed, index)`, never on evaluation order.
    pub fn stream(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Standard error of a variance estimate of size `value`.
    pub fn variance_sigma(&self, value: f64) -> f64 {
        value.abs() * (2.0 / (self.samples_per_point - 1) as f64).sqrt()
    }
}

/// Perturbs a variance estimate by the Gaussian approximation of its
/// `χ²_{N−1}/(N−1)` fluctuation. Returns `(noisy, sigma)`.
pub fn add_estimation_noise<R: Rng + ?Sized>(value: f64, samples: usize, rng: &mut R) -> (f64, f64) {
    assert!(samples >= 2, "estimation noise needs at least two samples");
    let sigma = value.abs() * (2.0 / (samples - 1) as f64).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    (value + sigma * z, sigma)
}

fn noisy_curve<T: Real>(
    kind: ScanKind,
    abscissa: Vec<T>,
    clean: Vec<T>,
    noise: Option<&NoiseModel>,
) -> Result<ScanCurve<T>> {
    let (values, sigma) = match noise {
        None => {
            let n = clean.len();
            (clean, vec![T::zero(); n])
        }
        Some(model) => clean
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let (noisy, s) = add_estimation_noise(v.to_f64_lossy(), model.samples_per_point, &mut model.stream(i));
                (T::lit(noisy), T::lit(s))
            })
            .unzip(),
    };
    ScanCurve::new(kind, abscissa, values, sigma)
}

pub fn hd_scan<T: Real>(
    state: &TwoModeState<T>,
    phi_grid: &[T],
    visibility: T,
    noise: Option<&NoiseModel>,
) -> Result<ScanCurve<T>> {
    check_visibility(visibility)?;
    state.ensure_physical()?;
    let coeffs = state.hd_coefficients();
    let v2 = visibility * visibility;
    let clean: Vec<T> = phi_grid
        .par_iter()
        .map(|&phi| T::one() + v2 * (hd_power_from_coefficients(&coeffs, phi) - T::one()))
        .collect();
    noisy_curve(ScanKind::HomodynePhase, phi_grid.to_vec(), clean, noise)
}

/// Evaluates the sideband response on a detuning grid, dropping points where
/// the carrier is extinguished.
pub fn responses_on_grid<T: Real>(
    cavity: &CavityParams<T>,
    delta_grid: &[T],
    omega_over_gamma: T,
) -> Result<Vec<(T, SidebandResponse<T>)>> {
    let evaluated: Vec<_> = delta_grid
        .par_iter()
        .map(|&d| (d, cavity.sideband_response(d, omega_over_gamma)))
        .collect();
    let mut out = Vec::with_capacity(evaluated.len());
    for (d, resp) in evaluated {
        match resp {
            Ok(r) => out.push((d, r)),
            Err(Error::CarrierExtinguished { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Phase-averaged resonator scan: noise power versus detuning.
pub fn rd_scan<T: Real>(
    state: &TwoModeState<T>,
    cavity: &CavityParams<T>,
    delta_grid: &[T],
    omega_over_gamma: T,
    noise: Option<&NoiseModel>,
) -> Result<ScanCurve<T>> {
    state.ensure_physical()?;
    let (mean, cov) = (state.sideband_mean(), state.sideband_cov());
    let responses = responses_on_grid(cavity, delta_grid, omega_over_gamma)?;
    let (abscissa, clean): (Vec<T>, Vec<T>) = responses
        .par_iter()
        .map(|(d, r)| {
            let m = QuadratureReadout::from_response(r).moments_of(&mean, &cov);
            (*d, m.noise_power())
        })
        .unzip();
    noisy_curve(ScanKind::ResonatorDetuning, abscissa, clean, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockedPoint<T> {
    pub detuning: T,
    pub moments: PhotocurrentMoments<T>,
    pub sigma: MomentSigmas<T>,
}

/// Phase-locked resonator scan: full first and second photocurrent moments
/// at every detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockedScan<T> {
    /// `None` for a noiseless scan.
    pub samples_per_point: Option<usize>,
    pub points: Vec<LockedPoint<T>>,
}

impl<T: Real> LockedScan<T> {
    pub fn detunings(&self) -> Vec<T> {
        self.points.iter().map(|p| p.detuning).collect()
    }
}

fn perturb_moments<R: Rng>(
    m: &PhotocurrentMoments<f64>,
    n: usize,
    rng: &mut R,
) -> (PhotocurrentMoments<f64>, MomentSigmas<f64>) {
    let nf = n as f64;
    let sigma = MomentSigmas {
        mean_cos: (m.var_cos / nf).sqrt(),
        mean_sin: (m.var_sin / nf).sqrt(),
        var_cos: m.var_cos * (2.0 / (nf - 1.0)).sqrt(),
        var_sin: m.var_sin * (2.0 / (nf - 1.0)).sqrt(),
        cov_cossin: ((m.var_cos * m.var_sin + m.cov_cossin * m.cov_cossin) / (nf - 1.0)).sqrt(),
    };
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let noisy = PhotocurrentMoments {
        mean_cos: m.mean_cos + sigma.mean_cos * z(),
        mean_sin: m.mean_sin + sigma.mean_sin * z(),
        var_cos: m.var_cos + sigma.var_cos * z(),
        var_sin: m.var_sin + sigma.var_sin * z(),
        cov_cossin: m.cov_cossin + sigma.cov_cossin * z(),
    };
    (noisy, sigma)
}

fn map_moments<A: Copy, B>(m: &PhotocurrentMoments<A>, f: impl Fn(A) -> B) -> PhotocurrentMoments<B> {
    PhotocurrentMoments {
        mean_cos: f(m.mean_cos),
        mean_sin: f(m.mean_sin),
        var_cos: f(m.var_cos),
        var_sin: f(m.var_sin),
        cov_cossin: f(m.cov_cossin),
    }
}

pub fn rd_locked_scan<T: Real>(
    state: &TwoModeState<T>,
    cavity: &CavityParams<T>,
    delta_grid: &[T],
    omega_over_gamma: T,
    noise: Option<&NoiseModel>,
) -> Result<LockedScan<T>> {
    state.ensure_physical()?;
    let (mean, cov) = (state.sideband_mean(), state.sideband_cov());
    let responses = responses_on_grid(cavity, delta_grid, omega_over_gamma)?;
    let points = responses
        .par_iter()
        .enumerate()
        .map(|(i, (d, r))| {
            let clean = QuadratureReadout::from_response(r).moments_of(&mean, &cov);
            let (moments, sigma) = match noise {
                None => (clean, MomentSigmas::default_zero()),
                Some(model) => {
                    let (m, s) = perturb_moments(
                        &map_moments(&clean, |x| x.to_f64_lossy()),
                        model.samples_per_point,
                        &mut model.stream(i),
                    );
                    (map_moments(&m, T::lit), s.map(T::lit))
                }
            };
            LockedPoint {
                detuning: *d,
                moments,
                sigma,
            }
        })
        .collect();
    Ok(LockedScan {
        samples_per_point: noise.map(|m| m.samples_per_point),
        points,
    })
}

impl<T: Real> MomentSigmas<T> {
    fn default_zero() -> Self {
        MomentSigmas {
            mean_cos: T::zero(),
            mean_sin: T::zero(),
            var_cos: T::zero(),
            var_sin: T::zero(),
            cov_cossin: T::zero(),
        }
    }
}

impl MomentSigmas<f64> {
    fn map<B>(&self, f: impl Fn(f64) -> B) -> MomentSigmas<B> {
        MomentSigmas {
            mean_cos: f(self.mean_cos),
            mean_sin: f(self.mean_sin),
            var_cos: f(self.var_cos),
            var_sin: f(self.var_sin),
            cov_cossin: f(self.cov_cossin),
        }
    }
}
