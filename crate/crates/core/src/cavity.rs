//! Optical resonator response and the Gaussian channel it applies to the
//! sideband pair.
//!
//! The line shape is the single-pole one-port model
//! `r(x) = (d + i x) / (1 + i x)` with `d = ±sqrt(R0)`, `x` the detuning in
//! linewidths. Scan detunings are measured as cavity minus carrier,
//! `Δ = (ω_c − ω0) / γ`, so the upper sideband is resonant at `Δ = +Ω/γ`.
//! A frequency `ω` then sits at `x = (ω − ω_c)/γ` and, because
//! `r(−x) = r*(x)`, the carrier sees `r*(Δ)` and the sidebands `r*(Δ ∓ Ω/γ)`.
//! Referred to the reflected carrier phase, the photocurrent coefficients are
//!
//! ```text
//! R_{±Ω} = r*(Δ) / |r(Δ)| · r(Δ ∓ Ω/γ)
//! ```

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::TwoModeState;

/// Carrier amplitudes below this are treated as extinguished.
pub const CARRIER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coupling {
    /// Negative on-resonance amplitude reflection.
    #[default]
    #[serde(rename = "over")]
    Overcoupled,
    #[serde(rename = "under")]
    Undercoupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams<T> {
    /// Intensity reflectivity on resonance, in `[0, 1]`.
    pub r0_intensity: T,
    /// Cavity half-linewidth γ in MHz.
    pub bandwidth_gamma: T,
    pub coupling: Coupling,
    /// Mode-matching efficiency in `(0, 1]`.
    pub mode_matching_eta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandResponse<T> {
    pub r_upper: Complex<T>,
    pub r_lower: Complex<T>,
    pub g_plus: T,
    pub g_minus: T,
    pub g_r: T,
    pub g_i: T,
}

impl<T: Real> SidebandResponse<T> {
    pub fn from_coefficients(r_upper: Complex<T>, r_lower: Complex<T>) -> Self {
        let nu = r_upper.norm_sqr();
        let nl = r_lower.norm_sqr();
        let g = r_upper * r_lower * T::lit(0.5);
        SidebandResponse {
            r_upper,
            r_lower,
            g_plus: nu + nl,
            g_minus: nu - nl,
            g_r: g.re,
            g_i: g.im,
        }
    }

    /// Lossless response of a homodyne detector with local-oscillator phase `phi`.
    pub fn homodyne(phi: T) -> Self {
        let lo = Complex::new(phi.cos(), phi.sin());
        Self::from_coefficients(lo, lo)
    }
}

impl<T: Real> CavityParams<T> {
    pub fn new(r0_intensity: T, bandwidth_gamma: T, coupling: Coupling, mode_matching_eta: T) -> Result<Self> {
        let p = CavityParams {
            r0_intensity,
            bandwidth_gamma,
            coupling,
            mode_matching_eta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Ideal mode-matched cavity.
    pub fn matched(r0_intensity: T, bandwidth_gamma: T, coupling: Coupling) -> Result<Self> {
        Self::new(r0_intensity, bandwidth_gamma, coupling, T::one())
    }

    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        if !(self.r0_intensity >= z && self.r0_intensity <= o) {
            return Err(Error::InvalidParameter(format!(
                "r0_intensity = {} outside [0, 1]",
                self.r0_intensity
            )));
        }
        if !(self.bandwidth_gamma > z && self.bandwidth_gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth = {} must be positive",
                self.bandwidth_gamma
            )));
        }
        if !(self.mode_matching_eta > z && self.mode_matching_eta <= o) {
            return Err(Error::InvalidParameter(format!(
                "mode matching eta = {} outside (0, 1]",
                self.mode_matching_eta
            )));
        }
        Ok(())
    }

    /// Signed on-resonance amplitude reflection `d`.
    pub fn resonance_amplitude(&self) -> T {
        let d = self.r0_intensity.sqrt();
        match self.coupling {
            Coupling::Overcoupled => -d,
            Coupling::Undercoupled => d,
        }
    }

    /// Mode-matched line shape `(d + iΔ) / (1 + iΔ)`.
    pub fn reflection(&self, delta: T) -> Complex<T> {
        let num = Complex::new(self.resonance_amplitude(), delta);
        let den = Complex::new(T::one(), delta);
        num / den
    }

    /// `(1 − η) + η r(Δ)`: the unmatched fraction bypasses the resonance.
    pub fn effective_reflection(&self, delta: T) -> Complex<T> {
        let eta = self.mode_matching_eta;
        self.reflection(delta) * eta + Complex::new(T::one() - eta, T::zero())
    }

    /// Amplitude coupled to the loss port, `sqrt(1 − |r_eff|²)`.
    pub fn transmission(&self, delta: T) -> T {
        (T::one() - self.effective_reflection(delta).norm_sqr())
            .max(T::zero())
            .sqrt()
    }

    /// Magnitude of the effective reflection on resonance; the amplitude
    /// attenuation a sideband suffers when the cavity is locked onto it.
    pub fn attenuation_factor(&self) -> T {
        self.effective_reflection(T::zero()).norm_sqr().sqrt()
    }

    pub fn sideband_response(&self, delta: T, omega_over_gamma: T) -> Result<SidebandResponse<T>> {
        let carrier = self.effective_reflection(delta);
        let magnitude = carrier.norm_sqr().sqrt();
        // NaN magnitude counts as extinguished.
        if magnitude.partial_cmp(&T::lit(CARRIER_FLOOR)).is_none_or(|o| o.is_lt()) {
            return Err(Error::CarrierExtinguished {
                detuning: delta.to_f64_lossy(),
                magnitude: magnitude.to_f64_lossy(),
            });
        }
        let phase = carrier.conj() / magnitude;
        let r_upper = phase * self.effective_reflection(delta - omega_over_gamma);
        let r_lower = phase * self.effective_reflection(delta + omega_over_gamma);
        Ok(SidebandResponse::from_coefficients(r_upper, r_lower))
    }

    /// State seen by an ideal carrier-referenced detector after reflection:
    /// each sideband amplitude is multiplied by `conj(R)`, with vacuum
    /// admixed through the loss port.
    pub fn apply_channel(&self, state: &TwoModeState<T>, delta: T, omega_over_gamma: T) -> Result<TwoModeState<T>> {
        let resp = self.sideband_response(delta, omega_over_gamma)?;
        state.apply_mode_gains(resp.r_upper.conj(), resp.r_lower.conj())
    }
}
