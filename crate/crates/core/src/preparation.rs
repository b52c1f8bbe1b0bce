//! Benchmark state pipeline: conjugate displacement, asymmetric attenuation
//! of the lower sideband, and Gaussian randomization of the displacement.

use nalgebra::{Complex, Matrix4, SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::cavity::CavityParams;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::{ModeIndex, TwoModeState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationParams<T> {
    /// Displacement of the upper sideband; the lower one receives `β*`.
    pub beta: Complex<T>,
    /// Amplitude transmission of the lower sideband, in `[0, 1]`.
    pub kappa: T,
    /// Modulation energy `|β0|²` of the randomized ensemble.
    pub beta0_sq: T,
}

impl<T: Real> PreparationParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_kappa(self.kappa)?;
        check_beta0(self.beta0_sq)?;
        if !(self.beta.re.is_finite() && self.beta.im.is_finite()) {
            return Err(Error::NonFinite { what: "beta" });
        }
        Ok(())
    }
}

fn check_kappa<T: Real>(kappa: T) -> Result<()> {
    if kappa >= T::zero() && kappa <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kappa = {kappa} outside [0, 1]")))
    }
}

fn check_beta0<T: Real>(beta0_sq: T) -> Result<()> {
    if beta0_sq >= T::zero() && beta0_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta0_sq = {beta0_sq} must be >= 0")))
    }
}

/// `|β*⟩_{ω0−Ω} |β⟩_{ω0+Ω}`.
pub fn prepare_psi1<T: Real>(beta: Complex<T>) -> TwoModeState<T> {
    TwoModeState::vacuum().displace(beta, beta.conj())
}

/// Pure-loss channel with amplitude transmission `kappa` on one mode.
pub fn attenuate_mode<T: Real>(state: &TwoModeState<T>, mode: ModeIndex, kappa: T) -> Result<TwoModeState<T>> {
    check_kappa(kappa)?;
    let k = Complex::new(kappa, T::zero());
    let one = Complex::new(T::one(), T::zero());
    match mode {
        ModeIndex::Upper => state.apply_mode_gains(k, one),
        ModeIndex::Lower => state.apply_mode_gains(one, k),
    }
}

/// `|β*κ⟩_{ω0−Ω} |β⟩_{ω0+Ω}`.
pub fn prepare_psi2<T: Real>(params: &PreparationParams<T>) -> Result<TwoModeState<T>> {
    params.validate()?;
    attenuate_mode(&prepare_psi1(params.beta), ModeIndex::Lower, params.kappa)
}

/// Linear map from `(Re β, Im β)` to the mean vector of `|ψ2⟩`.
pub fn displacement_map<T: Real>(kappa: T) -> SMatrix<T, 4, 2> {
    let two = T::lit(2.0);
    let z = T::zero();
    SMatrix::<T, 4, 2>::new(
        two,
        z, //
        z,
        two, //
        two * kappa,
        z, //
        z,
        -two * kappa,
    )
}

/// Gaussian mixture of `|ψ2⟩` over β with weight `exp(−|β|²/|β0|²)`, i.e.
/// `Var(Re β) = Var(Im β) = |β0|²/2`. Zero mean, `V = I + L Σβ Lᵀ`.
pub fn randomize_displacement<T: Real>(kappa: T, beta0_sq: T) -> Result<TwoModeState<T>> {
    check_kappa(kappa)?;
    check_beta0(beta0_sq)?;
    let l = displacement_map(kappa);
    let cov = Matrix4::identity() + l * l.transpose() * (beta0_sq * T::lit(0.5));
    TwoModeState::sideband(Vector4::zeros(), cov)
}

/// Benchmark state with sideband energy imbalance `κ²`.
pub fn prepare_rho<T: Real>(params: &PreparationParams<T>) -> Result<TwoModeState<T>> {
    params.validate()?;
    randomize_displacement(params.kappa, params.beta0_sq)
}

/// Balanced reference state.
pub fn prepare_rho_r<T: Real>(beta0_sq: T) -> Result<TwoModeState<T>> {
    randomize_displacement(T::one(), beta0_sq)
}

/// Lower-sideband attenuation produced by an asymmetry cavity locked onto it.
pub fn kappa_from_cavity<T: Real>(cavity: &CavityParams<T>) -> T {
    cavity.attenuation_factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::Coupling;
    use approx::assert_relative_eq;

    #[test]
    fn zero_displacement_is_vacuum() {
        assert_eq!(prepare_psi1::<f64>(Complex::new(0.0, 0.0)), TwoModeState::vacuum());
        assert_eq!(randomize_displacement(0.4, 0.0).unwrap(), TwoModeState::vacuum());
    }

    #[test]
    fn attenuation_limits() {
        let s = prepare_psi1(Complex::new(2.0, -1.0));
        assert_relative_eq!(attenuate_mode(&s, ModeIndex::Lower, 1.0).unwrap().mean(), s.mean());
        let gone = attenuate_mode(&s, ModeIndex::Lower, 0.0).unwrap();
        let m = gone.single_mode_marginal(ModeIndex::Lower);
        assert_eq!(m.mean, nalgebra::Vector2::zeros());
        assert_relative_eq!(m.cov, nalgebra::Matrix2::identity());
        assert!(attenuate_mode(&s, ModeIndex::Upper, 1.2).is_err());
    }

    #[test]
    fn asymmetric_amplitudes() {
        let params = PreparationParams {
            beta: Complex::new(9.5f64, 0.0),
            kappa: 10.0 / 19.0,
            beta0_sq: 0.0,
        };
        let psi2 = prepare_psi2(&params).unwrap();
        assert_relative_eq!(psi2.mean()[0], 19.0, epsilon = 1e-12);
        assert_relative_eq!(psi2.mean()[2], 10.0, epsilon = 1e-12);
        assert!((params.kappa * params.kappa - 0.28).abs() < 0.005);
    }

    #[test]
    fn closed_form_plus_minus_variances() {
        for kappa in [0.0f64, 0.3, 10.0 / 19.0, 1.0] {
            let n = 1.7;
            let s = randomize_displacement(kappa, n).unwrap().to_plus_minus();
            let c = s.cov();
            assert_relative_eq!(c[(0, 0)], 1.0 + (1.0 + kappa).powi(2) * n, epsilon = 1e-13);
            assert_relative_eq!(c[(3, 3)], 1.0 + (1.0 + kappa).powi(2) * n, epsilon = 1e-13);
            assert_relative_eq!(c[(2, 2)], 1.0 + (1.0 - kappa).powi(2) * n, epsilon = 1e-13);
            assert_relative_eq!(c[(1, 1)], 1.0 + (1.0 - kappa).powi(2) * n, epsilon = 1e-13);
        }
    }

    #[test]
    fn energy_ratio_is_kappa_squared() {
        let kappa = 10.0 / 19.0;
        let e = prepare_rho(&PreparationParams {
            beta: Complex::new(0.0, 0.0),
            kappa,
            beta0_sq: 2.0,
        })
        .unwrap()
        .energy_summary();
        assert_relative_eq!(e.ratio_lower_upper().unwrap(), kappa * kappa, epsilon = 1e-14);
        assert_relative_eq!(e.e_upper, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn marginals_are_thermal() {
        for kappa in [0.2, 0.7, 1.0] {
            let s = randomize_displacement(kappa, 3.0).unwrap();
            for mode in ModeIndex::BOTH {
                assert!(s.single_mode_marginal(mode).is_isotropic(1e-14));
            }
            assert_relative_eq!(s.cov()[(0, 0)], 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rho_r_is_kappa_one() {
        let p = PreparationParams {
            beta: Complex::new(1.0, 2.0),
            kappa: 1.0,
            beta0_sq: 0.9,
        };
        assert_eq!(prepare_rho(&p).unwrap(), prepare_rho_r(0.9).unwrap());
    }

    #[test]
    fn loss_commutes_with_randomization() {
        let n = 1.4;
        let kappa = 0.45;
        let via_loss = attenuate_mode(&prepare_rho_r(n).unwrap(), ModeIndex::Lower, kappa).unwrap();
        let direct = randomize_displacement(kappa, n).unwrap();
        assert_relative_eq!(via_loss.cov(), direct.cov(), epsilon = 1e-13);
    }

    #[test]
    fn purity_matches_determinant() {
        let n = 0.8;
        let kappa = 0.5;
        let s = randomize_displacement(kappa, n).unwrap();
        let expected = 1.0 / (1.0 + 2.0 * n * (1.0 + kappa * kappa));
        assert_relative_eq!(s.purity().unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn cavity_route_to_kappa() {
        let asym = CavityParams::new(0.0012, 4.1, Coupling::Undercoupled, 1.0).unwrap();
        assert_relative_eq!(kappa_from_cavity(&asym), 0.0012f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_params() {
        assert!(randomize_displacement(1.1, 1.0).is_err());
        assert!(randomize_displacement(0.5, -1.0).is_err());
    }
}
