//! Two-mode Gaussian states of the sideband pair ω0 ± Ω.
//!
//! Quadratures are ordered `(p_up, q_up, p_low, q_low)` in the sideband basis
//! and `(p+, q+, p-, q-)` in the symmetric/antisymmetric basis, with
//! `a = (p + i q) / 2` so the vacuum has unit variance in every quadrature.

use nalgebra::{Complex, DMatrix, Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeIndex {
    /// ω0 + Ω
    Upper,
    /// ω0 − Ω
    Lower,
}

impl ModeIndex {
    pub const BOTH: [ModeIndex; 2] = [ModeIndex::Upper, ModeIndex::Lower];

    #[inline]
    pub(crate) fn offset(self) -> usize {
        match self {
            ModeIndex::Upper => 0,
            ModeIndex::Lower => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Sideband,
    #[serde(rename = "plusminus")]
    PlusMinus,
}

/// Orthogonal matrix taking sideband quadratures to the ± modes. It is
/// symmetric and squares to the identity.
pub fn plus_minus_transform<T: Real>() -> Matrix4<T> {
    let h = T::frac_1_sqrt_2();
    let z = T::zero();
    Matrix4::new(
        h, z, h, z, //
        z, h, z, h, //
        h, z, -h, z, //
        z, h, z, -h,
    )
}

/// Block-diagonal symplectic form with per-mode blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form<T: Real>() -> Matrix4<T> {
    let o = T::one();
    let z = T::zero();
    Matrix4::new(
        z, o, z, z, //
        -o, z, z, z, //
        z, z, z, o, //
        z, z, -o, z,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState<T: Real> {
    mean: Vector4<T>,
    cov: Matrix4<T>,
    basis: Basis,
}

/// Coefficients of the homodyne noise power: `A = Δ²p+ + Δ²q-`,
/// `B = Δ²p- + Δ²q+`, `C = C(p+,q+) − C(p-,q-)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HDCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary<T> {
    pub e_upper: T,
    pub e_lower: T,
    pub sum: T,
    pub imbalance: T,
}

impl<T: Real> EnergySummary<T> {
    /// `e_lower / e_upper`, or `None` when the upper mode carries no excess energy.
    pub fn ratio_lower_upper(&self) -> Option<T> {
        if self.e_upper.abs() <= T::default_epsilon() {
            None
        } else {
            Some(self.e_lower / self.e_upper)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality<T> {
    /// Minimum eigenvalue of `V + iΣ`.
    pub margin: T,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeMarginal<T: Real> {
    pub mode: ModeIndex,
    pub mean: Vector2<T>,
    pub cov: Matrix2<T>,
}

/// Gaussian Wigner function sampled on a rectangular grid;
/// `values[(i, j)] = W(p_axis[i], q_axis[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField<T: Real> {
    pub p_axis: Vec<T>,
    pub q_axis: Vec<T>,
    pub values: DMatrix<T>,
}

impl<T: Real> HDCoefficients<T> {
    /// Reads the coefficients off a covariance matrix in the ± basis.
    pub fn from_plus_minus_cov(cov: &Matrix4<T>) -> Self {
        HDCoefficients {
            a: cov[(0, 0)] + cov[(3, 3)],
            b: cov[(2, 2)] + cov[(1, 1)],
            c: cov[(0, 1)] - cov[(2, 3)],
        }
    }

    /// Same as [`from_plus_minus_cov`](Self::from_plus_minus_cov) for a
    /// sideband-basis covariance. No physicality check.
    pub fn from_sideband_cov(cov: &Matrix4<T>) -> Self {
        let t = plus_minus_transform::<T>();
        Self::from_plus_minus_cov(&(t * cov * t))
    }

    /// `A·B − C²`; at least 4 for every physical state.
    pub fn uncertainty_product(&self) -> T {
        self.a * self.b - self.c * self.c
    }
}

fn max_asymmetry<T: Real>(cov: &Matrix4<T>) -> T {
    let mut worst = T::zero();
    for i in 0..4 {
        for j in (i + 1)..4 {
            worst = worst.max((cov[(i, j)] - cov[(j, i)]).abs());
        }
    }
    worst
}

impl<T: Real> TwoModeState<T> {
    /// Builds a state after checking finiteness and symmetry of `cov`.
    /// Physicality is checked separately with [`physicality_check`](Self::physicality_check).
    pub fn new(mean: Vector4<T>, cov: Matrix4<T>, basis: Basis) -> Result<Self> {
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "mean vector" });
        }
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "covariance matrix",
            });
        }
        let scale = cov.iter().fold(T::one(), |m, x| m.max(x.abs()));
        let asym = max_asymmetry(&cov);
        if asym > T::physicality_tolerance() * scale {
            return Err(Error::Asymmetric {
                max_asymmetry: asym.to_f64_lossy(),
            });
        }
        let cov = (cov + cov.transpose()) * T::lit(0.5);
        Ok(TwoModeState { mean, cov, basis })
    }

    pub fn sideband(mean: Vector4<T>, cov: Matrix4<T>) -> Result<Self> {
        Self::new(mean, cov, Basis::Sideband)
    }

    pub fn vacuum() -> Self {
        TwoModeState {
            mean: Vector4::zeros(),
            cov: Matrix4::identity(),
            basis: Basis::Sideband,
        }
    }

    pub fn mean(&self) -> &Vector4<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix4<T> {
        &self.cov
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Displaces the upper sideband by `beta_upper` and the lower by
    /// `beta_lower`; `<p> = 2 Re β`, `<q> = 2 Im β`.
    pub fn displace(&self, beta_upper: Complex<T>, beta_lower: Complex<T>) -> Self {
        let two = T::lit(2.0);
        let shift = Vector4::new(
            two * beta_upper.re,
            two * beta_upper.im,
            two * beta_lower.re,
            two * beta_lower.im,
        );
        let mut out = self.in_sideband();
        out.mean += shift;
        out.in_basis(self.basis)
    }

    pub fn to_plus_minus(&self) -> Self {
        match self.basis {
            Basis::PlusMinus => self.clone(),
            Basis::Sideband => self.transformed(Basis::PlusMinus),
        }
    }

    pub fn from_plus_minus(&self) -> Self {
        match self.basis {
            Basis::Sideband => self.clone(),
            Basis::PlusMinus => self.transformed(Basis::Sideband),
        }
    }

    /// Alias of [`from_plus_minus`](Self::from_plus_minus) that reads better at call sites.
    pub fn in_sideband(&self) -> Self {
        self.from_plus_minus()
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        match basis {
            Basis::Sideband => self.from_plus_minus(),
            Basis::PlusMinus => self.to_plus_minus(),
        }
    }

    fn transformed(&self, basis: Basis) -> Self {
        let t = plus_minus_transform::<T>();
        let cov = t * self.cov * t;
        TwoModeState {
            mean: t * self.mean,
            cov: (cov + cov.transpose()) * T::lit(0.5),
            basis,
        }
    }

    /// Sideband-basis covariance regardless of the stored basis.
    pub fn sideband_cov(&self) -> Matrix4<T> {
        match self.basis {
            Basis::Sideband => self.cov,
            Basis::PlusMinus => self.in_sideband().cov,
        }
    }

    pub fn sideband_mean(&self) -> Vector4<T> {
        match self.basis {
            Basis::Sideband => self.mean,
            Basis::PlusMinus => self.in_sideband().mean,
        }
    }

    /// Fluctuation energy `½(Δ²p + Δ²q) − 1` of one sideband; zero for vacuum.
    pub fn mode_energy(&self, mode: ModeIndex) -> T {
        let cov = self.sideband_cov();
        let k = mode.offset();
        (cov[(k, k)] + cov[(k + 1, k + 1)]) * T::lit(0.5) - T::one()
    }

    pub fn energy_summary(&self) -> EnergySummary<T> {
        let e_upper = self.mode_energy(ModeIndex::Upper);
        let e_lower = self.mode_energy(ModeIndex::Lower);
        EnergySummary {
            e_upper,
            e_lower,
            sum: e_upper + e_lower,
            imbalance: e_upper - e_lower,
        }
    }

    pub fn hd_coefficients(&self) -> HDCoefficients<T> {
        match self.basis {
            Basis::PlusMinus => HDCoefficients::from_plus_minus_cov(&self.cov),
            Basis::Sideband => HDCoefficients::from_sideband_cov(&self.cov),
        }
    }

    /// Minimum eigenvalue of `V + iΣ` against the default tolerance.
    pub fn physicality_check(&self) -> Physicality<T> {
        self.physicality_check_with(T::physicality_tolerance())
    }

    pub fn physicality_check_with(&self, tolerance: T) -> Physicality<T> {
        let margin = uncertainty_margin(&self.cov);
        Physicality {
            margin,
            passed: margin >= -tolerance,
        }
    }

    /// Errors with [`Error::Nonphysical`] unless the state passes the default check.
    pub fn ensure_physical(&self) -> Result<()> {
        let check = self.physicality_check();
        if check.passed {
            Ok(())
        } else {
            Err(Error::Nonphysical {
                margin: check.margin.to_f64_lossy(),
            })
        }
    }

    /// `1 / sqrt(det V)`.
    pub fn purity(&self) -> Result<T> {
        let det = self.cov.determinant();
        if det.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::SingularCovariance {
                det: det.to_f64_lossy(),
            });
        }
        Ok(T::one() / det.sqrt())
    }

    pub fn single_mode_marginal(&self, mode: ModeIndex) -> SingleModeMarginal<T> {
        let k = mode.offset();
        let mean = self.sideband_mean();
        let cov = self.sideband_cov();
        SingleModeMarginal {
            mode,
            mean: Vector2::new(mean[k], mean[k + 1]),
            cov: cov.fixed_view::<2, 2>(k, k).into_owned(),
        }
    }
}

impl<T: Real> TwoModeState<T> {
    /// Phase-insensitive Gaussian channel acting mode-wise: the complex
    /// amplitude of each sideband is multiplied by its gain (`|gain| ≤ 1`)
    /// and `1 − |gain|²` of vacuum noise is admixed.
    pub fn apply_mode_gains(&self, gain_upper: Complex<T>, gain_lower: Complex<T>) -> Result<Self> {
        self.ensure_physical()?;
        let tol = T::physicality_tolerance();
        for g in [gain_upper, gain_lower] {
            if !(g.re.is_finite() && g.im.is_finite()) || g.norm_sqr() > T::one() + tol {
                return Err(Error::InvalidParameter(format!("mode gain {g} outside the unit disk")));
            }
        }
        let z = T::zero();
        let (u, l) = (gain_upper, gain_lower);
        let k = Matrix4::new(
            u.re, -u.im, z, z, //
            u.im, u.re, z, z, //
            z, z, l.re, -l.im, //
            z, z, l.im, l.re,
        );
        let added_u = (T::one() - u.norm_sqr()).max(z);
        let added_l = (T::one() - l.norm_sqr()).max(z);
        let noise = Matrix4::from_diagonal(&Vector4::new(added_u, added_u, added_l, added_l));
        let cov = k * self.sideband_cov() * k.transpose() + noise;
        let out = TwoModeState {
            mean: k * self.sideband_mean(),
            cov: (cov + cov.transpose()) * T::lit(0.5),
            basis: Basis::Sideband,
        };
        Ok(out.in_basis(self.basis))
    }
}

/// Minimum eigenvalue of the Hermitian matrix `V + iΣ`.
pub fn uncertainty_margin<T: Real>(cov: &Matrix4<T>) -> T {
    let sigma = symplectic_form::<T>();
    let h = Matrix4::from_fn(|i, j| Complex::new(cov[(i, j)], sigma[(i, j)]));
    h.symmetric_eigenvalues()
        .iter()
        .fold(T::max_value().unwrap(), |m, &x| m.min(x))
}

/// Balanced homodyne-equivalent state: in the ± basis
/// `Δ²p+ = Δ²q- = A/2`, `Δ²p- = Δ²q+ = B/2`, `C(p+,q+) = −C(p-,q-) = C/2`,
/// zero mean and no other correlations. Returned in the sideband basis.
pub fn canonical_hd_state<T: Real>(coeffs: &HDCoefficients<T>) -> Result<TwoModeState<T>> {
    let HDCoefficients { a, b, c } = *coeffs;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::NonFinite {
            what: "homodyne coefficients",
        });
    }
    if !(a > T::zero() && b > T::zero()) {
        return Err(Error::UnattainableCoefficients {
            reason: format!("A = {a}, B = {b} must both be positive"),
        });
    }
    let four = T::lit(4.0);
    let product = coeffs.uncertainty_product();
    let tol = T::physicality_tolerance() * four.max(a * b);
    if product < four - tol {
        return Err(Error::UnattainableCoefficients {
            reason: format!("A*B - C^2 = {product} < 4"),
        });
    }
    let half = T::lit(0.5);
    let z = T::zero();
    let cov_pm = Matrix4::new(
        a * half,
        c * half,
        z,
        z, //
        c * half,
        b * half,
        z,
        z, //
        z,
        z,
        b * half,
        -c * half, //
        z,
        z,
        -c * half,
        a * half,
    );
    TwoModeState::new(Vector4::zeros(), cov_pm, Basis::PlusMinus).map(|s| s.in_sideband())
}

impl<T: Real> SingleModeMarginal<T> {
    pub fn is_isotropic(&self, tol: T) -> bool {
        (self.cov[(0, 0)] - self.cov[(1, 1)]).abs() <= tol && self.cov[(0, 1)].abs() <= tol
    }

    /// Evaluates `W(p, q) = exp(−½ δᵀV⁻¹δ) / (2π sqrt(det V))` on a grid.
    pub fn wigner_eval(&self, p_axis: &[T], q_axis: &[T]) -> Result<WignerField<T>> {
        if p_axis.iter().chain(q_axis).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "wigner grid" });
        }
        let det = self.cov.determinant();
        let inv = match self.cov.try_inverse() {
            Some(inv) if det > T::zero() => inv,
            _ => {
                return Err(Error::SingularCovariance {
                    det: det.to_f64_lossy(),
                })
            }
        };
        let norm = T::one() / (T::two_pi() * det.sqrt());
        let half = T::lit(0.5);
        let values = DMatrix::from_fn(p_axis.len(), q_axis.len(), |i, j| {
            let d = Vector2::new(p_axis[i], q_axis[j]) - self.mean;
            norm * (-(d.dot(&(inv * d))) * half).exp()
        });
        Ok(WignerField {
            p_axis: p_axis.to_vec(),
            q_axis: q_axis.to_vec(),
            values,
        })
    }
}
