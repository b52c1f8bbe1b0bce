//! Inverse problems: coefficient fits of phase-averaged scans, covariance
//! reconstruction from phase-locked resonator scans, identifiability of each
//! technique and chi-square comparison of measured curves.

use nalgebra::{Complex, DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::cavity::CavityParams;
use crate::detection::{
    hd_power_from_coefficients, rd_design_row, responses_on_grid, LockedScan, QuadratureReadout, RdCoefficients,
    ScanCurve, ScanKind,
};
use crate::error::{Error, Result};
use crate::lsq;
use crate::scalar::Real;
use crate::state::{symplectic_form, Basis, EnergySummary, HDCoefficients, TwoModeState};

/// Fits whose design condition number exceeds this are flagged as unreliable.
pub const CONDITION_WARNING: f64 = 1e8;

/// Upper-triangular index pairs of the ten independent covariance entries.
pub const COV_ENTRIES: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

const QUADRATURES: [&str; 4] = ["p_up", "q_up", "p_low", "q_low"];

pub fn cov_entry_names() -> Vec<String> {
    COV_ENTRIES
        .iter()
        .map(|&(i, j)| format!("v_{}_{}", QUADRATURES[i], QUADRATURES[j]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue<T> {
    pub name: String,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    pub coefficients: Vec<NamedValue<T>>,
    pub coeff_covariance: Vec<Vec<T>>,
    pub residual_rms: T,
    pub design_rank: usize,
    pub condition_number: T,
}

impl<T: Real> FitReport<T> {
    fn from_solution(sol: &lsq::Solution<T>, names: &[String]) -> Self {
        let p = names.len();
        FitReport {
            coefficients: names
                .iter()
                .zip(sol.coefficients.iter())
                .map(|(n, v)| NamedValue {
                    name: n.clone(),
                    value: *v,
                })
                .collect(),
            coeff_covariance: (0..p)
                .map(|i| (0..p).map(|j| sol.covariance[(i, j)]).collect())
                .collect(),
            residual_rms: sol.residual_rms,
            design_rank: sol.rank,
            condition_number: sol.condition_number,
        }
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.coefficients.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Standard error of a named coefficient.
    pub fn std_error(&self, name: &str) -> Option<T> {
        let i = self.coefficients.iter().position(|c| c.name == name)?;
        Some(self.coeff_covariance[i][i].max(T::zero()).sqrt())
    }

    pub fn values(&self) -> Vec<T> {
        self.coefficients.iter().map(|c| c.value).collect()
    }

    pub fn is_ill_conditioned(&self) -> bool {
        let k = self.condition_number.to_f64_lossy();
        k.is_nan() || k > CONDITION_WARNING
    }
}

fn sigma_option<T: Real>(curve: &ScanCurve<T>) -> Option<&[T]> {
    if curve.is_noiseless() {
        None
    } else {
        Some(&curve.sigma)
    }
}

fn expect_kind<T: Real>(curve: &ScanCurve<T>, kind: ScanKind) -> Result<()> {
    if curve.kind == kind {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "expected a {} curve, got {}",
            kind.as_str(),
            curve.kind.as_str()
        )))
    }
}

/// Fits `S(φ)` of an ideal-visibility homodyne scan for `A, B, C`.
pub fn fit_hd_curve<T: Real>(curve: &ScanCurve<T>) -> Result<FitReport<T>> {
    fit_hd_curve_with_visibility(curve, T::one())
}

/// As [`fit_hd_curve`], undoing a known fringe visibility first.
pub fn fit_hd_curve_with_visibility<T: Real>(curve: &ScanCurve<T>, visibility: T) -> Result<FitReport<T>> {
    expect_kind(curve, ScanKind::HomodynePhase)?;
    if !(visibility > T::zero() && visibility <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "visibility {visibility} outside (0, 1]"
        )));
    }
    let v2 = visibility * visibility;
    let m = curve.len();
    // S = (A+B)/4 + (A−B)/4 cos2φ + C/2 sin2φ, so fit {1, cos2φ, sin2φ}
    let design = DMatrix::from_fn(m, 3, |i, j| {
        let two_phi = curve.abscissa[i] + curve.abscissa[i];
        match j {
            0 => T::one(),
            1 => two_phi.cos(),
            _ => two_phi.sin(),
        }
    });
    let target = DVector::from_fn(m, |i, _| (curve.values[i] - (T::one() - v2)) / v2);
    let sigma: Option<Vec<T>> = sigma_option(curve).map(|s| s.iter().map(|x| *x / v2).collect());
    let basis_names: Vec<String> = ["offset", "cos2phi", "sin2phi"].iter().map(|s| s.to_string()).collect();
    let mut sol = lsq::solve(&design, &target, sigma.as_deref(), &basis_names)?;

    // (A, B, C) = J · (offset, cos, sin)
    let two = T::lit(2.0);
    let z = T::zero();
    let jac = DMatrix::from_row_slice(3, 3, &[two, two, z, two, -two, z, z, z, two]);
    sol.coefficients = &jac * &sol.coefficients;
    sol.covariance = &jac * &sol.covariance * jac.transpose();
    // residuals reported in the measured units
    sol.residual_rms *= v2;
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    Ok(FitReport::from_solution(&sol, &names))
}

fn rd_power_fit<T: Real>(
    curve: &ScanCurve<T>,
    cavity: &CavityParams<T>,
    omega_over_gamma: T,
    columns: &[usize],
) -> Result<FitReport<T>> {
    expect_kind(curve, ScanKind::ResonatorDetuning)?;
    let mut rows = Vec::with_capacity(curve.len());
    for &d in &curve.abscissa {
        rows.push(rd_design_row(&cavity.sideband_response(d, omega_over_gamma)?));
    }
    let design = DMatrix::from_fn(curve.len(), columns.len(), |i, j| rows[i][columns[j]]);
    let target = DVector::from_fn(curve.len(), |i, _| curve.values[i] - T::one());
    let names: Vec<String> = columns
        .iter()
        .map(|&c| RdCoefficients::<T>::NAMES[c].to_string())
        .collect();
    let sol = lsq::solve(&design, &target, sigma_option(curve), &names)?;
    Ok(FitReport::from_solution(&sol, &names))
}

/// Fits a phase-averaged resonator scan for
/// `(E_Ω + E_−Ω, E_Ω − E_−Ω, A − B, C)`.
pub fn fit_rd_power_curve<T: Real>(
    curve: &ScanCurve<T>,
    cavity: &CavityParams<T>,
    omega_over_gamma: T,
) -> Result<FitReport<T>> {
    rd_power_fit(curve, cavity, omega_over_gamma, &[0, 1, 2, 3])
}

/// Same model with the energy imbalance held at zero: the best description
/// using only moments a homodyne detector can measure.
pub fn fit_rd_power_curve_balanced<T: Real>(
    curve: &ScanCurve<T>,
    cavity: &CavityParams<T>,
    omega_over_gamma: T,
) -> Result<FitReport<T>> {
    rd_power_fit(curve, cavity, omega_over_gamma, &[0, 2, 3])
}

/// Row of `⟨a, V b⟩` in the coordinates of [`COV_ENTRIES`]. With
/// `orthonormal`, off-diagonal columns are scaled so coordinates carry the
/// Frobenius inner product of symmetric matrices.
fn bilinear_row<T: Real>(a: &Vector4<T>, b: &Vector4<T>, orthonormal: bool) -> [T; 10] {
    let mut row = [T::zero(); 10];
    let inv_sqrt2 = T::frac_1_sqrt_2();
    for (k, &(i, j)) in COV_ENTRIES.iter().enumerate() {
        row[k] = if i == j {
            a[i] * b[i]
        } else {
            let v = a[i] * b[j] + a[j] * b[i];
            if orthonormal {
                v * inv_sqrt2
            } else {
                v
            }
        };
    }
    row
}

/// Symmetric matrix from orthonormal coordinates.
fn sym_from_orthonormal<T: Real>(coords: &DVector<T>) -> Matrix4<T> {
    let mut m = Matrix4::zeros();
    let inv_sqrt2 = T::frac_1_sqrt_2();
    for (k, &(i, j)) in COV_ENTRIES.iter().enumerate() {
        if i == j {
            m[(i, i)] = coords[k];
        } else {
            m[(i, j)] = coords[k] * inv_sqrt2;
            m[(j, i)] = coords[k] * inv_sqrt2;
        }
    }
    m
}

fn sym_to_orthonormal<T: Real>(m: &Matrix4<T>) -> DVector<T> {
    let sqrt2 = T::lit(2.0).sqrt();
    DVector::from_iterator(
        10,
        COV_ENTRIES
            .iter()
            .map(|&(i, j)| if i == j { m[(i, i)] } else { m[(i, j)] * sqrt2 }),
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Correct the estimate into the physical cone after the fit.
    pub project_physical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInfo<T> {
    /// Frobenius norm of the covariance correction.
    pub frobenius_change: T,
    /// RMS of the correction mapped through the design; bounds the change in residual_rms.
    pub projection_distance: T,
    pub residual_rms_after: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult<T: Real> {
    pub state: TwoModeState<T>,
    pub report: FitReport<T>,
    /// `None` when the estimated covariance is not positive definite.
    pub purity: Option<T>,
    pub energies: EnergySummary<T>,
    /// Fit of the four quadrature means from the first moments.
    pub mean_report: FitReport<T>,
    pub projection: Option<ProjectionInfo<T>>,
}

/// Adds the smallest real symmetric correction built from the negative
/// eigenspace of `V + iΣ` that restores `V + iΣ ⪰ 0`. Returns the corrected
/// matrix; unchanged if already physical.
pub fn project_physical<T: Real>(cov: &Matrix4<T>) -> Matrix4<T> {
    let sigma = symplectic_form::<T>();
    let h = Matrix4::from_fn(|i, j| Complex::new(cov[(i, j)], sigma[(i, j)]));
    let eig = SymmetricEigen::new(h);
    let mut p = Matrix4::<Complex<T>>::zeros();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < T::zero() {
            let v = eig.eigenvectors.column(k);
            p += (v * v.adjoint()) * Complex::new(-lambda, T::zero());
        }
    }
    // V + iΣ + P + P̄ ⪰ 0 and P + P̄ = 2 Re P is real symmetric
    let correction = p.map(|z| z.re) * T::lit(2.0);
    let out = cov + correction;
    (out + out.transpose()) * T::lit(0.5)
}

/// Reconstructs the full two-mode state from a phase-locked resonator scan.
pub fn reconstruct_covariance<T: Real>(
    locked: &LockedScan<T>,
    cavity: &CavityParams<T>,
    omega_over_gamma: T,
    options: ReconstructOptions,
) -> Result<ReconstructionResult<T>> {
    let n = locked.points.len();
    let mut cov_design = DMatrix::zeros(3 * n, 10);
    let mut cov_target = DVector::zeros(3 * n);
    let mut cov_sigma = Vec::with_capacity(3 * n);
    let mut mean_design = DMatrix::zeros(2 * n, 4);
    let mut mean_target = DVector::zeros(2 * n);
    let mut mean_sigma = Vec::with_capacity(2 * n);

    for (k, point) in locked.points.iter().enumerate() {
        let resp = cavity.sideband_response(point.detuning, omega_over_gamma)?;
        let readout = QuadratureReadout::from_response(&resp);
        let (a, b) = (&readout.cos_row, &readout.sin_row);
        let m = &point.moments;
        let s = &point.sigma;
        for (r, (row, y, sig)) in [
            (bilinear_row(a, a, false), m.var_cos - readout.closure, s.var_cos),
            (bilinear_row(b, b, false), m.var_sin - readout.closure, s.var_sin),
            (bilinear_row(a, b, false), m.cov_cossin, s.cov_cossin),
        ]
        .into_iter()
        .enumerate()
        {
            let i = 3 * k + r;
            for (j, v) in row.iter().enumerate() {
                cov_design[(i, j)] = *v;
            }
            cov_target[i] = y;
            cov_sigma.push(sig);
        }
        for (r, (row, y, sig)) in [(a, m.mean_cos, s.mean_cos), (b, m.mean_sin, s.mean_sin)]
            .into_iter()
            .enumerate()
        {
            let i = 2 * k + r;
            mean_design.row_mut(i).copy_from(&row.transpose());
            mean_target[i] = y;
            mean_sigma.push(sig);
        }
    }

    let names = cov_entry_names();
    let cov_sol = lsq::solve(&cov_design, &cov_target, Some(&cov_sigma), &names)?;
    let mean_names: Vec<String> = QUADRATURES.iter().map(|q| format!("mean_{q}")).collect();
    let mean_sol = lsq::solve(&mean_design, &mean_target, Some(&mean_sigma), &mean_names)?;

    let mut cov = Matrix4::zeros();
    for (k, &(i, j)) in COV_ENTRIES.iter().enumerate() {
        cov[(i, j)] = cov_sol.coefficients[k];
        cov[(j, i)] = cov_sol.coefficients[k];
    }
    let mean = Vector4::from_iterator(mean_sol.coefficients.iter().copied());

    let mut report = FitReport::from_solution(&cov_sol, &names);
    let mut projection = None;
    if options.project_physical {
        let corrected = project_physical(&cov);
        let delta = corrected - cov;
        let delta_coords = DVector::from_iterator(10, COV_ENTRIES.iter().map(|&(i, j)| delta[(i, j)]));
        let rows = T::from_usize(cov_design.nrows()).unwrap();
        let projection_distance = ((&cov_design * &delta_coords).norm_squared() / rows).sqrt();
        let new_coords = DVector::from_iterator(10, COV_ENTRIES.iter().map(|&(i, j)| corrected[(i, j)]));
        let residual_rms_after = ((&cov_target - &cov_design * &new_coords).norm_squared() / rows).sqrt();
        projection = Some(ProjectionInfo {
            frobenius_change: delta.norm(),
            projection_distance,
            residual_rms_after,
        });
        for (k, &(i, j)) in COV_ENTRIES.iter().enumerate() {
            report.coefficients[k].value = corrected[(i, j)];
        }
        cov = corrected;
    }

    let state = TwoModeState::new(mean, cov, Basis::Sideband)?;
    let purity = state.purity().ok();
    let energies = state.energy_summary();
    Ok(ReconstructionResult {
        state,
        report,
        purity,
        energies,
        mean_report: FitReport::from_solution(&mean_sol, &mean_names),
        projection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Hd,
    RdPower,
    RdLocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityGrids<T> {
    pub phi: Vec<T>,
    pub delta: Vec<T>,
    pub omega_over_gamma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport<T: Real> {
    pub technique: Technique,
    /// Rank of the map from the covariance matrix to the measured data.
    pub rank: usize,
    /// Orthonormal (Frobenius) basis of covariance directions the technique cannot see.
    pub null_space: Vec<Matrix4<T>>,
}

impl<T: Real> IdentifiabilityReport<T> {
    /// Norm of the projection of the normalized `direction` onto the null space.
    pub fn null_component(&self, direction: &Matrix4<T>) -> T {
        let d = sym_to_orthonormal(direction);
        let d = &d / d.norm();
        self.null_space
            .iter()
            .map(|n| {
                let c = sym_to_orthonormal(n).dot(&d);
                c * c
            })
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// Covariance direction that changes only the sideband energy imbalance.
pub fn imbalance_direction<T: Real>() -> Matrix4<T> {
    let o = T::one();
    Matrix4::from_diagonal(&Vector4::new(o, o, -o, -o))
}

fn symmetric_basis<T: Real>() -> Vec<Matrix4<T>> {
    (0..10)
        .map(|k| {
            let mut e = DVector::zeros(10);
            e[k] = T::one();
            sym_from_orthonormal(&e)
        })
        .collect()
}

/// Design matrix of a technique over the ten covariance coordinates.
pub fn identifiability_design<T: Real>(
    technique: Technique,
    grids: &IdentifiabilityGrids<T>,
    cavity: &CavityParams<T>,
) -> Result<DMatrix<T>> {
    let mut rows: Vec<[T; 10]> = Vec::new();
    match technique {
        Technique::Hd => {
            let basis = symmetric_basis::<T>();
            for &phi in &grids.phi {
                let mut row = [T::zero(); 10];
                for (k, e) in basis.iter().enumerate() {
                    row[k] = hd_power_from_coefficients(&HDCoefficients::from_sideband_cov(e), phi);
                }
                rows.push(row);
            }
        }
        Technique::RdPower | Technique::RdLocked => {
            for (_, resp) in responses_on_grid(cavity, &grids.delta, grids.omega_over_gamma)? {
                let r = QuadratureReadout::from_response(&resp);
                let (a, b) = (&r.cos_row, &r.sin_row);
                let aa = bilinear_row(a, a, true);
                let bb = bilinear_row(b, b, true);
                if technique == Technique::RdPower {
                    let quarter = T::lit(0.25);
                    let mut row = [T::zero(); 10];
                    for k in 0..10 {
                        row[k] = (aa[k] + bb[k]) * quarter;
                    }
                    rows.push(row);
                } else {
                    rows.push(aa);
                    rows.push(bb);
                    rows.push(bilinear_row(a, b, true));
                }
            }
        }
    }
    Ok(DMatrix::from_fn(rows.len(), 10, |i, j| rows[i][j]))
}

pub fn identifiability_report<T: Real>(
    technique: Technique,
    grids: &IdentifiabilityGrids<T>,
    cavity: &CavityParams<T>,
) -> Result<IdentifiabilityReport<T>> {
    let design = identifiability_design(technique, grids, cavity)?;
    let (rank, null) = lsq::null_space(&design);
    Ok(IdentifiabilityReport {
        technique,
        rank,
        null_space: null.iter().map(sym_from_orthonormal).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Indistinguishable,
    Inconclusive,
    Distinguishable,
}

/// Reduced chi-square thresholds for [`Verdict`].
pub const INDISTINGUISHABLE_BELOW: f64 = 1.5;
pub const DISTINGUISHABLE_ABOVE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison<T> {
    /// Infinite when noiseless curves differ.
    pub chi_square: T,
    pub dof: usize,
    pub chi_square_per_dof: T,
    pub verdict: Verdict,
}

/// `χ² = Σ (a_i − b_i)² / (σ_ai² + σ_bi²)`. Points where both curves are
/// noiseless count as zero if they agree to rounding and as infinite otherwise.
pub fn compare_states<T: Real>(a: &ScanCurve<T>, b: &ScanCurve<T>) -> Result<Comparison<T>> {
    if a.kind != b.kind {
        return Err(Error::Mismatch(format!("{} vs {}", a.kind.as_str(), b.kind.as_str())));
    }
    if a.len() != b.len() {
        return Err(Error::Mismatch(format!("{} vs {} points", a.len(), b.len())));
    }
    let grid_tol = T::lit(1e-9);
    for (x, y) in a.abscissa.iter().zip(&b.abscissa) {
        if (*x - *y).abs() > grid_tol * (T::one() + x.abs()) {
            return Err(Error::Mismatch(format!("abscissa {x} vs {y}")));
        }
    }
    let mut chi2 = T::zero();
    for i in 0..a.len() {
        let diff = a.values[i] - b.values[i];
        let var = a.sigma[i] * a.sigma[i] + b.sigma[i] * b.sigma[i];
        if var > T::zero() {
            chi2 += diff * diff / var;
        } else if diff.abs() > T::lit(1e-12) * (T::one() + a.values[i].abs()) {
            chi2 = T::max_value().unwrap();
        }
    }
    let dof = a.len();
    let per_dof = chi2 / T::from_usize(dof).unwrap();
    let verdict = if per_dof < T::lit(INDISTINGUISHABLE_BELOW) {
        Verdict::Indistinguishable
    } else if per_dof > T::lit(DISTINGUISHABLE_ABOVE) {
        Verdict::Distinguishable
    } else {
        Verdict::Inconclusive
    };
    Ok(Comparison {
        chi_square: chi2,
        dof,
        chi_square_per_dof: per_dof,
        verdict,
    })
}
