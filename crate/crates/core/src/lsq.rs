//! Weighted linear least squares through the SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    pub coefficients: DVector<T>,
    pub covariance: DMatrix<T>,
    /// RMS of the unweighted residuals `y − Xβ`.
    pub residual_rms: T,
    pub rank: usize,
    pub condition_number: T,
    pub singular_values: DVector<T>,
}

/// Rank and right null space of `design` (columns = unknowns).
pub fn null_space<T: Real>(design: &DMatrix<T>) -> (usize, Vec<DVector<T>>) {
    let n = design.ncols();
    // pad so the SVD returns a full set of right singular vectors
    let padded = if design.nrows() < n {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (design.nrows(), n)).copy_from(design);
        m
    } else {
        design.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
    let cutoff = smax * T::lit(RANK_TOLERANCE);
    let mut rank = 0;
    let mut null = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && smax > T::zero() {
            rank += 1;
        } else {
            null.push(v_t.row(k).transpose());
        }
    }
    (rank, null)
}

fn describe(direction: &DVector<f64>, names: &[String]) -> String {
    let mut terms: Vec<String> = direction
        .iter()
        .zip(names)
        .filter(|(w, _)| w.abs() > 1e-6)
        .map(|(w, n)| format!("{w:+.3}*{n}"))
        .collect();
    if terms.is_empty() {
        terms.push("0".into());
    }
    terms.join(" ")
}

/// Solves `min Σ ((y_i − X_i β)/σ_i)²`. Rows are weighted by `1/σ` only when
/// every `σ_i > 0`; otherwise the fit is unweighted and the coefficient
/// covariance is scaled by the residual variance.
pub fn solve<T: Real>(
    design: &DMatrix<T>,
    target: &DVector<T>,
    sigma: Option<&[T]>,
    names: &[String],
) -> Result<Solution<T>> {
    let (m, p) = design.shape();
    assert_eq!(target.len(), m, "target length must match design rows");
    assert_eq!(names.len(), p, "one name per coefficient");
    let weights: Option<Vec<T>> = sigma
        .filter(|s| s.len() == m && s.iter().all(|x| *x > T::zero()))
        .map(|s| s.iter().map(|x| T::one() / *x).collect());

    let (xw, yw) = match &weights {
        Some(w) => {
            let mut x = design.clone();
            let mut y = target.clone();
            for (i, wi) in w.iter().enumerate() {
                x.row_mut(i).scale_mut(*wi);
                y[i] *= *wi;
            }
            (x, y)
        }
        None => (design.clone(), target.clone()),
    };

    let (rank, null) = null_space(&xw);
    if rank < p {
        let unresolved = null
            .iter()
            .map(|v| describe(&v.map(|x| x.to_f64_lossy()), names))
            .collect();
        return Err(Error::RankDeficient {
            rank,
            expected: p,
            unresolved,
        });
    }

    let svd = xw.clone().svd(true, true);
    let coefficients = svd
        .solve(&yw, T::zero())
        .map_err(|e| Error::Format(format!("least squares solve failed: {e}")))?;
    let s = &svd.singular_values;
    let smax = s.iter().fold(T::zero(), |a, &b| a.max(b));
    let smin = s.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b));
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    // (XᵀWX)⁻¹ = V diag(1/s²) Vᵀ
    let inv_s2 = DMatrix::from_diagonal(&s.map(|x| T::one() / (x * x)));
    let mut covariance = v_t.transpose() * inv_s2 * v_t;

    let residual = target - design * &coefficients;
    let rss = residual.norm_squared();
    let residual_rms = (rss / T::from_usize(m).unwrap()).sqrt();
    if weights.is_none() {
        let scale = if m > p {
            rss / T::from_usize(m - p).unwrap()
        } else {
            T::zero()
        };
        covariance *= scale;
    }

    Ok(Solution {
        coefficients,
        covariance,
        residual_rms,
        rank,
        condition_number: smax / smin,
        singular_values: s.clone(),
    })
}
