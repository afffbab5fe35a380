//! Figures of merit for the QND/erasure protocol: gain-normalized added
//! noise, normalization gains, the uncertainty product, single-mode Gaussian
//! fidelity, dB conversion and Wigner-contour ellipses.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

/// Contour level of the one-sigma ellipse, e^(−1/2) of the Wigner peak.
pub const CONTOUR_LEVEL_1SIGMA: f64 = 0.606_530_659_712_633_4;

/// The three gains of the QND/erasure chain at beam-splitter transmittance T:
/// marker gain g_m = √(1−T), signal gain g_s = √T, and the overall erasure
/// gain g_e = 1/√T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QndGains {
    pub marker: f64,
    pub signal: f64,
    pub eraser: f64,
}

/// Gains (g_m, g_s, g_e) for transmittance strictly inside (0, 1).
pub fn gains(transmittance: f64) -> Result<QndGains> {
    if !(transmittance > 0.0 && transmittance < 1.0) {
        return Err(Error::invalid(format!(
            "transmittance must lie strictly in (0, 1), got {transmittance}"
        )));
    }
    Ok(QndGains {
        marker: (1.0 - transmittance).sqrt(),
        signal: transmittance.sqrt(),
        eraser: 1.0 / transmittance.sqrt(),
    })
}

/// Gain-normalized added noise N = V_out/g² − V_in. An ideal transfer has
/// N = 0; the value is deliberately not clamped, so super-ideal conditioning
/// shows up as N < 0.
pub fn added_noise(v_out: f64, gain: f64, v_in: f64) -> Result<f64> {
    if gain <= 0.0 {
        return Err(Error::invalid(format!("gain must be positive, got {gain}")));
    }
    if v_out < 0.0 || v_in < 0.0 {
        return Err(Error::invalid("variances must be nonnegative"));
    }
    Ok(v_out / (gain * gain) - v_in)
}

/// Added noise expressed as dB above the quantum noise level, 10·log10(1+N).
pub fn added_noise_db(n: f64) -> f64 {
    10.0 * (1.0 + n).log10()
}

/// Product of the two added noises and whether it satisfies the
/// complementarity bound N_x·N_p ≥ 1 (within 1e−9).
pub fn uncertainty_product(n_x: f64, n_p: f64) -> (f64, bool) {
    let product = n_x * n_p;
    (product, product >= 1.0 - 1e-9)
}

/// 10·log10(V) of a relative variance.
pub fn to_db(relative_variance: f64) -> Result<f64> {
    if relative_variance <= 0.0 {
        return Err(Error::invalid(format!(
            "variance must be positive for dB conversion, got {relative_variance}"
        )));
    }
    Ok(10.0 * relative_variance.log10())
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Uhlmann fidelity of two single-mode Gaussian states in shot-noise units:
///
/// F = 2·exp(−δᵀ(A+B)⁻¹δ/2) / (√(Δ+λ) − √λ),
/// Δ = det(A+B), λ = (det A − 1)(det B − 1),
///
/// with A, B the covariance blocks and δ the mean difference. The 1/2 in the
/// exponent matches |⟨α|β⟩|² = exp(−|δ|²/4) for coherent states in these
/// units; see the overlap-quadrature oracle in the integration tests.
pub fn fidelity_gaussian(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.n_modes() != 1 || b.n_modes() != 1 {
        return Err(Error::invalid("fidelity is defined for single-mode states"));
    }
    if !a.is_physical() || !b.is_physical() {
        return Err(Error::invalid("fidelity requires physical states"));
    }
    let ca = a.mode_cov(0)?;
    let cb = b.mode_cov(0)?;
    let sum = ca + cb;
    let det_sum = sum.determinant();
    let inv = sum
        .try_inverse()
        .ok_or_else(|| Error::Internal("singular covariance sum in fidelity".into()))?;
    let (ax, ap) = a.mode_mean(0)?;
    let (bx, bp) = b.mode_mean(0)?;
    let delta = Vector2::new(bx - ax, bp - ap);
    // pure-state determinants sit at exactly 1; tiny negative products are rounding
    let lambda = ((ca.determinant() - 1.0) * (cb.determinant() - 1.0)).max(0.0);
    let exponent = -0.5 * (delta.transpose() * inv * delta)[0];
    let f = 2.0 * exponent.exp() / ((det_sum + lambda).sqrt() - lambda.sqrt());
    Ok(f.clamp(0.0, 1.0))
}

/// One level contour of a single-mode Wigner function.
///
/// Invariant: semi_major ≥ semi_minor > 0; orientation is the angle of the
/// major axis, reduced to [0, π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourEllipse {
    pub center_x: f64,
    pub center_p: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub orientation: f64,
}

/// Level contour W = level·W_peak of the Wigner function of `mode`:
/// semi-axes √(−2·ln(level)·λᵢ) along the covariance eigenvectors.
pub fn wigner_contour(state: &GaussianState, mode: usize, level: f64) -> Result<ContourEllipse> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "contour level must lie strictly in (0, 1), got {level}"
        )));
    }
    let cov: Matrix2<f64> = state.mode_cov(mode)?;
    let eig = cov.symmetric_eigen();
    let (lead, trail) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let lam_max = eig.eigenvalues[lead];
    let lam_min = eig.eigenvalues[trail];
    if lam_min <= 0.0 {
        return Err(Error::Internal(format!(
            "covariance block is not positive definite (eigenvalue {lam_min})"
        )));
    }
    let scale = -2.0 * level.ln();
    let v = eig.eigenvectors.column(lead);
    let orientation = v[1].atan2(v[0]).rem_euclid(std::f64::consts::PI);
    let (cx, cp) = state.mode_mean(mode)?;
    Ok(ContourEllipse {
        center_x: cx,
        center_p: cp,
        semi_major: (scale * lam_max).sqrt(),
        semi_minor: (scale * lam_min).sqrt(),
        orientation,
    })
}

/// Added-noise summary of one protocol run: the labelling noise
/// N_{x_s,in→x_m,out}, the phase broadening N_{p_s,in→p_s,out}, the erased
/// values where the run produces them, the gains, the uncertainty product,
/// and dB equivalents 10·log10(1+N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub n_x_label: f64,
    pub n_p_signal: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_p_erased: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_x_erased: Option<f64>,
    pub gains: QndGains,
    pub uncertainty_product: f64,
    pub bound_satisfied: bool,
    pub n_x_label_db: f64,
    pub n_p_signal_db: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_p_erased_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_x_erased_db: Option<f64>,
}

impl NoiseReport {
    pub fn new(
        transmittance: f64,
        n_x_label: f64,
        n_p_signal: f64,
        n_p_erased: Option<f64>,
        n_x_erased: Option<f64>,
    ) -> Result<Self> {
        let gains = gains(transmittance)?;
        let (product, bound_satisfied) = uncertainty_product(n_x_label, n_p_signal);
        Ok(NoiseReport {
            n_x_label,
            n_p_signal,
            n_p_erased,
            n_x_erased,
            gains,
            uncertainty_product: product,
            bound_satisfied,
            n_x_label_db: added_noise_db(n_x_label),
            n_p_signal_db: added_noise_db(n_p_signal),
            n_p_erased_db: n_p_erased.map(added_noise_db),
            n_x_erased_db: n_x_erased.map(added_noise_db),
        })
    }
}
