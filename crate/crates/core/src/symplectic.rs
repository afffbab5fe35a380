//! Symplectic matrices for the standard single- and two-mode Gaussian
//! operations, in the interleaved quadrature ordering (x1, p1, x2, p2, ...).
//!
//! Every matrix built here satisfies S Ω Sᵀ = Ω with Ω the block-diagonal
//! antisymmetric form returned by [`omega`].

use nalgebra::DMatrix;

/// The symplectic form Ω for `n_modes` modes: 2x2 blocks [[0, 1], [-1, 0]]
/// along the diagonal.
pub fn omega(n_modes: usize) -> DMatrix<f64> {
    let dim = 2 * n_modes;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..n_modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// Beam splitter of power transmittance `t` mixing `mode_i` into `mode_j`:
/// out_i = √t·in_i + √(1−t)·in_j, out_j = √(1−t)·in_i − √t·in_j,
/// acting identically on both quadratures.
pub fn beam_splitter(n_modes: usize, mode_i: usize, mode_j: usize, t: f64) -> DMatrix<f64> {
    let a = t.sqrt();
    let b = (1.0 - t).sqrt();
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for q in 0..2 {
        m[(2 * mode_i + q, 2 * mode_i + q)] = a;
        m[(2 * mode_i + q, 2 * mode_j + q)] = b;
        m[(2 * mode_j + q, 2 * mode_i + q)] = b;
        m[(2 * mode_j + q, 2 * mode_j + q)] = -a;
    }
    m
}

/// Phase-space rotation of a single mode by `phi`:
/// x' = cos φ·x − sin φ·p, p' = sin φ·x + cos φ·p.
pub fn rotation(n_modes: usize, mode: usize, phi: f64) -> DMatrix<f64> {
    let (sin, cos) = phi.sin_cos();
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    m[(2 * mode, 2 * mode)] = cos;
    m[(2 * mode, 2 * mode + 1)] = -sin;
    m[(2 * mode + 1, 2 * mode)] = sin;
    m[(2 * mode + 1, 2 * mode + 1)] = cos;
    m
}

/// Single-mode squeezer scaling the quadrature along `theta` by √s and the
/// conjugate quadrature by 1/√s (s is a variance ratio, so applying this to
/// vacuum leaves variance s along `theta`).
pub fn squeeze(n_modes: usize, mode: usize, s: f64, theta: f64) -> DMatrix<f64> {
    let (sin, cos) = theta.sin_cos();
    let lo = s.sqrt();
    let hi = 1.0 / lo;
    // R(θ)·diag(√s, 1/√s)·R(θ)ᵀ
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    m[(2 * mode, 2 * mode)] = lo * cos * cos + hi * sin * sin;
    m[(2 * mode, 2 * mode + 1)] = (lo - hi) * sin * cos;
    m[(2 * mode + 1, 2 * mode)] = (lo - hi) * sin * cos;
    m[(2 * mode + 1, 2 * mode + 1)] = lo * sin * sin + hi * cos * cos;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_symplectic(s: &DMatrix<f64>, n_modes: usize) -> bool {
        let om = omega(n_modes);
        let resid = s * &om * s.transpose() - &om;
        resid.iter().all(|v| v.abs() < 1e-12)
    }

    #[test]
    fn builders_are_symplectic() {
        assert!(is_symplectic(&beam_splitter(2, 0, 1, 0.477), 2));
        assert!(is_symplectic(&beam_splitter(3, 2, 0, 0.9), 3));
        assert!(is_symplectic(&rotation(2, 1, 0.7), 2));
        assert!(is_symplectic(&squeeze(1, 0, 0.25, 0.0), 1));
        assert!(is_symplectic(&squeeze(2, 1, 3.0, 1.1), 2));
    }

    #[test]
    fn beam_splitter_full_transmission_is_identity() {
        let s = beam_splitter(2, 0, 1, 1.0);
        let mut expect = DMatrix::identity(4, 4);
        expect[(2, 2)] = -1.0;
        expect[(3, 3)] = -1.0;
        assert_eq!(s, expect);
    }

    #[test]
    fn squeeze_along_x_is_diagonal() {
        let s = squeeze(1, 0, 0.25, 0.0);
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s[(1, 1)] - 2.0).abs() < 1e-15);
        assert!(s[(0, 1)].abs() < 1e-15);
    }
}
