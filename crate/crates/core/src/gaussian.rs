//! Multimode Gaussian states in shot-noise units and the symplectic or
//! completely-positive maps used by the erasing protocol.
//!
//! A state is the pair (mean, cov) over the interleaved quadrature vector
//! (x1, p1, ..., xN, pN). Vacuum has mean 0 and cov = identity, so a
//! quadrature variance of 1 is the quantum noise level and dB values are
//! 10·log10(V). States are immutable values; every operation returns a new
//! state.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::symplectic;

/// Maximum tolerated asymmetry of a covariance matrix; anything below is
/// repaired by symmetrization, anything above is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Slack on the Heisenberg bound for symplectic eigenvalues, absorbing
/// floating-point drift over chained operations.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// A single quadrature of a single mode: the phase-space direction
/// cos θ·x + sin θ·p. θ = 0 addresses the amplitude quadrature x and
/// θ = π/2 the phase quadrature p; θ is reduced to [0, π) on construction
/// (θ and θ+π span the same line).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAddress {
    pub mode: usize,
    pub theta: f64,
}

impl QuadratureAddress {
    pub fn new(mode: usize, theta: f64) -> Self {
        let mut t = theta.rem_euclid(std::f64::consts::PI);
        // rem_euclid can land exactly on π for inputs just below a multiple of π
        if t >= std::f64::consts::PI {
            t = 0.0;
        }
        Self { mode, theta: t }
    }

    /// Amplitude quadrature x of `mode`.
    pub fn x(mode: usize) -> Self {
        Self { mode, theta: 0.0 }
    }

    /// Phase quadrature p of `mode`.
    pub fn p(mode: usize) -> Self {
        Self {
            mode,
            theta: std::f64::consts::FRAC_PI_2,
        }
    }

    /// Unit phase-space direction of this address in a 2N-dimensional space.
    pub(crate) fn direction(&self, n_modes: usize) -> Result<DVector<f64>> {
        if self.mode >= n_modes {
            return Err(Error::ModeOutOfRange {
                mode: self.mode,
                n_modes,
            });
        }
        let mut u = DVector::zeros(2 * n_modes);
        u[2 * self.mode] = self.theta.cos();
        u[2 * self.mode + 1] = self.theta.sin();
        Ok(u)
    }

    pub(crate) fn label(&self) -> String {
        if self.theta == 0.0 {
            format!("x{}", self.mode)
        } else if (self.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12 {
            format!("p{}", self.mode)
        } else {
            format!("q{}@{:.4}", self.mode, self.theta)
        }
    }
}

/// Mean vector and covariance matrix of an N-mode Gaussian state,
/// shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from raw mean and covariance. The covariance must be
    /// square of size 2N matching the mean, and symmetric within
    /// [`SYMMETRY_TOL`]; asymmetry below the tolerance is symmetrized away.
    ///
    /// Physicality (symplectic eigenvalues ≥ 1) is not enforced here — all
    /// operations of this module preserve it, and [`GaussianState::is_physical`]
    /// tests it — so that diagnostic below-bound matrices can still be
    /// represented.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "mean length {dim} is not a positive even number"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let mut max_asym: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max((cov[(i, j)] - cov[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_TOL {
            return Err(Error::AsymmetricCovariance {
                max_asymmetry: max_asym,
                tolerance: SYMMETRY_TOL,
            });
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        Ok(Self {
            n_modes: dim / 2,
            mean,
            cov: sym,
        })
    }

    /// The N-mode vacuum: mean 0, covariance identity.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("vacuum requires at least one mode"));
        }
        Ok(Self {
            n_modes,
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        })
    }

    /// Single-mode minimum-uncertainty squeezed vacuum with variance `s`
    /// along `theta` and 1/s along the conjugate quadrature. `s` is the
    /// squeezed variance in shot-noise units, s = 10^(−dB/10); anti-squeezed
    /// orientations are expressed through `theta`, so 0 < s ≤ 1.
    pub fn squeezed_vacuum(s: f64, theta: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::invalid(format!(
                "squeezed variance must satisfy 0 < s <= 1, got {s}"
            )));
        }
        Self::vacuum(1)?.apply_squeeze(0, s, theta)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    fn apply_symplectic(&self, s: &DMatrix<f64>) -> Self {
        let mean = s * &self.mean;
        let cov = s * &self.cov * s.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Self {
            n_modes: self.n_modes,
            mean,
            cov,
        }
    }

    /// Displaces `mode` by (dx, dp) in phase space; covariance untouched.
    pub fn displace(&self, mode: usize, dx: f64, dp: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[2 * mode] += dx;
        out.mean[2 * mode + 1] += dp;
        Ok(out)
    }

    /// Mixes `mode_i` and `mode_j` on a beam splitter of power transmittance
    /// `t`: out_i = √t·in_i + √(1−t)·in_j, out_j = √(1−t)·in_i − √t·in_j.
    pub fn apply_beamsplitter(&self, mode_i: usize, mode_j: usize, t: f64) -> Result<Self> {
        self.check_mode(mode_i)?;
        self.check_mode(mode_j)?;
        if mode_i == mode_j {
            return Err(Error::invalid("beam splitter needs two distinct modes"));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!(
                "transmittance must lie in [0, 1], got {t}"
            )));
        }
        Ok(self.apply_symplectic(&symplectic::beam_splitter(self.n_modes, mode_i, mode_j, t)))
    }

    /// Rotates `mode` by `phi` in phase space.
    pub fn apply_phase_rotation(&self, mode: usize, phi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.apply_symplectic(&symplectic::rotation(self.n_modes, mode, phi)))
    }

    /// Local squeezer on `mode`: scales the `theta` quadrature by √s and the
    /// conjugate by 1/√s.
    pub fn apply_squeeze(&self, mode: usize, s: f64, theta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if s <= 0.0 {
            return Err(Error::invalid(format!(
                "squeeze variance ratio must be positive, got {s}"
            )));
        }
        Ok(self.apply_symplectic(&symplectic::squeeze(self.n_modes, mode, s, theta)))
    }

    /// Pure-loss channel of efficiency `eta` on `mode`: a beam splitter of
    /// transmittance η against vacuum with the vacuum port traced out. The
    /// mode's mean scales by √η and its covariance block by η, with (1−η)
    /// of vacuum refilled on the diagonal.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!(
                "efficiency must lie in [0, 1], got {eta}"
            )));
        }
        let root = eta.sqrt();
        let mut out = self.clone();
        let (xi, pi) = (2 * mode, 2 * mode + 1);
        out.mean[xi] *= root;
        out.mean[pi] *= root;
        for k in 0..2 * self.n_modes {
            out.cov[(xi, k)] *= root;
            out.cov[(pi, k)] *= root;
            out.cov[(k, xi)] *= root;
            out.cov[(k, pi)] *= root;
        }
        // the diagonal block got a full factor eta above; add the vacuum fill
        out.cov[(xi, xi)] += 1.0 - eta;
        out.cov[(pi, pi)] += 1.0 - eta;
        Ok(out)
    }

    /// Adds classical (Gaussian phase-insensitive in one direction) noise of
    /// variance `v_add` to the addressed quadrature: cov += v_add·u·uᵀ.
    pub fn add_classical_noise(&self, address: &QuadratureAddress, v_add: f64) -> Result<Self> {
        if v_add < 0.0 {
            return Err(Error::invalid(format!(
                "classical noise variance must be nonnegative, got {v_add}"
            )));
        }
        let u = address.direction(self.n_modes)?;
        let mut out = self.clone();
        out.cov += v_add * &u * u.transpose();
        Ok(out)
    }

    /// Variance uᵀΣu of the addressed quadrature.
    pub fn quad_variance(&self, address: &QuadratureAddress) -> Result<f64> {
        let u = address.direction(self.n_modes)?;
        Ok((u.transpose() * &self.cov * &u)[0])
    }

    /// Mean value uᵀm of the addressed quadrature.
    pub fn quad_mean(&self, address: &QuadratureAddress) -> Result<f64> {
        let u = address.direction(self.n_modes)?;
        Ok(u.dot(&self.mean))
    }

    /// Tensor product: `self` keeps its mode indices, `other`'s modes follow.
    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.n_modes + other.n_modes;
        let mut mean = DVector::zeros(2 * n);
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        let d = 2 * self.n_modes;
        mean.rows_mut(0, d).copy_from(&self.mean);
        mean.rows_mut(d, 2 * other.n_modes).copy_from(&other.mean);
        cov.view_mut((0, 0), (d, d)).copy_from(&self.cov);
        cov.view_mut((d, d), (2 * other.n_modes, 2 * other.n_modes))
            .copy_from(&other.cov);
        Self {
            n_modes: n,
            mean,
            cov,
        }
    }

    /// Removes `mode` (partial trace). Errors on the last remaining mode.
    pub fn trace_out(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes == 1 {
            return Err(Error::invalid(
                "cannot trace out the last mode; empty states are unsupported",
            ));
        }
        let keep: Vec<usize> = (0..2 * self.n_modes)
            .filter(|k| k / 2 != mode)
            .collect();
        let dim = keep.len();
        let mean = DVector::from_fn(dim, |i, _| self.mean[keep[i]]);
        let cov = DMatrix::from_fn(dim, dim, |i, j| self.cov[(keep[i], keep[j])]);
        Ok(Self {
            n_modes: self.n_modes - 1,
            mean,
            cov,
        })
    }

    /// The symplectic eigenvalues of the covariance matrix, descending.
    /// A state is physical iff all of them are ≥ 1.
    ///
    /// Computed as the (paired) singular values of the antisymmetric matrix
    /// Σ^½·Ω·Σ^½, which is similar to Ω·Σ but keeps full accuracy on the
    /// badly scaled covariances of strongly squeezed states, where the
    /// unsymmetric eigenvalue route loses half the digits.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let eig = self.cov.clone().symmetric_eigen();
        // covariances are PSD up to rounding; the clamp only removes noise
        let mut root = eig.eigenvectors.clone();
        for j in 0..root.ncols() {
            let scale = eig.eigenvalues[j].max(0.0).sqrt();
            for i in 0..root.nrows() {
                root[(i, j)] *= scale;
            }
        }
        let sqrt_cov = &root * root.transpose();
        let a = &sqrt_cov * symplectic::omega(self.n_modes) * &sqrt_cov;
        let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // singular values of an antisymmetric matrix come in equal pairs
        sv.into_iter().step_by(2).collect()
    }

    /// Heisenberg-bound test: every symplectic eigenvalue ≥ 1 − [`PHYSICALITY_TOL`].
    pub fn is_physical(&self) -> bool {
        self.symplectic_eigenvalues()
            .iter()
            .all(|nu| *nu >= 1.0 - PHYSICALITY_TOL)
    }

    /// 2x2 covariance block of a single mode.
    pub fn mode_cov(&self, mode: usize) -> Result<nalgebra::Matrix2<f64>> {
        self.check_mode(mode)?;
        let k = 2 * mode;
        Ok(nalgebra::Matrix2::new(
            self.cov[(k, k)],
            self.cov[(k, k + 1)],
            self.cov[(k + 1, k)],
            self.cov[(k + 1, k + 1)],
        ))
    }

    /// (mean x, mean p) of a single mode.
    pub fn mode_mean(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[2 * mode], self.mean[2 * mode + 1]))
    }

    /// Largest absolute elementwise difference over means and covariances.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.n_modes != other.n_modes {
            return f64::INFINITY;
        }
        let dm = (&self.mean - &other.mean).abs().max();
        let dc = (&self.cov - &other.cov).abs().max();
        dm.max(dc)
    }

    /// Order-sensitive hash of the exact float contents; equal fingerprints
    /// mean bit-identical states.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_modes.hash(&mut h);
        for v in self.mean.iter() {
            v.to_bits().hash(&mut h);
        }
        for v in self.cov.iter() {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

// Serialized as plain nested arrays so result files stay readable and the
// constructor re-validates on the way back in.
#[derive(Serialize, Deserialize)]
struct RawState {
    n_modes: usize,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl Serialize for GaussianState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = 2 * self.n_modes;
        let raw = RawState {
            n_modes: self.n_modes,
            mean: self.mean.iter().copied().collect(),
            cov: (0..dim)
                .map(|i| (0..dim).map(|j| self.cov[(i, j)]).collect())
                .collect(),
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GaussianState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawState::deserialize(deserializer)?;
        let dim = 2 * raw.n_modes;
        if raw.mean.len() != dim || raw.cov.len() != dim || raw.cov.iter().any(|r| r.len() != dim)
        {
            return Err(D::Error::custom("state dimensions are inconsistent"));
        }
        let mean = DVector::from_vec(raw.mean);
        let cov = DMatrix::from_fn(dim, dim, |i, j| raw.cov[i][j]);
        GaussianState::new(mean, cov).map_err(D::Error::custom)
    }
}
