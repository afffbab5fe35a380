//! Stochastic oracle: samples phase-space outcomes from the classical
//! multivariate normal defined by a state's (mean, cov) restricted to a set
//! of quadrature directions, and compares empirical moments against the
//! analytic ones with z-scores.
//!
//! Sampling uses the symmetric eigen square root of the restricted
//! covariance, which stays well behaved for the near-singular conditioned
//! covariances that arise in the strong-squeezing limit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, QuadratureAddress};

/// Default oracle sample count.
pub const DEFAULT_ORACLE_SAMPLES: usize = 1_000_000;

/// Default z-score threshold for flagging a moment mismatch.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Samples are generated in fixed-size chunks with seeds derived as
/// base_seed + chunk_index, so a batch is independent of how the chunks are
/// scheduled and merging partial batches is associative.
const CHUNK: usize = 1 << 16;

/// Eigenvalues of a restricted covariance above this negative floor are
/// clamped to zero; anything lower indicates a defective covariance upstream.
const PSD_FLOOR: f64 = -1e-9;

/// A matrix of quadrature outcomes: `n` rows, one column per address.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub n: usize,
    pub addresses: Vec<QuadratureAddress>,
    pub values: DMatrix<f64>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn column(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.values.column(j)
    }

    /// Empirical means per column.
    pub fn empirical_mean(&self) -> DVector<f64> {
        DVector::from_fn(self.addresses.len(), |j, _| self.values.column(j).mean())
    }

    /// Unbiased empirical covariance of the columns.
    pub fn empirical_cov(&self) -> DMatrix<f64> {
        let k = self.addresses.len();
        let means = self.empirical_mean();
        let mut cov = DMatrix::zeros(k, k);
        for row in 0..self.n {
            for a in 0..k {
                let da = self.values[(row, a)] - means[a];
                for b in a..k {
                    cov[(a, b)] += da * (self.values[(row, b)] - means[b]);
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                let v = cov[(a, b)] / (self.n as f64 - 1.0);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }

    /// Empirical variance of the linear combination Σ coeffs·columns.
    pub fn empirical_combination_variance(&self, coeffs: &[f64]) -> f64 {
        assert_eq!(coeffs.len(), self.addresses.len());
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for row in 0..self.n {
            let mut v = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                v += c * self.values[(row, j)];
            }
            sum += v;
            sumsq += v * v;
        }
        let m = sum / self.n as f64;
        (sumsq - self.n as f64 * m * m) / (self.n as f64 - 1.0)
    }
}

/// Restriction of the state to the addressed directions: mean Uᵀm and
/// covariance UᵀΣU.
fn restricted_moments(
    state: &GaussianState,
    addresses: &[QuadratureAddress],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if addresses.is_empty() {
        return Err(Error::invalid("at least one address is required"));
    }
    let k = addresses.len();
    let dim = 2 * state.n_modes();
    let mut u = DMatrix::zeros(dim, k);
    for (j, address) in addresses.iter().enumerate() {
        u.set_column(j, &address.direction(state.n_modes())?);
    }
    let mean = u.transpose() * state.mean();
    let cov = u.transpose() * state.cov() * &u;
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Draws `n` joint outcomes of the addressed quadratures. Fixed seeds give
/// byte-identical batches.
pub fn sample_quadratures(
    state: &GaussianState,
    addresses: &[QuadratureAddress],
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n < 2 {
        return Err(Error::invalid("sample count must be at least 2"));
    }
    let (mean, cov) = restricted_moments(state, addresses)?;
    let k = addresses.len();

    let eig = cov.symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for j in 0..k {
        let lam = eig.eigenvalues[j];
        if lam < PSD_FLOOR {
            return Err(Error::Internal(format!(
                "restricted covariance has eigenvalue {lam}; the source state is defective"
            )));
        }
        let scale = lam.max(0.0).sqrt();
        for i in 0..k {
            root[(i, j)] *= scale;
        }
    }

    let mut values = DMatrix::zeros(n, k);
    let mut z = vec![0.0f64; k];
    let n_chunks = n.div_ceil(CHUNK);
    for chunk in 0..n_chunks {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(chunk as u64));
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(n);
        for row in start..end {
            for zj in z.iter_mut() {
                *zj = StandardNormal.sample(&mut rng);
            }
            for i in 0..k {
                let mut v = mean[i];
                for (j, zj) in z.iter().enumerate() {
                    v += root[(i, j)] * zj;
                }
                values[(row, i)] = v;
            }
        }
    }

    Ok(SampleBatch {
        n,
        addresses: addresses.to_vec(),
        values,
        seed,
    })
}

/// One compared moment: its analytic value, the empirical estimate, and the
/// z-score of the difference under the Gaussian sampling distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub label: String,
    pub analytic: f64,
    pub empirical: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub z_threshold: f64,
    pub entries: Vec<ValidationEntry>,
    pub worst_abs_z: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub(crate) fn from_entries(n: usize, z_threshold: f64, entries: Vec<ValidationEntry>) -> Self {
        let worst = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
        ValidationReport {
            n,
            z_threshold,
            passed: worst <= z_threshold,
            entries,
            worst_abs_z: worst,
        }
    }
}

/// Samples the state and z-tests every mean, variance and covariance entry
/// of the addressed quadratures against the analytic values.
///
/// Standard errors: √(Σjj/n) for means, Σjj·√(2/(n−1)) for variances and
/// √((Σjj·Σll + Σjl²)/(n−1)) for covariances.
pub fn validate_against_analytic(
    state: &GaussianState,
    addresses: &[QuadratureAddress],
    n: usize,
    seed: u64,
    z_threshold: f64,
) -> Result<ValidationReport> {
    if n < 1000 {
        return Err(Error::invalid(
            "validation needs at least 1000 samples for the z-score approximations",
        ));
    }
    let batch = sample_quadratures(state, addresses, n, seed)?;
    let (mean, cov) = restricted_moments(state, addresses)?;
    Ok(compare_moments(&batch, &mean, &cov, z_threshold))
}

/// z-tests a batch against externally supplied analytic moments. Split from
/// [`validate_against_analytic`] so corrupted-source sensitivity checks can
/// sample one state and compare against another's moments.
pub fn compare_moments(
    batch: &SampleBatch,
    analytic_mean: &DVector<f64>,
    analytic_cov: &DMatrix<f64>,
    z_threshold: f64,
) -> ValidationReport {
    let k = batch.addresses.len();
    let n = batch.n as f64;
    let emp_mean = batch.empirical_mean();
    let emp_cov = batch.empirical_cov();

    let mut entries = Vec::with_capacity(k + k * (k + 1) / 2);
    for j in 0..k {
        let se = (analytic_cov[(j, j)] / n).sqrt().max(f64::MIN_POSITIVE);
        entries.push(ValidationEntry {
            label: format!("mean[{}]", batch.addresses[j].label()),
            analytic: analytic_mean[j],
            empirical: emp_mean[j],
            z: (emp_mean[j] - analytic_mean[j]) / se,
        });
    }
    for a in 0..k {
        for b in a..k {
            let (label, se) = if a == b {
                (
                    format!("var[{}]", batch.addresses[a].label()),
                    analytic_cov[(a, a)] * (2.0 / (n - 1.0)).sqrt(),
                )
            } else {
                (
                    format!(
                        "cov[{},{}]",
                        batch.addresses[a].label(),
                        batch.addresses[b].label()
                    ),
                    ((analytic_cov[(a, a)] * analytic_cov[(b, b)]
                        + analytic_cov[(a, b)].powi(2))
                        / (n - 1.0))
                        .sqrt(),
                )
            };
            let se = se.max(f64::MIN_POSITIVE);
            entries.push(ValidationEntry {
                label,
                analytic: analytic_cov[(a, b)],
                empirical: emp_cov[(a, b)],
                z: (emp_cov[(a, b)] - analytic_cov[(a, b)]) / se,
            });
        }
    }
    ValidationReport::from_entries(batch.n, z_threshold, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_variance_within_statistics() {
        let vac = GaussianState::vacuum(1).unwrap();
        let n = 1_000_000;
        let batch = sample_quadratures(&vac, &[QuadratureAddress::x(0)], n, 11).unwrap();
        let cov = batch.empirical_cov();
        assert!((cov[(0, 0)] - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn fixed_seed_reproduces_batch_exactly() {
        let st = GaussianState::squeezed_vacuum(0.4, 0.3)
            .unwrap()
            .displace(0, 1.0, -1.0)
            .unwrap();
        let addrs = [QuadratureAddress::x(0), QuadratureAddress::p(0)];
        let a = sample_quadratures(&st, &addrs, 5000, 99).unwrap();
        let b = sample_quadratures(&st, &addrs, 5000, 99).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_quadratures(&st, &addrs, 5000, 100).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn perfectly_correlated_pair() {
        // the same direction twice: a rank-one restricted covariance
        let st = GaussianState::vacuum(1).unwrap();
        let addrs = [QuadratureAddress::x(0), QuadratureAddress::x(0)];
        let batch = sample_quadratures(&st, &addrs, 20_000, 5).unwrap();
        let cov = batch.empirical_cov();
        let r = cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_passes_on_honest_state() {
        let st = GaussianState::vacuum(1)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(0.6, 0.0).unwrap())
            .apply_beamsplitter(0, 1, 0.477)
            .unwrap();
        let addrs = [
            QuadratureAddress::x(0),
            QuadratureAddress::p(0),
            QuadratureAddress::x(1),
            QuadratureAddress::p(1),
        ];
        let report = validate_against_analytic(&st, &addrs, 100_000, 17, 4.5).unwrap();
        assert!(report.passed, "worst |z| = {}", report.worst_abs_z);
        assert_eq!(report.entries.len(), 4 + 10);
    }

    #[test]
    fn validation_flags_corrupted_covariance() {
        let honest = GaussianState::vacuum(1).unwrap();
        let mut cov = honest.cov().clone();
        cov[(0, 0)] *= 1.1;
        let corrupted = GaussianState::new(honest.mean().clone(), cov).unwrap();

        let addrs = [QuadratureAddress::x(0), QuadratureAddress::p(0)];
        let batch = sample_quadratures(&corrupted, &addrs, 100_000, 3).unwrap();
        let (mean, cov) = restricted_moments(&honest, &addrs).unwrap();
        let report = compare_moments(&batch, &mean, &cov, 4.0);
        assert!(!report.passed);
        assert!(report.worst_abs_z > 10.0);
    }

    #[test]
    fn validation_refuses_tiny_samples() {
        let st = GaussianState::vacuum(1).unwrap();
        assert!(validate_against_analytic(&st, &[QuadratureAddress::x(0)], 999, 1, 4.0).is_err());
        assert!(sample_quadratures(&st, &[QuadratureAddress::x(0)], 1, 1).is_err());
    }

    #[test]
    fn distinct_seed_streams_are_uncorrelated() {
        let st = GaussianState::vacuum(1).unwrap();
        let n = 100_000;
        let a = sample_quadratures(&st, &[QuadratureAddress::x(0)], n, 1234).unwrap();
        let b = sample_quadratures(&st, &[QuadratureAddress::x(0)], n, 1235).unwrap();
        let ma = a.column(0).mean();
        let mb = b.column(0).mean();
        let mut cross = 0.0;
        for i in 0..n {
            cross += (a.values[(i, 0)] - ma) * (b.values[(i, 0)] - mb);
        }
        let r = cross / (n as f64 - 1.0);
        assert!(r.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn estimator_error_shrinks_with_sample_size() {
        // RMS error of the variance estimator should scale like 1/√n
        let st = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        let addr = [QuadratureAddress::p(0)];
        let truth = 2.0;
        let reps = 6;
        let mut log_n = Vec::new();
        let mut log_err = Vec::new();
        for (i, n) in [1_000usize, 10_000, 100_000, 1_000_000].iter().enumerate() {
            let mut mse = 0.0;
            for r in 0..reps {
                let batch =
                    sample_quadratures(&st, &addr, *n, 7000 + (i * reps + r) as u64 * 31).unwrap();
                let err = batch.empirical_cov()[(0, 0)] - truth;
                mse += err * err;
            }
            log_n.push((*n as f64).ln());
            log_err.push((mse / reps as f64).sqrt().ln());
        }
        // least-squares slope of log(err) against log(n)
        let k = log_n.len() as f64;
        let mean_x: f64 = log_n.iter().sum::<f64>() / k;
        let mean_y: f64 = log_err.iter().sum::<f64>() / k;
        let sxy: f64 = log_n
            .iter()
            .zip(&log_err)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum();
        let sxx: f64 = log_n.iter().map(|x| (x - mean_x).powi(2)).sum();
        let slope = sxy / sxx;
        assert!(
            (-0.75..=-0.25).contains(&slope),
            "convergence slope {slope} is not compatible with 1/sqrt(n)"
        );
    }
}
