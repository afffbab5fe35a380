//! Homodyne measurement with exact Gaussian conditioning, outcome sampling,
//! electronic combination of photocurrents and deterministic feed-forward.
//!
//! Conditioning follows the Schur-complement update for a joint Gaussian
//! pinned on one linear functional; the measured mode is removed entirely
//! (the detector destroys the beam, and its conjugate quadrature carries no
//! further information).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, QuadratureAddress};

/// Meter variances at or below this are treated as degenerate: conditioning
/// on them would divide by (numerical) zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Outcome of a homodyne detection: the measured address, the recorded value,
/// the pre-measurement statistics of that quadrature, and the state of the
/// surviving modes.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub address: QuadratureAddress,
    pub outcome: f64,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub conditioned_state: GaussianState,
}

/// How the feed-forward (or electronic-subtraction) gain is chosen.
///
/// `Fixed` carries a user value. `Optimal` is the least-squares gain
/// Cov(target, meter)/Var(meter). `Cancellation` is −√((1−T)/T), the gain
/// that cancels the marker contribution identically under this crate's
/// beam-splitter convention, making the recovered quadrature independent of
/// the marker noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainStrategy {
    Fixed(f64),
    Optimal,
    Cancellation,
}

impl GainStrategy {
    /// Resolves the strategy to a numeric gain for the given state and
    /// addresses. `qnd_transmittance` is the beam-splitter transmittance the
    /// cancellation gain refers to; the other strategies ignore it.
    pub fn resolve(
        &self,
        state: &GaussianState,
        target: &QuadratureAddress,
        meter: &QuadratureAddress,
        qnd_transmittance: f64,
    ) -> Result<f64> {
        match self {
            GainStrategy::Fixed(g) => Ok(*g),
            GainStrategy::Optimal => optimal_gain(state, target, meter),
            GainStrategy::Cancellation => cancellation_gain(qnd_transmittance),
        }
    }
}

/// The marker-cancelling gain −√((1−T)/T).
pub fn cancellation_gain(transmittance: f64) -> Result<f64> {
    if !(transmittance > 0.0 && transmittance < 1.0) {
        return Err(Error::invalid(format!(
            "cancellation gain needs transmittance in (0, 1), got {transmittance}"
        )));
    }
    Ok(-((1.0 - transmittance) / transmittance).sqrt())
}

/// Least-squares gain G = Cov(target, meter)/Var(meter), minimizing
/// Var(target − G·meter).
pub fn optimal_gain(
    state: &GaussianState,
    target: &QuadratureAddress,
    meter: &QuadratureAddress,
) -> Result<f64> {
    if target.mode == meter.mode {
        return Err(Error::invalid(
            "optimal gain needs target and meter on distinct modes",
        ));
    }
    let ut = target.direction(state.n_modes())?;
    let um = meter.direction(state.n_modes())?;
    let var_meter = (um.transpose() * state.cov() * &um)[0];
    if var_meter <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateMeasurement { variance: var_meter });
    }
    let cov = (ut.transpose() * state.cov() * &um)[0];
    Ok(cov / var_meter)
}

/// Projects the state onto `outcome` of the addressed quadrature.
///
/// With u the measured direction, V = uᵀΣu and σ the cross-covariance of the
/// remaining quadratures with u, the survivors update as
/// Σ' = Σ_r − σσᵀ/V and m' = m_r + σ·(outcome − uᵀm)/V, and the measured
/// mode is dropped.
pub fn homodyne_condition(
    state: &GaussianState,
    address: &QuadratureAddress,
    outcome: f64,
) -> Result<MeasurementRecord> {
    if state.n_modes() < 2 {
        return Err(Error::invalid(
            "homodyne conditioning needs at least two modes; the measured mode is destroyed",
        ));
    }
    let u = address.direction(state.n_modes())?;
    let prior_variance = (u.transpose() * state.cov() * &u)[0];
    if prior_variance <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateMeasurement {
            variance: prior_variance,
        });
    }
    let prior_mean = u.dot(state.mean());

    let keep: Vec<usize> = (0..2 * state.n_modes())
        .filter(|k| k / 2 != address.mode)
        .collect();
    let dim = keep.len();
    let w = state.cov() * &u;
    let sigma = DVector::from_fn(dim, |i, _| w[keep[i]]);
    let mean_r = DVector::from_fn(dim, |i, _| state.mean()[keep[i]]);
    let cov_r = DMatrix::from_fn(dim, dim, |i, j| state.cov()[(keep[i], keep[j])]);

    let cov_post = &cov_r - &sigma * sigma.transpose() / prior_variance;
    let mean_post = &mean_r + &sigma * ((outcome - prior_mean) / prior_variance);

    Ok(MeasurementRecord {
        address: *address,
        outcome,
        prior_mean,
        prior_variance,
        conditioned_state: GaussianState::new(mean_post, cov_post)?,
    })
}

/// Draws the outcome from the marginal N(uᵀm, uᵀΣu) under a seeded ChaCha
/// stream, then conditions on it. Identical seeds give identical records.
pub fn homodyne_sample(
    state: &GaussianState,
    address: &QuadratureAddress,
    seed: u64,
) -> Result<MeasurementRecord> {
    let u = address.direction(state.n_modes())?;
    let variance = (u.transpose() * state.cov() * &u)[0];
    if variance <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateMeasurement { variance });
    }
    let mean = u.dot(state.mean());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let z: f64 = StandardNormal.sample(&mut rng);
    homodyne_condition(state, address, mean + variance.sqrt() * z)
}

fn combination_direction(
    state: &GaussianState,
    terms: &[(QuadratureAddress, f64)],
) -> Result<DVector<f64>> {
    if terms.is_empty() {
        return Err(Error::invalid("combination needs at least one term"));
    }
    let mut c = DVector::zeros(2 * state.n_modes());
    for (address, coeff) in terms {
        c += address.direction(state.n_modes())? * *coeff;
    }
    Ok(c)
}

/// Variance cᵀΣc of an electronic linear combination of quadratures, with c
/// assembled from the (address, coefficient) terms.
pub fn combination_variance(
    state: &GaussianState,
    terms: &[(QuadratureAddress, f64)],
) -> Result<f64> {
    let c = combination_direction(state, terms)?;
    Ok((c.transpose() * state.cov() * &c)[0])
}

/// Mean cᵀm of an electronic linear combination of quadratures.
pub fn combination_mean(state: &GaussianState, terms: &[(QuadratureAddress, f64)]) -> Result<f64> {
    let c = combination_direction(state, terms)?;
    Ok(c.dot(state.mean()))
}

/// Whether feed-forward returns the unconditional ensemble state in closed
/// form or one sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedforwardMode {
    Exact,
    Trajectory { seed: u64 },
}

/// Measures the meter quadrature and displaces the target quadrature by
/// −gain·outcome, as a phase modulator driven by the meter photocurrent does.
///
/// In `Exact` mode the output is the ensemble state: the target quadrature
/// becomes target − gain·meter in the covariance sense, its conjugate is
/// untouched, and the meter mode is removed. In `Trajectory` mode one outcome
/// is sampled and the conditioned state is displaced accordingly; the
/// ensemble over trajectory seeds reproduces the exact-mode state.
pub fn feedforward(
    state: &GaussianState,
    meter: &QuadratureAddress,
    target: &QuadratureAddress,
    gain: f64,
    mode: FeedforwardMode,
) -> Result<GaussianState> {
    if meter.mode == target.mode {
        return Err(Error::invalid(
            "feed-forward needs meter and target on distinct modes",
        ));
    }
    if state.n_modes() < 2 {
        return Err(Error::invalid("feed-forward needs at least two modes"));
    }
    match mode {
        FeedforwardMode::Exact => {
            let ut = target.direction(state.n_modes())?;
            let um = meter.direction(state.n_modes())?;
            let map = DMatrix::identity(2 * state.n_modes(), 2 * state.n_modes())
                - gain * &ut * um.transpose();
            let mean = &map * state.mean();
            let cov = &map * state.cov() * map.transpose();
            GaussianState::new(mean, cov)?.trace_out(meter.mode)
        }
        FeedforwardMode::Trajectory { seed } => {
            let record = homodyne_sample(state, meter, seed)?;
            // mode indices above the removed meter shift down by one
            let target_mode = if target.mode > meter.mode {
                target.mode - 1
            } else {
                target.mode
            };
            let shift = -gain * record.outcome;
            record.conditioned_state.displace(
                target_mode,
                shift * target.theta.cos(),
                shift * target.theta.sin(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// signal vacuum ⊗ squeezed marker after the QND beam splitter
    fn eraser_state(t: f64, s: f64, excess_p: f64) -> GaussianState {
        let marker = GaussianState::squeezed_vacuum(s, 0.0)
            .unwrap()
            .add_classical_noise(&QuadratureAddress::p(0), excess_p)
            .unwrap();
        GaussianState::vacuum(1)
            .unwrap()
            .tensor(&marker)
            .apply_beamsplitter(0, 1, t)
            .unwrap()
    }

    #[test]
    fn conditioning_product_state_is_inert() {
        let a = GaussianState::squeezed_vacuum(0.5, 0.0)
            .unwrap()
            .displace(0, 1.0, 2.0)
            .unwrap();
        let b = GaussianState::vacuum(1).unwrap();
        let joint = a.tensor(&b);
        let rec = homodyne_condition(&joint, &QuadratureAddress::x(1), 3.7).unwrap();
        assert!(rec.conditioned_state.max_abs_diff(&a) < 1e-12);
        assert_eq!(rec.conditioned_state.n_modes(), 1);
        assert_relative_eq!(rec.prior_variance, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conditioning_reduces_variance() {
        let joint = eraser_state(0.5, 1e-8, 0.0);
        let before = joint.quad_variance(&QuadratureAddress::x(0)).unwrap();
        let rec = homodyne_condition(&joint, &QuadratureAddress::x(1), 0.0).unwrap();
        let after = rec
            .conditioned_state
            .quad_variance(&QuadratureAddress::x(0))
            .unwrap();
        assert!(after <= before + 1e-12);
        // T = 1/2: conditioned signal x variance is 2s/(1+s)
        let s = 1e-8;
        assert_relative_eq!(after, 2.0 * s / (1.0 + s), epsilon = 1e-12);
        assert!(rec.conditioned_state.is_physical());
    }

    #[test]
    fn conditioning_error_paths() {
        let single = GaussianState::vacuum(1).unwrap();
        assert!(matches!(
            homodyne_condition(&single, &QuadratureAddress::x(0), 0.0),
            Err(Error::InvalidArgument(_))
        ));

        let degenerate = GaussianState::vacuum(1)
            .unwrap()
            .tensor(&GaussianState::squeezed_vacuum(1e-13, 0.0).unwrap());
        assert!(matches!(
            homodyne_condition(&degenerate, &QuadratureAddress::x(1), 0.0),
            Err(Error::DegenerateMeasurement { .. })
        ));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let joint = eraser_state(0.477, 0.6, 10.0);
        let a = homodyne_sample(&joint, &QuadratureAddress::p(1), 42).unwrap();
        let b = homodyne_sample(&joint, &QuadratureAddress::p(1), 42).unwrap();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(
            a.conditioned_state.fingerprint(),
            b.conditioned_state.fingerprint()
        );
        let c = homodyne_sample(&joint, &QuadratureAddress::p(1), 43).unwrap();
        assert_ne!(a.outcome, c.outcome);
    }

    #[test]
    fn sample_statistics_match_marginal() {
        let joint = eraser_state(0.477, 0.6, 3.0);
        let addr = QuadratureAddress::p(1);
        let m = joint.quad_mean(&addr).unwrap();
        let v = joint.quad_variance(&addr).unwrap();
        let n = 100_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let rec = homodyne_sample(&joint, &addr, 1000 + i as u64).unwrap();
            sum += rec.outcome;
            sumsq += rec.outcome * rec.outcome;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((mean - m).abs() < 4.0 * (v / n as f64).sqrt());
        assert!((var - v).abs() < 4.0 * v * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn combination_matches_quad_variance_for_single_term() {
        let joint = eraser_state(0.3, 0.5, 1.0);
        let addr = QuadratureAddress::p(0);
        let v1 = combination_variance(&joint, &[(addr, 1.0)]).unwrap();
        assert_relative_eq!(v1, joint.quad_variance(&addr).unwrap(), epsilon = 1e-14);
        assert!(combination_variance(&joint, &[]).is_err());
    }

    #[test]
    fn combination_adds_independent_modes() {
        let a = GaussianState::squeezed_vacuum(0.5, 0.0).unwrap();
        let b = GaussianState::squeezed_vacuum(0.25, 0.0).unwrap();
        let joint = a.tensor(&b);
        let v = combination_variance(
            &joint,
            &[(QuadratureAddress::x(0), 2.0), (QuadratureAddress::x(1), -3.0)],
        )
        .unwrap();
        assert_relative_eq!(v, 4.0 * 0.5 + 9.0 * 0.25, epsilon = 1e-13);
    }

    #[test]
    fn cancellation_gain_erases_marker_exactly() {
        let t = 0.477;
        let g = cancellation_gain(t).unwrap();
        for excess in [0.0, 10.0, 1e4] {
            let joint = eraser_state(t, 0.603, excess);
            let v = combination_variance(
                &joint,
                &[(QuadratureAddress::p(0), 1.0), (QuadratureAddress::p(1), -g)],
            )
            .unwrap();
            assert_relative_eq!(v, 1.0 / t, epsilon = 1e-9);
        }
        assert!(cancellation_gain(0.0).is_err());
        assert!(cancellation_gain(1.0).is_err());
    }

    #[test]
    fn optimal_gain_limits() {
        let joint = GaussianState::vacuum(2).unwrap();
        let g = optimal_gain(&joint, &QuadratureAddress::p(0), &QuadratureAddress::p(1)).unwrap();
        assert_relative_eq!(g, 0.0, epsilon = 1e-14);

        // infinite marker phase noise drives the optimum to the cancellation value
        let t = 0.477;
        let noisy = eraser_state(t, 0.9, 1e9);
        let g = optimal_gain(&noisy, &QuadratureAddress::p(0), &QuadratureAddress::p(1)).unwrap();
        assert_relative_eq!(g, cancellation_gain(t).unwrap(), epsilon = 1e-6);

        assert!(optimal_gain(&joint, &QuadratureAddress::p(0), &QuadratureAddress::x(0)).is_err());
    }

    #[test]
    fn optimal_gain_is_least_squares() {
        let joint = eraser_state(0.35, 0.4, 2.0);
        let target = QuadratureAddress::p(0);
        let meter = QuadratureAddress::p(1);
        let g_opt = optimal_gain(&joint, &target, &meter).unwrap();
        let best = combination_variance(&joint, &[(target, 1.0), (meter, -g_opt)]).unwrap();
        for k in -20..=20 {
            let g = g_opt + 0.13 * k as f64;
            let v = combination_variance(&joint, &[(target, 1.0), (meter, -g)]).unwrap();
            assert!(v + 1e-12 >= best);
        }
    }

    #[test]
    fn conditioning_agrees_with_optimal_combination() {
        let joint = eraser_state(0.477, 0.603, 413.3);
        let target = QuadratureAddress::p(0);
        let meter = QuadratureAddress::p(1);
        let g = optimal_gain(&joint, &target, &meter).unwrap();
        let combo = combination_variance(&joint, &[(target, 1.0), (meter, -g)]).unwrap();
        let rec = homodyne_condition(&joint, &meter, 0.0).unwrap();
        let cond = rec.conditioned_state.quad_variance(&target).unwrap();
        assert_relative_eq!(combo, cond, epsilon = 1e-10);
    }

    #[test]
    fn feedforward_zero_gain_is_trace_out() {
        let joint = eraser_state(0.477, 0.5, 5.0);
        let out = feedforward(
            &joint,
            &QuadratureAddress::p(1),
            &QuadratureAddress::p(0),
            0.0,
            FeedforwardMode::Exact,
        )
        .unwrap();
        assert!(out.max_abs_diff(&joint.trace_out(1).unwrap()) < 1e-13);
    }

    #[test]
    fn feedforward_cancellation_restores_scaled_phase() {
        let t = 0.477;
        let joint = eraser_state(t, 0.603, 413.3);
        let g = cancellation_gain(t).unwrap();
        let out = feedforward(
            &joint,
            &QuadratureAddress::p(1),
            &QuadratureAddress::p(0),
            g,
            FeedforwardMode::Exact,
        )
        .unwrap();
        let vp = out.quad_variance(&QuadratureAddress::p(0)).unwrap();
        assert_relative_eq!(vp, 1.0 / t, epsilon = 1e-9);
        // the actuator displaces p only: x statistics equal the plain partial trace
        let vx = out.quad_variance(&QuadratureAddress::x(0)).unwrap();
        let vx_traced = joint
            .trace_out(1)
            .unwrap()
            .quad_variance(&QuadratureAddress::x(0))
            .unwrap();
        assert_relative_eq!(vx, vx_traced, epsilon = 1e-13);
    }

    #[test]
    fn feedforward_matches_combination_variance() {
        let joint = eraser_state(0.31, 0.44, 7.7);
        let target = QuadratureAddress::p(0);
        let meter = QuadratureAddress::p(1);
        for g in [-1.3, -0.5, 0.0, 0.8, 2.1] {
            let out = feedforward(&joint, &meter, &target, g, FeedforwardMode::Exact).unwrap();
            let direct = combination_variance(&joint, &[(target, 1.0), (meter, -g)]).unwrap();
            assert_relative_eq!(
                out.quad_variance(&QuadratureAddress::p(0)).unwrap(),
                direct,
                epsilon = 1e-12
            );
        }
        assert!(feedforward(&joint, &meter, &meter, 1.0, FeedforwardMode::Exact).is_err());
    }

    #[test]
    fn feedforward_trajectory_is_reproducible() {
        let joint = eraser_state(0.477, 0.603, 413.3);
        let g = cancellation_gain(0.477).unwrap();
        let a = feedforward(
            &joint,
            &QuadratureAddress::p(1),
            &QuadratureAddress::p(0),
            g,
            FeedforwardMode::Trajectory { seed: 7 },
        )
        .unwrap();
        let b = feedforward(
            &joint,
            &QuadratureAddress::p(1),
            &QuadratureAddress::p(0),
            g,
            FeedforwardMode::Trajectory { seed: 7 },
        )
        .unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        // trajectory covariance is the conditional one, independent of the outcome
        assert!(a.cov() == b.cov());
    }
}
