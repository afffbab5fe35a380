//! The erasing protocol end-to-end: state preparation, QND labelling on a
//! beam splitter against a squeezed marker, detection losses, electronic or
//! feed-forward erasure, the delayed basis choice, squeezing sweeps and the
//! reference calibration.
//!
//! Stage conventions: the signal occupies mode 0 and the marker mode 1. The
//! marker's excess phase noise enters before the QND beam splitter (it
//! originates in the squeezing source), and one loss channel of the same
//! efficiency acts on each beam between the beam splitter and its detector.
//!
//! The QND-stage added noises (N_x_label, N_p_signal) quantify the transfer
//! itself and are therefore computed from the beam-splitter outputs, i.e.
//! from detection-loss-corrected variances. The erased noises quantify the
//! full recovery chain and are computed from the detected or restored
//! quantities without correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, QuadratureAddress};
use crate::measurement::{
    combination_variance, feedforward, homodyne_condition, FeedforwardMode, GainStrategy,
};
use crate::metrics::{
    added_noise, fidelity_gaussian, gains, wigner_contour, ContourEllipse, NoiseReport,
    CONTOUR_LEVEL_1SIGMA,
};

pub const SIGNAL_MODE: usize = 0;
pub const MARKER_MODE: usize = 1;

/// Reference operating point this crate is calibrated against (see
/// [`calibrate_reference`]): beam-splitter transmittance, the two reported
/// QND added-noise values, the aggregate detection efficiency and the
/// analysis sideband.
pub const REFERENCE_TRANSMITTANCE: f64 = 0.477;
pub const REFERENCE_N_X_LABEL: f64 = 0.55;
pub const REFERENCE_N_P_SIGNAL: f64 = 455.0;
pub const REFERENCE_DETECTION_EFFICIENCY: f64 = 0.70;
pub const REFERENCE_SIDEBAND_MHZ: f64 = 20.5;

/// What rides on the signal mode at the input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalInput {
    #[default]
    Vacuum,
    Coherent {
        dx: f64,
        dp: f64,
    },
}

/// Classical noise injected on the restored output state (after gain
/// renormalization), in shot-noise units per quadrature. This is the hook
/// for technical imperfections of the feed-forward loop, which the ideal
/// actuator model does not produce on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNoise {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub p: f64,
}

fn default_efficiency() -> f64 {
    1.0
}

fn default_gain_strategy() -> GainStrategy {
    GainStrategy::Cancellation
}

fn default_sideband() -> f64 {
    REFERENCE_SIDEBAND_MHZ
}

/// Full description of one protocol scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EraserParams {
    /// QND beam-splitter power transmittance, strictly inside (0, 1).
    pub transmittance: f64,
    /// Marker squeezing in dB (nonnegative); squeezed variance s = 10^(−dB/10).
    #[serde(default)]
    pub marker_squeeze_db: f64,
    /// Excess classical noise on the marker phase quadrature, shot-noise units.
    #[serde(default)]
    pub marker_excess_phase_noise: f64,
    /// Detection efficiency per detected beam, in [0, 1].
    #[serde(default = "default_efficiency")]
    pub detection_efficiency: f64,
    #[serde(default = "default_gain_strategy")]
    pub gain_strategy: GainStrategy,
    #[serde(default)]
    pub signal_input: SignalInput,
    /// Informational metadata only; does not enter the model.
    #[serde(default = "default_sideband")]
    pub sideband_freq_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_noise: Option<OutputNoise>,
}

impl Default for EraserParams {
    fn default() -> Self {
        EraserParams {
            transmittance: 0.5,
            marker_squeeze_db: 0.0,
            marker_excess_phase_noise: 0.0,
            detection_efficiency: 1.0,
            gain_strategy: GainStrategy::Cancellation,
            signal_input: SignalInput::Vacuum,
            sideband_freq_mhz: REFERENCE_SIDEBAND_MHZ,
            output_noise: None,
        }
    }
}

impl EraserParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance > 0.0 && self.transmittance < 1.0) {
            return Err(Error::invalid(format!(
                "transmittance must lie strictly in (0, 1), got {}",
                self.transmittance
            )));
        }
        if !self.marker_squeeze_db.is_finite() || self.marker_squeeze_db < 0.0 {
            return Err(Error::invalid(format!(
                "marker squeezing must be a nonnegative dB value, got {}",
                self.marker_squeeze_db
            )));
        }
        if !self.marker_excess_phase_noise.is_finite() || self.marker_excess_phase_noise < 0.0 {
            return Err(Error::invalid(format!(
                "marker excess phase noise must be nonnegative, got {}",
                self.marker_excess_phase_noise
            )));
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(Error::invalid(format!(
                "detection efficiency must lie in [0, 1], got {}",
                self.detection_efficiency
            )));
        }
        if let Some(noise) = &self.output_noise {
            if noise.x < 0.0 || noise.p < 0.0 {
                return Err(Error::invalid(
                    "output noise variances must be nonnegative",
                ));
            }
        }
        Ok(())
    }

    /// Squeezed-quadrature variance of the marker, s = 10^(−dB/10).
    pub fn marker_squeeze_variance(&self) -> f64 {
        10f64.powf(-self.marker_squeeze_db / 10.0)
    }
}

/// The states of one protocol run, before any measurement.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub signal_input: GaussianState,
    pub marker_input: GaussianState,
    /// signal ⊗ marker before the QND beam splitter.
    pub prepared: GaussianState,
    /// After the QND beam splitter, before detection losses.
    pub post_qnd: GaussianState,
    /// After one loss channel of the configured efficiency per beam.
    pub detected: GaussianState,
}

impl Pipeline {
    pub fn build(params: &EraserParams) -> Result<Self> {
        params.validate()?;
        let signal_input = match params.signal_input {
            SignalInput::Vacuum => GaussianState::vacuum(1)?,
            SignalInput::Coherent { dx, dp } => GaussianState::vacuum(1)?.displace(0, dx, dp)?,
        };
        let marker_input = GaussianState::squeezed_vacuum(params.marker_squeeze_variance(), 0.0)?
            .add_classical_noise(
                &QuadratureAddress::p(0),
                params.marker_excess_phase_noise,
            )?;
        let prepared = signal_input.tensor(&marker_input);
        let post_qnd = prepared.apply_beamsplitter(SIGNAL_MODE, MARKER_MODE, params.transmittance)?;
        let detected = post_qnd
            .apply_loss(SIGNAL_MODE, params.detection_efficiency)?
            .apply_loss(MARKER_MODE, params.detection_efficiency)?;
        Ok(Pipeline {
            signal_input,
            marker_input,
            prepared,
            post_qnd,
            detected,
        })
    }

    /// Named pre-measurement stages, in pipeline order.
    pub fn stages(&self) -> Vec<(&'static str, &GaussianState)> {
        vec![
            ("prepared", &self.prepared),
            ("post_qnd", &self.post_qnd),
            ("detected", &self.detected),
        ]
    }
}

/// One row of the raw variance table, shot-noise units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEntry {
    pub stage: String,
    pub quadrature: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEllipse {
    pub label: String,
    pub ellipse: ContourEllipse,
}

/// Everything one experiment run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub noise_report: NoiseReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output_state: Option<GaussianState>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub contours: Vec<LabeledEllipse>,
    pub variances: Vec<VarianceEntry>,
    /// Fingerprint of the joint pre-measurement (detected) state; identical
    /// values certify that two runs consumed the same joint covariance.
    pub joint_fingerprint: u64,
}

impl ExperimentResult {
    fn checked(self) -> Result<Self> {
        for entry in &self.variances {
            if !(entry.variance > 0.0) {
                return Err(Error::Internal(format!(
                    "nonpositive variance {} at {}.{}",
                    entry.variance, entry.stage, entry.quadrature
                )));
            }
        }
        if let Some(state) = &self.output_state {
            if !state.is_physical() {
                let nu = state
                    .symplectic_eigenvalues()
                    .last()
                    .copied()
                    .unwrap_or(f64::NAN);
                return Err(Error::Unphysical { nu_min: nu });
            }
        }
        Ok(self)
    }
}

fn x_s() -> QuadratureAddress {
    QuadratureAddress::x(SIGNAL_MODE)
}
fn p_s() -> QuadratureAddress {
    QuadratureAddress::p(SIGNAL_MODE)
}
fn x_m() -> QuadratureAddress {
    QuadratureAddress::x(MARKER_MODE)
}
fn p_m() -> QuadratureAddress {
    QuadratureAddress::p(MARKER_MODE)
}

fn base_variances(pipe: &Pipeline) -> Result<Vec<VarianceEntry>> {
    let single_x = QuadratureAddress::x(0);
    let single_p = QuadratureAddress::p(0);
    let mut rows = vec![
        ("input", "x_s", pipe.signal_input.quad_variance(&single_x)?),
        ("input", "p_s", pipe.signal_input.quad_variance(&single_p)?),
        ("marker", "x_m", pipe.marker_input.quad_variance(&single_x)?),
        ("marker", "p_m", pipe.marker_input.quad_variance(&single_p)?),
    ];
    for (stage, state) in [("post_qnd", &pipe.post_qnd), ("detected", &pipe.detected)] {
        rows.push((stage, "x_s", state.quad_variance(&x_s())?));
        rows.push((stage, "p_s", state.quad_variance(&p_s())?));
        rows.push((stage, "x_m", state.quad_variance(&x_m())?));
        rows.push((stage, "p_m", state.quad_variance(&p_m())?));
    }
    Ok(rows
        .into_iter()
        .map(|(stage, quadrature, variance)| VarianceEntry {
            stage: stage.into(),
            quadrature: quadrature.into(),
            variance,
        })
        .collect())
}

/// The labelling and broadening added noises of the QND stage, normalized by
/// g_m and g_s and referred to the beam-splitter outputs.
fn qnd_added_noise(pipe: &Pipeline, params: &EraserParams) -> Result<(f64, f64)> {
    let g = gains(params.transmittance)?;
    let v_x_in = pipe.signal_input.quad_variance(&QuadratureAddress::x(0))?;
    let v_p_in = pipe.signal_input.quad_variance(&QuadratureAddress::p(0))?;
    let n_x = added_noise(pipe.post_qnd.quad_variance(&x_m())?, g.marker, v_x_in)?;
    let n_p = added_noise(pipe.post_qnd.quad_variance(&p_s())?, g.signal, v_p_in)?;
    Ok((n_x, n_p))
}

/// Runs preparation and QND labelling only: N_x_label and N_p_signal.
pub fn run_qnd_stage(params: &EraserParams) -> Result<ExperimentResult> {
    let pipe = Pipeline::build(params)?;
    let (n_x, n_p) = qnd_added_noise(&pipe, params)?;
    ExperimentResult {
        noise_report: NoiseReport::new(params.transmittance, n_x, n_p, None, None)?,
        output_state: None,
        fidelity: None,
        contours: Vec::new(),
        variances: base_variances(&pipe)?,
        joint_fingerprint: pipe.detected.fingerprint(),
    }
    .checked()
}

fn resolve_gain(pipe: &Pipeline, params: &EraserParams) -> Result<f64> {
    params
        .gain_strategy
        .resolve(&pipe.detected, &p_s(), &p_m(), params.transmittance)
}

fn electronic_result(pipe: &Pipeline, params: &EraserParams) -> Result<ExperimentResult> {
    let g = gains(params.transmittance)?;
    let (n_x, n_p) = qnd_added_noise(pipe, params)?;
    let gain = resolve_gain(pipe, params)?;
    let v_x_in = pipe.signal_input.quad_variance(&QuadratureAddress::x(0))?;
    let v_p_in = pipe.signal_input.quad_variance(&QuadratureAddress::p(0))?;

    let var_pc = combination_variance(&pipe.detected, &[(p_s(), 1.0), (p_m(), -gain)])?;
    let n_p_erased = added_noise(var_pc, g.eraser, v_p_in)?;
    let n_x_erased = added_noise(
        pipe.detected.quad_variance(&x_s())?,
        1.0 / g.eraser,
        v_x_in,
    )?;

    let mut variances = base_variances(pipe)?;
    variances.push(VarianceEntry {
        stage: "conditioned".into(),
        quadrature: "p_c".into(),
        variance: var_pc,
    });

    ExperimentResult {
        noise_report: NoiseReport::new(
            params.transmittance,
            n_x,
            n_p,
            Some(n_p_erased),
            Some(n_x_erased),
        )?,
        output_state: None,
        fidelity: None,
        contours: Vec::new(),
        variances,
        joint_fingerprint: pipe.detected.fingerprint(),
    }
    .checked()
}

/// Erasure by electronic subtraction of the two phase photocurrents,
/// p_c = p_signal − G·p_marker, with the configured gain strategy.
pub fn run_erasure_electronic(params: &EraserParams) -> Result<ExperimentResult> {
    let pipe = Pipeline::build(params)?;
    electronic_result(&pipe, params)
}

/// The restored signal state after feed-forward and gain renormalization
/// (a local squeeze scaling p by 1/g_e and x by g_e), plus any configured
/// output noise.
fn restored_state(pipe: &Pipeline, params: &EraserParams) -> Result<GaussianState> {
    let gain = resolve_gain(pipe, params)?;
    let raw = feedforward(
        &pipe.detected,
        &p_m(),
        &p_s(),
        gain,
        FeedforwardMode::Exact,
    )?;
    let mut restored = raw.apply_squeeze(
        0,
        params.transmittance,
        std::f64::consts::FRAC_PI_2,
    )?;
    if let Some(noise) = &params.output_noise {
        restored = restored
            .add_classical_noise(&QuadratureAddress::x(0), noise.x)?
            .add_classical_noise(&QuadratureAddress::p(0), noise.p)?;
    }
    Ok(restored)
}

/// The gain-normalized signal output of the QND stage, for display alongside
/// input and restored states: both quadratures referred back through g_s.
fn qnd_display_state(pipe: &Pipeline, params: &EraserParams) -> Result<GaussianState> {
    let g = gains(params.transmittance)?;
    let signal_out = pipe.post_qnd.trace_out(MARKER_MODE)?;
    GaussianState::new(
        signal_out.mean() * g.eraser,
        signal_out.cov() * (g.eraser * g.eraser),
    )
}

fn contour_set(
    pipe: &Pipeline,
    params: &EraserParams,
    restored: &GaussianState,
    level: f64,
) -> Result<Vec<LabeledEllipse>> {
    let display = qnd_display_state(pipe, params)?;
    Ok(vec![
        LabeledEllipse {
            label: "input".into(),
            ellipse: wigner_contour(&pipe.signal_input, 0, level)?,
        },
        LabeledEllipse {
            label: "post_qnd".into(),
            ellipse: wigner_contour(&display, 0, level)?,
        },
        LabeledEllipse {
            label: "restored".into(),
            ellipse: wigner_contour(restored, 0, level)?,
        },
    ])
}

/// Erasure by electro-optic feed-forward: the marker phase measurement
/// drives a displacement of the signal phase, leaving a freely propagating
/// restored state. Reports both erased added noises, the fidelity against
/// the input and the contour ellipses of input, labelled and restored states.
pub fn run_erasure_feedforward(params: &EraserParams) -> Result<ExperimentResult> {
    let pipe = Pipeline::build(params)?;
    let (n_x, n_p) = qnd_added_noise(&pipe, params)?;
    let restored = restored_state(&pipe, params)?;
    let v_x_in = pipe.signal_input.quad_variance(&QuadratureAddress::x(0))?;
    let v_p_in = pipe.signal_input.quad_variance(&QuadratureAddress::p(0))?;

    // gain renormalization is folded into the restored state, so the added
    // noises read off directly against the input variances
    let restored_vx = restored.quad_variance(&QuadratureAddress::x(0))?;
    let restored_vp = restored.quad_variance(&QuadratureAddress::p(0))?;
    let n_x_erased = restored_vx - v_x_in;
    let n_p_erased = restored_vp - v_p_in;

    let fidelity = fidelity_gaussian(&pipe.signal_input, &restored)?;
    let contours = contour_set(&pipe, params, &restored, CONTOUR_LEVEL_1SIGMA)?;

    let mut variances = base_variances(&pipe)?;
    variances.push(VarianceEntry {
        stage: "restored".into(),
        quadrature: "x_s".into(),
        variance: restored_vx,
    });
    variances.push(VarianceEntry {
        stage: "restored".into(),
        quadrature: "p_s".into(),
        variance: restored_vp,
    });

    ExperimentResult {
        noise_report: NoiseReport::new(
            params.transmittance,
            n_x,
            n_p,
            Some(n_p_erased),
            Some(n_x_erased),
        )?,
        output_state: Some(restored),
        fidelity: Some(fidelity),
        contours,
        variances,
        joint_fingerprint: pipe.detected.fingerprint(),
    }
    .checked()
}

/// Contour ellipses of the feed-forward experiment at an arbitrary level.
pub fn feedforward_contours(params: &EraserParams, level: f64) -> Result<Vec<LabeledEllipse>> {
    let pipe = Pipeline::build(params)?;
    let restored = restored_state(&pipe, params)?;
    contour_set(&pipe, params, &restored, level)
}

/// Which marker quadrature the delayed choice reads out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerBasis {
    Amplitude,
    Phase,
}

/// Runs one branch of the delayed-choice readout from the joint
/// post-beam-splitter state. The amplitude basis extracts the labelled
/// which-eigenstate information (conditioning the signal amplitude); the
/// phase basis erases it and equals [`run_erasure_electronic`]. The
/// `joint_fingerprint` of both branches certifies they consumed the same
/// pre-measurement state, so the choice happens strictly downstream.
pub fn run_delayed_choice(
    params: &EraserParams,
    marker_basis: MarkerBasis,
) -> Result<ExperimentResult> {
    let pipe = Pipeline::build(params)?;
    match marker_basis {
        MarkerBasis::Phase => electronic_result(&pipe, params),
        MarkerBasis::Amplitude => {
            let (n_x, n_p) = qnd_added_noise(&pipe, params)?;
            let outcome = pipe.detected.quad_mean(&x_m())?;
            let record = homodyne_condition(&pipe.detected, &x_m(), outcome)?;
            let conditioned = record.conditioned_state;
            let mut variances = base_variances(&pipe)?;
            variances.push(VarianceEntry {
                stage: "conditioned".into(),
                quadrature: "x_s".into(),
                variance: conditioned.quad_variance(&QuadratureAddress::x(0))?,
            });
            variances.push(VarianceEntry {
                stage: "conditioned".into(),
                quadrature: "p_s".into(),
                variance: conditioned.quad_variance(&QuadratureAddress::p(0))?,
            });
            ExperimentResult {
                noise_report: NoiseReport::new(params.transmittance, n_x, n_p, None, None)?,
                output_state: Some(conditioned),
                fidelity: None,
                contours: Vec::new(),
                variances,
                joint_fingerprint: pipe.detected.fingerprint(),
            }
            .checked()
        }
    }
}

/// One row of a squeezing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub squeeze_db: f64,
    pub n_x_label: f64,
    pub n_p_signal: f64,
    pub n_p_erased: f64,
}

/// Reruns the electronic-erasure experiment across marker squeezing values,
/// all other parameters held fixed.
pub fn sweep_squeezing(params: &EraserParams, squeeze_db_list: &[f64]) -> Result<Vec<SweepRow>> {
    if squeeze_db_list.is_empty() {
        return Err(Error::invalid("squeezing sweep needs at least one value"));
    }
    squeeze_db_list
        .iter()
        .map(|&db| {
            let mut row_params = params.clone();
            row_params.marker_squeeze_db = db;
            let result = run_erasure_electronic(&row_params)?;
            Ok(SweepRow {
                squeeze_db: db,
                n_x_label: result.noise_report.n_x_label,
                n_p_signal: result.noise_report.n_p_signal,
                n_p_erased: result
                    .noise_report
                    .n_p_erased
                    .expect("electronic run always reports the erased noise"),
            })
        })
        .collect()
}

/// Parameters calibrated so the QND stage reproduces the reference added
/// noises: s solves N_x = T·s/(1−T) and the marker phase variance solves
/// N_p = (1−T)·V/T, both in closed form.
pub fn calibrate_reference() -> EraserParams {
    let t = REFERENCE_TRANSMITTANCE;
    let s = REFERENCE_N_X_LABEL * (1.0 - t) / t;
    let marker_phase_variance = REFERENCE_N_P_SIGNAL * t / (1.0 - t);
    EraserParams {
        transmittance: t,
        marker_squeeze_db: -10.0 * s.log10(),
        marker_excess_phase_noise: marker_phase_variance - 1.0 / s,
        detection_efficiency: REFERENCE_DETECTION_EFFICIENCY,
        gain_strategy: GainStrategy::Cancellation,
        signal_input: SignalInput::Vacuum,
        sideband_freq_mhz: REFERENCE_SIDEBAND_MHZ,
        output_noise: None,
    }
}
