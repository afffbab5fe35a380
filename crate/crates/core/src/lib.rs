//! Gaussian-formalism simulator for continuous-variable quantum erasing.
//!
//! A signal beam's amplitude quadrature is labelled onto a squeezed marker
//! beam through a beam-splitter QND coupling, which inevitably broadens the
//! signal's phase quadrature. Measuring the marker in the conjugate (phase)
//! basis erases the labelled amplitude information and lets the signal phase
//! be recovered, either by electronic subtraction of photocurrents or by an
//! electro-optic feed-forward displacement that leaves a freely propagating
//! restored state.
//!
//! Everything is tracked at the level of means and covariance matrices in
//! shot-noise units (vacuum variance 1 per quadrature):
//!
//! - [`gaussian`]: multimode states and the symplectic / CP maps
//!   (beam splitter, squeezer, rotation, loss, displacement, classical noise)
//! - [`measurement`]: homodyne conditioning, sampling, electronic
//!   combinations and feed-forward
//! - [`metrics`]: gain-normalized added noise, uncertainty product, Gaussian
//!   fidelity, dB conversion, Wigner contour ellipses
//! - [`protocol`]: the labelling/erasure experiments end to end, sweeps and
//!   the reference calibration
//! - [`montecarlo`]: a sampling oracle that re-estimates every analytic
//!   moment from multivariate-normal draws
//!
//! ```
//! use cv_erase::protocol::{calibrate_reference, run_erasure_electronic};
//!
//! let params = calibrate_reference();
//! let result = run_erasure_electronic(&params).unwrap();
//! assert!((result.noise_report.n_x_label - 0.55).abs() < 1e-6);
//! assert!(result.noise_report.n_p_erased.unwrap().abs() < 1e-9);
//! ```

pub mod error;
pub mod gaussian;
pub mod measurement;
pub mod metrics;
pub mod montecarlo;
pub mod protocol;
pub mod symplectic;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, QuadratureAddress};
pub use measurement::{FeedforwardMode, GainStrategy, MeasurementRecord};
pub use metrics::{ContourEllipse, NoiseReport, QndGains};
pub use protocol::{EraserParams, ExperimentResult, MarkerBasis, Pipeline, SweepRow};
