//! Scalable readout error mitigation for sparse measurement outcomes.
//!
//! A tensor-product calibration model is inverted only on the observed
//! subspace, the result is shifted to unit sum and projected onto the
//! probability simplex. Reference baselines, observables, a simulation
//! harness and an amplitude-estimation driver sit on top.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the usual `f64` choice.

pub mod baselines;
pub mod correction;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod mitigator;
pub mod mlae;
pub mod noise_model;
pub mod observables;
pub mod scalar;
pub mod sim;
pub mod simplex;

pub use baselines::{mooney_mitigate, rigorous_mitigate};
pub use correction::Correction;
pub use distributions::{BitString, SparseDistribution};
pub use error::{QremError, Result};
pub use linalg::Matrix;
pub use mitigator::{mitigate, reduced_inverse, MitigateOptions, MitigationReport, ReducedInverse};
pub use noise_model::{LocalCalibration, TensorNoiseModel};
pub use scalar::Real;
pub use simplex::sgs_project;

pub type Distribution = SparseDistribution<f64>;
pub type NoiseModel = TensorNoiseModel<f64>;
pub type Report = MitigationReport<f64>;
pub type Distribution32 = SparseDistribution<f32>;
pub type NoiseModel32 = TensorNoiseModel<f32>;
pub type Report32 = MitigationReport<f32>;
