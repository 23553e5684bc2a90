//! Simulation of direction finding and secure transmission with a
//! sub-connected hybrid analog-digital (HAD) antenna array.
//!
//! The crate covers the whole chain:
//!
//! 1. [`array`]: array geometry, steering vectors and the HAD receive model.
//! 2. [`esprit`]: ESPRIT on the K subarray outputs, enumeration of the
//!    phase-ambiguity candidates, power-based disambiguation and the
//!    post-estimation SNR estimator.
//! 3. [`density`]: maximum-likelihood learning of the DOA mean and error
//!    variance from a training set and a real-time set, and the truncated
//!    Gaussian error density.
//! 4. [`beamformer`]: robust constant-modulus analog beamforming, digital
//!    confidential precoder and artificial-noise projection.
//! 5. [`perf`]: achievable/secrecy rates, QPSK BER and the Monte Carlo
//!    experiment drivers.
//!
//! Angles cross the public API in degrees. Everything that feeds a Taylor
//! expansion or an `erf` argument is converted to radians internally.

pub mod array;
pub mod beamformer;
pub mod density;
pub mod error;
pub mod esprit;
pub mod linalg;
pub mod perf;
pub mod rng;
pub mod special;

pub use array::{AnalogMatrix, ArrayConfig, EmitterSource, SnapshotBatch, SnapshotSource};
pub use beamformer::{FdBeamformer, HybridBeamformer, RobustElementTerms};
pub use density::{GaussianDoaModel, MeasurementSet, MotionState, SetLabel, WeightMethod};
pub use error::{Error, Result};
pub use esprit::{CovarianceEstimate, DoaEstimate, SnrEstimate, SubspacePair};
pub use perf::{LinkScenario, RateReport, SweepResult};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
