//! Teacher-student regression benchmark: noisy gradient descent on a clipped
//! two-layer network against linear estimators.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: schedules, scaled-sigmoid activations, the network and its norms,
//!   teacher sampling.
//! - [`data`]: datasets drawn from `y = f°(x) + ε` with bounded noise.
//! - [`ngd`]: the semi-implicit Langevin chain and its diagnostics.
//! - [`linear`]: kernel ridge regression, k-NN and Nadaraya–Watson baselines.
//! - [`risk`]: Monte-Carlo excess risk, log-log rate fits, theoretical exponents.
//! - [`lowerbound`]: Gaussian bumps approximated by sigmoid ridge combinations.

pub mod data;
pub mod error;
pub mod format;
pub mod linear;
pub mod lowerbound;
pub mod model;
pub mod ngd;
pub mod quadrature;
pub mod risk;

pub use data::{Dataset, NoiseKind};
pub use error::{Error, Result};
pub use linear::{EstimatorKind, Kernel, LinearEstimator};
pub use model::{ScheduleConfig, TeacherSpec, WeightVector};
pub use ngd::{ChainOutput, NgdConfig};
pub use risk::{RateFit, RiskRecord};

/// Anything that can be evaluated at a point of `[0, 1]^d`.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Predictor for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}
