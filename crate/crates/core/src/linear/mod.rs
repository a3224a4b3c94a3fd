//! Linear estimators: predictions of the form `f̂(x) = Σ_i y_i φ_i(x₁,…,x_n, x)`.
//!
//! Kernel ridge regression (RBF, empirical tangent kernel, random features),
//! k-nearest neighbours and Nadaraya–Watson, plus cross-validated tuning.

mod kernel;
mod knn;
mod krr;
mod nw;
mod tune;

use std::fmt;
use std::str::FromStr;

pub use kernel::{rbf, FeatureKind, FeatureMap, Kernel};
pub use knn::KnnModel;
pub use krr::{gram, solve_dual, KrrModel};
pub use nw::NwModel;
pub use tune::{tune, TuneGrid, Tuned};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::format::fmt_real;
use crate::Predictor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    KrrRbf,
    KrrNtk,
    KrrRf,
    Knn,
    Nw,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [Self::KrrRbf, Self::KrrNtk, Self::KrrRf, Self::Knn, Self::Nw];

    pub fn tag(self) -> &'static str {
        match self {
            Self::KrrRbf => "krr-rbf",
            Self::KrrNtk => "krr-ntk",
            Self::KrrRf => "krr-rf",
            Self::Knn => "knn",
            Self::Nw => "nw",
        }
    }

    /// Kinds that need a [`FeatureMap`].
    pub fn feature_kind(self) -> Option<FeatureKind> {
        match self {
            Self::KrrNtk => Some(FeatureKind::Tangent),
            Self::KrrRf => Some(FeatureKind::Random),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimatorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| invalid(format!("unknown estimator '{s}' (expected krr-rbf, krr-ntk, krr-rf, knn or nw)")))
    }
}

/// Hyperparameters of one candidate estimator.
#[derive(Clone, Debug)]
pub enum Hyper {
    Krr { kernel: Kernel, ridge: f64 },
    Knn { k: usize },
    Nw { bandwidth: f64 },
}

impl Hyper {
    pub fn fit(&self, data: &Dataset) -> Result<LinearEstimator> {
        Ok(match self {
            Hyper::Krr { kernel, ridge } => LinearEstimator::Krr(KrrModel::fit(data, kernel.clone(), *ridge)?),
            Hyper::Knn { k } => LinearEstimator::Knn(KnnModel::fit(data, *k)?),
            Hyper::Nw { bandwidth } => LinearEstimator::Nw(NwModel::fit(data, *bandwidth)?),
        })
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyper::Krr {
                kernel: Kernel::Rbf { bandwidth },
                ridge,
            } => write!(f, "bandwidth = {}, ridge = {}", fmt_real(*bandwidth), fmt_real(*ridge)),
            Hyper::Krr { ridge, .. } => write!(f, "ridge = {}", fmt_real(*ridge)),
            Hyper::Knn { k } => write!(f, "k = {k}"),
            Hyper::Nw { bandwidth } => write!(f, "bandwidth = {}", fmt_real(*bandwidth)),
        }
    }
}

/// A fitted linear estimator.
#[derive(Clone, Debug)]
pub enum LinearEstimator {
    Krr(KrrModel),
    Knn(KnnModel),
    Nw(NwModel),
}

impl LinearEstimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            LinearEstimator::Krr(m) => match m.kernel() {
                Kernel::Rbf { .. } => EstimatorKind::KrrRbf,
                Kernel::Features(map) if map.kind() == FeatureKind::Tangent => EstimatorKind::KrrNtk,
                Kernel::Features(_) => EstimatorKind::KrrRf,
            },
            LinearEstimator::Knn(_) => EstimatorKind::Knn,
            LinearEstimator::Nw(_) => EstimatorKind::Nw,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            LinearEstimator::Krr(m) => m.predict(x),
            LinearEstimator::Knn(m) => m.predict(x),
            LinearEstimator::Nw(m) => m.predict(x),
        }
    }
}

impl Predictor for LinearEstimator {
    fn predict(&self, x: &[f64]) -> f64 {
        LinearEstimator::predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScheduleConfig;
    use proptest::prelude::*;

    #[test]
    fn tags_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.tag().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("svm".parse::<EstimatorKind>().is_err());
    }

    fn hypers() -> Vec<Hyper> {
        let cfg = ScheduleConfig::new(2, 1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        vec![
            Hyper::Krr {
                kernel: Kernel::rbf(0.3).unwrap(),
                ridge: 1e-2,
            },
            Hyper::Krr {
                kernel: Kernel::Features(FeatureMap::random_init(FeatureKind::Tangent, cfg.clone(), 3, 1).unwrap()),
                ridge: 1e-3,
            },
            Hyper::Krr {
                kernel: Kernel::Features(FeatureMap::random_init(FeatureKind::Random, cfg, 5, 1).unwrap()),
                ridge: 1e-3,
            },
            Hyper::Knn { k: 3 },
            Hyper::Nw { bandwidth: 0.2 },
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn predictions_are_linear_in_the_responses(
            x in prop::collection::vec(0.0f64..1.0, 16),
            y1 in prop::collection::vec(-2.0f64..2.0, 8),
            y2 in prop::collection::vec(-2.0f64..2.0, 8),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            q in prop::collection::vec(0.0f64..1.0, 2),
        ) {
            let d1 = Dataset::new(2, x.clone(), y1.clone()).unwrap();
            let d2 = d1.with_responses(y2.clone()).unwrap();
            let comb: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
            let d3 = d1.with_responses(comb).unwrap();
            for h in hypers() {
                let p1 = h.fit(&d1).unwrap().predict(&q);
                let p2 = h.fit(&d2).unwrap().predict(&q);
                let p3 = h.fit(&d3).unwrap().predict(&q);
                let scale = 1.0 + (a * p1).abs() + (b * p2).abs();
                prop_assert!((p3 - (a * p1 + b * p2)).abs() <= 1e-9 * scale, "{}: {} vs {}", h, p3, a * p1 + b * p2);
            }
        }
    }
}
