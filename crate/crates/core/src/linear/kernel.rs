use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::format::fmt_real;
use crate::model::{clip, clip_derivative, sigmoid, NodeTable, ScheduleConfig, WeightVector};

/// Which finite feature map a [`FeatureMap`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    /// `∇_W f_{W₀}(x)`: the empirical tangent kernel at `W₀`.
    Tangent,
    /// `(a_m σ_m(w_{1,m}ᵀ[x;1]))_m` with the first layer of `W₀` frozen.
    Random,
}

/// Explicit finite-dimensional features built from a fixed network `W₀`.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    kind: FeatureKind,
    schedule: ScheduleConfig,
    init: WeightVector,
    table: NodeTable,
}

impl FeatureMap {
    pub fn new(kind: FeatureKind, schedule: ScheduleConfig, init: WeightVector) -> Result<Self> {
        if init.input_dim() != schedule.d {
            return Err(crate::error::Error::DimensionMismatch {
                expected: schedule.d,
                got: init.input_dim(),
            });
        }
        let table = schedule.node_table(init.width());
        Ok(Self {
            kind,
            schedule,
            init,
            table,
        })
    }

    /// `W₀` with independent `N(0, μ_m)` coordinates in block `m`.
    pub fn random_init(kind: FeatureKind, schedule: ScheduleConfig, width: usize, seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(invalid("feature width must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = WeightVector::zeros(width, schedule.d);
        for i in 0..width {
            let sd = schedule.mu(i + 1).sqrt();
            for v in w.block_mut(i) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = sd * z;
            }
        }
        Self::new(kind, schedule, w)
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn schedule(&self) -> &ScheduleConfig {
        &self.schedule
    }

    pub fn init(&self) -> &WeightVector {
        &self.init
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FeatureKind::Tangent => self.init.as_slice().len(),
            FeatureKind::Random => self.init.width(),
        }
    }

    /// Writes the feature vector of `x` into `out` (length [`FeatureMap::dim`]).
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.schedule.d;
        let t = &self.table;
        for i in 0..self.init.width() {
            let block = self.init.block(i);
            let u = NodeTable::preactivation(block, x);
            let z = sigmoid(u * t.inv_b[i]);
            let act = t.b_s[i] * z;
            match self.kind {
                FeatureKind::Random => out[i] = t.a[i] * act,
                FeatureKind::Tangent => {
                    let w2 = block[d + 1];
                    let dact = t.b_s1[i] * z * (1.0 - z);
                    let c1 = t.a[i] * clip(w2, t.radius) * dact;
                    let o = &mut out[i * (d + 2)..(i + 1) * (d + 2)];
                    for (oj, xj) in o[..d].iter_mut().zip(x) {
                        *oj = c1 * xj;
                    }
                    o[d] = c1;
                    o[d + 1] = t.a[i] * clip_derivative(w2, t.radius) * act;
                }
            }
        }
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.features_into(x, &mut out);
        out
    }
}

/// Kernels available to kernel ridge regression.
#[derive(Clone, Debug)]
pub enum Kernel {
    /// `exp(−‖x − x′‖² / 2h²)`.
    Rbf { bandwidth: f64 },
    /// Inner product of [`FeatureMap`] features.
    Features(FeatureMap),
}

impl Kernel {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Kernel::Rbf { bandwidth })
    }

    pub fn eval(&self, x: &[f64], xp: &[f64]) -> f64 {
        match self {
            Kernel::Rbf { bandwidth } => rbf(x, xp, *bandwidth),
            Kernel::Features(map) => {
                let a = map.features(x);
                let b = map.features(xp);
                a.iter().zip(&b).map(|(u, v)| u * v).sum()
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Kernel::Rbf { .. } => "rbf",
            Kernel::Features(m) if m.kind == FeatureKind::Tangent => "ntk",
            Kernel::Features(_) => "rf",
        }
    }

    /// Header lines describing the kernel for serialization.
    pub(crate) fn to_header(&self) -> String {
        match self {
            Kernel::Rbf { bandwidth } => format!("kernel = rbf\nbandwidth = {}\n", fmt_real(*bandwidth)),
            Kernel::Features(map) => {
                let mut out = format!("kernel = {}\n", self.tag());
                out.push_str(&crate::model::schedule_header(&map.schedule, map.init.width()));
                out
            }
        }
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf(x: &[f64], xp: &[f64], bandwidth: f64) -> f64 {
    (-sq_dist(x, xp) / (2.0 * bandwidth * bandwidth)).exp()
}
