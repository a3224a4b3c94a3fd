//! Datasets from the observation model `y_i = f°(x_i) + ε_i`, with `x_i`
//! uniform on `[0, 1]^d` and mean-zero noise bounded by `U`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, parse_err, Error, Result};
use crate::format::{fmt_real, parse_reals};
use crate::model::{ScheduleConfig, TeacherSpec, WeightVector};

/// Noise law. Both non-trivial laws are mean-zero and supported on `[-U, U]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Uniform,
    /// `±U` with probability one half each.
    ScaledRademacher,
    None,
}

impl NoiseKind {
    pub fn sample<R: Rng + ?Sized>(self, bound: f64, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Uniform => rng.random_range(-bound..=bound),
            NoiseKind::ScaledRademacher => {
                if rng.random::<bool>() {
                    bound
                } else {
                    -bound
                }
            }
            NoiseKind::None => 0.0,
        }
    }

    /// Noise variance for bound `U`.
    pub fn variance(self, bound: f64) -> f64 {
        match self {
            NoiseKind::Uniform => bound * bound / 3.0,
            NoiseKind::ScaledRademacher => bound * bound,
            NoiseKind::None => 0.0,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::ScaledRademacher => "scaled-rademacher",
            NoiseKind::None => "none",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NoiseKind::Uniform),
            "scaled-rademacher" => Ok(NoiseKind::ScaledRademacher),
            "none" => Ok(NoiseKind::None),
            other => Err(invalid(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// `n` samples in `[0, 1]^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    pub noise_bound: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

impl Dataset {
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("input dimension must be at least 1"));
        }
        if x.len() != y.len() * d {
            return Err(Error::DimensionMismatch {
                expected: y.len() * d,
                got: x.len(),
            });
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("input coordinate {v} outside [0, 1]")));
        }
        Ok(Self {
            d,
            x,
            y,
            noise_bound: 0.0,
            noise_kind: NoiseKind::None,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.x.chunks_exact(self.d)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Same inputs, different responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                got: y.len(),
            });
        }
        Ok(Self { y, ..self.clone() })
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.d);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.point(i));
            y.push(self.y[i]);
        }
        Self {
            x,
            y,
            ..self.clone()
        }
    }

    /// CSV with header `x1,…,xd,y`; reals at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",y\n");
        for (p, y) in self.points().zip(&self.y) {
            for v in p {
                out.push_str(&fmt_real(*v));
                out.push(',');
            }
            out.push_str(&fmt_real(*y));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("dataset csv"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.last() != Some(&"y") {
            return Err(parse_err(1, "header must be x1,...,xd,y"));
        }
        let d = cols.len() - 1;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, line) in lines {
            let row = parse_reals(&line.replace(',', " "), i + 1)?;
            if row.len() != d + 1 {
                return Err(parse_err(i + 1, format!("expected {} columns, found {}", d + 1, row.len())));
            }
            x.extend_from_slice(&row[..d]);
            y.push(row[d]);
        }
        Dataset::new(d, x, y)
    }
}

/// Draws `n` samples from the teacher. Each sample consumes its `d` input
/// coordinates and then its noise draw from a ChaCha8 stream seeded by `seed`.
pub fn generate(teacher: &TeacherSpec, n: usize, noise_bound: f64, noise_kind: NoiseKind, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("dataset size must be at least 1"));
    }
    if noise_kind != NoiseKind::None && !(noise_bound > 0.0 && noise_bound.is_finite()) {
        return Err(invalid(format!("noise bound {noise_bound} must be positive")));
    }
    let d = teacher.config().d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut point = vec![0.0; d];
    for _ in 0..n {
        for v in point.iter_mut() {
            *v = rng.random::<f64>();
        }
        let eps = noise_kind.sample(noise_bound, &mut rng);
        x.extend_from_slice(&point);
        y.push(teacher.eval(&point) + eps);
    }
    Ok(Dataset {
        d,
        x,
        y,
        noise_bound: if noise_kind == NoiseKind::None { 0.0 } else { noise_bound },
        noise_kind,
        seed,
    })
}

/// `L̂(f_W) = (1/n) Σ (y_i − f_W(x_i))²`.
pub fn empirical_risk(config: &ScheduleConfig, weights: &WeightVector, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if data.dim() != config.d || weights.input_dim() != config.d {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            got: data.dim(),
        });
    }
    let table = config.node_table(weights.width());
    let sum: f64 = data
        .points()
        .zip(data.responses())
        .map(|(x, y)| {
            let r = y - table.forward(weights.as_slice(), x);
            r * r
        })
        .sum();
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_teacher;

    fn teacher() -> TeacherSpec {
        let cfg = ScheduleConfig::new(2, 1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        sample_teacher(&cfg, 3, 1.0, 5).unwrap()
    }

    #[test]
    fn noiseless_data_is_exact() {
        let t = teacher();
        let data = generate(&t, 50, 0.0, NoiseKind::None, 1).unwrap();
        for (x, y) in data.points().zip(data.responses()) {
            assert_eq!(*y, t.eval(x));
        }
        assert_eq!(empirical_risk(t.config(), t.weights(), &data).unwrap(), 0.0);
    }

    #[test]
    fn noise_is_bounded_and_inputs_in_cube() {
        let t = teacher();
        for kind in [NoiseKind::Uniform, NoiseKind::ScaledRademacher] {
            let data = generate(&t, 2000, 0.3, kind, 9).unwrap();
            for (x, y) in data.points().zip(data.responses()) {
                assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!((y - t.eval(x)).abs() <= 0.3 + 1e-15);
            }
        }
    }

    #[test]
    fn uniform_noise_mean_is_near_zero() {
        let cfg = ScheduleConfig::new(1, 1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let t = crate::model::TeacherSpec {
            network: crate::model::Network::new(cfg.clone(), WeightVector::zeros(1, 1)).unwrap(),
            hgamma_norm: 0.0,
            radius: 1.0,
            seed: 0,
            preset: crate::model::TeacherPreset::Gaussian,
        };
        let u = 0.1;
        let data = generate(&t, 1_000_000, u, NoiseKind::Uniform, 2024).unwrap();
        let mean = data.responses().iter().sum::<f64>() / data.len() as f64;
        // CLT: four standard errors with Var = U²/3.
        assert!(mean.abs() <= 4.0 * (u / 3f64.sqrt()) / 1e3, "{mean}");
    }

    #[test]
    fn generation_is_deterministic() {
        let t = teacher();
        let a = generate(&t, 100, 0.5, NoiseKind::Uniform, 77).unwrap();
        let b = generate(&t, 100, 0.5, NoiseKind::Uniform, 77).unwrap();
        assert_eq!(a, b);
        let c = generate(&t, 100, 0.5, NoiseKind::Uniform, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_risk_cases() {
        let cfg = ScheduleConfig::new(1, 1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let zero = WeightVector::zeros(2, 1);
        let data = Dataset::new(1, vec![0.2, 0.7, 0.9], vec![1.5, 1.5, 1.5]).unwrap();
        assert!((empirical_risk(&cfg, &zero, &data).unwrap() - 2.25).abs() < 1e-15);

        // Two points, one node: residuals computed by hand.
        let w = WeightVector::from_blocks(1, &[(vec![2.0, -1.0], 0.8)]).unwrap();
        let data = Dataset::new(1, vec![0.0, 1.0], vec![0.1, -0.2]).unwrap();
        let f0 = (0.8f64).tanh() * crate::model::sigmoid(-1.0);
        let f1 = (0.8f64).tanh() * crate::model::sigmoid(1.0);
        let expected = ((0.1 - f0).powi(2) + (-0.2 - f1).powi(2)) / 2.0;
        assert!((empirical_risk(&cfg, &w, &data).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn empirical_risk_respects_the_residual_bound() {
        let t = teacher();
        let cfg = t.config().clone();
        let data = generate(&t, 200, 0.4, NoiseKind::Uniform, 3).unwrap();
        let w = WeightVector::from_values(3, 2, (0..12).map(|i| (i as f64 - 6.0) * 3.0).collect()).unwrap();
        let bound = (2.0 * cfg.radius * cfg.a_sum(3) + 0.4).powi(2);
        assert!(empirical_risk(&cfg, &w, &data).unwrap() <= bound);
    }

    #[test]
    fn csv_round_trip() {
        let data = generate(&teacher(), 20, 0.2, NoiseKind::Uniform, 4).unwrap();
        let text = data.to_csv();
        assert!(text.starts_with("x1,x2,y\n"));
        let back = Dataset::from_csv(&text).unwrap();
        assert_eq!(back.inputs(), data.inputs());
        assert_eq!(back.responses(), data.responses());
    }
}
