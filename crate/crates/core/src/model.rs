//! Clipped two-layer network with index-tied schedules.
//!
//! Node `m` (counted from 1) carries a first-layer vector `w1` of length
//! `d + 1` acting on `[x; 1]` and a scalar second-layer weight `w2`. The
//! network output is
//!
//! ```text
//! f_W(x) = Σ_m a_m · R·tanh(w2_m / R) · σ_m(w1_mᵀ [x; 1])
//! ```
//!
//! with `μ_m = c_μ m⁻²`, `a_m = μ_m^α₁`, `b_m = μ_m^α₂` and the scaled sigmoid
//! `σ_m(u) = b_m^s σ(u / b_m)`. Weight vectors of width `M` stand for the
//! zero-padded infinite sequence, so every norm ignores nodes beyond `M`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, parse_err, Error, Result};
use crate::format::{fmt_real, Header};
use crate::Predictor;

/// Logistic sigmoid, evaluated through `exp` of a non-positive argument only.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `σ, σ', σ'', σ'''` at `u`.
#[inline]
pub fn sigmoid_derivatives(u: f64) -> [f64; 4] {
    let z = sigmoid(u);
    let d1 = z * (1.0 - z);
    let d2 = d1 * (1.0 - 2.0 * z);
    let d3 = d1 * (1.0 - 6.0 * z + 6.0 * z * z);
    [z, d1, d2, d3]
}

/// Second-layer clipping `R·tanh(w/R)`.
#[inline]
pub fn clip(w: f64, radius: f64) -> f64 {
    radius * (w / radius).tanh()
}

/// Derivative of [`clip`] with respect to `w`, i.e. `tanh'(w/R)`.
#[inline]
pub fn clip_derivative(w: f64, radius: f64) -> f64 {
    let t = (w / radius).tanh();
    1.0 - t * t
}

/// Schedules and activation family of the model.
///
/// Fields are public so that configurations can be assembled from text and
/// then checked with [`ScheduleConfig::check_assumptions`]; [`ScheduleConfig::new`]
/// rejects any configuration that fails the checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub d: usize,
    /// Clipping radius `R`.
    pub radius: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub s: f64,
    pub c_mu: f64,
}

impl ScheduleConfig {
    pub fn new(d: usize, radius: f64, gamma: f64, alpha1: f64, alpha2: f64, s: f64) -> Result<Self> {
        Self {
            d,
            radius,
            gamma,
            alpha1,
            alpha2,
            s,
            c_mu: 1.0,
        }
        .validated()
    }

    pub fn with_c_mu(mut self, c_mu: f64) -> Result<Self> {
        self.c_mu = c_mu;
        self.validated()
    }

    /// Returns `self` if every assumption holds, otherwise the violated clauses.
    pub fn validated(self) -> Result<Self> {
        let report = self.check_assumptions();
        if report.passed() {
            Ok(self)
        } else {
            Err(Error::Assumption(report.failures.join("; ")))
        }
    }

    /// `μ_m = c_μ m⁻²` for node index `m ≥ 1`.
    #[inline]
    pub fn mu(&self, m: usize) -> f64 {
        debug_assert!(m >= 1);
        let m = m as f64;
        self.c_mu / (m * m)
    }

    /// `a_m = μ_m^α₁`.
    #[inline]
    pub fn a(&self, m: usize) -> f64 {
        self.mu(m).powf(self.alpha1)
    }

    /// `b_m = μ_m^α₂`.
    #[inline]
    pub fn b(&self, m: usize) -> f64 {
        self.mu(m).powf(self.alpha2)
    }

    /// `σ_m(u) = b_m^s σ(u / b_m)`.
    pub fn activation(&self, m: usize, u: f64) -> f64 {
        let b = self.b(m);
        b.powf(self.s) * sigmoid(u / b)
    }

    /// `σ_m'(u) = b_m^{s-1} σ'(u / b_m)`.
    pub fn activation_derivative(&self, m: usize, u: f64) -> f64 {
        let b = self.b(m);
        let z = sigmoid(u / b);
        b.powf(self.s - 1.0) * z * (1.0 - z)
    }

    /// `σ_m^{(k)}(u)` for `k = 0..=3`.
    pub fn activation_derivatives(&self, m: usize, u: f64) -> [f64; 4] {
        let b = self.b(m);
        let raw = sigmoid_derivatives(u / b);
        let mut out = [0.0; 4];
        for (k, (o, r)) in out.iter_mut().zip(raw).enumerate() {
            *o = b.powf(self.s - k as f64) * r;
        }
        out
    }

    /// Sum `Σ_{m ≤ width} a_m`, which bounds `|f_W| / R`.
    pub fn a_sum(&self, width: usize) -> f64 {
        (1..=width).map(|m| self.a(m)).sum()
    }

    /// Bound on the contribution of nodes beyond `width`: `R Σ_{m > width} a_m`.
    pub fn tail_bound(&self, width: usize) -> f64 {
        const TERMS: usize = 100_000;
        let p = 2.0 * self.alpha1;
        let partial: f64 = (width + 1..=width + TERMS).map(|m| self.a(m)).sum();
        // Integral estimate of the remainder of Σ m^{-p}.
        let start = (width + TERMS) as f64 + 0.5;
        let rest = self.c_mu.powf(self.alpha1) * start.powf(1.0 - p) / (p - 1.0);
        self.radius * (partial + rest)
    }

    pub(crate) fn node_table(&self, width: usize) -> NodeTable {
        let mut table = NodeTable {
            a: Vec::with_capacity(width),
            inv_b: Vec::with_capacity(width),
            b_s: Vec::with_capacity(width),
            b_s1: Vec::with_capacity(width),
            radius: self.radius,
            block_len: self.d + 2,
        };
        for m in 1..=width {
            let b = self.b(m);
            table.a.push(self.a(m));
            table.inv_b.push(1.0 / b);
            table.b_s.push(b.powf(self.s));
            table.b_s1.push(b.powf(self.s - 1.0));
        }
        table
    }

    /// Checks the schedule and activation conditions and samples the
    /// activation derivatives to report an empirical `C_σ`.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let mut failures = Vec::new();
        let finite = [self.radius, self.gamma, self.alpha1, self.alpha2, self.s, self.c_mu]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            failures.push("finite parameters".to_string());
            return AssumptionReport {
                failures,
                c_sigma: f64::NAN,
                sup_activation: f64::NAN,
            };
        }
        let mut push = |ok: bool, clause: &str| {
            if !ok {
                failures.push(clause.to_string());
            }
        };
        push(self.d >= 1, "d ≥ 1");
        push(self.radius >= 1.0, "R ≥ 1");
        push(self.gamma > 0.0, "γ > 0");
        push(self.c_mu > 0.0, "c_μ > 0");
        push(self.alpha1 > 0.5, "α₁ > 1/2");
        push(self.alpha2 > self.gamma / 2.0, "α₂ > γ/2");
        push(self.s >= 3.0, "s ≥ 3");

        let mut c_sigma: f64 = 0.0;
        let mut sup_activation: f64 = 0.0;
        if self.c_mu > 0.0 {
            const NODES: usize = 16;
            const GRID: usize = 2001;
            let mut b_ok = true;
            for m in 1..=NODES {
                let b = self.b(m);
                if b > 1.0 {
                    b_ok = false;
                }
                // ‖σ_m‖_∞ is the saturation level b_m^s.
                sup_activation = sup_activation.max(b.powf(self.s));
                for j in 0..GRID {
                    let u = b * (-12.0 + 24.0 * j as f64 / (GRID - 1) as f64);
                    let derivs = self.activation_derivatives(m, u);
                    for v in &derivs[1..] {
                        c_sigma = c_sigma.max(v.abs());
                    }
                }
            }
            push(b_ok, "b_m ≤ 1");
            push(sup_activation <= 1.0, "‖σ_m‖_∞ ≤ 1");
        }
        AssumptionReport {
            failures,
            c_sigma,
            sup_activation,
        }
    }
}

/// Outcome of [`ScheduleConfig::check_assumptions`].
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    /// Violated clauses, in checking order.
    pub failures: Vec<String>,
    /// Largest sampled `|σ_m^{(k)}|`, `k = 1, 2, 3`.
    pub c_sigma: f64,
    /// Largest `‖σ_m‖_∞` over the sampled nodes.
    pub sup_activation: f64,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Per-node constants cached for the hot loops.
#[derive(Clone, Debug)]
pub(crate) struct NodeTable {
    pub a: Vec<f64>,
    pub inv_b: Vec<f64>,
    pub b_s: Vec<f64>,
    pub b_s1: Vec<f64>,
    pub radius: f64,
    pub block_len: usize,
}

impl NodeTable {
    /// Pre-activation `w1ᵀ[x; 1]` of the block starting at `block`.
    #[inline]
    pub fn preactivation(block: &[f64], x: &[f64]) -> f64 {
        let d = x.len();
        let mut u = block[d];
        for (w, xi) in block[..d].iter().zip(x) {
            u += w * xi;
        }
        u
    }

    /// Network output for a weight slice of any width up to the table's.
    #[inline]
    pub fn forward(&self, weights: &[f64], x: &[f64]) -> f64 {
        let mut out = 0.0;
        for (i, block) in weights.chunks_exact(self.block_len).enumerate() {
            let w2 = block[self.block_len - 1];
            if w2 == 0.0 {
                continue;
            }
            let u = Self::preactivation(block, x);
            out += self.a[i] * clip(w2, self.radius) * self.b_s[i] * sigmoid(u * self.inv_b[i]);
        }
        out
    }
}

/// Width-`M` truncation of the parameter sequence, stored block after block
/// as `(w1 ∈ ℝ^{d+1}, w2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    input_dim: usize,
    width: usize,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(width: usize, input_dim: usize) -> Self {
        Self {
            input_dim,
            width,
            values: vec![0.0; width * (input_dim + 2)],
        }
    }

    pub fn from_values(width: usize, input_dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = width * (input_dim + 2);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            input_dim,
            width,
            values,
        })
    }

    /// Builds a vector from `(w1, w2)` pairs; every `w1` must have length `d + 1`.
    pub fn from_blocks(input_dim: usize, blocks: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut values = Vec::with_capacity(blocks.len() * (input_dim + 2));
        for (w1, w2) in blocks {
            if w1.len() != input_dim + 1 {
                return Err(Error::DimensionMismatch {
                    expected: input_dim + 1,
                    got: w1.len(),
                });
            }
            values.extend_from_slice(w1);
            values.push(*w2);
        }
        Self::from_values(blocks.len(), input_dim, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// `d + 2`, the number of reals per node.
    pub fn block_len(&self) -> usize {
        self.input_dim + 2
    }

    /// Block of node `i + 1` (zero-based storage index `i`).
    pub fn block(&self, i: usize) -> &[f64] {
        let len = self.block_len();
        &self.values[i * len..(i + 1) * len]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.block_len();
        &mut self.values[i * len..(i + 1) * len]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.block_len())
    }

    pub fn first_layer(&self, i: usize) -> &[f64] {
        &self.block(i)[..self.input_dim + 1]
    }

    pub fn second_layer(&self, i: usize) -> f64 {
        self.block(i)[self.input_dim + 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The same vector viewed at a larger width, padded with zero blocks.
    pub fn zero_padded(&self, width: usize) -> Self {
        assert!(width >= self.width, "zero padding cannot shrink a weight vector");
        let mut values = self.values.clone();
        values.resize(width * self.block_len(), 0.0);
        Self {
            input_dim: self.input_dim,
            width,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &WeightVector) {
        assert_eq!(self.values.len(), other.values.len());
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }

    /// Squared Euclidean norm of each block.
    pub fn block_sq_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().map(|b| b.iter().map(|v| v * v).sum())
    }

    /// `‖W‖_H`.
    pub fn h_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `‖W‖_H = [Σ_m (‖w1_m‖² + w2_m²)]^{1/2}`.
pub fn h_norm(weights: &WeightVector) -> f64 {
    weights.h_norm()
}

/// `‖W‖_{H_g} = [Σ_m μ_m^{-g} (‖w1_m‖² + w2_m²)]^{1/2}`.
pub fn hgamma_norm(config: &ScheduleConfig, weights: &WeightVector, g: f64) -> f64 {
    weights
        .block_sq_norms()
        .enumerate()
        .map(|(i, sq)| config.mu(i + 1).powf(-g) * sq)
        .sum::<f64>()
        .sqrt()
}

fn check_dims(config: &ScheduleConfig, weights: &WeightVector, x: &[f64]) -> Result<()> {
    if weights.input_dim() != config.d {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            got: weights.input_dim(),
        });
    }
    if x.len() != config.d {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            got: x.len(),
        });
    }
    Ok(())
}

/// Evaluates `f_W(x)`.
pub fn eval_network(config: &ScheduleConfig, weights: &WeightVector, x: &[f64]) -> Result<f64> {
    check_dims(config, weights, x)?;
    let table = config.node_table(weights.width());
    Ok(table.forward(weights.as_slice(), x))
}

/// A network with its schedule table cached, for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Network {
    config: ScheduleConfig,
    weights: WeightVector,
    table: NodeTable,
}

impl Network {
    pub fn new(config: ScheduleConfig, weights: WeightVector) -> Result<Self> {
        if weights.input_dim() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                got: weights.input_dim(),
            });
        }
        let table = config.node_table(weights.width());
        Ok(Self {
            config,
            weights,
            table,
        })
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.config.d);
        self.table.forward(self.weights.as_slice(), x)
    }
}

impl Predictor for Network {
    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// How a teacher was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TeacherPreset {
    /// Isotropic Gaussian direction in the `H_γ` geometry, rescaled to a radius.
    Gaussian,
    /// A single active node forming a ridge across `x₁ = 1/2`.
    SingleBump { node: usize },
}

/// True regression function `f° = f_W` with `‖W‖_{H_γ} ≤ 1`.
#[derive(Clone, Debug)]
pub struct TeacherSpec {
    pub network: Network,
    pub hgamma_norm: f64,
    pub radius: f64,
    pub seed: u64,
    pub preset: TeacherPreset,
}

impl TeacherSpec {
    pub fn config(&self) -> &ScheduleConfig {
        self.network.config()
    }

    pub fn weights(&self) -> &WeightVector {
        self.network.weights()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.network.eval(x)
    }

    /// Serializes to the header-plus-blocks text format.
    pub fn to_text(&self) -> String {
        let cfg = self.config();
        let w = self.weights();
        let mut out = String::from("# ngdrate teacher\n");
        out.push_str(&schedule_header(cfg, w.width()));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("radius = {}\n", self.radius));
        push_blocks(&mut out, w);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = Header::parse(text)?;
        let (config, width) = schedule_from_header(&header)?;
        let seed = header.get_parsed::<u64>("seed")?;
        let radius = header.get_parsed::<f64>("radius")?;
        let weights = blocks_from_lines(&header, config.d, width)?;
        let hgamma = hgamma_norm(&config, &weights, config.gamma);
        if hgamma > 1.0 + 1e-12 {
            return Err(invalid(format!("teacher H_γ norm {hgamma} exceeds 1")));
        }
        Ok(Self {
            network: Network::new(config, weights)?,
            hgamma_norm: hgamma,
            radius,
            seed,
            preset: TeacherPreset::Gaussian,
        })
    }
}

impl Predictor for TeacherSpec {
    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

pub(crate) fn schedule_header(cfg: &ScheduleConfig, width: usize) -> String {
    format!(
        "d = {}\nM = {}\nR = {}\ngamma = {}\nalpha1 = {}\nalpha2 = {}\ns = {}\nc_mu = {}\n",
        cfg.d, width, cfg.radius, cfg.gamma, cfg.alpha1, cfg.alpha2, cfg.s, cfg.c_mu
    )
}

pub(crate) fn schedule_from_header(header: &Header) -> Result<(ScheduleConfig, usize)> {
    let config = ScheduleConfig {
        d: header.get_parsed("d")?,
        radius: header.get_parsed("R")?,
        gamma: header.get_parsed("gamma")?,
        alpha1: header.get_parsed("alpha1")?,
        alpha2: header.get_parsed("alpha2")?,
        s: header.get_parsed("s")?,
        c_mu: header.get_parsed("c_mu")?,
    }
    .validated()?;
    let width = header.get_parsed::<usize>("M")?;
    Ok((config, width))
}

pub(crate) fn push_blocks(out: &mut String, w: &WeightVector) {
    for block in w.blocks() {
        let line: Vec<String> = block.iter().map(|v| fmt_real(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

/// Reads `width` block lines from the body of `header`, starting at the first.
pub(crate) fn blocks_from_lines(header: &Header, d: usize, width: usize) -> Result<WeightVector> {
    let body = header.body();
    if body.len() < width {
        return Err(parse_err(
            header.last_line(),
            format!("expected {width} block lines, found {}", body.len()),
        ));
    }
    blocks_from_body(&body[..width], d)
}

pub(crate) fn blocks_from_body(lines: &[(usize, String)], d: usize) -> Result<WeightVector> {
    let mut values = Vec::with_capacity(lines.len() * (d + 2));
    for (line_no, line) in lines {
        let row = crate::format::parse_reals(line, *line_no)?;
        if row.len() != d + 2 {
            return Err(parse_err(*line_no, format!("expected {} reals, found {}", d + 2, row.len())));
        }
        values.extend(row);
    }
    WeightVector::from_values(lines.len(), d, values)
}

/// Draws a teacher: one standard normal per coordinate, block `m` scaled by
/// `μ_m^{γ/2}`, then a global rescale so that `‖W‖_{H_γ}` equals `radius`.
pub fn sample_teacher(config: &ScheduleConfig, width: usize, radius: f64, seed: u64) -> Result<TeacherSpec> {
    if width == 0 {
        return Err(invalid("teacher width must be at least 1"));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(invalid(format!("teacher radius {radius} must lie in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = WeightVector::zeros(width, config.d);
    for i in 0..width {
        let scale = config.mu(i + 1).powf(config.gamma / 2.0);
        for v in weights.block_mut(i) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = scale * z;
        }
    }
    let norm = hgamma_norm(config, &weights, config.gamma);
    let weights = weights.scaled(radius / norm);
    let hgamma = hgamma_norm(config, &weights, config.gamma);
    Ok(TeacherSpec {
        network: Network::new(config.clone(), weights)?,
        hgamma_norm: hgamma,
        radius,
        seed,
        preset: TeacherPreset::Gaussian,
    })
}

/// Deterministic teacher with one active node `m`: `w1 ∝ (e₁, −1/2)`,
/// `w2 ∝ 1`, scaled to `‖W‖_{H_γ} = radius`.
pub fn single_bump_teacher(config: &ScheduleConfig, width: usize, node: usize, radius: f64) -> Result<TeacherSpec> {
    if node == 0 || node > width {
        return Err(invalid(format!("active node {node} outside 1..={width}")));
    }
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(invalid(format!("teacher radius {radius} must lie in (0, 1]")));
    }
    let d = config.d;
    let mut weights = WeightVector::zeros(width, d);
    {
        let block = weights.block_mut(node - 1);
        block[0] = 1.0;
        block[d] = -0.5;
        block[d + 1] = 1.0;
    }
    let norm = hgamma_norm(config, &weights, config.gamma);
    let weights = weights.scaled(radius / norm);
    let hgamma = hgamma_norm(config, &weights, config.gamma);
    Ok(TeacherSpec {
        network: Network::new(config.clone(), weights)?,
        hgamma_norm: hgamma,
        radius,
        seed: 0,
        preset: TeacherPreset::SingleBump { node },
    })
}
