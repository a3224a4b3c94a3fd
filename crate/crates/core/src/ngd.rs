//! Noisy gradient descent on the width-`M` truncation.
//!
//! One step of the semi-implicit Euler scheme is
//!
//! ```text
//! W_{k+1} = S_η (W_k − η ∇L̂(f_{W_k}) + √(2η/β) ξ_k),   S_η = (I + ηA)⁻¹,
//! ```
//!
//! where `A` multiplies block `m` by `λ/μ_m`. Both `A` and `S_η` are diagonal
//! per block, so the implicit part costs nothing. With `L̂ ≡ 0` the chain is a
//! linear autoregression whose stationary law is known in closed form, which
//! the tests use as a sampling oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::format::fmt_real;
use crate::model::{clip, clip_derivative, hgamma_norm, schedule_header, sigmoid, NodeTable, ScheduleConfig, WeightVector};
use crate::Predictor;

/// `‖W‖_H` above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// How the chain is started.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Zero,
    /// A draw from the Gaussian prior with covariance `(βA)⁻¹`.
    Prior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgdConfig {
    pub eta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub k_max: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Student width `M`.
    pub width: usize,
    pub seed: u64,
    pub init: Init,
}

impl NgdConfig {
    /// Manual configuration with the default burn-in (half the budget) and
    /// thinning (about 2000 kept iterates).
    pub fn new(eta: f64, beta: f64, lambda: f64, width: usize, k_max: usize, seed: u64) -> Self {
        Self {
            eta,
            beta,
            lambda,
            k_max,
            burn_in: k_max / 2,
            thinning: (k_max / 2000).max(1),
            width,
            seed,
            init: Init::Zero,
        }
    }

    /// Prescribed hyperparameters for sample size `n`: `β = min{n/(2U²), n}`,
    /// `λ = 1/β`, `M = ⌈n^{1/(2(α₁+1))}⌉`, and a budget with `η k_max ≥ horizon / λ`.
    pub fn auto(schedule: &ScheduleConfig, n: usize, noise_bound: f64, eta: f64, horizon: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sample size must be positive"));
        }
        if !(eta > 0.0) || !(horizon > 0.0) {
            return Err(invalid("step size and horizon must be positive"));
        }
        let nf = n as f64;
        let beta = if noise_bound > 0.0 {
            (nf / (2.0 * noise_bound * noise_bound)).min(nf)
        } else {
            nf
        };
        let lambda = 1.0 / beta;
        let width = auto_width(schedule.alpha1, n);
        let k_max = (horizon / (lambda * eta)).ceil() as usize;
        let cfg = Self::new(eta, beta, lambda, width, k_max, seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the budget, resetting burn-in and thinning to their defaults.
    pub fn with_budget(self, k_max: usize) -> Self {
        Self {
            k_max,
            burn_in: k_max / 2,
            thinning: (k_max / 2000).max(1),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("step size η = {} must be non-negative", self.eta)));
        }
        if !(self.beta > self.eta) {
            return Err(invalid(format!("need β > η (β = {}, η = {})", self.beta, self.eta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("ridge weight λ = {} must be positive", self.lambda)));
        }
        if self.width == 0 {
            return Err(invalid("student width must be at least 1"));
        }
        if self.k_max <= self.burn_in {
            return Err(invalid(format!("k_max = {} must exceed burn_in = {}", self.k_max, self.burn_in)));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning must be at least 1"));
        }
        Ok(())
    }

    /// Number of iterates kept after burn-in and thinning.
    pub fn kept(&self) -> usize {
        (self.k_max - self.burn_in).div_ceil(self.thinning)
    }
}

/// `⌈n^{1/(2(α₁+1))}⌉`, at least 1.
pub fn auto_width(alpha1: f64, n: usize) -> usize {
    let w = (n as f64).powf(1.0 / (2.0 * (alpha1 + 1.0)));
    // Guard against w landing a hair above an integer through rounding.
    let rounded = w.round();
    let w = if (w - rounded).abs() < 1e-12 { rounded } else { w.ceil() };
    (w as usize).max(1)
}

/// Objective driving the chain.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    Data(&'a Dataset),
    /// `L̂ ≡ 0`: the chain reduces to the preconditioned Gaussian recursion.
    Null,
}

/// `AW`: block `m` multiplied by `λ/μ_m`.
pub fn apply_a(schedule: &ScheduleConfig, lambda: f64, weights: &WeightVector) -> WeightVector {
    scale_blocks(weights, |m| lambda / schedule.mu(m))
}

/// `S_η W = (I + ηA)⁻¹ W`: block `m` multiplied by `1/(1 + ηλ/μ_m)`.
pub fn preconditioner(schedule: &ScheduleConfig, eta: f64, lambda: f64, weights: &WeightVector) -> WeightVector {
    scale_blocks(weights, |m| shrink_factor(schedule, eta, lambda, m))
}

/// Per-block contraction `s_m = 1/(1 + ηλ/μ_m)`.
pub fn shrink_factor(schedule: &ScheduleConfig, eta: f64, lambda: f64, m: usize) -> f64 {
    1.0 / (1.0 + eta * lambda / schedule.mu(m))
}

fn scale_blocks(weights: &WeightVector, factor: impl Fn(usize) -> f64) -> WeightVector {
    let mut out = weights.clone();
    for i in 0..out.width() {
        let f = factor(i + 1);
        out.block_mut(i).iter_mut().for_each(|v| *v *= f);
    }
    out
}

/// Stationary per-coordinate variance of block `m` under `L̂ ≡ 0`:
/// `v_m = (2η/β) s_m² / (1 − s_m²)`.
pub fn stationary_variance(schedule: &ScheduleConfig, ngd: &NgdConfig, m: usize) -> f64 {
    let s = shrink_factor(schedule, ngd.eta, ngd.lambda, m);
    2.0 * ngd.eta / ngd.beta * s * s / (1.0 - s * s)
}

/// Prior variance `μ_m/(βλ)`, the `η → 0` limit of [`stationary_variance`].
pub fn prior_variance(schedule: &ScheduleConfig, ngd: &NgdConfig, m: usize) -> f64 {
    schedule.mu(m) / (ngd.beta * ngd.lambda)
}

/// Draws `W` from the Gaussian prior `N(0, (βA)⁻¹)` truncated to the width.
pub fn sample_prior<R: rand::Rng + ?Sized>(schedule: &ScheduleConfig, ngd: &NgdConfig, rng: &mut R) -> WeightVector {
    let mut w = WeightVector::zeros(ngd.width, schedule.d);
    for i in 0..ngd.width {
        let sd = prior_variance(schedule, ngd, i + 1).sqrt();
        for v in w.block_mut(i) {
            let z: f64 = StandardNormal.sample(rng);
            *v = sd * z;
        }
    }
    w
}

/// `2R Σ_{m ≤ width} a_m + U`, a bound on every residual `|f_W(x_i) − y_i|`
/// when the teacher has at most `width` nodes.
pub fn residual_bound(schedule: &ScheduleConfig, width: usize, noise_bound: f64) -> f64 {
    2.0 * schedule.radius * schedule.a_sum(width) + noise_bound
}

/// `√(4 R̄ (R² C_σ² (d+1) + 1) Σ a_m²)` with `R̄ = residual_bound²`.
pub fn gradient_norm_bound(schedule: &ScheduleConfig, width: usize, residual_bound: f64, c_sigma: f64) -> f64 {
    let rbar = residual_bound * residual_bound;
    let r = schedule.radius;
    let a_sq: f64 = (1..=width).map(|m| schedule.a(m).powi(2)).sum();
    (4.0 * rbar * (r * r * c_sigma * c_sigma * (schedule.d as f64 + 1.0) + 1.0) * a_sq).sqrt()
}

/// Scratch buffers for the gradient pass.
#[derive(Debug, Default)]
struct Scratch {
    clip: Vec<f64>,
    clip_deriv: Vec<f64>,
    act: Vec<f64>,
    dact: Vec<f64>,
}

/// Writes `∇L̂(f_W)` into `grad` and returns `L̂(f_W)`.
fn risk_and_gradient(table: &NodeTable, weights: &WeightVector, data: &Dataset, grad: &mut [f64], scratch: &mut Scratch) -> f64 {
    let width = weights.width();
    let d = data.dim();
    let len = d + 2;
    grad.iter_mut().for_each(|g| *g = 0.0);
    scratch.clip.clear();
    scratch.clip_deriv.clear();
    for i in 0..width {
        let w2 = weights.second_layer(i);
        scratch.clip.push(clip(w2, table.radius));
        scratch.clip_deriv.push(clip_derivative(w2, table.radius));
    }
    scratch.act.resize(width, 0.0);
    scratch.dact.resize(width, 0.0);

    let w = weights.as_slice();
    let mut loss = 0.0;
    for (x, &y) in data.points().zip(data.responses()) {
        let mut f = 0.0;
        for i in 0..width {
            let block = &w[i * len..(i + 1) * len];
            let u = NodeTable::preactivation(block, x);
            let z = sigmoid(u * table.inv_b[i]);
            scratch.act[i] = table.b_s[i] * z;
            scratch.dact[i] = table.b_s1[i] * z * (1.0 - z);
            f += table.a[i] * scratch.clip[i] * scratch.act[i];
        }
        let r = f - y;
        loss += r * r;
        for i in 0..width {
            let g = &mut grad[i * len..(i + 1) * len];
            let c1 = r * scratch.clip[i] * table.a[i] * scratch.dact[i];
            for (gj, xj) in g[..d].iter_mut().zip(x) {
                *gj += c1 * xj;
            }
            g[d] += c1;
            g[d + 1] += r * table.a[i] * scratch.clip_deriv[i] * scratch.act[i];
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g *= 2.0 / n);
    loss / n
}

fn check_data(schedule: &ScheduleConfig, weights: &WeightVector, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    for got in [data.dim(), weights.input_dim()] {
        if got != schedule.d {
            return Err(Error::DimensionMismatch {
                expected: schedule.d,
                got,
            });
        }
    }
    Ok(())
}

/// Analytic `∇L̂(f_W)`:
///
/// ```text
/// g1_m = (2/n) Σ_i r_i · clip(w2_m) · a_m · σ_m'(w1_mᵀ[x_i;1]) · [x_i;1]
/// g2_m = (2/n) Σ_i r_i · a_m · tanh'(w2_m/R) · σ_m(w1_mᵀ[x_i;1])
/// ```
///
/// with `r_i = f_W(x_i) − y_i`.
pub fn gradient(schedule: &ScheduleConfig, weights: &WeightVector, data: &Dataset) -> Result<WeightVector> {
    check_data(schedule, weights, data)?;
    let table = schedule.node_table(weights.width());
    let mut grad = WeightVector::zeros(weights.width(), schedule.d);
    risk_and_gradient(&table, weights, data, grad.as_mut_slice(), &mut Scratch::default());
    Ok(grad)
}

/// Position of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub k: usize,
    pub weights: WeightVector,
    /// Iterates kept so far.
    pub kept: usize,
    /// Running mean of `L̂` over kept iterates.
    pub mean_risk: f64,
}

impl ChainState {
    pub fn new(weights: WeightVector) -> Self {
        Self {
            k: 0,
            weights,
            kept: 0,
            mean_risk: 0.0,
        }
    }
}

/// Stateful stepping engine; [`step`] and [`run_chain`] are built on it.
struct Stepper<'a> {
    objective: Objective<'a>,
    table: NodeTable,
    shrink: Vec<f64>,
    eta: f64,
    noise_scale: f64,
    grad: Vec<f64>,
    scratch: Scratch,
}

impl<'a> Stepper<'a> {
    fn new(schedule: &ScheduleConfig, ngd: &NgdConfig, width: usize, objective: Objective<'a>) -> Self {
        Self {
            objective,
            table: schedule.node_table(width),
            shrink: (1..=width).map(|m| shrink_factor(schedule, ngd.eta, ngd.lambda, m)).collect(),
            eta: ngd.eta,
            noise_scale: (2.0 * ngd.eta / ngd.beta).sqrt(),
            grad: vec![0.0; width * (schedule.d + 2)],
            scratch: Scratch::default(),
        }
    }

    /// Refreshes the gradient at `w` and returns `L̂(f_W)`.
    fn evaluate(&mut self, w: &WeightVector) -> f64 {
        match self.objective {
            Objective::Data(data) => risk_and_gradient(&self.table, w, data, &mut self.grad, &mut self.scratch),
            Objective::Null => {
                self.grad.iter_mut().for_each(|g| *g = 0.0);
                0.0
            }
        }
    }

    /// Applies the update using the gradient from the last [`Stepper::evaluate`].
    fn advance(&self, w: &mut WeightVector, noise: &[f64]) {
        let len = self.table.block_len;
        let eta = self.eta;
        let sc = self.noise_scale;
        for (i, ((block, g), xi)) in w
            .as_mut_slice()
            .chunks_exact_mut(len)
            .zip(self.grad.chunks_exact(len))
            .zip(noise.chunks_exact(len))
            .enumerate()
        {
            let s = self.shrink[i];
            for ((v, gj), nj) in block.iter_mut().zip(g).zip(xi) {
                *v = s * (*v - eta * gj + sc * nj);
            }
        }
    }
}

fn check_noise(weights: &WeightVector, noise: &[f64]) -> Result<()> {
    if noise.len() != weights.as_slice().len() {
        return Err(Error::DimensionMismatch {
            expected: weights.as_slice().len(),
            got: noise.len(),
        });
    }
    Ok(())
}

fn check_finite(w: &WeightVector, k: usize) -> Result<()> {
    let norm = w.h_norm();
    if !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(Error::ChainDiverged { k, norm });
    }
    Ok(())
}

/// One semi-implicit step with caller-supplied standard normal draws
/// (`M·(d+2)` of them, laid out like the weights).
pub fn step(schedule: &ScheduleConfig, ngd: &NgdConfig, objective: Objective<'_>, state: &ChainState, noise: &[f64]) -> Result<ChainState> {
    if !(ngd.beta > ngd.eta) {
        return Err(invalid(format!("need β > η (β = {}, η = {})", ngd.beta, ngd.eta)));
    }
    check_noise(&state.weights, noise)?;
    if let Objective::Data(data) = objective {
        check_data(schedule, &state.weights, data)?;
    }
    let mut stepper = Stepper::new(schedule, ngd, state.weights.width(), objective);
    let mut w = state.weights.clone();
    stepper.evaluate(&w);
    stepper.advance(&mut w, noise);
    check_finite(&w, state.k + 1)?;
    Ok(ChainState {
        k: state.k + 1,
        weights: w,
        ..state.clone()
    })
}

/// The same update written as an explicit preconditioned gradient step:
/// `W − η S_η(∇L̂ + AW) + S_η √(2η/β) ξ`.
pub fn explicit_step(schedule: &ScheduleConfig, ngd: &NgdConfig, objective: Objective<'_>, state: &ChainState, noise: &[f64]) -> Result<ChainState> {
    check_noise(&state.weights, noise)?;
    let w = &state.weights;
    let grad = match objective {
        Objective::Data(data) => gradient(schedule, w, data)?,
        Objective::Null => WeightVector::zeros(w.width(), schedule.d),
    };
    let mut drift = grad;
    drift.axpy(1.0, &apply_a(schedule, ngd.lambda, w));
    let drift = preconditioner(schedule, ngd.eta, ngd.lambda, &drift);
    let noise = WeightVector::from_values(w.width(), schedule.d, noise.to_vec())?;
    let noise = preconditioner(schedule, ngd.eta, ngd.lambda, &noise);
    let mut next = w.clone();
    next.axpy(-ngd.eta, &drift);
    next.axpy((2.0 * ngd.eta / ngd.beta).sqrt(), &noise);
    check_finite(&next, state.k + 1)?;
    Ok(ChainState {
        k: state.k + 1,
        weights: next,
        ..state.clone()
    })
}

/// One kept iterate of the trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub empirical_risk: f64,
    pub h_norm: f64,
    pub h1_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStats {
    pub kept: usize,
    pub mean_risk: f64,
    pub min_risk: f64,
    pub max_risk: f64,
    pub mean_h_norm: f64,
}

/// Result of [`run_chain`].
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub state: ChainState,
    pub snapshots: Vec<WeightVector>,
    pub trace: Vec<TraceRow>,
    pub stats: TraceStats,
}

impl ChainOutput {
    /// The last iterate `W_{k_max}`.
    pub fn last(&self) -> &WeightVector {
        &self.state.weights
    }

    /// Mean of `f_{W_k}` over kept iterates.
    pub fn averaged_predictor(&self, schedule: &ScheduleConfig) -> AveragedNetwork {
        AveragedNetwork::new(schedule.clone(), &self.snapshots)
    }

    /// CSV with columns `k,empirical_risk,h_norm,h1_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("k,empirical_risk,h_norm,h1_norm\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.k,
                fmt_real(row.empirical_risk),
                fmt_real(row.h_norm),
                fmt_real(row.h1_norm)
            ));
        }
        out
    }
}

/// Runs `k_max` steps from `init` (or from the configured initialization),
/// keeping every `thinning`-th iterate after `burn_in`. Deterministic in
/// `ngd.seed`: stream 0 of the ChaCha8 generator feeds the step noise,
/// stream 1 the prior initialization.
pub fn run_chain(schedule: &ScheduleConfig, ngd: &NgdConfig, objective: Objective<'_>, init: Option<WeightVector>) -> Result<ChainOutput> {
    ngd.validate()?;
    let mut w = match init {
        Some(w) if w.width() <= ngd.width && w.input_dim() == schedule.d => w.zero_padded(ngd.width),
        Some(w) => {
            return Err(invalid(format!(
                "initial weights of width {} and dimension {} do not fit width {} and dimension {}",
                w.width(),
                w.input_dim(),
                ngd.width,
                schedule.d
            )))
        }
        None => match ngd.init {
            Init::Zero => WeightVector::zeros(ngd.width, schedule.d),
            Init::Prior => {
                let mut rng = ChaCha8Rng::seed_from_u64(ngd.seed);
                rng.set_stream(1);
                sample_prior(schedule, ngd, &mut rng)
            }
        },
    };
    if let Objective::Data(data) = objective {
        check_data(schedule, &w, data)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ngd.seed);
    let mut stepper = Stepper::new(schedule, ngd, ngd.width, objective);
    let mut noise = vec![0.0; w.as_slice().len()];
    let mut snapshots = Vec::with_capacity(ngd.kept());
    let mut trace = Vec::with_capacity(ngd.kept());
    let mut state_kept = 0usize;
    let mut mean_risk = 0.0;

    for k in 0..ngd.k_max {
        let risk = stepper.evaluate(&w);
        if k >= ngd.burn_in && (k - ngd.burn_in) % ngd.thinning == 0 {
            state_kept += 1;
            mean_risk += (risk - mean_risk) / state_kept as f64;
            trace.push(TraceRow {
                k,
                empirical_risk: risk,
                h_norm: w.h_norm(),
                h1_norm: hgamma_norm(schedule, &w, 1.0),
            });
            snapshots.push(w.clone());
        }
        for v in noise.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        stepper.advance(&mut w, &noise);
        check_finite(&w, k + 1)?;
    }

    let stats = trace_stats(&trace);
    Ok(ChainOutput {
        state: ChainState {
            k: ngd.k_max,
            weights: w,
            kept: state_kept,
            mean_risk,
        },
        snapshots,
        trace,
        stats,
    })
}

fn trace_stats(trace: &[TraceRow]) -> TraceStats {
    let kept = trace.len();
    let n = kept.max(1) as f64;
    TraceStats {
        kept,
        mean_risk: trace.iter().map(|r| r.empirical_risk).sum::<f64>() / n,
        min_risk: trace.iter().map(|r| r.empirical_risk).fold(f64::INFINITY, f64::min),
        max_risk: trace.iter().map(|r| r.empirical_risk).fold(f64::NEG_INFINITY, f64::max),
        mean_h_norm: trace.iter().map(|r| r.h_norm).sum::<f64>() / n,
    }
}

/// Mean of `f_W` over a list of snapshots.
#[derive(Clone, Debug)]
pub struct AveragedNetwork {
    config: ScheduleConfig,
    width: usize,
    count: usize,
    values: Vec<f64>,
    table: NodeTable,
}

impl AveragedNetwork {
    pub fn new(config: ScheduleConfig, snapshots: &[WeightVector]) -> Self {
        let width = snapshots.first().map_or(1, |w| w.width());
        let mut values = Vec::with_capacity(snapshots.len() * width * (config.d + 2));
        for s in snapshots {
            assert_eq!(s.width(), width, "snapshots must share one width");
            values.extend_from_slice(s.as_slice());
        }
        let table = config.node_table(width);
        Self {
            config,
            width,
            count: snapshots.len(),
            values,
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let stride = self.width * (self.config.d + 2);
        let sum: f64 = self.values.chunks_exact(stride).map(|w| self.table.forward(w, x)).sum();
        sum / self.count as f64
    }

    /// Schedule header, `snapshots = S`, then `S·M` block lines.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# ngdrate averaged predictor\n");
        out.push_str(&schedule_header(&self.config, self.width));
        out.push_str(&format!("snapshots = {}\n", self.count));
        for block in self.values.chunks_exact(self.config.d + 2) {
            let line: Vec<String> = block.iter().map(|v| fmt_real(*v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = crate::format::Header::parse(text)?;
        let (config, width) = crate::model::schedule_from_header(&header)?;
        let count: usize = header.get_parsed("snapshots")?;
        let body = header.body();
        if body.len() != count * width {
            return Err(crate::error::parse_err(
                header.last_line(),
                format!("expected {} block lines, found {}", count * width, body.len()),
            ));
        }
        let snapshots = body
            .chunks(width.max(1))
            .map(|lines| crate::model::blocks_from_body(lines, config.d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(config, &snapshots))
    }
}

impl Predictor for AveragedNetwork {
    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Between/within variance comparison across independent chains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingReport {
    /// `(W + B) / W`: pooled variance over the mean within-chain variance.
    pub ratio: f64,
    pub within: f64,
    /// Variance of the chain means.
    pub between: f64,
    pub flagged: bool,
}

/// Compares traces of the same statistic from independent chains, truncated
/// to the shortest one. A ratio above `threshold` flags non-mixing.
pub fn mixing_diagnostic(traces: &[&[f64]], threshold: f64) -> Result<MixingReport> {
    if traces.len() < 2 {
        return Err(invalid("mixing diagnostic needs at least two chains"));
    }
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    if len < 2 {
        return Err(invalid("mixing diagnostic needs traces of length at least 2"));
    }
    let mut means = Vec::with_capacity(traces.len());
    let mut within = 0.0;
    for t in traces {
        let t = &t[..len];
        let mean = t.iter().sum::<f64>() / len as f64;
        let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64;
        means.push(mean);
        within += var;
    }
    within /= traces.len() as f64;
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let between = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / means.len() as f64;
    let ratio = if within > 0.0 {
        (within + between) / within
    } else if between == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(MixingReport {
        ratio,
        within,
        between,
        flagged: ratio > threshold,
    })
}

/// Mean of the `L̂ ≡ 0` chain started from `W₀ = 1` after `T/η` steps, minus
/// the continuous-time mean `exp(−(λ/μ_m) T)`, for blocks `1..=width`.
///
/// The noise has mean zero, so the mean follows the noise-free recursion and
/// is computed by stepping with zero draws.
pub fn mean_decay_error(schedule: &ScheduleConfig, ngd: &NgdConfig, horizon: f64) -> Result<Vec<f64>> {
    if !(ngd.eta > 0.0 && horizon > 0.0) {
        return Err(invalid("need η > 0 and a positive horizon"));
    }
    let steps = (horizon / ngd.eta).round();
    if ((steps * ngd.eta - horizon) / horizon).abs() > 1e-9 {
        return Err(invalid(format!("horizon {horizon} is not a multiple of η = {}", ngd.eta)));
    }
    let width = ngd.width;
    let ones = WeightVector::from_values(width, schedule.d, vec![1.0; width * (schedule.d + 2)])?;
    let mut state = ChainState::new(ones);
    let zeros = vec![0.0; state.weights.as_slice().len()];
    for _ in 0..steps as usize {
        state = step(schedule, ngd, Objective::Null, &state, &zeros)?;
    }
    Ok((0..width)
        .map(|i| state.weights.block(i)[0] - (-ngd.lambda / schedule.mu(i + 1) * horizon).exp())
        .collect())
}
