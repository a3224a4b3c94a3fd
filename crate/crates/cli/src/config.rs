//! Line-oriented experiment configuration: `section.key = value`, `#` comments.
//!
//! Every key has a default, so an empty file is a valid configuration (the
//! comparison setting `d = 10, α₁ = γ = 3, α₂ = 12, s = 3`). Optional values
//! accept `auto`.

use std::fmt;
use std::path::PathBuf;

use ngdrate_core::linear::{EstimatorKind, TuneGrid};
use ngdrate_core::lowerbound::BumpApproxConfig;
use ngdrate_core::model::{sample_teacher, single_bump_teacher};
use ngdrate_core::ngd::{auto_width, Init, NgdConfig};
use ngdrate_core::{NoiseKind, ScheduleConfig, TeacherSpec};

/// One problem found while parsing, tied to a 1-based line (0 when the
/// problem is not attached to a line).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TeacherPresetKind {
    Gaussian,
    SingleBump,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeacherSection {
    /// `None` means twice the student width at the largest `n`.
    pub width: Option<usize>,
    pub radius: f64,
    pub seed: u64,
    pub preset: TeacherPresetKind,
    /// Active node of the single-bump preset.
    pub node: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NgdMode {
    /// Hyperparameters prescribed from `n` and the noise bound.
    Auto,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reported {
    Averaged,
    Last,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgdSection {
    pub mode: NgdMode,
    pub eta: f64,
    /// Target for `λ η k_max` in auto mode.
    pub horizon: f64,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub width: Option<usize>,
    pub k_max: Option<usize>,
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub init: Init,
    pub predictor: Reported,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSection {
    pub estimators: Vec<EstimatorKind>,
    /// `None` selects the defaults of [`TuneGrid::default_for`].
    pub bandwidths: Option<Vec<f64>>,
    pub ridges: Option<Vec<f64>>,
    pub ks: Option<Vec<usize>>,
    pub folds: usize,
    /// Width of `W₀` for the tangent and random-feature kernels; `None`
    /// uses the student width.
    pub feature_width: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub ns: Vec<usize>,
    pub replicates: u64,
    pub base_seed: u64,
    /// Record wall-clock times. Off by default so result files depend only
    /// on the configuration.
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaSection {
    pub d: usize,
    pub h: f64,
    pub center: Option<Vec<f64>>,
    pub d_w: Vec<f64>,
    pub quad_a: Option<usize>,
    pub quad_b: Option<usize>,
    pub grid: Option<usize>,
    pub db_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub schedule: ScheduleConfig,
    pub teacher: TeacherSection,
    pub noise_bound: f64,
    pub noise_kind: NoiseKind,
    pub ngd: NgdSection,
    pub baselines: BaselineSection,
    pub sweep: SweepSection,
    pub n_test: usize,
    pub output: PathBuf,
    pub lemma: LemmaSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig {
                d: 10,
                radius: 1.0,
                gamma: 3.0,
                alpha1: 3.0,
                alpha2: 12.0,
                s: 3.0,
                c_mu: 1.0,
            },
            teacher: TeacherSection {
                width: None,
                radius: 1.0,
                seed: 0,
                preset: TeacherPresetKind::Gaussian,
                node: 1,
            },
            noise_bound: 0.5,
            noise_kind: NoiseKind::Uniform,
            ngd: NgdSection {
                mode: NgdMode::Auto,
                eta: 0.5,
                horizon: 50.0,
                beta: None,
                lambda: None,
                width: None,
                k_max: None,
                burn_in: None,
                thinning: None,
                init: Init::Zero,
                predictor: Reported::Averaged,
            },
            baselines: BaselineSection {
                estimators: vec![EstimatorKind::KrrRbf, EstimatorKind::Knn, EstimatorKind::Nw],
                bandwidths: None,
                ridges: None,
                ks: None,
                folds: 5,
                feature_width: None,
            },
            sweep: SweepSection {
                ns: vec![64, 128, 256, 512, 1024, 2048],
                replicates: 10,
                base_seed: 0,
                timing: false,
            },
            n_test: 100_000,
            output: PathBuf::from("results"),
            lemma: LemmaSection {
                d: 1,
                h: 0.25,
                center: None,
                d_w: vec![2.0, 4.0, 6.0],
                quad_a: None,
                quad_b: None,
                grid: None,
                db_factor: None,
            },
        }
    }
}

/// Keys in canonical order.
const KEYS: &[&str] = &[
    "schedule.d",
    "schedule.R",
    "schedule.gamma",
    "schedule.alpha1",
    "schedule.alpha2",
    "schedule.s",
    "schedule.c_mu",
    "teacher.width",
    "teacher.radius",
    "teacher.seed",
    "teacher.preset",
    "teacher.node",
    "noise.U",
    "noise.kind",
    "ngd.mode",
    "ngd.eta",
    "ngd.horizon",
    "ngd.beta",
    "ngd.lambda",
    "ngd.width",
    "ngd.k_max",
    "ngd.burn_in",
    "ngd.thinning",
    "ngd.init",
    "ngd.predictor",
    "baselines.estimators",
    "baselines.bandwidths",
    "baselines.ridges",
    "baselines.ks",
    "baselines.folds",
    "baselines.feature_width",
    "sweep.n",
    "sweep.replicates",
    "sweep.base_seed",
    "sweep.timing",
    "risk.n_test",
    "output.dir",
    "lemma.d",
    "lemma.h",
    "lemma.center",
    "lemma.d_w",
    "lemma.quad_a",
    "lemma.quad_b",
    "lemma.grid",
    "lemma.db_factor",
];

fn parse_scalar<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
    value.parse::<T>().map_err(|_| format!("expected {what}, found {value:?}"))
}

fn parse_opt<T: std::str::FromStr>(value: &str, what: &str) -> Result<Option<T>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_scalar(value, what).map(Some)
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>, String> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(format!("expected a comma-separated list of {what}"));
    }
    items.into_iter().map(|s| parse_scalar(s, what)).collect()
}

fn parse_opt_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Option<Vec<T>>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_list(value, what).map(Some)
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found {value:?}")),
    }
}

/// Key whose line a violated schedule clause is reported on.
fn clause_key(clause: &str) -> &'static str {
    if clause.starts_with("α₁") {
        "schedule.alpha1"
    } else if clause.starts_with("α₂") {
        "schedule.alpha2"
    } else if clause.starts_with("s ") {
        "schedule.s"
    } else if clause.starts_with("R ") {
        "schedule.R"
    } else if clause.starts_with("γ") {
        "schedule.gamma"
    } else if clause.starts_with("d ") {
        "schedule.d"
    } else {
        "schedule.c_mu"
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut cfg = Self::default();
        let mut diags = Vec::new();
        let mut seen: Vec<(&'static str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                diags.push(Diagnostic {
                    line,
                    message: format!("expected `key = value`, found {trimmed:?}"),
                });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&canon) = KEYS.iter().find(|k| **k == key) else {
                diags.push(Diagnostic {
                    line,
                    message: format!("unknown key `{key}`"),
                });
                continue;
            };
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == canon) {
                diags.push(Diagnostic {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
                continue;
            }
            seen.push((canon, line));
            if let Err(message) = cfg.set(canon, value) {
                diags.push(Diagnostic {
                    line,
                    message: format!("{key}: {message}"),
                });
            }
        }
        if diags.is_empty() {
            let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
            diags.extend(cfg.validate(&line_of));
        }
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        const REAL: &str = "a real number";
        const INT: &str = "a non-negative integer";
        match key {
            "schedule.d" => self.schedule.d = parse_scalar(v, INT)?,
            "schedule.R" => self.schedule.radius = parse_scalar(v, REAL)?,
            "schedule.gamma" => self.schedule.gamma = parse_scalar(v, REAL)?,
            "schedule.alpha1" => self.schedule.alpha1 = parse_scalar(v, REAL)?,
            "schedule.alpha2" => self.schedule.alpha2 = parse_scalar(v, REAL)?,
            "schedule.s" => self.schedule.s = parse_scalar(v, REAL)?,
            "schedule.c_mu" => self.schedule.c_mu = parse_scalar(v, REAL)?,
            "teacher.width" => self.teacher.width = parse_opt(v, INT)?,
            "teacher.radius" => self.teacher.radius = parse_scalar(v, REAL)?,
            "teacher.seed" => self.teacher.seed = parse_scalar(v, INT)?,
            "teacher.preset" => {
                self.teacher.preset = match v {
                    "gaussian" => TeacherPresetKind::Gaussian,
                    "single-bump" => TeacherPresetKind::SingleBump,
                    _ => return Err(format!("expected gaussian or single-bump, found {v:?}")),
                }
            }
            "teacher.node" => self.teacher.node = parse_scalar(v, INT)?,
            "noise.U" => self.noise_bound = parse_scalar(v, REAL)?,
            "noise.kind" => self.noise_kind = v.parse().map_err(|e: ngdrate_core::Error| e.to_string())?,
            "ngd.mode" => {
                self.ngd.mode = match v {
                    "auto" => NgdMode::Auto,
                    "manual" => NgdMode::Manual,
                    _ => return Err(format!("expected auto or manual, found {v:?}")),
                }
            }
            "ngd.eta" => self.ngd.eta = parse_scalar(v, REAL)?,
            "ngd.horizon" => self.ngd.horizon = parse_scalar(v, REAL)?,
            "ngd.beta" => self.ngd.beta = parse_opt(v, REAL)?,
            "ngd.lambda" => self.ngd.lambda = parse_opt(v, REAL)?,
            "ngd.width" => self.ngd.width = parse_opt(v, INT)?,
            "ngd.k_max" => self.ngd.k_max = parse_opt(v, INT)?,
            "ngd.burn_in" => self.ngd.burn_in = parse_opt(v, INT)?,
            "ngd.thinning" => self.ngd.thinning = parse_opt(v, INT)?,
            "ngd.init" => {
                self.ngd.init = match v {
                    "zero" => Init::Zero,
                    "prior" => Init::Prior,
                    _ => return Err(format!("expected zero or prior, found {v:?}")),
                }
            }
            "ngd.predictor" => {
                self.ngd.predictor = match v {
                    "averaged" => Reported::Averaged,
                    "last" => Reported::Last,
                    _ => return Err(format!("expected averaged or last, found {v:?}")),
                }
            }
            "baselines.estimators" => {
                self.baselines.estimators = if v == "none" {
                    Vec::new()
                } else {
                    v.split(',')
                        .map(|s| s.trim().parse::<EstimatorKind>().map_err(|e| e.to_string()))
                        .collect::<Result<_, _>>()?
                }
            }
            "baselines.bandwidths" => self.baselines.bandwidths = parse_opt_list(v, REAL)?,
            "baselines.ridges" => self.baselines.ridges = parse_opt_list(v, REAL)?,
            "baselines.ks" => self.baselines.ks = parse_opt_list(v, INT)?,
            "baselines.folds" => self.baselines.folds = parse_scalar(v, INT)?,
            "baselines.feature_width" => self.baselines.feature_width = parse_opt(v, INT)?,
            "sweep.n" => self.sweep.ns = parse_list(v, INT)?,
            "sweep.replicates" => self.sweep.replicates = parse_scalar(v, INT)?,
            "sweep.base_seed" => self.sweep.base_seed = parse_scalar(v, INT)?,
            "sweep.timing" => self.sweep.timing = parse_bool(v)?,
            "risk.n_test" => self.n_test = parse_scalar(v, INT)?,
            "output.dir" => {
                if v.is_empty() {
                    return Err("expected a directory path".into());
                }
                self.output = PathBuf::from(v)
            }
            "lemma.d" => self.lemma.d = parse_scalar(v, INT)?,
            "lemma.h" => self.lemma.h = parse_scalar(v, REAL)?,
            "lemma.center" => self.lemma.center = parse_opt_list(v, REAL)?,
            "lemma.d_w" => self.lemma.d_w = parse_list(v, REAL)?,
            "lemma.quad_a" => self.lemma.quad_a = parse_opt(v, INT)?,
            "lemma.quad_b" => self.lemma.quad_b = parse_opt(v, INT)?,
            "lemma.grid" => self.lemma.grid = parse_opt(v, INT)?,
            "lemma.db_factor" => self.lemma.db_factor = parse_opt(v, REAL)?,
            _ => unreachable!("key table and setter disagree on {key}"),
        }
        Ok(())
    }

    fn validate(&self, line_of: &dyn Fn(&str) -> usize) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut fail = |key: &str, message: String| {
            out.push(Diagnostic {
                line: line_of(key),
                message: format!("{key}: {message}"),
            })
        };
        let report = self.schedule.check_assumptions();
        for clause in &report.failures {
            fail(clause_key(clause), format!("assumption violated: {clause}"));
        }
        if !(self.teacher.radius > 0.0 && self.teacher.radius <= 1.0) {
            fail("teacher.radius", "must lie in (0, 1]".into());
        }
        if self.teacher.width == Some(0) {
            fail("teacher.width", "must be at least 1".into());
        }
        if self.teacher.preset == TeacherPresetKind::SingleBump && self.teacher.node == 0 {
            fail("teacher.node", "nodes are numbered from 1".into());
        }
        if !(self.noise_bound >= 0.0 && self.noise_bound.is_finite()) {
            fail("noise.U", "must be non-negative".into());
        } else if self.noise_bound == 0.0 && self.noise_kind != NoiseKind::None {
            fail("noise.U", "must be positive unless noise.kind = none".into());
        }
        if !(self.ngd.eta > 0.0 && self.ngd.eta.is_finite()) {
            fail("ngd.eta", "must be positive".into());
        }
        if !(self.ngd.horizon > 0.0) {
            fail("ngd.horizon", "must be positive".into());
        }
        if self.ngd.mode == NgdMode::Manual {
            for (key, missing) in [
                ("ngd.beta", self.ngd.beta.is_none()),
                ("ngd.lambda", self.ngd.lambda.is_none()),
                ("ngd.width", self.ngd.width.is_none()),
                ("ngd.k_max", self.ngd.k_max.is_none()),
            ] {
                if missing {
                    fail(key, "required when ngd.mode = manual".into());
                }
            }
            if let Some(beta) = self.ngd.beta {
                if !(beta > self.ngd.eta) {
                    fail("ngd.beta", "must exceed ngd.eta".into());
                }
            }
            if let Some(lambda) = self.ngd.lambda {
                if !(lambda > 0.0) {
                    fail("ngd.lambda", "must be positive".into());
                }
            }
        }
        if self.ngd.width == Some(0) {
            fail("ngd.width", "must be at least 1".into());
        }
        if self.ngd.thinning == Some(0) {
            fail("ngd.thinning", "must be at least 1".into());
        }
        if let (Some(k), Some(b)) = (self.ngd.k_max, self.ngd.burn_in) {
            if b >= k {
                fail("ngd.burn_in", "must be below ngd.k_max".into());
            }
        }
        for (key, list) in [("baselines.bandwidths", &self.baselines.bandwidths), ("baselines.ridges", &self.baselines.ridges)] {
            if list.as_ref().is_some_and(|l| l.iter().any(|v| !(*v > 0.0 && v.is_finite()))) {
                fail(key, "values must be positive".into());
            }
        }
        if self.baselines.ks.as_ref().is_some_and(|l| l.contains(&0)) {
            fail("baselines.ks", "values must be at least 1".into());
        }
        if self.baselines.folds < 2 {
            fail("baselines.folds", "need at least 2 folds".into());
        }
        if self.baselines.feature_width == Some(0) {
            fail("baselines.feature_width", "must be at least 1".into());
        }
        if self.sweep.ns.iter().any(|&n| n < self.baselines.folds.max(2)) {
            fail("sweep.n", format!("every n must be at least {}", self.baselines.folds.max(2)));
        }
        let mut sorted = self.sweep.ns.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.sweep.ns.len() {
            fail("sweep.n", "values must be distinct".into());
        }
        if self.sweep.replicates == 0 {
            fail("sweep.replicates", "must be at least 1".into());
        }
        if self.n_test < 2 {
            fail("risk.n_test", "must be at least 2".into());
        }
        if !(1..=3).contains(&self.lemma.d) {
            fail("lemma.d", "must be 1, 2 or 3".into());
        }
        if !(self.lemma.h > 0.0) {
            fail("lemma.h", "must be positive".into());
        }
        if self.lemma.d_w.iter().any(|v| !(*v > 0.0)) {
            fail("lemma.d_w", "values must be positive".into());
        }
        if let Some(c) = &self.lemma.center {
            if c.len() != self.lemma.d || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                fail("lemma.center", format!("must be {} values in [0, 1]", self.lemma.d));
            }
        }
        for (key, v) in [("lemma.quad_a", self.lemma.quad_a), ("lemma.quad_b", self.lemma.quad_b)] {
            if v.is_some_and(|q| q < 4) {
                fail(key, "must be at least 4".into());
            }
        }
        if self.lemma.grid.is_some_and(|g| g < 2) {
            fail("lemma.grid", "must be at least 2".into());
        }
        if self.lemma.db_factor.is_some_and(|f| !(f > 0.0)) {
            fail("lemma.db_factor", "must be positive".into());
        }
        out
    }

    /// Every key with its resolved value, in canonical order.
    pub fn to_canonical(&self) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or("auto".into(), |v| v.to_string())
        }
        fn list<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        fn opt_list<T: fmt::Display>(v: &Option<Vec<T>>) -> String {
            v.as_ref().map_or("auto".into(), |v| list(v))
        }
        let s = &self.schedule;
        let values: Vec<String> = vec![
            s.d.to_string(),
            s.radius.to_string(),
            s.gamma.to_string(),
            s.alpha1.to_string(),
            s.alpha2.to_string(),
            s.s.to_string(),
            s.c_mu.to_string(),
            opt(&self.teacher.width),
            self.teacher.radius.to_string(),
            self.teacher.seed.to_string(),
            match self.teacher.preset {
                TeacherPresetKind::Gaussian => "gaussian".into(),
                TeacherPresetKind::SingleBump => "single-bump".into(),
            },
            self.teacher.node.to_string(),
            self.noise_bound.to_string(),
            self.noise_kind.to_string(),
            match self.ngd.mode {
                NgdMode::Auto => "auto".into(),
                NgdMode::Manual => "manual".into(),
            },
            self.ngd.eta.to_string(),
            self.ngd.horizon.to_string(),
            opt(&self.ngd.beta),
            opt(&self.ngd.lambda),
            opt(&self.ngd.width),
            opt(&self.ngd.k_max),
            opt(&self.ngd.burn_in),
            opt(&self.ngd.thinning),
            match self.ngd.init {
                Init::Zero => "zero".into(),
                Init::Prior => "prior".into(),
            },
            match self.ngd.predictor {
                Reported::Averaged => "averaged".into(),
                Reported::Last => "last".into(),
            },
            if self.baselines.estimators.is_empty() {
                "none".into()
            } else {
                list(&self.baselines.estimators)
            },
            opt_list(&self.baselines.bandwidths),
            opt_list(&self.baselines.ridges),
            opt_list(&self.baselines.ks),
            self.baselines.folds.to_string(),
            opt(&self.baselines.feature_width),
            list(&self.sweep.ns),
            self.sweep.replicates.to_string(),
            self.sweep.base_seed.to_string(),
            self.sweep.timing.to_string(),
            self.n_test.to_string(),
            self.output.display().to_string(),
            self.lemma.d.to_string(),
            self.lemma.h.to_string(),
            opt_list(&self.lemma.center),
            list(&self.lemma.d_w),
            opt(&self.lemma.quad_a),
            opt(&self.lemma.quad_b),
            opt(&self.lemma.grid),
            opt(&self.lemma.db_factor),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Student width at sample size `n`.
    pub fn student_width(&self, n: usize) -> usize {
        self.ngd.width.unwrap_or_else(|| auto_width(self.schedule.alpha1, n))
    }

    /// Chain configuration for sample size `n` (seed left at 0).
    pub fn resolve_ngd(&self, n: usize) -> ngdrate_core::Result<NgdConfig> {
        let mut cfg = match self.ngd.mode {
            NgdMode::Auto => NgdConfig::auto(&self.schedule, n, self.noise_bound, self.ngd.eta, self.ngd.horizon, 0)?,
            NgdMode::Manual => NgdConfig::new(
                self.ngd.eta,
                self.ngd.beta.unwrap_or(f64::NAN),
                self.ngd.lambda.unwrap_or(f64::NAN),
                self.student_width(n),
                self.ngd.k_max.unwrap_or(0),
                0,
            ),
        };
        if let Some(w) = self.ngd.width {
            cfg.width = w;
        }
        if let Some(k) = self.ngd.k_max {
            cfg = cfg.with_budget(k);
        }
        if let Some(b) = self.ngd.burn_in {
            cfg.burn_in = b;
        }
        if let Some(t) = self.ngd.thinning {
            cfg.thinning = t;
        }
        cfg.init = self.ngd.init;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn teacher_width(&self) -> usize {
        self.teacher.width.unwrap_or_else(|| {
            let n_max = self.sweep.ns.iter().copied().max().unwrap_or(1);
            2 * self.student_width(n_max)
        })
    }

    pub fn build_teacher(&self) -> ngdrate_core::Result<TeacherSpec> {
        let width = self.teacher_width();
        match self.teacher.preset {
            TeacherPresetKind::Gaussian => sample_teacher(&self.schedule, width, self.teacher.radius, self.teacher.seed),
            TeacherPresetKind::SingleBump => {
                single_bump_teacher(&self.schedule, width.max(self.teacher.node), self.teacher.node, self.teacher.radius)
            }
        }
    }

    pub fn tune_grid(&self, seed: u64) -> TuneGrid {
        let mut grid = TuneGrid::default_for(self.schedule.d, seed);
        if let Some(b) = &self.baselines.bandwidths {
            grid.bandwidths = b.clone();
        }
        if let Some(r) = &self.baselines.ridges {
            grid.ridges = r.clone();
        }
        if let Some(k) = &self.baselines.ks {
            grid.ks = k.clone();
        }
        grid.folds = self.baselines.folds;
        grid
    }

    /// One bump-approximation configuration per truncation radius.
    pub fn lemma_configs(&self) -> Vec<BumpApproxConfig> {
        let l = &self.lemma;
        l.d_w
            .iter()
            .map(|&d_w| {
                let center = l.center.clone().unwrap_or_else(|| vec![0.5; l.d]);
                let mut cfg = BumpApproxConfig::new(l.d, l.h, center, d_w);
                if let Some(f) = l.db_factor {
                    cfg.db_factor = f;
                    cfg.quad_b = ((cfg.d_b() / cfg.h).ceil() as usize).max(4);
                }
                if let Some(q) = l.quad_a {
                    cfg.quad_a = q;
                }
                if let Some(q) = l.quad_b {
                    cfg.quad_b = q;
                }
                if let Some(g) = l.grid {
                    cfg.grid = g;
                }
                cfg
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_comparison_setting() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let ngd = cfg.resolve_ngd(256).unwrap();
        assert_eq!(ngd.beta, 256.0);
        assert_eq!(ngd.lambda, 1.0 / 256.0);
        assert_eq!(ngd.width, 2);
        assert!(ngd.eta * ngd.k_max as f64 >= 50.0 / ngd.lambda);
    }

    #[test]
    fn violated_clause_is_reported_on_its_line() {
        let err = ExperimentConfig::parse("schedule.d = 2\nschedule.s = 2\n").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].line, 2);
        assert!(err[0].message.contains("s ≥ 3"), "{}", err[0]);
    }

    #[test]
    fn unknown_keys_types_and_duplicates() {
        let err = ExperimentConfig::parse("schedule.q = 1\nngd.eta = fast\nsweep.replicates = 2\nsweep.replicates = 3\nnonsense\n").unwrap_err();
        let lines: Vec<usize> = err.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![1, 2, 4, 5]);
        assert!(err[0].message.contains("unknown key"));
        assert!(err[1].message.contains("real number"));
    }

    #[test]
    fn canonical_form_round_trips() {
        let text = "schedule.d = 3\nschedule.alpha1 = 1.5\nschedule.alpha2 = 2\nschedule.gamma = 1\nngd.mode = manual\nngd.beta = 40\nngd.lambda = 0.025\nngd.width = 3\nngd.k_max = 1000\nbaselines.estimators = krr-rbf, knn\nbaselines.ks = 1, 3\nsweep.n = 16, 32\nlemma.center = 0.25\noutput.dir = out/x\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let canon = cfg.to_canonical();
        let back = ExperimentConfig::parse(&canon).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical(), canon);
    }

    #[test]
    fn manual_mode_requires_its_keys() {
        let err = ExperimentConfig::parse("ngd.mode = manual\nngd.beta = 10\n").unwrap_err();
        let msgs: Vec<&str> = err.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs.iter().any(|m| m.starts_with("ngd.lambda")));
        assert!(msgs.iter().any(|m| m.starts_with("ngd.width")));
    }
}
