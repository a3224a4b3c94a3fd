//! Monte-Carlo excess risk, log-log rate fits and the theoretical exponents
//! they are compared against.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, parse_err, Error, Result};
use crate::format::fmt_real;
use crate::Predictor;

/// Value of `β̃` quoted alongside the comparison setting
/// `s = 3, α₁ = γ = α₂/4`.
pub const QUOTED_BETA_TILDE: f64 = 17.0 / 3.0;

/// One experiment cell. A failed cell carries `NaN` risk and standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskRecord {
    pub estimator: String,
    pub n: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub stderr: f64,
    pub wall_ms: u64,
}

impl RiskRecord {
    pub const CSV_HEADER: &'static str = "estimator,n,seed,excess_risk,stderr,wall_ms";

    pub fn failed(&self) -> bool {
        !self.excess_risk.is_finite()
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.estimator,
            self.n,
            self.seed,
            fmt_real(self.excess_risk),
            fmt_real(self.stderr),
            self.wall_ms
        )
    }

    pub fn from_csv_line(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(line_no, format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("invalid number '{}'", fields[i])))
        };
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|_| parse_err(line_no, format!("invalid integer '{}'", fields[i])))
        };
        if fields[0].is_empty() {
            return Err(parse_err(line_no, "empty estimator tag"));
        }
        Ok(Self {
            estimator: fields[0].to_string(),
            n: int(1)? as usize,
            seed: int(2)?,
            excess_risk: num(3)?,
            stderr: num(4)?,
            wall_ms: int(5)?,
        })
    }
}

/// Renders records under the CSV header, in the given order.
pub fn records_to_csv(records: &[RiskRecord]) -> String {
    let mut out = String::from(RiskRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<RiskRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RiskRecord::CSV_HEADER => {}
        Some((i, _)) => return Err(parse_err(i + 1, format!("expected header '{}'", RiskRecord::CSV_HEADER))),
        None => return Err(Error::Empty("records file")),
    }
    lines.map(|(i, l)| RiskRecord::from_csv_line(l, i + 1)).collect()
}

/// I.i.d. uniform test points on `[0, 1]^d`, shared across estimators.
#[derive(Clone, Debug)]
pub struct TestSet {
    d: usize,
    points: Vec<f64>,
}

impl TestSet {
    pub fn draw(d: usize, n_test: usize, seed: u64) -> Result<Self> {
        if n_test < 2 {
            return Err(invalid("n_test must be at least 2"));
        }
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n_test * d).map(|_| rng.random::<f64>()).collect();
        Ok(Self { d, points })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }

    /// Evaluates `f` at every test point.
    pub fn values(&self, f: &(impl Predictor + ?Sized)) -> Vec<f64> {
        self.points().map(|x| f.predict(x)).collect()
    }

    /// Mean and standard error of `(f̂(x) − target(x))²` given precomputed
    /// target values.
    pub fn excess_risk(&self, target: &[f64], estimate: &(impl Predictor + ?Sized)) -> (f64, f64) {
        let sq: Vec<f64> = self
            .points()
            .zip(target)
            .map(|(x, t)| (estimate.predict(x) - t).powi(2))
            .collect();
        mean_and_stderr(&sq)
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `‖f̂ − f°‖²_{L₂}` under the uniform law on `[0, 1]^d`, estimated from
/// `n_test` fresh points. Returns `(estimate, standard error)`.
pub fn excess_risk_mc(
    truth: &(impl Predictor + ?Sized),
    estimate: &(impl Predictor + ?Sized),
    d: usize,
    n_test: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let test = TestSet::draw(d, n_test, seed)?;
    let target = test.values(truth);
    Ok(test.excess_risk(&target, estimate))
}

/// Least-squares fit of `log median-risk` against `log n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    /// Slope; a risk decaying like `n^{-ρ}` gives `-ρ`.
    pub exponent: f64,
    pub intercept: f64,
    pub exponent_stderr: f64,
    pub n_grid: Vec<usize>,
    pub medians: Vec<f64>,
}

impl RateFit {
    /// `log n` and `log median` columns for plotting.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# log_n log_median_risk\n");
        for (n, m) in self.n_grid.iter().zip(&self.medians) {
            out.push_str(&format!("{} {}\n", fmt_real((*n as f64).ln()), fmt_real(m.ln())));
        }
        out
    }
}

impl fmt::Display for RateFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "exponent = {}", fmt_real(self.exponent))?;
        writeln!(f, "intercept = {}", fmt_real(self.intercept))?;
        writeln!(f, "exponent_stderr = {}", fmt_real(self.exponent_stderr))?;
        let grid: Vec<String> = self.n_grid.iter().map(|n| n.to_string()).collect();
        writeln!(f, "n_grid = {}", grid.join(" "))?;
        let med: Vec<String> = self.medians.iter().map(|m| fmt_real(*m)).collect();
        writeln!(f, "medians = {}", med.join(" "))
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Median risk per `n` (failed cells skipped), then OLS of `log(m / m₀)` on
/// `log n`. Scaling every risk by a power of two leaves the slope unchanged
/// bit for bit.
pub fn rate_fit(records: &[RiskRecord]) -> Result<RateFit> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for r in records.iter().filter(|r| !r.failed()) {
        by_n.entry(r.n).or_default().push(r.excess_risk);
    }
    if by_n.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 distinct n values, found {}", by_n.len())));
    }
    let mut n_grid = Vec::new();
    let mut medians = Vec::new();
    for (n, mut risks) in by_n {
        let m = median(&mut risks);
        if !(m > 0.0) {
            return Err(invalid(format!("median risk at n = {n} is {m}, not positive")));
        }
        n_grid.push(n);
        medians.push(m);
    }
    let xs: Vec<f64> = n_grid.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|m| (m / medians[0]).ln()).collect();
    let (slope, intercept, se) = ols(&xs, &ys);
    Ok(RateFit {
        exponent: slope,
        intercept: intercept + medians[0].ln(),
        exponent_stderr: se,
        n_grid,
        medians,
    })
}

/// Slope, intercept and slope standard error of `y ~ x`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (ssr / (k - 2.0) / sxx).sqrt();
    (slope, intercept, se)
}

/// `β̃ = (α₁ + (s+1)α₂) / (α₂ − γ/2)`.
pub fn beta_tilde(alpha1: f64, alpha2: f64, gamma: f64, s: f64) -> Result<f64> {
    let denom = alpha2 - gamma / 2.0;
    if !(denom > 0.0) {
        return Err(invalid(format!("need α₂ > γ/2 (α₂ = {alpha2}, γ = {gamma})")));
    }
    if !(s >= 3.0) {
        return Err(invalid(format!("need s ≥ 3 (s = {s})")));
    }
    Ok((alpha1 + (s + 1.0) * alpha2) / denom)
}

/// `(2β̃ + d) / (2β̃ + 2d)`, the linear-estimator lower-bound exponent for a
/// given `β̃`. Real `d` so the endpoint `d = 0` can be evaluated.
pub fn lower_exponent_for(beta_tilde: f64, d: f64) -> f64 {
    (2.0 * beta_tilde + d) / (2.0 * beta_tilde + 2.0 * d)
}

/// Lower-bound exponent for linear estimators, without the arbitrarily small
/// slack.
pub fn linear_lower_exponent(alpha1: f64, alpha2: f64, gamma: f64, s: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(lower_exponent_for(beta_tilde(alpha1, alpha2, gamma, s)?, d as f64))
}

/// Both readings of `β̃` for a parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerExponentReport {
    pub formula_beta_tilde: f64,
    pub formula_exponent: f64,
    /// Present only in the comparison setting `s = 3, α₁ = γ = α₂/4`.
    pub quoted_beta_tilde: Option<f64>,
    pub quoted_exponent: Option<f64>,
    /// The two readings disagree.
    pub discrepancy: bool,
}

pub fn linear_lower_report(alpha1: f64, alpha2: f64, gamma: f64, s: f64, d: usize) -> Result<LowerExponentReport> {
    let formula_beta_tilde = beta_tilde(alpha1, alpha2, gamma, s)?;
    let formula_exponent = linear_lower_exponent(alpha1, alpha2, gamma, s, d)?;
    let comparison_setting = s == 3.0 && alpha1 == gamma && alpha2 == 4.0 * alpha1;
    let quoted_beta_tilde = comparison_setting.then_some(QUOTED_BETA_TILDE);
    let quoted_exponent = quoted_beta_tilde.map(|b| lower_exponent_for(b, d as f64));
    Ok(LowerExponentReport {
        formula_beta_tilde,
        formula_exponent,
        quoted_beta_tilde,
        quoted_exponent,
        discrepancy: quoted_beta_tilde.is_some_and(|q| (q - formula_beta_tilde).abs() > 1e-12),
    })
}

impl fmt::Display for LowerExponentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "beta_tilde_formula = {}", fmt_real(self.formula_beta_tilde))?;
        writeln!(f, "linear_lower_exponent_formula = {}", fmt_real(self.formula_exponent))?;
        if let (Some(b), Some(e)) = (self.quoted_beta_tilde, self.quoted_exponent) {
            writeln!(f, "beta_tilde_quoted = {}", fmt_real(b))?;
            writeln!(f, "linear_lower_exponent_quoted = {}", fmt_real(e))?;
        }
        writeln!(f, "beta_tilde_discrepancy = {}", self.discrepancy)?;
        writeln!(f, "# exponents omit the arbitrarily small slack of the lower bound")
    }
}

/// `γ / (α₁ + qα₂ + 1)`, the noisy-gradient-descent upper-bound exponent.
pub fn nn_upper_exponent(alpha1: f64, alpha2: f64, gamma: f64, q: f64, s: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(invalid(format!("clause 0 ≤ q violated (q = {q})")));
    }
    if !(q <= s - 3.0) {
        return Err(invalid(format!("clause q ≤ s − 3 violated (q = {q}, s = {s})")));
    }
    if !(gamma < 0.5 + alpha1 + q * alpha2) {
        return Err(invalid(format!("clause γ < 1/2 + α₁ + qα₂ violated (γ = {gamma})")));
    }
    Ok(gamma / (alpha1 + q * alpha2 + 1.0))
}

/// `α₁ > 2β̃/d + 1`: the network rate beats every linear estimator.
pub fn dominance_condition(alpha1: f64, d: usize, beta_tilde: f64) -> bool {
    alpha1 > 2.0 * beta_tilde / d as f64 + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn rec(est: &str, n: usize, seed: u64, risk: f64) -> RiskRecord {
        RiskRecord {
            estimator: est.into(),
            n,
            seed,
            excess_risk: risk,
            stderr: 0.0,
            wall_ms: 0,
        }
    }

    #[test]
    fn mc_risk_zero_constant_and_linear() {
        let truth = |x: &[f64]| x[0] * x[1];
        let (r, se) = excess_risk_mc(&truth, &truth, 2, 100, 1).unwrap();
        assert_eq!((r, se), (0.0, 0.0));
        let shifted = |x: &[f64]| x[0] * x[1] + 0.3;
        let (r, _) = excess_risk_mc(&truth, &shifted, 2, 100, 1).unwrap();
        assert!((r - 0.09).abs() < 1e-12);
        let plus_x1 = |x: &[f64]| x[0] * x[1] + x[0];
        let (r, se) = excess_risk_mc(&truth, &plus_x1, 3, 100_000, 7).unwrap();
        assert!((r - 1.0 / 3.0).abs() <= 3.0 * se, "{r} ± {se}");
        assert!(excess_risk_mc(&truth, &truth, 2, 1, 1).is_err());
    }

    #[test]
    fn mc_risk_matches_large_reference() {
        let truth = |x: &[f64]| (3.0 * x[0]).sin();
        let est = |x: &[f64]| x[0] + 0.2 * x[1];
        let (reference, ref_se) = excess_risk_mc(&truth, &est, 2, 10_000_000, 999).unwrap();
        let reps: Vec<(f64, f64)> = (0..20).map(|s| excess_risk_mc(&truth, &est, 2, 10_000, s).unwrap()).collect();
        let grand = reps.iter().map(|r| r.0).sum::<f64>() / 20.0;
        let grand_se = (reps.iter().map(|r| r.1 * r.1).sum::<f64>()).sqrt() / 20.0;
        assert!((grand - reference).abs() <= 3.0 * (grand_se.powi(2) + ref_se.powi(2)).sqrt());
    }

    #[test]
    fn rate_fit_exact_and_flat() {
        let ns = [64, 128, 256, 512];
        let recs: Vec<_> = ns.iter().map(|&n| rec("a", n, 0, 2.5 * (n as f64).powf(-0.7))).collect();
        let fit = rate_fit(&recs).unwrap();
        assert!((fit.exponent + 0.7).abs() < 1e-12);
        let flat: Vec<_> = ns.iter().map(|&n| rec("a", n, 0, 0.4)).collect();
        assert!(rate_fit(&flat).unwrap().exponent.abs() < 1e-12);
        assert!(rate_fit(&recs[..2]).is_err());
        let mut bad = recs.clone();
        bad[0].excess_risk = 0.0;
        assert!(rate_fit(&bad).is_err());
    }

    #[test]
    fn rate_fit_skips_failed_cells() {
        let mut recs: Vec<_> = [64, 128, 256].iter().map(|&n| rec("a", n, 0, 1.0 / n as f64)).collect();
        recs.push(rec("a", 128, 1, f64::NAN));
        let fit = rate_fit(&recs).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_stderr_covers_noisy_power_law() {
        let rho = 0.6;
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut covered = 0;
        for trial in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let mut recs = Vec::new();
            for j in 0..8 {
                let n = 50usize << j;
                for r in 0..20 {
                    let eps: f64 = noise.sample(&mut rng);
                    recs.push(rec("a", n, r, (n as f64).powf(-rho) * (1.0 + eps)));
                }
            }
            let fit = rate_fit(&recs).unwrap();
            if (fit.exponent + rho).abs() <= 3.0 * fit.exponent_stderr {
                covered += 1;
            }
        }
        assert!(covered >= 95, "coverage {covered}/100");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let recs = vec![rec("ngd", 64, 3, 0.125), rec("krr-rbf", 128, 0, f64::NAN)];
        let text = records_to_csv(&recs);
        let back = records_from_csv(&text).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(back[1].failed());
        assert!(records_from_csv("bad,header\n").is_err());
        assert!(matches!(
            records_from_csv(&format!("{}\nngd,1,2\n", RiskRecord::CSV_HEADER)),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn exponent_calculators() {
        assert_eq!(nn_upper_exponent(3.0, 12.0, 3.0, 0.0, 3.0).unwrap(), 0.75);
        for a1 in [0.7, 1.0, 2.5] {
            let e = nn_upper_exponent(a1, 4.0 * a1, a1, 0.0, 3.0).unwrap();
            assert!((e - a1 / (a1 + 1.0)).abs() < 1e-15);
        }
        assert!(nn_upper_exponent(3.0, 12.0, 3.0, 1.0, 3.0).is_err());
        assert!(nn_upper_exponent(1.0, 1.0, 3.0, 0.0, 3.0).is_err());
        assert!(nn_upper_exponent(1.0, 1.0, 1.0, -0.5, 3.0).is_err());

        assert!(dominance_condition(3.0, 10, QUOTED_BETA_TILDE));
        for d in 1..200 {
            assert!(!dominance_condition(1.0, d, QUOTED_BETA_TILDE));
        }
        assert!(dominance_condition(1.01, 1_000_000, QUOTED_BETA_TILDE));

        assert_eq!(lower_exponent_for(4.0, 0.0), 1.0);
        assert!((lower_exponent_for(4.0, 1e12) - 0.5).abs() < 1e-10);
        assert!(linear_lower_exponent(3.0, 12.0, 3.0, 3.0, 0).is_err());
        assert!(beta_tilde(1.0, 0.5, 1.0, 3.0).is_err());
    }

    #[test]
    fn comparison_setting_reports_both_readings() {
        let r = linear_lower_report(3.0, 12.0, 3.0, 3.0, 10).unwrap();
        assert!((r.formula_beta_tilde - 34.0 / 7.0).abs() < 1e-14);
        assert_eq!(r.quoted_beta_tilde, Some(17.0 / 3.0));
        assert!(r.discrepancy);
        let text = r.to_string();
        assert!(text.contains("beta_tilde_quoted") && text.contains("beta_tilde_formula"));
        let other = linear_lower_report(1.0, 2.0, 1.0, 4.0, 5).unwrap();
        assert_eq!(other.quoted_beta_tilde, None);
        assert!(!other.discrepancy);
    }

    proptest! {
        #[test]
        fn slope_is_scale_invariant(c in 0.01f64..100.0, rho in 0.0f64..2.0, noise in prop::collection::vec(0.5f64..2.0, 5)) {
            let ns = [32usize, 64, 128, 256, 512];
            let recs: Vec<_> = ns.iter().zip(&noise).map(|(&n, z)| rec("a", n, 0, z * (n as f64).powf(-rho))).collect();
            let scaled: Vec<_> = recs.iter().map(|r| RiskRecord { excess_risk: r.excess_risk * c, ..r.clone() }).collect();
            let a = rate_fit(&recs).unwrap();
            let b = rate_fit(&scaled).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() <= 1e-12);
        }

        #[test]
        fn slope_is_exactly_invariant_to_power_of_two_scaling(k in -40i32..40, rho in 0.0f64..2.0, noise in prop::collection::vec(0.5f64..2.0, 6)) {
            let ns = [32usize, 64, 128, 256, 512];
            let mut recs: Vec<_> = ns.iter().zip(&noise).map(|(&n, z)| rec("a", n, 0, z * (n as f64).powf(-rho))).collect();
            recs.push(rec("a", 512, 1, noise[5] * 512f64.powf(-rho)));
            let c = 2f64.powi(k);
            let scaled: Vec<_> = recs.iter().map(|r| RiskRecord { excess_risk: r.excess_risk * c, ..r.clone() }).collect();
            prop_assert_eq!(rate_fit(&recs).unwrap().exponent, rate_fit(&scaled).unwrap().exponent);
        }

        #[test]
        fn lower_exponent_decreases_in_d(bt in 0.1f64..50.0, d in 1usize..500) {
            let a = lower_exponent_for(bt, d as f64);
            let b = lower_exponent_for(bt, d as f64 + 1.0);
            prop_assert!(b < a && b > 0.5);
        }
    }
}
