//! Rate table, theoretical exponents and plot files from a records file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ngdrate_core::format::fmt_real;
use ngdrate_core::risk::{dominance_condition, linear_lower_report, nn_upper_exponent, rate_fit, LowerExponentReport};
use ngdrate_core::{RateFit, RiskRecord, ScheduleConfig};

use crate::error::{CliError, CliResult};
use crate::sweep::NGD_TAG;

/// NGD must be this much steeper than a baseline to be declared faster.
pub const DOMINANCE_MARGIN: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct EstimatorRow {
    pub estimator: String,
    pub records: usize,
    pub failed: usize,
    pub fit: RateFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub baseline: String,
    pub ngd_exponent: f64,
    pub baseline_exponent: f64,
    /// `baseline − ngd`; positive when NGD decays faster.
    pub margin: f64,
    pub ngd_faster: bool,
}

#[derive(Clone, Debug)]
pub struct Theory {
    pub nn_upper_exponent: f64,
    pub lower: LowerExponentReport,
    pub dominance_formula: bool,
    pub dominance_quoted: Option<bool>,
}

impl Theory {
    pub fn for_schedule(s: &ScheduleConfig) -> CliResult<Self> {
        let lower = linear_lower_report(s.alpha1, s.alpha2, s.gamma, s.s, s.d)?;
        Ok(Self {
            nn_upper_exponent: nn_upper_exponent(s.alpha1, s.alpha2, s.gamma, 0.0, s.s)?,
            dominance_formula: dominance_condition(s.alpha1, s.d, lower.formula_beta_tilde),
            dominance_quoted: lower.quoted_beta_tilde.map(|b| dominance_condition(s.alpha1, s.d, b)),
            lower,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub rows: Vec<EstimatorRow>,
    pub verdicts: Vec<Verdict>,
    pub theory: Option<Theory>,
}

impl Report {
    pub fn row(&self, estimator: &str) -> Option<&EstimatorRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// Baseline with the steepest fitted decay, if any.
    pub fn best_baseline(&self) -> Option<&EstimatorRow> {
        self.rows
            .iter()
            .filter(|r| r.estimator != NGD_TAG)
            .min_by(|a, b| a.fit.exponent.total_cmp(&b.fit.exponent))
    }
}

pub fn build_report(records: &[RiskRecord], schedule: Option<&ScheduleConfig>) -> CliResult<Report> {
    if records.is_empty() {
        return Err(CliError::Usage("records file holds no records".into()));
    }
    let mut by_est: BTreeMap<&str, Vec<RiskRecord>> = BTreeMap::new();
    for r in records {
        by_est.entry(r.estimator.as_str()).or_default().push(r.clone());
    }
    let mut rows = Vec::new();
    for (est, recs) in by_est {
        let fit = rate_fit(&recs).map_err(|e| CliError::Usage(format!("{est}: {e}")))?;
        rows.push(EstimatorRow {
            estimator: est.to_string(),
            records: recs.len(),
            failed: recs.iter().filter(|r| r.failed()).count(),
            fit,
        });
    }
    let verdicts = match rows.iter().find(|r| r.estimator == NGD_TAG) {
        Some(ngd) => rows
            .iter()
            .filter(|r| r.estimator != NGD_TAG)
            .map(|b| {
                let margin = b.fit.exponent - ngd.fit.exponent;
                Verdict {
                    baseline: b.estimator.clone(),
                    ngd_exponent: ngd.fit.exponent,
                    baseline_exponent: b.fit.exponent,
                    margin,
                    ngd_faster: margin >= DOMINANCE_MARGIN,
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let theory = schedule.map(Theory::for_schedule).transpose()?;
    Ok(Report { rows, verdicts, theory })
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>7} {:>12} {:>10}  medians", "estimator", "records", "failed", "exponent", "stderr")?;
        for r in &self.rows {
            let med: Vec<String> = r
                .fit
                .n_grid
                .iter()
                .zip(&r.fit.medians)
                .map(|(n, m)| format!("{n}:{m:.4e}"))
                .collect();
            writeln!(
                f,
                "{:<10} {:>8} {:>7} {:>12.5} {:>10.5}  {}",
                r.estimator,
                r.records,
                r.failed,
                r.fit.exponent,
                r.fit.exponent_stderr,
                med.join(" ")
            )?;
        }
        if !self.verdicts.is_empty() {
            writeln!(f)?;
            writeln!(f, "dominance (ngd faster when its exponent is at least {DOMINANCE_MARGIN} below the baseline's):")?;
            for v in &self.verdicts {
                writeln!(
                    f,
                    "  ngd vs {:<8} margin = {:+.5}  {}",
                    v.baseline,
                    v.margin,
                    if v.ngd_faster { "ngd faster" } else { "not established" }
                )?;
            }
        }
        if let Some(t) = &self.theory {
            writeln!(f)?;
            writeln!(f, "theoretical exponents (excess risk ~ n^-rate):")?;
            writeln!(f, "nn_upper_exponent = {}", fmt_real(t.nn_upper_exponent))?;
            write!(f, "{}", t.lower)?;
            writeln!(f, "dominance_condition_formula = {}", t.dominance_formula)?;
            if let Some(q) = t.dominance_quoted {
                writeln!(f, "dominance_condition_quoted = {q}")?;
            }
        }
        Ok(())
    }
}

/// Writes `plot_<estimator>.dat` (log n, log median risk) for every row.
pub fn write_plots(report: &Report, dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for r in &report.rows {
        let path = dir.join(format!("plot_{}.dat", r.estimator));
        fs::write(&path, r.fit.plot_data()).map_err(|e| CliError::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
