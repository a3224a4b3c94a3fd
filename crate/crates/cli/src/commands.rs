//! Subcommand bodies. Each returns the text destined for stdout so the
//! binary stays a thin shell and the commands are testable in-process.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ngdrate_core::linear::{tune, EstimatorKind, LinearEstimator};
use ngdrate_core::lowerbound::lemma_report;
use ngdrate_core::ngd::{run_chain, AveragedNetwork, Objective};
use ngdrate_core::risk::records_from_csv;
use ngdrate_core::Dataset;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::report::{build_report, write_plots};
use crate::sweep::{cell_data, cell_features, cell_ngd, cv_seed, run_sweep_with_progress, Cell};

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    ExperimentConfig::parse(&read(path)?).map_err(CliError::Config)
}

/// Canonical configuration, assumption constants and the resolved chain
/// settings for every `n` of the sweep.
pub fn check(path: &Path) -> CliResult<String> {
    let cfg = load_config(path)?;
    let mut out = cfg.to_canonical();
    let report = cfg.schedule.check_assumptions();
    writeln!(out, "\n# assumptions hold").unwrap();
    writeln!(out, "# C_sigma = {}", report.c_sigma).unwrap();
    writeln!(out, "# sup |sigma_m| = {}", report.sup_activation).unwrap();
    writeln!(out, "# teacher width = {}", cfg.teacher_width()).unwrap();
    writeln!(out, "# n beta lambda M k_max burn_in thinning").unwrap();
    for &n in &cfg.sweep.ns {
        let ngd = cfg.resolve_ngd(n)?;
        writeln!(
            out,
            "# {n} {} {} {} {} {} {}",
            ngd.beta, ngd.lambda, ngd.width, ngd.k_max, ngd.burn_in, ngd.thinning
        )
        .unwrap();
    }
    Ok(out)
}

pub fn teacher(path: &Path, out: Option<&Path>) -> CliResult<String> {
    let cfg = load_config(path)?;
    let text = cfg.build_teacher()?.to_text();
    match out {
        Some(p) => {
            write(p, &text)?;
            Ok(format!("wrote {}\n", p.display()))
        }
        None => Ok(text),
    }
}

/// The dataset the sweep would draw for cell `(n, replicate)`.
pub fn data(path: &Path, n: usize, replicate: u64, out: Option<&Path>) -> CliResult<String> {
    let cfg = load_config(path)?;
    let teacher = cfg.build_teacher()?;
    let text = cell_data(&cfg, &teacher, Cell { n, replicate })?.to_csv();
    match out {
        Some(p) => {
            write(p, &text)?;
            Ok(format!("wrote {}\n", p.display()))
        }
        None => Ok(text),
    }
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::from_csv(&read(path)?)?)
}

/// Runs the chain on a dataset file with the settings and seed the sweep
/// would use for `(len(data), replicate)`. Writes `trace.csv`,
/// `averaged.txt` and `last.txt` into `out_dir`.
pub fn train(path: &Path, data_path: &Path, replicate: u64, out_dir: &Path) -> CliResult<String> {
    let cfg = load_config(path)?;
    let data = load_data(data_path)?;
    let cell = Cell { n: data.len(), replicate };
    let ngd = cell_ngd(&cfg, cell)?;
    let chain = run_chain(&cfg.schedule, &ngd, Objective::Data(&data), None)?;
    write(&out_dir.join("trace.csv"), &chain.trace_csv())?;
    write(&out_dir.join("averaged.txt"), &chain.averaged_predictor(&cfg.schedule).to_text())?;
    let last = AveragedNetwork::new(cfg.schedule.clone(), std::slice::from_ref(chain.last()));
    write(&out_dir.join("last.txt"), &last.to_text())?;
    let s = &chain.stats;
    Ok(format!(
        "eta = {}\nbeta = {}\nlambda = {}\nM = {}\nk_max = {}\nkept = {}\nmean_empirical_risk = {}\nmin_empirical_risk = {}\nmax_empirical_risk = {}\nmean_h_norm = {}\n",
        ngd.eta, ngd.beta, ngd.lambda, ngd.width, ngd.k_max, s.kept, s.mean_risk, s.min_risk, s.max_risk, s.mean_h_norm
    ))
}

/// Tunes one baseline on a dataset file by cross-validation and reports the
/// selected hyperparameters. Kernel ridge models are written to `out`.
pub fn fit(path: &Path, data_path: &Path, kind: EstimatorKind, replicate: u64, out: Option<&Path>) -> CliResult<String> {
    let cfg = load_config(path)?;
    let data = load_data(data_path)?;
    let cell = Cell { n: data.len(), replicate };
    let features = kind.feature_kind().map(|fk| cell_features(&cfg, cell, fk)).transpose()?;
    let tuned = tune(kind, &data, &cfg.tune_grid(cv_seed(&cfg, cell, kind.tag())), features.as_ref())?;
    let mut text = format!("estimator = {kind}\nselected = {}\ncv_error = {}\n", tuned.hyper, tuned.cv_error);
    for (h, e) in &tuned.scores {
        writeln!(text, "# {h} cv_error = {e}").unwrap();
    }
    if let (Some(p), LinearEstimator::Krr(model)) = (out, &tuned.estimator) {
        write(p, &model.to_text())?;
        writeln!(text, "wrote {}", p.display()).unwrap();
    }
    Ok(text)
}

pub fn sweep(path: &Path, workers: usize) -> CliResult<String> {
    let cfg = load_config(path)?;
    let summary = run_sweep_with_progress(&cfg, workers, |cell, left| {
        eprintln!("done: n = {}, replicate {} ({left} cells left)", cell.n, cell.replicate);
    })?;
    Ok(format!(
        "results = {}\ncells_computed = {}\ncells_skipped = {}\nfailed_records = {}\n",
        summary.path.display(),
        summary.computed,
        summary.skipped,
        summary.failed_records
    ))
}

/// Rate table for a records file; with a config, theory exponents too.
/// Plot files go to `plots` when given.
pub fn report(records_path: &Path, config: Option<&Path>, plots: Option<&Path>) -> CliResult<String> {
    let records = records_from_csv(&read(records_path)?)?;
    let cfg = config.map(load_config).transpose()?;
    let rep = build_report(&records, cfg.as_ref().map(|c| &c.schedule))?;
    let mut text = rep.to_string();
    if let Some(dir) = plots {
        for p in write_plots(&rep, dir)? {
            writeln!(text, "wrote {}", p.display()).unwrap();
        }
    }
    Ok(text)
}

/// Builds the ridge approximation for every configured truncation radius and
/// reports whether the relative error is non-increasing along them. Per-radius
/// error grids go to `out_dir` when given.
pub fn lemma(path: &Path, out_dir: Option<&Path>) -> CliResult<String> {
    let cfg = load_config(path)?;
    let mut text = String::new();
    let mut errors = Vec::new();
    for lc in cfg.lemma_configs() {
        let (_, summary, csv) = lemma_report(&lc)?;
        writeln!(text, "{summary}").unwrap();
        if let Some(dir) = out_dir {
            let p = dir.join(format!("lemma_dw{}.csv", lc.d_w));
            write(&p, &csv)?;
            writeln!(text, "wrote {}\n", p.display()).unwrap();
        }
        errors.push(summary.relative_error);
    }
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    writeln!(text, "relative_error_non_increasing = {monotone}").unwrap();
    Ok(text)
}
