//! The `(n, replicate)` sweep: fresh data per cell, one NGD chain and every
//! tuned baseline per cell, all scored on a test sample shared within the cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use ngdrate_core::data::generate;
use ngdrate_core::linear::{tune, FeatureMap};
use ngdrate_core::ngd::{run_chain, Objective};
use ngdrate_core::risk::{records_from_csv, TestSet};
use ngdrate_core::{Dataset, NgdConfig, Predictor, RiskRecord, TeacherSpec};

use crate::config::{ExperimentConfig, Reported};
use crate::error::{CliError, CliResult};
use crate::seeds::cell_seed;

pub const RESULTS_FILE: &str = "results.csv";
pub const NGD_TAG: &str = "ngd";

/// Environment variable holding the number of sweep workers.
pub const WORKERS_ENV: &str = "NGDRATE_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub n: usize,
    pub replicate: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSummary {
    pub path: PathBuf,
    pub computed: usize,
    pub skipped: usize,
    pub failed_records: usize,
}

/// Worker count from [`WORKERS_ENV`], defaulting to 1.
pub fn workers_from_env() -> CliResult<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, found {v:?}"))),
        },
    }
}

/// Estimator tags of one cell, NGD first.
pub fn estimator_tags(cfg: &ExperimentConfig) -> Vec<String> {
    std::iter::once(NGD_TAG.to_string())
        .chain(cfg.baselines.estimators.iter().map(|k| k.tag().to_string()))
        .collect()
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n in &cfg.sweep.ns {
        for replicate in 0..cfg.sweep.replicates {
            out.push(Cell { n, replicate });
        }
    }
    out.sort();
    out
}

pub fn data_seed(cfg: &ExperimentConfig, cell: Cell) -> u64 {
    cell_seed(cfg.sweep.base_seed, cell.n, cell.replicate, "data")
}

pub fn ngd_seed(cfg: &ExperimentConfig, cell: Cell) -> u64 {
    cell_seed(cfg.sweep.base_seed, cell.n, cell.replicate, NGD_TAG)
}

pub fn cv_seed(cfg: &ExperimentConfig, cell: Cell, tag: &str) -> u64 {
    cell_seed(cfg.sweep.base_seed, cell.n, cell.replicate, &format!("cv-{tag}"))
}

pub fn feature_seed(cfg: &ExperimentConfig, cell: Cell) -> u64 {
    cell_seed(cfg.sweep.base_seed, cell.n, cell.replicate, "features")
}

pub fn cell_data(cfg: &ExperimentConfig, teacher: &TeacherSpec, cell: Cell) -> CliResult<Dataset> {
    Ok(generate(teacher, cell.n, cfg.noise_bound, cfg.noise_kind, data_seed(cfg, cell))?)
}

/// Chain configuration for a cell, seeded.
pub fn cell_ngd(cfg: &ExperimentConfig, cell: Cell) -> CliResult<NgdConfig> {
    let mut ngd = cfg.resolve_ngd(cell.n)?;
    ngd.seed = ngd_seed(cfg, cell);
    Ok(ngd)
}

/// Feature map shared by the tangent and random-feature baselines of a cell.
pub fn cell_features(cfg: &ExperimentConfig, cell: Cell, kind: ngdrate_core::linear::FeatureKind) -> CliResult<FeatureMap> {
    let width = cfg.baselines.feature_width.unwrap_or_else(|| cfg.student_width(cell.n));
    Ok(FeatureMap::random_init(kind, cfg.schedule.clone(), width, feature_seed(cfg, cell))?)
}

fn failed(tag: &str, cell: Cell, wall_ms: u64) -> RiskRecord {
    RiskRecord {
        estimator: tag.to_string(),
        n: cell.n,
        seed: cell.replicate,
        excess_risk: f64::NAN,
        stderr: f64::NAN,
        wall_ms,
    }
}

/// All records of one cell. Estimator failures become NaN records; only
/// problems with the cell's inputs are returned as errors.
pub fn evaluate_cell(cfg: &ExperimentConfig, teacher: &TeacherSpec, cell: Cell) -> CliResult<Vec<RiskRecord>> {
    let data = cell_data(cfg, teacher, cell)?;
    let test = TestSet::draw(cfg.schedule.d, cfg.n_test, cell_seed(cfg.sweep.base_seed, cell.n, cell.replicate, "test"))?;
    let target = test.values(teacher);
    let elapsed = |start: Instant| if cfg.sweep.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let score = |tag: &str, est: &dyn Predictor, start: Instant| {
        let (risk, se) = test.excess_risk(&target, est);
        RiskRecord {
            estimator: tag.to_string(),
            n: cell.n,
            seed: cell.replicate,
            excess_risk: risk,
            stderr: se,
            wall_ms: elapsed(start),
        }
    };

    let mut records = Vec::new();
    let start = Instant::now();
    let ngd = cell_ngd(cfg, cell)?;
    match run_chain(&cfg.schedule, &ngd, Objective::Data(&data), None) {
        Ok(out) => {
            let rec = match cfg.ngd.predictor {
                Reported::Averaged => score(NGD_TAG, &out.averaged_predictor(&cfg.schedule), start),
                Reported::Last => {
                    let last = ngdrate_core::model::Network::new(cfg.schedule.clone(), out.last().clone())?;
                    score(NGD_TAG, &last, start)
                }
            };
            records.push(rec);
        }
        Err(e) => {
            eprintln!("warning: n = {}, replicate {}: ngd failed: {e}", cell.n, cell.replicate);
            records.push(failed(NGD_TAG, cell, elapsed(start)));
        }
    }

    for &kind in &cfg.baselines.estimators {
        let start = Instant::now();
        let features = match kind.feature_kind() {
            Some(fk) => Some(cell_features(cfg, cell, fk)?),
            None => None,
        };
        let grid = cfg.tune_grid(cv_seed(cfg, cell, kind.tag()));
        match tune(kind, &data, &grid, features.as_ref()) {
            Ok(tuned) => records.push(score(kind.tag(), &tuned.estimator, start)),
            Err(e) => {
                eprintln!("warning: n = {}, replicate {}: {kind} failed: {e}", cell.n, cell.replicate);
                records.push(failed(kind.tag(), cell, elapsed(start)));
            }
        }
    }
    Ok(records)
}

fn sort_records(records: &mut [RiskRecord]) {
    records.sort_by(|a, b| (a.estimator.as_str(), a.n, a.seed).cmp(&(b.estimator.as_str(), b.n, b.seed)));
}

fn write_sorted(path: &Path, records: &mut [RiskRecord]) -> CliResult<()> {
    sort_records(records);
    let text = ngdrate_core::risk::records_to_csv(records);
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Records already on disk, restricted to cells that are complete for the
/// current estimator list.
fn completed(path: &Path, tags: &[String]) -> CliResult<(Vec<RiskRecord>, BTreeSet<Cell>)> {
    if !path.exists() {
        return Ok((Vec::new(), BTreeSet::new()));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let records = records_from_csv(&text)?;
    let mut by_cell: BTreeMap<Cell, Vec<RiskRecord>> = BTreeMap::new();
    for r in records {
        by_cell.entry(Cell { n: r.n, replicate: r.seed }).or_default().push(r);
    }
    let mut keep = Vec::new();
    let mut done = BTreeSet::new();
    for (cell, recs) in by_cell {
        let complete = tags.iter().all(|t| recs.iter().filter(|r| &r.estimator == t).count() == 1);
        if complete {
            done.insert(cell);
            keep.extend(recs);
        }
    }
    Ok((keep, done))
}

/// Runs every missing cell with `workers` threads, appending each finished
/// cell to `results.csv` in the output directory, then rewrites the file in
/// canonical `(estimator, n, seed)` order. A complete file is left untouched.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> CliResult<SweepSummary> {
    run_sweep_with_progress(cfg, workers, |_, _| {})
}

/// [`run_sweep`], calling `progress(cell, remaining)` as each cell lands.
pub fn run_sweep_with_progress(cfg: &ExperimentConfig, workers: usize, mut progress: impl FnMut(Cell, usize)) -> CliResult<SweepSummary> {
    let workers = workers.max(1);
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let path = cfg.output.join(RESULTS_FILE);
    let tags = estimator_tags(cfg);
    let (mut records, done) = completed(&path, &tags)?;
    let pending: Vec<Cell> = cells(cfg).into_iter().filter(|c| !done.contains(c)).collect();
    let skipped = done.len();
    if pending.is_empty() {
        return Ok(SweepSummary {
            failed_records: records.iter().filter(|r| r.failed()).count(),
            path,
            computed: 0,
            skipped,
        });
    }
    write_sorted(&path, &mut records)?;
    let teacher = cfg.build_teacher()?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(Cell, CliResult<Vec<RiskRecord>>)>();
    let mut first_error = None;
    let mut landed = 0usize;
    std::thread::scope(|scope| -> CliResult<()> {
        for _ in 0..workers.min(pending.len()) {
            let tx = tx.clone();
            let (next, pending, teacher) = (&next, &pending, &teacher);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&cell) = pending.get(i) else { break };
                let result = evaluate_cell(cfg, teacher, cell);
                if tx.send((cell, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut sink = fs::OpenOptions::new().append(true).open(&path).map_err(|e| CliError::io(&path, e))?;
        for (cell, result) in rx {
            match result {
                Ok(recs) => {
                    let mut lines = String::new();
                    for r in &recs {
                        lines.push_str(&r.to_csv_line());
                        lines.push('\n');
                    }
                    sink.write_all(lines.as_bytes()).map_err(|e| CliError::io(&path, e))?;
                    sink.flush().map_err(|e| CliError::io(&path, e))?;
                    landed += 1;
                    progress(cell, pending.len() - landed);
                    records.extend(recs);
                }
                Err(e) => {
                    // Stop handing out work; cells already running finish.
                    next.store(pending.len(), Ordering::SeqCst);
                    first_error.get_or_insert(e);
                }
            }
        }
        Ok(())
    })?;
    write_sorted(&path, &mut records)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(SweepSummary {
        failed_records: records.iter().filter(|r| r.failed()).count(),
        path,
        computed: pending.len(),
        skipped,
    })
}
