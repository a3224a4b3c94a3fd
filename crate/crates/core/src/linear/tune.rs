use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::{sq_dist, FeatureMap, Kernel};
use super::krr::{gram, solve_dual};
use super::{EstimatorKind, Hyper, LinearEstimator};
use crate::data::Dataset;
use crate::error::{invalid, Result};

/// Candidate values for cross-validated tuning.
///
/// Ridges for the feature kernels are relative to the mean diagonal of the
/// Gram matrix on the training inputs, so one grid fits kernels of any scale.
#[derive(Clone, Debug, PartialEq)]
pub struct TuneGrid {
    pub bandwidths: Vec<f64>,
    pub ridges: Vec<f64>,
    pub ks: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl TuneGrid {
    /// Log-spaced defaults for inputs in `[0, 1]^d` with 5 folds.
    pub fn default_for(d: usize, seed: u64) -> Self {
        let root_d = (d as f64).sqrt();
        Self {
            bandwidths: (-4..=3).map(|e| root_d * 2f64.powi(e)).collect(),
            ridges: (-6..=2).map(|e| 10f64.powi(e)).collect(),
            ks: (0..8).map(|e| 1usize << e).collect(),
            folds: 5,
            seed,
        }
    }
}

/// Outcome of [`tune`].
#[derive(Clone, Debug)]
pub struct Tuned {
    pub estimator: LinearEstimator,
    pub hyper: Hyper,
    pub cv_error: f64,
    /// Every candidate in tie-break order with its cross-validated error.
    pub scores: Vec<(Hyper, f64)>,
}

struct Folds {
    train: Vec<Vec<usize>>,
    valid: Vec<Vec<usize>>,
}

fn make_folds(n: usize, folds: usize, seed: u64) -> Folds {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = vec![Vec::new(); folds];
    let mut valid = vec![Vec::new(); folds];
    for (pos, &i) in perm.iter().enumerate() {
        for (f, (t, v)) in train.iter_mut().zip(valid.iter_mut()).enumerate() {
            if pos % folds == f {
                v.push(i);
            } else {
                t.push(i);
            }
        }
    }
    for t in train.iter_mut().chain(valid.iter_mut()) {
        t.sort_unstable();
    }
    Folds { train, valid }
}

/// Picks the candidate with the smallest `folds`-fold cross-validated squared
/// error and refits it on all of `data`. Candidates are scanned in ascending
/// order (ridge, then bandwidth, or k) and only a strict improvement replaces
/// the incumbent, so ties go to the smaller value.
pub fn tune(kind: EstimatorKind, data: &Dataset, grid: &TuneGrid, features: Option<&FeatureMap>) -> Result<Tuned> {
    if grid.folds < 2 {
        return Err(invalid("cross-validation needs at least 2 folds"));
    }
    if data.len() < grid.folds {
        return Err(invalid(format!("{} points cannot be split into {} folds", data.len(), grid.folds)));
    }
    let folds = make_folds(data.len(), grid.folds, grid.seed);
    let scores = match kind {
        EstimatorKind::KrrRbf => {
            let mut bandwidths = sorted(&grid.bandwidths)?;
            bandwidths.dedup();
            let ridges = sorted(&grid.ridges)?;
            let mut per_bw = Vec::new();
            for &h in &bandwidths {
                let kernel = Kernel::rbf(h)?;
                let g = gram(&kernel, data.inputs(), data.dim());
                per_bw.push((kernel, krr_cv(&g, data.responses(), &folds, &ridges)?));
            }
            let mut out = Vec::new();
            for (r, &ridge) in ridges.iter().enumerate() {
                for (kernel, errs) in &per_bw {
                    out.push((
                        Hyper::Krr {
                            kernel: kernel.clone(),
                            ridge,
                        },
                        errs[r],
                    ));
                }
            }
            out
        }
        EstimatorKind::KrrNtk | EstimatorKind::KrrRf => {
            let map = features.ok_or_else(|| invalid(format!("{kind} needs a feature map")))?;
            if Some(map.kind()) != kind.feature_kind() {
                return Err(invalid(format!("feature map does not match {kind}")));
            }
            let kernel = Kernel::Features(map.clone());
            let g = gram(&kernel, data.inputs(), data.dim());
            let mean_diag = (0..data.len()).map(|i| g[(i, i)]).sum::<f64>() / data.len() as f64;
            let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
            let ridges: Vec<f64> = sorted(&grid.ridges)?.into_iter().map(|r| r * scale).collect();
            let errs = krr_cv(&g, data.responses(), &folds, &ridges)?;
            ridges
                .iter()
                .zip(errs)
                .map(|(&ridge, e)| {
                    (
                        Hyper::Krr {
                            kernel: kernel.clone(),
                            ridge,
                        },
                        e,
                    )
                })
                .collect()
        }
        EstimatorKind::Knn => {
            let min_train = folds.train.iter().map(|t| t.len()).min().unwrap_or(0);
            let mut ks: Vec<usize> = grid.ks.iter().copied().filter(|&k| k >= 1 && k <= min_train).collect();
            ks.sort_unstable();
            ks.dedup();
            if ks.is_empty() {
                return Err(invalid("no neighbour count fits the training folds"));
            }
            let errs = knn_cv(data, &folds, &ks);
            ks.iter().zip(errs).map(|(&k, e)| (Hyper::Knn { k }, e)).collect()
        }
        EstimatorKind::Nw => {
            let bandwidths = sorted(&grid.bandwidths)?;
            bandwidths
                .iter()
                .map(|&h| Ok((Hyper::Nw { bandwidth: h }, generic_cv(data, &folds, &Hyper::Nw { bandwidth: h })?)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut best = 0;
    for (i, (_, e)) in scores.iter().enumerate() {
        if *e < scores[best].1 || !scores[best].1.is_finite() && e.is_finite() {
            best = i;
        }
    }
    let (hyper, cv_error) = scores[best].clone();
    let estimator = hyper.fit(data)?;
    Ok(Tuned {
        estimator,
        hyper,
        cv_error,
        scores,
    })
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(invalid("tuning grid is empty"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("tuning grid values must be positive"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Cross-validated error of KRR for each ridge, given the full Gram matrix.
/// A failed solve scores `+∞`.
fn krr_cv(g: &Mat<f64>, y: &[f64], folds: &Folds, ridges: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    let mut sse = vec![0.0; ridges.len()];
    for (train, valid) in folds.train.iter().zip(&folds.valid) {
        let gt = Mat::<f64>::from_fn(train.len(), train.len(), |i, j| g[(train[i], train[j])]);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (r, &ridge) in ridges.iter().enumerate() {
            match solve_dual(&gt, ridge, &yt) {
                Ok(alpha) => {
                    for &v in valid {
                        let pred: f64 = train.iter().zip(&alpha).map(|(&t, a)| a * g[(v, t)]).sum();
                        sse[r] += (pred - y[v]).powi(2);
                    }
                }
                Err(_) => sse[r] = f64::INFINITY,
            }
        }
    }
    Ok(sse.into_iter().map(|s| s / n as f64).collect())
}

/// Cross-validated error of k-NN for every `k` at once, sharing one sorted
/// neighbour list per validation point.
fn knn_cv(data: &Dataset, folds: &Folds, ks: &[usize]) -> Vec<f64> {
    let y = data.responses();
    let mut sse = vec![0.0; ks.len()];
    let kmax = *ks.last().unwrap_or(&1);
    for (train, valid) in folds.train.iter().zip(&folds.valid) {
        for &v in valid {
            let x = data.point(v);
            let mut keyed: Vec<(f64, usize)> = train.iter().map(|&t| (sq_dist(x, data.point(t)), t)).collect();
            let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kmax < keyed.len() {
                keyed.select_nth_unstable_by(kmax - 1, by_key);
                keyed.truncate(kmax);
            }
            keyed.sort_unstable_by(by_key);
            let mut sum = 0.0;
            let mut next = 0;
            for (j, (_, t)) in keyed.iter().enumerate() {
                sum += y[*t];
                while next < ks.len() && ks[next] == j + 1 {
                    sse[next] += (sum / (j + 1) as f64 - y[v]).powi(2);
                    next += 1;
                }
            }
        }
    }
    sse.into_iter().map(|s| s / data.len() as f64).collect()
}

fn generic_cv(data: &Dataset, folds: &Folds, hyper: &Hyper) -> Result<f64> {
    let mut sse = 0.0;
    for (train, valid) in folds.train.iter().zip(&folds.valid) {
        let model = hyper.fit(&data.subset(train))?;
        for &v in valid {
            sse += (model.predict(data.point(v)) - data.responses()[v]).powi(2);
        }
    }
    Ok(sse / data.len() as f64)
}
