use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use super::kernel::{sq_dist, FeatureKind, FeatureMap, Kernel};
use crate::data::Dataset;
use crate::error::{invalid, parse_err, Error, Result};
use crate::format::{fmt_real, parse_reals, Header};

/// Fitted kernel ridge regression `f̂(x) = αᵀ k(x)` with `(K + λI) α = Y`.
#[derive(Clone, Debug)]
pub struct KrrModel {
    kernel: Kernel,
    ridge: f64,
    d: usize,
    inputs: Vec<f64>,
    dual: Vec<f64>,
    /// `Φᵀα` for feature kernels, so prediction costs one feature evaluation.
    primal: Option<Vec<f64>>,
}

/// Gram matrix of `kernel` on the rows of `x` (row-major, dimension `d`).
pub fn gram(kernel: &Kernel, x: &[f64], d: usize) -> Mat<f64> {
    let n = x.len() / d;
    let row = |i: usize| &x[i * d..(i + 1) * d];
    match kernel {
        Kernel::Rbf { bandwidth } => {
            let c = -1.0 / (2.0 * bandwidth * bandwidth);
            let mut g = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                g[(i, i)] = 1.0;
                for j in 0..i {
                    let v = (c * sq_dist(row(i), row(j))).exp();
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            g
        }
        Kernel::Features(map) => {
            let phi = feature_matrix(map, x, d);
            &phi * phi.transpose()
        }
    }
}

fn feature_matrix(map: &FeatureMap, x: &[f64], d: usize) -> Mat<f64> {
    let n = x.len() / d;
    let p = map.dim();
    let mut phi = Mat::<f64>::zeros(n, p);
    let mut buf = vec![0.0; p];
    for i in 0..n {
        map.features_into(&x[i * d..(i + 1) * d], &mut buf);
        for (j, v) in buf.iter().enumerate() {
            phi[(i, j)] = *v;
        }
    }
    phi
}

/// Solves `(G + ridge·I) α = y` by Cholesky.
pub fn solve_dual(gram: &Mat<f64>, ridge: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    let mut a = gram.clone();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Solve(format!("Cholesky factorization failed: {e:?}")))?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
    let sol = llt.solve(&rhs);
    let alpha: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve("non-finite dual coefficients".into()));
    }
    Ok(alpha)
}

impl KrrModel {
    pub fn fit(data: &Dataset, kernel: Kernel, ridge: f64) -> Result<Self> {
        let g = gram(&kernel, data.inputs(), data.dim());
        Self::fit_with_gram(data, kernel, ridge, &g)
    }

    /// Fit reusing a precomputed Gram matrix of `data`'s inputs.
    pub fn fit_with_gram(data: &Dataset, kernel: Kernel, ridge: f64, gram: &Mat<f64>) -> Result<Self> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(invalid(format!("ridge must be positive, got {ridge}")));
        }
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        if let Kernel::Features(map) = &kernel {
            if map.schedule().d != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: map.schedule().d,
                    got: data.dim(),
                });
            }
        }
        let dual = solve_dual(gram, ridge, data.responses())?;
        Ok(Self::assemble(kernel, ridge, data.dim(), data.inputs().to_vec(), dual))
    }

    fn assemble(kernel: Kernel, ridge: f64, d: usize, inputs: Vec<f64>, dual: Vec<f64>) -> Self {
        let primal = match &kernel {
            Kernel::Features(map) => {
                let mut w = vec![0.0; map.dim()];
                let mut buf = vec![0.0; map.dim()];
                for (x, a) in inputs.chunks_exact(d).zip(&dual) {
                    map.features_into(x, &mut buf);
                    for (wj, fj) in w.iter_mut().zip(&buf) {
                        *wj += a * fj;
                    }
                }
                Some(w)
            }
            Kernel::Rbf { .. } => None,
        };
        Self {
            kernel,
            ridge,
            d,
            inputs,
            dual,
            primal,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dual(&self) -> &[f64] {
        &self.dual
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match (&self.kernel, &self.primal) {
            (Kernel::Features(map), Some(w)) => map.features(x).iter().zip(w).map(|(f, w)| f * w).sum(),
            (Kernel::Rbf { bandwidth }, _) => {
                let c = -1.0 / (2.0 * bandwidth * bandwidth);
                self.inputs
                    .chunks_exact(self.d)
                    .zip(&self.dual)
                    .map(|(xi, a)| a * (c * sq_dist(x, xi)).exp())
                    .sum()
            }
            (Kernel::Features(_), None) => unreachable!("feature kernels always carry primal weights"),
        }
    }

    /// Kernel description, `ridge`, `n`, then for feature kernels the `W₀`
    /// blocks, then one line per training point: its coordinates and its dual
    /// coefficient.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# ngdrate krr\n");
        out.push_str(&self.kernel.to_header());
        out.push_str(&format!("ridge = {}\n", fmt_real(self.ridge)));
        out.push_str(&format!("input_dim = {}\n", self.d));
        out.push_str(&format!("n = {}\n", self.dual.len()));
        if let Kernel::Features(map) = &self.kernel {
            crate::model::push_blocks(&mut out, map.init());
        }
        for (x, a) in self.inputs.chunks_exact(self.d).zip(&self.dual) {
            let mut fields: Vec<String> = x.iter().map(|v| fmt_real(*v)).collect();
            fields.push(fmt_real(*a));
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = Header::parse(text)?;
        let (_, tag) = header.get("kernel")?;
        let ridge: f64 = header.get_parsed("ridge")?;
        let d: usize = header.get_parsed("input_dim")?;
        let n: usize = header.get_parsed("n")?;
        let mut body = header.body();
        let kernel = match tag {
            "rbf" => Kernel::rbf(header.get_parsed("bandwidth")?)?,
            "ntk" | "rf" => {
                let (schedule, width) = crate::model::schedule_from_header(&header)?;
                if body.len() < width {
                    return Err(parse_err(header.last_line(), "missing feature-map blocks"));
                }
                let init = crate::model::blocks_from_body(&body[..width], schedule.d)?;
                body = &body[width..];
                let kind = if tag == "ntk" { FeatureKind::Tangent } else { FeatureKind::Random };
                Kernel::Features(FeatureMap::new(kind, schedule, init)?)
            }
            other => {
                let (line, _) = header.get("kernel")?;
                return Err(parse_err(line, format!("unknown kernel '{other}'")));
            }
        };
        if body.len() != n {
            return Err(parse_err(header.last_line(), format!("expected {n} training lines, found {}", body.len())));
        }
        let mut inputs = Vec::with_capacity(n * d);
        let mut dual = Vec::with_capacity(n);
        for (line_no, line) in body {
            let vals = parse_reals(line, *line_no)?;
            if vals.len() != d + 1 {
                return Err(parse_err(*line_no, format!("expected {} values, found {}", d + 1, vals.len())));
            }
            inputs.extend_from_slice(&vals[..d]);
            dual.push(vals[d]);
        }
        Ok(Self::assemble(kernel, ridge, d, inputs, dual))
    }
}
