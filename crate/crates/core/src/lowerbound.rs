//! Gaussian bumps as superpositions of sigmoid ridges.
//!
//! With `ψ(x) = ½(σ(x+1) − σ(x−1))`, the truncated integral
//!
//! ```text
//! f_D(x) = 1/(2 D_b N₁(A_D)) ∫_{‖a‖≤D, |b|≤D_b} ψ(h⁻¹[aᵀ(x−c) + b])
//!          · cos(b/h) / (2π h ψ̂(1)) · (2π)^{−d/2} e^{−‖a‖²/2} da db
//! ```
//!
//! approximates `exp(−‖x−c‖²/2h²) / (2 D_b N₁(A_D))`, where `N₁(A_D)` is the
//! standard Gaussian mass of the radius-`D` ball. Discretizing the integral by
//! a product rule gives a finite ridge combination; splitting each `ψ` into
//! its two sigmoids gives atoms `coef · σ(τ(wᵀx + b))` whose weights form a
//! (sub-)probability vector.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::format::fmt_real;
use crate::model::sigmoid;
use crate::quadrature::{adaptive, composite_gauss_legendre};

/// Nodes per Gauss–Legendre panel.
const PANEL_ORDER: usize = 8;

/// Slack allowed on the total atom weight, which equals one only up to the
/// quadrature error.
const WEIGHT_SLACK: f64 = 1e-6;

/// `½(σ(x+1) − σ(x−1))`, evaluated at `−|x|` (ψ is even) so that the tails
/// never suffer cancellation.
pub fn psi(x: f64) -> f64 {
    let t = -x.abs();
    0.5 * (sigmoid(t + 1.0) - sigmoid(t - 1.0))
}

/// `ψ̂(1) = (2π)⁻¹ ∫ e^{−ix} ψ(x) dx = π⁻¹ ∫₀^∞ cos(x) ψ(x) dx`, computed once
/// by adaptive quadrature on `[0, 40]` (the tail beyond is below `e^{−39}`).
pub fn psi_hat_at_one() -> Result<f64> {
    static CACHE: OnceLock<std::result::Result<f64, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| adaptive(|x| x.cos() * psi(x), 0.0, 40.0, 1e-13).map(|v| v / PI).map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Quadrature)
}

/// `exp(−‖x − c‖² / 2h²)`.
pub fn gauss_bump(center: &[f64], h: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * h * h)).exp()
}

/// `Γ(d/2)` for a positive integer `d`.
fn gamma_half(d: usize) -> f64 {
    let mut g = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while 2.0 * x < d as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Standard Gaussian mass of the radius-`r` ball in `R^d`, from the radial
/// (chi) density.
pub fn ball_mass(d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if r <= 0.0 {
        return Ok(0.0);
    }
    let norm = 2f64.powf(d as f64 / 2.0 - 1.0) * gamma_half(d);
    let k = d as i32 - 1;
    let integral = adaptive(|p| p.powi(k) * (-0.5 * p * p).exp(), 0.0, r, 1e-15)?;
    Ok((integral / norm).min(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpApproxConfig {
    /// Input dimension, at most 3.
    pub d: usize,
    /// Bump bandwidth `h`.
    pub h: f64,
    pub center: Vec<f64>,
    /// Truncation radius of the `a`-ball.
    pub d_w: f64,
    /// `D_b = db_factor · d_w`; defaults to `√(2d) + 1`.
    pub db_factor: f64,
    /// Gauss–Legendre panels for the radial `a` direction (and the angular
    /// resolution for `d ≥ 2`).
    pub quad_a: usize,
    /// Gauss–Legendre panels over `b ∈ [−D_b, D_b]`.
    pub quad_b: usize,
    /// Evaluation points per axis on `[0, 1]`.
    pub grid: usize,
}

impl BumpApproxConfig {
    /// Panels about `2h` wide in both directions, and a 512-point grid in one
    /// dimension (32 per axis otherwise).
    pub fn new(d: usize, h: f64, center: Vec<f64>, d_w: f64) -> Self {
        let db_factor = (2.0 * d as f64).sqrt() + 1.0;
        let d_b = db_factor * d_w;
        Self {
            d,
            h,
            center,
            d_w,
            db_factor,
            quad_a: ((d_w / h).ceil() as usize).max(4),
            quad_b: ((d_b / h).ceil() as usize).max(4),
            grid: if d == 1 { 512 } else { 32 },
        }
    }

    /// Same configuration with both quadrature resolutions multiplied by `k`.
    pub fn refined(&self, k: usize) -> Self {
        Self {
            quad_a: self.quad_a * k,
            quad_b: self.quad_b * k,
            ..self.clone()
        }
    }

    pub fn d_b(&self) -> f64 {
        self.db_factor * self.d_w
    }

    /// `τ = h⁻¹ (2√d + 1) D_w`.
    pub fn tau(&self) -> f64 {
        (2.0 * (self.d as f64).sqrt() + 1.0) * self.d_w / self.h
    }

    /// `C = (2√d + 1) D_w / (π h |ψ̂(1)|)`.
    pub fn c_bound(&self) -> Result<f64> {
        Ok((2.0 * (self.d as f64).sqrt() + 1.0) * self.d_w / (PI * self.h * psi_hat_at_one()?.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(invalid(format!("bump approximation supports d ≤ 3, got d = {}", self.d)));
        }
        if self.center.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.center.len(),
            });
        }
        if self.center.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid("bump center must lie in [0, 1]^d"));
        }
        if !(self.h > 0.0) || !(self.d_w > 0.0) || !(self.db_factor > 0.0) {
            return Err(invalid("h, D_w and the D_b factor must be positive"));
        }
        if self.quad_a < 4 || self.quad_b < 4 {
            return Err(invalid("quadrature resolutions must be at least 4"));
        }
        if self.grid < 2 {
            return Err(invalid("evaluation grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    /// Grid points, row-major, each axis `i/(grid−1)`.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = (0..self.grid).map(|i| i as f64 / (self.grid - 1) as f64).collect();
        let mut pts = vec![vec![]];
        for _ in 0..self.d {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        pts
    }
}

/// `weight · ψ(h⁻¹[aᵀ(x − c) + b])`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeTerm {
    pub weight: f64,
    pub direction: Vec<f64>,
    pub offset: f64,
}

/// `lambda · coef · σ(τ(wᵀx + b))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub lambda: f64,
    pub coef: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

/// Extremes of the atom parameters, checked against the dictionary bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomCheck {
    pub max_coef: f64,
    pub max_w_norm: f64,
    pub max_offset: f64,
    pub lambda_sum: f64,
}

#[derive(Clone, Debug)]
pub struct RidgeCombination {
    pub terms: Vec<RidgeTerm>,
    pub atoms: Vec<Atom>,
    /// `1 / (2 D_b N₁(A_{D_w}))`, the factor applied to the bump.
    pub scale: f64,
    pub psi_hat: f64,
    pub tau: f64,
    pub c_bound: f64,
    pub check: AtomCheck,
    center: Vec<f64>,
    h: f64,
}

impl RidgeCombination {
    /// Sum over ridge terms.
    pub fn eval_terms(&self, x: &[f64]) -> f64 {
        let shifted: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let inv_h = 1.0 / self.h;
        self.terms
            .iter()
            .map(|t| {
                let u: f64 = t.direction.iter().zip(&shifted).map(|(a, s)| a * s).sum::<f64>() + t.offset;
                t.weight * psi(u * inv_h)
            })
            .sum()
    }

    /// Sum over sigmoid atoms; equals [`RidgeCombination::eval_terms`] up to
    /// rounding.
    pub fn eval_atoms(&self, x: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let u: f64 = a.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + a.b;
                a.lambda * a.coef * sigmoid(self.tau * u)
            })
            .sum()
    }

    /// `scale · exp(−‖x − c‖²/2h²)`, the target of the combination.
    pub fn target(&self, x: &[f64]) -> f64 {
        self.scale * gauss_bump(&self.center, self.h, x)
    }
}

/// Quadrature nodes `(a, probability weight)` for the standard Gaussian
/// restricted to the radius-`D` ball and renormalized by its mass.
fn a_nodes(cfg: &BumpApproxConfig, mass: f64) -> Vec<(Vec<f64>, f64)> {
    let dens = |r: f64| (2.0 * PI).powf(-(cfg.d as f64) / 2.0) * (-0.5 * r * r).exp() / mass;
    let d = cfg.d_w;
    match cfg.d {
        1 => {
            let (x, w) = composite_gauss_legendre(-d, d, cfg.quad_a, PANEL_ORDER);
            x.into_iter().zip(w).map(|(a, w)| (vec![a], w * dens(a))).collect()
        }
        2 => {
            let (r, wr) = composite_gauss_legendre(0.0, d, cfg.quad_a, PANEL_ORDER);
            let n_theta = 2 * PANEL_ORDER * cfg.quad_a;
            let dtheta = 2.0 * PI / n_theta as f64;
            let mut out = Vec::with_capacity(r.len() * n_theta);
            for (ri, wi) in r.iter().zip(&wr) {
                for k in 0..n_theta {
                    let th = k as f64 * dtheta;
                    out.push((vec![ri * th.cos(), ri * th.sin()], wi * ri * dtheta * dens(*ri)));
                }
            }
            out
        }
        _ => {
            let (r, wr) = composite_gauss_legendre(0.0, d, cfg.quad_a, PANEL_ORDER);
            let (u, wu) = composite_gauss_legendre(-1.0, 1.0, cfg.quad_a, PANEL_ORDER);
            let n_phi = 2 * PANEL_ORDER * cfg.quad_a;
            let dphi = 2.0 * PI / n_phi as f64;
            let mut out = Vec::with_capacity(r.len() * u.len() * n_phi);
            for (ri, wi) in r.iter().zip(&wr) {
                for (uj, wj) in u.iter().zip(&wu) {
                    let s = (1.0 - uj * uj).sqrt();
                    for k in 0..n_phi {
                        let ph = k as f64 * dphi;
                        let a = vec![ri * s * ph.cos(), ri * s * ph.sin(), ri * uj];
                        out.push((a, wi * ri * ri * wj * dphi * dens(*ri)));
                    }
                }
            }
            out
        }
    }
}

/// Discretizes the truncated integral on the product rule and splits every
/// ridge into its two sigmoid atoms. Fails if an atom leaves the dictionary
/// (`|coef| ≤ 2C`, `‖w‖ ≤ 1`, `|b| ≤ 2`) or the atom weights exceed one.
pub fn build_ridge_approx(cfg: &BumpApproxConfig) -> Result<RidgeCombination> {
    cfg.validate()?;
    let psi_hat = psi_hat_at_one()?;
    let mass = ball_mass(cfg.d, cfg.d_w)?;
    let d_b = cfg.d_b();
    let scale = 1.0 / (2.0 * d_b * mass);
    let tau = cfg.tau();
    let c_bound = cfg.c_bound()?;
    let h = cfg.h;

    let a_rule = a_nodes(cfg, mass);
    let (bs, wbs) = composite_gauss_legendre(-d_b, d_b, cfg.quad_b, PANEL_ORDER);
    let mut terms = Vec::with_capacity(a_rule.len() * bs.len());
    let mut atoms = Vec::with_capacity(2 * a_rule.len() * bs.len());
    let mut check = AtomCheck {
        max_coef: 0.0,
        max_w_norm: 0.0,
        max_offset: 0.0,
        lambda_sum: 0.0,
    };
    for (a, pa) in &a_rule {
        let w: Vec<f64> = a.iter().map(|v| v / (h * tau)).collect();
        let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ac: f64 = a.iter().zip(&cfg.center).map(|(a, c)| a * c).sum();
        for (b, wb) in bs.iter().zip(&wbs) {
            let p = pa * wb / (2.0 * d_b);
            let amp = (b / h).cos() / (2.0 * PI * h * psi_hat);
            terms.push(RidgeTerm {
                weight: p * amp,
                direction: a.clone(),
                offset: *b,
            });
            for (shift, sign) in [(h, 1.0), (-h, -1.0)] {
                let atom = Atom {
                    lambda: 0.5 * p,
                    coef: sign * amp,
                    w: w.clone(),
                    b: (b - ac + shift) / (h * tau),
                };
                check.max_coef = check.max_coef.max(atom.coef.abs());
                check.max_w_norm = check.max_w_norm.max(w_norm);
                check.max_offset = check.max_offset.max(atom.b.abs());
                check.lambda_sum += atom.lambda;
                atoms.push(atom);
            }
        }
    }
    if check.max_coef > 2.0 * c_bound {
        return Err(Error::Assumption(format!(
            "atom coefficient {} exceeds 2C = {}",
            check.max_coef,
            2.0 * c_bound
        )));
    }
    if check.max_w_norm > 1.0 {
        return Err(Error::Assumption(format!("atom direction norm {} exceeds 1", check.max_w_norm)));
    }
    if check.max_offset > 2.0 {
        return Err(Error::Assumption(format!("atom offset {} exceeds 2", check.max_offset)));
    }
    if check.lambda_sum > 1.0 + WEIGHT_SLACK {
        return Err(Error::Assumption(format!("atom weights sum to {}", check.lambda_sum)));
    }
    Ok(RidgeCombination {
        terms,
        atoms,
        scale,
        psi_hat,
        tau,
        c_bound,
        check,
        center: cfg.center.clone(),
        h,
    })
}

/// `max_x |approx(x) − scale · bump(x)|` over the evaluation grid.
pub fn sup_error(cfg: &BumpApproxConfig, scale: f64, approx: impl Fn(&[f64]) -> f64) -> f64 {
    cfg.grid_points()
        .iter()
        .map(|x| (approx(x) - scale * gauss_bump(&cfg.center, cfg.h, x)).abs())
        .fold(0.0, f64::max)
}

/// Measured error of one approximation, relative to the scaled amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaSummary {
    pub d: usize,
    pub h: f64,
    pub d_w: f64,
    pub d_b: f64,
    pub quad_a: usize,
    pub quad_b: usize,
    pub terms: usize,
    pub atoms: usize,
    pub tau: f64,
    pub c_bound: f64,
    pub scale: f64,
    pub sup_error: f64,
    pub relative_error: f64,
    pub check: AtomCheck,
}

impl fmt::Display for LemmaSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d = {}", self.d)?;
        writeln!(f, "h = {}", fmt_real(self.h))?;
        writeln!(f, "D_w = {}", fmt_real(self.d_w))?;
        writeln!(f, "D_b = {}", fmt_real(self.d_b))?;
        writeln!(f, "quad_a = {}", self.quad_a)?;
        writeln!(f, "quad_b = {}", self.quad_b)?;
        writeln!(f, "terms = {}", self.terms)?;
        writeln!(f, "atoms = {}", self.atoms)?;
        writeln!(f, "tau = {}", fmt_real(self.tau))?;
        writeln!(f, "C = {}", fmt_real(self.c_bound))?;
        writeln!(f, "scale = {}", fmt_real(self.scale))?;
        writeln!(f, "sup_error = {}", fmt_real(self.sup_error))?;
        writeln!(f, "relative_error = {}", fmt_real(self.relative_error))?;
        writeln!(f, "max_atom_coef = {}", fmt_real(self.check.max_coef))?;
        writeln!(f, "max_w_norm = {}", fmt_real(self.check.max_w_norm))?;
        writeln!(f, "max_offset = {}", fmt_real(self.check.max_offset))?;
        writeln!(f, "lambda_sum = {}", fmt_real(self.check.lambda_sum))
    }
}

/// Builds the combination and measures its error through the ridge-term form,
/// returning the combination, the summary and a CSV of
/// `x…,bump,approx,error` on the grid (bump and approximation both scaled).
pub fn lemma_report(cfg: &BumpApproxConfig) -> Result<(RidgeCombination, LemmaSummary, String)> {
    let comb = build_ridge_approx(cfg)?;
    let mut csv = String::new();
    let cols: Vec<String> = (1..=cfg.d).map(|i| format!("x{i}")).collect();
    csv.push_str(&format!("{},bump,approx,error\n", cols.join(",")));
    let mut sup = 0.0f64;
    for x in cfg.grid_points() {
        let target = comb.target(&x);
        let approx = comb.eval_terms(&x);
        let err = approx - target;
        sup = sup.max(err.abs());
        let xs: Vec<String> = x.iter().map(|v| fmt_real(*v)).collect();
        csv.push_str(&format!("{},{},{},{}\n", xs.join(","), fmt_real(target), fmt_real(approx), fmt_real(err)));
    }
    let summary = LemmaSummary {
        d: cfg.d,
        h: cfg.h,
        d_w: cfg.d_w,
        d_b: cfg.d_b(),
        quad_a: cfg.quad_a,
        quad_b: cfg.quad_b,
        terms: comb.terms.len(),
        atoms: comb.atoms.len(),
        tau: comb.tau,
        c_bound: comb.c_bound,
        scale: comb.scale,
        sup_error: sup,
        relative_error: sup / comb.scale,
        check: comb.check,
    };
    Ok((comb, summary, csv))
}
