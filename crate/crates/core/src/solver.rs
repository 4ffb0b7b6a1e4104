//! Minimizer of the IPCW-weighted regularized empirical risk over the RKHS.
//!
//! The decision function is kept in representer form `f = sum_i alpha_i k(z_i, .)`.
//! With per-sample loss scales `c_i = w_i / n`, the penalized problem
//!
//! ```text
//! min_alpha  mu alpha'K alpha + sum_i c_i L(y_i, (K alpha)_i)
//! ```
//!
//! is solved through its Fenchel dual in `gamma = 2 mu alpha`,
//!
//! ```text
//! max_gamma  -gamma'K gamma / (4 mu) + sum_i gamma_i y_i - sum_i q_i gamma_i^2,
//! ```
//!
//! a concave quadratic over a box that depends only on the loss and `c_i`
//! (`q_i = 1/(4 c_i)` for the squared loss, 0 otherwise). Exact coordinate
//! ascent on the dual is run until the duality gap drops below `tol`; the gap
//! is the reported optimality certificate. The norm-constrained problem
//! `min risk s.t. alpha'K alpha <= 1/lambda` is solved by searching the
//! multiplier `mu` for which the penalized solution meets the constraint.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ResponseTransform};
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::losses::{self, clip, default_clip_bound, LossKind, LossSpec};
use crate::rng::rng_from_seed;

pub const MODEL_FORMAT: &str = "censored-svm-model/1";

/// Exact recomputation of `K gamma` every this many sweeps.
const REFRESH_EVERY: usize = 16;
const MU_MIN: f64 = 1e-10;
const MU_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// `lambda ||f||^2 + risk`.
    Penalized,
    /// `risk` subject to `||f||^2 <= 1 / lambda`.
    Constrained,
}

impl std::str::FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penalized" => Ok(Self::Penalized),
            "constrained" => Ok(Self::Constrained),
            _ => Err(Error::Domain(format!("unknown form '{s}'"))),
        }
    }
}

/// Solver settings. `max_iters` counts full sweeps over the active
/// coordinates (summed over inner solves for the constrained form); `seed`
/// fixes the per-sweep coordinate order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub form: Form,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { form: Form::Penalized, max_iters: 50_000, tol: 1e-6, seed: 0 }
    }
}

impl FitConfig {
    pub fn with_form(mut self, form: Form) -> Self {
        self.form = form;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Domain("tol must be positive and max_iters nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Objective of the solved form: penalized objective, or the weighted
    /// risk for the constrained form.
    pub objective: f64,
    pub risk: f64,
    pub norm_sq: f64,
    pub iterations: usize,
    /// Duality gap (penalized) or gap plus complementary slackness
    /// `mu (1/lambda - ||f||^2)` (constrained).
    pub certificate: f64,
    pub converged: bool,
    /// Multiplier of the penalized problem that was solved last.
    pub multiplier: f64,
    /// Per-sweep `(best primal objective so far, dual objective)` of the last
    /// inner solve.
    #[serde(skip)]
    pub history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSvmModel {
    pub format: String,
    pub kernel: KernelSpec,
    pub loss: LossSpec,
    pub transform: ResponseTransform,
    pub form: Form,
    pub lambda: f64,
    pub clip_m: Option<f64>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub support_points: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl CensoredSvmModel {
    pub fn dim(&self) -> usize {
        self.support_points.first().map_or(self.feature_names.len(), Vec::len)
    }

    pub fn predict(&self, z: &[f64], clipped: bool) -> Result<f64> {
        predict(self, z, clipped)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Schema(format!("unsupported model format '{}'", m.format)));
        }
        if m.alpha.len() != m.support_points.len() {
            return Err(Error::Schema("alpha and support points differ in length".into()));
        }
        Ok(m)
    }
}

/// The dual box `[lo, hi]` and curvature `q` for one sample.
#[derive(Debug, Clone, Copy)]
struct Coord {
    lo: f64,
    hi: f64,
    q: f64,
}

struct Problem<'a> {
    gram: &'a DMatrix<f64>,
    y: &'a [f64],
    c: Vec<f64>,
    kind: LossKind,
    coords: Vec<Coord>,
    active: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(gram: &'a DMatrix<f64>, y: &'a [f64], c: Vec<f64>, kind: LossKind) -> Self {
        let coords: Vec<Coord> = y
            .iter()
            .zip(&c)
            .map(|(&yi, &ci)| match kind {
                _ if ci == 0.0 => Coord { lo: 0.0, hi: 0.0, q: 0.0 },
                LossKind::Absolute => Coord { lo: -ci, hi: ci, q: 0.0 },
                LossKind::Quantile { alpha } => Coord { lo: -ci * (1.0 - alpha), hi: ci * alpha, q: 0.0 },
                LossKind::Hinge if yi > 0.0 => Coord { lo: 0.0, hi: ci, q: 0.0 },
                LossKind::Hinge => Coord { lo: -ci, hi: 0.0, q: 0.0 },
                LossKind::Squared => Coord { lo: f64::NEG_INFINITY, hi: f64::INFINITY, q: 0.25 / ci },
            })
            .collect();
        let active = (0..y.len()).filter(|&i| c[i] > 0.0).collect();
        Self { gram, y, c, kind, coords, active }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn risk(&self, f: &[f64]) -> f64 {
        self.active
            .iter()
            .map(|&i| self.c[i] * losses::value(self.kind, self.y[i], f[i]))
            .sum()
    }

    /// `(primal, dual)` at `gamma` for multiplier `mu`.
    fn objectives(&self, gamma: &[f64], kg: &[f64], mu: f64) -> (f64, f64) {
        let quad: f64 = self.active.iter().map(|&i| gamma[i] * kg[i]).sum();
        let f: Vec<f64> = kg.iter().map(|v| v / (2.0 * mu)).collect();
        let primal = quad / (4.0 * mu) + self.risk(&f);
        let lin: f64 = self
            .active
            .iter()
            .map(|&i| gamma[i] * self.y[i] - self.coords[i].q * gamma[i] * gamma[i])
            .sum();
        (primal, lin - quad / (4.0 * mu))
    }

    fn refresh(&self, gamma: &[f64], kg: &mut [f64]) {
        kg.iter_mut().for_each(|v| *v = 0.0);
        for &j in &self.active {
            if gamma[j] != 0.0 {
                let col = self.gram.column(j);
                for (v, k) in kg.iter_mut().zip(col.iter()) {
                    *v += gamma[j] * k;
                }
            }
        }
    }
}

struct InnerResult {
    sweeps: usize,
    gap: f64,
    history: Vec<(f64, f64)>,
}

/// Coordinate ascent on the dual for a fixed multiplier, warm-started from
/// `gamma`.
fn solve_dual(
    prob: &Problem<'_>,
    mu: f64,
    gamma: &mut [f64],
    tol: f64,
    max_sweeps: usize,
    seed: u64,
) -> InnerResult {
    let n = prob.n();
    let mut kg = vec![0.0; n];
    prob.refresh(gamma, &mut kg);
    let mut order = prob.active.clone();
    let mut rng = rng_from_seed(seed);
    let mut history = Vec::new();
    let mut best = f64::INFINITY;

    let (mut primal, mut dual) = prob.objectives(gamma, &kg, mu);
    let mut sweeps = 0;
    while primal - dual > tol && sweeps < max_sweeps {
        order.shuffle(&mut rng);
        for &i in &order {
            let kii = prob.gram[(i, i)];
            let Coord { lo, hi, q } = prob.coords[i];
            let g = kg[i] - kii * gamma[i];
            let a = kii / (2.0 * mu) + 2.0 * q;
            let b = prob.y[i] - g / (2.0 * mu);
            let target = if a > 0.0 {
                b / a
            } else if b > 0.0 {
                hi
            } else if b < 0.0 {
                lo
            } else {
                gamma[i]
            };
            let new = target.clamp(lo, hi);
            let delta = new - gamma[i];
            if delta != 0.0 {
                gamma[i] = new;
                let col = prob.gram.column(i);
                for (v, k) in kg.iter_mut().zip(col.iter()) {
                    *v += delta * k;
                }
            }
        }
        sweeps += 1;
        if sweeps % REFRESH_EVERY == 0 {
            prob.refresh(gamma, &mut kg);
        }
        (primal, dual) = prob.objectives(gamma, &kg, mu);
        best = best.min(primal);
        history.push((best, dual));
    }
    prob.refresh(gamma, &mut kg);
    let (p, d) = prob.objectives(gamma, &kg, mu);
    InnerResult { sweeps, gap: (p - d).max(0.0), history }
}

struct Solution {
    alpha: Vec<f64>,
    diagnostics: Diagnostics,
}

fn alpha_from(gamma: &[f64], mu: f64) -> Vec<f64> {
    gamma.iter().map(|g| g / (2.0 * mu)).collect()
}

fn norm_sq(gram: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut s = 0.0;
    for j in 0..n {
        if alpha[j] == 0.0 {
            continue;
        }
        let col = gram.column(j);
        let kj: f64 = (0..n).map(|i| col[i] * alpha[i]).sum();
        s += alpha[j] * kj;
    }
    s.max(0.0)
}

fn train_values(gram: &DMatrix<f64>, alpha: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    let mut f = vec![0.0; n];
    for j in 0..n {
        if alpha[j] != 0.0 {
            let col = gram.column(j);
            for i in 0..n {
                f[i] += alpha[j] * col[i];
            }
        }
    }
    f
}

fn solve_penalized(prob: &Problem<'_>, lambda: f64, cfg: &FitConfig) -> Solution {
    let mut gamma = vec![0.0; prob.n()];
    let r = solve_dual(prob, lambda, &mut gamma, cfg.tol, cfg.max_iters, cfg.seed);
    let alpha = alpha_from(&gamma, lambda);
    let nsq = norm_sq(prob.gram, &alpha);
    let risk = prob.risk(&train_values(prob.gram, &alpha));
    Solution {
        alpha,
        diagnostics: Diagnostics {
            objective: lambda * nsq + risk,
            risk,
            norm_sq: nsq,
            iterations: r.sweeps,
            certificate: r.gap,
            converged: r.gap <= cfg.tol,
            multiplier: lambda,
            history: r.history,
        },
    }
}

struct Probe {
    mu: f64,
    gamma: Vec<f64>,
    norm_sq: f64,
    gap: f64,
    history: Vec<(f64, f64)>,
}

fn solve_constrained(prob: &Problem<'_>, lambda: f64, cfg: &FitConfig) -> Solution {
    let bound = 1.0 / lambda;
    let mut sweeps_left = cfg.max_iters;
    let mut total_sweeps = 0;
    let mut warm = vec![0.0; prob.n()];
    let probe = |mu: f64, warm: &mut Vec<f64>, sweeps_left: &mut usize, total: &mut usize| -> Probe {
        let mut gamma = warm.clone();
        let r = solve_dual(prob, mu, &mut gamma, cfg.tol, (*sweeps_left).max(1), cfg.seed);
        *sweeps_left = sweeps_left.saturating_sub(r.sweeps);
        *total += r.sweeps;
        warm.clone_from(&gamma);
        let nsq = norm_sq(prob.gram, &alpha_from(&gamma, mu));
        Probe { mu, gamma, norm_sq: nsq, gap: r.gap, history: r.history }
    };

    // Bracket the multiplier: `lo` violates the bound, `hi` satisfies it.
    let first = probe(lambda, &mut warm, &mut sweeps_left, &mut total_sweeps);
    let (mut lo, mut hi): (Option<Probe>, Probe);
    if first.norm_sq > bound {
        let mut cur = first;
        loop {
            let next = probe((cur.mu * 10.0).min(MU_MAX), &mut warm, &mut sweeps_left, &mut total_sweeps);
            if next.norm_sq <= bound || next.mu >= MU_MAX {
                lo = Some(cur);
                hi = next;
                break;
            }
            cur = next;
        }
    } else {
        let mut cur = first;
        loop {
            if cur.mu <= MU_MIN {
                lo = None;
                hi = cur;
                break;
            }
            let next = probe((cur.mu / 10.0).max(MU_MIN), &mut warm, &mut sweeps_left, &mut total_sweeps);
            if next.norm_sq > bound {
                lo = Some(next);
                hi = cur;
                break;
            }
            cur = next;
        }
    }

    // Illinois regula falsi on h(log mu) = log ||f_mu||^2 - log bound.
    if let Some(mut l) = lo.take() {
        let h = |p: &Probe| p.norm_sq.max(1e-300).ln() - bound.ln();
        let (mut hl, mut hh) = (h(&l), h(&hi));
        let mut side = 0i8;
        for _ in 0..100 {
            if (hi.mu / l.mu - 1.0) < 1e-10 || hh.abs() < 1e-10 || sweeps_left == 0 {
                break;
            }
            let (xl, xh) = (l.mu.ln(), hi.mu.ln());
            let mut x = if hl.is_finite() && hh.is_finite() && hl != hh {
                xh - hh * (xh - xl) / (hh - hl)
            } else {
                0.5 * (xl + xh)
            };
            if !(x > xl.min(xh) && x < xl.max(xh)) {
                x = 0.5 * (xl + xh);
            }
            warm.clone_from(if side >= 0 { &hi.gamma } else { &l.gamma });
            let p = probe(x.exp(), &mut warm, &mut sweeps_left, &mut total_sweeps);
            let hp = h(&p);
            if p.norm_sq <= bound {
                hi = p;
                hh = hp;
                if side == 1 {
                    hl *= 0.5;
                }
                side = 1;
            } else {
                l = p;
                hl = hp;
                if side == -1 {
                    hh *= 0.5;
                }
                side = -1;
            }
        }
    }

    let mu = hi.mu;
    let mut alpha = alpha_from(&hi.gamma, mu);
    let mut nsq = norm_sq(prob.gram, &alpha);
    if nsq > bound {
        let s = (bound / nsq).sqrt();
        alpha.iter_mut().for_each(|a| *a *= s);
        nsq = norm_sq(prob.gram, &alpha);
    }
    let risk = prob.risk(&train_values(prob.gram, &alpha));
    let slack = if lo_was_active(mu) { mu * (bound - nsq).max(0.0) } else { 0.0 };
    let certificate = hi.gap + slack;
    Solution {
        alpha,
        diagnostics: Diagnostics {
            objective: risk,
            risk,
            norm_sq: nsq,
            iterations: total_sweeps,
            certificate,
            converged: certificate <= cfg.tol,
            multiplier: mu,
            history: hi.history,
        },
    }
}

/// At the smallest multiplier tried the constraint is treated as inactive
/// and carries no slackness term.
fn lo_was_active(mu: f64) -> bool {
    mu > MU_MIN
}

fn responses(data: &Dataset, transform: ResponseTransform) -> Vec<f64> {
    data.samples().iter().map(|s| transform.apply(s.u)).collect()
}

/// Fits the model given a precomputed Gram matrix of `data`'s covariates.
#[allow(clippy::too_many_arguments)]
pub fn fit_with_gram(
    data: &Dataset,
    gram: &DMatrix<f64>,
    weights: &[f64],
    transform: ResponseTransform,
    loss: LossSpec,
    kernel: KernelSpec,
    lambda: f64,
    config: &FitConfig,
) -> Result<CensoredSvmModel> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    config.validate()?;
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: gram.nrows() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Domain("weights must be finite and nonnegative".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Gram entry".into()));
    }
    let y = responses(data, transform);
    for &yi in &y {
        loss.check_response(yi)?;
    }
    let c: Vec<f64> = weights.iter().map(|w| w / n as f64).collect();
    let prob = Problem::new(gram, &y, c, loss.kind);
    let sol = match config.form {
        Form::Penalized => solve_penalized(&prob, lambda, config),
        Form::Constrained => solve_constrained(&prob, lambda, config),
    };

    let clip_m = match loss.clip_m {
        Some(m) => Some(m),
        None => {
            let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            Some(default_clip_bound(&loss, lo, hi))
        }
    };
    Ok(CensoredSvmModel {
        format: MODEL_FORMAT.to_string(),
        kernel,
        loss,
        transform,
        form: config.form,
        lambda,
        clip_m,
        feature_names: data.feature_names().to_vec(),
        support_points: data.samples().iter().map(|s| s.z.clone()).collect(),
        alpha: sol.alpha,
        diagnostics: sol.diagnostics,
    })
}

/// Minimizes `lambda ||f||^2 + (1/n) sum_i w_i L(y_i, f(z_i))` (penalized
/// form) or the weighted risk under `||f||^2 <= 1/lambda` (constrained form).
/// Fits that hit `max_iters` come back with `diagnostics.converged == false`.
pub fn fit(
    data: &Dataset,
    weights: &[f64],
    transform: ResponseTransform,
    loss: LossSpec,
    kernel: KernelSpec,
    lambda: f64,
    config: &FitConfig,
) -> Result<CensoredSvmModel> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let gram = gram_matrix(&kernel, &data.covariates())?;
    fit_with_gram(data, &gram, weights, transform, loss, kernel, lambda, config)
}

/// `f(z) = sum_i alpha_i k(z_i, z)`, clipped at `clip_m` on request.
pub fn predict(model: &CensoredSvmModel, z: &[f64], clipped: bool) -> Result<f64> {
    let d = model.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: z.len() });
    }
    let f: f64 = model
        .support_points
        .iter()
        .zip(&model.alpha)
        .filter(|(_, a)| **a != 0.0)
        .map(|(x, a)| a * model.kernel.eval_unchecked(x, z))
        .sum();
    Ok(match (clipped, model.clip_m) {
        (true, Some(m)) => clip(f, m),
        _ => f,
    })
}

/// `(1/n) sum_i w_i L(y_i, f(z_i))` with `f` the model's (unclipped)
/// decision function.
pub fn weighted_risk(
    model: &CensoredSvmModel,
    data: &Dataset,
    weights: &[f64],
    transform: ResponseTransform,
    loss: &LossSpec,
) -> Result<f64> {
    let n = data.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (s, &w) in data.samples().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let f = predict(model, &s.z, false)?;
        total += w * loss.eval(transform.apply(s.u), f)?;
    }
    Ok(total / n as f64)
}

/// `lambda alpha'K alpha + (1/n) sum_i w_i L(y_i, f(z_i))` at the model's
/// coefficients, with `K` built from the model's support points.
pub fn objective(
    model: &CensoredSvmModel,
    data: &Dataset,
    weights: &[f64],
    transform: ResponseTransform,
    loss: &LossSpec,
    lambda: f64,
) -> Result<f64> {
    let gram = gram_matrix(&model.kernel, &model.support_points)?;
    let nsq = crate::kernels::rkhs_norm_sq(&model.alpha, &gram)?;
    Ok(lambda * nsq + weighted_risk(model, data, weights, transform, loss)?)
}
