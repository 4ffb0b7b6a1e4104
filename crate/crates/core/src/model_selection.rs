//! Grid search over `(1/lambda, sigma)` by k-fold cross-validation of the
//! IPCW-weighted risk, and recursive feature elimination driven by it.
//!
//! Within each fold the censoring model used for the training weights is
//! refit on the training part only. Held-out observations are weighted with
//! the censoring model fitted on the whole dataset handed to
//! [`cv_select`], and scored with the clipped decision function unless
//! [`CvSetup::clipped`] is turned off.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::{ipcw_weights, CensoringMethod, SurvivalLeft, DEFAULT_FLOOR};
use crate::data::{Dataset, ResponseTransform};
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::losses::LossSpec;
use crate::rng::rng_from_seed;
use crate::solver::{fit_with_gram, predict, CensoredSvmModel, FitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub inv_lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub k: usize,
    pub seed: u64,
}

impl CvGrid {
    pub fn new(inv_lambdas: Vec<f64>, sigmas: Vec<f64>, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("need at least 2 folds, got {k}")));
        }
        if inv_lambdas.is_empty() || sigmas.is_empty() {
            return Err(Error::Domain("grid lists must be non-empty".into()));
        }
        if inv_lambdas.iter().chain(&sigmas).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("grid values must be positive and finite".into()));
        }
        Ok(Self { inv_lambdas, sigmas, k, seed })
    }

    /// `(0.1 * 10^i, sigma_base * 2^j)` for `i, j` in `0..4`.
    pub fn geometric(sigma_base: f64, k: usize, seed: u64) -> Result<Self> {
        Self::new(
            (0..4).map(|i| 0.1 * 10f64.powi(i)).collect(),
            (0..4).map(|j| sigma_base * 2f64.powi(j)).collect(),
            k,
            seed,
        )
    }

    /// Pairs in grid order: `1/lambda` outer, `sigma` inner.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.inv_lambdas
            .iter()
            .flat_map(|&il| self.sigmas.iter().map(move |&s| (il, s)))
            .collect()
    }
}

/// Everything except data and grid that a cross-validated fit needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSetup {
    pub transform: ResponseTransform,
    pub loss: LossSpec,
    pub censoring: CensoringMethod,
    pub floor: f64,
    pub config: FitConfig,
    pub clipped: bool,
}

impl CvSetup {
    pub fn new(transform: ResponseTransform, loss: LossSpec, censoring: CensoringMethod, config: FitConfig) -> Self {
        Self { transform, loss, censoring, floor: DEFAULT_FLOOR, config, clipped: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub inv_lambda: f64,
    pub sigma: f64,
    pub mean_risk: f64,
    pub fold_risks: Vec<f64>,
    /// Folds whose held-out weights sum to zero (risk recorded as 0).
    pub degenerate_folds: Vec<bool>,
    /// Every fold degenerate: the pair carries no information and is skipped.
    pub excluded: bool,
    pub unconverged_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub pairs: Vec<PairResult>,
    pub selected: usize,
    pub folds: Vec<Vec<usize>>,
}

impl CvReport {
    pub fn selected_pair(&self) -> (f64, f64) {
        let p = &self.pairs[self.selected];
        (p.inv_lambda, p.sigma)
    }

    pub fn selected_risk(&self) -> f64 {
        self.pairs[self.selected].mean_risk
    }

    /// Plain-text table, one line per pair; the winner is starred.
    pub fn table(&self) -> String {
        let mut out = String::from("inv_lambda\tsigma\tmean_risk\tfold_risks\n");
        for (i, p) in self.pairs.iter().enumerate() {
            let folds: Vec<String> = p.fold_risks.iter().map(|r| format!("{r:.6}")).collect();
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}{}{}\n",
                p.inv_lambda,
                p.sigma,
                p.mean_risk,
                folds.join(","),
                if p.excluded { "\t(excluded)" } else { "" },
                if i == self.selected { "\t*" } else { "" }
            ));
        }
        out
    }
}

/// Seeded shuffle of `0..n`, cut into `k` contiguous blocks whose sizes
/// differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Fold(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::Fold(format!("{n} observations cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// `(1/n) sum_i w_i L(y_i, f(z_i))` for given weights.
pub fn weighted_eval_risk(
    model: &CensoredSvmModel,
    data: &Dataset,
    weights: &[f64],
    transform: ResponseTransform,
    loss: &LossSpec,
    clipped: bool,
) -> Result<f64> {
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: weights.len() });
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (s, &w) in data.samples().iter().zip(weights) {
        if w > 0.0 {
            total += w * loss.eval(transform.apply(s.u), predict(model, &s.z, clipped)?)?;
        }
    }
    Ok(total / data.len() as f64)
}

/// `(1/n) sum_i delta_i L(Y(u_i), f(z_i)) / G(u_i-|z_i)`.
pub fn ipcw_risk<G: SurvivalLeft + ?Sized>(
    model: &CensoredSvmModel,
    data: &Dataset,
    cens: &G,
    transform: ResponseTransform,
    loss: &LossSpec,
    clipped: bool,
) -> Result<f64> {
    let w = ipcw_weights(cens, data)?;
    weighted_eval_risk(model, data, &w, transform, loss, clipped)
}

/// Cross-validation with the grid's seeded folds.
pub fn cv_select(data: &Dataset, grid: &CvGrid, setup: &CvSetup) -> Result<CvReport> {
    let folds = make_folds(data.len(), grid.k, grid.seed)?;
    cv_select_with_folds(data, &folds, grid, setup)
}

struct FoldPrep {
    train_idx: Vec<usize>,
    train: Dataset,
    train_w: Vec<f64>,
    held_out: Dataset,
    held_w: Vec<f64>,
}

/// Cross-validation over explicit folds (each a list of held-out row indices).
pub fn cv_select_with_folds(
    data: &Dataset,
    folds: &[Vec<usize>],
    grid: &CvGrid,
    setup: &CvSetup,
) -> Result<CvReport> {
    let n = data.len();
    if n < folds.len() || folds.len() < 2 {
        return Err(Error::Fold(format!("{n} observations cannot fill {} folds", folds.len())));
    }
    let full_cens = setup.censoring.fit(data, setup.floor)?;
    let all_w = ipcw_weights(&full_cens, data)?;

    let preps = folds
        .iter()
        .map(|held| {
            let mut in_held = vec![false; n];
            held.iter().for_each(|&i| in_held[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !in_held[i]).collect();
            let train = data.subset(&train_idx);
            let cens = setup.censoring.fit(&train, setup.floor)?;
            let train_w = ipcw_weights(&cens, &train)?;
            Ok(FoldPrep {
                train_idx,
                train,
                train_w,
                held_out: data.subset(held),
                held_w: held.iter().map(|&i| all_w[i]).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // One Gram matrix per width, shared by the folds and regularization levels.
    let per_sigma: Vec<Vec<Vec<(f64, bool, bool)>>> = grid
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let kernel = KernelSpec::gaussian(sigma)?;
            let gram = gram_matrix(&kernel, &data.covariates())?;
            preps
                .iter()
                .map(|p| {
                    let sub = gram.select_rows(&p.train_idx).select_columns(&p.train_idx);
                    grid.inv_lambdas
                        .iter()
                        .map(|&il| {
                            let m = fit_with_gram(
                                &p.train,
                                &sub,
                                &p.train_w,
                                setup.transform,
                                setup.loss,
                                kernel,
                                1.0 / il,
                                &setup.config,
                            )?;
                            let degenerate = p.held_w.iter().all(|&w| w == 0.0);
                            let risk = if degenerate {
                                0.0
                            } else {
                                weighted_eval_risk(&m, &p.held_out, &p.held_w, setup.transform, &setup.loss, setup.clipped)?
                            };
                            Ok((risk, degenerate, m.diagnostics.converged))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for (li, &il) in grid.inv_lambdas.iter().enumerate() {
        for (si, &sigma) in grid.sigmas.iter().enumerate() {
            let cells: Vec<(f64, bool, bool)> = per_sigma[si].iter().map(|f| f[li]).collect();
            let fold_risks: Vec<f64> = cells.iter().map(|c| c.0).collect();
            let degenerate_folds: Vec<bool> = cells.iter().map(|c| c.1).collect();
            pairs.push(PairResult {
                inv_lambda: il,
                sigma,
                mean_risk: fold_risks.iter().sum::<f64>() / fold_risks.len() as f64,
                excluded: degenerate_folds.iter().all(|&d| d),
                fold_risks,
                degenerate_folds,
                unconverged_fits: cells.iter().filter(|c| !c.2).count(),
            });
        }
    }
    let selected = select_best(&pairs).ok_or_else(|| Error::Fold("every fold is fully censored".into()))?;
    Ok(CvReport { pairs, selected, folds: folds.to_vec() })
}

/// Smallest mean risk; ties go to the smaller `1/lambda`, then the smaller
/// `sigma`, then the earlier grid position.
fn select_best(pairs: &[PairResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in pairs.iter().enumerate() {
        if p.excluded {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let q = &pairs[b];
                let better = p.mean_risk < q.mean_risk
                    || (p.mean_risk == q.mean_risk
                        && (p.inv_lambda < q.inv_lambda || (p.inv_lambda == q.inv_lambda && p.sigma < q.sigma)));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Cross-validates on the grid, then refits on all of `data` with the
/// selected pair.
pub fn fit_cv(data: &Dataset, grid: &CvGrid, setup: &CvSetup) -> Result<(CensoredSvmModel, CvReport)> {
    let report = cv_select(data, grid, setup)?;
    let (il, sigma) = report.selected_pair();
    let cens = setup.censoring.fit(data, setup.floor)?;
    let w = ipcw_weights(&cens, data)?;
    let kernel = KernelSpec::gaussian(sigma)?;
    let gram = gram_matrix(&kernel, &data.covariates())?;
    let model = fit_with_gram(data, &gram, &w, setup.transform, setup.loss, kernel, 1.0 / il, &setup.config)?;
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    /// Original index of the feature removed at this step.
    pub removed: usize,
    /// Best cross-validated risk without it.
    pub risk: f64,
    pub remaining: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeReport {
    pub selected: Vec<usize>,
    pub steps: Vec<RfeStep>,
}

impl RfeReport {
    /// Subset with the smallest cross-validated risk along the elimination
    /// path, given the risk of the full feature set.
    pub fn best_along_path(&self, all_features: &[usize], full_risk: f64) -> (Vec<usize>, f64) {
        self.steps
            .iter()
            .fold((all_features.to_vec(), full_risk), |(best, r), s| {
                if s.risk < r {
                    (s.remaining.clone(), s.risk)
                } else {
                    (best, r)
                }
            })
    }
}

/// Backward elimination: repeatedly drop the feature whose removal gives the
/// lowest cross-validated IPCW risk (ties to the lowest index) until
/// `target_count` features remain.
pub fn rfe_select(data: &Dataset, target_count: usize, grid: &CvGrid, setup: &CvSetup) -> Result<RfeReport> {
    let d = data.dim();
    if target_count < 1 || target_count > d {
        return Err(Error::Domain(format!("target_count must lie in 1..={d}, got {target_count}")));
    }
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut steps = Vec::new();
    while remaining.len() > target_count {
        let scores = remaining
            .iter()
            .map(|&j| {
                let keep: Vec<usize> = remaining.iter().copied().filter(|&x| x != j).collect();
                let sub = data.select_features(&keep)?;
                Ok((j, cv_select(&sub, grid, setup)?.selected_risk()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (removed, risk) = scores
            .into_iter()
            .fold(None, |best: Option<(usize, f64)>, (j, r)| match best {
                Some((_, br)) if br <= r => best,
                _ => Some((j, r)),
            })
            .expect("at least one candidate");
        remaining.retain(|&x| x != removed);
        steps.push(RfeStep { removed, risk, remaining: remaining.clone() });
    }
    Ok(RfeReport { selected: remaining, steps })
}
