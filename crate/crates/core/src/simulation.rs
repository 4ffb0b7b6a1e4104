//! The five benchmark data-generating mechanisms, their Bayes decision
//! functions under absolute-deviation loss, Monte Carlo risk evaluation, the
//! Cox-regression-median baseline and the benchmark harness.
//!
//! | setting | d  | failure time `T`                              | censoring `C`                    |
//! |---------|----|-----------------------------------------------|----------------------------------|
//! | 1       | 1  | Weibull(shape 2, scale `exp(-0.5 z)`)         | Uniform[0, c0], 30% censored     |
//! | 2       | 1  | Weibull(shape 2, scale `exp(-0.5 z^2)`)       | Uniform[0, c0], 30% censored     |
//! | 3       | 10 | scale `exp(-0.5 z1 + 2 z2 - z3)`              | Uniform[0, c0], 40% censored     |
//! | 4       | 10 | scale `exp(-0.5 z1^2 + 2 z2^2 - z3^2)`        | Uniform[0, c0], 40% censored     |
//! | 5       | 1  | Normal(3 + 3 1{z < 0}, 1), negatives redrawn  | Weibull(2, scale `6 exp(-0.5 z)`) |
//!
//! Covariates are uniform on `[-1, 1]^d`.

use rand::Rng;
use rand_distr::{Distribution, Normal, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::{CensoringMethod, SurvivalLeft, DEFAULT_FLOOR};
use crate::cox::{fit_cox, CoxFit, CoxInput, TieRule};
use crate::data::{CensoredSample, Dataset, ResponseTransform};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::model_selection::{cv_select, fit_cv, rfe_select, CvGrid, CvSetup};
use crate::rng::{derive_seed, rng_from_seed};
use crate::solver::{predict, FitConfig, Form};

pub const WEIBULL_SHAPE: f64 = 2.0;
pub const DEFAULT_EVAL_DRAWS: usize = 10_000;
pub const CALIBRATION_DRAWS: usize = 1_000_000;
/// Calibration stops once the Monte Carlo censoring fraction is this close
/// to the target.
pub const CALIBRATION_TOL: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CensoringLaw {
    /// `C ~ Uniform[0, c0]`; `c0` is `None` until calibrated.
    Uniform { c0: Option<f64> },
    /// `C ~ Weibull(shape 2, scale exp(-0.5 z + ln 6))`.
    WeibullPh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetting {
    pub id: u8,
    pub d: usize,
    pub censoring: CensoringLaw,
}

impl SimulationSetting {
    /// The setting with its censoring constant still unknown.
    pub fn new(id: u8) -> Result<Self> {
        let (d, censoring) = match id {
            1 | 2 => (1, CensoringLaw::Uniform { c0: None }),
            3 | 4 => (10, CensoringLaw::Uniform { c0: None }),
            5 => (1, CensoringLaw::WeibullPh),
            _ => return Err(Error::Domain(format!("unknown setting {id}; expected 1..=5"))),
        };
        Ok(Self { id, d, censoring })
    }

    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        match self.censoring {
            CensoringLaw::Uniform { .. } if c0 > 0.0 && c0.is_finite() => {
                self.censoring = CensoringLaw::Uniform { c0: Some(c0) };
                Ok(self)
            }
            CensoringLaw::Uniform { .. } => Err(Error::Domain(format!("c0 must be positive, got {c0}"))),
            CensoringLaw::WeibullPh => Err(Error::NotApplicable(format!("setting {} has a fixed censoring law", self.id))),
        }
    }

    /// Ready to simulate: settings 1-4 get `c0` by Monte Carlo calibration.
    pub fn calibrated(id: u8, seed: u64) -> Result<Self> {
        let s = Self::new(id)?;
        match s.censoring {
            CensoringLaw::WeibullPh => Ok(s),
            CensoringLaw::Uniform { .. } => {
                let c0 = calibrate_censoring_constant(&s, s.target_censoring().unwrap(), CALIBRATION_DRAWS, seed)?;
                s.with_c0(c0)
            }
        }
    }

    pub fn target_censoring(&self) -> Option<f64> {
        match self.id {
            1 | 2 => Some(0.3),
            3 | 4 => Some(0.4),
            _ => None,
        }
    }

    pub fn c0(&self) -> Option<f64> {
        match self.censoring {
            CensoringLaw::Uniform { c0 } => c0,
            CensoringLaw::WeibullPh => None,
        }
    }

    /// Smallest kernel width of the cross-validation grid.
    pub fn sigma_base(&self) -> f64 {
        match self.id {
            3 | 4 => 0.2,
            _ => 0.05,
        }
    }

    /// Log of the Weibull scale for settings 1-4.
    fn log_scale(&self, z: &[f64]) -> f64 {
        match self.id {
            1 => -0.5 * z[0],
            2 => -0.5 * z[0] * z[0],
            3 => -0.5 * z[0] + 2.0 * z[1] - z[2],
            4 => -0.5 * z[0] * z[0] + 2.0 * z[1] * z[1] - z[2] * z[2],
            _ => unreachable!("setting 5 is not Weibull"),
        }
    }

    fn normal_mean(z: &[f64]) -> f64 {
        if z[0] < 0.0 {
            6.0
        } else {
            3.0
        }
    }

    fn censoring_scale(z: &[f64]) -> f64 {
        (-0.5 * z[0] + 6f64.ln()).exp()
    }

    pub fn draw_covariates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    pub fn draw_failure<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> f64 {
        if self.id == 5 {
            let dist = Normal::new(Self::normal_mean(z), 1.0).unwrap();
            loop {
                let t = dist.sample(rng);
                if t >= 0.0 {
                    return t;
                }
            }
        }
        Weibull::new(self.log_scale(z).exp(), WEIBULL_SHAPE).unwrap().sample(rng)
    }

    fn draw_censoring<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<f64> {
        match self.censoring {
            CensoringLaw::Uniform { c0: Some(c0) } => Ok(c0 * rng.random::<f64>()),
            CensoringLaw::Uniform { c0: None } => {
                Err(Error::Domain(format!("setting {} is not calibrated", self.id)))
            }
            CensoringLaw::WeibullPh => Ok(Weibull::new(Self::censoring_scale(z), WEIBULL_SHAPE).unwrap().sample(rng)),
        }
    }

    /// The true censoring survival function, for use as a known IPCW model.
    pub fn censoring_survival(&self) -> TrueCensoring {
        TrueCensoring { setting: *self }
    }
}

/// `P(C >= t | z)` under the setting's censoring law.
#[derive(Debug, Clone, Copy)]
pub struct TrueCensoring {
    setting: SimulationSetting,
}

impl SurvivalLeft for TrueCensoring {
    fn survival_left(&self, t: f64, z: &[f64]) -> Result<f64> {
        match self.setting.censoring {
            CensoringLaw::Uniform { c0: Some(c0) } => Ok((1.0 - t / c0).clamp(0.0, 1.0)),
            CensoringLaw::Uniform { c0: None } => Err(Error::Domain("setting is not calibrated".into())),
            CensoringLaw::WeibullPh => {
                let r = t / SimulationSetting::censoring_scale(z);
                Ok((-r * r).exp())
            }
        }
    }
}

/// Generated data plus the latent failure and censoring times (kept for
/// diagnostics only).
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    pub failure: Vec<f64>,
    pub censoring: Vec<f64>,
}

pub fn generate(setting: &SimulationSetting, n: usize, seed: u64) -> Result<Simulated> {
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(n);
    let mut failure = Vec::with_capacity(n);
    let mut censoring = Vec::with_capacity(n);
    for _ in 0..n {
        let z = setting.draw_covariates(&mut rng);
        let t = setting.draw_failure(&z, &mut rng);
        let c = setting.draw_censoring(&z, &mut rng)?;
        samples.push(CensoredSample { z, u: t.min(c), delta: t <= c });
        failure.push(t);
        censoring.push(c);
    }
    Ok(Simulated { data: Dataset::new(samples, setting.d)?, failure, censoring })
}

/// Conditional median of `T` given `z`.
pub fn bayes_decision(setting: &SimulationSetting, z: &[f64]) -> f64 {
    if setting.id == 5 {
        SimulationSetting::normal_mean(z)
    } else {
        setting.log_scale(z).exp() * 2f64.ln().powf(1.0 / WEIBULL_SHAPE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Fresh uncensored `(z, T)` draws for risk evaluation.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub z: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl EvalSample {
    pub fn draw(setting: &SimulationSetting, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let (mut z, mut t) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let zi = setting.draw_covariates(&mut rng);
            t.push(setting.draw_failure(&zi, &mut rng));
            z.push(zi);
        }
        Self { z, t }
    }

    /// Monte Carlo mean of `|T - predictor(Z)|` with its standard error.
    pub fn risk(&self, mut predictor: impl FnMut(&[f64]) -> f64) -> RiskEstimate {
        let losses: Vec<f64> = self.z.iter().zip(&self.t).map(|(z, t)| (t - predictor(z)).abs()).collect();
        let n = losses.len() as f64;
        let mean = losses.iter().sum::<f64>() / n;
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        RiskEstimate { mean, se: (var / n).sqrt() }
    }
}

/// Absolute-deviation risk of `predictor` on `n_eval` fresh draws.
pub fn true_risk(
    setting: &SimulationSetting,
    predictor: impl Fn(&[f64]) -> f64,
    n_eval: usize,
    seed: u64,
) -> RiskEstimate {
    EvalSample::draw(setting, n_eval, seed).risk(predictor)
}

/// Finds `c0` so that `P(T > C) = target` for `C ~ Uniform[0, c0]`, by
/// bisection on a fixed Monte Carlo sample of `draws` pairs `(T, V)` with
/// `C = c0 V`. The common sample makes the estimated fraction monotone in `c0`.
pub fn calibrate_censoring_constant(setting: &SimulationSetting, target: f64, draws: usize, seed: u64) -> Result<f64> {
    if let CensoringLaw::WeibullPh = setting.censoring {
        return Err(Error::NotApplicable(format!("setting {} has a fixed censoring law", setting.id)));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!("target censoring fraction {target} has no finite bracket")));
    }
    let mut rng = rng_from_seed(seed);
    let mut ratio: Vec<f64> = (0..draws)
        .map(|_| {
            let z = setting.draw_covariates(&mut rng);
            let t = setting.draw_failure(&z, &mut rng);
            let v: f64 = rng.random();
            t / v
        })
        .collect();
    // T > c0 V  <=>  T / V > c0.
    ratio.sort_by(f64::total_cmp);
    let frac = |c0: f64| (draws - ratio.partition_point(|&r| r <= c0)) as f64 / draws as f64;

    let (mut lo, mut hi) = (1e-9, 1.0);
    while frac(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Calibration(format!("no c0 below 1e12 reaches {target}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = frac(mid);
        if (f - target).abs() <= CALIBRATION_TOL {
            return Ok(mid);
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!("bisection stalled near c0 = {hi}")))
}

/// Median of the Cox-model survival curve of the failure time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxMedian {
    pub fit: CoxFit,
}

impl CoxMedian {
    /// Smallest event time at which `S(t|z) <= 1/2`; when the curve never
    /// gets there, the largest event time with the flag set.
    pub fn predict(&self, z: &[f64]) -> (f64, bool) {
        let risk = self.fit.linear_predictor(z).exp();
        let mut s = 1.0;
        for (&t, &dh) in self.fit.jump_times.iter().zip(&self.fit.hazard_jumps) {
            s *= (1.0 - risk * dh).max(0.0);
            if s <= 0.5 {
                return (t, false);
            }
        }
        (*self.fit.jump_times.last().expect("fit has events"), true)
    }
}

/// Cox proportional hazards on the failure times with a Breslow baseline.
pub fn cox_median_baseline(data: &Dataset) -> Result<CoxMedian> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let input = CoxInput {
        z: data.covariates(),
        times: data.times(),
        is_event: data.samples().iter().map(|s| s.delta).collect(),
        tie_rule: TieRule::IncludeTiedOthers,
    };
    Ok(CoxMedian { fit: fit_cox(&input)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// IPCW SVM with Kaplan-Meier censoring weights.
    CensoredSvm,
    /// IPCW SVM with Cox censoring weights.
    CensoredSvmCox,
    /// Standard SVM on the uncensored rows only.
    IgnoreCensoringSvm,
    CoxMedian,
    /// Censored SVM after recursive feature elimination.
    CensoredSvmRfe,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::CensoredSvm => "censored-svm",
            Method::CensoredSvmCox => "censored-svm-cox",
            Method::IgnoreCensoringSvm => "ignore-censoring-svm",
            Method::CoxMedian => "cox-median",
            Method::CensoredSvmRfe => "censored-svm-rfe",
        }
    }

    pub const ALL: [Method; 5] = [
        Method::CensoredSvm,
        Method::CensoredSvmCox,
        Method::IgnoreCensoringSvm,
        Method::CoxMedian,
        Method::CensoredSvmRfe,
    ];
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Domain(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub settings: Vec<u8>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub n_eval: usize,
    pub folds: usize,
    pub fit: FitConfig,
    pub floor: f64,
    /// Inner grid for feature elimination; `None` uses the setting's grid.
    pub rfe_grid: Option<(Vec<f64>, Vec<f64>)>,
    pub calibration_draws: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            settings: vec![1],
            ns: vec![50, 100, 200, 400, 800],
            reps: 100,
            methods: vec![Method::CensoredSvm, Method::IgnoreCensoringSvm, Method::CoxMedian],
            seed: 0,
            n_eval: DEFAULT_EVAL_DRAWS,
            folds: 5,
            fit: FitConfig { form: Form::Constrained, max_iters: 20_000, tol: 1e-6, seed: 0 },
            floor: DEFAULT_FLOOR,
            rfe_grid: None,
            calibration_draws: CALIBRATION_DRAWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub setting: u8,
    pub n: usize,
    pub rep: usize,
    pub method: String,
    pub risk: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingInfo {
    pub setting: u8,
    pub c0: Option<f64>,
    pub bayes_risk: RiskEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: u8,
    pub n: usize,
    pub method: String,
    pub count: usize,
    pub failed: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub settings: Vec<SettingInfo>,
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

impl BenchmarkReport {
    pub fn risks(&self, setting: u8, n: usize, method: Method) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.setting == setting && r.n == n && r.method == method.name())
            .filter_map(|r| r.risk)
            .collect()
    }

    pub fn bayes_risk(&self, setting: u8) -> Option<RiskEstimate> {
        self.settings.iter().find(|s| s.setting == setting).map(|s| s.bayes_risk)
    }

    /// Five-number summary per `(setting, n, method)`, in first-seen order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(u8, usize, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.setting, r.n, r.method.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(setting, n, method)| {
                let cell: Vec<&BenchmarkRow> =
                    self.rows.iter().filter(|r| r.setting == setting && r.n == n && r.method == method).collect();
                let mut v: Vec<f64> = cell.iter().filter_map(|r| r.risk).collect();
                v.sort_by(f64::total_cmp);
                let q = |p| if v.is_empty() { f64::NAN } else { quantile_sorted(&v, p) };
                SummaryRow {
                    setting,
                    n,
                    method,
                    count: v.len(),
                    failed: cell.len() - v.len(),
                    min: q(0.0),
                    q1: q(0.25),
                    median: q(0.5),
                    q3: q(0.75),
                    max: q(1.0),
                }
            })
            .collect()
    }

    /// `setting,n,rep,method,risk,status`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["setting", "n", "rep", "method", "risk", "status"])?;
        for r in &self.rows {
            out.write_record([
                r.setting.to_string(),
                r.n.to_string(),
                r.rep.to_string(),
                r.method.clone(),
                r.risk.map_or(String::new(), |v| v.to_string()),
                r.error.as_ref().map_or("ok".to_string(), |e| format!("failed: {e}")),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["setting", "n", "method", "count", "failed", "min", "q1", "median", "q3", "max", "bayes_risk"])?;
        for s in self.summary() {
            let bayes = self.bayes_risk(s.setting).map_or(String::new(), |b| b.mean.to_string());
            out.write_record([
                s.setting.to_string(),
                s.n.to_string(),
                s.method,
                s.count.to_string(),
                s.failed.to_string(),
                s.min.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
                bayes,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn svm_risk(
    data: &Dataset,
    setting: &SimulationSetting,
    censoring: CensoringMethod,
    cfg: &BenchmarkConfig,
    cv_seed: u64,
    eval: &EvalSample,
) -> Result<f64> {
    let grid = CvGrid::geometric(setting.sigma_base(), cfg.folds, cv_seed)?;
    let mut setup = CvSetup::new(ResponseTransform::Identity, LossSpec::absolute(), censoring, cfg.fit);
    setup.floor = cfg.floor;
    let (model, _) = fit_cv(data, &grid, &setup)?;
    let mut failure = None;
    let r = eval.risk(|z| {
        predict(&model, z, true).unwrap_or_else(|e| {
            failure.get_or_insert(e.to_string());
            f64::NAN
        })
    });
    match failure {
        Some(e) => Err(Error::Numeric(e)),
        None => Ok(r.mean),
    }
}

fn rfe_risk(
    data: &Dataset,
    setting: &SimulationSetting,
    cfg: &BenchmarkConfig,
    cv_seed: u64,
    eval: &EvalSample,
) -> Result<f64> {
    let grid = CvGrid::geometric(setting.sigma_base(), cfg.folds, cv_seed)?;
    let inner = match &cfg.rfe_grid {
        Some((il, s)) => CvGrid::new(il.clone(), s.clone(), cfg.folds, cv_seed)?,
        None => grid.clone(),
    };
    let mut setup = CvSetup::new(ResponseTransform::Identity, LossSpec::absolute(), CensoringMethod::Km, cfg.fit);
    setup.floor = cfg.floor;
    let all: Vec<usize> = (0..data.dim()).collect();
    let full_risk = cv_select(data, &inner, &setup)?.selected_risk();
    let path = rfe_select(data, 1, &inner, &setup)?;
    let (features, _) = path.best_along_path(&all, full_risk);
    let reduced = data.select_features(&features)?;
    let (model, _) = fit_cv(&reduced, &grid, &setup)?;
    let r = eval.risk(|z| {
        let zz: Vec<f64> = features.iter().map(|&j| z[j]).collect();
        predict(&model, &zz, true).unwrap_or(f64::NAN)
    });
    Ok(r.mean)
}

fn run_method(
    method: Method,
    data: &Dataset,
    setting: &SimulationSetting,
    cfg: &BenchmarkConfig,
    cv_seed: u64,
    eval: &EvalSample,
) -> Result<f64> {
    match method {
        Method::CensoredSvm => svm_risk(data, setting, CensoringMethod::Km, cfg, cv_seed, eval),
        Method::CensoredSvmCox => svm_risk(data, setting, CensoringMethod::Cox, cfg, cv_seed, eval),
        Method::IgnoreCensoringSvm => {
            svm_risk(&data.events_only(), setting, CensoringMethod::None, cfg, cv_seed, eval)
        }
        Method::CoxMedian => {
            let cm = cox_median_baseline(data)?;
            Ok(eval.risk(|z| cm.predict(z).0).mean)
        }
        Method::CensoredSvmRfe => rfe_risk(data, setting, cfg, cv_seed, eval),
    }
}

/// Runs every `(setting, n, rep, method)` cell. Each `(setting, n, rep)` job
/// derives its own seed from `(seed, setting, n, rep)`, so the report does
/// not depend on scheduling. Failed cells are recorded, not fatal.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let settings = cfg
        .settings
        .iter()
        .map(|&id| SimulationSetting::calibrated_with(id, cfg.calibration_draws, derive_seed(cfg.seed, &[id as u64, 0xCA1])))
        .collect::<Result<Vec<_>>>()?;
    let infos: Vec<SettingInfo> = settings
        .par_iter()
        .map(|s| SettingInfo {
            setting: s.id,
            c0: s.c0(),
            bayes_risk: true_risk(s, |z| bayes_decision(s, z), cfg.n_eval, derive_seed(cfg.seed, &[s.id as u64, 0xBA7])),
        })
        .collect();

    let mut jobs = Vec::new();
    for s in &settings {
        for &n in &cfg.ns {
            for rep in 0..cfg.reps {
                jobs.push((*s, n, rep));
            }
        }
    }
    let rows: Vec<Vec<BenchmarkRow>> = jobs
        .par_iter()
        .map(|&(setting, n, rep)| {
            let job = derive_seed(cfg.seed, &[setting.id as u64, n as u64, rep as u64]);
            let sim = generate(&setting, n, derive_seed(job, &[0]));
            let eval = EvalSample::draw(&setting, cfg.n_eval, derive_seed(job, &[1]));
            let cv_seed = derive_seed(job, &[2]);
            cfg.methods
                .iter()
                .map(|&m| {
                    let res = sim
                        .as_ref()
                        .map_err(|e| Error::Numeric(e.to_string()))
                        .and_then(|sim| run_method(m, &sim.data, &setting, cfg, cv_seed, &eval));
                    BenchmarkRow {
                        setting: setting.id,
                        n,
                        rep,
                        method: m.name().to_string(),
                        risk: res.as_ref().ok().copied(),
                        error: res.err().map(|e| e.to_string()),
                    }
                })
                .collect()
        })
        .collect();
    Ok(BenchmarkReport { rows: rows.into_iter().flatten().collect(), settings: infos })
}

impl SimulationSetting {
    /// Like [`SimulationSetting::calibrated`] with an explicit number of
    /// Monte Carlo draws.
    pub fn calibrated_with(id: u8, draws: usize, seed: u64) -> Result<Self> {
        let s = Self::new(id)?;
        match s.censoring {
            CensoringLaw::WeibullPh => Ok(s),
            CensoringLaw::Uniform { .. } => {
                let c0 = calibrate_censoring_constant(&s, s.target_censoring().unwrap(), draws, seed)?;
                s.with_c0(c0)
            }
        }
    }
}
