//! Estimators of the censoring survival function `G(t|z) = P(C > t | Z = z)`
//! and the inverse-probability-of-censoring weights built from them.
//!
//! All estimators use the censoring counting process `N(t) = 1{U <= t, delta = 0}`
//! and the at-risk process `Y(t) = 1{U > t} + 1{U = t, delta = 0}`: a failure
//! tied with a censoring is not at risk of being censored at that time.
//! Weights use the left limit `G(u-|z) = P(C >= u | z)`, and every query is
//! truncated from below at the model's `floor`.

use serde::{Deserialize, Serialize};

use crate::cox::{fit_cox, CoxFit, CoxInput, TieRule};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_FLOOR: f64 = 0.05;
/// Below this maximal kernel weight a generalized Kaplan-Meier query is
/// treated as extrapolation.
pub const GKM_MIN_WEIGHT: f64 = 1e-12;

/// Right-continuous, nonincreasing step function starting at 1. Values are
/// raw product-limit values in `[0, 1]`; truncation happens at query time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    pub jump_times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSurvival {
    pub fn constant_one() -> Self {
        Self { jump_times: Vec::new(), values: Vec::new() }
    }

    /// `S(t)`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// `S(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Anything that can answer `G(t-|z)` queries.
pub trait SurvivalLeft {
    fn survival_left(&self, t: f64, z: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CensoringVariant {
    /// `G == 1`: no censoring information (or censoring deliberately ignored).
    Unit,
    KaplanMeier { curve: StepSurvival },
    Cox { fit: CoxFit },
    GeneralizedKm { bandwidth: f64, z: Vec<Vec<f64>>, u: Vec<f64>, delta: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub variant: CensoringVariant,
    pub floor: f64,
}

/// How to estimate the censoring distribution; CLI syntax
/// `none | km | cox | gkm:<bandwidth>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CensoringMethod {
    None,
    Km,
    Cox,
    Gkm { bandwidth: f64 },
}

impl std::str::FromStr for CensoringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "km" => Ok(Self::Km),
            "cox" => Ok(Self::Cox),
            _ => match s.split_once(':') {
                Some(("gkm", bw)) => {
                    let bandwidth = bw
                        .parse::<f64>()
                        .map_err(|e| Error::Domain(format!("bad bandwidth '{bw}': {e}")))?;
                    if !(bandwidth > 0.0) {
                        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
                    }
                    Ok(Self::Gkm { bandwidth })
                }
                _ => Err(Error::Domain(format!("unknown censoring method '{s}'"))),
            },
        }
    }
}

impl std::fmt::Display for CensoringMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::Km => write!(f, "km"),
            Self::Cox => write!(f, "cox"),
            Self::Gkm { bandwidth } => write!(f, "gkm:{bandwidth}"),
        }
    }
}

impl CensoringMethod {
    /// Fits the chosen estimator. A Cox fit on data without censoring events
    /// falls back to the unit model.
    pub fn fit(&self, data: &Dataset, floor: f64) -> Result<CensoringModel> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let model = match *self {
            Self::None => CensoringModel::unit(),
            Self::Km => fit_kaplan_meier(data)?,
            Self::Cox => match fit_cox_censoring(data) {
                Err(Error::NoCensoringEvents) => CensoringModel::unit(),
                other => other?,
            },
            Self::Gkm { bandwidth } => fit_generalized_km(data, bandwidth)?,
        };
        model.with_floor(floor)
    }
}

impl CensoringModel {
    pub fn unit() -> Self {
        Self { variant: CensoringVariant::Unit, floor: DEFAULT_FLOOR }
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::Domain(format!("floor must lie in (0,1), got {floor}")));
        }
        self.floor = floor;
        Ok(self)
    }

    /// Raw estimate `G(t|z)` (right-continuous, untruncated).
    pub fn survival_raw(&self, t: f64, z: &[f64]) -> Result<f64> {
        self.query(t, z, false)
    }

    fn query(&self, t: f64, z: &[f64], left: bool) -> Result<f64> {
        Ok(match &self.variant {
            CensoringVariant::Unit => 1.0,
            CensoringVariant::KaplanMeier { curve } => {
                if left {
                    curve.left_limit(t)
                } else {
                    curve.at(t)
                }
            }
            CensoringVariant::Cox { fit } => {
                check_dim(fit.beta.len(), z)?;
                fit.survival(t, z, left)
            }
            CensoringVariant::GeneralizedKm { bandwidth, z: zs, u, delta } => {
                check_dim(zs.first().map_or(z.len(), Vec::len), z)?;
                let w: Vec<f64> = zs
                    .iter()
                    .map(|zi| {
                        let d2: f64 = zi.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-d2 / (bandwidth * bandwidth)).exp()
                    })
                    .collect();
                if w.iter().cloned().fold(0.0, f64::max) < GKM_MIN_WEIGHT {
                    return Err(Error::Extrapolation { threshold: GKM_MIN_WEIGHT });
                }
                weighted_product_limit(u, delta, &w, t, left)
            }
        })
    }

    /// `max(G(t-|z), floor)`.
    pub fn survival_left(&self, t: f64, z: &[f64]) -> Result<f64> {
        Ok(self.query(t, z, true)?.max(self.floor).min(1.0))
    }

    /// `max(G(t|z), floor)`.
    pub fn survival(&self, t: f64, z: &[f64]) -> Result<f64> {
        Ok(self.query(t, z, false)?.max(self.floor).min(1.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl SurvivalLeft for CensoringModel {
    fn survival_left(&self, t: f64, z: &[f64]) -> Result<f64> {
        CensoringModel::survival_left(self, t, z)
    }
}

fn check_dim(expected: usize, z: &[f64]) -> Result<()> {
    if expected != z.len() {
        return Err(Error::DimensionMismatch { expected, got: z.len() });
    }
    Ok(())
}

/// `prod_{s <= t} (1 - sum_w dN(s) / sum_w Y(s))` over censoring times `s`
/// (strictly before `t` when `left`).
fn weighted_product_limit(u: &[f64], delta: &[bool], w: &[f64], t: f64, left: bool) -> f64 {
    let mut order: Vec<usize> = (0..u.len()).filter(|&i| !delta[i]).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let mut s = 1.0;
    let mut k = 0;
    while k < order.len() {
        let time = u[order[k]];
        if time > t || (left && time == t) {
            break;
        }
        let mut d = 0.0;
        while k < order.len() && u[order[k]] == time {
            d += w[order[k]];
            k += 1;
        }
        let at_risk: f64 = (0..u.len())
            .filter(|&i| u[i] > time || (u[i] == time && !delta[i]))
            .map(|i| w[i])
            .sum();
        if at_risk > 0.0 {
            s *= 1.0 - d / at_risk;
        }
    }
    s
}

/// Product-limit estimator of the censoring survival function.
pub fn fit_kaplan_meier(data: &Dataset) -> Result<CensoringModel> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| data.samples()[a].u.total_cmp(&data.samples()[b].u));

    // Sweep ascending; `remaining` counts subjects with U >= current time.
    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut s = 1.0;
    let mut remaining = n;
    let mut k = 0;
    while k < n {
        let time = data.samples()[idx[k]].u;
        let (mut failures, mut censored) = (0usize, 0usize);
        while k < n && data.samples()[idx[k]].u == time {
            if data.samples()[idx[k]].delta {
                failures += 1;
            } else {
                censored += 1;
            }
            k += 1;
        }
        if censored > 0 {
            let at_risk = remaining - failures;
            s *= 1.0 - censored as f64 / at_risk as f64;
            jump_times.push(time);
            values.push(s);
        }
        remaining -= failures + censored;
    }
    Ok(CensoringModel {
        variant: CensoringVariant::KaplanMeier { curve: StepSurvival { jump_times, values } },
        floor: DEFAULT_FLOOR,
    })
}

/// Cox model for the censoring hazard `e^{b'z} dLambda(t)`.
pub fn fit_cox_censoring(data: &Dataset) -> Result<CensoringModel> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.n_censored() == 0 {
        return Err(Error::NoCensoringEvents);
    }
    let input = CoxInput {
        z: data.covariates(),
        times: data.times(),
        is_event: data.samples().iter().map(|s| !s.delta).collect(),
        tie_rule: TieRule::ExcludeTiedOthers,
    };
    let fit = fit_cox(&input)?;
    Ok(CensoringModel { variant: CensoringVariant::Cox { fit }, floor: DEFAULT_FLOOR })
}

/// Locally weighted product-limit estimator with Gaussian weights
/// `exp(-||z - z_i||^2 / bandwidth^2)`.
pub fn fit_generalized_km(data: &Dataset, bandwidth: f64) -> Result<CensoringModel> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    Ok(CensoringModel {
        variant: CensoringVariant::GeneralizedKm {
            bandwidth,
            z: data.samples().iter().map(|s| s.z.clone()).collect(),
            u: data.times(),
            delta: data.samples().iter().map(|s| s.delta).collect(),
        },
        floor: DEFAULT_FLOOR,
    })
}

/// `w_i = delta_i / max(G(u_i-|z_i), floor)`.
pub fn ipcw_weights<G: SurvivalLeft + ?Sized>(model: &G, data: &Dataset) -> Result<Vec<f64>> {
    data.samples()
        .iter()
        .map(|s| {
            if s.delta {
                Ok(1.0 / model.survival_left(s.u, &s.z)?)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}
