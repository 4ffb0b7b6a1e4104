//! Convex margin and distance losses `L(y, s)`, their subgradients in `s`,
//! and clipping of decision values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor for the clipping bound when the response range is degenerate.
pub const MIN_CLIP_BOUND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    /// `max(0, 1 - y s)` for `y` in `{-1, +1}`.
    Hinge,
    /// `(y - s)^2`.
    Squared,
    /// `|y - s|`.
    Absolute,
    /// Pinball loss at level `alpha`.
    Quantile { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub clip_m: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        if let LossKind::Quantile { alpha } = kind {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Domain(format!("quantile level must lie in (0,1), got {alpha}")));
            }
        }
        Ok(Self { kind, clip_m: None })
    }

    pub fn hinge() -> Self {
        Self { kind: LossKind::Hinge, clip_m: None }
    }

    pub fn squared() -> Self {
        Self { kind: LossKind::Squared, clip_m: None }
    }

    pub fn absolute() -> Self {
        Self { kind: LossKind::Absolute, clip_m: None }
    }

    pub fn quantile(alpha: f64) -> Result<Self> {
        Self::new(LossKind::Quantile { alpha })
    }

    pub fn with_clip(mut self, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("clipping bound must be positive and finite, got {m}")));
        }
        self.clip_m = Some(m);
        Ok(self)
    }

    pub fn eval(&self, y: f64, s: f64) -> Result<f64> {
        loss_eval(self, y, s)
    }

    pub fn subgradient(&self, y: f64, s: f64) -> Result<f64> {
        loss_subgradient(self, y, s)
    }

    /// Rejects responses outside the loss domain (only the hinge has one).
    pub fn check_response(&self, y: f64) -> Result<()> {
        if self.kind == LossKind::Hinge && y != 1.0 && y != -1.0 {
            return Err(Error::Domain(format!("hinge loss needs y in {{-1,+1}}, got {y}")));
        }
        Ok(())
    }
}

impl std::str::FromStr for LossSpec {
    type Err = Error;

    /// `hinge`, `squared`, `absolute` or `quantile:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(Self::hinge()),
            "squared" => Ok(Self::squared()),
            "absolute" => Ok(Self::absolute()),
            _ => match s.split_once(':') {
                Some(("quantile", a)) => {
                    let alpha = a
                        .parse::<f64>()
                        .map_err(|e| Error::Domain(format!("bad quantile level '{a}': {e}")))?;
                    Self::quantile(alpha)
                }
                _ => Err(Error::Domain(format!("unknown loss '{s}'"))),
            },
        }
    }
}

/// Unchecked evaluation; callers validate `y` once up front.
#[inline]
pub(crate) fn value(kind: LossKind, y: f64, s: f64) -> f64 {
    match kind {
        LossKind::Hinge => (1.0 - y * s).max(0.0),
        LossKind::Squared => (y - s) * (y - s),
        LossKind::Absolute => (y - s).abs(),
        LossKind::Quantile { alpha } => {
            let r = y - s;
            if s < y {
                alpha * r
            } else {
                -(1.0 - alpha) * r
            }
        }
    }
}

pub fn loss_eval(spec: &LossSpec, y: f64, s: f64) -> Result<f64> {
    spec.check_response(y)?;
    Ok(value(spec.kind, y, s))
}

/// A subgradient in `s`. At kinks: 0 for hinge and absolute, `1/2 - alpha`
/// (the midpoint of `[-alpha, 1 - alpha]`) for the quantile loss.
pub fn loss_subgradient(spec: &LossSpec, y: f64, s: f64) -> Result<f64> {
    spec.check_response(y)?;
    Ok(match spec.kind {
        LossKind::Hinge => {
            let m = y * s;
            if m < 1.0 {
                -y
            } else {
                0.0
            }
        }
        LossKind::Squared => 2.0 * (s - y),
        LossKind::Absolute => {
            if s > y {
                1.0
            } else if s < y {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Quantile { alpha } => {
            if s < y {
                -alpha
            } else if s > y {
                1.0 - alpha
            } else {
                0.5 - alpha
            }
        }
    })
}

pub fn clip(s: f64, m: f64) -> f64 {
    if s <= -m {
        -m
    } else if s >= m {
        m
    } else {
        s
    }
}

/// Smallest symmetric bound `M` at which clipping cannot increase the loss
/// for responses in `[y_min, y_max]`.
pub fn default_clip_bound(spec: &LossSpec, y_min: f64, y_max: f64) -> f64 {
    let m = match spec.kind {
        LossKind::Hinge => 1.0,
        _ => y_min.abs().max(y_max.abs()),
    };
    m.max(MIN_CLIP_BOUND)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_kinds() -> Vec<LossSpec> {
        vec![
            LossSpec::hinge(),
            LossSpec::squared(),
            LossSpec::absolute(),
            LossSpec::quantile(0.9).unwrap(),
            LossSpec::quantile(0.25).unwrap(),
        ]
    }

    fn response_for(spec: &LossSpec, raw: f64) -> f64 {
        if spec.kind == LossKind::Hinge {
            if raw >= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            raw
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(LossSpec::hinge().eval(1.0, 1.0).unwrap(), 0.0);
        let q = LossSpec::quantile(0.9).unwrap();
        assert_abs_diff_eq!(q.eval(1.0, 0.0).unwrap(), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(q.eval(1.0, 2.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(LossSpec::absolute().eval(2.0, 0.5).unwrap(), 1.5);
        assert!(matches!(LossSpec::hinge().eval(0.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(LossSpec::squared().subgradient(1.0, 3.0).unwrap(), 4.0);
        assert_eq!(LossSpec::hinge().subgradient(1.0, 0.0).unwrap(), -1.0);
        assert_eq!(LossSpec::hinge().subgradient(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(LossSpec::absolute().subgradient(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(LossSpec::quantile(0.9).unwrap().subgradient(1.0, 1.0).unwrap(), -0.4);
        assert!(LossSpec::hinge().subgradient(2.0, 0.0).is_err());
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(5.0, 2.0), 2.0);
        assert_eq!(clip(-3.0, 2.0), -2.0);
        assert_eq!(clip(0.5, 2.0), 0.5);
    }

    #[test]
    fn clip_bound_examples() {
        assert_eq!(default_clip_bound(&LossSpec::hinge(), -1.0, 1.0), 1.0);
        assert_eq!(default_clip_bound(&LossSpec::absolute(), 0.0, 4.0), 4.0);
        assert_eq!(default_clip_bound(&LossSpec::squared(), 0.0, 0.0), MIN_CLIP_BOUND);
        assert_eq!(default_clip_bound(&LossSpec::quantile(0.3).unwrap(), -7.0, 2.0), 7.0);
    }

    #[test]
    fn parses_cli_names() {
        assert_eq!("hinge".parse::<LossSpec>().unwrap(), LossSpec::hinge());
        assert_eq!(
            "quantile:0.9".parse::<LossSpec>().unwrap().kind,
            LossKind::Quantile { alpha: 0.9 }
        );
        assert!("quantile:1.5".parse::<LossSpec>().is_err());
        assert!("logistic".parse::<LossSpec>().is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LossSpec::quantile(0.0).is_err());
        assert!(LossSpec::quantile(1.0).is_err());
        assert!(LossSpec::absolute().with_clip(0.0).is_err());
        assert!(LossSpec::absolute().with_clip(f64::INFINITY).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn convex_along_segments(raw in -5.0f64..5.0, s1 in -10.0f64..10.0, s2 in -10.0f64..10.0, th in 0.0f64..=1.0) {
            for spec in all_kinds() {
                let y = response_for(&spec, raw);
                let mid = spec.eval(y, th * s1 + (1.0 - th) * s2).unwrap();
                let chord = th * spec.eval(y, s1).unwrap() + (1.0 - th) * spec.eval(y, s2).unwrap();
                prop_assert!(mid <= chord + 1e-12);
            }
        }

        #[test]
        fn subgradient_inequality(raw in -5.0f64..5.0, s in -10.0f64..10.0, t in -10.0f64..10.0) {
            for spec in all_kinds() {
                let y = response_for(&spec, raw);
                let g = spec.subgradient(y, s).unwrap();
                prop_assert!(spec.eval(y, t).unwrap() >= spec.eval(y, s).unwrap() + g * (t - s) - 1e-12);
            }
        }

        #[test]
        fn subgradient_inequality_at_kinks(raw in -5.0f64..5.0, t in -10.0f64..10.0) {
            for spec in all_kinds() {
                let y = response_for(&spec, raw);
                // every kink sits at s = y (for the hinge, y s = 1 with y = +-1)
                let s = y;
                let g = spec.subgradient(y, s).unwrap();
                prop_assert!(spec.eval(y, t).unwrap() >= spec.eval(y, s).unwrap() + g * (t - s) - 1e-12);
            }
        }

        #[test]
        fn median_loss_is_half_absolute(y in -5.0f64..5.0, s in -5.0f64..5.0) {
            let q = LossSpec::quantile(0.5).unwrap().eval(y, s).unwrap();
            prop_assert!((q - 0.5 * LossSpec::absolute().eval(y, s).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn clipping_never_hurts(a in -5.0f64..5.0, b in -5.0f64..5.0, frac in 0.0f64..=1.0, s in -20.0f64..20.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            for spec in all_kinds() {
                let y = if spec.kind == LossKind::Hinge { response_for(&spec, a) } else { lo + frac * (hi - lo) };
                let (lo, hi) = if spec.kind == LossKind::Hinge { (-1.0, 1.0) } else { (lo, hi) };
                let m = default_clip_bound(&spec, lo, hi);
                prop_assert!(spec.eval(y, clip(s, m)).unwrap() <= spec.eval(y, s).unwrap());
            }
        }
    }
}
