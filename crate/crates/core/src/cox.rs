//! Cox proportional hazards: root of the partial-likelihood score and the
//! Breslow cumulative hazard. Used for the censoring distribution (events are
//! censorings) and for the failure-time baseline (events are failures).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 200;

/// Who is at risk for an event at time `t` among subjects whose own time is
/// exactly `t` but who did not have the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// `Y(t) = 1{U > t} + 1{U = t, event}`: tied non-events leave first.
    ExcludeTiedOthers,
    /// `Y(t) = 1{U >= t}`.
    IncludeTiedOthers,
}

/// Per-subject view of the data the score is built from.
pub struct CoxInput<'a> {
    pub z: Vec<&'a [f64]>,
    pub times: Vec<f64>,
    pub is_event: Vec<bool>,
    pub tie_rule: TieRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Distinct event times, ascending.
    pub jump_times: Vec<f64>,
    /// Breslow increments `dLambda(s)` at `jump_times`.
    pub hazard_jumps: Vec<f64>,
    pub score_norm: f64,
    pub iterations: usize,
    /// Set when some covariate column is constant, so its coefficient is
    /// unidentified and pinned to zero.
    pub degenerate: bool,
}

impl CoxFit {
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.beta.iter().zip(z).map(|(b, x)| b * x).sum()
    }

    /// Cumulative baseline hazard at `t` (right-continuous).
    pub fn baseline_cum_hazard(&self, t: f64) -> f64 {
        self.jump_times
            .iter()
            .zip(&self.hazard_jumps)
            .take_while(|(s, _)| **s <= t)
            .map(|(_, h)| h)
            .sum()
    }

    /// Product-integral survival `prod_{s <= t} (1 - e^{b'z} dLambda(s))`,
    /// or over `s < t` when `left` is set. Factors are floored at zero.
    pub fn survival(&self, t: f64, z: &[f64], left: bool) -> f64 {
        let risk = self.linear_predictor(z).exp();
        let mut s = 1.0;
        for (&time, &dh) in self.jump_times.iter().zip(&self.hazard_jumps) {
            if time > t || (left && time == t) {
                break;
            }
            s *= (1.0 - risk * dh).max(0.0);
        }
        s
    }
}

struct ScoreEval {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

/// Event-time groups in descending time order, each listing who enters the
/// risk set before (`at_risk`) and after (`late`) the group's events count.
struct RiskLayout {
    groups: Vec<Group>,
}

struct Group {
    time: f64,
    at_risk: Vec<usize>,
    late: Vec<usize>,
    events: Vec<usize>,
}

impl RiskLayout {
    fn new(input: &CoxInput<'_>) -> Self {
        let n = input.times.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| input.times[b].total_cmp(&input.times[a]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut k = 0;
        while k < n {
            let t = input.times[order[k]];
            let mut g = Group { time: t, at_risk: Vec::new(), late: Vec::new(), events: Vec::new() };
            while k < n && input.times[order[k]] == t {
                let i = order[k];
                if input.is_event[i] {
                    g.at_risk.push(i);
                    g.events.push(i);
                } else if input.tie_rule == TieRule::IncludeTiedOthers {
                    g.at_risk.push(i);
                } else {
                    g.late.push(i);
                }
                k += 1;
            }
            groups.push(g);
        }
        Self { groups }
    }
}

fn evaluate(input: &CoxInput<'_>, layout: &RiskLayout, beta: &DVector<f64>, active: &[usize]) -> ScoreEval {
    let n = input.times.len();
    let p = active.len();
    let eta: Vec<f64> = input
        .z
        .iter()
        .map(|z| active.iter().enumerate().map(|(a, &j)| beta[a] * z[j]).sum())
        .collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);

    let add = |i: usize, s0: &mut f64, s1: &mut DVector<f64>, s2: &mut DMatrix<f64>| {
        let x = DVector::from_iterator(p, active.iter().map(|&j| input.z[i][j]));
        *s0 += w[i];
        s1.axpy(w[i], &x, 1.0);
        s2.ger(w[i], &x, &x, 1.0);
    };

    for g in &layout.groups {
        for &i in &g.at_risk {
            add(i, &mut s0, &mut s1, &mut s2);
        }
        if !g.events.is_empty() {
            let mean = &s1 / s0;
            let cov = &s2 / s0 - &mean * mean.transpose();
            for &i in &g.events {
                let x = DVector::from_iterator(p, active.iter().map(|&j| input.z[i][j]));
                loglik += eta[i] - shift - s0.ln();
                score += x - &mean;
                info += &cov;
            }
        }
        for &i in &g.late {
            add(i, &mut s0, &mut s1, &mut s2);
        }
    }
    let nf = n as f64;
    ScoreEval { loglik: loglik / nf, score: score / nf, info: info / nf }
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finds the zero of the normalized score by damped Newton, falling back to
/// bisection (one covariate) or gradient ascent steps when the observed
/// information is singular.
pub fn fit_cox(input: &CoxInput<'_>) -> Result<CoxFit> {
    let n = input.times.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if !input.is_event.iter().any(|&e| e) {
        return Err(Error::NoEvents);
    }
    let d = input.z[0].len();
    let active: Vec<usize> = (0..d)
        .filter(|&j| input.z.iter().any(|z| z[j] != input.z[0][j]))
        .collect();
    let degenerate = active.len() < d;
    let layout = RiskLayout::new(input);

    let mut beta = DVector::zeros(active.len());
    let mut ev = evaluate(input, &layout, &beta, &active);
    let mut iterations = 0;
    let mut converged = max_norm(&ev.score) <= SCORE_TOL;
    while !converged && iterations < MAX_ITERS {
        iterations += 1;
        let dir = match ev.info.clone().cholesky() {
            Some(ch) => ch.solve(&ev.score),
            None => ev.score.clone(),
        };
        // Armijo backtracking on the concave log partial likelihood.
        let slope = ev.score.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &beta + &dir * step;
            let ce = evaluate(input, &layout, &cand, &active);
            if ce.loglik.is_finite() && ce.loglik >= ev.loglik + 1e-4 * step * slope {
                accepted = Some((cand, ce));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((b, e)) => {
                beta = b;
                ev = e;
            }
            // No ascent possible in floating point: we are at the optimum
            // up to round-off.
            None => break,
        }
        converged = max_norm(&ev.score) <= SCORE_TOL;
    }
    if !converged && active.len() == 1 {
        if let Some((b, e)) = bisect_scalar(input, &layout, &active) {
            beta = b;
            ev = e;
            converged = max_norm(&ev.score) <= SCORE_TOL;
        }
    }
    if !converged {
        return Err(Error::Convergence { iterations, score_norm: max_norm(&ev.score) });
    }

    let mut full = vec![0.0; d];
    for (a, &j) in active.iter().enumerate() {
        full[j] = beta[a];
    }
    let (jump_times, hazard_jumps) = breslow(input, &layout, &full);
    Ok(CoxFit {
        beta: full,
        jump_times,
        hazard_jumps,
        score_norm: max_norm(&ev.score),
        iterations,
        degenerate,
    })
}

fn bisect_scalar(input: &CoxInput<'_>, layout: &RiskLayout, active: &[usize]) -> Option<(DVector<f64>, ScoreEval)> {
    let score_at = |b: f64| {
        let v = DVector::from_element(1, b);
        let e = evaluate(input, layout, &v, active);
        (e.score[0], v, e)
    };
    // The score is nonincreasing in beta; expand until it changes sign.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while score_at(lo).0 < 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return None;
        }
    }
    while score_at(hi).0 > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return None;
        }
    }
    let mut best = score_at(0.5 * (lo + hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        best = score_at(mid);
        if best.0.abs() <= SCORE_TOL || hi - lo < 1e-15 {
            break;
        }
        if best.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((best.1, best.2))
}

fn breslow(input: &CoxInput<'_>, layout: &RiskLayout, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let risk: Vec<f64> = input
        .z
        .iter()
        .map(|z| z.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>().exp())
        .collect();
    let mut s0 = 0.0;
    let mut out = Vec::new();
    for g in &layout.groups {
        for &i in &g.at_risk {
            s0 += risk[i];
        }
        if !g.events.is_empty() {
            out.push((g.time, g.events.len() as f64 / s0));
        }
        for &i in &g.late {
            s0 += risk[i];
        }
    }
    out.reverse();
    out.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn input<'a>(z: &'a [Vec<f64>], t: &[f64], ev: &[bool], rule: TieRule) -> CoxInput<'a> {
        CoxInput {
            z: z.iter().map(Vec::as_slice).collect(),
            times: t.to_vec(),
            is_event: ev.to_vec(),
            tie_rule: rule,
        }
    }

    #[test]
    fn symmetric_pair_has_zero_root() {
        let z = vec![vec![1.0], vec![-1.0]];
        let fit = fit_cox(&input(&z, &[1.0, 1.0], &[true, true], TieRule::ExcludeTiedOthers)).unwrap();
        assert_abs_diff_eq!(fit.beta[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_column_is_pinned() {
        let z = vec![vec![2.0, 0.1], vec![2.0, 0.7], vec![2.0, -0.3], vec![2.0, 0.2]];
        let fit = fit_cox(&input(&z, &[1.0, 2.0, 3.0, 4.0], &[true, true, false, true], TieRule::IncludeTiedOthers))
            .unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.beta[0], 0.0);
        assert!(fit.score_norm <= SCORE_TOL);
    }

    #[test]
    fn no_events_rejected() {
        let z = vec![vec![0.0]];
        assert!(matches!(
            fit_cox(&input(&z, &[1.0], &[false], TieRule::IncludeTiedOthers)),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn breslow_without_covariate_effect_is_nelson_aalen() {
        let z = vec![vec![0.0]; 4];
        let fit = fit_cox(&input(&z, &[1.0, 2.0, 2.0, 3.0], &[true, true, false, true], TieRule::IncludeTiedOthers))
            .unwrap();
        assert_eq!(fit.jump_times, vec![1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(fit.hazard_jumps[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.hazard_jumps[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.hazard_jumps[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.baseline_cum_hazard(2.5), 0.25 + 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.survival(2.0, &[0.0], true), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.survival(2.0, &[0.0], false), 0.5, epsilon = 1e-15);
    }
}
