//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Loss written out from its definition.
pub fn loss(kind: &str, alpha: f64, y: f64, s: f64) -> f64 {
    match kind {
        "hinge" => (1.0 - y * s).max(0.0),
        "squared" => (y - s).powi(2),
        "absolute" => (y - s).abs(),
        "quantile" => {
            if s < y {
                alpha * (y - s)
            } else {
                (1.0 - alpha) * (s - y)
            }
        }
        _ => unreachable!(),
    }
}

pub fn loss_slope(kind: &str, alpha: f64, y: f64, s: f64) -> f64 {
    match kind {
        "hinge" => {
            if y * s < 1.0 {
                -y
            } else {
                0.0
            }
        }
        "squared" => 2.0 * (s - y),
        "absolute" => (s - y).signum() * ((s != y) as i32 as f64),
        "quantile" => {
            if s < y {
                -alpha
            } else if s > y {
                1.0 - alpha
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    }
}

/// Long-run projected subgradient reference for
/// `lambda ||f||^2 + sum_i c_i L(y_i, f(z_i))`, run in the coordinates
/// `f = R c` with `K = R R'` so the regularizer is `lambda ||c||^2`.
/// Iterates are projected onto the ball `lambda ||c||^2 <= F(0)` that must
/// contain the minimizer. Returns the best objective seen among the
/// iterates and their weighted average.
pub fn reference_objective(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: &[f64],
    kind: &str,
    alpha: f64,
    lambda: f64,
    iters: usize,
) -> f64 {
    let n = y.len();
    let eig = gram.clone().symmetric_eigen();
    let root = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt());
    let value = |x: &DVector<f64>| {
        let f = &root * x;
        lambda * x.norm_squared() + (0..n).map(|i| c[i] * loss(kind, alpha, y[i], f[i])).sum::<f64>()
    };
    let radius = (value(&DVector::zeros(n)) / lambda).sqrt();
    let mut x = DVector::zeros(n);
    let mut avg = DVector::zeros(n);
    let mut wsum = 0.0;
    let mut best = value(&x);
    let m = 2.0 * lambda;
    for k in 0..iters {
        let f = &root * &x;
        let g = DVector::from_fn(n, |i, _| c[i] * loss_slope(kind, alpha, y[i], f[i]));
        let sub = &x * (2.0 * lambda) + root.tr_mul(&g);
        let step = 2.0 / (m * (k as f64 + 2.0));
        x -= sub * step;
        let nrm = x.norm();
        if nrm > radius {
            x *= radius / nrm;
        }
        let wk = k as f64 + 1.0;
        wsum += wk;
        avg += (&x - &avg) * (wk / wsum);
        if k % 1000 == 0 || k + 1 == iters {
            best = best.min(value(&x));
        }
    }
    best.min(value(&avg))
}

/// Product-limit censoring survival computed straight from the definition:
/// for each distinct censoring time `s <= t`, multiply by
/// `1 - #{u = s, censored} / (#{u > s} + #{u = s, censored})`.
pub fn brute_km(u: &[f64], delta: &[bool], t: f64) -> f64 {
    let mut times: Vec<f64> = (0..u.len()).filter(|&i| !delta[i] && u[i] <= t).map(|i| u[i]).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut s = 1.0;
    for &time in &times {
        let d = (0..u.len()).filter(|&i| u[i] == time && !delta[i]).count() as f64;
        let r = (0..u.len()).filter(|&i| u[i] > time || (u[i] == time && !delta[i])).count() as f64;
        s *= 1.0 - d / r;
    }
    s
}

/// Normalized Cox score for a single covariate with censorings as events
/// and the censoring tie rule, written out term by term.
pub fn cox_score_1d(z: &[f64], u: &[f64], delta: &[bool], beta: f64) -> f64 {
    let n = z.len();
    let mut total = 0.0;
    for i in 0..n {
        if delta[i] {
            continue;
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for j in 0..n {
            if u[j] > u[i] || (u[j] == u[i] && !delta[j]) {
                let e = (beta * z[j]).exp();
                s0 += e;
                s1 += z[j] * e;
            }
        }
        total += z[i] - s1 / s0;
    }
    total / n as f64
}

/// Root of a nonincreasing scalar function on `[lo, hi]` by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
