//! Tail-index, rate and mixing diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CompensatedSum;
use crate::model::ModelParams;
use crate::rng;
use crate::simulator::{sample_low_frequency, simulate_path, Path, SimConfig};

/// Smallest number of order statistics the Hill estimator accepts.
pub const HILL_MIN_K: usize = 10;

/// Default number of order statistics: `⌈n^{2/3}⌉`.
pub fn default_hill_k(n: usize) -> usize {
    (n as f64).powf(2.0 / 3.0).ceil() as usize
}

/// Hill estimate of the tail index from the `k` largest samples:
/// the inverse of the mean of `ln(X_(i) / X_(k+1))`, `i = 1..k`.
pub fn hill(samples: &[f64], k: usize) -> Result<f64> {
    if k < HILL_MIN_K || k >= samples.len() {
        return Err(Error::Domain(format!(
            "need {HILL_MIN_K} <= k < {}, got k = {k}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("Hill estimator needs positive finite samples, got {bad}")));
    }
    let mut v = samples.to_vec();
    // after partitioning, v[..k] holds the k largest and v[k] the (k+1)-th
    let (top, threshold, _) = v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let log_threshold = threshold.ln();
    let mut acc = CompensatedSum::default();
    for x in top.iter() {
        acc.add(x.ln() - log_threshold);
    }
    let mean = acc.value() / k as f64;
    if !(mean > 0.0) {
        return Err(Error::DegenerateSample("the top order statistics are all equal".into()));
    }
    Ok(1.0 / mean)
}

/// Least-squares line through `(ln n, ln err)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub log_n: Vec<f64>,
    pub log_err: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fits `ln err = intercept + slope · ln n`.
pub fn rate_regression(ns: &[f64], errors: &[f64]) -> Result<RateFit> {
    if ns.len() != errors.len() {
        return Err(Error::Domain("sample sizes and errors differ in length".into()));
    }
    if ns.len() < 2 {
        return Err(Error::Domain("a rate fit needs at least two points".into()));
    }
    if ns.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("sample sizes and errors must be positive".into()));
    }
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let log_err: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (slope, intercept, r2) = least_squares(&log_n, &log_err)?;
    Ok(RateFit {
        log_n,
        log_err,
        slope,
        intercept,
        r2,
    })
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSample("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let r = v - intercept - slope * u;
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok((slope, intercept, r2))
}

/// `(1/N) Σ e^{-λ x_i}`.
pub fn empirical_laplace(samples: &[f64], lam: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for &x in samples {
        acc.add((-lam * x).exp());
    }
    acc.value() / samples.len() as f64
}

/// Largest relative deviation `|L̂(λ) - L(λ)| / L(λ)` over the grid.
pub fn laplace_compare<F>(samples: &[f64], lam_grid: &[f64], reference: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if lam_grid.is_empty() {
        return Ok(0.0);
    }
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let mut worst: f64 = 0.0;
    for &lam in lam_grid {
        let r = reference(lam)?;
        if !(r > 0.0) {
            return Err(Error::Domain(format!("reference Laplace transform {r} at {lam} is not positive")));
        }
        worst = worst.max((empirical_laplace(samples, lam) - r).abs() / r);
    }
    Ok(worst)
}

/// Exponential fit to the autocovariance of `e^{-X}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingFit {
    pub lags: Vec<f64>,
    pub covariances: Vec<f64>,
    /// `-d ln cov / d lag` over the lags with positive covariance.
    pub rate: f64,
    pub r2: f64,
}

/// Sample autocovariances of `values` at the given lags (in steps).
pub fn lag_covariances(values: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    let n = values.len();
    let mut mean = CompensatedSum::default();
    values.iter().for_each(|&v| mean.add(v));
    let mean = mean.value() / n as f64;
    lags.iter()
        .map(|&lag| {
            if lag + 2 > n {
                return Err(Error::Domain(format!("lag {lag} is too long for {n} values")));
            }
            let mut acc = CompensatedSum::default();
            for k in 0..n - lag {
                acc.add((values[k] - mean) * (values[k + lag] - mean));
            }
            Ok(acc.value() / (n - lag) as f64)
        })
        .collect()
}

/// Decay rate of `cov(e^{-X_s}, e^{-X_{s+t}})` in `t` for a series with
/// spacing `spacing`; `lags` are in time units and rounded to the grid.
pub fn mixing_decay_series(values: &[f64], spacing: f64, lags: &[f64]) -> Result<MixingFit> {
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!("spacing must be positive, got {spacing}")));
    }
    let steps: Vec<usize> = lags
        .iter()
        .map(|&l| {
            if l > 0.0 {
                Ok((l / spacing).round().max(1.0) as usize)
            } else {
                Err(Error::Domain(format!("lags must be positive, got {l}")))
            }
        })
        .collect::<Result<_>>()?;
    let bounded: Vec<f64> = values.iter().map(|x| (-x).exp()).collect();
    let covariances = lag_covariances(&bounded, &steps)?;
    let lags: Vec<f64> = steps.iter().map(|&s| s as f64 * spacing).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = lags
        .iter()
        .zip(&covariances)
        .filter(|(_, c)| **c > 0.0)
        .map(|(l, c)| (*l, c.ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::DegenerateSample(
            "fewer than two lags with positive covariance".into(),
        ));
    }
    let (slope, _, r2) = least_squares(&x, &y)?;
    Ok(MixingFit {
        lags,
        covariances,
        rate: -slope,
        r2,
    })
}

/// [`mixing_decay_series`] on the grid values of a path.
pub fn mixing_decay(path: &Path, lags: &[f64]) -> Result<MixingFit> {
    mixing_decay_series(&path.values, path.dt, lags)
}

/// Tail indices of the stationary level, the residuals and their products
/// with the lagged level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub hill_x: f64,
    pub hill_abs_eps: f64,
    pub hill_abs_x_eps: f64,
    pub expected_x: f64,
    pub expected_abs_eps: f64,
    pub expected_abs_x_eps: f64,
}

/// Hill estimates for `X_k`, `|ε_k|` and `|X_{k-1} ε_k|` on unit-spaced
/// observations, with `ε_k = X_k - γ X_{k-1} - ρ` at the true `(γ, ρ)`.
pub fn tail_report(x: &[f64], gamma: f64, rho: f64, alpha: f64, k: Option<usize>) -> Result<TailReport> {
    if x.len() < 2 {
        return Err(Error::Domain("need at least two observations".into()));
    }
    let n = x.len() - 1;
    let k = k.unwrap_or_else(|| default_hill_k(n));
    let mut abs_eps = Vec::with_capacity(n);
    let mut abs_x_eps = Vec::with_capacity(n);
    for w in x.windows(2) {
        let eps = w[1] - gamma * w[0] - rho;
        abs_eps.push(eps.abs());
        abs_x_eps.push((w[0] * eps).abs());
    }
    let levels: Vec<f64> = x[1..].to_vec();
    Ok(TailReport {
        n,
        k,
        alpha,
        hill_x: hill(&levels, k)?,
        hill_abs_eps: hill(&abs_eps, k)?,
        hill_abs_x_eps: hill(&abs_x_eps, k)?,
        expected_x: alpha,
        expected_abs_eps: alpha,
        expected_abs_x_eps: alpha * alpha / (alpha + 1.0),
    })
}

/// Mixing diagnostics of one long path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub horizon: f64,
    pub b: f64,
    pub fit: MixingFit,
    /// `(t, tv_bound(x0, t))` pairs.
    pub tv_bound: Vec<(f64, f64)>,
}

/// Lags (in time units) used by [`diagnose`] for the mixing fit.
pub const MIXING_LAGS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

/// Times at which [`diagnose`] reports the total-variation bound.
pub const TV_TIMES: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub tail: TailReport,
    pub mixing: MixingReport,
}

/// Tail indices from `n` unit-spaced stationary observations and the
/// mixing fit of one path of length `horizon` started at `a/b`.
pub fn diagnose(
    params: &ModelParams,
    cfg: &SimConfig,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<DiagnosticReport> {
    let obs = sample_low_frequency(params, n, cfg, &mut rng::stream(rng::derive_seed(seed, "tail")))?;
    let d = params.derived();
    let tail = tail_report(obs.values(), d.gamma, d.rho, params.alpha(), None)?;
    let x0 = params.stationary_mean();
    let path = simulate_path(params, x0, horizon, cfg, &mut rng::stream(rng::derive_seed(seed, "mixing")))?;
    let fit = mixing_decay(&path, &MIXING_LAGS)?;
    let tv_bound = TV_TIMES
        .iter()
        .map(|&t| Ok((t, params.tv_bound(x0, t)?)))
        .collect::<Result<_>>()?;
    Ok(DiagnosticReport {
        tail,
        mixing: MixingReport {
            horizon,
            b: params.b(),
            fit,
            tv_bound,
        },
    })
}
