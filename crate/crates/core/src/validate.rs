//! Oracle battery: closed forms checked against independent numerical
//! routes (ODE integration, finite differences, Monte Carlo).

use serde::{Deserialize, Serialize};

use crate::diagnostics::{empirical_laplace, hill};
use crate::error::Result;
use crate::model::ModelParams;
use crate::rng;
use crate::simulator::{simulate_path, SimConfig};
use crate::stable_noise::StableSampler;

/// Step of the Runge-Kutta oracle.
pub const RK4_STEP: f64 = 1e-4;

/// `(v_t(λ), ∫_0^t v_s(λ) ds)` by classical RK4 on `dv/dt = -φ(v)`,
/// `v_0 = λ`, with the integral carried as a second component.
pub fn rk4_cumulant(params: &ModelParams, lam: f64, t: f64, h: f64) -> (f64, f64) {
    let steps = (t / h).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let f = |v: f64| -params.branching(v.max(0.0));
    let (mut v, mut int) = (lam, 0.0);
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * h * k1);
        let k3 = f(v + 0.5 * h * k2);
        let k4 = f(v + h * k3);
        // the integral's derivative is v itself, evaluated at the same stages
        int += h / 6.0 * (v + 2.0 * (v + 0.5 * h * k1) + 2.0 * (v + 0.5 * h * k2) + (v + h * k3));
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    (v, int)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Worst observed discrepancy.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Grid for the deterministic checks.
pub const LAMBDA_GRID: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const TIME_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Closed-form cumulant versus RK4, worst relative error over the grid.
pub fn cumulant_ode_error(params: &ModelParams) -> f64 {
    let mut worst: f64 = 0.0;
    for &lam in &LAMBDA_GRID {
        for &t in &TIME_GRID {
            let (v, _) = rk4_cumulant(params, lam, t, RK4_STEP);
            worst = worst.max(rel(params.v(lam, t), v));
        }
    }
    worst
}

/// Worst relative violation of `v_{r+t}(λ) = v_r(v_t(λ))`.
pub fn semigroup_error(params: &ModelParams) -> f64 {
    let mut worst: f64 = 0.0;
    for &lam in &LAMBDA_GRID {
        for &r in &TIME_GRID {
            for &t in &TIME_GRID {
                worst = worst.max(rel(params.v(params.v(lam, t), r), params.v(lam, r + t)));
            }
        }
    }
    worst
}

/// Quadrature `∫ v` versus the RK4 integral component.
pub fn int_v_error(params: &ModelParams) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &lam in &LAMBDA_GRID {
        for &t in &TIME_GRID {
            let (_, int) = rk4_cumulant(params, lam, t, RK4_STEP);
            worst = worst.max(rel(params.int_v(lam, t)?, int));
        }
    }
    Ok(worst)
}

/// Step of the difference quotient in [`transition_mean_fd_error`].
pub const FD_STEP: f64 = 1e-12;

/// Transition mean versus the difference quotient
/// `(x v_t(h) + a ∫_0^t v_s(h) ds) / h = -ln E_x[e^{-h X_t}] / h`, which
/// converges at rate `h^{α-1}` because `X_t` has no second moment.
pub fn transition_mean_fd_error(params: &ModelParams) -> Result<f64> {
    let h = FD_STEP;
    let mut worst: f64 = 0.0;
    for &x in &[0.0, 0.5, 2.0] {
        for &t in &TIME_GRID {
            let fd = (x * params.v(h, t) + params.a() * params.int_v(h, t)?) / h;
            worst = worst.max(rel(fd, params.transition_mean(x, t)));
        }
    }
    Ok(worst)
}

/// Tolerance matching the `h^{α-1}` bias of [`transition_mean_fd_error`].
pub fn transition_mean_fd_tolerance(params: &ModelParams) -> f64 {
    (10.0 * FD_STEP.powf(params.alpha() - 1.0)).max(1e-8)
}

/// Invariance of the stationary law:
/// `L_μ(λ) = L_μ(v_t(λ)) exp(-a ∫_0^t v_s(λ) ds)`.
pub fn stationary_fixed_point_error(params: &ModelParams) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &lam in &LAMBDA_GRID {
        for &t in &TIME_GRID {
            let rhs = params.stationary_laplace(params.v(lam, t))? * (-params.a() * params.int_v(lam, t)?).exp();
            worst = worst.max(rel(rhs, params.stationary_laplace(lam)?));
        }
    }
    Ok(worst)
}

/// `v_t(λ)` at very large `λ` versus `v̄_t`, with the tolerance implied by
/// the leading correction `v_t(λ)/v̄_t - 1 ≈ -1/((α-1) K λ^{α-1})`,
/// `K = σ^α (1 - e^{-(α-1)bt}) / (αb)`.
pub fn vbar_limit_check(params: &ModelParams) -> Result<(f64, f64)> {
    let am1 = params.alpha() - 1.0;
    let (mut worst, mut tol): (f64, f64) = (0.0, 1e-8);
    for &t in &TIME_GRID {
        let k = params.sigma().powf(params.alpha()) * (-(-am1 * params.b() * t).exp_m1()) / (params.alpha() * params.b());
        let lam = (1e12 / k).powf(1.0 / am1).min(1e300);
        worst = worst.max(rel(params.v(lam, t), params.vbar(t)?));
        tol = tol.max(2.0 / (am1 * k * lam.powf(am1)));
    }
    Ok((worst, tol))
}

/// Monte Carlo budget of the stochastic checks.
pub const MC_DRAWS: usize = 200_000;

/// Runs the battery. Stochastic checks use `seed` and tolerances of
/// several standard errors.
pub fn validate(params: &ModelParams, seed: u64) -> Result<ValidationReport> {
    let mut checks = vec![
        CheckResult::new("cumulant_ode", cumulant_ode_error(params), 1e-8),
        CheckResult::new("semigroup", semigroup_error(params), 1e-8),
        CheckResult::new("int_v_ode", int_v_error(params)?, 1e-8),
        CheckResult::new(
            "transition_mean_fd",
            transition_mean_fd_error(params)?,
            transition_mean_fd_tolerance(params),
        ),
        CheckResult::new("stationary_fixed_point", stationary_fixed_point_error(params)?, 1e-8),
    ];
    let (vbar_err, vbar_tol) = vbar_limit_check(params)?;
    checks.push(CheckResult::new("vbar_limit", vbar_err, vbar_tol));

    // noise normalization
    let sampler = StableSampler::new(params.stable_spec());
    let mut r = rng::stream(rng::derive_seed(seed, "noise"));
    let z: Vec<f64> = (0..MC_DRAWS).map(|_| sampler.sample_unit(&mut r)).collect();
    let mut worst: f64 = 0.0;
    for lam in [0.5, 1.0] {
        let exact = params.stable_spec().laplace_exponent(lam).exp();
        worst = worst.max(rel(empirical_laplace(&z, lam), exact));
    }
    checks.push(CheckResult::new("noise_laplace", worst, 0.03));

    // one long path: stationary mean, Laplace transform and tail
    let cfg = SimConfig::default();
    let horizon = 20_000.0;
    let mut r = rng::stream(rng::derive_seed(seed, "path"));
    let path = simulate_path(params, params.stationary_mean(), horizon, &cfg, &mut r)?;
    let stride = (1.0 / cfg.dt).round() as usize;
    let x: Vec<f64> = path.values.iter().step_by(stride).skip(50).copied().collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    checks.push(CheckResult::new("stationary_mean", rel(mean, params.stationary_mean()), 0.1));
    let mut worst: f64 = 0.0;
    for lam in [0.5, 1.0, 2.0] {
        worst = worst.max(rel(empirical_laplace(&x, lam), params.stationary_laplace(lam)?));
    }
    checks.push(CheckResult::new("stationary_laplace", worst, 0.03));
    if params.alpha() < 2.0 {
        let positive: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
        let k = (positive.len() / 20).max(10);
        let h = hill(&positive, k)?;
        checks.push(CheckResult::new("stationary_tail_index", (h - params.alpha()).abs(), 0.4));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        a: params.a(),
        b: params.b(),
        sigma: params.sigma(),
        alpha: params.alpha(),
        checks,
        passed,
    })
}
