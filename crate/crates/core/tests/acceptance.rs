//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use stable_cir::campaign::{run_campaign, summarize, CampaignFamily, CampaignResult, McCampaign};
use stable_cir::diagnostics::{mixing_decay, tail_report};
use stable_cir::estimators::{clse, default_sigma_tuning, sigma_hat, wclse};
use stable_cir::limit_laws::{exact_ergodic_functionals, wclse_cf_table, U_GRID};
use stable_cir::rng::{derive_seed, stream};
use stable_cir::simulator::{
    sample_high_frequency, sample_low_frequency, sample_stationary, simulate_path, Scheme, Stepper,
};
use stable_cir::stable_noise::{StableSampler, StableSpec};
use stable_cir::validate::{cumulant_ode_error, semigroup_error};
use stable_cir::{Family, ModelParams, Observations, SamplingMode, SimConfig};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn default_params() -> ModelParams {
    ModelParams::new(1.0, 1.0, 1.0, 1.5).unwrap()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn laplace(x: &[f64], lam: f64) -> f64 {
    x.iter().map(|v| (-lam * v).exp()).sum::<f64>() / x.len() as f64
}

fn cumulant_oracle() -> Outcome {
    let sets = [(1.0, 1.0, 1.0, 1.5), (0.5, 2.0, 0.7, 1.2), (2.0, 0.3, 1.5, 1.9), (1.0, 1.0, 1.0, 2.0)];
    let (mut ode, mut semi): (f64, f64) = (0.0, 0.0);
    for (a, b, s, al) in sets {
        let p = ModelParams::new(a, b, s, al).unwrap();
        ode = ode.max(cumulant_ode_error(&p));
        semi = semi.max(semigroup_error(&p));
    }
    outcome(ode <= 1e-8 && semi <= 1e-8, format!("rk4 rel err {ode:.2e}, semigroup rel err {semi:.2e}"))
}

fn noise_normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [1.3, 1.5, 1.8, 2.0] {
        let spec = StableSpec::new(alpha).unwrap();
        let s = StableSampler::new(spec);
        let mut r = stream(derive_seed(SEED, &format!("noise-{alpha}")));
        let z: Vec<f64> = (0..1_000_000).map(|_| s.sample_unit(&mut r)).collect();
        for lam in [0.5, 1.0, 2.0] {
            let exact = spec.laplace_exponent(lam).exp();
            worst = worst.max((laplace(&z, lam) / exact - 1.0).abs());
        }
    }
    outcome(worst <= 0.02, format!("worst relative error {worst:.4}"))
}

fn transition_mean() -> Outcome {
    let p = default_params();
    let dt = 1e-3;
    let stepper = Stepper::new(&p, dt, Scheme::ExactDrift).unwrap();
    let mut r = stream(derive_seed(SEED, "transition"));
    let n = 100_000;
    let x: Vec<f64> = (0..n).map(|_| stepper.advance(2.0, 1000, 0, &mut r).unwrap()).collect();
    let m = mean(&x);
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    let target = 1.0 + (-1.0f64).exp();
    let tol = 3.0 * se + 0.01 * target;
    outcome(
        (m - target).abs() <= tol,
        format!("mean {m:.5} vs {target:.5}, tolerance {tol:.5}"),
    )
}

fn stationary_law() -> Outcome {
    let p = default_params();
    let cfg = SimConfig::default();
    let mut r = stream(derive_seed(SEED, "stationary"));
    let x: Vec<f64> = (0..100_000).map(|_| sample_stationary(&p, &cfg, &mut r).unwrap()).collect();
    let mean_err = (mean(&x) / p.stationary_mean() - 1.0).abs();
    let mut lap_err: f64 = 0.0;
    for lam in [0.5, 1.0, 2.0] {
        lap_err = lap_err.max((laplace(&x, lam) / p.stationary_laplace(lam).unwrap() - 1.0).abs());
    }
    outcome(
        mean_err <= 0.02 && lap_err <= 0.01,
        format!("mean rel err {mean_err:.4}, Laplace rel err {lap_err:.4}"),
    )
}

fn tail_indices() -> Outcome {
    let p = default_params();
    let obs = sample_low_frequency(&p, 1_000_000, &SimConfig::default(), &mut stream(derive_seed(SEED, "tail"))).unwrap();
    let d = p.derived();
    let t = tail_report(obs.values(), d.gamma, d.rho, p.alpha(), None).unwrap();
    let ok = (t.hill_x - t.expected_x).abs() <= 0.15
        && (t.hill_abs_eps - t.expected_abs_eps).abs() <= 0.15
        && (t.hill_abs_x_eps - t.expected_abs_x_eps).abs() <= 0.15;
    outcome(
        ok,
        format!(
            "k {}: X {:.3} (→{:.3}), |ε| {:.3} (→{:.3}), |Xε| {:.3} (→{:.3})",
            t.k, t.hill_x, t.expected_x, t.hill_abs_eps, t.expected_abs_eps, t.hill_abs_x_eps, t.expected_abs_x_eps
        ),
    )
}

fn exact_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for (gamma, rho, x0) in [(0.5, 1.5, 10.0), (0.9, 0.1, 0.0), (0.2, 3.0, 50.0), (0.999, 0.01, 2.0)] {
        let mut x = vec![x0];
        for _ in 0..30 {
            x.push(rho + gamma * x.last().unwrap());
        }
        let obs = Observations::new(x, SamplingMode::Low).unwrap();
        for e in [clse(&obs).unwrap(), wclse(&obs).unwrap()] {
            worst = worst.max((e.gamma - gamma).abs()).max((e.rho - rho).abs());
        }
    }
    outcome(worst <= 1e-12, format!("worst abs error {worst:.2e}"))
}

fn campaign() -> CampaignResult {
    let cfg = McCampaign {
        a: 1.0,
        b: 1.0,
        sigma: 1.0,
        alpha: 1.5,
        dt: 0.01,
        ns: vec![1_000, 10_000, 100_000],
        replications: 500,
        base_seed: SEED,
        families: vec![CampaignFamily::Clse, CampaignFamily::Wclse],
        p: None,
        delta: None,
        output_dir: None,
        burn_in: None,
    };
    run_campaign(&cfg).unwrap()
}

fn rates(full: &CampaignResult) -> Outcome {
    let mut cfg = full.config.clone();
    cfg.replications = 200;
    let records = full.records.iter().filter(|r| r.rep < 200).cloned().collect();
    let res = summarize(&cfg, &cfg.params().unwrap(), records).unwrap();
    let w = res.rate_fit(Family::Wclse, "b").unwrap().slope;
    let c = res.rate_fit(Family::Clse, "b").unwrap().slope;
    let (tw, tc) = (-1.0 / 3.0, -2.0 / 9.0);
    outcome(
        (w - tw).abs() <= 0.1 && (c - tc).abs() <= 0.1,
        format!("WCLSE slope {w:.3} (→{tw:.3}), CLSE slope {c:.3} (→{tc:.3})"),
    )
}

fn limit_charfn(full: &CampaignResult) -> Outcome {
    let p = default_params();
    let n = 100_000;
    let draws = sample_low_frequency(&p, 100_000, &SimConfig::default(), &mut stream(derive_seed(SEED, "ergodic"))).unwrap();
    let erg = exact_ergodic_functionals(&p).unwrap();
    let errors = full.scaled_errors(Family::Wclse, n).unwrap();
    let rows = wclse_cf_table(&p, &erg, &errors, draws.values(), &U_GRID).unwrap();
    let worst = rows.iter().map(|r| r.abs_err()).fold(0.0, f64::max);
    outcome(
        worst <= 0.08,
        format!("{} points, {} replications, worst |Δφ| {worst:.4}", rows.len(), errors.len()),
    )
}

fn volatility() -> Outcome {
    let p = default_params();
    let cfg = SimConfig::default();
    let (q, delta) = default_sigma_tuning(p.alpha());
    let mut hits = 0;
    let mut values = Vec::new();
    for rep in 0..50 {
        let mut r = stream(derive_seed(SEED, &format!("sigma-{rep}")));
        let obs = sample_high_frequency(&p, 100_000, &cfg, &mut r).unwrap();
        let s = sigma_hat(&obs, p.alpha(), q, delta).unwrap();
        hits += ((s - 1.0).abs() <= 0.05) as usize;
        values.push(s);
    }
    outcome(
        hits >= 45,
        format!("{hits}/50 within 5% (p {q}, δ {delta:.3}, mean σ̂ {:.4})", mean(&values)),
    )
}

fn ergodicity() -> Outcome {
    let p = default_params();
    let times: Vec<f64> = (1..=50).map(|k| k as f64).collect();
    let bounds: Vec<f64> = times.iter().map(|&t| p.tv_bound(5.0, t).unwrap()).collect();
    let monotone = bounds.windows(2).all(|w| w[1] < w[0]);
    let path = simulate_path(&p, 1.0, 10_000.0, &SimConfig::default(), &mut stream(derive_seed(SEED, "mixing"))).unwrap();
    let fit = mixing_decay(&path, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0]).unwrap();
    outcome(
        monotone && fit.rate >= 0.5 * p.b() && fit.rate <= 1.5 * p.b(),
        format!("tv_bound monotone: {monotone}, mixing rate {:.3} (r² {:.3})", fit.rate, fit.r2),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] criterion {id:>2} {name}: {} ({:.1}s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += (!o.passed) as usize;
    };
    report(1, "cumulant oracle", &mut cumulant_oracle);
    report(2, "noise normalization", &mut noise_normalization);
    report(3, "transition mean", &mut transition_mean);
    report(4, "stationary law", &mut stationary_law);
    report(5, "tail indices", &mut tail_indices);
    report(6, "exact recovery", &mut exact_recovery);
    let start = Instant::now();
    let full = campaign();
    println!("campaign with 500 replications finished in {:.1}s", start.elapsed().as_secs_f64());
    report(7, "consistency and rates", &mut || rates(&full));
    report(8, "limit characteristic function", &mut || limit_charfn(&full));
    report(9, "volatility estimator", &mut volatility);
    report(10, "ergodicity", &mut ergodicity);
    if failed == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
