//! Path simulation and the two observation schemes the estimators consume.
//!
//! The state is advanced on a fine grid with a positivity clamp:
//!
//! ```text
//! X_{t+dt} = max(0, D(X_t) + σ X_t^{1/α} ΔZ)
//! ```
//!
//! where the drift map `D` is either the plain Euler step
//! `x + (a - b x) dt` or the exact solution of the drift ODE over one step,
//! `x e^{-b dt} + a (1 - e^{-b dt}) / b` (the default). The latter keeps the
//! conditional mean over a unit interval exactly equal to `ρ + γ x`, so the
//! regression coefficients seen by the estimators carry no `O(dt)` bias.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;
use crate::model::{DerivedParams, ModelParams};
use crate::stable_noise::StableSampler;

/// Discretization of the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    #[default]
    ExactDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Burn-in time for stationary starts; `None` derives it from the
    /// ergodicity bound.
    pub burn_in: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            scheme: Scheme::ExactDrift,
            burn_in: None,
        }
    }
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// Tolerance on the total-variation bound used to size burn-in.
pub const BURN_IN_TV_TOL: f64 = 1e-4;
/// Burn-in starts from `a/b` and must cover starting points up to this
/// multiple of the stationary mean.
pub const BURN_IN_START_MULTIPLE: f64 = 5.0;
/// Minimum number of fine steps inside one high-frequency observation gap.
pub const MIN_SUBSTEPS: usize = 10;

/// A simulated path on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
}

impl Path {
    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.t0 + self.dt * i as f64)
    }

    /// Writes `t,x` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x"])?;
        for (t, x) in self.times().zip(&self.values) {
            w.write_record([g17(t), g17(*x)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Unit spacing, `X_0, X_1, ..., X_n`.
    Low,
    /// Spacing `1/n` on `[0, 1]`.
    High,
}

impl SamplingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMode::Low => "low",
            SamplingMode::High => "high",
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "low" => Ok(SamplingMode::Low),
            "high" => Ok(SamplingMode::High),
            other => Err(Error::Parse(format!("unknown sampling mode {other:?}"))),
        }
    }
}

/// Discrete observations `X_0, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    x: Vec<f64>,
    mode: SamplingMode,
}

impl Observations {
    pub fn new(x: Vec<f64>, mode: SamplingMode) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::DegenerateSample(format!(
                "need at least 3 observations (n >= 2), got {}",
                x.len()
            )));
        }
        if let Some((k, v)) = x.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("observation {k} is {v}; values must be finite and nonnegative")));
        }
        Ok(Self { x, mode })
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Number of transitions, `len - 1`.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# mode={}", self.mode.as_str())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "x"])?;
        for (k, x) in self.x.iter().enumerate() {
            w.write_record([k.to_string(), g17(*x)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Observations::write_csv`]. The mode
    /// comment is required; rows must be ordered by `k` starting at 0.
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let mode = first
            .trim()
            .strip_prefix('#')
            .and_then(|s| s.trim().strip_prefix("mode="))
            .ok_or_else(|| Error::Parse("first line must be a `# mode=<low|high>` comment".into()))?
            .parse()?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "k" || &headers[1] != "x" {
            return Err(Error::Parse(format!("expected header `k,x`, got {:?}", headers)));
        }
        let mut x = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let k: usize = rec[0].parse().map_err(|e| Error::Parse(format!("row {i}: bad k: {e}")))?;
            if k != i {
                return Err(Error::Parse(format!("row {i} has k = {k}; rows must be consecutive from 0")));
            }
            let v: f64 = rec[1].parse().map_err(|e| Error::Parse(format!("row {i}: bad x: {e}")))?;
            x.push(v);
        }
        Self::new(x, mode)
    }
}

/// Regression residuals `ε_k = X_k - ρ - γ X_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeq {
    pub eps: Vec<f64>,
}

pub fn residuals(obs: &Observations, derived: DerivedParams) -> ResidualSeq {
    let x = obs.values();
    ResidualSeq {
        eps: x
            .windows(2)
            .map(|w| w[1] - derived.rho - derived.gamma * w[0])
            .collect(),
    }
}

/// One-step transition of the discretized SDE.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    sampler: StableSampler,
    dt: f64,
    noise_scale: f64,
    inv_alpha: f64,
    keep: f64,
    inflow: f64,
}

impl Stepper {
    pub fn new(params: &ModelParams, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let (a, b) = (params.a(), params.b());
        let (keep, inflow) = match scheme {
            Scheme::Euler => (1.0 - b * dt, a * dt),
            Scheme::ExactDrift => ((-b * dt).exp(), -a / b * (-b * dt).exp_m1()),
        };
        let inv_alpha = 1.0 / params.alpha();
        Ok(Self {
            sampler: StableSampler::new(params.stable_spec()),
            dt,
            noise_scale: params.sigma() * dt.powf(inv_alpha),
            inv_alpha,
            keep,
            inflow,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let z = self.sampler.sample_unit(rng);
        let diffusion = if x > 0.0 { x.powf(self.inv_alpha) } else { 0.0 };
        let next = self.keep * x + self.inflow + self.noise_scale * diffusion * z;
        next.max(0.0)
    }

    /// Advances `steps` fine steps. `step_offset` only labels errors.
    pub fn advance<R: Rng + ?Sized>(&self, mut x: f64, steps: usize, step_offset: usize, rng: &mut R) -> Result<f64> {
        for i in 0..steps {
            x = self.step(x, rng);
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    step: step_offset + i,
                    what: "simulated state".into(),
                });
            }
        }
        Ok(x)
    }
}

/// Simulates `X` on `[0, horizon]` from `x0`. The step is shrunk slightly
/// if needed so that it divides the horizon.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    x0: f64,
    horizon: f64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Path> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("initial value must be nonnegative, got {x0}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let steps = grid_steps(horizon, cfg.dt)?;
    let stepper = Stepper::new(params, horizon / steps as f64, cfg.scheme)?;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(x0);
    let mut x = x0;
    for i in 0..steps {
        x = stepper.step(x, rng);
        if !x.is_finite() {
            return Err(Error::NonFinite {
                step: i,
                what: "simulated state".into(),
            });
        }
        values.push(x);
    }
    Ok(Path {
        t0: 0.0,
        dt: stepper.dt(),
        values,
        seed: None,
    })
}

/// Same as [`simulate_path`] on the stream derived from `seed`, which is
/// recorded on the returned path.
pub fn simulate_path_seeded(params: &ModelParams, x0: f64, horizon: f64, cfg: &SimConfig, seed: u64) -> Result<Path> {
    let mut rng = crate::rng::stream(seed);
    let mut path = simulate_path(params, x0, horizon, cfg, &mut rng)?;
    path.seed = Some(seed);
    Ok(path)
}

fn grid_steps(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0);
    if steps > 1e12 {
        return Err(Error::Domain(format!("{span}/{dt} needs too many steps")));
    }
    Ok(steps as usize)
}

/// Burn-in time after which a chain started anywhere in
/// `[0, 5 a/b]` is within `1e-4` of stationarity in total variation.
pub fn burn_in_time(params: &ModelParams) -> Result<f64> {
    params.time_to_tv(BURN_IN_START_MULTIPLE * params.stationary_mean(), BURN_IN_TV_TOL)
}

/// One approximately stationary draw: the terminal value of a chain started
/// at `a/b` and run for the burn-in time.
pub fn sample_stationary<R: Rng + ?Sized>(params: &ModelParams, cfg: &SimConfig, rng: &mut R) -> Result<f64> {
    let burn = match cfg.burn_in {
        Some(t) => t,
        None => burn_in_time(params)?,
    };
    let steps = grid_steps(burn, cfg.dt)?;
    let stepper = Stepper::new(params, burn / steps as f64, cfg.scheme)?;
    stepper.advance(params.stationary_mean(), steps, 0, rng)
}

/// `n + 1` unit-spaced observations of one stationary path.
pub fn sample_low_frequency<R: Rng + ?Sized>(
    params: &ModelParams,
    n: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Observations> {
    let substeps = grid_steps(1.0, cfg.dt)?;
    let stepper = Stepper::new(params, 1.0 / substeps as f64, cfg.scheme)?;
    let mut x = sample_stationary(params, cfg, rng)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    for k in 0..n {
        x = stepper.advance(x, substeps, k * substeps, rng)?;
        out.push(x);
    }
    Observations::new(out, SamplingMode::Low)
}

/// `n + 1` observations at spacing `1/n` on `[0, 1]` of a stationary path,
/// with at least [`MIN_SUBSTEPS`] fine steps per gap.
pub fn sample_high_frequency<R: Rng + ?Sized>(
    params: &ModelParams,
    n: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Observations> {
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let gap = 1.0 / n as f64;
    let substeps = grid_steps(gap, cfg.dt)?.max(MIN_SUBSTEPS);
    let stepper = Stepper::new(params, gap / substeps as f64, cfg.scheme)?;
    let mut x = sample_stationary(params, cfg, rng)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    for k in 0..n {
        x = stepper.advance(x, substeps, k * substeps, rng)?;
        out.push(x);
    }
    Observations::new(out, SamplingMode::High)
}

/// Sampler for `V =ᵈ σ p_α(1)^{1/α} Z_1`, the law of the stochastic
/// integral of the frozen-volatility noise over one unit interval.
#[derive(Debug, Clone, Copy)]
pub struct VSampler {
    sampler: StableSampler,
    scale: f64,
}

impl VSampler {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            sampler: StableSampler::new(params.stable_spec()),
            scale: v_scale(params),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.sampler.sample_unit(rng)
    }
}

/// `σ ((e^{-b} - e^{-αb}) / ((α-1) b))^{1/α}`.
pub fn v_scale(params: &ModelParams) -> f64 {
    params.sigma() * params.p_alpha(1.0).powf(1.0 / params.alpha())
}

pub fn sample_v<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    VSampler::new(params).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn unit15() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 1.5).unwrap()
    }

    #[test]
    fn path_grid_invariants() {
        let p = unit15();
        let path = simulate_path(&p, 2.0, 3.0, &SimConfig::with_dt(0.007), &mut stream(1)).unwrap();
        assert!((path.horizon() - 3.0).abs() < 1e-12);
        assert!(path.dt <= 0.007);
        assert!(path.values.iter().all(|&v| v >= 0.0));
        assert_eq!(path.values[0], 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = unit15();
        let cfg = SimConfig::default();
        assert!(simulate_path(&p, -1.0, 1.0, &cfg, &mut stream(1)).is_err());
        assert!(simulate_path(&p, 1.0, 0.0, &cfg, &mut stream(1)).is_err());
        assert!(simulate_path(&p, 1.0, 1.0, &SimConfig::with_dt(0.0), &mut stream(1)).is_err());
    }

    #[test]
    fn deterministic_skeleton() {
        let p = ModelParams::degenerate(1.0, 1.0, 0.0, 1.5).unwrap();
        let exact = |t: f64| 2.0 * (-t).exp() + (1.0 - (-t).exp());
        let mut errs = Vec::new();
        for dt in [0.1, 0.01, 0.001] {
            let cfg = SimConfig {
                dt,
                scheme: Scheme::Euler,
                burn_in: None,
            };
            let path = simulate_path(&p, 2.0, 2.0, &cfg, &mut stream(3)).unwrap();
            errs.push((path.values.last().unwrap() - exact(2.0)).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-3, "{errs:?}");
        // the exact-drift scheme reproduces the skeleton at any step
        let path = simulate_path(&p, 2.0, 2.0, &SimConfig::with_dt(0.25), &mut stream(3)).unwrap();
        assert!((path.values.last().unwrap() - exact(2.0)).abs() < 1e-14);
    }

    #[test]
    fn residuals_of_noiseless_sequence_vanish() {
        let p = unit15();
        let d = p.derived();
        let mut x = vec![3.0];
        for _ in 0..20 {
            let last = *x.last().unwrap();
            x.push(d.rho + d.gamma * last);
        }
        let obs = Observations::new(x, SamplingMode::Low).unwrap();
        assert!(residuals(&obs, d).eps.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn observations_validation() {
        assert!(Observations::new(vec![1.0, 2.0], SamplingMode::Low).is_err());
        assert!(Observations::new(vec![1.0, -2.0, 1.0], SamplingMode::Low).is_err());
        assert!(Observations::new(vec![1.0, f64::NAN, 1.0], SamplingMode::Low).is_err());
        assert!(Observations::new(vec![1.0, 2.0, 1.0], SamplingMode::High).is_ok());
    }

    #[test]
    fn observation_csv_round_trip() {
        let obs = Observations::new(vec![0.1, 2.0 / 3.0, 1e-9, 7.0], SamplingMode::High).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# mode=high\nk,x\n0,0.10000000000000001\n"));
        let back = Observations::read_csv(&buf[..]).unwrap();
        assert_eq!(back, obs);
        assert!(Observations::read_csv("k,x\n0,1\n1,2\n2,3\n".as_bytes()).is_err());
        assert!(Observations::read_csv("# mode=low\nk,x\n0,1\n2,2\n3,3\n".as_bytes()).is_err());
    }

    #[test]
    fn path_csv_format() {
        let path = Path {
            t0: 0.0,
            dt: 0.5,
            values: vec![1.0, 0.25, 1.0 / 3.0],
            seed: None,
        };
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,x\n0,1\n0.5,0.25\n1,0.33333333333333331\n"
        );
    }

    #[test]
    fn high_frequency_grid() {
        let p = unit15();
        let cfg = SimConfig {
            burn_in: Some(1.0),
            ..SimConfig::default()
        };
        let obs = sample_high_frequency(&p, 50, &cfg, &mut stream(5)).unwrap();
        assert_eq!(obs.n(), 50);
        assert_eq!(obs.mode(), SamplingMode::High);
    }

    #[test]
    fn v_scale_small_b_limit() {
        let p = ModelParams::new(1.0, 1e-7, 1.3, 1.5).unwrap();
        assert!((v_scale(&p) - 1.3).abs() < 1e-6);
    }
}
