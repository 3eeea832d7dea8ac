//! Monte Carlo campaigns: simulate many independent samples, estimate,
//! and aggregate errors across sample sizes.

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::diagnostics::{rate_regression, RateFit};
use crate::error::{Error, Result};
use crate::estimators::{default_sigma_tuning, estimate, sigma_hat, EstimateSet, Family};
use crate::format::g17;
use crate::limit_laws::{partial_sums, NormalizationSchedule, PartialSums};
use crate::model::ModelParams;
use crate::rng::{self, replication_seed};
use crate::simulator::{sample_high_frequency, sample_low_frequency, SimConfig};

/// Estimators a campaign can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignFamily {
    Clse,
    Wclse,
    /// The power-variation volatility estimator on high-frequency data.
    Sigma,
}

impl CampaignFamily {
    fn drift(&self) -> Option<Family> {
        match self {
            CampaignFamily::Clse => Some(Family::Clse),
            CampaignFamily::Wclse => Some(Family::Wclse),
            CampaignFamily::Sigma => None,
        }
    }
}

/// Campaign configuration, read from a flat JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McCampaign {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub families: Vec<CampaignFamily>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the burn-in time derived from the ergodicity bound.
    #[serde(skip)]
    pub burn_in: Option<f64>,
}

/// Largest fraction of failed or degenerate replications a campaign
/// tolerates in any cell.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.2;

/// Quantile levels reported for error distributions.
pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

impl McCampaign {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &FsPath) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.a, self.b, self.sigma, self.alpha)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            burn_in: self.burn_in,
            ..SimConfig::default()
        }
    }

    /// `(p, δ)` for the volatility estimator, with defaults filled in.
    pub fn sigma_tuning(&self) -> (f64, f64) {
        let (p, d) = default_sigma_tuning(self.alpha);
        (self.p.unwrap_or(p), self.delta.unwrap_or(d))
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, 1], got {}", self.dt)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.ns.is_empty() {
            return Err(Error::InvalidParameter("ns must not be empty".into()));
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("ns must be strictly increasing".into()));
        }
        if self.ns[0] < 2 {
            return Err(Error::InvalidParameter("sample sizes must be at least 2".into()));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidParameter("families must not be empty".into()));
        }
        if let Some(t) = self.burn_in {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("burn-in must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one replication at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub estimates: Vec<EstimateSet>,
    /// Estimator families whose regression was degenerate, with the reason.
    pub failures: Vec<(Family, String)>,
    pub sums: Option<PartialSums>,
    pub sigma_hat: Option<f64>,
    pub sigma_failure: Option<String>,
}

impl ReplicationRecord {
    pub fn estimate(&self, family: Family) -> Option<&EstimateSet> {
        self.estimates.iter().find(|e| e.family == family)
    }
}

/// Seed of the high-frequency sample of a replication.
fn sigma_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, "high-frequency")
}

/// Runs one replication. Simulation failures are errors; estimator
/// failures are recorded.
pub fn run_replication(cfg: &McCampaign, params: &ModelParams, n: usize, rep: usize) -> Result<ReplicationRecord> {
    let seed = replication_seed(cfg.base_seed, n as u64, rep as u64);
    let sim = cfg.sim_config();
    let mut record = ReplicationRecord {
        n,
        rep,
        seed,
        estimates: Vec::new(),
        failures: Vec::new(),
        sums: None,
        sigma_hat: None,
        sigma_failure: None,
    };
    let drift: Vec<Family> = cfg.families.iter().filter_map(|f| f.drift()).collect();
    if !drift.is_empty() {
        let obs = sample_low_frequency(params, n, &sim, &mut rng::stream(seed))?;
        for family in drift {
            match estimate(family, &obs) {
                Ok(e) => record.estimates.push(e),
                Err(e) => record.failures.push((family, e.to_string())),
            }
        }
        record.sums = Some(partial_sums(params, obs.values())?);
    }
    if cfg.families.contains(&CampaignFamily::Sigma) {
        let obs = sample_high_frequency(params, n, &sim, &mut rng::stream(sigma_seed(seed)))?;
        let (p, delta) = cfg.sigma_tuning();
        match sigma_hat(&obs, cfg.alpha, p, delta) {
            Ok(s) => record.sigma_hat = Some(s),
            Err(e) => record.sigma_failure = Some(e.to_string()),
        }
    }
    Ok(record)
}

/// Distribution summary of absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub median: f64,
    /// Values at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<f64>,
}

impl ErrorSummary {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mut data = Data::new(values);
        let quantiles = QUANTILE_LEVELS.iter().map(|&q| data.quantile(q)).collect();
        Some(Self {
            count,
            median: data.median(),
            quantiles,
        })
    }
}

/// Aggregated results of one drift estimator at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: Family,
    pub n: usize,
    pub replications: usize,
    /// Replications where the regression itself failed.
    pub failed: usize,
    /// Replications where `γ̂ ∉ (0, 1)`.
    pub degenerate: usize,
    pub gamma: Option<ErrorSummary>,
    pub rho: Option<ErrorSummary>,
    pub b: Option<ErrorSummary>,
    pub a: Option<ErrorSummary>,
}

/// Aggregated volatility estimates at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSummary {
    pub n: usize,
    pub replications: usize,
    pub failed: usize,
    pub abs_error: Option<ErrorSummary>,
    /// Fraction of replications with `|σ̂ - σ| <= 0.05 σ`.
    pub within_5pct: f64,
}

/// Rate fit of median absolute errors of one quantity across `ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitRecord {
    pub family: Family,
    pub quantity: String,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: McCampaign,
    pub cells: Vec<CellSummary>,
    pub sigma: Vec<SigmaSummary>,
    pub rate_fits: Vec<RateFitRecord>,
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
}

/// Runs every `(n, replication)` pair in parallel and aggregates. The
/// result depends only on the configuration, not on the thread count.
pub fn run_campaign(cfg: &McCampaign) -> Result<CampaignResult> {
    cfg.validate()?;
    let params = cfg.params()?;
    let work: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let records = work
        .par_iter()
        .map(|&(n, r)| run_replication(cfg, &params, n, r))
        .collect::<Result<Vec<_>>>()?;
    let result = summarize(cfg, &params, records)?;
    for cell in &result.cells {
        let bad = (cell.failed + cell.degenerate) as f64 / cell.replications as f64;
        if bad > MAX_DEGENERATE_FRACTION {
            return Err(Error::Campaign(format!(
                "{} at n = {}: {} of {} replications failed or were degenerate",
                cell.family.as_str(),
                cell.n,
                cell.failed + cell.degenerate,
                cell.replications
            )));
        }
    }
    Ok(result)
}

/// Aggregates replication records into per-cell summaries and rate fits.
pub fn summarize(cfg: &McCampaign, params: &ModelParams, records: Vec<ReplicationRecord>) -> Result<CampaignResult> {
    let truth = params.derived();
    let drift: Vec<Family> = cfg.families.iter().filter_map(|f| f.drift()).collect();
    let mut cells = Vec::new();
    let mut sigma = Vec::new();
    for &n in &cfg.ns {
        let at_n: Vec<&ReplicationRecord> = records.iter().filter(|r| r.n == n).collect();
        for &family in &drift {
            let mut cell = CellSummary {
                family,
                n,
                replications: at_n.len(),
                failed: 0,
                degenerate: 0,
                gamma: None,
                rho: None,
                b: None,
                a: None,
            };
            let (mut eg, mut er, mut eb, mut ea) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for rec in &at_n {
                match rec.estimate(family) {
                    None => cell.failed += 1,
                    Some(e) => {
                        eg.push((e.gamma - truth.gamma).abs());
                        er.push((e.rho - truth.rho).abs());
                        if e.degenerate {
                            cell.degenerate += 1;
                        } else {
                            eb.push((e.b - params.b()).abs());
                            ea.push((e.a - params.a()).abs());
                        }
                    }
                }
            }
            cell.gamma = ErrorSummary::from_values(eg);
            cell.rho = ErrorSummary::from_values(er);
            cell.b = ErrorSummary::from_values(eb);
            cell.a = ErrorSummary::from_values(ea);
            cells.push(cell);
        }
        if cfg.families.contains(&CampaignFamily::Sigma) {
            let values: Vec<f64> = at_n.iter().filter_map(|r| r.sigma_hat).collect();
            let within = values
                .iter()
                .filter(|s| (*s - params.sigma()).abs() <= 0.05 * params.sigma())
                .count();
            sigma.push(SigmaSummary {
                n,
                replications: at_n.len(),
                failed: at_n.len() - values.len(),
                within_5pct: within as f64 / at_n.len().max(1) as f64,
                abs_error: ErrorSummary::from_values(values.iter().map(|s| (s - params.sigma()).abs()).collect()),
            });
        }
    }
    let mut rate_fits = Vec::new();
    if cfg.ns.len() >= 2 {
        for &family in &drift {
            let fam_cells: Vec<&CellSummary> = cells.iter().filter(|c| c.family == family).collect();
            for quantity in ["gamma", "rho", "b", "a"] {
                let medians: Option<Vec<f64>> = fam_cells
                    .iter()
                    .map(|c| {
                        let s = match quantity {
                            "gamma" => &c.gamma,
                            "rho" => &c.rho,
                            "b" => &c.b,
                            _ => &c.a,
                        };
                        s.as_ref().map(|s| s.median)
                    })
                    .collect();
                let Some(medians) = medians else { continue };
                let ns: Vec<f64> = fam_cells.iter().map(|c| c.n as f64).collect();
                if let Ok(fit) = rate_regression(&ns, &medians) {
                    rate_fits.push(RateFitRecord {
                        family,
                        quantity: quantity.to_string(),
                        fit,
                    });
                }
            }
        }
    }
    Ok(CampaignResult {
        config: cfg.clone(),
        cells,
        sigma,
        rate_fits,
        records,
    })
}

impl CampaignResult {
    pub fn rate_fit(&self, family: Family, quantity: &str) -> Option<&RateFit> {
        self.rate_fits
            .iter()
            .find(|r| r.family == family && r.quantity == quantity)
            .map(|r| &r.fit)
    }

    pub fn cell(&self, family: Family, n: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.family == family && c.n == n)
    }

    /// Estimate rows `family,n,seed,gamma,rho,b,a,degenerate` in
    /// replication order.
    pub fn write_estimates_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<(EstimateSet, u64)> = self
            .records
            .iter()
            .flat_map(|r| r.estimates.iter().map(move |e| (*e, r.seed)))
            .collect();
        crate::estimators::write_estimates_csv(out, &rows)
    }

    /// Rows `n,rep,seed,u1,u2,s1,s2`.
    pub fn write_partial_sums_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "rep", "seed", "u1", "u2", "s1", "s2"])?;
        for r in &self.records {
            if let Some(s) = r.sums {
                w.write_record([
                    r.n.to_string(),
                    r.rep.to_string(),
                    r.seed.to_string(),
                    g17(s.u1),
                    g17(s.u2),
                    g17(s.s1),
                    g17(s.s2),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `n,rep,seed,sigma_hat`.
    pub fn write_sigma_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "rep", "seed", "sigma_hat"])?;
        for r in &self.records {
            if let Some(s) = r.sigma_hat {
                w.write_record([r.n.to_string(), r.rep.to_string(), r.seed.to_string(), g17(s)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `estimates.csv`, `partial_sums.csv`, `sigma.csv` (when
    /// present) and `summary.json` into `dir`.
    pub fn export(&self, dir: &FsPath) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let est = dir.join("estimates.csv");
        self.write_estimates_csv(fs::File::create(&est)?)?;
        written.push(est);
        let sums = dir.join("partial_sums.csv");
        self.write_partial_sums_csv(fs::File::create(&sums)?)?;
        written.push(sums);
        if !self.sigma.is_empty() {
            let sig = dir.join("sigma.csv");
            self.write_sigma_csv(fs::File::create(&sig)?)?;
            written.push(sig);
        }
        let summary = dir.join("summary.json");
        fs::write(&summary, serde_json::to_string_pretty(self)?)?;
        written.push(summary);
        Ok(written)
    }
}

impl CampaignResult {
    fn records_at(&self, n: usize) -> impl Iterator<Item = &ReplicationRecord> {
        self.records.iter().filter(move |r| r.n == n)
    }

    /// `(U_{1,n}, U_{2,n})` of every replication at size `n`.
    pub fn u_samples(&self, n: usize) -> Vec<[f64; 2]> {
        self.records_at(n).filter_map(|r| r.sums).map(|s| [s.u1, s.u2]).collect()
    }

    /// `(a_n^{-2} S_{1,n}, c_n^{-1} S_{2,n})` of every replication at size `n`.
    pub fn s_samples(&self, n: usize) -> Vec<[f64; 2]> {
        self.records_at(n).filter_map(|r| r.sums).map(|s| [s.s1, s.s2]).collect()
    }

    /// `rate · (b̂ - b, â - a)` over the non-degenerate replications at size
    /// `n`, with the rate matching the family's limit theorem.
    pub fn scaled_errors(&self, family: Family, n: usize) -> Result<Vec<[f64; 2]>> {
        let params = self.config.params()?;
        let sched = NormalizationSchedule::new(n, params.alpha())?;
        let rate = match family {
            Family::Wclse => sched.wclse_rate,
            Family::Clse => sched.clse_rate,
        };
        Ok(self
            .records_at(n)
            .filter_map(|r| r.estimate(family))
            .filter(|e| !e.degenerate)
            .map(|e| [rate * (e.b - params.b()), rate * (e.a - params.a())])
            .collect())
    }
}
