use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stable_cir::campaign::{run_campaign, CampaignFamily, McCampaign};
use stable_cir::diagnostics::diagnose;
use stable_cir::estimators::{default_sigma_tuning, estimate, sigma_hat, write_estimates_csv, Family};
use stable_cir::format::g17;
use stable_cir::limit_laws::{
    exact_ergodic_functionals, s_cf_table, u_cf_table, wclse_cf_table, write_cf_table, AnalyticV, S_GRID, U_GRID,
};
use stable_cir::rng;
use stable_cir::simulator::{sample_high_frequency, sample_low_frequency, simulate_path_seeded};
use stable_cir::validate::validate;
use stable_cir::{ModelParams, SamplingMode, SimConfig};

#[derive(Parser)]
#[command(name = "scir", version, about = "Stable Cox-Ingersoll-Ross simulation and estimation")]
struct Cli {
    /// Campaign JSON; also supplies the model parameters of other subcommands
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (or file for `simulate`/`estimate`); stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, global = true, default_value_t = 1.0)]
    a: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    b: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, global = true, default_value_t = 1.5)]
    alpha: f64,
    /// Fine simulation step
    #[arg(long, global = true, default_value_t = 0.01)]
    dt: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Continuous path on a grid of step `dt`
    Path,
    /// `n + 1` unit-spaced stationary observations
    Low,
    /// `n + 1` observations of a stationary path on `[0, 1]`
    High,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path or one observation sample as CSV
    Simulate {
        #[arg(long, value_enum, default_value_t = Mode::Path)]
        mode: Mode,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Starting value of a path; the stationary mean when absent
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
    },
    /// Estimate from an observation CSV
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Drift estimator families for unit-spaced data
        #[arg(long, value_delimiter = ',', default_value = "clse,wclse")]
        families: Vec<FamilyArg>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run a Monte Carlo campaign from the JSON config
    Mc,
    /// Compare limiting characteristic functions with simulated ones
    Limits {
        /// Sample size, when no config is given
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Replications, when no config is given
        #[arg(long, default_value_t = 200)]
        replications: usize,
        /// Stationary draws for the theoretical expectations
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
    /// Run the oracle battery; exits nonzero on failure
    Validate,
    /// Tail-index and mixing report as JSON
    Diagnose {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 10_000.0)]
        horizon: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Clse,
    Wclse,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Clse => Family::Clse,
            FamilyArg::Wclse => Family::Wclse,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn output(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(out: &Option<PathBuf>, name: &str, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let campaign = match &cli.config {
        Some(p) => Some(McCampaign::from_path(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let (params, sim) = match &campaign {
        Some(c) => (c.params()?, c.sim_config()),
        None => {
            let m = &cli.model;
            (ModelParams::new(m.a, m.b, m.sigma, m.alpha)?, SimConfig::with_dt(m.dt))
        }
    };

    match cli.command {
        Command::Simulate { mode, n, x0, horizon } => {
            let out = output(&cli.out)?;
            match mode {
                Mode::Path => {
                    let x0 = x0.unwrap_or(params.stationary_mean());
                    simulate_path_seeded(&params, x0, horizon, &sim, cli.seed)?.write_csv(out)?;
                }
                Mode::Low => sample_low_frequency(&params, n, &sim, &mut rng::stream(cli.seed))?.write_csv(out)?,
                Mode::High => sample_high_frequency(&params, n, &sim, &mut rng::stream(cli.seed))?.write_csv(out)?,
            }
        }
        Command::Estimate {
            input,
            families,
            p,
            delta,
        } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let obs = stable_cir::Observations::read_csv(BufReader::new(file))?;
            let mut out = output(&cli.out)?;
            match obs.mode() {
                SamplingMode::Low => {
                    let rows = families
                        .iter()
                        .map(|&f| Ok((estimate(f.into(), &obs)?, cli.seed)))
                        .collect::<stable_cir::Result<Vec<_>>>()?;
                    write_estimates_csv(out, &rows)?;
                }
                SamplingMode::High => {
                    let (dp, dd) = default_sigma_tuning(params.alpha());
                    let (p, delta) = (p.unwrap_or(dp), delta.unwrap_or(dd));
                    let s = sigma_hat(&obs, params.alpha(), p, delta)?;
                    writeln!(out, "n,alpha,p,delta,sigma_hat")?;
                    writeln!(out, "{},{},{},{},{}", obs.n(), g17(params.alpha()), g17(p), g17(delta), g17(s))?;
                    out.flush()?;
                }
            }
        }
        Command::Mc => {
            let Some(mut cfg) = campaign else {
                bail!("mc needs --config");
            };
            if cli.seed != 0 {
                cfg.base_seed = cli.seed;
            }
            let dir = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("scir-out"));
            let result = run_campaign(&cfg)?;
            for path in result.export(&dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Limits { n, replications, draws } => {
            let cfg = match campaign {
                Some(mut c) => {
                    c.families = vec![CampaignFamily::Wclse];
                    c
                }
                None => McCampaign {
                    a: params.a(),
                    b: params.b(),
                    sigma: params.sigma(),
                    alpha: params.alpha(),
                    dt: sim.dt,
                    ns: vec![n],
                    replications,
                    base_seed: cli.seed,
                    families: vec![CampaignFamily::Wclse],
                    p: None,
                    delta: None,
                    output_dir: None,
                    burn_in: None,
                },
            };
            let n = *cfg.ns.last().expect("validated campaign has sample sizes");
            let result = run_campaign(&cfg)?;
            let stationary = sample_low_frequency(&params, draws, &sim, &mut rng::stream(rng::derive_seed(cli.seed, "stationary")))?;
            let draws = stationary.values();
            let erg = exact_ergodic_functionals(&params)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("scir-out"));
            fs::create_dir_all(&dir)?;
            let tables = [
                ("cf_u.csv", u_cf_table(&params, &result.u_samples(n), draws, &U_GRID)?),
                (
                    "cf_wclse.csv",
                    wclse_cf_table(&params, &erg, &result.scaled_errors(Family::Wclse, n)?, draws, &U_GRID)?,
                ),
                ("cf_s.csv", s_cf_table(&params, &result.s_samples(n), &AnalyticV::new(&params), &S_GRID)?),
            ];
            for (name, rows) in &tables {
                write_table(&dir, name, rows)?;
                let worst = rows.iter().map(|r| r.abs_err()).fold(0.0, f64::max);
                eprintln!("{name}: largest |theory - empirical| = {worst:.4}");
            }
        }
        Command::Validate => {
            let report = validate(&params, cli.seed)?;
            write_json(&cli.out, "validation.json", &report)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: {} > {}", c.name, c.value, c.tolerance);
            }
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Diagnose { n, horizon } => {
            let report = diagnose(&params, &sim, n, horizon, cli.seed)?;
            write_json(&cli.out, "diagnostics.json", &report)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_table(dir: &FsPath, name: &str, rows: &[stable_cir::limit_laws::CfRow]) -> anyhow::Result<()> {
    let path = dir.join(name);
    write_cf_table(BufWriter::new(File::create(&path)?), rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
