use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hawkes_lasso::bernstein_lab::{self, Integrand, LabProcess, LabSetup};
use hawkes_lasso::design::build_design;
use hawkes_lasso::dictionary::HistogramDictionary;
use hawkes_lasso::experiments::{self, ExperimentConfig, Method, Preset};
use hawkes_lasso::point_process::{presets, MarkedPointSet};

#[derive(Parser)]
#[command(
    name = "hawkes-lasso",
    version,
    about = "Weighted Lasso estimation for multivariate Hawkes processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replicate of a preset and write its points as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replicate index (selects the random stream).
        #[arg(long, default_value_t = 0)]
        replicate: usize,
    },
    /// Fit one method to a point CSV.
    Estimate(EstimateArgs),
    /// Run a replicated experiment and write per-run and summary tables.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of the martingale tail bound.
    BernsteinCheck(LabArgs),
    /// Export step-function estimates of one replicate.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Gamma of the adaptive methods (`--gamma` applies to B and BO).
        #[arg(long, default_value_t = 200.0)]
        adaptive_gamma: f64,
    },
}

/// Config file plus overrides shared by the experiment commands.
#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long = "K")]
    bins: Option<usize>,
    /// Comma-separated gamma grid.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Comma-separated subset of B,BO,A,AO.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    warmup: Option<f64>,
    /// Output directory (or file for `simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.preset {
            cfg.preset = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = &self.gamma {
            cfg.gammas = Some(v.clone());
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.clone();
        }
        if let Some(v) = self.reps {
            cfg.n_replicates = v;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.warmup {
            cfg.warmup = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Point CSV as written by `simulate`.
    #[arg(long)]
    points: PathBuf,
    /// Number of marks (defaults to the largest mark in the file).
    #[arg(long)]
    marks: Option<usize>,
    #[arg(long = "K", default_value_t = 4)]
    bins: usize,
    /// Support `A` of the dictionary.
    #[arg(long, default_value_t = presets::SUPPORT)]
    support: f64,
    /// Observation horizon; defaults to the end of the window.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long, default_value = "B")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// TOML config supplying weight and solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the Gram matrix and the b, vhat, bhat vectors.
    #[arg(long)]
    dump_design: bool,
    #[arg(long, default_value = "estimate")]
    out: PathBuf,
}

#[derive(Args)]
struct LabArgs {
    /// Comma-separated values of x.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 3.0, 6.0])]
    x: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Trials of the pilot run that fixes the upper bracket end.
    #[arg(long, default_value_t = 20_000)]
    pilot: usize,
    #[arg(long, default_value_t = 50.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Comma-separated setups: poisson-constant, poisson-alternating,
    /// poisson-past-count, hawkes-exp1.
    #[arg(long, value_delimiter = ',', default_value = "poisson-constant")]
    setup: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bernstein")]
    out: PathBuf,
}

fn lab_setup(name: &str, x: f64, args: &LabArgs) -> Result<LabSetup> {
    let poisson = LabProcess::Poisson { rate: 1.0 };
    let (process, integrand, tau) = match name {
        "poisson-constant" => (poisson, Integrand::Constant { value: 1.0 }, args.tau),
        "poisson-alternating" => (
            poisson,
            Integrand::AlternatingStep {
                level: 1.0,
                period: 1.0,
            },
            args.tau,
        ),
        "poisson-past-count" => (
            poisson,
            Integrand::PastCount {
                window: 1.0,
                bound: 2.0,
            },
            args.tau,
        ),
        "hawkes-exp1" => (
            LabProcess::Hawkes {
                model: presets::experiment1(),
                mark: 0,
                warmup: 1.0,
            },
            Integrand::PastCount {
                window: 1.0,
                bound: 100.0,
            },
            args.tau.min(5.0),
        ),
        other => bail!("unknown lab setup {other:?}"),
    };
    Ok(LabSetup {
        id: name.to_string(),
        process,
        integrand,
        tau,
        x,
        eps: args.eps,
        mu: args.mu,
    })
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Exit code 2 when more than 1% of replicates failed.
fn failure_code(failed: usize, total: usize) -> ExitCode {
    if failed as f64 > 0.01 * total as f64 {
        eprintln!("{failed} of {total} replicates failed");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, replicate } => {
            let cfg = common.load()?;
            let model = cfg.model()?;
            let points = experiments::simulate_replicate(&cfg, &model, replicate)?;
            let path = common.out.unwrap_or_else(|| PathBuf::from("points.csv"));
            let mut f = writer(&path)?;
            points.write_csv(&mut f)?;
            f.flush()?;
            eprintln!(
                "wrote {} points to {} (spectral radius {:.6})",
                points.total_points(),
                path.display(),
                model.branching_matrix().spectral_radius()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate(args) => {
            let file = File::open(&args.points).with_context(|| format!("opening {}", args.points.display()))?;
            let points = MarkedPointSet::read_csv(BufReader::new(file), args.marks)?;
            let mut cfg = match &args.config {
                Some(p) => ExperimentConfig::from_toml(&fs::read_to_string(p)?)?,
                None => ExperimentConfig::default(),
            };
            let horizon = args.horizon.unwrap_or(points.window().1);
            cfg.horizon = horizon;
            let dict = HistogramDictionary::new(points.marks(), args.bins, args.support)?;
            let sys = build_design(&points, &dict, horizon)?;
            let fit = experiments::fit_method(&sys, &dict, args.method, args.gamma, &cfg, None)?;
            fs::create_dir_all(&args.out)?;
            let mut f = writer(&args.out.join("coefficients.csv"))?;
            writeln!(f, "index,column,value")?;
            for (i, v) in fit.a.values().iter().enumerate() {
                writeln!(f, "{},{:?},{}", i, dict.column(i), v)?;
            }
            f.flush()?;
            let mut f = writer(&args.out.join("reconstruction.csv"))?;
            dict.reconstruct(&fit.a).write_csv(&mut f)?;
            f.flush()?;
            if args.dump_design {
                let mut f = writer(&args.out.join("gram.csv"))?;
                sys.write_gram_csv(&mut f)?;
                f.flush()?;
                let mut f = writer(&args.out.join("vectors.csv"))?;
                sys.write_vectors_csv(&mut f)?;
                f.flush()?;
            }
            if !fit.lasso.converged {
                eprintln!(
                    "warning: solver stopped after {} passes without converging",
                    fit.lasso.iterations
                );
            }
            eprintln!("wrote estimate to {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { common } => {
            let cfg = common.load()?;
            if cfg.preset == Preset::Poisson {
                let runs = experiments::run_poisson_pipeline(&cfg)?;
                for p in experiments::write_poisson_outputs(&runs, &cfg.output_dir)? {
                    eprintln!("wrote {}", p.display());
                }
                return Ok(ExitCode::SUCCESS);
            }
            let outcome = experiments::run_experiment(&cfg)?;
            for p in experiments::write_outcome(&outcome, &cfg.output_dir)? {
                eprintln!("wrote {}", p.display());
            }
            eprintln!("spectral radius of the model: {:.6}", outcome.spectral_radius);
            Ok(failure_code(outcome.failures.len(), outcome.n_replicates))
        }
        Command::BernsteinCheck(args) => {
            let mut reports = Vec::new();
            let mut violated = false;
            for name in &args.setup {
                for (i, &x) in args.x.iter().enumerate() {
                    let setup = lab_setup(name, x, &args)?;
                    let seed = args.seed.wrapping_add(1000 * i as u64);
                    let brackets = bernstein_lab::default_brackets(&setup, args.pilot, seed ^ 0xA5A5_A5A5)?;
                    let r = bernstein_lab::run_trials(&setup, brackets, args.trials, seed)?;
                    eprintln!(
                        "{name} x={x}: freq {:.3e} (Wilson [{:.3e}, {:.3e}]), bound {:.3e}, exact {}",
                        r.empirical_freq,
                        r.wilson_lo,
                        r.wilson_hi,
                        r.theoretical_bound,
                        r.exact_prob.map_or("NA".to_string(), |p| format!("{p:.3e}"))
                    );
                    violated |= !r.within_bound() || r.matches_exact() == Some(false);
                    reports.push(r);
                }
            }
            fs::create_dir_all(&args.out)?;
            let path = args.out.join("bernstein.csv");
            let mut f = writer(&path)?;
            bernstein_lab::write_report_csv(&reports, &mut f)?;
            f.flush()?;
            eprintln!("wrote {}", path.display());
            Ok(if violated { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Reconstruct {
            common,
            replicate,
            adaptive_gamma,
        } => {
            let mut cfg = common.load()?;
            if common.bins.is_none() && common.config.is_none() {
                cfg.bins = 8;
            }
            let bernstein_gamma = common.gamma.as_ref().and_then(|g| g.first().copied()).unwrap_or(1.0);
            let methods = common
                .methods
                .clone()
                .unwrap_or_else(|| vec![Method::B, Method::BO, Method::A]);
            let fits: Vec<(Method, f64)> = methods
                .iter()
                .map(|&m| {
                    (
                        m,
                        if m.is_adaptive() {
                            adaptive_gamma
                        } else {
                            bernstein_gamma
                        },
                    )
                })
                .collect();
            let recs = experiments::export_reconstruction(&cfg, replicate, &fits)?;
            for p in experiments::write_reconstructions(&cfg, &recs, &cfg.output_dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
