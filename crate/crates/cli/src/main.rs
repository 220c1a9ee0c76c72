use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curemc::commands::{self, DEFAULT_ALPHAS};
use curemc::config::FitConfig;
use curemc::store::write_json;
use curemc::Result;

#[derive(Parser)]
#[command(name = "curemc", version, about = "Bayesian cure-rate models with tempered MCMC")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a named scenario (A1 … F4).
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Censoring rate; calibrated to the scenario target when omitted.
        #[arg(long)]
        rate: Option<f64>,
        /// Output CSV; a JSON sidecar with the ground truth is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the model with independent tempered runs.
    Fit(FitArgs),
    /// Recompute the multi-run summary of a fit.
    Summarize {
        #[arg(long)]
        run: PathBuf,
        /// Use split-chain PSRF.
        #[arg(long)]
        split: bool,
    },
    /// Declare cured subjects at a grid of FDR levels.
    Fdr {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alpha_grid: Option<Vec<f64>>,
        /// Simulation sidecar with true indicators.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Posterior cure probability given survival to t, for one covariate profile.
    Curves {
        #[arg(long)]
        run: PathBuf,
        /// Covariates on their original scale, e.g. "age=35,sex=1".
        #[arg(long, default_value = "")]
        x: String,
        /// Explicit comma-separated time grid.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Output JSON (default: curve.json in the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    data: Option<PathBuf>,
    /// JSON configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    runs: usize,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep every cycle instead of thinning.
    #[arg(long)]
    full_trace: bool,
    /// Repeat the fit recorded in an earlier manifest.
    #[arg(long, conflicts_with_all = ["config", "seed", "workers", "full_trace"])]
    manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            scenario,
            n,
            seed,
            rate,
            out,
        } => {
            let out = out.unwrap_or_else(|| format!("{scenario}_n{n}_s{seed}.csv").into());
            let s = commands::simulate(&scenario, n, seed, rate, &out)?;
            let cured = s.latent.iter().filter(|&&v| v == 0).count();
            println!(
                "{}: {n} subjects, {cured} cured, censoring rate {:.6}",
                out.display(),
                s.censoring_rate
            );
        }
        Command::Fit(args) => fit(args)?,
        Command::Summarize { run, split } => {
            let s = commands::summarize(&run, split)?;
            println!("parameter,scale,map,mean,q2.5,q97.5,psrf");
            for p in &s.params {
                let psrf = p.psrf.map(|v| format!("{v:.4}")).unwrap_or_default();
                println!(
                    "{},{},{:.4},{:.4},{:.4},{:.4},{psrf}",
                    p.parameter, p.scale, p.map, p.mean, p.quantiles[0], p.quantiles[4]
                );
            }
        }
        Command::Fdr {
            run,
            alpha_grid,
            truth,
        } => {
            let alphas = alpha_grid.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
            let r = commands::fdr_report(&run, &alphas, truth.as_deref())?;
            println!("alpha,k_alpha,expected_fdr,achieved_fdr,tpr");
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            for row in &r.rows {
                println!(
                    "{},{},{:.4},{},{}",
                    row.alpha,
                    row.k_alpha,
                    row.expected_fdr,
                    opt(row.achieved_fdr),
                    opt(row.true_positive_rate)
                );
            }
        }
        Command::Curves {
            run,
            x,
            t,
            points,
            level,
            out,
        } => {
            let x = commands::parse_assignments(&x)?;
            let report = commands::curves(&run, &x, t, points, level)?;
            let out = out.unwrap_or_else(|| run.join("curve.json"));
            write_json(&out, &report)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let manifest = if let Some(m) = &args.manifest {
        commands::refit(m, &args.out)?
    } else {
        let mut cfg = match &args.config {
            Some(p) => FitConfig::load(p)?,
            None => FitConfig::default(),
        };
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if args.workers.is_some() {
            cfg.workers = args.workers;
        }
        if args.full_trace {
            cfg.thin = 1;
        }
        let data = args.data.as_deref().unwrap_or(Path::new(""));
        commands::fit(data, &cfg, args.runs, &args.out)?
    };
    println!(
        "{} runs on {} subjects written to {}",
        manifest.runs,
        manifest.n,
        args.out.display()
    );
    Ok(())
}

