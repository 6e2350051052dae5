use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momvc::vc_calculus::{risk_radius, BoundContext, BoundParams};
use momvc_bench::{demo, run_experiment, write_csv, write_svg, BenchError, ExperimentConfig, ExperimentResult};

#[derive(Parser)]
#[command(name = "momvc", version, about = "Median-of-means Monte Carlo harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Override `outputs.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Override `outputs.svg`.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print the VC bound, block threshold and radius for one context.
    Bounds(BoundsArgs),
    /// Run a pinned scenario, writing `<name>.csv` and `<name>.svg`.
    Demo {
        /// Scenario name, or `list`.
        scenario: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct BoundsArgs {
    /// One of mean_any_norm, sparse_mean, regression, cov_spectral, cov_lowrank, eigensplit.
    context: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    corrupted: usize,
    #[arg(long)]
    sigma_half_norm: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    weak_sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated band dimensions.
    #[arg(long, value_delimiter = ',')]
    band_dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
}

fn summarize(result: &ExperimentResult) {
    for cell in &result.cells {
        let c = cell.cell;
        let losses = cell.losses();
        let mean = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        println!(
            "{} n={} d={} s={} k={} eps={}: mean loss {mean:.4e}, radius {:.4e}, coverage {} (nominal {:.4}), failures {}",
            result.task,
            c.n,
            c.d,
            c.s,
            c.k,
            c.epsilon,
            cell.bound.risk_radius,
            cell.coverage,
            cell.nominal_coverage,
            cell.failures()
        );
    }
}

fn execute(cfg: &ExperimentConfig, csv: Option<&Path>, svg: Option<&Path>) -> Result<(), BenchError> {
    let result = run_experiment(cfg)?;
    summarize(&result);
    if let Some(p) = csv {
        write_csv(&result, p)?;
        println!("wrote {}", p.display());
    }
    if let Some(p) = svg {
        write_svg(&result, p)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<(), BenchError> {
    let context: BoundContext = a.context.parse()?;
    let params = BoundParams {
        s: a.s,
        rank: a.rank,
        corrupted: a.corrupted,
        sigma_half_norm: a.sigma_half_norm,
        lambda1: a.lambda1,
        weak_sigma: a.weak_sigma,
        gamma: a.gamma,
        band_dims: a.band_dims,
        multiplier: a.multiplier,
        ..BoundParams::new(a.k, a.n, a.d)
    };
    let sheet = risk_radius(context, &params)?;
    print!("{}", toml::to_string(&sheet).expect("bound sheet serializes"));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run { config, csv, svg } => {
            let cfg = ExperimentConfig::load(&config)?;
            let csv = csv.or_else(|| cfg.outputs.csv.clone());
            let svg = svg.or_else(|| cfg.outputs.svg.clone());
            execute(&cfg, csv.as_deref(), svg.as_deref())
        }
        Command::Bounds(args) => bounds(args),
        Command::Demo { scenario, out_dir } => {
            if scenario == "list" {
                demo::names().for_each(|n| println!("{n}"));
                return Ok(());
            }
            let cfg = demo::scenario(&scenario)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| BenchError::Io {
                path: out_dir.display().to_string(),
                source: e,
            })?;
            let csv = out_dir.join(format!("{scenario}.csv"));
            let svg = out_dir.join(format!("{scenario}.svg"));
            execute(&cfg, Some(&csv), Some(&svg))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        // Bad arguments count as a configuration error.
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("momvc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
