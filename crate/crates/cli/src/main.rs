use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groupfair::bench::{self, BenchmarkConfig};
use groupfair::trainers::Method;
use groupfair::Error;

/// Group-robust training and per-group evaluation benchmarks.
#[derive(Parser)]
#[command(name = "groupfair", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Write the configured dataset to data.csv.
    Generate(Common),
    /// Train every method's grid, select, evaluate and write reports.
    Run(Common),
    /// Train across one hyperparameter axis without model selection.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Method,
        /// Defaults to the method's searched hyperparameter.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Labeller PPV per group and intersection, plus proxy calibration.
    Audit(Common),
    /// Print a run directory's results.
    Report {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json to replay.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    bootstrap_iters: Option<usize>,
}

impl Common {
    fn load(&self) -> groupfair::Result<BenchmarkConfig> {
        let mut cfg = BenchmarkConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(b) = self.bootstrap_iters {
            cfg.bootstrap_iters = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exec(verb: Verb) -> groupfair::Result<()> {
    match verb {
        Verb::Generate(c) => {
            let cfg = c.load()?;
            let d = bench::generate(&cfg)?;
            println!("wrote {} rows to {}", d.len(), cfg.output_dir().join("data.csv").display());
        }
        Verb::Run(c) => {
            let cfg = c.load()?;
            bench::run(&cfg)?;
            print!("{}", bench::render_report(&cfg.output_dir())?);
        }
        Verb::Sweep { common, method, axis } => {
            let cfg = common.load()?;
            let s = bench::run_sweep(&cfg, method, axis.as_deref())?;
            println!(
                "swept {} {} over {} values; wrote {}",
                s.method,
                s.axis,
                s.values.len(),
                cfg.output_dir().join("sweep.csv").display()
            );
        }
        Verb::Audit(c) => {
            let cfg = c.load()?;
            let out = bench::run_audit(&cfg)?;
            let t = &out.table;
            println!("labeller PPV by {} x {}", t.attribute_a, t.attribute_b);
            for c in t.all_cells() {
                match (c.ppv, c.ci) {
                    (Some(p), Some((lo, hi))) => println!("{:<12} {:<12} {p:.3} [{lo:.3}, {hi:.3}] n={}", c.a, c.b, c.n),
                    _ => println!("{:<12} {:<12} absent n={}", c.a, c.b, c.n),
                }
            }
        }
        Verb::Report { dir, out } => {
            let dir = dir.or(out).unwrap_or_else(|| PathBuf::from("out"));
            print!("{}", bench::render_report(&dir)?);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else if e.is_metric() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match exec(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
