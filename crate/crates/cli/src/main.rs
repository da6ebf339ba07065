use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use moveblock::condensing::dump_qp;
use moveblock::harness::bench::{bench_condensing, median, BlockCount};
use moveblock::harness::output::{summary_text, write_bench, write_outputs};
use moveblock::harness::sim::{first_qp, run_closed_loop};
use moveblock::harness::{load_config, Scheme, SchemeConfig};
use moveblock::model::ProblemDims;

#[derive(Parser)]
#[command(
    name = "moveblock",
    version,
    about = "Move-blocking RTI NMPC: closed-loop runs and condensing benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme in closed loop and write traj/kkt/timing CSVs.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scheme set in the config file.
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the first condensed QP as text matrices into <out>/qp.
        #[arg(long)]
        dump_qp: bool,
    },
    /// Time the tailored and reference condensing pipelines on random data.
    BenchCondense {
        #[arg(long, default_value_t = 4)]
        nx: usize,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        /// Number of blocks, or `N` for one block per interval.
        #[arg(long = "M", default_value = "10")]
        m: String,
        /// Comma-separated horizons.
        #[arg(long = "N", value_delimiter = ',', default_value = "20,40,80")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run schemes A, B and C from one config and write a summary table.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_from(path: Option<&Path>) -> Result<SchemeConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SchemeConfig::default()),
    }
}

fn simulate(cfg: &SchemeConfig, out: &Path, dump: bool) -> Result<bool> {
    if dump {
        dump_qp(&first_qp(cfg)?, &out.join("qp"))?;
    }
    let log = run_closed_loop(cfg)?;
    write_outputs(&log, out)?;
    print!("{}", summary_text(&log));
    Ok(log.aborted.is_none())
}

fn compare(base: &SchemeConfig, out: &Path) -> Result<bool> {
    let mut ok = true;
    let mut table = String::from("scheme,steps,median_condensing_ms,median_total_ms,max_total_ms,median_kkt,flagged\n");
    for scheme in [Scheme::A, Scheme::B, Scheme::C] {
        let cfg = base.clone().with_scheme(scheme);
        cfg.validate()?;
        let log = run_closed_loop(&cfg)?;
        write_outputs(&log, &out.join(scheme.to_string()))?;
        print!("{}", summary_text(&log));
        ok &= log.aborted.is_none();
        let mut cond: Vec<f64> = log.samples.iter().map(|s| s.timings.condensing.as_secs_f64() * 1e3).collect();
        let mut total: Vec<f64> = log.samples.iter().map(|s| s.timings.total().as_secs_f64() * 1e3).collect();
        let max_total = total.iter().copied().fold(0.0, f64::max);
        let mut kkt = log.kkt_totals();
        table.push_str(&format!(
            "{scheme},{},{:.6},{:.6},{:.6},{:.6e},{}\n",
            log.samples.len(),
            median(&mut cond),
            median(&mut total),
            max_total,
            median(&mut kkt),
            log.flagged_samples().count()
        ));
    }
    let path = out.join("summary.csv");
    std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    print!("{table}");
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            scheme,
            out,
            dump_qp,
        } => {
            let mut cfg = config_from(config.as_deref())?;
            if let Some(s) = scheme {
                cfg = cfg.with_scheme(s);
            }
            cfg.validate()?;
            simulate(&cfg, &out, dump_qp)
        }
        Command::BenchCondense {
            nx,
            nu,
            m,
            n,
            reps,
            seed,
            out,
        } => {
            let blocks = match m.trim() {
                "N" | "n" => BlockCount::PerInterval,
                v => BlockCount::Fixed(v.parse().with_context(|| format!("--M expects a count or N, got '{v}'"))?),
            };
            if n.is_empty() {
                bail!("--N needs at least one horizon");
            }
            let dims = ProblemDims::new(nx, nu)?;
            let rows = bench_condensing(&dims, blocks, &n, reps, seed)?;
            write_bench(&rows, &out)?;
            println!("N,M,tailored_ms,naive_ms,tailored_mults,naive_mults,predicted_mults");
            for r in &rows {
                println!(
                    "{},{},{:.6},{:.6},{},{},{}",
                    r.n,
                    r.m,
                    r.tailored_s * 1e3,
                    r.naive_s * 1e3,
                    r.tailored_multiplies,
                    r.naive_multiplies,
                    r.predicted_multiplies
                );
            }
            Ok(true)
        }
        Command::Compare { config, out } => {
            let cfg = config_from(config.as_deref())?;
            compare(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("run aborted early; partial output written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
