use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cp_hedge::adversaries::SigmaSchedule;
use cp_hedge::diagnostics::{bound_hedge, bound_nh_improved, bound_nh_vt, BoundMode, CertificateReport};
use cp_hedge::harness::{self, ExperimentConfig};
use cp_hedge::potentials::default_normalhedge_t0;
use cp_hedge::Result;

#[derive(Parser)]
#[command(name = "cphedge", version, about = "Constant-potential hedging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Exponential,
    Normalhedge,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write per-seed CSV and JSON files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit an experiment without writing files; exits 1 if any certificate fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Random-walk Monte Carlo against NormalHedge; prints a JSON table.
    Lowerbound {
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print regret-bound values for a grid of quantiles.
    Bounds {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Second moment V_T.
        #[arg(long)]
        vt: f64,
        /// Defaults to 0 (exponential) or the NormalHedge default.
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        n: usize,
        /// Learning rate; required for the exponential potential.
        #[arg(long)]
        eta: Option<f64>,
    },
}

fn print_failures(reports: &[CertificateReport]) -> usize {
    let mut failed = 0;
    for r in reports.iter().filter(|r| !r.holds) {
        failed += 1;
        let round = r.round.map(|j| format!(" round {j}")).unwrap_or_default();
        eprintln!("FAIL {}{round}: lhs={} rhs={} margin={}", r.name, r.lhs, r.rhs, r.margin);
    }
    failed
}

fn run_experiment(config: &ExperimentConfig, write: bool) -> Result<bool> {
    let reports = harness::run_with(config, write)?;
    let mut ok = true;
    for rep in &reports {
        let s = &rep.summary;
        eprintln!(
            "seed {}: t={} V_T={} ({:.3}s)",
            rep.seed,
            s.final_t,
            s.v_t,
            rep.duration.as_secs_f64()
        );
        for e in &s.regret {
            eprintln!(
                "  eps={} regret={} time_bound={} variance_bound={}",
                e.eps, e.regret, e.time_bound, e.variance_bound
            );
        }
        if config.audit {
            let failed = print_failures(&rep.certificates);
            eprintln!("  certificates: {} checked, {failed} failed", rep.certificates.len());
            ok &= failed == 0;
        }
        if let Some(p) = &rep.summary_json {
            println!("{}", p.display());
        }
    }
    Ok(ok)
}

fn bounds_table(
    kind: Kind,
    eps: &[f64],
    vt: f64,
    t0: Option<f64>,
    b: f64,
    n: usize,
    eta: Option<f64>,
) -> Result<()> {
    match kind {
        Kind::Exponential => {
            let eta = eta.ok_or_else(|| cp_hedge::Error::Config("--eta is required for exponential".into()))?;
            println!("eps,variance_bound,time_bound_at_vt");
            for &e in eps {
                println!(
                    "{e},{},{}",
                    bound_hedge(eta, vt, e, b, BoundMode::Variance)?,
                    bound_hedge(eta, vt, e, b, BoundMode::Time)?
                );
            }
        }
        Kind::Normalhedge => {
            let t0 = t0.unwrap_or_else(|| default_normalhedge_t0(b, n));
            println!("eps,vt_bound,improved_bound");
            for &e in eps {
                println!(
                    "{e},{},{}",
                    bound_nh_vt(vt, t0, e)?,
                    bound_nh_improved(vt, t0, e, b, n)?
                );
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = harness::load_config(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            run_experiment(&cfg, true)
        }
        Command::Verify { config } => {
            let mut cfg = harness::load_config(&config)?;
            cfg.audit = true;
            run_experiment(&cfg, false)
        }
        Command::Lowerbound {
            eps,
            n,
            sigma,
            t,
            repeats,
            seed,
        } => {
            let b = if sigma > 0.0 { 2.0 * sigma } else { 1.0 };
            let schedule = SigmaSchedule::constant(sigma, t, b)?;
            let table = harness::lowerbound_study(&eps, n, &schedule, repeats, seed)?;
            println!("{}", serde_json::to_string_pretty(&table)?);
            Ok(true)
        }
        Command::Bounds {
            kind,
            eps,
            vt,
            t0,
            b,
            n,
            eta,
        } => {
            bounds_table(kind, &eps, vt, t0, b, n, eta)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
