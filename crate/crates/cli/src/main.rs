use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paceforge_core::harness::{emit_csv, emit_records, run_sweep};
use paceforge_core::instance::{
    format_dump, gen_auction_stream, gen_lp_params, instance_seed, sample_lp_requests, trial_seed,
    AuctionInstanceParams,
};
use paceforge_core::oco::{loglog_slope, mean_regret_p};
use paceforge_core::pid::ResponseKind;
use paceforge_core::verify::{run_suite, Suite};

mod config;

#[derive(Parser)]
#[command(name = "paceforge", version, about = "PID pacing sweeps and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Competitive-ratio sweep over the controller grid; writes the pivot CSV.
    Sweep(Box<SweepArgs>),
    /// Run a verification suite: weights, lemmas, regret or all.
    Verify { suite: String },
    /// Same as `verify weights`.
    VerifyWeights,
    /// Same as `verify regret`.
    VerifyRegret,
    /// Mean regret of a P controller against the horizon and its log-log slope.
    RegretScaling(ScalingArgs),
    /// Write one generated request stream in the line-delimited dump format.
    DumpInstance(DumpArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key=value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// quadratic, entropy or power:<q>
    #[arg(long)]
    map: Option<ResponseKind>,
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha_d_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha_i_grid: Option<Vec<f64>>,
    /// Relative gap target of the dual bound.
    #[arg(long)]
    tol: Option<f64>,
    /// Benchmark against the exact optimum (needs T * d <= 12).
    #[arg(long)]
    exact_tiny: bool,
    /// Starting dual as a fraction of f / rho.
    #[arg(long)]
    mu1_frac: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-path records destination.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long = "T", value_delimiter = ',', default_value = "250,1000,4000")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 501)]
    seed: u64,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long = "T", default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    instance: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Auction stream with uniform values and competing bids.
    #[arg(long)]
    auction: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(*a),
        Command::Verify { suite } => suite.parse::<Suite>().map_err(|e| e.to_string()).and_then(verify),
        Command::VerifyWeights => verify(Suite::Weights),
        Command::VerifyRegret => verify(Suite::Regret),
        Command::RegretScaling(a) => scaling(a),
        Command::DumpInstance(a) => dump(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(a: SweepArgs) -> Result<bool, String> {
    let mut s = match &a.config {
        Some(path) => config::load(path)?,
        None => config::FileSettings::default(),
    };
    let c = &mut s.sweep;
    macro_rules! set {
        ($($field:ident <- $flag:expr),* $(,)?) => { $( if let Some(v) = $flag { c.$field = v; } )* };
    }
    set!(
        m <- a.m, d <- a.d, horizon <- a.horizon, instances <- a.instances, trials <- a.trials,
        seed <- a.seed, map <- a.map, s_grid <- a.s_grid, beta_grid <- a.beta_grid,
        alpha_d_grid <- a.alpha_d_grid, alpha_i_grid <- a.alpha_i_grid, tol <- a.tol,
    );
    if a.exact_tiny {
        c.exact_tiny = true;
    }
    if a.mu1_frac.is_some() {
        c.mu1_frac = a.mu1_frac;
    }
    let out_path = a.out.or(s.out);
    let records_path = a.records.or(s.records);

    log::info!(
        "sweep m={} d={} T={} paths={}x{} seed={} map={}",
        c.m,
        c.d,
        c.horizon,
        c.instances,
        c.trials,
        c.seed,
        c.map
    );
    let out = run_sweep(c).map_err(|e| e.to_string())?;
    write_or_print(out_path.as_deref(), &emit_csv(&out.rows, &out.s_grid))?;
    if let Some(p) = &records_path {
        write_or_print(Some(p), &emit_records(&out))?;
    }
    log::info!(
        "certificate gap mean={:.2e} max={:.2e}, {} paths above target",
        out.mean_gap,
        out.max_gap,
        out.unconverged_paths
    );
    if !out.paired {
        log::error!("controllers did not see identical streams");
    }
    if out.budget_violations > 0 {
        log::error!("{} runs overspent the budget", out.budget_violations);
    }
    Ok(out.paired && out.budget_violations == 0)
}

fn verify(suite: Suite) -> Result<bool, String> {
    let lines = run_suite(suite).map_err(|e| e.to_string())?;
    for l in &lines {
        println!("{l}");
    }
    let failed = lines.iter().filter(|l| !l.passed()).count();
    if failed > 0 {
        log::error!("{failed} of {} checks failed", lines.len());
    }
    Ok(failed == 0)
}

fn scaling(a: ScalingArgs) -> Result<bool, String> {
    if a.horizons.len() < 2 || a.horizons.contains(&0) || a.reps == 0 || a.m == 0 {
        return Err("need at least two positive horizons, reps >= 1 and m >= 1".into());
    }
    println!("T,mean_regret");
    let mut ys = Vec::new();
    for &t in &a.horizons {
        let y = mean_regret_p(a.m, t, a.reps, a.seed).map_err(|e| e.to_string())?;
        println!("{t},{y:.6}");
        ys.push(y);
    }
    let xs: Vec<f64> = a.horizons.iter().map(|t| *t as f64).collect();
    let slope = loglog_slope(&xs, &ys);
    println!("slope,{slope:.4}");
    Ok(true)
}

fn dump(a: DumpArgs) -> Result<bool, String> {
    let err = |e: paceforge_core::Error| e.to_string();
    let seed = trial_seed(a.seed, a.instance, a.trial);
    let requests = if a.auction {
        gen_auction_stream(&AuctionInstanceParams::default(), a.horizon, seed).map_err(err)?
    } else {
        let params = gen_lp_params(instance_seed(a.seed, a.instance), a.m, a.d).map_err(err)?;
        let stream = sample_lp_requests(&params, a.horizon, seed).map_err(err)?;
        log::info!("rho={:?} clip_rate={:.4}", params.rho, stream.clip_rate);
        stream.requests
    };
    write_or_print(a.out.as_deref(), &format_dump(&requests).map_err(err)?)?;
    Ok(true)
}
