//! Competitive-ratio sweeps over controller grids on random online LPs.

use std::fmt::Write as _;
use std::path::Path;

use crate::allocation::{run_trial_summary, Request, TrialConfig};
use crate::error::{Error, Result};
use crate::instance::{gen_lp_params, instance_seed, sample_lp_requests, trial_seed};
use crate::mirror::MirrorMap;
use crate::offline::{dual_bound, exact_opt, DEFAULT_TOL};
use crate::pid::{make_response_map, CanonicalParams, ResponseKind};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub m: usize,
    pub d: usize,
    pub horizon: usize,
    pub instances: usize,
    pub trials: usize,
    pub seed: u64,
    /// Step multipliers: `eta = s / sqrt(T)`.
    pub s_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub alpha_d_grid: Vec<f64>,
    pub alpha_i_grid: Vec<f64>,
    pub map: ResponseKind,
    /// Relative gap target of the dual bound.
    pub tol: f64,
    /// Benchmark against the exact optimum instead of the dual bound.
    pub exact_tiny: bool,
    /// Starting dual as a fraction of `f / rho_j`. Defaults to 0, or 0.01
    /// for the entropy map, which cannot leave 0.
    pub mu1_frac: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m: 10,
            d: 5,
            horizon: 1000,
            instances: 20,
            trials: 10,
            seed: 1,
            s_grid: vec![0.1, 1.0, 10.0, 100.0],
            beta_grid: vec![0.0, 0.9, 0.99, 0.999],
            alpha_d_grid: vec![0.0, 0.25, 0.5, 0.75],
            alpha_i_grid: vec![0.0, 0.25, 0.5, 0.75],
            map: ResponseKind::Identity,
            tol: DEFAULT_TOL,
            exact_tiny: false,
            mu1_frac: None,
        }
    }
}

/// One controller of the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerSpec {
    pub beta: f64,
    pub alpha_d: f64,
    pub alpha_i: f64,
    pub s: f64,
}

impl ControllerSpec {
    pub fn id(&self) -> String {
        format!("b{}_d{}_i{}_s{}", self.beta, self.alpha_d, self.alpha_i, self.s)
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter("m, d and T must be >= 1".into()));
        }
        if self.s_grid.is_empty() || self.s_grid.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("step multipliers must be > 0".into()));
        }
        if self.beta_grid.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::InvalidParameter("beta values must lie in [0, 1)".into()));
        }
        if self.alpha_d_grid.iter().chain(&self.alpha_i_grid).any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidParameter("alpha values must be >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        Ok(())
    }

    /// Grid rows `(beta, alpha_D, alpha_I)` with `alpha_I + alpha_D <= 1`,
    /// sorted ascending.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &b in &self.beta_grid {
            for &ad in &self.alpha_d_grid {
                for &ai in &self.alpha_i_grid {
                    if ai + ad <= 1.0 + 1e-12 {
                        out.push((b, ad, ai));
                    }
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        out.dedup();
        out
    }

    pub fn controllers(&self) -> Vec<ControllerSpec> {
        let mut out = Vec::new();
        for (beta, alpha_d, alpha_i) in self.rows() {
            for &s in &self.s_grid {
                out.push(ControllerSpec { beta, alpha_d, alpha_i, s });
            }
        }
        out
    }
}

/// Outcome of one controller on one sample path.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub instance: usize,
    pub trial: usize,
    pub controller: usize,
    pub reward: f64,
    /// Benchmark used as the ratio denominator.
    pub upper: f64,
    pub gap: f64,
    pub clip_rate: f64,
    pub budget_ok: bool,
    pub converged: bool,
    pub stream_checksum: u64,
    /// `None` when the controller could not be run (e.g. a step size too
    /// large for the map's bounded box).
    pub ratio: Option<f64>,
}

/// Aggregated ratios of one `(beta, alpha_D, alpha_I)` row.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub beta: f64,
    pub alpha_d: f64,
    pub alpha_i: f64,
    /// Mean ratio per step multiplier, `NaN` when no path succeeded.
    pub mean: Vec<f64>,
    /// Normal-approximation 95% half-width, `1.96 sd / sqrt(n)`.
    pub ci: Vec<f64>,
    pub n: Vec<usize>,
    /// Mean relative certificate gap over the paths.
    pub mean_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub controllers: Vec<ControllerSpec>,
    pub rows: Vec<ResultRow>,
    pub records: Vec<RawRecord>,
    pub s_grid: Vec<f64>,
    /// Mean and largest relative certificate gap over sample paths.
    pub mean_gap: f64,
    pub max_gap: f64,
    pub unconverged_paths: usize,
    pub budget_violations: usize,
    /// Every controller saw the same stream on each path.
    pub paired: bool,
}

impl SweepOutput {
    pub fn row(&self, beta: f64, alpha_d: f64, alpha_i: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.beta == beta && r.alpha_d == alpha_d && r.alpha_i == alpha_i)
    }

    /// Mean ratio of a grid cell.
    pub fn mean_ratio(&self, beta: f64, alpha_d: f64, alpha_i: f64, s: f64) -> Option<f64> {
        let k = self.s_grid.iter().position(|x| *x == s)?;
        self.row(beta, alpha_d, alpha_i).map(|r| r.mean[k])
    }
}

/// FNV-1a over the bit patterns of a request stream.
pub fn stream_checksum(requests: &[Request]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: f64| {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for r in requests {
        match r {
            Request::Lp(lp) => lp.consumption.iter().chain(&lp.reward).for_each(|v| eat(*v)),
            Request::Auction { value, competing } => {
                eat(*competing);
                eat(*value);
            }
        }
    }
    h
}

fn run_path(cfg: &SweepConfig, controllers: &[ControllerSpec], instance: usize, trial: usize) -> Result<Vec<RawRecord>> {
    let params = gen_lp_params(instance_seed(cfg.seed, instance as u64), cfg.m, cfg.d)?;
    let stream = sample_lp_requests(&params, cfg.horizon, trial_seed(cfg.seed, instance as u64, trial as u64))?;
    let t = cfg.horizon as f64;
    let budget: Vec<f64> = params.rho.iter().map(|r| r * t).collect();
    let (upper, gap, converged) = if cfg.exact_tiny {
        (exact_opt(&stream.requests, &budget)?, 0.0, true)
    } else {
        let cert = dual_bound(&stream.requests, &budget, cfg.tol)?;
        if !cert.converged {
            log::warn!("instance {instance} trial {trial}: dual bound gap {:.2e} above target", cert.relative_gap());
        }
        (cert.upper, cert.relative_gap(), cert.converged)
    };
    let fbar = stream.max_reward;
    let mut out = Vec::with_capacity(controllers.len());
    for (k, c) in controllers.iter().enumerate() {
        let eta = c.s / t.sqrt();
        let p = CanonicalParams::from_alphas(eta, c.alpha_i, c.alpha_d, c.beta)?;
        let outcome = match pacing_map(cfg.map, &params.rho, fbar, eta, c.beta, cfg.mu1_frac) {
            Ok((map, mu1)) => {
                let tc = TrialConfig { params: p, map, budget: budget.clone(), mu1: Some(mu1) };
                Some(run_trial_summary(&stream.requests, &tc)?)
            }
            Err(Error::StepSizeTooLarge(_)) => None,
            Err(e) => return Err(e),
        };
        let ratio = outcome.as_ref().map(|o| if upper > 0.0 { o.total_reward / upper } else { 1.0 });
        out.push(RawRecord {
            instance,
            trial,
            controller: k,
            reward: outcome.as_ref().map_or(f64::NAN, |o| o.total_reward),
            upper,
            gap,
            clip_rate: stream.clip_rate,
            budget_ok: outcome.as_ref().is_none_or(|o| o.budget_respected()),
            converged,
            stream_checksum: stream_checksum(&stream.requests),
            ratio,
        });
    }
    Ok(out)
}

/// Mirror map and starting dual for a pacing run. Bounded maps use the
/// bounded-iterates box; the start is `mu1_frac * f / rho_j`, by default 0,
/// or 0.01 for the entropy map, which cannot leave 0.
pub fn pacing_map(
    kind: ResponseKind,
    rho: &[f64],
    fbar: f64,
    eta: f64,
    beta: f64,
    mu1_frac: Option<f64>,
) -> Result<(MirrorMap, Vec<f64>)> {
    let m = rho.len();
    let default_frac = if kind == ResponseKind::Log { 0.01 } else { 0.0 };
    let frac = mu1_frac.unwrap_or(default_frac);
    let mu1: Vec<f64> = rho.iter().map(|r| frac * fbar / r).collect();
    let map = match kind {
        ResponseKind::Identity => MirrorMap::quadratic(m)?,
        kind => {
            let map_kind = match kind {
                ResponseKind::Log => crate::mirror::MapKind::Entropy,
                ResponseKind::Power(q) => crate::mirror::MapKind::Power { q },
                ResponseKind::Identity => unreachable!(),
            };
            let hi = crate::allocation::mu_max(map_kind, rho, fbar.max(1e-12), 1.0, eta, beta, f64::NAN)?;
            make_response_map(kind, &hi)?
        }
    };
    Ok((map, mu1))
}

/// Runs every controller on every `(instance, trial)` path. Each path's
/// stream is generated once and shared by all controllers.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let controllers = cfg.controllers();
    let paths: Vec<(usize, usize)> =
        (0..cfg.instances).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();

    #[cfg(feature = "parallel")]
    let per_path: Vec<Result<Vec<RawRecord>>> = {
        use rayon::prelude::*;
        paths.par_iter().map(|&(i, t)| run_path(cfg, &controllers, i, t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_path: Vec<Result<Vec<RawRecord>>> =
        paths.iter().map(|&(i, t)| run_path(cfg, &controllers, i, t)).collect();

    let mut records = Vec::with_capacity(paths.len() * controllers.len());
    for r in per_path {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.controller, r.instance, r.trial));
    log::info!(
        "sweep: {} paths x {} controllers in {:.1}s",
        paths.len(),
        controllers.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(aggregate(cfg, controllers, records))
}

fn aggregate(cfg: &SweepConfig, controllers: Vec<ControllerSpec>, records: Vec<RawRecord>) -> SweepOutput {
    let n_paths = cfg.instances * cfg.trials;
    let ns = cfg.s_grid.len();
    let mut rows = Vec::new();
    // no sample paths, no rows
    let specs = if n_paths == 0 { Vec::new() } else { cfg.rows() };
    for (r, (beta, alpha_d, alpha_i)) in specs.into_iter().enumerate() {
        let mut mean = Vec::with_capacity(ns);
        let mut ci = Vec::with_capacity(ns);
        let mut n = Vec::with_capacity(ns);
        let mut gap_sum = 0.0;
        for k in 0..ns {
            let c = r * ns + k;
            let slice = &records[c * n_paths..(c + 1) * n_paths];
            let ratios: Vec<f64> = slice.iter().filter_map(|x| x.ratio).collect();
            let (mu, half) = mean_ci(&ratios);
            mean.push(mu);
            ci.push(half);
            n.push(ratios.len());
            gap_sum += slice.iter().map(|x| x.gap).sum::<f64>();
        }
        let mean_gap = if n_paths > 0 { gap_sum / (n_paths * ns) as f64 } else { 0.0 };
        rows.push(ResultRow { beta, alpha_d, alpha_i, mean, ci, n, mean_gap });
    }

    // Path-level statistics come from the first controller's records.
    let first = &records[..n_paths.min(records.len())];
    let mean_gap = if first.is_empty() { 0.0 } else { first.iter().map(|r| r.gap).sum::<f64>() / first.len() as f64 };
    let max_gap = first.iter().map(|r| r.gap).fold(0.0, f64::max);
    let unconverged_paths = first.iter().filter(|r| !r.converged).count();
    let budget_violations = records.iter().filter(|r| !r.budget_ok).count();
    let paired = records
        .iter()
        .all(|r| r.stream_checksum == records[r.instance * cfg.trials + r.trial].stream_checksum);
    SweepOutput {
        controllers,
        rows,
        records,
        s_grid: cfg.s_grid.clone(),
        mean_gap,
        max_gap,
        unconverged_paths,
        budget_violations,
        paired,
    }
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Pivot table: one line per `(beta, alpha_D, alpha_I)`, one column per
/// step multiplier, 3 decimals.
pub fn emit_csv(rows: &[ResultRow], s_grid: &[f64]) -> String {
    let mut out = String::from("momentum_beta,alpha_D,alpha_I");
    for s in s_grid {
        let _ = write!(out, ",s_{s}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{}", r.beta, r.alpha_d, r.alpha_i);
        for v in &r.mean {
            let _ = write!(out, ",{v:.3}");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[ResultRow], s_grid: &[f64]) -> Result<()> {
    std::fs::write(path, emit_csv(rows, s_grid)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Line-delimited raw records:
/// `instance,trial,config,reward,upper,gap,clip_rate`.
pub fn emit_records(out: &SweepOutput) -> String {
    let mut s = String::from("instance,trial,config,reward,upper,gap,clip_rate\n");
    for r in &out.records {
        let _ = writeln!(
            s,
            "{},{},{},{:.9},{:.9},{:.3e},{:.6}",
            r.instance,
            r.trial,
            out.controllers[r.controller].id(),
            r.reward,
            r.upper,
            r.gap,
            r.clip_rate
        );
    }
    s
}
