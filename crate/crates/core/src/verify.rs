//! Verification suites: each check reports its worst observed value next to
//! the threshold it must respect.

use std::fmt;

use rand::Rng;

use crate::allocation::{mu_max, run_trial, TrialConfig};
use crate::cmd::{stability_margin, ConvolutionFilter, FilterState, GradientFilter, NormPair};
use crate::error::Result;
use crate::instance::{derive_seed, gen_lp_params, rng_from_seed, sample_lp_requests};
use crate::mirror::{MapKind, MirrorMap};
use crate::oco::{loglog_slope, mean_regret_p, random_suite, run_oco, stochastic_linear, verify_regret_bound, CheckStatus};
use crate::pid::{make_response_map, CanonicalParams, ControllerGains, ControllerKind, ResponseKind, WeightSequence};
use crate::spectral::{
    classify_roots, decomposition_sides, pid_abs_sum_bound, q_closed_form, toeplitz_inverse,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// `value <= threshold`.
    AtMost,
    /// `value >= threshold`.
    AtLeast,
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub detail: String,
}

impl CheckLine {
    fn new(name: &str, value: f64, bound: Bound, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), value, threshold, bound, detail }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.threshold,
            Bound::AtLeast => self.value >= self.threshold,
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "{} {} value={:.6e} threshold{}{:.1e} {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            op,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Weights,
    Lemmas,
    Regret,
    All,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Suite::Weights),
            "lemmas" => Ok(Suite::Lemmas),
            "regret" => Ok(Suite::Regret),
            "all" => Ok(Suite::All),
            _ => Err(crate::Error::Parse(format!("unknown suite '{s}'"))),
        }
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<CheckLine>> {
    match suite {
        Suite::Weights => weights_suite(),
        Suite::Lemmas => lemmas_suite(),
        Suite::Regret => regret_suite(),
        Suite::All => {
            let mut out = weights_suite()?;
            out.extend(lemmas_suite()?);
            out.extend(regret_suite()?);
            Ok(out)
        }
    }
}

/// `(alpha_I, alpha_D, beta)` grid with `alpha_I + alpha_D <= 1`.
pub fn parameter_grid(steps: usize, betas: &[f64]) -> Vec<CanonicalParams> {
    let mut out = Vec::new();
    for &beta in betas {
        for i in 0..=steps {
            for d in 0..=steps - i {
                let ai = i as f64 / steps as f64;
                let ad = d as f64 / steps as f64;
                if let Ok(p) = CanonicalParams::from_alphas(1.0, ai, ad, beta) {
                    out.push(p);
                }
            }
        }
    }
    out
}

pub const GRID_BETAS: [f64; 7] = [0.0, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99];

/// Closed-form against forward-substitution inverses on the real-root part
/// of the grid. Returns `(combinations, max deviation)`.
pub fn closed_form_deviation(horizon: usize) -> Result<(usize, f64)> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for p in parameter_grid(10, &GRID_BETAS) {
        if !classify_roots(&p).real_roots {
            continue;
        }
        let brute = toeplitz_inverse(&p.weights(horizon))?;
        let closed = q_closed_form(p.kind(), &p, horizon)?;
        worst = worst.max(brute.max_abs_diff(&closed));
        count += 1;
    }
    Ok((count, worst))
}

fn weights_suite() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let start = std::time::Instant::now();
    let (count, dev) = closed_form_deviation(200)?;
    lines.push(CheckLine::new(
        "weights.closed_form_vs_toeplitz",
        dev,
        Bound::AtMost,
        1e-9,
        format!("combinations={count} T=200 secs={:.2}", start.elapsed().as_secs_f64()),
    ));

    let mut resid: f64 = 0.0;
    let mut min_a = f64::INFINITY;
    let mut bound_excess = f64::NEG_INFINITY;
    let mut monotone_violations = 0usize;
    for p in parameter_grid(10, &GRID_BETAS) {
        let inv = toeplitz_inverse(&p.weights(200))?;
        resid = resid.max(inv.convolution_residual(&p.weights(200)));
        if !classify_roots(&p).real_roots {
            continue;
        }
        min_a = min_a.min(inv.a().iter().copied().fold(f64::INFINITY, f64::min));
        if p.alpha_d < 1.0 {
            let long = toeplitz_inverse(&p.weights(2000))?;
            bound_excess = bound_excess.max(long.abs_sum() - pid_abs_sum_bound(&p)?);
        }
        let a = inv.a();
        match p.kind() {
            // a_t = q_0 + ... + q_{T-t}: decreasing in t for PD, increasing for PI
            ControllerKind::PD => monotone_violations += a.windows(2).filter(|w| w[1] > w[0] + 1e-12).count(),
            ControllerKind::PI => monotone_violations += a.windows(2).filter(|w| w[1] < w[0] - 1e-12).count(),
            _ => {}
        }
    }
    lines.push(CheckLine::new("weights.convolution_identity", resid, Bound::AtMost, 1e-9, "T=200".into()));
    lines.push(CheckLine::new("weights.a_nonnegative", min_a, Bound::AtLeast, -1e-9, "real roots".into()));
    lines.push(CheckLine::new(
        "weights.abs_sum_bound",
        bound_excess,
        Bound::AtMost,
        1e-9,
        "sum|q| - M, T=2000".into(),
    ));
    lines.push(CheckLine::new(
        "weights.pd_pi_monotone",
        monotone_violations as f64,
        Bound::AtMost,
        0.0,
        "violations".into(),
    ));

    let mut rng = rng_from_seed(11);
    let mut filt_dev: f64 = 0.0;
    let mut trip: f64 = 0.0;
    for _ in 0..50 {
        let p = random_params(&mut rng, false);
        let (t, m) = (100, 5);
        let mut state = FilterState::new(m);
        let mut conv = ConvolutionFilter::new(p.weights(t), m);
        for _ in 0..t {
            let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = state.advance(&g, &p)?;
            let b = conv.advance(&g)?;
            for j in 0..m {
                filt_dev = filt_dev.max((a[j] - b[j]).abs());
            }
        }
        let back = p.to_gains().to_canonical()?;
        trip = trip
            .max((back.eta - p.eta).abs())
            .max((back.alpha_p - p.alpha_p).abs())
            .max((back.alpha_i - p.alpha_i).abs())
            .max((back.alpha_d - p.alpha_d).abs());
        let g = ControllerGains::new(
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            p.beta,
        )?;
        let again = g.to_canonical()?.to_gains();
        trip = trip
            .max((again.kp - g.kp).abs())
            .max((again.ki - g.ki).abs())
            .max((again.kd - g.kd).abs());
    }
    lines.push(CheckLine::new("weights.filter_vs_convolution", filt_dev, Bound::AtMost, 1e-11, "T=100 m=5".into()));
    lines.push(CheckLine::new("weights.gain_round_trip", trip, Bound::AtMost, 1e-12, "50 draws".into()));
    Ok(lines)
}

/// Random valid parameters with `eta = 1`. With `real_only`, redraws until
/// the characteristic roots are real and `alpha_D < 1`.
pub fn random_params<R: Rng>(rng: &mut R, real_only: bool) -> CanonicalParams {
    loop {
        let ai: f64 = rng.random();
        let ad: f64 = rng.random::<f64>() * (1.0 - ai);
        let beta = [0.0, rng.random::<f64>() * 0.99, 0.9, 0.99][rng.random_range(0..4)];
        let p = CanonicalParams::from_alphas(1.0, ai, ad, beta).expect("valid draw");
        if !real_only || (classify_roots(&p).real_roots && ad < 1.0) {
            return p;
        }
    }
}

/// Random parameters of a given controller kind with real roots.
pub fn random_params_of<R: Rng>(rng: &mut R, kind: ControllerKind, eta: f64) -> CanonicalParams {
    loop {
        let beta = [0.0, rng.random::<f64>() * 0.99, 0.9, 0.99][rng.random_range(0..4)];
        let (ai, ad) = match kind {
            ControllerKind::P => (0.0, 0.0),
            ControllerKind::PD => (0.0, rng.random_range(0.05..0.75)),
            ControllerKind::PI => (rng.random_range(0.05..1.0), 0.0),
            ControllerKind::PID => {
                let ai: f64 = rng.random_range(0.05..0.9);
                (ai, rng.random_range(0.05..(1.0 - ai).min(0.75)))
            }
        };
        let beta = if kind == ControllerKind::PID && beta == 0.0 { 0.5 } else { beta };
        let Ok(p) = CanonicalParams::from_alphas(eta, ai, ad, beta) else { continue };
        if p.kind() == kind && classify_roots(&p).real_roots {
            return p;
        }
    }
}

pub const KINDS: [ControllerKind; 4] = [ControllerKind::P, ControllerKind::PD, ControllerKind::PI, ControllerKind::PID];

/// Smallest stability margin over OCO and allocation trajectories, with
/// the number of steps inspected.
pub fn stability_min_margin() -> Result<(f64, usize)> {
    let mut worst = f64::INFINITY;
    let mut steps = 0usize;
    let suite = random_suite(101, 50)?;
    let mut rng = rng_from_seed(102);
    for case in &suite {
        for kind in KINDS {
            let t = case.problem.horizon() as f64;
            let eta = rng.random_range(0.2..3.0) / t.sqrt();
            let p = random_params_of(&mut rng, kind, eta);
            let run = run_oco(
                &case.problem,
                GradientFilter::pid(p, case.problem.dim()),
                p.eta,
                &case.map,
                &case.problem.start,
            )?;
            let m = case.problem.dim();
            for norms in [NormPair::L2, NormPair::InfL1] {
                let sigma = norms.sigma(case.map.sigma(), m);
                worst = worst.min(run.min_stability_margin(p.eta, sigma, norms)?);
                steps += run.zs.len();
            }
        }
    }
    for trial in 0..60u64 {
        let seed = derive_seed(103, trial);
        let params = gen_lp_params(seed, 3, 3)?;
        let t = 300;
        let stream = sample_lp_requests(&params, t, seed ^ 1)?;
        let budget: Vec<f64> = params.rho.iter().map(|r| r * t as f64).collect();
        let kind = KINDS[trial as usize % 4];
        let eta = rng.random_range(0.1..2.0) / (t as f64).sqrt();
        let p = random_params_of(&mut rng, kind, eta);
        let fbar = stream.max_reward.max(1e-9);
        let response = [ResponseKind::Identity, ResponseKind::Log, ResponseKind::Power(2.0)][trial as usize % 3];
        let map = match response {
            ResponseKind::Identity => MirrorMap::quadratic(3)?,
            _ => {
                let hi: Vec<f64> = params.rho.iter().map(|r| 2.0 * fbar / r).collect();
                make_response_map(response, &hi)?
            }
        };
        let mu1: Vec<f64> = params.rho.iter().map(|r| 0.5 * fbar / r).collect();
        let rec = run_trial(&stream.requests, &TrialConfig { params: p, map: map.clone(), budget, mu1: Some(mu1) })?;
        for norms in [NormPair::L2, NormPair::InfL1] {
            let sigma = norms.sigma(map.sigma(), 3);
            for (k, s) in rec.steps.iter().enumerate() {
                let m = stability_margin(&rec.mu_path[k], &rec.mu_path[k + 1], &s.z, p.eta, sigma, norms)?;
                worst = worst.min(m);
                steps += 1;
            }
        }
    }
    Ok((worst, steps))
}

/// Largest relative error of the regret decomposition over 50 random
/// (gradients, trajectory, weights) triples with `T = 50`, `m = 3`.
pub fn decomposition_max_error() -> Result<f64> {
    let mut rng = rng_from_seed(201);
    let (t, m) = (50, 3);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let weights = if k % 5 == 4 {
            // arbitrary stable weights outside the PID family
            let mut w: Vec<f64> = (0..t).map(|i| rng.random_range(-0.5..0.5) * 0.6f64.powi(i as i32)).collect();
            w[0] = rng.random_range(1.0..1.5);
            WeightSequence::from_vec(w)?
        } else {
            random_params(&mut rng, false).weights(t)
        };
        let problem = stochastic_linear(m, t, rng.random())?;
        let hi = vec![rng.random_range(0.5..2.0); m];
        let map = if k % 2 == 0 {
            MirrorMap::new(MapKind::Quadratic, vec![0.0; m], hi.clone(), 1.0)?
        } else {
            make_response_map(ResponseKind::Log, &hi)?
        };
        let mu1: Vec<f64> = hi.iter().map(|h| 0.5 * h).collect();
        let eta = rng.random_range(0.05..1.0);
        let run = run_oco(&problem, GradientFilter::Convolution(ConvolutionFilter::new(weights.clone(), m)), eta, &map, &mu1)?;
        let inv = toeplitz_inverse(&weights)?;
        let comparator: Vec<f64> = hi.iter().map(|h| rng.random::<f64>() * h).collect();
        let (lhs, rhs) = decomposition_sides(&run.grads, &run.zs, &run.mus, &comparator, &inv, &weights)?;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Largest `mu_{t,j} - mu_max_j` over 100 LP trials per controller kind,
/// with the number of trials whose budget was overspent.
pub fn bounded_iterates_max_excess(trials_per_kind: usize) -> Result<(f64, usize)> {
    let mut rng = rng_from_seed(301);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for kind in KINDS {
        for k in 0..trials_per_kind {
            let seed = derive_seed(302 + kind as u64, k as u64);
            let m = rng.random_range(1..=4);
            let params = gen_lp_params(seed, m, 3)?;
            let t = 400;
            let stream = sample_lp_requests(&params, t, seed ^ 7)?;
            let eta = 1.0 / (t as f64).sqrt();
            let p = random_params_of(&mut rng, kind, eta);
            let fbar = stream.max_reward;
            let budget: Vec<f64> = params.rho.iter().map(|r| r * t as f64).collect();
            let mu1: Vec<f64> = params.rho.iter().map(|r| rng.random::<f64>() * fbar / r).collect();
            let cfg = TrialConfig { params: p, map: MirrorMap::quadratic(m)?, budget, mu1: Some(mu1) };
            let rec = run_trial(&stream.requests, &cfg)?;
            let ceiling = mu_max(MapKind::Quadratic, &params.rho, fbar, 1.0, eta, p.beta, 1.0)?;
            for mu in &rec.mu_path {
                for j in 0..m {
                    worst = worst.max(mu[j] - ceiling[j]);
                }
            }
            violations += (!rec.budget_respected()) as usize;
        }
    }
    Ok((worst, violations))
}

fn lemmas_suite() -> Result<Vec<CheckLine>> {
    let (margin, steps) = stability_min_margin()?;
    let l2 = decomposition_max_error()?;
    let (excess, violations) = bounded_iterates_max_excess(100)?;
    Ok(vec![
        CheckLine::new("lemmas.stability_margin", margin, Bound::AtLeast, -1e-12, format!("steps={steps}")),
        CheckLine::new("lemmas.decomposition_identity", l2, Bound::AtMost, 1e-8, "triples=50 T=50 m=3".into()),
        CheckLine::new("lemmas.bounded_iterates", excess, Bound::AtMost, 1e-9, "trials=400 max(mu - mu_max)".into()),
        CheckLine::new("lemmas.budget_feasibility", violations as f64, Bound::AtMost, 0.0, "overspent trials".into()),
    ])
}

/// Smallest bound-minus-regret over the 50-problem suite for every kind,
/// with the number of (problem, kind) pairs checked.
pub fn regret_bound_min_slack() -> Result<(f64, usize)> {
    let suite = random_suite(401, 50)?;
    let mut rng = rng_from_seed(402);
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for case in &suite {
        for kind in KINDS {
            let t = case.problem.horizon() as f64;
            let eta = rng.random_range(0.2..3.0) / t.sqrt();
            let p = random_params_of(&mut rng, kind, eta);
            let rep = verify_regret_bound(&case.problem, &p, &case.map, None, None)?;
            if rep.status == CheckStatus::Checked {
                worst = worst.min(rep.min_slack);
                checked += 1;
            }
        }
    }
    Ok((worst, checked))
}

pub const SCALING_HORIZONS: [usize; 3] = [250, 1000, 4000];

/// Log-log slope of the mean regret of a P controller against `T`.
pub fn regret_slope() -> Result<(f64, Vec<f64>)> {
    let xs: Vec<f64> = SCALING_HORIZONS.iter().map(|t| *t as f64).collect();
    let ys = SCALING_HORIZONS
        .iter()
        .map(|&t| mean_regret_p(3, t, 20, 501))
        .collect::<Result<Vec<f64>>>()?;
    Ok((loglog_slope(&xs, &ys), ys))
}

fn regret_suite() -> Result<Vec<CheckLine>> {
    let (slack, checked) = regret_bound_min_slack()?;
    let (slope, ys) = regret_slope()?;
    Ok(vec![
        CheckLine::new("regret.bound_slack", slack, Bound::AtLeast, -1e-9, format!("checked={checked}")),
        CheckLine::new(
            "regret.loglog_slope",
            slope,
            Bound::AtMost,
            0.65,
            format!("T=250,1000,4000 regret={:.3},{:.3},{:.3}", ys[0], ys[1], ys[2]),
        ),
    ])
}
