//! Online convex optimization testbed: run convolutional mirror descent on
//! arbitrary convex sequences, measure regret and compare it with the
//! adversarial bound.

use rand::Rng;

use crate::cmd::{mirror_step, stability_margin, GradientFilter, NormPair};
use crate::error::{check_dim, Error, Result};
use crate::instance::rng_from_seed;
use crate::mirror::{MapKind, MirrorMap};
use crate::pid::{make_response_map, CanonicalParams, ResponseKind};
use crate::spectral::{classify_roots, regret_bound, toeplitz_inverse, BoundInputs};

/// A convex function on the box with one subgradient per point.
pub trait ConvexFn: Send + Sync {
    fn value(&self, mu: &[f64]) -> f64;
    fn subgradient(&self, mu: &[f64], out: &mut [f64]);
}

/// `w(mu) = g' mu + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub g: Vec<f64>,
    pub c: f64,
}

impl ConvexFn for Linear {
    fn value(&self, mu: &[f64]) -> f64 {
        dot(&self.g, mu) + self.c
    }
    fn subgradient(&self, _mu: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.g);
    }
}

/// `w(mu) = max_k a_k' mu + b_k`; the subgradient is the first active piece.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub pieces: Vec<(Vec<f64>, f64)>,
}

impl PiecewiseLinear {
    fn active(&self, mu: &[f64]) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, (a, b)) in self.pieces.iter().enumerate() {
            let v = dot(a, mu) + b;
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        best
    }
}

impl ConvexFn for PiecewiseLinear {
    fn value(&self, mu: &[f64]) -> f64 {
        let (a, b) = &self.pieces[self.active(mu)];
        dot(a, mu) + b
    }
    fn subgradient(&self, mu: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.pieces[self.active(mu)].0);
    }
}

/// `w(mu) = (k / 2) ||mu - center||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub k: f64,
}

impl ConvexFn for Quadratic {
    fn value(&self, mu: &[f64]) -> f64 {
        0.5 * self.k * mu.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
    fn subgradient(&self, mu: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(mu).zip(&self.center) {
            *o = self.k * (a - b);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl ConvexFn for Constant {
    fn value(&self, _mu: &[f64]) -> f64 {
        self.0
    }
    fn subgradient(&self, _mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A finite sequence of convex functions on the box `[lo, hi]` and the
/// comparators against which regret is measured.
pub struct OcoProblem {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub fns: Vec<Box<dyn ConvexFn>>,
    pub comparators: Vec<Vec<f64>>,
    /// Starting point `mu_1`; the lower corner by default.
    pub start: Vec<f64>,
}

impl OcoProblem {
    /// Problem with the default comparator set.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, fns: Vec<Box<dyn ConvexFn>>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let comparators = default_comparators(&lo, &hi);
        let start = lo.clone();
        Ok(Self { lo, hi, fns, comparators, start })
    }

    pub fn horizon(&self) -> usize {
        self.fns.len()
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Checks `w(nu) >= w(mu) + g'(nu - mu)` on 20 random pairs per function.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let m = self.dim();
        let mut rng = rng_from_seed(seed);
        let span: Vec<f64> = (0..m).map(|j| finite_hi(self.lo[j], self.hi[j]) - self.lo[j]).collect();
        let mut g = vec![0.0; m];
        for (t, f) in self.fns.iter().enumerate() {
            for _ in 0..20 {
                let mu: Vec<f64> = (0..m).map(|j| self.lo[j] + rng.random::<f64>() * span[j]).collect();
                let nu: Vec<f64> = (0..m).map(|j| self.lo[j] + rng.random::<f64>() * span[j]).collect();
                f.subgradient(&mu, &mut g);
                let lin = f.value(&mu) + dot(&g, &nu) - dot(&g, &mu);
                let v = f.value(&nu);
                if v < lin - 1e-9 * (1.0 + v.abs()) {
                    return Err(Error::HypothesisViolated(format!(
                        "function {} fails the subgradient inequality",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn finite_hi(lo: f64, hi: f64) -> f64 {
    if hi.is_finite() {
        hi
    } else {
        lo + 10.0
    }
}

/// Box corners plus a uniform grid with 11 levels per axis. Beyond three
/// coordinates the grid cycles its three digits over the coordinates.
pub fn default_comparators(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let m = lo.len();
    let top: Vec<f64> = (0..m).map(|j| finite_hi(lo[j], hi[j])).collect();
    let mut out = Vec::new();
    if m <= 10 {
        for mask in 0..(1usize << m) {
            out.push((0..m).map(|j| if mask >> j & 1 == 1 { top[j] } else { lo[j] }).collect());
        }
    }
    let axes = m.min(3);
    let count = 11usize.pow(axes as u32);
    for k in 0..count {
        let digits: Vec<usize> = (0..axes).map(|a| k / 11usize.pow(a as u32) % 11).collect();
        out.push(
            (0..m)
                .map(|j| (lo[j] + (top[j] - lo[j]) * (digits[j % axes] as f64 / 10.0)).min(top[j]))
                .collect(),
        );
    }
    out
}

/// Trajectory and regrets of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct OcoRun {
    /// `mu_1, ..., mu_{T+1}`.
    pub mus: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
    pub zs: Vec<Vec<f64>>,
    /// `sum_t w_t(mu_t)`.
    pub loss: f64,
    /// Regret against each comparator, in order.
    pub regrets: Vec<f64>,
}

impl OcoRun {
    pub fn max_regret(&self) -> f64 {
        self.regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest stability margin over the trajectory.
    pub fn min_stability_margin(&self, eta: f64, sigma: f64, norms: NormPair) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for t in 0..self.zs.len() {
            let m = stability_margin(&self.mus[t], &self.mus[t + 1], &self.zs[t], eta, sigma, norms)?;
            worst = worst.min(m);
        }
        Ok(worst)
    }
}

/// Runs mirror descent driven by `filter` from `mu1`.
pub fn run_oco(
    problem: &OcoProblem,
    mut filter: GradientFilter,
    eta: f64,
    map: &MirrorMap,
    mu1: &[f64],
) -> Result<OcoRun> {
    let m = problem.dim();
    check_dim(m, map.dim())?;
    check_dim(m, mu1.len())?;
    if !map.contains(mu1) {
        return Err(Error::Domain("starting point outside the box".into()));
    }
    let mut mus = vec![mu1.to_vec()];
    let mut grads = Vec::with_capacity(problem.horizon());
    let mut zs = Vec::with_capacity(problem.horizon());
    let mut loss = 0.0;
    for (t, f) in problem.fns.iter().enumerate() {
        let mu = mus.last().expect("non-empty");
        let v = f.value(mu);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("value of function {}", t + 1)));
        }
        loss += v;
        let mut g = vec![0.0; m];
        f.subgradient(mu, &mut g);
        let z = filter.advance(&g)?;
        let next = mirror_step(mu, &z, eta, map)?;
        grads.push(g);
        zs.push(z);
        mus.push(next);
    }
    let regrets = problem
        .comparators
        .iter()
        .map(|c| loss - problem.fns.iter().map(|f| f.value(c)).sum::<f64>())
        .collect();
    Ok(OcoRun { mus, grads, zs, loss, regrets })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckStatus {
    Checked,
    Skipped(String),
}

/// Measured regret against the bound for every comparator.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretBoundReport {
    pub status: CheckStatus,
    pub regrets: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Smallest `bound - regret` over comparators.
    pub min_slack: f64,
    pub g1: f64,
    pub g2: f64,
}

impl RegretBoundReport {
    pub fn passed(&self) -> bool {
        match self.status {
            CheckStatus::Checked => self.min_slack >= -1e-9,
            CheckStatus::Skipped(_) => true,
        }
    }
}

/// Runs the PID filter from the problem's start and evaluates the regret bound
/// per comparator in the Euclidean norm. `g1` and `g2` default to the
/// largest gradient and filtered-gradient norms seen along the run.
pub fn verify_regret_bound(
    problem: &OcoProblem,
    params: &CanonicalParams,
    map: &MirrorMap,
    g1: Option<f64>,
    g2: Option<f64>,
) -> Result<RegretBoundReport> {
    let t = problem.horizon();
    let skipped = |why: String| RegretBoundReport {
        status: CheckStatus::Skipped(why),
        regrets: Vec::new(),
        bounds: Vec::new(),
        min_slack: f64::INFINITY,
        g1: 0.0,
        g2: 0.0,
    };
    if t == 0 {
        return Ok(skipped("empty horizon".into()));
    }
    let rc = classify_roots(params);
    if !rc.real_roots {
        return Ok(skipped(format!("outside the real-roots condition (discriminant {:.3e})", rc.discriminant)));
    }
    if problem.hi.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter("the bound needs a bounded box".into()));
    }
    let inv = toeplitz_inverse(&params.weights(t))?;
    if let Some(a) = inv.a().iter().find(|a| **a < -1e-9) {
        return Ok(skipped(format!("negative a_t = {a:.3e}")));
    }
    let lambda = params.weights(t + 1);
    let run = run_oco(problem, GradientFilter::pid(*params, problem.dim()), params.eta, map, &problem.start)?;
    let norm = NormPair::L2;
    let g1 = g1.unwrap_or_else(|| run.grads.iter().map(|g| norm.primal(g)).fold(0.0, f64::max));
    let g2 = g2.unwrap_or_else(|| run.zs.iter().map(|z| norm.primal(z)).fold(0.0, f64::max));
    let mut bounds = Vec::with_capacity(problem.comparators.len());
    let mut min_slack = f64::INFINITY;
    for (c, regret) in problem.comparators.iter().zip(&run.regrets) {
        let v1 = map.bregman(c, &run.mus[0])?;
        let mut vmax: f64 = 0.0;
        for mu in &run.mus[..t] {
            vmax = vmax.max(map.bregman(c, mu)?);
        }
        let x = BoundInputs { eta: params.eta, sigma: map.sigma(), g1, g2, v1, vmax };
        let bound = regret_bound(&inv, &lambda, &x)?;
        min_slack = min_slack.min(bound - regret);
        bounds.push(bound);
    }
    Ok(RegretBoundReport { status: CheckStatus::Checked, regrets: run.regrets, bounds, min_slack, g1, g2 })
}

/// One entry of the randomized regret suite.
pub struct SuiteCase {
    pub problem: OcoProblem,
    pub map: MirrorMap,
    pub seed: u64,
}

/// Random problems with linear or piecewise-linear losses, `m <= 5`,
/// `T <= 500`, on boxes `[0, hi]`. Every fourth problem uses the entropy map
/// and starts at the box centre; the rest use the quadratic map and start at 0.
pub fn random_suite(seed: u64, count: usize) -> Result<Vec<SuiteCase>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let m = rng.random_range(1..=5);
        let t = rng.random_range(50..=500);
        let hi: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
        let lo = vec![0.0; m];
        let piecewise = k % 2 == 1;
        let mut fns: Vec<Box<dyn ConvexFn>> = Vec::with_capacity(t);
        let drift: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        for _ in 0..t {
            if piecewise {
                let pieces = (0..3)
                    .map(|_| {
                        let a: Vec<f64> = (0..m).map(|j| drift[j] + rng.random_range(-1.0..1.0)).collect();
                        (a, rng.random_range(-0.5..0.5))
                    })
                    .collect();
                fns.push(Box::new(PiecewiseLinear { pieces }));
            } else {
                let g: Vec<f64> = (0..m).map(|j| drift[j] + rng.random_range(-1.0..1.0)).collect();
                fns.push(Box::new(Linear { g, c: 0.0 }));
            }
        }
        let kind = if k % 4 == 3 { ResponseKind::Log } else { ResponseKind::Identity };
        let map = make_response_map(kind, &hi)?;
        let mut problem = OcoProblem::new(lo, hi, fns)?;
        if kind == ResponseKind::Log {
            // the entropy map cannot leave 0
            problem.start = problem.hi.iter().map(|h| 0.5 * h).collect();
        }
        out.push(SuiteCase { problem, map, seed: rng.random() });
    }
    Ok(out)
}

/// Stochastic linear losses `w_t(mu) = g_t' mu` with
/// `g_t = drift + U(-1, 1)^m` on `[0, 1]^m`.
pub fn stochastic_linear(m: usize, horizon: usize, seed: u64) -> Result<OcoProblem> {
    let mut rng = rng_from_seed(seed);
    let drift: Vec<f64> = (0..m).map(|_| rng.random_range(-0.2..0.2)).collect();
    let fns: Vec<Box<dyn ConvexFn>> = (0..horizon)
        .map(|_| {
            let g = (0..m).map(|j| drift[j] + rng.random_range(-1.0..1.0)).collect();
            Box::new(Linear { g, c: 0.0 }) as Box<dyn ConvexFn>
        })
        .collect();
    OcoProblem::new(vec![0.0; m], vec![1.0; m], fns)
}

/// Mean over `reps` seeds of the largest regret of a P controller with
/// `eta = T^{-1/2}` on [`stochastic_linear`] problems.
pub fn mean_regret_p(m: usize, horizon: usize, reps: usize, seed: u64) -> Result<f64> {
    let map = MirrorMap::new(MapKind::Quadratic, vec![0.0; m], vec![1.0; m], 1.0)?;
    let eta = 1.0 / (horizon as f64).sqrt();
    let params = CanonicalParams::proportional(eta)?;
    let mut total = 0.0;
    for r in 0..reps {
        let problem = stochastic_linear(m, horizon, crate::instance::derive_seed(seed, r as u64))?;
        let run = run_oco(&problem, GradientFilter::pid(params, m), eta, &map, map.lo())?;
        total += run.max_regret();
    }
    Ok(total / reps.max(1) as f64)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
