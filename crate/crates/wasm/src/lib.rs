//! Browser bindings: a weight/inverse explorer and two pacing simulators.
//!
//! The `*_impl` functions hold the logic and are tested natively; the
//! exported wrappers only convert errors.

use paceforge_core::allocation::{run_trial, Request, TrialConfig, TrialRecord};
use paceforge_core::harness::pacing_map;
use paceforge_core::instance::{
    gen_auction_stream, gen_lp_params, instance_seed, sample_lp_requests, trial_seed, AuctionInstanceParams,
};
use paceforge_core::offline::{dual_bound, DEFAULT_TOL};
use paceforge_core::pid::{CanonicalParams, ResponseKind};
use paceforge_core::spectral::{classify_roots, pid_abs_sum_bound, toeplitz_inverse, Roots};
use wasm_bindgen::prelude::*;

const MAX_HORIZON: usize = 20_000;

/// Filter weights, the first column of their inverse, and the suffix sums.
#[wasm_bindgen]
pub struct WeightsView {
    lambda: Vec<f64>,
    q: Vec<f64>,
    a: Vec<f64>,
    kind: String,
    roots: String,
    real_roots: bool,
    abs_sum: f64,
    abs_sum_bound: f64,
}

#[wasm_bindgen]
impl WeightsView {
    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> Vec<f64> {
        self.lambda.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn q(&self) -> Vec<f64> {
        self.q.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn a(&self) -> Vec<f64> {
        self.a.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn kind(&self) -> String {
        self.kind.clone()
    }
    /// Human-readable root description.
    #[wasm_bindgen(getter)]
    pub fn roots(&self) -> String {
        self.roots.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn real_roots(&self) -> bool {
        self.real_roots
    }
    #[wasm_bindgen(getter)]
    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }
    /// `NaN` when the roots are complex.
    #[wasm_bindgen(getter)]
    pub fn abs_sum_bound(&self) -> f64 {
        self.abs_sum_bound
    }
}

pub fn explore_weights_impl(alpha_i: f64, alpha_d: f64, beta: f64, horizon: usize) -> Result<WeightsView, String> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(format!("horizon must be in 1..={MAX_HORIZON}"));
    }
    let p = CanonicalParams::from_alphas(1.0, alpha_i, alpha_d, beta).map_err(|e| e.to_string())?;
    let w = p.weights(horizon);
    let inv = toeplitz_inverse(&w).map_err(|e| e.to_string())?;
    let rc = classify_roots(&p);
    let roots = match rc.roots {
        Roots::None => "none (constant polynomial)".to_string(),
        Roots::Linear(z) => format!("single root {z:.6}"),
        Roots::Real { minus, plus } => format!("real roots {minus:.6}, {plus:.6}"),
        Roots::Complex { re, im } => format!("complex roots {re:.6} \u{00b1} {im:.6}i"),
    };
    Ok(WeightsView {
        lambda: w.as_slice().to_vec(),
        q: inv.q().to_vec(),
        a: inv.a().to_vec(),
        kind: p.kind().to_string(),
        roots,
        real_roots: rc.real_roots,
        abs_sum: inv.abs_sum(),
        abs_sum_bound: if rc.real_roots { pid_abs_sum_bound(&p).unwrap_or(f64::NAN) } else { f64::NAN },
    })
}

#[wasm_bindgen]
pub fn explore_weights(alpha_i: f64, alpha_d: f64, beta: f64, horizon: usize) -> Result<WeightsView, JsError> {
    explore_weights_impl(alpha_i, alpha_d, beta, horizon).map_err(|e| JsError::new(&e))
}

/// One pacing run: dual path, cumulative reward and spend, and the ratio
/// against the dual bound of the same stream.
#[wasm_bindgen]
pub struct Trajectory {
    m: usize,
    mu: Vec<f64>,
    reward: Vec<f64>,
    spend: Vec<f64>,
    budget: Vec<f64>,
    total_reward: f64,
    upper: f64,
    gate_triggers: usize,
}

#[wasm_bindgen]
impl Trajectory {
    #[wasm_bindgen(getter)]
    pub fn m(&self) -> usize {
        self.m
    }
    /// `mu_1, ..., mu_{T+1}` flattened with stride `m`.
    #[wasm_bindgen(getter)]
    pub fn mu(&self) -> Vec<f64> {
        self.mu.clone()
    }
    /// Cumulative reward after each step.
    #[wasm_bindgen(getter)]
    pub fn reward(&self) -> Vec<f64> {
        self.reward.clone()
    }
    /// Cumulative spend as a fraction of the budget, stride `m`.
    #[wasm_bindgen(getter)]
    pub fn spend(&self) -> Vec<f64> {
        self.spend.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn budget(&self) -> Vec<f64> {
        self.budget.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }
    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> f64 {
        self.upper
    }
    #[wasm_bindgen(getter)]
    pub fn ratio(&self) -> f64 {
        if self.upper > 0.0 {
            self.total_reward / self.upper
        } else {
            1.0
        }
    }
    #[wasm_bindgen(getter)]
    pub fn gate_triggers(&self) -> usize {
        self.gate_triggers
    }
}

/// Controller settings shared by both simulators.
#[derive(Clone, Copy, Debug)]
pub struct Controller {
    pub alpha_i: f64,
    pub alpha_d: f64,
    pub beta: f64,
    /// Step multiplier, `eta = s / sqrt(T)`.
    pub s: f64,
}

fn simulate(requests: &[Request], rho: &[f64], fbar: f64, c: Controller, map: &str) -> Result<Trajectory, String> {
    let err = |e: paceforge_core::Error| e.to_string();
    let t = requests.len();
    let eta = c.s / (t as f64).sqrt();
    let params = CanonicalParams::from_alphas(eta, c.alpha_i, c.alpha_d, c.beta).map_err(err)?;
    let kind: ResponseKind = map.parse().map_err(err)?;
    let (map, mu1) = pacing_map(kind, rho, fbar, eta, c.beta, None).map_err(err)?;
    let budget: Vec<f64> = rho.iter().map(|r| r * t as f64).collect();
    let rec: TrialRecord =
        run_trial(requests, &TrialConfig { params, map, budget: budget.clone(), mu1: Some(mu1) }).map_err(err)?;
    let upper = dual_bound(requests, &budget, DEFAULT_TOL).map_err(err)?.upper;

    let m = rho.len();
    let mut reward = Vec::with_capacity(t);
    let mut spend = Vec::with_capacity(t * m);
    let mut acc = 0.0;
    let mut used = vec![0.0; m];
    for s in &rec.steps {
        acc += s.reward;
        reward.push(acc);
        for j in 0..m {
            used[j] += s.consumption[j];
            spend.push(used[j] / budget[j]);
        }
    }
    Ok(Trajectory {
        m,
        mu: rec.mu_path.concat(),
        reward,
        spend,
        budget,
        total_reward: rec.total_reward,
        upper,
        gate_triggers: rec.gate_triggers(),
    })
}

fn check_horizon(horizon: usize) -> Result<(), String> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(format!("horizon must be in 1..={MAX_HORIZON}"));
    }
    Ok(())
}

pub fn lp_pacing_impl(m: usize, d: usize, horizon: usize, seed: u64, c: Controller, map: &str) -> Result<Trajectory, String> {
    check_horizon(horizon)?;
    if m == 0 || d == 0 || m > 50 || d > 50 {
        return Err("m and d must be in 1..=50".into());
    }
    let err = |e: paceforge_core::Error| e.to_string();
    let params = gen_lp_params(instance_seed(seed, 0), m, d).map_err(err)?;
    let stream = sample_lp_requests(&params, horizon, trial_seed(seed, 0, 0)).map_err(err)?;
    simulate(&stream.requests, &params.rho, stream.max_reward, c, map)
}

/// Random online LP with `m` resources and `d` options.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn lp_pacing(
    m: usize,
    d: usize,
    horizon: usize,
    seed: u32,
    alpha_i: f64,
    alpha_d: f64,
    beta: f64,
    s: f64,
    map: &str,
) -> Result<Trajectory, JsError> {
    lp_pacing_impl(m, d, horizon, seed.into(), Controller { alpha_i, alpha_d, beta, s }, map).map_err(|e| JsError::new(&e))
}

pub fn auction_pacing_impl(horizon: usize, rho: f64, seed: u64, c: Controller, map: &str) -> Result<Trajectory, String> {
    check_horizon(horizon)?;
    let params = AuctionInstanceParams { rho, ..AuctionInstanceParams::default() };
    let requests = gen_auction_stream(&params, horizon, seed).map_err(|e| e.to_string())?;
    simulate(&requests, &[rho], params.value.upper(), c, map)
}

/// Repeated second-price auctions with uniform values and competing bids.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn auction_pacing(
    horizon: usize,
    rho: f64,
    seed: u32,
    alpha_i: f64,
    alpha_d: f64,
    beta: f64,
    s: f64,
    map: &str,
) -> Result<Trajectory, JsError> {
    auction_pacing_impl(horizon, rho, seed.into(), Controller { alpha_i, alpha_d, beta, s }, map).map_err(|e| JsError::new(&e))
}
