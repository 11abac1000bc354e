//! The dual-based PID controller for online allocation: primal decisions,
//! the budget gate, and the dual update.

use crate::cmd::{mirror_step_into, FilterState};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::mirror::{MapKind, MirrorMap};
use crate::pid::CanonicalParams;

/// Linear request over the simplex `{x >= 0, sum x <= 1}` in `R^d`.
/// `consumption` is the `m x d` matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRequest {
    pub reward: Vec<f64>,
    pub consumption: Vec<f64>,
}

impl LpRequest {
    pub fn new(reward: Vec<f64>, consumption: Vec<f64>) -> Result<Self> {
        let d = reward.len();
        if d == 0 || consumption.is_empty() || !consumption.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch { expected: d, got: consumption.len() });
        }
        check_finite("reward", &reward)?;
        check_finite("consumption", &consumption)?;
        if reward.iter().chain(&consumption).any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("rewards and consumptions must be >= 0".into()));
        }
        Ok(Self { reward, consumption })
    }

    pub fn d(&self) -> usize {
        self.reward.len()
    }

    pub fn m(&self) -> usize {
        self.consumption.len() / self.reward.len()
    }

    /// Consumption of resource `j` by vertex `i`.
    pub fn c(&self, j: usize, i: usize) -> f64 {
        self.consumption[j * self.d() + i]
    }

    /// `r_i - (c' mu)_i` for every vertex, written into `out`.
    pub fn adjusted_rewards(&self, mu: &[f64], out: &mut [f64]) {
        let d = self.d();
        out.copy_from_slice(&self.reward);
        for (j, &mj) in mu.iter().enumerate() {
            if mj != 0.0 {
                let row = &self.consumption[j * d..(j + 1) * d];
                for (o, c) in out.iter_mut().zip(row) {
                    *o -= mj * c;
                }
            }
        }
    }
}

/// A request of one of the two supported families.
#[derive(Clone, Debug, PartialEq)]
pub enum Request {
    Lp(LpRequest),
    /// Second-price auction: value `v`, highest competing bid `d`.
    Auction { value: f64, competing: f64 },
}

impl Request {
    pub fn auction(value: f64, competing: f64) -> Result<Self> {
        if !(value >= 0.0 && competing >= 0.0) || !value.is_finite() || !competing.is_finite() {
            return Err(Error::InvalidParameter("auction value and competing bid must be >= 0".into()));
        }
        Ok(Request::Auction { value, competing })
    }

    pub fn m(&self) -> usize {
        match self {
            Request::Lp(r) => r.m(),
            Request::Auction { .. } => 1,
        }
    }

    /// Reward and consumption of `action`; consumption is written into `out`.
    pub fn outcome(&self, action: Action, out: &mut [f64]) -> f64 {
        match (self, action) {
            (Request::Lp(r), Action::Vertex(Some(i))) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = r.c(j, i);
                }
                r.reward[i]
            }
            (Request::Auction { value, competing }, Action::Bid(bid)) if bid >= *competing => {
                out[0] = *competing;
                value - competing
            }
            _ => {
                out.iter_mut().for_each(|o| *o = 0.0);
                0.0
            }
        }
    }

    /// The action that consumes nothing.
    pub fn null_action(&self) -> Action {
        match self {
            Request::Lp(_) => Action::Vertex(None),
            Request::Auction { .. } => Action::Bid(0.0),
        }
    }
}

/// A decision: a simplex vertex (`None` is the origin) or a bid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Action {
    Vertex(Option<usize>),
    Bid(f64),
}

/// `argmax_x f(x) - mu' b(x)`.
///
/// For LP requests the best vertex wins ties by lowest index. It is chosen
/// over the origin when its adjusted reward is positive, or zero with a
/// positive raw reward. Auctions bid `v / (1 + mu)`.
pub fn primal_decision(req: &Request, mu: &[f64]) -> Action {
    match req {
        Request::Lp(r) => {
            let mut adj = vec![0.0; r.d()];
            r.adjusted_rewards(mu, &mut adj);
            lp_choice(r, &adj)
        }
        Request::Auction { value, .. } => Action::Bid(value / (1.0 + mu[0])),
    }
}

fn lp_choice(r: &LpRequest, adj: &[f64]) -> Action {
    let mut best = 0;
    for i in 1..adj.len() {
        if adj[i] > adj[best] {
            best = i;
        }
    }
    if adj[best] > 0.0 || (adj[best] == 0.0 && r.reward[best] > 0.0) {
        Action::Vertex(Some(best))
    } else {
        Action::Vertex(None)
    }
}

/// Controller state: dual iterate, spent budget and filter memory.
#[derive(Clone, Debug)]
pub struct DualState {
    mu: Vec<f64>,
    budget: Vec<f64>,
    target: Vec<f64>,
    spent: Vec<f64>,
    filter: FilterState,
    scratch: Scratch,
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    adj: Vec<f64>,
    consumption: Vec<f64>,
    tentative: Vec<f64>,
    error: Vec<f64>,
    z: Vec<f64>,
    next: Vec<f64>,
}

/// Summary of one step; vectors live in the [`DualState`] until the next step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub x_tilde: Action,
    pub x: Action,
    pub reward: f64,
    pub gated: bool,
}

impl DualState {
    /// State at `t = 1` for total budget `budget` over `horizon` periods.
    pub fn new(mu1: Vec<f64>, budget: Vec<f64>, horizon: usize) -> Result<Self> {
        let m = mu1.len();
        check_dim(m, budget.len())?;
        check_finite("initial dual", &mu1)?;
        check_finite("budget", &budget)?;
        if budget.iter().any(|b| *b < 0.0) || mu1.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("budget and initial dual must be >= 0".into()));
        }
        let horizon = horizon.max(1) as f64;
        let target = budget.iter().map(|b| b / horizon).collect();
        Ok(Self {
            mu: mu1,
            target,
            spent: vec![0.0; m],
            budget,
            filter: FilterState::new(m),
            scratch: Scratch {
                consumption: vec![0.0; m],
                tentative: vec![0.0; m],
                error: vec![0.0; m],
                z: vec![0.0; m],
                next: vec![0.0; m],
                adj: Vec::new(),
            },
        })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `B / T`.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn spent(&self) -> &[f64] {
        &self.spent
    }

    pub fn remaining(&self) -> Vec<f64> {
        self.budget.iter().zip(&self.spent).map(|(b, s)| b - s).collect()
    }

    pub fn filter(&self) -> &FilterState {
        &self.filter
    }

    /// Consumption `b_t(x_t)` of the last step.
    pub fn last_consumption(&self) -> &[f64] {
        &self.scratch.consumption
    }

    /// Controller error `B/T - b_t(x_t)` of the last step.
    pub fn last_error(&self) -> &[f64] {
        &self.scratch.error
    }

    /// Filtered error `z_t` of the last step.
    pub fn last_z(&self) -> &[f64] {
        &self.scratch.z
    }

    /// Dual subgradient `B/T - b_t(x~_t)` of the last step.
    pub fn last_subgradient(&self) -> Vec<f64> {
        self.target.iter().zip(&self.scratch.tentative).map(|(r, b)| r - b).collect()
    }

    /// Serves one request and updates the dual iterate.
    pub fn advance(&mut self, req: &Request, p: &CanonicalParams, map: &MirrorMap) -> Result<StepInfo> {
        let m = self.mu.len();
        check_dim(m, req.m())?;
        let x_tilde = match req {
            Request::Lp(r) => {
                self.scratch.adj.resize(r.d(), 0.0);
                r.adjusted_rewards(&self.mu, &mut self.scratch.adj);
                lp_choice(r, &self.scratch.adj)
            }
            Request::Auction { .. } => primal_decision(req, &self.mu),
        };
        let s = &mut self.scratch;
        let tentative_reward = req.outcome(x_tilde, &mut s.tentative);
        // Gate on spent + b <= B: the same comparison as b <= B_t, but it keeps
        // the running total exactly comparable with B.
        let fits = (0..m).all(|j| self.spent[j] + s.tentative[j] <= self.budget[j]);
        let (x, reward) = if fits {
            s.consumption.copy_from_slice(&s.tentative);
            (x_tilde, tentative_reward)
        } else {
            let null = req.null_action();
            (null, req.outcome(null, &mut s.consumption))
        };
        for j in 0..m {
            self.spent[j] += s.consumption[j];
            s.error[j] = self.target[j] - s.consumption[j];
        }
        self.filter.advance_into(&s.error, p, &mut s.z)?;
        mirror_step_into(&self.mu, &s.z, p.eta, map, &mut s.next)?;
        std::mem::swap(&mut self.mu, &mut s.next);
        Ok(StepInfo { x_tilde, x, reward, gated: !fits })
    }
}

/// Everything recorded about one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Dual iterate used for the decision (`mu_t`).
    pub mu: Vec<f64>,
    pub x_tilde: Action,
    pub x: Action,
    pub reward: f64,
    pub consumption: Vec<f64>,
    /// Controller error `B/T - b_t(x_t)`.
    pub error: Vec<f64>,
    /// Dual subgradient `B/T - b_t(x~_t)`.
    pub subgradient: Vec<f64>,
    pub z: Vec<f64>,
    pub gated: bool,
}

/// Functional single step.
pub fn step(
    state: &DualState,
    req: &Request,
    p: &CanonicalParams,
    map: &MirrorMap,
) -> Result<(DualState, StepRecord)> {
    let mut next = state.clone();
    let info = next.advance(req, p, map)?;
    let record = StepRecord {
        mu: state.mu.clone(),
        x_tilde: info.x_tilde,
        x: info.x,
        reward: info.reward,
        consumption: next.last_consumption().to_vec(),
        error: next.last_error().to_vec(),
        subgradient: next.last_subgradient(),
        z: next.last_z().to_vec(),
        gated: info.gated,
    };
    Ok((next, record))
}

/// Controller, mirror map, budget and starting point of a trial.
#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub params: CanonicalParams,
    pub map: MirrorMap,
    /// Total budget `B`.
    pub budget: Vec<f64>,
    /// Starting dual; defaults to the lower corner of the map box.
    pub mu1: Option<Vec<f64>>,
}

impl TrialConfig {
    fn initial_state(&self, horizon: usize) -> Result<DualState> {
        let mu1 = self.mu1.clone().unwrap_or_else(|| self.map.lo().to_vec());
        if !self.map.contains(&mu1) {
            return Err(Error::Domain("initial dual outside the mirror map box".into()));
        }
        if horizon > 0 && self.budget.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::InvalidParameter("budget must be > 0 on every resource".into()));
        }
        DualState::new(mu1, self.budget.clone(), horizon)
    }
}

/// Full trajectory of a trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub steps: Vec<StepRecord>,
    /// `mu_1, ..., mu_{T+1}`.
    pub mu_path: Vec<Vec<f64>>,
    pub total_reward: f64,
    pub total_consumption: Vec<f64>,
    pub budget: Vec<f64>,
}

impl TrialRecord {
    /// `sum_t b_t(x_t) <= B` on every resource.
    pub fn budget_respected(&self) -> bool {
        self.total_consumption.iter().zip(&self.budget).all(|(c, b)| c <= b)
    }

    pub fn gate_triggers(&self) -> usize {
        self.steps.iter().filter(|s| s.gated).count()
    }
}

pub fn run_trial(requests: &[Request], cfg: &TrialConfig) -> Result<TrialRecord> {
    let mut state = cfg.initial_state(requests.len())?;
    let mut steps = Vec::with_capacity(requests.len());
    let mut mu_path = Vec::with_capacity(requests.len() + 1);
    mu_path.push(state.mu.clone());
    let mut total_reward = 0.0;
    for req in requests {
        let mu = state.mu.clone();
        let info = state.advance(req, &cfg.params, &cfg.map)?;
        total_reward += info.reward;
        steps.push(StepRecord {
            mu,
            x_tilde: info.x_tilde,
            x: info.x,
            reward: info.reward,
            consumption: state.last_consumption().to_vec(),
            error: state.last_error().to_vec(),
            subgradient: state.last_subgradient(),
            z: state.last_z().to_vec(),
            gated: info.gated,
        });
        mu_path.push(state.mu.clone());
    }
    Ok(TrialRecord {
        steps,
        mu_path,
        total_reward,
        total_consumption: state.spent.clone(),
        budget: cfg.budget.clone(),
    })
}

/// Totals of a trial without the per-step record.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub total_reward: f64,
    pub total_consumption: Vec<f64>,
    pub budget: Vec<f64>,
    /// Largest iterate seen per resource, including `mu_1` and `mu_{T+1}`.
    pub max_mu: Vec<f64>,
    pub gate_triggers: usize,
}

impl TrialSummary {
    pub fn budget_respected(&self) -> bool {
        self.total_consumption.iter().zip(&self.budget).all(|(c, b)| c <= b)
    }
}

pub fn run_trial_summary(requests: &[Request], cfg: &TrialConfig) -> Result<TrialSummary> {
    let mut state = cfg.initial_state(requests.len())?;
    let mut max_mu = state.mu.clone();
    let mut total_reward = 0.0;
    let mut gate_triggers = 0;
    for req in requests {
        let info = state.advance(req, &cfg.params, &cfg.map)?;
        total_reward += info.reward;
        gate_triggers += info.gated as usize;
        for (m, v) in max_mu.iter_mut().zip(&state.mu) {
            *m = m.max(*v);
        }
    }
    Ok(TrialSummary {
        total_reward,
        total_consumption: state.spent,
        budget: cfg.budget.clone(),
        max_mu,
        gate_triggers,
    })
}

/// Ceiling of the bounded-iterates box,
/// `f/rho_j + 4 eta (b + rho_j) / (sigma (1 - beta))`.
///
/// `sigma` is used for the quadratic map. For the entropy and power maps the
/// constant depends on the ceiling itself and the fixed point is solved.
pub fn mu_max(
    kind: MapKind,
    rho: &[f64],
    fbar: f64,
    bbar: f64,
    eta: f64,
    beta: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&beta) || !(eta >= 0.0) {
        return Err(Error::InvalidParameter("need eta >= 0 and beta in [0, 1)".into()));
    }
    if rho.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("per-period budgets must be > 0".into()));
    }
    rho.iter()
        .map(|&r| {
            let base = fbar / r;
            let k = 4.0 * eta * (bbar + r) / (1.0 - beta);
            match kind {
                MapKind::Quadratic => {
                    if !(sigma > 0.0) {
                        return Err(Error::InvalidParameter("sigma must be > 0".into()));
                    }
                    Ok(base + k / sigma)
                }
                // sigma = 1 / mu_max
                MapKind::Entropy => {
                    let denom = 1.0 - k;
                    if denom <= 0.0 {
                        return Err(Error::StepSizeTooLarge(format!(
                            "4 eta (b + rho) / (1 - beta) = {k:.4} >= 1"
                        )));
                    }
                    Ok(base / denom)
                }
                // sigma = q / (1 + mu_max)
                MapKind::Power { q } => {
                    let denom = 1.0 - k / q;
                    if denom <= 0.0 {
                        return Err(Error::StepSizeTooLarge(format!(
                            "4 eta (b + rho) / (q (1 - beta)) = {:.4} >= 1",
                            k / q
                        )));
                    }
                    Ok((base + k / q) / denom)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(r: Vec<f64>, c: Vec<f64>) -> Request {
        Request::Lp(LpRequest::new(r, c).unwrap())
    }

    fn p_params(eta: f64) -> CanonicalParams {
        CanonicalParams::proportional(eta).unwrap()
    }

    #[test]
    fn lp_decisions() {
        let r = lp(vec![3.0, 1.0], vec![1.0, 1.0]);
        assert_eq!(primal_decision(&r, &[0.0]), Action::Vertex(Some(0)));
        // m = 2, d = 2, columns c(e_1) = (1, 1), c(e_2) = (2, 2)
        let r = lp(vec![1.0, 2.0], vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(primal_decision(&r, &[1.0, 1.0]), Action::Vertex(None));
    }

    #[test]
    fn lp_ties() {
        let r = lp(vec![2.0, 2.0], vec![1.0, 1.0]);
        assert_eq!(primal_decision(&r, &[0.0]), Action::Vertex(Some(0)));
        // zero adjusted reward with positive raw reward picks the vertex
        let r = lp(vec![1.0], vec![1.0]);
        assert_eq!(primal_decision(&r, &[1.0]), Action::Vertex(Some(0)));
        let r = lp(vec![0.0], vec![1.0]);
        assert_eq!(primal_decision(&r, &[0.0]), Action::Vertex(None));
    }

    #[test]
    fn auction_bid() {
        let r = Request::auction(2.0, 0.5).unwrap();
        assert_eq!(primal_decision(&r, &[1.0]), Action::Bid(1.0));
    }

    #[test]
    fn auction_step_pays_competing_bid() {
        let map = MirrorMap::quadratic(1).unwrap();
        let state = DualState::new(vec![0.0], vec![10.0], 10).unwrap();
        let req = Request::auction(0.8, 0.3).unwrap();
        let (_, rec) = step(&state, &req, &p_params(0.1), &map).unwrap();
        assert_eq!(rec.x, Action::Bid(0.8));
        assert_abs_diff_eq!(rec.reward, 0.5, epsilon = 1e-15);
        assert_eq!(rec.consumption, vec![0.3]);
        assert_abs_diff_eq!(rec.error[0], 1.0 - 0.3, epsilon = 1e-15);
    }

    #[test]
    fn exhausted_budget_forces_zero() {
        let map = MirrorMap::quadratic(1).unwrap();
        let mut state = DualState::new(vec![0.0], vec![1.0], 3).unwrap();
        let req = lp(vec![2.0], vec![1.0]);
        state.advance(&req, &p_params(1.0), &map).unwrap();
        let (_, rec) = step(&state, &req, &p_params(1.0), &map).unwrap();
        assert!(rec.gated);
        assert_eq!(rec.x, Action::Vertex(None));
        assert_abs_diff_eq!(rec.error[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rec.subgradient[0], 1.0 / 3.0 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn overconsumption_raises_dual() {
        let map = MirrorMap::quadratic(1).unwrap();
        let state = DualState::new(vec![0.0], vec![5.0], 10).unwrap();
        let req = lp(vec![1.0], vec![1.0]);
        let (next, _) = step(&state, &req, &p_params(0.2), &map).unwrap();
        assert_abs_diff_eq!(next.mu()[0], 0.2 * (1.0 - 0.5), epsilon = 1e-15);
    }

    #[test]
    fn three_step_hand_trial() {
        let reqs: Vec<Request> = (0..3).map(|_| lp(vec![2.0], vec![1.0])).collect();
        let cfg = TrialConfig {
            params: p_params(1.0),
            map: MirrorMap::quadratic(1).unwrap(),
            budget: vec![1.0],
            mu1: None,
        };
        let rec = run_trial(&reqs, &cfg).unwrap();
        assert_eq!(rec.steps[0].x, Action::Vertex(Some(0)));
        assert_abs_diff_eq!(rec.steps[0].error[0], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rec.mu_path[1][0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rec.steps[1].x_tilde, Action::Vertex(Some(0)));
        assert_eq!(rec.steps[1].x, Action::Vertex(None));
        assert_eq!(rec.steps[2].reward, 0.0);
        assert_eq!(rec.total_reward, 2.0);
        assert!(rec.budget_respected());
        let summary = run_trial_summary(&reqs, &cfg).unwrap();
        assert_eq!(summary.total_reward, 2.0);
        assert_eq!(summary.total_consumption, rec.total_consumption);
    }

    #[test]
    fn zero_rewards_drive_dual_down() {
        let reqs: Vec<Request> = (0..20).map(|_| lp(vec![0.0, 0.0], vec![1.0, 0.5])).collect();
        let cfg = TrialConfig {
            params: p_params(0.5),
            map: MirrorMap::quadratic(1).unwrap(),
            budget: vec![4.0],
            mu1: Some(vec![1.0]),
        };
        let rec = run_trial(&reqs, &cfg).unwrap();
        assert_eq!(rec.total_reward, 0.0);
        assert!(rec.mu_path.windows(2).all(|w| w[1][0] <= w[0][0]));
        assert_eq!(*rec.mu_path.last().unwrap(), vec![0.0]);
    }

    #[test]
    fn empty_stream() {
        let cfg = TrialConfig {
            params: p_params(0.5),
            map: MirrorMap::quadratic(1).unwrap(),
            budget: vec![4.0],
            mu1: None,
        };
        let rec = run_trial(&[], &cfg).unwrap();
        assert!(rec.steps.is_empty());
        assert_eq!(rec.total_reward, 0.0);
    }

    #[test]
    fn mu_max_examples() {
        let q = mu_max(MapKind::Quadratic, &[0.5], 1.0, 1.0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(q, vec![2.0]);
        let q = mu_max(MapKind::Quadratic, &[0.5], 1.0, 1.0, 0.1, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(q[0], 3.2, epsilon = 1e-12);
        let e = mu_max(MapKind::Entropy, &[1.0], 1.0, 1.0, 0.01, 0.0, f64::NAN).unwrap();
        assert_abs_diff_eq!(e[0], 1.0 / 0.92, epsilon = 1e-12);
        assert_abs_diff_eq!(e[0], 1.08696, epsilon = 1e-5);
        assert!(matches!(
            mu_max(MapKind::Entropy, &[1.0], 1.0, 1.0, 0.2, 0.5, 1.0),
            Err(Error::StepSizeTooLarge(_))
        ));
    }

    #[test]
    fn power_mu_max_is_a_fixed_point() {
        let (rho, fbar, bbar, eta, beta, q) = (0.3, 1.0, 1.0, 0.02, 0.5, 2.0);
        let v = mu_max(MapKind::Power { q }, &[rho], fbar, bbar, eta, beta, f64::NAN).unwrap()[0];
        let sigma = q / (1.0 + v);
        let rhs = fbar / rho + 4.0 * eta * (bbar + rho) / (sigma * (1.0 - beta));
        assert_abs_diff_eq!(v, rhs, epsilon = 1e-12);
    }
}
