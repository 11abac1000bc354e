//! Translation between practitioner PID gains, normalized controller
//! parameters, convolution weights, and response-function mirror maps.

use crate::error::{Error, Result};
use crate::mirror::{MapKind, MirrorMap};

const ALPHA_SUM_TOL: f64 = 1e-12;

/// Raw gains `(K_P, K_I, K_D)` and the exponential-averaging factor `beta`
/// of an incremental PID controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub beta: f64,
}

impl ControllerGains {
    pub fn new(kp: f64, ki: f64, kd: f64, beta: f64) -> Result<Self> {
        let gains = Self { kp, ki, kd, beta };
        gains.validate()?;
        Ok(gains)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("K_P", self.kp), ("K_I", self.ki), ("K_D", self.kd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidGains(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        check_beta(self.beta)?;
        if self.step_size() <= 0.0 {
            return Err(Error::InvalidGains("all gains are zero".into()));
        }
        Ok(())
    }

    /// `eta = K_P + K_I / (1 - beta) + K_D`.
    pub fn step_size(&self) -> f64 {
        self.kp + self.ki / (1.0 - self.beta) + self.kd
    }

    pub fn to_canonical(&self) -> Result<CanonicalParams> {
        gains_to_canonical(self)
    }
}

/// Which terms of the controller are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    P,
    PD,
    PI,
    PID,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ControllerKind::P => "P",
            ControllerKind::PD => "PD",
            ControllerKind::PI => "PI",
            ControllerKind::PID => "PID",
        };
        f.write_str(s)
    }
}

/// Normalized parameters: step size `eta` and term weights
/// `alpha_p + alpha_i + alpha_d = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalParams {
    pub eta: f64,
    pub alpha_p: f64,
    pub alpha_i: f64,
    pub alpha_d: f64,
    pub beta: f64,
}

impl CanonicalParams {
    pub fn new(eta: f64, alpha_p: f64, alpha_i: f64, alpha_d: f64, beta: f64) -> Result<Self> {
        let p = Self { eta, alpha_p, alpha_i, alpha_d, beta };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters with `alpha_p = 1 - alpha_i - alpha_d`.
    pub fn from_alphas(eta: f64, alpha_i: f64, alpha_d: f64, beta: f64) -> Result<Self> {
        let mut alpha_p = 1.0 - alpha_i - alpha_d;
        if alpha_p < 0.0 && alpha_p > -ALPHA_SUM_TOL {
            alpha_p = 0.0;
        }
        Self::new(eta, alpha_p, alpha_i, alpha_d, beta)
    }

    /// Pure proportional controller.
    pub fn proportional(eta: f64) -> Result<Self> {
        Self::new(eta, 1.0, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::InvalidParameter(format!("eta = {} must be > 0", self.eta)));
        }
        for (name, v) in [("alpha_P", self.alpha_p), ("alpha_I", self.alpha_i), ("alpha_D", self.alpha_d)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        let sum = self.alpha_p + self.alpha_i + self.alpha_d;
        if (sum - 1.0).abs() > ALPHA_SUM_TOL {
            return Err(Error::InvalidParameter(format!("alpha weights sum to {sum}, expected 1")));
        }
        check_beta(self.beta)
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(eta, self.alpha_p, self.alpha_i, self.alpha_d, self.beta)
    }

    pub fn kind(&self) -> ControllerKind {
        match (self.alpha_i > 0.0, self.alpha_d > 0.0) {
            (false, false) => ControllerKind::P,
            (false, true) => ControllerKind::PD,
            (true, false) => ControllerKind::PI,
            (true, true) => ControllerKind::PID,
        }
    }

    pub fn to_gains(&self) -> ControllerGains {
        canonical_to_gains(self)
    }

    pub fn weights(&self, horizon: usize) -> WeightSequence {
        canonical_to_weights(self, horizon)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in [0, 1)")));
    }
    Ok(())
}

pub fn gains_to_canonical(g: &ControllerGains) -> Result<CanonicalParams> {
    g.validate()?;
    let eta = g.step_size();
    CanonicalParams::new(
        eta,
        g.kp / eta,
        g.ki / (eta * (1.0 - g.beta)),
        g.kd / eta,
        g.beta,
    )
}

pub fn canonical_to_gains(p: &CanonicalParams) -> ControllerGains {
    ControllerGains {
        kp: p.eta * p.alpha_p,
        ki: p.eta * p.alpha_i * (1.0 - p.beta),
        kd: p.eta * p.alpha_d,
        beta: p.beta,
    }
}

/// Convolution weights `lambda_0, ..., lambda_{T-1}` of a gradient filter.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSequence {
    lambda: Vec<f64>,
}

impl WeightSequence {
    /// Arbitrary weights, e.g. for running the filter outside the PID family.
    pub fn from_vec(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidParameter("weight sequence must be non-empty".into()));
        }
        crate::error::check_finite("weights", &lambda)?;
        Ok(Self { lambda })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn horizon(&self) -> usize {
        self.lambda.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.lambda.get(i).copied().unwrap_or(0.0)
    }

    /// First `len` weights.
    pub fn truncated(&self, len: usize) -> WeightSequence {
        Self { lambda: self.lambda[..len.min(self.lambda.len())].to_vec() }
    }
}

pub fn canonical_to_weights(p: &CanonicalParams, horizon: usize) -> WeightSequence {
    let horizon = horizon.max(1);
    let tail = p.alpha_i * (1.0 - p.beta);
    let mut lambda = Vec::with_capacity(horizon);
    let mut beta_pow = 1.0;
    for i in 0..horizon {
        let w = match i {
            0 => 1.0 - p.alpha_i + tail,
            1 => -p.alpha_d + tail * beta_pow,
            _ => tail * beta_pow,
        };
        lambda.push(w);
        beta_pow *= p.beta;
    }
    WeightSequence { lambda }
}

/// Response function family for the nonlinear controller update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResponseKind {
    /// `l(mu) = mu`: additive controller.
    Identity,
    /// `l(mu) = log(mu)`: multiplicative controller.
    Log,
    /// `l(s) = q log(1 + s) - 1`: multiplicative bid shading with power `q`.
    Power(f64),
}

impl std::fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResponseKind::Identity => f.write_str("quadratic"),
            ResponseKind::Log => f.write_str("entropy"),
            ResponseKind::Power(q) => write!(f, "power:{q}"),
        }
    }
}

impl std::str::FromStr for ResponseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" | "identity" | "additive" => Ok(ResponseKind::Identity),
            "entropy" | "log" | "multiplicative" => Ok(ResponseKind::Log),
            _ => {
                let q = s
                    .strip_prefix("power:")
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown map kind '{s}'")))?;
                Ok(ResponseKind::Power(q))
            }
        }
    }
}

/// Builds the mirror map induced by a response function on `[0, box_hi_j]`.
///
/// The strong-convexity constant is the minimum of `l'` over the box:
/// 1 for the identity, `1 / max_j hi_j` for the logarithm and
/// `q / (1 + max_j hi_j)` for the power response.
pub fn make_response_map(kind: ResponseKind, box_hi: &[f64]) -> Result<MirrorMap> {
    if box_hi.is_empty() {
        return Err(Error::InvalidParameter("box must have at least one coordinate".into()));
    }
    if box_hi.iter().any(|&h| h.is_nan() || h <= 0.0) {
        return Err(Error::InvalidParameter("box upper bounds must be > 0".into()));
    }
    let widest = box_hi.iter().copied().fold(0.0, f64::max);
    let lo = vec![0.0; box_hi.len()];
    let hi = box_hi.to_vec();
    match kind {
        ResponseKind::Identity => MirrorMap::new(MapKind::Quadratic, lo, hi, 1.0),
        ResponseKind::Log => {
            require_finite_box(box_hi)?;
            MirrorMap::new(MapKind::Entropy, lo, hi, 1.0 / widest)
        }
        ResponseKind::Power(q) => {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::InvalidParameter(format!("power q = {q} must be >= 1")));
            }
            require_finite_box(box_hi)?;
            MirrorMap::new(MapKind::Power { q }, lo, hi, q / (1.0 + widest))
        }
    }
}

fn require_finite_box(box_hi: &[f64]) -> Result<()> {
    if box_hi.iter().all(|h| h.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "this response needs a finite box for its strong-convexity constant".into(),
        ))
    }
}

/// Change of variables between a bid shading factor `nu in (0, 1]` and the
/// dual variable: `mu = nu^(-1/q) - 1`, so that `v / (1 + mu) = nu^(1/q) v`.
pub fn shading_to_dual(nu: f64, q: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("shading factor {nu} outside (0, 1]")));
    }
    check_power(q)?;
    Ok((nu.powf(-1.0 / q) - 1.0).max(0.0))
}

pub fn dual_to_shading(mu: f64, q: f64) -> Result<f64> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("dual variable {mu} must be finite and >= 0")));
    }
    check_power(q)?;
    Ok((1.0 + mu).powf(-q))
}

fn check_power(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("power q = {q} must be >= 1")));
    }
    Ok(())
}
