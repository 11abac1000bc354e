//! Inverse of the lower-triangular Toeplitz weight matrix, closed forms of
//! its first column for the PID family, and the adversarial regret bound.

use crate::error::{Error, Result};
use crate::pid::{CanonicalParams, ControllerKind, WeightSequence};

const DISC_TOL: f64 = 1e-12;
const REPEATED_TOL: f64 = 1e-9;

/// First column `q_0..q_{T-1}` of `R^{-1}` and its suffix sums
/// `a_t = q_0 + ... + q_{T-t}` for `t = 1..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseSequence {
    q: Vec<f64>,
    a: Vec<f64>,
}

impl InverseSequence {
    pub fn from_q(q: Vec<f64>) -> Self {
        let t = q.len();
        let mut a = vec![0.0; t];
        let mut acc = 0.0;
        // a_T = q_0, a_{T-1} = q_0 + q_1, ...
        for (i, qi) in q.iter().enumerate() {
            acc += qi;
            a[t - 1 - i] = acc;
        }
        Self { q, a }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `a[t - 1]` holds `a_t`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    /// `max_k |sum_{i<=k} lambda_i q_{k-i} - [k == 0]|`.
    pub fn convolution_residual(&self, lambda: &WeightSequence) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.q.len() {
            let s: f64 = (0..=k).map(|i| lambda.get(i) * self.q[k - i]).sum();
            let target = if k == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
        worst
    }

    pub fn abs_sum(&self) -> f64 {
        self.q.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &InverseSequence) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `R q = e_1` by forward substitution.
pub fn toeplitz_inverse(lambda: &WeightSequence) -> Result<InverseSequence> {
    let l = lambda.as_slice();
    let l0 = l[0];
    if l0 == 0.0 {
        return Err(Error::SingularFilter);
    }
    let t = l.len();
    let mut q = Vec::with_capacity(t);
    q.push(1.0 / l0);
    for k in 1..t {
        let s: f64 = (1..=k).map(|i| l[i] * q[k - i]).sum();
        q.push(-s / l0);
    }
    Ok(InverseSequence::from_q(q))
}

/// Roots of `a z^2 - b z + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Roots {
    /// `b = 0 = a`: constant polynomial.
    None,
    /// `a = 0`: single root `c / b`.
    Linear(f64),
    Real { minus: f64, plus: f64 },
    Complex { re: f64, im: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootClassification {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub discriminant: f64,
    pub real_roots: bool,
    pub roots: Roots,
}

impl RootClassification {
    /// Largest `|a z^2 - b z + c|` over the returned roots.
    pub fn residual(&self) -> f64 {
        let eval = |re: f64, im: f64| {
            // (re + i im)^2 = re^2 - im^2 + 2 i re im
            let pr = self.a * (re * re - im * im) - self.b * re + self.c;
            let pi = self.a * 2.0 * re * im - self.b * im;
            pr.hypot(pi)
        };
        match self.roots {
            Roots::None => 0.0,
            Roots::Linear(z) => eval(z, 0.0),
            Roots::Real { minus, plus } => eval(minus, 0.0).max(eval(plus, 0.0)),
            Roots::Complex { re, im } => eval(re, im),
        }
    }
}

/// Classifies the characteristic quadratic with `a = alpha_D beta`,
/// `b = alpha_D + beta (1 - alpha_I)`, `c = 1 - alpha_I beta`.
pub fn classify_roots(p: &CanonicalParams) -> RootClassification {
    let a = p.alpha_d * p.beta;
    let b = p.alpha_d + p.beta * (1.0 - p.alpha_i);
    let c = 1.0 - p.alpha_i * p.beta;
    let disc = b * b - 4.0 * a * c;
    if a == 0.0 {
        let roots = if b == 0.0 { Roots::None } else { Roots::Linear(c / b) };
        return RootClassification { a, b, c, discriminant: disc, real_roots: true, roots };
    }
    let real_roots = disc >= -DISC_TOL;
    let roots = if real_roots {
        let sq = disc.max(0.0).sqrt();
        // Cancellation-free pair: z_+ from the stable sum, z_- from z_+ z_- = c / a.
        let plus = (b + sq) / (2.0 * a);
        let minus = c / (a * plus);
        Roots::Real { minus, plus }
    } else {
        Roots::Complex { re: b / (2.0 * a), im: (-disc).sqrt() / (2.0 * a) }
    };
    RootClassification { a, b, c, discriminant: disc, real_roots, roots }
}

/// Closed-form first column of `R^{-1}` for the controller family `kind`.
pub fn q_closed_form(kind: ControllerKind, p: &CanonicalParams, horizon: usize) -> Result<InverseSequence> {
    if kind != p.kind() {
        return Err(Error::InvalidParameter(format!(
            "controller kind {kind} does not match parameters of kind {}",
            p.kind()
        )));
    }
    let horizon = horizon.max(1);
    let q = match kind {
        ControllerKind::P => {
            let mut q = vec![0.0; horizon];
            q[0] = 1.0;
            q
        }
        ControllerKind::PD => (0..horizon).map(|t| p.alpha_d.powi(t as i32)).collect(),
        ControllerKind::PI => {
            // The 1/lambda_0 factor comes from normalizing the transform by lambda_0.
            let l0 = 1.0 - p.alpha_i * p.beta;
            let omega = (1.0 - p.alpha_i) * p.beta / l0;
            (0..horizon)
                .map(|t| {
                    if t == 0 {
                        1.0 / l0
                    } else {
                        -(p.beta - omega) * omega.powi(t as i32 - 1) / l0
                    }
                })
                .collect()
        }
        ControllerKind::PID => pid_q(p, horizon)?,
    };
    Ok(InverseSequence::from_q(q))
}

/// Evaluates `q_0 = 1/c`, `q_i = (h_{i+1} - beta h_i) / c` with
/// `h_k = (u^k - v^k) / (u - v)` and `u, v` the reciprocal roots.
fn pid_q(p: &CanonicalParams, horizon: usize) -> Result<Vec<f64>> {
    let rc = classify_roots(p);
    if !rc.real_roots {
        return Err(Error::RealRootsViolated { discriminant: rc.discriminant });
    }
    let (b, c, beta) = (rc.b, rc.c, p.beta);
    let h: Box<dyn Fn(usize) -> f64> = match rc.roots {
        Roots::None => Box::new(|k| if k == 1 { 1.0 } else { 0.0 }),
        Roots::Linear(_) => {
            let omega = b / c;
            Box::new(move |k| if k == 0 { 0.0 } else { omega.powi(k as i32 - 1) })
        }
        Roots::Real { minus, plus } => {
            let sq = rc.discriminant.max(0.0).sqrt();
            let u = 1.0 / minus;
            if (plus - minus).abs() < REPEATED_TOL * plus.abs().max(1.0) {
                Box::new(move |k| k as f64 * u.powi(k as i32 - 1))
            } else {
                let ln_r = (-sq / (c * u)).ln_1p();
                let denom = ln_r.exp_m1();
                Box::new(move |k| {
                    if k == 0 {
                        0.0
                    } else {
                        u.powi(k as i32 - 1) * (k as f64 * ln_r).exp_m1() / denom
                    }
                })
            }
        }
        Roots::Complex { .. } => unreachable!("complex roots rejected above"),
    };
    Ok((0..horizon)
        .map(|i| if i == 0 { 1.0 / c } else { (h(i + 1) - beta * h(i)) / c })
        .collect())
}

/// Upper bound `M` on `sum_i |q_i|` for the real-root PID family.
pub fn pid_abs_sum_bound(p: &CanonicalParams) -> Result<f64> {
    let rc = classify_roots(p);
    if !rc.real_roots {
        return Err(Error::RealRootsViolated { discriminant: rc.discriminant });
    }
    let (a, b, c, beta) = (rc.a, rc.b, rc.c, p.beta);
    match rc.roots {
        Roots::None => Ok(1.0 / c + beta / c),
        Roots::Linear(_) => {
            let omega = b / c;
            if omega >= 1.0 {
                return Ok(f64::INFINITY);
            }
            Ok(1.0 / c + (omega - beta).abs() / (c * (1.0 - omega)))
        }
        Roots::Real { minus, plus } => {
            if (plus - minus).abs() < REPEATED_TOL * plus.abs().max(1.0) {
                let u = 1.0 / plus;
                Ok((1.0 + (1.0 + beta) / ((1.0 - u) * (1.0 - u))) / c)
            } else {
                let ratio = a * plus / c;
                Ok(1.0 / c + (1.0 + beta) * plus / (c * (1.0 - ratio) * (1.0 - ratio)))
            }
        }
        Roots::Complex { .. } => unreachable!(),
    }
}

/// Inputs of the adversarial regret bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub eta: f64,
    pub sigma: f64,
    /// Bound on the primal norm of the raw gradients.
    pub g1: f64,
    /// Bound on the primal norm of the filtered gradients.
    pub g2: f64,
    /// `V(mu, mu_1)`.
    pub v1: f64,
    /// `max_s V(mu, mu_s)`.
    pub vmax: f64,
}

/// Evaluates
/// `(eta G2^2 / 2 sigma) sum a_t + (a_1 / eta) V1 + (Vmax / eta) sum (a_s - a_{s-1})^+
///  + sqrt 2 G1 G2 (eta / sigma) sum_j sum_{k<=j} k |a_j lambda_k|`.
///
/// Weights past the end of `lambda` count as zero, so pass `T + 1` weights
/// to include `lambda_T`.
pub fn regret_bound(inv: &InverseSequence, lambda: &WeightSequence, x: &BoundInputs) -> Result<f64> {
    let a = inv.a();
    if let Some((t, v)) = a.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::HypothesisViolated(format!("a_{} = {v:.3e} is negative", t + 1)));
    }
    if !(x.eta > 0.0) || !(x.sigma > 0.0) {
        return Err(Error::InvalidParameter("eta and sigma must be > 0".into()));
    }
    let sum_a: f64 = a.iter().sum();
    let ups: f64 = a.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
    let mut prefix = 0.0;
    let mut double = 0.0;
    for (j0, aj) in a.iter().enumerate() {
        let j = j0 + 1;
        prefix += j as f64 * lambda.get(j).abs();
        double += aj.abs() * prefix;
    }
    let a1 = a.first().copied().unwrap_or(0.0);
    let bound = x.eta * x.g2 * x.g2 / (2.0 * x.sigma) * sum_a
        + a1 / x.eta * x.v1
        + x.vmax / x.eta * ups
        + std::f64::consts::SQRT_2 * x.g1 * x.g2 * x.eta / x.sigma * double;
    if !bound.is_finite() {
        return Err(Error::NonFinite("regret bound".into()));
    }
    Ok(bound)
}

/// Both sides of the regret decomposition
/// `sum g_t'(mu_t - mu) = sum a_t z_t'(mu_t - mu)
///   - sum_s sum_{t>s} b_{t,s} g_s'(mu_t - mu_{t-1})`,
/// with `b_{t,s} = sum_{j=t..T} a_j lambda_{j-s}` accumulated by suffix.
/// `mus[t - 1]` is `mu_t`; `z` must be the convolution of `g` with `lambda`.
pub fn decomposition_sides(
    g: &[Vec<f64>],
    z: &[Vec<f64>],
    mus: &[Vec<f64>],
    comparator: &[f64],
    inv: &InverseSequence,
    lambda: &WeightSequence,
) -> Result<(f64, f64)> {
    let t_len = g.len();
    if z.len() != t_len || mus.len() < t_len || inv.horizon() != t_len {
        return Err(Error::DimensionMismatch { expected: t_len, got: z.len().min(mus.len()) });
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let gap = |t: usize| -> Vec<f64> { mus[t].iter().zip(comparator).map(|(a, b)| a - b).collect() };

    let mut lhs = 0.0;
    let mut first = 0.0;
    for t in 0..t_len {
        let d = gap(t);
        lhs += dot(&g[t], &d);
        first += inv.a()[t] * dot(&z[t], &d);
    }
    let steps: Vec<Vec<f64>> = (1..t_len)
        .map(|t| mus[t].iter().zip(&mus[t - 1]).map(|(a, b)| a - b).collect())
        .collect();
    let mut second = 0.0;
    for s in 0..t_len {
        let mut b = 0.0;
        for t in (s + 1..t_len).rev() {
            b += inv.a()[t] * lambda.get(t - s);
            second += b * dot(&g[s], &steps[t - 1]);
        }
    }
    Ok((lhs, first - second))
}
