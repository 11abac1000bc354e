//! Offline benchmark for allocation problems: the Lagrangian dual bound
//! with a certifying primal solution, and exact optima for tiny instances.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::allocation::{LpRequest, Request};
use crate::error::{check_dim, Error, Result};

/// Default relative gap target.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Largest number of LP variables `T * d` accepted by [`exact_opt`].
pub const EXACT_MAX_VARS: usize = 12;

/// Every request as a linear request over the simplex. An auction becomes a
/// single option with reward `v - d` and consumption `d` (winning fraction).
fn lp_view(req: &Request) -> Cow<'_, LpRequest> {
    match req {
        Request::Lp(r) => Cow::Borrowed(r),
        Request::Auction { value, competing } => Cow::Owned(LpRequest {
            reward: vec![value - competing],
            consumption: vec![*competing],
        }),
    }
}

fn views(requests: &[Request], m: usize) -> Result<Vec<Cow<'_, LpRequest>>> {
    requests
        .iter()
        .map(|r| {
            check_dim(m, r.m())?;
            Ok(lp_view(r))
        })
        .collect()
}

/// `D(mu) = sum_t max(0, max_i r_{t,i} - (c_t' mu)_i) + B' mu`.
pub fn dual_value(mu: &[f64], requests: &[Request], budget: &[f64]) -> Result<f64> {
    check_dim(budget.len(), mu.len())?;
    if mu.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("dual variables must be >= 0".into()));
    }
    let views = views(requests, mu.len())?;
    Ok(dual_value_views(mu, &views, budget))
}

fn dual_value_views(mu: &[f64], views: &[Cow<'_, LpRequest>], budget: &[f64]) -> f64 {
    let mut adj = Vec::new();
    let mut total: f64 = budget.iter().zip(mu).map(|(b, m)| b * m).sum();
    for r in views {
        adj.resize(r.d(), 0.0);
        r.adjusted_rewards(mu, &mut adj);
        total += adj.iter().fold(0.0, |a: f64, v| a.max(*v));
    }
    total
}

/// Dual bound on the offline optimum together with a feasible primal
/// solution that certifies how tight it is.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate {
    pub mu: Vec<f64>,
    /// `D(mu)`, an upper bound on the offline optimum.
    pub upper: f64,
    /// Value of the constructed feasible primal solution.
    pub lower: f64,
    pub gap: f64,
    pub converged: bool,
    /// Chosen option and fraction for each request.
    pub allocation: Vec<Option<(usize, f64)>>,
    pub primal_consumption: Vec<f64>,
}

impl DualCertificate {
    /// `gap / upper`, or 0 when both bounds vanish.
    pub fn relative_gap(&self) -> f64 {
        if self.upper > 0.0 {
            self.gap / self.upper
        } else {
            0.0
        }
    }
}

/// Minimizes the dual over `mu >= 0` and builds a greedy primal at the
/// minimizer.
///
/// The dual is minimized through a log-sum-exp smoothing with a decreasing
/// temperature, each level solved by projected Newton; coordinate-wise
/// golden-section search on the exact dual polishes the result when the gap
/// target is not yet met. The returned upper bound is the exact dual value at
/// the final point and is valid whether or not the target was reached.
pub fn dual_bound(requests: &[Request], budget: &[f64], tol: f64) -> Result<DualCertificate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    let m = budget.len();
    if m == 0 || budget.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(Error::InvalidParameter("budget must be finite and >= 0".into()));
    }
    let views = views(requests, m)?;
    let scale = views
        .iter()
        .map(|r| r.reward.iter().fold(0.0, |a: f64, v| a.max(*v)))
        .sum::<f64>()
        / views.len().max(1) as f64;

    let mut best_mu = vec![0.0; m];
    let mut best = dual_value_views(&best_mu, &views, budget);
    let mut cert = certify(&best_mu, best, &views, budget, tol);
    if cert.converged || scale == 0.0 {
        return Ok(cert);
    }

    let mut mu = best_mu.clone();
    let mut tau = 0.1 * scale;
    let tau_min = 1e-10 * scale;
    while tau >= tau_min {
        newton_level(&mut mu, &views, budget, tau);
        let v = dual_value_views(&mu, &views, budget);
        if v < best {
            best = v;
            best_mu.clone_from(&mu);
        }
        tau *= 0.2;
    }
    cert = certify(&best_mu, best, &views, budget, tol);

    for _ in 0..4 {
        if cert.converged {
            break;
        }
        let before = best;
        golden_sweep(&mut best_mu, &mut best, &views, budget, scale);
        cert = certify(&best_mu, best, &views, budget, tol);
        if before - best <= 1e-14 * before.abs().max(1.0) {
            break;
        }
    }
    Ok(cert)
}

struct Smoothed {
    value: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

/// `D_tau(mu) = sum_t tau log(1 + sum_i exp(a_{t,i} / tau)) + B' mu`.
fn smoothed(mu: &[f64], views: &[Cow<'_, LpRequest>], budget: &[f64], tau: f64, with_hess: bool) -> Smoothed {
    let m = mu.len();
    let mut value: f64 = budget.iter().zip(mu).map(|(b, v)| b * v).sum();
    let mut grad = budget.to_vec();
    let mut hess = DMatrix::zeros(if with_hess { m } else { 0 }, if with_hess { m } else { 0 });
    let mut adj = Vec::new();
    let mut w = Vec::new();
    let mut u = vec![0.0; m];
    for r in views {
        let d = r.d();
        adj.resize(d, 0.0);
        w.resize(d, 0.0);
        r.adjusted_rewards(mu, &mut adj);
        let top = adj.iter().fold(0.0, |a: f64, v| a.max(*v));
        let mut s = (-top / tau).exp();
        for i in 0..d {
            w[i] = ((adj[i] - top) / tau).exp();
            s += w[i];
        }
        value += top + tau * s.ln();
        u.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            let p = w[i] / s;
            if p < 1e-300 {
                continue;
            }
            for j in 0..m {
                let cji = r.c(j, i);
                if cji != 0.0 {
                    u[j] += p * cji;
                    if with_hess {
                        for k in 0..=j {
                            let cki = r.c(k, i);
                            if cki != 0.0 {
                                hess[(j, k)] += p * cji * cki / tau;
                            }
                        }
                    }
                }
            }
        }
        for j in 0..m {
            grad[j] -= u[j];
            if with_hess {
                for k in 0..=j {
                    hess[(j, k)] -= u[j] * u[k] / tau;
                }
            }
        }
    }
    if with_hess {
        for j in 0..m {
            for k in 0..j {
                hess[(k, j)] = hess[(j, k)];
            }
        }
    }
    Smoothed { value, grad, hess }
}

/// Projected Newton on `D_tau` over the non-negative orthant.
fn newton_level(mu: &mut Vec<f64>, views: &[Cow<'_, LpRequest>], budget: &[f64], tau: f64) {
    let m = mu.len();
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let cur = smoothed(mu, views, budget, tau, true);
        let free: Vec<usize> = (0..m).filter(|&j| mu[j] > 0.0 || cur.grad[j] < 0.0).collect();
        if free.is_empty() {
            return;
        }
        let nf = free.len();
        let mut h = DMatrix::from_fn(nf, nf, |a, b| cur.hess[(free[a], free[b])]);
        let trace = (0..nf).map(|a| h[(a, a)].abs()).sum::<f64>() / nf as f64;
        let mut reg = 1e-12 * trace.max(1e-300);
        let gf = DVector::from_fn(nf, |a, _| cur.grad[free[a]]);
        let step = loop {
            for a in 0..nf {
                h[(a, a)] += reg;
            }
            if let Some(ch) = h.clone().cholesky() {
                break ch.solve(&gf);
            }
            reg *= 100.0;
            if reg > 1e12 * trace.max(1.0) {
                break gf.clone();
            }
        };
        let mut dir = vec![0.0; m];
        for (a, &j) in free.iter().enumerate() {
            dir[j] = step[a];
        }

        let mut s = 1.0;
        let mut accepted = false;
        let mut trial = mu.clone();
        for _ in 0..50 {
            for j in 0..m {
                trial[j] = (mu[j] - s * dir[j]).max(0.0);
            }
            let decrease: f64 = (0..m).map(|j| cur.grad[j] * (mu[j] - trial[j])).sum();
            let next = smoothed(&trial, views, budget, tau, false).value;
            if next <= cur.value - 1e-4 * decrease && next <= cur.value {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return;
        }
        let moved: f64 = (0..m).map(|j| (trial[j] - mu[j]).abs()).sum();
        mu.clone_from(&trial);
        if moved <= 1e-13 * (1.0 + mu.iter().sum::<f64>()) || last - cur.value <= 1e-13 * cur.value.abs() {
            return;
        }
        last = cur.value;
    }
}

/// One pass of golden-section line searches along each coordinate of the
/// exact (piecewise-linear, convex) dual.
fn golden_sweep(mu: &mut [f64], best: &mut f64, views: &[Cow<'_, LpRequest>], budget: &[f64], scale: f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for j in 0..mu.len() {
        let centre = mu[j];
        let width = (0.5 * centre).max(1e-3 * scale.max(1e-12));
        let mut lo = (centre - width).max(0.0);
        let mut hi = centre + width;
        let mut probe = mu.to_vec();
        let mut eval = |x: f64| {
            probe[j] = x;
            dual_value_views(&probe, views, budget)
        };
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        for _ in 0..60 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = eval(x2);
            }
        }
        let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if f < *best {
            *best = f;
            mu[j] = x;
        }
    }
}

/// Greedy fractional primal at `mu`: requests in decreasing order of their
/// best adjusted reward each take as much of their best option as the
/// remaining budget allows.
fn certify(mu: &[f64], upper: f64, views: &[Cow<'_, LpRequest>], budget: &[f64], tol: f64) -> DualCertificate {
    let m = budget.len();
    let mut adj = Vec::new();
    let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(views.len());
    for (t, r) in views.iter().enumerate() {
        adj.resize(r.d(), 0.0);
        r.adjusted_rewards(mu, &mut adj);
        let mut best = 0;
        for i in 1..adj.len() {
            if adj[i] > adj[best] {
                best = i;
            }
        }
        if r.reward[best] > 0.0 {
            order.push((adj[best], t, best));
        }
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut remaining = budget.to_vec();
    let mut used = vec![0.0; m];
    let mut allocation = vec![None; views.len()];
    let mut lower = 0.0;
    for &(_, t, i) in &order {
        let r = &views[t];
        let mut frac: f64 = 1.0;
        for j in 0..m {
            let c = r.c(j, i);
            if c > 0.0 {
                frac = frac.min(remaining[j] / c);
            }
        }
        if frac <= 0.0 {
            continue;
        }
        for j in 0..m {
            let c = r.c(j, i) * frac;
            remaining[j] = (remaining[j] - c).max(0.0);
            used[j] += c;
        }
        lower += r.reward[i] * frac;
        allocation[t] = Some((i, frac));
    }
    let gap = (upper - lower).max(0.0);
    let converged = gap <= tol * upper.abs() || gap == 0.0;
    DualCertificate { mu: mu.to_vec(), upper, lower, gap, converged, allocation, primal_consumption: used }
}

/// Exact offline optimum of the fractional problem by vertex enumeration,
/// for instances with at most [`EXACT_MAX_VARS`] variables.
pub fn exact_opt(requests: &[Request], budget: &[f64]) -> Result<f64> {
    let m = budget.len();
    let views = views(requests, m)?;
    let n: usize = views.iter().map(|r| r.d()).sum();
    if n > EXACT_MAX_VARS {
        return Err(Error::InvalidParameter(format!(
            "exact optimum supports at most {EXACT_MAX_VARS} variables, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    // Constraints A x <= b: -x_k <= 0, per-request simplex rows, budget rows.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 0..n {
        let mut row = vec![0.0; n];
        row[k] = -1.0;
        rows.push((row, 0.0));
    }
    let mut offset = 0;
    let mut objective = vec![0.0; n];
    let mut budget_rows = vec![vec![0.0; n]; m];
    for r in &views {
        let mut row = vec![0.0; n];
        for i in 0..r.d() {
            row[offset + i] = 1.0;
            objective[offset + i] = r.reward[i];
            for (j, br) in budget_rows.iter_mut().enumerate() {
                br[offset + i] = r.c(j, i);
            }
        }
        rows.push((row, 1.0));
        offset += r.d();
    }
    for (j, br) in budget_rows.into_iter().enumerate() {
        rows.push((br, budget[j]));
    }

    let feasible = |x: &DVector<f64>| {
        rows.iter().all(|(row, b)| {
            let lhs: f64 = row.iter().zip(x.iter()).map(|(a, v)| a * v).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        })
    };
    let mut best: f64 = 0.0;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, k| rows[idx[i]].0[k]);
        let b = DVector::from_fn(n, |i, _| rows[idx[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let val: f64 = objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
                best = best.max(val);
            }
        }
        if !next_combination(&mut idx, rows.len()) {
            break;
        }
    }
    Ok(best)
}

/// Advances `idx` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for l in i + 1..k {
                idx[l] = idx[l - 1] + 1;
            }
            return true;
        }
    }
    false
}
