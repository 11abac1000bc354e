//! Convolutional mirror descent: gradient filters, the mirror step and the
//! one-step stability margin.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::mirror::MirrorMap;
use crate::pid::{CanonicalParams, WeightSequence};

/// Recursive state of the PID filter. Starts at `e = 0`, `g_prev = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub e: Vec<f64>,
    pub g_prev: Vec<f64>,
    /// Index of the next gradient to be filtered, starting at 1.
    pub t: usize,
}

impl FilterState {
    pub fn new(m: usize) -> Self {
        Self { e: vec![0.0; m], g_prev: vec![0.0; m], t: 1 }
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// Filters `g` in place and writes `z` into `out`.
    pub fn advance_into(&mut self, g: &[f64], p: &CanonicalParams, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        check_dim(self.dim(), out.len())?;
        check_finite("gradient", g)?;
        for j in 0..g.len() {
            let e = p.beta * self.e[j] + (1.0 - p.beta) * g[j];
            out[j] = p.alpha_p * g[j] + p.alpha_i * e + p.alpha_d * (g[j] - self.g_prev[j]);
            self.e[j] = e;
            self.g_prev[j] = g[j];
        }
        self.t += 1;
        Ok(())
    }

    pub fn advance(&mut self, g: &[f64], p: &CanonicalParams) -> Result<Vec<f64>> {
        let mut z = vec![0.0; g.len()];
        self.advance_into(g, p, &mut z)?;
        Ok(z)
    }
}

/// Functional form of [`FilterState::advance`].
pub fn filter_gradient(
    state: &FilterState,
    g: &[f64],
    p: &CanonicalParams,
) -> Result<(Vec<f64>, FilterState)> {
    let mut next = state.clone();
    let z = next.advance(g, p)?;
    Ok((z, next))
}

/// Direct convolution `z_t = sum_{s<=t} lambda_{t-s} g_s` over a stored
/// history. Costs `O(t m)` per step; use it for weights outside the PID family.
#[derive(Clone, Debug)]
pub struct ConvolutionFilter {
    weights: WeightSequence,
    history: Vec<Vec<f64>>,
    m: usize,
}

impl ConvolutionFilter {
    pub fn new(weights: WeightSequence, m: usize) -> Self {
        Self { weights, history: Vec::new(), m }
    }

    pub fn advance(&mut self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.m, g.len())?;
        check_finite("gradient", g)?;
        self.history.push(g.to_vec());
        let t = self.history.len();
        let mut z = vec![0.0; self.m];
        for (s, gs) in self.history.iter().enumerate() {
            let w = self.weights.get(t - 1 - s);
            if w != 0.0 {
                for j in 0..self.m {
                    z[j] += w * gs[j];
                }
            }
        }
        Ok(z)
    }
}

/// Either filter behind one interface.
#[derive(Clone, Debug)]
pub enum GradientFilter {
    Pid { params: CanonicalParams, state: FilterState },
    Convolution(ConvolutionFilter),
}

impl GradientFilter {
    pub fn pid(params: CanonicalParams, m: usize) -> Self {
        GradientFilter::Pid { params, state: FilterState::new(m) }
    }

    pub fn advance(&mut self, g: &[f64]) -> Result<Vec<f64>> {
        match self {
            GradientFilter::Pid { params, state } => state.advance(g, params),
            GradientFilter::Convolution(f) => f.advance(g),
        }
    }
}

/// `mu'_j = clamp(l_j^{-1}(l_j(mu_j) - eta z_j), lo_j, hi_j)`.
pub fn mirror_step(mu: &[f64], z: &[f64], eta: f64, map: &MirrorMap) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mu.len()];
    mirror_step_into(mu, z, eta, map, &mut out)?;
    Ok(out)
}

pub fn mirror_step_into(
    mu: &[f64],
    z: &[f64],
    eta: f64,
    map: &MirrorMap,
    out: &mut [f64],
) -> Result<()> {
    check_dim(map.dim(), mu.len())?;
    check_dim(map.dim(), z.len())?;
    check_dim(map.dim(), out.len())?;
    check_finite("dual iterate", mu)?;
    check_finite("filtered gradient", z)?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("step size {eta} must be finite and >= 0")));
    }
    if !map.contains(mu) {
        return Err(Error::Domain("dual iterate outside the mirror map box".into()));
    }
    for j in 0..mu.len() {
        out[j] = map.step_coord(j, mu[j], eta * z[j]);
    }
    Ok(())
}

/// Primal/dual norm pair used in the stability inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormPair {
    /// Euclidean on both sides.
    L2,
    /// `||.||_inf` on gradients, `||.||_1` on iterates.
    InfL1,
}

impl NormPair {
    pub fn primal(&self, z: &[f64]) -> f64 {
        match self {
            NormPair::L2 => l2(z),
            NormPair::InfL1 => z.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    pub fn dual(&self, x: &[f64]) -> f64 {
        match self {
            NormPair::L2 => l2(x),
            NormPair::InfL1 => x.iter().map(|v| v.abs()).sum(),
        }
    }

    /// Strong-convexity constant of a separable map with respect to this
    /// pair's iterate norm, given its Euclidean constant in dimension `m`.
    /// Uses `||x||_1^2 <= m ||x||_2^2` for the 1-norm.
    pub fn sigma(&self, sigma_l2: f64, m: usize) -> f64 {
        match self {
            NormPair::L2 => sigma_l2,
            NormPair::InfL1 => sigma_l2 / m.max(1) as f64,
        }
    }
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(sqrt 2 / sigma) eta ||z||_primal - ||mu_next - mu||_dual`.
pub fn stability_margin(
    mu: &[f64],
    mu_next: &[f64],
    z: &[f64],
    eta: f64,
    sigma: f64,
    norms: NormPair,
) -> Result<f64> {
    check_dim(mu.len(), mu_next.len())?;
    let diff: Vec<f64> = mu_next.iter().zip(mu).map(|(a, b)| a - b).collect();
    let margin = std::f64::consts::SQRT_2 / sigma * eta * norms.primal(z) - norms.dual(&diff);
    if margin.is_nan() {
        return Err(Error::NonFinite("stability margin".into()));
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirror::MapKind;
    use approx::assert_abs_diff_eq;

    fn params(ap: f64, ai: f64, ad: f64, beta: f64) -> CanonicalParams {
        CanonicalParams::new(1.0, ap, ai, ad, beta).unwrap()
    }

    #[test]
    fn p_filter_is_identity() {
        let p = params(1.0, 0.0, 0.0, 0.3);
        let mut s = FilterState::new(2);
        assert_eq!(s.advance(&[1.5, -2.0], &p).unwrap(), vec![1.5, -2.0]);
        assert_eq!(s.advance(&[0.25, 4.0], &p).unwrap(), vec![0.25, 4.0]);
    }

    #[test]
    fn momentum_filter_recursion() {
        let p = params(0.0, 1.0, 0.0, 0.5);
        let s = FilterState::new(1);
        let (z1, s) = filter_gradient(&s, &[1.0], &p).unwrap();
        let (z2, s) = filter_gradient(&s, &[1.0], &p).unwrap();
        assert_eq!(z1, vec![0.5]);
        assert_eq!(z2, vec![0.75]);
        assert_eq!(s.t, 3);
    }

    #[test]
    fn impulse_response_is_weights() {
        let p = params(0.4, 0.4, 0.2, 0.5);
        let mut s = FilterState::new(1);
        let got: Vec<f64> = (0..4)
            .map(|t| s.advance(&[if t == 0 { 1.0 } else { 0.0 }], &p).unwrap()[0])
            .collect();
        for (g, w) in got.iter().zip([0.8, -0.1, 0.05, 0.025]) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-15);
        }
    }

    #[test]
    fn filter_dimension_mismatch() {
        let p = params(1.0, 0.0, 0.0, 0.0);
        let mut s = FilterState::new(2);
        assert!(matches!(s.advance(&[1.0], &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quadratic_steps() {
        let map = MirrorMap::quadratic(1).unwrap();
        assert_eq!(mirror_step(&[2.0], &[0.5], 1.0, &map).unwrap(), vec![1.5]);
        assert_eq!(mirror_step(&[0.2], &[1.0], 1.0, &map).unwrap(), vec![0.0]);
        assert_eq!(mirror_step(&[3.0], &[1.0], 1.0, &map).unwrap(), vec![2.0]);
    }

    #[test]
    fn entropy_step_halves() {
        let map = MirrorMap::new(MapKind::Entropy, vec![0.0], vec![10.0], 0.1).unwrap();
        let next = mirror_step(&[2.0], &[2f64.ln()], 1.0, &map).unwrap();
        assert_abs_diff_eq!(next[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn step_rejects_non_finite() {
        let map = MirrorMap::quadratic(1).unwrap();
        assert!(matches!(mirror_step(&[1.0], &[f64::NAN], 1.0, &map), Err(Error::NonFinite(_))));
    }

    #[test]
    fn margins() {
        let map = MirrorMap::quadratic(2).unwrap();
        let mu = [5.0, 5.0];
        let z = [1.0, -2.0];
        let eta = 0.5;
        let next = mirror_step(&mu, &z, eta, &map).unwrap();
        let m = stability_margin(&mu, &next, &z, eta, 1.0, NormPair::L2).unwrap();
        assert_abs_diff_eq!(m, (2f64.sqrt() - 1.0) * eta * 5f64.sqrt(), epsilon = 1e-14);
        let m0 = stability_margin(&mu, &mu, &z, 0.0, 1.0, NormPair::InfL1).unwrap();
        assert_eq!(m0, 0.0);
    }

    #[test]
    fn convolution_filter_matches_pid() {
        let p = params(0.3, 0.5, 0.2, 0.9);
        let mut pid = GradientFilter::pid(p, 2);
        let mut conv = GradientFilter::Convolution(ConvolutionFilter::new(p.weights(20), 2));
        for t in 0..20 {
            let g = [(t as f64).sin(), (0.3 * t as f64).cos()];
            let a = pid.advance(&g).unwrap();
            let b = conv.advance(&g).unwrap();
            for j in 0..2 {
                assert_abs_diff_eq!(a[j], b[j], epsilon = 1e-13);
            }
        }
    }
}
