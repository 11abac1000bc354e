//! Separable mirror maps on a box and their Bregman divergences.

use crate::error::{check_dim, Error, Result};

/// Smallest positive iterate kept by the entropy map.
pub const ENTROPY_FLOOR: f64 = 1e-300;
const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapKind {
    /// `h(mu) = mu^2 / 2`.
    Quadratic,
    /// `h(mu) = mu log mu - mu`, gradient `log mu`.
    Entropy,
    /// Gradient `q log(1 + mu) - 1`; `h` is recovered by quadrature.
    Power { q: f64 },
}

/// Reference function applied coordinate-wise, together with the box
/// `[lo_j, hi_j]` on which `sigma` is a valid strong-convexity constant.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap {
    kind: MapKind,
    lo: Vec<f64>,
    hi: Vec<f64>,
    sigma: f64,
}

impl MirrorMap {
    pub fn new(kind: MapKind, lo: Vec<f64>, hi: Vec<f64>, sigma: f64) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidParameter("mirror map needs at least one coordinate".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be finite and > 0")));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l >= 0.0) || !l.is_finite() || !(h > l) {
                return Err(Error::InvalidParameter(format!("invalid box [{l}, {h}]")));
            }
        }
        if let MapKind::Power { q } = kind {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::InvalidParameter(format!("power q = {q} must be >= 1")));
            }
        }
        Ok(Self { kind, lo, hi, sigma })
    }

    /// Quadratic map on `[0, inf)^m` with `sigma = 1`.
    pub fn quadratic(m: usize) -> Result<Self> {
        Self::new(MapKind::Quadratic, vec![0.0; m], vec![f64::INFINITY; m], 1.0)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Same map with a different box and strong-convexity constant.
    pub fn with_box(&self, lo: Vec<f64>, hi: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::new(self.kind, lo, hi, sigma)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(j, &v)| v >= self.lo[j] && v <= self.hi[j])
    }

    /// `l_j(x)`. Coordinates share the same functional form.
    pub fn grad(&self, _j: usize, x: f64) -> f64 {
        match self.kind {
            MapKind::Quadratic => x,
            MapKind::Entropy => x.ln(),
            MapKind::Power { q } => q * x.ln_1p() - 1.0,
        }
    }

    /// `l_j^{-1}(y)`, unclamped.
    pub fn inv_grad(&self, _j: usize, y: f64) -> f64 {
        match self.kind {
            MapKind::Quadratic => y,
            MapKind::Entropy => y.exp(),
            MapKind::Power { q } => ((y + 1.0) / q).exp_m1(),
        }
    }

    /// Analytic derivative of `l_j`.
    pub fn grad_derivative(&self, _j: usize, x: f64) -> f64 {
        match self.kind {
            MapKind::Quadratic => 1.0,
            MapKind::Entropy => 1.0 / x,
            MapKind::Power { q } => q / (1.0 + x),
        }
    }

    /// One coordinate of the mirror step, clamped to the box.
    pub fn step_coord(&self, j: usize, mu: f64, dz: f64) -> f64 {
        let raw = match self.kind {
            MapKind::Quadratic => mu - dz,
            MapKind::Entropy => {
                if mu <= 0.0 {
                    0.0
                } else {
                    (mu * (-dz).exp()).max(ENTROPY_FLOOR)
                }
            }
            MapKind::Power { .. } => self.inv_grad(j, self.grad(j, mu) - dz),
        };
        raw.clamp(self.lo[j], self.hi[j])
    }

    /// `V_h(x, y)` for a single coordinate.
    pub fn bregman_coord(&self, j: usize, x: f64, y: f64) -> f64 {
        if x == y {
            return 0.0;
        }
        let v = match self.kind {
            MapKind::Quadratic => 0.5 * (x - y) * (x - y),
            MapKind::Entropy => {
                if x == 0.0 {
                    y
                } else if y == 0.0 {
                    f64::INFINITY
                } else {
                    x * (x / y).ln() - x + y
                }
            }
            MapKind::Power { .. } => {
                // V(x, y) = int_y^x (l(s) - l(y)) ds; the sign flip keeps the
                // integrand non-negative on [min, max].
                let ly = self.grad(j, y);
                let f = |s: f64| self.grad(j, s) - ly;
                let (a, b) = if x > y { (y, x) } else { (x, y) };
                let integral = adaptive_simpson(&f, a, b, QUAD_TOL);
                if x > y {
                    integral
                } else {
                    -integral
                }
            }
        };
        v.max(0.0)
    }

    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        if !self.contains(x) || !self.contains(y) {
            return Err(Error::Domain("Bregman divergence evaluated outside the box".into()));
        }
        Ok((0..self.dim()).map(|j| self.bregman_coord(j, x[j], y[j])).sum())
    }

    /// Checks the map invariants on `n` grid points per coordinate of the
    /// box (infinite boxes are sampled up to `lo + 1e3`).
    pub fn check_invariants(&self, n: usize) -> Result<()> {
        let n = n.max(3);
        for j in 0..self.dim() {
            let lo = self.lo[j];
            let hi = if self.hi[j].is_finite() { self.hi[j] } else { lo + 1e3 };
            let mut prev = f64::NEG_INFINITY;
            for k in 0..n {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                // log has no finite value at 0; sample just inside.
                let x = if x == 0.0 && self.kind == MapKind::Entropy { 1e-12 } else { x };
                let y = self.grad(j, x);
                if !(y > prev) {
                    return Err(Error::Domain(format!("gradient not increasing at x = {x}")));
                }
                prev = y;
                let back = self.inv_grad(j, y);
                if (back - x).abs() > 1e-10 * x.abs().max(1e-300) && (back - x).abs() > 1e-300 {
                    return Err(Error::Domain(format!("inverse gradient round trip failed at x = {x}")));
                }
                if self.sigma > self.grad_derivative(j, x) * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!("sigma exceeds l'({x})")));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form reference function of the power map, up to an additive constant.
pub fn power_reference(q: f64, x: f64) -> f64 {
    q * (1.0 + x) * x.ln_1p() - x * (q + 1.0)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
