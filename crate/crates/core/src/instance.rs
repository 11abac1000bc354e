//! Seeded generators for random online LPs and auction streams, plus a
//! plain-text dump format for replaying request streams.

use std::fmt::Write as _;
use std::path::Path;

use rand::distr::{Bernoulli, Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal, StandardNormal};

use crate::allocation::{LpRequest, Request};
use crate::error::{Error, Result};

/// Name of the generator behind every stream, recorded in outputs.
pub const RNG_NAME: &str = "ChaCha8";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a parent seed with a child index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Seed of instance `instance` under `master`.
pub fn instance_seed(master: u64, instance: u64) -> u64 {
    derive_seed(master, instance)
}

/// Seed of the request stream for `(instance, trial)` under `master`.
pub fn trial_seed(master: u64, instance: u64, trial: u64) -> u64 {
    derive_seed(instance_seed(master, instance) ^ 0x5bd1_e995, trial)
}

/// Parameters of a random online LP: Bernoulli consumption probabilities
/// `p`, reward scale, unit correlation vector `theta` and per-period budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct LpInstanceParams {
    pub p: Vec<f64>,
    pub scale: f64,
    pub theta: Vec<f64>,
    pub rho: Vec<f64>,
    pub m: usize,
    pub d: usize,
}

impl LpInstanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(Error::InvalidParameter("m and d must be >= 1".into()));
        }
        if self.p.len() != self.m || self.theta.len() != self.m || self.rho.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: self.p.len() });
        }
        if self.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
        }
        if self.rho.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::InvalidParameter("per-period budgets must lie in (0, 1]".into()));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidParameter("reward scale must be > 0".into()));
        }
        let norm = self.theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("theta has norm {norm}, expected 1")));
        }
        Ok(())
    }
}

/// Draws `p_j, rho_j ~ U(0, 1)`, `theta ~ N(0, I)` normalized and
/// `scale ~ LogNormal(0, 2)`.
pub fn gen_lp_params(seed: u64, m: usize, d: usize) -> Result<LpInstanceParams> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("m and d must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    // rho must be positive; a zero draw (probability 2^-53) is redrawn.
    let rho: Vec<f64> = (0..m)
        .map(|_| loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                break r;
            }
        })
        .collect();
    let theta = loop {
        let raw: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = raw.iter().map(|t: &f64| t * t).sum::<f64>().sqrt();
        if norm > 0.0 {
            break raw.iter().map(|t| t / norm).collect::<Vec<f64>>();
        }
    };
    let scale = LogNormal::new(0.0, 2.0).expect("valid log-normal").sample(&mut rng);
    Ok(LpInstanceParams { p, scale, theta, rho, m, d })
}

/// A sampled request stream with the statistics used downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct LpStream {
    pub requests: Vec<Request>,
    /// Fraction of reward entries that were negative and clipped to 0.
    pub clip_rate: f64,
    /// Largest reward in the stream.
    pub max_reward: f64,
}

/// `c_{j,i} ~ Bernoulli(p_j)`, `r = scale (theta' c + delta 1)` with
/// `delta ~ N(0, 0.1^2)` shared across the `d` options; negative rewards
/// are clipped to 0.
pub fn sample_lp_requests(params: &LpInstanceParams, horizon: usize, seed: u64) -> Result<LpStream> {
    params.validate()?;
    let (m, d) = (params.m, params.d);
    let mut rng = rng_from_seed(seed);
    let bern: Vec<Bernoulli> = params
        .p
        .iter()
        .map(|&p| Bernoulli::new(p).expect("probability in [0, 1]"))
        .collect();
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let mut requests = Vec::with_capacity(horizon);
    let mut clipped = 0usize;
    let mut max_reward: f64 = 0.0;
    for _ in 0..horizon {
        let mut c = vec![0.0; m * d];
        for j in 0..m {
            for i in 0..d {
                if bern[j].sample(&mut rng) {
                    c[j * d + i] = 1.0;
                }
            }
        }
        let delta = noise.sample(&mut rng);
        let r: Vec<f64> = (0..d)
            .map(|i| {
                let corr: f64 = (0..m).map(|j| params.theta[j] * c[j * d + i]).sum();
                let v = params.scale * (corr + delta);
                if v < 0.0 {
                    clipped += 1;
                    0.0
                } else {
                    max_reward = max_reward.max(v);
                    v
                }
            })
            .collect();
        requests.push(Request::Lp(LpRequest { reward: r, consumption: c }));
    }
    let total = (horizon * d).max(1) as f64;
    Ok(LpStream { requests, clip_rate: clipped as f64 / total, max_reward })
}

/// Sampling law of auction values or competing bids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueDist {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

impl ValueDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ValueDist::Constant(v) => v >= 0.0 && v.is_finite(),
            ValueDist::Uniform { lo, hi } => lo >= 0.0 && hi >= lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid distribution {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ValueDist::Constant(v) => v,
            ValueDist::Uniform { lo, hi } if hi > lo => {
                Uniform::new(lo, hi).expect("checked bounds").sample(rng)
            }
            ValueDist::Uniform { lo, .. } => lo,
        }
    }

    /// Largest value the distribution can produce.
    pub fn upper(&self) -> f64 {
        match *self {
            ValueDist::Constant(v) => v,
            ValueDist::Uniform { hi, .. } => hi,
        }
    }
}

/// Repeated second-price auctions with i.i.d. values and competing bids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuctionInstanceParams {
    pub value: ValueDist,
    pub competing: ValueDist,
    /// Per-period budget.
    pub rho: f64,
}

impl Default for AuctionInstanceParams {
    fn default() -> Self {
        Self {
            value: ValueDist::Uniform { lo: 0.0, hi: 1.0 },
            competing: ValueDist::Uniform { lo: 0.0, hi: 1.0 },
            rho: 0.2,
        }
    }
}

pub fn gen_auction_stream(params: &AuctionInstanceParams, horizon: usize, seed: u64) -> Result<Vec<Request>> {
    params.value.validate()?;
    params.competing.validate()?;
    if !(params.rho > 0.0) {
        return Err(Error::InvalidParameter("auction budget rate must be > 0".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..horizon)
        .map(|_| {
            let v = params.value.sample(&mut rng);
            let d = params.competing.sample(&mut rng);
            Request::Auction { value: v, competing: d }
        })
        .collect())
}

/// Serializes a stream: a header line, then one request per line with the
/// flattened consumption followed by the rewards, 12 decimals each. Auction
/// lines hold the competing bid then the value.
pub fn format_dump(requests: &[Request]) -> Result<String> {
    let mut out = String::new();
    match requests.first() {
        None => out.push_str("# empty\n"),
        Some(Request::Lp(r)) => {
            let _ = writeln!(out, "# lp m={} d={} T={}", r.m(), r.d(), requests.len());
        }
        Some(Request::Auction { .. }) => {
            let _ = writeln!(out, "# auction T={}", requests.len());
        }
    }
    for req in requests {
        let fields: Vec<f64> = match req {
            Request::Lp(r) => r.consumption.iter().chain(&r.reward).copied().collect(),
            Request::Auction { value, competing } => vec![*competing, *value],
        };
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.12}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_dump(text: &str) -> Result<Vec<Request>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty dump".into()))?;
    let tokens: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    let field = |key: &str| -> Result<usize> {
        tokens
            .iter()
            .find_map(|t| t.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| Error::Parse(format!("header lacks {key}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("{key}: {e}")))
    };
    let kind = tokens.first().copied().unwrap_or("");
    let (m, d) = match kind {
        "empty" => return Ok(Vec::new()),
        "lp" => (field("m")?, field("d")?),
        "auction" => (1, 1),
        other => return Err(Error::Parse(format!("unknown dump kind '{other}'"))),
    };
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 2))))
            .collect::<Result<_>>()?;
        if vals.len() != m * d + d {
            return Err(Error::Parse(format!("line {}: expected {} fields", n + 2, m * d + d)));
        }
        out.push(if kind == "lp" {
            Request::Lp(LpRequest::new(vals[m * d..].to_vec(), vals[..m * d].to_vec())?)
        } else {
            Request::auction(vals[1], vals[0])?
        });
    }
    Ok(out)
}

pub fn write_dump(path: &Path, requests: &[Request]) -> Result<()> {
    std::fs::write(path, format_dump(requests)?)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_dump(path: &Path) -> Result<Vec<Request>> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_dump(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn params_deterministic_and_valid() {
        let a = gen_lp_params(7, 10, 5).unwrap();
        assert_eq!(a, gen_lp_params(7, 10, 5).unwrap());
        assert_ne!(a, gen_lp_params(8, 10, 5).unwrap());
        a.validate().unwrap();
    }

    #[test]
    fn probabilities_are_uniform() {
        let n = 10_000;
        let mean: f64 = (0..n).map(|s| gen_lp_params(s, 1, 1).unwrap().p[0]).sum::<f64>() / n as f64;
        assert!((0.48..=0.52).contains(&mean), "{mean}");
    }

    #[test]
    fn theta_is_unit() {
        for s in 0..200 {
            let p = gen_lp_params(s, 4, 2).unwrap();
            let n = p.theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_probability_consumes_everything() {
        let mut p = gen_lp_params(1, 3, 4).unwrap();
        p.p = vec![1.0; 3];
        let s = sample_lp_requests(&p, 20, 3).unwrap();
        for r in &s.requests {
            let Request::Lp(r) = r else { panic!() };
            assert!(r.consumption.iter().all(|c| *c == 1.0));
        }
    }

    #[test]
    fn rewards_collapse_to_first_row() {
        let params = LpInstanceParams {
            p: vec![0.5, 0.5],
            scale: 1.0,
            theta: vec![1.0, 0.0],
            rho: vec![0.5, 0.5],
            m: 2,
            d: 3,
        };
        let s = sample_lp_requests(&params, 50, 9).unwrap();
        for r in &s.requests {
            let Request::Lp(r) = r else { panic!() };
            for i in 0..3 {
                // noise is N(0, 0.01): the reward sits within 0.5 of c_{1,i}
                assert!((r.reward[i] - r.c(0, i)).abs() < 0.5);
            }
        }
    }

    #[test]
    fn streams_replay_and_respect_signs() {
        let p = gen_lp_params(3, 10, 5).unwrap();
        let a = sample_lp_requests(&p, 100, 11).unwrap();
        assert_eq!(a, sample_lp_requests(&p, 100, 11).unwrap());
        assert_ne!(a.requests, sample_lp_requests(&p, 100, 12).unwrap().requests);
        for r in &a.requests {
            let Request::Lp(r) = r else { panic!() };
            assert!(r.reward.iter().chain(&r.consumption).all(|v| *v >= 0.0));
        }
        assert!((0.0..=1.0).contains(&a.clip_rate));
    }

    #[test]
    fn seeds_are_two_layer() {
        assert_eq!(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 2, 4));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 3, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(2, 2, 3));
    }

    #[test]
    fn auction_streams() {
        let constant = AuctionInstanceParams {
            value: ValueDist::Constant(1.0),
            competing: ValueDist::Constant(0.5),
            rho: 0.3,
        };
        let s = gen_auction_stream(&constant, 5, 0).unwrap();
        assert!(s.iter().all(|r| *r == Request::Auction { value: 1.0, competing: 0.5 }));
        let p = AuctionInstanceParams::default();
        let s = gen_auction_stream(&p, 20_000, 4).unwrap();
        assert_eq!(s, gen_auction_stream(&p, 20_000, 4).unwrap());
        for bid in [0.2, 0.5, 0.8] {
            let wins = s
                .iter()
                .filter(|r| matches!(r, Request::Auction { competing, .. } if bid >= *competing))
                .count();
            assert!((wins as f64 / s.len() as f64 - bid).abs() < 0.02);
        }
    }

    #[test]
    fn dump_round_trip() {
        let p = gen_lp_params(5, 3, 2).unwrap();
        let s = sample_lp_requests(&p, 10, 1).unwrap();
        let text = format_dump(&s.requests).unwrap();
        assert!(text.lines().nth(1).unwrap().split(' ').all(|t| t.split('.').nth(1).unwrap().len() == 12));
        let back = parse_dump(&text).unwrap();
        assert_eq!(back.len(), 10);
        for (a, b) in back.iter().zip(&s.requests) {
            let (Request::Lp(a), Request::Lp(b)) = (a, b) else { panic!() };
            assert_eq!(a.consumption, b.consumption);
            for (x, y) in a.reward.iter().zip(&b.reward) {
                assert!((x - y).abs() <= 5e-13 * y.abs().max(1.0));
            }
        }
        let auctions = gen_auction_stream(&AuctionInstanceParams::default(), 4, 2).unwrap();
        assert_eq!(parse_dump(&format_dump(&auctions).unwrap()).unwrap().len(), 4);
        assert!(parse_dump("# cube\n").is_err());
    }
}
