//! Integration rules on `S^{2n-1}` and `B^{2n}`.
//!
//! The product rule on `S³` uses `u = |z₂|²` with Gauss–Legendre nodes and
//! trapezoid nodes in both phases; it is exact for monomials of total degree
//! at most `2·level`. Quasi-Monte Carlo rules map a randomly shifted Halton
//! sequence through Box–Muller and normalization.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{ball_volume, sphere_volume};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    ProductS3 { level: usize },
    Qmc { count: usize },
    BallQmc { count: usize },
    BallProduct { radial: usize, level: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub n: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
    pub seed: u64,
}

/// Nodes in the open unit ball with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRule {
    pub n: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
    pub seed: u64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut t = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 0 {
                1.0
            } else if m == 1 {
                t
            } else {
                p1
            };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (t * pm - pm1) / (t * t - 1.0);
            let dt = pm / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

pub fn product_rule_s3(level: usize) -> SphereRule {
    let level = level.max(1);
    let (gx, gw) = gauss_legendre(level);
    let m = 2 * level + 1;
    let dphi = 2.0 * PI / m as f64;
    let mut nodes = Vec::with_capacity(level * m * m);
    let mut weights = Vec::with_capacity(level * m * m);
    for (xi, wi) in gx.iter().zip(&gw) {
        let u = 0.5 * (xi + 1.0);
        let wu = 0.5 * wi;
        let (r1, r2) = ((1.0 - u).sqrt(), u.sqrt());
        for j in 0..m {
            let (s1, c1) = (j as f64 * dphi).sin_cos();
            for k in 0..m {
                let (s2, c2) = (k as f64 * dphi).sin_cos();
                nodes.push(vec![r1 * c1, r1 * s1, r2 * c2, r2 * s2]);
                weights.push(wu * 0.5 * dphi * dphi);
            }
        }
    }
    SphereRule { n: 2, nodes, weights, kind: RuleKind::ProductS3 { level }, seed: 0 }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

struct ShiftedHalton {
    shift: Vec<f64>,
}

impl ShiftedHalton {
    fn new(dims: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { shift: (0..dims).map(|_| rng.random::<f64>()).collect() }
    }

    fn point(&self, i: u64) -> Vec<f64> {
        self.shift
            .iter()
            .enumerate()
            .map(|(d, s)| {
                let v = radical_inverse(i, PRIMES[d]) + s;
                v - v.floor()
            })
            .collect()
    }
}

fn gaussian_direction(u: &[f64]) -> Vec<f64> {
    let mut g = Vec::with_capacity(u.len());
    for pair in u.chunks(2) {
        let r = (-2.0 * (1.0 - pair[0]).ln()).sqrt();
        let (s, c) = (2.0 * PI * pair[1]).sin_cos();
        g.push(r * c);
        g.push(r * s);
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; g.len()];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|x| x / norm).collect()
}

pub fn qmc_rule(n: usize, count: usize, seed: u64) -> SphereRule {
    let count = count.max(1);
    let halton = ShiftedHalton::new(2 * n, seed);
    let nodes: Vec<Vec<f64>> = (1..=count as u64).map(|i| gaussian_direction(&halton.point(i))).collect();
    let w = sphere_volume(n) / count as f64;
    SphereRule { n, nodes, weights: vec![w; count], kind: RuleKind::Qmc { count }, seed }
}

pub fn ball_rule(n: usize, count: usize, seed: u64) -> BallRule {
    let count = count.max(1);
    let halton = ShiftedHalton::new(2 * n + 1, seed);
    let nodes = (1..=count as u64)
        .map(|i| {
            let u = halton.point(i);
            let dir = gaussian_direction(&u[..2 * n]);
            let r = u[2 * n].max(f64::MIN_POSITIVE).powf(1.0 / (2 * n) as f64);
            dir.iter().map(|x| x * r).collect()
        })
        .collect();
    let w = ball_volume(n) / count as f64;
    BallRule { n, nodes, weights: vec![w; count], kind: RuleKind::BallQmc { count }, seed }
}

/// Gauss radial nodes times the product rule on `S³`.
pub fn ball_product_rule(radial: usize, level: usize) -> BallRule {
    let sphere = product_rule_s3(level);
    let (gx, gw) = gauss_legendre(radial.max(1));
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (x, w) in gx.iter().zip(&gw) {
        let r = 0.5 * (x + 1.0);
        let wr = 0.5 * w * r.powi(3);
        for (node, ws) in sphere.nodes.iter().zip(&sphere.weights) {
            nodes.push(node.iter().map(|c| c * r).collect());
            weights.push(wr * ws);
        }
    }
    BallRule { n: 2, nodes, weights, kind: RuleKind::BallProduct { radial, level }, seed: 0 }
}

/// Compensated (Neumaier) sum of `w_i f_i` in the given order.
pub fn integrate(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), found: values.len() });
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (i, (v, w)) in values.iter().zip(weights).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { index: i, value: *v });
        }
        let term = v * w;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// Standard error of an equal-weight rule from the sample variance.
pub fn standard_error(values: &[f64], total_weight: f64) -> f64 {
    let m = values.len() as f64;
    if m < 2.0 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    total_weight * (var / m).sqrt()
}

fn rule_text(kind: &RuleKind, n: usize, seed: u64, nodes: &[Vec<f64>], weights: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# crvol-rule v1");
    let _ = writeln!(
        s,
        "# kind={} n={n} seed={seed} count={}",
        serde_json::to_string(kind).expect("serializable"),
        nodes.len()
    );
    for (x, w) in nodes.iter().zip(weights) {
        let _ = write!(s, "{w:.16e}");
        for c in x {
            let _ = write!(s, " {c:.16e}");
        }
        s.push('\n');
    }
    s
}

fn parse_rule_text(text: &str) -> Result<(RuleKind, usize, u64, Vec<Vec<f64>>, Vec<f64>)> {
    let bad = |m: &str| Error::InvalidInput(format!("rule text: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("# crvol-rule v1") {
        return Err(bad("missing version header"));
    }
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    let fields = header.trim_start_matches("# ");
    let mut kind = None;
    let mut n = None;
    let mut seed = None;
    // The kind is JSON and may contain spaces; split it off first.
    let rest = fields.strip_prefix("kind=").ok_or_else(|| bad("kind"))?;
    let cut = rest.find(" n=").ok_or_else(|| bad("n"))?;
    kind = kind.or(Some(serde_json::from_str::<RuleKind>(&rest[..cut]).map_err(|e| bad(&e.to_string()))?));
    for kv in rest[cut + 1..].split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(kv))?;
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad("n"))?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad("seed"))?),
            _ => {}
        }
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let vals: Vec<f64> =
            line.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(t))).collect::<Result<_>>()?;
        weights.push(vals[0]);
        nodes.push(vals[1..].to_vec());
    }
    Ok((kind.ok_or_else(|| bad("kind"))?, n.ok_or_else(|| bad("n"))?, seed.ok_or_else(|| bad("seed"))?, nodes, weights))
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self) -> String {
        match self.kind {
            RuleKind::ProductS3 { level } => format!("product-s3/L{level}"),
            RuleKind::Qmc { count } => format!("qmc/n{}/N{count}/seed{}", self.n, self.seed),
            _ => "unknown".into(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        integrate(&vec![1.0; self.len()], &self.weights).expect("finite weights")
    }

    pub fn is_equal_weight(&self) -> bool {
        matches!(self.kind, RuleKind::Qmc { .. })
    }

    /// Gather-then-sum integration of `f` over the nodes.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let values: Vec<f64> = self.nodes.iter().map(|x| f(x)).collect();
        integrate(&values, &self.weights)
    }

    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        integrate(values, &self.weights)
    }

    /// Integral together with its sampling standard error (zero for product rules).
    pub fn integrate_with_error(&self, values: &[f64]) -> Result<(f64, f64)> {
        let v = integrate(values, &self.weights)?;
        let e = if self.is_equal_weight() { standard_error(values, sphere_volume(self.n)) } else { 0.0 };
        Ok((v, e))
    }

    pub fn to_text(&self) -> String {
        rule_text(&self.kind, self.n, self.seed, &self.nodes, &self.weights)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (kind, n, seed, nodes, weights) = parse_rule_text(text)?;
        Ok(Self { n, nodes, weights, kind, seed })
    }
}

impl BallRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self) -> String {
        match self.kind {
            RuleKind::BallQmc { count } => format!("ball-qmc/n{}/N{count}/seed{}", self.n, self.seed),
            RuleKind::BallProduct { radial, level } => format!("ball-product/R{radial}/L{level}"),
            _ => "unknown".into(),
        }
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let values: Vec<f64> = self.nodes.iter().map(|x| f(x)).collect();
        integrate(&values, &self.weights)
    }

    pub fn integrate_with_error<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<(f64, f64)> {
        let values: Vec<f64> = self.nodes.iter().map(|x| f(x)).collect();
        let v = integrate(&values, &self.weights)?;
        let e = match self.kind {
            RuleKind::BallQmc { .. } => standard_error(&values, ball_volume(self.n)),
            _ => 0.0,
        };
        Ok((v, e))
    }

    pub fn to_text(&self) -> String {
        rule_text(&self.kind, self.n, self.seed, &self.nodes, &self.weights)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (kind, n, seed, nodes, weights) = parse_rule_text(text)?;
        Ok(Self { n, nodes, weights, kind, seed })
    }
}
