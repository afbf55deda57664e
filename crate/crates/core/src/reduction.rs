//! S¹-invariant reduction to `CP¹` for `n = 2`, and the pluriharmonic ball
//! functional.
//!
//! Integrals over `CP¹` are pulled back to `S³` through the Hopf map. With
//! `ω_FS` of total area `π` the fibres have length `2π`, so
//! `∫_{S³} u∘π dσ = 2π ∫_{CP¹} u ω_FS`. For an S¹-invariant `f` the density
//! `ω_f / ω_FS` is `1 - ½ Δ_{S³} f`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alt_forms::C64;
use crate::error::{Error, Result};
use crate::harmonics::{harmonic_basis, to_complex, Part, RealField};
use crate::hypersurface::{r_from, RadialGraph};
use crate::quadrature::{BallRule, SphereRule};

pub const FIBER_LENGTH: f64 = 2.0 * PI;

/// Radial graph on `S³` built from `h^{p,p}` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerPotential {
    pub graph: RadialGraph,
}

impl KahlerPotential {
    pub fn new(terms: Vec<RealField>) -> Result<Self> {
        for t in &terms {
            if t.poly.n != 2 || t.poly.p != t.poly.q {
                return Err(Error::InvalidInput(format!(
                    "term of bidegree ({},{}) in C^{} is not S1-invariant on S3",
                    t.poly.p, t.poly.q, t.poly.n
                )));
            }
        }
        Ok(Self { graph: RadialGraph::new(2, terms)? })
    }

    pub fn zero() -> Self {
        Self { graph: RadialGraph::sphere(2) }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { graph: self.graph.shifted(c) }
    }

    /// Seeded combination of `h^{p,p}` basis elements, `1 ≤ p ≤ max_p`,
    /// rescaled so that `sup |Δf| = 2·(1 - margin)`.
    pub fn random(seed: u64, max_p: usize, margin: f64, rule: &SphereRule) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for p in 1..=max_p {
            for e in harmonic_basis(2, p, p)?.elements {
                let part = if rng.random_bool(0.5) { Part::Re } else { Part::Im };
                terms.push(RealField::new(part, rng.random_range(-1.0..1.0), e));
            }
        }
        let raw = Self::new(terms)?;
        let lap = raw.laplacian_values(rule);
        let sup = lap.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t = if sup > 0.0 { 2.0 * (1.0 - margin) / sup } else { 1.0 };
        Ok(Self { graph: raw.graph.scaled(t) })
    }

    pub fn f(&self, xi: &[f64]) -> f64 {
        self.graph.f(xi)
    }

    /// `Δ_{S³} f` as the ambient Laplacian of the 0-homogeneous extension.
    pub fn laplacian(&self, xi: &[f64]) -> f64 {
        let j = self.graph.sphere_jet(xi);
        (0..4).map(|k| j.h[k][k]).sum()
    }

    fn laplacian_values(&self, rule: &SphereRule) -> Vec<f64> {
        rule.nodes.iter().map(|x| self.laplacian(x)).collect()
    }

    /// `ω_f / ω_FS`.
    pub fn density_ratio(&self, xi: &[f64]) -> f64 {
        1.0 - 0.5 * self.laplacian(xi)
    }

    /// Smallest `ω_f / ω_FS` over the nodes and where it occurs.
    pub fn positivity_margin(&self, rule: &SphereRule) -> (f64, usize) {
        rule.nodes.iter().enumerate().map(|(i, x)| (self.density_ratio(x), i)).fold((f64::INFINITY, 0), |a, b| {
            if b.0 < a.0 {
                b
            } else {
                a
            }
        })
    }

    fn certified_ratios(&self, rule: &SphereRule) -> Result<Vec<f64>> {
        let (margin, node) = self.positivity_margin(rule);
        if !(margin > 0.0) {
            return Err(Error::NotKahler { node, margin });
        }
        Ok(rule.nodes.iter().map(|x| self.density_ratio(x)).collect())
    }
}

fn cp1_integral(values: &[f64], rule: &SphereRule) -> Result<f64> {
    Ok(rule.integrate_values(values)? / FIBER_LENGTH)
}

/// `∫_{CP¹} ω_f^{1/3} (e^{4f} ω_FS)^{2/3}`.
pub fn reduced_a(f: &KahlerPotential, rule: &SphereRule) -> Result<f64> {
    let ratio = f.certified_ratios(rule)?;
    let vals: Vec<f64> =
        rule.nodes.iter().zip(&ratio).map(|(x, r)| r.powf(1.0 / 3.0) * (8.0 * f.f(x) / 3.0).exp()).collect();
    cp1_integral(&vals, rule)
}

/// `¼ ∫_{CP¹} e^{4f} ω_FS`.
pub fn reduced_v(f: &KahlerPotential, rule: &SphereRule) -> Result<f64> {
    f.certified_ratios(rule)?;
    let vals: Vec<f64> = rule.nodes.iter().map(|x| 0.25 * (4.0 * f.f(x)).exp()).collect();
    cp1_integral(&vals, rule)
}

/// `R(M_f)` from the lifted reduced integrals.
pub fn reduced_r(f: &KahlerPotential, rule: &SphereRule) -> Result<f64> {
    let a = FIBER_LENGTH * reduced_a(f, rule)?;
    let v = FIBER_LENGTH * reduced_v(f, rule)?;
    Ok(r_from(a, v, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    #[serde(rename = "A")]
    pub a: f64,
    pub bound: f64,
    pub slack: f64,
    /// `|∫ω_f - ∫ω_FS| / ∫ω_FS`.
    pub exactness_residual: f64,
    /// `max |ω_f/ω_FS - e^{4f}|` over the nodes.
    pub equality_residual: f64,
}

pub fn holder_bound(f: &KahlerPotential, rule: &SphereRule) -> Result<HolderBound> {
    let ratio = f.certified_ratios(rule)?;
    let a = reduced_a(f, rule)?;
    let omega_f = cp1_integral(&ratio, rule)?;
    let e4: Vec<f64> = rule.nodes.iter().map(|x| (4.0 * f.f(x)).exp()).collect();
    let weighted = cp1_integral(&e4, rule)?;
    let bound = omega_f.powf(1.0 / 3.0) * weighted.powf(2.0 / 3.0);
    let equality_residual = ratio.iter().zip(&e4).map(|(r, e)| (r - e).abs()).fold(0.0, f64::max);
    Ok(HolderBound { a, bound, slack: bound - a, exactness_residual: (omega_f - PI).abs() / PI, equality_residual })
}

/// `g = Re G` for a holomorphic polynomial `G = Σ c_α z^α` on `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluriharmonicDatum {
    pub n: usize,
    pub terms: Vec<(Vec<u8>, C64)>,
}

impl PluriharmonicDatum {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    /// `G = c z_k`.
    pub fn linear(n: usize, k: usize, c: C64) -> Self {
        let mut e = vec![0u8; n];
        e[k] = 1;
        Self { n, terms: vec![(e, c)] }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect() }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn holomorphic(&self, z: &[C64]) -> C64 {
        self.terms.iter().map(|(e, c)| e.iter().zip(z).fold(*c, |acc, (&p, zk)| acc * zk.powu(p as u32))).sum()
    }

    /// `∂G/∂z_k`.
    pub fn holomorphic_derivative(&self, z: &[C64], k: usize) -> C64 {
        self.terms
            .iter()
            .filter(|(e, _)| e[k] > 0)
            .map(|(e, c)| {
                let mut acc = *c * e[k] as f64;
                for (j, (&p, zj)) in e.iter().zip(z).enumerate() {
                    let p = if j == k { p - 1 } else { p };
                    acc *= zj.powu(p as u32);
                }
                acc
            })
            .sum()
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.holomorphic(&to_complex(x)).re
    }

    /// Real gradient `(∂_x g, ∂_y g) = (Re G_k, -Im G_k)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let z = to_complex(x);
        (0..self.n)
            .flat_map(|k| {
                let d = self.holomorphic_derivative(&z, k);
                [d.re, -d.im]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlurihFunctionals {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

/// `A = ∫_S e^{ng/(n+1)}`, `V = ∫_B e^g`, `R = A / V^{n/(n+1)}`.
pub fn plurih_functionals(d: &PluriharmonicDatum, sphere: &SphereRule, ball: &BallRule) -> Result<PlurihFunctionals> {
    if sphere.n != d.n || ball.n != d.n {
        return Err(Error::DimensionMismatch { expected: d.n, found: sphere.n.max(ball.n) });
    }
    let n = d.n as f64;
    let a = sphere.integrate(|x| (n * d.g(x) / (n + 1.0)).exp())?;
    let v = ball.integrate(|x| d.g(x).exp())?;
    Ok(PlurihFunctionals { a, v, r: a / v.powf(n / (n + 1.0)) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub max_point: Vec<f64>,
    pub max_value: f64,
    pub normal_derivative: f64,
    /// No sample away from `max_point` comes within the near-tie band of the maximum.
    pub unique: bool,
    pub generic: bool,
}

fn project(x: &mut [f64]) {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    x.iter_mut().for_each(|c| *c /= r);
}

/// Boundary maximum of `g` by dense sampling and projected gradient ascent.
pub fn genericity(d: &PluriharmonicDatum, samples: &SphereRule) -> GenericityReport {
    let vals: Vec<f64> = samples.nodes.iter().map(|x| d.g(x)).collect();
    let (mut best, mut bi) = (f64::NEG_INFINITY, 0);
    let mut lo = f64::INFINITY;
    for (i, &v) in vals.iter().enumerate() {
        if v > best {
            best = v;
            bi = i;
        }
        lo = lo.min(v);
    }
    let mut x = samples.nodes[bi].clone();
    let mut step = 0.1;
    for _ in 0..500 {
        let g = d.gradient(&x);
        let radial: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let tangential: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - radial * b).collect();
        let tn = tangential.iter().map(|c| c * c).sum::<f64>().sqrt();
        if tn < 1e-14 {
            break;
        }
        let mut y: Vec<f64> = x.iter().zip(&tangential).map(|(a, t)| a + step * t).collect();
        project(&mut y);
        if d.g(&y) > d.g(&x) {
            x = y;
            step *= 1.2;
        } else {
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
    }
    let max_value = d.g(&x);
    let g = d.gradient(&x);
    let normal_derivative: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
    let band = 1e-3 * (max_value - lo).max(f64::MIN_POSITIVE);
    let unique = max_value > lo
        && samples.nodes.iter().zip(&vals).all(|(y, &v)| {
            let dist = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v < max_value - band || dist < 0.3
        });
    GenericityReport { max_point: x, max_value, normal_derivative, unique, generic: unique && normal_derivative > 1e-6 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub k: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthScan {
    pub rows: Vec<GrowthRow>,
    pub genericity: GenericityReport,
}

impl GrowthScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,A,V,R\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", r.k, r.a, r.v, r.r));
        }
        s
    }

    /// `Δ log R / Δ log k` between consecutive rows.
    pub fn log_slopes(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[1].r.ln() - w[0].r.ln()) / ((w[1].k as f64).ln() - (w[0].k as f64).ln()))
            .collect()
    }

    pub fn strictly_increasing_from(&self, k0: usize) -> bool {
        self.rows.windows(2).filter(|w| w[0].k >= k0).all(|w| w[1].r > w[0].r)
    }
}

pub fn growth_scan(
    d: &PluriharmonicDatum,
    k_max: usize,
    sphere: &SphereRule,
    ball: &BallRule,
    samples: &SphereRule,
) -> Result<GrowthScan> {
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let f = plurih_functionals(&d.scaled(k as f64), sphere, ball)?;
        rows.push(GrowthRow { k, a: f.a, v: f.v, r: f.r });
    }
    Ok(GrowthScan { rows, genericity: genericity(d, samples) })
}
