//! Affine surface area of convex bodies in `R³` and its link to the complex
//! volume form on tube hypersurfaces `S × iR^n`.
//!
//! A body is `{G ≤ 1}` for a 1-homogeneous gauge `G`. The boundary is covered
//! by six graph charts `x_i = h(x')`, blended by a partition of unity in the
//! outward normal, and integrated on a midpoint grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alt_forms::C64;
use crate::error::{Error, Result};
use crate::hypersurface::{nu_levi_on_frame, AmbientJet};
use crate::jet::Jet2;

pub type Mat3 = [[f64; 3]; 3];

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &Mat3) -> Mat3 {
    let d = det3(m);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    out
}

pub fn mat_mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// 1-homogeneous convex gauge of a body containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Gauge {
    Ball,
    /// `sqrt(xᵀ A x)`.
    Ellipsoid {
        matrix: Mat3,
    },
    /// `|x| + ε b(x)/|x|³` with `b` a quartic form.
    PerturbedBall {
        epsilon: f64,
        quartic: Vec<([u8; 3], f64)>,
    },
    /// Image of `inner` under `x ↦ T x`.
    Linear {
        inner: Box<Gauge>,
        map: Mat3,
    },
}

fn norm_jet(x: &[Jet2]) -> Jet2 {
    x.iter().skip(1).fold(x[0] * x[0], |acc, &c| acc + c * c).sqrt()
}

fn monomial_jet(x: &[Jet2], e: &[u8; 3]) -> Jet2 {
    let mut acc = Jet2::constant(x[0].dim(), 1.0);
    for (k, &p) in e.iter().enumerate() {
        for _ in 0..p {
            acc = acc * x[k];
        }
    }
    acc
}

impl Gauge {
    pub fn jet(&self, x: &[Jet2]) -> Jet2 {
        match self {
            Gauge::Ball => norm_jet(x),
            Gauge::Ellipsoid { matrix } => {
                let mut acc = Jet2::constant(x[0].dim(), 0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        acc = acc + x[i] * x[j] * matrix[i][j];
                    }
                }
                acc.sqrt()
            }
            Gauge::PerturbedBall { epsilon, quartic } => {
                let r = norm_jet(x);
                let mut b = Jet2::constant(x[0].dim(), 0.0);
                for (e, c) in quartic {
                    b = b + monomial_jet(x, e) * *c;
                }
                r + b * r.powf(-3.0) * *epsilon
            }
            Gauge::Linear { inner, map } => {
                let t = inv3(map);
                let y: Vec<Jet2> = (0..3)
                    .map(|k| (0..3).fold(Jet2::constant(x[0].dim(), 0.0), |acc, j| acc + x[j] * t[k][j]))
                    .collect();
                inner.jet(&y)
            }
        }
    }

    pub fn value(&self, x: &[f64; 3]) -> f64 {
        match self {
            Gauge::Ball => (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt(),
            Gauge::Ellipsoid { matrix } => {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        acc += x[i] * x[j] * matrix[i][j];
                    }
                }
                acc.sqrt()
            }
            Gauge::PerturbedBall { epsilon, quartic } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let b: f64 = quartic
                    .iter()
                    .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
                    .sum();
                r + epsilon * b / (r * r * r)
            }
            Gauge::Linear { inner, map } => {
                let t = inv3(map);
                let y = [0, 1, 2].map(|k| (0..3).map(|j| t[k][j] * x[j]).sum::<f64>());
                inner.value(&y)
            }
        }
    }

    pub fn transformed(&self, map: Mat3) -> Gauge {
        Gauge::Linear { inner: Box::new(self.clone()), map }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    pub id: String,
    pub gauge: Gauge,
}

impl ConvexBody {
    pub fn ball() -> Self {
        Self { id: "ball".into(), gauge: Gauge::Ball }
    }

    pub fn ellipsoid(id: &str, matrix: Mat3) -> Self {
        Self { id: id.into(), gauge: Gauge::Ellipsoid { matrix } }
    }

    /// Ball perturbed by a seeded quartic bump of size `epsilon`.
    pub fn perturbed_ball(seed: u64, epsilon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut quartic = Vec::new();
        for a in 0..=4u8 {
            for b in 0..=(4 - a) {
                let c = 4 - a - b;
                quartic.push(([a, b, c], rng.random_range(-1.0..1.0)));
            }
        }
        let scale: f64 = quartic.iter().map(|(_, c): &([u8; 3], f64)| c.abs()).sum();
        for (_, c) in quartic.iter_mut() {
            *c *= 1.0 / scale;
        }
        Self { id: format!("perturbed/seed{seed}/eps{epsilon}"), gauge: Gauge::PerturbedBall { epsilon, quartic } }
    }

    pub fn transformed(&self, map: Mat3) -> Self {
        Self { id: format!("{}/linear", self.id), gauge: self.gauge.transformed(map) }
    }

    /// Largest `|x_k|` on the boundary for each axis, by direction sampling.
    pub fn extents(&self) -> [f64; 3] {
        let m = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut best = [0.0f64; 3];
        for k in 0..m {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let u = [r * phi.cos(), r * phi.sin(), z];
            let g = self.gauge.value(&u);
            for i in 0..3 {
                best[i] = best[i].max(u[i].abs() / g);
            }
        }
        best
    }
}

impl ConvexBody {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("body serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    /// Midpoint grid points per axis in each chart.
    pub resolution: usize,
    /// Normal-component cutoff of the partition of unity.
    pub cutoff: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self { resolution: 320, cutoff: 0.25 }
    }
}

fn bump(u: f64, cutoff: f64) -> f64 {
    if u <= cutoff {
        0.0
    } else {
        (-1.0 / (u - cutoff)).exp()
    }
}

fn chart_point(axis: usize, xp: [f64; 2], t: f64) -> [f64; 3] {
    let mut x = [0.0; 3];
    let mut k = 0;
    for (i, xi) in x.iter_mut().enumerate() {
        if i == axis {
            *xi = t;
        } else {
            *xi = xp[k];
            k += 1;
        }
    }
    x
}

/// Boundary point over `x'` on the `sign` side of chart `axis`.
fn chart_root(g: &Gauge, axis: usize, sign: f64, xp: [f64; 2], reach: f64) -> Option<f64> {
    let val = |t: f64| g.value(&chart_point(axis, xp, t)) - 1.0;
    let mut lo = 0.0;
    if val(0.0) >= 0.0 {
        // Golden-section minimum along the line.
        let (mut a, mut b) = (-reach, reach);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if val(c) < val(d) {
                b = d
            } else {
                a = c
            }
        }
        lo = 0.5 * (a + b);
        if val(lo) >= 0.0 {
            return None;
        }
    }
    let mut hi = sign * reach;
    let (mut flo, mut fhi) = (val(lo), val(hi));
    // Illinois regula falsi.
    let mut side = 0;
    for _ in 0..200 {
        let t = (lo * fhi - hi * flo) / (fhi - flo);
        let f = val(t);
        if f == 0.0 || (hi - lo).abs() < 4.0 * f64::EPSILON * reach {
            return Some(t);
        }
        if f < 0.0 {
            lo = t;
            flo = f;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = f;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if f.abs() < 1e-16 {
            return Some(t);
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineReport {
    pub body_id: String,
    pub a_aff: f64,
    pub vol: f64,
    pub r_aff: f64,
    /// Smallest eigenvalue of the chart second fundamental form over weighted nodes.
    pub convexity_margin: f64,
    pub worst_point: Vec<f64>,
}

/// Chart-summed affine area and volume of a body.
pub fn affine_report(body: &ConvexBody, cfg: &ChartConfig) -> Result<AffineReport> {
    let ext = body.extents().map(|e| 1.05 * e);
    let reach = 2.0 * ext.iter().cloned().fold(0.0, f64::max);
    let m = cfg.resolution;
    let mut area = Vec::new();
    let mut vol = Vec::new();
    let mut margin = (f64::INFINITY, vec![]);
    for axis in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&k| k != axis).collect();
        let (ea, eb) = (ext[others[0]], ext[others[1]]);
        // Nodes x = e·sin(πs/2) cluster toward the chart rim.
        let ds = 2.0 / m as f64;
        let nodes: Vec<(f64, f64)> = (0..m)
            .map(|p| {
                let u = -1.0 + (p as f64 + 0.5) * ds;
                let a = 0.5 * std::f64::consts::PI * u;
                (a.sin(), 0.5 * std::f64::consts::PI * a.cos() * ds)
            })
            .collect();
        for sign in [1.0, -1.0] {
            for p in 0..m {
                for q in 0..m {
                    let xp = [ea * nodes[p].0, eb * nodes[q].0];
                    let dw = ea * nodes[p].1 * eb * nodes[q].1;
                    let Some(t) = chart_root(&body.gauge, axis, sign, xp, reach) else { continue };
                    let x = chart_point(axis, xp, t);
                    let j = body.gauge.jet(&Jet2::variables(&x));
                    let gn = (0..3).map(|k| j.g[k] * j.g[k]).sum::<f64>().sqrt();
                    let normal: Vec<f64> = (0..3).map(|k| j.g[k] / gn).collect();
                    let own = bump(sign * normal[axis], cfg.cutoff);
                    if own == 0.0 {
                        continue;
                    }
                    let total: f64 = (0..3).map(|k| bump(normal[k], cfg.cutoff) + bump(-normal[k], cfg.cutoff)).sum();
                    let w = own / total;
                    let gi = j.g[axis];
                    let hd: Vec<f64> = others.iter().map(|&a| -j.g[a] / gi).collect();
                    let mut hess = [[0.0; 2]; 2];
                    for (ia, &a) in others.iter().enumerate() {
                        for (ib, &b) in others.iter().enumerate() {
                            hess[ia][ib] = -(j.h[a][b]
                                + j.h[a][axis] * hd[ib]
                                + j.h[axis][b] * hd[ia]
                                + j.h[axis][axis] * hd[ia] * hd[ib])
                                / gi;
                        }
                    }
                    // Convexity of the body: -sign·Hess h is positive definite.
                    let (a11, a12, a22) = (-sign * hess[0][0], -sign * hess[0][1], -sign * hess[1][1]);
                    let tr = a11 + a22;
                    let det = a11 * a22 - a12 * a12;
                    let lmin = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
                    if lmin < margin.0 {
                        margin = (lmin, x.to_vec());
                    }
                    if !(lmin > 0.0) {
                        return Err(Error::NotConvexAt { point: x.to_vec() });
                    }
                    area.push(w * det.powf(0.25) * dw);
                    vol.push(w / gi.abs() / 3.0 * dw);
                }
            }
        }
    }
    let a_aff = crate::quadrature::integrate(&area, &vec![1.0; area.len()])?;
    let v = crate::quadrature::integrate(&vol, &vec![1.0; vol.len()])?;
    Ok(AffineReport {
        body_id: body.id.clone(),
        a_aff,
        vol: v,
        r_aff: r_aff_from(a_aff, v),
        convexity_margin: margin.0,
        worst_point: margin.1,
    })
}

/// Largest distance between chart reconstructions of the same boundary point,
/// over seeded directions and every chart whose weight is nonzero there.
pub fn chart_overlap_residual(body: &ConvexBody, cfg: &ChartConfig, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = body.extents();
    let reach = 2.1 * ext.iter().cloned().fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let u = loop {
            let v: [f64; 3] = [0; 3].map(|_| rng.random_range(-1.0..1.0));
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 1e-3 && r <= 1.0 {
                break v.map(|c| c / r);
            }
        };
        let g = body.gauge.value(&u);
        let x = u.map(|c| c / g);
        let j = body.gauge.jet(&Jet2::variables(&x));
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                if sign * j.g[axis] <= cfg.cutoff * (0..3).map(|k| j.g[k] * j.g[k]).sum::<f64>().sqrt() {
                    continue;
                }
                let others: Vec<usize> = (0..3).filter(|&k| k != axis).collect();
                let xp = [x[others[0]], x[others[1]]];
                match chart_root(&body.gauge, axis, sign, xp, reach) {
                    Some(t) => worst = worst.max((t - x[axis]).abs()),
                    None => worst = f64::INFINITY,
                }
            }
        }
    }
    worst
}

/// `A / Vol^{(n-1)/(n+1)}` for `n = 3`.
pub fn r_aff_from(a: f64, vol: f64) -> f64 {
    a / vol.sqrt()
}

pub fn affine_area(body: &ConvexBody, cfg: &ChartConfig) -> Result<f64> {
    Ok(affine_report(body, cfg)?.a_aff)
}

pub fn euclid_volume(body: &ConvexBody, cfg: &ChartConfig) -> Result<f64> {
    Ok(affine_report(body, cfg)?.vol)
}

pub fn r_aff(body: &ConvexBody, cfg: &ChartConfig) -> Result<f64> {
    Ok(affine_report(body, cfg)?.r_aff)
}

/// `|A_aff(T·K) - A_aff(K)| / A_aff(K)` for unimodular `T`.
pub fn sl_invariance_check(body: &ConvexBody, map: Mat3, cfg: &ChartConfig) -> Result<f64> {
    let d = det3(&map);
    if (d - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnimodular { det: d });
    }
    let a0 = affine_area(body, cfg)?;
    let a1 = affine_area(&body.transformed(map), cfg)?;
    Ok((a1 - a0).abs() / a0)
}

/// Random `T ∈ SL(3)` with condition number at most `max_cond`.
pub fn random_unimodular(seed: u64, max_cond: f64) -> Mat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = |rng: &mut ChaCha8Rng| -> Mat3 {
        let mut q: Vec<[f64; 3]> = Vec::new();
        while q.len() < 3 {
            let mut v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            for u in &q {
                let d: f64 = (0..3).map(|k| v[k] * u[k]).sum();
                for k in 0..3 {
                    v[k] -= d * u[k];
                }
            }
            let n = (0..3).map(|k| v[k] * v[k]).sum::<f64>().sqrt();
            if n > 1e-3 {
                q.push([v[0] / n, v[1] / n, v[2] / n]);
            }
        }
        let mut m = [q[0], q[1], q[2]];
        if det3(&m) < 0.0 {
            m[2] = [-m[2][0], -m[2][1], -m[2][2]];
        }
        m
    };
    let (u, v) = (rotation(&mut rng), rotation(&mut rng));
    let a = rng.random_range(1.0..max_cond.sqrt());
    let b = rng.random_range(1.0 / max_cond.sqrt()..1.0);
    let s = [a, b, 1.0 / (a * b)];
    let mut d = [[0.0; 3]; 3];
    for k in 0..3 {
        d[k][k] = s[k];
    }
    mat_mul3(&mat_mul3(&u, &d), &v)
}

/// Convex polynomial graph `x_n = f(x')` over a disk in `R^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexGraph {
    pub dim: usize,
    pub terms: Vec<(Vec<u8>, f64)>,
    pub radius: f64,
}

impl ConvexGraph {
    /// `½|x|²`.
    pub fn paraboloid(dim: usize) -> Self {
        Self::quadratic(&vec![1.0; dim])
    }

    /// `½ Σ λ_i x_i²`.
    pub fn quadratic(lambdas: &[f64]) -> Self {
        let dim = lambdas.len();
        let terms = (0..dim)
            .map(|i| {
                let mut e = vec![0u8; dim];
                e[i] = 2;
                (e, 0.5 * lambdas[i])
            })
            .collect();
        Self { dim, terms, radius: 1.0 }
    }

    /// Positive-definite quadratic plus a small seeded quartic.
    pub fn random_quartic(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Self::quadratic(&(0..dim).map(|_| rng.random_range(0.5..2.0)).collect::<Vec<_>>());
        for d in 3..=4u8 {
            for e in crate::harmonics::compositions(dim, d as usize) {
                g.terms.push((e, 0.05 * rng.random_range(-1.0..1.0)));
            }
        }
        g
    }

    pub fn jet(&self, x: &[f64]) -> Jet2 {
        let v = Jet2::variables(x);
        let mut acc = Jet2::constant(x.len(), 0.0);
        for (e, c) in &self.terms {
            let mut m = Jet2::constant(x.len(), *c);
            for (k, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    m = m * v[k];
                }
            }
            acc = acc + m;
        }
        acc
    }
}

fn det_real(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    let mut a: Vec<C64> = m.iter().flat_map(|r| r.iter().map(|&x| C64::new(x, 0.0))).collect();
    crate::alt_forms::det_complex(&mut a, k).re
}

fn min_eigen(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    let mat = nalgebra::DMatrix::from_fn(k, k, |i, j| m[i][j]);
    mat.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `det(D² f)^{1/(n+1)}` against `dx_1 … dx_{n-1}`.
pub fn affine_density(g: &ConvexGraph, x: &[f64]) -> Result<f64> {
    let h = g.jet(x).hessian();
    if !(min_eigen(&h) > 0.0) {
        return Err(Error::NotConvexAt { point: x.to_vec() });
    }
    Ok(det_real(&h).powf(1.0 / (g.dim as f64 + 2.0)))
}

/// `ν = κ_n · affine density · dy` on `S × iR^n`, with `κ_n = 2^{-(n-1)/(n+1)}`.
pub fn cylinder_constant(n: usize) -> f64 {
    2f64.powf(-((n - 1) as f64) / (n as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderCheck {
    pub nu: f64,
    pub affine: f64,
    pub gap: f64,
    /// Largest `|Im F_{a b̄}|`, which vanishes for `y`-independent `F`.
    pub mixed_block: f64,
}

/// Complex `ν` of `M = S × iR^n` against `dx' dy` compared with the affine density of `S`.
pub fn cylinder_compatibility(g: &ConvexGraph, x: &[f64]) -> Result<CylinderCheck> {
    let n = g.dim + 1;
    let d = 2 * n;
    let fj = g.jet(x);
    let (fg, fh) = (fj.gradient(), fj.hessian());
    let mut point = vec![0.0; d];
    for a in 0..g.dim {
        point[2 * a] = x[a];
    }
    point[2 * (n - 1)] = fj.v;
    // F = f(x') - x_n, negative on the convex side.
    let mut grad = vec![0.0; d];
    let mut hess = vec![vec![0.0; d]; d];
    for a in 0..g.dim {
        grad[2 * a] = fg[a];
        for b in 0..g.dim {
            hess[2 * a][2 * b] = fh[a][b];
        }
    }
    grad[2 * (n - 1)] = -1.0;
    let jet = AmbientJet::from_real(point, 0.0, grad.clone(), hess);
    let mixed_block = jet.hessian_complex.iter().flatten().map(|c| c.im.abs()).fold(0.0, f64::max);
    let mut frame = Vec::new();
    for a in 0..g.dim {
        let mut e = vec![0.0; d];
        e[2 * a] = 1.0;
        e[2 * (n - 1)] = fg[a];
        frame.push(e);
    }
    for b in 0..n {
        let mut e = vec![0.0; d];
        e[2 * b + 1] = 1.0;
        frame.push(e);
    }
    let nu = nu_levi_on_frame(&jet, &grad, &frame)?.abs();
    let affine = affine_density(g, x)?;
    let gap = (nu / cylinder_constant(n) - affine).abs() / affine;
    Ok(CylinderCheck { nu, affine, gap, mixed_block })
}

impl AffineReport {
    pub fn csv_header() -> &'static str {
        "body_id,A_aff,Vol,R_aff\n"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.12e},{:.12e},{:.12e}\n", self.body_id, self.a_aff, self.vol, self.r_aff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn coarse() -> ChartConfig {
        ChartConfig { resolution: 80, cutoff: 0.25 }
    }

    #[test]
    fn unit_ball() {
        let r = affine_report(&ConvexBody::ball(), &ChartConfig::default()).unwrap();
        assert!((r.a_aff - 4.0 * PI).abs() < 1e-6 * 4.0 * PI, "{r:?}");
        assert!((r.vol - 4.0 * PI / 3.0).abs() < 1e-6, "{r:?}");
        assert!((r.r_aff - 4.0 * PI / (4.0 * PI / 3.0f64).sqrt()).abs() < 1e-5);
        assert!(r.convexity_margin >= 1.0 && r.convexity_margin < 1.01);
    }

    #[test]
    fn ellipsoid_closed_form() {
        // Semi-axes a, b, c: A_aff = 4π (abc)^{1/2}, Vol = 4π abc / 3.
        let (a, b, c): (f64, f64, f64) = (1.5, 0.8, 1.1);
        let m = [[1.0 / (a * a), 0.0, 0.0], [0.0, 1.0 / (b * b), 0.0], [0.0, 0.0, 1.0 / (c * c)]];
        let r = affine_report(&ConvexBody::ellipsoid("e", m), &ChartConfig::default()).unwrap();
        assert!((r.a_aff / (4.0 * PI * (a * b * c).sqrt()) - 1.0).abs() < 1e-6, "{r:?}");
        assert!((r.vol / (4.0 * PI * a * b * c / 3.0) - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn perturbation_lowers_ratio() {
        let cfg = ChartConfig { resolution: 160, cutoff: 0.25 };
        let ball = r_aff(&ConvexBody::ball(), &cfg).unwrap();
        let r = r_aff(&ConvexBody::perturbed_ball(2, 0.05), &cfg).unwrap();
        assert!(r < ball * (1.0 - 1e-6), "{r} {ball}");
    }

    #[test]
    fn sl_invariance_single() {
        let t = random_unimodular(11, 5.0);
        let dev = sl_invariance_check(&ConvexBody::ball(), t, &ChartConfig::default()).unwrap();
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn overlaps_consistent() {
        let cfg = ChartConfig::default();
        let body = ConvexBody::perturbed_ball(0, 0.1).transformed(random_unimodular(1, 5.0));
        assert!(chart_overlap_residual(&body, &cfg, 200, 5) < 1e-8);
    }

    #[test]
    fn body_json_roundtrip() {
        let body = ConvexBody::perturbed_ball(3, 0.02).transformed(random_unimodular(2, 3.0));
        let back = ConvexBody::from_json(&body.to_json()).unwrap();
        assert_eq!(back, body);
        let x = [0.3, -0.2, 0.5];
        assert_eq!(back.gauge.value(&x), body.gauge.value(&x));
    }

    #[test]
    fn unimodularity_required() {
        let m = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(sl_invariance_check(&ConvexBody::ball(), m, &coarse()), Err(Error::NotUnimodular { .. })));
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(sl_invariance_check(&ConvexBody::ball(), id, &coarse()).unwrap() < 1e-14);
    }

    #[test]
    fn random_unimodular_is_special() {
        for s in 0..10 {
            let t = random_unimodular(s, 5.0);
            assert!((det3(&t) - 1.0).abs() < 1e-12);
            let p = mat_mul3(&t, &inv3(&t));
            for i in 0..3 {
                for j in 0..3 {
                    assert!((p[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn affine_density_examples() {
        assert!((affine_density(&ConvexGraph::paraboloid(2), &[0.3, -0.2]).unwrap() - 1.0).abs() < 1e-14);
        let l = [2.0, 3.0];
        let d = affine_density(&ConvexGraph::quadratic(&l), &[0.1, 0.4]).unwrap();
        assert!((d - 6f64.powf(0.25)).abs() < 1e-14);
        let concave = ConvexGraph::quadratic(&[-1.0, 1.0]);
        assert!(matches!(affine_density(&concave, &[0.0, 0.0]), Err(Error::NotConvexAt { .. })));
    }

    #[test]
    fn cylinder_paraboloid() {
        let c = cylinder_compatibility(&ConvexGraph::paraboloid(2), &[0.2, 0.1]).unwrap();
        assert!(c.gap < 1e-8, "{c:?}");
        assert!((c.nu - 2f64.powf(-0.5)).abs() < 1e-12);
        assert_eq!(c.mixed_block, 0.0);
    }

    #[test]
    fn cylinder_random_quartics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in 0..4 {
            let g = ConvexGraph::random_quartic(2, s);
            for _ in 0..5 {
                let x = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                let c = cylinder_compatibility(&g, &x).unwrap();
                assert!(c.gap < 1e-6, "{c:?}");
            }
        }
        let g = ConvexGraph::random_quartic(1, 3);
        assert!(cylinder_compatibility(&g, &[0.1]).unwrap().gap < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn density_matches_dense_determinant(a in 0.2f64..3.0, b in 0.2f64..3.0, c in -0.1f64..0.1, x in -0.5f64..0.5, y in -0.5f64..0.5) {
            let mut g = ConvexGraph::quadratic(&[a, b]);
            g.terms.push((vec![1, 1], c));
            g.terms.push((vec![4, 0], 0.01));
            let h = [[a + 0.12 * x * x, c], [c, b]];
            let want = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).powf(0.25);
            prop_assert!((affine_density(&g, &[x, y]).unwrap() - want).abs() < 1e-12);
        }
    }
}
