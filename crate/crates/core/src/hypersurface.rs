//! Radial graphs `M_f = {e^{f(ξ)} ξ}` over `S^{2n-1}` and their volume
//! functionals.
//!
//! The defining function is `F(z) = |z| - e^{f(z/|z|)}`. The invariant volume
//! density is computed from the Levi density `g` of `F` and, independently,
//! from the pulled-back contact data `γ = m_f^*(I dF)` in polar form.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alt_forms::{apply_j, c_n, dz, standard_volume, AlternatingForm, FormVector, C64};
use crate::error::{Error, Result};
use crate::harmonics::{BigradedPoly, CompiledField, Monomial, Part, RealField};
use crate::jet::Jet2;
use crate::quadrature::SphereRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Levi,
    Polar,
}

#[derive(Debug, Clone)]
pub struct RadialGraph {
    pub n: usize,
    pub terms: Vec<RealField>,
    compiled: CompiledField,
}

impl PartialEq for RadialGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl RadialGraph {
    pub fn new(n: usize, terms: Vec<RealField>) -> Result<Self> {
        let compiled = CompiledField::new(n, &terms)?;
        Ok(Self { n, terms, compiled })
    }

    pub fn sphere(n: usize) -> Self {
        Self::new(n, Vec::new()).expect("empty graph")
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::sphere(n).shifted(c)
    }

    pub fn from_field(field: RealField) -> Result<Self> {
        Self::new(field.poly.n, vec![field])
    }

    pub fn with_term(&self, field: RealField) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.push(field);
        Self::new(self.n, terms)
    }

    /// `f + c`.
    pub fn shifted(&self, c: f64) -> Self {
        self.with_term(RealField::new(Part::Re, c, BigradedPoly::constant(self.n, C64::new(1.0, 0.0))))
            .expect("same dimension")
    }

    /// `t f`.
    pub fn scaled(&self, t: f64) -> Self {
        let terms = self.terms.iter().map(|f| RealField::new(f.part, f.coefficient * t, f.poly.clone())).collect();
        Self::new(self.n, terms).expect("same dimension")
    }

    /// `f + t g`.
    pub fn plus(&self, other: &RadialGraph, t: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.scaled(t).terms);
        Self::new(self.n, terms)
    }

    /// Seeded graph with one random harmonic term in each of the bidegrees
    /// (1,0), (1,1), (2,0), (2,1), (2,2), coefficients uniform in `[-amplitude, amplitude]`.
    pub fn random(n: usize, seed: u64, amplitude: f64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for (p, q) in [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)] {
            let b = crate::harmonics::harmonic_basis(n, p, q)?;
            let k = rng.random_range(0..b.elements.len());
            let part = if rng.random_bool(0.5) { Part::Re } else { Part::Im };
            terms.push(RealField::new(part, amplitude * rng.random_range(-1.0..1.0), b.elements[k].clone()));
        }
        Self::new(n, terms)
    }

    pub fn f(&self, xi: &[f64]) -> f64 {
        self.compiled.eval(xi)
    }

    /// Value, gradient and Hessian at a unit `ξ` of the 0-homogeneous extension `f(x/|x|)`.
    pub fn sphere_jet(&self, xi: &[f64]) -> Jet2 {
        let x = Jet2::variables(xi);
        let r = x.iter().fold(Jet2::constant(xi.len(), 0.0), |acc, &c| acc + c * c).sqrt();
        let u: Vec<Jet2> = x.iter().map(|&c| c / r).collect();
        if self.compiled.is_zero() {
            return Jet2::constant(xi.len(), 0.0);
        }
        let uv: Vec<f64> = u.iter().map(|j| j.v).collect();
        let (v, g, h) = self.compiled.jet(&uv);
        Jet2::lift(&u, v, &g, &h)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| TermJson {
                    part: t.part,
                    p: t.poly.p,
                    q: t.poly.q,
                    coefficient: t.coefficient,
                    monomials: t
                        .poly
                        .terms()
                        .map(|(m, c)| MonomialJson { z: m.z.clone(), zbar: m.zbar.clone(), re: c.re, im: c.im })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(g: &GraphJson) -> Result<Self> {
        let mut terms = Vec::new();
        for t in &g.terms {
            let poly = BigradedPoly::from_terms(
                g.n,
                t.p,
                t.q,
                t.monomials.iter().map(|m| (Monomial::new(m.z.clone(), m.zbar.clone()), C64::new(m.re, m.im))),
            )?;
            terms.push(RealField::new(t.part, t.coefficient, poly));
        }
        Self::new(g.n, terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialJson {
    pub z: Vec<u8>,
    pub zbar: Vec<u8>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub part: Part,
    pub p: usize,
    pub q: usize,
    pub coefficient: f64,
    pub monomials: Vec<MonomialJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub terms: Vec<TermJson>,
}

/// 2-jet of a real defining function at a point of `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientJet {
    pub point: Vec<f64>,
    pub value: f64,
    pub grad_real: Vec<f64>,
    pub hess_real: Vec<Vec<f64>>,
    pub grad_complex: Vec<C64>,
    pub hessian_complex: Vec<Vec<C64>>,
}

impl AmbientJet {
    pub fn from_real(point: Vec<f64>, value: f64, grad_real: Vec<f64>, hess_real: Vec<Vec<f64>>) -> Self {
        let n = point.len() / 2;
        let grad_complex = (0..n).map(|a| C64::new(grad_real[2 * a], -grad_real[2 * a + 1]) * 0.5).collect();
        let h = &hess_real;
        let hessian_complex = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
                        C64::new(h[xa][xb] + h[ya][yb], h[xa][yb] - h[ya][xb]) * 0.25
                    })
                    .collect()
            })
            .collect();
        Self { point, value, grad_real, hess_real, grad_complex, hessian_complex }
    }

    pub fn n(&self) -> usize {
        self.point.len() / 2
    }

    /// Jet of `hF` where `h` has value `h0`, gradient `dh` and Hessian `hh` at the point.
    pub fn multiplied(&self, h0: f64, dh: &[f64], hh: &[Vec<f64>]) -> Self {
        let d = self.point.len();
        let g: Vec<f64> = (0..d).map(|i| h0 * self.grad_real[i] + self.value * dh[i]).collect();
        let hess: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        h0 * self.hess_real[i][j]
                            + dh[i] * self.grad_real[j]
                            + self.grad_real[i] * dh[j]
                            + self.value * hh[i][j]
                    })
                    .collect()
            })
            .collect();
        Self::from_real(self.point.clone(), h0 * self.value, g, hess)
    }

    /// `∂F = Σ F_{z_a} dz_a`.
    pub fn del(&self) -> AlternatingForm {
        let n = self.n();
        let mut acc = AlternatingForm::zero(2 * n, 1).expect("valid");
        for a in 0..n {
            acc = &acc + &dz(n, a).scale(self.grad_complex[a]);
        }
        acc
    }

    /// `∂∂̄F = Σ F_{a b̄} dz_a ∧ dz̄_b`.
    pub fn del_delbar(&self) -> AlternatingForm {
        let n = self.n();
        let mut acc = AlternatingForm::zero(2 * n, 2).expect("valid");
        for a in 0..n {
            for b in 0..n {
                let term = dz(n, a).wedge(&dz(n, b).conj()).expect("valid");
                acc = &acc + &term.scale(self.hessian_complex[a][b]);
            }
        }
        acc
    }

    /// Directional derivative `dF(w)`.
    pub fn directional(&self, w: &[f64]) -> f64 {
        self.grad_real.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

fn check_unit(xi: &[f64], n: usize) -> Result<()> {
    if xi.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, found: xi.len() });
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnit { norm });
    }
    Ok(())
}

/// 2-jet of `F(z) = |z| - e^{f(z/|z|)}` at `z = e^{f(ξ)} ξ`.
pub fn defining_jet(graph: &RadialGraph, xi: &[f64]) -> Result<AmbientJet> {
    check_unit(xi, graph.n)?;
    let scale = graph.f(xi).exp();
    let point: Vec<f64> = xi.iter().map(|x| x * scale).collect();
    Ok(defining_jet_at(graph, &point))
}

/// 2-jet of the defining function at an arbitrary non-zero point.
pub fn defining_jet_at(graph: &RadialGraph, point: &[f64]) -> AmbientJet {
    let d = point.len();
    let x = Jet2::variables(point);
    let r = x.iter().fold(Jet2::constant(d, 0.0), |acc, &c| acc + c * c).sqrt();
    let u: Vec<Jet2> = x.iter().map(|&c| c / r).collect();
    let uv: Vec<f64> = u.iter().map(|j| j.v).collect();
    let (v, g, h) = graph.compiled.jet(&uv);
    let fj = if graph.compiled.is_zero() { Jet2::constant(d, 0.0) } else { Jet2::lift(&u, v, &g, &h) };
    let big_f = r - fj.exp();
    AmbientJet::from_real(point.to_vec(), big_f.v, big_f.gradient(), big_f.hessian())
}

/// Central-difference gradient and Hessian of `F`, used to gate the jet.
pub fn defining_jet_fd(graph: &RadialGraph, point: &[f64], step: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = point.len();
    let big_f = |x: &[f64]| {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let u: Vec<f64> = x.iter().map(|c| c / r).collect();
        r - graph.f(&u).exp()
    };
    let shifted = |i: usize, s: f64, j: usize, t: f64| {
        let mut y = point.to_vec();
        y[i] += s;
        y[j] += t;
        big_f(&y)
    };
    let grad = (0..d).map(|i| (shifted(i, step, i, 0.0) - shifted(i, -step, i, 0.0)) / (2.0 * step)).collect();
    let hess = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    (shifted(i, step, j, step) - shifted(i, step, j, -step) - shifted(i, -step, j, step)
                        + shifted(i, -step, j, -step))
                        / (4.0 * step * step)
                })
                .collect()
        })
        .collect();
    (grad, hess)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Levi density `g` with `i∂F∧∂̄F∧(i∂∂̄F)^{n-1} = 2^n (n-1)! g μ`.
pub fn levi_density_g(jet: &AmbientJet) -> Result<f64> {
    let n = jet.n();
    let i = C64::new(0.0, 1.0);
    let del = jet.del();
    let lead = del.wedge(&del.conj())?.scale(i);
    let levi = jet.del_delbar().scale(i).power(n - 1)?;
    let top = lead.wedge(&levi)?;
    let reference = &standard_volume(2 * n) * (2f64.powi(n as i32) * factorial(n - 1));
    Ok(crate::alt_forms::density_ratio(&top, &reference)?.re)
}

/// Eigenvalues of the Levi form on `H = ker ∂F`, divided by `|dF|`.
pub fn levi_eigenvalues(jet: &AmbientJet) -> Vec<f64> {
    let n = jet.n();
    let q: Vec<C64> = jet.grad_complex.iter().map(|c| c.conj()).collect();
    let qn = q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<C64>> = vec![q.iter().map(|c| c / qn).collect()];
    // Pivoted Gram–Schmidt over the standard basis.
    while basis.len() < n {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for a in 0..n {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[a] = C64::new(1.0, 0.0);
            for b in &basis {
                let proj: C64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| nv > *bn) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("candidate");
        basis.push(v.iter().map(|c| c / nv).collect());
    }
    let h = &basis[1..];
    let m = h.len();
    let mut l = vec![vec![C64::new(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    s += jet.hessian_complex[a][b] * h[i][a] * h[j][b].conj();
                }
            }
            l[i][j] = s;
        }
    }
    let gnorm = jet.grad_real.iter().map(|x| x * x).sum::<f64>().sqrt();
    let big = DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let (i, j) = (r % m, c % m);
        let z = l[i][j];
        match (r < m, c < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = big.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v / gnorm).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    vals.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    vals
}

/// Orthonormal frame of `T_ξ S^{2n-1}` with `J ξ` first and
/// `det[ξ, E_1, ..., E_{2n-1}] = +1`.
pub fn tangent_frame(xi: &[f64]) -> Vec<Vec<f64>> {
    let d = xi.len();
    let mut basis: Vec<Vec<f64>> = vec![xi.to_vec(), apply_j(xi)];
    while basis.len() < d {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..d {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= dot * y;
                    }
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| nv > *bn + 1e-12) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("candidate");
        basis.push(v.iter().map(|x| x / nv).collect());
    }
    let det = standard_volume(d).evaluate_real(&basis).expect("square frame").re;
    if det < 0.0 {
        let last = basis.last_mut().expect("non-empty");
        for x in last.iter_mut() {
            *x = -*x;
        }
    }
    basis.remove(0);
    basis
}

/// Jacobian at a unit `ξ` of `x ↦ e^{f(x/|x|)} x/|x|`; it kills `ξ`.
pub fn radial_map_jacobian(graph: &RadialGraph, xi: &[f64]) -> Vec<Vec<f64>> {
    let d = xi.len();
    let jet = graph.sphere_jet(xi);
    let e = jet.v.exp();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let p = if i == j { 1.0 } else { 0.0 } - xi[i] * xi[j];
                    e * (p + xi[i] * jet.g[j])
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Levi-route volume density on a (pushed-forward) tangent frame:
/// `2 g^{1/(n+1)} (dF(w))^{-1} (i_w μ)(frame)`.
pub fn nu_levi_on_frame(jet: &AmbientJet, w: &[f64], frame: &[Vec<f64>]) -> Result<f64> {
    let n = jet.n();
    let g = levi_density_g(jet)?;
    if !(g > 0.0) {
        return Err(Error::NotPseudoconvex { node: 0, value: g, t: 0.0 });
    }
    let dfw = jet.directional(w);
    let iw_mu = standard_volume(2 * n).contract(&FormVector::real(w))?;
    let vol = iw_mu.evaluate_real(frame)?.re;
    Ok(2.0 * g.powf(1.0 / (n as f64 + 1.0)) * vol / dfw)
}

/// Levi route with a caller-supplied orthonormal frame at `ξ`.
pub fn nu_levi_with_frame(graph: &RadialGraph, xi: &[f64], frame: &[Vec<f64>]) -> Result<f64> {
    let jet = defining_jet(graph, xi)?;
    let jm = radial_map_jacobian(graph, xi);
    let pushed: Vec<Vec<f64>> = frame.iter().map(|e| mat_vec(&jm, e)).collect();
    // ∂_r at the image point is the unit vector ξ.
    nu_levi_on_frame(&jet, xi, &pushed)
}

/// `γ = m_f^*(I dF)` and `dγ` as ambient forms at a unit `ξ`, from the 2-jet of `f`.
pub fn polar_contact_data(graph: &RadialGraph, xi: &[f64]) -> (AlternatingForm, AlternatingForm, f64) {
    let d = xi.len();
    let jet = graph.sphere_jet(xi);
    let (f, g, h) = (jet.v, jet.gradient(), jet.hessian());
    let e = f.exp();
    let jx = apply_j(xi);
    let jg = apply_j(&g);
    let s: f64 = g.iter().zip(&jx).map(|(a, b)| a * b).sum();
    let jm = crate::alt_forms::complex_structure(d / 2);
    let bracket: Vec<f64> = (0..d).map(|k| jx[k] + s * g[k] - jg[k]).collect();
    let gamma: Vec<f64> = bracket.iter().map(|b| -e * b).collect();
    let ds: Vec<f64> = (0..d)
        .map(|l| (0..d).map(|m| h[l][m] * jx[m]).sum::<f64>() + (0..d).map(|m| g[m] * jm[m][l]).sum::<f64>())
        .collect();
    let jh = |k: usize, l: usize| (0..d).map(|m| jm[k][m] * h[m][l]).sum::<f64>();
    let dgamma_kl =
        |l: usize, k: usize| -> f64 { -g[l] * e * bracket[k] - e * (jm[k][l] + ds[l] * g[k] + s * h[k][l] - jh(k, l)) };
    let mut dg = AlternatingForm::zero(d, 2).expect("valid");
    for l in 0..d {
        for k in l + 1..d {
            dg.set(&[l, k], C64::new(dgamma_kl(l, k) - dgamma_kl(k, l), 0.0)).expect("valid");
        }
    }
    (AlternatingForm::real_one_form(&gamma), dg, f)
}

fn nu_polar_with_frame(graph: &RadialGraph, xi: &[f64], frame: &[Vec<f64>]) -> Result<f64> {
    let n = graph.n;
    let (gamma, dgamma, f) = polar_contact_data(graph, xi);
    let top = gamma.wedge(&dgamma.power(n - 1)?)?;
    let nu2 = top.evaluate_real(frame)?.re.abs() / (2f64.powi(n as i32 - 1) * factorial(n - 1));
    let nu1 = ((2 * n - 1) as f64 * f).exp();
    let k = 1.0 / (n as f64 + 1.0);
    Ok(nu2.powf(k) * nu1.powf(n as f64 * k))
}

/// Density of `m_f^* ν` against the round volume at `ξ`.
pub fn nu_density(graph: &RadialGraph, xi: &[f64], route: Route) -> Result<f64> {
    check_unit(xi, graph.n)?;
    let frame = tangent_frame(xi);
    match route {
        Route::Levi => nu_levi_with_frame(graph, xi, &frame),
        Route::Polar => nu_polar_with_frame(graph, xi, &frame),
    }
}

/// Both routes at `ξ`; disagreement beyond `1e-6` relative is an error.
pub fn nu_density_checked(graph: &RadialGraph, xi: &[f64]) -> Result<(f64, f64)> {
    let levi = nu_density(graph, xi, Route::Levi)?;
    let polar = nu_density(graph, xi, Route::Polar)?;
    if (levi - polar).abs() > 1e-6 * levi.abs() {
        return Err(Error::RouteMismatch { levi, polar });
    }
    Ok((levi, polar))
}

fn tag_node(err: Error, node: usize) -> Error {
    match err {
        Error::NotPseudoconvex { value, t, .. } => Error::NotPseudoconvex { node, value, t },
        e => e,
    }
}

pub fn nu_values(graph: &RadialGraph, rule: &SphereRule, route: Route) -> Result<Vec<f64>> {
    rule.nodes.iter().enumerate().map(|(i, x)| nu_density(graph, x, route).map_err(|e| tag_node(e, i))).collect()
}

pub fn functional_a_route(graph: &RadialGraph, rule: &SphereRule, route: Route) -> Result<f64> {
    rule.integrate_values(&nu_values(graph, rule, route)?)
}

pub fn functional_a(graph: &RadialGraph, rule: &SphereRule) -> Result<f64> {
    functional_a_route(graph, rule, Route::Levi)
}

pub fn functional_v(graph: &RadialGraph, rule: &SphereRule) -> Result<f64> {
    let n = graph.n as f64;
    Ok(rule.integrate(|x| (2.0 * n * graph.f(x)).exp())? / (2.0 * n))
}

pub fn r_from(a: f64, v: f64, n: usize) -> f64 {
    a / v.powf(n as f64 / (n as f64 + 1.0))
}

pub fn functional_r(graph: &RadialGraph, rule: &SphereRule) -> Result<f64> {
    Ok(r_from(functional_a(graph, rule)?, functional_v(graph, rule)?, graph.n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoconvexityReport {
    pub min_eigenvalue: f64,
    pub worst_node: usize,
    pub worst_point: Vec<f64>,
    pub certified: bool,
}

pub fn pseudoconvexity_check(graph: &RadialGraph, rule: &SphereRule) -> PseudoconvexityReport {
    let mut worst = (f64::INFINITY, 0usize);
    for (i, x) in rule.nodes.iter().enumerate() {
        let m = match defining_jet(graph, x) {
            Ok(jet) => levi_eigenvalues(&jet).first().copied().unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        };
        let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
        if m < worst.0 {
            worst = (m, i);
        }
    }
    PseudoconvexityReport {
        min_eigenvalue: worst.0,
        worst_node: worst.1,
        worst_point: rule.nodes.get(worst.1).cloned().unwrap_or_default(),
        certified: worst.0 > 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub min_levi_eig: f64,
    pub route_gap: f64,
    pub rule_id: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
}

/// A, V, R with the pseudoconvexity margin and the largest relative route gap.
pub fn functional_report(
    graph: &RadialGraph,
    rule: &SphereRule,
    config: BTreeMap<String, String>,
) -> Result<FunctionalReport> {
    let pc = pseudoconvexity_check(graph, rule);
    if !pc.certified {
        return Err(Error::NotPseudoconvex { node: pc.worst_node, value: pc.min_eigenvalue, t: 0.0 });
    }
    let levi = nu_values(graph, rule, Route::Levi)?;
    let polar = nu_values(graph, rule, Route::Polar)?;
    let gap = levi.iter().zip(&polar).map(|(a, b)| (a - b).abs() / a.abs()).fold(0.0, f64::max);
    let a = rule.integrate_values(&levi)?;
    let v = functional_v(graph, rule)?;
    Ok(FunctionalReport {
        a,
        v,
        r: r_from(a, v, graph.n),
        min_levi_eig: pc.min_eigenvalue,
        route_gap: gap,
        rule_id: rule.id(),
        seed: rule.seed,
        config,
    })
}

/// `c_{n-1}` re-exported for the factorization code.
pub fn c_nm1(n: usize) -> C64 {
    c_n(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::harmonic_basis;
    use crate::quadrature::{product_rule_s3, qmc_rule};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / r).collect()
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> RadialGraph {
        let mut terms = Vec::new();
        for (p, q) in [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)] {
            let b = harmonic_basis(n, p, q).unwrap();
            let k = rng.random_range(0..b.elements.len());
            let part = if rng.random_bool(0.5) { Part::Re } else { Part::Im };
            terms.push(RealField::new(part, amp * rng.random_range(-1.0..1.0), b.elements[k].clone()));
        }
        RadialGraph::new(n, terms).unwrap()
    }

    // Bordered determinant form of the Levi density.
    fn bordered_g(jet: &AmbientJet) -> f64 {
        let n = jet.n();
        let mut m = vec![C64::new(0.0, 0.0); (n + 1) * (n + 1)];
        for a in 0..n {
            m[a + 1] = jet.grad_complex[a].conj();
            m[(a + 1) * (n + 1)] = jet.grad_complex[a];
            for b in 0..n {
                m[(a + 1) * (n + 1) + b + 1] = jet.hessian_complex[a][b];
            }
        }
        -crate::alt_forms::det_complex(&mut m, n + 1).re
    }

    #[test]
    fn sphere_jet_basics() {
        for n in [2, 3] {
            let g = RadialGraph::sphere(n);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let xi = random_unit(&mut rng, n);
            let jet = defining_jet(&g, &xi).unwrap();
            assert!(jet.value.abs() < 1e-14);
            for a in 0..n {
                let expected = C64::new(xi[2 * a], -xi[2 * a + 1]) * 0.5;
                assert!((jet.grad_complex[a] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn levi_density_of_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xi = random_unit(&mut rng, 2);
        let g = levi_density_g(&defining_jet(&RadialGraph::sphere(2), &xi).unwrap()).unwrap();
        assert!((g - 0.125).abs() < 1e-14);
        let xi = random_unit(&mut rng, 3);
        let g = levi_density_g(&defining_jet(&RadialGraph::sphere(3), &xi).unwrap()).unwrap();
        assert!((g - 1.0 / 16.0).abs() < 1e-14);
        // Sphere of radius κ: g scales like κ^{-(n-1)}.
        let kappa: f64 = 1.7;
        let gk = levi_density_g(&defining_jet(&RadialGraph::constant(3, kappa.ln()), &xi).unwrap()).unwrap();
        assert!((gk - kappa.powi(-2) / 16.0).abs() < 1e-14);
    }

    #[test]
    fn flat_model_is_levi_degenerate() {
        let n = 2;
        let mut grad = vec![0.0; 4];
        grad[2] = 1.0;
        let jet = AmbientJet::from_real(vec![0.0; 4], 0.0, grad, vec![vec![0.0; 4]; 4]);
        assert_eq!(levi_density_g(&jet).unwrap(), 0.0);
        assert!(matches!(
            nu_levi_on_frame(&jet, &[0.0, 0.0, 1.0, 0.0], &tangent_frame(&[0.0, 0.0, 1.0, 0.0])),
            Err(Error::NotPseudoconvex { .. })
        ));
        let _ = n;
    }

    #[test]
    fn levi_density_matches_bordered_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3] {
            for _ in 0..10 {
                let g = random_graph(&mut rng, n, 0.1);
                let xi = random_unit(&mut rng, n);
                let jet = defining_jet(&g, &xi).unwrap();
                let a = levi_density_g(&jet).unwrap();
                let b = bordered_g(&jet);
                assert!((a - b).abs() < 1e-12 * a.abs(), "{a} {b}");
            }
        }
    }

    #[test]
    fn jet_passes_fd_gate_and_radial_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2, 3] {
            for _ in 0..5 {
                let g = random_graph(&mut rng, n, 0.2);
                let xi = random_unit(&mut rng, n);
                let jet = defining_jet(&g, &xi).unwrap();
                assert!(jet.value.abs() < 1e-12);
                let (fg, fh) = defining_jet_fd(&g, &jet.point, 1e-5);
                for i in 0..2 * n {
                    assert!((fg[i] - jet.grad_real[i]).abs() < 1e-6 * (1.0 + fg[i].abs()));
                    for j in 0..2 * n {
                        assert!((fh[i][j] - jet.hess_real[i][j]).abs() < 1e-6 * (1.0 + fh[i][j].abs()) * 10.0);
                        assert!(
                            (jet.hessian_complex[i / 2][j / 2] - jet.hessian_complex[j / 2][i / 2].conj()).norm()
                                < 1e-12
                        );
                    }
                }
                assert!((jet.directional(&xi) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_sphere_density_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [2, 3] {
            for _ in 0..5 {
                let xi = random_unit(&mut rng, n);
                for route in [Route::Levi, Route::Polar] {
                    let v = nu_density(&RadialGraph::sphere(n), &xi, route).unwrap();
                    assert!((v - 1.0).abs() < 1e-13, "{route:?} {v}");
                }
                let c = 0.3;
                let v = nu_density(&RadialGraph::constant(n, c), &xi, Route::Levi).unwrap();
                let expected = (2.0 * (n * n) as f64 / (n as f64 + 1.0) * c).exp();
                assert!((v - expected).abs() < 1e-12 * expected);
            }
        }
    }

    #[test]
    fn routes_agree_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in [2, 3] {
            for _ in 0..8 {
                let g = random_graph(&mut rng, n, 0.15);
                for _ in 0..10 {
                    let xi = random_unit(&mut rng, n);
                    nu_density_checked(&g, &xi).unwrap();
                }
            }
        }
    }

    #[test]
    fn frame_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let g = random_graph(&mut rng, 3, 0.15);
        let xi = random_unit(&mut rng, 3);
        let frame = tangent_frame(&xi);
        let base = nu_levi_with_frame(&g, &xi, &frame).unwrap();
        for _ in 0..5 {
            // Random rotation of the frame by an orthogonal matrix with det +1.
            let m = frame.len();
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let qr = a.qr();
            let mut q = qr.q();
            if q.determinant() < 0.0 {
                for r in 0..m {
                    q[(r, 0)] = -q[(r, 0)];
                }
            }
            let rotated: Vec<Vec<f64>> =
                (0..m).map(|c| (0..2 * 3).map(|k| (0..m).map(|j| frame[j][k] * q[(j, c)]).sum()).collect()).collect();
            let v = nu_levi_with_frame(&g, &xi, &rotated).unwrap();
            assert!((v - base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn tangent_frame_is_oriented_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for n in [2, 3] {
            for _ in 0..20 {
                let xi = random_unit(&mut rng, n);
                let f = tangent_frame(&xi);
                assert_eq!(f.len(), 2 * n - 1);
                let mut all = vec![xi.clone()];
                all.extend(f.iter().cloned());
                for i in 0..all.len() {
                    for j in 0..all.len() {
                        let d: f64 = all[i].iter().zip(&all[j]).map(|(a, b)| a * b).sum();
                        assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
                    }
                }
                assert!((standard_volume(2 * n).evaluate_real(&all).unwrap().re - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rescaled_defining_function_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = random_graph(&mut rng, 2, 0.15);
        let xi = random_unit(&mut rng, 2);
        let jet = defining_jet(&g, &xi).unwrap();
        let jm = radial_map_jacobian(&g, &xi);
        let pushed: Vec<Vec<f64>> = tangent_frame(&xi).iter().map(|e| mat_vec(&jm, e)).collect();
        let base = nu_levi_on_frame(&jet, &xi, &pushed).unwrap();
        for _ in 0..10 {
            // h = 1 + F k with k random: on M, h = 1 and dh = k dF.
            let k0 = rng.random_range(-2.0..2.0);
            let dk: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dh: Vec<f64> = jet.grad_real.iter().map(|g| k0 * g).collect();
            let hh: Vec<Vec<f64>> = (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| k0 * jet.hess_real[i][j] + dk[i] * jet.grad_real[j] + jet.grad_real[i] * dk[j])
                        .collect()
                })
                .collect();
            let sub = jet.multiplied(1.0, &dh, &hh);
            let w: Vec<f64> = (0..4).map(|i| xi[i] + 0.5 * rng.random_range(-1.0..1.0)).collect();
            let v = nu_levi_on_frame(&sub, &w, &pushed).unwrap();
            assert!((v - base).abs() < 1e-8 * base, "{v} {base}");
        }
    }

    #[test]
    fn graph_formula_at_critical_point() {
        // f = c(|z1|² - |z2|²) has df = 0 at ξ = e1; M is locally x1 = ρ(y1, z2).
        for n in [2, 3] {
            let c = 0.12;
            let mut z = vec![0u8; n];
            z[0] = 1;
            let mut w = vec![0u8; n];
            w[1] = 1;
            let p = BigradedPoly::monomial(n, &z, &z, C64::new(1.0, 0.0))
                .unwrap()
                .try_add(&BigradedPoly::monomial(n, &w, &w, C64::new(-1.0, 0.0)).unwrap())
                .unwrap();
            let g = RadialGraph::new(n, vec![RealField::new(Part::Re, c, p)]).unwrap();
            let mut xi = vec![0.0; 2 * n];
            xi[0] = 1.0;
            let jet = defining_jet(&g, &xi).unwrap();
            let fx = jet.grad_real[0];
            for i in 1..2 * n {
                assert!(jet.grad_real[i].abs() < 1e-14);
            }
            // ρ's Hessian in the complex directions z2..zn from the implicit function theorem.
            let m = n - 1;
            let mut cm = vec![C64::new(0.0, 0.0); m * m];
            for a in 0..m {
                for b in 0..m {
                    let (xa, ya, xb, yb) = (2 * a + 2, 2 * a + 3, 2 * b + 2, 2 * b + 3);
                    let h = |i: usize, j: usize| -jet.hess_real[i][j] / fx;
                    cm[a * m + b] = C64::new(h(xa, xb) + h(ya, yb), h(xa, yb) - h(ya, xb)) * 0.25;
                }
            }
            let jdet = crate::alt_forms::det_complex(&mut cm, m).re.abs();
            let f0 = g.f(&xi);
            let nu = nu_density(&g, &xi, Route::Levi).unwrap() * (-((2 * n - 1) as f64) * f0).exp();
            let predicted = (2f64.powi(n as i32 - 1) * jdet).powf(1.0 / (n as f64 + 1.0));
            assert!((nu - predicted).abs() < 1e-8 * predicted, "n={n}: {nu} vs {predicted}");
            // The bare J^{1/(n+1)} differs by 2^{(n-1)/(n+1)}.
            let bare = jdet.powf(1.0 / (n as f64 + 1.0));
            assert!((predicted / bare - 2f64.powf((n as f64 - 1.0) / (n as f64 + 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_functionals() {
        let rule = product_rule_s3(8);
        let s = RadialGraph::sphere(2);
        assert!((functional_a(&s, &rule).unwrap() - 2.0 * PI * PI).abs() < 1e-10);
        assert!((functional_v(&s, &rule).unwrap() - PI * PI / 2.0).abs() < 1e-10);
        let r = functional_r(&s, &rule).unwrap();
        assert!((r - 2.0 * PI * PI / (PI * PI / 2.0).powf(2.0 / 3.0)).abs() < 1e-10);
        let q = qmc_rule(3, 2000, 1);
        assert!((functional_v(&RadialGraph::sphere(3), &q).unwrap() - PI.powi(3) / 6.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_law_and_scale_invariance() {
        let rule = product_rule_s3(6);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let g = random_graph(&mut rng, 2, 0.1);
        let a = functional_a(&g, &rule).unwrap();
        let r = functional_r(&g, &rule).unwrap();
        for kappa in [0.5f64, 2.0] {
            let gk = g.shifted(kappa.ln());
            let ak = functional_a(&gk, &rule).unwrap();
            assert!((ak / a - kappa.powf(8.0 / 3.0)).abs() < 1e-9 * kappa.powf(8.0 / 3.0));
            assert!((functional_r(&gk, &rule).unwrap() / r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pseudoconvexity_scan() {
        let rule = product_rule_s3(6);
        let pc = pseudoconvexity_check(&RadialGraph::sphere(2), &rule);
        assert!(pc.certified);
        assert!((pc.min_eigenvalue - 0.5).abs() < 1e-12);
        let e = harmonic_basis(2, 2, 2).unwrap().elements[0].clone();
        let big = RadialGraph::new(2, vec![RealField::new(Part::Re, 3.0, e.clone())]).unwrap();
        assert!(!pseudoconvexity_check(&big, &rule).certified);
        let tiny = RadialGraph::new(2, vec![RealField::new(Part::Re, 1e-3, e)]).unwrap();
        assert!(pseudoconvexity_check(&tiny, &rule).certified);
        assert!(
            matches!(functional_a(&big, &rule), Err(Error::NotPseudoconvex { .. }))
                || functional_report(&big, &rule, BTreeMap::new()).is_err()
        );
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let g = random_graph(&mut rng, 3, 0.1);
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let back = RadialGraph::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        let xi = random_unit(&mut rng, 3);
        assert_eq!(back.f(&xi), g.f(&xi));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn routes_agree_prop(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed % 2) as usize;
            let g = random_graph(&mut rng, n, 0.12);
            let xi = random_unit(&mut rng, n);
            let (a, b) = nu_density_checked(&g, &xi).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn sphere_jet_matches_chain_rule(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, 2, 0.3);
            let xi = random_unit(&mut rng, 2);
            let jet = g.sphere_jet(&xi);
            let (_, pg, ph) = g.compiled.jet(&xi);
            let d = 4;
            let p = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 } - xi[i] * xi[j];
            for i in 0..d {
                let gi: f64 = (0..d).map(|k| pg[k] * p(k, i)).sum();
                prop_assert!((gi - jet.g[i]).abs() < 1e-12);
                for j in 0..d {
                    let mut hij = 0.0;
                    for k in 0..d {
                        for l in 0..d {
                            hij += ph[k][l] * p(k, i) * p(l, j);
                        }
                        let dk = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        let n2 = -dk(k, i) * xi[j] - dk(k, j) * xi[i] - dk(i, j) * xi[k] + 3.0 * xi[i] * xi[j] * xi[k];
                        hij += pg[k] * n2;
                    }
                    prop_assert!((hij - jet.h[i][j]).abs() < 1e-11);
                }
            }
        }
    }
}
