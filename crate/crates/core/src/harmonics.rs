//! Bigraded polynomials on `C^n` and their harmonic subspaces.
//!
//! `s^{p,q}` is spanned by monomials `z^a zbar^b` with `|a| = p`, `|b| = q`;
//! `h^{p,q}` is the kernel of the contraction `Σ ∂²/∂z_a∂zbar_a`. Bases are
//! orthonormal for the round measure on `S^{2n-1}`, whose monomial moments
//! are known in closed form.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::alt_forms::C64;
use crate::error::{Error, Result};

pub const DEFAULT_DEGREE_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub z: Vec<u8>,
    pub zbar: Vec<u8>,
}

impl Monomial {
    pub fn new(z: Vec<u8>, zbar: Vec<u8>) -> Self {
        Self { z, zbar }
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.z.iter().map(|&e| e as usize).sum(), self.zbar.iter().map(|&e| e as usize).sum())
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for (k, zk) in z.iter().enumerate() {
            if self.z[k] > 0 {
                acc *= zk.powu(self.z[k] as u32);
            }
            if self.zbar[k] > 0 {
                acc *= zk.conj().powu(self.zbar[k] as u32);
            }
        }
        acc
    }
}

/// All exponent vectors of length `n` summing to `d`, in lexicographic order
/// (largest first exponent first).
pub fn compositions(n: usize, d: usize) -> Vec<Vec<u8>> {
    fn rec(n: usize, d: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if n == 1 {
            prefix.push(d as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=d).rev() {
            prefix.push(first as u8);
            rec(n - 1, d - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::new(), &mut out);
    out
}

pub fn monomials(n: usize, p: usize, q: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for a in compositions(n, p) {
        for b in compositions(n, q) {
            out.push(Monomial::new(a.clone(), b));
        }
    }
    out
}

pub fn dim_s(n: usize, p: usize, q: usize) -> usize {
    crate::alt_forms::binomial(n + p - 1, p) * crate::alt_forms::binomial(n + q - 1, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigradedPoly {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    coeffs: BTreeMap<Monomial, C64>,
}

impl BigradedPoly {
    pub fn zero(n: usize, p: usize, q: usize) -> Self {
        Self { n, p, q, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut poly = Self::zero(n, 0, 0);
        poly.coeffs.insert(Monomial::new(vec![0; n], vec![0; n]), c);
        poly
    }

    pub fn monomial(n: usize, z: &[u8], zbar: &[u8], c: C64) -> Result<Self> {
        let m = Monomial::new(z.to_vec(), zbar.to_vec());
        if m.z.len() != n || m.zbar.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.z.len().min(m.zbar.len()) });
        }
        let (p, q) = m.bidegree();
        let mut poly = Self::zero(n, p, q);
        poly.coeffs.insert(m, c);
        Ok(poly)
    }

    /// Builds a polynomial from explicit terms, checking every bidegree.
    pub fn from_terms(n: usize, p: usize, q: usize, terms: impl IntoIterator<Item = (Monomial, C64)>) -> Result<Self> {
        let mut poly = Self::zero(n, p, q);
        for (m, c) in terms {
            if m.z.len() != n || m.zbar.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.z.len() });
            }
            if m.bidegree() != (p, q) {
                return Err(Error::InvalidInput(format!("monomial {:?} is not of bidegree ({p},{q})", m)));
            }
            *poly.coeffs.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        Ok(poly)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> C64 {
        self.coeffs.get(m).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if (self.n, self.p, self.q) != (other.n, other.p, other.q) {
            return Err(Error::InvalidInput("bidegree mismatch".into()));
        }
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            *out.coeffs.entry(m.clone()).or_insert(C64::new(0.0, 0.0)) += c;
        }
        Ok(out)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Value at an arbitrary point of `C^n`.
    pub fn eval(&self, z: &[C64]) -> C64 {
        self.coeffs.iter().map(|(m, c)| c * m.eval(z)).sum()
    }

    /// Coefficient vector over [`monomials`]`(n, p, q)`.
    pub fn to_vector(&self) -> Vec<C64> {
        monomials(self.n, self.p, self.q).iter().map(|m| self.coefficient(m)).collect()
    }

    pub fn from_vector(n: usize, p: usize, q: usize, v: &[C64]) -> Self {
        let mut poly = Self::zero(n, p, q);
        for (m, c) in monomials(n, p, q).into_iter().zip(v) {
            if *c != C64::new(0.0, 0.0) {
                poly.coeffs.insert(m, *c);
            }
        }
        poly
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.n, self.q, self.p);
        for (m, c) in &self.coeffs {
            out.coeffs.insert(Monomial::new(m.zbar.clone(), m.z.clone()), c.conj());
        }
        out
    }
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

pub fn to_real(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// `P(ξ, ξbar)` for `ξ` on the unit sphere, given in real coordinates.
pub fn restrict_eval(poly: &BigradedPoly, xi: &[f64]) -> Result<C64> {
    if xi.len() != 2 * poly.n {
        return Err(Error::DimensionMismatch { expected: 2 * poly.n, found: xi.len() });
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnit { norm });
    }
    Ok(poly.eval(&to_complex(xi)))
}

/// `Σ_a ∂²P/∂z_a∂zbar_a`.
pub fn contraction(poly: &BigradedPoly) -> BigradedPoly {
    if poly.p == 0 || poly.q == 0 {
        return BigradedPoly::zero(poly.n, poly.p.saturating_sub(1), poly.q.saturating_sub(1));
    }
    let mut out = BigradedPoly::zero(poly.n, poly.p - 1, poly.q - 1);
    for (m, c) in &poly.coeffs {
        for a in 0..poly.n {
            if m.z[a] > 0 && m.zbar[a] > 0 {
                let mut next = m.clone();
                next.z[a] -= 1;
                next.zbar[a] -= 1;
                let factor = (m.z[a] as f64) * (m.zbar[a] as f64);
                *out.coeffs.entry(next).or_insert(C64::new(0.0, 0.0)) += c * factor;
            }
        }
    }
    out.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
    out
}

/// Matrix of [`contraction`] from `s^{p,q}` to `s^{p-1,q-1}` in monomial bases.
pub fn contraction_matrix(n: usize, p: usize, q: usize) -> Vec<Vec<f64>> {
    let cols = monomials(n, p, q);
    if p == 0 || q == 0 {
        return Vec::new();
    }
    let rows = monomials(n, p - 1, q - 1);
    let index: BTreeMap<&Monomial, usize> = rows.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut mat = vec![vec![0.0; cols.len()]; rows.len()];
    for (j, m) in cols.iter().enumerate() {
        let image = contraction(&BigradedPoly::monomial(n, &m.z, &m.zbar, C64::new(1.0, 0.0)).expect("valid monomial"));
        for (r, c) in image.terms() {
            mat[index[r]][j] = c.re;
        }
    }
    mat
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `∫_{S^{2n-1}} |z^α|² dσ = 2π^n α! / (n-1+|α|)!`.
pub fn sphere_moment(n: usize, alpha: &[u8]) -> f64 {
    let total: usize = alpha.iter().map(|&a| a as usize).sum();
    let num: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
    2.0 * PI.powi(n as i32) * num / factorial(n - 1 + total)
}

pub fn sphere_volume(n: usize) -> f64 {
    2.0 * PI.powi(n as i32) / factorial(n - 1)
}

pub fn ball_volume(n: usize) -> f64 {
    PI.powi(n as i32) / factorial(n)
}

/// `∫ z^a zbar^b dσ` for the round sphere.
pub fn monomial_integral(m: &Monomial) -> f64 {
    if m.z != m.zbar {
        return 0.0;
    }
    sphere_moment(m.z.len(), &m.z)
}

/// `⟨P, Q⟩ = ∫ P conj(Q) dσ`, exact from the moment formula.
pub fn inner_product(a: &BigradedPoly, b: &BigradedPoly) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (ma, ca) in a.terms() {
        for (mb, cb) in b.terms() {
            let z: Vec<u8> = ma.z.iter().zip(&mb.zbar).map(|(x, y)| x + y).collect();
            let zbar: Vec<u8> = ma.zbar.iter().zip(&mb.z).map(|(x, y)| x + y).collect();
            if z == zbar {
                acc += ca * cb.conj() * sphere_moment(a.n, &z);
            }
        }
    }
    acc
}

pub fn norm2(a: &BigradedPoly) -> f64 {
    inner_product(a, a).re
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub elements: Vec<BigradedPoly>,
}

pub fn harmonic_basis(n: usize, p: usize, q: usize) -> Result<HarmonicBasis> {
    harmonic_basis_with_cap(n, p, q, DEFAULT_DEGREE_CAP)
}

pub fn harmonic_basis_with_cap(n: usize, p: usize, q: usize, cap: usize) -> Result<HarmonicBasis> {
    if p + q > cap {
        return Err(Error::DegreeCapExceeded { degree: p + q, cap });
    }
    if n < 1 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let cols = dim_s(n, p, q);
    let kernel: Vec<Vec<f64>> = if p == 0 || q == 0 {
        (0..cols).map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    } else {
        nullspace(contraction_matrix(n, p, q), cols)
    };
    let mut elements: Vec<BigradedPoly> = Vec::new();
    for v in kernel {
        let cv: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut poly = BigradedPoly::from_vector(n, p, q, &cv);
        for _ in 0..2 {
            for e in &elements {
                let proj = inner_product(&poly, e);
                poly = poly.try_add(&e.scale(-proj))?;
            }
        }
        let nn = norm2(&poly).sqrt();
        elements.push(poly.scale(C64::new(1.0 / nn, 0.0)));
    }
    for e in elements.iter_mut() {
        e.coeffs.retain(|_, c| c.norm() > 1e-15);
    }
    Ok(HarmonicBasis { n, p, q, elements })
}

/// Kernel of a dense matrix by reduced row echelon form; free columns give
/// the canonical spanning vectors.
fn nullspace(mut a: Vec<Vec<f64>>, cols: usize) -> Vec<Vec<f64>> {
    let rows = a.len();
    let scale = a.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-10 * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) =
            (r..rows).map(|i| (i, a[i][c].abs())).fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        a.swap(r, best);
        let d = a[r][c];
        for x in a[r].iter_mut() {
            *x /= d;
        }
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                let pivot_row = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut out = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free];
        }
        out.push(v);
    }
    out
}

/// Horizontal-Laplacian eigenvalue on `h^{p,q}`.
pub fn lambda_pq(n: usize, p: usize, q: usize) -> f64 {
    let (p, q, n) = (p as f64, q as f64, n as f64);
    (p + q) * (p + q + 2.0 * n - 2.0) - (p - q).powi(2)
}

/// Sphere-Laplacian eigenvalue `d(d+2n-2)` on polynomials of degree `d`.
pub fn laplace_eigenvalue(n: usize, d: usize) -> f64 {
    (d * (d + 2 * n - 2)) as f64
}

/// Second-variation eigenvalue `-(p-1)(q-1)(p+n)(q+n)`.
pub fn mu_pq(n: usize, p: usize, q: usize) -> Result<f64> {
    if p == 0 && q == 0 {
        return Err(Error::ZeroBidegree);
    }
    let (p, q, n) = (p as f64, q as f64, n as f64);
    Ok(-(p - 1.0) * (q - 1.0) * (p + n) * (q + n))
}

/// Derivative along the circle action `ξ ↦ e^{it}ξ`: `i(p-q)P`.
pub fn vertical_derivative(poly: &BigradedPoly) -> BigradedPoly {
    poly.scale(C64::new(0.0, poly.p as f64 - poly.q as f64))
}

/// Central-difference version of [`vertical_derivative`] evaluated at `ξ`.
pub fn vertical_derivative_fd(poly: &BigradedPoly, xi: &[f64], step: f64) -> Result<C64> {
    let z = to_complex(xi);
    let rot = |t: f64| -> Vec<C64> { z.iter().map(|c| c * C64::from_polar(1.0, t)).collect() };
    let plus = restrict_eval(poly, &to_real(&rot(step)))?;
    let minus = restrict_eval(poly, &to_real(&rot(-step)))?;
    let plus2 = restrict_eval(poly, &to_real(&rot(step / 2.0)))?;
    let minus2 = restrict_eval(poly, &to_real(&rot(-step / 2.0)))?;
    let d1 = (plus - minus) / (2.0 * step);
    let d2 = (plus2 - minus2) / step;
    Ok((d2 * 4.0 - d1) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

/// Real function `c * Re P` or `c * Im P` on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub part: Part,
    pub coefficient: f64,
    pub poly: BigradedPoly,
}

impl RealField {
    pub fn new(part: Part, coefficient: f64, poly: BigradedPoly) -> Self {
        Self { part, coefficient, poly }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let v = self.poly.eval(&to_complex(xi));
        self.coefficient
            * match self.part {
                Part::Re => v.re,
                Part::Im => v.im,
            }
    }

    /// The complex polynomial `c` with `self = Re c`.
    pub fn as_real_part(&self) -> BigradedPoly {
        match self.part {
            Part::Re => self.poly.scale(C64::new(self.coefficient, 0.0)),
            Part::Im => self.poly.scale(C64::new(0.0, -self.coefficient)),
        }
    }

    /// Exact `∫ f² dσ`.
    pub fn norm2(&self) -> f64 {
        let c = self.as_real_part();
        let cc = c.conj();
        // (Re c)² = (|c|² + Re c²)/2 and ∫c² vanishes unless p = q.
        let mut total = 2.0 * norm2(&c);
        if c.p == c.q {
            total += 2.0 * inner_product(&c, &cc).re;
        }
        total / 4.0
    }
}

#[derive(Debug, Clone)]
struct CompiledMonomial {
    coefficient: C64,
    exps: [u8; 6],
}

/// Fast value, gradient and Hessian of `Re Σ c_m z^a zbar^b` in real coordinates.
#[derive(Debug, Clone)]
pub struct CompiledField {
    n: usize,
    max_degree: usize,
    terms: Vec<CompiledMonomial>,
}

impl CompiledField {
    pub fn new(n: usize, fields: &[RealField]) -> Result<Self> {
        if n > 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: n });
        }
        let mut merged: BTreeMap<(Vec<u8>, Vec<u8>), C64> = BTreeMap::new();
        for f in fields {
            if f.poly.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: f.poly.n });
            }
            for (m, c) in f.as_real_part().terms() {
                *merged.entry((m.z.clone(), m.zbar.clone())).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        let mut terms = Vec::new();
        let mut max_degree = 0;
        for ((z, zbar), c) in merged {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut exps = [0u8; 6];
            for a in 0..n {
                exps[a] = z[a];
                exps[n + a] = zbar[a];
            }
            max_degree = max_degree.max(exps.iter().map(|&e| e as usize).max().unwrap_or(0));
            terms.push(CompiledMonomial { coefficient: c, exps });
        }
        Ok(Self { n, max_degree, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let z = to_complex(x);
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut m = t.coefficient;
            for a in 0..self.n {
                if t.exps[a] > 0 {
                    m *= z[a].powu(t.exps[a] as u32);
                }
                if t.exps[self.n + a] > 0 {
                    m *= z[a].conj().powu(t.exps[self.n + a] as u32);
                }
            }
            acc += m;
        }
        acc.re
    }

    /// Value, real gradient and real Hessian at `x` (length `2n`).
    pub fn jet(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let d = 2 * n;
        let z = to_complex(x);
        let w: Vec<C64> = z.iter().copied().chain(z.iter().map(|c| c.conj())).collect();
        let zero = C64::new(0.0, 0.0);
        let mut pw = vec![vec![C64::new(1.0, 0.0); self.max_degree + 1]; d];
        for k in 0..d {
            for m in 1..=self.max_degree {
                pw[k][m] = pw[k][m - 1] * w[k];
            }
        }
        let mut val = zero;
        let mut gw = vec![zero; d];
        let mut hw = vec![vec![zero; d]; d];
        let mut active = Vec::with_capacity(d);
        for t in &self.terms {
            active.clear();
            active.extend((0..d).filter(|&k| t.exps[k] > 0));
            let prod_except = |skip: &[usize]| -> C64 {
                let mut p = t.coefficient;
                for &k in &active {
                    if !skip.contains(&k) {
                        p *= pw[k][t.exps[k] as usize];
                    }
                }
                p
            };
            val += prod_except(&[]);
            for &k in &active {
                let ek = t.exps[k] as usize;
                let rest = prod_except(&[k]);
                gw[k] += rest * pw[k][ek - 1] * ek as f64;
                if ek >= 2 {
                    hw[k][k] += rest * pw[k][ek - 2] * (ek * (ek - 1)) as f64;
                }
                for &l in &active {
                    if l <= k {
                        continue;
                    }
                    let el = t.exps[l] as usize;
                    let v = prod_except(&[k, l]) * pw[k][ek - 1] * pw[l][el - 1] * (ek * el) as f64;
                    hw[k][l] += v;
                    hw[l][k] += v;
                }
            }
        }
        // ∂x_a = ∂w_a + ∂w_{n+a}, ∂y_a = i(∂w_a - ∂w_{n+a}).
        let mut tm = vec![vec![zero; d]; d];
        for a in 0..n {
            tm[2 * a][a] = C64::new(1.0, 0.0);
            tm[2 * a][n + a] = C64::new(1.0, 0.0);
            tm[2 * a + 1][a] = C64::new(0.0, 1.0);
            tm[2 * a + 1][n + a] = C64::new(0.0, -1.0);
        }
        let grad: Vec<f64> = (0..d).map(|i| (0..d).map(|k| tm[i][k] * gw[k]).sum::<C64>().re).collect();
        let mut th = vec![vec![zero; d]; d];
        for i in 0..d {
            for l in 0..d {
                th[i][l] = (0..d).map(|k| tm[i][k] * hw[k][l]).sum();
            }
        }
        let hess: Vec<Vec<f64>> =
            (0..d).map(|i| (0..d).map(|j| (0..d).map(|l| th[i][l] * tm[j][l]).sum::<C64>().re).collect()).collect();
        (val.re, grad, hess)
    }
}
