//! Canonical factorization `Ψ|_M = θ ∧ χ` on a radial graph.
//!
//! All forms live in the coordinates of the oriented tangent frame of
//! [`tangent_frame`] at `ξ`, transported to `M` by the radial map.

use serde::{Deserialize, Serialize};

use crate::alt_forms::{c_n, complex_structure, holomorphic_volume, AlternatingForm, FormVector, C64};
use crate::error::{Error, Result};
use crate::hypersurface::{defining_jet, mat_vec, radial_map_jacobian, tangent_frame, RadialGraph};

/// Constant `K` in `θ∧(dθ)^{n-1} = K c_{n-1} θ∧χ∧χ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `K = 2^{n-1}(n-1)!`: the round sphere keeps its standard contact form.
    VolumeMatched,
    /// `K = (n-1)!`.
    Literal,
}

impl Normalization {
    pub fn constant(self, n: usize) -> f64 {
        let fact: f64 = (1..n).map(|i| i as f64).product();
        match self {
            Normalization::VolumeMatched => 2f64.powi(n as i32 - 1) * fact,
            Normalization::Literal => fact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationConfig {
    pub normalization: Normalization,
    /// Great-circle step for tangential derivatives of the conformal factor.
    pub phi_step: f64,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        Self { normalization: Normalization::VolumeMatched, phi_step: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationData {
    pub xi: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub theta: AlternatingForm,
    pub dtheta: AlternatingForm,
    /// Reeb field in frame coordinates.
    pub reeb: Vec<f64>,
    pub psi: AlternatingForm,
    pub chi: AlternatingForm,
    pub phi: f64,
    pub dphi: Vec<f64>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResiduals {
    pub theta_v: f64,
    pub iv_dtheta: f64,
    pub iv_chi: f64,
    pub normalization: f64,
    pub split: f64,
    pub alpha_beta: Option<f64>,
}

struct RawContact {
    theta: AlternatingForm,
    dtheta: AlternatingForm,
    psi: AlternatingForm,
}

/// `θ₀ = -(I dF)|_{TM}`, `dθ₀` and `Ψ|_M` on the frame.
fn raw_contact(graph: &RadialGraph, xi: &[f64], frame: &[Vec<f64>]) -> Result<RawContact> {
    let n = graph.n;
    let d = 2 * n;
    let jet = defining_jet(graph, xi)?;
    let jm = radial_map_jacobian(graph, xi);
    let pushed: Vec<Vec<f64>> = frame.iter().map(|e| mat_vec(&jm, e)).collect();
    let j = complex_structure(n);
    // (I dF)(X) = dF(JX) has coefficients a_k = Σ_i F_i J_{ik}.
    let a: Vec<f64> = (0..d).map(|k| -(0..d).map(|i| jet.grad_real[i] * j[i][k]).sum::<f64>()).collect();
    let mut da = AlternatingForm::zero(d, 2)?;
    for l in 0..d {
        for k in l + 1..d {
            let c: f64 = (0..d).map(|i| jet.hess_real[i][l] * j[i][k] - jet.hess_real[i][k] * j[i][l]).sum();
            da.set(&[l, k], C64::new(-c, 0.0))?;
        }
    }
    Ok(RawContact {
        theta: AlternatingForm::real_one_form(&a).restrict(&pushed)?,
        dtheta: da.restrict(&pushed)?,
        psi: holomorphic_volume(n).restrict(&pushed)?,
    })
}

/// Reeb field of `(θ, dθ)` in odd dimension: `i_u vol = (dθ)^{n-1}`, normalized by `θ(v) = 1`.
pub fn reeb_solve(theta: &AlternatingForm, dtheta: &AlternatingForm) -> Result<Vec<f64>> {
    let m = theta.dim();
    let n = m.div_ceil(2);
    let eta = dtheta.power(n - 1)?;
    let mut u = vec![0.0; m];
    for (j, uj) in u.iter_mut().enumerate() {
        let rest: Vec<usize> = (0..m).filter(|&i| i != j).collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *uj = sign * eta.coeff(&rest)?.re;
    }
    let c: f64 = (0..m).map(|j| theta.coeff(&[j]).map(|t| t.re * u[j])).sum::<Result<f64>>()?;
    let scale = eta.norm() * theta.norm();
    if !(c.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularReebSolve { density: c });
    }
    Ok(u.iter().map(|x| x / c).collect())
}

fn top(f: &AlternatingForm) -> C64 {
    f.top_coefficient()
}

fn phi_from_raw(raw: &RawContact, n: usize, norm: Normalization) -> Result<f64> {
    let v0 = reeb_solve(&raw.theta, &raw.dtheta)?;
    let chi0 = raw.psi.contract(&FormVector::real(&v0))?;
    let lhs = raw.theta.wedge(&raw.dtheta.power(n - 1)?)?;
    let rhs = raw.theta.wedge(&chi0)?.wedge(&chi0.conj())?.scale(c_n(n - 1) * norm.constant(n));
    let denom = top(&lhs).re;
    let ratio = top(&rhs).re / denom;
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::NotPseudoconvex { node: 0, value: denom, t: 0.0 });
    }
    Ok(ratio.powf(1.0 / (n as f64 + 1.0)))
}

/// Conformal factor `φ` with `θ = φ θ₀` canonically normalized.
pub fn conformal_factor(graph: &RadialGraph, xi: &[f64], norm: Normalization) -> Result<f64> {
    let frame = tangent_frame(xi);
    let raw = raw_contact(graph, xi, &frame)?;
    phi_from_raw(&raw, graph.n, norm)
}

fn great_circle(xi: &[f64], e: &[f64], s: f64) -> Vec<f64> {
    let (c, sn) = (s.cos(), s.sin());
    let p: Vec<f64> = xi.iter().zip(e).map(|(a, b)| c * a + sn * b).collect();
    let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    p.iter().map(|x| x / r).collect()
}

/// Tangential derivative along the great circle through `ξ` in direction `e`,
/// from central differences at `s` and `s/2` with Richardson.
pub fn circle_derivative<T>(
    xi: &[f64],
    e: &[f64],
    s: f64,
    eval: impl Fn(&[f64]) -> Result<T>,
    sub: impl Fn(&T, &T, f64) -> T,
    combine: impl Fn(&T, &T) -> (T, f64),
) -> Result<T> {
    let d_s = sub(&eval(&great_circle(xi, e, s))?, &eval(&great_circle(xi, e, -s))?, 2.0 * s);
    let d_h = sub(&eval(&great_circle(xi, e, s / 2.0))?, &eval(&great_circle(xi, e, -s / 2.0))?, s);
    let (out, change) = combine(&d_s, &d_h);
    if change > 1e-3 {
        return Err(Error::FlowStepUnstable { change });
    }
    Ok(out)
}

fn scalar_derivative(xi: &[f64], e: &[f64], s: f64, f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    circle_derivative(
        xi,
        e,
        s,
        f,
        |a, b, w| (a - b) / w,
        |d1, d2| {
            let change = (d1 - d2).abs() / (1.0 + d1.abs().max(d2.abs()));
            ((4.0 * d2 - d1) / 3.0, change)
        },
    )
}

pub fn canonical_factorization(
    graph: &RadialGraph,
    xi: &[f64],
    cfg: &FactorizationConfig,
) -> Result<FactorizationData> {
    let n = graph.n;
    let frame = tangent_frame(xi);
    let raw = raw_contact(graph, xi, &frame)?;
    let phi = phi_from_raw(&raw, n, cfg.normalization)?;
    let dphi: Vec<f64> = frame
        .iter()
        .map(|e| scalar_derivative(xi, e, cfg.phi_step, |p| conformal_factor(graph, p, cfg.normalization)))
        .collect::<Result<_>>()?;
    let dphi_form = AlternatingForm::real_one_form(&dphi);
    let theta = &raw.theta * phi;
    let dtheta = &dphi_form.wedge(&raw.theta)? + &(&raw.dtheta * phi);
    let reeb = reeb_solve(&theta, &dtheta)?;
    let chi = raw.psi.contract(&FormVector::real(&reeb))?;
    Ok(FactorizationData {
        xi: xi.to_vec(),
        frame,
        theta,
        dtheta,
        reeb,
        psi: raw.psi,
        chi,
        phi,
        dphi,
        normalization: cfg.normalization,
    })
}

impl FactorizationData {
    pub fn n(&self) -> usize {
        self.frame.len().div_ceil(2)
    }

    pub fn alpha(&self) -> AlternatingForm {
        self.chi.re()
    }

    pub fn beta(&self) -> AlternatingForm {
        self.chi.im()
    }

    /// Reeb field as a tangent vector of the sphere at `ξ`.
    pub fn reeb_ambient(&self) -> Vec<f64> {
        let d = self.xi.len();
        (0..d).map(|k| self.frame.iter().zip(&self.reeb).map(|(e, v)| e[k] * v).sum()).collect()
    }

    /// Ambient form agreeing with a frame form on `T_ξ S` and killing `ξ`.
    pub fn ambient(&self, form: &AlternatingForm) -> Result<AlternatingForm> {
        form.embed(&self.frame, self.xi.len())
    }

    pub fn residuals(&self) -> Result<FactorizationResiduals> {
        let n = self.n();
        let v = FormVector::real(&self.reeb);
        let theta_v = (self.theta.contract(&v)?.coeffs()[0].re - 1.0).abs();
        let scale_dt = self.dtheta.norm();
        let iv_dtheta = self.dtheta.contract(&v)?.norm() / scale_dt;
        let iv_chi = self.chi.contract(&v)?.norm() / self.chi.norm();
        let lhs = self.theta.wedge(&self.dtheta.power(n - 1)?)?;
        let rhs =
            self.theta.wedge(&self.chi)?.wedge(&self.chi.conj())?.scale(c_n(n - 1) * self.normalization.constant(n));
        let normalization = (lhs.top_coefficient() - rhs.top_coefficient()).norm() / lhs.top_coefficient().norm();
        let split = (&self.psi - &self.theta.wedge(&self.chi)?).norm() / self.psi.norm();
        let alpha_beta = if n % 2 == 1 {
            Some(self.alpha().wedge(&self.beta())?.norm() / (self.alpha().norm() * self.beta().norm()))
        } else {
            None
        };
        Ok(FactorizationResiduals { theta_v, iv_dtheta, iv_chi, normalization, split, alpha_beta })
    }
}
