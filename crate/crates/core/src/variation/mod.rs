//! First and second variations of `R` at the round sphere.
//!
//! Derivatives are central differences over `t ↦ R(M_{f + t g})` at steps `h`
//! and `h/2`, combined by Richardson extrapolation; every derivative carries
//! the error estimate `|D(h/2) - D(h)|/3` plus a round-off floor.

pub mod curvature;
pub mod factorization;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{harmonic_basis, lambda_pq, mu_pq, sphere_volume, Part, RealField};
use crate::hypersurface::{functional_r, RadialGraph};
use crate::quadrature::{qmc_rule, SphereRule};

pub use curvature::*;
pub use factorization::*;

pub const DEFAULT_STEP_N2: f64 = 5e-2;
pub const DEFAULT_STEP_N3: f64 = 1e-1;
const MAX_HALVINGS: usize = 3;

pub fn default_step(n: usize) -> f64 {
    if n == 2 {
        DEFAULT_STEP_N2
    } else {
        DEFAULT_STEP_N3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn scaled(self, c: f64) -> Self {
        Self { value: self.value * c, error: self.error * c.abs() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub value: f64,
    pub first: Estimate,
    pub second: Estimate,
    pub step: f64,
}

/// Central first and second derivatives of `g` at 0 with Richardson extrapolation.
/// The step is halved (at most three times) when a probe leaves the
/// pseudoconvex range.
pub fn central_derivatives(g: impl Fn(f64) -> Result<f64>, step: f64) -> Result<Derivatives> {
    let g0 = g(0.0)?;
    let mut h = step;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        let probes: Result<Vec<f64>> = [h, -h, h / 2.0, -h / 2.0].iter().map(|&t| g(t)).collect();
        match probes {
            Ok(p) => {
                let d1 = |a: f64, b: f64, s: f64| (a - b) / (2.0 * s);
                let d2 = |a: f64, b: f64, s: f64| (a - 2.0 * g0 + b) / (s * s);
                let (f_h, f_h2) = (d1(p[0], p[1], h), d1(p[2], p[3], h / 2.0));
                let (s_h, s_h2) = (d2(p[0], p[1], h), d2(p[2], p[3], h / 2.0));
                let floor1 = 64.0 * f64::EPSILON * g0.abs() / (h / 2.0);
                let floor2 = 64.0 * f64::EPSILON * g0.abs() / (h * h / 4.0);
                return Ok(Derivatives {
                    value: g0,
                    first: Estimate { value: (4.0 * f_h2 - f_h) / 3.0, error: (f_h2 - f_h).abs() / 3.0 + floor1 },
                    second: Estimate { value: (4.0 * s_h2 - s_h) / 3.0, error: (s_h2 - s_h).abs() / 3.0 + floor2 },
                    step: h,
                });
            }
            Err(e @ Error::NotPseudoconvex { .. }) => {
                last_err = Some(e);
                h /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran"))
}

fn with_t(e: Error, t: f64) -> Error {
    match e {
        Error::NotPseudoconvex { node, value, .. } => Error::NotPseudoconvex { node, value, t },
        e => e,
    }
}

/// Derivatives of `t ↦ R(base + t·direction)` at `t = 0`.
pub fn r_derivatives(base: &RadialGraph, direction: &RadialGraph, rule: &SphereRule, step: f64) -> Result<Derivatives> {
    central_derivatives(|t| functional_r(&base.plus(direction, t)?, rule).map_err(|e| with_t(e, t)), step)
}

pub fn derivative_r(
    base: &RadialGraph,
    direction: &RadialGraph,
    order: usize,
    rule: &SphereRule,
    step: f64,
) -> Result<Estimate> {
    let d = r_derivatives(base, direction, rule, step)?;
    match order {
        1 => Ok(d.first),
        2 => Ok(d.second),
        _ => Err(Error::InvalidInput(format!("derivative order {order} not supported"))),
    }
}

/// `Q(f)` with `R_t = R(S)(1 + t² Q(f) + ...)`.
pub fn measured_q(direction: &RadialGraph, rule: &SphereRule, step: f64) -> Result<(Estimate, Estimate)> {
    let sphere = RadialGraph::sphere(direction.n);
    let d = r_derivatives(&sphere, direction, rule, step)?;
    Ok((d.first, d.second.scaled(0.5 / d.value)))
}

/// `2n / ((n+1)² Vol(S^{2n-1}))`.
pub fn c_norm(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * nf / ((nf + 1.0).powi(2) * sphere_volume(n))
}

pub fn predicted_q(n: usize, p: usize, q: usize, norm2: f64) -> Result<f64> {
    if p + q == 0 {
        return Err(Error::ZeroBidegree);
    }
    Ok(c_norm(n) * mu_pq(n, p, q)? * norm2 + 0.0)
}

/// The four constituent norms of the second-variation quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerms {
    pub norm2: f64,
    pub mean2: f64,
    pub horizontal_gradient2: f64,
    pub vertical2: f64,
    pub horizontal_laplacian2: f64,
}

/// `‖f‖²`, `I(f)²`, `‖d_H f‖²`, `‖L_v f‖²` and `‖Δ_H f‖²` by quadrature from the
/// 2-jet of the 0-homogeneous extension of `f`.
pub fn quadratic_terms(f: &RadialGraph, rule: &SphereRule) -> Result<QuadraticTerms> {
    let mut vals = [Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for xi in &rule.nodes {
        let jet = f.sphere_jet(xi);
        let (g, h) = (jet.gradient(), jet.hessian());
        let jx = crate::alt_forms::apply_j(xi);
        let lv: f64 = g.iter().zip(&jx).map(|(a, b)| a * b).sum();
        let grad2: f64 = g.iter().map(|a| a * a).sum();
        let trace: f64 = (0..xi.len()).map(|i| h[i][i]).sum();
        let vv: f64 = (0..xi.len()).map(|i| (0..xi.len()).map(|j| jx[i] * h[i][j] * jx[j]).sum::<f64>()).sum();
        let lap_h = -(trace - vv);
        vals[0].push(jet.v * jet.v);
        vals[1].push(jet.v);
        vals[2].push(grad2 - lv * lv);
        vals[3].push(lv * lv);
        vals[4].push(lap_h * lap_h);
    }
    let mean = rule.integrate_values(&vals[1])?;
    Ok(QuadraticTerms {
        norm2: rule.integrate_values(&vals[0])?,
        mean2: mean * mean / sphere_volume(f.n),
        horizontal_gradient2: rule.integrate_values(&vals[2])?,
        vertical2: rule.integrate_values(&vals[3])?,
        horizontal_laplacian2: rule.integrate_values(&vals[4])?,
    })
}

/// `a₀(‖f‖² - I(f)²) + a₁‖d_H f‖² + a₂‖L_v f‖² + a₃‖Δ_H f‖²` with the absolute normalization.
pub fn quadratic_form_value(n: usize, t: &QuadraticTerms) -> f64 {
    let nf = n as f64;
    c_norm(n)
        * (-nf * nf * (t.norm2 - t.mean2) + nf / 2.0 * t.horizontal_gradient2 + (nf + 1.0).powi(2) / 4.0 * t.vertical2
            - t.horizontal_laplacian2 / 16.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationResult {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub part: Part,
    pub index: usize,
    pub norm2: f64,
    pub dr_dt: Estimate,
    pub q_measured: Estimate,
    pub q_predicted: f64,
    pub ratio: Option<f64>,
    pub measured_sign: i8,
    pub predicted_sign: i8,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub rule_id: String,
    pub step: f64,
    pub c_norm: f64,
    /// `|Q|/‖f‖²` measured on the `h^{2,2}` reference.
    pub reference_q_per_norm: f64,
    pub rows: Vec<VariationResult>,
    pub flagged: Vec<(usize, usize)>,
}

/// Real direction from the first basis element of `h^{p,q}`.
pub fn spectrum_direction(n: usize, p: usize, q: usize) -> Result<(RealField, usize)> {
    let basis = harmonic_basis(n, p, q)?;
    let e = basis.elements.first().ok_or(Error::InvalidInput(format!("h^{{{p},{q}}} is trivial")))?.clone();
    let re = RealField::new(Part::Re, 1.0, e.clone());
    if re.norm2() > 1e-8 {
        return Ok((re, 0));
    }
    Ok((RealField::new(Part::Im, 1.0, e), 0))
}

fn sign_of(x: f64, zero: bool) -> i8 {
    if zero {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

fn variation_row(
    n: usize,
    p: usize,
    q: usize,
    rule: &SphereRule,
    step: f64,
    reference: Option<f64>,
) -> Result<VariationResult> {
    let (field, index) = spectrum_direction(n, p, q)?;
    let norm2 = field.norm2();
    let dir = RadialGraph::from_field(field.clone())?;
    let (d1, qm) = measured_q(&dir, rule, step)?;
    let qp = predicted_q(n, p, q, norm2)?;
    let null_band = reference.map(|r| 0.05 * r * norm2);
    let is_zero = match null_band {
        Some(b) => qm.value.abs() <= b,
        None => false,
    };
    let ratio = if qp != 0.0 { Some(qm.value / qp) } else { None };
    let within = match ratio {
        Some(r) => (0.98..=1.02).contains(&r),
        None => is_zero,
    };
    Ok(VariationResult {
        n,
        p,
        q,
        part: field.part,
        index,
        norm2,
        dr_dt: d1,
        q_measured: qm,
        q_predicted: qp,
        ratio,
        measured_sign: sign_of(qm.value, is_zero),
        predicted_sign: sign_of(qp, qp == 0.0),
        within_tolerance: within,
    })
}

/// Measured against predicted `Q` over the listed bidegrees.
pub fn spectrum_report(n: usize, pq_list: &[(usize, usize)], rule: &SphereRule, step: f64) -> Result<SpectrumReport> {
    let reference_row = variation_row(n, 2, 2, rule, step, None)?;
    let reference = reference_row.q_measured.value.abs() / reference_row.norm2;
    let mut rows = Vec::new();
    for &(p, q) in pq_list {
        let row = if (p, q) == (2, 2) {
            let mut r = reference_row.clone();
            r.measured_sign = sign_of(r.q_measured.value, false);
            r
        } else {
            variation_row(n, p, q, rule, step, Some(reference))?
        };
        rows.push(row);
    }
    let flagged = rows.iter().filter(|r| !r.within_tolerance).map(|r| (r.p, r.q)).collect();
    Ok(SpectrumReport {
        n,
        rule_id: rule.id(),
        step,
        c_norm: c_norm(n),
        reference_q_per_norm: reference,
        rows,
        flagged,
    })
}

/// All bidegrees with `1 ≤ p + q ≤ max_degree`.
pub fn bidegrees_up_to(max_degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for d in 1..=max_degree {
        for p in (0..=d).rev() {
            out.push((p, d - p));
        }
    }
    out
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,p,q,norm2,Q_measured,Q_err,Q_predicted,ratio,measured_sign,predicted_sign\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|x| format!("{x:.10}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{:.12e},{:.12e},{:.6e},{:.12e},{},{},{}\n",
                r.n,
                r.p,
                r.q,
                r.norm2,
                r.q_measured.value,
                r.q_measured.error,
                r.q_predicted,
                ratio,
                r.measured_sign,
                r.predicted_sign
            ));
        }
        s
    }
}

/// `Q` for `n = 3` from independent QMC replicates; the error combines the
/// replicate standard error with the largest finite-difference error.
pub fn measured_q_replicated(direction: &RadialGraph, count: usize, seeds: &[u64], step: f64) -> Result<Estimate> {
    let mut values = Vec::new();
    let mut fd = 0.0f64;
    for &s in seeds {
        let rule = qmc_rule(direction.n, count, s);
        let (_, q) = measured_q(direction, &rule, step)?;
        values.push(q.value);
        fd = fd.max(q.error);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    Ok(Estimate { value: mean, error: (var / k + fd * fd).sqrt() })
}

pub fn lambda_relation(n: usize, p: usize, q: usize) -> f64 {
    let nf = n as f64;
    let l = lambda_pq(n, p, q);
    let d = (p as f64 - q as f64).powi(2);
    -nf * nf + nf / 2.0 * l + (nf + 1.0).powi(2) / 4.0 * d - l * l / 16.0
}
