//! Lie derivatives along the Reeb field, the mean curvature `h` and the
//! Sasaki–Einstein diagnostics.

use serde::{Deserialize, Serialize};

use crate::alt_forms::{AlternatingForm, C64};
use crate::error::{Error, Result};
use crate::hypersurface::{functional_a, functional_v, nu_density, tangent_frame, RadialGraph, Route};
use crate::quadrature::SphereRule;

use super::factorization::{canonical_factorization, circle_derivative, FactorizationConfig, FactorizationData};
use super::{central_derivatives, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieConfig {
    pub factorization: FactorizationConfig,
    /// Flow parameter of the central difference.
    pub flow_step: f64,
    /// Great-circle step for the derivative of the Reeb field.
    pub field_step: f64,
}

impl Default for LieConfig {
    fn default() -> Self {
        Self { factorization: FactorizationConfig::default(), flow_step: 1e-2, field_step: 1e-4 }
    }
}

fn lin_comb(a: &AlternatingForm, b: &AlternatingForm, ca: f64, cb: f64) -> AlternatingForm {
    &(a * ca) + &(b * cb)
}

/// Derivative at `ξ` of the 0-homogeneous extension of a tangent vector field.
fn field_jacobian(
    xi: &[f64],
    frame: &[Vec<f64>],
    step: f64,
    field: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let d = xi.len();
    let mut jac = vec![vec![0.0; d]; d];
    for e in frame {
        let dv = circle_derivative(
            xi,
            e,
            step,
            field,
            |a, b, w| a.iter().zip(b).map(|(x, y)| (x - y) / w).collect::<Vec<f64>>(),
            |d1, d2| {
                let num: f64 = d1.iter().zip(d2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                let den = 1.0 + d1.iter().map(|x| x.abs()).fold(0.0, f64::max);
                (d1.iter().zip(d2).map(|(x, y)| (4.0 * y - x) / 3.0).collect(), num / den)
            },
        )?;
        for i in 0..d {
            for j in 0..d {
                jac[i][j] += dv[i] * e[j];
            }
        }
    }
    Ok(jac)
}

/// `L_v ω` at `ξ` in frame coordinates, by central differences of the pullback
/// of `ω` under the linearized flow `x ↦ x + t v(x)` and Richardson over `t, t/2`.
///
/// `form` returns the ambient representative at a unit point, which must kill
/// the radial direction.
pub fn lie_derivative(
    xi: &[f64],
    frame: &[Vec<f64>],
    reeb: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    form: &dyn Fn(&[f64]) -> Result<AlternatingForm>,
    cfg: &LieConfig,
) -> Result<AlternatingForm> {
    let d = xi.len();
    let v0 = reeb(xi)?;
    let dv = field_jacobian(xi, frame, cfg.field_step, reeb)?;
    let pulled = |t: f64| -> Result<AlternatingForm> {
        let x: Vec<f64> = xi.iter().zip(&v0).map(|(a, b)| a + t * b).collect();
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let xh: Vec<f64> = x.iter().map(|c| c / r).collect();
        let w = form(&xh)?;
        let k = w.degree() as i32;
        let cols: Vec<Vec<f64>> = frame
            .iter()
            .map(|e| (0..d).map(|i| e[i] + t * (0..d).map(|j| dv[i][j] * e[j]).sum::<f64>()).collect())
            .collect();
        Ok(&w.restrict(&cols)? * r.powi(-k))
    };
    let t = cfg.flow_step;
    let d_t = lin_comb(&pulled(t)?, &pulled(-t)?, 0.5 / t, -0.5 / t);
    let d_h = lin_comb(&pulled(t / 2.0)?, &pulled(-t / 2.0)?, 1.0 / t, -1.0 / t);
    let scale = form(xi)?.restrict(frame)?.norm().max(d_h.norm());
    let change = (&d_t - &d_h).norm() / (1e-12 + scale);
    if change > 1e-2 {
        return Err(Error::FlowStepUnstable { change });
    }
    Ok(lin_comb(&d_h, &d_t, 4.0 / 3.0, -1.0 / 3.0))
}

/// Exterior derivative at `ξ` in frame coordinates of a field of tangential
/// forms, from central differences of its `π`-pullback along the frame.
pub fn exterior_derivative_fd(
    xi: &[f64],
    frame: &[Vec<f64>],
    form: &dyn Fn(&[f64]) -> Result<AlternatingForm>,
    step: f64,
) -> Result<AlternatingForm> {
    let d = xi.len();
    let pulled = |x: &[f64]| -> Result<AlternatingForm> {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let xh: Vec<f64> = x.iter().map(|c| c / r).collect();
        let w = form(&xh)?;
        let k = w.degree() as i32;
        Ok(&w * r.powi(-k))
    };
    let shifted = |e: &[f64], s: f64| -> Vec<f64> { xi.iter().zip(e).map(|(a, b)| a + s * b).collect() };
    let mut acc: Option<AlternatingForm> = None;
    for e in frame {
        let d1 = lin_comb(&pulled(&shifted(e, step))?, &pulled(&shifted(e, -step))?, 0.5 / step, -0.5 / step);
        let d2 =
            lin_comb(&pulled(&shifted(e, step / 2.0))?, &pulled(&shifted(e, -step / 2.0))?, 1.0 / step, -1.0 / step);
        let de = lin_comb(&d2, &d1, 4.0 / 3.0, -1.0 / 3.0);
        let term = AlternatingForm::real_one_form(e).wedge(&de)?;
        acc = Some(match acc {
            Some(a) => &a + &term,
            None => term,
        });
    }
    let total = acc.ok_or(Error::InvalidInput("empty frame".into()))?;
    let _ = d;
    total.restrict(frame)
}

/// Factorization at `ξ` together with `L_v χ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieData {
    pub factorization: FactorizationData,
    pub lie_chi: AlternatingForm,
}

impl LieData {
    pub fn lie_alpha(&self) -> AlternatingForm {
        self.lie_chi.re()
    }

    pub fn lie_beta(&self) -> AlternatingForm {
        self.lie_chi.im()
    }
}

pub fn lie_data(graph: &RadialGraph, xi: &[f64], cfg: &LieConfig) -> Result<LieData> {
    let fd = canonical_factorization(graph, xi, &cfg.factorization)?;
    let reeb =
        |p: &[f64]| -> Result<Vec<f64>> { Ok(canonical_factorization(graph, p, &cfg.factorization)?.reeb_ambient()) };
    let chi = |p: &[f64]| -> Result<AlternatingForm> {
        let f = canonical_factorization(graph, p, &cfg.factorization)?;
        f.ambient(&f.chi)
    };
    let lie_chi = lie_derivative(xi, &fd.frame, &reeb, &chi, cfg)?;
    Ok(LieData { factorization: fd, lie_chi })
}

/// Uncalibrated mean curvature density against `ν` at `ξ`.
pub fn mean_curvature_raw_from(data: &LieData, nu: f64) -> Result<f64> {
    let fd = &data.factorization;
    let n = fd.n();
    let nf = n as f64;
    let (alpha, beta) = (fd.alpha(), fd.beta());
    let (la, lb) = (data.lie_alpha(), data.lie_beta());
    let form = if n % 2 == 1 {
        &beta.wedge(&la)?.wedge(&fd.theta)? * (-(2f64.powi(2 - n as i32)) * nf / (nf + 1.0))
    } else {
        let s = &alpha.wedge(&la)? + &beta.wedge(&lb)?;
        &s.wedge(&fd.theta)? * (-(2f64.powi(1 - n as i32)) * nf / (nf + 1.0))
    };
    Ok(form.top_coefficient().re / nu)
}

pub fn mean_curvature_raw(graph: &RadialGraph, xi: &[f64], cfg: &LieConfig) -> Result<f64> {
    let data = lie_data(graph, xi, cfg)?;
    mean_curvature_raw_from(&data, nu_density(graph, xi, Route::Levi)?)
}

/// Calibrated `h = c_h · h_raw`.
pub fn mean_curvature_h(graph: &RadialGraph, xi: &[f64], cfg: &LieConfig, calibration: &HCalibration) -> Result<f64> {
    Ok(calibration.c_h * mean_curvature_raw(graph, xi, cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HCalibration {
    pub n: usize,
    /// `δA/∫h_raw ν` for the constant deformation of the sphere.
    pub c_h: f64,
    pub sign: i8,
    pub delta_a: Estimate,
    pub integral_h_raw: f64,
}

/// Values of `h_raw` and `ν` at the rule nodes.
pub fn h_raw_values(graph: &RadialGraph, rule: &SphereRule, cfg: &LieConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut h = Vec::with_capacity(rule.len());
    let mut nu = Vec::with_capacity(rule.len());
    for xi in &rule.nodes {
        let v = nu_density(graph, xi, Route::Levi)?;
        let data = lie_data(graph, xi, cfg)?;
        h.push(mean_curvature_raw_from(&data, v)?);
        nu.push(v);
    }
    Ok((h, nu))
}

/// Fixes the constant of `h` by `δA = ∫ f h ν` for `f ≡ 1` on the sphere.
pub fn calibrate_h(n: usize, rule: &SphereRule, cfg: &LieConfig, step: f64) -> Result<HCalibration> {
    let sphere = RadialGraph::sphere(n);
    let d = central_derivatives(|t| functional_a(&RadialGraph::constant(n, t), rule), step)?;
    let (h, nu) = h_raw_values(&sphere, rule, cfg)?;
    let w: Vec<f64> = h.iter().zip(&nu).map(|(a, b)| a * b).collect();
    let integral = rule.integrate_values(&w)?;
    let c_h = d.first.value / integral;
    Ok(HCalibration { n, c_h, sign: if c_h > 0.0 { 1 } else { -1 }, delta_a: d.first, integral_h_raw: integral })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    pub delta_a_fd: Estimate,
    pub delta_a_formula: f64,
    pub delta_v_fd: Estimate,
    pub delta_v_formula: f64,
}

impl FirstVariation {
    pub fn relative_gaps(&self) -> (f64, f64) {
        (
            (self.delta_a_fd.value - self.delta_a_formula).abs() / self.delta_a_formula.abs(),
            (self.delta_v_fd.value - self.delta_v_formula).abs() / self.delta_v_formula.abs(),
        )
    }
}

/// First variations of `A` and `V` at the sphere along `f`, by finite
/// differences and from `∫ f h ν`, `∫ f ν` with `h` sampled at the nodes.
pub fn first_variation_at_sphere(
    f: &RadialGraph,
    rule: &SphereRule,
    h_values: &[f64],
    nu_values: &[f64],
    calibration: &HCalibration,
    step: f64,
) -> Result<FirstVariation> {
    let sphere = RadialGraph::sphere(f.n);
    let da = central_derivatives(|t| functional_a(&sphere.plus(f, t)?, rule), step)?;
    let dv = central_derivatives(|t| functional_v(&sphere.plus(f, t)?, rule), step)?;
    let fv: Vec<f64> = rule.nodes.iter().map(|x| f.f(x)).collect();
    let da_formula: Vec<f64> = (0..fv.len()).map(|i| fv[i] * calibration.c_h * h_values[i] * nu_values[i]).collect();
    let dv_formula: Vec<f64> = (0..fv.len()).map(|i| fv[i] * nu_values[i]).collect();
    Ok(FirstVariation {
        delta_a_fd: da.first,
        delta_a_formula: rule.integrate_values(&da_formula)?,
        delta_v_fd: dv.first,
        delta_v_formula: rule.integrate_values(&dv_formula)?,
    })
}

pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SasakiEinsteinReport {
    /// Least-squares `λ` in `L_v α = λ β`, `L_v β = -λ α`.
    pub lambda_fit: f64,
    /// `λ` in `L_v χ = λ i χ`.
    pub lambda_se: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha_norm: f64,
    pub beta_norm: f64,
    pub h_mean: f64,
    pub h_spread: f64,
    /// `8 h / 3` with the calibrated `h`.
    pub lambda_from_h: f64,
}

impl SasakiEinsteinReport {
    pub fn relative_residual(&self) -> f64 {
        self.gamma1.max(self.gamma2) / self.alpha_norm.max(self.beta_norm)
    }
}

fn dot(a: &AlternatingForm, b: &AlternatingForm) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x * y.conj()).re).sum()
}

pub fn sasaki_einstein_residuals(
    graph: &RadialGraph,
    rule: &SphereRule,
    cfg: &LieConfig,
    calibration: &HCalibration,
) -> Result<SasakiEinsteinReport> {
    if graph.n != 3 {
        return Err(Error::InvalidInput("Sasaki–Einstein residuals are defined for n = 3".into()));
    }
    let mut data = Vec::with_capacity(rule.len());
    let mut h = Vec::with_capacity(rule.len());
    for xi in &rule.nodes {
        let d = lie_data(graph, xi, cfg)?;
        let nu = nu_density(graph, xi, Route::Levi)?;
        h.push(calibration.c_h * mean_curvature_raw_from(&d, nu)?);
        data.push(d);
    }
    let integrate = |f: &dyn Fn(&LieData) -> f64| -> Result<f64> {
        let v: Vec<f64> = data.iter().map(f).collect();
        rule.integrate_values(&v)
    };
    let num = integrate(&|d| {
        let (a, b) = (d.factorization.alpha(), d.factorization.beta());
        dot(&d.lie_alpha(), &b) - dot(&d.lie_beta(), &a)
    })?;
    let den = integrate(&|d| {
        let (a, b) = (d.factorization.alpha(), d.factorization.beta());
        dot(&a, &a) + dot(&b, &b)
    })?;
    let lambda = num / den;
    let se_num = integrate(&|d| {
        let ichi = d.factorization.chi.scale(C64::new(0.0, 1.0));
        dot(&d.lie_chi, &ichi)
    })?;
    let g1 = integrate(&|d| {
        let r = &d.lie_alpha() - &(&d.factorization.beta() * lambda);
        dot(&r, &r)
    })?;
    let g2 = integrate(&|d| {
        let r = &d.lie_beta() + &(&d.factorization.alpha() * lambda);
        dot(&r, &r)
    })?;
    let an = integrate(&|d| dot(&d.factorization.alpha(), &d.factorization.alpha()))?;
    let bn = integrate(&|d| dot(&d.factorization.beta(), &d.factorization.beta()))?;
    let h_mean = h.iter().sum::<f64>() / h.len() as f64;
    Ok(SasakiEinsteinReport {
        lambda_fit: lambda,
        lambda_se: se_num / den,
        gamma1: g1.sqrt(),
        gamma2: g2.sqrt(),
        alpha_norm: an.sqrt(),
        beta_norm: bn.sqrt(),
        h_mean,
        h_spread: relative_spread(&h),
        lambda_from_h: 8.0 * h_mean / 3.0,
    })
}

/// Frame helper for callers that only hold a point.
pub fn frame_at(xi: &[f64]) -> Vec<Vec<f64>> {
    tangent_frame(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{harmonic_basis, Part, RealField};
    use crate::quadrature::{product_rule_s3, qmc_rule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / r).collect()
    }

    fn perturbed(n: usize, seed: u64) -> RadialGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for (p, q) in [(1, 1), (2, 0), (2, 2)] {
            let e = harmonic_basis(n, p, q).unwrap().elements[0].clone();
            terms.push(RealField::new(Part::Re, 0.05 * rng.random_range(-1.0..1.0), e));
        }
        RadialGraph::new(n, terms).unwrap()
    }

    #[test]
    fn lie_derivative_of_chi_on_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            for _ in 0..3 {
                let xi = random_unit(&mut rng, n);
                let d = lie_data(&RadialGraph::sphere(n), &xi, &LieConfig::default()).unwrap();
                // The flow e^{it} rescales Ψ by e^{int}.
                let want = d.factorization.chi.scale(C64::new(0.0, n as f64));
                assert!((&d.lie_chi - &want).norm() < 1e-6 * want.norm(), "{}", (&d.lie_chi - &want).norm());
            }
        }
    }

    #[test]
    fn reeb_preserves_theta_off_the_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = LieConfig::default();
        for n in [2, 3] {
            let g = perturbed(n, 10 + n as u64);
            let xi = random_unit(&mut rng, n);
            let fd = canonical_factorization(&g, &xi, &cfg.factorization).unwrap();
            let reeb = |p: &[f64]| Ok(canonical_factorization(&g, p, &cfg.factorization)?.reeb_ambient());
            let theta = |p: &[f64]| {
                let f = canonical_factorization(&g, p, &cfg.factorization)?;
                f.ambient(&f.theta)
            };
            let l = lie_derivative(&xi, &fd.frame, &reeb, &theta, &cfg).unwrap();
            assert!(l.norm() < 1e-6, "{}", l.norm());
        }
    }

    #[test]
    fn exterior_derivative_matches_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = FactorizationConfig::default();
        for n in [2, 3] {
            let g = perturbed(n, 20 + n as u64);
            let xi = random_unit(&mut rng, n);
            let fd = canonical_factorization(&g, &xi, &cfg).unwrap();
            let theta = |p: &[f64]| {
                let f = canonical_factorization(&g, p, &cfg)?;
                f.ambient(&f.theta)
            };
            let dth = exterior_derivative_fd(&xi, &fd.frame, &theta, 1e-3).unwrap();
            assert!((&dth - &fd.dtheta).norm() < 1e-6 * fd.dtheta.norm(), "{}", (&dth - &fd.dtheta).norm());
            // Ψ|_M is closed.
            let psi = |p: &[f64]| {
                let f = canonical_factorization(&g, p, &cfg)?;
                f.ambient(&f.psi)
            };
            let dpsi = exterior_derivative_fd(&xi, &fd.frame, &psi, 1e-3).unwrap();
            assert!(dpsi.norm() < 1e-6 * fd.psi.norm(), "{}", dpsi.norm());
        }
    }

    #[test]
    fn raw_mean_curvature_of_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [2usize, 3] {
            let xi = random_unit(&mut rng, n);
            let h = mean_curvature_raw(&RadialGraph::sphere(n), &xi, &LieConfig::default()).unwrap();
            let want = (n * n) as f64 / (n as f64 + 1.0);
            assert!((h - want).abs() < 1e-6, "n={n}: {h}");
        }
    }

    #[test]
    fn calibration_and_first_variation_n2() {
        let rule = product_rule_s3(4);
        let cfg = LieConfig::default();
        let cal = calibrate_h(2, &rule, &cfg, 5e-2).unwrap();
        assert!((cal.c_h - 2.0).abs() < 1e-5, "{cal:?}");
        let (h, nu) = h_raw_values(&RadialGraph::sphere(2), &rule, &cfg).unwrap();
        assert!(relative_spread(&h) < 1e-4);
        let e = harmonic_basis(2, 2, 0).unwrap().elements[0].clone();
        let f = RadialGraph::constant(2, 0.7).with_term(RealField::new(Part::Re, 0.4, e)).unwrap();
        let fv = first_variation_at_sphere(&f, &rule, &h, &nu, &cal, 5e-2).unwrap();
        let (ga, gv) = fv.relative_gaps();
        assert!(ga < 0.01 && gv < 0.01, "{fv:?}");
    }

    #[test]
    fn sasaki_einstein_on_s5() {
        let rule = qmc_rule(3, 24, 7);
        let cfg = LieConfig::default();
        let cal =
            HCalibration { n: 3, c_h: 2.0, sign: 1, delta_a: Estimate { value: 0.0, error: 0.0 }, integral_h_raw: 0.0 };
        let rep = sasaki_einstein_residuals(&RadialGraph::sphere(3), &rule, &cfg, &cal).unwrap();
        assert!((rep.lambda_fit.abs() - 3.0).abs() < 1e-3, "{rep:?}");
        assert!((rep.lambda_se - 3.0).abs() < 1e-3, "{rep:?}");
        assert!(rep.relative_residual() < 1e-4, "{rep:?}");
        assert!(rep.h_spread < 1e-4);
        let far = perturbed(3, 99).scaled(4.0);
        if let Ok(r) = sasaki_einstein_residuals(&far, &rule, &cfg, &cal) {
            assert!(r.relative_residual() > 1e-3, "{r:?}");
        }
    }
}
