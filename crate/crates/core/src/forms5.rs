//! Quadratic algebra of 3-forms on a 5-dimensional space and the matching
//! integrals over the round `S⁵`.
//!
//! For `φ ∈ Λ³V*` and a volume element `ω₅` the bivector `X` with
//! `i_X ω₅ = φ` gives `φ*φ = (i_X φ) ⊗ ω₅`, independent of `ω₅`. Here
//! `i_{x∧y} ω = ω(x, y, …)`, and with that convention `(φ*φ)(w) = φ ∧ i_w φ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alt_forms::{AlternatingForm, FormVector, C64};
use crate::error::{Error, Result};
use crate::hypersurface::{nu_density, tangent_frame, RadialGraph, Route};
use crate::quadrature::SphereRule;
use crate::variation::curvature::{exterior_derivative_fd, lie_derivative, LieConfig};
use crate::variation::factorization::{canonical_factorization, FactorizationData};

/// Real 3-form on a 5-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeForm5(AlternatingForm);

impl ThreeForm5 {
    pub fn new(form: AlternatingForm) -> Result<Self> {
        if form.dim() != 5 || form.degree() != 3 {
            return Err(Error::DimensionMismatch { expected: 53, found: 10 * form.dim() + form.degree() });
        }
        Ok(Self(form.re()))
    }

    pub fn zero() -> Self {
        Self(AlternatingForm::zero(5, 3).expect("valid shape"))
    }

    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut f = AlternatingForm::zero(5, 3).expect("valid shape");
        for idx in f.slot_indices() {
            f.set(&idx, C64::new(rng.random_range(-1.0..1.0), 0.0)).expect("slot");
        }
        Self(f)
    }

    pub fn form(&self) -> &AlternatingForm {
        &self.0
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn pullback(&self, m: &[Vec<f64>]) -> Result<Self> {
        Self::new(self.0.pullback(m, 5)?)
    }
}

/// Section of `T*M ⊗ Λ⁵T*M` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorDensity {
    pub covector: AlternatingForm,
    pub density: AlternatingForm,
}

impl CovectorDensity {
    /// Components `c_i · ω₁₂₃₄₅`, which do not depend on how the product is split.
    pub fn tensor(&self) -> Vec<f64> {
        let top = self.density.top_coefficient().re;
        self.covector.coeffs().iter().map(|c| c.re * top).collect()
    }

    /// The 5-form `c(w) ω`.
    pub fn evaluate(&self, w: &[f64]) -> Result<AlternatingForm> {
        let c = self.covector.contract(&FormVector::real(w))?.coeffs()[0];
        Ok(self.density.scale(c))
    }

    pub fn pullback(&self, m: &[Vec<f64>]) -> Result<Self> {
        Ok(Self { covector: self.covector.pullback(m, 5)?, density: self.density.pullback(m, 5)? })
    }
}

fn contract2(form: &AlternatingForm, a: usize, b: usize) -> Result<AlternatingForm> {
    let (ea, eb) = (FormVector::basis(5, a), FormVector::basis(5, b));
    form.contract(&ea)?.contract(&eb)
}

/// The bivector `X` with `i_X ω₅ = φ`, as coefficients on pairs `a < b`.
pub fn solve_bivector(phi: &ThreeForm5, omega5: &AlternatingForm) -> Result<Vec<((usize, usize), f64)>> {
    if omega5.top_coefficient().norm() == 0.0 {
        return Err(Error::ZeroVolumeElement);
    }
    let pairs: Vec<(usize, usize)> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
    let slots = phi.0.slot_indices();
    let mut m = DMatrix::<f64>::zeros(slots.len(), pairs.len());
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let img = contract2(omega5, a, b)?;
        for (i, c) in img.coeffs().iter().enumerate() {
            m[(i, j)] = c.re;
        }
    }
    let rhs = DVector::from_iterator(slots.len(), phi.0.coeffs().iter().map(|c| c.re));
    let x = m.lu().solve(&rhs).ok_or(Error::ZeroVolumeElement)?;
    Ok(pairs.into_iter().zip(x.iter().cloned()).collect())
}

/// `φ₁ * φ₂ = (i_{X₁} φ₂) ⊗ ω₅` with `i_{X₁} ω₅ = φ₁`.
pub fn star_bilinear_with(phi1: &ThreeForm5, phi2: &ThreeForm5, omega5: &AlternatingForm) -> Result<CovectorDensity> {
    let x = solve_bivector(phi1, omega5)?;
    let mut covector = AlternatingForm::zero(5, 1)?;
    for ((a, b), c) in x {
        covector = &covector + &(&contract2(&phi2.0, a, b)? * c);
    }
    Ok(CovectorDensity { covector, density: omega5.clone() })
}

pub fn star_quadratic_with(phi: &ThreeForm5, omega5: &AlternatingForm) -> Result<CovectorDensity> {
    star_bilinear_with(phi, phi, omega5)
}

/// `φ*φ` with the coordinate volume element.
pub fn star_quadratic(phi: &ThreeForm5) -> Result<CovectorDensity> {
    star_quadratic_with(phi, &AlternatingForm::top(5, C64::new(1.0, 0.0)))
}

pub fn star_bilinear(phi1: &ThreeForm5, phi2: &ThreeForm5) -> Result<CovectorDensity> {
    star_bilinear_with(phi1, phi2, &AlternatingForm::top(5, C64::new(1.0, 0.0)))
}

fn top_of(cd: &CovectorDensity, w: &[f64]) -> Result<f64> {
    Ok(cd.evaluate(w)?.top_coefficient().re)
}

/// `|[(φ+δφ)*(φ+δφ) - φ*φ - δφ*δφ](w) - 2 δφ ∧ i_w φ|`.
pub fn polarization_check(phi: &ThreeForm5, dphi: &ThreeForm5, w: &[f64]) -> Result<f64> {
    let full = top_of(&star_quadratic(&phi.plus(dphi))?, w)?;
    let a = top_of(&star_quadratic(phi)?, w)?;
    let b = top_of(&star_quadratic(dphi)?, w)?;
    let rhs = dphi.0.wedge(&phi.0.contract(&FormVector::real(w))?)?.top_coefficient().re;
    Ok((full - a - b - 2.0 * rhs).abs())
}

/// `|(φ*φ)(w) - φ ∧ i_w φ|`.
pub fn wedge_identity_residual(phi: &ThreeForm5, w: &[f64]) -> Result<f64> {
    let lhs = top_of(&star_quadratic(phi)?, w)?;
    let rhs = phi.0.wedge(&phi.0.contract(&FormVector::real(w))?)?.top_coefficient().re;
    Ok((lhs - rhs).abs())
}

/// Largest tensor-component gap between `φ₁*φ₂` and `φ₂*φ₁`.
pub fn symmetry_residual(phi1: &ThreeForm5, phi2: &ThreeForm5) -> Result<f64> {
    let a = star_bilinear(phi1, phi2)?.tensor();
    let b = star_bilinear(phi2, phi1)?.tensor();
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Largest gap between `star(P*φ)` and `P*star(φ)` for an invertible `P`.
pub fn covariance_residual(phi: &ThreeForm5, p: &[Vec<f64>]) -> Result<f64> {
    let direct = star_quadratic(&phi.pullback(p)?)?.tensor();
    let moved = star_quadratic(phi)?.pullback(p)?.tensor();
    Ok(direct.iter().zip(&moved).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// `φ = α ∧ θ` from factorization data on a 5-dimensional tangent space.
pub fn alpha_theta(fd: &FactorizationData) -> Result<ThreeForm5> {
    ThreeForm5::new(fd.alpha().wedge(&fd.theta)?)
}

/// Relative gap between `φ*φ` and `θ ⊗ (α² ∧ θ)` at one node.
pub fn factorization_identity_residual(fd: &FactorizationData) -> Result<f64> {
    let phi = alpha_theta(fd)?;
    let lhs = star_quadratic(&phi)?.tensor();
    let a2t = fd.alpha().power(2)?.wedge(&fd.theta)?;
    let rhs = CovectorDensity { covector: fd.theta.re(), density: a2t.re() }.tensor();
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(lhs.iter().zip(&rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale)
}

/// Real polynomial in the ambient coordinates of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub terms: Vec<(Vec<u8>, f64)>,
}

impl Poly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| e.iter().zip(x).fold(*c, |acc, (&p, xi)| acc * xi.powi(p as i32))).sum()
    }

    pub fn derivative(&self, k: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[k] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[k] -= 1;
                (e2, c * e[k] as f64)
            })
            .collect();
        Poly { terms }
    }

    pub fn random(dim: usize, max_degree: usize, count: usize, rng: &mut ChaCha8Rng) -> Poly {
        let terms = (0..count)
            .map(|_| {
                let mut e = vec![0u8; dim];
                for _ in 0..rng.random_range(0..=max_degree) {
                    e[rng.random_range(0..dim)] += 1;
                }
                (e, rng.random_range(-1.0..1.0))
            })
            .collect();
        Poly { terms }
    }
}

/// Differential form on `R^d` with polynomial coefficients, `Σ p_I dx_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyForm {
    pub dim: usize,
    pub degree: usize,
    pub terms: Vec<(Vec<usize>, Poly)>,
}

impl PolyForm {
    pub fn random(dim: usize, degree: usize, max_degree: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let slots = AlternatingForm::zero(dim, degree)?.slot_indices();
        let terms = slots.into_iter().map(|idx| (idx, Poly::random(dim, max_degree, 3, rng))).collect();
        Ok(Self { dim, degree, terms })
    }

    pub fn at(&self, x: &[f64]) -> Result<AlternatingForm> {
        let mut f = AlternatingForm::zero(self.dim, self.degree)?;
        for (idx, p) in &self.terms {
            let basis = AlternatingForm::basis(self.dim, idx)?;
            f = &f + &(&basis * p.eval(x));
        }
        Ok(f)
    }

    /// Exact exterior derivative `Σ ∂_k p_I dx_k ∧ dx_I`.
    pub fn d(&self) -> Result<Self> {
        let mut terms = Vec::new();
        for (idx, p) in &self.terms {
            for k in 0..self.dim {
                if idx.contains(&k) {
                    continue;
                }
                let dp = p.derivative(k);
                if dp.terms.is_empty() {
                    continue;
                }
                let mut full = vec![k];
                full.extend(idx);
                // Sort dx_k in front of dx_I into increasing order.
                let pos = idx.iter().filter(|&&i| i < k).count();
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                full.sort_unstable();
                let dp = Poly { terms: dp.terms.into_iter().map(|(e, c)| (e, c * sign)).collect() };
                terms.push((full, dp));
            }
        }
        Ok(Self { dim: self.dim, degree: self.degree + 1, terms })
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim || other.degree != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, found: other.degree });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { dim: self.dim, degree: self.degree, terms })
    }
}

/// `∫_{S⁵} σ ∧ ψ` and its sampling standard error.
pub fn symplectic_pairing(sigma: &PolyForm, psi: &PolyForm, rule: &SphereRule) -> Result<(f64, f64)> {
    if sigma.degree + psi.degree != 2 * rule.n - 1 || sigma.dim != 2 * rule.n || psi.dim != 2 * rule.n {
        return Err(Error::DimensionMismatch { expected: 2 * rule.n - 1, found: sigma.degree + psi.degree });
    }
    let vals: Vec<f64> = rule
        .nodes
        .iter()
        .map(|x| {
            let frame = tangent_frame(x);
            let top = sigma.at(x)?.restrict(&frame)?.wedge(&psi.at(x)?.restrict(&frame)?)?;
            Ok(top.top_coefficient().re)
        })
        .collect::<Result<_>>()?;
    rule.integrate_with_error(&vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    /// `∫ α∧β∧θ`.
    pub integral: f64,
    /// `∫ α²∧θ`.
    pub reference: f64,
    /// `max |α∧β|` over the nodes.
    pub pointwise_max: f64,
}

impl PoissonReport {
    pub fn relative(&self) -> f64 {
        self.integral.abs() / self.reference.abs()
    }
}

pub fn poisson_av_integrand(graph: &RadialGraph, rule: &SphereRule, cfg: &LieConfig) -> Result<PoissonReport> {
    if graph.n != 3 {
        return Err(Error::InvalidInput("5-dimensional tangent spaces need n = 3".into()));
    }
    poisson_av_from(rule, &|x| {
        let fd = canonical_factorization(graph, x, &cfg.factorization)?;
        Ok((fd.alpha(), fd.beta(), fd.theta.re()))
    })
}

/// The same integrals for arbitrary `(α, β, θ)` in tangent-frame coordinates.
pub fn poisson_av_from(
    rule: &SphereRule,
    fields: &dyn Fn(&[f64]) -> Result<(AlternatingForm, AlternatingForm, AlternatingForm)>,
) -> Result<PoissonReport> {
    let mut abt = Vec::new();
    let mut aat = Vec::new();
    let mut pointwise_max: f64 = 0.0;
    for x in &rule.nodes {
        let (a, b, theta) = fields(x)?;
        let ab = a.wedge(&b)?;
        pointwise_max = pointwise_max.max(ab.norm());
        abt.push(ab.wedge(&theta)?.top_coefficient().re);
        aat.push(a.power(2)?.wedge(&theta)?.top_coefficient().re);
    }
    Ok(PoissonReport { integral: rule.integrate_values(&abt)?, reference: rule.integrate_values(&aat)?, pointwise_max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianField {
    /// `dα` by differentiating the ambient field of `α`.
    pub d_alpha: AlternatingForm,
    /// `L_v α ∧ θ` from the flow.
    pub lie_alpha_theta: AlternatingForm,
    /// `|i_v(L_vα∧θ) - L_vα| / |L_vα|`.
    pub contraction_residual: f64,
    /// `½ α²∧θ` against the frame volume.
    pub nu_phi: f64,
    /// `ν` from the hypersurface.
    pub nu: f64,
}

impl HamiltonianField {
    pub fn route_gap(&self) -> f64 {
        (&self.d_alpha - &self.lie_alpha_theta).norm() / self.lie_alpha_theta.norm().max(f64::MIN_POSITIVE)
    }

    pub fn nu_gap(&self) -> f64 {
        (self.nu_phi - self.nu).abs() / self.nu
    }
}

/// The Hamiltonian direction of `A` at `ξ`, by two routes.
pub fn hamiltonian_a_direction(graph: &RadialGraph, xi: &[f64], cfg: &LieConfig) -> Result<HamiltonianField> {
    let fd = canonical_factorization(graph, xi, &cfg.factorization)?;
    let alpha_field = |p: &[f64]| -> Result<AlternatingForm> {
        let f = canonical_factorization(graph, p, &cfg.factorization)?;
        f.ambient(&f.alpha())
    };
    let reeb =
        |p: &[f64]| -> Result<Vec<f64>> { Ok(canonical_factorization(graph, p, &cfg.factorization)?.reeb_ambient()) };
    let lie_alpha = lie_derivative(xi, &fd.frame, &reeb, &alpha_field, cfg)?.re();
    let d_alpha = exterior_derivative_fd(xi, &fd.frame, &alpha_field, cfg.field_step)?.re();
    let lie_alpha_theta = lie_alpha.wedge(&fd.theta.re())?;
    let contraction_residual =
        (&lie_alpha_theta.contract(&FormVector::real(&fd.reeb))? - &lie_alpha).norm() / lie_alpha.norm();
    let nu_phi = 0.5 * fd.alpha().power(2)?.wedge(&fd.theta)?.top_coefficient().re;
    Ok(HamiltonianField {
        d_alpha,
        lie_alpha_theta,
        contraction_residual,
        nu_phi,
        nu: nu_density(graph, xi, Route::Levi)?,
    })
}
