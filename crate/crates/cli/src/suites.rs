use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crvol::affine::{
    affine_report, cylinder_compatibility, random_unimodular, sl_invariance_check, AffineReport, ChartConfig,
    ConvexBody, ConvexGraph,
};
use crvol::alt_forms::C64;
use crvol::error::Result;
use crvol::forms5::{
    factorization_identity_residual, poisson_av_integrand, polarization_check, symmetry_residual, symplectic_pairing,
    wedge_identity_residual, PolyForm, ThreeForm5,
};
use crvol::hypersurface::{
    defining_jet, functional_a, functional_r, functional_v, mat_vec, nu_density, nu_levi_on_frame, nu_values,
    radial_map_jacobian, tangent_frame, RadialGraph, Route,
};
use crvol::quadrature::{ball_product_rule, ball_rule, product_rule_s3, qmc_rule};
use crvol::reduction::{
    growth_scan, holder_bound, reduced_a, reduced_r, reduced_v, KahlerPotential, PluriharmonicDatum, FIBER_LENGTH,
};
use crvol::variation::{
    bidegrees_up_to, calibrate_h, canonical_factorization, derivative_r, first_variation_at_sphere, h_raw_values,
    measured_q_replicated, predicted_q, relative_spread, sasaki_einstein_residuals, spectrum_direction,
    spectrum_report, LieConfig, SpectrumReport,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub values: BTreeMap<String, f64>,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!("[{}] AC{:02} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub criteria: Vec<Criterion>,
    /// File name and contents of plot-ready tables.
    pub tables: Vec<(String, String)>,
    pub extras: BTreeMap<String, Value>,
}

impl SuiteOutput {
    pub fn merge(&mut self, other: SuiteOutput) {
        self.criteria.extend(other.criteria);
        self.tables.extend(other.tables);
        self.extras.extend(other.extras);
    }

    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

struct Check {
    pass: bool,
    detail: String,
    values: BTreeMap<String, f64>,
}

impl Check {
    fn new() -> Self {
        Self { pass: true, detail: String::new(), values: BTreeMap::new() }
    }

    /// Records `value` and requires `ok`.
    fn require(&mut self, key: &str, value: f64, ok: bool) {
        self.values.insert(key.to_string(), value);
        if !self.detail.is_empty() {
            self.detail.push_str(", ");
        }
        self.detail.push_str(&format!("{key}={value:.3e}{}", if ok { "" } else { " (!)" }));
        self.pass &= ok;
    }
}

fn criterion(id: u8, name: &str, body: impl FnOnce(&mut Check) -> Result<()>) -> Criterion {
    let mut c = Check::new();
    if let Err(e) = body(&mut c) {
        c.pass = false;
        if !c.detail.is_empty() {
            c.detail.push_str(", ");
        }
        c.detail.push_str(&format!("error: {e}"));
    }
    Criterion { id, name: name.to_string(), pass: c.pass, detail: c.detail, values: c.values }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn s3(level: usize) -> crvol::quadrature::SphereRule {
    product_rule_s3(level.max(2))
}

pub fn normalization(cfg: &RunConfig) -> Criterion {
    let tol = &cfg.tolerances;
    criterion(1, "normalization", |c| {
        let rule = s3(cfg.level);
        let sphere = RadialGraph::sphere(2);
        let a = functional_a(&sphere, &rule)?;
        let v = functional_v(&sphere, &rule)?;
        c.require("S3.A_err", (a - 2.0 * PI * PI).abs(), (a - 2.0 * PI * PI).abs() <= tol.normalization_exact);
        c.require("S3.V_err", (v - PI * PI / 2.0).abs(), (v - PI * PI / 2.0).abs() <= tol.normalization_exact);
        let q = qmc_rule(3, cfg.count, cfg.seed);
        let s5 = RadialGraph::sphere(3);
        let nu = nu_values(&s5, &q, Route::Levi)?;
        let (a5, se) = q.integrate_with_error(&nu)?;
        let v5 = functional_v(&s5, &q)?;
        // Round-off floor for integrands that are constant on the nodes.
        let floor = 1e-12 * PI.powi(3);
        let da = (a5 - PI.powi(3)).abs();
        let dv = (v5 - PI.powi(3) / 6.0).abs();
        c.require("S5.A_err", da, da <= tol.normalization_sigmas * se + floor);
        c.require("S5.A_se", se, true);
        c.require("S5.V_err", dv, dv <= floor);
        Ok(())
    })
}

pub fn scale_invariance(cfg: &RunConfig) -> Criterion {
    criterion(2, "scale invariance", |c| {
        let rule = s3(cfg.level.min(10));
        let mut worst = 0.0f64;
        for k in 0..cfg.sizes.scale_graphs {
            let g = RadialGraph::random(2, cfg.seed.wrapping_add(k as u64), 0.1)?;
            let r = functional_r(&g, &rule)?;
            for shift in [-0.3, 0.5] {
                worst = worst.max((functional_r(&g.shifted(shift), &rule)? / r - 1.0).abs());
            }
        }
        c.require("max_rel_change", worst, worst <= cfg.tolerances.scale_invariance);
        Ok(())
    })
}

pub fn criticality(cfg: &RunConfig) -> Criterion {
    criterion(3, "criticality of the sphere", |c| {
        let rule = s3(cfg.level);
        let sphere = RadialGraph::sphere(2);
        let (mut worst, mut largest) = (0.0f64, 0.0f64);
        for k in 0..cfg.sizes.criticality_directions {
            let dir = RadialGraph::random(2, cfg.seed.wrapping_add(100 + k as u64), 0.5)?;
            let d = derivative_r(&sphere, &dir, 1, &rule, cfg.step(2))?;
            worst = worst.max(d.value.abs() / d.error);
            largest = largest.max(d.value.abs());
        }
        c.require("max_|dR|/err", worst, worst <= cfg.tolerances.criticality_sigmas);
        c.require("max_|dR|", largest, true);
        Ok(())
    })
}

/// Re-derives ratios and flags of a spectrum report with the configured band,
/// null fraction and `c_norm` factor.
pub fn apply_spectrum_tolerances(rep: &mut SpectrumReport, band: f64, null_fraction: f64, c_norm_factor: f64) {
    rep.c_norm *= c_norm_factor;
    for r in &mut rep.rows {
        r.q_predicted *= c_norm_factor;
        r.ratio = if r.q_predicted != 0.0 { Some(r.q_measured.value / r.q_predicted) } else { None };
        let null = r.q_measured.value.abs() <= null_fraction * rep.reference_q_per_norm * r.norm2;
        r.within_tolerance = match r.ratio {
            Some(x) => (x - 1.0).abs() <= band,
            None => null,
        };
        if (r.p, r.q) != (2, 2) {
            r.measured_sign = if null {
                0
            } else if r.q_measured.value > 0.0 {
                1
            } else {
                -1
            };
        }
    }
    rep.flagged = rep.rows.iter().filter(|r| !r.within_tolerance).map(|r| (r.p, r.q)).collect();
}

/// Zero when `p = 1` or `q = 1`, positive on the remaining `h^{p,0}`, `h^{0,q}`, negative otherwise.
pub fn expected_sign(p: usize, q: usize) -> i8 {
    if p == 1 || q == 1 {
        0
    } else if p == 0 || q == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N3Row {
    pub p: usize,
    pub q: usize,
    pub norm2: f64,
    pub q_measured: f64,
    pub q_error: f64,
    pub q_predicted: f64,
    pub within: bool,
}

/// Spectrum table for `n = 2`, the `n = 3` spot checks and the sign pattern.
pub fn spectrum(cfg: &RunConfig) -> SuiteOutput {
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let mut table: Option<SpectrumReport> = None;
    let ac4 = criterion(4, "second-variation spectrum", |c| {
        let mut rep = spectrum_report(2, &bidegrees_up_to(cfg.sizes.spectrum_degree), &s3(cfg.level), cfg.step(2))?;
        apply_spectrum_tolerances(&mut rep, tol.spectrum_band, tol.spectrum_null_fraction, cfg.c_norm_factor);
        let worst = rep.rows.iter().filter_map(|r| r.ratio).map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        let null = rep
            .rows
            .iter()
            .filter(|r| r.ratio.is_none())
            .map(|r| r.q_measured.value.abs() / (rep.reference_q_per_norm * r.norm2))
            .fold(0.0, f64::max);
        c.require("n2.max_|ratio-1|", worst, worst <= tol.spectrum_band);
        c.require("n2.max_null_fraction", null, null <= tol.spectrum_null_fraction);
        c.require("n2.flagged", rep.flagged.len() as f64, rep.flagged.is_empty());
        let seeds: Vec<u64> = (0..cfg.sizes.n3_replicas as u64).map(|s| cfg.seed.wrapping_add(700 + s)).collect();
        let mut rows = Vec::new();
        for (p, q) in [(2, 2), (2, 0)] {
            let (field, _) = spectrum_direction(3, p, q)?;
            let norm2 = field.norm2();
            let dir = RadialGraph::from_field(field)?;
            let e = measured_q_replicated(&dir, cfg.sizes.n3_count, &seeds, cfg.step(3))?;
            let pred = predicted_q(3, p, q, norm2)? * cfg.c_norm_factor;
            let within = (e.value - pred).abs() <= tol.spectrum_n3_sigmas * e.error;
            c.require(&format!("n3.({p},{q}).dev/err"), (e.value - pred).abs() / e.error, within);
            rows.push(N3Row { p, q, norm2, q_measured: e.value, q_error: e.error, q_predicted: pred, within });
        }
        let mut csv = String::from("n,p,q,norm2,Q_measured,Q_err,Q_predicted\n");
        for r in &rows {
            csv.push_str(&format!(
                "3,{},{},{:.12e},{:.12e},{:.6e},{:.12e}\n",
                r.p, r.q, r.norm2, r.q_measured, r.q_error, r.q_predicted
            ));
        }
        out.tables.push(("spectrum.csv".into(), rep.to_csv()));
        out.tables.push(("spectrum_n3.csv".into(), csv));
        out.extras.insert("spectrum_n3".into(), to_json(&rows));
        table = Some(rep);
        Ok(())
    });
    out.criteria.push(ac4);
    let ac5 = criterion(5, "sign pattern", |c| {
        let rep = table.as_ref().ok_or(crvol::error::Error::InvalidInput("spectrum table unavailable".into()))?;
        let mut mismatches = 0usize;
        for r in &rep.rows {
            let want = expected_sign(r.p, r.q);
            if r.predicted_sign != want || r.measured_sign != want {
                mismatches += 1;
            }
        }
        c.require("rows", rep.rows.len() as f64, !rep.rows.is_empty());
        c.require("mismatches", mismatches as f64, mismatches == 0);
        Ok(())
    });
    out.criteria.push(ac5);
    if let Some(rep) = table {
        out.extras.insert("spectrum".into(), to_json(&rep));
    }
    out
}

fn route_gap_at(g: &RadialGraph, xi: &[f64]) -> Result<f64> {
    let a = nu_density(g, xi, Route::Levi)?;
    let b = nu_density(g, xi, Route::Polar)?;
    Ok((a - b).abs() / a.abs())
}

pub fn route_agreement(cfg: &RunConfig) -> Criterion {
    criterion(6, "two-route density agreement", |c| {
        let mut worst = 0.0f64;
        let mut nodes = 0usize;
        for k in 0..cfg.sizes.route_graphs {
            let n = 2 + k % 2;
            let g = RadialGraph::random(n, cfg.seed.wrapping_add(200 + k as u64), 0.15)?;
            for xi in &qmc_rule(n, cfg.sizes.route_nodes, cfg.seed.wrapping_add(k as u64)).nodes {
                worst = worst.max(route_gap_at(&g, xi)?);
                nodes += 1;
            }
        }
        c.require("nodes", nodes as f64, nodes > 0);
        c.require("max_rel_gap", worst, worst <= cfg.tolerances.route_gap);
        Ok(())
    })
}

/// Density change under `F → hF` with `h = 1 + kF` near `M`, evaluated on the
/// pushed-forward sphere frame.
pub fn rescaling_invariance(cfg: &RunConfig) -> Criterion {
    criterion(7, "invariance under F -> hF", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(300));
        let mut worst = 0.0f64;
        for n in [2usize, 3] {
            let d = 2 * n;
            let g = RadialGraph::random(n, cfg.seed.wrapping_add(310 + n as u64), 0.15)?;
            let xi = qmc_rule(n, 1, cfg.seed.wrapping_add(320 + n as u64)).nodes[0].clone();
            let jet = defining_jet(&g, &xi)?;
            let jm = radial_map_jacobian(&g, &xi);
            let pushed: Vec<Vec<f64>> = tangent_frame(&xi).iter().map(|e| mat_vec(&jm, e)).collect();
            let base = nu_levi_on_frame(&jet, &xi, &pushed)?;
            for _ in 0..cfg.sizes.rescaling_h {
                let k0 = rng.random_range(-2.0..2.0);
                let dk: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let dh: Vec<f64> = jet.grad_real.iter().map(|gr| k0 * gr).collect();
                let hh: Vec<Vec<f64>> = (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|j| k0 * jet.hess_real[i][j] + dk[i] * jet.grad_real[j] + jet.grad_real[i] * dk[j])
                            .collect()
                    })
                    .collect();
                let sub = jet.multiplied(1.0, &dh, &hh);
                let w: Vec<f64> = (0..d).map(|i| xi[i] + 0.5 * rng.random_range(-1.0..1.0)).collect();
                let v = nu_levi_on_frame(&sub, &w, &pushed)?;
                worst = worst.max((v - base).abs() / base.abs());
            }
        }
        c.require("max_rel_change", worst, worst <= cfg.tolerances.rescaling);
        Ok(())
    })
}

pub fn first_variation(cfg: &RunConfig) -> SuiteOutput {
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let lie = LieConfig::default();
    let ac = criterion(8, "first variation and mean curvature", |c| {
        let rule = s3(6);
        let cal = calibrate_h(2, &rule, &lie, cfg.step(2))?;
        let (h, nu) = h_raw_values(&RadialGraph::sphere(2), &rule, &lie)?;
        let (mut ga, mut gv) = (0.0f64, 0.0f64);
        for k in 0..cfg.sizes.first_variation_fields {
            let f = RadialGraph::random(2, cfg.seed.wrapping_add(400 + k as u64), 0.3)?.shifted(0.5);
            let fv = first_variation_at_sphere(&f, &rule, &h, &nu, &cal, cfg.step(2))?;
            let (a, v) = fv.relative_gaps();
            ga = ga.max(a);
            gv = gv.max(v);
        }
        c.require("c_h", cal.c_h, true);
        c.require("dA_gap", ga, ga <= tol.first_variation);
        c.require("dV_gap", gv, gv <= tol.first_variation);
        let spread2 = relative_spread(&h);
        c.require("h_spread_S3", spread2, spread2 <= tol.h_spread);
        let q = qmc_rule(3, cfg.sizes.se_nodes, cfg.seed.wrapping_add(410));
        let cal3 = calibrate_h(3, &q, &lie, cfg.step(3))?;
        let se = sasaki_einstein_residuals(&RadialGraph::sphere(3), &q, &lie, &cal3)?;
        c.require("h_spread_S5", se.h_spread, se.h_spread <= tol.h_spread);
        c.require("se_residual", se.relative_residual(), se.relative_residual() <= tol.sasaki_einstein);
        let dl = (se.lambda_fit.abs() - 3.0).abs().max((se.lambda_se.abs() - 3.0).abs());
        c.require("|lambda|-3", dl, dl <= tol.lambda);
        out.extras.insert("sasaki_einstein".into(), to_json(&se));
        out.extras.insert("h_calibration".into(), json!({ "n2": to_json(&cal), "n3": to_json(&cal3) }));
        Ok(())
    });
    out.criteria.push(ac);
    out
}

fn affine_csv(rows: &[AffineReport]) -> String {
    let mut s = String::from(AffineReport::csv_header());
    for r in rows {
        s.push_str(&r.csv_row());
    }
    s
}

pub fn affine(cfg: &RunConfig) -> SuiteOutput {
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let ac = criterion(9, "affine bridge", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(500));
        let mut graphs =
            vec![ConvexGraph::paraboloid(2), ConvexGraph::quadratic(&[0.5, 2.0]), ConvexGraph::paraboloid(1)];
        graphs.extend((0..4).map(|k| ConvexGraph::random_quartic(2, cfg.seed.wrapping_add(510 + k))));
        graphs.push(ConvexGraph::random_quartic(1, cfg.seed.wrapping_add(520)));
        let mut gap = 0.0f64;
        for g in &graphs {
            for _ in 0..cfg.sizes.cylinder_points {
                let x: Vec<f64> = (0..g.dim).map(|_| rng.random_range(-0.5..0.5)).collect();
                gap = gap.max(cylinder_compatibility(g, &x)?.gap);
            }
        }
        c.require("cylinder_gap", gap, gap <= tol.cylinder_gap);

        let fine = ChartConfig { resolution: cfg.sizes.affine_resolution, ..ChartConfig::default() };
        let mut dev = 0.0f64;
        for k in 0..cfg.sizes.sl_maps {
            let t = random_unimodular(cfg.seed.wrapping_add(530 + k as u64), 5.0);
            let body = if k % 2 == 0 {
                ConvexBody::ball()
            } else {
                ConvexBody::perturbed_ball(cfg.seed.wrapping_add(k as u64), 0.05)
            };
            dev = dev.max(sl_invariance_check(&body, t, &fine)?);
        }
        c.require("sl_deviation", dev, dev <= tol.sl_invariance);

        let sweep = ChartConfig { resolution: cfg.sizes.sweep_resolution, ..ChartConfig::default() };
        let mut rows = vec![affine_report(&ConvexBody::ball(), &sweep)?];
        for (a, b) in [(1.5, 1.0), (2.0, 0.75)] {
            let m = [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, 1.0 / (a * b)]];
            rows.push(affine_report(&ConvexBody::ellipsoid(&format!("ellipsoid-{a}-{b}"), m), &sweep)?);
        }
        let r_ball = rows[0].r_aff;
        let mut margin = f64::INFINITY;
        for k in 0..cfg.sizes.perturbed_seeds {
            let rep = affine_report(&ConvexBody::perturbed_ball(cfg.seed.wrapping_add(540 + k as u64), 0.05), &sweep)?;
            margin = margin.min(r_ball - rep.r_aff);
            rows.push(rep);
        }
        c.require("min_R_ball-R_pert", margin, margin > 0.0);
        out.tables.push(("affine_sweep.csv".into(), affine_csv(&rows)));
        out.extras.insert("affine_sweep".into(), to_json(&rows));
        Ok(())
    });
    out.criteria.push(ac);
    out
}

pub fn reduction(cfg: &RunConfig) -> SuiteOutput {
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let ac10 = criterion(10, "symplectic reduction", |c| {
        let rule = s3(cfg.sizes.reduction_level);
        let shape = s3(8);
        let r_sphere = crvol::hypersurface::r_from(2.0 * PI * PI, PI * PI / 2.0, 2);
        let (mut bridge, mut excess, mut slack) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
        let mut bounds = Vec::new();
        for k in 0..cfg.sizes.kahler_seeds {
            let f = KahlerPotential::random(cfg.seed.wrapping_add(600 + k as u64), 2, 0.5, &shape)?;
            if k < 3 {
                let a = FIBER_LENGTH * reduced_a(&f, &rule)?;
                let v = FIBER_LENGTH * reduced_v(&f, &rule)?;
                bridge = bridge.max((a / functional_a(&f.graph, &rule)? - 1.0).abs());
                bridge = bridge.max((v / functional_v(&f.graph, &rule)? - 1.0).abs());
            }
            excess = excess.max(reduced_r(&f, &rule)? / r_sphere - 1.0);
            let h = holder_bound(&f, &rule)?;
            slack = slack.min(h.slack);
            bounds.push(h);
        }
        let zero = holder_bound(&KahlerPotential::zero(), &rule)?;
        c.require("bridge_gap", bridge, bridge <= tol.reduction_bridge);
        c.require("max_R/R_S3-1", excess, excess <= tol.reduction_maximum);
        c.require("min_slack", slack, slack >= -tol.holder_slack);
        c.require("slack_at_0", zero.slack.abs(), zero.slack.abs() <= tol.holder_slack);
        out.extras.insert("holder_bounds".into(), to_json(&bounds));
        Ok(())
    });
    out.criteria.push(ac10);
    let ac11 = criterion(11, "pluriharmonic growth", |c| {
        let d = PluriharmonicDatum::linear(2, 0, C64::new(1.0, 0.0));
        let level = cfg.sizes.growth_level;
        let scan = growth_scan(&d, 10, &s3(level), &ball_product_rule(level, level), &qmc_rule(2, 4000, cfg.seed))?;
        c.require(
            "increasing_from_3",
            if scan.strictly_increasing_from(3) { 1.0 } else { 0.0 },
            scan.strictly_increasing_from(3),
        );
        c.require("min_log_slope", scan.log_slopes()[2..].iter().cloned().fold(f64::INFINITY, f64::min), true);
        let sphere = qmc_rule(2, cfg.sizes.mc_count, cfg.seed.wrapping_add(800));
        let ball = ball_rule(2, cfg.sizes.mc_count, cfg.seed.wrapping_add(801));
        let mut worst = 0.0f64;
        for row in scan.rows.iter().filter(|r| r.k >= 3) {
            let dk = d.scaled(row.k as f64);
            let sv: Vec<f64> = sphere.nodes.iter().map(|x| (2.0 * dk.g(x) / 3.0).exp()).collect();
            let (a, ea) = sphere.integrate_with_error(&sv)?;
            let (v, ev) = ball.integrate_with_error(|x| dk.g(x).exp())?;
            worst = worst.max((a - row.a).abs() / ea).max((v - row.v).abs() / ev);
        }
        c.require("max_dev/se", worst, worst <= tol.mc_sigmas);
        c.require("generic_maximum", if scan.genericity.generic { 1.0 } else { 0.0 }, scan.genericity.generic);
        out.tables.push(("growth_scan.csv".into(), scan.to_csv()));
        out.extras.insert("growth_scan".into(), to_json(&scan));
        Ok(())
    });
    out.criteria.push(ac11);
    out
}

pub fn forms(cfg: &RunConfig) -> SuiteOutput {
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let lie = LieConfig::default();
    let ac = criterion(12, "forms on five-manifolds", |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(900));
        let mut pol = 0.0f64;
        for _ in 0..cfg.sizes.forms_seeds {
            let (p, q) = (ThreeForm5::random(&mut rng), ThreeForm5::random(&mut rng));
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            pol = pol
                .max(polarization_check(&p, &q, &w)?)
                .max(symmetry_residual(&p, &q)?)
                .max(wedge_identity_residual(&p, &w)?);
        }
        c.require("polarization", pol, pol <= tol.polarization);

        let nodes = qmc_rule(3, cfg.sizes.forms_nodes, cfg.seed.wrapping_add(910));
        let mut fac = 0.0f64;
        for g in [RadialGraph::sphere(3), RadialGraph::random(3, cfg.seed.wrapping_add(920), 0.05)?] {
            for x in &nodes.nodes {
                fac = fac.max(factorization_identity_residual(&canonical_factorization(&g, x, &lie.factorization)?)?);
            }
        }
        c.require("factorization", fac, fac <= tol.factorization);

        let rule = qmc_rule(3, cfg.sizes.pairing_count, cfg.seed.wrapping_add(930));
        let s1 = PolyForm::random(6, 2, 2, &mut rng)?;
        let s2 = PolyForm::random(6, 2, 2, &mut rng)?;
        let lam = PolyForm::random(6, 1, 2, &mut rng)?;
        let (psi1, psi2) = (s1.d()?, s2.d()?);
        let (a, ea) = symplectic_pairing(&s1, &psi2, &rule)?;
        let (b, eb) = symplectic_pairing(&s1.plus(&lam.d()?)?, &psi2, &rule)?;
        let (s, es) = symplectic_pairing(&s2, &psi1, &rule)?;
        let primitive = (a - b).abs() / (ea + eb);
        let skew = (a + s).abs() / (ea + es);
        c.require("primitive_dev/se", primitive, primitive <= tol.pairing_sigmas);
        c.require("skew_dev/se", skew, skew <= tol.pairing_sigmas);

        let p = poisson_av_integrand(&RadialGraph::sphere(3), &nodes, &lie)?;
        c.require("poisson_relative", p.relative(), p.relative() <= tol.poisson);
        out.extras.insert("poisson".into(), to_json(&p));
        Ok(())
    });
    out.criteria.push(ac);
    out
}
