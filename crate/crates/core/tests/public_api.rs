use std::f64::consts::PI;

use crvol::affine::{affine_report, ChartConfig, ConvexBody};
use crvol::hypersurface::{functional_a, functional_r, GraphJson, RadialGraph};
use crvol::quadrature::{ball_product_rule, product_rule_s3, qmc_rule, SphereRule};
use crvol::reduction::{reduced_a, KahlerPotential, FIBER_LENGTH};

#[test]
fn graph_json_roundtrip_preserves_functionals() {
    let rule = product_rule_s3(8);
    let g = RadialGraph::random(2, 42, 0.1).unwrap();
    let text = serde_json::to_string(&g.to_json()).unwrap();
    let back = RadialGraph::from_json(&serde_json::from_str::<GraphJson>(&text).unwrap()).unwrap();
    assert_eq!(back, g);
    assert_eq!(functional_a(&back, &rule).unwrap(), functional_a(&g, &rule).unwrap());
    assert_eq!(RadialGraph::random(2, 42, 0.1).unwrap(), g);
    assert_ne!(RadialGraph::random(2, 43, 0.1).unwrap(), g);
}

#[test]
fn second_moments_on_spheres_and_ball() {
    // ∫_{S^{2n-1}} x₁² = |S^{2n-1}| / 2n and ∫_{B⁴} x₁² = π²/12.
    let s3 = product_rule_s3(6);
    assert!((s3.integrate(|x| x[0] * x[0]).unwrap() - PI * PI / 2.0).abs() < 1e-12);
    let s5: SphereRule = qmc_rule(3, 20_000, 3);
    let v: Vec<f64> = s5.nodes.iter().map(|x| x[0] * x[0]).collect();
    let (m, se) = s5.integrate_with_error(&v).unwrap();
    assert!((m - PI.powi(3) / 6.0).abs() < 4.0 * se, "{m} {se}");
    let b = ball_product_rule(8, 6);
    assert!((b.integrate(|x| x[0] * x[0]).unwrap() - PI * PI / 12.0).abs() < 1e-12);
}

#[test]
fn round_objects_agree_across_modules() {
    let rule = product_rule_s3(10);
    let sphere = RadialGraph::sphere(2);
    let via_reduction = FIBER_LENGTH * reduced_a(&KahlerPotential::zero(), &rule).unwrap();
    assert!((via_reduction - functional_a(&sphere, &rule).unwrap()).abs() < 1e-12);
    let r = functional_r(&sphere.shifted(0.2), &rule).unwrap();
    assert!((r - functional_r(&sphere, &rule).unwrap()).abs() < 1e-12 * r);
    let ball = affine_report(&ConvexBody::ball(), &ChartConfig { resolution: 160, ..ChartConfig::default() }).unwrap();
    assert!((ball.a_aff / (4.0 * PI) - 1.0).abs() < 1e-7);
    assert!((ball.vol / (4.0 * PI / 3.0) - 1.0).abs() < 1e-7);
}
