use std::sync::Arc;

use adm_toolkit::constraints::{constraint_map_on, mass_current_on, sup_on, InitialDataSet, Variant};
use adm_toolkit::data::schwarzschild_metric;
use adm_toolkit::deform::{deform_to_target, strict_dec_deform, verify_deform_size, DeformConfig};
use adm_toolkit::fields::{Chart, Field, Jet, TypeParams, Valence};
use adm_toolkit::Error;

fn chart() -> Arc<Chart> {
    Chart::new(3, 1.0, 6.0, 25, 4).unwrap()
}

fn euclidean() -> InitialDataSet {
    let c = chart();
    InitialDataSet::new(Field::euclidean(&c), Field::zeros(&c, Valence::CON2, true), TypeParams::default()).unwrap()
}

fn schwarzschild() -> InitialDataSet {
    let c = chart();
    InitialDataSet::new(schwarzschild_metric(&c, 1.0), Field::zeros(&c, Valence::CON2, true), TypeParams::default())
        .unwrap()
}

fn gaussian(chart: &Arc<Chart>, centre: [f64; 3], sigma: f64) -> Field {
    Field::scalar(chart, move |x: &[Jet]| {
        let mut s = Jet::constant(0.0);
        for a in 0..3 {
            let d = x[a] - centre[a];
            s += d * d;
        }
        (s * (-1.0 / (sigma * sigma))).exp()
    })
}

#[test]
fn base_value_target_gives_the_zero_solution() {
    let ids = schwarzschild();
    let region = ids.chart.annulus();
    let (s, v) = constraint_map_on(&ids, (&ids.g, &ids.pi), Variant::Modified, &region).unwrap();
    let sol = deform_to_target(&ids, (&s, &v), &DeformConfig::default()).unwrap();
    assert_eq!(sol.newton_iters, 1);
    assert_eq!(sol.residual_sup, 0.0);
    assert!(sol.coefficients.iter().all(|c| *c == 0.0));
    assert_eq!(verify_deform_size(&sol, 0.0).unwrap(), 0.0);
}

#[test]
fn euclidean_bump_target_is_certified_by_the_constraints_module() {
    let ids = euclidean();
    let c = &ids.chart;
    let lambda = 1e-3;
    let phi = gaussian(c, [0.0, 0.0, 3.5], 0.8);
    let target = (phi.scale(2.0 * lambda), Field::zeros(c, Valence::VECTOR, false));
    let sol = deform_to_target(&ids, (&target.0, &target.1), &DeformConfig::default()).unwrap();
    assert!(sol.residual_sup <= 1e-9);
    assert!(sol.newton_iters <= 10);
    let deformed = sol.deformed().unwrap();
    let mc = mass_current_on(&InitialDataSet { ..deformed.clone() }, &sol.region).unwrap();
    let expected = phi.scale(lambda);
    let dmu = mc.mu.sub(&expected.sample()).unwrap();
    assert!(sup_on(&dmu, 0, &sol.region) <= 1e-6);
    for a in 0..3 {
        assert!(sup_on(&mc.j, a, &sol.region) <= 1e-6);
    }
    let (s, v) = constraint_map_on(&ids, (&deformed.g, &deformed.pi), Variant::Modified, &sol.region).unwrap();
    let ds = s.sub(&target.0.sample()).unwrap();
    assert!(sup_on(&ds, 0, &sol.region) <= 1e-8);
    for a in 0..3 {
        assert!(sup_on(&v, a, &sol.region) <= 1e-8);
    }
}

#[test]
fn large_constant_target_is_refused() {
    let ids = euclidean();
    let c = &ids.chart;
    let s = Field::constant(c, Valence::SCALAR, false, vec![1e3]);
    let v = Field::zeros(c, Valence::VECTOR, false);
    match deform_to_target(&ids, (&s, &v), &DeformConfig::default()) {
        Err(Error::TargetTooLarge { size, radius }) => assert!(size > radius),
        other => panic!("expected a trust-radius refusal, got {:?}", other.map(|s| s.residual_sup)),
    }
}

#[test]
fn strict_dec_margin_on_euclidean_and_schwarzschild() {
    for ids in [euclidean(), schwarzschild()] {
        let phi = gaussian(&ids.chart, [2.0, 2.0, 2.0], 0.8);
        let out = strict_dec_deform(&ids, 1e-3, &phi, &DeformConfig::default()).unwrap();
        let rep = &out.report;
        assert!(out.solution.residual_sup <= 1e-9);
        assert!(!rep.violated, "{rep:?}");
        assert!(rep.min_margin >= -rep.tolerance);
        assert!(rep.support_nodes > 0 && rep.min_on_support > 0.0, "{rep:?}");
        let h = &out.solution.residual_history;
        let (r1, r2) = (h[h.len() - 2], h[h.len() - 1]);
        if r1 > 1e-8 {
            assert!(r2 <= 1e3 * r1 * r1, "{h:?}");
        }
    }
}

#[test]
fn zero_lambda_is_the_boundary_case() {
    let ids = euclidean();
    let phi = gaussian(&ids.chart, [2.0, 2.0, 2.0], 0.8);
    let out = strict_dec_deform(&ids, 0.0, &phi, &DeformConfig::default()).unwrap();
    assert!(out.report.boundary_case);
    assert_eq!(out.report.min_margin, 0.0);
    assert_eq!(out.solution.newton_iters, 1);
}

#[test]
fn deformation_size_scales_linearly_in_lambda() {
    let ids = euclidean();
    let phi = gaussian(&ids.chart, [0.0, 3.5, 0.0], 0.8);
    let ratios: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&l| {
            let out = strict_dec_deform(&ids, l, &phi, &DeformConfig::default()).unwrap();
            verify_deform_size(&out.solution, l).unwrap()
        })
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi <= 1.2 * lo, "{ratios:?}");
}

#[test]
fn deformation_respects_dirichlet_and_basis_support() {
    let ids = euclidean();
    let phi = gaussian(&ids.chart, [2.0, -2.0, 2.0], 0.8);
    let out = strict_dec_deform(&ids, 1e-3, &phi, &DeformConfig::default()).unwrap();
    let sol = &out.solution;
    let c = &ids.chart;
    let u = &sol.u.grid_data().unwrap()[0];
    for lin in 0..c.total() {
        let r = c.radius_of(&c.node_x(lin)[..3]);
        if r <= c.r_inner || r >= c.r_outer {
            assert_eq!(u[lin], 0.0);
        }
    }
    assert!(sol.correction.support().is_some());
    assert_eq!(sol.coefficients.len(), 8);
}

#[test]
fn sampled_schwarzschild_keeps_stencils_off_the_excised_ball() {
    let analytic = schwarzschild();
    let ids = InitialDataSet::new(analytic.g.sample(), analytic.pi.sample(), TypeParams::default()).unwrap();
    let phi = gaussian(&ids.chart, [2.0, 2.0, 2.0], 0.8);
    let out = strict_dec_deform(&ids, 1e-3, &phi, &DeformConfig::default()).unwrap();
    assert!(out.solution.residual_sup <= 1e-9);
    assert!(out.report.min_on_support > 0.0, "{:?}", out.report);
    let c = &ids.chart;
    let u = &out.solution.u.grid_data().unwrap()[0];
    for lin in 0..c.total() {
        if c.radius_of(&c.node_x(lin)[..3]) <= c.r_inner + c.stencil_width() {
            assert_eq!(u[lin], 0.0);
        }
    }
}
