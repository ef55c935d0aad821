mod common;

use adm_toolkit::constraints::{constraint_map_on, Variant};
use adm_toolkit::fields::{Chart, Region};
use adm_toolkit::linearized::{
    adjoint_on, kid_residuals_on, linearize_on, modification_defect, pairing_defect, pairing_terms, SymPair,
};
use common::{curved_base, test_pair};

fn defect(nodes: usize, seed: u64) -> (f64, f64, f64) {
    let chart = Chart::new(3, 1.0, 9.0, nodes, 4).unwrap();
    let base = curved_base(&chart);
    let dir = SymPair::seeded_bump(&chart, seed, &[4.5, 0.4, -0.3], 1.5, 0.5);
    let region = chart.box_region(&dir.support().unwrap().inflate(1.0));
    let (lhs, _) = pairing_terms(&base, &test_pair(&chart), &dir, &region).unwrap();
    (pairing_defect(&base, &test_pair(&chart), &dir).unwrap(), dir.l2_norm().unwrap(), lhs)
}

#[test]
fn pairing_defect_converges_at_fourth_order() {
    for seed in 0..2 {
        let (coarse, norm, lhs) = defect(49, seed);
        let (fine, _, _) = defect(73, seed);
        assert!(lhs.abs() > 1e-2, "pairing is not trivially zero: {lhs}");
        assert!(coarse.abs() <= 10.0 * 0.375f64.powi(4) * norm, "seed {seed}: {coarse}");
        let rate = (coarse / fine).abs().ln() / 1.5f64.ln();
        assert!(rate >= 3.0, "seed {seed}: {coarse} {fine} rate {rate}");
    }
}

#[test]
fn support_near_boundary_is_rejected() {
    let chart = Chart::new(3, 1.0, 6.0, 49, 4).unwrap();
    let base = curved_base(&chart);
    let dir = SymPair::seeded_bump(&chart, 1, &[1.6, 0.0, 0.0], 0.5, 0.5);
    assert!(pairing_defect(&base, &test_pair(&chart), &dir).is_err());
}

#[test]
fn linearization_matches_central_difference() {
    let chart = Chart::new(3, 1.0, 6.0, 25, 4).unwrap();
    let base = curved_base(&chart);
    let dir = SymPair::seeded_bump(&chart, 7, &[3.0, 0.5, 0.0], 1.5, 0.4);
    let region = Region { nodes: chart.box_region(&dir.support().unwrap()).nodes.into_iter().step_by(5).collect() };
    let (l1, l2) = linearize_on(&base, &dir, Variant::Modified, &region).unwrap();
    let mut prev = f64::INFINITY;
    for eps in [1e-2, 5e-3] {
        let gp = base.g.combine(1.0, &dir.h, eps).unwrap();
        let gm = base.g.combine(1.0, &dir.h, -eps).unwrap();
        let pp = base.pi.combine(1.0, &dir.w, eps).unwrap();
        let pm = base.pi.combine(1.0, &dir.w, -eps).unwrap();
        let (a1, a2) = constraint_map_on(&base, (&gp, &pp), Variant::Modified, &region).unwrap();
        let (b1, b2) = constraint_map_on(&base, (&gm, &pm), Variant::Modified, &region).unwrap();
        let mut err: f64 = 0.0;
        for &l in &region.nodes {
            err = err.max(((a1.component(0)[l] - b1.component(0)[l]) / (2.0 * eps) - l1.component(0)[l]).abs());
            for i in 0..3 {
                err = err.max(((a2.component(i)[l] - b2.component(i)[l]) / (2.0 * eps) - l2.component(i)[l]).abs());
            }
        }
        assert!(err < 1e-3, "eps {eps}: {err}");
        assert!(err < prev);
        prev = err;
    }
}

#[test]
fn modified_linearization_adds_half_h_dot_j() {
    let chart = Chart::new(3, 1.0, 6.0, 25, 4).unwrap();
    let base = curved_base(&chart);
    let dir = SymPair::seeded_bump(&chart, 3, &[0.0, 3.0, 0.0], 1.5, 1.0);
    let region = chart.box_region(&dir.support().unwrap());
    assert!(modification_defect(&base, &dir, &region).unwrap() < 1e-12);
}

fn kid_sup(nodes: usize) -> [f64; 4] {
    let chart = Chart::new(3, 1.0, 4.0, nodes, 4).unwrap();
    let base = curved_base(&chart);
    let pair = test_pair(&chart);
    let rhs = adjoint_on(&base, &pair, Variant::Modified, &chart.annulus()).unwrap();
    let region = chart.shell_region(2.0, 3.0);
    kid_residuals_on(&base, &pair, &rhs, &region).unwrap().sup(&region)
}

#[test]
fn hessian_reformulation_holds_for_adjoint_images() {
    let coarse = kid_sup(33);
    let fine = kid_sup(65);
    // Algebraic equations are exact; the differentiated ones converge at fourth order.
    assert!(coarse[0] < 1e-10 && coarse[2] < 1e-10, "{coarse:?}");
    for k in [1, 3] {
        assert!(fine[k] < 1e-3, "{fine:?}");
        assert!(coarse[k] / fine[k] > 8.0, "{coarse:?} {fine:?}");
    }
}
