mod common;

use std::sync::Arc;

use adm_toolkit::constraints::{
    constraint_map, constraint_map_on, dec_margin_on, dec_tolerance, dec_transport_check, dec_transport_point,
    dec_verdict, mass_current, momentum_convert, sup_on, InitialDataSet, MomentumDirection, Variant,
};
use adm_toolkit::data::{family_data, ChartSpec, Family};
use adm_toolkit::fields::{make_chart, Chart, Field, Valence, MAXN};
use adm_toolkit::linearized::SymPair;
use adm_toolkit::Error;
use proptest::prelude::*;

fn chart() -> Arc<Chart> {
    make_chart(3, 1.0, 3.0, 13, 4).unwrap()
}

fn sup_all(f: &Field, chart: &Chart) -> f64 {
    let region = chart.annulus();
    (0..f.ncomp()).map(|c| sup_on(f, c, &region)).fold(0.0, f64::max)
}

#[test]
fn euclidean_data_have_no_mass_or_current() {
    let ids =
        family_data(3, Family::Euclidean, ChartSpec { r_inner: 1.0, r_outer: 3.0, nodes: 13, fd_order: 4 }).unwrap();
    let mc = mass_current(&ids).unwrap();
    assert_eq!(sup_all(&mc.mu, &ids.chart), 0.0);
    assert_eq!(sup_all(&mc.j, &ids.chart), 0.0);
    let (s, v) = constraint_map(&ids, (&ids.g, &ids.pi), Variant::Plain).unwrap();
    assert_eq!(sup_all(&s, &ids.chart), 0.0);
    assert_eq!(sup_all(&v, &ids.chart), 0.0);
}

#[test]
fn plain_and_modified_maps_at_the_base_point() {
    let c = chart();
    let ids = common::curved_base(&c);
    let mc = mass_current(&ids).unwrap();
    assert!(sup_all(&mc.j, &c) > 1e-3);
    let (s, v) = constraint_map(&ids, (&ids.g, &ids.pi), Variant::Plain).unwrap();
    assert_eq!(sup_all(&s.sub(&mc.mu.scale(2.0)).unwrap(), &c), 0.0);
    assert_eq!(sup_all(&v.sub(&mc.j).unwrap(), &c), 0.0);
    let (sm, vm) = constraint_map(&ids, (&ids.g, &ids.pi), Variant::Modified).unwrap();
    assert_eq!(sup_all(&sm.sub(&s).unwrap(), &c), 0.0);
    let j = sup_all(&mc.j, &c);
    assert!(sup_all(&vm.sub(&mc.j.scale(1.5)).unwrap(), &c) <= 1e-13 * j);
}

#[test]
fn conformal_example_at_the_unit_sphere() {
    let spec = ChartSpec { r_inner: 1.0, r_outer: 3.0, nodes: 25, fd_order: 4 };
    let ids = family_data(3, Family::Conformal(Default::default()), spec).unwrap();
    let c = &ids.chart;
    let l = c.linear(&[c.ghost + 16, c.ghost + 12, c.ghost + 12]);
    assert_eq!(c.node_x(l)[..3], [1.0, 0.0, 0.0]);
    let (s, v) = constraint_map(&ids, (&ids.g, &ids.pi), Variant::Plain).unwrap();
    assert!((s.component(0)[l] + 0.5).abs() < 1e-12);
    assert!((0..3).all(|a| v.component(a)[l] == 0.0));
}

#[test]
fn schwarzschild_dec_passes_within_fd_tolerance() {
    let spec = ChartSpec { r_inner: 1.0, r_outer: 4.0, nodes: 65, fd_order: 4 };
    let ids = family_data(3, Family::Schwarzschild { m: 1.0 }, spec).unwrap();
    let ids = InitialDataSet::new(ids.g.sample(), ids.pi.sample(), ids.type_params).unwrap();
    let region = ids.chart.shell_region(2.0, 3.0);
    let margin = dec_margin_on(&ids, &region).unwrap();
    let v = dec_verdict(&margin, &region, dec_tolerance(&ids.chart));
    assert!(v.pass, "{v:?}");
    assert!(v.min_margin.is_finite() && v.min_margin.abs() <= v.tolerance);
}

#[test]
fn transport_check_on_fields() {
    let c = chart();
    let g = Field::euclidean(&c);
    let j = Field::constant(&c, Valence::VECTOR, false, vec![1.0, 0.0, 0.0]);
    let h = Field::constant(&c, Valence::COV2, true, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let t = dec_transport_check(&g, &j, &h).unwrap();
    assert!(t.bound_ok);
    let l = c.annulus().nodes[0];
    assert!((t.jbar_normsq.component(0)[l] - 0.5).abs() < 1e-15);
    let zero = Field::zeros(&c, Valence::COV2, true);
    let t0 = dec_transport_check(&g, &j, &zero).unwrap();
    assert_eq!(t0.jbar_normsq.component(0)[l], 1.0);
    let big = Field::constant(&c, Valence::COV2, true, vec![2.0, 0.0, 0.0, 2.0, 0.0, 2.0]);
    assert!(matches!(dec_transport_check(&g, &j, &big), Err(Error::HTooLarge { .. })));
}

fn spd(a: &[f64; 6]) -> [[f64; MAXN]; MAXN] {
    // g = I + L L^T / 4 with L lower triangular from the entries.
    let l = [[a[0], 0.0, 0.0], [a[1], a[2], 0.0], [a[3], a[4], a[5]]];
    let mut g = [[0.0; MAXN]; MAXN];
    for i in 0..3 {
        for k in 0..3 {
            g[i][k] = if i == k { 1.0 } else { 0.0 } + 0.25 * (0..3).map(|m| l[i][m] * l[k][m]).sum::<f64>();
        }
    }
    g
}

fn h_norm(g: &[[f64; MAXN]; MAXN], h: &[[f64; MAXN]; MAXN]) -> f64 {
    let m = nalgebra::Matrix3::from_fn(|i, k| g[i][k]);
    let gi = m.try_inverse().unwrap();
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    s += gi[(a, c)] * gi[(b, d)] * h[a][b] * h[c][d];
                }
            }
        }
    }
    s.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_formula_matches_direct_and_never_increases_the_current(
        ga in prop::array::uniform6(-1.0f64..1.0),
        hv in prop::array::uniform6(-1.0f64..1.0),
        j in prop::array::uniform3(-2.0f64..2.0),
        size in 0.0f64..2.999,
    ) {
        let g = spd(&ga);
        let mut h = [[0.0; MAXN]; MAXN];
        let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (v, (a, b)) in hv.iter().zip(idx) {
            h[a][b] = *v;
            h[b][a] = *v;
        }
        let n0 = h_norm(&g, &h);
        prop_assume!(n0 > 1e-6);
        h.iter_mut().flatten().for_each(|v| *v *= size / n0);
        let (chain, direct, j2) = dec_transport_point(3, &g, &j, &h, &[0.0; 3]).unwrap();
        prop_assert!((chain - direct).abs() <= 1e-12 * j2.max(1e-300));
        prop_assert!(direct <= j2 * (1.0 + 1e-12));
        let over = h.map(|row| row.map(|v| v * 3.001 / size.max(1e-3)));
        let rejected = matches!(dec_transport_point(3, &g, &j, &over, &[0.0; 3]), Err(Error::HTooLarge { .. }));
        prop_assert!(size < 1e-3 || rejected);
    }

    #[test]
    fn momentum_conversion_round_trips(k in prop::array::uniform6(-3.0f64..3.0)) {
        let c = chart();
        let g = common::curved_base(&c).g;
        let kf = Field::constant(&c, Valence::CON2, true, k.to_vec());
        let pi = momentum_convert(&kf, &g, MomentumDirection::KToPi).unwrap();
        let back = momentum_convert(&pi, &g, MomentumDirection::PiToK).unwrap();
        for l in c.annulus().nodes.iter().step_by(5) {
            for s in 0..6 {
                prop_assert!((back.component(s)[*l] - k[s]).abs() <= 1e-12 * (1.0 + k[s].abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Modified-map DEC preservation: the margin of any nearby (gamma, tau) is bounded below by the base
    /// margin minus `|eps_1| / 2 + |eps_2|_gamma`, where `eps` is the modified-map mismatch.
    #[test]
    fn modified_map_mismatch_bounds_the_margin_loss(seed in 0u64..1000, t in -0.4f64..0.4) {
        let c = make_chart(3, 1.0, 5.0, 25, 4).unwrap();
        let base = common::curved_base(&c);
        let dir = SymPair::seeded_bump(&c, seed, &[2.6, 0.4, -0.3], 1.2, 0.5);
        let gamma = base.g.combine(1.0, &dir.h, t).unwrap();
        let tau = base.pi.combine(1.0, &dir.w, t).unwrap();
        let moved = InitialDataSet::new(gamma.clone(), tau.clone(), base.type_params).unwrap();
        let region = c.shell_region(1.5, 4.0);
        let (s0, v0) = constraint_map_on(&base, (&base.g, &base.pi), Variant::Modified, &region).unwrap();
        let (s1, v1) = constraint_map_on(&base, (&gamma, &tau), Variant::Modified, &region).unwrap();
        let m0 = dec_margin_on(&base, &region).unwrap();
        let m1 = dec_margin_on(&moved, &region).unwrap();
        let gs = gamma.sample();
        for &l in &region.nodes {
            let e1 = s1.component(0)[l] - s0.component(0)[l];
            let e2: Vec<f64> = (0..3).map(|a| v1.component(a)[l] - v0.component(a)[l]).collect();
            let gm = |a: usize, b: usize| gs.component(gs.slot(&[a, b]))[l];
            let e2n = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| gm(a, b) * e2[a] * e2[b]).sum::<f64>().sqrt();
            let bound = m0.component(0)[l] - 0.5 * e1.abs() - e2n;
            prop_assert!(m1.component(0)[l] >= bound - 1e-10 * (1.0 + bound.abs()), "node {l}: {} < {bound}", m1.component(0)[l]);
        }
    }
}
