use std::f64::consts::PI;

use adm_toolkit::data::{family_data, ChartSpec, Family};
use adm_toolkit::fields::{radius, Field, Valence};
use adm_toolkit::hamiltonian::{
    hamiltonian_directional_fd, hamiltonian_gradient_pairing, hamiltonian_surface, hamiltonian_value,
    stationarity_residual, HamiltonianSpec,
};
use adm_toolkit::linearized::{LapseShiftPair, SymPair};

fn spec32() -> ChartSpec {
    ChartSpec { r_inner: 1.0, r_outer: 32.0, nodes: 33, fd_order: 4 }
}

#[test]
fn schwarzschild_volume_and_surface_forms() {
    let ids = family_data(3, Family::Schwarzschild { m: 1.0 }, spec32()).unwrap();
    let spec = HamiltonianSpec::new(ids.clone(), 1.0, &[0.0; 3], 4.0).unwrap();
    let v = hamiltonian_value(&spec, (&ids.g, &ids.pi)).unwrap();
    let s = hamiltonian_surface(&spec, &ids).unwrap();
    let want = 16.0 * PI;
    assert!((v.value - want).abs() <= 0.02 * want, "{v:?}");
    assert!((s.value - want).abs() <= 0.02 * want, "{s:?}");
    assert!((v.value - s.value).abs() <= 0.02 * want);
    assert_eq!(v.inner_correction, 0.0);
}

#[test]
fn bowen_york_shift_hamiltonian() {
    let ids = family_data(3, Family::BowenYork { p: vec![0.0, 0.0, 0.5] }, spec32()).unwrap();
    let spec = HamiltonianSpec::new(ids.clone(), 0.0, &[0.0, 0.0, 1.0], 4.0).unwrap();
    let v = hamiltonian_value(&spec, (&ids.g, &ids.pi)).unwrap();
    let s = hamiltonian_surface(&spec, &ids).unwrap();
    let want = 4.0 * PI;
    assert!((v.value - want).abs() <= 0.02 * want, "{v:?}");
    assert!((s.value - want).abs() <= 0.02 * want, "{s:?}");
}

#[test]
fn euclidean_hamiltonian_vanishes() {
    let ids = family_data(3, Family::Euclidean, spec32()).unwrap();
    let spec = HamiltonianSpec::new(ids.clone(), 1.0, &[0.3, 0.0, -0.2], 4.0).unwrap();
    assert_eq!(hamiltonian_value(&spec, (&ids.g, &ids.pi)).unwrap().value, 0.0);
}

#[test]
fn hamiltonian_is_affine_in_the_asymptote() {
    let ids = family_data(3, Family::BowenYork { p: vec![0.1, 0.0, 0.5] }, spec32()).unwrap();
    let target = family_data(3, Family::Schwarzschild { m: 0.5 }, spec32()).unwrap();
    let h = |a: f64, b: [f64; 3]| {
        let spec = HamiltonianSpec::new(ids.clone(), a, &b, 4.0).unwrap();
        hamiltonian_value(&spec, (&target.g, &ids.pi)).unwrap().value
    };
    let sum = h(1.0, [0.0, 0.2, 0.0]) + h(0.5, [0.0, 0.0, 1.0]);
    let joint = h(1.5, [0.0, 0.2, 1.0]);
    assert!((sum - joint).abs() <= 1e-12 * joint.abs().max(1.0), "{sum} {joint}");
}

fn gradient_check(family: Family) {
    let spec_c = ChartSpec { r_inner: 1.0, r_outer: 9.0, nodes: 49, fd_order: 4 };
    let ids = family_data(3, family, spec_c).unwrap();
    let spec = HamiltonianSpec::new(ids.clone(), 1.0, &[0.0, 0.0, 0.5], 4.0).unwrap();
    // Directions inside the transition shell, where DPhibar*(f0, X0) is nonzero.
    let dirs = [
        SymPair::seeded_bump(&ids.chart, 11, &[3.2, 0.3, -0.2], 0.6, 0.3),
        SymPair::seeded_bump(&ids.chart, 12, &[0.0, -3.3, 0.4], 0.6, 0.3),
    ];
    for dir in dirs {
        let dh = hamiltonian_gradient_pairing(&spec, &dir).unwrap();
        let fd = hamiltonian_directional_fd(&spec, &dir, 1e-4).unwrap();
        eprintln!("DH {dh} FD {fd}");
        assert!(dh.abs() > 1e-2);
        assert!((dh - fd).abs() <= 1e-3 * dh.abs(), "{dh} vs {fd}");
    }
}

#[test]
fn gradient_matches_finite_differences_euclidean() {
    gradient_check(Family::Euclidean);
}

#[test]
fn gradient_matches_finite_differences_schwarzschild() {
    gradient_check(Family::Schwarzschild { m: 1.0 });
}

fn residual(family: &Family, nodes: usize) -> (f64, f64) {
    let spec_c = ChartSpec { r_inner: 1.0, r_outer: 9.0, nodes, fd_order: 4 };
    let ids = family_data(3, family.clone(), spec_c).unwrap();
    let spec = HamiltonianSpec::new(ids.clone(), 1.0, &[0.0; 3], 4.0).unwrap();
    let lapse = match family {
        Family::Schwarzschild { m } => {
            let m = *m;
            Field::scalar(&ids.chart, move |x| {
                let q = radius(x).recip() * (m / 2.0);
                (1.0 - q) / (1.0 + q)
            })
        }
        _ => Field::constant(&ids.chart, Valence::SCALAR, false, vec![1.0]),
    };
    let mult = LapseShiftPair::new(lapse.sub(&spec.reference.f).unwrap(), spec.reference.x.scale(-1.0));
    (stationarity_residual(&spec, &mult, 5).unwrap().max_residual, ids.chart.h)
}

#[test]
fn flat_stationarity_with_exact_multiplier() {
    let (r, h) = residual(&Family::Euclidean, 49);
    assert!(r <= 10.0 * h.powi(4), "{r} vs {}", 10.0 * h.powi(4));
}

#[test]
fn schwarzschild_stationarity_converges() {
    let fam = Family::Schwarzschild { m: 1.0 };
    let (r1, h1) = residual(&fam, 49);
    let (r2, h2) = residual(&fam, 73);
    assert!(r1 <= 10.0 * h1.powi(4), "{r1}");
    assert!(r2 < r1 && r2 <= 10.0 * h2.powi(4), "{r1} {r2}");
}
