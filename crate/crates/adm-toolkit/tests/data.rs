use std::fs;

use adm_toolkit::charges::adm_charges;
use adm_toolkit::constraints::{dec_margin, sup_on};
use adm_toolkit::data::io::{load, load_fields, read_manifest, save};
use adm_toolkit::data::{family_data, ChartSpec, DatasetManifest, Family};
use adm_toolkit::Error;

fn spec() -> ChartSpec {
    ChartSpec { r_inner: 1.0, r_outer: 6.0, nodes: 25, fd_order: 4 }
}

fn perturbed() -> DatasetManifest {
    let family = Family::Perturbed {
        base: Box::new(Family::Schwarzschild { m: 0.5 }),
        seed: 11,
        amplitude: 0.05,
        center: vec![2.5, 0.5, -0.5],
        radius: 1.0,
    };
    DatasetManifest::new(3, family, spec())
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = perturbed();
    let ids = adm_toolkit::data::generate(&m).unwrap();
    save(&ids, &m, dir.path()).unwrap();
    let (back, m2) = load(dir.path()).unwrap();
    assert_eq!(m2.family, m.family);
    assert_eq!(m2.grid_dims, vec![ids.chart.dim; 3]);
    for (a, b) in [(&ids.g, &back.g), (&ids.pi, &back.pi)] {
        let sa = a.sample();
        let (x, y) = (sa.grid_data().unwrap(), b.grid_data().unwrap());
        assert_eq!(x.len(), y.len());
        for (u, v) in x.iter().zip(y.iter()) {
            assert!(u.iter().zip(v).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn truncated_component_reports_the_offset() {
    let dir = tempfile::tempdir().unwrap();
    let m = DatasetManifest::new(3, Family::Euclidean, spec());
    save(&adm_toolkit::data::generate(&m).unwrap(), &m, dir.path()).unwrap();
    let f = dir.path().join("g_2.f64");
    let bytes = fs::read(&f).unwrap();
    fs::write(&f, &bytes[..bytes.len() - 13]).unwrap();
    match load(dir.path()) {
        Err(Error::Io(msg)) => {
            assert!(msg.contains("g_2.f64") && msg.contains(&format!("offset {}", bytes.len() - 13)), "{msg}");
        }
        other => panic!("expected an io error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn two_axis_arrays_disagree_with_a_three_dimensional_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = DatasetManifest::new(3, Family::Euclidean, spec());
    let saved = save(&adm_toolkit::data::generate(&m).unwrap(), &m, dir.path()).unwrap();
    let mut bad = saved.clone();
    bad.grid_dims.truncate(2);
    fs::write(dir.path().join("manifest.json"), serde_json::to_string(&bad).unwrap()).unwrap();
    assert!(matches!(load_fields(dir.path()), Err(Error::ManifestMismatch(_))));
}

#[test]
fn other_conventions_are_not_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = DatasetManifest::new(3, Family::Euclidean, spec());
    m.convention = "other".into();
    save(&adm_toolkit::data::generate(&m).unwrap(), &m, dir.path()).unwrap();
    assert_eq!(read_manifest(dir.path()).unwrap().convention, "other");
    assert!(matches!(load(dir.path()), Err(Error::ConventionNotPaper(c)) if c == "other"));
    assert!(load_fields(dir.path()).is_ok());
}

#[test]
fn missing_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load(&dir.path().join("absent")), Err(Error::Io(_))));
}

#[test]
fn invalid_family_parameters_are_rejected() {
    let bad = [
        (3, Family::Schwarzschild { m: -1.0 }),
        (3, Family::BowenYork { p: vec![0.0, f64::NAN, 0.0] }),
        (3, Family::BowenYork { p: vec![0.0, 1.0] }),
    ];
    for (n, f) in bad {
        assert!(matches!(family_data(n, f, spec()), Err(Error::InvalidParameters(_))));
    }
    let four = ChartSpec { nodes: 13, ..spec() };
    assert!(matches!(
        family_data(4, Family::BowenYork { p: vec![0.0; 4] }, four),
        Err(Error::UnsupportedDimensionForFamily { n: 4, .. })
    ));
}

#[test]
fn euclidean_family_has_zero_margin_and_charges() {
    let ids = family_data(3, Family::Euclidean, spec()).unwrap();
    let margin = dec_margin(&ids).unwrap();
    let region = ids.chart.annulus();
    assert!(!region.nodes.is_empty());
    assert_eq!(sup_on(&margin, 0, &region), 0.0);
    let ch = adm_charges(&ids, &[2.0, 2.5, 3.0]).unwrap();
    assert_eq!(ch.e, 0.0);
    assert!(ch.p.iter().all(|v| *v == 0.0));
}
