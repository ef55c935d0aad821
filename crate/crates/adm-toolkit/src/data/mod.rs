//! Exact families, the dataset manifest and on-disk container, and the CLI.

pub mod cli;
pub mod io;
pub mod report;
pub mod suites;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constraints::InitialDataSet;
use crate::error::{Error, Result};
use crate::fields::{radius, Chart, Field, Jet, TypeParams, Valence};
use crate::linearized::{Asymptote, LapseShiftPair, SymPair};

pub use io::{load, save};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    pub nodes: usize,
    pub fd_order: usize,
}

impl ChartSpec {
    pub fn build(&self, n: usize) -> Result<Arc<Chart>> {
        Chart::new(n, self.r_inner, self.r_outer, self.nodes, self.fd_order)
    }
}

/// Conformal factor `u = 1 + c |x|^{-power}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalSpec {
    pub c: f64,
    pub power: f64,
}

impl Default for ConformalSpec {
    fn default() -> Self {
        ConformalSpec { c: 1.0, power: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    Schwarzschild { m: f64 },
    BowenYork { p: Vec<f64> },
    Conformal(ConformalSpec),
    Perturbed { base: Box<Family>, seed: u64, amplitude: f64, center: Vec<f64>, radius: f64 },
    External,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::Schwarzschild { .. } => "schwarzschild",
            Family::BowenYork { .. } => "bowen_york",
            Family::Conformal(_) => "conformal",
            Family::Perturbed { .. } => "perturbed",
            Family::External => "external",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParameters(s));
        match self {
            Family::Schwarzschild { m } if !(*m > 0.0 && m.is_finite()) => {
                bad(format!("mass m = {m} must be positive"))
            }
            Family::BowenYork { p } => {
                if n != 3 {
                    return Err(Error::UnsupportedDimensionForFamily { family: "bowen_york".into(), n });
                }
                if p.len() != n || p.iter().any(|v| !v.is_finite()) {
                    return bad(format!("momentum parameter {p:?} must have {n} finite entries"));
                }
                Ok(())
            }
            Family::Conformal(s) if !(s.c >= 0.0 && s.c.is_finite() && s.power > 0.0) => {
                bad(format!("conformal factor 1 + c r^-p needs c >= 0 and p > 0, got {s:?}"))
            }
            Family::Perturbed { base, amplitude, center, radius, .. } => {
                if matches!(**base, Family::Perturbed { .. } | Family::External) {
                    return bad("perturbed base must be an exact family".into());
                }
                if center.len() != n || !(*radius > 0.0) || !amplitude.is_finite() {
                    return bad("perturbation needs an n-point centre, positive radius and finite amplitude".into());
                }
                base.validate(n)
            }
            _ => Ok(()),
        }
    }

    /// Decay type advertised by the family.
    pub fn type_params(&self, n: usize) -> TypeParams {
        let q = match self {
            Family::Schwarzschild { .. } | Family::Conformal(_) => (n - 2) as f64,
            Family::Perturbed { base, .. } => return base.type_params(n),
            _ => 1.0,
        };
        TypeParams { p: (n + 1) as f64, q, ..TypeParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub cov: usize,
    pub con: usize,
    pub symmetric: bool,
    /// One file per stored component, in storage order.
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub n: usize,
    pub family: Family,
    pub chart: ChartSpec,
    /// Normalization of the momentum tensor; only "paper" is ingested.
    pub convention: String,
    pub units: String,
    pub type_params: TypeParams,
    /// Grid extent per axis including ghost layers; axis 0 varies slowest.
    #[serde(default)]
    pub grid_dims: Vec<usize>,
    #[serde(default)]
    pub fields: Vec<FieldEntry>,
}

impl DatasetManifest {
    pub fn new(n: usize, family: Family, chart: ChartSpec) -> DatasetManifest {
        let type_params = family.type_params(n);
        DatasetManifest {
            schema_version: SCHEMA_VERSION,
            n,
            family,
            chart,
            convention: "paper".into(),
            units: "geometric units, G = c = 1; pi^ij = k^ij - (tr_g k) g^ij".into(),
            type_params,
            grid_dims: vec![],
            fields: vec![],
        }
    }
}

fn conformal_metric(chart: &Arc<Chart>, u: impl Fn(Jet) -> Jet + Send + Sync + 'static) -> Field {
    let n = chart.n;
    let e = 4.0 / (n as f64 - 2.0);
    Field::sym2(chart, Valence::COV2, move |x| {
        let f = u(radius(x)).powf(e);
        (0..n).map(|i| (0..n).map(|j| if i == j { f } else { Jet::constant(0.0) }).collect()).collect()
    })
}

/// Isotropic Schwarzschild metric `(1 + m / (2 r^{n-2}))^{4/(n-2)} delta`.
pub fn schwarzschild_metric(chart: &Arc<Chart>, m: f64) -> Field {
    let k = chart.n as i32 - 2;
    conformal_metric(chart, move |r| 1.0 + r.powi(-k) * (m / 2.0))
}

/// Static lapse `(1 - m / (2 r^{n-2})) / (1 + m / (2 r^{n-2}))` with zero shift.
pub fn schwarzschild_static_pair(chart: &Arc<Chart>, m: f64) -> LapseShiftPair {
    let k = chart.n as i32 - 2;
    let f = Field::scalar(chart, move |x| {
        let q = radius(x).powi(-k) * (m / 2.0);
        (1.0 - q) / (1.0 + q)
    });
    let mut pair = LapseShiftPair::new(f, Field::zeros(chart, Valence::VECTOR, false));
    pair.asymptote = Some(Asymptote { a: 1.0, b: vec![0.0; chart.n] });
    pair
}

/// Bowen–York momentum on flat space with linear momentum `p`.
pub fn bowen_york_momentum(chart: &Arc<Chart>, p: &[f64]) -> Field {
    let p = p.to_vec();
    Field::sym2(chart, Valence::CON2, move |x| {
        let r = radius(x);
        let nu: Vec<Jet> = x.iter().map(|&xi| xi / r).collect();
        let pn = nu.iter().zip(&p).fold(Jet::constant(0.0), |s, (a, b)| s + *a * *b);
        let c = (r * r).recip() * 1.5;
        (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        c * (nu[j] * p[i] + nu[i] * p[j] - (delta - nu[i] * nu[j]) * pn)
                    })
                    .collect()
            })
            .collect()
    })
}

/// Builds the analytic initial data set of a family.
pub fn generate(manifest: &DatasetManifest) -> Result<InitialDataSet> {
    let n = manifest.n;
    let chart = manifest.chart.build(n)?;
    generate_on(&chart, &manifest.family, manifest.type_params)
}

pub fn generate_on(chart: &Arc<Chart>, family: &Family, type_params: TypeParams) -> Result<InitialDataSet> {
    let n = chart.n;
    family.validate(n)?;
    let zero_pi = || Field::zeros(chart, Valence::CON2, true);
    let (g, pi) = match family {
        Family::Euclidean => (Field::euclidean(chart), zero_pi()),
        Family::Schwarzschild { m } => (schwarzschild_metric(chart, *m), zero_pi()),
        Family::BowenYork { p } => (Field::euclidean(chart), bowen_york_momentum(chart, p)),
        Family::Conformal(s) => {
            let (c, pw) = (s.c, s.power);
            (conformal_metric(chart, move |r| 1.0 + r.powf(-pw) * c), zero_pi())
        }
        Family::Perturbed { base, seed, amplitude, center, radius } => {
            let b = generate_on(chart, base, type_params)?;
            let bump = SymPair::seeded_bump(chart, *seed, center, *radius, *amplitude);
            let mut g = b.g.add(&bump.h)?;
            let mut pi = b.pi.add(&bump.w)?;
            g.support = None;
            pi.support = None;
            (g, pi)
        }
        Family::External => {
            return Err(Error::InvalidParameters("external datasets are loaded, not generated".into()));
        }
    };
    InitialDataSet::new(g, pi, type_params)
}

/// Convenience: a family on a fresh chart with its advertised decay type.
pub fn family_data(n: usize, family: Family, chart: ChartSpec) -> Result<InitialDataSet> {
    generate(&DatasetManifest::new(n, family, chart))
}
