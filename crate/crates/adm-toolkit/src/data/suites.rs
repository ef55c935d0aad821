//! Self-check suites run by `verify --suite`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::Check;
use super::{family_data, schwarzschild_static_pair, ChartSpec, Family};
use crate::charges::{flux_identity_suite, FluxDefects};
use crate::constraints::{dec_transport_point, mass_current_on, sup_on, InitialDataSet, Variant};
use crate::error::{Error, Result};
use crate::fields::{Chart, Field, Jet, Valence, MAXN};
use crate::linearized::{adjoint_on, kid_residuals_on, pairing_defect, LapseShiftPair, SymPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    FluxIdentities,
    AdjointPairing,
    KidResiduals,
    DecAlgebra,
    Convergence,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::FluxIdentities => flux_identities(seed),
        Suite::AdjointPairing => adjoint_pairing(seed),
        Suite::KidResiduals => kid_residuals(),
        Suite::DecAlgebra => dec_algebra(seed),
        Suite::Convergence => convergence(),
    }
}

fn chart(r_outer: f64, nodes: usize) -> Result<Arc<Chart>> {
    Chart::new(3, 1.0, r_outer, nodes, 4)
}

fn spec(r_outer: f64, nodes: usize) -> ChartSpec {
    ChartSpec { r_inner: 1.0, r_outer, nodes, fd_order: 4 }
}

/// Non-symmetric (0,2) tensor with seeded coefficients on monomials of degree at most 3.
pub fn seeded_polynomial_tensor(chart: &Arc<Chart>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<[f64; 10]> = (0..9).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    Field::from_jets(chart, Valence::COV2, false, move |x| {
        let mono = [
            Jet::constant(1.0),
            x[0],
            x[1],
            x[2],
            x[0] * x[1],
            x[1] * x[2],
            x[2] * x[2],
            x[0] * x[0] * x[2],
            x[1] * x[1] * x[1],
            x[0] * x[1] * x[2],
        ];
        coef.iter().map(|c| mono.iter().zip(c).fold(Jet::constant(0.0), |s, (m, k)| s + *m * *k)).collect()
    })
}

fn flux_identities(seed: u64) -> Result<Vec<Check>> {
    let c = chart(4.0, 17)?;
    let r = 2.0;
    let mut worst: f64 = 0.0;
    for s in 0..20 {
        match flux_identity_suite(&seeded_polynomial_tensor(&c, seed.wrapping_add(s)), r)? {
            FluxDefects::Tensor { defect } => worst = worst.max(defect.abs()),
            FluxDefects::Scalar { .. } => unreachable!("tensor input"),
        }
    }
    let cubic = Field::scalar(&c, |x| x[0] * x[0] * x[0]);
    let FluxDefects::Scalar { lhs, rhs, defects, radial_defect, .. } = flux_identity_suite(&cubic, r)? else {
        unreachable!("scalar input")
    };
    let want = 8.0 * PI * r.powi(3);
    let rel = ((lhs[0] - want).abs()).max((rhs[0] - want).abs()) / want;
    let scalar_defect = defects.iter().fold(radial_defect.abs(), |m, d| m.max(d.abs()));
    Ok(vec![
        Check::at_most("tensor_flux_symmetry_defect", worst, 1e-10),
        Check::at_most("cubic_flux_relative_error", rel, 1e-8),
        Check::at_most("scalar_identity_defect", scalar_defect, 1e-8 * want),
    ])
}

/// Generic smooth lapse-shift pair with no symmetry.
pub fn generic_pair(chart: &Arc<Chart>) -> LapseShiftPair {
    let f = Field::scalar(chart, |x| 1.0 + x[0] * 0.2 + x[1] * x[2] * 0.1);
    let x = Field::vector(chart, |x| vec![x[1] * 0.1, x[0] * -0.1 + x[2] * x[2] * 0.05, x[0] * x[1] * 0.03 + 0.2]);
    LapseShiftPair::new(f, x)
}

fn seeded_centre(rng: &mut ChaCha8Rng, r: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let len = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
    v.iter().map(|a| r * a / len).collect()
}

fn adjoint_pairing(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for fam in [Family::Euclidean, Family::Schwarzschild { m: 1.0 }] {
        let ids = family_data(3, fam.clone(), spec(9.0, 49))?;
        let pair = generic_pair(&ids.chart);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let centre = seeded_centre(&mut rng, 5.0);
            let dir = SymPair::seeded_bump(&ids.chart, seed.wrapping_add(k), &centre, 1.2, 0.5);
            worst = worst.max(pairing_defect(&ids, &pair, &dir)?.abs() / dir.l2_norm()?);
        }
        checks.push(Check::at_most(&format!("{}_pairing_defect_over_norm", fam.name()), worst, 1e-3));
    }
    Ok(checks)
}

fn kid_sup(ids: &InitialDataSet, pair: &LapseShiftPair) -> Result<(f64, f64)> {
    let region = ids.chart.shell_region(2.0, 3.0);
    let rhs = SymPair::zero(&ids.chart);
    let res = kid_residuals_on(ids, pair, &rhs, &region)?.sup(&region);
    let adj = adjoint_on(ids, pair, Variant::Modified, &region)?;
    let a = (0..adj.h.ncomp()).map(|c| sup_on(&adj.h, c, &region)).fold(0.0, f64::max);
    let b = (0..adj.w.ncomp()).map(|c| sup_on(&adj.w, c, &region)).fold(0.0, f64::max);
    Ok((res.iter().copied().fold(0.0, f64::max), a.max(b)))
}

fn kid_residuals() -> Result<Vec<Check>> {
    let flat = family_data(3, Family::Euclidean, spec(4.0, 17))?;
    let mut worst: f64 = 0.0;
    let mut pairs = vec![LapseShiftPair::constant(&flat.chart, 1.0, &[0.0; 3])];
    for a in 0..3 {
        let mut b = [0.0; 3];
        b[a] = 1.0;
        pairs.push(LapseShiftPair::constant(&flat.chart, 0.0, &b));
    }
    for p in &pairs {
        let (r, adj) = kid_sup(&flat, p)?;
        worst = worst.max(r).max(adj);
    }
    let sup_at = |nodes: usize| -> Result<(f64, f64, f64)> {
        let ids = family_data(3, Family::Schwarzschild { m: 1.0 }, spec(4.0, nodes))?;
        let ids = InitialDataSet::new(ids.g.sample(), ids.pi.sample(), ids.type_params)?;
        let (r, a) = kid_sup(&ids, &schwarzschild_static_pair(&ids.chart, 1.0))?;
        Ok((r, a, ids.chart.h))
    };
    let (r1, _, h1) = sup_at(33)?;
    let (r2, a2, h2) = sup_at(65)?;
    let rate = (r1 / r2).ln() / (h1 / h2).ln();
    Ok(vec![
        Check::at_most("flat_translation_residual", worst, 0.0),
        Check::near("schwarzschild_static_residual_rate", rate, 4.0, 0.3),
        Check::at_most("schwarzschild_static_residual_fine", r2, 10.0 * h2.powi(4)),
        Check::at_most("schwarzschild_static_adjoint_fine", a2, 10.0 * h2.powi(4)),
    ])
}

fn dec_algebra(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3;
    let mut g = [[0.0; MAXN]; MAXN];
    for (a, row) in g.iter_mut().enumerate().take(n) {
        row[a] = 1.0;
    }
    let mut worst_rel: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut rejected = 0;
    for k in 0..100 {
        let j: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut h = [[0.0; MAXN]; MAXN];
        for a in 0..n {
            for b in a..n {
                let v = rng.gen_range(-1.0..1.0);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        let norm = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| h[a][b] * h[a][b]).sum::<f64>().sqrt();
        let s = rng.gen_range(0.0..2.99) / norm;
        h.iter_mut().flatten().for_each(|v| *v *= s);
        let (chain, direct, j2) = dec_transport_point(n, &g, &j, &h, &[k as f64, 0.0, 0.0])?;
        worst_rel = worst_rel.max((chain - direct).abs() / direct.abs().max(1e-300));
        worst_ratio = worst_ratio.max(direct / j2);
        let big = h.map(|row| row.map(|v| v * 3.01 / (s * norm)));
        if matches!(dec_transport_point(n, &g, &j, &big, &[0.0; 3]), Err(Error::HTooLarge { .. })) {
            rejected += 1;
        }
    }
    Ok(vec![
        Check::at_most("chain_vs_direct_relative", worst_rel, 1e-12),
        Check::at_most("transported_over_original_minus_one", (worst_ratio - 1.0).max(0.0), 1e-12),
        Check::near("rejected_large_h", rejected as f64, 100.0, 0.0),
    ])
}

fn convergence() -> Result<Vec<Check>> {
    let sup_at = |nodes: usize| -> Result<(f64, f64, f64)> {
        let ids = family_data(3, Family::Schwarzschild { m: 1.0 }, spec(4.0, nodes))?;
        let ids = InitialDataSet::new(ids.g.sample(), ids.pi.sample(), ids.type_params)?;
        let region = ids.chart.shell_region(2.0, 3.0);
        let mc = mass_current_on(&ids, &region)?;
        let j = (0..3).map(|a| sup_on(&mc.j, a, &region)).fold(0.0, f64::max);
        Ok((sup_on(&mc.mu, 0, &region), j, ids.chart.h))
    };
    let (m1, j1, h1) = sup_at(33)?;
    let (m2, j2, h2) = sup_at(65)?;
    let rate = (m1 / m2).ln() / (h1 / h2).ln();
    Ok(vec![
        Check::near("schwarzschild_mu_rate", rate, 4.0, 0.3),
        Check::at_most("schwarzschild_current", j1.max(j2), 1e-12),
    ])
}
