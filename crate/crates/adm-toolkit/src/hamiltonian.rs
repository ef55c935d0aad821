//! The modified Regge–Teitelboim Hamiltonian in volume form, its first
//! variation and the Lagrange-multiplier stationarity residual.
//!
//! Volume integrals use Gauss quadrature on shells and are implemented for `n = 3`.

use std::sync::Arc;

use serde::Serialize;

use crate::charges::{adm_charges, extrapolate_flux};
use crate::constraints::{gamma_dot_j, phi_point, InitialDataSet, Variant};
use crate::error::{Error, Result};
use crate::fields::quadrature::{DEFAULT_QUAD_ORDER, DEFAULT_SEED};
use crate::fields::{sphere_area, sphere_integral, Chart, Field, Input, Jet, SphereRule, Valence, VolumeRule, MAXN};
use crate::geometry::tensor::to_mat;
use crate::geometry::{div_con2, dshift, PointGeom, JT};
use crate::linearized::{
    adjoint_point, bump_jet, pairing_terms, seeded_directions, support_region, Asymptote, BasePoint, LapseShiftPair,
    SymPair,
};

/// `0` at `r_inner`, `1` from `transition` on: `1 - exp(1 - 1/(1 - t^2))`, `t = (r - r_inner)/(transition - r_inner)`.
pub fn ramp(r: Jet, r_inner: f64, transition: f64) -> Jet {
    let t = (r - r_inner) / (transition - r_inner);
    1.0 - bump_jet(&[t], &[0.0], 1.0)
}

/// Smooth pair equal to `(0, 0)` at `r_inner` and exactly `(a, b)` for `|x| >= transition_radius`.
pub fn reference_pair(a: f64, b: &[f64], chart: &Arc<Chart>, transition_radius: f64) -> Result<LapseShiftPair> {
    if !(transition_radius > chart.r_inner && transition_radius < chart.r_outer) {
        return Err(Error::InvalidTransitionRadius(transition_radius));
    }
    if b.len() != chart.n {
        return Err(Error::InvalidParameters(format!("shift asymptote needs {} entries", chart.n)));
    }
    let ri = chart.r_inner;
    let f = if a == 0.0 {
        Field::zeros(chart, Valence::SCALAR, false)
    } else {
        Field::scalar(chart, move |x| ramp(crate::fields::radius(x), ri, transition_radius) * a)
    };
    let x = if b.iter().all(|&v| v == 0.0) {
        Field::zeros(chart, Valence::VECTOR, false)
    } else {
        let bv = b.to_vec();
        Field::vector(chart, move |x| {
            let s = ramp(crate::fields::radius(x), ri, transition_radius);
            bv.iter().map(|&v| s * v).collect()
        })
    };
    Ok(LapseShiftPair { f, x, asymptote: Some(Asymptote { a, b: b.to_vec() }) })
}

/// Quadrature settings for the shell integrals.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShellQuadrature {
    /// Geometric radial panels per doubling of the radius.
    pub panels_per_octave: usize,
    pub radial_order: usize,
    pub quad_order: usize,
}

impl Default for ShellQuadrature {
    fn default() -> Self {
        ShellQuadrature { panels_per_octave: 4, radial_order: 8, quad_order: DEFAULT_QUAD_ORDER }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub base: InitialDataSet,
    pub reference: LapseShiftPair,
    pub transition_radius: f64,
    /// Outer radii whose truncated values are extrapolated; empty when the chart is too small.
    pub radii: Vec<f64>,
    pub quadrature: ShellQuadrature,
    pub support_quadrature: SupportQuadrature,
}

impl HamiltonianSpec {
    /// Spec with the reference pair for `(a, b)` and default radii.
    pub fn new(base: InitialDataSet, a: f64, b: &[f64], transition_radius: f64) -> Result<HamiltonianSpec> {
        let reference = reference_pair(a, b, &base.chart, transition_radius)?;
        let radii = default_radii(&base.chart, transition_radius).unwrap_or_default();
        Ok(HamiltonianSpec {
            base,
            reference,
            transition_radius,
            radii,
            quadrature: ShellQuadrature::default(),
            support_quadrature: SupportQuadrature::default(),
        })
    }

    fn asymptote(&self) -> (f64, Vec<f64>) {
        match &self.reference.asymptote {
            Some(a) => (a.a, a.b.clone()),
            None => (0.0, vec![0.0; self.base.n()]),
        }
    }
}

/// Three geometric radii in `[max(r_outer/8, 1.25 transition), r_outer/2]`.
pub fn default_radii(chart: &Chart, transition_radius: f64) -> Result<Vec<f64>> {
    let lo = (chart.r_outer / 8.0).max(1.25 * transition_radius);
    let hi = chart.r_outer / 2.0;
    if !(lo < hi) {
        return Err(Error::InvalidTransitionRadius(transition_radius));
    }
    Ok((0..3).map(|k| lo * (hi / lo).powf(k as f64 / 2.0)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianValue {
    pub value: f64,
    pub error: f64,
    /// Flux added at the inner sphere; zero whenever the reference pair vanishes there.
    pub inner_correction: f64,
    /// Truncated values `(R, H_R)` before extrapolation.
    pub samples: Vec<(f64, f64)>,
}

fn check_dim(n: usize) -> Result<()> {
    if n != 3 {
        return Err(Error::UnsupportedDimension { n, what: "Hamiltonian volume integrals" });
    }
    Ok(())
}

/// `V = div_E gamma - d tr_E gamma` as jets (value and first derivatives).
fn background_v(n: usize, gamma: &[[Jet; MAXN]; MAXN]) -> Vec<Jet> {
    (0..n)
        .map(|j| {
            let mut s = Jet::constant(0.0);
            for i in 0..n {
                s += dshift(&gamma[i][j], i) - dshift(&gamma[i][i], j);
            }
            s
        })
        .collect()
}

struct Integrand {
    /// Density of the first integral without the constraint part.
    div_part: f64,
    /// `Phibar(gamma, tau) . (f0, X0)`.
    constraint: f64,
    /// Density of the second integral.
    gradient: f64,
    /// `sqrt(det g)`.
    vol: f64,
}

/// Inputs: base g(1), base pi(1), gamma(2), tau(1), f0(1), X0(1).
fn integrand(n: usize, x: &[f64], j: &[Vec<Jet>]) -> Result<Integrand> {
    let pb = PointGeom::new(n, &j[0], x)?;
    let pt = PointGeom::new(n, &j[2], x)?;
    let pim = to_mat(&JT::from_stored(n, Valence::CON2, true, &j[1]));
    let tau = to_mat(&JT::from_stored(n, Valence::CON2, true, &j[3]));
    let gam = to_mat(&JT::from_stored(n, Valence::COV2, true, &j[2]));
    let jb = div_con2(&pb, &pim);
    let v = background_v(n, &gam);
    let g = pb.gv();
    let gi = pb.giv();
    let mut div_v = 0.0;
    for a in 0..n {
        for c in 0..n {
            let mut d = v[c].d[a];
            for k in 0..n {
                d -= pb.gam[k][a][c].v * v[k].v;
            }
            div_v += gi[a][c] * d;
        }
    }
    let div_tau = div_con2(&pb, &tau);
    let (two_mu, jt) = phi_point(&pt, &tau);
    let gj = gamma_dot_j(&pb, &pt, &jb);
    let f0 = &j[4][0];
    let x0 = &j[5];
    let mut div_part = div_v * f0.v;
    let mut constraint = two_mu * f0.v;
    let mut gradient = 0.0;
    for a in 0..n {
        for c in 0..n {
            div_part += g[a][c] * div_tau[a].v * x0[c].v;
            constraint += g[a][c] * (jt[a] + 0.5 * gj[a]) * x0[c].v;
            gradient += gi[a][c] * v[a].v * f0.d[c];
            // tau^{ac} g_ck nabla_a X0^k
            for k in 0..n {
                let mut nx = x0[k].d[a];
                for l in 0..n {
                    nx += pb.gam[k][a][l].v * x0[l].v;
                }
                gradient += tau[a][c].v * g[c][k] * nx;
            }
        }
    }
    Ok(Integrand { div_part, constraint, gradient, vol: pb.sqrt_det })
}

fn inputs<'a>(spec: &'a HamiltonianSpec, target: (&'a Field, &'a Field)) -> [Input<'a>; 6] {
    [
        Input::new(&spec.base.g, 1),
        Input::new(&spec.base.pi, 1),
        Input::new(target.0, 2),
        Input::new(target.1, 1),
        Input::new(&spec.reference.f, 1),
        Input::new(&spec.reference.x, 1),
    ]
}

/// Both volume integrals of the Hamiltonian over an arbitrary rule, as `(volume form, constraint part)`.
pub fn hamiltonian_integral(spec: &HamiltonianSpec, target: (&Field, &Field), rule: &VolumeRule) -> Result<(f64, f64)> {
    let n = spec.base.n();
    let inp = inputs(spec, target);
    let v = rule.integrate_many(&inp, 2, |x, j, out| {
        let t = integrand(n, x, j)?;
        out[0] = (t.div_part - t.constraint + t.gradient) * t.vol;
        out[1] = t.constraint * t.vol;
        Ok(())
    })?;
    Ok((v[0], v[1]))
}

fn shell(spec: &HamiltonianSpec, r_lo: f64, r_hi: f64) -> VolumeRule {
    let q = spec.quadrature;
    let octaves = (r_hi / r_lo).log2().max(0.25);
    let panels = ((q.panels_per_octave as f64) * octaves).ceil() as usize;
    VolumeRule::shell(r_lo, r_hi, panels.max(1), q.radial_order, q.quad_order)
}

/// Flux of `Z = f0 V + tau(X0)` through the inner sphere, in the `g` measure.
fn inner_flux(spec: &HamiltonianSpec, target: (&Field, &Field)) -> Result<f64> {
    let n = spec.base.n();
    let rule = SphereRule::product(spec.quadrature.quad_order);
    let inp = inputs(spec, target);
    let v = sphere_integral(&inp, spec.base.chart.r_inner, &rule, |x, nu, j| {
        let pb = PointGeom::new(n, &j[0], x)?;
        let gam = to_mat(&JT::from_stored(n, Valence::COV2, true, &j[2]));
        let tau = to_mat(&JT::from_stored(n, Valence::CON2, true, &j[3]));
        let v = background_v(n, &gam);
        let mut s = 0.0;
        for a in 0..n {
            let mut z = 0.0;
            for c in 0..n {
                z += pb.gi[a][c].v * v[c].v * j[4][0].v;
                for k in 0..n {
                    z += tau[a][c].v * pb.g[c][k].v * j[5][k].v;
                }
            }
            s += z * nu[a];
        }
        Ok(s * pb.sqrt_det)
    })?;
    Ok(v.value)
}

/// Volume-form value of the Hamiltonian at `target`, extrapolated over the outer radii.
pub fn hamiltonian_value(spec: &HamiltonianSpec, target: (&Field, &Field)) -> Result<HamiltonianValue> {
    check_dim(spec.base.n())?;
    let inner = inner_flux(spec, target)?;
    let mut samples = Vec::new();
    let mut acc = 0.0;
    let mut r_lo = spec.base.chart.r_inner;
    for &r in &spec.radii {
        acc += hamiltonian_integral(spec, target, &shell(spec, r_lo, r))?.0;
        r_lo = r;
        samples.push((r, acc + inner));
    }
    let (value, error) = extrapolate_flux(&samples, Some(spec.base.type_params.q))?;
    Ok(HamiltonianValue { value, error, inner_correction: inner, samples })
}

/// Surface-form value: ADM charges of the target minus the extrapolated constraint integral.
pub fn hamiltonian_surface(spec: &HamiltonianSpec, target: &InitialDataSet) -> Result<HamiltonianValue> {
    let n = spec.base.n();
    check_dim(n)?;
    let (a, b) = spec.asymptote();
    let charges = adm_charges(target, &spec.radii)?;
    let adm = (n - 1) as f64
        * sphere_area(n)
        * (2.0 * a * charges.e + b.iter().zip(&charges.p).map(|(u, v)| u * v).sum::<f64>());
    let mut samples = Vec::new();
    let mut acc = 0.0;
    let mut r_lo = spec.base.chart.r_inner;
    for &r in &spec.radii {
        acc += hamiltonian_integral(spec, (&target.g, &target.pi), &shell(spec, r_lo, r))?.1;
        r_lo = r;
        samples.push((r, adm - acc));
    }
    let (value, error) = extrapolate_flux(&samples, Some(spec.base.type_params.q))?;
    Ok(HamiltonianValue { value, error: error + charges.e_err, inner_correction: 0.0, samples })
}

/// Quadrature for integrals over the support of a compact direction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupportQuadrature {
    pub radial_panels: usize,
    pub radial_order: usize,
    pub quad_order: usize,
}

impl Default for SupportQuadrature {
    fn default() -> Self {
        SupportQuadrature { radial_panels: 12, radial_order: 8, quad_order: 32 }
    }
}

/// Polar Gauss rule on the ball circumscribing the support box of `dir`, centred on the box,
/// with a radial break at the inscribed radius so a ball-shaped support edge falls on a panel boundary.
fn support_rule(spec: &HamiltonianSpec, dir: &SymPair) -> Result<VolumeRule> {
    let chart = &spec.base.chart;
    check_dim(chart.n)?;
    support_region(chart, dir)?;
    let s = dir.support().ok_or(Error::SupportTouchesBoundary)?;
    let n = chart.n;
    let center: Vec<f64> = (0..n).map(|a| 0.5 * (s.lo[a] + s.hi[a])).collect();
    let outer = (0..n).map(|a| 0.25 * (s.hi[a] - s.lo[a]).powi(2)).sum::<f64>().sqrt();
    let inner = (0..n).map(|a| 0.5 * (s.hi[a] - s.lo[a])).fold(f64::INFINITY, f64::min);
    let q = spec.support_quadrature;
    Ok(VolumeRule::ball(&center, &[inner, outer], q.radial_panels, q.radial_order, q.quad_order))
}

/// `DH(h, w) = -int (h, w) . DPhibar*(f0, X0) dmu_g` for a compactly supported direction.
pub fn hamiltonian_gradient_pairing(spec: &HamiltonianSpec, dir: &SymPair) -> Result<f64> {
    let n = spec.base.n();
    let rule = support_rule(spec, dir)?;
    let inp = [
        Input::new(&spec.base.g, 2),
        Input::new(&spec.base.pi, 1),
        Input::new(&spec.reference.f, 2),
        Input::new(&spec.reference.x, 1),
        Input::new(&dir.h, 0),
        Input::new(&dir.w, 0),
    ];
    let (hs, ws) = (dir.h.symmetric, dir.w.symmetric);
    let v = rule.integrate(&inp, |x, j| {
        let bp = BasePoint::new(n, &j[0], &j[1], x)?;
        let ad = adjoint_point(&bp, &j[2][0], &j[3], Variant::Modified);
        let h = to_mat(&JT::from_stored(n, Valence::COV2, hs, &j[4]));
        let w = to_mat(&JT::from_stored(n, Valence::CON2, ws, &j[5]));
        let (g, gi) = (bp.p.gv(), bp.p.giv());
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += gi[a][c] * gi[b][d] * h[a][b].v * ad.a[c][d] + g[a][c] * g[b][d] * w[a][b].v * ad.b[c][d];
                    }
                }
            }
        }
        Ok(-s * bp.p.sqrt_det)
    })?;
    Ok(v)
}

/// Symmetric difference quotient of the Hamiltonian along `dir`, Richardson-extrapolated from steps `t` and `t/2`.
///
/// Only the support of `dir` contributes to the difference, so both values are integrated over that ball.
pub fn hamiltonian_directional_fd(spec: &HamiltonianSpec, dir: &SymPair, t: f64) -> Result<f64> {
    let rule = support_rule(spec, dir)?;
    let eval = |s: f64| -> Result<f64> {
        let g = spec.base.g.combine(1.0, &dir.h, s)?;
        let p = spec.base.pi.combine(1.0, &dir.w, s)?;
        Ok(hamiltonian_integral(spec, (&g, &p), &rule)?.0)
    };
    let quotient = |s: f64| -> Result<f64> { Ok((eval(s)? - eval(-s)?) / (2.0 * s)) };
    let (d1, d2) = (quotient(t)?, quotient(t / 2.0)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub max_residual: f64,
    pub per_direction: Vec<f64>,
}

/// Number of seeded directions in the stationarity batch.
pub const STATIONARITY_DIRECTIONS: usize = 6;

/// `max_i |DH(h_i, w_i) - int (f1, X1) . DPhibar(h_i, w_i) dmu_g| / ||(h_i, w_i)||` over a seeded batch.
pub fn stationarity_residual(
    spec: &HamiltonianSpec,
    multiplier: &LapseShiftPair,
    seed: u64,
) -> Result<StationarityReport> {
    let chart = &spec.base.chart;
    let dirs = seeded_directions(chart, seed, STATIONARITY_DIRECTIONS, 0.5)?;
    let mut per = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let region = support_region(chart, d)?;
        let sampled = SymPair { h: d.h.sample(), w: d.w.sample() };
        let dh = -pairing_terms(&spec.base, &spec.reference, &sampled, &region)?.1;
        let c = pairing_terms(&spec.base, multiplier, &sampled, &region)?.0;
        per.push((dh - c).abs() / d.l2_norm()?);
    }
    let max_residual = per.iter().copied().fold(0.0, f64::max);
    Ok(StationarityReport { max_residual, per_direction: per })
}

/// Uses the fixed default seed for the direction batch.
pub fn stationarity_residual_default(
    spec: &HamiltonianSpec,
    multiplier: &LapseShiftPair,
) -> Result<StationarityReport> {
    stationarity_residual(spec, multiplier, DEFAULT_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_limits() {
        let r = |v: f64| ramp(Jet::constant(v), 1.0, 4.0).v;
        assert_eq!(r(1.0), 0.0);
        assert_eq!(r(4.0), 1.0);
        assert_eq!(r(7.0), 1.0);
        assert!(r(2.5) > 0.0 && r(2.5) < 1.0);
    }

    #[test]
    fn zero_reference_is_identically_zero() {
        let c = Chart::new(3, 1.0, 8.0, 17, 4).unwrap();
        let p = reference_pair(0.0, &[0.0; 3], &c, 4.0).unwrap();
        assert_eq!(p.f.values_at(&[2.0, 0.0, 0.0]), vec![0.0]);
        assert!(reference_pair(1.0, &[0.0; 3], &c, 9.0).is_err());
    }
}
