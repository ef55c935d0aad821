//! Lapse-shift expansions near infinity: auxiliary potentials, coefficient fits, the
//! energy-momentum relations among the coefficients and the rigidity diagnostic.

pub mod poisson;
mod rigidity;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::charges::ADMCharges;
use crate::constraints::InitialDataSet;
use crate::error::{Error, Result};
use crate::fields::eval::Kernel;
use crate::fields::quadrature::{DEFAULT_QUAD_ORDER, DEFAULT_SEED};
use crate::fields::{map_nodes, map_points, sphere_area, sym_index, Field, Input, Jet, Region, SphereRule};
use crate::linearized::LapseShiftPair;

pub use poisson::{AnnulusLaplacian, PoissonConfig};
pub use rigidity::{rigidity_div_y, rigidity_divy_check, RigidityReport, Slab};

/// Flat potentials `phi`, `V_i` with `Delta_0 phi = tr_0 pi` and
/// `Delta_0 V_i = 1/2 g_jj,i - g_ij,j`, plus the fitted `r^{2-n}` coefficient of `div_0 V`.
#[derive(Clone, Debug)]
pub struct AuxPotentials {
    pub phi: Field,
    pub v: Vec<Field>,
    pub beta: f64,
    pub beta_err: f64,
    /// CG iterations per solve, `phi` first.
    pub iterations: Vec<usize>,
    /// Largest relative residual over the solves.
    pub residual: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AuxConfig {
    pub poisson: PoissonConfig,
    /// Spheres for the `beta` fit; defaults to [`default_window`].
    pub window: Option<Vec<f64>>,
    /// Remainder rate; defaults to the data's `q1`.
    pub q1: Option<f64>,
}

/// Six geometric radii from `max(2 r_inner, r_outer / 8)` to `r_outer / 2`.
pub fn default_window(ids: &InitialDataSet) -> Vec<f64> {
    let c = &ids.chart;
    let lo = (2.0 * c.r_inner).max(c.r_outer / 8.0);
    let hi = c.r_outer / 2.0;
    let k = 6;
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

pub fn solve_aux_poisson(ids: &InitialDataSet) -> Result<AuxPotentials> {
    solve_aux_poisson_with(ids, &AuxConfig::default())
}

pub fn solve_aux_poisson_with(ids: &InitialDataSet, cfg: &AuxConfig) -> Result<AuxPotentials> {
    let n = ids.n();
    let chart = &ids.chart;
    let lap = AnnulusLaplacian::new(chart);
    let region = Region { nodes: lap.nodes.clone() };
    let rows = map_nodes(chart, &[Input::new(&ids.g, 1), Input::new(&ids.pi, 0)], &region, n + 1, |_x, j, out| {
        out[0] = (0..n).map(|i| j[1][sym_index(i, i, n)].v).sum();
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += 0.5 * j[0][sym_index(k, k, n)].d[i] - j[0][sym_index(i, k, n)].d[k];
            }
            out[1 + i] = s;
        }
        Ok(())
    })?;
    let radii: Vec<f64> = lap.nodes.iter().map(|&l| chart.radius_of(&chart.node_x(l)[..n])).collect();
    let sources: Vec<Vec<f64>> = (0..=n).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    for (c, s) in sources.iter().enumerate() {
        check_decay(s, &radii, chart.r_outer, c)?;
    }
    let solved = sources.par_iter().map(|s| lap.solve(s, &cfg.poisson)).collect::<Result<Vec<_>>>()?;
    let iterations = solved.iter().map(|s| s.1).collect();
    let residual = solved.iter().map(|s| s.2).fold(0.0, f64::max);
    let mut fields = solved.iter().map(|s| lap.to_field(&s.0)).collect::<Result<Vec<_>>>()?;
    let phi = fields.remove(0);
    let window = cfg.window.clone().unwrap_or_else(|| default_window(ids));
    let q1 = cfg.q1.unwrap_or_else(|| ids.type_params.q1(n));
    let mut aux = AuxPotentials { phi, v: fields, beta: 0.0, beta_err: 0.0, iterations, residual };
    let (beta, beta_err) = fit_beta(ids, &aux, &window, q1)?;
    aux.beta = beta;
    aux.beta_err = beta_err;
    Ok(aux)
}

/// Rejects a source whose sup over the outer quarter-annulus exceeds its sup one octave in.
fn check_decay(s: &[f64], radii: &[f64], r_outer: f64, comp: usize) -> Result<()> {
    let sup = |lo: f64, hi: f64| {
        s.iter().zip(radii).filter(|(_, &r)| r >= lo && r < hi).fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
    };
    let total = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mid = sup(r_outer / 4.0, r_outer / 2.0);
    let outer = sup(r_outer / 2.0, 0.9 * r_outer);
    if outer > 1e-12 * total && outer > mid {
        return Err(Error::SourceNondecaying(format!(
            "component {comp}: sup {outer:e} on the outer shell exceeds {mid:e} one octave in"
        )));
    }
    Ok(())
}

/// Means over the sphere `|x| = radius` of the `ncomp` kernel outputs.
fn sphere_means(
    inputs: &[Input],
    radius: f64,
    rule: &SphereRule,
    ncomp: usize,
    kernel: impl Kernel,
) -> Result<Vec<f64>> {
    let n = rule.n;
    let pts: Vec<Vec<f64>> = rule.nodes.iter().map(|nu| nu[..n].iter().map(|v| v * radius).collect()).collect();
    let vals = map_points(&pts, inputs, ncomp, kernel)?;
    let area = sphere_area(n);
    Ok((0..ncomp).map(|c| vals.iter().zip(&rule.weights).map(|(v, w)| v[c] * w).sum::<f64>() / area).collect())
}

fn check_window(ids: &InitialDataSet, window: &[f64]) -> Result<()> {
    if window.len() < 3 {
        return Err(Error::WindowTooSmall(format!("{} spheres, need at least 3", window.len())));
    }
    let c = &ids.chart;
    if let Some(&r) = window.iter().find(|&&r| !(r > c.r_inner && r < c.r_outer)) {
        return Err(Error::RadiusOutOfChart { radius: r, r_inner: c.r_inner, r_outer: c.r_outer });
    }
    Ok(())
}

/// Least squares for `y(r) = c0 + c1 r^{2-n} + c2 r^{2-n-q1} [+ c3 r^{2-n-2 q1}]`, the last
/// term only with at least five radii; columns are scaled to unit size at the smallest radius.
fn fit_model(n: usize, radii: &[f64], y: &[f64], q1: f64) -> Result<Vec<f64>> {
    let e1 = 2.0 - n as f64;
    let exps: Vec<f64> = if radii.len() >= 5 { vec![0.0, e1, e1 - q1, e1 - 2.0 * q1] } else { vec![0.0, e1, e1 - q1] };
    let r0 = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let a = DMatrix::from_fn(radii.len(), exps.len(), |i, c| (radii[i] / r0).powf(exps[c]));
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditionedFit(format!("condition number {:e}", smax / smin)));
    }
    let c = svd.solve(&DVector::from_column_slice(y), 0.0).map_err(|e| Error::IllConditionedFit(e.to_string()))?;
    Ok(exps.iter().zip(c.iter()).map(|(e, v)| v * r0.powf(-e)).collect())
}

/// Fits `div_0 V - 1/2 (n - g_ii)` on the window; returns `(beta, |r^{2-n-q1}| coefficient)`.
pub fn fit_beta(ids: &InitialDataSet, aux: &AuxPotentials, window: &[f64], q1: f64) -> Result<(f64, f64)> {
    check_window(ids, window)?;
    let n = ids.n();
    let mut inputs = vec![Input::new(&ids.g, 0)];
    inputs.extend(aux.v.iter().map(|v| Input::new(v, 1)));
    let fields: Vec<&Field> = inputs.iter().map(|i| i.field).collect();
    let rule = SphereRule::for_inputs(n, DEFAULT_QUAD_ORDER, &fields, DEFAULT_SEED)?;
    let mut y = Vec::with_capacity(window.len());
    for &r in window {
        let m = sphere_means(&inputs, r, &rule, 1, |_x, j, out| {
            let div: f64 = (0..n).map(|i| j[1 + i][0].d[i]).sum();
            let tr: f64 = (0..n).map(|i| j[0][sym_index(i, i, n)].v).sum();
            out[0] = div - 0.5 * (n as f64 - tr);
            Ok(())
        })?;
        y.push(m[0]);
    }
    let c = fit_model(n, window, &y, q1)?;
    Ok((c[1], c[2].abs()))
}

/// Coefficients of `f = a + A r^{2-n} + ...` and `X^i = b_i + B_i r^{2-n} + ...`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub a: f64,
    pub b: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "B")]
    pub big_b: Vec<f64>,
    /// Largest `|y - c0 - c1 r^{2-n}| r^{n-2+q1}` over the window and components.
    pub residual_norm: f64,
    pub radii_window: (f64, f64),
}

/// Fits the expansion of `pair` from sphere means over `window`, after subtracting the
/// `phi` and `V` terms built from the pair's asymptote (or a preliminary fit without them).
pub fn fit_expansion(
    pair: &LapseShiftPair,
    ids: &InitialDataSet,
    aux: &AuxPotentials,
    window: &[f64],
    q1: Option<f64>,
) -> Result<ExpansionFit> {
    check_window(ids, window)?;
    let n = ids.n();
    let q1 = q1.unwrap_or_else(|| ids.type_params.q1(n));
    let (a0, b0) = match &pair.asymptote {
        Some(s) => (s.a, s.b.clone()),
        None => {
            let pre = fit_with(pair, aux, window, q1, 0.0, &vec![0.0; n], false)?;
            (pre.a, pre.b)
        }
    };
    fit_with(pair, aux, window, q1, a0, &b0, true)
}

fn fit_with(
    pair: &LapseShiftPair,
    aux: &AuxPotentials,
    window: &[f64],
    q1: f64,
    a0: f64,
    b0: &[f64],
    subtract: bool,
) -> Result<ExpansionFit> {
    let n = pair.f.n();
    let nf = n as f64;
    let mut inputs = vec![Input::new(&pair.f, 0), Input::new(&pair.x, 0), Input::new(&aux.phi, 1)];
    inputs.extend(aux.v.iter().map(|v| Input::new(v, 1)));
    let fields: Vec<&Field> = inputs.iter().map(|i| i.field).collect();
    let rule = SphereRule::for_inputs(n, DEFAULT_QUAD_ORDER, &fields, DEFAULT_SEED)?;
    let s = if subtract { 1.0 } else { 0.0 };
    let mut rows = Vec::with_capacity(window.len());
    for &r in window {
        rows.push(sphere_means(&inputs, r, &rule, n + 1, |_x, j: &[Vec<Jet>], out| {
            let dphi = |k: usize| j[2][0].d[k];
            out[0] = j[0][0].v - s * (0..n).map(|k| b0[k] * dphi(k)).sum::<f64>() / (2.0 * (nf - 1.0));
            for i in 0..n {
                let vik: f64 = (0..n).map(|k| b0[k] * j[3 + i][0].d[k]).sum();
                out[1 + i] = j[1][i].v - s * (2.0 / (nf - 1.0) * a0 * dphi(i) + vik);
            }
            Ok(())
        })?);
    }
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut residual_norm: f64 = 0.0;
    for c in 0..=n {
        let y: Vec<f64> = rows.iter().map(|row| row[c]).collect();
        let k = fit_model(n, window, &y, q1)?;
        for (&r, yv) in window.iter().zip(&y) {
            let rem = yv - k[0] - k[1] * r.powf(2.0 - nf);
            residual_norm = residual_norm.max(rem.abs() * r.powf(nf - 2.0 + q1));
        }
        coeffs.push(k);
    }
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(0.0, f64::max);
    Ok(ExpansionFit {
        a: coeffs[0][0],
        b: coeffs[1..].iter().map(|k| k[0]).collect(),
        big_a: coeffs[0][1],
        big_b: coeffs[1..].iter().map(|k| k[1]).collect(),
        residual_norm,
        radii_window: (lo, hi),
    })
}

/// Defects of `A = -aE + b.P / (2(n-2))`, `B_i = -2(n-1)/(n-2) b_i E` and `b_i E = -2 a P_i`.
#[derive(Clone, Debug, Serialize)]
pub struct RelationReport {
    pub lapse_defect: f64,
    pub shift_defect: Vec<f64>,
    pub proportionality_defect: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl RelationReport {
    pub fn max_defect(&self) -> f64 {
        self.shift_defect.iter().chain(&self.proportionality_defect).fold(self.lapse_defect, |m, v| m.max(*v))
    }
}

pub fn expansion_relations(fit: &ExpansionFit, charges: &ADMCharges, tolerance: f64) -> RelationReport {
    let n = fit.b.len();
    let nf = n as f64;
    let (e, p) = (charges.e, &charges.p);
    let bp: f64 = fit.b.iter().zip(p).map(|(u, v)| u * v).sum();
    let lapse_defect = (fit.big_a - (-fit.a * e + bp / (2.0 * (nf - 2.0)))).abs();
    let shift_defect: Vec<f64> =
        (0..n).map(|i| (fit.big_b[i] + 2.0 * (nf - 1.0) / (nf - 2.0) * fit.b[i] * e).abs()).collect();
    let proportionality_defect: Vec<f64> = (0..n).map(|i| (fit.b[i] * e + 2.0 * fit.a * p[i]).abs()).collect();
    let mut r = RelationReport { lapse_defect, shift_defect, proportionality_defect, tolerance, pass: false };
    r.pass = r.max_defect() <= tolerance;
    r
}

/// Which case of the asymptote classification applies, with the defect of its predicate.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum KidClass {
    /// `E != 0`, `a != 0`: `(a, b)` proportional to `(E, -2P)`; defect `|-2 a P - E b|`.
    Proportional { defect: f64 },
    /// `E != 0`, `a = 0`: `b` must vanish; defect `|b|`.
    VanishingShift { defect: f64 },
    /// `E = 0`: `a = 0` or `P = 0`; defect `min(|a|, |P|)`.
    ZeroEnergy { defect: f64 },
}

impl KidClass {
    pub fn defect(&self) -> f64 {
        match self {
            KidClass::Proportional { defect }
            | KidClass::VanishingShift { defect }
            | KidClass::ZeroEnergy { defect } => *defect,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.defect() <= tol
    }
}

/// `zero_tol` decides when `E` and `a` count as zero.
pub fn classify_kid(a: f64, b: &[f64], charges: &ADMCharges, zero_tol: f64) -> KidClass {
    let e = charges.e;
    let p = &charges.p;
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    if e.abs() <= zero_tol {
        let pn = norm(&mut p.iter().copied());
        return KidClass::ZeroEnergy { defect: a.abs().min(pn) };
    }
    if a.abs() <= zero_tol {
        return KidClass::VanishingShift { defect: norm(&mut b.iter().copied()) };
    }
    KidClass::Proportional { defect: norm(&mut (0..b.len()).map(|i| -2.0 * a * p[i] - b[i] * e)) }
}
