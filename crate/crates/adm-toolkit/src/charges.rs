//! ADM energy-momentum from sphere fluxes, limit extrapolation in the radius,
//! and the flux identities used in the expansion analysis.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constraints::InitialDataSet;
use crate::error::{Error, Result};
use crate::fields::quadrature::{check_radius, DEFAULT_QUAD_ORDER, DEFAULT_SEED};
use crate::fields::{sphere_area, sphere_integral, Field, Input, SphereRule, Valence};
use crate::geometry::PointGeom;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ADMCharges {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "E_err")]
    pub e_err: f64,
    #[serde(rename = "P_err")]
    pub p_err: Vec<f64>,
    pub radii_used: Vec<f64>,
}

/// Per-radius flux values before extrapolation.
#[derive(Clone, Debug, Serialize)]
pub struct FluxSamples {
    pub radii: Vec<f64>,
    pub energy: Vec<f64>,
    pub momentum: Vec<Vec<f64>>,
}

/// `{r_outer / 8, r_outer / 4, r_outer / 2}`, dropping radii not strictly above `r_inner`.
pub fn default_radii(ids: &InitialDataSet) -> Vec<f64> {
    let c = &ids.chart;
    [8.0, 4.0, 2.0].iter().map(|d| c.r_outer / d).filter(|&r| r > c.r_inner).collect()
}

/// Normalized energy and momentum fluxes through `|x| = r` for each radius.
pub fn charge_fluxes(ids: &InitialDataSet, radii: &[f64]) -> Result<FluxSamples> {
    let n = ids.n();
    let rule = SphereRule::for_inputs(n, DEFAULT_QUAD_ORDER, &[&ids.g, &ids.pi], DEFAULT_SEED)?;
    let omega = sphere_area(n);
    let nm1 = (n - 1) as f64;
    let mut energy = Vec::new();
    let mut momentum = Vec::new();
    for &r in radii {
        check_radius(&ids.g, r)?;
        let gi = [Input::new(&ids.g, 1)];
        let e = sphere_integral(&gi, r, &rule, |_x, nu, j| {
            let g = &j[0];
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let gab = g[ids.g.slot(&[a, b])].d[a];
                    let gaa = g[ids.g.slot(&[a, a])].d[b];
                    s += (gab - gaa) * nu[b];
                }
            }
            Ok(s)
        })?;
        energy.push(e.value / (2.0 * nm1 * omega));
        let mut p = Vec::with_capacity(n);
        for i in 0..n {
            let v = sphere_integral(&[Input::new(&ids.pi, 0)], r, &rule, |_x, nu, j| {
                Ok((0..n).map(|b| j[0][ids.pi.slot(&[i, b])].v * nu[b]).sum())
            })?;
            p.push(v.value / (nm1 * omega));
        }
        momentum.push(p);
    }
    Ok(FluxSamples { radii: radii.to_vec(), energy, momentum })
}

/// ADM energy and momentum with extrapolation in the radius (model exponent `q`).
pub fn adm_charges(ids: &InitialDataSet, radii: &[f64]) -> Result<ADMCharges> {
    if radii.len() < 3 {
        return Err(Error::TooFewRadii { got: radii.len(), need: 3 });
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let s = charge_fluxes(ids, &radii)?;
    let rate = Some(ids.type_params.q);
    let pairs = |v: &[f64]| radii.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let (e, e_err) = extrapolate_flux(&pairs(&s.energy), rate)?;
    let mut p = Vec::new();
    let mut p_err = Vec::new();
    for i in 0..ids.n() {
        let col: Vec<f64> = s.momentum.iter().map(|m| m[i]).collect();
        let (v, err) = extrapolate_flux(&pairs(&col), rate)?;
        p.push(v);
        p_err.push(err);
    }
    Ok(ADMCharges { e, p, e_err, p_err, radii_used: radii })
}

fn lsq(u: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    let k = u.len();
    let a = DMatrix::from_fn(k, degree + 1, |r, c| u[r].powi(c as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::DegenerateFit(format!("rank-deficient design (sigma ratio {:e})", smin / smax)));
    }
    let c = svd.solve(&b, 0.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let res = (&a * &c - &b).amax();
    Ok((c.iter().copied().collect(), res))
}

/// Extrapolates `flux(r)` to `r -> infinity` with a polynomial in `u = r^{-s}`.
///
/// The full fit uses degree `min(k - 1, 3)` for `k` samples; the error estimate is
/// its largest residual plus the change in the limit against the next lower degree.
pub fn extrapolate_flux(values: &[(f64, f64)], model_rate: Option<f64>) -> Result<(f64, f64)> {
    if values.len() < 3 {
        return Err(Error::TooFewRadii { got: values.len(), need: 3 });
    }
    let s = model_rate.unwrap_or(1.0);
    if !(s > 0.0) {
        return Err(Error::InvalidParameters(format!("model rate {s} must be positive")));
    }
    let r0 = values[0].0;
    if values.iter().all(|v| v.0 == r0) {
        return Err(Error::DegenerateFit("all radii equal".into()));
    }
    // Scale u to O(1) for conditioning.
    let umax = values.iter().map(|v| v.0.powf(-s)).fold(0.0, f64::max);
    let u: Vec<f64> = values.iter().map(|v| v.0.powf(-s) / umax).collect();
    let y: Vec<f64> = values.iter().map(|v| v.1).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Ok((y[0], 0.0));
    }
    let deg = (values.len() - 1).min(3);
    let (full, res) = lsq(&u, &y, deg)?;
    let (reduced, _) = lsq(&u, &y, deg - 1)?;
    Ok((full[0], res + (full[0] - reduced[0]).abs()))
}

/// Result of [`flux_identity_suite`].
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FluxDefects {
    /// `int (T_ij,j - T_ji,j) nu_i`.
    Tensor { defect: f64 },
    /// Per axis `j`: both sides of `int (Lap f) nu_j = int f_,ij nu_i`, and their difference;
    /// then the radial identity `int (x.nu) Lap f = int (f_,ij x_j + (n-1) f_,i) nu_i`.
    Scalar { lhs: Vec<f64>, rhs: Vec<f64>, defects: Vec<f64>, radial_lhs: f64, radial_rhs: f64, radial_defect: f64 },
}

pub fn flux_identity_suite(field: &Field, radius: f64) -> Result<FluxDefects> {
    check_radius(field, radius)?;
    let n = field.n();
    let rule = SphereRule::for_inputs(n, DEFAULT_QUAD_ORDER, &[field], DEFAULT_SEED)?;
    match (field.valence.cov, field.valence.con) {
        (2, 0) | (0, 2) => {
            let v = sphere_integral(&[Input::new(field, 1)], radius, &rule, |_x, nu, j| {
                let mut s = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        s += (j[0][field.slot(&[i, k])].d[k] - j[0][field.slot(&[k, i])].d[k]) * nu[i];
                    }
                }
                Ok(s)
            })?;
            Ok(FluxDefects::Tensor { defect: v.value })
        }
        (0, 0) => {
            let inp = [Input::new(field, 2)];
            let lap = |f: &crate::fields::Jet| (0..n).map(|a| f.dd[a][a]).sum::<f64>();
            let mut lhs = Vec::new();
            let mut rhs = Vec::new();
            for jx in 0..n {
                lhs.push(sphere_integral(&inp, radius, &rule, |_x, nu, j| Ok(lap(&j[0][0]) * nu[jx]))?.value);
                rhs.push(
                    sphere_integral(&inp, radius, &rule, |_x, nu, j| {
                        Ok((0..n).map(|i| j[0][0].dd[i][jx] * nu[i]).sum())
                    })?
                    .value,
                );
            }
            let radial_lhs = sphere_integral(&inp, radius, &rule, |x, nu, j| {
                let xn: f64 = (0..n).map(|a| x[a] * nu[a]).sum();
                Ok(xn * lap(&j[0][0]))
            })?
            .value;
            let radial_rhs = sphere_integral(&inp, radius, &rule, |x, nu, j| {
                let f = &j[0][0];
                let mut s = 0.0;
                for i in 0..n {
                    let mut t = (n - 1) as f64 * f.d[i];
                    for k in 0..n {
                        t += f.dd[i][k] * x[k];
                    }
                    s += t * nu[i];
                }
                Ok(s)
            })?
            .value;
            let defects = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            Ok(FluxDefects::Scalar {
                lhs,
                rhs,
                defects,
                radial_lhs,
                radial_rhs,
                radial_defect: radial_lhs - radial_rhs,
            })
        }
        _ => Err(Error::UnsupportedValence { cov: field.valence.cov, con: field.valence.con }),
    }
}

/// `int_{|x| = r} -R_ij x_i nu_j / ((n-1)(n-2) omega_{n-1})`, which tends to `E`.
pub fn ricci_energy_flux(g: &Field, radius: f64) -> Result<f64> {
    check_radius(g, radius)?;
    if g.valence != Valence::COV2 {
        return Err(Error::UnsupportedValence { cov: g.valence.cov, con: g.valence.con });
    }
    let n = g.n();
    let rule = SphereRule::for_inputs(n, DEFAULT_QUAD_ORDER, &[g], DEFAULT_SEED)?;
    let v = sphere_integral(&[Input::new(g, 2)], radius, &rule, |x, nu, j| {
        let p = PointGeom::new(n, &j[0], x)?;
        let ric = p.ricci();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s -= ric[a][b] * x[a] * nu[b];
            }
        }
        Ok(s)
    })?;
    Ok(v.value / ((n - 1) as f64 * (n - 2) as f64 * sphere_area(n)))
}

/// Difference between the Ricci flux at each radius and `energy`.
pub fn ricci_energy_defects(g: &Field, radii: &[f64], energy: f64) -> Result<Vec<f64>> {
    radii.iter().map(|&r| Ok(ricci_energy_flux(g, r)? - energy)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence_extrapolates_exactly() {
        let v = [(4.0, 2.5), (8.0, 2.5), (16.0, 2.5)];
        assert_eq!(extrapolate_flux(&v, Some(1.0)).unwrap(), (2.5, 0.0));
    }

    #[test]
    fn exact_model_is_reproduced() {
        let v: Vec<(f64, f64)> = [4.0, 8.0, 16.0].iter().map(|&r: &f64| (r, 1.0 + r.recip())).collect();
        let (l, _) = extrapolate_flux(&v, Some(1.0)).unwrap();
        assert!((l - 1.0).abs() < 1e-13);
    }

    #[test]
    fn quadratic_tail_within_tolerance() {
        let v: Vec<(f64, f64)> =
            [4.0, 8.0, 16.0].iter().map(|&r: &f64| (r, 1.0 + r.recip() + 0.1 * r.powi(-2))).collect();
        let (l, err) = extrapolate_flux(&v, Some(1.0)).unwrap();
        assert!((l - 1.0).abs() <= 0.01);
        assert!(err >= 0.0);
    }

    #[test]
    fn equal_radii_are_degenerate() {
        let v = [(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)];
        assert!(matches!(extrapolate_flux(&v, None), Err(Error::DegenerateFit(_))));
    }
}
