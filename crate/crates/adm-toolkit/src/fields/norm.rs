//! Discrete estimators for weighted Hölder and Sobolev norms on the exterior chart.
//!
//! Both estimators sample the true norm on grid nodes of the annulus and are
//! lower bounds that converge under refinement.

use serde::{Deserialize, Serialize};

use super::chart::Region;
use super::eval::{map_nodes, ordered_sum, Input};
use super::field::Field;
use crate::error::{Error, Result};

/// Decay class parameters `(p, q, q0, alpha)` and the derivative count `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayWeight {
    pub q: f64,
    pub k: usize,
    pub alpha: f64,
    pub p: f64,
}

/// Asymptotic-flatness type of an initial data set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeParams {
    pub p: f64,
    pub q: f64,
    pub q0: f64,
    pub alpha: f64,
}

impl Default for TypeParams {
    fn default() -> Self {
        TypeParams { p: 4.0, q: 1.0, q0: 1.0, alpha: 0.5 }
    }
}

impl TypeParams {
    /// Checks `q > 0`, `alpha` in `(0, 1)`, `p > n` and `q + alpha > n - 2`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let nf = n as f64;
        if !(self.q > 0.0 && self.alpha > 0.0 && self.alpha < 1.0 && self.p > nf && self.q0 > 0.0) {
            return Err(Error::InvalidParameters(format!("decay type {self:?} out of range for n = {n}")));
        }
        if self.q + self.alpha <= nf - 2.0 {
            return Err(Error::InvalidParameters(format!("q + alpha = {} must exceed n - 2", self.q + self.alpha)));
        }
        Ok(())
    }

    /// Auxiliary rate `q1 = min(q0, 2 + 2q - n, 0.9)`.
    pub fn q1(&self, n: usize) -> f64 {
        self.q0.min(2.0 + 2.0 * self.q - n as f64).min(0.9)
    }

    pub fn weight(&self, k: usize) -> DecayWeight {
        DecayWeight { q: self.q, k, alpha: self.alpha, p: self.p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMode {
    Holder,
    Sobolev,
}

/// Multi-indices of order at most `k` (k <= 2), as lists of axes.
fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    if k >= 1 {
        out.extend((0..n).map(|a| vec![a]));
    }
    if k >= 2 {
        for a in 0..n {
            for b in a..n {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

/// Weighted norm estimator over the chart annulus.
pub fn weighted_norm(field: &Field, weight: DecayWeight, mode: NormMode) -> Result<f64> {
    weighted_norm_on(field, weight, mode, &field.chart.annulus())
}

/// Weighted norm estimator restricted to `region`.
pub fn weighted_norm_on(field: &Field, weight: DecayWeight, mode: NormMode, region: &Region) -> Result<f64> {
    let s = sample_derivatives(field, weight, region)?;
    match mode {
        NormMode::Sobolev => {
            let n = field.n();
            let per: Vec<f64> = s
                .vals
                .iter()
                .zip(&s.radii)
                .map(|(v, &r)| {
                    let mut acc = 0.0;
                    for (t, a) in v.iter().enumerate() {
                        if a.is_finite() {
                            let ord = s.idx[t % s.idx.len()].len() as f64;
                            acc += (r.powf(ord + weight.q) * a).abs().powf(weight.p);
                        }
                    }
                    acc * r.powi(-(n as i32))
                })
                .collect();
            Ok((ordered_sum(&per) * field.chart.h.powi(n as i32)).powf(1.0 / weight.p))
        }
        NormMode::Holder => {
            let (sup, semi) = holder_parts(field, weight, region, &s);
            Ok(sup + semi)
        }
    }
}

/// Hölder estimator split into the weighted sup terms and the seminorm term.
pub fn holder_split(field: &Field, weight: DecayWeight, region: &Region) -> Result<(f64, f64)> {
    let s = sample_derivatives(field, weight, region)?;
    Ok(holder_parts(field, weight, region, &s))
}

struct Sampled {
    idx: Vec<Vec<usize>>,
    /// Per node, component-major list of partial derivatives.
    vals: Vec<Vec<f64>>,
    radii: Vec<f64>,
}

fn sample_derivatives(field: &Field, weight: DecayWeight, region: &Region) -> Result<Sampled> {
    if weight.k > 2 || weight.k as u8 > field.order() {
        return Err(Error::InsufficientDerivatives(format!("k = {} not available", weight.k)));
    }
    let chart = &field.chart;
    let n = chart.n;
    let idx = multi_indices(n, weight.k);
    let nc = field.ncomp();
    let ni = idx.len();
    let vals = map_nodes(chart, &[Input::new(field, weight.k as u8)], region, nc * ni, |_x, j, out| {
        for c in 0..nc {
            let jet = &j[0][c];
            for (t, ix) in idx.iter().enumerate() {
                out[c * ni + t] = match ix.len() {
                    0 => jet.v,
                    1 => jet.d[ix[0]],
                    _ => jet.dd[ix[0]][ix[1]],
                };
            }
        }
        Ok(())
    })?;
    let radii = region.nodes.iter().map(|&l| chart.radius_of(&chart.node_x(l)[..n])).collect();
    Ok(Sampled { idx, vals, radii })
}

fn holder_parts(field: &Field, weight: DecayWeight, region: &Region, s: &Sampled) -> (f64, f64) {
    let nc = field.ncomp();
    let ni = s.idx.len();
    let mut total = 0.0;
    for c in 0..nc {
        for (t, ix) in s.idx.iter().enumerate() {
            let mut sup: f64 = 0.0;
            for (v, &r) in s.vals.iter().zip(&s.radii) {
                let a = v[c * ni + t];
                if a.is_finite() {
                    sup = sup.max((r.powf(ix.len() as f64 + weight.q) * a).abs());
                }
            }
            total += sup;
        }
    }
    (total, holder_seminorm(field, &s.vals, &s.radii, region, &s.idx, weight))
}

/// Axis-pair sample of the top-order Hölder seminorm term.
fn holder_seminorm(
    field: &Field,
    vals: &[Vec<f64>],
    radii: &[f64],
    region: &Region,
    idx: &[Vec<usize>],
    weight: DecayWeight,
) -> f64 {
    let chart = &field.chart;
    let n = chart.n;
    let nc = field.ncomp();
    let ni = idx.len();
    let mut pos = vec![usize::MAX; chart.total()];
    for (p, &l) in region.nodes.iter().enumerate() {
        pos[l] = p;
    }
    let top: Vec<usize> = (0..ni).filter(|&t| idx[t].len() == weight.k).collect();
    let mut total = 0.0;
    for c in 0..nc {
        for &t in &top {
            let mut sup: f64 = 0.0;
            for (p, &l) in region.nodes.iter().enumerate() {
                let r = radii[p];
                let a = vals[p][c * ni + t];
                if !a.is_finite() {
                    continue;
                }
                let max_off = ((r / 2.0) / chart.h).floor() as usize;
                let m = chart.multi(l);
                for ax in 0..n {
                    for off in 1..=max_off {
                        if m[ax] + off >= chart.dim {
                            break;
                        }
                        let q = pos[l + off * chart.stride(ax)];
                        if q == usize::MAX {
                            continue;
                        }
                        let b = vals[q][c * ni + t];
                        if !b.is_finite() {
                            continue;
                        }
                        let d = off as f64 * chart.h;
                        let s =
                            r.powf(weight.alpha + weight.k as f64 + weight.q) * (a - b).abs() / d.powf(weight.alpha);
                        sup = sup.max(s);
                    }
                }
            }
            total += sup;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::chart::Chart;
    use crate::fields::jet::radius;

    #[test]
    fn holder_of_pure_power_is_one() {
        let c = Chart::new(3, 1.0, 6.0, 25, 4).unwrap();
        let f = Field::scalar(&c, |x| radius(x).powf(-1.5));
        let w = DecayWeight { q: 1.5, k: 0, alpha: 0.5, p: 4.0 };
        let (sup, semi) = holder_split(&f, w, &c.annulus()).unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
        assert!(semi > 0.0);
        assert!((weighted_norm(&f, w, NormMode::Holder).unwrap() - sup - semi).abs() < 1e-12);
        let z = Field::scalar(&c, |_x| crate::fields::jet::Jet::constant(0.0));
        assert_eq!(weighted_norm(&z, w, NormMode::Holder).unwrap(), 0.0);
        assert_eq!(weighted_norm(&z, w, NormMode::Sobolev).unwrap(), 0.0);
    }

    #[test]
    fn q1_default() {
        let t = TypeParams { p: 4.0, q: 0.75, q0: 1.0, alpha: 0.5 };
        assert!((t.q1(3) - 0.5).abs() < 1e-15);
    }
}
