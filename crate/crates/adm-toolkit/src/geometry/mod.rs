//! Metric algebra, Christoffel symbols, curvature, covariant and Lie derivatives.
//!
//! Pointwise work happens on [`PointGeom`], built from second-order jets of
//! the metric; the field-level functions here evaluate it node by node and
//! return grid fields that hold NaN outside the evaluated region.

pub mod point;
pub mod tensor;

use std::sync::Arc;

pub use point::PointGeom;
pub use tensor::{dshift, JMat, JT};

use crate::error::{Error, Result};
use crate::fields::{map_field, Chart, Field, Input, Jet, Region, Valence, MAXN};
use tensor::{from_mat, jmat_zero, to_mat};

/// Curvature quantities sampled on a node region.
#[derive(Clone, Debug)]
pub struct CurvaturePackage {
    /// `Gamma^k_ij`, valence (2, 1).
    pub christoffel: Field,
    pub ricci: Field,
    pub scalar: Field,
    /// `P^l_{ijk}` in the index order for which `P^l_{l jk} = R_jk`, valence (3, 1).
    pub riemann: Option<Field>,
}

fn check_metric(g: &Field) -> Result<()> {
    if g.valence != Valence::COV2 {
        return Err(Error::IncompatibleValence("metric must be a (0,2) tensor".into()));
    }
    Ok(())
}

pub fn curvature_package(g: &Field, want_riemann: bool) -> Result<CurvaturePackage> {
    curvature_package_on(g, want_riemann, &g.chart.annulus())
}

pub fn curvature_package_on(g: &Field, want_riemann: bool, region: &Region) -> Result<CurvaturePackage> {
    check_metric(g)?;
    let chart = &g.chart;
    let n = chart.n;
    let inp = [Input::new(g, 2)];
    let christoffel = map_field(chart, &inp, region, Valence { cov: 2, con: 1 }, false, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out[(k * n + a) * n + b] = p.gam[k][a][b].v;
                }
            }
        }
        Ok(())
    })?;
    let rs = map_field(chart, &inp, region, Valence::COV2, true, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let ric = p.ricci();
        let mut c = 0;
        for a in 0..n {
            for b in a..n {
                out[c] = ric[a][b];
                c += 1;
            }
        }
        Ok(())
    })?;
    let scalar = map_field(chart, &inp, region, Valence::SCALAR, false, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        out[0] = p.scalar(&p.ricci());
        Ok(())
    })?;
    let riemann = if want_riemann {
        Some(map_field(chart, &inp, region, Valence { cov: 3, con: 1 }, false, |x, j, out| {
            let p = PointGeom::new(n, &j[0], x)?;
            out.copy_from_slice(&p.riemann_rotated());
            Ok(())
        })?)
    } else {
        None
    };
    Ok(CurvaturePackage { christoffel, ricci: rs, scalar, riemann })
}

/// `(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k` as jets.
pub fn lie_metric(p: &PointGeom, x: &[Jet]) -> JMat {
    let n = p.n;
    let mut out = jmat_zero();
    for i in 0..n {
        for j in i..n {
            let mut s = Jet::constant(0.0);
            for k in 0..n {
                s += x[k] * dshift(&p.g[i][j], k) + p.g[k][j] * dshift(&x[k], i) + p.g[i][k] * dshift(&x[k], j);
            }
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    out
}

/// `(L_X pi)^ij = X^k d_k pi^ij - pi^kj d_k X^i - pi^ik d_k X^j` as jets.
pub fn lie_con2(n: usize, pi: &JMat, x: &[Jet]) -> JMat {
    let mut out = jmat_zero();
    for i in 0..n {
        for j in i..n {
            let mut s = Jet::constant(0.0);
            for k in 0..n {
                s += x[k] * dshift(&pi[i][j], k) - pi[k][j] * dshift(&x[i], k) - pi[i][k] * dshift(&x[j], k);
            }
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    out
}

/// `div_g X = d_k X^k + Gamma^k_kl X^l`.
pub fn div_vector(p: &PointGeom, x: &[Jet]) -> Jet {
    let n = p.n;
    let mut s = Jet::constant(0.0);
    for k in 0..n {
        s += dshift(&x[k], k);
        for l in 0..n {
            s += p.gam[k][k][l] * x[l];
        }
    }
    s
}

/// `(div_g T)^i = nabla_j T^ij` for a (2,0) tensor.
pub fn div_con2(p: &PointGeom, t: &JMat) -> Vec<Jet> {
    let n = p.n;
    (0..n)
        .map(|i| {
            let mut s = Jet::constant(0.0);
            for j in 0..n {
                s += dshift(&t[i][j], j);
                for m in 0..n {
                    s += p.gam[i][j][m] * t[m][j] + p.gam[j][j][m] * t[i][m];
                }
            }
            s
        })
        .collect()
}

/// `(L_Y g - (div_g Y) g)` with both indices raised by `g`.
pub fn conformal_killing_point(p: &PointGeom, y: &[Jet]) -> JMat {
    let n = p.n;
    let ly = lie_metric(p, y);
    let up = tensor::sandwich(n, &p.gi, &ly);
    let dv = div_vector(p, y);
    let mut out = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            out[i][j] = up[i][j] - dv * p.gi[i][j];
        }
    }
    out
}

fn stored_sym(n: usize, m: &JMat, out: &mut [f64]) {
    let mut c = 0;
    for i in 0..n {
        for j in i..n {
            out[c] = m[i][j].v;
            c += 1;
        }
    }
}

/// Covariant derivative of a field of valence at most (2, 2).
pub fn covariant_derivative(t: &Field, g: &Field) -> Result<Field> {
    covariant_derivative_on(t, g, &g.chart.annulus())
}

pub fn covariant_derivative_on(t: &Field, g: &Field, region: &Region) -> Result<Field> {
    check_metric(g)?;
    if t.valence.cov > 2 || t.valence.con > 2 {
        return Err(Error::UnsupportedValence { cov: t.valence.cov, con: t.valence.con });
    }
    let n = g.n();
    let val = t.valence;
    let sym = t.symmetric;
    map_field(
        &g.chart,
        &[Input::new(g, 2), Input::new(t, 1)],
        region,
        Valence { cov: val.cov + 1, con: val.con },
        false,
        |x, j, out| {
            let p = PointGeom::new(n, &j[0], x)?;
            let tt = JT::from_stored(n, val, sym, &j[1]);
            let d = p.nabla(&tt);
            for (o, c) in out.iter_mut().zip(&d.c) {
                *o = c.v;
            }
            Ok(())
        },
    )
}

/// `(L_X g, L_X pi)` on the annulus.
pub fn lie_derivatives(g: &Field, pi: &Field, x: &Field) -> Result<(Field, Field)> {
    lie_derivatives_on(g, pi, x, &g.chart.annulus())
}

pub fn lie_derivatives_on(g: &Field, pi: &Field, x: &Field, region: &Region) -> Result<(Field, Field)> {
    check_metric(g)?;
    let n = g.n();
    let inputs = [Input::new(g, 2), Input::new(pi, 1), Input::new(x, 1)];
    let lg = map_field(&g.chart, &inputs, region, Valence::COV2, true, |xx, j, out| {
        let p = PointGeom::new(n, &j[0], xx)?;
        stored_sym(n, &lie_metric(&p, &j[2]), out);
        Ok(())
    })?;
    let lp = map_field(&g.chart, &inputs, region, Valence::CON2, true, |_xx, j, out| {
        let pm = to_mat(&JT::from_stored(n, Valence::CON2, true, &j[1]));
        stored_sym(n, &lie_con2(n, &pm, &j[2]), out);
        Ok(())
    })?;
    Ok((lg, lp))
}

/// Raised conformal Killing operator `L_Y g - (div_g Y) g`.
pub fn conformal_killing_op(g: &Field, y: &Field) -> Result<Field> {
    conformal_killing_op_on(g, y, &g.chart.annulus())
}

pub fn conformal_killing_op_on(g: &Field, y: &Field, region: &Region) -> Result<Field> {
    check_metric(g)?;
    let n = g.n();
    map_field(&g.chart, &[Input::new(g, 2), Input::new(y, 1)], region, Valence::CON2, true, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        stored_sym(n, &conformal_killing_point(&p, &j[1]), out);
        Ok(())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraMode {
    Raise,
    Lower,
    Trace,
    Divergence,
    Inner,
}

/// Index movement, trace, divergence and squared norm with respect to `g`.
pub fn metric_algebra(g: &Field, t: &Field, mode: AlgebraMode) -> Result<Field> {
    metric_algebra_on(g, t, mode, &g.chart.annulus())
}

pub fn metric_algebra_on(g: &Field, t: &Field, mode: AlgebraMode, region: &Region) -> Result<Field> {
    check_metric(g)?;
    let n = g.n();
    let val = t.valence;
    let sym = t.symmetric;
    let bad = || Error::IncompatibleValence(format!("{mode:?} not defined for valence ({}, {})", val.cov, val.con));
    let (out_val, out_sym) = match (mode, val.cov, val.con) {
        (AlgebraMode::Raise, 1, 0) => (Valence::VECTOR, false),
        (AlgebraMode::Raise, 2, 0) => (Valence::CON2, sym),
        (AlgebraMode::Lower, 0, 1) => (Valence::COVECTOR, false),
        (AlgebraMode::Lower, 0, 2) => (Valence::COV2, sym),
        (AlgebraMode::Trace, c, d) if c + d == 2 && c != 1 => (Valence::SCALAR, false),
        (AlgebraMode::Divergence, 0, 1) => (Valence::SCALAR, false),
        (AlgebraMode::Divergence, 0, 2) => (Valence::VECTOR, false),
        (AlgebraMode::Inner, _, _) if val.rank() <= 2 && !(val.cov == 1 && val.con == 1) => (Valence::SCALAR, false),
        _ => return Err(bad()),
    };
    let order = if mode == AlgebraMode::Divergence { 1 } else { 0 };
    map_field(&g.chart, &[Input::new(g, 2), Input::new(t, order)], region, out_val, out_sym, move |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let tt = JT::from_stored(n, val, sym, &j[1]);
        match mode {
            AlgebraMode::Raise | AlgebraMode::Lower => {
                let m = if mode == AlgebraMode::Raise { &p.gi } else { &p.g };
                if val.rank() == 1 {
                    let v = tensor::mat_vec(n, m, &tt.c);
                    for (o, c) in out.iter_mut().zip(&v) {
                        *o = c.v;
                    }
                } else {
                    let r = tensor::sandwich(n, m, &to_mat(&tt));
                    let full = from_mat(n, out_val, &r);
                    out.copy_from_slice(&full.stored_values(out_sym));
                }
            }
            AlgebraMode::Trace => {
                let m = if val.cov == 2 { &p.gi } else { &p.g };
                out[0] = tensor::mat_dot(n, m, &to_mat(&tt)).v;
            }
            AlgebraMode::Divergence => {
                if val.rank() == 1 {
                    out[0] = div_vector(&p, &tt.c).v;
                } else {
                    let d = div_con2(&p, &to_mat(&tt));
                    for (o, c) in out.iter_mut().zip(&d) {
                        *o = c.v;
                    }
                }
            }
            AlgebraMode::Inner => {
                out[0] = match val.rank() {
                    0 => tt.c[0].v * tt.c[0].v,
                    1 => {
                        let m = if val.cov == 1 { &p.gi } else { &p.g };
                        let v = tensor::mat_vec(n, m, &tt.c);
                        (0..n).map(|i| v[i].v * tt.c[i].v).sum()
                    }
                    _ => {
                        let m = if val.cov == 2 { &p.gi } else { &p.g };
                        let tm = to_mat(&tt);
                        tensor::mat_dot(n, &tensor::sandwich(n, m, &tm), &tm).v
                    }
                };
            }
        }
        Ok(())
    })
}

/// Sup over `region` of `|div_g Ric - dR/2|_g`, from curvature sampled on a
/// wider region and differenced on the grid.
pub fn contracted_bianchi_defect(g: &Field, region: &Region) -> Result<f64> {
    let chart = &g.chart;
    let n = chart.n;
    let pad = 3.0 * chart.stencil_width();
    let (lo, hi) = region_radii(chart, region);
    let wide = chart.shell_region((lo - pad).max(0.0), hi + pad);
    let pkg = curvature_package_on(g, false, &wide)?;
    let inputs = [Input::new(g, 2), Input::new(&pkg.ricci, 1), Input::new(&pkg.scalar, 1)];
    let res = map_field(chart, &inputs, region, Valence::SCALAR, false, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let ric = JT::from_stored(n, Valence::COV2, true, &j[1]);
        // Raise both indices, then divergence; only first derivatives are needed.
        let up = tensor::sandwich(n, &p.gi, &to_mat(&ric));
        let d = div_con2(&p, &up);
        let mut s = 0.0;
        let mut v = [0.0; MAXN];
        for i in 0..n {
            let mut dr = 0.0;
            for k in 0..n {
                dr += p.gi[i][k].v * j[2][0].d[k];
            }
            v[i] = d[i].v - 0.5 * dr;
        }
        for i in 0..n {
            for k in 0..n {
                s += p.g[i][k].v * v[i] * v[k];
            }
        }
        out[0] = s.sqrt();
        Ok(())
    })?;
    Ok(crate::fields::sup_abs(region.nodes.iter().map(|&l| res.component(0)[l])))
}

fn region_radii(chart: &Chart, region: &Region) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &l in &region.nodes {
        let r = chart.radius_of(&chart.node_x(l)[..chart.n]);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Convenience: the region of a chart where `r_lo <= |x| <= r_hi`.
pub fn shell(chart: &Arc<Chart>, r_lo: f64, r_hi: f64) -> Region {
    chart.shell_region(r_lo, r_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{radius, Chart};

    #[test]
    fn euclidean_curvature_vanishes() {
        let c = Chart::new(3, 1.0, 3.0, 13, 2).unwrap();
        let g = Field::euclidean(&c);
        let pkg = curvature_package(&g, true).unwrap();
        for l in c.annulus().nodes {
            assert_eq!(pkg.scalar.component(0)[l], 0.0);
            assert_eq!(pkg.riemann.as_ref().unwrap().component(5)[l], 0.0);
        }
    }

    #[test]
    fn dilation_conformal_killing() {
        let c = Chart::new(3, 1.0, 3.0, 13, 2).unwrap();
        let g = Field::euclidean(&c);
        let y = Field::vector(&c, |x| x.to_vec());
        let k = conformal_killing_op(&g, &y).unwrap();
        let l = c.annulus().nodes[7];
        let v: Vec<f64> = (0..6).map(|s| k.component(s)[l]).collect();
        assert_eq!(v, vec![-1.0, 0.0, 0.0, -1.0, 0.0, -1.0]);
    }

    #[test]
    fn divergence_of_x1_delta() {
        let c = Chart::new(3, 1.0, 3.0, 13, 2).unwrap();
        let g = Field::euclidean(&c);
        let z = Jet::constant(0.0);
        let t = Field::sym2(&c, Valence::CON2, move |x| vec![vec![x[0], z, z], vec![z, x[0], z], vec![z, z, x[0]]]);
        let d = metric_algebra(&g, &t, AlgebraMode::Divergence).unwrap();
        let l = c.annulus().nodes[3];
        assert!((d.component(0)[l] - 1.0).abs() < 1e-12);
        assert!(d.component(1)[l].abs() < 1e-12);
    }

    #[test]
    fn conformal_scalar_on_grid() {
        let c = Chart::new(3, 1.0, 3.0, 25, 4).unwrap();
        let g = Field::sym2(&c, Valence::COV2, |x| {
            let u4 = (1.0 + radius(x).powi(-2)).powi(4);
            let z = Jet::constant(0.0);
            vec![vec![u4, z, z], vec![z, u4, z], vec![z, z, u4]]
        });
        let pkg = curvature_package(&g, false).unwrap();
        let l = c.linear(&[c.ghost + 16, c.ghost + 12, c.ghost + 12]);
        assert!((pkg.scalar.component(0)[l] + 0.5).abs() < 1e-12);
    }
}
