//! Mass and current densities, the constraint operator and its modified
//! form, and the dominant-energy-condition algebra.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{map_field, sup_abs, Chart, Field, Input, Jet, Region, TypeParams, Valence, MAXN};
use crate::geometry::tensor::{mat_dot, sandwich, to_mat};
use crate::geometry::{div_con2, JMat, PointGeom, JT};

/// Metric and momentum tensor on a shared chart.
#[derive(Clone, Debug)]
pub struct InitialDataSet {
    pub chart: Arc<Chart>,
    pub g: Field,
    pub pi: Field,
    pub type_params: TypeParams,
}

impl InitialDataSet {
    pub fn new(g: Field, pi: Field, type_params: TypeParams) -> Result<InitialDataSet> {
        if g.valence != Valence::COV2 || !g.symmetric {
            return Err(Error::IncompatibleValence("g must be a symmetric (0,2) tensor".into()));
        }
        if pi.valence != Valence::CON2 || !pi.symmetric {
            return Err(Error::IncompatibleValence("pi must be a symmetric (2,0) tensor".into()));
        }
        if *g.chart != *pi.chart {
            return Err(Error::IncompatibleValence("g and pi live on different charts".into()));
        }
        Ok(InitialDataSet { chart: g.chart.clone(), g, pi, type_params })
    }

    pub fn n(&self) -> usize {
        self.chart.n
    }

    /// Nodes of the annulus at least `layers` stencil widths from both chart boundaries.
    pub fn interior(&self, layers: f64) -> Region {
        let w = layers * self.chart.stencil_width();
        self.chart.shell_region(self.chart.r_inner + w, self.chart.r_outer - w)
    }
}

#[derive(Clone, Debug)]
pub struct MassCurrent {
    pub mu: Field,
    pub j: Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Variant {
    Plain,
    Modified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentumDirection {
    KToPi,
    PiToK,
}

/// `pi = k - (tr_g k) g` or its inverse `k = pi - (tr_g pi) g / (n - 1)`.
pub fn momentum_convert(data: &Field, g: &Field, direction: MomentumDirection) -> Result<Field> {
    if data.valence.rank() != 2 || data.valence.cov == 1 || !data.symmetric {
        return Err(Error::IncompatibleValence("momentum conversion needs a symmetric 2-tensor".into()));
    }
    let n = g.n();
    let val = data.valence;
    let upper = val.con == 2;
    let c = match direction {
        MomentumDirection::KToPi => -1.0,
        MomentumDirection::PiToK => -1.0 / (n as f64 - 1.0),
    };
    map_field(&g.chart, &[Input::new(g, 0), Input::new(data, 0)], &g.chart.annulus(), val, true, move |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let t = to_mat(&JT::from_stored(n, val, true, &j[1]));
        let (trm, addm) = if upper { (&p.g, &p.gi) } else { (&p.gi, &p.g) };
        let tr = mat_dot(n, trm, &t).v;
        let mut k = 0;
        for a in 0..n {
            for b in a..n {
                out[k] = t[a][b].v + c * tr * addm[a][b].v;
                k += 1;
            }
        }
        Ok(())
    })
}

/// `(2 mu, J)` at a point from the geometry of `g` and jets of `pi` (first order).
pub fn phi_point(p: &PointGeom, pi: &JMat) -> (f64, [f64; MAXN]) {
    let n = p.n;
    let r = p.scalar(&p.ricci());
    let tr = mat_dot(n, &p.g, pi).v;
    let low = sandwich(n, &p.g, pi);
    let sq = mat_dot(n, &low, pi).v;
    let two_mu = r + tr * tr / (n as f64 - 1.0) - sq;
    let d = div_con2(p, pi);
    let mut jv = [0.0; MAXN];
    for i in 0..n {
        jv[i] = d[i].v;
    }
    (two_mu, jv)
}

fn pi_mat(n: usize, stored: &[Jet]) -> JMat {
    to_mat(&JT::from_stored(n, Valence::CON2, true, stored))
}

pub fn mass_current(ids: &InitialDataSet) -> Result<MassCurrent> {
    mass_current_on(ids, &ids.chart.annulus())
}

pub fn mass_current_on(ids: &InitialDataSet, region: &Region) -> Result<MassCurrent> {
    let (phi1, phi2) = constraint_map_on(ids, (&ids.g, &ids.pi), Variant::Plain, region)?;
    Ok(MassCurrent { mu: phi1.scale(0.5), j: phi2 })
}

/// Plain: `Phi(gamma, tau)`. Modified: `Phi(gamma, tau) + (0, gamma . J / 2)` with `J = div_g pi` of the base.
pub fn constraint_map(ids: &InitialDataSet, target: (&Field, &Field), variant: Variant) -> Result<(Field, Field)> {
    constraint_map_on(ids, target, variant, &ids.chart.annulus())
}

pub fn constraint_map_on(
    ids: &InitialDataSet,
    target: (&Field, &Field),
    variant: Variant,
    region: &Region,
) -> Result<(Field, Field)> {
    let n = ids.n();
    let chart = &ids.chart;
    let inputs = [Input::new(target.0, 2), Input::new(target.1, 1), Input::new(&ids.g, 1), Input::new(&ids.pi, 1)];
    let vals = crate::fields::map_nodes(chart, &inputs, region, n + 1, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let (two_mu, mut jv) = phi_point(&p, &pi_mat(n, &j[1]));
        if variant == Variant::Modified {
            let pb = PointGeom::new(n, &j[2], x)?;
            let jb = div_con2(&pb, &pi_mat(n, &j[3]));
            let corr = gamma_dot_j(&pb, &p, &jb);
            for i in 0..n {
                jv[i] += 0.5 * corr[i];
            }
        }
        out[0] = two_mu;
        out[1..=n].copy_from_slice(&jv[..n]);
        Ok(())
    })?;
    let mut s = vec![vec![f64::NAN; chart.total()]];
    let mut v = vec![vec![f64::NAN; chart.total()]; n];
    for (&l, o) in region.nodes.iter().zip(&vals) {
        s[0][l] = o[0];
        for i in 0..n {
            v[i][l] = o[1 + i];
        }
    }
    Ok((Field::grid(chart, Valence::SCALAR, false, s)?, Field::grid(chart, Valence::VECTOR, false, v)?))
}

/// `(gamma . J)^i = g^ij gamma_jk J^k` with `g` from `base` and `gamma` from `target`.
pub fn gamma_dot_j(base: &PointGeom, target: &PointGeom, j: &[Jet]) -> [f64; MAXN] {
    let n = base.n;
    let mut out = [0.0; MAXN];
    for i in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for k in 0..n {
                s += base.gi[i][a].v * target.g[a][k].v * j[k].v;
            }
        }
        out[i] = s;
    }
    out
}

/// `mu - |J|_g` on the annulus.
pub fn dec_margin(ids: &InitialDataSet) -> Result<Field> {
    dec_margin_on(ids, &ids.chart.annulus())
}

pub fn dec_margin_on(ids: &InitialDataSet, region: &Region) -> Result<Field> {
    let n = ids.n();
    let inputs = [Input::new(&ids.g, 2), Input::new(&ids.pi, 1)];
    map_field(&ids.chart, &inputs, region, Valence::SCALAR, false, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let (two_mu, jv) = phi_point(&p, &pi_mat(n, &j[1]));
        out[0] = 0.5 * two_mu - norm_vec(&p, &jv);
        Ok(())
    })
}

pub fn norm_vec(p: &PointGeom, v: &[f64; MAXN]) -> f64 {
    let n = p.n;
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += p.g[i][k].v * v[i] * v[k];
        }
    }
    s.max(0.0).sqrt()
}

/// Reduction of a DEC margin field.
#[derive(Clone, Debug, Serialize)]
pub struct DecVerdict {
    pub min_margin: f64,
    pub worst_node: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Default DEC tolerance `10 h^fd_order`.
pub fn dec_tolerance(chart: &Chart) -> f64 {
    10.0 * chart.h.powi(chart.fd_order as i32)
}

/// Minimum of a margin field over `region`, compared against `-tolerance`.
pub fn dec_verdict(margin: &Field, region: &Region, tolerance: f64) -> DecVerdict {
    let chart = &margin.chart;
    let data = margin.component(0);
    let mut min = f64::INFINITY;
    let mut worst = region.nodes.first().copied().unwrap_or(0);
    for &l in &region.nodes {
        let v = data[l];
        if v.is_finite() && v < min {
            min = v;
            worst = l;
        }
    }
    let x = chart.node_x(worst)[..chart.n].to_vec();
    DecVerdict { min_margin: min, worst_node: x, tolerance, pass: min >= -tolerance }
}

/// Result of transporting a current through `gamma = g + h`.
#[derive(Clone, Debug)]
pub struct DecTransport {
    /// `|J - h.J/2|^2_gamma` by the expanded chain formula.
    pub jbar_normsq: Field,
    /// The same quantity evaluated directly as `gamma_ij Jbar^i Jbar^j`.
    pub direct: Field,
    pub bound_ok: bool,
}

/// Chain-formula and direct values of `|Jbar|^2_gamma` at a point, plus `|J|^2_g`.
///
/// `g`, `h` are full matrices, `j` a vector; fails when `|h|_g >= 3`.
pub fn dec_transport_point(
    n: usize,
    g: &[[f64; MAXN]; MAXN],
    j: &[f64],
    h: &[[f64; MAXN]; MAXN],
    x: &[f64],
) -> Result<(f64, f64, f64)> {
    let zero = Jet::constant(0.0);
    let mut gm = [[zero; MAXN]; MAXN];
    for a in 0..n {
        for b in 0..n {
            gm[a][b] = Jet::constant(g[a][b]);
        }
    }
    let p = PointGeom::from_matrix(n, gm, x)?;
    let gi = p.giv();
    let mut hn = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    hn += gi[a][c] * gi[b][d] * h[a][b] * h[c][d];
                }
            }
        }
    }
    let hn = hn.sqrt();
    if hn >= 3.0 {
        return Err(Error::HTooLarge { norm: hn, at: x.to_vec() });
    }
    let mut hj = [0.0; MAXN];
    for i in 0..n {
        for a in 0..n {
            for k in 0..n {
                hj[i] += gi[i][a] * h[a][k] * j[k];
            }
        }
    }
    let quad = |m: &[[f64; MAXN]; MAXN], u: &[f64], v: &[f64]| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += m[a][b] * u[a] * v[b];
            }
        }
        s
    };
    let j2 = quad(g, j, j);
    let chain = j2 - 0.75 * quad(g, &hj, &hj) + 0.25 * quad(h, &hj, &hj);
    let mut gamma = [[0.0; MAXN]; MAXN];
    let mut jbar = [0.0; MAXN];
    for a in 0..n {
        jbar[a] = j[a] - 0.5 * hj[a];
        for b in 0..n {
            gamma[a][b] = g[a][b] + h[a][b];
        }
    }
    let direct = quad(&gamma, &jbar, &jbar);
    Ok((chain, direct, j2))
}

/// Nodewise transport check on the annulus.
pub fn dec_transport_check(g: &Field, j: &Field, h: &Field) -> Result<DecTransport> {
    dec_transport_check_on(g, j, h, &g.chart.annulus())
}

pub fn dec_transport_check_on(g: &Field, j: &Field, h: &Field, region: &Region) -> Result<DecTransport> {
    let n = g.n();
    let inputs = [Input::new(g, 0), Input::new(j, 0), Input::new(h, 0)];
    let vals = crate::fields::map_nodes(&g.chart, &inputs, region, 3, |x, jt, out| {
        let mut gm = [[0.0; MAXN]; MAXN];
        let mut hm = [[0.0; MAXN]; MAXN];
        let gs = to_mat(&JT::from_stored(n, Valence::COV2, true, &jt[0]));
        let hs = to_mat(&JT::from_stored(n, Valence::COV2, h.symmetric, &jt[2]));
        for a in 0..n {
            for b in 0..n {
                gm[a][b] = gs[a][b].v;
                hm[a][b] = hs[a][b].v;
            }
        }
        let jv: Vec<f64> = jt[1].iter().map(|c| c.v).collect();
        let (chain, direct, j2) = dec_transport_point(n, &gm, &jv, &hm, x)?;
        out[0] = chain;
        out[1] = direct;
        out[2] = j2;
        Ok(())
    })?;
    let chart = &g.chart;
    let mut c = vec![f64::NAN; chart.total()];
    let mut d = vec![f64::NAN; chart.total()];
    let mut ok = true;
    for (&l, o) in region.nodes.iter().zip(&vals) {
        c[l] = o[0];
        d[l] = o[1];
        ok &= o[0] <= o[2] * (1.0 + 1e-12) + 1e-300;
    }
    Ok(DecTransport {
        jbar_normsq: Field::grid(chart, Valence::SCALAR, false, vec![c])?,
        direct: Field::grid(chart, Valence::SCALAR, false, vec![d])?,
        bound_ok: ok,
    })
}

/// Sup of `|f|` over a region, skipping NaN.
pub fn sup_on(f: &Field, comp: usize, region: &Region) -> f64 {
    let d = f.component(comp);
    sup_abs(region.nodes.iter().map(|&l| d[l]))
}
