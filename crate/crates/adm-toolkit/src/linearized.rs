//! Linearized constraint operators, their formal adjoints, the L² pairing
//! defect and the Hessian-type reformulation of the adjoint equation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::{InitialDataSet, Variant};
use crate::error::{Error, Result};
use crate::fields::{map_nodes, node_integral, Aabb, Chart, Field, Input, Jet, Region, Valence, MAXN};
use crate::geometry::tensor::{jmat_zero, mat_dot, sandwich, to_mat};
use crate::geometry::{div_con2, div_vector, dshift, lie_con2, lie_metric, JMat, PointGeom, JT};

/// A perturbation direction: symmetric (0,2) tensor `h` and symmetric (2,0) tensor `w`.
#[derive(Clone, Debug)]
pub struct SymPair {
    pub h: Field,
    pub w: Field,
}

/// Constant values a lapse-shift pair tends to at infinity.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Asymptote {
    pub a: f64,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LapseShiftPair {
    pub f: Field,
    pub x: Field,
    pub asymptote: Option<Asymptote>,
}

impl LapseShiftPair {
    pub fn new(f: Field, x: Field) -> LapseShiftPair {
        LapseShiftPair { f, x, asymptote: None }
    }

    /// The constant pair `(a, b)`.
    pub fn constant(chart: &Arc<Chart>, a: f64, b: &[f64]) -> LapseShiftPair {
        LapseShiftPair {
            f: Field::constant(chart, Valence::SCALAR, false, vec![a]),
            x: Field::constant(chart, Valence::VECTOR, false, b.to_vec()),
            asymptote: Some(Asymptote { a, b: b.to_vec() }),
        }
    }

    pub fn zero(chart: &Arc<Chart>) -> LapseShiftPair {
        let mut p = LapseShiftPair::constant(chart, 0.0, &vec![0.0; chart.n]);
        p.f = Field::zeros(chart, Valence::SCALAR, false);
        p.x = Field::zeros(chart, Valence::VECTOR, false);
        p
    }
}

/// `exp(1 - 1/(1 - s^2))` for `s = |x - c| / rho < 1`, zero outside; equals 1 at the centre.
pub fn bump_jet(x: &[Jet], center: &[f64], rho: f64) -> Jet {
    let mut s2 = Jet::constant(0.0);
    for (a, xa) in x.iter().enumerate() {
        let d = (*xa - center[a]) / rho;
        s2 += d * d;
    }
    if s2.v >= 1.0 {
        return Jet::constant(0.0);
    }
    (1.0 - (1.0 - s2).recip()).exp()
}

impl SymPair {
    pub fn zero(chart: &Arc<Chart>) -> SymPair {
        SymPair { h: Field::zeros(chart, Valence::COV2, true), w: Field::zeros(chart, Valence::CON2, true) }
    }

    /// Seeded smooth compactly supported direction: components are random
    /// affine functions times a bump of radius `rho` around `center`.
    pub fn seeded_bump(chart: &Arc<Chart>, seed: u64, center: &[f64], rho: f64, amplitude: f64) -> SymPair {
        let n = chart.n;
        let m = n * (n + 1) / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = || -> Vec<Vec<f64>> {
            (0..m).map(|_| (0..=n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect()).collect()
        };
        let ch = coeffs();
        let cw = coeffs();
        let c = center.to_vec();
        let make = |coef: Vec<Vec<f64>>, val: Valence| {
            let c = c.clone();
            let cc = c.clone();
            Field::from_jets(chart, val, true, move |x| {
                let c = &cc;
                let b = bump_jet(x, c, rho);
                coef.iter()
                    .map(|k| {
                        let mut lin = Jet::constant(k[0]);
                        for a in 0..n {
                            lin += (x[a] - c[a]) * (k[a + 1] / rho);
                        }
                        lin * b
                    })
                    .collect()
            })
            .with_support(Aabb::ball(&c, rho))
        };
        SymPair { h: make(ch, Valence::COV2), w: make(cw, Valence::CON2) }
    }

    /// Union of the supports of `h` and `w`, if both are declared.
    pub fn support(&self) -> Option<Aabb> {
        match (&self.h.support, &self.w.support) {
            (Some(a), Some(b)) => Some(a.union(b)),
            _ => None,
        }
    }

    /// Coordinate L² norm `(int |h|^2 + |w|^2 dx)^{1/2}` over the declared support.
    pub fn l2_norm(&self) -> Result<f64> {
        let chart = &self.h.chart;
        let region = match self.support() {
            Some(s) => chart.box_region(&s),
            None => chart.annulus(),
        };
        let n = chart.n;
        let s = node_integral(chart, &[Input::new(&self.h, 0), Input::new(&self.w, 0)], &region, |_x, j| {
            let h = to_mat(&JT::from_stored(n, Valence::COV2, self.h.symmetric, &j[0]));
            let w = to_mat(&JT::from_stored(n, Valence::CON2, self.w.symmetric, &j[1]));
            Ok(mat_dot(n, &h, &h).v + mat_dot(n, &w, &w).v)
        })?;
        Ok(s.sqrt())
    }
}

/// `count` seeded bump directions whose supports pass [`support_region`].
pub fn seeded_directions(chart: &Arc<Chart>, seed: u64, count: usize, amplitude: f64) -> Result<Vec<SymPair>> {
    let n = chart.n;
    let w = chart.stencil_width();
    let (lo, hi) = (chart.r_inner + 2.0 * w, chart.r_outer - 2.0 * w);
    let sn = (n as f64).sqrt();
    let rho = (1.5f64).min((hi - lo) / (2.0 * (1.0 + sn) + 0.5));
    let (dlo, dhi) = (lo + rho + 0.05, hi - rho * sn - 0.05);
    if !(rho > 2.0 * chart.h && dlo < dhi) {
        return Err(Error::SupportTouchesBoundary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = rng.gen_range(dlo..dhi);
        dir.iter_mut().for_each(|v| *v *= d / norm);
        let cand = SymPair::seeded_bump(chart, rng.gen(), &dir, rho, amplitude);
        if support_region(chart, &cand).is_ok() {
            out.push(cand);
        }
    }
    Ok(out)
}

/// Base-point data shared by the operator kernels.
pub struct BasePoint {
    pub p: PointGeom,
    /// `pi^ij` with first derivatives.
    pub pi: JMat,
    /// `J = div_g pi`, values only.
    pub j: Vec<Jet>,
    pub ric: [[f64; MAXN]; MAXN],
    pub scalar: f64,
}

impl BasePoint {
    pub fn new(n: usize, g: &[Jet], pi: &[Jet], x: &[f64]) -> Result<BasePoint> {
        let p = PointGeom::new(n, g, x)?;
        let pim = to_mat(&JT::from_stored(n, Valence::CON2, true, pi));
        let j = div_con2(&p, &pim);
        let ric = p.ricci();
        let scalar = p.scalar(&ric);
        Ok(BasePoint { p, pi: pim, j, ric, scalar })
    }

    fn n(&self) -> usize {
        self.p.n
    }

    fn trpi(&self) -> f64 {
        mat_dot(self.n(), &self.p.g, &self.pi).v
    }

    /// `pi_ij` lowered by `g`, values.
    fn pi_low(&self) -> [[f64; MAXN]; MAXN] {
        vals(self.n(), &sandwich(self.n(), &self.p.g, &self.pi))
    }
}

fn vals(n: usize, m: &JMat) -> [[f64; MAXN]; MAXN] {
    let mut out = [[0.0; MAXN]; MAXN];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = m[i][j].v;
        }
    }
    out
}

fn mm(n: usize, a: &[[f64; MAXN]; MAXN], b: &[[f64; MAXN]; MAXN]) -> [[f64; MAXN]; MAXN] {
    let mut out = [[0.0; MAXN]; MAXN];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn dot(n: usize, a: &[[f64; MAXN]; MAXN], b: &[[f64; MAXN]; MAXN]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// `DPhi(h, w)` (plus `(0, h.J/2)` when modified) at a point; `h` needs second-order jets, `w` first-order.
pub fn linearize_point(b: &BasePoint, h: &JMat, w: &JMat, variant: Variant) -> (f64, [f64; MAXN]) {
    let n = b.n();
    let p = &b.p;
    let g = p.gv();
    let gi = p.giv();
    let nf = n as f64;
    let trh = mat_dot(n, &p.gi, h);
    let mut lap_trh = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut hess = trh.dd[i][j];
            for k in 0..n {
                hess -= p.gam[k][i][j].v * trh.d[k];
            }
            lap_trh += gi[i][j] * hess;
        }
    }
    let hj = crate::geometry::tensor::from_mat(n, Valence::COV2, h);
    let dh = p.nabla(&hj);
    let ddh = p.nabla(&dh);
    let mut divdiv = 0.0;
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for c in 0..n {
                    divdiv += gi[i][a] * gi[j][c] * ddh.at(&[i, j, c, a]).v;
                }
            }
        }
    }
    let hv = vals(n, h);
    let wv = vals(n, w);
    let piv = vals(n, &b.pi);
    let h_up = mm(n, &mm(n, &gi, &hv), &gi);
    let l_g_h = -lap_trh + divdiv - dot(n, &h_up, &b.ric);
    let pgp = mm(n, &mm(n, &piv, &g), &piv);
    let pgwg = mm(n, &mm(n, &mm(n, &piv, &g), &wv), &g);
    let tr_pgwg: f64 = (0..n).map(|i| pgwg[i][i]).sum();
    let trw = dot(n, &g, &wv);
    let first =
        l_g_h - 2.0 * dot(n, &hv, &pgp) - 2.0 * tr_pgwg + 2.0 / (nf - 1.0) * b.trpi() * (dot(n, &hv, &piv) + trw);

    let divw = div_con2(p, w);
    let mut second = [0.0; MAXN];
    for i in 0..n {
        let mut s = divw[i].v;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s -= 0.5 * piv[j][k] * dh.at(&[j, k, l]).v * gi[l][i];
                }
                for a in 0..n {
                    s += piv[j][k] * gi[i][a] * dh.at(&[a, j, k]).v;
                }
            }
            s += 0.5 * piv[i][j] * trh.d[j];
        }
        if variant == Variant::Modified {
            for a in 0..n {
                for k in 0..n {
                    s += 0.5 * gi[i][a] * hv[a][k] * b.j[k].v;
                }
            }
        }
        second[i] = s;
    }
    (first, second)
}

/// Adjoint output at a point: `A_ij` (covariant) and `B^ij` (contravariant).
pub struct AdjointPoint {
    pub a: [[f64; MAXN]; MAXN],
    pub b: [[f64; MAXN]; MAXN],
}

/// Auxiliary quantities of the adjoint shared with the Hessian-type residuals.
struct AdjointParts {
    hess: [[f64; MAXN]; MAXN],
    lap: f64,
    lie_pi_low: [[f64; MAXN]; MAXN],
    tr_lie_pi: f64,
    div_x: f64,
    x_pi: f64,
    g_xj: f64,
    x_odot_j: [[f64; MAXN]; MAXN],
    lie_g_up: [[f64; MAXN]; MAXN],
}

fn adjoint_parts(b: &BasePoint, f: &Jet, x: &[Jet]) -> AdjointParts {
    let n = b.n();
    let p = &b.p;
    let g = p.gv();
    let gi = p.giv();
    let mut hess = [[0.0; MAXN]; MAXN];
    let mut lap = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v = f.dd[i][j];
            for k in 0..n {
                v -= p.gam[k][i][j].v * f.d[k];
            }
            hess[i][j] = v;
        }
    }
    for i in 0..n {
        for j in 0..n {
            lap += gi[i][j] * hess[i][j];
        }
    }
    let lp = vals(n, &lie_con2(n, &b.pi, x));
    let lie_pi_low = mm(n, &mm(n, &g, &lp), &g);
    let tr_lie_pi = dot(n, &g, &lp);
    let div_x = div_vector(p, x).v;
    let xl = lower_vec(p, x);
    let dx = p.nabla(&JT { n, val: Valence::COVECTOR, c: xl.clone() });
    let piv = vals(n, &b.pi);
    let mut x_pi = 0.0;
    for k in 0..n {
        for m in 0..n {
            x_pi += dx.at(&[k, m]).v * piv[k][m];
        }
    }
    let mut g_xj = 0.0;
    let mut jl = [0.0; MAXN];
    for i in 0..n {
        for k in 0..n {
            g_xj += g[i][k] * x[i].v * b.j[k].v;
            jl[i] += g[i][k] * b.j[k].v;
        }
    }
    let mut x_odot_j = [[0.0; MAXN]; MAXN];
    for i in 0..n {
        for j in 0..n {
            x_odot_j[i][j] = 0.5 * (xl[i].v * jl[j] + xl[j].v * jl[i]);
        }
    }
    let lg = vals(n, &lie_metric(p, x));
    let lie_g_up = mm(n, &mm(n, &gi, &lg), &gi);
    AdjointParts { hess, lap, lie_pi_low, tr_lie_pi, div_x, x_pi, g_xj, x_odot_j, lie_g_up }
}

/// `g_ij X^j` as jets.
pub fn lower_vec(p: &PointGeom, x: &[Jet]) -> Vec<Jet> {
    let n = p.n;
    (0..n)
        .map(|i| {
            let mut s = Jet::constant(0.0);
            for j in 0..n {
                s += p.g[i][j] * x[j];
            }
            s
        })
        .collect()
}

/// Formal adjoint of [`linearize_point`]; `f` needs second-order jets, `X` first-order.
/// The plain adjoint carries `-X (.) J`, the modified one `-X (.) J / 2`.
pub fn adjoint_point(b: &BasePoint, f: &Jet, x: &[Jet], variant: Variant) -> AdjointPoint {
    let n = b.n();
    let nf = n as f64;
    let c = 2.0 / (nf - 1.0);
    let g = b.p.gv();
    let gi = b.p.giv();
    let q = adjoint_parts(b, f, x);
    let pl = b.pi_low();
    let pp = mm(n, &mm(n, &pl, &gi), &pl);
    let trpi = b.trpi();
    let piv = vals(n, &b.pi);
    let mut a = [[0.0; MAXN]; MAXN];
    let mut bb = [[0.0; MAXN]; MAXN];
    for i in 0..n {
        for j in 0..n {
            let lstar = -q.lap * g[i][j] + q.hess[i][j] - f.v * b.ric[i][j];
            let mut v = lstar
                + (c * trpi * pl[i][j] - 2.0 * pp[i][j]) * f.v
                + 0.5 * (q.lie_pi_low[i][j] + q.div_x * pl[i][j] - q.x_pi * g[i][j] - q.g_xj * g[i][j]);
            v -= match variant {
                Variant::Plain => q.x_odot_j[i][j],
                Variant::Modified => 0.5 * q.x_odot_j[i][j],
            };
            a[i][j] = v;
            bb[i][j] = -0.5 * q.lie_g_up[i][j] + (c * trpi * gi[i][j] - 2.0 * piv[i][j]) * f.v;
        }
    }
    AdjointPoint { a, b: bb }
}

fn sym_out(n: usize, m: &[[f64; MAXN]; MAXN], out: &mut [f64]) {
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = m[i][j];
            k += 1;
        }
    }
}

fn pack_grid(chart: &Arc<Chart>, region: &Region, vals: &[Vec<f64>], parts: &[(Valence, bool)]) -> Result<Vec<Field>> {
    let mut offset = 0;
    let mut out = Vec::new();
    for &(val, sym) in parts {
        let nc = crate::fields::stored_count(chart.n, val, sym);
        let mut data = vec![vec![f64::NAN; chart.total()]; nc];
        for (&l, v) in region.nodes.iter().zip(vals) {
            for c in 0..nc {
                data[c][l] = v[offset + c];
            }
        }
        offset += nc;
        out.push(Field::grid(chart, val, sym, data)?);
    }
    Ok(out)
}

/// `DPhi(h, w)` or its modified form, on the annulus.
pub fn linearize(base: &InitialDataSet, dir: &SymPair, variant: Variant) -> Result<(Field, Field)> {
    linearize_on(base, dir, variant, &base.chart.annulus())
}

pub fn linearize_on(base: &InitialDataSet, dir: &SymPair, variant: Variant, region: &Region) -> Result<(Field, Field)> {
    let n = base.n();
    let inputs = [Input::new(&base.g, 2), Input::new(&base.pi, 1), Input::new(&dir.h, 2), Input::new(&dir.w, 1)];
    let (hs, ws) = (dir.h.symmetric, dir.w.symmetric);
    let vals = map_nodes(&base.chart, &inputs, region, n + 1, |x, j, out| {
        let bp = BasePoint::new(n, &j[0], &j[1], x)?;
        let h = to_mat(&JT::from_stored(n, Valence::COV2, hs, &j[2]));
        let w = to_mat(&JT::from_stored(n, Valence::CON2, ws, &j[3]));
        let (s, v) = linearize_point(&bp, &h, &w, variant);
        out[0] = s;
        out[1..].copy_from_slice(&v[..n]);
        Ok(())
    })?;
    let mut f = pack_grid(&base.chart, region, &vals, &[(Valence::SCALAR, false), (Valence::VECTOR, false)])?;
    let v = f.pop().unwrap();
    Ok((f.pop().unwrap(), v))
}

/// `DPhi*(f, X)` or its modified form, on the annulus.
pub fn adjoint(base: &InitialDataSet, pair: &LapseShiftPair, variant: Variant) -> Result<SymPair> {
    adjoint_on(base, pair, variant, &base.chart.annulus())
}

pub fn adjoint_on(base: &InitialDataSet, pair: &LapseShiftPair, variant: Variant, region: &Region) -> Result<SymPair> {
    let n = base.n();
    let m = n * (n + 1) / 2;
    let inputs = [Input::new(&base.g, 2), Input::new(&base.pi, 1), Input::new(&pair.f, 2), Input::new(&pair.x, 1)];
    let vals = map_nodes(&base.chart, &inputs, region, 2 * m, |x, j, out| {
        let bp = BasePoint::new(n, &j[0], &j[1], x)?;
        let ad = adjoint_point(&bp, &j[2][0], &j[3], variant);
        sym_out(n, &ad.a, &mut out[..m]);
        sym_out(n, &ad.b, &mut out[m..]);
        Ok(())
    })?;
    let mut f = pack_grid(&base.chart, region, &vals, &[(Valence::COV2, true), (Valence::CON2, true)])?;
    let w = f.pop().unwrap();
    Ok(SymPair { h: f.pop().unwrap(), w })
}

/// Both sides of the L² duality on a region: `(int <DPhibar(h,w), (f,X)>, int <(h,w), DPhibar*(f,X)>)`.
pub fn pairing_terms(
    base: &InitialDataSet,
    pair: &LapseShiftPair,
    dir: &SymPair,
    region: &Region,
) -> Result<(f64, f64)> {
    let n = base.n();
    let inputs = [
        Input::new(&base.g, 2),
        Input::new(&base.pi, 1),
        Input::new(&pair.f, 2),
        Input::new(&pair.x, 1),
        Input::new(&dir.h, 2),
        Input::new(&dir.w, 1),
    ];
    let (hs, ws) = (dir.h.symmetric, dir.w.symmetric);
    let vals = map_nodes(&base.chart, &inputs, region, 2, |x, j, out| {
        let bp = BasePoint::new(n, &j[0], &j[1], x)?;
        let h = to_mat(&JT::from_stored(n, Valence::COV2, hs, &j[4]));
        let w = to_mat(&JT::from_stored(n, Valence::CON2, ws, &j[5]));
        let (s, v) = linearize_point(&bp, &h, &w, Variant::Modified);
        let ad = adjoint_point(&bp, &j[2][0], &j[3], Variant::Modified);
        let g = bp.p.gv();
        let gi = bp.p.giv();
        let vol = bp.p.sqrt_det;
        let mut lhs = j[2][0].v * s;
        for a in 0..n {
            for c in 0..n {
                lhs += g[a][c] * j[3][a].v * v[c];
            }
        }
        let hv = vals(n, &h);
        let wv = vals(n, &w);
        let rhs = dot(n, &mm(n, &mm(n, &gi, &hv), &gi), &ad.a) + dot(n, &mm(n, &mm(n, &g, &wv), &g), &ad.b);
        out[0] = lhs * vol;
        out[1] = rhs * vol;
        Ok(())
    })?;
    let h = base.chart.h.powi(n as i32);
    let l: Vec<f64> = vals.iter().map(|v| v[0]).collect();
    let r: Vec<f64> = vals.iter().map(|v| v[1]).collect();
    Ok((crate::fields::ordered_sum(&l) * h, crate::fields::ordered_sum(&r) * h))
}

/// Node region covering a compact direction plus a stencil margin, after
/// checking the support keeps two stencil widths from both chart boundaries.
pub fn support_region(chart: &Chart, dir: &SymPair) -> Result<Region> {
    let s = dir.support().ok_or(Error::SupportTouchesBoundary)?;
    let w = chart.stencil_width();
    let (near, far) = s.radial_extent(chart.n);
    if near < chart.r_inner + 2.0 * w || far > chart.r_outer - 2.0 * w {
        return Err(Error::SupportTouchesBoundary);
    }
    Ok(chart.box_region(&s.inflate(2.0 * w)))
}

/// `int <DPhibar(h,w), (f,X)> dmu_g - int <(h,w), DPhibar*(f,X)> dmu_g` for compactly supported `dir`.
///
/// The direction is sampled onto the grid first, so its derivatives are finite differences.
pub fn pairing_defect(base: &InitialDataSet, pair: &LapseShiftPair, dir: &SymPair) -> Result<f64> {
    let region = support_region(&base.chart, dir)?;
    let sampled = SymPair { h: dir.h.sample(), w: dir.w.sample() };
    let (l, r) = pairing_terms(base, pair, &sampled, &region)?;
    Ok(l - r)
}

/// Residual fields of the Hessian-type and trace equations.
#[derive(Clone, Debug)]
pub struct KidResiduals {
    /// (0,2): the Hessian equation for `f`.
    pub hessian_f: Field,
    /// (0,3): the Hessian equation for `X`, indexed `[i][j][k]`.
    pub hessian_x: Field,
    /// Scalar and covector residuals of the traced (elliptic) system.
    pub trace: (Field, Field),
}

impl KidResiduals {
    /// Sup norms of the four residuals over `region`, skipping NaN.
    pub fn sup(&self, region: &Region) -> [f64; 4] {
        let s = |f: &Field| {
            let mut m: f64 = 0.0;
            for c in 0..f.ncomp() {
                m = m.max(crate::constraints::sup_on(f, c, region));
            }
            m
        };
        [s(&self.hessian_f), s(&self.hessian_x), s(&self.trace.0), s(&self.trace.1)]
    }
}

pub fn kid_residuals(base: &InitialDataSet, pair: &LapseShiftPair, rhs: &SymPair) -> Result<KidResiduals> {
    kid_residuals_on(base, pair, rhs, &base.chart.annulus())
}

/// Residuals `LHS - RHS` of the four equations satisfied by solutions of
/// `DPhibar*(f, X) = (h, w)`, evaluated with the modified adjoint.
pub fn kid_residuals_on(
    base: &InitialDataSet,
    pair: &LapseShiftPair,
    rhs: &SymPair,
    region: &Region,
) -> Result<KidResiduals> {
    let n = base.n();
    let m = n * (n + 1) / 2;
    let n3 = n * n * n;
    let inputs = [
        Input::new(&base.g, 2),
        Input::new(&base.pi, 1),
        Input::new(&pair.f, 2),
        Input::new(&pair.x, 2),
        Input::new(&rhs.h, 0),
        Input::new(&rhs.w, 1),
    ];
    let (hs, ws) = (rhs.h.symmetric, rhs.w.symmetric);
    let vals = map_nodes(&base.chart, &inputs, region, m + n3 + 1 + n, |x, j, out| {
        let bp = BasePoint::new(n, &j[0], &j[1], x)?;
        let h = vals(n, &to_mat(&JT::from_stored(n, Valence::COV2, hs, &j[4])));
        let w = to_mat(&JT::from_stored(n, Valence::CON2, ws, &j[5]));
        let r = kid_point(&bp, &j[2][0], &j[3], &h, &w);
        sym_out(n, &r.hess_f, &mut out[..m]);
        out[m..m + n3].copy_from_slice(&r.hess_x);
        out[m + n3] = r.trace_f;
        out[m + n3 + 1..].copy_from_slice(&r.trace_x[..n]);
        Ok(())
    })?;
    let mut f = pack_grid(
        &base.chart,
        region,
        &vals,
        &[
            (Valence::COV2, true),
            (Valence { cov: 3, con: 0 }, false),
            (Valence::SCALAR, false),
            (Valence::COVECTOR, false),
        ],
    )?;
    let tx = f.pop().unwrap();
    let tf = f.pop().unwrap();
    let hx = f.pop().unwrap();
    Ok(KidResiduals { hessian_f: f.pop().unwrap(), hessian_x: hx, trace: (tf, tx) })
}

struct KidPoint {
    hess_f: [[f64; MAXN]; MAXN],
    hess_x: Vec<f64>,
    trace_f: f64,
    trace_x: [f64; MAXN],
}

fn kid_point(b: &BasePoint, f: &Jet, x: &[Jet], h: &[[f64; MAXN]; MAXN], w: &JMat) -> KidPoint {
    let n = b.n();
    let nf = n as f64;
    let c = 2.0 / (nf - 1.0);
    let p = &b.p;
    let g = p.gv();
    let gi = p.giv();
    let q = adjoint_parts(b, f, x);
    let pl = b.pi_low();
    let pp = mm(n, &mm(n, &pl, &gi), &pl);
    let trpi = b.trpi();
    let pi_sq = dot(n, &pl, &vals(n, &b.pi));
    let trh = dot(n, &gi, h);
    let potential = b.scalar - c * trpi * trpi + 2.0 * pi_sq;
    let bracket = q.tr_lie_pi + q.div_x * trpi - nf * q.x_pi - (nf + 1.0) * q.g_xj;

    let mut hess_f = [[0.0; MAXN]; MAXN];
    for i in 0..n {
        for j in 0..n {
            let lhs = h[i][j] - trh / (nf - 1.0) * g[i][j];
            let coef = -b.ric[i][j] + c * trpi * pl[i][j] - 2.0 * pp[i][j] + potential / (nf - 1.0) * g[i][j];
            let rhs = q.hess[i][j]
                + coef * f.v
                + 0.5 * (q.lie_pi_low[i][j] + q.div_x * pl[i][j] - q.x_pi * g[i][j] - q.g_xj * g[i][j])
                - 0.5 * q.x_odot_j[i][j]
                - bracket / (2.0 * (nf - 1.0)) * g[i][j];
            hess_f[i][j] = lhs - rhs;
        }
    }
    let trace_f = -trh / (nf - 1.0) - (q.lap + potential / (nf - 1.0) * f.v - bracket / (2.0 * (nf - 1.0)));

    // Hessian equation for X.
    let xl = lower_vec(p, x);
    let dx = p.nabla(&JT { n, val: Valence::COVECTOR, c: xl.clone() });
    let ddx = p.nabla(&dx);
    let wl = sandwich(n, &p.g, w);
    let dw = p.nabla(&crate::geometry::tensor::from_mat(n, Valence::COV2, &wl));
    let trp_j = mat_dot(n, &p.g, &b.pi);
    let pil = sandwich(n, &p.g, &b.pi);
    let mut sf = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            sf[i][j] = (p.g[i][j] * trp_j * c - pil[i][j] * 2.0) * *f;
        }
    }
    let dsf = p.nabla(&crate::geometry::tensor::from_mat(n, Valence::COV2, &sf));
    let riem = p.riemann_rotated();
    let pr = |l: usize, a: usize, bb: usize, cc: usize| riem[((l * n + a) * n + bb) * n + cc];
    let mut hess_x = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = -dw.at(&[i, j, k]).v - dw.at(&[k, i, j]).v + dw.at(&[j, k, i]).v;
                let mut curv = 0.0;
                for l in 0..n {
                    curv += (pr(l, k, j, i) + pr(l, i, k, j) + pr(l, i, j, k)) * xl[l].v;
                }
                let rhs = ddx.at(&[i, j, k]).v + 0.5 * curv - dsf.at(&[i, j, k]).v - dsf.at(&[k, i, j]).v
                    + dsf.at(&[j, k, i]).v;
                hess_x[(i * n + j) * n + k] = lhs - rhs;
            }
        }
    }

    // Traced equation for X.
    let divw = div_con2(p, w);
    let trw = mat_dot(n, &p.g, w);
    let mut fpi = jmat_zero();
    for i in 0..n {
        for j in 0..n {
            fpi[i][j] = *f * b.pi[i][j];
        }
    }
    let div_fpi = div_con2(p, &fpi);
    let ftr = *f * trp_j;
    let mut trace_x = [0.0; MAXN];
    for i in 0..n {
        let mut lhs = trw.d[i];
        let mut lap_x = 0.0;
        let mut ric_x = 0.0;
        let mut dfp = 0.0;
        for a in 0..n {
            lhs -= 2.0 * g[i][a] * divw[a].v;
            dfp += g[i][a] * div_fpi[a].v;
            ric_x += b.ric[i][a] * x[a].v;
            for k in 0..n {
                lap_x += gi[a][k] * ddx.at(&[i, a, k]).v;
            }
        }
        let rhs = lap_x + ric_x - c * ftr.d[i] + 4.0 * dfp;
        trace_x[i] = lhs - rhs;
    }
    KidPoint { hess_f, hess_x, trace_f, trace_x }
}

/// Difference `modified - plain` of the linearization, which must equal `(0, h.J / 2)`.
pub fn modification_defect(base: &InitialDataSet, dir: &SymPair, region: &Region) -> Result<f64> {
    let (p1, p2) = linearize_on(base, dir, Variant::Plain, region)?;
    let (m1, m2) = linearize_on(base, dir, Variant::Modified, region)?;
    let n = base.n();
    let inputs = [Input::new(&base.g, 1), Input::new(&base.pi, 1), Input::new(&dir.h, 0)];
    let hs = dir.h.symmetric;
    let hj = map_nodes(&base.chart, &inputs, region, n, |x, j, out| {
        let p = PointGeom::new(n, &j[0], x)?;
        let pim = to_mat(&JT::from_stored(n, Valence::CON2, true, &j[1]));
        let jv = div_con2(&p, &pim);
        let h = to_mat(&JT::from_stored(n, Valence::COV2, hs, &j[2]));
        for i in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for k in 0..n {
                    s += p.gi[i][a].v * h[a][k].v * jv[k].v;
                }
            }
            out[i] = 0.5 * s;
        }
        Ok(())
    })?;
    let mut worst: f64 = 0.0;
    for (t, &l) in region.nodes.iter().enumerate() {
        worst = worst.max((m1.component(0)[l] - p1.component(0)[l]).abs());
        for i in 0..n {
            worst = worst.max((m2.component(i)[l] - p2.component(i)[l] - hj[t][i]).abs());
        }
    }
    Ok(worst)
}

/// `d/dt` shift helper re-exported for kernels that differentiate jets.
pub fn partial(j: &Jet, k: usize) -> Jet {
    dshift(j, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TypeParams;

    fn flat(nodes: usize) -> InitialDataSet {
        let c = Chart::new(3, 1.0, 4.0, nodes, 4).unwrap();
        InitialDataSet::new(Field::euclidean(&c), Field::zeros(&c, Valence::CON2, true), TypeParams::default()).unwrap()
    }

    #[test]
    fn flat_linearization_of_x1_squared_delta() {
        let ids = flat(17);
        let c = ids.chart.clone();
        let z = Jet::constant(0.0);
        let h = Field::sym2(&c, Valence::COV2, move |x| {
            let s = x[0] * x[0];
            vec![vec![s, z, z], vec![z, s, z], vec![z, z, s]]
        });
        let dir = SymPair { h, w: Field::zeros(&c, Valence::CON2, true) };
        let (a, b) = linearize(&ids, &dir, Variant::Plain).unwrap();
        for &l in c.annulus().nodes.iter().step_by(97) {
            assert!((a.component(0)[l] + 4.0).abs() < 1e-12);
            assert_eq!(b.component(0)[l], 0.0);
        }
    }

    #[test]
    fn flat_adjoint_of_x1_squared() {
        let ids = flat(17);
        let c = ids.chart.clone();
        let pair = LapseShiftPair::new(Field::scalar(&c, |x| x[0] * x[0]), Field::zeros(&c, Valence::VECTOR, false));
        let ad = adjoint(&ids, &pair, Variant::Plain).unwrap();
        let l = c.annulus().nodes[11];
        let want = [0.0, 0.0, 0.0, -2.0, 0.0, -2.0];
        for (s, w) in want.iter().enumerate() {
            assert!((ad.h.component(s)[l] - w).abs() < 1e-12);
            assert_eq!(ad.w.component(s)[l], 0.0);
        }
    }

    #[test]
    fn translational_kids_have_zero_residuals() {
        let ids = flat(17);
        let c = ids.chart.clone();
        let pair = LapseShiftPair::constant(&c, 1.0, &[0.3, -0.2, 0.5]);
        let r = kid_residuals(&ids, &pair, &SymPair::zero(&c)).unwrap();
        assert_eq!(r.sup(&c.annulus()), [0.0; 4]);
    }
}
