//! Deformations of initial data onto a prescribed value of the modified
//! constraint map, and the strict dominant-energy perturbation built on them.
//!
//! The unknowns are a conformal factor `u` and a vector field `Y` on the annulus
//! nodes, both zero off the annulus, plus the coefficients of a fixed basis of
//! compactly supported pairs `(eta_k, xi_k)`. The deformed data are
//!
//! ```text
//! g' = (1 + u)^{4/(n-2)} g + sum c_k eta_k,    pi' = pi + L_g Y + sum c_k xi_k
//! ```
//!
//! with `L_g Y = L_Y g - (div_g Y) g`, indices raised by `g`. Newton steps are
//! solved by flexible GMRES with the block Laplacian as preconditioner. Each step
//! picks the basis coefficients by minimizing the combined norm of the update
//! against the preconditioned response of the basis.

pub mod krylov;
pub mod operator;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::asymptotics::poisson::PoissonConfig;
use crate::constraints::{dec_tolerance, InitialDataSet};
use crate::error::{Error, Result};
use crate::fields::fd::node_jet;
use crate::fields::{
    stored_count, sup_abs, weighted_norm_on, Chart, DecayWeight, Field, Jet, NormMode, Region, Valence, MAXN,
};
use crate::geometry::{conformal_killing_point, PointGeom};
use crate::linearized::SymPair;

/// One vector per basis pair.
type Columns = Vec<Vec<f64>>;

pub use krylov::{fgmres, KrylovConfig};
pub use operator::{BasisConfig, Discretization, NodeEval};

#[derive(Clone, Debug, Serialize)]
pub struct DeformConfig {
    /// Sup-norm tolerance on the residual.
    pub tolerance: f64,
    pub max_newton: usize,
    /// Largest admissible sup norm of the first linearized step.
    pub max_step: f64,
    pub krylov: KrylovConfig,
    /// Largest relative linear residual accepted for a Newton step.
    pub max_linear_residual: f64,
    pub preconditioner: PoissonConfig,
    pub basis: BasisConfig,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            tolerance: 1e-9,
            max_newton: 25,
            max_step: 0.1,
            krylov: KrylovConfig::default(),
            max_linear_residual: 1e-3,
            preconditioner: PoissonConfig { tolerance: 1e-6, max_iterations: 5000 },
            basis: BasisConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DeformSolution {
    pub base: InitialDataSet,
    pub u: Field,
    pub y: Field,
    /// `(sum c_k eta_k, sum c_k xi_k)`.
    pub correction: SymPair,
    pub coefficients: Vec<f64>,
    /// `Phi'(deformed) - target` at the unknowns, NaN elsewhere.
    pub residual: (Field, Field),
    pub residual_sup: f64,
    /// Sup residual after each accepted iterate, starting from the initial guess.
    pub residual_history: Vec<f64>,
    /// Residual evaluations accepted, the initial one included.
    pub newton_iters: usize,
    pub krylov_iters: usize,
    /// Weighted size of `target - Phi'(g, pi)` below which the first step stays admissible.
    pub trust_radius: Option<f64>,
    pub target_size: f64,
    pub region: Region,
}

impl DeformSolution {
    /// The deformed pair as analytic fields that reproduce the solver's stencils at grid nodes.
    pub fn deformed(&self) -> Result<InitialDataSet> {
        let chart = self.base.chart.clone();
        let n = chart.n;
        let ns = stored_count(n, Valence::COV2, true);
        let expo = 4.0 / (n as f64 - 2.0);
        let (u, g, h) = (self.u.clone(), self.base.g.clone(), self.correction.h.clone());
        let gbar = Field::analytic(&chart, Valence::COV2, true, 2, move |x, out| {
            let mut uj = [Jet::default()];
            snapped_jets(&u, x, &mut uj);
            let mut gj = vec![Jet::default(); ns];
            let mut hj = vec![Jet::default(); ns];
            g.jets_at(x, 2, &mut gj);
            h.jets_at(x, 2, &mut hj);
            let psi = (1.0 + uj[0]).powf(expo);
            for c in 0..ns {
                out[c] = psi * gj[c] + hj[c];
            }
        });
        let (y, g, pi, w) = (self.y.clone(), self.base.g.clone(), self.base.pi.clone(), self.correction.w.clone());
        let pibar = Field::analytic(&chart, Valence::CON2, true, 1, move |x, out| {
            let mut yj = vec![Jet::default(); n];
            snapped_jets(&y, x, &mut yj);
            let mut gj = vec![Jet::default(); ns];
            let mut pj = vec![Jet::default(); ns];
            let mut wj = vec![Jet::default(); ns];
            g.jets_at(x, 2, &mut gj);
            pi.jets_at(x, 1, &mut pj);
            w.jets_at(x, 1, &mut wj);
            let Ok(pb) = PointGeom::new(n, &gj, x) else {
                out.iter_mut().for_each(|o| *o = Jet::nan());
                return;
            };
            let ly = conformal_killing_point(&pb, &yj);
            let mut c = 0;
            for i in 0..n {
                for j in i..n {
                    out[c] = pj[c] + ly[i][j] + wj[c];
                    c += 1;
                }
            }
        });
        InitialDataSet::new(gbar, pibar, self.base.type_params)
    }
}

/// Grid jets at nodes through the solver's stencils, interpolated elsewhere.
fn snapped_jets(f: &Field, x: &[f64], out: &mut [Jet]) {
    let chart = &f.chart;
    let n = chart.n;
    let mut m = [0usize; MAXN];
    let mut on_node = true;
    for a in 0..n {
        let t = (x[a] + chart.r_outer) / chart.h + chart.ghost as f64;
        let r = t.round();
        if (t - r).abs() > 1e-9 || r < 0.0 || r as usize >= chart.dim {
            on_node = false;
            break;
        }
        m[a] = r as usize;
    }
    if on_node {
        if let Some(d) = f.grid_data() {
            let lin = chart.linear(&m[..n]);
            for (c, o) in out.iter_mut().enumerate() {
                *o = node_jet(chart, &d[c], lin, 2);
            }
            return;
        }
    }
    f.jets_at(x, 2, out);
}

fn sup(v: &[f64]) -> f64 {
    sup_abs(v.iter().copied())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

struct Solver<'a> {
    disc: &'a Discretization,
    target: Vec<f64>,
    cfg: &'a DeformConfig,
    krylov_iters: usize,
}

impl Solver<'_> {
    fn residual(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(sub(&self.disc.map(state)?, &self.target))
    }

    /// Directional derivative of the map by a central difference.
    fn jvp(&self, state: &[f64], dir: &[f64]) -> Result<Vec<f64>> {
        let dn = sup(dir);
        if dn == 0.0 {
            return Ok(vec![0.0; self.disc.residual_len()]);
        }
        let eps = f64::EPSILON.cbrt() * (1.0 + sup(state)) / dn;
        let moved = |t: f64| -> Vec<f64> { state.iter().zip(dir).map(|(s, d)| s + t * d).collect() };
        let fp = self.disc.map(&moved(eps))?;
        let fm = self.disc.map(&moved(-eps))?;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
    }

    /// Residual response to each basis pair and its preconditioned image.
    fn basis_response(&self, state: &[f64]) -> Result<(Columns, Columns)> {
        let d = self.disc;
        let off = d.residual_len();
        let mut cols = Vec::with_capacity(d.basis.len());
        let mut pre = Vec::with_capacity(d.basis.len());
        for k in 0..d.basis.len() {
            let mut e = vec![0.0; d.state_len()];
            e[off + k] = 1.0;
            let c = self.jvp(state, &e)?;
            pre.push(d.precondition(&c, &self.cfg.preconditioner)?);
            cols.push(c);
        }
        Ok((cols, pre))
    }

    /// Basis coefficients minimizing `h^n |v|^2 + sum |c_k|^2 |(eta_k, xi_k)|^2`
    /// with `v = P^{-1}(-r) - sum c_k P^{-1} K_k`.
    fn coefficients(&self, r: &[f64], pre: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.disc;
        let nb = pre.len();
        if nb == 0 {
            return Ok(Vec::new());
        }
        let vol = d.chart.h.powi(d.n as i32);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let v0 = d.precondition(&neg, &self.cfg.preconditioner)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let a = DMatrix::from_fn(nb, nb, |i, j| {
            vol * dot(&pre[i], &pre[j]) + if i == j { d.basis_norms[i].powi(2) } else { 0.0 }
        });
        let b = DVector::from_fn(nb, |i, _| vol * dot(&pre[i], &v0));
        let c = a
            .cholesky()
            .ok_or_else(|| Error::LinearSolverStalled("basis normal matrix is not positive definite".into()))?
            .solve(&b);
        Ok(c.iter().copied().collect())
    }

    fn step(&mut self, state: &[f64], r: &[f64], cols: &[Vec<f64>], pre: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.disc;
        let coef = self.coefficients(r, pre)?;
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        for (c, col) in coef.iter().zip(cols) {
            rhs.iter_mut().zip(col).for_each(|(a, b)| *a -= c * b);
        }
        let nr = d.residual_len();
        let apply = |v: &[f64]| {
            let mut dir = v.to_vec();
            dir.resize(d.state_len(), 0.0);
            self.jvp(state, &dir)
        };
        let precond = |v: &[f64]| d.precondition(v, &self.cfg.preconditioner);
        let (mut v, iters, rel) = fgmres(apply, precond, &rhs, &self.cfg.krylov)?;
        self.krylov_iters += iters;
        if rel > self.cfg.max_linear_residual {
            return Err(Error::LinearSolverStalled(format!("relative residual {rel:e} after {iters} iterations")));
        }
        v.truncate(nr);
        v.extend(coef);
        Ok(v)
    }
}

/// Weighted `L^p_{-2-q}` size of a residual-layout vector.
fn residual_norm(disc: &Discretization, ids: &InitialDataSet, r: &[f64]) -> Result<f64> {
    let (s, v) = residual_fields(disc, r)?;
    let tp = ids.type_params;
    let w = DecayWeight { q: tp.q + 2.0, k: 0, alpha: tp.alpha, p: tp.p };
    let region = disc.region();
    Ok(weighted_norm_on(&s, w, NormMode::Sobolev, &region)? + weighted_norm_on(&v, w, NormMode::Sobolev, &region)?)
}

fn residual_fields(disc: &Discretization, r: &[f64]) -> Result<(Field, Field)> {
    let chart = &disc.chart;
    let m = disc.m();
    let total = chart.total();
    let spread = |s: usize| {
        let mut d = vec![f64::NAN; total];
        for (i, &lin) in disc.lap.nodes.iter().enumerate() {
            d[lin] = r[s * m + i];
        }
        d
    };
    let s = Field::grid(chart, Valence::SCALAR, false, vec![spread(0)])?;
    let v = Field::grid(chart, Valence::VECTOR, false, (1..=disc.n).map(spread).collect())?;
    Ok((s, v))
}

fn solve(ids: &InitialDataSet, disc: &Discretization, target: Vec<f64>, cfg: &DeformConfig) -> Result<DeformSolution> {
    let mut solver = Solver { disc, target, cfg, krylov_iters: 0 };
    let mut state = vec![0.0; disc.state_len()];
    let mut r = solver.residual(&state)?;
    let target_size = residual_norm(disc, ids, &r)?;
    let mut history = vec![sup(&r)];
    let mut trust_radius = None;
    if history[0] > cfg.tolerance {
        let (cols, pre) = solver.basis_response(&state)?;
        let mut it = 0;
        while *history.last().unwrap() > cfg.tolerance {
            if it == cfg.max_newton {
                return Err(Error::NewtonDiverged(format!(
                    "iteration cap {} reached at residual {:e}",
                    cfg.max_newton,
                    history.last().unwrap()
                )));
            }
            it += 1;
            let dx = solver.step(&state, &r, &cols, &pre)?;
            if it == 1 {
                let s = sup(&dx);
                let radius = if s > 0.0 { target_size * cfg.max_step / s } else { f64::INFINITY };
                if s > cfg.max_step {
                    return Err(Error::TargetTooLarge { size: target_size, radius });
                }
                trust_radius = Some(radius);
            }
            let prev = *history.last().unwrap();
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = state.iter().zip(&dx).map(|(s, d)| s + alpha * d).collect();
                let rt = solver.residual(&trial)?;
                let st = sup(&rt);
                if st < prev {
                    state = trial;
                    r = rt;
                    history.push(st);
                    break;
                }
                alpha *= 0.5;
                if alpha < 1.0 / 16.0 {
                    return Err(Error::NewtonDiverged(format!("residual grew from {prev:e} to {st:e}")));
                }
            }
        }
    }
    let chart = &disc.chart;
    let u = Field::grid(chart, Valence::SCALAR, false, vec![disc.slot_grid(&state, 0)])?;
    let y = Field::grid(chart, Valence::VECTOR, false, (1..=disc.n).map(|s| disc.slot_grid(&state, s)).collect())?;
    let coefficients = disc.coefficients(&state).to_vec();
    let correction = combine_basis(chart, &disc.basis, &coefficients)?;
    Ok(DeformSolution {
        base: ids.clone(),
        u,
        y,
        correction,
        coefficients,
        residual: residual_fields(disc, &r)?,
        residual_sup: sup(&r),
        newton_iters: history.len(),
        residual_history: history,
        krylov_iters: solver.krylov_iters,
        trust_radius,
        target_size,
        region: disc.region(),
    })
}

fn combine_basis(chart: &Arc<Chart>, basis: &[SymPair], c: &[f64]) -> Result<SymPair> {
    let mut out = SymPair::zero(chart);
    let mut support = None;
    for (b, &ck) in basis.iter().zip(c) {
        out.h = out.h.combine(1.0, &b.h, ck)?;
        out.w = out.w.combine(1.0, &b.w, ck)?;
        if let Some(s) = b.support() {
            support = Some(match support {
                None => s,
                Some(t) => s.union(&t),
            });
        }
    }
    if let Some(s) = support {
        out.h = out.h.with_support(s);
        out.w = out.w.with_support(s);
    }
    Ok(out)
}

fn sample_target(disc: &Discretization, target: (&Field, &Field)) -> Result<Vec<f64>> {
    let n = disc.n;
    let m = disc.m();
    if target.0.valence != Valence::SCALAR || target.1.valence != Valence::VECTOR {
        return Err(Error::IncompatibleValence("target must be a (scalar, vector) pair".into()));
    }
    let mut out = vec![0.0; disc.residual_len()];
    let mut s = [Jet::default()];
    let mut v = vec![Jet::default(); n];
    for (i, &lin) in disc.lap.nodes.iter().enumerate() {
        target.0.jets_at_node(lin, 0, &mut s);
        target.1.jets_at_node(lin, 0, &mut v);
        out[i] = s[0].v;
        for a in 0..n {
            out[(a + 1) * m + i] = v[a].v;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("target is undefined at some annulus node".into()));
    }
    Ok(out)
}

/// Solves `Phi'_{(g, pi)}(g', pi') = target` for the deformation described in the module docs.
pub fn deform_to_target(ids: &InitialDataSet, target: (&Field, &Field), cfg: &DeformConfig) -> Result<DeformSolution> {
    let disc = Discretization::new(ids, &cfg.basis)?;
    let t = sample_target(&disc, target)?;
    solve(ids, &disc, t, cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub lambda: f64,
    /// Minimum over the unknowns of `mu' - (1 + lambda)|J'| - (1 + lambda)(mu - |J|)`.
    pub min_margin: f64,
    /// Minimum over the nodes where the bump exceeds `support_threshold` times its maximum.
    pub min_on_support: f64,
    pub support_threshold: f64,
    pub support_nodes: usize,
    pub tolerance: f64,
    pub violated: bool,
    /// `lambda = 0`: the inequality degenerates to equality.
    pub boundary_case: bool,
}

pub struct StrictDecDeformation {
    pub solution: DeformSolution,
    pub deformed: InitialDataSet,
    pub margin: Field,
    pub report: MarginReport,
}

const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Deforms onto `Phi'(g, pi) + (2 lambda (mu + phi), 0)`, so `mu' = (1 + lambda) mu + lambda phi`.
pub fn strict_dec_deform(
    ids: &InitialDataSet,
    lambda: f64,
    bump: &Field,
    cfg: &DeformConfig,
) -> Result<StrictDecDeformation> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameters(format!("lambda = {lambda} must be non-negative")));
    }
    if bump.valence != Valence::SCALAR {
        return Err(Error::IncompatibleValence("bump must be a scalar field".into()));
    }
    let disc = Discretization::new(ids, &cfg.basis)?;
    let m = disc.m();
    let n = disc.n;
    let zero = vec![0.0; disc.state_len()];
    let base = disc.eval(&zero)?;
    let mut phi = vec![0.0; m];
    let mut s = [Jet::default()];
    for (i, &lin) in disc.lap.nodes.iter().enumerate() {
        bump.jets_at_node(lin, 0, &mut s);
        phi[i] = s[0].v;
    }
    let mut target = disc.map(&zero)?;
    for i in 0..m {
        target[i] += lambda * (base[i].two_mu + 2.0 * phi[i]);
    }
    let solution = solve(ids, &disc, target, cfg)?;
    let mut state = vec![0.0; disc.state_len()];
    for s in 0..=n {
        let g = solution.u_or_y_slot(s);
        for (i, &lin) in disc.lap.nodes.iter().enumerate() {
            state[s * m + i] = g[lin];
        }
    }
    state[(n + 1) * m..].copy_from_slice(&solution.coefficients);
    let def = disc.eval(&state)?;
    let l1 = 1.0 + lambda;
    let margin: Vec<f64> =
        def.iter().zip(&base).map(|(d, b)| 0.5 * d.two_mu - l1 * d.j_norm - l1 * (0.5 * b.two_mu - b.j_norm)).collect();
    let pmax = phi.iter().copied().fold(0.0, f64::max);
    let on: Vec<f64> =
        margin.iter().zip(&phi).filter(|(_, p)| **p > SUPPORT_THRESHOLD * pmax).map(|(v, _)| *v).collect();
    let min_margin = margin.iter().copied().fold(f64::INFINITY, f64::min);
    let tolerance = dec_tolerance(&disc.chart);
    let report = MarginReport {
        lambda,
        min_margin,
        min_on_support: on.iter().copied().fold(f64::INFINITY, f64::min),
        support_threshold: SUPPORT_THRESHOLD,
        support_nodes: on.len(),
        tolerance,
        violated: min_margin < -tolerance,
        boundary_case: lambda == 0.0,
    };
    let mut grid = vec![f64::NAN; disc.chart.total()];
    for (i, &lin) in disc.lap.nodes.iter().enumerate() {
        grid[lin] = margin[i];
    }
    let margin = Field::grid(&disc.chart, Valence::SCALAR, false, vec![grid])?;
    let deformed = solution.deformed()?;
    Ok(StrictDecDeformation { solution, deformed, margin, report })
}

impl DeformSolution {
    fn u_or_y_slot(&self, s: usize) -> &[f64] {
        if s == 0 {
            &self.u.grid_data().expect("grid field")[0]
        } else {
            &self.y.grid_data().expect("grid field")[s - 1]
        }
    }
}

/// `(|g' - g|_{W^{2,p}_{-q}} + |pi' - pi|_{W^{1,p}_{-1-q}}) / lambda` on the solver's unknowns.
pub fn verify_deform_size(solution: &DeformSolution, lambda: f64) -> Result<f64> {
    let deformed = solution.deformed()?;
    let base = &solution.base;
    let dg = deformed.g.sub(&base.g)?;
    let dp = deformed.pi.sub(&base.pi)?;
    let tp = base.type_params;
    let region = &solution.region;
    let ng = weighted_norm_on(&dg, DecayWeight { q: tp.q, k: 2, alpha: tp.alpha, p: tp.p }, NormMode::Sobolev, region)?;
    let np = weighted_norm_on(
        &dp,
        DecayWeight { q: tp.q + 1.0, k: 1, alpha: tp.alpha, p: tp.p },
        NormMode::Sobolev,
        region,
    )?;
    let size = ng + np;
    if size == 0.0 {
        return Ok(0.0);
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameters("nonzero deformation with lambda = 0".into()));
    }
    Ok(size / lambda)
}
