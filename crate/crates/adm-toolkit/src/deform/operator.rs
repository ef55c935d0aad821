//! The discretized solve map on the annulus unknowns.
//!
//! State layout: `u` at every unknown node, then each component of `Y`, then the
//! basis coefficients. Residual layout: the `2 mu` slot, then each current component.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::poisson::{AnnulusLaplacian, PoissonConfig};
use crate::constraints::{gamma_dot_j, norm_vec, phi_point, InitialDataSet};
use crate::error::{Error, Result};
use crate::fields::fd::node_jet;
use crate::fields::{stored_count, Chart, Jet, Region, Valence, MAXN};
use crate::geometry::tensor::to_mat;
use crate::geometry::{conformal_killing_point, div_con2, JMat, PointGeom, JT};
use crate::linearized::SymPair;

/// Placement of the finite-dimensional correction basis.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BasisConfig {
    pub count: usize,
    pub seed: u64,
    /// Bump radius as a fraction of `r_outer - r_inner`.
    pub radius_fraction: f64,
    pub amplitude: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { count: 8, seed: 0x6b, radius_fraction: 0.2, amplitude: 1.0 }
    }
}

struct NodeBase {
    x: [f64; MAXN],
    g: Vec<Jet>,
    pi: Vec<Jet>,
    /// Current of the base data as jets.
    jb: Vec<Jet>,
}

/// Per-node output of the map.
#[derive(Clone, Copy, Debug)]
pub struct NodeEval {
    pub two_mu: f64,
    /// `div` of the deformed momentum, without the modification.
    pub j: [f64; MAXN],
    /// `gamma . J` of the base.
    pub corr: [f64; MAXN],
    /// `|J|` in the deformed metric.
    pub j_norm: f64,
}

pub struct Discretization {
    pub chart: Arc<Chart>,
    pub lap: AnnulusLaplacian,
    pub n: usize,
    pub basis: Vec<SymPair>,
    /// Coordinate L² norms of the basis pairs.
    pub basis_norms: Vec<f64>,
    base: Vec<NodeBase>,
    /// Per node: `(basis index, h jets, w jets)` for the pairs that do not vanish there.
    basis_jets: Vec<Vec<BasisJets>>,
}

type BasisJets = (usize, Vec<Jet>, Vec<Jet>);

fn nonzero(j: &[Jet]) -> bool {
    j.iter().any(|a| a.v != 0.0 || a.d.iter().any(|d| *d != 0.0))
}

impl Discretization {
    pub fn new(ids: &InitialDataSet, basis_cfg: &BasisConfig) -> Result<Discretization> {
        let chart = ids.chart.clone();
        let n = chart.n;
        if n < 3 {
            return Err(Error::InvalidParameters("the conformal exponent needs n >= 3".into()));
        }
        // Grid data only has derivatives one stencil away from the excised ball.
        let sampled = ids.g.grid_data().is_some() || ids.pi.grid_data().is_some();
        let r_in = if sampled { chart.r_inner + chart.stencil_width() } else { chart.r_inner };
        let lap = AnnulusLaplacian::dirichlet_shell(&chart, r_in);
        if lap.is_empty() {
            return Err(Error::InvalidParameters("annulus has no interior nodes".into()));
        }
        let basis = seeded_basis(&chart, basis_cfg);
        let basis_norms = basis.iter().map(|b| b.l2_norm()).collect::<Result<Vec<_>>>()?;
        let ns = stored_count(n, Valence::COV2, true);
        let base = lap
            .nodes
            .par_iter()
            .map(|&lin| {
                let x = chart.node_x(lin);
                let mut g = vec![Jet::default(); ns];
                let mut pi = vec![Jet::default(); ns];
                ids.g.jets_at_node(lin, 2, &mut g);
                ids.pi.jets_at_node(lin, 1, &mut pi);
                let pb = PointGeom::new(n, &g, &x[..n])?;
                let jb = div_con2(&pb, &con2(n, &pi));
                Ok(NodeBase { x, g, pi, jb })
            })
            .collect::<Result<Vec<_>>>()?;
        let basis_jets = lap
            .nodes
            .iter()
            .map(|&lin| {
                let mut out = Vec::new();
                for (k, b) in basis.iter().enumerate() {
                    let mut h = vec![Jet::default(); ns];
                    let mut w = vec![Jet::default(); ns];
                    b.h.jets_at_node(lin, 2, &mut h);
                    b.w.jets_at_node(lin, 1, &mut w);
                    if nonzero(&h) || nonzero(&w) {
                        out.push((k, h, w));
                    }
                }
                out
            })
            .collect();
        Ok(Discretization { chart, lap, n, basis, basis_norms, base, basis_jets })
    }

    /// Number of grid unknowns per scalar slot.
    pub fn m(&self) -> usize {
        self.lap.len()
    }

    pub fn state_len(&self) -> usize {
        (self.n + 1) * self.m() + self.basis.len()
    }

    pub fn residual_len(&self) -> usize {
        (self.n + 1) * self.m()
    }

    pub fn region(&self) -> Region {
        Region { nodes: self.lap.nodes.clone() }
    }

    /// Spreads slot `s` of a state over the grid, zero off the unknowns.
    pub fn slot_grid(&self, state: &[f64], s: usize) -> Vec<f64> {
        let m = self.m();
        let mut d = vec![0.0; self.chart.total()];
        for (i, &lin) in self.lap.nodes.iter().enumerate() {
            d[lin] = state[s * m + i];
        }
        d
    }

    pub fn coefficients<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[(self.n + 1) * self.m()..]
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<NodeEval>> {
        let n = self.n;
        let chart = &self.chart;
        let grids: Vec<Vec<f64>> = (0..=n).map(|s| self.slot_grid(state, s)).collect();
        let coef = self.coefficients(state);
        let expo = 4.0 / (n as f64 - 2.0);
        self.lap
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, &lin)| {
                let b = &self.base[i];
                let x = &b.x[..n];
                let psi = (1.0 + node_jet(chart, &grids[0], lin, 2)).powf(expo);
                let mut gs: Vec<Jet> = b.g.iter().map(|c| psi * *c).collect();
                let mut ws = b.pi.clone();
                for (k, h, w) in &self.basis_jets[i] {
                    let c = coef[*k];
                    gs.iter_mut().zip(h).for_each(|(a, e)| *a += *e * c);
                    ws.iter_mut().zip(w).for_each(|(a, e)| *a += *e * c);
                }
                let p = PointGeom::new(n, &gs, x)?;
                let pb = PointGeom::new(n, &b.g, x)?;
                let y: Vec<Jet> = (1..=n).map(|s| node_jet(chart, &grids[s], lin, 2)).collect();
                let ly = conformal_killing_point(&pb, &y);
                let mut pibar = con2(n, &ws);
                for r in 0..n {
                    for c in 0..n {
                        pibar[r][c] += ly[r][c];
                    }
                }
                let (two_mu, j) = phi_point(&p, &pibar);
                let corr = gamma_dot_j(&pb, &p, &b.jb);
                Ok(NodeEval { two_mu, j, corr, j_norm: norm_vec(&p, &j) })
            })
            .collect()
    }

    /// Modified constraint map at the unknowns in the residual layout.
    pub fn map(&self, state: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        let mut out = vec![0.0; self.residual_len()];
        for (i, e) in self.eval(state)?.iter().enumerate() {
            out[i] = e.two_mu;
            for a in 0..self.n {
                out[(a + 1) * m + i] = e.j[a] + 0.5 * e.corr[a];
            }
        }
        Ok(out)
    }

    /// Block Laplacian matching the principal part of the linearized map.
    pub fn precondition(&self, r: &[f64], cfg: &PoissonConfig) -> Result<Vec<f64>> {
        let m = self.m();
        let nf = self.n as f64;
        let cu = -4.0 * (nf - 1.0) / (nf - 2.0);
        let blocks: Vec<Vec<f64>> = (0..=self.n)
            .into_par_iter()
            .map(|s| {
                let scale = if s == 0 { cu.recip() } else { 1.0 };
                let src: Vec<f64> = r[s * m..(s + 1) * m].iter().map(|v| v * scale).collect();
                self.lap.solve(&src, cfg).map(|t| t.0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(blocks.concat())
    }
}

pub fn con2(n: usize, stored: &[Jet]) -> JMat {
    to_mat(&JT::from_stored(n, Valence::CON2, true, stored))
}

/// Bump pairs centred on the mid-annulus sphere along seeded directions.
pub fn seeded_basis(chart: &Arc<Chart>, cfg: &BasisConfig) -> Vec<SymPair> {
    let n = chart.n;
    let mid = 0.5 * (chart.r_inner + chart.r_outer);
    let rho = cfg.radius_fraction * (chart.r_outer - chart.r_inner);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count)
        .map(|k| {
            let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            let centre: Vec<f64> = dir.iter().map(|v| mid * v / len).collect();
            SymPair::seeded_bump(chart, cfg.seed.wrapping_add(k as u64 + 1), &centre, rho, cfg.amplitude)
        })
        .collect()
}
