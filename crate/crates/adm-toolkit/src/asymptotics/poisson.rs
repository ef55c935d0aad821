//! Flat Poisson solves on the annulus of a chart.
//!
//! Unknowns live on grid nodes with `r_inner < |x| < r_outer`. The discrete operator is the
//! chart's central second-difference Laplacian. Stencil neighbours inside the inner sphere
//! take the Dirichlet value 0. Neighbours beyond the outer sphere take `(r_x / r_y)^{n-2} u(x)`,
//! which is exact for the radial solution `r^{2-n}` of the Robin condition
//! `d_r u + (n - 2) u / r = 0`. Both substitutions only touch the diagonal, so the matrix stays
//! symmetric and conjugate gradients apply.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::fd::d2;
use crate::fields::{Chart, Field, Valence};

const OUTSIDE: u32 = u32::MAX;
const INNER: u32 = u32::MAX - 1;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PoissonConfig {
    /// Relative residual `||L u - s|| / ||s||`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig { tolerance: 1e-10, max_iterations: 20_000 }
    }
}

/// Discrete annulus Laplacian with the boundary substitutions folded into the diagonal.
pub struct AnnulusLaplacian {
    chart: Arc<Chart>,
    /// Grid node of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown index of each grid node, or a boundary marker.
    index: Vec<u32>,
    diag: Vec<f64>,
    /// `(linear offset, weight)` of the off-centre stencil entries.
    offsets: Vec<(isize, f64)>,
}

impl AnnulusLaplacian {
    pub fn new(chart: &Arc<Chart>) -> AnnulusLaplacian {
        Self::build(chart, chart.r_inner, true)
    }

    /// Same unknowns with the Dirichlet value 0 beyond the outer sphere too.
    pub fn dirichlet(chart: &Arc<Chart>) -> AnnulusLaplacian {
        Self::build(chart, chart.r_inner, false)
    }

    /// Dirichlet problem on `r_in < |x| < r_outer`.
    pub fn dirichlet_shell(chart: &Arc<Chart>, r_in: f64) -> AnnulusLaplacian {
        Self::build(chart, r_in.max(chart.r_inner), false)
    }

    fn build(chart: &Arc<Chart>, r_in: f64, robin: bool) -> AnnulusLaplacian {
        let n = chart.n;
        let p = chart.fd_order / 2;
        let w = d2(chart.fd_order);
        let h2 = chart.h * chart.h;
        let mut index = vec![OUTSIDE; chart.total()];
        let mut nodes = Vec::new();
        for lin in 0..chart.total() {
            let m = chart.multi(lin);
            let x = chart.node_x(lin);
            let r = chart.radius_of(&x[..n]);
            if r <= r_in {
                index[lin] = INNER;
            } else if r < chart.r_outer && (0..n).all(|a| m[a] >= p && m[a] + p < chart.dim) {
                index[lin] = nodes.len() as u32;
                nodes.push(lin);
            }
        }
        let mut offsets = Vec::new();
        for a in 0..n {
            let s = chart.stride(a) as isize;
            for (k, wk) in w.iter().enumerate() {
                let off = k as isize - p as isize;
                if off != 0 {
                    offsets.push((off * s, wk / h2));
                }
            }
        }
        let centre = n as f64 * w[p] / h2;
        let diag = nodes
            .iter()
            .map(|&lin| {
                let rx = chart.radius_of(&chart.node_x(lin)[..n]);
                let mut d = centre;
                for &(off, wk) in &offsets {
                    let y = (lin as isize + off) as usize;
                    if robin && index[y] == OUTSIDE {
                        let ry = chart.radius_of(&chart.node_x(y)[..n]);
                        d += wk * (rx / ry).powi(n as i32 - 2);
                    }
                }
                d
            })
            .collect();
        AnnulusLaplacian { chart: chart.clone(), nodes, index, diag, offsets }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, &lin) in self.nodes.iter().enumerate() {
            let mut acc = self.diag[i] * u[i];
            for &(off, wk) in &self.offsets {
                let j = self.index[(lin as isize + off) as usize];
                if j < INNER {
                    acc += wk * u[j as usize];
                }
            }
            out[i] = acc;
        }
    }

    /// Solves `L u = s` by Jacobi-preconditioned conjugate gradients on `-L`.
    pub fn solve(&self, source: &[f64], cfg: &PoissonConfig) -> Result<(Vec<f64>, usize, f64)> {
        let m = self.len();
        let b: Vec<f64> = source.iter().map(|v| -v).collect();
        let bnorm = norm(&b);
        let mut u = vec![0.0; m];
        if bnorm == 0.0 {
            return Ok((u, 0, 0.0));
        }
        let inv: Vec<f64> = self.diag.iter().map(|d| -1.0 / d).collect();
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; m];
        for it in 1..=cfg.max_iterations {
            self.apply(&p, &mut ap);
            ap.iter_mut().for_each(|v| *v = -*v);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::LinearSolverStalled(format!(
                    "operator not positive along search direction ({pap:e})"
                )));
            }
            let alpha = rz / pap;
            for i in 0..m {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rel = norm(&r) / bnorm;
            if rel <= cfg.tolerance {
                return Ok((u, it, rel));
            }
            for i in 0..m {
                z[i] = r[i] * inv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverNotConverged { iterations: cfg.max_iterations, residual: norm(&r) / bnorm })
    }

    /// Spreads a solution over the whole grid: 0 inside the inner sphere, the Robin
    /// extension from the nearest annulus node along the ray beyond the outer sphere.
    pub fn to_field(&self, u: &[f64]) -> Result<Field> {
        let chart = &self.chart;
        let n = chart.n;
        let mut data = vec![0.0; chart.total()];
        for (i, &lin) in self.nodes.iter().enumerate() {
            data[lin] = u[i];
        }
        let pull = chart.r_outer - (chart.fd_order as f64 + 1.0) * chart.h;
        for lin in 0..chart.total() {
            if self.index[lin] != OUTSIDE {
                continue;
            }
            let x = chart.node_x(lin);
            let ry = chart.radius_of(&x[..n]);
            let mut m = [0usize; 4];
            for a in 0..n {
                let xa = x[a] * pull / ry;
                m[a] = ((xa + chart.r_outer) / chart.h + chart.ghost as f64).round() as usize;
            }
            let src = chart.linear(&m[..n]);
            let j = self.index[src];
            if j < INNER {
                let rx = chart.radius_of(&chart.node_x(src)[..n]);
                data[lin] = u[j as usize] * (rx / ry).powi(n as i32 - 2);
            }
        }
        Field::grid(chart, Valence::SCALAR, false, vec![data])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_source_matches_closed_form_up_to_harmonics() {
        let chart = Chart::new(3, 1.0, 8.0, 49, 4).unwrap();
        let lap = AnnulusLaplacian::new(&chart);
        let s: Vec<f64> = lap.nodes.iter().map(|&l| chart.radius_of(&chart.node_x(l)[..3]).powi(-4)).collect();
        let (u, _, rel) = lap.solve(&s, &PoissonConfig::default()).unwrap();
        assert!(rel <= 1e-10);
        let mut lu = vec![0.0; u.len()];
        lap.apply(&u, &mut lu);
        let err = lu.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
