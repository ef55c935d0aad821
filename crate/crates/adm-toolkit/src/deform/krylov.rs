//! Restarted flexible GMRES with right preconditioning.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KrylovConfig {
    pub restart: usize,
    pub max_iterations: usize,
    /// Relative residual `||b - A x|| / ||b||`.
    pub tolerance: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig { restart: 40, max_iterations: 120, tolerance: 1e-9 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b`. The preconditioner may change between iterations.
/// Returns the best iterate, the iteration count and its relative residual, which
/// exceeds the tolerance only when the iteration budget ran out.
pub fn fgmres(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut precond: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let m = cfg.restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();
    let mut beta = bnorm;
    while total < cfg.max_iterations {
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|a| a / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < cfg.max_iterations {
            let zk = precond(&v[k])?;
            let mut w = apply(&zk)?;
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                hess[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= hik * b);
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let den = hess[k][k].hypot(hess[k + 1][k]);
            if !(den > 0.0) || !den.is_finite() {
                return Err(Error::LinearSolverStalled(format!("Krylov breakdown at iteration {total}")));
            }
            cs[k] = hess[k][k] / den;
            sn[k] = hess[k + 1][k] / den;
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= cfg.tolerance * bnorm || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|a| a / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (zi, yi) in z.iter().zip(&y) {
            x.iter_mut().zip(zi).for_each(|(a, b)| *a += yi * b);
        }
        let ax = apply(&x)?;
        r = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        beta = norm(&r);
        if beta <= cfg.tolerance * bnorm {
            return Ok((x, total, beta / bnorm));
        }
    }
    Ok((x, total, beta / bnorm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonsymmetric_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64]| -> Result<Vec<f64>> {
            Ok((0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    3.0 * x[i] - 1.5 * l - 0.5 * r
                })
                .collect())
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let cfg = KrylovConfig { restart: 10, max_iterations: 500, tolerance: 1e-12 };
        let (x, _, rel) = fgmres(apply, |v| Ok(v.to_vec()), &b, &cfg).unwrap();
        let ax = apply(&x).unwrap();
        let err = ax.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(rel <= 1e-12 && err < 1e-10, "{rel} {err}");
    }
}
