use crate::error::{Error, Result};
use crate::fields::field::{sym_index, Valence};
use crate::fields::jet::{Jet, MAXN};

use super::tensor::{dshift, JMat, JT};

/// Metric data at a single point: the metric and its inverse as jets,
/// Christoffel symbols with first derivatives, and the volume density.
pub struct PointGeom {
    pub n: usize,
    pub g: JMat,
    pub gi: JMat,
    /// `gam[k][i][j] = Gamma^k_ij` with first derivatives in `.d`.
    pub gam: [[[Jet; MAXN]; MAXN]; MAXN],
    pub sqrt_det: f64,
}

/// Cholesky factor of a positive definite `n x n` matrix; `Err(pivot)` otherwise.
fn cholesky(n: usize, a: &[[f64; MAXN]; MAXN]) -> std::result::Result<[[f64; MAXN]; MAXN], f64> {
    let mut l = [[0.0; MAXN]; MAXN];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return Err(d);
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

fn inverse_from_cholesky(n: usize, l: &[[f64; MAXN]; MAXN]) -> [[f64; MAXN]; MAXN] {
    // Solve L L^T X = I column by column.
    let mut inv = [[0.0; MAXN]; MAXN];
    for c in 0..n {
        let mut y = [0.0; MAXN];
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [0.0; MAXN];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        for i in 0..n {
            inv[i][c] = x[i];
        }
    }
    inv
}

impl PointGeom {
    /// Builds the point geometry from stored (upper-triangular) metric jets.
    pub fn new(n: usize, stored: &[Jet], x: &[f64]) -> Result<PointGeom> {
        let mut g = [[Jet::constant(0.0); MAXN]; MAXN];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = stored[sym_index(i, j, n)];
            }
        }
        PointGeom::from_matrix(n, g, x)
    }

    pub fn from_matrix(n: usize, g: JMat, x: &[f64]) -> Result<PointGeom> {
        let mut gv = [[0.0; MAXN]; MAXN];
        for i in 0..n {
            for j in 0..n {
                gv[i][j] = g[i][j].v;
            }
        }
        let l = cholesky(n, &gv).map_err(|pivot| Error::MetricNotPositiveDefinite { at: x.to_vec(), pivot })?;
        let inv = inverse_from_cholesky(n, &l);
        let sqrt_det = (0..n).map(|i| l[i][i]).product();

        // d_a g^{-1} = -G (d_a g) G ; second derivatives by differentiating once more.
        let mut dgi = [[[0.0; MAXN]; MAXN]; MAXN];
        let prod3 = |a: &[[f64; MAXN]; MAXN], b: &[[f64; MAXN]; MAXN], c: &[[f64; MAXN]; MAXN]| {
            let mut t = [[0.0; MAXN]; MAXN];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        for m in 0..n {
                            s += a[i][k] * b[k][m] * c[m][j];
                        }
                    }
                    t[i][j] = s;
                }
            }
            t
        };
        let mut dg = [[[0.0; MAXN]; MAXN]; MAXN];
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    dg[a][i][j] = g[i][j].d[a];
                }
            }
            let t = prod3(&inv, &dg[a], &inv);
            for i in 0..n {
                for j in 0..n {
                    dgi[a][i][j] = -t[i][j];
                }
            }
        }
        let mut gi = [[Jet::constant(0.0); MAXN]; MAXN];
        for i in 0..n {
            for j in 0..n {
                gi[i][j].v = inv[i][j];
                for a in 0..n {
                    gi[i][j].d[a] = dgi[a][i][j];
                }
            }
        }
        for a in 0..n {
            for b in a..n {
                let mut ddg = [[0.0; MAXN]; MAXN];
                for i in 0..n {
                    for j in 0..n {
                        ddg[i][j] = g[i][j].dd[a][b];
                    }
                }
                let t1 = prod3(&inv, &ddg, &inv);
                let t2 = prod3(&inv, &dg[a], &prod3(&inv, &dg[b], &inv));
                let t3 = prod3(&inv, &dg[b], &prod3(&inv, &dg[a], &inv));
                for i in 0..n {
                    for j in 0..n {
                        let v = -t1[i][j] + t2[i][j] + t3[i][j];
                        gi[i][j].dd[a][b] = v;
                        gi[i][j].dd[b][a] = v;
                    }
                }
            }
        }

        let mut gam = [[[Jet::constant(0.0); MAXN]; MAXN]; MAXN];
        for i in 0..n {
            for j in i..n {
                // Lowered symbols Gamma_{l ij} = (d_i g_jl + d_j g_il - d_l g_ij) / 2.
                let mut low = [Jet::constant(0.0); MAXN];
                for (lidx, lo) in low.iter_mut().enumerate().take(n) {
                    *lo = (dshift(&g[j][lidx], i) + dshift(&g[i][lidx], j) - dshift(&g[i][j], lidx)).scale(0.5);
                }
                for k in 0..n {
                    let mut s = Jet::constant(0.0);
                    for (lidx, lo) in low.iter().enumerate().take(n) {
                        s += gi[k][lidx] * *lo;
                    }
                    gam[k][i][j] = s;
                    gam[k][j][i] = s;
                }
            }
        }
        Ok(PointGeom { n, g, gi, gam, sqrt_det })
    }

    /// Riemann tensor `R^r_{s m v} = d_m Gamma^r_{v s} - d_v Gamma^r_{m s} + Gamma^r_{m l} Gamma^l_{v s} - Gamma^r_{v l} Gamma^l_{m s}`,
    /// dense with layout `[r][s][m][v]`.
    pub fn riemann(&self) -> Vec<f64> {
        let n = self.n;
        let gm = &self.gam;
        let mut out = vec![0.0; n.pow(4)];
        for r in 0..n {
            for s in 0..n {
                for m in 0..n {
                    for v in 0..n {
                        let mut x = gm[r][v][s].d[m] - gm[r][m][s].d[v];
                        for l in 0..n {
                            x += gm[r][m][l].v * gm[l][v][s].v - gm[r][v][l].v * gm[l][m][s].v;
                        }
                        out[((r * n + s) * n + m) * n + v] = x;
                    }
                }
            }
        }
        out
    }

    /// Riemann tensor in the index order `P^l_{abc} = R^l_{c a b}`, for which `P^l_{l jk} = R_jk`.
    pub fn riemann_rotated(&self) -> Vec<f64> {
        let n = self.n;
        let r = self.riemann();
        let mut out = vec![0.0; n.pow(4)];
        for l in 0..n {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        out[((l * n + a) * n + b) * n + c] = r[((l * n + c) * n + a) * n + b];
                    }
                }
            }
        }
        out
    }

    /// Ricci tensor `R_sv = R^r_{s r v}`.
    pub fn ricci(&self) -> [[f64; MAXN]; MAXN] {
        let n = self.n;
        let gm = &self.gam;
        let mut ric = [[0.0; MAXN]; MAXN];
        for s in 0..n {
            for v in s..n {
                let mut x = 0.0;
                for r in 0..n {
                    x += gm[r][v][s].d[r] - gm[r][r][s].d[v];
                    for l in 0..n {
                        x += gm[r][r][l].v * gm[l][v][s].v - gm[r][v][l].v * gm[l][r][s].v;
                    }
                }
                ric[s][v] = x;
                ric[v][s] = x;
            }
        }
        ric
    }

    pub fn scalar(&self, ric: &[[f64; MAXN]; MAXN]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.gi[i][j].v * ric[i][j];
            }
        }
        s
    }

    /// Covariant derivative; the new covariant slot is appended last, so for a
    /// covector `X_i` the result indexed `[i][j]` is `X_{i;j} = nabla_j X_i`.
    pub fn nabla(&self, t: &JT) -> JT {
        let n = self.n;
        let r = t.rank();
        let con = t.val.con;
        let mut out = JT::zeros(n, Valence { cov: t.val.cov + 1, con });
        for lin in 0..out.c.len() {
            let idx = out.multi(lin);
            let k = idx[r];
            let base = &idx[..r];
            let mut v = dshift(t.at(base), k);
            let mut tmp = [0usize; 6];
            tmp[..r].copy_from_slice(base);
            for s in 0..r {
                let orig = tmp[s];
                for m in 0..n {
                    tmp[s] = m;
                    let tv = *t.at(&tmp[..r]);
                    if s < con {
                        v += self.gam[orig][k][m] * tv;
                    } else {
                        v -= self.gam[m][k][orig] * tv;
                    }
                }
                tmp[s] = orig;
            }
            out.c[lin] = v;
        }
        out
    }

    /// Metric values as a plain matrix.
    pub fn gv(&self) -> [[f64; MAXN]; MAXN] {
        let mut m = [[0.0; MAXN]; MAXN];
        for i in 0..self.n {
            for j in 0..self.n {
                m[i][j] = self.g[i][j].v;
            }
        }
        m
    }

    /// Inverse metric values as a plain matrix.
    pub fn giv(&self) -> [[f64; MAXN]; MAXN] {
        let mut m = [[0.0; MAXN]; MAXN];
        for i in 0..self.n {
            for j in 0..self.n {
                m[i][j] = self.gi[i][j].v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::jet::radius;

    fn conformal(x: &[f64]) -> PointGeom {
        let xj = Jet::coords(x);
        let u = 1.0 + radius(&xj).powi(-2);
        let u4 = u.powi(4);
        let z = Jet::constant(0.0);
        let stored = vec![u4, z, z, u4, z, u4];
        PointGeom::new(3, &stored, x).unwrap()
    }

    #[test]
    fn conformal_scalar_curvature() {
        // R = -8 u^{-5} Lap u with u = 1 + r^{-2}, Lap r^{-2} = 2 r^{-4}.
        let p = conformal(&[0.6, 0.0, 0.8]);
        let r = p.scalar(&p.ricci());
        assert!((r + 0.5).abs() < 1e-12, "R = {r}");
    }

    #[test]
    fn riemann_contracts_to_ricci() {
        let p = conformal(&[0.9, -1.1, 0.4]);
        let ric = p.ricci();
        let pr = p.riemann_rotated();
        let n = 3;
        for j in 0..n {
            for k in 0..n {
                let c: f64 = (0..n).map(|l| pr[((l * n + l) * n + j) * n + k]).sum();
                assert!((c - ric[j][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metric_compatibility() {
        let x = [0.9, -1.1, 0.4];
        let p = conformal(&x);
        let mut t = JT::zeros(3, Valence::COV2);
        for i in 0..3 {
            for j in 0..3 {
                t.c[i * 3 + j] = p.g[i][j];
            }
        }
        let d = p.nabla(&t);
        assert!(d.c.iter().all(|j| j.v.abs() < 1e-13));
        assert!(d.c.iter().all(|j| j.d[..3].iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn rejects_indefinite() {
        let z = Jet::constant(0.0);
        let one = Jet::constant(1.0);
        let stored = vec![one, z, z, -one, z, one];
        assert!(matches!(PointGeom::new(3, &stored, &[1.0, 0.0, 0.0]), Err(Error::MetricNotPositiveDefinite { .. })));
    }
}
