//! Tensor-product Lagrange interpolation of nodal samples, differentiated
//! analytically to produce jets at off-grid points.

use super::chart::Chart;
use super::jet::{Jet, MAXN};

/// Points per axis for a chart's finite-difference order.
pub fn stencil_points(chart: &Chart) -> usize {
    chart.fd_order + 2
}

/// Values, first and second derivatives (unit spacing) of the `m` Lagrange
/// basis polynomials on nodes `0..m` evaluated at `s`.
fn lagrange_basis(m: usize, s: f64, w0: &mut [f64], w1: &mut [f64], w2: &mut [f64]) {
    for k in 0..m {
        let mut denom = 1.0;
        for j in 0..m {
            if j != k {
                denom *= k as f64 - j as f64;
            }
        }
        let mut v = 1.0;
        for j in 0..m {
            if j != k {
                v *= s - j as f64;
            }
        }
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for a in 0..m {
            if a == k {
                continue;
            }
            let mut p = 1.0;
            for j in 0..m {
                if j != k && j != a {
                    p *= s - j as f64;
                }
            }
            d1 += p;
            for b in 0..m {
                if b == k || b == a {
                    continue;
                }
                let mut q = 1.0;
                for j in 0..m {
                    if j != k && j != a && j != b {
                        q *= s - j as f64;
                    }
                }
                d2 += q;
            }
        }
        w0[k] = v / denom;
        w1[k] = d1 / denom;
        w2[k] = d2 / denom;
    }
}

/// Jets of every component in `data` at the point `x`.
pub fn interpolate_jets(chart: &Chart, data: &[Vec<f64>], x: &[f64], order: u8, out: &mut [Jet]) {
    let n = chart.n;
    let m = stencil_points(chart);
    let mut base = [0usize; MAXN];
    let mut w0 = [[0.0; 8]; MAXN];
    let mut w1 = [[0.0; 8]; MAXN];
    let mut w2 = [[0.0; 8]; MAXN];
    for a in 0..n {
        let u = (x[a] + chart.r_outer) / chart.h + chart.ghost as f64;
        let lo = u.floor() as isize - (m as isize / 2 - 1);
        if lo < 0 || lo as usize + m > chart.dim || !u.is_finite() {
            out.iter_mut().for_each(|o| *o = Jet::nan());
            return;
        }
        base[a] = lo as usize;
        lagrange_basis(m, u - lo as f64, &mut w0[a], &mut w1[a], &mut w2[a]);
        let ih = 1.0 / chart.h;
        for k in 0..m {
            w1[a][k] *= ih;
            w2[a][k] *= ih * ih;
        }
    }
    let count = m.pow(n as u32);
    let mut strides = [0usize; MAXN];
    for (a, s) in strides.iter_mut().enumerate().take(n) {
        *s = chart.stride(a);
    }
    for (c, o) in out.iter_mut().enumerate() {
        let d = &data[c];
        let mut j = Jet::constant(0.0);
        for t in 0..count {
            let mut idx = [0usize; MAXN];
            let mut r = t;
            let mut lin = 0;
            for a in (0..n).rev() {
                idx[a] = r % m;
                r /= m;
                lin += (base[a] + idx[a]) * strides[a];
            }
            let val = d[lin];
            let mut p0 = 1.0;
            for a in 0..n {
                p0 *= w0[a][idx[a]];
            }
            j.v += p0 * val;
            if order == 0 {
                continue;
            }
            for a in 0..n {
                let mut p = w1[a][idx[a]];
                for b in 0..n {
                    if b != a {
                        p *= w0[b][idx[b]];
                    }
                }
                j.d[a] += p * val;
            }
            if order < 2 {
                continue;
            }
            for a in 0..n {
                for b in a..n {
                    let mut p = 1.0;
                    for e in 0..n {
                        p *= if a == b && e == a {
                            w2[e][idx[e]]
                        } else if e == a || e == b {
                            w1[e][idx[e]]
                        } else {
                            w0[e][idx[e]]
                        };
                    }
                    j.dd[a][b] += p * val;
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                j.dd[a][b] = j.dd[b][a];
            }
        }
        if order < 2 {
            j.dd = [[f64::NAN; MAXN]; MAXN];
        }
        *o = j;
    }
}
