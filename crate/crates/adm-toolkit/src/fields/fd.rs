//! Central finite-difference stencils and nodal jets on the chart grid.

use super::chart::Chart;
use super::jet::{Jet, MAXN};

const D1_2: [f64; 3] = [-0.5, 0.0, 0.5];
const D2_2: [f64; 3] = [1.0, -2.0, 1.0];
const D1_4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
const D2_4: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// First-derivative weights for offsets `-p..=p` (unit spacing).
pub fn d1(order: usize) -> &'static [f64] {
    if order == 2 {
        &D1_2
    } else {
        &D1_4
    }
}

/// Second-derivative weights for offsets `-p..=p` (unit spacing).
pub fn d2(order: usize) -> &'static [f64] {
    if order == 2 {
        &D2_2
    } else {
        &D2_4
    }
}

/// Finite-difference jet of `data` at node `lin`, up to `order` derivatives.
/// Returns NaN entries when the stencil leaves the grid.
pub fn node_jet(chart: &Chart, data: &[f64], lin: usize, order: u8) -> Jet {
    let n = chart.n;
    let p = chart.fd_order / 2;
    let mut j = Jet::constant(data[lin]);
    if order == 0 {
        return j;
    }
    let m = chart.multi(lin);
    if (0..n).any(|a| m[a] < p || m[a] + p >= chart.dim) {
        return Jet::nan();
    }
    let c1 = d1(chart.fd_order);
    let inv_h = 1.0 / chart.h;
    let mut strides = [0usize; MAXN];
    for (a, s) in strides.iter_mut().enumerate().take(n) {
        *s = chart.stride(a);
    }
    let at = |off: isize| data[(lin as isize + off) as usize];
    let pi = p as isize;
    // Paired differences so that constants cancel exactly.
    for a in 0..n {
        let s = strides[a] as isize;
        let mut acc = 0.0;
        for k in 1..=pi {
            acc += c1[(pi + k) as usize] * (at(k * s) - at(-k * s));
        }
        j.d[a] = acc * inv_h;
    }
    if order == 1 {
        for a in 0..MAXN {
            for b in 0..MAXN {
                j.dd[a][b] = f64::NAN;
            }
        }
        return j;
    }
    let c2 = d2(chart.fd_order);
    let inv_h2 = inv_h * inv_h;
    let f0 = data[lin];
    for a in 0..n {
        let sa = strides[a] as isize;
        let mut acc = 0.0;
        for k in 1..=pi {
            acc += c2[(pi + k) as usize] * ((at(k * sa) - f0) + (at(-k * sa) - f0));
        }
        j.dd[a][a] = acc * inv_h2;
        for b in (a + 1)..n {
            let sb = strides[b] as isize;
            let mut acc = 0.0;
            for k in 1..=pi {
                for l in 1..=pi {
                    let w = c1[(pi + k) as usize] * c1[(pi + l) as usize];
                    let (ks, ls) = (k * sa, l * sb);
                    acc += w * ((at(ks + ls) - at(-ks + ls)) - (at(ks - ls) - at(-ks - ls)));
                }
            }
            j.dd[a][b] = acc * inv_h2;
            j.dd[b][a] = j.dd[a][b];
        }
    }
    j
}
