//! The `div' Y` diagnostic on slices `x_n = const`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::fd::d1;
use crate::fields::{map_nodes, sup_abs, sym_index, Aabb, Field, Input, Valence, MAXN};

/// Coordinate box; nodes inside it are checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Slab {
    fn aabb(&self, pad: f64) -> Aabb {
        let mut b = Aabb { lo: [0.0; MAXN], hi: [0.0; MAXN] };
        for a in 0..self.lo.len() {
            b.lo[a] = self.lo[a] - pad;
            b.hi[a] = self.hi[a] + pad;
        }
        b
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    /// Relative sup of `div' Y + 2 E rho^4 |x|^{-n-2}`.
    pub defect: f64,
    /// Relative sup of `div' Y - 2 n (n-2) E rho^4 |x|^{-n-2}`, the value the `Y` algebra yields.
    pub derived_defect: f64,
    pub scale: f64,
    pub nodes: usize,
}

/// `Y_B = x_A x_C w_AC,B - rho^2 w_AA,B / (n-1) - 2 x_A w_AB + 2 x_B w_AA / (n-1)`
/// with capital indices over the first `n - 1` axes.
fn y_components(n: usize, x: &[f64], w: &[crate::fields::Jet]) -> [f64; MAXN] {
    let m = n - 1;
    let k = (m as f64).recip();
    let om = |a: usize, c: usize| w[sym_index(a, c, n)];
    let rho2: f64 = x[..m].iter().map(|v| v * v).sum();
    let tr: f64 = (0..m).map(|a| om(a, a).v).sum();
    let mut y = [0.0; MAXN];
    for (b, yb) in y.iter_mut().enumerate().take(m) {
        let mut s = 0.0;
        for a in 0..m {
            for c in 0..m {
                s += x[a] * x[c] * om(a, c).d[b];
            }
            s -= k * rho2 * om(a, a).d[b];
            s -= 2.0 * x[a] * om(a, b).v;
        }
        *yb = s + 2.0 * k * x[b] * tr;
    }
    y
}

/// `div' Y` by central differences at the chart nodes inside `slab`, as `(x, value)` pairs.
pub fn rigidity_div_y(omega: &Field, slab: &Slab) -> Result<Vec<([f64; MAXN], f64)>> {
    if omega.valence != Valence::COV2 || !omega.symmetric {
        return Err(Error::IncompatibleValence("omega must be a symmetric (0,2) field".into()));
    }
    let chart = &omega.chart;
    let n = chart.n;
    if slab.lo.len() != n || slab.hi.len() != n {
        return Err(Error::InvalidParameters(format!("slab needs {n} bounds per side")));
    }
    let p = chart.fd_order / 2;
    let pad = p as f64 * chart.h;
    let outer = chart.box_region(&slab.aabb(pad + 1e-9));
    let inner = chart.box_region(&slab.aabb(1e-9));
    if inner.is_empty() {
        return Err(Error::InvalidParameters("slab contains no grid nodes".into()));
    }
    let ys = map_nodes(chart, &[Input::new(omega, 1)], &outer, n - 1, |x, j, out| {
        out.copy_from_slice(&y_components(n, x, &j[0])[..n - 1]);
        Ok(())
    })?;
    let mut grid = vec![vec![f64::NAN; chart.total()]; n - 1];
    for (&lin, y) in outer.nodes.iter().zip(&ys) {
        for b in 0..n - 1 {
            grid[b][lin] = y[b];
        }
    }
    let w = d1(chart.fd_order);
    let mut out = Vec::with_capacity(inner.len());
    for &lin in &inner.nodes {
        let mut div = 0.0;
        for (b, comp) in grid.iter().enumerate() {
            let s = chart.stride(b) as isize;
            for (k, wk) in w.iter().enumerate() {
                if *wk != 0.0 {
                    div += wk * comp[(lin as isize + (k as isize - p as isize) * s) as usize];
                }
            }
        }
        let div = div / chart.h;
        if !div.is_finite() {
            return Err(Error::StencilOutOfDomain { at: chart.node_x(lin)[..n].to_vec() });
        }
        out.push((chart.node_x(lin), div));
    }
    Ok(out)
}

/// Compares `div' Y` built from `omega` with `-2 E rho^4 |x|^{-n-2}` on `slab`.
pub fn rigidity_divy_check(omega: &Field, e: f64, slab: &Slab) -> Result<RigidityReport> {
    let n = omega.n();
    let nf = n as f64;
    let vals = rigidity_div_y(omega, slab)?;
    let profile = |x: &[f64; MAXN]| {
        let rho2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
        let r2 = rho2 + x[n - 1] * x[n - 1];
        rho2 * rho2 * r2.powf(-(nf + 2.0) / 2.0)
    };
    let stated: Vec<f64> = vals.iter().map(|(x, d)| d + 2.0 * e * profile(x)).collect();
    let derived: Vec<f64> = vals.iter().map(|(x, d)| d - 2.0 * nf * (nf - 2.0) * e * profile(x)).collect();
    let scale = sup_abs(vals.iter().map(|v| v.1))
        .max(sup_abs(vals.iter().map(|(x, _)| 2.0 * e * profile(x))))
        .max(sup_abs(vals.iter().map(|(x, _)| 2.0 * nf * (nf - 2.0) * e * profile(x))));
    let rel = |v: &[f64]| if scale > 0.0 { sup_abs(v.iter().copied()) / scale } else { 0.0 };
    Ok(RigidityReport { defect: rel(&stated), derived_defect: rel(&derived), scale, nodes: vals.len() })
}
