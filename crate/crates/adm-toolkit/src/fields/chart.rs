use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::jet::MAXN;
use crate::error::{Error, Result};

/// Exterior coordinate chart: a uniform tensor-product grid on
/// `[-r_outer, r_outer]^n` padded by ghost layers, of which the annulus
/// `r_inner <= |x| <= r_outer` is the computational domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub n: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    pub nodes: usize,
    pub fd_order: usize,
    pub h: f64,
    pub ghost: usize,
    /// Nodes per axis including ghost layers.
    pub dim: usize,
}

/// A set of grid nodes, stored as sorted linear indices.
#[derive(Clone, Debug, Default)]
pub struct Region {
    pub nodes: Vec<usize>,
}

/// Axis-aligned box in coordinate space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: [f64; MAXN],
    pub hi: [f64; MAXN],
}

impl Aabb {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let mut lo = [0.0; MAXN];
        let mut hi = [0.0; MAXN];
        for (a, c) in center.iter().enumerate() {
            lo[a] = c - radius;
            hi[a] = c + radius;
        }
        Aabb { lo, hi }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..MAXN {
            out.lo[a] = out.lo[a].min(o.lo[a]);
            out.hi[a] = out.hi[a].max(o.hi[a]);
        }
        out
    }

    pub fn inflate(&self, d: f64) -> Aabb {
        let mut out = *self;
        for a in 0..MAXN {
            out.lo[a] -= d;
            out.hi[a] += d;
        }
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(a, &v)| v >= self.lo[a] && v <= self.hi[a])
    }

    /// Smallest and largest Euclidean radius reached by the box (first `n` axes).
    pub fn radial_extent(&self, n: usize) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for a in 0..n {
            let (l, h) = (self.lo[a], self.hi[a]);
            let nd = if l > 0.0 {
                l
            } else if h < 0.0 {
                -h
            } else {
                0.0
            };
            near += nd * nd;
            let fd = l.abs().max(h.abs());
            far += fd * fd;
        }
        (f64::sqrt(near), f64::sqrt(far))
    }
}

impl Chart {
    /// Builds a chart; `nodes` counts grid points across `[-r_outer, r_outer]`.
    pub fn new(n: usize, r_inner: f64, r_outer: f64, nodes: usize, fd_order: usize) -> Result<Arc<Chart>> {
        if !(3..=MAXN).contains(&n) {
            return Err(Error::InvalidDimension(n));
        }
        if !(r_inner >= 1.0 && r_inner < r_outer && r_outer.is_finite()) {
            return Err(Error::InvalidRadii { r_inner, r_outer });
        }
        if fd_order != 2 && fd_order != 4 {
            return Err(Error::InvalidParameters(format!("fd_order {fd_order} not in {{2, 4}}")));
        }
        if nodes < 2 * fd_order + 1 {
            return Err(Error::InsufficientResolution { nodes, needed: 2 * fd_order + 1 });
        }
        let h = 2.0 * r_outer / (nodes - 1) as f64;
        let ghost = fd_order + fd_order / 2 + 1;
        Ok(Arc::new(Chart { n, r_inner, r_outer, nodes, fd_order, h, ghost, dim: nodes + 2 * ghost }))
    }

    pub fn total(&self) -> usize {
        self.dim.pow(self.n as u32)
    }

    /// Linear-index stride of `axis` (axis 0 varies slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.dim.pow((self.n - 1 - axis) as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.r_outer + (i as f64 - self.ghost as f64) * self.h
    }

    pub fn multi(&self, mut lin: usize) -> [usize; MAXN] {
        let mut m = [0; MAXN];
        for a in (0..self.n).rev() {
            m[a] = lin % self.dim;
            lin /= self.dim;
        }
        m
    }

    pub fn linear(&self, m: &[usize]) -> usize {
        m.iter().take(self.n).fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn node_x(&self, lin: usize) -> [f64; MAXN] {
        let m = self.multi(lin);
        let mut x = [0.0; MAXN];
        for a in 0..self.n {
            x[a] = self.coord(m[a]);
        }
        x
    }

    pub fn radius_of(&self, x: &[f64]) -> f64 {
        x.iter().take(self.n).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn in_annulus(&self, x: &[f64]) -> bool {
        let r = self.radius_of(x);
        r >= self.r_inner - 1e-12 && r <= self.r_outer + 1e-12
    }

    /// Nodes with `r_lo <= |x| <= r_hi`.
    pub fn shell_region(&self, r_lo: f64, r_hi: f64) -> Region {
        let nodes = (0..self.total())
            .filter(|&i| {
                let r = self.radius_of(&self.node_x(i)[..self.n]);
                r >= r_lo - 1e-12 && r <= r_hi + 1e-12
            })
            .collect();
        Region { nodes }
    }

    /// The computational annulus.
    pub fn annulus(&self) -> Region {
        self.shell_region(self.r_inner, self.r_outer)
    }

    /// Nodes inside a coordinate box, clipped to the grid.
    pub fn box_region(&self, b: &Aabb) -> Region {
        let mut lo = [0usize; MAXN];
        let mut hi = [0usize; MAXN];
        for a in 0..self.n {
            let l = ((b.lo[a] + self.r_outer) / self.h + self.ghost as f64).ceil().max(0.0) as usize;
            let u = ((b.hi[a] + self.r_outer) / self.h + self.ghost as f64).floor();
            if u < 0.0 {
                return Region::default();
            }
            lo[a] = l;
            hi[a] = (u as usize).min(self.dim - 1);
            if lo[a] > hi[a] {
                return Region::default();
            }
        }
        let mut nodes = Vec::new();
        let mut m = lo;
        loop {
            nodes.push(self.linear(&m[..self.n]));
            let mut a = self.n;
            loop {
                if a == 0 {
                    nodes.sort_unstable();
                    return Region { nodes };
                }
                a -= 1;
                if m[a] < hi[a] {
                    m[a] += 1;
                    break;
                }
                m[a] = lo[a];
            }
        }
    }

    /// Width of a first- or second-derivative stencil in coordinate units.
    pub fn stencil_width(&self) -> f64 {
        (self.fd_order / 2) as f64 * self.h
    }
}

impl Region {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn filter(&self, chart: &Chart, keep: impl Fn(&[f64]) -> bool) -> Region {
        Region { nodes: self.nodes.iter().copied().filter(|&i| keep(&chart.node_x(i)[..chart.n])).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_matches_node_count() {
        let c = Chart::new(3, 1.0, 16.0, 65, 4).unwrap();
        assert_eq!(c.h, 0.5);
        assert_eq!(c.coord(c.ghost), -16.0);
        assert_eq!(c.coord(c.ghost + 64), 16.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Chart::new(3, 1.0, 1.0, 65, 4), Err(Error::InvalidRadii { .. })));
        assert!(matches!(Chart::new(2, 1.0, 4.0, 65, 4), Err(Error::InvalidDimension(2))));
        assert!(matches!(Chart::new(3, 1.0, 4.0, 8, 4), Err(Error::InsufficientResolution { .. })));
        assert!(Chart::new(4, 1.0, 8.0, 33, 2).is_ok());
    }

    #[test]
    fn multi_linear_roundtrip() {
        let c = Chart::new(3, 1.0, 4.0, 9, 2).unwrap();
        for lin in [0, 17, c.total() - 1] {
            assert_eq!(c.linear(&c.multi(lin)[..3]), lin);
        }
    }

    #[test]
    fn box_region_counts() {
        let c = Chart::new(3, 1.0, 4.0, 9, 2).unwrap();
        let b = Aabb::ball(&[0.0, 0.0, 0.0], 1.0);
        assert_eq!(c.box_region(&b).len(), 27);
    }
}
