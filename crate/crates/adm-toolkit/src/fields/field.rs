use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{Aabb, Chart};
use super::fd::node_jet;
use super::interp::interpolate_jets;
use super::jet::{Jet, MAXN};
use crate::error::{Error, Result};

/// Tensor valence: number of covariant (lower) and contravariant (upper) slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valence {
    pub cov: usize,
    pub con: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence { cov: 0, con: 0 };
    pub const VECTOR: Valence = Valence { cov: 0, con: 1 };
    pub const COVECTOR: Valence = Valence { cov: 1, con: 0 };
    pub const COV2: Valence = Valence { cov: 2, con: 0 };
    pub const CON2: Valence = Valence { cov: 0, con: 2 };

    pub fn rank(&self) -> usize {
        self.cov + self.con
    }
}

/// Closure filling exact jets of every stored component at a point.
pub type AnalyticFn = dyn Fn(&[f64], &mut [Jet]) + Send + Sync;

#[derive(Clone)]
pub enum Samples {
    /// Nodal samples, one array per stored component, over the whole padded grid.
    Grid(Arc<Vec<Vec<f64>>>),
    /// Exact closure; `order` is the highest derivative order it supplies.
    Analytic { f: Arc<AnalyticFn>, order: u8 },
}

/// A tensor field on a chart with either grid or analytic backing.
///
/// Components are indexed contravariant slots first, then covariant slots.
/// Symmetric rank-2 fields store the upper triangle only.
#[derive(Clone)]
pub struct Field {
    pub chart: Arc<Chart>,
    pub valence: Valence,
    pub symmetric: bool,
    pub samples: Samples,
    /// Coordinate box outside of which every component vanishes identically.
    pub support: Option<Aabb>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.samples {
            Samples::Grid(_) => "grid".to_string(),
            Samples::Analytic { order, .. } => format!("analytic(order {order})"),
        };
        f.debug_struct("Field")
            .field("valence", &self.valence)
            .field("symmetric", &self.symmetric)
            .field("backend", &kind)
            .field("support", &self.support)
            .finish()
    }
}

/// Number of stored components for a valence on an `n`-dimensional chart.
pub fn stored_count(n: usize, valence: Valence, symmetric: bool) -> usize {
    if symmetric && valence.rank() == 2 {
        n * (n + 1) / 2
    } else {
        n.pow(valence.rank() as u32)
    }
}

/// Storage slot of `(i, j)` in the upper-triangular layout.
#[inline]
pub fn sym_index(i: usize, j: usize, n: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl Field {
    pub fn analytic(
        chart: &Arc<Chart>,
        valence: Valence,
        symmetric: bool,
        order: u8,
        f: impl Fn(&[f64], &mut [Jet]) + Send + Sync + 'static,
    ) -> Field {
        Field {
            chart: chart.clone(),
            valence,
            symmetric: symmetric && valence.rank() == 2,
            samples: Samples::Analytic { f: Arc::new(f), order },
            support: None,
        }
    }

    /// Analytic field written as jet arithmetic on the coordinate functions.
    /// The closure returns the stored components.
    pub fn from_jets(
        chart: &Arc<Chart>,
        valence: Valence,
        symmetric: bool,
        f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Field {
        Field::analytic(chart, valence, symmetric, 2, move |x, out| {
            let xj = Jet::coords(x);
            let v = f(&xj);
            out.copy_from_slice(&v[..out.len()]);
        })
    }

    pub fn scalar(chart: &Arc<Chart>, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Field {
        Field::from_jets(chart, Valence::SCALAR, false, move |x| vec![f(x)])
    }

    pub fn vector(chart: &Arc<Chart>, f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> Field {
        Field::from_jets(chart, Valence::VECTOR, false, f)
    }

    /// Symmetric rank-2 field from a closure returning the full `n x n` matrix.
    pub fn sym2(
        chart: &Arc<Chart>,
        valence: Valence,
        f: impl Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    ) -> Field {
        let n = chart.n;
        Field::from_jets(chart, valence, true, move |x| {
            let m = f(x);
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in i..n {
                    out.push(m[i][j]);
                }
            }
            out
        })
    }

    /// Constant-component field.
    pub fn constant(chart: &Arc<Chart>, valence: Valence, symmetric: bool, stored: Vec<f64>) -> Field {
        let mut f = Field::analytic(chart, valence, symmetric, 2, move |_x, out| {
            for (o, v) in out.iter_mut().zip(stored.iter()) {
                *o = Jet::constant(*v);
            }
        });
        f.symmetric = symmetric && valence.rank() == 2;
        f
    }

    pub fn zeros(chart: &Arc<Chart>, valence: Valence, symmetric: bool) -> Field {
        let c = stored_count(chart.n, valence, symmetric && valence.rank() == 2);
        let mut f = Field::constant(chart, valence, symmetric, vec![0.0; c]);
        f.support = Some(Aabb { lo: [0.0; MAXN], hi: [-1.0; MAXN] });
        f
    }

    /// Euclidean metric `delta_ij` as a symmetric (0,2) field.
    pub fn euclidean(chart: &Arc<Chart>) -> Field {
        let n = chart.n;
        let mut s = Vec::new();
        for i in 0..n {
            for j in i..n {
                s.push(if i == j { 1.0 } else { 0.0 });
            }
        }
        Field::constant(chart, Valence::COV2, true, s)
    }

    pub fn grid(chart: &Arc<Chart>, valence: Valence, symmetric: bool, data: Vec<Vec<f64>>) -> Result<Field> {
        let symmetric = symmetric && valence.rank() == 2;
        let want = stored_count(chart.n, valence, symmetric);
        if data.len() != want || data.iter().any(|d| d.len() != chart.total()) {
            return Err(Error::ManifestMismatch(format!("expected {want} components of {} samples", chart.total())));
        }
        Ok(Field { chart: chart.clone(), valence, symmetric, samples: Samples::Grid(Arc::new(data)), support: None })
    }

    pub fn with_support(mut self, support: Aabb) -> Field {
        self.support = Some(support);
        self
    }

    pub fn n(&self) -> usize {
        self.chart.n
    }

    pub fn ncomp(&self) -> usize {
        stored_count(self.chart.n, self.valence, self.symmetric)
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.samples, Samples::Grid(_))
    }

    /// Highest derivative order available without further differencing.
    pub fn order(&self) -> u8 {
        match &self.samples {
            Samples::Grid(_) => 2,
            Samples::Analytic { order, .. } => *order,
        }
    }

    /// Storage slot of a full multi-index.
    pub fn slot(&self, idx: &[usize]) -> usize {
        let n = self.chart.n;
        if self.symmetric {
            sym_index(idx[0], idx[1], n)
        } else {
            idx.iter().fold(0, |acc, &i| acc * n + i)
        }
    }

    pub fn grid_data(&self) -> Option<&Arc<Vec<Vec<f64>>>> {
        match &self.samples {
            Samples::Grid(d) => Some(d),
            _ => None,
        }
    }

    fn support_excludes(&self, x: &[f64]) -> bool {
        matches!(&self.support, Some(b) if !b.contains(x))
    }

    /// Jets of every stored component at grid node `lin`.
    pub fn jets_at_node(&self, lin: usize, order: u8, out: &mut [Jet]) {
        match &self.samples {
            Samples::Grid(d) => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = node_jet(&self.chart, &d[c], lin, order);
                }
            }
            Samples::Analytic { f, .. } => {
                let x = self.chart.node_x(lin);
                if self.support_excludes(&x[..self.chart.n]) {
                    out.iter_mut().for_each(|o| *o = Jet::constant(0.0));
                } else {
                    f(&x[..self.chart.n], out);
                }
            }
        }
    }

    /// Jets of every stored component at an arbitrary point.
    pub fn jets_at(&self, x: &[f64], order: u8, out: &mut [Jet]) {
        match &self.samples {
            Samples::Grid(d) => interpolate_jets(&self.chart, d, x, order, out),
            Samples::Analytic { f, .. } => {
                if self.support_excludes(x) {
                    out.iter_mut().for_each(|o| *o = Jet::constant(0.0));
                } else {
                    f(x, out);
                }
            }
        }
    }

    /// Stored component values at a point.
    pub fn values_at(&self, x: &[f64]) -> Vec<f64> {
        let mut j = vec![Jet::default(); self.ncomp()];
        self.jets_at(x, 0, &mut j);
        j.iter().map(|j| j.v).collect()
    }

    /// Samples the field at every grid node (values only).
    pub fn sample(&self) -> Field {
        match &self.samples {
            Samples::Grid(_) => self.clone(),
            Samples::Analytic { f, .. } => {
                let chart = &self.chart;
                let nc = self.ncomp();
                let n = chart.n;
                let support = self.support;
                let vals: Vec<Vec<f64>> = (0..chart.total())
                    .into_par_iter()
                    .with_min_len(4096)
                    .map(|lin| {
                        let x = chart.node_x(lin);
                        let mut j = vec![Jet::default(); nc];
                        if matches!(&support, Some(b) if !b.contains(&x[..n])) {
                            return vec![0.0; nc];
                        }
                        f(&x[..n], &mut j);
                        j.iter().map(|j| j.v).collect()
                    })
                    .collect();
                let mut data = vec![vec![0.0; chart.total()]; nc];
                for (lin, v) in vals.into_iter().enumerate() {
                    for c in 0..nc {
                        data[c][lin] = v[c];
                    }
                }
                Field {
                    chart: chart.clone(),
                    valence: self.valence,
                    symmetric: self.symmetric,
                    samples: Samples::Grid(Arc::new(data)),
                    support: self.support,
                }
            }
        }
    }

    /// `a * self + b * other`; analytic when both inputs are analytic.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.valence != other.valence || self.symmetric != other.symmetric || *self.chart != *other.chart {
            return Err(Error::IncompatibleValence("combine requires matching fields".into()));
        }
        let support = match (&self.support, &other.support) {
            (Some(s), Some(o)) => Some(s.union(o)),
            _ => None,
        };
        match (&self.samples, &other.samples) {
            (Samples::Analytic { f: f1, order: o1 }, Samples::Analytic { f: f2, order: o2 }) => {
                let (f1, f2) = (f1.clone(), f2.clone());
                let (s1, s2) = (self.support, other.support);
                let nc = self.ncomp();
                let mut out =
                    Field::analytic(&self.chart, self.valence, self.symmetric, (*o1).min(*o2), move |x, out| {
                        let mut t = vec![Jet::default(); nc];
                        if matches!(&s1, Some(bx) if !bx.contains(x)) {
                            out.iter_mut().for_each(|o| *o = Jet::constant(0.0));
                        } else {
                            f1(x, out);
                            out.iter_mut().for_each(|o| *o = o.scale(a));
                        }
                        if !matches!(&s2, Some(bx) if !bx.contains(x)) {
                            f2(x, &mut t);
                            for (o, v) in out.iter_mut().zip(t.iter()) {
                                *o += v.scale(b);
                            }
                        }
                    });
                out.support = support;
                Ok(out)
            }
            _ => {
                let g1 = self.sample();
                let g2 = other.sample();
                let (d1, d2) = (g1.grid_data().unwrap(), g2.grid_data().unwrap());
                let data = d1
                    .iter()
                    .zip(d2.iter())
                    .map(|(u, v)| u.iter().zip(v.iter()).map(|(p, q)| a * p + b * q).collect())
                    .collect();
                let mut f = Field::grid(&self.chart, self.valence, self.symmetric, data)?;
                f.support = support;
                Ok(f)
            }
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, c: f64) -> Field {
        let z = Field::zeros(&self.chart, self.valence, self.symmetric);
        let mut out = self.combine(c, &z, 0.0).expect("matching valence");
        out.support = self.support;
        out
    }

    /// Partial derivative along the listed axes (at most two).
    ///
    /// Grid fields are differenced at every node whose stencil fits the grid;
    /// analytic fields return exact derivatives with reduced available order.
    pub fn derivative(&self, axes: &[usize]) -> Result<Field> {
        let n = self.chart.n;
        if axes.len() > 2 {
            return Err(Error::InsufficientDerivatives(format!("{} derivatives requested, at most 2", axes.len())));
        }
        if axes.iter().any(|&a| a >= n) {
            return Err(Error::InvalidParameters(format!("axis out of range for n = {n}")));
        }
        if axes.is_empty() {
            return Ok(self.clone());
        }
        let nc = self.ncomp();
        let inflate = self.chart.stencil_width() * axes.len() as f64;
        let support = self.support.map(|s| s.inflate(inflate));
        match &self.samples {
            Samples::Analytic { f, order } => {
                if (axes.len() as u8) > *order {
                    return Err(Error::InsufficientDerivatives(format!(
                        "analytic field supplies order {order}, {} requested",
                        axes.len()
                    )));
                }
                let f = f.clone();
                let ax = axes.to_vec();
                let s = self.support;
                let mut out = Field::analytic(
                    &self.chart,
                    self.valence,
                    self.symmetric,
                    order - ax.len() as u8,
                    move |x, out| {
                        if matches!(&s, Some(bx) if !bx.contains(x)) {
                            out.iter_mut().for_each(|o| *o = Jet::constant(0.0));
                            return;
                        }
                        let mut t = vec![Jet::default(); out.len()];
                        f(x, &mut t);
                        for (o, j) in out.iter_mut().zip(t.iter()) {
                            *o = if ax.len() == 1 {
                                let a = ax[0];
                                let mut r = Jet::nan();
                                r.v = j.d[a];
                                r.d = j.dd[a];
                                r
                            } else {
                                let mut r = Jet::nan();
                                r.v = j.dd[ax[0]][ax[1]];
                                r
                            };
                        }
                    },
                );
                out.support = support;
                Ok(out)
            }
            Samples::Grid(d) => {
                let chart = self.chart.clone();
                let data: Vec<Vec<f64>> = (0..nc)
                    .map(|c| {
                        (0..chart.total())
                            .into_par_iter()
                            .with_min_len(4096)
                            .map(|lin| {
                                if axes.len() == 1 {
                                    node_jet(&chart, &d[c], lin, 1).d[axes[0]]
                                } else {
                                    node_jet(&chart, &d[c], lin, 2).dd[axes[0]][axes[1]]
                                }
                            })
                            .collect()
                    })
                    .collect();
                let mut out = Field::grid(&self.chart, self.valence, self.symmetric, data)?;
                out.support = support;
                Ok(out)
            }
        }
    }

    /// Component values at every node of a grid field (panics for analytic).
    pub fn component(&self, slot: usize) -> &[f64] {
        &self.grid_data().expect("grid field")[slot]
    }
}
