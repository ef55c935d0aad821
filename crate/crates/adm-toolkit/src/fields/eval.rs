//! Pointwise kernel evaluation over node regions and point sets, with
//! reductions whose association order is independent of the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use super::chart::{Chart, Region};
use super::field::{stored_count, Field, Valence};
use super::jet::Jet;
use crate::error::Result;

const CHUNK: usize = 1024;

/// Kernel signature: coordinates, input jets (one slice per input field), output buffer.
pub trait Kernel: Fn(&[f64], &[Vec<Jet>], &mut [f64]) -> Result<()> + Sync {}
impl<T: Fn(&[f64], &[Vec<Jet>], &mut [f64]) -> Result<()> + Sync> Kernel for T {}

/// Field input with the derivative order the kernel needs.
#[derive(Clone, Copy)]
pub struct Input<'a> {
    pub field: &'a Field,
    pub order: u8,
}

impl<'a> Input<'a> {
    pub fn new(field: &'a Field, order: u8) -> Self {
        Input { field, order }
    }
}

fn buffers(inputs: &[Input]) -> Vec<Vec<Jet>> {
    inputs.iter().map(|i| vec![Jet::default(); i.field.ncomp()]).collect()
}

/// Evaluates `kernel` at every node of `region`, returning per-node outputs in region order.
pub fn map_nodes(
    chart: &Chart,
    inputs: &[Input],
    region: &Region,
    ncomp: usize,
    kernel: impl Kernel,
) -> Result<Vec<Vec<f64>>> {
    let n = chart.n;
    region
        .nodes
        .par_iter()
        .with_min_len(64)
        .map_init(
            || buffers(inputs),
            |buf, &lin| {
                let x = chart.node_x(lin);
                for (inp, b) in inputs.iter().zip(buf.iter_mut()) {
                    inp.field.jets_at_node(lin, inp.order, b);
                }
                let mut out = vec![0.0; ncomp];
                kernel(&x[..n], buf, &mut out)?;
                Ok(out)
            },
        )
        .collect()
}

/// Evaluates `kernel` at arbitrary points.
pub fn map_points(points: &[Vec<f64>], inputs: &[Input], ncomp: usize, kernel: impl Kernel) -> Result<Vec<Vec<f64>>> {
    points
        .par_iter()
        .with_min_len(16)
        .map_init(
            || buffers(inputs),
            |buf, x| {
                for (inp, b) in inputs.iter().zip(buf.iter_mut()) {
                    inp.field.jets_at(x, inp.order, b);
                }
                let mut out = vec![0.0; ncomp];
                kernel(x, buf, &mut out)?;
                Ok(out)
            },
        )
        .collect()
}

/// Evaluates `kernel` on `region` and packs the result as a grid field;
/// nodes outside the region hold NaN.
pub fn map_field(
    chart: &Arc<Chart>,
    inputs: &[Input],
    region: &Region,
    valence: Valence,
    symmetric: bool,
    kernel: impl Kernel,
) -> Result<Field> {
    let symmetric = symmetric && valence.rank() == 2;
    let nc = stored_count(chart.n, valence, symmetric);
    let vals = map_nodes(chart, inputs, region, nc, kernel)?;
    let mut data = vec![vec![f64::NAN; chart.total()]; nc];
    for (&lin, v) in region.nodes.iter().zip(vals.iter()) {
        for c in 0..nc {
            data[c][lin] = v[c];
        }
    }
    Field::grid(chart, valence, symmetric, data)
}

/// Coordinate-measure node sum `h^n * sum kernel` over `region`.
pub fn node_integral(
    chart: &Chart,
    inputs: &[Input],
    region: &Region,
    kernel: impl Fn(&[f64], &[Vec<Jet>]) -> Result<f64> + Sync,
) -> Result<f64> {
    let vals = map_nodes(chart, inputs, region, 1, |x, j, out| {
        out[0] = kernel(x, j)?;
        Ok(())
    })?;
    let v: Vec<f64> = vals.iter().map(|o| o[0]).collect();
    Ok(ordered_sum(&v) * chart.h.powi(chart.n as i32))
}

/// Sum in fixed-size chunks combined left to right.
pub fn ordered_sum(v: &[f64]) -> f64 {
    let partial: Vec<f64> = v.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// Weighted sum `sum w_i v_i` with the same fixed association as [`ordered_sum`].
pub fn ordered_dot(w: &[f64], v: &[f64]) -> f64 {
    let partial: Vec<f64> = w
        .par_chunks(CHUNK)
        .zip(v.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Largest finite absolute value; NaN entries are skipped.
pub fn sup_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_sum_is_thread_count_independent() {
        let v: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e-9 * i as f64).collect();
        let a = ordered_sum(&v);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| ordered_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
