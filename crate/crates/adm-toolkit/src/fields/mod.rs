//! Exterior charts, tensor fields, finite differences, quadrature and weighted norms.

pub mod chart;
pub mod eval;
pub mod fd;
pub mod field;
pub mod interp;
pub mod jet;
pub mod norm;
pub mod quadrature;

pub use chart::{Aabb, Chart, Region};
pub use eval::{map_field, map_nodes, map_points, node_integral, ordered_sum, sup_abs, Input};
pub use field::{stored_count, sym_index, Field, Samples, Valence};
pub use jet::{radius, Jet, MAXN};
pub use norm::{weighted_norm, weighted_norm_on, DecayWeight, NormMode, TypeParams};
pub use quadrature::{sphere_area, sphere_flux, sphere_integral, SphereIntegral, SphereRule, VolumeRule};

use std::sync::Arc;

use crate::error::Result;

/// Builds a chart; see [`Chart::new`].
pub fn make_chart(n: usize, r_inner: f64, r_outer: f64, nodes_per_axis: usize, fd_order: usize) -> Result<Arc<Chart>> {
    Chart::new(n, r_inner, r_outer, nodes_per_axis, fd_order)
}

/// Partial derivative of a field along a multi-index of at most two axes.
pub fn derivative(field: &Field, axes: &[usize]) -> Result<Field> {
    field.derivative(axes)
}
