//! Sphere and spherical-shell quadrature rules.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eval::{map_points, Input};
use super::field::{Field, Samples};
use super::jet::{Jet, MAXN};
use crate::error::{Error, Result};

/// Default polar node count.
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Sample count for Monte Carlo sphere rules.
pub const MC_SAMPLES: usize = 200_000;
/// Seed used when a caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Area `omega_{n-1}` of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(m.max(1)).unwrap());
    let mut nw: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    nw.sort_by(|a, b| a.0.total_cmp(&b.0));
    nw
}

/// Nodes on the unit sphere with weights summing to its area.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub nodes: Vec<[f64; MAXN]>,
    pub weights: Vec<f64>,
    pub monte_carlo: bool,
}

impl SphereRule {
    /// Gauss–Legendre in `cos(theta)` times `2 * quad_order` uniform azimuths (n = 3).
    pub fn product(quad_order: usize) -> SphereRule {
        let polar = gauss_legendre(quad_order);
        let na = 2 * quad_order;
        let dphi = 2.0 * PI / na as f64;
        let mut nodes = Vec::with_capacity(polar.len() * na);
        let mut weights = Vec::with_capacity(polar.len() * na);
        for &(c, w) in &polar {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..na {
                let phi = (k as f64 + 0.5) * dphi;
                nodes.push([s * phi.cos(), s * phi.sin(), c, 0.0]);
                weights.push(w * dphi);
            }
        }
        SphereRule { n: 3, nodes, weights, monte_carlo: false }
    }

    /// Uniform random directions from a seeded generator, equal weights.
    pub fn monte_carlo(n: usize, samples: usize, seed: u64) -> SphereRule {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = sphere_area(n) / samples as f64;
        let nodes = (0..samples)
            .map(|_| {
                let mut v = [0.0; MAXN];
                let mut s: f64 = 0.0;
                for c in v.iter_mut().take(n) {
                    *c = StandardNormal.sample(&mut rng);
                    s += *c * *c;
                }
                let s = s.sqrt();
                v.iter_mut().take(n).for_each(|c| *c /= s);
                v
            })
            .collect();
        SphereRule { n, nodes, weights: vec![w; samples], monte_carlo: true }
    }

    /// Product rule for n = 3; Monte Carlo for other n when every input is analytic.
    pub fn for_inputs(n: usize, quad_order: usize, inputs: &[&Field], seed: u64) -> Result<SphereRule> {
        if n == 3 {
            return Ok(SphereRule::product(quad_order));
        }
        if inputs.iter().all(|f| matches!(f.samples, Samples::Analytic { .. })) {
            return Ok(SphereRule::monte_carlo(n, MC_SAMPLES, seed));
        }
        Err(Error::UnsupportedDimension { n, what: "grid-backed sphere quadrature" })
    }
}

/// A sphere integral and, for Monte Carlo rules, its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SphereIntegral {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Checks `r_inner < radius < r_outer` for the chart of `field`.
pub fn check_radius(field: &Field, radius: f64) -> Result<()> {
    let c = &field.chart;
    if !(radius > c.r_inner && radius < c.r_outer) {
        return Err(Error::RadiusOutOfChart { radius, r_inner: c.r_inner, r_outer: c.r_outer });
    }
    Ok(())
}

/// `int_{|x| = radius} kernel dH^{n-1}`; the kernel receives the point, unit normal and input jets.
pub fn sphere_integral(
    inputs: &[Input],
    radius: f64,
    rule: &SphereRule,
    kernel: impl Fn(&[f64], &[f64], &[Vec<Jet>]) -> Result<f64> + Sync,
) -> Result<SphereIntegral> {
    let n = rule.n;
    let pts: Vec<Vec<f64>> = rule.nodes.iter().map(|nu| nu[..n].iter().map(|v| v * radius).collect()).collect();
    let vals = map_points(&pts, inputs, 1, |x, jets, out| {
        let nu: Vec<f64> = x.iter().map(|v| v / radius).collect();
        out[0] = kernel(x, &nu, jets)?;
        Ok(())
    })?;
    let scale = radius.powi(n as i32 - 1);
    let v: Vec<f64> = vals.iter().map(|o| o[0]).collect();
    let value = scale * v.iter().zip(&rule.weights).map(|(a, w)| a * w).sum::<f64>();
    let std_error = rule.monte_carlo.then(|| {
        let m = v.len() as f64;
        let mean = v.iter().sum::<f64>() / m;
        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (m - 1.0);
        scale * sphere_area(n) * (var / m).sqrt()
    });
    Ok(SphereIntegral { value, std_error })
}

/// Flux `int <field, nu> dH^{n-1}` of a vector or covector field through `|x| = radius`.
pub fn sphere_flux(field: &Field, radius: f64, quad_order: usize) -> Result<SphereIntegral> {
    if field.valence.rank() != 1 {
        return Err(Error::UnsupportedValence { cov: field.valence.cov, con: field.valence.con });
    }
    check_radius(field, radius)?;
    let n = field.n();
    let rule = SphereRule::for_inputs(n, quad_order, &[field], DEFAULT_SEED)?;
    sphere_integral(&[Input::new(field, 0)], radius, &rule, |_x, nu, j| Ok((0..n).map(|i| j[0][i].v * nu[i]).sum()))
}

/// Quadrature for the shell `r_lo <= |x| <= r_hi` in n = 3: Gauss–Legendre radial
/// panels with geometric breakpoints times the product sphere rule.
#[derive(Clone, Debug)]
pub struct VolumeRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl VolumeRule {
    pub fn shell(r_lo: f64, r_hi: f64, panels: usize, radial_order: usize, quad_order: usize) -> VolumeRule {
        let sphere = SphereRule::product(quad_order);
        let gl = gauss_legendre(radial_order);
        let ratio = (r_hi / r_lo).powf(1.0 / panels as f64);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut a = r_lo;
        for p in 0..panels {
            let b = if p + 1 == panels { r_hi } else { a * ratio };
            for &(t, wt) in &gl {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * t;
                let wr = 0.5 * (b - a) * wt * r * r;
                for (nu, ws) in sphere.nodes.iter().zip(&sphere.weights) {
                    points.push(vec![r * nu[0], r * nu[1], r * nu[2]]);
                    weights.push(wr * ws);
                }
            }
            a = b;
        }
        VolumeRule { points, weights }
    }

    /// Ball `|x - center| <= breaks.last()` in n = 3: radial segments `[0, b0], [b0, b1], ...`,
    /// each split into `panels` Gauss–Legendre panels, times the product sphere rule.
    pub fn ball(center: &[f64], breaks: &[f64], panels: usize, radial_order: usize, quad_order: usize) -> VolumeRule {
        let sphere = SphereRule::product(quad_order);
        let gl = gauss_legendre(radial_order);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut lo = 0.0;
        for &hi in breaks {
            let step = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * step;
                for &(t, wt) in &gl {
                    let r = a + 0.5 * step * (1.0 + t);
                    let wr = 0.5 * step * wt * r * r;
                    for (nu, ws) in sphere.nodes.iter().zip(&sphere.weights) {
                        points.push((0..3).map(|k| center[k] + r * nu[k]).collect());
                        weights.push(wr * ws);
                    }
                }
            }
            lo = hi;
        }
        VolumeRule { points, weights }
    }

    /// Tensor-product Gauss–Legendre rule on an axis-aligned box in any dimension.
    pub fn cuboid(lo: &[f64], hi: &[f64], panels: usize, order: usize) -> VolumeRule {
        let gl = gauss_legendre(order);
        let axis = |a: usize| -> Vec<(f64, f64)> {
            let step = (hi[a] - lo[a]) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let c = lo[a] + (p as f64 + 0.5) * step;
                    gl.iter().map(move |&(t, w)| (c + 0.5 * step * t, 0.5 * step * w))
                })
                .collect()
        };
        let axes: Vec<Vec<(f64, f64)>> = (0..lo.len()).map(axis).collect();
        let mut points = vec![vec![]];
        let mut weights = vec![1.0];
        for ax in &axes {
            let mut np = Vec::with_capacity(points.len() * ax.len());
            let mut nw = Vec::with_capacity(points.len() * ax.len());
            for (p, w) in points.iter().zip(&weights) {
                for &(x, wx) in ax {
                    let mut q = p.clone();
                    q.push(x);
                    np.push(q);
                    nw.push(w * wx);
                }
            }
            points = np;
            weights = nw;
        }
        VolumeRule { points, weights }
    }

    /// Integrates `ncomp` densities in one pass.
    pub fn integrate_many(&self, inputs: &[Input], ncomp: usize, kernel: impl super::eval::Kernel) -> Result<Vec<f64>> {
        let vals = map_points(&self.points, inputs, ncomp, kernel)?;
        Ok((0..ncomp)
            .map(|c| {
                let v: Vec<f64> = vals.iter().map(|o| o[c]).collect();
                super::eval::ordered_dot(&self.weights, &v)
            })
            .collect())
    }

    pub fn integrate(
        &self,
        inputs: &[Input],
        kernel: impl Fn(&[f64], &[Vec<Jet>]) -> Result<f64> + Sync,
    ) -> Result<f64> {
        let vals = map_points(&self.points, inputs, 1, |x, j, out| {
            out[0] = kernel(x, j)?;
            Ok(())
        })?;
        let v: Vec<f64> = vals.iter().map(|o| o[0]).collect();
        Ok(super::eval::ordered_dot(&self.weights, &v))
    }
}
