//! Pathwise sampling of the wave solution process.
//!
//! Initial data are drawn jointly at every shifted sphere node `x_i - c|t_i|γ_j`
//! (values of `V0`; values and gradients of `U0`) and pushed through the
//! Kirchhoff quadrature. The covariance of the result is exactly the
//! quadrature `kw` at the model's sphere resolution.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::Point3;
use crate::linalg::PivotedCholesky;
use crate::wave::{SpacetimePoint, WaveModel};

/// Shifted nodes closer than this are merged.
const MERGE_DISTANCE: f64 = 1e-12;

/// Default cap on `dimension * rank` entries kept by the factorization.
pub const DEFAULT_MAX_ENTRIES: usize = 80_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFieldSample {
    pub points: Vec<SpacetimePoint>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Factorized joint law of the initial data needed at a fixed set of space-time
/// points; each draw costs one Gaussian vector and a dense product.
#[derive(Debug, Clone)]
pub struct WaveFieldSampler {
    points: Vec<SpacetimePoint>,
    /// `W = B_v xi_v + B_u xi_u`, stored row-major per point.
    b_v: Vec<Vec<f64>>,
    b_u: Vec<Vec<f64>>,
    rank_v: usize,
    rank_u: usize,
    n_nodes: usize,
    discarded_variance: f64,
}

struct Stencil {
    node: usize,
    /// Multiplies `V0(node)`.
    v: f64,
    /// Multiplies `U0(node)`.
    u: f64,
    /// Multiplies `∇U0(node)`.
    grad: Point3,
}

impl WaveFieldSampler {
    pub fn new(model: &WaveModel, points: &[SpacetimePoint]) -> Result<Self> {
        Self::with_max_entries(model, points, DEFAULT_MAX_ENTRIES)
    }

    pub fn with_max_entries(model: &WaveModel, points: &[SpacetimePoint], max_entries: usize) -> Result<Self> {
        let spec = model.spec();
        let mut nodes: Vec<Point3> = Vec::new();
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        let mut stencils: Vec<Vec<Stencil>> = Vec::with_capacity(points.len());
        for z in points {
            let shell = model.shell(z);
            let mut st = Vec::with_capacity(shell.points.len());
            for ((y, g), w) in shell.points.iter().zip(&shell.dirs).zip(&shell.weights) {
                let key = [
                    (y[0] / MERGE_DISTANCE).round() as i64,
                    (y[1] / MERGE_DISTANCE).round() as i64,
                    (y[2] / MERGE_DISTANCE).round() as i64,
                ];
                let node = *index.entry(key).or_insert_with(|| {
                    nodes.push(*y);
                    nodes.len() - 1
                });
                st.push(Stencil { node, v: z.t * w, u: *w, grad: -shell.radius * w * g });
            }
            stencils.push(st);
        }
        let n = nodes.len();

        let (b_v, rank_v, res_v) = if spec.kv.is_zero() {
            (vec![Vec::new(); points.len()], 0, 0.0)
        } else {
            let kv = spec.kv;
            let diag: Vec<f64> = nodes.iter().map(|y| kv.eval(y, y)).collect();
            let chol = PivotedCholesky::factor(diag, (max_entries / n.max(1)).max(1), |p, out| {
                let yp = nodes[p];
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = kv.eval(&nodes[i], &yp));
            })?;
            let b: Vec<Vec<f64>> = stencils
                .par_iter()
                .map(|st| chol.columns.iter().map(|col| st.iter().map(|s| s.v * col[s.node]).sum()).collect())
                .collect();
            (b, chol.rank(), chol.residual_max)
        };

        let (b_u, rank_u, res_u) = if spec.ku.is_zero() {
            (vec![Vec::new(); points.len()], 0, 0.0)
        } else {
            let ku = spec.ku;
            // index 4a + 0 is U0(y_a); 4a + 1..=3 are the gradient components
            let diag: Vec<f64> = nodes
                .iter()
                .flat_map(|_| {
                    let rt = ku.radial_terms(&Point3::zeros());
                    [rt.value, rt.psi, rt.psi, rt.psi]
                })
                .collect();
            let dim = 4 * n;
            let chol = PivotedCholesky::factor(diag, (max_entries / dim.max(1)).max(1), |p, out| {
                let (a, ci) = (p / 4, p % 4);
                let ya = nodes[a];
                out.par_chunks_mut(4).enumerate().for_each(|(b, o)| {
                    let d = ya - nodes[b];
                    let rt = ku.radial_terms(&d);
                    if ci == 0 {
                        o[0] = rt.value;
                        for j in 0..3 {
                            o[1 + j] = rt.psi * d[j];
                        }
                    } else {
                        let i = ci - 1;
                        o[0] = -rt.psi * d[i];
                        for j in 0..3 {
                            let delta = if i == j { rt.psi } else { 0.0 };
                            o[1 + j] = delta - rt.chi * d[i] * d[j];
                        }
                    }
                });
            })?;
            let b: Vec<Vec<f64>> = stencils
                .par_iter()
                .map(|st| {
                    chol.columns
                        .iter()
                        .map(|col| {
                            st.iter()
                                .map(|s| {
                                    let k = 4 * s.node;
                                    s.u * col[k]
                                        + s.grad[0] * col[k + 1]
                                        + s.grad[1] * col[k + 2]
                                        + s.grad[2] * col[k + 3]
                                })
                                .sum()
                        })
                        .collect()
                })
                .collect();
            (b, chol.rank(), chol.residual_max)
        };

        Ok(WaveFieldSampler {
            points: points.to_vec(),
            b_v,
            b_u,
            rank_v,
            rank_u,
            n_nodes: n,
            discarded_variance: res_v.max(res_u),
        })
    }

    pub fn points(&self) -> &[SpacetimePoint] {
        &self.points
    }

    /// Number of distinct shifted nodes after merging.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn ranks(&self) -> (usize, usize) {
        (self.rank_v, self.rank_u)
    }

    /// Largest residual variance of an initial-data component left out of the
    /// factorization.
    pub fn discarded_variance(&self) -> f64 {
        self.discarded_variance
    }

    /// Field values at the sampler's points for one seed.
    pub fn draw_values(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let xi_v: Vec<f64> = (0..self.rank_v).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xi_u: Vec<f64> = (0..self.rank_u).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.b_v
            .iter()
            .zip(&self.b_u)
            .map(|(bv, bu)| {
                let v: f64 = bv.iter().zip(&xi_v).map(|(b, x)| b * x).sum();
                let u: f64 = bu.iter().zip(&xi_u).map(|(b, x)| b * x).sum();
                v + u
            })
            .collect()
    }

    pub fn draw(&self, seed: u64) -> WaveFieldSample {
        WaveFieldSample { points: self.points.clone(), values: self.draw_values(seed), seed }
    }
}

/// One sample path of the wave process at `points`.
pub fn sample_wave_field(model: &WaveModel, points: &[SpacetimePoint], seed: u64) -> Result<WaveFieldSample> {
    Ok(WaveFieldSampler::new(model, points)?.draw(seed))
}
