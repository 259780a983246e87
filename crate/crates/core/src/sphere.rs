//! Quadrature on the unit sphere for the normalized surface measure `dΩ / 4π`.
//!
//! The rule is a product of Gauss–Legendre nodes in `cos θ` and equally spaced
//! nodes in `φ`. With `n_theta` and `n_phi` points it integrates spherical
//! polynomials of degree `min(2 n_theta - 1, n_phi - 1)` exactly. When `n_phi`
//! is even the node set is invariant under `γ -> -γ`.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const DEFAULT_N_THETA: usize = 16;
pub const DEFAULT_N_PHI: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on the three-term recurrence, started from the Chebyshev
/// approximation of each root.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub n_theta: usize,
    pub n_phi: usize,
    nodes: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidResolution(format!(
                "sphere rule needs n_theta >= 1 and n_phi >= 1, got ({n_theta}, {n_phi})"
            )));
        }
        let (z, wz) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                nodes.push(Vector3::new(s * phi.cos(), s * phi.sin(), *zi));
                // dΩ/4π = d(cos θ) dφ / 4π
                weights.push(wi / (2.0 * n_phi as f64));
            }
        }
        Ok(SphereRule { n_theta, n_phi, nodes, weights })
    }

    pub fn default_resolution() -> Self {
        Self::new(DEFAULT_N_THETA, DEFAULT_N_PHI).expect("default resolution is valid")
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest spherical-polynomial degree integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    pub fn integrate(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(g, w)| w * f(g)).sum()
    }

    pub fn try_integrate<E>(
        &self,
        f: impl Fn(&Vector3<f64>) -> std::result::Result<f64, E>,
    ) -> std::result::Result<f64, E> {
        let mut acc = 0.0;
        for (g, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(g)?;
        }
        Ok(acc)
    }
}

pub fn build_sphere_rule(n_theta: usize, n_phi: usize) -> Result<SphereRule> {
    SphereRule::new(n_theta, n_phi)
}

pub fn integrate_sphere(rule: &SphereRule, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
    rule.integrate(f)
}

/// Tensor-product rule for `dΩ dΩ' / (4π)^2`.
pub fn integrate_double_sphere(a: &SphereRule, b: &SphereRule, f: impl Fn(&Vector3<f64>, &Vector3<f64>) -> f64) -> f64 {
    let mut acc = 0.0;
    for (g, w) in a.nodes.iter().zip(&a.weights) {
        let inner: f64 = b.nodes.iter().zip(&b.weights).map(|(h, v)| v * f(g, h)).sum();
        acc += w * inner;
    }
    acc
}

pub fn try_integrate_double_sphere<E>(
    a: &SphereRule,
    b: &SphereRule,
    f: impl Fn(&Vector3<f64>, &Vector3<f64>) -> std::result::Result<f64, E>,
) -> std::result::Result<f64, E> {
    let mut acc = 0.0;
    for (g, w) in a.nodes.iter().zip(&a.weights) {
        let mut inner = 0.0;
        for (h, v) in b.nodes.iter().zip(&b.weights) {
            inner += v * f(g, h)?;
        }
        acc += w * inner;
    }
    Ok(acc)
}
