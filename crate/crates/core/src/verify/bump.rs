use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth test function supported on the ellipsoid
/// `s(z) = Σ ((z_i - center_i) / radii_i)^2 <= 1`:
/// `φ(z) = exp(1 - 1 / (1 - s))` inside, `0` outside, so `φ(center) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTestFunction {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
}

impl BumpTestFunction {
    pub fn new(center: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if center.len() != radii.len() || center.is_empty() {
            return Err(Error::DimensionMismatch { expected: center.len(), got: radii.len() });
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidSpec("bump radii must be positive".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("bump center must be finite".into()));
        }
        Ok(BumpTestFunction { center, radii })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Scaled offset `u_i = (z_i - c_i) / ρ_i` and `s = |u|^2`.
    fn scaled(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let u: Vec<f64> = z.iter().zip(&self.center).zip(&self.radii).map(|((z, c), r)| (z - c) / r).collect();
        let s = u.iter().map(|v| v * v).sum();
        (u, s)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.scaled(z).1 < 1.0
    }

    /// `(φ, dφ/ds, d²φ/ds²)` as functions of `s`; all zero outside.
    fn profile(s: f64) -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let q = 1.0 - s;
        let phi = (1.0 - 1.0 / q).exp();
        let q2 = q * q;
        (phi, -phi / q2, phi * (1.0 / (q2 * q2) - 2.0 / (q2 * q)))
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        Self::profile(self.scaled(z).1).0
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let (u, s) = self.scaled(z);
        let (_, d1, _) = Self::profile(s);
        u.iter().zip(&self.radii).map(|(u, r)| d1 * 2.0 * u / r).collect()
    }

    pub fn hessian(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let (u, s) = self.scaled(z);
        let (_, d1, d2) = Self::profile(s);
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut h = d2 * 4.0 * u[i] * u[j] / (self.radii[i] * self.radii[j]);
                        if i == j {
                            h += d1 * 2.0 / (self.radii[i] * self.radii[i]);
                        }
                        h
                    })
                    .collect()
            })
            .collect()
    }

    /// `∂^β φ(z)` for a multi-index of order at most 2.
    pub fn derivative(&self, z: &[f64], beta: &[u8]) -> Result<f64> {
        if beta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: beta.len() });
        }
        let (u, s) = self.scaled(z);
        let (phi, d1, d2) = Self::profile(s);
        let order: u8 = beta.iter().sum();
        let axes: Vec<usize> = beta.iter().enumerate().flat_map(|(i, &b)| std::iter::repeat_n(i, b as usize)).collect();
        Ok(match order {
            0 => phi,
            1 => {
                let i = axes[0];
                d1 * 2.0 * u[i] / self.radii[i]
            }
            2 => {
                let (i, j) = (axes[0], axes[1]);
                let mut h = d2 * 4.0 * u[i] * u[j] / (self.radii[i] * self.radii[j]);
                if i == j {
                    h += d1 * 2.0 / (self.radii[i] * self.radii[i]);
                }
                h
            }
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "bump derivatives are available up to order 2, requested {order}"
                )))
            }
        })
    }
}

/// `count` bumps with centers uniform in `center ± half_widths` and radii
/// uniform in `[0.3, 1.0] * half_widths` per axis.
pub fn bump_bank(center: &[f64], half_widths: &[f64], count: usize, seed: u64) -> Result<Vec<BumpTestFunction>> {
    if center.len() != half_widths.len() {
        return Err(Error::DimensionMismatch { expected: center.len(), got: half_widths.len() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: Vec<f64> =
                center.iter().zip(half_widths).map(|(c, h)| c + h * rng.random_range(-1.0..=1.0)).collect();
            let r: Vec<f64> = half_widths.iter().map(|h| h * rng.random_range(0.3..=1.0)).collect();
            BumpTestFunction::new(c, r)
        })
        .collect()
}
