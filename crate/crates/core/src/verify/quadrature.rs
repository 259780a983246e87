//! Quadrature over the support of a bump test function.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::sphere::{gauss_legendre, SphereRule};

use super::bump::BumpTestFunction;

/// Nodes and positive weights in `ℝ^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNodes {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureNodes {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(z, w)| w * f(z)).sum()
    }
}

/// Tensor-product Gauss–Legendre rule over the bump's bounding box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRule {
    pub counts: Vec<usize>,
}

impl BoxRule {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::InvalidResolution(format!("box rule needs positive counts, got {counts:?}")));
        }
        Ok(BoxRule { counts })
    }

    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; dim])
    }

    pub fn nodes(&self, phi: &BumpTestFunction) -> Result<QuadratureNodes> {
        if self.counts.len() != phi.dim() {
            return Err(Error::DimensionMismatch { expected: phi.dim(), got: self.counts.len() });
        }
        let axes: Vec<(Vec<f64>, Vec<f64>)> = self
            .counts
            .iter()
            .zip(phi.center.iter().zip(&phi.radii))
            .map(|(&n, (&c, &r))| {
                let (x, w) = gauss_legendre(n);
                (x.iter().map(|x| c + r * x).collect(), w.iter().map(|w| r * w).collect())
            })
            .collect();
        let mut points = vec![Vec::new()];
        let mut weights = vec![1.0];
        for (xs, ws) in &axes {
            let mut np = Vec::with_capacity(points.len() * xs.len());
            let mut nw = Vec::with_capacity(points.len() * xs.len());
            for (p, w) in points.iter().zip(&weights) {
                for (x, wx) in xs.iter().zip(ws) {
                    let mut q = p.clone();
                    q.push(*x);
                    np.push(q);
                    nw.push(w * wx);
                }
            }
            points = np;
            weights = nw;
        }
        Ok(QuadratureNodes { points, weights })
    }
}

/// Polar rule on the support ellipsoid: Gauss–Legendre in the radius times a
/// rule on the unit sphere `S^{D-1}`, mapped through the bump's radii.
///
/// The bump is smooth in the scaled radius and has no kink at the ellipsoid
/// boundary in these coordinates, which is where a box rule loses accuracy.
/// Radial nodes are graded towards the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallRule {
    pub n_radial: usize,
    /// Gauss–Legendre count in the polar coordinate (3D and 4D only).
    pub n_polar: usize,
    /// Uniform count per azimuthal angle.
    pub n_azimuth: usize,
}

impl BallRule {
    pub fn new(n_radial: usize, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_radial == 0 || n_polar == 0 || n_azimuth == 0 {
            return Err(Error::InvalidResolution(format!(
                "ball rule needs positive counts, got {n_radial}x{n_polar}x{n_azimuth}"
            )));
        }
        Ok(BallRule { n_radial, n_polar, n_azimuth })
    }

    /// Unit directions and weights summing to the area of `S^{D-1}`.
    fn directions(&self, dim: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        Ok(match dim {
            1 => (vec![vec![-1.0], vec![1.0]], vec![1.0, 1.0]),
            2 => {
                let n = self.n_azimuth;
                let w = 2.0 * PI / n as f64;
                let dirs = (0..n)
                    .map(|k| {
                        let a = (k as f64 + 0.5) * w;
                        vec![a.cos(), a.sin()]
                    })
                    .collect();
                (dirs, vec![w; n])
            }
            3 => {
                let rule = SphereRule::new(self.n_polar, self.n_azimuth)?;
                let dirs = rule.nodes().iter().map(|g| vec![g[0], g[1], g[2]]).collect();
                (dirs, rule.weights().iter().map(|w| 4.0 * PI * w).collect())
            }
            4 => {
                // Hopf coordinates (cos η e^{iξ₁}, sin η e^{iξ₂}); with
                // s = sin²η the surface element is ds dξ₁ dξ₂ / 2.
                let (s, ws) = gauss_legendre(self.n_polar);
                let n = self.n_azimuth;
                let h = 2.0 * PI / n as f64;
                let mut dirs = Vec::with_capacity(s.len() * n * n);
                let mut weights = Vec::with_capacity(s.len() * n * n);
                for (s, w) in s.iter().zip(&ws) {
                    let s = 0.5 * (s + 1.0);
                    let (ce, se) = ((1.0 - s).sqrt(), s.sqrt());
                    for i in 0..n {
                        let a = (i as f64 + 0.5) * h;
                        for j in 0..n {
                            let b = (j as f64 + 0.5) * h;
                            dirs.push(vec![ce * a.cos(), ce * a.sin(), se * b.cos(), se * b.sin()]);
                            weights.push(0.5 * w * 0.5 * h * h);
                        }
                    }
                }
                (dirs, weights)
            }
            d => {
                return Err(Error::InvalidResolution(format!(
                    "ball rule supports dimensions 1 to 4, got {d}; use a box rule"
                )))
            }
        })
    }

    pub fn nodes(&self, phi: &BumpTestFunction) -> Result<QuadratureNodes> {
        let dim = phi.dim();
        let (dirs, dir_w) = self.directions(dim)?;
        let (r, wr) = gauss_legendre(self.n_radial);
        let volume: f64 = phi.radii.iter().product();
        let mut points = Vec::with_capacity(r.len() * dirs.len());
        let mut weights = Vec::with_capacity(r.len() * dirs.len());
        for (u, wu) in r.iter().zip(&wr) {
            // r = 1 - (1 - u)^2 clusters nodes where the bump flattens out
            let v = 0.5 * (1.0 - u);
            let r = 1.0 - v * v;
            let wr = 0.5 * wu * 2.0 * v * r.powi(dim as i32 - 1) * volume;
            for (g, wg) in dirs.iter().zip(&dir_w) {
                points.push((0..dim).map(|i| phi.center[i] + phi.radii[i] * r * g[i]).collect());
                weights.push(wr * wg);
            }
        }
        Ok(QuadratureNodes { points, weights })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleSpec {
    Box(BoxRule),
    Ball(BallRule),
}

impl RuleSpec {
    /// Default rule for a given dimension.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => RuleSpec::Ball(BallRule { n_radial: 64, n_polar: 1, n_azimuth: 1 }),
            2 => RuleSpec::Ball(BallRule { n_radial: 48, n_polar: 1, n_azimuth: 384 }),
            3 => RuleSpec::Ball(BallRule { n_radial: 24, n_polar: 8, n_azimuth: 16 }),
            4 => RuleSpec::Ball(BallRule { n_radial: 20, n_polar: 4, n_azimuth: 8 }),
            d => RuleSpec::Box(BoxRule { counts: vec![12; d] }),
        }
    }

    pub fn nodes(&self, phi: &BumpTestFunction) -> Result<QuadratureNodes> {
        match self {
            RuleSpec::Box(b) => b.nodes(phi),
            RuleSpec::Ball(b) => b.nodes(phi),
        }
    }

    /// Reads `rule=ball:20x4x8` or `rule=box:16x16`; missing means the default.
    pub fn from_key_values(kv: &KeyValues, dim: usize) -> Result<Self> {
        match kv.get("rule") {
            None => Ok(Self::default_for(dim)),
            Some(s) => s.parse(),
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::Box(b) => {
                let counts: Vec<String> = b.counts.iter().map(|c| c.to_string()).collect();
                write!(f, "box:{}", counts.join("x"))
            }
            RuleSpec::Ball(b) => write!(f, "ball:{}x{}x{}", b.n_radial, b.n_polar, b.n_azimuth),
        }
    }
}

impl std::str::FromStr for RuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("`rule`: expected box:NxN.. or ball:RxPxA, got `{s}`")))?;
        let counts: Vec<usize> = rest
            .split('x')
            .map(|c| c.parse().map_err(|_| Error::Parse(format!("`rule`: bad count `{c}`"))))
            .collect::<Result<_>>()?;
        match kind {
            "box" => Ok(RuleSpec::Box(BoxRule::new(counts)?)),
            "ball" => match counts[..] {
                [r, p, a] => Ok(RuleSpec::Ball(BallRule::new(r, p, a)?)),
                _ => Err(Error::Parse(format!("`rule`: ball needs three counts, got `{rest}`"))),
            },
            other => Err(Error::Parse(format!("`rule`: unknown kind `{other}`"))),
        }
    }
}
