//! Space-time covariances for the free-space 3D wave equation
//! `(1/c^2) ∂_tt w - Δw = 0` with random initial position `u0 ~ GP(0, k_u)` and
//! independent random initial speed `v0 ~ GP(0, k_v)`.
//!
//! The solution is the Kirchhoff sphere average
//!
//! ```text
//! w(x,t) = mean_{γ ∈ S²} [ t v0(x - c|t|γ) + u0(x - c|t|γ) - c|t| γ·∇u0(x - c|t|γ) ]
//! ```
//!
//! so its covariance is a double sphere average of `k_v`, `k_u` and the first and
//! cross derivatives of `k_u`. Every average here is taken with the same product
//! sphere rule, which keeps sampled fields and the kernel exactly consistent.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::kernel::{Covariance, KernelSpec, Point3};
use crate::sphere::SphereRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: Point3,
    pub t: f64,
}

impl SpacetimePoint {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        SpacetimePoint { x: Point3::new(x, y, z), t }
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: s.len() });
        }
        Ok(SpacetimePoint::new(s[0], s[1], s[2], s[3]))
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x[0], self.x[1], self.x[2], self.t]
    }

    /// Ordering key under which the kernel integrand is evaluated; depends on
    /// `t` only through `|t|`.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.x[0]
            .total_cmp(&other.x[0])
            .then(self.x[1].total_cmp(&other.x[1]))
            .then(self.x[2].total_cmp(&other.x[2]))
            .then(self.t.abs().total_cmp(&other.t.abs()))
    }
}

/// Declarative description of the wave model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveModelSpec {
    pub c: f64,
    pub ku: KernelSpec,
    pub kv: KernelSpec,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl WaveModelSpec {
    pub const KEYS: [&'static str; 3] = ["c", "ntheta", "nphi"];

    /// Reads `c=.. ku.family=.. kv.family=.. ntheta=.. nphi=..`. None of the
    /// physical or resolution parameters have defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        Ok(WaveModelSpec {
            c: kv.f64("c")?,
            ku: KernelSpec::from_key_values(kv, "ku.")?,
            kv: KernelSpec::from_key_values(kv, "kv.")?,
            n_theta: kv.usize("ntheta")?,
            n_phi: kv.usize("nphi")?,
        })
    }

    /// True for keys this spec reads.
    pub fn accepts_key(key: &str) -> bool {
        Self::KEYS.contains(&key)
            || ["ku.", "kv."].iter().any(|p| key.strip_prefix(p).is_some_and(|k| KernelSpec::KEYS.contains(&k)))
    }
}

impl std::fmt::Display for WaveModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "c={} ", self.c)?;
        self.ku.write_key_values(f, "ku.")?;
        write!(f, " ")?;
        self.kv.write_key_values(f, "kv.")?;
        write!(f, " ntheta={} nphi={}", self.n_theta, self.n_phi)
    }
}

impl std::str::FromStr for WaveModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kv = KeyValues::parse_line(s)?;
        kv.reject_unknown(WaveModelSpec::accepts_key)?;
        WaveModelSpec::from_key_values(&kv)
    }
}

/// A validated wave model with its sphere rule built.
#[derive(Debug, Clone)]
pub struct WaveModel {
    spec: WaveModelSpec,
    rule: SphereRule,
}

impl WaveModel {
    pub fn new(spec: WaveModelSpec) -> Result<Self> {
        if !(spec.c.is_finite() && spec.c > 0.0) {
            return Err(Error::InvalidSpec(format!("wave speed must be positive, got {}", spec.c)));
        }
        spec.ku.validate()?;
        spec.kv.validate()?;
        if !spec.ku.is_zero() && !spec.ku.is_differentiable() {
            // surfaces UnsupportedDerivative
            spec.ku.derivs(&Point3::zeros(), &Point3::zeros())?;
        }
        let rule = SphereRule::new(spec.n_theta, spec.n_phi)?;
        Ok(WaveModel { spec, rule })
    }

    pub fn spec(&self) -> &WaveModelSpec {
        &self.spec
    }

    pub fn rule(&self) -> &SphereRule {
        &self.rule
    }

    pub fn c(&self) -> f64 {
        self.spec.c
    }

    /// Sphere nodes `x - c|t|γ_j` with weights; a zero radius collapses to the
    /// single node `x` with unit weight.
    pub(crate) fn shell(&self, z: &SpacetimePoint) -> Shell {
        let a = self.spec.c * z.t.abs();
        if a == 0.0 {
            return Shell { radius: 0.0, points: vec![z.x], dirs: vec![Point3::zeros()], weights: vec![1.0] };
        }
        let dirs = self.rule.nodes().to_vec();
        Shell {
            radius: a,
            points: dirs.iter().map(|g| z.x - a * g).collect(),
            dirs,
            weights: self.rule.weights().to_vec(),
        }
    }

    /// Initial-speed part: `t t' ⟨k_v(x - c|t|γ, x' - c|t'|γ')⟩`.
    pub fn kv_wave(&self, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
        let (z, zp) = ordered(z, zp);
        self.kv_part(z, zp)
    }

    /// Initial-position part: the double sphere average of
    /// `k_u - c|t| γ·∇₁k_u - c|t'| γ'·∇₂k_u + c²|t||t'| γᵀ ∇₁∇₂k_u γ'`.
    pub fn ku_wave(&self, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
        let (z, zp) = ordered(z, zp);
        self.ku_part(z, zp)
    }

    /// The wave covariance `kv_wave + ku_wave`.
    pub fn kw(&self, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
        let (z, zp) = ordered(z, zp);
        self.kv_part(z, zp) + self.ku_part(z, zp)
    }

    fn kv_part(&self, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
        let tt = z.t * zp.t;
        if tt == 0.0 || self.spec.kv.is_zero() {
            return 0.0;
        }
        let kv = &self.spec.kv;
        let (s, sp) = (self.shell(z), self.shell(zp));
        let mut acc = 0.0;
        for (y, w) in s.points.iter().zip(&s.weights) {
            let mut inner = 0.0;
            for (yp, wp) in sp.points.iter().zip(&sp.weights) {
                inner += wp * kv.eval(y, yp);
            }
            acc += w * inner;
        }
        tt * acc
    }

    fn ku_part(&self, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
        let ku = &self.spec.ku;
        if ku.is_zero() {
            return 0.0;
        }
        if z.t == 0.0 && zp.t == 0.0 {
            return ku.eval(&z.x, &zp.x);
        }
        let (s, sp) = (self.shell(z), self.shell(zp));
        let (a, ap) = (s.radius, sp.radius);
        let aap = a * ap;
        let mut acc = 0.0;
        for ((y, g), w) in s.points.iter().zip(&s.dirs).zip(&s.weights) {
            let mut inner = 0.0;
            for ((yp, gp), wp) in sp.points.iter().zip(&sp.dirs).zip(&sp.weights) {
                let d = y - yp;
                let rt = ku.radial_terms(&d);
                let gd = g.dot(&d);
                let gpd = gp.dot(&d);
                let val = rt.value + rt.psi * (a * gd - ap * gpd + aap * g.dot(gp)) - rt.chi * aap * gd * gpd;
                inner += wp * val;
            }
            acc += w * inner;
        }
        acc
    }

    /// `kw` over all pairs of `points`.
    pub fn gram(&self, points: &[SpacetimePoint]) -> crate::kernel::GramMatrix {
        crate::kernel::GramMatrix(crate::kernel::covariance_matrix(self, points))
    }
}

pub(crate) struct Shell {
    pub radius: f64,
    pub points: Vec<Point3>,
    pub dirs: Vec<Point3>,
    pub weights: Vec<f64>,
}

fn ordered<'a>(z: &'a SpacetimePoint, zp: &'a SpacetimePoint) -> (&'a SpacetimePoint, &'a SpacetimePoint) {
    if z.canonical_cmp(zp) == Ordering::Greater {
        (zp, z)
    } else {
        (z, zp)
    }
}

impl Covariance<SpacetimePoint> for WaveModel {
    fn covariance(&self, a: &SpacetimePoint, b: &SpacetimePoint) -> f64 {
        self.kw(a, b)
    }
}

impl Covariance<[f64]> for WaveModel {
    fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.kw(&SpacetimePoint::new(a[0], a[1], a[2], a[3]), &SpacetimePoint::new(b[0], b[1], b[2], b[3]))
    }
}

impl Covariance<Vec<f64>> for WaveModel {
    fn covariance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        Covariance::<[f64]>::covariance(self, a.as_slice(), b.as_slice())
    }
}

pub fn kv_wave(model: &WaveModel, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
    model.kv_wave(z, zp)
}

pub fn ku_wave(model: &WaveModel, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
    model.ku_wave(z, zp)
}

pub fn kw(model: &WaveModel, z: &SpacetimePoint, zp: &SpacetimePoint) -> f64 {
    model.kw(z, zp)
}

/// Kirchhoff's formula for deterministic initial data, averaged with `rule`.
pub fn kirchhoff_propagate(
    u0: impl Fn(&Point3) -> f64,
    grad_u0: impl Fn(&Point3) -> Point3,
    v0: impl Fn(&Point3) -> f64,
    c: f64,
    rule: &SphereRule,
    z: &SpacetimePoint,
) -> f64 {
    let a = c * z.t.abs();
    if a == 0.0 {
        return u0(&z.x);
    }
    rule.integrate(|g| {
        let y = z.x - a * g;
        z.t * v0(&y) + u0(&y) - a * g.dot(&grad_u0(&y))
    })
}

/// Fallible variant of [`kirchhoff_propagate`]; the first failing evaluation
/// is returned.
pub fn try_kirchhoff_propagate<E>(
    u0: impl Fn(&Point3) -> std::result::Result<f64, E>,
    grad_u0: impl Fn(&Point3) -> std::result::Result<Point3, E>,
    v0: impl Fn(&Point3) -> std::result::Result<f64, E>,
    c: f64,
    rule: &SphereRule,
    z: &SpacetimePoint,
) -> std::result::Result<f64, E> {
    let a = c * z.t.abs();
    if a == 0.0 {
        return u0(&z.x);
    }
    rule.try_integrate(|g| {
        let y = z.x - a * g;
        Ok(z.t * v0(&y)? + u0(&y)? - a * g.dot(&grad_u0(&y)?))
    })
}
