//! Spatial covariance kernels and their analytic derivatives.
//!
//! All families are radial, `k(x, x') = variance * f(|x - x'|)`, with
//!
//! * `Matern12`:   `f(r) = exp(-r/l)`
//! * `Matern32`:   `f(r) = (1 + r/l) exp(-r/l)` (no `sqrt(3)` rescaling of `r`)
//! * `SquaredExp`: `f(r) = exp(-r^2 / (2 l^2))`
//! * `Constant(v)`: `f(r) = v`
//!
//! A kernel may additionally be truncated to a ball, `k(x,x') 1{x in B} 1{x' in B}`,
//! or composed with the shift `(x, y) -> x - y` so that it is invariant along the
//! diagonal of the plane (the covariance of `U0(x - y)` for a 1D process `U0`).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Below this multiple of the lengthscale, radial derivative formulas switch to
/// their analytic limits at `r = 0`.
const SMALL_R: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Matern12,
    Matern32,
    SquaredExp,
    Constant(f64),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Matern12 => "matern12",
            Family::Matern32 => "matern32",
            Family::SquaredExp => "squaredexp",
            Family::Constant(_) => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub center: Point3,
    pub radius: f64,
}

impl Truncation {
    #[inline]
    pub fn contains(&self, x: &Point3) -> bool {
        (x - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Composition {
    /// `k(x, x') = f(|x - x'|)` in any dimension.
    #[default]
    Radial,
    /// Planar points `(x, y)`: `k = f(|(x - y) - (x' - y')|)`.
    TransportShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: Family,
    pub lengthscale: f64,
    pub variance: f64,
    pub truncation: Option<Truncation>,
    pub composition: Composition,
}

/// Value and first/cross derivatives of a kernel at one pair of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub grad1: Vector3<f64>,
    pub grad2: Vector3<f64>,
    pub cross_hessian: Matrix3<f64>,
}

/// Scalars `(value, psi, chi)` such that, with `d = x - x'`,
/// `grad1 = -psi d`, `grad2 = psi d` and `cross_hessian = psi I - chi d d^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RadialTerms {
    pub value: f64,
    pub psi: f64,
    pub chi: f64,
}

impl KernelSpec {
    pub fn new(family: Family, lengthscale: f64) -> Result<Self> {
        let spec =
            KernelSpec { family, lengthscale, variance: 1.0, truncation: None, composition: Composition::Radial };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern12(lengthscale: f64) -> Result<Self> {
        Self::new(Family::Matern12, lengthscale)
    }

    pub fn matern32(lengthscale: f64) -> Result<Self> {
        Self::new(Family::Matern32, lengthscale)
    }

    pub fn squared_exp(lengthscale: f64) -> Result<Self> {
        Self::new(Family::SquaredExp, lengthscale)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Family::Constant(value), 1.0)
    }

    pub fn with_variance(mut self, variance: f64) -> Result<Self> {
        self.variance = variance;
        self.validate()?;
        Ok(self)
    }

    pub fn truncated(mut self, center: Point3, radius: f64) -> Result<Self> {
        self.truncation = Some(Truncation { center, radius });
        self.validate()?;
        Ok(self)
    }

    pub fn transport_shift(mut self) -> Result<Self> {
        self.composition = Composition::TransportShift;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale.is_finite() && self.lengthscale > 0.0) {
            return Err(Error::InvalidSpec(format!("lengthscale must be positive, got {}", self.lengthscale)));
        }
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::InvalidSpec(format!("variance must be positive, got {}", self.variance)));
        }
        if let Family::Constant(v) = self.family {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!("constant kernel value must be nonnegative, got {v}")));
            }
        }
        if let Some(t) = &self.truncation {
            if !(t.radius.is_finite() && t.radius > 0.0) {
                return Err(Error::InvalidSpec(format!("truncation radius must be positive, got {}", t.radius)));
            }
            if !t.center.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidSpec("truncation center must be finite".into()));
            }
            if self.composition == Composition::TransportShift {
                return Err(Error::InvalidSpec("truncation cannot be combined with the transport shift".into()));
            }
        }
        Ok(())
    }

    /// True when the kernel is identically zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.family, Family::Constant(v) if v == 0.0)
    }

    pub fn is_differentiable(&self) -> bool {
        self.truncation.is_none() && !matches!(self.family, Family::Matern12)
    }

    /// `variance * f(r)`.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        let l = self.lengthscale;
        let f = match self.family {
            Family::Matern12 => (-r / l).exp(),
            Family::Matern32 => (1.0 + r / l) * (-r / l).exp(),
            Family::SquaredExp => (-0.5 * (r / l) * (r / l)).exp(),
            Family::Constant(v) => v,
        };
        self.variance * f
    }

    /// `k(x, x')` for points of three-dimensional space.
    #[inline]
    pub fn eval(&self, x: &Point3, xp: &Point3) -> f64 {
        if let Some(t) = &self.truncation {
            if !t.contains(x) || !t.contains(xp) {
                return 0.0;
            }
        }
        match self.composition {
            Composition::Radial => self.profile((x - xp).norm()),
            Composition::TransportShift => self.profile(((x[0] - x[1]) - (xp[0] - xp[1])).abs()),
        }
    }

    /// `k(a, b)` for points of any dimension. Truncation only applies to
    /// three-dimensional points; the transport shift needs planar points.
    pub fn eval_slice(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        if let Some(t) = &self.truncation {
            if a.len() == 3 {
                let (pa, pb) = (Point3::from_column_slice(a), Point3::from_column_slice(b));
                if !t.contains(&pa) || !t.contains(&pb) {
                    return 0.0;
                }
            }
        }
        let r = match self.composition {
            Composition::Radial => a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt(),
            Composition::TransportShift => ((a[0] - a[1]) - (b[0] - b[1])).abs(),
        };
        self.profile(r)
    }

    fn require_derivatives(&self) -> Result<()> {
        if self.truncation.is_some() {
            return Err(Error::UnsupportedDerivative {
                family: self.family.name().into(),
                detail: " (truncated kernels are discontinuous)",
            });
        }
        if let Family::Matern12 = self.family {
            return Err(Error::UnsupportedDerivative {
                family: self.family.name().into(),
                detail: " (not differentiable at r = 0)",
            });
        }
        if self.composition != Composition::Radial {
            return Err(Error::UnsupportedDerivative {
                family: self.family.name().into(),
                detail: " (derivatives are defined for radial kernels on R^3 only)",
            });
        }
        Ok(())
    }

    /// Radial derivative scalars for `d = x - x'`. Callers must have checked
    /// [`KernelSpec::is_differentiable`].
    #[inline]
    pub(crate) fn radial_terms(&self, d: &Point3) -> RadialTerms {
        let l = self.lengthscale;
        match self.family {
            Family::SquaredExp => {
                let r2 = d.norm_squared();
                let value = self.variance * (-0.5 * r2 / (l * l)).exp();
                let psi = value / (l * l);
                RadialTerms { value, psi, chi: psi / (l * l) }
            }
            Family::Matern32 => {
                let r = d.norm();
                let e = self.variance * (-r / l).exp();
                let value = e * (1.0 + r / l);
                let psi = e / (l * l);
                // d d^T / r -> 0 as r -> 0
                let chi = if r < SMALL_R * l { 0.0 } else { e / (l * l * l * r) };
                RadialTerms { value, psi, chi }
            }
            Family::Constant(v) => RadialTerms { value: self.variance * v, psi: 0.0, chi: 0.0 },
            Family::Matern12 => RadialTerms { value: self.profile(d.norm()), psi: f64::NAN, chi: f64::NAN },
        }
    }

    pub fn derivs(&self, x: &Point3, xp: &Point3) -> Result<Derivs> {
        self.require_derivatives()?;
        let d = x - xp;
        let t = self.radial_terms(&d);
        Ok(Derivs {
            value: t.value,
            grad1: -t.psi * d,
            grad2: t.psi * d,
            cross_hessian: Matrix3::identity() * t.psi - (d * d.transpose()) * t.chi,
        })
    }

    /// Gradient of `k(x, x')` with respect to `x`.
    pub fn grad1(&self, x: &Point3, xp: &Point3) -> Result<Vector3<f64>> {
        self.derivs(x, xp).map(|d| d.grad1)
    }

    /// Gradient of `k(x, x')` with respect to `x'`.
    pub fn grad2(&self, x: &Point3, xp: &Point3) -> Result<Vector3<f64>> {
        self.derivs(x, xp).map(|d| d.grad2)
    }

    /// Matrix with entries `d/dx_i d/dx'_j k(x, x')`.
    pub fn cross_hessian(&self, x: &Point3, xp: &Point3) -> Result<Matrix3<f64>> {
        self.derivs(x, xp).map(|d| d.cross_hessian)
    }

    /// Reads a spec from flat `key=value` pairs; `prefix` is stripped from keys
    /// (e.g. `"ku."`). Keys belonging to other prefixes are ignored.
    pub fn from_key_values(kv: &KeyValues, prefix: &str) -> Result<Self> {
        let get = |k: &str| kv.get(&format!("{prefix}{k}"));
        let family_raw = get("family").ok_or_else(|| Error::Parse(format!("missing `{prefix}family`")))?;
        let (shift, family_name) = match family_raw.strip_prefix("shiftinvariant-") {
            Some(rest) => (true, rest),
            None => (false, family_raw),
        };
        let family = match family_name {
            "matern12" => Family::Matern12,
            "matern32" => Family::Matern32,
            "squaredexp" => Family::SquaredExp,
            "constant" => {
                let v =
                    get("value").ok_or_else(|| Error::Parse(format!("missing `{prefix}value` for constant kernel")))?;
                Family::Constant(parse_f64(&format!("{prefix}value"), v)?)
            }
            other => return Err(Error::Parse(format!("unknown kernel family `{other}`"))),
        };
        let lengthscale = match (family, get("lengthscale")) {
            (_, Some(v)) => parse_f64(&format!("{prefix}lengthscale"), v)?,
            (Family::Constant(_), None) => 1.0,
            (_, None) => return Err(Error::Parse(format!("missing `{prefix}lengthscale`"))),
        };
        let mut spec = KernelSpec::new(family, lengthscale)?;
        if let Some(v) = get("variance") {
            spec = spec.with_variance(parse_f64(&format!("{prefix}variance"), v)?)?;
        }
        match (get("trunc_center"), get("trunc_radius")) {
            (Some(c), Some(r)) => {
                let center = parse_point3(&format!("{prefix}trunc_center"), c)?;
                spec = spec.truncated(center, parse_f64(&format!("{prefix}trunc_radius"), r)?)?;
            }
            (None, None) => {}
            _ => {
                return Err(Error::Parse(format!(
                    "`{prefix}trunc_center` and `{prefix}trunc_radius` must be given together"
                )))
            }
        }
        if shift {
            spec = spec.transport_shift()?;
        }
        Ok(spec)
    }

    /// Keys recognised by [`KernelSpec::from_key_values`], without prefix.
    pub const KEYS: [&'static str; 6] = ["family", "lengthscale", "variance", "value", "trunc_center", "trunc_radius"];

    pub(crate) fn write_key_values(&self, f: &mut fmt::Formatter<'_>, prefix: &str) -> fmt::Result {
        let shift = match self.composition {
            Composition::TransportShift => "shiftinvariant-",
            Composition::Radial => "",
        };
        write!(f, "{prefix}family={shift}{}", self.family.name())?;
        if let Family::Constant(v) = self.family {
            write!(f, " {prefix}value={v}")?;
        }
        write!(f, " {prefix}lengthscale={} {prefix}variance={}", self.lengthscale, self.variance)?;
        if let Some(t) = &self.truncation {
            write!(
                f,
                " {prefix}trunc_center={},{},{} {prefix}trunc_radius={}",
                t.center[0], t.center[1], t.center[2], t.radius
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_key_values(f, "")
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kv = KeyValues::parse_line(s)?;
        kv.reject_unknown(|k| KernelSpec::KEYS.contains(&k))?;
        KernelSpec::from_key_values(&kv, "")
    }
}

pub(crate) fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("`{key}`: expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("`{key}`: value must be finite")));
    }
    Ok(x)
}

pub(crate) fn parse_point3(key: &str, v: &str) -> Result<Point3> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("`{key}`: expected x,y,z, got `{v}`")));
    }
    Ok(Point3::new(parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?))
}

/// Covariance function over points of type `P`.
pub trait Covariance<P: ?Sized> {
    fn covariance(&self, a: &P, b: &P) -> f64;
}

impl Covariance<Point3> for KernelSpec {
    #[inline]
    fn covariance(&self, a: &Point3, b: &Point3) -> f64 {
        self.eval(a, b)
    }
}

impl Covariance<[f64]> for KernelSpec {
    #[inline]
    fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_slice(a, b)
    }
}

impl Covariance<Vec<f64>> for KernelSpec {
    #[inline]
    fn covariance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.eval_slice(a, b)
    }
}

impl<P: ?Sized, F> Covariance<P> for F
where
    F: Fn(&P, &P) -> f64,
{
    #[inline]
    fn covariance(&self, a: &P, b: &P) -> f64 {
        self(a, b)
    }
}

/// Dense kernel matrix `K[i][j] = k(points[i], points[j])`.
///
/// Only the lower triangle is evaluated and mirrored, so the result is exactly
/// symmetric. Entries are computed independently, so the matrix does not depend
/// on the size of the rayon pool.
pub fn covariance_matrix<P, K>(kernel: &K, points: &[P]) -> DMatrix<f64>
where
    P: Sync,
    K: Covariance<P> + Sync + ?Sized,
{
    let n = points.len();
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (0..=i).map(|j| kernel.covariance(&points[i], &points[j])).collect()).collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Cross-covariance `K[i][j] = k(a[i], b[j])`.
pub fn cross_covariance<P, K>(kernel: &K, a: &[P], b: &[P]) -> DMatrix<f64>
where
    P: Sync,
    K: Covariance<P> + Sync + ?Sized,
{
    let rows: Vec<Vec<f64>> = a.par_iter().map(|p| b.iter().map(|q| kernel.covariance(p, q)).collect()).collect();
    DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j])
}

/// Symmetric, nonnegative definite matrix of kernel evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.clone().symmetric_eigenvalues().min()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.0.diagonal().iter().cloned().fold(0.0, f64::max)
    }

    /// The PSD tolerance `1e-10 * n * max diagonal`.
    pub fn psd_tolerance(&self) -> f64 {
        1e-10 * self.0.nrows() as f64 * self.max_diagonal()
    }

    pub fn is_psd(&self, tolerance: f64) -> bool {
        self.min_eigenvalue() >= -tolerance
    }
}

pub fn gram_matrix(spec: &KernelSpec, points: &[Point3]) -> GramMatrix {
    GramMatrix(covariance_matrix(spec, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn matern_values() {
        let m12 = KernelSpec::matern12(1.0).unwrap();
        assert_eq!(m12.eval(&p(0., 0., 0.), &p(0., 0., 0.)), 1.0);
        assert!(close(m12.eval(&p(0., 0., 0.), &p(1., 0., 0.)), 0.36787944117144233, 1e-15));
        let m32 = KernelSpec::matern32(2.0).unwrap();
        assert!(close(m32.eval(&p(0., 0., 0.), &p(0., 2., 0.)), 2.0 * (-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn derivatives_at_coincident_points() {
        let l = 0.7;
        let m32 = KernelSpec::matern32(l).unwrap();
        let x = p(0.3, -0.2, 1.1);
        let d = m32.derivs(&x, &x).unwrap();
        assert_eq!(d.grad1, Vector3::zeros());
        assert_eq!(d.grad2, Vector3::zeros());
        let expected = Matrix3::identity() / (l * l);
        assert!((d.cross_hessian - expected).abs().max() < 1e-15);
    }

    #[test]
    fn matern32_gradients_closed_form() {
        let m32 = KernelSpec::matern32(1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let g1 = m32.grad1(&p(1., 0., 0.), &p(0., 0., 0.)).unwrap();
        assert!((g1 - Vector3::new(-e1, 0., 0.)).norm() < 1e-15);
        let g2 = m32.grad2(&p(0., 0., 0.), &p(1., 0., 0.)).unwrap();
        assert!((g2 - Vector3::new(-e1, 0., 0.)).norm() < 1e-15);
    }

    #[test]
    fn constant_kernel_has_zero_hessian() {
        let k = KernelSpec::constant(2.5).unwrap();
        let h = k.cross_hessian(&p(0., 1., 2.), &p(3., -1., 0.5)).unwrap();
        assert_eq!(h, Matrix3::zeros());
        assert_eq!(k.eval(&p(0., 1., 2.), &p(3., -1., 0.5)), 2.5);
    }

    #[test]
    fn nonsmooth_kernels_reject_derivatives() {
        let m12 = KernelSpec::matern12(1.0).unwrap();
        assert!(matches!(m12.grad1(&p(0., 0., 0.), &p(1., 0., 0.)), Err(Error::UnsupportedDerivative { .. })));
        let trunc = KernelSpec::squared_exp(1.0).unwrap().truncated(p(0., 0., 0.), 1.0).unwrap();
        assert!(matches!(
            trunc.cross_hessian(&p(0., 0., 0.), &p(0.1, 0., 0.)),
            Err(Error::UnsupportedDerivative { .. })
        ));
    }

    #[test]
    fn truncation_vanishes_outside_ball() {
        let k = KernelSpec::matern12(1.0).unwrap().truncated(p(1., 0., 0.), 0.5).unwrap();
        assert_eq!(k.eval(&p(0., 0., 0.), &p(1., 0., 0.)), 0.0);
        assert_eq!(k.eval(&p(1., 0., 0.), &p(2., 0., 0.)), 0.0);
        assert!(k.eval(&p(1.2, 0., 0.), &p(0.9, 0.1, 0.)) > 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(KernelSpec::matern32(0.0).is_err());
        assert!(KernelSpec::matern32(1.0).unwrap().with_variance(-1.0).is_err());
        assert!(KernelSpec::constant(-0.5).is_err());
        assert!(KernelSpec::matern12(1.0).unwrap().truncated(p(0., 0., 0.), 0.0).is_err());
    }

    #[test]
    fn text_form_roundtrip() {
        let k =
            KernelSpec::matern12(0.5).unwrap().with_variance(2.0).unwrap().truncated(p(0.0, 1.5, -2.0), 0.75).unwrap();
        let s = k.to_string();
        assert_eq!(s, "family=matern12 lengthscale=0.5 variance=2 trunc_center=0,1.5,-2 trunc_radius=0.75");
        assert_eq!(s.parse::<KernelSpec>().unwrap(), k);
        let shift: KernelSpec = "family=shiftinvariant-matern12 lengthscale=1".parse().unwrap();
        assert_eq!(shift.composition, Composition::TransportShift);
        assert_eq!(shift.to_string().parse::<KernelSpec>().unwrap(), shift);
    }

    #[test]
    fn text_form_errors() {
        assert!("family=matern32".parse::<KernelSpec>().is_err());
        assert!("family=matern52 lengthscale=1".parse::<KernelSpec>().is_err());
        assert!("family=matern32 lengthscale=1 colour=red".parse::<KernelSpec>().is_err());
        assert!("family=matern32 lengthscale=1 trunc_radius=1".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn gram_single_point_and_permutation() {
        let k = KernelSpec::matern32(1.0).unwrap();
        let g = gram_matrix(&k, &[p(0.2, 0.3, 0.4)]);
        assert_eq!(g.0, DMatrix::from_element(1, 1, 1.0));

        let pts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 2., 1.), p(0.5, 0.5, 0.5)];
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let a = gram_matrix(&k, &pts);
        let b = gram_matrix(&k, &permuted);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b.0[(i, j)], a.0[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn transport_shift_kernel_depends_on_difference_only() {
        let k = KernelSpec::matern12(1.0).unwrap().transport_shift().unwrap();
        let a = k.eval_slice(&[0.3, 0.1], &[1.0, 0.2]);
        let b = k.eval_slice(&[1.3, 1.1], &[-1.0, -1.8]);
        assert_eq!(a, b);
    }
}
