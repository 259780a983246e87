//! Distributional residuals `⟨f, L*φ⟩` of fields, kernels and sample paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::PriorSampler;
use crate::kernel::Covariance;
use crate::wave::{SpacetimePoint, WaveModel};
use crate::wave_sample::WaveFieldSampler;

use super::bump::BumpTestFunction;
use super::operator::OperatorSpec;
use super::quadrature::{QuadratureNodes, RuleSpec};

/// `L*φ` tabulated on a quadrature rule: `coeffs[i] = w_i L*φ(z_i)`, so that
/// `⟨f, L*φ⟩ ≈ Σ coeffs[i] f(z_i)`.
#[derive(Debug, Clone)]
pub struct WeakForm {
    pub points: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    /// `Σ w_i |L*φ(z_i)|`.
    pub adjoint_mass: f64,
    pub bump: BumpTestFunction,
    pub resolution: String,
}

impl WeakForm {
    pub fn new(op: &OperatorSpec, phi: &BumpTestFunction, rule: &RuleSpec) -> Result<Self> {
        let adj = op.adjoint(phi)?;
        let QuadratureNodes { points, weights } = rule.nodes(phi)?;
        let coeffs: Vec<f64> = points.iter().zip(&weights).map(|(z, w)| w * adj.eval(z)).collect();
        let adjoint_mass = coeffs.iter().map(|c| c.abs()).sum();
        Ok(WeakForm { points, coeffs, adjoint_mass, bump: phi.clone(), resolution: rule.to_string() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ coeffs[i] values[i]` for field values tabulated at `points`.
    pub fn pair(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Raw residual and the normalization `(∫|L*φ|) · max|f|` over the nodes.
    pub fn evaluate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> (f64, f64) {
        let values: Vec<f64> = self.points.par_iter().map(|z| f(z)).collect();
        let raw = self.pair(&values);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (raw, self.adjoint_mass * scale)
    }

    /// `aᵀ K a` with `a = coeffs`: the second moment of `⟨U, L*φ⟩` for a
    /// centered field with covariance `K`, at this discretization.
    pub fn expected_second_moment<K: Covariance<[f64]> + Sync + ?Sized>(&self, kernel: &K) -> f64 {
        let n = self.len();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                if self.coeffs[i] == 0.0 {
                    return 0.0;
                }
                let zi = &self.points[i];
                let off: f64 = (0..i)
                    .filter(|&j| self.coeffs[j] != 0.0)
                    .map(|j| self.coeffs[j] * kernel.covariance(zi, &self.points[j]))
                    .sum();
                self.coeffs[i] * (2.0 * off + self.coeffs[i] * kernel.covariance(zi, zi))
            })
            .collect();
        rows.iter().sum()
    }
}

/// `⟨f, L*φ⟩` by quadrature.
pub fn residual(
    f: impl Fn(&[f64]) -> f64 + Sync,
    op: &OperatorSpec,
    phi: &BumpTestFunction,
    rule: &RuleSpec,
) -> Result<f64> {
    Ok(WeakForm::new(op, phi, rule)?.evaluate(f).0)
}

/// As [`residual`] for fallible fields; the first failure is returned.
pub fn try_residual<E>(
    f: impl Fn(&[f64]) -> std::result::Result<f64, E> + Sync,
    op: &OperatorSpec,
    phi: &BumpTestFunction,
    rule: &RuleSpec,
) -> Result<std::result::Result<f64, E>>
where
    E: Send,
{
    let wf = WeakForm::new(op, phi, rule)?;
    let values: std::result::Result<Vec<f64>, E> = wf.points.par_iter().map(|z| f(z)).collect();
    Ok(values.map(|v| wf.pair(&v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub anchor: Vec<f64>,
    pub bump_center: Vec<f64>,
    pub bump_radii: Vec<f64>,
    pub raw: f64,
    pub normalization: f64,
    pub normalized: f64,
    pub pass: bool,
    pub resolution: String,
}

impl ResidualReport {
    pub fn new(anchor: Vec<f64>, wf: &WeakForm, raw: f64, normalization: f64, tolerance: f64) -> Self {
        let normalized = if normalization > 0.0 { raw / normalization } else { raw };
        ResidualReport {
            anchor,
            bump_center: wf.bump.center.clone(),
            bump_radii: wf.bump.radii.clone(),
            raw,
            normalization,
            normalized,
            pass: normalized.abs() <= tolerance,
            resolution: wf.resolution.clone(),
        }
    }
}

/// Checks `L(k(·, a)) = 0` weakly for every anchor `a` and bump in the bank.
/// Reports are ordered anchor-major.
pub fn verify_kernel_constraint<K>(
    kernel: &K,
    op: &OperatorSpec,
    anchors: &[Vec<f64>],
    bank: &[BumpTestFunction],
    rule: &RuleSpec,
    tolerance: f64,
) -> Result<Vec<ResidualReport>>
where
    K: Covariance<[f64]> + Sync + ?Sized,
{
    for a in anchors {
        if a.len() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: a.len() });
        }
    }
    let forms: Vec<WeakForm> = bank.iter().map(|phi| WeakForm::new(op, phi, rule)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..anchors.len()).flat_map(|a| (0..forms.len()).map(move |b| (a, b))).collect();
    Ok(pairs
        .par_iter()
        .map(|&(a, b)| {
            let anchor = &anchors[a];
            let (raw, norm) = forms[b].evaluate(|z| kernel.covariance(z, anchor));
            ResidualReport::new(anchor.clone(), &forms[b], raw, norm, tolerance)
        })
        .collect())
}

/// Residual reports for an arbitrary field, one per bump.
pub fn verify_field(
    f: impl Fn(&[f64]) -> f64 + Sync,
    op: &OperatorSpec,
    bank: &[BumpTestFunction],
    rule: &RuleSpec,
    tolerance: f64,
) -> Result<Vec<ResidualReport>> {
    bank.iter()
        .map(|phi| {
            let wf = WeakForm::new(op, phi, rule)?;
            let (raw, norm) = wf.evaluate(&f);
            Ok(ResidualReport::new(Vec::new(), &wf, raw, norm, tolerance))
        })
        .collect()
}

/// Random fields that can be sampled jointly at a fixed point set.
pub trait FieldSampler {
    type Bound: BoundSampler;

    fn bind(&self, points: &[Vec<f64>]) -> Result<Self::Bound>;
}

/// A field sampler fixed to a point set; each seed gives one path.
pub trait BoundSampler: Sync {
    fn draw(&self, seed: u64) -> Vec<f64>;
}

impl FieldSampler for WaveModel {
    type Bound = WaveFieldSampler;

    fn bind(&self, points: &[Vec<f64>]) -> Result<WaveFieldSampler> {
        let pts: Vec<SpacetimePoint> = points.iter().map(|p| SpacetimePoint::from_slice(p)).collect::<Result<_>>()?;
        WaveFieldSampler::new(self, &pts)
    }
}

impl BoundSampler for WaveFieldSampler {
    fn draw(&self, seed: u64) -> Vec<f64> {
        self.draw_values(seed)
    }
}

/// Centered Gaussian field with covariance `K` on slices.
#[derive(Debug, Clone)]
pub struct GaussianField<K>(pub K);

impl<K: Covariance<[f64]> + Sync> FieldSampler for GaussianField<K> {
    type Bound = PriorSampler;

    fn bind(&self, points: &[Vec<f64>]) -> Result<PriorSampler> {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        PriorSampler::new(&|a: &&[f64], b: &&[f64]| self.0.covariance(a, b), &refs)
    }
}

impl BoundSampler for PriorSampler {
    fn draw(&self, seed: u64) -> Vec<f64> {
        PriorSampler::draw(self, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub n: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub se_mean: f64,
    pub se_second_moment: f64,
}

impl McStats {
    pub fn from_samples(r: &[f64]) -> Self {
        let n = r.len();
        let nf = n as f64;
        let mean = r.iter().sum::<f64>() / nf;
        let second_moment = r.iter().map(|v| v * v).sum::<f64>() / nf;
        let (se_mean, se_second_moment) = if n > 1 {
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let var2 = r.iter().map(|v| (v * v - second_moment).powi(2)).sum::<f64>() / (nf - 1.0);
            ((var / nf).sqrt(), (var2 / nf).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        McStats { n, mean, second_moment, se_mean, se_second_moment }
    }
}

/// Pathwise residuals `r_ω = ⟨W_ω, L*φ⟩` over a weak form; sample `i` uses
/// seed `base_seed ^ i`.
pub fn pathwise_residuals<S: FieldSampler + ?Sized>(
    sampler: &S,
    wf: &WeakForm,
    n_samples: usize,
    base_seed: u64,
) -> Result<Vec<f64>> {
    let bound = sampler.bind(&wf.points)?;
    Ok((0..n_samples as u64).into_par_iter().map(|i| wf.pair(&bound.draw(base_seed ^ i))).collect())
}

pub fn monte_carlo_pathwise<S: FieldSampler + ?Sized>(
    sampler: &S,
    op: &OperatorSpec,
    phi: &BumpTestFunction,
    rule: &RuleSpec,
    n_samples: usize,
    base_seed: u64,
) -> Result<McStats> {
    if n_samples == 0 {
        return Err(Error::InvalidSpec("n_samples must be positive".into()));
    }
    let wf = WeakForm::new(op, phi, rule)?;
    Ok(McStats::from_samples(&pathwise_residuals(sampler, &wf, n_samples, base_seed)?))
}

/// `E[⟨U, L*φ⟩²]` for a centered field with covariance `kernel`, at the same
/// discretization as [`monte_carlo_pathwise`].
pub fn expected_second_moment<K: Covariance<[f64]> + Sync + ?Sized>(
    kernel: &K,
    op: &OperatorSpec,
    phi: &BumpTestFunction,
    rule: &RuleSpec,
) -> Result<f64> {
    Ok(WeakForm::new(op, phi, rule)?.expected_second_moment(kernel))
}
