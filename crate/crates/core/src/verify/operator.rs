//! Linear differential operators `L = Σ a_α ∂^α` of order at most two and
//! their formal adjoints `L*φ = Σ (-1)^|α| ∂^α (a_α φ)`.

use std::fmt;
use std::sync::Arc;

use crate::config::KeyValues;
use crate::error::{Error, Result};

use super::bump::BumpTestFunction;

/// A coefficient function together with its partial derivatives.
pub trait CoefficientFn: Send + Sync {
    /// `∂^α a(z)`, or `None` when that derivative is not supplied.
    fn derivative(&self, z: &[f64], alpha: &[u8]) -> Option<f64>;
}

#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function(Arc<dyn CoefficientFn>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Coefficient {
    fn derivative(&self, z: &[f64], alpha: &[u8]) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(if alpha.iter().all(|&a| a == 0) { *c } else { 0.0 }),
            Coefficient::Function(f) => f.derivative(z, alpha),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub alpha: Vec<u8>,
    pub coeff: Coefficient,
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    dim: usize,
    terms: Vec<Term>,
}

impl OperatorSpec {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.alpha.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.alpha.len() });
            }
            let order: u32 = t.alpha.iter().map(|&a| a as u32).sum();
            if order > 2 {
                return Err(Error::InvalidSpec(format!("operator order {order} exceeds 2")));
            }
        }
        Ok(OperatorSpec { dim, terms })
    }

    /// `∂_x + ∂_y` on the plane.
    pub fn transport2d() -> Self {
        Self::constant(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]).expect("valid operator")
    }

    /// `(1/c²) ∂_tt - Δ` on `(x, y, z, t)`.
    pub fn dalembert(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidSpec(format!("wave speed must be positive, got {c}")));
        }
        Self::constant(
            4,
            &[(&[0, 0, 0, 2], 1.0 / (c * c)), (&[2, 0, 0, 0], -1.0), (&[0, 2, 0, 0], -1.0), (&[0, 0, 2, 0], -1.0)],
        )
    }

    pub fn constant(dim: usize, terms: &[(&[u8], f64)]) -> Result<Self> {
        Self::new(
            dim,
            terms.iter().map(|(a, c)| Term { alpha: a.to_vec(), coeff: Coefficient::Constant(*c) }).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Builds `op=dalembert c=..`, `op=transport2d` or
    /// `op=custom terms=[(1,0;1.0),(0,2;-0.5)]`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        match kv.require("op")? {
            "dalembert" => Self::dalembert(kv.f64("c")?),
            "transport2d" => Ok(Self::transport2d()),
            "custom" => parse_custom_terms(kv.require("terms")?),
            other => Err(Error::Parse(format!("unknown operator `{other}`"))),
        }
    }

    /// `L*φ` as a callable; checks that every coefficient supplies the
    /// derivatives the Leibniz expansion needs.
    pub fn adjoint<'a>(&'a self, phi: &'a BumpTestFunction) -> Result<AdjointTestFunction<'a>> {
        if phi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: phi.dim() });
        }
        let probe = phi.center.clone();
        for (ti, t) in self.terms.iter().enumerate() {
            for gamma in sub_indices(&t.alpha) {
                if t.coeff.derivative(&probe, &gamma).is_none() {
                    return Err(Error::MissingCoefficientDerivative {
                        term: ti,
                        order: gamma.iter().map(|&g| g as usize).sum(),
                    });
                }
            }
        }
        Ok(AdjointTestFunction { op: self, phi })
    }
}

/// All multi-indices `γ ≤ α` componentwise.
fn sub_indices(alpha: &[u8]) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=a).map(move |g| {
                    let mut v = prefix.clone();
                    v.push(g);
                    v
                })
            })
            .collect();
    }
    out
}

fn binomial(n: u8, k: u8) -> f64 {
    match (n, k) {
        (_, 0) => 1.0,
        (n, k) if k == n => 1.0,
        (2, 1) => 2.0,
        _ => unreachable!("orders are capped at 2"),
    }
}

/// The adjoint `L*φ` of an operator applied to a bump.
#[derive(Debug, Clone, Copy)]
pub struct AdjointTestFunction<'a> {
    op: &'a OperatorSpec,
    phi: &'a BumpTestFunction,
}

impl AdjointTestFunction<'_> {
    pub fn bump(&self) -> &BumpTestFunction {
        self.phi
    }

    /// `Σ_α (-1)^|α| Σ_{β ≤ α} C(α,β) ∂^{α-β} a_α ∂^β φ`; exactly zero outside
    /// the support of φ.
    pub fn eval(&self, z: &[f64]) -> f64 {
        if !self.phi.contains(z) {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in &self.op.terms {
            let order: u8 = t.alpha.iter().sum();
            let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
            let mut term = 0.0;
            for beta in sub_indices(&t.alpha) {
                let rest: Vec<u8> = t.alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
                let c: f64 = t.alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
                let da = t.coeff.derivative(z, &rest).expect("checked when the adjoint was built");
                if da == 0.0 {
                    continue;
                }
                let dphi = self.phi.derivative(z, &beta).expect("order checked at construction");
                term += c * da * dphi;
            }
            acc += sign * term;
        }
        acc
    }
}

/// `terms=[(1,0;1.0),(0,1;1.0)]`: each entry is a multi-index and a constant.
fn parse_custom_terms(s: &str) -> Result<OperatorSpec> {
    let body = s
        .trim()
        .strip_prefix('[')
        .and_then(|b| b.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("`terms`: expected [(..;..),...], got `{s}`")))?;
    let mut terms = Vec::new();
    let mut dim = None;
    for raw in body.split(')') {
        let raw = raw.trim().trim_start_matches(',').trim();
        if raw.is_empty() {
            continue;
        }
        let inner = raw.strip_prefix('(').ok_or_else(|| Error::Parse(format!("`terms`: malformed entry `{raw}`")))?;
        let (alpha, coeff) =
            inner.split_once(';').ok_or_else(|| Error::Parse(format!("`terms`: entry `{raw}` lacks `;`")))?;
        let alpha: Vec<u8> = alpha
            .split(',')
            .map(|a| a.trim().parse::<u8>().map_err(|_| Error::Parse(format!("`terms`: bad index `{a}`"))))
            .collect::<Result<_>>()?;
        if *dim.get_or_insert(alpha.len()) != alpha.len() {
            return Err(Error::Parse("`terms`: multi-indices differ in length".into()));
        }
        let c = crate::kernel::parse_f64("terms", coeff)?;
        terms.push(Term { alpha, coeff: Coefficient::Constant(c) });
    }
    let dim = dim.ok_or_else(|| Error::Parse("`terms` is empty".into()))?;
    OperatorSpec::new(dim, terms)
}

pub fn apply_adjoint<'a>(op: &'a OperatorSpec, phi: &'a BumpTestFunction) -> Result<AdjointTestFunction<'a>> {
    op.adjoint(phi)
}
