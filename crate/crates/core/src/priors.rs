//! Priors and the Wallace–Freeman penalty
//!
//! ```text
//! pen(θ) = −log π(θ) + ½ log|I(θ)|
//! a(θ)   = −∇pen(θ) = ∇log π(θ) − ½ ∇log|I(θ)|
//! ```
//!
//! with I the per-observation Fisher information. The 1/n weight is applied
//! by the estimator, not here. Improper priors (flat, Jeffreys, |I|) drop
//! their normalising constants; only gradients and θ-differences of the
//! penalty are meaningful for them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::{Model, ParamPoint};
use crate::numerics::{central_grad, central_jacobian, Matrix, StepRule};

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// User-supplied prior; `proper` states whether `log_density` is normalised.
#[derive(Clone)]
pub struct CustomPrior {
    pub name: String,
    pub proper: bool,
    pub log_density: Arc<LogDensityFn>,
    pub grad_log_density: Arc<GradFn>,
}

#[derive(Clone)]
pub enum Prior {
    /// π ∝ 1
    Flat,
    /// π ∝ |I(θ)|^{1/2}
    Jeffreys,
    /// π ∝ |I(θ)|
    FisherSquared,
    /// Independent half-Cauchy on every coordinate, density
    /// 2/(π s (1 + (t/s)²)) on (0, ∞).
    HalfCauchy { scale: f64 },
    Custom(CustomPrior),
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Flat => write!(f, "Flat"),
            Prior::Jeffreys => write!(f, "Jeffreys"),
            Prior::FisherSquared => write!(f, "FisherSquared"),
            Prior::HalfCauchy { scale } => write!(f, "HalfCauchy {{ scale: {scale} }}"),
            Prior::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl Prior {
    pub fn half_cauchy() -> Self {
        Prior::HalfCauchy { scale: 1.0 }
    }

    /// Parses `flat`, `jeffreys`, `fisher_squared` or `half_cauchy`.
    pub fn from_name(name: &str, scale: Option<f64>) -> Result<Self> {
        let prior = match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "flat" | "uniform" => Prior::Flat,
            "jeffreys" => Prior::Jeffreys,
            "fisher_squared" | "firth" => Prior::FisherSquared,
            "half_cauchy" | "halfcauchy" => {
                let scale = scale.unwrap_or(1.0);
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::invalid(format!(
                        "half-Cauchy scale must be positive, got {scale}"
                    )));
                }
                Prior::HalfCauchy { scale }
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown prior '{other}' (expected flat, jeffreys, fisher_squared, half_cauchy)"
                )))
            }
        };
        if scale.is_some() && !matches!(prior, Prior::HalfCauchy { .. }) {
            return Err(Error::invalid(format!("prior '{name}' takes no scale")));
        }
        Ok(prior)
    }

    pub fn name(&self) -> &str {
        match self {
            Prior::Flat => "flat",
            Prior::Jeffreys => "jeffreys",
            Prior::FisherSquared => "fisher_squared",
            Prior::HalfCauchy { .. } => "half_cauchy",
            Prior::Custom(c) => &c.name,
        }
    }

    pub fn is_proper(&self) -> bool {
        match self {
            Prior::HalfCauchy { .. } => true,
            Prior::Custom(c) => c.proper,
            _ => false,
        }
    }

    pub fn log_density<M: Model + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<f64> {
        model.check_params(theta)?;
        match self {
            Prior::Flat => Ok(0.0),
            Prior::Jeffreys => Ok(0.5 * model.fisher(theta)?.log_det_spd()?),
            Prior::FisherSquared => model.fisher(theta)?.log_det_spd(),
            Prior::HalfCauchy { scale } => {
                let s = *scale;
                Ok(theta
                    .iter()
                    .map(|t| (2.0 / PI).ln() - s.ln() - (1.0 + (t / s) * (t / s)).ln())
                    .sum())
            }
            Prior::Custom(c) => {
                let v = (c.log_density)(theta);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteEvaluation(format!(
                        "prior '{}' at {theta:?}",
                        c.name
                    )))
                }
            }
        }
    }

    pub fn grad_log_density<M: Model + ?Sized>(&self, model: &M, theta: &[f64]) -> Result<Vec<f64>> {
        model.check_params(theta)?;
        match self {
            Prior::Flat => Ok(vec![0.0; theta.len()]),
            Prior::Jeffreys => Ok(log_det_fisher_grad(model, theta)?
                .into_iter()
                .map(|g| 0.5 * g)
                .collect()),
            Prior::FisherSquared => log_det_fisher_grad(model, theta),
            Prior::HalfCauchy { scale } => {
                let s2 = scale * scale;
                Ok(theta.iter().map(|t| -2.0 * t / (s2 + t * t)).collect())
            }
            Prior::Custom(c) => Ok((c.grad_log_density)(theta)),
        }
    }
}

/// ∇log|I(θ)|: closed form when the family provides it, otherwise central
/// differences of log det I.
pub fn log_det_fisher_grad<M: Model + ?Sized>(model: &M, theta: &[f64]) -> Result<Vec<f64>> {
    match model.log_det_fisher_grad(theta) {
        Some(g) => Ok(g),
        None => log_det_fisher_grad_numeric(model, theta),
    }
}

pub fn log_det_fisher_grad_numeric<M: Model + ?Sized>(model: &M, theta: &[f64]) -> Result<Vec<f64>> {
    central_grad(|t| model.fisher(t)?.log_det_spd(), theta, StepRule::Scaled)
}

/// pen(θ) = −log π(θ) + ½ log|I(θ)|.
pub fn penalty<M: Model + ?Sized>(model: &M, prior: &Prior, theta: &ParamPoint) -> Result<f64> {
    penalty_at(model, prior, theta.values())
}

pub(crate) fn penalty_at<M: Model + ?Sized>(model: &M, prior: &Prior, theta: &[f64]) -> Result<f64> {
    let log_det = model.fisher(theta)?.log_det_spd()?;
    match prior {
        // the two terms cancel identically
        Prior::Jeffreys => Ok(0.0),
        _ => Ok(-prior.log_density(model, theta)? + 0.5 * log_det),
    }
}

/// a(θ) = ∇log π(θ) − ½∇log|I(θ)|, the negative penalty gradient.
pub fn penalty_gradient_a<M: Model + ?Sized>(model: &M, prior: &Prior, theta: &ParamPoint) -> Result<Vec<f64>> {
    penalty_gradient_at(model, prior, theta.values())
}

pub(crate) fn penalty_gradient_at<M: Model + ?Sized>(model: &M, prior: &Prior, theta: &[f64]) -> Result<Vec<f64>> {
    if let Prior::Jeffreys = prior {
        model.check_params(theta)?;
        return Ok(vec![0.0; theta.len()]);
    }
    let g_prior = prior.grad_log_density(model, theta)?;
    let g_det = log_det_fisher_grad(model, theta)?;
    Ok(g_prior
        .iter()
        .zip(&g_det)
        .map(|(p, d)| p - 0.5 * d)
        .collect())
}

/// ∇²pen(θ) = −∂a/∂θ by central differences of a, symmetrised.
pub fn penalty_hessian<M: Model + ?Sized>(model: &M, prior: &Prior, theta: &[f64]) -> Result<Matrix> {
    let d = theta.len();
    if let Prior::Jeffreys = prior {
        return Ok(Matrix::zeros(d, d));
    }
    let jac = central_jacobian(|t| penalty_gradient_at(model, prior, t), theta, StepRule::Scaled)?;
    let mut h = jac.scale(-1.0);
    h.symmetrize();
    Ok(h)
}
