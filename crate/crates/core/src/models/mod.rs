//! Parametric families.
//!
//! All densities, scores, Hessians, third derivatives and Fisher matrices
//! are **per observation**. Sample-level quantities (the full-sample
//! information K = n·I, the log-likelihood of a data set) are formed by
//! explicit scaling or summation at the call site.

mod dataset;
mod exponential;
mod weibull;

pub use dataset::DataSet;
pub use exponential::Exponential;
pub use weibull::{
    weibull_bias_ratio, weibull_mle_bias_closed, weibull_mml_bias_closed, Weibull, APERY_ZETA3,
    EULER_GAMMA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{central_jacobian, Matrix, RngStream, StepRule};

/// A parameter vector θ together with the coordinates constrained to (0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    values: Vec<f64>,
    positive: Vec<bool>,
}

impl ParamPoint {
    pub fn new(values: Vec<f64>, positive: Vec<bool>) -> Result<Self> {
        if values.len() != positive.len() {
            return Err(Error::invalid(format!(
                "{} values but {} positivity flags",
                values.len(),
                positive.len()
            )));
        }
        check_admissible(&values, &positive)?;
        Ok(Self { values, positive })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positivity(&self) -> &[bool] {
        &self.positive
    }

    pub fn is_admissible(&self, values: &[f64]) -> bool {
        values.len() == self.values.len() && check_admissible(values, &self.positive).is_ok()
    }

    /// Same positivity mask, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.positive.clone())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_admissible(values: &[f64], positive: &[bool]) -> Result<()> {
    for (i, (v, p)) in values.iter().zip(positive).enumerate() {
        if !v.is_finite() {
            return Err(Error::domain(format!("parameter {i} is not finite ({v})")));
        }
        if *p && *v <= 0.0 {
            return Err(Error::domain(format!("parameter {i} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Contract for a regular parametric family of positive observations.
///
/// Derivative methods take a raw parameter slice already validated by
/// [`Model::check_params`] and write row-major into `out`; they are called in
/// tight loops and do not re-check the domain.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn param_names(&self) -> &'static [&'static str];

    fn positivity(&self) -> Vec<bool> {
        vec![true; self.dim()]
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.dim(),
                theta.len()
            )));
        }
        check_admissible(theta, &self.positivity())
    }

    fn point(&self, theta: &[f64]) -> Result<ParamPoint> {
        self.check_params(theta)?;
        ParamPoint::new(theta.to_vec(), self.positivity())
    }

    /// log p(x | θ).
    fn logpdf(&self, theta: &[f64], x: f64) -> Result<f64>;

    /// ℓᵢ, length d.
    fn grad(&self, theta: &[f64], x: f64, out: &mut [f64]);

    /// ℓᵢⱼ, d×d row-major.
    fn hess(&self, theta: &[f64], x: f64, out: &mut [f64]);

    /// ℓᵢⱼₗ, d×d×d with the last index fastest.
    ///
    /// The default differentiates [`Model::hess`] by central differences.
    fn third(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let d = self.dim();
        let jac = central_jacobian(
            |t| {
                let mut h = vec![0.0; d * d];
                self.hess(t, x, &mut h);
                Ok(h)
            },
            theta,
            StepRule::Scaled,
        )
        .expect("hessian finite near an admissible point");
        for ij in 0..d * d {
            for l in 0..d {
                out[ij * d + l] = jac[(ij, l)];
            }
        }
    }

    /// Per-observation expected Fisher information I(θ).
    fn fisher(&self, theta: &[f64]) -> Result<Matrix>;

    /// ∇ log|I(θ)| when the family knows it in closed form.
    fn log_det_fisher_grad(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Maps a unit-exponential variate u to an observation x with density
    /// p(x | θ). Quadrature and sampling both go through this map.
    fn from_unit_exponential(&self, theta: &[f64], u: f64) -> f64;

    /// Starting point for Newton iterations.
    fn initial_guess(&self, data: &DataSet) -> Result<Vec<f64>>;

    /// Observations must lie in the support.
    fn check_data(&self, data: &DataSet) -> Result<()> {
        match data.observations().iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            Some(i) => Err(Error::domain(format!(
                "observation {} = {} is outside the support (0, ∞)",
                i + 1,
                data.observations()[i]
            ))),
            None => Ok(()),
        }
    }

    /// n i.i.d. draws; deterministic for a given stream.
    fn sample(&self, theta: &ParamPoint, n: usize, rng: RngStream) -> Result<DataSet> {
        self.check_params(theta.values())?;
        let mut g = rng.generator();
        let th = theta.values();
        let obs = (0..n)
            .map(|_| self.from_unit_exponential(th, g.unit_exponential()))
            .collect();
        DataSet::new(obs)
    }

    /// Σ log p(xᵢ | θ).
    fn loglik(&self, theta: &[f64], data: &DataSet) -> Result<f64> {
        let mut s = 0.0;
        for &x in data.observations() {
            s += self.logpdf(theta, x)?;
        }
        Ok(s)
    }
}

/// Selects one of the built-in families by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Weibull,
    Exponential,
}

impl ModelId {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "weibull" => Ok(ModelId::Weibull),
            "exponential" | "exp" => Ok(ModelId::Exponential),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected weibull or exponential)"
            ))),
        }
    }

    pub fn model(self) -> &'static dyn Model {
        match self {
            ModelId::Weibull => &Weibull,
            ModelId::Exponential => &Exponential,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.model().name()
    }
}
