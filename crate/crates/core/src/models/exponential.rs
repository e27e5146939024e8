//! One-parameter exponential family f(x | θ) = θ e^{−θx}, a d = 1 reference
//! model whose cumulants are all available by hand.

use crate::error::{Error, Result};
use crate::models::{DataSet, Model, ParamPoint};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl Exponential {
    pub fn rate(&self, theta: f64) -> Result<ParamPoint> {
        self.point(&[theta])
    }
}

impl Model for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }

    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn logpdf(&self, theta: &[f64], x: f64) -> Result<f64> {
        self.check_params(theta)?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!(
                "exponential observation must be positive and finite, got {x}"
            )));
        }
        Ok(theta[0].ln() - theta[0] * x)
    }

    fn grad(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        out[0] = 1.0 / theta[0] - x;
    }

    fn hess(&self, theta: &[f64], _x: f64, out: &mut [f64]) {
        out[0] = -1.0 / (theta[0] * theta[0]);
    }

    fn third(&self, theta: &[f64], _x: f64, out: &mut [f64]) {
        out[0] = 2.0 / theta[0].powi(3);
    }

    fn fisher(&self, theta: &[f64]) -> Result<Matrix> {
        self.check_params(theta)?;
        Ok(Matrix::from_row_major(1, 1, vec![1.0 / (theta[0] * theta[0])]))
    }

    fn log_det_fisher_grad(&self, theta: &[f64]) -> Option<Vec<f64>> {
        Some(vec![-2.0 / theta[0]])
    }

    fn from_unit_exponential(&self, theta: &[f64], u: f64) -> f64 {
        u / theta[0]
    }

    fn initial_guess(&self, data: &DataSet) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let mean = data.observations().iter().sum::<f64>() / data.n() as f64;
        Ok(vec![1.0 / mean])
    }
}
