//! Central finite differences.
//!
//! The default step for coordinate i is ε^{1/3}·max(1, |xᵢ|), with ε the
//! f64 machine epsilon. It is fixed so validation runs are deterministic.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// ε^{1/3}·max(1, |xᵢ|)
    Scaled,
    /// The same absolute step for every coordinate.
    Fixed(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Scaled
    }
}

impl StepRule {
    pub fn step(self, xi: f64) -> f64 {
        match self {
            StepRule::Scaled => f64::EPSILON.cbrt() * xi.abs().max(1.0),
            StepRule::Fixed(h) => h,
        }
    }
}

fn probe<F>(f: &F, x: &[f64], i: usize, delta: f64, scratch: &mut Vec<f64>) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    scratch.clear();
    scratch.extend_from_slice(x);
    scratch[i] += delta;
    let v = f(scratch)?;
    if !v.is_finite() {
        return Err(Error::NonFiniteEvaluation(format!("{scratch:?}")));
    }
    Ok(v)
}

/// Central-difference gradient of a scalar field.
pub fn central_grad<F>(f: F, x: &[f64], rule: StepRule) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut scratch = Vec::with_capacity(x.len());
    (0..x.len())
        .map(|i| {
            let h = rule.step(x[i]);
            let up = probe(&f, x, i, h, &mut scratch)?;
            let down = probe(&f, x, i, -h, &mut scratch)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Central-difference Jacobian of a vector field; row k holds ∂fₖ/∂x.
pub fn central_jacobian<F>(f: F, x: &[f64], rule: StepRule) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let d = x.len();
    let mut jac: Option<Matrix> = None;
    let mut scratch = x.to_vec();
    for i in 0..d {
        let h = rule.step(x[i]);
        scratch.copy_from_slice(x);
        scratch[i] = x[i] + h;
        let up = f(&scratch)?;
        scratch[i] = x[i] - h;
        let down = f(&scratch)?;
        let m = up.len();
        let jac = jac.get_or_insert_with(|| Matrix::zeros(m, d));
        for k in 0..m {
            let v = (up[k] - down[k]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::NonFiniteEvaluation(format!(
                    "component {k} along coordinate {i}"
                )));
            }
            jac[(k, i)] = v;
        }
    }
    Ok(jac.unwrap_or_else(|| Matrix::zeros(0, 0)))
}
