//! Two-parameter Weibull family, θ = (k, λ) with shape k > 0 and scale λ > 0:
//!
//! ```text
//! f(x | k, λ) = (k/λ) (x/λ)^{k-1} exp{-(x/λ)^k},   x > 0
//! ```
//!
//! Derivatives are written in terms of L = log(x/λ) and z = (x/λ)^k; under
//! the model z is unit exponential, which is what the quadrature exploits.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::{DataSet, Model, ParamPoint};
use crate::numerics::Matrix;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// ζ(3), Apéry's constant.
pub const APERY_ZETA3: f64 = 1.202_056_903_159_594_3;

#[derive(Debug, Clone, Copy, Default)]
pub struct Weibull;

impl Weibull {
    pub fn params(&self, shape: f64, scale: f64) -> Result<ParamPoint> {
        self.point(&[shape, scale])
    }

    #[inline]
    fn lz(theta: &[f64], x: f64) -> (f64, f64) {
        let l = (x / theta[1]).ln();
        (l, (theta[0] * l).exp())
    }
}

impl Model for Weibull {
    fn name(&self) -> &'static str {
        "weibull"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["k", "lambda"]
    }

    fn logpdf(&self, theta: &[f64], x: f64) -> Result<f64> {
        self.check_params(theta)?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!(
                "weibull observation must be positive and finite, got {x}"
            )));
        }
        let (k, lam) = (theta[0], theta[1]);
        let (l, z) = Self::lz(theta, x);
        Ok(k.ln() - lam.ln() + (k - 1.0) * l - z)
    }

    fn grad(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let (k, lam) = (theta[0], theta[1]);
        let (l, z) = Self::lz(theta, x);
        out[0] = 1.0 / k + l - z * l;
        out[1] = (k / lam) * (z - 1.0);
    }

    fn hess(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let (k, lam) = (theta[0], theta[1]);
        let (l, z) = Self::lz(theta, x);
        let kl = (z - 1.0 + k * z * l) / lam;
        out[0] = -1.0 / (k * k) - z * l * l;
        out[1] = kl;
        out[2] = kl;
        out[3] = (k / (lam * lam)) * (1.0 - (k + 1.0) * z);
    }

    fn third(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let (k, lam) = (theta[0], theta[1]);
        let (l, z) = Self::lz(theta, x);
        let kkk = 2.0 / (k * k * k) - z * l * l * l;
        let kkl = z * l * (k * l + 2.0) / lam;
        let kll = (1.0 - (2.0 * k + 1.0) * z - k * (k + 1.0) * z * l) / (lam * lam);
        let lll = (k / (lam * lam * lam)) * ((k + 1.0) * (k + 2.0) * z - 2.0);
        // index (i, j, l) -> 4i + 2j + l
        out[0] = kkk;
        out[1] = kkl;
        out[2] = kkl;
        out[3] = kll;
        out[4] = kkl;
        out[5] = kll;
        out[6] = kll;
        out[7] = lll;
    }

    fn fisher(&self, theta: &[f64]) -> Result<Matrix> {
        self.check_params(theta)?;
        let (k, lam) = (theta[0], theta[1]);
        let g1 = EULER_GAMMA - 1.0;
        let off = g1 / lam;
        Ok(Matrix::from_row_major(
            2,
            2,
            vec![
                (6.0 * g1 * g1 + PI * PI) / (6.0 * k * k),
                off,
                off,
                (k * k) / (lam * lam),
            ],
        ))
    }

    /// |I(θ)| = π²/(6λ²), so ∇log|I| = (0, −2/λ).
    fn log_det_fisher_grad(&self, theta: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0, -2.0 / theta[1]])
    }

    fn from_unit_exponential(&self, theta: &[f64], u: f64) -> f64 {
        theta[1] * u.powf(1.0 / theta[0])
    }

    /// k₀ = 1.28 / sd(log x), λ₀ = exp(mean(log x) + γ/k₀).
    fn initial_guess(&self, data: &DataSet) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let logs: Vec<f64> = data.observations().iter().map(|x| x.ln()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateData(
                "all observations are equal (sd of log x is 0)".into(),
            ));
        }
        let k0 = 1.28 / sd;
        Ok(vec![k0, (mean + EULER_GAMMA / k0).exp()])
    }
}

fn weibull_theta(theta: &ParamPoint, n: usize) -> Result<(f64, f64, f64)> {
    Weibull.check_params(theta.values())?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    Ok((theta.values()[0], theta.values()[1], n as f64))
}

/// First-order bias of the Weibull MLE in closed form.
pub fn weibull_mle_bias_closed(theta: &ParamPoint, n: usize) -> Result<Vec<f64>> {
    let (k, lam, n) = weibull_theta(theta, n)?;
    let g = EULER_GAMMA;
    let z3 = APERY_ZETA3;
    let pi2 = PI * PI;
    let pi4 = pi2 * pi2;
    let shape = 18.0 * k * (pi2 - 2.0 * z3) / pi4;
    let scale = lam
        * (72.0 * (g - 1.0) * k * z3
            + 6.0 * pi2 * (5.0 * k + g * (-4.0 * k + g - 2.0) + 1.0)
            + pi4 * (1.0 - 2.0 * k))
        / (2.0 * pi4 * k * k);
    Ok(vec![shape / n, scale / n])
}

/// First-order bias of the Wallace–Freeman estimator for the Weibull with
/// independent unit half-Cauchy priors on k and λ, in closed form.
pub fn weibull_mml_bias_closed(theta: &ParamPoint, n: usize) -> Result<Vec<f64>> {
    let mle = weibull_mle_bias_closed(theta, n)?;
    let (k, lam, n) = weibull_theta(theta, n)?;
    let g1 = EULER_GAMMA - 1.0;
    let pi2 = PI * PI;
    let lam_ratio = (lam * lam - 1.0) / (lam * lam + 1.0);
    let k_ratio = k * k * k / (k * k + 1.0);
    let shape = (6.0 / pi2) * (g1 * lam_ratio - 2.0 * k_ratio);
    let scale = (lam / (pi2 * k * k))
        * (12.0 * g1 * k_ratio - (6.0 * g1 * g1 + pi2) * lam_ratio);
    Ok(vec![mle[0] + shape / n, mle[1] + scale / n])
}

/// Ratio of the MLE to the Wallace–Freeman first-order shape bias at λ = 1.
pub fn weibull_bias_ratio(k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("shape must be positive, got {k}")));
    }
    let pi2 = PI * PI;
    let k2 = k * k;
    let denom = pi2 * (k2 + 3.0) - 6.0 * (k2 + 1.0) * APERY_ZETA3;
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "bias ratio denominator {denom} is not positive at k = {k}"
        )));
    }
    Ok(3.0 * (k2 + 1.0) * (pi2 - 2.0 * APERY_ZETA3) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_grad, RngStream, StepRule};
    use approx::assert_relative_eq;

    #[test]
    fn logpdf_values() {
        let w = Weibull;
        assert_relative_eq!(w.logpdf(&[1.0, 1.0], 1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_relative_eq!(
            w.logpdf(&[2.0, 1.0], 1.0).unwrap(),
            2f64.ln() - 1.0,
            epsilon = 1e-15
        );
        assert!((w.logpdf(&[2.0, 1.0], 1.0).unwrap() + 0.306853).abs() < 1e-6);
    }

    #[test]
    fn logpdf_domain_errors() {
        let w = Weibull;
        assert!(matches!(w.logpdf(&[1.0, 2.0], 0.0), Err(Error::Domain(_))));
        assert!(matches!(w.logpdf(&[1.0, 2.0], -1.0), Err(Error::Domain(_))));
        assert!(matches!(w.logpdf(&[0.0, 2.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(w.logpdf(&[1.0, -2.0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fisher_at_unit() {
        let i = Weibull.fisher(&[1.0, 1.0]).unwrap();
        assert!((i[(0, 0)] - 1.823680).abs() < 1e-6);
        assert!((i[(0, 1)] + 0.422784).abs() < 1e-6);
        assert_eq!(i[(0, 1)], i[(1, 0)]);
        assert_eq!(i[(1, 1)], 1.0);
        assert!((i.det_spd().unwrap() - 1.644934).abs() < 1e-6);
    }

    #[test]
    fn fisher_determinant_identity() {
        for &k in &[0.3, 0.5, 1.0, 2.0, 7.0] {
            for &lam in &[0.1, 0.5, 1.0, 2.0, 30.0] {
                let det = Weibull.fisher(&[k, lam]).unwrap().det_spd().unwrap();
                let ratio = det * 6.0 * lam * lam / (PI * PI);
                assert!((ratio - 1.0).abs() < 1e-12, "k={k} lam={lam}: {ratio}");
            }
        }
    }

    #[test]
    fn fisher_domain_error() {
        assert!(matches!(Weibull.fisher(&[-1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_matches_central_differences_at_one() {
        let w = Weibull;
        let mut g = [0.0; 2];
        w.grad(&[1.0, 1.0], 1.0, &mut g);
        let fd = central_grad(|t| w.logpdf(t, 1.0), &[1.0, 1.0], StepRule::Scaled).unwrap();
        for i in 0..2 {
            assert!((g[i] - fd[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_positive() {
        let th = Weibull.params(2.0, 1.0).unwrap();
        let a = Weibull.sample(&th, 500, RngStream::new(7, 0)).unwrap();
        let b = Weibull.sample(&th, 500, RngStream::new(7, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.observations().iter().all(|&x| x > 0.0));
        let c = Weibull.sample(&th, 500, RngStream::new(7, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_means() {
        let n = 1_000_000;
        let unit = Weibull.params(1.0, 1.0).unwrap();
        let d = Weibull.sample(&unit, n, RngStream::new(2024, 0)).unwrap();
        let mean = d.observations().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.004, "mean {mean}");

        let rayleigh = Weibull.params(2.0, 1.0).unwrap();
        let d = Weibull.sample(&rayleigh, n, RngStream::new(2024, 1)).unwrap();
        let mean = d.observations().iter().sum::<f64>() / n as f64;
        // Γ(1.5)
        assert!((mean - 0.886_226_925_452_758).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn constant_data_is_degenerate() {
        let d = DataSet::new(vec![1.0; 10]).unwrap();
        assert!(matches!(Weibull.initial_guess(&d), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn shape_bias_coefficient() {
        let th = Weibull.params(1.0, 1.0).unwrap();
        let coef = weibull_mle_bias_closed(&th, 1).unwrap()[0];
        assert!((1.379..=1.380).contains(&coef), "{coef}");
        let th = Weibull.params(2.0, 1.0).unwrap();
        let b = weibull_mle_bias_closed(&th, 100).unwrap();
        assert!((b[0] - 0.027590).abs() < 1e-6, "{}", b[0]);
    }

    #[test]
    fn mml_bias_at_two_one() {
        let th = Weibull.params(2.0, 1.0).unwrap();
        let mle = weibull_mle_bias_closed(&th, 100).unwrap();
        let mml = weibull_mml_bias_closed(&th, 100).unwrap();
        assert!((mml[0] - mle[0] + 0.019454).abs() < 1e-6);
        assert!((mml[0] - 0.008136).abs() < 1e-6, "{}", mml[0]);
        // λ = 1 leaves only the 12(γ−1)k/(π²(k²+1)) scale correction
        let expected = 12.0 * (EULER_GAMMA - 1.0) * 2.0 / (PI * PI * 5.0) / 100.0;
        assert!((mml[1] - mle[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn ratio_values() {
        assert!((weibull_bias_ratio(1.0).unwrap() - 1.78788).abs() < 1e-5);
        for &k in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            assert!(weibull_bias_ratio(k).unwrap() > 1.0);
        }
        // k → 0⁺ limit is exactly one
        assert!((weibull_bias_ratio(1e-4).unwrap() - 1.0).abs() < 1e-6);
        assert!(weibull_bias_ratio(0.0).is_err());
    }

    #[test]
    fn ratio_equals_quotient_of_closed_forms() {
        for &k in &[0.5, 1.0, 2.0, 5.0] {
            let th = Weibull.params(k, 1.0).unwrap();
            let mle = weibull_mle_bias_closed(&th, 50).unwrap()[0];
            let mml = weibull_mml_bias_closed(&th, 50).unwrap()[0];
            assert_relative_eq!(mle / mml, weibull_bias_ratio(k).unwrap(), max_relative = 1e-12);
        }
    }
}
