//! Maximum likelihood and Wallace–Freeman estimation.
//!
//! Both estimators minimise a criterion of the form
//!
//! ```text
//! Q_n(θ) = (1/n) Σ −log p(xᵢ | θ) + λ_n pen(θ),   λ_n = 1/n
//! ```
//!
//! with pen ≡ 0 for the MLE. The solver is damped Newton on the stationarity
//! equation Ψ_n(θ) = ∇Q_n(θ) = 0 in the natural parameterisation. Steps are
//! halved until every positive coordinate stays positive and Q_n does not
//! increase. When the Hessian is not positive definite at an iterate the
//! step falls back to Fisher scoring.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{DataSet, Model, ParamPoint};
use crate::numerics::{solve_spd, Matrix};
use crate::priors::{penalty_at, penalty_gradient_at, penalty_hessian, Prior};

pub const MAX_ITERATIONS: usize = 200;
/// Convergence threshold on ‖Ψ_n‖∞.
pub const STATIONARITY_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-12;
/// Points closer than this (relative) are the same stationary point.
const SAME_POINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub theta_hat: ParamPoint,
    /// Q_n at `theta_hat`.
    pub objective: f64,
    /// ‖Ψ_n(θ̂)‖∞.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// −∇²ℓ(θ̂) summed over the sample (no penalty).
    pub observed_info: Matrix,
    /// Distinct stationary points found over all starting values.
    pub stationary_points: usize,
    pub fisher_scoring_steps: usize,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

struct Criterion<'a> {
    model: &'a dyn Model,
    prior: Option<&'a Prior>,
    data: &'a DataSet,
    n: f64,
}

struct Evaluation {
    value: f64,
    gradient: Vec<f64>,
    hessian: Matrix,
    observed_info: Matrix,
}

impl<'a> Criterion<'a> {
    fn value(&self, theta: &[f64]) -> Result<f64> {
        let ll = self.model.loglik(theta, self.data)?;
        let pen = match self.prior {
            Some(p) => penalty_at(self.model, p, theta)?,
            None => 0.0,
        };
        let v = (-ll + pen) / self.n;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation(format!("criterion at {theta:?}")))
        }
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let d = self.model.dim();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut gi = vec![0.0; d];
        let mut hi = vec![0.0; d * d];
        for &x in self.data.observations() {
            self.model.grad(theta, x, &mut gi);
            self.model.hess(theta, x, &mut hi);
            for (a, b) in g.iter_mut().zip(&gi) {
                *a += b;
            }
            for (a, b) in h.iter_mut().zip(&hi) {
                *a += b;
            }
        }
        let mut observed_info = Matrix::from_row_major(d, d, h.iter().map(|v| -v).collect());
        observed_info.symmetrize();

        let mut gradient: Vec<f64> = g.iter().map(|v| -v / self.n).collect();
        let mut hessian = observed_info.scale(1.0 / self.n);
        if let Some(prior) = self.prior {
            let a = penalty_gradient_at(self.model, prior, theta)?;
            for (gi, ai) in gradient.iter_mut().zip(&a) {
                *gi -= ai / self.n;
            }
            hessian = hessian.add(&penalty_hessian(self.model, prior, theta)?.scale(1.0 / self.n));
        }
        if gradient.iter().any(|v| !v.is_finite()) || !hessian.is_finite() {
            return Err(Error::NonFiniteEvaluation(format!("derivatives at {theta:?}")));
        }
        Ok(Evaluation {
            value: self.value(theta)?,
            gradient,
            hessian,
            observed_info,
        })
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn newton(crit: &Criterion<'_>, start: &ParamPoint) -> Result<EstimateResult> {
    let model = crit.model;
    let mut theta = start.values().to_vec();
    let mut eval = crit.evaluate(&theta)?;
    let mut trace = vec![eval.value];
    let mut scoring_steps = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        if norm_inf(&eval.gradient) <= STATIONARITY_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let rhs: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
        let step = match solve_spd(&eval.hessian, &rhs) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. }) | Err(Error::NotSymmetric(_)) => {
                scoring_steps += 1;
                solve_spd(&model.fisher(&theta)?, &rhs)?
            }
            Err(e) => return Err(e),
        };

        let slack = 8.0 * f64::EPSILON * (1.0 + eval.value.abs());
        let mut t = 1.0;
        let mut accepted = None;
        while t >= MIN_STEP {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            if start.is_admissible(&cand) {
                if let Ok(v) = crit.value(&cand) {
                    if v <= eval.value + slack {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(cand) => {
                theta = cand;
                eval = crit.evaluate(&theta)?;
                trace.push(eval.value);
            }
            None => break,
        }
    }
    if !converged && norm_inf(&eval.gradient) <= STATIONARITY_TOL {
        converged = true;
    }

    Ok(EstimateResult {
        theta_hat: start.with_values(theta)?,
        objective: eval.value,
        residual: norm_inf(&eval.gradient),
        iterations,
        converged,
        observed_info: eval.observed_info,
        stationary_points: 1,
        fisher_scoring_steps: scoring_steps,
        objective_trace: trace,
    })
}

fn validate(model: &dyn Model, data: &DataSet) -> Result<()> {
    let d = model.dim();
    if data.n() < d + 1 {
        return Err(Error::invalid(format!(
            "need at least {} observations for {} parameters, got {}",
            d + 1,
            d,
            data.n()
        )));
    }
    model.check_data(data)?;
    if data.is_constant() {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    Ok(())
}

fn start_point(model: &dyn Model, data: &DataSet, init: Option<&ParamPoint>) -> Result<ParamPoint> {
    match init {
        Some(p) => {
            model.check_params(p.values())?;
            Ok(p.clone())
        }
        None => model.point(&model.initial_guess(data)?),
    }
}

fn require_converged(fit: EstimateResult) -> Result<EstimateResult> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NoConvergence {
            iterations: fit.iterations,
            residual: fit.residual,
        })
    }
}

/// Maximum likelihood estimate; `init = None` uses the family's auto start.
pub fn fit_mle(model: &dyn Model, data: &DataSet, init: Option<&ParamPoint>) -> Result<EstimateResult> {
    validate(model, data)?;
    let crit = Criterion {
        model,
        prior: None,
        data,
        n: data.n() as f64,
    };
    require_converged(newton(&crit, &start_point(model, data, init)?)?)
}

/// Wallace–Freeman estimate.
///
/// Without an explicit `init`, Newton is started both from the MLE and from
/// the family's auto start; if they reach different stationary points the
/// one with the smaller Q_n wins and `stationary_points` reports the count.
pub fn fit_wf(
    model: &dyn Model,
    prior: &Prior,
    data: &DataSet,
    init: Option<&ParamPoint>,
) -> Result<EstimateResult> {
    validate(model, data)?;
    let starts = match init {
        Some(p) => vec![start_point(model, data, Some(p))?],
        None => {
            let mle = fit_mle(model, data, None)?;
            vec![mle.theta_hat, start_point(model, data, None)?]
        }
    };
    fit_wf_from(model, prior, data, &starts)
}

/// Wallace–Freeman estimate from the given starting points.
pub fn fit_wf_from(
    model: &dyn Model,
    prior: &Prior,
    data: &DataSet,
    starts: &[ParamPoint],
) -> Result<EstimateResult> {
    validate(model, data)?;
    let crit = Criterion {
        model,
        prior: Some(prior),
        data,
        n: data.n() as f64,
    };
    let mut found: Vec<EstimateResult> = Vec::new();
    let mut last_failure = None;
    for start in starts {
        model.check_params(start.values())?;
        match newton(&crit, start) {
            Ok(fit) if fit.converged => found.push(fit),
            Ok(fit) => {
                last_failure = Some(Error::NoConvergence {
                    iterations: fit.iterations,
                    residual: fit.residual,
                })
            }
            Err(e) => last_failure = Some(e),
        }
    }
    let mut distinct: Vec<EstimateResult> = Vec::new();
    for fit in found {
        let same = distinct.iter().any(|d| {
            d.theta_hat
                .values()
                .iter()
                .zip(fit.theta_hat.values())
                .all(|(a, b)| (a - b).abs() <= SAME_POINT_TOL * a.abs().max(1.0))
        });
        if !same {
            distinct.push(fit);
        }
    }
    let count = distinct.len();
    let best = distinct
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective));
    match best {
        Some(mut fit) => {
            fit.stationary_points = count;
            Ok(fit)
        }
        None => Err(last_failure.unwrap_or_else(|| Error::invalid("no starting points"))),
    }
}

/// First-order MLE → Wallace–Freeman shift (1/n)·I(θ)⁻¹a(θ).
pub fn predicted_shift(model: &dyn Model, prior: &Prior, theta: &ParamPoint, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let fisher = model.fisher(theta.values())?;
    let a = penalty_gradient_at(model, prior, theta.values())?;
    let x = solve_spd(&fisher, &a)?;
    Ok(x.into_iter().map(|v| v / n as f64).collect())
}

/// Limiting covariance of √n(θ̂ − θ₀) under correct specification, I(θ)⁻¹.
pub fn asymptotic_cov(model: &dyn Model, theta: &ParamPoint) -> Result<Matrix> {
    model.fisher(theta.values())?.inverse_spd()
}

/// General limiting covariance A⁻¹BA⁻¹ for A = E∇ψ and B = Eψψᵀ.
pub fn sandwich_cov(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let a_inv = a.inverse_spd()?;
    let mut s = a_inv.matmul(b).matmul(&a_inv);
    s.symmetrize();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Exponential, Weibull};
    use crate::numerics::RngStream;
    use crate::priors::Prior;

    fn weibull_data(k: f64, lam: f64, n: usize, seed: u64) -> DataSet {
        Weibull
            .sample(&Weibull.params(k, lam).unwrap(), n, RngStream::new(seed, 0))
            .unwrap()
    }

    #[test]
    fn constant_data_is_degenerate() {
        let d = DataSet::new(vec![1.0; 20]).unwrap();
        assert!(matches!(fit_mle(&Weibull, &d, None), Err(Error::DegenerateData(_))));
        assert!(matches!(
            fit_wf(&Weibull, &Prior::half_cauchy(), &d, None),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn too_few_observations() {
        let d = DataSet::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(fit_mle(&Weibull, &d, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn data_outside_support() {
        let d = DataSet::new(vec![1.0, 2.0, -0.5, 3.0]).unwrap();
        assert!(matches!(fit_mle(&Weibull, &d, None), Err(Error::Domain(_))));
    }

    #[test]
    fn exponential_mle_closed_form() {
        let th = Exponential.rate(2.5).unwrap();
        let d = Exponential.sample(&th, 37, RngStream::new(3, 0)).unwrap();
        let mean = d.observations().iter().sum::<f64>() / 37.0;
        // start away from the closed form so Newton has to work
        let start = Exponential.rate(0.5).unwrap();
        let fit = fit_mle(&Exponential, &d, Some(&start)).unwrap();
        assert!((fit.theta_hat.values()[0] - 1.0 / mean).abs() < 1e-10);
        assert!(fit.residual <= STATIONARITY_TOL);
        assert!(fit.iterations > 0);
    }

    #[test]
    fn exponential_flat_prior_wf_closed_form() {
        // (1/n)Σ(x − 1/θ) − (1/n)(1/θ) = 0  ⇒  θ = (n + 1)/(n·mean)
        let th = Exponential.rate(1.0).unwrap();
        let d = Exponential.sample(&th, 25, RngStream::new(9, 0)).unwrap();
        let n = 25.0;
        let mean = d.observations().iter().sum::<f64>() / n;
        let fit = fit_wf(&Exponential, &Prior::Flat, &d, None).unwrap();
        assert!((fit.theta_hat.values()[0] - (n + 1.0) / (n * mean)).abs() < 1e-10);
        assert!(fit.residual <= STATIONARITY_TOL);
    }

    #[test]
    fn exponential_fisher_squared_wf_closed_form() {
        let th = Exponential.rate(3.0).unwrap();
        let d = Exponential.sample(&th, 40, RngStream::new(10, 0)).unwrap();
        let n = 40.0;
        let mean = d.observations().iter().sum::<f64>() / n;
        let fit = fit_wf(&Exponential, &Prior::FisherSquared, &d, None).unwrap();
        assert!((fit.theta_hat.values()[0] - (n - 1.0) / (n * mean)).abs() < 1e-10);
    }

    #[test]
    fn jeffreys_wf_equals_mle() {
        for seed in 0..5 {
            let d = weibull_data(1.5, 2.0, 60, seed);
            let mle = fit_mle(&Weibull, &d, None).unwrap();
            let wf = fit_wf(&Weibull, &Prior::Jeffreys, &d, None).unwrap();
            for (a, b) in mle.theta_hat.values().iter().zip(wf.theta_hat.values()) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn weibull_mle_consistent_at_large_n() {
        let d = weibull_data(2.0, 1.0, 100_000, 42);
        let fit = fit_mle(&Weibull, &d, None).unwrap();
        let th = fit.theta_hat.values();
        assert!((th[0] - 2.0).abs() < 0.02, "{th:?}");
        assert!((th[1] - 1.0).abs() < 0.02, "{th:?}");
        assert!(fit.residual <= STATIONARITY_TOL);
        assert!(fit.observed_info.asymmetry() == 0.0);
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..10 {
            let d = weibull_data(0.7, 3.0, 80, seed);
            // deliberately poor start
            let start = Weibull.params(5.0, 0.5).unwrap();
            for fit in [
                fit_mle(&Weibull, &d, Some(&start)).unwrap(),
                fit_wf(&Weibull, &Prior::half_cauchy(), &d, Some(&start)).unwrap(),
            ] {
                for w in fit.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-14 * (1.0 + w[0].abs()), "{:?}", fit.objective_trace);
                }
                assert!(fit.converged && fit.residual <= STATIONARITY_TOL);
            }
        }
    }

    #[test]
    fn mle_scale_equivariance() {
        let d = weibull_data(1.3, 1.0, 150, 77);
        let c = 3.7;
        let scaled = DataSet::new(d.observations().iter().map(|x| c * x).collect()).unwrap();
        let a = fit_mle(&Weibull, &d, None).unwrap();
        let b = fit_mle(&Weibull, &scaled, None).unwrap();
        let (ta, tb) = (a.theta_hat.values(), b.theta_hat.values());
        assert!((ta[0] - tb[0]).abs() < 1e-9 * ta[0]);
        assert!((c * ta[1] - tb[1]).abs() < 1e-9 * tb[1]);
    }

    #[test]
    fn predicted_shift_weibull_half_cauchy() {
        let th = Weibull.params(2.0, 1.0).unwrap();
        let s = predicted_shift(&Weibull, &Prior::half_cauchy(), &th, 100).unwrap();
        assert!((s[0] + 0.019454).abs() < 1e-6, "{s:?}");
        assert!((s[1] + 0.002056).abs() < 1e-6, "{s:?}");
        let zero = predicted_shift(&Weibull, &Prior::Jeffreys, &th, 100).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn wf_minus_mle_tracks_predicted_shift() {
        let th = Weibull.params(2.0, 1.0).unwrap();
        let d = weibull_data(2.0, 1.0, 200, 7);
        let mle = fit_mle(&Weibull, &d, None).unwrap();
        let wf = fit_wf(&Weibull, &Prior::half_cauchy(), &d, None).unwrap();
        let pred = predicted_shift(&Weibull, &Prior::half_cauchy(), &th, 200).unwrap();
        let obs0 = wf.theta_hat.values()[0] - mle.theta_hat.values()[0];
        assert!(obs0 < 0.0 && obs0.abs() <= 2.0 * pred[0].abs() && obs0.abs() >= 0.5 * pred[0].abs(),
            "observed {obs0}, predicted {}", pred[0]);
    }

    #[test]
    fn wf_shift_is_order_one_over_n() {
        let prior = Prior::half_cauchy();
        let mut diffs = Vec::new();
        for &n in &[200usize, 400, 800] {
            let full = weibull_data(2.0, 1.0, 800, 1234);
            let d = full.prefix(n).unwrap();
            let mle = fit_mle(&Weibull, &d, None).unwrap();
            let wf = fit_wf(&Weibull, &prior, &d, None).unwrap();
            let diff: f64 = mle
                .theta_hat
                .values()
                .iter()
                .zip(wf.theta_hat.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            diffs.push(diff);
        }
        for w in diffs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() <= 0.6, "ratio {ratio}, diffs {diffs:?}");
        }
    }

    #[test]
    fn asymptotic_covariance_values() {
        let c = asymptotic_cov(&Exponential, &Exponential.rate(1.0).unwrap()).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);

        let th = Weibull.params(1.0, 1.0).unwrap();
        let c = asymptotic_cov(&Weibull, &th).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let g1 = crate::models::EULER_GAMMA - 1.0;
        let displayed = Matrix::from_rows(&[
            &[6.0 / pi2, -6.0 * g1 / pi2],
            &[-6.0 * g1 / pi2, (6.0 * g1 * g1 + pi2) / pi2],
        ]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[(i, j)] - displayed[(i, j)]).abs() < 1e-12);
            }
        }
        let prod = Weibull.fisher(th.values()).unwrap().matmul(&c);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sandwich_reduces_to_inverse_when_a_equals_b() {
        let i = Weibull.fisher(&[1.5, 0.8]).unwrap();
        let s = sandwich_cov(&i, &i).unwrap();
        let inv = i.inverse_spd().unwrap();
        for (a, b) in s.entries().iter().zip(inv.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
