//! Wallace–Freeman message length.
//!
//! ```text
//! I₈₇(x, θ) = −log π(θ) + ½log|nI(θ)| + (d/2)log κ_d  +  d/2 − log p(x | θ)
//!             └──────────── assertion ────────────┘    └──── detail ────┘
//! ```
//!
//! and its comparison with the BIC form −log p(x | θ) + (d/2)log n. All
//! lengths are in nats unless converted with [`CodelengthReport::in_bits`].

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::fit_wf;
use crate::models::{DataSet, Model, ParamPoint, EULER_GAMMA};
use crate::priors::Prior;

/// Normalised second moment of the optimal d-dimensional lattice quantiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaConst {
    pub value: f64,
    /// False when `value` comes from the large-d approximation.
    pub exact: bool,
}

/// Signature shared by [`kappa_const`] and any substitute used in checks.
pub type KappaFn = fn(usize) -> Result<KappaConst>;

/// κ₁ = 1/12, κ₂ = 5/(36√3), κ₃ = 19/(192·2^{1/3}); for d ≥ 4 the
/// approximation (d/2)(log κ_d + 1) ≈ −(d/2)log 2π + ½log(dπ) − γ.
pub fn kappa_const(d: usize) -> Result<KappaConst> {
    let exact = |value| Ok(KappaConst { value, exact: true });
    match d {
        0 => Err(Error::invalid("dimension must be at least 1")),
        1 => exact(1.0 / 12.0),
        2 => exact(5.0 / (36.0 * 3f64.sqrt())),
        3 => exact(19.0 / (192.0 * 2f64.cbrt())),
        _ => {
            let df = d as f64;
            let rhs = -0.5 * df * (2.0 * PI).ln() + 0.5 * (df * PI).ln() - EULER_GAMMA;
            Ok(KappaConst {
                value: (2.0 * rhs / df - 1.0).exp(),
                exact: false,
            })
        }
    }
}

/// Vol(C_opt) = κ_d^{−d/2}.
pub fn optimal_cell_volume(d: usize) -> Result<f64> {
    optimal_cell_volume_with(kappa_const, d)
}

pub fn optimal_cell_volume_with(kappa: KappaFn, d: usize) -> Result<f64> {
    Ok(kappa(d)?.value.powf(-(d as f64) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CodelengthReport {
    pub total: f64,
    pub assertion: f64,
    pub detail: f64,
    pub bic_form: f64,
    pub gap: f64,
    pub units: Units,
    /// Set for improper priors, whose lengths are defined only up to an
    /// additive constant.
    #[serde(skip)]
    pub up_to_constant: bool,
    #[serde(skip)]
    pub kappa_exact: bool,
}

impl CodelengthReport {
    fn from_parts(assertion: f64, detail: f64, bic_form: f64, proper: bool, kappa_exact: bool) -> Self {
        let total = assertion + detail;
        Self {
            total,
            assertion,
            detail,
            bic_form,
            gap: total - bic_form,
            units: Units::Nats,
            up_to_constant: !proper,
            kappa_exact,
        }
    }

    pub fn in_bits(&self) -> Self {
        if self.units == Units::Bits {
            return self.clone();
        }
        Self {
            total: self.total / LN_2,
            assertion: self.assertion / LN_2,
            detail: self.detail / LN_2,
            bic_form: self.bic_form / LN_2,
            gap: self.gap / LN_2,
            units: Units::Bits,
            ..self.clone()
        }
    }
}

/// Message length of `data` stated with parameter `theta`.
pub fn message_length(
    model: &dyn Model,
    prior: &Prior,
    data: &DataSet,
    theta: &ParamPoint,
) -> Result<CodelengthReport> {
    message_length_with(kappa_const, model, prior, data, theta)
}

pub fn message_length_with(
    kappa: KappaFn,
    model: &dyn Model,
    prior: &Prior,
    data: &DataSet,
    theta: &ParamPoint,
) -> Result<CodelengthReport> {
    let th = theta.values();
    model.check_params(th)?;
    model.check_data(data)?;
    let d = model.dim();
    let df = d as f64;
    let n = data.n() as f64;
    let k = kappa(d)?;

    let log_det_nfisher = model.fisher(th)?.scale(n).log_det_spd()?;
    let log_prior = prior.log_density(model, th)?;
    let neg_ll = -model.loglik(th, data)?;

    let assertion = -log_prior + 0.5 * log_det_nfisher + 0.5 * df * k.value.ln();
    let detail = neg_ll + 0.5 * df;
    let bic_form = neg_ll + 0.5 * df * n.ln();
    let report = CodelengthReport::from_parts(assertion, detail, bic_form, prior.is_proper(), k.exact);
    if [report.total, report.assertion, report.detail, report.bic_form]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFiniteEvaluation(format!("message length at {th:?}")));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub gap: f64,
}

/// gap(n) = I₈₇(x₁..ₙ, θ̂ₙ) − BIC form, refitting the Wallace–Freeman
/// estimate on each prefix of `data`.
pub fn bic_gap_profile(
    model: &dyn Model,
    prior: &Prior,
    data: &DataSet,
    ns: &[usize],
) -> Result<Vec<GapPoint>> {
    ns.iter()
        .map(|&n| {
            let prefix = data.prefix(n)?;
            let fit = fit_wf(model, prior, &prefix, None)?;
            let report = message_length(model, prior, &prefix, &fit.theta_hat)?;
            Ok(GapPoint {
                n,
                theta_hat: fit.theta_hat.into_values(),
                gap: report.gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::fit_mle;
    use crate::models::{Exponential, Weibull};
    use crate::numerics::RngStream;

    #[test]
    fn exact_constants() {
        assert_eq!(kappa_const(1).unwrap().value, 1.0 / 12.0);
        assert!((kappa_const(2).unwrap().value - 0.080_187_5).abs() < 1e-7);
        assert!((kappa_const(3).unwrap().value - 0.078_543_3).abs() < 1e-7);
        for d in 1..=3 {
            assert!(kappa_const(d).unwrap().exact);
        }
        assert!(!kappa_const(4).unwrap().exact);
        assert!(kappa_const(0).is_err());
    }

    #[test]
    fn kappa_decreasing() {
        let k: Vec<f64> = (1..=3).map(|d| kappa_const(d).unwrap().value).collect();
        assert!(k[0] > k[1] && k[1] > k[2]);
        let approx: Vec<f64> = (4..60).map(|d| kappa_const(d).unwrap().value).collect();
        for w in approx.windows(2) {
            assert!(w[1] < w[0]);
        }
        // sphere-bound limit 1/(2πe)
        let far = kappa_const(1_000_000).unwrap().value;
        assert!((far - 1.0 / (2.0 * PI * std::f64::consts::E)).abs() < 1e-4);
    }

    #[test]
    fn approximation_satisfies_defining_equation() {
        for d in [4usize, 8, 24] {
            let df = d as f64;
            let lhs = 0.5 * df * (kappa_const(d).unwrap().value.ln() + 1.0);
            let rhs = -0.5 * df * (2.0 * PI).ln() + 0.5 * (df * PI).ln() - EULER_GAMMA;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_dimension_constant() {
        let c = 0.5 * ((1.0f64 / 12.0).ln() + 1.0);
        assert!((c + 0.742_453).abs() < 1e-6);
    }

    #[test]
    fn cell_volumes() {
        assert!((optimal_cell_volume(1).unwrap() - 3.464_102).abs() < 1e-6);
        assert!((optimal_cell_volume(2).unwrap() - 12.470_77).abs() < 1e-5);
        for d in 1..=3 {
            let lhs = -optimal_cell_volume(d).unwrap().ln();
            let rhs = 0.5 * d as f64 * kappa_const(d).unwrap().value.ln();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    fn weibull_sample(n: usize, seed: u64) -> DataSet {
        Weibull
            .sample(&Weibull.params(2.0, 1.0).unwrap(), n, RngStream::new(seed, 0))
            .unwrap()
    }

    #[test]
    fn parts_add_up() {
        let d = weibull_sample(100, 7);
        let th = Weibull.params(1.8, 1.1).unwrap();
        let r = message_length(&Weibull, &Prior::half_cauchy(), &d, &th).unwrap();
        assert_eq!(r.total, r.assertion + r.detail);
        assert_eq!(r.gap, r.total - r.bic_form);
        assert!(!r.up_to_constant);
        let flat = message_length(&Weibull, &Prior::Flat, &d, &th).unwrap();
        assert!(flat.up_to_constant);
    }

    #[test]
    fn bits_conversion() {
        let d = weibull_sample(50, 3);
        let th = Weibull.params(2.0, 1.0).unwrap();
        let r = message_length(&Weibull, &Prior::half_cauchy(), &d, &th).unwrap();
        let b = r.in_bits();
        assert_eq!(b.units, Units::Bits);
        assert!((b.total * LN_2 - r.total).abs() < 1e-12 * r.total.abs());
        assert!((b.gap * LN_2 - r.gap).abs() < 1e-12 * (1.0 + r.gap.abs()));
    }

    #[test]
    fn json_keys() {
        let d = weibull_sample(30, 1);
        let th = Weibull.params(2.0, 1.0).unwrap();
        let r = message_length(&Weibull, &Prior::half_cauchy(), &d, &th).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["assertion", "bic_form", "detail", "gap", "total", "units"]);
        assert_eq!(v["units"], "nats");
    }

    #[test]
    fn wf_estimate_minimises_length_on_grid() {
        let th0 = Exponential.rate(1.5).unwrap();
        let d = Exponential.sample(&th0, 40, RngStream::new(11, 0)).unwrap();
        let prior = Prior::Flat;
        let wf = fit_wf(&Exponential, &prior, &d, None).unwrap();
        let t_hat = wf.theta_hat.values()[0];
        let step = 1e-3;
        let (mut best_t, mut best_len) = (0.0, f64::INFINITY);
        let mut t = 0.5;
        while t < 4.0 {
            let len = message_length(&Exponential, &prior, &d, &Exponential.rate(t).unwrap())
                .unwrap()
                .total;
            if len < best_len {
                best_len = len;
                best_t = t;
            }
            t += step;
        }
        assert!((best_t - t_hat).abs() <= step, "grid {best_t}, fit {t_hat}");

        let mle = fit_mle(&Exponential, &d, None).unwrap().theta_hat;
        let shifted = Exponential.rate(mle.values()[0] + 0.1).unwrap();
        let at_mle = message_length(&Exponential, &prior, &d, &mle).unwrap();
        let at_shift = message_length(&Exponential, &prior, &d, &shifted).unwrap();
        assert!(at_shift.detail > at_mle.detail);
    }

    #[test]
    fn wf_shorter_than_mle_weibull() {
        let d = weibull_sample(100, 7);
        let prior = Prior::half_cauchy();
        let wf = fit_wf(&Weibull, &prior, &d, None).unwrap();
        let mle = fit_mle(&Weibull, &d, None).unwrap();
        let at_wf = message_length(&Weibull, &prior, &d, &wf.theta_hat).unwrap();
        let at_mle = message_length(&Weibull, &prior, &d, &mle.theta_hat).unwrap();
        assert!(at_wf.total <= at_mle.total);
    }

    #[test]
    fn exponential_flat_gap_closed_form() {
        // ½log(n/θ²) − ½log n + ½(log κ₁ + 1) = −log θ + ½(log κ₁ + 1)
        let d = Exponential
            .sample(&Exponential.rate(2.0).unwrap(), 2000, RngStream::new(5, 0))
            .unwrap();
        let profile = bic_gap_profile(&Exponential, &Prior::Flat, &d, &[250, 500, 1000, 2000]).unwrap();
        let c = 0.5 * ((1.0f64 / 12.0).ln() + 1.0);
        for p in &profile {
            assert!((p.gap - (-p.theta_hat[0].ln() + c)).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn weibull_gap_profile_is_bounded() {
        let d = weibull_sample(2000, 99);
        let profile =
            bic_gap_profile(&Weibull, &Prior::half_cauchy(), &d, &[250, 500, 1000, 2000]).unwrap();
        for w in profile.windows(2) {
            assert!((w[0].gap - w[1].gap).abs() < 0.5, "{profile:?}");
        }
    }

    #[test]
    fn gap_has_no_log_n_growth() {
        // at fixed θ the gap does not depend on n
        let d = weibull_sample(1000, 4);
        let th = Weibull.params(2.0, 1.0).unwrap();
        let prior = Prior::half_cauchy();
        let a = message_length(&Weibull, &prior, &d.prefix(100).unwrap(), &th).unwrap();
        let b = message_length(&Weibull, &prior, &d, &th).unwrap();
        assert!((a.gap - b.gap).abs() < 1e-10);
    }
}
