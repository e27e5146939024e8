//! Monte Carlo harness.
//!
//! Replicate r draws its sample from the counter-based stream (seed, r),
//! fits the MLE and then the Wallace–Freeman estimate started at the MLE.
//! Replicates run on a rayon pool, results are gathered in replicate order
//! and reduced sequentially with compensated sums, so a report depends only
//! on the configuration and never on the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::bias::{cox_snell_bias, wf_bias};
use crate::error::{Error, Result};
use crate::estimators::{asymptotic_cov, fit_mle, fit_wf_from, predicted_shift};
use crate::models::{Model, ModelId, ParamPoint};
use crate::numerics::{fmt9, Matrix, NeumaierSum, RngStream};
use crate::priors::Prior;

/// Replicate failures above this fraction abort the run.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Bias,
    Covariance,
    Shift,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Bias, Statistic::Covariance, Statistic::Shift];

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "bias" => Ok(Statistic::Bias),
            "covariance" | "cov" => Ok(Statistic::Covariance),
            "shift" => Ok(Statistic::Shift),
            other => Err(Error::invalid(format!(
                "unknown statistic '{other}' (expected bias, covariance, shift)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ModelId,
    pub prior: Prior,
    pub theta0: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    /// Statistics written to CSV output.
    pub outputs: Vec<Statistic>,
}

impl SimConfig {
    pub fn new(model: ModelId, prior: Prior, theta0: Vec<f64>, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            model,
            prior,
            theta0,
            n,
            replicates,
            seed,
            threads: 0,
            outputs: Statistic::ALL.to_vec(),
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    fn validate(&self) -> Result<ParamPoint> {
        let model = self.model.model();
        let theta0 = model.point(&self.theta0)?;
        if self.n < model.dim() + 1 {
            return Err(Error::invalid(format!(
                "n = {} is too small for {} parameters",
                self.n,
                model.dim()
            )));
        }
        if self.replicates < 2 {
            return Err(Error::invalid("need at least 2 replicates"));
        }
        Ok(theta0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub mean: Vec<f64>,
    /// Standard error of `mean`.
    pub se: Vec<f64>,
    /// mean − θ₀.
    pub bias: Vec<f64>,
    /// First-order theoretical bias at θ₀.
    pub theory_bias: Vec<f64>,
    /// sqrt(mean((θ̂ − θ₀)²)).
    pub rmse: Vec<f64>,
    /// Sample covariance of √n(θ̂ − θ₀).
    pub covariance: Matrix,
    /// Standard errors of the covariance entries.
    pub covariance_se: Matrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub model: String,
    pub prior: String,
    pub param_names: Vec<String>,
    pub theta0: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub succeeded: usize,
    pub failures: usize,
    pub mle: EstimatorSummary,
    pub wf: EstimatorSummary,
    /// Mean of θ̂_WF − θ̂_MLE.
    pub shift_mean: Vec<f64>,
    pub shift_se: Vec<f64>,
    /// (1/n) I(θ₀)⁻¹ a(θ₀).
    pub predicted_shift: Vec<f64>,
    /// I(θ₀)⁻¹, the limiting covariance of √n(θ̂ − θ₀).
    pub asymptotic_cov: Matrix,
    #[serde(skip)]
    pub outputs: Vec<Statistic>,
}

struct Replicate {
    mle: Vec<f64>,
    wf: Vec<f64>,
}

fn run_replicate(model: &dyn Model, prior: &Prior, theta0: &ParamPoint, n: usize, stream: RngStream) -> Option<Replicate> {
    let data = model.sample(theta0, n, stream).ok()?;
    let mle = fit_mle(model, &data, None).ok()?;
    let wf = fit_wf_from(model, prior, &data, std::slice::from_ref(&mle.theta_hat)).ok()?;
    Some(Replicate {
        mle: mle.theta_hat.into_values(),
        wf: wf.theta_hat.into_values(),
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / m;
    let ss = values.iter().map(|v| (v - mean).powi(2)).collect::<NeumaierSum>().value();
    (mean, (ss / (m - 1.0)).sqrt() / m.sqrt())
}

fn summarise(name: &str, draws: &[&[f64]], theta0: &[f64], n: usize, theory_bias: Vec<f64>) -> EstimatorSummary {
    let d = theta0.len();
    let m = draws.len() as f64;
    let mut mean = vec![0.0; d];
    let mut se = vec![0.0; d];
    let mut rmse = vec![0.0; d];
    for i in 0..d {
        let col: Vec<f64> = draws.iter().map(|t| t[i]).collect();
        (mean[i], se[i]) = mean_and_se(&col);
        let sq: NeumaierSum = col.iter().map(|v| (v - theta0[i]).powi(2)).collect();
        rmse[i] = (sq.value() / m).sqrt();
    }
    let nf = n as f64;
    let mut covariance = Matrix::zeros(d, d);
    let mut covariance_se = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = draws
                .iter()
                .map(|t| nf * (t[i] - mean[i]) * (t[j] - mean[j]))
                .collect();
            let (pm, pse) = mean_and_se(&prods);
            let c = pm * m / (m - 1.0);
            for (a, b) in [(i, j), (j, i)] {
                covariance[(a, b)] = c;
                covariance_se[(a, b)] = pse;
            }
        }
    }
    EstimatorSummary {
        name: name.into(),
        bias: mean.iter().zip(theta0).map(|(a, b)| a - b).collect(),
        mean,
        se,
        theory_bias,
        rmse,
        covariance,
        covariance_se,
    }
}

/// Runs the configured study.
pub fn run_sim(cfg: &SimConfig) -> Result<SimReport> {
    let theta0 = cfg.validate()?;
    let model = cfg.model.model();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Option<Replicate>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(model, &cfg.prior, &theta0, cfg.n, RngStream::new(cfg.seed, r as u64)))
            .collect()
    });

    let ok: Vec<&Replicate> = results.iter().flatten().collect();
    let failures = cfg.replicates - ok.len();
    if failures as f64 > MAX_FAILURE_FRACTION * cfg.replicates as f64 || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            failures,
            replicates: cfg.replicates,
        });
    }

    let th0 = theta0.values();
    let mle_draws: Vec<&[f64]> = ok.iter().map(|r| r.mle.as_slice()).collect();
    let wf_draws: Vec<&[f64]> = ok.iter().map(|r| r.wf.as_slice()).collect();
    let d = th0.len();
    let mut shift_mean = vec![0.0; d];
    let mut shift_se = vec![0.0; d];
    for i in 0..d {
        let col: Vec<f64> = ok.iter().map(|r| r.wf[i] - r.mle[i]).collect();
        (shift_mean[i], shift_se[i]) = mean_and_se(&col);
    }

    Ok(SimReport {
        model: model.name().into(),
        prior: cfg.prior.name().into(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        theta0: th0.to_vec(),
        n: cfg.n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        succeeded: ok.len(),
        failures,
        mle: summarise("mle", &mle_draws, th0, cfg.n, cox_snell_bias(model, &theta0, cfg.n)?),
        wf: summarise("wf", &wf_draws, th0, cfg.n, wf_bias(model, &cfg.prior, &theta0, cfg.n)?),
        shift_mean,
        shift_se,
        predicted_shift: predicted_shift(model, &cfg.prior, &theta0, cfg.n)?,
        asymptotic_cov: asymptotic_cov(model, &theta0)?,
        outputs: cfg.outputs.clone(),
    })
}

fn z_score(estimate: f64, theory: f64, se: f64) -> f64 {
    if se > 0.0 {
        (estimate - theory) / se
    } else if estimate == theory {
        0.0
    } else {
        f64::INFINITY.copysign(estimate - theory)
    }
}

/// One CSV row: an estimator (or derived statistic) at one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub estimator: String,
    pub coordinate: String,
    pub mean: f64,
    pub bias: f64,
    pub se: f64,
    pub theory: f64,
    pub z: f64,
}

pub const CSV_HEADER: &str = "estimator,coordinate,mean,bias,se,theory,z";

impl SimReport {
    /// Rows for the requested statistics. For `mle`/`wf` rows `theory` is
    /// the first-order bias and z compares it with the empirical bias; for
    /// `shift` rows `bias` holds the mean shift itself; for `cov_*` rows
    /// `mean` is the covariance entry and `theory` the I⁻¹ entry.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        let names = &self.param_names;
        if self.outputs.contains(&Statistic::Bias) {
            for est in [&self.mle, &self.wf] {
                for (i, name) in names.iter().enumerate() {
                    rows.push(CsvRow {
                        estimator: est.name.clone(),
                        coordinate: name.clone(),
                        mean: est.mean[i],
                        bias: est.bias[i],
                        se: est.se[i],
                        theory: est.theory_bias[i],
                        z: z_score(est.bias[i], est.theory_bias[i], est.se[i]),
                    });
                }
            }
        }
        if self.outputs.contains(&Statistic::Shift) {
            for (i, name) in names.iter().enumerate() {
                rows.push(CsvRow {
                    estimator: "shift".into(),
                    coordinate: name.clone(),
                    mean: self.shift_mean[i],
                    bias: self.shift_mean[i],
                    se: self.shift_se[i],
                    theory: self.predicted_shift[i],
                    z: z_score(self.shift_mean[i], self.predicted_shift[i], self.shift_se[i]),
                });
            }
        }
        if self.outputs.contains(&Statistic::Covariance) {
            for est in [&self.mle, &self.wf] {
                for i in 0..names.len() {
                    for j in i..names.len() {
                        let c = est.covariance[(i, j)];
                        let t = self.asymptotic_cov[(i, j)];
                        let se = est.covariance_se[(i, j)];
                        rows.push(CsvRow {
                            estimator: format!("cov_{}", est.name),
                            coordinate: format!("{}:{}", names[i], names[j]),
                            mean: c,
                            bias: c - t,
                            se,
                            theory: t,
                            z: z_score(c, t, se),
                        });
                    }
                }
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        render_csv(&self.csv_rows())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.estimator,
            r.coordinate,
            fmt9(r.mean),
            fmt9(r.bias),
            fmt9(r.se),
            fmt9(r.theory),
            fmt9(r.z)
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, h)) => return Err(Error::Parse(format!("line {}: unexpected header '{h}'", i + 1))),
        None => return Err(Error::Parse("empty CSV".into())),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Parse(format!(
                    "line {}: expected 7 fields, got {}",
                    i + 1,
                    f.len()
                )));
            }
            let num = |k: usize| {
                f[k].trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: cannot parse '{}' as a number", i + 1, f[k]))
                })
            };
            Ok(CsvRow {
                estimator: f[0].to_string(),
                coordinate: f[1].to_string(),
                mean: num(2)?,
                bias: num(3)?,
                se: num(4)?,
                theory: num(5)?,
                z: num(6)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub rmse_mle: Vec<f64>,
    pub rmse_wf: Vec<f64>,
    pub bias_mle: Vec<f64>,
    pub bias_wf: Vec<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencySweep {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log RMSE on log n, per coordinate.
    pub slope_mle: Vec<f64>,
    pub slope_wf: Vec<f64>,
}

/// Least-squares slope of y on x.
pub fn loglog_slope(ns: &[usize], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn check_grid(ns: &[usize]) -> Result<()> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n grid must hold at least two increasing sizes"));
    }
    Ok(())
}

/// RMSE of both estimators over an increasing grid of sample sizes, each
/// size run as an independent study with the base configuration.
pub fn consistency_sweep(base: &SimConfig, ns: &[usize]) -> Result<ConsistencySweep> {
    check_grid(ns)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let r = run_sim(&base.with_n(n))?;
        rows.push(SweepRow {
            n,
            rmse_mle: r.mle.rmse,
            rmse_wf: r.wf.rmse,
            bias_mle: r.mle.bias,
            bias_wf: r.wf.bias,
            failures: r.failures,
        });
    }
    let d = rows[0].rmse_mle.len();
    let slope = |pick: fn(&SweepRow) -> &Vec<f64>| -> Vec<f64> {
        (0..d)
            .map(|i| loglog_slope(ns, &rows.iter().map(|r| pick(r)[i]).collect::<Vec<_>>()))
            .collect()
    };
    let slope_mle = slope(|r| &r.rmse_mle);
    let slope_wf = slope(|r| &r.rmse_wf);
    Ok(ConsistencySweep {
        rows,
        slope_mle,
        slope_wf,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftRow {
    pub n: usize,
    /// n · mean(θ̂_WF − θ̂_MLE).
    pub scaled_shift: Vec<f64>,
    pub scaled_se: Vec<f64>,
    /// I(θ₀)⁻¹ a(θ₀).
    pub target: Vec<f64>,
    pub z: Vec<f64>,
    pub failures: usize,
}

/// n-scaled mean shift against I⁻¹a at each grid size.
pub fn shift_scaling_check(base: &SimConfig, ns: &[usize]) -> Result<Vec<ShiftRow>> {
    check_grid(ns)?;
    ns.iter()
        .map(|&n| {
            let r = run_sim(&base.with_n(n))?;
            let nf = n as f64;
            let scaled_shift: Vec<f64> = r.shift_mean.iter().map(|s| nf * s).collect();
            let scaled_se: Vec<f64> = r.shift_se.iter().map(|s| nf * s).collect();
            let target: Vec<f64> = r.predicted_shift.iter().map(|s| nf * s).collect();
            let z = scaled_shift
                .iter()
                .zip(&target)
                .zip(&scaled_se)
                .map(|((s, t), se)| z_score(*s, *t, *se))
                .collect();
            Ok(ShiftRow {
                n,
                scaled_shift,
                scaled_se,
                target,
                z,
                failures: r.failures,
            })
        })
        .collect()
}
