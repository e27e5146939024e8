use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::{format_of, threads, Format, Outcome, RunConfig, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFY_FAILED};
use crate::bias::{cox_snell_bias, wf_bias};
use crate::codelength::{bic_gap_profile, message_length, CodelengthReport};
use crate::error::{Error, Result};
use crate::estimators::{fit_mle, fit_wf, predicted_shift, EstimateResult};
use crate::models::{
    weibull_bias_ratio, weibull_mle_bias_closed, weibull_mml_bias_closed, DataSet, ModelId, Weibull,
};
use crate::numerics::fmt9;
use crate::priors::Prior;
use crate::simulate::{consistency_sweep, run_sim, shift_scaling_check, SimConfig, Statistic};
use crate::verify::{run_criterion, VerifyOptions, CRITERIA, DEFAULT_SEED};

/// Largest tolerated relative gap between closed-form and generic biases.
pub const BIAS_TABLE_TOL: f64 = 1e-5;

fn ok(text: String) -> Outcome {
    Outcome { text, code: EXIT_OK }
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn model_of(cfg: &RunConfig) -> Result<ModelId> {
    ModelId::parse(cfg.get("model").unwrap_or("weibull"))
}

fn prior_of(cfg: &RunConfig) -> Result<Prior> {
    let scale = match cfg.get("prior_scale") {
        Some(s) => Some(super::config::parse_field::<f64>("prior_scale", s)?),
        None => None,
    };
    Prior::from_name(cfg.get("prior").unwrap_or("half_cauchy"), scale)
}

fn data_of(cfg: &RunConfig) -> Result<DataSet> {
    DataSet::read(Path::new(cfg.require("data")?))
}

#[derive(Serialize)]
struct FitReport<'a> {
    model: &'a str,
    prior: &'a str,
    n: usize,
    param_names: &'a [&'a str],
    mle: &'a EstimateResult,
    wf: &'a EstimateResult,
    predicted_shift: &'a [f64],
    observed_shift: &'a [f64],
}

pub fn fit(cfg: &RunConfig) -> Result<Outcome> {
    let id = model_of(cfg)?;
    let model = id.model();
    let prior = prior_of(cfg)?;
    let data = data_of(cfg)?;
    let n = data.n();
    let mle = fit_mle(model, &data, None)?;
    let wf = fit_wf(model, &prior, &data, None)?;
    let predicted = predicted_shift(model, &prior, &mle.theta_hat, n)?;
    let observed: Vec<f64> = wf
        .theta_hat
        .values()
        .iter()
        .zip(mle.theta_hat.values())
        .map(|(w, m)| w - m)
        .collect();
    if wf.stationary_points > 1 {
        eprintln!(
            "warning: {} distinct stationary points of the Wallace-Freeman criterion; reporting the global minimum",
            wf.stationary_points
        );
    }

    let text = match format_of(cfg, Format::Csv)? {
        Format::Json => json_text(&FitReport {
            model: model.name(),
            prior: prior.name(),
            n,
            param_names: model.param_names(),
            mle: &mle,
            wf: &wf,
            predicted_shift: &predicted,
            observed_shift: &observed,
        }),
        Format::Csv => {
            let names = model.param_names();
            let mut s = format!(
                "# fit model={} prior={} n={n}\nquantity,coordinate,value\n",
                model.name(),
                prior.name()
            );
            let mut vec_rows = |label: &str, v: &[f64]| {
                for (name, x) in names.iter().zip(v) {
                    let _ = writeln!(s, "{label},{name},{}", fmt9(*x));
                }
            };
            vec_rows("mle", mle.theta_hat.values());
            vec_rows("wf", wf.theta_hat.values());
            vec_rows("predicted_shift", &predicted);
            vec_rows("observed_shift", &observed);
            let shift = observed.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let _ = writeln!(s, "shift_max_abs,all,{}", fmt9(shift));
            let _ = writeln!(s, "mle_residual,all,{}", fmt9(mle.residual));
            let _ = writeln!(s, "wf_residual,all,{}", fmt9(wf.residual));
            let _ = writeln!(s, "mle_iterations,all,{}", mle.iterations);
            let _ = writeln!(s, "wf_iterations,all,{}", wf.iterations);
            let _ = writeln!(s, "wf_stationary_points,all,{}", wf.stationary_points);
            s
        }
    };
    Ok(ok(text))
}

#[derive(Debug, Serialize)]
struct BiasRow {
    k: f64,
    lambda: f64,
    n: usize,
    mle_bias_k: f64,
    mle_bias_lambda: f64,
    wf_bias_k: f64,
    wf_bias_lambda: f64,
    ratio_r: Option<f64>,
    closed_mle_bias_k: f64,
    closed_mle_bias_lambda: f64,
    closed_wf_bias_k: f64,
    closed_wf_bias_lambda: f64,
    max_rel_discrepancy: f64,
}

const BIAS_HEADER: &str = "k,lambda,n,mle_bias_k,mle_bias_lambda,wf_bias_k,wf_bias_lambda,ratio_R,\
closed_mle_bias_k,closed_mle_bias_lambda,closed_wf_bias_k,closed_wf_bias_lambda,max_rel_discrepancy";

pub fn bias_table(cfg: &RunConfig) -> Result<Outcome> {
    let ks: Vec<f64> = cfg.list_or("k_grid", "0.5,1,2")?;
    let lams: Vec<f64> = cfg.list_or("lambda_grid", "0.5,1,2")?;
    let ns: Vec<usize> = cfg.list_or("n_grid", "100")?;
    let prior = Prior::half_cauchy();
    let mut rows = Vec::new();
    for &k in &ks {
        for &lam in &lams {
            let th = Weibull.params(k, lam)?;
            for &n in &ns {
                let mle = cox_snell_bias(&Weibull, &th, n)?;
                let wf = wf_bias(&Weibull, &prior, &th, n)?;
                let cm = weibull_mle_bias_closed(&th, n)?;
                let cw = weibull_mml_bias_closed(&th, n)?;
                let disc = mle
                    .iter()
                    .chain(&wf)
                    .zip(cm.iter().chain(&cw))
                    .map(|(g, c)| (g - c).abs() / c.abs().max(f64::MIN_POSITIVE))
                    .fold(0.0_f64, f64::max);
                rows.push(BiasRow {
                    k,
                    lambda: lam,
                    n,
                    mle_bias_k: mle[0],
                    mle_bias_lambda: mle[1],
                    wf_bias_k: wf[0],
                    wf_bias_lambda: wf[1],
                    ratio_r: if lam == 1.0 { Some(weibull_bias_ratio(k)?) } else { None },
                    closed_mle_bias_k: cm[0],
                    closed_mle_bias_lambda: cm[1],
                    closed_wf_bias_k: cw[0],
                    closed_wf_bias_lambda: cw[1],
                    max_rel_discrepancy: disc,
                });
            }
        }
    }
    let worst = rows.iter().map(|r| r.max_rel_discrepancy).fold(0.0_f64, f64::max);
    let text = match format_of(cfg, Format::Csv)? {
        Format::Json => json_text(&rows),
        Format::Csv => {
            let mut s = format!("{BIAS_HEADER}\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt9(r.k),
                    fmt9(r.lambda),
                    r.n,
                    fmt9(r.mle_bias_k),
                    fmt9(r.mle_bias_lambda),
                    fmt9(r.wf_bias_k),
                    fmt9(r.wf_bias_lambda),
                    r.ratio_r.map(fmt9).unwrap_or_default(),
                    fmt9(r.closed_mle_bias_k),
                    fmt9(r.closed_mle_bias_lambda),
                    fmt9(r.closed_wf_bias_k),
                    fmt9(r.closed_wf_bias_lambda),
                    fmt9(r.max_rel_discrepancy)
                );
            }
            s
        }
    };
    if worst > BIAS_TABLE_TOL {
        eprintln!(
            "error: closed-form and generic biases disagree (max relative discrepancy {worst:e} > {BIAS_TABLE_TOL:e})"
        );
        return Ok(Outcome {
            text,
            code: EXIT_NUMERICAL,
        });
    }
    Ok(ok(text))
}

fn report_pairs(r: &CodelengthReport) -> [(&'static str, f64); 5] {
    [
        ("total", r.total),
        ("assertion", r.assertion),
        ("detail", r.detail),
        ("bic_form", r.bic_form),
        ("gap", r.gap),
    ]
}

pub fn codelength(cfg: &RunConfig) -> Result<Outcome> {
    let model = model_of(cfg)?.model();
    let prior = prior_of(cfg)?;
    let data = data_of(cfg)?;
    let bits = match cfg.get("units").unwrap_or("nats") {
        "nats" => false,
        "bits" => true,
        other => return Err(Error::invalid(format!("field 'units': expected nats or bits, got '{other}'"))),
    };
    let theta = match cfg.get("theta") {
        Some(_) => model.point(&cfg.list_or::<f64>("theta", "")?)?,
        None => fit_wf(model, &prior, &data, None)?.theta_hat,
    };
    let mut report = message_length(model, &prior, &data, &theta)?;
    if report.up_to_constant {
        eprintln!(
            "warning: prior '{}' is improper; lengths are defined up to an additive constant",
            prior.name()
        );
    }
    if bits {
        report = report.in_bits();
    }
    let profile = match cfg.get("gap_ns") {
        Some(_) => {
            let ns: Vec<usize> = cfg.list_or("gap_ns", "")?;
            let scale = if bits { std::f64::consts::LN_2 } else { 1.0 };
            Some(
                bic_gap_profile(model, &prior, &data, &ns)?
                    .into_iter()
                    .map(|p| (p.n, p.gap / scale))
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };

    let text = match format_of(cfg, Format::Json)? {
        Format::Json => {
            let mut v = serde_json::to_value(&report).expect("serialisable");
            if let Some(p) = &profile {
                v["gap_profile"] = json!(p.iter().map(|(n, g)| json!({"n": n, "gap": g})).collect::<Vec<_>>());
            }
            json_text(&v)
        }
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            for (k, v) in report_pairs(&report) {
                let _ = writeln!(s, "{k},{}", fmt9(v));
            }
            let _ = writeln!(s, "units,{}", report.units.as_str());
            if let Some(p) = &profile {
                for (n, g) in p {
                    let _ = writeln!(s, "gap_n{n},{}", fmt9(*g));
                }
            }
            s
        }
    };
    Ok(ok(text))
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let id = model_of(cfg)?;
    let prior = prior_of(cfg)?;
    let theta0: Vec<f64> = cfg.list_or("theta", "")?;
    let n: usize = cfg.parse_required("n")?;
    let replicates: usize = cfg.parse_required("replicates")?;
    let seed: u64 = cfg.parse_or("seed", DEFAULT_SEED)?;
    let mut sim = SimConfig::new(id, prior, theta0, n, replicates, seed);
    sim.threads = threads(cfg)?;
    if let Some(list) = cfg.get("outputs") {
        sim.outputs = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Statistic::parse)
            .collect::<Result<_>>()?;
    }
    let format = format_of(cfg, Format::Csv)?;
    let study = cfg.get("study").unwrap_or("run");
    let text = match study {
        "run" => {
            let r = run_sim(&sim)?;
            if r.failures > 0 {
                eprintln!("note: {} of {} replicates failed and were excluded", r.failures, r.replicates);
            }
            match format {
                Format::Json => format!("{}\n", r.to_json()),
                Format::Csv => r.to_csv(),
            }
        }
        "consistency" => {
            let ns: Vec<usize> = cfg.list_or("n_grid", "")?;
            let sweep = consistency_sweep(&sim, &ns)?;
            match format {
                Format::Json => json_text(&sweep),
                Format::Csv => {
                    let names = id.model().param_names();
                    let mut s = String::from("n,coordinate,rmse_mle,rmse_wf,bias_mle,bias_wf\n");
                    for row in &sweep.rows {
                        for (i, name) in names.iter().enumerate() {
                            let _ = writeln!(
                                s,
                                "{},{name},{},{},{},{}",
                                row.n,
                                fmt9(row.rmse_mle[i]),
                                fmt9(row.rmse_wf[i]),
                                fmt9(row.bias_mle[i]),
                                fmt9(row.bias_wf[i])
                            );
                        }
                    }
                    for (i, name) in names.iter().enumerate() {
                        let _ = writeln!(
                            s,
                            "slope,{name},{},{},,",
                            fmt9(sweep.slope_mle[i]),
                            fmt9(sweep.slope_wf[i])
                        );
                    }
                    s
                }
            }
        }
        "shift" => {
            let ns: Vec<usize> = cfg.list_or("n_grid", "")?;
            let rows = shift_scaling_check(&sim, &ns)?;
            match format {
                Format::Json => json_text(&rows),
                Format::Csv => {
                    let names = id.model().param_names();
                    let mut s = String::from("n,coordinate,scaled_shift,scaled_se,target,z\n");
                    for row in &rows {
                        for (i, name) in names.iter().enumerate() {
                            let _ = writeln!(
                                s,
                                "{},{name},{},{},{},{}",
                                row.n,
                                fmt9(row.scaled_shift[i]),
                                fmt9(row.scaled_se[i]),
                                fmt9(row.target[i]),
                                fmt9(row.z[i])
                            );
                        }
                    }
                    s
                }
            }
        }
        other => {
            return Err(Error::invalid(format!(
                "field 'study': expected run, consistency or shift, got '{other}'"
            )))
        }
    };
    Ok(ok(text))
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let opts = VerifyOptions {
        fast: cfg.flag("fast")?,
        threads: threads(cfg)?,
        seed: cfg.parse_or("seed", DEFAULT_SEED)?,
        ..VerifyOptions::default()
    };
    let ids: Vec<u8> = match cfg.get("criteria") {
        Some(_) => cfg.list_or("criteria", "")?,
        None => CRITERIA.iter().map(|(id, _)| *id).collect(),
    };
    if let Some(bad) = ids.iter().find(|id| !(1..=10).contains(*id)) {
        return Err(Error::invalid(format!("field 'criteria': no criterion {bad}")));
    }
    let format = format_of(cfg, Format::Csv)?;
    let mut outcomes = Vec::new();
    for id in ids {
        let o = run_criterion(id, &opts);
        if format == Format::Csv && cfg.get("out").is_none() {
            println!("{}", o.line());
        }
        outcomes.push(o);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    let text = match format {
        Format::Json => json_text(&outcomes),
        Format::Csv => {
            let mut s = String::new();
            if cfg.get("out").is_some() {
                for o in &outcomes {
                    let _ = writeln!(s, "{}", o.line());
                }
            }
            let _ = writeln!(s, "{}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
            s
        }
    };
    if failed.is_empty() {
        Ok(ok(text))
    } else {
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(Outcome {
            text,
            code: EXIT_VERIFY_FAILED,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::Command;
    use super::*;

    fn cfg(command: Command, pairs: &[(&str, &str)]) -> RunConfig {
        let mut c = RunConfig::new(command);
        for (k, v) in pairs {
            c.set(k, v).unwrap();
        }
        c
    }

    #[test]
    fn bias_table_values() {
        let c = cfg(Command::BiasTable, &[("k_grid", "2"), ("lambda_grid", "1"), ("n_grid", "100,200")]);
        let out = bias_table(&c).unwrap();
        assert_eq!(out.code, EXIT_OK);
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines.len(), 3);
        let row: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
        assert!((row[3] - 0.027590).abs() < 1e-6);
        assert!((row[5] - 0.008136).abs() < 1e-6);
        assert!(row[7] > 1.0);
        let row2: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
        for col in 3..7 {
            assert!((row[col] - 2.0 * row2[col]).abs() <= 1e-8 * row[col].abs());
        }
    }

    #[test]
    fn ratio_only_on_unit_scale_rows() {
        let c = cfg(Command::BiasTable, &[("k_grid", "0.1,0.5,1,2,5,10"), ("lambda_grid", "1,2")]);
        let out = bias_table(&c).unwrap();
        for line in out.text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[1] == "1" {
                assert!(f[7].parse::<f64>().unwrap() > 1.0);
            } else {
                assert_eq!(f[7], "");
            }
        }
    }

    #[test]
    fn simulate_requires_fields() {
        let c = cfg(Command::Simulate, &[("theta", "2,1"), ("n", "50")]);
        let e = simulate(&c).unwrap_err();
        assert!(e.to_string().contains("replicates"));
    }

    #[test]
    fn unknown_study_is_rejected() {
        let c = cfg(
            Command::Simulate,
            &[("theta", "2,1"), ("n", "50"), ("replicates", "10"), ("study", "other")],
        );
        assert!(simulate(&c).is_err());
    }
}
