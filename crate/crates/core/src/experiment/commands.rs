use rayon::prelude::*;
use serde_json::{json, Value};

use crate::engine::{run, run_replications, RunResult};
use crate::error::{Error, Result};
use crate::inference::{
    confidence_interval, coverage_study, log_binned_means, monte_carlo_sigma, rate_fit,
};
use crate::numerics::{operator_norm, DenseMatrix};
use crate::problems::{Problem, ProblemId, ProblemParams, SigmaTruthMode};

use super::config::{Command, ExperimentConfig};
use super::report::Reports;

/// Runs the configured command on a pool of `config.threads` workers.
pub fn execute(config: &ExperimentConfig) -> Result<Reports> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match config.command {
        Command::Run => run_command(config),
        Command::Rate => rate_command(config),
        Command::Coverage => coverage_command(config),
        Command::Diagnose => diagnose_command(config),
        Command::ListProblems => Ok(Reports {
            summary: list_problems()?,
            ..Default::default()
        }),
    })
}

fn mode_str(mode: SigmaTruthMode) -> &'static str {
    match mode {
        SigmaTruthMode::Analytic => "analytic",
        SigmaTruthMode::MonteCarloOnly => "monte_carlo_only",
    }
}

fn base_summary(config: &ExperimentConfig) -> serde_json::Map<String, Value> {
    let truth = config.problem().ground_truth();
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(config.command.as_str()));
    m.insert("problem".into(), json!(config.problem_id.as_str()));
    m.insert("config".into(), config.echo());
    m.insert("sigma_truth_mode".into(), json!(mode_str(truth.sigma_mode)));
    m.insert("x_star".into(), json!(truth.x_star.as_slice()));
    m.insert("sigma_limit".into(), json!(truth.sigma_limit));
    m
}

fn opnorm_error(sigma_hat: &DenseMatrix, reference: &DenseMatrix) -> Result<f64> {
    operator_norm(&sigma_hat.sub(reference)?)
}

fn trace_rows(result: &RunResult) -> Vec<(u64, f64, f64)> {
    result
        .dist_to_star
        .iter()
        .zip(&result.shadow_sq_dist)
        .map(|(&(k, d), &(_, s))| (k, d, s))
        .collect()
}

fn single_run_summary(
    config: &ExperimentConfig,
    result: &RunResult,
    m: &mut serde_json::Map<String, Value>,
) -> Result<()> {
    let problem = config.problem();
    let truth = problem.ground_truth();
    let v = config.direction.resolve(problem)?;
    let ci = confidence_interval(&result.x_bar, &result.sigma_hat, result.n.max(1), &v, config.level)?;
    let target = v.dot(&truth.x_star);
    m.insert("n".into(), json!(result.n));
    m.insert("x_bar".into(), json!(result.x_bar.as_slice()));
    m.insert("x_final".into(), json!(result.x_final.as_slice()));
    m.insert("sigma_hat".into(), json!(result.sigma_hat));
    m.insert("opnorm_error".into(), json!(opnorm_error(&result.sigma_hat, &truth.sigma_limit)?));
    m.insert("x_bar_error".into(), json!(result.x_bar.distance(&truth.x_star)));
    m.insert("tau".into(), json!(result.tau));
    m.insert("containment".into(), json!(result.containment));
    m.insert("identified_fraction".into(), json!(result.identified_fraction));
    m.insert(
        "ci".into(),
        json!({
            "direction": config.direction.to_string(),
            "lo": ci.lo,
            "hi": ci.hi,
            "level": ci.level,
            "target": target,
            "covered": ci.contains(target),
        }),
    );
    Ok(())
}

fn run_command(config: &ExperimentConfig) -> Result<Reports> {
    let n = config.n.expect("validated");
    let result = run(config.problem(), &config.run_config(n)?)?;
    let mut m = base_summary(config);
    single_run_summary(config, &result, &mut m)?;
    Ok(Reports {
        summary: Value::Object(m),
        trace: Some(trace_rows(&result)),
        sigma_hat: Some(result.sigma_hat),
        ..Default::default()
    })
}

fn rate_command(config: &ExperimentConfig) -> Result<Reports> {
    let problem = config.problem();
    let sigma = &problem.ground_truth().sigma_limit;
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for n in config.horizons() {
        let results = run_replications(problem, &config.run_config(n)?, config.reps)?;
        let errors = results
            .par_iter()
            .map(|r| opnorm_error(&r.sigma_hat, sigma))
            .collect::<Result<Vec<_>>>()?;
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        rows.extend(errors.iter().enumerate().map(|(rep, &e)| (n, rep as u64, e)));
        means.push((n as f64, mean));
    }
    let fit = rate_fit(&means)?;
    let mut m = base_summary(config);
    m.insert("n_grid".into(), json!(config.horizons()));
    m.insert("mean_opnorm_error".into(), json!(means.iter().map(|p| p.1).collect::<Vec<_>>()));
    m.insert("slope".into(), json!(fit.slope));
    m.insert("intercept".into(), json!(fit.intercept));
    m.insert("r_squared".into(), json!(fit.r_squared));
    Ok(Reports {
        summary: Value::Object(m),
        rate_rows: Some(rows),
        ..Default::default()
    })
}

fn coverage_command(config: &ExperimentConfig) -> Result<Reports> {
    let problem = config.problem();
    let v = config.direction.resolve(problem)?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for n in config.horizons() {
        let study = coverage_study(problem, &config.run_config(n)?, config.reps, &v, config.level)?;
        let mean_error = study.rows.iter().map(|r| r.error).sum::<f64>() / study.rows.len() as f64;
        per_n.push(json!({"n": n, "coverage": study.coverage, "mean_opnorm_error": mean_error}));
        rows.extend(study.rows);
    }
    let covered = rows.iter().filter(|r| r.covered).count();
    let mut m = base_summary(config);
    m.insert("coverage".into(), json!(covered as f64 / rows.len() as f64));
    m.insert("per_n".into(), Value::Array(per_n));
    m.insert("direction".into(), json!(v.as_slice()));
    m.insert("target".into(), json!(v.dot(&problem.ground_truth().x_star)));
    Ok(Reports {
        summary: Value::Object(m),
        coverage_rows: Some(rows),
        ..Default::default()
    })
}

fn diagnose_command(config: &ExperimentConfig) -> Result<Reports> {
    let problem = config.problem();
    let n = config.n.expect("validated");
    let run_cfg = config.run_config(n)?;
    let result = run(problem, &run_cfg)?;
    let mut m = base_summary(config);
    single_run_summary(config, &result, &mut m)?;

    let k_lo = run_cfg.diagnostics_stride.max(1);
    if n >= 4 * k_lo {
        let fit = |series: &[(u64, f64)]| -> Result<Value> {
            let bins: Vec<(f64, f64)> = log_binned_means(series, k_lo, n, 12)?
                .into_iter()
                .filter(|&(_, mean)| mean > 0.0)
                .collect();
            Ok(match rate_fit(&bins) {
                Ok(f) => json!({"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}),
                Err(_) => Value::Null,
            })
        };
        m.insert("shadow_decay".into(), fit(&result.shadow_sq_dist)?);
        m.insert("dist_decay".into(), fit(&result.dist_to_star)?);
    }

    let sigma_mc = if problem.ground_truth().sigma_mode == SigmaTruthMode::MonteCarloOnly {
        let mc = monte_carlo_sigma(problem, &run_cfg, config.reps)?;
        m.insert("sigma_mc".into(), json!(mc));
        m.insert("opnorm_error_mc".into(), json!(opnorm_error(&result.sigma_hat, &mc)?));
        let scale = operator_norm(&mc)?;
        if scale > 0.0 {
            m.insert(
                "relative_error_mc".into(),
                json!(opnorm_error(&result.sigma_hat, &mc)? / scale),
            );
        }
        Some(mc)
    } else {
        None
    };
    Ok(Reports {
        summary: Value::Object(m),
        trace: Some(trace_rows(&result)),
        sigma_hat: Some(result.sigma_hat),
        sigma_mc,
        ..Default::default()
    })
}

/// The four zoo ids with their default parameter records.
pub fn list_problems() -> Result<Value> {
    let mut entries = Vec::new();
    for id in ProblemId::ALL {
        let problem = Problem::from_id(id)?;
        entries.push(json!({
            "id": id.as_str(),
            "dim": problem.dim(),
            "method": problem.method().to_string(),
            "eta": problem.default_eta(),
            "params": serde_json::to_value(ProblemParams::defaults(id)).unwrap_or(Value::Null),
            "x_star": problem.ground_truth().x_star.as_slice(),
            "sigma_truth_mode": mode_str(problem.ground_truth().sigma_mode),
        }));
    }
    Ok(json!({ "problems": entries }))
}
