use std::path::Path;

use slatediv::io;
use slatediv::metrics::{compare_arms, slice_by_predicted_intent, sliced_trend_bootstrap};
use slatediv::model::predict_intents;
use slatediv::sim::SessionLog;

use crate::commands::{create, open};
use crate::config::{self, AnalyzeConfig};
use crate::CliError;

pub fn run(
    treatment_dir: &Path,
    control_dir: &Path,
    params_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    buckets: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg: AnalyzeConfig = config::load_toml(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(buckets) = buckets {
        cfg.buckets = buckets;
    }
    if cfg.buckets < 2 {
        return Err(CliError::Usage("buckets must be >= 2".to_string()));
    }

    let params = io::read_params(open(params_path)?).map_err(CliError::data)?;
    let t_logs = io::read_logs(open(&treatment_dir.join("logs.jsonl"))?).map_err(CliError::data)?;
    let c_logs = io::read_logs(open(&control_dir.join("logs.jsonl"))?).map_err(CliError::data)?;
    let t_report =
        io::read_report(open(&treatment_dir.join("report.json"))?).map_err(CliError::data)?;
    let c_report =
        io::read_report(open(&control_dir.join("report.json"))?).map_err(CliError::data)?;

    // Post-hoc scoring: the model is applied to logged features from both
    // arms, so the control arm never needed it at serving time.
    let score = |logs: &[SessionLog]| -> Result<Vec<f64>, CliError> {
        logs.iter()
            .map(|l| {
                predict_intents(&params, &l.features)
                    .map(|p| p.probs()[0])
                    .map_err(CliError::data)
            })
            .collect()
    };
    let t_preds = score(&t_logs)?;
    let c_preds = score(&c_logs)?;

    let slices = slice_by_predicted_intent(&t_logs, &t_preds, &c_logs, &c_preds, cfg.buckets)
        .map_err(CliError::data)?;
    let n_users = t_report.per_user.len().max(c_report.per_user.len());
    let trends = sliced_trend_bootstrap(
        &t_logs,
        &t_preds,
        &c_logs,
        &c_preds,
        cfg.buckets,
        n_users,
        cfg.bootstrap_resamples,
        cfg.seed,
    )
    .map_err(CliError::data)?;
    let compare = compare_arms(&t_report, &c_report, cfg.bootstrap_resamples, cfg.seed)
        .map_err(CliError::data)?;

    crate::commands::ensure_dir(out)?;
    io::write_slices_csv(create(&out.join("slices.csv"))?, &slices).map_err(CliError::data)?;
    write_trends_csv(out, &trends)?;
    io::write_compare_csv(create(&out.join("compare.csv"))?, &compare).map_err(CliError::data)?;
    config::write_resolved(out, &cfg)?;
    Ok(())
}

fn write_trends_csv(out: &Path, trends: &[slatediv::metrics::SlicedTrend]) -> Result<(), CliError> {
    use std::io::Write;
    let mut w = create(&out.join("trend.csv"))?;
    writeln!(w, "metric,spearman_rho,p_one_sided").map_err(CliError::data)?;
    for t in trends {
        writeln!(
            w,
            "{},{},{}",
            t.metric,
            t.rho.map(|v| v.to_string()).unwrap_or_default(),
            t.p_one_sided.map(|v| v.to_string()).unwrap_or_default()
        )
        .map_err(CliError::data)?;
    }
    Ok(())
}
