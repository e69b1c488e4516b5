use std::path::Path;

use slatediv::io;
use slatediv::metrics::compare_arms;
use slatediv::model::{Dataset, CANONICAL_FEATURES};
use slatediv::sim::{label_from_log, run_experiment, Policy, RunOutput, SimConfig};

use crate::commands::{create, ensure_dir};
use crate::config::{self, SimulateConfig};
use crate::CliError;

pub fn run(
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    arm: Option<String>,
    gamma: Option<f64>,
    mode: Option<String>,
) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = config::load_toml(config_path)?;
    if let Some(seed) = seed {
        cfg.sim.seed = seed;
    }
    if let Some(arm) = arm {
        cfg.arm = arm;
    }
    if let Some(gamma) = gamma {
        cfg.gamma = gamma;
    }
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    let (run_control, run_treatment) = match cfg.arm.as_str() {
        "control" => (true, false),
        "treatment" => (false, true),
        "both" => (true, true),
        other => {
            return Err(CliError::Usage(format!(
                "unknown arm `{other}` (expected control, treatment or both)"
            )))
        }
    };

    ensure_dir(out)?;
    config::write_resolved(out, &cfg)?;

    let control = if run_control {
        let sim_cfg = cfg.sim.to_sim_config(Policy::Control)?;
        Some(run_arm(out, "control", &sim_cfg)?)
    } else {
        None
    };
    let treatment = if run_treatment {
        let sim_cfg = cfg.sim.to_sim_config(cfg.treatment_policy()?)?;
        Some(run_arm(out, "treatment", &sim_cfg)?)
    } else {
        None
    };

    if let (Some(control), Some(treatment)) = (&control, &treatment) {
        let rows = compare_arms(
            &treatment.report,
            &control.report,
            cfg.sim.bootstrap_resamples,
            cfg.sim.seed,
        )
        .map_err(CliError::data)?;
        io::write_compare_csv(create(&out.join("compare.csv"))?, &rows).map_err(CliError::data)?;
    }
    Ok(())
}

fn run_arm(out: &Path, name: &str, cfg: &SimConfig) -> Result<RunOutput, CliError> {
    let output = run_experiment(cfg).map_err(CliError::data)?;
    let dir = out.join(name);
    ensure_dir(&dir)?;
    io::write_report(create(&dir.join("report.json"))?, &output.report).map_err(CliError::data)?;
    io::write_metrics_csv(create(&dir.join("metrics.csv"))?, &output.report)
        .map_err(CliError::data)?;
    if cfg.keep_logs {
        io::write_logs(create(&dir.join("logs.jsonl"))?, &output.logs).map_err(CliError::data)?;
        // Labeled pages in the intent-model dataset format.
        let space = cfg.intent_space();
        let mut dataset = Dataset::new(
            CANONICAL_FEATURES.iter().map(|s| s.to_string()).collect(),
            space.ids().to_vec(),
        );
        for log in &output.logs {
            if let Some((x, y)) = label_from_log(log, cfg.n_intents()) {
                dataset.push(x, y).map_err(CliError::data)?;
            }
        }
        io::write_dataset(create(&dir.join("labels.jsonl"))?, &dataset).map_err(CliError::data)?;
    }
    if let Some(params) = &output.final_params {
        io::write_params(create(&dir.join("params.json"))?, params).map_err(CliError::data)?;
    }
    Ok(output)
}
