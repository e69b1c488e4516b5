use std::path::Path;

use slatediv::io;
use slatediv::model::{evaluate, feature_correlations, predict_batch, train};

use crate::commands::{create, ensure_dir, open};
use crate::config::{self, TrainIntentConfig};
use crate::CliError;

pub fn run(
    dataset_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg: TrainIntentConfig = config::load_toml(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = epochs {
        cfg.epochs = epochs;
    }
    let train_cfg = cfg.train_config()?;

    let dataset = io::read_dataset(open(dataset_path)?).map_err(CliError::data)?;
    let correlation_intent = match &cfg.correlation_intent {
        Some(name) => dataset
            .intents
            .iter()
            .position(|i| i == name)
            .ok_or_else(|| {
                CliError::Usage(format!("correlation_intent `{name}` not in dataset"))
            })?,
        None => 0,
    };

    let params = train(&dataset, &train_cfg).map_err(CliError::data)?;
    let eval = evaluate(&params, &dataset).map_err(CliError::data)?;
    let predictions: Vec<f64> = predict_batch(&params, &dataset.examples)
        .map_err(CliError::data)?
        .into_iter()
        .map(|p| p[correlation_intent])
        .collect();
    let correlations = feature_correlations(&dataset, &predictions).map_err(CliError::data)?;

    ensure_dir(out)?;
    io::write_params(create(&out.join("params.json"))?, &params).map_err(CliError::data)?;
    io::write_evaluation_csv(create(&out.join("evaluation.csv"))?, &eval)
        .map_err(CliError::data)?;
    io::write_reliability_csv(create(&out.join("reliability.csv"))?, &eval)
        .map_err(CliError::data)?;
    io::write_correlations_csv(create(&out.join("correlations.csv"))?, &correlations)
        .map_err(CliError::data)?;
    config::write_resolved(out, &cfg)?;
    Ok(())
}
