use std::path::Path;

use slatediv::{divers, io};

use crate::commands::{create, ensure_dir, open};
use crate::config::{self, DiversifyConfig};
use crate::CliError;

pub fn run(
    input: &Path,
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    gamma: Option<f64>,
    mode: Option<String>,
) -> Result<(), CliError> {
    let mut cfg: DiversifyConfig = config::load_toml(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(gamma) = gamma {
        cfg.gamma = gamma;
    }
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    let diversifier = cfg.diversifier()?;

    let (_, prior, candidates) = io::read_diversify_input(open(input)?).map_err(CliError::data)?;
    let slate = divers::diversify(&prior, &candidates, &diversifier).map_err(CliError::data)?;

    ensure_dir(out)?;
    io::write_slate(create(&out.join("slate.jsonl"))?, &slate).map_err(CliError::data)?;
    config::write_resolved(out, &cfg)?;
    Ok(())
}
