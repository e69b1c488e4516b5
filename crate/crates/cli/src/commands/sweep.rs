use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use slatediv::io::{self, SweepRow};
use slatediv::metrics::ExperimentReport;
use slatediv::sim::{run_experiment, Policy};

use crate::commands::{create, ensure_dir};
use crate::config::{self, SweepConfig};
use crate::CliError;

pub fn run(
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    mode: Option<String>,
    workers: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg: SweepConfig = config::load_toml(config_path)?;
    if let Some(seed) = seed {
        cfg.sim.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    if cfg.gammas.is_empty() {
        return Err(CliError::Usage("gammas list must be non-empty".to_string()));
    }
    if cfg.gammas.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
        return Err(CliError::Usage("every gamma must be > 0".to_string()));
    }
    if cfg.workers == 0 {
        return Err(CliError::Usage("workers must be >= 1".to_string()));
    }
    let posterior_mode = config::parse_mode(&cfg.mode)?;

    let mut gammas = cfg.gammas.clone();
    gammas.sort_by(f64::total_cmp);

    ensure_dir(out)?;
    config::write_resolved(out, &cfg)?;

    // Sweep points never need per-page logs; the shared control runs first.
    let mut point_cfg = cfg.sim.clone();
    point_cfg.write_logs = false;
    let control_cfg = point_cfg.to_sim_config(Policy::Control)?;
    let control = run_experiment(&control_cfg).map_err(CliError::data)?;
    write_point(out, "control", &control.report)?;

    // Bounded worker pool over the gamma grid; results land in gamma order.
    let n_points = gammas.len();
    let results: Vec<Mutex<Option<Result<ExperimentReport, slatediv::Error>>>> =
        (0..n_points).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let n_workers = cfg.workers.min(n_points);
    std::thread::scope(|scope| {
        for _ in 0..n_workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_points {
                    break;
                }
                let sim_cfg = match point_cfg.to_sim_config(Policy::Treatment {
                    gamma: gammas[i],
                    mode: posterior_mode,
                }) {
                    Ok(cfg) => cfg,
                    Err(_) => unreachable!("validated above"),
                };
                let report = run_experiment(&sim_cfg).map(|o| o.report);
                *results[i].lock().expect("worker poisoned") = Some(report);
            });
        }
    });

    let mut rows = Vec::with_capacity(n_points);
    for (i, slot) in results.iter().enumerate() {
        let report = slot
            .lock()
            .expect("worker poisoned")
            .take()
            .expect("every point computed")
            .map_err(CliError::data)?;
        let label = format!("gamma-{}", gammas[i]);
        write_point(out, &label, &report)?;
        let a = &report.aggregates;
        rows.push(SweepRow {
            gamma: gammas[i],
            diversity: a.unique_clusters_per_user,
            novelty: a.novel_consumptions as f64,
            relevance: a.mean_relevance,
            dau_proxy: a.dau_proxy,
        });
    }

    io::write_sweep_csv(create(&out.join("sweep.csv"))?, &rows).map_err(CliError::data)?;
    Ok(())
}

fn write_point(out: &Path, name: &str, report: &ExperimentReport) -> Result<(), CliError> {
    let dir = out.join(name);
    ensure_dir(&dir)?;
    io::write_report(create(&dir.join("report.json"))?, report).map_err(CliError::data)?;
    io::write_metrics_csv(create(&dir.join("metrics.csv"))?, report).map_err(CliError::data)?;
    Ok(())
}
