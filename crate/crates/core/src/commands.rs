//! The pipeline stages behind the `decum` binary, each writing its outputs
//! into a directory or file.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::esg::{self, residual_diagnostics, PanelSpec};
use crate::evaluator::{compare, log_kde, median_paths, outperformance_curve, records};
use crate::policy_net::Checkpoint;
use crate::trainer::{train, TrainOutcome};
use crate::transition::{record_path, PathView, PolicyController};

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::io(&path, e))
}

/// Fits the ESG to the configured history; writes `esg_params.txt`,
/// `residuals.csv` and `correlation.csv` into `out`.
pub fn calibrate(cfg: &RunConfig, out: &Path) -> Result<esg::EsgParams> {
    create_dir(out)?;
    let history = cfg.history()?;
    let params = esg::calibrate(&history)?;
    params.save(out.join("esg_params.txt"))?;
    let diag = residual_diagnostics(&history, &params)?;
    diag.write_residuals_csv(create(&out.join("residuals.csv"))?)?;
    diag.write_correlation_csv(create(&out.join("correlation.csv"))?)?;
    Ok(params)
}

/// Simulates `paths` scenarios with `seed` and writes the panel CSV to `out`.
pub fn simulate(cfg: &RunConfig, paths: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = PanelSpec {
        paths,
        horizon: cfg.retiree.horizon,
        seed,
        omega: cfg.account.omega,
        max_cells: cfg.simulation.max_cells,
    };
    let panel = esg::simulate(&cfg.esg_params()?, &cfg.initial_state()?, &spec)?;
    panel.write_csv(create(out)?)
}

fn checkpoint_name(iter: usize) -> String {
    format!("iter_{iter:06}.json")
}

/// Trains a policy; writes `policy.json`, `checkpoints/iter_*.json`,
/// `train_report.csv` and `config.toml` into `out`.
pub fn train_policy(cfg: &RunConfig, out: &Path) -> Result<TrainOutcome> {
    create_dir(&out.join("checkpoints"))?;
    echo_config(cfg, out)?;
    let env = cfg.environment()?;
    let panel = cfg.training_panel()?;
    let config_json = cfg.to_json_value()?;
    let outcome = match train(&env, &panel, &cfg.training) {
        Ok(o) => o,
        Err(Error::Diverged {
            iteration,
            reason,
            last_good,
        }) => {
            let norm = crate::trainer::normalization(&env)?;
            Checkpoint::new(iteration - 1, (*last_good).clone(), norm, config_json)
                .save(out.join("last_good.json"))?;
            return Err(Error::Diverged {
                iteration,
                reason,
                last_good,
            });
        }
        Err(e) => return Err(e),
    };
    for (iter, params) in &outcome.snapshots {
        Checkpoint::new(*iter, params.clone(), outcome.norm, config_json.clone())
            .save(out.join("checkpoints").join(checkpoint_name(*iter)))?;
    }
    Checkpoint::new(
        cfg.training.iterations,
        outcome.params.clone(),
        outcome.norm,
        config_json,
    )
    .save(out.join("policy.json"))?;
    outcome.report.write_csv(create(&out.join("train_report.csv"))?)?;
    Ok(outcome)
}

/// The run configuration stored in a checkpoint.
pub fn checkpoint_config(ck: &Checkpoint) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_value(ck.config.clone())?;
    cfg.validate()?;
    Ok(cfg)
}

/// Label of a sensitivity scenario, e.g. `rho5_phi0.5_w500000_male`.
pub fn scenario_label(cfg: &RunConfig) -> String {
    format!(
        "rho{}_phi{}_w{}_{}",
        cfg.utility.rho, cfg.utility.phi, cfg.retiree.initial_wealth, cfg.retiree.gender
    )
}

fn sorted_checkpoints(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Compares the checkpoint's policy against every rule on the test panel.
///
/// Writes `utilities.csv`, `kde_<strategy>.csv`, `medians_<scenario>.csv`,
/// and `outperformance.csv` when `snapshots` holds a checkpoint directory.
pub fn evaluate(
    cfg: &RunConfig,
    checkpoint: &Checkpoint,
    snapshots: Option<&Path>,
    out: &Path,
) -> Result<crate::evaluator::EvalReport> {
    create_dir(out)?;
    echo_config(cfg, out)?;
    let env = cfg.environment()?;
    let panel = cfg.test_panel()?;
    let strategies = cfg.strategies();
    let ctl = PolicyController {
        params: &checkpoint.params,
        norm: checkpoint.normalization,
    };
    let report = compare(&env, &ctl, &strategies, &panel)?;
    report.write_utilities_csv(create(&out.join("utilities.csv"))?)?;
    for s in &report.strategies {
        let density = log_kde(&s.differences, 256)?;
        density.write_csv(create(&out.join(format!("kde_{}.csv", s.kind.name())))?)?;
    }
    let medians = median_paths(&records(&env, &ctl, &panel)?)?;
    medians.write_csv(create(&out.join(format!("medians_{}.csv", scenario_label(cfg))))?)?;

    if let Some(dir) = snapshots {
        let mut snaps = Vec::new();
        for path in sorted_checkpoints(dir)? {
            let ck = Checkpoint::load(&path)?;
            snaps.push((ck.iteration, ck.params));
        }
        snaps.sort_by_key(|s| s.0);
        let curve = outperformance_curve(&env, &checkpoint.normalization, &snaps, &strategies, &panel)?;
        curve.write_csv(create(&out.join("outperformance.csv"))?)?;
    }
    Ok(report)
}

/// One seeded path of the checkpoint's policy as
/// `age,q,R,consumption_real,wealth_real,pension_real`.
pub fn demo_path(cfg: &RunConfig, checkpoint: &Checkpoint, seed: u64, out: &Path) -> Result<()> {
    let env = cfg.environment()?;
    let spec = PanelSpec {
        paths: 1,
        horizon: cfg.retiree.horizon,
        seed,
        omega: cfg.account.omega,
        max_cells: cfg.simulation.max_cells,
    };
    let panel = esg::simulate(&cfg.esg_params()?, &cfg.initial_state()?, &spec)?;
    let ctl = PolicyController {
        params: &checkpoint.params,
        norm: checkpoint.normalization,
    };
    let rec = record_path(&env, &ctl, PathView::from_panel(&panel, 0))?;
    let mut w = csv::Writer::from_writer(create(out)?);
    let err = |e: csv::Error| Error::io(out, std::io::Error::other(e));
    w.write_record(["age", "q", "R", "consumption_real", "wealth_real", "pension_real"])
        .map_err(err)?;
    for t in 0..rec.ages.len() {
        w.write_record([
            rec.ages[t].to_string(),
            format!("{:?}", panel.state(0, t).inflation),
            format!("{:?}", rec.portfolio_return[t]),
            format!("{:?}", rec.consumption[t]),
            format!("{:?}", rec.wealth[t]),
            format!("{:?}", rec.pension[t]),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(out, e))
}
