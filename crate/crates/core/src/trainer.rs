//! Policy training: taped rollouts along scenario paths, backpropagation
//! through every year of the wealth recursion, and Adam on minibatches.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esg::ScenarioPanel;
use crate::policy_net::{he_init, MlpParams, Normalization};
use crate::tape::Tape;
use crate::transition::{run_path, Controller, Environment, PathView, PolicyController};

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub k: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(len: usize, alpha: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            k: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }
}

/// One bias-corrected Adam descent step on `params` along `grad`.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grad: &MlpParams) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Dimension(format!(
            "Adam state {} / gradient {} / parameters {n}",
            state.m.len(),
            grad.len()
        )));
    }
    state.k += 1;
    let k = state.k as i32;
    let c1 = 1.0 - state.beta1.powi(k);
    let c2 = 1.0 - state.beta2.powi(k);
    let g = grad.as_slice();
    let p = params.as_mut_slice();
    for i in 0..n {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        p[i] -= state.alpha * m_hat / (v_hat.sqrt() + state.eps_hat);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Seeds network initialisation and minibatch sampling.
    pub seed: u64,
    pub learning_rate: f64,
    pub widths: [usize; 3],
    /// Keep a parameter snapshot every this many iterations (0 disables).
    pub checkpoint_every: usize,
    /// Record the training objective every this many iterations.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 4_000,
            batch_size: 512,
            seed: 1,
            learning_rate: 5e-4,
            widths: [20, 20, 20],
            checkpoint_every: 100,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, paths: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > paths {
            return Err(Error::Config(format!(
                "batch size {} must lie in 1..={paths}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iter: usize,
    /// Mean lifetime utility over the minibatch.
    pub objective: f64,
    pub wallclock_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<ReportRow>,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<train report>", std::io::Error::other(e));
        w.write_record(["iter", "objective", "wallclock_ms"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                format!("{:?}", r.objective),
                format!("{:.3}", r.wallclock_ms),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<train report>", e))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub norm: Normalization,
    pub report: TrainReport,
    /// `(iteration, parameters)` at the checkpoint cadence, ending with the final state.
    pub snapshots: Vec<(usize, MlpParams)>,
}

/// Feature scaling used by every policy of `env`.
pub fn normalization(env: &Environment) -> Result<Normalization> {
    Normalization::new(env.horizon(), env.initial_wealth)
}

/// Realized lifetime utility of the policy along one path.
pub fn rollout(
    params: &MlpParams,
    norm: &Normalization,
    env: &Environment,
    panel: &ScenarioPanel,
    path: usize,
) -> Result<f64> {
    let ctl = PolicyController { params, norm: *norm };
    run_path(env, &ctl, PathView::from_panel(panel, path), env.initial_wealth, None)
}

/// Realized lifetime utility and its gradient with respect to every network
/// parameter, through the whole trajectory.
pub fn rollout_gradient(
    params: &MlpParams,
    norm: &Normalization,
    env: &Environment,
    path: PathView<'_>,
) -> Result<(f64, MlpParams)> {
    let ctl = PolicyController { params, norm: *norm };
    taped_gradient(env, &ctl, path, params)
}

/// Gradient of any taped controller that evaluates the network `params`.
pub fn taped_gradient<C>(
    env: &Environment,
    controller: &C,
    path: PathView<'_>,
    params: &MlpParams,
) -> Result<(f64, MlpParams)>
where
    C: for<'t> Controller<crate::tape::Var<'t>>,
{
    let tape = Tape::with_capacity(64 * (env.horizon() + 1));
    let w0 = tape.constant(env.initial_wealth);
    let objective = run_path(env, controller, path, w0, None)?;
    let grads = tape.gradient(objective, 1.0, Some(params))?;
    let value = objective.value();
    let grad = grads
        .into_net()
        .ok_or_else(|| Error::Structural("no network gradient recorded".into()))?;
    Ok((value, grad))
}

/// Mean objective over `paths` and the mean gradient, reduced in path order.
pub fn batch_gradient(
    params: &MlpParams,
    norm: &Normalization,
    env: &Environment,
    panel: &ScenarioPanel,
    paths: &[usize],
) -> Result<(f64, MlpParams)> {
    let parts: Vec<(f64, MlpParams)> = paths
        .par_iter()
        .map(|&m| rollout_gradient(params, norm, env, PathView::from_panel(panel, m)))
        .collect::<Result<_>>()?;
    let mut grad = MlpParams::zeros(params.widths());
    let mut total = 0.0;
    for (value, g) in &parts {
        total += value;
        for (a, b) in grad.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a += b;
        }
    }
    let n = paths.len() as f64;
    for a in grad.as_mut_slice() {
        *a /= n;
    }
    Ok((total / n, grad))
}

/// Mean realized utility of the policy over every path of `panel`.
pub fn mean_objective(
    params: &MlpParams,
    norm: &Normalization,
    env: &Environment,
    panel: &ScenarioPanel,
) -> Result<f64> {
    let values: Vec<f64> = (0..panel.paths())
        .into_par_iter()
        .map(|m| rollout(params, norm, env, panel, m))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn batch_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6261_7463_68);
    rng
}

/// Maximizes the minibatch estimate of expected lifetime utility.
pub fn train(env: &Environment, panel: &ScenarioPanel, config: &TrainConfig) -> Result<TrainOutcome> {
    let params = he_init(config.widths, config.seed)?;
    train_from(env, panel, config, params)
}

/// As [`train`], starting from `params`.
pub fn train_from(
    env: &Environment,
    panel: &ScenarioPanel,
    config: &TrainConfig,
    mut params: MlpParams,
) -> Result<TrainOutcome> {
    env.validate()?;
    config.validate(panel.paths())?;
    if panel.horizon() < env.horizon() {
        return Err(Error::Config(format!(
            "panel horizon {} shorter than the retirement horizon {}",
            panel.horizon(),
            env.horizon()
        )));
    }
    let norm = normalization(env)?;
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let mut rng = batch_rng(config.seed);
    let mut report = TrainReport::default();
    let mut snapshots = Vec::new();
    let start = Instant::now();
    let log_every = config.log_every.max(1);

    if config.checkpoint_every > 0 {
        snapshots.push((0, params.clone()));
    }
    for iter in 1..=config.iterations {
        let batch = rand::seq::index::sample(&mut rng, panel.paths(), config.batch_size).into_vec();
        let diverged = |reason: String, last: &MlpParams| Error::Diverged {
            iteration: iter,
            reason,
            last_good: Box::new(last.clone()),
        };
        let (objective, grad) = match batch_gradient(&params, &norm, env, panel, &batch) {
            Ok(v) => v,
            Err(Error::Numeric(reason)) => return Err(diverged(reason, &params)),
            Err(e) => return Err(e),
        };
        if !objective.is_finite() || !grad.is_finite() {
            return Err(diverged(format!("objective {objective}"), &params));
        }
        let last_good = params.clone();
        let loss_grad = MlpParams::from_values(
            grad.widths(),
            grad.as_slice().iter().map(|g| -g).collect(),
        )?;
        adam_step(&mut adam, &mut params, &loss_grad)?;
        if !params.is_finite() {
            return Err(diverged("non-finite parameters after update".into(), &last_good));
        }
        if iter % log_every == 0 || iter == config.iterations {
            report.rows.push(ReportRow {
                iter,
                objective,
                wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        if config.checkpoint_every > 0 && iter % config.checkpoint_every == 0 {
            snapshots.push((iter, params.clone()));
        }
    }
    if snapshots.last().map(|s| s.0) != Some(config.iterations) {
        snapshots.push((config.iterations, params.clone()));
    }
    Ok(TrainOutcome {
        params,
        norm,
        report,
        snapshots,
    })
}
