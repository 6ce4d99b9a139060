//! Adam, BPTT gradients and the training loop.

use decumulation::account::age_pension;
use decumulation::config::RunConfig;
use decumulation::esg::{self, EsgParams, PanelSpec};
use decumulation::data;
use decumulation::mortality::Gender;
use decumulation::policy_net::{he_init, MlpParams, Normalization, PolicyInput};
use decumulation::trainer::{
    adam_step, batch_gradient, rollout, rollout_gradient, train, AdamState, TrainConfig,
};
use decumulation::transition::{Environment, PathView};
use decumulation::utility::UtilityParams;

fn environment(horizon: usize) -> Environment {
    let table = data::life_table().unwrap();
    Environment {
        retirement_age: 67,
        initial_wealth: 500_000.0,
        survival: table.survival_curve(Gender::Male, 67, horizon).unwrap(),
        utility: UtilityParams {
            money_unit: 500_000.0,
            ..Default::default()
        },
        pension: Default::default(),
        account: Default::default(),
    }
}

fn panel(paths: usize, horizon: usize, seed: u64) -> esg::ScenarioPanel {
    let init = data::history().unwrap().last_state().unwrap();
    esg::simulate(&EsgParams::published(), &init, &PanelSpec::new(paths, horizon, seed, 0.7)).unwrap()
}

#[test]
fn first_adam_step_moves_each_parameter_by_the_learning_rate() {
    let widths = [2, 2, 2];
    let start = he_init(widths, 4).unwrap();
    let grad_values: Vec<f64> = (0..start.len()).map(|i| (i as f64 - 20.0) * 0.37).collect();
    let grad = MlpParams::from_values(widths, grad_values.clone()).unwrap();
    let mut params = start.clone();
    let mut adam = AdamState::new(params.len(), 0.01);
    adam_step(&mut adam, &mut params, &grad).unwrap();
    for i in 0..params.len() {
        let g = grad_values[i];
        let expected = start.as_slice()[i] - 0.01 * g / (g.abs() + 1e-8);
        assert!((params.as_slice()[i] - expected).abs() <= 1e-15, "parameter {i}");
    }
}

#[test]
fn adam_rejects_mismatched_gradients() {
    let mut params = he_init([3, 3, 3], 1).unwrap();
    let mut adam = AdamState::new(params.len(), 0.01);
    assert!(adam_step(&mut adam, &mut params, &MlpParams::zeros([2, 2, 2])).is_err());
}

/// With a single decision, the objective is `u((W0 + A0) * sigmoid(z))` and its
/// derivative in the output bias is available in closed form.
#[test]
fn single_period_gradient_matches_the_chain_rule() {
    let env = environment(0);
    let path = panel(1, 1, 3);
    let view = PathView::from_panel(&path, 0);
    let params = he_init([20, 20, 20], 9).unwrap();
    let norm = Normalization::new(0, env.initial_wealth).unwrap();
    let (value, grad) = rollout_gradient(&params, &norm, &env, view).unwrap();

    let w0 = env.initial_wealth;
    let resources = w0 + age_pension(w0, 1.0, &env.pension).unwrap();
    let input = PolicyInput { t: 0, wealth: w0, last_return: 0.0, deflator: 1.0 };
    let z = params.evaluate(norm.features(&input));
    let s = 1.0 / (1.0 + (-z).exp());
    let c = resources * s;
    let unit = env.utility.money_unit;
    let rho = env.utility.rho;
    let u = (c / unit).powf(1.0 - rho) / (1.0 - rho);
    let du_dbias = (c / unit).powf(-rho) / unit * resources * s * (1.0 - s);

    assert!((value - u).abs() <= 1e-12 * u.abs());
    let bias = grad.as_slice()[grad.len() - 1];
    assert!((bias - du_dbias).abs() <= 1e-10 * du_dbias.abs(), "{bias} vs {du_dbias}");
}

#[test]
fn batch_objective_is_the_mean_of_path_objectives() {
    let env = environment(20);
    let panel = panel(64, 20, 5);
    let params = he_init([20, 20, 20], 2).unwrap();
    let norm = Normalization::new(20, env.initial_wealth).unwrap();
    let paths: Vec<usize> = (0..64).rev().step_by(3).collect();
    let (batch, grad) = batch_gradient(&params, &norm, &env, &panel, &paths).unwrap();
    let mean = paths
        .iter()
        .map(|&m| rollout(&params, &norm, &env, &panel, m).unwrap())
        .sum::<f64>()
        / paths.len() as f64;
    assert!((batch - mean).abs() <= 1e-12 * mean.abs());

    let mut manual = vec![0.0; params.len()];
    for &m in &paths {
        let (_, g) = rollout_gradient(&params, &norm, &env, PathView::from_panel(&panel, m)).unwrap();
        for (a, b) in manual.iter_mut().zip(g.as_slice()) {
            *a += b / paths.len() as f64;
        }
    }
    for (a, b) in manual.iter().zip(grad.as_slice()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-300);
    }
}

fn small_run(iterations: usize) -> (RunConfig, TrainConfig) {
    let mut cfg = RunConfig::default();
    cfg.simulation.train_paths = 1_000;
    let training = TrainConfig {
        iterations,
        log_every: 1,
        checkpoint_every: 50,
        ..cfg.training.clone()
    };
    (cfg, training)
}

#[test]
fn zero_iterations_returns_the_initial_network() {
    let (cfg, training) = small_run(0);
    let out = train(&cfg.environment().unwrap(), &cfg.training_panel().unwrap(), &training).unwrap();
    assert_eq!(out.params, he_init(training.widths, training.seed).unwrap());
    assert!(out.report.rows.is_empty());
    assert_eq!(out.snapshots.len(), 1);
}

#[test]
fn short_training_run_improves_the_objective() {
    let (cfg, training) = small_run(200);
    let env = cfg.environment().unwrap();
    let panel = cfg.training_panel().unwrap();
    let out = train(&env, &panel, &training).unwrap();
    let objectives: Vec<f64> = out.report.rows.iter().map(|r| r.objective).collect();
    assert_eq!(objectives.len(), 200);
    // Trailing 50-iteration averages, read at the end of each 50-iteration block.
    let blocks: Vec<f64> = objectives.chunks(50).map(|w| w.iter().sum::<f64>() / 50.0).collect();
    assert!(blocks.windows(2).all(|b| b[1] >= b[0]), "{blocks:?}");

    let norm = out.norm;
    let before = he_init(training.widths, training.seed).unwrap();
    let full = |p: &MlpParams| {
        (0..panel.paths()).map(|m| rollout(p, &norm, &env, &panel, m).unwrap()).sum::<f64>()
    };
    assert!(full(&out.params) > full(&before));
    let iters: Vec<usize> = out.snapshots.iter().map(|s| s.0).collect();
    assert_eq!(iters, [0, 50, 100, 150, 200]);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let (cfg, training) = small_run(15);
    let env = cfg.environment().unwrap();
    let panel = cfg.training_panel().unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&env, &panel, &training).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.params, b.params);
    let objectives = |o: &decumulation::trainer::TrainOutcome| {
        o.report.rows.iter().map(|r| r.objective.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(objectives(&a), objectives(&b));
}
