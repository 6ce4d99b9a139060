//! Train briefly, then score the policy against every rule on fresh scenarios.

use decumulation::config::RunConfig;
use decumulation::evaluator::{compare, mean};
use decumulation::trainer::train;
use decumulation::transition::PolicyController;

fn main() -> decumulation::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.training.iterations = std::env::args().nth(1).map_or(1_000, |n| n.parse().expect("iterations"));
    let env = cfg.environment()?;
    let out = train(&env, &cfg.training_panel()?, &cfg.training)?;
    let ctl = PolicyController { params: &out.params, norm: out.norm };

    let test = cfg.test_panel()?;
    let report = compare(&env, &ctl, &cfg.strategies(), &test)?;
    println!("policy mean utility {:.4e}", report.mean_policy_utility());
    for s in &report.strategies {
        println!(
            "{:>14}: mean {:.4e}, beaten on {:>5} of {} paths",
            s.kind.name(),
            mean(&s.utilities),
            s.outperformed,
            report.paths()
        );
    }
    Ok(())
}
