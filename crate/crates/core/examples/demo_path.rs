//! Follow one retiree under the rule of thumb and an untrained network.

use decumulation::baselines::{Strategy, StrategyKind};
use decumulation::config::RunConfig;
use decumulation::policy_net::he_init;
use decumulation::trainer::normalization;
use decumulation::transition::{record_path, PathView, PolicyController};

fn main() -> decumulation::Result<()> {
    let cfg = RunConfig::default();
    let env = cfg.environment()?;
    let panel = cfg.test_panel()?;
    let view = PathView::from_panel(&panel, 0);

    let rot = record_path(&env, &Strategy::new(StrategyKind::RuleOfThumb), view)?;
    let params = he_init(cfg.training.widths, 1)?;
    let net = PolicyController { params: &params, norm: normalization(&env)? };
    let dnn = record_path(&env, &net, view)?;

    println!("{:>4} {:>8} {:>10} {:>10} {:>10} {:>10}", "age", "R", "rot c", "rot w", "net c", "net w");
    for t in (0..rot.ages.len()).step_by(4) {
        println!(
            "{:>4} {:>+8.3} {:>10.0} {:>10.0} {:>10.0} {:>10.0}",
            rot.ages[t], rot.portfolio_return[t], rot.consumption[t], rot.wealth[t], dnn.consumption[t], dnn.wealth[t]
        );
    }
    println!("utility: rule of thumb {:.4e}, untrained network {:.4e}", rot.utility, dnn.utility);
    Ok(())
}
