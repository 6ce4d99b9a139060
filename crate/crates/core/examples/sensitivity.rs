//! Median consumption paths for a few risk-aversion and bequest settings.
//!
//! Each scenario trains its own network; pass an iteration count to trade
//! accuracy for time.

use decumulation::config::RunConfig;
use decumulation::evaluator::{median_paths, records};
use decumulation::trainer::train;
use decumulation::transition::PolicyController;

fn main() -> decumulation::Result<()> {
    let iterations = std::env::args().nth(1).map_or(1_000, |n| n.parse().expect("iterations"));
    for (rho, phi) in [(2.0, 0.5), (5.0, 0.0), (5.0, 0.5), (8.0, 0.5)] {
        let mut cfg = RunConfig::default();
        cfg.utility.rho = rho;
        cfg.utility.phi = phi;
        cfg.training.iterations = iterations;
        cfg.simulation.test_paths = 2_000;
        let env = cfg.environment()?;
        let out = train(&env, &cfg.training_panel()?, &cfg.training)?;
        let ctl = PolicyController { params: &out.params, norm: out.norm };
        let med = median_paths(&records(&env, &ctl, &cfg.test_panel()?)?)?;
        let at = |age: u32| med.consumption[(age - 67) as usize];
        println!(
            "rho {rho}, phi {phi}: median consumption at 67/80/95 = {:.0}/{:.0}/{:.0}",
            at(67),
            at(80),
            at(95)
        );
    }
    Ok(())
}
