//! Train the consumption network and print how first-year spending evolves.
//!
//! Pass an iteration count to shorten the run (default 4,000, a few minutes).

use decumulation::config::RunConfig;
use decumulation::trainer::train;
use decumulation::transition::{record_path, PathView, PolicyController};

fn main() -> decumulation::Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(n) = std::env::args().nth(1) {
        cfg.training.iterations = n.parse().expect("iteration count");
    }
    cfg.training.checkpoint_every = (cfg.training.iterations / 10).max(1);
    let env = cfg.environment()?;
    let panel = cfg.training_panel()?;
    let out = train(&env, &panel, &cfg.training)?;

    let view = PathView::from_panel(&panel, 0);
    for (iter, params) in &out.snapshots {
        let ctl = PolicyController { params, norm: out.norm };
        let rec = record_path(&env, &ctl, view)?;
        println!("iteration {iter:>5}: first-year consumption ${:.0}", rec.consumption[0]);
    }
    Ok(())
}
