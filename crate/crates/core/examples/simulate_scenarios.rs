//! Simulate 10,000 scenarios over 41 years and summarise the portfolio.

use decumulation::data;
use decumulation::esg::{self, EsgParams, PanelSpec};

fn main() -> decumulation::Result<()> {
    let p = EsgParams::published();
    let init = data::history()?.last_state()?;
    let panel = esg::simulate(&p, &init, &PanelSpec::new(10_000, 41, 2020, 0.7))?;

    let n = panel.paths() as f64;
    for t in [1, 10, 20, 41] {
        let mean_r = (0..panel.paths()).map(|m| panel.portfolio_return(m, t)).sum::<f64>() / n;
        let mean_q = (0..panel.paths()).map(|m| panel.deflator(m, t)).sum::<f64>() / n;
        println!("year {t:>2}: mean log return {mean_r:+.4}, mean price level {mean_q:.3}");
    }

    let first = panel.path_states(0);
    println!("\npath 0, year 1: {:?}", first[1]);
    Ok(())
}
