//! The means-tested age pension across balances, today and at doubled prices.

use decumulation::account::{age_pension, PensionParams};

fn main() -> decumulation::Result<()> {
    let p = PensionParams::default();
    println!("asset-test cutoff: ${:.0}", p.asset_cutoff());
    println!("{:>10} {:>10} {:>10}", "wealth", "Q = 1", "Q = 2");
    for w in (0..=700_000).step_by(50_000) {
        let w = w as f64;
        println!(
            "{w:>10.0} {:>10.0} {:>10.0}",
            age_pension(w, 1.0, &p)?,
            age_pension(2.0 * w, 2.0, &p)?
        );
    }
    Ok(())
}
