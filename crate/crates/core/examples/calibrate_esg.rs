//! Fit the economic scenario generator to the bundled 1992-2020 history and
//! compare against the published preset.
//!
//! ```text
//! cargo run --release --example calibrate_esg
//! ```

use decumulation::data;
use decumulation::esg::{self, residual_diagnostics, EsgParams};

fn main() -> decumulation::Result<()> {
    let history = data::history()?;
    let fitted = esg::calibrate(&history)?;
    let preset = EsgParams::published();

    println!("{:>8} {:>9} {:>9}", "param", "fitted", "preset");
    for ((name, got), (_, want)) in fitted.entries().zip(preset.entries()) {
        println!("{name:>8} {got:>9.4} {want:>9.4}");
    }

    let diag = residual_diagnostics(&history, &fitted)?;
    println!(
        "\n{} residual years, largest off-diagonal residual correlation {:.2}",
        diag.years.len(),
        diag.max_abs_off_diagonal()
    );
    Ok(())
}
