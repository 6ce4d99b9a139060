//! Survival from 67 and period life expectancy for both genders.

use decumulation::data;
use decumulation::mortality::Gender;

fn main() -> decumulation::Result<()> {
    let table = data::life_table()?;
    for g in [Gender::Male, Gender::Female] {
        let c = table.survival_curve(g, 67, 41)?;
        println!(
            "{g}: e(65) = {:.1}, P(alive at 85) = {:.3}, P(alive at 100) = {:.4}",
            table.life_expectancy(g, 65)?,
            c.tpx[18],
            c.tpx[33]
        );
    }
    Ok(())
}
