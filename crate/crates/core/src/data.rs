//! Data files compiled into the crate.

use crate::error::Result;
use crate::esg::HistoricalSeries;
use crate::mortality::LifeTable;

/// Australian annual index history, June 1992 to June 2020.
pub const HISTORY_CSV: &str = include_str!("../data/history.csv");

/// Single-age period life table with 25-year improvement factors, ages 50 to 110.
pub const LIFE_TABLE_CSV: &str = include_str!("../data/life_table.csv");

pub fn history() -> Result<HistoricalSeries> {
    HistoricalSeries::from_csv_reader(HISTORY_CSV.as_bytes(), "history.csv")
}

pub fn life_table() -> Result<LifeTable> {
    LifeTable::from_csv_reader(LIFE_TABLE_CSV.as_bytes(), "life_table.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_parse() {
        let h = history().unwrap();
        assert_eq!(h.len(), 29);
        assert_eq!(h.records()[0].year, 1992);
        let t = life_table().unwrap();
        assert_eq!(t.terminal_age(), 110);
    }

    #[test]
    fn last_state_from_final_rows() {
        let s = history().unwrap().last_state().unwrap();
        assert!((s.inflation - (116.6f64 / 114.8).ln()).abs() < 1e-12);
        assert!((s.short_rate - 0.00102).abs() < 1e-15);
        assert_eq!(s.short_rate, s.real_rate + s.inflation);
    }
}
