//! Deterministic drawdown rules used as benchmarks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esg::ScenarioPanel;
use crate::tape::Real;
use crate::transition::{record_path, Controller, Environment, Observation, PathRecord, PathView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Statutory minimum drawdown by age band.
    Minimum,
    /// 4% of the initial balance in real terms.
    FourPercent,
    /// First digit of age in percent, plus 2% for mid-range balances.
    RuleOfThumb,
    Modest,
    Comfortable,
    Luxury,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Minimum,
        StrategyKind::FourPercent,
        StrategyKind::RuleOfThumb,
        StrategyKind::Modest,
        StrategyKind::Comfortable,
        StrategyKind::Luxury,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Minimum => "minimum",
            StrategyKind::FourPercent => "four_percent",
            StrategyKind::RuleOfThumb => "rule_of_thumb",
            StrategyKind::Modest => "modest",
            StrategyKind::Comfortable => "comfortable",
            StrategyKind::Luxury => "luxury",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "minimum" | "min" => Ok(StrategyKind::Minimum),
            "fourpercent" | "4percent" | "4pct" => Ok(StrategyKind::FourPercent),
            "ruleofthumb" | "rot" => Ok(StrategyKind::RuleOfThumb),
            "modest" => Ok(StrategyKind::Modest),
            "comfortable" => Ok(StrategyKind::Comfortable),
            "luxury" => Ok(StrategyKind::Luxury),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Constants of the six rules; all dollar amounts are real.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// `(lowest age, rate)` bands in ascending age order.
    pub minimum_drawdown: Vec<(u32, f64)>,
    pub four_percent_rate: f64,
    pub rule_of_thumb_bonus: f64,
    pub rule_of_thumb_band: (f64, f64),
    pub modest_target: f64,
    pub comfortable_target: f64,
    pub luxury_target: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            minimum_drawdown: vec![
                (0, 0.04),
                (65, 0.05),
                (75, 0.06),
                (80, 0.07),
                (85, 0.09),
                (90, 0.11),
                (95, 0.14),
            ],
            four_percent_rate: 0.04,
            rule_of_thumb_bonus: 0.02,
            rule_of_thumb_band: (250_000.0, 500_000.0),
            modest_target: 28_220.0,
            comfortable_target: 44_183.0,
            luxury_target: 50_000.0,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if self.minimum_drawdown.is_empty() || self.minimum_drawdown[0].0 != 0 {
            return Err(Error::Config("minimum drawdown table must start at age 0".into()));
        }
        if self.minimum_drawdown.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("minimum drawdown ages must increase".into()));
        }
        let rates = self
            .minimum_drawdown
            .iter()
            .map(|b| b.1)
            .chain([self.four_percent_rate, self.rule_of_thumb_bonus]);
        if rates.into_iter().any(|r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::Config("drawdown rates must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn minimum_rate(&self, age: u32) -> f64 {
        self.minimum_drawdown
            .iter()
            .take_while(|(from, _)| *from <= age)
            .last()
            .map(|b| b.1)
            .unwrap_or(0.0)
    }

    /// Rule-of-thumb rate for `age` and real wealth `real_wealth`.
    pub fn rule_of_thumb_rate(&self, age: u32, real_wealth: f64) -> f64 {
        let mut first = age;
        while first >= 10 {
            first /= 10;
        }
        let (lo, hi) = self.rule_of_thumb_band;
        let bonus = if (lo..=hi).contains(&real_wealth) {
            self.rule_of_thumb_bonus
        } else {
            0.0
        };
        first as f64 / 100.0 + bonus
    }

    fn target(&self, kind: StrategyKind) -> Option<f64> {
        match kind {
            StrategyKind::Modest => Some(self.modest_target),
            StrategyKind::Comfortable => Some(self.comfortable_target),
            StrategyKind::Luxury => Some(self.luxury_target),
            _ => None,
        }
    }
}

/// Nominal consumption of a rule, capped at `wealth + pension`.
pub fn deterministic_consumption(
    kind: StrategyKind,
    params: &StrategyParams,
    age: u32,
    wealth: f64,
    pension: f64,
    deflator: f64,
    initial_wealth: f64,
) -> Result<f64> {
    let inputs = [wealth, pension, deflator, initial_wealth];
    if inputs.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("inputs must be non-negative and finite: {inputs:?}")));
    }
    Ok(consumption_generic(kind, params, age, wealth, pension, deflator, initial_wealth))
}

fn consumption_generic<T: Real>(
    kind: StrategyKind,
    params: &StrategyParams,
    age: u32,
    wealth: T,
    pension: T,
    deflator: f64,
    initial_wealth: f64,
) -> T {
    let resources = wealth + pension;
    let c = match kind {
        StrategyKind::Minimum => wealth * params.minimum_rate(age) + pension,
        StrategyKind::FourPercent => {
            pension + params.four_percent_rate * initial_wealth * deflator
        }
        StrategyKind::RuleOfThumb => {
            let rate = params.rule_of_thumb_rate(age, wealth.value() / deflator);
            wealth * rate + pension
        }
        StrategyKind::Modest | StrategyKind::Comfortable | StrategyKind::Luxury => {
            let target = params.target(kind).expect("target strategy");
            resources.lift(target * deflator)
        }
    };
    c.min_of(resources)
}

/// A rule as a [`Controller`].
#[derive(Clone, Debug)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub params: StrategyParams,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            params: StrategyParams::default(),
        }
    }
}

impl<T: Real> Controller<T> for Strategy {
    fn consumption(&self, obs: &Observation<T>) -> T {
        consumption_generic(
            self.kind,
            &self.params,
            obs.age,
            obs.wealth,
            obs.pension,
            obs.deflator,
            obs.initial_wealth,
        )
    }
}

/// Runs a rule along path `path` of `panel` with the shared transition.
pub fn rollout_deterministic(
    strategy: &Strategy,
    env: &Environment,
    panel: &ScenarioPanel,
    path: usize,
) -> Result<PathRecord> {
    if path >= panel.paths() {
        return Err(Error::Range(format!("path {path} of a {}-path panel", panel.paths())));
    }
    record_path(env, strategy, PathView::from_panel(panel, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(kind: StrategyKind, age: u32, w: f64, a: f64, q: f64) -> f64 {
        deterministic_consumption(kind, &StrategyParams::default(), age, w, a, q, 500_000.0).unwrap()
    }

    #[test]
    fn minimum_band() {
        assert_eq!(c(StrategyKind::Minimum, 67, 400_000.0, 0.0, 1.0), 20_000.0);
        let p = StrategyParams::default();
        assert_eq!(p.minimum_rate(64), 0.04);
        assert_eq!(p.minimum_rate(74), 0.05);
        assert_eq!(p.minimum_rate(75), 0.06);
        assert_eq!(p.minimum_rate(94), 0.11);
        assert_eq!(p.minimum_rate(108), 0.14);
    }

    #[test]
    fn rule_of_thumb_rates() {
        let p = StrategyParams::default();
        assert!((p.rule_of_thumb_rate(72, 400_000.0) - 0.09).abs() < 1e-15);
        assert!((p.rule_of_thumb_rate(72, 600_000.0) - 0.07).abs() < 1e-15);
        assert!((p.rule_of_thumb_rate(101, 100_000.0) - 0.01).abs() < 1e-15);
        let got = c(StrategyKind::RuleOfThumb, 72, 800_000.0, 0.0, 2.0);
        assert!((got - 0.09 * 800_000.0).abs() < 1e-9);
    }

    #[test]
    fn four_percent_is_real() {
        let got = c(StrategyKind::FourPercent, 80, 300_000.0, 1_000.0, 1.5);
        assert!((got - (30_000.0 + 1_000.0)).abs() < 1e-9);
    }

    #[test]
    fn targets_are_capped() {
        assert_eq!(c(StrategyKind::Luxury, 90, 30_000.0, 10_000.0, 1.0), 40_000.0);
        assert_eq!(c(StrategyKind::Luxury, 90, 0.0, 24_619.0, 1.0), 24_619.0);
        assert!((c(StrategyKind::Modest, 70, 400_000.0, 5_000.0, 1.1) - 31_042.0).abs() < 1e-9);
    }

    #[test]
    fn negative_inputs_rejected() {
        let p = StrategyParams::default();
        assert!(deterministic_consumption(StrategyKind::Minimum, &p, 67, -1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("RoT".parse::<StrategyKind>().unwrap(), StrategyKind::RuleOfThumb);
        assert!(matches!("annuity".parse::<StrategyKind>(), Err(Error::Config(_))));
    }
}
