//! Run configuration: one TOML file with a section per component.
//!
//! ```toml
//! [retiree]
//! age = 67
//! gender = "male"
//! initial_wealth = 500000.0
//!
//! [utility]
//! rho = 5.0
//! phi = 0.5
//!
//! [simulation]
//! train_paths = 5000
//! test_paths = 10000
//!
//! [training]
//! iterations = 2000
//! ```
//!
//! Every field has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::account::{AccountParams, PensionParams};
use crate::baselines::{Strategy, StrategyKind, StrategyParams};
use crate::data;
use crate::error::{Error, Result};
use crate::esg::{self, EconState, EsgParams, HistoricalSeries, PanelSpec, ScenarioPanel};
use crate::mortality::{Gender, LifeTable, DEFAULT_BASE_LAG};
use crate::trainer::TrainConfig;
use crate::transition::Environment;
use crate::utility::UtilityParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetireeConfig {
    pub age: u32,
    pub gender: Gender,
    pub initial_wealth: f64,
    /// Years after retirement; the last decision is taken at `age + horizon`.
    pub horizon: usize,
    pub base_lag: f64,
}

impl Default for RetireeConfig {
    fn default() -> Self {
        Self {
            age: 67,
            gender: Gender::Male,
            initial_wealth: 500_000.0,
            horizon: 41,
            base_lag: DEFAULT_BASE_LAG,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig {
    pub rho: f64,
    pub phi: f64,
    pub floor_epsilon: f64,
    /// Defaults to the initial wealth.
    pub money_unit: Option<f64>,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        let u = UtilityParams::default();
        Self {
            rho: u.rho,
            phi: u.phi,
            floor_epsilon: u.floor_epsilon,
            money_unit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Returns of the last two historical years.
    History,
    /// Deterministic fixed point of the recurrences.
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsgConfig {
    /// Coefficient file written by `calibrate`; the published values otherwise.
    pub params_file: Option<PathBuf>,
    pub initial_state: InitialState,
}

impl Default for EsgConfig {
    fn default() -> Self {
        Self {
            params_file: None,
            initial_state: InitialState::History,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub train_paths: usize,
    pub test_paths: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub max_cells: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            train_paths: 5_000,
            test_paths: 10_000,
            train_seed: 2020,
            test_seed: 7_777,
            max_cells: esg::DEFAULT_MAX_CELLS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Historical index CSV; the bundled table when absent.
    pub history: Option<PathBuf>,
    /// Life-table CSV; the bundled table when absent.
    pub life_table: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub retiree: RetireeConfig,
    pub utility: UtilityConfig,
    pub pension: PensionParams,
    pub account: AccountParams,
    pub esg: EsgConfig,
    pub simulation: SimulationConfig,
    pub training: TrainConfig,
    pub strategies: StrategyParams,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.retiree.horizon == 0 {
            return Err(Error::Config("horizon must be at least one year".into()));
        }
        if self.simulation.train_paths == 0 || self.simulation.test_paths == 0 {
            return Err(Error::Config("path counts must be positive".into()));
        }
        if self.simulation.train_seed == self.simulation.test_seed {
            return Err(Error::Config("training and test panels need different seeds".into()));
        }
        self.utility_params().validate()?;
        self.pension.validate()?;
        self.account.validate()?;
        self.strategies.validate()?;
        self.training.validate(self.simulation.train_paths)
    }

    pub fn utility_params(&self) -> UtilityParams {
        UtilityParams {
            rho: self.utility.rho,
            phi: self.utility.phi,
            floor_epsilon: self.utility.floor_epsilon,
            money_unit: self.utility.money_unit.unwrap_or(self.retiree.initial_wealth),
        }
    }

    pub fn life_table(&self) -> Result<LifeTable> {
        let table = match &self.data.life_table {
            Some(p) => LifeTable::load(p)?,
            None => data::life_table()?,
        };
        table.with_base_lag(self.retiree.base_lag)
    }

    pub fn history(&self) -> Result<HistoricalSeries> {
        match &self.data.history {
            Some(p) => HistoricalSeries::load(p),
            None => data::history(),
        }
    }

    pub fn esg_params(&self) -> Result<EsgParams> {
        let p = match &self.esg.params_file {
            Some(path) => EsgParams::load(path)?,
            None => EsgParams::published(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn initial_state(&self) -> Result<EconState> {
        match self.esg.initial_state {
            InitialState::History => self.history()?.last_state(),
            InitialState::Stationary => Ok(EconState::stationary(&self.esg_params()?)),
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        let r = &self.retiree;
        let survival = self.life_table()?.survival_curve(r.gender, r.age, r.horizon)?;
        let env = Environment {
            retirement_age: r.age,
            initial_wealth: r.initial_wealth,
            survival,
            utility: self.utility_params(),
            pension: self.pension,
            account: self.account,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        StrategyKind::ALL
            .iter()
            .map(|&kind| Strategy {
                kind,
                params: self.strategies.clone(),
            })
            .collect()
    }

    fn panel(&self, paths: usize, seed: u64) -> Result<ScenarioPanel> {
        let spec = PanelSpec {
            paths,
            horizon: self.retiree.horizon,
            seed,
            omega: self.account.omega,
            max_cells: self.simulation.max_cells,
        };
        esg::simulate(&self.esg_params()?, &self.initial_state()?, &spec)
    }

    pub fn training_panel(&self) -> Result<ScenarioPanel> {
        self.panel(self.simulation.train_paths, self.simulation.train_seed)
    }

    pub fn test_panel(&self) -> Result<ScenarioPanel> {
        self.panel(self.simulation.test_paths, self.simulation.test_seed)
    }

    /// JSON echo stored alongside outputs and checkpoints.
    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[retiree]\ngender = \"female\"\ninitial_wealth = 300000.0\n[utility]\nrho = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.retiree.gender, Gender::Female);
        assert_eq!(cfg.utility_params().money_unit, 300_000.0);
        assert_eq!(cfg.utility_params().rho, 2.0);
        assert_eq!(cfg.retiree.age, 67);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(
            RunConfig::from_toml_str("[retiree]\nagee = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_toml_str("[utility]\nphi = 1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[simulation]\ntest_seed = 2020\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn default_environment_spans_to_age_108() {
        let env = RunConfig::default().environment().unwrap();
        assert_eq!(env.horizon(), 41);
        assert_eq!(env.retirement_age + env.horizon() as u32, 108);
    }
}
