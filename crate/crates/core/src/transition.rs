//! One simulated retirement: pension, consumption decision, utility and the
//! wealth update, year by year along a scenario path.
//!
//! The loop is generic over [`Real`], so the same code produces plain values
//! for evaluation and a differentiable tape for training.

use serde::{Deserialize, Serialize};

use crate::account::{
    age_pension_generic, check_consumption, fees_generic, next_wealth, AccountParams,
    PensionParams,
};
use crate::error::{Error, Result};
use crate::esg::ScenarioPanel;
use crate::mortality::SurvivalCurve;
use crate::policy_net::{consumption, MlpParams, Normalization, PolicyInput};
use crate::tape::Real;
use crate::utility::{period_bequest, period_consumption, UtilityParams};

/// Everything about the retiree and the account that is fixed along a path.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub retirement_age: u32,
    pub initial_wealth: f64,
    pub survival: SurvivalCurve,
    pub utility: UtilityParams,
    pub pension: PensionParams,
    pub account: AccountParams,
}

impl Environment {
    pub fn horizon(&self) -> usize {
        self.survival.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_wealth >= 0.0) || !self.initial_wealth.is_finite() {
            return Err(Error::Config(format!(
                "initial wealth must be finite and non-negative, got {}",
                self.initial_wealth
            )));
        }
        self.utility.validate()?;
        self.pension.validate()?;
        self.account.validate()
    }
}

/// Returns and deflators of one scenario, indexed by year `0..=horizon`.
#[derive(Clone, Copy, Debug)]
pub struct PathView<'a> {
    pub returns: &'a [f64],
    pub deflators: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn from_panel(panel: &'a ScenarioPanel, path: usize) -> Self {
        Self {
            returns: panel.path_returns(path),
            deflators: panel.path_deflators(path),
        }
    }
}

/// State visible to a controller before it chooses consumption.
#[derive(Clone, Copy, Debug)]
pub struct Observation<T> {
    pub t: usize,
    pub age: u32,
    /// Nominal wealth at the start of the year.
    pub wealth: T,
    /// Nominal age pension for the year.
    pub pension: T,
    /// `wealth + pension`, the most that may be consumed.
    pub resources: T,
    /// Portfolio return over the previous year; 0 at retirement.
    pub last_return: f64,
    pub deflator: f64,
    /// Initial nominal balance.
    pub initial_wealth: f64,
}

/// Chooses nominal consumption in `[0, resources]`.
pub trait Controller<T: Real> {
    fn consumption(&self, obs: &Observation<T>) -> T;
}

/// The neural-network policy.
#[derive(Clone, Copy, Debug)]
pub struct PolicyController<'a> {
    pub params: &'a MlpParams,
    pub norm: Normalization,
}

impl<T: Real> Controller<T> for PolicyController<'_> {
    fn consumption(&self, obs: &Observation<T>) -> T {
        let input = PolicyInput {
            t: obs.t,
            wealth: obs.wealth,
            last_return: obs.last_return,
            deflator: obs.deflator,
        };
        consumption(self.params, &self.norm, &input, obs.resources)
    }
}

/// Wraps a closure over plain observations.
pub struct FnController<F>(pub F);

impl<F: Fn(&Observation<f64>) -> f64> Controller<f64> for FnController<F> {
    fn consumption(&self, obs: &Observation<f64>) -> f64 {
        (self.0)(obs)
    }
}

/// Real (deflated) quantities along one simulated retirement.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub ages: Vec<u32>,
    pub inflation_factor: Vec<f64>,
    pub portfolio_return: Vec<f64>,
    pub consumption: Vec<f64>,
    pub wealth: Vec<f64>,
    pub pension: Vec<f64>,
    pub utility: f64,
}

impl PathRecord {
    /// Consumption over wealth for each year (infinite once wealth is exhausted).
    pub fn consumption_rate(&self) -> Vec<f64> {
        self.consumption
            .iter()
            .zip(&self.wealth)
            .map(|(c, w)| c / w)
            .collect()
    }
}

/// Runs the controlled transition from `wealth0` and returns the realized
/// lifetime utility `sum_t tpx[t] u(c_t) + dq[t] v(w_t)`.
pub fn run_path<T: Real, C: Controller<T> + ?Sized>(
    env: &Environment,
    controller: &C,
    path: PathView<'_>,
    wealth0: T,
    mut record: Option<&mut PathRecord>,
) -> Result<T> {
    let horizon = env.horizon();
    if path.returns.len() <= horizon || path.deflators.len() <= horizon {
        return Err(Error::Config(format!(
            "scenario covers {} years, horizon needs {}",
            path.returns.len().min(path.deflators.len()),
            horizon + 1
        )));
    }
    let curve = &env.survival;
    let mut wealth = wealth0;
    let mut total = wealth0.lift(0.0);
    if let Some(r) = record.as_deref_mut() {
        *r = PathRecord::default();
    }

    for t in 0..=horizon {
        let q = path.deflators[t];
        let numeric = |what: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Numeric(format!("non-finite {what} ({v}) at t = {t}")))
            }
        };
        numeric("wealth", wealth.value())?;

        if curve.dq[t] != 0.0 {
            total = total + period_bequest(wealth / q, &env.utility) * curve.dq[t];
        }

        let pension = age_pension_generic(wealth, q, &env.pension);
        let resources = wealth + pension;
        let obs = Observation {
            t,
            age: env.retirement_age + t as u32,
            wealth,
            pension,
            resources,
            last_return: if t == 0 { 0.0 } else { path.returns[t] },
            deflator: q,
            initial_wealth: env.initial_wealth,
        };
        let c = controller.consumption(&obs);
        check_consumption(t, c.value(), resources.value())?;

        total = total + period_consumption(c / q, &env.utility) * curve.tpx[t];
        numeric("utility", total.value())?;

        if let Some(r) = record.as_deref_mut() {
            r.ages.push(obs.age);
            r.inflation_factor.push(q);
            r.portfolio_return.push(path.returns[t]);
            r.consumption.push(c.value() / q);
            r.wealth.push(wealth.value() / q);
            r.pension.push(pension.value() / q);
        }

        if t < horizon {
            let fee = fees_generic(wealth, q, &env.account);
            wealth = next_wealth(wealth, c, pension, fee, path.returns[t + 1]);
        }
    }
    if let Some(r) = record {
        r.utility = total.value();
    }
    Ok(total)
}

/// Plain-valued run starting from the environment's initial wealth.
pub fn evaluate_path<C: Controller<f64> + ?Sized>(
    env: &Environment,
    controller: &C,
    path: PathView<'_>,
) -> Result<f64> {
    run_path(env, controller, path, env.initial_wealth, None)
}

/// Plain-valued run that also records the real consumption and wealth paths.
pub fn record_path<C: Controller<f64> + ?Sized>(
    env: &Environment,
    controller: &C,
    path: PathView<'_>,
) -> Result<PathRecord> {
    let mut rec = PathRecord::default();
    run_path(env, controller, path, env.initial_wealth, Some(&mut rec))?;
    Ok(rec)
}
