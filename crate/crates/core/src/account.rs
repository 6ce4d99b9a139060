//! Age pension means tests, fund fees, the inflation deflator and the
//! one-year wealth transition.
//!
//! All dollar thresholds are indexed by the compound deflator `Q`, so real
//! quantities depend only on real wealth `W / Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::Real;

/// Single homeowner means-test constants (June 2020).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PensionParams {
    /// Full annual pension.
    pub max_pension: f64,
    /// Asset-test free area.
    pub asset_free_area: f64,
    /// Asset taper per fortnight per dollar of excess assets.
    pub asset_taper: f64,
    /// Income-test free area, per year.
    pub income_free_area: f64,
    /// Deeming threshold between the lower and upper rate.
    pub deeming_threshold: f64,
    pub deeming_rate_low: f64,
    pub deeming_rate_high: f64,
    pub income_taper: f64,
    pub fortnights_per_year: f64,
}

impl Default for PensionParams {
    fn default() -> Self {
        Self {
            max_pension: 24_619.0,
            asset_free_area: 263_250.0,
            asset_taper: 0.003,
            income_free_area: 4_536.0,
            deeming_threshold: 51_800.0,
            deeming_rate_low: 0.0025,
            deeming_rate_high: 0.0225,
            income_taper: 0.5,
            fortnights_per_year: 26.0,
        }
    }
}

impl PensionParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.max_pension,
            self.asset_free_area,
            self.asset_taper,
            self.income_free_area,
            self.deeming_threshold,
            self.deeming_rate_low,
            self.deeming_rate_high,
            self.income_taper,
            self.fortnights_per_year,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("pension parameters must be finite and non-negative".into()));
        }
        if !(self.max_pension > 0.0) {
            return Err(Error::Config("maximum pension must be positive".into()));
        }
        if !(self.deeming_rate_low < self.deeming_rate_high) {
            return Err(Error::Config("lower deeming rate must be below the upper rate".into()));
        }
        Ok(())
    }

    /// Annual asset taper (fraction of excess assets per year).
    pub fn annual_asset_taper(&self) -> f64 {
        self.asset_taper * self.fortnights_per_year
    }

    /// Real wealth at which the asset test removes the whole pension.
    pub fn asset_cutoff(&self) -> f64 {
        self.asset_free_area + self.max_pension / self.annual_asset_taper()
    }
}

/// Portfolio mix and fund costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccountParams {
    /// Growth-asset share of the portfolio.
    pub omega: f64,
    /// Real annual administration fee.
    pub admin_fee: f64,
    pub indirect_cost_ratio: f64,
    pub investment_fee: f64,
}

impl Default for AccountParams {
    fn default() -> Self {
        Self {
            omega: 0.7,
            admin_fee: 50.0,
            indirect_cost_ratio: 0.006,
            investment_fee: 0.005,
        }
    }
}

impl AccountParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config(format!("omega {} outside [0, 1]", self.omega)));
        }
        let fees = [self.admin_fee, self.indirect_cost_ratio, self.investment_fee];
        if fees.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("fees must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn proportional_fee(&self) -> f64 {
        self.indirect_cost_ratio + self.investment_fee
    }
}

/// Nominal wealth, deflator and years since retirement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccountState<T = f64> {
    pub wealth: T,
    pub deflator: f64,
    pub t: usize,
}

/// `Q_t` for every `t` of an inflation path: `Q_0 = 1`, `Q_t = exp(q_1 + ... + q_t)`.
pub fn compound_deflators(inflation: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inflation.len());
    let mut acc = 0.0;
    for (t, q) in inflation.iter().enumerate() {
        if t > 0 {
            acc += q;
        }
        out.push(acc.exp());
    }
    if out.is_empty() {
        out.push(1.0);
    }
    out
}

/// `Q_t` for a single `t`; `inflation[0]` is the base year and is not compounded.
pub fn compound_deflator(inflation: &[f64], t: usize) -> Result<f64> {
    if t >= inflation.len().max(1) {
        return Err(Error::Range(format!(
            "t = {t} beyond an inflation path of length {}",
            inflation.len()
        )));
    }
    Ok(inflation.iter().take(t + 1).skip(1).sum::<f64>().exp())
}

/// Nominal age pension for nominal wealth `wealth` at deflator `deflator`.
pub fn age_pension(wealth: f64, deflator: f64, p: &PensionParams) -> Result<f64> {
    if !(wealth >= 0.0) {
        return Err(Error::Domain(format!("wealth must be non-negative, got {wealth}")));
    }
    if !(deflator > 0.0) {
        return Err(Error::Domain(format!("deflator must be positive, got {deflator}")));
    }
    Ok(age_pension_generic(wealth, deflator, p))
}

/// Pension in any scalar context; differentiable along the active branch.
pub fn age_pension_generic<T: Real>(wealth: T, deflator: f64, p: &PensionParams) -> T {
    let full = p.max_pension * deflator;
    let excess_assets = (wealth - p.asset_free_area * deflator).max_c(0.0);
    let asset_test = (-(excess_assets * p.annual_asset_taper()) + full).max_c(0.0);

    let threshold = p.deeming_threshold * deflator;
    let deemed = wealth.min_c(threshold) * p.deeming_rate_low
        + (wealth - threshold).max_c(0.0) * p.deeming_rate_high;
    let excess_income = (deemed - p.income_free_area * deflator).max_c(0.0);
    let income_test = (-(excess_income * p.income_taper) + full).max_c(0.0);

    asset_test.min_of(income_test)
}

/// Nominal fund fee for the year.
pub fn fees(wealth: f64, deflator: f64, p: &AccountParams) -> f64 {
    fees_generic(wealth, deflator, p)
}

pub fn fees_generic<T: Real>(wealth: T, deflator: f64, p: &AccountParams) -> T {
    wealth * p.proportional_fee() + p.admin_fee * deflator
}

/// `W' = max(W + A - C - fee, 0) * exp(R)` after checking `0 <= C <= W + A`.
pub fn wealth_step(
    state: &AccountState,
    consumption: f64,
    pension: f64,
    fee: f64,
    ret: f64,
) -> Result<AccountState> {
    check_consumption(state.t, consumption, state.wealth + pension)?;
    Ok(AccountState {
        wealth: next_wealth(state.wealth, consumption, pension, fee, ret),
        deflator: state.deflator,
        t: state.t + 1,
    })
}

pub(crate) fn check_consumption(t: usize, consumption: f64, available: f64) -> Result<()> {
    if !(consumption >= 0.0 && consumption <= available) {
        return Err(Error::Constraint {
            t,
            consumption,
            available,
        });
    }
    Ok(())
}

pub fn next_wealth<T: Real>(wealth: T, consumption: T, pension: T, fee: T, ret: f64) -> T {
    (wealth + pension - consumption - fee).max_c(0.0) * ret.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pension(w: f64, q: f64) -> f64 {
        age_pension(w, q, &PensionParams::default()).unwrap()
    }

    #[test]
    fn full_pension_with_no_assets() {
        assert_eq!(pension(0.0, 1.0), 24_619.0);
    }

    #[test]
    fn income_test_binds_at_asset_free_area() {
        assert!((pension(263_250.0, 1.0) - 24_443.4375).abs() < 1e-9);
    }

    #[test]
    fn asset_test_binds_at_half_million() {
        assert!((pension(500_000.0, 1.0) - 6_152.5).abs() < 1e-9);
    }

    #[test]
    fn cutoff() {
        let p = PensionParams::default();
        let cut = p.asset_cutoff();
        assert!((cut - 578_878.205).abs() < 0.01);
        assert_eq!(pension(cut + 1.0, 1.0), 0.0);
        assert!(pension(cut - 1.0, 1.0) > 0.0);
        assert_eq!(pension(2.0 * cut + 2.0, 2.0), 0.0);
    }

    #[test]
    fn negative_wealth_is_a_domain_error() {
        let p = PensionParams::default();
        assert!(matches!(age_pension(-1.0, 1.0, &p), Err(Error::Domain(_))));
        assert!(age_pension(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn fee_examples() {
        let p = AccountParams::default();
        assert!((fees(500_000.0, 1.0, &p) - 5_550.0).abs() < 1e-9);
        assert_eq!(fees(0.0, 1.0, &p), 50.0);
        assert!((fees(100_000.0, 2.0, &p) - 1_200.0).abs() < 1e-9);
    }

    #[test]
    fn deflators() {
        assert_eq!(compound_deflators(&[0.0; 5]), vec![1.0; 5]);
        let q = [0.3, 0.024, 0.01, -0.02];
        let d = compound_deflators(&q);
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 0.024f64.exp()).abs() < 1e-15);
        for t in 0..q.len() {
            assert_eq!(compound_deflator(&q, t).unwrap(), d[t]);
        }
        for t in 1..q.len() {
            assert!((d[t] / d[t - 1] - q[t].exp()).abs() < 1e-15);
        }
        assert!(compound_deflator(&q, 4).is_err());
    }

    #[test]
    fn wealth_step_examples() {
        let s = AccountState {
            wealth: 500_000.0,
            deflator: 1.0,
            t: 0,
        };
        let next = wealth_step(&s, 50_000.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(next.wealth, 450_000.0);
        assert_eq!(next.t, 1);

        let next = wealth_step(&s, 51_917.0, 6_152.5, 5_550.0, 0.0).unwrap();
        assert!((next.wealth - 448_685.5).abs() < 1e-9);

        let poor = AccountState {
            wealth: 100.0,
            deflator: 1.0,
            t: 3,
        };
        let a = 24_619.0;
        let next = wealth_step(&poor, 100.0 + a, a, 51.1, 0.05).unwrap();
        assert_eq!(next.wealth, 0.0);
    }

    #[test]
    fn consumption_outside_resources_is_rejected() {
        let s = AccountState {
            wealth: 1_000.0,
            deflator: 1.0,
            t: 7,
        };
        assert!(matches!(
            wealth_step(&s, 1_500.0, 100.0, 0.0, 0.0),
            Err(Error::Constraint { t: 7, .. })
        ));
        assert!(wealth_step(&s, -1.0, 100.0, 0.0, 0.0).is_err());
        assert!(wealth_step(&s, f64::NAN, 100.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn default_params_validate() {
        assert!(PensionParams::default().validate().is_ok());
        assert!(AccountParams::default().validate().is_ok());
        let bad = PensionParams {
            deeming_rate_low: 0.03,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
